//! CSV emission.

use std::io::Write;

use crate::error::Result;
use crate::netgraph::MixingMatrix;

use super::sweep::ResultTable;

pub const RESULT_HEADER: &str = "sweep_id,method,alpha,beta,k,dist2_opt,dist2_fixed,avg_dist2_opt,consensus_err";
const BOUND_COLUMNS: [&str; 2] = ["bound_fixed", "bound_opt"];

/// 17 significant digits; `inf` on divergence.
pub fn format_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

pub fn write_results(table: &ResultTable, out: &mut impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = RESULT_HEADER.split(',').collect();
    if table.with_bounds {
        header.extend(BOUND_COLUMNS);
    }
    w.write_record(&header)?;
    for r in &table.rows {
        let mut rec = vec![
            r.sweep_id.to_string(),
            r.method.name().to_string(),
            format_f64(r.alpha),
            format_f64(r.beta),
            r.k.to_string(),
            format_f64(r.dist2_opt),
            format_opt(r.dist2_fixed),
            format_f64(r.avg_dist2_opt),
            format_f64(r.consensus_err),
        ];
        if table.with_bounds {
            rec.push(format_opt(r.bound_fixed));
            rec.push(format_opt(r.bound_opt));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `topology,index,eigenvalue` rows, eigenvalues non-increasing.
pub fn write_spectrum(entries: &[(String, &MixingMatrix)], out: &mut impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["topology", "index", "eigenvalue"])?;
    for (label, m) in entries {
        for (i, v) in m.spectrum.iter().enumerate() {
            w.write_record([label.clone(), i.to_string(), format_f64(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}
