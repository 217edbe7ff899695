use dsgd::algorithms::{dasg_step, dsg_step, run, standard_beta, NoiseSource, Plan, RunOptions, RunState};
use dsgd::analysis::{
    dasg_bound, dsg_bound, fixed_point, masg_epsilon_complexity, mi_check, rho_dsg, BoundInputs, BoundTarget,
    MasgInputs, PenalizedObjective,
};
use dsgd::linalg::{dist2_sq, dot, norm2_sq, sub, Matrix};
use dsgd::netgraph::{build_mixing, shift_mixing, MixingMatrix, Topology, WeightRule};
use dsgd::noise::{sample_gradient, NoiseSpec};
use dsgd::objectives::{
    random_aligned_quadratic, random_quadratic, synthetic_logistic, LogisticParams, ObjectiveSuite, QuadraticLocal,
};
use dsgd::oracles::{fd_gradient, jacobi_eigen, lyapunov_iterate, mc_stationary_variance, power_spectral_radius};
use dsgd::quadratic_exact::{
    aq_spectrum, finite_k_bounds_quadratic, node_avg_var_bound, rho_dasg_quadratic, var_dasg_exact, var_dsg_exact,
    QuadBoundInputs,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn shifted_ring3() -> MixingMatrix {
    shift_mixing(&build_mixing(&Topology::Ring { n: 3 }, WeightRule::Metropolis).unwrap(), 1.0).unwrap()
}

fn small_logistic() -> ObjectiveSuite {
    let params = LogisticParams { nodes: 3, samples: 60, dim: 4, ..LogisticParams::default() };
    synthetic_logistic(&params, &mut rng(9)).unwrap()
}

fn assert_fd_close(analytic: &[f64], numeric: &[f64]) {
    let scale = norm2_sq(analytic).sqrt().max(1e-8);
    for (a, n) in analytic.iter().zip(numeric) {
        assert!((a - n).abs() <= 1e-5 * scale, "{a} vs {n}");
    }
}

#[test]
fn local_gradients_match_finite_differences() {
    let mut r = rng(1);
    for suite in [random_quadratic(3, 4, 0.5, 3.0, &mut rng(2)).unwrap(), small_logistic()] {
        for i in 0..suite.node_count() {
            let x: Vec<f64> = (0..suite.dim()).map(|_| r.gen_range(-2.0..2.0)).collect();
            let h = 1e-6 * (1.0 + norm2_sq(&x).sqrt());
            let numeric = fd_gradient(|y| suite.value_local(i, y).unwrap(), &x, h);
            assert_fd_close(&suite.grad_local(i, &x).unwrap(), &numeric);
        }
    }
}

#[test]
fn penalized_gradient_matches_finite_differences() {
    let w = build_mixing(&Topology::Ring { n: 3 }, WeightRule::Metropolis).unwrap();
    let mut r = rng(3);
    for suite in [random_quadratic(3, 2, 0.5, 3.0, &mut rng(4)).unwrap(), small_logistic()] {
        let obj = PenalizedObjective::new(&w, 0.1, &suite).unwrap();
        let x: Vec<f64> = (0..3 * suite.dim()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let h = 1e-6 * (1.0 + norm2_sq(&x).sqrt());
        let numeric = fd_gradient(|y| obj.value(y).unwrap(), &x, h);
        assert_fd_close(&obj.grad(&x).unwrap(), &numeric);
    }
}

#[test]
fn quadratic_curvature_within_mu_and_l() {
    let suite = random_quadratic(4, 3, 0.4, 2.5, &mut rng(5)).unwrap();
    let mut r = rng(6);
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| r.gen_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| r.gen_range(-3.0..3.0)).collect();
        let d2 = dist2_sq(&x, &y);
        for i in 0..4 {
            let g = sub(&suite.grad_local(i, &x).unwrap(), &suite.grad_local(i, &y).unwrap());
            let inner = dot(&g, &sub(&x, &y));
            assert!(suite.mu * d2 <= inner * (1.0 + 1e-12) && inner <= suite.lipschitz * d2 * (1.0 + 1e-12));
        }
    }
}

#[test]
fn gaussian_noise_moments() {
    let suite = random_quadratic(2, 3, 0.5, 2.0, &mut rng(7)).unwrap();
    let spec = NoiseSpec::GaussianIso { sigma: 1.5 };
    let x = vec![0.3, -0.2, 1.0];
    let truth = suite.grad_local(1, &x).unwrap();
    let draws = 100_000;
    let mut r = rng(8);
    let mut mean = vec![0.0; 3];
    let mut sq = 0.0;
    for _ in 0..draws {
        let g = sample_gradient(&spec, &suite, 1, &x, &mut r).unwrap();
        let dev = sub(&g, &truth);
        sq += norm2_sq(&dev);
        mean.iter_mut().zip(&dev).for_each(|(m, v)| *m += v / draws as f64);
    }
    let per_coord_sd = 1.5 / 3f64.sqrt();
    for m in &mean {
        assert!(m.abs() <= 4.0 * per_coord_sd / (draws as f64).sqrt(), "{m}");
    }
    assert!(rel(sq / draws as f64, 2.25) < 0.05);
}

#[test]
fn power_iteration_agrees_with_eigensolvers_on_symmetric_matrices() {
    let mut r = rng(10);
    for n in 2..7 {
        let a = Matrix::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0));
        let s = a.add(&a.transpose()).scale(0.5);
        let jac = jacobi_eigen(&s).unwrap().values;
        let jmax = jac.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let power = power_spectral_radius(&s, 1e-12, 1_000_000).unwrap();
        assert!((power - jmax).abs() < 1e-8, "{power} vs {jmax}");
        let mut na: Vec<f64> = to_nalgebra(&s).symmetric_eigen().eigenvalues.iter().copied().collect();
        na.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in jac.iter().zip(&na) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn rho_dasg_matches_nalgebra_eigenvalues() {
    let w = shifted_ring3();
    for seed in 0..5 {
        let suite = random_quadratic(3, 2, 0.5, 3.0, &mut rng(100 + seed)).unwrap();
        let alpha = 0.7 * w.lambda_min / suite.lipschitz;
        for beta in [0.0, 0.4, standard_beta(alpha, suite.mu)] {
            let a = dsgd::quadratic_exact::a_dasg_matrix(&w, alpha, beta, &suite).unwrap();
            let eig = to_nalgebra(&a).complex_eigenvalues();
            let radius = eig.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            let closed = rho_dasg_quadratic(&aq_spectrum(&w, alpha, &suite).unwrap(), beta);
            assert!((radius - closed).abs() < 1e-8, "{radius} vs {closed}");
        }
    }
}

/// Reference-type local Hessians with every minimizer at the origin, so
/// `x^∞ = 0` and iterates carry no absolute roundoff floor.
fn centered_suite() -> ObjectiveSuite {
    let base = random_aligned_quadratic(3, 2, 1.0, 4.0, &mut rng(7)).unwrap();
    let locals = base
        .quadratic_locals()
        .unwrap()
        .iter()
        .map(|l| QuadraticLocal::new(l.q.clone(), vec![0.0; 2], 0.0).unwrap())
        .collect();
    ObjectiveSuite::quadratic(locals).unwrap()
}

// the squared 2-norm underflows near 1e−160
fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[test]
fn noiseless_dasg_rate_matches_spectral_radius() {
    let w = shifted_ring3();
    let suite = centered_suite();
    let alpha = w.lambda_min / suite.lipschitz;
    let beta = standard_beta(alpha, suite.mu);
    let rho = rho_dasg_quadratic(&aq_spectrum(&w, alpha, &suite).unwrap(), beta);
    let src = NoiseSource { master: 0, replicate: 0 };
    let mut state = RunState::new(vec![1.0, -0.5, 0.25, 2.0, -1.0, 0.5]);
    let mut mid = 0.0;
    for k in 1..=1000 {
        dasg_step(&mut state, &w, &suite, &NoiseSpec::Exact, alpha, beta, &src).unwrap();
        if k == 500 {
            mid = max_abs(&state.x_curr);
        }
    }
    let rate = (max_abs(&state.x_curr) / mid).powf(1.0 / 500.0);
    assert!(rate <= rho + 1e-3, "{rate} vs {rho}");
    assert!(rate >= rho - 1e-2, "{rate} vs {rho}");
}

#[test]
fn two_node_fixed_point_matches_solve_and_long_run() {
    let w = build_mixing(&Topology::Complete { n: 2 }, WeightRule::Metropolis).unwrap();
    assert!(w.matrix().sub(&Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]])).max_abs() < 1e-15);
    let locals =
        [1.0, -1.0].iter().map(|&a| QuadraticLocal::new(Matrix::identity(1), vec![a], 0.5 * a * a).unwrap()).collect();
    let suite = ObjectiveSuite::quadratic(locals).unwrap();
    let alpha = 0.2;
    // x = Wx − α(x − a)  ⇔  ((1+α)I − W)x = αa
    let m = Matrix::from_rows(&[vec![0.5 + alpha, -0.5], vec![-0.5, 0.5 + alpha]]);
    let direct = m.solve(&[alpha, -alpha]).unwrap();
    let solved = fixed_point(&w, alpha, &suite).unwrap();
    let mut state = RunState::new(vec![0.0, 0.0]);
    for _ in 0..10_000 {
        dsg_step(&mut state, &w, &suite, &NoiseSpec::Exact, alpha, &NoiseSource { master: 0, replicate: 0 }).unwrap();
    }
    for i in 0..2 {
        assert!((direct[i] - solved[i]).abs() < 1e-12);
        assert!((direct[i] - state.x_curr[i]).abs() < 1e-12);
    }
    assert!((direct[0] - alpha / (1.0 + alpha)).abs() < 1e-14);
}

#[test]
fn fixed_point_suboptimality_shrinks_linearly_in_alpha() {
    let w = build_mixing(&Topology::Ring { n: 5 }, WeightRule::Metropolis).unwrap();
    for seed in 0..5 {
        let suite = random_quadratic(5, 2, 0.5, 2.0, &mut rng(200 + seed)).unwrap();
        let c1 = suite.c1_constant();
        for alpha in [1e-2, 1e-3, 1e-4] {
            let x = fixed_point(&w, alpha, &suite).unwrap();
            for i in 0..5 {
                let gap = dist2_sq(&x[2 * i..2 * i + 2], &suite.x_star).sqrt();
                assert!(gap <= c1 * alpha / (1.0 - w.gamma), "seed {seed} alpha {alpha}: {gap}");
            }
        }
    }
}

#[test]
fn asymptotic_bounds_dominate_exact_variances() {
    let w = shifted_ring3();
    for seed in 0..5 {
        let suite = random_quadratic(3, 2, 1.0, 4.0, &mut rng(300 + seed)).unwrap();
        let x0 = vec![1.0; 6];
        for alpha in [0.02, 0.06, 0.12] {
            let spec = aq_spectrum(&w, alpha, &suite).unwrap();
            let beta = standard_beta(alpha, suite.mu);
            let inp = BoundInputs::gather(&w, &suite, 1.0, alpha, beta, &x0).unwrap();
            let far = [1_000_000u64];
            let dsg = dsg_bound(&far, &inp, BoundTarget::Fixed).unwrap();
            let dasg = dasg_bound(&far, &inp, BoundTarget::Fixed).unwrap();
            assert!(dsg.variance[0] >= var_dsg_exact(&spec, 1.0, 2, alpha).unwrap().variance);
            assert!(dasg.variance[0] >= var_dasg_exact(&spec, beta, 1.0, 2, alpha).unwrap().variance);
        }
    }
}

#[test]
fn stricter_rate_breaks_the_certificate() {
    let (mu, l, ln): (f64, f64, f64) = (1.0, 4.0, 0.5);
    let abar = (ln / l).min(1.0 / (l + mu));
    let witness = (0..20).map(|j| abar * 10f64.powf(-3.0 * j as f64 / 19.0)).find(|&alpha| {
        let rho = 0.999 * (1.0 - (alpha * mu).sqrt()).sqrt();
        let s = dsgd::analysis::s_alpha(alpha, mu);
        !mi_check(alpha, standard_beta(alpha, mu), rho, &s, mu, l, ln).unwrap().feasible
    });
    assert_eq!(witness, Some(abar));
}

#[test]
fn zero_momentum_certificate_follows_dsg_range() {
    let (mu, l, ln): (f64, f64, f64) = (1.0, 4.0, 0.5);
    let feasible_for = |alpha: f64| {
        let rho = (1.0 - alpha * mu).max(1e-3).sqrt();
        (-12..=12).any(|k| {
            let p = 10f64.powf(k as f64 / 4.0) / (2.0 * alpha);
            let pm = Matrix::from_rows(&[vec![p, 0.0], vec![0.0, 0.0]]);
            mi_check(alpha, 0.0, rho, &pm, mu, l, ln).unwrap().feasible
        })
    };
    let hi = 1.0 / (l + mu);
    for j in 1..=20 {
        let alpha = hi * j as f64 / 20.0;
        assert!(feasible_for(alpha), "alpha {alpha}");
        assert!(rho_dsg(alpha, mu, l, ln).unwrap() < 1.0);
    }
    assert!(!feasible_for(1.05 * (1.0 + ln) / l));
}

#[test]
fn masg_epsilon_complexity_decreases_in_epsilon() {
    let inp =
        MasgInputs { n: 4, sigma: 1.0, mu: 0.5, l: 4.0, lambda_n: 0.4, gamma: 0.6, c1: 3.0, init_dist2_opt: 10.0 };
    let values: Vec<f64> =
        [1.0, 0.1, 0.01, 0.001].iter().map(|&e| masg_epsilon_complexity(e, 10.0, &inp).unwrap()).collect();
    assert!(values.windows(2).all(|p| p[0] < p[1]));
}

#[test]
fn ar1_chain_variance() {
    use rand_distr::{Distribution, StandardNormal};
    let est = mc_stationary_variance(
        |r| {
            let mut g = rng(1000 + r);
            let mut x = 0.0f64;
            move || {
                let w: f64 = StandardNormal.sample(&mut g);
                x = 0.5 * x + w;
                x * x
            }
        },
        100,
        2000,
        200,
    );
    assert!(est.within(4.0 / 3.0, 3.0), "{est:?}");
    let lyap = lyapunov_iterate(&Matrix::from_rows(&[vec![0.5]]), &Matrix::identity(1), 1e-15, 1000).unwrap();
    assert!((lyap.trace - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn node_average_variance_below_bound_on_ring3() {
    let w = shifted_ring3();
    let suite = random_quadratic(3, 1, 1.0, 4.0, &mut rng(11)).unwrap();
    let alpha = 0.05;
    let x_inf = fixed_point(&w, alpha, &suite).unwrap();
    let avg_inf = x_inf.iter().sum::<f64>() / 3.0;
    let noise = NoiseSpec::GaussianIso { sigma: 1.0 };
    let (w_ref, s_ref, x_ref) = (&w, &suite, &x_inf);
    let est = mc_stationary_variance(
        |r| {
            let src = NoiseSource { master: 12, replicate: r };
            let mut state = RunState::new(x_ref.clone());
            move || {
                dsg_step(&mut state, w_ref, s_ref, &noise, alpha, &src).unwrap();
                (state.x_curr.iter().sum::<f64>() / 3.0 - avg_inf).powi(2)
            }
        },
        500,
        500,
        2000,
    );
    let bound = node_avg_var_bound(&aq_spectrum(&w, alpha, &suite).unwrap(), 0.0, 1.0, 3, 1, alpha).unwrap();
    assert!(est.mean - 3.0 * est.stderr <= bound, "{est:?} vs {bound}");
}

#[test]
fn monte_carlo_below_finite_k_bound() {
    let w = shifted_ring3();
    let suite = random_quadratic(3, 2, 1.0, 4.0, &mut rng(13)).unwrap();
    let alpha = 0.05;
    let x0 = vec![2.0; 6];
    let x_inf = fixed_point(&w, alpha, &suite).unwrap();
    let noise = NoiseSpec::GaussianIso { sigma: 1.0 };
    let opts = RunOptions { replicates: 500, record_every: 10, seed: 14, per_node: false };
    let trace = run(&Plan::Dsg { alpha, iters: 1000 }, &w, &suite, &noise, &x0, Some(&x_inf), &opts).unwrap();
    let inp = QuadBoundInputs {
        spectrum: aq_spectrum(&w, alpha, &suite).unwrap(),
        beta: 0.0,
        sigma: 1.0,
        n: 3,
        d: 2,
        mu: suite.mu,
        l: suite.lipschitz,
        lambda_n: w.lambda_min,
        gamma: w.gamma,
        c1: suite.c1_constant(),
        xi0_norm2: dist2_sq(&x0, &x_inf),
        init_dist2_opt: 0.0,
    };
    let ks = [10u64, 100, 1000];
    let bound = finite_k_bounds_quadratic(&ks, &inp, false, BoundTarget::Fixed).unwrap();
    for (i, &k) in ks.iter().enumerate() {
        let p = trace.points.iter().find(|p| p.k == k).unwrap();
        let (m, se) = (p.dist2_fixed.unwrap(), p.dist2_fixed_se.unwrap());
        assert!(m - 3.0 * se <= bound.total[i], "k {k}: {m} ± {se} vs {}", bound.total[i]);
    }
}

#[test]
fn scalar_tail_average_matches_closed_form() {
    let w = MixingMatrix::from_matrix(Matrix::identity(1)).unwrap();
    let locals = vec![QuadraticLocal::new(Matrix::from_rows(&[vec![2.0]]), vec![1.0], 0.0).unwrap()];
    let suite = ObjectiveSuite::quadratic(locals).unwrap();
    let alpha = 0.1;
    let exact = var_dsg_exact(&aq_spectrum(&w, alpha, &suite).unwrap(), 1.0, 1, alpha).unwrap().variance;
    assert!(rel(exact, 0.01 / (1.0 - 0.64)) < 1e-12);
    let opts = RunOptions { replicates: 1000, record_every: 1, seed: 15, per_node: false };
    let x0 = fixed_point(&w, alpha, &suite).unwrap();
    let noise = NoiseSpec::GaussianIso { sigma: 1.0 };
    let trace = run(&Plan::Dsg { alpha, iters: 600 }, &w, &suite, &noise, &x0, Some(&x0), &opts).unwrap();
    let tail: Vec<f64> = trace.points.iter().filter(|p| p.k >= 100).map(|p| p.dist2_fixed.unwrap()).collect();
    let avg = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!(rel(avg, exact) < 0.05, "{avg} vs {exact}");
}
