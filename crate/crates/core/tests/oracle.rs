//! The game oracle against independent references: the scalar closed form,
//! a nalgebra implementation of the Riccati map, nested numerical min-max
//! dynamic programming, the LQR limit and direct series summation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rdpg::envs::LqGameSpec;
use rdpg::linalg::Matrix;
use rdpg::oracle::{
    closed_loop_hinf, exact_q_quadratic, hinf_norm_linear, riccati_map, solve_game_riccati, OracleError,
};

// Frozen from the scalar closed form below (a=0.9, b=d=q=r=1, η=2, γ=1).
const P_REF: f64 = 1.5868864269848268;
const K_REF: f64 = 0.6520960299831412;
const L_REF: f64 = 0.16302400749578533;

fn scalar(a: f64, eta: f64, gamma: f64) -> LqGameSpec<f64> {
    LqGameSpec::scalar(a, 1.0, 1.0, 1.0, 1.0, eta, gamma).unwrap()
}

/// Positive root of `γsP² + (1 - γqs - γa²)P - q = 0`, `s = b²/r - d²/η²`,
/// with `K = γabP / (r(1 + γsP))` and `L = γadP / (η²(1 + γsP))`.
fn scalar_closed_form(a: f64, b: f64, d: f64, q: f64, r: f64, eta: f64, gamma: f64) -> (f64, f64, f64) {
    let s = b * b / r - d * d / (eta * eta);
    let (qa, qb, qc) = (gamma * s, 1.0 - gamma * q * s - gamma * a * a, -q);
    let p = (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
    let den = 1.0 + gamma * s * p;
    (p, gamma * a * b * p / (r * den), gamma * a * d * p / (eta * eta * den))
}

fn to_na(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Riccati fixed point with an explicit inverse of the joint Hessian block.
fn nalgebra_game_riccati(spec: &LqGameSpec<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (a, b, d, q, r) = (to_na(&spec.a), to_na(&spec.b), to_na(&spec.d), to_na(&spec.q), to_na(&spec.r));
    let (m, l) = (b.ncols(), d.ncols());
    let g = spec.gamma;
    let bd = {
        let mut x = DMatrix::zeros(a.nrows(), m + l);
        x.view_mut((0, 0), (a.nrows(), m)).copy_from(&b);
        x.view_mut((0, m), (a.nrows(), l)).copy_from(&d);
        x
    };
    let mut weight = DMatrix::zeros(m + l, m + l);
    weight.view_mut((0, 0), (m, m)).copy_from(&r);
    weight.view_mut((m, m), (l, l)).copy_from(&(DMatrix::identity(l, l) * -(spec.eta * spec.eta)));
    let mut p = q.clone();
    let mut gains = DMatrix::zeros(m + l, a.nrows());
    for _ in 0..100_000 {
        let h = &weight + (bd.transpose() * &p * &bd) * g;
        gains = h.try_inverse().unwrap() * (bd.transpose() * &p * &a) * g;
        let next = &q + (a.transpose() * &p * &a) * g - (a.transpose() * &p * &bd * &gains) * g;
        let diff = (&next - &p).abs().max();
        p = next;
        if diff < 1e-14 {
            break;
        }
    }
    let k = gains.rows(0, m).into_owned();
    let l_gain = -gains.rows(m, l).into_owned();
    (p, k, l_gain)
}

fn random_spec(rng: &mut ChaCha8Rng, n: usize, m: usize, l: usize) -> LqGameSpec<f64> {
    let mut mat = |r: usize, c: usize, s: f64| -> Matrix<f64> {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-s..s)).collect()).unwrap()
    };
    let a = mat(n, n, 0.7);
    let b = mat(n, m, 1.0);
    let d = mat(n, l, 0.5);
    let mq = mat(n, n, 1.0);
    let q = &(&mq.transpose() * &mq) + &Matrix::identity(n).scale(0.1);
    let mr = mat(m, m, 0.5);
    let r = &(&mr.transpose() * &mr) + &Matrix::identity(m);
    let mut eta = 1.0;
    loop {
        let spec = LqGameSpec::new(a.clone(), b.clone(), d.clone(), q.clone(), r.clone(), eta, 0.97, 1.0).unwrap();
        match solve_game_riccati(&spec, 1e-12, 100_000) {
            Ok(_) => return spec,
            Err(OracleError::SpectralCondition { .. }) => eta *= 1.5,
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn scalar_reference_values_are_frozen_from_the_closed_form() {
    let (p, k, l) = scalar_closed_form(0.9, 1.0, 1.0, 1.0, 1.0, 2.0, 1.0);
    assert!((p - P_REF).abs() < 1e-14 && (k - K_REF).abs() < 1e-14 && (l - L_REF).abs() < 1e-14);
    let sol = solve_game_riccati(&scalar(0.9, 2.0, 1.0), 1e-13, 10_000).unwrap();
    assert!((sol.p_matrix[(0, 0)] - P_REF).abs() < 1e-11);
    assert!((sol.k_gain[(0, 0)] - K_REF).abs() < 1e-11);
    assert!((sol.l_gain[(0, 0)] - L_REF).abs() < 1e-11);
}

#[test]
fn scalar_closed_form_over_a_parameter_sweep() {
    for a in [-1.1, -0.5, 0.3, 0.95, 1.2] {
        for eta in [1.5, 3.0, 10.0] {
            for gamma in [0.9, 1.0] {
                let spec = LqGameSpec::scalar(a, 0.8, 0.6, 2.0, 0.5, eta, gamma).unwrap();
                let (p, k, l) = scalar_closed_form(a, 0.8, 0.6, 2.0, 0.5, eta, gamma);
                let sol = solve_game_riccati(&spec, 1e-12, 100_000).unwrap();
                assert!((sol.p_matrix[(0, 0)] - p).abs() < 1e-9 * p, "a={a} eta={eta} gamma={gamma}");
                assert!((sol.k_gain[(0, 0)] - k).abs() < 1e-9);
                assert!((sol.l_gain[(0, 0)] - l).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn matches_nalgebra_riccati_on_random_specs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (n, m, l) in [(2, 1, 1), (2, 2, 1), (3, 1, 2), (2, 2, 2)] {
        for _ in 0..5 {
            let spec = random_spec(&mut rng, n, m, l);
            let sol = solve_game_riccati(&spec, 1e-13, 100_000).unwrap();
            let (p, k, lg) = nalgebra_game_riccati(&spec);
            let scale = p.abs().max().max(1.0);
            assert!((to_na(&sol.p_matrix) - &p).abs().max() < 1e-9 * scale);
            assert!((to_na(&sol.k_gain) - &k).abs().max() < 1e-8 * scale);
            assert!((to_na(&sol.l_gain) - &lg).abs().max() < 1e-8 * scale);
        }
    }
}

fn golden_section(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, maximize: bool) -> f64 {
    let sign = if maximize { -1.0 } else { 1.0 };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let x1 = hi - phi * (hi - lo);
        let x2 = lo + phi * (hi - lo);
        if sign * f(x1) < sign * f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    0.5 * (lo + hi)
}

/// `p_{t}` from `min_u max_w [q + r u² - η² w² + γ p_{t+1}(a + bu + dw)²]` at `x = 1`,
/// solved by nested golden-section search.
#[test]
fn backward_min_max_dynamic_programming_converges_to_p() {
    let (a, b, d, q, r, eta, gamma) = (0.9, 1.0, 1.0, 1.0, 1.0, 2.0, 1.0);
    let mut p = 0.0;
    for _ in 0..200 {
        let stage = |u: f64, w: f64| q + r * u * u - eta * eta * w * w + gamma * p * (a + b * u + d * w).powi(2);
        let inner = |u: f64| {
            let w = golden_section(|w| stage(u, w), -5.0, 5.0, true);
            stage(u, w)
        };
        let u = golden_section(inner, -5.0, 5.0, false);
        p = inner(u);
    }
    assert!((p - P_REF).abs() < 1e-9, "dp {p} vs {P_REF}");
}

#[test]
fn large_eta_recovers_the_lqr_solution() {
    let (a, b, q, r): (f64, f64, f64, f64) = (1.1, 0.7, 1.0, 0.5);
    // Scalar DARE: b²P² + (r - a²r - q b²)P - q r = 0.
    let (qa, qb, qc) = (b * b, r - a * a * r - q * b * b, -q * r);
    let p_lqr = (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
    let spec: LqGameSpec<f64> = LqGameSpec::scalar(a, b, 1.0, q, r, 1e6, 1.0).unwrap();
    let sol = solve_game_riccati(&spec, 1e-13, 100_000).unwrap();
    assert!((sol.p_matrix[(0, 0)] - p_lqr).abs() < 1e-8);
    assert!(sol.l_gain[(0, 0)].abs() < 1e-9);
}

#[test]
fn p_decreases_as_eta_grows() {
    let mut prev = f64::INFINITY;
    for eta in [1.8, 2.0, 4.0, 100.0] {
        let p = solve_game_riccati(&scalar(0.9, eta, 1.0), 1e-12, 100_000).unwrap().p_matrix[(0, 0)];
        assert!(p < prev);
        prev = p;
    }
}

/// `P_eval` against the truncated series `Σ γᵏ (A_clᵀ)ᵏ M A_clᵏ`.
#[test]
fn policy_evaluation_matches_series_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let spec = random_spec(&mut rng, 2, 1, 1);
        let sol = solve_game_riccati(&spec, 1e-12, 100_000).unwrap();
        let k = sol.k_gain.scale(0.8);
        let l = sol.l_gain.scale(0.5);
        let qq = exact_q_quadratic(&spec, &k, &l).unwrap();
        let (a, b, d) = (to_na(&spec.a), to_na(&spec.b), to_na(&spec.d));
        let (kn, ln) = (to_na(&k), to_na(&l));
        let acl = &a - &b * &kn + &d * &ln;
        let stage = to_na(&spec.q) + kn.transpose() * to_na(&spec.r) * &kn
            - ln.transpose() * &ln * (spec.eta * spec.eta);
        let mut sum = DMatrix::zeros(2, 2);
        let mut pw = DMatrix::identity(2, 2);
        for j in 0..5000 {
            sum += spec.gamma.powi(j) * pw.transpose() * &stage * &pw;
            pw = &acl * pw;
        }
        assert!((to_na(&qq.p_eval) - &sum).abs().max() < 1e-9 * sum.abs().max());
    }
}

#[test]
fn on_policy_q_equals_the_value_and_the_map_residual_is_tiny() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let spec = random_spec(&mut rng, 2, 1, 1);
        let sol = solve_game_riccati(&spec, 1e-12, 100_000).unwrap();
        let step = riccati_map(&spec, &sol.p_matrix).unwrap();
        assert!((&step.next - &sol.p_matrix).norm_inf() <= 1e-10);
        let qq = exact_q_quadratic(&spec, &sol.k_gain, &sol.l_gain).unwrap();
        for _ in 0..50 {
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let u = sol.user_action(&x);
            let w = sol.adversary_action(&x);
            let v = sol.value(&x);
            assert!((qq.evaluate(&x, &u, &w) - v).abs() < 1e-8 * v.abs().max(1.0));
        }
    }
}

#[test]
fn hinf_of_first_order_lag() {
    let h: f64 = hinf_norm_linear(&Matrix::scalar(0.5), &Matrix::scalar(1.0), &Matrix::scalar(1.0), 4096).unwrap();
    assert!((h - 2.0).abs() < 1e-4);
    let h: f64 = hinf_norm_linear(&Matrix::scalar(-0.5), &Matrix::scalar(1.0), &Matrix::scalar(1.0), 4096).unwrap();
    assert!((h - 2.0).abs() < 1e-4, "peak at ω = π");
}

/// Dense frequency sweep with nalgebra SVD as the reference.
#[test]
fn hinf_matches_dense_svd_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let spec = random_spec(&mut rng, 2, 1, 2);
        let sol = solve_game_riccati(&spec, 1e-12, 100_000).unwrap();
        let ours = closed_loop_hinf(&spec, &sol.k_gain, 4096).unwrap();
        let acl = to_na(&spec.a) - to_na(&spec.b) * to_na(&sol.k_gain);
        let weight = &spec.q + &(&(&sol.k_gain.transpose() * &spec.r) * &sol.k_gain);
        let c = to_na(&weight.psd_sqrt().unwrap());
        let d = to_na(&spec.d);
        let cc = |m: &DMatrix<f64>| m.map(|v| nalgebra::Complex::new(v, 0.0));
        let mut best = 0.0f64;
        for i in 0..=20_000 {
            let w = std::f64::consts::PI * i as f64 / 20_000.0;
            let z = nalgebra::Complex::new(w.cos(), w.sin());
            let m = DMatrix::<nalgebra::Complex<f64>>::identity(2, 2) * z - cc(&acl);
            let g = cc(&c) * m.try_inverse().unwrap() * cc(&d);
            best = best.max(g.singular_values().max());
        }
        assert!(ours >= best - 1e-6 && ours <= best * (1.0 + 1e-4), "{ours} vs {best}");
    }
}

#[test]
fn infeasible_eta_is_a_domain_error() {
    assert!(matches!(
        solve_game_riccati(&scalar(0.9, 0.5, 1.0), 1e-10, 1000),
        Err(OracleError::SpectralCondition { .. })
    ));
}
