//! Exact solutions for the linear-quadratic game: the saddle-point Riccati
//! recursion, on-policy quadratic Q-functions and the H∞ norm of a stable
//! discrete-time system.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::envs::LqGameSpec;
use crate::linalg::{complex_solve, LinalgError, Matrix};
use crate::scalar::Scalar;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_GRID_POINTS: usize = 4096;
pub const MIN_GRID_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("invalid game: {0}")]
    InvalidSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(
        "spectral condition violated at iteration {iteration}: eta^2 I - gamma D'PD has eigenvalue {min_eigenvalue:e}; \
         eta is below the attenuation level this system admits"
    )]
    SpectralCondition { iteration: usize, min_eigenvalue: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("unstable system: spectral radius {spectral_radius} not below {limit}")]
    Unstable { spectral_radius: f64, limit: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Saddle point of the game: `V*(x) = xᵀPx`, `u = -Kx`, `w = Lx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct GameRiccatiSolution<T: Scalar> {
    pub p_matrix: Matrix<T>,
    pub k_gain: Matrix<T>,
    pub l_gain: Matrix<T>,
    pub iterations: usize,
    pub residual: T,
}

impl<T: Scalar> GameRiccatiSolution<T> {
    pub fn value(&self, x: &[T]) -> T {
        self.p_matrix.quadratic_form(x).expect("state dimension")
    }

    pub fn user_action(&self, x: &[T]) -> Vec<T> {
        self.k_gain.matvec(x).expect("state dimension").into_iter().map(|v| -v).collect()
    }

    pub fn adversary_action(&self, x: &[T]) -> Vec<T> {
        self.l_gain.matvec(x).expect("state dimension")
    }
}

/// One application of the game Riccati map.
#[derive(Debug, Clone)]
pub struct RiccatiStep<T: Scalar> {
    pub next: Matrix<T>,
    pub k_gain: Matrix<T>,
    pub l_gain: Matrix<T>,
    /// Smallest eigenvalue of `η²I - γDᵀPD`.
    pub spectral_margin: T,
}

/// `P ↦ Q + γAᵀPA - γ²[AᵀPB AᵀPD] M⁻¹ [BᵀPA; DᵀPA]` with
/// `M = [[R + γBᵀPB, γBᵀPD], [γDᵀPB, γDᵀPD - η²I]]`.
pub fn riccati_map<T: Scalar>(spec: &LqGameSpec<T>, p: &Matrix<T>) -> Result<RiccatiStep<T>, OracleError> {
    let (a, b, d) = (&spec.a, &spec.b, &spec.d);
    let (m, l) = (spec.user_dim(), spec.disturbance_dim());
    let g = spec.gamma;
    let eta2 = spec.eta * spec.eta;

    let dt = d.transpose();
    let dtpd = &(&dt * p) * d;
    let margin = (&Matrix::identity(l).scale(eta2) - &dtpd.scale(g)).min_symmetric_eigenvalue()?;

    let bd = b.hstack(d)?;
    let bdt = bd.transpose();
    let pa = p * a;
    let mut big = (&(&bdt * p) * &bd).scale(g);
    big.set_block(0, 0, &(&big.block(0, 0, m, m) + &spec.r));
    for i in 0..l {
        big[(m + i, m + i)] -= eta2;
    }
    let rhs = (&bdt * &pa).scale(g);
    let gains = big.solve(&rhs)?;
    let k_gain = gains.block(0, 0, m, spec.state_dim());
    let l_gain = gains.block(m, 0, l, spec.state_dim()).scale(-T::one());

    let at = a.transpose();
    let next = &(&spec.q + &(&at * &pa).scale(g)) - &(&(&at * &(p * &bd)) * &gains).scale(g);
    Ok(RiccatiStep { next: next.symmetrized(), k_gain, l_gain, spectral_margin: margin })
}

/// Value iteration on `P` from `P = Q` until `‖P - RiccatiMap(P)‖_∞ ≤ tol`.
///
/// The returned `P`, `K` and `L` come from the same block solve, so the
/// reported residual is exactly the one of the returned `P`.
pub fn solve_game_riccati<T: Scalar>(
    spec: &LqGameSpec<T>,
    tol: T,
    max_iter: usize,
) -> Result<GameRiccatiSolution<T>, OracleError> {
    let errs = spec.validate();
    if !errs.is_empty() {
        return Err(OracleError::InvalidSpec(errs.join("; ")));
    }
    if !(tol > T::zero()) {
        return Err(OracleError::InvalidArgument(format!("tolerance must be > 0, got {tol}")));
    }
    let mut p = spec.q.clone();
    let mut residual = T::infinity();
    for iteration in 0..max_iter {
        let step = riccati_map(spec, &p)?;
        if !(step.spectral_margin > T::zero()) {
            return Err(OracleError::SpectralCondition { iteration, min_eigenvalue: step.spectral_margin.as_f64() });
        }
        residual = (&step.next - &p).norm_inf();
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            return Ok(GameRiccatiSolution {
                p_matrix: p,
                k_gain: step.k_gain,
                l_gain: step.l_gain,
                iterations: iteration,
                residual,
            });
        }
        p = step.next;
    }
    Err(OracleError::NotConverged { iterations: max_iter, residual: residual.as_f64() })
}

/// `Q(z) = zᵀSz` over the joint vector `z = (x, u, w)` for fixed linear policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct QuadraticQ<T: Scalar> {
    pub s_matrix: Matrix<T>,
    /// On-policy value kernel, `V(x) = xᵀ P_eval x`.
    pub p_eval: Matrix<T>,
    pub state_dim: usize,
    pub user_dim: usize,
    pub disturbance_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QBlock {
    State,
    User,
    Disturbance,
}

impl<T: Scalar> QuadraticQ<T> {
    pub fn evaluate(&self, x: &[T], u: &[T], w: &[T]) -> T {
        let z: Vec<T> = x.iter().chain(u).chain(w).copied().collect();
        self.s_matrix.quadratic_form(&z).expect("joint dimension")
    }

    pub fn value(&self, x: &[T]) -> T {
        self.p_eval.quadratic_form(x).expect("state dimension")
    }

    fn range(&self, b: QBlock) -> (usize, usize) {
        let (n, m, l) = (self.state_dim, self.user_dim, self.disturbance_dim);
        match b {
            QBlock::State => (0, n),
            QBlock::User => (n, m),
            QBlock::Disturbance => (n + m, l),
        }
    }

    /// Sub-block of `S`, e.g. `(User, State)` for `S_ux`.
    pub fn block(&self, row: QBlock, col: QBlock) -> Matrix<T> {
        let (r0, rn) = self.range(row);
        let (c0, cn) = self.range(col);
        self.s_matrix.block(r0, c0, rn, cn)
    }
}

/// Closed-loop matrix `A - BK + DL`.
pub fn closed_loop<T: Scalar>(spec: &LqGameSpec<T>, k_gain: &Matrix<T>, l_gain: &Matrix<T>) -> Result<Matrix<T>, OracleError> {
    Ok(spec.a.try_sub(&spec.b.matmul(k_gain)?)?.try_add(&spec.d.matmul(l_gain)?)?)
}

/// Q-function of the policy pair `u = -Kx`, `w = Lx`.
///
/// Solves `P = Q + KᵀRK - η²LᵀL + γ A_clᵀ P A_cl` through its Kronecker form, then
/// `S = blockdiag(Q, R, -η²I) + γ [A B D]ᵀ P [A B D]`.
pub fn exact_q_quadratic<T: Scalar>(
    spec: &LqGameSpec<T>,
    k_gain: &Matrix<T>,
    l_gain: &Matrix<T>,
) -> Result<QuadraticQ<T>, OracleError> {
    let (n, m, l) = (spec.state_dim(), spec.user_dim(), spec.disturbance_dim());
    if k_gain.shape() != (m, n) || l_gain.shape() != (l, n) {
        return Err(OracleError::InvalidArgument(format!(
            "gains have shapes {:?} and {:?}, expected ({m}, {n}) and ({l}, {n})",
            k_gain.shape(),
            l_gain.shape()
        )));
    }
    let g = spec.gamma;
    let eta2 = spec.eta * spec.eta;
    let acl = closed_loop(spec, k_gain, l_gain)?;
    let rho = acl.spectral_radius()?;
    let limit = T::one() / g.sqrt();
    if !(rho < limit) {
        return Err(OracleError::Unstable { spectral_radius: rho.as_f64(), limit: limit.as_f64() });
    }

    let kt = k_gain.transpose();
    let lt = l_gain.transpose();
    let stage = &(&spec.q + &(&(&kt * &spec.r) * k_gain)) - &(&lt * l_gain).scale(eta2);
    // Row-major vec: vec(AᵀPA) = (Aᵀ ⊗ Aᵀ) vec(P).
    let aclt = acl.transpose();
    let lhs = &Matrix::identity(n * n) - &aclt.kron(&aclt).scale(g);
    let rhs = Matrix::from_vec(n * n, 1, stage.as_slice().to_vec())?;
    let p_eval = Matrix::from_vec(n, n, lhs.solve(&rhs)?.as_slice().to_vec())?.symmetrized();

    let dim = n + m + l;
    let mut s = Matrix::zeros(dim, dim);
    s.set_block(0, 0, &spec.q);
    s.set_block(n, n, &spec.r);
    s.set_block(n + m, n + m, &Matrix::identity(l).scale(-eta2));
    let f = spec.a.hstack(&spec.b)?.hstack(&spec.d)?;
    let tail = (&(&f.transpose() * &p_eval) * &f).scale(g);
    let s_matrix = (&s + &tail).symmetrized();
    Ok(QuadraticQ { s_matrix, p_eval, state_dim: n, user_dim: m, disturbance_dim: l })
}

/// `σ_max(C (e^{iω} I - A)⁻¹ D)`.
pub fn frequency_gain<T: Scalar>(a: &Matrix<T>, d: &Matrix<T>, c: &Matrix<T>, omega: T) -> Result<T, OracleError> {
    let n = a.rows();
    let l = d.cols();
    let p = c.rows();
    let z = Complex::new(omega.cos(), omega.sin());
    let mut lhs: Vec<Complex<T>> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            let diag = if i == j { z } else { Complex::new(T::zero(), T::zero()) };
            diag - Complex::new(a[(i, j)], T::zero())
        })
        .collect();
    let mut x: Vec<Complex<T>> = d.as_slice().iter().map(|&v| Complex::new(v, T::zero())).collect();
    complex_solve(n, &mut lhs, l, &mut x)?;
    // G = C X, p×l.
    let mut gmat = vec![Complex::new(T::zero(), T::zero()); p * l];
    for i in 0..p {
        for j in 0..l {
            let mut acc = Complex::new(T::zero(), T::zero());
            for k in 0..n {
                acc = acc + x[k * l + j] * c[(i, k)];
            }
            gmat[i * l + j] = acc;
        }
    }
    // GᴴG is Hermitian; its real embedding [[Re, -Im], [Im, Re]] has the same
    // eigenvalues, each doubled.
    let mut embed = Matrix::zeros(2 * l, 2 * l);
    for i in 0..l {
        for j in 0..l {
            let mut h = Complex::new(T::zero(), T::zero());
            for k in 0..p {
                h = h + gmat[k * l + i].conj() * gmat[k * l + j];
            }
            embed[(i, j)] = h.re;
            embed[(l + i, l + j)] = h.re;
            embed[(i, l + j)] = -h.im;
            embed[(l + i, j)] = h.im;
        }
    }
    let top = embed.symmetric_eigenvalues()?.last().copied().unwrap_or_else(T::zero);
    Ok(top.max(T::zero()).sqrt())
}

/// `sup_ω σ_max(C (e^{iω} I - A)⁻¹ D)` over `ω ∈ [0, π]`.
///
/// Uniform grid, then golden-section refinement in the bracket around the best
/// grid point. A lower bound on the true norm, tight to the grid resolution.
pub fn hinf_norm_linear<T: Scalar>(
    a_matrix: &Matrix<T>,
    d_matrix: &Matrix<T>,
    c_matrix: &Matrix<T>,
    grid_points: usize,
) -> Result<T, OracleError> {
    let n = a_matrix.rows();
    if !a_matrix.is_square() || d_matrix.rows() != n || c_matrix.cols() != n {
        return Err(OracleError::InvalidArgument(format!(
            "incompatible shapes A {:?}, D {:?}, C {:?}",
            a_matrix.shape(),
            d_matrix.shape(),
            c_matrix.shape()
        )));
    }
    if grid_points < MIN_GRID_POINTS {
        return Err(OracleError::InvalidArgument(format!("grid_points must be >= {MIN_GRID_POINTS}, got {grid_points}")));
    }
    let rho = a_matrix.spectral_radius()?;
    if !(rho < T::one()) {
        return Err(OracleError::Unstable { spectral_radius: rho.as_f64(), limit: 1.0 });
    }
    let pi = T::PI();
    let step = pi / T::from_usize_lossy(grid_points - 1);
    let mut best = (T::zero(), T::neg_infinity());
    let mut best_k = 0;
    for k in 0..grid_points {
        let omega = step * T::from_usize_lossy(k);
        let gain = frequency_gain(a_matrix, d_matrix, c_matrix, omega)?;
        if gain > best.1 {
            best = (omega, gain);
            best_k = k;
        }
    }
    let lo = step * T::from_usize_lossy(best_k.saturating_sub(1));
    let hi = (step * T::from_usize_lossy(best_k + 1)).min(pi);
    let refined = golden_section_max(lo, hi, |w| frequency_gain(a_matrix, d_matrix, c_matrix, w))?;
    Ok(best.1.max(refined))
}

fn golden_section_max<T: Scalar>(
    mut lo: T,
    mut hi: T,
    f: impl Fn(T) -> Result<T, OracleError>,
) -> Result<T, OracleError> {
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(f1.max(f2))
}

/// H∞ norm from the disturbance to the cost output of the loop closed by the
/// user gain alone: `x' = (A - BK)x + Dw`, `‖z‖² = xᵀ(Q + KᵀRK)x`.
pub fn closed_loop_hinf<T: Scalar>(spec: &LqGameSpec<T>, k_gain: &Matrix<T>, grid_points: usize) -> Result<T, OracleError> {
    let a_cl = spec.a.try_sub(&spec.b.matmul(k_gain)?)?;
    let weight = &spec.q + &(&(&k_gain.transpose() * &spec.r) * k_gain);
    let c = weight.psd_sqrt()?;
    hinf_norm_linear(&a_cl, &spec.d, &c, grid_points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, eta: f64, gamma: f64) -> LqGameSpec<f64> {
        LqGameSpec::scalar(a, 1.0, 1.0, 1.0, 1.0, eta, gamma).unwrap()
    }

    #[test]
    fn decoupled_game_has_zero_gains() {
        let sol = solve_game_riccati(&scalar(0.0, 2.0, 1.0), 1e-12, 1000).unwrap();
        assert!((sol.p_matrix[(0, 0)] - 1.0).abs() < 1e-14);
        assert!(sol.k_gain[(0, 0)].abs() < 1e-14 && sol.l_gain[(0, 0)].abs() < 1e-14);
    }

    #[test]
    fn scalar_game_reference_values() {
        let sol = solve_game_riccati(&scalar(0.9, 2.0, 1.0), 1e-13, 100_000).unwrap();
        assert!((sol.p_matrix[(0, 0)] - 1.586_886_426_984_826_8).abs() < 1e-10);
        assert!((sol.k_gain[(0, 0)] - 0.652_096_029_983_141_2).abs() < 1e-10);
        assert!((sol.l_gain[(0, 0)] - 0.163_024_007_495_785_33).abs() < 1e-10);
    }

    #[test]
    fn small_eta_is_infeasible() {
        let err = solve_game_riccati(&scalar(0.9, 0.5, 1.0), 1e-10, 1000).unwrap_err();
        assert!(matches!(err, OracleError::SpectralCondition { .. }), "{err}");
    }

    #[test]
    fn on_policy_q_reproduces_value() {
        let spec = scalar(0.9, 2.0, 1.0);
        let sol = solve_game_riccati(&spec, 1e-12, 100_000).unwrap();
        let q = exact_q_quadratic(&spec, &sol.k_gain, &sol.l_gain).unwrap();
        for x in [-1.3, 0.2, 2.0] {
            let u = sol.user_action(&[x]);
            let w = sol.adversary_action(&[x]);
            assert!((q.evaluate(&[x], &u, &w) - sol.value(&[x])).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_gain_q_matches_one_step_expansion() {
        let spec = LqGameSpec::scalar(0.0, 1.5, 0.5, 2.0, 3.0, 2.0, 0.9).unwrap();
        let zero = Matrix::<f64>::scalar(0.0);
        let q: QuadraticQ<f64> = exact_q_quadratic(&spec, &zero, &zero).unwrap();
        let (x, u, w): (f64, f64, f64) = (0.7, -0.4, 1.1);
        let expected = x * x * 2.0 + u * u * 3.0 - 4.0 * w * w + 0.9 * 2.0 * (1.5 * u + 0.5 * w).powi(2);
        assert!((q.evaluate(&[x], &[u], &[w]) - expected).abs() < 1e-12);
        assert!((q.block(QBlock::User, QBlock::Disturbance)[(0, 0)] - 0.9 * 2.0 * 1.5 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn unstable_closed_loop_rejected() {
        let spec = scalar(1.5, 2.0, 1.0);
        let zero = Matrix::<f64>::scalar(0.0);
        assert!(matches!(exact_q_quadratic(&spec, &zero, &zero), Err(OracleError::Unstable { .. })));
        assert!(hinf_norm_linear(&Matrix::scalar(1.2), &Matrix::scalar(1.0), &Matrix::scalar(1.0), 128).is_err());
    }

    #[test]
    fn hinf_scalar_examples() {
        let one = Matrix::<f64>::scalar(1.0);
        let h: f64 = hinf_norm_linear(&Matrix::scalar(0.5), &one, &one, 4096).unwrap();
        assert!((h - 2.0).abs() < 1e-10);
        let h0: f64 = hinf_norm_linear(&Matrix::scalar(0.0), &one, &one, 256).unwrap();
        assert!((h0 - 1.0).abs() < 1e-12);
        assert!(hinf_norm_linear(&Matrix::scalar(0.0), &one, &one, 8).is_err());
    }

    #[test]
    fn hinf_peak_inside_the_band() {
        // Poles at 0.9·e^{±i·1}: the resonance sits near ω = 1.
        let r: f64 = 0.9;
        let a = Matrix::from_rows(&[[2.0 * r * 1f64.cos(), -r * r], [1.0, 0.0]]).unwrap();
        let d = Matrix::from_rows(&[[1.0], [0.0]]).unwrap();
        let c = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let h = hinf_norm_linear(&a, &d, &c, 64).unwrap();
        let fine = (0..200_001)
            .map(|k| frequency_gain(&a, &d, &c, std::f64::consts::PI * k as f64 / 200_000.0).unwrap())
            .fold(0.0, f64::max);
        assert!(h >= fine - 1e-9 && h <= fine + 1e-6, "{h} vs {fine}");
    }

    #[test]
    fn generic_over_f32() {
        let spec = LqGameSpec::<f32>::scalar(0.9, 1.0, 1.0, 1.0, 1.0, 2.0, 1.0).unwrap();
        let sol = solve_game_riccati(&spec, 1e-5, 10_000).unwrap();
        assert!((sol.p_matrix[(0, 0)] - 1.586_886_4).abs() < 1e-4);
    }
}
