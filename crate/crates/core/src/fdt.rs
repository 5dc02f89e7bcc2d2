//! Fluctuation-dissipation analysis at a stable fixed point `q`: drift
//! Jacobian `B`, diffusion matrix `A`, quasi-potential Hessian `Ξ`, the
//! identity `ΞAΞ + ΞB + BᵀΞ = 0`, the linear-noise stationary covariance,
//! and an Euler-Maruyama check of that covariance.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Serialize, Serializer};

use crate::detkin::{jacobian, rhs, FixedPoint};
use crate::error::{Error, Result};
use crate::ldp::QuasiPotential;
use crate::netmodel::{MacroState, ReactionNetwork};
use crate::par::{map_indexed, Exec};
use crate::stoichio::{stoich_matrix, StoichMatrix};

/// Largest tolerated relative gap between the five- and three-point
/// curvature estimates of a tabulated potential.
const CURVATURE_AGREEMENT: f64 = 1e-2;
const SYMMETRY_TOL: f64 = 1e-12;

fn rows<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let v: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    v.serialize(s)
}

fn opt_rows<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match m {
        Some(m) => rows(m, s),
        None => s.serialize_none(),
    }
}

/// Everything the fluctuation-dissipation check computes at one fixed point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdtReport {
    pub q: MacroState,
    #[serde(rename = "B", serialize_with = "rows")]
    pub b: DMatrix<f64>,
    #[serde(rename = "A", serialize_with = "rows")]
    pub a: DMatrix<f64>,
    #[serde(rename = "Xi", serialize_with = "rows")]
    pub xi: DMatrix<f64>,
    /// `‖P(ΞAΞ + ΞB + BᵀΞ)P‖∞` with `P` the projector onto the column space of `S`.
    pub residual: f64,
    /// The same with `BΞ` in place of `BᵀΞ`, reported for comparison.
    pub residual_untransposed: f64,
    #[serde(serialize_with = "opt_rows")]
    pub lna_variance: Option<DMatrix<f64>>,
    /// `‖P Ξ Σ P − P‖∞` when the variance is available.
    pub xi_variance_defect: Option<f64>,
    pub hessian_rank: usize,
    pub class_dimension: usize,
    pub notes: Vec<String>,
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `A_ij = Σ_ℓ (R₊ℓ + R₋ℓ) ν_ℓi ν_ℓj`, without the `1/V` factor.
pub fn diffusion_matrix(net: &ReactionNetwork, q: &MacroState) -> Result<DMatrix<f64>> {
    if q.x.len() != net.num_species() || q.x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Precondition(
            "state must be nonnegative with one entry per species".into(),
        ));
    }
    let n = net.num_species();
    let mut a = DMatrix::zeros(n, n);
    for (nu, (rp, rm)) in net.net_changes().iter().zip(net.fluxes(&q.x)?) {
        let v = DVector::from_iterator(n, nu.iter().map(|&c| c as f64));
        a += &v * v.transpose() * (rp + rm);
    }
    Ok(a)
}

/// `Ξ_ij = ∂²φ/∂x_i∂x_j` at `q`.
pub fn hessian_xi(qp: &QuasiPotential, q: &MacroState) -> Result<DMatrix<f64>> {
    match qp {
        QuasiPotential::ClosedFormRelativeEntropy { xss } => {
            if q.x.len() != xss.x.len() || q.x.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Precondition(
                    "Hessian of relative entropy needs a positive state".into(),
                ));
            }
            Ok(DMatrix::from_diagonal(&DVector::from_iterator(
                q.x.len(),
                q.x.iter().map(|v| 1.0 / v),
            )))
        }
        QuasiPotential::Tabulated1D(t) => {
            if q.x.len() != 1 {
                return Err(Error::Precondition("tabulated potential is one-dimensional".into()));
            }
            let (fine, coarse) = t.curvature(q.x[0])?;
            let gap = (fine - coarse).abs();
            if gap > CURVATURE_AGREEMENT * fine.abs().max(1e-8) {
                return Err(Error::Numerical(format!(
                    "grid too coarse near q = {}: curvature estimates {fine:.6e} and {coarse:.6e} disagree",
                    q.x[0]
                )));
            }
            Ok(DMatrix::from_element(1, 1, fine))
        }
    }
}

fn check_square(ms: &[&DMatrix<f64>]) -> usize {
    let n = ms[0].nrows();
    for m in ms {
        assert!(
            m.nrows() == n && m.ncols() == n,
            "matrices must be square and of equal size"
        );
    }
    n
}

/// `‖ΞAΞ + ΞB + BᵀΞ‖∞`.
pub fn fdt_residual(b: &DMatrix<f64>, a: &DMatrix<f64>, xi: &DMatrix<f64>) -> f64 {
    check_square(&[b, a, xi]);
    inf_norm(&(xi * a * xi + xi * b + b.transpose() * xi))
}

/// `‖ΞAΞ + ΞB + BΞ‖∞`, the form without the transpose.
pub fn fdt_residual_untransposed(b: &DMatrix<f64>, a: &DMatrix<f64>, xi: &DMatrix<f64>) -> f64 {
    check_square(&[b, a, xi]);
    inf_norm(&(xi * a * xi + xi * b + b * xi))
}

/// Solves `B X + X Bᵀ + C = 0` for real `B` with no eigenvalue pair summing
/// to zero, by Bartels-Stewart on the complex Schur form `B = Q T Q*`.
pub fn solve_lyapunov(b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = check_square(&[b, c]);
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let bc = b.map(|v| Complex64::new(v, 0.0));
    let schur = Schur::try_new(bc, 1e-15, 10_000)
        .ok_or_else(|| Error::NoConvergence("Schur decomposition did not converge".into()))?;
    let (q, t) = schur.unpack();
    let qh = q.adjoint();
    let cc = &qh * c.map(|v| Complex64::new(v, 0.0)) * &q;
    // T Y + Y T* = −C', solved column by column from the last.
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for j in (0..n).rev() {
        let mut rhs_col: DVector<Complex64> = -cc.column(j).into_owned();
        for k in j + 1..n {
            let coeff = t[(j, k)].conj();
            rhs_col -= y.column(k) * coeff;
        }
        let shift = t[(j, j)].conj();
        for i in (0..n).rev() {
            let mut s = rhs_col[i];
            for k in i + 1..n {
                s -= t[(i, k)] * y[(k, j)];
            }
            let d = t[(i, i)] + shift;
            if d.norm() <= 1e-14 * (1.0 + t[(i, i)].norm()) {
                return Err(Error::Numerical("Lyapunov equation is singular".into()));
            }
            y[(i, j)] = s / d;
        }
    }
    let x = &q * y * &qh;
    Ok(symmetrize(&x.map(|v| v.re)))
}

/// Stationary covariance `Σ` (times `V`) of the linear-noise approximation:
/// `BΣ + ΣBᵀ + A = 0` solved on the column space of `S`.
pub fn lna_stationary_variance(b: &DMatrix<f64>, a: &DMatrix<f64>, s: &StoichMatrix) -> Result<DMatrix<f64>> {
    let n = check_square(&[b, a]);
    if s.nrows() != n {
        return Err(Error::Precondition("stoichiometric matrix does not match B".into()));
    }
    let u = s.column_space_basis();
    if u.ncols() == 0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let br = u.transpose() * b * &u;
    let ar = u.transpose() * a * &u;
    let abscissa = br
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(abscissa < 0.0) {
        return Err(Error::Precondition(format!(
            "drift restricted to the stoichiometric space is not Hurwitz (max Re λ = {abscissa:.3e})"
        )));
    }
    let x = solve_lyapunov(&br, &ar)?;
    Ok(symmetrize(&(&u * x * u.transpose())))
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let eig = SymmetricEigen::new(symmetrize(m)).eigenvalues;
    let scale = eig.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    eig.iter()
        .filter(|v| v.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE))
        .count()
}

/// Builds the full report at `fp` using the potential `qp`.
pub fn fdt_report(net: &ReactionNetwork, qp: &QuasiPotential, fp: &FixedPoint) -> Result<FdtReport> {
    let q = &fp.q;
    let s = stoich_matrix(net);
    let p = s.column_space_projector();
    let b = jacobian(net, &q.x)?;
    let a = symmetrize(&diffusion_matrix(net, q)?);
    let xi = symmetrize(&hessian_xi(qp, q)?);
    debug_assert!(inf_norm(&(&a - a.transpose())) <= SYMMETRY_TOL * (1.0 + inf_norm(&a)));
    let project = |m: DMatrix<f64>| &p * m * &p;
    let residual = inf_norm(&project(&xi * &a * &xi + &xi * &b + b.transpose() * &xi));
    let residual_untransposed = inf_norm(&project(&xi * &a * &xi + &xi * &b + &b * &xi));
    let mut notes = Vec::new();
    if !fp.stable {
        notes.push("fixed point is not stable; the stationary variance is undefined".into());
    }
    let lna = if fp.stable {
        match lna_stationary_variance(&b, &a, &s) {
            Ok(v) => Some(v),
            Err(e) => {
                notes.push(format!("linear-noise variance unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };
    let xi_variance_defect = lna.as_ref().map(|sigma| inf_norm(&(project(&xi * sigma) - &p)));
    Ok(FdtReport {
        q: q.clone(),
        hessian_rank: numerical_rank(&project(xi.clone())),
        class_dimension: s.rank(),
        b,
        a,
        xi,
        residual,
        residual_untransposed,
        lna_variance: lna,
        xi_variance_defect,
        notes,
    })
}

/// Settings for [`diffusion_simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionOptions {
    pub dt: f64,
    /// Initial stretch of each replica that is discarded.
    pub burn_in: f64,
    /// Spacing between retained samples.
    pub sample_every: f64,
    pub replicas: usize,
    /// Drop the noise term entirely (deterministic relaxation).
    pub zero_noise: bool,
    pub exec: Exec,
}

impl Default for DiffusionOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            burn_in: 2.0,
            sample_every: 0.05,
            replicas: 16,
            zero_noise: false,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedCovariance {
    /// Empirical covariance of the retained samples, multiplied by `V`.
    #[serde(serialize_with = "rows")]
    pub scaled_covariance: DMatrix<f64>,
    pub mean: Vec<f64>,
    pub samples: usize,
    /// Replica restarts with a halved step after leaving the orthant.
    pub retries: usize,
}

const MAX_RETRIES: usize = 3;

fn simulate_replica(
    net: &ReactionNetwork,
    q: &[f64],
    volume: f64,
    t_end: f64,
    seed: u64,
    replica: usize,
    opts: &DiffusionOptions,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let n = q.len();
    let nus = net.net_changes();
    let mut dt = opts.dt;
    for attempt in 0..=MAX_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((attempt as u64) << 32) | replica as u64);
        let steps = (t_end / dt).round() as usize;
        let stride = ((opts.sample_every / dt).round() as usize).max(1);
        let burn = (opts.burn_in / dt).round() as usize;
        let mut z = q.to_vec();
        let mut samples = Vec::new();
        let mut escaped = false;
        for step in 1..=steps {
            let drift = rhs(net, &z)?;
            let mut next: Vec<f64> = z.iter().zip(&drift).map(|(zi, fi)| zi + fi * dt).collect();
            if !opts.zero_noise {
                let fluxes = net.fluxes(&z)?;
                for (nu, (rp, rm)) in nus.iter().zip(fluxes) {
                    let amp = ((rp + rm) / volume * dt).sqrt();
                    let w: f64 = rng.sample(StandardNormal);
                    for (nj, &c) in next.iter_mut().zip(nu) {
                        *nj += c as f64 * amp * w;
                    }
                }
            }
            if next.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                escaped = true;
                break;
            }
            z = next;
            if step > burn && (step - burn).is_multiple_of(stride) {
                samples.push(z.clone());
            }
        }
        if !escaped {
            debug_assert!(samples.iter().all(|s| s.len() == n));
            return Ok((samples, attempt));
        }
        dt *= 0.5;
    }
    Err(Error::Numerical(format!(
        "diffusion replica {replica} left the positive orthant after {MAX_RETRIES} step reductions"
    )))
}

/// Euler-Maruyama for `dz = F(z)dt + σ(z)dW`, `σσᵀ = A(z)/V`, started at
/// `q`; returns the pooled sample covariance times `V`.
pub fn diffusion_simulate(
    net: &ReactionNetwork,
    q: &MacroState,
    volume: f64,
    t_end: f64,
    seed: u64,
    opts: &DiffusionOptions,
) -> Result<SimulatedCovariance> {
    if !(volume > 0.0) || !(t_end > opts.burn_in) || !(opts.dt > 0.0) || opts.replicas == 0 {
        return Err(Error::Precondition(
            "need V > 0, dt > 0, at least one replica and t_end beyond the burn-in".into(),
        ));
    }
    let n = net.num_species();
    let runs = map_indexed(opts.exec, opts.replicas, |r| {
        simulate_replica(net, &q.x, volume, t_end, seed, r, opts)
    });
    let mut all = Vec::new();
    let mut retries = 0;
    for run in runs {
        let (samples, attempts) = run?;
        retries += attempts;
        all.extend(samples);
    }
    let m = all.len();
    if m < 2 {
        return Err(Error::Precondition("too few retained samples; lengthen t_end".into()));
    }
    let mut mean = vec![0.0; n];
    for s in &all {
        for (mj, sj) in mean.iter_mut().zip(s) {
            *mj += sj / m as f64;
        }
    }
    let mut cov = DMatrix::zeros(n, n);
    for s in &all {
        let d = DVector::from_iterator(n, s.iter().zip(&mean).map(|(a, b)| a - b));
        cov += &d * d.transpose();
    }
    cov *= volume / (m - 1) as f64;
    Ok(SimulatedCovariance {
        scaled_covariance: symmetrize(&cov),
        mean,
        samples: m,
        retries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detkin::fixed_point_from;
    use crate::fixtures::*;
    use crate::ldp::{quasipotential_1d, quasipotential_complex_balanced};
    use approx::assert_abs_diff_eq;

    fn at(x: &[f64]) -> MacroState {
        MacroState::new(x.to_vec())
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    fn kron_lyapunov(b: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
        let n = b.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        let op = id.kronecker(b) + b.kronecker(&id);
        let rhs = -DVector::from_column_slice(c.as_slice());
        let x = op.lu().solve(&rhs).unwrap();
        DMatrix::from_column_slice(n, n, x.as_slice())
    }

    #[test]
    fn diffusion_examples() {
        assert_eq!(diffusion_matrix(&bd(), &at(&[1.0])).unwrap()[(0, 0)], 2.0);
        assert_abs_diff_eq!(
            diffusion_matrix(&schlogl(), &at(&[1.0])).unwrap()[(0, 0)],
            24.0,
            epsilon = 1e-13
        );
        let a = diffusion_matrix(&triangle(), &at(&[1.0; 3])).unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[6.0, -3.0, -3.0, -3.0, 6.0, -3.0, -3.0, -3.0, 6.0]);
        assert_abs_diff_eq!(a, want, epsilon = 1e-14);
    }

    #[test]
    fn hessian_examples() {
        let tq = quasipotential_complex_balanced(&triangle(), &at(&[1.0; 3])).unwrap();
        assert_eq!(hessian_xi(&tq, &at(&[1.0; 3])).unwrap(), DMatrix::identity(3, 3));
        let fp = fixed_point_from(&bd(), &[1.2]).unwrap();
        let qp = quasipotential_1d(&bd(), &fp, &linspace(0.5, 1.5, 101)).unwrap();
        assert_abs_diff_eq!(hessian_xi(&qp, &fp.q).unwrap()[(0, 0)], 1.0, epsilon = 1e-7);
        let fp = fixed_point_from(&schlogl(), &[0.9]).unwrap();
        let qp = quasipotential_1d(&schlogl(), &fp, &linspace(0.5, 1.5, 101)).unwrap();
        assert_abs_diff_eq!(hessian_xi(&qp, &fp.q).unwrap()[(0, 0)], 1.0 / 6.0, epsilon = 1e-7);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let fp = fixed_point_from(&schlogl(), &[0.9]).unwrap();
        let qp = quasipotential_1d(&schlogl(), &fp, &linspace(0.2, 1.8, 5)).unwrap();
        let err = hessian_xi(&qp, &fp.q).unwrap_err();
        assert!(err.to_string().contains("grid too coarse"));
    }

    #[test]
    fn residual_examples() {
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        assert_eq!(fdt_residual(&one(-1.0), &one(2.0), &one(1.0)), 0.0);
        assert!(fdt_residual(&one(-2.0), &one(24.0), &one(1.0 / 6.0)) <= 1e-12);
        let b = jacobian(&triangle(), &[1.0; 3]).unwrap();
        let a = diffusion_matrix(&triangle(), &at(&[1.0; 3])).unwrap();
        let xi = DMatrix::identity(3, 3);
        assert!(fdt_residual(&b, &a, &xi) <= 1e-12);
    }

    #[test]
    fn transposed_form_matters_for_nonsymmetric_drift() {
        // The driven triangle has a nonsymmetric Jacobian at xss with Ξ = I.
        let b = jacobian(&triangle(), &[1.0; 3]).unwrap();
        let a = diffusion_matrix(&triangle(), &at(&[1.0; 3])).unwrap();
        let xi = DMatrix::identity(3, 3);
        assert!(fdt_residual(&b, &a, &xi) <= 1e-12);
        assert!(fdt_residual_untransposed(&b, &a, &xi) > 1.0);
        // Under detailed balance ΞB is symmetric, so ΞB = BᵀΞ and the identity holds.
        let fp = fixed_point_from(&triangle_db(), &[1.0, 1.0, 1.0]).unwrap();
        let qp = quasipotential_complex_balanced(&triangle_db(), &fp.q).unwrap();
        let r = fdt_report(&triangle_db(), &qp, &fp).unwrap();
        assert!(r.residual <= 1e-12);
        assert_abs_diff_eq!(&r.xi * &r.b, (&r.xi * &r.b).transpose(), epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_matches_kronecker_oracle() {
        let b = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.3, -2.0, -1.5, 0.0, 0.4, 0.1, -3.0]);
        let c = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, -0.2, 0.1, -0.2, 3.0]);
        assert!(b.complex_eigenvalues().iter().any(|z| f64::abs(z.im) > 0.1));
        let x = solve_lyapunov(&b, &c).unwrap();
        let oracle = kron_lyapunov(&b, &c);
        assert_abs_diff_eq!(x, oracle, epsilon = 1e-12);
        let res = &b * &x + &x * b.transpose() + &c;
        assert!(res.amax() <= 1e-12);
    }

    #[test]
    fn lna_examples() {
        let s = |net: &ReactionNetwork| stoich_matrix(net);
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        assert_abs_diff_eq!(
            lna_stationary_variance(&one(-1.0), &one(2.0), &s(&bd())).unwrap()[(0, 0)],
            1.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            lna_stationary_variance(&one(-2.0), &one(24.0), &s(&schlogl())).unwrap()[(0, 0)],
            6.0,
            epsilon = 1e-13
        );
        assert!(lna_stationary_variance(&one(1.0), &one(2.0), &s(&bd())).is_err());

        let net = triangle();
        let b = jacobian(&net, &[1.0; 3]).unwrap();
        let a = diffusion_matrix(&net, &at(&[1.0; 3])).unwrap();
        let sigma = lna_stationary_variance(&b, &a, &s(&net)).unwrap();
        let p = s(&net).column_space_projector();
        // Ξ = I, so Σ is the projector itself.
        assert_abs_diff_eq!(sigma, p, epsilon = 1e-12);
    }

    #[test]
    fn reports_tie_hessian_to_variance() {
        let net = schlogl();
        let fp = fixed_point_from(&net, &[0.9]).unwrap();
        let qp = quasipotential_1d(&net, &fp, &linspace(0.5, 1.5, 201)).unwrap();
        let r = fdt_report(&net, &qp, &fp).unwrap();
        assert!(r.residual <= 1e-8, "{}", r.residual);
        assert!(r.xi_variance_defect.unwrap() <= 1e-8);
        assert_eq!(r.hessian_rank, 1);

        let net = triangle();
        let qp = quasipotential_complex_balanced(&net, &at(&[1.0; 3])).unwrap();
        let fp = fixed_point_from(&net, &[1.5, 1.0, 0.5]).unwrap();
        let r = fdt_report(&net, &qp, &fp).unwrap();
        assert!(r.residual <= 1e-12);
        assert!(r.residual_untransposed > 1.0);
        assert!(r.xi_variance_defect.unwrap() <= 1e-8);
        assert_eq!((r.hessian_rank, r.class_dimension), (2, 2));
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["A"][0][0], 6.0);
        assert!(json["lna_variance"].is_array());
    }

    #[test]
    fn diffusion_matrix_kernel_contains_conserved_directions() {
        let a = diffusion_matrix(&triangle(), &at(&[0.4, 1.3, 2.0])).unwrap();
        let ones = DVector::from_element(3, 1.0);
        assert!((&a * ones).amax() <= 1e-14);
        let eig = SymmetricEigen::new(a).eigenvalues;
        assert!(eig.iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn simulated_birth_death_covariance() {
        let opts = DiffusionOptions::default();
        let c = diffusion_simulate(&bd(), &at(&[1.0]), 500.0, 150.0, 1, &opts).unwrap();
        assert!(
            (c.scaled_covariance[(0, 0)] - 1.0).abs() <= 0.1,
            "{}",
            c.scaled_covariance
        );
        let again = diffusion_simulate(&bd(), &at(&[1.0]), 500.0, 150.0, 1, &opts).unwrap();
        assert_eq!(c, again);
        let seq = DiffusionOptions {
            exec: Exec::Sequential,
            ..opts
        };
        assert_eq!(
            diffusion_simulate(&bd(), &at(&[1.0]), 500.0, 150.0, 1, &seq).unwrap(),
            c
        );
    }

    #[test]
    fn zero_noise_has_no_spread() {
        let opts = DiffusionOptions {
            zero_noise: true,
            replicas: 2,
            ..DiffusionOptions::default()
        };
        let c = diffusion_simulate(&bd(), &at(&[1.0]), 500.0, 5.0, 0, &opts).unwrap();
        assert!(c.scaled_covariance.amax() <= 1e-20);
    }

    #[test]
    fn simulated_schlogl_covariance_near_lower_state() {
        let opts = DiffusionOptions {
            burn_in: 1.0,
            ..DiffusionOptions::default()
        };
        let c = diffusion_simulate(&schlogl(), &at(&[1.0]), 2000.0, 60.0, 3, &opts).unwrap();
        let v = c.scaled_covariance[(0, 0)];
        assert!((v - 6.0).abs() <= 0.15 * 6.0, "{v}");
    }
}
