//! Large deviations of the jump process at large volume: the Hamiltonian
//! `g`, its Legendre dual `l`, path actions, and quasi-potentials solving
//! `g(x, ∇φ(x)) = 0`.

mod quasi;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::netmodel::{MacroState, ReactionNetwork};
use crate::numeric::{compensated_sum, orthonormal_basis, scaled_exp, scaled_expm1};

pub use quasi::{
    grad_phi, hje_residual, phi, quasipotential_1d, quasipotential_complex_balanced, ratio_diagnostic, QuasiPotential,
    Tabulated1D,
};

/// Largest exponent `|ν·θ|` the Legendre search will visit.
const EXPONENT_CAP: f64 = 700.0;
const NEWTON_MAX_ITER: usize = 500;
const NEWTON_STEP_CAP: f64 = 20.0;

fn check_point(net: &ReactionNetwork, x: &[f64]) -> Result<()> {
    if x.len() != net.num_species() {
        return Err(Error::Precondition(format!(
            "state has {} components, network has {} species",
            x.len(),
            net.num_species()
        )));
    }
    if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Precondition("state must be finite and nonnegative".into()));
    }
    Ok(())
}

fn dot(nu: &[i64], theta: &[f64]) -> f64 {
    nu.iter().zip(theta).map(|(&n, &t)| n as f64 * t).sum()
}

/// `g(x, θ) = Σ_ℓ R₊ℓ(x)(e^{νℓ·θ} − 1) + R₋ℓ(x)(e^{−νℓ·θ} − 1)`.
pub fn hamiltonian_g(net: &ReactionNetwork, x: &MacroState, theta: &[f64]) -> Result<f64> {
    check_point(net, &x.x)?;
    if theta.len() != net.num_species() {
        return Err(Error::Precondition("θ has the wrong dimension".into()));
    }
    let fluxes = net.fluxes(&x.x)?;
    Ok(hamiltonian_from_fluxes(&net.net_changes(), &fluxes, theta))
}

fn hamiltonian_from_fluxes(nus: &[Vec<i64>], fluxes: &[(f64, f64)], theta: &[f64]) -> f64 {
    compensated_sum(nus.iter().zip(fluxes).flat_map(|(nu, &(rp, rm))| {
        let s = dot(nu, theta);
        [scaled_expm1(rp, s), scaled_expm1(rm, -s)]
    }))
}

/// Gradient and Hessian of `g(x, ·)` at `θ`.
fn hamiltonian_derivatives(nus: &[Vec<i64>], fluxes: &[(f64, f64)], theta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = theta.len();
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    for (nu, &(rp, rm)) in nus.iter().zip(fluxes) {
        let s = dot(nu, theta);
        let up = scaled_exp(rp, s);
        let down = scaled_exp(rm, -s);
        let v = DVector::from_iterator(n, nu.iter().map(|&c| c as f64));
        grad += &v * (up - down);
        hess += &v * v.transpose() * (up + down);
    }
    (grad, hess)
}

/// Outcome of the Legendre transform `l(x, y) = sup_θ (θ·y − g(x, θ))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalRate {
    pub value: f64,
    /// Maximiser, when the supremum is attained at finite `θ`.
    pub theta: Option<Vec<f64>>,
    /// `y` lies outside the cone of available jump directions.
    pub infinite: bool,
}

/// Local rate function `l(x, y)`; `+∞` when `y` cannot be realised by the
/// available jump directions at `x`.
pub fn local_rate_l(net: &ReactionNetwork, x: &MacroState, y: &[f64]) -> Result<f64> {
    Ok(local_rate(net, x, y)?.value)
}

/// [`local_rate_l`] together with its maximiser.
pub fn local_rate(net: &ReactionNetwork, x: &MacroState, y: &[f64]) -> Result<LocalRate> {
    check_point(net, &x.x)?;
    if y.len() != net.num_species() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition(
            "velocity must be finite with one entry per species".into(),
        ));
    }
    let fluxes = net.fluxes(&x.x)?;
    Ok(legendre(&net.net_changes(), &fluxes, y))
}

fn infinite() -> LocalRate {
    LocalRate {
        value: f64::INFINITY,
        theta: None,
        infinite: true,
    }
}

fn legendre(nus: &[Vec<i64>], fluxes: &[(f64, f64)], y: &[f64]) -> LocalRate {
    let n = y.len();
    let active: Vec<&Vec<i64>> = nus
        .iter()
        .zip(fluxes)
        .filter(|(_, &(rp, rm))| rp > 0.0 || rm > 0.0)
        .map(|(nu, _)| nu)
        .collect();
    let yv = DVector::from_column_slice(y);
    let ynorm = yv.norm();
    let basis = orthonormal_basis(
        n,
        &active
            .iter()
            .map(|nu| DVector::from_iterator(n, nu.iter().map(|&c| c as f64)))
            .collect::<Vec<_>>(),
    );
    let r = basis.ncols();
    let yr = basis.transpose() * &yv;
    if (&yv - &basis * &yr).norm() > 1e-12 * (1.0 + ynorm) {
        return infinite();
    }
    if r == 0 {
        return LocalRate {
            value: 0.0,
            theta: Some(vec![0.0; n]),
            infinite: false,
        };
    }
    let rate_scale: f64 = fluxes.iter().map(|&(a, b)| a + b).sum::<f64>().max(f64::MIN_POSITIVE);
    let grad_tol = 1e-13 * (rate_scale + ynorm);
    let objective = |phi: &DVector<f64>| -> f64 {
        let theta = &basis * phi;
        let g = hamiltonian_from_fluxes(nus, fluxes, theta.as_slice());
        phi.dot(&yr) - g
    };
    let max_exponent = |phi: &DVector<f64>| -> f64 {
        let theta = &basis * phi;
        active
            .iter()
            .map(|nu| dot(nu, theta.as_slice()).abs())
            .fold(0.0, f64::max)
    };
    let mut phi = DVector::zeros(r);
    let mut value = objective(&phi);
    for _ in 0..NEWTON_MAX_ITER {
        let theta = &basis * &phi;

        let (g_grad, g_hess) = hamiltonian_derivatives(nus, fluxes, theta.as_slice());
        let grad = &yr - basis.transpose() * g_grad;
        let gnorm = grad.norm();
        if gnorm <= grad_tol {
            return LocalRate {
                value: value.max(0.0),
                theta: Some(theta.iter().copied().collect()),
                infinite: false,
            };
        }
        if max_exponent(&phi) > EXPONENT_CAP {
            // Supremum approached at infinity: finite only if the slope has died out.
            if gnorm <= 1e-8 * (1.0 + ynorm) {
                return LocalRate {
                    value: value.max(0.0),
                    theta: None,
                    infinite: false,
                };
            }
            return infinite();
        }
        let h = basis.transpose() * g_hess * &basis;
        let step = match h.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => match h.lu().solve(&grad) {
                Some(s) => s,
                None => grad.clone(),
            },
        };
        // Max-norm cap: the Euclidean norm of a huge step can overflow.
        let step_size = step.amax();
        let step = if step_size > NEWTON_STEP_CAP {
            step * (NEWTON_STEP_CAP / step_size)
        } else {
            step
        };
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &phi + &step * t;
            let v = objective(&trial);
            if v.is_finite() && v >= value + 1e-4 * t * slope {
                phi = trial;
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No further ascent is representable: the current point is optimal
            // to working precision.
            return LocalRate {
                value: value.max(0.0),
                theta: Some((&basis * &phi).iter().copied().collect()),
                infinite: false,
            };
        }
    }
    LocalRate {
        value: value.max(0.0),
        theta: Some((&basis * &phi).iter().copied().collect()),
        infinite: false,
    }
}

/// A sampled path `r(t)` in concentration space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    times: Vec<f64>,
    points: Vec<MacroState>,
}

impl PathSample {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != points.len() || times.len() < 2 {
            return Err(Error::Precondition("a path needs at least two timed points".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Precondition("path times must be finite and increasing".into()));
        }
        let dim = points[0].len();
        if points
            .iter()
            .any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Precondition(
                "path points must be finite and of equal dimension".into(),
            ));
        }
        let points = times.iter().zip(points).map(|(&t, x)| MacroState { x, t }).collect();
        Ok(Self { times, points })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[MacroState] {
        &self.points
    }
}

/// Action `∫ l(r, ṙ) dt` of a piecewise-linear path; each segment uses its
/// chord velocity and the trapezoid rule over its endpoints.
pub fn path_action(net: &ReactionNetwork, path: &PathSample) -> Result<f64> {
    let nus = net.net_changes();
    let mut total = crate::numeric::KahanSum::new();
    for k in 0..path.points.len() - 1 {
        let (a, b) = (&path.points[k], &path.points[k + 1]);
        check_point(net, &a.x)?;
        check_point(net, &b.x)?;
        let dt = path.times[k + 1] - path.times[k];
        let v: Vec<f64> = a.x.iter().zip(&b.x).map(|(p, q)| (q - p) / dt).collect();
        let la = legendre(&nus, &net.fluxes(&a.x)?, &v).value;
        let lb = legendre(&nus, &net.fluxes(&b.x)?, &v).value;
        if la.is_infinite() || lb.is_infinite() {
            return Ok(f64::INFINITY);
        }
        total.add(0.5 * dt * (la + lb));
    }
    Ok(total.value())
}
