use serde::Serialize;

use super::hamiltonian_g;
use crate::detkin::FixedPoint;
use crate::error::{Error, Result};
use crate::netmodel::{MacroState, ReactionNetwork};
use crate::numeric::{adaptive_simpson, compensated_sum, exprel, exprel_derivative, hermite_basis, Pchip};
use crate::stochkin::LatticeDistribution;
use crate::stoichio::complex_balance_check;

const ROOT_EXPONENT_CAP: f64 = 700.0;
const QUADRATURE_TOL: f64 = 1e-13;
const ANALYTIC_AGREEMENT: f64 = 1e-9;

/// A quasi-potential `φ` together with its gradient.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuasiPotential {
    /// `φ(x) = Σ_j x_j ln(x_j/xss_j) − x_j + xss_j`, valid for complex-balanced
    /// mass action.
    ClosedFormRelativeEntropy { xss: MacroState },
    /// One-species potential tabulated on a grid.
    Tabulated1D(Tabulated1D),
}

/// `φ` and `p = φ′` on an increasing grid, integrated from an anchor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tabulated1D {
    pub grid: Vec<f64>,
    pub p_values: Vec<f64>,
    pub phi_values: Vec<f64>,
    pub anchor: f64,
    pub anchor_stable: bool,
    /// Largest gap to the closed-form root `ln(b/a)` when every jump is ±1.
    pub analytic_discrepancy: Option<f64>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    slope: Pchip,
}

impl Tabulated1D {
    fn interval(&self, x: f64) -> Result<usize> {
        let (lo, hi) = (self.grid[0], *self.grid.last().unwrap());
        if !(x >= lo && x <= hi) {
            return Err(Error::Precondition(format!(
                "x = {x} outside tabulated grid [{lo}, {hi}]"
            )));
        }
        Ok(self.grid.partition_point(|&g| g <= x).clamp(1, self.grid.len() - 1) - 1)
    }

    fn phi(&self, x: f64) -> Result<f64> {
        let k = self.interval(x)?;
        let h = self.grid[k + 1] - self.grid[k];
        let (h00, h10, h01, h11) = hermite_basis((x - self.grid[k]) / h);
        Ok(h00 * self.phi_values[k]
            + h10 * h * self.p_values[k]
            + h01 * self.phi_values[k + 1]
            + h11 * h * self.p_values[k + 1])
    }

    fn p(&self, x: f64) -> Result<f64> {
        self.interval(x)?;
        self.slope
            .eval(x)
            .ok_or_else(|| Error::Precondition(format!("x = {x} outside tabulated grid")))
    }

    /// `φ″(x)` from the tabulated slope: a five-point and a three-point
    /// Lagrange derivative of `p` on the grid points nearest `x`.
    pub fn curvature(&self, x: f64) -> Result<(f64, f64)> {
        let n = self.grid.len();
        if n < 5 {
            return Err(Error::Precondition("curvature needs at least five grid points".into()));
        }
        self.interval(x)?;
        let nearest = self.grid.partition_point(|&g| g < x);
        let nearest = if nearest == n || (nearest > 0 && x - self.grid[nearest - 1] < self.grid[nearest] - x) {
            nearest - 1
        } else {
            nearest
        };
        let stencil = |width: usize| {
            let half = width / 2;
            let start = nearest.saturating_sub(half).min(n - width);
            lagrange(
                &self.grid[start..start + width],
                &self.p_values[start..start + width],
                x,
            )
        };
        Ok((stencil(5), stencil(3)))
    }
}

fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    crate::numeric::lagrange_derivative(xs, ys, x)
}

/// Relative-entropy potential of a complex-balanced mass-action network.
pub fn quasipotential_complex_balanced(net: &ReactionNetwork, xss: &MacroState) -> Result<QuasiPotential> {
    if !net.is_mass_action() {
        return Err(Error::Precondition(
            "closed-form potential requires mass-action kinetics".into(),
        ));
    }
    if xss.x.len() != net.num_species() || xss.x.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Precondition(
            "steady state must be positive with one entry per species".into(),
        ));
    }
    let report = complex_balance_check(net, xss, 1e-8)?;
    if !report.balanced {
        return Err(Error::Precondition(format!(
            "network is not complex balanced at the given state (max imbalance {:.3e})",
            report.max_imbalance
        )));
    }
    Ok(QuasiPotential::ClosedFormRelativeEntropy { xss: xss.clone() })
}

/// `g(x, p)/p` for one species, strictly increasing in `p`, with its slope.
fn reduced_hamiltonian(nus: &[i64], fluxes: &[(f64, f64)], p: f64) -> (f64, f64) {
    let mut h = 0.0;
    let mut dh = 0.0;
    for (&nu, &(rp, rm)) in nus.iter().zip(fluxes) {
        if nu == 0 {
            continue;
        }
        let nu = nu as f64;
        h += nu * (rp * exprel(nu * p) - rm * exprel(-nu * p));
        dh += nu * nu * (rp * exprel_derivative(nu * p) + rm * exprel_derivative(-nu * p));
    }
    (h, dh)
}

/// Nonzero root in `p` of `g(x, p) = 0` (zero where the drift vanishes).
fn slope_root(net: &ReactionNetwork, nus: &[i64], x: f64) -> Result<f64> {
    let fluxes = net.fluxes(&[x])?;
    let (f, _) = reduced_hamiltonian(nus, &fluxes, 0.0);
    if f == 0.0 {
        return Ok(0.0);
    }
    let nu_max = nus.iter().map(|v| v.unsigned_abs()).max().unwrap_or(1).max(1) as f64;
    let dir = -f.signum();
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    let mut probe = dir;
    let mut bracketed = false;
    while (probe * nu_max).abs() <= ROOT_EXPONENT_CAP {
        let (h, _) = reduced_hamiltonian(nus, &fluxes, probe);
        if h.is_nan() {
            break;
        }
        if h.signum() != f.signum() {
            if dir > 0.0 {
                hi = probe;
            } else {
                lo = probe;
            }
            bracketed = true;
            break;
        }
        if dir > 0.0 {
            lo = probe;
        } else {
            hi = probe;
        }
        probe *= 2.0;
    }
    if !bracketed {
        return Err(Error::NoConvergence(format!("root bracketing failed at x = {x}")));
    }
    // Invariant: h(lo) < 0 < h(hi).
    let mut p = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (h, dh) = reduced_hamiltonian(nus, &fluxes, p);
        if h == 0.0 {
            return Ok(p);
        }
        if h < 0.0 {
            lo = p;
        } else {
            hi = p;
        }
        let newton = p - h / dh;
        let next = if newton > lo && newton < hi && dh > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - p).abs() <= 4.0 * f64::EPSILON * (1.0 + p.abs()) || hi - lo <= 4.0 * f64::EPSILON * (1.0 + p.abs()) {
            return Ok(next);
        }
        p = next;
    }
    Err(Error::NoConvergence(format!("slope root did not converge at x = {x}")))
}

/// `ln(b/a)` with `a`, `b` the aggregated up- and down-jump rates, when
/// every reaction moves the species by at most one.
fn analytic_root(net: &ReactionNetwork, nus: &[i64], x: f64) -> Result<Option<f64>> {
    if nus.iter().any(|v| v.abs() > 1) {
        return Ok(None);
    }
    let fluxes = net.fluxes(&[x])?;
    let mut up = Vec::new();
    let mut down = Vec::new();
    for (&nu, &(rp, rm)) in nus.iter().zip(&fluxes) {
        match nu {
            1 => {
                up.push(rp);
                down.push(rm);
            }
            -1 => {
                up.push(rm);
                down.push(rp);
            }
            _ => {}
        }
    }
    let (a, b) = (compensated_sum(up), compensated_sum(down));
    Ok((a > 0.0 && b > 0.0).then(|| (b / a).ln()))
}

/// Tabulates the one-species potential from `anchor` over `grid`: at each
/// point the slope `p(x)` is the nonzero root of `g(x, ·)`, and
/// `φ(x) = ∫_anchor^x p` by adaptive quadrature.
pub fn quasipotential_1d(net: &ReactionNetwork, anchor: &FixedPoint, grid: &[f64]) -> Result<QuasiPotential> {
    if net.num_species() != 1 {
        return Err(Error::Precondition(format!(
            "tabulated potentials need one species, network has {}",
            net.num_species()
        )));
    }
    if grid.len() < 2
        || grid.windows(2).any(|w| !(w[1] > w[0]))
        || !(grid[0] > 0.0)
        || !grid.iter().all(|g| g.is_finite())
    {
        return Err(Error::Precondition(
            "grid must be finite, positive and strictly increasing".into(),
        ));
    }
    let q = anchor.q.x[0];
    let (lo, hi) = (grid[0], *grid.last().unwrap());
    if !(q >= lo && q <= hi) {
        return Err(Error::Precondition(format!("anchor {q} outside grid [{lo}, {hi}]")));
    }
    let nus: Vec<i64> = net.net_changes().into_iter().map(|v| v[0]).collect();
    let p_at = |x: f64| slope_root(net, &nus, x);
    let p_values = grid.iter().map(|&x| p_at(x)).collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    let mut discrepancy: Option<f64> = None;
    for (&x, &p) in grid.iter().zip(&p_values) {
        if let Some(pa) = analytic_root(net, &nus, x)? {
            let d = (p - pa).abs();
            discrepancy = Some(discrepancy.map_or(d, |m: f64| m.max(d)));
            if d > ANALYTIC_AGREEMENT * (1.0 + pa.abs()) {
                warnings.push(format!("slope root at x = {x} differs from ln(b/a) by {d:.3e}"));
            }
        }
    }

    let integrate = |a: f64, b: f64| adaptive_simpson(&p_at, a, b, QUADRATURE_TOL * (1.0 + (b - a).abs()));
    let n = grid.len();
    let mut phi_values = vec![0.0; n];
    let split = grid.partition_point(|&g| g < q);
    // Right of the anchor.
    let mut acc = 0.0;
    let mut prev = q;
    for i in split..n {
        acc += integrate(prev, grid[i])?;
        phi_values[i] = acc;
        prev = grid[i];
    }
    // Left of the anchor.
    let mut acc = 0.0;
    let mut prev = q;
    for i in (0..split).rev() {
        acc += integrate(prev, grid[i])?;
        phi_values[i] = acc;
        prev = grid[i];
    }
    if !anchor.stable {
        warnings.push(format!(
            "anchor {q} is not a stable fixed point; φ is not a local minimum there"
        ));
    }
    let slope = Pchip::new(grid.to_vec(), p_values.clone());
    Ok(QuasiPotential::Tabulated1D(Tabulated1D {
        grid: grid.to_vec(),
        p_values,
        phi_values,
        anchor: q,
        anchor_stable: anchor.stable,
        analytic_discrepancy: discrepancy,
        warnings,
        slope,
    }))
}

fn check_dim(qp: &QuasiPotential, x: &MacroState) -> Result<()> {
    let dim = match qp {
        QuasiPotential::ClosedFormRelativeEntropy { xss } => xss.x.len(),
        QuasiPotential::Tabulated1D(_) => 1,
    };
    if x.x.len() != dim {
        return Err(Error::Precondition(format!(
            "state has {} components, potential has {dim}",
            x.x.len()
        )));
    }
    Ok(())
}

/// `φ(x)`.
pub fn phi(qp: &QuasiPotential, x: &MacroState) -> Result<f64> {
    check_dim(qp, x)?;
    match qp {
        QuasiPotential::ClosedFormRelativeEntropy { xss } => {
            if x.x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Precondition("relative entropy needs a nonnegative state".into()));
            }
            Ok(compensated_sum(x.x.iter().zip(&xss.x).map(|(&xi, &si)| {
                let log_term = if xi == 0.0 { 0.0 } else { xi * (xi / si).ln() };
                log_term - xi + si
            })))
        }
        QuasiPotential::Tabulated1D(t) => t.phi(x.x[0]),
    }
}

/// `∇φ(x)`.
pub fn grad_phi(qp: &QuasiPotential, x: &MacroState) -> Result<Vec<f64>> {
    check_dim(qp, x)?;
    match qp {
        QuasiPotential::ClosedFormRelativeEntropy { xss } => {
            if x.x.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Precondition(
                    "gradient of relative entropy needs a positive state".into(),
                ));
            }
            Ok(x.x.iter().zip(&xss.x).map(|(a, b)| (a / b).ln()).collect())
        }
        QuasiPotential::Tabulated1D(t) => Ok(vec![t.p(x.x[0])?]),
    }
}

/// `g(x, ∇φ(x))`, zero for an exact solution of the Hamilton-Jacobi equation.
pub fn hje_residual(net: &ReactionNetwork, qp: &QuasiPotential, x: &MacroState) -> Result<f64> {
    let grad = grad_phi(qp, x)?;
    hamiltonian_g(net, x, &grad)
}

/// Empirical lattice ratio `p(n − ν)/p(n)` at the lattice point nearest
/// `V·x`, next to its large-volume prediction `e^{ν·∇φ(x)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioDiagnostic {
    pub lattice_point: Vec<u64>,
    pub empirical: f64,
    pub predicted: f64,
}

pub fn ratio_diagnostic(
    pss: &LatticeDistribution,
    volume: f64,
    qp: &QuasiPotential,
    x: &MacroState,
    nu: &[i64],
) -> Result<RatioDiagnostic> {
    if !(volume > 0.0) || nu.len() != x.x.len() || pss.trunc.dim() != x.x.len() {
        return Err(Error::Precondition("dimension or volume mismatch".into()));
    }
    let n: Vec<u64> = x.x.iter().map(|&v| (volume * v).round().max(0.0) as u64).collect();
    let m: Option<Vec<u64>> = n
        .iter()
        .zip(nu)
        .map(|(&a, &d)| u64::try_from(a as i64 - d).ok())
        .collect();
    let m = m.ok_or_else(|| Error::Precondition("shifted lattice point is negative".into()))?;
    let (pn, pm) = (pss.prob(&n), pss.prob(&m));
    if !(pn > 0.0 && pm > 0.0) {
        return Err(Error::Precondition(format!("zero probability at {n:?} or {m:?}")));
    }
    let grad = grad_phi(qp, x)?;
    let exponent: f64 = nu.iter().zip(&grad).map(|(&d, g)| d as f64 * g).sum();
    Ok(RatioDiagnostic {
        lattice_point: n,
        empirical: pm / pn,
        predicted: exponent.exp(),
    })
}
