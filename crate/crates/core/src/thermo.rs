//! Thermodynamic functionals: mesoscopic entropy production, free-energy
//! dissipation and housekeeping heat on lattice distributions, their
//! macroscopic densities on concentrations, and the free-energy balance.

use serde::Serialize;

use crate::detkin::Trajectory;
use crate::error::{Error, Result};
use crate::ldp::{grad_phi, phi, QuasiPotential};
use crate::netmodel::{MacroState, ReactionNetwork};
use crate::numeric::KahanSum;
use crate::par::{map_indexed, Exec};
use crate::stochkin::{Edge, Generator, LatticeDistribution};

/// Probability fluxes at or below this are treated as exactly zero, so
/// that underflow in far tails does not masquerade as irreversibility.
const DEAD_FLUX: f64 = 1e-280;
const CHUNK: usize = 4096;
const WEAK_BALANCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MesoThermo {
    pub e_p: f64,
    pub f_d: f64,
    pub q_hk: f64,
    pub free_energy: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacroThermo {
    pub sigma_tot: f64,
    pub f_d: f64,
    pub q_hk: f64,
    pub phi: f64,
    pub t: f64,
}

/// `ln(a/b)` for positive `a`, `b`, accurate when `a ≈ b`.
fn log_ratio(a: f64, b: f64) -> f64 {
    let d = (a - b) / b;
    if d.abs() < 0.5 {
        d.ln_1p()
    } else {
        a.ln() - b.ln()
    }
}

/// Contributions of one lattice edge to `(e_p, f_d, Q_hk)`.
fn edge_terms(e: &Edge, p: &[f64], pss: &[f64]) -> Result<[f64; 3]> {
    if (e.forward > 0.0) != (e.backward > 0.0) {
        return Err(Error::Divergent(format!(
            "entropy production divergent: reaction #{} has a one-sided zero rate between lattice states {} and {}",
            e.reaction + 1,
            e.from,
            e.to
        )));
    }
    let (pn, pm) = (p[e.from], p[e.to]);
    let jp = pn * e.forward;
    let jm = pm * e.backward;
    if jp <= DEAD_FLUX && jm <= DEAD_FLUX {
        return Ok([0.0; 3]);
    }
    let (sn, sm) = (pss[e.from], pss[e.to]);
    if !(sn > 0.0 && sm > 0.0) {
        return Err(Error::Precondition(
            "steady state vanishes on a state that carries probability flux".into(),
        ));
    }
    let net_flux = jp - jm;
    let hk = net_flux * log_ratio(sn * e.forward, sm * e.backward);
    if jp == 0.0 || jm == 0.0 {
        // Probability on one side only: the flux runs one way.
        return Ok([f64::INFINITY, f64::INFINITY, hk]);
    }
    let ep = net_flux * log_ratio(jp, jm);
    let fd = net_flux * (log_ratio(pn, pm) - log_ratio(sn, sm));
    Ok([ep, fd, hk])
}

/// `e_p`, `f_d`, `Q_hk` and `F = Σ p ln(p/pss)` of `p` under the generator
/// `q` with stationary law `pss`.
pub fn meso_functionals(q: &Generator, p: &LatticeDistribution, pss: &LatticeDistribution) -> Result<MesoThermo> {
    meso_functionals_with(q, p, pss, Exec::default())
}

/// [`meso_functionals`] with an explicit execution strategy. Edge sums are
/// accumulated in fixed-size chunks, so the result does not depend on it.
pub fn meso_functionals_with(
    q: &Generator,
    p: &LatticeDistribution,
    pss: &LatticeDistribution,
    exec: Exec,
) -> Result<MesoThermo> {
    if p.trunc != *q.trunc() || pss.trunc != *q.trunc() {
        return Err(Error::Precondition(
            "distributions and generator live on different boxes".into(),
        ));
    }
    let edges = q.edges();
    let chunks = edges.len().div_ceil(CHUNK);
    let partial: Vec<Result<[KahanSum; 3]>> = map_indexed(exec, chunks, |c| {
        let mut acc = [KahanSum::new(); 3];
        for e in &edges[c * CHUNK..((c + 1) * CHUNK).min(edges.len())] {
            for (a, t) in acc.iter_mut().zip(edge_terms(e, &p.p, &pss.p)?) {
                a.add(t);
            }
        }
        Ok(acc)
    });
    let mut totals = [KahanSum::new(); 3];
    for chunk in partial {
        for (tot, part) in totals.iter_mut().zip(chunk?) {
            tot.add(part.value());
        }
    }
    let mut free = KahanSum::new();
    for (&pi, &si) in p.p.iter().zip(&pss.p) {
        if pi > 0.0 {
            if !(si > 0.0) {
                return Err(Error::Precondition(
                    "p charges states outside the support of pss".into(),
                ));
            }
            free.add(pi * log_ratio(pi, si));
        }
    }
    Ok(MesoThermo {
        e_p: totals[0].value(),
        f_d: totals[1].value(),
        q_hk: totals[2].value(),
        free_energy: free.value(),
        t: p.t,
    })
}

fn reversible_fluxes(net: &ReactionNetwork, x: &[f64]) -> Result<Vec<(f64, f64)>> {
    if x.len() != net.num_species() || x.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Precondition(
            "state must be strictly positive with one entry per species".into(),
        ));
    }
    let fluxes = net.fluxes(x)?;
    for (r, &(rp, rm)) in net.reactions().iter().zip(&fluxes) {
        if !(rp > 0.0 && rm > 0.0) {
            return Err(Error::Irreversible(format!(
                "undefined: irreversible reaction {} (rates {rp:e}, {rm:e})",
                r.label
            )));
        }
    }
    Ok(fluxes)
}

/// Macroscopic densities `σ_tot`, `f_d`, `q_hk` at `x` and the potential `φ(x)`.
pub fn macro_functionals(net: &ReactionNetwork, qp: &QuasiPotential, x: &MacroState) -> Result<MacroThermo> {
    let fluxes = reversible_fluxes(net, &x.x)?;
    let grad = grad_phi(qp, x)?;
    let mut sigma = KahanSum::new();
    let mut fd = KahanSum::new();
    let mut hk = KahanSum::new();
    for (nu, &(rp, rm)) in net.net_changes().iter().zip(&fluxes) {
        let work: f64 = nu.iter().zip(&grad).map(|(&n, g)| n as f64 * g).sum();
        let affinity = log_ratio(rp, rm);
        sigma.add((rp - rm) * affinity);
        fd.add((rm - rp) * work);
        hk.add((rm - rp) * (-affinity - work));
    }
    Ok(MacroThermo {
        sigma_tot: sigma.value(),
        f_d: fd.value(),
        q_hk: hk.value(),
        phi: phi(qp, x)?,
        t: x.t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditRow {
    pub t: f64,
    /// `|σ_tot − f_d − q_hk|`.
    pub identity_residual: f64,
    /// `|Δφ/Δt + f_d|` with a centred difference.
    pub balance_residual: f64,
    pub dphi_dt: f64,
    pub thermo: MacroThermo,
}

/// Free-energy balance `dφ/dt = q_hk − σ_tot = −f_d` along a trajectory,
/// checked at every interior sample.
pub fn energy_balance_audit(net: &ReactionNetwork, qp: &QuasiPotential, traj: &Trajectory) -> Result<Vec<AuditRow>> {
    let phis = traj.states.iter().map(|s| phi(qp, s)).collect::<Result<Vec<_>>>()?;
    let n = traj.states.len();
    let mut rows = Vec::with_capacity(n.saturating_sub(2));
    for i in 1..n.saturating_sub(1) {
        let th = macro_functionals(net, qp, &traj.states[i])?;
        let dt = traj.times[i + 1] - traj.times[i - 1];
        let dphi_dt = (phis[i + 1] - phis[i - 1]) / dt;
        rows.push(AuditRow {
            t: traj.times[i],
            identity_residual: (th.sigma_tot - th.f_d - th.q_hk).abs(),
            balance_residual: (dphi_dt + th.f_d).abs(),
            dphi_dt,
            thermo: th,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum WeakDetailedBalance {
    Holds {
        max_residual: f64,
    },
    Fails {
        x: MacroState,
        reaction: String,
        residual: f64,
    },
}

impl WeakDetailedBalance {
    pub fn holds(&self) -> bool {
        matches!(self, Self::Holds { .. })
    }
}

/// Checks `ln(R₊ℓ/R₋ℓ) = −νℓ·∇φ` for every reaction at every sample.
pub fn weak_detailed_balance_check(
    net: &ReactionNetwork,
    qp: &QuasiPotential,
    xs: &[MacroState],
) -> Result<WeakDetailedBalance> {
    let mut worst: Option<(f64, usize, usize)> = None;
    let nus = net.net_changes();
    for (i, x) in xs.iter().enumerate() {
        let fluxes = reversible_fluxes(net, &x.x)?;
        let grad = grad_phi(qp, x)?;
        for (ell, (nu, &(rp, rm))) in nus.iter().zip(&fluxes).enumerate() {
            let work: f64 = nu.iter().zip(&grad).map(|(&n, g)| n as f64 * g).sum();
            let r = (log_ratio(rp, rm) + work).abs();
            if worst.is_none_or(|(w, _, _)| r > w) {
                worst = Some((r, i, ell));
            }
        }
    }
    Ok(match worst {
        Some((r, i, ell)) if r > WEAK_BALANCE_TOL => WeakDetailedBalance::Fails {
            x: xs[i].clone(),
            reaction: net.reactions()[ell].label.clone(),
            residual: r,
        },
        Some((r, _, _)) => WeakDetailedBalance::Holds { max_residual: r },
        None => WeakDetailedBalance::Holds { max_residual: 0.0 },
    })
}
