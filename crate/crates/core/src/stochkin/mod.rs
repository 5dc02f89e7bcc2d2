//! Mesoscopic kinetics at volume `V`: propensities, Gillespie sampling and
//! the truncated chemical master equation.

mod generator;
mod solve;
mod ssa;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{mass_action_monomial, Dir, RateLaw, ReactionNetwork};

pub use generator::{build_generator, build_generator_with_cap, Edge, Generator, DEFAULT_STATE_CAP};
pub use solve::{cme_evolve, cme_steady_state, SteadyState};
pub use ssa::{ssa_ensemble, ssa_run, ssa_run_stream, SsaPath};

/// Convention for turning macroscopic fluxes into jump rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropensityScheme {
    /// `r(n;V) = V·R(n/V)`.
    #[default]
    Scaled,
    /// Falling-factorial mass action, `k V ∏ n_j!/((n_j−ν_j)! V^ν_j)`.
    Combinatorial,
}

/// Jump rate of reaction `ell` in direction `dir` at copy numbers `n`.
///
/// Under either scheme a channel is closed while some reactant count is
/// below its stoichiometric coefficient, so both directions of a lattice
/// edge open and close together.
pub fn propensity(
    net: &ReactionNetwork,
    scheme: PropensityScheme,
    n: &[u64],
    volume: f64,
    ell: usize,
    dir: Dir,
) -> Result<f64> {
    let r = &net.reactions()[ell];
    let Some(law) = r.law(dir) else {
        return Ok(0.0);
    };
    if scheme == PropensityScheme::Combinatorial && !law.is_mass_action() {
        return Err(Error::Unsupported(format!(
            "combinatorial propensity requested for non-mass-action reaction {}",
            r.label
        )));
    }
    let consumed = r.source(dir);
    if n.iter().zip(consumed).any(|(&nj, &c)| nj < c as u64) {
        return Ok(0.0);
    }
    match scheme {
        PropensityScheme::Scaled => {
            let x: Vec<f64> = n.iter().map(|&v| v as f64 / volume).collect();
            let v = match law {
                RateLaw::MassAction { rate_constant } => mass_action_monomial(*rate_constant, consumed, &x),
                RateLaw::Expression(_) => net.eval_rate(ell, dir, &x)?,
            };
            Ok(volume * v)
        }
        PropensityScheme::Combinatorial => {
            let RateLaw::MassAction { rate_constant } = law else {
                unreachable!("checked above")
            };
            let mut a = rate_constant * volume;
            for (&nj, &c) in n.iter().zip(consumed) {
                for k in 0..c as u64 {
                    a *= (nj - k) as f64 / volume;
                }
            }
            Ok(a)
        }
    }
}

/// Rectangular box of copy numbers. Transitions leaving the box are
/// dropped (reflecting truncation).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    lower: Vec<u64>,
    upper: Vec<u64>,
}

impl Truncation {
    pub fn new(lower: Vec<u64>, upper: Vec<u64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Precondition("box bounds must have one entry per species".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| u <= l) {
            return Err(Error::Precondition("box upper bounds must exceed lower bounds".into()));
        }
        Ok(Self { lower, upper })
    }

    /// `[0, upper]` in every coordinate.
    pub fn from_upper(upper: Vec<u64>) -> Result<Self> {
        Self::new(vec![0; upper.len()], upper)
    }

    pub fn lower(&self) -> &[u64] {
        &self.lower
    }

    pub fn upper(&self) -> &[u64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn extent(&self, j: usize) -> u64 {
        self.upper[j] - self.lower[j] + 1
    }

    /// Number of lattice points, saturating.
    pub fn size(&self) -> u64 {
        (0..self.dim()).fold(1u64, |acc, j| acc.saturating_mul(self.extent(j)))
    }

    pub fn contains(&self, n: &[u64]) -> bool {
        n.len() == self.dim()
            && n.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| v >= l && v <= u)
    }

    /// Mixed-radix index, first species varying slowest.
    pub fn index(&self, n: &[u64]) -> Option<usize> {
        if !self.contains(n) {
            return None;
        }
        let mut idx = 0u64;
        for j in 0..self.dim() {
            idx = idx * self.extent(j) + (n[j] - self.lower[j]);
        }
        Some(idx as usize)
    }

    pub fn point(&self, mut idx: usize) -> Vec<u64> {
        let mut n = vec![0; self.dim()];
        for j in (0..self.dim()).rev() {
            let e = self.extent(j) as usize;
            n[j] = self.lower[j] + (idx % e) as u64;
            idx /= e;
        }
        n
    }

    /// Index offset of a unit step in species `j`.
    pub fn stride(&self, j: usize) -> usize {
        (j + 1..self.dim()).map(|k| self.extent(k) as usize).product()
    }
}

/// Probability vector over a truncation box, stored densely in
/// [`Truncation::index`] order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeDistribution {
    pub trunc: Truncation,
    pub p: Vec<f64>,
    pub t: f64,
    /// Probability on states from which some positive-rate transition
    /// leaves the box.
    pub boundary_mass_estimate: f64,
    pub warnings: Vec<String>,
}

impl LatticeDistribution {
    pub fn point_mass(trunc: &Truncation, n: &[u64]) -> Result<Self> {
        let idx = trunc
            .index(n)
            .ok_or_else(|| Error::Precondition(format!("state {n:?} lies outside the box")))?;
        let mut p = vec![0.0; trunc.size() as usize];
        p[idx] = 1.0;
        Ok(Self::from_vec(trunc.clone(), p))
    }

    pub fn from_vec(trunc: Truncation, p: Vec<f64>) -> Self {
        assert_eq!(p.len() as u64, trunc.size());
        Self {
            trunc,
            p,
            t: 0.0,
            boundary_mass_estimate: 0.0,
            warnings: Vec::new(),
        }
    }

    pub fn prob(&self, n: &[u64]) -> f64 {
        self.trunc.index(n).map_or(0.0, |i| self.p[i])
    }

    pub fn total(&self) -> f64 {
        crate::numeric::compensated_sum(self.p.iter().copied())
    }

    /// Mean copy numbers.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.trunc.dim()];
        for (i, &pi) in self.p.iter().enumerate() {
            if pi != 0.0 {
                for (mj, nj) in m.iter_mut().zip(self.trunc.point(i)) {
                    *mj += pi * nj as f64;
                }
            }
        }
        m
    }

    /// Nonzero entries as `(state, probability)` in index order.
    pub fn support(&self) -> impl Iterator<Item = (Vec<u64>, f64)> + '_ {
        self.p
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, &v)| (self.trunc.point(i), v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use crate::netmodel::parse_network;

    #[test]
    fn scaled_propensity() {
        let a = propensity(&bd(), PropensityScheme::Scaled, &[20], 10.0, 0, Dir::Backward).unwrap();
        assert!((a - 20.0).abs() < 1e-12);
        let b = propensity(&bd(), PropensityScheme::Scaled, &[20], 10.0, 0, Dir::Forward).unwrap();
        assert!((b - 10.0).abs() < 1e-12);
    }

    #[test]
    fn combinatorial_propensity() {
        let net = parse_network("species X\nR: 2X -> 3X | kf=6").unwrap();
        let a = propensity(&net, PropensityScheme::Combinatorial, &[5], 10.0, 0, Dir::Forward).unwrap();
        assert!((a - 12.0).abs() < 1e-12);
        for n in [0, 1] {
            assert_eq!(
                propensity(&net, PropensityScheme::Combinatorial, &[n], 10.0, 0, Dir::Forward).unwrap(),
                0.0
            );
        }
        let expr = parse_network("species X\nR: X -> 0 | fwd=\"x(X)\"").unwrap();
        assert!(propensity(&expr, PropensityScheme::Combinatorial, &[3], 1.0, 0, Dir::Forward).is_err());
    }

    #[test]
    fn impossible_jumps_have_zero_rate() {
        let net = parse_network("species X\nR: 2X -> 0 | kf=1").unwrap();
        assert_eq!(
            propensity(&net, PropensityScheme::Scaled, &[1], 1.0, 0, Dir::Forward).unwrap(),
            0.0
        );
        assert!(propensity(&net, PropensityScheme::Scaled, &[2], 1.0, 0, Dir::Forward).unwrap() > 0.0);
    }

    #[test]
    fn box_indexing() {
        let t = Truncation::new(vec![0, 2, 1], vec![3, 4, 2]).unwrap();
        assert_eq!(t.size(), 4 * 3 * 2);
        for i in 0..t.size() as usize {
            assert_eq!(t.index(&t.point(i)), Some(i));
        }
        assert_eq!(t.stride(0), 6);
        assert_eq!(t.stride(2), 1);
        assert!(t.index(&[0, 1, 1]).is_none());
        assert!(Truncation::new(vec![1], vec![1]).is_err());
    }
}
