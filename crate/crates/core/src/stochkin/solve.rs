use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use super::{Generator, LatticeDistribution};
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::par::Exec;

const POISSON_TAIL: f64 = 1e-12;
const LEAK_WARNING: f64 = 1e-3;
const RESIDUAL_FACTOR: f64 = 1e-12;
/// Work budget `n·b²` above which banded elimination gives way to iteration.
const GTH_BUDGET: f64 = 4e8;
const ITERATIVE_MARGIN: f64 = 1e-4;

fn boundary_mass(q: &Generator, p: &[f64]) -> f64 {
    compensated_sum((0..p.len()).filter(|&i| q.is_leaky(i)).map(|i| p[i]))
}

fn attach_leak_warning(d: &mut LatticeDistribution) {
    if d.boundary_mass_estimate > LEAK_WARNING {
        d.warnings.push(format!(
            "box too leaky: boundary mass {:.3e} exceeds {LEAK_WARNING:e}",
            d.boundary_mass_estimate
        ));
    }
}

/// Poisson(`lt`) weights on `[left, left + len)`, built outward from the
/// mode by ratio recurrences and normalised by their sum. Terms below
/// `1e-20` of the modal weight are dropped; the discarded tail mass is far
/// below the uniformization tolerance.
fn poisson_weights(lt: f64) -> Result<(usize, Vec<f64>)> {
    const RELATIVE_CUTOFF: f64 = 1e-20;
    let mode = lt.floor();
    if mode > 1e9 {
        return Err(Error::TooLarge {
            states: mode as u64,
            cap: 1_000_000_000,
        });
    }
    let mode = mode as usize;
    let mut below = Vec::new();
    let mut wk = 1.0;
    let mut k = mode;
    while k > 0 {
        wk *= k as f64 / lt;
        if wk < RELATIVE_CUTOFF {
            break;
        }
        below.push(wk);
        k -= 1;
    }
    let left = mode - below.len();
    let mut weights: Vec<f64> = below.into_iter().rev().collect();
    weights.push(1.0);
    let mut wk = 1.0;
    let mut k = mode;
    loop {
        k += 1;
        wk *= lt / k as f64;
        if wk < RELATIVE_CUTOFF {
            break;
        }
        weights.push(wk);
    }
    let total = compensated_sum(weights.iter().copied());
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::NoConvergence(format!(
            "Poisson weights degenerate at rate·time {lt}"
        )));
    }
    // Sanity: the dropped tails are bounded by a geometric series of the cut-off.
    debug_assert!(RELATIVE_CUTOFF * (lt.sqrt() + 10.0) / total < POISSON_TAIL);
    weights.iter_mut().for_each(|w| *w /= total);
    Ok((left, weights))
}

/// Transient solution of `dp/dt = Qᵀp` over `t_end` by uniformization.
pub fn cme_evolve(q: &Generator, p0: &LatticeDistribution, t_end: f64) -> Result<LatticeDistribution> {
    if p0.trunc != *q.trunc() {
        return Err(Error::Precondition(
            "initial distribution lives on a different box".into(),
        ));
    }
    if !(t_end >= 0.0) {
        return Err(Error::Precondition("t_end must be nonnegative".into()));
    }
    let lambda = q.max_exit_rate();
    let mut out = p0.clone();
    out.t = p0.t + t_end;
    out.warnings.clear();
    if t_end == 0.0 || lambda == 0.0 {
        out.boundary_mass_estimate = boundary_mass(q, &out.p);
        attach_leak_warning(&mut out);
        return Ok(out);
    }
    let lt = lambda * t_end;
    let (left, weights) = poisson_weights(lt)?;
    let n = q.num_states();
    let mut v = p0.p.clone();
    let mut w = vec![0.0; n];
    let mut acc = vec![0.0; n];
    let exec = if n > 4096 { Exec::Parallel } else { Exec::Sequential };
    for k in 0..left + weights.len() {
        if k > 0 {
            q.apply_transpose(&v, &mut w, exec);
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = (*vi + wi / lambda).max(0.0);
            }
        }
        if k >= left {
            let wk = weights[k - left];
            for (a, vi) in acc.iter_mut().zip(&v) {
                *a += wk * vi;
            }
        }
    }
    let total = compensated_sum(acc.iter().copied());
    for a in &mut acc {
        *a /= total;
    }
    out.p = acc;
    out.boundary_mass_estimate = boundary_mass(q, &out.p);
    attach_leak_warning(&mut out);
    Ok(out)
}

/// Stationary distributions, one per closed communicating class.
#[derive(Debug, Clone, Serialize)]
pub struct SteadyState {
    pub classes: Vec<LatticeDistribution>,
    /// More than one closed class: the stationary law is not unique.
    pub reducible: bool,
    pub transient_states: usize,
    pub residuals: Vec<f64>,
}

impl SteadyState {
    pub fn unique(&self) -> Result<&LatticeDistribution> {
        if self.reducible {
            Err(Error::Precondition(format!(
                "box is reducible into {} closed classes",
                self.classes.len()
            )))
        } else {
            Ok(&self.classes[0])
        }
    }

    pub fn class_containing(&self, n: &[u64]) -> Option<&LatticeDistribution> {
        self.classes.iter().find(|d| d.prob(n) > 0.0)
    }
}

struct LocalChain {
    states: Vec<usize>,
    /// Local out-transitions `(target, rate)` per local state.
    out: Vec<Vec<(usize, f64)>>,
    inc: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
}

impl LocalChain {
    fn new(q: &Generator, states: Vec<usize>) -> Self {
        let mut local = std::collections::HashMap::with_capacity(states.len());
        for (k, &s) in states.iter().enumerate() {
            local.insert(s, k);
        }
        let n = states.len();
        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        for (k, &s) in states.iter().enumerate() {
            for (t, r) in q.row(s) {
                let lt = local[&t];
                out[k].push((lt, r));
                inc[lt].push((k, r));
            }
        }
        let exit = states.iter().map(|&s| -q.diagonal(s)).collect();
        Self { states, out, inc, exit }
    }

    fn bandwidth(&self) -> usize {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(k, o)| o.iter().map(move |&(t, _)| k.abs_diff(t)))
            .max()
            .unwrap_or(0)
    }

    fn residual(&self, p: &[f64]) -> f64 {
        (0..p.len())
            .map(|k| {
                let inflow: f64 = self.inc[k].iter().map(|&(s, r)| r * p[s]).sum();
                (inflow - self.exit[k] * p[k]).abs()
            })
            .fold(0.0, f64::max)
    }

    fn normalise(p: &mut [f64]) {
        let s = compensated_sum(p.iter().copied());
        p.iter_mut().for_each(|v| *v /= s);
    }

    fn gauss_seidel_sweep(&self, p: &mut [f64], backward: bool) {
        let n = p.len();
        for step in 0..n {
            let k = if backward { n - 1 - step } else { step };
            let inflow: f64 = self.inc[k].iter().map(|&(s, r)| r * p[s]).sum();
            p[k] = inflow / self.exit[k];
        }
        Self::normalise(p);
    }

    /// Grassmann-Taksar-Heyman state reduction on the banded local matrix.
    fn gth(&self, b: usize) -> Result<Vec<f64>> {
        let n = self.states.len();
        let w = 2 * b + 1;
        let mut a = vec![0.0; n * w];
        let at = |i: usize, j: usize| i * w + (j + b - i);
        for (k, o) in self.out.iter().enumerate() {
            for &(t, r) in o {
                a[at(k, t)] += r;
            }
        }
        let mut s = vec![0.0; n];
        for k in (1..n).rev() {
            let lo = k.saturating_sub(b);
            let sk = compensated_sum((lo..k).map(|j| a[at(k, j)]));
            if sk <= 0.0 {
                return Err(Error::Numerical("class is not irreducible under elimination".into()));
            }
            s[k] = sk;
            for i in lo..k {
                let f = a[at(i, k)] / sk;
                if f == 0.0 {
                    continue;
                }
                for j in lo..k {
                    if j != i {
                        let qkj = a[at(k, j)];
                        if qkj != 0.0 {
                            a[at(i, j)] += f * qkj;
                        }
                    }
                }
            }
        }
        let mut pi = vec![0.0; n];
        pi[0] = 1.0;
        for k in 1..n {
            let lo = k.saturating_sub(b);
            pi[k] = compensated_sum((lo..k).map(|i| pi[i] * a[at(i, k)])) / s[k];
        }
        Self::normalise(&mut pi);
        Ok(pi)
    }

    fn power_then_gauss_seidel(&self, tol: f64) -> Result<Vec<f64>> {
        let n = self.states.len();
        let lambda = 1.05 * self.exit.iter().fold(0.0, |m: f64, &v| m.max(v));
        let mut p = vec![1.0 / n as f64; n];
        let mut next = vec![0.0; n];
        for _ in 0..200 {
            for k in 0..n {
                let inflow: f64 = self.inc[k].iter().map(|&(s, r)| r * p[s]).sum();
                next[k] = p[k] + (inflow - self.exit[k] * p[k]) / lambda;
            }
            std::mem::swap(&mut p, &mut next);
        }
        Self::normalise(&mut p);
        // A small residual does not bound the error of a slowly mixing
        // chain, so iterate well past the acceptance tolerance when possible.
        let target = tol * ITERATIVE_MARGIN;
        let max_sweeps = (500_000_000 / n.max(1)).clamp(1000, 2_000_000);
        for sweep in 0..max_sweeps {
            self.gauss_seidel_sweep(&mut p, sweep % 2 == 1);
            if sweep % 16 == 15 && self.residual(&p) <= target {
                return Ok(p);
            }
        }
        if self.residual(&p) <= tol {
            return Ok(p);
        }
        Err(Error::NoConvergence(format!(
            "stationary iteration residual {:.3e} above {tol:.3e}",
            self.residual(&p)
        )))
    }

    fn solve(&self) -> Result<(Vec<f64>, f64)> {
        let n = self.states.len();
        if n == 1 {
            return Ok((vec![1.0], 0.0));
        }
        let max_exit = self.exit.iter().fold(0.0, |m: f64, &v| m.max(v));
        let tol = RESIDUAL_FACTOR * max_exit;
        let b = self.bandwidth();
        let mut p = if (n as f64) * (b as f64).powi(2) <= GTH_BUDGET && n * (2 * b + 1) <= 60_000_000 {
            self.gth(b)?
        } else {
            self.power_then_gauss_seidel(tol)?
        };
        let mut res = self.residual(&p);
        let mut sweeps = 0;
        while res > tol && sweeps < 1000 {
            self.gauss_seidel_sweep(&mut p, sweeps % 2 == 1);
            res = self.residual(&p);
            sweeps += 1;
        }
        if res > tol {
            return Err(Error::NoConvergence(format!(
                "stationary residual {res:.3e} above {tol:.3e}"
            )));
        }
        Ok((p, res))
    }
}

/// Stationary distribution(s) of `Q`: solves `Qᵀp = 0, Σp = 1` on every
/// closed communicating class of the truncated chain.
pub fn cme_steady_state(q: &Generator) -> Result<SteadyState> {
    let n = q.num_states();
    let mut graph: DiGraph<(), ()> = DiGraph::with_capacity(n, 0);
    for _ in 0..n {
        graph.add_node(());
    }
    for i in 0..n {
        for (j, _) in q.row(i) {
            graph.add_edge((i as u32).into(), (j as u32).into(), ());
        }
    }
    let sccs = tarjan_scc(&graph);
    let mut comp = vec![0usize; n];
    for (c, members) in sccs.iter().enumerate() {
        for v in members {
            comp[v.index()] = c;
        }
    }
    let mut classes = Vec::new();
    let mut residuals = Vec::new();
    let mut transient = 0;
    for (c, members) in sccs.iter().enumerate() {
        let closed = members.iter().all(|v| q.row(v.index()).all(|(j, _)| comp[j] == c));
        if !closed {
            transient += members.len();
            continue;
        }
        let mut states: Vec<usize> = members.iter().map(|v| v.index()).collect();
        states.sort_unstable();
        let chain = LocalChain::new(q, states);
        let (p_local, res) = chain.solve()?;
        let mut p = vec![0.0; n];
        for (k, &s) in chain.states.iter().enumerate() {
            p[s] = p_local[k];
        }
        let mut d = LatticeDistribution::from_vec(q.trunc().clone(), p);
        d.boundary_mass_estimate = boundary_mass(q, &d.p);
        attach_leak_warning(&mut d);
        classes.push((chain.states[0], d));
        residuals.push(res);
    }
    // Order classes by their lowest state for deterministic output.
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by_key(|&i| classes[i].0);
    let residuals = order.iter().map(|&i| residuals[i]).collect();
    let mut slots: Vec<Option<LatticeDistribution>> = classes.into_iter().map(|(_, d)| Some(d)).collect();
    let classes: Vec<LatticeDistribution> = order.iter().map(|&i| slots[i].take().unwrap()).collect();
    let reducible = classes.len() > 1;
    Ok(SteadyState {
        classes,
        reducible,
        transient_states: transient,
        residuals,
    })
}
