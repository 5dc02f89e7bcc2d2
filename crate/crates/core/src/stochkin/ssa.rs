use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use super::{propensity, PropensityScheme};
use crate::error::{Error, Result};
use crate::netmodel::{Dir, MesoState, ReactionNetwork};
use crate::par::{map_indexed, Exec};

/// Hard cap on the number of jumps in a single path.
const MAX_EVENTS: usize = 50_000_000;

/// One exact trajectory of the jump process.
///
/// `states[i]` holds on `[jump_times[i], jump_times[i+1])`; the first entry
/// is the initial condition and the last interval extends to `t_end`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SsaPath {
    pub jump_times: Vec<f64>,
    pub states: Vec<MesoState>,
    /// `(reaction, direction)` fired at each jump after the first state.
    pub fired: Vec<(usize, Dir)>,
    pub t_end: f64,
    pub seed: u64,
    pub stream: u64,
    /// The path reached a state with total propensity zero before `t_end`.
    pub absorbed: bool,
}

impl SsaPath {
    pub fn num_jumps(&self) -> usize {
        self.fired.len()
    }

    /// Copy numbers at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> &MesoState {
        let idx = self.jump_times.partition_point(|&s| s <= t);
        &self.states[idx.saturating_sub(1)]
    }

    /// States sampled on `grid`, each stamped with its grid time.
    pub fn resample(&self, grid: &[f64]) -> Vec<MesoState> {
        grid.iter()
            .map(|&t| {
                let mut s = self.state_at(t).clone();
                s.t = t;
                s
            })
            .collect()
    }
}

/// Gillespie direct-method path from `n0` over a duration `t_end`.
pub fn ssa_run(
    net: &ReactionNetwork,
    scheme: PropensityScheme,
    n0: &MesoState,
    t_end: f64,
    seed: u64,
) -> Result<SsaPath> {
    ssa_run_stream(net, scheme, n0, t_end, seed, 0)
}

/// As [`ssa_run`] on an independent random stream selected by `stream`.
pub fn ssa_run_stream(
    net: &ReactionNetwork,
    scheme: PropensityScheme,
    n0: &MesoState,
    t_end: f64,
    seed: u64,
    stream: u64,
) -> Result<SsaPath> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::Precondition("t_end must be positive and finite".into()));
    }
    if n0.n.len() != net.num_species() {
        return Err(Error::Precondition(format!(
            "initial state has {} species, network has {}",
            n0.n.len(),
            net.num_species()
        )));
    }
    if !(n0.volume > 0.0) {
        return Err(Error::Precondition("volume must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let changes = net.net_changes();
    let m = net.num_reactions();
    let volume = n0.volume;
    let t0 = n0.t;
    let horizon = t0 + t_end;
    let mut n = n0.n.clone();
    let mut t = t0;
    let mut path = SsaPath {
        jump_times: vec![t0],
        states: vec![n0.clone()],
        fired: Vec::new(),
        t_end: horizon,
        seed,
        stream,
        absorbed: false,
    };
    let mut a = vec![0.0; 2 * m];
    loop {
        for ell in 0..m {
            a[2 * ell] = propensity(net, scheme, &n, volume, ell, Dir::Forward)?;
            a[2 * ell + 1] = propensity(net, scheme, &n, volume, ell, Dir::Backward)?;
        }
        let a0: f64 = a.iter().sum();
        if a0 == 0.0 {
            path.absorbed = true;
            break;
        }
        if !a0.is_finite() {
            return Err(Error::Divergent(format!("total propensity {a0} at n = {n:?}")));
        }
        let tau: f64 = rng.sample::<f64, _>(Exp1) / a0;
        if t + tau > horizon {
            break;
        }
        t += tau;
        let target = rng.random::<f64>() * a0;
        let mut acc = 0.0;
        let mut channel = None;
        for (c, &ac) in a.iter().enumerate() {
            if ac > 0.0 {
                acc += ac;
                channel = Some(c);
                if target < acc {
                    break;
                }
            }
        }
        let c = channel.expect("a positive propensity exists when a0 > 0");
        let (ell, dir) = (c / 2, if c % 2 == 0 { Dir::Forward } else { Dir::Backward });
        let sign = if dir == Dir::Forward { 1 } else { -1 };
        for (nj, &d) in n.iter_mut().zip(&changes[ell]) {
            let next = *nj as i64 + sign * d;
            assert!(
                next >= 0,
                "jump of {} drove a copy number negative",
                net.reactions()[ell].label
            );
            *nj = next as u64;
        }
        path.jump_times.push(t);
        path.states.push(MesoState {
            n: n.clone(),
            volume,
            t,
        });
        path.fired.push((ell, dir));
        if path.fired.len() >= MAX_EVENTS {
            return Err(Error::Divergent(format!(
                "more than {MAX_EVENTS} jumps before t = {horizon}"
            )));
        }
    }
    Ok(path)
}

/// `runs` independent paths; run `r` uses stream `r` of `seed`, so the
/// result does not depend on the execution strategy.
pub fn ssa_ensemble(
    net: &ReactionNetwork,
    scheme: PropensityScheme,
    n0: &MesoState,
    t_end: f64,
    seed: u64,
    runs: usize,
    exec: Exec,
) -> Result<Vec<SsaPath>> {
    map_indexed(exec, runs, |r| ssa_run_stream(net, scheme, n0, t_end, seed, r as u64))
        .into_iter()
        .collect()
}
