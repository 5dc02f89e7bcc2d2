//! Deterministic mass-balance kinetics `dx/dt = F(x)`: right-hand side,
//! Jacobian, adaptive Dormand-Prince integration and fixed points.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::netmodel::{Dir, MacroState, RateLaw, ReactionNetwork};
use crate::stoichio::{stoich_matrix, surviving_class};

/// `F_i(x) = Σℓ ν_ℓi (R+ℓ(x) − R-ℓ(x))`.
pub fn rhs(net: &ReactionNetwork, x: &[f64]) -> Result<Vec<f64>> {
    let mut f = vec![0.0; net.num_species()];
    for (ell, r) in net.reactions().iter().enumerate() {
        let j = net.eval_rate(ell, Dir::Forward, x)? - net.eval_rate(ell, Dir::Backward, x)?;
        for (fi, nu) in f.iter_mut().zip(r.net_change()) {
            if nu != 0 {
                *fi += nu as f64 * j;
            }
        }
    }
    Ok(f)
}

/// `∂R/∂x` for a mass-action monomial, written into `grad`.
fn monomial_gradient(k: f64, coeffs: &[u32], x: &[f64], grad: &mut [f64]) {
    for j in 0..x.len() {
        if coeffs[j] == 0 {
            grad[j] = 0.0;
            continue;
        }
        let mut g = k * coeffs[j] as f64 * x[j].powi(coeffs[j] as i32 - 1);
        for (i, (&c, &xi)) in coeffs.iter().zip(x).enumerate() {
            if i != j && c != 0 {
                g *= xi.powi(c as i32);
            }
        }
        grad[j] = g;
    }
}

/// Central finite-difference Jacobian with `h_j = √ε·max(1, |x_j|)`.
pub fn jacobian_fd(net: &ReactionNetwork, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = f64::EPSILON.sqrt() * x[j].abs().max(1.0);
        let h = if x[j] - h < 0.0 { x[j] * 0.5 } else { h };
        xp[j] = x[j] + h;
        let fp = rhs(net, &xp)?;
        xp[j] = x[j] - h;
        let fm = rhs(net, &xp)?;
        xp[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Drift Jacobian `B_ij = ∂F_i/∂x_j`: analytic for mass action, finite
/// differences otherwise.
pub fn jacobian(net: &ReactionNetwork, x: &[f64]) -> Result<DMatrix<f64>> {
    if !net.is_mass_action() {
        return jacobian_fd(net, x);
    }
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    for r in net.reactions() {
        let nu = r.net_change();
        if let RateLaw::MassAction { rate_constant } = r.forward {
            monomial_gradient(rate_constant, &r.nu_plus, x, &mut gp);
        }
        match &r.backward {
            Some(RateLaw::MassAction { rate_constant }) => monomial_gradient(*rate_constant, &r.nu_minus, x, &mut gm),
            _ => gm.iter_mut().for_each(|g| *g = 0.0),
        }
        for i in 0..n {
            if nu[i] == 0 {
                continue;
            }
            for j in 0..n {
                jac[(i, j)] += nu[i] as f64 * (gp[j] - gm[j]);
            }
        }
    }
    Ok(jac)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Output spacing; `None` records every accepted step.
    pub dt_out: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            dt_out: None,
            max_steps: 5_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_output(dt_out: f64) -> Self {
        Self {
            dt_out: Some(dt_out),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MacroState>,
}

impl Trajectory {
    pub fn last(&self) -> &MacroState {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const CLAMP: f64 = 1e-12;

enum StepOutcome {
    Accepted { y: Vec<f64>, f: Vec<f64>, err: f64 },
    Rejected,
}

fn dopri_step(net: &ReactionNetwork, y: &[f64], f0: &[f64], h: f64, opts: &OdeOptions) -> Result<StepOutcome> {
    let n = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(f0.to_vec());
    let mut stage = vec![0.0; n];
    for s in 1..7 {
        for i in 0..n {
            let mut acc = y[i];
            for (j, kj) in k.iter().enumerate() {
                acc += h * A[s][j] * kj[i];
            }
            stage[i] = acc;
        }
        match rhs(net, &stage) {
            Ok(f) => k.push(f),
            // Stage points may leave the orthant where a rate law is defined.
            Err(Error::Domain { .. }) => return Ok(StepOutcome::Rejected),
            Err(e) => return Err(e),
        }
    }
    // Stage 7 is evaluated at the 5th-order solution (FSAL).
    let mut ynew = stage;
    if ynew.iter().any(|&v| v < -CLAMP) {
        return Ok(StepOutcome::Rejected);
    }
    let mut err = 0.0;
    for i in 0..n {
        let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * h;
        let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
        err += (e / sc).powi(2);
    }
    let err = (err / n.max(1) as f64).sqrt();
    let mut f = k.pop().unwrap();
    if ynew.iter().any(|&v| v < 0.0) {
        ynew.iter_mut().for_each(|v| *v = v.max(0.0));
        f = rhs(net, &ynew)?;
    }
    Ok(StepOutcome::Accepted { y: ynew, f, err })
}

/// Integrate from `x0` (at time `x0.t`) over a duration `t_end`.
pub fn integrate_ode(net: &ReactionNetwork, x0: &MacroState, t_end: f64, opts: &OdeOptions) -> Result<Trajectory> {
    if x0.x.len() != net.num_species() {
        return Err(Error::Precondition("initial state has wrong length".into()));
    }
    if x0.x.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::Precondition(
            "initial state must be finite and nonnegative".into(),
        ));
    }
    if !(t_end >= 0.0) {
        return Err(Error::Precondition("t_end must be nonnegative".into()));
    }
    let t0 = x0.t;
    let tf = t0 + t_end;
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![x0.clone()],
    };
    if t_end == 0.0 {
        return Ok(traj);
    }
    let mut next_out = opts.dt_out.map(|d| (1usize, d));
    let out_time = |k: usize, d: f64| (t0 + k as f64 * d).min(tf);

    let mut t = t0;
    let mut y = x0.x.clone();
    let mut f = rhs(net, &y)?;
    let fnorm = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ynorm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut h = if fnorm > 0.0 {
        (0.01 * ynorm.max(1e-3) / fnorm).min(t_end)
    } else {
        t_end
    };
    if let Some((k, d)) = next_out {
        h = h.min(out_time(k, d) - t);
    }
    let mut steps = 0usize;
    while t < tf {
        let mut target = tf;
        if let Some((k, d)) = next_out {
            target = out_time(k, d);
        }
        let mut hit = false;
        if t + h >= target {
            h = target - t;
            hit = true;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t });
        }
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Numerical(format!(
                "exceeded {} integration steps",
                opts.max_steps
            )));
        }
        match dopri_step(net, &y, &f, h, opts)? {
            StepOutcome::Rejected => {
                h *= 0.5;
                continue;
            }
            StepOutcome::Accepted { y: ynew, f: fnew, err } => {
                if err > 1.0 {
                    h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                    continue;
                }
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                t = if hit { target } else { t + h };
                y = ynew;
                f = fnew;
                match next_out.as_mut() {
                    Some((k, d)) if hit => {
                        traj.times.push(t);
                        traj.states.push(MacroState { x: y.clone(), t });
                        *k += 1;
                        // Guard against a final grid point landing within rounding of tf.
                        if tf - out_time(*k, *d) <= 1e-12 * tf.abs().max(1.0) && t < tf {
                            *k = usize::MAX / 2;
                        }
                    }
                    None => {
                        traj.times.push(t);
                        traj.states.push(MacroState { x: y.clone(), t });
                    }
                    _ => {}
                }
                h *= fac;
            }
        }
    }
    if *traj.times.last().unwrap() < tf {
        traj.times.push(tf);
        traj.states.push(MacroState { x: y, t: tf });
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoint {
    pub q: MacroState,
    pub stable: bool,
    pub jacobian_eigen_max_real: f64,
}

#[derive(Debug, Clone, Default)]
pub struct FixedPointSearch {
    pub points: Vec<FixedPoint>,
    /// One notice per seed that did not converge.
    pub skipped: Vec<String>,
}

/// Largest real part among eigenvalues of the Jacobian restricted to the
/// column space of `S`.
pub fn restricted_spectral_abscissa(net: &ReactionNetwork, x: &[f64]) -> Result<f64> {
    let u = stoich_matrix(net).column_space_basis();
    if u.ncols() == 0 {
        return Ok(0.0);
    }
    let b = jacobian(net, x)?;
    let br = u.transpose() * b * &u;
    Ok(br
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

const FIXED_POINT_TOL: f64 = 1e-10;

fn newton_on_class(net: &ReactionNetwork, seed: &[f64]) -> Result<Vec<f64>> {
    let n = seed.len();
    let s = stoich_matrix(net);
    let class = surviving_class(&s, &MacroState::new(seed.to_vec()));
    let u = &class.tangent;
    let r = u.ncols();
    let laws: Vec<DVector<f64>> = class
        .laws
        .iter()
        .map(|eta| DVector::from_iterator(n, eta.iter().map(|&v| v as f64)))
        .collect();
    let residual = |x: &[f64]| -> Result<(DVector<f64>, f64)> {
        let f = rhs(net, x)?;
        let fmax = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let fv = DVector::from_vec(f);
        let mut g = DVector::zeros(n);
        g.rows_mut(0, r).copy_from(&(u.transpose() * &fv));
        for (k, eta) in laws.iter().enumerate() {
            g[r + k] = eta.dot(&DVector::from_column_slice(x)) - class.conserved[k];
        }
        Ok((g, fmax))
    };
    let mut x = seed.to_vec();
    let (mut g, mut fmax) = residual(&x)?;
    let mut polish = 0;
    for _ in 0..200 {
        if fmax <= FIXED_POINT_TOL {
            // A couple of extra steps push the residual to rounding level.
            polish += 1;
            if polish > 2 {
                return Ok(x);
            }
        }
        let jac = jacobian(net, &x)?;
        let mut m = DMatrix::zeros(n, n);
        m.rows_mut(0, r).copy_from(&(u.transpose() * &jac));
        for (k, eta) in laws.iter().enumerate() {
            m.row_mut(r + k).copy_from(&eta.transpose());
        }
        let Some(dx) = m.lu().solve(&(-&g)) else {
            return Err(Error::NoConvergence("singular Newton system".into()));
        };
        let mut alpha: f64 = 1.0;
        for i in 0..n {
            if dx[i] < 0.0 {
                alpha = alpha.min(0.99 * x[i] / -dx[i]);
            }
        }
        let g0 = g.norm();
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = (0..n).map(|i| (x[i] + alpha * dx[i]).max(0.0)).collect();
            if let Ok((gt, ft)) = residual(&trial) {
                if gt.norm() <= (1.0 - 1e-4 * alpha) * g0 || (polish > 0 && gt.norm() <= g0) {
                    x = trial;
                    g = gt;
                    fmax = ft;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            if fmax <= FIXED_POINT_TOL {
                return Ok(x);
            }
            return Err(Error::NoConvergence("line search stalled".into()));
        }
    }
    if fmax <= FIXED_POINT_TOL {
        Ok(x)
    } else {
        Err(Error::NoConvergence(format!("|F| = {fmax:e} after 200 iterations")))
    }
}

/// Damped Newton from each seed within its compatibility class. Roots
/// closer than 1e-8 are merged.
pub fn find_fixed_points(net: &ReactionNetwork, seeds: &[MacroState]) -> Result<FixedPointSearch> {
    let mut out = FixedPointSearch::default();
    for (i, seed) in seeds.iter().enumerate() {
        if seed.x.len() != net.num_species() || seed.x.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Precondition(format!("seed {i} must be strictly positive")));
        }
        let q = match newton_on_class(net, &seed.x) {
            Ok(q) => q,
            Err(e @ (Error::NoConvergence(_) | Error::Domain { .. })) => {
                out.skipped.push(format!("seed {i} {:?}: {e}", seed.x));
                continue;
            }
            Err(e) => return Err(e),
        };
        let duplicate = out
            .points
            .iter()
            .any(|p| p.q.x.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= 1e-8);
        if duplicate {
            continue;
        }
        let abscissa = restricted_spectral_abscissa(net, &q)?;
        out.points.push(FixedPoint {
            q: MacroState::new(q),
            stable: abscissa < 0.0,
            jacobian_eigen_max_real: abscissa,
        });
    }
    Ok(out)
}

/// Single-seed convenience wrapper.
pub fn fixed_point_from(net: &ReactionNetwork, seed: &[f64]) -> Result<FixedPoint> {
    let mut search = find_fixed_points(net, &[MacroState::new(seed.to_vec())])?;
    match search.points.pop() {
        Some(p) => Ok(p),
        None => Err(Error::NoConvergence(search.skipped.join("; "))),
    }
}
