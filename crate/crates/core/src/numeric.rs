//! Small numerical utilities shared across modules.

use nalgebra::{DMatrix, DVector};

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if !t.is_finite() {
            // Infinities and NaN propagate without polluting the compensation.
            self.sum = t;
            self.comp = 0.0;
            return;
        }
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        if self.sum.is_finite() {
            self.sum + self.comp
        } else {
            self.sum
        }
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// `(e^z - 1) / z`, accurate near zero.
pub fn exprel(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

/// Derivative of [`exprel`], `(e^z (z - 1) + 1) / z²`; positive everywhere.
pub fn exprel_derivative(z: f64) -> f64 {
    if z.abs() < 1.0 {
        // Σ k z^(k-1) / (k+1)!
        let mut term = 0.5;
        let mut total = 0.5;
        for k in 2..24 {
            term *= z / (k + 1) as f64;
            total += k as f64 * term;
        }
        total
    } else {
        (z.exp() * (z - 1.0) + 1.0) / (z * z)
    }
}

/// `c * (e^s - 1)` for `c >= 0`, evaluated as `exp(ln c + s)` when `|s|` is large.
pub(crate) fn scaled_expm1(c: f64, s: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    if s.abs() > 500.0 {
        (c.ln() + s).exp() - c
    } else {
        c * s.exp_m1()
    }
}

/// `c * e^s` with the same large-argument guard.
pub(crate) fn scaled_exp(c: f64, s: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else if s.abs() > 500.0 {
        (c.ln() + s).exp()
    } else {
        c * s.exp()
    }
}

/// Orthonormal basis (as columns) of the span of `vectors`, by modified
/// Gram-Schmidt with re-orthogonalisation.
pub fn orthonormal_basis(dim: usize, vectors: &[DVector<f64>]) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let scale = vectors.iter().map(|v| v.amax()).fold(0.0, f64::max).max(1.0);
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w -= b * c;
            }
        }
        let norm = w.norm();
        if norm > 1e-10 * scale {
            basis.push(w / norm);
        }
    }
    if basis.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&basis)
    }
}

/// Radical-inverse Halton point `index` (1-based recommended) in `[0,1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    const PRIMES: [u64; 32] = [
        2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107,
        109, 113, 127, 131,
    ];
    (0..dim)
        .map(|d| {
            let base = PRIMES[d % PRIMES.len()];
            // Dimensions past the table reuse primes with a shifted index.
            let mut i = index + (d / PRIMES.len()) as u64 * 7919;
            let mut f = 1.0;
            let mut r = 0.0;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}

/// Quasi-random sample points in `(0, hi]^dim`.
pub fn sample_box(count: usize, dim: usize, hi: f64) -> Vec<Vec<f64>> {
    (1..=count as u64)
        .map(|i| halton(i, dim).into_iter().map(|u| hi * (1.0 - u)).collect())
        .collect()
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson<F, E>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64, E>
where
    F: Fn(f64) -> Result<f64, E>,
{
    fn recurse<F, E>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64, E>
    where
        F: Fn(f64) -> Result<f64, E>,
    {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm)?;
        let frm = f(rm)?;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Monotone piecewise-cubic (Fritsch-Carlson) interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    /// `xs` must be strictly increasing with at least two points.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n);
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] <= 0.0 {
                    d[k] = 0.0;
                } else {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = Self::end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = Self::end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Self { xs, ys, slopes: d }
    }

    fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
        let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if d.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            d
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    fn locate(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&x) {
            return None;
        }
        let k = self.xs.partition_point(|&g| g <= x);
        Some(k.saturating_sub(1).min(self.xs.len() - 2))
    }

    pub fn eval(&self, x: f64) -> Option<f64> {
        let k = self.locate(x)?;
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (h00, h10, h01, h11) = hermite_basis(t);
        Some(h00 * self.ys[k] + h10 * h * self.slopes[k] + h01 * self.ys[k + 1] + h11 * h * self.slopes[k + 1])
    }

    pub fn derivative(&self, x: f64) -> Option<f64> {
        let k = self.locate(x)?;
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let d00 = 6.0 * t * t - 6.0 * t;
        let d10 = 3.0 * t * t - 4.0 * t + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * t * t - 2.0 * t;
        Some((d00 * self.ys[k] + d01 * self.ys[k + 1]) / h + d10 * self.slopes[k] + d11 * self.slopes[k + 1])
    }
}

pub(crate) fn hermite_basis(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        2.0 * t3 - 3.0 * t2 + 1.0,
        t3 - 2.0 * t2 + t,
        -2.0 * t3 + 3.0 * t2,
        t3 - t2,
    )
}

/// Derivative at `x` of the Lagrange polynomial through `(xs, ys)`.
pub fn lagrange_derivative(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let mut total = 0.0;
    for j in 0..n {
        let mut denom = 1.0;
        for m in 0..n {
            if m != j {
                denom *= xs[j] - xs[m];
            }
        }
        let mut num = 0.0;
        for i in 0..n {
            if i == j {
                continue;
            }
            let mut prod = 1.0;
            for m in 0..n {
                if m != j && m != i {
                    prod *= x - xs[m];
                }
            }
            num += prod;
        }
        total += ys[j] * num / denom;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut s = KahanSum::new();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-16);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-15).abs() < 1e-30);
    }

    #[test]
    fn exprel_is_continuous_at_switch() {
        let a = exprel(0.999_999e-5);
        let b = exprel(1.000_001e-5);
        assert!((a - b).abs() < 1e-10);
        assert_eq!(exprel(0.0), 1.0);
    }

    #[test]
    fn compensated_sum_propagates_infinity() {
        assert_eq!(compensated_sum([1.0, f64::INFINITY, 2.0]), f64::INFINITY);
        assert!(compensated_sum([f64::INFINITY, f64::NEG_INFINITY]).is_nan());
        assert_eq!(compensated_sum([1e16, 1.0, -1e16]), 1.0);
    }

    #[test]
    fn exprel_derivative_matches_differences() {
        for &z in &[-30.0, -2.0, -0.999, -1e-4, 0.0, 1e-4, 0.5, 0.999, 1.001, 3.0, 40.0] {
            let h = 1e-5 * (1.0 + f64::abs(z));
            let fd = (exprel(z + h) - exprel(z - h)) / (2.0 * h);
            let d = exprel_derivative(z);
            assert!((d - fd).abs() <= 1e-7 * d.abs().max(1.0), "z = {z}: {d} vs {fd}");
        }
        assert_eq!(exprel_derivative(0.0), 0.5);
    }

    #[test]
    fn simpson_integrates_log() {
        let v: Result<f64, ()> = adaptive_simpson(&|x: f64| Ok(x.ln()), 1.0, 2.0, 1e-14);
        let exact = 2.0 * 2f64.ln() - 1.0;
        assert!((v.unwrap() - exact).abs() < 1e-13);
    }

    #[test]
    fn pchip_reproduces_nodes_and_lines() {
        let xs: Vec<f64> = (0..6).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let p = Pchip::new(xs.clone(), ys.clone());
        for (x, y) in xs.iter().zip(&ys) {
            assert!((p.eval(*x).unwrap() - y).abs() < 1e-14);
        }
        assert!((p.derivative(1.3).unwrap() - 2.0).abs() < 1e-12);
        assert!(p.eval(3.0).is_none());
    }

    #[test]
    fn lagrange_derivative_exact_for_quartic() {
        let xs = [0.9, 0.95, 1.0, 1.05, 1.1];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| x.powi(4) - 3.0 * x * x).collect();
        let d = lagrange_derivative(&xs, &ys, 1.0);
        assert!((d - (4.0 - 6.0)).abs() < 1e-10);
    }

    #[test]
    fn halton_points_in_unit_cube() {
        for i in 1..100 {
            for u in halton(i, 5) {
                assert!((0.0..1.0).contains(&u));
            }
        }
    }

    #[test]
    fn orthonormal_basis_drops_dependent_vectors() {
        let v = vec![
            DVector::from_vec(vec![1.0, -1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, -1.0]),
            DVector::from_vec(vec![-1.0, 0.0, 1.0]),
        ];
        let u = orthonormal_basis(3, &v);
        assert_eq!(u.ncols(), 2);
        let g = u.transpose() * &u;
        assert!((g - DMatrix::identity(2, 2)).amax() < 1e-14);
    }
}
