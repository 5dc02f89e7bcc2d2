//! Exact stoichiometric linear algebra.
//!
//! Null spaces are computed with fraction-free integer elimination, so
//! `ηᵀS = 0` and `Sξ = 0` hold exactly for every returned basis vector.
//! Basis vectors are primitive (entry gcd 1) with a positive first nonzero
//! entry.

use nalgebra::{DMatrix, DVector};
use num_integer::Integer;
use serde::Serialize;

use crate::detkin::rhs;
use crate::error::{Error, Result};
use crate::netmodel::{Dir, MacroState, ReactionNetwork};
use crate::numeric::{orthonormal_basis, sample_box};

/// `N × M` integer matrix with `S[i][ℓ]` the net change of species `i` in reaction `ℓ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StoichMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl StoichMatrix {
    pub fn from_columns(rows: usize, columns: &[Vec<i64>]) -> Self {
        let cols = columns.len();
        let mut data = vec![0; rows * cols];
        for (l, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows);
            for (i, &v) in c.iter().enumerate() {
                data[i * cols + l] = v;
            }
        }
        Self { rows, cols, data }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, l: usize) -> i64 {
        self.data[i * self.cols + l]
    }

    pub fn column(&self, l: usize) -> Vec<i64> {
        (0..self.rows).map(|i| self.get(i, l)).collect()
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> StoichMatrix {
        let cols: Vec<Vec<i64>> = (0..self.rows).map(|i| self.row(i).to_vec()).collect();
        StoichMatrix::from_columns(self.cols, &cols)
    }

    pub fn rank(&self) -> usize {
        let rows: Vec<Vec<i64>> = (0..self.rows).map(|i| self.row(i).to_vec()).collect();
        echelon(&rows, self.cols).1.len()
    }

    /// `S v` in exact arithmetic.
    pub fn mul_vec(&self, v: &[i64]) -> Vec<i64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `vᵀ S` in exact arithmetic.
    pub fn left_mul_vec(&self, v: &[i64]) -> Vec<i64> {
        (0..self.cols)
            .map(|l| (0..self.rows).map(|i| v[i] * self.get(i, l)).sum())
            .collect()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, l| self.get(i, l) as f64)
    }

    /// Orthonormal basis (columns) of the column space.
    pub fn column_space_basis(&self) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = (0..self.cols)
            .map(|l| DVector::from_iterator(self.rows, self.column(l).into_iter().map(|v| v as f64)))
            .collect();
        orthonormal_basis(self.rows, &cols)
    }

    /// Orthogonal projector onto the column space.
    pub fn column_space_projector(&self) -> DMatrix<f64> {
        let u = self.column_space_basis();
        &u * u.transpose()
    }
}

pub fn stoich_matrix(net: &ReactionNetwork) -> StoichMatrix {
    StoichMatrix::from_columns(net.num_species(), &net.net_changes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConservationBasis {
    pub basis: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleBasis {
    pub basis: Vec<Vec<i64>>,
}

fn row_gcd_normalise(row: &mut [i128]) {
    let g = row.iter().fold(0i128, |g, &v| g.gcd(&v));
    if g > 1 {
        row.iter_mut().for_each(|v| *v /= g);
    }
}

/// Fraction-free reduced echelon form. Returns the reduced rows and the
/// pivot column of each nonzero row.
fn echelon(rows: &[Vec<i64>], ncols: usize) -> (Vec<Vec<i128>>, Vec<usize>) {
    let mut a: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == a.len() {
            break;
        }
        let Some(p) = (r..a.len()).filter(|&i| a[i][c] != 0).min_by_key(|&i| a[i][c].abs()) else {
            continue;
        };
        a.swap(p, r);
        for i in 0..a.len() {
            if i == r || a[i][c] == 0 {
                continue;
            }
            let pv = a[r][c];
            let f = a[i][c];
            let g = pv.gcd(&f);
            let (mi, mr) = (pv / g, f / g);
            for k in 0..ncols {
                a[i][k] = a[i][k] * mi - a[r][k] * mr;
            }
            row_gcd_normalise(&mut a[i]);
        }
        pivots.push(c);
        r += 1;
    }
    a.truncate(r);
    (a, pivots)
}

fn primitive(mut v: Vec<i128>) -> Vec<i64> {
    let g = v.iter().fold(0i128, |g, &x| g.gcd(&x));
    if g > 1 {
        v.iter_mut().for_each(|x| *x /= g);
    }
    if v.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v.into_iter()
        .map(|x| i64::try_from(x).expect("basis entry exceeds i64"))
        .collect()
}

/// Exact integer basis of `{v : A v = 0}` for the matrix with the given rows.
fn integer_kernel(rows: &[Vec<i64>], ncols: usize) -> Vec<Vec<i64>> {
    let (a, pivots) = echelon(rows, ncols);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.into_iter()
        .map(|f| {
            let l = a
                .iter()
                .zip(&pivots)
                .filter(|(row, _)| row[f] != 0)
                .fold(1i128, |l, (row, &pc)| l.lcm(&row[pc].abs()));
            let mut v = vec![0i128; ncols];
            v[f] = l;
            for (row, &pc) in a.iter().zip(&pivots) {
                v[pc] = -row[f] * (l / row[pc]);
            }
            primitive(v)
        })
        .collect()
}

pub fn conservation_laws(s: &StoichMatrix) -> ConservationBasis {
    let t = s.transpose();
    let rows: Vec<Vec<i64>> = (0..t.nrows()).map(|i| t.row(i).to_vec()).collect();
    ConservationBasis {
        basis: integer_kernel(&rows, s.nrows()),
    }
}

pub fn reaction_cycles(s: &StoichMatrix) -> CycleBasis {
    let rows: Vec<Vec<i64>> = (0..s.nrows()).map(|i| s.row(i).to_vec()).collect();
    CycleBasis {
        basis: integer_kernel(&rows, s.ncols()),
    }
}

/// Stoichiometric compatibility class `x0 + span(S)` restricted to the
/// nonnegative orthant.
#[derive(Debug, Clone)]
pub struct SurvivingClass {
    pub laws: Vec<Vec<i64>>,
    /// `ηᵀ x0` for each conservation law.
    pub conserved: Vec<f64>,
    /// Orthonormal basis of the column space of `S`, one column per direction.
    pub tangent: DMatrix<f64>,
}

impl SurvivingClass {
    pub fn dimension(&self) -> usize {
        self.tangent.ncols()
    }

    pub fn conserved_values(&self, y: &[f64]) -> Vec<f64> {
        self.laws
            .iter()
            .map(|eta| eta.iter().zip(y).map(|(&e, &v)| e as f64 * v).sum())
            .collect()
    }

    /// Membership to relative tolerance 1e-10.
    pub fn contains(&self, y: &[f64]) -> bool {
        y.iter().all(|&v| v >= 0.0)
            && self
                .conserved_values(y)
                .iter()
                .zip(&self.conserved)
                .all(|(a, b)| (a - b).abs() <= 1e-10 * b.abs().max(1.0))
    }
}

pub fn surviving_class(s: &StoichMatrix, x0: &MacroState) -> SurvivingClass {
    let laws = conservation_laws(s).basis;
    let mut class = SurvivingClass {
        laws,
        conserved: Vec::new(),
        tangent: s.column_space_basis(),
    };
    class.conserved = class.conserved_values(&x0.x);
    class
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum WegscheiderVerdict {
    Satisfied { max_residual: f64, sampled: bool },
    Violated { max_residual: f64, sampled: bool },
    Inapplicable { reason: String },
}

/// `Σℓ ξℓ ln(R+ℓ(x)/R-ℓ(x))` for every basis cycle.
pub fn cycle_affinities(net: &ReactionNetwork, cycles: &CycleBasis, x: &[f64]) -> Result<Vec<f64>> {
    let fluxes = net.fluxes(x)?;
    Ok(cycles
        .basis
        .iter()
        .map(|xi| {
            xi.iter()
                .zip(&fluxes)
                .filter(|(&c, _)| c != 0)
                .map(|(&c, &(fp, fm))| c as f64 * (fp / fm).ln())
                .sum()
        })
        .collect())
}

const WEGSCHEIDER_TOL: f64 = 1e-9;

pub fn wegscheider_check(net: &ReactionNetwork, cycles: &CycleBasis, samples: usize) -> WegscheiderVerdict {
    if let Some(r) = net.reactions().iter().find(|r| !r.is_reversible()) {
        return WegscheiderVerdict::Inapplicable {
            reason: format!("reaction {} is irreversible", r.label),
        };
    }
    let (max_residual, sampled) = if net.is_mass_action() {
        let max = cycles
            .basis
            .iter()
            .map(|xi| {
                xi.iter()
                    .zip(net.reactions())
                    .filter(|(&c, _)| c != 0)
                    .map(|(&c, r)| {
                        let kp = r.forward.rate_constant().unwrap();
                        let km = r.backward.as_ref().and_then(|b| b.rate_constant()).unwrap();
                        c as f64 * (kp / km).ln()
                    })
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max);
        (max, false)
    } else {
        let mut max = 0.0f64;
        for x in sample_box(samples.max(1), net.num_species(), 10.0) {
            match cycle_affinities(net, cycles, &x) {
                Ok(a) => {
                    for v in a {
                        max = max.max(if v.is_nan() { f64::INFINITY } else { v.abs() });
                    }
                }
                Err(e) => return WegscheiderVerdict::Inapplicable { reason: e.to_string() },
            }
        }
        (max, true)
    };
    if max_residual <= WEGSCHEIDER_TOL {
        WegscheiderVerdict::Satisfied { max_residual, sampled }
    } else {
        WegscheiderVerdict::Violated { max_residual, sampled }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexBalanceReport {
    pub steady_state: MacroState,
    pub complexes: Vec<Vec<u32>>,
    /// Outflow minus inflow, aligned with `complexes`.
    pub imbalances: Vec<f64>,
    pub max_imbalance: f64,
    pub balanced: bool,
}

pub fn complex_balance_check(net: &ReactionNetwork, xss: &MacroState, tol: f64) -> Result<ComplexBalanceReport> {
    if !net.is_mass_action() {
        return Err(Error::Unsupported(
            "complex balance test requires mass-action kinetics".into(),
        ));
    }
    let f = rhs(net, &xss.x)?;
    let fmax = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if fmax > 1e-8 {
        return Err(Error::Precondition(format!(
            "state is not a steady state (|F|_inf = {fmax:e})"
        )));
    }
    let mut complexes: Vec<Vec<u32>> = Vec::new();
    let mut id = |c: &Vec<u32>| -> usize {
        if let Some(i) = complexes.iter().position(|o| o == c) {
            i
        } else {
            complexes.push(c.clone());
            complexes.len() - 1
        }
    };
    let mut edges = Vec::new();
    for (ell, r) in net.reactions().iter().enumerate() {
        let (a, b) = (id(&r.nu_plus), id(&r.nu_minus));
        edges.push((a, b, net.eval_rate(ell, Dir::Forward, &xss.x)?));
        edges.push((b, a, net.eval_rate(ell, Dir::Backward, &xss.x)?));
    }
    let mut imbalances = vec![0.0; complexes.len()];
    for (from, to, rate) in edges {
        imbalances[from] += rate;
        imbalances[to] -= rate;
    }
    let max_imbalance = imbalances.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(ComplexBalanceReport {
        steady_state: xss.clone(),
        complexes,
        imbalances,
        max_imbalance,
        balanced: max_imbalance <= tol,
    })
}
