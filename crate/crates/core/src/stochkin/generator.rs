use super::{propensity, PropensityScheme, Truncation};
use crate::error::{Error, Result};
use crate::netmodel::{Dir, ReactionNetwork};
use crate::par::{map_indexed, Exec};

pub const DEFAULT_STATE_CAP: u64 = 5_000_000;

/// One reaction edge `from → to = from + ν_ℓ` inside the box with its two
/// directed rates `r+ℓ(from)` and `r−ℓ(to)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub reaction: usize,
    pub forward: f64,
    pub backward: f64,
}

/// Sparse CME generator over a truncation box.
#[derive(Debug, Clone)]
pub struct Generator {
    trunc: Truncation,
    volume: f64,
    scheme: PropensityScheme,
    edges: Vec<Edge>,
    /// Total outflow rate per state (negated diagonal).
    exit: Vec<f64>,
    out_ptr: Vec<usize>,
    out_dst: Vec<usize>,
    out_rate: Vec<f64>,
    in_ptr: Vec<usize>,
    in_src: Vec<usize>,
    in_rate: Vec<f64>,
    leaky: Vec<bool>,
}

struct Row {
    edges: Vec<Edge>,
    leaky: bool,
}

pub fn build_generator(
    net: &ReactionNetwork,
    scheme: PropensityScheme,
    trunc: &Truncation,
    volume: f64,
) -> Result<Generator> {
    build_generator_with_cap(net, scheme, trunc, volume, DEFAULT_STATE_CAP, Exec::default())
}

pub fn build_generator_with_cap(
    net: &ReactionNetwork,
    scheme: PropensityScheme,
    trunc: &Truncation,
    volume: f64,
    cap: u64,
    exec: Exec,
) -> Result<Generator> {
    if trunc.dim() != net.num_species() {
        return Err(Error::Precondition("box dimension differs from species count".into()));
    }
    if !(volume > 0.0) {
        return Err(Error::Precondition("volume must be positive".into()));
    }
    let size = trunc.size();
    if size > cap {
        return Err(Error::TooLarge { states: size, cap });
    }
    let size = size as usize;
    let nus = net.net_changes();

    let shifted = |n: &[u64], nu: &[i64], sign: i64| -> Option<Vec<u64>> {
        let m: Option<Vec<u64>> = n
            .iter()
            .zip(nu)
            .map(|(&v, &d)| u64::try_from(v as i64 + sign * d).ok())
            .collect();
        m.filter(|m| trunc.contains(m))
    };

    let rows: Vec<Result<Row>> = map_indexed(exec, size, |i| {
        let n = trunc.point(i);
        let mut row = Row {
            edges: Vec::new(),
            leaky: false,
        };
        for (ell, nu) in nus.iter().enumerate() {
            let fwd = propensity(net, scheme, &n, volume, ell, Dir::Forward)?;
            match shifted(&n, nu, 1) {
                Some(m) => {
                    let bwd = propensity(net, scheme, &m, volume, ell, Dir::Backward)?;
                    if fwd > 0.0 || bwd > 0.0 {
                        row.edges.push(Edge {
                            from: i,
                            to: trunc.index(&m).unwrap(),
                            reaction: ell,
                            forward: fwd,
                            backward: bwd,
                        });
                    }
                }
                None => row.leaky |= fwd > 0.0,
            }
            if shifted(&n, nu, -1).is_none() {
                row.leaky |= propensity(net, scheme, &n, volume, ell, Dir::Backward)? > 0.0;
            }
        }
        Ok(row)
    });

    let mut edges = Vec::new();
    let mut leaky = Vec::with_capacity(size);
    for row in rows {
        let row = row?;
        edges.extend(row.edges);
        leaky.push(row.leaky);
    }

    // Directed transitions, grouped by source and by target.
    let mut out_count = vec![0usize; size];
    let mut in_count = vec![0usize; size];
    let directed = || {
        edges.iter().flat_map(|e| {
            [(e.from, e.to, e.forward), (e.to, e.from, e.backward)]
                .into_iter()
                .filter(|t| t.2 > 0.0)
        })
    };
    for (s, d, _) in directed() {
        out_count[s] += 1;
        in_count[d] += 1;
    }
    let prefix = |c: &[usize]| {
        let mut p = Vec::with_capacity(c.len() + 1);
        p.push(0);
        for &v in c {
            p.push(p.last().unwrap() + v);
        }
        p
    };
    let out_ptr = prefix(&out_count);
    let in_ptr = prefix(&in_count);
    let total = *out_ptr.last().unwrap();
    let mut out_dst = vec![0; total];
    let mut out_rate = vec![0.0; total];
    let mut in_src = vec![0; total];
    let mut in_rate = vec![0.0; total];
    let mut out_fill = out_ptr[..size].to_vec();
    let mut in_fill = in_ptr[..size].to_vec();
    for (s, d, r) in directed() {
        out_dst[out_fill[s]] = d;
        out_rate[out_fill[s]] = r;
        out_fill[s] += 1;
        in_src[in_fill[d]] = s;
        in_rate[in_fill[d]] = r;
        in_fill[d] += 1;
    }
    let exit = (0..size)
        .map(|i| out_rate[out_ptr[i]..out_ptr[i + 1]].iter().sum())
        .collect();

    Ok(Generator {
        trunc: trunc.clone(),
        volume,
        scheme,
        edges,
        exit,
        out_ptr,
        out_dst,
        out_rate,
        in_ptr,
        in_src,
        in_rate,
        leaky,
    })
}

impl Generator {
    pub fn trunc(&self) -> &Truncation {
        &self.trunc
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn scheme(&self) -> PropensityScheme {
        self.scheme
    }

    pub fn num_states(&self) -> usize {
        self.exit.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Diagonal entry `q(n,n)`.
    pub fn diagonal(&self, i: usize) -> f64 {
        -self.exit[i]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit.iter().fold(0.0, |m: f64, &v| m.max(v))
    }

    /// Off-diagonal entries of row `i` as `(target, rate)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.out_ptr[i]..self.out_ptr[i + 1];
        self.out_dst[r.clone()]
            .iter()
            .copied()
            .zip(self.out_rate[r].iter().copied())
    }

    /// Entries of column `i` off the diagonal, as `(source, rate)`.
    pub fn column(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.in_ptr[i]..self.in_ptr[i + 1];
        self.in_src[r.clone()]
            .iter()
            .copied()
            .zip(self.in_rate[r].iter().copied())
    }

    pub fn is_leaky(&self, i: usize) -> bool {
        self.leaky[i]
    }

    /// `out = Qᵀ p`.
    pub fn apply_transpose(&self, p: &[f64], out: &mut [f64], exec: Exec) {
        crate::par::fill_indexed(exec, out, |i| {
            let inflow: f64 = self.column(i).map(|(s, r)| r * p[s]).sum();
            inflow - self.exit[i] * p[i]
        });
    }

    /// Dense copy, for small test problems.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.num_states();
        let mut q = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, r) in self.row(i) {
                q[(i, j)] += r;
            }
            q[(i, i)] = self.diagonal(i);
        }
        q
    }
}
