use serde::Serialize;

use crn_core::detkin::{fixed_point_from, integrate_ode, FixedPoint, OdeOptions};
use crn_core::fdt::{diffusion_simulate, fdt_report, DiffusionOptions, FdtReport, SimulatedCovariance};
use crn_core::ldp::{hje_residual, quasipotential_1d, quasipotential_complex_balanced, QuasiPotential};
use crn_core::stochkin::{
    build_generator, cme_evolve, cme_steady_state, ssa_ensemble, LatticeDistribution, PropensityScheme, Truncation,
};
use crn_core::stoichio::{
    complex_balance_check, conservation_laws, reaction_cycles, stoich_matrix, wegscheider_check, ComplexBalanceReport,
    WegscheiderVerdict,
};
use crn_core::thermo::{energy_balance_audit, macro_functionals, meso_functionals};
use crn_core::{parse_network, Error, MacroState, MesoState, ReactionNetwork};

use crate::args::{CheckArgs, CmeArgs, Common, FdtArgs, Format, OdeArgs, QuasiArgs, Scheme, SsaArgs, ThermoArgs};
use crate::table::{columns, emit, json, Cell, Table};
use crate::CliError;

/// Points used for a tabulated potential when no grid is given.
const DEFAULT_GRID_POINTS: usize = 401;
/// Relaxation time used to locate the attractor of an initial condition.
const RELAX_TIME: f64 = 200.0;

fn load(common: &Common) -> Result<ReactionNetwork, CliError> {
    let text =
        std::fs::read_to_string(&common.file).map_err(|e| CliError::Io(format!("{}: {e}", common.file.display())))?;
    parse_network(&text).map_err(|e| match e {
        Error::Syntax { .. } => CliError::Usage(format!("{}:{e}", common.file.display())),
        other => other.into(),
    })
}

fn finish(common: &Common, text: String) -> Result<(), CliError> {
    emit(&text, common.output.as_deref())
}

fn scheme(s: Scheme) -> PropensityScheme {
    match s {
        Scheme::Scaled => PropensityScheme::Scaled,
        Scheme::Combinatorial => PropensityScheme::Combinatorial,
    }
}

fn volume(net: &ReactionNetwork, flag: Option<f64>) -> Result<f64, CliError> {
    flag.or(net.default_volume())
        .ok_or_else(|| CliError::Usage("--volume is required (the network file sets no volume)".into()))
}

fn initial_conc(net: &ReactionNetwork, flag: Option<Vec<f64>>) -> Result<Vec<f64>, CliError> {
    let x0 = flag
        .or_else(|| net.initial_conc().map(<[f64]>::to_vec))
        .ok_or_else(|| CliError::Usage("--x0 is required (the network file sets no concentrations)".into()))?;
    if x0.len() != net.num_species() {
        return Err(CliError::Usage(format!(
            "expected {} initial values, got {}",
            net.num_species(),
            x0.len()
        )));
    }
    Ok(x0)
}

fn initial_counts(net: &ReactionNetwork, flag: Option<Vec<u64>>, volume: f64) -> Result<Vec<u64>, CliError> {
    let n0 = match flag {
        Some(n) => n,
        None => net
            .initial_conc()
            .map(|c| c.iter().map(|x| (x * volume).round() as u64).collect())
            .ok_or_else(|| CliError::Usage("--n0 is required (the network file sets no concentrations)".into()))?,
    };
    if n0.len() != net.num_species() {
        return Err(CliError::Usage(format!(
            "expected {} copy numbers, got {}",
            net.num_species(),
            n0.len()
        )));
    }
    Ok(n0)
}

fn parse_box(text: &str, dim: usize) -> Result<Truncation, CliError> {
    let bad = || CliError::Usage(format!("--box expects lo:hi for each species, got `{text}`"));
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for part in text.split(',') {
        let (lo, hi) = part.split_once(':').ok_or_else(bad)?;
        lower.push(lo.trim().parse::<u64>().map_err(|_| bad())?);
        upper.push(hi.trim().parse::<u64>().map_err(|_| bad())?);
    }
    if lower.len() != dim {
        return Err(bad());
    }
    Truncation::new(lower, upper).map_err(|e| CliError::Usage(e.to_string()))
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("--grid expects lo:hi:n, got `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if !(hi > lo) || n < 2 {
        return Err(bad());
    }
    Ok(linspace(lo, hi, n))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// `0, dt, 2dt, …` up to and including `t_end`.
fn output_times(t_end: f64, dt: Option<f64>) -> Result<Vec<f64>, CliError> {
    if !(t_end >= 0.0) {
        return Err(CliError::Usage("--t-end must be nonnegative".into()));
    }
    let dt = dt.unwrap_or(t_end);
    if t_end == 0.0 {
        return Ok(vec![0.0]);
    }
    if !(dt > 0.0) {
        return Err(CliError::Usage("--dt-out must be positive".into()));
    }
    let steps = (t_end / dt * (1.0 + 1e-12)).floor() as usize;
    let mut ts: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    if t_end - ts[steps] > 1e-12 * t_end {
        ts.push(t_end);
    }
    Ok(ts)
}

/// Fixed point reached from `x0`: relax along the rate equations, then polish.
fn attractor(net: &ReactionNetwork, x0: &[f64]) -> Result<FixedPoint, CliError> {
    let traj = integrate_ode(net, &MacroState::new(x0.to_vec()), RELAX_TIME, &OdeOptions::default())?;
    Ok(fixed_point_from(net, &traj.last().x)?)
}

/// Closed-form potential for complex-balanced mass action, otherwise a
/// tabulated one-species potential.
fn potential(net: &ReactionNetwork, fp: &FixedPoint, grid: Vec<f64>) -> Result<QuasiPotential, CliError> {
    if net.is_mass_action() && complex_balance_check(net, &fp.q, 1e-8)?.balanced {
        return Ok(quasipotential_complex_balanced(net, &fp.q)?);
    }
    if net.num_species() == 1 {
        return Ok(quasipotential_1d(net, fp, &grid)?);
    }
    Err(Error::Unsupported(
        "no quasi-potential available: the network is neither complex balanced nor one-dimensional".into(),
    )
    .into())
}

fn default_grid(points: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let (lo, hi) = points
        .into_iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    linspace((0.5 * lo).max(1e-3), 1.5 * hi, DEFAULT_GRID_POINTS)
}

fn format_or(common: &Common, default: Format) -> Format {
    common.format.unwrap_or(default)
}

fn json_only(common: &Common) -> Result<(), CliError> {
    if common.format == Some(Format::Csv) {
        return Err(CliError::Usage("this subcommand only writes JSON".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct CheckReport {
    species: Vec<String>,
    conservation_laws: Vec<Vec<i64>>,
    cycle_basis: Vec<Vec<i64>>,
    wegscheider: WegscheiderVerdict,
    complex_balance: ComplexBalance,
}

#[derive(Serialize)]
#[serde(untagged)]
enum ComplexBalance {
    Report(ComplexBalanceReport),
    Unavailable { error: String },
}

pub fn check(args: CheckArgs) -> Result<(), CliError> {
    json_only(&args.common)?;
    let net = load(&args.common)?;
    let s = stoich_matrix(&net);
    let cycles = reaction_cycles(&s);
    let wegscheider = wegscheider_check(&net, &cycles, args.samples);
    let x0 = args
        .x0
        .or_else(|| net.initial_conc().map(<[f64]>::to_vec))
        .unwrap_or_else(|| vec![1.0; net.num_species()]);
    let complex_balance = match attractor(&net, &x0).and_then(|fp| Ok(complex_balance_check(&net, &fp.q, 1e-8)?)) {
        Ok(r) => ComplexBalance::Report(r),
        Err(e) => ComplexBalance::Unavailable { error: e.to_string() },
    };
    let report = CheckReport {
        species: net.species_names(),
        conservation_laws: conservation_laws(&s).basis,
        cycle_basis: cycles.basis,
        wegscheider,
        complex_balance,
    };
    finish(&args.common, json(&report)?)
}

pub fn ode(args: OdeArgs) -> Result<(), CliError> {
    let net = load(&args.common)?;
    let x0 = initial_conc(&net, args.x0)?;
    let opts = OdeOptions {
        rtol: args.rtol,
        atol: args.atol,
        dt_out: args.dt_out,
        ..OdeOptions::default()
    };
    let traj = integrate_ode(&net, &MacroState::new(x0), args.t_end, &opts)?;
    let text = match format_or(&args.common, Format::Csv) {
        Format::Json => json(&traj)?,
        Format::Csv => {
            let mut header = vec!["t".to_string()];
            header.extend(columns("x_", &net.species_names()));
            let mut table = Table::new(&header);
            for (t, s) in traj.times.iter().zip(&traj.states) {
                let mut row = vec![Cell::from(*t)];
                row.extend(s.x.iter().map(|&v| Cell::from(v)));
                table.push(row);
            }
            table.into_string()
        }
    };
    finish(&args.common, text)
}

pub fn ssa(args: SsaArgs) -> Result<(), CliError> {
    let net = load(&args.common)?;
    let volume = volume(&net, args.volume)?;
    let n0 = MesoState {
        n: initial_counts(&net, args.n0, volume)?,
        volume,
        t: 0.0,
    };
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let paths = ssa_ensemble(
        &net,
        scheme(args.scheme),
        &n0,
        args.t_end,
        args.seed,
        args.runs,
        crn_core::par::Exec::default(),
    )?;
    let grid = args.grid.map(|dt| output_times(args.t_end, Some(dt))).transpose()?;
    let text = match format_or(&args.common, Format::Csv) {
        Format::Json => json(&paths)?,
        Format::Csv => {
            let mut header = vec!["run".to_string(), "t".to_string()];
            header.extend(columns("n_", &net.species_names()));
            let mut table = Table::new(&header);
            for (run, path) in paths.iter().enumerate() {
                let states = match &grid {
                    Some(g) => path.resample(g),
                    None => path.states.clone(),
                };
                for s in states {
                    let mut row = vec![Cell::from(run), Cell::from(s.t)];
                    row.extend(s.n.iter().map(|&v| Cell::from(v)));
                    table.push(row);
                }
            }
            table.into_string()
        }
    };
    finish(&args.common, text)
}

fn warn_all(p: &LatticeDistribution) {
    for w in &p.warnings {
        eprintln!("warning: {w}");
    }
}

pub fn cme(args: CmeArgs) -> Result<(), CliError> {
    let net = load(&args.common)?;
    let volume = volume(&net, args.volume)?;
    let trunc = parse_box(&args.bounds, net.num_species())?;
    let q = build_generator(&net, scheme(args.scheme), &trunc, volume)?;
    let p = if args.steady {
        let ss = cme_steady_state(&q)?;
        match &args.n0 {
            Some(n0) => ss
                .class_containing(n0)
                .cloned()
                .ok_or_else(|| Error::Precondition(format!("state {n0:?} is transient or outside the box")))?,
            None => ss.unique()?.clone(),
        }
    } else {
        let n0 = args
            .n0
            .ok_or_else(|| CliError::Usage("--n0 is required with --t-end".into()))?;
        let p0 = LatticeDistribution::point_mass(&trunc, &n0)?;
        cme_evolve(&q, &p0, args.t_end.unwrap_or(0.0))?
    };
    warn_all(&p);
    let text = match format_or(&args.common, Format::Csv) {
        Format::Json => json(&p)?,
        Format::Csv => {
            let mut header = columns("n_", &net.species_names());
            header.push("p".into());
            let mut table = Table::new(&header);
            for (i, &pi) in p.p.iter().enumerate() {
                let mut row: Vec<Cell> = trunc.point(i).into_iter().map(Cell::from).collect();
                row.push(Cell::from(pi));
                table.push(row);
            }
            table.into_string()
        }
    };
    finish(&args.common, text)
}

#[derive(Serialize)]
struct MacroRow {
    t: f64,
    sigma_tot: f64,
    f_d: f64,
    q_hk: f64,
    phi: f64,
}

#[derive(Serialize)]
struct MesoRow {
    t: f64,
    e_p: f64,
    f_d: f64,
    q_hk: f64,
    #[serde(rename = "F_meso")]
    free_energy: f64,
}

pub fn thermo(args: ThermoArgs) -> Result<(), CliError> {
    let net = load(&args.common)?;
    let times = output_times(args.t_end, args.dt_out)?;
    let format = format_or(&args.common, Format::Csv);
    let text = if args.meso {
        let volume = volume(&net, args.volume)?;
        let bounds = args
            .bounds
            .as_deref()
            .ok_or_else(|| CliError::Usage("--meso requires --box".into()))?;
        let trunc = parse_box(bounds, net.num_species())?;
        let n0 = initial_counts(&net, args.n0, volume)?;
        let q = build_generator(&net, scheme(args.scheme), &trunc, volume)?;
        let pss = cme_steady_state(&q)?
            .class_containing(&n0)
            .cloned()
            .ok_or_else(|| Error::Precondition(format!("state {n0:?} is transient or outside the box")))?;
        let mut p = LatticeDistribution::point_mass(&trunc, &n0)?;
        let mut rows = Vec::with_capacity(times.len());
        for &t in &times {
            p = cme_evolve(&q, &p, t - p.t)?;
            let th = meso_functionals(&q, &p, &pss)?;
            rows.push(MesoRow {
                t,
                e_p: th.e_p,
                f_d: th.f_d,
                q_hk: th.q_hk,
                free_energy: th.free_energy,
            });
        }
        warn_all(&p);
        match format {
            Format::Json => json(&rows)?,
            Format::Csv => {
                let mut table = Table::new(&["t", "e_p", "f_d", "q_hk", "F_meso"]);
                for r in rows {
                    table.push(vec![
                        r.t.into(),
                        r.e_p.into(),
                        r.f_d.into(),
                        r.q_hk.into(),
                        r.free_energy.into(),
                    ]);
                }
                table.into_string()
            }
        }
    } else {
        let x0 = initial_conc(&net, args.x0)?;
        let fp = match &args.anchor {
            Some(a) => fixed_point_from(&net, a)?,
            None => attractor(&net, &x0)?,
        };
        let opts = OdeOptions {
            dt_out: args.dt_out.or((args.t_end > 0.0).then_some(args.t_end)),
            ..OdeOptions::default()
        };
        let traj = integrate_ode(&net, &MacroState::new(x0), args.t_end, &opts)?;
        let grid = match &args.grid {
            Some(g) => parse_grid(g)?,
            None => default_grid(traj.states.iter().map(|s| s.x[0]).chain([fp.q.x[0]])),
        };
        let qp = potential(&net, &fp, grid)?;
        if args.t_end > 0.0 {
            // The audit needs a central difference; report its worst balance defect.
            let worst = energy_balance_audit(&net, &qp, &traj)?
                .iter()
                .fold(0.0f64, |m, r| m.max(r.balance_residual));
            if worst > 0.0 {
                eprintln!("note: max |Δφ/Δt + f_d| on the output grid = {worst:.3e}");
            }
        }
        let mut rows = Vec::with_capacity(traj.len());
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let th = macro_functionals(&net, &qp, s)?;
            rows.push(MacroRow {
                t: *t,
                sigma_tot: th.sigma_tot,
                f_d: th.f_d,
                q_hk: th.q_hk,
                phi: th.phi,
            });
        }
        match format {
            Format::Json => json(&rows)?,
            Format::Csv => {
                let mut table = Table::new(&["t", "sigma_tot", "f_d", "q_hk", "phi"]);
                for r in rows {
                    table.push(vec![
                        r.t.into(),
                        r.sigma_tot.into(),
                        r.f_d.into(),
                        r.q_hk.into(),
                        r.phi.into(),
                    ]);
                }
                table.into_string()
            }
        }
    };
    finish(&args.common, text)
}

pub fn quasipotential(args: QuasiArgs) -> Result<(), CliError> {
    let net = load(&args.common)?;
    if net.num_species() != 1 {
        return Err(Error::Unsupported("tabulated quasi-potentials need exactly one species".into()).into());
    }
    let grid = parse_grid(&args.grid)?;
    let fp = fixed_point_from(&net, &[args.anchor])?;
    let qp = quasipotential_1d(&net, &fp, &grid)?;
    let QuasiPotential::Tabulated1D(tab) = &qp else {
        unreachable!("one-species potentials are tabulated")
    };
    for w in &tab.warnings {
        eprintln!("warning: {w}");
    }
    let text = match format_or(&args.common, Format::Csv) {
        Format::Json => json(&qp)?,
        Format::Csv => {
            let mut table = Table::new(&["x", "p", "phi", "hje_residual"]);
            for ((&x, &p), &phi) in tab.grid.iter().zip(&tab.p_values).zip(&tab.phi_values) {
                let r = hje_residual(&net, &qp, &MacroState::new(vec![x]))?;
                table.push(vec![x.into(), p.into(), phi.into(), r.into()]);
            }
            table.into_string()
        }
    };
    finish(&args.common, text)
}

#[derive(Serialize)]
struct FdtOutput {
    #[serde(flatten)]
    report: FdtReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulation: Option<SimulatedCovariance>,
}

pub fn fdt(args: FdtArgs) -> Result<(), CliError> {
    json_only(&args.common)?;
    let net = load(&args.common)?;
    if args.anchor.len() != net.num_species() {
        return Err(CliError::Usage(format!(
            "--anchor needs {} values, got {}",
            net.num_species(),
            args.anchor.len()
        )));
    }
    let fp = fixed_point_from(&net, &args.anchor)?;
    let grid = match &args.grid {
        Some(g) => parse_grid(g)?,
        None => default_grid([fp.q.x[0]]),
    };
    let qp = potential(&net, &fp, grid)?;
    let report = fdt_report(&net, &qp, &fp)?;
    let simulation = if args.simulate {
        let v = volume(&net, args.volume)?;
        Some(diffusion_simulate(
            &net,
            &fp.q,
            v,
            args.t_end,
            args.seed,
            &DiffusionOptions::default(),
        )?)
    } else {
        None
    };
    finish(&args.common, json(&FdtOutput { report, simulation })?)
}
