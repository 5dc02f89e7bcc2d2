use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use crn_core::fdt::{diffusion_simulate, DiffusionOptions};
use crn_core::par::Exec;
use crn_core::stochkin::{
    build_generator_with_cap, cme_evolve, cme_steady_state, ssa_ensemble, LatticeDistribution, PropensityScheme,
    Truncation, DEFAULT_STATE_CAP,
};
use crn_core::thermo::meso_functionals_with;
use crn_core::{parse_network, MacroState, MesoState, ReactionNetwork};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn fixture(name: &str) -> ReactionNetwork {
    let path = format!("{}/tests/fixtures/{name}.crn", env!("CARGO_MANIFEST_DIR"));
    parse_network(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn ssa(c: &mut Criterion) {
    let net = fixture("schlogl");
    let n0 = MesoState {
        n: vec![100],
        volume: 100.0,
        t: 0.0,
    };
    let mut group = c.benchmark_group("ssa_ensemble");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "schlogl_v100_64runs"), |b| {
            b.iter(|| ssa_ensemble(&net, PropensityScheme::Scaled, black_box(&n0), 5.0, 1, 64, exec).unwrap())
        });
    }
    group.finish();
}

fn generator(c: &mut Criterion) {
    let net = fixture("triangle");
    let trunc = Truncation::from_upper(vec![40, 40, 40]).unwrap();
    let mut group = c.benchmark_group("generator");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("build", name), |b| {
            b.iter(|| {
                build_generator_with_cap(&net, PropensityScheme::Scaled, &trunc, 10.0, DEFAULT_STATE_CAP, exec).unwrap()
            })
        });
    }
    let q = build_generator_with_cap(
        &net,
        PropensityScheme::Scaled,
        &trunc,
        10.0,
        DEFAULT_STATE_CAP,
        Exec::Parallel,
    )
    .unwrap();
    let p: Vec<f64> = (0..q.num_states()).map(|i| 1.0 / (1 + i % 97) as f64).collect();
    let mut out = vec![0.0; q.num_states()];
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("apply_transpose", name), |b| {
            b.iter(|| q.apply_transpose(black_box(&p), &mut out, exec))
        });
    }
    group.finish();
}

fn thermodynamics(c: &mut Criterion) {
    let net = fixture("bd");
    let trunc = Truncation::from_upper(vec![800]).unwrap();
    let q = build_generator_with_cap(
        &net,
        PropensityScheme::Scaled,
        &trunc,
        200.0,
        DEFAULT_STATE_CAP,
        Exec::Parallel,
    )
    .unwrap();
    let pss = cme_steady_state(&q).unwrap().unique().unwrap().clone();
    let p = cme_evolve(&q, &LatticeDistribution::point_mass(&trunc, &[600]).unwrap(), 1.0).unwrap();
    let mut group = c.benchmark_group("meso_functionals");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("bd_v200", name), |b| {
            b.iter(|| meso_functionals_with(&q, black_box(&p), &pss, exec).unwrap())
        });
    }
    group.finish();
}

fn diffusion(c: &mut Criterion) {
    let net = fixture("schlogl");
    let q = MacroState::new(vec![1.0]);
    let mut group = c.benchmark_group("diffusion_simulate");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = DiffusionOptions {
            exec,
            ..DiffusionOptions::default()
        };
        group.bench_function(BenchmarkId::new("schlogl_16replicas", name), |b| {
            b.iter(|| diffusion_simulate(&net, &q, 500.0, 5.0, 3, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, ssa, generator, thermodynamics, diffusion);
criterion_main!(benches);
