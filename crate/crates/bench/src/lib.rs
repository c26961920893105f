//! Criterion suites for the hot paths: discretization, closed-loop
//! simulation, spectral analysis and period sweeps.

use std::hint::black_box;

use criterion::{BenchmarkId, Criterion};

use qsmc_core::analysis::{self, build_aug, AugVariant};
use qsmc_core::benchmark;
use qsmc_core::controllers::{ControllerKind, GainSet};
use qsmc_core::discretization::{discretize, DisturbanceSampler};
use qsmc_core::experiments::{self, Metric, SweepSpec};
use qsmc_core::simulator::{self, Scenario};
use qsmc_core::surface::build_surface;

pub fn discretization(c: &mut Criterion) {
    let plant = benchmark::aircraft_plant();
    let sig = benchmark::aircraft_disturbance();
    c.bench_function("discretize/aircraft", |b| b.iter(|| discretize(black_box(&plant), black_box(0.01)).unwrap()));

    let sampler = DisturbanceSampler::new(&plant, 0.01).unwrap();
    // one step on the sinusoidal segment, where the quadrature has real work
    let k = (benchmark::SINUSOID_ONSET / 0.01) as usize + 100;
    c.bench_function("disturbance_sample/sinusoid", |b| b.iter(|| sampler.sample(&sig, black_box(k)).unwrap()));
}

pub fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_20s");
    group.sample_size(20);
    for kind in ControllerKind::ONLINE {
        let sc = Scenario::aircraft(kind);
        let prep = simulator::prepare(&sc).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(kind), &sc, |b, sc| {
            b.iter(|| simulator::run_prepared(sc, &prep).unwrap())
        });
    }
    group.finish();
}

pub fn spectra(c: &mut Criterion) {
    let plant = benchmark::aircraft_plant();
    let h = benchmark::aircraft_h();
    let disc = discretize(&plant, 0.01).unwrap();
    let design = build_surface(&plant, &disc, &h).unwrap();
    let gains = GainSet::new(&design, benchmark::ALPHA).unwrap();
    for variant in [AugVariant::FirstOrder, AugVariant::SecondOrder] {
        let aug = build_aug(&design, &gains, variant).unwrap();
        c.bench_function(&format!("spectral_radius/{variant:?}"), |b| b.iter(|| black_box(&aug).spectral_radius()));
        c.bench_function(&format!("error_spectrum/{variant:?}"), |b| {
            b.iter(|| analysis::verify_error_spectrum(black_box(&design.omega2), benchmark::ALPHA, 0.01, variant))
        });
    }
}

pub fn sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    let spec = SweepSpec::new(Scenario::aircraft(ControllerKind::Mm1), Metric::SBound);
    group.bench_function("mm1_default_ladder", |b| b.iter(|| experiments::run_sweep(black_box(&spec)).unwrap()));
    group.finish();
}
