use nalgebra::DVector;

use qsmc_core::analysis;
use qsmc_core::benchmark;
use qsmc_core::controllers::ControllerKind;
use qsmc_core::experiments::{self, Metric, SweepSpec};
use qsmc_core::plant::{DisturbanceSignal, NoiseSpec};
use qsmc_core::simulator::{self, measure_quasi_sliding, Scenario};

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn second_order_laws_ride_closer_to_the_surface() {
    let rep = experiments::aircraft_benchmark(None).unwrap();
    let s = |k| rep.row(k).unwrap().s_bound;
    assert!(s(ControllerKind::M2) < s(ControllerKind::M1));
    assert!(s(ControllerKind::Mm2) < s(ControllerKind::Mm1));
}

#[test]
fn noise_keeps_proposed_laws_below_deadbeat_ones() {
    let rep = experiments::aircraft_benchmark(Some(NoiseSpec::uniform(benchmark::NOISE_HALF_WIDTH, 3))).unwrap();
    let u = |k| rep.row(k).unwrap().u_peak;
    assert!(u(ControllerKind::Mm1) < u(ControllerKind::M1));
    assert!(u(ControllerKind::Mm2) < u(ControllerKind::M2));
}

#[test]
fn deadbeat_peak_doubles_when_period_halves() {
    let peak = |t| simulator::run(&Scenario::aircraft(ControllerKind::M1).with_period_fixed_beta(t)).unwrap().u_peak();
    let ratio = peak(0.005) / peak(0.01);
    assert!((1.6..=2.4).contains(&ratio), "{ratio}");
}

#[test]
fn proposed_peak_is_period_independent() {
    let spec = SweepSpec::new(Scenario::aircraft(ControllerKind::Mm1), Metric::UPeak);
    let points = experiments::sweep_points(&spec).unwrap();
    let peaks: Vec<f64> = points.iter().map(|p| p.u_peak.unwrap()).collect();
    let hi = peaks.iter().copied().fold(0.0, f64::max);
    let lo = peaks.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(hi / lo <= 2.0, "{peaks:?}");
}

#[test]
fn undisturbed_origin_stays_put() {
    for kind in ControllerKind::ONLINE {
        let mut sc = Scenario::aircraft(kind);
        sc.disturbance = DisturbanceSignal::zero(2);
        sc.x0 = DVector::zeros(4);
        let tr = simulator::run(&sc).unwrap();
        let b = measure_quasi_sliding(&tr, benchmark::constant_steady_window()).unwrap();
        assert!(b.s_bound <= 1e-8 && b.x_bound <= 1e-8, "{kind}: {b:?}");
    }
}

#[test]
fn initial_sliding_variable_is_hc_x0() {
    let sc = Scenario::aircraft(ControllerKind::Mm2);
    let prep = simulator::prepare(&sc).unwrap();
    let tr = simulator::run_prepared(&sc, &prep).unwrap();
    let expected = &prep.design.hc * &sc.x0;
    assert!((&tr.records[0].s_true - &expected).amax() < 1e-14);
    assert!((&tr.records[0].s - &expected).amax() < 1e-14);
}

#[test]
fn stability_margin_shrinks_linearly_with_period() {
    let periods = [0.04, 0.02, 0.01, 0.005];
    let rep = analysis::stability_over_periods(&benchmark::aircraft_plant(), &benchmark::aircraft_h(), 3.0, &periods)
        .unwrap();
    assert!(rep.all_stable());
    let xs: Vec<f64> = rep.entries.iter().map(|e| e.period.ln()).collect();
    for margin in [
        rep.entries.iter().map(|e| (1.0 - e.rho_first_order).ln()).collect::<Vec<_>>(),
        rep.entries.iter().map(|e| (1.0 - e.rho_second_order).ln()).collect(),
    ] {
        let slope = ols_slope(&xs, &margin);
        assert!((slope - 1.0).abs() <= 0.1, "{slope}");
    }
}

#[test]
fn coupled_eigenvalues_approach_block_eigenvalues() {
    let periods = [0.04, 0.02, 0.01, 0.005];
    let rep = analysis::stability_over_periods(&benchmark::aircraft_plant(), &benchmark::aircraft_h(), 3.0, &periods)
        .unwrap();
    let xs: Vec<f64> = rep.entries.iter().map(|e| e.period.ln()).collect();
    let ys: Vec<f64> = rep.entries.iter().map(|e| e.cluster_distance_first_order.ln()).collect();
    let slope = ols_slope(&xs, &ys);
    assert!(
        slope >= 1.7,
        "cluster distance order {slope}, distances {:?}",
        rep.entries.iter().map(|e| e.cluster_distance_first_order).collect::<Vec<_>>()
    );
}

#[test]
fn sweep_rejects_short_ladders() {
    let mut spec = SweepSpec::new(Scenario::aircraft(ControllerKind::Mm1), Metric::SBound);
    spec.ladder = vec![0.02, 0.01];
    assert!(experiments::run_sweep(&spec).is_err());
}
