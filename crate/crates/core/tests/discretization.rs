use nalgebra::{DMatrix, DVector};

use qsmc_core::benchmark;
use qsmc_core::discretization::{
    difference_diagnostics, discretize, matched_decomposition, sampled_disturbance, DisturbanceSampler,
};
use qsmc_core::linalg;
use qsmc_core::plant::{ChannelForm, ContinuousPlant, DisturbanceSignal, Segment};
use qsmc_core::surface::{build_surface, certify_surface_over_periods};

/// Composite Simpson on `∫₀ᵀ e^{Aτ}B f((k+1)T − τ) dτ`, with the matrix
/// exponential taken from a truncated Taylor series.
fn simpson_reference(
    plant: &ContinuousPlant,
    t: f64,
    sig: &DisturbanceSignal,
    k: usize,
    panels: usize,
) -> DVector<f64> {
    let taylor = |tau: f64| {
        let a = plant.a() * tau;
        let mut term = DMatrix::<f64>::identity(a.nrows(), a.ncols());
        let mut sum = term.clone();
        for j in 1..30 {
            term = &term * &a / j as f64;
            sum += &term;
        }
        sum
    };
    let h = t / panels as f64;
    let end = (k + 1) as f64 * t;
    let integrand = |tau: f64| taylor(tau) * plant.b() * sig.evaluate(end - tau).unwrap();
    let mut acc = integrand(0.0) + integrand(t);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += integrand(i as f64 * h) * w;
    }
    acc * (h / 3.0)
}

#[test]
fn sampled_disturbance_matches_simpson_on_sinusoid() {
    let plant = benchmark::aircraft_plant();
    let sig = benchmark::aircraft_disturbance();
    let t = 0.01;
    let k = 1600;
    let d = sampled_disturbance(&plant, t, &sig, k).unwrap();
    let reference = simpson_reference(&plant, t, &sig, k, 10_000);
    assert!((d - reference).amax() <= 1e-10);
}

#[test]
fn sinusoid_residual_is_second_order() {
    let plant = benchmark::aircraft_plant();
    let sig = benchmark::aircraft_disturbance();
    let scaled: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&t: &f64| {
            let k0 = ((benchmark::SINUSOID_ONSET + 0.5) / t).ceil() as usize;
            let k1 = ((benchmark::SINUSOID_ONSET + 8.0) / t) as usize;
            let worst = (k0..k1)
                .map(|k| matched_decomposition(&plant, t, &sig, k).unwrap().residual.norm())
                .fold(0.0, f64::max);
            worst / (t * t)
        })
        .collect();
    let hi = scaled.iter().copied().fold(0.0, f64::max);
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(hi / lo <= 1.5, "{scaled:?}");
}

#[test]
fn sinusoid_differences_shrink_at_their_orders() {
    let plant = benchmark::aircraft_plant();
    let sig = benchmark::aircraft_disturbance();
    let window = |t: f64| {
        let k0 = ((benchmark::SINUSOID_ONSET + 0.5) / t).ceil() as usize;
        let k1 = ((benchmark::SINUSOID_ONSET + 12.0) / t) as usize;
        difference_diagnostics(&plant, t, &sig, k0..k1).unwrap()
    };
    let (a, b) = (window(0.02), window(0.01));
    assert!(!a.spans_boundary && !b.spans_boundary);
    let first = a.max_first_difference / b.max_first_difference;
    let second = a.max_second_difference / b.max_second_difference;
    assert!((3.4..=4.6).contains(&first), "first-difference shrink {first}");
    assert!((6.4..=9.6).contains(&second), "second-difference shrink {second}");
}

#[test]
fn ramp_second_difference_vanishes() {
    let plant = benchmark::aircraft_plant();
    let ramp = DisturbanceSignal::new(
        2,
        vec![Segment::new(
            0.0,
            f64::INFINITY,
            vec![ChannelForm::Ramp { offset: 0.5, slope: 1.0 }, ChannelForm::Ramp { offset: -1.0, slope: 0.3 }],
        )],
    )
    .unwrap();
    let t = 0.01;
    let gamma = discretize(&plant, t).unwrap().gamma;
    let rep = difference_diagnostics(&plant, t, &ramp, 10..400).unwrap();
    assert!(rep.max_second_difference <= 1e-10 * linalg::norm2(&gamma), "{}", rep.max_second_difference);
    assert!(rep.max_first_difference > 0.0);
}

#[test]
fn matched_and_unmatched_parts_scale_with_period() {
    // ‖M·d[k]‖ is O(T²) and ‖HC·d[k]‖ is O(T) on a smooth segment
    let plant = benchmark::aircraft_plant();
    let sig = benchmark::aircraft_disturbance();
    let h = benchmark::aircraft_h();
    let maxima = |t: f64| {
        let disc = discretize(&plant, t).unwrap();
        let design = build_surface(&plant, &disc, &h).unwrap();
        let sampler = DisturbanceSampler::new(&plant, t).unwrap();
        let k0 = ((benchmark::SINUSOID_ONSET + 0.5) / t).ceil() as usize;
        let k1 = ((benchmark::SINUSOID_ONSET + 4.0) / t) as usize;
        let mut m11: f64 = 0.0;
        let mut m12: f64 = 0.0;
        for k in k0..k1 {
            let d = sampler.sample(&sig, k).unwrap();
            m11 = m11.max((&design.m * &d).norm());
            m12 = m12.max((&design.hc * &d).norm());
        }
        (m11, m12)
    };
    let (a, b) = (maxima(0.02), maxima(0.01));
    let (r11, r12) = (a.0 / b.0, a.1 / b.1);
    assert!((3.2..=4.8).contains(&r11), "unmatched shrink {r11}");
    assert!((1.6..=2.4).contains(&r12), "matched shrink {r12}");
}

/// Bisection on a scalar function with a sign change on `[lo, hi]`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) * f(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn period_with_singular_sampled_gain_is_flagged() {
    // harmonic oscillator measured in velocity: HCB = 1 but
    // HC·Γ(T)/T = sin(T)/T vanishes at T = π
    let plant = ContinuousPlant::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
        DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
    )
    .unwrap();
    let h = DMatrix::from_element(1, 1, 1.0);
    let t_star = bisect(|t| t.sin() / t, 3.0, 3.3);
    assert!((t_star - std::f64::consts::PI).abs() < 1e-12);
    let rep = certify_surface_over_periods(&plant, &h, &[t_star, 1.0, 0.1]).unwrap();
    assert!(rep.hcb_invertible);
    let flagged: Vec<f64> = rep.entries.iter().filter(|e| !e.certified).map(|e| e.period).collect();
    assert_eq!(flagged, vec![t_star]);
    assert_eq!(rep.largest_certified_period, Some(1.0));
}
