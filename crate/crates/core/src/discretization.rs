//! Zero-order-hold discretization and the sampled disturbance `d[k]`.
//!
//! For a period `T` the sampled plant is `x[k+1] = Φx[k] + Γu[k] + d[k]` with
//! `Φ = e^{AT}`, `Γ = ∫₀ᵀ e^{Aτ}dτ B` and
//! `d[k] = ∫₀ᵀ e^{Aτ} B f((k+1)T − τ) dτ`. The scaled matrices
//! `Ā = (Φ − I)/T`, `Ā̄ = (Φ − I − TA)/T²`, `B̄ = Γ/T`, `B̄̄ = (Γ − TB)/T²` stay
//! bounded as `T → 0`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::plant::{ContinuousPlant, DisturbanceSignal};
use crate::quadrature;

#[derive(Debug, Clone)]
pub struct DiscretePlant {
    pub period: f64,
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub a_bar: DMatrix<f64>,
    pub a_bbar: DMatrix<f64>,
    pub b_bar: DMatrix<f64>,
    pub b_bbar: DMatrix<f64>,
}

/// Exact ZOH discretization. `Φ` and `Γ` come from one exponential of the
/// block matrix `[[A, B], [0, 0]]·T`, whose top-right block is `Γ`.
pub fn discretize(plant: &ContinuousPlant, period: f64) -> Result<DiscretePlant> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::InvalidArgument(format!("sampling period must be positive, got {period}")));
    }
    let (n, m) = (plant.n(), plant.m());
    let mut block = DMatrix::zeros(n + m, n + m);
    linalg::put(&mut block, 0, 0, plant.a());
    linalg::put(&mut block, 0, n, plant.b());
    let e = linalg::expm(&(block * period));
    let phi = e.view((0, 0), (n, n)).into_owned();
    let gamma = e.view((0, n), (n, m)).into_owned();

    // Φ − I first, then subtract TA: the O(T²) remainder keeps its leading
    // digits rather than being formed from I + TA + … in one pass.
    let phi_minus_i = &phi - DMatrix::<f64>::identity(n, n);
    let a_bar = &phi_minus_i / period;
    let a_bbar = (&phi_minus_i - plant.a() * period) / (period * period);
    let b_bar = &gamma / period;
    let b_bbar = (&gamma - plant.b() * period) / (period * period);
    Ok(DiscretePlant { period, phi, gamma, a_bar, a_bbar, b_bar, b_bbar })
}

/// Evaluates `d[k]` for one plant and period, caching `e^{Aτ}B` at the
/// quadrature nodes of the full sampling interval.
#[derive(Debug, Clone)]
pub struct DisturbanceSampler {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    period: f64,
    abs_tol: f64,
    nodes: [f64; 15],
    kernels: Vec<DMatrix<f64>>,
}

impl DisturbanceSampler {
    /// Sampler with the default absolute tolerance `1e−12·(1 + ‖B‖)`.
    pub fn new(plant: &ContinuousPlant, period: f64) -> Result<Self> {
        let tol = 1e-12 * (1.0 + linalg::norm2(plant.b()));
        Self::with_tolerance(plant, period, tol)
    }

    pub fn with_tolerance(plant: &ContinuousPlant, period: f64, abs_tol: f64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::InvalidArgument(format!("sampling period must be positive, got {period}")));
        }
        let nodes = quadrature::gk15_nodes(0.0, period);
        let kernels = nodes.iter().map(|&tau| linalg::expm(&(plant.a() * tau)) * plant.b()).collect();
        Ok(Self { a: plant.a().clone(), b: plant.b().clone(), period, abs_tol, nodes, kernels })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    fn kernel(&self, tau: f64) -> DMatrix<f64> {
        match self.nodes.iter().position(|&x| x == tau) {
            Some(i) => self.kernels[i].clone(),
            None => linalg::expm(&(&self.a * tau)) * &self.b,
        }
    }

    /// `d[k]`, integrating piecewise between disturbance segment boundaries.
    pub fn sample(&self, sig: &DisturbanceSignal, k: usize) -> Result<DVector<f64>> {
        if sig.channels() != self.b.ncols() {
            return Err(Error::Dimension(format!(
                "disturbance has {} channels, plant has {} inputs",
                sig.channels(),
                self.b.ncols()
            )));
        }
        let t0 = k as f64 * self.period;
        let t1 = (k + 1) as f64 * self.period;
        if t1 > sig.horizon() || sig.segment_index(t0).is_none() {
            return Err(Error::OutOfRange { t: t1, horizon: sig.horizon() });
        }
        let mut cuts = vec![t0];
        cuts.extend(sig.breakpoints_in(t0, t1));
        cuts.push(t1);

        let mut total = DVector::zeros(self.b.nrows());
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let seg_idx =
                sig.segment_index(0.5 * (lo + hi)).ok_or(Error::OutOfRange { t: hi, horizon: sig.horizon() })?;
            let seg = &sig.segments()[seg_idx];
            if seg.is_zero() {
                continue;
            }
            // τ = t1 − t; the piece [lo, hi] in t maps to [t1 − hi, t1 − lo]
            let (tau_lo, tau_hi) = if cuts.len() == 2 { (0.0, self.period) } else { (t1 - hi, t1 - lo) };
            let share = self.abs_tol * (tau_hi - tau_lo) / self.period;
            let r = quadrature::integrate(|tau| self.kernel(tau) * seg.value(t1 - tau), tau_lo, tau_hi, share, 30);
            total += r.value;
        }
        Ok(total)
    }
}

/// `d[k]` for a single step; builds a fresh [`DisturbanceSampler`].
pub fn sampled_disturbance(
    plant: &ContinuousPlant,
    period: f64,
    sig: &DisturbanceSignal,
    k: usize,
) -> Result<DVector<f64>> {
    DisturbanceSampler::new(plant, period)?.sample(sig, k)
}

/// Split of `d[k]` into the matched part `Γf[k]` and the sampling-induced
/// residual `d′[k] = d[k] − Γf[k]`.
#[derive(Debug, Clone)]
pub struct MatchedSplit {
    pub matched: DVector<f64>,
    pub residual: DVector<f64>,
    /// `T·‖Γ‖·V` with `V` the bound on ‖f′‖ over the segment; `None` when the
    /// sampling interval straddles a segment boundary.
    pub residual_bound: Option<f64>,
}

pub fn matched_split(
    disc: &DiscretePlant,
    sampler: &DisturbanceSampler,
    sig: &DisturbanceSignal,
    k: usize,
) -> Result<MatchedSplit> {
    let t0 = k as f64 * disc.period;
    let t1 = t0 + disc.period;
    let d = sampler.sample(sig, k)?;
    let matched = &disc.gamma * sig.evaluate(t0)?;
    let residual = d - &matched;
    let residual_bound = if sig.is_smooth_on(t0, t1) {
        let seg = &sig.segments()[sig.segment_index(t0).expect("t0 checked above")];
        Some(disc.period * linalg::norm2(&disc.gamma) * seg.derivative_bound())
    } else {
        None
    };
    Ok(MatchedSplit { matched, residual, residual_bound })
}

/// [`matched_split`] for one step without reusing a sampler.
pub fn matched_decomposition(
    plant: &ContinuousPlant,
    period: f64,
    sig: &DisturbanceSignal,
    k: usize,
) -> Result<MatchedSplit> {
    let disc = discretize(plant, period)?;
    let sampler = DisturbanceSampler::new(plant, period)?;
    matched_split(&disc, &sampler, sig, k)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiffReport {
    pub period: f64,
    pub k_start: usize,
    pub k_end: usize,
    /// max ‖d[k] − d[k−1]‖ over the range
    pub max_first_difference: f64,
    /// max ‖d[k] − 2d[k−1] + d[k−2]‖ over the range
    pub max_second_difference: f64,
    pub first_difference_order: u32,
    pub second_difference_order: u32,
    /// The range crosses a disturbance segment boundary, so the orders above
    /// are not guaranteed.
    pub spans_boundary: bool,
}

/// First and second differences of `d[k]` for `k` in `k_range` (at least three
/// steps). Orders are O(T²) and O(T³) on a smooth segment.
pub fn difference_diagnostics(
    plant: &ContinuousPlant,
    period: f64,
    sig: &DisturbanceSignal,
    k_range: Range<usize>,
) -> Result<DiffReport> {
    let sampler = DisturbanceSampler::new(plant, period)?;
    difference_diagnostics_with(&sampler, sig, k_range)
}

pub fn difference_diagnostics_with(
    sampler: &DisturbanceSampler,
    sig: &DisturbanceSignal,
    k_range: Range<usize>,
) -> Result<DiffReport> {
    if k_range.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 steps, got {:?}", k_range)));
    }
    let period = sampler.period();
    let ds = k_range.clone().map(|k| sampler.sample(sig, k)).collect::<Result<Vec<_>>>()?;
    let max_first = ds.windows(2).map(|w| (&w[1] - &w[0]).norm()).fold(0.0, f64::max);
    let max_second = ds.windows(3).map(|w| (&w[2] - &w[1] * 2.0 + &w[0]).norm()).fold(0.0, f64::max);
    let spans_boundary = !sig.is_smooth_on(k_range.start as f64 * period, k_range.end as f64 * period);
    Ok(DiffReport {
        period,
        k_start: k_range.start,
        k_end: k_range.end,
        max_first_difference: max_first,
        max_second_difference: max_second,
        first_difference_order: 2,
        second_difference_order: 3,
        spans_boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark;
    use crate::plant::{ChannelForm, Segment};

    fn double_integrator() -> ContinuousPlant {
        ContinuousPlant::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn zero_a_is_pure_integration() {
        let plant = ContinuousPlant::new(
            DMatrix::zeros(3, 3),
            DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            DMatrix::identity(1, 3),
        )
        .unwrap();
        let d = discretize(&plant, 0.5).unwrap();
        assert_eq!(d.phi, DMatrix::identity(3, 3));
        assert!((&d.gamma - plant.b() * 0.5).norm() < 1e-15);
        assert!(d.a_bar.norm() < 1e-15);
        assert!(d.b_bbar.norm() < 1e-14);
    }

    #[test]
    fn double_integrator_closed_form() {
        let d = discretize(&double_integrator(), 1.0).unwrap();
        let phi = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let gamma = DMatrix::from_column_slice(2, 1, &[0.5, 1.0]);
        assert!((d.phi - phi).norm() < 1e-14);
        assert!((d.gamma - gamma).norm() < 1e-14);
    }

    #[test]
    fn non_positive_period_rejected() {
        assert!(matches!(discretize(&double_integrator(), 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(discretize(&double_integrator(), -1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn aircraft_phi_within_series_remainder() {
        let plant = benchmark::aircraft_plant();
        let t = 0.01;
        let d = discretize(&plant, t).unwrap();
        let na = linalg::norm2(plant.a());
        let bound = 0.5 * t * t * na * na * (t * na).exp();
        let first_order = DMatrix::<f64>::identity(4, 4) + plant.a() * t;
        assert!(linalg::norm2(&(&d.phi - first_order)) <= bound);
    }

    #[test]
    fn zero_disturbance_gives_zero() {
        let plant = benchmark::aircraft_plant();
        let s = DisturbanceSampler::new(&plant, 0.01).unwrap();
        let d = s.sample(&DisturbanceSignal::zero(2), 17).unwrap();
        assert_eq!(d, DVector::zeros(4));
    }

    #[test]
    fn constant_disturbance_is_matched() {
        let plant = benchmark::aircraft_plant();
        let disc = discretize(&plant, 0.01).unwrap();
        let c = [2.0, -0.5];
        let d = sampled_disturbance(&plant, 0.01, &DisturbanceSignal::constant(&c), 3).unwrap();
        let expect = &disc.gamma * DVector::from_row_slice(&c);
        assert!((d - expect).norm() < 1e-12);
    }

    #[test]
    fn ramp_residual_with_zero_a() {
        // A = 0: d′[k] = ∫₀ᵀ B (T − τ) dτ · slope = (T²/2)·B·1
        let plant = ContinuousPlant::new(
            DMatrix::zeros(3, 3),
            DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -2.0, 1.0, 0.0, 3.0]),
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        )
        .unwrap();
        let ramp = ChannelForm::Ramp { offset: 0.0, slope: 1.0 };
        let sig = DisturbanceSignal::new(2, vec![Segment::new(0.0, f64::INFINITY, vec![ramp, ramp])]).unwrap();
        let t = 0.1;
        let split = matched_decomposition(&plant, t, &sig, 4).unwrap();
        let expect = plant.b() * DVector::from_element(2, 0.5 * t * t);
        assert!((&split.residual - expect).norm() < 1e-14);
        assert!(split.residual.norm() <= split.residual_bound.unwrap());
    }

    #[test]
    fn constant_residual_vanishes() {
        let plant = benchmark::aircraft_plant();
        let split = matched_decomposition(&plant, 0.01, &benchmark::aircraft_disturbance(), 1200).unwrap();
        assert!(split.residual.norm() < 1e-13);
        assert_eq!(split.residual_bound, Some(0.0));
    }

    #[test]
    fn boundary_interval_is_split() {
        // the step containing 5π straddles two closed forms
        let plant = benchmark::aircraft_plant();
        let sig = benchmark::aircraft_disturbance();
        let t = 0.01;
        let k = (benchmark::SINUSOID_ONSET / t).floor() as usize;
        let split = matched_decomposition(&plant, t, &sig, k).unwrap();
        assert!(split.residual_bound.is_none());
        let diag = difference_diagnostics(&plant, t, &sig, k - 1..k + 3).unwrap();
        assert!(diag.spans_boundary);
    }

    #[test]
    fn difference_diagnostics_needs_three_steps() {
        let plant = benchmark::aircraft_plant();
        let r = difference_diagnostics(&plant, 0.01, &DisturbanceSignal::zero(2), 5..7);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn constant_differences_vanish() {
        let plant = benchmark::aircraft_plant();
        let r = difference_diagnostics(&plant, 0.01, &DisturbanceSignal::constant(&[1.0, 2.0]), 0..10).unwrap();
        assert!(r.max_first_difference < 1e-15);
        assert!(r.max_second_difference < 1e-15);
        assert!(!r.spans_boundary);
    }

    #[test]
    fn out_of_range_step() {
        let plant = benchmark::aircraft_plant();
        let seg = Segment::new(0.0, 1.0, vec![ChannelForm::Constant(1.0); 2]);
        let sig = DisturbanceSignal::new(2, vec![seg]).unwrap();
        assert!(matches!(sampled_disturbance(&plant, 0.3, &sig, 3), Err(Error::OutOfRange { .. })));
    }
}
