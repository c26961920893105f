//! Sampling-period sweeps and the aircraft benchmark table.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::analysis::{build_aug, AugVariant};
use crate::benchmark;
use crate::controllers::ControllerKind;
use crate::error::{Error, Result};
use crate::plant::NoiseSpec;
use crate::simulator::{self, measure_quasi_sliding, Scenario, Trajectory};

pub const DEFAULT_LADDER: [f64; 4] = [0.02, 0.01, 0.005, 0.0025];

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "QSMC_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SBound,
    XBound,
    UPeak,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::SBound, Metric::XBound, Metric::UPeak];

    pub fn name(self) -> &'static str {
        match self {
            Metric::SBound => "s_bound",
            Metric::XBound => "x_bound",
            Metric::UPeak => "u_peak",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s_bound" => Ok(Metric::SBound),
            "x_bound" => Ok(Metric::XBound),
            "u_peak" => Ok(Metric::UPeak),
            other => Err(Error::Config(format!("unknown metric `{other}` (expected s_bound, x_bound, u_peak)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Scenario at its own period; `β = (1 − α)/T` is taken from it and held
    /// fixed.
    pub base: Scenario,
    pub ladder: Vec<f64>,
    pub metric: Metric,
    /// Steady-state window for the bound metrics.
    pub window: (f64, f64),
}

impl SweepSpec {
    pub fn new(base: Scenario, metric: Metric) -> Self {
        Self { base, ladder: DEFAULT_LADDER.to_vec(), metric, window: benchmark::constant_steady_window() }
    }

    pub fn beta(&self) -> f64 {
        (1.0 - self.base.alpha) / self.base.period
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.len() < 3 {
            return Err(Error::Config(format!("a sweep needs at least 3 periods, got {}", self.ladder.len())));
        }
        if self.ladder.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Config("sweep periods must be positive".into()));
        }
        let mut sorted = self.ladder.clone();
        sorted.sort_by(f64::total_cmp);
        let ratio = sorted[1] / sorted[0];
        if sorted.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-6) || ratio <= 1.0 {
            return Err(Error::Config("sweep periods must form a geometric ladder of distinct values".into()));
        }
        Ok(())
    }
}

/// All three metrics measured at one period.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub period: f64,
    pub alpha: f64,
    pub s_bound: Option<f64>,
    pub x_bound: Option<f64>,
    pub u_peak: Option<f64>,
    /// Surface certified and the matching augmented system has `ρ < 1`.
    pub certified: bool,
    pub spectral_radius: Option<f64>,
    /// Why a point was excluded, if it was.
    pub note: Option<String>,
}

impl SweepPoint {
    pub fn value(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::SBound => self.s_bound,
            Metric::XBound => self.x_bound,
            Metric::UPeak => self.u_peak,
        }
    }
}

/// Half-width of the acceptance band around an expected slope.
pub const SLOPE_BAND: f64 = 0.3;

/// Order in `T` predicted for `metric` under `kind`; `None` for the
/// oracle-driven equivalent control, which has no predicted order.
pub fn expected_slope(kind: ControllerKind, metric: Metric) -> Option<f64> {
    use ControllerKind::*;
    match (kind, metric) {
        (Eq, _) => None,
        (Mm1, Metric::SBound) => Some(1.0),
        (Mm2 | M1, Metric::SBound) => Some(2.0),
        (M2, Metric::SBound) => Some(3.0),
        (_, Metric::XBound) => Some(1.0),
        (Mm1 | Mm2, Metric::UPeak) => Some(0.0),
        (M1 | M2, Metric::UPeak) => Some(-1.0),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub controller: ControllerKind,
    pub metric: Metric,
    pub beta: f64,
    pub window: (f64, f64),
    pub points: Vec<SweepPoint>,
    /// Least-squares slope of `log(metric)` against `log(T)`.
    pub slope: Option<f64>,
    /// 95% confidence half-width of the slope; needs at least 3 points.
    pub half_width: Option<f64>,
    pub fitted_points: usize,
}

impl ScalingReport {
    pub fn slope_within(&self, lo: f64, hi: f64) -> bool {
        self.slope.is_some_and(|s| s >= lo && s <= hi)
    }

    /// Whether the fitted slope lies within [`SLOPE_BAND`] of the expected
    /// one; `None` when no order is predicted.
    pub fn matches_expected(&self) -> Option<bool> {
        expected_slope(self.controller, self.metric).map(|e| self.slope_within(e - SLOPE_BAND, e + SLOPE_BAND))
    }
}

/// Runs the sweep and fits the requested metric.
pub fn run_sweep(spec: &SweepSpec) -> Result<ScalingReport> {
    let points = sweep_points(spec)?;
    Ok(scaling_report(spec, spec.metric, points))
}

/// Runs the sweep once and fits every metric.
pub fn run_sweep_all(spec: &SweepSpec) -> Result<Vec<ScalingReport>> {
    let points = sweep_points(spec)?;
    Ok(Metric::ALL.iter().map(|&m| scaling_report(spec, m, points.clone())).collect())
}

pub fn scaling_report(spec: &SweepSpec, metric: Metric, points: Vec<SweepPoint>) -> ScalingReport {
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.certified)
        .filter_map(|p| p.value(metric).filter(|v| *v > 0.0).map(|v| (p.period.ln(), v.ln())))
        .collect();
    let fit = log_log_fit(&data);
    ScalingReport {
        controller: spec.base.controller,
        metric,
        beta: spec.beta(),
        window: spec.window,
        points,
        slope: fit.map(|f| f.0),
        half_width: fit.and_then(|f| f.1),
        fitted_points: data.len(),
    }
}

/// Least-squares slope and its 95% half-width.
fn log_log_fit(data: &[(f64, f64)]) -> Option<(f64, Option<f64>)> {
    let n = data.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = data.iter().map(|d| d.0).sum::<f64>() / nf;
    let my = data.iter().map(|d| d.1).sum::<f64>() / nf;
    let sxx: f64 = data.iter().map(|d| (d.0 - mx).powi(2)).sum();
    let sxy: f64 = data.iter().map(|d| (d.0 - mx) * (d.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    if n < 3 {
        return Some((slope, None));
    }
    let intercept = my - slope * mx;
    let rss: f64 = data.iter().map(|d| (d.1 - intercept - slope * d.0).powi(2)).sum();
    let se = (rss / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0).ok()?.inverse_cdf(0.975);
    Some((slope, Some(t * se)))
}

fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Measures every metric at every ladder period, concurrently. Points come
/// back sorted by `T`.
pub fn sweep_points(spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    spec.validate()?;
    let mut points = with_pool(|| spec.ladder.par_iter().map(|&t| sweep_point(spec, t)).collect::<Result<Vec<_>>>())?;
    points.sort_by(|a, b| a.period.total_cmp(&b.period));
    Ok(points)
}

fn sweep_point(spec: &SweepSpec, period: f64) -> Result<SweepPoint> {
    let sc = spec.base.clone().with_period_fixed_beta(period);
    let mut point = SweepPoint {
        period,
        alpha: sc.alpha,
        s_bound: None,
        x_bound: None,
        u_peak: None,
        certified: false,
        spectral_radius: None,
        note: None,
    };
    let prep = match simulator::prepare(&sc) {
        Ok(p) => p,
        Err(e @ (Error::AssumptionViolation(_) | Error::Config(_))) => {
            point.note = Some(e.to_string());
            return Ok(point);
        }
        Err(e) => return Err(e),
    };
    if let Some(variant) = AugVariant::for_controller(sc.controller) {
        let rho = build_aug(&prep.design, &prep.gains, variant)?.spectral_radius();
        point.spectral_radius = Some(rho);
        point.certified = rho < 1.0;
        if !point.certified {
            point.note = Some(format!("augmented spectral radius {rho:.6} ≥ 1"));
        }
    } else {
        point.certified = true;
    }
    match simulator::run_prepared(&sc, &prep) {
        Ok(traj) => {
            point.u_peak = Some(traj.u_peak());
            if let Ok(b) = measure_quasi_sliding(&traj, spec.window) {
                point.s_bound = Some(b.s_bound);
                point.x_bound = Some(b.x_bound);
            }
        }
        Err(Error::Divergence { step, norm }) => {
            point.certified = false;
            point.note = Some(format!("diverged at step {step} (|x| = {norm:e})"));
        }
        Err(e) => return Err(e),
    }
    Ok(point)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub controller: ControllerKind,
    pub u_peak: f64,
    /// Peak before the disturbance switches on.
    pub u_peak_initial_transient: f64,
    pub s_bound: f64,
    pub x_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub period: f64,
    pub alpha: f64,
    pub noise: Option<NoiseSpec>,
    pub window: (f64, f64),
    pub rows: Vec<BenchmarkRow>,
    #[serde(skip)]
    pub trajectories: Vec<Trajectory>,
}

impl BenchmarkReport {
    pub fn row(&self, kind: ControllerKind) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.controller == kind)
    }
}

/// The four online controllers on the aircraft scenario, all seeing the same
/// noise realization when `noise` is given.
pub fn aircraft_benchmark(noise: Option<NoiseSpec>) -> Result<BenchmarkReport> {
    benchmark_on(&Scenario::aircraft(ControllerKind::Mm1), noise)
}

/// As [`aircraft_benchmark`] but starting from an arbitrary scenario; only its
/// controller kind is replaced.
pub fn benchmark_on(base: &Scenario, noise: Option<NoiseSpec>) -> Result<BenchmarkReport> {
    benchmark_with_window(base, noise, benchmark::constant_steady_window())
}

/// As [`benchmark_on`] with the bounds measured over `window`.
pub fn benchmark_with_window(base: &Scenario, noise: Option<NoiseSpec>, window: (f64, f64)) -> Result<BenchmarkReport> {
    // the initial transient ends where the disturbance first switches on
    let transient_end = base.disturbance.segments().iter().find(|s| !s.is_zero()).map_or(f64::INFINITY, |s| s.start);
    let results: Vec<Result<Trajectory>> = with_pool(|| {
        ControllerKind::ONLINE
            .par_iter()
            .map(|&kind| {
                let mut sc = base.clone();
                sc.controller = kind;
                if let Some(n) = noise {
                    sc.noise = n;
                }
                simulator::run(&sc)
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut trajectories = Vec::new();
    for traj in results {
        let traj = traj?;
        let b = measure_quasi_sliding(&traj, window)?;
        rows.push(BenchmarkRow {
            controller: traj.controller,
            u_peak: traj.u_peak(),
            u_peak_initial_transient: traj.u_peak_until(transient_end),
            s_bound: b.s_bound,
            x_bound: b.x_bound,
        });
        trajectories.push(traj);
    }
    Ok(BenchmarkReport { period: base.period, alpha: base.alpha, noise, window, rows, trajectories })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_fit() {
        let data: Vec<(f64, f64)> = DEFAULT_LADDER.iter().map(|&t: &f64| (t.ln(), (3.0 * t * t).ln())).collect();
        let (slope, hw) = log_log_fit(&data).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
        assert!(hw.unwrap() < 1e-9);
        assert!(log_log_fit(&data[..1]).is_none());
        assert!(log_log_fit(&data[..2]).unwrap().1.is_none());
    }

    #[test]
    fn noisy_fit_has_positive_half_width() {
        let data = [(0.0, 0.1), (1.0, 0.9), (2.0, 2.2), (3.0, 2.8)];
        let (slope, hw) = log_log_fit(&data).unwrap();
        assert!((slope - 0.94).abs() < 1e-12);
        // residuals 0.01, −0.13, 0.23, −0.11: RSS 0.082, SE √(0.082/2/5),
        // t(0.975, 2) = 4.302653
        let expect = 4.302653 * (0.082_f64 / 10.0).sqrt();
        assert!((hw.unwrap() - expect).abs() < 1e-5, "{hw:?}");
    }

    #[test]
    fn ladder_validation() {
        let mut spec = SweepSpec::new(Scenario::aircraft(ControllerKind::Mm1), Metric::SBound);
        assert!(spec.validate().is_ok());
        spec.ladder = vec![0.02, 0.01];
        assert!(spec.validate().is_err());
        spec.ladder = vec![0.02, 0.01, 0.004];
        assert!(spec.validate().is_err());
        spec.ladder = vec![0.0025, 0.01, 0.005];
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("rms".parse::<Metric>().is_err());
    }

    #[test]
    fn unstable_points_are_excluded() {
        let mut base = Scenario::aircraft(ControllerKind::Mm1);
        base.h = benchmark::destabilized_h();
        base.horizon = 1.0;
        let mut spec = SweepSpec::new(base, Metric::UPeak);
        spec.window = (0.5, 0.9);
        let rep = run_sweep(&spec).unwrap();
        assert!(rep.points.iter().all(|p| !p.certified && p.note.is_some()));
        assert_eq!(rep.slope, None);
    }
}
