//! Hybrid closed-loop simulation: continuous plant, zero-order hold, sampled
//! noisy output feedback.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::benchmark;
use crate::controllers::{ControlForm, ControllerKind, ControllerState, GainSet};
use crate::discretization::{discretize, DiscretePlant, DisturbanceSampler};
use crate::error::{Error, Result};
use crate::linalg;
use crate::plant::{ContinuousPlant, DisturbanceSignal, NoiseSpec};
use crate::surface::{build_surface, SurfaceDesign};

/// Runs whose state norm exceeds this are stopped as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: ContinuousPlant,
    pub disturbance: DisturbanceSignal,
    pub noise: NoiseSpec,
    pub h: DMatrix<f64>,
    pub controller: ControllerKind,
    /// Contraction factor for the proposed laws; ignored by the deadbeat ones.
    pub alpha: f64,
    pub period: f64,
    pub horizon: f64,
    pub x0: DVector<f64>,
    /// RK4 sub-steps per sample when `record_intersample` is set.
    pub substeps: usize,
    pub record_intersample: bool,
    pub form: ControlForm,
}

impl Scenario {
    /// The lateral aircraft benchmark with the given controller, noise-free.
    pub fn aircraft(controller: ControllerKind) -> Self {
        Self {
            plant: benchmark::aircraft_plant(),
            disturbance: benchmark::aircraft_disturbance(),
            noise: NoiseSpec::none(),
            h: benchmark::aircraft_h(),
            controller,
            alpha: benchmark::ALPHA,
            period: benchmark::SAMPLING_PERIOD,
            horizon: benchmark::HORIZON,
            x0: benchmark::initial_state(),
            substeps: 1,
            record_intersample: false,
            form: ControlForm::Recursive,
        }
    }

    /// Changes `T` keeping `β = (1 − α)/T` fixed.
    pub fn with_period_fixed_beta(mut self, period: f64) -> Self {
        let beta = (1.0 - self.alpha) / self.period;
        self.alpha = 1.0 - beta * period;
        self.period = period;
        self
    }

    /// Number of sampling intervals; records are `0..=steps`.
    pub fn steps(&self) -> usize {
        // guard against 20/0.01 = 1999.999…
        (self.horizon / self.period + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m, p) = (self.plant.n(), self.plant.m(), self.plant.p());
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(Error::Config(format!("sampling period must be positive, got {}", self.period)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.substeps == 0 {
            return Err(Error::Config("sub-steps must be at least 1".into()));
        }
        if self.x0.len() != n {
            return Err(Error::Dimension(format!("initial state has {} entries, plant has {n} states", self.x0.len())));
        }
        if self.h.shape() != (m, p) {
            return Err(Error::Dimension(format!("H is {}×{}, expected {m}×{p}", self.h.nrows(), self.h.ncols())));
        }
        if self.disturbance.channels() != m {
            return Err(Error::Dimension(format!(
                "disturbance has {} channels, plant has {m} inputs",
                self.disturbance.channels()
            )));
        }
        if self.disturbance.horizon() < self.horizon {
            return Err(Error::Config(format!(
                "disturbance is defined up to {} but the horizon is {}",
                self.disturbance.horizon(),
                self.horizon
            )));
        }
        if !(0.0..1.0).contains(&self.controller.effective_alpha(self.alpha)) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    pub x: DVector<f64>,
    /// Measured (possibly noisy) output.
    pub y: DVector<f64>,
    /// `H·y[k]`, what the controller sees.
    pub s: DVector<f64>,
    /// `HC·x[k]`, noiseless.
    pub s_true: DVector<f64>,
    pub u: DVector<f64>,
    pub f: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasiSlidingBounds {
    pub s_bound: f64,
    pub x_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub controller: ControllerKind,
    pub period: f64,
    pub alpha: f64,
    pub steps: usize,
    pub u_peak: f64,
    /// Bounds over the default steady window, when the run covers it.
    pub steady_window: Option<(f64, f64)>,
    pub s_bound: Option<f64>,
    pub x_bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub controller: ControllerKind,
    pub period: f64,
    pub alpha: f64,
    pub records: Vec<StepRecord>,
    /// `(t, x(t))` at the RK4 sub-steps, when requested.
    pub intersample: Vec<(f64, DVector<f64>)>,
}

impl Trajectory {
    /// `max_k ‖u[k]‖∞`
    pub fn u_peak(&self) -> f64 {
        self.records.iter().map(|r| linalg::inf_norm(&r.u)).fold(0.0, f64::max)
    }

    /// Peak control over records with `t < until`.
    pub fn u_peak_until(&self, until: f64) -> f64 {
        self.records.iter().filter(|r| r.t < until).map(|r| linalg::inf_norm(&r.u)).fold(0.0, f64::max)
    }

    pub fn summary(&self) -> TrajectorySummary {
        let window = benchmark::constant_steady_window();
        let bounds = measure_quasi_sliding(self, window).ok();
        TrajectorySummary {
            controller: self.controller,
            period: self.period,
            alpha: self.alpha,
            steps: self.records.len().saturating_sub(1),
            u_peak: self.u_peak(),
            steady_window: bounds.map(|_| window),
            s_bound: bounds.map(|b| b.s_bound),
            x_bound: bounds.map(|b| b.x_bound),
        }
    }

    /// CSV with columns `k, t, x1..xn, y1..yp, s1..sm, strue1..struem,
    /// u1..um, f1..fm`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let Some(first) = self.records.first() else {
            return Ok(());
        };
        let mut header = vec!["k".to_string(), "t".to_string()];
        let groups: [(&str, usize); 6] = [
            ("x", first.x.len()),
            ("y", first.y.len()),
            ("s", first.s.len()),
            ("strue", first.s_true.len()),
            ("u", first.u.len()),
            ("f", first.f.len()),
        ];
        for (name, len) in groups {
            header.extend((1..=len).map(|i| format!("{name}{i}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for r in &self.records {
            write!(w, "{},{}", r.k, r.t)?;
            for v in [&r.x, &r.y, &r.s, &r.s_true, &r.u, &r.f] {
                for e in v.iter() {
                    write!(w, ",{e}")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Steady-state bounds over the records with `t0 ≤ t < t1`:
/// `max ‖s_true‖∞` and `max ‖x‖∞`.
pub fn measure_quasi_sliding(traj: &Trajectory, window: (f64, f64)) -> Result<QuasiSlidingBounds> {
    let (t0, t1) = window;
    let last = traj.records.last().map(|r| r.t).unwrap_or(f64::NEG_INFINITY);
    if !(t0 < t1) || t0 < 0.0 || t1 > last + traj.period {
        return Err(Error::InvalidArgument(format!("window [{t0}, {t1}) is outside the trajectory [0, {last}]")));
    }
    let mut bounds = QuasiSlidingBounds { s_bound: 0.0, x_bound: 0.0 };
    let mut hits = 0;
    for r in traj.records.iter().filter(|r| r.t >= t0 && r.t < t1) {
        bounds.s_bound = bounds.s_bound.max(linalg::inf_norm(&r.s_true));
        bounds.x_bound = bounds.x_bound.max(linalg::inf_norm(&r.x));
        hits += 1;
    }
    if hits == 0 {
        return Err(Error::InvalidArgument(format!("window [{t0}, {t1}) contains no samples")));
    }
    Ok(bounds)
}

/// Everything a run needs that does not change from step to step.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub disc: DiscretePlant,
    pub design: SurfaceDesign,
    pub gains: GainSet,
    pub sampler: DisturbanceSampler,
}

/// Discretizes, builds the surface and gains, and checks the reduced-order
/// motion is stable.
pub fn prepare(scenario: &Scenario) -> Result<PreparedRun> {
    scenario.validate()?;
    let disc = discretize(&scenario.plant, scenario.period)?;
    let design = build_surface(&scenario.plant, &disc, &scenario.h)?;
    if !design.reduced_order_stable() {
        let eigs: Vec<String> = design.a_c_eigenvalues.iter().map(|z| format!("{:.4}{:+.4}i", z.re, z.im)).collect();
        return Err(Error::AssumptionViolation(format!(
            "reduced-order dynamics are not Hurwitz, eigenvalues [{}]",
            eigs.join(", ")
        )));
    }
    let gains = GainSet::for_kind(&design, scenario.controller, scenario.alpha)?;
    let sampler = DisturbanceSampler::new(&scenario.plant, scenario.period)?;
    Ok(PreparedRun { disc, design, gains, sampler })
}

pub fn run(scenario: &Scenario) -> Result<Trajectory> {
    let prep = prepare(scenario)?;
    run_prepared(scenario, &prep)
}

pub fn run_prepared(scenario: &Scenario, prep: &PreparedRun) -> Result<Trajectory> {
    let plant = &scenario.plant;
    let t_s = scenario.period;
    let steps = scenario.steps();
    let mut controller = ControllerState::with_form(scenario.controller, prep.gains.clone(), scenario.form);
    let mut noise = scenario.noise.stream();
    let mut x = scenario.x0.clone();
    let mut records = Vec::with_capacity(steps + 1);
    let mut intersample = Vec::new();
    if scenario.record_intersample {
        intersample.push((0.0, x.clone()));
    }

    for k in 0..=steps {
        let t = k as f64 * t_s;
        let y = plant.c() * &x + noise.sample(plant.p());
        let s = &scenario.h * &y;
        let s_true = &prep.design.hc * &x;
        let f = scenario.disturbance.evaluate(t)?;

        let needs_d = k < steps || scenario.controller == ControllerKind::Eq;
        let d = if needs_d { Some(prep.sampler.sample(&scenario.disturbance, k)?) } else { None };

        let u = if scenario.controller == ControllerKind::Eq {
            // true lumped term g[k] = TΩ₁ξ[k] + HC·d[k]
            let xi = &prep.design.m * &x;
            let g = &prep.design.omega1 * xi * t_s + &prep.design.hc * d.as_ref().expect("sampled above");
            controller.step_with_oracle(&s, &g)
        } else {
            controller.step(&s)?
        };

        let next = if k < steps {
            Some(if scenario.record_intersample {
                rk4_interval(plant, &scenario.disturbance, &x, &u, t, t_s, scenario.substeps, &mut intersample)
            } else {
                &prep.disc.phi * &x + &prep.disc.gamma * &u + d.as_ref().expect("sampled above")
            })
        } else {
            None
        };
        records.push(StepRecord { k, t, x, y, s, s_true, u, f });

        match next {
            Some(xn) => {
                let norm = xn.norm();
                if !(norm <= DIVERGENCE_LIMIT) {
                    return Err(Error::Divergence { step: k + 1, norm });
                }
                x = xn;
            }
            None => break,
        }
    }

    Ok(Trajectory { controller: scenario.controller, period: t_s, alpha: prep.gains.alpha, records, intersample })
}

/// Classical RK4 over one hold interval `[t0, t0 + period)` with `u` frozen.
pub fn rk4_hold_interval(
    plant: &ContinuousPlant,
    sig: &DisturbanceSignal,
    x0: &DVector<f64>,
    u: &DVector<f64>,
    t0: f64,
    period: f64,
    substeps: usize,
) -> DVector<f64> {
    rk4_interval(plant, sig, x0, u, t0, period, substeps.max(1), &mut Vec::new())
}

#[allow(clippy::too_many_arguments)]
fn rk4_interval(
    plant: &ContinuousPlant,
    sig: &DisturbanceSignal,
    x0: &DVector<f64>,
    u: &DVector<f64>,
    t0: f64,
    period: f64,
    substeps: usize,
    out: &mut Vec<(f64, DVector<f64>)>,
) -> DVector<f64> {
    let h = period / substeps as f64;
    let end = t0 + period;
    // evaluate f inside the interval's own segment so a breakpoint at the
    // right end is not sampled from the next piece
    let seg = sig.segment_index(t0).map(|i| &sig.segments()[i]);
    let force = |t: f64| -> DVector<f64> {
        match seg {
            Some(sg) if t <= sg.end => sg.value(t),
            _ => sig.evaluate(t.min(sig.horizon() - 1e-12)).unwrap_or_else(|_| DVector::zeros(u.len())),
        }
    };
    let rhs = |t: f64, x: &DVector<f64>| plant.a() * x + plant.b() * (u + force(t));
    let mut x = x0.clone();
    for i in 0..substeps {
        let t = t0 + i as f64 * h;
        let k1 = rhs(t, &x);
        let k2 = rhs(t + h / 2.0, &(&x + &k1 * (h / 2.0)));
        let k3 = rhs(t + h / 2.0, &(&x + &k2 * (h / 2.0)));
        let k4 = rhs(t + h, &(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let ti = if i + 1 == substeps { end } else { t + h };
        out.push((ti, x.clone()));
    }
    x
}
