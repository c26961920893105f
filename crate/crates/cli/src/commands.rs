use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use qsmc_core::analysis::{self, build_aug, AugVariant, SpectrumReport, StabilityReport};
use qsmc_core::controllers::{ControllerKind, GainSet};
use qsmc_core::discretization::{difference_diagnostics, discretize, DiffReport};
use qsmc_core::experiments::{self, expected_slope, Metric, ScalingReport, SweepSpec, SLOPE_BAND};
use qsmc_core::plant::{invariant_zeros, validate_plant, NoiseKind, NoiseSpec, ValidationReport};
use qsmc_core::simulator::{self, measure_quasi_sliding, Trajectory};
use qsmc_core::surface::{build_surface, certify_surface_over_periods, CertReport};
use qsmc_core::Error;

use crate::scenario::{ConfigError, Format, Outputs, ScenarioFile};
use crate::svg::{line_plot, Series};

/// Failure classes, each with a stable exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Assumption(String),
    Divergence(String),
    /// The command ran but its checks did not all pass.
    Unmet(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Assumption(_) => 3,
            CliError::Divergence(_) => 4,
            CliError::Unmet(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Assumption(m) => write!(f, "{m}"),
            CliError::Divergence(m) => write!(f, "{m}"),
            CliError::Unmet(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Dimension(_) | Error::OutOfRange { .. } => {
                CliError::Config(e.to_string())
            }
            Error::AssumptionViolation(_) => CliError::Assumption(e.to_string()),
            Error::Divergence { .. } => CliError::Divergence(e.to_string()),
            Error::Construction(_) => CliError::Unmet(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_err(path))?;
    println!("  wrote {}", path.display());
    Ok(())
}

fn ensure_dir(outputs: &Outputs) -> Result<(), CliError> {
    fs::create_dir_all(&outputs.dir).map_err(io_err(&outputs.dir))
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = toml::to_string(value).map_err(|e| CliError::Io(format!("serializing {}: {e}", path.display())))?;
    write_file(path, text.as_bytes())
}

fn beta_of(sf: &ScenarioFile) -> Option<f64> {
    let sc = &sf.scenario;
    sf.beta.or_else(|| (sc.alpha > 0.0).then(|| (1.0 - sc.alpha) / sc.period))
}

fn noise_label(n: &NoiseSpec) -> String {
    match n.kind {
        NoiseKind::None => "none".into(),
        NoiseKind::Uniform => format!("uniform ±{} (seed {})", n.half_width, n.seed),
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    scenario: &'a str,
    controller: ControllerKind,
    period: f64,
    alpha: f64,
    beta: Option<f64>,
    horizon: f64,
    steps: usize,
    noise: NoiseSpec,
    window: (f64, f64),
    u_peak: f64,
    s_bound: Option<f64>,
    x_bound: Option<f64>,
}

fn plots(traj: &Trajectory, stem: &Path) -> Result<(), CliError> {
    type Pick = fn(&simulator::StepRecord) -> &nalgebra::DVector<f64>;
    let groups: [(&str, &str, Pick); 3] = [
        ("u", "control input u[k]", |r| &r.u),
        ("x", "state x[k]", |r| &r.x),
        ("s", "sliding variable s[k]", |r| &r.s_true),
    ];
    for (tag, title, pick) in groups {
        let width = traj.records.first().map_or(0, |r| pick(r).len());
        let series: Vec<Series> = (0..width)
            .map(|i| Series {
                label: format!("{tag}{}", i + 1),
                points: traj.records.iter().map(|r| (r.k as f64, pick(r)[i])).collect(),
            })
            .collect();
        let title = format!("{title}, {} (T = {})", traj.controller, traj.period);
        let svg = line_plot(&title, "sample k", tag, &series);
        write_file(&with_suffix(stem, &format!("_{tag}.svg")), svg.as_bytes())?;
    }
    Ok(())
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_trajectory(traj: &Trajectory, outputs: &Outputs, stem: &Path) -> Result<(), CliError> {
    if outputs.wants(Format::Csv) {
        let path = with_suffix(stem, ".csv");
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).map_err(io_err(&path))?;
        write_file(&path, &buf)?;
    }
    if outputs.wants(Format::Svg) {
        plots(traj, stem)?;
    }
    Ok(())
}

pub fn run(sf: &ScenarioFile) -> Result<(), CliError> {
    let sc = &sf.scenario;
    sc.validate()?;
    let prep = simulator::prepare(sc)?;
    let traj = simulator::run_prepared(sc, &prep)?;
    let bounds = measure_quasi_sliding(&traj, sf.window).ok();

    println!("{} with {} at T = {}, alpha = {}", sf.name, sc.controller, sc.period, sc.alpha);
    println!("  steps      {}", traj.records.len() - 1);
    println!("  noise      {}", noise_label(&sc.noise));
    println!("  peak |u|   {:.6}", traj.u_peak());
    println!("  window     [{:.4}, {:.4})", sf.window.0, sf.window.1);
    match bounds {
        Some(b) => {
            println!("  max |s|    {:.6e}", b.s_bound);
            println!("  max |x|    {:.6e}", b.x_bound);
        }
        None => println!("  the run ends before the steady window; no bounds"),
    }

    ensure_dir(&sf.outputs)?;
    let stem = sf.outputs.dir.join(format!("{}_{}", sf.name, sc.controller.name()));
    write_trajectory(&traj, &sf.outputs, &stem)?;
    if sf.outputs.wants(Format::Summary) {
        let summary = RunSummary {
            scenario: &sf.name,
            controller: sc.controller,
            period: sc.period,
            alpha: sc.alpha,
            beta: beta_of(sf),
            horizon: sc.horizon,
            steps: traj.records.len() - 1,
            noise: sc.noise,
            window: sf.window,
            u_peak: traj.u_peak(),
            s_bound: bounds.map(|b| b.s_bound),
            x_bound: bounds.map(|b| b.x_bound),
        };
        write_toml(&with_suffix(&stem, "_summary.toml"), &summary)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyReport {
    scenario: String,
    controller: ControllerKind,
    period: f64,
    alpha: f64,
    beta: Option<f64>,
    certified: bool,
    findings: Vec<String>,
    plant: ValidationReport,
    /// `[re, im]` pairs
    invariant_zeros: Vec<[f64; 2]>,
    reduced_order_eigenvalues: Vec<[f64; 2]>,
    surface: CertReport,
    controller_spectral_radius: Option<f64>,
    first_order_spectrum: Option<SpectrumReport>,
    second_order_spectrum: Option<SpectrumReport>,
    stability: Option<StabilityReport>,
    differences: Vec<DiffReport>,
}

fn pairs(z: &[num_complex::Complex64]) -> Vec<[f64; 2]> {
    z.iter().map(|z| [z.re, z.im]).collect()
}

pub fn verify(sf: &ScenarioFile, ladder: &[f64]) -> Result<(), CliError> {
    let sc = &sf.scenario;
    sc.validate()?;
    let mut periods: Vec<f64> = ladder.to_vec();
    if !periods.iter().any(|&t| t == sc.period) {
        periods.push(sc.period);
    }
    periods.sort_by(f64::total_cmp);

    let mut findings = Vec::new();
    let plant_report = validate_plant(&sc.plant);
    findings.extend(plant_report.failures().map(|c| format!("plant {}: {}", c.name, c.detail)));
    let zeros = invariant_zeros(&sc.plant).unwrap_or_default();

    let cert = certify_surface_over_periods(&sc.plant, &sc.h, &periods)?;
    if !cert.hcb_invertible {
        findings.push(format!("HCB is not invertible (condition number {:.3e})", cert.hcb_condition_number));
    }
    findings.extend(
        cert.entries
            .iter()
            .filter(|e| !e.certified)
            .map(|e| format!("HCB̄ not invertible at T = {} (condition number {:.3e})", e.period, e.condition_number)),
    );

    let disc = discretize(&sc.plant, sc.period)?;
    let design = match build_surface(&sc.plant, &disc, &sc.h) {
        Ok(d) => Some(d),
        Err(Error::AssumptionViolation(m)) => {
            findings.push(m);
            None
        }
        Err(e) => return Err(e.into()),
    };
    let mut reduced = Vec::new();
    let (mut rho, mut spec1, mut spec2) = (None, None, None);
    if let Some(d) = &design {
        reduced = d.a_c_eigenvalues.clone();
        if !d.reduced_order_stable() {
            findings.push("reduced-order sliding dynamics are not Hurwitz".into());
        }
        let alpha = sc.controller.effective_alpha(sc.alpha);
        let s1 = analysis::verify_first_order_spectrum(&d.omega2, alpha, sc.period);
        let s2 = analysis::verify_second_order_spectrum(&d.omega2, alpha, sc.period);
        for s in [&s1, &s2] {
            if !s.passed {
                findings.push(format!(
                    "{:?} error block spectrum off by {:.3e} at alpha = {alpha}",
                    s.variant, s.coefficient_error
                ));
            }
        }
        (spec1, spec2) = (Some(s1), Some(s2));
        if let Some(variant) = AugVariant::for_controller(sc.controller) {
            let gains = GainSet::for_kind(d, sc.controller, sc.alpha)?;
            let r = build_aug(d, &gains, variant)?.spectral_radius();
            if r >= 1.0 {
                findings.push(format!("{} closed loop has spectral radius {r:.6} ≥ 1", sc.controller));
            }
            rho = Some(r);
        }
    }

    let stability = match beta_of(sf) {
        Some(beta) => {
            let rep = analysis::stability_over_periods(&sc.plant, &sc.h, beta, &periods)?;
            findings.extend(rep.entries.iter().filter(|e| !e.stable).map(|e| match &e.note {
                Some(n) => format!("stability at T = {}: {n}", e.period),
                None => format!(
                    "augmented spectral radius at T = {}: {:.6} / {:.6}",
                    e.period, e.rho_first_order, e.rho_second_order
                ),
            }));
            Some(rep)
        }
        None => None,
    };

    let mut differences = Vec::new();
    let t = sc.period;
    for seg in sc.disturbance.segments() {
        let k0 = (seg.start / t).ceil() as usize + 2;
        let k_end = (seg.end.min(sc.horizon) / t).floor() as usize;
        // stop one sample short so the last interval stays inside the segment
        if k_end > k0 + 3 {
            differences.push(difference_diagnostics(&sc.plant, t, &sc.disturbance, k0..k_end - 1)?);
        }
    }

    let certified = findings.is_empty();
    println!("{} verification at T = {}, controller {}", sf.name, sc.period, sc.controller);
    println!("  plant checks        {}", if plant_report.passed() { "pass" } else { "FAIL" });
    println!("  invariant zeros     {}", fmt_complex(&zeros));
    println!("  reduced-order eigs  {}", fmt_complex(&reduced));
    println!("  cond(HCB)           {:.4e}", cert.hcb_condition_number);
    if let (Some(s1), Some(s2)) = (&spec1, &spec2) {
        println!(
            "  error spectra       first order {:.2e}, second order {:.2e}",
            s1.coefficient_error, s2.coefficient_error
        );
    }
    if let Some(r) = rho {
        println!("  rho({})            {r:.6}", sc.controller.name());
    }
    if let Some(rep) = &stability {
        println!("  beta = {}", rep.beta);
        println!("  {:>10} {:>10} {:>14} {:>14} {:>8}", "T", "alpha", "rho first", "rho second", "stable");
        for e in &rep.entries {
            println!(
                "  {:>10} {:>10.6} {:>14.8} {:>14.8} {:>8}",
                e.period, e.alpha, e.rho_first_order, e.rho_second_order, e.stable
            );
        }
    }
    for d in &differences {
        println!(
            "  d[k] differences on k in [{}, {}): first {:.3e}, second {:.3e}",
            d.k_start, d.k_end, d.max_first_difference, d.max_second_difference
        );
    }
    for f in &findings {
        println!("  finding: {f}");
    }
    println!("  {}", if certified { "CERTIFIED" } else { "NOT CERTIFIED" });

    if sf.outputs.wants(Format::Summary) {
        ensure_dir(&sf.outputs)?;
        let report = VerifyReport {
            scenario: sf.name.clone(),
            controller: sc.controller,
            period: sc.period,
            alpha: sc.alpha,
            beta: beta_of(sf),
            certified,
            findings: findings.clone(),
            plant: plant_report,
            invariant_zeros: pairs(&zeros),
            reduced_order_eigenvalues: pairs(&reduced),
            surface: cert,
            controller_spectral_radius: rho,
            first_order_spectrum: spec1,
            second_order_spectrum: spec2,
            stability,
            differences,
        };
        write_toml(&sf.outputs.dir.join(format!("{}_verify.toml", sf.name)), &report)?;
    }
    if certified {
        Ok(())
    } else {
        Err(CliError::Assumption(format!(
            "surface assumption (HCB invertible, stable reduced-order motion) or closed-loop stability not certified: {}",
            findings.join("; ")
        )))
    }
}

fn fmt_complex(z: &[num_complex::Complex64]) -> String {
    if z.is_empty() {
        return "none".into();
    }
    z.iter()
        .map(|z| if z.im.abs() < 1e-12 { format!("{:.4}", z.re) } else { format!("{:.4}{:+.4}i", z.re, z.im) })
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Serialize)]
struct SweepFile<'a> {
    scenario: &'a str,
    reports: &'a [ScalingReport],
}

pub fn sweep(sf: &ScenarioFile, ladder: &[f64], metrics: &[Metric]) -> Result<(), CliError> {
    let sc = &sf.scenario;
    sc.validate()?;
    simulator::prepare(sc)?;
    let mut spec = SweepSpec::new(sc.clone(), metrics[0]);
    spec.ladder = ladder.to_vec();
    spec.window = sf.window;
    let points = experiments::sweep_points(&spec)?;
    let reports: Vec<ScalingReport> =
        metrics.iter().map(|&m| experiments::scaling_report(&spec, m, points.clone())).collect();

    println!("{} sweep, controller {}, beta = {}", sf.name, sc.controller, spec.beta());
    println!("  {:>10} {:>10} {:>13} {:>13} {:>11}  note", "T", "alpha", "s_bound", "x_bound", "u_peak");
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.5e}"));
    for p in &points {
        println!(
            "  {:>10} {:>10.6} {:>13} {:>13} {:>11}  {}",
            p.period,
            p.alpha,
            opt(p.s_bound),
            opt(p.x_bound),
            p.u_peak.map_or("-".into(), |v| format!("{v:.4}")),
            p.note.as_deref().unwrap_or("")
        );
    }
    let mut misses = Vec::new();
    for r in &reports {
        let expected = expected_slope(r.controller, r.metric);
        let verdict = match r.matches_expected() {
            Some(true) => "ok",
            Some(false) => "OUTSIDE BAND",
            None => "no prediction",
        };
        println!(
            "  slope {:<8} {} ± {} over {} points; expected {} → {verdict}",
            r.metric.name(),
            r.slope.map_or("-".into(), |s| format!("{s:.3}")),
            r.half_width.map_or("-".into(), |h| format!("{h:.3}")),
            r.fitted_points,
            expected.map_or("-".into(), |e| format!("{e} ± {SLOPE_BAND}"))
        );
        if r.matches_expected() == Some(false) {
            let slope = r.slope.map_or("-".into(), |s| format!("{s:.3}"));
            misses.push(format!(
                "{} slope {slope} outside {} ± {SLOPE_BAND}",
                r.metric.name(),
                expected.unwrap_or(0.0)
            ));
        }
    }

    if sf.outputs.wants(Format::Summary) || sf.outputs.wants(Format::Csv) {
        ensure_dir(&sf.outputs)?;
        let stem = sf.outputs.dir.join(format!("{}_{}_sweep", sf.name, sc.controller.name()));
        if sf.outputs.wants(Format::Summary) {
            write_toml(&with_suffix(&stem, ".toml"), &SweepFile { scenario: &sf.name, reports: &reports })?;
        }
        if sf.outputs.wants(Format::Csv) {
            let mut csv = String::from("period,alpha,s_bound,x_bound,u_peak,certified\n");
            let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
            for p in &points {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    p.period,
                    p.alpha,
                    cell(p.s_bound),
                    cell(p.x_bound),
                    cell(p.u_peak),
                    p.certified
                ));
            }
            write_file(&with_suffix(&stem, ".csv"), csv.as_bytes())?;
        }
    }
    if misses.is_empty() {
        Ok(())
    } else {
        Err(CliError::Unmet(misses.join("; ")))
    }
}

pub fn benchmark(sf: &ScenarioFile) -> Result<(), CliError> {
    let sc = &sf.scenario;
    sc.validate()?;
    simulator::prepare(sc)?;
    let noise = (sc.noise.kind != NoiseKind::None).then_some(sc.noise);
    let report = experiments::benchmark_with_window(sc, noise, sf.window)?;
    println!(
        "{} benchmark at T = {}, alpha = {}, noise {}",
        sf.name,
        report.period,
        report.alpha,
        noise_label(&sc.noise)
    );
    println!("  {:<6} {:>10} {:>14} {:>13} {:>13}", "law", "peak |u|", "before dist.", "max |s|", "max |x|");
    for r in &report.rows {
        println!(
            "  {:<6} {:>10.4} {:>14.4} {:>13.5e} {:>13.5e}",
            r.controller.name(),
            r.u_peak,
            r.u_peak_initial_transient,
            r.s_bound,
            r.x_bound
        );
    }
    ensure_dir(&sf.outputs)?;
    for traj in &report.trajectories {
        let stem = sf.outputs.dir.join(format!("{}_{}", sf.name, traj.controller.name()));
        write_trajectory(traj, &sf.outputs, &stem)?;
    }
    if sf.outputs.wants(Format::Summary) {
        write_toml(&sf.outputs.dir.join(format!("{}_benchmark.toml", sf.name)), &report)?;
    }
    Ok(())
}
