//! Scenario files.
//!
//! A scenario is a line-oriented document of `[section]` headers followed by
//! `key = value` lines. `#` starts a comment. Matrices are written inline with
//! rows separated by `;`, or the plant may be loaded from a matrix file with
//! `file = path` (relative to the scenario). Numbers accept `inf`, `pi` and
//! multiples such as `5pi`.
//!
//! ```text
//! [plant]
//! A = 0 1; -1 0
//! B = 0; 1
//! C = 0 1
//! x0 = 1 0
//!
//! [surface]
//! H = 1
//!
//! [controller]
//! kind = mm1
//! beta = 3
//!
//! [timing]
//! T = 0.01
//! horizon = 20
//!
//! [disturbance]
//! segment = 0 10 : zero
//! segment = 10 inf : sin(0, 1, 0.5, 0)
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use qsmc_core::controllers::{resolve_alpha, ControllerKind};
use qsmc_core::plant::text::parse_plant;
use qsmc_core::plant::{ChannelForm, ContinuousPlant, DisturbanceSignal, NoiseSpec, Segment};
use qsmc_core::simulator::Scenario;

const SECTIONS: [&str; 7] = ["plant", "surface", "controller", "timing", "disturbance", "noise", "outputs"];

/// Where a setting came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    CommandLine,
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::CommandLine => f.write_str("command line"),
            Origin::Default => f.write_str("default"),
        }
    }
}

/// A configuration error pinned to a section, key and line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub section: String,
    pub key: String,
    pub origin: Origin,
    pub message: String,
}

impl ConfigError {
    fn new(section: &str, key: &str, origin: Origin, message: impl Into<String>) -> Self {
        Self { section: section.into(), key: key.into(), origin, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "[{}] ({}): {}", self.section, self.origin, self.message)
        } else {
            write!(f, "[{}] {} ({}): {}", self.section, self.key, self.origin, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Summary,
    Svg,
}

#[derive(Debug, Clone)]
pub struct Outputs {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Outputs {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub controller: Option<ControllerKind>,
    pub period: Option<f64>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    /// Uniform noise half-width; zero switches noise off.
    pub noise: Option<f64>,
    pub out: Option<PathBuf>,
    pub plot: bool,
}

/// A parsed scenario ready to run.
#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub name: String,
    pub scenario: Scenario,
    /// β as given, before α was resolved from it.
    pub beta: Option<f64>,
    /// Steady-state window for the quasi-sliding bounds; bounds are not
    /// reported when the run ends before it.
    pub window: (f64, f64),
    pub outputs: Outputs,
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Raw key/value content, grouped by section.
#[derive(Debug, Clone, Default)]
pub struct Document {
    base_dir: PathBuf,
    name: String,
    sections: HashMap<String, HashMap<String, Entry>>,
    segments: Vec<Entry>,
}

impl Document {
    pub fn parse(text: &str, base_dir: &Path, name: &str) -> Result<Self, ConfigError> {
        let mut doc = Document { base_dir: base_dir.to_path_buf(), name: name.to_string(), ..Default::default() };
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::new(rest, "", Origin::Line(line), "unterminated section header"))?
                    .trim()
                    .to_string();
                if !SECTIONS.contains(&name.as_str()) {
                    return Err(ConfigError::new(
                        &name,
                        "",
                        Origin::Line(line),
                        format!("unknown section (expected one of {})", SECTIONS.join(", ")),
                    ));
                }
                if doc.sections.contains_key(&name) {
                    return Err(ConfigError::new(&name, "", Origin::Line(line), "section appears twice"));
                }
                doc.sections.insert(name.clone(), HashMap::new());
                current = Some(name);
                continue;
            }
            let Some(section) = current.as_deref() else {
                return Err(ConfigError::new("", "", Origin::Line(line), "key outside any section"));
            };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::new(section, content, Origin::Line(line), "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if !known_key(section, key) {
                return Err(ConfigError::new(section, key, Origin::Line(line), "unknown key"));
            }
            let entry = Entry { value: value.to_string(), line };
            if section == "disturbance" && key == "segment" {
                doc.segments.push(entry);
                continue;
            }
            let keys = doc.sections.get_mut(section).expect("section registered above");
            if keys.insert(key.to_string(), entry).is_some() {
                return Err(ConfigError::new(section, key, Origin::Line(line), "key given twice"));
            }
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", "", Origin::Default, format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        Self::parse(&text, &base, name)
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    fn require(&self, section: &str, key: &str) -> Result<&Entry, ConfigError> {
        self.get(section, key).ok_or_else(|| ConfigError::new(section, key, Origin::Default, "missing required key"))
    }

    fn number(&self, section: &str, key: &str) -> Result<Option<(f64, Origin)>, ConfigError> {
        self.get(section, key)
            .map(|e| {
                parse_number(&e.value)
                    .map(|v| (v, Origin::Line(e.line)))
                    .map_err(|m| ConfigError::new(section, key, Origin::Line(e.line), m))
            })
            .transpose()
    }

    /// Resolves the document against `ov` into a runnable scenario.
    pub fn build(&self, ov: &Overrides) -> Result<ScenarioFile, ConfigError> {
        let plant = self.plant()?;
        let (n, m, p) = (plant.n(), plant.m(), plant.p());

        let x0 = match self.get("plant", "x0") {
            Some(e) => {
                let v =
                    parse_row(&e.value).map_err(|msg| ConfigError::new("plant", "x0", Origin::Line(e.line), msg))?;
                if v.len() != n {
                    return Err(ConfigError::new(
                        "plant",
                        "x0",
                        Origin::Line(e.line),
                        format!("has {} entries, plant has {n} states", v.len()),
                    ));
                }
                DVector::from_vec(v)
            }
            None => DVector::zeros(n),
        };

        let he = self.require("surface", "H")?;
        let h = parse_inline_matrix(&he.value)
            .map_err(|msg| ConfigError::new("surface", "H", Origin::Line(he.line), msg))?;
        if h.shape() != (m, p) {
            return Err(ConfigError::new(
                "surface",
                "H",
                Origin::Line(he.line),
                format!("is {}×{}, expected {m}×{p} (inputs × outputs)", h.nrows(), h.ncols()),
            ));
        }

        let controller = match ov.controller {
            Some(k) => k,
            None => {
                let e = self.require("controller", "kind")?;
                e.value.parse().map_err(|err: qsmc_core::Error| {
                    ConfigError::new("controller", "kind", Origin::Line(e.line), err.to_string())
                })?
            }
        };

        let (period, period_origin) = match ov.period {
            Some(t) => (t, Origin::CommandLine),
            None => self
                .number("timing", "T")?
                .ok_or_else(|| ConfigError::new("timing", "T", Origin::Default, "missing required key"))?,
        };
        if !(period > 0.0 && period.is_finite()) {
            return Err(ConfigError::new("timing", "T", period_origin, format!("must be positive, got {period}")));
        }

        // flags for either parameter replace both file values
        let (alpha, beta, origin) = if ov.alpha.is_some() || ov.beta.is_some() {
            (ov.alpha, ov.beta, Origin::CommandLine)
        } else {
            let a = self.number("controller", "alpha")?;
            let b = self.number("controller", "beta")?;
            let origin = a.or(b).map(|x| x.1).unwrap_or(Origin::Default);
            (a.map(|x| x.0), b.map(|x| x.0), origin)
        };
        let resolved_alpha = if controller.is_deadbeat() && alpha.is_none() && beta.is_none() {
            0.0
        } else {
            let key = if alpha.is_some() { "alpha" } else { "beta" };
            resolve_alpha(alpha, beta, period)
                .map_err(|e| ConfigError::new("controller", key, origin, strip_prefix(&e.to_string())))?
        };

        let (horizon, horizon_origin) = match ov.horizon {
            Some(h) => (h, Origin::CommandLine),
            None => self
                .number("timing", "horizon")?
                .ok_or_else(|| ConfigError::new("timing", "horizon", Origin::Default, "missing required key"))?,
        };
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(ConfigError::new(
                "timing",
                "horizon",
                horizon_origin,
                format!("must be positive, got {horizon}"),
            ));
        }
        if horizon < period {
            return Err(ConfigError::new("timing", "horizon", horizon_origin, "is shorter than one sampling period"));
        }

        let substeps = match self.get("timing", "substeps") {
            Some(e) => e.value.parse::<usize>().ok().filter(|&s| s >= 1).ok_or_else(|| {
                ConfigError::new("timing", "substeps", Origin::Line(e.line), "must be a positive integer")
            })?,
            None => 1,
        };

        let window = match self.get("timing", "window") {
            Some(e) => {
                let v = parse_row(&e.value)
                    .map_err(|msg| ConfigError::new("timing", "window", Origin::Line(e.line), msg))?;
                match v[..] {
                    [a, b] if a >= 0.0 && a < b => (a, b),
                    _ => {
                        return Err(ConfigError::new(
                            "timing",
                            "window",
                            Origin::Line(e.line),
                            "must be two times 0 ≤ t0 < t1",
                        ))
                    }
                }
            }
            None => (0.8 * horizon, horizon),
        };

        let disturbance = self.disturbance(m)?;
        if disturbance.horizon() < horizon {
            return Err(ConfigError::new(
                "disturbance",
                "segment",
                self.segments.last().map(|e| Origin::Line(e.line)).unwrap_or(Origin::Default),
                format!("segments end at {} but the horizon is {horizon}", disturbance.horizon()),
            ));
        }

        let noise = self.noise(ov)?;
        let outputs = self.outputs(ov)?;

        let scenario = Scenario {
            plant,
            disturbance,
            noise,
            h,
            controller,
            alpha: resolved_alpha,
            period,
            horizon,
            x0,
            substeps,
            record_intersample: substeps > 1,
            form: Default::default(),
        };
        Ok(ScenarioFile { name: self.name.clone(), scenario, beta, window, outputs })
    }

    fn plant(&self) -> Result<ContinuousPlant, ConfigError> {
        if let Some(e) = self.get("plant", "file") {
            for key in ["A", "B", "C"] {
                if let Some(other) = self.get("plant", key) {
                    return Err(ConfigError::new(
                        "plant",
                        key,
                        Origin::Line(other.line),
                        "inline matrices cannot be combined with `file`",
                    ));
                }
            }
            let path = self.base_dir.join(&e.value);
            let text = std::fs::read_to_string(&path).map_err(|err| {
                ConfigError::new(
                    "plant",
                    "file",
                    Origin::Line(e.line),
                    format!("cannot read {}: {err}", path.display()),
                )
            })?;
            return parse_plant(&text).map_err(|err| {
                ConfigError::new("plant", "file", Origin::Line(e.line), format!("{}: {err}", path.display()))
            });
        }
        let mut mats = Vec::with_capacity(3);
        for key in ["A", "B", "C"] {
            let e = self.require("plant", key)?;
            mats.push(
                parse_inline_matrix(&e.value)
                    .map_err(|msg| ConfigError::new("plant", key, Origin::Line(e.line), msg))?,
            );
        }
        let c = mats.pop().expect("three matrices");
        let b = mats.pop().expect("three matrices");
        let a = mats.pop().expect("three matrices");
        ContinuousPlant::new(a, b, c).map_err(|err| {
            let line = self.get("plant", "A").map(|e| Origin::Line(e.line)).unwrap_or(Origin::Default);
            ConfigError::new("plant", "A", line, strip_prefix(&err.to_string()))
        })
    }

    fn disturbance(&self, m: usize) -> Result<DisturbanceSignal, ConfigError> {
        if self.segments.is_empty() {
            return Ok(DisturbanceSignal::zero(m));
        }
        let mut segments = Vec::with_capacity(self.segments.len());
        for e in &self.segments {
            let err = |msg: String| ConfigError::new("disturbance", "segment", Origin::Line(e.line), msg);
            let (span, forms) =
                e.value.split_once(':').ok_or_else(|| err("expected `start end : channel …`".into()))?;
            let bounds = parse_row(span).map_err(err)?;
            let [start, end] = bounds[..] else {
                return Err(err(format!("expected a start and an end time, got {} values", bounds.len())));
            };
            let channels =
                split_forms(forms).iter().map(|f| parse_form(f)).collect::<Result<Vec<_>, _>>().map_err(err)?;
            if channels.len() != m {
                return Err(err(format!("has {} channels, plant has {m} inputs", channels.len())));
            }
            segments.push(Segment::new(start, end, channels));
        }
        DisturbanceSignal::new(m, segments).map_err(|err| {
            ConfigError::new(
                "disturbance",
                "segment",
                Origin::Line(self.segments[0].line),
                strip_prefix(&err.to_string()),
            )
        })
    }

    fn noise(&self, ov: &Overrides) -> Result<NoiseSpec, ConfigError> {
        let seed = match (ov.seed, self.get("noise", "seed")) {
            (Some(s), _) => s,
            (None, Some(e)) => e.value.parse::<u64>().map_err(|_| {
                ConfigError::new("noise", "seed", Origin::Line(e.line), "must be a non-negative integer")
            })?,
            (None, None) => 1,
        };
        if let Some(hw) = ov.noise {
            if !(hw >= 0.0 && hw.is_finite()) {
                return Err(ConfigError::new("noise", "half_width", Origin::CommandLine, "must be non-negative"));
            }
            return Ok(if hw == 0.0 { NoiseSpec::none() } else { NoiseSpec::uniform(hw, seed) });
        }
        let kind = self.get("noise", "kind").map(|e| (e.value.as_str(), e.line));
        match kind {
            None | Some(("none", _)) => Ok(NoiseSpec::none()),
            Some(("uniform", line)) => {
                let (hw, origin) = self.number("noise", "half_width")?.ok_or_else(|| {
                    ConfigError::new("noise", "half_width", Origin::Line(line), "required for uniform noise")
                })?;
                if !(hw > 0.0 && hw.is_finite()) {
                    return Err(ConfigError::new("noise", "half_width", origin, "must be positive"));
                }
                Ok(NoiseSpec::uniform(hw, seed))
            }
            Some((other, line)) => Err(ConfigError::new(
                "noise",
                "kind",
                Origin::Line(line),
                format!("unknown noise kind `{other}` (expected none, uniform)"),
            )),
        }
    }

    fn outputs(&self, ov: &Overrides) -> Result<Outputs, ConfigError> {
        let dir = match (&ov.out, self.get("outputs", "dir")) {
            (Some(d), _) => d.clone(),
            (None, Some(e)) => PathBuf::from(&e.value),
            (None, None) => PathBuf::from("qsmc-out"),
        };
        let mut formats = match self.get("outputs", "formats") {
            Some(e) => e
                .value
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| match s {
                    "csv" => Ok(Format::Csv),
                    "summary" => Ok(Format::Summary),
                    "svg" => Ok(Format::Svg),
                    other => Err(ConfigError::new(
                        "outputs",
                        "formats",
                        Origin::Line(e.line),
                        format!("unknown format `{other}` (expected csv, summary, svg)"),
                    )),
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => vec![Format::Csv, Format::Summary],
        };
        if ov.plot && !formats.contains(&Format::Svg) {
            formats.push(Format::Svg);
        }
        Ok(Outputs { dir, formats })
    }
}

fn known_key(section: &str, key: &str) -> bool {
    let keys: &[&str] = match section {
        "plant" => &["A", "B", "C", "file", "x0"],
        "surface" => &["H"],
        "controller" => &["kind", "alpha", "beta"],
        "timing" => &["T", "horizon", "substeps", "window"],
        "disturbance" => &["segment"],
        "noise" => &["kind", "half_width", "seed"],
        "outputs" => &["dir", "formats"],
        _ => &[],
    };
    keys.contains(&key)
}

/// Drops the "configuration error: " style prefix of a core error message.
fn strip_prefix(msg: &str) -> String {
    match msg.split_once(": ") {
        Some((head, tail)) if !head.contains(' ') || head.ends_with("error") || head.ends_with("mismatch") => {
            tail.into()
        }
        _ => msg.into(),
    }
}

pub fn parse_number(tok: &str) -> Result<f64, String> {
    let t = tok.trim();
    let bad = || format!("cannot parse `{t}` as a number");
    match t {
        "inf" | "+inf" => return Ok(f64::INFINITY),
        "-inf" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    if let Some(coef) = t.strip_suffix("pi") {
        let c = match coef.trim_end_matches('*') {
            "" | "+" => 1.0,
            "-" => -1.0,
            s => s.parse::<f64>().map_err(|_| bad())?,
        };
        return Ok(c * std::f64::consts::PI);
    }
    let v = t.parse::<f64>().map_err(|_| bad())?;
    if v.is_nan() {
        return Err(bad());
    }
    Ok(v)
}

fn parse_row(text: &str) -> Result<Vec<f64>, String> {
    let v = text.split_whitespace().map(parse_number).collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("empty value".into());
    }
    Ok(v)
}

/// `a b; c d` → 2×2, row-major.
pub fn parse_inline_matrix(text: &str) -> Result<DMatrix<f64>, String> {
    let rows = text.split(';').map(parse_row).collect::<Result<Vec<_>, _>>()?;
    let ncols = rows[0].len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(format!("row {} has {} entries, row 1 has {ncols}", i + 1, r.len()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Splits on whitespace outside parentheses.
fn split_forms(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            _ => {}
        }
        if c.is_whitespace() && depth == 0 {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else if !c.is_whitespace() {
            cur.push(c);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// `zero`, a bare number, `const(c)`, `ramp(offset, slope)`,
/// `sin(offset, amplitude, omega, phase)` or `cos(…)`.
fn parse_form(tok: &str) -> Result<ChannelForm, String> {
    if tok == "zero" {
        return Ok(ChannelForm::Zero);
    }
    let Some((name, rest)) = tok.split_once('(') else {
        return parse_number(tok).map(ChannelForm::Constant);
    };
    let args = rest.strip_suffix(')').ok_or_else(|| format!("missing `)` in `{tok}`"))?;
    let args = args.split(',').map(parse_number).collect::<Result<Vec<_>, _>>()?;
    let arity = |k: usize| {
        if args.len() == k {
            Ok(())
        } else {
            Err(format!("`{name}` takes {k} arguments, got {}", args.len()))
        }
    };
    match name {
        "const" => {
            arity(1)?;
            Ok(ChannelForm::Constant(args[0]))
        }
        "ramp" => {
            arity(2)?;
            Ok(ChannelForm::Ramp { offset: args[0], slope: args[1] })
        }
        "sin" => {
            arity(4)?;
            Ok(ChannelForm::Sine { offset: args[0], amplitude: args[1], omega: args[2], phase: args[3] })
        }
        "cos" => {
            arity(4)?;
            Ok(ChannelForm::Cosine { offset: args[0], amplitude: args[1], omega: args[2], phase: args[3] })
        }
        other => Err(format!("unknown channel form `{other}` (expected zero, const, ramp, sin, cos)")),
    }
}
