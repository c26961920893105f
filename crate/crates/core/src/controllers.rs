//! Discrete-time output-feedback sliding mode control laws.
//!
//! The `s` dynamics of the sampled plant read
//! `s[k+1] = (I + TΩ₂)s[k] + T·HCB̄·u[k] + g[k]` with an unknown lumped term
//! `g[k]`. Every law here targets `s[k+1] = α·s[k]`:
//!
//! * `Eq`: the equivalent control with the true `g[k]` (needs an oracle).
//! * `Mm1`: `g[k]` replaced by the reconstructed `g[k−1]`.
//! * `Mm2`: `g[k]` replaced by the extrapolation `2g[k−1] − g[k−2]`.
//! * `M1`, `M2`: the deadbeat (`α = 0`) instances of `Mm1` and `Mm2`.
//!
//! With `α = 1 − βT` and fixed `β` the proposed laws stay O(1) in `T`, while
//! the deadbeat baselines scale as O(1/T) during transients.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::surface::SurfaceDesign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Eq,
    M1,
    M2,
    Mm1,
    Mm2,
}

impl ControllerKind {
    pub const ONLINE: [ControllerKind; 4] =
        [ControllerKind::M1, ControllerKind::M2, ControllerKind::Mm1, ControllerKind::Mm2];

    /// Number of past samples the law needs; `u = 0` until then.
    pub fn warmup(self) -> usize {
        match self {
            ControllerKind::Eq => 0,
            ControllerKind::M1 | ControllerKind::Mm1 => 1,
            ControllerKind::M2 | ControllerKind::Mm2 => 2,
        }
    }

    /// Deadbeat baselines ignore the supplied α.
    pub fn is_deadbeat(self) -> bool {
        matches!(self, ControllerKind::M1 | ControllerKind::M2)
    }

    pub fn effective_alpha(self, alpha: f64) -> f64 {
        if self.is_deadbeat() {
            0.0
        } else {
            alpha
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Eq => "eq",
            ControllerKind::M1 => "m1",
            ControllerKind::M2 => "m2",
            ControllerKind::Mm1 => "mm1",
            ControllerKind::Mm2 => "mm2",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eq" => Ok(ControllerKind::Eq),
            "m1" => Ok(ControllerKind::M1),
            "m2" => Ok(ControllerKind::M2),
            "mm1" => Ok(ControllerKind::Mm1),
            "mm2" => Ok(ControllerKind::Mm2),
            other => Err(Error::Config(format!("unknown controller `{other}` (expected eq, m1, m2, mm1, mm2)"))),
        }
    }
}

/// Resolves the contraction factor from α and/or β. When both are given they
/// must satisfy `1 − α = βT` to 1e−12. The result must lie in (0, 1).
pub fn resolve_alpha(alpha: Option<f64>, beta: Option<f64>, period: f64) -> Result<f64> {
    let alpha = match (alpha, beta) {
        (Some(a), Some(b)) => {
            if ((1.0 - a) - b * period).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "alpha = {a} and beta = {b} are inconsistent at T = {period}: 1 − alpha = {} but beta·T = {}",
                    1.0 - a,
                    b * period
                )));
            }
            a
        }
        (Some(a), None) => a,
        (None, Some(b)) => 1.0 - b * period,
        (None, None) => return Err(Error::Config("either alpha or beta must be given".into())),
    };
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(alpha)
}

#[derive(Debug, Clone)]
pub struct GainSet {
    pub alpha: f64,
    /// `(1 − α)/T`
    pub beta: f64,
    pub period: f64,
    /// `(HCB̄)⁻¹`
    pub k: DMatrix<f64>,
    pub hcb_bar: DMatrix<f64>,
    pub omega1: DMatrix<f64>,
    pub omega2: DMatrix<f64>,
}

impl GainSet {
    /// Gains for contraction factor `alpha ∈ [0, 1)`; `0` is the deadbeat case.
    pub fn new(design: &SurfaceDesign, alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1), got {alpha}")));
        }
        let k = linalg::inverse(&design.hcb_bar, "HCB̄")?;
        Ok(Self {
            alpha,
            beta: (1.0 - alpha) / design.period,
            period: design.period,
            k,
            hcb_bar: design.hcb_bar.clone(),
            omega1: design.omega1.clone(),
            omega2: design.omega2.clone(),
        })
    }

    pub fn for_kind(design: &SurfaceDesign, kind: ControllerKind, alpha: f64) -> Result<Self> {
        Self::new(design, kind.effective_alpha(alpha))
    }

    pub fn m(&self) -> usize {
        self.k.nrows()
    }

    /// `c·I + T·Ω₂·w`
    fn shifted(&self, c: f64, w: f64) -> DMatrix<f64> {
        DMatrix::<f64>::identity(self.m(), self.m()) * c + &self.omega2 * (self.period * w)
    }
}

/// `u = −(1/T)·K·(((1 − α)I + TΩ₂)s[k] + g)`. With the true `g[k]` this
/// places `s[k+1]` exactly at `α·s[k]`.
pub fn equivalent_control(gains: &GainSet, s_k: &DVector<f64>, g_k: &DVector<f64>) -> DVector<f64> {
    let inner = gains.shifted(1.0 - gains.alpha, 1.0) * s_k + g_k;
    -(&gains.k * inner) / gains.period
}

/// `g[k−1] = s[k] − (I + TΩ₂)s[k−1] − T·HCB̄·u[k−1]`, exact from the `s`
/// dynamics.
pub fn reconstruct_g_prev(
    gains: &GainSet,
    s_k: &DVector<f64>,
    s_km1: &DVector<f64>,
    u_km1: &DVector<f64>,
) -> DVector<f64> {
    s_k - gains.shifted(1.0, 1.0) * s_km1 - &gains.hcb_bar * u_km1 * gains.period
}

/// One-step-delayed law in recursive form:
/// `u[k] = −(1/T)K(((2 − α)I + TΩ₂)s[k] − (I + TΩ₂)s[k−1]) + u[k−1]`.
pub fn first_order_law(
    gains: &GainSet,
    s_k: &DVector<f64>,
    s_km1: &DVector<f64>,
    u_km1: &DVector<f64>,
) -> DVector<f64> {
    let inner = gains.shifted(2.0 - gains.alpha, 1.0) * s_k - gains.shifted(1.0, 1.0) * s_km1;
    -(&gains.k * inner) / gains.period + u_km1
}

/// Linear-extrapolation law in recursive form:
/// `u[k] = −(1/T)K(((3 − α)I + TΩ₂)s[k] − (3I + 2TΩ₂)s[k−1] + (I + TΩ₂)s[k−2])
///         + 2u[k−1] − u[k−2]`.
pub fn second_order_law(
    gains: &GainSet,
    s_k: &DVector<f64>,
    s_km1: &DVector<f64>,
    s_km2: &DVector<f64>,
    u_km1: &DVector<f64>,
    u_km2: &DVector<f64>,
) -> DVector<f64> {
    let inner =
        gains.shifted(3.0 - gains.alpha, 1.0) * s_k - gains.shifted(3.0, 2.0) * s_km1 + gains.shifted(1.0, 1.0) * s_km2;
    -(&gains.k * inner) / gains.period + u_km1 * 2.0 - u_km2
}

/// Which of the two algebraically equivalent realizations to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlForm {
    /// Recursions in `s` and past `u`.
    #[default]
    Recursive,
    /// Reconstruct `g`, extrapolate, then apply [`equivalent_control`].
    EstimateThenControl,
}

/// Controller memory for one closed-loop run.
///
/// Only sliding-variable samples go in; the plant state is never visible here.
#[derive(Debug, Clone)]
pub struct ControllerState {
    kind: ControllerKind,
    form: ControlForm,
    gains: GainSet,
    s_hist: [Option<DVector<f64>>; 2],
    u_hist: [DVector<f64>; 2],
    step: usize,
}

impl ControllerState {
    pub fn new(kind: ControllerKind, gains: GainSet) -> Self {
        Self::with_form(kind, gains, ControlForm::Recursive)
    }

    pub fn with_form(kind: ControllerKind, gains: GainSet, form: ControlForm) -> Self {
        let m = gains.m();
        Self { kind, form, gains, s_hist: [None, None], u_hist: [DVector::zeros(m), DVector::zeros(m)], step: 0 }
    }

    pub fn kind(&self) -> ControllerKind {
        self.kind
    }

    pub fn gains(&self) -> &GainSet {
        &self.gains
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    /// Control for the next sample from the observed `s[k]`. The `Eq` law
    /// cannot run online; use [`ControllerState::step_with_oracle`].
    pub fn step(&mut self, s_k: &DVector<f64>) -> Result<DVector<f64>> {
        let u = match self.kind {
            ControllerKind::Eq => {
                return Err(Error::InvalidArgument("the equivalent control needs the true g[k]".into()));
            }
            _ if self.step < self.kind.warmup() => DVector::zeros(self.gains.m()),
            ControllerKind::M1 | ControllerKind::Mm1 => self.first_order(s_k),
            ControllerKind::M2 | ControllerKind::Mm2 => self.second_order(s_k),
        };
        self.push(s_k, &u);
        Ok(u)
    }

    /// Equivalent control with the true lumped term supplied externally.
    pub fn step_with_oracle(&mut self, s_k: &DVector<f64>, g_k: &DVector<f64>) -> DVector<f64> {
        let u = equivalent_control(&self.gains, s_k, g_k);
        self.push(s_k, &u);
        u
    }

    fn first_order(&self, s_k: &DVector<f64>) -> DVector<f64> {
        let s1 = self.s_hist[0].as_ref().expect("warmup guarantees history");
        match self.form {
            ControlForm::Recursive => first_order_law(&self.gains, s_k, s1, &self.u_hist[0]),
            ControlForm::EstimateThenControl => {
                let g1 = reconstruct_g_prev(&self.gains, s_k, s1, &self.u_hist[0]);
                equivalent_control(&self.gains, s_k, &g1)
            }
        }
    }

    fn second_order(&self, s_k: &DVector<f64>) -> DVector<f64> {
        let s1 = self.s_hist[0].as_ref().expect("warmup guarantees history");
        let s2 = self.s_hist[1].as_ref().expect("warmup guarantees history");
        match self.form {
            ControlForm::Recursive => second_order_law(&self.gains, s_k, s1, s2, &self.u_hist[0], &self.u_hist[1]),
            ControlForm::EstimateThenControl => {
                let g1 = reconstruct_g_prev(&self.gains, s_k, s1, &self.u_hist[0]);
                let g2 = reconstruct_g_prev(&self.gains, s1, s2, &self.u_hist[1]);
                equivalent_control(&self.gains, s_k, &(g1 * 2.0 - g2))
            }
        }
    }

    fn push(&mut self, s_k: &DVector<f64>, u: &DVector<f64>) {
        self.s_hist.swap(0, 1);
        self.s_hist[0] = Some(s_k.clone());
        self.u_hist.swap(0, 1);
        self.u_hist[0] = u.clone();
        self.step += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark;
    use crate::discretization::discretize;
    use crate::surface::build_surface;
    use proptest::prelude::*;

    fn aircraft_gains(alpha: f64) -> GainSet {
        let plant = benchmark::aircraft_plant();
        let disc = discretize(&plant, 0.01).unwrap();
        let design = build_surface(&plant, &disc, &benchmark::aircraft_h()).unwrap();
        GainSet::new(&design, alpha).unwrap()
    }

    fn v2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn gain_invariants() {
        let g = aircraft_gains(0.97);
        assert!(((1.0 - g.alpha) - g.beta * g.period).abs() < 1e-14);
        assert!((&g.k * &g.hcb_bar - DMatrix::<f64>::identity(2, 2)).norm() < 1e-10);
        assert!((g.beta - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_inputs_give_zero_control() {
        let g = aircraft_gains(0.97);
        let z = DVector::zeros(2);
        assert_eq!(equivalent_control(&g, &z, &z), z);
        assert_eq!(first_order_law(&g, &z, &z, &z), z);
        assert_eq!(second_order_law(&g, &z, &z, &z, &z, &z), z);
    }

    #[test]
    fn deadbeat_equivalent_control() {
        let g = aircraft_gains(0.0);
        let s = v2(0.3, -0.2);
        let gk = v2(0.01, 0.02);
        let expect = -(&g.k * ((DMatrix::<f64>::identity(2, 2) + &g.omega2 * g.period) * &s + &gk)) / g.period;
        assert!((equivalent_control(&g, &s, &gk) - expect).norm() < 1e-12);
    }

    #[test]
    fn reconstruction_is_zero_without_drive() {
        // s[k] generated with g = 0 from s[k−1], u[k−1]
        let g = aircraft_gains(0.97);
        let s1 = v2(0.4, -1.0);
        let u1 = v2(0.2, 0.1);
        let s = (DMatrix::<f64>::identity(2, 2) + &g.omega2 * g.period) * &s1 + &g.hcb_bar * &u1 * g.period;
        assert!(reconstruct_g_prev(&g, &s, &s1, &u1).norm() < 1e-12);
    }

    #[test]
    fn warmup_and_history() {
        let g = aircraft_gains(0.97);
        let mut c = ControllerState::new(ControllerKind::Mm2, g.clone());
        let s = v2(1.0, 1.0);
        assert_eq!(c.step(&s).unwrap(), DVector::zeros(2));
        assert_eq!(c.step(&s).unwrap(), DVector::zeros(2));
        assert_ne!(c.step(&s).unwrap(), DVector::zeros(2));

        let mut c = ControllerState::new(ControllerKind::M1, g.clone());
        assert_eq!(c.step(&s).unwrap(), DVector::zeros(2));
        assert_ne!(c.step(&s).unwrap(), DVector::zeros(2));
        assert_eq!(c.gains().alpha, g.alpha, "state keeps the gains it was given");
    }

    #[test]
    fn eq_needs_oracle() {
        let mut c = ControllerState::new(ControllerKind::Eq, aircraft_gains(0.97));
        assert!(c.step(&v2(0.0, 0.0)).is_err());
    }

    #[test]
    fn alpha_resolution() {
        assert!((resolve_alpha(None, Some(3.0), 0.01).unwrap() - 0.97).abs() < 1e-15);
        assert!(resolve_alpha(Some(0.97), Some(3.0), 0.01).is_ok());
        assert!(matches!(resolve_alpha(Some(0.9), Some(3.0), 0.01), Err(Error::Config(_))));
        assert!(matches!(resolve_alpha(Some(1.2), None, 0.01), Err(Error::Config(_))));
        assert!(matches!(resolve_alpha(None, Some(200.0), 0.01), Err(Error::Config(_))));
        assert!(matches!(resolve_alpha(None, None, 0.01), Err(Error::Config(_))));
    }

    #[test]
    fn kind_parsing() {
        for k in [ControllerKind::Eq, ControllerKind::M1, ControllerKind::M2, ControllerKind::Mm1, ControllerKind::Mm2]
        {
            assert_eq!(k.name().parse::<ControllerKind>().unwrap(), k);
        }
        assert!("pid".parse::<ControllerKind>().is_err());
    }

    fn vec2() -> impl Strategy<Value = DVector<f64>> {
        (-5.0f64..5.0, -5.0f64..5.0).prop_map(|(a, b)| v2(a, b))
    }

    proptest! {
        #[test]
        fn first_order_forms_agree(alpha in 0.0f64..0.999, s in vec2(), s1 in vec2(), u1 in vec2()) {
            let g = aircraft_gains(alpha);
            let direct = first_order_law(&g, &s, &s1, &u1);
            let via = equivalent_control(&g, &s, &reconstruct_g_prev(&g, &s, &s1, &u1));
            prop_assert!((direct - via).norm() < 1e-12 * (1.0 + u1.norm()) / g.period);
        }

        #[test]
        fn second_order_forms_agree(alpha in 0.0f64..0.999, s in vec2(), s1 in vec2(), s2 in vec2(), u1 in vec2(), u2 in vec2()) {
            let g = aircraft_gains(alpha);
            let direct = second_order_law(&g, &s, &s1, &s2, &u1, &u2);
            let g1 = reconstruct_g_prev(&g, &s, &s1, &u1);
            let g2 = reconstruct_g_prev(&g, &s1, &s2, &u2);
            let via = equivalent_control(&g, &s, &(g1 * 2.0 - g2));
            prop_assert!((direct - via).norm() < 1e-12 * (1.0 + u1.norm() + u2.norm()) / g.period);
        }

        #[test]
        fn reconstruction_inverts_s_dynamics(s1 in vec2(), u1 in vec2(), gk in vec2()) {
            let g = aircraft_gains(0.97);
            let s = (DMatrix::<f64>::identity(2, 2) + &g.omega2 * g.period) * &s1 + &g.hcb_bar * &u1 * g.period + &gk;
            prop_assert!((reconstruct_g_prev(&g, &s, &s1, &u1) - gk).norm() < 1e-12);
        }
    }
}
