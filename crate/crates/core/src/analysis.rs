//! Augmented closed-loop matrices and their spectra.
//!
//! With `γ[k] = T·HCB̄·u[k]` the closed loop under the one-step-delayed law
//! is a linear recursion on `ψ = [ξ; s; γ]`, and under the extrapolating law
//! on `ψ = [ξ; s; s₁; γ; γ₁]` (`s₁ = s[k−1]`, `γ₁ = γ[k−1]`):
//!
//! ```text
//! ψ[k+1] = [[A_s, T·N_top], [T·N_bottom, A_e]]·ψ[k] + d_aug[k]
//! ```
//!
//! The error block `A_e` has characteristic polynomial `λᵐ(λ − α)ᵐ` for the
//! first law and `λ³ᵐ(λ − α)ᵐ` for the second, independent of `Ω₂` and `T`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::controllers::{ControllerKind, GainSet};
use crate::discretization::discretize;
use crate::error::{Error, Result};
use crate::linalg;
use crate::plant::{ContinuousPlant, NoiseKind};
use crate::simulator::{self, Scenario};
use crate::surface::{build_surface, SurfaceDesign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AugVariant {
    /// State `[ξ; s; γ]`, dimension `n + m`.
    FirstOrder,
    /// State `[ξ; s; s₁; γ; γ₁]`, dimension `n + 3m`.
    SecondOrder,
}

impl AugVariant {
    pub fn for_controller(kind: ControllerKind) -> Option<Self> {
        match kind {
            ControllerKind::M1 | ControllerKind::Mm1 => Some(AugVariant::FirstOrder),
            ControllerKind::M2 | ControllerKind::Mm2 => Some(AugVariant::SecondOrder),
            ControllerKind::Eq => None,
        }
    }

    /// Number of `m`-blocks in the error state.
    pub fn error_blocks(self) -> usize {
        match self {
            AugVariant::FirstOrder => 2,
            AugVariant::SecondOrder => 4,
        }
    }

    /// Expected multiplicity of the zero eigenvalue, in units of `m`.
    pub fn zero_multiplicity(self) -> usize {
        self.error_blocks() - 1
    }
}

#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    pub variant: AugVariant,
    pub period: f64,
    pub alpha: f64,
    /// Dimension of `ξ`.
    pub n_xi: usize,
    pub m: usize,
    pub a_aug: DMatrix<f64>,
    pub a_s: DMatrix<f64>,
    pub a_e: DMatrix<f64>,
    /// Coupling from the error state into `ξ` (without the factor `T`).
    pub n_top: DMatrix<f64>,
    /// Coupling from `ξ` into the error state (without the factor `T`).
    pub n_bottom: DMatrix<f64>,
    /// `(2 − α)I + TΩ₂` or `(3 − α)I + TΩ₂`: maps `d₁₂` into the `γ` row.
    gamma_drive: DMatrix<f64>,
}

impl AugmentedSystem {
    pub fn dim(&self) -> usize {
        self.a_aug.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.a_aug)
    }

    /// Disturbance vector from `d₁₁ = M·d[k]` and `d₁₂ = HC·d[k]`.
    pub fn disturbance(&self, d11: &DVector<f64>, d12: &DVector<f64>) -> DVector<f64> {
        let m = self.m;
        let mut d = DVector::zeros(self.dim());
        d.rows_mut(0, self.n_xi).copy_from(d11);
        d.rows_mut(self.n_xi, m).copy_from(d12);
        let gamma_row = match self.variant {
            AugVariant::FirstOrder => self.n_xi + m,
            AugVariant::SecondOrder => self.n_xi + 2 * m,
        };
        d.rows_mut(gamma_row, m).copy_from(&(-(&self.gamma_drive * d12)));
        d
    }

    /// Stacks `ξ`, `s`, `γ` histories into `ψ`. Slices hold the current value
    /// first.
    pub fn stack(&self, xi: &DVector<f64>, s: &[&DVector<f64>], gamma: &[&DVector<f64>]) -> DVector<f64> {
        let parts: Vec<&DVector<f64>> = match self.variant {
            AugVariant::FirstOrder => vec![xi, s[0], gamma[0]],
            AugVariant::SecondOrder => vec![xi, s[0], s[1], gamma[0], gamma[1]],
        };
        let mut psi = DVector::zeros(self.dim());
        let mut at = 0;
        for p in parts {
            psi.rows_mut(at, p.len()).copy_from(p);
            at += p.len();
        }
        psi
    }
}

/// The error block `A_e` for given `Ω₂`, `α`, `T`.
pub fn error_block(omega2: &DMatrix<f64>, alpha: f64, period: f64, variant: AugVariant) -> DMatrix<f64> {
    let m = omega2.nrows();
    let id = DMatrix::<f64>::identity(m, m);
    let s = &id + omega2 * period;
    let l = &id * (1.0 - alpha) + omega2 * period;
    let mut a = DMatrix::zeros(m * variant.error_blocks(), m * variant.error_blocks());
    match variant {
        AugVariant::FirstOrder => {
            linalg::put(&mut a, 0, 0, &s);
            linalg::put(&mut a, 0, m, &id);
            linalg::put(&mut a, m, 0, &(-(&l * &s)));
            linalg::put(&mut a, m, m, &(-&l));
        }
        AugVariant::SecondOrder => {
            // rows: s, s₁, γ, γ₁
            linalg::put(&mut a, 0, 0, &s);
            linalg::put(&mut a, 0, 2 * m, &id);
            linalg::put(&mut a, m, 0, &id);
            linalg::put(&mut a, 2 * m, 0, &(&id - &l * &s));
            linalg::put(&mut a, 2 * m, m, &(-&s));
            linalg::put(&mut a, 2 * m, 2 * m, &(-&l));
            linalg::put(&mut a, 2 * m, 3 * m, &(-&id));
            linalg::put(&mut a, 3 * m, 2 * m, &id);
        }
    }
    a
}

pub fn build_aug(design: &SurfaceDesign, gains: &GainSet, variant: AugVariant) -> Result<AugmentedSystem> {
    let t = design.period;
    if (gains.period - t).abs() > 1e-15 * t.max(1.0) {
        return Err(Error::Construction(format!(
            "design sampled at T = {t} but gains computed for T = {}",
            gains.period
        )));
    }
    let m = design.m_inputs();
    if gains.m() != m || design.omega1.nrows() != m {
        return Err(Error::Construction(format!("gains are for {} inputs, design has {m}", gains.m())));
    }
    let n_xi = design.a_s.nrows();
    let id = DMatrix::<f64>::identity(m, m);
    let a_e = error_block(&design.omega2, gains.alpha, t, variant);
    let lead = match variant {
        AugVariant::FirstOrder => 2.0,
        AugVariant::SecondOrder => 3.0,
    };
    let gamma_drive = &id * (lead - gains.alpha) + &design.omega2 * t;
    // since MB = 0, T·M·B̄·u = T·MB̄̄·K·γ
    let m_bbbar_k = &design.m_bbbar * &gains.k;

    let blocks = variant.error_blocks();
    let mut n_top = DMatrix::zeros(n_xi, blocks * m);
    let mut n_bottom = DMatrix::zeros(blocks * m, n_xi);
    linalg::put(&mut n_top, 0, 0, &design.m_abar_r);
    linalg::put(&mut n_bottom, 0, 0, &design.omega1);
    let gamma_col = match variant {
        AugVariant::FirstOrder => m,
        AugVariant::SecondOrder => 2 * m,
    };
    linalg::put(&mut n_top, 0, gamma_col, &m_bbbar_k);
    linalg::put(&mut n_bottom, gamma_col, 0, &(-(&gamma_drive * &design.omega1)));

    let dim = n_xi + blocks * m;
    let mut a_aug = DMatrix::zeros(dim, dim);
    linalg::put(&mut a_aug, 0, 0, &design.a_s);
    linalg::put(&mut a_aug, 0, n_xi, &(&n_top * t));
    linalg::put(&mut a_aug, n_xi, 0, &(&n_bottom * t));
    linalg::put(&mut a_aug, n_xi, n_xi, &a_e);

    Ok(AugmentedSystem {
        variant,
        period: t,
        alpha: gains.alpha,
        n_xi,
        m,
        a_aug,
        a_s: design.a_s.clone(),
        a_e,
        n_top,
        n_bottom,
        gamma_drive,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub variant: AugVariant,
    pub m: usize,
    pub alpha: f64,
    pub period: f64,
    /// Characteristic polynomial of `A_e`, highest degree first.
    pub computed_poly: Vec<f64>,
    pub expected_poly: Vec<f64>,
    /// `max |cᵢ − eᵢ| / (1 + max |eᵢ|)`
    pub coefficient_error: f64,
    /// Raw eigensolver distance to the expected multiset; large when the zero
    /// eigenvalue is defective.
    pub eigenvalue_distance: f64,
    /// Distance between the means of the eigenvalue clusters at `α` and `0`
    /// and their expected locations.
    pub cluster_mean_distance: f64,
    pub passed: bool,
}

/// Coefficient tolerance for the characteristic polynomial check.
pub const SPECTRUM_TOL: f64 = 1e-8;

/// Checks `A_e` has spectrum `{α ×m, 0 ×(b−1)m}` via its characteristic
/// polynomial.
pub fn verify_error_spectrum(omega2: &DMatrix<f64>, alpha: f64, period: f64, variant: AugVariant) -> SpectrumReport {
    let m = omega2.nrows();
    let a_e = error_block(omega2, alpha, period, variant);
    let computed = linalg::char_poly(&a_e);
    let zeros = variant.zero_multiplicity() * m;
    let mut roots = vec![alpha; m];
    roots.extend(std::iter::repeat(0.0).take(zeros));
    let expected = linalg::poly_from_roots(&roots);
    let scale = 1.0 + expected.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
    let coefficient_error = computed.iter().zip(&expected).map(|(c, e)| (c - e).abs()).fold(0.0, f64::max) / scale;

    let eigs = linalg::eigenvalues(&a_e);
    let expected_c: Vec<Complex64> = roots.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    let eigenvalue_distance = linalg::multiset_distance(&eigs, &expected_c);
    let cluster_mean_distance = cluster_mean_distance(&eigs, alpha, m);

    SpectrumReport {
        variant,
        m,
        alpha,
        period,
        computed_poly: computed,
        expected_poly: expected,
        coefficient_error,
        eigenvalue_distance,
        cluster_mean_distance,
        passed: coefficient_error <= SPECTRUM_TOL,
    }
}

pub fn verify_first_order_spectrum(omega2: &DMatrix<f64>, alpha: f64, period: f64) -> SpectrumReport {
    verify_error_spectrum(omega2, alpha, period, AugVariant::FirstOrder)
}

pub fn verify_second_order_spectrum(omega2: &DMatrix<f64>, alpha: f64, period: f64) -> SpectrumReport {
    verify_error_spectrum(omega2, alpha, period, AugVariant::SecondOrder)
}

/// The `m` eigenvalues nearest `α` form one cluster, the rest the zero
/// cluster. Cluster means are well conditioned even for defective
/// eigenvalues.
fn cluster_mean_distance(eigs: &[Complex64], alpha: f64, m: usize) -> f64 {
    let target = Complex64::new(alpha, 0.0);
    let mut sorted = eigs.to_vec();
    sorted.sort_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()));
    let (near, rest) = sorted.split_at(m.min(sorted.len()));
    let mean = |v: &[Complex64]| v.iter().sum::<Complex64>() / v.len().max(1) as f64;
    let d_alpha = (mean(near) - target).norm();
    let d_zero = if rest.is_empty() { 0.0 } else { mean(rest).norm() };
    d_alpha.max(d_zero)
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityEntry {
    pub period: f64,
    pub alpha: f64,
    pub rho_first_order: f64,
    pub rho_second_order: f64,
    /// Largest distance from an eigenvalue of `A_aug` to the nearest of
    /// `λ(A_s) ∪ λ(A_e)`; logged, not asserted.
    pub cluster_distance_first_order: f64,
    pub cluster_distance_second_order: f64,
    pub stable: bool,
    /// Set when the entry could not be evaluated (e.g. `α ∉ (0, 1)`).
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub beta: f64,
    pub entries: Vec<StabilityEntry>,
    pub largest_stable_period: Option<f64>,
}

impl StabilityReport {
    pub fn all_stable(&self) -> bool {
        self.entries.iter().all(|e| e.stable)
    }
}

/// Spectral radii of both augmented systems over `periods`, with `β` fixed
/// and `α = 1 − βT`. Entries are sorted by `T`.
pub fn stability_over_periods(
    plant: &ContinuousPlant,
    h: &DMatrix<f64>,
    beta: f64,
    periods: &[f64],
) -> Result<StabilityReport> {
    if periods.is_empty() || periods.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument("periods must be a non-empty list of positive values".into()));
    }
    let mut entries = periods.par_iter().map(|&t| stability_entry(plant, h, beta, t)).collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| a.period.total_cmp(&b.period));
    let largest_stable_period = entries
        .iter()
        .filter(|e| e.stable)
        .map(|e| e.period)
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))));
    Ok(StabilityReport { beta, entries, largest_stable_period })
}

fn stability_entry(plant: &ContinuousPlant, h: &DMatrix<f64>, beta: f64, period: f64) -> Result<StabilityEntry> {
    let alpha = 1.0 - beta * period;
    let unevaluated = |note: String| StabilityEntry {
        period,
        alpha,
        rho_first_order: f64::NAN,
        rho_second_order: f64::NAN,
        cluster_distance_first_order: f64::NAN,
        cluster_distance_second_order: f64::NAN,
        stable: false,
        note: Some(note),
    };
    if !(alpha > 0.0 && alpha < 1.0) {
        return Ok(unevaluated(format!("alpha = {alpha} outside (0, 1)")));
    }
    let disc = discretize(plant, period)?;
    let design = match build_surface(plant, &disc, h) {
        Ok(d) => d,
        Err(Error::AssumptionViolation(msg)) => return Ok(unevaluated(msg)),
        Err(e) => return Err(e),
    };
    let gains = GainSet::new(&design, alpha)?;
    let aug1 = build_aug(&design, &gains, AugVariant::FirstOrder)?;
    let aug2 = build_aug(&design, &gains, AugVariant::SecondOrder)?;
    let (rho1, rho2) = (aug1.spectral_radius(), aug2.spectral_radius());
    Ok(StabilityEntry {
        period,
        alpha,
        rho_first_order: rho1,
        rho_second_order: rho2,
        cluster_distance_first_order: block_cluster_distance(&aug1),
        cluster_distance_second_order: block_cluster_distance(&aug2),
        stable: rho1 < 1.0 && rho2 < 1.0,
        note: None,
    })
}

fn block_cluster_distance(aug: &AugmentedSystem) -> f64 {
    let mut reference = linalg::eigenvalues(&aug.a_s);
    reference.extend(std::iter::repeat(Complex64::new(aug.alpha, 0.0)).take(aug.m));
    reference.push(Complex64::new(0.0, 0.0));
    linalg::max_nearest_distance(&linalg::eigenvalues(&aug.a_aug), &reference)
}

#[derive(Debug, Clone, Serialize)]
pub struct AugComparison {
    pub variant: AugVariant,
    pub steps: usize,
    pub max_deviation: f64,
    pub max_state_norm: f64,
    /// `1e−8·(1 + max ‖ψ‖)`
    pub tolerance: f64,
    pub passed: bool,
}

/// Runs the scenario through the simulator and through the augmented
/// recursion, and compares `ψ` along the way. The scenario must be
/// noise-free and use a controller matching `variant`.
pub fn augmented_vs_direct(scenario: &Scenario, variant: AugVariant) -> Result<AugComparison> {
    if AugVariant::for_controller(scenario.controller) != Some(variant) {
        return Err(Error::InvalidArgument(format!(
            "controller {} does not match the {variant:?} augmented system",
            scenario.controller
        )));
    }
    if scenario.noise.kind != NoiseKind::None {
        return Err(Error::InvalidArgument("the augmented recursion models noise-free feedback".into()));
    }
    let prep = simulator::prepare(scenario)?;
    let traj = simulator::run_prepared(scenario, &prep)?;
    let aug = build_aug(&prep.design, &prep.gains, variant)?;
    let design = &prep.design;
    let gamma_of = |u: &DVector<f64>| &design.hcb_bar * u * scenario.period;

    // ψ along the direct run; the second-order recursion starts once the
    // law is active at k = 1, before that u is forced to zero
    let direct_psi = |k: usize| -> DVector<f64> {
        let r = &traj.records[k];
        let xi = &design.m * &r.x;
        let g0 = gamma_of(&r.u);
        match variant {
            AugVariant::FirstOrder => aug.stack(&xi, &[&r.s_true], &[&g0]),
            AugVariant::SecondOrder => {
                let p = &traj.records[k - 1];
                let g1 = gamma_of(&p.u);
                aug.stack(&xi, &[&r.s_true, &p.s_true], &[&g0, &g1])
            }
        }
    };
    let k0 = match variant {
        AugVariant::FirstOrder => 0,
        AugVariant::SecondOrder => 1,
    };
    let last = traj.records.len() - 1;
    let mut psi = direct_psi(k0);
    let mut max_dev: f64 = 0.0;
    let mut max_norm = psi.norm();
    for k in k0..last {
        let d = prep.sampler.sample(&scenario.disturbance, k)?;
        let d_aug = aug.disturbance(&(&design.m * &d), &(&design.hc * &d));
        psi = &aug.a_aug * &psi + d_aug;
        let direct = direct_psi(k + 1);
        max_dev = max_dev.max((&psi - &direct).amax());
        max_norm = max_norm.max(direct.norm());
    }
    let tolerance = 1e-8 * (1.0 + max_norm);
    Ok(AugComparison {
        variant,
        steps: last - k0,
        max_deviation: max_dev,
        max_state_norm: max_norm,
        tolerance,
        passed: max_dev <= tolerance,
    })
}
