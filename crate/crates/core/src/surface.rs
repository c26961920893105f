//! Output switching function `s = HCx` and the normal-form coordinates
//! `[ξ; s] = P₁x` with `P₁ = [M; HC]`, `MB = 0`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::discretization::{discretize, DiscretePlant};
use crate::error::{Error, Result};
use crate::linalg;
use crate::plant::ContinuousPlant;

/// Matrices above this condition number are treated as singular.
pub const COND_LIMIT: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct SurfaceDesign {
    pub period: f64,
    pub h: DMatrix<f64>,
    /// `HC`
    pub hc: DMatrix<f64>,
    /// Rows span null(Bᵀ).
    pub m: DMatrix<f64>,
    pub p1: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// `HCĀQ`
    pub omega1: DMatrix<f64>,
    /// `HCĀR`
    pub omega2: DMatrix<f64>,
    /// `MAQ`: reduced-order (sliding) dynamics.
    pub a_c: DMatrix<f64>,
    /// `I + T·MĀQ`
    pub a_s: DMatrix<f64>,
    /// `MĀR`
    pub m_abar_r: DMatrix<f64>,
    /// `MB̄̄`
    pub m_bbbar: DMatrix<f64>,
    pub hcb: DMatrix<f64>,
    /// `HCB̄`
    pub hcb_bar: DMatrix<f64>,
    pub hcb_bar_cond: f64,
    pub a_c_eigenvalues: Vec<Complex64>,
}

impl SurfaceDesign {
    pub fn n(&self) -> usize {
        self.p1.nrows()
    }

    pub fn m_inputs(&self) -> usize {
        self.h.nrows()
    }

    /// All reduced-order eigenvalues in the open left half-plane.
    pub fn reduced_order_stable(&self) -> bool {
        self.a_c_eigenvalues.iter().all(|z| z.re < 0.0)
    }

    /// `(ξ, s) = (Mx, HCx)`.
    pub fn to_normal_coords(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (&self.m * x, &self.hc * x)
    }

    /// `x = Qξ + Rs`.
    pub fn from_normal_coords(&self, xi: &DVector<f64>, s: &DVector<f64>) -> DVector<f64> {
        &self.q * xi + &self.r * s
    }
}

fn invertible(mat: &DMatrix<f64>, scale: f64) -> (bool, f64) {
    let sv = linalg::singular_values(mat);
    let hi = sv.first().copied().unwrap_or(0.0);
    let lo = sv.last().copied().unwrap_or(0.0);
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    (lo > 1e-12 * scale && cond <= COND_LIMIT, cond)
}

/// Builds the surface with the canonical null-space basis of Bᵀ.
pub fn build_surface(plant: &ContinuousPlant, disc: &DiscretePlant, h: &DMatrix<f64>) -> Result<SurfaceDesign> {
    build_surface_with_basis(plant, disc, h, &linalg::left_null_basis(plant.b()))
}

/// Builds the surface with caller-supplied rows `M` (must satisfy `MB = 0`).
pub fn build_surface_with_basis(
    plant: &ContinuousPlant,
    disc: &DiscretePlant,
    h: &DMatrix<f64>,
    m_rows: &DMatrix<f64>,
) -> Result<SurfaceDesign> {
    let (n, m, p) = (plant.n(), plant.m(), plant.p());
    if h.shape() != (m, p) {
        return Err(Error::Dimension(format!("H must be {m}×{p}, got {}×{}", h.nrows(), h.ncols())));
    }
    if linalg::rank(h) < m {
        return Err(Error::InvalidArgument("H must have full row rank".into()));
    }
    if m_rows.shape() != (n - m, n) {
        return Err(Error::Dimension(format!("M must be {}×{n}, got {:?}", n - m, m_rows.shape())));
    }
    if (m_rows * plant.b()).norm() > 1e-12 * plant.b().norm() {
        return Err(Error::Construction("M does not annihilate B".into()));
    }
    let hc = h * plant.c();
    let hcb = &hc * plant.b();
    let (hcb_ok, hcb_cond) = invertible(&hcb, linalg::norm2(&hc) * linalg::norm2(plant.b()));
    if !hcb_ok {
        return Err(Error::AssumptionViolation(format!("HCB is singular (condition number {hcb_cond:e})")));
    }
    let hcb_bar = &hc * &disc.b_bar;
    let (bar_ok, hcb_bar_cond) = invertible(&hcb_bar, linalg::norm2(&hc) * linalg::norm2(&disc.b_bar));
    if !bar_ok {
        return Err(Error::AssumptionViolation(format!(
            "HCB̄ is singular at T = {} (condition number {hcb_bar_cond:e})",
            disc.period
        )));
    }

    let mut p1 = DMatrix::zeros(n, n);
    linalg::put(&mut p1, 0, 0, m_rows);
    linalg::put(&mut p1, n - m, 0, &hc);
    let p1_inv = linalg::inverse(&p1, "P1 = [M; HC]")?;
    let q = p1_inv.columns(0, n - m).into_owned();
    let r = p1_inv.columns(n - m, m).into_owned();

    let omega1 = &hc * &disc.a_bar * &q;
    let omega2 = &hc * &disc.a_bar * &r;
    let a_c = m_rows * plant.a() * &q;
    let a_s = DMatrix::<f64>::identity(n - m, n - m) + m_rows * &disc.a_bar * &q * disc.period;
    let m_abar_r = m_rows * &disc.a_bar * &r;
    let m_bbbar = m_rows * &disc.b_bbar;
    let a_c_eigenvalues = linalg::eigenvalues(&a_c);
    Ok(SurfaceDesign {
        period: disc.period,
        h: h.clone(),
        hc,
        m: m_rows.clone(),
        p1,
        q,
        r,
        omega1,
        omega2,
        a_c,
        a_s,
        m_abar_r,
        m_bbbar,
        hcb,
        hcb_bar,
        hcb_bar_cond,
        a_c_eigenvalues,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CertEntry {
    pub period: f64,
    pub certified: bool,
    pub condition_number: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertReport {
    pub hcb_condition_number: f64,
    pub hcb_invertible: bool,
    pub entries: Vec<CertEntry>,
    /// Largest listed period such that it and every smaller listed period are
    /// certified.
    pub largest_certified_period: Option<f64>,
}

impl CertReport {
    pub fn all_certified(&self) -> bool {
        self.hcb_invertible && self.entries.iter().all(|e| e.certified)
    }
}

/// Invertibility and conditioning of `HCB̄` for each period.
pub fn certify_surface_over_periods(plant: &ContinuousPlant, h: &DMatrix<f64>, periods: &[f64]) -> Result<CertReport> {
    if periods.is_empty() || periods.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument("period list must be non-empty and positive".into()));
    }
    let hc = h * plant.c();
    let (hcb_invertible, hcb_condition_number) =
        invertible(&(&hc * plant.b()), linalg::norm2(&hc) * linalg::norm2(plant.b()));
    let mut entries = Vec::with_capacity(periods.len());
    for &t in periods {
        let disc = discretize(plant, t)?;
        let (ok, cond) = invertible(&(&hc * &disc.b_bar), linalg::norm2(&hc) * linalg::norm2(&disc.b_bar));
        entries.push(CertEntry { period: t, certified: ok && hcb_invertible, condition_number: cond });
    }
    let mut sorted = entries.clone();
    sorted.sort_by(|a, b| a.period.total_cmp(&b.period));
    let largest_certified_period = sorted.iter().take_while(|e| e.certified).last().map(|e| e.period);
    Ok(CertReport { hcb_condition_number, hcb_invertible, entries, largest_certified_period })
}
