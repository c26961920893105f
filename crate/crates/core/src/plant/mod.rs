//! Continuous-time plant `ẋ = Ax + B(u + f)`, `y = Cx`, its structural checks
//! and invariant zeros.

mod disturbance;
mod noise;
pub mod text;

pub use disturbance::{ChannelForm, DisturbanceSignal, Segment};
pub use noise::{NoiseKind, NoiseSpec, NoiseStream};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousPlant {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl ContinuousPlant {
    /// Builds a plant after checking that the matrix shapes agree. Structural
    /// requirements (ranks, `m ≤ p < n`) are reported by [`validate_plant`].
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Dimension(format!("A must be square and non-empty, got {}×{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::Dimension(format!("B must be {n}×m with m ≥ 1, got {}×{}", b.nrows(), b.ncols())));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::Dimension(format!("C must be p×{n} with p ≥ 1, got {}×{}", c.nrows(), c.ncols())));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    /// Output dimension.
    pub fn p(&self) -> usize {
        self.c.nrows()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub rank_b: usize,
    pub rank_c: usize,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Structural checks: `m ≤ p < n`, B full column rank, C full row rank.
/// Findings are collected rather than raised so batch runs can continue.
pub fn validate_plant(plant: &ContinuousPlant) -> ValidationReport {
    let (n, m, p) = (plant.n(), plant.m(), plant.p());
    let rank_b = linalg::rank(plant.b());
    let rank_c = linalg::rank(plant.c());
    let checks = vec![
        Check {
            name: "dimensions".into(),
            passed: m <= p && p < n,
            detail: format!("m = {m}, p = {p}, n = {n}; require m ≤ p < n"),
        },
        Check {
            name: "rank_b".into(),
            passed: rank_b == m,
            detail: format!("rank(B) = {rank_b}, require {m} (full column rank)"),
        },
        Check {
            name: "rank_c".into(),
            passed: rank_c == p,
            detail: format!("rank(C) = {rank_c}, require {p} (full row rank)"),
        },
    ];
    ValidationReport { rank_b, rank_c, checks }
}

/// Invariant zeros of `(A, B, C)`.
///
/// Uses an orthonormal basis of null(Bᵀ) computed from `B`; see
/// [`invariant_zeros_with_basis`] for supplying a different basis.
pub fn invariant_zeros(plant: &ContinuousPlant) -> Result<Vec<Complex64>> {
    let basis = linalg::left_null_basis(plant.b());
    invariant_zeros_with_basis(plant, &basis)
}

/// Invariant zeros given the rows `M` of an orthonormal basis of null(Bᵀ).
///
/// In the coordinates `(Mx, B_qᵀx)` the input only drives the second block.
/// Holding `y = 0` forces the actuated block onto a linear function of the
/// unactuated one, leaving reduced dynamics `Ã` subject to an output
/// constraint `C₁₁ z = 0`. The zeros are the modes of `Ã` that the constraint
/// cannot see: the spectrum of `Ã` restricted to the unobservable subspace of
/// `(Ã, C₁₁)`. When `p = m` there is no constraint and every mode of `Ã` is a
/// zero.
pub fn invariant_zeros_with_basis(plant: &ContinuousPlant, basis: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let (n, m, p) = (plant.n(), plant.m(), plant.p());
    if m > p || m >= n {
        return Err(Error::InvalidArgument(format!(
            "invariant zeros need m ≤ p and m < n (m = {m}, p = {p}, n = {n})"
        )));
    }
    let r = n - m;
    if basis.shape() != (r, n) {
        return Err(Error::Dimension(format!("null-space basis must be {r}×{n}, got {:?}", basis.shape())));
    }
    if (basis * plant.b()).norm() > 1e-10 * plant.b().norm().max(1.0) {
        return Err(Error::InvalidArgument("basis rows are not orthogonal to range(B)".into()));
    }
    let (bq, _) = linalg::range_and_complement(plant.b());
    let mut t = DMatrix::zeros(n, n);
    linalg::put(&mut t, 0, 0, basis);
    linalg::put(&mut t, r, 0, &bq.transpose());

    let a_t = &t * plant.a() * t.transpose();
    let c_t = plant.c() * t.transpose();
    let c1 = c_t.columns(0, r).into_owned();
    let c2 = c_t.columns(r, m).into_owned();

    let (range_c2, comp_c2) = linalg::range_and_complement(&c2);
    let c22 = range_c2.transpose() * &c2;
    let c12 = range_c2.transpose() * &c1;
    let c11 = &comp_c2 * &c1;
    let c22_inv = linalg::inverse(&c22, "CB (output map of the actuated block)")?;

    let a11 = a_t.view((0, 0), (r, r)).into_owned();
    let a12 = a_t.view((0, r), (r, m)).into_owned();
    let reduced = a11 - a12 * c22_inv * c12;

    if p == m {
        return Ok(linalg::eigenvalues(&reduced));
    }

    let q = c11.nrows();
    let mut obs = DMatrix::zeros(q * r, r);
    let mut block = c11.clone();
    for i in 0..r {
        linalg::put(&mut obs, i * q, 0, &block);
        block = &block * &reduced;
    }
    let svd = obs.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = 1e-10 * smax.max(1.0);
    let unobs_rows: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] <= tol).collect();
    if unobs_rows.is_empty() {
        return Ok(Vec::new());
    }
    let basis_n = DMatrix::from_fn(r, unobs_rows.len(), |i, j| v_t[(unobs_rows[j], i)]);
    let restricted = basis_n.transpose() * reduced * &basis_n;
    Ok(linalg::eigenvalues(&restricted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark;

    #[test]
    fn aircraft_passes_validation() {
        let r = validate_plant(&benchmark::aircraft_plant());
        assert!(r.passed(), "{r:?}");
        assert_eq!((r.rank_b, r.rank_c), (2, 3));
    }

    #[test]
    fn zero_b_is_rank_deficient() {
        let plant = ContinuousPlant::new(
            DMatrix::identity(3, 3),
            DMatrix::zeros(3, 1),
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        )
        .unwrap();
        let r = validate_plant(&plant);
        assert!(!r.passed());
        let names: Vec<_> = r.failures().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec!["rank_b"]);
    }

    #[test]
    fn square_output_violates_dimension_check() {
        let plant = ContinuousPlant::new(
            DMatrix::identity(2, 2),
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let r = validate_plant(&plant);
        let names: Vec<_> = r.failures().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec!["dimensions"]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let err = ContinuousPlant::new(DMatrix::identity(2, 2), DMatrix::zeros(3, 1), DMatrix::zeros(1, 2));
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn aircraft_invariant_zero() {
        let z = invariant_zeros(&benchmark::aircraft_plant()).unwrap();
        assert_eq!(z.len(), 1);
        assert!((z[0].re + 0.1796).abs() < 1e-3, "{z:?}");
        assert!(z[0].im.abs() < 1e-12);
    }

    #[test]
    fn unmeasured_unactuated_state_is_a_zero() {
        // A = −I, B = e1, C = e1ᵀ: holding y = 0 leaves ẋ₂ = −x₂.
        let plant = ContinuousPlant::new(
            -DMatrix::<f64>::identity(2, 2),
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let z = invariant_zeros(&plant).unwrap();
        assert_eq!(z.len(), 1);
        assert!((z[0].re + 1.0).abs() < 1e-12);
    }

    #[test]
    fn measured_unactuated_state_is_not_a_zero() {
        let plant = ContinuousPlant::new(
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0, -3.0])),
            DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        )
        .unwrap();
        // x₂ is measured so it is pinned to zero; only the unmeasured x₃ mode remains
        let z = invariant_zeros(&plant).unwrap();
        assert_eq!(z.len(), 1);
        assert!((z[0].re + 3.0).abs() < 1e-12, "{z:?}");
    }
}
