//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Matrix exponential (scaling and squaring with a degree-13 Padé approximant).
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().exp()
}

/// Orthonormal bases of range(B) and of its orthogonal complement, from a full
/// Householder QR of `[B | I]`.
///
/// Returns `(range_cols, complement_rows)`: an `n×r` matrix whose columns span
/// range(B) and an `(n−r)×n` matrix whose rows span null(Bᵀ), where `r` is the
/// number of columns of `B`. Assumes `B` has full column rank.
pub fn range_and_complement(b: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, r) = b.shape();
    let mut aug = DMatrix::zeros(n, r + n);
    aug.view_mut((0, 0), (n, r)).copy_from(b);
    aug.view_mut((0, r), (n, n)).copy_from(&DMatrix::identity(n, n));
    let q = aug.qr().q();
    let range = q.columns(0, r).into_owned();
    let complement = q.columns(r, n - r).transpose();
    (range, complement)
}

/// Orthonormal rows spanning null(Bᵀ), sign- and order-normalized so the same
/// input always yields the same basis: each row's first significant entry is
/// positive and rows are sorted lexicographically in decreasing order.
pub fn left_null_basis(b: &DMatrix<f64>) -> DMatrix<f64> {
    let (_, comp) = range_and_complement(b);
    canonical_rows(&comp)
}

fn canonical_rows(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out: Vec<Vec<f64>> = rows
        .row_iter()
        .map(|r| {
            let mut v: Vec<f64> = r.iter().copied().collect();
            let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12 * scale.max(1e-300)) {
                if first < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
            v
        })
        .collect();
    out.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b) {
            if (x - y).abs() > 1e-12 {
                return y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal);
            }
        }
        std::cmp::Ordering::Equal
    });
    let cols = rows.ncols();
    DMatrix::from_fn(out.len(), cols, |i, j| out[i][j])
}

pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Numerical rank with the usual `max(rows, cols) · eps · σ_max` cutoff.
pub fn rank(a: &DMatrix<f64>) -> usize {
    let sv = singular_values(a);
    let Some(&smax) = sv.first() else { return 0 };
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

/// 2-norm condition number; infinite for singular input.
pub fn cond2(a: &DMatrix<f64>) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn norm2(a: &DMatrix<f64>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

pub fn inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone().try_inverse().ok_or_else(|| Error::Construction(format!("{what} is singular")))
}

/// Eigenvalues sorted by (real, imaginary) part.
///
/// nalgebra's default Schur iteration has no iteration cap and its
/// machine-epsilon deflation test can stall on defective matrices, so the
/// iteration is capped, retried with looser deflation, and finally retried on
/// an orthogonally similar matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    if a.is_empty() {
        return Vec::new();
    }
    let n = a.nrows();
    let mut ev = schur_eigenvalues(a.clone()).unwrap_or_else(|| {
        (1..=8u64)
            .find_map(|seed| {
                let q = pseudo_random_orthogonal(n, seed);
                schur_eigenvalues(q.transpose() * a * &q)
            })
            .expect("Schur iteration failed to converge on every similarity transform")
    });
    ev.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    ev
}

fn schur_eigenvalues(a: DMatrix<f64>) -> Option<Vec<Complex64>> {
    [f64::EPSILON, 1e-14, 1e-12].into_iter().find_map(|eps| {
        let schur = nalgebra::linalg::Schur::try_new(a.clone(), eps, 2_000)?;
        Some(schur.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect())
    })
}

fn pseudo_random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    // deterministic LCG fill, orthonormalized by QR
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let m = DMatrix::from_fn(n, n, |_, _| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    });
    m.qr().q()
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a).iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Characteristic polynomial `det(λI − A)` by the Samuelson–Berkowitz
/// recursion. Coefficients are in descending powers with a leading 1.
pub fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "char_poly needs a square matrix");
    // poly holds the characteristic polynomial of the leading k×k block
    let mut poly = vec![1.0];
    for k in 0..n {
        // partition leading (k+1)×(k+1) block as [[a_kk? ...]]: use the
        // trailing-row formulation with r = A[k, 0..k], c = A[0..k, k]
        let akk = a[(k, k)];
        let r = a.view((k, 0), (1, k)).into_owned();
        let c = a.view((0, k), (k, 1)).into_owned();
        let sub = a.view((0, 0), (k, k)).into_owned();
        // Toeplitz column: [1, -akk, -r c, -r A c, -r A² c, ...]
        let mut col = Vec::with_capacity(k + 2);
        col.push(1.0);
        col.push(-akk);
        let mut w = c.clone();
        for _ in 0..k {
            col.push(-(&r * &w)[(0, 0)]);
            w = &sub * w;
        }
        // new = T · poly, T is (k+2)×(k+1) lower-triangular Toeplitz
        let mut next = vec![0.0; k + 2];
        for (i, slot) in next.iter_mut().enumerate() {
            for (j, &pj) in poly.iter().enumerate() {
                if i >= j && i - j < col.len() {
                    *slot += col[i - j] * pj;
                }
            }
        }
        poly = next;
    }
    poly
}

/// Monic polynomial with the given real roots, descending powers.
pub fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
    let mut p = vec![1.0];
    for &r in roots {
        let mut next = vec![0.0; p.len() + 1];
        for (i, &c) in p.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= r * c;
        }
        p = next;
    }
    p
}

/// Greedy minimum-distance matching between two multisets of complex numbers;
/// returns the largest matched distance (infinite if the sizes differ).
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push(((x - y).norm(), i, j));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for (d, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            worst = worst.max(d);
        }
    }
    worst
}

/// Largest distance from any element of `a` to the nearest element of `b`.
pub fn max_nearest_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Block-diagonal/partitioned assembly helper: writes `block` into `dst` at
/// `(row, col)`.
pub fn put(dst: &mut DMatrix<f64>, row: usize, col: usize, block: &DMatrix<f64>) {
    dst.view_mut((row, col), block.shape()).copy_from(block);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn char_poly_of_companion() {
        // companion of λ³ − 6λ² + 11λ − 6
        let a = DMatrix::from_row_slice(3, 3, &[6.0, -11.0, 6.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let p = char_poly(&a);
        for (x, y) in p.iter().zip([1.0, -6.0, 11.0, -6.0]) {
            assert_relative_eq!(*x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn char_poly_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let p = char_poly(&a);
        assert_relative_eq!(p[1], -5.0, epsilon = 1e-14);
        assert_relative_eq!(p[2], -2.0, epsilon = 1e-14);
    }

    #[test]
    fn left_null_is_orthonormal_and_annihilates() {
        let b = DMatrix::from_row_slice(4, 2, &[25.0, 9.83, 1.42, -4.2, 0.01, 0.05, 0.0, 0.0]);
        let m = left_null_basis(&b);
        assert_eq!(m.shape(), (2, 4));
        assert!((&m * &b).norm() < 1e-12 * b.norm());
        assert!((&m * m.transpose() - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
        assert_eq!(m, left_null_basis(&b));
    }

    #[test]
    fn rank_of_zero_matrix() {
        assert_eq!(rank(&DMatrix::zeros(3, 2)), 0);
        assert_eq!(rank(&DMatrix::identity(3, 2)), 2);
    }

    #[test]
    fn poly_from_roots_expands() {
        assert_eq!(poly_from_roots(&[1.0, 2.0]), vec![1.0, -3.0, 2.0]);
    }
}
