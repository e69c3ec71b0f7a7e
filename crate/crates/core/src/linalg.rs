//! Small dense complex linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// `⟨a|b⟩`, conjugate-linear in the first argument.
pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.dotc(b)
}

pub fn norm_sq(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `|a⟩⟨b|`
pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

/// Rank-one projector onto the direction of `v` (need not be normalized).
pub fn projector(v: &CVector) -> CMatrix {
    let n = norm_sq(v);
    outer(v, v).unscale(n)
}

/// `⟨v|A|v⟩`, real part only (callers pass Hermitian `A`).
pub fn expectation(a: &CMatrix, v: &CVector) -> f64 {
    v.dotc(&(a * v)).re
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
/// Only the Hermitian part of `m` is used.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (m + m.adjoint()).unscale(2.0);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    hermitian_eigen(m).0
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Orthonormal basis (as columns) of the column space of `m`. Singular values below
/// `rel_tol` times the largest are treated as zero.
pub fn column_space(m: &CMatrix, rel_tol: f64) -> CMatrix {
    let rows = m.nrows();
    if m.ncols() == 0 {
        return CMatrix::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return CMatrix::zeros(rows, 0);
    }
    let cols: Vec<CVector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > rel_tol * smax)
        .map(|(k, _)| u.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        CMatrix::zeros(rows, 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

/// Rotates the global phase of `v` so that its first non-negligible component is
/// real and positive.
pub fn fix_phase(v: &CVector) -> CVector {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    match v.iter().find(|z| z.norm() > 1e-10 * scale) {
        Some(z) if scale > 0.0 => v * (z.conj() / z.norm()),
        _ => v.clone(),
    }
}

/// Extends the orthonormal columns of `seed` to a full orthonormal basis of
/// `C^dim`, trying canonical basis vectors in order (two-pass Gram–Schmidt).
pub fn complete_basis(seed: &[CVector], dim: usize) -> Vec<CVector> {
    let mut basis: Vec<CVector> = Vec::with_capacity(dim);
    for v in seed {
        if let Some(u) = orthogonalize(v, &basis) {
            basis.push(u);
        }
    }
    for k in 0..dim {
        if basis.len() == dim {
            break;
        }
        let e = CVector::from_fn(dim, |i, _| if i == k { ONE } else { ZERO });
        if let Some(u) = orthogonalize(&e, &basis) {
            basis.push(u);
        }
    }
    basis
}

fn orthogonalize(v: &CVector, basis: &[CVector]) -> Option<CVector> {
    let original = v.norm();
    let mut w = v.clone();
    for _ in 0..2 {
        for b in basis {
            let c = b.dotc(&w);
            w -= b * c;
        }
    }
    let n = w.norm();
    if n > 1e-6 * original.max(f64::MIN_POSITIVE) {
        Some(w.unscale(n))
    } else {
        None
    }
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// `A ⊗ B` for column vectors, system-major (index = i·dim(b) + j).
pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    CVector::from_fn(a.len() * b.len(), |idx, _| {
        a[idx / b.len()] * b[idx % b.len()]
    })
}
