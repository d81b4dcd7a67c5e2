//! Small dense complex linear-algebra helpers shared by the physics modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Unit complex number e^{iφ}.
pub fn cis(phi: f64) -> C64 {
    C64::from_polar(1.0, phi)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// max |U U† − I| entry.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs(&(u * u.adjoint() - CMatrix::identity(n, n)))
}

pub fn hermitian_residual(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
/// Columns of the returned matrix are the matching orthonormal eigenvectors.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let sym = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Extends a set of orthonormal columns to an orthonormal basis of C^n by
/// Gram-Schmidt against the standard basis vectors.
pub fn complete_basis(cols: &CMatrix, n: usize) -> CMatrix {
    let mut basis: Vec<CVector> = (0..cols.ncols()).map(|j| cols.column(j).into_owned()).collect();
    for i in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = CVector::zeros(n);
        v[i] = ONE;
        // two passes keep the result orthogonal to working precision
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let nrm = v.norm();
        if nrm > 1e-8 {
            basis.push(v / c(nrm, 0.0));
        }
    }
    let mut out = CMatrix::zeros(n, basis.len());
    for (j, b) in basis.iter().enumerate() {
        out.set_column(j, b);
    }
    out
}

/// Orthonormal basis of the orthogonal complement of the column span of `cols`
/// (columns need not be orthonormal, but must be linearly independent).
pub fn orthogonal_complement(cols: &CMatrix, n: usize) -> CMatrix {
    let q = orthonormalize(cols);
    let full = complete_basis(&q, n);
    full.columns(q.ncols(), n - q.ncols()).into_owned()
}

/// Modified Gram-Schmidt on the columns; drops columns that become negligible.
pub fn orthonormalize(cols: &CMatrix) -> CMatrix {
    let n = cols.nrows();
    let scale = max_abs(cols).max(f64::MIN_POSITIVE);
    let mut basis: Vec<CVector> = Vec::new();
    for j in 0..cols.ncols() {
        let mut v = cols.column(j).into_owned();
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let nrm = v.norm();
        if nrm > 1e-10 * scale {
            basis.push(v / c(nrm, 0.0));
        }
    }
    let mut out = CMatrix::zeros(n, basis.len());
    for (j, b) in basis.iter().enumerate() {
        out.set_column(j, b);
    }
    out
}

/// Rotates `v` by a global phase so that its largest-modulus entry is real
/// and positive. Zero vectors are returned unchanged.
pub fn fix_phase(v: &CVector) -> CVector {
    let mut best = ZERO;
    for z in v.iter() {
        if z.norm() > best.norm() * (1.0 + 1e-12) {
            best = *z;
        }
    }
    if best.norm() == 0.0 {
        return v.clone();
    }
    v * (best.conj() / best.norm())
}

pub fn block_diag(blocks: &[&CMatrix]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let m: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(n, m);
    let (mut r, mut col) = (0, 0);
    for b in blocks {
        out.view_mut((r, col), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        col += b.ncols();
    }
    out
}

/// Matrix from nested rows of (re, im) pairs.
pub fn from_rows(rows: &[Vec<C64>]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(n, m, |i, j| rows[i][j])
}
