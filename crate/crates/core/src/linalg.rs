//! Small dense linear algebra shared by every module.
//!
//! Everything is sized for desk-scale problems (d and N in the tens), so the
//! helpers favour clarity over reuse of workspaces. Ranks are always relative:
//! a singular value counts when it exceeds `rel_tol * sigma_max`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default relative cutoff used for every numerical rank.
pub const RANK_REL_TOL: f64 = 1e-10;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

pub fn singular_values_complex(m: &CMatrix) -> DVector<f64> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

pub fn rank_from_singular_values(sv: &DVector<f64>, rel_tol: f64) -> usize {
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if !(max > 0.0) {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    rank_from_singular_values(&singular_values(m), rel_tol)
}

pub fn rank_complex(m: &CMatrix, rel_tol: f64) -> usize {
    rank_from_singular_values(&singular_values_complex(m), rel_tol)
}

// Pads with zero rows so the SVD returns a full right factor.
fn padded<T: nalgebra::Scalar>(m: &DMatrix<T>, zero: T) -> DMatrix<T> {
    let (r, cols) = m.shape();
    if r >= cols {
        return m.clone();
    }
    let mut out = DMatrix::from_element(cols, cols, zero);
    out.view_mut((0, 0), (r, cols)).copy_from(m);
    out
}

/// Orthonormal basis of the right null space of `m`.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> Vec<DVector<f64>> {
    let n = m.ncols();
    if n == 0 {
        return Vec::new();
    }
    if m.nrows() == 0 || m.iter().all(|v| *v == 0.0) {
        return (0..n).map(|k| DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 })).collect();
    }
    let svd = padded(m, 0.0).svd(false, true);
    let r = rank_from_singular_values(&svd.singular_values, rel_tol);
    let v_t = svd.v_t.expect("requested right factor");
    (r..n).map(|k| v_t.row(k).transpose()).collect()
}

/// Orthonormal basis (over C) of the right null space of a complex matrix.
pub fn null_space_complex(m: &CMatrix, rel_tol: f64) -> Vec<CVector> {
    let n = m.ncols();
    if n == 0 {
        return Vec::new();
    }
    if m.nrows() == 0 || m.iter().all(|v| v.norm_sqr() == 0.0) {
        return (0..n)
            .map(|k| CVector::from_fn(n, |i, _| if i == k { c(1.0, 0.0) } else { c(0.0, 0.0) }))
            .collect();
    }
    let svd = padded(m, c(0.0, 0.0)).svd(false, true);
    let r = rank_from_singular_values(&svd.singular_values, rel_tol);
    let v_t = svd.v_t.expect("requested right factor");
    (r..n).map(|k| v_t.row(k).adjoint()).collect()
}

/// Orthonormal basis of the orthogonal complement of the column span of `cols`
/// (a `d x k` matrix), returned as the columns of a `d x (d - rank)` matrix.
pub fn orthogonal_complement(cols: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let d = cols.nrows();
    let basis = null_space(&cols.transpose(), rel_tol);
    if basis.is_empty() {
        return DMatrix::zeros(d, 0);
    }
    DMatrix::from_columns(&basis)
}

/// `[[B, -C], [C, B]]` for `A = B + iC`.
pub fn realify_matrix(a: &CMatrix) -> DMatrix<f64> {
    let d = a.nrows();
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for j in 0..d {
        for k in 0..d {
            let z = a[(j, k)];
            out[(j, k)] = z.re;
            out[(j, k + d)] = -z.im;
            out[(j + d, k)] = z.im;
            out[(j + d, k + d)] = z.re;
        }
    }
    out
}

/// Stacks `(Re x; Im x)`.
pub fn realify(x: &CVector) -> DVector<f64> {
    let d = x.len();
    DVector::from_fn(2 * d, |i, _| if i < d { x[i].re } else { x[i - d].im })
}

pub fn complexify(u: &DVector<f64>) -> CVector {
    let d = u.len() / 2;
    CVector::from_fn(d, |i, _| c(u[i], u[i + d]))
}

pub fn real_to_complex(x: &DVector<f64>) -> CVector {
    x.map(|v| c(v, 0.0))
}

pub fn real_part(x: &CVector) -> DVector<f64> {
    x.map(|v| v.re)
}

pub fn real_matrix_to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| c(v, 0.0))
}

pub fn is_real(x: &CVector) -> bool {
    x.iter().all(|v| v.im == 0.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(a: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = a.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let vectors = CMatrix::from_columns(&order.iter().map(|&k| eig.eigenvectors.column(k).into_owned()).collect::<Vec<_>>());
    (values, vectors)
}

/// Multiplies by the unimodular scalar that makes the first entry with modulus
/// above `tol` real and positive.
pub fn canonical_phase(x: &CVector, tol: f64) -> CVector {
    match x.iter().find(|v| v.norm() > tol) {
        Some(first) => {
            let phase = first.conj() / first.norm();
            x * phase
        }
        None => x.clone(),
    }
}

/// Frobenius norm of `A - A*`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm()
}

/// Real inner product of `C^d` viewed as `R^2d`.
pub fn real_inner(x: &CVector, y: &CVector) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}
