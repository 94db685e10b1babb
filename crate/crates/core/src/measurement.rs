//! The measurement map `x -> (x* A_j x)_j`, its real Jacobian, the polarization
//! identity, and the phase-equivalence distance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ensembles::{Ensemble, FieldTag, HermitianMatrix};
use crate::error::{param, Error, Result};
use crate::linalg::{self, CVector, RANK_REL_TOL};

/// Bound on `|Im(x* A x)|` relative to `1 + ||x||^2 ||A||`.
pub const IMAG_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeasurementVector(pub Vec<f64>);

impl MeasurementVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &MeasurementVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &MeasurementVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// Real Jacobian of the measurement map: `d x N` (real) or `2d x N` (complex).
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianMatrix {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    pub tolerance: f64,
}

pub(crate) fn check_signal(field: FieldTag, d: usize, x: &CVector) -> Result<()> {
    if x.len() != d {
        return param(format!("signal has length {}, expected {d}", x.len()));
    }
    if field == FieldTag::Real && !linalg::is_real(x) {
        return param("complex signal given for a real ensemble");
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return param("signal has non-finite entries");
    }
    Ok(())
}

/// `M_A(x)`: the real parts of `x* A_j x`.
pub fn measure(e: &Ensemble, x: &CVector) -> Result<MeasurementVector> {
    check_signal(e.field(), e.dim(), x)?;
    let xn2 = x.norm_squared();
    e.matrices()
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let q = a.quadratic_form(x);
            if q.im.abs() > IMAG_TOL * (1.0 + xn2 * a.frobenius_norm()) {
                return Err(Error::Numerical(format!(
                    "x* A_{j} x has imaginary part {:e}; matrix is not self-adjoint",
                    q.im
                )));
            }
            Ok(q.re)
        })
        .collect::<Result<Vec<_>>>()
        .map(MeasurementVector)
}

/// Unchecked evaluation for hot loops; the caller guarantees shapes.
pub(crate) fn measure_values(e: &Ensemble, x: &CVector) -> Vec<f64> {
    e.matrices().iter().map(|a| a.quadratic_form(x).re).collect()
}

/// `| x*Ax - y*Ay - 4 Re(v* A u) |` with `v = (x+y)/2`, `u = (x-y)/2`.
pub fn polarization_gap(a: &HermitianMatrix, x: &CVector, y: &CVector) -> Result<f64> {
    if x.len() != a.dim() || y.len() != a.dim() {
        return param("vector lengths must match the matrix dimension");
    }
    let v = (x + y) * linalg::c(0.5, 0.0);
    let u = (x - y) * linalg::c(0.5, 0.0);
    let lhs = a.quadratic_form(x).re - a.quadratic_form(y).re;
    let rhs = 4.0 * a.sesquilinear(&v, &u).re;
    Ok((lhs - rhs).abs())
}

/// Natural scale for [`polarization_gap`]: `||A||_F (||x||^2 + ||y||^2)`, at least 1.
pub fn polarization_scale(a: &HermitianMatrix, x: &CVector, y: &CVector) -> f64 {
    (a.frobenius_norm() * (x.norm_squared() + y.norm_squared())).max(1.0)
}

/// Jacobian with the default relative rank tolerance.
pub fn jacobian(e: &Ensemble, x: &CVector) -> Result<JacobianMatrix> {
    jacobian_with_tol(e, x, RANK_REL_TOL)
}

/// Columns `2 A_j x` (real), or `2 F_j u` with `F_j = [[B, -C], [C, B]]` and
/// `u = (Re x; Im x)` (complex).
pub fn jacobian_with_tol(e: &Ensemble, x: &CVector, tolerance: f64) -> Result<JacobianMatrix> {
    check_signal(e.field(), e.dim(), x)?;
    let matrix = jacobian_matrix(e, x);
    let rank = linalg::rank(&matrix, tolerance);
    Ok(JacobianMatrix { matrix, rank, tolerance })
}

pub(crate) fn jacobian_matrix(e: &Ensemble, x: &CVector) -> DMatrix<f64> {
    let d = e.dim();
    match e.field() {
        FieldTag::Real => {
            let xr = linalg::real_part(x);
            let cols: Vec<_> = e.matrices().iter().map(|a| a.real_part() * &xr * 2.0).collect();
            DMatrix::from_columns(&cols)
        }
        FieldTag::Complex => {
            let u = linalg::realify(x);
            let cols: Vec<_> = e
                .matrices()
                .iter()
                .map(|a| linalg::realify_matrix(a.entries()) * &u * 2.0)
                .collect();
            let m = DMatrix::from_columns(&cols);
            debug_assert_eq!(m.nrows(), 2 * d);
            m
        }
    }
}

/// Whether `x` is a regular point, with the Jacobian rank found there.
pub fn is_regular(e: &Ensemble, x: &CVector) -> Result<(bool, usize)> {
    check_signal(e.field(), e.dim(), x)?;
    if x.iter().all(|z| z.norm_sqr() == 0.0) {
        return param("the origin is always degenerate; regularity is tested at nonzero points");
    }
    let j = jacobian(e, x)?;
    Ok((j.rank == e.field().regular_rank(e.dim()), j.rank))
}

/// `min_{|alpha| = 1} || x - alpha y ||`, with `alpha = +-1` over the reals.
pub fn phase_distance(x: &CVector, y: &CVector, field: FieldTag) -> f64 {
    assert_eq!(x.len(), y.len(), "phase_distance needs equal lengths");
    match field {
        FieldTag::Real => (x - y).norm().min((x + y).norm()),
        FieldTag::Complex => {
            // The optimal phase aligns y with x: alpha = (y* x) / |y* x|.
            let inner = y.dotc(x);
            let modulus = inner.norm();
            if modulus == 0.0 {
                (x.norm_squared() + y.norm_squared()).sqrt()
            } else {
                (x - y * (inner / modulus)).norm()
            }
        }
    }
}
