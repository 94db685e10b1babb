//! Collision certification in double-double precision.
//!
//! A float-level collision `M(y) ~ M(x)` can be an artifact of conditioning:
//! near the degenerate set, distinct signals agree to every digit a double
//! holds. A candidate is certified only if Newton refinement, with residuals
//! evaluated in double-double arithmetic, drives the relative residual
//! below [`CERTIFY_TOL`]. When the Jacobian is regular at generic points, the
//! forward error bound `kappa * residual` must also stay below [`FORWARD_TOL`],
//! with `kappa` the condition number of the Jacobian at `x` modulo the global
//! phase: a partner within that bound cannot be told apart from a perturbation
//! of `x`. When the Jacobian is degenerate everywhere the map is not injective
//! on any open set and the bound is skipped.

use nalgebra::{DMatrix, DVector};
use twofloat::TwoFloat;

use crate::ensembles::{Ensemble, FieldTag};
use crate::linalg::{self, CVector};
use crate::rng::{self, domain};

pub const CERTIFY_TOL: f64 = 1e-24;
pub const FORWARD_TOL: f64 = 1e-12;
const MAX_REFINE_ITERS: usize = 16;

/// The measurement map as real quadratic forms `u^T F_j u` in real coordinates.
#[derive(Clone, Debug)]
pub struct QuadraticSystem {
    field: FieldTag,
    mats: Vec<DMatrix<f64>>,
    generically_regular: bool,
}

/// Random points at which generic Jacobian regularity is tested.
const REGULARITY_SAMPLES: u64 = 3;

impl QuadraticSystem {
    pub fn new(e: &Ensemble) -> Self {
        let mats = e
            .matrices()
            .iter()
            .map(|a| match e.field() {
                FieldTag::Real => a.real_part(),
                FieldTag::Complex => linalg::realify_matrix(a.entries()),
            })
            .collect();
        let mut sys = QuadraticSystem { field: e.field(), mats, generically_regular: false };
        let target = e.field().regular_rank(e.dim());
        sys.generically_regular = (0..REGULARITY_SAMPLES).any(|k| {
            let x = rng::gaussian_vector(&mut rng::substream(0, domain::SURVEY, k), e.field(), e.dim());
            linalg::rank(&sys.jacobian(&sys.coords(&x)), linalg::RANK_REL_TOL) >= target
        });
        sys
    }

    fn coords(&self, y: &CVector) -> DVector<f64> {
        match self.field {
            FieldTag::Real => linalg::real_part(y),
            FieldTag::Complex => linalg::realify(y),
        }
    }

    fn signal(&self, u: &DVector<f64>) -> CVector {
        match self.field {
            FieldTag::Real => linalg::real_to_complex(u),
            FieldTag::Complex => linalg::complexify(u),
        }
    }

    fn measure_dd(&self, u: &[TwoFloat]) -> Vec<TwoFloat> {
        self.mats
            .iter()
            .map(|f| {
                let mut total = TwoFloat::from(0.0);
                for (k, uk) in u.iter().enumerate() {
                    let mut row = TwoFloat::from(0.0);
                    for (l, ul) in u.iter().enumerate() {
                        row += *ul * f[(k, l)];
                    }
                    total += *uk * row;
                }
                total
            })
            .collect()
    }

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let rows: Vec<DVector<f64>> = self.mats.iter().map(|f| f * u * 2.0).collect();
        DMatrix::from_fn(rows.len(), u.len(), |j, k| rows[j][k])
    }

    /// Condition number of the Jacobian at `x` over the directions not fixed by
    /// the global phase. Infinite when that Jacobian is singular.
    pub fn condition(&self, x: &CVector) -> f64 {
        let u = self.coords(x);
        let orbit = usize::from(self.field == FieldTag::Complex);
        let k = self.mats.len().min(u.len() - orbit);
        if k == 0 {
            return f64::INFINITY;
        }
        let mut s: Vec<f64> = self.jacobian(&u).singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        if s[k - 1] <= 0.0 {
            return f64::INFINITY;
        }
        s[0] / s[k - 1]
    }

    /// Refines `y` towards an exact partner of `x`. Returns the refined signal
    /// and its relative residual when the residual falls below [`CERTIFY_TOL`].
    pub fn certify(&self, x: &CVector, y: &CVector) -> Option<(CVector, f64)> {
        let ux: Vec<TwoFloat> = self.coords(x).iter().map(|v| TwoFloat::from(*v)).collect();
        let b = self.measure_dd(&ux);
        let b_norm = b.iter().map(|v| v.hi() * v.hi()).sum::<f64>().sqrt();
        if b_norm == 0.0 {
            return None;
        }
        let kappa = if self.generically_regular { self.condition(x) } else { f64::INFINITY };
        let mut u: Vec<TwoFloat> = self.coords(y).iter().map(|v| TwoFloat::from(*v)).collect();
        let mut previous = f64::INFINITY;
        let mut stalls = 0;
        for _ in 0..MAX_REFINE_ITERS {
            let r: Vec<TwoFloat> = self.measure_dd(&u).iter().zip(&b).map(|(m, bj)| *m - *bj).collect();
            let rel = r.iter().map(|v| v.hi() * v.hi()).sum::<f64>().sqrt() / b_norm;
            if rel < CERTIFY_TOL && (!self.generically_regular || kappa * rel < FORWARD_TOL) {
                let hi = DVector::from_iterator(u.len(), u.iter().map(|v| v.hi()));
                return Some((self.signal(&hi), rel));
            }
            if rel > 0.1 * previous {
                stalls += 1;
                if stalls >= 2 {
                    return None;
                }
            }
            previous = previous.min(rel);
            let hi = DVector::from_iterator(u.len(), u.iter().map(|v| v.hi()));
            let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v.hi()));
            let jac = self.jacobian(&hi);
            let svd = jac.svd(true, true);
            let cutoff = 1e-12 * svd.singular_values.max();
            let step = svd.solve(&rhs, cutoff).ok()?;
            for (uk, sk) in u.iter_mut().zip(step.iter()) {
                *uk += *sk;
            }
        }
        None
    }
}
