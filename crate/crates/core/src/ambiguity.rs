//! Explicit ambiguity structures: colliding pairs built from kernel vectors,
//! the signature map `psi(x, y, lambda, mu) = lambda^2 x x* - mu^2 y y*` with its
//! inverse, the parametrized family of pairs `(z, w)` with
//! `z z* - w w* = lambda^2 x x* - mu^2 y y*`, and the collision constructor for
//! frames `[I_d, G]`.

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::ensembles::{rank_one_from_frame, Ensemble, FieldTag, Frame, HermitianMatrix};
use crate::error::{param, Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64, I, RANK_REL_TOL};
use crate::measurement::{self, check_signal, phase_distance};
use crate::rng::{self, domain};

/// A witness is valid when its residual is below this times its scale.
pub const WITNESS_RESIDUAL_TOL: f64 = 1e-10;
/// ...and its separation exceeds this times `max(||x||, ||y||)`.
pub const WITNESS_SEPARATION_TOL: f64 = 1e-6;
/// Kernel membership tolerance for [`kernel_collision`], relative to scale.
pub const KERNEL_MEMBERSHIP_TOL: f64 = 1e-10;
pub const SIGNATURE_TOL: f64 = 1e-12;
pub const GRAM_RETRY_BUDGET: usize = 32;

/// Two signals and how well they collide. Residual and separation are
/// recomputed from `x`, `y` and the ensemble when the witness is built.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionWitness {
    field: FieldTag,
    x: CVector,
    y: CVector,
    residual: f64,
    separation: f64,
    scale: f64,
    valid: bool,
}

impl CollisionWitness {
    pub fn new(e: &Ensemble, x: CVector, y: CVector) -> Result<Self> {
        check_signal(e.field(), e.dim(), &x)?;
        check_signal(e.field(), e.dim(), &y)?;
        let mx = measurement::measure_values(e, &x);
        let my = measurement::measure_values(e, &y);
        let residual = mx.iter().zip(&my).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let separation = phase_distance(&x, &y, e.field());
        let max_a = e.matrices().iter().map(|a| a.frobenius_norm()).fold(0.0, f64::max);
        let scale = (max_a * x.norm_squared().max(y.norm_squared())).max(1.0);
        let valid = residual < WITNESS_RESIDUAL_TOL * scale
            && separation > WITNESS_SEPARATION_TOL * x.norm().max(y.norm());
        Ok(CollisionWitness { field: e.field(), x, y, residual, separation, scale, valid })
    }

    pub fn field(&self) -> FieldTag {
        self.field
    }

    pub fn x(&self) -> &CVector {
        &self.x
    }

    pub fn y(&self) -> &CVector {
        &self.y
    }

    /// `max_j |m_j(x) - m_j(y)|`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `phase_distance(x, y)`.
    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// `max(1, max_j ||A_j||_F * max(||x||^2, ||y||^2))`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn valid(&self) -> bool {
        self.valid
    }
}

impl Serialize for CollisionWitness {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        serde_json::json!({
            "x": crate::io::vector_json(&self.x, self.field),
            "y": crate::io::vector_json(&self.y, self.field),
            "residual": self.residual,
            "separation": self.separation,
            "valid": self.valid,
        })
        .serialize(s)
    }
}

/// The pair `(u + v, u - v)` for `v` in the kernel at `u`: over the reals
/// `v^T A_j u = 0`, over the complex field `Re(v* A_j u) = 0`, for every `j`.
pub fn kernel_collision(e: &Ensemble, u: &CVector, v: &CVector) -> Result<CollisionWitness> {
    check_signal(e.field(), e.dim(), u)?;
    check_signal(e.field(), e.dim(), v)?;
    if u.iter().all(|z| z.norm_sqr() == 0.0) || v.iter().all(|z| z.norm_sqr() == 0.0) {
        return param("kernel_collision needs nonzero u and v");
    }
    let max_a = e.matrices().iter().map(|a| a.frobenius_norm()).fold(0.0, f64::max);
    let scale = (max_a * u.norm() * v.norm()).max(1.0);
    let membership = e.matrices().iter().map(|a| a.sesquilinear(v, u).re.abs()).fold(0.0, f64::max);
    if membership > KERNEL_MEMBERSHIP_TOL * scale {
        return param(format!("v is not in the kernel at u (residual {membership:e})"));
    }
    CollisionWitness::new(e, u + v, u - v)
}

/// Whether `x x*`, `y y*`, `x y*`, `y x*` are linearly independent in `C^{d x d}`.
pub fn quadruple_independence(x: &CVector, y: &CVector) -> Result<bool> {
    let d = x.len();
    if d < 2 {
        return param("quadruple_independence needs d >= 2");
    }
    if y.len() != d {
        return param("x and y must have the same length");
    }
    let outer = [x * x.adjoint(), y * y.adjoint(), x * y.adjoint(), y * x.adjoint()];
    let stack = CMatrix::from_fn(4, d * d, |r, k| outer[r][(k % d, k / d)]);
    Ok(linalg::rank_complex(&stack, RANK_REL_TOL) == 4)
}

/// Orthonormal `x`, `y` with nonnegative weights, not both zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rank2Signature {
    #[serde(serialize_with = "crate::io::serialize_complex_vector")]
    x: CVector,
    #[serde(serialize_with = "crate::io::serialize_complex_vector")]
    y: CVector,
    lambda: f64,
    mu: f64,
}

impl Rank2Signature {
    pub fn new(x: CVector, y: CVector, lambda: f64, mu: f64) -> Result<Self> {
        if x.len() < 2 || y.len() != x.len() {
            return param("signature vectors must share a length d >= 2");
        }
        if !(lambda.is_finite() && mu.is_finite() && lambda >= 0.0 && mu >= 0.0) {
            return param("lambda and mu must be finite and nonnegative");
        }
        if lambda == 0.0 && mu == 0.0 {
            return param("lambda and mu cannot both be zero");
        }
        if (x.norm() - 1.0).abs() > SIGNATURE_TOL || (y.norm() - 1.0).abs() > SIGNATURE_TOL {
            return param("signature vectors must have unit norm");
        }
        if x.dotc(&y).norm() > SIGNATURE_TOL {
            return param("signature vectors must be orthogonal");
        }
        Ok(Rank2Signature { x, y, lambda, mu })
    }

    pub fn x(&self) -> &CVector {
        &self.x
    }

    pub fn y(&self) -> &CVector {
        &self.y
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// `lambda^2 x x* - mu^2 y y*`.
pub fn psi(sig: &Rank2Signature) -> HermitianMatrix {
    let m = &sig.x * sig.x.adjoint() * c(sig.lambda * sig.lambda, 0.0) - &sig.y * sig.y.adjoint() * c(sig.mu * sig.mu, 0.0);
    HermitianMatrix::hermitian_part(FieldTag::Complex, &m)
}

/// Splits a Hermitian matrix of rank at most 2 with at most one positive and
/// one negative eigenvalue into its signature. Eigenvectors carry the
/// canonical phase. The zero matrix maps to `lambda = mu = 0`, `x = e_1`, `y = e_2`.
pub fn psi_inverse(b: &HermitianMatrix) -> Result<Rank2Signature> {
    let d = b.dim();
    if d < 2 {
        return param("psi_inverse needs d >= 2");
    }
    let (vals, vecs) = linalg::hermitian_eigen(b.entries());
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        let e = |k: usize| CVector::from_fn(d, |r, _| if r == k { c(1.0, 0.0) } else { c(0.0, 0.0) });
        return Ok(Rank2Signature { x: e(0), y: e(1), lambda: 0.0, mu: 0.0 });
    }
    let tol = RANK_REL_TOL * scale;
    let positive = vals.iter().filter(|v| **v > tol).count();
    let negative = vals.iter().filter(|v| **v < -tol).count();
    if positive + negative > 2 {
        return Err(Error::Precondition(format!("rank {} exceeds 2", positive + negative)));
    }
    if positive > 1 || negative > 1 {
        return Err(Error::Precondition("the two nonzero eigenvalues have the same sign".into()));
    }
    // Ascending order: the last eigenpair carries lambda^2, the first -mu^2.
    let top = vals[d - 1];
    let bottom = vals[0];
    let lambda = if positive == 1 { top.sqrt() } else { 0.0 };
    let mu = if negative == 1 { (-bottom).sqrt() } else { 0.0 };
    let x = linalg::canonical_phase(&vecs.column(d - 1).into_owned(), SIGNATURE_TOL);
    let y = linalg::canonical_phase(&vecs.column(0).into_owned(), SIGNATURE_TOL);
    Ok(Rank2Signature { x, y, lambda, mu })
}

/// Unimodular `omega_1..3` and `0 <= beta < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitParams {
    omega: [C64; 3],
    beta: f64,
}

impl OrbitParams {
    pub fn new(omega: [C64; 3], beta: f64) -> Result<Self> {
        if omega.iter().any(|w| (w.norm() - 1.0).abs() > SIGNATURE_TOL) {
            return param("omega values must be unimodular");
        }
        if !(beta.is_finite() && (0.0..1.0).contains(&beta)) {
            return param(format!("beta must lie in [0, 1), got {beta}"));
        }
        Ok(OrbitParams { omega, beta })
    }

    pub fn omega(&self) -> [C64; 3] {
        self.omega
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// `z = (w1 lambda x + w2 beta mu y) / s`, `w = (w3 beta lambda x + conj(w1) w2 w3 mu y) / s`
/// with `s = sqrt(1 - beta^2)`; then `z z* - w w* = lambda^2 x x* - mu^2 y y*`.
pub fn rank2_orbit(sig: &Rank2Signature, p: &OrbitParams) -> (CVector, CVector) {
    let [w1, w2, w3] = p.omega;
    let s = (1.0 - p.beta * p.beta).sqrt();
    let (l, m, b) = (sig.lambda, sig.mu, p.beta);
    let z = (&sig.x * (w1 * l) + &sig.y * (w2 * (b * m))) / c(s, 0.0);
    let w = (&sig.x * (w3 * (b * l)) + &sig.y * (w1.conj() * w2 * w3 * m)) / c(s, 0.0);
    (z, w)
}

/// The rank-one ensemble of the frame `[I_d, G]` for a `d x (d-1)` block `G`.
pub fn gram_frame(g: &CMatrix) -> Result<Frame> {
    let d = g.nrows();
    if d < 2 || g.ncols() != d - 1 {
        return param(format!("G must be d x (d-1) with d >= 2, got {}x{}", g.nrows(), g.ncols()));
    }
    let mut columns: Vec<CVector> = (0..d)
        .map(|k| CVector::from_fn(d, |r, _| if r == k { c(1.0, 0.0) } else { c(0.0, 0.0) }))
        .collect();
    columns.extend(g.column_iter().map(|col| col.into_owned()));
    Frame::new(FieldTag::Complex, d, columns)
}

/// Colliding pair for `[I_d, G]` from a given `u` with `u_1 = 0`. Solves the
/// real linear constraints `Re(conj(f_j* u) (f_j* v)) = 0` for `j >= 2`, drops
/// the forced direction `i u`, and takes the kernel element with the largest
/// first coordinate, rescaled to `||v|| = ||u||`.
pub fn gram_collision_witness_at(g: &CMatrix, u: &CVector) -> Result<CollisionWitness> {
    let frame = gram_frame(g)?;
    let d = frame.dim();
    if u.len() != d {
        return param(format!("u has length {}, expected {d}", u.len()));
    }
    if u[0].norm() > 0.0 || u.norm() == 0.0 {
        return param("u must be nonzero with u_1 = 0");
    }
    let rows: Vec<Vec<f64>> = frame.columns()[1..]
        .iter()
        .map(|f| {
            let cj = f.dotc(u);
            let w: Vec<C64> = f.iter().map(|fk| cj.conj() * fk.conj()).collect();
            w.iter().map(|z| z.re).chain(w.iter().map(|z| -z.im)).collect()
        })
        .collect();
    let constraints = DMatrix::from_fn(rows.len(), 2 * d, |r, k| rows[r][k]);
    let kernel = linalg::null_space(&constraints, RANK_REL_TOL);
    let forced = linalg::realify(&(u * I));
    let forced = &forced / forced.norm();
    let projected: Vec<_> = kernel.iter().map(|k| k - &forced * forced.dot(k)).collect();
    if projected.is_empty() {
        return Err(Error::Numerical("kernel contains only the forced direction".into()));
    }
    let basis_mat = DMatrix::from_columns(&projected);
    let svd = basis_mat.clone().svd(true, false);
    let u_cols = svd.u.expect("requested");
    let top = svd.singular_values.max();
    let basis: Vec<_> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-8 * top.max(1e-300))
        .map(|k| u_cols.column(k).into_owned())
        .collect();
    if basis.is_empty() {
        return Err(Error::Numerical("kernel contains only the forced direction".into()));
    }
    // First coordinate (Re v_1, Im v_1) of each basis vector.
    let first = DMatrix::from_fn(2, basis.len(), |r, k| basis[k][r * d]);
    let fsvd = first.svd(false, true);
    let idx = fsvd.singular_values.imax();
    if fsvd.singular_values[idx] < 1e-8 {
        return Err(Error::Numerical("no kernel element with v_1 != 0".into()));
    }
    let coeffs = fsvd.v_t.expect("requested").row(idx).transpose();
    let v_real = DMatrix::from_columns(&basis) * coeffs;
    let mut v = linalg::complexify(&v_real);
    v *= c(u.norm() / v.norm(), 0.0);
    if v[0].im < 0.0 || (v[0].im == 0.0 && v[0].re < 0.0) {
        v = -v;
    }
    let e = rank_one_from_frame(&frame)?;
    let w = CollisionWitness::new(&e, u + &v, u - &v)?;
    if !w.valid() {
        return Err(Error::Numerical(format!(
            "constructed pair is not a valid collision (residual {:e}, separation {:e})",
            w.residual(),
            w.separation()
        )));
    }
    Ok(w)
}

/// [`gram_collision_witness_at`] with `u = (0, g_2, ..., g_d)` drawn from the
/// seed, retried up to [`GRAM_RETRY_BUDGET`] times.
pub fn gram_collision_witness(g: &CMatrix, seed: u64) -> Result<CollisionWitness> {
    let d = g.nrows();
    gram_frame(g)?;
    let mut last = None;
    for attempt in 0..GRAM_RETRY_BUDGET {
        let mut rng = rng::substream(seed, domain::GRAM, attempt as u64);
        let mut u = rng::gaussian_vector(&mut rng, FieldTag::Complex, d);
        u[0] = c(0.0, 0.0);
        let norm = u.norm();
        if norm == 0.0 {
            continue;
        }
        u /= c(norm, 0.0);
        match gram_collision_witness_at(g, &u) {
            Ok(w) => return Ok(w),
            Err(err) => last = Some(err),
        }
    }
    Err(Error::Numerical(format!(
        "no admissible kernel vector after {GRAM_RETRY_BUDGET} draws: {}",
        last.map_or_else(|| "degenerate draws".to_string(), |e| e.to_string())
    )))
}

/// Draws `u` from the seed and builds [`kernel_collision`] from the first
/// admissible kernel direction at `u`, scaled to `||u||`. Retried up to
/// [`GRAM_RETRY_BUDGET`] times; fails when the kernel is forced at every draw,
/// as it is at generic points of a PR-ae ensemble.
pub fn kernel_collision_search(e: &Ensemble, seed: u64) -> Result<CollisionWitness> {
    for attempt in 0..GRAM_RETRY_BUDGET {
        let mut rng = rng::substream(seed, domain::GRAM, attempt as u64);
        let u = rng::gaussian_vector(&mut rng, e.field(), e.dim());
        if let Some(v) = crate::certify::admissible_kernel(e, &u)?.first() {
            let v = v * c(u.norm() / v.norm(), 0.0);
            let w = kernel_collision(e, &u, &v)?;
            if w.valid() {
                return Ok(w);
            }
        }
    }
    Err(Error::Numerical(format!("no admissible kernel direction at {GRAM_RETRY_BUDGET} random points")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::hankel_ensemble;

    fn cv(v: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&(a, b)| c(a, b)))
    }

    #[test]
    fn quadruple_examples() {
        let e1 = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        let e2 = cv(&[(0.0, 0.0), (1.0, 0.0)]);
        assert!(quadruple_independence(&e1, &e2).unwrap());
        assert!(!quadruple_independence(&e1, &(&e1 * c(2.0, 0.0))).unwrap());
        assert!(quadruple_independence(&cv(&[(1.0, 0.0)]), &cv(&[(0.0, 1.0)])).is_err());
    }

    #[test]
    fn psi_examples() {
        let e1 = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        let e2 = cv(&[(0.0, 0.0), (1.0, 0.0)]);
        let b = psi(&Rank2Signature::new(e1.clone(), e2.clone(), 1.0, 1.0).unwrap());
        assert_eq!(b.entries(), &CMatrix::from_diagonal(&cv(&[(1.0, 0.0), (-1.0, 0.0)])));
        let b = psi(&Rank2Signature::new(e1, e2, 1.0, 0.0).unwrap());
        assert_eq!(b.numerical_rank(), 1);
    }

    #[test]
    fn psi_inverse_diagonal_example() {
        let b = HermitianMatrix::from_real(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, -9.0, 0.0])))
            .unwrap();
        let sig = psi_inverse(&b).unwrap();
        assert!((sig.lambda() - 2.0).abs() < 1e-12 && (sig.mu() - 3.0).abs() < 1e-12);
        assert!((sig.x() - cv(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0)])).norm() < 1e-12);
        assert!((sig.y() - cv(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)])).norm() < 1e-12);
    }

    #[test]
    fn psi_inverse_zero_and_rejections() {
        let zero = HermitianMatrix::from_real(DMatrix::zeros(3, 3)).unwrap();
        let sig = psi_inverse(&zero).unwrap();
        assert_eq!((sig.lambda(), sig.mu()), (0.0, 0.0));
        assert_eq!(sig.x()[0], c(1.0, 0.0));
        assert_eq!(sig.y()[1], c(1.0, 0.0));
        let same_sign = HermitianMatrix::from_real(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 0.0])))
            .unwrap();
        assert!(matches!(psi_inverse(&same_sign), Err(Error::Precondition(_))));
        let rank3 = HermitianMatrix::from_real(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -2.0, 3.0])))
            .unwrap();
        assert!(matches!(psi_inverse(&rank3), Err(Error::Precondition(_))));
    }

    #[test]
    fn orbit_at_beta_zero_is_the_signature() {
        let sig = Rank2Signature::new(cv(&[(1.0, 0.0), (0.0, 0.0)]), cv(&[(0.0, 0.0), (1.0, 0.0)]), 2.0, 0.5).unwrap();
        let p = OrbitParams::new([c(1.0, 0.0); 3], 0.0).unwrap();
        let (z, w) = rank2_orbit(&sig, &p);
        assert!((z - sig.x() * c(2.0, 0.0)).norm() < 1e-15);
        assert!((w - sig.y() * c(0.5, 0.0)).norm() < 1e-15);
        assert!(OrbitParams::new([c(1.0, 0.0); 3], 1.0).is_err());
        assert!(OrbitParams::new([c(1.0, 0.1), c(1.0, 0.0), c(1.0, 0.0)], 0.5).is_err());
    }

    #[test]
    fn hankel_kernel_collision_example() {
        let e = hankel_ensemble(3).unwrap();
        let u = cv(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]);
        let v = cv(&[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        let w = kernel_collision(&e, &u, &v).unwrap();
        assert_eq!(w.x(), &cv(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0)]));
        assert_eq!(w.y(), &cv(&[(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0)]));
        assert_eq!(w.residual(), 0.0);
        assert!(w.valid());
        assert!(kernel_collision(&e, &u, &CVector::zeros(3)).is_err());
        assert!(kernel_collision(&e, &u, &u).is_err());
    }

    #[test]
    fn forced_direction_gives_invalid_witness() {
        let e = crate::ensembles::minimal_complex_ensemble(3).unwrap();
        let u = cv(&[(1.0, 0.5), (-0.3, 0.2), (0.7, 0.0)]);
        let w = kernel_collision(&e, &u, &(&u * I)).unwrap();
        assert!(w.residual() < 1e-14);
        assert!(w.separation() < 1e-12);
        assert!(!w.valid());
    }

    #[test]
    fn kernel_search_finds_collisions_only_off_pr_ae() {
        let e = crate::ensembles::random_ensemble(FieldTag::Real, 4, 3, &[4; 3], crate::ensembles::RandomKind::General, 1)
            .unwrap();
        let w = kernel_collision_search(&e, 5).unwrap();
        assert!(w.valid());
        assert!(kernel_collision_search(&hankel_ensemble(4).unwrap(), 5).is_err());
    }

    #[test]
    fn gram_hand_example() {
        let g = CMatrix::from_element(2, 1, c(1.0, 0.0));
        let u = cv(&[(0.0, 0.0), (1.0, 0.0)]);
        let w = gram_collision_witness_at(&g, &u).unwrap();
        assert!((w.x() - cv(&[(0.0, 1.0), (1.0, 0.0)])).norm() < 1e-12);
        assert!((w.y() - cv(&[(0.0, -1.0), (1.0, 0.0)])).norm() < 1e-12);
        assert!((w.separation() - 2.0).abs() < 1e-12);
        assert!(w.valid());
    }
}
