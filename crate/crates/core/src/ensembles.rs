//! Measurement ensembles: the explicit minimal families, random prescribed-rank
//! and projection ensembles, rank-one frames, and invariant validation.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, I, RANK_REL_TOL};
use crate::rng::{self, domain};

/// Self-adjointness tolerance for matrices read from outside the crate.
pub const INGEST_HERMITIAN_TOL: f64 = 1e-12;
/// Upper bound on `||P^2 - P||_F` for projection ensembles.
pub const PROJECTION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldTag {
    #[serde(rename = "R")]
    Real,
    #[serde(rename = "C")]
    Complex,
}

impl FieldTag {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldTag::Real => "R",
            FieldTag::Complex => "C",
        }
    }

    /// Real dimension of the signal space `H^d`.
    pub fn real_dim(self, d: usize) -> usize {
        match self {
            FieldTag::Real => d,
            FieldTag::Complex => 2 * d,
        }
    }

    /// Full Jacobian rank at a regular point: `d` or `2d - 1`.
    pub fn regular_rank(self, d: usize) -> usize {
        match self {
            FieldTag::Real => d,
            FieldTag::Complex => 2 * d - 1,
        }
    }
}

impl fmt::Display for FieldTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FieldTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "R" | "r" | "real" | "REAL" => Ok(FieldTag::Real),
            "C" | "c" | "complex" | "COMPLEX" => Ok(FieldTag::Complex),
            other => param(format!("unknown field {other:?}, expected R or C")),
        }
    }
}

/// A `d x d` self-adjoint matrix over the tagged field.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    field: FieldTag,
    entries: CMatrix,
}

impl HermitianMatrix {
    /// Checks squareness, self-adjointness within [`INGEST_HERMITIAN_TOL`] and,
    /// for the real field, exactly zero imaginary parts.
    pub fn new(field: FieldTag, entries: CMatrix) -> Result<Self> {
        let m = Self::new_unchecked(field, entries)?;
        let defect = m.self_adjoint_defect();
        if defect > INGEST_HERMITIAN_TOL {
            return param(format!("matrix is not self-adjoint (defect {defect:e})"));
        }
        if field == FieldTag::Real && m.imaginary_defect() != 0.0 {
            return param("real matrix has nonzero imaginary parts");
        }
        Ok(m)
    }

    /// Only checks that the matrix is square; used for ingestion so that
    /// [`validate`] can report what is wrong.
    pub fn new_unchecked(field: FieldTag, entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return param(format!("matrix must be square and nonempty, got {}x{}", entries.nrows(), entries.ncols()));
        }
        Ok(HermitianMatrix { field, entries })
    }

    pub fn from_real(entries: DMatrix<f64>) -> Result<Self> {
        Self::new(FieldTag::Real, linalg::real_matrix_to_complex(&entries))
    }

    /// Symmetrizes `(M + M*)/2`, which is exactly self-adjoint in floating point.
    pub(crate) fn hermitian_part(field: FieldTag, m: &CMatrix) -> Self {
        let mut h = (m + m.adjoint()) * c(0.5, 0.0);
        for k in 0..h.nrows() {
            h[(k, k)].im = 0.0;
        }
        if field == FieldTag::Real {
            h.iter_mut().for_each(|z| z.im = 0.0);
        }
        HermitianMatrix { field, entries: h }
    }

    pub fn field(&self) -> FieldTag {
        self.field
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// Real part `B` of `A = B + iC`.
    pub fn real_part(&self) -> DMatrix<f64> {
        self.entries.map(|z| z.re)
    }

    pub fn self_adjoint_defect(&self) -> f64 {
        self.entries
            .iter()
            .zip(self.entries.adjoint().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn imaginary_defect(&self) -> f64 {
        self.entries.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn projection_defect(&self) -> f64 {
        (&self.entries * &self.entries - &self.entries).norm()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    pub fn numerical_rank(&self) -> usize {
        linalg::rank_complex(&self.entries, RANK_REL_TOL)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|k| self.entries[(k, k)].re).sum()
    }

    pub fn apply(&self, x: &CVector) -> CVector {
        &self.entries * x
    }

    /// `x* A x`, with the (ideally zero) imaginary part left in place.
    pub fn quadratic_form(&self, x: &CVector) -> linalg::C64 {
        x.dotc(&(&self.entries * x))
    }

    /// `v* A u`.
    pub fn sesquilinear(&self, v: &CVector, u: &CVector) -> linalg::C64 {
        v.dotc(&(&self.entries * u))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnsembleKind {
    Hankel,
    MinimalComplex,
    RandomSymmetric,
    RandomHermitian,
    RandomProjection,
    RankOneFrame,
    Ingested,
}

impl EnsembleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleKind::Hankel => "hankel",
            EnsembleKind::MinimalComplex => "minimal-complex",
            EnsembleKind::RandomSymmetric => "random-symmetric",
            EnsembleKind::RandomHermitian => "random-hermitian",
            EnsembleKind::RandomProjection => "random-projection",
            EnsembleKind::RankOneFrame => "rank-one-frame",
            EnsembleKind::Ingested => "ingested",
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hankel" => EnsembleKind::Hankel,
            "minimal-complex" => EnsembleKind::MinimalComplex,
            "random-symmetric" => EnsembleKind::RandomSymmetric,
            "random-hermitian" => EnsembleKind::RandomHermitian,
            "random-projection" => EnsembleKind::RandomProjection,
            "rank-one-frame" => EnsembleKind::RankOneFrame,
            "ingested" => EnsembleKind::Ingested,
            other => return Err(Error::Format(format!("kind: unknown ensemble kind {other:?}"))),
        })
    }
}

/// Spectral shape of a random ensemble member.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RandomKind {
    /// `Q diag(g) Q*` with Gaussian `g`, possibly indefinite.
    General,
    /// `Q Q*`, an orthogonal projection.
    Projection,
}

impl FromStr for RandomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(RandomKind::General),
            "projection" => Ok(RandomKind::Projection),
            other => param(format!("unknown random kind {other:?}, expected general or projection")),
        }
    }
}

impl RandomKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RandomKind::General => "general",
            RandomKind::Projection => "projection",
        }
    }
}

/// An ordered tuple `(A_1, ..., A_N)` of self-adjoint matrices sharing `d` and field.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    field: FieldTag,
    d: usize,
    matrices: Vec<HermitianMatrix>,
    kind: EnsembleKind,
    ranks: Option<Vec<usize>>,
    seed: Option<u64>,
}

impl Ensemble {
    pub fn new(field: FieldTag, d: usize, matrices: Vec<HermitianMatrix>, kind: EnsembleKind) -> Result<Self> {
        if d == 0 {
            return param("dimension d must be positive");
        }
        if matrices.is_empty() {
            return param("an ensemble needs at least one matrix");
        }
        for (j, m) in matrices.iter().enumerate() {
            if m.dim() != d {
                return param(format!("matrix {j} has dimension {}, expected {d}", m.dim()));
            }
            if m.field() != field {
                return param(format!("matrix {j} has field {}, expected {field}", m.field()));
            }
        }
        Ok(Ensemble { field, d, matrices, kind, ranks: None, seed: None })
    }

    pub fn with_ranks(mut self, ranks: Vec<usize>) -> Result<Self> {
        if ranks.len() != self.matrices.len() {
            return param(format!("{} ranks given for {} matrices", ranks.len(), self.matrices.len()));
        }
        self.ranks = Some(ranks);
        Ok(self)
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn field(&self) -> FieldTag {
        self.field
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of measurements `N`.
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[HermitianMatrix] {
        &self.matrices
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn ranks(&self) -> Option<&[usize]> {
        self.ranks.as_deref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Same matrices viewed over the complex field (real symmetric is Hermitian).
    pub fn as_complex(&self) -> Ensemble {
        let matrices = self
            .matrices
            .iter()
            .map(|m| HermitianMatrix { field: FieldTag::Complex, entries: m.entries.clone() })
            .collect();
        Ensemble { field: FieldTag::Complex, matrices, ..self.clone() }
    }

    /// Recovers the frame when every matrix is a rank-one positive semidefinite
    /// outer product `f f*`.
    pub fn to_frame(&self) -> Result<Frame> {
        let mut columns = Vec::with_capacity(self.len());
        for (j, m) in self.matrices.iter().enumerate() {
            let a = m.entries();
            let (k, diag) = (0..self.d)
                .map(|k| (k, a[(k, k)].re))
                .max_by(|p, q| p.1.total_cmp(&q.1))
                .expect("d > 0");
            if !(diag > 0.0) {
                return param(format!("matrix {j} is not a positive rank-one outer product"));
            }
            let f = a.column(k) / c(diag.sqrt(), 0.0);
            let defect = (&f * f.adjoint() - a).norm();
            if defect > 1e-8 * (1.0 + a.norm()) {
                return param(format!("matrix {j} is not rank-one f f* (defect {defect:e})"));
            }
            columns.push(f.into_owned());
        }
        Frame::new(self.field, self.d, columns)
    }
}

/// Frame vectors `f_1, ..., f_N`, identified with the `d x N` matrix `F`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    field: FieldTag,
    d: usize,
    columns: Vec<CVector>,
}

impl Frame {
    pub fn new(field: FieldTag, d: usize, columns: Vec<CVector>) -> Result<Self> {
        if d == 0 {
            return param("dimension d must be positive");
        }
        if columns.is_empty() {
            return param("a frame needs at least one vector");
        }
        for (j, f) in columns.iter().enumerate() {
            if f.len() != d {
                return param(format!("frame vector {j} has length {}, expected {d}", f.len()));
            }
            if f.iter().all(|z| z.norm_sqr() == 0.0) {
                return param(format!("frame vector {j} is zero"));
            }
            if field == FieldTag::Real && !linalg::is_real(f) {
                return param(format!("frame vector {j} has imaginary parts in a real frame"));
            }
        }
        Ok(Frame { field, d, columns })
    }

    pub fn from_real_matrix(f: &DMatrix<f64>) -> Result<Self> {
        let columns = f.column_iter().map(|col| linalg::real_to_complex(&col.into_owned())).collect();
        Frame::new(FieldTag::Real, f.nrows(), columns)
    }

    pub fn from_complex_matrix(f: &CMatrix) -> Result<Self> {
        let columns = f.column_iter().map(|col| col.into_owned()).collect();
        Frame::new(FieldTag::Complex, f.nrows(), columns)
    }

    pub fn field(&self) -> FieldTag {
        self.field
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[CVector] {
        &self.columns
    }

    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_columns(&self.columns)
    }

    pub fn real_matrix(&self) -> DMatrix<f64> {
        self.matrix().map(|z| z.re)
    }
}

/// `A_t` with ones where `j + k = t + 1` (1-based), `t = 1..d`.
pub fn hankel_ensemble(d: usize) -> Result<Ensemble> {
    if d == 0 {
        return param("d must be at least 1");
    }
    let matrices = (1..=d)
        .map(|t| {
            let m = DMatrix::from_fn(d, d, |j, k| if j + k + 2 == t + 1 { 1.0 } else { 0.0 });
            HermitianMatrix::from_real(m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(FieldTag::Real, d, matrices, EnsembleKind::Hankel)
}

/// The `2d - 1` Hermitian matrices `e1 e1^T`, `e1 ej^T + ej e1^T` and
/// `i e1 ej^T - i ej e1^T` for `j = 2..d`.
pub fn minimal_complex_ensemble(d: usize) -> Result<Ensemble> {
    if d == 0 {
        return param("d must be at least 1");
    }
    let zero = CMatrix::zeros(d, d);
    let mut matrices = Vec::with_capacity(2 * d - 1);
    let mut first = zero.clone();
    first[(0, 0)] = c(1.0, 0.0);
    matrices.push(first);
    for j in 1..d {
        let mut m = zero.clone();
        m[(0, j)] = c(1.0, 0.0);
        m[(j, 0)] = c(1.0, 0.0);
        matrices.push(m);
    }
    for j in 1..d {
        let mut m = zero.clone();
        m[(0, j)] = I;
        m[(j, 0)] = -I;
        matrices.push(m);
    }
    let matrices = matrices
        .into_iter()
        .map(|m| HermitianMatrix::new(FieldTag::Complex, m))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(FieldTag::Complex, d, matrices, EnsembleKind::MinimalComplex)
}

/// Random ensemble of `n` matrices with the given ranks. Matrix `j` draws from
/// its own substream, so the result depends only on `(seed, j, parameters)`.
pub fn random_ensemble(
    field: FieldTag,
    d: usize,
    n: usize,
    ranks: &[usize],
    kind: RandomKind,
    seed: u64,
) -> Result<Ensemble> {
    if d == 0 || n == 0 {
        return param("d and N must be positive");
    }
    if ranks.len() != n {
        return param(format!("expected {n} ranks, got {}", ranks.len()));
    }
    if let Some((j, r)) = ranks.iter().enumerate().find(|(_, &r)| r == 0 || r > d) {
        return param(format!("rank {r} of matrix {j} is outside [1, {d}]"));
    }
    let matrices = ranks
        .iter()
        .enumerate()
        .map(|(j, &r)| random_member(field, d, r, kind, &mut rng::substream(seed, domain::ENSEMBLE, j as u64)))
        .collect::<Vec<_>>();
    let label = match (kind, field) {
        (RandomKind::Projection, _) => EnsembleKind::RandomProjection,
        (RandomKind::General, FieldTag::Real) => EnsembleKind::RandomSymmetric,
        (RandomKind::General, FieldTag::Complex) => EnsembleKind::RandomHermitian,
    };
    Ok(Ensemble::new(field, d, matrices, label)?.with_ranks(ranks.to_vec())?.with_seed(Some(seed)))
}

fn random_member(field: FieldTag, d: usize, r: usize, kind: RandomKind, rng: &mut rng::Rng) -> HermitianMatrix {
    let g = rng::gaussian_matrix(rng, field, d, r);
    let q = g.qr().q();
    let core = match kind {
        RandomKind::General => {
            let lambda = CMatrix::from_diagonal(&CVector::from_fn(r, |_, _| c(rng::normal(rng), 0.0)));
            &q * lambda * q.adjoint()
        }
        RandomKind::Projection => &q * q.adjoint(),
    };
    HermitianMatrix::hermitian_part(field, &core)
}

/// `A_j = f_j f_j*`.
pub fn rank_one_from_frame(frame: &Frame) -> Result<Ensemble> {
    let matrices = frame
        .columns()
        .iter()
        .map(|f| HermitianMatrix::hermitian_part(frame.field(), &(f * f.adjoint())))
        .collect();
    Ensemble::new(frame.field(), frame.dim(), matrices, EnsembleKind::RankOneFrame)?.with_ranks(vec![1; frame.len()])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatrixDiagnostics {
    pub index: usize,
    pub self_adjoint_defect: f64,
    pub imaginary_defect: f64,
    pub numerical_rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection_defect: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub matrices: Vec<MatrixDiagnostics>,
    pub failures: Vec<String>,
}

/// Checks every ensemble invariant and reports per-matrix diagnostics.
pub fn validate(e: &Ensemble) -> ValidationReport {
    let mut failures = Vec::new();
    let mut matrices = Vec::with_capacity(e.len());
    for (j, m) in e.matrices().iter().enumerate() {
        let diag = MatrixDiagnostics {
            index: j,
            self_adjoint_defect: m.self_adjoint_defect(),
            imaginary_defect: m.imaginary_defect(),
            numerical_rank: m.numerical_rank(),
            projection_defect: (e.kind() == EnsembleKind::RandomProjection).then(|| m.projection_defect()),
        };
        if m.dim() != e.dim() {
            failures.push(format!("matrix {j}: dimension {} differs from d = {}", m.dim(), e.dim()));
        }
        if diag.self_adjoint_defect > INGEST_HERMITIAN_TOL {
            failures.push(format!("matrix {j}: self-adjointness defect {:e}", diag.self_adjoint_defect));
        }
        if e.field() == FieldTag::Real && diag.imaginary_defect != 0.0 {
            failures.push(format!("matrix {j}: nonzero imaginary part in a real ensemble"));
        }
        if let Some(ranks) = e.ranks() {
            if ranks[j] != diag.numerical_rank {
                failures.push(format!("matrix {j}: numerical rank {} but declared {}", diag.numerical_rank, ranks[j]));
            }
        }
        if let Some(p) = diag.projection_defect {
            if p >= PROJECTION_TOL {
                failures.push(format!("matrix {j}: projection defect {p:e}"));
            }
        }
        matrices.push(diag);
    }
    ValidationReport { pass: failures.is_empty(), matrices, failures }
}
