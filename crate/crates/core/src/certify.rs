//! Deciding or estimating almost-everywhere injectivity of the measurement map.
//!
//! Only two methods are exact: the partition criterion for real rank-one
//! frames and the full-spark test for real frames with `N = d + 1`. Everything
//! else samples and reports `LIKELY_*` or `INCONCLUSIVE`.

use std::collections::BTreeMap;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::ambiguity::CollisionWitness;
use crate::ensembles::{rank_one_from_frame, Ensemble, FieldTag, Frame};
use crate::error::{param, Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, I, RANK_REL_TOL};
use crate::measurement::{self, phase_distance};
use crate::recovery::{self, SolverOptions};
use crate::refine::{QuadraticSystem, CERTIFY_TOL};
use crate::rng::{self, domain};

/// Largest `N` the partition enumeration accepts (`2^(N-1)` partitions).
pub const EXACT_BUDGET: usize = 24;
pub const PROBE_RANK_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    PrAe,
    NotPrAe,
    LikelyPrAe,
    LikelyNotPrAe,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::PrAe => "PR_AE",
            Verdict::NotPrAe => "NOT_PR_AE",
            Verdict::LikelyPrAe => "LIKELY_PR_AE",
            Verdict::LikelyNotPrAe => "LIKELY_NOT_PR_AE",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Verdict::PrAe | Verdict::NotPrAe)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactRankOne,
    Spark,
    Survey,
    Tangent,
    Montecarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ExactRankOne => "exact-rank-one",
            Method::Spark => "spark",
            Method::Survey => "survey",
            Method::Tangent => "tangent",
            Method::Montecarlo => "montecarlo",
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Method::ExactRankOne | Method::Spark)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exact-rank-one" => Method::ExactRankOne,
            "spark" => Method::Spark,
            "survey" => Method::Survey,
            "tangent" => Method::Tangent,
            "montecarlo" => Method::Montecarlo,
            other => return param(format!("unknown method {other:?}")),
        })
    }
}

/// Index sets `I`, `J` (0-based) covering all frame vectors, with
/// `dim V_I^perp`, `dim V_J^perp` and the dimension of their sum.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubsetPairWitness {
    #[serde(rename = "I")]
    pub i: Vec<usize>,
    #[serde(rename = "J")]
    pub j: Vec<usize>,
    pub dim_i_perp: usize,
    pub dim_j_perp: usize,
    pub dim_sum: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Witness {
    SubsetPair(SubsetPairWitness),
    Collision(CollisionWitness),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertReport {
    pub verdict: Verdict,
    pub method: Method,
    pub witnesses: Vec<Witness>,
    pub stats: BTreeMap<String, Value>,
    pub tolerances: BTreeMap<String, f64>,
}

impl CertReport {
    fn new(verdict: Verdict, method: Method) -> Self {
        assert!(!verdict.is_exact() || method.is_exact(), "exact verdicts need an exact method");
        CertReport { verdict, method, witnesses: Vec::new(), stats: BTreeMap::new(), tolerances: BTreeMap::new() }
    }

    fn stat(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.stats.insert(key.to_string(), value.into());
        self
    }

    fn tol(mut self, key: &str, value: f64) -> Self {
        self.tolerances.insert(key.to_string(), value);
        self
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }
}

fn column_subset(f: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(f.nrows(), idx.len(), |r, k| f[(r, idx[k])])
}

fn rank_or_zero(m: &DMatrix<f64>) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        0
    } else {
        linalg::rank(m, RANK_REL_TOL)
    }
}

/// Orthonormal basis of `V_I^perp` for the columns `I` of `f`.
pub fn complement_basis(f: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    if idx.is_empty() {
        return DMatrix::identity(f.nrows(), f.nrows());
    }
    linalg::orthogonal_complement(&column_subset(f, idx), RANK_REL_TOL)
}

/// `dim(V_I^perp + V_J^perp)` as the rank of the two complement bases side by side.
pub fn subset_pair(f: &DMatrix<f64>, i: &[usize], j: &[usize]) -> SubsetPairWitness {
    let pi = complement_basis(f, i);
    let pj = complement_basis(f, j);
    let joined = DMatrix::from_fn(f.nrows(), pi.ncols() + pj.ncols(), |r, k| {
        if k < pi.ncols() {
            pi[(r, k)]
        } else {
            pj[(r, k - pi.ncols())]
        }
    });
    SubsetPairWitness {
        i: i.to_vec(),
        j: j.to_vec(),
        dim_i_perp: pi.ncols(),
        dim_j_perp: pj.ncols(),
        dim_sum: rank_or_zero(&joined),
    }
}

fn partition(mask: u64, n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut i = vec![0];
    let mut j = Vec::new();
    for k in 1..n {
        if mask >> (k - 1) & 1 == 1 {
            i.push(k);
        } else {
            j.push(k);
        }
    }
    (i, j)
}

/// Exact decision for real rank-one frames. The frame must span, and no
/// partition `I, J` (both nonempty, `0 in I`) may have
/// `V_I^perp + V_J^perp = R^d`. Covering pairs need not be enumerated: enlarging
/// `I` only shrinks `V_I^perp`.
pub fn real_rank_one_exact(frame: &Frame) -> Result<CertReport> {
    if frame.field() != FieldTag::Real {
        return Err(Error::Unsupported("the partition criterion only applies to real frames".into()));
    }
    let n = frame.len();
    if n > EXACT_BUDGET {
        return param(format!(
            "N = {n} exceeds the enumeration budget of {EXACT_BUDGET}; use the montecarlo method instead"
        ));
    }
    let d = frame.dim();
    let f = frame.real_matrix();
    let all: Vec<usize> = (0..n).collect();
    let base = |verdict| {
        CertReport::new(verdict, Method::ExactRankOne)
            .stat("d", d)
            .stat("N", n)
            .tol("rank_relative", RANK_REL_TOL)
    };
    if rank_or_zero(&f) < d {
        let w = subset_pair(&f, &all, &[]);
        return Ok(base(Verdict::NotPrAe).stat("spans", false).stat("partitions_checked", 0).with_witness(Witness::SubsetPair(w)));
    }
    let count = 1u64 << (n - 1);
    // Every mask but the last leaves J nonempty.
    let hit = (0..count - 1).into_par_iter().find_first(|&mask| {
        let (i, j) = partition(mask, n);
        subset_pair(&f, &i, &j).dim_sum == d
    });
    Ok(match hit {
        Some(mask) => {
            let (i, j) = partition(mask, n);
            base(Verdict::NotPrAe)
                .stat("spans", true)
                .stat("partitions_checked", mask + 1)
                .with_witness(Witness::SubsetPair(subset_pair(&f, &i, &j)))
        }
        None => base(Verdict::PrAe).stat("spans", true).stat("partitions_checked", count - 1),
    })
}

impl CertReport {
    fn with_witness(mut self, w: Witness) -> Self {
        self.witnesses.push(w);
        self
    }
}

/// Colliding pair `x = p + q`, `y = p - q` with `p` in `V_I^perp`, `q` in
/// `V_J^perp` drawn from the seed.
pub fn partition_collision(frame: &Frame, w: &SubsetPairWitness, seed: u64) -> Result<CollisionWitness> {
    if frame.field() != FieldTag::Real {
        return Err(Error::Unsupported("partition collisions are built for real frames".into()));
    }
    let f = frame.real_matrix();
    let pi = complement_basis(&f, &w.i);
    let pj = complement_basis(&f, &w.j);
    if pi.ncols() == 0 || pj.ncols() == 0 {
        return param("both complements must be nonzero to build a collision");
    }
    let mut rng = rng::substream(seed, domain::GRAM, 0);
    let p = &pi * rng::gaussian_real_vector(&mut rng, pi.ncols());
    let q = &pj * rng::gaussian_real_vector(&mut rng, pj.ncols());
    let e = rank_one_from_frame(frame)?;
    CollisionWitness::new(&e, linalg::real_to_complex(&(&p + &q)), linalg::real_to_complex(&(&p - &q)))
}

/// Whether every `d` columns are linearly independent.
pub fn full_spark(frame: &Frame) -> Result<bool> {
    let d = frame.dim();
    if frame.len() < d {
        return param(format!("full spark needs N >= d, got N = {} < d = {d}", frame.len()));
    }
    let f = frame.matrix();
    Ok((0..frame.len()).combinations(d).all(|idx| {
        let sub = CMatrix::from_fn(d, d, |r, k| f[(r, idx[k])]);
        linalg::rank_complex(&sub, RANK_REL_TOL) == d
    }))
}

/// Full spark decides real frames with `N = d + 1`; elsewhere it is only recorded.
pub fn spark_report(frame: &Frame) -> Result<CertReport> {
    let spark = full_spark(frame)?;
    let decisive = frame.field() == FieldTag::Real && frame.len() == frame.dim() + 1;
    let verdict = match (decisive, spark) {
        (true, true) => Verdict::PrAe,
        (true, false) => Verdict::NotPrAe,
        (false, _) => Verdict::Inconclusive,
    };
    Ok(CertReport::new(verdict, Method::Spark)
        .stat("full_spark", spark)
        .stat("decisive", decisive)
        .stat("d", frame.dim())
        .stat("N", frame.len())
        .tol("rank_relative", RANK_REL_TOL))
}

fn nonzero(x: &CVector) -> bool {
    x.iter().any(|z| z.norm_sqr() > 0.0)
}

/// Orthonormal basis of `{v : v^T A_j u = 0 for all j}` for a real ensemble.
pub fn bilinear_kernel(e: &Ensemble, u: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    if e.field() != FieldTag::Real {
        return Err(Error::Unsupported("bilinear_kernel is defined for real ensembles".into()));
    }
    if u.len() != e.dim() || u.iter().all(|v| *v == 0.0) {
        return param(format!("u must be a nonzero vector of length {}", e.dim()));
    }
    let rows: Vec<DVector<f64>> = e.matrices().iter().map(|a| a.real_part() * u).collect();
    let m = DMatrix::from_fn(rows.len(), e.dim(), |r, k| rows[r][k]);
    Ok(linalg::null_space(&m, RANK_REL_TOL))
}

/// Orthonormal real basis of `{v : Re(v* A_j u) = 0 for all j}` in the real
/// coordinates of `C^d`, returned as complex vectors. Always contains `i u`.
pub fn polarization_kernel(e: &Ensemble, u: &CVector) -> Result<Vec<CVector>> {
    if u.len() != e.dim() || !nonzero(u) {
        return param(format!("u must be a nonzero vector of length {}", e.dim()));
    }
    let d = e.dim();
    let rows: Vec<CVector> = e.matrices().iter().map(|a| a.apply(u)).collect();
    // Re(v* w) = Re(v) . Re(w) + Im(v) . Im(w).
    let m = DMatrix::from_fn(rows.len(), 2 * d, |r, k| if k < d { rows[r][k].re } else { rows[r][k - d].im });
    Ok(linalg::null_space(&m, RANK_REL_TOL).iter().map(linalg::complexify).collect())
}

/// Kernel directions at `u` that are not forced: everything for real
/// ensembles, the complement of `i u` for complex ones.
pub(crate) fn admissible_kernel(e: &Ensemble, u: &CVector) -> Result<Vec<CVector>> {
    match e.field() {
        FieldTag::Real => Ok(bilinear_kernel(e, &linalg::real_part(u))?.iter().map(linalg::real_to_complex).collect()),
        FieldTag::Complex => {
            let forced = linalg::realify(&(u * I));
            let forced = &forced / forced.norm();
            let projected: Vec<DVector<f64>> = polarization_kernel(e, u)?
                .iter()
                .map(|k| {
                    let k = linalg::realify(k);
                    &k - &forced * forced.dot(&k)
                })
                .collect();
            if projected.is_empty() {
                return Ok(Vec::new());
            }
            let svd = DMatrix::from_columns(&projected).svd(true, false);
            let cols = svd.u.expect("requested");
            Ok((0..svd.singular_values.len())
                .filter(|&k| svd.singular_values[k] > 1e-8)
                .map(|k| linalg::complexify(&cols.column(k).into_owned()))
                .collect())
        }
    }
}

/// Jacobian rank at random points. One regular point shows the degenerate
/// set is null; all points degenerate at one common rank suggests it is everything.
pub fn jacobian_rank_survey(e: &Ensemble, samples: usize, seed: u64) -> Result<CertReport> {
    if samples == 0 {
        return param("samples must be at least 1");
    }
    let target = e.field().regular_rank(e.dim());
    let ranks = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng::substream(seed, domain::SURVEY, s as u64);
            let x = rng::gaussian_vector(&mut rng, e.field(), e.dim());
            measurement::jacobian(e, &x).map(|j| j.rank)
        })
        .collect::<Result<Vec<usize>>>()?;
    let regular = ranks.iter().filter(|&&r| r == target).count();
    let (min_rank, max_rank) = (*ranks.iter().min().expect("samples >= 1"), *ranks.iter().max().expect("samples >= 1"));
    let (verdict, degenerate_set) = if regular > 0 {
        (Verdict::Inconclusive, "null")
    } else if min_rank == max_rank {
        (Verdict::LikelyNotPrAe, "everything")
    } else {
        (Verdict::Inconclusive, "unresolved")
    };
    Ok(CertReport::new(verdict, Method::Survey)
        .stat("samples", samples)
        .stat("regular", regular)
        .stat("target_rank", target)
        .stat("min_rank", min_rank)
        .stat("max_rank", max_rank)
        .stat("degenerate_set", degenerate_set)
        .stat("seed", seed)
        .tol("rank_relative", RANK_REL_TOL))
}

/// The `N x 2d` complex matrix with rows `[(A_j y)^T, (A_j x)^T]`.
fn incidence_jacobian(mats: &[DMatrix<f64>], x: &CVector, y: &CVector) -> CMatrix {
    let d = x.len();
    let mut m = CMatrix::zeros(mats.len(), 2 * d);
    for (j, a) in mats.iter().enumerate() {
        let ac = linalg::real_matrix_to_complex(a);
        let ay = &ac * y;
        let ax = &ac * x;
        for k in 0..d {
            m[(j, k)] = ay[k];
            m[(j, d + k)] = ax[k];
        }
    }
    m
}

/// Newton iteration with minimum-norm steps on `x^T A_j y = 0`, `a^T x = 1`,
/// `b^T y = 1`.
fn incidence_newton(mats: &[DMatrix<f64>], rng: &mut rng::Rng, d: usize) -> Option<(CVector, CVector)> {
    let a = rng::gaussian_vector(rng, FieldTag::Complex, d);
    let b = rng::gaussian_vector(rng, FieldTag::Complex, d);
    let mut x = rng::gaussian_vector(rng, FieldTag::Complex, d);
    let mut y = rng::gaussian_vector(rng, FieldTag::Complex, d);
    x /= a.dot(&x);
    y /= b.dot(&y);
    let n = mats.len();
    let max_a = mats.iter().map(|m| m.norm()).fold(0.0, f64::max).max(1e-300);
    for _ in 0..200 {
        let mut g = CVector::zeros(n + 2);
        for (j, m) in mats.iter().enumerate() {
            g[j] = x.dot(&(linalg::real_matrix_to_complex(m) * &y));
        }
        g[n] = a.dot(&x) - c(1.0, 0.0);
        g[n + 1] = b.dot(&y) - c(1.0, 0.0);
        let scale = max_a * x.norm() * y.norm();
        if g.rows(0, n).norm() < 1e-13 * scale && g[n].norm() < 1e-12 && g[n + 1].norm() < 1e-12 {
            return Some((x, y));
        }
        let mut jac = CMatrix::zeros(n + 2, 2 * d);
        jac.rows_mut(0, n).copy_from(&incidence_jacobian(mats, &x, &y));
        for k in 0..d {
            jac[(n, k)] = a[k];
            jac[(n + 1, d + k)] = b[k];
        }
        let step = jac.svd(true, true).solve(&g, 1e-14).ok()?;
        x -= step.rows(0, d);
        y -= step.rows(d, d);
        if !(x.norm().is_finite() && y.norm().is_finite()) {
            return None;
        }
    }
    None
}

/// Samples points of `{(x, y) in C^d x C^d : x^T A_j y = 0}` with both factors
/// nonzero and reports the largest tangent dimension `2d - rank` seen.
pub fn tangent_dimension_probe(e: &Ensemble, attempts: usize, seed: u64) -> Result<CertReport> {
    if e.field() != FieldTag::Real {
        return Err(Error::Unsupported("the tangent probe is defined for real ensembles".into()));
    }
    if attempts == 0 {
        return param("attempts must be at least 1");
    }
    let d = e.dim();
    let mats: Vec<DMatrix<f64>> = e.matrices().iter().map(|a| a.real_part()).collect();
    let dims: Vec<Option<usize>> = (0..attempts)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::substream(seed, domain::TANGENT, t as u64);
            let x = rng::gaussian_vector(&mut rng, FieldTag::Complex, d);
            // Rows x^T A_j = (A_j x)^T, the A_j being symmetric.
            let ax: Vec<CVector> = mats.iter().map(|m| linalg::real_matrix_to_complex(m) * &x).collect();
            let mx = CMatrix::from_fn(mats.len(), d, |j, k| ax[j][k]);
            let fiber = linalg::null_space_complex(&mx, RANK_REL_TOL);
            let point = if fiber.is_empty() {
                incidence_newton(&mats, &mut rng, d)
            } else {
                let y = fiber.iter().fold(CVector::zeros(d), |acc, v| {
                    acc + v * c(rng::normal(&mut rng), rng::normal(&mut rng))
                });
                Some((x, y))
            };
            point.map(|(x, y)| {
                let x = &x / c(x.norm(), 0.0);
                let y = &y / c(y.norm(), 0.0);
                2 * d - linalg::rank_complex(&incidence_jacobian(&mats, &x, &y), PROBE_RANK_TOL)
            })
        })
        .collect();
    let found: Vec<usize> = dims.iter().flatten().copied().collect();
    let max_dim = found.iter().max().copied();
    let verdict = match max_dim {
        Some(m) if m + 1 <= d => Verdict::LikelyPrAe,
        _ => Verdict::Inconclusive,
    };
    Ok(CertReport::new(verdict, Method::Tangent)
        .stat("attempts", attempts)
        .stat("points_found", found.len())
        .stat("max_dimension", max_dim.map_or(Value::Null, Value::from))
        .stat("threshold", d - 1)
        .stat("seed", seed)
        .tol("probe_rank_relative", PROBE_RANK_TOL))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloOptions {
    pub trials: usize,
    pub restarts: usize,
    pub seed: u64,
    /// A candidate counts as distinct from `x` beyond this times `||x||`.
    pub separation_floor: f64,
    /// ...and as colliding when `||M(y) - b|| < residual_tol * ||b||`.
    pub residual_tol: f64,
    pub max_iters: usize,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions { trials: 200, restarts: 8, seed: 0, separation_floor: 0.05, residual_tol: 1e-8, max_iters: 200 }
    }
}

/// Largest number of collision witnesses kept in a report.
const MAX_REPORTED_WITNESSES: usize = 3;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Route {
    Kernel,
    Search,
}

fn mc_trial(
    e: &Ensemble,
    sys: &QuadraticSystem,
    opts: &MonteCarloOptions,
    t: usize,
) -> Result<Option<(Route, CollisionWitness)>> {
    let mut rng = rng::substream(opts.seed, domain::MONTE_CARLO, t as u64);
    let x = rng::gaussian_vector(&mut rng, e.field(), e.dim());
    let b = measurement::measure(e, &x)?;
    let floor = opts.separation_floor * x.norm();
    let solver = SolverOptions { max_iters: opts.max_iters, ..SolverOptions::default() };
    // A candidate must pass the float-level screen, then survive refinement
    // in double-double precision and still be off the orbit of x.
    let confirm = |y0: &CVector| -> Result<Option<CollisionWitness>> {
        let y = recovery::local_solve(e, b.values(), y0, &solver).y;
        let m = measurement::measure_values(e, &y);
        let gap = m.iter().zip(b.values()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        if !(gap < opts.residual_tol * b.norm() && phase_distance(&x, &y, e.field()) > floor) {
            return Ok(None);
        }
        match sys.certify(&x, &y) {
            Some((z, _)) if phase_distance(&x, &z, e.field()) > floor => Ok(Some(CollisionWitness::new(e, x.clone(), z)?)),
            _ => Ok(None),
        }
    };

    // Route (a): from the pair (x + v, x - v) built on a free kernel direction
    // at x, project onto the level set of b.
    if let Some(v) = admissible_kernel(e, &x)?.first() {
        let v = v * c(x.norm() / v.norm(), 0.0);
        for y0 in [&x + &v, &x - &v] {
            if let Some(w) = confirm(&y0)? {
                return Ok(Some((Route::Kernel, w)));
            }
        }
    }

    // Route (b): local least squares from random starts.
    let search_seed = rng::child_seed(opts.seed, domain::MONTE_CARLO, t as u64);
    for r in 0..opts.restarts {
        let mut rr = rng::substream(search_seed, domain::RECOVERY, r as u64);
        let y0 = recovery::initial_point(e, b.values(), &mut rr);
        if let Some(w) = confirm(&y0)? {
            return Ok(Some((Route::Search, w)));
        }
    }
    Ok(None)
}

/// Estimated collision rate at random signals. Trials run on the current
/// rayon pool, each on its own substream, so the report does not depend on
/// the number of workers.
pub fn monte_carlo_injectivity(e: &Ensemble, opts: &MonteCarloOptions) -> Result<CertReport> {
    if opts.trials == 0 {
        return param("trials must be at least 1");
    }
    let sys = QuadraticSystem::new(e);
    let outcomes =
        (0..opts.trials).into_par_iter().map(|t| mc_trial(e, &sys, opts, t)).collect::<Result<Vec<_>>>()?;
    let hits: Vec<&(Route, CollisionWitness)> = outcomes.iter().flatten().collect();
    let rate = hits.len() as f64 / opts.trials as f64;
    let verdict = if hits.is_empty() {
        Verdict::LikelyPrAe
    } else if rate > 0.1 {
        Verdict::LikelyNotPrAe
    } else {
        Verdict::Inconclusive
    };
    let mut report = CertReport::new(verdict, Method::Montecarlo)
        .stat("trials", opts.trials)
        .stat("failures", hits.len())
        .stat("collision_rate", rate)
        .stat("kernel_hits", hits.iter().filter(|h| h.0 == Route::Kernel).count())
        .stat("search_hits", hits.iter().filter(|h| h.0 == Route::Search).count())
        .stat("restarts", opts.restarts)
        .stat("seed", opts.seed)
        .tol("separation_floor", opts.separation_floor)
        .tol("residual_relative", opts.residual_tol)
        .tol("certified_relative", CERTIFY_TOL)
        .tol("rank_relative", RANK_REL_TOL);
    report.witnesses = hits.iter().take(MAX_REPORTED_WITNESSES).map(|h| Witness::Collision(h.1.clone())).collect();
    Ok(report)
}

/// Runs `method` on an ensemble; the exact methods need a rank-one frame.
pub fn certify(e: &Ensemble, method: Method, opts: &MonteCarloOptions) -> Result<CertReport> {
    match method {
        Method::ExactRankOne => real_rank_one_exact(&e.to_frame()?),
        Method::Spark => spark_report(&e.to_frame()?),
        Method::Survey => jacobian_rank_survey(e, opts.trials, opts.seed),
        Method::Tangent => tangent_dimension_probe(e, opts.trials, opts.seed),
        Method::Montecarlo => monte_carlo_injectivity(e, opts),
    }
}
