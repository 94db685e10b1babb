//! JSON interchange for ensembles, frames, signals and measurements.
//!
//! Entries are either bare numbers or `[re, im]` pairs. Readers accept both
//! forms in either field; writers emit pairs for complex data and bare numbers
//! for real data. Matrices are nested row-major arrays.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;

use crate::ensembles::{Ensemble, EnsembleKind, FieldTag, Frame, HermitianMatrix};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector, C64};
use crate::measurement::MeasurementVector;

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Pair([f64; 2]),
}

impl Entry {
    fn value(self) -> C64 {
        match self {
            Entry::Real(re) => c(re, 0.0),
            Entry::Pair([re, im]) => c(re, im),
        }
    }
}

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

fn entry_json(z: C64, field: FieldTag) -> Value {
    match field {
        FieldTag::Real => Value::from(z.re),
        FieldTag::Complex => Value::from(vec![z.re, z.im]),
    }
}

/// A vector as JSON: pairs over the complex field, bare numbers over the reals.
pub fn vector_json(x: &CVector, field: FieldTag) -> Value {
    Value::Array(x.iter().map(|z| entry_json(*z, field)).collect())
}

/// Serde adapter: bare numbers when every imaginary part is zero, pairs otherwise.
pub fn serialize_complex_vector<S: Serializer>(x: &CVector, s: S) -> std::result::Result<S::Ok, S::Error> {
    let field = if x.iter().all(|z| z.im == 0.0) { FieldTag::Real } else { FieldTag::Complex };
    vector_json(x, field).serialize(s)
}

fn matrix_json(m: &CMatrix, field: FieldTag) -> Value {
    Value::Array(
        m.row_iter()
            .map(|row| Value::Array(row.iter().map(|z| entry_json(*z, field)).collect()))
            .collect(),
    )
}

fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn ensemble_json(e: &Ensemble) -> Value {
    let mut obj = serde_json::Map::new();
    obj.insert("field".into(), Value::from(e.field().as_str()));
    obj.insert("d".into(), Value::from(e.dim()));
    obj.insert("N".into(), Value::from(e.len()));
    obj.insert("kind".into(), Value::from(e.kind().as_str()));
    obj.insert("seed".into(), e.seed().map_or(Value::Null, Value::from));
    if let Some(r) = e.ranks() {
        obj.insert("ranks".into(), Value::from(r.to_vec()));
    }
    obj.insert(
        "matrices".into(),
        Value::Array(e.matrices().iter().map(|m| matrix_json(m.entries(), e.field())).collect()),
    );
    Value::Object(obj)
}

pub fn ensemble_to_string(e: &Ensemble) -> String {
    to_pretty(&ensemble_json(e))
}

#[derive(Deserialize)]
struct RawEnsemble {
    field: String,
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    ranks: Option<Vec<usize>>,
    matrices: Vec<Vec<Vec<Entry>>>,
}

fn parse_field(s: &str) -> Result<FieldTag> {
    match s {
        "R" => Ok(FieldTag::Real),
        "C" => Ok(FieldTag::Complex),
        other => format_err(format!("field: expected \"R\" or \"C\", got {other:?}")),
    }
}

fn parse_matrix(raw: &[Vec<Entry>], d: usize, field: FieldTag, path: &str) -> Result<CMatrix> {
    if raw.len() != d {
        return format_err(format!("{path}: expected {d} rows, got {}", raw.len()));
    }
    let mut m = CMatrix::zeros(d, d);
    for (r, row) in raw.iter().enumerate() {
        if row.len() != d {
            return format_err(format!("{path}[{r}]: expected {d} entries, got {}", row.len()));
        }
        for (k, entry) in row.iter().enumerate() {
            let z = entry.value();
            if field == FieldTag::Real && z.im != 0.0 {
                return format_err(format!("{path}[{r}][{k}]: imaginary part in a real ensemble"));
            }
            if !(z.re.is_finite() && z.im.is_finite()) {
                return format_err(format!("{path}[{r}][{k}]: entry is not finite"));
            }
            m[(r, k)] = z;
        }
    }
    Ok(m)
}

fn parse_ensemble_impl(text: &str, strict: bool) -> Result<Ensemble> {
    let raw: RawEnsemble = serde_json::from_str(text)?;
    let field = parse_field(&raw.field)?;
    if raw.d == 0 {
        return format_err("d: must be positive");
    }
    if raw.matrices.len() != raw.n {
        return format_err(format!("matrices: N is {} but {} matrices are listed", raw.n, raw.matrices.len()));
    }
    let kind = match raw.kind.as_deref() {
        None => EnsembleKind::Ingested,
        Some(k) => k.parse()?,
    };
    let mut matrices = Vec::with_capacity(raw.n);
    for (j, m) in raw.matrices.iter().enumerate() {
        let path = format!("matrices[{j}]");
        let entries = parse_matrix(m, raw.d, field, &path)?;
        let h = if strict { HermitianMatrix::new(field, entries) } else { HermitianMatrix::new_unchecked(field, entries) };
        matrices.push(h.map_err(|e| Error::Format(format!("{path}: {e}")))?);
    }
    let mut e = Ensemble::new(field, raw.d, matrices, kind).map_err(|e| Error::Format(e.to_string()))?;
    if let Some(r) = raw.ranks {
        e = e.with_ranks(r).map_err(|e| Error::Format(format!("ranks: {e}")))?;
    }
    Ok(e.with_seed(raw.seed))
}

/// Parses an ensemble file and enforces self-adjointness.
pub fn parse_ensemble(text: &str) -> Result<Ensemble> {
    parse_ensemble_impl(text, true)
}

/// Parses an ensemble file checking only shapes, so that
/// [`crate::ensembles::validate`] can report every defect.
pub fn parse_ensemble_lenient(text: &str) -> Result<Ensemble> {
    parse_ensemble_impl(text, false)
}

pub fn frame_json(f: &Frame) -> Value {
    serde_json::json!({
        "field": f.field().as_str(),
        "d": f.dim(),
        "N": f.len(),
        "columns": f.columns().iter().map(|v| vector_json(v, f.field())).collect::<Vec<_>>(),
    })
}

pub fn frame_to_string(f: &Frame) -> String {
    to_pretty(&frame_json(f))
}

#[derive(Deserialize)]
struct RawFrame {
    field: String,
    d: usize,
    #[serde(rename = "N")]
    n: Option<usize>,
    columns: Vec<Vec<Entry>>,
}

/// Parses `{ "field", "d", "N", "columns": [[...], ...] }`.
pub fn parse_frame(text: &str) -> Result<Frame> {
    let raw: RawFrame = serde_json::from_str(text)?;
    let field = parse_field(&raw.field)?;
    if let Some(n) = raw.n {
        if n != raw.columns.len() {
            return format_err(format!("columns: N is {n} but {} columns are listed", raw.columns.len()));
        }
    }
    let mut columns = Vec::with_capacity(raw.columns.len());
    for (j, col) in raw.columns.iter().enumerate() {
        if col.len() != raw.d {
            return format_err(format!("columns[{j}]: expected {} entries, got {}", raw.d, col.len()));
        }
        let v = CVector::from_iterator(raw.d, col.iter().map(|e| e.value()));
        if field == FieldTag::Real && v.iter().any(|z| z.im != 0.0) {
            return format_err(format!("columns[{j}]: imaginary part in a real frame"));
        }
        columns.push(v);
    }
    Frame::new(field, raw.d, columns).map_err(|e| Error::Format(e.to_string()))
}

/// Parses a signal: a JSON array of numbers or `[re, im]` pairs.
pub fn parse_signal(text: &str) -> Result<CVector> {
    let raw: Vec<Entry> = serde_json::from_str(text)?;
    if raw.is_empty() {
        return format_err("signal: empty vector");
    }
    let x = CVector::from_iterator(raw.len(), raw.iter().map(|e| e.value()));
    if x.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return format_err("signal: entries must be finite");
    }
    Ok(x)
}

pub fn signal_to_string(x: &CVector, field: FieldTag) -> String {
    to_pretty(&vector_json(x, field))
}

/// Measurements with 17 significant digits.
pub fn measurements_to_string(m: &MeasurementVector) -> String {
    let body: Vec<String> = m.values().iter().map(|v| format!("  {v:.16e}")).collect();
    format!("[\n{}\n]\n", body.join(",\n"))
}

pub fn parse_measurements(text: &str) -> Result<MeasurementVector> {
    let v: Vec<f64> = serde_json::from_str(text)?;
    Ok(MeasurementVector(v))
}

/// Reads a matrix given as nested rows of entries, e.g. the block `G` of `[I, G]`.
pub fn parse_complex_matrix(text: &str) -> Result<CMatrix> {
    let raw: Vec<Vec<Entry>> = serde_json::from_str(text)?;
    let rows = raw.len();
    let cols = raw.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 || raw.iter().any(|r| r.len() != cols) {
        return format_err("matrix: rows must be nonempty and of equal length");
    }
    Ok(DMatrix::from_fn(rows, cols, |r, k| raw[r][k].value()))
}
