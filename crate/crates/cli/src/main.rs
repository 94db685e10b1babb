use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use prae::ambiguity::gram_frame;
use prae::certify::{self, spark_report};
use prae::io;
use prae::linalg::CMatrix;
use prae::recovery::{sweep_csv, SolverOptions};
use prae::rng::{self, domain};
use prae::{
    gram_collision_witness, hankel_ensemble, kernel_collision_search, measure, minimal_complex_ensemble,
    random_ensemble, rank_one_from_frame, recover, sweep, validate, Ensemble, FieldTag, Frame, Method,
    MonteCarloOptions, RandomKind, RecoverOptions, SweepConfig, Verdict,
};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "prae", version, about = "Generalized phase retrieval: ensembles, certification, collisions, recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a measurement ensemble and write it as JSON.
    Construct(ConstructArgs),
    /// Evaluate the measurement map on a signal.
    Measure(MeasureArgs),
    /// Decide or estimate whether an ensemble is phase retrievable almost everywhere.
    Certify(CertifyArgs),
    /// Build an explicit collision witness.
    Collide(CollideArgs),
    /// Recover a signal from its measurements.
    Recover(RecoverArgs),
    /// Recovery success rates over a range of N, as CSV.
    Sweep(SweepArgs),
    /// Check every ensemble invariant and report per-matrix diagnostics.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Hankel,
    MinimalComplex,
    Random,
    Frame,
}

#[derive(Clone, Copy, ValueEnum)]
enum Field {
    R,
    C,
}

impl From<Field> for FieldTag {
    fn from(f: Field) -> Self {
        match f {
            Field::R => FieldTag::Real,
            Field::C => FieldTag::Complex,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    General,
    Projection,
}

impl From<Kind> for RandomKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::General => RandomKind::General,
            Kind::Projection => RandomKind::Projection,
        }
    }
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    d: Option<usize>,
    /// Number of matrices (random family).
    #[arg(long = "n")]
    n: Option<usize>,
    #[arg(long, value_enum, default_value = "r")]
    field: Field,
    /// Common rank of every matrix (random family); defaults to d, or 1 for projections.
    #[arg(long, conflicts_with = "ranks")]
    rank: Option<usize>,
    /// Comma-separated rank of each matrix (random family).
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "general")]
    kind: Kind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frame file for the rank-one family.
    #[arg(long)]
    frame: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long)]
    ensemble: PathBuf,
    /// Signal file: a JSON array of numbers or [re, im] pairs.
    #[arg(long, required_unless_present = "random")]
    signal: Option<PathBuf>,
    /// Draw a Gaussian signal from --seed instead of reading one.
    #[arg(long, conflicts_with = "signal")]
    random: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the drawn signal.
    #[arg(long, requires = "random")]
    save_signal: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Expect {
    PrAe,
    NotPrAe,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: prae::Error| e.to_string())
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long, required_unless_present = "frame", conflicts_with = "frame")]
    ensemble: Option<PathBuf>,
    #[arg(long)]
    frame: Option<PathBuf>,
    /// exact-rank-one | spark | survey | tangent | montecarlo
    #[arg(long, value_parser = parse_method, default_value = "montecarlo")]
    method: Method,
    /// Trials (montecarlo), samples (survey) or attempts (tangent).
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    separation_floor: Option<f64>,
    #[arg(long)]
    residual_tol: Option<f64>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Exit with status 1 when the verdict contradicts the expectation.
    #[arg(long, value_enum)]
    expect: Option<Expect>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CollideMethod {
    Gram,
    Kernel,
}

#[derive(Args)]
struct CollideArgs {
    /// `gram` for a random [I, G] frame, or a frame file whose first d columns are the identity.
    #[arg(long, conflicts_with = "ensemble")]
    frame: Option<String>,
    #[arg(long)]
    ensemble: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<CollideMethod>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long)]
    ensemble: PathBuf,
    /// JSON array of measurement values.
    #[arg(long)]
    measurements: PathBuf,
    /// Ground-truth signal, for reporting the phase error.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long)]
    residual_tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    field: Field,
    #[arg(long)]
    d: usize,
    /// Values of N: `a..b` (inclusive) or a comma-separated list.
    #[arg(long = "n", value_parser = parse_n_values)]
    n: NValues,
    #[arg(long, value_enum, default_value = "general")]
    kind: Kind,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    ensemble: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct NValues(Vec<usize>);

fn parse_n_values(s: &str) -> Result<NValues, String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    let values = match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
            if a > b {
                return Err(format!("empty range {s}"));
            }
            (a..=b).collect()
        }
        None => s.split(',').map(parse).collect::<Result<Vec<_>, _>>()?,
    };
    if values.is_empty() || values.contains(&0) {
        return Err("N values must be positive".into());
    }
    Ok(NValues(values))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_ensemble(path: &Path) -> Result<Ensemble> {
    io::parse_ensemble(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn load_frame(path: &Path) -> Result<Frame> {
    io::parse_frame(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn pretty(v: &Value) -> String {
    format!("{}\n", serde_json::to_string_pretty(v).expect("values serialize"))
}

fn need_d(d: Option<usize>, what: &str) -> Result<usize> {
    match d {
        Some(d) if d > 0 => Ok(d),
        Some(_) => bail!("--d must be positive"),
        None => bail!("--d is required for {what}"),
    }
}

fn construct(a: ConstructArgs) -> Result<u8> {
    let e = match a.family {
        Family::Hankel => hankel_ensemble(need_d(a.d, "hankel")?)?,
        Family::MinimalComplex => minimal_complex_ensemble(need_d(a.d, "minimal-complex")?)?,
        Family::Random => {
            let d = need_d(a.d, "random")?;
            let Some(n) = a.n else { bail!("--n is required for the random family") };
            let ranks = match a.ranks {
                Some(r) => r,
                None => vec![
                    a.rank.unwrap_or(match a.kind {
                        Kind::General => d,
                        Kind::Projection => 1,
                    });
                    n
                ],
            };
            random_ensemble(a.field.into(), d, n, &ranks, a.kind.into(), a.seed)?
        }
        Family::Frame => {
            let Some(path) = a.frame.as_deref() else { bail!("--frame is required for the frame family") };
            rank_one_from_frame(&load_frame(path)?)?
        }
    };
    emit(a.out.as_deref(), &io::ensemble_to_string(&e))?;
    Ok(0)
}

fn measure_cmd(a: MeasureArgs) -> Result<u8> {
    let e = load_ensemble(&a.ensemble)?;
    let x = match &a.signal {
        Some(p) => io::parse_signal(&read(p)?).with_context(|| format!("in {}", p.display()))?,
        None => {
            let x = rng::gaussian_vector(&mut rng::substream(a.seed, domain::SIGNAL, 0), e.field(), e.dim());
            if let Some(p) = &a.save_signal {
                write_atomic(p, &io::signal_to_string(&x, e.field()))?;
            }
            x
        }
    };
    let m = measure(&e, &x)?;
    emit(a.out.as_deref(), &io::measurements_to_string(&m))?;
    Ok(0)
}

fn certify_cmd(a: CertifyArgs) -> Result<u8> {
    let mut opts = MonteCarloOptions { trials: a.trials, restarts: a.restarts, seed: a.seed, ..Default::default() };
    if let Some(f) = a.separation_floor {
        opts.separation_floor = f;
    }
    if let Some(r) = a.residual_tol {
        opts.residual_tol = r;
    }
    if a.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let report = match (&a.ensemble, &a.frame) {
        (_, Some(path)) => {
            let frame = load_frame(path)?;
            match a.method {
                Method::ExactRankOne => prae::real_rank_one_exact(&frame)?,
                Method::Spark => spark_report(&frame)?,
                m => certify::certify(&rank_one_from_frame(&frame)?, m, &opts)?,
            }
        }
        (Some(path), None) => certify::certify(&load_ensemble(path)?, a.method, &opts)?,
        (None, None) => bail!("one of --ensemble or --frame is required"),
    };
    let text = report.to_json_string();
    match &a.json {
        Some(p) => {
            write_atomic(p, &text)?;
            println!("{} ({})", report.verdict.as_str(), report.method.as_str());
        }
        None => print!("{text}"),
    }
    let contradicts = match a.expect {
        Some(Expect::PrAe) => matches!(report.verdict, Verdict::NotPrAe | Verdict::LikelyNotPrAe),
        Some(Expect::NotPrAe) => matches!(report.verdict, Verdict::PrAe | Verdict::LikelyPrAe),
        None => false,
    };
    if a.expect.is_some() && report.verdict == Verdict::Inconclusive {
        eprintln!("note: verdict is INCONCLUSIVE; the expectation is neither met nor contradicted");
    }
    Ok(u8::from(contradicts))
}

/// `G` from a frame `[I_d, G]`.
fn gram_block(frame: &Frame) -> Result<CMatrix> {
    let d = frame.dim();
    if frame.len() != 2 * d - 1 {
        bail!("a [I, G] frame in dimension {d} has {} columns, found {}", 2 * d - 1, frame.len());
    }
    let f = frame.matrix();
    if (f.columns(0, d) - CMatrix::identity(d, d)).norm() > 0.0 {
        bail!("the first {d} frame columns must be the identity");
    }
    Ok(f.columns(d, d - 1).into_owned())
}

fn collide(a: CollideArgs) -> Result<u8> {
    let method = a.method.unwrap_or(if a.ensemble.is_some() { CollideMethod::Kernel } else { CollideMethod::Gram });
    let witness = match method {
        CollideMethod::Gram => {
            let g = match a.frame.as_deref() {
                Some("gram") => {
                    let d = need_d(a.d, "a random gram frame")?;
                    if d < 2 {
                        bail!("--d must be at least 2 for a gram frame");
                    }
                    rng::gaussian_matrix(&mut rng::substream(a.seed, domain::ENSEMBLE, 0), FieldTag::Complex, d, d - 1)
                }
                Some(path) => gram_block(&load_frame(Path::new(path))?)?,
                None => bail!("--method gram needs --frame gram or --frame FILE"),
            };
            gram_frame(&g)?;
            gram_collision_witness(&g, a.seed)?
        }
        CollideMethod::Kernel => {
            let e = match (&a.ensemble, a.frame.as_deref()) {
                (Some(p), _) => load_ensemble(p)?,
                (None, Some("gram")) => {
                    let d = need_d(a.d, "a random gram frame")?;
                    let g = rng::gaussian_matrix(&mut rng::substream(a.seed, domain::ENSEMBLE, 0), FieldTag::Complex, d, d - 1);
                    rank_one_from_frame(&gram_frame(&g)?)?
                }
                (None, Some(path)) => rank_one_from_frame(&load_frame(Path::new(path))?)?,
                (None, None) => bail!("--method kernel needs --ensemble FILE or --frame"),
            };
            match kernel_collision_search(&e, a.seed) {
                Ok(w) => w,
                Err(err) => {
                    eprintln!("no collision found: {err}");
                    return Ok(1);
                }
            }
        }
    };
    let mut v = serde_json::to_value(&witness)?;
    v["seed"] = json!(a.seed);
    emit(a.json.as_deref(), &pretty(&v))?;
    Ok(0)
}

fn recover_cmd(a: RecoverArgs) -> Result<u8> {
    let e = load_ensemble(&a.ensemble)?;
    let b = io::parse_measurements(&read(&a.measurements)?).with_context(|| format!("in {}", a.measurements.display()))?;
    let truth = match &a.truth {
        Some(p) => Some(io::parse_signal(&read(p)?).with_context(|| format!("in {}", p.display()))?),
        None => None,
    };
    let mut solver = SolverOptions { max_iters: a.max_iters, ..Default::default() };
    if let Some(t) = a.residual_tol {
        solver.residual_tol = t;
    }
    let opts = RecoverOptions { restarts: a.restarts, seed: a.seed, solver };
    let result = recover(&e, &b, &opts, truth.as_ref())?;
    let mut v = serde_json::to_value(&result)?;
    v["seed"] = json!(a.seed);
    emit(a.json.as_deref(), &pretty(&v))?;
    if !result.converged {
        eprintln!("recovery did not converge: residual {:e}", result.residual);
    }
    Ok(0)
}

fn sweep_cmd(a: SweepArgs) -> Result<u8> {
    let mut cfg = SweepConfig::new(a.field.into(), a.d, a.n.0, a.kind.into(), a.trials, a.seed);
    cfg.rank = a.rank;
    cfg.restarts = a.restarts;
    cfg.max_iters = a.max_iters;
    let rows = sweep(&cfg)?;
    emit(a.out.as_deref(), &sweep_csv(&rows))?;
    Ok(0)
}

fn validate_cmd(a: ValidateArgs) -> Result<u8> {
    let e = io::parse_ensemble_lenient(&read(&a.ensemble)?).with_context(|| format!("in {}", a.ensemble.display()))?;
    let report = validate(&e);
    let text = pretty(&serde_json::to_value(&report)?);
    match &a.json {
        Some(p) => write_atomic(p, &text)?,
        None => print!("{text}"),
    }
    for f in &report.failures {
        eprintln!("{f}");
    }
    Ok(u8::from(!report.pass))
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("PRAE_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().with_context(|| format!("PRAE_THREADS={raw:?} is not a count"))?;
    if n == 0 {
        bail!("PRAE_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    configure_threads()?;
    match cli.command {
        Command::Construct(a) => construct(a),
        Command::Measure(a) => measure_cmd(a),
        Command::Certify(a) => certify_cmd(a),
        Command::Collide(a) => collide(a),
        Command::Recover(a) => recover_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Validate(a) => validate_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
