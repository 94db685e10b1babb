//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use prae::ambiguity::gram_frame;
use prae::certify::{partition_collision, Witness};
use prae::io::ensemble_to_string;
use prae::linalg::{c, CMatrix, CVector, C64, I};
use prae::measurement::polarization_scale;
use prae::recovery::{sweep_csv, SweepConfig};
use prae::rng::{self, Rng};
use prae::{
    bilinear_kernel, full_spark, gram_collision_witness, hankel_ensemble, jacobian, jacobian_rank_survey, measure,
    minimal_complex_ensemble, monte_carlo_injectivity, phase_distance, polarization_gap, polarization_kernel, psi,
    psi_inverse, quadruple_independence, random_ensemble, rank2_orbit, rank_one_from_frame, real_rank_one_exact,
    recover, residual_objective, sweep, tangent_dimension_probe, FieldTag, Frame, MonteCarloOptions, OrbitParams,
    RandomKind, Rank2Signature, RecoverOptions, Verdict,
};
use rand::Rng as _;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn stat_usize(r: &prae::CertReport, key: &str) -> usize {
    r.stats[key].as_u64().unwrap_or_else(|| panic!("stat {key} missing")) as usize
}

fn mc(trials: usize, seed: u64) -> MonteCarloOptions {
    MonteCarloOptions { trials, seed, ..Default::default() }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut nonzero_kernels = 0;
    // Misses where the kernel matrix is not numerically singular would be bugs.
    let mut well_conditioned_misses = 0;
    let mut worst_rate: f64 = 0.0;
    for d in 2..=8 {
        let e = hankel_ensemble(d).unwrap();
        let mut r = rng::substream(1, 1000, d as u64);
        for _ in 0..1000 {
            let u = rng::gaussian_real_vector(&mut r, d);
            assert!(u[0] != 0.0);
            if !bilinear_kernel(&e, &u).unwrap().is_empty() {
                nonzero_kernels += 1;
                // Rows (A_t u)^T form a lower triangular Toeplitz matrix with diagonal u_1.
                let m = DMatrix::from_fn(d, d, |t, k| if k <= t { u[t - k] } else { 0.0 });
                let sv = m.singular_values();
                if sv.min() > 1e-10 * sv.max() {
                    well_conditioned_misses += 1;
                }
            }
        }
        let rep = monte_carlo_injectivity(&e, &mc(200, d as u64)).unwrap();
        worst_rate = worst_rate.max(rep.stats["collision_rate"].as_f64().unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        nonzero_kernels == 0 && worst_rate == 0.0 && secs < 10.0,
        format!(
            "nonzero kernels {nonzero_kernels}/7000 ({well_conditioned_misses} not numerically singular), max collision rate {worst_rate}, {secs:.2} s"
        ),
    )
}

// min over real c of ||u - i c v||.
fn distance_to_line(u: &CVector, v: &CVector) -> f64 {
    let w = v * I;
    let t = prae::linalg::real_inner(&w, u) / w.norm_squared();
    (u - w * c(t, 0.0)).norm()
}

fn criterion_2() -> Outcome {
    let mut bad_kernel = 0;
    let mut checked = 0;
    let mut bad_rank = 0;
    for d in 2..=8 {
        let e = minimal_complex_ensemble(d).unwrap();
        let mut r = rng::substream(2, 1000, d as u64);
        for _ in 0..1000 {
            let u = rng::gaussian_vector(&mut r, FieldTag::Complex, d);
            let basis = polarization_kernel(&e, &u).unwrap();
            // Basis vectors and random combinations of them.
            let mut elements = basis.clone();
            for _ in 0..3 {
                let mut v = CVector::zeros(d);
                for b in &basis {
                    v += b * c(rng::normal(&mut r), 0.0);
                }
                elements.push(v);
            }
            for v in elements.iter().filter(|v| v[0].norm() > 1e-8) {
                checked += 1;
                if distance_to_line(&u, v) >= 1e-8 * u.norm() {
                    bad_kernel += 1;
                }
            }
        }
        for _ in 0..100 {
            let x = rng::gaussian_vector(&mut r, FieldTag::Complex, d);
            if jacobian(&e, &x).unwrap().rank != 2 * d - 1 {
                bad_rank += 1;
            }
        }
    }
    outcome(
        bad_kernel == 0 && checked > 0 && bad_rank == 0,
        format!("kernel elements off the line {bad_kernel}/{checked}, jacobian rank misses {bad_rank}/700"),
    )
}

fn criterion_3() -> Outcome {
    let mut failures = Vec::new();
    let mut rates = Vec::new();
    for d in 2..=6 {
        for (field, n) in [(FieldTag::Real, d - 1), (FieldTag::Complex, 2 * d - 2)] {
            let e = random_ensemble(field, d, n, &vec![d; n], RandomKind::General, 30 + d as u64).unwrap();
            let rep = jacobian_rank_survey(&e, 20, d as u64).unwrap();
            let target = stat_usize(&rep, "target_rank");
            if rep.verdict != Verdict::LikelyNotPrAe || stat_usize(&rep, "max_rank") >= target {
                failures.push(format!("{}:d={d}", field.as_str()));
            }
            let mut cfg = SweepConfig::new(field, d, vec![n], RandomKind::General, 20, 3);
            cfg.restarts = 20;
            let row = &sweep(&cfg).unwrap()[0];
            rates.push(format!("{}{d}:N={n}:{:.2}", field.as_str(), row.success_rate));
        }
    }
    outcome(
        failures.is_empty(),
        format!("non-degenerate surveys {:?}; recovery rates {}", failures, rates.join(" ")),
    )
}

fn criterion_4() -> Outcome {
    let mut worst_success: f64 = 1.0;
    let mut worst_label = String::new();
    let mut collisions = Vec::new();
    for d in 2..=5usize {
        for field in [FieldTag::Real, FieldTag::Complex] {
            let n = match field {
                FieldTag::Real => d + 1,
                FieldTag::Complex => 2 * d,
            };
            let variants = [
                ("full-rank", RandomKind::General, d),
                ("rank-half", RandomKind::General, d.div_ceil(2)),
                ("projection", RandomKind::Projection, 1),
            ];
            for (k, (label, kind, rank)) in variants.into_iter().enumerate() {
                let mut cfg = SweepConfig::new(field, d, vec![n], kind, 100, 40 + k as u64);
                cfg.rank = Some(rank);
                cfg.restarts = 50;
                let rate = sweep(&cfg).unwrap()[0].success_rate;
                if rate < worst_success {
                    worst_success = rate;
                    worst_label = format!("{}:d={d}:{label}", field.as_str());
                }
                let e = random_ensemble(field, d, n, &vec![rank; n], kind, 400 + d as u64).unwrap();
                let rep = monte_carlo_injectivity(&e, &mc(200, 4)).unwrap();
                if stat_usize(&rep, "failures") > 0 {
                    collisions.push(format!("{}:d={d}:{label}", field.as_str()));
                }
            }
        }
    }
    outcome(
        worst_success >= 0.95 && collisions.is_empty(),
        format!("min success {worst_success:.2} ({worst_label}), configurations with collisions {collisions:?}"),
    )
}

fn real_frame(cols: &[&[f64]]) -> Frame {
    let d = cols[0].len();
    Frame::from_real_matrix(&DMatrix::from_fn(d, cols.len(), |r, k| cols[k][r])).unwrap()
}

/// Fraction of random signals with a partner outside `{x, -x}`, found by
/// solving `F^T y = s * F^T x` for every sign pattern `s`.
fn sign_pattern_collision_rate(f: &DMatrix<f64>, signals: usize, seed: u64) -> f64 {
    let (d, n) = f.shape();
    let ft = f.transpose();
    let svd = ft.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.iter().filter(|s| **s > 1e-10 * smax).count() < d {
        // Any null vector of F^T can be added to x.
        return 1.0;
    }
    let mut r = rng::substream(seed, 1005, 0);
    let mut hits = 0;
    for _ in 0..signals {
        let x = rng::gaussian_real_vector(&mut r, d);
        let b = &ft * &x;
        let found = (0..1u32 << (n - 1)).any(|mask| {
            let s = DVector::from_fn(n, |j, _| if j > 0 && mask >> (j - 1) & 1 == 1 { -b[j] } else { b[j] });
            let y = svd.solve(&s, 1e-12 * smax).unwrap();
            let consistent = (&ft * &y - &s).norm() < 1e-9 * s.norm().max(1e-300);
            consistent && (&y - &x).norm().min((&y + &x).norm()) > 1e-6 * x.norm()
        });
        hits += usize::from(found);
    }
    hits as f64 / signals as f64
}

fn random_frame(r: &mut Rng, d: usize, n: usize, ternary: bool) -> Frame {
    loop {
        let m = DMatrix::from_fn(d, n, |_, _| if ternary { r.random_range(-1i32..=1) as f64 } else { rng::normal(r) });
        if let Ok(f) = Frame::from_real_matrix(&m) {
            return f;
        }
    }
}

fn criterion_5() -> Outcome {
    let mut frames = vec![
        real_frame(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]),
        real_frame(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]),
        real_frame(&[&[1.0, 0.0], &[0.0, 1.0]]),
        real_frame(&[&[1.0, 0.0], &[2.0, 0.0]]),
        real_frame(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 1.0, 1.0]]),
    ];
    let mut r = rng::substream(5, 1000, 0);
    for k in 0..50 {
        frames.push(random_frame(&mut r, 3, 3 + k % 3, k % 2 == 1));
    }
    let mut mismatches = Vec::new();
    let (mut pr_ae, mut not_pr_ae, mut spark_checked) = (0, 0, 0);
    for (k, f) in frames.iter().enumerate() {
        let rep = real_rank_one_exact(f).unwrap();
        let brute = sign_pattern_collision_rate(&f.real_matrix(), 100, k as u64);
        let e = rank_one_from_frame(f).unwrap();
        let mc_rep = monte_carlo_injectivity(&e, &mc(100, k as u64)).unwrap();
        let mc_rate = mc_rep.stats["collision_rate"].as_f64().unwrap();
        let agrees = match rep.verdict {
            Verdict::PrAe => {
                pr_ae += 1;
                brute == 0.0 && mc_rate == 0.0
            }
            Verdict::NotPrAe => {
                not_pr_ae += 1;
                let Witness::SubsetPair(w) = &rep.witnesses[0] else { unreachable!() };
                let pair = partition_collision(f, w, k as u64).unwrap();
                let gap = measure(&e, pair.x()).unwrap().max_abs_diff(&measure(&e, pair.y()).unwrap());
                let scale = pair.x().norm_squared().max(1.0) * f.real_matrix().norm_squared();
                brute > 0.0 && mc_rep.verdict == Verdict::LikelyNotPrAe && gap < 1e-12 * scale && pair.valid()
            }
            v => panic!("exact checker returned {v:?}"),
        };
        let spark_ok = if f.len() == f.dim() + 1 {
            spark_checked += 1;
            full_spark(f).unwrap() == (rep.verdict == Verdict::PrAe)
        } else {
            true
        };
        if !agrees || !spark_ok {
            mismatches.push(format!("frame {k}: {:?} brute {brute} mc {mc_rate}", rep.verdict));
        }
    }
    outcome(
        mismatches.is_empty(),
        format!(
            "{} frames ({pr_ae} PR_AE, {not_pr_ae} NOT_PR_AE), {spark_checked} full-spark comparisons, mismatches {:?}",
            frames.len(),
            mismatches
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut counts = Vec::new();
    let mut pass = true;
    for d in 2..=6 {
        let mut ok = 0;
        for seed in 0..100u64 {
            let g = rng::gaussian_matrix(&mut rng::substream(seed, 1006, d as u64), FieldTag::Complex, d, d - 1);
            let Ok(w) = gram_collision_witness(&g, seed) else { continue };
            let frame = gram_frame(&g).unwrap();
            let gap = frame.columns().iter().map(|f| (f.dotc(w.x()).norm_sqr() - f.dotc(w.y()).norm_sqr()).abs()).fold(0.0, f64::max);
            let scale = w.x().norm_squared().max(w.y().norm_squared());
            if gap < 1e-10 * scale && phase_distance(w.x(), w.y(), FieldTag::Complex) > 1e-3 {
                ok += 1;
            }
        }
        pass &= ok >= 99;
        counts.push(format!("d={d}:{ok}/100"));
    }
    let g = CMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(1.0, 0.0)]);
    let w = gram_collision_witness(&g, 0).unwrap();
    let s = c(w.x().norm() / 2f64.sqrt(), 0.0);
    let x = CVector::from_vec(vec![I, c(1.0, 0.0)]) * s;
    let y = CVector::from_vec(vec![-I, c(1.0, 0.0)]) * s;
    let dist = (phase_distance(w.x(), &x, FieldTag::Complex) + phase_distance(w.y(), &y, FieldTag::Complex))
        .min(phase_distance(w.x(), &y, FieldTag::Complex) + phase_distance(w.y(), &x, FieldTag::Complex));
    pass &= dist < 1e-8;
    outcome(pass, format!("{}; hand example distance {dist:.1e}", counts.join(" ")))
}

fn unimodular(r: &mut Rng) -> C64 {
    C64::from_polar(1.0, r.random_range(0.0..std::f64::consts::TAU))
}

fn random_signature(r: &mut Rng, d: usize) -> Rank2Signature {
    let x = rng::gaussian_vector(r, FieldTag::Complex, d).normalize();
    let b = rng::gaussian_vector(r, FieldTag::Complex, d);
    let y = (&b - &x * x.dotc(&b)).normalize();
    Rank2Signature::new(x, y, r.random_range(0.1..3.0), r.random_range(0.1..3.0)).unwrap()
}

fn criterion_7() -> Outcome {
    let mut r = rng::substream(7, 1000, 0);
    let mut polar: f64 = 0.0;
    for field in [FieldTag::Real, FieldTag::Complex] {
        for k in 0..1000 {
            let d = 1 + k % 6;
            let e = random_ensemble(field, d, 1, &[d], RandomKind::General, k as u64).unwrap();
            let a = &e.matrices()[0];
            let x = rng::gaussian_vector(&mut r, field, d);
            let y = rng::gaussian_vector(&mut r, field, d);
            polar = polar.max(polarization_gap(a, &x, &y).unwrap() / polarization_scale(a, &x, &y));
        }
    }
    let mut orbit: f64 = 0.0;
    let mut round_trip: f64 = 0.0;
    for k in 0..1000 {
        let sig = random_signature(&mut r, 2 + k % 5);
        let p = OrbitParams::new([unimodular(&mut r), unimodular(&mut r), unimodular(&mut r)], r.random_range(0.0..0.95)).unwrap();
        let (z, w) = rank2_orbit(&sig, &p);
        let target = sig.x() * sig.x().adjoint() * c(sig.lambda().powi(2), 0.0)
            - sig.y() * sig.y().adjoint() * c(sig.mu().powi(2), 0.0);
        orbit = orbit.max((&z * z.adjoint() - &w * w.adjoint() - target).norm());

        let sig = random_signature(&mut r, 2 + k % 5);
        let back = psi_inverse(&psi(&sig)).unwrap();
        let err = (back.lambda() - sig.lambda()).abs().max((back.mu() - sig.mu()).abs())
            .max(phase_distance(back.x(), sig.x(), FieldTag::Complex))
            .max(phase_distance(back.y(), sig.y(), FieldTag::Complex));
        round_trip = round_trip.max(err);
    }
    let mut independent = 0;
    for k in 0..1000 {
        let d = 2 + k % 5;
        let x = rng::gaussian_vector(&mut r, FieldTag::Complex, d);
        let y = rng::gaussian_vector(&mut r, FieldTag::Complex, d);
        independent += usize::from(quadruple_independence(&x, &y).unwrap());
    }
    let mut colinear_false = 0;
    for k in 0..100 {
        let d = 2 + k % 5;
        let x = rng::gaussian_vector(&mut r, FieldTag::Complex, d);
        let y = &x * rng::gaussian_vector(&mut r, FieldTag::Complex, 1)[0];
        colinear_false += usize::from(!quadruple_independence(&x, &y).unwrap());
    }
    outcome(
        polar < 1e-12 && orbit < 1e-10 && round_trip < 1e-8 && independent == 1000 && colinear_false == 100,
        format!(
            "polarization {polar:.1e}, orbit {orbit:.1e}, psi round trip {round_trip:.1e}, independent {independent}/1000, colinear rejected {colinear_false}/100"
        ),
    )
}

fn coords(field: FieldTag, y: &CVector) -> DVector<f64> {
    match field {
        FieldTag::Real => y.map(|v| v.re),
        FieldTag::Complex => DVector::from_iterator(2 * y.len(), y.iter().map(|v| v.re).chain(y.iter().map(|v| v.im))),
    }
}

fn signal(field: FieldTag, u: &DVector<f64>) -> CVector {
    match field {
        FieldTag::Real => u.map(|v| c(v, 0.0)),
        FieldTag::Complex => CVector::from_fn(u.len() / 2, |k, _| c(u[k], u[u.len() / 2 + k])),
    }
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    for field in [FieldTag::Real, FieldTag::Complex] {
        for d in [3, 6] {
            for k in 0..100u64 {
                let e = random_ensemble(field, d, 2 * d, &vec![d; 2 * d], RandomKind::General, k).unwrap();
                let mut r = rng::substream(k, 1008, d as u64);
                let x = rng::gaussian_vector(&mut r, field, d);
                let y = rng::gaussian_vector(&mut r, field, d);
                let b = measure(&e, &x).unwrap();
                let f = |v: &CVector| -> f64 {
                    measure(&e, v).unwrap().values().iter().zip(b.values()).map(|(p, q)| (p - q).powi(2)).sum()
                };
                let (_, grad) = residual_objective(&e, &y, &b).unwrap();
                let u = coords(field, &y);
                let h = 1e-6 * u.norm();
                let fd = DVector::from_fn(u.len(), |j, _| {
                    let mut up = u.clone();
                    let mut dn = u.clone();
                    up[j] += h;
                    dn[j] -= h;
                    (f(&signal(field, &up)) - f(&signal(field, &dn))) / (2.0 * h)
                });
                worst = worst.max((grad - &fd).norm() / fd.norm());
            }
        }
    }
    outcome(worst < 1e-6, format!("max relative gradient error {worst:.1e} over 400 points"))
}

fn pipelines() -> Vec<String> {
    let h = hankel_ensemble(5).unwrap();
    let rh = random_ensemble(FieldTag::Complex, 3, 6, &[2; 6], RandomKind::General, 9).unwrap();
    let rs = random_ensemble(FieldTag::Real, 4, 5, &[4; 5], RandomKind::General, 9).unwrap();
    let frame = Frame::from_real_matrix(&rng::gaussian_real_matrix(&mut rng::substream(9, 1009, 0), 3, 4)).unwrap();
    let x = rng::gaussian_vector(&mut rng::substream(9, 1009, 1), FieldTag::Complex, 3);
    let b = measure(&rh, &x).unwrap();
    let g = rng::gaussian_matrix(&mut rng::substream(9, 1009, 2), FieldTag::Complex, 4, 3);
    vec![
        ensemble_to_string(&rh),
        serde_json::to_string(&b.values()).unwrap(),
        monte_carlo_injectivity(&h, &mc(64, 9)).unwrap().to_json_string(),
        monte_carlo_injectivity(&rh, &mc(32, 9)).unwrap().to_json_string(),
        jacobian_rank_survey(&rs, 16, 9).unwrap().to_json_string(),
        tangent_dimension_probe(&rs, 8, 9).unwrap().to_json_string(),
        real_rank_one_exact(&frame).unwrap().to_json_string(),
        serde_json::to_string(&gram_collision_witness(&g, 9).unwrap()).unwrap(),
        serde_json::to_string(&recover(&rh, &b, &RecoverOptions { seed: 9, ..Default::default() }, Some(&x)).unwrap()).unwrap(),
        sweep_csv(&sweep(&SweepConfig::new(FieldTag::Real, 3, vec![3, 4], RandomKind::General, 12, 9)).unwrap()),
    ]
}

fn criterion_9() -> Outcome {
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let serial = pool(1).install(pipelines);
    let again = pool(1).install(pipelines);
    let parallel = pool(4).install(pipelines);
    let differing: Vec<usize> =
        (0..serial.len()).filter(|&k| serial[k] != again[k] || serial[k] != parallel[k]).collect();
    outcome(differing.is_empty(), format!("{} pipelines, differing outputs {differing:?}", serial.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("minimal real family", criterion_1),
        ("minimal complex family", criterion_2),
        ("lower bounds", criterion_3),
        ("generic thresholds", criterion_4),
        ("exact checker oracle equivalence", criterion_5),
        ("gram collisions", criterion_6),
        ("identity suites", criterion_7),
        ("gradient check", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {} {status} {name}: {} [{:.1} s]", k + 1, o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
