//! Seeded, splittable random streams.
//!
//! Every random draw in the crate comes from a ChaCha20 stream addressed by
//! `(seed, domain, index)`. The domain separates unrelated consumers (matrix
//! construction, Monte Carlo trials, solver restarts) and the index selects the
//! substream, so work can be fanned out across threads in any order and still
//! reproduce a serial run bit for bit.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ensembles::FieldTag;
use crate::linalg::{c, CMatrix, CVector};

pub type Rng = ChaCha20Rng;

pub mod domain {
    pub const ENSEMBLE: u64 = 1;
    pub const SURVEY: u64 = 2;
    pub const TANGENT: u64 = 3;
    pub const MONTE_CARLO: u64 = 4;
    pub const RECOVERY: u64 = 5;
    pub const SWEEP: u64 = 6;
    pub const GRAM: u64 = 7;
    pub const SIGNAL: u64 = 8;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for item `index` of `domain` under `seed`.
pub fn substream(seed: u64, domain: u64, index: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}

/// A fresh 64-bit seed derived from `(seed, domain, index)`, for nesting.
pub fn child_seed(seed: u64, domain: u64, index: u64) -> u64 {
    substream(seed, domain, index).next_u64()
}

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian_real_vector(rng: &mut Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| normal(rng))
}

/// Standard Gaussian in the field: real N(0,1) entries, or complex entries with
/// independent N(0, 1/2) real and imaginary parts.
pub fn gaussian_vector(rng: &mut Rng, field: FieldTag, d: usize) -> CVector {
    match field {
        FieldTag::Real => CVector::from_fn(d, |_, _| c(normal(rng), 0.0)),
        FieldTag::Complex => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            CVector::from_fn(d, |_, _| c(s * normal(rng), s * normal(rng)))
        }
    }
}

pub fn gaussian_matrix(rng: &mut Rng, field: FieldTag, rows: usize, cols: usize) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    // Column-major fill keeps the draw order independent of nalgebra internals.
    for k in 0..cols {
        let col = gaussian_vector(rng, field, rows);
        m.set_column(k, &col);
    }
    m
}

pub fn gaussian_real_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for k in 0..cols {
        for j in 0..rows {
            m[(j, k)] = normal(rng);
        }
    }
    m
}
