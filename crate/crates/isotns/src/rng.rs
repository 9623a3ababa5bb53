//! Seeded randomness helpers.
//!
//! All Monte Carlo code derives per-sample generators from one root seed and
//! a stream counter, so results are independent of how samples are
//! distributed across workers.

use num_complex::Complex;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{C64, Matrix};

/// Generator for stream `stream` of root seed `seed`.
///
/// Streams are independent ChaCha streams of the same keyed cipher, so any
/// subset can be generated in any order with identical results.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard complex Gaussian entry.
fn gaussian(rng: &mut impl Rng) -> C64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    Complex::new(r * (2.0 * std::f64::consts::PI * u2).cos(), r * (2.0 * std::f64::consts::PI * u2).sin())
        / 2f64.sqrt()
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| gaussian(rng)).collect();
    Matrix::new(rows, cols, data).expect("consistent dims")
}

/// Haar-distributed isometry with `rows >= cols`, via Gram-Schmidt on a
/// Ginibre matrix with a deterministic phase convention.
pub fn random_isometry(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = random_matrix(rows, cols, rng);
    let mut columns: Vec<Vec<C64>> = (0..cols).map(|j| g.column(j)).collect();
    for j in 0..cols {
        for k in 0..j {
            let overlap: C64 = columns[k]
                .iter()
                .zip(&columns[j])
                .map(|(a, b)| a.conj() * b)
                .sum();
            for i in 0..rows {
                let d = overlap * columns[k][i];
                columns[j][i] -= d;
            }
        }
        let norm: f64 = columns[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "Ginibre column collapsed");
        // fix the global phase of each column: largest entry real positive
        let lead = columns[j]
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap();
        let phase = if lead.norm() > 0.0 { lead / lead.norm() } else { Complex::new(1.0, 0.0) };
        for z in columns[j].iter_mut() {
            *z /= phase * norm;
        }
    }
    Matrix::from_fn(rows, cols, |i, j| columns[j][i])
}

pub fn random_unitary(n: usize, rng: &mut impl Rng) -> Matrix {
    random_isometry(n, n, rng)
}

pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> Matrix {
    let g = random_matrix(n, n, rng);
    g.add(&g.adjoint()).unwrap().scale(Complex::new(0.5, 0.0))
}

/// Random density matrix (positive, unit trace).
pub fn random_density(n: usize, rng: &mut impl Rng) -> Matrix {
    let g = random_matrix(n, n, rng);
    let rho = g.mul(&g.adjoint()).unwrap();
    let tr = rho.trace();
    rho.scale(Complex::new(1.0 / tr.re, 0.0))
}

/// Random normalized state vector.
pub fn random_state(n: usize, rng: &mut impl Rng) -> Vec<C64> {
    let v: Vec<C64> = (0..n).map(|_| gaussian(rng)).collect();
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}
