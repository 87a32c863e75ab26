//! Seeded random streams.
//!
//! Item `i` of an experiment with master seed `s` always draws from ChaCha8
//! stream `i` keyed by `s`, independent of which thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

pub fn stream_rng(master: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Packs a (purpose, index) pair into one stream id so that different
/// sampling purposes inside one experiment never share a stream.
pub fn stream_id(purpose: u32, index: u64) -> u64 {
    ((purpose as u64) << 48) ^ index
}

pub fn gaussian_vec(rng: &mut Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// Uniform sample from the unit sphere in `R^d`.
pub fn unit_sphere(rng: &mut Rng, d: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, d);
        let n = crate::spectral::norm(&v);
        if n > 1e-300 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Haar-ish random orthogonal matrix (row-major) from Gram-Schmidt on a
/// Gaussian matrix, with the usual sign fix on the diagonal of R.
pub fn random_orthogonal(rng: &mut Rng, d: usize) -> Vec<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    while rows.len() < d {
        let mut v = gaussian_vec(rng, d);
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for r in &rows {
                let p = crate::spectral::dot(r, &v);
                for (vi, ri) in v.iter_mut().zip(r) {
                    *vi -= p * ri;
                }
            }
        }
        let n = crate::spectral::norm(&v);
        if n < 1e-8 {
            continue;
        }
        rows.push(v.into_iter().map(|x| x / n).collect());
    }
    rows.concat()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{dot, norm};

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = gaussian_vec(&mut stream_rng(7, 3), 4);
        let b = gaussian_vec(&mut stream_rng(7, 3), 4);
        let c = gaussian_vec(&mut stream_rng(7, 4), 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(stream_id(1, 5), stream_id(2, 5));
    }

    #[test]
    fn sphere_and_orthogonal() {
        let mut rng = stream_rng(1, 0);
        let v = unit_sphere(&mut rng, 9);
        assert!((norm(&v) - 1.0).abs() < 1e-15);
        let d = 6;
        let q = random_orthogonal(&mut rng, d);
        for i in 0..d {
            for j in 0..d {
                let g = dot(&q[i * d..(i + 1) * d], &q[j * d..(j + 1) * d]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-13);
            }
        }
    }
}
