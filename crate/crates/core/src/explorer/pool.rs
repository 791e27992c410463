use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Default pool size for curve-weight dimension `d`.
pub fn default_pool_size(d: usize) -> usize {
    if d <= 2 {
        256
    } else {
        1024
    }
}

/// Van der Corput radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = u64::from(base);
    let inv = 1.0 / f64::from(base);
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// Point `i` of the Halton sequence in `d` dimensions.
pub fn halton_point(i: u64, d: usize) -> Vec<f64> {
    (0..d).map(|j| radical_inverse(i, PRIMES[j])).collect()
}

/// Finite set of curve-weight vectors standing in for `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    points: Vec<Vec<f64>>,
}

impl CandidatePool {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::EmptyPool);
        };
        let d = first.len();
        if d == 0 {
            return Err(Error::domain("pool points need at least one coordinate"));
        }
        for p in &points {
            if p.len() != d {
                return Err(Error::LengthMismatch {
                    expected: d,
                    actual: p.len(),
                });
            }
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::domain(format!("pool point {p:?} outside [0, 1]")));
            }
        }
        Ok(CandidatePool { points })
    }

    /// Evenly spaced grid on `[0, 1]` including both ends.
    pub fn grid_1d(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::config("a 1-D grid needs at least 2 points"));
        }
        Self::new((0..size).map(|i| vec![i as f64 / (size - 1) as f64]).collect())
    }

    /// The first `size` Halton points, starting from the origin.
    pub fn halton(d: usize, size: usize) -> Result<Self> {
        if d == 0 || d > PRIMES.len() {
            return Err(Error::config(format!(
                "Halton pools support 1..={} dimensions",
                PRIMES.len()
            )));
        }
        if size < 2 {
            return Err(Error::config("a pool needs at least 2 points"));
        }
        Self::new((0..size as u64).map(|i| halton_point(i, d)).collect())
    }

    /// Grid for `d = 1`, Halton otherwise.
    pub fn for_dim(d: usize, size: Option<usize>) -> Result<Self> {
        let size = size.unwrap_or_else(|| default_pool_size(d));
        if d == 1 {
            Self::grid_1d(size)
        } else {
            Self::halton(d, size)
        }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Index of the closest point; the lowest index wins ties.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let dist = |p: &[f64]| p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = dist(p);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Index of `x` if it is exactly a pool point.
    pub fn position(&self, x: &[f64]) -> Option<usize> {
        self.points.iter().position(|p| p.as_slice() == x)
    }

    /// `count` distinct space-filling pool indices.
    ///
    /// Halton points under a seeded random shift (modulo 1), snapped to the
    /// nearest pool point.
    pub fn space_filling(&self, count: usize, seed: u64) -> Vec<usize> {
        let d = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
        let count = count.min(self.len());
        let mut chosen = Vec::with_capacity(count);
        let mut i = 1u64;
        while chosen.len() < count && i < 64 * self.len() as u64 {
            let p: Vec<f64> = halton_point(i, d.min(PRIMES.len()))
                .iter()
                .zip(&shift)
                .map(|(h, s)| (h + s).fract())
                .collect();
            let idx = self.nearest(&p);
            if !chosen.contains(&idx) {
                chosen.push(idx);
            }
            i += 1;
        }
        let mut k = 0;
        while chosen.len() < count {
            if !chosen.contains(&k) {
                chosen.push(k);
            }
            k += 1;
        }
        chosen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_values() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn default_pools() {
        let p = CandidatePool::for_dim(1, None).unwrap();
        assert_eq!(p.len(), 256);
        assert_eq!(p.point(0), &[0.0]);
        assert_eq!(p.point(255), &[1.0]);
        assert_eq!(CandidatePool::for_dim(3, None).unwrap().len(), 1024);
        let h = CandidatePool::for_dim(2, Some(100)).unwrap();
        assert!(h.points().iter().all(|p| p.iter().all(|v| (0.0..1.0).contains(v))));
    }

    #[test]
    fn space_filling_is_distinct_and_seeded() {
        let p = CandidatePool::for_dim(2, Some(64)).unwrap();
        let a = p.space_filling(5, 1);
        assert_eq!(a.len(), 5);
        let mut s = a.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 5);
        assert_eq!(a, p.space_filling(5, 1));
        let tiny = CandidatePool::new(vec![vec![0.1], vec![0.9]]).unwrap();
        assert_eq!(tiny.space_filling(5, 0).len(), 2);
    }

    #[test]
    fn invalid_pools() {
        assert!(matches!(CandidatePool::new(vec![]), Err(Error::EmptyPool)));
        assert!(CandidatePool::new(vec![vec![1.2]]).is_err());
        assert!(CandidatePool::new(vec![vec![0.1], vec![0.1, 0.2]]).is_err());
    }
}
