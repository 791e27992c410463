use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Relative jitter first tried on the diagonal.
pub(crate) const JITTER_START: f64 = 1e-6;
/// Largest relative jitter before giving up.
pub(crate) const JITTER_MAX: f64 = 1e-2;

pub(crate) fn mean_diagonal(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows().max(1);
    (m.diagonal().sum() / n as f64).abs().max(f64::MIN_POSITIVE)
}

/// Smallest squared Cholesky pivot, relative to the mean diagonal, accepted
/// without jitter.
pub(crate) const PIVOT_FLOOR: f64 = 1e-10;

/// Cholesky of `m`, or of `m + jitter I` when `m` is numerically singular.
///
/// The plain factor is kept if every squared pivot is at least
/// `PIVOT_FLOOR` times the mean diagonal. Otherwise jitter starts at
/// `JITTER_START` relative to the mean diagonal and doubles up to
/// `JITTER_MAX`. Returns the jitter used, relative to the mean diagonal.
pub(crate) fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let scale = mean_diagonal(m);
    if let Some(c) = Cholesky::new(m.clone()) {
        if c.l_dirty().diagonal().iter().all(|d| d * d >= PIVOT_FLOOR * scale) {
            return Ok((c, 0.0));
        }
    }
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-12) {
        let jitter = rel * scale;
        let mut a = m.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(a) {
            return Ok((c, rel));
        }
        rel *= 2.0;
    }
    Err(Error::Linalg(format!(
        "covariance of size {} not positive definite with jitter up to {JITTER_MAX:e}",
        m.nrows()
    )))
}

pub(crate) fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Greedy pivoted Cholesky of a PSD matrix.
///
/// Stops once the largest remaining diagonal falls below
/// `rel_tol * max(diag)`. Returns the pivot order and the lower-triangular
/// factor of `m[piv, piv]`.
pub(crate) fn pivoted_cholesky(m: &DMatrix<f64>, rel_tol: f64) -> (Vec<usize>, DMatrix<f64>) {
    let n = m.nrows();
    let mut d: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let max0 = d.iter().cloned().fold(0.0_f64, f64::max);
    let mut done = vec![false; n];
    let mut piv = Vec::new();
    let mut g: Vec<Vec<f64>> = Vec::new(); // columns of the factor, length n each
    if max0 <= 0.0 {
        return (piv, DMatrix::zeros(0, 0));
    }
    for _ in 0..n {
        let (j, dj) =
            d.iter()
                .enumerate()
                .filter(|(i, _)| !done[*i])
                .fold(
                    (usize::MAX, f64::NEG_INFINITY),
                    |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
                );
        if j == usize::MAX || dj <= rel_tol * max0 {
            break;
        }
        let gjj = dj.sqrt();
        let mut col = vec![0.0; n];
        col[j] = gjj;
        for i in 0..n {
            if done[i] || i == j {
                continue;
            }
            let s: f64 = g.iter().map(|c| c[i] * c[j]).sum();
            col[i] = (m[(i, j)] - s) / gjj;
            d[i] -= col[i] * col[i];
        }
        done[j] = true;
        piv.push(j);
        g.push(col);
    }
    let r = piv.len();
    let l = DMatrix::from_fn(r, r, |a, b| if b <= a { g[b][piv[a]] } else { 0.0 });
    (piv, l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pivoted_factor_reproduces_full_rank_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0]);
        let (piv, l) = pivoted_cholesky(&a, 1e-14);
        assert_eq!(piv.len(), 3);
        let sub = DMatrix::from_fn(3, 3, |i, j| a[(piv[i], piv[j])]);
        assert!((&l * l.transpose() - sub).abs().max() < 1e-12);
    }

    #[test]
    fn pivoted_factor_detects_low_rank() {
        let v = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, -1.0, 0.5]);
        let a = &v * v.transpose();
        let (piv, _) = pivoted_cholesky(&a, 1e-10);
        assert_eq!(piv, vec![1]);
    }

    #[test]
    fn jitter_rescues_singular_matrix() {
        let a = DMatrix::from_element(3, 3, 1.0);
        let (_, rel) = cholesky_with_jitter(&a).unwrap();
        assert!(rel > 0.0 && rel <= 1e-2);
    }

    #[test]
    fn well_conditioned_matrix_gets_no_jitter() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (c, jitter) = cholesky_with_jitter(&a).unwrap();
        assert_eq!(jitter, 0.0);
        assert!((c.l() * c.l().transpose() - a).abs().max() < 1e-15);
    }
}
