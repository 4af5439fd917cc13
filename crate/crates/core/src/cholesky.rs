//! Dense SPD Cholesky factorization for exact Gaussian path sampling.
//!
//! The factorization is blocked and right-looking. Parallel sections split
//! by output row, and every output value is a fixed-order sequential dot
//! product over inputs finalized before the section starts, so results are
//! bit-identical for any thread count. That determinism is load-bearing:
//! the reproducibility contract compares CSVs across --threads settings.
//!
//! A second structural fact the harness relies on: the leading m x m block
//! of the factor of an n x n covariance is exactly the factor of the
//! leading m x m covariance block, and (L z) restricted to the first m
//! coordinates reads only z[0..m]. One factorization at the largest grid
//! therefore yields consistent coupled paths at every shorter horizon.

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::TimeGrid;
use crate::hurst::HurstParameter;

const BLOCK: usize = 96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CholeskyError {
    #[error("matrix is not positive definite (pivot {pivot} non-positive)")]
    NotPositiveDefinite { pivot: usize },
    #[error("matrix buffer holds {got} entries, expected {want}")]
    SizeMismatch { got: usize, want: usize },
}

/// Lower-triangular factor L with A = L L^T, stored row-major n x n.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    l: Vec<f64>,
}

impl CholeskyFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry L[i][j] (zero above the diagonal).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// out[i] = sum_{j <= i} L[i][j] z[j] for i < out.len().
    ///
    /// Only z[0..out.len()] is read, so a prefix of the factor transforms a
    /// prefix of the noise: the coupling across horizons is exact.
    pub fn apply_prefix(&self, z: &[f64], out: &mut [f64]) {
        let m = out.len();
        assert!(m <= self.n, "prefix longer than factor");
        assert!(z.len() >= m, "noise shorter than prefix");
        for i in 0..m {
            let row = &self.l[i * self.n..i * self.n + i + 1];
            let mut acc = 0.0;
            for (lij, zj) in row.iter().zip(&z[..i + 1]) {
                acc += lij * zj;
            }
            out[i] = acc;
        }
    }
}

/// Factor a symmetric positive definite matrix given by its full buffer.
///
/// Only the lower triangle is read; the strict upper triangle of the result
/// is zeroed.
pub fn factor_spd(mut a: Vec<f64>, n: usize) -> Result<CholeskyFactor, CholeskyError> {
    if a.len() != n * n {
        return Err(CholeskyError::SizeMismatch { got: a.len(), want: n * n });
    }
    let mut kb = 0;
    while kb < n {
        let bw = BLOCK.min(n - kb);
        let kend = kb + bw;

        // Diagonal block: small serial Cholesky (prior panels already applied).
        for r in kb..kend {
            for c in kb..=r {
                let mut sum = a[r * n + c];
                for m in kb..c {
                    sum -= a[r * n + m] * a[c * n + m];
                }
                if c == r {
                    if !(sum > 0.0 && sum.is_finite()) {
                        return Err(CholeskyError::NotPositiveDefinite { pivot: r });
                    }
                    a[r * n + r] = sum.sqrt();
                } else {
                    a[r * n + c] = sum / a[c * n + c];
                }
            }
        }
        if kend == n {
            break;
        }

        // Copy the finished diagonal block so panel tasks can read it while
        // holding mutable row slices.
        let mut l11 = vec![0.0; bw * bw];
        for r in 0..bw {
            for c in 0..=r {
                l11[r * bw + c] = a[(kb + r) * n + kb + c];
            }
        }

        // Panel solve: rows below the block, columns of the block.
        {
            let tail = &mut a[kend * n..];
            tail.par_chunks_mut(n).for_each(|row| {
                for c in 0..bw {
                    let mut sum = row[kb + c];
                    for m in 0..c {
                        sum -= row[kb + m] * l11[c * bw + m];
                    }
                    row[kb + c] = sum / l11[c * bw + c];
                }
            });
        }

        // Trailing update reads the solved panel from a contiguous copy,
        // keeping writes (columns >= kend) disjoint from reads.
        let rows_below = n - kend;
        let mut panel = vec![0.0; rows_below * bw];
        for r in 0..rows_below {
            panel[r * bw..(r + 1) * bw]
                .copy_from_slice(&a[(kend + r) * n + kb..(kend + r) * n + kend]);
        }
        {
            let tail = &mut a[kend * n..];
            tail.par_chunks_mut(n).enumerate().for_each(|(ri, row)| {
                let prow = &panel[ri * bw..(ri + 1) * bw];
                for j in 0..=ri {
                    let pj = &panel[j * bw..(j + 1) * bw];
                    let mut dot = 0.0;
                    for m in 0..bw {
                        dot += prow[m] * pj[m];
                    }
                    row[kend + j] -= dot;
                }
            });
        }
        kb = kend;
    }
    for r in 0..n {
        for c in r + 1..n {
            a[r * n + c] = 0.0;
        }
    }
    Ok(CholeskyFactor { n, l: a })
}

/// Covariance of fractional Brownian motion on the grid's interior points
/// dt, 2 dt, ..., t_max (the point t = 0 is excluded: its variance is zero
/// and would make the matrix singular).
pub fn fbm_covariance(h: HurstParameter, grid: &TimeGrid) -> Vec<f64> {
    let n = grid.n_steps();
    let two_h = 2.0 * h.value();
    // R(s,t) = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2 over lag powers.
    let pow: Vec<f64> = (0..=n).map(|k| grid.time(k).powf(two_h)).collect();
    let mut cov = vec![0.0; n * n];
    cov.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, slot) in row.iter_mut().enumerate() {
            let lag = i.abs_diff(j);
            *slot = 0.5 * (pow[i + 1] + pow[j + 1] - pow[lag]);
        }
    });
    cov
}
