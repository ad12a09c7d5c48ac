//! Dense Cholesky factors for covariance blocks.

use crate::error::{Error, Result};

/// Lower factor `L` with `LLᵀ ≈ Σ`. Rows whose variance is identically zero
/// are excluded from the factorization and produce exact zeros.
#[derive(Debug, Clone)]
pub struct Factor {
    n: usize,
    /// Indices of the retained rows.
    kept: Vec<usize>,
    /// Packed lower triangle over the retained rows.
    lower: Vec<f64>,
    pub jitter: f64,
}

const JITTERS: [f64; 5] = [0.0, 1e-12, 1e-11, 1e-10, 1e-9];
const LAST_JITTER: f64 = 1e-8;

fn tri(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

impl Factor {
    /// Factors the symmetric `n × n` row-major matrix `cov`, adding
    /// `ε · mean diagonal` with `ε` escalating up to 1e-8 when needed.
    pub fn new(cov: &[f64], n: usize, block: &str) -> Result<Self> {
        assert_eq!(cov.len(), n * n);
        let max_diag = (0..n).map(|i| cov[i * n + i]).fold(0.0, f64::max);
        let kept: Vec<usize> = (0..n).filter(|&i| cov[i * n + i] > 1e-14 * max_diag).collect();
        let m = kept.len();
        let mean_diag = if m == 0 { 0.0 } else { kept.iter().map(|&i| cov[i * n + i]).sum::<f64>() / m as f64 };
        let mut last = 0.0;
        for eps in JITTERS.iter().copied().chain(std::iter::once(LAST_JITTER)) {
            let jitter = eps * mean_diag;
            last = eps;
            if let Some(lower) = factor(cov, n, &kept, jitter) {
                return Ok(Self { n, kept, lower, jitter: eps });
            }
        }
        Err(Error::NotPositiveSemidefinite { block: block.to_string(), jitter: last })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of standard normals consumed by [`Factor::apply`].
    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    /// `x = L z` scattered back to all `n` rows.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.kept.len());
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, &row) in self.kept.iter().enumerate() {
            let base = tri(i, 0);
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.lower[base + j] * z[j];
            }
            out[row] = acc;
        }
    }
}

fn factor(cov: &[f64], n: usize, kept: &[usize], jitter: f64) -> Option<Vec<f64>> {
    let m = kept.len();
    let mut l = vec![0.0; m * (m + 1) / 2];
    for i in 0..m {
        for j in 0..=i {
            let mut sum = cov[kept[i] * n + kept[j]];
            let (bi, bj) = (tri(i, 0), tri(j, 0));
            for k in 0..j {
                sum -= l[bi + k] * l[bj + k];
            }
            if i == j {
                let d = sum + jitter;
                if !(d > 0.0) {
                    return None;
                }
                l[bi + i] = d.sqrt();
            } else {
                l[bi + j] = sum / l[bj + j];
            }
        }
    }
    Some(l)
}
