//! Tabulated first and second moments of an infectivity law.

use super::infectivity::InfectivityLaw;
use crate::error::Result;
use crate::rng::{stream, Purpose};

/// `λ̄`, `v` and `Cov(λ(s), 1{η > s′})` on a uniform grid `kΔ`, `k = 0..=n`,
/// with (bi)linear interpolation in between.
#[derive(Debug, Clone)]
pub struct MomentTable {
    step: f64,
    n: usize,
    mean: Vec<f64>,
    cov: Vec<f64>,
    cross: Vec<f64>,
}

impl MomentTable {
    /// Fills the table from the law's closed-form moments.
    pub fn exact(law: &InfectivityLaw, step: f64, n: usize) -> Self {
        let t = |k: usize| k as f64 * step;
        let mean = (0..=n).map(|k| law.mean(t(k))).collect();
        let mut cov = vec![0.0; (n + 1) * (n + 1)];
        let mut cross = vec![0.0; (n + 1) * (n + 1)];
        for i in 0..=n {
            for j in 0..=n {
                cov[i * (n + 1) + j] = law.covariance(t(i), t(j));
                cross[i * (n + 1) + j] = law.survival_cross_covariance(t(i), t(j));
            }
        }
        Self { step, n, mean, cov, cross }
    }

    /// Estimates the table from `m` i.i.d. realizations.
    pub fn monte_carlo(law: &InfectivityLaw, step: f64, n: usize, m: usize, seed: u64) -> Result<Self> {
        let mut rng = stream(seed, Purpose::MomentCache, 0);
        let w = n + 1;
        let mut sum = vec![0.0; w];
        let mut alive = vec![0.0; w];
        let mut prod = vec![0.0; w * w];
        let mut prod_alive = vec![0.0; w * w];
        let mut vals = vec![0.0; w];
        let mut ind = vec![0.0; w];
        for _ in 0..m {
            let eta = law.duration.sample(&mut rng);
            let r = law.sample_given_duration(&mut rng, eta);
            for k in 0..w {
                let s = k as f64 * step;
                vals[k] = law.eval(&r, s);
                ind[k] = if eta > s { 1.0 } else { 0.0 };
                sum[k] += vals[k];
                alive[k] += ind[k];
            }
            for i in 0..w {
                if vals[i] == 0.0 {
                    continue;
                }
                for j in 0..w {
                    prod[i * w + j] += vals[i] * vals[j];
                    prod_alive[i * w + j] += vals[i] * ind[j];
                }
            }
        }
        let mf = m as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / mf).collect();
        let surv: Vec<f64> = alive.iter().map(|s| s / mf).collect();
        let mut cov = vec![0.0; w * w];
        let mut cross = vec![0.0; w * w];
        for i in 0..w {
            for j in 0..w {
                cov[i * w + j] = prod[i * w + j] / mf - mean[i] * mean[j];
                cross[i * w + j] = prod_alive[i * w + j] / mf - mean[i] * surv[j];
            }
        }
        Ok(Self { step, n, mean, cov, cross })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let x = (s / self.step).clamp(0.0, self.n as f64);
        let i = (x.floor() as usize).min(self.n.saturating_sub(1));
        (i, x - i as f64)
    }

    pub fn mean(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        let (i, f) = self.locate(s);
        if self.n == 0 {
            return self.mean[0];
        }
        self.mean[i] * (1.0 - f) + self.mean[i + 1] * f
    }

    fn bilinear(&self, table: &[f64], s: f64, s2: f64) -> f64 {
        if s < 0.0 || s2 < 0.0 {
            return 0.0;
        }
        let w = self.n + 1;
        if self.n == 0 {
            return table[0];
        }
        let (i, fi) = self.locate(s);
        let (j, fj) = self.locate(s2);
        let at = |a: usize, b: usize| table[a * w + b];
        (1.0 - fi) * ((1.0 - fj) * at(i, j) + fj * at(i, j + 1)) + fi * ((1.0 - fj) * at(i + 1, j) + fj * at(i + 1, j + 1))
    }

    pub fn covariance(&self, s: f64, s2: f64) -> f64 {
        self.bilinear(&self.cov, s, s2)
    }

    pub fn survival_cross_covariance(&self, s: f64, s2: f64) -> f64 {
        self.bilinear(&self.cross, s, s2)
    }
}
