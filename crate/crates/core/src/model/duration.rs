//! Infectious-period laws: CDF, density, survival, hazard and sampling.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};

/// Law `F` of the infectious period `η`.
///
/// Gamma laws are restricted to `shape >= 1` so that the hazard stays bounded
/// on compacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DurationDistribution {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    LogNormal { mu: f64, sigma: f64 },
    /// Piecewise-linear CDF through `(t, F(t))` knots, starting at `(0, 0)`
    /// and ending at `F = 1`.
    PiecewiseLinear { knots: Vec<[f64; 2]> },
}

impl DurationDistribution {
    pub fn exponential(rate: f64) -> Self {
        Self::Exponential { rate }
    }

    pub fn gamma(shape: f64, rate: f64) -> Self {
        Self::Gamma { shape, rate }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Duration(msg));
        match self {
            Self::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!("exponential rate must be positive, got {rate}"));
                }
            }
            Self::Gamma { shape, rate } => {
                if !(shape.is_finite() && *shape >= 1.0) {
                    return bad(format!("gamma shape must be >= 1, got {shape}"));
                }
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!("gamma rate must be positive, got {rate}"));
                }
            }
            Self::LogNormal { mu, sigma } => {
                if !mu.is_finite() || !(sigma.is_finite() && *sigma > 0.0) {
                    return bad(format!("log-normal needs finite mu and sigma > 0, got ({mu}, {sigma})"));
                }
            }
            Self::PiecewiseLinear { knots } => {
                if knots.len() < 2 {
                    return bad("piecewise-linear CDF needs at least two knots".into());
                }
                if knots[0] != [0.0, 0.0] {
                    return bad(format!("first knot must be (0, 0), got {:?}", knots[0]));
                }
                for w in knots.windows(2) {
                    if !(w[1][0] > w[0][0]) || w[1][1] < w[0][1] {
                        return bad(format!("knots must have increasing t and non-decreasing F: {:?} -> {:?}", w[0], w[1]));
                    }
                }
                let last = knots[knots.len() - 1][1];
                if (last - 1.0).abs() > 1e-12 {
                    return bad(format!("last knot must reach F = 1, got {last}"));
                }
            }
        }
        Ok(())
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            Self::PiecewiseLinear { knots } => pl_cdf(knots, t),
            _ => -self.log_survival(t).exp_m1(),
        }
    }

    /// `Fᶜ(t) = 1 − F(t)`.
    pub fn survival(&self, t: f64) -> f64 {
        match self {
            Self::PiecewiseLinear { knots } => 1.0 - pl_cdf(knots, t),
            _ => self.log_survival(t).exp(),
        }
    }

    pub fn log_survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Exponential { rate } => -rate * t,
            Self::Gamma { shape, rate } => gamma_ur(*shape, rate * t).ln(),
            Self::LogNormal { mu, sigma } => {
                let z = (t.ln() - mu) / sigma;
                (0.5 * erfc(z / std::f64::consts::SQRT_2)).ln()
            }
            Self::PiecewiseLinear { knots } => (1.0 - pl_cdf(knots, t)).ln(),
        }
    }

    /// `Fᶜ(t + a) / Fᶜ(a)`, evaluated in log space.
    pub fn survival_ratio(&self, t: f64, a: f64) -> f64 {
        (self.log_survival(t + a) - self.log_survival(a)).exp()
    }

    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            Self::Exponential { rate } => rate * (-rate * t).exp(),
            Self::Gamma { shape, rate } => {
                if t == 0.0 {
                    return if *shape == 1.0 { *rate } else { 0.0 };
                }
                (shape * rate.ln() + (shape - 1.0) * t.ln() - rate * t - ln_gamma(*shape)).exp()
            }
            Self::LogNormal { mu, sigma } => {
                if t == 0.0 {
                    return 0.0;
                }
                let z = (t.ln() - mu) / sigma;
                (-0.5 * z * z).exp() / (t * sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Self::PiecewiseLinear { knots } => pl_density(knots, t),
        }
    }

    /// `h = f / Fᶜ`; infinite where the survival vanishes.
    pub fn hazard(&self, t: f64) -> f64 {
        match self {
            Self::Exponential { rate } => *rate,
            Self::Gamma { shape, rate } => {
                if t <= 0.0 {
                    return if *shape == 1.0 { *rate } else { 0.0 };
                }
                let log_s = self.log_survival(t);
                if log_s == f64::NEG_INFINITY {
                    return *rate;
                }
                let log_f = shape * rate.ln() + (shape - 1.0) * t.ln() - rate * t - ln_gamma(*shape);
                (log_f - log_s).exp()
            }
            _ => {
                let s = self.survival(t);
                if s <= 0.0 {
                    f64::INFINITY
                } else {
                    self.density(t) / s
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Gamma { shape, rate } => shape / rate,
            Self::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Self::PiecewiseLinear { knots } => knots
                .windows(2)
                .map(|w| (w[1][1] - w[0][1]) * 0.5 * (w[0][0] + w[1][0]))
                .sum(),
        }
    }

    /// An upper bound `h*` of the hazard on `[0, horizon]`, or `None` when the
    /// hazard is unbounded there.
    pub fn hazard_bound(&self, horizon: f64) -> Option<f64> {
        match self {
            Self::Exponential { rate } => Some(*rate),
            // shape >= 1: the hazard increases towards `rate`
            Self::Gamma { rate, .. } => Some(*rate),
            Self::LogNormal { .. } => {
                let n = 4000;
                let step = horizon / n as f64;
                let (mut best, mut arg) = (0.0f64, 0.0);
                for i in 1..=n {
                    let t = i as f64 * step;
                    let h = self.hazard(t);
                    if h > best {
                        best = h;
                        arg = t;
                    }
                }
                // refine around the coarse maximum
                let (mut lo, mut hi) = ((arg - step).max(0.0), (arg + step).min(horizon));
                let g = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..80 {
                    let x1 = hi - g * (hi - lo);
                    let x2 = lo + g * (hi - lo);
                    if self.hazard(x1) < self.hazard(x2) {
                        lo = x1;
                    } else {
                        hi = x2;
                    }
                }
                let refined = self.hazard(0.5 * (lo + hi)).max(best);
                refined.is_finite().then_some(refined * 1.01)
            }
            Self::PiecewiseLinear { knots } => {
                let mut bound = 0.0f64;
                for w in knots.windows(2) {
                    let (x0, x1) = (w[0][0], w[1][0]);
                    if x0 >= horizon {
                        break;
                    }
                    let slope = (w[1][1] - w[0][1]) / (x1 - x0);
                    if slope <= 0.0 {
                        continue;
                    }
                    // within a piece the hazard increases; its sup sits at the right end
                    let right = x1.min(horizon);
                    let s = 1.0 - pl_cdf(knots, right);
                    if s <= 1e-300 {
                        return None;
                    }
                    bound = bound.max(slope / s);
                }
                Some(bound)
            }
        }
    }

    /// Solves `ln Fᶜ(x) = log_p` for `x`.
    pub fn inverse_log_survival(&self, log_p: f64) -> f64 {
        if log_p >= 0.0 {
            return 0.0;
        }
        match self {
            Self::Exponential { rate } => -log_p / rate,
            Self::LogNormal { mu, sigma } => {
                let z = std::f64::consts::SQRT_2 * erfc_inv(2.0 * log_p.exp());
                (mu + sigma * z).exp()
            }
            Self::PiecewiseLinear { knots } => {
                let target = 1.0 - log_p.exp();
                for w in knots.windows(2) {
                    if target <= w[1][1] && w[1][1] > w[0][1] {
                        let frac = (target - w[0][1]) / (w[1][1] - w[0][1]);
                        return w[0][0] + frac.clamp(0.0, 1.0) * (w[1][0] - w[0][0]);
                    }
                }
                knots[knots.len() - 1][0]
            }
            Self::Gamma { .. } => self.solve_log_survival(log_p),
        }
    }

    /// Safeguarded Newton on `ln Fᶜ`, whose derivative is `-h`.
    fn solve_log_survival(&self, log_p: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = self.mean().max(1e-12);
        while self.log_survival(hi) > log_p {
            lo = hi;
            hi *= 2.0;
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let g = self.log_survival(x) - log_p;
            if g > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let h = self.hazard(x);
            let mut next = if h > 0.0 && h.is_finite() { x + g / h } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-14 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
                return next;
            }
            x = next;
        }
        x
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
            Self::Gamma { shape, rate } => Gamma::new(*shape, 1.0 / rate).expect("validated gamma").sample(rng),
            Self::LogNormal { mu, sigma } => LogNormal::new(*mu, *sigma).expect("validated log-normal").sample(rng),
            Self::PiecewiseLinear { .. } => {
                let u: f64 = rng.random();
                self.inverse_log_survival((1.0 - u).ln())
            }
        }
    }

    /// Draws `η` from `F` conditioned on `η > age`, by inverse transform of the
    /// truncated survival function.
    pub fn sample_conditional<R: Rng + ?Sized>(&self, rng: &mut R, age: f64) -> Result<f64> {
        if age <= 0.0 {
            return Ok(self.sample(rng));
        }
        if let Self::Exponential { rate } = self {
            return Ok(age + Exp::new(*rate).expect("validated rate").sample(rng));
        }
        let log_s = self.log_survival(age);
        if log_s == f64::NEG_INFINITY {
            return Err(Error::ImpossibleConditioning { age });
        }
        // U in (0, 1]
        let u: f64 = 1.0 - rng.random::<f64>();
        let eta = self.inverse_log_survival(u.ln() + log_s);
        Ok(if eta > age { eta } else { age + f64::EPSILON * age.max(1.0) })
    }
}

fn pl_cdf(knots: &[[f64; 2]], t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    for w in knots.windows(2) {
        if t < w[1][0] {
            let frac = (t - w[0][0]) / (w[1][0] - w[0][0]);
            return w[0][1] + frac * (w[1][1] - w[0][1]);
        }
    }
    1.0
}

fn pl_density(knots: &[[f64; 2]], t: f64) -> f64 {
    for w in knots.windows(2) {
        if t >= w[0][0] && t < w[1][0] {
            return (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]);
        }
    }
    0.0
}
