//! Random infectivity functions `λ(·)` and their moments.
//!
//! Every built-in law has the form `λ(s) = c · λ̃(s) · 1{ζ ≤ s < η}` where
//! `η ~ F` is the infectious period, `λ̃` a deterministic profile, `c` a random
//! level and `ζ` an onset breakpoint. A realization is therefore piecewise
//! continuous with at most two pieces (`[0, ζ)` silent, `[ζ, η)` active).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::duration::DurationDistribution;
use crate::error::{Error, Result};
use crate::quad::GaussLegendre;

/// Deterministic infectivity profile `λ̃`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    Constant { level: f64 },
    /// `peak · exp(−rate · s)`
    Decay { peak: f64, rate: f64 },
    /// Piecewise-linear through `(s, λ̃(s))` knots, flat beyond the last one.
    Table { knots: Vec<[f64; 2]> },
}

impl Profile {
    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        match self {
            Self::Constant { level } => *level,
            Self::Decay { peak, rate } => peak * (-rate * s).exp(),
            Self::Table { knots } => {
                if s <= knots[0][0] {
                    return knots[0][1];
                }
                for w in knots.windows(2) {
                    if s < w[1][0] {
                        let frac = (s - w[0][0]) / (w[1][0] - w[0][0]);
                        return w[0][1] + frac * (w[1][1] - w[0][1]);
                    }
                }
                knots[knots.len() - 1][1]
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            Self::Constant { level } => *level,
            Self::Decay { peak, .. } => *peak,
            Self::Table { knots } => knots.iter().map(|k| k[1]).fold(0.0, f64::max),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant { .. })
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Constant { level } => level.is_finite() && *level >= 0.0,
            Self::Decay { peak, rate } => peak.is_finite() && *peak >= 0.0 && rate.is_finite() && *rate >= 0.0,
            Self::Table { knots } => {
                !knots.is_empty()
                    && knots[0][0] == 0.0
                    && knots.windows(2).all(|w| w[1][0] > w[0][0])
                    && knots.iter().all(|k| k[1].is_finite() && k[1] >= 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid infectivity profile {self:?}")))
        }
    }
}

/// How the random function is built from `η` and extra randomness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InfectivityShape {
    /// `λ̃(s) · 1{s < η}`.
    Separable { profile: Profile },
    /// `B · λ̃(s) · 1{s < η}` with `B ~ U[low, high]` independent of `η`.
    RandomLevel { profile: Profile, low: f64, high: f64 },
    /// `level · 1{uη ≤ s < η}` with `u ~ U[low, high]`: a latent phase that
    /// takes a random fraction of the infectious period.
    Latent { level: f64, low: f64, high: f64 },
}

/// Law of the random infectivity function, coupled to its duration law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfectivityLaw {
    pub shape: InfectivityShape,
    pub duration: DurationDistribution,
}

/// One sampled infectivity function: `scale · λ̃(s)` on `[onset, eta)`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfectivityRealization {
    pub scale: f64,
    pub onset: f64,
    pub eta: f64,
}

impl InfectivityRealization {
    /// Breakpoints `0 = ζ⁰ ≤ … ≤ ζᵏ = η`.
    pub fn breakpoints(&self) -> Vec<f64> {
        if self.onset > 0.0 {
            vec![0.0, self.onset, self.eta]
        } else {
            vec![0.0, self.eta]
        }
    }

    pub fn piece_count(&self) -> usize {
        self.breakpoints().len() - 1
    }
}

impl InfectivityLaw {
    pub fn new(shape: InfectivityShape, duration: DurationDistribution) -> Self {
        Self { shape, duration }
    }

    /// `β · 1{s < η}`.
    pub fn indicator(beta: f64, duration: DurationDistribution) -> Self {
        Self::new(
            InfectivityShape::Separable { profile: Profile::Constant { level: beta } },
            duration,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.duration.validate()?;
        match &self.shape {
            InfectivityShape::Separable { profile } => profile.validate(),
            InfectivityShape::RandomLevel { profile, low, high } => {
                profile.validate()?;
                if !(*low >= 0.0 && high >= low && high.is_finite()) {
                    return Err(Error::Config(format!("random level needs 0 <= low <= high, got [{low}, {high}]")));
                }
                Ok(())
            }
            InfectivityShape::Latent { level, low, high } => {
                if !(level.is_finite() && *level >= 0.0) {
                    return Err(Error::Config(format!("latent level must be >= 0, got {level}")));
                }
                if !(*low > 0.0 && high > low && *high < 1.0) {
                    return Err(Error::Config(format!("latent fraction needs 0 < low < high < 1, got [{low}, {high}]")));
                }
                Ok(())
            }
        }
    }

    /// Sup bound `λ*`.
    pub fn sup_bound(&self) -> f64 {
        match &self.shape {
            InfectivityShape::Separable { profile } => profile.sup(),
            InfectivityShape::RandomLevel { profile, high, .. } => high * profile.sup(),
            InfectivityShape::Latent { level, .. } => *level,
        }
    }

    /// Separable laws `λ̃(s)·1{s < η}` with deterministic `λ̃`.
    pub fn separable_profile(&self) -> Option<&Profile> {
        match &self.shape {
            InfectivityShape::Separable { profile } => Some(profile),
            _ => None,
        }
    }

    /// True when every realization is constant on each of its pieces.
    pub fn is_piecewise_constant(&self) -> bool {
        match &self.shape {
            InfectivityShape::Separable { profile } | InfectivityShape::RandomLevel { profile, .. } => {
                profile.is_constant()
            }
            InfectivityShape::Latent { .. } => true,
        }
    }

    #[inline]
    pub fn profile_value(&self, s: f64) -> f64 {
        match &self.shape {
            InfectivityShape::Separable { profile } | InfectivityShape::RandomLevel { profile, .. } => {
                profile.value(s)
            }
            InfectivityShape::Latent { level, .. } => *level,
        }
    }

    /// `λ(s)` for a realization.
    #[inline]
    pub fn eval(&self, r: &InfectivityRealization, s: f64) -> f64 {
        if s < r.onset || s >= r.eta {
            0.0
        } else {
            r.scale * self.profile_value(s)
        }
    }

    /// Draws a realization; fails when `η` exceeds `cap`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, cap: f64) -> Result<InfectivityRealization> {
        let eta = self.duration.sample(rng);
        if eta > cap {
            return Err(Error::HorizonCap { eta, cap });
        }
        Ok(self.sample_given_duration(rng, eta))
    }

    /// Draws the remaining randomness of a realization given its duration.
    pub fn sample_given_duration<R: Rng + ?Sized>(&self, rng: &mut R, eta: f64) -> InfectivityRealization {
        let r = match &self.shape {
            InfectivityShape::Separable { .. } => InfectivityRealization { scale: 1.0, onset: 0.0, eta },
            InfectivityShape::RandomLevel { low, high, .. } => {
                let u: f64 = rng.random();
                InfectivityRealization { scale: low + (high - low) * u, onset: 0.0, eta }
            }
            InfectivityShape::Latent { low, high, .. } => {
                let u: f64 = rng.random();
                InfectivityRealization { scale: 1.0, onset: (low + (high - low) * u) * eta, eta }
            }
        };
        debug_assert!(r.onset < r.eta || r.eta == 0.0);
        r
    }

    /// `λ̄(s) = E[λ(s)]`.
    pub fn mean(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        let d = &self.duration;
        match &self.shape {
            InfectivityShape::Separable { profile } => profile.value(s) * d.survival(s),
            InfectivityShape::RandomLevel { profile, low, high } => {
                0.5 * (low + high) * profile.value(s) * d.survival(s)
            }
            InfectivityShape::Latent { level, low, high } => level * latent_kernel(d, *low, *high, s, s),
        }
    }

    /// `E[λ(s) λ(s′)]`.
    pub fn second_moment(&self, s: f64, s2: f64) -> f64 {
        if s < 0.0 || s2 < 0.0 {
            return 0.0;
        }
        let d = &self.duration;
        let (lo_s, hi_s) = if s <= s2 { (s, s2) } else { (s2, s) };
        match &self.shape {
            InfectivityShape::Separable { profile } => profile.value(s) * profile.value(s2) * d.survival(hi_s),
            InfectivityShape::RandomLevel { profile, low, high } => {
                let second = (low * low + low * high + high * high) / 3.0;
                second * profile.value(s) * profile.value(s2) * d.survival(hi_s)
            }
            InfectivityShape::Latent { level, low, high } => {
                level * level * latent_kernel(d, *low, *high, lo_s, hi_s)
            }
        }
    }

    /// `v(s, s′) = Cov(λ(s), λ(s′))`.
    pub fn covariance(&self, s: f64, s2: f64) -> f64 {
        self.second_moment(s, s2) - self.mean(s) * self.mean(s2)
    }

    /// `E[λ(s) 1{η > s′}]`.
    pub fn mean_alive(&self, s: f64, s2: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        let d = &self.duration;
        let hi = s.max(s2);
        match &self.shape {
            InfectivityShape::Separable { profile } => profile.value(s) * d.survival(hi),
            InfectivityShape::RandomLevel { profile, low, high } => {
                0.5 * (low + high) * profile.value(s) * d.survival(hi)
            }
            InfectivityShape::Latent { level, low, high } => level * latent_kernel(d, *low, *high, s, hi),
        }
    }

    /// `Cov(λ(s), 1{η > s′})`.
    pub fn survival_cross_covariance(&self, s: f64, s2: f64) -> f64 {
        self.mean_alive(s, s2) - self.mean(s) * self.duration.survival(s2)
    }
}

/// `∫_y^∞ q(x/e) f(e) de` for `x ≤ y`, where `q(r) = clamp((r − lo)/(hi − lo), 0, 1)`
/// is the probability that the onset fraction is at most `r`.
fn latent_kernel(d: &DurationDistribution, lo: f64, hi: f64, x: f64, y: f64) -> f64 {
    debug_assert!(x <= y + 1e-12);
    if x <= 0.0 {
        return 0.0;
    }
    // q = 1 on e ≤ x/hi, q = 0 on e ≥ x/lo
    let e1 = y.max(x / hi);
    let e2 = x / lo;
    let full = d.survival(y) - d.survival(e1);
    if e2 <= e1 {
        return full;
    }
    thread_local! {
        static GL: GaussLegendre = GaussLegendre::new(20);
    }
    let ramp = GL.with(|gl| {
        gl.integrate(e1, e2, 8, |e| ((x / e - lo) / (hi - lo)).clamp(0.0, 1.0) * d.density(e))
    });
    full + ramp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn laws() -> Vec<InfectivityLaw> {
        let d = DurationDistribution::gamma(2.0, 0.5);
        vec![
            InfectivityLaw::indicator(0.5, d.clone()),
            InfectivityLaw::new(
                InfectivityShape::Separable { profile: Profile::Decay { peak: 1.2, rate: 0.3 } },
                d.clone(),
            ),
            InfectivityLaw::new(
                InfectivityShape::RandomLevel { profile: Profile::Constant { level: 1.0 }, low: 0.2, high: 0.8 },
                d.clone(),
            ),
            InfectivityLaw::new(InfectivityShape::Latent { level: 0.7, low: 0.1, high: 0.4 }, d),
        ]
    }

    #[test]
    fn indicator_examples() {
        let law = InfectivityLaw::indicator(0.5, DurationDistribution::exponential(1.0));
        let r = law.sample_given_duration(&mut stream(1, Purpose::Misc, 0), 2.0);
        assert_eq!(law.eval(&r, 1.0), 0.5);
        assert_eq!(law.eval(&r, 2.5), 0.0);
        assert_eq!(r.eta, 2.0);
        assert_eq!(r.piece_count(), 1);
        assert_eq!(*r.breakpoints().last().unwrap(), r.eta);
    }

    #[test]
    fn indicator_moments_in_closed_form() {
        let law = InfectivityLaw::indicator(1.0, DurationDistribution::exponential(1.0));
        assert_eq!(law.mean(0.0), 1.0);
        assert_eq!(law.covariance(0.0, 0.0), 0.0);
        assert!((law.mean(1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(law.covariance(1.0, 2.0), law.covariance(2.0, 1.0));
        let (t, t2) = (0.7, 1.9);
        let expect = (-t2 as f64).exp() - (-t as f64).exp() * (-t2 as f64).exp();
        assert!((law.covariance(t, t2) - expect).abs() < 1e-15);
    }

    #[test]
    fn realizations_respect_bounds_and_duration() {
        let mut rng = stream(2, Purpose::Misc, 0);
        for law in laws() {
            let sup = law.sup_bound();
            for _ in 0..2000 {
                let r = law.sample(&mut rng, 1e6).unwrap();
                for i in 0..60 {
                    let s = i as f64 * 0.25;
                    let v = law.eval(&r, s);
                    assert!((0.0..=sup).contains(&v));
                    if s >= r.eta {
                        assert_eq!(v, 0.0);
                    }
                }
                // η is the sup of the support: just below it the function is still on
                let just_below = r.eta * (1.0 - 1e-12);
                if law.profile_value(just_below) > 0.0 {
                    assert!(law.eval(&r, just_below) > 0.0 || r.scale == 0.0);
                }
            }
        }
    }

    #[test]
    fn horizon_cap_rejects_long_durations() {
        let law = InfectivityLaw::indicator(1.0, DurationDistribution::exponential(1.0));
        let mut rng = stream(3, Purpose::Misc, 0);
        let failures = (0..200).filter(|_| law.sample(&mut rng, 0.1).is_err()).count();
        assert!(failures > 100);
    }

    #[test]
    fn monte_carlo_moments_agree_with_stored_values() {
        let m = 100_000usize;
        let mut rng = stream(4, Purpose::Misc, 0);
        for law in laws() {
            let sup = law.sup_bound();
            let times = [0.0, 0.5, 1.5, 3.0, 6.0];
            let mut sum = [0.0; 5];
            let mut sq = [0.0; 5];
            for _ in 0..m {
                let r = law.sample(&mut rng, 1e6).unwrap();
                for (k, &s) in times.iter().enumerate() {
                    let v = law.eval(&r, s);
                    sum[k] += v;
                    sq[k] += v * v;
                }
            }
            let band = 3.0 * sup / (m as f64).sqrt();
            for (k, &s) in times.iter().enumerate() {
                let mean = sum[k] / m as f64;
                let var = sq[k] / m as f64 - mean * mean;
                assert!((mean - law.mean(s)).abs() < band, "{law:?} mean at {s}");
                assert!((var - law.covariance(s, s)).abs() < band * sup, "{law:?} var at {s}");
            }
        }
    }

    #[test]
    fn cross_moments_match_monte_carlo() {
        let m = 200_000usize;
        let mut rng = stream(5, Purpose::Misc, 0);
        let law = &laws()[3];
        let pairs = [(1.0, 2.0), (2.5, 1.0), (0.5, 4.0)];
        let mut acc = [[0.0; 2]; 3];
        for _ in 0..m {
            let r = law.sample(&mut rng, 1e6).unwrap();
            for (k, &(s, s2)) in pairs.iter().enumerate() {
                acc[k][0] += law.eval(&r, s) * law.eval(&r, s2);
                acc[k][1] += law.eval(&r, s) * f64::from(u8::from(r.eta > s2));
            }
        }
        let band = 3.0 * law.sup_bound().powi(2) / (m as f64).sqrt();
        for (k, &(s, s2)) in pairs.iter().enumerate() {
            assert!((acc[k][0] / m as f64 - law.second_moment(s, s2)).abs() < band);
            assert!((acc[k][1] / m as f64 - law.mean_alive(s, s2)).abs() < band);
        }
    }

    #[test]
    fn piecewise_constant_classification() {
        let l = laws();
        assert!(l[0].is_piecewise_constant());
        assert!(!l[1].is_piecewise_constant());
        assert!(l[2].is_piecewise_constant());
        assert!(l[3].is_piecewise_constant());
        assert!(l[0].separable_profile().is_some());
        assert!(l[2].separable_profile().is_none());
    }
}
