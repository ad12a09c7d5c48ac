//! The linear transport equation `∂ₜu + ∂ₐu = −hu + g`, `u(t,0) = k(t)`,
//! `u(0,·) = u₀`, through its explicit solution.

use crate::error::{Error, Result};
use crate::model::DurationDistribution;
use crate::quad::{trapezoid_weight, GaussLegendre};

type Fn1 = Box<dyn Fn(f64) -> f64 + Send + Sync>;
type Fn2 = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Data `(u₀, k, g)` with `u₀` and `g(s,·)` supported on `[0, support]`.
pub struct GenericPde {
    pub duration: DurationDistribution,
    pub initial: Fn1,
    pub boundary: Fn1,
    pub source: Fn2,
    pub support: f64,
    /// Trapezoid step for every integral in the weak formula.
    pub step: f64,
}

impl GenericPde {
    /// Pointwise explicit solution `u(t, a)`; the source integral uses
    /// Gauss-Legendre, so this serves as a reference.
    pub fn strong(&self, t: f64, a: f64) -> f64 {
        let d = &self.duration;
        let mut u = if t < a {
            d.survival_ratio(t, a - t) * (self.initial)(a - t)
        } else {
            d.survival(a) * (self.boundary)(t - a)
        };
        let lo = (t - a).max(0.0);
        if t > lo {
            let gl = GaussLegendre::new(10);
            u += gl.integrate(lo, t, 8, |s| d.survival_ratio(t - s, a - t + s) * (self.source)(s, a - t + s));
        }
        u
    }

    fn nodes(&self, upper: f64) -> Result<usize> {
        let x = upper / self.step;
        let n = x.round();
        if (x - n).abs() > 1e-6 {
            return Err(Error::GridMismatch(format!("{upper} is not a multiple of {}", self.step)));
        }
        Ok(n as usize)
    }

    /// `⟨uₜ, φ⟩` from the weak explicit formula, all integrals by trapezoid.
    pub fn weak(&self, t: f64, phi: impl Fn(f64) -> f64) -> Result<f64> {
        let d = &self.duration;
        let dt = self.step;
        let nt = self.nodes(t)?;
        let na = self.nodes(self.support)?;
        let mut total = 0.0;
        for m in 0..=na {
            let a = m as f64 * dt;
            total += trapezoid_weight(m, na, dt) * phi(a + t) * d.survival_ratio(t, a) * (self.initial)(a);
        }
        for j in 0..=nt {
            let s = j as f64 * dt;
            let w = trapezoid_weight(j, nt, dt);
            total += w * phi(t - s) * d.survival(t - s) * (self.boundary)(s);
            let mut inner = 0.0;
            for m in 0..=na {
                let r = m as f64 * dt;
                inner += trapezoid_weight(m, na, dt) * phi(t - s + r) * d.survival_ratio(t - s, r) * (self.source)(s, r);
            }
            total += w * inner;
        }
        Ok(total)
    }

    /// `|d/dt⟨uₜ,φ⟩ − ⟨uₜ, φ′ − hφ⟩ − φ(0)k(t) − ⟨gₜ, φ⟩|` with a centered
    /// difference in time.
    pub fn weak_residual(&self, t: f64, phi: impl Fn(f64) -> f64, dphi: impl Fn(f64) -> f64) -> Result<f64> {
        let dt = self.step;
        let k = self.nodes(t)?;
        if k == 0 {
            return Err(Error::BoundaryNode { index: 0, len: 0 });
        }
        let derivative = (self.weak(t + dt, &phi)? - self.weak(t - dt, &phi)?) / (2.0 * dt);
        let d = &self.duration;
        let generator = self.weak(t, |a| dphi(a) - d.hazard(a) * phi(a))?;
        let na = self.nodes(self.support)?;
        let source: f64 = (0..=na)
            .map(|m| {
                let r = m as f64 * dt;
                trapezoid_weight(m, na, dt) * (self.source)(t, r) * phi(r)
            })
            .sum();
        Ok((derivative - generator - phi(0.0) * (self.boundary)(t) - source).abs())
    }
}
