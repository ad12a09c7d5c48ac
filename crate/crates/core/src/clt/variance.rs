//! Closed-form variances of the two equivalent noise decompositions of `μ̂ₜ(φ)`.
//!
//! `μ̌ⁱⁿᶠ + μ̌ʳᵉᶜ` (white noises on infections and recoveries) and
//! `μ̂⁰ + μ̂¹` (initial and new individuals) have the same law. Both variances
//! are computed here by grid-aligned trapezoid sums, so their gap measures the
//! quadrature error alone.

use crate::error::Result;
use crate::lln::{solve_lln, Grid, LlnPaths};
use crate::model::{InfectivityLaw, InitialCondition};
use crate::quad::trapezoid_weight;

/// The four variance terms at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceTerms {
    pub infection: f64,
    pub recovery: f64,
    pub initial: f64,
    pub new: f64,
}

impl VarianceTerms {
    pub fn lhs(&self) -> f64 {
        self.infection + self.recovery
    }

    pub fn rhs(&self) -> f64 {
        self.initial + self.new
    }

    pub fn relative_gap(&self) -> f64 {
        (self.lhs() - self.rhs()).abs() / self.rhs().abs()
    }
}

/// Variance terms of `φ` at node `n` of `lln`.
pub fn variance_terms(lln: &LlnPaths, n: usize, phi: impl Fn(f64) -> f64) -> VarianceTerms {
    let dt = lln.grid.step;
    let d = lln.duration();
    let fc = lln.survival_table();
    let y = &lln.rate;
    let t = lln.grid.time(n);
    let phi2: Vec<f64> = (0..=n).map(|i| phi(i as f64 * dt).powi(2)).collect();
    let density: Vec<f64> = (0..=n).map(|i| d.hazard(i as f64 * dt) * fc[i]).collect();

    let mut infection = 0.0;
    let mut new = 0.0;
    let mut rec_density = 0.0;
    let mut rec_initial = 0.0;
    let ages = lln.initial_ages();
    let i0 = lln.initial_mass();
    for j in 0..=n {
        let w = trapezoid_weight(j, n, dt);
        let lag = n - j;
        infection += w * phi2[lag] * fc[lag] * fc[lag] * y[j];
        new += w * phi2[lag] * fc[lag] * y[j];
        // recoveries at time s = jΔ among those infected after time zero
        let mut inner = 0.0;
        for i in 0..=j {
            let ratio = fc[lag + i] / fc[i];
            inner += trapezoid_weight(i, j, dt) * phi2[lag + i] * ratio * ratio * density[i] * y[j - i];
        }
        rec_density += w * inner;
        // and among the initially infected, now of age v + s
        let s = j as f64 * dt;
        let initial: f64 = ages
            .ages
            .iter()
            .zip(&ages.weights)
            .map(|(&v, &q)| {
                let ratio = d.survival_ratio(t - s, v + s);
                q * phi(t + v).powi(2) * ratio * ratio * d.hazard(v + s) * d.survival_ratio(s, v)
            })
            .sum();
        rec_initial += w * i0 * initial;
    }
    let initial = i0
        * ages
            .ages
            .iter()
            .zip(&ages.weights)
            .map(|(&v, &q)| {
                let r = d.survival_ratio(t, v);
                q * (r - r * r) * phi(v + t).powi(2)
            })
            .sum::<f64>();
    VarianceTerms { infection, recovery: rec_density + rec_initial, initial, new }
}

/// Result of [`variance_identity_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub terms: VarianceTerms,
}

/// Solves the limit on `[0, t]` with step `step` and compares both
/// variance decompositions of `φ` at time `t`.
pub fn variance_identity_check(
    law: &InfectivityLaw,
    init: &InitialCondition,
    t: f64,
    step: f64,
    phi: impl Fn(f64) -> f64,
) -> Result<VarianceIdentity> {
    let grid = Grid::new(t, step)?;
    let lln = solve_lln(law, init, &grid)?;
    let terms = variance_terms(&lln, grid.len() - 1, phi);
    Ok(VarianceIdentity { lhs: terms.lhs(), rhs: terms.rhs(), gap: terms.relative_gap(), terms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lln::bump;
    use crate::model::{AgeLaw, Coupling, DurationDistribution};

    fn init() -> InitialCondition {
        InitialCondition {
            susceptible: 0.9,
            infected: 0.1,
            recovered: 0.0,
            age_law: AgeLaw::Uniform { max_age: 2.0 },
            coupling: Coupling::Residual,
        }
    }

    #[test]
    fn identity_converges_at_second_order() {
        let law = InfectivityLaw::indicator(0.5, DurationDistribution::gamma(2.0, 0.6));
        let (bump_phi, _) = bump(1.5, 1.5);
        for phi in [&(|_: f64| 1.0) as &dyn Fn(f64) -> f64, &bump_phi] {
            let a = variance_identity_check(&law, &init(), 4.0, 0.02, phi).unwrap();
            let b = variance_identity_check(&law, &init(), 4.0, 0.01, phi).unwrap();
            assert!(a.gap < 1e-3, "{a:?}");
            let ratio = a.gap / b.gap;
            assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn without_epidemic_only_initial_terms_remain() {
        let law = InfectivityLaw::indicator(0.0, DurationDistribution::gamma(2.0, 0.6));
        let r = variance_identity_check(&law, &init(), 3.0, 0.01, |_| 1.0).unwrap();
        assert_eq!(r.terms.infection, 0.0);
        assert_eq!(r.terms.new, 0.0);
        assert!(r.gap < 1e-4, "{r:?}");
    }

    #[test]
    fn markovian_new_individuals_are_binomial() {
        // Var μ̂¹ₜ(1) = ∫ Fᶜ(t − s) Ῡ(s) ds and Var μ̂⁰ₜ(1) = Ī(0) e^{−γt}(1 − e^{−γt})
        let law = InfectivityLaw::indicator(0.4, DurationDistribution::exponential(0.25));
        let r = variance_identity_check(&law, &init(), 10.0, 0.01, |_| 1.0).unwrap();
        let e = (-2.5f64).exp();
        assert!((r.terms.initial - 0.1 * e * (1.0 - e)).abs() < 1e-12);
        assert!(r.gap < 1e-4);
    }
}
