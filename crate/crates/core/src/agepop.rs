//! The finite measure of infection ages carried by the infected population.
//!
//! Atoms store their infection time ("birth") rather than their age, so
//! advancing the clock is O(1). Prefix sums of the hazard over the atoms in
//! ascending age order are rebuilt lazily when a query needs them.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::quad::CompensatedSum;

/// Unit-weight point measure `ν = Σ δ_{ageᵢ}` with an attached hazard `h`.
pub struct AgeMeasure<H> {
    clock: f64,
    // sorted by (birth ascending, id descending): reversed, ages ascend and
    // equal ages are ordered by ascending id
    atoms: Vec<(f64, u64)>,
    births: HashMap<u64, f64>,
    hazard: H,
    age_invariant_hazard: bool,
    cumulative: Vec<f64>,
    /// `ν(h)` with compensated summation; the prefix sums are plain.
    total: f64,
    dirty: bool,
}

impl<H: Fn(f64) -> f64> AgeMeasure<H> {
    pub fn new(hazard: H) -> Self {
        Self {
            clock: 0.0,
            atoms: Vec::new(),
            births: HashMap::new(),
            hazard,
            age_invariant_hazard: false,
            cumulative: Vec::new(),
            total: 0.0,
            dirty: true,
        }
    }

    /// For a constant hazard the prefix sums survive clock advances.
    pub fn with_constant_hazard(hazard: H) -> Self {
        Self { age_invariant_hazard: true, ..Self::new(hazard) }
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Moves the clock forward: every age grows by `dt`.
    pub fn advance(&mut self, dt: f64) {
        debug_assert!(dt >= 0.0);
        if dt > 0.0 {
            self.clock += dt;
            if !self.age_invariant_hazard {
                self.dirty = true;
            }
        }
    }

    /// Sets the clock to `t ≥ clock`.
    pub fn advance_to(&mut self, t: f64) {
        let dt = t - self.clock;
        self.advance(dt.max(0.0));
    }

    fn key_order(a: &(f64, u64), b: &(f64, u64)) -> std::cmp::Ordering {
        a.0.total_cmp(&b.0).then(b.1.cmp(&a.1))
    }

    /// Adds individual `id` with the given current age.
    pub fn insert(&mut self, id: u64, age: f64) {
        assert!(age >= 0.0, "negative age {age}");
        let birth = self.clock - age;
        let key = (birth, id);
        let pos = self.atoms.partition_point(|x| Self::key_order(x, &key).is_lt());
        self.atoms.insert(pos, key);
        let previous = self.births.insert(id, birth);
        assert!(previous.is_none(), "individual {id} inserted twice");
        self.dirty = true;
    }

    /// Removes individual `id`, returning its age.
    pub fn remove(&mut self, id: u64) -> Option<f64> {
        let birth = self.births.remove(&id)?;
        let key = (birth, id);
        let pos = self.atoms.partition_point(|x| Self::key_order(x, &key).is_lt());
        debug_assert_eq!(self.atoms[pos], key);
        self.atoms.remove(pos);
        self.dirty = true;
        Some(self.clock - birth)
    }

    pub fn age_of(&self, id: u64) -> Option<f64> {
        self.births.get(&id).map(|b| self.clock - b)
    }

    /// `(id, age)` pairs in ascending age order.
    pub fn atoms(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.atoms.iter().rev().map(|&(b, id)| (id, self.clock - b))
    }

    /// `⟨ν, φ⟩ = Σ φ(ageᵢ)`, with compensated summation.
    pub fn apply<F: FnMut(f64) -> f64>(&self, mut phi: F) -> f64 {
        self.atoms().map(|(_, a)| phi(a)).sum::<CompensatedSum>().value()
    }

    fn refresh(&mut self) {
        if !self.dirty {
            return;
        }
        self.cumulative.clear();
        let mut acc = 0.0;
        let mut total = CompensatedSum::default();
        for &(b, _) in self.atoms.iter().rev() {
            let h = (self.hazard)(self.clock - b);
            acc += h;
            total.add(h);
            self.cumulative.push(acc);
        }
        self.total = total.value();
        self.dirty = false;
    }

    /// `ν(h)`.
    pub fn total_hazard(&mut self) -> f64 {
        self.refresh();
        self.total
    }

    /// The atom `H(ν, w)`: the first atom in ascending age order whose
    /// normalized cumulative hazard reaches `w`.
    pub fn h_biased_inverse(&mut self, w: f64) -> Result<(u64, f64)> {
        let total = self.total_hazard();
        if !(total > 0.0) {
            return Err(Error::NoRecoveryMass);
        }
        let n = self.cumulative.len();
        // normalize by the last prefix sum so the discrete law ends at one
        let last = self.cumulative[n - 1];
        let j = self.cumulative.partition_point(|&c| c / last < w).min(n - 1);
        let (b, id) = self.atoms[n - 1 - j];
        Ok((id, self.clock - b))
    }

    /// `G(age of atom j)` for each atom in ascending age order.
    pub fn normalized_cumulative(&mut self) -> Vec<f64> {
        self.refresh();
        let last = self.cumulative.last().copied().unwrap_or(0.0);
        self.cumulative.iter().map(|c| c / last).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use proptest::prelude::*;
    use rand::Rng;

    fn measure(ages: &[f64]) -> AgeMeasure<fn(f64) -> f64> {
        let mut m = AgeMeasure::new((|a: f64| 1.0 + a) as fn(f64) -> f64);
        for (i, &a) in ages.iter().enumerate() {
            m.insert(i as u64, a);
        }
        m
    }

    #[test]
    fn apply_examples() {
        let m = measure(&[1.0, 3.0]);
        assert_eq!(m.apply(|_| 1.0), 2.0);
        assert_eq!(m.apply(|a| a * a), 10.0);
        assert_eq!(measure(&[]).apply(|a| a.exp()), 0.0);
    }

    #[test]
    fn inverse_examples() {
        let mut m = AgeMeasure::with_constant_hazard(|_| 1.0);
        m.insert(0, 1.0);
        m.insert(1, 3.0);
        assert_eq!(m.h_biased_inverse(0.4).unwrap().1, 1.0);
        assert_eq!(m.h_biased_inverse(0.6).unwrap().1, 3.0);
        let mut single = AgeMeasure::new(|a: f64| a);
        single.insert(7, 2.0);
        for w in [0.01, 0.5, 1.0] {
            assert_eq!(single.h_biased_inverse(w).unwrap(), (7, 2.0));
        }
        let mut dead = AgeMeasure::new(|_| 0.0);
        dead.insert(0, 1.0);
        assert!(matches!(dead.h_biased_inverse(0.5), Err(Error::NoRecoveryMass)));
    }

    #[test]
    fn selection_frequency_follows_hazard() {
        let mut m = AgeMeasure::new(|a: f64| a);
        m.insert(0, 1.0);
        m.insert(1, 3.0);
        let mut rng = stream(5, Purpose::Misc, 0);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| m.h_biased_inverse(1.0 - rng.random::<f64>()).unwrap().1 == 3.0)
            .count();
        let p = hits as f64 / n as f64;
        let sd = (0.75 * 0.25 / n as f64).sqrt();
        assert!((p - 0.75).abs() < 3.0 * sd, "{p}");
    }

    #[test]
    fn advance_shifts_test_functions() {
        let mut m = measure(&[0.5, 1.25, 4.0]);
        let phi = |a: f64| (a * 0.7).sin() + a;
        let before = m.apply(|a| phi(a + 0.3));
        m.advance(0.3);
        assert!((m.apply(phi) - before).abs() < 1e-12);
        assert_eq!(m.apply(|_| 1.0), 3.0);
    }

    #[test]
    fn insert_remove_roundtrip() {
        let mut m = measure(&[2.0, 1.0, 2.0]);
        m.advance(1.0);
        assert_eq!(m.remove(1), Some(2.0));
        assert_eq!(m.remove(1), None);
        m.insert(9, 0.0);
        let ages: Vec<_> = m.atoms().collect();
        assert_eq!(ages, vec![(9, 0.0), (0, 3.0), (2, 3.0)]);
    }

    fn brute_force(ages: &[f64], h: impl Fn(f64) -> f64, w: f64) -> f64 {
        let mut sorted: Vec<(f64, usize)> = ages.iter().copied().zip(0..).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let total: f64 = ages.iter().map(|&a| h(a)).sum();
        let mut acc = 0.0;
        for &(a, _) in &sorted {
            acc += h(a);
            if w <= acc / total {
                return a;
            }
        }
        sorted.last().unwrap().0
    }

    proptest! {
        #[test]
        fn inverse_is_monotone(ages in prop::collection::vec(0.0f64..10.0, 1..30), w1 in 0.0f64..1.0, w2 in 0.0f64..1.0) {
            let mut m = measure(&ages);
            let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
            prop_assert!(m.h_biased_inverse(lo).unwrap().1 <= m.h_biased_inverse(hi).unwrap().1);
        }

        #[test]
        fn inverse_of_distribution_function_recovers_atoms(ages in prop::collection::vec(0.0f64..10.0, 1..30)) {
            let mut m = measure(&ages);
            let g = m.normalized_cumulative();
            let sorted: Vec<f64> = m.atoms().map(|(_, a)| a).collect();
            for (j, &gj) in g.iter().enumerate() {
                prop_assert_eq!(m.h_biased_inverse(gj).unwrap().1, sorted[j]);
            }
        }

        #[test]
        fn matches_linear_scan(ages in prop::collection::vec(0.0f64..5.0, 1..=20), advance in 0.0f64..2.0) {
            let mut m = measure(&ages);
            m.advance(advance);
            let shifted: Vec<f64> = m.atoms().map(|(_, a)| a).collect();
            for k in 0..=200 {
                let w = k as f64 / 200.0;
                prop_assert_eq!(m.h_biased_inverse(w).unwrap().1, brute_force(&shifted, |a| 1.0 + a, w));
            }
        }
    }
}
