use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{Diagnostics, Event, EventKind, RecoveryMode, SimulationConfig, Trajectory};
use crate::agepop::AgeMeasure;
use crate::error::{Error, Result};
use crate::model::{DurationDistribution, InfectivityLaw, InfectivityRealization};
use crate::quad::CompensatedSum;
use crate::rng::Stream;

const RATIO_SLACK: f64 = 1e-9;
const RECOMPUTE_EVERY: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pending {
    Onset,
    Recovery,
}

#[derive(Debug, Clone, Copy)]
struct Queued {
    time: f64,
    kind: Pending,
    seq: u64,
    id: u64,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // reversed: BinaryHeap is a max-heap and we want the earliest event first
    fn cmp(&self, other: &Self) -> Ordering {
        let rank = |k: Pending| if k == Pending::Onset { 0u8 } else { 1 };
        other
            .time
            .total_cmp(&self.time)
            .then(rank(other.kind).cmp(&rank(self.kind)))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy)]
struct Infected {
    id: u64,
    birth: f64,
    real: InfectivityRealization,
    active: bool,
}

/// Left-limit grid recorder.
struct Recorder {
    traj: Trajectory,
    next: usize,
    nodes: usize,
    step: f64,
}

impl Recorder {
    fn node_time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    /// Emits every node `≤ until` with the current state; `force_at` gives
    /// `𝔉ᴺ` at the node time.
    fn emit_until(&mut self, until: f64, s: usize, i: usize, r: usize, n: f64, mut force_at: impl FnMut(f64) -> f64) {
        while self.next < self.nodes && self.node_time(self.next) <= until {
            let t = self.node_time(self.next);
            let f = force_at(t);
            let tr = &mut self.traj;
            tr.times.push(t);
            tr.susceptible.push(s as f64);
            tr.infected.push(i as f64);
            tr.recovered.push(r as f64);
            tr.force.push(f);
            tr.rate.push(s as f64 / n * f);
            self.next += 1;
        }
    }
}

struct Counts {
    s: usize,
    i: usize,
    r: usize,
    n: usize,
}

impl Counts {
    fn check(&self, time: f64) -> Result<()> {
        let total = self.s + self.i + self.r;
        if total != self.n {
            return Err(Error::Conservation { time, total, expected: self.n });
        }
        Ok(())
    }
}

fn exp_wait(rng: &mut Stream, rate: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / rate
}

fn check_ratio(diag: &mut Diagnostics, ratio: f64, time: f64, process: &'static str) -> Result<()> {
    if ratio > diag.max_acceptance_ratio {
        diag.max_acceptance_ratio = ratio;
    }
    if ratio > 1.0 + RATIO_SLACK {
        return Err(Error::ThinningBound { ratio, time, process });
    }
    Ok(())
}

/// Runs one replica with a caller-owned stream.
pub fn simulate_with(config: &SimulationConfig, rng: &mut Stream) -> Result<Trajectory> {
    config.validate()?;
    match config.mode {
        RecoveryMode::Scheduled => run_scheduled(config, rng),
        RecoveryMode::Hazard => run_hazard(config, rng),
    }
}

fn recorder(config: &SimulationConfig) -> Recorder {
    let nodes = config.node_count();
    let mut traj = Trajectory { population: config.population, step: config.step, ..Default::default() };
    for v in [&mut traj.times, &mut traj.susceptible, &mut traj.infected, &mut traj.recovered, &mut traj.force, &mut traj.rate] {
        v.reserve(nodes);
    }
    Recorder { traj, next: 0, nodes, step: config.step }
}

/// Contribution of an active individual when the law is piecewise constant.
fn level(law: &InfectivityLaw, real: &InfectivityRealization) -> f64 {
    real.scale * law.profile_value(real.onset)
}

struct Population<'a> {
    law: &'a InfectivityLaw,
    piecewise_constant: bool,
    infected: Vec<Infected>,
    index: HashMap<u64, usize>,
    force: CompensatedSum,
}

impl<'a> Population<'a> {
    fn add(&mut self, who: Infected) {
        if who.active && self.piecewise_constant {
            self.force.add(level(self.law, &who.real));
        }
        self.index.insert(who.id, self.infected.len());
        self.infected.push(who);
    }

    fn remove(&mut self, id: u64) -> Infected {
        let pos = self.index.remove(&id).expect("recovering individual is infected");
        let who = self.infected.swap_remove(pos);
        if pos < self.infected.len() {
            self.index.insert(self.infected[pos].id, pos);
        }
        if who.active && self.piecewise_constant {
            self.force.add(-level(self.law, &who.real));
        }
        who
    }

    fn activate(&mut self, id: u64) {
        let pos = self.index[&id];
        let who = &mut self.infected[pos];
        who.active = true;
        if self.piecewise_constant {
            self.force.add(level(self.law, &who.real));
        }
    }

    fn recompute(&mut self) {
        if self.piecewise_constant {
            self.force = self.infected.iter().filter(|x| x.active).map(|x| level(self.law, &x.real)).sum();
        }
    }

    /// `𝔉ᴺ(t) = Σ λᵢ(t − birthᵢ)`.
    fn force_at(&self, t: f64) -> f64 {
        if self.piecewise_constant {
            self.force.value().max(0.0)
        } else {
            self.infected.iter().map(|x| self.law.eval(&x.real, t - x.birth)).sum::<CompensatedSum>().value()
        }
    }
}

fn run_scheduled(config: &SimulationConfig, rng: &mut Stream) -> Result<Trajectory> {
    let law = &config.law;
    let n_f = config.population as f64;
    let horizon = config.horizon;
    let lambda_star = law.sup_bound();
    let (s0, i0, r0) = config.initial_counts();
    let mut counts = Counts { s: s0, i: i0, r: r0, n: config.population };
    let mut rec = recorder(config);
    let mut queue = BinaryHeap::new();
    let mut seq = 0u64;
    let mut pop = Population {
        law,
        piecewise_constant: law.is_piecewise_constant(),
        infected: Vec::with_capacity(i0),
        index: HashMap::with_capacity(i0),
        force: CompensatedSum::default(),
    };

    for j in 0..i0 {
        let ind = config.init.sample_individual(rng, law)?;
        if ind.realization.eta > config.duration_cap {
            return Err(Error::HorizonCap { eta: ind.realization.eta, cap: config.duration_cap });
        }
        let id = j as u64;
        let active = ind.realization.onset <= ind.age;
        if !active {
            queue.push(Queued { time: ind.realization.onset - ind.age, kind: Pending::Onset, seq, id });
            seq += 1;
        }
        queue.push(Queued { time: ind.remaining, kind: Pending::Recovery, seq, id });
        seq += 1;
        rec.traj.initial_remaining.push(ind.remaining);
        pop.add(Infected { id, birth: -ind.age, real: ind.realization, active });
    }

    let mut t = 0.0;
    let mut next_id = i0 as u64;
    let mut diag = Diagnostics::default();
    let mut log_seq = 0u64;
    let mut since_recompute = 0u64;

    loop {
        let next_scheduled = queue.peek().map_or(f64::INFINITY, |q: &Queued| q.time);
        let bound = counts.s as f64 / n_f * (lambda_star * counts.i as f64);
        let candidate = if bound > 0.0 { t + exp_wait(rng, bound) } else { f64::INFINITY };

        if candidate <= next_scheduled {
            if candidate > horizon {
                break;
            }
            rec.emit_until(candidate, counts.s, counts.i, counts.r, n_f, |x| pop.force_at(x));
            t = candidate;
            diag.proposals += 1;
            let rate = counts.s as f64 / n_f * pop.force_at(t);
            check_ratio(&mut diag, rate / bound, t, "infection")?;
            if rng.random::<f64>() * bound < rate {
                let real = law.sample(rng, config.duration_cap)?;
                let id = next_id;
                next_id += 1;
                let active = real.onset <= 0.0;
                if !active {
                    queue.push(Queued { time: t + real.onset, kind: Pending::Onset, seq, id });
                    seq += 1;
                }
                queue.push(Queued { time: t + real.eta, kind: Pending::Recovery, seq, id });
                seq += 1;
                pop.add(Infected { id, birth: t, real, active });
                counts.s -= 1;
                counts.i += 1;
                counts.check(t)?;
                diag.events += 1;
                diag.infections += 1;
                if config.record_events {
                    rec.traj.events.push(Event { time: t, kind: EventKind::Infection, id, seq: log_seq });
                }
                log_seq += 1;
            }
        } else {
            if next_scheduled > horizon {
                break;
            }
            rec.emit_until(next_scheduled, counts.s, counts.i, counts.r, n_f, |x| pop.force_at(x));
            let q = queue.pop().expect("peeked");
            t = q.time;
            match q.kind {
                Pending::Onset => pop.activate(q.id),
                Pending::Recovery => {
                    pop.remove(q.id);
                    counts.i -= 1;
                    counts.r += 1;
                    counts.check(t)?;
                    diag.events += 1;
                    diag.recoveries += 1;
                    if config.record_events {
                        rec.traj.events.push(Event { time: t, kind: EventKind::Recovery, id: q.id, seq: log_seq });
                    }
                    log_seq += 1;
                }
            }
        }
        since_recompute += 1;
        if since_recompute >= RECOMPUTE_EVERY {
            pop.recompute();
            since_recompute = 0;
        }
    }
    rec.emit_until(horizon + 0.5 * config.step, counts.s, counts.i, counts.r, n_f, |x| pop.force_at(x));
    let mut traj = rec.traj;
    traj.final_state = (counts.s, counts.i, counts.r);
    traj.diagnostics = diag;
    Ok(traj)
}

fn run_hazard(config: &SimulationConfig, rng: &mut Stream) -> Result<Trajectory> {
    let law = &config.law;
    let profile = law.separable_profile().expect("validated separable law").clone();
    let n_f = config.population as f64;
    let horizon = config.horizon;
    let lambda_star = law.sup_bound();
    let h_star = config.hazard_bound().expect("validated hazard bound");
    let (s0, i0, r0) = config.initial_counts();
    let mut counts = Counts { s: s0, i: i0, r: r0, n: config.population };
    let mut rec = recorder(config);

    let duration: DurationDistribution = law.duration.clone();
    let constant_hazard = matches!(duration, DurationDistribution::Exponential { .. });
    let hazard = move |a: f64| duration.hazard(a);
    let mut measure =
        if constant_hazard { AgeMeasure::with_constant_hazard(hazard) } else { AgeMeasure::new(hazard) };
    for j in 0..i0 {
        // only the age is used: recovery then follows the hazard from that age
        let ind = config.init.sample_individual(rng, law)?;
        measure.insert(j as u64, ind.age);
    }
    let constant_profile = profile.is_constant();
    let level = profile.sup();
    let force_of = |m: &AgeMeasure<_>| if constant_profile { level * m.len() as f64 } else { m.apply(|a| profile.value(a)) };

    let mut t = 0.0;
    let mut next_id = i0 as u64;
    let mut diag = Diagnostics::default();
    let mut log_seq = 0u64;

    loop {
        let b_inf = counts.s as f64 / n_f * (lambda_star * counts.i as f64);
        let b_rec = counts.i as f64 * h_star;
        let total = b_inf + b_rec;
        if !(total > 0.0) {
            break;
        }
        let candidate = t + exp_wait(rng, total);
        if candidate > horizon {
            break;
        }
        {
            let (s, i, r) = (counts.s, counts.i, counts.r);
            let clock = measure.clock();
            // ages at node x are ages at the last event plus x − clock
            let force_at = |x: f64| {
                if constant_profile {
                    level * measure.len() as f64
                } else {
                    measure.apply(|a| profile.value(a + x - clock))
                }
            };
            rec.emit_until(candidate, s, i, r, n_f, force_at);
        }
        measure.advance_to(candidate);
        t = candidate;
        diag.proposals += 1;
        if rng.random::<f64>() * total < b_inf {
            let rate = counts.s as f64 / n_f * force_of(&measure);
            check_ratio(&mut diag, rate / b_inf, t, "infection")?;
            if rng.random::<f64>() * b_inf < rate {
                let id = next_id;
                next_id += 1;
                measure.insert(id, 0.0);
                counts.s -= 1;
                counts.i += 1;
                counts.check(t)?;
                diag.events += 1;
                diag.infections += 1;
                if config.record_events {
                    rec.traj.events.push(Event { time: t, kind: EventKind::Infection, id, seq: log_seq });
                }
                log_seq += 1;
            }
        } else {
            let mass = measure.total_hazard();
            check_ratio(&mut diag, mass / b_rec, t, "recovery")?;
            if rng.random::<f64>() * b_rec < mass {
                let w = 1.0 - rng.random::<f64>();
                let (id, _) = measure.h_biased_inverse(w)?;
                measure.remove(id);
                counts.i -= 1;
                counts.r += 1;
                counts.check(t)?;
                diag.events += 1;
                diag.recoveries += 1;
                if config.record_events {
                    rec.traj.events.push(Event { time: t, kind: EventKind::Recovery, id, seq: log_seq });
                }
                log_seq += 1;
            }
        }
    }
    let clock = measure.clock();
    let (s, i, r) = (counts.s, counts.i, counts.r);
    rec.emit_until(horizon + 0.5 * config.step, s, i, r, n_f, |x| {
        if constant_profile {
            level * measure.len() as f64
        } else {
            measure.apply(|a| profile.value(a + x - clock))
        }
    });
    let mut traj = rec.traj;
    traj.final_state = (counts.s, counts.i, counts.r);
    traj.diagnostics = diag;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use std::collections::HashMap;
    use crate::model::{AgeLaw, Coupling, DurationDistribution, InfectivityShape, Profile};
    use crate::rng::{stream, Purpose};

    fn config(n: usize, beta: f64, gamma: f64) -> SimulationConfig {
        let init = InitialCondition {
            susceptible: 0.9,
            infected: 0.1,
            recovered: 0.0,
            age_law: AgeLaw::Uniform { max_age: 2.0 },
            coupling: Coupling::Residual,
        };
        let law = InfectivityLaw::indicator(beta, DurationDistribution::exponential(gamma));
        let mut c = SimulationConfig::new(n, init, law, 20.0, 0.1);
        c.record_events = true;
        c
    }

    #[test]
    fn lone_infected_without_susceptibles_recovers() {
        let mut c = config(1, 0.4, 0.25);
        c.init.susceptible = 0.0;
        c.init.infected = 1.0 - 1e-12;
        c.init.recovered = 1e-12;
        c.init.age_law = AgeLaw::Atoms { atoms: vec![[1e-9, 1.0]] };
        c.horizon = 200.0;
        let tr = simulate(&c, 0).unwrap();
        assert_eq!(tr.diagnostics.infections, 0);
        assert_eq!(tr.final_state, (0, 0, 1));
    }

    #[test]
    fn zero_infectivity_never_infects() {
        let c = config(500, 0.0, 0.25);
        let tr = simulate(&c, 1).unwrap();
        assert_eq!(tr.diagnostics.infections, 0);
        assert!(tr.susceptible.iter().all(|&s| s == 450.0));
    }

    #[test]
    fn grid_samples_conserve_and_are_monotone() {
        for mode in [RecoveryMode::Scheduled, RecoveryMode::Hazard] {
            let mut c = config(2000, 0.6, 0.25);
            c.mode = mode;
            let tr = simulate(&c, 2).unwrap();
            assert_eq!(tr.times.len(), c.node_count());
            for k in 0..tr.times.len() {
                assert_eq!(tr.susceptible[k] + tr.infected[k] + tr.recovered[k], 2000.0);
                assert!(tr.force[k] <= 0.6 * tr.infected[k] + 1e-9);
                if k > 0 {
                    assert!(tr.susceptible[k] <= tr.susceptible[k - 1]);
                    assert!(tr.recovered[k] >= tr.recovered[k - 1]);
                }
            }
            assert!(tr.diagnostics.max_acceptance_ratio <= 1.0 + 1e-9);
            assert!(tr.events.windows(2).all(|w| w[0].time <= w[1].time && w[0].seq < w[1].seq));
        }
    }

    #[test]
    fn same_seed_same_log() {
        let c = config(1000, 0.5, 0.25);
        let a = simulate(&c, 7).unwrap();
        let b = simulate(&c, 7).unwrap();
        assert_eq!(a.events, b.events);
        assert_eq!(a, b);
        let other = simulate(&c, 8).unwrap();
        assert_ne!(a.events, other.events);
    }

    #[test]
    fn infected_count_rederived_from_log() {
        let c = config(1500, 0.5, 0.3);
        let tr = simulate(&c, 3).unwrap();
        let (_, i0, _) = c.initial_counts();
        let mut recovery_of = HashMap::new();
        let mut infection_of = HashMap::new();
        for e in &tr.events {
            match e.kind {
                EventKind::Infection => infection_of.insert(e.id, e.time),
                EventKind::Recovery => recovery_of.insert(e.id, e.time),
            };
        }
        for (k, &t) in tr.times.iter().enumerate() {
            // left limits: events at time t are not yet counted
            let initial = (0..i0).filter(|&j| tr.initial_remaining[j] >= t).count();
            let later = infection_of
                .iter()
                .filter(|(id, &tau)| tau < t && recovery_of.get(*id).is_none_or(|&r| r >= t))
                .count();
            assert_eq!((initial + later) as f64, tr.infected[k], "t = {t}");
            let by_log = i0 as f64
                + tr.events.iter().filter(|e| e.time < t && e.kind == EventKind::Infection).count() as f64
                - tr.events.iter().filter(|e| e.time < t && e.kind == EventKind::Recovery).count() as f64;
            assert_eq!(by_log, tr.infected[k]);
        }
    }

    #[test]
    fn hazard_mode_rejects_non_separable_laws() {
        let mut c = config(100, 0.5, 0.3);
        c.mode = RecoveryMode::Hazard;
        c.law = InfectivityLaw::new(
            InfectivityShape::RandomLevel { profile: Profile::Constant { level: 1.0 }, low: 0.1, high: 0.9 },
            DurationDistribution::exponential(0.3),
        );
        assert!(matches!(simulate(&c, 0), Err(Error::Config(_))));
    }

    #[test]
    fn exponential_hazard_accepts_every_recovery_proposal() {
        let mut c = config(800, 0.0, 0.5);
        c.mode = RecoveryMode::Hazard;
        let tr = simulate(&c, 4).unwrap();
        // no infections are possible, so every proposal is a recovery proposal
        assert_eq!(tr.diagnostics.proposals, tr.diagnostics.recoveries);
        assert!((tr.diagnostics.max_acceptance_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hazard_mode_recovery_time_matches_duration_law() {
        // single individual of (near) zero age, gamma durations: KS distance to F
        let d = DurationDistribution::gamma(3.0, 2.0);
        let mut c = config(1, 0.0, 1.0);
        c.law = InfectivityLaw::indicator(0.0, d.clone());
        c.init.susceptible = 0.0;
        c.init.infected = 1.0 - 1e-12;
        c.init.recovered = 1e-12;
        c.init.age_law = AgeLaw::Atoms { atoms: vec![[1e-12, 1.0]] };
        c.horizon = 50.0;
        c.step = 50.0;
        c.mode = RecoveryMode::Hazard;
        let m = 100_000;
        let mut times: Vec<f64> = (0..m)
            .map(|k| {
                let tr = simulate_with(&c, &mut stream(9, Purpose::Misc, k)).unwrap();
                tr.events[0].time
            })
            .collect();
        times.sort_by(f64::total_cmp);
        let ks = times
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let f = d.cdf(x);
                (f - k as f64 / m as f64).abs().max(((k + 1) as f64 / m as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value of the Kolmogorov-Smirnov statistic
        assert!(ks < 1.628 / (m as f64).sqrt(), "KS = {ks}");
    }

    #[test]
    fn latent_and_decaying_laws_run_with_valid_bounds() {
        let d = DurationDistribution::gamma(2.0, 0.5);
        for shape in [
            InfectivityShape::Latent { level: 0.8, low: 0.1, high: 0.4 },
            InfectivityShape::Separable { profile: Profile::Decay { peak: 1.0, rate: 0.2 } },
            InfectivityShape::RandomLevel { profile: Profile::Constant { level: 1.0 }, low: 0.2, high: 1.0 },
        ] {
            let mut c = config(1000, 0.5, 0.3);
            c.law = InfectivityLaw::new(shape, d.clone());
            let tr = simulate(&c, 5).unwrap();
            assert!(tr.diagnostics.max_acceptance_ratio <= 1.0 + 1e-9);
            let lstar = c.law.sup_bound();
            for k in 0..tr.times.len() {
                assert!(tr.force[k] <= lstar * tr.infected[k] + 1e-9);
                assert!(tr.force[k] >= -1e-9);
            }
        }
    }

    #[test]
    fn initial_counts_take_integer_parts() {
        let c = config(999, 0.5, 0.3);
        assert_eq!(c.initial_counts(), (899, 99, 1));
        let tr = simulate(&c, 0).unwrap();
        assert_eq!(tr.susceptible[0], 899.0);
    }

    #[test]
    fn fluctuations_scale_with_root_n() {
        let mut tr = Trajectory { population: 100, ..Default::default() };
        tr.times = vec![0.0, 1.0];
        tr.susceptible = vec![90.0, 80.0];
        tr.infected = vec![10.0, 15.0];
        tr.recovered = vec![0.0, 5.0];
        tr.force = vec![1.0, 2.0];
        tr.rate = vec![0.9, 1.6];
        let bar = scaled_paths(&tr);
        let zero = fluctuation_paths(&tr, &bar).unwrap();
        assert!(zero.infected.iter().all(|&x| x == 0.0));
        let mut shifted = bar.clone();
        shifted.infected = vec![0.09, 0.14];
        let a = fluctuation_paths(&tr, &shifted).unwrap();
        let mut tr4 = tr.clone();
        tr4.population = 400;
        for v in [&mut tr4.susceptible, &mut tr4.infected, &mut tr4.recovered, &mut tr4.force, &mut tr4.rate] {
            v.iter_mut().for_each(|x| *x *= 4.0);
        }
        let b = fluctuation_paths(&tr4, &shifted).unwrap();
        for k in 0..2 {
            assert!((b.infected[k] - 2.0 * a.infected[k]).abs() < 1e-12);
        }
        let mut short = bar.clone();
        short.times.pop();
        assert!(matches!(fluctuation_paths(&tr, &short), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn csv_exports_have_headers() {
        let c = config(200, 0.5, 0.3);
        let tr = simulate(&c, 0).unwrap();
        let mut buf = Vec::new();
        tr.write_events_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("time,kind,id\n"));
        let mut buf = Vec::new();
        tr.write_grid_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,S,I,R,F,Upsilon\n"));
    }
}
