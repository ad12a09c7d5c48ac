//! Property tests of the simulator and the limit over random parameters.

use proptest::prelude::*;

use agesir::abm::{simulate, EventKind, RecoveryMode, SimulationConfig};
use agesir::harness::acceptance::replay_conserves;
use agesir::lln::{solve_lln, Grid};
use agesir::model::{AgeLaw, Coupling, DurationDistribution, InfectivityLaw, InitialCondition};

fn init(i0: f64) -> InitialCondition {
    InitialCondition {
        susceptible: 1.0 - i0,
        infected: i0,
        recovered: 0.0,
        age_law: AgeLaw::Uniform { max_age: 1.5 },
        coupling: Coupling::default(),
    }
}

fn duration(gamma_shape: Option<f64>, rate: f64) -> DurationDistribution {
    match gamma_shape {
        Some(shape) => DurationDistribution::gamma(shape, rate * shape),
        None => DurationDistribution::exponential(rate),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulated_paths_respect_conservation_monotonicity_and_bounds(
        seed in any::<u64>(),
        n in 20usize..400,
        beta in 0.0f64..2.0,
        rate in 0.2f64..2.0,
        shape in proptest::option::of(1.0f64..4.0),
        i0 in 0.02f64..0.5,
        hazard in any::<bool>(),
    ) {
        let law = InfectivityLaw::indicator(beta, duration(shape, rate));
        let mut config = SimulationConfig::new(n, init(i0), law, 8.0, 0.25);
        config.seed = seed;
        config.record_events = true;
        config.mode = if hazard { RecoveryMode::Hazard } else { RecoveryMode::Scheduled };
        let run = simulate(&config, 0).unwrap();

        let nf = n as f64;
        for k in 0..run.times.len() {
            prop_assert_eq!(run.susceptible[k] + run.infected[k] + run.recovered[k], nf);
            prop_assert!(run.force[k] <= beta * run.infected[k] + 1e-9);
            prop_assert!(run.rate[k] <= run.susceptible[k] / nf * beta * run.infected[k] + 1e-9);
            if k > 0 {
                prop_assert!(run.susceptible[k] <= run.susceptible[k - 1]);
                prop_assert!(run.recovered[k] >= run.recovered[k - 1]);
            }
        }
        prop_assert!(run.diagnostics.max_acceptance_ratio <= 1.0);
        prop_assert!(replay_conserves(&run, config.initial_counts()));
        prop_assert!(run.events.windows(2).all(|w| w[0].time <= w[1].time));
        let infections = run.events.iter().filter(|e| e.kind == EventKind::Infection).count() as u64;
        prop_assert_eq!(infections, run.diagnostics.infections);

        let again = simulate(&config, 0).unwrap();
        prop_assert_eq!(&run.events, &again.events);
        prop_assert_eq!(&run.infected, &again.infected);
    }

    #[test]
    fn hazard_times_survival_is_the_density(
        rate in 0.05f64..3.0,
        shape in proptest::option::of(1.0f64..6.0),
        t in 0.0f64..20.0,
    ) {
        let d = duration(shape, rate);
        let lhs = d.hazard(t) * d.survival(t);
        prop_assert!((lhs - d.density(t)).abs() <= 1e-10, "{} vs {}", lhs, d.density(t));
    }

    #[test]
    fn limit_conserves_mass(
        beta in 0.0f64..2.0,
        rate in 0.1f64..2.0,
        shape in proptest::option::of(1.0f64..4.0),
        i0 in 0.01f64..0.5,
    ) {
        let law = InfectivityLaw::indicator(beta, duration(shape, rate));
        let lln = solve_lln(&law, &init(i0), &Grid::new(10.0, 0.02).unwrap()).unwrap();
        for k in 0..lln.susceptible.len() {
            let total = lln.susceptible[k] + lln.infected[k] + lln.recovered[k];
            prop_assert!((total - 1.0).abs() <= 1e-12, "node {}: {}", k, total);
            prop_assert!(lln.susceptible[k] >= 0.0 && lln.infected[k] >= -1e-12);
            if k > 0 {
                prop_assert!(lln.susceptible[k] <= lln.susceptible[k - 1] + 1e-15);
            }
        }
    }
}
