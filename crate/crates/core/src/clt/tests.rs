use super::stats::{covariance, covariance_se, looks_gaussian, mean, variance};
use super::*;
use crate::model::{AgeLaw, Coupling, DurationDistribution, InfectivityShape, Profile};
use crate::rng::{stream, Purpose};

fn init() -> InitialCondition {
    InitialCondition {
        susceptible: 0.9,
        infected: 0.1,
        recovered: 0.0,
        age_law: AgeLaw::Uniform { max_age: 1.0 },
        coupling: Coupling::Residual,
    }
}

fn random_law(level: f64) -> InfectivityLaw {
    InfectivityLaw::new(
        InfectivityShape::RandomLevel { profile: Profile::Constant { level }, low: 0.5, high: 1.5 },
        DurationDistribution::gamma(2.0, 1.0),
    )
}

fn setup(law: &InfectivityLaw, rec: bool) -> CltSetup {
    let mut options = CltOptions::new(4.0, 0.2);
    options.recovery_noise = rec;
    CltSetup::new(law, &init(), options).unwrap()
}

fn within(mc: f64, exact: f64, se: f64) -> bool {
    (mc - exact).abs() <= 3.0 * se + 1e-12
}

#[test]
fn drivers_start_at_zero_and_bridge_has_no_mass() {
    let s = setup(&random_law(1.2), false);
    let mut rng = stream(3, Purpose::CltPath, 0);
    for _ in 0..20 {
        let d = s.sample_drivers(&mut rng, false).unwrap();
        assert_eq!(d.s1[0], 0.0);
        assert_eq!(d.f1[0], 0.0);
        assert_eq!(d.i_inf[0], 0.0);
        assert!(d.bridge_total().abs() < 1e-13);
        assert!(d.w_rec.is_none());
    }
}

#[test]
fn odd_refinement_is_rejected() {
    let mut options = CltOptions::new(4.0, 0.2);
    options.refine = 3;
    assert!(CltSetup::new(&random_law(1.0), &init(), options).is_err());
}

#[test]
fn infection_noise_covariances_match() {
    let s = setup(&random_law(1.2), false);
    let mut rng = stream(4, Purpose::CltPath, 0);
    let draws: Vec<GaussianDriverSet> = (0..4000).map(|_| s.sample_drivers(&mut rng, false).unwrap()).collect();
    let col = |f: &dyn Fn(&GaussianDriverSet) -> f64| draws.iter().map(f).collect::<Vec<f64>>();
    for (n, n2) in [(5, 5), (5, 15), (15, 10), (20, 20)] {
        let a = col(&|d| d.s1[n]);
        let b = col(&|d| d.s1[n2]);
        assert!(within(covariance(&a, &b), s.cov_s1(n, n2), covariance_se(&a, &b)));
        let f = col(&|d| d.f1[n2]);
        assert!(within(covariance(&a, &f), s.cov_s1_f1(n, n2), covariance_se(&a, &f)));
        let g = col(&|d| d.f01[n]);
        let h = col(&|d| d.f01[n2]);
        assert!(within(covariance(&g, &h), s.cov_f01(n, n2), covariance_se(&g, &h)));
    }
    for n in [5, 20] {
        let f = col(&|d| d.f1[n]);
        assert!(within(variance(&f), s.var_f1(n), covariance_se(&f, &f)));
        let i = col(&|d| d.i_inf[n]);
        assert!(within(variance(&i), s.var_i_inf(n), covariance_se(&i, &i)));
        let r = col(&|d| d.s1[n] - d.i_inf[n] - d.i2[n]);
        assert!(within(variance(&r), s.var_r1(n), covariance_se(&r, &r)));
    }
}

#[test]
fn joint_blocks_reproduce_their_covariances() {
    let s = setup(&random_law(1.2), false);
    let mut rng = stream(5, Purpose::CltPath, 0);
    let draws: Vec<GaussianDriverSet> = (0..4000).map(|_| s.sample_drivers(&mut rng, false).unwrap()).collect();
    let len = s.len();
    let m = len - 1;
    let col = |f: &dyn Fn(&GaussianDriverSet) -> f64| draws.iter().map(f).collect::<Vec<f64>>();
    let (init, new) = (s.initial_block(), s.new_block());
    for (n, n2) in [(3, 3), (3, 12), (12, 7)] {
        let f = col(&|d| d.f02[n]);
        let i = col(&|d| d.i0[n2]);
        assert!(within(covariance(&f, &i), init[n * 2 * len + len + n2], covariance_se(&f, &i)));
        let f = col(&|d| d.f2[n]);
        let i = col(&|d| d.i2[n2]);
        assert!(within(covariance(&f, &i), new[(n - 1) * 2 * m + m + n2 - 1], covariance_se(&f, &i)));
    }
}

#[test]
fn no_transmission_means_no_force_noise() {
    let s = setup(&random_law(0.0), false);
    let mut rng = stream(6, Purpose::CltPath, 0);
    let d = s.sample_drivers(&mut rng, false).unwrap();
    for v in [&d.f01, &d.f02, &d.f1, &d.f2, &d.s1] {
        assert!(v.iter().all(|x| *x == 0.0), "{v:?}");
    }
    let path = solve_clt_path(&s, &d).unwrap();
    assert!(path.susceptible.iter().all(|x| *x == 0.0));
    // the infected still fluctuate through their recoveries
    assert!(path.infected.iter().any(|x| *x != 0.0));
}

#[test]
fn zero_drivers_give_zero_paths() {
    let s = setup(&random_law(1.2), true);
    let d = s.zero_drivers();
    let p = solve_clt_path(&s, &d).unwrap();
    for v in [&p.susceptible, &p.force, &p.rate, &p.infected, &p.recovered] {
        assert!(v.iter().all(|x| *x == 0.0));
    }
    let (i, _) = clt_hat_ir(&s, &d, &p).unwrap();
    assert!(i.iter().all(|x| *x == 0.0));
}

#[test]
fn solution_is_linear_in_the_drivers() {
    let s = setup(&random_law(1.2), false);
    let mut rng = stream(7, Purpose::CltPath, 0);
    let d = s.sample_drivers(&mut rng, false).unwrap();
    let p = solve_clt_path(&s, &d).unwrap();
    let q = solve_clt_path(&s, &d.scaled(-2.5)).unwrap();
    for (a, b) in p.susceptible.iter().zip(&q.susceptible).chain(p.infected.iter().zip(&q.infected)) {
        assert!((b + 2.5 * a).abs() <= 1e-12 * (1.0 + a.abs()));
    }
    assert_eq!(p.susceptible[0], 0.0);
    assert_eq!(p.recovered[0], 0.0);
}

#[test]
fn compartments_conserve_total_mass() {
    let s = setup(&random_law(1.2), false);
    let mut rng = stream(8, Purpose::CltPath, 0);
    for _ in 0..50 {
        let d = s.sample_drivers(&mut rng, false).unwrap();
        let p = solve_clt_path(&s, &d).unwrap();
        for n in 0..s.len() {
            let total = p.susceptible[n] + p.infected[n] + p.recovered[n];
            assert!(total.abs() < 1e-12, "n = {n}: {total}");
        }
    }
}

#[test]
fn explicit_solution_matches_the_infected_path() {
    let s = setup(&random_law(1.2), true);
    assert!(s.has_recovery_noise() && s.rec_cells() > 0);
    let kernel = SpdeKernel::new(&s, |_| 1.0).unwrap();
    let mut rng = stream(9, Purpose::CltPath, 0);
    for _ in 0..20 {
        let d = s.sample_drivers(&mut rng, true).unwrap();
        let p = solve_clt_path(&s, &d).unwrap();
        let (i, _) = clt_hat_ir(&s, &d, &p).unwrap();
        let scale = i.iter().fold(1e-3f64, |m, x| m.max(x.abs()));
        for n in 0..s.len() {
            let mu = kernel.apply(&s, &d, &p, n).unwrap();
            assert!((mu - i[n]).abs() <= 1e-8 * scale, "n = {n}: {mu} vs {}", i[n]);
        }
    }
}

#[test]
fn explicit_solution_needs_recovery_noise() {
    let s = setup(&random_law(1.2), false);
    let d = s.zero_drivers();
    let p = solve_clt_path(&s, &d).unwrap();
    assert!(spde_solution_apply(&s, &d, &p, |_| 1.0, 3).is_err());
    assert!(clt_hat_ir(&s, &d, &p).is_err());
}

#[test]
fn without_transmission_both_infected_routes_agree_in_law() {
    // W_rec is drawn independently of the infectivity drivers, so the routes
    // only share a law when the force of infection does not feed back
    let s = setup(&random_law(0.0), true);
    let mut rng = stream(10, Purpose::CltPath, 0);
    let mut coupled = vec![Vec::new(); s.len()];
    let mut noise = vec![Vec::new(); s.len()];
    for _ in 0..4000 {
        let d = s.sample_drivers(&mut rng, true).unwrap();
        let p = solve_clt_path(&s, &d).unwrap();
        let (i, _) = clt_hat_ir(&s, &d, &p).unwrap();
        for n in 0..s.len() {
            coupled[n].push(p.infected[n]);
            noise[n].push(i[n]);
        }
    }
    for n in [5, 10, 20] {
        let (a, b) = (&coupled[n], &noise[n]);
        let se = (covariance_se(a, a).powi(2) + covariance_se(b, b).powi(2)).sqrt();
        assert!(within(variance(a), variance(b), se), "n = {n}: {} vs {}", variance(a), variance(b));
    }
}

#[test]
fn fluctuations_are_centered_gaussian() {
    let s = setup(&random_law(1.2), false);
    let mut rng = stream(11, Purpose::CltPath, 0);
    let mut x = Vec::new();
    for _ in 0..3000 {
        let d = s.sample_drivers(&mut rng, false).unwrap();
        x.push(solve_clt_path(&s, &d).unwrap().susceptible[10]);
    }
    let se = (variance(&x) / x.len() as f64).sqrt();
    assert!(mean(&x).abs() < 3.0 * se);
    assert!(looks_gaussian(&x));
}
