//! Per-path linear Volterra solve and the explicit SPDE solution.

use super::{lower, CltSetup, GaussianDriverSet};
use crate::error::{Error, Result};
use crate::quad::trapezoid_weight;

/// Fluctuation paths on the coarse grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CltPath {
    pub susceptible: Vec<f64>,
    pub force: Vec<f64>,
    pub rate: Vec<f64>,
    /// `Î` from the initial/new-individual decomposition.
    pub infected: Vec<f64>,
    pub recovered: Vec<f64>,
}

/// Forward solve of `Ŝ = −Ŝ₁ − ∫Ῡ̂`, `𝔉̂ = ∫λ̄(t−s)Ῡ̂ds + drivers`,
/// `Ῡ̂ = Ŝ𝔉̄ + S̄𝔉̂`. The trapezoid endpoint makes each node a scalar linear
/// equation in `Ῡ̂(tₙ)`.
pub fn solve_clt_path(setup: &CltSetup, drivers: &GaussianDriverSet) -> Result<CltPath> {
    let len = setup.len();
    let dt = setup.grid.step;
    let half = 0.5 * dt;
    let lam = &setup.mean_coarse;
    let (s_bar, f_bar) = (&setup.s_bar, &setup.f_bar);
    let d = drivers;
    let source = |n: usize| d.f01[n] + d.f02[n] + d.f1[n] + d.f2[n];

    let mut s = vec![0.0; len];
    let mut f = vec![0.0; len];
    let mut y = vec![0.0; len];
    s[0] = -d.s1[0];
    f[0] = source(0);
    y[0] = s[0] * f_bar[0] + s_bar[0] * f[0];
    let mut integral = 0.0;
    for n in 1..len {
        integral += if n == 1 { half } else { dt } * y[n - 1];
        let a = -d.s1[n] - integral;
        let mut c = source(n) + half * lam[n] * y[0];
        for k in 1..n {
            c += dt * lam[n - k] * y[k];
        }
        let coefficient = 1.0 + half * f_bar[n] - s_bar[n] * half * lam[0];
        if !(coefficient > 0.0) {
            return Err(Error::DegenerateStep { time: setup.grid.time(n), coefficient });
        }
        let x = (a * f_bar[n] + s_bar[n] * c) / coefficient;
        y[n] = x;
        s[n] = a - half * x;
        f[n] = c + half * lam[0] * x;
    }

    let total = d.bridge_total();
    let mut infected = vec![0.0; len];
    let mut recovered = vec![0.0; len];
    for n in 0..len {
        let transported = setup.bridge_sum(&setup.r_bar, n, &d.bridge);
        let (mut alive, mut all) = (0.0, 0.0);
        for k in 0..=n {
            let w = trapezoid_weight(k, n, dt) * y[k];
            alive += w * setup.surv_coarse[n - k];
            all += w;
        }
        infected[n] = transported + alive + d.i0[n] + d.i_inf[n] + d.i2[n];
        // R̂₀ = −Î₀ and R̂₁ = R̂_inf − Î₂, with R̂_inf = Ŝ₁ − Î_inf
        recovered[n] = (total - transported) + (all - alive) - d.i0[n] + (d.s1[n] - d.i_inf[n]) - d.i2[n];
    }
    Ok(CltPath { susceptible: s, force: f, rate: y, infected, recovered })
}

/// Path-independent weights of `μ̂ₜ(φ)` at every node.
#[derive(Debug, Clone)]
pub struct SpdeKernel {
    /// `φ(kΔ)Fᶜ(kΔ)` by lag.
    lag: Vec<f64>,
    /// Cell averages of `φ(a + tₙ) Fᶜ(a + tₙ)/Fᶜ(a)`, row-major by age cell.
    initial: Vec<f64>,
    /// `∫_cell φ(tₙ − s)Fᶜ(tₙ − s)Ῡ ds / ∫_cell Ῡ`.
    infection: Vec<f64>,
    recovery: Option<Vec<f64>>,
}

impl SpdeKernel {
    pub fn new(setup: &CltSetup, phi: impl Fn(f64) -> f64 + Copy) -> Result<Self> {
        let len = setup.len();
        let m = len - 1;
        let r = setup.refine;
        let grid = &setup.grid;
        let fine = &setup.lln.grid;
        let d = &setup.law.duration;
        let lag = (0..len).map(|k| phi(grid.time(k)) * setup.surv_coarse[k]).collect();
        let mut initial = vec![0.0; setup.age_cells.len() * len];
        for (c, cell) in setup.age_cells.iter().enumerate() {
            for n in 0..len {
                let t = grid.time(n);
                let sum: f64 = cell
                    .quad
                    .ages
                    .iter()
                    .zip(&cell.quad.weights)
                    .map(|(&a, &w)| w * phi(a + t) * d.survival_ratio(t, a))
                    .sum();
                initial[c * len + n] = sum / cell.mass;
            }
        }
        let y = &setup.lln.rate;
        let mut infection = vec![0.0; len * m / 2];
        for n in 1..len {
            for k in 0..n {
                if setup.cell_mass[k] > 0.0 {
                    let sum: f64 = (0..=r)
                        .map(|i| {
                            let j = r * k + i;
                            let lag = r * n - j;
                            trapezoid_weight(i, r, fine.step) * phi(fine.time(lag)) * setup.surv_fine[lag] * y[j]
                        })
                        .sum();
                    infection[lower(n, k)] = sum / setup.cell_mass[k];
                }
            }
        }
        let recovery = if setup.rec.is_some() { Some(setup.rec_rows(phi)?) } else { None };
        Ok(Self { lag, initial, infection, recovery })
    }

    /// `μ̂ₜₙ(φ)` on one path. The `μ̂₀` integral is taken by summation by parts
    /// against the cumulative bridge.
    pub fn apply(&self, setup: &CltSetup, drivers: &GaussianDriverSet, path: &CltPath, n: usize) -> Result<f64> {
        let (rows, noise) = match (&self.recovery, &drivers.w_rec) {
            (Some(rows), Some(noise)) => (rows, noise),
            _ => return Err(Error::Config("the explicit solution needs sampled recovery noise".into())),
        };
        let len = setup.len();
        let cells = drivers.bridge.len();
        let g = |c: usize| self.initial[c * len + n];
        let mut cumulative = 0.0;
        let mut initial = 0.0;
        for c in 0..cells - 1 {
            cumulative += drivers.bridge[c];
            initial -= cumulative * (g(c + 1) - g(c));
        }
        cumulative += drivers.bridge[cells - 1];
        initial += g(cells - 1) * cumulative;

        let dt = setup.grid.step;
        let transport: f64 = (0..=n).map(|k| trapezoid_weight(k, n, dt) * self.lag[n - k] * path.rate[k]).sum();
        let infection: f64 = (0..n).map(|k| self.infection[lower(n, k)] * drivers.w_inf[k]).sum();
        let offset = setup.rec_row_offset(n);
        let count = setup.rec.as_ref().expect("rows exist").prefix[n];
        let recovery: f64 = rows[offset..offset + count].iter().zip(noise).map(|(g, w)| g * w).sum();
        Ok(initial + transport + infection + recovery)
    }
}

/// `μ̂ₜₙ(φ)` from the explicit solution of the fluctuation SPDE.
pub fn spde_solution_apply(
    setup: &CltSetup,
    drivers: &GaussianDriverSet,
    path: &CltPath,
    phi: impl Fn(f64) -> f64 + Copy,
    n: usize,
) -> Result<f64> {
    SpdeKernel::new(setup, phi)?.apply(setup, drivers, path, n)
}

/// `(Î, R̂)`: `Î` through the infection and recovery white noises, `R̂`
/// through the initial/new-individual decomposition with `R̂(0) = 0`.
pub fn clt_hat_ir(setup: &CltSetup, drivers: &GaussianDriverSet, path: &CltPath) -> Result<(Vec<f64>, Vec<f64>)> {
    let (rows, noise) = match (&setup.rec_unit, &drivers.w_rec) {
        (Some(rows), Some(noise)) => (rows, noise),
        _ => return Err(Error::Config("Î through W_rec needs sampled recovery noise".into())),
    };
    let len = setup.len();
    let dt = setup.grid.step;
    let prefix = &setup.rec.as_ref().expect("rows exist").prefix;
    let mut offset = 0;
    let mut infected = vec![0.0; len];
    for n in 0..len {
        let transported = setup.bridge_sum(&setup.r_bar, n, &drivers.bridge);
        let alive: f64 =
            (0..=n).map(|k| trapezoid_weight(k, n, dt) * setup.surv_coarse[n - k] * path.rate[k]).sum();
        let recovery: f64 = rows[offset..offset + prefix[n]].iter().zip(noise).map(|(g, w)| g * w).sum();
        offset += prefix[n];
        infected[n] = transported + alive + drivers.i_inf[n] + recovery;
    }
    Ok((infected, path.recovered.clone()))
}
