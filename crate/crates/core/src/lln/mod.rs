//! Deterministic large-population limit.
//!
//! The Volterra system for `(S̄, 𝔉̄, Ῡ)` is stepped forward with the
//! trapezoid rule. `Ī`, `R̄` and the limit age measure `μ̄ₜ` then follow from
//! explicit formulas using the same trapezoid weights, so `S̄ + Ī + R̄ = 1`
//! holds to rounding.
//!
//! Initial individuals enter through the residual kernels
//! `λ̄(a+t)/Fᶜ(a)` and `Fᶜ(a+t)/Fᶜ(a)`: an individual of age `a` at time
//! zero is known to still be infected.

mod generic;

pub use generic::GenericPde;

use crate::abm::ScaledPaths;
use crate::error::{Error, Result};
use crate::model::{AgeQuadrature, DurationDistribution, InfectivityLaw, InitialCondition};
use crate::quad::trapezoid_weight;

/// Width of the Gauss-Legendre cells used for integrals against `μ̄₀`.
pub const AGE_CELL: f64 = 0.05;
/// Atoms used to represent the induced age law under `UniformFraction`.
pub const INDUCED_ATOMS: usize = 4096;

/// Uniform time grid `tₙ = nΔ` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub horizon: f64,
    pub step: f64,
    n: usize,
}

impl Grid {
    /// `T/Δ` must be an integer (to 1e-9 relative).
    pub fn new(horizon: f64, step: f64) -> Result<Self> {
        if !(horizon > 0.0 && step > 0.0 && step <= horizon && horizon.is_finite()) {
            return Err(Error::Config(format!("bad grid: T = {horizon}, Δt = {step}")));
        }
        let ratio = horizon / step;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Config(format!("T = {horizon} is not a multiple of Δt = {step}")));
        }
        Ok(Self { horizon, step, n: n as usize })
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.time(k)).collect()
    }

    /// Grid with step `Δ/factor`.
    pub fn refine(&self, factor: usize) -> Self {
        Self { horizon: self.horizon, step: self.step / factor as f64, n: self.n * factor }
    }

    /// Index of node `t`, if `t` is (numerically) a node.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.step;
        let k = x.round();
        ((x - k).abs() < 1e-6 && k >= 0.0 && k as usize <= self.n).then_some(k as usize)
    }
}

/// The limit on a grid, with what is needed to evaluate `μ̄ₜ(φ)` afterwards.
#[derive(Debug, Clone)]
pub struct LlnPaths {
    pub grid: Grid,
    pub susceptible: Vec<f64>,
    pub force: Vec<f64>,
    pub rate: Vec<f64>,
    pub infected: Vec<f64>,
    pub recovered: Vec<f64>,
    duration: DurationDistribution,
    /// `Ī(0)`, the mass of `μ̄₀`.
    initial_mass: f64,
    /// Quadrature for the normalized initial age law `μ̄̄₀`.
    ages: AgeQuadrature,
    /// `Fᶜ(kΔ)`.
    survival: Vec<f64>,
}

/// Solves the limit system on `grid`.
pub fn solve_lln(law: &InfectivityLaw, init: &InitialCondition, grid: &Grid) -> Result<LlnPaths> {
    law.validate()?;
    init.validate()?;
    init.check_conditioning(&law.duration)?;
    let age_law = init.effective_age_law(&law.duration, 0, INDUCED_ATOMS);
    let ages = age_law.quadrature(AGE_CELL);
    let d = &law.duration;
    let len = grid.len();
    let dt = grid.step;
    let i0 = init.infected;

    let mean: Vec<f64> = (0..len).map(|k| law.mean(grid.time(k))).collect();
    let survival: Vec<f64> = (0..len).map(|k| d.survival(grid.time(k))).collect();
    let scaled_weights: Vec<f64> = ages.weights.iter().map(|w| w * i0).collect();
    let base: Vec<f64> = ages.ages.iter().map(|&a| d.survival(a)).collect();

    let mut s = vec![0.0; len];
    let mut f = vec![0.0; len];
    let mut y = vec![0.0; len];
    s[0] = init.susceptible;
    f[0] = initial_force(law, &ages.ages, &scaled_weights, &base, 0.0);
    y[0] = s[0] * f[0];
    let half = 0.5 * dt;
    for n in 1..len {
        let t = grid.time(n);
        let mut c = initial_force(law, &ages.ages, &scaled_weights, &base, t);
        c += half * mean[n] * y[0];
        for k in 1..n {
            c += dt * mean[n - k] * y[k];
        }
        let a = s[n - 1] - half * y[n - 1];
        y[n] = node_root(a, half, c, half * mean[0], t)?;
        s[n] = a - half * y[n];
        f[n] = c + half * mean[0] * y[n];
    }

    let mut infected = vec![0.0; len];
    let mut recovered = vec![0.0; len];
    for n in 0..len {
        let t = grid.time(n);
        let still: f64 = ages.ages.iter().zip(&scaled_weights).map(|(&a, &w)| w * d.survival_ratio(t, a)).sum();
        let mut renewal = 0.0;
        let mut total = 0.0;
        for k in 0..=n {
            let w = trapezoid_weight(k, n, dt) * y[k];
            renewal += w * survival[n - k];
            total += w;
        }
        infected[n] = still + renewal;
        recovered[n] = init.recovered + (i0 - still) + (total - renewal);
    }
    Ok(LlnPaths {
        grid: *grid,
        susceptible: s,
        force: f,
        rate: y,
        infected,
        recovered,
        duration: d.clone(),
        initial_mass: i0,
        ages,
        survival,
    })
}

fn initial_force(law: &InfectivityLaw, ages: &[f64], weights: &[f64], base: &[f64], t: f64) -> f64 {
    ages.iter().zip(weights).zip(base).map(|((&a, &w), &fc)| w * law.mean(a + t) / fc).sum()
}

/// Stable positive root of `Y = (a − bY)(c + dY)`.
///
/// Expanded: `bd·Y² + (1 − ad + bc)·Y − ac = 0`. With `a, c ≥ 0` the root
/// `2ac / (B + √(B² + 4bd·ac))` avoids cancellation.
pub(crate) fn node_root(a: f64, b: f64, c: f64, d: f64, time: f64) -> Result<f64> {
    let lead = 1.0 - a * d + b * c;
    if !(lead > 0.0) {
        return Err(Error::DegenerateStep { time, coefficient: lead });
    }
    let ac = (a * c).max(0.0);
    Ok(2.0 * ac / (lead + (lead * lead + 4.0 * b * d * ac).sqrt()))
}

impl LlnPaths {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn duration(&self) -> &DurationDistribution {
        &self.duration
    }

    pub fn initial_mass(&self) -> f64 {
        self.initial_mass
    }

    /// Quadrature for the normalized initial age law.
    pub fn initial_ages(&self) -> &AgeQuadrature {
        &self.ages
    }

    /// `Fᶜ(kΔ)` on the grid.
    pub fn survival_table(&self) -> &[f64] {
        &self.survival
    }

    /// `μ̄ₜ(φ)` at node `k`.
    pub fn measure_apply(&self, k: usize, mut phi: impl FnMut(f64) -> f64) -> f64 {
        let t = self.grid.time(k);
        let d = &self.duration;
        let initial: f64 = self
            .ages
            .ages
            .iter()
            .zip(&self.ages.weights)
            .map(|(&a, &w)| w * phi(a + t) * d.survival_ratio(t, a))
            .sum();
        let mut renewal = 0.0;
        for j in 0..=k {
            let age = t - self.grid.time(j);
            renewal += trapezoid_weight(j, k, self.grid.step) * phi(age) * self.survival[k - j] * self.rate[j];
        }
        self.initial_mass * initial + renewal
    }

    /// `|d/dt μ̄ₜ(φ) − φ(0)Ῡ(t) − μ̄ₜ(φ′ − hφ)|` at interior node `k`, with a
    /// centered difference in time.
    pub fn weak_form_residual(&self, k: usize, phi: impl Fn(f64) -> f64, dphi: impl Fn(f64) -> f64) -> Result<f64> {
        if k == 0 || k + 1 >= self.len() {
            return Err(Error::BoundaryNode { index: k, len: self.len() });
        }
        let dt = self.grid.step;
        let derivative = (self.measure_apply(k + 1, &phi) - self.measure_apply(k - 1, &phi)) / (2.0 * dt);
        let d = &self.duration;
        let generator = self.measure_apply(k, |a| dphi(a) - d.hazard(a) * phi(a));
        Ok((derivative - phi(0.0) * self.rate[k] - generator).abs())
    }

    /// Every `factor`-th node, as scaled paths comparable with simulations.
    pub fn subsample(&self, factor: usize) -> Result<ScaledPaths> {
        if factor == 0 || (self.len() - 1) % factor != 0 {
            return Err(Error::GridMismatch(format!("cannot take every {factor}-th of {} nodes", self.len())));
        }
        let pick = |v: &[f64]| v.iter().step_by(factor).copied().collect();
        Ok(ScaledPaths {
            times: self.times().into_iter().step_by(factor).collect(),
            susceptible: pick(&self.susceptible),
            infected: pick(&self.infected),
            recovered: pick(&self.recovered),
            force: pick(&self.force),
            rate: pick(&self.rate),
        })
    }

    /// Subsamples onto a coarser grid of step `step`.
    pub fn on_grid(&self, step: f64) -> Result<ScaledPaths> {
        let ratio = step / self.grid.step;
        let factor = ratio.round();
        if (ratio - factor).abs() > 1e-6 || factor < 1.0 {
            return Err(Error::GridMismatch(format!("step {step} is not a multiple of {}", self.grid.step)));
        }
        self.subsample(factor as usize)
    }

    /// CSV with columns `t,Sbar,Fbar,Upsbar,Ibar,Rbar`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "Sbar", "Fbar", "Upsbar", "Ibar", "Rbar"])?;
        for k in 0..self.len() {
            w.write_record([
                format!("{}", self.grid.time(k)),
                format!("{:.15e}", self.susceptible[k]),
                format!("{:.15e}", self.force[k]),
                format!("{:.15e}", self.rate[k]),
                format!("{:.15e}", self.infected[k]),
                format!("{:.15e}", self.recovered[k]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Classical SIR ODE on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct OdePaths {
    pub times: Vec<f64>,
    pub susceptible: Vec<f64>,
    pub infected: Vec<f64>,
    pub recovered: Vec<f64>,
}

/// `S′ = −βSI`, `I′ = βSI − γI`, `R′ = γI` by RK4 at `Δ/10` (finer when
/// the rates are stiff), sampled on the grid.
pub fn markovian_ode_oracle(beta: f64, gamma: f64, s0: f64, i0: f64, r0: f64, grid: &Grid) -> OdePaths {
    let stiff = (grid.step * (beta + gamma)).ceil() as usize;
    let substeps = stiff.max(10);
    let h = grid.step / substeps as f64;
    let rhs = |x: [f64; 3]| {
        let inf = beta * x[0] * x[1];
        [-inf, inf - gamma * x[1], gamma * x[1]]
    };
    let axpy = |x: [f64; 3], k: [f64; 3], c: f64| [x[0] + c * k[0], x[1] + c * k[1], x[2] + c * k[2]];
    let mut x = [s0, i0, r0];
    let mut out = OdePaths {
        times: grid.times(),
        susceptible: vec![s0],
        infected: vec![i0],
        recovered: vec![r0],
    };
    for _ in 1..grid.len() {
        for _ in 0..substeps {
            let k1 = rhs(x);
            let k2 = rhs(axpy(x, k1, h / 2.0));
            let k3 = rhs(axpy(x, k2, h / 2.0));
            let k4 = rhs(axpy(x, k3, h));
            for c in 0..3 {
                x[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        out.susceptible.push(x[0]);
        out.infected.push(x[1]);
        out.recovered.push(x[2]);
    }
    out
}

/// Smooth bump `(1 − ((a − c)/w)²)³` on `|a − c| < w`, with its derivative.
pub fn bump(center: f64, width: f64) -> (impl Fn(f64) -> f64 + Copy, impl Fn(f64) -> f64 + Copy) {
    let phi = move |a: f64| {
        let x = (a - center) / width;
        if x.abs() < 1.0 {
            (1.0 - x * x).powi(3)
        } else {
            0.0
        }
    };
    let dphi = move |a: f64| {
        let x = (a - center) / width;
        if x.abs() < 1.0 {
            -6.0 * x * (1.0 - x * x).powi(2) / width
        } else {
            0.0
        }
    };
    (phi, dphi)
}
