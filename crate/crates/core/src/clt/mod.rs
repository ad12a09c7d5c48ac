//! Gaussian fluctuation limit.
//!
//! Everything lives on a coarse grid of step `Δ`; the limit is solved at
//! `Δ/refine` and integrals over a coarse cell use the fine nodes.
//!
//! Noise sources:
//! * `W_inf` as one Gaussian increment per cell, variance `∫_cell Ῡ`.
//!   `Ŝ₁`, `𝔉̂₁`, `Î_inf` are weighted partial sums of the same increments.
//!   The weights are `∫_cell K(t−s)Ῡ ds / ∫_cell Ῡ`, so all their covariances
//!   with `Ŝ₁` are exact.
//! * `μ̂₀` as a multinomial bridge over the initial age cells.
//! * `[𝔉̂₀,₂; Î₀]` (randomness of the initially infected given their ages)
//!   and `[𝔉̂₂; Î₂]` (randomness of the newly infected), each drawn jointly
//!   from a dense Cholesky factor. An individual's infectivity and its
//!   recovery are not independent, hence the joint draws.
//! * Optionally `W_rec` on time × age cells with variance `h·μ̄ₛ(cell)·Δ`.

mod linalg;
mod solve;
pub mod stats;
mod variance;

use rand::Rng;
use rand_distr::StandardNormal;

pub use linalg::Factor;
pub use solve::{clt_hat_ir, solve_clt_path, spde_solution_apply, CltPath, SpdeKernel};
pub use variance::{variance_identity_check, variance_terms, VarianceIdentity, VarianceTerms};

use crate::error::{Error, Result};
use crate::lln::{solve_lln, Grid, LlnPaths, AGE_CELL, INDUCED_ATOMS};
use crate::model::{AgeCell, InfectivityLaw, InitialCondition};
use crate::quad::trapezoid_weight;

/// Coarse grid and fine refinement for the fluctuation engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltOptions {
    pub horizon: f64,
    pub step: f64,
    /// Fine steps per coarse step; must be even.
    pub refine: usize,
    /// Also prepare the recovery white noise `W_rec`.
    pub recovery_noise: bool,
}

impl CltOptions {
    pub fn new(horizon: f64, step: f64) -> Self {
        Self { horizon, step, refine: 10, recovery_noise: false }
    }
}

/// Index into a strictly lower triangular `(M+1) × M` array, `k < n`.
fn lower(n: usize, k: usize) -> usize {
    debug_assert!(k < n);
    n * (n - 1) / 2 + k
}

/// Recovery white noise cells.
#[derive(Debug, Clone)]
struct RecField {
    /// Time cell of each noise cell; cells are sorted by it.
    time_cell: Vec<usize>,
    sd: Vec<f64>,
    start: Vec<usize>,
    /// Ages and normalized weights of the quadrature nodes in each cell.
    age: Vec<f64>,
    weight: Vec<f64>,
    /// Time at which cell `k`'s noise is evaluated (its midpoint).
    midpoint: Vec<f64>,
    /// `prefix[n]`: number of cells with time cell `< n`.
    prefix: Vec<usize>,
}

/// Everything path-independent: the limit, kernels and covariance factors.
#[derive(Debug, Clone)]
pub struct CltSetup {
    pub grid: Grid,
    pub lln: LlnPaths,
    pub refine: usize,
    law: InfectivityLaw,
    pub s_bar: Vec<f64>,
    pub f_bar: Vec<f64>,
    pub y_bar: Vec<f64>,
    mean_coarse: Vec<f64>,
    surv_coarse: Vec<f64>,
    mean_fine: Vec<f64>,
    surv_fine: Vec<f64>,
    /// `∫_cell Ῡ` per coarse cell.
    cell_mass: Vec<f64>,
    k_mean: Vec<f64>,
    k_surv: Vec<f64>,
    initial_mass: f64,
    age_cells: Vec<AgeCell>,
    sqrt_p: Vec<f64>,
    /// Cell averages `r̄ₘ(n)` and `m̄ₘ(n)`, row-major by cell.
    r_bar: Vec<f64>,
    m_bar: Vec<f64>,
    init_cov: Vec<f64>,
    new_cov: Vec<f64>,
    init_factor: Factor,
    new_factor: Factor,
    rec: Option<RecField>,
    /// `Î_rec` kernel rows for `φ = 1`.
    rec_unit: Option<Vec<f64>>,
}

impl CltSetup {
    pub fn new(law: &InfectivityLaw, init: &InitialCondition, options: CltOptions) -> Result<Self> {
        let grid = Grid::new(options.horizon, options.step)?;
        if options.refine == 0 || options.refine % 2 != 0 {
            return Err(Error::Config(format!("refinement must be a positive even number, got {}", options.refine)));
        }
        let r = options.refine;
        let fine = grid.refine(r);
        let lln = solve_lln(law, init, &fine)?;
        let m = grid.len() - 1;
        let pick = |v: &[f64]| v.iter().step_by(r).copied().collect::<Vec<f64>>();
        let (s_bar, f_bar, y_bar) = (pick(&lln.susceptible), pick(&lln.force), pick(&lln.rate));
        let d = &law.duration;
        let mean_fine: Vec<f64> = (0..fine.len()).map(|i| law.mean(fine.time(i))).collect();
        let surv_fine = lln.survival_table().to_vec();
        let mean_coarse = pick(&mean_fine);
        let surv_coarse = pick(&surv_fine);

        let delta = fine.step;
        let y = &lln.rate;
        let cell_integral = |k: usize, lag_of: &dyn Fn(usize) -> f64| -> f64 {
            (0..=r).map(|i| trapezoid_weight(i, r, delta) * lag_of(r * k + i) * y[r * k + i]).sum()
        };
        let cell_mass: Vec<f64> = (0..m).map(|k| cell_integral(k, &|_| 1.0)).collect();
        let mut k_mean = vec![0.0; (m + 1) * m / 2];
        let mut k_surv = vec![0.0; (m + 1) * m / 2];
        for n in 1..=m {
            for k in 0..n {
                if cell_mass[k] > 0.0 {
                    let lag = |j: usize| r * n - j;
                    k_mean[lower(n, k)] = cell_integral(k, &|j| mean_fine[lag(j)]) / cell_mass[k];
                    k_surv[lower(n, k)] = cell_integral(k, &|j| surv_fine[lag(j)]) / cell_mass[k];
                }
            }
        }

        let i0 = init.infected;
        let age_cells = init.effective_age_law(d, 0, INDUCED_ATOMS).cells(AGE_CELL);
        let sqrt_p: Vec<f64> = age_cells.iter().map(|c| c.mass.sqrt()).collect();
        let mut r_bar = vec![0.0; age_cells.len() * (m + 1)];
        let mut m_bar = vec![0.0; age_cells.len() * (m + 1)];
        for (c, cell) in age_cells.iter().enumerate() {
            for n in 0..=m {
                let t = grid.time(n);
                let (mut rs, mut ms) = (0.0, 0.0);
                for (&a, &w) in cell.quad.ages.iter().zip(&cell.quad.weights) {
                    rs += w * d.survival_ratio(t, a);
                    ms += w * law.mean(a + t) / d.survival(a);
                }
                r_bar[c * (m + 1) + n] = rs / cell.mass;
                m_bar[c * (m + 1) + n] = ms / cell.mass;
            }
        }

        let init_cov = initial_block(law, &lln, &grid);
        let init_factor = Factor::new(&init_cov, 2 * (m + 1), "initial infectivity and recovery")?;
        let new_cov = new_block(law, &lln, &grid, r);
        let new_factor = Factor::new(&new_cov, 2 * m, "new infectivity and recovery")?;

        let mut setup = Self {
            grid,
            lln,
            refine: r,
            law: law.clone(),
            s_bar,
            f_bar,
            y_bar,
            mean_coarse,
            surv_coarse,
            mean_fine,
            surv_fine,
            cell_mass,
            k_mean,
            k_surv,
            initial_mass: i0,
            age_cells,
            sqrt_p,
            r_bar,
            m_bar,
            init_cov,
            new_cov,
            init_factor,
            new_factor,
            rec: None,
            rec_unit: None,
        };
        if options.recovery_noise {
            let rec = setup.build_rec();
            setup.rec = Some(rec);
            setup.rec_unit = Some(setup.rec_rows(|_| 1.0)?);
        }
        Ok(setup)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn law(&self) -> &InfectivityLaw {
        &self.law
    }

    pub fn has_recovery_noise(&self) -> bool {
        self.rec.is_some()
    }

    fn cells(&self) -> usize {
        self.grid.len() - 1
    }

    /// `Σ_{fine j ≤ r·n} w_j g(r·n − j) Ῡ_j`, i.e. `∫₀^{tₙ} g(tₙ − s) Ῡ(s) ds`
    /// with `g` given on fine lags.
    fn fine_conv(&self, n: usize, g: impl Fn(usize) -> f64) -> f64 {
        let top = self.refine * n;
        let delta = self.lln.grid.step;
        (0..=top).map(|j| trapezoid_weight(j, top, delta) * g(top - j) * self.lln.rate[j]).sum()
    }

    // -- analytic covariances -------------------------------------------------

    /// `Cov(Ŝ₁(tₙ), Ŝ₁(tₙ′)) = ∫₀^{tₙ∧tₙ′} Ῡ`.
    pub fn cov_s1(&self, n: usize, n2: usize) -> f64 {
        self.fine_conv(n.min(n2), |_| 1.0)
    }

    /// `Cov(Ŝ₁(tₙ), 𝔉̂₁(tₙ′)) = ∫₀^{tₙ∧tₙ′} λ̄(tₙ′ − s) Ῡ(s) ds`.
    pub fn cov_s1_f1(&self, n: usize, n2: usize) -> f64 {
        let lo = n.min(n2);
        let shift = self.refine * (n2 - lo);
        self.fine_conv(lo, |lag| self.mean_fine[lag + shift])
    }

    /// `Var 𝔉̂₁(tₙ) = ∫₀^{tₙ} λ̄(tₙ − s)² Ῡ(s) ds`.
    pub fn var_f1(&self, n: usize) -> f64 {
        self.fine_conv(n, |lag| self.mean_fine[lag].powi(2))
    }

    /// `Var Î_inf(tₙ) = ∫₀^{tₙ} Fᶜ(tₙ − s)² Ῡ(s) ds`.
    pub fn var_i_inf(&self, n: usize) -> f64 {
        self.fine_conv(n, |lag| self.surv_fine[lag].powi(2))
    }

    /// `Var R̂₁(tₙ) = ∫₀^{tₙ} F(tₙ − s) Ῡ(s) ds`.
    pub fn var_r1(&self, n: usize) -> f64 {
        self.fine_conv(n, |lag| 1.0 - self.surv_fine[lag])
    }

    /// `Cov(𝔉̂₀,₁(tₙ), 𝔉̂₀,₁(tₙ′))` from the bridge covariance of `μ̂₀`.
    pub fn cov_f01(&self, n: usize, n2: usize) -> f64 {
        let d = &self.law.duration;
        let (t, t2) = (self.grid.time(n), self.grid.time(n2));
        let (mut both, mut a, mut b) = (0.0, 0.0, 0.0);
        for c in &self.age_cells {
            for (&age, &w) in c.quad.ages.iter().zip(&c.quad.weights) {
                let x = self.law.mean(age + t) / d.survival(age);
                let y = self.law.mean(age + t2) / d.survival(age);
                both += w * x * y;
                a += w * x;
                b += w * y;
            }
        }
        self.initial_mass * (both - a * b)
    }

    /// Joint covariance of `[𝔉̂₀,₂(t₀..t_M); Î₀(t₀..t_M)]`, row-major.
    pub fn initial_block(&self) -> &[f64] {
        &self.init_cov
    }

    /// Joint covariance of `[𝔉̂₂(t₁..t_M); Î₂(t₁..t_M)]`, row-major.
    pub fn new_block(&self) -> &[f64] {
        &self.new_cov
    }

    // -- recovery noise -------------------------------------------------------

    fn build_rec(&self) -> RecField {
        let m = self.cells();
        let r = self.refine;
        let delta = self.lln.grid.step;
        let dt = self.grid.step;
        let d = &self.law.duration;
        let y = &self.lln.rate;
        let i0 = self.initial_mass;
        let mut f = RecField {
            time_cell: Vec::new(),
            sd: Vec::new(),
            start: vec![0],
            age: Vec::new(),
            weight: Vec::new(),
            midpoint: Vec::new(),
            prefix: vec![0],
        };
        let push = |f: &mut RecField, k: usize, nodes: &mut dyn Iterator<Item = (f64, f64)>| {
            let begin = f.age.len();
            for (a, w) in nodes {
                f.age.push(a);
                f.weight.push(w);
            }
            let total: f64 = f.weight[begin..].iter().sum();
            if total > 0.0 {
                f.weight[begin..].iter_mut().for_each(|w| *w /= total);
                f.time_cell.push(k);
                f.sd.push(total.sqrt());
                f.start.push(f.age.len());
            } else {
                f.age.truncate(begin);
                f.weight.truncate(begin);
            }
        };
        for k in 0..m {
            let mid = r * k + r / 2;
            let s = mid as f64 * delta;
            f.midpoint.push(s);
            // density part: ages in [0, s), one cell per coarse age step
            let mut lo = 0;
            while lo < mid {
                let hi = (lo + r).min(mid);
                let width = hi - lo;
                let mut nodes = (lo..=hi).map(|i| {
                    let a = i as f64 * delta;
                    let w = trapezoid_weight(i - lo, width, delta) * d.hazard(a) * self.surv_fine[i] * y[mid - i];
                    (a, w * dt)
                });
                push(&mut f, k, &mut nodes);
                lo = hi;
            }
            // initially infected, transported by s
            for c in &self.age_cells {
                let mut nodes = c.quad.ages.iter().zip(&c.quad.weights).map(|(&v, &q)| {
                    let w = i0 * q * d.hazard(v + s) * d.survival_ratio(s, v);
                    (v + s, w * dt)
                });
                push(&mut f, k, &mut nodes);
            }
            f.prefix.push(f.time_cell.len());
        }
        f
    }

    /// Kernel rows of `∫∫ φ(t−s+a) Fᶜ(t−s+a)/Fᶜ(a) W_rec(ds, da)` for every
    /// node; row `n` covers the first `prefix[n]` cells.
    fn rec_rows(&self, phi: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let rec = self.rec.as_ref().ok_or_else(|| Error::Config("recovery noise was not prepared".into()))?;
        let d = &self.law.duration;
        let mut rows = Vec::with_capacity(rec.prefix.iter().sum());
        for n in 0..self.grid.len() {
            let t = self.grid.time(n);
            for c in 0..rec.prefix[n] {
                let s = rec.midpoint[rec.time_cell[c]];
                let mut g = 0.0;
                for i in rec.start[c]..rec.start[c + 1] {
                    let a = rec.age[i];
                    g += rec.weight[i] * phi(t - s + a) * d.survival_ratio(t - s, a);
                }
                rows.push(g);
            }
        }
        Ok(rows)
    }

    fn rec_row_offset(&self, n: usize) -> usize {
        self.rec.as_ref().map_or(0, |r| r.prefix[..n].iter().sum())
    }

    /// Number of `W_rec` cells.
    pub fn rec_cells(&self) -> usize {
        self.rec.as_ref().map_or(0, |r| r.sd.len())
    }

    // -- sampling -------------------------------------------------------------

    /// Draws one set of driver paths.
    pub fn sample_drivers<R: Rng + ?Sized>(&self, rng: &mut R, with_recovery: bool) -> Result<GaussianDriverSet> {
        if with_recovery && self.rec.is_none() {
            return Err(Error::Config("recovery noise was not prepared".into()));
        }
        let m = self.cells();
        let len = m + 1;
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        let w_inf: Vec<f64> = (0..m).map(|k| self.cell_mass[k].sqrt() * normal()).collect();
        let z: Vec<f64> = (0..self.age_cells.len()).map(|_| normal()).collect();
        let common: f64 = self.sqrt_p.iter().zip(&z).map(|(s, z)| s * z).sum();
        let root = self.initial_mass.sqrt();
        let bridge: Vec<f64> = self
            .age_cells
            .iter()
            .zip(&self.sqrt_p)
            .zip(&z)
            .map(|((c, s), z)| root * (s * z - c.mass * common))
            .collect();
        let zi: Vec<f64> = (0..self.init_factor.rank()).map(|_| normal()).collect();
        let mut joint0 = vec![0.0; 2 * len];
        self.init_factor.apply(&zi, &mut joint0);
        let zn: Vec<f64> = (0..self.new_factor.rank()).map(|_| normal()).collect();
        let mut joint2 = vec![0.0; 2 * m];
        self.new_factor.apply(&zn, &mut joint2);
        let w_rec = if with_recovery {
            let rec = self.rec.as_ref().expect("checked");
            Some(rec.sd.iter().map(|sd| sd * normal()).collect())
        } else {
            None
        };

        let mut set = GaussianDriverSet {
            w_inf,
            bridge,
            s1: vec![0.0; len],
            f1: vec![0.0; len],
            i_inf: vec![0.0; len],
            f01: vec![0.0; len],
            f02: joint0[..len].to_vec(),
            i0: joint0[len..].to_vec(),
            f2: vec![0.0; len],
            i2: vec![0.0; len],
            w_rec,
        };
        set.f2[1..].copy_from_slice(&joint2[..m]);
        set.i2[1..].copy_from_slice(&joint2[m..]);
        self.derive(&mut set);
        Ok(set)
    }

    /// Rebuilds the `W_inf` functionals and `𝔉̂₀,₁` from the raw increments.
    pub fn derive(&self, set: &mut GaussianDriverSet) {
        let m = self.cells();
        let mut acc = 0.0;
        set.s1[0] = 0.0;
        for n in 1..=m {
            acc += set.w_inf[n - 1];
            set.s1[n] = acc;
            let (mut f, mut i) = (0.0, 0.0);
            for k in 0..n {
                f += self.k_mean[lower(n, k)] * set.w_inf[k];
                i += self.k_surv[lower(n, k)] * set.w_inf[k];
            }
            set.f1[n] = f;
            set.i_inf[n] = i;
        }
        for n in 0..=m {
            set.f01[n] = (0..self.age_cells.len()).map(|c| self.m_bar[c * (m + 1) + n] * set.bridge[c]).sum();
        }
    }

    /// All drivers identically zero.
    pub fn zero_drivers(&self) -> GaussianDriverSet {
        let len = self.grid.len();
        GaussianDriverSet {
            w_inf: vec![0.0; len - 1],
            bridge: vec![0.0; self.age_cells.len()],
            s1: vec![0.0; len],
            f1: vec![0.0; len],
            i_inf: vec![0.0; len],
            f01: vec![0.0; len],
            f02: vec![0.0; len],
            i0: vec![0.0; len],
            f2: vec![0.0; len],
            i2: vec![0.0; len],
            w_rec: self.rec.as_ref().map(|r| vec![0.0; r.sd.len()]),
        }
    }

    /// `∫ g(a) μ̂₀(da)` with `g` given through its cell averages at node `n`.
    fn bridge_sum(&self, table: &[f64], n: usize, bridge: &[f64]) -> f64 {
        let len = self.grid.len();
        (0..bridge.len()).map(|c| table[c * len + n] * bridge[c]).sum()
    }
}

/// One realization of every Gaussian driver on the coarse grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDriverSet {
    /// `W_inf` increments scaled by `√Ῡ`, one per cell.
    pub w_inf: Vec<f64>,
    /// `μ̂₀` mass of each initial age cell.
    pub bridge: Vec<f64>,
    pub s1: Vec<f64>,
    pub f1: Vec<f64>,
    pub i_inf: Vec<f64>,
    pub f01: Vec<f64>,
    pub f02: Vec<f64>,
    pub i0: Vec<f64>,
    pub f2: Vec<f64>,
    pub i2: Vec<f64>,
    /// `W_rec` cell increments, when sampled.
    pub w_rec: Option<Vec<f64>>,
}

impl GaussianDriverSet {
    /// Multiplies every driver by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| c * x).collect::<Vec<f64>>();
        Self {
            w_inf: s(&self.w_inf),
            bridge: s(&self.bridge),
            s1: s(&self.s1),
            f1: s(&self.f1),
            i_inf: s(&self.i_inf),
            f01: s(&self.f01),
            f02: s(&self.f02),
            i0: s(&self.i0),
            f2: s(&self.f2),
            i2: s(&self.i2),
            w_rec: self.w_rec.as_ref().map(|w| s(w)),
        }
    }

    /// `μ̂₀(1)`, zero up to rounding.
    pub fn bridge_total(&self) -> f64 {
        self.bridge.iter().sum()
    }
}

/// `Ī(0) ∫ [E(X Y | η > a) − E(X | η > a) E(Y | η > a)] μ̄̄₀(da)` blocks for
/// `X, Y ∈ {λ(a + t), 1{η > a + t}}`.
fn initial_block(law: &InfectivityLaw, lln: &LlnPaths, grid: &Grid) -> Vec<f64> {
    let d = &law.duration;
    let len = grid.len();
    let dim = 2 * len;
    let mut cov = vec![0.0; dim * dim];
    let ages = lln.initial_ages();
    let i0 = lln.initial_mass();
    for (&a, &w) in ages.ages.iter().zip(&ages.weights) {
        let base = d.survival(a);
        if !(base > 0.0) {
            continue;
        }
        let mean: Vec<f64> = (0..len).map(|n| law.mean(a + grid.time(n)) / base).collect();
        let ratio: Vec<f64> = (0..len).map(|n| d.survival_ratio(grid.time(n), a)).collect();
        let q = i0 * w;
        for n in 0..len {
            let t = grid.time(n);
            for n2 in 0..len {
                let t2 = grid.time(n2);
                if n2 >= n {
                    let ff = law.second_moment(a + t, a + t2) / base - mean[n] * mean[n2];
                    let ii = ratio[n.max(n2)] - ratio[n] * ratio[n2];
                    cov[n * dim + n2] += q * ff;
                    cov[(len + n) * dim + len + n2] += q * ii;
                }
                let fi = law.mean_alive(a + t, a + t2) / base - mean[n] * ratio[n2];
                cov[n * dim + len + n2] += q * fi;
            }
        }
    }
    symmetrize(&mut cov, dim, len);
    cov
}

/// `∫₀^{t∧t′} Cov(X(t−s), Y(t′−s)) Ῡ(s) ds` blocks for
/// `X, Y ∈ {λ, 1{η > ·}}` over nodes `t₁..t_M`.
fn new_block(law: &InfectivityLaw, lln: &LlnPaths, grid: &Grid, r: usize) -> Vec<f64> {
    let d = &law.duration;
    let m = grid.len() - 1;
    let dim = 2 * m;
    let delta = lln.grid.step;
    let fine_len = lln.len();
    let fc = lln.survival_table();
    let y = &lln.rate;
    // tables on (fine lag i, coarse offset l): argument pairs (iδ, iδ + lΔ)
    let at = |i: usize, l: usize| i as f64 * delta + l as f64 * grid.step;
    let width = m + 1;
    let mut vv = vec![0.0; fine_len * width];
    let mut fi_ahead = vec![0.0; fine_len * width];
    let mut fi_behind = vec![0.0; fine_len * width];
    for i in 0..fine_len {
        let x = i as f64 * delta;
        for l in 0..=m {
            vv[i * width + l] = law.covariance(x, at(i, l));
            fi_ahead[i * width + l] = law.survival_cross_covariance(x, at(i, l));
            fi_behind[i * width + l] = law.survival_cross_covariance(at(i, l), x);
        }
    }
    let surv = |i: usize| if i < fine_len { fc[i] } else { d.survival(i as f64 * delta) };
    let mut cov = vec![0.0; dim * dim];
    for n in 1..=m {
        for n2 in n..=m {
            let l = n2 - n;
            let top = r * n;
            let (mut ff, mut ii, mut fi, mut if_) = (0.0, 0.0, 0.0, 0.0);
            for j in 0..=top {
                let w = trapezoid_weight(j, top, delta) * y[j];
                let i = top - j;
                ff += w * vv[i * width + l];
                ii += w * (surv(i + r * l) - surv(i) * surv(i + r * l));
                // Cov(λ(tₙ − s), 1{η > tₙ′ − s}) and Cov(λ(tₙ′ − s), 1{η > tₙ − s})
                fi += w * fi_ahead[i * width + l];
                if_ += w * fi_behind[i * width + l];
            }
            let (a, b) = (n - 1, n2 - 1);
            cov[a * dim + b] = ff;
            cov[b * dim + a] = ff;
            cov[(m + a) * dim + m + b] = ii;
            cov[(m + b) * dim + m + a] = ii;
            cov[a * dim + m + b] = fi;
            cov[(m + b) * dim + a] = fi;
            cov[b * dim + m + a] = if_;
            cov[(m + a) * dim + b] = if_;
        }
    }
    cov
}

/// Fills the lower halves of the two diagonal blocks and the transposed
/// cross block of a `[X; Y]` covariance of dimension `2·len`.
fn symmetrize(cov: &mut [f64], dim: usize, len: usize) {
    for n in 0..len {
        for n2 in 0..n {
            cov[n * dim + n2] = cov[n2 * dim + n];
            cov[(len + n) * dim + len + n2] = cov[(len + n2) * dim + len + n];
        }
    }
    for n in 0..len {
        for n2 in 0..len {
            cov[(len + n2) * dim + n] = cov[n * dim + len + n2];
        }
    }
}

#[cfg(test)]
mod tests;
