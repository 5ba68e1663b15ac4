//! Robust-bias-corrected pointwise intervals, simulated uniform bands, and
//! sup-type tests.
//!
//! Inference uses a fit of order `p + q` (smoothness `min(s + q, p + q)`) on
//! the partition chosen for order `p`. The sup of the Studentized process is
//! approximated by simulating `b(x)'A N / √Ω̂(x)` on a grid, where `A A' =
//! Q̂⁻¹Σ̂Q̂⁻¹` and `N` is standard normal.

pub mod hypothesis;
pub mod models;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSpec, SparseBasisRow};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fit::{fit_binscatter, FitResult};
use crate::partition::QuantilePartition;
use crate::rng::{substream, Purpose};
use crate::variance::{sandwich, VarianceModel, VceMode};

pub use hypothesis::{test_shape, test_specification, Direction, TestKind, TestResult};
pub use models::{fit_model, ModelFit, ParamModel};

/// Orders and simulation settings shared by all inference routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub p: usize,
    pub s: usize,
    pub v: usize,
    pub q: usize,
    pub alpha: f64,
    pub draws: usize,
    pub seed: u64,
    pub vce: VceMode,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig { p: 3, s: 3, v: 0, q: 1, alpha: 0.05, draws: 1000, seed: 42, vce: VceMode::Hc0 }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s > self.p {
            return Err(Error::Config(format!("smoothness s={} exceeds p={}", self.s, self.p)));
        }
        if self.v > self.p {
            return Err(Error::Config(format!("v exceeds p (v={}, p={})", self.v, self.p)));
        }
        if self.q < 1 {
            return Err(Error::Config("bias-correction order q must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.draws == 0 {
            return Err(Error::Config("number of simulation draws must be positive".into()));
        }
        Ok(())
    }

    /// Order and smoothness of the bias-corrected refit.
    pub fn refit_orders(&self) -> (usize, usize) {
        let p = self.p + self.q;
        (p, (self.s + self.q).min(p))
    }
}

/// Evaluation points with the fitted derivative and its variance.
#[derive(Debug, Clone, Serialize)]
pub struct EvalGrid {
    pub points: Vec<f64>,
    #[serde(skip)]
    pub bins: Vec<usize>,
    #[serde(skip)]
    pub rows: Vec<SparseBasisRow>,
    pub mu: Vec<f64>,
    pub omega: Vec<f64>,
    pub se: Vec<f64>,
}

/// Grid abscissae: `max(20, ⌈500/J⌉)` evenly spaced points per bin, both
/// ends included, the right end taken as a left limit for interior knots.
pub fn grid_points(part: &QuantilePartition) -> (Vec<f64>, Vec<usize>) {
    let bins = part.bins();
    let per = 20usize.max(500usize.div_ceil(bins));
    let mut pts = Vec::with_capacity(per * bins);
    let mut idx = Vec::with_capacity(per * bins);
    for j in 0..bins {
        let (lo, h) = (part.knots()[j], part.widths()[j]);
        let hi = if j + 1 < bins { part.knots()[j + 1] - h * 1e-9 } else { part.knots()[j + 1] };
        for k in 0..per {
            let t = k as f64 / (per - 1) as f64;
            pts.push(if k + 1 == per { hi } else { lo + t * h });
            idx.push(j);
        }
    }
    (pts, idx)
}

/// Bias-corrected fit with its variance and simulation factor.
#[derive(Debug, Clone)]
pub struct RbcSetup {
    pub config: InferenceConfig,
    pub fit: FitResult,
    pub variance: VarianceModel,
    pub root: DMatrix<f64>,
    pub grid: EvalGrid,
}

impl RbcSetup {
    /// Refits at order `p + q` on `part` and evaluates the grid.
    pub fn new(data: &Dataset, part: &QuantilePartition, config: InferenceConfig) -> Result<Self> {
        config.validate()?;
        let (pq, sq) = config.refit_orders();
        let spec = BasisSpec::new(pq, sq, part.clone())?;
        let fit = fit_binscatter(data, &spec)?;
        let variance = sandwich(&fit, data, config.vce)?;
        let root = variance.sqrt_factor(&fit)?;
        let (points, bins) = grid_points(part);
        let mut grid = EvalGrid {
            points: Vec::new(),
            bins: Vec::new(),
            rows: Vec::new(),
            mu: Vec::new(),
            omega: Vec::new(),
            se: Vec::new(),
        };
        let n = data.n() as f64;
        for (x, j) in points.into_iter().zip(bins) {
            let row = spec.eval_in_bin(x, j, config.v);
            let om = omega_from_root(&root, &row);
            grid.mu.push(row.dot(fit.beta()));
            grid.omega.push(om);
            grid.se.push((om / n).sqrt());
            grid.points.push(x);
            grid.bins.push(j);
            grid.rows.push(row);
        }
        Ok(RbcSetup { config, fit, variance, root, grid })
    }

    /// Estimate and standard error at an arbitrary point.
    pub fn at(&self, x: f64) -> Result<(f64, f64)> {
        let row = self.fit.spec().eval(x, self.config.v)?;
        let om = omega_from_root(&self.root, &row);
        Ok((row.dot(self.fit.beta()), (om / self.fit.n() as f64).sqrt()))
    }

    /// Grid indices whose variance is not numerically zero.
    pub fn active(&self) -> Vec<bool> {
        let max = self.grid.omega.iter().cloned().fold(0.0, f64::max);
        self.grid.omega.iter().map(|&o| max > 0.0 && o > 1e-14 * max).collect()
    }
}

fn omega_from_root(root: &DMatrix<f64>, row: &SparseBasisRow) -> f64 {
    let mut acc = vec![0.0; root.ncols()];
    for (k, b) in row.indices().zip(&row.values) {
        for (c, a) in acc.iter_mut().enumerate() {
            *a += b * root[(k, c)];
        }
    }
    acc.iter().map(|a| a * a).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupMode {
    Abs,
    Pos,
    Neg,
}

/// Simulated draws of the sup statistic over the grid.
pub fn simulate_sup(setup: &RbcSetup, draws: usize, seed: u64, mode: SupMode) -> Vec<f64> {
    let grid = &setup.grid;
    let active = setup.active();
    let r = setup.root.ncols();
    // rows of L: b(x)'A / √Ω(x)
    let idx: Vec<usize> = (0..grid.points.len()).filter(|&g| active[g]).collect();
    let mut l = DMatrix::<f64>::zeros(idx.len(), r);
    for (a, &g) in idx.iter().enumerate() {
        let row = &grid.rows[g];
        let scale = 1.0 / grid.omega[g].sqrt();
        for (k, b) in row.indices().zip(&row.values) {
            for c in 0..r {
                l[(a, c)] += b * setup.root[(k, c)] * scale;
            }
        }
    }
    (0..draws)
        .into_par_iter()
        .map(|d| {
            if idx.is_empty() || r == 0 {
                return 0.0;
            }
            let mut rng = substream(seed, Purpose::GaussianDraw, d as u64);
            let z: DVector<f64> = DVector::from_iterator(r, (0..r).map(|_| StandardNormal.sample(&mut rng)));
            let vals: DVector<f64> = &l * z;
            match mode {
                SupMode::Abs => vals.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
                SupMode::Pos => vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                SupMode::Neg => vals.iter().fold(f64::NEG_INFINITY, |m: f64, v| m.max(-v)),
            }
        })
        .collect()
}

/// Critical value matching the `(r + 1)/(R + 1)` p-value rule: a statistic
/// exceeds it exactly when its p-value is below `alpha`.
pub fn critical_value(sups: &[f64], alpha: f64) -> f64 {
    let r = sups.len();
    let m = (alpha * (r as f64 + 1.0)).ceil() as i64 - 2;
    if m < 0 {
        return f64::INFINITY;
    }
    if m as usize >= r {
        return f64::NEG_INFINITY;
    }
    let mut sorted = sups.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[r - 1 - m as usize]
}

/// `(#{sup ≥ stat} + 1) / (R + 1)`.
pub fn p_value(sups: &[f64], stat: f64) -> f64 {
    let r = sups.iter().filter(|&&s| s >= stat).count();
    (r as f64 + 1.0) / (sups.len() as f64 + 1.0)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}

#[derive(Debug, Clone, Serialize)]
pub struct PointwiseCi {
    pub grid: EvalGrid,
    pub z: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub alpha: f64,
}

/// Pointwise robust-bias-corrected intervals on the grid.
pub fn pointwise_ci(setup: &RbcSetup) -> PointwiseCi {
    let z = normal_quantile(1.0 - setup.config.alpha / 2.0);
    let g = &setup.grid;
    let lower = g.mu.iter().zip(&g.se).map(|(m, s)| m - z * s).collect();
    let upper = g.mu.iter().zip(&g.se).map(|(m, s)| m + z * s).collect();
    PointwiseCi { grid: g.clone(), z, lower, upper, alpha: setup.config.alpha }
}

#[derive(Debug, Clone, Serialize)]
pub struct BandResult {
    pub grid: EvalGrid,
    pub cv: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub alpha: f64,
    pub draws: usize,
    pub seed: u64,
}

/// Uniform band `μ̂ ± 𝔠·se` with `𝔠` the simulated sup quantile.
pub fn confidence_band(setup: &RbcSetup) -> BandResult {
    let cfg = setup.config;
    let sups = simulate_sup(setup, cfg.draws, cfg.seed, SupMode::Abs);
    let cv = critical_value(&sups, cfg.alpha);
    band_from_cv(setup, cv)
}

pub(crate) fn band_from_cv(setup: &RbcSetup, cv: f64) -> BandResult {
    let cfg = setup.config;
    let g = &setup.grid;
    let lower = g.mu.iter().zip(&g.se).map(|(m, s)| m - cv * s).collect();
    let upper = g.mu.iter().zip(&g.se).map(|(m, s)| m + cv * s).collect();
    BandResult { grid: g.clone(), cv, lower, upper, alpha: cfg.alpha, draws: cfg.draws, seed: cfg.seed }
}

/// Builds the partition with `bins` bins and the bias-corrected setup.
pub fn setup_for(data: &Dataset, bins: usize, config: InferenceConfig) -> Result<RbcSetup> {
    let part = QuantilePartition::build(data, &data.sort_index(), bins)?;
    RbcSetup::new(data, &part, config)
}
