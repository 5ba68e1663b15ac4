//! Simulated design: `y = μ(x) + w + ε` with `x ~ Beta(2, 4)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::basis::falling;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};

pub const QUARTIC: [f64; 5] = [3.6, -44.4, 112.4, -98.8, 24.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WMode {
    #[default]
    IndependentUniform,
    /// `w = 3(x - 0.5) + U(-0.5, 0.5)`.
    Correlated,
    /// No covariate.
    None,
}

impl std::str::FromStr for WMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" | "independent_uniform" => Ok(WMode::IndependentUniform),
            "correlated" => Ok(WMode::Correlated),
            "none" => Ok(WMode::None),
            _ => Err(Error::Config(format!("unknown w mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpSpec {
    /// Ascending polynomial coefficients of `μ`.
    pub mu_coeffs: Vec<f64>,
    pub noise_sd: f64,
    pub w_mode: WMode,
    /// If set, the noise sd becomes `0.1 + c x`.
    pub hetero: Option<f64>,
    pub n: usize,
    pub seed: u64,
}

impl Default for DgpSpec {
    fn default() -> Self {
        DgpSpec { mu_coeffs: QUARTIC.to_vec(), noise_sd: 0.5, w_mode: WMode::default(), hetero: None, n: 1000, seed: 0 }
    }
}

impl DgpSpec {
    pub fn mu(&self, x: f64) -> f64 {
        self.mu_deriv(x, 0)
    }

    pub fn mu_deriv(&self, x: f64, v: usize) -> f64 {
        let c = &self.mu_coeffs;
        (v..c.len()).rev().fold(0.0, |acc, k| acc * x + c[k] * falling(k, v))
    }

    pub fn noise_sd_at(&self, x: f64) -> f64 {
        match self.hetero {
            Some(c) => 0.1 + c * x,
            None => self.noise_sd,
        }
    }

    /// Population mean of `w`.
    pub fn w_mean(&self) -> f64 {
        match self.w_mode {
            WMode::Correlated => 3.0 * (1.0 / 3.0 - 0.5),
            _ => 0.0,
        }
    }
}

/// Beta(2, 4) density.
pub fn beta24_pdf(x: f64) -> f64 {
    if (0.0..=1.0).contains(&x) {
        20.0 * x * (1.0 - x).powi(3)
    } else {
        0.0
    }
}

/// Beta(2, 4) quantile function, by bisection on the closed-form CDF.
pub fn beta24_quantile(u: f64) -> f64 {
    let cdf = |x: f64| {
        let t = 1.0 - x;
        1.0 - t.powi(4) * (1.0 + 4.0 * x)
    };
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Draws a sample. Per observation the stream yields five uniforms (x is
/// their second order statistic, which is Beta(2, 4)), one uniform for `w`
/// when present, then one normal for the noise.
pub fn generate(dgp: &DgpSpec) -> Result<Dataset> {
    if dgp.n < 10 {
        return Err(Error::Config(format!("simulated samples need n >= 10, got {}", dgp.n)));
    }
    if dgp.hetero.is_none() && !(dgp.noise_sd >= 0.0) {
        return Err(Error::Config(format!("noise sd must be non-negative, got {}", dgp.noise_sd)));
    }
    let mut rng = substream(dgp.seed, Purpose::Sample, 0);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let n = dgp.n;
    let (mut x, mut w, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let mut u: [f64; 5] = std::array::from_fn(|_| rng.random::<f64>());
        u.sort_by(f64::total_cmp);
        let xi = u[1];
        let wi = match dgp.w_mode {
            WMode::IndependentUniform => rng.random_range(-1.0..1.0),
            WMode::Correlated => 3.0 * (xi - 0.5) + rng.random_range(-0.5..0.5),
            WMode::None => 0.0,
        };
        let e: f64 = std.sample(&mut rng);
        y.push(dgp.mu(xi) + wi + dgp.noise_sd_at(xi) * e);
        x.push(xi);
        w.push(wi);
    }
    match dgp.w_mode {
        WMode::None => Dataset::from_xy(y, x),
        _ => Dataset::with_names(y, x, DMatrix::from_vec(n, 1, w), vec!["w".into()], None),
    }
}
