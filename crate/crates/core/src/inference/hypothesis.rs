//! Sup tests of a parametric specification and of shape restrictions.
//!
//! Grid points whose variance is numerically zero carry no information and
//! are left out of both the statistic and the simulated sups.

use serde::{Deserialize, Serialize};

use super::models::{fit_model, ModelFit, ParamModel};
use super::{critical_value, p_value, setup_for, simulate_sup, InferenceConfig, RbcSetup, SupMode};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    TwoSidedSpec,
    /// `H0: μ^(v) ≤ m^(v)`, rejected by large positive deviations.
    OneSidedLeft,
    /// `H0: μ^(v) ≥ m^(v)`.
    OneSidedRight,
}

/// Direction of a shape null hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Le,
    Ge,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "le" | "<=" => Ok(Direction::Le),
            "ge" | ">=" => Ok(Direction::Ge),
            other => Err(Error::Config(format!("unknown direction '{other}' (expected le or ge)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub kind: TestKind,
    pub statistic: f64,
    pub cv: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub draws: usize,
    pub seed: u64,
    pub v: usize,
    /// Parametric fit used as the null, if any.
    pub model_fit: Option<ModelFit>,
    pub points: Vec<f64>,
    pub mu: Vec<f64>,
    pub se: Vec<f64>,
    /// `m^(v)(x, θ̂)` on the grid (zero without a baseline model).
    pub null_curve: Vec<f64>,
    /// Studentized deviations, `NaN` where the variance vanishes.
    pub t: Vec<f64>,
}

fn studentize(setup: &RbcSetup, null_curve: &[f64]) -> Vec<f64> {
    let g = &setup.grid;
    setup
        .active()
        .iter()
        .enumerate()
        .map(|(i, &ok)| if ok { (g.mu[i] - null_curve[i]) / g.se[i] } else { f64::NAN })
        .collect()
}

fn finish(setup: &RbcSetup, kind: TestKind, model_fit: Option<ModelFit>, null_curve: Vec<f64>) -> TestResult {
    let cfg = setup.config;
    let t = studentize(setup, &null_curve);
    let valid = t.iter().filter(|v| !v.is_nan());
    let (statistic, mode) = match kind {
        TestKind::TwoSidedSpec => (valid.fold(0.0, |m: f64, v| m.max(v.abs())), SupMode::Abs),
        TestKind::OneSidedLeft => (valid.fold(f64::NEG_INFINITY, |m: f64, &v| m.max(v)), SupMode::Pos),
        TestKind::OneSidedRight => (valid.fold(f64::NEG_INFINITY, |m: f64, &v| m.max(-v)), SupMode::Neg),
    };
    let sups = simulate_sup(setup, cfg.draws, cfg.seed, mode);
    let cv = critical_value(&sups, cfg.alpha);
    let p = p_value(&sups, statistic);
    let g = &setup.grid;
    TestResult {
        kind,
        statistic,
        cv,
        p_value: p,
        reject: statistic > cv,
        alpha: cfg.alpha,
        draws: cfg.draws,
        seed: cfg.seed,
        v: cfg.v,
        model_fit,
        points: g.points.clone(),
        mu: g.mu.clone(),
        se: g.se.clone(),
        null_curve,
        t,
    }
}

fn model_curve(setup: &RbcSetup, fit: &ModelFit) -> Vec<f64> {
    setup.grid.points.iter().map(|&x| fit.eval(x, setup.config.v)).collect()
}

/// Two-sided test of `H0: μ = m(·, θ)` on an existing setup.
pub fn specification_on(setup: &RbcSetup, data: &Dataset, model: &ParamModel) -> Result<TestResult> {
    let fit = fit_model(data, model)?;
    let curve = model_curve(setup, &fit);
    Ok(finish(setup, TestKind::TwoSidedSpec, Some(fit), curve))
}

/// One-sided test of `μ^(v) ≤ m^(v)` (or `≥`), with `m ≡ 0` unless a
/// baseline model is given.
pub fn shape_on(
    setup: &RbcSetup,
    data: &Dataset,
    direction: Direction,
    baseline: Option<&ParamModel>,
) -> Result<TestResult> {
    let (fit, curve) = match baseline {
        Some(m) => {
            let fit = fit_model(data, m)?;
            let curve = model_curve(setup, &fit);
            (Some(fit), curve)
        }
        None => (None, vec![0.0; setup.grid.points.len()]),
    };
    let kind = match direction {
        Direction::Le => TestKind::OneSidedLeft,
        Direction::Ge => TestKind::OneSidedRight,
    };
    Ok(finish(setup, kind, fit, curve))
}

/// Specification test with `bins` quantile bins.
pub fn test_specification(
    data: &Dataset,
    bins: usize,
    config: InferenceConfig,
    model: &ParamModel,
) -> Result<TestResult> {
    let setup = setup_for(data, bins, config)?;
    specification_on(&setup, data, model)
}

/// Shape-restriction test with `bins` quantile bins.
pub fn test_shape(
    data: &Dataset,
    bins: usize,
    config: InferenceConfig,
    direction: Direction,
    baseline: Option<&ParamModel>,
) -> Result<TestResult> {
    let setup = setup_for(data, bins, config)?;
    shape_on(&setup, data, direction, baseline)
}
