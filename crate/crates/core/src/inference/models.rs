//! Parametric families `m(x, θ)` compared against the nonparametric fit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::falling;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::lstsq;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family", content = "arg")]
pub enum ParamModel {
    Constant,
    Linear,
    /// Polynomial of the given degree.
    Polynomial(usize),
    /// `Λ(a + b x)` with `Λ` the logistic function.
    Logistic,
    /// `exp(a + b x)`.
    Exponential,
    /// Fixed polynomial, ascending coefficients; nothing is estimated.
    Coefficients(Vec<f64>),
}

impl std::str::FromStr for ParamModel {
    type Err = Error;

    /// Accepts `constant`, `linear`, `quadratic`, `cubic`, `poly:K`,
    /// `logistic`, `exponential` and `coef:c0,c1,...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("unknown model `{s}`"));
        match s {
            "constant" => Ok(ParamModel::Constant),
            "linear" => Ok(ParamModel::Linear),
            "quadratic" => Ok(ParamModel::Polynomial(2)),
            "cubic" => Ok(ParamModel::Polynomial(3)),
            "logistic" => Ok(ParamModel::Logistic),
            "exponential" => Ok(ParamModel::Exponential),
            _ => {
                if let Some(k) = s.strip_prefix("poly:") {
                    k.parse().map(ParamModel::Polynomial).map_err(|_| bad())
                } else if let Some(c) = s.strip_prefix("coef:") {
                    let coefs: std::result::Result<Vec<f64>, _> = c.split(',').map(|v| v.trim().parse()).collect();
                    coefs.map(ParamModel::Coefficients).map_err(|_| bad())
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl std::fmt::Display for ParamModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamModel::Constant => write!(f, "constant"),
            ParamModel::Linear => write!(f, "linear"),
            ParamModel::Polynomial(k) => write!(f, "poly:{k}"),
            ParamModel::Logistic => write!(f, "logistic"),
            ParamModel::Exponential => write!(f, "exponential"),
            ParamModel::Coefficients(c) => {
                let s: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "coef:{}", s.join(","))
            }
        }
    }
}

/// Estimated parametric model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelFit {
    pub model: ParamModel,
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Coefficients (ascending in `L`) of `P_k` with `d^k/dt^k Λ(t) = P_k(Λ(t))`.
fn logistic_derivative_poly(k: usize) -> Vec<f64> {
    let mut p = vec![0.0, 1.0];
    for _ in 0..k {
        // P' (L) * (L - L²)
        let d: Vec<f64> = (1..p.len()).map(|i| i as f64 * p[i]).collect();
        let mut next = vec![0.0; d.len() + 2];
        for (i, c) in d.iter().enumerate() {
            next[i + 1] += c;
            next[i + 2] -= c;
        }
        p = next;
    }
    p
}

impl ModelFit {
    /// `m^(v)(x, θ̂)`, without the covariate part.
    pub fn eval(&self, x: f64, v: usize) -> f64 {
        match &self.model {
            ParamModel::Constant | ParamModel::Linear | ParamModel::Polynomial(_) | ParamModel::Coefficients(_) => {
                let c = &self.theta;
                (v..c.len()).map(|k| c[k] * falling(k, v) * x.powi((k - v) as i32)).sum()
            }
            ParamModel::Logistic => {
                let (a, b) = (self.theta[0], self.theta[1]);
                let l = logistic(a + b * x);
                let poly = logistic_derivative_poly(v);
                let pv = poly.iter().rev().fold(0.0, |acc, c| acc * l + c);
                b.powi(v as i32) * pv
            }
            ParamModel::Exponential => {
                let (a, b) = (self.theta[0], self.theta[1]);
                b.powi(v as i32) * (a + b * x).exp()
            }
        }
    }
}

/// Estimates `θ` (and the covariate coefficients) by least squares of `y`
/// on the model and `w`.
pub fn fit_model(data: &Dataset, model: &ParamModel) -> Result<ModelFit> {
    let n = data.n();
    let d = data.d();
    let x = data.x();
    let y = DVector::from_column_slice(data.y());
    let w = data.w();
    let wrap = |e: Error| Error::Model(format!("fitting the {model} model failed: {e}"));
    match model {
        ParamModel::Constant | ParamModel::Linear | ParamModel::Polynomial(_) => {
            let k = match model {
                ParamModel::Constant => 0,
                ParamModel::Linear => 1,
                ParamModel::Polynomial(k) => *k,
                _ => unreachable!(),
            };
            let design = DMatrix::from_fn(n, k + 1 + d, |i, c| if c <= k { x[i].powi(c as i32) } else { w[(i, c - k - 1)] });
            let coef = lstsq(&design, &y, "model").map_err(wrap)?;
            Ok(ModelFit {
                model: model.clone(),
                theta: coef.rows(0, k + 1).iter().cloned().collect(),
                gamma: coef.rows(k + 1, d).iter().cloned().collect(),
            })
        }
        ParamModel::Coefficients(c) => {
            if c.is_empty() {
                return Err(Error::Config("user-supplied model needs at least one coefficient".into()));
            }
            Ok(ModelFit { model: model.clone(), theta: c.clone(), gamma: vec![0.0; d] })
        }
        ParamModel::Logistic | ParamModel::Exponential => gauss_newton(data, model),
    }
}

/// Damped Gauss-Newton for `y = g(a + b x) + w'γ + ε`.
fn gauss_newton(data: &Dataset, model: &ParamModel) -> Result<ModelFit> {
    let n = data.n();
    let d = data.d();
    let x = data.x();
    let y = data.y();
    let w = data.w();
    let is_logit = matches!(model, ParamModel::Logistic);
    let g = |t: f64| if is_logit { logistic(t) } else { t.exp() };
    let dg = |t: f64| {
        if is_logit {
            let l = logistic(t);
            l * (1.0 - l)
        } else {
            t.exp()
        }
    };
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let a0 = if is_logit {
        let m = mean_y.clamp(0.05, 0.95);
        (m / (1.0 - m)).ln()
    } else {
        mean_y.max(1e-3).ln()
    };
    let mut par = vec![0.0; 2 + d];
    par[0] = a0;
    let sse = |par: &[f64]| -> f64 {
        (0..n)
            .map(|i| {
                let f = g(par[0] + par[1] * x[i]) + (0..d).map(|c| w[(i, c)] * par[2 + c]).sum::<f64>();
                (y[i] - f).powi(2)
            })
            .sum()
    };
    let mut cur = sse(&par);
    let mut converged = false;
    for _ in 0..200 {
        let jac = DMatrix::from_fn(n, 2 + d, |i, c| {
            let t = par[0] + par[1] * x[i];
            match c {
                0 => dg(t),
                1 => dg(t) * x[i],
                _ => w[(i, c - 2)],
            }
        });
        let resid = DVector::from_fn(n, |i, _| {
            y[i] - g(par[0] + par[1] * x[i]) - (0..d).map(|c| w[(i, c)] * par[2 + c]).sum::<f64>()
        });
        let step = lstsq(&jac, &resid, "model")
            .map_err(|e| Error::Model(format!("{model} model: Gauss-Newton step failed: {e}")))?;
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = par.iter().zip(step.iter()).map(|(p, s)| p + t * s).collect();
            let v = sse(&trial);
            if v.is_finite() && v <= cur {
                let rel = (cur - v) / cur.max(f64::MIN_POSITIVE);
                par = trial;
                cur = v;
                improved = true;
                if rel < 1e-12 || step.norm() * t < 1e-10 * (1.0 + par.iter().map(|p| p * p).sum::<f64>().sqrt()) {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !improved || converged {
            converged = true;
            break;
        }
    }
    if !converged || !par.iter().all(|p| p.is_finite()) {
        return Err(Error::Model(format!("{model} model: Gauss-Newton did not converge")));
    }
    Ok(ModelFit { model: model.clone(), theta: par[..2].to_vec(), gamma: par[2..].to_vec() })
}
