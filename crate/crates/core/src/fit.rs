//! Least-squares binscatter fit with semi-linear covariate adjustment.
//!
//! Solves `min Σ (y_i - b(x_i)'β - w_i'γ)²` by backfitting: the covariate
//! block is estimated from data residualized on the banded basis, then `β`
//! from `y - Wγ`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::basis::{BasisSpec, SparseBasisRow};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{lstsq, BandedCholesky, BandedSym, RCOND_TOL};
use crate::partition::QuantilePartition;

#[derive(Debug, Clone)]
pub struct FitResult {
    spec: BasisSpec,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    gram: BandedSym,
    chol: BandedCholesky,
    residuals: Vec<f64>,
    rows: Vec<SparseBasisRow>,
    w_means: Vec<f64>,
}

/// A binscatter dot: bin midpoint and fitted value there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dot {
    pub x: f64,
    pub y: f64,
}

/// Basis rows for every observation.
pub fn basis_rows(spec: &BasisSpec, x: &[f64]) -> Result<Vec<SparseBasisRow>> {
    x.iter().map(|&v| spec.eval(v, 0)).collect()
}

/// `Σ b_i b_i'`, accumulated in observation order.
pub fn cross_product(spec: &BasisSpec, rows: &[SparseBasisRow]) -> BandedSym {
    let mut g = BandedSym::zeros(spec.dim(), spec.bandwidth());
    let mut idx = Vec::new();
    for r in rows {
        idx.clear();
        idx.extend(r.indices());
        g.add_outer(&idx, &r.values, 1.0);
    }
    g
}

/// `Σ b_i v_i`.
pub fn cross_vec(dim: usize, rows: &[SparseBasisRow], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (r, &vi) in rows.iter().zip(v) {
        for (k, b) in r.indices().zip(&r.values) {
            out[k] += b * vi;
        }
    }
    out
}

fn factor_gram(spec: &BasisSpec, gram: &BandedSym) -> Result<BandedCholesky> {
    let bin_of = |k: usize| {
        let p = spec.p();
        // first bin touched by basis function k
        if spec.s() == 0 { k / (p + 1) } else { k.saturating_sub(p) / (p - spec.s() + 1) }
    };
    let chol = gram.cholesky().map_err(|f| Error::Singular {
        block: "basis".into(),
        detail: format!(
            "Gram matrix is not positive definite at basis function {} (near bin {}); too few distinct x values per bin",
            f.pivot,
            bin_of(f.pivot) + 1
        ),
    })?;
    let rcond = chol.rcond_estimate();
    if rcond < RCOND_TOL {
        let k = chol.weakest_pivot();
        return Err(Error::Singular {
            block: "basis".into(),
            detail: format!(
                "reciprocal condition estimate {rcond:.3e} below {RCOND_TOL:e} (weakest basis function {k}, near bin {})",
                bin_of(k) + 1
            ),
        });
    }
    Ok(chol)
}

/// Fits `y` on the basis and the covariates of `data`.
pub fn fit_binscatter(data: &Dataset, spec: &BasisSpec) -> Result<FitResult> {
    let n = data.n();
    let k = spec.dim();
    let d = data.d();
    if n <= k + d {
        return Err(Error::SampleSize { n, required: k + d });
    }
    let rows = basis_rows(spec, data.x())?;
    let gram = cross_product(spec, &rows);
    let chol = factor_gram(spec, &gram)?;
    let y = data.y();

    let gamma = if d > 0 {
        // residualize y and each covariate on the basis
        let resid = |v: &[f64]| -> Vec<f64> {
            let coef = chol.solve(&cross_vec(k, &rows, v));
            v.iter().zip(&rows).map(|(vi, r)| vi - r.dot(&coef)).collect()
        };
        let w = data.w();
        let mut mw = DMatrix::zeros(n, d);
        for c in 0..d {
            let col: Vec<f64> = w.column(c).iter().cloned().collect();
            let r = DVector::from_vec(resid(&col));
            let norm = w.column(c).norm();
            if !(r.norm() > RCOND_TOL.sqrt() * norm) {
                return Err(Error::Singular {
                    block: "covariate".into(),
                    detail: format!("covariate `{}` is (nearly) constant within bins of x", data.w_names()[c]),
                });
            }
            mw.set_column(c, &r);
        }
        let my = DVector::from_vec(resid(y));
        lstsq(&mw, &my, "covariate").map_err(|e| match e {
            Error::Singular { detail, .. } => Error::Singular {
                block: "covariate".into(),
                detail: format!("{detail}; a covariate is collinear with the bins of x ({})", data.w_names().join(",")),
            },
            other => other,
        })?
        .iter()
        .cloned()
        .collect()
    } else {
        Vec::new()
    };

    let adj: Vec<f64> = (0..n)
        .map(|i| y[i] - (0..d).map(|c| data.w()[(i, c)] * gamma[c]).sum::<f64>())
        .collect();
    let beta = chol.solve(&cross_vec(k, &rows, &adj));
    let residuals = adj.iter().zip(&rows).map(|(a, r)| a - r.dot(&beta)).collect();

    // store Q = B'B / n and its factor
    let mut q = gram;
    q.scale(1.0 / n as f64);
    let chol = q.cholesky().map_err(|f| Error::Singular {
        block: "basis".into(),
        detail: format!("scaled Gram matrix lost definiteness at {}", f.pivot),
    })?;
    Ok(FitResult { spec: spec.clone(), beta, gamma, gram: q, chol, residuals, rows, w_means: data.w_means() })
}

impl FitResult {
    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn partition(&self) -> &QuantilePartition {
        self.spec.partition()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// `Q̂ = (1/n) Σ b(x_i) b(x_i)'`.
    pub fn gram(&self) -> &BandedSym {
        &self.gram
    }

    pub fn gram_factor(&self) -> &BandedCholesky {
        &self.chol
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn rows(&self) -> &[SparseBasisRow] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// `μ̂^(v)(x)`, the basis part of the fit (no covariate contribution).
    pub fn evaluate(&self, x: f64, deriv: usize) -> Result<f64> {
        Ok(self.spec.eval(x, deriv)?.dot(&self.beta))
    }

    /// `w̄'γ̂`, added to the dots so they sit on the scale of `y`.
    pub fn display_shift(&self) -> f64 {
        self.w_means.iter().zip(&self.gamma).map(|(a, b)| a * b).sum()
    }

    /// One dot per bin at the bin midpoint, shifted by [`display_shift`](Self::display_shift).
    pub fn dots(&self) -> Vec<Dot> {
        let shift = self.display_shift();
        let part = self.spec.partition();
        part.centers()
            .into_iter()
            .enumerate()
            .map(|(j, c)| Dot { x: c, y: self.spec.eval_in_bin(c, j, 0).dot(&self.beta) + shift })
            .collect()
    }
}

/// Residualized comparator: regress `y` and `x` on `(1, w)`, add back the
/// sample means, then fit order `(p, s)` with `bins` quantile bins on the
/// residualized regressor. Not a valid covariate adjustment in general.
pub fn fit_residualized(data: &Dataset, p: usize, s: usize, bins: usize) -> Result<(Dataset, FitResult)> {
    let d = data.d();
    if d == 0 {
        return Err(Error::Config("residualized comparison needs at least one covariate".into()));
    }
    let n = data.n();
    let design = DMatrix::from_fn(n, d + 1, |i, c| if c == 0 { 1.0 } else { data.w()[(i, c - 1)] });
    let resid = |v: &[f64]| -> Result<Vec<f64>> {
        let target = DVector::from_column_slice(v);
        let coef = lstsq(&design, &target, "covariate")?;
        let fitted = &design * coef;
        let mean = v.iter().sum::<f64>() / n as f64;
        Ok(v.iter().zip(fitted.iter()).map(|(a, f)| a - f + mean).collect())
    };
    let yt = resid(data.y())?;
    let xt = resid(data.x())?;
    let tilde = Dataset::from_xy(yt, xt)?;
    let part = QuantilePartition::build(&tilde, &tilde.sort_index(), bins)?;
    let spec = BasisSpec::new(p, s, part)?;
    let fit = fit_binscatter(&tilde, &spec)?;
    Ok((tilde, fit))
}
