//! Sandwich variance of the basis coefficients and the pointwise variance
//! function `Ω̂(x) = b(x)'Q̂⁻¹Σ̂Q̂⁻¹b(x)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::basis::SparseBasisRow;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fit::FitResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VceMode {
    #[default]
    Hc0,
    Hc1,
    /// Residuals scaled by `1/(1 - h_ii)`, `h_ii` the basis leverage.
    Hc3,
    Cluster,
}

impl std::str::FromStr for VceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hc0" => Ok(VceMode::Hc0),
            "hc1" => Ok(VceMode::Hc1),
            "hc3" => Ok(VceMode::Hc3),
            "cluster" => Ok(VceMode::Cluster),
            _ => Err(Error::Config(format!("unknown variance mode `{s}` (expected hc0, hc1, hc3 or cluster)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VarianceModel {
    sigma: DMatrix<f64>,
    mode: VceMode,
    n: usize,
    n_eff: usize,
}

/// Heteroskedasticity-robust `Σ̂ = (1/n) Σ b_i b_i' ε̂_i²`, optionally with
/// the `n / (n - K - d)` small-sample factor.
pub fn sandwich(fit: &FitResult, data: &Dataset, mode: VceMode) -> Result<VarianceModel> {
    if mode == VceMode::Cluster {
        return sandwich_clustered(fit, data);
    }
    let groups: Vec<Vec<usize>> = (0..fit.n()).map(|i| vec![i]).collect();
    let n = fit.n();
    let mut sigma = if mode == VceMode::Hc3 {
        let scaled: Vec<f64> = fit
            .rows()
            .iter()
            .zip(fit.residuals())
            .map(|(r, e)| {
                let h = fit.gram_factor().quad_form_sparse(r.start, &r.values) / n as f64;
                e / (1.0 - h).max(1e-8)
            })
            .collect();
        meat_with(fit, &groups, &scaled)
    } else {
        cluster_meat(fit, &groups)
    };
    let mode = match mode {
        VceMode::Cluster => unreachable!(),
        VceMode::Hc1 => {
            let dof = n as f64 - (fit.spec().dim() + data.d()) as f64;
            if dof <= 0.0 {
                return Err(Error::SampleSize { n, required: fit.spec().dim() + data.d() });
            }
            sigma *= n as f64 / dof;
            VceMode::Hc1
        }
        VceMode::Hc0 => VceMode::Hc0,
        VceMode::Hc3 => VceMode::Hc3,
    };
    Ok(VarianceModel { sigma, mode, n, n_eff: n })
}

/// Cluster-robust `Σ̂ = (1/n) Σ_g u_g u_g'`, `u_g = Σ_{i∈g} b_i ε̂_i`.
pub fn sandwich_clustered(fit: &FitResult, data: &Dataset) -> Result<VarianceModel> {
    let labels = data
        .cluster()
        .ok_or_else(|| Error::Config("cluster-robust variance requested but no cluster column given".into()))?;
    let mut map: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &g) in labels.iter().enumerate() {
        map.entry(g).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = map.into_values().collect();
    let sigma = cluster_meat(fit, &groups);
    Ok(VarianceModel { sigma, mode: VceMode::Cluster, n: fit.n(), n_eff: groups.len() })
}

fn cluster_meat(fit: &FitResult, groups: &[Vec<usize>]) -> DMatrix<f64> {
    meat_with(fit, groups, fit.residuals())
}

fn meat_with(fit: &FitResult, groups: &[Vec<usize>], eps: &[f64]) -> DMatrix<f64> {
    let k = fit.spec().dim();
    let rows = fit.rows();
    let mut sigma = DMatrix::zeros(k, k);
    let mut u = vec![0.0; k];
    for g in groups {
        let (mut lo, mut hi) = (usize::MAX, 0);
        for &i in g {
            let r = &rows[i];
            for (c, b) in r.indices().zip(&r.values) {
                u[c] += b * eps[i];
            }
            lo = lo.min(r.start);
            hi = hi.max(r.start + r.values.len());
        }
        for a in lo..hi {
            if u[a] == 0.0 {
                continue;
            }
            for b in lo..hi {
                sigma[(a, b)] += u[a] * u[b];
            }
        }
        u[lo..hi].iter_mut().for_each(|v| *v = 0.0);
    }
    sigma / fit.n() as f64
}

impl VarianceModel {
    /// Model from an explicit meat matrix (used in tests and diagnostics).
    pub fn from_sigma(sigma: DMatrix<f64>, n: usize) -> Self {
        VarianceModel { sigma, mode: VceMode::Hc0, n, n_eff: n }
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn mode(&self) -> VceMode {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of independent units: `n`, or the cluster count.
    pub fn n_eff(&self) -> usize {
        self.n_eff
    }

    /// `Ω̂` at a basis row (values or derivatives).
    pub fn omega_row(&self, fit: &FitResult, row: &SparseBasisRow) -> f64 {
        let a = fit.gram_factor().solve(&row.to_dense(fit.spec().dim()));
        let sa = &self.sigma * nalgebra::DVector::from_column_slice(&a);
        a.iter().zip(sa.iter()).map(|(x, y)| x * y).sum::<f64>().max(0.0)
    }

    /// `Ω̂^(v)(x)`.
    pub fn omega(&self, fit: &FitResult, x: f64, deriv: usize) -> Result<f64> {
        Ok(self.omega_row(fit, &fit.spec().eval(x, deriv)?))
    }

    /// `Q̂⁻¹Σ̂Q̂⁻¹`, the coefficient covariance scaled by `n`.
    pub fn coef_covariance(&self, fit: &FitResult) -> DMatrix<f64> {
        let qs = fit.gram_factor().solve_matrix(&self.sigma);
        let qsq = fit.gram_factor().solve_matrix(&qs.transpose());
        (&qsq + qsq.transpose()) * 0.5
    }

    /// Square root `A` with `A A' = Q̂⁻¹Σ̂Q̂⁻¹`, from the eigendecomposition of
    /// `Σ̂`. Eigenvalues below `1e-12·tr Σ̂` are dropped.
    pub fn sqrt_factor(&self, fit: &FitResult) -> Result<DMatrix<f64>> {
        let k = self.sigma.nrows();
        let sym = (&self.sigma + self.sigma.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let trace = eig.eigenvalues.iter().map(|v| v.abs()).sum::<f64>();
        if trace == 0.0 {
            return Ok(DMatrix::zeros(k, 0));
        }
        let min = eig.eigenvalues.min();
        if min < -1e-8 * trace {
            return Err(Error::Variance(format!(
                "meat matrix is indefinite (eigenvalue {min:.3e}, trace {trace:.3e})"
            )));
        }
        // fixed column order: descending eigenvalue, ties by index
        let mut order: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i] > 1e-12 * trace).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        if order.len() < k {
            log::debug!("meat matrix rank {} of {}", order.len(), k);
        }
        let mut root = DMatrix::zeros(k, order.len());
        for (c, &i) in order.iter().enumerate() {
            let col = eig.eigenvectors.column(i) * eig.eigenvalues[i].sqrt();
            root.set_column(c, &col);
        }
        Ok(fit.gram_factor().solve_matrix(&root))
    }
}
