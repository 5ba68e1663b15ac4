//! IMSE-optimal number of bins: rule-of-thumb and direct plug-in selectors.

pub mod polys;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{factorial, falling, BasisSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fit::{cross_vec, fit_binscatter, FitResult};
use crate::linalg::lstsq;
use crate::partition::QuantilePartition;
use crate::variance::{sandwich, VceMode};

pub use polys::{bernoulli_number, bernoulli_poly, gauss_legendre, legendre_sq_integral};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rot,
    #[default]
    Dpi,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rot" => Ok(Method::Rot),
            "dpi" => Ok(Method::Dpi),
            _ => Err(Error::Config(format!("unknown selector `{s}` (expected rot or dpi)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImseConstants {
    pub variance_const: f64,
    pub bias_const: f64,
    pub p: usize,
    pub s: usize,
    pub v: usize,
    pub method: Method,
}

/// Outcome of a selector run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub bins: usize,
    pub constants: ImseConstants,
    /// Pre-ceiling optimum, before clamping.
    pub raw: f64,
    /// Preliminary J used by the plug-in selector.
    pub j_pre: Option<usize>,
    pub warnings: Vec<String>,
}

/// Unrounded `(2(p-v+1)ℬ / ((1+2v)𝒱))^(1/(2p+3)) n^(1/(2p+3))`.
pub fn imse_optimal_j_raw(c: &ImseConstants, n: usize) -> Result<f64> {
    if !(c.variance_const > 0.0) || !c.variance_const.is_finite() {
        return Err(Error::Selection(format!("variance constant must be positive, got {}", c.variance_const)));
    }
    if !(c.bias_const >= 0.0) || !c.bias_const.is_finite() {
        return Err(Error::Selection(format!("bias constant must be finite and non-negative, got {}", c.bias_const)));
    }
    let (p, v) = (c.p as f64, c.v as f64);
    let e = 1.0 / (2.0 * p + 3.0);
    let ratio = 2.0 * (p - v + 1.0) * c.bias_const / ((1.0 + 2.0 * v) * c.variance_const);
    Ok(ratio.powf(e) * (n as f64).powf(e))
}

/// Ceiling of [`imse_optimal_j_raw`].
pub fn imse_optimal_j(c: &ImseConstants, n: usize) -> Result<usize> {
    Ok(imse_optimal_j_raw(c, n)?.ceil() as usize)
}

/// Largest J the data support for an order-(p, s) fit with `d` covariates.
pub fn max_bins(n: usize, distinct: usize, p: usize, s: usize, d: usize) -> usize {
    let mut j = distinct.min(n);
    while j > 2 && (p + 1) * j - s * (j - 1) + d >= n {
        j -= 1;
    }
    j.max(2)
}

fn finish(c: ImseConstants, data: &Dataset, scale: f64, j_pre: Option<usize>) -> Result<Selection> {
    let n = data.n();
    let distinct = data.sort_index().distinct_count;
    let hi = max_bins(n, distinct, c.p, c.s, data.d());
    let mut warnings = Vec::new();
    if c.variance_const <= 1e-12 * scale {
        let msg = format!("variance constant is numerically zero ({:.3e}); using the largest feasible J = {hi}", c.variance_const);
        log::warn!("{msg}");
        warnings.push(msg);
        return Ok(Selection { bins: hi, constants: c, raw: f64::INFINITY, j_pre, warnings });
    }
    let raw = imse_optimal_j_raw(&c, n)?;
    let degenerate = c.bias_const <= 1e-12 * c.variance_const;
    let bins = if degenerate || raw < 2.0 {
        let msg = if degenerate {
            format!("bias constant is numerically zero ({:.3e}); the IMSE trade-off is degenerate, using J = 2", c.bias_const)
        } else {
            format!("IMSE-optimal J = {raw:.3} is below 2; using J = 2 (degenerate bias)")
        };
        log::warn!("{msg}");
        warnings.push(msg);
        2
    } else {
        let j = raw.ceil() as usize;
        if j > hi {
            let msg = format!("IMSE-optimal J = {j} exceeds the feasible maximum {hi}; clamped");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        j.min(hi)
    };
    Ok(Selection { bins: bins.min(hi), constants: c, raw, j_pre, warnings })
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// `tr{(∫ψψ')⁻¹ ∫ψ^(v)ψ^(v)'}` for the monomials `ψ = (1, z, …, z^p)` on [0, 1].
pub fn rot_variance_trace(p: usize, v: usize) -> f64 {
    let g = DMatrix::from_fn(p + 1, p + 1, |a, b| 1.0 / (a + b + 1) as f64);
    let d = DMatrix::from_fn(p + 1, p + 1, |a, b| {
        if a < v || b < v {
            0.0
        } else {
            falling(a, v) * falling(b, v) / (a + b - 2 * v + 1) as f64
        }
    });
    let sol = g.lu().solve(&d).expect("Hilbert matrix is invertible for small p");
    sol.trace()
}

/// Rule-of-thumb selector: Gaussian reference density and global
/// polynomial pilots of degree `p + 1`.
/// Runs the chosen selector with default plug-in options.
pub fn select(data: &Dataset, p: usize, s: usize, v: usize, method: Method, vce: VceMode) -> Result<Selection> {
    match method {
        Method::Rot => rot_select(data, p, s, v),
        Method::Dpi => dpi_select(data, p, s, v, DpiOptions { j_pre: None, vce }),
    }
}

pub fn rot_select(data: &Dataset, p: usize, s: usize, v: usize) -> Result<Selection> {
    let c = rot_constants(data, p, s, v)?;
    let scale = sample_variance(data.y()).max(f64::MIN_POSITIVE);
    finish(c, data, scale, None)
}

pub fn rot_constants(data: &Dataset, p: usize, s: usize, v: usize) -> Result<ImseConstants> {
    check_orders(p, s, v)?;
    let n = data.n();
    let d = data.d();
    let x = data.x();
    let mx = x.iter().sum::<f64>() / n as f64;
    let sx = sample_variance(x).sqrt();
    if !(sx > 0.0) {
        return Err(Error::Selection("x has no spread; cannot fit the reference density".into()));
    }
    let cols = p + 2 + d;
    if n <= cols {
        return Err(Error::Selection(format!("need more than {cols} observations for the rule-of-thumb pilot")));
    }
    let design = DMatrix::from_fn(n, cols, |i, c| {
        if c <= p + 1 {
            ((x[i] - mx) / sx).powi(c as i32)
        } else {
            data.w()[(i, c - p - 2)]
        }
    });
    let pilot = |target: &[f64]| -> Result<DVector<f64>> {
        lstsq(&design, &DVector::from_column_slice(target), "pilot")
            .map_err(|e| Error::Selection(format!("degenerate rule-of-thumb pilot fit: {e}")))
    };
    let y = data.y();
    let c1 = pilot(y)?;
    let y2: Vec<f64> = y.iter().map(|v| v * v).collect();
    let c2 = pilot(&y2)?;
    let m1 = &design * &c1;
    let m2 = &design * &c2;
    let floor = 1e-10 * sample_variance(y);
    // degree-(p+1) polynomial: its (p+1)-th derivative is constant
    let deriv = c1[p + 1] * factorial(p + 1) / sx.powi(p as i32 + 1);
    let norm = statrs::distribution::Normal::new(mx, sx)
        .map_err(|e| Error::Selection(format!("reference density: {e}")))?;
    use statrs::distribution::Continuous;
    let (mut vsum, mut bsum) = (0.0, 0.0);
    for i in 0..n {
        let f = norm.pdf(x[i]);
        let s2 = (m2[i] - m1[i] * m1[i]).max(floor);
        vsum += s2 * f.powi(2 * v as i32);
        bsum += deriv * deriv / f.powi((2 * p + 2 - 2 * v) as i32);
    }
    let variance_const = rot_variance_trace(p, v) * vsum / n as f64;
    let m = p + 1 - v;
    let bias_const = polys::legendre_sq_integral(m) / polys::factorial_sq(m) * bsum / n as f64;
    Ok(ImseConstants { variance_const, bias_const, p, s, v, method: Method::Rot })
}

fn check_orders(p: usize, s: usize, v: usize) -> Result<()> {
    if s > p {
        return Err(Error::Config(format!("smoothness s={s} exceeds p={p}")));
    }
    if v > p {
        return Err(Error::Config(format!("derivative order v={v} exceeds p={p}")));
    }
    Ok(())
}

/// Options for the direct plug-in selector.
#[derive(Debug, Clone, Copy, Default)]
pub struct DpiOptions {
    pub j_pre: Option<usize>,
    pub vce: VceMode,
}

/// Direct plug-in selector on a preliminary partition.
pub fn dpi_select(data: &Dataset, p: usize, s: usize, v: usize, opts: DpiOptions) -> Result<Selection> {
    let (c, j_pre) = dpi_constants(data, p, s, v, opts)?;
    let scale = sample_variance(data.y()).max(f64::MIN_POSITIVE);
    finish(c, data, scale, Some(j_pre))
}

/// Pieces of the plug-in computation, exposed for diagnostics.
#[derive(Debug, Clone)]
pub struct DpiPieces {
    pub fit: FitResult,
    pub pilot: FitResult,
    pub constants: ImseConstants,
}

pub fn dpi_constants(data: &Dataset, p: usize, s: usize, v: usize, opts: DpiOptions) -> Result<(ImseConstants, usize)> {
    let pieces = dpi_pieces(data, p, s, v, opts)?;
    let j = pieces.fit.partition().bins();
    Ok((pieces.constants, j))
}

pub fn dpi_pieces(data: &Dataset, p: usize, s: usize, v: usize, opts: DpiOptions) -> Result<DpiPieces> {
    check_orders(p, s, v)?;
    let j_pre = match opts.j_pre {
        Some(j) => j,
        None => rot_select(data, p, s, v)?.bins,
    };
    let sort = data.sort_index();
    let part = QuantilePartition::build(data, &sort, j_pre)?;
    let spec = BasisSpec::new(p, s, part.clone())?;
    let pilot_spec = BasisSpec::new(p + 1, (s + 1).min(p + 1), part.clone())?;
    let need = pilot_spec.dim() + data.d();
    if data.n() <= need {
        return Err(Error::Selection(format!(
            "preliminary J={j_pre} too large for the order-{} pilot fit ({} observations, need more than {need})",
            p + 1,
            data.n()
        )));
    }
    let pilot_err = |order: usize| {
        move |e| match e {
            Error::Singular { detail, .. } => {
                Error::Selection(format!("order-{order} fit on the preliminary J={j_pre} partition failed: {detail}"))
            }
            other => other,
        }
    };
    let fit = fit_binscatter(data, &spec).map_err(pilot_err(p))?;
    let pilot = fit_binscatter(data, &pilot_spec).map_err(pilot_err(p + 1))?;
    let vm = sandwich(&fit, data, opts.vce)?;

    let bins = part.bins();
    let jf = bins as f64;
    let k = spec.dim();
    let (nodes, weights) = gauss_legendre(p + 2);

    // ∫ b^(v) b^(v)' ω̂ with ω̂ the per-bin empirical density
    let mut m = DMatrix::zeros(k, k);
    for j in 0..bins {
        let (lo, h) = (part.knots()[j], part.widths()[j]);
        let omega = part.bin_density(j);
        for (z, wq) in nodes.iter().zip(&weights) {
            let row = spec.eval_in_bin(lo + z * h, j, v);
            let c = wq * h * omega;
            for (a, va) in row.indices().zip(&row.values) {
                for (b, vb) in row.indices().zip(&row.values) {
                    m[(a, b)] += c * va * vb;
                }
            }
        }
    }
    let cov = vm.coef_covariance(&fit);
    let variance_const = (cov * m).trace() / jf.powi(1 + 2 * v as i32);

    // leading approximation error r(x) = μ^(p+1)(x) h^(p+1) ℰ_{p+1}(z) / (p+1)!
    let x = data.x();
    let pf = factorial(p + 1);
    let mut r = Vec::with_capacity(x.len());
    for &xi in x {
        let j = part.bin_of(xi);
        let (lo, h) = (part.knots()[j], part.widths()[j]);
        let d = pilot.spec().eval_in_bin(xi, j, p + 1).dot(pilot.beta());
        r.push(d * h.powi(p as i32 + 1) * bernoulli_poly(p + 1, (xi - lo) / h) / pf);
    }
    let n = x.len() as f64;
    let mut rhs = cross_vec(k, fit.rows(), &r);
    rhs.iter_mut().for_each(|v| *v /= n);
    let proj = fit.gram_factor().solve(&rhs);

    let mv = p + 1 - v;
    let mut bias_int = 0.0;
    for j in 0..bins {
        let (lo, h) = (part.knots()[j], part.widths()[j]);
        let omega = part.bin_density(j);
        for (z, wq) in nodes.iter().zip(&weights) {
            let xq = lo + z * h;
            let d = pilot.spec().eval_in_bin(xq, j, p + 1).dot(pilot.beta());
            let lead = d * h.powi(mv as i32) * bernoulli_poly(mv, *z) / factorial(mv);
            let b = spec.eval_in_bin(xq, j, v).dot(&proj) - lead;
            bias_int += wq * h * omega * b * b;
        }
    }
    let bias_const = jf.powi(2 * mv as i32) * bias_int;
    let constants = ImseConstants { variance_const, bias_const, p, s, v, method: Method::Dpi };
    Ok(DpiPieces { fit, pilot, constants })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, Uniform};

    fn consts(b: f64, v: f64, p: usize, dv: usize) -> ImseConstants {
        ImseConstants { variance_const: v, bias_const: b, p, s: 0, v: dv, method: Method::Rot }
    }

    #[test]
    fn imse_formula_arithmetic() {
        assert_eq!(imse_optimal_j(&consts(1.0, 1.0, 0, 0), 1000).unwrap(), 13);
        let a = imse_optimal_j_raw(&consts(1.0, 1.0, 1, 0), 5000).unwrap();
        let b = imse_optimal_j_raw(&consts(2.0, 1.0, 1, 0), 5000).unwrap();
        assert!((b / a - 2f64.powf(0.2)).abs() < 1e-12);
        assert!(matches!(imse_optimal_j(&consts(1.0, 0.0, 0, 0), 10), Err(Error::Selection(_))));
        // v = p keeps the n-rate
        let r1 = imse_optimal_j_raw(&consts(1.0, 1.0, 2, 2), 1000).unwrap();
        let r2 = imse_optimal_j_raw(&consts(1.0, 1.0, 2, 2), 128_000).unwrap();
        assert!((r2 / r1 - 128f64.powf(1.0 / 7.0)).abs() < 1e-12);
    }

    #[test]
    fn j_nondecreasing_in_n() {
        let c = consts(0.3, 0.7, 1, 0);
        let mut last = 0;
        for n in (100..5000).step_by(37) {
            let j = imse_optimal_j(&c, n).unwrap();
            assert!(j >= last);
            last = j;
        }
    }

    #[test]
    fn rot_trace_is_dimension_for_v0() {
        for p in 0..4 {
            assert!((rot_variance_trace(p, 0) - (p + 1) as f64).abs() < 1e-8);
        }
    }

    fn sample(n: usize, seed: u64, slope: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Uniform::new(0.0, 1.0).unwrap();
        let e = Normal::new(0.0, 0.5).unwrap();
        let x: Vec<f64> = (0..n).map(|_| u.sample(&mut rng)).collect();
        let y = x.iter().map(|v| slope * v + e.sample(&mut rng)).collect();
        Dataset::from_xy(y, x).unwrap()
    }

    #[test]
    fn rot_p0_reduces_to_closed_form() {
        let data = sample(2000, 1, 1.0);
        let c = rot_constants(&data, 0, 0, 0).unwrap();
        // 𝒱 is the mean residual variance of the linear pilot
        assert!((c.variance_const - 0.25).abs() < 0.03, "{}", c.variance_const);
        assert!(c.bias_const > 0.0);
    }

    #[test]
    fn rot_invariant_to_response_shift() {
        let data = sample(500, 2, 1.0);
        let shifted = data.with_y(data.y().iter().map(|v| v + 100.0).collect()).unwrap();
        let a = rot_constants(&data, 1, 1, 0).unwrap();
        let b = rot_constants(&shifted, 1, 1, 0).unwrap();
        assert!((a.bias_const - b.bias_const).abs() < 1e-9 * a.bias_const);
        assert!((a.variance_const - b.variance_const).abs() < 1e-6 * a.variance_const);
    }

    #[test]
    fn degenerate_bias_uses_two_bins() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = Uniform::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..300).map(|_| u.sample(&mut rng)).collect();
        let w = DMatrix::from_fn(300, 1, |_, _| u.sample(&mut rng));
        let y = w.column(0).iter().cloned().collect();
        let data = Dataset::new(y, x, w, None).unwrap();
        let sel = rot_select(&data, 0, 0, 0).unwrap();
        assert_eq!(sel.bins, 2);
        assert!(!sel.warnings.is_empty());
    }

    #[test]
    fn noise_free_dpi_uses_max_bins() {
        let x: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        let data = Dataset::from_xy(x.iter().map(|v| 1.0 + 2.0 * v).collect(), x).unwrap();
        let sel = dpi_select(&data, 1, 1, 0, DpiOptions { j_pre: Some(5), ..Default::default() }).unwrap();
        assert_eq!(sel.bins, max_bins(200, 200, 1, 1, 0));
        assert!(!sel.warnings.is_empty());
    }

    #[test]
    fn selectors_stay_in_range() {
        for seed in 0..5 {
            let data = sample(400, seed, 3.0);
            for (p, s) in [(0, 0), (1, 1), (2, 1), (3, 3)] {
                let r = rot_select(&data, p, s, 0).unwrap();
                assert!(r.bins >= 2 && r.bins <= 400);
                let d = dpi_select(&data, p, s, 0, DpiOptions::default()).unwrap();
                assert!(d.bins >= 2 && d.bins <= 400);
                assert!(d.constants.variance_const > 0.0 && d.constants.bias_const >= 0.0);
            }
        }
    }

    #[test]
    fn dpi_p0_variance_near_noise_level() {
        let data = sample(4000, 7, 5.0);
        let (c, _) = dpi_constants(&data, 0, 0, 0, DpiOptions { j_pre: Some(10), ..Default::default() }).unwrap();
        assert!((c.variance_const - 0.25).abs() < 0.03, "{}", c.variance_const);
        // uniform x, slope 5: ℬ(0,0,0) = 25/12; the pilot slope noise inflates it slightly
        assert!((c.bias_const / (25.0 / 12.0) - 1.0).abs() < 0.15, "{}", c.bias_const);
    }

    #[test]
    fn pilot_too_large_is_selection_error() {
        let data = sample(30, 8, 1.0);
        let err = dpi_select(&data, 1, 0, 0, DpiOptions { j_pre: Some(12), ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::Selection(_)), "{err}");
    }
}
