//! Population quantities of the simulated design, by quadrature.

use super::dgp::{beta24_pdf, beta24_quantile, DgpSpec};
use crate::binselect::gauss_legendre;

/// Integral of `g` over `[a, b]` with `panels` Gauss-Legendre panels.
fn integrate(g: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            nodes.iter().zip(&weights).map(|(t, w)| w * h * g(lo + t * h)).sum::<f64>()
        })
        .sum()
}

/// Integral over `[eps, 1 - eps]` with panels refined geometrically toward
/// both ends, for integrands that blow up at 0 and 1.
fn integrate_interior(g: &impl Fn(f64) -> f64, eps: f64) -> f64 {
    let mut cuts = vec![eps];
    let mut t = eps;
    while t * 2.0 < 0.5 {
        t *= 2.0;
        cuts.push(t);
    }
    cuts.push(0.5);
    let left: f64 = cuts.windows(2).map(|c| integrate(g, c[0], c[1], 4)).sum();
    let right: f64 = cuts.windows(2).map(|c| integrate(g, 1.0 - c[1], 1.0 - c[0], 4)).sum();
    left + right
}

/// `(1/12) ∫_ε^{1-ε} μ'(x)² / f(x) dx`, the limiting bias constant for
/// piecewise constants truncated away from the ends of the support.
pub fn limiting_bias_truncated(dgp: &DgpSpec, eps: f64) -> f64 {
    let g = |x: f64| dgp.mu_deriv(x, 1).powi(2) / beta24_pdf(x);
    integrate_interior(&g, eps) / 12.0
}

/// Population knots `F⁻¹(j/J)`.
pub fn population_knots(bins: usize) -> Vec<f64> {
    (0..=bins).map(|j| beta24_quantile(j as f64 / bins as f64)).collect()
}

/// `J² Σ_j ∫_{B_j} (μ - m_j)² f`, with `m_j` the population bin mean of `μ`,
/// on the population quantile partition. This is the finite-`J` bias
/// constant for piecewise constants; it stays bounded even when the limit
/// diverges.
pub fn population_bias_constant(dgp: &DgpSpec, bins: usize) -> f64 {
    let knots = population_knots(bins);
    let mut total = 0.0;
    for j in 0..bins {
        let (a, b) = (knots[j], knots[j + 1]);
        let mass = integrate(&beta24_pdf, a, b, 8);
        let mean = integrate(&|x| dgp.mu(x) * beta24_pdf(x), a, b, 8) / mass;
        total += integrate(&|x| (dgp.mu(x) - mean).powi(2) * beta24_pdf(x), a, b, 8);
    }
    total * (bins * bins) as f64
}

/// `E[σ²(x)]` under the design.
pub fn mean_noise_variance(dgp: &DgpSpec) -> f64 {
    integrate(&|x| dgp.noise_sd_at(x).powi(2) * beta24_pdf(x), 0.0, 1.0, 16)
}
