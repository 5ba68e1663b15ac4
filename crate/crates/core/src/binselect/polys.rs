//! Legendre and Bernoulli polynomial constants, and Gauss-Legendre nodes.

use crate::basis::{binom, factorial};

/// `∫₀¹ 𝓑_m(z)² dz` where `binom(2m, m) 𝓑_m` is the shifted Legendre
/// polynomial of degree `m`.
pub fn legendre_sq_integral(m: usize) -> f64 {
    let c = binom(2 * m, m);
    1.0 / ((2 * m + 1) as f64 * c * c)
}

/// Bernoulli numbers `B_0..=B_m` with `B_1 = -1/2`.
pub fn bernoulli_numbers(m: usize) -> Vec<f64> {
    let mut b = vec![0.0; m + 1];
    b[0] = 1.0;
    for k in 1..=m {
        // Σ_{j<k+1} C(k+1, j) B_j = 0
        let s: f64 = (0..k).map(|j| binom(k + 1, j) * b[j]).sum();
        b[k] = -s / (k + 1) as f64;
    }
    b
}

pub fn bernoulli_number(m: usize) -> f64 {
    bernoulli_numbers(m)[m]
}

/// Bernoulli polynomial `ℰ_m(z) = Σ_k C(m, k) B_k z^(m-k)`.
pub fn bernoulli_poly(m: usize, z: f64) -> f64 {
    let b = bernoulli_numbers(m);
    // Horner in z over descending powers
    (0..=m).fold(0.0, |acc, k| acc * z + binom(m, k) * b[k])
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(npts: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; npts];
    let mut weights = vec![0.0; npts];
    let nf = npts as f64;
    for i in 0..npts {
        // Chebyshev-like starting guess, then Newton on P_n
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(npts, t);
            dp = d;
            let step = p / d;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(npts, t);
        dp = if d != 0.0 { d } else { dp };
        nodes[npts - 1 - i] = 0.5 * (t + 1.0);
        weights[npts - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// `(m!)²`, used to normalize the bias constant.
pub(crate) fn factorial_sq(m: usize) -> f64 {
    factorial(m).powi(2)
}
