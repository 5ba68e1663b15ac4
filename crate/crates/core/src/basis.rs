//! Binscatter basis on a quantile partition.
//!
//! With smoothness `s = 0` the basis is the rescaled piecewise polynomial
//! `√J · 1{x ∈ B_j} ((x - τ_{j-1}) / h_j)^α`, α = 0..p. With `1 ≤ s ≤ p`
//! it is the order-(p+1) B-spline basis whose interior knots repeat
//! `p - s + 1` times, also scaled by `√J`. Either way the fitted values do
//! not depend on the scaling.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::partition::QuantilePartition;

/// Polynomial order, smoothness and the partition they live on.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    p: usize,
    s: usize,
    partition: QuantilePartition,
    knots: Option<ExtendedKnots>,
}

/// Active entries of a basis evaluation. The active indices are always a
/// contiguous run starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBasisRow {
    pub start: usize,
    pub values: Vec<f64>,
}

impl SparseBasisRow {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.start..self.start + self.values.len()
    }

    pub fn dot(&self, coef: &[f64]) -> f64 {
        self.values.iter().zip(&coef[self.start..]).map(|(v, c)| v * c).sum()
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        out[self.start..self.start + self.values.len()].copy_from_slice(&self.values);
        out
    }
}

/// Open knot vector: both end points stacked `p + 1` times, each interior
/// quantile knot repeated `p - s + 1` times.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedKnots {
    pub xi: Vec<f64>,
}

impl ExtendedKnots {
    pub fn build(partition: &QuantilePartition, p: usize, s: usize) -> Result<Self> {
        if s == 0 || s > p {
            return Err(Error::Unsupported(format!(
                "extended knots need 1 <= s <= p (got p={p}, s={s})"
            )));
        }
        let knots = partition.knots();
        let bins = partition.bins();
        let mult = p - s + 1;
        let mut xi = Vec::with_capacity(2 * (p + 1) + mult * (bins - 1));
        xi.extend(std::iter::repeat_n(knots[0], p + 1));
        for &t in &knots[1..bins] {
            xi.extend(std::iter::repeat_n(t, mult));
        }
        xi.extend(std::iter::repeat_n(knots[bins], p + 1));
        Ok(ExtendedKnots { xi })
    }
}

impl BasisSpec {
    pub fn new(p: usize, s: usize, partition: QuantilePartition) -> Result<Self> {
        if s > p {
            return Err(Error::Config(format!("smoothness s={s} exceeds polynomial order p={p}")));
        }
        let knots = if s >= 1 { Some(ExtendedKnots::build(&partition, p, s)?) } else { None };
        Ok(BasisSpec { p, s, partition, knots })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn partition(&self) -> &QuantilePartition {
        &self.partition
    }

    pub fn extended_knots(&self) -> Option<&ExtendedKnots> {
        self.knots.as_ref()
    }

    /// Basis dimension `(p+1)J - s(J-1)`.
    pub fn dim(&self) -> usize {
        let j = self.partition.bins();
        (self.p + 1) * j - self.s * (j - 1)
    }

    /// Half-width of the Gram matrix band.
    pub fn bandwidth(&self) -> usize {
        self.p
    }

    fn scale(&self) -> f64 {
        (self.partition.bins() as f64).sqrt()
    }

    /// Same order and smoothness on another partition.
    pub fn with_partition(&self, partition: QuantilePartition) -> Result<Self> {
        Self::new(self.p, self.s, partition)
    }

    /// Evaluates the `deriv`-th derivative of every basis function at `x`.
    pub fn eval(&self, x: f64, deriv: usize) -> Result<SparseBasisRow> {
        if deriv > self.p {
            return Err(Error::Config(format!("derivative order v={deriv} exceeds p={}", self.p)));
        }
        let j = self.partition.locate_bin(x)?;
        Ok(self.eval_in_bin(x, j, deriv))
    }

    /// Evaluation with the bin already known (`x` must lie in bin `j`, or on
    /// its right edge to get the left limit).
    pub fn eval_in_bin(&self, x: f64, j: usize, deriv: usize) -> SparseBasisRow {
        match &self.knots {
            None => self.eval_unconstrained(x, j, deriv),
            Some(k) => self.eval_spline(k, x, j, deriv),
        }
    }

    fn eval_unconstrained(&self, x: f64, j: usize, deriv: usize) -> SparseBasisRow {
        let p = self.p;
        let lo = self.partition.knots()[j];
        let h = self.partition.widths()[j];
        let z = (x - lo) / h;
        let scale = self.scale() / h.powi(deriv as i32);
        let values = (0..=p)
            .map(|a| {
                if a < deriv {
                    0.0
                } else {
                    scale * falling(a, deriv) * z.powi((a - deriv) as i32)
                }
            })
            .collect();
        SparseBasisRow { start: j * (p + 1), values }
    }

    fn eval_spline(&self, knots: &ExtendedKnots, x: f64, j: usize, deriv: usize) -> SparseBasisRow {
        let p = self.p;
        let span = p + j * (p - self.s + 1);
        let mut values = bspline_ders(&knots.xi, span, p, x, deriv);
        let sc = self.scale();
        values.iter_mut().for_each(|v| *v *= sc);
        SparseBasisRow { start: span - p, values }
    }

    /// Transformation from the unconstrained piecewise basis to the spline
    /// basis, available for `s = p` (and trivially `s = 0`).
    pub fn transformation_matrix(&self) -> Result<TransformMatrix> {
        let p = self.p;
        let bins = self.partition.bins();
        let cols = (p + 1) * bins;
        if self.s == 0 {
            let rows = (0..cols).map(|i| vec![(i, 1.0)]).collect();
            return Ok(TransformMatrix { rows, cols });
        }
        if self.s != p {
            return Err(Error::Unsupported(format!(
                "closed-form transformation only for s = p (got p={p}, s={}); evaluate the spline basis directly",
                self.s
            )));
        }
        let xi = &self.knots.as_ref().expect("spline knots").xi;
        let tau = self.partition.knots();
        let widths = self.partition.widths();
        let k_dim = self.dim();
        let mut rows = Vec::with_capacity(k_dim);
        for i in 0..k_dim {
            let local = &xi[i..=i + p + 1];
            let span_len = local[p + 1] - local[0];
            // distinct knots of this function and their multiplicities
            let mut nodes: Vec<(f64, usize)> = Vec::new();
            for &t in local {
                match nodes.last_mut() {
                    Some((u, m)) if *u == t => *m += 1,
                    _ => nodes.push((t, 1)),
                }
            }
            let taylor: Vec<Vec<f64>> = (0..nodes.len()).map(|k| inv_node_poly_taylor(&nodes, k)).collect();
            let sign = if (p + 1) % 2 == 0 { 1.0 } else { -1.0 };
            let mut entries = Vec::new();
            for j in 0..bins {
                if tau[j] < local[0] || tau[j + 1] > local[p + 1] {
                    continue;
                }
                let h = widths[j];
                for a in 0..=p {
                    let mut c = 0.0;
                    for (k, &(u, m)) in nodes.iter().enumerate() {
                        if u > tau[j] {
                            break;
                        }
                        for r in 0..m.min(p - a + 1) {
                            let phi = taylor[k][m - 1 - r];
                            let dr = if r % 2 == 0 { 1.0 } else { -1.0 } * falling(p, r) / factorial(r);
                            c += phi * dr * binom(p - r, a) * (tau[j] - u).powi((p - r - a) as i32);
                        }
                    }
                    let c = sign * span_len * c * h.powi(a as i32);
                    entries.push((j * (p + 1) + a, c));
                }
            }
            rows.push(entries);
        }
        Ok(TransformMatrix { rows, cols })
    }
}

/// Sparse row-oriented matrix mapping piecewise coefficients to spline
/// basis values: `b_s(x) = T b_0(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformMatrix {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub cols: usize,
}

impl TransformMatrix {
    /// Applies `T` to a sparse evaluation of the unconstrained basis.
    pub fn apply(&self, b0: &SparseBasisRow) -> Vec<f64> {
        let dense = b0.to_dense(self.cols);
        self.rows.iter().map(|r| r.iter().map(|&(c, v)| v * dense[c]).sum()).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), self.cols);
        for (i, r) in self.rows.iter().enumerate() {
            for &(c, v) in r {
                m[(i, c)] = v;
            }
        }
        m
    }

    pub fn row_nnz(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.iter().filter(|e| e.1 != 0.0).count()).collect()
    }

    pub fn col_nnz(&self) -> Vec<usize> {
        let mut c = vec![0; self.cols];
        for r in &self.rows {
            for &(j, v) in r {
                if v != 0.0 {
                    c[j] += 1;
                }
            }
        }
        c
    }
}

/// Taylor coefficients at node `k` of `1 / Π_{k'≠k} (t - u_{k'})^{m_{k'}}`,
/// up to degree `m_k - 1`.
fn inv_node_poly_taylor(nodes: &[(f64, usize)], k: usize) -> Vec<f64> {
    let (uk, mk) = nodes[k];
    let mut acc = vec![0.0; mk];
    acc[0] = 1.0;
    for (kk, &(u, m)) in nodes.iter().enumerate() {
        if kk == k {
            continue;
        }
        let d = uk - u;
        // (d + δ)^(-m) = Σ_q (-1)^q C(m+q-1, q) d^(-m-q) δ^q
        let series: Vec<f64> = (0..mk)
            .map(|q| {
                let sgn = if q % 2 == 0 { 1.0 } else { -1.0 };
                sgn * binom(m + q - 1, q) * d.powi(-((m + q) as i32))
            })
            .collect();
        let mut next = vec![0.0; mk];
        for (a, &x) in acc.iter().enumerate() {
            for (b, &y) in series.iter().enumerate().take(mk - a) {
                next[a + b] += x * y;
            }
        }
        acc = next;
    }
    acc
}

/// Values of the `deriv`-th derivative of the `p + 1` B-splines of degree
/// `p` that are nonzero on knot span `span` (`xi[span] < xi[span + 1]`).
///
/// Cox-de Boor recursion; a term whose knot difference vanishes contributes
/// zero.
pub fn bspline_ders(xi: &[f64], span: usize, p: usize, x: f64, deriv: usize) -> Vec<f64> {
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
    // table[k][r]: degree-k B-spline with index span - k + r, r = 0..=k
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    table.push(vec![1.0]);
    for k in 1..=p {
        let prev = &table[k - 1];
        let mut cur = vec![0.0; k + 1];
        for r in 0..=k {
            let i = span + r - k;
            let left = if r >= 1 { ratio(x - xi[i], xi[i + k] - xi[i]) * prev[r - 1] } else { 0.0 };
            let right = if r < k { ratio(xi[i + k + 1] - x, xi[i + k + 1] - xi[i + 1]) * prev[r] } else { 0.0 };
            cur[r] = left + right;
        }
        table.push(cur);
    }
    if deriv == 0 {
        return table.pop().unwrap();
    }
    // Differentiate `deriv` times: B^{(v)}_{i,p} = p!/(p-v)! Σ_k a_{v,k} B_{i+k,p-v},
    // with a_{v,k} built from guarded knot-difference quotients.
    let base = &table[p - deriv];
    let mut out = vec![0.0; p + 1];
    for r in 0..=p {
        let i = span + r - p;
        // coefficients of B_{i+k, p-deriv}, k = 0..=deriv
        let mut a = vec![1.0];
        for q in 1..=deriv {
            let deg = p - q + 1;
            let mut na = vec![0.0; q + 1];
            for (k, &ak) in a.iter().enumerate() {
                na[k] += ratio(ak, xi[i + k + deg] - xi[i + k]);
                na[k + 1] -= ratio(ak, xi[i + k + deg + 1] - xi[i + k + 1]);
            }
            a = na;
        }
        let mut sum = 0.0;
        for (k, &ak) in a.iter().enumerate() {
            // B_{i+k, p-deriv} sits at offset (i + k) - (span - (p - deriv)) in `base`
            let idx = (i + k) as isize - (span as isize - (p - deriv) as isize);
            if idx >= 0 && (idx as usize) < base.len() {
                sum += ak * base[idx as usize];
            }
        }
        out[r] = falling(p, deriv) * sum;
    }
    out
}

/// `a (a-1) ... (a-v+1)`.
pub(crate) fn falling(a: usize, v: usize) -> f64 {
    (0..v).map(|k| (a - k) as f64).product()
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub(crate) fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn uniform_partition(bins: usize, lo: f64, hi: f64) -> QuantilePartition {
        let knots: Vec<f64> = (0..=bins).map(|j| lo + (hi - lo) * j as f64 / bins as f64).collect();
        QuantilePartition::from_knots(knots, &[lo]).unwrap()
    }

    fn irregular_partition() -> QuantilePartition {
        QuantilePartition::from_knots(vec![0.0, 0.13, 0.2, 0.45, 0.5, 0.81, 1.0], &[0.0]).unwrap()
    }

    #[test]
    fn dimension_formula() {
        let part = uniform_partition(5, 0.0, 1.0);
        for p in 0..4 {
            for s in 0..=p {
                let b = BasisSpec::new(p, s, part.clone()).unwrap();
                assert_eq!(b.dim(), (p + 1) * 5 - s * 4);
                if let Some(k) = b.extended_knots() {
                    assert_eq!(k.xi.len(), 2 * (p + 1) + (p - s + 1) * 4);
                    assert_eq!(k.xi.len() - p - 1, b.dim());
                }
            }
        }
    }

    #[test]
    fn indicator_basis() {
        let part = uniform_partition(4, 0.0, 1.0);
        let b = BasisSpec::new(0, 0, part).unwrap();
        let r = b.eval(0.6, 0).unwrap();
        assert_eq!(r.start, 2);
        assert_eq!(r.values, vec![2.0]);
    }

    #[test]
    fn linear_left_edge() {
        let part = uniform_partition(4, 0.0, 1.0);
        let b = BasisSpec::new(1, 0, part).unwrap();
        let r = b.eval(0.25, 0).unwrap();
        assert_eq!(r.start, 2);
        assert_eq!(r.values, vec![2.0, 0.0]);
    }

    #[test]
    fn linear_derivative() {
        let part = QuantilePartition::from_knots(vec![0.0, 0.5, 1.0, 1.5, 2.0], &[0.0]).unwrap();
        let b = BasisSpec::new(1, 0, part).unwrap();
        let r = b.eval(0.7, 1).unwrap();
        assert_eq!(r.values, vec![0.0, 4.0]);
    }

    #[test]
    fn extended_knot_examples() {
        let part = uniform_partition(3, 0.0, 3.0);
        let k = ExtendedKnots::build(&part, 1, 1).unwrap();
        assert_eq!(k.xi, vec![0.0, 0.0, 1.0, 2.0, 3.0, 3.0]);
        let part = uniform_partition(2, 0.0, 2.0);
        let k = ExtendedKnots::build(&part, 2, 1).unwrap();
        assert_eq!(k.xi, vec![0.0, 0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        assert!(ExtendedKnots::build(&part, 2, 0).is_err());
    }

    #[test]
    fn hat_function_peak() {
        let part = uniform_partition(4, 0.0, 1.0);
        let b = BasisSpec::new(1, 1, part).unwrap();
        let r = b.eval(0.5, 0).unwrap();
        let active: Vec<(usize, f64)> = r.indices().zip(r.values.iter().cloned()).filter(|e| e.1 != 0.0).collect();
        assert_eq!(active, vec![(2, 2.0)]);
    }

    #[test]
    fn derivative_order_above_p_is_rejected() {
        let b = BasisSpec::new(1, 1, uniform_partition(3, 0.0, 1.0)).unwrap();
        assert!(matches!(b.eval(0.5, 2), Err(Error::Config(_))));
        assert!(matches!(b.eval(1.5, 0), Err(Error::OutOfSupport { .. })));
    }

    #[test]
    fn transformation_identity_for_s0() {
        let b = BasisSpec::new(0, 0, uniform_partition(4, 0.0, 1.0)).unwrap();
        let t = b.transformation_matrix().unwrap();
        assert_eq!(t.to_dense(), DMatrix::identity(4, 4));
        let b = BasisSpec::new(2, 1, uniform_partition(4, 0.0, 1.0)).unwrap();
        assert!(matches!(b.transformation_matrix(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn transformation_matches_spline_linear_uniform() {
        use rand::{Rng, SeedableRng};
        let part = uniform_partition(5, 0.0, 1.0);
        let b1 = BasisSpec::new(1, 1, part.clone()).unwrap();
        let b0 = BasisSpec::new(1, 0, part).unwrap();
        let t = b1.transformation_matrix().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x: f64 = rng.random_range(0.0..1.0);
            let lhs = t.apply(&b0.eval(x, 0).unwrap());
            let rhs = b1.eval(x, 0).unwrap().to_dense(b1.dim());
            for (a, b) in lhs.iter().zip(&rhs) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b} at {x}");
            }
        }
    }

    /// `(t_last - t_first) [t_0..t_{p+1}] (· - x)_+^p` by the recursive
    /// divided-difference table, repeated nodes filled with `g^(k)(t)/k!`.
    fn divided_difference_bspline(t: &[f64], p: usize, x: f64) -> f64 {
        let g = |u: f64, k: usize| -> f64 {
            if u <= x || k > p {
                0.0
            } else {
                falling(p, k) * (u - x).powi((p - k) as i32) / factorial(k)
            }
        };
        let m = t.len();
        let mut table: Vec<Vec<f64>> = vec![t.iter().map(|&u| g(u, 0)).collect()];
        for k in 1..m {
            let prev = &table[k - 1];
            let row = (0..m - k)
                .map(|i| {
                    if t[i + k] == t[i] {
                        g(t[i], k)
                    } else {
                        (prev[i + 1] - prev[i]) / (t[i + k] - t[i])
                    }
                })
                .collect();
            table.push(row);
        }
        (t[m - 1] - t[0]) * table[m - 1][0]
    }

    #[test]
    fn cubic_spline_matches_divided_difference_oracle() {
        let part = uniform_partition(4, 0.0, 1.0);
        let b = BasisSpec::new(3, 3, part).unwrap();
        let xi = b.extended_knots().unwrap().xi.clone();
        for &x in &[0.5, 0.1, 0.37, 0.999] {
            let dense = b.eval(x, 0).unwrap().to_dense(b.dim());
            for (k, &v) in dense.iter().enumerate() {
                let raw = v / 2.0;
                let oracle = divided_difference_bspline(&xi[k..k + 5], 3, x);
                assert!((raw - oracle).abs() < 1e-12, "k={k} x={x}: {raw} vs {oracle}");
            }
        }
    }

    #[test]
    fn transformation_matches_spline_irregular() {
        let part = irregular_partition();
        for p in 1..=3 {
            let bs = BasisSpec::new(p, p, part.clone()).unwrap();
            let b0 = BasisSpec::new(p, 0, part.clone()).unwrap();
            let t = bs.transformation_matrix().unwrap();
            for i in 0..=200 {
                let x = i as f64 / 200.0;
                let lhs = t.apply(&b0.eval(x, 0).unwrap());
                let rhs = bs.eval(x, 0).unwrap().to_dense(bs.dim());
                for (a, b) in lhs.iter().zip(&rhs) {
                    assert!((a - b).abs() < 1e-10, "p={p} x={x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn transformation_sparsity_bounds() {
        for p in 0..=3 {
            for bins in 2..=10 {
                let knots: Vec<f64> = (0..=bins).map(|j| (j as f64).powf(1.3)).collect();
                let part = QuantilePartition::from_knots(knots, &[0.0]).unwrap();
                let b = BasisSpec::new(p, p, part).unwrap();
                let t = b.transformation_matrix().unwrap();
                assert!(t.row_nnz().iter().all(|&c| c <= (p + 1) * (p + 1)));
                assert!(t.col_nnz().iter().all(|&c| c <= p + 1));
            }
        }
    }

    #[test]
    fn polynomial_reproduction() {
        // least-squares projection of x^k onto the basis leaves no residual
        let part = irregular_partition();
        for p in 0..=3 {
            for s in 0..=p {
                let b = BasisSpec::new(p, s, part.clone()).unwrap();
                let grid: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
                let design = DMatrix::from_fn(grid.len(), b.dim(), |i, k| {
                    b.eval(grid[i], 0).unwrap().to_dense(b.dim())[k]
                });
                for deg in 0..=p {
                    let y = nalgebra::DVector::from_fn(grid.len(), |i, _| {
                        grid[i].powi(deg as i32) - 0.3
                    });
                    let coef = design.clone().svd(true, true).solve(&y, 1e-14).unwrap();
                    let resid = (&design * coef - &y).amax();
                    assert!(resid < 1e-9, "p={p} s={s} deg={deg} resid={resid}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(x in 0.0f64..=1.0, p in 1usize..=4, s_off in 0usize..4) {
            let s = 1 + s_off % p;
            let b = BasisSpec::new(p, s, irregular_partition()).unwrap();
            let r = b.eval(x, 0).unwrap();
            let raw: f64 = r.values.iter().sum::<f64>() / 6f64.sqrt();
            prop_assert!((raw - 1.0).abs() < 1e-12);
            prop_assert!(r.values.len() <= p + 1);
            prop_assert!(r.start + r.values.len() <= b.dim());
        }

        #[test]
        fn derivative_matches_finite_difference(x in 0.02f64..0.98, p in 1usize..=4, s_off in 0usize..4, v in 1usize..=4) {
            let s = 1 + s_off % p;
            prop_assume!(v <= p);
            let part = irregular_partition();
            // stay away from knots where derivatives jump
            prop_assume!(part.knots().iter().all(|t| (x - t).abs() > 1e-3));
            let b = BasisSpec::new(p, s, part).unwrap();
            let h = 1e-6;
            let d = b.eval(x, v).unwrap().to_dense(b.dim());
            let up = b.eval(x + h, v - 1).unwrap().to_dense(b.dim());
            let dn = b.eval(x - h, v - 1).unwrap().to_dense(b.dim());
            for k in 0..b.dim() {
                let fd = (up[k] - dn[k]) / (2.0 * h);
                let scale = d[k].abs().max(1.0);
                prop_assert!((fd - d[k]).abs() <= 1e-5 * scale, "k={} fd={} an={}", k, fd, d[k]);
            }
        }
    }

    #[test]
    fn unconstrained_derivatives_match_finite_difference() {
        let b = BasisSpec::new(3, 0, irregular_partition()).unwrap();
        let x = 0.33;
        let h = 1e-6;
        for v in 1..=3 {
            let d = b.eval(x, v).unwrap();
            let up = b.eval(x + h, v - 1).unwrap();
            let dn = b.eval(x - h, v - 1).unwrap();
            for k in 0..4 {
                let fd = (up.values[k] - dn.values[k]) / (2.0 * h);
                assert_relative_eq!(fd, d.values[k], max_relative = 1e-5, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binom(5, 2), 10.0);
        assert_eq!(binom(4, 0), 1.0);
        assert_eq!(binom(3, 5), 0.0);
        assert_eq!(falling(4, 2), 12.0);
        assert_eq!(factorial(5), 120.0);
    }
}
