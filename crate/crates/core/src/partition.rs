//! Quantile-spaced partition of the support of `x`.
//!
//! Interior boundaries sit at the order statistics `x_(⌊jn/J⌋)` (1-based),
//! the outer boundaries at the sample minimum and maximum. Bins are
//! left-closed/right-open except the last, which is closed on both sides.
//! Coincident boundaries (ties in `x`) are merged, which lowers the
//! effective number of bins.

use serde::Serialize;

use crate::dataset::{Dataset, SortIndex};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantilePartition {
    knots: Vec<f64>,
    widths: Vec<f64>,
    counts: Vec<usize>,
    requested_bins: usize,
}

impl QuantilePartition {
    /// Builds the partition with `bins` quantile-spaced bins.
    pub fn build(data: &Dataset, sort: &SortIndex, bins: usize) -> Result<Self> {
        Self::from_sorted(&sort.sorted(data.x()), sort.distinct_count, bins)
    }

    /// Same as [`build`](Self::build) from an ascending copy of `x`.
    pub fn from_sorted(sorted: &[f64], distinct_count: usize, bins: usize) -> Result<Self> {
        let n = sorted.len();
        if bins < 2 {
            return Err(Error::Selection(format!("number of bins must be at least 2, got {bins}")));
        }
        if bins > distinct_count || bins > n {
            return Err(Error::Selection(format!(
                "requested {bins} bins but x has only {distinct_count} distinct values; choose a smaller J"
            )));
        }
        let mut knots = Vec::with_capacity(bins + 1);
        knots.push(sorted[0]);
        for j in 1..bins {
            let rank = j * n / bins;
            assert!(rank >= 1, "order statistic index must be positive");
            knots.push(sorted[rank - 1]);
        }
        knots.push(sorted[n - 1]);
        knots.dedup();
        if knots.len() < bins + 1 {
            log::warn!(
                "tied x values merged quantile knots: requested J={bins}, effective J={}",
                knots.len() - 1
            );
        }
        if knots.len() < 2 {
            return Err(Error::Selection("x has no spread; cannot form bins".into()));
        }
        let widths = knots.windows(2).map(|k| k[1] - k[0]).collect();
        let mut part = QuantilePartition { knots, widths, counts: Vec::new(), requested_bins: bins };
        let mut counts = vec![0usize; part.bins()];
        for &x in sorted {
            counts[part.bin_of(x)] += 1;
        }
        part.counts = counts;
        Ok(part)
    }

    /// Partition from explicit knots (strictly increasing). Counts are taken
    /// from `x`.
    pub fn from_knots(knots: Vec<f64>, x: &[f64]) -> Result<Self> {
        if knots.len() < 2 || knots.windows(2).any(|k| !(k[1] > k[0])) {
            return Err(Error::Config("knots must be strictly increasing with at least two entries".into()));
        }
        let widths = knots.windows(2).map(|k| k[1] - k[0]).collect();
        let bins = knots.len() - 1;
        let mut part = QuantilePartition { knots, widths, counts: vec![0; bins], requested_bins: bins };
        for &v in x {
            let j = part.locate_bin(v)?;
            part.counts[j] += 1;
        }
        Ok(part)
    }

    /// Effective number of bins.
    pub fn bins(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn requested_bins(&self) -> usize {
        self.requested_bins
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn lower(&self) -> f64 {
        self.knots[0]
    }

    pub fn upper(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower() && x <= self.upper()
    }

    /// Zero-based bin index of `x`, or an out-of-support error.
    pub fn locate_bin(&self, x: f64) -> Result<usize> {
        if !self.contains(x) {
            return Err(Error::OutOfSupport { x, lo: self.lower(), hi: self.upper() });
        }
        Ok(self.bin_of(x))
    }

    /// Zero-based bin index for a point already known to be in support.
    pub(crate) fn bin_of(&self, x: f64) -> usize {
        // number of knots <= x, minus one, capped to the last bin
        let k = self.knots.partition_point(|&t| t <= x);
        k.saturating_sub(1).min(self.bins() - 1)
    }

    /// Bin centers `(τ_{j-1} + τ_j) / 2`.
    pub fn centers(&self) -> Vec<f64> {
        self.knots.windows(2).map(|k| 0.5 * (k[0] + k[1])).collect()
    }

    /// Ratio of the widest to the narrowest bin.
    pub fn quasi_uniformity_ratio(&self) -> f64 {
        let max = self.widths.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.widths.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }

    /// Empirical density on bin `j`, `N_j / (n h_j)`.
    pub fn bin_density(&self, j: usize) -> f64 {
        let n: usize = self.counts.iter().sum();
        self.counts[j] as f64 / (n as f64 * self.widths[j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::sort_index;
    use proptest::prelude::*;

    fn part(x: &[f64], j: usize) -> Result<QuantilePartition> {
        let s = sort_index(x);
        QuantilePartition::from_sorted(&s.sorted(x), s.distinct_count, j)
    }

    #[test]
    fn ten_points_two_bins() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let p = part(&x, 2).unwrap();
        assert_eq!(p.knots(), &[1.0, 5.0, 10.0]);
        assert_eq!(p.widths(), &[4.0, 5.0]);
        assert_eq!(p.counts(), &[4, 6]);
    }

    #[test]
    fn saturated_partition() {
        let x: Vec<f64> = (1..=8).map(f64::from).collect();
        let p = part(&x, 8).unwrap();
        // x_(⌊n/J⌋) = x_(1) coincides with the minimum, so one knot merges
        assert_eq!(p.bins(), 7);
        assert_eq!(p.requested_bins(), 8);
        assert_eq!(&p.counts()[..6], &[1, 1, 1, 1, 1, 1]);
        assert_eq!(p.counts()[6], 2);
    }

    #[test]
    fn too_many_bins_for_distinct_values() {
        let x = [1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0];
        assert!(matches!(part(&x, 5), Err(Error::Selection(_))));
    }

    #[test]
    fn ties_reduce_bins() {
        let x = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0];
        let p = part(&x, 4).unwrap();
        assert!(p.bins() < 4);
        assert_eq!(p.counts().iter().sum::<usize>(), 10);
    }

    #[test]
    fn locate_boundary_convention() {
        let p = QuantilePartition::from_knots(vec![0.0, 1.0, 2.0], &[0.0, 2.0]).unwrap();
        assert_eq!(p.locate_bin(1.0).unwrap(), 1);
        assert_eq!(p.locate_bin(2.0).unwrap(), 1);
        assert_eq!(p.locate_bin(0.0).unwrap(), 0);
        assert!(matches!(p.locate_bin(2.5), Err(Error::OutOfSupport { .. })));
        assert!(matches!(p.locate_bin(-0.1), Err(Error::OutOfSupport { .. })));
    }

    #[test]
    fn uniformity_ratio() {
        let p = QuantilePartition::from_knots(vec![0.0, 1.0, 2.0, 3.0], &[0.5]).unwrap();
        assert_eq!(p.quasi_uniformity_ratio(), 1.0);
        let p = QuantilePartition::from_knots(vec![0.0, 1.0, 3.0, 7.0], &[0.5]).unwrap();
        assert_eq!(p.quasi_uniformity_ratio(), 4.0);
    }

    #[test]
    fn beta_sample_ratio_is_moderate() {
        use rand::SeedableRng;
        use rand_distr::{Beta, Distribution};
        let beta = Beta::new(2.0, 4.0).unwrap();
        let mut ratios = Vec::new();
        for seed in 0..21 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..1000).map(|_| beta.sample(&mut rng)).collect();
            let r = part(&x, 20).unwrap().quasi_uniformity_ratio();
            assert!(r.is_finite());
            ratios.push(r);
        }
        // the outer bins stretch to the sample extremes, so single draws vary
        ratios.sort_by(f64::total_cmp);
        assert!(ratios[10] < 15.0, "median ratio {}", ratios[10]);
    }

    proptest! {
        #[test]
        fn partition_invariants(raw in prop::collection::vec(0u32..1_000_000, 20..300), j in 2usize..15) {
            let x: Vec<f64> = raw.iter().map(|&v| v as f64 / 1000.0).collect();
            let s = sort_index(&x);
            prop_assume!(j <= s.distinct_count);
            let p = part(&x, j).unwrap();
            let sorted = s.sorted(&x);
            prop_assert_eq!(p.lower(), sorted[0]);
            prop_assert_eq!(p.upper(), sorted[sorted.len() - 1]);
            prop_assert!(p.widths().iter().all(|&h| h > 0.0));
            prop_assert!(p.counts().iter().all(|&c| c >= 1));
            prop_assert_eq!(p.counts().iter().sum::<usize>(), x.len());
            // every observation maps to exactly one bin, matching counts
            let mut c = vec![0; p.bins()];
            for &v in &x { c[p.locate_bin(v).unwrap()] += 1; }
            prop_assert_eq!(&c[..], p.counts());
            // deterministic
            prop_assert_eq!(part(&x, j).unwrap(), p.clone());
            if s.distinct_count == x.len() && p.bins() == j {
                let n = x.len();
                // first bin loses one point, last bin gains one
                let spread = (n + j - 1) / j - n / j + 2;
                let max = *p.counts().iter().max().unwrap();
                let min = *p.counts().iter().min().unwrap();
                prop_assert!(max - min <= spread, "counts {:?}", p.counts());
            }
        }
    }
}
