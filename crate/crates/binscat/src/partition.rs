//! Data-driven partitions of the support of `x`.
//!
//! A [`Partition`] is a strictly increasing knot sequence `τ₀ < τ₁ < … < τ_J`
//! splitting `[τ₀, τ_J]` into `J` bins. Bins are half-open on the right,
//! `B_j = [τ_{j-1}, τ_j)`, except the last which is closed, so every point of
//! the support belongs to exactly one bin.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// How the knot locations were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinScheme {
    QuantileSpaced,
    EvenlySpaced,
    UserSupplied,
}

/// Strictly increasing knot sequence defining `J` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    knots: Vec<f64>,
    scheme: BinScheme,
}

impl Partition {
    /// Quantile-spaced knots: interior knot `j` is the generalized-inverse
    /// sample quantile `inf{u : F̂(u) ≥ j/J}`; endpoints are the sample
    /// min and max.
    pub fn quantile_knots(x: &[f64], nbins: usize) -> Result<Partition> {
        check_nbins(nbins)?;
        let sorted = finite_sorted(x)?;
        let n = sorted.len();
        if n < 2 {
            return Err(Error::DegeneratePartition(
                "need at least two observations".into(),
            ));
        }
        let mut knots = Vec::with_capacity(nbins + 1);
        knots.push(sorted[0]);
        for j in 1..nbins {
            // smallest order statistic with rank ≥ n·j/J (1-based)
            let rank = (n * j).div_ceil(nbins);
            knots.push(sorted[rank - 1]);
        }
        knots.push(sorted[n - 1]);
        Self::from_knots(knots, BinScheme::QuantileSpaced)
    }

    /// Evenly-spaced knots over `[min x, max x]`.
    pub fn even_knots(x: &[f64], nbins: usize) -> Result<Partition> {
        check_nbins(nbins)?;
        let sorted = finite_sorted(x)?;
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        if hi <= lo {
            return Err(Error::DegeneratePartition(format!(
                "max x = min x = {lo}; cannot split a single point"
            )));
        }
        let mut knots: Vec<f64> = (0..=nbins)
            .map(|j| lo + (hi - lo) * j as f64 / nbins as f64)
            .collect();
        knots[nbins] = hi;
        Self::from_knots(knots, BinScheme::EvenlySpaced)
    }

    /// User-supplied knots, validated for strict increase but otherwise
    /// accepted verbatim.
    pub fn user_knots(knots: Vec<f64>) -> Result<Partition> {
        if knots.len() < 2 {
            return Err(Error::DegeneratePartition(
                "need at least two knots".into(),
            ));
        }
        Self::from_knots(knots, BinScheme::UserSupplied)
    }

    fn from_knots(knots: Vec<f64>, scheme: BinScheme) -> Result<Partition> {
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::DegeneratePartition("non-finite knot".into()));
        }
        for w in knots.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::DegeneratePartition(format!(
                    "knots {} and {} coincide or decrease (too many bins for the \
                     distinct-value count?)",
                    w[0], w[1]
                )));
            }
        }
        Ok(Partition { knots, scheme })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn scheme(&self) -> BinScheme {
        self.scheme
    }

    /// Number of bins `J`.
    pub fn nbins(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Width of bin `j` (1-based).
    pub fn width(&self, j: usize) -> f64 {
        self.knots[j] - self.knots[j - 1]
    }

    /// 1-based index of the bin containing `x`; the last bin is closed on
    /// the right.
    pub fn bin_of(&self, x: f64) -> Result<usize> {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfSupport { x, lo, hi });
        }
        if x >= self.knots[self.knots.len() - 2] {
            return Ok(self.nbins());
        }
        // partition_point: first knot strictly greater than x
        let idx = self.knots.partition_point(|&k| k <= x);
        Ok(idx)
    }

    /// Bin index for every observation.
    pub fn assign_bins(&self, x: &[f64]) -> Result<Vec<usize>> {
        x.iter().map(|&xi| self.bin_of(xi)).collect()
    }

    /// Observation count per bin (1-based bins at index `j-1`).
    pub fn occupancy(&self, x: &[f64]) -> Result<Vec<usize>> {
        let mut counts = vec![0usize; self.nbins()];
        for &xi in x {
            counts[self.bin_of(xi)? - 1] += 1;
        }
        Ok(counts)
    }

    /// `(max_j h_j)/(min_j h_j)`, the quasi-uniformity ratio.
    pub fn quasi_uniform_ratio(&self) -> f64 {
        let mut min_w = f64::INFINITY;
        let mut max_w = 0.0f64;
        for j in 1..=self.nbins() {
            let w = self.width(j);
            min_w = min_w.min(w);
            max_w = max_w.max(w);
        }
        max_w / min_w
    }
}

/// Ratio above which callers should warn about a badly unbalanced partition.
pub const QUASI_UNIFORM_WARN_RATIO: f64 = 50.0;

fn check_nbins(nbins: usize) -> Result<()> {
    if nbins == 0 {
        Err(Error::DegeneratePartition("J must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn finite_sorted(x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegeneratePartition("non-finite x value".into()));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(sorted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantile_knots_four_points() {
        let p = Partition::quantile_knots(&[0.1, 0.2, 0.3, 0.4], 2).unwrap();
        assert_eq!(p.knots(), &[0.1, 0.2, 0.4]);
    }

    #[test]
    fn quantile_single_bin_is_min_max() {
        let p = Partition::quantile_knots(&[3.0, -1.0, 2.0], 1).unwrap();
        assert_eq!(p.knots(), &[-1.0, 3.0]);
    }

    #[test]
    fn quantile_knots_near_population_quantiles() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
        let p = Partition::quantile_knots(&x, 4).unwrap();
        for (j, &target) in [0.25, 0.5, 0.75].iter().enumerate() {
            assert!(
                (p.knots()[j + 1] - target).abs() <= 0.05,
                "knot {} = {} too far from {}",
                j + 1,
                p.knots()[j + 1],
                target
            );
        }
    }

    #[test]
    fn quantile_duplicate_knots_error() {
        let x = vec![1.0, 1.0, 1.0, 1.0, 2.0];
        assert!(matches!(
            Partition::quantile_knots(&x, 3),
            Err(Error::DegeneratePartition(_))
        ));
    }

    #[test]
    fn even_knots_unit_interval() {
        let p = Partition::even_knots(&[0.0, 0.3, 1.0], 4).unwrap();
        let expect = [0.0, 0.25, 0.5, 0.75, 1.0];
        for (k, e) in p.knots().iter().zip(expect.iter()) {
            assert!((k - e).abs() < 1e-15);
        }
    }

    #[test]
    fn even_knots_symmetric_range() {
        let p = Partition::even_knots(&[-2.0, 2.0], 2).unwrap();
        assert_eq!(p.knots(), &[-2.0, 0.0, 2.0]);
    }

    #[test]
    fn even_knots_degenerate() {
        assert!(Partition::even_knots(&[5.0, 5.0], 3).is_err());
    }

    #[test]
    fn bin_assignment_conventions() {
        let p = Partition::user_knots(vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(p.bin_of(0.5).unwrap(), 2); // left-closed second bin
        assert_eq!(p.bin_of(1.0).unwrap(), 2); // last bin closed
        assert_eq!(p.bin_of(0.49999).unwrap(), 1);
        assert_eq!(p.bin_of(0.0).unwrap(), 1);
        assert!(p.bin_of(1.0001).is_err());
        assert!(p.bin_of(-0.0001).is_err());
    }

    #[test]
    fn quasi_uniform_ratio_values() {
        let p = Partition::user_knots(vec![0.0, 0.2, 0.5, 1.0]).unwrap();
        assert!((p.quasi_uniform_ratio() - 2.5).abs() < 1e-12);
        let even = Partition::even_knots(&[0.0, 1.0], 5).unwrap();
        assert!((even.quasi_uniform_ratio() - 1.0).abs() < 1e-12);
        let skew = Partition::user_knots(vec![0.0, 0.01, 1.0]).unwrap();
        assert!((skew.quasi_uniform_ratio() - 99.0).abs() < 1e-9);
    }

    #[test]
    fn quantile_occupancy_balanced_up_to_ties() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..997).map(|_| rng.gen::<f64>()).collect();
        let p = Partition::quantile_knots(&x, 7).unwrap();
        let counts = p.occupancy(&x).unwrap();
        let min = *counts.iter().min().unwrap() as i64;
        let max = *counts.iter().max().unwrap() as i64;
        // continuous data: counts differ by at most 1 across bins
        assert!(max - min <= 1, "counts {counts:?}");
    }

    #[test]
    fn even_refinement_nests() {
        let x = [0.0, 1.0];
        let coarse = Partition::even_knots(&x, 3).unwrap();
        let fine = Partition::even_knots(&x, 9).unwrap();
        for k in coarse.knots() {
            assert!(fine.knots().iter().any(|f| (f - k).abs() < 1e-12));
        }
    }

    proptest! {
        #[test]
        fn assign_matches_linear_scan(
            raw in proptest::collection::vec(-100.0f64..100.0, 8..60),
            nbins in 1usize..6,
        ) {
            let part = match Partition::quantile_knots(&raw, nbins) {
                Ok(p) => p,
                Err(_) => return Ok(()), // duplicates: nothing to check
            };
            for &xi in &raw {
                let fast = part.bin_of(xi).unwrap();
                // brute force: scan every bin with the half-open convention
                let mut slow = part.nbins();
                for j in 1..part.nbins() {
                    if xi >= part.knots()[j - 1] && xi < part.knots()[j] {
                        slow = j;
                        break;
                    }
                }
                prop_assert_eq!(fast, slow);
            }
        }
    }
}
