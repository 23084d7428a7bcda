//! Small statistical helpers shared by estimators and the verification
//! suites.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
}

impl ChiSquareTest {
    pub fn p_value(&self) -> f64 {
        if self.degrees_of_freedom == 0 {
            return 1.0;
        }
        let dist = ChiSquared::new(self.degrees_of_freedom as f64).expect("positive dof");
        1.0 - dist.cdf(self.statistic)
    }

    /// Fails to reject the null hypothesis at level `alpha`.
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value() >= alpha
    }
}

/// Pearson independence test on a contingency table. Empty rows and columns
/// are dropped before counting degrees of freedom.
pub fn chi_square_independence(table: &[Vec<u64>]) -> ChiSquareTest {
    let cols = table.first().map_or(0, Vec::len);
    let row_totals: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_totals: Vec<f64> = (0..cols)
        .map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64)
        .collect();
    let total: f64 = row_totals.iter().sum();
    let live_rows = row_totals.iter().filter(|&&t| t > 0.0).count();
    let live_cols = col_totals.iter().filter(|&&t| t > 0.0).count();

    let mut statistic = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &observed) in row.iter().enumerate() {
            let expected = row_totals[i] * col_totals[j] / total;
            if expected > 0.0 {
                statistic += (observed as f64 - expected).powi(2) / expected;
            }
        }
    }
    ChiSquareTest {
        statistic,
        degrees_of_freedom: live_rows.saturating_sub(1) * live_cols.saturating_sub(1),
    }
}

/// Pearson goodness-of-fit test of `observed` counts against `probabilities`.
pub fn chi_square_goodness_of_fit(observed: &[u64], probabilities: &[f64]) -> ChiSquareTest {
    let total: u64 = observed.iter().sum();
    let statistic = observed
        .iter()
        .zip(probabilities)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    ChiSquareTest {
        statistic,
        degrees_of_freedom: probabilities.iter().filter(|&&p| p > 0.0).count().saturating_sub(1),
    }
}

/// Two-sided standard normal quantile for confidence `level`, e.g. 2.5758
/// for 0.99.
pub fn normal_quantile(level: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    normal.inverse_cdf(0.5 + level / 2.0)
}

/// Standard error of a binomial frequency with success probability `p`.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// `|hits/trials − p| <= k·σ`.
pub fn frequency_within(hits: u64, trials: u64, p: f64, k: f64) -> bool {
    let freq = hits as f64 / trials as f64;
    (freq - p).abs() <= k * binomial_sigma(p, trials)
}

/// Sample mean with a symmetric normal-approximation confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl MeanEstimate {
    /// From the count, sum and sum of squares of the samples.
    pub fn from_moments(count: u64, sum: f64, sum_sq: f64, level: f64) -> Self {
        let n = count as f64;
        let mean = sum / n;
        let variance = if count > 1 {
            ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        let std_err = (variance / n).sqrt();
        let half = normal_quantile(level) * std_err;
        Self {
            mean,
            std_err,
            lower: mean - half,
            upper: mean + half,
            level,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_quantile_99() {
        assert!((normal_quantile(0.99) - 2.575_829_303_548_901).abs() < 1e-6);
    }

    #[test]
    fn independence_detects_dependence() {
        let dependent = vec![vec![900, 100], vec![100, 900]];
        assert!(!chi_square_independence(&dependent).passes(0.001));
        let independent = vec![vec![500, 500], vec![498, 502]];
        assert!(chi_square_independence(&independent).passes(0.001));
    }

    #[test]
    fn degenerate_table_passes() {
        let constant = vec![vec![1000, 0], vec![1000, 0]];
        let t = chi_square_independence(&constant);
        assert_eq!(t.degrees_of_freedom, 0);
        assert!(t.passes(0.001));
    }

    #[test]
    fn goodness_of_fit() {
        assert!(chi_square_goodness_of_fit(&[5010, 4990], &[0.5, 0.5]).passes(0.001));
        assert!(!chi_square_goodness_of_fit(&[6000, 4000], &[0.5, 0.5]).passes(0.001));
    }

    #[test]
    fn mean_estimate_contains_mean() {
        let est = MeanEstimate::from_moments(4, 10.0, 30.0, 0.99);
        assert_eq!(est.mean, 2.5);
        assert!(est.contains(est.mean));
        assert!(est.lower < est.upper);
    }
}
