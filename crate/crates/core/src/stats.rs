//! Small estimators shared by the simulation and the policy runs.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::{Error, Result};

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Wilson score 95% interval for a binomial proportion.
pub fn wilson(successes: u64, trials: u64) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Interval {
        lo: (center - half).max(0.0),
        hi: (center + half).min(1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub n: usize,
    pub mean: f64,
    pub std_err: f64,
    /// Normal-approximation 95% interval.
    pub ci95: Interval,
}

pub fn mean_ci(samples: &[f64]) -> Result<MeanEstimate> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let std_err = (var / n as f64).sqrt();
    Ok(MeanEstimate {
        n,
        mean,
        std_err,
        ci95: Interval {
            lo: mean - Z95 * std_err,
            hi: mean + Z95 * std_err,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of cells after pooling.
    pub cells: usize,
}

/// Pearson goodness-of-fit test of `observed` counts against cell
/// probabilities `probs`. Mass missing from `probs` (it may sum to less
/// than one) forms an extra cell. Adjacent cells are pooled until every
/// expected count is at least `min_expected`.
pub fn chi_square(observed: &[u64], probs: &[f64], min_expected: f64) -> Result<ChiSquare> {
    if observed.len() != probs.len() {
        return Err(Error::invalid("observed and expected cell counts differ"));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::InsufficientData("no observations".into()));
    }
    let n = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (o, p) in observed.iter().zip(probs) {
        acc.0 += *o as f64;
        acc.1 += p * n;
        if acc.1 >= min_expected {
            cells.push(acc);
            acc = (0.0, 0.0);
        }
    }
    let rest = (1.0 - probs.iter().sum::<f64>()).max(0.0) * n;
    acc.1 += rest;
    if acc.1 > 0.0 || acc.0 > 0.0 {
        if acc.1 >= min_expected || cells.is_empty() {
            cells.push(acc);
        } else {
            let last = cells.last_mut().unwrap();
            last.0 += acc.0;
            last.1 += acc.1;
        }
    }
    if cells.len() < 2 {
        return Err(Error::InsufficientData("fewer than two cells after pooling".into()));
    }
    let statistic: f64 = cells
        .iter()
        .map(|(o, e)| if *e > 0.0 { (o - e).powi(2) / e } else if *o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let dof = cells.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::invalid(e.to_string()))?;
    let p_value = if statistic.is_finite() { 1.0 - dist.cdf(statistic) } else { 0.0 };
    Ok(ChiSquare {
        statistic,
        dof,
        p_value,
        cells: cells.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_values() {
        let w = wilson(50, 100);
        assert!((w.lo - 0.4038).abs() < 1e-3 && (w.hi - 0.5962).abs() < 1e-3);
        let w = wilson(0, 10);
        assert_eq!(w.lo, 0.0);
        assert!(w.hi > 0.2 && w.hi < 0.35);
        assert_eq!(wilson(200, 200).hi, 1.0);
    }

    #[test]
    fn mean_ci_basic() {
        let e = mean_ci(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(e.mean, 2.0);
        assert!((e.std_err - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(mean_ci(&[]).is_err());
    }

    #[test]
    fn chi_square_perfect_fit() {
        let c = chi_square(&[25, 25, 25, 25], &[0.25; 4], 5.0).unwrap();
        assert_eq!(c.statistic, 0.0);
        assert_eq!(c.dof, 3);
        assert!((c.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_pools_small_cells_and_remainder() {
        // last two cells and the missing mass are pooled
        let c = chi_square(&[50, 45, 3, 2], &[0.5, 0.45, 0.02, 0.01], 5.0).unwrap();
        assert_eq!(c.cells, 3);
        let c = chi_square(&[90, 10], &[0.5, 0.5], 5.0).unwrap();
        assert!(c.p_value < 1e-10);
    }
}
