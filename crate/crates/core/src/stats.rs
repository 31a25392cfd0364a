//! Small statistics helpers shared by tests, the acceptance suite and the
//! CLI: chi-square goodness of fit, binomial error bars, least squares.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChiSquareOutcome {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareOutcome {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

/// Pearson goodness-of-fit of `counts` against `probs`.
///
/// Cells with zero expected probability must have zero observations (any
/// hit makes the statistic infinite) and contribute no degree of freedom.
/// Cells with small expected counts are pooled until each pooled cell
/// expects at least five observations.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> Result<ChiSquareOutcome> {
    if counts.len() != probs.len() {
        return Err(Error::DimensionMismatch(counts.len(), probs.len()));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::invalid("no observations"));
    }
    let total = total as f64;
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut obs_acc, mut exp_acc) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        if p <= 0.0 {
            if c > 0 {
                return Ok(ChiSquareOutcome { statistic: f64::INFINITY, dof: 0, p_value: 0.0 });
            }
            continue;
        }
        obs_acc += c as f64;
        exp_acc += p * total;
        if exp_acc >= 5.0 {
            pooled.push((obs_acc, exp_acc));
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    if exp_acc > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += obs_acc;
                last.1 += exp_acc;
            }
            None => pooled.push((obs_acc, exp_acc)),
        }
    }
    let statistic: f64 = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::invalid(e.to_string()))?;
        1.0 - dist.cdf(statistic)
    };
    Ok(ChiSquareOutcome { statistic, dof, p_value })
}

/// Standard deviation of a success fraction over `trials` Bernoulli(p) draws.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("need at least two points for a linear fit"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LinearFit { slope, intercept, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_fit_has_unit_r_squared() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_accepts_exact_counts_and_rejects_skew() {
        let probs = [0.25; 4];
        let ok = chi_square_gof(&[250, 250, 250, 250], &probs).unwrap();
        assert_eq!(ok.dof, 3);
        assert!(ok.p_value > 0.999);
        let bad = chi_square_gof(&[400, 200, 200, 200], &probs).unwrap();
        assert!(bad.p_value < 1e-10);
    }

    #[test]
    fn chi_square_handles_zero_probability_cells() {
        let out = chi_square_gof(&[0, 100], &[0.0, 1.0]).unwrap();
        assert_eq!(out.dof, 0);
        assert_eq!(out.p_value, 1.0);
        let out = chi_square_gof(&[1, 99], &[0.0, 1.0]).unwrap();
        assert_eq!(out.p_value, 0.0);
    }

    #[test]
    fn chi_square_pools_sparse_cells() {
        // 100 draws over 64 equiprobable cells: expected 1.56 each, pooled.
        let counts = vec![1u64; 64];
        let probs = vec![1.0 / 64.0; 64];
        let out = chi_square_gof(&counts, &probs).unwrap();
        assert!(out.dof < 63);
        assert!(out.p_value > 0.5);
    }

    #[test]
    fn binomial_sigma_at_half() {
        assert!((binomial_sigma(0.5, 10_000) - 0.005).abs() < 1e-15);
    }
}
