//! Block statistics for Monte-Carlo error bars and the one-sample
//! Kolmogorov–Smirnov test.

use std::ops::Range;

use crate::error::{Error, Result};

/// Splits `0..n` into `blocks` contiguous ranges whose lengths differ by at
/// most one, longer blocks first.
pub fn block_ranges(n: usize, blocks: usize) -> Result<Vec<Range<usize>>> {
    if blocks < 2 || n < blocks {
        return Err(Error::InsufficientSamples { samples: n, blocks });
    }
    let (base, extra) = (n / blocks, n % blocks);
    let mut start = 0;
    Ok((0..blocks)
        .map(|b| {
            let len = base + usize::from(b < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

/// Mean and standard error from per-block estimates:
/// stderr = sample std of the block values / √B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// `values` are block means and `sizes` the number of samples behind each;
/// the overall mean is size-weighted so it equals the plain sample mean.
pub fn block_estimate(values: &[f64], sizes: &[usize]) -> BlockEstimate {
    assert_eq!(values.len(), sizes.len());
    let b = values.len();
    assert!(b >= 2, "need at least two blocks");
    let total: usize = sizes.iter().sum();
    let mean = values.iter().zip(sizes).map(|(v, &s)| v * s as f64).sum::<f64>() / total as f64;
    let block_mean = values.iter().sum::<f64>() / b as f64;
    let var = values.iter().map(|v| (v - block_mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    BlockEstimate {
        mean,
        stderr: (var / b as f64).sqrt(),
    }
}

/// Two-sided KS statistic sup|F_n − F| of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov survival function Q(λ) = P(K > λ).
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Theta-function form, accurate for small λ.
        let pi2 = std::f64::consts::PI.powi(2);
        let y = (-pi2 / (8.0 * lambda * lambda)).exp();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * (y + y.powi(9) + y.powi(25) + y.powi(49));
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = f64::from(j);
        let term = (-2.0 * j * j * lambda * lambda).exp();
        sum += if j as u32 % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a KS statistic `d` from `n` samples, with the
/// usual finite-n correction λ = (√n + 0.12 + 0.11/√n) d.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)
}
