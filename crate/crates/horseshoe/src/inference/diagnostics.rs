//! Split R-hat and effective sample size on rank-normalized draws.

use statrs::distribution::{ContinuousCDF, Normal};

/// Splits each chain in half; with an odd length the middle draw is dropped.
fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

/// Replaces values by the normal scores of their pooled average ranks,
/// `Phi^-1((r - 3/8) / (S + 1/4))`.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let ranks = crate::stats::ranks(&pooled);
    let s = pooled.len() as f64;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut z = ranks
        .into_iter()
        .map(|r| normal.inverse_cdf((r - 0.375) / (s + 0.25)));
    chains
        .iter()
        .map(|c| (0..c.len()).map(|_| z.next().unwrap()).collect())
        .collect()
}

fn within_between(chains: &[Vec<f64>]) -> (f64, f64, f64) {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| crate::stats::mean(c)).collect();
    let vars: Vec<f64> = chains.iter().map(|c| crate::stats::sample_variance(c)).collect();
    let w = crate::stats::mean(&vars);
    let b = if m > 1.0 {
        n * crate::stats::sample_variance(&means)
    } else {
        0.0
    };
    let var_plus = (n - 1.0) / n * w + b / n;
    (w, b, var_plus)
}

fn is_constant(chains: &[Vec<f64>]) -> bool {
    let first = chains[0][0];
    chains.iter().flatten().all(|&v| (v - first).abs() < 1e-300)
}

/// Rank-normalized split R-hat. Returns 1 for constant sequences (nothing
/// to diagnose on a parameter that never moves, e.g. a fixed hyperprior).
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    if chains.is_empty() || chains.iter().any(|c| c.len() < 4) {
        return f64::NAN;
    }
    if is_constant(chains) {
        return 1.0;
    }
    let split = split_chains(chains);
    let z = rank_normalize(&split);
    let (w, _, var_plus) = within_between(&z);
    (var_plus / w).sqrt()
}

/// Rank-normalized bulk effective sample size with Geyer's initial
/// monotone sequence truncation. Returns the total draw count for constant
/// sequences.
pub fn ess_bulk(chains: &[Vec<f64>]) -> f64 {
    if chains.is_empty() || chains.iter().any(|c| c.len() < 4) {
        return f64::NAN;
    }
    let total: usize = chains.iter().map(|c| c.len()).sum();
    if is_constant(chains) {
        return total as f64;
    }
    let split = split_chains(chains);
    let z = rank_normalize(&split);
    let m = z.len();
    let n = z[0].len();
    let (w, _, var_plus) = within_between(&z);
    if var_plus <= 0.0 || w <= 0.0 {
        return total as f64;
    }

    let means: Vec<f64> = z.iter().map(|c| crate::stats::mean(c)).collect();
    // Mean within-chain autocovariance at a given lag (biased, 1/n).
    let autocov = |t: usize| -> f64 {
        let mut acc = 0.0;
        for (c, &mu) in z.iter().zip(&means) {
            let mut s = 0.0;
            for i in 0..n - t {
                s += (c[i] - mu) * (c[i + t] - mu);
            }
            acc += s / n as f64;
        }
        acc / m as f64
    };

    let rho = |t: usize| 1.0 - (w - autocov(t)) / var_plus;

    // Geyer pairs: accumulate while the pair sums stay positive, enforcing
    // monotone non-increase.
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0usize;
    while t + 1 < n {
        let pair = rho(t) + rho(t + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        t += 2;
    }
    let tau = tau.max(1.0 / (total as f64));
    ((m * n) as f64 / tau).min(total as f64 * (total as f64).log10().max(1.0))
}
