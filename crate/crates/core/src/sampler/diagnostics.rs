//! Convergence diagnostics: split R-hat and effective sample size.
//!
//! Both work on split chains. R-hat reports the largest of the
//! rank-normalized bulk and folded-tail statistics and the classic
//! statistic on raw values; the last keeps the diagnostic sensitive to
//! chains that are completely separated, where rank normalization
//! saturates. ESS is the rank-normalized bulk estimate with Geyer's
//! initial monotone sequence, capped at `N log10 N`.

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use super::Trace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticError {
    #[error("no variable named `{0}` in the trace")]
    UnknownVariable(String),
    #[error("need at least 4 draws per chain, got {0}")]
    TooFewDraws(usize),
    #[error("chains have unequal lengths")]
    Ragged,
    #[error("trace contains non-finite values")]
    NonFinite,
}

fn validate(chains: &[&[f64]]) -> Result<usize, DiagnosticError> {
    let n = chains.first().map_or(0, |c| c.len());
    if chains.iter().any(|c| c.len() != n) {
        return Err(DiagnosticError::Ragged);
    }
    if n < 4 {
        return Err(DiagnosticError::TooFewDraws(n));
    }
    if chains.iter().flat_map(|c| c.iter()).any(|x| !x.is_finite()) {
        return Err(DiagnosticError::NonFinite);
    }
    Ok(n)
}

/// Halves of every chain; an odd middle draw is dropped.
fn split(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

fn is_constant(chains: &[Vec<f64>]) -> bool {
    let first = match chains.iter().flatten().next() {
        Some(v) => *v,
        None => return true,
    };
    chains.iter().flatten().all(|&v| v == first)
}

/// Replaces values by normal scores of their pooled ranks (ties averaged).
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let s = pooled.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; s];
    let mut i = 0;
    while i < s {
        let mut j = i;
        while j + 1 < s && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // 1-based average rank of the tie block.
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let z: Vec<f64> = ranks.iter().map(|&r| normal.inverse_cdf((r - 0.375) / (s as f64 + 0.25))).collect();
    let n = chains[0].len();
    z.chunks(n).map(<[f64]>::to_vec).collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn classic_rhat(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&chains.iter().map(|c| var(c)).collect::<Vec<_>>());
    let b_over_n = if chains.len() > 1 { var(&means) } else { 0.0 };
    if w == 0.0 {
        return if b_over_n == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (((n - 1.0) / n * w + b_over_n) / w).sqrt()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// R-hat from per-chain draws. Returns 1.0 for a constant variable.
pub fn rhat_of_chains(chains: &[&[f64]]) -> Result<f64, DiagnosticError> {
    validate(chains)?;
    let halves = split(chains);
    if is_constant(&halves) {
        return Ok(1.0);
    }
    let bulk = classic_rhat(&rank_normalize(&halves));
    let pooled: Vec<f64> = halves.iter().flatten().copied().collect();
    let med = median(&pooled);
    let folded: Vec<Vec<f64>> = halves.iter().map(|c| c.iter().map(|x| (x - med).abs()).collect()).collect();
    let tail = if is_constant(&folded) { 1.0 } else { classic_rhat(&rank_normalize(&folded)) };
    let raw = classic_rhat(&halves);
    Ok(bulk.max(tail).max(raw))
}

/// Biased autocovariance for lags `0..n`.
fn autocov(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    (0..n).map(|lag| d[..n - lag].iter().zip(&d[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64).collect()
}

fn geyer_ess(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let nf = n as f64;
    let acov: Vec<Vec<f64>> = chains.iter().map(|c| autocov(c)).collect();
    let mean_acov = |lag: usize| acov.iter().map(|a| a[lag]).sum::<f64>() / m as f64;
    let chain_means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let mean_var = mean_acov(0) * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += var(&chain_means);
    }

    let mut rho = vec![0.0; n];
    let mut rho_even = 1.0;
    let mut rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
    rho[0] = rho_even;
    rho[1] = rho_odd;
    let mut t = 1;
    while t + 3 < n && rho_even + rho_odd > 0.0 {
        rho_even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
        rho_odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
        if rho_even + rho_odd >= 0.0 {
            rho[t + 1] = rho_even;
            rho[t + 2] = rho_odd;
        }
        t += 2;
    }
    // `max_t` is -1 when the first pair of autocorrelations already sums below zero.
    let max_t = t as isize - 2;
    let head = (max_t + 1) as usize;
    if rho_even > 0.0 {
        rho[head] = rho_even;
    }
    let mut t = 1;
    while (t as isize) <= max_t - 2 {
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t] {
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0;
            rho[t + 2] = rho[t + 1];
        }
        t += 2;
    }
    let total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho[..head].iter().sum::<f64>() + rho[head];
    let tau = tau.max(1.0 / total.log10());
    total / tau
}

/// Bulk effective sample size from per-chain draws. Returns 0.0 for a
/// constant variable, whose autocorrelation is undefined.
pub fn ess_of_chains(chains: &[&[f64]]) -> Result<f64, DiagnosticError> {
    validate(chains)?;
    let halves = split(chains);
    if is_constant(&halves) {
        return Ok(0.0);
    }
    Ok(geyer_ess(&rank_normalize(&halves)))
}

fn chains_of<'t>(trace: &'t Trace, name: &str) -> Result<Vec<&'t [f64]>, DiagnosticError> {
    trace.chain_slices(name).ok_or_else(|| DiagnosticError::UnknownVariable(name.to_string()))
}

/// Split R-hat of `name`.
pub fn rhat(trace: &Trace, name: &str) -> Result<f64, DiagnosticError> {
    rhat_of_chains(&chains_of(trace, name)?)
}

/// Bulk ESS of `name`.
pub fn ess(trace: &Trace, name: &str) -> Result<f64, DiagnosticError> {
    ess_of_chains(&chains_of(trace, name)?)
}

/// True if every draw of `name` is identical.
pub fn is_constant_variable(trace: &Trace, name: &str) -> bool {
    trace.samples(name).is_none_or(|s| s.iter().all(|&v| v == s[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normals(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<f64> {
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) + shift).collect()
    }

    #[test]
    fn well_mixed_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let chains: Vec<Vec<f64>> = (0..4).map(|_| normals(&mut rng, 1000, 0.0)).collect();
        let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
        assert!(rhat_of_chains(&refs).unwrap() < 1.01);
        let e = ess_of_chains(&refs).unwrap();
        assert!((e - 4000.0).abs() < 0.2 * 4000.0, "ess {e}");
    }

    #[test]
    fn separated_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let chains = [normals(&mut rng, 1000, 0.0), normals(&mut rng, 1000, 10.0)];
        let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
        assert!(rhat_of_chains(&refs).unwrap() > 3.0);
    }

    #[test]
    fn ar1_ess() {
        let phi: f64 = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = rng.sample::<f64, _>(StandardNormal) / (1.0 - phi * phi).sqrt();
                (0..5000)
                    .map(|_| {
                        x = phi * x + rng.sample::<f64, _>(StandardNormal);
                        x
                    })
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
        let expected = 20000.0 * (1.0 - phi) / (1.0 + phi);
        let e = ess_of_chains(&refs).unwrap();
        assert!((e - expected).abs() < 0.2 * expected, "ess {e} vs {expected}");
    }

    #[test]
    fn constant_and_short() {
        let c = vec![2.0; 10];
        assert_eq!(rhat_of_chains(&[&c, &c]).unwrap(), 1.0);
        assert_eq!(ess_of_chains(&[&c, &c]).unwrap(), 0.0);
        assert_eq!(rhat_of_chains(&[&c[..3]]), Err(DiagnosticError::TooFewDraws(3)));
    }
}
