//! Random-walk Metropolis fallback kernel.
//!
//! Gaussian proposals scaled per coordinate by the warm-up variance estimate;
//! the global scale is tuned toward an acceptance rate of 0.234.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::adapt::MetricWindows;
use super::{ChainOutput, ChainStats, LogDensity, Potential, SamplerConfig, SamplerError};

const TARGET_ACCEPT: f64 = 0.234;

pub(crate) fn run_chain<D: LogDensity + ?Sized>(
    pot: &Potential<'_, D>,
    cfg: &SamplerConfig,
    init: (Vec<f64>, f64, Vec<f64>),
    rng: &mut ChaCha8Rng,
) -> Result<ChainOutput, SamplerError> {
    let (mut q, mut logp, _) = init;
    let dim = q.len();
    let mut var = vec![1.0; dim];
    let mut log_scale = (2.38 / (dim as f64).sqrt()).ln();
    let mut windows = MetricWindows::new(cfg.tune, dim);
    let mut proposal = vec![0.0; dim];

    let mut step = |q: &mut Vec<f64>, logp: &mut f64, var: &[f64], scale: f64, rng: &mut ChaCha8Rng| -> f64 {
        for k in 0..dim {
            let n: f64 = rng.sample(StandardNormal);
            proposal[k] = q[k] + scale * var[k].sqrt() * n;
        }
        let lp = pot.eval_value(&proposal);
        let accept = if lp.is_finite() { (lp - *logp).exp().min(1.0) } else { 0.0 };
        if rng.random::<f64>() < accept {
            q.copy_from_slice(&proposal);
            *logp = lp;
        }
        accept
    };

    for i in 0..cfg.tune {
        let a = step(&mut q, &mut logp, &var, log_scale.exp(), rng);
        log_scale += (a - TARGET_ACCEPT) / ((i + 1) as f64).powf(0.6);
        if let Some(v) = windows.observe(&q) {
            var = v;
        }
    }

    let mut stats = ChainStats::default();
    let mut draws = Vec::with_capacity(cfg.draws);
    let mut accept_sum = 0.0;
    for _ in 0..cfg.draws {
        accept_sum += step(&mut q, &mut logp, &var, log_scale.exp(), rng);
        draws.push(pot.to_constrained(&q));
    }
    stats.step_size = log_scale.exp();
    stats.inv_metric = var;
    stats.mean_accept = accept_sum / cfg.draws as f64;
    stats.n_leapfrog = 0;
    Ok(ChainOutput { draws, stats })
}
