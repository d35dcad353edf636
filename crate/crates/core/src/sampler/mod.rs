//! MCMC over a latent vector with mixed bounded and unbounded coordinates.
//!
//! Bounded coordinates are sampled on the logit scale with the log-Jacobian
//! folded into the target. The default kernel is multinomial NUTS with a
//! diagonal mass matrix; a random-walk Metropolis kernel is kept as a
//! fallback. Chains run in parallel and each draws from its own stream of a
//! ChaCha generator keyed by the run seed, so results do not depend on
//! thread scheduling.

mod adapt;
pub mod diagnostics;
pub mod fixture;
mod nuts;
mod rwm;
mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

pub use diagnostics::{ess, ess_of_chains, rhat, rhat_of_chains};
pub use trace::{ChainStats, Trace};

/// Divergence threshold on the energy error of a trajectory.
pub const MAX_DELTA_H: f64 = 1000.0;

const MAX_INIT_ATTEMPTS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("chain {0}: no finite starting point after {MAX_INIT_ATTEMPTS} attempts")]
    Init(usize),
    #[error("chain {chain}: step size search failed ({reason})")]
    StepSize { chain: usize, reason: String },
    #[error("trace: {0}")]
    Trace(String),
}

/// Support of one latent coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    Real,
    Interval { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentEntry {
    pub name: String,
    pub support: Support,
}

/// Ordered names and supports of a latent vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatentLayout {
    pub entries: Vec<LatentEntry>,
}

impl LatentLayout {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    /// All-real layout named `x0, x1, ...`.
    pub fn unbounded(dim: usize) -> Self {
        Self { entries: (0..dim).map(|k| LatentEntry { name: format!("x{k}"), support: Support::Real }).collect() }
    }
}

/// A differentiable log density on the constrained latent space.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log density, which may
    /// be `-∞` outside the support.
    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64;

    fn log_density(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; x.len()];
        self.log_density_and_gradient(x, &mut g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerKind {
    #[default]
    Nuts,
    RandomWalk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub chains: usize,
    pub draws: usize,
    pub tune: usize,
    pub target_accept: f64,
    pub seed: u64,
    pub kind: SamplerKind,
    pub max_tree_depth: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { chains: 4, draws: 1000, tune: 1000, target_accept: 0.8, seed: 0, kind: SamplerKind::Nuts, max_tree_depth: 10 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.chains == 0 {
            return Err(SamplerError::Config("chains must be at least 1".into()));
        }
        if self.draws == 0 {
            return Err(SamplerError::Config("draws must be at least 1".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(SamplerError::Config(format!("target_accept {} must lie in (0, 1)", self.target_accept)));
        }
        if self.max_tree_depth == 0 || self.max_tree_depth > 20 {
            return Err(SamplerError::Config("max_tree_depth must be in 1..=20".into()));
        }
        Ok(())
    }
}

/// Generator for chain `chain` of a run seeded with `seed`.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Target on the unconstrained space.
pub(crate) struct Potential<'a, D: ?Sized> {
    density: &'a D,
    supports: Vec<Support>,
}

impl<'a, D: LogDensity + ?Sized> Potential<'a, D> {
    pub(crate) fn new(density: &'a D, layout: &LatentLayout) -> Self {
        Self { density, supports: layout.entries.iter().map(|e| e.support).collect() }
    }

    pub(crate) fn dim(&self) -> usize {
        self.supports.len()
    }

    pub(crate) fn to_constrained(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.supports)
            .map(|(&u, s)| match *s {
                Support::Real => u,
                Support::Interval { lo, hi } => lo + (hi - lo) * sigmoid(u),
            })
            .collect()
    }

    #[cfg(test)]
    pub(crate) fn to_unconstrained(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.supports)
            .map(|(&x, s)| match *s {
                Support::Real => x,
                Support::Interval { lo, hi } => {
                    let p = (x - lo) / (hi - lo);
                    (p / (1.0 - p)).ln()
                }
            })
            .collect()
    }

    /// Log density and gradient in unconstrained coordinates.
    pub(crate) fn eval(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        let x = self.to_constrained(u);
        let lp = self.density.log_density_and_gradient(&x, grad);
        let mut log_jac = 0.0;
        for (k, s) in self.supports.iter().enumerate() {
            if let Support::Interval { lo, hi } = *s {
                let sg = sigmoid(u[k]);
                log_jac += (hi - lo).ln() - softplus(-u[k]) - softplus(u[k]);
                grad[k] = grad[k] * (hi - lo) * sg * (1.0 - sg) + 1.0 - 2.0 * sg;
            }
        }
        let v = lp + log_jac;
        if v.is_nan() || grad.iter().any(|g| !g.is_finite()) {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    pub(crate) fn eval_value(&self, u: &[f64]) -> f64 {
        let x = self.to_constrained(u);
        let lp = self.density.log_density(&x);
        let log_jac: f64 = self
            .supports
            .iter()
            .zip(u)
            .map(|(s, &u)| match *s {
                Support::Real => 0.0,
                Support::Interval { lo, hi } => (hi - lo).ln() - softplus(-u) - softplus(u),
            })
            .sum();
        let v = lp + log_jac;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    /// Uniform draws inside bounded coordinates, standard normal elsewhere.
    fn initial_point(&self, rng: &mut ChaCha8Rng, chain: usize) -> Result<(Vec<f64>, f64, Vec<f64>), SamplerError> {
        let mut grad = vec![0.0; self.dim()];
        for _ in 0..MAX_INIT_ATTEMPTS {
            let u: Vec<f64> = self
                .supports
                .iter()
                .map(|s| match *s {
                    Support::Real => rng.sample(StandardNormal),
                    Support::Interval { .. } => {
                        let p: f64 = rng.random_range(1e-6..1.0 - 1e-6);
                        (p / (1.0 - p)).ln()
                    }
                })
                .collect();
            let lp = self.eval(&u, &mut grad);
            if lp.is_finite() {
                return Ok((u, lp, grad));
            }
        }
        Err(SamplerError::Init(chain))
    }
}

pub(crate) struct ChainOutput {
    pub draws: Vec<Vec<f64>>,
    pub stats: ChainStats,
}

/// Draws `cfg.draws` post-warm-up samples from each of `cfg.chains` chains.
pub fn sample<D: LogDensity + ?Sized>(
    density: &D,
    layout: &LatentLayout,
    cfg: &SamplerConfig,
) -> Result<Trace, SamplerError> {
    cfg.validate()?;
    if layout.dim() != density.dim() {
        return Err(SamplerError::Config(format!(
            "layout has {} entries but the density has dimension {}",
            layout.dim(),
            density.dim()
        )));
    }
    if layout.dim() == 0 {
        return Err(SamplerError::Config("empty latent vector".into()));
    }
    for e in &layout.entries {
        if let Support::Interval { lo, hi } = e.support {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(SamplerError::Config(format!("`{}` has an empty or unbounded interval", e.name)));
            }
        }
    }
    let pot = Potential::new(density, layout);
    let outputs: Vec<Result<ChainOutput, SamplerError>> = (0..cfg.chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = chain_rng(cfg.seed, chain);
            let init = pot.initial_point(&mut rng, chain)?;
            match cfg.kind {
                SamplerKind::Nuts => nuts::run_chain(&pot, cfg, chain, init, &mut rng),
                SamplerKind::RandomWalk => rwm::run_chain(&pot, cfg, init, &mut rng),
            }
        })
        .collect();
    let mut chains = Vec::with_capacity(cfg.chains);
    for out in outputs {
        chains.push(out?);
    }
    Trace::from_chain_outputs(layout.names(), chains)
}
