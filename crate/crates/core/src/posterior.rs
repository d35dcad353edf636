//! Posterior summaries and posterior predictive checks.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::linalg::CMat;
use crate::model::TomographyModel;
use crate::qstate::{Elements1Q, Elements2Q, Qubits, ELEMENT_NAMES_1Q, ELEMENT_NAMES_2Q};
use crate::sampler::diagnostics::{self, is_constant_variable, DiagnosticError};
use crate::sampler::{chain_rng, Trace};

/// Fewest samples accepted by the HDI routines.
pub const MIN_HDI_SAMPLES: usize = 50;

/// Quantile levels reported by [`ppc`].
pub const PPC_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PosteriorError {
    #[error("no samples")]
    Empty,
    #[error("HDI needs at least {MIN_HDI_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("probability {0} must lie in (0, 1)")]
    BadProbability(f64),
    #[error("samples contain non-finite values")]
    NonFinite,
    #[error("no variable named `{0}` in the trace")]
    UnknownVariable(String),
    #[error("trace does not match the model: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Diagnostic(#[from] DiagnosticError),
}

/// Bayes mean estimate: the sample mean.
pub fn bme(samples: &[f64]) -> Result<f64, PosteriorError> {
    if samples.is_empty() {
        return Err(PosteriorError::Empty);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

fn samples_of<'t>(trace: &'t Trace, name: &str) -> Result<&'t [f64], PosteriorError> {
    trace.samples(name).ok_or_else(|| PosteriorError::UnknownVariable(name.to_string()))
}

fn check_hdi_inputs(samples: &[f64], prob: f64) -> Result<(), PosteriorError> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(PosteriorError::BadProbability(prob));
    }
    if samples.len() < MIN_HDI_SAMPLES {
        return Err(PosteriorError::TooFewSamples(samples.len()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(PosteriorError::NonFinite);
    }
    Ok(())
}

/// Shortest interval containing `⌈prob·n⌉` of the samples.
pub fn hdi(samples: &[f64], prob: f64) -> Result<(f64, f64), PosteriorError> {
    check_hdi_inputs(samples, prob)?;
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let k = ((prob * n as f64).ceil() as usize).clamp(1, n);
    let (mut best, mut lo) = (f64::INFINITY, 0);
    for i in 0..=n - k {
        let w = v[i + k - 1] - v[i];
        if w < best {
            best = w;
            lo = i;
        }
    }
    Ok((v[lo], v[lo + k - 1]))
}

const KDE_GRID: usize = 512;

/// Highest-density region as a union of intervals, from a Gaussian kernel
/// density estimate with Silverman's bandwidth. The region is the set of grid
/// cells above the density level that encloses `prob` of the estimated mass.
pub fn hdi_multimodal(samples: &[f64], prob: f64) -> Result<Vec<(f64, f64)>, PosteriorError> {
    check_hdi_inputs(samples, prob)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| quantile_sorted(&sorted, p);
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if spread == 0.0 {
        return Ok(vec![(sorted[0], sorted[0])]);
    }
    let h = 0.9 * spread * n.powf(-0.2);
    let (lo, hi) = (sorted[0] - 3.0 * h, sorted[sorted.len() - 1] + 3.0 * h);
    let dx = (hi - lo) / (KDE_GRID - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID).map(|i| lo + dx * i as f64).collect();
    let density: Vec<f64> = grid
        .iter()
        .map(|&g| sorted.iter().map(|&x| (-0.5 * ((g - x) / h).powi(2)).exp()).sum::<f64>())
        .collect();
    let total: f64 = density.iter().sum();
    let mut order: Vec<usize> = (0..KDE_GRID).collect();
    order.sort_by(|&a, &b| density[b].total_cmp(&density[a]));
    let mut acc = 0.0;
    let mut level = 0.0;
    for &i in &order {
        acc += density[i];
        level = density[i];
        if acc >= prob * total {
            break;
        }
    }
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..KDE_GRID {
        let inside = density[i] >= level;
        match (inside, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((grid[s], grid[i - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((grid[s], grid[KDE_GRID - 1]));
    }
    Ok(out)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let i = pos.floor() as usize;
    if i + 1 >= n {
        return sorted[n - 1];
    }
    let f = pos - i as f64;
    sorted[i] + f * (sorted[i + 1] - sorted[i])
}

/// Posterior summary of one scalar quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantitySummary {
    pub name: String,
    pub bme: f64,
    pub hdi: (f64, f64),
    pub rhat: f64,
    pub ess: f64,
}

/// Posterior summary of a reconstructed state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSummary {
    pub qubits: Qubits,
    pub hdi_prob: f64,
    /// Density-matrix elements and Stokes parameters.
    pub quantities: Vec<QuantitySummary>,
    /// Latent coordinates, for diagnostics.
    pub latent: Vec<QuantitySummary>,
    /// Density matrix assembled from the element means, renormalized to unit trace.
    pub bme_matrix: CMat,
    /// Largest R-hat over non-constant derived quantities.
    pub max_rhat: f64,
    /// Smallest ESS over non-constant derived quantities.
    pub min_ess: f64,
    pub divergences: usize,
}

impl StateSummary {
    pub fn get(&self, name: &str) -> Option<&QuantitySummary> {
        self.quantities.iter().chain(&self.latent).find(|q| q.name == name)
    }
}

fn summarize_one(trace: &Trace, name: &str, prob: f64) -> Result<QuantitySummary, PosteriorError> {
    let s = samples_of(trace, name)?;
    Ok(QuantitySummary {
        name: name.to_string(),
        bme: bme(s)?,
        hdi: hdi(s, prob)?,
        rhat: diagnostics::rhat(trace, name)?,
        ess: diagnostics::ess(trace, name)?,
    })
}

/// Summarizes a trace whose derived variables include the density-matrix
/// elements of a `qubits` state.
pub fn summarize_state(trace: &Trace, qubits: Qubits, hdi_prob: f64) -> Result<StateSummary, PosteriorError> {
    let element_names: &[&str] = match qubits {
        Qubits::One => &ELEMENT_NAMES_1Q,
        Qubits::Two => &ELEMENT_NAMES_2Q,
    };
    let mut means = Vec::with_capacity(element_names.len());
    for name in element_names {
        means.push(bme(samples_of(trace, name)?)?);
    }
    let matrix = match qubits {
        Qubits::One => Elements1Q { a: means[0], b: means[1], re_c: means[2], im_c: means[3] }.to_matrix(),
        Qubits::Two => Elements2Q::from_slice(&means).to_matrix(),
    };
    let tr = matrix.trace().re;
    let bme_matrix = matrix.scale(Complex64::new(1.0 / tr, 0.0));

    let quantities = trace
        .derived_names()
        .iter()
        .map(|n| summarize_one(trace, n, hdi_prob))
        .collect::<Result<Vec<_>, _>>()?;
    let latent = trace
        .latent_names()
        .iter()
        .map(|n| summarize_one(trace, n, hdi_prob))
        .collect::<Result<Vec<_>, _>>()?;
    let varying: Vec<&QuantitySummary> =
        quantities.iter().filter(|q| !is_constant_variable(trace, &q.name)).collect();
    let max_rhat = varying.iter().map(|q| q.rhat).fold(1.0, f64::max);
    let min_ess = varying.iter().map(|q| q.ess).fold(f64::INFINITY, f64::min);
    Ok(StateSummary {
        qubits,
        hdi_prob,
        quantities,
        latent,
        bme_matrix,
        max_rhat,
        min_ess: if min_ess.is_finite() { min_ess } else { 0.0 },
        divergences: trace.total_divergences(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpcOptions {
    /// Posterior samples used, thinned evenly from the trace.
    pub samples: usize,
    /// Replicate datasets drawn per posterior sample.
    pub replicates: usize,
    pub seed: u64,
}

impl Default for PpcOptions {
    fn default() -> Self {
        Self { samples: 500, replicates: 1, seed: 0 }
    }
}

/// Replicate-count quantiles per measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct PpcResult {
    pub labels: Vec<String>,
    pub observed: Vec<f64>,
    /// Quantiles at [`PPC_LEVELS`] for each measurement.
    pub quantiles: Vec<[f64; 7]>,
    /// Fraction of replicates at or below the observed count.
    pub tail_prob: Vec<f64>,
}

impl PpcResult {
    /// True if every observed count lies within the `[lo, hi]` replicate
    /// quantiles, with `lo`/`hi` indices into [`PPC_LEVELS`].
    pub fn all_within(&self, lo: usize, hi: usize) -> bool {
        self.observed.iter().zip(&self.quantiles).all(|(&o, q)| o >= q[lo] && o <= q[hi])
    }
}

/// Draws from `N(mean, sd²)` truncated below at zero.
pub fn sample_truncated_normal<R: Rng>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    let alpha = -mean / sd;
    if alpha < 1.0 {
        // Acceptance probability is at least Φ(-1) ≈ 0.16.
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z >= alpha {
                return mean + sd * z;
            }
        }
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let tail = normal.cdf(-alpha);
    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let z = -normal.inverse_cdf(u * tail);
    (mean + sd * z).max(0.0)
}

/// Evenly spaced indices thinning `total` items to at most `budget`.
pub fn thin_indices(total: usize, budget: usize) -> Vec<usize> {
    if budget >= total {
        return (0..total).collect();
    }
    (0..budget).map(|i| i * total / budget).collect()
}

/// Posterior predictive check of the observed counts.
pub fn ppc(model: &TomographyModel, trace: &Trace, opts: &PpcOptions) -> Result<PpcResult, PosteriorError> {
    let layout_names = model.layout().names();
    if trace.latent_names() != layout_names.as_slice() {
        return Err(PosteriorError::Mismatch("latent variables differ from the model layout".into()));
    }
    if opts.samples == 0 || opts.replicates == 0 {
        return Err(PosteriorError::Mismatch("PPC needs at least one sample and one replicate".into()));
    }
    let total = trace.chains() * trace.draws();
    let picks = thin_indices(total, opts.samples);
    let sigma = model.likelihood_sigma();
    let n_meas = sigma.len();
    let per_sample: Vec<Vec<f64>> = picks
        .par_iter()
        .enumerate()
        .map(|(k, &idx)| {
            let (c, d) = (idx / trace.draws(), idx % trace.draws());
            let x = trace.point(c, d);
            let mean = model.mean_counts(&x);
            let mut rng = chain_rng(opts.seed, k);
            let mut reps = Vec::with_capacity(opts.replicates * n_meas);
            for _ in 0..opts.replicates {
                for j in 0..n_meas {
                    reps.push(sample_truncated_normal(&mut rng, mean[j], sigma[j]));
                }
            }
            reps
        })
        .collect();

    let observed = model.observed().to_vec();
    let mut quantiles = Vec::with_capacity(n_meas);
    let mut tail_prob = Vec::with_capacity(n_meas);
    for (j, &obs) in observed.iter().enumerate() {
        let mut col: Vec<f64> =
            per_sample.iter().flat_map(|r| r.chunks(n_meas).map(move |rep| rep[j])).collect();
        col.sort_by(f64::total_cmp);
        let mut q = [0.0; 7];
        for (slot, &p) in q.iter_mut().zip(&PPC_LEVELS) {
            *slot = quantile_sorted(&col, p);
        }
        quantiles.push(q);
        tail_prob.push(col.iter().filter(|&&v| v <= obs).count() as f64 / col.len() as f64);
    }
    Ok(PpcResult { labels: model.config().setup.labels(), observed, quantiles, tail_prob })
}
