//! Experiment description and log posterior.
//!
//! Latent vector layout, one qubit (15 entries):
//! `t0..t3`, `zFlux0..2`, `zEta0` (half-wave retardance), `zEta1`
//! (quarter-wave retardance), `zWP0` (quarter-wave angle), `zWP1` (half-wave
//! angle), `zPBS0..3` (`μT_H, μT_V, νR_H, νR_V`).
//!
//! Two qubits (37 entries): `t0..t15`, `zFlux0..8`, `zWP0..3` (quarter A,
//! half A, quarter B, half B), `zPBS0..7` (arm A block then arm B block).
//!
//! The `t` entries carry uniform priors on `[-1, 1]`; every `z` is a standard
//! normal that perturbs a nominal instrument value. Fluxes and crosstalk
//! coefficients are folded with `|·|` to stay non-negative. Counts follow a
//! normal likelihood truncated below at zero.

use thiserror::Error;

use crate::ad::{self, Real};
use crate::crosstalk::{
    apply_arm, apply_kron_arms, estimate_flux_1q, estimate_flux_2q, flux_index_1q, flux_index_2q, CrosstalkError,
    FluxEstimate, InstrumentParams,
};
use crate::optics::{prob_1q_closed, prob_2q_closed, Angles1Q, Angles2Q, Port, SettingRow1Q, Settings2Q};
use crate::qstate::{
    elements_1q, elements_2q, stokes_2q_from_elements, Elements1Q, Elements2Q, Qubits, Stokes1Q, ELEMENT_NAMES_1Q,
    ELEMENT_NAMES_2Q,
};
use crate::sampler::{self, LatentEntry, LatentLayout, LogDensity, SamplerConfig, SamplerError, Support, Trace};

/// Floor applied to flux estimates before they centre the flux prior.
pub const FLUX_FLOOR: f64 = 1.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("latent vector has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("log posterior is not differentiable at this point: `{0}` sits on its fold")]
    NonDifferentiable(String),
    #[error(transparent)]
    Crosstalk(#[from] CrosstalkError),
}

/// How the likelihood width is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaMode {
    /// `σ_j = √N_j` per measurement (observed counts, floored at one).
    PerMeasurement,
    /// `σ = √max_j N_j` shared by all measurements.
    #[default]
    MaxCounts,
}

/// Standard deviations of the one-qubit instrument systematics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uncertainty1Q {
    pub theta_h: f64,
    pub theta_q: f64,
    pub eta_h: f64,
    pub eta_q: f64,
    pub mu: f64,
    pub nu: f64,
    pub th: f64,
    pub tv: f64,
    pub rh: f64,
    pub rv: f64,
}

impl Uncertainty1Q {
    /// Width shared by all four crosstalk coefficients.
    pub fn crosstalk_sigma(&self) -> f64 {
        [self.mu, self.nu, self.th, self.tv, self.rh, self.rv].iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    fn named(&self) -> [(&'static str, f64); 10] {
        [
            ("theta_h", self.theta_h),
            ("theta_q", self.theta_q),
            ("eta_h", self.eta_h),
            ("eta_q", self.eta_q),
            ("mu", self.mu),
            ("nu", self.nu),
            ("th", self.th),
            ("tv", self.tv),
            ("rh", self.rh),
            ("rv", self.rv),
        ]
    }
}

/// Standard deviations of the two-qubit instrument systematics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uncertainty2Q {
    pub theta_h_a: f64,
    pub theta_q_a: f64,
    pub theta_h_b: f64,
    pub theta_q_b: f64,
    /// Beam-splitter transmission/reflection fractions.
    pub pbs: f64,
    /// Detector efficiencies.
    pub mu_nu: f64,
}

impl Uncertainty2Q {
    pub fn crosstalk_sigma(&self) -> f64 {
        self.pbs.hypot(self.mu_nu)
    }

    fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("theta_h_a", self.theta_h_a),
            ("theta_q_a", self.theta_q_a),
            ("theta_h_b", self.theta_h_b),
            ("theta_q_b", self.theta_q_b),
            ("pbs", self.pbs),
            ("mu_nu", self.mu_nu),
        ]
    }
}

/// Measurement settings, instrument and its uncertainties.
#[derive(Debug, Clone, PartialEq)]
pub enum Setup {
    OneQubit {
        settings: Vec<SettingRow1Q>,
        instrument: InstrumentParams,
        uncertainty: Uncertainty1Q,
    },
    TwoQubit {
        settings: Settings2Q,
        instrument_a: InstrumentParams,
        instrument_b: InstrumentParams,
        uncertainty: Uncertainty2Q,
    },
}

impl Setup {
    pub fn qubits(&self) -> Qubits {
        match self {
            Setup::OneQubit { .. } => Qubits::One,
            Setup::TwoQubit { .. } => Qubits::Two,
        }
    }

    pub fn n_measurements(&self) -> usize {
        match self {
            Setup::OneQubit { settings, .. } => settings.len(),
            Setup::TwoQubit { settings, .. } => settings.len(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            Setup::OneQubit { settings, .. } => settings.iter().map(|r| r.label.clone()).collect(),
            Setup::TwoQubit { settings, .. } => settings.labels(),
        }
    }

    /// Checks the pairing the crosstalk model relies on: six rows per qubit,
    /// consecutive rows share angles and cover the H then V port.
    pub fn validate(&self) -> Result<(), ModelError> {
        fn check_pairs<T>(rows: &[T], same: impl Fn(&T, &T) -> bool, port: impl Fn(&T) -> Port) -> Result<(), ModelError> {
            if rows.len() != 6 {
                return Err(ModelError::Invalid(format!("expected 6 settings rows per qubit, got {}", rows.len())));
            }
            for k in 0..3 {
                let (h, v) = (&rows[2 * k], &rows[2 * k + 1]);
                if port(h) != Port::H || port(v) != Port::V {
                    return Err(ModelError::Invalid(format!("settings rows {} and {} must be the H then V port", 2 * k, 2 * k + 1)));
                }
                if !same(h, v) {
                    return Err(ModelError::Invalid(format!("settings rows {} and {} must share waveplate settings", 2 * k, 2 * k + 1)));
                }
            }
            Ok(())
        }
        fn check_sigmas(named: &[(&'static str, f64)]) -> Result<(), ModelError> {
            for (name, s) in named {
                if !(s.is_finite() && *s >= 0.0) {
                    return Err(ModelError::Invalid(format!("uncertainty `{name}` = {s} must be finite and non-negative")));
                }
            }
            Ok(())
        }
        match self {
            Setup::OneQubit { settings, instrument, uncertainty } => {
                instrument.validate()?;
                check_sigmas(&uncertainty.named())?;
                check_pairs(
                    settings,
                    |a, b| a.eta_h == b.eta_h && a.eta_q == b.eta_q && a.theta_h == b.theta_h && a.theta_q == b.theta_q,
                    |r| r.port,
                )
            }
            Setup::TwoQubit { settings, instrument_a, instrument_b, uncertainty } => {
                instrument_a.validate()?;
                instrument_b.validate()?;
                check_sigmas(&uncertainty.named())?;
                for rows in [&settings.qubit_a, &settings.qubit_b] {
                    check_pairs(rows, |a, b| a.theta_h == b.theta_h && a.theta_q == b.theta_q, |r| r.port)?;
                }
                Ok(())
            }
        }
    }
}

/// A complete tomography experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub setup: Setup,
    pub counts: Vec<u64>,
    pub sigma_mode: SigmaMode,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.setup.validate()?;
        let n = self.setup.n_measurements();
        if self.counts.len() != n {
            return Err(ModelError::Invalid(format!("expected {n} counts, got {}", self.counts.len())));
        }
        if self.counts.iter().all(|&c| c == 0) {
            return Err(ModelError::Invalid("all counts are zero".into()));
        }
        Ok(())
    }

    pub fn counts_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Flux estimate from the nominal instrument.
    pub fn flux_estimate(&self) -> Result<FluxEstimate, ModelError> {
        let counts = self.counts_f64();
        Ok(match &self.setup {
            Setup::OneQubit { instrument, .. } => estimate_flux_1q(&counts, instrument)?,
            Setup::TwoQubit { instrument_a, instrument_b, .. } => estimate_flux_2q(&counts, instrument_a, instrument_b)?,
        })
    }
}

/// Names and supports of the latent vector for a problem size.
pub fn layout_for_qubits(q: Qubits) -> LatentLayout {
    let mut entries = Vec::new();
    let mut push = |prefix: &str, n: usize, support: Support| {
        for k in 0..n {
            entries.push(LatentEntry { name: format!("{prefix}{k}"), support });
        }
    };
    let bounded = Support::Interval { lo: -1.0, hi: 1.0 };
    match q {
        Qubits::One => {
            push("t", 4, bounded);
            push("zFlux", 3, Support::Real);
            push("zEta", 2, Support::Real);
            push("zWP", 2, Support::Real);
            push("zPBS", 4, Support::Real);
        }
        Qubits::Two => {
            push("t", 16, bounded);
            push("zFlux", 9, Support::Real);
            push("zWP", 4, Support::Real);
            push("zPBS", 8, Support::Real);
        }
    }
    LatentLayout { entries }
}

/// Names and supports of the latent vector.
pub fn latent_layout(config: &ExperimentConfig) -> LatentLayout {
    layout_for_qubits(config.setup.qubits())
}

/// A tomography posterior ready for evaluation.
#[derive(Debug, Clone)]
pub struct TomographyModel {
    config: ExperimentConfig,
    layout: LatentLayout,
    flux_nominal: Vec<f64>,
    flux_sigma: f64,
    coef_nominal: Vec<f64>,
    coef_sigma: f64,
    observed: Vec<f64>,
    like_sigma: Vec<f64>,
    warnings: Vec<String>,
}

/// Offsets of the latent blocks.
#[derive(Debug, Clone, Copy)]
struct Blocks {
    n_t: usize,
    flux: usize,
    n_flux: usize,
    /// 1Q: zEta then zWP; 2Q: zWP only.
    angles: usize,
    pbs: usize,
}

impl TomographyModel {
    pub fn new(config: ExperimentConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let estimate = config.flux_estimate()?;
        let (flux_nominal, warnings) = estimate.clamped(FLUX_FLOOR);
        let flux_sigma = flux_nominal.iter().copied().fold(0.0, f64::max).sqrt();
        let (coef_nominal, coef_sigma) = match &config.setup {
            Setup::OneQubit { instrument, uncertainty, .. } => (instrument.block().to_vec(), uncertainty.crosstalk_sigma()),
            Setup::TwoQubit { instrument_a, instrument_b, uncertainty, .. } => {
                let mut c = instrument_a.block().to_vec();
                c.extend(instrument_b.block());
                (c, uncertainty.crosstalk_sigma())
            }
        };
        let observed = config.counts_f64();
        let max_count = observed.iter().copied().fold(0.0, f64::max);
        let like_sigma = match config.sigma_mode {
            SigmaMode::MaxCounts => vec![max_count.sqrt(); observed.len()],
            SigmaMode::PerMeasurement => observed.iter().map(|&n| n.max(1.0).sqrt()).collect(),
        };
        let layout = latent_layout(&config);
        Ok(Self { config, layout, flux_nominal, flux_sigma, coef_nominal, coef_sigma, observed, like_sigma, warnings })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn layout(&self) -> &LatentLayout {
        &self.layout
    }

    pub fn qubits(&self) -> Qubits {
        self.config.setup.qubits()
    }

    /// Flux values centring the flux prior, after clamping.
    pub fn flux_nominal(&self) -> &[f64] {
        &self.flux_nominal
    }

    pub fn flux_sigma(&self) -> f64 {
        self.flux_sigma
    }

    /// Likelihood standard deviation per measurement.
    pub fn likelihood_sigma(&self) -> &[f64] {
        &self.like_sigma
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    /// Non-fatal issues found while building the model.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn blocks(&self) -> Blocks {
        match self.qubits() {
            Qubits::One => Blocks { n_t: 4, flux: 4, n_flux: 3, angles: 7, pbs: 11 },
            Qubits::Two => Blocks { n_t: 16, flux: 16, n_flux: 9, angles: 25, pbs: 29 },
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ModelError> {
        let expected = self.layout.dim();
        if x.len() != expected {
            return Err(ModelError::Dimension { expected, got: x.len() });
        }
        Ok(())
    }

    /// Expected counts for every measurement at latent point `x`.
    pub fn mean_counts<R: Real>(&self, x: &[R]) -> Vec<R> {
        let b = self.blocks();
        let flux: Vec<R> = (0..b.n_flux)
            .map(|k| (x[b.flux + k] * self.flux_sigma + self.flux_nominal[k]).abs())
            .collect();
        let coef: Vec<R> = self
            .coef_nominal
            .iter()
            .enumerate()
            .map(|(k, &c)| (x[b.pbs + k] * self.coef_sigma + c).abs())
            .collect();
        match &self.config.setup {
            Setup::OneQubit { settings, uncertainty: u, .. } => {
                let e = elements_1q(&x[..b.n_t]);
                let z = &x[b.angles..b.angles + 4];
                let (d_eta_h, d_eta_q) = (z[0] * u.eta_h, z[1] * u.eta_q);
                let (d_theta_q, d_theta_h) = (z[2] * u.theta_q, z[3] * u.theta_h);
                let weighted: Vec<R> = settings
                    .iter()
                    .enumerate()
                    .map(|(j, row)| {
                        let ang = Angles1Q {
                            eta_h: d_eta_h + row.eta_h,
                            eta_q: d_eta_q + row.eta_q,
                            theta_h: d_theta_h + row.theta_h,
                            theta_q: d_theta_q + row.theta_q,
                        };
                        prob_1q_closed(&e, &ang, row.port) * flux[flux_index_1q(j)]
                    })
                    .collect();
                apply_arm(&[coef[0], coef[1], coef[2], coef[3]], &weighted)
            }
            Setup::TwoQubit { settings, uncertainty: u, .. } => {
                let e = elements_2q(&x[..b.n_t]);
                let z = &x[b.angles..b.angles + 4];
                let (d_qa, d_ha, d_qb, d_hb) = (z[0] * u.theta_q_a, z[1] * u.theta_h_a, z[2] * u.theta_q_b, z[3] * u.theta_h_b);
                let weighted: Vec<R> = settings
                    .rows()
                    .enumerate()
                    .map(|(j, row)| {
                        let ang = Angles2Q {
                            theta_h_a: d_ha + row.a.theta_h,
                            theta_q_a: d_qa + row.a.theta_q,
                            theta_h_b: d_hb + row.b.theta_h,
                            theta_q_b: d_qb + row.b.theta_q,
                        };
                        prob_2q_closed(&e, &ang, row.a.port, row.b.port) * flux[flux_index_2q(j)]
                    })
                    .collect();
                apply_kron_arms(&[coef[0], coef[1], coef[2], coef[3]], &[coef[4], coef[5], coef[6], coef[7]], &weighted)
            }
        }
    }

    /// Unnormalized log posterior on any scalar type; `None` outside the support.
    fn eval<R: Real>(&self, x: &[R]) -> Option<R> {
        let b = self.blocks();
        if x[..b.n_t].iter().any(|t| !(-1.0..=1.0).contains(&t.value())) {
            return None;
        }
        let mut acc = x[0].lift(0.0);
        for z in &x[b.n_t..] {
            acc = acc - z.sq() * 0.5 - LN_SQRT_2PI;
        }
        let mean = self.mean_counts(x);
        for ((m, &n), &s) in mean.into_iter().zip(&self.observed).zip(&self.like_sigma) {
            let r = (m - n) / s;
            acc = acc - r.sq() * 0.5 - (s.ln() + LN_SQRT_2PI) - (m / s).ln_norm_cdf();
        }
        Some(acc)
    }

    /// Unnormalized log posterior; `-∞` outside the support of the `t` priors.
    pub fn log_posterior(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(x)?;
        Ok(self.eval(x).unwrap_or(f64::NEG_INFINITY))
    }

    /// Names of the folded quantities whose argument is exactly zero at `x`.
    fn folds_at(&self, x: &[f64]) -> Vec<String> {
        let b = self.blocks();
        let mut hits = Vec::new();
        for k in 0..b.n_flux {
            if x[b.flux + k] * self.flux_sigma + self.flux_nominal[k] == 0.0 {
                hits.push(self.layout.entries[b.flux + k].name.clone());
            }
        }
        for (k, &c) in self.coef_nominal.iter().enumerate() {
            if x[b.pbs + k] * self.coef_sigma + c == 0.0 {
                hits.push(self.layout.entries[b.pbs + k].name.clone());
            }
        }
        hits
    }

    /// Gradient of [`Self::log_posterior`]. Fails where a folded flux or
    /// crosstalk coefficient is exactly zero, or outside the support.
    pub fn log_posterior_gradient(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_dim(x)?;
        if let Some(name) = self.folds_at(x).into_iter().next() {
            return Err(ModelError::NonDifferentiable(name));
        }
        let (v, g) = self.value_and_grad(x);
        if !v.is_finite() {
            return Err(ModelError::Invalid("gradient requested outside the support".into()));
        }
        Ok(g)
    }

    /// Value and gradient with subgradient 0 at folds; `-∞` and a zero
    /// gradient outside the support.
    pub fn value_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut outside = false;
        let (v, g) = ad::gradient(x, |xs| match self.eval(xs) {
            Some(v) => v,
            None => {
                outside = true;
                xs[0].lift(0.0)
            }
        });
        if outside {
            (f64::NEG_INFINITY, vec![0.0; x.len()])
        } else {
            (v, g)
        }
    }

    /// Names of the per-sample derived quantities.
    pub fn derived_names(&self) -> Vec<String> {
        match self.qubits() {
            Qubits::One => ELEMENT_NAMES_1Q.iter().chain(&["S1", "S2", "S3"]).map(|s| s.to_string()).collect(),
            Qubits::Two => {
                let mut names: Vec<String> = ELEMENT_NAMES_2Q.iter().map(|s| s.to_string()).collect();
                for i in 0..4 {
                    for j in 0..4 {
                        names.push(format!("S{i}{j}"));
                    }
                }
                names
            }
        }
    }

    /// Density-matrix elements and Stokes parameters at `x`, in
    /// [`Self::derived_names`] order.
    pub fn derived(&self, x: &[f64]) -> Vec<f64> {
        match self.qubits() {
            Qubits::One => {
                let e: Elements1Q<f64> = elements_1q(&x[..4]);
                let mut v = e.to_vec();
                v.extend(Stokes1Q::from_elements(&e).to_array());
                v
            }
            Qubits::Two => {
                let e: Elements2Q<f64> = elements_2q(&x[..16]);
                let mut v = e.to_vec();
                v.extend(stokes_2q_from_elements(&e).iter().flatten());
                v
            }
        }
    }
}

impl TomographyModel {
    /// Samples the posterior and appends the derived quantities to the trace.
    pub fn sample(&self, cfg: &SamplerConfig) -> Result<Trace, SamplerError> {
        let mut trace = sampler::sample(self, &self.layout, cfg)?;
        trace.add_derived(&self.derived_names(), |x| self.derived(x))?;
        Ok(trace)
    }
}

impl LogDensity for TomographyModel {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (v, g) = self.value_and_grad(x);
        grad.copy_from_slice(&g);
        v
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.eval(x).unwrap_or(f64::NEG_INFINITY)
    }
}

/// Unnormalized log posterior of `config` at `x`.
pub fn log_posterior(config: &ExperimentConfig, x: &[f64]) -> Result<f64, ModelError> {
    TomographyModel::new(config.clone())?.log_posterior(x)
}

/// Gradient of the log posterior of `config` at `x`.
pub fn log_posterior_gradient(config: &ExperimentConfig, x: &[f64]) -> Result<Vec<f64>, ModelError> {
    TomographyModel::new(config.clone())?.log_posterior_gradient(x)
}
