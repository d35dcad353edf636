//! Forward simulation of tomography counts with instrument systematics and
//! Poisson shot noise.
//!
//! Random draws happen in a fixed order from a seeded ChaCha stream. Two
//! qubits: angle offsets for QWP A, QWP B, HWP A, HWP B; four crosstalk
//! perturbations for arm A then arm B (row-major); one Poisson draw per
//! measurement. One qubit: offsets for QWP angle, HWP angle, HWP retardance,
//! QWP retardance; four crosstalk perturbations; Poisson draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

use crate::crosstalk::{apply_arm, apply_kron_arms};
use crate::model::{ExperimentConfig, ModelError, SigmaMode, Setup};
use crate::optics::{prob_1q_direct, prob_2q_direct, OpticsError, SettingRow2Q, WaveplateRow};
use crate::qstate::DensityMatrix;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("invalid simulation spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
}

/// Everything needed to synthesize one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub true_state: DensityMatrix,
    /// Photons (one qubit) or biphotons (two qubits) per basis.
    pub flux: f64,
    /// Settings, nominal instrument and the widths of its systematic errors.
    pub setup: Setup,
    pub seed: u64,
}

/// The systematic errors realized by one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Realized {
    /// `(name, offset)` pairs in draw order, radians.
    pub angle_offsets: Vec<(String, f64)>,
    /// Perturbed crosstalk blocks `[μT_H, μT_V, νR_H, νR_V]`, one per arm.
    pub crosstalk: Vec<[f64; 4]>,
    /// Poisson means fed to the count draw.
    pub mean_counts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub counts: Vec<u64>,
    pub realized: Realized,
}

impl Simulation {
    /// The simulated dataset as a fit-ready experiment.
    pub fn to_config(&self, spec: &SimSpec, sigma_mode: SigmaMode) -> ExperimentConfig {
        ExperimentConfig { setup: spec.setup.clone(), counts: self.counts.clone(), sigma_mode }
    }
}

fn offset(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    Normal::new(0.0, sd).expect("validated sigma").sample(rng)
}

fn perturb_block(rng: &mut ChaCha8Rng, nominal: [f64; 4], sd: f64) -> [f64; 4] {
    nominal.map(|c| (c + offset(rng, sd)).abs().min(1.0))
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as u64
}

fn shifted(row: &WaveplateRow, d_h: f64, d_q: f64) -> WaveplateRow {
    WaveplateRow { theta_h: row.theta_h + d_h, theta_q: row.theta_q + d_q, ..row.clone() }
}

/// Draws one synthetic dataset.
pub fn simulate_counts(spec: &SimSpec) -> Result<Simulation, SimulateError> {
    if !(spec.flux.is_finite() && spec.flux >= 0.0) {
        return Err(SimulateError::Invalid(format!("flux {} must be finite and non-negative", spec.flux)));
    }
    spec.setup.validate()?;
    if spec.true_state.qubits() != spec.setup.qubits() {
        return Err(SimulateError::Invalid("state size does not match the settings".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rho = &spec.true_state;
    let realized = match &spec.setup {
        Setup::OneQubit { settings, instrument, uncertainty: u } => {
            let d_q = offset(&mut rng, u.theta_q);
            let d_h = offset(&mut rng, u.theta_h);
            let d_eta_h = offset(&mut rng, u.eta_h);
            let d_eta_q = offset(&mut rng, u.eta_q);
            let block = perturb_block(&mut rng, instrument.block(), u.crosstalk_sigma());
            let mut weighted = Vec::with_capacity(settings.len());
            for row in settings {
                let mut r = row.clone();
                r.theta_q += d_q;
                r.theta_h += d_h;
                r.eta_h += d_eta_h;
                r.eta_q += d_eta_q;
                weighted.push(prob_1q_direct(rho, &r)? * spec.flux);
            }
            Realized {
                angle_offsets: vec![
                    ("theta_q".into(), d_q),
                    ("theta_h".into(), d_h),
                    ("eta_h".into(), d_eta_h),
                    ("eta_q".into(), d_eta_q),
                ],
                crosstalk: vec![block],
                mean_counts: apply_arm(&block, &weighted),
            }
        }
        Setup::TwoQubit { settings, instrument_a, instrument_b, uncertainty: u } => {
            let d_qa = offset(&mut rng, u.theta_q_a);
            let d_qb = offset(&mut rng, u.theta_q_b);
            let d_ha = offset(&mut rng, u.theta_h_a);
            let d_hb = offset(&mut rng, u.theta_h_b);
            let sd = u.crosstalk_sigma();
            let block_a = perturb_block(&mut rng, instrument_a.block(), sd);
            let block_b = perturb_block(&mut rng, instrument_b.block(), sd);
            let rows_a: Vec<WaveplateRow> = settings.qubit_a.iter().map(|r| shifted(r, d_ha, d_qa)).collect();
            let rows_b: Vec<WaveplateRow> = settings.qubit_b.iter().map(|r| shifted(r, d_hb, d_qb)).collect();
            let mut weighted = Vec::with_capacity(36);
            for a in &rows_a {
                for b in &rows_b {
                    weighted.push(prob_2q_direct(rho, SettingRow2Q { a, b })? * spec.flux);
                }
            }
            Realized {
                angle_offsets: vec![
                    ("theta_q_a".into(), d_qa),
                    ("theta_q_b".into(), d_qb),
                    ("theta_h_a".into(), d_ha),
                    ("theta_h_b".into(), d_hb),
                ],
                crosstalk: vec![block_a, block_b],
                mean_counts: apply_kron_arms(&block_a, &block_b, &weighted),
            }
        }
    };
    let counts = realized.mean_counts.iter().map(|&m| poisson(&mut rng, m)).collect();
    Ok(Simulation { counts, realized })
}

/// Simulates `seeds.len()` datasets in parallel, one per seed.
pub fn simulate_batch(spec: &SimSpec, seeds: &[u64]) -> Result<Vec<Simulation>, SimulateError> {
    use rayon::prelude::*;
    seeds
        .par_iter()
        .map(|&seed| simulate_counts(&SimSpec { seed, ..spec.clone() }))
        .collect()
}
