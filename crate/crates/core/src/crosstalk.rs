//! Detector crosstalk and photon-flux estimation.
//!
//! Each beam splitter mixes its two ports through a 2x2 block
//! `[[μ T_H, μ T_V], [ν R_H, ν R_V]]`: `T` and `R` are the transmitted and
//! reflected fractions of H and V light and `μ`, `ν` the efficiencies of the
//! transmitted and reflected detectors. One qubit uses `I₃ ⊗ block`, two
//! qubits the Kronecker product of both arms.

use thiserror::Error;

use crate::ad::Real;
use crate::linalg::{pinv, LinalgError, RMat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrosstalkError {
    #[error("instrument parameter `{name}` = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("expected {expected} counts, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("flux vector has length {0}; expected 3 or 9")]
    BadFluxLength(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Beam-splitter and detector parameters of one measurement arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstrumentParams {
    pub mu: f64,
    pub nu: f64,
    pub th: f64,
    pub tv: f64,
    pub rh: f64,
    pub rv: f64,
}

impl InstrumentParams {
    pub fn validate(&self) -> Result<(), CrosstalkError> {
        for (name, value) in self.named() {
            if !(0.0..=1.0).contains(&value) {
                return Err(CrosstalkError::OutOfRange { name, value });
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 6] {
        [("mu", self.mu), ("nu", self.nu), ("th", self.th), ("tv", self.tv), ("rh", self.rh), ("rv", self.rv)]
    }

    /// The 2x2 block, row-major: `[μT_H, μT_V, νR_H, νR_V]`.
    pub fn block(&self) -> [f64; 4] {
        [self.mu * self.th, self.mu * self.tv, self.nu * self.rh, self.nu * self.rv]
    }
}

fn block_matrix(b: &[f64; 4]) -> RMat {
    RMat::from_rows(2, 2, b.to_vec()).expect("fixed shape")
}

/// `I₃ ⊗ block` for one arm given its row-major 2x2 block.
pub fn arm_matrix(block: &[f64; 4]) -> RMat {
    RMat::identity(3).kron(&block_matrix(block))
}

/// 6x6 single-qubit crosstalk matrix.
pub fn crosstalk_1q(p: &InstrumentParams) -> Result<RMat, CrosstalkError> {
    p.validate()?;
    Ok(arm_matrix(&p.block()))
}

/// 36x36 two-qubit crosstalk matrix `(I₃ ⊗ C_A) ⊗ (I₃ ⊗ C_B)`.
pub fn crosstalk_2q(a: &InstrumentParams, b: &InstrumentParams) -> Result<RMat, CrosstalkError> {
    a.validate()?;
    b.validate()?;
    Ok(arm_matrix(&a.block()).kron(&arm_matrix(&b.block())))
}

/// Applies `I₃ ⊗ block` to a length-6 vector without forming the matrix.
pub fn apply_arm<R: Real>(block: &[R; 4], x: &[R]) -> Vec<R> {
    assert_eq!(x.len(), 6);
    let mut out = Vec::with_capacity(6);
    for k in 0..3 {
        let (h, v) = (x[2 * k], x[2 * k + 1]);
        out.push(block[0] * h + block[1] * v);
        out.push(block[2] * h + block[3] * v);
    }
    out
}

/// Applies `(I₃ ⊗ A) ⊗ (I₃ ⊗ B)` to a length-36 vector indexed `6a + b`.
pub fn apply_kron_arms<R: Real>(block_a: &[R; 4], block_b: &[R; 4], x: &[R]) -> Vec<R> {
    assert_eq!(x.len(), 36);
    // Apply B within each group of six, then A across groups.
    let mut y = Vec::with_capacity(36);
    for ia in 0..6 {
        y.extend(apply_arm(block_b, &x[6 * ia..6 * ia + 6]));
    }
    let mut out = y.clone();
    for ib in 0..6 {
        let col: Vec<R> = (0..6).map(|ia| y[6 * ia + ib]).collect();
        for (ia, v) in apply_arm(block_a, &col).into_iter().enumerate() {
            out[6 * ia + ib] = v;
        }
    }
    out
}

/// Per-basis photon flux inferred from counts.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxEstimate {
    /// One entry per basis: 3 for one qubit, 9 for two.
    pub values: Vec<f64>,
}

/// Index of the basis flux feeding measurement `j` of a one-qubit experiment.
pub fn flux_index_1q(j: usize) -> usize {
    j / 2
}

/// Index of the basis-pair flux feeding measurement `j` of a two-qubit experiment.
pub fn flux_index_2q(j: usize) -> usize {
    3 * (j / 12) + (j % 6) / 2
}

impl FluxEstimate {
    /// Flux per measurement (6 or 36 entries).
    pub fn expand(&self) -> Result<Vec<f64>, CrosstalkError> {
        match self.values.len() {
            3 => Ok((0..6).map(|j| self.values[flux_index_1q(j)]).collect()),
            9 => Ok((0..36).map(|j| self.values[flux_index_2q(j)]).collect()),
            n => Err(CrosstalkError::BadFluxLength(n)),
        }
    }

    /// Values clamped to at least `floor`, with a message per clamped entry.
    pub fn clamped(&self, floor: f64) -> (Vec<f64>, Vec<String>) {
        let mut warnings = Vec::new();
        let v = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &f)| {
                if f < floor {
                    warnings.push(format!("flux estimate {k} = {f} clamped to {floor}"));
                    floor
                } else {
                    f
                }
            })
            .collect();
        (v, warnings)
    }
}

fn check_len(counts: &[f64], n: usize) -> Result<(), CrosstalkError> {
    if counts.len() != n {
        return Err(CrosstalkError::BadLength { expected: n, got: counts.len() });
    }
    Ok(())
}

/// Flux per basis: invert the crosstalk on each count pair and sum the ports.
pub fn estimate_flux_1q(counts: &[f64], p: &InstrumentParams) -> Result<FluxEstimate, CrosstalkError> {
    check_len(counts, 6)?;
    let unmixed = pinv(&crosstalk_1q(p)?)?.matvec(counts)?;
    Ok(FluxEstimate { values: (0..3).map(|k| unmixed[2 * k] + unmixed[2 * k + 1]).collect() })
}

/// Flux per pair of bases, rounded to whole photons: the four port
/// combinations of each pair are summed after inverting the crosstalk.
pub fn estimate_flux_2q(
    counts: &[f64],
    a: &InstrumentParams,
    b: &InstrumentParams,
) -> Result<FluxEstimate, CrosstalkError> {
    check_len(counts, 36)?;
    let unmixed = pinv(&crosstalk_2q(a, b)?)?.matvec(counts)?;
    let mut values = vec![0.0; 9];
    for (j, u) in unmixed.iter().enumerate() {
        values[flux_index_2q(j)] += u;
    }
    Ok(FluxEstimate { values: values.into_iter().map(f64::round).collect() })
}
