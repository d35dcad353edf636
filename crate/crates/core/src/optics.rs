//! Waveplate operators, measurement-setting tables and outcome probabilities.
//!
//! Each measurement rotates the polarization with a half-wave plate after a
//! quarter-wave plate (or two liquid-crystal retarders) and then projects onto
//! one output port of a polarizing beam splitter: `H` (transmitted) or `V`
//! (reflected). Probabilities are available two ways: a direct matrix product
//! `⟨ψ|M ρ M†|ψ⟩` and a closed form in the density-matrix elements that the
//! model evaluates on differentiable scalars.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::ad::Real;
use crate::linalg::CMat;
use crate::qstate::{DensityMatrix, Elements1Q, Elements2Q, Qubits};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OpticsError {
    #[error("unknown settings table `{0}` (expected liquid_crystal, standard or two_qubit)")]
    UnknownTable(String),
    #[error("a {expected:?} setting cannot be applied to a {got:?} state")]
    QubitMismatch { expected: Qubits, got: Qubits },
}

/// Beam-splitter output port a measurement projects onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Port {
    /// Transmitted port, `h = 1, v = 0`.
    H,
    /// Reflected port, `h = 0, v = 1`.
    V,
}

impl Port {
    pub fn h(self) -> f64 {
        match self {
            Port::H => 1.0,
            Port::V => 0.0,
        }
    }

    pub fn v(self) -> f64 {
        1.0 - self.h()
    }

    pub fn ket(self) -> [Complex64; 2] {
        [Complex64::new(self.h(), 0.0), Complex64::new(self.v(), 0.0)]
    }
}

/// One single-qubit measurement: retardances and fast-axis angles of the
/// half-wave-position and quarter-wave-position retarders, and the port.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingRow1Q {
    pub label: String,
    pub eta_h: f64,
    pub eta_q: f64,
    pub theta_h: f64,
    pub theta_q: f64,
    pub port: Port,
}

/// Waveplate angles and port for one qubit of a two-qubit measurement.
/// Retardances are fixed at `π` (half-wave) and `π/2` (quarter-wave).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveplateRow {
    pub label: String,
    pub theta_h: f64,
    pub theta_q: f64,
    pub port: Port,
}

/// One two-qubit measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettingRow2Q<'a> {
    pub a: &'a WaveplateRow,
    pub b: &'a WaveplateRow,
}

/// Two-qubit settings as the product of per-qubit lists. Row `r` of the
/// joint list pairs `qubit_a[r / n]` with `qubit_b[r % n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings2Q {
    pub qubit_a: Vec<WaveplateRow>,
    pub qubit_b: Vec<WaveplateRow>,
}

impl Settings2Q {
    pub fn len(&self) -> usize {
        self.qubit_a.len() * self.qubit_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, r: usize) -> SettingRow2Q<'_> {
        let n = self.qubit_b.len();
        SettingRow2Q { a: &self.qubit_a[r / n], b: &self.qubit_b[r % n] }
    }

    pub fn rows(&self) -> impl Iterator<Item = SettingRow2Q<'_>> {
        (0..self.len()).map(move |r| self.row(r))
    }

    pub fn labels(&self) -> Vec<String> {
        self.rows().map(|r| format!("{}{}", r.a.label, r.b.label)).collect()
    }
}

/// Built-in settings tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableKind {
    /// Single qubit, variable-retardance liquid-crystal retarders at fixed angles.
    LiquidCrystal,
    /// Single qubit, rotating half- and quarter-wave plates.
    Standard,
    /// Two qubits, rotating waveplates on each arm.
    TwoQubit,
}

impl TableKind {
    pub fn name(self) -> &'static str {
        match self {
            TableKind::LiquidCrystal => "liquid_crystal",
            TableKind::Standard => "standard",
            TableKind::TwoQubit => "two_qubit",
        }
    }
}

impl FromStr for TableKind {
    type Err = OpticsError;
    fn from_str(s: &str) -> Result<Self, OpticsError> {
        match s {
            "liquid_crystal" => Ok(TableKind::LiquidCrystal),
            "standard" => Ok(TableKind::Standard),
            "two_qubit" => Ok(TableKind::TwoQubit),
            other => Err(OpticsError::UnknownTable(other.to_string())),
        }
    }
}

/// Settings for either problem size.
#[derive(Debug, Clone, PartialEq)]
pub enum SettingsTable {
    One(Vec<SettingRow1Q>),
    Two(Settings2Q),
}

const LABELS: [&str; 6] = ["H", "V", "D", "A", "L", "R"];

/// Per-qubit waveplate angles `(θ_H, θ_Q)` for the H/V, D/A and L/R bases.
const WAVEPLATE_ANGLES: [(f64, f64); 3] = [(0.0, 0.0), (FRAC_PI_8, FRAC_PI_4), (0.0, FRAC_PI_4)];

fn port_of(k: usize) -> Port {
    if k % 2 == 0 {
        Port::H
    } else {
        Port::V
    }
}

/// Per-qubit rows projecting onto H, V, D, A, L, R.
pub fn waveplate_rows() -> Vec<WaveplateRow> {
    (0..6)
        .map(|k| {
            let (theta_h, theta_q) = WAVEPLATE_ANGLES[k / 2];
            WaveplateRow { label: LABELS[k].to_string(), theta_h, theta_q, port: port_of(k) }
        })
        .collect()
}

/// The built-in table of the given kind.
pub fn settings_table(kind: TableKind) -> SettingsTable {
    match kind {
        TableKind::LiquidCrystal => {
            // Retardances (η_H, η_Q) per basis; angles fixed at θ_H = π/8, θ_Q = π/4.
            let etas = [(0.0, 0.0), (PI, 0.0), (0.0, FRAC_PI_2)];
            SettingsTable::One(
                (0..6)
                    .map(|k| SettingRow1Q {
                        label: LABELS[k].to_string(),
                        eta_h: etas[k / 2].0,
                        eta_q: etas[k / 2].1,
                        theta_h: FRAC_PI_8,
                        theta_q: FRAC_PI_4,
                        port: port_of(k),
                    })
                    .collect(),
            )
        }
        TableKind::Standard => SettingsTable::One(
            waveplate_rows()
                .into_iter()
                .map(|w| SettingRow1Q {
                    label: w.label,
                    eta_h: PI,
                    eta_q: FRAC_PI_2,
                    theta_h: w.theta_h,
                    theta_q: w.theta_q,
                    port: w.port,
                })
                .collect(),
        ),
        TableKind::TwoQubit => SettingsTable::Two(Settings2Q { qubit_a: waveplate_rows(), qubit_b: waveplate_rows() }),
    }
}

/// Jones matrix of a retarder with retardance `eta` and fast axis at `theta`:
/// `e^{-iη/2} R(θ) diag(1, e^{iη}) R(θ)ᵀ`.
pub fn awp(eta: f64, theta: f64) -> CMat {
    let (s, c) = theta.sin_cos();
    let e = Complex64::from_polar(1.0, eta);
    let one = Complex64::new(1.0, 0.0);
    let off = (one - e) * (c * s);
    let m = vec![c * c + e * (s * s), off, off, e * (c * c) + s * s];
    CMat::from_rows(2, 2, m).expect("fixed shape").scale(Complex64::from_polar(1.0, -eta / 2.0))
}

/// Quarter-wave plate at `theta`.
pub fn quarter_wave(theta: f64) -> CMat {
    awp(FRAC_PI_2, theta)
}

/// Half-wave plate at `theta`.
pub fn half_wave(theta: f64) -> CMat {
    awp(PI, theta)
}

/// Combined rotation: quarter-wave plate at `theta_q`, then half-wave plate at `theta_h`.
pub fn rotation_operator(theta_q: f64, theta_h: f64) -> CMat {
    &half_wave(theta_h) * &quarter_wave(theta_q)
}

/// Single-qubit outcome probability by direct matrix product.
pub fn prob_1q_direct(rho: &DensityMatrix, row: &SettingRow1Q) -> Result<f64, OpticsError> {
    if rho.qubits() != Qubits::One {
        return Err(OpticsError::QubitMismatch { expected: Qubits::One, got: rho.qubits() });
    }
    let m = &awp(row.eta_h, row.theta_h) * &awp(row.eta_q, row.theta_q);
    let evolved = &(&m * rho.matrix()) * &m.adjoint();
    let psi = row.port.ket();
    Ok(evolved.sandwich(&psi, &psi).re)
}

/// Two-qubit outcome probability by direct matrix product.
pub fn prob_2q_direct(rho: &DensityMatrix, row: SettingRow2Q<'_>) -> Result<f64, OpticsError> {
    if rho.qubits() != Qubits::Two {
        return Err(OpticsError::QubitMismatch { expected: Qubits::Two, got: rho.qubits() });
    }
    let ua = rotation_operator(row.a.theta_q, row.a.theta_h);
    let ub = rotation_operator(row.b.theta_q, row.b.theta_h);
    let m = ua.kron(&ub);
    let evolved = &(&m * rho.matrix()) * &m.adjoint();
    let (a, b) = (row.a.port.ket(), row.b.port.ket());
    let psi = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]];
    Ok(evolved.sandwich(&psi, &psi).re)
}

/// Retarder parameters of a single-qubit measurement, possibly perturbed.
#[derive(Debug, Clone, Copy)]
pub struct Angles1Q<R> {
    pub eta_h: R,
    pub eta_q: R,
    pub theta_h: R,
    pub theta_q: R,
}

/// Waveplate angles of a two-qubit measurement, possibly perturbed.
#[derive(Debug, Clone, Copy)]
pub struct Angles2Q<R> {
    pub theta_h_a: R,
    pub theta_q_a: R,
    pub theta_h_b: R,
    pub theta_q_b: R,
}

impl SettingRow1Q {
    pub fn angles(&self) -> Angles1Q<f64> {
        Angles1Q { eta_h: self.eta_h, eta_q: self.eta_q, theta_h: self.theta_h, theta_q: self.theta_q }
    }
}

impl SettingRow2Q<'_> {
    pub fn angles(&self) -> Angles2Q<f64> {
        Angles2Q {
            theta_h_a: self.a.theta_h,
            theta_q_a: self.a.theta_q,
            theta_h_b: self.b.theta_h,
            theta_q_b: self.b.theta_q,
        }
    }
}

/// Single-qubit outcome probability in closed form.
pub fn prob_1q_closed<R: Real>(e: &Elements1Q<R>, ang: &Angles1Q<R>, port: Port) -> R {
    let (h, v) = (port.h(), port.v());
    let hv = h - v;
    let (a, b, re_c, im_c) = (e.a, e.b, e.re_c, e.im_c);
    let amb = a - b;
    let (eh, eq, th, tq) = (ang.eta_h, ang.eta_q, ang.theta_h, ang.theta_q);

    let sin_eh = eh.sin();
    let sin_eq = eq.sin();
    let cos_eh = eh.cos();
    let cos_eq = eq.cos();
    let s2_half_eh = (eh * 0.5).sin().sq();
    let s2_half_eq = (eq * 0.5).sin().sq();
    let c2_half_eq = (eq * 0.5).cos().sq();
    let sin_2th = (th * 2.0).sin();
    let cos_2th = (th * 2.0).cos();
    let sin_4th = (th * 4.0).sin();
    let cos_4th = (th * 4.0).cos();
    let sin_2tq = (tq * 2.0).sin();
    let cos_2tq = (tq * 2.0).cos();
    let sin_4tq = (tq * 4.0).sin();
    let cos_4tq = (tq * 4.0).cos();

    let inner = amb * (eh + eq).cos() * 2.0
        + cos_eq * (amb + im_c * sin_eh * sin_2th * 8.0) * 4.0
        + c2_half_eq * s2_half_eh * (amb * cos_4th + re_c * sin_4th * 2.0) * 16.0
        + cos_2tq * sin_eq * (re_c * sin_eh * sin_2th - im_c * s2_half_eh * sin_4th) * 32.0
        + cos_4tq * s2_half_eq * (amb + s2_half_eh * (amb * cos_4th - re_c * sin_4th * 2.0) * 2.0) * 8.0
        - sin_eq * (im_c * cos_2th.sq() * -4.0 + im_c * cos_eh * cos_4th * 2.0 + amb * sin_eh * sin_2th * 2.0) * sin_2tq * 8.0
        - s2_half_eq * (re_c * -4.0 - s2_half_eh * (re_c * cos_4th * 2.0 + amb * sin_4th) * 4.0) * sin_4tq * 4.0;

    let total = (a * (5.0 * h + 3.0 * v) + b * (3.0 * h + 5.0 * v)) * 4.0
        + amb * (eh - eq).cos() * (2.0 * hv)
        + inner * hv
        + cos_eh * (amb + im_c * sin_eq * sin_2tq * 4.0 + s2_half_eq * (amb * cos_4tq + re_c * sin_4tq * 2.0) * 2.0) * (4.0 * hv);
    total / 32.0
}

/// Two-qubit outcome probability in closed form.
pub fn prob_2q_closed<R: Real>(e: &Elements2Q<R>, ang: &Angles2Q<R>, port_a: Port, port_b: Port) -> R {
    let (ha_f, va_f, hb_f, vb_f) = (port_a.h(), port_a.v(), port_b.h(), port_b.v());
    let (pa, sa, pb, sb) = (ha_f + va_f, ha_f - va_f, hb_f + vb_f, hb_f - vb_f);
    let (ha, qa, hb, qb) = (ang.theta_h_a, ang.theta_q_a, ang.theta_h_b, ang.theta_q_b);
    let mut acc = (e.a + e.b + e.c + e.d) * (pa * pb * 0.25);
    acc = acc + ((e.im_g + e.im_h) * (sa * sb * -0.125)) * (-(ha * 4.0) + qa * 2.0 + hb * 4.0).cos();
    acc = acc + ((e.a - e.b - e.c + e.d - e.re_g * 2.0 - e.re_h * 2.0) * (sa * sb * 0.03125)) * (-(ha * 4.0) + qa * 4.0 + hb * 4.0).cos();
    acc = acc + ((e.re_g - e.re_h) * (sa * sb * 0.25)) * (ha * 4.0 - qa * 2.0 + hb * 4.0 - qb * 2.0).cos();
    acc = acc + ((e.im_g + e.im_h) * (sa * sb * -0.125)) * (ha * 4.0 - qa * 2.0 + hb * 4.0 - qb * 4.0).cos();
    acc = acc + ((e.im_g + e.im_h) * (sa * sb * 0.125)) * (ha * 4.0 - qa * 2.0 + hb * 4.0).cos();
    acc = acc + ((e.im_g - e.im_h) * (sa * sb * 0.125)) * (ha * 4.0 + hb * 4.0 - qb * 2.0).cos();
    acc = acc + ((e.im_g - e.im_h) * (sa * sb * -0.125)) * (ha * 4.0 - qa * 4.0 + hb * 4.0 - qb * 2.0).cos();
    acc = acc + ((e.a - e.b - e.c + e.d - e.re_g * 2.0 - e.re_h * 2.0) * (sa * sb * 0.03125)) * (ha * 4.0 - qa * 4.0 + hb * 4.0 - qb * 4.0).cos();
    acc = acc + ((e.a - e.b - e.c + e.d + e.re_g * 2.0 + e.re_h * 2.0) * (sa * sb * 0.03125)) * (ha * 4.0 - qa * 4.0 + hb * 4.0).cos();
    acc = acc + ((e.a - e.b - e.c + e.d + e.re_g * 2.0 + e.re_h * 2.0) * (sa * sb * 0.03125)) * (ha * 4.0 + hb * 4.0 - qb * 4.0).cos();
    acc = acc + ((e.a - e.b - e.c + e.d - e.re_g * 2.0 - e.re_h * 2.0) * (sa * sb * 0.03125)) * (ha * 4.0 + hb * 4.0).cos();
    acc = acc + ((e.im_g - e.im_h) * (sa * sb * -0.125)) * (ha * 4.0 - hb * 4.0 + qb * 2.0).cos();
    acc = acc + ((e.a - e.b - e.c + e.d - e.re_g * 2.0 - e.re_h * 2.0) * (sa * sb * 0.03125)) * (ha * 4.0 - hb * 4.0 + qb * 4.0).cos();
    acc = acc + ((e.re_g - e.re_h) * (sa * sb * -0.25)) * (ha * 4.0 - qa * 2.0 - hb * 4.0 + qb * 2.0).cos();
    acc = acc + ((e.im_g + e.im_h) * (sa * sb * 0.125)) * (ha * 4.0 - qa * 2.0 - hb * 4.0 + qb * 4.0).cos();
    acc = acc + ((e.im_g - e.im_h) * (sa * sb * 0.125)) * (ha * 4.0 - qa * 4.0 - hb * 4.0 + qb * 2.0).cos();
    acc = acc + ((e.a - e.b - e.c + e.d + e.re_g * 2.0 + e.re_h * 2.0) * (sa * sb * 0.03125)) * (ha * 4.0 - qa * 4.0 - hb * 4.0 + qb * 4.0).cos();
    acc = acc + ((e.a - e.b - e.c + e.d + e.re_g * 2.0 + e.re_h * 2.0) * (sa * sb * 0.03125)) * (ha * 4.0 - hb * 4.0).cos();
    acc = acc + ((e.a + e.b - e.c - e.d) * (pb * sa * 0.125)) * (ha * 4.0 - qa * 4.0).cos();
    acc = acc + ((e.a + e.b - e.c - e.d) * (pb * sa * 0.125)) * (ha * 4.0).cos();
    acc = acc + ((e.a - e.b + e.c - e.d) * (pa * sb * 0.125)) * (hb * 4.0 - qb * 4.0).cos();
    acc = acc + ((e.a - e.b + e.c - e.d) * (pa * sb * 0.125)) * (hb * 4.0).cos();
    acc = acc + ((e.im_f - e.im_i) * (sa * sb * 0.125)) * (-(ha * 4.0) + qa * 2.0 + hb * 4.0).sin();
    acc = acc + ((e.re_e + e.re_f - e.re_i - e.re_j) * (sa * sb * 0.0625)) * (-(ha * 4.0) + qa * 4.0 + hb * 4.0).sin();
    acc = acc + ((e.im_f - e.im_i) * (sa * sb * -0.125)) * (ha * 4.0 - qa * 2.0 + hb * 4.0 - qb * 4.0).sin();
    acc = acc + ((e.im_f - e.im_i) * (sa * sb * -0.125)) * (ha * 4.0 - qa * 2.0 + hb * 4.0).sin();
    acc = acc + ((e.im_e - e.im_j) * (sa * sb * -0.125)) * (ha * 4.0 + hb * 4.0 - qb * 2.0).sin();
    acc = acc + ((e.im_e - e.im_j) * (sa * sb * -0.125)) * (ha * 4.0 - qa * 4.0 + hb * 4.0 - qb * 2.0).sin();
    acc = acc + ((e.re_e + e.re_f - e.re_i - e.re_j) * (sa * sb * -0.0625)) * (ha * 4.0 - qa * 4.0 + hb * 4.0 - qb * 4.0).sin();
    acc = acc + ((e.re_e - e.re_f + e.re_i - e.re_j) * (sa * sb * 0.0625)) * (ha * 4.0 - qa * 4.0 + hb * 4.0).sin();
    acc = acc + ((e.re_e - e.re_f + e.re_i - e.re_j) * (sa * sb * -0.0625)) * (ha * 4.0 + hb * 4.0 - qb * 4.0).sin();
    acc = acc + ((e.re_e + e.re_f - e.re_i - e.re_j) * (sa * sb * 0.0625)) * (ha * 4.0 + hb * 4.0).sin();
    acc = acc + ((e.im_f + e.im_i) * (pb * sa * -0.5)) * (ha * 4.0 - qa * 2.0).sin();
    acc = acc + ((e.im_e - e.im_j) * (sa * sb * 0.125)) * (ha * 4.0 - hb * 4.0 + qb * 2.0).sin();
    acc = acc + ((e.re_e + e.re_f - e.re_i - e.re_j) * (sa * sb * 0.0625)) * (ha * 4.0 - hb * 4.0 + qb * 4.0).sin();
    acc = acc + ((e.im_f - e.im_i) * (sa * sb * -0.125)) * (ha * 4.0 - qa * 2.0 - hb * 4.0 + qb * 4.0).sin();
    acc = acc + ((e.im_e - e.im_j) * (sa * sb * 0.125)) * (ha * 4.0 - qa * 4.0 - hb * 4.0 + qb * 2.0).sin();
    acc = acc + ((e.re_e - e.re_f + e.re_i - e.re_j) * (sa * sb * 0.0625)) * (ha * 4.0 - qa * 4.0 - hb * 4.0 + qb * 4.0).sin();
    acc = acc + ((e.re_e - e.re_f + e.re_i - e.re_j) * (sa * sb * -0.0625)) * (ha * 4.0 - hb * 4.0).sin();
    acc = acc + ((e.re_f + e.re_i) * (pb * sa * -0.25)) * (ha * 4.0 - qa * 4.0).sin();
    acc = acc + ((e.re_f + e.re_i) * (pb * sa * 0.25)) * (ha * 4.0).sin();
    acc = acc + ((e.im_e + e.im_j) * (pa * sb * -0.5)) * (hb * 4.0 - qb * 2.0).sin();
    acc = acc + ((e.re_e + e.re_j) * (pa * sb * -0.25)) * (hb * 4.0 - qb * 4.0).sin();
    acc = acc + ((e.re_e + e.re_j) * (pa * sb * 0.25)) * (hb * 4.0).sin();
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn awp_reduces_to_fixed_waveplates() {
        let q0 = CMat::from_rows(2, 2, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)])
            .unwrap()
            .scale(Complex64::from_polar(1.0, -FRAC_PI_4));
        assert!(quarter_wave(0.0).max_abs_diff(&q0) < 1e-15);
        let h0 = CMat::from_rows(2, 2, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
            .unwrap()
            .scale(c(0.0, -1.0));
        assert!(half_wave(0.0).max_abs_diff(&h0) < 1e-15);
    }

    #[test]
    fn awp_is_unitary() {
        for &(eta, theta) in &[(0.3, 1.2), (PI, -0.4), (2.0, 0.0)] {
            let m = awp(eta, theta);
            assert!((&m * &m.adjoint()).max_abs_diff(&CMat::identity(2)) < 1e-15);
        }
    }

    #[test]
    fn standard_table_projects_onto_named_states() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let states = [
            [c(1.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(1.0, 0.0)],
            [c(s, 0.0), c(s, 0.0)],
            [c(s, 0.0), c(-s, 0.0)],
            [c(s, 0.0), c(0.0, s)],
            [c(s, 0.0), c(0.0, -s)],
        ];
        for kind in [TableKind::Standard, TableKind::LiquidCrystal] {
            let SettingsTable::One(rows) = settings_table(kind) else { panic!() };
            for (row, psi) in rows.iter().zip(&states) {
                let rho = DensityMatrix::pure(psi).unwrap();
                assert_abs_diff_eq!(prob_1q_direct(&rho, row).unwrap(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn closed_forms_agree_with_direct_on_tables() {
        let rho = crate::qstate::rho_from_t(&crate::qstate::TParams::new(vec![0.2, -0.5, 0.7, 0.4]).unwrap()).unwrap();
        let el = Elements1Q::from_rho(&rho);
        for kind in [TableKind::Standard, TableKind::LiquidCrystal] {
            let SettingsTable::One(rows) = settings_table(kind) else { panic!() };
            for row in &rows {
                let closed = prob_1q_closed(&el, &row.angles(), row.port);
                assert_abs_diff_eq!(closed, prob_1q_direct(&rho, row).unwrap(), epsilon = 1e-14);
            }
        }
        let t: Vec<f64> = (0..16).map(|k| ((k as f64) * 0.9 + 0.1).sin()).collect();
        let rho = crate::qstate::rho_from_t(&crate::qstate::TParams::new(t).unwrap()).unwrap();
        let el = Elements2Q::from_rho(&rho);
        let SettingsTable::Two(s) = settings_table(TableKind::TwoQubit) else { panic!() };
        for row in s.rows() {
            let closed = prob_2q_closed(&el, &row.angles(), row.a.port, row.b.port);
            assert_abs_diff_eq!(closed, prob_2q_direct(&rho, row).unwrap(), epsilon = 1e-14);
        }
    }

    #[test]
    fn unknown_table_is_rejected() {
        assert!(matches!("circular".parse::<TableKind>(), Err(OpticsError::UnknownTable(_))));
        assert_eq!("two_qubit".parse::<TableKind>().unwrap(), TableKind::TwoQubit);
    }

    #[test]
    fn two_qubit_row_order() {
        let SettingsTable::Two(s) = settings_table(TableKind::TwoQubit) else { panic!() };
        assert_eq!(s.len(), 36);
        let labels = s.labels();
        assert_eq!(labels[0], "HH");
        assert_eq!(labels[1], "HV");
        assert_eq!(labels[6], "VH");
        assert_eq!(labels[35], "RR");
    }
}
