//! JSON input files: experiment configs and simulation specs.
//!
//! Both share `schema`, `kind`, `settings`, `instrument`, `uncertainty` and
//! `likelihood_sigma_mode`. Angles are in radians. Unknown keys are rejected.

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use qtomo_core::optics::settings_table;
use qtomo_core::qstate::bell_singlet;
use qtomo_core::{
    CMat, DensityMatrix, ExperimentConfig, InstrumentParams, Port, Qubits, SettingRow1Q, Settings2Q, SettingsTable,
    SigmaMode, SimSpec, Setup, TableKind, Uncertainty1Q, Uncertainty2Q, WaveplateRow,
};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    OneQubit,
    TwoQubit,
}

impl Kind {
    pub fn qubits(self) -> Qubits {
        match self {
            Kind::OneQubit => Qubits::One,
            Kind::TwoQubit => Qubits::Two,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaModeSpec {
    #[default]
    MaxCounts,
    PerMeasurement,
}

impl From<SigmaModeSpec> for SigmaMode {
    fn from(s: SigmaModeSpec) -> Self {
        match s {
            SigmaModeSpec::MaxCounts => SigmaMode::MaxCounts,
            SigmaModeSpec::PerMeasurement => SigmaMode::PerMeasurement,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortSpec {
    H,
    V,
}

impl From<PortSpec> for Port {
    fn from(p: PortSpec) -> Self {
        match p {
            PortSpec::H => Port::H,
            PortSpec::V => Port::V,
        }
    }
}

/// Either a built-in table name or explicit rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsSpec<R> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<R>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Row1QSpec {
    pub label: String,
    pub eta_h: f64,
    pub eta_q: f64,
    pub theta_h: f64,
    pub theta_q: f64,
    pub port: PortSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveplateRowSpec {
    pub label: String,
    pub theta_h: f64,
    pub theta_q: f64,
    pub port: PortSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rows2QSpec {
    pub qubit_a: Vec<WaveplateRowSpec>,
    pub qubit_b: Vec<WaveplateRowSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentSpec {
    pub mu: f64,
    pub nu: f64,
    pub th: f64,
    pub tv: f64,
    pub rh: f64,
    pub rv: f64,
}

impl From<InstrumentSpec> for InstrumentParams {
    fn from(s: InstrumentSpec) -> Self {
        InstrumentParams { mu: s.mu, nu: s.nu, th: s.th, tv: s.tv, rh: s.rh, rv: s.rv }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instrument2QSpec {
    pub a: InstrumentSpec,
    pub b: InstrumentSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Uncertainty1QSpec {
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

impl From<Uncertainty1QSpec> for Uncertainty1Q {
    fn from(s: Uncertainty1QSpec) -> Self {
        Uncertainty1Q {
            theta_h: s.theta_h,
            theta_q: s.theta_q,
            eta_h: s.eta_h,
            eta_q: s.eta_q,
            mu: s.mu,
            nu: s.nu,
            th: s.th,
            tv: s.tv,
            rh: s.rh,
            rv: s.rv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Uncertainty2QSpec {
    pub theta_h_a: f64,
    pub theta_q_a: f64,
    pub theta_h_b: f64,
    pub theta_q_b: f64,
    pub pbs: f64,
    pub mu_nu: f64,
}

impl From<Uncertainty2QSpec> for Uncertainty2Q {
    fn from(s: Uncertainty2QSpec) -> Self {
        Uncertainty2Q {
            theta_h_a: s.theta_h_a,
            theta_q_a: s.theta_q_a,
            theta_h_b: s.theta_h_b,
            theta_q_b: s.theta_q_b,
            pbs: s.pbs,
            mu_nu: s.mu_nu,
        }
    }
}

/// Settings, instrument and uncertainty types for one problem size.
pub trait Flavor {
    type Settings: Serialize + DeserializeOwned + Clone + std::fmt::Debug;
    type Instrument: Serialize + DeserializeOwned + Clone + std::fmt::Debug;
    type Uncertainty: Serialize + DeserializeOwned + Clone + std::fmt::Debug;
    const KIND: Kind;
    fn setup(s: &Self::Settings, i: &Self::Instrument, u: &Self::Uncertainty) -> Result<Setup, CliError>;
}

#[derive(Debug, Clone)]
pub enum OneQ {}
#[derive(Debug, Clone)]
pub enum TwoQ {}

fn table_kind(name: &str, kind: Kind) -> Result<TableKind, CliError> {
    let t: TableKind = name.parse().map_err(|e| CliError::Schema(format!("settings.table: {e}")))?;
    let ok = matches!((kind, t), (Kind::OneQubit, TableKind::LiquidCrystal | TableKind::Standard) | (Kind::TwoQubit, TableKind::TwoQubit));
    if !ok {
        return Err(CliError::Schema(format!("settings.table: `{name}` does not fit kind {kind:?}")));
    }
    Ok(t)
}

fn pick<R: Clone>(s: &SettingsSpec<R>) -> Result<Result<&str, &R>, CliError> {
    match (&s.table, &s.rows) {
        (Some(t), None) => Ok(Ok(t.as_str())),
        (None, Some(r)) => Ok(Err(r)),
        _ => Err(CliError::Schema("settings: give exactly one of `table` or `rows`".into())),
    }
}

fn waveplate_row(r: &WaveplateRowSpec) -> WaveplateRow {
    WaveplateRow { label: r.label.clone(), theta_h: r.theta_h, theta_q: r.theta_q, port: r.port.into() }
}

impl Flavor for OneQ {
    type Settings = SettingsSpec<Vec<Row1QSpec>>;
    type Instrument = InstrumentSpec;
    type Uncertainty = Uncertainty1QSpec;
    const KIND: Kind = Kind::OneQubit;

    fn setup(s: &Self::Settings, i: &InstrumentSpec, u: &Uncertainty1QSpec) -> Result<Setup, CliError> {
        let settings = match pick(s)? {
            Ok(name) => match settings_table(table_kind(name, Self::KIND)?) {
                SettingsTable::One(rows) => rows,
                SettingsTable::Two(_) => unreachable!("kind checked"),
            },
            Err(rows) => rows
                .iter()
                .map(|r| SettingRow1Q {
                    label: r.label.clone(),
                    eta_h: r.eta_h,
                    eta_q: r.eta_q,
                    theta_h: r.theta_h,
                    theta_q: r.theta_q,
                    port: r.port.into(),
                })
                .collect(),
        };
        Ok(Setup::OneQubit { settings, instrument: (*i).into(), uncertainty: (*u).into() })
    }
}

impl Flavor for TwoQ {
    type Settings = SettingsSpec<Rows2QSpec>;
    type Instrument = Instrument2QSpec;
    type Uncertainty = Uncertainty2QSpec;
    const KIND: Kind = Kind::TwoQubit;

    fn setup(s: &Self::Settings, i: &Instrument2QSpec, u: &Uncertainty2QSpec) -> Result<Setup, CliError> {
        let settings = match pick(s)? {
            Ok(name) => match settings_table(table_kind(name, Self::KIND)?) {
                SettingsTable::Two(t) => t,
                SettingsTable::One(_) => unreachable!("kind checked"),
            },
            Err(rows) => Settings2Q {
                qubit_a: rows.qubit_a.iter().map(waveplate_row).collect(),
                qubit_b: rows.qubit_b.iter().map(waveplate_row).collect(),
            },
        };
        Ok(Setup::TwoQubit {
            settings,
            instrument_a: i.a.into(),
            instrument_b: i.b.into(),
            uncertainty: (*u).into(),
        })
    }
}

/// A fit input: settings, instrument, uncertainties and counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "")]
pub struct ExperimentFile<F: Flavor> {
    pub schema: u32,
    pub kind: Kind,
    pub settings: F::Settings,
    pub instrument: F::Instrument,
    pub uncertainty: F::Uncertainty,
    pub counts: Vec<u64>,
    #[serde(default)]
    pub likelihood_sigma_mode: SigmaModeSpec,
}

/// A state given by name or as explicit real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub re: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

/// A simulation input: the true state, flux and seed plus the experiment
/// description without counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "")]
pub struct SimFile<F: Flavor> {
    pub schema: u32,
    pub kind: Kind,
    pub state: StateSpec,
    pub flux: f64,
    pub seed: u64,
    pub settings: F::Settings,
    pub instrument: F::Instrument,
    pub uncertainty: F::Uncertainty,
    #[serde(default)]
    pub likelihood_sigma_mode: SigmaModeSpec,
}

impl<F: Flavor> SimFile<F> {
    /// The dataset this spec produces once counts are known.
    pub fn dataset(&self, counts: Vec<u64>) -> ExperimentFile<F> {
        ExperimentFile {
            schema: SCHEMA_VERSION,
            kind: F::KIND,
            settings: self.settings.clone(),
            instrument: self.instrument.clone(),
            uncertainty: self.uncertainty.clone(),
            counts,
            likelihood_sigma_mode: self.likelihood_sigma_mode,
        }
    }
}

/// Hex SHA-256 of the document re-serialized with sorted keys and no
/// whitespace, so key order and formatting do not change it.
pub fn canonical_digest(value: &Value) -> String {
    let canonical = serde_json::to_string(value).expect("JSON values always serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn parse_value(text: &str) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Schema(format!("invalid JSON: {e}")))
}

/// Reads `schema` and `kind` before the full parse so errors name the
/// right variant.
pub fn header(value: &Value) -> Result<Kind, CliError> {
    let obj = value.as_object().ok_or_else(|| CliError::Schema("top level must be an object".into()))?;
    match obj.get("schema") {
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION as u64) => {}
        Some(other) => return Err(CliError::Schema(format!("schema: unsupported version {other}, expected {SCHEMA_VERSION}"))),
        None => return Err(CliError::Schema("schema: missing field".into())),
    }
    let kind = obj.get("kind").ok_or_else(|| CliError::Schema("kind: missing field".into()))?;
    Kind::deserialize(kind).map_err(|e| CliError::Schema(format!("kind: {e}")))
}

pub fn typed<T: DeserializeOwned>(value: &Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::Schema(format!("{path}: {}", e.into_inner()))
    })
}

/// A validated experiment together with the digest of its source document.
#[derive(Debug, Clone)]
pub struct LoadedExperiment {
    pub config: ExperimentConfig,
    pub digest: String,
}

pub fn experiment_from<F: Flavor>(file: &ExperimentFile<F>) -> Result<ExperimentConfig, CliError> {
    let config = ExperimentConfig {
        setup: F::setup(&file.settings, &file.instrument, &file.uncertainty)?,
        counts: file.counts.clone(),
        sigma_mode: file.likelihood_sigma_mode.into(),
    };
    config.validate().map_err(|e| CliError::Schema(e.to_string()))?;
    Ok(config)
}

/// Parses and validates an experiment config of any kind.
pub fn load_experiment(text: &str) -> Result<LoadedExperiment, CliError> {
    let value = parse_value(text)?;
    let config = match header(&value)? {
        Kind::OneQubit => experiment_from(&typed::<ExperimentFile<OneQ>>(&value)?)?,
        Kind::TwoQubit => experiment_from(&typed::<ExperimentFile<TwoQ>>(&value)?)?,
    };
    Ok(LoadedExperiment { config, digest: canonical_digest(&value) })
}

fn matrix_from(spec: &StateSpec, kind: Kind) -> Result<DensityMatrix, CliError> {
    let err = |m: String| CliError::Schema(format!("state: {m}"));
    let dim = kind.qubits().dim();
    match (&spec.preset, &spec.re, &spec.im) {
        (Some(name), None, None) => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let c = |re: f64| Complex64::new(re, 0.0);
            let pure = |psi: &[Complex64]| DensityMatrix::pure(psi).map_err(|e| err(e.to_string()));
            match (name.as_str(), kind) {
                ("bell_singlet", Kind::TwoQubit) => Ok(bell_singlet()),
                ("maximally_mixed", _) => DensityMatrix::new(CMat::identity(dim).scale(c(1.0 / dim as f64)))
                    .map_err(|e| err(e.to_string())),
                ("h", Kind::OneQubit) => pure(&[c(1.0), c(0.0)]),
                ("v", Kind::OneQubit) => pure(&[c(0.0), c(1.0)]),
                ("d", Kind::OneQubit) => pure(&[c(s), c(s)]),
                ("a", Kind::OneQubit) => pure(&[c(s), c(-s)]),
                _ => Err(err(format!("unknown preset `{name}` for kind {kind:?}"))),
            }
        }
        (None, Some(re), im) => {
            let shape_ok = |m: &Vec<Vec<f64>>| m.len() == dim && m.iter().all(|r| r.len() == dim);
            if !shape_ok(re) || im.as_ref().is_some_and(|m| !shape_ok(m)) {
                return Err(err(format!("re/im must be {dim}x{dim}")));
            }
            let m = CMat::from_fn(dim, dim, |i, j| Complex64::new(re[i][j], im.as_ref().map_or(0.0, |m| m[i][j])));
            DensityMatrix::new(m).map_err(|e| err(e.to_string()))
        }
        _ => Err(err("give either `preset` or `re` (with optional `im`)".into())),
    }
}

/// A parsed simulation spec, ready to run and to emit its dataset.
pub enum LoadedSim {
    One(SimFile<OneQ>, SimSpec),
    Two(SimFile<TwoQ>, SimSpec),
}

impl LoadedSim {
    pub fn kind(&self) -> Kind {
        match self {
            LoadedSim::One(..) => Kind::OneQubit,
            LoadedSim::Two(..) => Kind::TwoQubit,
        }
    }

    pub fn spec(&self) -> &SimSpec {
        match self {
            LoadedSim::One(_, s) | LoadedSim::Two(_, s) => s,
        }
    }

    /// The dataset document with `counts` filled in.
    pub fn dataset_json(&self, counts: Vec<u64>) -> Value {
        match self {
            LoadedSim::One(f, _) => serde_json::to_value(f.dataset(counts)),
            LoadedSim::Two(f, _) => serde_json::to_value(f.dataset(counts)),
        }
        .expect("dataset serializes")
    }
}

fn sim_from<F: Flavor>(file: &SimFile<F>, seed_override: Option<u64>) -> Result<SimSpec, CliError> {
    if !(file.flux.is_finite() && file.flux >= 0.0) {
        return Err(CliError::Schema(format!("flux: {} must be finite and non-negative", file.flux)));
    }
    let setup = F::setup(&file.settings, &file.instrument, &file.uncertainty)?;
    setup.validate().map_err(|e| CliError::Schema(e.to_string()))?;
    Ok(SimSpec {
        true_state: matrix_from(&file.state, F::KIND)?,
        flux: file.flux,
        setup,
        seed: seed_override.unwrap_or(file.seed),
    })
}

pub fn load_sim(text: &str, seed_override: Option<u64>) -> Result<LoadedSim, CliError> {
    let value = parse_value(text)?;
    Ok(match header(&value)? {
        Kind::OneQubit => {
            let mut f: SimFile<OneQ> = typed(&value)?;
            let spec = sim_from(&f, seed_override)?;
            f.seed = spec.seed;
            LoadedSim::One(f, spec)
        }
        Kind::TwoQubit => {
            let mut f: SimFile<TwoQ> = typed(&value)?;
            let spec = sim_from(&f, seed_override)?;
            f.seed = spec.seed;
            LoadedSim::Two(f, spec)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_1Q: &str = r#"{
        "schema": 1, "kind": "one_qubit",
        "settings": {"table": "liquid_crystal"},
        "instrument": {"mu": 0.42, "nu": 0.75, "th": 0.973, "tv": 0.027, "rh": 0.013, "rv": 0.987},
        "uncertainty": {"theta_h": 0.017, "theta_q": 0.017, "eta_h": 0.035, "eta_q": 0.035,
                        "mu": 0.03, "nu": 0.03, "th": 0.01, "tv": 0.01, "rh": 0.01, "rv": 0.01},
        "counts": [2518, 123, 1335, 2291, 1234, 2314]
    }"#;

    #[test]
    fn parses_minimal_config() {
        let e = load_experiment(MINIMAL_1Q).unwrap();
        assert_eq!(e.config.counts.len(), 6);
        assert_eq!(e.config.sigma_mode, SigmaMode::MaxCounts);
    }

    #[test]
    fn digest_ignores_key_order_and_whitespace() {
        let a = parse_value(MINIMAL_1Q).unwrap();
        let b = parse_value(r#"{"kind":"one_qubit","schema":1,"counts":[2518,123,1335,2291,1234,2314],
            "uncertainty":{"rv":0.01,"rh":0.01,"tv":0.01,"th":0.01,"nu":0.03,"mu":0.03,"eta_q":0.035,"eta_h":0.035,"theta_q":0.017,"theta_h":0.017},
            "instrument":{"rv":0.987,"rh":0.013,"tv":0.027,"th":0.973,"nu":0.75,"mu":0.42},
            "settings":{"table":"liquid_crystal"}}"#)
        .unwrap();
        assert_eq!(canonical_digest(&a), canonical_digest(&b));
    }

    #[test]
    fn errors_carry_field_paths() {
        let bad = MINIMAL_1Q.replace("\"mu\": 0.42", "\"mu\": \"x\"");
        let msg = load_experiment(&bad).unwrap_err().to_string();
        assert!(msg.contains("instrument.mu"), "{msg}");
        let unknown = MINIMAL_1Q.replace("\"counts\"", "\"extra\": 1, \"counts\"");
        assert!(load_experiment(&unknown).unwrap_err().to_string().contains("extra"));
        let wrong_table = MINIMAL_1Q.replace("liquid_crystal", "two_qubit");
        assert!(load_experiment(&wrong_table).is_err());
        let v2 = MINIMAL_1Q.replace("\"schema\": 1", "\"schema\": 2");
        assert!(load_experiment(&v2).unwrap_err().to_string().contains("schema"));
    }
}
