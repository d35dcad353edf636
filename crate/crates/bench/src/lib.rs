//! Shared fixtures for the benchmarks.

use qtomo_core::optics::settings_table;
use qtomo_core::{
    ExperimentConfig, InstrumentParams, SettingsTable, SigmaMode, Setup, TableKind, Uncertainty1Q, Uncertainty2Q,
};

/// The high-flux single-qubit dataset.
pub fn one_qubit_config() -> ExperimentConfig {
    let SettingsTable::One(settings) = settings_table(TableKind::LiquidCrystal) else { unreachable!() };
    ExperimentConfig {
        setup: Setup::OneQubit {
            settings,
            instrument: InstrumentParams { mu: 0.42, nu: 0.75, th: 0.973, tv: 0.027, rh: 0.013, rv: 0.987 },
            uncertainty: Uncertainty1Q {
                theta_h: 1f64.to_radians(),
                theta_q: 1f64.to_radians(),
                eta_h: 2f64.to_radians(),
                eta_q: 2f64.to_radians(),
                mu: 0.03,
                nu: 0.03,
                th: 0.01,
                tv: 0.01,
                rh: 0.01,
                rv: 0.01,
            },
        },
        counts: vec![2518, 123, 1335, 2291, 1234, 2314],
        sigma_mode: SigmaMode::MaxCounts,
    }
}

/// A two-qubit dataset with singlet-like anticorrelated counts.
pub fn two_qubit_config() -> ExperimentConfig {
    let SettingsTable::Two(settings) = settings_table(TableKind::TwoQubit) else { unreachable!() };
    let counts = (0..36).map(|j| if (j / 6) % 2 == (j % 6) % 2 { 120 } else { 380 }).collect();
    ExperimentConfig {
        setup: Setup::TwoQubit {
            settings,
            instrument_a: InstrumentParams { mu: 0.6, nu: 0.7, th: 0.98, tv: 0.01, rh: 0.01, rv: 0.97 },
            instrument_b: InstrumentParams { mu: 0.7, nu: 0.8, th: 0.96, tv: 0.01, rh: 0.01, rv: 0.97 },
            uncertainty: Uncertainty2Q {
                theta_h_a: 2f64.to_radians(),
                theta_q_a: 2f64.to_radians(),
                theta_h_b: 2f64.to_radians(),
                theta_q_b: 2f64.to_radians(),
                pbs: 0.02,
                mu_nu: 0.02,
            },
        },
        counts,
        sigma_mode: SigmaMode::MaxCounts,
    }
}
