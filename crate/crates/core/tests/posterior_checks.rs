mod oracles;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use oracles::{hdi_oracle, OracleReport};
use qtomo_core::optics::settings_table;
use qtomo_core::posterior::{self, bme, hdi, hdi_multimodal, ppc, summarize_state, PosteriorError};
use qtomo_core::{
    ExperimentConfig, InstrumentParams, PpcOptions, Qubits, SamplerConfig, SettingsTable, Setup, SigmaMode,
    TableKind, TomographyModel, Trace, Uncertainty1Q,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hdi_matches_exhaustive_window_search(v in prop::collection::vec(-100.0f64..100.0, 50..400), prob in 0.05f64..0.99) {
        prop_assert_eq!(hdi(&v, prob).unwrap(), hdi_oracle(&v, prob));
    }

    #[test]
    fn hdi_width_grows_with_mass(v in prop::collection::vec(-10.0f64..10.0, 50..300), p in 0.05f64..0.9, dp in 0.01f64..0.09) {
        let (a, b) = hdi(&v, p).unwrap();
        let (c, d) = hdi(&v, p + dp).unwrap();
        prop_assert!(d - c >= b - a);
    }

    #[test]
    fn bme_is_the_mean(v in prop::collection::vec(-10.0f64..10.0, 1..200)) {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        prop_assert!((bme(&v).unwrap() - m).abs() < 1e-12);
    }
}

#[test]
fn uniform_hdi_has_nominal_width() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let v: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
    let (lo, hi) = hdi(&v, 0.95).unwrap();
    let r = OracleReport::new("hdi/uniform_1e5", &41u64, 0.95, hi - lo);
    assert!(r.abs_err < 0.01, "{r:?}");
    r.store("hdi");
}

#[test]
fn symmetric_and_degenerate_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = Normal::new(3.0, 2.0).unwrap();
    let v: Vec<f64> = (0..50_000).map(|_| n.sample(&mut rng)).collect();
    let (lo, hi) = hdi(&v, 0.95).unwrap();
    // Width 2·1.96σ. The shortest window is flat in its position, so the
    // centre is only loosely pinned.
    assert!((hi - lo - 4.0 * 1.96).abs() < 0.05, "{lo} {hi}");
    assert!(((lo + hi) / 2.0 - 3.0).abs() < 0.2, "{lo} {hi}");
    assert_eq!(hdi(&[0.5; 100], 0.9).unwrap(), (0.5, 0.5));
    assert_eq!(hdi_multimodal(&[0.5; 100], 0.9).unwrap(), vec![(0.5, 0.5)]);
    assert_eq!(bme(&[]), Err(PosteriorError::Empty));
    assert_eq!(hdi(&[1.0; 10], 0.9), Err(PosteriorError::TooFewSamples(10)));
    assert_eq!(hdi(&[1.0; 100], 1.0), Err(PosteriorError::BadProbability(1.0)));
    let mut bad = vec![1.0; 100];
    bad[7] = f64::NAN;
    assert_eq!(hdi(&bad, 0.5), Err(PosteriorError::NonFinite));
}

#[test]
fn bimodal_region_splits() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let (a, b) = (Normal::new(-5.0, 0.5).unwrap(), Normal::new(5.0, 0.5).unwrap());
    let v: Vec<f64> = (0..4000).map(|i| if i % 2 == 0 { a.sample(&mut rng) } else { b.sample(&mut rng) }).collect();
    let region = hdi_multimodal(&v, 0.9).unwrap();
    assert_eq!(region.len(), 2, "{region:?}");
    assert!(region[0].1 < 0.0 && region[1].0 > 0.0);
}

fn one_qubit_trace(value: f64) -> Trace {
    // Every draw at the same point: the maximally mixed state when `value`
    // is zero except for t0 and t3.
    let names: Vec<String> = qtomo_core::model::layout_for_qubits(Qubits::One).names();
    let (chains, draws) = (2, 60);
    let mut data = vec![0.0; names.len() * chains * draws];
    for (v, name) in names.iter().enumerate() {
        let x = if name == "t0" || name == "t3" { value } else { 0.0 };
        data[v * chains * draws..(v + 1) * chains * draws].iter_mut().for_each(|d| *d = x);
    }
    Trace::from_parts(names, 15, chains, draws, data).unwrap()
}

#[test]
fn degenerate_trace_summarizes() {
    let model = TomographyModel::new(high_flux()).unwrap();
    let mut trace = one_qubit_trace(0.5);
    trace.add_derived(&model.derived_names(), |x| model.derived(x)).unwrap();
    let s = summarize_state(&trace, Qubits::One, 0.95).unwrap();
    let a = s.get("A").unwrap();
    assert_eq!((a.bme, a.hdi), (0.5, (0.5, 0.5)));
    assert_eq!(s.max_rhat, 1.0);
    assert_eq!(s.min_ess, 0.0);
    assert!((s.bme_matrix[(0, 0)].re - 0.5).abs() < 1e-15);
    assert!(matches!(summarize_state(&one_qubit_trace(0.5), Qubits::One, 0.95), Err(PosteriorError::UnknownVariable(_))));
}

fn lab() -> (InstrumentParams, Uncertainty1Q) {
    let deg = 1f64.to_radians();
    (
        InstrumentParams { mu: 0.42, nu: 0.75, th: 0.973, tv: 0.027, rh: 0.013, rv: 0.987 },
        Uncertainty1Q { theta_h: deg, theta_q: deg, eta_h: 2.0 * deg, eta_q: 2.0 * deg, mu: 0.03, nu: 0.03, th: 0.01, tv: 0.01, rh: 0.01, rv: 0.01 },
    )
}

fn one_qubit(counts: Vec<u64>, instrument: InstrumentParams, uncertainty: Uncertainty1Q) -> ExperimentConfig {
    let SettingsTable::One(settings) = settings_table(TableKind::LiquidCrystal) else { unreachable!() };
    ExperimentConfig { setup: Setup::OneQubit { settings, instrument, uncertainty }, counts, sigma_mode: SigmaMode::MaxCounts }
}

fn high_flux() -> ExperimentConfig {
    let (i, u) = lab();
    one_qubit(vec![2518, 123, 1335, 2291, 1234, 2314], i, u)
}

#[test]
fn ppc_of_noise_free_data_is_central() {
    let ideal = InstrumentParams { mu: 1.0, nu: 1.0, th: 1.0, tv: 0.0, rh: 0.0, rv: 1.0 };
    let zero = Uncertainty1Q { theta_h: 0.0, theta_q: 0.0, eta_h: 0.0, eta_q: 0.0, mu: 0.0, nu: 0.0, th: 0.0, tv: 0.0, rh: 0.0, rv: 0.0 };
    let model = TomographyModel::new(one_qubit(vec![1500, 500, 1500, 500, 1250, 750], ideal, zero)).unwrap();
    let cfg = SamplerConfig { chains: 2, draws: 500, tune: 500, seed: 44, ..SamplerConfig::default() };
    let trace = model.sample(&cfg).unwrap();
    let res = ppc(&model, &trace, &PpcOptions { samples: 500, replicates: 4, seed: 1 }).unwrap();
    assert_eq!(res.labels.len(), 6);
    for (j, &p) in res.tail_prob.iter().enumerate() {
        assert!(p > 0.01 && p < 0.99, "{}: tail {p}", res.labels[j]);
    }
    for q in &res.quantiles {
        assert!(q.windows(2).all(|w| w[0] <= w[1]));
    }
    assert!(res.all_within(0, 6));
}

#[test]
fn ppc_checks_inputs_and_repeats() {
    let model = TomographyModel::new(high_flux()).unwrap();
    let cfg = SamplerConfig { chains: 2, draws: 100, tune: 200, seed: 45, ..SamplerConfig::default() };
    let trace = model.sample(&cfg).unwrap();
    let opts = PpcOptions { samples: 50, replicates: 2, seed: 3 };
    assert_eq!(ppc(&model, &trace, &opts).unwrap(), ppc(&model, &trace, &opts).unwrap());
    assert!(ppc(&model, &trace, &PpcOptions { samples: 0, ..opts }).is_err());
    let other = Trace::from_chains("x0", &[vec![0.0; 60], vec![1.0; 60]]).unwrap();
    assert!(matches!(ppc(&model, &other, &opts), Err(PosteriorError::Mismatch(_))));
}

#[test]
fn truncated_normal_draws_match_moments() {
    // Mean of N(μ, σ²) truncated below at 0 is μ + σ φ(α)/(1 − Φ(α)), α = −μ/σ.
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    for (mu, sd) in [(0.0, 1.0), (-2.0, 1.0), (3.0, 2.0), (-6.0, 1.0)] {
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| posterior::sample_truncated_normal(&mut rng, mu, sd)).collect();
        assert!(draws.iter().all(|&d| d >= 0.0));
        let alpha: f64 = -mu / sd;
        let phi = (-0.5 * alpha * alpha).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let tail = 0.5 * statrs_erfc(alpha / std::f64::consts::SQRT_2);
        let want = mu + sd * phi / tail;
        let got = draws.iter().sum::<f64>() / n as f64;
        assert!((got - want).abs() < 0.01 * want.max(0.1), "μ={mu} σ={sd}: {got} vs {want}");
    }
}

/// Complementary error function by continued fraction / series, kept local
/// so the check does not share code with the sampler.
fn statrs_erfc(x: f64) -> f64 {
    // Abramowitz-Stegun 7.1.26 is too coarse for deep tails; integrate instead.
    if x < 0.0 {
        return 2.0 - statrs_erfc(-x);
    }
    let (n, upper) = (200_000, x + 12.0);
    let h = (upper - x) / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut s = f(x) + f(upper);
    for k in 1..n {
        s += f(x + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0 * 2.0 / std::f64::consts::PI.sqrt()
}
