mod oracles;

use rayon::prelude::*;

use oracles::hdi_oracle;
use qtomo_core::posterior::hdi;
use qtomo_core::sampler::fixture::{CorrelatedNormal, DiagonalNormal, PoissonRegression};
use qtomo_core::sampler::{self, ess, rhat, LatentEntry, LatentLayout, LogDensity, Support};
use qtomo_core::{SamplerConfig, SamplerKind, Trace};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn pooled_accept(trace: &Trace) -> f64 {
    mean(&trace.stats().iter().map(|s| s.mean_accept).collect::<Vec<_>>())
}

fn run(density: &impl LogDensity, cfg: &SamplerConfig) -> Trace {
    sampler::sample(density, &LatentLayout::unbounded(density.dim()), cfg).unwrap()
}

#[test]
fn standard_normal_moments_and_diagnostics() {
    let target = DiagonalNormal { mean: vec![0.0], sd: vec![1.0] };
    let cfg = SamplerConfig { seed: 3, ..SamplerConfig::default() };
    let trace = run(&target, &cfg);
    let x = trace.samples("x0").unwrap();
    assert_eq!(x.len(), 4000);
    assert!(mean(x).abs() < 4.0 / 4000f64.sqrt(), "mean {}", mean(x));
    assert!((var(x) - 1.0).abs() < 0.1, "variance {}", var(x));
    assert!(rhat(&trace, "x0").unwrap() < 1.01);
    assert!(ess(&trace, "x0").unwrap() > 0.4 * 4000.0);
    assert!((pooled_accept(&trace) - 0.8).abs() < 0.05, "accept {}", pooled_accept(&trace));
    assert_eq!(trace.total_divergences(), 0);
}

#[test]
fn correlated_normal_recovers_correlation() {
    let cfg = SamplerConfig { seed: 4, target_accept: 0.9, ..SamplerConfig::default() };
    let trace = run(&CorrelatedNormal { rho: 0.8 }, &cfg);
    let (a, b) = (trace.samples("x0").unwrap(), trace.samples("x1").unwrap());
    let (ma, mb) = (mean(a), mean(b));
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64;
    let corr = cov / (var(a) * var(b)).sqrt();
    assert!((corr - 0.8).abs() < 0.05, "corr {corr}");
    for name in ["x0", "x1"] {
        assert!(rhat(&trace, name).unwrap() < 1.01);
        // A diagonal metric cannot undo the correlation; about 0.3 per draw
        // is typical here.
        assert!(ess(&trace, name).unwrap() > 0.2 * 4000.0);
    }
    assert!((pooled_accept(&trace) - 0.9).abs() < 0.05, "accept {}", pooled_accept(&trace));
}

#[test]
fn random_walk_fallback_targets_the_same_normal() {
    let target = DiagonalNormal { mean: vec![1.0, -2.0], sd: vec![0.5, 2.0] };
    let cfg = SamplerConfig { seed: 5, draws: 4000, tune: 2000, kind: SamplerKind::RandomWalk, ..SamplerConfig::default() };
    let trace = run(&target, &cfg);
    for (k, (m, sd)) in [(1.0, 0.5), (-2.0, 2.0)].into_iter().enumerate() {
        let name = format!("x{k}");
        let x = trace.samples(&name).unwrap();
        let se = sd / ess(&trace, &name).unwrap().sqrt();
        assert!((mean(x) - m).abs() < 5.0 * se, "{name}: mean {}", mean(x));
        assert!((var(x).sqrt() / sd - 1.0).abs() < 0.15, "{name}: sd {}", var(x).sqrt());
    }
}

#[test]
fn poisson_regression_gradient_matches_differences() {
    let f = PoissonRegression::simulate(1.0, 0.3, 200, (0.0, 5.0), 7);
    for p in [[0.9, 0.31], [1.2, 0.2], [0.0, 0.0]] {
        let mut g = [0.0; 2];
        f.log_density_and_gradient(&p, &mut g);
        let fd = oracles::grad_oracle(|q| f.log_density(q), &p, 1e-6);
        for k in 0..2 {
            assert!((g[k] - fd[k]).abs() <= 1e-5 * fd[k].abs().max(1.0), "{k}: {} vs {}", g[k], fd[k]);
        }
    }
}

fn poisson_run(seed: u64) -> [(f64, (f64, f64)); 2] {
    let f = PoissonRegression::simulate(1.0, 0.3, 200, (0.0, 5.0), seed);
    let cfg = SamplerConfig { chains: 2, draws: 500, tune: 500, seed, ..SamplerConfig::default() };
    let trace = run(&f, &cfg);
    let a = trace.samples("x0").unwrap();
    let b = trace.samples("x1").unwrap();
    [(mean(a), hdi(a, 0.95).unwrap()), (mean(b), hdi(b, 0.95).unwrap())]
}

#[test]
fn poisson_regression_single_run_brackets_truth() {
    let [(_, ha), (_, hb)] = poisson_run(2024);
    assert!(ha.0 <= 1.0 && 1.0 <= ha.1, "alpha HDI {ha:?}");
    assert!(hb.0 <= 0.3 && 0.3 <= hb.1, "beta HDI {hb:?}");
}

#[test]
fn poisson_regression_coverage() {
    let runs: Vec<_> = (0..100u64).into_par_iter().map(|r| poisson_run(1000 + r)).collect();
    let covered = |k: usize, truth: f64| runs.iter().filter(|r| r[k].1 .0 <= truth && truth <= r[k].1 .1).count();
    let (ca, cb) = (covered(0, 1.0), covered(1, 0.3));
    assert!(ca >= 90 && cb >= 90, "coverage alpha {ca}/100, beta {cb}/100");
}

#[test]
fn flat_slope_is_not_excluded() {
    // Data generated without a slope: zero should sit inside the slope HDI.
    let f = PoissonRegression::simulate(1.5, 0.0, 200, (0.0, 5.0), 99);
    let trace = run(&f, &SamplerConfig { chains: 2, draws: 500, tune: 500, seed: 99, ..SamplerConfig::default() });
    let h = hdi(trace.samples("x1").unwrap(), 0.95).unwrap();
    assert!(h.0 < 0.0 && 0.0 < h.1, "{h:?}");
}

#[test]
fn seeded_runs_are_identical() {
    let target = CorrelatedNormal { rho: 0.5 };
    let cfg = SamplerConfig { chains: 3, draws: 200, tune: 200, seed: 77, ..SamplerConfig::default() };
    let (a, b) = (run(&target, &cfg), run(&target, &cfg));
    for name in ["x0", "x1"] {
        let (x, y) = (a.samples(name).unwrap(), b.samples(name).unwrap());
        assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
    let c = run(&target, &SamplerConfig { seed: 78, ..cfg });
    assert_ne!(a.samples("x0").unwrap(), c.samples("x0").unwrap());
}

/// Normal density centred near the upper edge of `[-1, 1]`.
struct EdgeNormal;

impl LogDensity for EdgeNormal {
    fn dim(&self) -> usize {
        1
    }

    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let r = (x[0] - 0.9) / 0.3;
        grad[0] = -r / 0.3;
        -0.5 * r * r
    }
}

#[test]
fn bounded_coordinates_stay_in_bounds() {
    let layout = LatentLayout { entries: vec![LatentEntry { name: "t".into(), support: Support::Interval { lo: -1.0, hi: 1.0 } }] };
    let trace = sampler::sample(&EdgeNormal, &layout, &SamplerConfig { seed: 8, ..SamplerConfig::default() }).unwrap();
    let t = trace.samples("t").unwrap();
    assert!(t.iter().all(|&v| (-1.0..=1.0).contains(&v)));
    // Mass piles up against the upper bound but the mean stays inside.
    let m = mean(t);
    assert!(m > 0.5 && m < 0.9, "mean {m}");
    let (lo, hi) = hdi(t, 0.95).unwrap();
    assert_eq!((lo, hi), hdi_oracle(t, 0.95));
    assert!(hi <= 1.0);
}
