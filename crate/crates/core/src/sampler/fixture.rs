//! Reference targets for validating samplers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::LogDensity;

/// Independent normals with the given means and standard deviations.
#[derive(Debug, Clone)]
pub struct DiagonalNormal {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl LogDensity for DiagonalNormal {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut lp = 0.0;
        for k in 0..x.len() {
            let r = (x[k] - self.mean[k]) / self.sd[k];
            lp -= 0.5 * r * r;
            grad[k] = -r / self.sd[k];
        }
        lp
    }
}

/// Bivariate normal with unit variances and correlation `rho`.
#[derive(Debug, Clone, Copy)]
pub struct CorrelatedNormal {
    pub rho: f64,
}

impl LogDensity for CorrelatedNormal {
    fn dim(&self) -> usize {
        2
    }

    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = 1.0 - self.rho * self.rho;
        let q = (x[0] * x[0] - 2.0 * self.rho * x[0] * x[1] + x[1] * x[1]) / d;
        grad[0] = -(x[0] - self.rho * x[1]) / d;
        grad[1] = -(x[1] - self.rho * x[0]) / d;
        -0.5 * q
    }
}

/// Poisson regression `y_i ~ Poisson(exp(α + β x_i))` with independent
/// normal priors of standard deviation [`PoissonRegression::PRIOR_SD`].
#[derive(Debug, Clone)]
pub struct PoissonRegression {
    pub x: Vec<f64>,
    pub y: Vec<u64>,
}

impl PoissonRegression {
    pub const PRIOR_SD: f64 = 10.0;

    /// Simulates `y` on an evenly spaced grid of `n` points spanning `[lo, hi]`.
    pub fn simulate(alpha: f64, beta: f64, n: usize, (lo, hi): (f64, f64), seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64).collect();
        let y = x
            .iter()
            .map(|&xi| {
                let lam = (alpha + beta * xi).exp();
                Poisson::new(lam).expect("positive rate").sample(&mut rng) as u64
            })
            .collect();
        Self { x, y }
    }
}

impl LogDensity for PoissonRegression {
    fn dim(&self) -> usize {
        2
    }

    fn log_density_and_gradient(&self, p: &[f64], grad: &mut [f64]) -> f64 {
        let (a, b) = (p[0], p[1]);
        let s2 = Self::PRIOR_SD * Self::PRIOR_SD;
        let mut lp = -0.5 * (a * a + b * b) / s2;
        grad[0] = -a / s2;
        grad[1] = -b / s2;
        for (&xi, &yi) in self.x.iter().zip(&self.y) {
            let eta = a + b * xi;
            let lam = eta.exp();
            let y = yi as f64;
            lp += y * eta - lam;
            grad[0] += y - lam;
            grad[1] += (y - lam) * xi;
        }
        lp
    }
}
