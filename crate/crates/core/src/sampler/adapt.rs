//! Warm-up adaptation: dual-averaging step size and windowed diagonal metric.

/// Nesterov dual averaging of the log step size toward a target acceptance.
#[derive(Debug, Clone)]
pub(crate) struct DualAveraging {
    target: f64,
    mu: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    pub(crate) fn new(target: f64, initial_step: f64) -> Self {
        let mu = (10.0 * initial_step).ln();
        Self { target, mu, gamma: 0.05, t0: 10.0, kappa: 0.75, counter: 0.0, s_bar: 0.0, x_bar: 0.0 }
    }

    /// Records an acceptance statistic and returns the next step size.
    pub(crate) fn update(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let a = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + self.t0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - a);
        let x = self.mu - self.s_bar * self.counter.sqrt() / self.gamma;
        let x_eta = self.counter.powf(-self.kappa);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    /// Step size to use after warm-up.
    pub(crate) fn final_step(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone)]
pub(crate) struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    pub(crate) fn new(dim: usize) -> Self {
        Self { n: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub(crate) fn add(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for (k, &v) in x.iter().enumerate() {
            let d = v - self.mean[k];
            self.mean[k] += d / n;
            self.m2[k] += d * (v - self.mean[k]);
        }
    }

    pub(crate) fn count(&self) -> usize {
        self.n
    }

    pub(crate) fn variance(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2.iter().map(|m| m / (n - 1.0)).collect()
    }

    pub(crate) fn reset(&mut self) {
        let dim = self.mean.len();
        *self = Self::new(dim);
    }
}

/// Windowed estimation of a diagonal inverse metric: a fast initial buffer,
/// doubling slow windows, and a fast terminal buffer.
#[derive(Debug, Clone)]
pub(crate) struct MetricWindows {
    num_warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window: usize,
    counter: usize,
    estimator: Welford,
    enabled: bool,
}

impl MetricWindows {
    pub(crate) fn new(num_warmup: usize, dim: usize) -> Self {
        let (mut init_buffer, mut term_buffer, mut base_window) = (75, 50, 25);
        let enabled = num_warmup >= 20;
        if enabled && init_buffer + term_buffer + base_window > num_warmup {
            init_buffer = (0.15 * num_warmup as f64) as usize;
            term_buffer = (0.1 * num_warmup as f64) as usize;
            base_window = num_warmup - (init_buffer + term_buffer);
        }
        Self {
            num_warmup,
            init_buffer,
            term_buffer,
            window_size: base_window,
            next_window: init_buffer + base_window - 1,
            counter: 0,
            estimator: Welford::new(dim),
            enabled,
        }
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer
            && self.counter < self.num_warmup - self.term_buffer
            && self.counter != self.num_warmup
    }

    fn window_end(&self) -> bool {
        self.counter == self.next_window && self.counter != self.num_warmup
    }

    fn advance_window(&mut self) {
        let last = self.num_warmup - self.term_buffer - 1;
        if self.next_window == last {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != last && self.next_window + 2 * self.window_size >= self.num_warmup - self.term_buffer {
            self.next_window = last;
        }
    }

    /// Feeds one warm-up position. Returns a new inverse metric at the end
    /// of each slow window.
    pub(crate) fn observe(&mut self, q: &[f64]) -> Option<Vec<f64>> {
        if !self.enabled {
            return None;
        }
        if self.in_window() {
            self.estimator.add(q);
        }
        let mut out = None;
        if self.window_end() {
            self.advance_window();
            let n = self.estimator.count() as f64;
            if n >= 2.0 {
                let var = self.estimator.variance();
                out = Some(var.iter().map(|v| (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0))).collect());
            }
            self.estimator.reset();
        }
        self.counter += 1;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_boundaries_for_default_warmup() {
        let mut w = MetricWindows::new(1000, 1);
        let mut ends = Vec::new();
        for i in 0..1000 {
            if w.observe(&[i as f64]).is_some() {
                ends.push(i);
            }
        }
        assert_eq!(ends, vec![99, 149, 249, 449, 949]);
    }

    #[test]
    fn short_warmup_rescales_buffers() {
        let mut w = MetricWindows::new(100, 1);
        let ends: Vec<usize> = (0..100).filter(|&i| w.observe(&[i as f64]).is_some()).collect();
        assert_eq!(ends, vec![89]);
    }

    #[test]
    fn dual_averaging_moves_toward_target() {
        let mut da = DualAveraging::new(0.8, 1.0);
        // Accepting everything should grow the step size.
        let mut step = 1.0;
        for _ in 0..50 {
            step = da.update(1.0);
        }
        assert!(step > 1.0);
        let mut da = DualAveraging::new(0.8, 1.0);
        for _ in 0..50 {
            step = da.update(0.0);
        }
        assert!(step < 1.0);
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 0.5];
        let mut w = Welford::new(1);
        for x in xs {
            w.add(&[x]);
        }
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((w.variance()[0] - var).abs() < 1e-12);
    }
}
