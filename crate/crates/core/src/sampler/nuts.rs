//! Multinomial no-U-turn sampler with a diagonal metric.
//!
//! Trajectories double in a random direction until the generalized U-turn
//! criterion fails, checked across the merged trajectory and across the
//! boundary between the two halves at every level. States are drawn
//! uniformly within subtrees and with a bias toward the newer half at the
//! top level.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::adapt::{DualAveraging, MetricWindows};
use super::{ChainOutput, ChainStats, LogDensity, Potential, SamplerConfig, SamplerError, MAX_DELTA_H};

#[derive(Clone)]
struct State {
    q: Vec<f64>,
    p: Vec<f64>,
    logp: f64,
    grad: Vec<f64>,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

fn sum(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn criterion(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

pub(crate) struct Transition {
    pub accept_stat: f64,
    pub depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
}

pub(crate) struct Nuts<'p, 'a, D: ?Sized> {
    pot: &'p Potential<'a, D>,
    pub inv_metric: Vec<f64>,
    pub step: f64,
    max_depth: usize,
    // Per-transition scratch.
    z: State,
    h0: f64,
    divergent: bool,
    n_leapfrog: usize,
    sum_metro_prob: f64,
}

/// Subtree summary produced by `build_tree`.
struct Subtree {
    p_sharp_beg: Vec<f64>,
    p_sharp_end: Vec<f64>,
    p_beg: Vec<f64>,
    p_end: Vec<f64>,
    rho: Vec<f64>,
    log_sum_weight: f64,
    propose: State,
}

impl<'p, 'a, D: LogDensity + ?Sized> Nuts<'p, 'a, D> {
    pub(crate) fn new(pot: &'p Potential<'a, D>, q: Vec<f64>, logp: f64, grad: Vec<f64>, max_depth: usize) -> Self {
        let dim = q.len();
        Self {
            pot,
            inv_metric: vec![1.0; dim],
            step: 1.0,
            max_depth,
            z: State { q, p: vec![0.0; dim], logp, grad },
            h0: 0.0,
            divergent: false,
            n_leapfrog: 0,
            sum_metro_prob: 0.0,
        }
    }

    pub(crate) fn position(&self) -> &[f64] {
        &self.z.q
    }

    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
    }

    fn hamiltonian(&self, z: &State) -> f64 {
        let h = -z.logp + self.kinetic(&z.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn p_sharp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.inv_metric).map(|(p, m)| p * m).collect()
    }

    fn sample_momentum(&mut self, rng: &mut ChaCha8Rng) {
        for (p, m) in self.z.p.iter_mut().zip(&self.inv_metric) {
            let n: f64 = rng.sample(StandardNormal);
            *p = n / m.sqrt();
        }
    }

    fn leapfrog(&mut self, eps: f64) {
        let z = &mut self.z;
        for k in 0..z.q.len() {
            z.p[k] += 0.5 * eps * z.grad[k];
            z.q[k] += eps * self.inv_metric[k] * z.p[k];
        }
        z.logp = self.pot.eval(&z.q, &mut z.grad);
        if z.logp.is_finite() {
            for k in 0..z.q.len() {
                z.p[k] += 0.5 * eps * z.grad[k];
            }
        }
    }

    /// Heuristic initial step size: double or halve until a single leapfrog
    /// step crosses an acceptance probability of 0.8.
    pub(crate) fn init_step_size(&mut self, rng: &mut ChaCha8Rng) -> Result<(), String> {
        let start = self.z.clone();
        self.sample_momentum(rng);
        let h0 = self.hamiltonian(&self.z);
        self.leapfrog(self.step);
        let delta = h0 - self.hamiltonian(&self.z);
        let up = delta > 0.8f64.ln();
        loop {
            self.z = start.clone();
            self.sample_momentum(rng);
            let h0 = self.hamiltonian(&self.z);
            self.leapfrog(self.step);
            let delta = h0 - self.hamiltonian(&self.z);
            if up && !(delta > 0.8f64.ln()) || !up && !(delta < 0.8f64.ln()) {
                break;
            }
            self.step = if up { self.step * 2.0 } else { self.step * 0.5 };
            if self.step > 1e7 {
                self.z = start;
                return Err("step size diverged upward; the target may be improper".into());
            }
            if self.step < 1e-300 {
                self.z = start;
                return Err("step size collapsed to zero; the gradient may be non-finite".into());
            }
        }
        self.z = start;
        Ok(())
    }

    pub(crate) fn transition(&mut self, rng: &mut ChaCha8Rng) -> Transition {
        self.sample_momentum(rng);
        self.h0 = self.hamiltonian(&self.z);
        self.divergent = false;
        self.n_leapfrog = 0;
        self.sum_metro_prob = 0.0;

        let mut z_fwd = self.z.clone();
        let mut z_bck = self.z.clone();
        let mut z_sample = self.z.clone();

        let p0 = self.z.p.clone();
        let ps0 = self.p_sharp(&p0);
        let (mut p_fwd_fwd, mut p_sharp_fwd_fwd) = (p0.clone(), ps0.clone());
        // Inner endpoints of the two halves; set on every doubling.
        let (mut p_fwd_bck, mut p_sharp_fwd_bck): (Vec<f64>, Vec<f64>);
        let (mut p_bck_fwd, mut p_sharp_bck_fwd): (Vec<f64>, Vec<f64>);
        let (mut p_bck_bck, mut p_sharp_bck_bck) = (p0.clone(), ps0);
        let mut rho = p0;
        let mut log_sum_weight = 0.0;
        let mut depth = 0;

        while depth < self.max_depth {
            let forward = rng.random::<f64>() > 0.5;
            let (rho_fwd, rho_bck);
            let sub;
            if forward {
                self.z = z_fwd.clone();
                // The existing trajectory becomes the backward half.
                rho_bck = rho.clone();
                p_bck_fwd = p_fwd_fwd.clone();
                p_sharp_bck_fwd = p_sharp_fwd_fwd.clone();
                sub = self.build_tree(depth, 1.0, rng);
                z_fwd = self.z.clone();
                if let Some(s) = &sub {
                    p_sharp_fwd_bck = s.p_sharp_beg.clone();
                    p_sharp_fwd_fwd = s.p_sharp_end.clone();
                    p_fwd_bck = s.p_beg.clone();
                    p_fwd_fwd = s.p_end.clone();
                    rho_fwd = s.rho.clone();
                } else {
                    break;
                }
            } else {
                self.z = z_bck.clone();
                rho_fwd = rho.clone();
                p_fwd_bck = p_bck_bck.clone();
                p_sharp_fwd_bck = p_sharp_bck_bck.clone();
                sub = self.build_tree(depth, -1.0, rng);
                z_bck = self.z.clone();
                if let Some(s) = &sub {
                    p_sharp_bck_fwd = s.p_sharp_beg.clone();
                    p_sharp_bck_bck = s.p_sharp_end.clone();
                    p_bck_fwd = s.p_beg.clone();
                    p_bck_bck = s.p_end.clone();
                    rho_bck = s.rho.clone();
                } else {
                    break;
                }
            }
            let sub = sub.expect("checked above");
            depth += 1;

            if sub.log_sum_weight > log_sum_weight {
                z_sample = sub.propose.clone();
            } else {
                let accept = (sub.log_sum_weight - log_sum_weight).exp();
                if rng.random::<f64>() < accept {
                    z_sample = sub.propose.clone();
                }
            }
            log_sum_weight = log_sum_exp(log_sum_weight, sub.log_sum_weight);

            rho = sum(&rho_bck, &rho_fwd);
            let mut persist = criterion(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
            let rho_ext = sum(&rho_bck, &p_fwd_bck);
            persist &= criterion(&p_sharp_bck_bck, &p_sharp_fwd_bck, &rho_ext);
            let rho_ext = sum(&rho_fwd, &p_bck_fwd);
            persist &= criterion(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &rho_ext);
            if !persist {
                break;
            }
        }

        let accept_stat = if self.n_leapfrog > 0 { self.sum_metro_prob / self.n_leapfrog as f64 } else { 0.0 };
        self.z = z_sample;
        Transition { accept_stat, depth, n_leapfrog: self.n_leapfrog, divergent: self.divergent }
    }

    /// Extends the trajectory by `2^depth` leapfrog steps from the current
    /// state in direction `sign`. Returns `None` if the subtree diverged or
    /// made a U-turn internally.
    fn build_tree(&mut self, depth: usize, sign: f64, rng: &mut ChaCha8Rng) -> Option<Subtree> {
        if depth == 0 {
            self.leapfrog(sign * self.step);
            self.n_leapfrog += 1;
            let h = self.hamiltonian(&self.z);
            let h = if h.is_nan() { f64::INFINITY } else { h };
            if h - self.h0 > MAX_DELTA_H {
                self.divergent = true;
            }
            let w = self.h0 - h;
            self.sum_metro_prob += if w > 0.0 { 1.0 } else { w.exp() };
            if self.divergent {
                return None;
            }
            let ps = self.p_sharp(&self.z.p);
            return Some(Subtree {
                p_sharp_beg: ps.clone(),
                p_sharp_end: ps,
                p_beg: self.z.p.clone(),
                p_end: self.z.p.clone(),
                rho: self.z.p.clone(),
                log_sum_weight: w,
                propose: self.z.clone(),
            });
        }

        let init = self.build_tree(depth - 1, sign, rng)?;
        let fin = self.build_tree(depth - 1, sign, rng)?;

        let log_sum_weight = log_sum_exp(init.log_sum_weight, fin.log_sum_weight);
        let propose = if fin.log_sum_weight > log_sum_weight {
            fin.propose
        } else {
            let accept = (fin.log_sum_weight - log_sum_weight).exp();
            if rng.random::<f64>() < accept {
                fin.propose
            } else {
                init.propose
            }
        };

        let rho = sum(&init.rho, &fin.rho);
        let mut persist = criterion(&init.p_sharp_beg, &fin.p_sharp_end, &rho);
        let mut rho_ext = init.rho.clone();
        add_into(&mut rho_ext, &fin.p_beg);
        persist &= criterion(&init.p_sharp_beg, &fin.p_sharp_beg, &rho_ext);
        let mut rho_ext = fin.rho.clone();
        add_into(&mut rho_ext, &init.p_end);
        persist &= criterion(&init.p_sharp_end, &fin.p_sharp_end, &rho_ext);
        if !persist {
            return None;
        }
        Some(Subtree {
            p_sharp_beg: init.p_sharp_beg,
            p_sharp_end: fin.p_sharp_end,
            p_beg: init.p_beg,
            p_end: fin.p_end,
            rho,
            log_sum_weight,
            propose,
        })
    }
}

pub(crate) fn run_chain<D: LogDensity + ?Sized>(
    pot: &Potential<'_, D>,
    cfg: &SamplerConfig,
    chain: usize,
    init: (Vec<f64>, f64, Vec<f64>),
    rng: &mut ChaCha8Rng,
) -> Result<ChainOutput, SamplerError> {
    let (q, logp, grad) = init;
    let mut nuts = Nuts::new(pot, q, logp, grad, cfg.max_tree_depth);
    let step_err = |reason| SamplerError::StepSize { chain, reason };
    nuts.init_step_size(rng).map_err(step_err)?;
    let mut da = DualAveraging::new(cfg.target_accept, nuts.step);
    let mut windows = MetricWindows::new(cfg.tune, pot.dim());
    let mut stats = ChainStats::default();

    for _ in 0..cfg.tune {
        let t = nuts.transition(rng);
        if t.divergent {
            stats.warmup_divergences += 1;
        }
        nuts.step = da.update(t.accept_stat);
        // Step-size averaging carries on across metric updates.
        if let Some(inv_metric) = windows.observe(nuts.position()) {
            nuts.inv_metric = inv_metric;
        }
    }
    if cfg.tune > 0 {
        nuts.step = da.final_step();
    }

    let mut draws = Vec::with_capacity(cfg.draws);
    let mut accept_sum = 0.0;
    let mut depth_sum = 0usize;
    for _ in 0..cfg.draws {
        let t = nuts.transition(rng);
        accept_sum += t.accept_stat;
        depth_sum += t.depth;
        stats.n_leapfrog += t.n_leapfrog;
        if t.divergent {
            stats.divergences += 1;
        }
        if t.depth >= cfg.max_tree_depth {
            stats.max_depth_hits += 1;
        }
        draws.push(pot.to_constrained(nuts.position()));
    }
    stats.step_size = nuts.step;
    stats.inv_metric = nuts.inv_metric.clone();
    stats.mean_accept = accept_sum / cfg.draws as f64;
    stats.mean_tree_depth = depth_sum as f64 / cfg.draws as f64;
    Ok(ChainOutput { draws, stats })
}
