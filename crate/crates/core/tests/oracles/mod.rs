//! Brute-force reference implementations for tests. Nothing here reuses the
//! library's optics or posterior code: matrices are plain arrays and every
//! product is an explicit loop.

#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::FRAC_PI_2;
use std::f64::consts::PI;
use std::fs::{self, OpenOptions};
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::path::PathBuf;

use num_complex::Complex64 as C;

pub type M2 = [[C; 2]; 2];

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

fn mul2(a: &M2, b: &M2) -> M2 {
    let mut out = [[c(0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

/// Retarder of retardance `eta` with fast axis at `theta`, built as
/// `e^{-iη/2} R(θ) diag(1, e^{iη}) R(θ)ᵀ`.
pub fn retarder(eta: f64, theta: f64) -> M2 {
    let (s, co) = theta.sin_cos();
    let r = [[c(co), c(-s)], [c(s), c(co)]];
    let rt = [[c(co), c(s)], [c(-s), c(co)]];
    let d = [[c(1.0), c(0.0)], [c(0.0), C::from_polar(1.0, eta)]];
    let phase = C::from_polar(1.0, -eta / 2.0);
    let m = mul2(&mul2(&r, &d), &rt);
    [[phase * m[0][0], phase * m[0][1]], [phase * m[1][0], phase * m[1][1]]]
}

/// `⟨port| M ρ M† |port⟩` with `M = retarder(η_H, θ_H) · retarder(η_Q, θ_Q)`.
pub fn prob_oracle_1q(rho: &M2, eta_h: f64, eta_q: f64, theta_h: f64, theta_q: f64, port_h: bool) -> f64 {
    let m = mul2(&retarder(eta_h, theta_h), &retarder(eta_q, theta_q));
    let k = if port_h { 0 } else { 1 };
    let mut p = c(0.0);
    for a in 0..2 {
        for b in 0..2 {
            p += m[k][a] * rho[a][b] * m[k][b].conj();
        }
    }
    p.re
}

/// `Tr[ρ U† |p_a p_b⟩⟨p_a p_b| U]` with `U = U_A ⊗ U_B` and each
/// `U_X = retarder(π, θ_H) · retarder(π/2, θ_Q)`.
pub fn prob_oracle_2q(rho: &[[C; 4]; 4], a: (f64, f64), b: (f64, f64), port_a_h: bool, port_b_h: bool) -> f64 {
    let ua = mul2(&retarder(PI, a.0), &retarder(FRAC_PI_2, a.1));
    let ub = mul2(&retarder(PI, b.0), &retarder(FRAC_PI_2, b.1));
    let mut u = [[c(0.0); 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    u[2 * i + k][2 * j + l] = ua[i][j] * ub[k][l];
                }
            }
        }
    }
    let row = 2 * usize::from(!port_a_h) + usize::from(!port_b_h);
    let mut proj = [[c(0.0); 4]; 4];
    proj[row][row] = c(1.0);
    // U† P U
    let mut op = [[c(0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    op[i][j] += u[k][i].conj() * proj[k][l] * u[l][j];
                }
            }
        }
    }
    let mut tr = c(0.0);
    for i in 0..4 {
        for k in 0..4 {
            tr += rho[i][k] * op[k][i];
        }
    }
    tr.re
}

/// Central differences of `f` at `x` with step `h`.
pub fn grad_oracle(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|k| {
            xp[k] = x[k] + h;
            let up = f(&xp);
            xp[k] = x[k] - h;
            let down = f(&xp);
            xp[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Shortest window holding `⌈prob·n⌉` sorted samples, found by checking every
/// window; ties keep the leftmost.
pub fn hdi_oracle(samples: &[f64], prob: f64) -> (f64, f64) {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = (prob * v.len() as f64).ceil() as usize;
    let mut best = (v[0], v[k - 1]);
    for start in 1..=v.len() - k {
        let cand = (v[start], v[start + k - 1]);
        if cand.1 - cand.0 < best.1 - best.0 {
            best = cand;
        }
    }
    best
}

/// Naive `a ⊗ b` for row-major dense matrices.
pub fn kron_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (ar, ac, br, bc) = (a.len(), a[0].len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; ac * bc]; ar * br];
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[i * br + k][j * bc + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// One oracle comparison, stored under the test target's scratch directory.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub case: String,
    pub inputs_digest: String,
    pub reference: f64,
    pub candidate: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

impl OracleReport {
    pub fn new(case: &str, inputs: &impl Hash, reference: f64, candidate: f64) -> Self {
        let mut h = DefaultHasher::new();
        inputs.hash(&mut h);
        let abs_err = (reference - candidate).abs();
        Self {
            case: case.to_string(),
            inputs_digest: format!("{:016x}", h.finish()),
            reference,
            candidate,
            abs_err,
            rel_err: abs_err / reference.abs().max(f64::MIN_POSITIVE),
        }
    }

    /// Appends the report as a JSON line to `oracle_reports/<file>.jsonl`.
    pub fn store(&self, file: &str) {
        assert!(self.abs_err.is_finite() && self.rel_err.is_finite(), "non-finite oracle error in {}", self.case);
        let dir = report_dir();
        fs::create_dir_all(&dir).expect("report dir");
        let mut f = OpenOptions::new().create(true).append(true).open(dir.join(format!("{file}.jsonl"))).expect("report file");
        writeln!(
            f,
            "{{\"case\":\"{}\",\"inputs_digest\":\"{}\",\"reference\":{:e},\"candidate\":{:e},\"abs_err\":{:e},\"rel_err\":{:e}}}",
            self.case, self.inputs_digest, self.reference, self.candidate, self.abs_err, self.rel_err
        )
        .expect("report write");
    }
}

pub fn report_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("oracle_reports")
}

/// Bit patterns of a float slice, for hashing inputs.
pub fn bits(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}
