//! Scalar abstraction and a reverse-mode tape.
//!
//! Model code is written once against [`Real`] and evaluated either on plain
//! `f64` (values) or on [`Var`] (values plus gradients via [`gradient`]).

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Operations the model needs from a scalar type.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    /// A constant of the same kind as `self`.
    fn lift(&self, v: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    /// Absolute value with subgradient 0 at the origin.
    fn abs(self) -> Self;
    /// `ln Φ(x)` for the standard normal CDF `Φ`.
    fn ln_norm_cdf(self) -> Self;

    fn sq(self) -> Self {
        self * self
    }
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Φ(x)`, accurate in the far lower tail.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > -5.0 {
        (0.5 * statrs::function::erf::erfc(-x / SQRT_2)).ln()
    } else {
        // Use the scaled complementary error function in the lower tail to
        // avoid underflow: Φ(x) = ½ erfcx(-x/√2) exp(-x²/2).
        let t = -x / SQRT_2;
        (0.5 * erfcx(t)).ln() - 0.5 * x * x
    }
}

/// `φ(x)/Φ(x)`, the derivative of [`ln_norm_cdf`].
pub fn inv_mills(x: f64) -> f64 {
    if x > -5.0 {
        let pdf = (-0.5 * x * x - LN_SQRT_2PI).exp();
        pdf / (0.5 * statrs::function::erf::erfc(-x / SQRT_2))
    } else {
        let t = -x / SQRT_2;
        (-LN_SQRT_2PI).exp() / (0.5 * erfcx(t))
    }
}

/// Scaled complementary error function `exp(t²) erfc(t)` for large positive `t`
/// via its continued fraction.
fn erfcx(t: f64) -> f64 {
    debug_assert!(t > 3.0);
    let mut f = t;
    for k in (1..=60).rev() {
        f = t + (k as f64 / 2.0) / f;
    }
    1.0 / (f * std::f64::consts::PI.sqrt())
}

impl Real for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, v: f64) -> f64 {
        v
    }
    fn sin(self) -> f64 {
        f64::sin(self)
    }
    fn cos(self) -> f64 {
        f64::cos(self)
    }
    fn sqrt(self) -> f64 {
        f64::sqrt(self)
    }
    fn exp(self) -> f64 {
        f64::exp(self)
    }
    fn ln(self) -> f64 {
        f64::ln(self)
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn ln_norm_cdf(self) -> f64 {
        ln_norm_cdf(self)
    }
}

const CONST: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    parents: [u32; 2],
    weights: [f64; 2],
}

/// Recording of elementary operations for one gradient evaluation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.nodes.borrow_mut().clear();
    }

    /// A differentiable input.
    pub fn var(&self, val: f64) -> Var<'_> {
        let idx = self.push(Node { parents: [CONST, CONST], weights: [0.0, 0.0] });
        Var { tape: self, idx, val }
    }

    pub fn constant(&self, val: f64) -> Var<'_> {
        Var { tape: self, idx: CONST, val }
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len();
        assert!(idx < CONST as usize, "tape overflow");
        nodes.push(node);
        idx as u32
    }

    /// Adjoints of every node with respect to `output`.
    pub fn adjoints(&self, output: &Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        if output.idx == CONST {
            return adj;
        }
        adj[output.idx as usize] = 1.0;
        for i in (0..=output.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let n = nodes[i];
            for k in 0..2 {
                if n.parents[k] != CONST {
                    adj[n.parents[k] as usize] += n.weights[k] * a;
                }
            }
        }
        adj
    }
}

/// A scalar recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    val: f64,
}

impl<'t> Var<'t> {
    pub fn index(&self) -> Option<usize> {
        (self.idx != CONST).then_some(self.idx as usize)
    }

    fn unary(self, val: f64, d: f64) -> Self {
        if self.idx == CONST {
            return Var { tape: self.tape, idx: CONST, val };
        }
        let idx = self.tape.push(Node { parents: [self.idx, CONST], weights: [d, 0.0] });
        Var { tape: self.tape, idx, val }
    }

    fn binary(self, other: Self, val: f64, da: f64, db: f64) -> Self {
        match (self.idx == CONST, other.idx == CONST) {
            (true, true) => Var { tape: self.tape, idx: CONST, val },
            (false, true) => self.unary(val, da),
            (true, false) => other.unary(val, db),
            (false, false) => {
                let idx = self.tape.push(Node { parents: [self.idx, other.idx], weights: [da, db] });
                Var { tape: self.tape, idx, val }
            }
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.binary(o, self.val + o.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.binary(o, self.val - o.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.val;
        self.binary(o, self.val * inv, inv, -self.val * inv * inv)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        self.unary(self.val + c, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    fn sub(self, c: f64) -> Self {
        self.unary(self.val - c, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        self.unary(self.val * c, c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    fn div(self, c: f64) -> Self {
        self.unary(self.val / c, 1.0 / c)
    }
}

impl<'t> Real for Var<'t> {
    fn value(&self) -> f64 {
        self.val
    }
    fn lift(&self, v: f64) -> Self {
        self.tape.constant(v)
    }
    fn sin(self) -> Self {
        self.unary(self.val.sin(), self.val.cos())
    }
    fn cos(self) -> Self {
        self.unary(self.val.cos(), -self.val.sin())
    }
    fn sqrt(self) -> Self {
        let r = self.val.sqrt();
        self.unary(r, 0.5 / r)
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }
    fn ln(self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val)
    }
    fn abs(self) -> Self {
        let d = if self.val > 0.0 {
            1.0
        } else if self.val < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(self.val.abs(), d)
    }
    fn ln_norm_cdf(self) -> Self {
        self.unary(ln_norm_cdf(self.val), inv_mills(self.val))
    }
}

/// Value and gradient of `f` at `x`.
pub fn gradient<F>(x: &[f64], f: F) -> (f64, Vec<f64>)
where
    F: for<'t> FnOnce(&[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let inputs: Vec<Var<'_>> = x.iter().map(|&v| tape.var(v)).collect();
    let out = f(&inputs);
    let adj = tape.adjoints(&out);
    let grad = inputs.iter().map(|v| adj[v.idx as usize]).collect();
    (out.val, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn poly<R: Real>(x: &[R]) -> R {
        (x[0] * x[1]).sin() + (x[0] / x[1]).exp() - x[1].sqrt() * 3.0 + x[0].abs().ln() + x[1].ln_norm_cdf()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let x = [0.7, 1.3];
        let (v, g) = gradient(&x, |x| poly(x));
        assert_relative_eq!(v, poly(&x[..]), max_relative = 1e-15);
        for i in 0..2 {
            let h = 1e-6 * x[i];
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (poly(&xp[..]) - poly(&xm[..])) / (2.0 * h);
            assert_relative_eq!(g[i], fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn abs_subgradient_at_zero() {
        let (_, g) = gradient(&[0.0], |x| x[0].abs());
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn ln_norm_cdf_tails() {
        assert_relative_eq!(ln_norm_cdf(0.0), 0.5f64.ln(), max_relative = 1e-14);
        // Φ(-10) = 7.619853024160527e-24
        assert_relative_eq!(ln_norm_cdf(-10.0), 7.619_853_024_160_527e-24f64.ln(), max_relative = 1e-10);
        // Continuity across the branch switch.
        assert_relative_eq!(ln_norm_cdf(-5.0 + 1e-12), ln_norm_cdf(-5.0 - 1e-12), max_relative = 1e-9);
        assert_relative_eq!(inv_mills(-5.0 + 1e-12), inv_mills(-5.0 - 1e-12), max_relative = 1e-9);
        assert!(ln_norm_cdf(40.0).abs() < 1e-300);
    }

    #[test]
    fn constants_do_not_grow_tape() {
        let tape = Tape::new();
        let a = tape.constant(2.0);
        let b = (a * 3.0).sin() + a;
        assert!(b.index().is_none());
        assert!(tape.is_empty());
    }
}
