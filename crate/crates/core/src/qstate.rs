//! Density matrices from the lower-triangular `T` parameterization.
//!
//! A one-qubit state uses four reals and a two-qubit state sixteen; the
//! matrix `ρ = T†T / Tr(T†T)` is Hermitian, unit-trace and positive by
//! construction. Basis order is `|H⟩, |V⟩` per qubit, with qubit A as the
//! most significant index for two qubits.

use num_complex::Complex64;
use thiserror::Error;

use crate::ad::Real;
use crate::linalg::{eig_hermitian, CMat, LinalgError};

/// Smallest eigenvalue tolerated by [`DensityMatrix::new`].
pub const PSD_TOL: f64 = -1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("expected 4 or 16 T parameters, got {0}")]
    BadLength(usize),
    #[error("T parameters are all zero; the state is undefined")]
    ZeroT,
    #[error("T parameters contain non-finite values")]
    NonFinite,
    #[error("density matrix must be 2x2 or 4x4, got {0}x{1}")]
    BadShape(usize, usize),
    #[error("density matrix trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("density matrix has eigenvalue {0:e} below tolerance")]
    NotPositive(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Number of qubits described by a parameter or state object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Qubits {
    One,
    Two,
}

impl Qubits {
    pub fn dim(self) -> usize {
        match self {
            Qubits::One => 2,
            Qubits::Two => 4,
        }
    }

    pub fn n_t(self) -> usize {
        match self {
            Qubits::One => 4,
            Qubits::Two => 16,
        }
    }
}

/// Real `T` parameters: 4 for one qubit, 16 for two.
#[derive(Debug, Clone, PartialEq)]
pub struct TParams(Vec<f64>);

impl TParams {
    pub fn new(t: Vec<f64>) -> Result<Self, StateError> {
        if t.len() != 4 && t.len() != 16 {
            return Err(StateError::BadLength(t.len()));
        }
        if t.iter().any(|x| !x.is_finite()) {
            return Err(StateError::NonFinite);
        }
        if t.iter().all(|&x| x == 0.0) {
            return Err(StateError::ZeroT);
        }
        Ok(Self(t))
    }

    pub fn qubits(&self) -> Qubits {
        if self.0.len() == 4 {
            Qubits::One
        } else {
            Qubits::Two
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// The lower-triangular matrix `T`.
    pub fn t_matrix(&self) -> CMat {
        let t = &self.0;
        let c = Complex64::new;
        match self.qubits() {
            Qubits::One => CMat::from_rows(2, 2, vec![c(t[0], 0.0), c(0.0, 0.0), c(t[1], t[2]), c(t[3], 0.0)]),
            Qubits::Two => {
                let z = c(0.0, 0.0);
                CMat::from_rows(
                    4,
                    4,
                    vec![
                        c(t[0], 0.0),
                        z,
                        z,
                        z,
                        c(t[1], t[2]),
                        c(t[3], 0.0),
                        z,
                        z,
                        c(t[4], t[5]),
                        c(t[6], t[7]),
                        c(t[8], 0.0),
                        z,
                        c(t[9], t[10]),
                        c(t[11], t[12]),
                        c(t[13], t[14]),
                        c(t[15], 0.0),
                    ],
                )
            }
        }
        .expect("fixed shape")
    }
}

/// A validated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMat);

impl DensityMatrix {
    /// Validates Hermiticity, unit trace (to 1e-9) and positivity.
    pub fn new(m: CMat) -> Result<Self, StateError> {
        if !m.is_square() || (m.rows() != 2 && m.rows() != 4) {
            return Err(StateError::BadShape(m.rows(), m.cols()));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(StateError::BadTrace(tr.re));
        }
        let (vals, _) = eig_hermitian(&m)?;
        if vals[0] < PSD_TOL {
            return Err(StateError::NotPositive(vals[0]));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn qubits(&self) -> Qubits {
        if self.0.rows() == 2 {
            Qubits::One
        } else {
            Qubits::Two
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eig_hermitian(&self.0).expect("validated Hermitian").0
    }

    /// Projector onto a normalized pure state.
    pub fn pure(psi: &[Complex64]) -> Result<Self, StateError> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(StateError::ZeroT);
        }
        let n = psi.len();
        Self::new(CMat::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / (norm * norm)))
    }
}

/// `ρ = T†T / Tr(T†T)` by explicit matrix products.
pub fn rho_from_t(t: &TParams) -> Result<DensityMatrix, StateError> {
    let tm = t.t_matrix();
    let p = &tm.adjoint() * &tm;
    let tr = p.trace().re;
    Ok(DensityMatrix(p.scale(Complex64::new(1.0 / tr, 0.0))))
}

/// Independent entries of a one-qubit density matrix:
/// `ρ00 = A`, `ρ11 = B`, `ρ10 = ReC + i ImC`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elements1Q<R> {
    pub a: R,
    pub b: R,
    pub re_c: R,
    pub im_c: R,
}

/// Independent entries of a two-qubit density matrix. Diagonal `A..D` are
/// `ρ00..ρ33`; the lower triangle is `E=ρ10, F=ρ20, G=ρ30, H=ρ21, I=ρ31, J=ρ32`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elements2Q<R> {
    pub a: R,
    pub b: R,
    pub c: R,
    pub d: R,
    pub re_e: R,
    pub im_e: R,
    pub re_f: R,
    pub im_f: R,
    pub re_g: R,
    pub im_g: R,
    pub re_h: R,
    pub im_h: R,
    pub re_i: R,
    pub im_i: R,
    pub re_j: R,
    pub im_j: R,
}

/// Names of the one-qubit element quantities, in [`Elements1Q::to_vec`] order.
pub const ELEMENT_NAMES_1Q: [&str; 4] = ["A", "B", "ReC", "ImC"];

/// Names of the two-qubit element quantities, in [`Elements2Q::to_vec`] order.
pub const ELEMENT_NAMES_2Q: [&str; 16] = [
    "A", "B", "C", "D", "ReE", "ImE", "ReF", "ImF", "ReG", "ImG", "ReH", "ImH", "ReI", "ImI", "ReJ", "ImJ",
];

impl<R: Copy> Elements1Q<R> {
    pub fn to_vec(&self) -> Vec<R> {
        vec![self.a, self.b, self.re_c, self.im_c]
    }
}

impl<R: Copy> Elements2Q<R> {
    pub fn to_vec(&self) -> Vec<R> {
        vec![
            self.a, self.b, self.c, self.d, self.re_e, self.im_e, self.re_f, self.im_f, self.re_g, self.im_g,
            self.re_h, self.im_h, self.re_i, self.im_i, self.re_j, self.im_j,
        ]
    }

    /// Inverse of [`Elements2Q::to_vec`]. Panics if `v.len() != 16`.
    pub fn from_slice(v: &[R]) -> Self {
        assert_eq!(v.len(), 16);
        Self {
            a: v[0],
            b: v[1],
            c: v[2],
            d: v[3],
            re_e: v[4],
            im_e: v[5],
            re_f: v[6],
            im_f: v[7],
            re_g: v[8],
            im_g: v[9],
            re_h: v[10],
            im_h: v[11],
            re_i: v[12],
            im_i: v[13],
            re_j: v[14],
            im_j: v[15],
        }
    }
}

impl Elements1Q<f64> {
    pub fn from_rho(rho: &DensityMatrix) -> Self {
        assert_eq!(rho.qubits(), Qubits::One);
        let e = rho.get(1, 0);
        Self { a: rho.get(0, 0).re, b: rho.get(1, 1).re, re_c: e.re, im_c: e.im }
    }

    pub fn to_matrix(&self) -> CMat {
        let c = Complex64::new;
        CMat::from_rows(
            2,
            2,
            vec![c(self.a, 0.0), c(self.re_c, -self.im_c), c(self.re_c, self.im_c), c(self.b, 0.0)],
        )
        .expect("fixed shape")
    }
}

const LOWER_2Q: [(usize, usize); 6] = [(1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (3, 2)];

impl Elements2Q<f64> {
    pub fn from_rho(rho: &DensityMatrix) -> Self {
        assert_eq!(rho.qubits(), Qubits::Two);
        let mut v = vec![rho.get(0, 0).re, rho.get(1, 1).re, rho.get(2, 2).re, rho.get(3, 3).re];
        for (i, j) in LOWER_2Q {
            let z = rho.get(i, j);
            v.push(z.re);
            v.push(z.im);
        }
        Self::from_slice(&v)
    }

    pub fn to_matrix(&self) -> CMat {
        let v = self.to_vec();
        let mut m = CMat::zeros(4, 4);
        for k in 0..4 {
            m[(k, k)] = Complex64::new(v[k], 0.0);
        }
        for (n, (i, j)) in LOWER_2Q.iter().enumerate() {
            let z = Complex64::new(v[4 + 2 * n], v[5 + 2 * n]);
            m[(*i, *j)] = z;
            m[(*j, *i)] = z.conj();
        }
        m
    }
}

#[derive(Clone, Copy)]
struct Cx<R> {
    re: R,
    im: R,
}

impl<R: Real> Cx<R> {
    /// `conj(self) * other`
    fn conj_mul(self, o: Self) -> Self {
        Cx { re: self.re * o.re + self.im * o.im, im: self.re * o.im - self.im * o.re }
    }

    fn add(self, o: Self) -> Self {
        Cx { re: self.re + o.re, im: self.im + o.im }
    }
}

/// Normalized one-qubit elements as functions of `t`. Panics if `t.len() != 4`.
pub fn elements_1q<R: Real>(t: &[R]) -> Elements1Q<R> {
    assert_eq!(t.len(), 4);
    let a = t[0].sq() + t[1].sq() + t[2].sq();
    let b = t[3].sq();
    let n = a + b;
    Elements1Q { a: a / n, b: b / n, re_c: t[1] * t[3] / n, im_c: t[2] * t[3] / n }
}

/// Normalized two-qubit elements as functions of `t`, computed from the
/// product `T†T`. Panics if `t.len() != 16`.
pub fn elements_2q<R: Real>(t: &[R]) -> Elements2Q<R> {
    assert_eq!(t.len(), 16);
    let zero = t[0].lift(0.0);
    let cx = |re: R, im: R| Cx { re, im };
    let real = |re: R| Cx { re, im: zero };
    // Rows of T, lower triangle only.
    let rows: [Vec<Cx<R>>; 4] = [
        vec![real(t[0])],
        vec![cx(t[1], t[2]), real(t[3])],
        vec![cx(t[4], t[5]), cx(t[6], t[7]), real(t[8])],
        vec![cx(t[9], t[10]), cx(t[11], t[12]), cx(t[13], t[14]), real(t[15])],
    ];
    // (T†T)_{ij} = Σ_k conj(T_ki) T_kj, with T_ki = 0 for i > k.
    let entry = |i: usize, j: usize| -> Cx<R> {
        let mut acc: Option<Cx<R>> = None;
        for row in rows.iter().skip(i.max(j)) {
            let term = row[i].conj_mul(row[j]);
            acc = Some(match acc {
                None => term,
                Some(s) => s.add(term),
            });
        }
        acc.expect("non-empty sum")
    };
    let diag: Vec<R> = (0..4).map(|k| entry(k, k).re).collect();
    let n = diag[0] + diag[1] + diag[2] + diag[3];
    let mut v: Vec<R> = diag.iter().map(|&x| x / n).collect();
    for (i, j) in LOWER_2Q {
        let z = entry(i, j);
        v.push(z.re / n);
        v.push(z.im / n);
    }
    Elements2Q::from_slice(&v)
}

/// One-qubit Stokes parameters `(S1, S2, S3)` with `Si = Tr(ρ σi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stokes1Q {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl Stokes1Q {
    pub fn from_elements(e: &Elements1Q<f64>) -> Self {
        Self { s1: 2.0 * e.re_c, s2: 2.0 * e.im_c, s3: e.a - e.b }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.s1, self.s2, self.s3]
    }
}

/// Stokes parameters of a one-qubit state.
pub fn stokes_1q(rho: &DensityMatrix) -> Stokes1Q {
    Stokes1Q::from_elements(&Elements1Q::from_rho(rho))
}

/// Joint Stokes parameters `S[i][j] = Tr(ρ σi ⊗ σj)`, `σ0 = I`.
pub type StokesJoint = [[f64; 4]; 4];

/// Joint Stokes parameters from two-qubit elements.
pub fn stokes_2q_from_elements(e: &Elements2Q<f64>) -> StokesJoint {
    let Elements2Q { a, b, c, d, re_e, im_e, re_f, im_f, re_g, im_g, re_h, im_h, re_i, im_i, re_j, im_j } = *e;
    [
        [a + b + c + d, 2.0 * (re_e + re_j), 2.0 * (im_e + im_j), a - b + c - d],
        [2.0 * (re_f + re_i), 2.0 * (re_g + re_h), 2.0 * (im_g - im_h), 2.0 * (re_f - re_i)],
        [2.0 * (im_f + im_i), 2.0 * (im_g + im_h), 2.0 * (re_h - re_g), 2.0 * (im_f - im_i)],
        [a + b - c - d, 2.0 * (re_e - re_j), 2.0 * (im_e - im_j), a - b - c + d],
    ]
}

/// Joint Stokes parameters of a two-qubit state.
pub fn stokes_2q(rho: &DensityMatrix) -> StokesJoint {
    stokes_2q_from_elements(&Elements2Q::from_rho(rho))
}

/// Pauli matrix `σk`, `k = 0..=3` with `σ0 = I`.
pub fn pauli(k: usize) -> CMat {
    let c = Complex64::new;
    let v = match k {
        0 => [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        1 => [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        2 => [c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
        3 => [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        _ => panic!("Pauli index {k} out of range"),
    };
    CMat::from_rows(2, 2, v.to_vec()).expect("fixed shape")
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64, StateError> {
    if rho.qubits() != sigma.qubits() {
        return Err(StateError::BadShape(sigma.matrix().rows(), sigma.matrix().cols()));
    }
    let sqrt_rho = psd_sqrt(rho.matrix())?;
    let inner = &(&sqrt_rho * sigma.matrix()) * &sqrt_rho;
    // Symmetrize away rounding before the eigen-decomposition.
    let inner = (&inner + &inner.adjoint()).scale(Complex64::new(0.5, 0.0));
    let (vals, _) = eig_hermitian(&inner)?;
    let tr: f64 = vals.iter().map(|&v| v.max(0.0).sqrt()).sum();
    Ok(tr * tr)
}

fn psd_sqrt(m: &CMat) -> Result<CMat, StateError> {
    let (vals, vecs) = eig_hermitian(m)?;
    let n = vals.len();
    let d = CMat::from_fn(n, n, |i, j| if i == j { Complex64::new(vals[i].max(0.0).sqrt(), 0.0) } else { Complex64::new(0.0, 0.0) });
    Ok(&(&vecs * &d) * &vecs.adjoint())
}

/// The singlet `|Ψ⁻⟩ = (|HV⟩ - |VH⟩)/√2`.
pub fn bell_singlet() -> DensityMatrix {
    let c = Complex64::new;
    DensityMatrix::pure(&[c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]).expect("valid state")
}
