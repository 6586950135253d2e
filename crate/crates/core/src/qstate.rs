//! Bell-diagonal state algebra, small dense density matrices and the
//! depolarizing two-qubit gate.
//!
//! Qubit 0 is the most significant bit of a computational basis index, so a
//! two-qubit basis is ordered `|00>, |01>, |10>, |11>` with `|g> = |0>` and
//! `|e> = |1>`. The Bell basis is ordered `phi+, phi-, psi+, psi-`.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Complex, DMatrix, DVector, Matrix2, Matrix4};

use crate::error::{check_prob, Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type Gate1 = Matrix2<C64>;
pub type Gate2 = Matrix4<C64>;

/// Tolerance for algebraic identities (normalization, hermiticity, trace).
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Tolerance for positivity and Bell-diagonality checks.
pub const EIGEN_TOL: f64 = 1e-10;

pub const MAX_QUBITS: usize = 4;

const fn c(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

/// Weights of `|phi+>, |phi->, |psi+>, |psi->` in a Bell-diagonal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellCoeffs {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl BellCoeffs {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let v = [a, b, c, d];
        let in_range = v
            .iter()
            .all(|x| x.is_finite() && *x >= -ALGEBRA_TOL && *x <= 1.0 + ALGEBRA_TOL);
        if !in_range || (v.iter().sum::<f64>() - 1.0).abs() > ALGEBRA_TOL {
            return Err(Error::InvalidBellCoeffs(v));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn from_array(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }

    /// Coefficients produced by the closed-form maps, which preserve
    /// normalization exactly in exact arithmetic.
    pub(crate) fn from_map(a: f64, b: f64, c: f64, d: f64) -> Self {
        debug_assert!(
            Self::new(a, b, c, d).is_ok(),
            "map produced invalid coefficients {:?}",
            [a, b, c, d]
        );
        Self { a, b, c, d }
    }

    /// `|phi+><phi+|`.
    pub fn perfect() -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 0.0,
        }
    }

    pub fn maximally_mixed() -> Self {
        Self {
            a: 0.25,
            b: 0.25,
            c: 0.25,
            d: 0.25,
        }
    }

    /// Werner state with fidelity `f` to `|phi+>`.
    pub fn werner(f: f64) -> Result<Self> {
        let rest = (1.0 - f) / 3.0;
        Self::new(f, rest, rest, rest)
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &BellCoeffs) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

/// Weight of the ideal gate in the depolarizing gate model.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct GateQuality(f64);

impl GateQuality {
    pub const PERFECT: GateQuality = GateQuality(1.0);

    pub fn new(p_gate: f64) -> Result<Self> {
        check_prob("p_G", p_gate).map(GateQuality)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Validated density matrix on at most four qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let n_qubits = qubit_count(&m)?;
        let rho = Self { n_qubits, m };
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps a matrix whose validity follows from how it was built.
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        let n_qubits = qubit_count(&m).expect("trusted matrix has a qubit dimension");
        Self { n_qubits, m }
    }

    pub fn from_pure(amplitudes: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(amplitudes);
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidDensityMatrix("zero state vector".into()));
        }
        let v = v.unscale(norm);
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::InvalidDensityMatrix(format!(
                "{n_qubits} qubits not supported"
            )));
        }
        let dim = 1 << n_qubits;
        Ok(Self {
            n_qubits,
            m: CMatrix::identity(dim, dim).unscale(dim as f64),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.m
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        if self.n_qubits + other.n_qubits > MAX_QUBITS {
            return Err(Error::InvalidDensityMatrix(format!(
                "tensor product would have {} qubits",
                self.n_qubits + other.n_qubits
            )));
        }
        Ok(Self {
            n_qubits: self.n_qubits + other.n_qubits,
            m: self.m.kronecker(&other.m),
        })
    }

    /// Largest entrywise distance to another matrix of the same size.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        max_abs_diff(&self.m, &other.m)
    }

    fn validate(&self) -> Result<()> {
        let herm = max_abs_diff(&self.m, &self.m.adjoint());
        if herm > ALGEBRA_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = self.m.trace();
        if (tr.re - 1.0).abs() > ALGEBRA_TOL || tr.im.abs() > ALGEBRA_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -EIGEN_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(())
    }
}

fn qubit_count(m: &CMatrix) -> Result<usize> {
    let dim = m.nrows();
    if m.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: m.ncols(),
        });
    }
    if !dim.is_power_of_two() || !(2..=1 << MAX_QUBITS).contains(&dim) {
        return Err(Error::InvalidDensityMatrix(format!(
            "dimension {dim} is not 2^n with 1 <= n <= {MAX_QUBITS}"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

pub fn max_abs_diff(x: &CMatrix, y: &CMatrix) -> f64 {
    x.iter()
        .zip(y.iter())
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max)
}

// ---- gates ----------------------------------------------------------------

pub fn pauli_x() -> Gate1 {
    Matrix2::new(c(0.0), c(1.0), c(1.0), c(0.0))
}

pub fn pauli_z() -> Gate1 {
    Matrix2::new(c(1.0), c(0.0), c(0.0), c(-1.0))
}

pub fn hadamard() -> Gate1 {
    Matrix2::new(c(1.0), c(1.0), c(1.0), c(-1.0)).scale(FRAC_1_SQRT_2)
}

/// `exp(-i theta X / 2)`.
pub fn rotation_x(theta: f64) -> Gate1 {
    let (s, co) = (theta / 2.0).sin_cos();
    let off = Complex::new(0.0, -s);
    Matrix2::new(c(co), off, off, c(co))
}

/// CNOT with the first qubit of the pair as control.
pub fn cnot() -> Gate2 {
    let mut g = Gate2::zeros();
    g[(0, 0)] = c(1.0);
    g[(1, 1)] = c(1.0);
    g[(2, 3)] = c(1.0);
    g[(3, 2)] = c(1.0);
    g
}

// ---- raw matrix operations --------------------------------------------------
//
// These act on unnormalized operators as well, which the circuit oracles need
// when summing measurement branches.

fn bit(index: usize, qubit: usize, n: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}

fn mask(qubit: usize, n: usize) -> usize {
    1 << (n - 1 - qubit)
}

fn n_of(m: &CMatrix) -> usize {
    m.nrows().trailing_zeros() as usize
}

fn check_targets(targets: (usize, usize), n: usize) -> Result<()> {
    let (i, j) = targets;
    if i == j || i >= n || j >= n {
        return Err(Error::InvalidTargets(i, j, n));
    }
    Ok(())
}

/// Lifts a one-qubit gate to the full register.
pub fn embed_one(gate: &Gate1, qubit: usize, n: usize) -> CMatrix {
    let dim = 1 << n;
    let keep = !mask(qubit, n);
    CMatrix::from_fn(dim, dim, |r, col| {
        if r & keep == col & keep {
            gate[(bit(r, qubit, n), bit(col, qubit, n))]
        } else {
            c(0.0)
        }
    })
}

/// Lifts a two-qubit gate to the full register; `targets.0` is the gate's
/// first (most significant) qubit.
pub fn embed_two(gate: &Gate2, targets: (usize, usize), n: usize) -> CMatrix {
    let (i, j) = targets;
    let dim = 1 << n;
    let keep = !(mask(i, n) | mask(j, n));
    CMatrix::from_fn(dim, dim, |r, col| {
        if r & keep == col & keep {
            let rr = 2 * bit(r, i, n) + bit(r, j, n);
            let cc = 2 * bit(col, i, n) + bit(col, j, n);
            gate[(rr, cc)]
        } else {
            c(0.0)
        }
    })
}

pub fn conjugate(m: &CMatrix, u: &CMatrix) -> CMatrix {
    u * m * u.adjoint()
}

/// Replaces the reduced state of `targets` with `I/4`, keeping the marginal
/// of every other qubit.
pub fn depolarize_pair(m: &CMatrix, targets: (usize, usize)) -> CMatrix {
    let n = n_of(m);
    let (i, j) = targets;
    let (mi, mj) = (mask(i, n), mask(j, n));
    let dim = m.nrows();
    CMatrix::from_fn(dim, dim, |r, col| {
        if (r & (mi | mj)) != (col & (mi | mj)) {
            return c(0.0);
        }
        let (r0, c0) = (r & !(mi | mj), col & !(mi | mj));
        let mut s = c(0.0);
        for sub in [0, mj, mi, mi | mj] {
            s += m[(r0 | sub, c0 | sub)];
        }
        s * 0.25
    })
}

/// Projector `|outcome><outcome|` on one qubit, applied on both sides.
/// The result is unnormalized; its trace is the outcome probability.
pub fn project(m: &CMatrix, qubit: usize, outcome: usize) -> CMatrix {
    let n = n_of(m);
    let dim = m.nrows();
    CMatrix::from_fn(dim, dim, |r, col| {
        if bit(r, qubit, n) == outcome && bit(col, qubit, n) == outcome {
            m[(r, col)]
        } else {
            c(0.0)
        }
    })
}

/// Traces out every qubit not listed in `keep`; kept qubits stay in the
/// listed order.
pub fn partial_trace(m: &CMatrix, keep: &[usize]) -> CMatrix {
    let n = n_of(m);
    let k = keep.len();
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let compose = |kept_bits: usize, traced_bits: usize| -> usize {
        let mut idx = 0;
        for (pos, &q) in keep.iter().enumerate() {
            if (kept_bits >> (k - 1 - pos)) & 1 == 1 {
                idx |= mask(q, n);
            }
        }
        for (pos, &q) in traced.iter().enumerate() {
            if (traced_bits >> (traced.len() - 1 - pos)) & 1 == 1 {
                idx |= mask(q, n);
            }
        }
        idx
    };
    let dim = 1 << k;
    CMatrix::from_fn(dim, dim, |r, col| {
        (0..1usize << traced.len())
            .map(|t| m[(compose(r, t), compose(col, t))])
            .sum()
    })
}

/// `p_G * U rho U^dag + (1 - p_G) * (I/4 on the targets) (x) rho_rest`.
pub fn apply_depolarizing_two_qubit_gate(
    rho: &DensityMatrix,
    ideal_gate: &Gate2,
    targets: (usize, usize),
    q: GateQuality,
) -> Result<DensityMatrix> {
    check_targets(targets, rho.n_qubits)?;
    Ok(DensityMatrix::from_trusted(noisy_gate_raw(
        &rho.m, ideal_gate, targets, q,
    )))
}

pub(crate) fn noisy_gate_raw(
    m: &CMatrix,
    ideal_gate: &Gate2,
    targets: (usize, usize),
    q: GateQuality,
) -> CMatrix {
    let n = n_of(m);
    let u = embed_two(ideal_gate, targets, n);
    let p = q.value();
    conjugate(m, &u) * c(p) + depolarize_pair(m, targets) * c(1.0 - p)
}

// ---- Bell basis -------------------------------------------------------------

/// Bell vectors in the order `phi+, phi-, psi+, psi-`.
pub fn bell_vectors() -> [DVector<C64>; 4] {
    let s = FRAC_1_SQRT_2;
    let v = |x: [f64; 4]| DVector::from_iterator(4, x.iter().map(|&e| c(e * s)));
    [
        v([1.0, 0.0, 0.0, 1.0]),
        v([1.0, 0.0, 0.0, -1.0]),
        v([0.0, 1.0, 1.0, 0.0]),
        v([0.0, 1.0, -1.0, 0.0]),
    ]
}

/// Reads a two-qubit Bell-diagonal state off its Bell-basis diagonal.
pub fn bell_diag_from_matrix(rho: &DensityMatrix) -> Result<BellCoeffs> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    let basis = bell_vectors();
    let mut diag = [0.0; 4];
    let mut worst: f64 = 0.0;
    for (k, bk) in basis.iter().enumerate() {
        let row = bk.adjoint() * &rho.m;
        for (l, bl) in basis.iter().enumerate() {
            let entry = (&row * bl)[(0, 0)];
            if k == l {
                diag[k] = entry.re;
            } else {
                worst = worst.max(entry.norm());
            }
        }
    }
    if worst > EIGEN_TOL {
        return Err(Error::NotBellDiagonal(worst));
    }
    BellCoeffs::from_array(diag)
}

pub fn matrix_from_bell_diag(coeffs: &BellCoeffs) -> DensityMatrix {
    let m = bell_vectors()
        .iter()
        .zip(coeffs.to_array())
        .fold(CMatrix::zeros(4, 4), |acc, (v, w)| acc + v * v.adjoint() * c(w));
    DensityMatrix::from_trusted(m)
}

/// Bell-diagonal form of the pair produced by one successful post-matching.
pub fn elementary_state(q: GateQuality) -> BellCoeffs {
    let p = q.value();
    let denom = 4.0 * (1.0 + p);
    let rest = (1.0 - p) / denom;
    BellCoeffs::from_map((1.0 + 7.0 * p) / denom, rest, rest, rest)
}

/// Overlap with `|phi+>`.
pub fn fidelity(coeffs: &BellCoeffs) -> f64 {
    coeffs.a
}
