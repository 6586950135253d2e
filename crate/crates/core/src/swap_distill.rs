//! Entanglement swapping and Oxford distillation on Bell-diagonal states,
//! with the depolarizing CNOT model.
//!
//! The closed-form maps are what the chain uses. The `*_circuit` functions
//! run the same protocols on a 16-dimensional density matrix and serve as
//! brute-force cross-checks.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::qstate::{
    bell_diag_from_matrix, cnot, conjugate, embed_one, hadamard, matrix_from_bell_diag,
    noisy_gate_raw, partial_trace, pauli_x, pauli_z, project, rotation_x, BellCoeffs, CMatrix,
    DensityMatrix, GateQuality,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistillOutcome {
    pub state: BellCoeffs,
    pub p_ed: f64,
}

/// Success probability of entanglement swapping per nesting level.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SwapPolicy {
    /// Ideal detectors: swapping always succeeds.
    #[default]
    Ideal,
    Constant(f64),
    /// Explicit value per level; levels not listed succeed with certainty.
    PerLevel(BTreeMap<usize, f64>),
}

impl SwapPolicy {
    pub fn validate(&self) -> Result<()> {
        let check = |v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::OutOfRange {
                    name: "P_ES",
                    value: v,
                    min: 0.0,
                    max: 1.0,
                })
            }
        };
        match self {
            SwapPolicy::Ideal => Ok(()),
            SwapPolicy::Constant(v) => check(*v),
            SwapPolicy::PerLevel(table) => table.values().try_for_each(|v| check(*v)),
        }
    }
}

/// `P_ES` at nesting level `level` (levels start at 1).
pub fn swap_success_prob(policy: &SwapPolicy, level: usize) -> Result<f64> {
    policy.validate()?;
    Ok(match policy {
        SwapPolicy::Ideal => 1.0,
        SwapPolicy::Constant(v) => *v,
        SwapPolicy::PerLevel(table) => table.get(&level).copied().unwrap_or(1.0),
    })
}

/// Swaps two Bell-diagonal pairs with one noisy CNOT. Bilinear in the two
/// inputs; reduces to the symmetric formulas when `c1 == c2`.
pub fn swap(c1: &BellCoeffs, c2: &BellCoeffs, q: GateQuality) -> BellCoeffs {
    let p = q.value();
    let noise = (1.0 - p) / 4.0;
    let [a1, b1, c1_, d1] = c1.to_array();
    let [a2, b2, c2_, d2] = c2.to_array();
    BellCoeffs::from_map(
        noise + p * (a1 * a2 + b1 * b2 + c1_ * c2_ + d1 * d2),
        noise + p * (a1 * b2 + b1 * a2 + c1_ * d2 + d1 * c2_),
        noise + p * (a1 * c2_ + c1_ * a2 + b1 * d2 + d1 * b2),
        noise + p * (a1 * d2 + d1 * a2 + b1 * c2_ + c1_ * b2),
    )
}

/// One Oxford round on two copies of `c`.
pub fn distill(c: &BellCoeffs, q: GateQuality) -> DistillOutcome {
    let p2 = q.value() * q.value();
    let [a, b, cc, d] = c.to_array();
    let p_ed = 0.5 * (1.0 + p2 * (2.0 * a + 2.0 * d - 1.0).powi(2));
    let norm = 8.0 * p_ed;
    let skew = a - b - cc + d;
    let new_a = (1.0 + p2 * (skew * (3.0 * a + b + cc + 3.0 * d) + 4.0 * (a - d).powi(2))) / norm;
    let new_b = (1.0 - p2 * (a * a + 2.0 * a * (b + cc - 7.0 * d) + (b + cc + d).powi(2))) / norm;
    let new_c = (1.0 + p2 * (4.0 * (b - cc).powi(2) - skew * (a + 3.0 * b + 3.0 * cc + d))) / norm;
    let new_d = (1.0
        - p2 * (a * a + 2.0 * a * (b + cc + d) + b * b + 2.0 * b * (d - 7.0 * cc) + (cc + d).powi(2)))
        / norm;
    DistillOutcome {
        state: BellCoeffs::from_map(new_a, new_b, new_c, new_d),
        p_ed,
    }
}

fn pair_product(c1: &BellCoeffs, c2: &BellCoeffs) -> CMatrix {
    matrix_from_bell_diag(c1)
        .matrix()
        .kronecker(matrix_from_bell_diag(c2).matrix())
}

/// Swapping circuit on registers `a b c d` with pairs `(a, b)` and `(c, d)`:
/// noisy CNOT `b -> c`, `b` measured in the X basis and `c` in the Z basis,
/// Pauli corrections on `d`, all outcomes summed.
pub fn swap_circuit(c1: &BellCoeffs, c2: &BellCoeffs, q: GateQuality) -> Result<BellCoeffs> {
    let mut rho = noisy_gate_raw(&pair_product(c1, c2), &cnot(), (1, 2), q);
    rho = conjugate(&rho, &embed_one(&hadamard(), 1, 4));

    let mut out = CMatrix::zeros(4, 4);
    for mb in 0..2 {
        for mc in 0..2 {
            let branch = project(&project(&rho, 1, mb), 2, mc);
            let mut ad = partial_trace(&branch, &[0, 3]);
            if mc == 1 {
                ad = conjugate(&ad, &embed_one(&pauli_x(), 1, 2));
            }
            if mb == 1 {
                ad = conjugate(&ad, &embed_one(&pauli_z(), 1, 2));
            }
            out += ad;
        }
    }
    bell_diag_from_matrix(&DensityMatrix::new(out)?)
}

/// Oxford round on registers `A1 B1 A2 B2`: `Rx(+pi/2)` at node A and
/// `Rx(-pi/2)` at node B, noisy CNOTs `A1 -> A2` and `B1 -> B2`, success when
/// the Z outcomes on `A2` and `B2` agree.
pub fn distill_circuit(c: &BellCoeffs, q: GateQuality) -> Result<DistillOutcome> {
    let mut rho = pair_product(c, c);
    for (qubit, angle) in [(0, FRAC_PI_2), (2, FRAC_PI_2), (1, -FRAC_PI_2), (3, -FRAC_PI_2)] {
        rho = conjugate(&rho, &embed_one(&rotation_x(angle), qubit, 4));
    }
    rho = noisy_gate_raw(&rho, &cnot(), (0, 2), q);
    rho = noisy_gate_raw(&rho, &cnot(), (1, 3), q);

    let mut kept = CMatrix::zeros(4, 4);
    for outcome in 0..2 {
        kept += partial_trace(&project(&project(&rho, 2, outcome), 3, outcome), &[0, 1]);
    }
    let p_ed = kept.trace().re;
    let state = bell_diag_from_matrix(&DensityMatrix::new(kept.unscale(p_ed))?)?;
    Ok(DistillOutcome { state, p_ed })
}
