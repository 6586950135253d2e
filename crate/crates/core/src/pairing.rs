//! Elementary-link statistics of the asynchronous post-matching protocol.
//!
//! `m` memories per node each attempt one single-photon interference (SPI)
//! event. Successful events are paired in time order, and each pair is turned
//! into a Bell pair by a local CNOT plus a Z measurement at both nodes, which
//! succeeds with probability `p_m`.

use nalgebra::Complex;
use statrs::distribution::{Binomial, Discrete};

use crate::error::{check_prob, Error, Result};
use crate::qstate::{
    bell_diag_from_matrix, cnot, embed_one, noisy_gate_raw, partial_trace, pauli_x, project,
    BellCoeffs, CMatrix, DensityMatrix, GateQuality, C64,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpiModel {
    /// Emission factor `p`.
    AtomicEnsemble,
    /// Emission factor `2p(1-p)`.
    TrappedIon,
}

impl SpiModel {
    pub fn emission_factor(self, p: f64) -> f64 {
        match self {
            SpiModel::AtomicEnsemble => p,
            SpiModel::TrappedIon => 2.0 * p * (1.0 - p),
        }
    }
}

/// Physical parameters of one elementary link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPhysics {
    /// Emission probability, `0 < p < 1` (`p = 1` is accepted as a lossless limit).
    pub emission_p: f64,
    pub eta_d: f64,
    /// Attenuation length in km.
    pub att_length_km: f64,
    /// Elementary link length `L0` in km.
    pub link_length_km: f64,
    /// Signal speed in fiber, km/s.
    pub speed_km_s: f64,
    pub spi_model: SpiModel,
}

impl LinkPhysics {
    pub fn new(
        emission_p: f64,
        eta_d: f64,
        att_length_km: f64,
        link_length_km: f64,
        speed_km_s: f64,
        spi_model: SpiModel,
    ) -> Result<Self> {
        let phys = Self {
            emission_p,
            eta_d,
            att_length_km,
            link_length_km,
            speed_km_s,
            spi_model,
        };
        phys.validate()?;
        Ok(phys)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.emission_p > 0.0 && self.emission_p <= 1.0) {
            return Err(Error::OutOfRange {
                name: "p",
                value: self.emission_p,
                min: 0.0,
                max: 1.0,
            });
        }
        check_prob("eta_d", self.eta_d)?;
        positive("L_att", self.att_length_km)?;
        positive("c", self.speed_km_s)?;
        if !(self.link_length_km >= 0.0 && self.link_length_km.is_finite()) {
            return Err(Error::OutOfRange {
                name: "L0",
                value: self.link_length_km,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        Ok(())
    }

    pub fn with_link_length(self, link_length_km: f64) -> Self {
        Self {
            link_length_km,
            ..self
        }
    }

    /// `T0 = L0 / c` in seconds.
    pub fn t0_seconds(&self) -> f64 {
        self.link_length_km / self.speed_km_s
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            min: 0.0,
            max: f64::INFINITY,
        })
    }
}

/// Summary of the pairing statistics for one memory count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingStats {
    pub m: u64,
    pub p_s: f64,
    pub p_m: f64,
    pub n_bar: f64,
    pub p_0: f64,
}

impl PairingStats {
    pub fn compute(m: u64, p_s: f64, q: GateQuality) -> Result<Self> {
        check_prob("p_S", p_s)?;
        if m == 0 {
            return Err(Error::Config("memory count must be positive".into()));
        }
        Ok(Self {
            m,
            p_s,
            p_m: postmatch_success_prob(q),
            n_bar: mean_bell_pairs(m, p_s, q)?,
            p_0: asymptotic_pair_rate(p_s, q)?,
        })
    }
}

/// SPI success probability. Each photon travels `L0/2` to the midpoint, so the
/// channel factor is `exp(-L0 / (2 L_att))`.
pub fn spi_success_prob(phys: &LinkPhysics) -> f64 {
    phys.spi_model.emission_factor(phys.emission_p)
        * phys.eta_d
        * (-phys.link_length_km / (2.0 * phys.att_length_km)).exp()
}

pub fn postmatch_success_prob(q: GateQuality) -> f64 {
    0.25 + q.value() / 4.0
}

pub(crate) fn binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    Binomial::new(p, n)
        .expect("p checked to lie in (0, 1)")
        .pmf(k)
}

/// Probability of forming `l` pairs out of `m` SPI attempts.
pub fn pair_count_dist(l: u64, m: u64, p_s: f64) -> Result<f64> {
    check_prob("p_S", p_s)?;
    let max = m / 2;
    if l > max {
        return Err(Error::IndexOutOfRange {
            name: "l",
            value: l as usize,
            max: max as usize,
        });
    }
    // For even m the top count has no 2l+1 term.
    Ok(binomial_pmf(2 * l, m, p_s) + binomial_pmf(2 * l + 1, m, p_s))
}

/// Probability of ending with `n` Bell pairs from `m` attempts.
pub fn bell_count_dist(n: u64, m: u64, p_s: f64, q: GateQuality) -> Result<f64> {
    let max = m / 2;
    if n > max {
        return Err(Error::IndexOutOfRange {
            name: "n",
            value: n as usize,
            max: max as usize,
        });
    }
    let p_m = postmatch_success_prob(q);
    (n..=max).try_fold(0.0, |acc, l| {
        Ok(acc + binomial_pmf(n, l, p_m) * pair_count_dist(l, m, p_s)?)
    })
}

/// Mean number of Bell pairs, `sum_n n P(n|m)`, evaluated as
/// `p_m * sum_l l f(l|m)`.
pub fn mean_bell_pairs(m: u64, p_s: f64, q: GateQuality) -> Result<f64> {
    check_prob("p_S", p_s)?;
    let p_m = postmatch_success_prob(q);
    let mean_pairs = (1..=m / 2).try_fold(0.0, |acc, l| {
        Ok::<_, Error>(acc + l as f64 * pair_count_dist(l, m, p_s)?)
    })?;
    Ok(p_m * mean_pairs)
}

/// Closed form of the mean Bell-pair count, valid for odd `m` only.
pub fn mean_bell_pairs_odd_closed_form(m: u64, p_s: f64, q: GateQuality) -> Result<f64> {
    check_prob("p_S", p_s)?;
    if m % 2 == 0 {
        return Err(Error::Config(format!("closed form needs odd m, got {m}")));
    }
    let p_m = postmatch_success_prob(q);
    let odd_tail: f64 = (1..=(m - 1) / 2)
        .map(|l| binomial_pmf(2 * l + 1, m, p_s))
        .sum();
    let head = p_s - p_s * (1.0 - p_s).powi((m - 1) as i32);
    Ok(0.5 * m as f64 * p_m * head - 0.5 * p_m * odd_tail)
}

/// Large-`m` Bell pairs per memory, `p_m p_S / 2`.
pub fn asymptotic_pair_rate(p_s: f64, q: GateQuality) -> Result<f64> {
    check_prob("p_S", p_s)?;
    Ok(0.5 * postmatch_success_prob(q) * p_s)
}

/// Two-qubit state kept at memory `j` after a successful post-matching,
/// together with the success probability.
///
/// Register order is `A_j, B_j, A_k, B_k`. Both SPI events herald
/// `(|eg> + e^{i phi} |ge>)/sqrt 2`. Node A's CNOT carries the depolarizing
/// noise and node B's is ideal. Success is both memory-`k` qubits found in
/// `|e>`; node A then applies `sigma_x` to turn `psi+` into `phi+`.
pub fn postmatched_state(q: GateQuality, phi: f64) -> (f64, DensityMatrix) {
    let phase = Complex::from_polar(1.0, phi);
    let zero = Complex::new(0.0, 0.0);
    // (|eg> + e^{i phi}|ge>) on a two-qubit register: |10> and |01>
    let link: [C64; 4] = [zero, phase, Complex::new(1.0, 0.0), zero];
    let joint: Vec<C64> = (0..16)
        .map(|idx| {
            let (j_bits, k_bits) = (idx >> 2, idx & 3);
            // register is A_j B_j A_k B_k; regroup into (A_j B_j)(A_k B_k)
            link[j_bits] * link[k_bits] * 0.5
        })
        .collect();
    let psi = nalgebra::DVector::from_vec(joint);
    let mut rho: CMatrix = &psi * psi.adjoint();

    rho = noisy_gate_raw(&rho, &cnot(), (0, 2), q);
    rho = noisy_gate_raw(&rho, &cnot(), (1, 3), GateQuality::PERFECT);
    rho = project(&project(&rho, 2, 1), 3, 1);
    let prob = rho.trace().re;

    let mut kept = partial_trace(&rho, &[0, 1]).unscale(prob);
    let x_a = embed_one(&pauli_x(), 0, 2);
    kept = &x_a * kept * x_a.adjoint();
    (prob, DensityMatrix::from_trusted(kept))
}

/// Brute-force post-matching oracle: success probability and Bell-diagonal
/// output computed from the full 16-dimensional density matrix.
pub fn pairing_oracle(q: GateQuality, phi: f64) -> (f64, BellCoeffs) {
    let (prob, rho) = postmatched_state(q, phi);
    let coeffs = bell_diag_from_matrix(&rho).expect("post-matched state is Bell diagonal");
    (prob, coeffs)
}
