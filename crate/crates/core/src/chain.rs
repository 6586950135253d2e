//! Nested repeater chain: state evolution through the swap/distill schedule,
//! waiting-time recurrences and the resulting repeater rate.
//!
//! Waiting times are in units of `T0 = L0 / c`. Level `i` runs `k_i` Oxford
//! rounds; level `i > 0` starts with one swap of two level-`(i-1)` pairs.

use crate::error::{Error, Result};
use crate::pairing::{
    asymptotic_pair_rate, mean_bell_pairs, spi_success_prob, LinkPhysics,
};
use crate::qstate::{elementary_state, fidelity, BellCoeffs, GateQuality};
use crate::swap_distill::{distill, swap, swap_success_prob, SwapPolicy};

/// Expected time to get two independent pairs, relative to one pair.
pub const PAIR_WAIT_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub n_levels: usize,
    /// Distillation rounds per level, `k_0..=k_N`.
    pub k_vec: Vec<u32>,
    pub q: GateQuality,
    pub swap_policy: SwapPolicy,
}

impl ChainConfig {
    pub fn new(n_levels: usize, k_vec: Vec<u32>, q: GateQuality, swap_policy: SwapPolicy) -> Result<Self> {
        let cfg = Self {
            n_levels,
            k_vec,
            q,
            swap_policy,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `k = (k, 0, ..., 0)`: distillation only before the first swap.
    pub fn first_level_distillation(n_levels: usize, k: u32, q: GateQuality) -> Self {
        let mut k_vec = vec![0; n_levels + 1];
        k_vec[0] = k;
        Self {
            n_levels,
            k_vec,
            q,
            swap_policy: SwapPolicy::Ideal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_vec.len() != self.n_levels + 1 {
            return Err(Error::KVectorLength {
                expected: self.n_levels + 1,
                found: self.k_vec.len(),
            });
        }
        self.swap_policy.validate()
    }

    pub fn link_count(&self) -> u64 {
        1 << self.n_levels
    }
}

/// What happened at one nesting level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    /// State entering the level's distillation rounds: the elementary pair at
    /// level 0, the swapped pair otherwise.
    pub entry_state: BellCoeffs,
    /// `P_ED` of rounds `1..=k_level`, each from the state entering that round.
    pub p_ed: Vec<f64>,
    pub exit_state: BellCoeffs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub final_state: BellCoeffs,
    pub levels: Vec<LevelRecord>,
}

impl Evolution {
    pub fn ped_table(&self) -> Vec<Vec<f64>> {
        self.levels.iter().map(|l| l.p_ed.clone()).collect()
    }
}

pub fn evolve_states(cfg: &ChainConfig) -> Result<Evolution> {
    evolve_states_from(cfg, elementary_state(cfg.q))
}

/// Runs the schedule from an arbitrary elementary pair.
pub fn evolve_states_from(cfg: &ChainConfig, elementary: BellCoeffs) -> Result<Evolution> {
    cfg.validate()?;
    let mut levels = Vec::with_capacity(cfg.n_levels + 1);
    let mut state = elementary;
    for (level, &rounds) in cfg.k_vec.iter().enumerate() {
        if level > 0 {
            state = swap(&state, &state, cfg.q);
        }
        let entry_state = state;
        let mut p_ed = Vec::with_capacity(rounds as usize);
        for _ in 0..rounds {
            let out = distill(&state, cfg.q);
            p_ed.push(out.p_ed);
            state = out.state;
        }
        levels.push(LevelRecord {
            level,
            entry_state,
            p_ed,
            exit_state: state,
        });
    }
    Ok(Evolution {
        final_state: state,
        levels,
    })
}

fn check_p0(p0: f64) -> Result<()> {
    if p0 == 0.0 {
        return Err(Error::ZeroSuccessProbability);
    }
    if !(p0 > 0.0 && p0 <= 1.0) {
        return Err(Error::OutOfRange {
            name: "p_0",
            value: p0,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(())
}

fn check_table(cfg: &ChainConfig, ped_table: &[Vec<f64>]) -> Result<()> {
    cfg.validate()?;
    if ped_table.len() != cfg.n_levels + 1 {
        return Err(Error::InconsistentTable(format!(
            "{} levels, expected {}",
            ped_table.len(),
            cfg.n_levels + 1
        )));
    }
    for (level, (row, &k)) in ped_table.iter().zip(&cfg.k_vec).enumerate() {
        if row.len() != k as usize {
            return Err(Error::InconsistentTable(format!(
                "level {level} has {} rounds, expected {k}",
                row.len()
            )));
        }
        if let Some(bad) = row.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::InconsistentTable(format!(
                "level {level} has P_ED = {bad}"
            )));
        }
    }
    Ok(())
}

fn comm_time(level: usize) -> f64 {
    (1u64 << level) as f64
}

/// Mean waiting time in units of `T0`, by iterating the per-round and
/// per-swap recurrences.
pub fn tau_recursive(cfg: &ChainConfig, p0: f64, ped_table: &[Vec<f64>]) -> Result<f64> {
    check_p0(p0)?;
    check_table(cfg, ped_table)?;
    let mut tau = 1.0 / p0;
    for (level, row) in ped_table.iter().enumerate() {
        if level > 0 {
            let p_es = swap_success_prob(&cfg.swap_policy, level)?;
            tau = (PAIR_WAIT_FACTOR * tau + comm_time(level - 1)) / p_es;
        }
        for &p_ed in row {
            tau = (PAIR_WAIT_FACTOR * tau + comm_time(level)) / p_ed;
        }
    }
    Ok(tau)
}

/// Coefficients of `tau(k_N, N) = alpha * tau(0, N) + beta` for one level.
/// `ped_level[r - 1]` is the success probability of round `r`.
pub fn alpha_beta(ped_level: &[f64], k: usize, level: usize) -> Result<(f64, f64)> {
    if ped_level.len() != k {
        return Err(Error::InconsistentTable(format!(
            "{} P_ED values for {k} rounds",
            ped_level.len()
        )));
    }
    if let Some(bad) = ped_level.iter().find(|p| !(**p > 0.0)) {
        return Err(Error::InconsistentTable(format!("P_ED = {bad}")));
    }
    // inverse P_ED of round k - j
    let inv = |j: usize| 1.0 / ped_level[k - j - 1];
    let alpha = PAIR_WAIT_FACTOR.powi(k as i32) * (0..k).map(inv).product::<f64>();
    let beta = comm_time(level)
        * (0..k)
            .map(|i| PAIR_WAIT_FACTOR.powi(i as i32) * (0..=i).map(inv).product::<f64>())
            .sum::<f64>();
    Ok((alpha, beta))
}

/// Mean waiting time from the solved recurrence.
pub fn tau_closed_form(cfg: &ChainConfig, p0: f64, ped_table: &[Vec<f64>]) -> Result<f64> {
    check_p0(p0)?;
    check_table(cfg, ped_table)?;
    let n = cfg.n_levels;
    let mut alpha = Vec::with_capacity(n + 1);
    let mut beta = Vec::with_capacity(n + 1);
    for (level, row) in ped_table.iter().enumerate() {
        let (a, b) = alpha_beta(row, row.len(), level)?;
        alpha.push(a);
        beta.push(b);
    }
    // g[i] = alpha(i) / P_ES(i) for i >= 1
    let mut g = vec![1.0; n + 1];
    for level in 1..=n {
        g[level] = alpha[level] / swap_success_prob(&cfg.swap_policy, level)?;
    }
    // prod_{j=0}^{upto} g[n - j]
    let tail = |upto: Option<usize>| -> f64 {
        upto.map_or(1.0, |u| (0..=u).map(|j| g[n - j]).product())
    };

    let tau_base = alpha[0] / p0 + beta[0];
    let mut tau = tau_base * PAIR_WAIT_FACTOR.powi(n as i32) * tail(n.checked_sub(1));
    for i in 1..=n {
        let w = PAIR_WAIT_FACTOR.powi((n - i) as i32);
        tau += w * comm_time(i - 1) * tail(Some(n - i));
        tau += w * beta[i] * tail((n - i).checked_sub(1));
    }
    Ok(tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PairingMode {
    /// Large-memory limit `p_0 = p_m p_S / 2`.
    #[default]
    Asymptotic,
    /// `p_0 = n_bar / m` for a finite memory count.
    FiniteMemories(u64),
}

/// How the elementary success probability `p_0` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElementaryModel {
    pub mode: PairingMode,
    /// Replaces the SPI success probability computed from the link physics.
    pub p_s_override: Option<f64>,
}

impl ElementaryModel {
    pub fn p_s(&self, phys: &LinkPhysics) -> Result<f64> {
        match self.p_s_override {
            Some(p) => crate::error::check_prob("p_S", p),
            None => Ok(spi_success_prob(phys)),
        }
    }

    /// Bell pairs per memory per attempt of the post-matching protocol.
    pub fn p0(&self, phys: &LinkPhysics, q: GateQuality) -> Result<f64> {
        let p_s = self.p_s(phys)?;
        match self.mode {
            PairingMode::Asymptotic => asymptotic_pair_rate(p_s, q),
            PairingMode::FiniteMemories(0) => {
                Err(Error::Config("memory count must be positive".into()))
            }
            PairingMode::FiniteMemories(m) => Ok(mean_bell_pairs(m, p_s, q)? / m as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    pub p0: f64,
    /// Mean waiting time in units of `T0`.
    pub tau_t0: f64,
    /// End-to-end pairs per second, `1 / (T0 tau)`.
    pub rate_hz: f64,
    pub final_state: BellCoeffs,
    pub per_level: Vec<LevelRecord>,
}

impl RateResult {
    pub fn fidelity(&self) -> f64 {
        fidelity(&self.final_state)
    }
}

pub(crate) fn check_distance(total_l_km: f64) -> Result<()> {
    if total_l_km >= 0.0 && total_l_km.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "L",
            value: total_l_km,
            min: 0.0,
            max: f64::INFINITY,
        })
    }
}

/// Assembles a rate from an evolved chain and its elementary probability.
/// A zero-length chain has `T0 = 0` and reports an infinite rate.
pub(crate) fn rate_from_parts(
    cfg: &ChainConfig,
    phys: &LinkPhysics,
    p0: f64,
    evolution: Evolution,
) -> Result<RateResult> {
    let tau_t0 = tau_recursive(cfg, p0, &evolution.ped_table())?;
    let t0 = phys.t0_seconds();
    let rate_hz = if t0 == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (t0 * tau_t0)
    };
    Ok(RateResult {
        p0,
        tau_t0,
        rate_hz,
        final_state: evolution.final_state,
        per_level: evolution.levels,
    })
}

pub fn repeater_rate(cfg: &ChainConfig, phys: &LinkPhysics, total_l_km: f64) -> Result<RateResult> {
    repeater_rate_with(cfg, phys, total_l_km, &ElementaryModel::default())
}

/// Rate of the post-matching repeater over `total_l_km`, split into
/// `2^N` links of length `L0 = L / 2^N`.
pub fn repeater_rate_with(
    cfg: &ChainConfig,
    phys: &LinkPhysics,
    total_l_km: f64,
    model: &ElementaryModel,
) -> Result<RateResult> {
    check_distance(total_l_km)?;
    let phys = phys.with_link_length(total_l_km / cfg.link_count() as f64);
    phys.validate()?;
    let p0 = model.p0(&phys, cfg.q)?;
    let evolution = evolve_states(cfg)?;
    rate_from_parts(cfg, &phys, p0, evolution)
}
