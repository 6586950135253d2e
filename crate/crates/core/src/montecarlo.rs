//! Event-level Monte Carlo for the elementary pairing and the chain waiting
//! time, measured in whole `T0` slots.
//!
//! Trial `i` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to stream
//! `i`, so every trial is reproducible on its own and the estimate does not
//! depend on how trials are scheduled. Per-trial results are integers and are
//! reduced with exact integer sums.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;

use crate::chain::ChainConfig;
use crate::error::{check_prob, Error, Result};
use crate::pairing::postmatch_success_prob;
use crate::qstate::GateQuality;
use crate::swap_distill::swap_success_prob;

/// Identifies the random source in output metadata.
pub const GENERATOR: &str = "ChaCha8Rng seed_from_u64(seed), stream = trial index";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
    pub seed: u64,
}

impl McEstimate {
    fn from_samples(samples: &[u64], seed: u64) -> Self {
        let n = samples.len() as u64;
        let sum: u128 = samples.iter().map(|&x| x as u128).sum();
        let sum_sq: u128 = samples.iter().map(|&x| (x as u128) * (x as u128)).sum();
        let mean = sum as f64 / n as f64;
        let std_error = if n > 1 {
            let centered = sum_sq as f64 - (sum as f64) * (sum as f64) / n as f64;
            (centered.max(0.0) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            trials: n,
            seed,
        }
    }

    /// Distance to `value` in standard errors.
    pub fn z_score(&self, value: f64) -> f64 {
        if self.std_error == 0.0 {
            if self.mean == value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - value).abs() / self.std_error
        }
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn run_trials<F>(trials: u64, seed: u64, trial: F) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> u64 + Sync,
{
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    let samples: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|i| trial(&mut trial_rng(seed, i)))
        .collect();
    Ok(McEstimate::from_samples(&samples, seed))
}

/// Bell pairs from `m` SPI attempts: successes paired in time order, then
/// one post-matching coin per pair.
pub fn simulate_elementary_pairing(
    m: u64,
    p_s: f64,
    q: GateQuality,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_prob("p_S", p_s)?;
    if m == 0 {
        return Err(Error::Config("memory count must be positive".into()));
    }
    let p_m = postmatch_success_prob(q);
    run_trials(trials, seed, |rng| {
        let mut pending = false;
        let mut bell_pairs = 0;
        for _ in 0..m {
            if rng.gen_bool(p_s) {
                if pending {
                    pending = false;
                    if rng.gen_bool(p_m) {
                        bell_pairs += 1;
                    }
                } else {
                    pending = true;
                }
            }
        }
        bell_pairs
    })
}

struct ChainSampler<'a> {
    k_vec: &'a [u32],
    ped_table: &'a [Vec<f64>],
    p_es: Vec<f64>,
    link: Geometric,
}

impl ChainSampler<'_> {
    /// Slots until the pair after `round` distillation rounds at `level` exists.
    fn sample(&self, level: usize, round: usize, rng: &mut ChaCha8Rng) -> u64 {
        if level == 0 && round == 0 {
            return self.link.sample(rng) + 1;
        }
        let (child_level, child_round, comm, success) = if round > 0 {
            (level, round - 1, 1u64 << level, self.ped_table[level][round - 1])
        } else {
            let below = level - 1;
            (below, self.k_vec[below] as usize, 1u64 << below, self.p_es[level])
        };
        let mut elapsed = 0;
        loop {
            let left = self.sample(child_level, child_round, rng);
            let right = self.sample(child_level, child_round, rng);
            elapsed += left.max(right) + comm;
            if rng.gen_bool(success) {
                return elapsed;
            }
        }
    }
}

/// Waiting time of the full chain. Each stage waits for both of its inputs,
/// spends the classical-communication time, and on failure regenerates both
/// inputs from scratch.
pub fn simulate_chain(
    cfg: &ChainConfig,
    p0: f64,
    ped_table: &[Vec<f64>],
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    cfg.validate()?;
    if !(p0 > 0.0 && p0 <= 1.0) {
        return Err(if p0 == 0.0 {
            Error::ZeroSuccessProbability
        } else {
            Error::OutOfRange {
                name: "p_0",
                value: p0,
                min: 0.0,
                max: 1.0,
            }
        });
    }
    let table_ok = ped_table.len() == cfg.k_vec.len()
        && ped_table
            .iter()
            .zip(&cfg.k_vec)
            .all(|(row, &k)| row.len() == k as usize && row.iter().all(|p| *p > 0.0 && *p <= 1.0));
    if !table_ok {
        return Err(Error::InconsistentTable(
            "P_ED table does not match the distillation-round vector".into(),
        ));
    }
    let p_es = (0..=cfg.n_levels)
        .map(|level| swap_success_prob(&cfg.swap_policy, level))
        .collect::<Result<Vec<_>>>()?;
    let sampler = ChainSampler {
        k_vec: &cfg.k_vec,
        ped_table,
        p_es,
        link: Geometric::new(p0).expect("p0 checked to lie in (0, 1]"),
    };
    let top_round = cfg.k_vec[cfg.n_levels] as usize;
    run_trials(trials, seed, |rng| sampler.sample(cfg.n_levels, top_round, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::swap_distill::SwapPolicy;

    fn q(p: f64) -> GateQuality {
        GateQuality::new(p).unwrap()
    }

    fn cfg(k_vec: Vec<u32>) -> ChainConfig {
        ChainConfig::new(k_vec.len() - 1, k_vec, q(1.0), SwapPolicy::Ideal).unwrap()
    }

    #[test]
    fn single_memory_never_pairs() {
        let est = simulate_elementary_pairing(1, 0.9, q(1.0), 1000, 7).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn pairing_small_cases() {
        let est = simulate_elementary_pairing(2, 1.0, q(1.0), 100_000, 1).unwrap();
        assert!(est.z_score(0.5) < 3.0, "{est:?}");
        let est = simulate_elementary_pairing(3, 0.5, q(1.0), 100_000, 2).unwrap();
        assert!(est.z_score(0.25) < 3.0, "{est:?}");
    }

    #[test]
    fn seed_determinism() {
        let a = simulate_elementary_pairing(9, 0.3, q(0.9), 5000, 42).unwrap();
        let b = simulate_elementary_pairing(9, 0.3, q(0.9), 5000, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_elementary_pairing(9, 0.3, q(0.9), 5000, 43).unwrap();
        assert_ne!(a.mean, c.mean);

        let c1 = cfg(vec![1, 0]);
        let table = vec![vec![0.7], vec![]];
        let x = simulate_chain(&c1, 0.05, &table, 3000, 9).unwrap();
        let y = simulate_chain(&c1, 0.05, &table, 3000, 9).unwrap();
        assert_eq!(x.mean.to_bits(), y.mean.to_bits());
        assert_eq!(x.std_error.to_bits(), y.std_error.to_bits());
    }

    #[test]
    fn single_link_is_geometric() {
        let est = simulate_chain(&cfg(vec![0]), 0.25, &[vec![]], 100_000, 3).unwrap();
        assert!(est.z_score(4.0) < 3.0, "{est:?}");
        let certain = simulate_chain(&cfg(vec![0]), 1.0, &[vec![]], 100, 3).unwrap();
        assert_eq!(certain.mean, 1.0);
    }

    #[test]
    fn one_swap_matches_max_of_two_geometrics() {
        let p0: f64 = 0.05;
        let exact = 2.0 / p0 - 1.0 / (p0 * (2.0 - p0)) + 1.0;
        let est = simulate_chain(&cfg(vec![0, 0]), p0, &[vec![], vec![]], 100_000, 11).unwrap();
        assert!(est.z_score(exact) < 3.0, "{est:?} vs {exact}");
    }

    #[test]
    fn input_validation() {
        let c = cfg(vec![1]);
        assert!(simulate_chain(&c, 0.1, &[vec![]], 10, 0).is_err());
        assert!(simulate_chain(&c, 0.1, &[vec![0.0]], 10, 0).is_err());
        assert_eq!(
            simulate_chain(&c, 0.0, &[vec![0.5]], 10, 0),
            Err(Error::ZeroSuccessProbability)
        );
        assert!(simulate_chain(&c, 0.1, &[vec![0.5]], 0, 0).is_err());
        assert!(simulate_elementary_pairing(0, 0.5, q(1.0), 10, 0).is_err());
    }
}
