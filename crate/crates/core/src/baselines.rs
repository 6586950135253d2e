//! SPI- and TPI-heralded repeaters used as comparison points.
//!
//! Both baselines start every elementary link from a perfect Bell pair and
//! reuse the chain machinery for swapping and distillation.

use std::fmt;
use std::str::FromStr;

use crate::chain::{check_distance, evolve_states_from, rate_from_parts, ChainConfig, RateResult};
use crate::error::{Error, Result};
use crate::pairing::{LinkPhysics, SpiModel};
use crate::qstate::BellCoeffs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    SpiAtomic,
    SpiTrappedIon,
    Tpi,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::SpiAtomic => "spi_atomic",
            BaselineKind::SpiTrappedIon => "spi_trapped_ion",
            BaselineKind::Tpi => "tpi",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spi_atomic" => Ok(BaselineKind::SpiAtomic),
            "spi_trapped_ion" => Ok(BaselineKind::SpiTrappedIon),
            "tpi" => Ok(BaselineKind::Tpi),
            other => Err(Error::Config(format!("unknown baseline '{other}'"))),
        }
    }
}

/// Heralding probability of one elementary link of length `L0`.
pub fn baseline_elementary_prob(kind: BaselineKind, phys: &LinkPhysics) -> f64 {
    let l0 = phys.link_length_km;
    let l_att = phys.att_length_km;
    match kind {
        BaselineKind::SpiAtomic => {
            SpiModel::AtomicEnsemble.emission_factor(phys.emission_p)
                * phys.eta_d
                * (-l0 / (2.0 * l_att)).exp()
        }
        BaselineKind::SpiTrappedIon => {
            SpiModel::TrappedIon.emission_factor(phys.emission_p)
                * phys.eta_d
                * (-l0 / (2.0 * l_att)).exp()
        }
        BaselineKind::Tpi => 0.5 * phys.eta_d * phys.eta_d * (-l0 / l_att).exp(),
    }
}

pub fn baseline_rate(
    kind: BaselineKind,
    cfg: &ChainConfig,
    phys: &LinkPhysics,
    total_l_km: f64,
) -> Result<RateResult> {
    check_distance(total_l_km)?;
    let phys = phys.with_link_length(total_l_km / cfg.link_count() as f64);
    phys.validate()?;
    let p0 = baseline_elementary_prob(kind, &phys);
    let evolution = evolve_states_from(cfg, BellCoeffs::perfect())?;
    rate_from_parts(cfg, &phys, p0, evolution)
}
