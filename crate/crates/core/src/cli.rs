//! Run specifications, parameter sweeps and CSV output for the `rrl` binary.
//!
//! Settings come from command-line flags and from an optional `key = value`
//! file using the same key names as the long flags. Flags win over the file.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use rayon::prelude::*;

use crate::baselines::{baseline_rate, BaselineKind};
use crate::chain::{
    evolve_states, evolve_states_from, repeater_rate_with, ChainConfig, ElementaryModel,
    PairingMode, RateResult,
};
use crate::error::{Error, Result};
use crate::montecarlo::{simulate_chain, GENERATOR};
use crate::pairing::{LinkPhysics, SpiModel};
use crate::qstate::{fidelity, BellCoeffs, GateQuality};
use crate::swap_distill::SwapPolicy;

pub const CSV_HEADER: &str =
    "protocol,L_km,N,k_vec,p_G,p0,tau_T0,rate_hz,fidelity,mc_tau_mean,mc_tau_stderr,flags";

pub const DEFAULT_ATT_KM: f64 = 22.0;
pub const DEFAULT_SPEED_KM_S: f64 = 2.0e5;
pub const DEFAULT_ETA_D: f64 = 1.0;
pub const DEFAULT_EMISSION_P: f64 = 0.1;
pub const DEFAULT_DISTANCE_KM: f64 = 600.0;
pub const DEFAULT_N_LEVELS: usize = 2;
pub const DEFAULT_P_GATE: f64 = 0.995;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Async,
    Baseline(BaselineKind),
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Async => "async",
            Protocol::Baseline(kind) => kind.name(),
        }
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "async" => Ok(Protocol::Async),
            other => other.parse().map(Protocol::Baseline).map_err(|_| {
                Error::Config(format!(
                    "unknown protocol '{other}' (expected async, spi_atomic, spi_trapped_ion or tpi)"
                ))
            }),
        }
    }
}

fn parse_spi_model(s: &str) -> Result<SpiModel> {
    match s {
        "atomic" | "atomic_ensemble" => Ok(SpiModel::AtomicEnsemble),
        "ion" | "trapped_ion" => Ok(SpiModel::TrappedIon),
        other => Err(Error::Config(format!(
            "unknown SPI model '{other}' (expected atomic or ion)"
        ))),
    }
}

fn spi_model_name(model: SpiModel) -> &'static str {
    match model {
        SpiModel::AtomicEnsemble => "atomic",
        SpiModel::TrappedIon => "ion",
    }
}

/// Distillation rounds per level, written `2,0,0` on input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KVec(pub Vec<u32>);

impl FromStr for KVec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|part| {
                part.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Config(format!("invalid distillation count '{part}'")))
            })
            .collect::<Result<Vec<_>>>()
            .map(KVec)
    }
}

/// `(k0|k1|...|kN)`.
pub fn format_k_vec(k: &[u32]) -> String {
    let parts: Vec<String> = k.iter().map(u32::to_string).collect();
    format!("({})", parts.join("|"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Distance,
    K,
    NLevels,
    PGate,
}

impl SweepAxis {
    fn name(self) -> &'static str {
        match self {
            SweepAxis::Distance => "distance",
            SweepAxis::K => "k",
            SweepAxis::NLevels => "n_levels",
            SweepAxis::PGate => "p_gate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| self.start + i as f64 * self.step)
            .collect()
    }
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [axis, start, stop, step] = parts[..] else {
            return Err(Error::Config(format!(
                "sweep '{s}' must look like axis:start:stop:step"
            )));
        };
        let axis = match axis {
            "distance" => SweepAxis::Distance,
            "k" => SweepAxis::K,
            "n_levels" | "n-levels" => SweepAxis::NLevels,
            "p_gate" | "p-gate" => SweepAxis::PGate,
            other => return Err(Error::Config(format!("unknown sweep axis '{other}'"))),
        };
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("invalid sweep bound '{v}'")))
        };
        let sweep = Sweep {
            axis,
            start: num(start)?,
            stop: num(stop)?,
            step: num(step)?,
        };
        if !(sweep.step > 0.0) || !(sweep.stop >= sweep.start) {
            return Err(Error::Config(format!(
                "sweep '{s}' needs step > 0 and stop >= start"
            )));
        }
        Ok(sweep)
    }
}

/// Raw settings as given by flags or by a config file. Unset fields fall
/// back to the file, then to the defaults.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Settings {
    /// async, spi_atomic, spi_trapped_ion or tpi
    #[arg(long)]
    pub protocol: Option<String>,
    /// Total end-to-end distance in km
    #[arg(long)]
    pub distance_km: Option<f64>,
    /// Nesting level N
    #[arg(long)]
    pub n_levels: Option<usize>,
    /// Distillation rounds per level, e.g. 2,0,0
    #[arg(long)]
    pub k: Option<String>,
    /// Gate quality p_G
    #[arg(long)]
    pub p_gate: Option<f64>,
    /// axis:start:stop:step with axis one of distance, k, n_levels, p_gate
    #[arg(long)]
    pub sweep: Option<String>,
    /// Monte Carlo trials per point (enables the mc_ columns)
    #[arg(long)]
    pub mc_trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Attenuation length in km
    #[arg(long)]
    pub att_km: Option<f64>,
    #[arg(long)]
    pub eta_d: Option<f64>,
    /// Emission probability p
    #[arg(long)]
    pub emission_p: Option<f64>,
    /// atomic or ion
    #[arg(long)]
    pub spi_model: Option<String>,
    /// Swap success probability at every level
    #[arg(long)]
    pub p_es: Option<f64>,
    /// Use a finite memory count instead of the large-memory limit
    #[arg(long)]
    pub finite_m: Option<u64>,
    /// Override the SPI success probability
    #[arg(long)]
    pub p_s: Option<f64>,
    /// Signal speed in fiber, km/s
    #[arg(long)]
    pub speed_km_s: Option<f64>,
    /// Output CSV path (stdout when absent)
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
}

impl Settings {
    /// Parses a `key = value` file. Keys match the long flags; `_` and `-`
    /// are interchangeable. Errors carry the 1-based line number.
    pub fn from_kv_text(text: &str, source: &str) -> Result<Settings> {
        let mut s = Settings::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| Error::Config(format!("{source}:{line_no}: {msg}"));
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(format!("expected key = value, found '{line}'")));
            };
            let key = key.trim().replace('_', "-");
            let value = value.trim();
            let num = |v: &str| v.parse::<f64>().map_err(|_| err(format!("invalid number '{v}' for {key}")));
            let int = |v: &str| v.parse::<u64>().map_err(|_| err(format!("invalid integer '{v}' for {key}")));
            match key.as_str() {
                "protocol" => s.protocol = Some(value.to_string()),
                "distance-km" => s.distance_km = Some(num(value)?),
                "n-levels" => s.n_levels = Some(int(value)? as usize),
                "k" => s.k = Some(value.to_string()),
                "p-gate" => s.p_gate = Some(num(value)?),
                "sweep" => s.sweep = Some(value.to_string()),
                "mc-trials" => s.mc_trials = Some(int(value)?),
                "seed" => s.seed = Some(int(value)?),
                "att-km" => s.att_km = Some(num(value)?),
                "eta-d" => s.eta_d = Some(num(value)?),
                "emission-p" => s.emission_p = Some(num(value)?),
                "spi-model" => s.spi_model = Some(value.to_string()),
                "p-es" => s.p_es = Some(num(value)?),
                "finite-m" => s.finite_m = Some(int(value)?),
                "p-s" => s.p_s = Some(num(value)?),
                "speed-km-s" => s.speed_km_s = Some(num(value)?),
                "output" => s.output = Some(PathBuf::from(value)),
                other => return Err(err(format!("unknown key '{other}'"))),
            }
            // validate string-typed values where they appear
            match key.as_str() {
                "protocol" => drop(value.parse::<Protocol>().map_err(|e| err(e.to_string()))?),
                "k" => drop(value.parse::<KVec>().map_err(|e| err(e.to_string()))?),
                "sweep" => drop(value.parse::<Sweep>().map_err(|e| err(e.to_string()))?),
                "spi-model" => drop(parse_spi_model(value).map_err(|e| err(e.to_string()))?),
                _ => {}
            }
        }
        Ok(s)
    }

    /// Fields set in `self` win; the rest come from `fallback`.
    pub fn or(self, fallback: Settings) -> Settings {
        Settings {
            protocol: self.protocol.or(fallback.protocol),
            distance_km: self.distance_km.or(fallback.distance_km),
            n_levels: self.n_levels.or(fallback.n_levels),
            k: self.k.or(fallback.k),
            p_gate: self.p_gate.or(fallback.p_gate),
            sweep: self.sweep.or(fallback.sweep),
            mc_trials: self.mc_trials.or(fallback.mc_trials),
            seed: self.seed.or(fallback.seed),
            att_km: self.att_km.or(fallback.att_km),
            eta_d: self.eta_d.or(fallback.eta_d),
            emission_p: self.emission_p.or(fallback.emission_p),
            spi_model: self.spi_model.or(fallback.spi_model),
            p_es: self.p_es.or(fallback.p_es),
            finite_m: self.finite_m.or(fallback.finite_m),
            p_s: self.p_s.or(fallback.p_s),
            speed_km_s: self.speed_km_s.or(fallback.speed_km_s),
            output: self.output.or(fallback.output),
        }
    }

    pub fn into_spec(self) -> Result<RunSpec> {
        let n_levels = self.n_levels.unwrap_or(DEFAULT_N_LEVELS);
        let k_vec = match &self.k {
            Some(k) => k.parse::<KVec>()?.0,
            None => {
                let mut v = vec![0; n_levels + 1];
                v[0] = 2;
                v
            }
        };
        let spec = RunSpec {
            protocol: self.protocol.as_deref().unwrap_or("async").parse()?,
            sweep: self.sweep.as_deref().map(str::parse).transpose()?,
            distance_km: self.distance_km.unwrap_or(DEFAULT_DISTANCE_KM),
            n_levels,
            k_vec,
            p_gate: self.p_gate.unwrap_or(DEFAULT_P_GATE),
            att_km: self.att_km.unwrap_or(DEFAULT_ATT_KM),
            eta_d: self.eta_d.unwrap_or(DEFAULT_ETA_D),
            emission_p: self.emission_p.unwrap_or(DEFAULT_EMISSION_P),
            spi_model: self
                .spi_model
                .as_deref()
                .map(parse_spi_model)
                .transpose()?
                .unwrap_or(SpiModel::AtomicEnsemble),
            p_es: self.p_es.unwrap_or(1.0),
            finite_m: self.finite_m,
            p_s_override: self.p_s,
            speed_km_s: self.speed_km_s.unwrap_or(DEFAULT_SPEED_KM_S),
            mc: self.mc_trials.map(|trials| McSettings {
                trials,
                seed: self.seed.unwrap_or(DEFAULT_SEED),
            }),
            output: self.output,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSettings {
    pub trials: u64,
    pub seed: u64,
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub protocol: Protocol,
    pub sweep: Option<Sweep>,
    pub distance_km: f64,
    pub n_levels: usize,
    pub k_vec: Vec<u32>,
    pub p_gate: f64,
    pub att_km: f64,
    pub eta_d: f64,
    pub emission_p: f64,
    pub spi_model: SpiModel,
    pub p_es: f64,
    pub finite_m: Option<u64>,
    pub p_s_override: Option<f64>,
    pub speed_km_s: f64,
    pub mc: Option<McSettings>,
    pub output: Option<PathBuf>,
}

/// Parameters of one evaluated point.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub distance_km: f64,
    pub cfg: ChainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub protocol: Protocol,
    pub distance_km: f64,
    pub n_levels: usize,
    pub k_vec: Vec<u32>,
    pub p_gate: f64,
    pub p0: f64,
    /// `None` when `p0 = 0`.
    pub tau_t0: Option<f64>,
    pub rate_hz: f64,
    pub fidelity: f64,
    pub mc: Option<(f64, f64)>,
    pub flags: Vec<&'static str>,
}

impl RunSpec {
    pub fn physics(&self) -> Result<LinkPhysics> {
        LinkPhysics::new(
            self.emission_p,
            self.eta_d,
            self.att_km,
            0.0,
            self.speed_km_s,
            self.spi_model,
        )
    }

    fn swap_policy(&self) -> SwapPolicy {
        if self.p_es == 1.0 {
            SwapPolicy::Ideal
        } else {
            SwapPolicy::Constant(self.p_es)
        }
    }

    fn elementary_model(&self) -> ElementaryModel {
        ElementaryModel {
            mode: self
                .finite_m
                .map_or(PairingMode::Asymptotic, PairingMode::FiniteMemories),
            p_s_override: self.p_s_override,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.physics()?;
        GateQuality::new(self.p_gate)?;
        self.swap_policy().validate()?;
        if !(self.distance_km >= 0.0 && self.distance_km.is_finite()) {
            return Err(Error::Config(format!(
                "distance {} km must be a nonnegative number",
                self.distance_km
            )));
        }
        if let Some(p) = self.p_s_override {
            crate::error::check_prob("p_S", p)?;
        }
        if self.finite_m == Some(0) {
            return Err(Error::Config("finite-m must be positive".into()));
        }
        if self.mc.is_some_and(|mc| mc.trials == 0) {
            return Err(Error::Config("mc-trials must be positive".into()));
        }
        let sweeps_shape = matches!(
            self.sweep,
            Some(Sweep {
                axis: SweepAxis::K | SweepAxis::NLevels,
                ..
            })
        );
        if !sweeps_shape && self.k_vec.len() != self.n_levels + 1 {
            return Err(Error::KVectorLength {
                expected: self.n_levels + 1,
                found: self.k_vec.len(),
            });
        }
        if let Some(sweep) = &self.sweep {
            let values = sweep.values();
            let integral = values.iter().all(|v| (v - v.round()).abs() < 1e-9 && *v >= 0.0);
            match sweep.axis {
                SweepAxis::K | SweepAxis::NLevels if !integral => {
                    return Err(Error::Config(format!(
                        "sweep over {} needs nonnegative integer values",
                        sweep.axis.name()
                    )))
                }
                SweepAxis::PGate => {
                    for v in values {
                        GateQuality::new(v)?;
                    }
                }
                SweepAxis::Distance if sweep.start < 0.0 => {
                    return Err(Error::Config("distance sweep must start at >= 0".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Evaluation points in sweep order.
    pub fn points(&self) -> Result<Vec<Point>> {
        let base = |n_levels: usize, k_vec: Vec<u32>, p_gate: f64| -> Result<ChainConfig> {
            ChainConfig::new(n_levels, k_vec, GateQuality::new(p_gate)?, self.swap_policy())
        };
        let first_level = |n_levels: usize, k: u32| {
            let mut v = vec![0; n_levels + 1];
            v[0] = k;
            v
        };
        let Some(sweep) = &self.sweep else {
            return Ok(vec![Point {
                distance_km: self.distance_km,
                cfg: base(self.n_levels, self.k_vec.clone(), self.p_gate)?,
            }]);
        };
        sweep
            .values()
            .into_iter()
            .map(|v| {
                let (distance_km, cfg) = match sweep.axis {
                    SweepAxis::Distance => {
                        (v, base(self.n_levels, self.k_vec.clone(), self.p_gate)?)
                    }
                    SweepAxis::K => (
                        self.distance_km,
                        base(self.n_levels, first_level(self.n_levels, v.round() as u32), self.p_gate)?,
                    ),
                    SweepAxis::NLevels => {
                        let n = v.round() as usize;
                        let k0 = self.k_vec.first().copied().unwrap_or(0);
                        (self.distance_km, base(n, first_level(n, k0), self.p_gate)?)
                    }
                    SweepAxis::PGate => (
                        self.distance_km,
                        base(self.n_levels, self.k_vec.clone(), v)?,
                    ),
                };
                Ok(Point { distance_km, cfg })
            })
            .collect()
    }

    fn evaluate(&self, point: &Point) -> Result<Row> {
        let phys = self.physics()?;
        let rate: Result<RateResult> = match self.protocol {
            Protocol::Async => {
                repeater_rate_with(&point.cfg, &phys, point.distance_km, &self.elementary_model())
            }
            Protocol::Baseline(kind) => baseline_rate(kind, &point.cfg, &phys, point.distance_km),
        };
        let mut row = Row {
            protocol: self.protocol,
            distance_km: point.distance_km,
            n_levels: point.cfg.n_levels,
            k_vec: point.cfg.k_vec.clone(),
            p_gate: point.cfg.q.value(),
            p0: 0.0,
            tau_t0: None,
            rate_hz: 0.0,
            fidelity: 0.0,
            mc: None,
            flags: Vec::new(),
        };
        match rate {
            Ok(r) => {
                if let Some(mc) = self.mc {
                    let table: Vec<Vec<f64>> = r.per_level.iter().map(|l| l.p_ed.clone()).collect();
                    let est = simulate_chain(&point.cfg, r.p0, &table, mc.trials, mc.seed)?;
                    row.mc = Some((est.mean, est.std_error));
                }
                if r.rate_hz.is_infinite() {
                    row.flags.push("zero_length");
                }
                row.p0 = r.p0;
                row.tau_t0 = Some(r.tau_t0);
                row.rate_hz = r.rate_hz;
                row.fidelity = r.fidelity();
            }
            Err(Error::ZeroSuccessProbability) => {
                row.flags.push("p0_zero");
                row.fidelity = fidelity(&self.final_state(&point.cfg)?);
            }
            Err(e) => return Err(e),
        }
        Ok(row)
    }

    fn final_state(&self, cfg: &ChainConfig) -> Result<BellCoeffs> {
        Ok(match self.protocol {
            Protocol::Async => evolve_states(cfg)?.final_state,
            Protocol::Baseline(_) => evolve_states_from(cfg, BellCoeffs::perfect())?.final_state,
        })
    }

    fn metadata(&self) -> Vec<String> {
        let sweep = self.sweep.map_or("none".to_string(), |s| {
            format!("{}:{}:{}:{}", s.axis.name(), fmt_g(s.start), fmt_g(s.stop), fmt_g(s.step))
        });
        let mut lines = vec![
            "rrl run".to_string(),
            format!("protocol={}", self.protocol.name()),
            format!("sweep={sweep}"),
            format!("distance_km={}", fmt_g(self.distance_km)),
            format!("n_levels={}", self.n_levels),
            format!("k_vec={}", format_k_vec(&self.k_vec)),
            format!("p_gate={}", fmt_g(self.p_gate)),
            format!("att_km={}", fmt_g(self.att_km)),
            format!("speed_km_s={}", fmt_g(self.speed_km_s)),
            format!("eta_d={}", fmt_g(self.eta_d)),
            format!("emission_p={}", fmt_g(self.emission_p)),
            format!("spi_model={}", spi_model_name(self.spi_model)),
            format!("p_es={}", fmt_g(self.p_es)),
            format!(
                "pairing={}",
                self.finite_m
                    .map_or("asymptotic".to_string(), |m| format!("finite_m:{m}"))
            ),
            format!(
                "p_s_override={}",
                self.p_s_override.map_or("none".to_string(), fmt_g)
            ),
        ];
        match self.mc {
            Some(mc) => {
                lines.push(format!("mc_trials={}", mc.trials));
                lines.push(format!("seed={}", mc.seed));
                lines.push(format!("generator={GENERATOR}"));
            }
            None => lines.push("mc=disabled".to_string()),
        }
        lines
    }
}

/// Evaluates every point of the spec. Points run concurrently; rows come
/// back in sweep order.
pub fn run(spec: &RunSpec) -> Result<Vec<Row>> {
    spec.validate()?;
    let points = spec.points()?;
    points.par_iter().map(|p| spec.evaluate(p)).collect()
}

pub fn render_csv(spec: &RunSpec, rows: &[Row]) -> String {
    let mut out = String::new();
    for line in spec.metadata() {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "{CSV_HEADER}");
    for row in rows {
        let (mc_mean, mc_err) = row
            .mc
            .map_or((String::new(), String::new()), |(m, e)| (fmt_g(m), fmt_g(e)));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            row.protocol.name(),
            fmt_g(row.distance_km),
            row.n_levels,
            format_k_vec(&row.k_vec),
            fmt_g(row.p_gate),
            fmt_g(row.p0),
            row.tau_t0.map_or("inf".to_string(), fmt_g),
            fmt_g(row.rate_hz),
            fmt_g(row.fidelity),
            mc_mean,
            mc_err,
            row.flags.join(";"),
        );
    }
    out
}

/// Formats a real with 12 significant digits, `%.12g` style.
pub fn fmt_g(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
