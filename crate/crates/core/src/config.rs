//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::Variant;
use crate::basis::DEFAULT_MAX_SITES;
use crate::error::{Error, Result};
use crate::hf::{HfSettings, InitialDensity};
use crate::optimizer::OptimizerSettings;
use crate::portfolio::{InstanceConfig, SynthProfile, HOURS_PER_DAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    Synth {
        #[serde(default = "default_days")]
        days: usize,
        #[serde(default)]
        profile: SynthProfile,
    },
    Csv {
        path: PathBuf,
    },
}

fn default_days() -> usize {
    60
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synth {
            days: default_days(),
            profile: SynthProfile::default(),
        }
    }
}

/// `P'_t`: one value for every hour, or one per hour of the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Flat(f64),
    Hourly(Vec<f64>),
}

impl Target {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            Target::Flat(v) => *v,
            Target::Hourly(v) => v[t],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HfConfig {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub initial: InitialDensity,
    /// Mixing weights swept by `hf-trace`.
    pub trace_alphas: Vec<f64>,
    /// Period traced by `hf-trace`.
    pub trace_period: usize,
}

impl Default for HfConfig {
    fn default() -> Self {
        let s = HfSettings::default();
        Self {
            alpha: s.alpha,
            tol: s.tol,
            max_iter: s.max_iter,
            initial: s.initial,
            trace_alphas: vec![0.2, 0.4, 0.6, 0.8],
            trace_period: 18,
        }
    }
}

impl HfConfig {
    pub fn settings(&self) -> HfSettings {
        HfSettings {
            alpha: self.alpha,
            tol: self.tol,
            max_iter: self.max_iter,
            initial: self.initial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub bins: usize,
    /// Balance margin `delta` (kWh).
    pub margin: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            bins: 10,
            margin: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub participants: usize,
    pub requests: usize,
    /// First hour of each period.
    pub periods: Vec<usize>,
    /// Hours per period, `N_T`.
    pub period_len: usize,
    pub target: Target,
    pub variants: Vec<Variant>,
    pub levels: Vec<usize>,
    pub max_sites: usize,
    pub data: DataSource,
    pub optimizer: OptimizerSettings,
    pub hf: HfConfig,
    pub report: ReportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out_dir: PathBuf::from("out"),
            participants: 20,
            requests: 5,
            periods: (0..8).map(|k| 3 * k).collect(),
            period_len: 3,
            target: Target::Flat(1.5),
            variants: Variant::ALL.to_vec(),
            levels: vec![0, 1, 10],
            max_sites: DEFAULT_MAX_SITES,
            data: DataSource::default(),
            optimizer: OptimizerSettings::default(),
            hf: HfConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("seed is mandatory (set `seed` or pass --seed)".into()))
    }

    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if self.participants == 0 || self.participants > self.max_sites {
            return bad(format!(
                "participants must be in 1..={}, got {}",
                self.max_sites, self.participants
            ));
        }
        if self.requests == 0 || self.requests > self.participants {
            return bad(format!(
                "requests must be in 1..={}, got {}",
                self.participants, self.requests
            ));
        }
        if self.period_len == 0 {
            return bad("period_len must be positive".into());
        }
        if let Some(&t) = self
            .periods
            .iter()
            .find(|&&t| t + self.period_len > HOURS_PER_DAY)
        {
            return bad(format!(
                "period {t} with {} hours runs past hour {}",
                self.period_len,
                HOURS_PER_DAY - 1
            ));
        }
        if let Target::Hourly(v) = &self.target {
            if v.len() != HOURS_PER_DAY {
                return bad(format!("hourly target needs {HOURS_PER_DAY} values, got {}", v.len()));
            }
        }
        if self.variants.is_empty() {
            return bad("no variants selected".into());
        }
        if self.report.bins == 0 {
            return bad("report.bins must be positive".into());
        }
        if let DataSource::Synth { days, .. } = &self.data {
            if *days < 2 {
                return bad(format!("synthetic data needs at least 2 days, got {days}"));
            }
        }
        Ok(())
    }

    pub fn instance(&self, period: usize) -> InstanceConfig {
        let times: Vec<usize> = (period..period + self.period_len).collect();
        InstanceConfig {
            participants: self.participants,
            requests: self.requests,
            period_start: period,
            target: times.iter().map(|&t| self.target.at(t)).collect(),
            times,
            margin: self.report.margin,
        }
    }

    pub fn max_level(&self) -> usize {
        self.levels.iter().copied().max().unwrap_or(0)
    }
}

/// Seed of a named sub-stream of the master seed.
pub fn substream_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a keeps stream ids stable across builds and platforms
    let id = name
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng.next_u64()
}
