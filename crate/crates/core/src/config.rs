//! Run and benchmark configuration, loadable from TOML.
//!
//! Every field has a default, so a config file only lists what it changes:
//!
//! ```toml
//! map = "builtin:rooms64"
//! robots = 4
//! policy = "rendezvous_sync"
//!
//! [ga]
//! population = 32
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::{EnvEstimates, ObjectiveWeights, SyncRule};
use crate::policy::{BaselineKind, BaselineSettings, UtilityParams};
use crate::solver::{Bounds, GaConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Toml { path: String, source: toml::de::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Fixed plan; meetings only move the rendezvous locations.
    Rendezvous,
    /// Plan with a whole-team sync row at which the plan is regenerated.
    RendezvousSync,
    Bs,
    Crn1r,
    Crn2r,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Rendezvous,
        PolicyKind::RendezvousSync,
        PolicyKind::Bs,
        PolicyKind::Crn1r,
        PolicyKind::Crn2r,
    ];

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            PolicyKind::Bs => Some(BaselineKind::Bs),
            PolicyKind::Crn1r => Some(BaselineKind::Crn1r),
            PolicyKind::Crn2r => Some(BaselineKind::Crn2r),
            _ => None,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Rendezvous => "rendezvous",
            PolicyKind::RendezvousSync => "rendezvous_sync",
            PolicyKind::Bs => "bs",
            PolicyKind::Crn1r => "crn1r",
            PolicyKind::Crn2r => "crn2r",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown policy {s:?}; expected one of rendezvous, rendezvous_sync, bs, crn1r, crn2r"))
    }
}

/// Solver settings as they appear in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaSettings {
    pub population: usize,
    pub generations: usize,
    pub crossover: f64,
    pub mutation: f64,
    pub jitter: f64,
    pub structural: f64,
    pub elitism: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub min_agreements: usize,
    pub max_agreements: usize,
    pub min_steps: u32,
    pub max_steps: u32,
    pub max_team: Option<usize>,
    pub sync_rule: String,
    /// Reduced budget used when regenerating at a sync row.
    pub sync_population: usize,
    pub sync_generations: usize,
}

impl Default for GaSettings {
    fn default() -> Self {
        let ga = GaConfig::default();
        GaSettings {
            population: ga.population,
            generations: ga.generations,
            crossover: ga.crossover_rate,
            mutation: ga.mutation_rate,
            jitter: ga.jitter,
            structural: ga.structural_rate,
            elitism: ga.elitism,
            alpha: ga.weights.alpha.to_vec(),
            beta: ga.weights.beta.to_vec(),
            min_agreements: ga.bounds.min_agreements,
            max_agreements: ga.bounds.max_agreements,
            min_steps: ga.bounds.min_steps,
            max_steps: ga.bounds.max_steps,
            max_team: ga.bounds.max_team,
            sync_rule: ga.rule.to_string(),
            sync_population: 32,
            sync_generations: 60,
        }
    }
}

impl GaSettings {
    pub fn to_config(&self, seed: u64, env: EnvEstimates) -> Result<GaConfig, ConfigError> {
        let weights = ObjectiveWeights::new(&self.alpha, &self.beta).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let rule: SyncRule = self.sync_rule.parse().map_err(ConfigError::Invalid)?;
        Ok(GaConfig {
            population: self.population,
            generations: self.generations,
            crossover_rate: self.crossover,
            mutation_rate: self.mutation,
            jitter: self.jitter,
            structural_rate: self.structural,
            elitism: self.elitism,
            seed,
            weights,
            env,
            rule,
            bounds: Bounds {
                min_agreements: self.min_agreements,
                max_agreements: self.max_agreements,
                min_steps: self.min_steps,
                max_steps: self.max_steps,
                max_team: self.max_team,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// `builtin:NAME` or a path to an ASCII map.
    pub map: String,
    pub robots: usize,
    pub vis_radius: u32,
    pub comm_range: f64,
    /// Rendezvous wait limit; defaults to twice the map's width plus height.
    pub timeout: Option<u32>,
    pub step_cap: u64,
    pub seed: u64,
    pub policy: PolicyKind,
    /// Fixed start cell `[x, y]`; otherwise drawn from the seed.
    pub start: Option<[usize; 2]>,
    pub alpha_u: f64,
    pub beta_u: f64,
    pub knn_k: usize,
    /// Plan document to use instead of generating one.
    pub plan: Option<String>,
    /// Cells revealed per step for plan sizing; calibrated when absent.
    pub explore_rate: Option<f64>,
    pub pilot_trials: usize,
    pub pilot_horizon: usize,
    pub deliver_period: u64,
    pub network_range: f64,
    pub relay_after: u64,
    pub log_decisions: bool,
    pub ga: GaSettings,
}

impl Default for SimConfig {
    fn default() -> Self {
        let b = BaselineSettings::default();
        let u = UtilityParams::default();
        SimConfig {
            map: "builtin:open32".into(),
            robots: 4,
            vis_radius: u.vis_radius,
            comm_range: 2.0,
            timeout: None,
            step_cap: 50_000,
            seed: 0,
            policy: PolicyKind::Rendezvous,
            start: None,
            alpha_u: u.alpha,
            beta_u: u.beta,
            knn_k: 3,
            plan: None,
            explore_rate: None,
            pilot_trials: 4,
            pilot_horizon: 50,
            deliver_period: b.deliver_period,
            network_range: b.network_range,
            relay_after: b.relay_after,
            log_decisions: false,
            ga: GaSettings::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.robots == 0 {
            return bad("robots must be at least 1".into());
        }
        if self.step_cap == 0 {
            return bad("step_cap must be positive".into());
        }
        if self.vis_radius == 0 {
            return bad("vis_radius must be positive".into());
        }
        if !(self.comm_range.is_finite() && self.comm_range >= 0.0) {
            return bad(format!("comm_range must be non-negative, got {}", self.comm_range));
        }
        if !(self.network_range.is_finite() && self.network_range > 0.0) {
            return bad(format!("network_range must be positive, got {}", self.network_range));
        }
        if self.knn_k == 0 {
            return bad("knn_k must be positive".into());
        }
        if let Some(x) = self.explore_rate {
            if !(x.is_finite() && x >= 0.0) {
                return bad(format!("explore_rate must be non-negative, got {x}"));
            }
        } else if self.pilot_trials == 0 || self.pilot_horizon == 0 {
            return bad("pilot_trials and pilot_horizon must be positive".into());
        }
        self.utility().validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }

    pub fn utility(&self) -> UtilityParams {
        UtilityParams {
            alpha: self.alpha_u,
            beta: self.beta_u,
            vis_radius: self.vis_radius,
        }
    }

    pub fn baseline(&self) -> BaselineSettings {
        BaselineSettings {
            deliver_period: self.deliver_period,
            network_range: self.network_range,
            relay_after: self.relay_after,
        }
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Toml {
            path: origin.into(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: origin.clone(),
            source: e,
        })?;
        Self::from_toml(&text, &origin)
    }
}

/// A benchmark grid: every map × policy × seed, sharing one base config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchManifest {
    pub maps: Vec<String>,
    pub policies: Vec<PolicyKind>,
    pub seeds: Vec<u64>,
    pub base: SimConfig,
}

impl Default for BenchManifest {
    fn default() -> Self {
        BenchManifest {
            maps: crate::maps::benchmark_names().into_iter().map(|n| format!("builtin:{n}")).collect(),
            policies: vec![PolicyKind::Rendezvous, PolicyKind::Bs, PolicyKind::Crn2r],
            seeds: (0..10).collect(),
            base: SimConfig::default(),
        }
    }
}

impl BenchManifest {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: origin.clone(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Toml { path: origin, source: e })
    }

    /// One config per (map, policy, seed), in that nesting order.
    pub fn expand(&self) -> Vec<SimConfig> {
        let mut out = Vec::new();
        for map in &self.maps {
            for &policy in &self.policies {
                for &seed in &self.seeds {
                    out.push(SimConfig {
                        map: map.clone(),
                        policy,
                        seed,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }
}
