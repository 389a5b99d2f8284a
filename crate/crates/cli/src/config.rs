use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use estc_core::schedule::{custom_model, model_spec, ModelSpec, Region, Schedule};
use estc_core::FieldConfig;
use serde::{Deserialize, Serialize};

use crate::ConfigError;

/// Which equations to keep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelChoice {
    Level { p: u8 },
    Families {
        k_list: Vec<usize>,
        #[serde(default)]
        name: Option<String>,
    },
}

impl Default for ModelChoice {
    fn default() -> Self {
        ModelChoice::Level { p: 1 }
    }
}

impl ModelChoice {
    pub fn build(&self, schedule: &Schedule) -> Result<ModelSpec> {
        let spec = match self {
            ModelChoice::Level { p } => model_spec(schedule, *p),
            ModelChoice::Families { k_list, name } => custom_model(
                schedule,
                name.as_deref().unwrap_or("custom"),
                k_list,
                Region::model_region(),
            ),
        };
        spec.map_err(|e| ConfigError(e.to_string()).into())
    }

    /// Parses `--model p` / `--k-list a,b,c` style arguments.
    pub fn from_args(p: Option<u8>, k_list: Option<&str>) -> Result<Option<Self>> {
        match (p, k_list) {
            (Some(_), Some(_)) => Err(ConfigError("give --model or --k-list, not both".into()).into()),
            (Some(p), None) => Ok(Some(ModelChoice::Level { p })),
            (None, Some(list)) => {
                let k_list = list
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| ConfigError(format!("bad --k-list: {e}")))?;
                Ok(Some(ModelChoice::Families { k_list, name: None }))
            }
            (None, None) => Ok(None),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative norm below which a row remainder counts as dependent.
    pub rank: f64,
    /// Stored bispinor entries at or below this norm are dropped.
    pub drop: f64,
    /// Bound on trace, idempotency and pair-overlap defects.
    pub projector: f64,
    /// Bound on the relative `V_S` residual on model sites.
    pub residual: f64,
    /// Bound on the relative difference of the two `U_D` assemblies.
    pub dual_path: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rank: 1e-8, drop: 0.0, projector: 1e-9, residual: 1e-8, dual_path: 1e-8 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserveConfig {
    /// Amplitude as four `[re, im]` pairs; the best amplitude is used when absent.
    pub a0: Option<[[f64; 2]; 4]>,
    /// Grid points per axis for the quadrature cross-check.
    pub grid: Option<usize>,
    /// Random amplitudes tested against the best-amplitude bound.
    pub probes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub field: FieldConfig,
    #[serde(default)]
    pub model: ModelChoice,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub allow_rank_deficient: bool,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub observe: ObserveConfig,
}

fn default_seed() -> u64 {
    1
}

impl RunConfig {
    pub fn from_field(field: FieldConfig) -> Self {
        RunConfig {
            field,
            model: ModelChoice::default(),
            tolerances: Tolerances::default(),
            allow_rank_deficient: false,
            threads: None,
            output_dir: None,
            seed: default_seed(),
            observe: ObserveConfig::default(),
        }
    }

    /// Accepts either a full run configuration or a bare field configuration.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid JSON: {e}")))?;
        let cfg = if value.get("field").is_some() {
            serde_json::from_value::<RunConfig>(value).map_err(|e| ConfigError(e.to_string()))?
        } else {
            let field = serde_json::from_value::<FieldConfig>(value)
                .map_err(|e| ConfigError(format!("field configuration: {e}")))?;
            RunConfig::from_field(field)
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("rank", t.rank),
            ("projector", t.projector),
            ("residual", t.residual),
            ("dual_path", t.dual_path),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!(ConfigError(format!("tolerance `{name}` must be positive, got {v}")));
            }
        }
        if !(t.drop >= 0.0 && t.drop.is_finite()) {
            bail!(ConfigError(format!("tolerance `drop` must be non-negative, got {}", t.drop)));
        }
        if self.threads == Some(0) {
            bail!(ConfigError("threads must be at least 1".into()));
        }
        if self.observe.grid == Some(0) {
            bail!(ConfigError("observe.grid must be at least 1".into()));
        }
        self.field.validate().map_err(|e| ConfigError(e.to_string()))?;
        if let ModelChoice::Level { p } = self.model {
            if p > 3 {
                bail!(ConfigError(format!("model level must be 0..=3, got {p}")));
            }
        }
        Ok(())
    }

    pub fn engine_options(&self) -> estc_core::EngineOptions {
        estc_core::EngineOptions {
            rank_tolerance: self.tolerances.rank,
            allow_rank_deficient: self.allow_rank_deficient,
            drop_tolerance: self.tolerances.drop,
        }
    }
}
