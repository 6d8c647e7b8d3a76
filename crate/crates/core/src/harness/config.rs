use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::eecl::{EeclError, NoveltyConfig};
use crate::envs::env_spec;
use crate::td3::{AgentError, Td3Config};

/// Everything needed to reproduce a training run or a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: String,
    pub td3: Td3Config,
    /// `None` runs plain TD3.
    pub eecl: Option<NoveltyConfig>,
    pub seeds: Vec<u64>,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub out_dir: PathBuf,
}

const TOP_KEYS: &[&str] = &[
    "env",
    "seeds",
    "eval_every",
    "eval_episodes",
    "out_dir",
    "td3",
    "eecl",
];
const TD3_KEYS: &[&str] = &[
    "hidden_sizes",
    "discount",
    "tau",
    "policy_delay",
    "batch_size",
    "replay_capacity",
    "actor_lr",
    "critic_lr",
    "critic_weight_decay",
    "explore_sigma",
    "smooth_sigma",
    "smooth_clip",
    "warmup_steps",
    "total_steps",
];
const EECL_KEYS: &[&str] = &["epsilon", "r_max", "decay", "max_states"];

impl RunConfig {
    pub const ENV: &'static str = "pointmass";
    pub const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
    pub const EVAL_EVERY: u64 = 250;
    pub const EVAL_EPISODES: usize = 10;
    pub const OUT_DIR: &'static str = "runs";

    /// Defaults for `env`, without the novelty bonus.
    pub fn baseline(env: &str) -> Result<Self, HarnessError> {
        let spec = env_spec(env)?;
        Ok(Self {
            env: env.to_string(),
            td3: Td3Config::new(spec.state_dim, spec.action_dim, spec.action_bound),
            eecl: None,
            seeds: Self::SEEDS.to_vec(),
            eval_every: Self::EVAL_EVERY,
            eval_episodes: Self::EVAL_EPISODES,
            out_dir: PathBuf::from(Self::OUT_DIR),
        })
    }

    /// Defaults for `env` with the novelty bonus enabled.
    pub fn with_eecl(env: &str) -> Result<Self, HarnessError> {
        let mut c = Self::baseline(env)?;
        c.eecl = Some(NoveltyConfig::new(c.td3.state_dim));
        Ok(c)
    }

    /// Switches environment, refreshing the dimension fields.
    pub fn set_env(&mut self, env: &str) -> Result<(), HarnessError> {
        let spec = env_spec(env)?;
        self.env = env.to_string();
        self.td3.state_dim = spec.state_dim;
        self.td3.action_dim = spec.action_dim;
        self.td3.action_bound = spec.action_bound;
        if let Some(e) = &mut self.eecl {
            e.state_dim = spec.state_dim;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let spec = env_spec(&self.env)?;
        if self.td3.state_dim != spec.state_dim || self.td3.action_dim != spec.action_dim {
            return Err(out_of_range(
                "td3",
                format!("dimensions do not match environment `{}`", self.env),
            ));
        }
        self.td3.validate().map_err(|e| match e {
            AgentError::InvalidParameter {
                field,
                value,
                expected,
            } => out_of_range(&format!("td3.{field}"), format!("= {value}: {expected}")),
            other => other.into(),
        })?;
        if let Some(eecl) = &self.eecl {
            eecl.validate().map_err(|e| match e {
                EeclError::InvalidParameter {
                    field,
                    value,
                    expected,
                } => out_of_range(&format!("eecl.{field}"), format!("= {value}: {expected}")),
                other => other.into(),
            })?;
        }
        if self.seeds.is_empty() {
            return Err(out_of_range("seeds", "must list at least one seed".into()));
        }
        if self.eval_every == 0 {
            return Err(out_of_range("eval_every", "must be positive".into()));
        }
        if self.eval_episodes == 0 {
            return Err(out_of_range("eval_episodes", "must be positive".into()));
        }
        Ok(())
    }
}

fn out_of_range(field: &str, message: String) -> HarnessError {
    HarnessError::OutOfRange {
        field: field.to_string(),
        message,
    }
}

fn check_keys(table: &toml::Table, allowed: &[&str], prefix: &str) -> Result<(), HarnessError> {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(HarnessError::UnknownKey {
                key: format!("{prefix}{key}"),
            });
        }
    }
    Ok(())
}

fn syntax(path: &Path, message: impl ToString) -> HarnessError {
    HarnessError::ConfigSyntax {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Parses config text. `origin` only labels diagnostics. The presence of an
/// `[eecl]` table (even empty) enables the novelty bonus.
pub fn parse_config(text: &str, origin: &Path) -> Result<RunConfig, HarnessError> {
    let table: toml::Table = text.parse().map_err(|e| syntax(origin, e))?;
    check_keys(&table, TOP_KEYS, "")?;

    let sub_table = |name: &str| -> Result<Option<toml::Table>, HarnessError> {
        match table.get(name) {
            None => Ok(None),
            Some(toml::Value::Table(t)) => Ok(Some(t.clone())),
            Some(_) => Err(syntax(origin, format!("`{name}` must be a table"))),
        }
    };
    let td3_table = sub_table("td3")?;
    let eecl_table = sub_table("eecl")?;
    if let Some(t) = &td3_table {
        check_keys(t, TD3_KEYS, "td3.")?;
    }
    if let Some(t) = &eecl_table {
        check_keys(t, EECL_KEYS, "eecl.")?;
    }

    let env = match table.get("env") {
        None => RunConfig::ENV.to_string(),
        Some(toml::Value::String(s)) => s.clone(),
        Some(_) => return Err(syntax(origin, "`env` must be a string")),
    };
    let mut config = RunConfig::baseline(&env)?;

    if let Some(v) = table.get("seeds") {
        config.seeds = v
            .clone()
            .try_into()
            .map_err(|e| syntax(origin, format!("seeds: {e}")))?;
    }
    if let Some(v) = table.get("eval_every") {
        config.eval_every = v
            .clone()
            .try_into()
            .map_err(|e| syntax(origin, format!("eval_every: {e}")))?;
    }
    if let Some(v) = table.get("eval_episodes") {
        config.eval_episodes = v
            .clone()
            .try_into()
            .map_err(|e| syntax(origin, format!("eval_episodes: {e}")))?;
    }
    if let Some(v) = table.get("out_dir") {
        let s: String = v
            .clone()
            .try_into()
            .map_err(|e| syntax(origin, format!("out_dir: {e}")))?;
        config.out_dir = PathBuf::from(s);
    }

    if let Some(t) = td3_table {
        let mut td3: Td3Config = toml::Value::Table(t)
            .try_into()
            .map_err(|e| syntax(origin, format!("td3: {e}")))?;
        td3.state_dim = config.td3.state_dim;
        td3.action_dim = config.td3.action_dim;
        td3.action_bound = config.td3.action_bound;
        config.td3 = td3;
    }
    if let Some(t) = eecl_table {
        let mut eecl: NoveltyConfig = toml::Value::Table(t)
            .try_into()
            .map_err(|e| syntax(origin, format!("eecl: {e}")))?;
        eecl.state_dim = config.td3.state_dim;
        config.eecl = Some(eecl);
    }

    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => HarnessError::ConfigMissing {
            path: path.to_path_buf(),
        },
        _ => HarnessError::io(path, e),
    })?;
    parse_config(&text, path)
}
