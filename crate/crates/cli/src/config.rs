//! Run configuration: defaults, then the TOML file, then `TEP_BUDGET`,
//! then flags.

use std::path::Path;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use serde::Deserialize;
use tep_core::space::{Budget, BUDGET_ENV};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    format: Option<Format>,
    jobs: Option<usize>,
    #[serde(default)]
    budget: BudgetFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BudgetFile {
    enumeration_cap: Option<u64>,
    samples: Option<u64>,
    seed: Option<u64>,
    path_cap: Option<u64>,
    search_cap: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML file with `format`, `jobs` and a `[budget]` table.
    #[arg(long, global = true, env = "TEP_CONFIG")]
    pub config: Option<std::path::PathBuf>,
    /// Worker threads for exhaustive runs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Report format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Largest k^m enumerated exhaustively.
    #[arg(long, global = true)]
    pub enumeration_cap: Option<u64>,
    /// Inputs drawn when k^m exceeds the enumeration cap.
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    /// Seed of the sampling fallback.
    #[arg(long, global = true)]
    pub sample_seed: Option<u64>,
    #[arg(long, global = true)]
    pub path_cap: Option<u64>,
    /// Configurations visited per pebbling search budget.
    #[arg(long, global = true)]
    pub search_cap: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub format: Format,
    pub jobs: Option<usize>,
    pub budget: Budget,
}

fn positive(name: &str, v: u64) -> anyhow::Result<u64> {
    if v == 0 {
        bail!("{name} must be positive");
    }
    Ok(v)
}

impl RunConfig {
    pub fn resolve(args: &GlobalArgs) -> anyhow::Result<Self> {
        let file = match &args.config {
            Some(path) => load(path)?,
            None => FileConfig::default(),
        };
        let mut budget = Budget::default();
        let b = &file.budget;
        let layers = [
            (&mut budget.enumeration_cap, b.enumeration_cap, args.enumeration_cap, "enumeration_cap"),
            (&mut budget.samples, b.samples, args.samples, "samples"),
            (&mut budget.path_cap, b.path_cap, args.path_cap, "path_cap"),
            (&mut budget.search_cap, b.search_cap, args.search_cap, "search_cap"),
        ];
        for (slot, from_file, from_flag, name) in layers {
            if let Some(v) = from_file {
                *slot = positive(name, v)?;
            }
            if name == "enumeration_cap" {
                if let Ok(raw) = std::env::var(BUDGET_ENV) {
                    let v = raw.trim().parse().with_context(|| format!("{BUDGET_ENV}={raw:?} is not an integer"))?;
                    *slot = positive(BUDGET_ENV, v)?;
                }
            }
            if let Some(v) = from_flag {
                *slot = positive(name, v)?;
            }
        }
        budget.seed = args.sample_seed.or(b.seed).unwrap_or(budget.seed);
        let jobs = args.jobs.or(file.jobs);
        if jobs == Some(0) {
            bail!("jobs must be positive");
        }
        Ok(Self { format: args.format.or(file.format).unwrap_or_default(), jobs, budget })
    }
}

fn load(path: &Path) -> anyhow::Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
