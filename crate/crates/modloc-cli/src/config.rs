//! Run configuration: a TOML document, overridable from the command line.

use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, ValueEnum};
use modloc::localization::BumpFamily;
use modloc::verification::{SuiteConfig, ToleranceProfile};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Md,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeConfig {
    /// States per interval. The first is the centred bump, the rest are
    /// seeded fixtures.
    pub bumps: usize,
    pub moment_free: bool,
    /// x-grid samples per bump.
    pub samples: usize,
    /// Points in the exported `(E, ψ̃₊)` curve.
    pub export_points: usize,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        LocalizeConfig { bumps: 1, moment_free: true, samples: 4096, export_points: 1024 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub out: Option<PathBuf>,
    pub format: Format,
    /// Representation artifact read by `localize` and `verify`.
    pub artifact: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub tol_profile: String,
    /// Omitted: all checks. Empty: none.
    pub scope: Option<Vec<String>>,
    pub suite: SuiteConfig,
    pub localize: LocalizeConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            format_version: CONFIG_FORMAT_VERSION,
            tol_profile: "default".into(),
            scope: None,
            suite: SuiteConfig::default(),
            localize: LocalizeConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let c: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if c.format_version != CONFIG_FORMAT_VERSION {
            return Err(CliError::Config(format!("unsupported config format_version {}", c.format_version)));
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn profile(&self) -> Result<ToleranceProfile, CliError> {
        ToleranceProfile::preset(&self.tol_profile).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Everything that can be rejected before computing.
    pub fn validate(&self) -> Result<(), CliError> {
        self.suite.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.profile()?;
        modloc::verification::resolve_scope(self.scope.as_deref()).map_err(|e| CliError::Config(e.to_string()))?;
        if self.localize.bumps == 0 || self.localize.samples < 16 {
            return Err(CliError::Config("localize needs bumps >= 1 and samples >= 16".into()));
        }
        Ok(())
    }
}

/// Flags shared by all subcommands. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Config file; defaults to $MODLOC_CONFIG.
    #[arg(long, env = "MODLOC_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Truncation size.
    #[arg(long = "M")]
    pub m: Option<usize>,
    #[arg(long)]
    pub beta_tilde: Option<f64>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long)]
    pub grid_emax: Option<f64>,
    /// Repeatable; replaces the configured intervals.
    #[arg(long, num_args = 2, value_names = ["A", "B"], action = ArgAction::Append, allow_negative_numbers = true)]
    pub interval: Vec<f64>,
    /// mollifier, sine-window or polynomial-window.
    #[arg(long)]
    pub bump: Option<BumpFamily>,
    /// Groups or check names; give the flag with no names for an empty scope.
    #[arg(long, num_args = 0..)]
    pub scope: Option<Vec<String>>,
    #[arg(long)]
    pub tol_profile: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    pub print_config: bool,
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let s = &mut c.suite;
        if let Some(v) = self.k {
            s.k = v;
        }
        if let Some(v) = self.beta {
            s.beta = v;
        }
        if let Some(v) = self.m {
            s.m = v;
        }
        if let Some(v) = self.beta_tilde {
            s.beta_tilde = v;
        }
        if let Some(v) = self.grid_n {
            s.grid_n = v;
        }
        if let Some(v) = self.grid_emax {
            s.grid_emax = v;
        }
        if !self.interval.is_empty() {
            s.intervals = self.interval.chunks(2).map(|p| [p[0], p[1]]).collect();
        }
        if let Some(v) = self.bump {
            s.bump_family = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = &self.scope {
            c.scope = Some(v.clone());
        }
        if let Some(v) = &self.tol_profile {
            c.tol_profile = v.clone();
        }
        if let Some(v) = &self.out {
            c.output.out = Some(v.clone());
        }
        if let Some(v) = self.format {
            c.output.format = v;
        }
        Ok(c)
    }
}
