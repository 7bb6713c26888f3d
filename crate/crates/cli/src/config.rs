//! Run configuration: everything needed to reproduce a report.

use std::path::{Path, PathBuf};

use cantor_ft::suite::Budget;
use cantor_ft::{Schedule, ScheduleSpec};
use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Seed used whenever none is given.
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schedule: ScheduleSource,
    pub seed: u64,
    pub budget: Budget,
    /// Worker threads; all available cores when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schedule: ScheduleSource::default(),
            seed: DEFAULT_SEED,
            budget: Budget::Desk,
            threads: None,
            tolerances: Tolerances::default(),
            output: OutputConfig::default(),
            command: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSource {
    /// Named preset, used unless `file` is set.
    pub preset: String,
    /// TOML schedule description.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Generations materialized for presets.
    pub k_cap: usize,
}

impl Default for ScheduleSource {
    fn default() -> Self {
        ScheduleSource { preset: "default".into(), file: None, k_cap: 200 }
    }
}

impl ScheduleSource {
    pub fn resolve(&self) -> Result<ScheduleSpec, CliError> {
        match &self.file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                ScheduleSpec::from_toml(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
            }
            None => ScheduleSpec::preset(&self.preset, self.k_cap).map_err(|e| CliError::Input(e.to_string())),
        }
    }

    pub fn build(&self) -> Result<(ScheduleSpec, Schedule), CliError> {
        let spec = self.resolve()?;
        let s = Schedule::from_spec(spec.clone()).map_err(|e| CliError::Input(e.to_string()))?;
        Ok((spec, s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_level: u32,
    /// Target for series tails when `kmax` is chosen automatically.
    pub tail_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { abs_tol: 1e-9, rel_tol: 1e-11, max_level: 8, tail_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for `<stem>.json` / `<stem>.csv`; standard output when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Interval generations as exact rationals.
    Construct(ConstructArgs),
    /// The sign function at a point.
    EvalG(EvalGArgs),
    /// The Fourier transform of the one-dimensional sign function on a grid.
    EvalFt(EvalFtArgs),
    /// Truncated norms of the majorant and the per-scale integrals.
    Norms(NormsArgs),
    /// Covering estimates and Frostman ratios per scale.
    Dimension(DimensionArgs),
    /// Box pairs shrinking to a point whose averages stay apart.
    Lebesgue(LebesgueArgs),
    /// Empirical decay of the natural measure's transform.
    Decay(DecayArgs),
    /// Numerical checks of the cosine-product bounds, or the whole acceptance suite.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Exact invariants and asymptotic trends of the schedule.
    ValidateSchedule(ValidateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Construct(_) => "construct",
            Command::EvalG(_) => "eval-g",
            Command::EvalFt(_) => "eval-ft",
            Command::Norms(_) => "norms",
            Command::Dimension(_) => "dimension",
            Command::Lebesgue(_) => "lebesgue",
            Command::Decay(_) => "decay",
            Command::Verify(VerifyCommand::Lemma31(_)) => "verify-lemma31",
            Command::Verify(VerifyCommand::Lemma32(_)) => "verify-lemma32",
            Command::Verify(VerifyCommand::All(_)) => "verify-all",
            Command::ValidateSchedule(_) => "validate-schedule",
        }
    }

    /// Fills defaults that depend on the global settings.
    fn resolve(&mut self, seed: u64) {
        if let Command::Verify(VerifyCommand::Lemma32(a)) = self {
            a.seed.get_or_insert(seed);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyCommand {
    /// Every subset of {1..n} against the product bound.
    Lemma31(Lemma31Args),
    /// Perturbed phases: the largest radius that survives sampling.
    Lemma32(Lemma32Args),
    /// The acceptance suite.
    All(AllArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructArgs {
    /// Last generation.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalGArgs {
    /// Comma-separated coordinates such as `1/2,3/2^4`.
    #[arg(long)]
    pub point: String,
    #[arg(long, default_value_t = 64)]
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalFtArgs {
    /// `x1,x2,...`, `log:min:max:n` or `pow:base:kmin:kmax`.
    #[arg(long, default_value = "0")]
    pub xi_grid: String,
    /// Last generation kept; chosen from the tail tolerance when unset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kmax: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsArgs {
    #[arg(long, default_value_t = 1.5)]
    pub p: f64,
    #[arg(long, default_value_t = 65536.0)]
    pub xi_max: f64,
    #[arg(long, default_value_t = 20)]
    pub kmax: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionArgs {
    #[arg(long, default_value_t = 12)]
    pub kmax: usize,
    #[arg(long, default_value_t = 1)]
    pub d: u32,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LebesgueArgs {
    /// Comma-separated coordinates.
    #[arg(long, default_value = "1/2")]
    pub point: String,
    /// Rational below `2^-m`.
    #[arg(long, default_value = "1/8")]
    pub eps: String,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Deepest generation searched; the schedule's `k_cap` when unset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.5, 1.0])]
    pub beta: Vec<f64>,
    #[arg(long, default_value = "log:1:1e6:400")]
    pub xi_grid: String,
    #[arg(long, default_value_t = 60)]
    pub kmax: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma31Args {
    #[arg(long, default_value_t = 6)]
    pub n: u32,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.5])]
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma32Args {
    #[arg(long, default_value_t = 3)]
    pub n: u32,
    #[arg(long, default_value_t = 2.0)]
    pub p0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 4)]
    pub samples: usize,
    /// The run's seed when unset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllArgs {}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateArgs {
    /// Last index checked; the schedule's `k_cap` when unset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub horizon: Option<usize>,
}

/// Flags accepted before or after the subcommand; each overrides the loaded config.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML config, or a JSON report whose embedded config is reused.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Named schedule: default, quarter, empty, single or pair.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// TOML schedule file; takes precedence over the preset.
    #[arg(long, global = true)]
    pub schedule: Option<PathBuf>,
    #[arg(long, global = true)]
    pub k_cap: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// desk, ci or deep.
    #[arg(long, global = true)]
    pub budget: Option<Budget>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_level: Option<u32>,
    #[arg(long, global = true)]
    pub tail_tol: Option<f64>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// File name stem; the command name when unset.
    #[arg(long, global = true)]
    pub stem: Option<String>,
}

impl GlobalArgs {
    /// Loads the base config (or defaults), then applies every flag that was given.
    pub fn resolve(&self, command: Option<Command>) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.preset {
            c.schedule.preset = p.clone();
            c.schedule.file = None;
        }
        if let Some(f) = &self.schedule {
            c.schedule.file = Some(f.clone());
        }
        macro_rules! set {
            ($($flag:ident => $($field:ident).+;)*) => {
                $(if let Some(v) = self.$flag.clone() { c.$($field).+ = v; })*
            };
        }
        set! {
            k_cap => schedule.k_cap;
            seed => seed;
            budget => budget;
            abs_tol => tolerances.abs_tol;
            rel_tol => tolerances.rel_tol;
            max_level => tolerances.max_level;
            tail_tol => tolerances.tail_tol;
        }
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        if self.out_dir.is_some() {
            c.output.dir = self.out_dir.clone();
        }
        if self.format.is_some() {
            c.output.format = self.format;
        }
        if self.stem.is_some() {
            c.output.stem = self.stem.clone();
        }
        if command.is_some() {
            c.command = command;
        }
        let seed = c.seed;
        if let Some(cmd) = c.command.as_mut() {
            cmd.resolve(seed);
        }
        Ok(c)
    }
}

#[derive(Deserialize)]
struct Embedded {
    config: RunConfig,
}

/// Reads a TOML config, or the config embedded in a JSON report.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let bad = |e: String| CliError::Input(format!("{}: {e}", path.display()));
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if v.get("config").is_some() {
            return serde_json::from_str::<Embedded>(&text).map(|e| e.config).map_err(|e| bad(e.to_string()));
        }
        return serde_json::from_str(&text).map_err(|e| bad(e.to_string()));
    }
    parse_config(&text).map_err(bad)
}

pub fn parse_config(text: &str) -> Result<RunConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

pub fn config_to_toml(c: &RunConfig) -> String {
    toml::to_string(c).expect("run config is always serializable")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("seed = 3\nbogus = 1\n").unwrap_err();
        assert!(err.contains("bogus"), "{err}");
        let err = parse_config("[tolerances]\nabs_tol = 1e-3\nrelative = 2\n").unwrap_err();
        assert!(err.contains("relative"), "{err}");
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_config("seed = 3\nbudget = \n").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        assert_eq!(parse_config(&config_to_toml(&c)).unwrap(), c);
        c.command = Some(Command::Verify(VerifyCommand::Lemma32(Lemma32Args { n: 3, p0: 2.0, eps: 0.5, samples: 4, seed: Some(9) })));
        c.threads = Some(2);
        c.output.format = Some(Format::Both);
        c.schedule.file = Some("s.toml".into());
        assert_eq!(parse_config(&config_to_toml(&c)).unwrap(), c);
        c.command = Some(Command::Decay(DecayArgs { beta: vec![0.25, 1.0], xi_grid: "log:1:10:3".into(), kmax: 5 }));
        assert_eq!(parse_config(&config_to_toml(&c)).unwrap(), c);
        c.command = Some(Command::Verify(VerifyCommand::All(AllArgs {})));
        assert_eq!(parse_config(&config_to_toml(&c)).unwrap(), c);
    }

    #[test]
    fn lemma32_seed_defaults_to_run_seed() {
        let cmd = Command::Verify(VerifyCommand::Lemma32(Lemma32Args { n: 2, p0: 2.0, eps: 1.0, samples: 1, seed: None }));
        let c = GlobalArgs { seed: Some(11), ..Default::default() }.resolve(Some(cmd)).unwrap();
        match c.command {
            Some(Command::Verify(VerifyCommand::Lemma32(a))) => assert_eq!(a.seed, Some(11)),
            other => panic!("{other:?}"),
        }
    }
}
