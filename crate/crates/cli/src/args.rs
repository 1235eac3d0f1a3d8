use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "cwta",
    version,
    about = "Weighted trajectory risk-benefit analysis"
)]
pub struct Cli {
    /// Worker threads; never changes numeric output. Defaults to the number of logical cores.
    #[arg(long, global = true, env = "CWTA_WORKERS")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one randomized trial and test it.
    Simulate(SimulateArgs),
    /// Monte Carlo power over sample sizes and hazard ratios, or over 3x3 scenarios.
    Power(PowerArgs),
    /// Compare each cohort of daily patient records against all other cohorts.
    Analyze(AnalyzeArgs),
    /// Fit control-arm response rates of the 6x5 model to best-response targets.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    #[value(name = "3x3")]
    M3x3,
    #[value(name = "6x5")]
    M6x5,
}

impl From<ModelArg> for cwta_core::sim::Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::M3x3 => cwta_core::sim::Model::M3x3,
            ModelArg::M6x5 => cwta_core::sim::Model::M6x5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EndpointArg {
    Rba,
    Efficacy,
    Both,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Defaults to the --config model, else 3x3.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// 3x3 case i, ii, iii, iv or v.
    #[arg(long, conflicts_with_all = ["hr_eff", "hr_tox"])]
    pub scenario: Option<String>,
    #[arg(long)]
    pub hr_eff: Option<f64>,
    #[arg(long)]
    pub hr_tox: Option<f64>,
    /// Total sample size (both arms).
    #[arg(long)]
    pub n: usize,
    /// Trial duration in weeks; defaults to the model's shipped value.
    #[arg(long)]
    pub weeks: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulation config JSON replacing the shipped baseline.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rba")]
    pub endpoint: EndpointArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Defaults to 3x3 with --scenarios, otherwise 6x5.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Sample sizes as start:stop:step or a single value.
    #[arg(long, default_value = "20:320:30")]
    pub ss: String,
    #[arg(long, default_value = "0.6,0.7,0.8")]
    pub hr_eff_list: String,
    /// Defaults to the efficacy list; a single value applies to every efficacy HR.
    #[arg(long)]
    pub hr_tox_list: Option<String>,
    #[arg(long, value_enum, default_value = "both")]
    pub endpoint: EndpointArg,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// 3x3 scenario list (e.g. "i,ii,iii" or "i..v"); switches to a bar chart at a fixed --n.
    #[arg(long)]
    pub scenarios: Option<String>,
    /// Sample size for --scenarios; defaults to the model's shipped value.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub weeks: Option<u32>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Normal,
    /// Exact enumeration when the number of labellings is at most --exact-limit, else sampled.
    Permutation,
    /// Always enumerate every labelling.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GapPolicyArg {
    #[value(name = "carry_forward", alias = "carry-forward")]
    CarryForward,
    Strict,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("which").required(true).args(["cohort", "all_cohorts"])))]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// "6x5" or a path to a custom matrix JSON with 6 rows and 5 columns.
    #[arg(long, default_value = "6x5")]
    pub matrix: String,
    #[arg(long)]
    pub cohort: Option<String>,
    #[arg(long)]
    pub all_cohorts: bool,
    #[arg(long, value_enum, default_value = "permutation")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 10_000)]
    pub perms: u64,
    #[arg(long, default_value_t = 2_000_000)]
    pub exact_limit: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "carry_forward")]
    pub gap_policy: GapPolicyArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Base 6x5 config; defaults to the shipped one.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.10)]
    pub cr: f64,
    #[arg(long, default_value_t = 0.50)]
    pub pr: f64,
    #[arg(long, default_value_t = 0.02)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 20_000)]
    pub patients: usize,
    #[arg(long, default_value_t = 0x00C0_FFEE)]
    pub seed: u64,
    /// Output config file.
    #[arg(long)]
    pub out: PathBuf,
}
