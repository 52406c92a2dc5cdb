use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hdplab_core::{BaseDistribution, Params, TestFunction};
use serde::Serialize;

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "hdplab", version, about = "Hierarchical Dirichlet process simulation and large-deviation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "HDPLAB_THREADS", value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,

    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw one coupled pair of stick-breaking weight sequences on shared atoms.
    Sample(SampleArgs),
    /// Monte Carlo check of the stick moments and of Var<Xi, f>.
    Moments(MomentsArgs),
    /// Law-of-large-numbers sweep along a concentration grid.
    Lln(LlnArgs),
    /// Rate function I on the infinite simplex.
    RateI(RateIArgs),
    /// Partition-level rate function J.
    RateJ(RateJArgs),
    /// Ball probabilities and empirical rates for two-cell partitions.
    Ldp(LdpArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Concentrations {
    /// Level-one concentration.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Level-two concentration.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Ratio alpha / beta.
    #[arg(long)]
    pub c: Option<f64>,
}

impl Concentrations {
    pub fn params(&self) -> Result<Params, String> {
        let p = match (self.alpha, self.beta, self.c) {
            (Some(a), Some(b), None) => Params::from_concentrations(a, b),
            (Some(a), Some(b), Some(c)) => {
                if ((a / b) - c).abs() > 1e-12 * c.abs() {
                    return Err(format!("--c {c} disagrees with --alpha {a} / --beta {b}"));
                }
                Params::from_concentrations(a, b)
            }
            (None, Some(b), Some(c)) => Params::new(b, c),
            (Some(a), None, Some(c)) => Params::from_concentrations(a, a / c),
            _ => return Err("give two of --alpha, --beta, --c".into()),
        };
        p.map_err(|e| e.to_string())
    }
}

/// Base distribution on [0, 1]: `uniform`, `beta:A,B`, `point:X` or
/// `atoms:X1@M1,X2@M2,...`.
#[derive(Debug, Clone, Serialize)]
#[serde(into = "String")]
pub struct BaseArg {
    pub text: String,
    #[serde(skip)]
    pub dist: BaseDistribution,
}

impl From<BaseArg> for String {
    fn from(b: BaseArg) -> String {
        b.text
    }
}

fn floats(list: &str) -> Result<Vec<f64>, String> {
    list.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

pub fn parse_base(s: &str) -> Result<BaseArg, String> {
    let dist = if s == "uniform" {
        BaseDistribution::Uniform
    } else if let Some(rest) = s.strip_prefix("beta:") {
        match floats(rest)?.as_slice() {
            [a, b] => BaseDistribution::beta(*a, *b).map_err(|e| e.to_string())?,
            _ => return Err("beta:A,B takes two shapes".into()),
        }
    } else if let Some(rest) = s.strip_prefix("point:") {
        let x = rest.parse::<f64>().map_err(|e| e.to_string())?;
        BaseDistribution::dirac(x).map_err(|e| e.to_string())?
    } else if let Some(rest) = s.strip_prefix("atoms:") {
        let mut points = Vec::new();
        let mut masses = Vec::new();
        for pair in rest.split(',') {
            let (x, m) = pair.split_once('@').ok_or_else(|| format!("{pair:?} is not X@M"))?;
            points.push(x.trim().parse::<f64>().map_err(|e| e.to_string())?);
            masses.push(m.trim().parse::<f64>().map_err(|e| e.to_string())?);
        }
        BaseDistribution::finite_support(points, masses).map_err(|e| e.to_string())?
    } else {
        return Err(format!("unknown base {s:?}"));
    };
    Ok(BaseArg { text: s.to_string(), dist })
}

/// Test function: `x`, `x^K`, `cos:K` (cos(Kπx)) or `const:C`.
#[derive(Debug, Clone, Serialize)]
#[serde(into = "String")]
pub struct FunctionArg {
    pub text: String,
    #[serde(skip)]
    pub f: TestFunction,
}

impl From<FunctionArg> for String {
    fn from(f: FunctionArg) -> String {
        f.text
    }
}

pub fn parse_function(s: &str) -> Result<FunctionArg, String> {
    let f = if s == "x" {
        TestFunction::identity()
    } else if let Some(k) = s.strip_prefix("x^") {
        TestFunction::Power(k.parse().map_err(|e| format!("{k:?}: {e}"))?)
    } else if let Some(k) = s.strip_prefix("cos:") {
        TestFunction::Cosine(k.parse().map_err(|e| format!("{k:?}: {e}"))?)
    } else if let Some(c) = s.strip_prefix("const:") {
        TestFunction::Constant(c.parse().map_err(|e| format!("{c:?}: {e}"))?)
    } else {
        return Err(format!("unknown test function {s:?}"));
    };
    Ok(FunctionArg { text: s.to_string(), f })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub conc: Concentrations,
    #[arg(long, default_value = "uniform", value_parser = parse_base)]
    pub base: BaseArg,
    /// Exact number of sticks.
    #[arg(long, conflicts_with = "eps")]
    pub n: Option<usize>,
    /// Expected unbroken mass at truncation.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MomentsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub conc: Concentrations,
    /// Monte Carlo replicas.
    #[arg(long, default_value_t = 200_000)]
    pub n: usize,
    /// Largest stick index checked.
    #[arg(long, default_value_t = 5)]
    pub max_index: usize,
    #[arg(long, default_value = "uniform", value_parser = parse_base)]
    pub base: BaseArg,
    /// Test function for the variance check.
    #[arg(long, default_value = "x", value_parser = parse_function)]
    pub test_fn: FunctionArg,
    /// Truncation tolerance for the variance check.
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LlnArgs {
    /// Ratio alpha / beta along the grid.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Increasing level-one concentrations; beta = alpha / c.
    #[arg(long, value_delimiter = ',', default_value = "10,20,40,80")]
    pub grid: Vec<f64>,
    /// Monte Carlo replicas per grid point.
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Number of test functions in the weak-metric surrogate.
    #[arg(long, default_value_t = 8)]
    pub terms: usize,
    #[arg(long, default_value = "uniform", value_parser = parse_base)]
    pub base: BaseArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RateIArgs {
    /// Weight prefix z_1,...,z_m.
    #[arg(long, value_delimiter = ',', required = true)]
    pub z: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 50)]
    pub m_max: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RateJArgs {
    /// Base cell masses.
    #[arg(long, value_delimiter = ',', required = true)]
    pub r: Vec<f64>,
    /// Target cell masses.
    #[arg(long, value_delimiter = ',', required = true)]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LdpMode {
    Ball,
    ZeroCell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// delta = gamma^(-1/4)
    Quarter,
    /// delta fixed at --delta
    Fixed,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LdpArgs {
    #[arg(long, value_enum, default_value_t = LdpMode::Ball)]
    pub mode: LdpMode,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Base mass of the first cell.
    #[arg(long, default_value_t = 0.5)]
    pub r1: f64,
    /// Ball center (level-one mass, level-two mass).
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.2")]
    pub center: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, value_delimiter = ',', default_value = "100,200,400,800")]
    pub gamma_grid: Vec<f64>,
    /// Radius schedule in zero-cell mode.
    #[arg(long, value_enum, default_value_t = Schedule::Quarter)]
    pub schedule: Schedule,
    /// Spacing of the reference-infimum grid.
    #[arg(long, default_value_t = 1e-4)]
    pub grid_step: f64,
    /// Monte Carlo samples for a cross-check of the quadrature; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub mc_samples: usize,
    /// Speed of the Monte Carlo cross-check.
    #[arg(long, default_value_t = 50.0)]
    pub mc_gamma: f64,
}
