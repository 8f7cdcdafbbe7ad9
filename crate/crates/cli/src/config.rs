use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use evograph_core::params::DEFAULT_EPSILON_FRACTION;
use evograph_core::{ColdStart, DerivedConstants, ModelParams, Probability, SimConfig, TrialPlan};

/// A probability as written in the config file: a JSON number or a string
/// such as `"3/5"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbabilityLiteral {
    Number(f64),
    Text(String),
}

impl ProbabilityLiteral {
    fn parse(&self) -> Result<Probability> {
        Ok(match self {
            ProbabilityLiteral::Number(x) => Probability::Float(*x),
            ProbabilityLiteral::Text(s) => s.parse()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ColdStartEdges {
    /// One edge to a uniformly chosen vertex.
    One,
    /// `m` parallel edges to one uniformly chosen vertex.
    M,
}

/// Contents of the JSON config file. Every field is optional; flags and
/// environment variables fill in or override.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub alpha: Option<ProbabilityLiteral>,
    pub alpha1: Option<ProbabilityLiteral>,
    pub m: Option<u32>,
    pub horizon: Option<u64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub epsilon_fraction: Option<f64>,
    pub cold_start_edges: Option<ColdStartEdges>,
    pub snapshots: Option<Vec<u64>>,
    pub kmax: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Run settings shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON config file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Probability of a growth substep, 1/2 < alpha <= 1 (e.g. 0.6 or 3/5)
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    /// Probability of a vertex substep, 0 < alpha1 <= alpha
    #[arg(long, global = true)]
    pub alpha1: Option<String>,
    /// Edges per insertion or deletion substep
    #[arg(long, short = 'm', global = true)]
    pub m: Option<u32>,
    /// Final time T
    #[arg(long, short = 'T', global = true)]
    pub horizon: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Base seed [env: EVOGRAPH_SEED]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub epsilon_fraction: Option<f64>,
    #[arg(long, value_enum, global = true)]
    pub cold_start_edges: Option<ColdStartEdges>,
    /// Comma-separated snapshot times (default: 2^10, 2^11, ... and T)
    #[arg(long, value_delimiter = ',', global = true)]
    pub snapshots: Option<Vec<u64>>,
    /// Truncation degree for theory curves
    #[arg(long, global = true)]
    pub kmax: Option<usize>,
    /// Output directory [env: EVOGRAPH_OUT]
    #[arg(long, short = 'o', global = true)]
    pub out: Option<PathBuf>,
}

/// Fully resolved configuration, echoed into every manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub alpha: String,
    pub alpha1: String,
    pub m: u32,
    pub horizon: u64,
    pub trials: u64,
    pub seed: u64,
    pub epsilon_fraction: f64,
    pub cold_start_edges: ColdStartEdges,
    pub snapshots: Option<Vec<u64>>,
    pub kmax: Option<usize>,
    pub out: PathBuf,
    #[serde(skip)]
    pub params: ModelParams,
    #[serde(skip)]
    pub constants: DerivedConstants,
}

pub const DEFAULT_HORIZON: u64 = 100_000;
pub const DEFAULT_TRIALS: u64 = 20;

fn read_file(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Environment overrides, read once by the caller.
#[derive(Debug, Clone, Default)]
pub struct Env {
    pub seed: Option<String>,
    pub out: Option<String>,
}

impl Env {
    pub fn from_process() -> Self {
        Env {
            seed: std::env::var("EVOGRAPH_SEED").ok(),
            out: std::env::var("EVOGRAPH_OUT").ok(),
        }
    }
}

impl RunArgs {
    /// Layers file < environment < flags and validates the result.
    pub fn resolve(&self, env: &Env) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let literal = |flag: &Option<String>, from_file: &Option<ProbabilityLiteral>, name: &str| {
            flag.clone()
                .map(ProbabilityLiteral::Text)
                .or_else(|| from_file.clone())
                .ok_or_else(|| anyhow!("missing {name} (set it in the config file or with --{name})"))
        };
        let alpha = literal(&self.alpha, &file.alpha, "alpha")?;
        let alpha1 = literal(&self.alpha1, &file.alpha1, "alpha1")?;
        let m = self
            .m
            .or(file.m)
            .ok_or_else(|| anyhow!("missing m (set it in the config file or with --m)"))?;
        let env_seed = env
            .seed
            .as_deref()
            .map(|s| s.trim().parse::<u64>().with_context(|| format!("EVOGRAPH_SEED = {s:?}")))
            .transpose()?;
        let seed = self.seed.or(env_seed).or(file.seed).unwrap_or(0);
        let out = self
            .out
            .clone()
            .or(env.out.as_ref().map(PathBuf::from))
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("evograph-out"));

        let (pa, pa1) = (alpha.parse()?, alpha1.parse()?);
        let params = ModelParams::new(pa, pa1, m)?;
        let horizon = self.horizon.or(file.horizon).unwrap_or(DEFAULT_HORIZON);
        if horizon < 2 {
            bail!("horizon = {horizon} violates T >= 2");
        }
        let trials = self.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS);
        if trials < 1 {
            bail!("trials = 0 violates trials >= 1");
        }
        let epsilon_fraction = self
            .epsilon_fraction
            .or(file.epsilon_fraction)
            .unwrap_or(DEFAULT_EPSILON_FRACTION);
        let constants = params.derive(epsilon_fraction)?;
        Ok(RunConfig {
            alpha: pa.to_string(),
            alpha1: pa1.to_string(),
            m,
            horizon,
            trials,
            seed,
            epsilon_fraction,
            cold_start_edges: self
                .cold_start_edges
                .or(file.cold_start_edges)
                .unwrap_or(ColdStartEdges::One),
            snapshots: self.snapshots.clone().or(file.snapshots),
            kmax: self.kmax.or(file.kmax),
            out,
            params,
            constants,
        })
    }
}

impl RunConfig {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            cold_start: match self.cold_start_edges {
                ColdStartEdges::One => ColdStart::One,
                ColdStartEdges::M => ColdStart::M,
            },
        }
    }

    pub fn plan(&self) -> TrialPlan {
        let plan = TrialPlan::new(self.horizon).expect("horizon >= 2");
        match &self.snapshots {
            Some(times) => {
                let mut times = times.clone();
                times.push(self.horizon);
                plan.with_snapshots(times)
            }
            None => plan,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(alpha: &str, alpha1: &str, m: u32) -> RunArgs {
        RunArgs {
            alpha: Some(alpha.into()),
            alpha1: Some(alpha1.into()),
            m: Some(m),
            ..Default::default()
        }
    }

    #[test]
    fn flags_beat_env_beat_defaults() {
        let env = Env {
            seed: Some("5".into()),
            out: Some("/tmp/x".into()),
        };
        let c = args("0.6", "0.4", 2).resolve(&env).unwrap();
        assert_eq!((c.seed, c.out.clone()), (5, PathBuf::from("/tmp/x")));
        assert_eq!(c.horizon, DEFAULT_HORIZON);
        let mut a = args("0.6", "0.4", 2);
        a.seed = Some(9);
        assert_eq!(a.resolve(&env).unwrap().seed, 9);
    }

    #[test]
    fn rejects_bad_values() {
        let env = Env::default();
        let err = args("0.5", "0.3", 1).resolve(&env).unwrap_err();
        assert!(err.to_string().contains("1/2 < alpha <= 1"), "{err}");
        assert!(args("0.6", "0.7", 1).resolve(&env).is_err());
        let mut a = args("0.6", "0.4", 2);
        a.horizon = Some(1);
        assert!(a.resolve(&env).is_err());
        assert!(RunArgs::default().resolve(&env).is_err());
    }

    #[test]
    fn file_literals() {
        let f: FileConfig =
            serde_json::from_str(r#"{"alpha": "3/5", "alpha1": 0.4, "m": 2, "cold_start_edges": "m"}"#)
                .unwrap();
        assert_eq!(f.alpha, Some(ProbabilityLiteral::Text("3/5".into())));
        assert_eq!(f.cold_start_edges, Some(ColdStartEdges::M));
        assert!(serde_json::from_str::<FileConfig>(r#"{"alpah": 1}"#).is_err());
    }

    #[test]
    fn exact_inputs_hit_criticality() {
        let c = args("3/5", "2/5", 2).resolve(&Env::default()).unwrap();
        assert_eq!(c.constants.regime, evograph_core::RegimeLabel::Critical);
        assert_eq!(c.alpha, "3/5");
    }
}
