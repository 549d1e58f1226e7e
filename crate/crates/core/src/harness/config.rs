use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ingest::CsvSchema;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Heterogeneity,
    QuerySetSize,
    DatabaseScaling,
    CutScaling,
    BoundsTable,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Heterogeneity => "heterogeneity",
            ExperimentKind::QuerySetSize => "query_set_size",
            ExperimentKind::DatabaseScaling => "database_scaling",
            ExperimentKind::CutScaling => "cut_scaling",
            ExperimentKind::BoundsTable => "bounds_table",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphModel {
    #[default]
    ErdosRenyi,
    PowerLaw,
}

/// A database read from CSV instead of drawn at random.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub path: PathBuf,
    pub schema: CsvSchema,
}

/// Experiment configuration, read from JSON. Every field except
/// `experiment` has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Database size for the heterogeneity and query-set-size sweeps.
    pub n: usize,
    /// Database sizes for database scaling and the bounds table.
    pub n_grid: Vec<usize>,
    /// Number of binary attributes.
    pub l: u32,
    /// When set, databases use only codes below `levels` and row functions
    /// are drawn on those codes, extended by repeating the last level.
    pub levels: Option<usize>,
    pub epsilon: f64,
    pub query_count: usize,
    /// Defaults to `[1, n / 2]`.
    pub heterogeneity_grid: Option<Vec<usize>>,
    pub set_sizes: Vec<usize>,
    pub vertex_grid: Vec<usize>,
    pub graph_model: GraphModel,
    pub edge_probability: f64,
    pub attachment: usize,
    pub cuts: usize,
    pub runs: usize,
    pub seed: u64,
    /// Databases per run in the query-set-size sweep; the worst case is
    /// taken over all of them.
    pub database_count: usize,
    /// Use the proper (clamped) estimator instead of the unbiased one.
    pub proper: bool,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lipschitz: Option<f64>,
    pub input: Option<InputSpec>,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::BoundsTable,
            n: 2048,
            n_grid: (10..=16).map(|k| 1usize << k).collect(),
            l: 3,
            levels: None,
            epsilon: 1.0,
            query_count: 200,
            heterogeneity_grid: None,
            set_sizes: vec![64, 1024, 16384],
            vertex_grid: vec![64, 128, 256, 512],
            graph_model: GraphModel::ErdosRenyi,
            edge_probability: 0.05,
            attachment: 4,
            cuts: 100,
            runs: 20,
            seed: 0,
            database_count: 1,
            proper: false,
            a: 0.0,
            b: 1.0,
            c: 1.0,
            lipschitz: None,
            input: None,
            output: None,
        }
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            ..ExperimentConfig::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| config_error(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn heterogeneity_values(&self) -> Vec<usize> {
        self.heterogeneity_grid
            .clone()
            .unwrap_or_else(|| vec![1, (self.n / 2).max(1)])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(config_error(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.l == 0 || self.l > crate::queries::TABLE_CAP_BITS {
            return Err(config_error(format!(
                "l must lie in [1, {}], got {}",
                crate::queries::TABLE_CAP_BITS,
                self.l
            )));
        }
        if self.runs == 0 {
            return Err(config_error("runs must be >= 1"));
        }
        if let Some(m) = self.levels {
            if m < 2 || m as u64 > 1u64 << self.l {
                return Err(config_error(format!("levels = {m} outside [2, 2^l]")));
            }
        }
        let nonempty = |name: &str, v: &[usize]| -> Result<()> {
            if v.is_empty() {
                return Err(config_error(format!("{name} must be nonempty")));
            }
            if v.contains(&0) {
                return Err(config_error(format!("{name} entries must be >= 1")));
            }
            Ok(())
        };
        match self.experiment {
            ExperimentKind::Heterogeneity => {
                self.check_queries()?;
                let grid = self.heterogeneity_values();
                nonempty("heterogeneity_grid", &grid)?;
                if self.input.is_none() {
                    for h in grid {
                        if !self.n.is_multiple_of(h) {
                            return Err(config_error(format!(
                                "heterogeneity {h} does not divide n = {}",
                                self.n
                            )));
                        }
                    }
                }
            }
            ExperimentKind::QuerySetSize => {
                self.check_queries()?;
                nonempty("set_sizes", &self.set_sizes)?;
                if self.set_sizes.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(config_error("set_sizes must be strictly ascending"));
                }
                if self.database_count == 0 {
                    return Err(config_error("database_count must be >= 1"));
                }
            }
            ExperimentKind::DatabaseScaling => {
                self.check_queries()?;
                nonempty("n_grid", &self.n_grid)?;
                if let Some(grid) = &self.heterogeneity_grid {
                    nonempty("heterogeneity_grid", grid)?;
                    for &n in &self.n_grid {
                        if n % grid[0] != 0 {
                            return Err(config_error(format!(
                                "heterogeneity {} does not divide n = {n}",
                                grid[0]
                            )));
                        }
                    }
                }
            }
            ExperimentKind::CutScaling => {
                nonempty("vertex_grid", &self.vertex_grid)?;
                if self.vertex_grid.iter().any(|&v| v < 2) {
                    return Err(config_error("vertex_grid entries must be >= 2"));
                }
                if self.cuts == 0 {
                    return Err(config_error("cuts must be >= 1"));
                }
                if !(0.0..=1.0).contains(&self.edge_probability) {
                    return Err(config_error("edge_probability must lie in [0, 1]"));
                }
            }
            ExperimentKind::BoundsTable => {
                nonempty("n_grid", &self.n_grid)?;
            }
        }
        Ok(())
    }

    fn check_queries(&self) -> Result<()> {
        if self.query_count == 0 {
            return Err(config_error("query set is empty (query_count = 0)"));
        }
        if self.input.is_none() && self.n == 0 {
            return Err(config_error("n must be >= 1"));
        }
        Ok(())
    }
}
