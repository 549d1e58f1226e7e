//! Experiment sweeps, slope fits and CSV result emission.
//!
//! Random streams are keyed by grid value, run index and query index, so a
//! sweep's output depends only on its configuration and seed. Runs execute
//! in parallel and are reassembled in order before anything is reduced.

pub mod config;
pub mod ingest;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{cut_bound, BoundInputs, BoundTable};
use crate::error::{Error, Result};
use crate::estimators::{
    analytic_bound, mean_and_stderr, neumaier_sum, DistortionMeasure, EstimatorKind, PreparedEstimator,
};
use crate::graph::{answer_cut_fast, cut_value, random_bisection_cut, CutQuery, Graph};
use crate::mechanism::{sample_synthetic, MechanismParams};
use crate::model::{check_enumerable, DataUniverse, Database, RandomSource};
use crate::queries::{generate_random_level_query, generate_random_query, StatisticalQuery};

pub use config::{ExperimentConfig, ExperimentKind, GraphModel, InputSpec};
pub use ingest::{ingest_csv, ingest_reader, read_database, write_database, ColumnSchema, CsvSchema};

/// One grid point of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub grid_point: u64,
    /// Mean over runs of the largest distortion in the run.
    pub worst_case_distortion: f64,
    pub worst_case_stderr: f64,
    /// Mean distortion over all queries (or cuts) and runs.
    pub mean_distortion: f64,
    pub analytic_bound: f64,
    /// Mean absolute cut error over mean true cut size (cut sweeps only).
    pub relative_error: Option<f64>,
    /// Exactly enumerated worst-case mean error (micro graphs only).
    pub exact_value: Option<f64>,
    pub runs: usize,
    pub seed: u64,
}

/// Least-squares line `y = intercept + slope x` with the slope's standard
/// error from the residuals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

impl SlopeFit {
    /// Slope divided by its standard error.
    pub fn t_statistic(&self) -> f64 {
        self.slope / self.stderr
    }
}

/// Ordinary least squares; `None` with fewer than two distinct `x`.
/// The standard error is NaN with only two points.
pub fn ols_fit(xs: &[f64], ys: &[f64]) -> Option<SlopeFit> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return None;
    }
    let mx = neumaier_sum(xs.iter().copied()) / n as f64;
    let my = neumaier_sum(ys.iter().copied()) / n as f64;
    let sxx = neumaier_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    if sxx == 0.0 {
        return None;
    }
    let sxy = neumaier_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if n > 2 {
        let rss = neumaier_sum(xs.iter().zip(ys).map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        }));
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(SlopeFit {
        slope,
        stderr,
        intercept,
        points: n,
    })
}

/// What the fit regresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// `ln(worst case)` against `ln(grid point)`, one point per grid value.
    LogLog,
    /// Per-run worst case against `log2(grid point)`, one point per run.
    PerRunLog2,
    /// Per-run worst case against the grid point, one point per run.
    PerRunLinear,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub fit: Option<(FitKind, SlopeFit)>,
    /// Per grid point, the worst case of every run.
    pub per_run_worst: Vec<Vec<f64>>,
}

/// The bound evaluators at one `(n, l, epsilon, a, b, c)` point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsRow {
    pub inputs: BoundInputs,
    pub table: BoundTable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ExperimentOutput {
    Sweep(SweepOutput),
    Bounds(Vec<BoundsRow>),
}

/// Nine significant digits.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.8e}")
    }
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub const RESULT_HEADER: [&str; 10] = [
    "experiment",
    "grid_point",
    "worst_case_distortion",
    "worst_case_stderr",
    "mean_distortion",
    "analytic_bound",
    "relative_error",
    "exact_value",
    "runs",
    "seed",
];

pub const BOUNDS_HEADER: [&str; 14] = [
    "n",
    "l",
    "epsilon",
    "a",
    "b",
    "c",
    "lipschitz",
    "upper_squared",
    "upper_squared_proper",
    "upper_absolute",
    "upper_absolute_proper",
    "lower_asymptotic",
    "lower_finite_n",
    "continuous",
];

pub fn write_result_rows<W: Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(RESULT_HEADER)?;
    for r in rows {
        csv.write_record([
            r.experiment.clone(),
            r.grid_point.to_string(),
            format_float(r.worst_case_distortion),
            format_float(r.worst_case_stderr),
            format_float(r.mean_distortion),
            format_float(r.analytic_bound),
            format_opt(r.relative_error),
            format_opt(r.exact_value),
            r.runs.to_string(),
            r.seed.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_bounds_rows<W: Write>(w: W, rows: &[BoundsRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(BOUNDS_HEADER)?;
    for r in rows {
        let i = &r.inputs;
        let t = &r.table;
        csv.write_record([
            format!("{}", i.n),
            i.l.to_string(),
            format_float(i.epsilon),
            format_float(i.a),
            format_float(i.b),
            format_float(i.c),
            format_opt(i.lipschitz),
            format_float(t.upper_squared),
            format_float(t.upper_squared_proper),
            format_float(t.upper_absolute),
            format_float(t.upper_absolute_proper),
            format_float(t.lower_asymptotic),
            format_float(t.lower_finite_n),
            format_opt(t.continuous),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

impl ExperimentOutput {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        match self {
            ExperimentOutput::Sweep(s) => write_result_rows(w, &s.rows),
            ExperimentOutput::Bounds(b) => write_bounds_rows(w, b),
        }
    }

    /// Short human-readable summary (fit line), empty for bounds tables.
    pub fn summary(&self) -> String {
        match self {
            ExperimentOutput::Sweep(SweepOutput {
                fit: Some((kind, fit)), ..
            }) => format!(
                "fit ({kind:?}): slope {} ± {} over {} points",
                format_float(fit.slope),
                format_float(fit.stderr),
                fit.points
            ),
            _ => String::new(),
        }
    }
}

/// Run the experiment a configuration describes.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let rng = RandomSource::from_seed(config.seed);
    Ok(match config.experiment {
        ExperimentKind::Heterogeneity => ExperimentOutput::Sweep(run_heterogeneity_sweep(config, &rng)?),
        ExperimentKind::QuerySetSize => ExperimentOutput::Sweep(run_query_set_size_sweep(config, &rng)?),
        ExperimentKind::DatabaseScaling => ExperimentOutput::Sweep(run_database_scaling(config, &rng)?),
        ExperimentKind::CutScaling => ExperimentOutput::Sweep(run_cut_scaling(config, &rng)?),
        ExperimentKind::BoundsTable => ExperimentOutput::Bounds(bounds_table(config)?),
    })
}

fn base_database(config: &ExperimentConfig, n: usize, rng: &RandomSource) -> Result<Database> {
    if let Some(input) = &config.input {
        let x = ingest_csv(&input.path, &input.schema)?;
        if x.universe().bits() != config.l {
            return Err(Error::Config(format!(
                "input database has l = {} but the config says l = {}",
                x.universe().bits(),
                config.l
            )));
        }
        return Ok(x);
    }
    let universe = DataUniverse::new(config.l)?;
    let codes = config.levels.map_or(universe.cardinality(), |m| m as u64) as u32;
    let mut r = rng.rng();
    let rows = (0..n).map(|_| rand::Rng::gen_range(&mut r, 0..codes)).collect();
    Database::new(universe, rows)
}

fn make_query(
    config: &ExperimentConfig,
    universe: DataUniverse,
    n: usize,
    heterogeneity: usize,
    rng: &RandomSource,
) -> Result<StatisticalQuery> {
    match config.levels {
        Some(m) => generate_random_level_query(universe, n, heterogeneity, m, rng),
        None => generate_random_query(universe, n, heterogeneity, rng),
    }
}

fn estimator_kind(config: &ExperimentConfig) -> EstimatorKind {
    if config.proper {
        EstimatorKind::PROPER
    } else {
        EstimatorKind::Unbiased
    }
}

/// Result of one run at one grid point.
#[derive(Clone, Copy, Debug)]
struct RunStats {
    worst: f64,
    sum: f64,
    count: usize,
    bound: f64,
}

/// Release every database once, then score `count` fresh queries on the
/// releases. Returns the largest distortion over queries and databases.
#[allow(clippy::too_many_arguments)]
fn score_run(
    config: &ExperimentConfig,
    databases: &[Database],
    heterogeneity: usize,
    count: usize,
    measure: DistortionMeasure,
    query_rng: &RandomSource,
    release_rng: &RandomSource,
) -> Result<RunStats> {
    let universe = databases[0].universe();
    let params = MechanismParams::new(config.epsilon, universe)?;
    let kind = estimator_kind(config);
    let mut stats = RunStats {
        worst: 0.0,
        sum: 0.0,
        count: 0,
        bound: 0.0,
    };
    for (d, x) in databases.iter().enumerate() {
        let y = sample_synthetic(x, &params, &release_rng.child(d as u64))?;
        let (hx, hy) = (x.histogram(), y.histogram());
        let mut errors = Vec::with_capacity(count);
        for j in 0..count {
            let q = make_query(config, universe, x.len(), heterogeneity, &query_rng.child(j as u64))?;
            let est = PreparedEstimator::new(&q, &params, kind)?;
            let (qx, qy) = if q.is_linear() {
                (q.evaluate_histogram(&hx)?, q.evaluate_histogram(&hy)?)
            } else {
                (q.evaluate(x)?, q.evaluate(&y)?)
            };
            let e = measure.apply(est.from_raw(qy), qx);
            stats.worst = stats.worst.max(e);
            errors.push(e);
            stats.bound = stats.bound.max(analytic_bound(&q, &params, kind, measure)?);
        }
        stats.sum += neumaier_sum(errors);
        stats.count += count;
    }
    Ok(stats)
}

fn grid_row(
    config: &ExperimentConfig,
    grid_point: u64,
    runs: &[RunStats],
) -> (ResultRow, Vec<f64>) {
    let worst: Vec<f64> = runs.iter().map(|r| r.worst).collect();
    let (mean_worst, se) = mean_and_stderr(&worst);
    let total: usize = runs.iter().map(|r| r.count).sum();
    let mean = neumaier_sum(runs.iter().map(|r| r.sum)) / total as f64;
    let bound = runs.iter().map(|r| r.bound).fold(0.0, f64::max);
    (
        ResultRow {
            experiment: config.experiment.name().to_string(),
            grid_point,
            worst_case_distortion: mean_worst,
            worst_case_stderr: se,
            mean_distortion: mean,
            analytic_bound: bound,
            relative_error: None,
            exact_value: None,
            runs: config.runs,
            seed: config.seed,
        },
        worst,
    )
}

fn run_grid_point(
    config: &ExperimentConfig,
    databases: &[Database],
    heterogeneity: usize,
    count: usize,
    measure: DistortionMeasure,
    grid_point: u64,
    rng: &RandomSource,
) -> Result<(ResultRow, Vec<f64>)> {
    let queries = rng.labeled("queries").child(grid_point);
    let releases = rng.labeled("releases").child(grid_point);
    let runs = (0..config.runs)
        .into_par_iter()
        .map(|r| {
            score_run(
                config,
                databases,
                heterogeneity,
                count,
                measure,
                &queries.child(r as u64),
                &releases.child(r as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(grid_row(config, grid_point, &runs))
}

fn per_run_fit(kind: FitKind, grid: &[u64], per_run: &[Vec<f64>]) -> Option<(FitKind, SlopeFit)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&g, worst) in grid.iter().zip(per_run) {
        let x = match kind {
            FitKind::PerRunLog2 => (g as f64).log2(),
            _ => g as f64,
        };
        for &w in worst {
            xs.push(x);
            ys.push(w);
        }
    }
    ols_fit(&xs, &ys).map(|f| (kind, f))
}

fn log_log_fit(rows: &[ResultRow]) -> Option<(FitKind, SlopeFit)> {
    let xs: Vec<f64> = rows.iter().map(|r| (r.grid_point as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.worst_case_distortion.ln()).collect();
    ols_fit(&xs, &ys).map(|f| (FitKind::LogLog, f))
}

/// Worst-case absolute distortion over `query_count` random queries for
/// each heterogeneity value, on one database.
pub fn run_heterogeneity_sweep(config: &ExperimentConfig, rng: &RandomSource) -> Result<SweepOutput> {
    let x = base_database(config, config.n, &rng.labeled("database").child(0))?;
    let grid = config.heterogeneity_values();
    let mut rows = Vec::new();
    let mut per_run = Vec::new();
    for &h in &grid {
        if x.len() % h != 0 {
            return Err(Error::Config(format!("heterogeneity {h} does not divide n = {}", x.len())));
        }
        let (row, worst) = run_grid_point(
            config,
            std::slice::from_ref(&x),
            h,
            config.query_count,
            DistortionMeasure::Absolute,
            h as u64,
            rng,
        )?;
        rows.push(row);
        per_run.push(worst);
    }
    let grid_u: Vec<u64> = grid.iter().map(|&h| h as u64).collect();
    Ok(SweepOutput {
        fit: per_run_fit(FitKind::PerRunLinear, &grid_u, &per_run),
        rows,
        per_run_worst: per_run,
    })
}

/// Worst-case absolute distortion of linear queries for each query-set size.
/// Every run draws a fresh query set; with `database_count > 1` the worst
/// case is also taken over that many databases.
pub fn run_query_set_size_sweep(config: &ExperimentConfig, rng: &RandomSource) -> Result<SweepOutput> {
    let databases = (0..config.database_count)
        .map(|d| base_database(config, config.n, &rng.labeled("database").child(d as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut per_run = Vec::new();
    for &size in &config.set_sizes {
        let (row, worst) = run_grid_point(
            config,
            &databases,
            1,
            size,
            DistortionMeasure::Absolute,
            size as u64,
            rng,
        )?;
        rows.push(row);
        per_run.push(worst);
    }
    let grid: Vec<u64> = config.set_sizes.iter().map(|&s| s as u64).collect();
    Ok(SweepOutput {
        fit: per_run_fit(FitKind::PerRunLog2, &grid, &per_run),
        rows,
        per_run_worst: per_run,
    })
}

/// Worst-case squared distortion against database size.
pub fn run_database_scaling(config: &ExperimentConfig, rng: &RandomSource) -> Result<SweepOutput> {
    let h = config.heterogeneity_grid.as_ref().map_or(1, |g| g[0]);
    let mut rows = Vec::new();
    let mut per_run = Vec::new();
    for &n in &config.n_grid {
        let x = base_database(config, n, &rng.labeled("database").child(n as u64))?;
        let (row, worst) = run_grid_point(
            config,
            std::slice::from_ref(&x),
            h,
            config.query_count,
            DistortionMeasure::Squared,
            n as u64,
            rng,
        )?;
        rows.push(row);
        per_run.push(worst);
    }
    let fit = if rows.len() >= 2 { log_log_fit(&rows) } else { None };
    Ok(SweepOutput {
        fit,
        rows,
        per_run_worst: per_run,
    })
}

fn make_graph(config: &ExperimentConfig, v: usize, rng: &RandomSource) -> Result<Graph> {
    match config.graph_model {
        GraphModel::ErdosRenyi => Graph::erdos_renyi(v, config.edge_probability, true, rng),
        GraphModel::PowerLaw => Graph::power_law(v, config.attachment.min(v - 1).max(1), rng),
    }
}

/// Exact `E|answer - truth|` for a cut on a graph with `|V|^2 <= 12`.
pub fn exact_cut_error(g: &Graph, q: &CutQuery, epsilon: f64) -> Result<f64> {
    let x = g.encode();
    let n = x.len();
    let total = check_enumerable(x.universe(), n, 12)?;
    let params = MechanismParams::new(epsilon, x.universe())?;
    let truth = cut_value(g, q)? as f64;
    let terms = (0..total)
        .map(|code| {
            let y = Database::from_code(x.universe(), n, code);
            let p = crate::mechanism::exact_log_pmf(&x, &y, &params)?.exp();
            Ok(p * (answer_cut_fast(&y, q, epsilon)? - truth).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(neumaier_sum(terms))
}

/// Worst-case absolute cut error over random bisections for each `|V|`.
pub fn run_cut_scaling(config: &ExperimentConfig, rng: &RandomSource) -> Result<SweepOutput> {
    let mut rows = Vec::new();
    let mut per_run = Vec::new();
    for &v in &config.vertex_grid {
        let g = make_graph(config, v, &rng.labeled("graph").child(v as u64))?;
        let cut_rng = rng.labeled("cuts").child(v as u64);
        let cuts = (0..config.cuts)
            .map(|c| random_bisection_cut(&g, &cut_rng.child(c as u64)))
            .collect::<Result<Vec<_>>>()?;
        let truths = cuts
            .iter()
            .map(|q| cut_value(&g, q).map(|t| t as f64))
            .collect::<Result<Vec<_>>>()?;
        let x = g.encode();
        let params = MechanismParams::new(config.epsilon, x.universe())?;
        let releases = rng.labeled("releases").child(v as u64);
        let runs = (0..config.runs)
            .into_par_iter()
            .map(|r| {
                let y = sample_synthetic(&x, &params, &releases.child(r as u64))?;
                let errors = cuts
                    .iter()
                    .zip(&truths)
                    .map(|(q, &t)| Ok((answer_cut_fast(&y, q, config.epsilon)? - t).abs()))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(RunStats {
                    worst: errors.iter().copied().fold(0.0, f64::max),
                    sum: neumaier_sum(errors),
                    count: cuts.len(),
                    bound: 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (mut row, worst) = grid_row(config, v as u64, &runs);
        row.analytic_bound = cuts
            .iter()
            .map(|q| cut_bound(q.s().len(), q.t().len(), config.epsilon))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let mean_truth = neumaier_sum(truths.iter().copied()) / truths.len() as f64;
        row.relative_error = (mean_truth > 0.0).then(|| row.mean_distortion / mean_truth);
        if v * v <= 12 {
            let mut exact = 0.0f64;
            for q in &cuts {
                exact = exact.max(exact_cut_error(&g, q, config.epsilon)?);
            }
            row.exact_value = Some(exact);
        }
        rows.push(row);
        per_run.push(worst);
    }
    let fit = if rows.len() >= 2 { log_log_fit(&rows) } else { None };
    Ok(SweepOutput {
        fit,
        rows,
        per_run_worst: per_run,
    })
}

/// Every bound at each `n` of the grid.
pub fn bounds_table(config: &ExperimentConfig) -> Result<Vec<BoundsRow>> {
    config
        .n_grid
        .iter()
        .map(|&n| {
            let mut inputs = BoundInputs::new(n as f64, config.l, config.epsilon, config.a, config.b, config.c)?;
            if let Some(lip) = config.lipschitz {
                inputs = inputs.with_lipschitz(lip)?;
            }
            Ok(BoundsRow {
                table: BoundTable::evaluate(&inputs),
                inputs,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::upper_bound_absolute;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            n: 64,
            n_grid: vec![64, 256, 1024],
            query_count: 10,
            runs: 4,
            set_sizes: vec![1, 8, 32],
            vertex_grid: vec![2, 8, 16],
            cuts: 5,
            seed: 11,
            ..ExperimentConfig::new(kind)
        }
    }

    #[test]
    fn ols_recovers_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let f = ols_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!(f.stderr.abs() < 1e-12);
        assert!(ols_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
        assert!(ols_fit(&[1.0, 2.0], &[0.0, 1.0]).unwrap().stderr.is_nan());
    }

    #[test]
    fn float_format() {
        assert_eq!(format_float(0.0046826943768), "4.68269438e-3");
        assert_eq!(format_float(12.0), "1.20000000e1");
        assert_eq!(format_float(f64::NAN), "nan");
    }

    #[test]
    fn heterogeneity_rows_carry_bounds() {
        let c = small(ExperimentKind::Heterogeneity);
        let out = run_heterogeneity_sweep(&c, &RandomSource::from_seed(c.seed)).unwrap();
        assert_eq!(out.rows.len(), 2);
        for r in &out.rows {
            assert!(r.worst_case_distortion >= r.mean_distortion && r.mean_distortion >= 0.0);
            assert!(r.analytic_bound > 0.0);
        }
        // Linear queries at the normalized corner: b - a = c = 1.
        let corner = BoundInputs::normalized(64.0, 3, 1.0).unwrap();
        assert!((out.rows[0].analytic_bound - upper_bound_absolute(&corner, false)).abs() < 1e-15);
    }

    #[test]
    fn duplicate_and_singleton_query_sets() {
        let c = small(ExperimentKind::QuerySetSize);
        let rng = RandomSource::from_seed(c.seed);
        let out = run_query_set_size_sweep(&c, &rng).unwrap();
        assert_eq!(out.rows.len(), 3);
        assert_eq!(out.per_run_worst[0].len(), c.runs);
        // Size 1: the worst case is the single query's error.
        let r0 = &out.rows[0];
        assert!((r0.worst_case_distortion - r0.mean_distortion).abs() < 1e-15);
    }

    #[test]
    fn scaling_and_cut_sweeps_run() {
        let c = small(ExperimentKind::DatabaseScaling);
        let out = run_database_scaling(&c, &RandomSource::from_seed(1)).unwrap();
        assert!(out.fit.is_some());
        for r in &out.rows {
            assert!(r.worst_case_distortion <= r.analytic_bound);
        }
        let single = ExperimentConfig { n_grid: vec![256], ..c };
        let out = run_database_scaling(&single, &RandomSource::from_seed(1)).unwrap();
        assert!(out.fit.is_none() && out.rows.len() == 1);

        let c = small(ExperimentKind::CutScaling);
        let out = run_cut_scaling(&c, &RandomSource::from_seed(1)).unwrap();
        let micro = &out.rows[0];
        let exact = micro.exact_value.unwrap();
        assert!(exact <= micro.analytic_bound);
        assert!(out.rows[1].exact_value.is_none());
    }

    #[test]
    fn experiment_output_is_deterministic() {
        let c = small(ExperimentKind::Heterogeneity);
        let render = || {
            let mut buf = Vec::new();
            run_experiment(&c).unwrap().write_csv(&mut buf).unwrap();
            buf
        };
        let a = render();
        assert_eq!(a, render());
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("experiment,grid_point,worst_case_distortion"));
    }

    #[test]
    fn bounds_table_rows() {
        let c = ExperimentConfig {
            n_grid: vec![1000, 10_000],
            l: 1,
            lipschitz: Some(1.0),
            ..ExperimentConfig::new(ExperimentKind::BoundsTable)
        };
        let rows = bounds_table(&c).unwrap();
        assert!((rows[1].table.continuous.unwrap() - 2.354_787_549_353_864e-2).abs() < 1e-15);
        let mut buf = Vec::new();
        write_bounds_rows(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("1000,1,1.00000000e0"));
        assert!(text.contains("4.68269438e-3"));
    }
}
