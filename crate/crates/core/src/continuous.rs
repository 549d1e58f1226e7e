//! Rows valued in `[0, 1]`: Lipschitz queries, `k`-bit discretization and
//! the end-to-end release pipeline.

use std::fmt;
use std::io::Read;
use std::sync::Arc;

use serde::Serialize;

use crate::bounds::{continuous_bound, BoundInputs};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, PreparedEstimator};
use crate::mechanism::{sample_synthetic, MechanismParams};
use crate::model::{DataUniverse, Database, RandomSource, MAX_BITS};
use crate::queries::{RowFunction, StatisticalQuery};

/// Points in the Lipschitz spot-check grid.
pub const LIPSCHITZ_GRID: usize = 10_000;

/// A database whose rows are reals in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousDatabase {
    rows: Vec<f64>,
}

impl ContinuousDatabase {
    pub fn new(rows: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter("database must have n >= 1 rows".into()));
        }
        if let Some((i, v)) = rows.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("row {i} = {v} outside [0, 1]")));
        }
        Ok(ContinuousDatabase { rows })
    }

    /// One real per line; an optional non-numeric first line is a header.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (idx, record) in csv.records().enumerate() {
            let record = record?;
            let line = idx + 1;
            let field = record.get(0).unwrap_or("").trim();
            if field.is_empty() && record.len() <= 1 {
                continue;
            }
            if record.len() != 1 {
                return Err(Error::parse(line, format!("expected one value, found {}", record.len())));
            }
            match field.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => rows.push(v),
                Ok(v) => return Err(Error::parse(line, format!("value {v} outside [0, 1]"))),
                Err(_) if idx == 0 => continue,
                Err(_) => return Err(Error::parse(line, format!("not a number: {field:?}"))),
            }
        }
        if rows.is_empty() {
            return Err(Error::parse(0, "no data rows"));
        }
        ContinuousDatabase::new(rows)
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

type RowFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A row function on `[0, 1]` with its declared Lipschitz constant and
/// range, checked on a grid when constructed.
#[derive(Clone)]
pub struct LipschitzFunction {
    f: RowFn,
    lipschitz: f64,
    min: f64,
    max: f64,
}

impl fmt::Debug for LipschitzFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LipschitzFunction")
            .field("lipschitz", &self.lipschitz)
            .field("min", &self.min)
            .field("max", &self.max)
            .finish_non_exhaustive()
    }
}

impl LipschitzFunction {
    pub fn new<F>(f: F, lipschitz: f64, min: f64, max: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
            return Err(Error::InvalidQuery(format!("Lipschitz constant {lipschitz} invalid")));
        }
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::InvalidQuery(format!(
                "declared range [{min}, {max}] must satisfy min < max"
            )));
        }
        let h = 1.0 / (LIPSCHITZ_GRID - 1) as f64;
        let tol = 1e-9 * (1.0 + max.abs().max(min.abs()));
        let mut prev = f(0.0);
        let (mut lo, mut hi) = (prev, prev);
        for k in 0..LIPSCHITZ_GRID {
            let u = (k as f64 * h).min(1.0);
            let v = f(u);
            if !v.is_finite() {
                return Err(Error::InvalidQuery(format!("row function not finite at {u}")));
            }
            if v < min - tol || v > max + tol {
                return Err(Error::InvalidQuery(format!(
                    "row function value {v} at {u} outside declared range [{min}, {max}]"
                )));
            }
            if (v - prev).abs() > lipschitz * h + tol {
                return Err(Error::InvalidQuery(format!(
                    "row function violates Lipschitz constant {lipschitz} near {u}"
                )));
            }
            lo = lo.min(v);
            hi = hi.max(v);
            prev = v;
        }
        if hi <= lo {
            return Err(Error::InvalidQuery("row function is constant on [0, 1]".into()));
        }
        Ok(LipschitzFunction {
            f: Arc::new(f),
            lipschitz,
            min,
            max,
        })
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

/// A statistical query over `[0, 1]` rows built from Lipschitz row
/// functions, `q(x) = sum_i phi_i(x_i) / sum_i c_i` with declared ranges.
#[derive(Clone, Debug)]
pub struct LipschitzQuery {
    functions: Vec<LipschitzFunction>,
    assignment: Vec<usize>,
    c_sum: f64,
}

impl LipschitzQuery {
    pub fn new(functions: Vec<LipschitzFunction>, assignment: Vec<usize>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::InvalidQuery("query must cover n >= 1 rows".into()));
        }
        if let Some(&j) = assignment.iter().find(|&&j| j >= functions.len()) {
            return Err(Error::InvalidQuery(format!(
                "row assignment {j} refers past {} row functions",
                functions.len()
            )));
        }
        let c_sum = assignment.iter().map(|&j| functions[j].range()).sum();
        Ok(LipschitzQuery {
            functions,
            assignment,
            c_sum,
        })
    }

    /// The same function on all `n` rows.
    pub fn uniform(f: LipschitzFunction, n: usize) -> Result<Self> {
        LipschitzQuery::new(vec![f], vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Largest declared Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.functions.iter().map(|f| f.lipschitz).fold(0.0, f64::max)
    }

    pub fn a(&self) -> f64 {
        self.functions.iter().map(|f| f.min).fold(f64::INFINITY, f64::min)
    }

    pub fn b(&self) -> f64 {
        self.functions.iter().map(|f| f.max).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn c(&self) -> f64 {
        self.functions.iter().map(|f| f.range()).fold(f64::INFINITY, f64::min)
    }

    pub fn c_sum(&self) -> f64 {
        self.c_sum
    }

    pub fn evaluate(&self, x: &ContinuousDatabase) -> Result<f64> {
        if x.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "query has n = {} rows but database has n = {}",
                self.len(),
                x.len()
            )));
        }
        let sum: f64 = x
            .rows()
            .iter()
            .zip(&self.assignment)
            .map(|(&u, &j)| self.functions[j].eval(u))
            .sum();
        Ok(sum / self.c_sum)
    }

    /// Statistical query on the `2^k` grid: table entry `code` holds
    /// `phi(code / 2^k)`.
    pub fn grid_query(&self, k: u32) -> Result<StatisticalQuery> {
        let universe = grid_universe(k)?;
        let cells = universe.cardinality();
        let scale = 1.0 / cells as f64;
        let tables = self
            .functions
            .iter()
            .map(|f| RowFunction::new((0..cells).map(|c| f.eval(c as f64 * scale)).collect()))
            .collect::<Result<Vec<_>>>()?;
        StatisticalQuery::new("grid", universe, tables, self.assignment.clone())
    }

    /// Bound inputs for this query at its own `n`.
    pub fn bound_inputs(&self, epsilon: f64) -> Result<BoundInputs> {
        BoundInputs::new(self.len() as f64, 1, epsilon, self.a(), self.b(), self.c())?
            .with_lipschitz(self.lipschitz().max(f64::MIN_POSITIVE))
    }
}

fn grid_universe(k: u32) -> Result<DataUniverse> {
    if k == 0 || k > MAX_BITS {
        return Err(Error::InvalidParameter(format!("k = {k} outside [1, {MAX_BITS}]")));
    }
    DataUniverse::new(k)
}

/// `k = max(1, round(log2(n) / 4))`, the integer version of `2^{2k} = sqrt(n)`.
pub fn choose_k(n: usize) -> u32 {
    let k = ((n.max(1) as f64).log2() / 4.0).round() as u32;
    k.clamp(1, MAX_BITS)
}

/// Row `x_i` maps to `floor(x_i 2^k)`, with `x_i = 1` kept in the top cell.
pub fn discretize(x: &ContinuousDatabase, k: u32) -> Result<Database> {
    let universe = grid_universe(k)?;
    let cells = universe.cardinality();
    let top = (cells - 1) as u32;
    let rows = x
        .rows()
        .iter()
        .map(|&u| ((u * cells as f64).floor() as u64).min(top as u64) as u32)
        .collect();
    Database::new(universe, rows)
}

/// Result of one run of the continuous pipeline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuousRelease {
    /// Estimate of the continuous query, in its own normalization.
    pub estimate: f64,
    pub k: u32,
    /// Estimate of the grid query, in the grid normalization.
    pub grid_estimate: f64,
    /// `sum_i c_i` of the grid query.
    pub grid_c_sum: f64,
    /// `sum_i c_i` of the continuous query.
    pub continuous_c_sum: f64,
}

/// Discretize at `k = choose_k(n)`, release, and estimate with the proper
/// estimator. The grid answer is rescaled by `sum c_i(grid) / sum c_i` so it
/// estimates the continuous query's normalization.
pub fn release_continuous(
    x: &ContinuousDatabase,
    q: &LipschitzQuery,
    epsilon: f64,
    rng: &RandomSource,
) -> Result<ContinuousRelease> {
    let pipeline = ContinuousPipeline::new(q, x.len(), epsilon)?;
    pipeline.release(x, rng)
}

/// The pipeline with its grid query and estimator prepared once.
#[derive(Clone, Debug)]
pub struct ContinuousPipeline {
    k: u32,
    grid: StatisticalQuery,
    params: MechanismParams,
    continuous_c_sum: f64,
}

impl ContinuousPipeline {
    pub fn new(q: &LipschitzQuery, n: usize, epsilon: f64) -> Result<Self> {
        if q.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "query has n = {} rows but database has n = {n}",
                q.len()
            )));
        }
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::EstimatorUndefined(format!(
                "continuous release needs a privacy level > 0, got {epsilon}"
            )));
        }
        let k = choose_k(n);
        let grid = q.grid_query(k)?;
        let params = MechanismParams::new(epsilon, grid.universe())?;
        Ok(ContinuousPipeline {
            k,
            grid,
            params,
            continuous_c_sum: q.c_sum(),
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn grid_query(&self) -> &StatisticalQuery {
        &self.grid
    }

    pub fn release(&self, x: &ContinuousDatabase, rng: &RandomSource) -> Result<ContinuousRelease> {
        let discrete = discretize(x, self.k)?;
        let y = sample_synthetic(&discrete, &self.params, rng)?;
        let estimator = PreparedEstimator::new(&self.grid, &self.params, EstimatorKind::PROPER)?;
        let grid_estimate = estimator.estimate(&y)?;
        Ok(ContinuousRelease {
            estimate: grid_estimate * self.grid.c_sum() / self.continuous_c_sum,
            k: self.k,
            grid_estimate,
            grid_c_sum: self.grid.c_sum(),
            continuous_c_sum: self.continuous_c_sum,
        })
    }
}

/// Leading-term bound for the continuous pipeline on `q` at its `n`.
pub fn pipeline_bound(q: &LipschitzQuery, epsilon: f64) -> Result<f64> {
    continuous_bound(&q.bound_inputs(epsilon)?)
}
