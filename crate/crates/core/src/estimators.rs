//! Companion estimators for released databases and distortion measurement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{upper_bound_absolute, upper_bound_squared, BoundInputs};
use crate::error::{Error, Result};
use crate::mechanism::{sample_synthetic, MechanismParams};
use crate::model::{check_enumerable, exp_neg_epsilon, Database, RandomSource};
use crate::queries::StatisticalQuery;

/// Largest achievable-value set computed for exact-range projection.
pub const ACHIEVABLE_CAP: usize = 1_000_000;

/// `n * l` cap for exact distortion by enumeration.
pub const EXACT_CAP_BITS: usize = 12;

fn debias_factors(params: &MechanismParams) -> Result<(f64, f64)> {
    let e = params.exp_neg_epsilon();
    if params.epsilon() == 0.0 {
        return Err(Error::EstimatorUndefined(
            "estimator needs a privacy level > 0 (1 - e^-eps vanishes)".into(),
        ));
    }
    Ok((params.g() / (1.0 - e), e / (1.0 - e)))
}

/// `g/(1 - e^{-eps}) q(y) - e^{-eps}/(1 - e^{-eps}) C_phi`.
pub fn estimate_unbiased(q: &StatisticalQuery, y: &Database, params: &MechanismParams) -> Result<f64> {
    check_params(q, params)?;
    let (scale, shift) = debias_factors(params)?;
    Ok(scale * q.evaluate(y)? - shift * q.centering_constant())
}

fn check_params(q: &StatisticalQuery, params: &MechanismParams) -> Result<()> {
    if q.universe() != params.universe() {
        return Err(Error::DimensionMismatch(format!(
            "query universe l = {} but mechanism universe l = {}",
            q.universe().bits(),
            params.universe().bits()
        )));
    }
    Ok(())
}

/// How a raw estimate is mapped to a proper (achievable) answer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// Clamp to `[sum a_i / sum c_i, sum b_i / sum c_i]`.
    #[default]
    IntervalClamp,
    /// Nearest value in `q(X^n)`, ties toward the smaller value.
    ExactRange,
}

/// Sorted achievable values `q(X^n)` of a query.
#[derive(Clone, Debug, PartialEq)]
pub struct AchievableSet {
    values: Vec<f64>,
}

impl AchievableSet {
    /// Row-by-row sum-set dynamic program over distinct table values, with
    /// sums merged at relative tolerance `1e-12`.
    pub fn compute(q: &StatisticalQuery) -> Result<Self> {
        let distinct: Vec<Vec<f64>> = q
            .functions()
            .iter()
            .map(|f| {
                let mut v = f.table().to_vec();
                v.sort_by(f64::total_cmp);
                v.dedup_by(|a, b| same_value(*a, *b));
                v
            })
            .collect();
        let mut sums = vec![0.0f64];
        let mut next = Vec::new();
        for &j in q.assignment() {
            let vals = &distinct[j as usize];
            if sums.len().saturating_mul(vals.len()) > ACHIEVABLE_CAP.saturating_mul(64) {
                return Err(too_many());
            }
            next.clear();
            for &v in vals {
                next.extend(sums.iter().map(|s| s + v));
            }
            next.sort_by(f64::total_cmp);
            next.dedup_by(|a, b| same_value(*a, *b));
            if next.len() > ACHIEVABLE_CAP {
                return Err(too_many());
            }
            std::mem::swap(&mut sums, &mut next);
        }
        let c_sum = q.c_sum();
        Ok(AchievableSet {
            values: sums.into_iter().map(|s| s / c_sum).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Nearest achievable value; ties go to the smaller one.
    pub fn nearest(&self, raw: f64) -> f64 {
        let i = self.values.partition_point(|&v| v < raw);
        if i == 0 {
            return self.values[0];
        }
        if i == self.values.len() {
            return self.values[i - 1];
        }
        let (lo, hi) = (self.values[i - 1], self.values[i]);
        if raw - lo <= hi - raw {
            lo
        } else {
            hi
        }
    }
}

fn too_many() -> Error {
    Error::EnumerationTooLarge(format!(
        "achievable-value set exceeds {ACHIEVABLE_CAP} distinct sums"
    ))
}

fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// A proper-estimator projection prepared for one query.
#[derive(Clone, Debug)]
pub enum Projector {
    Interval { lo: f64, hi: f64 },
    Exact(AchievableSet),
}

impl Projector {
    pub fn new(q: &StatisticalQuery, strategy: Projection) -> Result<Self> {
        Ok(match strategy {
            Projection::IntervalClamp => Projector::Interval {
                lo: q.min_value(),
                hi: q.max_value(),
            },
            Projection::ExactRange => Projector::Exact(AchievableSet::compute(q)?),
        })
    }

    pub fn project(&self, raw: f64) -> f64 {
        match self {
            Projector::Interval { lo, hi } => raw.clamp(*lo, *hi),
            Projector::Exact(set) => set.nearest(raw),
        }
    }
}

/// Project a raw estimate onto the proper answer set.
pub fn project_proper(q: &StatisticalQuery, raw: f64, strategy: Projection) -> Result<f64> {
    Ok(Projector::new(q, strategy)?.project(raw))
}

/// Unbiased estimate projected onto the proper answer set.
pub fn estimate_proper(
    q: &StatisticalQuery,
    y: &Database,
    params: &MechanismParams,
    strategy: Projection,
) -> Result<f64> {
    project_proper(q, estimate_unbiased(q, y, params)?, strategy)
}

/// Which companion estimator to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Unbiased,
    Proper(Projection),
}

impl EstimatorKind {
    /// The proper estimator with the default interval projection.
    pub const PROPER: EstimatorKind = EstimatorKind::Proper(Projection::IntervalClamp);

    pub fn is_proper(&self) -> bool {
        matches!(self, EstimatorKind::Proper(_))
    }
}

/// An estimator bound to one query and mechanism, with any projection
/// precomputed.
#[derive(Clone, Debug)]
pub struct PreparedEstimator<'q> {
    query: &'q StatisticalQuery,
    scale: f64,
    shift: f64,
    projector: Option<Projector>,
}

impl<'q> PreparedEstimator<'q> {
    pub fn new(query: &'q StatisticalQuery, params: &MechanismParams, kind: EstimatorKind) -> Result<Self> {
        check_params(query, params)?;
        let (scale, shift) = debias_factors(params)?;
        let projector = match kind {
            EstimatorKind::Unbiased => None,
            EstimatorKind::Proper(strategy) => Some(Projector::new(query, strategy)?),
        };
        Ok(PreparedEstimator {
            query,
            scale,
            shift: shift * query.centering_constant(),
            projector,
        })
    }

    /// Debias (and project) an already evaluated `q(y)`.
    pub fn from_raw(&self, q_of_y: f64) -> f64 {
        let u = self.scale * q_of_y - self.shift;
        match &self.projector {
            Some(p) => p.project(u),
            None => u,
        }
    }

    pub fn estimate(&self, y: &Database) -> Result<f64> {
        Ok(self.from_raw(self.query.evaluate(y)?))
    }
}

/// Sum of `y` over the vertex pairs `S x T` of an edge-indicator database.
pub fn raw_cut_count(y: &Database, s: &[usize], t: &[usize]) -> Result<u64> {
    let v = graph_side(y)?;
    check_cut_sides(v, s, t)?;
    let rows = y.rows();
    let mut count = 0u64;
    for &i in s {
        let base = i * v;
        count += t.iter().map(|&j| rows[base + j] as u64).sum::<u64>();
    }
    Ok(count)
}

pub(crate) fn graph_side(y: &Database) -> Result<usize> {
    if y.universe().bits() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "edge-indicator database needs l = 1, got l = {}",
            y.universe().bits()
        )));
    }
    let n = y.len();
    let v = (n as f64).sqrt().round() as usize;
    if v * v != n {
        return Err(Error::DimensionMismatch(format!(
            "edge-indicator database length {n} is not a square"
        )));
    }
    Ok(v)
}

pub(crate) fn check_cut_sides(vertex_count: usize, s: &[usize], t: &[usize]) -> Result<()> {
    let mut side = vec![0u8; vertex_count];
    for (mark, set) in [(1u8, s), (2u8, t)] {
        for &i in set {
            if i >= vertex_count {
                return Err(Error::InvalidQuery(format!(
                    "vertex {i} outside a graph of {vertex_count} vertices"
                )));
            }
            if side[i] & mark != 0 {
                return Err(Error::InvalidQuery(format!("vertex {i} repeated in a cut side")));
            }
            if side[i] != 0 {
                return Err(Error::InvalidQuery(format!("vertex {i} lies in both S and T")));
            }
            side[i] |= mark;
        }
    }
    Ok(())
}

/// `(1+e)/(1-e) q_{S,T}(y) - e/(1-e) |S||T|` with `e = e^{-eps}`.
/// Unclamped; may be negative or exceed `|S||T|`.
pub fn estimate_cut(y: &Database, s: &[usize], t: &[usize], epsilon: f64) -> Result<f64> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::EstimatorUndefined(format!(
            "cut estimator needs a privacy level > 0, got {epsilon}"
        )));
    }
    let raw = raw_cut_count(y, s, t)? as f64;
    Ok(debias_cut(raw, s.len() * t.len(), epsilon))
}

pub(crate) fn debias_cut(raw: f64, pairs: usize, epsilon: f64) -> f64 {
    let e = exp_neg_epsilon(epsilon);
    (1.0 + e) / (1.0 - e) * raw - e / (1.0 - e) * pairs as f64
}

/// [`estimate_cut`] clamped to `[0, |S||T|]`.
pub fn estimate_cut_clamped(y: &Database, s: &[usize], t: &[usize], epsilon: f64) -> Result<f64> {
    Ok(estimate_cut(y, s, t, epsilon)?.clamp(0.0, (s.len() * t.len()) as f64))
}

/// Distortion function `rho`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionMeasure {
    Squared,
    Absolute,
}

impl DistortionMeasure {
    #[inline]
    pub fn apply(&self, estimate: f64, truth: f64) -> f64 {
        let d = estimate - truth;
        match self {
            DistortionMeasure::Squared => d * d,
            DistortionMeasure::Absolute => d.abs(),
        }
    }
}

/// Monte Carlo distortion of one estimator at one database.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionReport {
    pub query_id: String,
    pub estimator: EstimatorKind,
    pub distortion_measure: DistortionMeasure,
    pub empirical_mean: f64,
    pub empirical_stderr: f64,
    pub sample_count: usize,
    pub analytic_bound: f64,
    pub exact_value: Option<f64>,
    /// Set when the exact value lies more than 6 standard errors away.
    pub flagged: bool,
}

impl DistortionReport {
    /// Attach an exactly enumerated value and recheck agreement.
    pub fn with_exact(mut self, exact: f64) -> Self {
        self.exact_value = Some(exact);
        self.flagged = (self.empirical_mean - exact).abs() > 6.0 * self.empirical_stderr;
        self
    }
}

/// Compensated (Neumaier) sum, independent of how values were produced.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = neumaier_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// The analytic bound that applies to an estimator under a measure.
pub fn analytic_bound(
    q: &StatisticalQuery,
    params: &MechanismParams,
    estimator: EstimatorKind,
    measure: DistortionMeasure,
) -> Result<f64> {
    let inputs = BoundInputs::new(
        q.len() as f64,
        q.universe().bits(),
        params.epsilon(),
        q.a(),
        q.b(),
        q.c(),
    )?;
    Ok(match measure {
        DistortionMeasure::Squared => upper_bound_squared(&inputs, estimator.is_proper()),
        DistortionMeasure::Absolute => upper_bound_absolute(&inputs, estimator.is_proper()),
    })
}

/// Monte Carlo estimate of `E[rho(qhat(Y), q(x))]` over `trials` releases.
/// Trial `t` draws from `rng.child(t)`, so the result does not depend on
/// scheduling.
pub fn measure_distortion(
    q: &StatisticalQuery,
    x: &Database,
    params: &MechanismParams,
    estimator: EstimatorKind,
    measure: DistortionMeasure,
    trials: usize,
    rng: &RandomSource,
) -> Result<DistortionReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let prepared = PreparedEstimator::new(q, params, estimator)?;
    let truth = q.evaluate(x)?;
    let errors: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let y = sample_synthetic(x, params, &rng.child(t as u64))?;
            Ok(measure.apply(prepared.from_raw(q.evaluate_unchecked(y.rows())), truth))
        })
        .collect::<Result<_>>()?;
    let (mean, stderr) = mean_and_stderr(&errors);
    Ok(DistortionReport {
        query_id: q.name().to_string(),
        estimator,
        distortion_measure: measure,
        empirical_mean: mean,
        empirical_stderr: stderr,
        sample_count: trials,
        analytic_bound: analytic_bound(q, params, estimator, measure)?,
        exact_value: None,
        flagged: false,
    })
}

/// `sum_y p(y|x) rho(qhat(y), q(x))` by enumerating every output.
pub fn exact_distortion(
    q: &StatisticalQuery,
    x: &Database,
    params: &MechanismParams,
    estimator: EstimatorKind,
    measure: DistortionMeasure,
) -> Result<f64> {
    let prepared = PreparedEstimator::new(q, params, estimator)?;
    let truth = q.evaluate(x)?;
    let n = x.len();
    let total = check_enumerable(x.universe(), n, EXACT_CAP_BITS)?;
    if params.is_identity() {
        return Ok(measure.apply(prepared.from_raw(truth), truth));
    }
    let log_g = params.g().ln();
    let eps = params.epsilon();
    let terms = (0..total).map(|code| {
        let y = Database::from_code(x.universe(), n, code);
        let d = x.rows().iter().zip(y.rows()).filter(|(a, b)| a != b).count();
        let p = (-eps * d as f64 - n as f64 * log_g).exp();
        p * measure.apply(prepared.from_raw(q.evaluate_unchecked(y.rows())), truth)
    });
    Ok(neumaier_sum(terms))
}
