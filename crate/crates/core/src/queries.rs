//! Statistical queries: normalized sums of per-row functions.
//!
//! `q(x) = (1 / sum_i c_i) * sum_i phi_i(x_i)` where each row function
//! `phi_i` is a dense table over the universe and `c_i = max - min` of its
//! table. Distinct tables are stored once and rows reference them by index.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataUniverse, Database, RandomSource};

/// Dense row-function tables are limited to `2^20` entries.
pub const TABLE_CAP_BITS: u32 = 20;

/// One row function `phi: D -> R`, stored as a table over all `2^l` values.
#[derive(Clone, Debug, PartialEq)]
pub struct RowFunction {
    table: Vec<f64>,
    min: f64,
    max: f64,
    total: f64,
}

impl RowFunction {
    pub fn new(table: Vec<f64>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::InvalidQuery("row function table is empty".into()));
        }
        if let Some(v) = table.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidQuery(format!("row function value {v} is not finite")));
        }
        let min = table.iter().copied().fold(f64::INFINITY, f64::min);
        let max = table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= min {
            return Err(Error::InvalidQuery(
                "row function is constant (max must exceed min)".into(),
            ));
        }
        let total = table.iter().sum();
        Ok(RowFunction {
            table,
            min,
            max,
            total,
        })
    }

    /// Table over `2^l` values built from the first `levels.len()` codes;
    /// codes past the last level repeat the value of the last level, the
    /// nearest valid code.
    pub fn from_levels(universe: DataUniverse, levels: &[f64]) -> Result<Self> {
        check_table_universe(universe)?;
        let card = universe.cardinality() as usize;
        if levels.is_empty() || levels.len() > card {
            return Err(Error::InvalidQuery(format!(
                "{} levels do not fit a universe of size {card}",
                levels.len()
            )));
        }
        let last = levels[levels.len() - 1];
        let mut table = levels.to_vec();
        table.resize(card, last);
        RowFunction::new(table)
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    #[inline]
    pub fn value(&self, v: u32) -> f64 {
        self.table[v as usize]
    }

    /// `a_i`.
    pub fn min(&self) -> f64 {
        self.min
    }

    /// `b_i`.
    pub fn max(&self) -> f64 {
        self.max
    }

    /// `c_i = b_i - a_i`.
    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    /// `sum_v phi(v)`.
    pub fn total(&self) -> f64 {
        self.total
    }
}

fn check_table_universe(universe: DataUniverse) -> Result<()> {
    if universe.bits() > TABLE_CAP_BITS {
        return Err(Error::InvalidQuery(format!(
            "row-function tables need l <= {TABLE_CAP_BITS}, got l = {}",
            universe.bits()
        )));
    }
    Ok(())
}

/// A statistical query of fixed length `n`.
#[derive(Clone, Debug)]
pub struct StatisticalQuery {
    name: String,
    universe: DataUniverse,
    functions: Vec<RowFunction>,
    assignment: Vec<u32>,
    a: f64,
    b: f64,
    c: f64,
    c_sum: f64,
    lo_sum: f64,
    hi_sum: f64,
    centering: f64,
}

impl StatisticalQuery {
    /// Build from candidate tables plus a per-row index into them. Identical
    /// tables are merged; unused tables are dropped.
    pub fn new(
        name: impl Into<String>,
        universe: DataUniverse,
        functions: Vec<RowFunction>,
        assignment: Vec<usize>,
    ) -> Result<Self> {
        check_table_universe(universe)?;
        if assignment.is_empty() {
            return Err(Error::InvalidQuery("query must cover n >= 1 rows".into()));
        }
        let card = universe.cardinality() as usize;
        if let Some(f) = functions.iter().find(|f| f.table.len() != card) {
            return Err(Error::DimensionMismatch(format!(
                "row-function table has {} entries, universe has {card}",
                f.table.len()
            )));
        }
        if let Some(&j) = assignment.iter().find(|&&j| j >= functions.len()) {
            return Err(Error::InvalidQuery(format!(
                "row assignment {j} refers past {} row functions",
                functions.len()
            )));
        }

        let mut index_of: HashMap<Vec<u64>, u32> = HashMap::new();
        let mut remap = vec![None; functions.len()];
        let mut kept: Vec<RowFunction> = Vec::new();
        let mut dedup = Vec::with_capacity(assignment.len());
        for &j in &assignment {
            let id = *remap[j].get_or_insert_with(|| {
                let key: Vec<u64> = functions[j].table.iter().map(|v| canonical_bits(*v)).collect();
                *index_of.entry(key).or_insert_with(|| {
                    kept.push(functions[j].clone());
                    (kept.len() - 1) as u32
                })
            });
            dedup.push(id);
        }

        let mut counts = vec![0f64; kept.len()];
        for &j in &dedup {
            counts[j as usize] += 1.0;
        }
        let weighted = |f: fn(&RowFunction) -> f64| -> f64 {
            kept.iter().zip(&counts).map(|(rf, &m)| m * f(rf)).sum()
        };
        let c_sum = weighted(RowFunction::range);
        let lo_sum = weighted(RowFunction::min);
        let hi_sum = weighted(RowFunction::max);
        let centering = weighted(RowFunction::total) / c_sum;
        let a = kept.iter().map(RowFunction::min).fold(f64::INFINITY, f64::min);
        let b = kept.iter().map(RowFunction::max).fold(f64::NEG_INFINITY, f64::max);
        let c = kept.iter().map(RowFunction::range).fold(f64::INFINITY, f64::min);

        Ok(StatisticalQuery {
            name: name.into(),
            universe,
            functions: kept,
            assignment: dedup,
            a,
            b,
            c,
            c_sum,
            lo_sum,
            hi_sum,
            centering,
        })
    }

    /// A linear query: one row function shared by all `n` rows.
    pub fn linear(name: impl Into<String>, universe: DataUniverse, n: usize, f: RowFunction) -> Result<Self> {
        StatisticalQuery::new(name, universe, vec![f], vec![0; n])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn universe(&self) -> DataUniverse {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Distinct row functions.
    pub fn functions(&self) -> &[RowFunction] {
        &self.functions
    }

    /// Index into [`StatisticalQuery::functions`] for each row.
    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn row_function(&self, i: usize) -> &RowFunction {
        &self.functions[self.assignment[i] as usize]
    }

    /// `a = min_i a_i`.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// `b = max_i b_i`.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// `c = min_i c_i`.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// `sum_i c_i`.
    pub fn c_sum(&self) -> f64 {
        self.c_sum
    }

    /// Smallest attainable value, `sum_i a_i / sum_i c_i`.
    pub fn min_value(&self) -> f64 {
        self.lo_sum / self.c_sum
    }

    /// Largest attainable value, `sum_i b_i / sum_i c_i`.
    pub fn max_value(&self) -> f64 {
        self.hi_sum / self.c_sum
    }

    /// `C_phi = (1 / sum_i c_i) sum_i sum_v phi_i(v)`.
    pub fn centering_constant(&self) -> f64 {
        self.centering
    }

    /// Number of distinct row functions; 1 for a linear query.
    pub fn heterogeneity(&self) -> usize {
        self.functions.len()
    }

    pub fn is_linear(&self) -> bool {
        self.functions.len() == 1
    }

    pub fn check_database(&self, x: &Database) -> Result<()> {
        if x.universe() != self.universe {
            return Err(Error::DimensionMismatch(format!(
                "query universe l = {} but database universe l = {}",
                self.universe.bits(),
                x.universe().bits()
            )));
        }
        if x.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "query has n = {} rows but database has n = {}",
                self.len(),
                x.len()
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &Database) -> Result<f64> {
        self.check_database(x)?;
        Ok(self.evaluate_unchecked(x.rows()))
    }

    pub(crate) fn evaluate_unchecked(&self, rows: &[u32]) -> f64 {
        let sum: f64 = if self.functions.len() == 1 {
            let t = &self.functions[0].table;
            rows.iter().map(|&v| t[v as usize]).sum()
        } else {
            rows.iter()
                .zip(&self.assignment)
                .map(|(&v, &j)| self.functions[j as usize].table[v as usize])
                .sum()
        };
        sum / self.c_sum
    }

    /// Evaluate a linear query from a database histogram.
    pub fn evaluate_histogram(&self, histogram: &[u64]) -> Result<f64> {
        if !self.is_linear() {
            return Err(Error::InvalidQuery(
                "histogram evaluation needs a linear query".into(),
            ));
        }
        let t = &self.functions[0].table;
        if histogram.len() != t.len() {
            return Err(Error::DimensionMismatch(format!(
                "histogram has {} cells, universe has {}",
                histogram.len(),
                t.len()
            )));
        }
        let n: u64 = histogram.iter().sum();
        if n as usize != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "histogram counts {n} rows, query has {}",
                self.len()
            )));
        }
        let sum: f64 = histogram.iter().zip(t).map(|(&h, &v)| h as f64 * v).sum();
        Ok(sum / self.c_sum)
    }
}

fn canonical_bits(v: f64) -> u64 {
    // -0.0 and 0.0 describe the same function value.
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

/// Fraction of rows whose attributes in `conjunct_bits` are all set.
pub fn make_predicate_query(universe: DataUniverse, n: usize, conjunct_bits: &[u32]) -> Result<StatisticalQuery> {
    check_table_universe(universe)?;
    if conjunct_bits.is_empty() {
        return Err(Error::InvalidQuery("predicate needs at least one conjunct".into()));
    }
    if let Some(&k) = conjunct_bits.iter().find(|&&k| k >= universe.bits()) {
        return Err(Error::InvalidQuery(format!(
            "conjunct attribute {k} outside l = {}",
            universe.bits()
        )));
    }
    let mask = conjunct_bits.iter().fold(0u64, |m, &k| m | (1 << k));
    let table = (0..universe.cardinality())
        .map(|v| if v & mask == mask { 1.0 } else { 0.0 })
        .collect();
    let name = format!(
        "predicate[{}]",
        conjunct_bits.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
    );
    StatisticalQuery::linear(name, universe, n, RowFunction::new(table)?)
}

/// `q_z(x) = d(x, z) / n`: row `i` uses the table `v -> [v != z_i]`.
pub fn make_hamming_query(z: &Database) -> Result<StatisticalQuery> {
    let universe = z.universe();
    check_table_universe(universe)?;
    let card = universe.cardinality() as usize;
    let mut slot: HashMap<u32, usize> = HashMap::new();
    let mut functions = Vec::new();
    let mut assignment = Vec::with_capacity(z.len());
    for &zi in z.rows() {
        let j = match slot.get(&zi) {
            Some(&j) => j,
            None => {
                let mut table = vec![1.0; card];
                table[zi as usize] = 0.0;
                functions.push(RowFunction::new(table)?);
                slot.insert(zi, functions.len() - 1);
                functions.len() - 1
            }
        };
        assignment.push(j);
    }
    StatisticalQuery::new("hamming", universe, functions, assignment)
}

fn check_blocks(n: usize, heterogeneity: usize) -> Result<()> {
    if heterogeneity == 0 || heterogeneity > n {
        return Err(Error::InvalidParameter(format!(
            "heterogeneity {heterogeneity} outside [1, {n}]"
        )));
    }
    if !n.is_multiple_of(heterogeneity) {
        return Err(Error::InvalidParameter(format!(
            "heterogeneity {heterogeneity} does not divide n = {n}"
        )));
    }
    Ok(())
}

fn contiguous_blocks(n: usize, heterogeneity: usize) -> Vec<usize> {
    let block = n / heterogeneity;
    (0..n).map(|i| i / block).collect()
}

fn random_normalized<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..len).map(|_| rng.gen::<f64>()).collect();
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max > min {
            return raw.into_iter().map(|v| v / (max - min)).collect();
        }
    }
}

/// Random heterogeneous query: `heterogeneity` independent tables with
/// entries uniform on `[0, 1]` divided by their range (so every `c_i = 1`),
/// assigned to equal contiguous blocks of rows.
pub fn generate_random_query(
    universe: DataUniverse,
    n: usize,
    heterogeneity: usize,
    rng: &RandomSource,
) -> Result<StatisticalQuery> {
    check_table_universe(universe)?;
    if universe.cardinality() < 2 {
        return Err(Error::InvalidParameter("universe too small".into()));
    }
    check_blocks(n, heterogeneity)?;
    let mut r = rng.rng();
    let card = universe.cardinality() as usize;
    let functions = (0..heterogeneity)
        .map(|_| RowFunction::new(random_normalized(card, &mut r)))
        .collect::<Result<Vec<_>>>()?;
    StatisticalQuery::new(
        format!("random[h={heterogeneity}]"),
        universe,
        functions,
        contiguous_blocks(n, heterogeneity),
    )
}

/// Like [`generate_random_query`], but each table draws only `levels`
/// values (for the first `levels` codes) and codes past them repeat the last
/// level. Models categorical columns that do not fill the universe.
pub fn generate_random_level_query(
    universe: DataUniverse,
    n: usize,
    heterogeneity: usize,
    levels: usize,
    rng: &RandomSource,
) -> Result<StatisticalQuery> {
    check_table_universe(universe)?;
    check_blocks(n, heterogeneity)?;
    if levels < 2 || levels as u64 > universe.cardinality() {
        return Err(Error::InvalidParameter(format!(
            "levels = {levels} outside [2, {}]",
            universe.cardinality()
        )));
    }
    let mut r = rng.rng();
    let functions = (0..heterogeneity)
        .map(|_| RowFunction::from_levels(universe, &random_normalized(levels, &mut r)))
        .collect::<Result<Vec<_>>>()?;
    StatisticalQuery::new(
        format!("random[h={heterogeneity},levels={levels}]"),
        universe,
        functions,
        contiguous_blocks(n, heterogeneity),
    )
}

/// Query definition as read from a JSON file. `l` and `n` may be omitted and
/// are then taken from the database the query is evaluated against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum QuerySpec {
    Predicate {
        #[serde(default)]
        l: Option<u32>,
        #[serde(default)]
        n: Option<usize>,
        conjuncts: Vec<u32>,
    },
    Hamming {
        #[serde(default)]
        l: Option<u32>,
        z: Vec<u32>,
    },
    Tables {
        #[serde(default)]
        l: Option<u32>,
        #[serde(default)]
        n: Option<usize>,
        tables: Vec<Vec<f64>>,
        /// Per-row table index; omitted means every row uses table 0.
        #[serde(default)]
        assignment: Option<Vec<usize>>,
    },
    Random {
        #[serde(default)]
        l: Option<u32>,
        #[serde(default)]
        n: Option<usize>,
        heterogeneity: usize,
        seed: u64,
    },
}

impl QuerySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Instantiate the query for databases over `universe` with `n` rows.
    pub fn build(&self, universe: DataUniverse, n: usize) -> Result<StatisticalQuery> {
        let check_l = |l: &Option<u32>| -> Result<()> {
            match l {
                Some(l) if *l != universe.bits() => Err(Error::DimensionMismatch(format!(
                    "query declares l = {l} but database has l = {}",
                    universe.bits()
                ))),
                _ => Ok(()),
            }
        };
        let check_n = |m: Option<usize>| -> Result<()> {
            match m {
                Some(m) if m != n => Err(Error::DimensionMismatch(format!(
                    "query declares n = {m} but database has n = {n}"
                ))),
                _ => Ok(()),
            }
        };
        match self {
            QuerySpec::Predicate { l, n: m, conjuncts } => {
                check_l(l)?;
                check_n(*m)?;
                make_predicate_query(universe, n, conjuncts)
            }
            QuerySpec::Hamming { l, z } => {
                check_l(l)?;
                check_n(Some(z.len()))?;
                make_hamming_query(&Database::new(universe, z.clone())?)
            }
            QuerySpec::Tables {
                l,
                n: m,
                tables,
                assignment,
            } => {
                check_l(l)?;
                check_n(*m)?;
                let functions = tables
                    .iter()
                    .map(|t| RowFunction::new(t.clone()))
                    .collect::<Result<Vec<_>>>()?;
                let assignment = assignment.clone().unwrap_or_else(|| vec![0; n]);
                check_n(Some(assignment.len()))?;
                StatisticalQuery::new("tables", universe, functions, assignment)
            }
            QuerySpec::Random {
                l,
                n: m,
                heterogeneity,
                seed,
            } => {
                check_l(l)?;
                check_n(*m)?;
                generate_random_query(universe, n, *heterogeneity, &RandomSource::from_seed(*seed))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{enumerate_databases, hamming_distance};
    use proptest::prelude::*;

    fn universe(bits: u32) -> DataUniverse {
        DataUniverse::new(bits).unwrap()
    }

    #[test]
    fn row_function_validation() {
        assert!(RowFunction::new(vec![1.0, 1.0]).is_err());
        assert!(RowFunction::new(vec![0.0, f64::NAN]).is_err());
        let f = RowFunction::new(vec![2.0, -1.0, 0.5, 3.0]).unwrap();
        assert_eq!((f.min(), f.max(), f.range(), f.total()), (-1.0, 3.0, 4.0, 4.5));
        let g = RowFunction::from_levels(universe(3), &[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(g.table(), &[0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0, 1.0]);
        assert!(RowFunction::from_levels(universe(1), &[0.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn two_row_evaluation() {
        let u = universe(1);
        let q = StatisticalQuery::new(
            "t",
            u,
            vec![RowFunction::new(vec![0.0, 1.0]).unwrap(), RowFunction::new(vec![0.0, 2.0]).unwrap()],
            vec![0, 1],
        )
        .unwrap();
        assert_eq!(q.c_sum(), 3.0);
        assert_eq!(q.evaluate(&Database::new(u, vec![1, 1]).unwrap()).unwrap(), 1.0);
        assert_eq!(q.heterogeneity(), 2);
        assert_eq!((q.a(), q.b(), q.c()), (0.0, 2.0, 1.0));
    }

    #[test]
    fn evaluation_checks_shape() {
        let q = make_predicate_query(universe(2), 3, &[0]).unwrap();
        assert!(q.evaluate(&Database::new(universe(2), vec![0, 1]).unwrap()).is_err());
        assert!(q.evaluate(&Database::new(universe(3), vec![0, 1, 2]).unwrap()).is_err());
    }

    #[test]
    fn predicate_examples() {
        let q = make_predicate_query(universe(2), 4, &[0, 1]).unwrap();
        assert_eq!(q.functions()[0].table(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(q.heterogeneity(), 1);
        assert_eq!((q.a(), q.b(), q.c()), (0.0, 1.0, 1.0));
        let all = Database::new(universe(2), vec![3; 4]).unwrap();
        assert_eq!(q.evaluate(&all).unwrap(), 1.0);
        assert_eq!(make_predicate_query(universe(2), 4, &[1]).unwrap().centering_constant(), 2.0);
        assert_eq!(make_predicate_query(universe(3), 5, &[0, 2]).unwrap().centering_constant(), 2.0);
        assert!(make_predicate_query(universe(2), 4, &[]).is_err());
        assert!(make_predicate_query(universe(2), 4, &[2]).is_err());
    }

    #[test]
    fn predicate_centering_is_power_of_two() {
        for l in 1..=10u32 {
            for k in 1..=l {
                let bits: Vec<u32> = (0..k).collect();
                let q = make_predicate_query(universe(l), 3, &bits).unwrap();
                assert_eq!(q.centering_constant(), (1u64 << (l - k)) as f64, "l={l} k={k}");
            }
        }
    }

    #[test]
    fn hamming_query_matches_distance() {
        for (bits, n) in [(1, 3), (2, 3), (3, 2)] {
            let u = universe(bits);
            for z in enumerate_databases(u, n).unwrap() {
                let q = make_hamming_query(&z).unwrap();
                assert_eq!(q.centering_constant(), (u.cardinality() - 1) as f64);
                assert_eq!(q.c_sum(), n as f64);
                for x in enumerate_databases(u, n).unwrap() {
                    let want = hamming_distance(&x, &z).unwrap() as f64 / n as f64;
                    assert!((q.evaluate(&x).unwrap() - want).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn hamming_examples() {
        let u = universe(2);
        let z = Database::new(u, vec![0, 1, 2]).unwrap();
        let q = make_hamming_query(&z).unwrap();
        assert_eq!(q.evaluate(&z).unwrap(), 0.0);
        assert_eq!(q.evaluate(&Database::new(u, vec![1, 2, 3]).unwrap()).unwrap(), 1.0);
        assert!((q.evaluate(&Database::new(u, vec![0, 2, 3]).unwrap()).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn random_query_structure() {
        let u = universe(3);
        let q = generate_random_query(u, 12, 1, &RandomSource::from_seed(1)).unwrap();
        assert!(q.is_linear());
        let q = generate_random_query(u, 12, 12, &RandomSource::from_seed(1)).unwrap();
        assert_eq!(q.heterogeneity(), 12);
        assert_eq!(q.assignment(), &(0..12).collect::<Vec<u32>>()[..]);
        for f in q.functions() {
            assert!((f.range() - 1.0).abs() < 1e-12);
            assert!(f.min() >= 0.0);
        }
        let q = generate_random_query(u, 12, 3, &RandomSource::from_seed(1)).unwrap();
        assert_eq!(q.assignment(), &[0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]);
        assert!(generate_random_query(u, 12, 5, &RandomSource::from_seed(1)).is_err());
        assert!(generate_random_query(u, 12, 0, &RandomSource::from_seed(1)).is_err());
    }

    #[test]
    fn dedup_is_transparent() {
        let u = universe(2);
        let f = RowFunction::new(vec![0.1, 0.7, -0.2, 0.4]).unwrap();
        let g = RowFunction::new(vec![1.0, 0.0, 0.0, 0.5]).unwrap();
        let materialized = vec![f.clone(), g.clone(), f.clone(), g.clone(), f.clone()];
        let q = StatisticalQuery::new("m", u, materialized, (0..5).collect()).unwrap();
        assert_eq!(q.heterogeneity(), 2);
        let x = Database::new(u, vec![0, 1, 2, 3, 1]).unwrap();
        let direct: f64 = [f.value(0), g.value(1), f.value(2), g.value(3), f.value(1)].iter().sum::<f64>()
            / (3.0 * f.range() + 2.0 * g.range());
        assert!((q.evaluate(&x).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn histogram_evaluation_matches_rows() {
        let u = universe(3);
        let q = generate_random_query(u, 50, 1, &RandomSource::from_seed(4)).unwrap();
        let x = Database::new(u, (0..50).map(|i| (i * 7 % 8) as u32).collect()).unwrap();
        let a = q.evaluate(&x).unwrap();
        let b = q.evaluate_histogram(&x.histogram()).unwrap();
        assert!((a - b).abs() < 1e-12);
        let het = generate_random_query(u, 50, 2, &RandomSource::from_seed(4)).unwrap();
        assert!(het.evaluate_histogram(&x.histogram()).is_err());
    }

    #[test]
    fn spec_parsing_and_building() {
        let u = universe(2);
        let spec = QuerySpec::from_json(r#"{"type":"predicate","conjuncts":[0]}"#).unwrap();
        assert_eq!(spec.build(u, 4).unwrap().centering_constant(), 2.0);
        let spec = QuerySpec::from_json(r#"{"type":"predicate","l":3,"conjuncts":[0]}"#).unwrap();
        assert!(matches!(spec.build(u, 4).unwrap_err(), Error::DimensionMismatch(_)));
        let spec = QuerySpec::from_json(r#"{"type":"hamming","z":[0,1,2]}"#).unwrap();
        assert_eq!(spec.build(u, 3).unwrap().c_sum(), 3.0);
        let spec = QuerySpec::from_json(
            r#"{"type":"tables","tables":[[0,1,2,3],[1,0,0,0]],"assignment":[0,1,1]}"#,
        )
        .unwrap();
        assert_eq!(spec.build(u, 3).unwrap().heterogeneity(), 2);
        let spec = QuerySpec::from_json(r#"{"type":"random","heterogeneity":2,"seed":9}"#).unwrap();
        let a = spec.build(u, 4).unwrap();
        let b = spec.build(u, 4).unwrap();
        assert_eq!(a.functions(), b.functions());
        assert!(QuerySpec::from_json(r#"{"type":"bogus"}"#).is_err());
    }

    proptest! {
        #[test]
        fn normalization_holds(
            tables in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..5),
            rows in prop::collection::vec(0usize..100, 1..20),
        ) {
            let functions: Vec<RowFunction> = tables.into_iter().filter_map(|t| RowFunction::new(t).ok()).collect();
            prop_assume!(!functions.is_empty());
            let assignment: Vec<usize> = rows.iter().map(|r| r % functions.len()).collect();
            let q = StatisticalQuery::new("p", universe(2), functions, assignment).unwrap();
            prop_assert!((q.max_value() - q.min_value() - 1.0).abs() < 1e-12);
            prop_assert!(q.c() > 0.0 && q.a() < q.b());
        }
    }
}
