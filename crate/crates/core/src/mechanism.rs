//! The synthetic-database release mechanism.
//!
//! The output pmf is `e^{-eps * d(x, y)} / g(eps)^n` with
//! `g(eps) = 1 + (2^l - 1) e^{-eps}`. It factors over rows, so each row is
//! kept with probability `1/g` and otherwise replaced by one of the other
//! `2^l - 1` values uniformly: randomized response over the full universe.

use rand::distributions::{Bernoulli, Distribution, Uniform};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    check_enumerable, check_same_shape, exp_neg_epsilon, DataUniverse, Database, RandomSource,
};

/// Rows per independently seeded sampling chunk.
pub const SAMPLE_CHUNK_ROWS: usize = 1 << 15;

/// `n * l` cap for exhaustive DP verification.
pub const VERIFY_CAP_BITS: usize = 12;

/// Privacy level plus the constants it induces on a universe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MechanismParams {
    epsilon: f64,
    universe: DataUniverse,
    exp_neg: f64,
    g: f64,
}

impl MechanismParams {
    pub fn new(epsilon: f64, universe: DataUniverse) -> Result<Self> {
        if epsilon.is_nan() || epsilon < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "privacy level must be >= 0, got {epsilon}"
            )));
        }
        let exp_neg = exp_neg_epsilon(epsilon);
        let g = 1.0 + (universe.cardinality() - 1) as f64 * exp_neg;
        Ok(MechanismParams {
            epsilon,
            universe,
            exp_neg,
            g,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn universe(&self) -> DataUniverse {
        self.universe
    }

    /// `e^{-eps}` (zero in the identity regime).
    pub fn exp_neg_epsilon(&self) -> f64 {
        self.exp_neg
    }

    /// `g(eps) = 1 + (2^l - 1) e^{-eps}`.
    pub fn g(&self) -> f64 {
        self.g
    }

    /// Probability that a row is released unchanged.
    pub fn keep_prob(&self) -> f64 {
        1.0 / self.g
    }

    /// Probability of each individual alternative value.
    pub fn alt_prob(&self) -> f64 {
        self.exp_neg / self.g
    }

    /// Probability that a row is replaced by some other value.
    pub fn flip_prob(&self) -> f64 {
        (self.universe.cardinality() - 1) as f64 * self.alt_prob()
    }

    /// True when `eps >= 700`: the release equals the input.
    pub fn is_identity(&self) -> bool {
        self.exp_neg == 0.0
    }
}

fn check_universe(x: &Database, params: &MechanismParams) -> Result<()> {
    if x.universe() != params.universe() {
        return Err(Error::DimensionMismatch(format!(
            "database universe l = {} but mechanism universe l = {}",
            x.universe().bits(),
            params.universe().bits()
        )));
    }
    Ok(())
}

/// Per-row sampler: keep/flip Bernoulli, then a uniform alternative that
/// skips the original value.
#[derive(Clone, Debug)]
pub(crate) struct RowSampler {
    keep: Bernoulli,
    alternative: Option<Uniform<u32>>,
}

impl RowSampler {
    pub(crate) fn new(params: &MechanismParams) -> Self {
        let alternatives = params.universe().cardinality() - 1;
        let keep = Bernoulli::new(params.keep_prob().clamp(0.0, 1.0))
            .expect("keep probability lies in [0, 1]");
        // With a single alternative the flip target is forced.
        let alternative = (alternatives > 1).then(|| Uniform::new(0, alternatives as u32));
        RowSampler { keep, alternative }
    }

    #[inline]
    pub(crate) fn perturb<R: rand::Rng + ?Sized>(&self, row: u32, rng: &mut R) -> u32 {
        if self.keep.sample(rng) {
            return row;
        }
        match &self.alternative {
            Some(u) => {
                let alt = u.sample(rng);
                if alt >= row {
                    alt + 1
                } else {
                    alt
                }
            }
            None => row ^ 1,
        }
    }
}

/// Release a synthetic database. Each row is perturbed independently; rows
/// are processed in fixed chunks, chunk `k` drawing from `rng.child(k)`.
pub fn sample_synthetic(x: &Database, params: &MechanismParams, rng: &RandomSource) -> Result<Database> {
    check_universe(x, params)?;
    if params.is_identity() {
        return Ok(x.clone());
    }
    let sampler = RowSampler::new(params);
    let mut rows = x.rows().to_vec();
    let perturb_chunk = |(k, chunk): (usize, &mut [u32])| {
        let mut r = rng.child(k as u64).rng();
        for v in chunk.iter_mut() {
            *v = sampler.perturb(*v, &mut r);
        }
    };
    if rows.len() > SAMPLE_CHUNK_ROWS {
        rows.par_chunks_mut(SAMPLE_CHUNK_ROWS)
            .enumerate()
            .for_each(perturb_chunk);
    } else {
        perturb_chunk((0, &mut rows[..]));
    }
    Ok(Database::from_parts_unchecked(x.universe(), rows))
}

fn log_pmf_from_distance(distance: usize, n: usize, params: &MechanismParams) -> f64 {
    if params.is_identity() {
        return if distance == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -params.epsilon() * distance as f64 - n as f64 * params.g().ln()
}

/// `ln p(y | x) = -eps d(x, y) - n ln g(eps)`.
pub fn exact_log_pmf(x: &Database, y: &Database, params: &MechanismParams) -> Result<f64> {
    check_same_shape(x, y)?;
    check_universe(x, params)?;
    let d = x.rows().iter().zip(y.rows()).filter(|(a, b)| a != b).count();
    Ok(log_pmf_from_distance(d, x.len(), params))
}

/// `ln p(y | x)` for every input `x` in code order, for a fixed output `y`.
pub fn log_pmf_column(y: &Database, params: &MechanismParams) -> Result<Vec<f64>> {
    check_universe(y, params)?;
    let n = y.len();
    check_enumerable(y.universe(), n, crate::model::ENUMERATION_CAP_BITS)?;
    let card = y.universe().cardinality() as usize;
    // Distances to y, extended one row (one base-2^l digit) at a time.
    let mut dist: Vec<u8> = vec![0];
    for &yi in y.rows() {
        let mut next = Vec::with_capacity(dist.len() * card);
        for v in 0..card {
            let miss = u8::from(v as u32 != yi);
            next.extend(dist.iter().map(|&d| d + miss));
        }
        dist = next;
    }
    Ok(dist
        .into_iter()
        .map(|d| log_pmf_from_distance(d as usize, n, params))
        .collect())
}

/// Largest `|ln p(y|x) - ln p(y|x')|` over neighbor pairs for one column.
///
/// The databases agreeing off row `i` form a "line" of `2^l` mutually
/// neighboring inputs, and every neighbor pair lies on exactly one line, so
/// the maximum over pairs is the maximum over lines of the spread.
fn max_line_spread(column: &[f64], n: usize, card: usize) -> f64 {
    let mut worst = 0.0f64;
    let mut stride = 1usize;
    for _ in 0..n {
        let block = stride * card;
        for hi in (0..column.len()).step_by(block) {
            for lo in 0..stride {
                let base = hi + lo;
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for v in 0..card {
                    let val = column[base + v * stride];
                    min = min.min(val);
                    max = max.max(val);
                }
                let spread = if max == min { 0.0 } else { max - min };
                worst = worst.max(spread);
            }
        }
        stride = block;
    }
    worst
}

/// Exhaustive DP check: the largest neighbor log-likelihood ratio over all
/// inputs and outputs. For a correct mechanism this is at most `epsilon`.
pub fn verify_dp(universe: DataUniverse, n: usize, params: &MechanismParams) -> Result<f64> {
    if params.universe() != universe {
        return Err(Error::DimensionMismatch(
            "mechanism universe differs from verified universe".into(),
        ));
    }
    let total = check_enumerable(universe, n, VERIFY_CAP_BITS)?;
    let card = universe.cardinality() as usize;
    (0..total)
        .into_par_iter()
        .map(|code| {
            let y = Database::from_code(universe, n, code);
            let column = log_pmf_column(&y, params)?;
            Ok(max_line_spread(&column, n, card))
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{enumerate_databases, hamming_distance};

    fn universe(bits: u32) -> DataUniverse {
        DataUniverse::new(bits).unwrap()
    }

    #[test]
    fn params_constants() {
        let p = MechanismParams::new(3f64.ln(), universe(1)).unwrap();
        assert!((p.keep_prob() - 0.75).abs() < 1e-15);
        for bits in [1, 3, 8] {
            for eps in [0.0, 0.1, 1.0, 5.0] {
                let p = MechanismParams::new(eps, universe(bits)).unwrap();
                let total = p.keep_prob() + (p.universe().cardinality() - 1) as f64 * p.alt_prob();
                assert!((total - 1.0).abs() < 1e-12);
                assert!(p.g() >= 1.0 && p.g() <= p.universe().cardinality() as f64);
            }
        }
        assert!(MechanismParams::new(-0.1, universe(1)).is_err());
        assert!(MechanismParams::new(f64::NAN, universe(1)).is_err());
        assert!(MechanismParams::new(700.0, universe(4)).unwrap().is_identity());
        assert!(MechanismParams::new(f64::INFINITY, universe(4)).unwrap().is_identity());
    }

    #[test]
    fn identity_release_returns_input() {
        let u = universe(3);
        let x = Database::new(u, vec![1, 5, 7, 0, 2]).unwrap();
        let p = MechanismParams::new(700.0, u).unwrap();
        let y = sample_synthetic(&x, &p, &RandomSource::from_seed(1)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn universe_mismatch_errors() {
        let x = Database::new(universe(2), vec![1, 2]).unwrap();
        let p = MechanismParams::new(1.0, universe(3)).unwrap();
        assert!(sample_synthetic(&x, &p, &RandomSource::from_seed(1)).is_err());
        assert!(exact_log_pmf(&x, &x, &p).is_err());
    }

    #[test]
    fn flip_rate_at_ln3() {
        let u = universe(1);
        let p = MechanismParams::new(3f64.ln(), u).unwrap();
        let x = Database::new(u, vec![0; 1_000_000]).unwrap();
        let y = sample_synthetic(&x, &p, &RandomSource::new(11, 0)).unwrap();
        let flips = y.rows().iter().filter(|&&v| v != 0).count() as f64 / 1e6;
        assert!((flips - 0.25).abs() < 0.002, "flip rate {flips}");
    }

    #[test]
    fn uniform_output_at_zero_epsilon() {
        let u = universe(2);
        let p = MechanismParams::new(0.0, u).unwrap();
        assert!((p.keep_prob() - 0.25).abs() < 1e-15);
        let x = Database::new(u, vec![3; 400_000]).unwrap();
        let y = sample_synthetic(&x, &p, &RandomSource::new(5, 9)).unwrap();
        let h = y.histogram();
        for c in h {
            assert!((c as f64 / 4e5 - 0.25).abs() < 0.004);
        }
    }

    #[test]
    fn alternatives_skip_the_input_and_cover_the_rest() {
        let u = universe(3);
        let mut sampler = RowSampler::new(&MechanismParams::new(0.0, u).unwrap());
        sampler.keep = Bernoulli::new(0.0).unwrap();
        let mut r = RandomSource::from_seed(3).rng();
        let mut seen = [0usize; 8];
        for _ in 0..70_000 {
            seen[sampler.perturb(5, &mut r) as usize] += 1;
        }
        assert_eq!(seen[5], 0);
        for (v, &c) in seen.iter().enumerate() {
            if v != 5 {
                assert!((c as f64 / 70_000.0 - 1.0 / 7.0).abs() < 0.01, "value {v}: {c}");
            }
        }
    }

    #[test]
    fn chunked_sampling_is_reproducible() {
        let u = universe(2);
        let p = MechanismParams::new(0.7, u).unwrap();
        let x = Database::new(u, (0..100_000u32).map(|i| i % 4).collect()).unwrap();
        let s = RandomSource::new(42, 1);
        assert_eq!(sample_synthetic(&x, &p, &s).unwrap(), sample_synthetic(&x, &p, &s).unwrap());
        assert_ne!(
            sample_synthetic(&x, &p, &s).unwrap(),
            sample_synthetic(&x, &p, &RandomSource::new(42, 2)).unwrap()
        );
    }

    #[test]
    fn log_pmf_examples() {
        let u = universe(1);
        let p = MechanismParams::new(3f64.ln(), u).unwrap();
        let x = Database::new(u, vec![1]).unwrap();
        assert!((exact_log_pmf(&x, &x, &p).unwrap() - 0.75f64.ln()).abs() < 1e-14);
        let u2 = universe(2);
        let p2 = MechanismParams::new(0.8, u2).unwrap();
        let x2 = Database::new(u2, vec![1, 2, 3]).unwrap();
        let v = exact_log_pmf(&x2, &x2, &p2).unwrap();
        assert!((v + 3.0 * p2.g().ln()).abs() < 1e-14);
    }

    #[test]
    fn pmf_normalizes_on_enumerable_instances() {
        for (bits, n) in [(1, 1), (1, 4), (2, 3), (3, 2), (1, 12), (4, 3), (6, 2)] {
            let u = universe(bits);
            for eps in [0.0, 0.5, 2.0] {
                let p = MechanismParams::new(eps, u).unwrap();
                let x = Database::from_code(u, n, 5 % (1 << (bits as usize * n)));
                let total: f64 = enumerate_databases(u, n)
                    .unwrap()
                    .map(|y| exact_log_pmf(&x, &y, &p).unwrap().exp())
                    .sum();
                assert!((total - 1.0).abs() < 1e-10, "l={bits} n={n} eps={eps}: {total}");
            }
        }
    }

    #[test]
    fn column_matches_pointwise_pmf() {
        let u = universe(2);
        let p = MechanismParams::new(1.3, u).unwrap();
        let y = Database::new(u, vec![2, 0, 3]).unwrap();
        let col = log_pmf_column(&y, &p).unwrap();
        for x in enumerate_databases(u, 3).unwrap() {
            let direct = exact_log_pmf(&x, &y, &p).unwrap();
            assert!((col[x.code() as usize] - direct).abs() < 1e-12);
            let d = hamming_distance(&x, &y).unwrap() as f64;
            assert!((direct - (-1.3 * d - 3.0 * p.g().ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn verify_dp_examples() {
        let p = MechanismParams::new(0.0, universe(2)).unwrap();
        assert_eq!(verify_dp(universe(2), 3, &p).unwrap(), 0.0);
        let p = MechanismParams::new(1.0, universe(1)).unwrap();
        assert!((verify_dp(universe(1), 2, &p).unwrap() - 1.0).abs() < 1e-12);
        let p = MechanismParams::new(0.5, universe(2)).unwrap();
        assert!((verify_dp(universe(2), 1, &p).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn verify_dp_cap_and_identity() {
        let p = MechanismParams::new(1.0, universe(2)).unwrap();
        assert!(matches!(
            verify_dp(universe(2), 7, &p).unwrap_err(),
            Error::EnumerationTooLarge(_)
        ));
        let p = MechanismParams::new(800.0, universe(1)).unwrap();
        assert!(verify_dp(universe(1), 2, &p).unwrap().is_infinite());
    }

    #[test]
    fn line_spread_matches_naive_pairs() {
        // Independent check of the line decomposition on an arbitrary column.
        let card = 3usize;
        let n = 3usize;
        let total = card.pow(n as u32);
        let column: Vec<f64> = (0..total).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let digits = |mut c: usize| {
            let mut d = vec![0; n];
            for x in d.iter_mut() {
                *x = c % card;
                c /= card;
            }
            d
        };
        let mut naive = 0.0f64;
        for a in 0..total {
            for b in 0..total {
                let diff = digits(a).iter().zip(digits(b)).filter(|(x, y)| **x != *y).count();
                if diff == 1 {
                    naive = naive.max((column[a] - column[b]).abs());
                }
            }
        }
        assert!((max_line_spread(&column, n, card) - naive).abs() < 1e-15);
    }
}
