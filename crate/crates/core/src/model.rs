//! Databases over a binary-attribute universe, the neighbor relation, and
//! the seedable randomness every stochastic operation takes explicitly.
//!
//! A row is an unsigned integer in `[0, 2^l)`; attribute `k` of a row is bit
//! `k`. A database of `n` rows can also be viewed as a single integer code in
//! base `2^l` with row 0 as the least significant digit. Enumeration and the
//! exact oracles use that code.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of binary attributes.
pub const MAX_BITS: u32 = 30;

/// Enumeration of `X^n` is allowed only while `n * l` stays at or below this.
pub const ENUMERATION_CAP_BITS: usize = 24;

/// Privacy levels at or above this are treated as identity release
/// (`e^{-epsilon}` is taken to be exactly zero).
pub const IDENTITY_EPSILON: f64 = 700.0;

/// `e^{-epsilon}`, flushed to zero in the identity-release regime.
pub fn exp_neg_epsilon(epsilon: f64) -> f64 {
    if epsilon >= IDENTITY_EPSILON {
        0.0
    } else {
        (-epsilon).exp()
    }
}

/// The row domain `{0,1}^l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct DataUniverse {
    bits: u32,
}

impl DataUniverse {
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::InvalidParameter(format!(
                "universe dimension l = {bits} outside [1, {MAX_BITS}]"
            )));
        }
        Ok(DataUniverse { bits })
    }

    /// Number of binary attributes `l`.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// `2^l`.
    pub fn cardinality(&self) -> u64 {
        1u64 << self.bits
    }

    pub fn contains(&self, row: u32) -> bool {
        (row as u64) < self.cardinality()
    }
}

impl TryFrom<u32> for DataUniverse {
    type Error = Error;

    fn try_from(bits: u32) -> Result<Self> {
        DataUniverse::new(bits)
    }
}

impl From<DataUniverse> for u32 {
    fn from(u: DataUniverse) -> u32 {
        u.bits
    }
}

/// A length-`n` sequence of universe-encoded rows.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Database {
    universe: DataUniverse,
    rows: Vec<u32>,
}

impl Database {
    pub fn new(universe: DataUniverse, rows: Vec<u32>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter("database must have n >= 1 rows".into()));
        }
        if let Some((i, &v)) = rows.iter().enumerate().find(|(_, &v)| !universe.contains(v)) {
            return Err(Error::InvalidParameter(format!(
                "row {i} has value {v}, outside universe of size {}",
                universe.cardinality()
            )));
        }
        Ok(Database { universe, rows })
    }

    /// Decode the base-`2^l` database code (row 0 least significant).
    pub fn from_code(universe: DataUniverse, n: usize, code: u64) -> Self {
        let mut rows = vec![0u32; n];
        decode_rows(code, universe.bits(), &mut rows);
        Database { universe, rows }
    }

    /// Inverse of [`Database::from_code`]. Only meaningful when `n * l <= 64`.
    pub fn code(&self) -> u64 {
        let bits = self.universe.bits();
        self.rows
            .iter()
            .rev()
            .fold(0u64, |acc, &r| (acc << bits) | r as u64)
    }

    pub fn universe(&self) -> DataUniverse {
        self.universe
    }

    pub fn rows(&self) -> &[u32] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<u32> {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Per-value row counts (the histogram over the universe).
    pub fn histogram(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.universe.cardinality() as usize];
        for &r in &self.rows {
            counts[r as usize] += 1;
        }
        counts
    }

    pub(crate) fn from_parts_unchecked(universe: DataUniverse, rows: Vec<u32>) -> Self {
        debug_assert!(!rows.is_empty());
        debug_assert!(rows.iter().all(|&r| universe.contains(r)));
        Database { universe, rows }
    }
}

pub(crate) fn decode_rows(code: u64, bits: u32, out: &mut [u32]) {
    let mask = (1u64 << bits) - 1;
    let mut c = code;
    for r in out.iter_mut() {
        *r = (c & mask) as u32;
        c >>= bits;
    }
}

pub(crate) fn check_same_shape(x: &Database, y: &Database) -> Result<()> {
    if x.universe != y.universe {
        return Err(Error::DimensionMismatch(format!(
            "universes differ (l = {} vs l = {})",
            x.universe.bits(),
            y.universe.bits()
        )));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "database sizes differ (n = {} vs n = {})",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// Number of rows on which `x` and `y` differ. Rows compare as whole values.
pub fn hamming_distance(x: &Database, y: &Database) -> Result<usize> {
    check_same_shape(x, y)?;
    Ok(x.rows.iter().zip(&y.rows).filter(|(a, b)| a != b).count())
}

/// True iff the databases differ in exactly one row.
pub fn is_neighbor(x: &Database, y: &Database) -> Result<bool> {
    Ok(hamming_distance(x, y)? == 1)
}

pub(crate) fn check_enumerable(universe: DataUniverse, n: usize, cap_bits: usize) -> Result<u64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let total_bits = n.saturating_mul(universe.bits() as usize);
    if total_bits > cap_bits {
        return Err(Error::EnumerationTooLarge(format!(
            "n * l = {total_bits} exceeds the cap of {cap_bits}"
        )));
    }
    Ok(1u64 << total_bits)
}

/// Iterator over every database in `X^n`, in code order.
#[derive(Clone, Debug)]
pub struct DatabaseIter {
    universe: DataUniverse,
    n: usize,
    next: u64,
    total: u64,
}

impl Iterator for DatabaseIter {
    type Item = Database;

    fn next(&mut self) -> Option<Database> {
        if self.next >= self.total {
            return None;
        }
        let db = Database::from_code(self.universe, self.n, self.next);
        self.next += 1;
        Some(db)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.total - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for DatabaseIter {}

/// All `2^{nl}` databases of `n` rows, each exactly once.
pub fn enumerate_databases(universe: DataUniverse, n: usize) -> Result<DatabaseIter> {
    let total = check_enumerable(universe, n, ENUMERATION_CAP_BITS)?;
    Ok(DatabaseIter {
        universe,
        n,
        next: 0,
        total,
    })
}

/// A reproducible randomness handle: a seed plus a stream id.
///
/// The same `(seed, stream)` always yields the same draw sequence; distinct
/// stream ids select distinct ChaCha streams under the same key. Child
/// sources give every parallel unit of work its own stream, so results never
/// depend on scheduling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomSource {
    pub seed: u64,
    pub stream: u64,
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        RandomSource { seed, stream }
    }

    pub fn from_seed(seed: u64) -> Self {
        RandomSource { seed, stream: 0 }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Derived source for sub-task `index`, keyed by this source's identity.
    pub fn child(&self, index: u64) -> RandomSource {
        let key = splitmix64(self.seed ^ splitmix64(self.stream ^ 0xA5A5_5A5A_C3C3_3C3C));
        RandomSource {
            seed: key,
            stream: index,
        }
    }

    /// Child derived from a textual label, for named sub-experiments.
    pub fn labeled(&self, label: &str) -> RandomSource {
        // FNV-1a, fixed so labels map identically across platforms.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        self.child(h)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
