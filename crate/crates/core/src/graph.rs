//! Graphs as edge-indicator databases and private cut queries.
//!
//! A graph on `|V|` vertices is the `l = 1` database of `n = |V|^2` rows,
//! row `i * |V| + j` being 1 iff the ordered pair `(i, j)` is an edge.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{check_cut_sides, debias_cut, graph_side, raw_cut_count};
use crate::mechanism::{sample_synthetic, MechanismParams};
use crate::model::{DataUniverse, Database, RandomSource};

/// Largest supported `|V|^2`.
pub const MAX_VERTEX_PAIRS: usize = 100_000_000;

/// How an edge-list line maps to vertex-pair rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeConvention {
    /// Each line `i j` sets both `(i, j)` and `(j, i)`.
    #[default]
    Symmetric,
    /// Each line sets only `(i, j)`.
    Directed,
}

/// Vertex numbering of an edge-list file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexBase {
    #[default]
    Zero,
    One,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        check_vertex_count(vertex_count)?;
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= vertex_count || j >= vertex_count {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) outside a graph of {vertex_count} vertices"
                )));
            }
            set.insert((i, j));
        }
        Ok(Graph {
            vertex_count,
            edges: set,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i, j))
    }

    /// The `|V|^2`-row edge-indicator database.
    pub fn encode(&self) -> Database {
        let v = self.vertex_count;
        let mut rows = vec![0u32; v * v];
        for &(i, j) in &self.edges {
            rows[i * v + j] = 1;
        }
        Database::new(DataUniverse::new(1).expect("l = 1 is valid"), rows).expect("rows are 0/1")
    }

    pub fn decode(y: &Database) -> Result<Self> {
        let v = graph_side(y)?;
        let edges = y
            .rows()
            .iter()
            .enumerate()
            .filter(|(_, &r)| r == 1)
            .map(|(k, _)| (k / v, k % v));
        Graph::new(v, edges)
    }

    /// Parse an edge list: one `i j` pair per line, `#` starts a comment.
    /// The vertex count is one more than the largest id unless given.
    pub fn from_edge_list<R: Read>(
        reader: R,
        base: VertexBase,
        convention: EdgeConvention,
        vertex_count: Option<usize>,
    ) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut largest = None;
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
            if fields.len() != 2 {
                return Err(Error::parse(lineno, format!("expected two vertex ids, found {}", fields.len())));
            }
            let mut ids = [0usize; 2];
            for (slot, field) in ids.iter_mut().zip(&fields) {
                let raw: usize = field
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("not a vertex id: {field:?}")))?;
                *slot = match base {
                    VertexBase::Zero => raw,
                    VertexBase::One => raw
                        .checked_sub(1)
                        .ok_or_else(|| Error::parse(lineno, "vertex id 0 in a one-based edge list"))?,
                };
            }
            largest = largest.max(Some(ids[0].max(ids[1])));
            pairs.push((ids[0], ids[1], lineno));
        }
        let vertex_count = match (vertex_count, largest) {
            (Some(v), _) => v,
            (None, Some(m)) => m + 1,
            (None, None) => return Err(Error::parse(0, "edge list has no edges")),
        };
        let mut edges = Vec::with_capacity(pairs.len() * 2);
        for (i, j, lineno) in pairs {
            if i >= vertex_count || j >= vertex_count {
                return Err(Error::parse(lineno, format!("vertex id outside {vertex_count} vertices")));
            }
            edges.push((i, j));
            if convention == EdgeConvention::Symmetric {
                edges.push((j, i));
            }
        }
        Graph::new(vertex_count, edges)
    }

    /// Erdős–Rényi graph: every ordered pair `(i, j)`, `i != j`, is an edge
    /// independently with probability `p`. Symmetric when `undirected`.
    pub fn erdos_renyi(vertex_count: usize, p: f64, undirected: bool, rng: &RandomSource) -> Result<Self> {
        check_vertex_count(vertex_count)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("edge probability {p} outside [0, 1]")));
        }
        let mut r = rng.rng();
        let mut edges = Vec::new();
        for i in 0..vertex_count {
            let start = if undirected { i + 1 } else { 0 };
            for j in start..vertex_count {
                if i != j && r.gen_bool(p) {
                    edges.push((i, j));
                    if undirected {
                        edges.push((j, i));
                    }
                }
            }
        }
        Graph::new(vertex_count, edges)
    }

    /// Undirected preferential-attachment graph: each new vertex links to
    /// `m` distinct earlier vertices chosen proportionally to degree.
    pub fn power_law(vertex_count: usize, m: usize, rng: &RandomSource) -> Result<Self> {
        check_vertex_count(vertex_count)?;
        if m == 0 || m >= vertex_count {
            return Err(Error::InvalidParameter(format!(
                "attachment count m = {m} must lie in [1, {})",
                vertex_count
            )));
        }
        let mut r = rng.rng();
        let mut edges = Vec::new();
        // Endpoint multiset; sampling from it is degree-proportional.
        let mut endpoints: Vec<usize> = Vec::new();
        // Seed clique on the first m + 1 vertices.
        for i in 0..=m {
            for j in 0..i {
                edges.push((i, j));
                edges.push((j, i));
                endpoints.push(i);
                endpoints.push(j);
            }
        }
        for v in (m + 1)..vertex_count {
            let mut targets = BTreeSet::new();
            while targets.len() < m {
                targets.insert(*endpoints.choose(&mut r).expect("seed clique is nonempty"));
            }
            for t in targets {
                edges.push((v, t));
                edges.push((t, v));
                endpoints.push(v);
                endpoints.push(t);
            }
        }
        Graph::new(vertex_count, edges)
    }
}

fn check_vertex_count(vertex_count: usize) -> Result<()> {
    if vertex_count == 0 {
        return Err(Error::InvalidParameter("graph needs at least one vertex".into()));
    }
    if vertex_count.checked_mul(vertex_count).is_none_or(|n| n > MAX_VERTEX_PAIRS) {
        return Err(Error::InvalidParameter(format!(
            "|V|^2 for |V| = {vertex_count} exceeds {MAX_VERTEX_PAIRS}"
        )));
    }
    Ok(())
}

/// A pair of disjoint vertex sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutQuery {
    s: Vec<usize>,
    t: Vec<usize>,
}

impl CutQuery {
    pub fn new(vertex_count: usize, s: Vec<usize>, t: Vec<usize>) -> Result<Self> {
        check_cut_sides(vertex_count, &s, &t)?;
        Ok(CutQuery { s, t })
    }

    /// Two lines of whitespace-separated vertex ids: `S`, then `T`.
    /// Blank lines and `#` comments are skipped.
    pub fn from_text(text: &str, vertex_count: usize, base: VertexBase) -> Result<Self> {
        let mut sides = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let ids = content
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|f| {
                    let raw: usize = f
                        .parse()
                        .map_err(|_| Error::parse(idx + 1, format!("not a vertex id: {f:?}")))?;
                    match base {
                        VertexBase::Zero => Ok(raw),
                        VertexBase::One => raw
                            .checked_sub(1)
                            .ok_or_else(|| Error::parse(idx + 1, "vertex id 0 in one-based cut")),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            sides.push(ids);
        }
        if sides.len() != 2 {
            return Err(Error::parse(0, format!("cut file needs two lines (S, T), found {}", sides.len())));
        }
        let t = sides.pop().expect("two sides");
        let s = sides.pop().expect("two sides");
        CutQuery::new(vertex_count, s, t)
    }

    pub fn s(&self) -> &[usize] {
        &self.s
    }

    pub fn t(&self) -> &[usize] {
        &self.t
    }

    /// `|S| |T|`.
    pub fn pairs(&self) -> usize {
        self.s.len() * self.t.len()
    }
}

/// Number of edges `(i, j)` with `i` in `S` and `j` in `T`.
pub fn cut_value(g: &Graph, q: &CutQuery) -> Result<u64> {
    check_cut_sides(g.vertex_count, &q.s, &q.t)?;
    let mut count = 0u64;
    for &i in &q.s {
        count += q.t.iter().filter(|&&j| g.has_edge(i, j)).count() as u64;
    }
    Ok(count)
}

/// Release the edge-indicator database through the mechanism with `l = 1`.
pub fn release_graph(g: &Graph, epsilon: f64, rng: &RandomSource) -> Result<Database> {
    let x = g.encode();
    let params = MechanismParams::new(epsilon, x.universe())?;
    sample_synthetic(&x, &params, rng)
}

/// Unbiased cut estimate from a released edge-indicator database.
pub fn answer_cut(y: &Database, q: &CutQuery, epsilon: f64) -> Result<f64> {
    crate::estimators::estimate_cut(y, &q.s, &q.t, epsilon)
}

/// Raw crossing count on a released database, then debiasing. Same as
/// [`answer_cut`] but reuses a validated query.
pub(crate) fn answer_cut_fast(y: &Database, q: &CutQuery, epsilon: f64) -> Result<f64> {
    Ok(debias_cut(raw_cut_count(y, &q.s, &q.t)? as f64, q.pairs(), epsilon))
}

/// `S` a uniform `floor(|V|/2)`-subset, `T` its complement.
pub fn random_bisection_cut(g: &Graph, rng: &RandomSource) -> Result<CutQuery> {
    let v = g.vertex_count;
    if v < 2 {
        return Err(Error::InvalidParameter("bisection needs at least two vertices".into()));
    }
    let mut r = rng.rng();
    let mut in_s = vec![false; v];
    for i in index::sample(&mut r, v, v / 2) {
        in_s[i] = true;
    }
    let s = (0..v).filter(|&i| in_s[i]).collect();
    let t = (0..v).filter(|&i| !in_s[i]).collect();
    CutQuery::new(v, s, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::cut_bound;
    use crate::model::enumerate_databases;
    use proptest::prelude::*;

    #[test]
    fn cut_value_examples() {
        let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(cut_value(&g, &CutQuery::new(3, vec![0, 1], vec![2]).unwrap()).unwrap(), 1);
        assert_eq!(cut_value(&g, &CutQuery::new(3, vec![], vec![2]).unwrap()).unwrap(), 0);
        let complete: Vec<_> = (0..5).flat_map(|i| (0..5).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        let k5 = Graph::new(5, complete).unwrap();
        assert_eq!(cut_value(&k5, &CutQuery::new(5, vec![0, 1], vec![2, 3, 4]).unwrap()).unwrap(), 6);
        assert!(CutQuery::new(3, vec![0, 1], vec![1]).is_err());
        assert!(CutQuery::new(3, vec![0], vec![3]).is_err());
    }

    #[test]
    fn cut_value_equals_indicator_sum() {
        let g = Graph::erdos_renyi(20, 0.3, false, &RandomSource::from_seed(2)).unwrap();
        let q = random_bisection_cut(&g, &RandomSource::from_seed(3)).unwrap();
        let x = g.encode();
        assert_eq!(cut_value(&g, &q).unwrap(), raw_cut_count(&x, q.s(), q.t()).unwrap());
    }

    #[test]
    fn identity_release_and_flip_rate() {
        let g = Graph::erdos_renyi(30, 0.2, true, &RandomSource::from_seed(2)).unwrap();
        assert_eq!(Graph::decode(&release_graph(&g, 700.0, &RandomSource::from_seed(1)).unwrap()).unwrap(), g);
        let empty = Graph::new(1000, []).unwrap();
        let y = release_graph(&empty, 1.0, &RandomSource::from_seed(9)).unwrap();
        let rate = y.rows().iter().filter(|&&r| r == 1).count() as f64 / 1e6;
        assert!((rate - 0.268_941_421_369_995_1).abs() < 0.002, "{rate}");
        let y0 = release_graph(&empty, 0.0, &RandomSource::from_seed(9)).unwrap();
        let rate0 = y0.rows().iter().filter(|&&r| r == 1).count() as f64 / 1e6;
        assert!((rate0 - 0.5).abs() < 0.002);
    }

    #[test]
    fn cut_estimate_unbiased_on_three_vertices() {
        let g = Graph::new(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        let x = g.encode();
        let q = CutQuery::new(3, vec![0], vec![1, 2]).unwrap();
        let eps = 1.0;
        let params = MechanismParams::new(eps, x.universe()).unwrap();
        let mut mean = 0.0;
        let mut abs_err = 0.0;
        let truth = cut_value(&g, &q).unwrap() as f64;
        for y in enumerate_databases(x.universe(), 9).unwrap() {
            let p = crate::mechanism::exact_log_pmf(&x, &y, &params).unwrap().exp();
            let est = answer_cut(&y, &q, eps).unwrap();
            mean += p * est;
            abs_err += p * (est - truth).abs();
        }
        assert!((mean - truth).abs() < 1e-10);
        assert!(abs_err <= cut_bound(1, 2, eps).unwrap());
        assert_eq!(answer_cut(&x, &q, 700.0).unwrap(), truth);
    }

    #[test]
    fn bisection_shape() {
        for v in [2usize, 3, 10, 577] {
            let g = Graph::new(v, []).unwrap();
            let q = random_bisection_cut(&g, &RandomSource::from_seed(v as u64)).unwrap();
            assert_eq!(q.s().len(), v / 2);
            assert_eq!(q.s().len() + q.t().len(), v);
        }
        assert!(random_bisection_cut(&Graph::new(1, []).unwrap(), &RandomSource::from_seed(0)).is_err());
    }

    #[test]
    fn edge_list_parsing() {
        let text = "# comment\n1 2\n2 3 # trailing\n\n";
        let g = Graph::from_edge_list(text.as_bytes(), VertexBase::One, EdgeConvention::Symmetric, None).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 4);
        assert!(g.has_edge(1, 0) && g.has_edge(0, 1));
        let d = Graph::from_edge_list("0 1\n1 2\n".as_bytes(), VertexBase::Zero, EdgeConvention::Directed, Some(5)).unwrap();
        assert_eq!((d.vertex_count(), d.edge_count()), (5, 2));
        let e = Graph::from_edge_list("0 1\n1 x\n".as_bytes(), VertexBase::Zero, EdgeConvention::Directed, None).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(Graph::from_edge_list("0 1 2\n".as_bytes(), VertexBase::Zero, EdgeConvention::Directed, None).is_err());
        assert!(Graph::from_edge_list("0 1\n".as_bytes(), VertexBase::One, EdgeConvention::Directed, None).is_err());
        assert!(Graph::from_edge_list("# only\n".as_bytes(), VertexBase::Zero, EdgeConvention::Directed, None).is_err());
    }

    #[test]
    fn cut_file_parsing() {
        let q = CutQuery::from_text("0 1\n2 3\n", 4, VertexBase::Zero).unwrap();
        assert_eq!((q.s(), q.t()), (&[0, 1][..], &[2, 3][..]));
        let q = CutQuery::from_text("# S then T\n1\n2,3\n", 3, VertexBase::One).unwrap();
        assert_eq!((q.s(), q.t()), (&[0][..], &[1, 2][..]));
        assert!(CutQuery::from_text("0 1\n", 4, VertexBase::Zero).is_err());
        assert!(CutQuery::from_text("0 1\n1 2\n", 4, VertexBase::Zero).is_err());
    }

    #[test]
    fn generators() {
        let g = Graph::power_law(200, 3, &RandomSource::from_seed(5)).unwrap();
        assert!(g.edges().iter().all(|&(i, j)| i != j && g.has_edge(j, i)));
        let max_degree = (0..200).map(|i| (0..200).filter(|&j| g.has_edge(i, j)).count()).max().unwrap();
        assert!(max_degree > 20, "power-law hub degree {max_degree}");
        let er = Graph::erdos_renyi(100, 0.1, true, &RandomSource::from_seed(5)).unwrap();
        let density = er.edge_count() as f64 / (100.0 * 99.0);
        assert!((density - 0.1).abs() < 0.02);
        assert!(Graph::power_law(5, 5, &RandomSource::from_seed(0)).is_err());
        assert!(Graph::new(20_000, []).is_err());
    }

    proptest! {
        #[test]
        fn encoding_round_trip(v in 1usize..=64, seed in any::<u64>(), p in 0.0f64..1.0) {
            let g = Graph::erdos_renyi(v, p, false, &RandomSource::from_seed(seed)).unwrap();
            prop_assert_eq!(Graph::decode(&g.encode()).unwrap(), g);
        }
    }
}
