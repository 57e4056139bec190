//! Thresholded correlation graphs.
//!
//! Entries of the sample correlation matrix whose magnitude reaches `alpha`
//! become weighted edges. The dense `p × p` matrix is never materialized:
//! [`build_graph`] walks it in square tiles sized to a memory budget, and
//! [`LazyCorrGraph`] computes the neighbor list of a feature only when a
//! search first reaches it.
//!
//! Correlations are pooled within classes by default: each column is centered
//! on its own class mean before cross-products are taken, so a shift in class
//! means cannot by itself create an edge.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dot, dot_panel};

/// How the sample correlation is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationEstimator {
    /// Columns centered per class before cross-products.
    #[default]
    PooledWithinClass,
    /// Ordinary sample correlation around the overall column mean.
    Plain,
}

/// Subgraph depth: the number of edges a member may be away from its anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Depth {
    Limited(usize),
    Unlimited,
}

impl Depth {
    pub fn limit(self) -> usize {
        match self {
            Depth::Limited(m) => m,
            Depth::Unlimited => usize::MAX,
        }
    }
}

impl std::fmt::Display for Depth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Depth::Limited(m) => write!(f, "{m}"),
            Depth::Unlimited => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Depth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "unlimited" | "∞" => Ok(Depth::Unlimited),
            t => t
                .parse()
                .map(Depth::Limited)
                .map_err(|_| Error::InvalidParameter(format!("depth `{s}`"))),
        }
    }
}

/// Feature columns centered (per class or overall) and scaled to unit norm,
/// stored contiguously per feature. The dot product of two columns is their
/// sample correlation.
#[derive(Debug, Clone)]
pub struct CorrelationSource {
    rows: usize,
    p: usize,
    columns: Vec<f64>,
    estimator: CorrelationEstimator,
}

impl CorrelationSource {
    pub fn new(data: &LabeledMatrix, estimator: CorrelationEstimator) -> Result<Self> {
        let (n, p) = (data.n(), data.p());
        let groups = match estimator {
            CorrelationEstimator::PooledWithinClass => data.k(),
            CorrelationEstimator::Plain => 1,
        };
        let group_of = |i: usize| match estimator {
            CorrelationEstimator::PooledWithinClass => data.labels()[i] - 1,
            CorrelationEstimator::Plain => 0,
        };
        let mut counts = vec![0usize; groups];
        let mut means = vec![0.0; groups * p];
        for i in 0..n {
            let g = group_of(i);
            counts[g] += 1;
            for (m, x) in means[g * p..(g + 1) * p].iter_mut().zip(data.row(i)) {
                *m += x;
            }
        }
        for (g, &c) in counts.iter().enumerate() {
            if c > 0 {
                means[g * p..(g + 1) * p].iter_mut().for_each(|m| *m /= c as f64);
            }
        }
        let mut columns = vec![0.0; n * p];
        for i in 0..n {
            let g = group_of(i);
            let mu = &means[g * p..(g + 1) * p];
            for (j, (x, m)) in data.row(i).iter().zip(mu).enumerate() {
                columns[j * n + i] = x - m;
            }
        }
        for (j, col) in columns.chunks_exact_mut(n).enumerate() {
            let norm = dot(col, col).sqrt();
            if !(norm > 0.0) {
                return Err(Error::ZeroVarianceColumn(j));
            }
            col.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(CorrelationSource {
            rows: n,
            p,
            columns,
            estimator,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of samples the correlations were estimated from.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn estimator(&self) -> CorrelationEstimator {
        self.estimator
    }

    fn column(&self, j: usize) -> &[f64] {
        &self.columns[j * self.rows..(j + 1) * self.rows]
    }

    /// Sample correlation of features `j` and `k`. The arguments are ordered
    /// internally so the value is bitwise symmetric.
    pub fn correlation(&self, j: usize, k: usize) -> f64 {
        if j == k {
            return 1.0;
        }
        let (a, b) = if j < k { (j, k) } else { (k, j) };
        dot(self.column(a), self.column(b))
    }

    /// Neighbor lists of several features from one pass over the columns.
    /// Each list equals [`CorrelationSource::neighbors_above`] exactly.
    pub fn neighbors_above_many(&self, nodes: &[usize], alpha: f64) -> Vec<Vec<(usize, f64)>> {
        const PANEL: usize = 256;
        const LANES: usize = 8;
        let mut lists = vec![Vec::new(); nodes.len()];
        let groups: Vec<usize> = (0..nodes.len()).step_by(LANES).collect();
        let mut out = Vec::with_capacity(PANEL);
        for k0 in (0..self.p).step_by(PANEL) {
            let k1 = (k0 + PANEL).min(self.p);
            let panel = &self.columns[k0 * self.rows..k1 * self.rows];
            for &g in &groups {
                let idx: [usize; LANES] = std::array::from_fn(|t| nodes[(g + t).min(nodes.len() - 1)]);
                dot_panel(idx.map(|j| self.column(j)), panel, self.rows, &mut out);
                for (k, r) in (k0..k1).zip(&out) {
                    for t in 0..LANES.min(nodes.len() - g) {
                        if k != idx[t] && r[t].abs() >= alpha {
                            lists[g + t].push((k, r[t]));
                        }
                    }
                }
            }
        }
        lists
    }

    /// Thresholded correlations within `nodes`: entry `i` lists `(t, corr)` for
    /// every `t > i` with `|corr(nodes[i], nodes[t])| >= alpha`.
    pub fn pairs_above(&self, nodes: &[usize], alpha: f64) -> Vec<Vec<(usize, f64)>> {
        const LANES: usize = 8;
        let n = self.rows;
        let packed: Vec<f64> = nodes.iter().flat_map(|&j| self.column(j).iter().copied()).collect();
        let groups: Vec<usize> = (0..nodes.len()).step_by(LANES).collect();
        let found: Vec<Vec<Vec<(usize, f64)>>> = groups
            .par_iter()
            .map(|&g| {
                let lanes = LANES.min(nodes.len() - g);
                let idx: [usize; LANES] = std::array::from_fn(|t| (g + t).min(nodes.len() - 1));
                let mut lists = vec![Vec::new(); lanes];
                let mut out = Vec::new();
                dot_panel(idx.map(|i| &packed[i * n..(i + 1) * n]), &packed[(g + 1) * n..], n, &mut out);
                for (c, r) in (g + 1..).zip(&out) {
                    for t in 0..lanes {
                        if c > g + t && r[t].abs() >= alpha {
                            lists[t].push((c, r[t]));
                        }
                    }
                }
                lists
            })
            .collect();
        found.into_iter().flatten().collect()
    }

    /// All `k != j` with `|corr(j, k)| >= alpha`, ascending in `k`.
    pub fn neighbors_above(&self, j: usize, alpha: f64) -> Vec<(usize, f64)> {
        (0..self.p)
            .filter(|&k| k != j)
            .filter_map(|k| {
                let r = self.correlation(j, k);
                (r.abs() >= alpha).then_some((k, r))
            })
            .collect()
    }
}

/// Read access to a thresholded correlation graph, whether fully built or
/// explored on demand.
pub trait NeighborGraph: Sync {
    fn p(&self) -> usize;

    fn alpha(&self) -> f64;

    /// Samples behind the correlation estimate, when known.
    fn sample_size(&self) -> Option<usize>;

    /// Thresholded neighbors of `j` with their edge values, ascending by index.
    fn neighbors(&self, j: usize) -> Arc<Vec<(usize, f64)>>;

    /// Component label of `j` when the graph knows its global components.
    fn component_id(&self, j: usize) -> Option<usize>;

    /// Hint that the neighbor lists of `nodes` are about to be read.
    fn prefetch(&self, _nodes: &[usize]) {}

    /// Edges of the subgraph induced by the sorted `members`: entry `a` lists
    /// `(b, value)` for every neighbor `members[b]` of `members[a]`, ascending in `b`.
    fn induced(&self, members: &[usize]) -> Vec<Vec<(usize, f64)>> {
        members
            .iter()
            .map(|&j| {
                self.neighbors(j)
                    .iter()
                    .filter_map(|&(k, r)| members.binary_search(&k).ok().map(|b| (b, r)))
                    .collect()
            })
            .collect()
    }

    /// Entry `(j, k)` of the thresholded matrix with unit diagonal.
    fn value(&self, j: usize, k: usize) -> f64 {
        if j == k {
            return 1.0;
        }
        let nb = self.neighbors(j);
        match nb.binary_search_by_key(&k, |&(i, _)| i) {
            Ok(pos) => nb[pos].1,
            Err(_) => 0.0,
        }
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    /// Labels every element with the smallest element of its set.
    pub fn canonical_labels(&mut self) -> Vec<usize> {
        let n = self.parent.len();
        let mut smallest = vec![usize::MAX; n];
        for x in 0..n {
            let r = self.find(x);
            smallest[r] = smallest[r].min(x);
        }
        (0..n).map(|x| smallest[self.find(x)]).collect()
    }
}

/// Sparse symmetric thresholded correlation matrix plus its connected
/// components. Each unordered pair is stored once.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdedCorrGraph {
    p: usize,
    alpha: f64,
    sample_size: Option<usize>,
    edges: BTreeMap<(usize, usize), f64>,
    adjacency: Vec<Vec<usize>>,
    component_id: Vec<usize>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "correlation threshold {alpha} must lie in (0, 1)"
        )));
    }
    Ok(())
}

impl ThresholdedCorrGraph {
    /// Graph from an explicit edge list. Components are labeled on return.
    pub fn from_edges(
        p: usize,
        alpha: f64,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (j, k, v) in edges {
            if j >= p || k >= p || j == k {
                return Err(Error::InvalidParameter(format!("edge ({j}, {k}) with p = {p}")));
            }
            if !(v.abs() >= alpha) {
                return Err(Error::InvalidParameter(format!(
                    "edge ({j}, {k}) value {v} is below threshold {alpha}"
                )));
            }
            map.insert((j.min(k), j.max(k)), v);
        }
        let mut adjacency = vec![Vec::new(); p];
        for &(j, k) in map.keys() {
            adjacency[j].push(k);
            adjacency[k].push(j);
        }
        adjacency.iter_mut().for_each(|a| a.sort_unstable());
        Ok(ThresholdedCorrGraph {
            p,
            alpha,
            sample_size: None,
            edges: map,
            adjacency,
            component_id: (0..p).collect(),
        }
        .connected_components())
    }

    /// Thresholds a dense symmetric row-major matrix (the diagonal is ignored).
    pub fn from_dense(matrix: &[f64], p: usize, alpha: f64) -> Result<Self> {
        assert_eq!(matrix.len(), p * p);
        let edges = (0..p).flat_map(|j| {
            (j + 1..p).filter_map(move |k| {
                let v = matrix[j * p + k];
                (v.abs() >= alpha).then_some((j, k, v))
            })
        });
        Self::from_edges(p, alpha, edges.collect::<Vec<_>>())
    }

    pub fn with_sample_size(mut self, n: usize) -> Self {
        self.sample_size = Some(n);
        self
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(j, k, value)` with `j < k`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().map(|(&(j, k), &v)| (j, k, v))
    }

    pub fn edge_value(&self, j: usize, k: usize) -> Option<f64> {
        self.edges.get(&(j.min(k), j.max(k))).copied()
    }

    pub fn adjacency(&self, j: usize) -> &[usize] {
        &self.adjacency[j]
    }

    pub fn component_ids(&self) -> &[usize] {
        &self.component_id
    }

    /// Component id → sorted members. Ids are the smallest member index.
    pub fn component_members(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (j, &c) in self.component_id.iter().enumerate() {
            out.entry(c).or_default().push(j);
        }
        out
    }

    pub fn members_of(&self, component: usize) -> Vec<usize> {
        (0..self.p).filter(|&j| self.component_id[j] == component).collect()
    }

    /// Recomputes component labels with union-find.
    pub fn connected_components(mut self) -> Self {
        let mut uf = UnionFind::new(self.p);
        for &(j, k) in self.edges.keys() {
            uf.union(j, k);
        }
        self.component_id = uf.canonical_labels();
        self
    }

    pub fn write_edges_csv(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["feature_a", "feature_b", "value"])?;
        for (j, k, v) in self.edges() {
            wtr.write_record([(j + 1).to_string(), (k + 1).to_string(), v.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<edges csv>", e))?;
        Ok(())
    }

    pub fn write_components_csv(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["feature", "component_id"])?;
        for (j, &c) in self.component_id.iter().enumerate() {
            wtr.write_record([(j + 1).to_string(), (c + 1).to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<components csv>", e))?;
        Ok(())
    }
}

impl NeighborGraph for ThresholdedCorrGraph {
    fn p(&self) -> usize {
        self.p
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn sample_size(&self) -> Option<usize> {
        self.sample_size
    }

    fn neighbors(&self, j: usize) -> Arc<Vec<(usize, f64)>> {
        Arc::new(
            self.adjacency[j]
                .iter()
                .map(|&k| (k, self.edges[&(j.min(k), j.max(k))]))
                .collect(),
        )
    }

    fn component_id(&self, j: usize) -> Option<usize> {
        Some(self.component_id[j])
    }

    fn value(&self, j: usize, k: usize) -> f64 {
        if j == k {
            1.0
        } else {
            self.edge_value(j, k).unwrap_or(0.0)
        }
    }
}

/// Columns whose sample sd is further than this from 1 are rejected.
const STANDARDIZED_TOLERANCE: f64 = 1e-6;

fn check_standardized(data: &LabeledMatrix) -> Result<()> {
    let (n, p) = (data.n(), data.p());
    if n < 2 {
        return Err(Error::InvalidData("need at least two rows".into()));
    }
    let mut sum = vec![0.0; p];
    let mut sq = vec![0.0; p];
    for i in 0..n {
        for (j, &x) in data.row(i).iter().enumerate() {
            sum[j] += x;
            sq[j] += x * x;
        }
    }
    for j in 0..p {
        let mean = sum[j] / n as f64;
        let var = (sq[j] - n as f64 * mean * mean) / (n - 1) as f64;
        let sd = var.max(0.0).sqrt();
        if (sd - 1.0).abs() > STANDARDIZED_TOLERANCE {
            return Err(Error::NotStandardized { column: j, sd });
        }
    }
    Ok(())
}

/// Builds the full thresholded graph of standardized data.
///
/// The correlation matrix is visited in `w × w` tiles, where `w` is the widest
/// tile whose two column panels and result buffer fit in `memory_budget`
/// bytes. Each entry is computed by the same kernel whatever the tiling, so
/// the edge set does not depend on the budget.
pub fn build_graph(
    data: &LabeledMatrix,
    alpha: f64,
    memory_budget: usize,
    estimator: CorrelationEstimator,
) -> Result<ThresholdedCorrGraph> {
    check_alpha(alpha)?;
    check_standardized(data)?;
    let source = CorrelationSource::new(data, estimator)?;
    let tile = tile_width(source.rows(), source.p(), memory_budget)?;
    build_graph_from_source(&source, alpha, tile)
}

fn tile_width(n: usize, p: usize, budget: usize) -> Result<usize> {
    let bytes = |w: usize| 8 * (2 * n * w + w * w);
    if bytes(1) > budget {
        return Err(Error::BudgetTooSmall {
            budget,
            needed: bytes(1),
        });
    }
    let mut w = 1;
    while w < p && bytes(w * 2) <= budget {
        w *= 2;
    }
    while w < p && bytes(w + 1) <= budget && w < 4096 {
        w += 1;
    }
    Ok(w.min(p))
}

pub(crate) fn build_graph_from_source(
    source: &CorrelationSource,
    alpha: f64,
    tile: usize,
) -> Result<ThresholdedCorrGraph> {
    check_alpha(alpha)?;
    let p = source.p();
    let starts: Vec<usize> = (0..p).step_by(tile.max(1)).collect();
    let per_row: Vec<Vec<(usize, usize, f64)>> = starts
        .par_iter()
        .map(|&r0| {
            let r1 = (r0 + tile).min(p);
            let mut buf = vec![0.0; tile * tile];
            let mut found = Vec::new();
            for &c0 in starts.iter().filter(|&&c| c >= r0) {
                let c1 = (c0 + tile).min(p);
                for j in r0..r1 {
                    for k in c0.max(j + 1)..c1 {
                        buf[(j - r0) * tile + (k - c0)] = source.correlation(j, k);
                    }
                }
                for j in r0..r1 {
                    for k in c0.max(j + 1)..c1 {
                        let v = buf[(j - r0) * tile + (k - c0)];
                        if v.abs() >= alpha {
                            found.push((j, k, v));
                        }
                    }
                }
            }
            found
        })
        .collect();
    Ok(
        ThresholdedCorrGraph::from_edges(p, alpha, per_row.into_iter().flatten())?
            .with_sample_size(source.rows()),
    )
}

/// Thresholded neighbors of one feature with their edge values.
type NeighborList = Arc<Vec<(usize, f64)>>;

/// A thresholded graph whose neighbor lists are computed on first use and
/// cached. Searches that stay local touch only a few hundred of the `p`
/// features, so this is far cheaper than building every edge.
#[derive(Debug)]
pub struct LazyCorrGraph {
    source: Arc<CorrelationSource>,
    alpha: f64,
    cache: Mutex<HashMap<usize, NeighborList>>,
    sweeps: AtomicUsize,
}

impl LazyCorrGraph {
    pub fn new(source: Arc<CorrelationSource>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(LazyCorrGraph {
            source,
            alpha,
            cache: Mutex::new(HashMap::new()),
            sweeps: AtomicUsize::new(0),
        })
    }

    pub fn source(&self) -> &CorrelationSource {
        &self.source
    }

    /// Number of neighbor lists computed so far.
    pub fn sweeps(&self) -> usize {
        self.sweeps.load(Ordering::Relaxed)
    }
}

impl NeighborGraph for LazyCorrGraph {
    fn p(&self) -> usize {
        self.source.p()
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn sample_size(&self) -> Option<usize> {
        Some(self.source.rows())
    }

    fn neighbors(&self, j: usize) -> Arc<Vec<(usize, f64)>> {
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&j) {
            return hit.clone();
        }
        let list = Arc::new(self.source.neighbors_above(j, self.alpha));
        self.sweeps.fetch_add(1, Ordering::Relaxed);
        self.cache
            .lock()
            .expect("cache lock")
            .entry(j)
            .or_insert(list)
            .clone()
    }

    fn prefetch(&self, nodes: &[usize]) {
        let missing: Vec<usize> = {
            let cache = self.cache.lock().expect("cache lock");
            let mut m: Vec<usize> = nodes.iter().copied().filter(|j| !cache.contains_key(j)).collect();
            m.sort_unstable();
            m.dedup();
            m
        };
        if missing.is_empty() {
            return;
        }
        let lists: Vec<Vec<(usize, f64)>> = missing
            .par_chunks(64)
            .flat_map_iter(|batch| self.source.neighbors_above_many(batch, self.alpha))
            .collect();
        self.sweeps.fetch_add(missing.len(), Ordering::Relaxed);
        let mut cache = self.cache.lock().expect("cache lock");
        for (j, list) in missing.into_iter().zip(lists) {
            cache.entry(j).or_insert_with(|| Arc::new(list));
        }
    }

    /// Members without a cached list are paired directly rather than swept.
    fn induced(&self, members: &[usize]) -> Vec<Vec<(usize, f64)>> {
        let lists: Vec<Option<NeighborList>> = {
            let cache = self.cache.lock().expect("cache lock");
            members.iter().map(|j| cache.get(j).cloned()).collect()
        };
        let mut out = vec![Vec::new(); members.len()];
        for (a, list) in lists.iter().enumerate() {
            for &(k, r) in list.iter().flat_map(|l| l.iter()) {
                if let Ok(b) = members.binary_search(&k) {
                    out[a].push((b, r));
                    if lists[b].is_none() {
                        out[b].push((a, r));
                    }
                }
            }
        }
        let open: Vec<usize> = (0..members.len()).filter(|&a| lists[a].is_none()).collect();
        let open_nodes: Vec<usize> = open.iter().map(|&a| members[a]).collect();
        let pairs = self.source.pairs_above(&open_nodes, self.alpha);
        for (&a, found) in open.iter().zip(pairs) {
            for (t, r) in found {
                let b = open[t];
                out[a].push((b, r));
                out[b].push((a, r));
            }
        }
        out.iter_mut().for_each(|l| l.sort_unstable_by_key(|e| e.0));
        out
    }

    fn component_id(&self, _j: usize) -> Option<usize> {
        None
    }
}

/// Breadth-first levels from a set of start nodes: `levels[d]` holds the nodes
/// first reached at distance `d`, for `d` up to `max_depth`.
pub fn bfs_levels(graph: &dyn NeighborGraph, starts: &[usize], max_depth: usize) -> Vec<Vec<usize>> {
    let mut seen: HashMap<usize, ()> = HashMap::new();
    let mut frontier: Vec<usize> = Vec::new();
    for &s in starts {
        if seen.insert(s, ()).is_none() {
            frontier.push(s);
        }
    }
    frontier.sort_unstable();
    let mut levels = vec![frontier.clone()];
    let mut depth = 0;
    while depth < max_depth && !frontier.is_empty() {
        let mut next = Vec::new();
        for &v in &frontier {
            for &(k, _) in graph.neighbors(v).iter() {
                if seen.insert(k, ()).is_none() {
                    next.push(k);
                }
            }
        }
        next.sort_unstable();
        if next.is_empty() {
            break;
        }
        levels.push(next.clone());
        frontier = next;
        depth += 1;
    }
    levels
}

/// Nodes within `depth` edges of `anchor`, with their thresholded correlation
/// submatrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSubgraph {
    pub anchor: usize,
    pub depth: Depth,
    /// Sorted ascending.
    pub members: Vec<usize>,
    /// Row-major, unit diagonal.
    pub local_matrix: Vec<f64>,
}

/// Thresholded correlations among the sorted `members`, row-major.
pub fn local_matrix(graph: &dyn NeighborGraph, members: &[usize]) -> Vec<f64> {
    let k = members.len();
    let mut m = vec![0.0; k * k];
    for (a, edges) in graph.induced(members).into_iter().enumerate() {
        m[a * k + a] = 1.0;
        for (b, r) in edges {
            m[a * k + b] = r;
        }
    }
    m
}

pub fn depth_subgraph(graph: &dyn NeighborGraph, anchor: usize, depth: Depth) -> DepthSubgraph {
    let mut members: Vec<usize> = bfs_levels(graph, &[anchor], depth.limit())
        .into_iter()
        .flatten()
        .collect();
    members.sort_unstable();
    let local = local_matrix(graph, &members);
    DepthSubgraph {
        anchor,
        depth,
        members,
        local_matrix: local,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;
    use crate::dataset::standardize_columns;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain(p: usize, links: &[(usize, usize)]) -> ThresholdedCorrGraph {
        ThresholdedCorrGraph::from_edges(p, 0.3, links.iter().map(|&(a, b)| (a, b, 0.5))).unwrap()
    }

    fn random_data(n: usize, p: usize, seed: u64) -> LabeledMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<f64> = (0..n * p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // couple a few columns so there are edges to find
        for i in 0..n {
            let base = values[i * p];
            values[i * p + 1] += 2.0 * base;
            values[i * p + 2] -= 1.5 * base;
        }
        let labels: Vec<i64> = (0..n).map(|i| (i % 2) as i64 + 1).collect();
        standardize_columns(&LabeledMatrix::new(values, p, &labels).unwrap()).unwrap()
    }

    #[test]
    fn chain_components() {
        let g = chain(5, &[(0, 1), (1, 2)]);
        assert_eq!(g.component_ids(), &[0, 0, 0, 3, 4]);
        let members = g.component_members();
        assert_eq!(members[&0], vec![0, 1, 2]);
        assert_eq!(members.len(), 3);
        let empty = chain(4, &[]);
        assert_eq!(empty.component_ids(), &[0, 1, 2, 3]);
    }

    #[test]
    fn depth_on_path() {
        let g = chain(4, &[(0, 1), (1, 2), (2, 3)]);
        let s = depth_subgraph(&g, 0, Depth::Limited(2));
        assert_eq!(s.members, vec![0, 1, 2]);
        assert_eq!(s.local_matrix, vec![1.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0]);
        let full = depth_subgraph(&g, 0, Depth::Unlimited);
        assert_eq!(full.members, g.members_of(0));
        let zero = depth_subgraph(&g, 3, Depth::Limited(0));
        assert_eq!(zero.members, vec![3]);
    }

    #[test]
    fn from_edges_validates() {
        assert!(ThresholdedCorrGraph::from_edges(3, 0.5, [(0, 1, 0.4)]).is_err());
        assert!(ThresholdedCorrGraph::from_edges(3, 0.5, [(0, 3, 0.9)]).is_err());
        assert!(ThresholdedCorrGraph::from_edges(3, 0.5, [(1, 1, 0.9)]).is_err());
        // the tie is kept
        let g = ThresholdedCorrGraph::from_edges(3, 0.5, [(2, 0, -0.5)]).unwrap();
        assert_eq!(g.edge_value(0, 2), Some(-0.5));
        assert_eq!(g.edge_value(2, 0), Some(-0.5));
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn edges_match_dense_correlation() {
        let data = random_data(40, 30, 5);
        let g = build_graph(&data, 0.2, 1 << 20, CorrelationEstimator::PooledWithinClass).unwrap();
        // dense pooled correlation, computed directly
        let (n, p) = (data.n(), data.p());
        let mut centered = data.values().to_vec();
        for cls in 1..=2 {
            let rows: Vec<usize> = (0..n).filter(|&i| data.labels()[i] == cls).collect();
            for j in 0..p {
                let m = rows.iter().map(|&i| data.get(i, j)).sum::<f64>() / rows.len() as f64;
                rows.iter().for_each(|&i| centered[i * p + j] -= m);
            }
        }
        let centered = &centered;
        let col = |j: usize| (0..n).map(move |i| centered[i * p + j]);
        for j in 0..p {
            for k in j + 1..p {
                let sjk: f64 = col(j).zip(col(k)).map(|(a, b)| a * b).sum();
                let sjj: f64 = col(j).map(|a| a * a).sum();
                let skk: f64 = col(k).map(|a| a * a).sum();
                let r = sjk / (sjj * skk).sqrt();
                match g.edge_value(j, k) {
                    Some(v) => assert!((v - r).abs() < 1e-10 && r.abs() >= 0.2),
                    None => assert!(r.abs() < 0.2),
                }
            }
        }
        assert!(g.edge_value(0, 1).is_some());
    }

    #[test]
    fn tiling_does_not_change_edges() {
        let data = random_data(30, 57, 9);
        let small = build_graph(&data, 0.25, 8 * (2 * 30 * 3 + 9), CorrelationEstimator::Plain).unwrap();
        let large = build_graph(&data, 0.25, 4 * 8 * (2 * 30 * 3 + 9), CorrelationEstimator::Plain).unwrap();
        let whole = build_graph(&data, 0.25, usize::MAX / 4, CorrelationEstimator::Plain).unwrap();
        assert_eq!(small, large);
        assert_eq!(small, whole);
    }

    #[test]
    fn budget_and_input_checks() {
        let data = random_data(30, 10, 1);
        assert!(matches!(
            build_graph(&data, 0.2, 100, CorrelationEstimator::Plain),
            Err(Error::BudgetTooSmall { .. })
        ));
        assert!(build_graph(&data, 1.0, 1 << 20, CorrelationEstimator::Plain).is_err());
        let raw = data.with_values(data.values().iter().map(|v| v * 2.0).collect());
        assert!(matches!(
            build_graph(&raw, 0.2, 1 << 20, CorrelationEstimator::Plain),
            Err(Error::NotStandardized { .. })
        ));
    }

    #[test]
    fn high_threshold_on_noise_gives_singletons() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..50 * 20).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<i64> = (0..50).map(|i| (i % 2) as i64 + 1).collect();
        let data = standardize_columns(&LabeledMatrix::new(values, 20, &labels).unwrap()).unwrap();
        let g = build_graph(&data, 0.999, 1 << 20, CorrelationEstimator::PooledWithinClass).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.component_members().len(), 20);
    }

    #[test]
    fn pooled_estimator_ignores_mean_shift() {
        // one feature shifted by class, one unrelated: the plain estimator links them
        let n = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = (i % 2) as f64;
            values.push(rng.gen_range(-0.5..0.5) + 3.0 * c);
            values.push(rng.gen_range(-0.5..0.5) + 3.0 * c);
            labels.push(c as i64 + 1);
        }
        let data = standardize_columns(&LabeledMatrix::new(values, 2, &labels).unwrap()).unwrap();
        let pooled = CorrelationSource::new(&data, CorrelationEstimator::PooledWithinClass).unwrap();
        let plain = CorrelationSource::new(&data, CorrelationEstimator::Plain).unwrap();
        assert!(pooled.correlation(0, 1).abs() < 0.2);
        assert!(plain.correlation(0, 1) > 0.9);
    }

    #[test]
    fn lazy_graph_matches_full_graph() {
        let data = random_data(40, 35, 21);
        let full = build_graph(&data, 0.2, 1 << 20, CorrelationEstimator::PooledWithinClass).unwrap();
        let source = Arc::new(CorrelationSource::new(&data, CorrelationEstimator::PooledWithinClass).unwrap());
        let lazy = LazyCorrGraph::new(source, 0.2).unwrap();
        for j in 0..35 {
            assert_eq!(lazy.neighbors(j), full.neighbors(j));
        }
        assert_eq!(lazy.sweeps(), 35);
        lazy.neighbors(0);
        assert_eq!(lazy.sweeps(), 35, "cached");
        for j in [0, 7, 20] {
            let a = depth_subgraph(&lazy, j, Depth::Limited(2));
            let b = depth_subgraph(&full, j, Depth::Limited(2));
            assert_eq!(a, b);
        }
        let fresh = LazyCorrGraph::new(lazy.source.clone(), 0.2).unwrap();
        fresh.prefetch(&[3, 30, 3, 11]);
        assert_eq!(fresh.sweeps(), 3);
        for j in [3, 11, 30] {
            assert_eq!(fresh.neighbors(j), full.neighbors(j));
        }
        assert_eq!(fresh.sweeps(), 3);
        let members: Vec<usize> = (0..35).step_by(2).chain([3, 11]).collect::<BTreeSet<_>>().into_iter().collect();
        assert_eq!(fresh.induced(&members), full.induced(&members));
        assert_eq!(local_matrix(&fresh, &members), local_matrix(&full, &members));
        assert_eq!(fresh.sweeps(), 3, "open pairs are not swept");
    }

    #[test]
    fn csv_exports() {
        let g = chain(3, &[(0, 2)]);
        let mut edges = Vec::new();
        g.write_edges_csv(&mut edges).unwrap();
        assert_eq!(String::from_utf8(edges).unwrap(), "feature_a,feature_b,value\n1,3,0.5\n");
        let mut comps = Vec::new();
        g.write_components_csv(&mut comps).unwrap();
        assert_eq!(
            String::from_utf8(comps).unwrap(),
            "feature,component_id\n1,1\n2,2\n3,1\n"
        );
    }

    #[test]
    fn depth_parsing() {
        assert_eq!("10".parse::<Depth>().unwrap(), Depth::Limited(10));
        assert_eq!("inf".parse::<Depth>().unwrap(), Depth::Unlimited);
        assert!("x".parse::<Depth>().is_err());
    }
}
