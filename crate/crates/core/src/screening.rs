//! Covariance-insured screening for one pair of classes.
//!
//! 1. Features whose standardized mean difference exceeds `tau` become
//!    anchors (the marginal survivor set).
//! 2. Around every anchor the thresholded correlation graph is explored to
//!    depth `m`. Subgraphs that touch are merged, and each merged block of the
//!    thresholded correlation matrix is inverted.
//! 3. The importance score of a covered feature is the absolute value of its
//!    row of the block precision matrix applied to the mean differences.
//!    Features outside every block score 0.
//! 4. The highest-scoring features are selected.
//!
//! Merging subgraphs that touch yields the same precision as inverting the
//! union of all depth-`m` subgraphs in a component at once: the union's
//! thresholded matrix is block diagonal over its connected pieces.
//!
//! A merged block may not grow beyond the number of samples behind the
//! correlation estimate (or `max_block` when set). When it would, the depth of
//! the anchors in that block is lowered one step at a time until it fits.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covgraph::{Depth, NeighborGraph, UnionFind};
use crate::dataset::{ClassPair, ClassSummary};
use crate::error::{Error, Result};
use crate::linalg::{mat_vec, Cholesky};

/// How many features survive the final selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Every covered feature with a positive score of at least `nu`.
    Threshold(f64),
    /// The `limit` highest scores.
    TopN(usize),
    /// The `n` highest scores, `n` being the number of training samples.
    TopSampleSize,
}

/// Parses `sample-size`, `top:N` or `threshold:NU`.
impl std::str::FromStr for SelectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("selection rule {s:?}; expected sample-size, top:N or threshold:NU"));
        match s.split_once(':') {
            None if s == "sample-size" => Ok(SelectionRule::TopSampleSize),
            Some(("top", n)) => n.parse().map(SelectionRule::TopN).map_err(|_| bad()),
            Some(("threshold", nu)) => nu.parse().map(SelectionRule::Threshold).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreeningConfig {
    /// Marginal threshold on the standardized mean difference.
    pub tau: f64,
    /// Correlation threshold.
    pub alpha: f64,
    pub depth: Depth,
    pub selection: SelectionRule,
    pub ridge_eps: f64,
    /// Largest block that will be inverted; defaults to the sample size of
    /// the correlation estimate.
    pub max_block: Option<usize>,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        ScreeningConfig {
            tau: 1.0,
            alpha: 0.2,
            depth: Depth::Limited(10),
            selection: SelectionRule::TopSampleSize,
            ridge_eps: 1e-6,
            max_block: None,
        }
    }
}

impl ScreeningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidParameter(format!("tau = {} must be >= 0", self.tau)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.ridge_eps > 0.0) {
            return Err(Error::InvalidParameter("ridge_eps must be positive".into()));
        }
        if let SelectionRule::Threshold(nu) = self.selection {
            if !(nu >= 0.0) {
                return Err(Error::InvalidParameter(format!("nu = {nu} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// One inverted block of the thresholded correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionBlock {
    /// Graph component label when known, otherwise the smallest member.
    pub component_id: usize,
    /// Sorted ascending.
    pub members: Vec<usize>,
    /// Marginal survivors inside this block.
    pub anchors: Vec<usize>,
    /// Largest subgraph depth used by the block's anchors.
    pub depth: usize,
    /// Row-major inverse, `members.len()` square.
    pub precision: Vec<f64>,
    /// Ridge added to the diagonal when the plain factorization failed.
    pub ridge: Option<f64>,
}

impl PrecisionBlock {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn position(&self, j: usize) -> Option<usize> {
        self.members.binary_search(&j).ok()
    }

    pub fn entry(&self, a: usize, b: usize) -> f64 {
        self.precision[a * self.members.len() + b]
    }
}

/// Blocks covering every anchor, plus a log of any capacity-driven depth cuts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockPrecision {
    pub blocks: Vec<PrecisionBlock>,
    /// `(anchor, requested depth, used depth)` for anchors whose depth was cut.
    pub depth_cuts: Vec<(usize, usize, usize)>,
}

impl BlockPrecision {
    pub fn covered(&self) -> BTreeSet<usize> {
        self.blocks.iter().flat_map(|b| b.members.iter().copied()).collect()
    }

    pub fn block_of(&self, j: usize) -> Option<&PrecisionBlock> {
        self.blocks.iter().find(|b| b.position(j).is_some())
    }

    pub fn ridge_fallbacks(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.blocks
            .iter()
            .filter_map(|b| b.ridge.map(|r| (b.component_id, r)))
    }
}

/// Outcome of screening one class pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningResult {
    pub pair: ClassPair,
    /// Standardized mean difference of every feature.
    pub differences: Vec<f64>,
    pub marginal_set: Vec<usize>,
    pub component_cover: Vec<usize>,
    pub precision: BlockPrecision,
    pub importance: Vec<f64>,
    pub selected: Vec<usize>,
    pub warnings: Vec<String>,
}

impl ScreeningResult {
    pub fn p(&self) -> usize {
        self.importance.len()
    }

    /// Positively scored features, best first, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        ranking(&self.importance)
    }

    /// Precision restricted to the selected features, row-major. Entries
    /// between features of different blocks are zero.
    pub fn selected_precision(&self) -> Vec<f64> {
        let s = &self.selected;
        let k = s.len();
        let mut out = vec![0.0; k * k];
        for (a, &ja) in s.iter().enumerate() {
            let Some(block) = self.precision.block_of(ja) else {
                out[a * k + a] = 1.0;
                continue;
            };
            let pa = block.position(ja).expect("member");
            for (b, &jb) in s.iter().enumerate() {
                if let Some(pb) = block.position(jb) {
                    out[a * k + b] = block.entry(pa, pb);
                }
            }
        }
        out
    }

    pub fn write_report_csv(&self, writer: impl Write) -> Result<()> {
        let rank = rank_positions(&self.importance);
        let selected: BTreeSet<usize> = self.selected.iter().copied().collect();
        let mut component = vec![None; self.p()];
        for b in &self.precision.blocks {
            for &j in &b.members {
                component[j] = Some(b.component_id);
            }
        }
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["feature", "marginal_difference", "component_id", "IS", "selected", "rank"])?;
        for j in 0..self.p() {
            wtr.write_record([
                (j + 1).to_string(),
                self.differences[j].to_string(),
                component[j].map(|c| (c + 1).to_string()).unwrap_or_default(),
                self.importance[j].to_string(),
                u8::from(selected.contains(&j)).to_string(),
                rank[j].map(|r| r.to_string()).unwrap_or_default(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<screening report>", e))?;
        Ok(())
    }
}

/// Indices with `|d_j| > tau`.
pub fn marginal_set(differences: &[f64], tau: f64) -> Vec<usize> {
    differences
        .iter()
        .enumerate()
        .filter(|(_, d)| d.abs() > tau)
        .map(|(j, _)| j)
        .collect()
}

/// Marginal survivors of a pair: features whose standardized class-mean
/// difference exceeds `tau` (strictly).
pub fn marginal_screen(summary: &ClassSummary, pair: ClassPair, tau: f64) -> Result<Vec<usize>> {
    Ok(marginal_set(&summary.standardized_difference(pair)?, tau))
}

/// BFS levels around one anchor.
struct AnchorReach {
    levels: Vec<Vec<usize>>,
    /// Every node of the anchor's component has been reached.
    complete: bool,
}

impl AnchorReach {
    fn members(&self, depth: usize) -> impl Iterator<Item = usize> + '_ {
        self.levels.iter().take(depth + 1).flatten().copied()
    }
}

/// Sweep progress of one anchor while it settles.
struct Frontier {
    seen: HashSet<usize>,
    size: usize,
    cursor: usize,
    next: BTreeSet<usize>,
    done: bool,
}

/// Grows every anchor to the largest depth up to `want` whose subgraph holds at
/// most `cap` nodes. Anchors advance in lockstep so their frontiers share
/// prefetch batches, and a frontier is swept in chunks so an overflowing level
/// is abandoned early.
fn settle_all(graph: &dyn NeighborGraph, anchors: &[usize], want: usize, cap: usize) -> (Vec<AnchorReach>, Vec<usize>) {
    const CHUNK: usize = 32;
    let mut reach: Vec<AnchorReach> = anchors
        .iter()
        .map(|&a| AnchorReach {
            levels: vec![vec![a]],
            complete: false,
        })
        .collect();
    let mut state: Vec<Frontier> = anchors
        .iter()
        .map(|&a| Frontier {
            seen: HashSet::from([a]),
            size: 1,
            cursor: 0,
            next: BTreeSet::new(),
            done: want == 0,
        })
        .collect();
    loop {
        let batch: Vec<usize> = reach
            .iter()
            .zip(&state)
            .filter(|(_, s)| !s.done)
            .flat_map(|(r, s)| {
                let front = r.levels.last().expect("root level");
                front[s.cursor..(s.cursor + CHUNK).min(front.len())].iter().copied()
            })
            .collect();
        if batch.is_empty() {
            break;
        }
        graph.prefetch(&batch);
        for (r, s) in reach.iter_mut().zip(state.iter_mut()).filter(|(_, s)| !s.done) {
            let front = r.levels.last().expect("root level");
            let end = (s.cursor + CHUNK).min(front.len());
            for &v in &front[s.cursor..end] {
                for &(k, _) in graph.neighbors(v).iter() {
                    if !s.seen.contains(&k) {
                        s.next.insert(k);
                    }
                }
            }
            s.cursor = end;
            if s.size + s.next.len() > cap {
                s.done = true;
            } else if end == front.len() {
                if s.next.is_empty() {
                    r.complete = true;
                    s.done = true;
                } else {
                    let next: Vec<usize> = std::mem::take(&mut s.next).into_iter().collect();
                    s.size += next.len();
                    s.seen.extend(&next);
                    r.levels.push(next);
                    s.cursor = 0;
                    s.done = r.levels.len() - 1 == want;
                }
            }
        }
    }
    let used = reach.iter().map(|r| r.levels.len() - 1).collect();
    (reach, used)
}

fn union_members(reach: &[AnchorReach], depth: &[usize]) -> Vec<usize> {
    reach
        .iter()
        .zip(depth)
        .flat_map(|(r, &d)| r.members(d))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Edges induced on a fixed node set; later queries restrict them to subsets.
struct InducedEdges {
    nodes: Vec<usize>,
    edges: Vec<Vec<(usize, f64)>>,
}

impl InducedEdges {
    fn new(graph: &dyn NeighborGraph, nodes: Vec<usize>) -> Self {
        let edges = graph.induced(&nodes);
        InducedEdges { nodes, edges }
    }

    /// Edges of the subgraph induced by the sorted `members`, indexed by
    /// position in `members`.
    fn restricted<'a>(&'a self, members: &'a [usize]) -> impl Iterator<Item = (usize, usize, f64)> + 'a {
        members.iter().enumerate().flat_map(move |(a, j)| {
            let at = self.nodes.binary_search(j).expect("member of the induced set");
            self.edges[at].iter().filter_map(move |&(c, r)| {
                members.binary_search(&self.nodes[c]).ok().map(|b| (a, b, r))
            })
        })
    }

    /// Splits `members` into the connected pieces of the subgraph they induce.
    fn pieces(&self, members: &[usize]) -> Vec<Vec<usize>> {
        let mut uf = UnionFind::new(members.len());
        for (a, b, _) in self.restricted(members) {
            uf.union(a, b);
        }
        let labels = uf.canonical_labels();
        let mut pieces: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; members.len()];
        for (a, &l) in labels.iter().enumerate() {
            if slot[l] == usize::MAX {
                slot[l] = pieces.len();
                pieces.push(Vec::new());
            }
            pieces[slot[l]].push(members[a]);
        }
        pieces
    }

    /// Row-major thresholded correlation matrix of `members`, unit diagonal.
    fn local_matrix(&self, members: &[usize]) -> Vec<f64> {
        let k = members.len();
        let mut m = vec![0.0; k * k];
        (0..k).for_each(|a| m[a * k + a] = 1.0);
        for (a, b, r) in self.restricted(members) {
            m[a * k + b] = r;
        }
        m
    }
}

/// Inverts `matrix`, retrying with `eps`, `2 eps`, `4 eps` and `8 eps` added to
/// the diagonal when the factorization fails.
fn invert_with_ridge(matrix: &[f64], dim: usize, ridge_eps: f64) -> Option<(Vec<f64>, Option<f64>)> {
    if let Some(c) = Cholesky::factor(matrix, dim) {
        return Some((c.inverse(), None));
    }
    let mut eps = ridge_eps;
    for _ in 0..4 {
        let mut m = matrix.to_vec();
        (0..dim).for_each(|i| m[i * dim + i] += eps);
        if let Some(c) = Cholesky::factor(&m, dim) {
            return Some((c.inverse(), Some(eps)));
        }
        eps *= 2.0;
    }
    None
}

/// Finds and inverts the precision blocks covering `anchors`.
pub fn block_precision(
    graph: &dyn NeighborGraph,
    anchors: &[usize],
    depth: Depth,
    ridge_eps: f64,
    max_block: Option<usize>,
) -> Result<BlockPrecision> {
    let mut anchors: Vec<usize> = anchors.to_vec();
    anchors.sort_unstable();
    anchors.dedup();
    if anchors.is_empty() {
        return Ok(BlockPrecision::default());
    }
    let cap = max_block
        .or_else(|| graph.sample_size())
        .unwrap_or(usize::MAX)
        .max(1);
    let want = depth.limit();
    let (reach, mut used) = settle_all(graph, &anchors, want, cap);

    let induced = InducedEdges::new(graph, union_members(&reach, &used));
    let pieces = loop {
        let pieces = induced.pieces(&union_members(&reach, &used));
        let mut cut = false;
        for piece in pieces.iter().filter(|p| p.len() > cap) {
            let inside: Vec<usize> = (0..anchors.len())
                .filter(|&i| piece.binary_search(&anchors[i]).is_ok())
                .collect();
            let deepest = inside.iter().map(|&i| used[i]).max().unwrap_or(0);
            if deepest > 0 {
                for &i in &inside {
                    if used[i] == deepest {
                        used[i] -= 1;
                    }
                }
                cut = true;
            }
        }
        if !cut {
            break pieces;
        }
    };

    let depth_cuts = (0..anchors.len())
        .filter(|&i| used[i] < want && !(reach[i].complete && reach[i].levels.len() - 1 <= used[i]))
        .map(|i| (anchors[i], want, used[i]))
        .collect();

    let blocks = pieces
        .par_iter()
        .map(|members| {
            let component_id = graph.component_id(members[0]).unwrap_or(members[0]);
            let dim = members.len();
            let local = induced.local_matrix(members);
            let (precision, ridge) =
                invert_with_ridge(&local, dim, ridge_eps).ok_or(Error::SingularBlock(component_id))?;
            let block_anchors: Vec<usize> = anchors
                .iter()
                .copied()
                .filter(|a| members.binary_search(a).is_ok())
                .collect();
            let block_depth = block_anchors
                .iter()
                .map(|a| used[anchors.binary_search(a).expect("anchor")])
                .max()
                .unwrap_or(0);
            Ok(PrecisionBlock {
                component_id,
                members: members.clone(),
                anchors: block_anchors,
                depth: block_depth,
                precision,
                ridge,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockPrecision { blocks, depth_cuts })
}

/// `IS_j = |(Ω d)_j|` over the covered features, 0 elsewhere.
pub fn importance_scores(precision: &BlockPrecision, differences: &[f64]) -> Vec<f64> {
    let mut scores = vec![0.0; differences.len()];
    for block in &precision.blocks {
        let local: Vec<f64> = block.members.iter().map(|&j| differences[j]).collect();
        let w = mat_vec(&block.precision, block.len(), &local);
        for (&j, v) in block.members.iter().zip(w) {
            scores[j] = v.abs();
        }
    }
    scores
}

/// Positively scored features sorted by score (descending), ties by index.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).filter(|&j| scores[j] > 0.0).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// 1-based rank of every feature, `None` for unscored features.
pub fn rank_positions(scores: &[f64]) -> Vec<Option<usize>> {
    let mut pos = vec![None; scores.len()];
    for (r, j) in ranking(scores).into_iter().enumerate() {
        pos[j] = Some(r + 1);
    }
    pos
}

/// Applies a selection rule to importance scores; only positive scores are
/// eligible. The result is sorted by feature index.
pub fn select(scores: &[f64], rule: SelectionRule, sample_size: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = match rule {
        SelectionRule::Threshold(nu) => (0..scores.len())
            .filter(|&j| scores[j] > 0.0 && scores[j] >= nu)
            .collect(),
        SelectionRule::TopN(limit) => ranking(scores).into_iter().take(limit).collect(),
        SelectionRule::TopSampleSize => ranking(scores).into_iter().take(sample_size).collect(),
    };
    chosen.sort_unstable();
    chosen
}

/// Runs the whole screening step for one pair on a prepared graph.
///
/// `summary` must come from the rows of the two classes being compared.
pub fn screen(
    graph: &dyn NeighborGraph,
    summary: &ClassSummary,
    pair: ClassPair,
    config: &ScreeningConfig,
) -> Result<ScreeningResult> {
    config.validate()?;
    if graph.p() != summary.p() {
        return Err(Error::InvalidParameter(format!(
            "graph has {} features, data has {}",
            graph.p(),
            summary.p()
        )));
    }
    let differences = summary.standardized_difference(pair)?;
    let sample_size = summary.count(pair.a)? + summary.count(pair.b)?;
    let marginal = marginal_set(&differences, config.tau);
    let mut warnings = Vec::new();
    if marginal.is_empty() {
        warnings.push(format!("no feature exceeds tau = {}; nothing selected", config.tau));
    }
    let precision = block_precision(graph, &marginal, config.depth, config.ridge_eps, config.max_block)?;
    for (c, r) in precision.ridge_fallbacks() {
        warnings.push(format!("block of feature {} needed a ridge of {r:e}", c + 1));
    }
    let importance = importance_scores(&precision, &differences);
    let selected = select(&importance, config.selection, sample_size);
    let component_cover = precision.blocks.iter().map(|b| b.component_id).collect();
    Ok(ScreeningResult {
        pair,
        differences,
        marginal_set: marginal,
        component_cover,
        precision,
        importance,
        selected,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covgraph::ThresholdedCorrGraph;

    fn graph(p: usize, edges: &[(usize, usize, f64)]) -> ThresholdedCorrGraph {
        ThresholdedCorrGraph::from_edges(p, 0.1, edges.iter().copied()).unwrap()
    }

    #[test]
    fn marginal_thresholds() {
        let d = [0.0, 0.3, -2.0, 1.0];
        assert_eq!(marginal_set(&d, 0.0), vec![1, 2, 3]);
        assert_eq!(marginal_set(&d, 1.0), vec![2], "strict inequality");
        assert!(marginal_set(&d, f64::INFINITY).is_empty());
    }

    #[test]
    fn singleton_block_is_unit() {
        let g = graph(3, &[]);
        let bp = block_precision(&g, &[1], Depth::Limited(10), 1e-6, None).unwrap();
        assert_eq!(bp.blocks.len(), 1);
        assert_eq!(bp.blocks[0].members, vec![1]);
        assert_eq!(bp.blocks[0].precision, vec![1.0]);
    }

    #[test]
    fn two_by_two_block() {
        let g = graph(4, &[(0, 2, 0.5)]);
        let bp = block_precision(&g, &[0], Depth::Limited(1), 1e-6, None).unwrap();
        let b = &bp.blocks[0];
        assert_eq!(b.members, vec![0, 2]);
        let want = [4.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0, 4.0 / 3.0];
        for (g, w) in b.precision.iter().zip(want) {
            assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn anchors_in_one_component_share_a_block() {
        // path 0-1-2-3-4, anchors at both ends with depth 2 meet in the middle
        let g = graph(6, &[(0, 1, 0.3), (1, 2, 0.3), (2, 3, 0.3), (3, 4, 0.3)]);
        let bp = block_precision(&g, &[0, 4], Depth::Limited(2), 1e-6, None).unwrap();
        assert_eq!(bp.blocks.len(), 1);
        assert_eq!(bp.blocks[0].members, vec![0, 1, 2, 3, 4]);
        assert_eq!(bp.blocks[0].anchors, vec![0, 4]);
        // depth 1 leaves them apart
        let bp = block_precision(&g, &[0, 4], Depth::Limited(1), 1e-6, None).unwrap();
        assert_eq!(bp.blocks.len(), 2);
    }

    #[test]
    fn oversized_blocks_lose_depth() {
        // star around 0 with 6 leaves, each leaf with a further tail
        let mut edges: Vec<(usize, usize, f64)> = (1..=6).map(|k| (0, k, 0.2)).collect();
        edges.extend((1..=6).map(|k| (k, k + 6, 0.2)));
        let g = graph(13, &edges);
        let bp = block_precision(&g, &[0], Depth::Limited(10), 1e-6, Some(8)).unwrap();
        assert_eq!(bp.blocks[0].members, (0..=6).collect::<Vec<_>>());
        assert_eq!(bp.blocks[0].depth, 1);
        assert_eq!(bp.depth_cuts, vec![(0, 10, 1)]);
        let bp = block_precision(&g, &[0], Depth::Limited(10), 1e-6, Some(3)).unwrap();
        assert_eq!(bp.blocks[0].members, vec![0]);
    }

    #[test]
    fn singular_block_falls_back_then_fails() {
        // perfectly collinear pair: [[1,1],[1,1]] is only semidefinite
        let g = graph(2, &[(0, 1, 1.0)]);
        let bp = block_precision(&g, &[0], Depth::Limited(1), 1e-6, None).unwrap();
        assert_eq!(bp.blocks[0].ridge, Some(1e-6));
        // indefinite block: no small ridge rescues it
        let edges: Vec<(usize, usize, f64)> = (1..6).map(|k| (0, k, 0.9)).collect();
        let g = graph(6, &edges);
        assert!(matches!(
            block_precision(&g, &[0], Depth::Limited(1), 1e-6, None),
            Err(Error::SingularBlock(0))
        ));
    }

    #[test]
    fn identity_precision_gives_marginal_scores() {
        let g = graph(4, &[]);
        let d = [0.5, -2.0, 0.0, 3.0];
        let bp = block_precision(&g, &[0, 1, 2, 3], Depth::Unlimited, 1e-6, None).unwrap();
        assert_eq!(importance_scores(&bp, &d), vec![0.5, 2.0, 0.0, 3.0]);
    }

    #[test]
    fn condition_a_zero_score() {
        // [[1, r], [r, 1]] with d = (r, 1): the first row of Ω d vanishes
        let r = 0.5;
        let g = graph(2, &[(0, 1, r)]);
        let bp = block_precision(&g, &[1], Depth::Limited(1), 1e-6, None).unwrap();
        let is = importance_scores(&bp, &[r, 1.0]);
        assert!(is[0].abs() < 1e-15);
        assert!((is[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn selection_rules() {
        let s = [5.0, 5.0, 2.0, 9.0];
        assert_eq!(select(&s, SelectionRule::TopN(3), 100), vec![0, 1, 3]);
        assert_eq!(ranking(&s), vec![3, 0, 1, 2]);
        assert_eq!(select(&s, SelectionRule::Threshold(0.0), 100), vec![0, 1, 2, 3]);
        assert_eq!(select(&[0.0, 1.0], SelectionRule::Threshold(0.0), 100), vec![1]);
        assert_eq!(select(&s, SelectionRule::Threshold(5.0), 100), vec![0, 1, 3]);
        assert_eq!(select(&s, SelectionRule::TopSampleSize, 2), vec![0, 3]);
        assert_eq!(rank_positions(&[0.0, 2.0, 3.0]), vec![None, Some(2), Some(1)]);
    }

    #[test]
    fn selected_precision_is_block_restricted() {
        let g = graph(4, &[(0, 1, 0.5)]);
        let bp = block_precision(&g, &[0, 3], Depth::Limited(1), 1e-6, None).unwrap();
        let r = ScreeningResult {
            pair: ClassPair::new(1, 2),
            differences: vec![1.0, 0.0, 0.0, 1.0],
            marginal_set: vec![0, 3],
            component_cover: vec![0, 3],
            importance: importance_scores(&bp, &[1.0, 0.0, 0.0, 1.0]),
            precision: bp,
            selected: vec![0, 1, 3],
            warnings: vec![],
        };
        let sp = r.selected_precision();
        assert!((sp[0] - 4.0 / 3.0).abs() < 1e-14);
        assert!((sp[1] + 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(sp[2], 0.0);
        assert_eq!(sp[8], 1.0);
        let mut out = Vec::new();
        r.write_report_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("feature,marginal_difference,component_id,IS,selected,rank\n"));
        assert!(text.contains("\n3,0,,0,0,\n"));
    }
}
