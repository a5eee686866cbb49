//! Causal-order search over the subset lattice.
//!
//! Nodes are subsets of variable indices (TOP = all variables, BOTTOM =
//! empty). The edge from a set `S` to `S \ {v}` is weighted by the estimated
//! mutual information between `v`'s residual at `S` and the residuals of the
//! remaining variables after `v` is regressed out; edges out of singleton
//! sets cost zero. A path from TOP to BOTTOM spells out a causal order, and
//! its length is the estimated divergence between the joint noise
//! distribution and the product of its marginals for that order. Best-first
//! search finds the global minimum while evaluating MI estimates lazily,
//! only for the edges it actually relaxes.
//!
//! Residual sets are path-independent, so they are cached per subset bitmask
//! and always materialized through one canonical cascade (missing variables
//! regressed out in ascending index order). Every search method therefore
//! sees bit-identical edge weights, which is what makes the optimality
//! checks against exhaustive enumeration exact.

use std::cmp::Ordering as CmpOrdering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use itertools::Itertools;
use rayon::prelude::*;

use crate::config::{Method, SearchConfig};
use crate::copula::{grouped_mi, MiEstimate, MiOptions};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::residuals::{full_mask, mask_indices, Mask, ResidualSet, MAX_VARIABLES};

/// Maximum variable count for exhaustive order enumeration.
pub const BRUTE_FORCE_LIMIT: usize = 8;

/// Edge-weight provider for the lattice search.
///
/// `chosen` is the variable removed by the edge and `remaining` the child
/// subset, so oracles used in tests can recognize specific edges; the
/// production estimator only looks at the residual vectors.
pub trait EdgeEstimator: Sync {
    fn edge_weight(
        &self,
        chosen: usize,
        remaining: Mask,
        r_chosen: &[f64],
        group: &[&[f64]],
    ) -> Result<MiEstimate>;
}

/// Production estimator: grouped copula MI between the chosen residual and
/// the child residual block.
#[derive(Debug, Clone)]
pub struct CopulaEstimator {
    opts: MiOptions,
}

impl CopulaEstimator {
    pub fn new(opts: MiOptions) -> Self {
        Self { opts }
    }
}

impl EdgeEstimator for CopulaEstimator {
    fn edge_weight(
        &self,
        _chosen: usize,
        _remaining: Mask,
        r_chosen: &[f64],
        group: &[&[f64]],
    ) -> Result<MiEstimate> {
        grouped_mi(r_chosen, group, &self.opts)
    }
}

/// Deterministic oracle: zero on every edge of a designated order, a fixed
/// positive weight elsewhere. Used to validate search behavior (expansion
/// counts, lazy evaluation) independently of any estimator.
#[derive(Debug, Clone)]
pub struct FixedOrderOracle {
    order: Vec<usize>,
    off_path: f64,
}

impl FixedOrderOracle {
    pub fn new(order: Vec<usize>, off_path: f64) -> Self {
        Self { order, off_path }
    }

    fn on_path(&self, chosen: usize, remaining: Mask) -> bool {
        let p = self.order.len();
        let child_size = remaining.count_ones() as usize;
        let t = p - child_size - 1;
        if self.order[t] != chosen {
            return false;
        }
        let suffix: Mask = self.order[t + 1..].iter().map(|&v| 1u64 << v).sum();
        suffix == remaining
    }
}

impl EdgeEstimator for FixedOrderOracle {
    fn edge_weight(
        &self,
        chosen: usize,
        remaining: Mask,
        _r_chosen: &[f64],
        _group: &[&[f64]],
    ) -> Result<MiEstimate> {
        let value = if self.on_path(chosen, remaining) { 0.0 } else { self.off_path };
        Ok(MiEstimate {
            value,
            raw: value,
            joint_entropy: -value,
            marginal_group_entropy: 0.0,
            clamped: false,
        })
    }
}

/// One traversed lattice edge of the returned order.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeight {
    /// Variable removed by this edge (the next cause in the order).
    pub chosen: usize,
    /// Child subset: the variables still unordered after the removal.
    pub remaining: Mask,
    pub mi: MiEstimate,
}

/// A full causal order with its per-edge weights and search statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderResult {
    /// Variable indices from cause to effect.
    pub order: Vec<usize>,
    /// Sum of the edge weights along the order, in nats.
    pub total_cost: f64,
    /// The `p - 1` estimated edges; the final singleton-to-bottom edge costs
    /// exactly zero and is not listed.
    pub edge_weights: Vec<EdgeWeight>,
    /// Estimator invocations (cache misses only).
    pub mi_evaluations: u64,
    /// Nodes whose outgoing edges were enumerated.
    pub nodes_expanded: u64,
    pub method: Method,
}

impl OrderResult {
    fn debug_check(&self) {
        debug_assert_eq!(self.edge_weights.len() + 1, self.order.len());
        let sum: f64 = self.edge_weights.iter().map(|e| e.mi.value).sum();
        debug_assert!((sum - self.total_cost).abs() <= 1e-12);
        let mut seen = vec![false; self.order.len()];
        for &v in &self.order {
            debug_assert!(!std::mem::replace(&mut seen[v], true));
        }
    }
}

/// Per-subset residual store. Every subset is materialized through the same
/// canonical cascade (missing indices regressed out in ascending order), so
/// the stored vectors do not depend on how the search reached the subset.
struct ResidualCache {
    p: usize,
    map: HashMap<Mask, Arc<ResidualSet>>,
}

impl ResidualCache {
    fn new(data: &DataMatrix) -> Self {
        let mut map = HashMap::new();
        map.insert(full_mask(data.p()), Arc::new(ResidualSet::from_data(data)));
        Self { p: data.p(), map }
    }

    fn get(&mut self, mask: Mask) -> Result<Arc<ResidualSet>> {
        if let Some(r) = self.map.get(&mask) {
            return Ok(Arc::clone(r));
        }
        let missing = full_mask(self.p) & !mask;
        debug_assert_ne!(missing, 0, "full set is pre-seeded");
        let add = 63 - missing.leading_zeros() as usize;
        let parent = self.get(mask | (1 << add))?;
        let child = Arc::new(parent.regress_out(add)?);
        self.map.insert(mask, Arc::clone(&child));
        Ok(child)
    }

    /// Drop a subset after its node has been expanded; a later canonical
    /// recomputation reproduces the exact same vectors.
    fn evict(&mut self, mask: Mask) {
        if mask != full_mask(self.p) {
            self.map.remove(&mask);
        }
    }
}

// Path label: distance plus the removal prefix that produced it. Labels are
// totally ordered by (distance, prefix); minimizing that order yields the
// cheapest path and, among equal-cost paths, the lexicographically smallest
// order.
#[derive(Debug, Clone)]
struct Label {
    dist: f64,
    prefix: Vec<u8>,
}

impl Label {
    fn cmp(&self, other: &Self) -> CmpOrdering {
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| self.prefix.cmp(&other.prefix))
    }

    fn extend(&self, dist: f64, v: usize) -> Self {
        let mut prefix = Vec::with_capacity(self.prefix.len() + 1);
        prefix.extend_from_slice(&self.prefix);
        prefix.push(v as u8);
        Self { dist, prefix }
    }
}

struct NodeState {
    label: Label,
    /// Weight of the best incoming edge (absent for TOP and BOTTOM).
    edge_mi: Option<MiEstimate>,
    closed: bool,
}

struct HeapEntry {
    label: Label,
    mask: Mask,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == CmpOrdering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    // Reversed so the std max-heap pops the smallest label first.
    fn cmp(&self, other: &Self) -> CmpOrdering {
        other
            .label
            .cmp(&self.label)
            .then_with(|| other.mask.cmp(&self.mask))
    }
}

fn validate_inputs(data: &DataMatrix, config: &SearchConfig) -> Result<()> {
    config.validate()?;
    let p = data.p();
    if p < 2 {
        return Err(Error::InvalidInput(format!("ordering needs at least 2 variables, got {p}")));
    }
    if p > MAX_VARIABLES {
        return Err(Error::InvalidInput(format!(
            "at most {MAX_VARIABLES} variables are supported, got {p}"
        )));
    }
    if data.n() < config.k + 2 {
        return Err(Error::InvalidInput(format!(
            "need at least k + 2 = {} samples, got {}",
            config.k + 2,
            data.n()
        )));
    }
    Ok(())
}

/// Children of a node: for each member `v`, the child subset and its
/// residuals, plus the freshly evaluated edge weight. Evaluation order is
/// fixed (ascending `v`) and MI estimates run in parallel.
fn expand_node(
    cache: &mut ResidualCache,
    estimator: &dyn EdgeEstimator,
    mask: Mask,
) -> Result<Vec<(usize, Mask, MiEstimate)>> {
    let parent = cache.get(mask)?;
    let members: Vec<usize> = mask_indices(mask).collect();
    let mut children = Vec::with_capacity(members.len());
    for &v in &members {
        let child_mask = mask & !(1 << v);
        let child = cache.get(child_mask)?;
        #[cfg(debug_assertions)]
        cross_check_path_independence(&parent, v, &child);
        children.push((v, child_mask, child));
    }
    let weights: Vec<Result<MiEstimate>> = children
        .par_iter()
        .map(|(v, child_mask, child)| {
            let group = child.residual_columns();
            estimator.edge_weight(*v, *child_mask, parent.residual(*v), &group)
        })
        .collect();
    children
        .into_iter()
        .zip(weights)
        .map(|((v, child_mask, _), w)| Ok((v, child_mask, w?)))
        .collect()
}

// Runtime cross-check of residual path-independence: the canonically cached
// child must agree with a direct one-step regression from this parent.
#[cfg(debug_assertions)]
fn cross_check_path_independence(parent: &ResidualSet, chosen: usize, cached: &ResidualSet) {
    use crate::residuals::sample_variance;
    if let Ok(direct) = parent.regress_out(chosen) {
        for idx in direct.member_indices() {
            let a = direct.residual(idx);
            let b = cached.residual(idx);
            let scale = sample_variance(a).sqrt() + 1.0;
            for (x, y) in a.iter().zip(b) {
                debug_assert!(
                    (x - y).abs() <= 1e-8 * scale,
                    "residuals of {idx} disagree across parents: {x} vs {y}"
                );
            }
        }
    }
}

fn relax(
    nodes: &mut HashMap<Mask, NodeState>,
    heap: &mut BinaryHeap<HeapEntry>,
    mask: Mask,
    label: Label,
    edge_mi: Option<MiEstimate>,
) {
    match nodes.entry(mask) {
        std::collections::hash_map::Entry::Vacant(slot) => {
            heap.push(HeapEntry { label: label.clone(), mask });
            slot.insert(NodeState { label, edge_mi, closed: false });
        }
        std::collections::hash_map::Entry::Occupied(mut slot) => {
            let state = slot.get_mut();
            if !state.closed && label.cmp(&state.label) == CmpOrdering::Less {
                state.label = label.clone();
                state.edge_mi = edge_mi;
                heap.push(HeapEntry { label, mask });
            }
        }
    }
}

fn assemble_result(
    nodes: &HashMap<Mask, NodeState>,
    bottom: Label,
    p: usize,
    mi_evaluations: u64,
    nodes_expanded: u64,
    method: Method,
) -> OrderResult {
    let order: Vec<usize> = bottom.prefix.iter().map(|&v| v as usize).collect();
    let mut remaining = full_mask(p);
    let mut edge_weights = Vec::with_capacity(p - 1);
    for &v in &order[..p - 1] {
        remaining &= !(1 << v);
        let mi = nodes[&remaining]
            .edge_mi
            .expect("path nodes below TOP carry their incoming edge weight");
        edge_weights.push(EdgeWeight { chosen: v, remaining, mi });
    }
    let result = OrderResult {
        order,
        total_cost: bottom.dist,
        edge_weights,
        mi_evaluations,
        nodes_expanded,
        method,
    };
    result.debug_check();
    result
}

/// Globally optimal order by best-first shortest path (requires non-negative
/// edge weights, hence clamping; without clamping this falls back to
/// exhaustive lattice expansion, which stays exact under negative weights).
pub fn mmi_order(data: &DataMatrix, config: &SearchConfig) -> Result<OrderResult> {
    let estimator = CopulaEstimator::new(config.mi_options());
    mmi_order_with(data, config, &estimator)
}

pub fn mmi_order_with(
    data: &DataMatrix,
    config: &SearchConfig,
    estimator: &dyn EdgeEstimator,
) -> Result<OrderResult> {
    validate_inputs(data, config)?;
    if !config.clamp_negative {
        return exhaustive_lattice_order(data, config, estimator);
    }
    let p = data.p();
    let top = full_mask(p);
    let mut cache = ResidualCache::new(data);
    let mut nodes: HashMap<Mask, NodeState> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let start = Label { dist: 0.0, prefix: Vec::new() };
    heap.push(HeapEntry { label: start.clone(), mask: top });
    nodes.insert(top, NodeState { label: start, edge_mi: None, closed: false });

    let mut mi_evaluations = 0u64;
    let mut nodes_expanded = 0u64;

    while let Some(entry) = heap.pop() {
        {
            let state = &nodes[&entry.mask];
            if state.closed || entry.label.cmp(&state.label) != CmpOrdering::Equal {
                continue; // stale heap entry
            }
        }
        if entry.mask == 0 {
            return Ok(assemble_result(
                &nodes,
                entry.label,
                p,
                mi_evaluations,
                nodes_expanded,
                Method::Mmi,
            ));
        }
        if nodes_expanded >= config.max_nodes {
            return Err(Error::TooManyNodes { limit: config.max_nodes });
        }
        nodes_expanded += 1;
        nodes.get_mut(&entry.mask).unwrap().closed = true;

        if entry.mask.count_ones() == 1 {
            // The last variable: the edge to BOTTOM costs exactly zero and
            // is not estimated.
            let v = entry.mask.trailing_zeros() as usize;
            let label = entry.label.extend(entry.label.dist, v);
            relax(&mut nodes, &mut heap, 0, label, None);
            continue;
        }
        for (v, child_mask, mi) in expand_node(&mut cache, estimator, entry.mask)? {
            mi_evaluations += 1;
            let label = entry.label.extend(entry.label.dist + mi.value, v);
            relax(&mut nodes, &mut heap, child_mask, label, Some(mi));
        }
        cache.evict(entry.mask);
    }
    Err(Error::InvalidInput("search exhausted the lattice without reaching BOTTOM".into()))
}

/// Exact DP over the lattice levels, expanding every reachable node. Safe
/// under negative edge weights because the lattice is a DAG.
fn exhaustive_lattice_order(
    data: &DataMatrix,
    config: &SearchConfig,
    estimator: &dyn EdgeEstimator,
) -> Result<OrderResult> {
    let p = data.p();
    let top = full_mask(p);
    let mut cache = ResidualCache::new(data);
    let mut nodes: HashMap<Mask, NodeState> = HashMap::new();
    let mut heap = BinaryHeap::new(); // reused as a no-op sink for relax()
    nodes.insert(
        top,
        NodeState { label: Label { dist: 0.0, prefix: Vec::new() }, edge_mi: None, closed: false },
    );

    let mut mi_evaluations = 0u64;
    let mut nodes_expanded = 0u64;

    for size in (1..=p as u32).rev() {
        let mut level: Vec<Mask> = nodes
            .keys()
            .copied()
            .filter(|m| m.count_ones() == size)
            .collect();
        level.sort_unstable();
        for mask in level {
            if nodes_expanded >= config.max_nodes {
                return Err(Error::TooManyNodes { limit: config.max_nodes });
            }
            nodes_expanded += 1;
            let label = nodes[&mask].label.clone();
            if size == 1 {
                let v = mask.trailing_zeros() as usize;
                let extended = label.extend(label.dist, v);
                relax(&mut nodes, &mut heap, 0, extended, None);
                continue;
            }
            for (v, child_mask, mi) in expand_node(&mut cache, estimator, mask)? {
                mi_evaluations += 1;
                let extended = label.extend(label.dist + mi.value, v);
                relax(&mut nodes, &mut heap, child_mask, extended, Some(mi));
            }
            cache.evict(mask);
        }
    }
    let bottom = nodes[&0].label.clone();
    Ok(assemble_result(&nodes, bottom, p, mi_evaluations, nodes_expanded, Method::Mmi))
}

/// Top-down greedy order: at every step, remove the variable whose residual
/// has the smallest estimated MI with the rest (ties to the smallest index).
pub fn greedy_order(data: &DataMatrix, config: &SearchConfig) -> Result<OrderResult> {
    let estimator = CopulaEstimator::new(config.mi_options());
    greedy_order_with(data, config, &estimator)
}

pub fn greedy_order_with(
    data: &DataMatrix,
    config: &SearchConfig,
    estimator: &dyn EdgeEstimator,
) -> Result<OrderResult> {
    validate_inputs(data, config)?;
    let p = data.p();
    let mut cache = ResidualCache::new(data);
    let mut mask = full_mask(p);
    let mut order = Vec::with_capacity(p);
    let mut edge_weights = Vec::with_capacity(p - 1);
    let mut total_cost = 0.0;
    let mut mi_evaluations = 0u64;
    let mut nodes_expanded = 0u64;

    while mask.count_ones() >= 2 {
        if nodes_expanded >= config.max_nodes {
            return Err(Error::TooManyNodes { limit: config.max_nodes });
        }
        nodes_expanded += 1;
        let mut best: Option<(usize, Mask, MiEstimate)> = None;
        for (v, child_mask, mi) in expand_node(&mut cache, estimator, mask)? {
            mi_evaluations += 1;
            let better = match &best {
                None => true,
                Some((_, _, cur)) => mi.value < cur.value,
            };
            if better {
                best = Some((v, child_mask, mi));
            }
        }
        let (v, child_mask, mi) = best.expect("non-singleton node has successors");
        total_cost += mi.value;
        order.push(v);
        edge_weights.push(EdgeWeight { chosen: v, remaining: child_mask, mi });
        cache.evict(mask);
        mask = child_mask;
    }
    order.push(mask.trailing_zeros() as usize);

    let result = OrderResult {
        order,
        total_cost,
        edge_weights,
        mi_evaluations,
        nodes_expanded,
        method: Method::Greedy,
    };
    result.debug_check();
    Ok(result)
}

/// Exhaustive minimum over all `p!` orders, sharing residuals and edge
/// weights across orders. The oracle for optimality checks.
pub fn brute_force_order(data: &DataMatrix, config: &SearchConfig) -> Result<OrderResult> {
    let estimator = CopulaEstimator::new(config.mi_options());
    brute_force_order_with(data, config, &estimator)
}

pub fn brute_force_order_with(
    data: &DataMatrix,
    config: &SearchConfig,
    estimator: &dyn EdgeEstimator,
) -> Result<OrderResult> {
    validate_inputs(data, config)?;
    let p = data.p();
    if p > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { p, max: BRUTE_FORCE_LIMIT });
    }
    let mut cache = ResidualCache::new(data);
    let mut edges: HashMap<(Mask, usize), MiEstimate> = HashMap::new();
    let mut mi_evaluations = 0u64;
    let mut best: Option<(f64, Vec<usize>, Vec<EdgeWeight>)> = None;

    for perm in (0..p).permutations(p) {
        let mut cost = 0.0;
        let mut path = Vec::with_capacity(p - 1);
        let mut mask = full_mask(p);
        for &v in &perm[..p - 1] {
            let mi = match edges.get(&(mask, v)) {
                Some(mi) => *mi,
                None => {
                    let parent = cache.get(mask)?;
                    let child = cache.get(mask & !(1 << v))?;
                    let group = child.residual_columns();
                    let mi = estimator.edge_weight(v, mask & !(1 << v), parent.residual(v), &group)?;
                    mi_evaluations += 1;
                    edges.insert((mask, v), mi);
                    mi
                }
            };
            mask &= !(1 << v);
            cost += mi.value;
            path.push(EdgeWeight { chosen: v, remaining: mask, mi });
        }
        // Strict improvement only: enumeration is lexicographic, so ties
        // keep the lexicographically smallest order.
        if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
            best = Some((cost, perm, path));
        }
    }
    let (total_cost, order, edge_weights) = best.expect("p >= 2 has orders");
    let nodes_expanded = edges.keys().map(|(m, _)| *m).collect::<std::collections::HashSet<_>>().len() as u64;
    let result = OrderResult {
        order,
        total_cost,
        edge_weights,
        mi_evaluations,
        nodes_expanded,
        method: Method::Brute,
    };
    result.debug_check();
    Ok(result)
}

/// Dispatch on `config.method`.
pub fn run_order(data: &DataMatrix, config: &SearchConfig) -> Result<OrderResult> {
    match config.method {
        Method::Mmi => mmi_order(data, config),
        Method::Greedy => greedy_order(data, config),
        Method::Brute => brute_force_order(data, config),
    }
}

/// Total divergence estimate along one explicit order: the sum of the edge
/// weights the order traverses. Matches `OrderResult::total_cost` exactly
/// for orders returned by the search methods.
pub fn path_cost(data: &DataMatrix, order: &[usize], config: &SearchConfig) -> Result<f64> {
    validate_inputs(data, config)?;
    let p = data.p();
    if order.len() != p {
        return Err(Error::SizeMismatch { left: order.len(), right: p });
    }
    let mut seen = vec![false; p];
    for &v in order {
        if v >= p || std::mem::replace(&mut seen[v], true) {
            return Err(Error::InvalidInput(format!("order is not a permutation of 0..{p}")));
        }
    }
    let estimator = CopulaEstimator::new(config.mi_options());
    let mut cache = ResidualCache::new(data);
    let mut cost = 0.0;
    let mut mask = full_mask(p);
    for &v in &order[..p - 1] {
        let parent = cache.get(mask)?;
        let child = cache.get(mask & !(1 << v))?;
        let group = child.residual_columns();
        let mi = estimator.edge_weight(v, mask & !(1 << v), parent.residual(v), &group)?;
        cache.evict(mask);
        mask &= !(1 << v);
        cost += mi.value;
    }
    Ok(cost)
}
