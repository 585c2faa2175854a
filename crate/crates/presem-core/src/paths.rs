//! Static analysis of signal flow: enumeration of simple signed paths and the
//! aggregate signal one group sends another.
//!
//! A path may use an inhibitory edge only as its final step. Inhibition here
//! never passes a signal along; if it bites at all, it interrupts the
//! receiving unit, so any edge after it would carry nothing. The sign of a
//! path is therefore the polarity of its last edge and its strength is the
//! plain product of the edge weights.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::substrate::{
    group_activation, AttentionMask, NeuronGraph, NeuronId, Polarity, RunStatus, SynapseKey,
    DEFAULT_RHO, FIRING_EPS,
};

/// Default bound on path length for callers that do not care to pick one.
pub const DEFAULT_MAX_LEN: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("path enumeration needs a non-empty source group")]
    EmptySource,
    #[error("path enumeration needs a non-empty target group")]
    EmptyTarget,
    #[error("source and target groups must be disjoint")]
    OverlappingEndpoints,
    #[error("maximum path length must be at least 1")]
    ZeroMaxLen,
}

/// One edge along a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathEdge {
    pub source: NeuronId,
    pub target: NeuronId,
    pub polarity: Polarity,
    pub weight: f64,
}

impl PathEdge {
    fn key(&self) -> SynapseKey {
        SynapseKey {
            source: self.source,
            target: self.target,
            polarity: self.polarity,
        }
    }
}

/// A simple path whose edges are all excitatory except possibly the last.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Path {
    pub edges: Vec<PathEdge>,
    /// +1 when the terminal edge is excitatory, -1 when inhibitory.
    pub sign: i8,
    /// Product of the edge weights.
    pub strength: f64,
}

impl Path {
    fn from_edges(edges: Vec<PathEdge>) -> Self {
        debug_assert!(!edges.is_empty());
        debug_assert!(edges
            .iter()
            .take(edges.len() - 1)
            .all(|e| e.polarity == Polarity::Excitatory));
        let sign = match edges.last().unwrap().polarity {
            Polarity::Excitatory => 1,
            Polarity::Inhibitory => -1,
        };
        let strength = edges.iter().map(|e| e.weight).product();
        Self {
            edges,
            sign,
            strength,
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Signed contribution of this path to the total signal.
    pub fn contribution(&self) -> f64 {
        self.sign as f64 * self.strength
    }
}

/// Aggregate signal a source group sends a target group, split into the
/// direct (single-edge) and indirect share.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalReport {
    pub direct: f64,
    pub indirect: f64,
    pub total: f64,
    pub path_count_positive: usize,
    pub path_count_negative: usize,
}

/// All simple paths from a member of `src` to a member of `dst`, at most
/// `max_len` edges long, with inhibitory edges allowed only in terminal
/// position.
///
/// A path leaves `src` exactly once and stops the moment it reaches `dst`;
/// neither group's members appear as intermediate stations. The result is
/// sorted by length first, then lexicographically by edge keys, so equal
/// inputs always enumerate in the same order.
pub fn enumerate_paths(
    graph: &NeuronGraph,
    src: &BTreeSet<NeuronId>,
    dst: &BTreeSet<NeuronId>,
    max_len: usize,
) -> Result<Vec<Path>, PathError> {
    if src.is_empty() {
        return Err(PathError::EmptySource);
    }
    if dst.is_empty() {
        return Err(PathError::EmptyTarget);
    }
    if max_len == 0 {
        return Err(PathError::ZeroMaxLen);
    }
    if src.intersection(dst).next().is_some() {
        return Err(PathError::OverlappingEndpoints);
    }

    // Adjacency in key order keeps the search deterministic.
    let mut outgoing: Vec<Vec<PathEdge>> = vec![Vec::new(); graph.neuron_count()];
    for syn in graph.synapses() {
        outgoing[syn.source.index()].push(PathEdge {
            source: syn.source,
            target: syn.target,
            polarity: syn.polarity,
            weight: syn.weight,
        });
    }

    let mut walker = Walker {
        src,
        dst,
        max_len,
        outgoing: &outgoing,
        visited: BTreeSet::new(),
        prefix: Vec::new(),
        found: Vec::new(),
    };
    for &start in src {
        walker.visited.insert(start);
        walker.walk(start);
        walker.visited.remove(&start);
    }
    let mut found = walker.found;
    found.sort_by(|a, b| {
        a.len()
            .cmp(&b.len())
            .then_with(|| path_keys(a).cmp(&path_keys(b)))
    });
    Ok(found)
}

fn path_keys(path: &Path) -> Vec<SynapseKey> {
    path.edges.iter().map(PathEdge::key).collect()
}

struct Walker<'a> {
    src: &'a BTreeSet<NeuronId>,
    dst: &'a BTreeSet<NeuronId>,
    max_len: usize,
    outgoing: &'a [Vec<PathEdge>],
    visited: BTreeSet<NeuronId>,
    prefix: Vec<PathEdge>,
    found: Vec<Path>,
}

impl Walker<'_> {
    fn walk(&mut self, at: NeuronId) {
        if self.prefix.len() == self.max_len {
            return;
        }
        for i in 0..self.outgoing[at.index()].len() {
            let edge = self.outgoing[at.index()][i];
            if self.dst.contains(&edge.target) {
                // Terminal step; either polarity may close the path.
                self.prefix.push(edge);
                self.found.push(Path::from_edges(self.prefix.clone()));
                self.prefix.pop();
                continue;
            }
            // Interior steps must be excitatory and may not revisit a neuron
            // or re-enter the source group.
            if edge.polarity != Polarity::Excitatory
                || self.visited.contains(&edge.target)
                || self.src.contains(&edge.target)
            {
                continue;
            }
            self.visited.insert(edge.target);
            self.prefix.push(edge);
            self.walk(edge.target);
            self.prefix.pop();
            self.visited.remove(&edge.target);
        }
    }
}

/// Sums the signed path contributions from `src` to `dst`, normalized by the
/// size of the source group so the figure reads as signal-per-activation of
/// the whole group.
pub fn effective_signal(
    graph: &NeuronGraph,
    src: &BTreeSet<NeuronId>,
    dst: &BTreeSet<NeuronId>,
    max_len: usize,
) -> Result<SignalReport, PathError> {
    let paths = enumerate_paths(graph, src, dst, max_len)?;
    let norm = src.len() as f64;
    let mut direct = 0.0;
    let mut indirect = 0.0;
    let mut positive = 0;
    let mut negative = 0;
    for path in &paths {
        if path.sign > 0 {
            positive += 1;
        } else {
            negative += 1;
        }
        let share = path.contribution() / norm;
        if path.len() == 1 {
            direct += share;
        } else {
            indirect += share;
        }
    }
    Ok(SignalReport {
        direct,
        indirect,
        total: direct + indirect,
        path_count_positive: positive,
        path_count_negative: negative,
    })
}

/// Outcome of [`steady_state_equivalence_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquivalenceOutcome {
    /// Static signal and simulated fixpoint give the same verdict.
    Agree,
    /// They differ; on an in-class graph this indicates a defect.
    Disagree,
    /// The graph falls outside the class for which the shortcut is exact.
    OutOfClass,
}

/// Compares the static path-sum verdict `total >= theta` against the
/// dynamic one: does `dst` fire in the fixpoint reached with `src` clamped?
///
/// The two agree on the restricted class where the path sum is exactly the
/// steady-state net input of the target:
///
/// * the graph is acyclic and every weight is exactly 1,
/// * every inhibitory edge points at a sink,
/// * `src` and `dst` are single neurons,
/// * no predecessor of `dst` is reachable from `src` along more than one
///   excitatory path (otherwise the path sum counts one physical edge
///   several times and overstates the drive).
///
/// Anything else returns [`EquivalenceOutcome::OutOfClass`].
pub fn steady_state_equivalence_check(
    graph: &NeuronGraph,
    src: &BTreeSet<NeuronId>,
    dst: &BTreeSet<NeuronId>,
) -> Result<EquivalenceOutcome, PathError> {
    if src.is_empty() {
        return Err(PathError::EmptySource);
    }
    if dst.is_empty() {
        return Err(PathError::EmptyTarget);
    }
    if src.intersection(dst).next().is_some() {
        return Err(PathError::OverlappingEndpoints);
    }
    if src.len() != 1 || dst.len() != 1 {
        return Ok(EquivalenceOutcome::OutOfClass);
    }
    if !in_equivalence_class(graph, *src.first().unwrap(), *dst.first().unwrap()) {
        return Ok(EquivalenceOutcome::OutOfClass);
    }

    let n = graph.neuron_count();
    let report = effective_signal(graph, src, dst, n.max(1))?;
    let statically_active = report.total >= graph.theta() - FIRING_EPS;

    // Longest chain plus settling of inhibited sinks is well under n + 3
    // ticks on an acyclic graph, so the run always reaches its fixpoint.
    let trace = graph.run(src, &AttentionMask::all_ones(), n + 3);
    debug_assert_eq!(trace.status(), RunStatus::Fixpoint);
    let dst_members: Vec<NeuronId> = dst.iter().copied().collect();
    let dynamically_active =
        group_activation(&trace.final_firing(), &dst_members, DEFAULT_RHO).unwrap();

    if statically_active == dynamically_active {
        Ok(EquivalenceOutcome::Agree)
    } else {
        Ok(EquivalenceOutcome::Disagree)
    }
}

fn in_equivalence_class(graph: &NeuronGraph, src: NeuronId, dst: NeuronId) -> bool {
    let n = graph.neuron_count();
    let mut out_degree = vec![0usize; n];
    for syn in graph.synapses() {
        if (syn.weight - 1.0).abs() > 1e-12 {
            return false;
        }
        out_degree[syn.source.index()] += 1;
    }
    for syn in graph.synapses() {
        if syn.polarity == Polarity::Inhibitory && out_degree[syn.target.index()] != 0 {
            return false;
        }
    }
    if !is_acyclic(graph) {
        return false;
    }
    // Count excitatory paths from src to every unit; saturate to keep the
    // counts small. dst's predecessors must each be reached along at most
    // one path.
    let counts = excitatory_path_counts(graph, src);
    graph
        .synapses()
        .filter(|s| s.target == dst)
        .all(|s| counts[s.source.index()] <= 1)
}

fn is_acyclic(graph: &NeuronGraph) -> bool {
    let n = graph.neuron_count();
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for syn in graph.synapses() {
        indegree[syn.target.index()] += 1;
        out[syn.source.index()].push(syn.target.index());
    }
    let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut removed = 0;
    while let Some(i) = queue.pop() {
        removed += 1;
        for &j in &out[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                queue.push(j);
            }
        }
    }
    removed == n
}

/// Number of distinct excitatory paths from `src` to each neuron, saturating
/// at a small bound. The empty path counts, so `src` itself gets 1.
fn excitatory_path_counts(graph: &NeuronGraph, src: NeuronId) -> Vec<u32> {
    let n = graph.neuron_count();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for syn in graph.synapses() {
        if syn.polarity == Polarity::Excitatory {
            out[syn.source.index()].push(syn.target.index());
            indegree[syn.target.index()] += 1;
        }
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut counts = vec![0u32; n];
    counts[src.index()] = 1;
    let mut head = 0;
    while head < order.len() {
        let i = order[head];
        head += 1;
        for &j in &out[i].clone() {
            counts[j] = counts[j].saturating_add(counts[i]).min(1000);
            indegree[j] -= 1;
            if indegree[j] == 0 {
                order.push(j);
            }
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::{build_graph, BuildConfig, GroupSpec, LinkSpec};

    fn singleton_graph(names: &[&str], links: Vec<LinkSpec>) -> NeuronGraph {
        let groups: Vec<GroupSpec> = names.iter().map(|n| GroupSpec::new(*n, 1)).collect();
        build_graph(&groups, &links, &BuildConfig::default()).unwrap()
    }

    fn members(graph: &NeuronGraph, name: &str) -> BTreeSet<NeuronId> {
        graph.group_members(name).unwrap().iter().copied().collect()
    }

    fn amplifier() -> NeuronGraph {
        singleton_graph(
            &["N1", "N2", "N3", "N4"],
            vec![
                LinkSpec::new("N1", "N2", Polarity::Excitatory, 1.0),
                LinkSpec::new("N1", "N3", Polarity::Excitatory, 1.0),
                LinkSpec::new("N2", "N4", Polarity::Excitatory, 1.0),
                LinkSpec::new("N3", "N4", Polarity::Excitatory, 1.0),
                LinkSpec::new("N1", "N4", Polarity::Inhibitory, 1.0),
            ],
        )
    }

    #[test]
    fn amplifier_signal_splits_into_direct_and_indirect() {
        let graph = amplifier();
        let report = effective_signal(
            &graph,
            &members(&graph, "N1"),
            &members(&graph, "N4"),
            4,
        )
        .unwrap();
        assert_eq!(report.direct, -1.0);
        assert_eq!(report.indirect, 2.0);
        assert_eq!(report.total, 1.0);
        assert_eq!(report.path_count_positive, 2);
        assert_eq!(report.path_count_negative, 1);
    }

    #[test]
    fn paths_sort_by_length_then_edges() {
        let graph = amplifier();
        let paths = enumerate_paths(
            &graph,
            &members(&graph, "N1"),
            &members(&graph, "N4"),
            4,
        )
        .unwrap();
        assert_eq!(paths.len(), 3);
        assert_eq!(paths[0].len(), 1);
        assert_eq!(paths[0].sign, -1);
        assert_eq!(paths[1].len(), 2);
        assert_eq!(paths[2].len(), 2);
        // The two-step paths are ordered by their first edge: via N2 before
        // via N3 (N2 was materialized first, so its id is lower).
        assert!(paths[1].edges[0].target < paths[2].edges[0].target);
    }

    #[test]
    fn inhibitory_edges_never_appear_mid_path() {
        // a -| b -> c: the inhibitory edge cannot be extended, so there is no
        // path from a to c at all.
        let graph = singleton_graph(
            &["a", "b", "c"],
            vec![
                LinkSpec::new("a", "b", Polarity::Inhibitory, 1.0),
                LinkSpec::new("b", "c", Polarity::Excitatory, 1.0),
            ],
        );
        let paths = enumerate_paths(&graph, &members(&graph, "a"), &members(&graph, "c"), 5)
            .unwrap();
        assert!(paths.is_empty());
    }

    #[test]
    fn sub_unit_weights_decay_with_length_unit_weights_do_not() {
        // Chain with 0.8 weights: each extra hop multiplies the strength
        // down. The same chain at weight 1 keeps strength 1 at any length.
        let decayed = singleton_graph(
            &["a", "b", "c", "d"],
            vec![
                LinkSpec::new("a", "b", Polarity::Excitatory, 0.8),
                LinkSpec::new("b", "c", Polarity::Excitatory, 0.8),
                LinkSpec::new("c", "d", Polarity::Excitatory, 0.8),
            ],
        );
        let paths = enumerate_paths(
            &decayed,
            &members(&decayed, "a"),
            &members(&decayed, "d"),
            4,
        )
        .unwrap();
        assert_eq!(paths.len(), 1);
        assert!((paths[0].strength - 0.8_f64.powi(3)).abs() < 1e-12);

        let unit = singleton_graph(
            &["a", "b", "c", "d"],
            vec![
                LinkSpec::new("a", "b", Polarity::Excitatory, 1.0),
                LinkSpec::new("b", "c", Polarity::Excitatory, 1.0),
                LinkSpec::new("c", "d", Polarity::Excitatory, 1.0),
            ],
        );
        let paths = enumerate_paths(&unit, &members(&unit, "a"), &members(&unit, "d"), 4)
            .unwrap();
        assert_eq!(paths[0].strength, 1.0);
    }

    #[test]
    fn endpoint_validation() {
        let graph = amplifier();
        let n1 = members(&graph, "N1");
        assert_eq!(
            enumerate_paths(&graph, &BTreeSet::new(), &n1, 4).unwrap_err(),
            PathError::EmptySource
        );
        assert_eq!(
            enumerate_paths(&graph, &n1, &BTreeSet::new(), 4).unwrap_err(),
            PathError::EmptyTarget
        );
        assert_eq!(
            enumerate_paths(&graph, &n1, &n1, 4).unwrap_err(),
            PathError::OverlappingEndpoints
        );
        assert_eq!(
            enumerate_paths(&graph, &n1, &members(&graph, "N4"), 0).unwrap_err(),
            PathError::ZeroMaxLen
        );
    }

    #[test]
    fn max_len_truncates_enumeration() {
        let graph = amplifier();
        let paths = enumerate_paths(
            &graph,
            &members(&graph, "N1"),
            &members(&graph, "N4"),
            1,
        )
        .unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].sign, -1);
    }

    #[test]
    fn equivalence_agrees_on_the_amplifier() {
        let graph = amplifier();
        let outcome = steady_state_equivalence_check(
            &graph,
            &members(&graph, "N1"),
            &members(&graph, "N4"),
        )
        .unwrap();
        assert_eq!(outcome, EquivalenceOutcome::Agree);
    }

    #[test]
    fn equivalence_agrees_on_a_plain_chain() {
        let graph = singleton_graph(
            &["a", "b", "c"],
            vec![
                LinkSpec::new("a", "b", Polarity::Excitatory, 1.0),
                LinkSpec::new("b", "c", Polarity::Excitatory, 1.0),
            ],
        );
        let outcome = steady_state_equivalence_check(
            &graph,
            &members(&graph, "a"),
            &members(&graph, "c"),
        )
        .unwrap();
        assert_eq!(outcome, EquivalenceOutcome::Agree);
    }

    #[test]
    fn inhibition_into_a_relay_is_out_of_class() {
        // b relays onward, so inhibiting it cannot be captured by a terminal
        // path sum.
        let graph = singleton_graph(
            &["a", "b", "c"],
            vec![
                LinkSpec::new("a", "b", Polarity::Inhibitory, 1.0),
                LinkSpec::new("b", "c", Polarity::Excitatory, 1.0),
            ],
        );
        let outcome = steady_state_equivalence_check(
            &graph,
            &members(&graph, "a"),
            &members(&graph, "c"),
        )
        .unwrap();
        assert_eq!(outcome, EquivalenceOutcome::OutOfClass);
    }

    #[test]
    fn duplicated_drive_is_out_of_class() {
        // Two excitatory routes reach d, which then feeds z: the path sum
        // would count d's single physical edge twice.
        let graph = singleton_graph(
            &["a", "b", "c", "d", "z"],
            vec![
                LinkSpec::new("a", "b", Polarity::Excitatory, 1.0),
                LinkSpec::new("a", "c", Polarity::Excitatory, 1.0),
                LinkSpec::new("b", "d", Polarity::Excitatory, 1.0),
                LinkSpec::new("c", "d", Polarity::Excitatory, 1.0),
                LinkSpec::new("d", "z", Polarity::Excitatory, 1.0),
                LinkSpec::new("a", "z", Polarity::Inhibitory, 1.0),
            ],
        );
        let outcome = steady_state_equivalence_check(
            &graph,
            &members(&graph, "a"),
            &members(&graph, "z"),
        )
        .unwrap();
        // Statically +2 - 1 = +1, dynamically 1 - 1 = 0: the class predicate
        // must reject this graph rather than let the two verdicts split.
        assert_eq!(outcome, EquivalenceOutcome::OutOfClass);
    }

    #[test]
    fn cyclic_or_weighted_graphs_are_out_of_class() {
        let cyclic = singleton_graph(
            &["a", "b", "c"],
            vec![
                LinkSpec::new("a", "b", Polarity::Excitatory, 1.0),
                LinkSpec::new("b", "a", Polarity::Excitatory, 1.0),
                LinkSpec::new("b", "c", Polarity::Excitatory, 1.0),
            ],
        );
        assert_eq!(
            steady_state_equivalence_check(
                &cyclic,
                &members(&cyclic, "a"),
                &members(&cyclic, "c")
            )
            .unwrap(),
            EquivalenceOutcome::OutOfClass
        );

        let weighted = singleton_graph(
            &["a", "b"],
            vec![LinkSpec::new("a", "b", Polarity::Excitatory, 0.7)],
        );
        assert_eq!(
            steady_state_equivalence_check(
                &weighted,
                &members(&weighted, "a"),
                &members(&weighted, "b")
            )
            .unwrap(),
            EquivalenceOutcome::OutOfClass
        );
    }
}
