//! Threshold-neuron substrate: graphs of binary units joined by signed,
//! weighted synapses, advanced in synchronous ticks.
//!
//! Everything above this module (pictures, path analysis, counterfactual
//! evaluation) compiles down to the operations here. The substrate itself
//! carries no meaning: neurons are anonymous; group names exist only so the
//! meaning-bearing layers can address coherent blocks of units.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

/// Tolerance used when comparing accumulated input against the firing
/// threshold, so that sums like `0.1 + 0.3 + 0.3 + 0.3` still count as
/// reaching `1.0`.
pub const FIRING_EPS: f64 = 1e-9;

/// Default firing threshold.
pub const DEFAULT_THETA: f64 = 1.0;

/// Default weight for the dense excitatory links inside a group.
pub const DEFAULT_INTERNAL_WEIGHT: f64 = 1.0;

/// Default fraction of a group that must fire for the group to count as
/// active.
pub const DEFAULT_RHO: f64 = 0.5;

/// Identifier of a single neuron. Ids are dense indices into the graph's
/// neuron table, so iterating in id order is iterating in insertion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct NeuronId(pub u32);

impl NeuronId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NeuronId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Sign of a synapse. A unit's input is the excitatory sum minus the
/// inhibitory sum; there is no graded firing in between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    Excitatory,
    Inhibitory,
}

impl Polarity {
    /// +1 for excitatory, -1 for inhibitory.
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Excitatory => 1.0,
            Polarity::Inhibitory => -1.0,
        }
    }
}

/// Classification a synapse carries. The dynamics ignore it; it is metadata
/// for readers and serializers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConnectionKind {
    #[default]
    Association,
    Inference,
    Kinship,
    Development,
    Binding,
}

/// A synapse is identified by (source, target, polarity). Declaring the same
/// triple twice merges the weights, so there is never a parallel pair of
/// same-sign edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SynapseKey {
    pub source: NeuronId,
    pub target: NeuronId,
    pub polarity: Polarity,
}

/// A single neuron. `owner_group` is the group it was materialized for, if
/// any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Neuron {
    pub id: NeuronId,
    pub owner_group: Option<String>,
}

/// One directed, signed, weighted connection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Synapse {
    pub source: NeuronId,
    pub target: NeuronId,
    pub polarity: Polarity,
    pub weight: f64,
    pub kind: ConnectionKind,
}

impl Synapse {
    pub fn key(&self) -> SynapseKey {
        SynapseKey {
            source: self.source,
            target: self.target,
            polarity: self.polarity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct SynapseData {
    weight: f64,
    kind: ConnectionKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum SubstrateError {
    #[error("group `{0}` is declared twice")]
    DuplicateGroup(String),
    #[error("group `{0}` is not declared")]
    UnknownGroup(String),
    #[error("group `{0}` must have at least one neuron")]
    EmptyGroup(String),
    #[error("neuron {0} is not in the graph")]
    UnknownNeuron(NeuronId),
    #[error("synapse weight must be non-negative, got {0}")]
    NegativeWeight(f64),
    #[error("attention gain must lie in [0, 1], got {0}")]
    GainOutOfRange(f64),
    #[error("activation ratio must lie in (0, 1], got {0}")]
    RhoOutOfRange(f64),
    #[error("group activation is undefined for an empty group")]
    EmptyActivationGroup,
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

/// Per-neuron and per-edge gains in `[0, 1]`.
///
/// An absent entry means gain 1. An edge's contribution is scaled by its edge
/// gain; a neuron's total input is scaled by its neuron gain, so gain 0
/// silences the unit entirely (unless it is clamped) and intermediate gains
/// attenuate without changing the wiring.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttentionMask {
    neuron_gain: BTreeMap<NeuronId, f64>,
    edge_gain: BTreeMap<SynapseKey, f64>,
}

impl AttentionMask {
    /// The identity mask: every gain is 1.
    pub fn all_ones() -> Self {
        Self::default()
    }

    pub fn set_neuron_gain(&mut self, id: NeuronId, gain: f64) -> Result<(), SubstrateError> {
        check_gain(gain)?;
        self.neuron_gain.insert(id, gain);
        Ok(())
    }

    pub fn set_edge_gain(&mut self, key: SynapseKey, gain: f64) -> Result<(), SubstrateError> {
        check_gain(gain)?;
        self.edge_gain.insert(key, gain);
        Ok(())
    }

    pub fn neuron_gain(&self, id: NeuronId) -> f64 {
        self.neuron_gain.get(&id).copied().unwrap_or(1.0)
    }

    pub fn edge_gain(&self, key: &SynapseKey) -> f64 {
        self.edge_gain.get(key).copied().unwrap_or(1.0)
    }

    /// True when no gain deviates from 1.
    pub fn is_identity(&self) -> bool {
        self.neuron_gain.values().all(|g| *g == 1.0) && self.edge_gain.values().all(|g| *g == 1.0)
    }
}

fn check_gain(gain: f64) -> Result<(), SubstrateError> {
    if !(0.0..=1.0).contains(&gain) || gain.is_nan() {
        return Err(SubstrateError::GainOutOfRange(gain));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Activation state and traces
// ---------------------------------------------------------------------------

/// Snapshot of which neurons fire at a given tick. Clamped neurons are held
/// firing from outside and are always a subset of the firing set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationState {
    firing: BTreeSet<NeuronId>,
    clamped: BTreeSet<NeuronId>,
    tick: u32,
}

impl ActivationState {
    /// Initial state: exactly the given neurons fire, and `clamped` of them
    /// stay held. The clamped set is forced into the firing set.
    pub fn new(initial: BTreeSet<NeuronId>, clamped: BTreeSet<NeuronId>) -> Self {
        let mut firing = initial;
        firing.extend(clamped.iter().copied());
        Self {
            firing,
            clamped,
            tick: 0,
        }
    }

    pub fn firing(&self) -> &BTreeSet<NeuronId> {
        &self.firing
    }

    pub fn clamped(&self) -> &BTreeSet<NeuronId> {
        &self.clamped
    }

    pub fn tick(&self) -> u32 {
        self.tick
    }

    pub fn is_firing(&self, id: NeuronId) -> bool {
        self.firing.contains(&id)
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    /// Two consecutive ticks produced the same firing set.
    Fixpoint,
    /// A firing set recurred after at least one different tick in between.
    Cycle,
    /// The tick budget ran out before either of the above.
    TickBudgetExhausted,
}

/// Full record of a run: the firing set at every tick, starting with the
/// initial state, plus the reason the run stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    snapshots: Vec<BTreeSet<NeuronId>>,
    status: RunStatus,
}

impl Trace {
    /// A trace with no ticks at all, used when evaluation stops before any
    /// simulation happens.
    pub fn empty() -> Self {
        Self {
            snapshots: Vec::new(),
            status: RunStatus::Fixpoint,
        }
    }

    pub fn snapshots(&self) -> &[BTreeSet<NeuronId>] {
        &self.snapshots
    }

    pub fn status(&self) -> RunStatus {
        self.status
    }

    /// Firing set at the last recorded tick; empty for an empty trace.
    pub fn final_firing(&self) -> BTreeSet<NeuronId> {
        self.snapshots.last().cloned().unwrap_or_default()
    }
}

// ---------------------------------------------------------------------------
// The graph
// ---------------------------------------------------------------------------

/// A fixed population of neurons plus their synapses and the shared firing
/// threshold. Group membership is recorded so higher layers can address
/// blocks of neurons by name.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronGraph {
    neurons: Vec<Neuron>,
    synapses: BTreeMap<SynapseKey, SynapseData>,
    groups: BTreeMap<String, Vec<NeuronId>>,
    theta: f64,
}

impl NeuronGraph {
    pub fn new(theta: f64) -> Self {
        Self {
            neurons: Vec::new(),
            synapses: BTreeMap::new(),
            groups: BTreeMap::new(),
            theta,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn set_theta(&mut self, theta: f64) {
        self.theta = theta;
    }

    pub fn neuron_count(&self) -> usize {
        self.neurons.len()
    }

    pub fn synapse_count(&self) -> usize {
        self.synapses.len()
    }

    pub fn neurons(&self) -> impl Iterator<Item = &Neuron> {
        self.neurons.iter()
    }

    /// All neuron ids, ascending.
    pub fn neuron_ids(&self) -> impl Iterator<Item = NeuronId> + '_ {
        self.neurons.iter().map(|n| n.id)
    }

    /// Synapses in key order (source, then target, then polarity).
    pub fn synapses(&self) -> impl Iterator<Item = Synapse> + '_ {
        self.synapses.iter().map(|(key, data)| Synapse {
            source: key.source,
            target: key.target,
            polarity: key.polarity,
            weight: data.weight,
            kind: data.kind,
        })
    }

    pub fn synapse_weight(&self, key: &SynapseKey) -> Option<f64> {
        self.synapses.get(key).map(|d| d.weight)
    }

    pub fn add_neuron(&mut self, owner_group: Option<String>) -> NeuronId {
        let id = NeuronId(self.neurons.len() as u32);
        self.neurons.push(Neuron { id, owner_group });
        id
    }

    /// Inserts a synapse, merging with an existing edge of the same key by
    /// weight addition. The kind of an existing edge is kept.
    pub fn add_synapse(
        &mut self,
        source: NeuronId,
        target: NeuronId,
        polarity: Polarity,
        weight: f64,
        kind: ConnectionKind,
    ) -> Result<(), SubstrateError> {
        if weight < 0.0 || weight.is_nan() {
            return Err(SubstrateError::NegativeWeight(weight));
        }
        self.check_neuron(source)?;
        self.check_neuron(target)?;
        let key = SynapseKey {
            source,
            target,
            polarity,
        };
        self.synapses
            .entry(key)
            .and_modify(|data| data.weight += weight)
            .or_insert(SynapseData { weight, kind });
        Ok(())
    }

    /// Overwrites the weight of an existing synapse.
    pub fn set_synapse_weight(
        &mut self,
        key: &SynapseKey,
        weight: f64,
    ) -> Result<(), SubstrateError> {
        if weight < 0.0 || weight.is_nan() {
            return Err(SubstrateError::NegativeWeight(weight));
        }
        match self.synapses.get_mut(key) {
            Some(data) => {
                data.weight = weight;
                Ok(())
            }
            None => Err(SubstrateError::UnknownNeuron(key.source)),
        }
    }

    pub fn remove_synapse(&mut self, key: &SynapseKey) -> bool {
        self.synapses.remove(key).is_some()
    }

    fn check_neuron(&self, id: NeuronId) -> Result<(), SubstrateError> {
        if id.index() < self.neurons.len() {
            Ok(())
        } else {
            Err(SubstrateError::UnknownNeuron(id))
        }
    }

    /// Records a named group over existing neurons.
    pub fn add_group(
        &mut self,
        name: &str,
        members: Vec<NeuronId>,
    ) -> Result<(), SubstrateError> {
        if self.groups.contains_key(name) {
            return Err(SubstrateError::DuplicateGroup(name.to_owned()));
        }
        if members.is_empty() {
            return Err(SubstrateError::EmptyGroup(name.to_owned()));
        }
        for id in &members {
            self.check_neuron(*id)?;
        }
        self.groups.insert(name.to_owned(), members);
        Ok(())
    }

    pub fn group_members(&self, name: &str) -> Option<&[NeuronId]> {
        self.groups.get(name).map(|v| v.as_slice())
    }

    pub fn group_names(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(|s| s.as_str())
    }

    /// Total gated excitatory input a neuron would receive from `firing`.
    pub fn excitatory_input(
        &self,
        target: NeuronId,
        firing: &BTreeSet<NeuronId>,
        gains: &AttentionMask,
    ) -> f64 {
        self.synapses
            .iter()
            .filter(|(key, _)| {
                key.target == target
                    && key.polarity == Polarity::Excitatory
                    && firing.contains(&key.source)
            })
            .map(|(key, data)| data.weight * gains.edge_gain(key))
            .sum()
    }

    /// One synchronous tick. A neuron fires in the next state iff its gated
    /// net input meets the threshold, or it is clamped. Nothing else carries
    /// over: an undriven neuron stops firing after one tick.
    pub fn step(&self, state: &ActivationState, gains: &AttentionMask) -> ActivationState {
        let n = self.neurons.len();
        let mut positive = vec![0.0_f64; n];
        let mut negative = vec![0.0_f64; n];
        for (key, data) in &self.synapses {
            if !state.firing.contains(&key.source) {
                continue;
            }
            let w = data.weight * gains.edge_gain(key);
            match key.polarity {
                Polarity::Excitatory => positive[key.target.index()] += w,
                Polarity::Inhibitory => negative[key.target.index()] += w,
            }
        }
        let mut firing = BTreeSet::new();
        for neuron in &self.neurons {
            let i = neuron.id.index();
            let net = gains.neuron_gain(neuron.id) * (positive[i] - negative[i]);
            if net >= self.theta - FIRING_EPS {
                firing.insert(neuron.id);
            }
        }
        firing.extend(state.clamped.iter().copied());
        ActivationState {
            firing,
            clamped: state.clamped.clone(),
            tick: state.tick + 1,
        }
    }

    /// Runs from `firing = clamps` until a fixpoint, a recurring state, or
    /// the tick budget. See [`NeuronGraph::run_from`].
    pub fn run(
        &self,
        clamps: &BTreeSet<NeuronId>,
        gains: &AttentionMask,
        max_ticks: usize,
    ) -> Trace {
        self.run_from(clamps.clone(), clamps.clone(), gains, max_ticks)
    }

    /// Runs from an explicit initial firing set. `clamped` neurons stay held
    /// for the whole run; the rest of the initial set persists only as far
    /// as the dynamics re-drive it.
    pub fn run_from(
        &self,
        initial: BTreeSet<NeuronId>,
        clamped: BTreeSet<NeuronId>,
        gains: &AttentionMask,
        max_ticks: usize,
    ) -> Trace {
        let mut state = ActivationState::new(initial, clamped);
        let mut snapshots = vec![state.firing.clone()];
        let mut seen: HashMap<BTreeSet<NeuronId>, u32> = HashMap::new();
        seen.insert(state.firing.clone(), 0);
        for _ in 0..max_ticks {
            let next = self.step(&state, gains);
            snapshots.push(next.firing.clone());
            if next.firing == state.firing {
                return Trace {
                    snapshots,
                    status: RunStatus::Fixpoint,
                };
            }
            if seen.contains_key(&next.firing) {
                return Trace {
                    snapshots,
                    status: RunStatus::Cycle,
                };
            }
            seen.insert(next.firing.clone(), next.tick);
            state = next;
        }
        Trace {
            snapshots,
            status: RunStatus::TickBudgetExhausted,
        }
    }
}

/// Whether at least `rho` of the group fires in `firing`.
pub fn group_activation(
    firing: &BTreeSet<NeuronId>,
    group: &[NeuronId],
    rho: f64,
) -> Result<bool, SubstrateError> {
    if group.is_empty() {
        return Err(SubstrateError::EmptyActivationGroup);
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(SubstrateError::RhoOutOfRange(rho));
    }
    let active = group.iter().filter(|id| firing.contains(id)).count();
    Ok(active as f64 >= rho * group.len() as f64 - FIRING_EPS)
}

// ---------------------------------------------------------------------------
// Construction from group-level declarations
// ---------------------------------------------------------------------------

/// Declaration of a named group of `size` neurons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    pub name: String,
    pub size: usize,
}

impl GroupSpec {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Self {
            name: name.into(),
            size,
        }
    }
}

/// Declaration of a group-level link. The declared weight is the total
/// signal the whole source group delivers to each target member.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub source: String,
    pub target: String,
    pub polarity: Polarity,
    pub weight: f64,
    pub kind: ConnectionKind,
}

impl LinkSpec {
    pub fn new(
        source: impl Into<String>,
        target: impl Into<String>,
        polarity: Polarity,
        weight: f64,
    ) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            polarity,
            weight,
            kind: ConnectionKind::default(),
        }
    }
}

/// Expansion parameters for [`build_graph`].
#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    pub theta: f64,
    /// Weight of each dense excitatory edge inside a group.
    pub internal_weight: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            theta: DEFAULT_THETA,
            internal_weight: DEFAULT_INTERNAL_WEIGHT,
        }
    }
}

/// Materializes group declarations into a neuron graph.
///
/// A group of size n becomes n neurons densely connected by excitatory edges
/// of `internal_weight` (no self-edges). A group-level link of weight w
/// becomes all-to-all edges of weight `w / |source|`, so the total signal
/// arriving at each target member when the whole source group fires is w,
/// independent of the source's size.
pub fn build_graph(
    groups: &[GroupSpec],
    links: &[LinkSpec],
    config: &BuildConfig,
) -> Result<NeuronGraph, SubstrateError> {
    let mut graph = NeuronGraph::new(config.theta);
    for spec in groups {
        if spec.size == 0 {
            return Err(SubstrateError::EmptyGroup(spec.name.clone()));
        }
        if graph.groups.contains_key(&spec.name) {
            return Err(SubstrateError::DuplicateGroup(spec.name.clone()));
        }
        let members: Vec<NeuronId> = (0..spec.size)
            .map(|_| graph.add_neuron(Some(spec.name.clone())))
            .collect();
        for &a in &members {
            for &b in &members {
                if a != b {
                    graph.add_synapse(
                        a,
                        b,
                        Polarity::Excitatory,
                        config.internal_weight,
                        ConnectionKind::Association,
                    )?;
                }
            }
        }
        graph.groups.insert(spec.name.clone(), members);
    }
    for link in links {
        let sources = graph
            .group_members(&link.source)
            .ok_or_else(|| SubstrateError::UnknownGroup(link.source.clone()))?
            .to_vec();
        let targets = graph
            .group_members(&link.target)
            .ok_or_else(|| SubstrateError::UnknownGroup(link.target.clone()))?
            .to_vec();
        let per_edge = link.weight / sources.len() as f64;
        for &s in &sources {
            for &t in &targets {
                if s != t {
                    graph.add_synapse(s, t, link.polarity, per_edge, link.kind)?;
                }
            }
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn singleton_groups(names: &[&str]) -> Vec<GroupSpec> {
        names.iter().map(|n| GroupSpec::new(*n, 1)).collect()
    }

    fn ids(graph: &NeuronGraph, group: &str) -> BTreeSet<NeuronId> {
        graph.group_members(group).unwrap().iter().copied().collect()
    }

    /// The four-unit amplifier: two unit-weight branches beat one direct
    /// inhibitory edge, so the sink fires two ticks after the source.
    fn amplifier() -> NeuronGraph {
        let groups = singleton_groups(&["N1", "N2", "N3", "N4"]);
        let links = vec![
            LinkSpec::new("N1", "N2", Polarity::Excitatory, 1.0),
            LinkSpec::new("N1", "N3", Polarity::Excitatory, 1.0),
            LinkSpec::new("N2", "N4", Polarity::Excitatory, 1.0),
            LinkSpec::new("N3", "N4", Polarity::Excitatory, 1.0),
            LinkSpec::new("N1", "N4", Polarity::Inhibitory, 1.0),
        ];
        build_graph(&groups, &links, &BuildConfig::default()).unwrap()
    }

    #[test]
    fn group_of_four_gets_dense_internal_wiring() {
        let graph = build_graph(
            &[GroupSpec::new("g", 4)],
            &[],
            &BuildConfig::default(),
        )
        .unwrap();
        assert_eq!(graph.neuron_count(), 4);
        // n * (n - 1) ordered pairs, no self-edges.
        assert_eq!(graph.synapse_count(), 12);
        assert!(graph
            .synapses()
            .all(|s| s.polarity == Polarity::Excitatory && s.weight == 1.0));
    }

    #[test]
    fn group_link_weight_splits_over_source_members() {
        let graph = build_graph(
            &[GroupSpec::new("a", 2), GroupSpec::new("b", 3)],
            &[LinkSpec::new("a", "b", Polarity::Excitatory, 1.0)],
            &BuildConfig::default(),
        )
        .unwrap();
        let a = ids(&graph, "a");
        let b = graph.group_members("b").unwrap().to_vec();
        // Each of the 2x3 cross edges carries half a unit, so every target
        // member receives exactly the declared group weight when all of `a`
        // fires.
        for &t in &b {
            let input = graph.excitatory_input(t, &a, &AttentionMask::all_ones());
            assert!((input - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn parallel_same_sign_links_merge_by_addition() {
        let mut graph = NeuronGraph::new(1.0);
        let a = graph.add_neuron(None);
        let b = graph.add_neuron(None);
        graph
            .add_synapse(a, b, Polarity::Excitatory, 0.4, ConnectionKind::Association)
            .unwrap();
        graph
            .add_synapse(a, b, Polarity::Excitatory, 0.3, ConnectionKind::Inference)
            .unwrap();
        assert_eq!(graph.synapse_count(), 1);
        let key = SynapseKey {
            source: a,
            target: b,
            polarity: Polarity::Excitatory,
        };
        assert!((graph.synapse_weight(&key).unwrap() - 0.7).abs() < 1e-12);
        // Opposite polarity is a distinct edge, not a merge.
        graph
            .add_synapse(a, b, Polarity::Inhibitory, 0.2, ConnectionKind::Association)
            .unwrap();
        assert_eq!(graph.synapse_count(), 2);
    }

    #[test]
    fn negative_weight_is_rejected() {
        let mut graph = NeuronGraph::new(1.0);
        let a = graph.add_neuron(None);
        let b = graph.add_neuron(None);
        let err = graph
            .add_synapse(a, b, Polarity::Inhibitory, -0.5, ConnectionKind::Association)
            .unwrap_err();
        assert_eq!(err, SubstrateError::NegativeWeight(-0.5));
    }

    #[test]
    fn amplifier_sink_fires_at_tick_two() {
        let graph = amplifier();
        let clamps = ids(&graph, "N1");
        let trace = graph.run(&clamps, &AttentionMask::all_ones(), 10);
        assert_eq!(trace.status(), RunStatus::Fixpoint);
        let n4 = graph.group_members("N4").unwrap()[0];
        let n2 = graph.group_members("N2").unwrap()[0];
        // Tick 1: the two relays fire, the sink still sees net 0 - 1.
        assert!(trace.snapshots()[1].contains(&n2));
        assert!(!trace.snapshots()[1].contains(&n4));
        // Tick 2: +1 +1 -1 = +1 meets theta.
        assert!(trace.snapshots()[2].contains(&n4));
        assert!(trace.final_firing().contains(&n4));
    }

    #[test]
    fn amplifier_without_second_branch_never_fires_sink() {
        let mut graph = amplifier();
        let n3 = graph.group_members("N3").unwrap()[0];
        let n4 = graph.group_members("N4").unwrap()[0];
        graph.remove_synapse(&SynapseKey {
            source: n3,
            target: n4,
            polarity: Polarity::Excitatory,
        });
        let clamps = ids(&graph, "N1");
        let trace = graph.run(&clamps, &AttentionMask::all_ones(), 10);
        assert_eq!(trace.status(), RunStatus::Fixpoint);
        // +1 - 1 = 0 stays below theta forever.
        assert!(trace.snapshots().iter().all(|snap| !snap.contains(&n4)));
    }

    #[test]
    fn undriven_firing_decays_after_one_tick() {
        let graph = build_graph(
            &singleton_groups(&["a", "b"]),
            &[LinkSpec::new("a", "b", Polarity::Excitatory, 1.0)],
            &BuildConfig::default(),
        )
        .unwrap();
        let a: BTreeSet<NeuronId> = ids(&graph, "a");
        // Initial firing without a clamp: a fires once, hands the signal to
        // b, then everything dies out.
        let trace = graph.run_from(a, BTreeSet::new(), &AttentionMask::all_ones(), 10);
        assert_eq!(trace.status(), RunStatus::Fixpoint);
        assert_eq!(trace.snapshots().last().unwrap().len(), 0);
    }

    #[test]
    fn clamped_neurons_stay_on_regardless_of_inhibition() {
        let graph = build_graph(
            &singleton_groups(&["a", "b"]),
            &[
                LinkSpec::new("a", "b", Polarity::Excitatory, 1.0),
                LinkSpec::new("b", "a", Polarity::Inhibitory, 5.0),
            ],
            &BuildConfig::default(),
        )
        .unwrap();
        let clamps = ids(&graph, "a");
        let trace = graph.run(&clamps, &AttentionMask::all_ones(), 10);
        assert_eq!(trace.status(), RunStatus::Fixpoint);
        let a = graph.group_members("a").unwrap()[0];
        assert!(trace.snapshots().iter().all(|snap| snap.contains(&a)));
    }

    #[test]
    fn mutual_excitation_without_clamp_cycles() {
        // Frozen from enumerating the two-neuron systems by hand: a -> b and
        // b -> a with unit weights, started from {a} with no clamp, ping-pong
        // forever: {a}, {b}, {a}, ...
        let graph = build_graph(
            &singleton_groups(&["a", "b"]),
            &[
                LinkSpec::new("a", "b", Polarity::Excitatory, 1.0),
                LinkSpec::new("b", "a", Polarity::Excitatory, 1.0),
            ],
            &BuildConfig::default(),
        )
        .unwrap();
        let a = ids(&graph, "a");
        let trace = graph.run_from(a, BTreeSet::new(), &AttentionMask::all_ones(), 10);
        assert_eq!(trace.status(), RunStatus::Cycle);
        assert_eq!(trace.snapshots().len(), 3);
        assert_eq!(trace.snapshots()[0], trace.snapshots()[2]);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let graph = build_graph(
            &singleton_groups(&["a", "b"]),
            &[
                LinkSpec::new("a", "b", Polarity::Excitatory, 1.0),
                LinkSpec::new("b", "a", Polarity::Excitatory, 1.0),
            ],
            &BuildConfig::default(),
        )
        .unwrap();
        let a = ids(&graph, "a");
        // One tick is not enough to see the state recur.
        let trace = graph.run_from(a, BTreeSet::new(), &AttentionMask::all_ones(), 1);
        assert_eq!(trace.status(), RunStatus::TickBudgetExhausted);
        assert_eq!(trace.snapshots().len(), 2);
    }

    #[test]
    fn step_is_pure() {
        let graph = amplifier();
        let clamps = ids(&graph, "N1");
        let state = ActivationState::new(clamps.clone(), clamps);
        let before = state.clone();
        let next = graph.step(&state, &AttentionMask::all_ones());
        assert_eq!(state, before);
        assert_eq!(next.tick(), 1);
        // Stepping the same state again gives the same answer.
        let again = graph.step(&state, &AttentionMask::all_ones());
        assert_eq!(next, again);
    }

    #[test]
    fn neuron_gain_scales_total_input() {
        let graph = build_graph(
            &singleton_groups(&["a", "b"]),
            &[LinkSpec::new("a", "b", Polarity::Excitatory, 1.0)],
            &BuildConfig::default(),
        )
        .unwrap();
        let b = graph.group_members("b").unwrap()[0];
        let clamps = ids(&graph, "a");
        let mut mask = AttentionMask::all_ones();
        mask.set_neuron_gain(b, 0.5).unwrap();
        let trace = graph.run(&clamps, &mask, 5);
        // Half a unit of net input never reaches theta.
        assert!(trace.final_firing().iter().all(|id| *id != b));
    }

    #[test]
    fn edge_gain_zero_severs_the_connection() {
        let graph = build_graph(
            &singleton_groups(&["a", "b"]),
            &[LinkSpec::new("a", "b", Polarity::Excitatory, 2.0)],
            &BuildConfig::default(),
        )
        .unwrap();
        let a = graph.group_members("a").unwrap()[0];
        let b = graph.group_members("b").unwrap()[0];
        let mut mask = AttentionMask::all_ones();
        mask.set_edge_gain(
            SynapseKey {
                source: a,
                target: b,
                polarity: Polarity::Excitatory,
            },
            0.0,
        )
        .unwrap();
        let clamps = ids(&graph, "a");
        let trace = graph.run(&clamps, &mask, 5);
        assert!(!trace.final_firing().contains(&b));
    }

    #[test]
    fn gain_outside_unit_interval_is_rejected() {
        let mut mask = AttentionMask::all_ones();
        assert!(mask.set_neuron_gain(NeuronId(0), 1.5).is_err());
        assert!(mask.set_neuron_gain(NeuronId(0), -0.1).is_err());
        assert!(mask.set_neuron_gain(NeuronId(0), 1.0).is_ok());
    }

    #[test]
    fn group_activation_uses_the_rho_fraction() {
        let graph = build_graph(
            &[GroupSpec::new("g", 4)],
            &[],
            &BuildConfig::default(),
        )
        .unwrap();
        let members = graph.group_members("g").unwrap();
        let two: BTreeSet<NeuronId> = members[..2].iter().copied().collect();
        let one: BTreeSet<NeuronId> = members[..1].iter().copied().collect();
        assert!(group_activation(&two, members, 0.5).unwrap());
        assert!(!group_activation(&one, members, 0.5).unwrap());
        assert!(group_activation(&one, members, 0.25).unwrap());
        assert!(!group_activation(&BTreeSet::new(), members, 0.5).unwrap());
    }

    #[test]
    fn group_activation_rejects_degenerate_arguments() {
        assert_eq!(
            group_activation(&BTreeSet::new(), &[], 0.5).unwrap_err(),
            SubstrateError::EmptyActivationGroup
        );
        assert_eq!(
            group_activation(&BTreeSet::new(), &[NeuronId(0)], 0.0).unwrap_err(),
            SubstrateError::RhoOutOfRange(0.0)
        );
        assert!(group_activation(&BTreeSet::new(), &[NeuronId(0)], 1.0).is_ok());
    }

    #[test]
    fn build_rejects_bad_declarations() {
        assert_eq!(
            build_graph(&[GroupSpec::new("g", 0)], &[], &BuildConfig::default()).unwrap_err(),
            SubstrateError::EmptyGroup("g".into())
        );
        assert_eq!(
            build_graph(
                &[GroupSpec::new("g", 1), GroupSpec::new("g", 1)],
                &[],
                &BuildConfig::default()
            )
            .unwrap_err(),
            SubstrateError::DuplicateGroup("g".into())
        );
        assert_eq!(
            build_graph(
                &[GroupSpec::new("g", 1)],
                &[LinkSpec::new("g", "h", Polarity::Excitatory, 1.0)],
                &BuildConfig::default()
            )
            .unwrap_err(),
            SubstrateError::UnknownGroup("h".into())
        );
    }

    #[test]
    fn runs_are_reproducible() {
        let graph = amplifier();
        let clamps = ids(&graph, "N1");
        let t1 = graph.run(&clamps, &AttentionMask::all_ones(), 16);
        let t2 = graph.run(&clamps, &AttentionMask::all_ones(), 16);
        assert_eq!(t1, t2);
    }
}
