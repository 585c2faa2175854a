//! Pictures: coherent groups of neurons that carry meaning as wholes.
//!
//! A picture names a set of member neurons, the parts it decomposes into,
//! and the feature tags it stands for. Pictures never bottom out in atoms:
//! anything with more than one member can be cut further, down to synthetic
//! single-neuron leaves. Composition welds two pictures into a new one by
//! adding binding edges to the working graph; it is deliberately sensitive
//! to operand order, because the left operand's reading survives a feature
//! conflict under the default policy.

use std::collections::BTreeSet;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::substrate::{
    AttentionMask, ConnectionKind, NeuronGraph, NeuronId, Polarity, SubstrateError, SynapseKey,
};

/// Identifier of a picture. Composition derives fresh ids of the form
/// `(left+right)` so every picture in a working store stays addressable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct PictureId(pub String);

impl PictureId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for PictureId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PictureId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Whether a feature is claimed to hold or claimed not to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeaturePolarity {
    Asserted,
    Denied,
}

impl FeaturePolarity {
    pub fn flipped(self) -> Self {
        match self {
            FeaturePolarity::Asserted => FeaturePolarity::Denied,
            FeaturePolarity::Denied => FeaturePolarity::Asserted,
        }
    }
}

/// A named feature with a polarity. Renders as `name` when asserted and
/// `!name` when denied.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureTag {
    pub name: String,
    pub polarity: FeaturePolarity,
}

impl FeatureTag {
    pub fn asserted(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            polarity: FeaturePolarity::Asserted,
        }
    }

    pub fn denied(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            polarity: FeaturePolarity::Denied,
        }
    }

    pub fn flipped(&self) -> Self {
        Self {
            name: self.name.clone(),
            polarity: self.polarity.flipped(),
        }
    }
}

impl std::fmt::Display for FeatureTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.polarity {
            FeaturePolarity::Asserted => f.write_str(&self.name),
            FeaturePolarity::Denied => write!(f, "!{}", self.name),
        }
    }
}

impl Serialize for FeatureTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Map from feature tags to the group of neurons that realizes each tag.
/// Every tag a picture carries is mirrored by such a subgroup, so feature
/// talk always has a neural footprint.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureMap {
    realizers: BTreeMap<FeatureTag, Realizer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realizer {
    pub group: String,
    pub members: BTreeSet<NeuronId>,
}

impl FeatureMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers the realizing group for a tag. Each tag has exactly one
    /// realizer.
    pub fn insert(
        &mut self,
        tag: FeatureTag,
        group: impl Into<String>,
        members: BTreeSet<NeuronId>,
    ) -> Result<(), PictureError> {
        match self.realizers.entry(tag) {
            Entry::Occupied(e) => Err(PictureError::DuplicateRealizer(e.key().to_string())),
            Entry::Vacant(e) => {
                e.insert(Realizer {
                    group: group.into(),
                    members,
                });
                Ok(())
            }
        }
    }

    pub fn realizer(&self, tag: &FeatureTag) -> Option<&Realizer> {
        self.realizers.get(tag)
    }

    pub fn members(&self, tag: &FeatureTag) -> Option<&BTreeSet<NeuronId>> {
        self.realizers.get(tag).map(|r| &r.members)
    }

    pub fn tags(&self) -> impl Iterator<Item = &FeatureTag> {
        self.realizers.keys()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&FeatureTag, &Realizer)> {
        self.realizers.iter()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PictureError {
    #[error("picture `{0}` is not in the store")]
    UnknownPicture(PictureId),
    #[error("`{part}` is not a part of picture `{of}`")]
    UnknownPart { part: PictureId, of: PictureId },
    #[error("picture `{0}` has a single neuron; there is nothing to select")]
    NothingToSelect(PictureId),
    #[error("selector matched no part of picture `{0}`")]
    SelectorMatchedNothing(PictureId),
    #[error("feature `{0}` already has a realizing group")]
    DuplicateRealizer(String),
    #[error("observer has no edges into the target; there is no view")]
    NoView,
    #[error(transparent)]
    Substrate(#[from] SubstrateError),
}

/// A picture: members, declared parts (ids of other pictures), feature tags,
/// and the composition history that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Picture {
    pub id: PictureId,
    pub members: BTreeSet<NeuronId>,
    pub parts: Vec<PictureId>,
    pub features: BTreeSet<FeatureTag>,
    pub provenance: Vec<ComposeRecord>,
}

impl Picture {
    /// A picture with no declared parts and no history.
    pub fn leaf(
        id: impl Into<PictureId>,
        members: BTreeSet<NeuronId>,
        features: BTreeSet<FeatureTag>,
    ) -> Self {
        Self {
            id: id.into(),
            members,
            parts: Vec::new(),
            features,
            provenance: Vec::new(),
        }
    }

    /// Names shared between this picture's tags and the given tag set,
    /// regardless of polarity.
    pub fn shared_feature_names<'a>(
        &'a self,
        tags: &'a BTreeSet<FeatureTag>,
    ) -> BTreeSet<&'a str> {
        let mine: BTreeSet<&str> = self.features.iter().map(|t| t.name.as_str()).collect();
        tags.iter()
            .map(|t| t.name.as_str())
            .filter(|n| mine.contains(n))
            .collect()
    }
}

impl From<String> for PictureId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// One composition step in a picture's history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComposeRecord {
    pub left: PictureId,
    pub right: PictureId,
    pub policy: ConflictPolicy,
    /// Feature names that conflicted between the operands.
    pub conflicts: Vec<String>,
}

/// How composition settles a feature that one operand asserts and the other
/// denies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConflictPolicy {
    /// The left operand's reading survives; the right's conflicting subgroup
    /// is inhibited.
    #[default]
    LeftWins,
    /// Mirror image of `LeftWins`.
    RightWins,
    /// Both tags stay; the contradiction lives across the two parts.
    KeepBoth,
}

/// One declared binding connection between the operands of a composition.
#[derive(Debug, Clone, PartialEq)]
pub struct BindingLink {
    pub from: BindingEnd,
    pub to: BindingEnd,
    pub polarity: Polarity,
    pub weight: f64,
}

/// Endpoint of a binding link: a whole part or a bare neuron.
#[derive(Debug, Clone, PartialEq)]
pub enum BindingEnd {
    Part(PictureId),
    Neuron(NeuronId),
}

/// Binding declaration handed to [`compose`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Binding {
    pub links: Vec<BindingLink>,
    pub conflict_policy: ConflictPolicy,
}

impl Binding {
    pub fn empty(policy: ConflictPolicy) -> Self {
        Self {
            links: Vec::new(),
            conflict_policy: policy,
        }
    }
}

/// Store of pictures addressable by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PictureStore {
    pictures: BTreeMap<PictureId, Picture>,
}

impl PictureStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, picture: Picture) {
        self.pictures.insert(picture.id.clone(), picture);
    }

    pub fn get(&self, id: &PictureId) -> Option<&Picture> {
        self.pictures.get(id)
    }

    pub fn require(&self, id: &PictureId) -> Result<&Picture, PictureError> {
        self.get(id)
            .ok_or_else(|| PictureError::UnknownPicture(id.clone()))
    }

    pub fn contains(&self, id: &PictureId) -> bool {
        self.pictures.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &PictureId> {
        self.pictures.keys()
    }

    pub fn pictures(&self) -> impl Iterator<Item = &Picture> {
        self.pictures.values()
    }

    /// Leaf part ids under `id`: the picture itself when it has no parts,
    /// otherwise the union of its parts' leaves, deduplicated, in first-seen
    /// order.
    pub fn leaf_parts(&self, id: &PictureId) -> Result<Vec<PictureId>, PictureError> {
        let picture = self.require(id)?;
        if picture.parts.is_empty() {
            return Ok(vec![id.clone()]);
        }
        let mut seen = BTreeSet::new();
        let mut leaves = Vec::new();
        for part in &picture.parts {
            for leaf in self.leaf_parts(part)? {
                if seen.insert(leaf.clone()) {
                    leaves.push(leaf);
                }
            }
        }
        Ok(leaves)
    }
}

/// Which parts [`decompose`] should return.
#[derive(Debug, Clone, PartialEq)]
pub enum PartSelector {
    /// Every part.
    All,
    /// The part with this id.
    Part(PictureId),
    /// Every part carrying a tag with this feature name, either polarity.
    Feature(String),
}

/// Cuts a picture into parts.
///
/// Declared parts are returned as the standalone pictures they already are.
/// A picture with several members but no declared parts falls back to
/// synthetic single-neuron leaves with empty feature sets, so decomposition
/// never stops above the single-neuron level. A single-neuron picture cannot
/// be cut at all.
pub fn decompose(
    store: &PictureStore,
    picture: &Picture,
    selector: &PartSelector,
) -> Result<Vec<Picture>, PictureError> {
    if picture.members.len() <= 1 {
        return Err(PictureError::NothingToSelect(picture.id.clone()));
    }
    let candidates: Vec<Picture> = if picture.parts.is_empty() {
        picture
            .members
            .iter()
            .map(|&m| Picture {
                id: PictureId::new(format!("{}/{}", picture.id, m)),
                members: BTreeSet::from([m]),
                parts: Vec::new(),
                features: BTreeSet::new(),
                provenance: Vec::new(),
            })
            .collect()
    } else {
        let mut parts = Vec::new();
        for id in &picture.parts {
            parts.push(store.require(id)?.clone());
        }
        parts
    };
    let selected: Vec<Picture> = match selector {
        PartSelector::All => candidates,
        PartSelector::Part(id) => candidates.into_iter().filter(|p| &p.id == id).collect(),
        PartSelector::Feature(name) => candidates
            .into_iter()
            .filter(|p| p.features.iter().any(|t| &t.name == name))
            .collect(),
    };
    if selected.is_empty() {
        return Err(PictureError::SelectorMatchedNothing(picture.id.clone()));
    }
    Ok(selected)
}

/// Composes two pictures into a new one, adding the binding edges to the
/// working graph.
///
/// The result takes the union of members, lists the non-empty operands as
/// its parts, and resolves feature conflicts according to the binding's
/// policy. Under `LeftWins` the right operand's conflicting subgroup gets an
/// inhibitory edge from the left's subgroup strong enough to silence it, and
/// the right's conflicting tags are dropped from the result; `RightWins`
/// mirrors this; `KeepBoth` keeps both tags and adds no inhibition.
pub fn compose(
    graph: &mut NeuronGraph,
    store: &PictureStore,
    features: &FeatureMap,
    left: &Picture,
    right: &Picture,
    binding: &Binding,
) -> Result<Picture, PictureError> {
    for link in &binding.links {
        let sources = resolve_end(store, left, right, &link.from)?;
        let targets = resolve_end(store, right, left, &link.to)?;
        let per_edge = link.weight / sources.len().max(1) as f64;
        for &s in &sources {
            for &t in &targets {
                if s != t {
                    graph.add_synapse(s, t, link.polarity, per_edge, ConnectionKind::Binding)?;
                }
            }
        }
    }

    let conflicts: Vec<String> = left
        .features
        .iter()
        .filter(|tag| right.features.contains(&tag.flipped()))
        .map(|tag| tag.name.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut result_features: BTreeSet<FeatureTag> =
        left.features.union(&right.features).cloned().collect();
    match binding.conflict_policy {
        ConflictPolicy::KeepBoth => {}
        ConflictPolicy::LeftWins => {
            for name in &conflicts {
                let keep = left
                    .features
                    .iter()
                    .find(|t| &t.name == name)
                    .expect("conflicting tag present in left")
                    .clone();
                result_features.retain(|t| &t.name != name);
                result_features.insert(keep.clone());
                suppress(graph, features, left, right, &keep)?;
            }
        }
        ConflictPolicy::RightWins => {
            for name in &conflicts {
                let keep = right
                    .features
                    .iter()
                    .find(|t| &t.name == name)
                    .expect("conflicting tag present in right")
                    .clone();
                result_features.retain(|t| &t.name != name);
                result_features.insert(keep.clone());
                suppress(graph, features, right, left, &keep)?;
            }
        }
    }

    let mut parts = Vec::new();
    if !left.members.is_empty() {
        parts.push(left.id.clone());
    }
    if !right.members.is_empty() {
        parts.push(right.id.clone());
    }
    let mut provenance = left.provenance.clone();
    provenance.push(ComposeRecord {
        left: left.id.clone(),
        right: right.id.clone(),
        policy: binding.conflict_policy,
        conflicts,
    });
    Ok(Picture {
        id: PictureId::new(format!("({}+{})", left.id, right.id)),
        members: left.members.union(&right.members).copied().collect(),
        parts,
        features: result_features,
        provenance,
    })
}

fn resolve_end(
    store: &PictureStore,
    primary: &Picture,
    fallback: &Picture,
    end: &BindingEnd,
) -> Result<Vec<NeuronId>, PictureError> {
    match end {
        BindingEnd::Neuron(id) => {
            if primary.members.contains(id) || fallback.members.contains(id) {
                Ok(vec![*id])
            } else {
                Err(PictureError::UnknownPart {
                    part: PictureId::new(id.to_string()),
                    of: primary.id.clone(),
                })
            }
        }
        BindingEnd::Part(id) => {
            for operand in [primary, fallback] {
                if id == &operand.id {
                    return Ok(operand.members.iter().copied().collect());
                }
                let leaves = match store.leaf_parts(&operand.id) {
                    Ok(leaves) => leaves,
                    Err(PictureError::UnknownPicture(_)) => Vec::new(),
                    Err(other) => return Err(other),
                };
                if leaves.contains(id) || operand.parts.contains(id) {
                    return Ok(store.require(id)?.members.iter().copied().collect());
                }
            }
            Err(PictureError::UnknownPart {
                part: id.clone(),
                of: primary.id.clone(),
            })
        }
    }
}

/// Adds inhibitory edges from the winner's realizing subgroup onto the
/// loser's, heavy enough that the losing subgroup cannot fire while the
/// winning one does. [`enforce_conflicts`] re-checks the guarantee after
/// later compositions pile more drive onto the loser.
fn suppress(
    graph: &mut NeuronGraph,
    features: &FeatureMap,
    winner: &Picture,
    loser: &Picture,
    kept: &FeatureTag,
) -> Result<(), PictureError> {
    let (winner_sub, loser_sub) = conflict_subgroups(features, winner, loser, kept);
    if winner_sub.is_empty() || loser_sub.is_empty() {
        return Ok(());
    }
    for &t in &loser_sub {
        let firing: BTreeSet<NeuronId> = graph.neuron_ids().collect();
        let drive = graph.excitatory_input(t, &firing, &AttentionMask::all_ones());
        let needed = drive + graph.theta();
        let per_edge = needed / winner_sub.len() as f64;
        for &s in &winner_sub {
            if s != t {
                let key = SynapseKey {
                    source: s,
                    target: t,
                    polarity: Polarity::Inhibitory,
                };
                let current = graph.synapse_weight(&key).unwrap_or(0.0);
                if current < per_edge {
                    match graph.synapse_weight(&key) {
                        Some(_) => graph.set_synapse_weight(&key, per_edge)?,
                        None => graph.add_synapse(
                            s,
                            t,
                            Polarity::Inhibitory,
                            per_edge,
                            ConnectionKind::Binding,
                        )?,
                    }
                }
            }
        }
    }
    Ok(())
}

fn conflict_subgroups(
    features: &FeatureMap,
    winner: &Picture,
    loser: &Picture,
    kept: &FeatureTag,
) -> (Vec<NeuronId>, Vec<NeuronId>) {
    let winner_sub = realized_within(features, kept, winner);
    let loser_sub = realized_within(features, &kept.flipped(), loser);
    (winner_sub, loser_sub)
}

fn realized_within(features: &FeatureMap, tag: &FeatureTag, picture: &Picture) -> Vec<NeuronId> {
    match features.members(tag) {
        Some(members) => {
            let inside: Vec<NeuronId> = members
                .intersection(&picture.members)
                .copied()
                .collect();
            if inside.is_empty() {
                members.iter().copied().collect()
            } else {
                inside
            }
        }
        None => Vec::new(),
    }
}

/// Re-applies the suppression guarantee for every conflict recorded in the
/// picture's history, against the graph as it stands now. Call after a chain
/// of compositions, before running the dynamics.
pub fn enforce_conflicts(
    graph: &mut NeuronGraph,
    store: &PictureStore,
    features: &FeatureMap,
    composed: &Picture,
) -> Result<(), PictureError> {
    for record in &composed.provenance {
        if record.conflicts.is_empty() {
            continue;
        }
        let left = store.require(&record.left)?.clone();
        let right = store.require(&record.right)?.clone();
        for name in &record.conflicts {
            let (winner, loser) = match record.policy {
                ConflictPolicy::LeftWins => (&left, &right),
                ConflictPolicy::RightWins => (&right, &left),
                ConflictPolicy::KeepBoth => continue,
            };
            let kept = winner
                .features
                .iter()
                .find(|t| &t.name == name)
                .cloned();
            if let Some(kept) = kept {
                suppress(graph, features, winner, loser, &kept)?;
            }
        }
    }
    Ok(())
}

/// What `observer` sees of `target`: the largest chunk of the target whose
/// every member receives more excitation than inhibition from the observer.
///
/// Returns the target itself when everything is seen, an empty-membered
/// picture when edges exist but nothing survives, and
/// [`PictureError::NoView`] when the observer has no edges into the target
/// at all.
pub fn abstraction_view(
    graph: &NeuronGraph,
    store: &PictureStore,
    features: &FeatureMap,
    observer: &Picture,
    target: &Picture,
) -> Result<Picture, PictureError> {
    let mut pos: BTreeMap<NeuronId, f64> = BTreeMap::new();
    let mut neg: BTreeMap<NeuronId, f64> = BTreeMap::new();
    let mut any_edge = false;
    for syn in graph.synapses() {
        if observer.members.contains(&syn.source) && target.members.contains(&syn.target) {
            any_edge = true;
            match syn.polarity {
                Polarity::Excitatory => *pos.entry(syn.target).or_default() += syn.weight,
                Polarity::Inhibitory => *neg.entry(syn.target).or_default() += syn.weight,
            }
        }
    }
    if !any_edge {
        return Err(PictureError::NoView);
    }
    let seen: BTreeSet<NeuronId> = target
        .members
        .iter()
        .copied()
        .filter(|m| {
            pos.get(m).copied().unwrap_or(0.0) > neg.get(m).copied().unwrap_or(0.0)
        })
        .collect();
    if seen == target.members {
        return Ok(target.clone());
    }
    let parts: Vec<PictureId> = target
        .parts
        .iter()
        .filter(|id| {
            store
                .get(id)
                .map(|p| p.members.is_subset(&seen))
                .unwrap_or(false)
        })
        .cloned()
        .collect();
    let kept_features: BTreeSet<FeatureTag> = target
        .features
        .iter()
        .filter(|tag| {
            features
                .members(tag)
                .map(|m| {
                    let inside: BTreeSet<NeuronId> =
                        m.intersection(&target.members).copied().collect();
                    !inside.is_empty() && inside.is_subset(&seen)
                })
                .unwrap_or(false)
        })
        .cloned()
        .collect();
    Ok(Picture {
        id: PictureId::new(format!("{}@view", target.id)),
        members: seen,
        parts,
        features: kept_features,
        provenance: Vec::new(),
    })
}

/// Builds the mask that attends to the given pictures: their members and the
/// edges among them get gain 1, everything else in the graph gets
/// `off_gain`. `focus(&[], 0.0, ..)` therefore blanks the whole universe.
pub fn focus(
    targets: &[PictureId],
    off_gain: f64,
    store: &PictureStore,
    graph: &NeuronGraph,
) -> Result<AttentionMask, PictureError> {
    let mut attended: BTreeSet<NeuronId> = BTreeSet::new();
    for id in targets {
        attended.extend(store.require(id)?.members.iter().copied());
    }
    let mut mask = AttentionMask::all_ones();
    for id in graph.neuron_ids() {
        let gain = if attended.contains(&id) { 1.0 } else { off_gain };
        mask.set_neuron_gain(id, gain)?;
    }
    for syn in graph.synapses() {
        let inside = attended.contains(&syn.source) && attended.contains(&syn.target);
        let gain = if inside { 1.0 } else { off_gain };
        mask.set_edge_gain(syn.key(), gain)?;
    }
    Ok(mask)
}

/// A pair of parts that stand in mutual inhibition while both are fully
/// visible under the mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Contradiction {
    pub part_a: PictureId,
    pub part_b: PictureId,
}

/// Lists the contradictions inside a picture that the mask leaves visible.
///
/// Two parts contradict when each sends the other at least one inhibitory
/// edge. A part hidden by the mask, meaning any member has neuron gain 0,
/// cannot appear in the report: narrowing attention makes tension
/// invisible rather than resolving it.
pub fn consistency_report(
    store: &PictureStore,
    graph: &NeuronGraph,
    picture: &Picture,
    mask: &AttentionMask,
) -> Result<Vec<Contradiction>, PictureError> {
    let mut parts: Vec<&Picture> = Vec::new();
    for id in &picture.parts {
        parts.push(store.require(id)?);
    }
    let visible = |p: &Picture| p.members.iter().all(|&m| mask.neuron_gain(m) > 0.0);
    let mut report = Vec::new();
    for (i, a) in parts.iter().enumerate() {
        for b in parts.iter().skip(i + 1) {
            if !visible(a) || !visible(b) {
                continue;
            }
            if inhibits(graph, a, b) && inhibits(graph, b, a) {
                report.push(Contradiction {
                    part_a: a.id.clone(),
                    part_b: b.id.clone(),
                });
            }
        }
    }
    Ok(report)
}

fn inhibits(graph: &NeuronGraph, from: &Picture, to: &Picture) -> bool {
    graph.synapses().any(|s| {
        s.polarity == Polarity::Inhibitory
            && from.members.contains(&s.source)
            && to.members.contains(&s.target)
    })
}
