//! Counterfactual evaluation.
//!
//! A conditional "if A then C" is judged against a stock of remembered
//! pictures rather than against a space of worlds. The pipeline: retrieve
//! the pictures the antecedent can reach, drop the ones that contradict the
//! present situation too much, rank the rest by goal satisfaction, compose
//! the winners onto the situation together with a synthetic antecedent
//! picture, run the composed graph with the antecedent clamped, and read
//! the consequent off the settled activity.
//!
//! Composition order matters: conflict resolution favors what is already in
//! place, so two fragment orders can disagree. [`compare_orders`] makes that
//! observable by evaluating every permutation of the plan fragments.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::learning::accessibility;
use crate::pictures::{
    compose, decompose, enforce_conflicts, Binding, BindingEnd, BindingLink, ConflictPolicy,
    FeatureMap, FeatureTag, PartSelector, Picture, PictureError, PictureId, PictureStore,
};
use crate::substrate::{
    group_activation, AttentionMask, NeuronGraph, Polarity, RunStatus, SubstrateError, Trace,
};

/// Most fragments a composition plan may order; permutation counts stay small.
pub const MAX_FRAGMENTS: usize = 5;

/// Weight of each part-to-part binding edge added during evaluation.
pub const BINDING_WEIGHT: f64 = 1.0;

/// Id of the synthetic picture that realizes the antecedent. The leading
/// `~` keeps it out of the namespace declarable in scenario files.
pub const ANTECEDENT_ID: &str = "~antecedent";

/// A weighted preference: pictures asserting the feature score `+weight`,
/// pictures asserting its flip score `-weight`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Goal {
    pub feature: FeatureTag,
    pub weight: f64,
}

/// The conditional under evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Query {
    pub antecedent: BTreeSet<FeatureTag>,
    pub consequent: BTreeSet<FeatureTag>,
}

/// Evaluation knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    /// Most feature conflicts with the situation a picture may have and
    /// still count as applicable.
    pub d_max: u32,
    /// Tick budget for the composed run.
    pub max_ticks: usize,
    /// Fraction of a realizer that must fire for its tag to read as present.
    pub rho: f64,
    /// When nothing is within `d_max`, retry with the smallest distance
    /// actually observed instead of reporting no applicable picture.
    pub min_distance_fallback: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            d_max: 0,
            max_ticks: 64,
            rho: 0.5,
            min_distance_fallback: false,
        }
    }
}

/// One step of a composition plan: a remembered picture, optionally
/// narrowed to a single declared part.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    pub picture: PictureId,
    pub part: Option<PictureId>,
}

/// Everything one evaluation needs. The graph and store are cloned per run,
/// so evaluation never mutates the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub graph: NeuronGraph,
    pub store: PictureStore,
    pub features: FeatureMap,
    pub situation: Picture,
    pub memory: Vec<PictureId>,
    pub goals: Vec<Goal>,
    pub query: Query,
    pub mask: AttentionMask,
    pub plan: Vec<PlanEntry>,
    pub settings: EvalSettings,
}

/// Which fragment order to compose.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderDirective {
    /// Plan order (or ranking order when there is no plan).
    Given,
    /// The nth lexicographic permutation of the fragment list.
    Permutation(usize),
}

/// Overall outcome of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictStatus {
    Holds,
    Fails,
    NoApplicablePicture,
    NonTerminating,
}

/// Why a remembered picture took no part in the verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Exclusion {
    /// No feature overlap with the query and no access path from the
    /// antecedent's realizer.
    Irrelevant,
    /// Every member sits at attention gain zero.
    Hidden,
    /// Too many feature conflicts with the situation.
    TooDistant { distance: u32 },
    /// Applicable, but not among the chosen pictures.
    Outranked { score: f64 },
}

/// One entry of the audit trail a verdict carries.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "step", rename_all = "kebab-case")]
pub enum ExplanationStep {
    Excluded {
        picture: PictureId,
        #[serde(flatten)]
        reason: Exclusion,
    },
    Considered {
        picture: PictureId,
        distance: u32,
        score: f64,
    },
    Chosen {
        pictures: Vec<PictureId>,
    },
    Composed {
        operands: Vec<PictureId>,
    },
    Simulated {
        status: RunStatus,
        ticks: usize,
    },
    GoalChecked {
        picture: PictureId,
        score: f64,
        acceptable: bool,
    },
    ConsequentChecked {
        feature: FeatureTag,
        satisfied: bool,
    },
}

/// Self-contained description of the composed picture a verdict was read
/// from. Detached from the working store so it outlives the evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComposedSummary {
    pub id: PictureId,
    pub members: BTreeSet<crate::substrate::NeuronId>,
    pub leaf_parts: Vec<PictureId>,
    pub features: BTreeSet<FeatureTag>,
}

/// Result of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub chosen: Vec<PictureId>,
    pub outcome_features: BTreeSet<FeatureTag>,
    pub explanation: Vec<ExplanationStep>,
    pub trace: Trace,
    pub composed: Option<ComposedSummary>,
}

/// Verdict of a single fragment order, as reported by [`compare_orders`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderReport {
    pub order: Vec<PictureId>,
    pub status: VerdictStatus,
    pub outcome_features: BTreeSet<FeatureTag>,
}

/// All fragment orders side by side. Orders agree when every one of them
/// produced the same status and outcome features.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderComparison {
    pub orders: Vec<OrderReport>,
    pub agree: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("a plan may compose at most {MAX_FRAGMENTS} fragments; this one has {0}")]
    TooManyFragments(usize),
    #[error("permutation index {index} is out of range for {count} fragments")]
    BadPermutationIndex { index: usize, count: usize },
    #[error("feature `{0}` has no realizing group")]
    MissingRealizer(FeatureTag),
    #[error(transparent)]
    Picture(#[from] PictureError),
    #[error(transparent)]
    Substrate(SubstrateError),
}

/// The nth permutation of `items` in lexicographic position order, or
/// `None` when `index >= items.len()!`.
pub fn nth_permutation<T: Clone>(items: &[T], mut index: usize) -> Option<Vec<T>> {
    let n = items.len();
    let mut block: usize = (1..=n).product();
    if index >= block {
        return None;
    }
    let mut pool: Vec<T> = items.to_vec();
    let mut out = Vec::with_capacity(n);
    for k in (1..=n).rev() {
        block /= k;
        out.push(pool.remove(index / block));
        index %= block;
    }
    Some(out)
}

/// Number of feature names the picture and the situation read in opposite
/// polarity. Each name counts once even if both polarities clash.
pub fn distance(picture: &Picture, situation: &Picture) -> u32 {
    picture
        .features
        .iter()
        .filter(|tag| situation.features.contains(&tag.flipped()))
        .map(|tag| tag.name.as_str())
        .collect::<BTreeSet<_>>()
        .len() as u32
}

/// Goal score of a picture: `+weight` per asserted goal tag, `-weight` per
/// flipped one.
pub fn goal_score(picture: &Picture, goals: &[Goal]) -> f64 {
    let mut score = 0.0;
    for goal in goals {
        if picture.features.contains(&goal.feature) {
            score += goal.weight;
        }
        if picture.features.contains(&goal.feature.flipped()) {
            score -= goal.weight;
        }
    }
    score
}

/// Pictures kept by a pipeline stage, next to the ids it dropped and why.
pub type Retrieval = (Vec<Picture>, Vec<(PictureId, Exclusion)>);

/// Pictures within the distance bound, each with its distance, next to the
/// ids dropped and the distance that disqualified them.
pub type Applicability = (Vec<(Picture, u32)>, Vec<(PictureId, u32)>);

/// Splits memory into retrievable pictures and exclusions. A picture is
/// kept when some feature name overlaps the query's universe, or when the
/// antecedent's realizer reaches it through the graph within the access
/// horizon. Pictures whose every member is masked to gain zero are hidden
/// before either test.
pub fn retrieve(
    store: &PictureStore,
    memory: &[PictureId],
    query: &Query,
    features: &FeatureMap,
    mask: &AttentionMask,
    graph: &NeuronGraph,
) -> Result<Retrieval, EvalError> {
    let universe: BTreeSet<FeatureTag> = query
        .antecedent
        .iter()
        .chain(query.consequent.iter())
        .cloned()
        .collect();
    let cue = antecedent_picture(query, features)?;

    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for id in memory {
        let picture = store.require(id)?;
        let hidden = !picture.members.is_empty()
            && picture
                .members
                .iter()
                .all(|&m| mask.neuron_gain(m) == 0.0);
        if hidden {
            excluded.push((id.clone(), Exclusion::Hidden));
            continue;
        }
        let overlaps = !picture.shared_feature_names(&universe).is_empty();
        let reachable = overlaps || {
            let scored = accessibility(std::slice::from_ref(picture), graph, &cue);
            scored.first().is_some_and(|(_, s)| *s > 0.0)
        };
        if reachable {
            kept.push(picture.clone());
        } else {
            excluded.push((id.clone(), Exclusion::Irrelevant));
        }
    }
    Ok((kept, excluded))
}

/// Splits candidates by feature distance from the situation: pictures at
/// distance `<= d_max` stay (with their distance), the rest are reported
/// with the distance that disqualified them.
pub fn applicability_filter(
    candidates: &[Picture],
    situation: &Picture,
    d_max: u32,
) -> Applicability {
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for picture in candidates {
        let d = distance(picture, situation);
        if d <= d_max {
            kept.push((picture.clone(), d));
        } else {
            rejected.push((picture.id.clone(), d));
        }
    }
    (kept, rejected)
}

/// Ranks applicable pictures by goal score, descending; ties break toward
/// the smaller distance, then the smaller id.
pub fn select(applicable: &[(Picture, u32)], goals: &[Goal]) -> Vec<(PictureId, f64)> {
    let mut ranked: Vec<(&Picture, u32, f64)> = applicable
        .iter()
        .map(|(picture, d)| (picture, *d, goal_score(picture, goals)))
        .collect();
    ranked.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then(a.1.cmp(&b.1))
            .then(a.0.id.cmp(&b.0.id))
    });
    ranked
        .into_iter()
        .map(|(picture, _, score)| (picture.id.clone(), score))
        .collect()
}

fn antecedent_picture(query: &Query, features: &FeatureMap) -> Result<Picture, EvalError> {
    let mut members = BTreeSet::new();
    for tag in &query.antecedent {
        let realizer = features
            .realizer(tag)
            .ok_or_else(|| EvalError::MissingRealizer(tag.clone()))?;
        members.extend(realizer.members.iter().copied());
    }
    Ok(Picture::leaf(
        ANTECEDENT_ID,
        members,
        query.antecedent.clone(),
    ))
}

/// What the selection stage settled on, before any composition.
struct Selection {
    excluded: Vec<(PictureId, Exclusion)>,
    considered: Vec<(PictureId, u32, f64)>,
    chosen: Vec<PictureId>,
    fragments: Vec<Picture>,
}

fn select_fragments(scenario: &Scenario) -> Result<Selection, EvalError> {
    let (candidates, mut excluded) = retrieve(
        &scenario.store,
        &scenario.memory,
        &scenario.query,
        &scenario.features,
        &scenario.mask,
        &scenario.graph,
    )?;

    let (mut applicable, mut rejected) =
        applicability_filter(&candidates, &scenario.situation, scenario.settings.d_max);
    if applicable.is_empty() && scenario.settings.min_distance_fallback {
        if let Some(&(_, min_d)) = rejected.iter().min_by_key(|(_, d)| *d) {
            let relaxed = applicability_filter(&candidates, &scenario.situation, min_d);
            applicable = relaxed.0;
            rejected = relaxed.1;
        }
    }
    for (id, d) in rejected {
        excluded.push((id, Exclusion::TooDistant { distance: d }));
    }

    let ranking = select(&applicable, &scenario.goals);
    let distances: BTreeMap<&PictureId, u32> =
        applicable.iter().map(|(p, d)| (&p.id, *d)).collect();
    let considered: Vec<(PictureId, u32, f64)> = ranking
        .iter()
        .map(|(id, score)| (id.clone(), distances[id], *score))
        .collect();

    let mut chosen: Vec<PictureId> = Vec::new();
    let mut fragments = Vec::new();
    if scenario.plan.is_empty() {
        if let Some((id, _)) = ranking.first() {
            chosen.push(id.clone());
            fragments.push(scenario.store.require(id)?.clone());
        }
    } else {
        for entry in &scenario.plan {
            if !ranking.iter().any(|(id, _)| id == &entry.picture) {
                continue;
            }
            let fragment = match &entry.part {
                None => scenario.store.require(&entry.picture)?.clone(),
                Some(part) => {
                    let whole = scenario.store.require(&entry.picture)?;
                    let selector = PartSelector::Part(part.clone());
                    let mut parts = decompose(&scenario.store, whole, &selector)?;
                    parts.swap_remove(0)
                }
            };
            if !chosen.contains(&entry.picture) {
                chosen.push(entry.picture.clone());
            }
            fragments.push(fragment);
        }
    }

    for (id, score) in &ranking {
        if !chosen.contains(id) {
            excluded.push((id.clone(), Exclusion::Outranked { score: *score }));
        }
    }

    Ok(Selection {
        excluded,
        considered,
        chosen,
        fragments,
    })
}

/// Composes `right` onto `left`, binding every leaf part of one to every
/// leaf part of the other with mutual excitatory edges, and stores the
/// result so later steps can see its parts.
fn compose_step(
    graph: &mut NeuronGraph,
    store: &mut PictureStore,
    features: &FeatureMap,
    left: &Picture,
    right: &Picture,
) -> Result<Picture, EvalError> {
    let left_leaves = store.leaf_parts(&left.id)?;
    let right_leaves = store.leaf_parts(&right.id)?;
    let mut links = Vec::new();
    for l in &left_leaves {
        for r in &right_leaves {
            if l == r {
                continue;
            }
            links.push(BindingLink {
                from: BindingEnd::Part(l.clone()),
                to: BindingEnd::Part(r.clone()),
                polarity: Polarity::Excitatory,
                weight: BINDING_WEIGHT,
            });
            links.push(BindingLink {
                from: BindingEnd::Part(r.clone()),
                to: BindingEnd::Part(l.clone()),
                polarity: Polarity::Excitatory,
                weight: BINDING_WEIGHT,
            });
        }
    }
    let binding = Binding {
        links,
        conflict_policy: ConflictPolicy::LeftWins,
    };
    let composed = compose(graph, store, features, left, right, &binding)?;
    store.insert(composed.clone());
    Ok(composed)
}

/// Evaluates the scenario's query and returns the verdict with its full
/// audit trail. The scenario itself is left untouched.
pub fn evaluate(scenario: &Scenario, order: &OrderDirective) -> Result<Verdict, EvalError> {
    let selection = select_fragments(scenario)?;
    let mut explanation: Vec<ExplanationStep> = Vec::new();
    for (picture, reason) in &selection.excluded {
        explanation.push(ExplanationStep::Excluded {
            picture: picture.clone(),
            reason: reason.clone(),
        });
    }
    for (picture, d, score) in &selection.considered {
        explanation.push(ExplanationStep::Considered {
            picture: picture.clone(),
            distance: *d,
            score: *score,
        });
    }

    if selection.fragments.is_empty() {
        return Ok(Verdict {
            status: VerdictStatus::NoApplicablePicture,
            chosen: Vec::new(),
            outcome_features: BTreeSet::new(),
            explanation,
            trace: Trace::empty(),
            composed: None,
        });
    }

    if selection.fragments.len() > MAX_FRAGMENTS {
        return Err(EvalError::TooManyFragments(selection.fragments.len()));
    }
    let ordered = match order {
        OrderDirective::Given => selection.fragments.clone(),
        OrderDirective::Permutation(k) => nth_permutation(&selection.fragments, *k).ok_or(
            EvalError::BadPermutationIndex {
                index: *k,
                count: selection.fragments.len(),
            },
        )?,
    };

    explanation.push(ExplanationStep::Chosen {
        pictures: selection.chosen.clone(),
    });

    let mut graph = scenario.graph.clone();
    let mut store = scenario.store.clone();
    let antecedent = antecedent_picture(&scenario.query, &scenario.features)?;
    store.insert(scenario.situation.clone());
    store.insert(antecedent.clone());

    let mut operands = vec![scenario.situation.id.clone(), antecedent.id.clone()];
    let mut acc = compose_step(
        &mut graph,
        &mut store,
        &scenario.features,
        &scenario.situation,
        &antecedent,
    )?;
    for fragment in &ordered {
        store.insert(fragment.clone());
        operands.push(fragment.id.clone());
        acc = compose_step(&mut graph, &mut store, &scenario.features, &acc, fragment)?;
    }
    enforce_conflicts(&mut graph, &store, &scenario.features, &acc)?;
    explanation.push(ExplanationStep::Composed { operands });

    let trace = graph.run(&antecedent.members, &scenario.mask, scenario.settings.max_ticks);
    let ticks = trace.snapshots().len().saturating_sub(1);
    explanation.push(ExplanationStep::Simulated {
        status: trace.status(),
        ticks,
    });

    let firing = trace.final_firing();
    let mut outcome_features = BTreeSet::new();
    for (tag, realizer) in scenario.features.entries() {
        let members: Vec<_> = realizer.members.iter().copied().collect();
        let active = group_activation(&firing, &members, scenario.settings.rho)
            .map_err(EvalError::Substrate)?;
        if active {
            outcome_features.insert(tag.clone());
        }
    }

    let composed = Some(ComposedSummary {
        id: acc.id.clone(),
        members: acc.members.clone(),
        leaf_parts: store.leaf_parts(&acc.id)?,
        features: acc.features.clone(),
    });

    let status = match trace.status() {
        RunStatus::Cycle | RunStatus::TickBudgetExhausted => VerdictStatus::NonTerminating,
        RunStatus::Fixpoint => {
            let mut goals_ok = true;
            for (id, _, score) in selection
                .considered
                .iter()
                .filter(|(id, _, _)| selection.chosen.contains(id))
            {
                let acceptable = *score >= 0.0;
                goals_ok &= acceptable;
                explanation.push(ExplanationStep::GoalChecked {
                    picture: id.clone(),
                    score: *score,
                    acceptable,
                });
            }
            let mut consequent_ok = true;
            for tag in &scenario.query.consequent {
                let asserted_active = outcome_features.contains(tag);
                let flip = tag.flipped();
                let flip_inactive = scenario.features.realizer(&flip).is_none()
                    || !outcome_features.contains(&flip);
                let satisfied = asserted_active && flip_inactive;
                consequent_ok &= satisfied;
                explanation.push(ExplanationStep::ConsequentChecked {
                    feature: tag.clone(),
                    satisfied,
                });
            }
            if goals_ok && consequent_ok {
                VerdictStatus::Holds
            } else {
                VerdictStatus::Fails
            }
        }
    };

    Ok(Verdict {
        status,
        chosen: selection.chosen,
        outcome_features,
        explanation,
        trace,
        composed,
    })
}

/// Evaluates every permutation of the plan fragments and reports whether
/// they all land on the same status and outcome.
pub fn compare_orders(scenario: &Scenario) -> Result<OrderComparison, EvalError> {
    let selection = select_fragments(scenario)?;
    let n = selection.fragments.len();
    if n > MAX_FRAGMENTS {
        return Err(EvalError::TooManyFragments(n));
    }
    let total: usize = (1..=n).product();
    let mut orders = Vec::with_capacity(total);
    for k in 0..total {
        let permuted = nth_permutation(&selection.fragments, k).expect("k < n!");
        let verdict = evaluate(scenario, &OrderDirective::Permutation(k))?;
        orders.push(OrderReport {
            order: permuted.iter().map(|f| f.id.clone()).collect(),
            status: verdict.status,
            outcome_features: verdict.outcome_features,
        });
    }
    let agree = orders
        .windows(2)
        .all(|w| w[0].status == w[1].status && w[0].outcome_features == w[1].outcome_features);
    Ok(OrderComparison { orders, agree })
}
