//! Weight plasticity: co-activation strengthening, use-strengthening, and
//! the accessibility ranking they shape.
//!
//! All updates are additive with a cap and never weaken anything; a
//! connection is not consumed by use. Updates are functional: each operation
//! returns a new graph and leaves its input untouched, so callers decide the
//! order episodes apply in.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::paths::{effective_signal, Path};
use crate::pictures::Picture;
use crate::substrate::{ConnectionKind, NeuronGraph, NeuronId, Polarity, SubstrateError};

/// Path-length horizon used when scoring accessibility.
const ACCESS_HORIZON: usize = 8;

/// One co-activation or use event: which groups were active together, which
/// paths carried signal, and for how many ticks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Episode {
    pub co_active_groups: BTreeSet<String>,
    pub used_paths: Vec<Path>,
    pub duration: u32,
}

impl Episode {
    pub fn co_active<I, S>(groups: I, duration: u32) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            co_active_groups: groups.into_iter().map(Into::into).collect(),
            used_paths: Vec::new(),
            duration,
        }
    }
}

/// Magnitudes of the plasticity rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlasticityConfig {
    /// Learning rate of the co-activation rule.
    pub eta: f64,
    /// No weight ever exceeds this.
    pub w_max: f64,
    /// Increment applied to used groups and paths.
    pub use_rate: f64,
}

impl Default for PlasticityConfig {
    fn default() -> Self {
        Self {
            eta: 0.5,
            w_max: 10.0,
            use_rate: 0.1,
        }
    }
}

impl PlasticityConfig {
    pub fn validate(&self) -> Result<(), LearningError> {
        // NaN fails every comparison below, so it is rejected too.
        if self.eta.is_nan() || self.eta <= 0.0 {
            return Err(LearningError::BadConfig("eta must be positive"));
        }
        if self.use_rate.is_nan() || self.use_rate <= 0.0 {
            return Err(LearningError::BadConfig("use_rate must be positive"));
        }
        if self.w_max.is_nan() || self.w_max < 1.0 {
            return Err(LearningError::BadConfig("w_max must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LearningError {
    #[error("group `{0}` is not in the graph")]
    UnknownGroup(String),
    #[error("episode names no groups and no paths")]
    EmptyEpisode,
    #[error("episode duration must be at least one tick")]
    ZeroDuration,
    #[error("used path contains an edge missing from the graph")]
    UnknownPathEdge,
    #[error("invalid plasticity config: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    Substrate(#[from] SubstrateError),
}

/// Raises a weight additively without exceeding the cap and without ever
/// lowering it.
fn raise(weight: f64, increment: f64, w_max: f64) -> f64 {
    if weight >= w_max {
        weight
    } else {
        (weight + increment).min(w_max)
    }
}

/// Co-activation strengthening.
///
/// For every ordered pair of distinct co-active groups, every excitatory
/// synapse from the first group into the second gains `eta * duration`,
/// capped at `w_max`. A pair with no such synapse gets a fresh one between
/// the groups' representative members (the lowest neuron id of each).
/// Inhibitory weights are untouched. Returns the updated graph; the input is
/// not modified.
pub fn delta_update(
    graph: &NeuronGraph,
    episode: &Episode,
    cfg: &PlasticityConfig,
) -> Result<NeuronGraph, LearningError> {
    cfg.validate()?;
    if episode.duration == 0 {
        return Err(LearningError::ZeroDuration);
    }
    if episode.co_active_groups.is_empty() {
        return Err(LearningError::EmptyEpisode);
    }
    let mut members = Vec::new();
    for name in &episode.co_active_groups {
        let ms = graph
            .group_members(name)
            .ok_or_else(|| LearningError::UnknownGroup(name.clone()))?;
        members.push((name.clone(), ms.to_vec()));
    }
    let increment = cfg.eta * episode.duration as f64;
    let mut out = graph.clone();
    for (i, (_, g1)) in members.iter().enumerate() {
        for (j, (_, g2)) in members.iter().enumerate() {
            if i == j {
                continue;
            }
            let src: BTreeSet<NeuronId> = g1.iter().copied().collect();
            let dst: BTreeSet<NeuronId> = g2.iter().copied().collect();
            let keys: Vec<_> = graph
                .synapses()
                .filter(|s| {
                    s.polarity == Polarity::Excitatory
                        && src.contains(&s.source)
                        && dst.contains(&s.target)
                })
                .map(|s| s.key())
                .collect();
            if keys.is_empty() {
                let rep1 = *g1.iter().min().expect("groups are non-empty");
                let rep2 = *g2.iter().min().expect("groups are non-empty");
                if rep1 != rep2 {
                    out.add_synapse(
                        rep1,
                        rep2,
                        Polarity::Excitatory,
                        increment.min(cfg.w_max),
                        ConnectionKind::Association,
                    )?;
                }
            } else {
                for key in keys {
                    let old = out.synapse_weight(&key).expect("key taken from graph");
                    out.set_synapse_weight(&key, raise(old, increment, cfg.w_max))?;
                }
            }
        }
    }
    Ok(out)
}

/// Use-strengthening.
///
/// Internal excitatory edges of each used group and every edge along each
/// used path gain `use_rate`, capped at `w_max`. Using a connection never
/// weakens it. Returns the updated graph; the input is not modified.
pub fn use_strengthen(
    graph: &NeuronGraph,
    used: &Episode,
    cfg: &PlasticityConfig,
) -> Result<NeuronGraph, LearningError> {
    cfg.validate()?;
    if used.co_active_groups.is_empty() && used.used_paths.is_empty() {
        return Err(LearningError::EmptyEpisode);
    }
    let mut out = graph.clone();
    for name in &used.co_active_groups {
        let members: BTreeSet<NeuronId> = graph
            .group_members(name)
            .ok_or_else(|| LearningError::UnknownGroup(name.clone()))?
            .iter()
            .copied()
            .collect();
        let keys: Vec<_> = graph
            .synapses()
            .filter(|s| {
                s.polarity == Polarity::Excitatory
                    && members.contains(&s.source)
                    && members.contains(&s.target)
            })
            .map(|s| s.key())
            .collect();
        for key in keys {
            let old = out.synapse_weight(&key).expect("key taken from graph");
            out.set_synapse_weight(&key, raise(old, cfg.use_rate, cfg.w_max))?;
        }
    }
    for path in &used.used_paths {
        for edge in &path.edges {
            let key = crate::substrate::SynapseKey {
                source: edge.source,
                target: edge.target,
                polarity: edge.polarity,
            };
            let old = out
                .synapse_weight(&key)
                .ok_or(LearningError::UnknownPathEdge)?;
            out.set_synapse_weight(&key, raise(old, cfg.use_rate, cfg.w_max))?;
        }
    }
    Ok(out)
}

/// Ranks the pictures in memory by how much signal the cue sends them.
///
/// A picture's score is the effective signal total from the cue's members to
/// its members; a picture sharing members with the cue is already partly
/// active and scores infinite. Result is sorted by descending score with
/// ties broken by ascending picture id.
pub fn accessibility(
    memory: &[Picture],
    graph: &NeuronGraph,
    cue: &Picture,
) -> Vec<(Picture, f64)> {
    let mut scored: Vec<(Picture, f64)> = memory
        .iter()
        .map(|pic| {
            let score = if cue.members.is_empty() || pic.members.is_empty() {
                0.0
            } else if !cue.members.is_disjoint(&pic.members) {
                f64::INFINITY
            } else {
                effective_signal(graph, &cue.members, &pic.members, ACCESS_HORIZON)
                    .map(|report| report.total)
                    .unwrap_or(0.0)
            };
            (pic.clone(), score)
        })
        .collect();
    scored.sort_by(|(pa, sa), (pb, sb)| sb.total_cmp(sa).then_with(|| pa.id.cmp(&pb.id)));
    scored
}

/// Number of identical co-activation episodes needed before weight `w0`
/// reaches `theta`, under rate `eta` and the given duration. Zero when the
/// weight is already there.
pub fn episodes_to_association(theta: f64, w0: f64, eta: f64, duration: u32) -> u32 {
    if w0 >= theta {
        return 0;
    }
    let per_episode = eta * duration as f64;
    // The small slack keeps exactly-divisible gaps from rounding up when the
    // quotient lands a hair above an integer.
    ((theta - w0) / per_episode - 1e-9).ceil().max(0.0) as u32
}
