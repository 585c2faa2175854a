//! Scenario documents: the text format, its parser and canonical
//! serializer, the bridge to an executable [`Scenario`], and the verdict
//! emitters the command line prints.
//!
//! A document is declarative and order-free except for the compose plan,
//! whose entry order is the composition order. The canonical serialization
//! sorts declarations by kind and id, so formatting a document twice, or
//! formatting what was parsed from formatted output, is byte-stable.

mod lexer;
mod parser;

pub use parser::{parse, MAX_DIAGNOSTICS};

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::counterfactual::{
    EvalSettings, Goal, OrderComparison, PlanEntry, Query, Scenario, Verdict,
};
use crate::learning::Episode;
use crate::pictures::{
    focus, FeatureMap, FeatureTag, Picture, PictureError, PictureId, PictureStore,
};
use crate::substrate::{
    build_graph, AttentionMask, BuildConfig, ConnectionKind, GroupSpec, LinkSpec, NeuronGraph,
    NeuronId, Polarity, RunStatus, SubstrateError,
};

/// What went wrong in a diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Syntax,
    UnknownReference,
    DuplicateId,
    Range,
    Arity,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorKind::Syntax => "syntax",
            ErrorKind::UnknownReference => "unknown-reference",
            ErrorKind::DuplicateId => "duplicate-id",
            ErrorKind::Range => "range",
            ErrorKind::Arity => "arity",
        };
        f.write_str(s)
    }
}

/// A diagnostic pointing at the offending token.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub kind: ErrorKind,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {}: {}",
            self.line, self.column, self.kind, self.message
        )
    }
}

/// Source position of a token, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

/// An identifier occurrence that refers to something declared elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Ref {
    pub name: String,
    pub span: Span,
}

/// A feature tag occurrence with its position.
#[derive(Debug, Clone, PartialEq)]
pub struct SpannedTag {
    pub tag: FeatureTag,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupDecl {
    pub name: String,
    pub size: usize,
    pub features: Vec<FeatureTag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkDecl {
    pub source: Ref,
    pub target: Ref,
    pub polarity: Polarity,
    pub weight: f64,
    pub kind: ConnectionKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PictureDecl {
    pub id: String,
    pub parts: Vec<Ref>,
    /// Features declared on the picture itself, beyond what its parts carry.
    pub features: Vec<FeatureTag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SituationDecl {
    pub case: Option<String>,
    pub features: Vec<SpannedTag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalDecl {
    pub feature: SpannedTag,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryDecl {
    pub antecedent: Vec<SpannedTag>,
    pub consequent: Vec<SpannedTag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionDecl {
    pub focus: Vec<Ref>,
    pub off_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntryDecl {
    pub picture: Ref,
    pub part: Option<Ref>,
}

/// A parsed, validated scenario document.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDoc {
    pub name: String,
    pub groups: Vec<GroupDecl>,
    pub links: Vec<LinkDecl>,
    pub pictures: Vec<PictureDecl>,
    pub situations: Vec<SituationDecl>,
    pub goals: Vec<GoalDecl>,
    pub query: Option<QueryDecl>,
    pub attention: Option<AttentionDecl>,
    pub plan: Vec<PlanEntryDecl>,
}

#[derive(Debug, Error, PartialEq)]
pub enum BuildError {
    #[error("no situation is declared with case `{0}`")]
    UnknownCase(String),
    #[error("several situations are declared; select one with a case id")]
    AmbiguousCase,
    #[error("the document declares no query")]
    MissingQuery,
    #[error("feature `{0}` has no realizing group")]
    MissingRealizer(FeatureTag),
    #[error(transparent)]
    Substrate(#[from] SubstrateError),
    #[error(transparent)]
    Picture(#[from] PictureError),
}

impl ScenarioDoc {
    pub(crate) fn empty() -> Self {
        Self {
            name: String::new(),
            groups: Vec::new(),
            links: Vec::new(),
            pictures: Vec::new(),
            situations: Vec::new(),
            goals: Vec::new(),
            query: None,
            attention: None,
            plan: Vec::new(),
        }
    }

    /// Case ids of the declared situations, in declaration order.
    pub fn cases(&self) -> Vec<Option<&str>> {
        self.situations.iter().map(|s| s.case.as_deref()).collect()
    }

    /// Expands the group and link declarations into a neuron graph.
    pub fn graph(&self, config: &BuildConfig) -> Result<NeuronGraph, SubstrateError> {
        let groups: Vec<GroupSpec> = self
            .groups
            .iter()
            .map(|g| GroupSpec::new(g.name.clone(), g.size))
            .collect();
        let links: Vec<LinkSpec> = self
            .links
            .iter()
            .map(|l| LinkSpec {
                source: l.source.name.clone(),
                target: l.target.name.clone(),
                polarity: l.polarity,
                weight: l.weight,
                kind: l.kind,
            })
            .collect();
        build_graph(&groups, &links, config)
    }

    /// Builds the executable scenario for one situation case with the
    /// default graph expansion.
    pub fn scenario(&self, case: Option<&str>) -> Result<Scenario, BuildError> {
        self.scenario_with(case, &BuildConfig::default())
    }

    /// Builds the executable scenario for one situation case.
    ///
    /// Without a case id: zero declared situations yield the empty
    /// situation, exactly one is used as is, several are an error.
    pub fn scenario_with(
        &self,
        case: Option<&str>,
        config: &BuildConfig,
    ) -> Result<Scenario, BuildError> {
        let query_decl = self.query.as_ref().ok_or(BuildError::MissingQuery)?;
        let graph = self.graph(config)?;

        let members_of = |name: &str| -> BTreeSet<NeuronId> {
            graph
                .group_members(name)
                .map(|m| m.iter().copied().collect())
                .unwrap_or_default()
        };

        let mut features = FeatureMap::new();
        let mut store = PictureStore::new();
        for group in &self.groups {
            let members = members_of(&group.name);
            for tag in &group.features {
                features.insert(tag.clone(), group.name.clone(), members.clone())?;
            }
            store.insert(Picture::leaf(
                group.name.clone(),
                members,
                group.features.iter().cloned().collect(),
            ));
        }

        let mut pending: Vec<&PictureDecl> = self.pictures.iter().collect();
        while !pending.is_empty() {
            let before = pending.len();
            pending.retain(|decl| {
                let ready = decl
                    .parts
                    .iter()
                    .all(|p| store.contains(&PictureId::new(p.name.clone())));
                if ready {
                    let mut members = BTreeSet::new();
                    let mut tags: BTreeSet<FeatureTag> = decl.features.iter().cloned().collect();
                    for part in &decl.parts {
                        let leaf = store
                            .get(&PictureId::new(part.name.clone()))
                            .expect("part resolved");
                        members.extend(leaf.members.iter().copied());
                        tags.extend(leaf.features.iter().cloned());
                    }
                    store.insert(Picture {
                        id: PictureId::new(decl.id.clone()),
                        members,
                        parts: decl
                            .parts
                            .iter()
                            .map(|p| PictureId::new(p.name.clone()))
                            .collect(),
                        features: tags,
                        provenance: Vec::new(),
                    });
                }
                !ready
            });
            if pending.len() == before {
                // Validation rejects cycles; reaching this means the doc was
                // built by hand. Surface it as an unresolvable reference.
                return Err(BuildError::Picture(PictureError::UnknownPicture(
                    PictureId::new(pending[0].id.clone()),
                )));
            }
        }

        let situation_decl = match case {
            Some(wanted) => Some(
                self.situations
                    .iter()
                    .find(|s| s.case.as_deref() == Some(wanted))
                    .ok_or_else(|| BuildError::UnknownCase(wanted.to_string()))?,
            ),
            None => match self.situations.len() {
                0 => None,
                1 => Some(&self.situations[0]),
                _ => return Err(BuildError::AmbiguousCase),
            },
        };
        let situation = match situation_decl {
            None => Picture::leaf("situation", BTreeSet::new(), BTreeSet::new()),
            Some(decl) => {
                let tags: BTreeSet<FeatureTag> =
                    decl.features.iter().map(|s| s.tag.clone()).collect();
                let mut parts: Vec<PictureId> = Vec::new();
                let mut members = BTreeSet::new();
                for tag in &tags {
                    let realizer = features
                        .realizer(tag)
                        .ok_or_else(|| BuildError::MissingRealizer(tag.clone()))?;
                    let part = PictureId::new(realizer.group.clone());
                    if !parts.contains(&part) {
                        parts.push(part);
                    }
                    members.extend(realizer.members.iter().copied());
                }
                let id = match &decl.case {
                    Some(c) => format!("situation#{c}"),
                    None => "situation".to_string(),
                };
                Picture {
                    id: PictureId::new(id),
                    members,
                    parts,
                    features: tags,
                    provenance: Vec::new(),
                }
            }
        };
        store.insert(situation.clone());

        let mask = match &self.attention {
            None => AttentionMask::all_ones(),
            Some(decl) => {
                let targets: Vec<PictureId> = decl
                    .focus
                    .iter()
                    .map(|r| PictureId::new(r.name.clone()))
                    .collect();
                focus(&targets, decl.off_gain, &store, &graph)?
            }
        };

        Ok(Scenario {
            graph,
            store,
            features,
            situation,
            memory: self
                .pictures
                .iter()
                .map(|p| PictureId::new(p.id.clone()))
                .collect(),
            goals: self
                .goals
                .iter()
                .map(|g| Goal {
                    feature: g.feature.tag.clone(),
                    weight: g.weight,
                })
                .collect(),
            query: Query {
                antecedent: query_decl
                    .antecedent
                    .iter()
                    .map(|s| s.tag.clone())
                    .collect(),
                consequent: query_decl
                    .consequent
                    .iter()
                    .map(|s| s.tag.clone())
                    .collect(),
            },
            mask,
            plan: self
                .plan
                .iter()
                .map(|e| PlanEntry {
                    picture: PictureId::new(e.picture.name.clone()),
                    part: e.part.as_ref().map(|p| PictureId::new(p.name.clone())),
                })
                .collect(),
            settings: EvalSettings::default(),
        })
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn fmt_feature_list(tags: &mut [FeatureTag]) -> String {
    tags.sort();
    let parts: Vec<String> = tags.iter().map(|t| t.to_string()).collect();
    parts.join(", ")
}

/// Canonical text of a document: declarations sorted by kind then id, one
/// per line, kinds separated by blank lines. Parsing the output yields a
/// document that serializes to the same bytes.
pub fn serialize(doc: &ScenarioDoc) -> String {
    let mut sections: Vec<Vec<String>> = Vec::new();

    sections.push(vec![format!("scenario \"{}\"", doc.name)]);

    let mut groups = doc.groups.clone();
    groups.sort_by(|a, b| a.name.cmp(&b.name));
    if !groups.is_empty() {
        sections.push(
            groups
                .iter()
                .map(|g| {
                    let mut line = format!("group {}", g.name);
                    if g.size != 1 {
                        line.push_str(&format!(" size {}", g.size));
                    }
                    if !g.features.is_empty() {
                        let mut tags = g.features.clone();
                        line.push_str(&format!(" feature {}", fmt_feature_list(&mut tags)));
                    }
                    line
                })
                .collect(),
        );
    }

    let mut links = doc.links.clone();
    links.sort_by(|a, b| {
        (&a.source.name, &a.target.name, a.polarity == Polarity::Inhibitory)
            .cmp(&(&b.source.name, &b.target.name, b.polarity == Polarity::Inhibitory))
            .then(a.weight.total_cmp(&b.weight))
    });
    if !links.is_empty() {
        sections.push(
            links
                .iter()
                .map(|l| {
                    let arrow = match l.polarity {
                        Polarity::Excitatory => "->",
                        Polarity::Inhibitory => "-|",
                    };
                    let mut line = format!(
                        "link {} {} {} : {}",
                        l.source.name,
                        arrow,
                        l.target.name,
                        fmt_num(l.weight)
                    );
                    if l.kind != ConnectionKind::Association {
                        let kind = match l.kind {
                            ConnectionKind::Association => unreachable!(),
                            ConnectionKind::Inference => "inference",
                            ConnectionKind::Kinship => "kinship",
                            ConnectionKind::Development => "development",
                            ConnectionKind::Binding => "binding",
                        };
                        line.push_str(&format!(" kind {kind}"));
                    }
                    line
                })
                .collect(),
        );
    }

    let mut pictures = doc.pictures.clone();
    pictures.sort_by(|a, b| a.id.cmp(&b.id));
    if !pictures.is_empty() {
        sections.push(
            pictures
                .iter()
                .map(|p| {
                    let mut parts: Vec<&str> =
                        p.parts.iter().map(|r| r.name.as_str()).collect();
                    parts.sort_unstable();
                    let mut line = format!("picture {} {{ parts: {}", p.id, parts.join(", "));
                    if !p.features.is_empty() {
                        let mut tags = p.features.clone();
                        line.push_str(&format!(" features: {}", fmt_feature_list(&mut tags)));
                    }
                    line.push_str(" }");
                    line
                })
                .collect(),
        );
    }

    let mut situations = doc.situations.clone();
    situations.sort_by(|a, b| a.case.cmp(&b.case));
    if !situations.is_empty() {
        sections.push(
            situations
                .iter()
                .map(|s| {
                    let mut tags: Vec<FeatureTag> =
                        s.features.iter().map(|t| t.tag.clone()).collect();
                    let list = fmt_feature_list(&mut tags);
                    match &s.case {
                        Some(c) => format!("situation case {c} {{ {list} }}"),
                        None => format!("situation {{ {list} }}"),
                    }
                })
                .collect(),
        );
    }

    let mut goals = doc.goals.clone();
    goals.sort_by(|a, b| {
        a.feature
            .tag
            .cmp(&b.feature.tag)
            .then(a.weight.total_cmp(&b.weight))
    });
    if !goals.is_empty() {
        sections.push(
            goals
                .iter()
                .map(|g| format!("goal {} weight {}", g.feature.tag, fmt_num(g.weight)))
                .collect(),
        );
    }

    if let Some(query) = &doc.query {
        let mut antecedent: Vec<FeatureTag> =
            query.antecedent.iter().map(|t| t.tag.clone()).collect();
        let mut consequent: Vec<FeatureTag> =
            query.consequent.iter().map(|t| t.tag.clone()).collect();
        sections.push(vec![format!(
            "query if {} then {}",
            fmt_feature_list(&mut antecedent),
            fmt_feature_list(&mut consequent)
        )]);
    }

    if let Some(attention) = &doc.attention {
        let mut focus: Vec<&str> = attention.focus.iter().map(|r| r.name.as_str()).collect();
        focus.sort_unstable();
        let mut line = format!("attention focus {{ {} }}", focus.join(", "));
        if attention.off_gain != 0.0 {
            line.push_str(&format!(" off-gain {}", fmt_num(attention.off_gain)));
        }
        sections.push(vec![line]);
    }

    if !doc.plan.is_empty() {
        let entries: Vec<String> = doc
            .plan
            .iter()
            .map(|e| match &e.part {
                Some(part) => format!("{}.{}", e.picture.name, part.name),
                None => e.picture.name.clone(),
            })
            .collect();
        sections.push(vec![format!("compose {}", entries.join(", "))]);
    }

    let mut out = String::new();
    for (i, section) in sections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for line in section {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

#[derive(Serialize)]
struct RunView<'a> {
    status: RunStatus,
    ticks: &'a [BTreeSet<NeuronId>],
}

#[derive(Serialize)]
struct TraceDoc<'a> {
    status: crate::counterfactual::VerdictStatus,
    chosen: &'a [PictureId],
    outcome_features: &'a BTreeSet<FeatureTag>,
    explanation: &'a [crate::counterfactual::ExplanationStep],
    trace: RunView<'a>,
}

/// The verdict as a JSON document: status, chosen pictures, sorted outcome
/// features, the explanation steps in order, and the tick-by-tick firing
/// sets. Equal verdicts produce identical bytes.
pub fn emit_trace(verdict: &Verdict) -> String {
    let doc = TraceDoc {
        status: verdict.status,
        chosen: &verdict.chosen,
        outcome_features: &verdict.outcome_features,
        explanation: &verdict.explanation,
        trace: RunView {
            status: verdict.trace.status(),
            ticks: verdict.trace.snapshots(),
        },
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("verdict serializes");
    out.push('\n');
    out
}

/// The order comparison as a JSON document, byte-deterministic.
pub fn emit_comparison(comparison: &OrderComparison) -> String {
    let mut out = serde_json::to_string_pretty(comparison).expect("comparison serializes");
    out.push('\n');
    out
}

/// Parses an episode file: one `co-active: a, b [duration N]` per line,
/// blank lines and `#` comments ignored.
pub fn parse_episodes(text: &str) -> Result<Vec<Episode>, Vec<ParseError>> {
    let mut episodes = Vec::new();
    let mut errors = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx as u32 + 1;
        let body = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if body.trim().is_empty() {
            continue;
        }
        let indent = (body.len() - body.trim_start().len()) as u32 + 1;
        let syntax = |message: String| ParseError {
            line: line_no,
            column: indent,
            kind: ErrorKind::Syntax,
            message,
        };
        let trimmed = body.trim();
        let Some(rest) = trimmed.strip_prefix("co-active") else {
            errors.push(syntax(format!("expected `co-active:`, found `{trimmed}`")));
            continue;
        };
        let Some(rest) = rest.trim_start().strip_prefix(':') else {
            errors.push(syntax("expected `:` after `co-active`".to_string()));
            continue;
        };
        let mut groups: BTreeSet<String> = BTreeSet::new();
        let mut duration = 1u32;
        let mut bad = false;
        let chunks: Vec<&str> = rest.split(',').collect();
        let last = chunks.len() - 1;
        for (i, chunk) in chunks.iter().enumerate() {
            let words: Vec<&str> = chunk.split_whitespace().collect();
            match words.as_slice() {
                [id] => {
                    groups.insert((*id).to_string());
                }
                [id, "duration", n] if i == last => {
                    groups.insert((*id).to_string());
                    match n.parse::<u32>() {
                        Ok(d) if d > 0 => duration = d,
                        _ => {
                            errors.push(ParseError {
                                line: line_no,
                                column: indent,
                                kind: ErrorKind::Range,
                                message: format!(
                                    "duration must be a positive integer, got `{n}`"
                                ),
                            });
                            bad = true;
                        }
                    }
                }
                _ => {
                    errors.push(syntax(format!(
                        "malformed episode entry `{}`",
                        chunk.trim()
                    )));
                    bad = true;
                }
            }
        }
        if groups.is_empty() && !bad {
            errors.push(syntax("an episode needs at least one group".to_string()));
            bad = true;
        }
        if !bad {
            episodes.push(Episode {
                co_active_groups: groups,
                used_paths: Vec::new(),
                duration,
            });
        }
    }
    if errors.is_empty() {
        Ok(episodes)
    } else {
        Err(errors)
    }
}

/// Replaces the document's link declarations with group-level projections
/// of the graph's current cross-group excitatory and inhibitory edges.
///
/// The projected weight of a pair (source, target) is the summed edge
/// weight divided by the target's size: for uniformly expanded links that
/// recovers the declared weight exactly, and for singleton groups it is
/// exact for any edge set. Multi-member groups with uneven per-edge updates
/// lose the within-pair structure.
pub fn project_links(doc: &ScenarioDoc, graph: &NeuronGraph) -> ScenarioDoc {
    use std::collections::BTreeMap;

    let mut owner: BTreeMap<NeuronId, &str> = BTreeMap::new();
    for name in graph.group_names() {
        for &member in graph.group_members(name).unwrap_or(&[]) {
            owner.insert(member, name);
        }
    }
    let declared_kind: BTreeMap<(String, String, Polarity), ConnectionKind> = doc
        .links
        .iter()
        .map(|l| {
            (
                (l.source.name.clone(), l.target.name.clone(), l.polarity),
                l.kind,
            )
        })
        .collect();

    let mut sums: BTreeMap<(String, String, Polarity), f64> = BTreeMap::new();
    for synapse in graph.synapses() {
        let (Some(&src), Some(&dst)) = (owner.get(&synapse.source), owner.get(&synapse.target))
        else {
            continue;
        };
        if src == dst {
            continue;
        }
        *sums
            .entry((src.to_string(), dst.to_string(), synapse.polarity))
            .or_insert(0.0) += synapse.weight;
    }

    let mut out = doc.clone();
    out.links = sums
        .into_iter()
        .map(|((source, target, polarity), sum)| {
            let size = graph.group_members(&target).map_or(1, |m| m.len()) as f64;
            let kind = declared_kind
                .get(&(source.clone(), target.clone(), polarity))
                .copied()
                .unwrap_or(ConnectionKind::Association);
            LinkDecl {
                source: Ref {
                    name: source,
                    span: Span { line: 0, column: 0 },
                },
                target: Ref {
                    name: target,
                    span: Span { line: 0, column: 0 },
                },
                polarity,
                weight: sum / size,
                kind,
            }
        })
        .collect();
    out
}
