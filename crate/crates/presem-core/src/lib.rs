//! Core library of the picture pre-semantics engine.

pub mod counterfactual;
pub mod interface;
pub mod learning;
pub mod paths;
pub mod pictures;
pub mod substrate;

pub use counterfactual::{
    applicability_filter, compare_orders, distance, evaluate, goal_score, nth_permutation,
    retrieve, select, Applicability, ComposedSummary, EvalError, EvalSettings, Exclusion,
    ExplanationStep, Goal, OrderComparison, OrderDirective, OrderReport, PlanEntry, Query,
    Retrieval, Scenario, Verdict, VerdictStatus,
};
pub use interface::{
    emit_comparison, emit_trace, parse, parse_episodes, project_links, serialize, AttentionDecl,
    BuildError, ErrorKind, GoalDecl, GroupDecl, LinkDecl, ParseError, PictureDecl, PlanEntryDecl,
    QueryDecl, Ref, ScenarioDoc, SituationDecl, Span, SpannedTag, MAX_DIAGNOSTICS,
};
pub use learning::{
    accessibility, delta_update, episodes_to_association, use_strengthen, Episode, LearningError,
    PlasticityConfig,
};
pub use pictures::{
    abstraction_view, compose, consistency_report, decompose, enforce_conflicts, focus, Binding,
    BindingEnd, BindingLink, ComposeRecord, ConflictPolicy, Contradiction, FeatureMap,
    FeaturePolarity, FeatureTag, PartSelector, Picture, PictureError, PictureId, PictureStore,
    Realizer,
};
pub use paths::{
    effective_signal, enumerate_paths, steady_state_equivalence_check, EquivalenceOutcome, Path,
    PathEdge, PathError, SignalReport,
};
pub use substrate::{
    build_graph, group_activation, ActivationState, AttentionMask, BuildConfig, ConnectionKind,
    GroupSpec, LinkSpec, Neuron, NeuronGraph, NeuronId, Polarity, RunStatus, SubstrateError,
    Synapse, SynapseKey, Trace,
};
