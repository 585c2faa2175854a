//! Shared fixtures for the benchmark suite.

use presem_core::{build_graph, BuildConfig, GroupSpec, LinkSpec, NeuronGraph, Polarity};

/// A layered feed-forward graph: `layers` ranks of `width` singleton groups,
/// each rank fully connected to the next with sub-unit weights and a sparse
/// sprinkling of inhibitory skips.
pub fn layered_graph(layers: usize, width: usize) -> NeuronGraph {
    let name = |l: usize, w: usize| format!("l{l}w{w}");
    let mut groups = Vec::new();
    for l in 0..layers {
        for w in 0..width {
            groups.push(GroupSpec::new(name(l, w), 1));
        }
    }
    let mut links = Vec::new();
    for l in 0..layers - 1 {
        for a in 0..width {
            for b in 0..width {
                links.push(LinkSpec::new(
                    name(l, a),
                    name(l + 1, b),
                    Polarity::Excitatory,
                    0.9,
                ));
            }
        }
    }
    for l in 0..layers.saturating_sub(2) {
        links.push(LinkSpec::new(
            name(l, 0),
            name(l + 2, width - 1),
            Polarity::Inhibitory,
            0.4,
        ));
    }
    build_graph(&groups, &links, &BuildConfig::default()).expect("fixture builds")
}
