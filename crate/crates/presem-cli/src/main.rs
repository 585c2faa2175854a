//! `presem`: scenario checking, counterfactual runs, path audits, order
//! comparison, and co-activation learning over `.psm` files.
//!
//! Exit codes: 0 on success, 2 when the input fails to parse or validate,
//! 3 when a well-formed scenario fails at evaluation time.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use presem_core::{
    compare_orders, delta_update, effective_signal, emit_comparison, emit_trace, enumerate_paths,
    evaluate, parse, parse_episodes, project_links, serialize, BuildConfig, NeuronGraph, NeuronId,
    OrderDirective, PlasticityConfig, Scenario, ScenarioDoc, SignalReport,
};

#[derive(Parser)]
#[command(name = "presem", version, about = "Deterministic picture pre-semantics engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a scenario file.
    Check {
        file: PathBuf,
    },
    /// Evaluate the scenario's query and print the verdict as JSON.
    Run {
        file: PathBuf,
        /// Situation case to load.
        #[arg(long)]
        case: Option<String>,
        /// Firing threshold for every neuron.
        #[arg(long)]
        theta: Option<f64>,
        /// Tick budget for the settling run.
        #[arg(long)]
        max_ticks: Option<usize>,
        /// `given` keeps the plan order; `permute-index K` runs the K-th
        /// lexicographic permutation of the fragment list.
        #[arg(long, num_args = 1..=2, default_value = "given", value_name = "given|permute-index K")]
        order: Vec<String>,
        /// Largest conflict distance a memory picture may have and still apply.
        #[arg(long)]
        d_max: Option<u32>,
        /// Also write the verdict bytes to this file.
        #[arg(long, value_name = "OUT")]
        trace: Option<PathBuf>,
    },
    /// Enumerate signal paths from one group to another.
    Paths {
        file: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// Longest path considered, in edges.
        #[arg(long, default_value_t = 8)]
        max_len: usize,
    },
    /// Evaluate every fragment permutation and report whether they agree.
    CompareOrders {
        file: PathBuf,
        /// Situation case to load.
        #[arg(long)]
        case: Option<String>,
    },
    /// Strengthen associations from an episode log and print the learned
    /// scenario.
    Learn {
        file: PathBuf,
        /// Episode log, one `co-active: a, b [duration N]` per line.
        #[arg(long)]
        episodes: PathBuf,
        /// Per-episode weight increment.
        #[arg(long)]
        eta: Option<f64>,
        /// Write the learned scenario here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failed command: the message goes to stderr, the kind picks the exit
/// code.
enum Failure {
    /// Unreadable, unparsable, or unresolvable input.
    Input(String),
    /// A well-formed scenario that failed during evaluation or learning.
    Runtime(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        match self {
            Failure::Input(msg) => {
                eprintln!("{msg}");
                ExitCode::from(2)
            }
            Failure::Runtime(msg) => {
                eprintln!("{msg}");
                ExitCode::from(3)
            }
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => failure.report(),
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Check { file } => {
            load_doc(&file)?;
            Ok(())
        }
        Command::Run {
            file,
            case,
            theta,
            max_ticks,
            order,
            d_max,
            trace,
        } => {
            let order = parse_order(&order)?;
            let doc = load_doc(&file)?;
            let mut scenario = build_scenario(&doc, case.as_deref(), theta)?;
            if let Some(n) = max_ticks {
                scenario.settings.max_ticks = n;
            }
            if let Some(d) = d_max {
                scenario.settings.d_max = d;
            }
            let verdict =
                evaluate(&scenario, &order).map_err(|e| Failure::Runtime(e.to_string()))?;
            let text = emit_trace(&verdict);
            if let Some(out) = trace {
                fs::write(&out, &text)
                    .map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
            }
            print!("{text}");
            Ok(())
        }
        Command::Paths {
            file,
            from,
            to,
            max_len,
        } => {
            let doc = load_doc(&file)?;
            let graph = doc
                .graph(&BuildConfig::default())
                .map_err(|e| Failure::Input(e.to_string()))?;
            let src = group_members(&graph, &from)?;
            let dst = group_members(&graph, &to)?;
            let paths = enumerate_paths(&graph, &src, &dst, max_len)
                .map_err(|e| Failure::Input(e.to_string()))?;
            let report = effective_signal(&graph, &src, &dst, max_len)
                .map_err(|e| Failure::Input(e.to_string()))?;
            let listing = PathListing {
                from: &from,
                to: &to,
                max_len,
                report,
                paths: paths
                    .iter()
                    .map(|p| PathView {
                        nodes: path_nodes(&graph, p),
                        sign: p.sign,
                        strength: p.strength,
                    })
                    .collect(),
            };
            let mut text =
                serde_json::to_string_pretty(&listing).expect("path listing serializes");
            text.push('\n');
            print!("{text}");
            Ok(())
        }
        Command::CompareOrders { file, case } => {
            let doc = load_doc(&file)?;
            let scenario = build_scenario(&doc, case.as_deref(), None)?;
            let comparison =
                compare_orders(&scenario).map_err(|e| Failure::Runtime(e.to_string()))?;
            print!("{}", emit_comparison(&comparison));
            Ok(())
        }
        Command::Learn {
            file,
            episodes,
            eta,
            out,
        } => {
            let doc = load_doc(&file)?;
            let log = load_episodes(&episodes)?;
            let known: BTreeSet<&str> = doc.groups.iter().map(|g| g.name.as_str()).collect();
            for episode in &log {
                for group in &episode.co_active_groups {
                    if !known.contains(group.as_str()) {
                        return Err(Failure::Input(format!(
                            "{}: unknown group `{group}` in episode",
                            episodes.display()
                        )));
                    }
                }
            }
            let mut cfg = PlasticityConfig::default();
            if let Some(eta) = eta {
                cfg.eta = eta;
            }
            cfg.validate().map_err(|e| Failure::Input(e.to_string()))?;
            let mut graph = doc
                .graph(&BuildConfig::default())
                .map_err(|e| Failure::Input(e.to_string()))?;
            for episode in &log {
                graph =
                    delta_update(&graph, episode, &cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
            }
            let text = serialize(&project_links(&doc, &graph));
            match out {
                Some(path) => fs::write(&path, &text)
                    .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?,
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}

fn load_doc(path: &Path) -> Result<ScenarioDoc, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|errors| {
        let lines: Vec<String> = errors
            .iter()
            .map(|e| format!("{}:{e}", path.display()))
            .collect();
        Failure::Input(lines.join("\n"))
    })
}

fn load_episodes(path: &Path) -> Result<Vec<presem_core::Episode>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    parse_episodes(&text).map_err(|errors| {
        let lines: Vec<String> = errors
            .iter()
            .map(|e| format!("{}:{e}", path.display()))
            .collect();
        Failure::Input(lines.join("\n"))
    })
}

fn build_scenario(
    doc: &ScenarioDoc,
    case: Option<&str>,
    theta: Option<f64>,
) -> Result<Scenario, Failure> {
    let mut config = BuildConfig::default();
    if let Some(theta) = theta {
        config.theta = theta;
    }
    doc.scenario_with(case, &config)
        .map_err(|e| Failure::Input(e.to_string()))
}

fn parse_order(tokens: &[String]) -> Result<OrderDirective, Failure> {
    match tokens {
        [mode] if mode == "given" => Ok(OrderDirective::Given),
        [mode, k] if mode == "permute-index" => k
            .parse::<usize>()
            .map(OrderDirective::Permutation)
            .map_err(|_| Failure::Input(format!("permutation index must be an integer, got `{k}`"))),
        _ => Err(Failure::Input(format!(
            "--order takes `given` or `permute-index K`, got `{}`",
            tokens.join(" ")
        ))),
    }
}

fn group_members(graph: &NeuronGraph, name: &str) -> Result<BTreeSet<NeuronId>, Failure> {
    graph
        .group_members(name)
        .map(|m| m.iter().copied().collect())
        .ok_or_else(|| Failure::Input(format!("unknown group `{name}`")))
}

#[derive(Serialize)]
struct PathListing<'a> {
    from: &'a str,
    to: &'a str,
    max_len: usize,
    report: SignalReport,
    paths: Vec<PathView>,
}

#[derive(Serialize)]
struct PathView {
    nodes: Vec<String>,
    sign: i8,
    strength: f64,
}

/// Station labels along a path: the owner group's name, qualified by the
/// member's offset when the group has several neurons.
fn path_nodes(graph: &NeuronGraph, path: &presem_core::Path) -> Vec<String> {
    let mut ids = vec![path.edges[0].source];
    ids.extend(path.edges.iter().map(|e| e.target));
    ids.iter().map(|&id| node_label(graph, id)).collect()
}

fn node_label(graph: &NeuronGraph, id: NeuronId) -> String {
    let Some(neuron) = graph.neurons().find(|n| n.id == id) else {
        return id.to_string();
    };
    let Some(owner) = &neuron.owner_group else {
        return id.to_string();
    };
    let members = graph.group_members(owner).unwrap_or(&[]);
    if members.len() == 1 {
        owner.clone()
    } else {
        let offset = members.iter().position(|&m| m == id).unwrap_or(0);
        format!("{owner}[{offset}]")
    }
}
