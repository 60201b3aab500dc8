use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use agentrr_core::sim::{
    builtin_apps, gen_workload, run_experiment, Distribution, EmbedderKind, ExperimentConfig, ExperimentReport,
    SimApp, TaskTemplate,
};
use agentrr_core::trace_io::{ingest, read_trace};
use agentrr_core::{mine_shortcuts, ActTree, ReuseConfig};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "agentrr", version, about = "Record-and-replay cache for GUI agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        matches!(self, Switch::On)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Embedder {
    Reference,
    Adversarial,
}

#[derive(Subcommand)]
enum Command {
    /// Run a synthetic workload against the built-in apps.
    Simulate {
        /// App id, or `all` for every built-in app.
        #[arg(long, default_value = "all")]
        app: String,
        /// `uniform` or `powerlaw`.
        #[arg(long, default_value = "uniform")]
        dist: Distribution,
        #[arg(long, default_value_t = 500)]
        tasks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        tau1: Option<f64>,
        #[arg(long)]
        tau2: Option<f64>,
        #[arg(long, default_value_t = agentrr_core::sim::DEFAULT_CAPACITY)]
        capacity: usize,
        #[arg(long, value_enum, default_value = "off")]
        speculate: Switch,
        #[arg(long, value_enum, default_value = "on")]
        replay: Switch,
        /// Probability that a dynamic element changes content per episode.
        #[arg(long = "p-dyn", default_value_t = 0.0)]
        p_dyn: f64,
        #[arg(long, value_enum, default_value = "reference")]
        embedder: Embedder,
        /// Include speculative steps in the replay rate.
        #[arg(long)]
        count_speculative: bool,
        #[arg(long, default_value_t = 1.0)]
        model_latency: f64,
        #[arg(long, default_value_t = 0.05)]
        replay_latency: f64,
        /// Full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Append the summary row here instead of printing it; the header
        /// is written when the file is new.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Ingest an offline JSONL trace into a tree file.
    Record {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        tree: PathBuf,
        /// Edge capacity for a newly created tree.
        #[arg(long, default_value_t = agentrr_core::sim::DEFAULT_CAPACITY)]
        capacity: usize,
    },
    /// Size, depth histogram and per-layer task counts of a tree.
    ReplayStats {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Mine recurring sub-paths from a tree.
    MineShortcuts {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, default_value_t = agentrr_core::shortcuts::DEFAULT_MIN_SUPPORT)]
        min_support: usize,
        #[arg(long, default_value_t = agentrr_core::shortcuts::DEFAULT_MAX_LENGTH)]
        max_length: usize,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const CSV_HEADER: &str = "dist,n,replay_rate,speculative_rate,correctness,model_calls,estimated_speedup";

fn csv_row(r: &ExperimentReport) -> String {
    format!(
        "{},{},{:.6},{:.6},{:.6},{},{:.6}",
        r.distribution, r.n, r.replay_rate, r.speculative_rate, r.correctness, r.model_calls, r.estimated_speedup
    )
}

fn select_templates(apps: &[SimApp], app: &str) -> Result<Vec<TaskTemplate>> {
    if app == "all" {
        return Ok(apps.iter().flat_map(|a| a.templates.clone()).collect());
    }
    match apps.iter().find(|a| a.app_id == app) {
        Some(a) => Ok(a.templates.clone()),
        None => {
            let known: Vec<&str> = apps.iter().map(|a| a.app_id.as_str()).collect();
            bail!("unknown app {app:?}; expected one of {} or all", known.join(", "))
        }
    }
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    app: &str,
    dist: Distribution,
    tasks: usize,
    seed: u64,
    config: ExperimentConfig,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> Result<()> {
    let apps = builtin_apps()?;
    let templates = select_templates(&apps, app)?;
    let workload = gen_workload(&templates, tasks, dist, seed)?;
    let report = run_experiment(&workload, &apps, &config)?;
    if let Some(p) = out {
        write_json(Some(p), &serde_json::to_value(&report)?)?;
    }
    match csv {
        Some(p) => {
            let fresh = !p.exists();
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .with_context(|| format!("opening {}", p.display()))?;
            if fresh {
                writeln!(f, "{CSV_HEADER}")?;
            }
            writeln!(f, "{}", csv_row(&report))?;
        }
        None => println!("{CSV_HEADER}\n{}", csv_row(&report)),
    }
    Ok(())
}

fn record(trace: &Path, tree_path: &Path, capacity: usize) -> Result<()> {
    let file = File::open(trace).with_context(|| format!("opening {}", trace.display()))?;
    let trajectories = read_trace(BufReader::new(file)).with_context(|| format!("reading {}", trace.display()))?;
    let mut tree = if tree_path.exists() {
        ActTree::load_path(tree_path).with_context(|| format!("loading {}", tree_path.display()))?
    } else {
        let Some(first) = trajectories.iter().find_map(|t| t.steps.first()) else {
            bail!("{} holds no steps to root a new tree", trace.display());
        };
        ActTree::new(first.state.clone(), capacity)?
    };
    let added = ingest(&mut tree, &trajectories)?;
    let file = File::create(tree_path).with_context(|| format!("creating {}", tree_path.display()))?;
    tree.save(BufWriter::new(file))?;
    println!(
        "ingested {} trajectories: {added} new edges, {} edges and {} nodes in {}",
        trajectories.len(),
        tree.edge_count(),
        tree.node_count(),
        tree_path.display()
    );
    Ok(())
}

fn replay_stats(tree_path: &Path, json: bool) -> Result<()> {
    let tree = ActTree::load_path(tree_path).with_context(|| format!("loading {}", tree_path.display()))?;
    let depth = tree.depth_histogram();
    let per_layer = tree.tasks_per_layer();
    if json {
        let v = serde_json::json!({
            "nodes": tree.node_count(),
            "edges": tree.edge_count(),
            "capacity": tree.capacity(),
            "tasks": tree.tasks().count(),
            "depth_histogram": depth,
            "tasks_per_layer": per_layer,
        });
        return write_json(None, &v);
    }
    println!("nodes     {}", tree.node_count());
    println!("edges     {} / {}", tree.edge_count(), tree.capacity());
    println!("tasks     {}", tree.tasks().count());
    println!("depth  nodes  tasks");
    for d in 0..depth.len().max(per_layer.len()) {
        let n = depth.get(d).copied().unwrap_or(0);
        let t = per_layer.get(d).copied().unwrap_or(0);
        println!("{d:>5}  {n:>5}  {t:>5}");
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            app,
            dist,
            tasks,
            seed,
            tau1,
            tau2,
            capacity,
            speculate,
            replay,
            p_dyn,
            embedder,
            count_speculative,
            model_latency,
            replay_latency,
            out,
            csv,
        } => {
            let defaults = ReuseConfig::default();
            let mut config = ExperimentConfig {
                reuse: ReuseConfig { tau1: tau1.unwrap_or(defaults.tau1), tau2: tau2.unwrap_or(defaults.tau2), ..defaults },
                embedder: match embedder {
                    Embedder::Reference => EmbedderKind::Reference,
                    Embedder::Adversarial => EmbedderKind::Adversarial,
                },
                capacity,
                p_dyn,
                model_latency,
                replay_latency,
                count_speculative,
                ..ExperimentConfig::default()
            };
            config.tracer.speculate = speculate.on();
            config.tracer.replay_enabled = replay.on();
            simulate(&app, dist, tasks, seed, config, out.as_deref(), csv.as_deref())
        }
        Command::Record { trace, tree, capacity } => record(&trace, &tree, capacity),
        Command::ReplayStats { tree, json } => replay_stats(&tree, json),
        Command::MineShortcuts { tree, min_support, max_length, out } => {
            let tree = ActTree::load_path(&tree).with_context(|| format!("loading {}", tree.display()))?;
            let mined = mine_shortcuts(&tree, min_support, max_length);
            eprintln!("mined {} shortcuts", mined.len());
            write_json(out.as_deref(), &serde_json::to_value(&mined)?)
        }
    }
}
