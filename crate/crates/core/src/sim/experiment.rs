//! Runs a workload through the tracer and tallies replay statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::app::SimApp;
use super::episode::{mix_seed, SimEpisode};
use super::oracle::OracleAgent;
use super::workload::{Distribution, Workload};
use crate::acttree::ActTree;
use crate::error::{Error, Result};
use crate::latent::{LatentMemory, ReuseConfig};
use crate::tracer::{ExecutionReport, StepSource, Tracer, TracerConfig};

pub const DEFAULT_CAPACITY: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Reference,
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub reuse: ReuseConfig,
    pub embedder: EmbedderKind,
    pub tracer: TracerConfig,
    pub capacity: usize,
    pub p_dyn: f64,
    pub model_latency: f64,
    pub replay_latency: f64,
    /// Count speculative steps as replayed in `replay_rate`.
    pub count_speculative: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            reuse: ReuseConfig::default(),
            embedder: EmbedderKind::Reference,
            tracer: TracerConfig::default(),
            capacity: DEFAULT_CAPACITY,
            p_dyn: 0.0,
            model_latency: 1.0,
            replay_latency: 0.05,
            count_speculative: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub app_id: String,
    pub template_id: String,
    pub description: String,
    /// Finished with the environment in the ground-truth final state.
    pub correct: bool,
    pub report: ExecutionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub distribution: Distribution,
    pub seed: u64,
    pub n: usize,
    pub config: ExperimentConfig,
    pub total_steps: usize,
    pub replayed_steps: usize,
    pub speculative_steps: usize,
    pub recovered_steps: usize,
    pub model_calls: usize,
    pub replay_rate: f64,
    pub speculative_rate: f64,
    pub correctness: f64,
    pub completion_rate: f64,
    pub estimated_speedup: f64,
    pub tree_edges: BTreeMap<String, usize>,
    pub tasks: Vec<TaskOutcome>,
}

/// Whole-run time with every step at model latency over the time actually
/// spent: model steps at model latency, everything else at replay latency.
pub fn estimated_speedup(total_steps: usize, model_steps: usize, model_latency: f64, replay_latency: f64) -> f64 {
    let spent = model_steps as f64 * model_latency + (total_steps - model_steps) as f64 * replay_latency;
    if spent == 0.0 {
        return 1.0;
    }
    total_steps as f64 * model_latency / spent
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Executes every workload task against a fresh episode of its app, with
/// one persistent tree per app.
pub fn run_experiment(workload: &Workload, apps: &[SimApp], config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.reuse.validate()?;
    if !(0.0..=1.0).contains(&config.p_dyn) {
        return Err(Error::InvalidConfig(format!("p_dyn must lie in [0, 1], got {}", config.p_dyn)));
    }
    if config.model_latency <= 0.0 || config.replay_latency < 0.0 {
        return Err(Error::InvalidConfig("latencies must be positive".into()));
    }
    let by_id: BTreeMap<&str, &SimApp> = apps.iter().map(|a| (a.app_id.as_str(), a)).collect();
    let mut tracers: BTreeMap<String, Tracer> = BTreeMap::new();
    let mut tasks = Vec::with_capacity(workload.tasks.len());

    for (i, wt) in workload.tasks.iter().enumerate() {
        let app_id = wt.task.app_id.as_str();
        let app = by_id
            .get(app_id)
            .ok_or_else(|| Error::InvalidConfig(format!("workload names unknown app {app_id:?}")))?;
        let template = app
            .templates
            .iter()
            .find(|t| t.template_id == wt.template_id)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown template {}", wt.template_id)))?;
        if !tracers.contains_key(app_id) {
            let tree = ActTree::new(app.state_id(&app.initial()), config.capacity)?;
            let memory = match config.embedder {
                EmbedderKind::Reference => LatentMemory::reference(config.reuse)?,
                EmbedderKind::Adversarial => LatentMemory::adversarial(config.reuse)?,
            };
            tracers.insert(app_id.to_string(), Tracer::new(tree, memory, config.tracer)?);
        }
        let tracer = tracers.get_mut(app_id).expect("inserted above");
        let episode_seed = mix_seed(&[&workload.seed.to_le_bytes(), &(i as u64).to_le_bytes()]);
        let mut env = SimEpisode::new(app, episode_seed, config.p_dyn);
        let mut agent = OracleAgent::new(app, template, &wt.param)?;
        let report = tracer.execute_task(&wt.task, &mut env, &mut agent)?;
        let correct = report.completed && report.final_state == *agent.final_state();
        tasks.push(TaskOutcome {
            app_id: app_id.to_string(),
            template_id: wt.template_id.clone(),
            description: wt.task.description.clone(),
            correct,
            report,
        });
    }

    let sum = |f: fn(&ExecutionReport) -> usize| tasks.iter().map(|t| f(&t.report)).sum::<usize>();
    let total_steps = sum(|r| r.steps.len());
    let replayed_steps = sum(|r| r.replayed_count);
    let speculative_steps = sum(|r| r.speculative_count);
    let recovered_steps = sum(|r| r.recovered_count);
    let model_calls = sum(|r| r.steps.iter().filter(|s| s.source == StepSource::Model).count());
    let hits = replayed_steps + if config.count_speculative { speculative_steps } else { 0 };
    Ok(ExperimentReport {
        distribution: workload.distribution,
        seed: workload.seed,
        n: tasks.len(),
        config: *config,
        total_steps,
        replayed_steps,
        speculative_steps,
        recovered_steps,
        model_calls,
        replay_rate: ratio(hits, total_steps),
        speculative_rate: ratio(speculative_steps, total_steps),
        correctness: ratio(tasks.iter().filter(|t| t.correct).count(), tasks.len()),
        completion_rate: ratio(tasks.iter().filter(|t| t.report.completed).count(), tasks.len()),
        estimated_speedup: estimated_speedup(total_steps, model_calls, config.model_latency, config.replay_latency),
        tree_edges: tracers.iter().map(|(k, t)| (k.clone(), t.tree().edge_count())).collect(),
        tasks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::apps::{builtin_apps, shopping};
    use crate::sim::workload::gen_workload;

    #[test]
    fn speedup_arithmetic() {
        // replay rate 0.7: 1 / (0.3 + 0.7 * 0.05)
        let s = estimated_speedup(100, 30, 1.0, 0.05);
        assert!((s - 1.0 / 0.335).abs() < 1e-12);
        assert!((s - 2.985).abs() < 1e-3);
        assert_eq!(estimated_speedup(10, 10, 1.0, 0.05), 1.0);
        assert!((estimated_speedup(10, 0, 1.0, 0.05) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_identical_task_replays_all_but_first() {
        let app = shopping().unwrap();
        let template = app.templates[0].clone();
        let one = TaskTemplate { params: vec!["yoga mat".into()], ..template };
        let n = 20;
        let w = gen_workload(&[one], n, Distribution::Uniform, 1).unwrap();
        let r = run_experiment(&w, &[app], &ExperimentConfig::default()).unwrap();
        assert_eq!(r.correctness, 1.0);
        let per_task = r.total_steps / n;
        assert_eq!(r.replayed_steps, per_task * (n - 1));
        assert!((r.replay_rate - (n - 1) as f64 / n as f64).abs() < 1e-12);
        assert_eq!(r.model_calls, per_task);
    }

    use crate::sim::app::TaskTemplate;

    #[test]
    fn skew_raises_replay_rate_and_stays_correct() {
        let apps = builtin_apps().unwrap();
        let templates: Vec<TaskTemplate> = apps.iter().flat_map(|a| a.templates.clone()).collect();
        let cfg = ExperimentConfig::default();
        let u = run_experiment(&gen_workload(&templates, 300, Distribution::Uniform, 4).unwrap(), &apps, &cfg).unwrap();
        let p = run_experiment(&gen_workload(&templates, 300, Distribution::PowerLaw, 4).unwrap(), &apps, &cfg).unwrap();
        assert!(p.replay_rate > u.replay_rate, "{} vs {}", p.replay_rate, u.replay_rate);
        assert_eq!((u.correctness, p.correctness), (1.0, 1.0));
        for r in [&u, &p] {
            assert_eq!(r.total_steps, r.replayed_steps + r.speculative_steps + r.recovered_steps + r.model_calls);
        }
    }

    #[test]
    fn replay_does_not_change_outcomes() {
        let apps = builtin_apps().unwrap();
        let templates: Vec<TaskTemplate> = apps.iter().flat_map(|a| a.templates.clone()).collect();
        let w = gen_workload(&templates, 200, Distribution::PowerLaw, 11).unwrap();
        let on = run_experiment(&w, &apps, &ExperimentConfig::default()).unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.tracer.replay_enabled = false;
        let off = run_experiment(&w, &apps, &cfg).unwrap();
        assert_eq!(off.replayed_steps, 0);
        for (a, b) in on.tasks.iter().zip(&off.tasks) {
            assert_eq!(a.report.final_state, b.report.final_state);
        }
    }

    #[test]
    fn dynamic_ui_invalidates_but_stays_correct() {
        let apps = builtin_apps().unwrap();
        let templates: Vec<TaskTemplate> = apps.iter().flat_map(|a| a.templates.clone()).collect();
        let w = gen_workload(&templates, 200, Distribution::PowerLaw, 2).unwrap();
        let still = run_experiment(&w, &apps, &ExperimentConfig::default()).unwrap();
        let cfg = ExperimentConfig { p_dyn: 0.5, ..ExperimentConfig::default() };
        let moving = run_experiment(&w, &apps, &cfg).unwrap();
        assert_eq!(moving.correctness, 1.0);
        assert!(moving.replay_rate < still.replay_rate);
    }

    #[test]
    fn unknown_app_is_rejected() {
        let apps = builtin_apps().unwrap();
        let w = gen_workload(&apps[0].templates, 3, Distribution::Uniform, 0).unwrap();
        assert!(run_experiment(&w, &apps[1..], &ExperimentConfig::default()).is_err());
    }
}
