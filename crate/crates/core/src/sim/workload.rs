//! Request streams drawn from template instantiations.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::app::TaskTemplate;
use crate::domain::Task;
use crate::error::{Error, Result};

/// Share of the task population designated hot under the power law.
pub const HOT_FRACTION: f64 = 0.2;
/// Probability that a power-law request targets the hot set.
pub const HOT_PROBABILITY: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Uniform,
    PowerLaw,
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "powerlaw" | "power-law" | "power_law" => Ok(Self::PowerLaw),
            _ => Err(Error::InvalidConfig(format!("unknown distribution {s:?}"))),
        }
    }
}

impl std::fmt::Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::PowerLaw => "powerlaw",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadTask {
    pub template_id: String,
    pub param: String,
    pub task: Task,
    pub hot: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    pub distribution: Distribution,
    pub seed: u64,
    pub tasks: Vec<WorkloadTask>,
}

impl Workload {
    /// Fraction of requests that hit the hot set.
    pub fn hot_share(&self) -> f64 {
        if self.tasks.is_empty() {
            return 0.0;
        }
        self.tasks.iter().filter(|t| t.hot).count() as f64 / self.tasks.len() as f64
    }
}

/// Draws `n` requests. Uniform picks a template, then a parameter. The
/// power law shuffles the (template, parameter) population, marks the first
/// `ceil(20%)` hot, and sends each request there with probability 0.8.
pub fn gen_workload(templates: &[TaskTemplate], n: usize, dist: Distribution, seed: u64) -> Result<Workload> {
    let templates: Vec<&TaskTemplate> = templates.iter().filter(|t| !t.params.is_empty()).collect();
    if templates.is_empty() {
        return Err(Error::EmptyTemplates);
    }
    if n == 0 {
        return Err(Error::InvalidConfig("a workload needs at least one task".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let population: Vec<(usize, usize)> = templates
        .iter()
        .enumerate()
        .flat_map(|(t, tpl)| (0..tpl.params.len()).map(move |p| (t, p)))
        .collect();
    let mut order = population.clone();
    order.shuffle(&mut rng);
    let hot_len = ((population.len() as f64 * HOT_FRACTION).ceil() as usize).min(population.len());
    let (hot, cold) = order.split_at(hot_len);

    let mut tasks = Vec::with_capacity(n);
    for i in 0..n {
        let ((t, p), is_hot) = match dist {
            Distribution::Uniform => {
                let t = rng.gen_range(0..templates.len());
                let p = rng.gen_range(0..templates[t].params.len());
                ((t, p), hot.contains(&(t, p)))
            }
            Distribution::PowerLaw => {
                if cold.is_empty() || rng.gen_bool(HOT_PROBABILITY) {
                    (hot[rng.gen_range(0..hot.len())], true)
                } else {
                    (cold[rng.gen_range(0..cold.len())], false)
                }
            }
        };
        let tpl = templates[t];
        let param = tpl.params[p].clone();
        let task = Task::new(format!("t{i:04}"), tpl.description(&param), tpl.app_id.clone(), i as u64)?;
        tasks.push(WorkloadTask { template_id: tpl.template_id.clone(), param, task, hot: is_hot });
    }
    Ok(Workload { distribution: dist, seed, tasks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn ten() -> Vec<TaskTemplate> {
        vec![TaskTemplate {
            app_id: "a".into(),
            template_id: "only".into(),
            pattern: "do {}".into(),
            params: (0..10).map(|i| format!("p{i}")).collect(),
            steps: vec![],
        }]
    }

    #[test]
    fn power_law_hot_share_is_about_eighty_percent() {
        let apps = crate::sim::apps::builtin_apps().unwrap();
        let templates: Vec<TaskTemplate> = apps.iter().flat_map(|a| a.templates.clone()).collect();
        for seed in 0..10 {
            let w = gen_workload(&templates, 1000, Distribution::PowerLaw, seed).unwrap();
            let share = w.hot_share();
            assert!((0.75..=0.85).contains(&share), "seed {seed}: {share}");
            let hot: std::collections::BTreeSet<_> =
                w.tasks.iter().filter(|t| t.hot).map(|t| (&t.template_id, &t.task.app_id, &t.param)).collect();
            assert!(hot.len() <= 60);
        }
    }

    #[test]
    fn uniform_spreads_evenly() {
        for seed in 0..10 {
            let w = gen_workload(&ten(), 1000, Distribution::Uniform, seed).unwrap();
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for t in &w.tasks {
                *counts.entry(&t.param).or_default() += 1;
            }
            assert_eq!(counts.len(), 10);
            for (p, c) in counts {
                let share = c as f64 / 1000.0;
                assert!((0.05..=0.15).contains(&share), "{p}: {share}");
            }
        }
    }

    #[test]
    fn deterministic_and_well_formed() {
        let a = gen_workload(&ten(), 50, Distribution::PowerLaw, 9).unwrap();
        assert_eq!(a, gen_workload(&ten(), 50, Distribution::PowerLaw, 9).unwrap());
        assert_ne!(a, gen_workload(&ten(), 50, Distribution::PowerLaw, 10).unwrap());
        assert_eq!(a.tasks[7].task.id.0, "t0007");
        assert_eq!(a.tasks[7].task.created_at, 7);
        assert_eq!(a.tasks[7].task.description, format!("do {}", a.tasks[7].param));
        // ceil(20% of 10) = 2 hot tasks
        let hot: std::collections::BTreeSet<_> = a.tasks.iter().filter(|t| t.hot).map(|t| &t.param).collect();
        assert!(hot.len() <= 2);
    }

    #[test]
    fn rejects_empty_input() {
        assert!(matches!(gen_workload(&[], 5, Distribution::Uniform, 0), Err(Error::EmptyTemplates)));
        assert!(gen_workload(&ten(), 0, Distribution::Uniform, 0).is_err());
        assert_eq!("power-law".parse::<Distribution>().unwrap(), Distribution::PowerLaw);
        assert!("zipf".parse::<Distribution>().is_err());
    }
}
