//! The replay engine: walks the [`ActTree`] in lockstep with a live
//! execution, replaying cached actions where the latent memory allows and
//! falling back to the agent otherwise.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::acttree::{ActTree, EdgeId, GroundedRecord, NodeId};
use crate::domain::{Action, BBox, Task, TaskId, UIStateId};
use crate::error::{Error, Result};
use crate::latent::{rerank_reuse, select_candidates_from, LatentMemory};
use crate::shortcuts::{mine_shortcuts, speculative_candidates, Shortcut, DEFAULT_MAX_LENGTH, DEFAULT_MIN_SUPPORT};

pub const DEFAULT_STEP_LIMIT: usize = 50;

pub trait ScreenParser {
    fn parse(&self, state: &UIStateId) -> Vec<(String, BBox)>;

    /// Content of the element whose box equals `bbox`, if any.
    fn lookup(&self, state: &UIStateId, bbox: &BBox) -> Option<String>;
}

/// A device or simulator the tracer drives. It doubles as the screen parser
/// because what a parser reads depends on the live screen.
pub trait Environment: ScreenParser {
    fn current_state(&self) -> UIStateId;

    fn execute(&mut self, action: &Action) -> Result<UIStateId>;
}

/// The planner/decider/grounder stack behind the tracer.
pub trait AgentCallback {
    fn decide(&mut self, task: &Task, state: &UIStateId, history: &[Action]) -> Result<Action>;

    /// Asked after a replayed or speculative action: does the transition
    /// `before -> after` via `action` still serve `task`? A cached target
    /// state is necessary but not sufficient, since two tasks may share a
    /// screen while needing different actions there.
    fn confirms(&mut self, _task: &Task, _before: &UIStateId, _action: &Action, _after: &UIStateId) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StepSource {
    Replay,
    Speculative,
    Model,
    Recovery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub action: Action,
    pub source: StepSource,
    pub layer: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub task_id: TaskId,
    pub steps: Vec<StepRecord>,
    pub replayed_count: usize,
    pub speculative_count: usize,
    pub model_calls: usize,
    pub recovered_count: usize,
    pub completed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub final_state: UIStateId,
}

impl ExecutionReport {
    fn new(task: &Task, state: UIStateId) -> Self {
        Self {
            task_id: task.id.clone(),
            steps: Vec::new(),
            replayed_count: 0,
            speculative_count: 0,
            model_calls: 0,
            recovered_count: 0,
            completed: false,
            error: None,
            final_state: state,
        }
    }

    fn push(&mut self, action: Action, source: StepSource, layer: usize) {
        match source {
            StepSource::Replay => self.replayed_count += 1,
            StepSource::Speculative => self.speculative_count += 1,
            StepSource::Model => self.model_calls += 1,
            StepSource::Recovery => self.recovered_count += 1,
        }
        self.steps.push(StepRecord { action, source, layer });
    }

    pub fn total_steps(&self) -> usize {
        self.steps.len()
    }

    /// Share of steps served from the cache, speculation counted or not.
    pub fn replay_rate(&self, count_speculative: bool) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        let hits = self.replayed_count + if count_speculative { self.speculative_count } else { 0 };
        hits as f64 / self.steps.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracerConfig {
    pub step_limit: usize,
    pub speculate: bool,
    pub replay_enabled: bool,
}

impl Default for TracerConfig {
    fn default() -> Self {
        Self { step_limit: DEFAULT_STEP_LIMIT, speculate: false, replay_enabled: true }
    }
}

/// Outcome of [`Tracer::recover`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recovery {
    /// Back was issued; continue from `to` (reached through BACKTRACK `edge`).
    Backtrack { to: NodeId, edge: EdgeId },
    /// Nothing to undo from the root; ask the agent instead.
    Consult,
}

/// True when the edge carries no grounded record, or when the content now
/// under the recorded box matches what was recorded (whitespace-normalized).
pub fn check_ui(tree: &ActTree, edge: EdgeId, current: &UIStateId, parser: &dyn ScreenParser) -> Result<bool> {
    let Some(rec) = &tree.edge(edge)?.grounded_record else {
        return Ok(true);
    };
    Ok(parser
        .lookup(current, &rec.bbox)
        .is_some_and(|now| squash(&now) == squash(&rec.content)))
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Looks for a reusable cached edge at `node` for `task`.
///
/// History is the set of tasks on outgoing TREE edges not in `excluded`.
/// When the UI check fails the hit is dropped and the edge's grounded record
/// cleared so the next model step re-grounds it.
pub fn try_replay(
    tree: &mut ActTree,
    node: NodeId,
    task: &Task,
    current: &UIStateId,
    memory: &LatentMemory,
    parser: &dyn ScreenParser,
    excluded: &BTreeSet<EdgeId>,
) -> Result<Option<EdgeId>> {
    let layer = tree.node(node)?.depth;
    let chosen = {
        let edges: Vec<_> = tree.outgoing_tree(node).filter(|e| !excluded.contains(&e.edge_id)).collect();
        let ids: BTreeSet<&TaskId> = edges.iter().flat_map(|e| e.task_ids.iter()).collect();
        let hist = ids.into_iter().filter_map(|id| tree.task(id));
        let cands = select_candidates_from(task, hist, layer, memory.embedder.as_ref(), &memory.config)?;
        let cands: Vec<&Task> = cands.iter().map(|c| c.task).collect();
        let decision = rerank_reuse(&cands, task, layer, memory.reranker.as_ref(), &memory.config)?;
        decision.best.and_then(|best| {
            edges
                .iter()
                .filter(|e| e.task_ids.contains(&best.id))
                .max_by_key(|e| (e.last_used_at, e.edge_id))
                .map(|e| e.edge_id)
        })
    };
    let Some(edge) = chosen else {
        return Ok(None);
    };
    if check_ui(tree, edge, current, parser)? {
        Ok(Some(edge))
    } else {
        tree.set_grounded(edge, None)?;
        Ok(None)
    }
}

/// Drives task executions against one tree.
pub struct Tracer {
    tree: ActTree,
    memory: LatentMemory,
    config: TracerConfig,
    shortcuts: Vec<Shortcut>,
}

/// Per-task walk state.
struct Walk {
    node: NodeId,
    path_nodes: Vec<NodeId>,
    path_actions: Vec<Action>,
    history: Vec<Action>,
    excluded: BTreeSet<EdgeId>,
    spec_excluded: BTreeSet<(NodeId, usize)>,
}

impl Walk {
    fn advance(&mut self, node: NodeId, action: Action) {
        self.node = node;
        self.path_nodes.push(node);
        self.path_actions.push(action);
    }
}

impl Tracer {
    pub fn new(tree: ActTree, memory: LatentMemory, config: TracerConfig) -> Result<Self> {
        if config.step_limit == 0 {
            return Err(Error::InvalidConfig("step_limit must be positive".into()));
        }
        Ok(Self { tree, memory, config, shortcuts: Vec::new() })
    }

    pub fn tree(&self) -> &ActTree {
        &self.tree
    }

    pub fn tree_mut(&mut self) -> &mut ActTree {
        &mut self.tree
    }

    pub fn into_tree(self) -> ActTree {
        self.tree
    }

    pub fn config(&self) -> &TracerConfig {
        &self.config
    }

    pub fn memory(&self) -> &LatentMemory {
        &self.memory
    }

    pub fn shortcuts(&self) -> &[Shortcut] {
        &self.shortcuts
    }

    /// Runs `task` to completion, the step limit, or the first env/agent
    /// error. Errors end up in the report rather than the return value;
    /// `Err` is reserved for a broken precondition.
    pub fn execute_task(
        &mut self,
        task: &Task,
        env: &mut dyn Environment,
        agent: &mut dyn AgentCallback,
    ) -> Result<ExecutionReport> {
        let start = env.current_state();
        if !start.same_state(self.tree.root_state()) {
            return Err(Error::Environment(format!(
                "initial state {} does not match the tree root {}",
                start.fingerprint,
                self.tree.root_state().fingerprint
            )));
        }
        if self.config.speculate {
            self.shortcuts = mine_shortcuts(&self.tree, DEFAULT_MIN_SUPPORT, DEFAULT_MAX_LENGTH);
        }
        let root = self.tree.root();
        let mut walk = Walk {
            node: root,
            path_nodes: vec![root],
            path_actions: Vec::new(),
            history: Vec::new(),
            excluded: BTreeSet::new(),
            spec_excluded: BTreeSet::new(),
        };
        let mut report = ExecutionReport::new(task, start);
        while report.steps.len() < self.config.step_limit {
            match self.step(task, env, agent, &mut walk, &mut report) {
                Ok(true) => {
                    report.completed = true;
                    break;
                }
                Ok(false) => {}
                Err(e) => {
                    report.error = Some(e.to_string());
                    break;
                }
            }
            let protected: BTreeSet<EdgeId> = self.tree.path_to(walk.node).into_iter().collect();
            self.tree.evict_lru_protecting(&protected);
        }
        self.tree.evict_lru();
        report.final_state = env.current_state();
        Ok(report)
    }

    /// One iteration; true once a confirmed Done has executed.
    fn step(
        &mut self,
        task: &Task,
        env: &mut dyn Environment,
        agent: &mut dyn AgentCallback,
        walk: &mut Walk,
        report: &mut ExecutionReport,
    ) -> Result<bool> {
        let before = env.current_state();
        let layer = self.tree.node(walk.node)?.depth;

        if self.config.replay_enabled {
            let hit = try_replay(&mut self.tree, walk.node, task, &before, &self.memory, &*env, &walk.excluded)?;
            if let Some(edge) = hit {
                let (action, cached) = {
                    let e = self.tree.edge(edge)?;
                    (e.action.clone(), e.to_node)
                };
                report.push(action.clone(), StepSource::Replay, layer);
                walk.history.push(action.clone());
                let after = env.execute(&action).ok();
                let matches = after.as_ref().is_some_and(|a| {
                    self.tree.node(cached).is_ok_and(|n| n.state.same_state(a))
                        && agent.confirms(task, &before, &action, a)
                });
                if matches {
                    let after = after.expect("checked");
                    let rec = self.tree.record_step(walk.node, action.clone(), task, after)?;
                    walk.advance(rec.node, action.clone());
                    return Ok(action.is_done());
                }
                self.tree.touch_edge(edge)?;
                walk.excluded.insert(edge);
                if after.is_some_and(|a| !a.same_state(&before)) {
                    self.undo(env, agent, task, walk, report, cached)?;
                }
                return Ok(false);
            }

            if self.config.speculate {
                let cand = speculative_candidates(&self.tree, &walk.path_nodes, &walk.path_actions, &self.shortcuts)
                    .find(|(i, _)| !walk.spec_excluded.contains(&(walk.node, *i)))
                    .map(|(i, s)| (i, s.final_action.clone()));
                if let Some((idx, action)) = cand {
                    report.push(action.clone(), StepSource::Speculative, layer);
                    walk.history.push(action.clone());
                    let after = env.execute(&action).ok();
                    let ok = after.as_ref().is_some_and(|a| agent.confirms(task, &before, &action, a));
                    if ok {
                        let after = after.expect("checked");
                        let rec = self.tree.record_step(walk.node, action.clone(), task, after)?;
                        walk.advance(rec.node, action.clone());
                        return Ok(action.is_done());
                    }
                    walk.spec_excluded.insert((walk.node, idx));
                    if after.is_some_and(|a| !a.same_state(&before)) {
                        // nothing cached to backtrack through: plain Back
                        let back = Action::Back;
                        report.push(back.clone(), StepSource::Recovery, layer + 1);
                        walk.history.push(back.clone());
                        env.execute(&back)?;
                    }
                    return Ok(false);
                }
            }
        }

        let action = agent.decide(task, &before, &walk.history)?;
        action.validate()?;
        report.push(action.clone(), StepSource::Model, layer);
        walk.history.push(action.clone());
        let after = env.execute(&action)?;
        let rec = self.tree.record_step(walk.node, action.clone(), task, after)?;
        if let Action::Click { bbox: Some(bbox), .. } = &action {
            if self.tree.edge(rec.edge)?.grounded_record.is_none() {
                if let Some(content) = env.lookup(&before, bbox) {
                    self.tree.set_grounded(rec.edge, Some(GroundedRecord { bbox: *bbox, content }))?;
                }
            }
        }
        walk.advance(rec.node, action.clone());
        Ok(action.is_done())
    }

    /// Undoes a false positive that landed on `reached`.
    fn undo(
        &mut self,
        env: &mut dyn Environment,
        agent: &mut dyn AgentCallback,
        task: &Task,
        walk: &mut Walk,
        report: &mut ExecutionReport,
        reached: NodeId,
    ) -> Result<()> {
        let layer = self.tree.node(reached)?.depth;
        match self.recover(env, reached)? {
            Recovery::Backtrack { to, .. } => {
                report.push(Action::Back, StepSource::Recovery, layer);
                walk.history.push(Action::Back);
                walk.node = to;
            }
            Recovery::Consult => {
                let state = env.current_state();
                let action = agent.decide(task, &state, &walk.history)?;
                report.push(action.clone(), StepSource::Model, layer);
                walk.history.push(action.clone());
                env.execute(&action)?;
            }
        }
        Ok(())
    }

    /// Issues Back from `from` and records the BACKTRACK edge to its parent.
    /// At the root there is nothing to undo and the agent is consulted.
    pub fn recover(&mut self, env: &mut dyn Environment, from: NodeId) -> Result<Recovery> {
        let Some(parent) = self.tree.parent(from) else {
            return Ok(Recovery::Consult);
        };
        env.execute(&Action::Back)?;
        let edge = self.tree.add_backtrack_edge(from, parent)?;
        Ok(Recovery::Backtrack { to: parent, edge })
    }
}
