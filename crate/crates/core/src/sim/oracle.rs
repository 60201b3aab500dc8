//! An agent that knows each task's ground truth.

use super::app::{SimApp, TaskTemplate};
use crate::domain::{action_equals, Action, Task, UIStateId};
use crate::error::{Error, Result};
use crate::tracer::AgentCallback;

pub struct OracleAgent {
    actions: Vec<Action>,
    /// State before each action; the one before Done is the final state.
    states: Vec<UIStateId>,
    calls: usize,
}

impl OracleAgent {
    pub fn new(app: &SimApp, template: &TaskTemplate, param: &str) -> Result<Self> {
        let (actions, states) = app.ground_truth(template, param)?;
        let states = states.iter().map(|s| app.state_id(s)).collect();
        Ok(Self { actions, states, calls: 0 })
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn final_state(&self) -> &UIStateId {
        self.states.last().expect("ground truth has a start state")
    }

    /// Index of the ground-truth action due at `state`.
    fn position(&self, state: &UIStateId) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

impl AgentCallback for OracleAgent {
    fn decide(&mut self, task: &Task, state: &UIStateId, _history: &[Action]) -> Result<Action> {
        self.calls += 1;
        let i = self
            .position(state)
            .ok_or_else(|| Error::Agent(format!("task {}: state {} is off the ground truth", task.id, state.fingerprint)))?;
        Ok(self.actions[i].clone())
    }

    fn confirms(&mut self, _task: &Task, before: &UIStateId, action: &Action, after: &UIStateId) -> bool {
        let Some(i) = self.position(before) else {
            return false;
        };
        let want_after = if i + 1 < self.actions.len() { &self.states[i + 1] } else { before };
        action_equals(&self.actions[i], action) && after == want_after
    }
}
