//! JSONL trajectory files: a versioned header line followed by one line per
//! executed step.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::acttree::ActTree;
use crate::domain::{Action, Step, Task, TaskId, Trajectory, UIStateId};
use crate::error::{Error, Result};

pub const TRACE_FORMAT: &str = "agentrr-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub task_id: TaskId,
    pub description: String,
    pub app_id: String,
    pub step_index: usize,
    pub state_fingerprint: String,
    pub action: Action,
}

pub fn write_trace<W: Write>(mut w: W, trajectories: &[Trajectory]) -> Result<()> {
    let header = Header { format: TRACE_FORMAT.into(), version: TRACE_VERSION };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for t in trajectories {
        for (i, s) in t.steps.iter().enumerate() {
            let line = TraceLine {
                task_id: t.task.id.clone(),
                description: t.task.description.clone(),
                app_id: t.task.app_id.clone(),
                step_index: i,
                state_fingerprint: s.state.fingerprint.clone(),
                action: s.action.clone(),
            };
            writeln!(w, "{}", serde_json::to_string(&line)?)?;
        }
    }
    Ok(())
}

/// Reads a trace and groups its lines into trajectories, in order of each
/// task's first appearance. Steps within a task are ordered by index and
/// must be numbered `0..n` without gaps.
pub fn read_trace<R: BufRead>(r: R) -> Result<Vec<Trajectory>> {
    let mut lines = r.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
    let Some((_, first)) = lines.next() else {
        return Err(Error::Malformed("empty trace file".into()));
    };
    let header: Header =
        serde_json::from_str(&first?).map_err(|e| Error::Malformed(format!("trace header: {e}")))?;
    if header.format != TRACE_FORMAT {
        return Err(Error::Malformed(format!("not a trace file (format {:?})", header.format)));
    }
    if header.version != TRACE_VERSION {
        return Err(Error::VersionMismatch { format: TRACE_FORMAT, found: header.version, expected: TRACE_VERSION });
    }

    let mut order: Vec<TaskId> = Vec::new();
    let mut grouped: std::collections::BTreeMap<TaskId, Vec<TraceLine>> = Default::default();
    for (no, line) in lines {
        let line: TraceLine =
            serde_json::from_str(&line?).map_err(|e| Error::Malformed(format!("line {}: {e}", no + 1)))?;
        line.action.validate()?;
        if !grouped.contains_key(&line.task_id) {
            order.push(line.task_id.clone());
        }
        grouped.entry(line.task_id.clone()).or_default().push(line);
    }

    let mut out = Vec::with_capacity(order.len());
    for (created_at, id) in order.into_iter().enumerate() {
        let mut steps = grouped.remove(&id).expect("grouped above");
        steps.sort_by_key(|s| s.step_index);
        if steps.iter().enumerate().any(|(i, s)| s.step_index != i) {
            return Err(Error::InvalidTrajectory(format!("task {id}: step indices are not 0..n")));
        }
        let task = Task::new(id.0, steps[0].description.clone(), steps[0].app_id.clone(), created_at as u64)?;
        let completed = steps.last().is_some_and(|s| s.action.is_done());
        let steps = steps
            .into_iter()
            .map(|s| Step { state: UIStateId::new(s.app_id, s.state_fingerprint), action: s.action })
            .collect();
        out.push(Trajectory::new(task, steps, completed)?);
    }
    Ok(out)
}

/// Replays recorded trajectories into `tree`. Each step's resulting state is
/// the state of the following step; the last step stays where it was.
/// Trajectories must start at the tree's root state.
pub fn ingest(tree: &mut ActTree, trajectories: &[Trajectory]) -> Result<usize> {
    let base = tree.tasks().map(|t| t.created_at + 1).max().unwrap_or(0);
    let mut new_edges = 0;
    for traj in trajectories {
        let Some(first) = traj.steps.first() else {
            continue;
        };
        if !first.state.same_state(tree.root_state()) {
            return Err(Error::InvalidTrajectory(format!(
                "task {} starts at {} but the tree root is {}",
                traj.task.id,
                first.state.fingerprint,
                tree.root_state().fingerprint
            )));
        }
        let mut task = traj.task.clone();
        task.created_at += base;
        let mut at = tree.root();
        for (i, step) in traj.steps.iter().enumerate() {
            let next = traj.steps.get(i + 1).map_or(&step.state, |s| &s.state).clone();
            let rec = tree.record_step(at, step.action.clone(), &task, next)?;
            new_edges += usize::from(!rec.merged);
            at = rec.node;
        }
        tree.evict_lru();
    }
    Ok(new_edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(id: &str, desc: &str, acts: &[Action]) -> Trajectory {
        let task = Task::new(id, desc, "shop", 0).unwrap();
        let steps = acts
            .iter()
            .enumerate()
            .map(|(i, a)| Step {
                state: UIStateId::new("shop", if i == 0 { "home".into() } else { format!("{id}-{i}") }),
                action: a.clone(),
            })
            .collect();
        Trajectory::new(task, steps, acts.last().is_some_and(|a| a.is_done())).unwrap()
    }

    fn sample() -> Vec<Trajectory> {
        vec![
            traj("a", "buy milk", &[Action::click("search", None).unwrap(), Action::input("milk"), Action::Done]),
            traj("b", "buy eggs", &[Action::click("search", None).unwrap(), Action::input("eggs")]),
        ]
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_trace(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"format":"agentrr-trace","version":1}"#));
        assert_eq!(text.lines().count(), 6);
        let back = read_trace(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].steps, sample()[0].steps);
        assert!(back[0].completed && !back[1].completed);
        assert_eq!(back[1].task.created_at, 1);
    }

    #[test]
    fn header_is_checked() {
        let err = read_trace(&b"{\"format\":\"agentrr-trace\",\"version\":2}\n"[..]).unwrap_err();
        assert!(matches!(err, Error::VersionMismatch { found: 2, .. }));
        assert!(matches!(read_trace(&b"{\"format\":\"other\",\"version\":1}\n"[..]), Err(Error::Malformed(_))));
        assert!(matches!(read_trace(&b""[..]), Err(Error::Malformed(_))));
        let bad = "{\"format\":\"agentrr-trace\",\"version\":1}\nnot json\n";
        assert!(matches!(read_trace(bad.as_bytes()), Err(Error::Malformed(_))));
    }

    #[test]
    fn gaps_in_step_indices_are_rejected() {
        let mut buf = Vec::new();
        write_trace(&mut buf, &sample()[..1]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let dropped: Vec<&str> = text.lines().enumerate().filter(|(i, _)| *i != 2).map(|(_, l)| l).collect();
        assert!(matches!(read_trace(dropped.join("\n").as_bytes()), Err(Error::InvalidTrajectory(_))));
    }

    #[test]
    fn ingest_shares_prefixes() {
        let mut tree = ActTree::new(UIStateId::new("shop", "home"), 100).unwrap();
        let added = ingest(&mut tree, &sample()).unwrap();
        // search shared; milk, done, eggs distinct
        assert_eq!(added, 4);
        assert_eq!(tree.edge_count(), 4);
        let search = tree.node_at_prefix([&Action::click("search", None).unwrap()]).unwrap();
        assert_eq!(tree.node(search).unwrap().state.fingerprint, "a-1");
        assert_eq!(tree.outgoing_tree(search).count(), 2);
        // ingesting again only merges
        assert_eq!(ingest(&mut tree, &sample()).unwrap(), 0);
        assert!(tree.tasks().all(|t| t.created_at < 2));
    }

    #[test]
    fn ingest_rejects_foreign_start() {
        let mut tree = ActTree::new(UIStateId::new("shop", "elsewhere"), 100).unwrap();
        assert!(ingest(&mut tree, &sample()).is_err());
    }
}
