//! Recurring sub-task patterns mined from the tree.
//!
//! A shortcut groups TREE sub-paths that start at the same node, have the
//! same length, share the action-type sequence of every step but the last,
//! and end in equal actions. When the tracer reaches a node without cached
//! experiences it may speculatively propose a shortcut's final action.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::acttree::{ActTree, EdgeId, NodeId};
use crate::domain::{action_key, action_type, Action, ActionType};

pub const DEFAULT_MIN_SUPPORT: usize = 2;
pub const DEFAULT_MAX_LENGTH: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortcut {
    pub start_node: NodeId,
    pub length: usize,
    pub type_signature: Vec<ActionType>,
    pub final_action: Action,
    pub support: usize,
    #[serde(default, skip_serializing)]
    pub member_paths: Vec<Vec<EdgeId>>,
}

fn collect_paths(tree: &ActTree, node: NodeId, max_len: usize, cur: &mut Vec<EdgeId>, out: &mut Vec<Vec<EdgeId>>) {
    if cur.len() == max_len {
        return;
    }
    for e in tree.outgoing_tree(node) {
        cur.push(e.edge_id);
        out.push(cur.clone());
        collect_paths(tree, e.to_node, max_len, cur, out);
        cur.pop();
    }
}

type GroupKey = (Vec<ActionType>, (ActionType, String));

/// Every maximal group of sub-paths with at least `min_support` members and
/// `2..=max_length` edges, ordered by start node, length, then signature.
/// `min_support` below 2 is treated as 2.
///
/// A group whose members are all tails of a longer group's members (the same
/// paths entered one step earlier) is dropped in favour of the longer one.
pub fn mine_shortcuts(tree: &ActTree, min_support: usize, max_length: usize) -> Vec<Shortcut> {
    let all = mine_groups(tree, min_support.max(2), max_length);
    let tails: Vec<BTreeSet<&[EdgeId]>> = all
        .iter()
        .map(|s| s.member_paths.iter().map(|p| &p[1..]).collect())
        .collect();
    let keep: Vec<bool> = all
        .iter()
        .map(|s| {
            !all.iter().zip(&tails).any(|(longer, t)| {
                longer.length == s.length + 1 && s.member_paths.iter().all(|p| t.contains(p.as_slice()))
            })
        })
        .collect();
    all.iter().zip(keep).filter(|(_, k)| *k).map(|(s, _)| s.clone()).collect()
}

fn mine_groups(tree: &ActTree, min_support: usize, max_length: usize) -> Vec<Shortcut> {
    let mut out = Vec::new();
    for start in tree.nodes().map(|n| n.node_id) {
        let mut paths = Vec::new();
        collect_paths(tree, start, max_length, &mut Vec::new(), &mut paths);
        let mut by_len: BTreeMap<usize, BTreeMap<GroupKey, Vec<Vec<EdgeId>>>> = BTreeMap::new();
        for p in paths.into_iter().filter(|p| p.len() >= 2) {
            let actions: Vec<&Action> = p.iter().map(|e| &tree.edge(*e).expect("live edge").action).collect();
            let (last, body) = actions.split_last().expect("non-empty path");
            let key = (body.iter().map(|a| action_type(a)).collect(), action_key(last));
            by_len.entry(p.len()).or_default().entry(key).or_default().push(p);
        }
        for (length, groups) in by_len {
            for ((type_signature, _), member_paths) in groups {
                if member_paths.len() < min_support {
                    continue;
                }
                let last = *member_paths[0].last().expect("non-empty path");
                out.push(Shortcut {
                    start_node: start,
                    length,
                    type_signature,
                    final_action: tree.edge(last).expect("live edge").action.clone(),
                    support: member_paths.len(),
                    member_paths,
                });
            }
        }
    }
    out
}

/// All shortcuts (with their index) whose body type sequence matches the
/// tail of the executed path and whose start node is where that tail
/// began. Empty unless the current node has no outgoing TREE edges.
///
/// `path_nodes` runs from the root to the current node and is one longer
/// than `path_actions`.
pub fn speculative_candidates<'a>(
    tree: &'a ActTree,
    path_nodes: &'a [NodeId],
    path_actions: &'a [Action],
    shortcuts: &'a [Shortcut],
) -> impl Iterator<Item = (usize, &'a Shortcut)> + 'a {
    debug_assert_eq!(path_nodes.len(), path_actions.len() + 1);
    let fresh = path_nodes
        .last()
        .is_some_and(|n| tree.outgoing_tree(*n).next().is_none());
    shortcuts.iter().enumerate().filter(move |(_, s)| {
        if !fresh {
            return false;
        }
        let k = s.length - 1;
        if path_actions.len() < k {
            return false;
        }
        let tail = &path_actions[path_actions.len() - k..];
        tail.iter().map(action_type).eq(s.type_signature.iter().copied())
            && path_nodes[path_nodes.len() - 1 - k] == s.start_node
    })
}

pub fn speculative_candidate(
    tree: &ActTree,
    path_nodes: &[NodeId],
    path_actions: &[Action],
    shortcuts: &[Shortcut],
) -> Option<Action> {
    speculative_candidates(tree, path_nodes, path_actions, shortcuts)
        .next()
        .map(|(_, s)| s.final_action.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Task, UIStateId};

    fn click(t: &str) -> Action {
        Action::click(t, None).unwrap()
    }

    fn record(tree: &mut ActTree, id: &str, acts: &[Action]) -> (Vec<NodeId>, Vec<Action>) {
        let task = Task::new(id, format!("task {id}"), "app", 0).unwrap();
        let mut nodes = vec![tree.root()];
        for a in acts {
            let at = *nodes.last().unwrap();
            let st = UIStateId::new("app", format!("{at}-{a}"));
            nodes.push(tree.record_step(at, a.clone(), &task, st).unwrap().node);
        }
        (nodes, acts.to_vec())
    }

    fn search(q: &str) -> Vec<Action> {
        vec![click("search bar"), Action::input(q), click("search button")]
    }

    #[test]
    fn search_example_is_mined() {
        let mut t = ActTree::new(UIStateId::new("app", "home"), 100).unwrap();
        record(&mut t, "a", &search("milk"));
        record(&mut t, "b", &search("eggs"));
        let sc = mine_shortcuts(&t, 2, 5);
        assert_eq!(sc.len(), 1, "{sc:?}");
        assert_eq!(sc[0].start_node, t.root());
        assert_eq!(sc[0].length, 3);
        assert_eq!(sc[0].type_signature, vec![ActionType::Click, ActionType::Input]);
        assert_eq!(sc[0].final_action, click("search button"));
        assert_eq!(sc[0].support, 2);
        assert_eq!(mine_shortcuts(&t, 2, 5), sc);
    }

    #[test]
    fn differing_final_actions_form_nothing() {
        let mut t = ActTree::new(UIStateId::new("app", "home"), 100).unwrap();
        record(&mut t, "a", &[click("x"), Action::input("1"), click("go")]);
        record(&mut t, "b", &[click("x"), Action::input("2"), click("stop")]);
        assert!(mine_shortcuts(&t, 2, 5).is_empty());
        let mut t = ActTree::new(UIStateId::new("app", "home"), 100).unwrap();
        record(&mut t, "a", &[click("x"), click("y")]);
        assert!(mine_shortcuts(&t, 2, 5).is_empty());
    }

    #[test]
    fn speculation_on_third_parameter() {
        let mut t = ActTree::new(UIStateId::new("app", "home"), 100).unwrap();
        record(&mut t, "a", &search("milk"));
        record(&mut t, "b", &search("eggs"));
        let sc = mine_shortcuts(&t, 2, 5);
        let (nodes, acts) = record(&mut t, "c", &search("tofu")[..2]);
        assert_eq!(speculative_candidate(&t, &nodes, &acts, &sc), Some(click("search button")));
        // too short
        assert_eq!(speculative_candidate(&t, &nodes[..2], &acts[..1], &sc), None);
    }

    #[test]
    fn speculation_needs_matching_start_node() {
        let mut t = ActTree::new(UIStateId::new("app", "home"), 100).unwrap();
        record(&mut t, "a", &search("milk"));
        record(&mut t, "b", &search("eggs"));
        let sc = mine_shortcuts(&t, 2, 5);
        let mut acts = vec![click("menu")];
        acts.extend(search("tofu")[..2].iter().cloned());
        let (nodes, acts) = record(&mut t, "c", &acts);
        // the body types match but start two levels lower than the shortcut
        assert_eq!(speculative_candidate(&t, &nodes, &acts, &sc), None);
    }
}
