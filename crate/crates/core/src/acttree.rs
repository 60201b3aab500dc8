//! The trajectory cache.
//!
//! Nodes are UI states; TREE edges carry the action that caused a transition
//! and the set of tasks that performed it. Recording an action that equals an
//! existing outgoing action merges into that edge instead of growing the tree,
//! so tasks sharing an action prefix share a root path.
//!
//! BACKTRACK edges lead from a node to one of its ancestors and CROSS edges
//! link unrelated subtrees with an opaque message. Capacity is counted in
//! edges; [`ActTree::evict_lru`] removes least recently used leaf edges.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{action_equals, Action, BBox, Task, TaskId, UIStateId};
use crate::error::{Error, Result};

pub const TREE_FORMAT: &str = "agentrr-tree";
pub const TREE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EdgeKind {
    Tree,
    Backtrack,
    Cross,
}

/// Box and on-screen content captured the first time a click was grounded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedRecord {
    pub bbox: BBox,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub node_id: NodeId,
    pub state: UIStateId,
    pub depth: usize,
    #[serde(default)]
    pub plan_annotation: Option<String>,
    pub last_used_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub edge_id: EdgeId,
    pub from_node: NodeId,
    pub to_node: NodeId,
    pub action: Action,
    #[serde(default)]
    pub grounded_record: Option<GroundedRecord>,
    pub task_ids: BTreeSet<TaskId>,
    pub kind: EdgeKind,
    #[serde(default)]
    pub message: Option<String>,
    pub last_used_at: u64,
}

/// Result of [`ActTree::record_step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Recorded {
    pub node: NodeId,
    pub edge: EdgeId,
    pub merged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TreeDocument {
    format: String,
    version: u32,
    root: NodeId,
    capacity: usize,
    use_counter: u64,
    next_node_id: u64,
    next_edge_id: u64,
    tasks: Vec<Task>,
    nodes: Vec<TreeNode>,
    edges: Vec<TreeEdge>,
}

#[derive(Debug, Clone)]
pub struct ActTree {
    root: NodeId,
    capacity: usize,
    use_counter: u64,
    next_node_id: u64,
    next_edge_id: u64,
    nodes: BTreeMap<NodeId, TreeNode>,
    edges: BTreeMap<EdgeId, TreeEdge>,
    tasks: BTreeMap<TaskId, Task>,
    // derived indexes, rebuilt on load
    outgoing: BTreeMap<NodeId, Vec<EdgeId>>,
    incoming: BTreeMap<NodeId, Vec<EdgeId>>,
    parent_edge: BTreeMap<NodeId, EdgeId>,
}

impl PartialEq for ActTree {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
            && self.capacity == other.capacity
            && self.use_counter == other.use_counter
            && self.next_node_id == other.next_node_id
            && self.next_edge_id == other.next_edge_id
            && self.nodes == other.nodes
            && self.edges == other.edges
            && self.tasks == other.tasks
    }
}

impl ActTree {
    pub fn new(root_state: UIStateId, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("tree capacity must be at least 1".into()));
        }
        let root = NodeId(0);
        let mut nodes = BTreeMap::new();
        nodes.insert(
            root,
            TreeNode {
                node_id: root,
                state: root_state,
                depth: 0,
                plan_annotation: None,
                last_used_at: 0,
            },
        );
        Ok(Self {
            root,
            capacity,
            use_counter: 0,
            next_node_id: 1,
            next_edge_id: 0,
            nodes,
            edges: BTreeMap::new(),
            tasks: BTreeMap::new(),
            outgoing: BTreeMap::new(),
            incoming: BTreeMap::new(),
            parent_edge: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn root_state(&self) -> &UIStateId {
        &self.nodes[&self.root].state
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn set_capacity(&mut self, capacity: usize) -> Result<()> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("tree capacity must be at least 1".into()));
        }
        self.capacity = capacity;
        Ok(())
    }

    pub fn use_counter(&self) -> u64 {
        self.use_counter
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: NodeId) -> Result<&TreeNode> {
        self.nodes.get(&id).ok_or(Error::UnknownNode(id))
    }

    pub fn edge(&self, id: EdgeId) -> Result<&TreeEdge> {
        self.edges.get(&id).ok_or(Error::UnknownEdge(id))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &TreeEdge> {
        self.edges.values()
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn task(&self, id: &TaskId) -> Option<&Task> {
        self.tasks.get(id)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &Task> {
        self.tasks.values()
    }

    pub fn register_task(&mut self, task: &Task) {
        self.tasks.entry(task.id.clone()).or_insert_with(|| task.clone());
    }

    /// All outgoing edges of `node`, in creation order.
    pub fn outgoing(&self, node: NodeId) -> impl Iterator<Item = &TreeEdge> {
        self.outgoing
            .get(&node)
            .into_iter()
            .flatten()
            .map(move |e| &self.edges[e])
    }

    pub fn outgoing_tree(&self, node: NodeId) -> impl Iterator<Item = &TreeEdge> {
        self.outgoing(node).filter(|e| e.kind == EdgeKind::Tree)
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.parent_edge.get(&node).map(|e| self.edges[e].from_node)
    }

    pub fn parent_edge(&self, node: NodeId) -> Option<EdgeId> {
        self.parent_edge.get(&node).copied()
    }

    /// Strict ancestor test along TREE edges.
    pub fn is_ancestor(&self, ancestor: NodeId, node: NodeId) -> bool {
        let mut cur = node;
        while let Some(p) = self.parent(cur) {
            if p == ancestor {
                return true;
            }
            cur = p;
        }
        false
    }

    /// TREE edges from the root down to `node`.
    pub fn path_to(&self, node: NodeId) -> Vec<EdgeId> {
        let mut path = Vec::new();
        let mut cur = node;
        while let Some(e) = self.parent_edge.get(&cur) {
            path.push(*e);
            cur = self.edges[e].from_node;
        }
        path.reverse();
        path
    }

    fn tick(&mut self) -> u64 {
        self.use_counter += 1;
        self.use_counter
    }

    pub fn touch_edge(&mut self, id: EdgeId) -> Result<()> {
        if !self.edges.contains_key(&id) {
            return Err(Error::UnknownEdge(id));
        }
        let t = self.tick();
        let edge = self.edges.get_mut(&id).expect("checked");
        edge.last_used_at = t;
        let to = edge.to_node;
        if let Some(n) = self.nodes.get_mut(&to) {
            n.last_used_at = t;
        }
        Ok(())
    }

    fn insert_edge(&mut self, edge: TreeEdge) -> EdgeId {
        let id = edge.edge_id;
        self.outgoing.entry(edge.from_node).or_default().push(id);
        self.incoming.entry(edge.to_node).or_default().push(id);
        if edge.kind == EdgeKind::Tree {
            self.parent_edge.insert(edge.to_node, id);
        }
        self.edges.insert(id, edge);
        id
    }

    fn fresh_edge_id(&mut self) -> EdgeId {
        let id = EdgeId(self.next_edge_id);
        self.next_edge_id += 1;
        id
    }

    /// Records that `task` performed `action` at node `at`, reaching
    /// `resulting_state`.
    ///
    /// If an outgoing TREE edge already carries an equal action the task is
    /// added to its task list and its target is returned; the resulting state
    /// is not compared.
    pub fn record_step(
        &mut self,
        at: NodeId,
        action: Action,
        task: &Task,
        resulting_state: UIStateId,
    ) -> Result<Recorded> {
        let depth = self.node(at)?.depth;
        self.register_task(task);
        let existing = self
            .outgoing_tree(at)
            .find(|e| action_equals(&e.action, &action))
            .map(|e| e.edge_id);
        if let Some(id) = existing {
            let edge = self.edges.get_mut(&id).expect("indexed edge");
            edge.task_ids.insert(task.id.clone());
            let node = edge.to_node;
            self.touch_edge(id)?;
            return Ok(Recorded { node, edge: id, merged: true });
        }

        let t = self.tick();
        let node = NodeId(self.next_node_id);
        self.next_node_id += 1;
        self.nodes.insert(
            node,
            TreeNode {
                node_id: node,
                state: resulting_state,
                depth: depth + 1,
                plan_annotation: None,
                last_used_at: t,
            },
        );
        let edge_id = self.fresh_edge_id();
        self.insert_edge(TreeEdge {
            edge_id,
            from_node: at,
            to_node: node,
            action,
            grounded_record: None,
            task_ids: BTreeSet::from([task.id.clone()]),
            kind: EdgeKind::Tree,
            message: None,
            last_used_at: t,
        });
        Ok(Recorded { node, edge: edge_id, merged: false })
    }

    pub fn set_grounded(&mut self, edge: EdgeId, record: Option<GroundedRecord>) -> Result<()> {
        let e = self.edges.get_mut(&edge).ok_or(Error::UnknownEdge(edge))?;
        e.grounded_record = record;
        Ok(())
    }

    pub fn annotate_plan(&mut self, node: NodeId, plan: impl Into<String>) -> Result<()> {
        let n = self.nodes.get_mut(&node).ok_or(Error::UnknownNode(node))?;
        n.plan_annotation = Some(plan.into());
        Ok(())
    }

    /// Adds a Back edge from `from` to its ancestor `to`. An existing
    /// BACKTRACK edge between the same nodes is touched and returned instead.
    pub fn add_backtrack_edge(&mut self, from: NodeId, to: NodeId) -> Result<EdgeId> {
        self.node(from)?;
        self.node(to)?;
        if !self.is_ancestor(to, from) {
            return Err(Error::NotAncestor { from, to });
        }
        let existing = self
            .outgoing(from)
            .find(|e| e.kind == EdgeKind::Backtrack && e.to_node == to)
            .map(|e| e.edge_id);
        if let Some(id) = existing {
            self.touch_edge(id)?;
            return Ok(id);
        }
        let t = self.tick();
        let edge_id = self.fresh_edge_id();
        Ok(self.insert_edge(TreeEdge {
            edge_id,
            from_node: from,
            to_node: to,
            action: Action::Back,
            grounded_record: None,
            task_ids: BTreeSet::new(),
            kind: EdgeKind::Backtrack,
            message: None,
            last_used_at: t,
        }))
    }

    /// Links two nodes in unrelated subtrees. The message is stored verbatim.
    pub fn add_cross_edge(&mut self, from: NodeId, to: NodeId, message: impl Into<String>) -> Result<EdgeId> {
        self.node(from)?;
        self.node(to)?;
        if from == to || self.is_ancestor(from, to) || self.is_ancestor(to, from) {
            return Err(Error::AncestorRelation(from, to));
        }
        let t = self.tick();
        let edge_id = self.fresh_edge_id();
        Ok(self.insert_edge(TreeEdge {
            edge_id,
            from_node: from,
            to_node: to,
            action: Action::Back,
            grounded_record: None,
            task_ids: BTreeSet::new(),
            kind: EdgeKind::Cross,
            message: Some(message.into()),
            last_used_at: t,
        }))
    }

    /// Follows TREE edges from the root matching `actions` in order.
    pub fn node_at_prefix<'a>(&self, actions: impl IntoIterator<Item = &'a Action>) -> Option<NodeId> {
        let mut cur = self.root;
        for a in actions {
            cur = self.outgoing_tree(cur).find(|e| action_equals(&e.action, a))?.to_node;
        }
        Some(cur)
    }

    pub fn evict_lru(&mut self) -> Vec<EdgeId> {
        self.evict_lru_protecting(&BTreeSet::new())
    }

    /// Evicts until the edge count fits the capacity, never touching edges in
    /// `protected`.
    ///
    /// Leaf TREE edges (whose target has no TREE children) are evicted in
    /// ascending `last_used_at` order together with their target node and
    /// any BACKTRACK/CROSS edges attached to it. Interior edges only become
    /// candidates once their subtree is gone.
    pub fn evict_lru_protecting(&mut self, protected: &BTreeSet<EdgeId>) -> Vec<EdgeId> {
        let mut evicted = Vec::new();
        while self.edges.len() > self.capacity {
            let leaf = self
                .edges
                .values()
                .filter(|e| e.kind == EdgeKind::Tree && !protected.contains(&e.edge_id))
                .filter(|e| self.outgoing_tree(e.to_node).next().is_none())
                .min_by_key(|e| (e.last_used_at, e.edge_id))
                .map(|e| e.edge_id);
            if let Some(id) = leaf {
                let node = self.edges[&id].to_node;
                evicted.extend(self.remove_node(node));
                continue;
            }
            let other = self
                .edges
                .values()
                .filter(|e| e.kind != EdgeKind::Tree && !protected.contains(&e.edge_id))
                .min_by_key(|e| (e.last_used_at, e.edge_id))
                .map(|e| e.edge_id);
            match other {
                Some(id) => {
                    self.remove_edge(id);
                    evicted.push(id);
                }
                None => break,
            }
        }
        if !evicted.is_empty() {
            self.prune_tasks();
        }
        evicted
    }

    /// Removes a childless node with its parent edge and attached non-tree
    /// edges; returns the removed edge ids, parent edge first.
    fn remove_node(&mut self, node: NodeId) -> Vec<EdgeId> {
        let parent = self.parent_edge.get(&node).copied();
        let attached: BTreeSet<EdgeId> = self
            .outgoing
            .get(&node)
            .into_iter()
            .flatten()
            .chain(self.incoming.get(&node).into_iter().flatten())
            .copied()
            .filter(|e| Some(*e) != parent)
            .collect();
        let mut removed: Vec<EdgeId> = parent.into_iter().collect();
        removed.extend(attached);
        for e in &removed {
            self.remove_edge(*e);
        }
        self.nodes.remove(&node);
        self.outgoing.remove(&node);
        self.incoming.remove(&node);
        removed
    }

    fn remove_edge(&mut self, id: EdgeId) {
        if let Some(e) = self.edges.remove(&id) {
            if let Some(v) = self.outgoing.get_mut(&e.from_node) {
                v.retain(|x| *x != id);
            }
            if let Some(v) = self.incoming.get_mut(&e.to_node) {
                v.retain(|x| *x != id);
            }
            if e.kind == EdgeKind::Tree {
                self.parent_edge.remove(&e.to_node);
            }
        }
    }

    fn prune_tasks(&mut self) {
        let live: BTreeSet<&TaskId> = self.edges.values().flat_map(|e| e.task_ids.iter()).collect();
        self.tasks.retain(|id, _| live.contains(id));
    }

    /// Count of nodes per depth, index = depth.
    pub fn depth_histogram(&self) -> Vec<usize> {
        let mut hist = Vec::new();
        for n in self.nodes.values() {
            if hist.len() <= n.depth {
                hist.resize(n.depth + 1, 0);
            }
            hist[n.depth] += 1;
        }
        hist
    }

    /// Distinct tasks on TREE edges leaving each depth, index = depth.
    pub fn tasks_per_layer(&self) -> Vec<usize> {
        let mut layers: Vec<BTreeSet<&TaskId>> = Vec::new();
        for e in self.edges.values().filter(|e| e.kind == EdgeKind::Tree) {
            let d = self.nodes[&e.from_node].depth;
            if layers.len() <= d {
                layers.resize_with(d + 1, BTreeSet::new);
            }
            layers[d].extend(e.task_ids.iter());
        }
        layers.into_iter().map(|s| s.len()).collect()
    }

    fn to_document(&self) -> TreeDocument {
        TreeDocument {
            format: TREE_FORMAT.to_owned(),
            version: TREE_VERSION,
            root: self.root,
            capacity: self.capacity,
            use_counter: self.use_counter,
            next_node_id: self.next_node_id,
            next_edge_id: self.next_edge_id,
            tasks: self.tasks.values().cloned().collect(),
            nodes: self.nodes.values().cloned().collect(),
            edges: self.edges.values().cloned().collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        serde_json::to_writer_pretty(&mut w, &self.to_document())?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn save_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.save(File::create(path)?)
    }

    pub fn load<R: Read>(reader: R) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_reader(BufReader::new(reader)).map_err(|e| Error::Malformed(e.to_string()))?;
        let format = value.get("format").and_then(|v| v.as_str());
        if format != Some(TREE_FORMAT) {
            return Err(Error::Malformed(format!("expected format {TREE_FORMAT:?}, found {format:?}")));
        }
        let version = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Malformed("missing version".into()))?;
        if version != u64::from(TREE_VERSION) {
            return Err(Error::VersionMismatch {
                format: TREE_FORMAT,
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: TREE_VERSION,
            });
        }
        let doc: TreeDocument = serde_json::from_value(value).map_err(|e| Error::Malformed(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn load_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::load(File::open(path)?)
    }

    fn from_document(doc: TreeDocument) -> Result<Self> {
        let bad = |m: String| Error::Malformed(m);
        if doc.capacity == 0 {
            return Err(bad("capacity must be positive".into()));
        }
        let mut tree = ActTree {
            root: doc.root,
            capacity: doc.capacity,
            use_counter: doc.use_counter,
            next_node_id: doc.next_node_id,
            next_edge_id: doc.next_edge_id,
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            tasks: doc.tasks.into_iter().map(|t| (t.id.clone(), t)).collect(),
            outgoing: BTreeMap::new(),
            incoming: BTreeMap::new(),
            parent_edge: BTreeMap::new(),
        };
        for n in doc.nodes {
            if n.node_id.0 >= tree.next_node_id {
                return Err(bad(format!("node {} beyond id counter", n.node_id)));
            }
            if tree.nodes.insert(n.node_id, n).is_some() {
                return Err(bad("duplicate node id".into()));
            }
        }
        let root = tree.nodes.get(&tree.root).ok_or_else(|| bad("root node missing".into()))?;
        if root.depth != 0 {
            return Err(bad("root depth must be 0".into()));
        }
        for e in doc.edges {
            if e.edge_id.0 >= tree.next_edge_id || tree.edges.contains_key(&e.edge_id) {
                return Err(bad(format!("bad edge id {}", e.edge_id)));
            }
            let (Some(from), Some(to)) = (tree.nodes.get(&e.from_node), tree.nodes.get(&e.to_node)) else {
                return Err(bad(format!("edge {} references a missing node", e.edge_id)));
            };
            if e.kind == EdgeKind::Tree {
                if to.depth != from.depth + 1 {
                    return Err(bad(format!("edge {} breaks depth ordering", e.edge_id)));
                }
                if e.task_ids.is_empty() {
                    return Err(bad(format!("tree edge {} has no tasks", e.edge_id)));
                }
                if e.to_node == tree.root || tree.parent_edge.contains_key(&e.to_node) {
                    return Err(bad(format!("node {} has several parents", e.to_node)));
                }
            }
            tree.insert_edge(e);
        }
        for n in tree.nodes.keys() {
            if *n != tree.root && !tree.parent_edge.contains_key(n) {
                return Err(bad(format!("node {n} is unreachable from the root")));
            }
        }
        for e in tree.edges.values() {
            if e.kind == EdgeKind::Backtrack && !tree.is_ancestor(e.to_node, e.from_node) {
                return Err(bad(format!("backtrack edge {} does not lead to an ancestor", e.edge_id)));
            }
        }
        Ok(tree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(fp: &str) -> UIStateId {
        UIStateId::new("app", fp)
    }

    fn task(id: &str) -> Task {
        Task::new(id, format!("task {id}"), "app", 0).unwrap()
    }

    fn click(t: &str) -> Action {
        Action::click(t, None).unwrap()
    }

    #[test]
    fn new_tree_shape() {
        let t = ActTree::new(st("home"), 100).unwrap();
        assert_eq!((t.node_count(), t.edge_count()), (1, 0));
        assert!(ActTree::new(st("home"), 1).is_ok());
        assert!(ActTree::new(st("home"), 0).is_err());
    }

    #[test]
    fn record_merges_equal_actions() {
        let mut t = ActTree::new(st("home"), 100).unwrap();
        let a = t.record_step(t.root(), click("search bar"), &task("t1"), st("s")).unwrap();
        let b = t.record_step(t.root(), click("Search Bar"), &task("t2"), st("s")).unwrap();
        assert_eq!(a.node, b.node);
        assert!(b.merged && !a.merged);
        assert_eq!(t.edge_count(), 1);
        let ids: Vec<_> = t.edge(a.edge).unwrap().task_ids.iter().map(|x| x.0.as_str()).collect();
        assert_eq!(ids, ["t1", "t2"]);
        assert_eq!(t.node(a.node).unwrap().depth, 1);
    }

    #[test]
    fn different_actions_branch() {
        let mut t = ActTree::new(st("home"), 100).unwrap();
        let a = t.record_step(t.root(), click("a"), &task("t1"), st("a")).unwrap();
        let b = t.record_step(t.root(), click("b"), &task("t1"), st("b")).unwrap();
        assert_ne!(a.node, b.node);
        assert_eq!((t.node_count(), t.edge_count()), (3, 2));
        assert!(t.record_step(NodeId(99), click("c"), &task("t1"), st("c")).is_err());
    }

    #[test]
    fn backtrack_rules() {
        let mut t = ActTree::new(st("home"), 100).unwrap();
        let a = t.record_step(t.root(), click("a"), &task("t1"), st("a")).unwrap().node;
        let b = t.record_step(a, click("b"), &task("t1"), st("b")).unwrap().node;
        let e = t.add_backtrack_edge(b, a).unwrap();
        assert_eq!(t.edge(e).unwrap().kind, EdgeKind::Backtrack);
        assert_eq!(t.edge(e).unwrap().action, Action::Back);
        assert_eq!(t.add_backtrack_edge(b, a).unwrap(), e);
        assert!(t.add_backtrack_edge(b, t.root()).is_ok());
        assert!(t.add_backtrack_edge(a, a).is_err());
        assert!(t.add_backtrack_edge(a, b).is_err());
    }

    #[test]
    fn cross_rules() {
        let mut t = ActTree::new(st("home"), 100).unwrap();
        let a = t.record_step(t.root(), click("a"), &task("t1"), st("a")).unwrap().node;
        let b = t.record_step(t.root(), click("b"), &task("t2"), st("b")).unwrap().node;
        let e = t.add_cross_edge(a, b, "order_id=42").unwrap();
        assert_eq!(t.edge(e).unwrap().message.as_deref(), Some("order_id=42"));
        assert!(t.add_cross_edge(a, a, "x").is_err());
        assert!(t.add_cross_edge(t.root(), a, "x").is_err());
    }

    #[test]
    fn prefix_lookup() {
        let mut t = ActTree::new(st("home"), 100).unwrap();
        let acts = [click("a"), Action::input("x"), Action::Done];
        let mut cur = t.root();
        for a in &acts {
            cur = t.record_step(cur, a.clone(), &task("t1"), st(&format!("{a}"))).unwrap().node;
        }
        assert_eq!(t.node_at_prefix([]), Some(t.root()));
        assert_eq!(t.node_at_prefix(acts.iter()), Some(cur));
        assert_eq!(t.node_at_prefix([&click("zzz")]), None);
    }

    #[test]
    fn lru_evicts_oldest() {
        let mut t = ActTree::new(st("home"), 2).unwrap();
        let e1 = t.record_step(t.root(), click("1"), &task("t1"), st("1")).unwrap().edge;
        let e2 = t.record_step(t.root(), click("2"), &task("t2"), st("2")).unwrap().edge;
        assert!(t.evict_lru().is_empty());
        t.record_step(t.root(), click("3"), &task("t3"), st("3")).unwrap();
        assert_eq!(t.evict_lru(), vec![e1]);
        assert!(t.task(&"t1".into()).is_none());

        let mut t = ActTree::new(st("home"), 2).unwrap();
        t.record_step(t.root(), click("1"), &task("t1"), st("1")).unwrap();
        let e2b = t.record_step(t.root(), click("2"), &task("t2"), st("2")).unwrap().edge;
        t.record_step(t.root(), click("1"), &task("t1"), st("1")).unwrap();
        t.record_step(t.root(), click("3"), &task("t3"), st("3")).unwrap();
        assert_eq!(t.evict_lru(), vec![e2b]);
        let _ = e2;
    }

    #[test]
    fn eviction_prefers_leaves_and_respects_protection() {
        let mut t = ActTree::new(st("home"), 2).unwrap();
        let r1 = t.record_step(t.root(), click("a"), &task("t1"), st("a")).unwrap();
        let r2 = t.record_step(r1.node, click("b"), &task("t1"), st("b")).unwrap();
        let r3 = t.record_step(t.root(), click("c"), &task("t2"), st("c")).unwrap();
        // r1 is oldest but interior; its leaf child goes first
        assert_eq!(t.evict_lru_protecting(&BTreeSet::from([r1.edge, r2.edge])), vec![r3.edge]);
        t.record_step(t.root(), click("d"), &task("t3"), st("d")).unwrap();
        assert_eq!(t.evict_lru(), vec![r2.edge]);
    }

    #[test]
    fn eviction_takes_attached_edges() {
        let mut t = ActTree::new(st("home"), 3).unwrap();
        let a = t.record_step(t.root(), click("a"), &task("t1"), st("a")).unwrap();
        let b = t.record_step(a.node, click("b"), &task("t1"), st("b")).unwrap();
        let bt = t.add_backtrack_edge(b.node, a.node).unwrap();
        t.touch_edge(a.edge).unwrap();
        t.touch_edge(bt).unwrap();
        t.record_step(t.root(), click("c"), &task("t2"), st("c")).unwrap();
        let ev = t.evict_lru();
        assert_eq!(ev, vec![b.edge, bt]);
        assert_eq!(t.edge_count(), 2);
    }

    #[test]
    fn save_load_roundtrip() {
        let mut t = ActTree::new(st("home"), 10).unwrap();
        let a = t.record_step(t.root(), click("a"), &task("t1"), st("a")).unwrap();
        let b = t.record_step(t.root(), click("b"), &task("t2"), st("b")).unwrap();
        t.set_grounded(
            a.edge,
            Some(GroundedRecord { bbox: BBox::new(0, 0, 5, 5).unwrap(), content: "a".into() }),
        )
        .unwrap();
        t.add_cross_edge(a.node, b.node, "msg").unwrap();
        t.annotate_plan(t.root(), "open app").unwrap();
        let mut buf = Vec::new();
        t.save(&mut buf).unwrap();
        let back = ActTree::load(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.outgoing(a.node).count(), 1);
    }

    #[test]
    fn load_rejects_bad_documents() {
        let t = ActTree::new(st("home"), 10).unwrap();
        let json = t.to_json().unwrap();
        let bumped = json.replace("\"version\": 1", "\"version\": 999");
        assert!(matches!(ActTree::load(bumped.as_bytes()), Err(Error::VersionMismatch { found: 999, .. })));
        let truncated = &json[..json.len() / 2];
        assert!(matches!(ActTree::load(truncated.as_bytes()), Err(Error::Malformed(_))));
    }
}
