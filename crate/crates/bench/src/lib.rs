//! Fixtures shared by the benchmarks.

use agentrr_core::{ActTree, Action, Task, UIStateId};

/// A tree holding `tasks` chains of `depth` clicks. Task `i` shares its
/// first `i % depth` actions with every other task.
pub fn synthetic_tree(tasks: usize, depth: usize, capacity: usize) -> ActTree {
    let mut tree = ActTree::new(UIStateId::new("bench", "home"), capacity).expect("positive capacity");
    for i in 0..tasks {
        let task = Task::new(format!("t{i}"), format!("bench task {i}"), "bench", i as u64).expect("valid task");
        let mut at = tree.root();
        for d in 0..depth {
            let target = if d < i % depth { format!("shared {d}") } else { format!("item {i} {d}") };
            let action = Action::click(target, None).expect("non-empty target");
            let state = UIStateId::new("bench", format!("{i}-{d}"));
            at = tree.record_step(at, action, &task, state).expect("live node").node;
        }
    }
    tree
}
