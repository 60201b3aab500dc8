//! Record-and-replay acceleration for GUI-driven agents.
//!
//! Executed task trajectories are cached in an [`ActTree`], a prefix tree whose
//! nodes are UI states and whose edges carry an action plus the tasks that
//! performed it. A two-stage latent memory (embedding gate, then reranker)
//! decides whether a cached action may be replayed for a new task; otherwise
//! the [`Tracer`] falls back to the agent model.
//!
//! The [`sim`] module bundles deterministic app simulators, workload
//! generators and an experiment runner for measuring replay rates.

pub mod acttree;
pub mod domain;
pub mod error;
pub mod geometry;
pub mod latent;
pub mod shortcuts;
pub mod sim;
pub mod trace_io;
pub mod tracer;

pub use acttree::{ActTree, EdgeId, EdgeKind, GroundedRecord, NodeId, Recorded, TreeEdge, TreeNode};
pub use domain::{
    action_equals, action_type, Action, ActionType, BBox, Direction, Experience, ExperienceLevel,
    Step, Task, TaskId, Trajectory, UIStateId,
};
pub use error::{Error, Result};
pub use geometry::{center, content_reward, grounding_reward, iou, RewardConfig};
pub use latent::{
    cosine_similarity, embed_reuse, gen_training_triples, infonce_loss, prefix_len, rerank_reuse,
    select_candidates, AdversarialEmbedder, EmbeddingModel, HashedBagEmbedder, JaccardReranker,
    LatentMemory, RerankModel, ReuseConfig, TrainingTriple, TripleSet,
};
pub use shortcuts::{mine_shortcuts, speculative_candidate, Shortcut};
pub use tracer::{
    check_ui, AgentCallback, Environment, ExecutionReport, Recovery, ScreenParser, StepRecord,
    StepSource, Tracer, TracerConfig,
};
