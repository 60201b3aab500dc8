//! Two-stage reuse decision.
//!
//! Stage one gates historical tasks by cosine similarity of layer-conditioned
//! task embeddings (`>= tau1`) and keeps the `top_k` best; stage two asks a
//! reranker for a confidence score and reuses when any candidate reaches
//! `tau2`. Training support covers triple construction from shared action
//! prefixes and the InfoNCE loss.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{action_equals, Task, Trajectory};
use crate::error::{Error, Result};

pub const DEFAULT_TEMPERATURE: f64 = 0.05;

/// Layer-conditioned task encoder. Outputs must have unit L2 norm and may
/// depend only on the task's app, description and the layer; candidate
/// selection embeds each distinct description once.
pub trait EmbeddingModel: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, task: &Task, layer: usize) -> Result<Vec<f64>>;
}

/// Confidence in `[0, 1]` that `current` may reuse the action `candidate`
/// took at `layer`.
pub trait RerankModel: Send + Sync {
    fn score(&self, candidate: &Task, current: &Task, layer: usize) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReuseConfig {
    pub tau1: f64,
    pub tau2: f64,
    pub top_k: usize,
    pub embedding_dim: usize,
}

impl Default for ReuseConfig {
    fn default() -> Self {
        Self {
            tau1: 0.7,
            tau2: 0.6,
            top_k: 5,
            embedding_dim: 256,
        }
    }
}

impl ReuseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.tau1) {
            return Err(Error::InvalidConfig(format!("tau1 must lie in [-1, 1], got {}", self.tau1)));
        }
        if !(0.0..=1.0).contains(&self.tau2) {
            return Err(Error::InvalidConfig(format!("tau2 must lie in [0, 1], got {}", self.tau2)));
        }
        if self.top_k == 0 || self.embedding_dim == 0 {
            return Err(Error::InvalidConfig("top_k and embedding_dim must be positive".into()));
        }
        Ok(())
    }
}

pub(crate) fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hashed bag of tokens over the lower-cased description plus a `layer=<l>`
/// token, L2-normalized.
#[derive(Debug, Clone)]
pub struct HashedBagEmbedder {
    dim: usize,
    seed: u64,
}

impl HashedBagEmbedder {
    pub const DEFAULT_SEED: u64 = 0x5eed_a11c_e5ca_c4e0;

    pub fn new(dim: usize) -> Self {
        Self::with_seed(dim, Self::DEFAULT_SEED)
    }

    pub fn with_seed(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, seed }
    }
}

impl Default for HashedBagEmbedder {
    fn default() -> Self {
        Self::new(256)
    }
}

impl EmbeddingModel for HashedBagEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, task: &Task, layer: usize) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.dim];
        let layer_tag = format!("layer={layer}");
        for tok in tokens(&task.description).chain(std::iter::once(layer_tag)) {
            let bucket = (fnv1a(self.seed, tok.as_bytes()) % self.dim as u64) as usize;
            v[bucket] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

/// Maps every task to the same unit vector, so every pair looks identical.
#[derive(Debug, Clone)]
pub struct AdversarialEmbedder {
    dim: usize,
}

impl AdversarialEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl EmbeddingModel for AdversarialEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, _task: &Task, _layer: usize) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.dim];
        v[0] = 1.0;
        Ok(v)
    }
}

/// Jaccard overlap of description token sets.
#[derive(Debug, Clone, Copy, Default)]
pub struct JaccardReranker;

impl RerankModel for JaccardReranker {
    fn score(&self, candidate: &Task, current: &Task, _layer: usize) -> Result<f64> {
        let a: BTreeSet<String> = tokens(&candidate.description).collect();
        let b: BTreeSet<String> = tokens(&current.description).collect();
        let union = a.union(&b).count();
        if union == 0 {
            return Ok(1.0);
        }
        Ok(a.intersection(&b).count() as f64 / union as f64)
    }
}

/// Embedder, reranker and thresholds bundled for the tracer.
pub struct LatentMemory {
    pub embedder: Box<dyn EmbeddingModel>,
    pub reranker: Box<dyn RerankModel>,
    pub config: ReuseConfig,
}

impl LatentMemory {
    pub fn new(
        embedder: Box<dyn EmbeddingModel>,
        reranker: Box<dyn RerankModel>,
        config: ReuseConfig,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self { embedder, reranker, config })
    }

    /// Hashed-bag embedder and Jaccard reranker.
    pub fn reference(config: ReuseConfig) -> Result<Self> {
        Self::new(
            Box::new(HashedBagEmbedder::new(config.embedding_dim)),
            Box::new(JaccardReranker),
            config,
        )
    }

    pub fn adversarial(config: ReuseConfig) -> Result<Self> {
        Self::new(
            Box::new(AdversarialEmbedder::new(config.embedding_dim)),
            Box::new(JaccardReranker),
            config,
        )
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Stage one: similarity of the two tasks' layer embeddings reaches `tau1`.
pub fn embed_reuse(
    ti: &Task,
    tj: &Task,
    layer: usize,
    model: &dyn EmbeddingModel,
    cfg: &ReuseConfig,
) -> Result<bool> {
    let s = cosine_similarity(&model.embed(ti, layer)?, &model.embed(tj, layer)?)?;
    Ok(s >= cfg.tau1)
}

#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub task: &'a Task,
    pub similarity: f64,
}

/// Historical tasks passing stage one, most similar first (ties: newest
/// first), capped at `top_k`.
pub fn select_candidates<'a>(
    current: &Task,
    hist: &'a [Task],
    layer: usize,
    model: &dyn EmbeddingModel,
    cfg: &ReuseConfig,
) -> Result<Vec<Candidate<'a>>> {
    select_candidates_from(current, hist.iter(), layer, model, cfg)
}

pub fn select_candidates_from<'a>(
    current: &Task,
    hist: impl IntoIterator<Item = &'a Task>,
    layer: usize,
    model: &dyn EmbeddingModel,
    cfg: &ReuseConfig,
) -> Result<Vec<Candidate<'a>>> {
    let v = model.embed(current, layer)?;
    let mut seen: HashMap<(&str, &str), f64> = HashMap::new();
    let mut out = Vec::new();
    for task in hist {
        let key = (task.app_id.as_str(), task.description.as_str());
        let similarity = match seen.get(&key) {
            Some(s) => *s,
            None => {
                let s = cosine_similarity(&model.embed(task, layer)?, &v)?;
                seen.insert(key, s);
                s
            }
        };
        if similarity >= cfg.tau1 {
            out.push(Candidate { task, similarity });
        }
    }
    out.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then(b.task.created_at.cmp(&a.task.created_at))
            .then(a.task.id.cmp(&b.task.id))
    });
    out.truncate(cfg.top_k);
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct RerankDecision<'a> {
    pub reuse: bool,
    pub best: Option<&'a Task>,
    pub score: Option<f64>,
}

/// Stage two: reuse iff some candidate scores at least `tau2`; `best` is the
/// top-scoring qualifying candidate (ties: newest).
pub fn rerank_reuse<'a>(
    candidates: &[&'a Task],
    current: &Task,
    layer: usize,
    model: &dyn RerankModel,
    cfg: &ReuseConfig,
) -> Result<RerankDecision<'a>> {
    let mut best: Option<(&'a Task, f64)> = None;
    for &cand in candidates {
        let s = model.score(cand, current, layer)?;
        if s < cfg.tau2 {
            continue;
        }
        let better = match best {
            None => true,
            Some((b, bs)) => s > bs || (s == bs && cand.created_at > b.created_at),
        };
        if better {
            best = Some((cand, s));
        }
    }
    Ok(RerankDecision {
        reuse: best.is_some(),
        best: best.map(|b| b.0),
        score: best.map(|b| b.1),
    })
}

/// Length of the shared action prefix.
pub fn prefix_len(a: &Trajectory, b: &Trajectory) -> usize {
    a.actions().zip(b.actions()).take_while(|(x, y)| action_equals(x, y)).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTriple {
    #[serde(rename = "anchor_task")]
    pub anchor: Task,
    pub layer: usize,
    #[serde(rename = "positive_task")]
    pub positive: Task,
    #[serde(rename = "negative_tasks")]
    pub negatives: Vec<Task>,
}

#[derive(Debug, Clone, Default)]
pub struct TripleSet {
    pub triples: Vec<TrainingTriple>,
    pub skipped_no_positive: usize,
    pub skipped_few_negatives: usize,
}

impl TripleSet {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.triples {
            serde_json::to_writer(&mut w, t)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// One triple per anchor trajectory that has a positive (shared prefix of
/// at least `layer` actions) and `m` negatives (shorter shared prefix).
/// Positive and negatives are drawn uniformly with a seeded generator.
pub fn gen_training_triples(trajs: &[Trajectory], layer: usize, m: usize, seed: u64) -> Result<TripleSet> {
    if layer == 0 {
        return Err(Error::InvalidConfig("layer must be at least 1".into()));
    }
    if m == 0 {
        return Err(Error::InvalidConfig("negative count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = TripleSet::default();
    for (i, anchor) in trajs.iter().enumerate() {
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (j, other) in trajs.iter().enumerate() {
            if i == j {
                continue;
            }
            if prefix_len(anchor, other) >= layer {
                pos.push(j);
            } else {
                neg.push(j);
            }
        }
        if pos.is_empty() {
            set.skipped_no_positive += 1;
            continue;
        }
        if neg.len() < m {
            set.skipped_few_negatives += 1;
            continue;
        }
        let p = pos[rng.gen_range(0..pos.len())];
        let negatives = index::sample(&mut rng, neg.len(), m)
            .into_iter()
            .map(|k| trajs[neg[k]].task.clone())
            .collect();
        set.triples.push(TrainingTriple {
            anchor: anchor.task.clone(),
            layer,
            positive: trajs[p].task.clone(),
            negatives,
        });
    }
    Ok(set)
}

/// `-ln(e^{s+/t} / (e^{s+/t} + sum_j e^{s_j/t}))` with cosine similarities,
/// evaluated through log-sum-exp.
pub fn infonce_loss(v: &[f64], pos: &[f64], negs: &[Vec<f64>], temperature: f64) -> Result<f64> {
    if negs.is_empty() {
        return Err(Error::NoNegatives);
    }
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    let lp = cosine_similarity(v, pos)? / temperature;
    let mut logits = Vec::with_capacity(negs.len() + 1);
    logits.push(lp);
    for n in negs {
        logits.push(cosine_similarity(v, n)? / temperature);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    Ok((lse - lp).max(0.0))
}
