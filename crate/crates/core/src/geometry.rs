//! Box geometry and the grounding / content rewards used to score grounder
//! and decider outputs offline.

use serde::{Deserialize, Serialize};

use crate::domain::{action_equals, Action, BBox};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    alpha: f64,
    beta: f64,
}

impl RewardConfig {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidConfig(format!("beta must lie in (0, 1], got {beta}")));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 0.5 }
    }
}

pub fn intersection_area(a: &BBox, b: &BBox) -> i64 {
    let w = i64::from(a.x2().min(b.x2())) - i64::from(a.x1().max(b.x1()));
    let h = i64::from(a.y2().min(b.y2())) - i64::from(a.y1().max(b.y1()));
    if w <= 0 || h <= 0 {
        0
    } else {
        w * h
    }
}

/// Intersection over union of pixel areas; 0 for disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

pub fn center(b: &BBox) -> (f64, f64) {
    (
        (f64::from(b.x1()) + f64::from(b.x2())) / 2.0,
        (f64::from(b.y1()) + f64::from(b.y2())) / 2.0,
    )
}

/// `alpha` when IoU strictly exceeds `beta`, plus `1 - alpha` when the
/// predicted center lies inside the ground-truth box (boundary inclusive).
pub fn grounding_reward(pred: &BBox, gt: &BBox, cfg: &RewardConfig) -> f64 {
    let r_iou = if iou(pred, gt) > cfg.beta { cfg.alpha } else { 0.0 };
    let (cx, cy) = center(pred);
    let r_center = if gt.contains_point(cx, cy) { 1.0 - cfg.alpha } else { 0.0 };
    r_iou + r_center
}

/// Exact-match reward for non-click actions.
pub fn content_reward(pred: &Action, gt: &Action) -> Result<f64> {
    if matches!(pred, Action::Click { .. }) || matches!(gt, Action::Click { .. }) {
        return Err(Error::ClickNotScorable);
    }
    Ok(if action_equals(pred, gt) { 1.0 } else { 0.0 })
}
