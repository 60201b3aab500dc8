//! Vocabulary shared by every module: actions, boxes, UI states, tasks and
//! trajectories.

use std::fmt;
use std::num::NonZeroU32;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Axis-aligned box in absolute pixel coordinates with strictly positive area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i32; 4]", into = "[i32; 4]")]
pub struct BBox {
    x1: i32,
    y1: i32,
    x2: i32,
    y2: i32,
}

impl BBox {
    pub fn new(x1: i32, y1: i32, x2: i32, y2: i32) -> Result<Self> {
        if x1 < x2 && y1 < y2 {
            Ok(Self { x1, y1, x2, y2 })
        } else {
            Err(Error::InvalidBBox { x1, y1, x2, y2 })
        }
    }

    pub fn x1(&self) -> i32 {
        self.x1
    }
    pub fn y1(&self) -> i32 {
        self.y1
    }
    pub fn x2(&self) -> i32 {
        self.x2
    }
    pub fn y2(&self) -> i32 {
        self.y2
    }

    pub fn width(&self) -> i64 {
        i64::from(self.x2) - i64::from(self.x1)
    }

    pub fn height(&self) -> i64 {
        i64::from(self.y2) - i64::from(self.y1)
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    /// Boundary-inclusive point containment.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        f64::from(self.x1) <= x && x <= f64::from(self.x2) && f64::from(self.y1) <= y && y <= f64::from(self.y2)
    }
}

impl TryFrom<[i32; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [i32; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [i32; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

/// One step of the agent's action space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawAction", into = "RawAction")]
pub enum Action {
    Click { target: String, bbox: Option<BBox> },
    Input { text: String },
    Swipe { direction: Direction },
    Wait { seconds: NonZeroU32 },
    Done,
    Back,
}

impl Action {
    pub fn click(target: impl Into<String>, bbox: Option<BBox>) -> Result<Self> {
        let target = target.into();
        if target.trim().is_empty() {
            return Err(Error::InvalidAction("click target description is empty".into()));
        }
        Ok(Action::Click { target, bbox })
    }

    pub fn input(text: impl Into<String>) -> Self {
        Action::Input { text: text.into() }
    }

    pub fn swipe(direction: Direction) -> Self {
        Action::Swipe { direction }
    }

    pub fn wait(seconds: u32) -> Result<Self> {
        NonZeroU32::new(seconds)
            .map(|seconds| Action::Wait { seconds })
            .ok_or_else(|| Error::InvalidAction("wait needs at least one second".into()))
    }

    pub fn kind(&self) -> ActionType {
        action_type(self)
    }

    pub fn is_done(&self) -> bool {
        matches!(self, Action::Done)
    }

    /// Re-checks the invariants of a variant built directly from its fields.
    pub fn validate(&self) -> Result<()> {
        match self {
            Action::Click { target, .. } if target.trim().is_empty() => {
                Err(Error::InvalidAction("click target description is empty".into()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Click { target, .. } => write!(f, "click({target})"),
            Action::Input { text } => write!(f, "input({text})"),
            Action::Swipe { direction } => write!(f, "swipe({direction:?})"),
            Action::Wait { seconds } => write!(f, "wait({seconds})"),
            Action::Done => f.write_str("done"),
            Action::Back => f.write_str("back"),
        }
    }
}

/// Wire form: `{"type": "CLICK", "params": {...}}`.
#[derive(Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "UPPERCASE")]
enum RawAction {
    Click {
        target_desc: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bbox: Option<BBox>,
    },
    Input {
        text: String,
    },
    Swipe {
        direction: Direction,
    },
    Wait {
        seconds: u32,
    },
    Done {},
    Back {},
}

impl TryFrom<RawAction> for Action {
    type Error = Error;

    fn try_from(raw: RawAction) -> Result<Self> {
        match raw {
            RawAction::Click { target_desc, bbox } => Action::click(target_desc, bbox),
            RawAction::Input { text } => Ok(Action::input(text)),
            RawAction::Swipe { direction } => Ok(Action::swipe(direction)),
            RawAction::Wait { seconds } => Action::wait(seconds),
            RawAction::Done {} => Ok(Action::Done),
            RawAction::Back {} => Ok(Action::Back),
        }
    }
}

impl From<Action> for RawAction {
    fn from(a: Action) -> Self {
        match a {
            Action::Click { target, bbox } => RawAction::Click { target_desc: target, bbox },
            Action::Input { text } => RawAction::Input { text },
            Action::Swipe { direction } => RawAction::Swipe { direction },
            Action::Wait { seconds } => RawAction::Wait { seconds: seconds.get() },
            Action::Done => RawAction::Done {},
            Action::Back => RawAction::Back {},
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ActionType {
    Click,
    Input,
    Swipe,
    Wait,
    Done,
    Back,
}

pub fn action_type(a: &Action) -> ActionType {
    match a {
        Action::Click { .. } => ActionType::Click,
        Action::Input { .. } => ActionType::Input,
        Action::Swipe { .. } => ActionType::Swipe,
        Action::Wait { .. } => ActionType::Wait,
        Action::Done => ActionType::Done,
        Action::Back => ActionType::Back,
    }
}

/// Case-folds and collapses runs of whitespace.
pub fn normalize_desc(s: &str) -> String {
    s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// Hashable key consistent with [`action_equals`]: two actions are equal
/// iff their keys are.
pub fn action_key(a: &Action) -> (ActionType, String) {
    let detail = match a {
        Action::Click { target, .. } => normalize_desc(target),
        Action::Input { text } => text.clone(),
        Action::Swipe { direction } => format!("{direction:?}"),
        Action::Wait { .. } | Action::Done | Action::Back => String::new(),
    };
    (action_type(a), detail)
}

/// Merge key for cached actions.
///
/// Clicks compare their normalized target description and ignore the box;
/// inputs compare text exactly; swipes compare direction; the rest compare
/// variant only.
pub fn action_equals(a: &Action, b: &Action) -> bool {
    match (a, b) {
        (Action::Click { target: x, .. }, Action::Click { target: y, .. }) => {
            normalize_desc(x) == normalize_desc(y)
        }
        (Action::Input { text: x }, Action::Input { text: y }) => x == y,
        (Action::Swipe { direction: x }, Action::Swipe { direction: y }) => x == y,
        (Action::Wait { .. }, Action::Wait { .. }) => true,
        (Action::Done, Action::Done) | (Action::Back, Action::Back) => true,
        _ => false,
    }
}

/// Identity of a UI screen as seen by the cache.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UIStateId {
    pub app_id: String,
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_summary: Option<Vec<(String, BBox)>>,
}

impl UIStateId {
    pub fn new(app_id: impl Into<String>, fingerprint: impl Into<String>) -> Self {
        Self {
            app_id: app_id.into(),
            fingerprint: fingerprint.into(),
            element_summary: None,
        }
    }

    /// Fingerprints a parsed screen by hashing the app id with its sorted
    /// element contents.
    pub fn from_elements(app_id: impl Into<String>, elements: Vec<(String, BBox)>) -> Self {
        let app_id = app_id.into();
        let mut contents: Vec<&str> = elements.iter().map(|(c, _)| c.as_str()).collect();
        contents.sort_unstable();
        let mut hasher = Sha256::new();
        hasher.update(app_id.as_bytes());
        for c in contents {
            hasher.update([0u8]);
            hasher.update(c.as_bytes());
        }
        let digest = hasher.finalize();
        let fingerprint = digest[..12].iter().map(|b| format!("{b:02x}")).collect::<String>();
        Self {
            app_id,
            fingerprint,
            element_summary: Some(elements),
        }
    }

    pub fn same_state(&self, other: &UIStateId) -> bool {
        self.app_id == other.app_id && self.fingerprint == other.fingerprint
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub String);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TaskId {
    fn from(s: &str) -> Self {
        TaskId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub description: String,
    pub app_id: String,
    pub created_at: u64,
}

impl Task {
    pub fn new(
        id: impl Into<String>,
        description: impl Into<String>,
        app_id: impl Into<String>,
        created_at: u64,
    ) -> Result<Self> {
        let description = description.into();
        if description.trim().is_empty() {
            return Err(Error::InvalidTrajectory("task description is empty".into()));
        }
        Ok(Self {
            id: TaskId(id.into()),
            description,
            app_id: app_id.into(),
            created_at,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub state: UIStateId,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task: Task,
    pub steps: Vec<Step>,
    pub completed: bool,
}

impl Trajectory {
    pub fn new(task: Task, steps: Vec<Step>, completed: bool) -> Result<Self> {
        let t = Self { task, steps, completed };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(pos) = self.steps.iter().position(|s| s.action.is_done()) {
            if pos + 1 != self.steps.len() {
                return Err(Error::InvalidTrajectory(format!(
                    "task {}: action follows Done at step {pos}",
                    self.task.id
                )));
            }
        }
        if self.completed && !self.steps.last().is_some_and(|s| s.action.is_done()) {
            return Err(Error::InvalidTrajectory(format!(
                "task {}: completed trajectory must end with Done",
                self.task.id
            )));
        }
        Ok(())
    }

    pub fn actions(&self) -> impl Iterator<Item = &Action> {
        self.steps.iter().map(|s| &s.action)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ExperienceLevel {
    Plan,
    Primitive,
    Grounded,
}

/// A cached model output at one level of the planner / decider / grounder
/// hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experience {
    Plan(String),
    Primitive(String),
    Grounded(Action),
}

impl Experience {
    /// Grounded clicks must carry a resolved box.
    pub fn grounded(action: Action) -> Result<Self> {
        action.validate()?;
        if let Action::Click { bbox: None, .. } = action {
            return Err(Error::InvalidAction("grounded click needs a bbox".into()));
        }
        Ok(Experience::Grounded(action))
    }

    pub fn level(&self) -> ExperienceLevel {
        match self {
            Experience::Plan(_) => ExperienceLevel::Plan,
            Experience::Primitive(_) => ExperienceLevel::Primitive,
            Experience::Grounded(_) => ExperienceLevel::Grounded,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x1: i32, y1: i32, x2: i32, y2: i32) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn click_equality_normalizes_and_ignores_bbox() {
        let a = Action::click("search button", Some(bb(10, 10, 50, 30))).unwrap();
        let b = Action::click("Search  Button", Some(bb(11, 10, 50, 31))).unwrap();
        assert!(action_equals(&a, &b));
    }

    #[test]
    fn input_equality_is_exact() {
        assert!(!action_equals(&Action::input("milk"), &Action::input("Milk")));
        assert!(action_equals(&Action::input("milk"), &Action::input("milk")));
    }

    #[test]
    fn swipe_direction_matters() {
        assert!(!action_equals(&Action::swipe(Direction::Up), &Action::swipe(Direction::Down)));
    }

    #[test]
    fn wait_compares_variant_only() {
        assert!(action_equals(&Action::wait(1).unwrap(), &Action::wait(5).unwrap()));
        assert!(!action_equals(&Action::Done, &Action::Back));
    }

    #[test]
    fn type_projection() {
        assert_eq!(action_type(&Action::click("x", None).unwrap()), ActionType::Click);
        assert_eq!(action_type(&Action::input("abc")), ActionType::Input);
        assert_eq!(action_type(&Action::Done), ActionType::Done);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(BBox::new(0, 0, 0, 10).is_err());
        assert!(BBox::new(5, 0, 1, 10).is_err());
        assert!(Action::wait(0).is_err());
        assert!(Action::click("   ", None).is_err());
        assert!(serde_json::from_str::<Action>(r#"{"type":"WAIT","params":{"seconds":0}}"#).is_err());
        assert!(serde_json::from_str::<Action>(r#"{"type":"SWIPE","params":{"direction":"NORTH"}}"#).is_err());
        assert!(
            serde_json::from_str::<Action>(r#"{"type":"CLICK","params":{"target_desc":"a","bbox":[5,5,5,9]}}"#)
                .is_err()
        );
    }

    #[test]
    fn action_wire_format() {
        let a = Action::click("ok", Some(bb(1, 2, 3, 4))).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            r#"{"type":"CLICK","params":{"target_desc":"ok","bbox":[1,2,3,4]}}"#
        );
        assert_eq!(serde_json::to_string(&Action::Done).unwrap(), r#"{"type":"DONE","params":{}}"#);
        let back: Action = serde_json::from_str(r#"{"type":"SWIPE","params":{"direction":"LEFT"}}"#).unwrap();
        assert_eq!(back, Action::swipe(Direction::Left));
    }

    #[test]
    fn trajectory_done_rules() {
        let task = Task::new("t", "do it", "app", 0).unwrap();
        let s = UIStateId::new("app", "home");
        let step = |a| Step { state: s.clone(), action: a };
        assert!(Trajectory::new(task.clone(), vec![step(Action::input("x")), step(Action::Done)], true).is_ok());
        assert!(Trajectory::new(task.clone(), vec![step(Action::input("x"))], true).is_err());
        assert!(Trajectory::new(task.clone(), vec![step(Action::Done), step(Action::Back)], false).is_err());
        assert!(Trajectory::new(task, vec![step(Action::input("x"))], false).is_ok());
    }

    #[test]
    fn element_fingerprint_ignores_order() {
        let a = UIStateId::from_elements("app", vec![("a".into(), bb(0, 0, 1, 1)), ("b".into(), bb(0, 0, 2, 2))]);
        let b = UIStateId::from_elements("app", vec![("b".into(), bb(0, 0, 2, 2)), ("a".into(), bb(0, 0, 1, 1))]);
        let c = UIStateId::from_elements("other", vec![("a".into(), bb(0, 0, 1, 1))]);
        assert!(a.same_state(&b));
        assert_ne!(a.fingerprint, c.fingerprint);
    }

    #[test]
    fn grounded_experience_needs_bbox() {
        assert!(Experience::grounded(Action::click("x", None).unwrap()).is_err());
        let e = Experience::grounded(Action::click("x", Some(bb(0, 0, 4, 4))).unwrap()).unwrap();
        assert_eq!(e.level(), ExperienceLevel::Grounded);
        assert_eq!(Experience::Plan("p".into()).level(), ExperienceLevel::Plan);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn arb_action() -> impl Strategy<Value = Action> {
            prop_oneof![
                prop::sample::select(vec!["search bar", "Search  Bar", "SEARCH BAR", "cart", " cart "])
                    .prop_map(|t| Action::click(t, None).unwrap()),
                prop::sample::select(vec!["milk", "Milk", "eggs"]).prop_map(Action::input),
                prop::sample::select(vec![Direction::Up, Direction::Down]).prop_map(Action::swipe),
                (1u32..4).prop_map(|s| Action::wait(s).unwrap()),
                Just(Action::Done),
                Just(Action::Back),
            ]
        }

        proptest! {
            #[test]
            fn action_equals_is_an_equivalence(a in arb_action(), b in arb_action(), c in arb_action()) {
                prop_assert!(action_equals(&a, &a));
                prop_assert_eq!(action_equals(&a, &b), action_equals(&b, &a));
                prop_assert_eq!(action_equals(&a, &b), action_key(&a) == action_key(&b));
                if action_equals(&a, &b) && action_equals(&b, &c) {
                    prop_assert!(action_equals(&a, &c));
                }
            }

            #[test]
            fn action_json_roundtrip(a in arb_action()) {
                let s = serde_json::to_string(&a).unwrap();
                let back: Action = serde_json::from_str(&s).unwrap();
                prop_assert_eq!(back, a);
            }
        }
    }
}
