//! Screen graphs and task templates for the simulated apps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Action, BBox, Direction, UIStateId};
use crate::error::{Error, Result};

const ROW_TOP: i32 = 160;
const ROW_PITCH: i32 = 130;
const ROW_HEIGHT: i32 = 110;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    /// Display label; `{}` is filled with the state's bound parameter.
    pub label: String,
    pub bbox: BBox,
    pub target: usize,
    /// Content may be re-rolled per episode.
    pub dynamic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screen {
    pub name: String,
    pub elements: Vec<Element>,
    pub input_target: Option<usize>,
    pub swipes: Vec<(Direction, usize)>,
    pub wait_target: Option<usize>,
}

/// One step of a template's ground truth, before parameter substitution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GtStep {
    Click(String),
    /// Types the task parameter.
    Input,
    /// Types fixed text.
    InputText(String),
    Swipe(Direction),
    Wait(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskTemplate {
    pub app_id: String,
    pub template_id: String,
    /// Description with one `{}` slot.
    pub pattern: String,
    pub params: Vec<String>,
    /// Ground truth without the closing Done.
    pub steps: Vec<GtStep>,
}

impl TaskTemplate {
    pub fn description(&self, param: &str) -> String {
        self.pattern.replace("{}", param)
    }
}

/// Where a simulated app currently is: a screen plus the parameter bound by
/// the most recent input.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SimState {
    pub screen: usize,
    pub param: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimApp {
    pub app_id: String,
    pub screens: Vec<Screen>,
    pub home: usize,
    pub templates: Vec<TaskTemplate>,
}

pub(crate) fn fill(label: &str, param: Option<&str>) -> String {
    label.replace("{}", param.unwrap_or(""))
}

impl SimApp {
    pub fn screen_index(&self, name: &str) -> Option<usize> {
        self.screens.iter().position(|s| s.name == name)
    }

    pub fn initial(&self) -> SimState {
        SimState { screen: self.home, param: None }
    }

    pub fn state_id(&self, s: &SimState) -> UIStateId {
        let name = &self.screens[s.screen].name;
        let fp = match &s.param {
            Some(p) => format!("{name}[{p}]"),
            None => name.clone(),
        };
        UIStateId::new(self.app_id.clone(), fp)
    }

    pub fn parse_state(&self, id: &UIStateId) -> Option<SimState> {
        if id.app_id != self.app_id {
            return None;
        }
        let (name, param) = match id.fingerprint.split_once('[') {
            Some((n, rest)) => (n, Some(rest.strip_suffix(']')?.to_string())),
            None => (id.fingerprint.as_str(), None),
        };
        Some(SimState { screen: self.screen_index(name)?, param })
    }

    /// Successor of `s` under any action except Back, which needs the
    /// navigation stack and is handled by the episode.
    pub fn transition(&self, s: &SimState, action: &Action) -> Result<SimState> {
        let screen = &self.screens[s.screen];
        let missing = |what: String| Error::Environment(format!("{what} on screen {}", screen.name));
        let keep = |screen: usize| SimState { screen, param: s.param.clone() };
        match action {
            Action::Click { target, .. } => {
                let want = crate::domain::normalize_desc(target);
                screen
                    .elements
                    .iter()
                    .find(|e| crate::domain::normalize_desc(&fill(&e.label, s.param.as_deref())) == want)
                    .map(|e| keep(e.target))
                    .ok_or_else(|| missing(format!("no element {target:?}")))
            }
            Action::Input { text } => screen
                .input_target
                .map(|t| SimState { screen: t, param: Some(text.clone()) })
                .ok_or_else(|| missing("no text field".into())),
            Action::Swipe { direction } => Ok(screen
                .swipes
                .iter()
                .find(|(d, _)| d == direction)
                .map_or_else(|| s.clone(), |(_, t)| keep(*t))),
            Action::Wait { .. } => Ok(screen.wait_target.map_or_else(|| s.clone(), keep)),
            Action::Done => Ok(s.clone()),
            Action::Back => Err(Error::Environment("Back needs the navigation stack".into())),
        }
    }

    /// Concrete ground truth for `param`: the actions (clicks grounded to
    /// their boxes, ending in Done) and the state before each of them, plus
    /// the final state.
    pub fn ground_truth(&self, template: &TaskTemplate, param: &str) -> Result<(Vec<Action>, Vec<SimState>)> {
        let mut state = self.initial();
        let mut actions = Vec::with_capacity(template.steps.len() + 1);
        let mut states = vec![state.clone()];
        for step in &template.steps {
            let action = match step {
                GtStep::Click(label) => {
                    let text = fill(label, Some(param));
                    let screen = &self.screens[state.screen];
                    let el = screen
                        .elements
                        .iter()
                        .find(|e| fill(&e.label, state.param.as_deref()) == text)
                        .ok_or_else(|| {
                            Error::Environment(format!(
                                "template {}: no element {text:?} on {}",
                                template.template_id, screen.name
                            ))
                        })?;
                    Action::click(text, Some(el.bbox))?
                }
                GtStep::Input => Action::input(param),
                GtStep::InputText(t) => Action::input(t.clone()),
                GtStep::Swipe(d) => Action::swipe(*d),
                GtStep::Wait(s) => Action::wait(*s)?,
            };
            state = self.transition(&state, &action)?;
            actions.push(action);
            states.push(state.clone());
        }
        actions.push(Action::Done);
        Ok((actions, states))
    }
}

/// Assembles a [`SimApp`] from named screens.
///
/// Element specs are `(label, target)`. A label starting with `*` marks a
/// dynamic element; `<input>`, `<wait>` and `<swipe:DIR>` declare the
/// screen's input, wait and swipe transitions instead of an element.
/// Template steps are `click:LABEL`, `input`, `input:TEXT`, `swipe:DIR` or
/// `wait:SECONDS`.
pub struct AppBuilder {
    app_id: String,
    home: String,
    screens: Vec<(String, Vec<(String, String)>)>,
    params: Vec<String>,
    templates: Vec<(String, String, Vec<String>)>,
}

impl AppBuilder {
    pub fn new(app_id: &str, home: &str) -> Self {
        Self {
            app_id: app_id.into(),
            home: home.into(),
            screens: Vec::new(),
            params: Vec::new(),
            templates: Vec::new(),
        }
    }

    pub fn screen(mut self, name: &str, elements: &[(&str, &str)]) -> Self {
        let els = elements.iter().map(|(l, t)| (l.to_string(), t.to_string())).collect();
        self.screens.push((name.into(), els));
        self
    }

    pub fn params(mut self, params: &[&str]) -> Self {
        self.params = params.iter().map(|p| p.to_string()).collect();
        self
    }

    pub fn template(mut self, id: &str, pattern: &str, steps: &[&str]) -> Self {
        self.templates
            .push((id.into(), pattern.into(), steps.iter().map(|s| s.to_string()).collect()));
        self
    }

    pub fn build(self) -> Result<SimApp> {
        let index: BTreeMap<&str, usize> =
            self.screens.iter().enumerate().map(|(i, (n, _))| (n.as_str(), i)).collect();
        if index.len() != self.screens.len() {
            return Err(Error::InvalidConfig(format!("{}: duplicate screen names", self.app_id)));
        }
        let resolve = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::InvalidConfig(format!("{}: unknown screen {name:?}", self.app_id)))
        };
        let mut screens = Vec::with_capacity(self.screens.len());
        for (name, specs) in &self.screens {
            let mut screen = Screen {
                name: name.clone(),
                elements: Vec::new(),
                input_target: None,
                swipes: Vec::new(),
                wait_target: None,
            };
            for (label, target) in specs {
                let t = resolve(target)?;
                if label == "<input>" {
                    screen.input_target = Some(t);
                } else if label == "<wait>" {
                    screen.wait_target = Some(t);
                } else if let Some(dir) = label.strip_prefix("<swipe:").and_then(|d| d.strip_suffix('>')) {
                    screen.swipes.push((parse_direction(dir)?, t));
                } else {
                    let (dynamic, label) = match label.strip_prefix('*') {
                        Some(l) => (true, l),
                        None => (false, label.as_str()),
                    };
                    let row = screen.elements.len() as i32;
                    let y = ROW_TOP + ROW_PITCH * row;
                    screen.elements.push(Element {
                        label: label.into(),
                        bbox: BBox::new(40, y, 1040, y + ROW_HEIGHT)?,
                        target: t,
                        dynamic,
                    });
                }
            }
            screens.push(screen);
        }
        let templates = self
            .templates
            .iter()
            .map(|(id, pattern, steps)| {
                Ok(TaskTemplate {
                    app_id: self.app_id.clone(),
                    template_id: id.clone(),
                    pattern: pattern.clone(),
                    params: self.params.clone(),
                    steps: steps.iter().map(|s| parse_step(s)).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let app = SimApp { app_id: self.app_id.clone(), screens, home: resolve(&self.home)?, templates };
        for t in &app.templates {
            for p in &t.params {
                app.ground_truth(t, p)?;
            }
        }
        Ok(app)
    }
}

fn parse_direction(s: &str) -> Result<Direction> {
    serde_json::from_value(serde_json::Value::String(s.to_uppercase()))
        .map_err(|_| Error::InvalidConfig(format!("unknown direction {s:?}")))
}

fn parse_step(s: &str) -> Result<GtStep> {
    let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
    Ok(match kind {
        "click" => GtStep::Click(arg.into()),
        "input" if arg.is_empty() => GtStep::Input,
        "input" => GtStep::InputText(arg.into()),
        "swipe" => GtStep::Swipe(parse_direction(arg)?),
        "wait" => GtStep::Wait(arg.parse().map_err(|_| Error::InvalidConfig(format!("bad wait {s:?}")))?),
        _ => return Err(Error::InvalidConfig(format!("unknown template step {s:?}"))),
    })
}
