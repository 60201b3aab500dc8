//! One run of a simulated app: the navigation stack plus the per-episode
//! roll of dynamic element contents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::app::{fill, SimApp, SimState};
use crate::domain::{Action, BBox, UIStateId};
use crate::error::Result;
use crate::tracer::{Environment, ScreenParser};

/// Stable 64-bit seed from arbitrary parts.
pub(crate) fn mix_seed(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

pub struct SimEpisode<'a> {
    app: &'a SimApp,
    stack: Vec<SimState>,
    seed: u64,
    p_dyn: f64,
}

impl<'a> SimEpisode<'a> {
    pub fn new(app: &'a SimApp, seed: u64, p_dyn: f64) -> Self {
        Self { app, stack: vec![app.initial()], seed, p_dyn }
    }

    pub fn app(&self) -> &SimApp {
        self.app
    }

    pub fn state(&self) -> &SimState {
        self.stack.last().expect("stack never empties")
    }

    /// What element `index` shows in `state` during this episode.
    fn displayed(&self, state: &SimState, fingerprint: &str, index: usize) -> String {
        let el = &self.app.screens[state.screen].elements[index];
        let base = fill(&el.label, state.param.as_deref());
        if !el.dynamic || self.p_dyn <= 0.0 {
            return base;
        }
        let seed = mix_seed(&[&self.seed.to_le_bytes(), fingerprint.as_bytes(), &index.to_le_bytes()]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if rng.gen::<f64>() < self.p_dyn {
            format!("{base} ({})", rng.gen_range(1..1000))
        } else {
            base
        }
    }
}

impl ScreenParser for SimEpisode<'_> {
    fn parse(&self, state: &UIStateId) -> Vec<(String, BBox)> {
        let Some(s) = self.app.parse_state(state) else {
            return Vec::new();
        };
        self.app.screens[s.screen]
            .elements
            .iter()
            .enumerate()
            .map(|(i, e)| (self.displayed(&s, &state.fingerprint, i), e.bbox))
            .collect()
    }

    fn lookup(&self, state: &UIStateId, bbox: &BBox) -> Option<String> {
        let s = self.app.parse_state(state)?;
        let i = self.app.screens[s.screen].elements.iter().position(|e| e.bbox == *bbox)?;
        Some(self.displayed(&s, &state.fingerprint, i))
    }
}

impl Environment for SimEpisode<'_> {
    fn current_state(&self) -> UIStateId {
        self.app.state_id(self.state())
    }

    fn execute(&mut self, action: &Action) -> Result<UIStateId> {
        match action {
            Action::Back => {
                if self.stack.len() > 1 {
                    self.stack.pop();
                }
            }
            Action::Done => {}
            _ => {
                let next = self.app.transition(self.state(), action)?;
                if next != *self.state() {
                    self.stack.push(next);
                }
            }
        }
        Ok(self.current_state())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::apps::shopping;

    #[test]
    fn back_pops_and_stops_at_home() {
        let app = shopping().unwrap();
        let mut ep = SimEpisode::new(&app, 1, 0.0);
        ep.execute(&Action::click("search bar", None).unwrap()).unwrap();
        let s = ep.execute(&Action::input("yoga mat")).unwrap();
        assert_eq!(s.fingerprint, "results[yoga mat]");
        assert_eq!(ep.execute(&Action::Back).unwrap().fingerprint, "search");
        assert_eq!(ep.execute(&Action::Back).unwrap().fingerprint, "home");
        assert_eq!(ep.execute(&Action::Back).unwrap().fingerprint, "home");
        assert_eq!(ep.execute(&Action::Done).unwrap().fingerprint, "home");
    }

    #[test]
    fn dynamic_content_depends_on_episode_only_when_enabled() {
        let app = shopping().unwrap();
        let results = UIStateId::new("shopping", "results[yoga mat]");
        let bbox = app.screens[app.screen_index("results").unwrap()].elements[0].bbox;
        let still = SimEpisode::new(&app, 7, 0.0);
        assert_eq!(still.lookup(&results, &bbox).as_deref(), Some("yoga mat top result"));

        let shown: Vec<String> = (0..200)
            .map(|seed| SimEpisode::new(&app, seed, 0.5).lookup(&results, &bbox).unwrap())
            .collect();
        let changed = shown.iter().filter(|c| *c != "yoga mat top result").count();
        // about half of the episodes re-roll the element
        assert!((60..=140).contains(&changed), "{changed}");
        // same episode, same answer
        let ep = SimEpisode::new(&app, 3, 0.5);
        assert_eq!(ep.lookup(&results, &bbox), ep.lookup(&results, &bbox));
        // static elements never change
        let sort = app.screens[app.screen_index("results").unwrap()].elements[2].bbox;
        assert!(shown.len() == 200 && SimEpisode::new(&app, 9, 1.0).lookup(&results, &sort).as_deref() == Some("sort by price"));
        assert_eq!(ep.parse(&results).len(), 3);
        assert_eq!(ep.lookup(&UIStateId::new("other", "results"), &bbox), None);
    }
}
