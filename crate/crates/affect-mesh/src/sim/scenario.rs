//! Scenario scripts: the JSON description of who participates, how the
//! synthetic world is seeded, and what the users do when.
//!
//! Scripts are strict — unknown keys anywhere are schema errors, times
//! must be ordered and inside the run window, and every referenced agent
//! must be declared. Validation reports *all* problems at once rather
//! than the first one, because hand-edited scripts usually have several.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::curation::CurationConfig;
use crate::mesh::InfluenceLevel;

/// Link latency model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    /// Base one-way latency in seconds.
    pub base_latency: f64,
    /// Uniform jitter half-width in seconds.
    pub jitter: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            base_latency: 0.05,
            jitter: 0.02,
        }
    }
}

/// Synthetic catalog parameters for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CatalogSpec {
    pub seed: u64,
    pub tracks: usize,
    /// `[min, max]` track duration in seconds.
    pub duration: [u32; 2],
}

impl Default for CatalogSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            tracks: 2000,
            duration: [120, 420],
        }
    }
}

/// One participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: String,
    /// `"music"` grants genre authority; anything else is mood-only.
    #[serde(default = "default_domain")]
    pub domain: String,
    #[serde(default)]
    pub influence: InfluenceLevel,
    /// Whether the 60-second mesh-induced isolation window is armed.
    #[serde(default = "default_true")]
    pub ere_isolation: bool,
    /// Seeds the listener model; the mesh-side model derives from it.
    pub model_seed: u64,
    /// Initial organic mood `[valence, arousal]`.
    #[serde(default)]
    pub initial_mood: [f64; 2],
    #[serde(default)]
    pub curation: CurationConfig,
}

fn default_domain() -> String {
    "music".to_string()
}

fn default_true() -> bool {
    true
}

/// A scripted user action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    /// Start playback (cold-starts a playlist when none is cached).
    Play,
    Skip,
    Pause,
    Resume,
    /// Direct mood-meter update: sets the organic mood.
    MoodDial { valence: f64, arousal: f64 },
    SetGenre { genre: String },
    Join,
    Leave,
    SetInfluence { level: InfluenceLevel },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Play => "play",
            Action::Skip => "skip",
            Action::Pause => "pause",
            Action::Resume => "resume",
            Action::MoodDial { .. } => "mood_dial",
            Action::SetGenre { .. } => "set_genre",
            Action::Join => "join",
            Action::Leave => "leave",
            Action::SetInfluence { .. } => "set_influence",
        }
    }
}

/// One timed script entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEvent {
    pub time: f64,
    pub agent: String,
    pub action: Action,
}

/// A complete scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    pub name: String,
    /// Global seed; per-component generators derive from it.
    pub seed: u64,
    /// Run length in simulated seconds.
    pub duration: f64,
    /// Wall-clock hour at t = 0 (drives time-of-day features and bands).
    #[serde(default = "default_start_hour")]
    pub start_hour: f64,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub catalog: CatalogSpec,
    #[serde(default = "default_lookup_seed")]
    pub lookup_seed: u64,
    pub agents: Vec<AgentSpec>,
    /// Undirected mesh links between agent ids.
    #[serde(default)]
    pub peers: Vec<[String; 2]>,
    #[serde(default)]
    pub events: Vec<ScriptEvent>,
}

fn default_start_hour() -> f64 {
    20.0
}

fn default_lookup_seed() -> u64 {
    9
}

/// Every problem found in a script.
#[derive(Debug, thiserror::Error)]
#[error("invalid scenario: {}", problems.join("; "))]
pub struct ScenarioError {
    pub problems: Vec<String>,
}

impl ScenarioScript {
    pub fn from_json(text: &str) -> Result<ScenarioScript, ScenarioError> {
        let script: ScenarioScript = serde_json::from_str(text).map_err(|e| ScenarioError {
            problems: vec![format!("schema: {e}")],
        })?;
        script.validate()?;
        Ok(script)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut problems = Vec::new();
        if self.duration.is_nan() || self.duration <= 0.0 {
            problems.push(format!("duration {} must be positive", self.duration));
        }
        if self.link.base_latency.is_nan() || self.link.base_latency <= 0.0 {
            problems.push("link base latency must be positive".into());
        }
        if self.link.jitter < 0.0 || self.link.jitter >= self.link.base_latency {
            problems.push(format!(
                "link jitter {} must be in [0, base latency {})",
                self.link.jitter, self.link.base_latency
            ));
        }
        if self.catalog.tracks == 0 {
            problems.push("catalog must have at least one track".into());
        }
        if self.catalog.duration[0] == 0 || self.catalog.duration[0] > self.catalog.duration[1] {
            problems.push(format!(
                "catalog duration range [{}, {}] must be positive and ordered",
                self.catalog.duration[0], self.catalog.duration[1]
            ));
        }
        if self.agents.is_empty() {
            problems.push("at least one agent required".into());
        }
        let mut ids = BTreeSet::new();
        for a in &self.agents {
            if a.id.is_empty() {
                problems.push("agent with empty id".into());
            }
            if !ids.insert(a.id.as_str()) {
                problems.push(format!("duplicate agent id {:?}", a.id));
            }
            for v in a.initial_mood {
                if !(-1.0..=1.0).contains(&v) {
                    problems.push(format!("agent {:?} initial mood {v} outside [-1, 1]", a.id));
                }
            }
        }
        for [x, y] in &self.peers {
            if x == y {
                problems.push(format!("peer link {x:?} to itself"));
            }
            for end in [x, y] {
                if !ids.contains(end.as_str()) {
                    problems.push(format!("peer link references unknown agent {end:?}"));
                }
            }
        }
        let mut last = f64::NEG_INFINITY;
        for (i, e) in self.events.iter().enumerate() {
            if e.time < last {
                problems.push(format!(
                    "event {i} at t = {} is earlier than its predecessor at t = {last}",
                    e.time
                ));
            }
            last = last.max(e.time);
            if e.time < 0.0 || e.time > self.duration {
                problems.push(format!(
                    "event {i} at t = {} outside [0, {}]",
                    e.time, self.duration
                ));
            }
            if !ids.contains(e.agent.as_str()) {
                problems.push(format!("event {i} references unknown agent {:?}", e.agent));
            }
            if let Action::MoodDial { valence, arousal } = e.action {
                for v in [valence, arousal] {
                    if !(-1.0..=1.0).contains(&v) {
                        problems.push(format!("event {i} mood dial {v} outside [-1, 1]"));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError { problems })
        }
    }
}

fn agent(id: &str, influence: InfluenceLevel, isolation: bool, seed: u64, mood: [f64; 2]) -> AgentSpec {
    AgentSpec {
        id: id.to_string(),
        domain: "music".to_string(),
        influence,
        ere_isolation: isolation,
        model_seed: seed,
        initial_mood: mood,
        curation: CurationConfig::default(),
    }
}

fn ev(time: f64, agent: &str, action: Action) -> ScriptEvent {
    ScriptEvent {
        time,
        agent: agent.to_string(),
        action,
    }
}

/// The two-instance feedback-loop scenario. One mood dial lands on agent
/// `a` a minute in; with isolation disabled the agents re-curate off each
/// other's broadcasts repeatedly, with it enabled the chain dies at the
/// first hop. Long tracks keep natural track-ends out of the window so
/// every trigger traces back to the dial.
pub fn scenario_echo(isolation: bool) -> ScenarioScript {
    // The experiment isolates mesh-triggered repaints, so the solo policy
    // is muted: an untrained model idles near confidence 0.5, and a gate
    // above that keeps every tick projection out of the picture.
    let curation = CurationConfig {
        confidence_gate: 0.6,
        ..CurationConfig::default()
    };
    let quiet = |id: &str, seed, mood| {
        let mut spec = agent(id, InfluenceLevel::Responsive, isolation, seed, mood);
        spec.curation = curation.clone();
        spec
    };
    ScenarioScript {
        name: if isolation { "echo-on" } else { "echo-off" }.to_string(),
        seed: 401,
        duration: 600.0,
        start_hour: 20.0,
        link: LinkConfig::default(),
        catalog: CatalogSpec {
            seed: 11,
            tracks: 4000,
            // Tracks exactly as long as the run: the queues advance only
            // when curation replaces them, so every repaint inside the
            // window traces back to the mesh, not to natural track ends.
            duration: [600, 600],
        },
        lookup_seed: 9,
        // The two sessions start far apart on the mood square, so the
        // dial tears open a gap the feedback loop then needs many hops to
        // close — plenty of round trips inside the window when nothing
        // interrupts it.
        agents: vec![
            quiet("a", 5, [0.515, 0.515]),
            quiet("b", 3, [-0.5, -0.5]),
        ],
        peers: vec![["a".to_string(), "b".to_string()]],
        events: vec![
            ev(0.0, "a", Action::Play),
            ev(0.0, "b", Action::Play),
            ev(
                60.0,
                "a",
                Action::MoodDial {
                    valence: 0.9,
                    arousal: 0.9,
                },
            ),
        ],
    }
}

/// Two agents listening together: a large dial on `a` must propagate to a
/// curation trigger on `b` within seconds; identical dials later converge
/// the room; a genre change rides across once and the cooldown blocks the
/// follow-up.
pub fn scenario_colisten() -> ScenarioScript {
    // Mesh effects only, as in the echo runs: gate the solo policy above
    // an untrained model's resting confidence.
    let curation = CurationConfig {
        confidence_gate: 0.6,
        ..CurationConfig::default()
    };
    let quiet = |id: &str, seed| {
        let mut spec = agent(id, InfluenceLevel::Gentle, true, seed, [0.0, 0.0]);
        spec.curation = curation.clone();
        spec
    };
    ScenarioScript {
        name: "colisten".to_string(),
        seed: 402,
        duration: 400.0,
        start_hour: 20.0,
        link: LinkConfig::default(),
        catalog: CatalogSpec {
            seed: 11,
            tracks: 4000,
            duration: [540, 600],
        },
        lookup_seed: 9,
        agents: vec![quiet("a", 5), quiet("b", 3)],
        peers: vec![["a".to_string(), "b".to_string()]],
        events: vec![
            ev(0.0, "a", Action::Play),
            ev(0.0, "b", Action::Play),
            ev(
                60.0,
                "a",
                Action::MoodDial {
                    valence: 0.7,
                    arousal: 0.7,
                },
            ),
            ev(
                120.0,
                "a",
                Action::MoodDial {
                    valence: 0.75,
                    arousal: 0.75,
                },
            ),
            ev(
                130.0,
                "b",
                Action::MoodDial {
                    valence: 0.75,
                    arousal: 0.75,
                },
            ),
            ev(
                200.0,
                "a",
                Action::SetGenre {
                    genre: "edm".to_string(),
                },
            ),
            ev(
                260.0,
                "a",
                Action::SetGenre {
                    genre: "jazz".to_string(),
                },
            ),
        ],
    }
}

/// A scripted hour of solo listening: no peers, no traffic, a handful of
/// ordinary player actions, and the 5-minute policy ticks doing the rest.
pub fn scenario_solo() -> ScenarioScript {
    ScenarioScript {
        name: "solo".to_string(),
        seed: 403,
        duration: 3600.0,
        start_hour: 20.0,
        link: LinkConfig::default(),
        catalog: CatalogSpec::default(),
        lookup_seed: 9,
        agents: vec![agent(
            "solo",
            InfluenceLevel::Gentle,
            true,
            27,
            [0.1, -0.1],
        )],
        peers: Vec::new(),
        events: vec![
            ev(0.0, "solo", Action::Play),
            ev(700.0, "solo", Action::Skip),
            ev(1500.0, "solo", Action::Pause),
            ev(1560.0, "solo", Action::Resume),
            ev(
                2400.0,
                "solo",
                Action::MoodDial {
                    valence: 0.3,
                    arousal: 0.2,
                },
            ),
        ],
    }
}
