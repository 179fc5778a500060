//! Deterministic discrete-event simulation of small listening meshes.
//!
//! A scenario script is compiled into a priority queue of timestamped
//! events — scripted user actions, per-agent policy ticks, track ends,
//! and wire deliveries with modeled latency. Everything is seeded; two
//! runs of the same script produce byte-identical logs.

pub mod agent;
pub mod scenario;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::affect::{CircumplexPoint, MoodLookup};
use crate::catalog::{Catalog, CatalogParams};
use crate::curation::{MoodTarget, RequeueReason};
use crate::mesh::rho_from_moods;

use agent::Agent;
use scenario::{Action, ScenarioError, ScenarioScript};

/// Seconds between policy passes.
pub const TICK_INTERVAL: f64 = 300.0;
/// Seconds between room-coherence samples in the logs.
pub const RHO_INTERVAL: f64 = 10.0;

#[derive(Debug, Clone)]
pub enum EventKind {
    Script { agent: String, action: Action },
    Tick { agent: String },
    TrackEnd { agent: String, token: u64 },
    Deliver { to: String, wire: String },
    RhoSample,
}

#[derive(Debug)]
struct QueuedEvent {
    time: f64,
    /// Insertion order; breaks same-instant ties so scheduling order is
    /// the execution order.
    seq: u64,
    kind: EventKind,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

/// Per-link latency with jitter and FIFO ordering: a link never reorders
/// two blocks, even when the jitter draw would.
struct LinkModel {
    base: f64,
    jitter: f64,
    rng: ChaCha20Rng,
    last_arrival: BTreeMap<(String, String), f64>,
}

impl LinkModel {
    fn arrival(&mut self, from: &str, to: &str, now: f64) -> f64 {
        let jitter = if self.jitter > 0.0 {
            self.rng.gen_range(-self.jitter..=self.jitter)
        } else {
            0.0
        };
        let key = (from.to_string(), to.to_string());
        let floor = self
            .last_arrival
            .get(&key)
            .copied()
            .unwrap_or(f64::NEG_INFINITY);
        let arrival = (now + self.base + jitter).max(floor + 1e-6);
        self.last_arrival.insert(key, arrival);
        arrival
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequeueRecord {
    pub time: f64,
    pub agent: String,
    pub reason: RequeueReason,
    pub old: Option<MoodTarget>,
    pub new: MoodTarget,
    /// Model confidence behind a tick-projected requeue; `None` for
    /// cold-start and mesh-triggered ones, which bypass the model.
    pub confidence: Option<f64>,
    pub genres: String,
}

/// One policy-tick projection, recorded whether or not it led anywhere —
/// the audit trail for checking that requeues happen exactly when the
/// rules say they should.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionRecord {
    pub time: f64,
    pub agent: String,
    pub confidence: f64,
    /// `None` when the confidence gate blocked the projection.
    pub target: Option<MoodTarget>,
    /// The cached playlist's target and age at tick time, if any.
    pub cache: Option<(MoodTarget, f64)>,
    pub requeued: Option<RequeueReason>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastRecord {
    pub time: f64,
    pub agent: String,
    pub valence: f64,
    pub arousal: f64,
    pub genre: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DialRecord {
    pub time: f64,
    pub agent: String,
    pub valence: f64,
    pub arousal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenreRecord {
    pub time: f64,
    pub agent: String,
    pub peer: String,
    pub genre: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationRecord {
    pub time: f64,
    pub agent: String,
    pub valence: f64,
    pub arousal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutboundSample {
    pub time: f64,
    pub agent: String,
    pub valence: f64,
    pub arousal: f64,
}

/// Everything the run records, structured for assertions and renderable
/// as CSV for the command line.
#[derive(Debug, Clone, Default)]
pub struct Logs {
    /// `time,agent,event,detail` rows.
    pub events: Vec<String>,
    /// `time,receiver,sender,delta_total,admitted,trigger` rows.
    pub svaf: Vec<String>,
    /// Every serialized block that went on the wire, once per broadcast.
    pub wire: Vec<String>,
    /// Field count per drift band across all processed blocks.
    pub band_counts: [usize; 4],
    pub requeues: Vec<RequeueRecord>,
    pub projections: Vec<ProjectionRecord>,
    pub broadcasts: Vec<BroadcastRecord>,
    pub dials: Vec<DialRecord>,
    pub genre_adoptions: Vec<GenreRecord>,
    pub genre_blocked: Vec<GenreRecord>,
    pub isolation_marks: Vec<IsolationRecord>,
    /// Outbound mood sampled after every event an agent handled while its
    /// isolation window was open.
    pub outbound_samples: Vec<OutboundSample>,
    pub rho_trace: Vec<(f64, f64)>,
    pub echo_drops: usize,
    pub stale_drops: usize,
}

/// Shared world state the agents act against. Agents themselves live
/// outside so an agent and the world can be borrowed together.
pub struct World {
    pub lookup: MoodLookup,
    pub catalog: Catalog,
    pub logs: Logs,
    pub duration: f64,
    queue: BinaryHeap<Reverse<QueuedEvent>>,
    seq: u64,
    link: LinkModel,
    topology: BTreeMap<String, Vec<String>>,
}

impl World {
    pub fn schedule(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Reverse(QueuedEvent {
            time,
            seq: self.seq,
            kind,
        }));
    }

    pub fn has_peers(&self, id: &str) -> bool {
        self.topology.get(id).is_some_and(|p| !p.is_empty())
    }

    /// Fans a block out to every link partner with modeled latency.
    pub fn send_from(&mut self, from: &str, wire: String, now: f64) {
        self.logs.wire.push(wire.clone());
        let peers = self.topology.get(from).cloned().unwrap_or_default();
        for to in peers {
            let arrival = self.link.arrival(from, &to, now);
            self.schedule(arrival, EventKind::Deliver {
                to,
                wire: wire.clone(),
            });
        }
    }

    pub fn log_event(&mut self, now: f64, agent: &str, event: &str, detail: &str) {
        self.logs.events.push(format!("{now:.3},{agent},{event},{detail}"));
    }
}

/// A finished run: the script that produced it, the full logs, and the
/// agents' final observable state.
pub struct SimResult {
    pub script: ScenarioScript,
    pub logs: Logs,
    pub final_moods: BTreeMap<String, CircumplexPoint>,
    pub final_targets: BTreeMap<String, Option<MoodTarget>>,
}

impl SimResult {
    fn header(&self) -> String {
        format!(
            "# scenario {} seed {} duration {}s\n",
            self.script.name, self.script.seed, self.script.duration
        )
    }

    pub fn events_csv(&self) -> String {
        let mut out = self.header();
        out.push_str("time,agent,event,detail\n");
        for row in &self.logs.events {
            out.push_str(row);
            out.push('\n');
        }
        out
    }

    pub fn svaf_csv(&self) -> String {
        let mut out = self.header();
        out.push_str("time,receiver,sender,delta_total,admitted,trigger\n");
        for row in &self.logs.svaf {
            out.push_str(row);
            out.push('\n');
        }
        out
    }

    pub fn requeue_csv(&self) -> String {
        let mut out = self.header();
        out.push_str("time,agent,reason,old_emotion,old_energy,new_emotion,new_energy,confidence,genres\n");
        for r in &self.logs.requeues {
            let (oe, on) = match r.old {
                Some(t) => (format!("{:.2}", t.emotion), format!("{:.2}", t.energy)),
                None => (String::new(), String::new()),
            };
            let conf = match r.confidence {
                Some(c) => format!("{c:.3}"),
                None => String::new(),
            };
            let _ = writeln!(
                out,
                "{:.3},{},{},{},{},{:.2},{:.2},{},{}",
                r.time,
                r.agent,
                r.reason.as_str(),
                oe,
                on,
                r.new.emotion,
                r.new.energy,
                conf,
                r.genres
            );
        }
        out
    }

    pub fn rho_csv(&self) -> String {
        let mut out = self.header();
        out.push_str("time,rho\n");
        for (t, rho) in &self.logs.rho_trace {
            let _ = writeln!(out, "{t:.1},{rho:.6}");
        }
        out
    }

    /// Seconds from each mood dial to the first mesh-triggered requeue on
    /// some *other* agent; `None` when nothing followed.
    pub fn propagation_latencies(&self) -> Vec<(DialRecord, Option<f64>)> {
        self.logs
            .dials
            .iter()
            .map(|dial| {
                let follow = self
                    .logs
                    .requeues
                    .iter()
                    .find(|r| {
                        r.time >= dial.time
                            && r.agent != dial.agent
                            && r.reason == RequeueReason::Mesh
                    })
                    .map(|r| r.time - dial.time);
                (dial.clone(), follow)
            })
            .collect()
    }

    pub fn mesh_requeues(&self, agent: &str) -> usize {
        self.logs
            .requeues
            .iter()
            .filter(|r| r.agent == agent && r.reason == RequeueReason::Mesh)
            .count()
    }

    /// Human-readable run summary.
    pub fn metrics_text(&self) -> String {
        let mut out = self.header();
        let by_reason = |reason: RequeueReason| {
            self.logs
                .requeues
                .iter()
                .filter(|r| r.reason == reason)
                .count()
        };
        let _ = writeln!(out, "broadcasts: {}", self.logs.broadcasts.len());
        let _ = writeln!(out, "echo drops: {}", self.logs.echo_drops);
        let _ = writeln!(out, "stale drops: {}", self.logs.stale_drops);
        let _ = writeln!(
            out,
            "requeues: cold-start {} divergence {} expired {} mesh {}",
            by_reason(RequeueReason::ColdStart),
            by_reason(RequeueReason::Divergence),
            by_reason(RequeueReason::Expired),
            by_reason(RequeueReason::Mesh),
        );
        let _ = writeln!(
            out,
            "drift bands (fields): redundant {} aligned {} guarded {} rejected {}",
            self.logs.band_counts[0],
            self.logs.band_counts[1],
            self.logs.band_counts[2],
            self.logs.band_counts[3],
        );
        let _ = writeln!(
            out,
            "genre adoptions: {} blocked: {}",
            self.logs.genre_adoptions.len(),
            self.logs.genre_blocked.len()
        );
        for (dial, latency) in self.propagation_latencies() {
            let _ = writeln!(
                out,
                "dial {} t={:.1} -> remote requeue {}",
                dial.agent,
                dial.time,
                match latency {
                    Some(s) => format!("after {s:.2}s"),
                    None => "never".to_string(),
                }
            );
        }
        if let Some((_, rho)) = self.logs.rho_trace.last() {
            let _ = writeln!(out, "final rho: {rho:.4}");
        }
        for (id, mood) in &self.final_moods {
            let target = match &self.final_targets[id] {
                Some(t) => format!("({:.1}, {:.1})", t.emotion, t.energy),
                None => "none".to_string(),
            };
            let _ = writeln!(
                out,
                "agent {id}: mood ({:+.3}, {:+.3}) target {target}",
                mood.valence, mood.arousal
            );
        }
        out
    }
}

/// Runs a script to completion.
pub fn run(script: &ScenarioScript) -> Result<SimResult, ScenarioError> {
    script.validate()?;
    let lookup = MoodLookup::generate(script.lookup_seed);
    let catalog = Catalog::generate_with(&CatalogParams {
        seed: script.catalog.seed,
        count: script.catalog.tracks,
        duration_min: script.catalog.duration[0],
        duration_max: script.catalog.duration[1],
        ..CatalogParams::default()
    });
    let mut topology: BTreeMap<String, Vec<String>> = script
        .agents
        .iter()
        .map(|a| (a.id.clone(), Vec::new()))
        .collect();
    for [x, y] in &script.peers {
        topology.get_mut(x).unwrap().push(y.clone());
        topology.get_mut(y).unwrap().push(x.clone());
    }
    let mut world = World {
        lookup,
        catalog,
        logs: Logs::default(),
        duration: script.duration,
        queue: BinaryHeap::new(),
        seq: 0,
        link: LinkModel {
            base: script.link.base_latency,
            jitter: script.link.jitter,
            rng: ChaCha20Rng::seed_from_u64(script.seed ^ 0x4c49_4e4b),
            last_arrival: BTreeMap::new(),
        },
        topology,
    };
    let mut agents: BTreeMap<String, Agent> = script
        .agents
        .iter()
        .map(|spec| (spec.id.clone(), Agent::new(spec, script)))
        .collect();

    // Script events enter the queue first so that, at equal times, user
    // actions run before ticks and samples.
    for e in &script.events {
        world.schedule(e.time, EventKind::Script {
            agent: e.agent.clone(),
            action: e.action.clone(),
        });
    }
    for spec in &script.agents {
        let mut k = 0u64;
        loop {
            let t = k as f64 * TICK_INTERVAL;
            if t > script.duration {
                break;
            }
            world.schedule(t, EventKind::Tick {
                agent: spec.id.clone(),
            });
            k += 1;
        }
    }
    let mut k = 0u64;
    loop {
        let t = k as f64 * RHO_INTERVAL;
        if t > script.duration {
            break;
        }
        world.schedule(t, EventKind::RhoSample);
        k += 1;
    }

    while let Some(Reverse(event)) = world.queue.pop() {
        if event.time > script.duration {
            break;
        }
        let now = event.time;
        match event.kind {
            EventKind::RhoSample => {
                let moods: Vec<CircumplexPoint> = agents
                    .values()
                    .filter(|a| a.joined)
                    .map(|a| a.ere.outbound_mood())
                    .collect();
                world.logs.rho_trace.push((now, rho_from_moods(&moods)));
                continue;
            }
            EventKind::Script { agent, action } => {
                dispatch(&mut world, &mut agents, &agent, now, |a, w| {
                    a.handle_action(w, &action, now)
                });
            }
            EventKind::Tick { agent } => {
                dispatch(&mut world, &mut agents, &agent, now, |a, w| {
                    a.handle_tick(w, now)
                });
            }
            EventKind::TrackEnd { agent, token } => {
                dispatch(&mut world, &mut agents, &agent, now, |a, w| {
                    a.handle_track_end(w, token, now)
                });
            }
            EventKind::Deliver { to, wire } => {
                dispatch(&mut world, &mut agents, &to, now, |a, w| {
                    a.handle_wire(w, &wire, now)
                });
            }
        }
    }

    let final_moods = agents
        .iter()
        .map(|(id, a)| (id.clone(), a.ere.outbound_mood()))
        .collect();
    let final_targets = agents
        .iter()
        .map(|(id, a)| (id.clone(), a.playlist.as_ref().map(|p| p.target)))
        .collect();
    Ok(SimResult {
        script: script.clone(),
        logs: world.logs,
        final_moods,
        final_targets,
    })
}

/// Runs one event against one agent with the world borrowed alongside,
/// then samples the outbound mood if the agent sits in an isolation
/// window — that sample stream is what shows the window holding.
fn dispatch(
    world: &mut World,
    agents: &mut BTreeMap<String, Agent>,
    id: &str,
    now: f64,
    f: impl FnOnce(&mut Agent, &mut World),
) {
    let Some(mut agent) = agents.remove(id) else {
        return;
    };
    f(&mut agent, world);
    if agent.ere.isolated(now) {
        let outbound = agent.ere.outbound_mood();
        world.logs.outbound_samples.push(OutboundSample {
            time: now,
            agent: id.to_string(),
            valence: outbound.valence,
            arousal: outbound.arousal,
        });
    }
    agents.insert(id.to_string(), agent);
}
