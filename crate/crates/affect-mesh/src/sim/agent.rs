//! One simulated participant: player state, listener model, emotion
//! registers, mesh node, and calibration, wired to the scripted actions
//! and the scheduler's ticks.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::affect::{CircumplexPoint, LegacyPoint};
use crate::catalog::Track;
use crate::cfc::{
    intent_from_logits, CfcConfig, CfcModel, CfcState, PredictionOutput, TrajectoryOutput,
    INTENT_CLASSES,
};
use crate::cmb::{self, FieldLabels};
use crate::curation::{self, MoodTarget, Playlist, RequeueReason};
use crate::ere::EreState;
use crate::mesh::{should_curate, CurationTrigger, MeshNode, ReceiveOutcome};
use crate::paf::{Paf, PafConfig, SignalKind, TimeBand};

use super::scenario::{Action, AgentSpec, ScenarioScript};
use super::{EventKind, World};

/// Minimum organic-mood movement per axis that justifies a broadcast:
/// half a legacy grid unit on the [-1, 1] scale. Below this, peers could
/// not see the difference after quantization anyway.
pub const BROADCAST_EPS: f64 = 1.0 / 99.0;

/// Listener-model event slots (one-hot block of the input vector).
const EV_PLAY: usize = 0;
const EV_SKIP: usize = 1;
const EV_PAUSE: usize = 2;
const EV_RESUME: usize = 3;
const EV_MOOD_DIAL: usize = 4;
const EV_TRACK_START: usize = 5;
const EV_TRACK_END: usize = 6;
const EV_TICK: usize = 7;

fn fnv1a(text: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in text.bytes() {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Skips under this fraction of the track count as early bails.
const SKIP_EARLY_FRACTION: f64 = 0.3;

pub struct Agent {
    pub spec: AgentSpec,
    pub ere: EreState,
    pub node: MeshNode,
    pub model: CfcModel,
    pub state: CfcState,
    pub paf: Paf,
    pub rng: ChaCha20Rng,
    pub playlist: Option<Playlist>,
    pub track_index: usize,
    /// Scenario time the current track (segment) started playing.
    track_started: f64,
    /// Seconds left on the current track; meaningful while paused.
    remaining: f64,
    /// Monotone token; a scheduled track-end is stale unless it matches.
    playback_token: u64,
    generation: u64,
    pub playing: bool,
    pub joined: bool,
    pub current_genre: Option<String>,
    /// Mood as of the last broadcast; initialized lazily at the first
    /// track start so the session baseline itself is not news. Only
    /// deltas go on the wire.
    last_broadcast_mood: Option<CircumplexPoint>,
    last_broadcast_time: f64,
    start_hour: f64,
    last_dial: (f64, f64),
    last_intent: usize,
    /// Outbound mood snapshot taken when the isolation window was armed.
    pub premesh: Option<CircumplexPoint>,
}

impl Agent {
    pub fn new(spec: &AgentSpec, script: &ScenarioScript) -> Agent {
        let config = CfcConfig::default();
        let initial = CircumplexPoint::new(spec.initial_mood[0], spec.initial_mood[1]);
        Agent {
            ere: EreState::new(initial, spec.ere_isolation),
            node: MeshNode::new(
                &spec.id,
                &spec.domain,
                spec.influence,
                spec.model_seed ^ 0x4d45_5348,
            ),
            model: CfcModel::new(&config, spec.model_seed),
            state: CfcState::fresh(&config, 0.0),
            paf: Paf::new(PafConfig::default()),
            rng: ChaCha20Rng::seed_from_u64(script.seed ^ fnv1a(&spec.id)),
            playlist: None,
            track_index: 0,
            track_started: 0.0,
            remaining: 0.0,
            playback_token: 0,
            generation: 0,
            playing: false,
            joined: true,
            current_genre: None,
            last_broadcast_mood: None,
            last_broadcast_time: f64::NEG_INFINITY,
            start_hour: script.start_hour,
            last_dial: (0.0, 0.0),
            last_intent: 0,
            premesh: None,
            spec: spec.clone(),
        }
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    fn hour(&self, now: f64) -> f64 {
        (self.start_hour + now / 3600.0).rem_euclid(24.0)
    }

    fn band(&self, now: f64) -> TimeBand {
        TimeBand::from_hour(self.hour(now) as u32 % 24)
    }

    pub fn current_track(&self) -> Option<&Track> {
        self.playlist.as_ref().and_then(|p| p.tracks.get(self.track_index))
    }

    /// The mood peers are compared against: the playing track's profile,
    /// falling back to the cached target, then to the organic mood.
    pub fn playing_mood_legacy(&self) -> LegacyPoint {
        if self.playing {
            if let Some(track) = self.current_track() {
                return track.mei_prior().to_legacy();
            }
        }
        if let Some(playlist) = &self.playlist {
            return playlist.target.to_legacy();
        }
        self.ere.organic().to_legacy()
    }

    /// Assembles the 80-wide listener input for one event.
    fn build_input(&self, event: usize, now: f64, dial_flag: bool) -> Vec<f64> {
        let config = &self.model.config;
        let mut x = vec![0.0; config.input_dim];
        if let Some(track) = self.current_track() {
            let mood = track.mei_prior();
            x[0] = mood.valence;
            x[1] = mood.arousal;
            x[2] = track.energy;
            x[3] = track.valence;
            x[4] = track.danceability;
            x[5] = track.acousticness;
            x[6] = track.tempo / 250.0;
            x[7] = (track.loudness + 60.0) / 60.0;
            x[20] = self
                .paf
                .adjusted_arousal(mood.arousal, &track.genre, self.band(now));
        }
        x[8 + event] = 1.0;
        let phase = self.hour(now) / 24.0 * std::f64::consts::TAU;
        x[16] = phase.sin();
        x[17] = phase.cos();
        let dt = (now - self.state.last_event_time).max(0.0);
        x[18] = dt.min(600.0) / 600.0;
        x[19] = dt.ln_1p() / 600.0f64.ln_1p();
        x[21] = self.last_dial.0;
        x[22] = self.last_dial.1;
        x[23] = if dial_flag { 1.0 } else { 0.0 };
        x[24] = (now / 3600.0).min(1.0);
        x
    }

    /// Steps the listener model for one event and returns the head reads.
    fn observe_event(
        &mut self,
        event: usize,
        now: f64,
        dial_flag: bool,
    ) -> (TrajectoryOutput, PredictionOutput, usize) {
        let input = self.build_input(event, now, dial_flag);
        let dt = (now - self.state.last_event_time).max(0.0);
        let trace = self
            .model
            .forward(&mut self.state, &input, dt)
            .expect("simulation clock is monotone");
        self.state.last_event_time = now;
        let traj = TrajectoryOutput::from_raw(&trace.head_z.traj);
        let pred = PredictionOutput::from_raw(&trace.head_z.pred);
        let intent = intent_from_logits(&trace.head_z.intent);
        self.last_intent = intent;
        (traj, pred, intent)
    }

    fn mood_word(mood: CircumplexPoint) -> &'static str {
        if mood.valence.abs() < 0.15 && mood.arousal.abs() < 0.15 {
            "mood:neutral"
        } else {
            match (mood.valence >= 0.0, mood.arousal >= 0.0) {
                (true, true) => "mood:bright",
                (true, false) => "mood:settled",
                (false, true) => "mood:tense",
                (false, false) => "mood:low",
            }
        }
    }

    fn labels(&self, now: f64) -> FieldLabels {
        let focus = match (self.playing, self.current_track()) {
            (true, Some(track)) => format!("genre:{} | {}", track.genre, track.title),
            _ => "idle".to_string(),
        };
        let phase = if now < 600.0 {
            "warmup"
        } else if now < 2400.0 {
            "cruise"
        } else {
            "winddown"
        };
        FieldLabels {
            focus,
            issue: match &self.playlist {
                Some(p) => format!("queue:{} tracks", p.tracks.len()),
                None => "queue:empty".to_string(),
            },
            intent: INTENT_CLASSES[self.last_intent].to_string(),
            motivation: phase.to_string(),
            commitment: format!("session:{}", self.spec.id),
            perspective: if self.joined { "room" } else { "solo" }.to_string(),
            mood: Self::mood_word(self.ere.outbound_mood()).to_string(),
        }
    }

    /// Broadcasts when the outbound mood has moved a visible amount since
    /// the last broadcast, or when `force` marks a user-initiated genre
    /// change. Mesh-adopted genres ride along in later broadcasts but do
    /// not trigger one themselves — announcing an adoption right back is
    /// the start of an echo.
    fn maybe_broadcast(&mut self, world: &mut World, now: f64, force: bool) {
        if !self.joined || !world.has_peers(&self.spec.id) {
            return;
        }
        let outbound = self.ere.outbound_mood();
        let moved = match self.last_broadcast_mood {
            None => false, // no baseline yet; set one below instead
            Some(prev) => {
                (outbound.valence - prev.valence).abs() >= BROADCAST_EPS
                    || (outbound.arousal - prev.arousal).abs() >= BROADCAST_EPS
            }
        };
        let due = (moved || force) && self.last_broadcast_mood.is_some();
        self.last_broadcast_mood = Some(outbound);
        if !due || self.last_broadcast_time == now {
            return;
        }
        self.last_broadcast_time = now;
        let labels = self.labels(now);
        let genre = cmb::extract_genre(&labels.focus).map(str::to_string);
        let cmb = self.node.broadcast(&self.ere, &labels, now);
        self.node.absorb_own(&cmb, now);
        let wire = cmb::serialize(&cmb);
        world.logs.broadcasts.push(super::BroadcastRecord {
            time: now,
            agent: self.spec.id.clone(),
            valence: outbound.valence,
            arousal: outbound.arousal,
            genre,
        });
        world.send_from(&self.spec.id, wire, now);
    }

    /// Replaces the cached playlist and, when playback is live, starts the
    /// new queue head.
    fn requeue(
        &mut self,
        world: &mut World,
        target: MoodTarget,
        genre_override: Option<std::collections::BTreeSet<String>>,
        reason: RequeueReason,
        confidence: Option<f64>,
        now: f64,
    ) {
        self.generation += 1;
        let old = self.playlist.as_ref().map(|p| p.target);
        let result = curation::build_playlist(
            target,
            genre_override,
            &world.lookup,
            &world.catalog,
            now,
            self.generation,
            &self.spec.curation,
        );
        let playlist = match result {
            Ok(p) => p,
            Err(e) => {
                world.log_event(now, &self.spec.id, "curation_failed", &e.to_string());
                return;
            }
        };
        world.logs.requeues.push(super::RequeueRecord {
            time: now,
            agent: self.spec.id.clone(),
            reason,
            old,
            new: playlist.target,
            confidence,
            genres: playlist.genres.iter().cloned().collect::<Vec<_>>().join("+"),
        });
        world.log_event(
            now,
            &self.spec.id,
            "requeue",
            &format!(
                "{} -> ({:.1}, {:.1}) via {}",
                reason.as_str(),
                playlist.target.emotion,
                playlist.target.energy,
                playlist.genres.iter().cloned().collect::<Vec<_>>().join("+")
            ),
        );
        self.playlist = Some(playlist);
        self.track_index = 0;
        if self.playing {
            self.start_track(world, now);
        } else {
            self.remaining = 0.0;
            self.playback_token += 1; // orphan any scheduled track end
        }
    }

    /// Begins playback of the current queue position: arms the track-end
    /// timer, fuses the track's mood into the emotion registers, and lets
    /// the mesh hear about any visible movement.
    fn start_track(&mut self, world: &mut World, now: f64) {
        let Some(track) = self.current_track().cloned() else {
            // The queue ran dry. `playing` still records the user's
            // intent, so the next requeue resumes playback on its own.
            world.log_event(now, &self.spec.id, "idle", "queue exhausted");
            return;
        };
        self.track_started = now;
        self.remaining = f64::from(track.duration);
        self.playback_token += 1;
        world.schedule(
            now + f64::from(track.duration),
            EventKind::TrackEnd {
                agent: self.spec.id.clone(),
                token: self.playback_token,
            },
        );
        let mood = track.mei_prior();
        self.ere.fuse_external(mood, now);
        self.ere.fuse_organic(mood, now);
        self.current_genre = Some(track.genre.clone());
        self.observe_event(EV_TRACK_START, now, false);
        world.log_event(
            now,
            &self.spec.id,
            "track_start",
            &format!("{} [{}] {}s", track.title, track.genre, track.duration),
        );
        if self.last_broadcast_mood.is_none() {
            self.last_broadcast_mood = Some(self.ere.outbound_mood());
        } else {
            self.maybe_broadcast(world, now, false);
        }
    }

    fn advance_queue(&mut self, world: &mut World, now: f64) {
        self.track_index += 1;
        self.start_track(world, now);
    }

    /// Cold-start target: the user's own mood, no model consulted.
    fn organic_target(&self) -> MoodTarget {
        let legacy = self.ere.organic().to_legacy();
        MoodTarget::new(f64::from(legacy.emotion), f64::from(legacy.energy))
            .clamped(&self.spec.curation)
    }

    pub fn handle_action(&mut self, world: &mut World, action: &Action, now: f64) {
        world.log_event(now, &self.spec.id, action.name(), "");
        match action {
            Action::Play => {
                if self.playing {
                    return;
                }
                self.observe_event(EV_PLAY, now, false);
                if self.playlist.is_none() {
                    self.playing = true;
                    self.requeue(world, self.organic_target(), None, RequeueReason::ColdStart, None, now);
                } else if self.remaining > 0.0 {
                    self.resume(world, now);
                } else {
                    self.playing = true;
                    self.start_track(world, now);
                }
            }
            Action::Skip => {
                if !self.playing {
                    return;
                }
                if let Some(track) = self.current_track().cloned() {
                    let position = (now - self.track_started) / f64::from(track.duration);
                    let kind = if position < SKIP_EARLY_FRACTION {
                        SignalKind::SkipEarly
                    } else {
                        SignalKind::SkipMid
                    };
                    self.paf.observe(
                        &track.genre,
                        self.band(now),
                        kind,
                        track.mei_prior().arousal,
                        Some(self.ere.organic().arousal),
                    );
                }
                self.observe_event(EV_SKIP, now, false);
                self.advance_queue(world, now);
            }
            Action::Pause => {
                if !self.playing {
                    return;
                }
                self.playing = false;
                if let Some(track) = self.current_track() {
                    let end = self.track_started + f64::from(track.duration);
                    self.remaining = (end - now).max(0.0);
                }
                self.playback_token += 1;
                self.observe_event(EV_PAUSE, now, false);
            }
            Action::Resume => {
                if self.playing {
                    return;
                }
                self.observe_event(EV_RESUME, now, false);
                self.resume(world, now);
            }
            Action::MoodDial { valence, arousal } => {
                self.last_dial = (*valence, *arousal);
                self.ere.set_organic(CircumplexPoint::new(*valence, *arousal));
                world.logs.dials.push(super::DialRecord {
                    time: now,
                    agent: self.spec.id.clone(),
                    valence: *valence,
                    arousal: *arousal,
                });
                self.observe_event(EV_MOOD_DIAL, now, true);
                self.maybe_broadcast(world, now, false);
            }
            Action::SetGenre { genre } => {
                if self.current_genre.as_deref() == Some(genre.as_str()) {
                    return;
                }
                self.current_genre = Some(genre.clone());
                self.node.record_genre_change(now);
                let target = self
                    .playlist
                    .as_ref()
                    .map(|p| p.target)
                    .unwrap_or_else(|| self.organic_target());
                let genres = std::collections::BTreeSet::from([genre.clone()]);
                // A user genre change voids the cache outright, same as
                // having none.
                self.requeue(world, target, Some(genres), RequeueReason::ColdStart, None, now);
                self.maybe_broadcast(world, now, true);
            }
            Action::Join => {
                self.joined = true;
            }
            Action::Leave => {
                self.joined = false;
            }
            Action::SetInfluence { level } => {
                self.node.influence = *level;
            }
        }
    }

    fn resume(&mut self, world: &mut World, now: f64) {
        if self.playlist.is_none() {
            return;
        }
        let Some(track) = self.current_track().cloned() else {
            return;
        };
        if self.remaining <= 0.0 {
            self.playing = true;
            self.start_track(world, now);
            return;
        }
        self.playing = true;
        // Rebase the start time so position math still works.
        self.track_started = now - (f64::from(track.duration) - self.remaining);
        self.playback_token += 1;
        world.schedule(
            now + self.remaining,
            EventKind::TrackEnd {
                agent: self.spec.id.clone(),
                token: self.playback_token,
            },
        );
    }

    pub fn handle_track_end(&mut self, world: &mut World, token: u64, now: f64) {
        if token != self.playback_token || !self.playing {
            return;
        }
        if let Some(track) = self.current_track().cloned() {
            self.paf.observe(
                &track.genre,
                self.band(now),
                SignalKind::Completed,
                track.mei_prior().arousal,
                Some(self.ere.organic().arousal),
            );
            world.log_event(now, &self.spec.id, "track_end", &track.title);
        }
        self.observe_event(EV_TRACK_END, now, false);
        self.advance_queue(world, now);
    }

    /// The five-minute policy pass: read the heads, maybe project a
    /// target, maybe replace the queue.
    pub fn handle_tick(&mut self, world: &mut World, now: f64) {
        if self.playing {
            if let Some(track) = self.current_track().cloned() {
                self.paf.integrate_drift(
                    &track.genre,
                    self.band(now),
                    track.mei_prior().arousal,
                    self.ere.organic().arousal,
                );
            }
        }
        let (traj, pred, intent) = self.observe_event(EV_TICK, now, false);
        world.log_event(
            now,
            &self.spec.id,
            "tick",
            &format!(
                "conf={:.3} e={:.1} n={:.1} ve={:.3} vn={:.3} x={:.3} intent={}",
                traj.confidence,
                traj.emotion,
                traj.energy,
                traj.emotion_velocity,
                traj.energy_velocity,
                pred.exploration,
                INTENT_CLASSES[intent]
            ),
        );
        let confidence = traj.confidence;
        let cache = self
            .playlist
            .as_ref()
            .map(|p| (p.target, now - p.created_at));
        let projected = curation::project(
            &traj,
            pred.exploration,
            intent,
            &self.spec.curation,
            &mut self.rng,
        );
        let Some(mut target) = projected else {
            world.logs.projections.push(super::ProjectionRecord {
                time: now,
                agent: self.spec.id.clone(),
                confidence,
                target: None,
                cache,
                requeued: None,
            });
            return;
        };
        if self.spec.curation.mesh_bias_enabled {
            if let Some(room) = self.room_target(now) {
                let coherence = self.node.coherence(self.ere.organic(), now);
                target = curation::apply_mesh_bias(target, room, coherence, &self.spec.curation);
            }
        }
        let decision =
            curation::requeue_decision(self.playlist.as_ref(), target, now, &self.spec.curation);
        world.logs.projections.push(super::ProjectionRecord {
            time: now,
            agent: self.spec.id.clone(),
            confidence,
            target: Some(target),
            cache,
            requeued: decision,
        });
        if let Some(reason) = decision {
            self.requeue(world, target, None, reason, Some(confidence), now);
        }
    }

    /// Mean mood of the fresh room (own organic plus peer estimates) on
    /// the legacy grid, for the optional shared-bias blend.
    fn room_target(&self, now: f64) -> Option<MoodTarget> {
        let mut points = vec![self.ere.organic()];
        points.extend(
            self.node
                .peers()
                .filter(|r| now - r.last_seen <= self.node.svaf.freshness_window)
                .map(|r| r.mood_ema),
        );
        if points.len() < 2 {
            return None;
        }
        let n = points.len() as f64;
        let v = points.iter().map(|p| p.valence).sum::<f64>() / n;
        let a = points.iter().map(|p| p.arousal).sum::<f64>() / n;
        let legacy = CircumplexPoint::new(v, a).to_legacy();
        Some(MoodTarget::new(
            f64::from(legacy.emotion),
            f64::from(legacy.energy),
        ))
    }

    pub fn handle_wire(&mut self, world: &mut World, wire: &str, now: f64) {
        if !self.joined {
            return;
        }
        let cmb = match cmb::deserialize(wire) {
            Ok(cmb) => cmb,
            Err(e) => {
                world.log_event(now, &self.spec.id, "wire_rejected", &e.to_string());
                return;
            }
        };
        let playing = self.playing_mood_legacy();
        let outcome = self
            .node
            .on_receive(&cmb, playing, self.current_genre.as_deref(), now);
        match outcome {
            ReceiveOutcome::Echo => {
                world.logs.echo_drops += 1;
                world.log_event(now, &self.spec.id, "echo_drop", &cmb.agent_id);
            }
            ReceiveOutcome::Stale => {
                world.logs.stale_drops += 1;
                world.log_event(now, &self.spec.id, "stale_drop", &cmb.agent_id);
            }
            ReceiveOutcome::Processed {
                fusion,
                admitted,
                trigger,
            } => {
                for field in &fusion.fields {
                    world.logs.band_counts[field.band as usize] += 1;
                }
                world.logs.svaf.push(format!(
                    "{:.3},{},{},{:.4},{},{}",
                    now,
                    self.spec.id,
                    cmb.agent_id,
                    fusion.delta_total,
                    admitted,
                    trigger.is_some()
                ));
                if let Some(trigger) = trigger {
                    self.handle_trigger(world, trigger, now);
                }
            }
        }
    }

    fn handle_trigger(&mut self, world: &mut World, trigger: CurationTrigger, now: f64) {
        let mut genre_override = None;
        // Mood mismatch alone (genre treated as agreeing) — decides
        // whether a cooldown-blocked genre change still warrants a
        // mood-side requeue.
        let mood_needed = should_curate(
            self.node.influence.threshold(),
            trigger.target,
            self.playing_mood_legacy(),
            None,
            None,
        );
        if let Some(genre) = &trigger.genre {
            if self.current_genre.as_deref() == Some(genre.as_str()) {
                genre_override = Some(std::collections::BTreeSet::from([genre.clone()]));
            } else if self.spec.domain == "music" {
                if self.node.genre_change_allowed(now) {
                    self.node.record_genre_change(now);
                    world.logs.genre_adoptions.push(super::GenreRecord {
                        time: now,
                        agent: self.spec.id.clone(),
                        peer: trigger.peer_id.clone(),
                        genre: genre.clone(),
                    });
                    self.current_genre = Some(genre.clone());
                    genre_override = Some(std::collections::BTreeSet::from([genre.clone()]));
                } else {
                    world.logs.genre_blocked.push(super::GenreRecord {
                        time: now,
                        agent: self.spec.id.clone(),
                        peer: trigger.peer_id.clone(),
                        genre: genre.clone(),
                    });
                    if !mood_needed {
                        // Genre-only trigger and the change is on cooldown:
                        // nothing left to act on.
                        return;
                    }
                }
            }
        }
        let premesh = self.ere.outbound_mood();
        self.ere.mark_mesh_induced(now);
        if self.ere.isolated(now) {
            self.premesh = Some(premesh);
            world.logs.isolation_marks.push(super::IsolationRecord {
                time: now,
                agent: self.spec.id.clone(),
                valence: premesh.valence,
                arousal: premesh.arousal,
            });
        }
        let target = MoodTarget::new(
            f64::from(trigger.target.emotion),
            f64::from(trigger.target.energy),
        )
        .clamped(&self.spec.curation);
        self.requeue(world, target, genre_override, RequeueReason::Mesh, None, now);
    }
}
