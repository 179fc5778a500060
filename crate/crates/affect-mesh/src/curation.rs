//! Trajectory-led playlist curation.
//!
//! Every policy tick the listener model's trajectory estimate is projected
//! a few minutes ahead — current mood plus velocity times horizon, nudged
//! by the decoded intent and, when the model is feeling exploratory, a
//! little jitter. The projected target is compared against the playlist
//! the node is already holding; only a meaningful divergence, an expired
//! playlist, or an empty slot justifies hitting the catalog again. Low
//! model confidence vetoes the whole tick: a guess about where the mood is
//! heading is not a reason to throw away a working queue.
//!
//! Playlist assembly goes through the mood-anchor lookup: the target's
//! grid anchor is expanded one ring of neighbors in each direction, their
//! seed genres are pooled, and matching catalog tracks are ranked by
//! feature distance to the target.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::affect::{LegacyPoint, MoodLookup, LEGACY_MAX};
use crate::catalog::{Catalog, Track};
use crate::cfc::TrajectoryOutput;

/// Policy tunables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurationConfig {
    /// Seconds between policy ticks.
    pub tick_seconds: f64,
    /// How far ahead the trajectory is projected, in seconds.
    pub projection_horizon: f64,
    /// Ticks with model confidence below this do nothing.
    pub confidence_gate: f64,
    /// Re-curate when the new target leaves the cached target by more than
    /// this on either axis (legacy units).
    pub divergence_threshold: f64,
    /// Playlist lifetime in seconds.
    pub playlist_validity: f64,
    /// Targets are kept inside [min, max] on both axes.
    pub target_min: f64,
    pub target_max: f64,
    /// Exploration above this gate adds target jitter.
    pub exploration_gate: f64,
    /// Jitter amplitude (uniform, per axis, legacy units).
    pub exploration_jitter: f64,
    /// A playlist is filled until it covers at least this many seconds.
    pub min_playlist_seconds: u32,
    /// Anchor-expansion radius in legacy units.
    pub expansion_radius: u8,
    /// Room-coherence bias strength (disabled by default).
    pub mesh_bias_lambda: f64,
    pub mesh_bias_enabled: bool,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            tick_seconds: 300.0,
            projection_horizon: 300.0,
            confidence_gate: 0.4,
            divergence_threshold: 15.0,
            playlist_validity: 1800.0,
            target_min: 5.0,
            target_max: 95.0,
            exploration_gate: 0.3,
            exploration_jitter: 5.0,
            min_playlist_seconds: 1800,
            expansion_radius: 10,
            mesh_bias_lambda: 0.5,
            mesh_bias_enabled: false,
        }
    }
}

/// A curation target on the legacy grid (kept fractional until lookup).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoodTarget {
    pub emotion: f64,
    pub energy: f64,
}

impl MoodTarget {
    pub fn new(emotion: f64, energy: f64) -> MoodTarget {
        MoodTarget { emotion, energy }
    }

    /// Pulls both axes into the configured safe interior.
    pub fn clamped(self, config: &CurationConfig) -> MoodTarget {
        MoodTarget {
            emotion: self.emotion.clamp(config.target_min, config.target_max),
            energy: self.energy.clamp(config.target_min, config.target_max),
        }
    }

    /// Nearest legacy grid point (half-up rounding).
    pub fn to_legacy(self) -> LegacyPoint {
        LegacyPoint::new(
            self.emotion.round().clamp(0.0, LEGACY_MAX as f64) as u8,
            self.energy.round().clamp(0.0, LEGACY_MAX as f64) as u8,
        )
    }
}

/// Per-intent target offsets: energizing pushes both axes up, calming
/// pulls energy down; the rest steer by trajectory alone.
fn intent_offset(intent: usize) -> (f64, f64) {
    match intent {
        1 => (5.0, 15.0),  // energize
        2 => (0.0, -15.0), // calm
        _ => (0.0, 0.0),
    }
}

/// Projects a curation target from the model's trajectory estimate.
/// Returns `None` when confidence sits under the gate — in that case the
/// RNG is untouched, so a gated tick leaves no trace in the random stream.
pub fn project(
    traj: &TrajectoryOutput,
    exploration: f64,
    intent: usize,
    config: &CurationConfig,
    rng: &mut impl Rng,
) -> Option<MoodTarget> {
    if traj.confidence < config.confidence_gate {
        return None;
    }
    let (off_e, off_n) = intent_offset(intent);
    let mut target = MoodTarget {
        emotion: traj.emotion + config.projection_horizon * traj.emotion_velocity + off_e,
        energy: traj.energy + config.projection_horizon * traj.energy_velocity + off_n,
    };
    if exploration > config.exploration_gate {
        let j = config.exploration_jitter;
        target.emotion += rng.gen_range(-j..=j);
        target.energy += rng.gen_range(-j..=j);
    }
    Some(target.clamped(config))
}

/// Blends the solo target toward the room's shared mood, weighted by room
/// coherence. A disabled bias or an incoherent room leaves the target
/// alone.
pub fn apply_mesh_bias(
    target: MoodTarget,
    room: MoodTarget,
    coherence: f64,
    config: &CurationConfig,
) -> MoodTarget {
    if !config.mesh_bias_enabled {
        return target;
    }
    let k = config.mesh_bias_lambda * coherence.clamp(0.0, 1.0);
    MoodTarget {
        emotion: (1.0 - k) * target.emotion + k * room.emotion,
        energy: (1.0 - k) * target.energy + k * room.energy,
    }
    .clamped(config)
}

/// Why a tick decided to rebuild the queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequeueReason {
    /// Nothing cached yet.
    ColdStart,
    /// The projected target left the cached playlist's target.
    Divergence,
    /// The cached playlist outlived its validity.
    Expired,
    /// A peer's state forced a re-curation.
    Mesh,
}

impl RequeueReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RequeueReason::ColdStart => "cold-start",
            RequeueReason::Divergence => "divergence",
            RequeueReason::Expired => "expired",
            RequeueReason::Mesh => "mesh",
        }
    }
}

/// A ranked, time-filled queue.
#[derive(Debug, Clone, PartialEq)]
pub struct Playlist {
    pub tracks: Vec<Track>,
    pub target: MoodTarget,
    pub genres: BTreeSet<String>,
    pub created_at: f64,
    pub total_seconds: u32,
    /// The catalog ran dry before the queue reached its minimum length.
    pub exhausted: bool,
    /// Monotone id used to drop stale track-end events after a requeue.
    pub generation: u64,
}

/// Decides whether `target` justifies replacing the cached playlist.
pub fn requeue_decision(
    cache: Option<&Playlist>,
    target: MoodTarget,
    now: f64,
    config: &CurationConfig,
) -> Option<RequeueReason> {
    let Some(playlist) = cache else {
        return Some(RequeueReason::ColdStart);
    };
    if now - playlist.created_at > config.playlist_validity {
        return Some(RequeueReason::Expired);
    }
    let de = (target.emotion - playlist.target.emotion).abs();
    let dn = (target.energy - playlist.target.energy).abs();
    if de > config.divergence_threshold || dn > config.divergence_threshold {
        return Some(RequeueReason::Divergence);
    }
    None
}

/// A curation failure: the genre vocabulary and the catalog don't meet.
#[derive(Debug, thiserror::Error)]
#[error("no catalog tracks match genres [{}]: catalog/vocabulary mismatch", genres.join(", "))]
pub struct NoCandidates {
    pub genres: Vec<String>,
}

/// Builds a playlist for `target`. Genres come from the anchor
/// neighborhood around the target unless an explicit override is given
/// (mesh-triggered curation pins the peer's genre). Ranking is exact:
/// Euclidean feature distance to the unit-scaled target, ties broken by
/// track id, so two nodes with the same catalog and target build the same
/// queue. Zero matching tracks is an error — it means the lookup's genre
/// vocabulary and the catalog disagree — while too few *seconds* is just
/// the exhausted flag.
pub fn build_playlist(
    target: MoodTarget,
    genre_override: Option<BTreeSet<String>>,
    lookup: &MoodLookup,
    catalog: &Catalog,
    now: f64,
    generation: u64,
    config: &CurationConfig,
) -> Result<Playlist, NoCandidates> {
    let legacy = target.to_legacy();
    let genres = genre_override.unwrap_or_else(|| {
        let anchor = lookup.nearest_anchor(legacy);
        lookup
            .adjacent_expansion(anchor.id, config.expansion_radius)
            .iter()
            .flat_map(|a| a.seed_genres.iter().cloned())
            .collect()
    });

    let mut candidates = catalog.search(&genres, usize::MAX);
    if candidates.is_empty() {
        return Err(NoCandidates {
            genres: genres.into_iter().collect(),
        });
    }
    let unit = (target.emotion / LEGACY_MAX as f64, target.energy / LEGACY_MAX as f64);
    let distance = |t: &Track| {
        let p = t.feature_point();
        ((p.0 - unit.0).powi(2) + (p.1 - unit.1).powi(2)).sqrt()
    };
    candidates.sort_by(|a, b| {
        distance(a)
            .partial_cmp(&distance(b))
            .expect("finite feature distances")
            .then_with(|| a.id.cmp(&b.id))
    });

    let mut tracks: Vec<Track> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut total = 0u32;
    for track in candidates {
        if total >= config.min_playlist_seconds {
            break;
        }
        // A loaded catalog may repeat ids; the queue never does.
        if !seen.insert(track.id.clone()) {
            continue;
        }
        total += track.duration;
        tracks.push(track.clone());
    }
    let exhausted = total < config.min_playlist_seconds;
    Ok(Playlist {
        tracks,
        target,
        genres,
        created_at: now,
        total_seconds: total,
        exhausted,
        generation,
    })
}
