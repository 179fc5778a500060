//! The mesh node: everything one agent needs to participate in the
//! block-exchange protocol.
//!
//! A node owns the *protocol-side* state — the keys it has broadcast (for
//! lineage echo detection), its anchor memory (for drift evaluation), one
//! record per peer (mood estimates with time-aware smoothing), the frozen
//! mesh-runtime model integrating the room, and the influence/genre
//! policy knobs. It deliberately does not own the player: what is
//! currently playing and which genre is active are passed in at receive
//! time, and curation itself is the caller's job. The node only answers
//! "should this incoming block trigger one?".
//!
//! Two rules shape everything here. Outbound mood is always the organic
//! register — blocks never launder mesh-induced drift back into the room.
//! And an incoming block whose lineage intersects our own broadcast keys
//! is dropped unread, which is the other half of the echo-loop fix.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::affect::{CircumplexPoint, LegacyPoint};
use crate::cfc::{CfcConfig, CfcModel, CfcState};
use crate::cmb::{extract_genre, make_cmb, Cmb, CmbKey, FieldLabels, HashEmbedder, KeyGen, EMBED_DIM};
use crate::ere::EreState;
use crate::svaf::{self, AnchorMemory, FieldWeights, FusionResult, SvafConfig};

/// All nodes embed labels with the same seed, so identical text lands on
/// identical vectors mesh-wide — drift then measures semantic distance
/// between agents, not a disagreement between their hash functions.
pub const EMBEDDER_SEED: u64 = 0xCA7;

/// Seconds a genre change must wait after the previous one.
pub const GENRE_COOLDOWN: f64 = 300.0;

/// Fast τ range for the mesh model's reactive half.
pub const MESH_TAU_FAST: (f64, f64) = (0.5, 5.0);
/// Slow τ range for its context half.
pub const MESH_TAU_SLOW: (f64, f64) = (30.0, 300.0);

/// Diameter of the mood square, used to normalize dispersion into [0,1].
const RHO_NORM: f64 = 2.0 * std::f64::consts::SQRT_2;

/// How hard peers are allowed to steer local curation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfluenceLevel {
    /// Peers must leave the ±15 legacy box around the playing mood.
    #[default]
    Gentle,
    /// The tight ±5 box: nearly every peer shift triggers curation.
    Responsive,
}

impl InfluenceLevel {
    /// Per-axis threshold in legacy units.
    pub fn threshold(&self) -> f64 {
        match self {
            InfluenceLevel::Gentle => 15.0,
            InfluenceLevel::Responsive => 5.0,
        }
    }
}

/// What a node knows about one peer.
#[derive(Debug, Clone, PartialEq)]
pub struct PeerRecord {
    pub peer_id: String,
    /// Raw mood payload of the latest block.
    pub last_mood: CircumplexPoint,
    /// The peer's latest genre claim, if its last block made one.
    pub last_genre: Option<String>,
    pub last_seen: f64,
    /// Smoothed mood used for the coherence signal. The smoothing rate
    /// follows the mesh model's fast neurons: the mean of their decay
    /// gates over the gap since the last block sets how much of the old
    /// estimate survives.
    pub mood_ema: CircumplexPoint,
}

/// Outcome of feeding one incoming block to the node.
// One short-lived value per delivery; boxing the fusion payload would cost
// more in ceremony than the size skew costs in moves.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum ReceiveOutcome {
    /// Lineage intersected our own keys; dropped with no state change.
    Echo,
    /// Outside the freshness window; dropped after evaluation.
    Stale,
    /// Evaluated, peer record updated, mesh model stepped.
    Processed {
        fusion: FusionResult,
        /// How many fields entered anchor memory.
        admitted: usize,
        /// Present when the block should trigger a curation pass.
        trigger: Option<CurationTrigger>,
    },
}

/// The data a curation pass needs when a peer forces one.
#[derive(Debug, Clone, PartialEq)]
pub struct CurationTrigger {
    pub peer_id: String,
    /// The peer's mood payload.
    pub mood: CircumplexPoint,
    /// Same mood on the legacy grid — the curation target.
    pub target: LegacyPoint,
    /// The peer's genre claim; `None` for non-music senders, which carry
    /// no genre authority even when their focus label names one.
    pub genre: Option<String>,
}

/// Decides whether a peer's state justifies re-curating. The skip rule is
/// conjunctive: a peer is ignorable only when its genre agrees with ours
/// *and* its mood sits inside the threshold box on both axes. A peer that
/// makes no genre claim agrees with anything.
pub fn should_curate(
    threshold: f64,
    peer_mood: LegacyPoint,
    playing_mood: LegacyPoint,
    peer_genre: Option<&str>,
    current_genre: Option<&str>,
) -> bool {
    let genre_matches = match peer_genre {
        None => true,
        Some(g) => current_genre == Some(g),
    };
    let de = (f64::from(peer_mood.emotion) - f64::from(playing_mood.emotion)).abs();
    let dn = (f64::from(peer_mood.energy) - f64::from(playing_mood.energy)).abs();
    !(genre_matches && de <= threshold && dn <= threshold)
}

/// Dispersion-complement coherence over a set of mood points: 1 minus the
/// mean pairwise Euclidean distance, normalized by the square's diameter.
/// Fewer than two participants is perfect coherence by convention.
pub fn rho_from_moods(moods: &[CircumplexPoint]) -> f64 {
    if moods.len() < 2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (i, a) in moods.iter().enumerate() {
        for b in &moods[i + 1..] {
            sum += ((a.valence - b.valence).powi(2) + (a.arousal - b.arousal).powi(2)).sqrt();
            pairs += 1;
        }
    }
    (1.0 - sum / pairs as f64 / RHO_NORM).clamp(0.0, 1.0)
}

/// One agent's protocol endpoint.
#[derive(Debug, Clone)]
pub struct MeshNode {
    pub id: String,
    /// Application domain; only `"music"` senders carry genre authority.
    pub domain: String,
    pub influence: InfluenceLevel,
    pub svaf: SvafConfig,
    pub weights: FieldWeights,
    /// Frozen room integrator (seeded random; never trained).
    pub model: CfcModel,
    pub state: CfcState,
    memory: AnchorMemory,
    peers: BTreeMap<String, PeerRecord>,
    own_keys: BTreeSet<CmbKey>,
    keygen: KeyGen,
    embedder: HashEmbedder,
    /// Fixed 12×32 map folding the gate-blended field embeddings into the
    /// mesh model's input. Drawn once from the model seed and frozen with
    /// the rest of the model.
    projection: Vec<Vec<f64>>,
    last_genre_change: Option<f64>,
}

impl MeshNode {
    pub fn new(id: &str, domain: &str, influence: InfluenceLevel, model_seed: u64) -> MeshNode {
        let config = CfcConfig::mesh();
        let model = CfcModel::new_with_tau_split(&config, model_seed, MESH_TAU_FAST, MESH_TAU_SLOW);
        let state = CfcState::fresh(&config, 0.0);
        let mut rng = ChaCha20Rng::seed_from_u64(model_seed ^ 0x6d65_7368);
        let scale = 1.0 / (EMBED_DIM as f64).sqrt();
        let projection = (0..config.input_dim - 4)
            .map(|_| (0..EMBED_DIM).map(|_| rng.gen_range(-scale..scale)).collect())
            .collect();
        let svaf = SvafConfig::default();
        MeshNode {
            id: id.to_string(),
            domain: domain.to_string(),
            influence,
            memory: AnchorMemory::new(svaf.capacity),
            svaf,
            weights: FieldWeights::default(),
            model,
            state,
            peers: BTreeMap::new(),
            own_keys: BTreeSet::new(),
            keygen: KeyGen::new(id),
            embedder: HashEmbedder::new(EMBEDDER_SEED),
            projection,
            last_genre_change: None,
        }
    }

    pub fn own_keys(&self) -> &BTreeSet<CmbKey> {
        &self.own_keys
    }

    pub fn peers(&self) -> impl Iterator<Item = &PeerRecord> {
        self.peers.values()
    }

    pub fn peer(&self, id: &str) -> Option<&PeerRecord> {
        self.peers.get(id)
    }

    pub fn memory(&self) -> &AnchorMemory {
        &self.memory
    }

    pub fn embedder(&self) -> &HashEmbedder {
        &self.embedder
    }

    /// Full receive pipeline for one incoming block.
    pub fn on_receive(
        &mut self,
        cmb: &Cmb,
        playing: LegacyPoint,
        current_genre: Option<&str>,
        now: f64,
    ) -> ReceiveOutcome {
        if cmb.is_echo(&self.own_keys) {
            return ReceiveOutcome::Echo;
        }
        let fusion = svaf::evaluate(cmb, &self.memory, &self.weights, &self.svaf, now);
        if !fusion.fresh {
            return ReceiveOutcome::Stale;
        }
        let admitted = svaf::admit(&mut self.memory, cmb, &fusion, now);

        // The mood payload is guaranteed readable on fresh blocks, so the
        // peer record can always advance.
        let genre = if cmb.is_music() {
            extract_genre(&cmb.fields.focus.label).map(str::to_string)
        } else {
            None
        };
        self.update_peer(&cmb.agent_id, fusion.mood, genre.clone(), now);

        let input = self.fusion_input(cmb, &fusion);
        let dt = now - self.state.last_event_time;
        self.model
            .forward(&mut self.state, &input, dt)
            .expect("simulation clock is monotone");
        self.state.last_event_time = now;

        let target = fusion.mood.to_legacy();
        let trigger = should_curate(
            self.influence.threshold(),
            target,
            playing,
            genre.as_deref(),
            current_genre,
        )
        .then(|| CurationTrigger {
            peer_id: cmb.agent_id.clone(),
            mood: fusion.mood,
            target,
            genre,
        });
        ReceiveOutcome::Processed {
            fusion,
            admitted,
            trigger,
        }
    }

    /// Builds an outbound block. The mood payload comes from the organic
    /// register — during an isolation window that is the pre-mesh value —
    /// and the new key joins the own-keys set so any future derivative of
    /// this block is recognized as an echo.
    pub fn broadcast(&mut self, ere: &EreState, labels: &FieldLabels, now: f64) -> Cmb {
        let cmb = make_cmb(
            &mut self.keygen,
            &self.id,
            &self.domain,
            now,
            labels,
            ere.outbound_mood(),
            &self.embedder,
        );
        self.own_keys.insert(cmb.key.clone());
        cmb
    }

    /// Stores a block's own field embeddings as anchors. Agents feed their
    /// own broadcasts (and played-track context) through this, which is
    /// what gives drift evaluation something to compare incoming blocks
    /// against.
    pub fn absorb_own(&mut self, cmb: &Cmb, now: f64) {
        for name in crate::cmb::FieldName::ALL {
            let (_, embedding) = cmb.fields.get(name);
            self.memory.push(name, embedding.to_vec(), now);
        }
    }

    /// True when the cooldown permits another genre change.
    pub fn genre_change_allowed(&self, now: f64) -> bool {
        match self.last_genre_change {
            None => true,
            Some(t) => now - t >= GENRE_COOLDOWN,
        }
    }

    pub fn record_genre_change(&mut self, now: f64) {
        self.last_genre_change = Some(now);
    }

    /// Room coherence: own organic mood plus every fresh peer estimate.
    pub fn coherence(&self, own_mood: CircumplexPoint, now: f64) -> f64 {
        let mut moods = vec![own_mood];
        moods.extend(
            self.peers
                .values()
                .filter(|r| now - r.last_seen <= self.svaf.freshness_window)
                .map(|r| r.mood_ema),
        );
        rho_from_moods(&moods)
    }

    /// Mean decay gate of the fast neurons over a gap of `dt` seconds —
    /// the fraction of an old peer-mood estimate that survives.
    fn mean_fast_gate(&self, dt: f64) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for cell in &self.model.cells {
            for lt in &cell.log_tau {
                let tau = lt.exp();
                if tau < MESH_TAU_FAST.1 {
                    sum += (-dt / tau).exp();
                    count += 1;
                }
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    fn update_peer(&mut self, peer_id: &str, mood: CircumplexPoint, genre: Option<String>, now: f64) {
        let keep = match self.peers.get(peer_id) {
            Some(rec) => self.mean_fast_gate((now - rec.last_seen).max(0.0)),
            None => 0.0,
        };
        let rec = self
            .peers
            .entry(peer_id.to_string())
            .or_insert_with(|| PeerRecord {
                peer_id: peer_id.to_string(),
                last_mood: mood,
                last_genre: None,
                last_seen: now,
                mood_ema: mood,
            });
        rec.mood_ema = CircumplexPoint::new(
            keep * rec.mood_ema.valence + (1.0 - keep) * mood.valence,
            keep * rec.mood_ema.arousal + (1.0 - keep) * mood.arousal,
        );
        rec.last_mood = mood;
        rec.last_genre = genre;
        rec.last_seen = now;
    }

    /// Mesh model input: mood payload, total drift, mean gate, and a fixed
    /// projection of the gate-blended field embeddings.
    fn fusion_input(&self, cmb: &Cmb, fusion: &FusionResult) -> Vec<f64> {
        let mut x = vec![0.0; self.model.config.input_dim];
        x[0] = fusion.mood.valence;
        x[1] = fusion.mood.arousal;
        x[2] = fusion.delta_total;
        x[3] = fusion.fields.iter().map(|f| f.gate).sum::<f64>() / fusion.fields.len() as f64;
        let mut blend = vec![0.0; EMBED_DIM];
        for f in &fusion.fields {
            let (_, embedding) = cmb.fields.get(f.name);
            for (b, e) in blend.iter_mut().zip(embedding) {
                *b += f.gate * e;
            }
        }
        for (i, row) in self.projection.iter().enumerate() {
            x[4 + i] = row.iter().zip(&blend).map(|(p, b)| p * b).sum();
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmb::{derive_cmb, CmbField, FieldName, MoodField};

    fn labels(focus: &str) -> FieldLabels {
        FieldLabels {
            focus: focus.to_string(),
            issue: "none".into(),
            intent: "maintain".into(),
            motivation: "steady_listening".into(),
            commitment: "playback_active".into(),
            perspective: "solo_session".into(),
            mood: "settled".into(),
        }
    }

    fn node(id: &str) -> MeshNode {
        MeshNode::new(id, "music", InfluenceLevel::Gentle, 7)
    }

    /// A block whose seven embeddings all sit at an exact cosine to the
    /// basis vector e₁, letting tests pick the drift band precisely.
    fn crafted_cmb(agent: &str, timestamp: f64, cos: f64) -> Cmb {
        let mut v = vec![0.0; EMBED_DIM];
        v[0] = cos;
        v[1] = (1.0 - cos * cos).sqrt();
        let field = |label: &str| CmbField {
            label: label.to_string(),
            embedding: v.clone(),
        };
        Cmb {
            key: CmbKey(format!("{agent}:000001")),
            agent_id: agent.to_string(),
            domain: "music".into(),
            timestamp,
            parents: Vec::new(),
            ancestors: Vec::new(),
            fields: crate::cmb::CmbFields {
                focus: field("genre:jazz | Blue Hour"),
                issue: field("none"),
                intent: field("maintain"),
                motivation: field("steady"),
                commitment: field("active"),
                perspective: field("duo"),
                mood: MoodField {
                    label: "settled".into(),
                    embedding: v.clone(),
                    valence: 0.3,
                    arousal: 0.6,
                },
            },
        }
    }

    fn seed_basis_anchors(node: &mut MeshNode) {
        let mut e1 = vec![0.0; EMBED_DIM];
        e1[0] = 1.0;
        for name in FieldName::ALL {
            node.memory.push(name, e1.clone(), 0.0);
        }
    }

    #[test]
    fn echoes_drop_without_any_state_change() {
        let mut a = node("a");
        let ere = EreState::new(CircumplexPoint::new(0.1, 0.2), true);
        let own = a.broadcast(&ere, &labels("genre:jazz"), 10.0);

        // A peer derives from our block and sends the derivative back.
        let mut peer_keys = KeyGen::new("b");
        let reply = derive_cmb(
            &mut peer_keys,
            &own,
            "b",
            "music",
            12.0,
            &labels("genre:jazz"),
            CircumplexPoint::new(0.5, 0.5),
            &HashEmbedder::new(EMBEDDER_SEED),
        );
        let out = a.on_receive(&reply, LegacyPoint::new(50, 50), None, 12.5);
        assert_eq!(out, ReceiveOutcome::Echo);
        assert!(a.peer("b").is_none());
        assert!(a.memory().is_empty());
    }

    #[test]
    fn stale_blocks_drop_after_evaluation() {
        let mut a = node("a");
        let cmb = crafted_cmb("b", 100.0, 0.9);
        let out = a.on_receive(&cmb, LegacyPoint::new(50, 50), None, 100.0 + 1800.01);
        assert_eq!(out, ReceiveOutcome::Stale);
        assert!(a.peer("b").is_none(), "stale blocks never touch peer state");
    }

    #[test]
    fn fresh_aligned_blocks_update_peer_memory_and_model() {
        let mut a = node("a");
        seed_basis_anchors(&mut a);
        let cmb = crafted_cmb("b", 100.0, 0.9); // drift 0.1 → aligned
        let h_before = a.state.h.clone();
        let out = a.on_receive(&cmb, LegacyPoint::new(50, 50), None, 101.0);
        let ReceiveOutcome::Processed {
            fusion,
            admitted,
            trigger,
        } = out
        else {
            panic!("expected processed outcome");
        };
        assert_eq!(admitted, 7, "all fields aligned at cosine 0.9");
        assert!(fusion.fresh);
        let rec = a.peer("b").expect("peer recorded");
        assert_eq!(rec.last_mood, CircumplexPoint::new(0.3, 0.6));
        assert_eq!(rec.mood_ema, rec.last_mood, "first sighting adopts the payload");
        assert_eq!(rec.last_genre.as_deref(), Some("jazz"));
        assert_ne!(a.state.h, h_before, "mesh model stepped");
        assert_eq!(a.state.last_event_time, 101.0);
        // Peer at legacy ≈ (64, 79) vs playing (50, 50): way outside ±15.
        assert!(trigger.is_some());
    }

    #[test]
    fn repeated_labels_become_redundant_not_admitted() {
        let mut a = node("a");
        let ere = EreState::new(CircumplexPoint::new(0.0, 0.0), true);
        let own = a.broadcast(&ere, &labels("genre:jazz | Blue Hour"), 5.0);
        a.absorb_own(&own, 5.0);

        // A different agent using the same vocabulary: every embedding is
        // bit-identical (shared embedder seed), so drift is zero.
        let mut b = node("b");
        let cmb = b.broadcast(
            &EreState::new(CircumplexPoint::new(0.2, 0.2), true),
            &labels("genre:jazz | Blue Hour"),
            6.0,
        );
        let out = a.on_receive(&cmb, LegacyPoint::new(50, 50), Some("jazz"), 7.0);
        let ReceiveOutcome::Processed {
            fusion, admitted, ..
        } = out
        else {
            panic!("expected processed outcome");
        };
        assert_eq!(admitted, 0, "redundant content adds no anchors");
        for f in &fusion.fields {
            assert!(f.drift < 0.05, "{:?} drift {}", f.name, f.drift);
        }
        // The peer record still advanced: mood rides the guaranteed lane.
        assert_eq!(a.peer("b").unwrap().last_mood, CircumplexPoint::new(0.2, 0.2));
    }

    #[test]
    fn curation_skip_rule_is_conjunctive() {
        let playing = LegacyPoint::new(50, 50);
        // Gentle, inside the box, genre agrees → skip.
        assert!(!should_curate(
            15.0,
            LegacyPoint::new(60, 62),
            playing,
            Some("jazz"),
            Some("jazz")
        ));
        // Responsive tightens the box: Δemotion 6 > 5.
        assert!(should_curate(
            5.0,
            LegacyPoint::new(56, 50),
            playing,
            Some("jazz"),
            Some("jazz")
        ));
        // Same Δ but the genre differs → curate regardless.
        assert!(should_curate(
            15.0,
            LegacyPoint::new(60, 62),
            playing,
            Some("edm"),
            Some("jazz")
        ));
        // No genre claim agrees with anything.
        assert!(!should_curate(15.0, LegacyPoint::new(60, 62), playing, None, Some("jazz")));
        // A claim against our no-genre state is a mismatch.
        assert!(should_curate(15.0, LegacyPoint::new(60, 62), playing, Some("edm"), None));
        // Boundary: Δ exactly at threshold skips.
        assert!(!should_curate(
            15.0,
            LegacyPoint::new(65, 35),
            playing,
            None,
            None
        ));
    }

    #[test]
    fn genre_cooldown_arithmetic() {
        let mut a = node("a");
        assert!(a.genre_change_allowed(0.0), "no change on record yet");
        a.record_genre_change(1000.0);
        assert!(!a.genre_change_allowed(1200.0)); // 200 s later
        assert!(a.genre_change_allowed(1300.0)); // exactly 300 s
        assert!(a.genre_change_allowed(1301.0));
    }

    #[test]
    fn non_music_senders_have_no_genre_authority() {
        let mut a = node("a");
        let mut cmb = crafted_cmb("wearable", 10.0, 0.9);
        cmb.domain = "fitness".into();
        // Focus label names a genre, but the domain voids the claim.
        let out = a.on_receive(&cmb, LegacyPoint::new(10, 10), Some("jazz"), 11.0);
        let ReceiveOutcome::Processed { trigger, .. } = out else {
            panic!("expected processed outcome");
        };
        let trigger = trigger.expect("mood far outside the box still triggers");
        assert_eq!(trigger.genre, None);
        assert_eq!(a.peer("wearable").unwrap().last_genre, None);
    }

    #[test]
    fn coherence_matches_the_dispersion_complement() {
        let a = node("a");
        let now = 100.0;
        // Solo: no peers at all.
        assert_eq!(a.coherence(CircumplexPoint::new(0.3, -0.4), now), 1.0);

        // Two participants at identical moods.
        let mut b = node("b");
        b.update_peer("c", CircumplexPoint::new(0.3, -0.4), None, now);
        assert_eq!(b.coherence(CircumplexPoint::new(0.3, -0.4), now), 1.0);

        // Opposite corners span the full diameter.
        let mut c = node("c");
        c.update_peer("d", CircumplexPoint::new(1.0, 1.0), None, now);
        assert_eq!(c.coherence(CircumplexPoint::new(-1.0, -1.0), now), 0.0);

        // A peer last seen beyond the freshness window drops out.
        let later = now + 1800.01;
        assert_eq!(c.coherence(CircumplexPoint::new(-1.0, -1.0), later), 1.0);
    }

    #[test]
    fn uniform_contraction_never_lowers_coherence() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        for _ in 0..200 {
            let n = rng.gen_range(2..6);
            let moods: Vec<CircumplexPoint> = (0..n)
                .map(|_| {
                    CircumplexPoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
                .collect();
            let cx = moods.iter().map(|m| m.valence).sum::<f64>() / n as f64;
            let cy = moods.iter().map(|m| m.arousal).sum::<f64>() / n as f64;
            let rho = rho_from_moods(&moods);
            let s = rng.gen_range(0.0..1.0);
            let tighter: Vec<CircumplexPoint> = moods
                .iter()
                .map(|m| {
                    CircumplexPoint::new(cx + s * (m.valence - cx), cy + s * (m.arousal - cy))
                })
                .collect();
            assert!(rho_from_moods(&tighter) >= rho - 1e-12);
        }
    }

    #[test]
    fn two_party_move_toward_each_other_raises_coherence() {
        let mut rng = ChaCha20Rng::seed_from_u64(32);
        for _ in 0..200 {
            let a = CircumplexPoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let b = CircumplexPoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let rho = rho_from_moods(&[a, b]);
            let t = rng.gen_range(0.0..1.0);
            // With two participants the centroid is the midpoint, so any
            // step toward it shrinks the only pairwise distance.
            let moved = CircumplexPoint::new(
                a.valence + t * ((a.valence + b.valence) / 2.0 - a.valence),
                a.arousal + t * ((a.arousal + b.arousal) / 2.0 - a.arousal),
            );
            assert!(rho_from_moods(&[moved, b]) >= rho - 1e-12);
        }
    }

    #[test]
    fn peer_smoothing_rate_follows_the_gap() {
        let mut a = node("a");
        let hot = CircumplexPoint::new(0.8, 0.8);
        let cold = CircumplexPoint::new(0.0, 0.0);
        a.update_peer("b", hot, None, 100.0);
        assert_eq!(a.peer("b").unwrap().mood_ema, hot);

        // A near-instant follow-up barely moves the estimate…
        a.update_peer("b", cold, None, 100.001);
        let quick = a.peer("b").unwrap().mood_ema;
        assert!(quick.valence > 0.7, "ema jumped too fast: {quick:?}");

        // …while a long silence hands the estimate to the new payload.
        a.update_peer("b", cold, None, 1200.0);
        let settled = a.peer("b").unwrap().mood_ema;
        assert!(settled.valence.abs() < 0.01, "stale estimate survived: {settled:?}");
        assert_eq!(a.peer("b").unwrap().last_seen, 1200.0);
    }

    #[test]
    fn broadcast_carries_organic_mood_and_records_lineage() {
        let mut a = node("a");
        let mut ere = EreState::new(CircumplexPoint::new(0.2, 0.1), true);
        ere.mark_mesh_induced(50.0);
        // Mesh-induced fusion inside the window: organic must not move.
        assert!(!ere.fuse_organic(CircumplexPoint::new(-0.9, -0.9), 55.0));

        let cmb = a.broadcast(&ere, &labels("genre:pop"), 60.0);
        assert_eq!(cmb.fields.mood.valence, 0.2);
        assert_eq!(cmb.fields.mood.arousal, 0.1);
        assert_eq!(cmb.timestamp, 60.0);
        assert_eq!(cmb.domain, "music");
        assert!(cmb.parents.is_empty() && cmb.ancestors.is_empty());
        assert!(a.own_keys().contains(&cmb.key));
    }

    #[test]
    fn same_seed_nodes_integrate_identically() {
        let mut a = MeshNode::new("x", "music", InfluenceLevel::Gentle, 99);
        let mut b = MeshNode::new("x", "music", InfluenceLevel::Gentle, 99);
        let cmb = crafted_cmb("peer", 10.0, 0.5);
        a.on_receive(&cmb, LegacyPoint::new(50, 50), None, 11.0);
        b.on_receive(&cmb, LegacyPoint::new(50, 50), None, 11.0);
        assert_eq!(a.state.h, b.state.h);
    }
}
