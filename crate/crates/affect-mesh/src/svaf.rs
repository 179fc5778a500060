//! Semantic drift evaluation and fusion gating for incoming memory blocks.
//!
//! Every field of an incoming block is scored against the receiver's stored
//! anchors for that field: drift is the cosine complement against the
//! nearest anchor (an empty memory is maximally drifted). Drift lands in
//! one of four bands — redundant, aligned, guarded, rejected — and the band
//! decides the fusion gate: aligned content passes at full weight, guarded
//! content on a linear ramp, redundant and rejected content not at all.
//!
//! Two rules are unconditional. Mood is always delivered: whatever its
//! band, the mood field's gate is floored so a peer's emotional state is
//! never silently dropped. And stale blocks never fuse: past the freshness
//! window every gate is zero, though the result still reports the mood
//! payload for logging.

use std::collections::VecDeque;
use std::fmt;

use crate::affect::CircumplexPoint;
use crate::cmb::{Cmb, FieldName};

/// Drift bands over `[0, 2]`, in increasing-drift order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    /// Content the receiver effectively already has.
    Redundant,
    /// Novel but compatible; fuses at full weight.
    Aligned,
    /// Divergent; fuses at reduced weight on a linear ramp.
    Guarded,
    /// Too far from anything stored; does not fuse.
    Rejected,
}

impl Band {
    pub fn as_str(&self) -> &'static str {
        match self {
            Band::Redundant => "redundant",
            Band::Aligned => "aligned",
            Band::Guarded => "guarded",
            Band::Rejected => "rejected",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Band boundaries. The defaults partition `[0, 2]` as: redundant below
/// 0.05, aligned through 0.25, guarded through 0.60, rejected above.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandConfig {
    pub redundant_below: f64,
    pub aligned_upper: f64,
    pub reject_above: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            redundant_below: 0.05,
            aligned_upper: 0.25,
            reject_above: 0.60,
        }
    }
}

impl BandConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0 < self.redundant_below
            && self.redundant_below < self.aligned_upper
            && self.aligned_upper < self.reject_above)
        {
            return Err(format!(
                "band bounds must satisfy 0 < {} < {} < {}",
                self.redundant_below, self.aligned_upper, self.reject_above
            ));
        }
        Ok(())
    }

    /// Classifies a drift value. Boundaries are fixed: `0.05` and `0.25`
    /// are aligned, `0.60` is guarded (with a zero gate), anything above
    /// is rejected.
    pub fn classify(&self, drift: f64) -> Band {
        if drift < self.redundant_below {
            Band::Redundant
        } else if drift <= self.aligned_upper {
            Band::Aligned
        } else if drift <= self.reject_above {
            Band::Guarded
        } else {
            Band::Rejected
        }
    }

    /// The fusion gate for a drift value in `band`: 1 for aligned, 0 for
    /// redundant and rejected, and a linear ramp from 1 down to 0 across
    /// the guarded band.
    pub fn gate(&self, drift: f64, band: Band) -> f64 {
        match band {
            Band::Aligned => 1.0,
            Band::Redundant | Band::Rejected => 0.0,
            Band::Guarded => {
                (self.reject_above - drift) / (self.reject_above - self.aligned_upper)
            }
        }
    }
}

/// Per-field fusion weights in `[0, 1]`; at least one must be positive.
/// Only the logged total drift uses them — gating is per-field.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldWeights {
    pub weights: [f64; 7],
}

impl Default for FieldWeights {
    fn default() -> Self {
        Self { weights: [1.0; 7] }
    }
}

impl FieldWeights {
    pub fn get(&self, name: FieldName) -> f64 {
        self.weights[name as usize]
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err("field weights must lie in [0, 1]".into());
        }
        if self.weights.iter().all(|w| *w == 0.0) {
            return Err("at least one field weight must be positive".into());
        }
        Ok(())
    }
}

/// One stored anchor: an embedding and when it was admitted.
#[derive(Debug, Clone)]
pub struct StoredAnchor {
    pub embedding: Vec<f64>,
    pub stored_at: f64,
}

/// Bounded per-field anchor store with FIFO eviction.
#[derive(Debug, Clone)]
pub struct AnchorMemory {
    capacity: usize,
    fields: [VecDeque<StoredAnchor>; 7],
}

impl Default for AnchorMemory {
    fn default() -> Self {
        Self::new(64)
    }
}

impl AnchorMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "anchor memory needs room for one anchor");
        Self {
            capacity,
            fields: Default::default(),
        }
    }

    pub fn anchors(&self, name: FieldName) -> &VecDeque<StoredAnchor> {
        &self.fields[name as usize]
    }

    pub fn len(&self, name: FieldName) -> usize {
        self.fields[name as usize].len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.iter().all(VecDeque::is_empty)
    }

    /// Appends an anchor for `name`, evicting the oldest past capacity.
    pub fn push(&mut self, name: FieldName, embedding: Vec<f64>, stored_at: f64) {
        let queue = &mut self.fields[name as usize];
        if queue.len() == self.capacity {
            queue.pop_front();
        }
        queue.push_back(StoredAnchor {
            embedding,
            stored_at,
        });
    }
}

/// Drift of one embedding against a field's stored anchors: the cosine
/// complement to the *nearest* anchor, or exactly 1 for an empty memory.
pub fn field_drift(embedding: &[f64], anchors: &VecDeque<StoredAnchor>) -> f64 {
    let mut best: Option<f64> = None;
    for anchor in anchors {
        let dot: f64 = embedding
            .iter()
            .zip(anchor.embedding.iter())
            .map(|(a, b)| a * b)
            .sum();
        best = Some(match best {
            Some(b) => b.max(dot),
            None => dot,
        });
    }
    match best {
        Some(cos) => 1.0 - cos,
        None => 1.0,
    }
}

/// Evaluation parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvafConfig {
    pub bands: BandConfig,
    /// Blocks older than this many seconds never fuse.
    pub freshness_window: f64,
    /// Lower bound applied to the mood field's gate on fresh blocks.
    pub mood_floor: f64,
    /// Per-field anchor capacity.
    pub capacity: usize,
}

impl Default for SvafConfig {
    fn default() -> Self {
        Self {
            bands: BandConfig::default(),
            freshness_window: 1800.0,
            mood_floor: 0.25,
            capacity: 64,
        }
    }
}

impl SvafConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.bands.validate()?;
        if self.freshness_window.is_nan() || self.freshness_window <= 0.0 {
            return Err("freshness window must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.mood_floor) {
            return Err("mood floor must lie in [0, 1]".into());
        }
        if self.capacity == 0 {
            return Err("anchor capacity must be at least 1".into());
        }
        Ok(())
    }
}

/// Per-field outcome of an evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldFusion {
    pub name: FieldName,
    pub drift: f64,
    pub band: Band,
    pub gate: f64,
}

/// Outcome of evaluating one incoming block.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    pub fields: [FieldFusion; 7],
    /// Weight-averaged drift across fields; informational only.
    pub delta_total: f64,
    /// False past the freshness window — in which case every gate is zero.
    pub fresh: bool,
    /// Always true: the mood payload below is readable regardless of bands.
    pub mood_delivered: bool,
    /// The sender's numeric mood payload.
    pub mood: CircumplexPoint,
}

impl FusionResult {
    pub fn field(&self, name: FieldName) -> &FieldFusion {
        &self.fields[name as usize]
    }
}

/// Scores an incoming block against memory. Drift and band are always
/// computed per field; gates are zeroed wholesale when the block is stale,
/// and the mood gate is floored when it is fresh.
pub fn evaluate(
    cmb: &Cmb,
    memory: &AnchorMemory,
    weights: &FieldWeights,
    config: &SvafConfig,
    now: f64,
) -> FusionResult {
    let fresh = now - cmb.timestamp <= config.freshness_window;
    let mut weighted_sum = 0.0;
    let mut weight_total = 0.0;
    let fields = FieldName::ALL.map(|name| {
        let (_, embedding) = cmb.fields.get(name);
        let drift = field_drift(embedding, memory.anchors(name));
        let band = config.bands.classify(drift);
        let mut gate = if fresh {
            config.bands.gate(drift, band)
        } else {
            0.0
        };
        if fresh && name == FieldName::Mood {
            gate = gate.max(config.mood_floor);
        }
        let w = weights.get(name);
        weighted_sum += w * drift;
        weight_total += w;
        FieldFusion {
            name,
            drift,
            band,
            gate,
        }
    });
    FusionResult {
        fields,
        delta_total: if weight_total > 0.0 {
            weighted_sum / weight_total
        } else {
            0.0
        },
        fresh,
        mood_delivered: true,
        mood: cmb.fields.mood.point(),
    }
}

/// Admits the fusible fields of an evaluated block into memory: a field is
/// stored when its gate is positive *and* its band is aligned or guarded.
/// Redundant content adds nothing; rejected content must not reshape the
/// anchor set (a floored mood gate does not override its band). Returns
/// how many fields were admitted.
pub fn admit(memory: &mut AnchorMemory, cmb: &Cmb, result: &FusionResult, now: f64) -> usize {
    let mut admitted = 0;
    for fusion in &result.fields {
        if fusion.gate > 0.0 && matches!(fusion.band, Band::Aligned | Band::Guarded) {
            let (_, embedding) = cmb.fields.get(fusion.name);
            memory.push(fusion.name, embedding.to_vec(), now);
            admitted += 1;
        }
    }
    admitted
}
