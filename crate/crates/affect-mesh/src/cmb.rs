//! Contextual memory blocks: the only record that ever crosses the wire
//! between peers.
//!
//! A block carries seven fixed fields (focus, issue, intent, motivation,
//! commitment, perspective, mood), each a short text label plus a unit-norm
//! embedding of fixed dimension. The mood field additionally carries the
//! sender's numeric valence/arousal. Lineage keys make derived blocks
//! traceable; the wire schema is *closed* — there is no slot where raw
//! model state, history, or any vector other than the seven embeddings
//! could ride along, and decoding rejects records that try.
//!
//! The canonical encoding is compact JSON with a fixed key order and
//! shortest-roundtrip float formatting, so equal blocks serialize to equal
//! bytes and every serialized block decodes back to an equal block.

use std::collections::BTreeSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::affect::CircumplexPoint;

/// Embedding dimension of every field vector.
pub const EMBED_DIM: usize = 32;

/// Tolerance on the unit-norm invariant at decode time.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// The seven block fields, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldName {
    Focus,
    Issue,
    Intent,
    Motivation,
    Commitment,
    Perspective,
    Mood,
}

impl FieldName {
    /// All fields in canonical order.
    pub const ALL: [FieldName; 7] = [
        FieldName::Focus,
        FieldName::Issue,
        FieldName::Intent,
        FieldName::Motivation,
        FieldName::Commitment,
        FieldName::Perspective,
        FieldName::Mood,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FieldName::Focus => "focus",
            FieldName::Issue => "issue",
            FieldName::Intent => "intent",
            FieldName::Motivation => "motivation",
            FieldName::Commitment => "commitment",
            FieldName::Perspective => "perspective",
            FieldName::Mood => "mood",
        }
    }
}

impl fmt::Display for FieldName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unique block key, `"{agent_id}:{counter}"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CmbKey(pub String);

impl fmt::Display for CmbKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Per-agent monotone key generator. Each agent owns exactly one, so keys
/// never collide without any cross-agent coordination.
#[derive(Debug, Clone)]
pub struct KeyGen {
    agent_id: String,
    counter: u64,
}

impl KeyGen {
    pub fn new(agent_id: &str) -> Self {
        Self {
            agent_id: agent_id.to_string(),
            counter: 0,
        }
    }

    pub fn next_key(&mut self) -> CmbKey {
        self.counter += 1;
        CmbKey(format!("{}:{:06}", self.agent_id, self.counter))
    }
}

/// A non-mood field: label plus unit-norm embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmbField {
    pub label: String,
    pub embedding: Vec<f64>,
}

/// The mood field: label, embedding, and the numeric valence/arousal
/// payload that rule-five delivery guarantees every peer can read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoodField {
    pub label: String,
    pub embedding: Vec<f64>,
    pub valence: f64,
    pub arousal: f64,
}

impl MoodField {
    pub fn point(&self) -> CircumplexPoint {
        CircumplexPoint::new(self.valence, self.arousal)
    }
}

/// The seven fields as a closed struct: decoding a record with any extra
/// field slot fails, which is what keeps hidden state off the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmbFields {
    pub focus: CmbField,
    pub issue: CmbField,
    pub intent: CmbField,
    pub motivation: CmbField,
    pub commitment: CmbField,
    pub perspective: CmbField,
    pub mood: MoodField,
}

impl CmbFields {
    /// Label and embedding of a field by name (the mood field's numeric
    /// payload is accessed through [`CmbFields::mood`] directly).
    pub fn get(&self, name: FieldName) -> (&str, &[f64]) {
        match name {
            FieldName::Focus => (&self.focus.label, &self.focus.embedding),
            FieldName::Issue => (&self.issue.label, &self.issue.embedding),
            FieldName::Intent => (&self.intent.label, &self.intent.embedding),
            FieldName::Motivation => (&self.motivation.label, &self.motivation.embedding),
            FieldName::Commitment => (&self.commitment.label, &self.commitment.embedding),
            FieldName::Perspective => (&self.perspective.label, &self.perspective.embedding),
            FieldName::Mood => (&self.mood.label, &self.mood.embedding),
        }
    }
}

/// A contextual memory block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cmb {
    pub key: CmbKey,
    pub agent_id: String,
    /// Application domain of the sender, e.g. `"music"`. Non-music senders
    /// participate in mood exchange but carry no genre authority.
    pub domain: String,
    /// Seconds on the shared scenario clock.
    pub timestamp: f64,
    /// Keys of the blocks this one was directly derived from.
    pub parents: Vec<CmbKey>,
    /// Keys of the full derivation closure; always a superset of `parents`.
    pub ancestors: Vec<CmbKey>,
    pub fields: CmbFields,
}

impl Cmb {
    pub fn is_music(&self) -> bool {
        self.domain == "music"
    }

    /// True when this block derives from one of `own_keys` — receiving it
    /// would be hearing our own influence echoed back.
    pub fn is_echo(&self, own_keys: &BTreeSet<CmbKey>) -> bool {
        self.parents
            .iter()
            .chain(self.ancestors.iter())
            .any(|k| own_keys.contains(k))
    }
}

/// Errors produced by wire decoding and validation.
#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("malformed block: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid block: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> WireError {
    WireError::Invalid(msg.into())
}

/// Structural validation beyond what the schema enforces: embedding
/// dimension and unit norm, finite in-range mood payload, lineage
/// consistency, and sane identifiers.
pub fn validate(cmb: &Cmb) -> Result<(), WireError> {
    if cmb.key.0.is_empty() {
        return Err(invalid("empty key"));
    }
    if cmb.agent_id.is_empty() {
        return Err(invalid("empty agent_id"));
    }
    if !cmb.timestamp.is_finite() || cmb.timestamp < 0.0 {
        return Err(invalid(format!("bad timestamp {}", cmb.timestamp)));
    }
    for name in FieldName::ALL {
        let (_, embedding) = cmb.fields.get(name);
        if embedding.len() != EMBED_DIM {
            return Err(invalid(format!(
                "{name} embedding has {} dims, expected {EMBED_DIM}",
                embedding.len()
            )));
        }
        let norm: f64 = embedding.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(invalid(format!("{name} embedding norm {norm} not unit")));
        }
    }
    for v in [cmb.fields.mood.valence, cmb.fields.mood.arousal] {
        if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
            return Err(invalid(format!("mood payload {v} outside [-1, 1]")));
        }
    }
    let ancestors: BTreeSet<&CmbKey> = cmb.ancestors.iter().collect();
    for p in &cmb.parents {
        if !ancestors.contains(p) {
            return Err(invalid(format!("parent {p} missing from ancestors")));
        }
    }
    Ok(())
}

/// Canonical encoding: compact JSON, fixed key order, shortest-roundtrip
/// floats. Equal blocks produce equal bytes.
pub fn serialize(cmb: &Cmb) -> String {
    serde_json::to_string(cmb).expect("cmb serialization cannot fail")
}

/// Decodes and validates a block. Unknown slots anywhere in the record are
/// schema errors; invariant violations are validation errors.
pub fn deserialize(text: &str) -> Result<Cmb, WireError> {
    let cmb: Cmb = serde_json::from_str(text)?;
    validate(&cmb)?;
    Ok(cmb)
}

/// Privacy scan over a raw wire payload, independent of the schema: walks
/// the JSON and rejects any long numeric vector that is not one of the
/// seven 32-d field embeddings. Hidden recurrent state is 32- or 64-wide,
/// so a leak cannot hide from a length check even if the schema were
/// loosened. Returns the number of embedding vectors found (always 7 for
/// a conforming block).
pub fn scan_wire_privacy(text: &str) -> Result<usize, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("not json: {e}"))?;
    let mut embeddings = 0usize;
    scan_value(&value, "$", &mut embeddings)?;
    if embeddings != 7 {
        return Err(format!("expected 7 embedding vectors, found {embeddings}"));
    }
    Ok(embeddings)
}

/// Numeric arrays at or above this length are treated as potential state
/// payloads by the privacy scan.
const SCAN_VECTOR_FLOOR: usize = 16;

fn scan_value(v: &serde_json::Value, path: &str, embeddings: &mut usize) -> Result<(), String> {
    match v {
        serde_json::Value::Array(items) => {
            let numeric = !items.is_empty() && items.iter().all(|x| x.is_number());
            if numeric && items.len() >= SCAN_VECTOR_FLOOR {
                if path.ends_with(".embedding") && items.len() == EMBED_DIM {
                    *embeddings += 1;
                } else {
                    return Err(format!(
                        "{path}: {}-element numeric vector outside a field embedding",
                        items.len()
                    ));
                }
            }
            for (i, item) in items.iter().enumerate() {
                scan_value(item, &format!("{path}[{i}]"), embeddings)?;
            }
        }
        serde_json::Value::Object(map) => {
            for (k, val) in map {
                scan_value(val, &format!("{path}.{k}"), embeddings)?;
            }
        }
        _ => {}
    }
    Ok(())
}

/// Deterministic hash-to-sphere text embedder. The same `(seed, text)`
/// always produces the same unit vector, on every platform, so peers with
/// the same embedder seed assign identical vectors to identical labels.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    pub seed: u64,
}

impl HashEmbedder {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Embeds `text` as a unit vector: an FNV-1a digest of the text keys a
    /// stream cipher RNG, 32 standard normals are drawn, and the result is
    /// normalized onto the sphere.
    pub fn embed(&self, text: &str) -> Vec<f64> {
        let digest = fnv1a64(text);
        let mut seed_bytes = [0u8; 32];
        seed_bytes[..8].copy_from_slice(&digest.to_le_bytes());
        seed_bytes[8..16].copy_from_slice(&self.seed.to_le_bytes());
        seed_bytes[16..24].copy_from_slice(&(digest ^ self.seed).to_le_bytes());
        seed_bytes[24..32].copy_from_slice(&digest.rotate_left(32).to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(seed_bytes);
        loop {
            let mut v: Vec<f64> = (0..EMBED_DIM)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-9 {
                for x in &mut v {
                    *x /= norm;
                }
                return v;
            }
        }
    }
}

fn fnv1a64(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Labels for the seven fields of a new block.
#[derive(Debug, Clone)]
pub struct FieldLabels {
    pub focus: String,
    pub issue: String,
    pub intent: String,
    pub motivation: String,
    pub commitment: String,
    pub perspective: String,
    pub mood: String,
}

fn build_fields(labels: &FieldLabels, mood: CircumplexPoint, embedder: &HashEmbedder) -> CmbFields {
    let field = |label: &String| CmbField {
        label: label.clone(),
        embedding: embedder.embed(label),
    };
    CmbFields {
        focus: field(&labels.focus),
        issue: field(&labels.issue),
        intent: field(&labels.intent),
        motivation: field(&labels.motivation),
        commitment: field(&labels.commitment),
        perspective: field(&labels.perspective),
        mood: MoodField {
            embedding: embedder.embed(&labels.mood),
            label: labels.mood.clone(),
            valence: mood.valence,
            arousal: mood.arousal,
        },
    }
}

/// Builds a fresh block with no lineage.
pub fn make_cmb(
    keygen: &mut KeyGen,
    agent_id: &str,
    domain: &str,
    timestamp: f64,
    labels: &FieldLabels,
    mood: CircumplexPoint,
    embedder: &HashEmbedder,
) -> Cmb {
    Cmb {
        key: keygen.next_key(),
        agent_id: agent_id.to_string(),
        domain: domain.to_string(),
        timestamp,
        parents: Vec::new(),
        ancestors: Vec::new(),
        fields: build_fields(labels, mood, embedder),
    }
}

/// Builds a block derived from `parent`: the parent key becomes the sole
/// parent and joins the ancestor closure.
#[allow(clippy::too_many_arguments)]
pub fn derive_cmb(
    keygen: &mut KeyGen,
    parent: &Cmb,
    agent_id: &str,
    domain: &str,
    timestamp: f64,
    labels: &FieldLabels,
    mood: CircumplexPoint,
    embedder: &HashEmbedder,
) -> Cmb {
    let mut ancestors = parent.ancestors.clone();
    if !ancestors.contains(&parent.key) {
        ancestors.push(parent.key.clone());
    }
    Cmb {
        key: keygen.next_key(),
        agent_id: agent_id.to_string(),
        domain: domain.to_string(),
        timestamp,
        parents: vec![parent.key.clone()],
        ancestors,
        fields: build_fields(labels, mood, embedder),
    }
}

/// Extracts the active genre from a focus label of the form
/// `genre:<token>` or `genre:<token> | <free text>`. The token must be a
/// non-empty lowercase word (`a-z`, `0-9`, `_`); anything else means the
/// label carries no genre claim.
pub fn extract_genre(focus_label: &str) -> Option<&str> {
    let rest = focus_label.strip_prefix("genre:")?;
    let token = rest.split(" | ").next().unwrap_or(rest);
    if token.is_empty() {
        return None;
    }
    if token
        .chars()
        .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
    {
        Some(token)
    } else {
        None
    }
}

#[cfg(test)]
pub(crate) fn test_labels(tag: &str) -> FieldLabels {
    FieldLabels {
        focus: format!("genre:pop | {tag}"),
        issue: "none".into(),
        intent: "maintain".into(),
        motivation: "steady_listening".into(),
        commitment: "playback_active".into(),
        perspective: "solo_session".into(),
        mood: "brisk warmth".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_cmb(tag: &str) -> Cmb {
        let embedder = HashEmbedder::new(99);
        let mut keygen = KeyGen::new("agent_a");
        make_cmb(
            &mut keygen,
            "agent_a",
            "music",
            120.5,
            &test_labels(tag),
            CircumplexPoint::new(0.4, -0.2),
            &embedder,
        )
    }

    #[test]
    fn embedder_is_deterministic_and_unit_norm() {
        let e = HashEmbedder::new(7);
        let a = e.embed("genre:jazz | Midnight Harbor");
        let b = e.embed("genre:jazz | Midnight Harbor");
        assert_eq!(a, b);
        assert_eq!(a.len(), EMBED_DIM);
        let norm: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        let c = e.embed("genre:jazz | Midnight Harbour");
        assert_ne!(a, c);
        let other_seed = HashEmbedder::new(8).embed("genre:jazz | Midnight Harbor");
        assert_ne!(a, other_seed);
    }

    #[test]
    fn roundtrip_identity() {
        let cmb = sample_cmb("roundtrip");
        let bytes = serialize(&cmb);
        let back = deserialize(&bytes).expect("decode");
        assert_eq!(cmb, back);
        // Canonical bytes: serializing the decoded block is byte-identical.
        assert_eq!(serialize(&back), bytes);
    }

    #[test]
    fn unknown_top_level_slot_is_rejected() {
        let cmb = sample_cmb("closed");
        let mut value: serde_json::Value = serde_json::from_str(&serialize(&cmb)).unwrap();
        value.as_object_mut().unwrap().insert(
            "hidden_state".into(),
            serde_json::json!([0.1, 0.2, 0.3]),
        );
        let err = deserialize(&value.to_string()).unwrap_err();
        assert!(matches!(err, WireError::Json(_)), "{err}");
    }

    #[test]
    fn unknown_field_slot_is_rejected() {
        let cmb = sample_cmb("closed_fields");
        let mut value: serde_json::Value = serde_json::from_str(&serialize(&cmb)).unwrap();
        value["fields"]["focus"]
            .as_object_mut()
            .unwrap()
            .insert("weights".into(), serde_json::json!([1.0, 2.0]));
        assert!(deserialize(&value.to_string()).is_err());
        let mut extra_field: serde_json::Value =
            serde_json::from_str(&serialize(&sample_cmb("x"))).unwrap();
        extra_field["fields"]
            .as_object_mut()
            .unwrap()
            .insert("context".into(), serde_json::json!({"label": "x"}));
        assert!(deserialize(&extra_field.to_string()).is_err());
    }

    #[test]
    fn non_unit_embedding_is_rejected() {
        let mut cmb = sample_cmb("norm");
        for v in &mut cmb.fields.issue.embedding {
            *v *= 0.9;
        }
        let text = serialize(&cmb);
        let err = deserialize(&text).unwrap_err();
        assert!(matches!(err, WireError::Invalid(_)), "{err}");
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let mut cmb = sample_cmb("dim");
        cmb.fields.mood.embedding.pop();
        assert!(deserialize(&serialize(&cmb)).is_err());
    }

    #[test]
    fn mood_payload_out_of_range_is_rejected() {
        let mut cmb = sample_cmb("payload");
        cmb.fields.mood.valence = 1.5;
        assert!(deserialize(&serialize(&cmb)).is_err());
        cmb.fields.mood.valence = f64::NAN;
        // NaN does not survive JSON encoding; validate directly.
        assert!(validate(&cmb).is_err());
    }

    #[test]
    fn lineage_construction_and_echo() {
        let embedder = HashEmbedder::new(1);
        let mut gen_a = KeyGen::new("a");
        let mut gen_b = KeyGen::new("b");
        let root = make_cmb(
            &mut gen_a,
            "a",
            "music",
            1.0,
            &test_labels("root"),
            CircumplexPoint::ORIGIN,
            &embedder,
        );
        assert!(root.parents.is_empty() && root.ancestors.is_empty());
        let child = derive_cmb(
            &mut gen_b,
            &root,
            "b",
            "music",
            2.0,
            &test_labels("child"),
            CircumplexPoint::ORIGIN,
            &embedder,
        );
        assert_eq!(child.parents, vec![root.key.clone()]);
        assert_eq!(child.ancestors, vec![root.key.clone()]);
        validate(&child).expect("child is valid");
        let grandchild = derive_cmb(
            &mut gen_a,
            &child,
            "a",
            "music",
            3.0,
            &test_labels("grandchild"),
            CircumplexPoint::ORIGIN,
            &embedder,
        );
        assert_eq!(grandchild.ancestors.len(), 2);

        let a_keys: BTreeSet<CmbKey> = [root.key.clone()].into_iter().collect();
        assert!(!root.is_echo(&a_keys), "fresh blocks are never echoes");
        assert!(child.is_echo(&a_keys), "derived from a's block");
        assert!(grandchild.is_echo(&a_keys), "ancestor closure caught");
        let unrelated: BTreeSet<CmbKey> = [CmbKey("z:000001".into())].into_iter().collect();
        assert!(!child.is_echo(&unrelated));
    }

    #[test]
    fn parents_must_be_within_ancestors() {
        let mut cmb = sample_cmb("lineage");
        cmb.parents = vec![CmbKey("ghost:000001".into())];
        assert!(validate(&cmb).is_err());
    }

    #[test]
    fn keygen_is_monotone_and_scoped() {
        let mut kg = KeyGen::new("node1");
        let k1 = kg.next_key();
        let k2 = kg.next_key();
        assert_eq!(k1.0, "node1:000001");
        assert_eq!(k2.0, "node1:000002");
        assert!(k1 < k2);
    }

    #[test]
    fn genre_extraction() {
        assert_eq!(extract_genre("genre:edm"), Some("edm"));
        assert_eq!(
            extract_genre("genre:hard_rock | Velvet Current"),
            Some("hard_rock")
        );
        assert_eq!(extract_genre("Velvet Current"), None);
        assert_eq!(extract_genre("genre:"), None);
        assert_eq!(extract_genre("genre:EDM"), None, "uppercase is not a token");
        assert_eq!(extract_genre("genre:two words"), None);
    }

    #[test]
    fn privacy_scan_accepts_conforming_blocks() {
        let wire = serialize(&sample_cmb("scan"));
        assert_eq!(scan_wire_privacy(&wire), Ok(7));
    }

    #[test]
    fn privacy_scan_catches_smuggled_state_vectors() {
        // Splice a 64-wide numeric payload into otherwise-valid JSON. The
        // schema would reject the unknown slot; the scan must reject it
        // even on the raw text path.
        let wire = serialize(&sample_cmb("scan"));
        let hidden: Vec<String> = (0..64).map(|i| format!("{}.0", i)).collect();
        let smuggled = wire.replacen(
            "\"agent_id\"",
            &format!("\"h\":[{}],\"agent_id\"", hidden.join(",")),
            1,
        );
        let err = scan_wire_privacy(&smuggled).unwrap_err();
        assert!(err.contains("64-element"), "{err}");

        // An eighth embedding-shaped vector under a different name is
        // just as illegal.
        let extra: Vec<String> = (0..32).map(|_| "0.1".to_string()).collect();
        let smuggled = wire.replacen(
            "\"agent_id\"",
            &format!("\"shadow\":[{}],\"agent_id\"", extra.join(",")),
            1,
        );
        assert!(scan_wire_privacy(&smuggled).is_err());
    }

    /// Golden wire blocks pinned on disk. If these stop round-tripping
    /// byte for byte, the encoding changed and every deployed peer would
    /// disagree about keys and embeddings.
    #[test]
    fn golden_wire_fixtures_stay_stable() {
        for text in [
            include_str!("../fixtures/cmb/root.json"),
            include_str!("../fixtures/cmb/derived.json"),
        ] {
            let line = text.trim_end();
            let cmb = deserialize(line).unwrap();
            assert_eq!(serialize(&cmb), line);
            assert_eq!(scan_wire_privacy(line), Ok(7));
        }
        let root = deserialize(include_str!("../fixtures/cmb/root.json").trim_end()).unwrap();
        let child = deserialize(include_str!("../fixtures/cmb/derived.json").trim_end()).unwrap();
        assert_eq!(child.parents, vec![root.key.clone()]);
        assert!(child.ancestors.contains(&root.key));
        // The embeddings on disk must match what the shared-seed embedder
        // produces for the labels today.
        let embedder = HashEmbedder::new(crate::mesh::EMBEDDER_SEED);
        for name in FieldName::ALL {
            let (label, embedding) = root.fields.get(name);
            assert_eq!(embedder.embed(label), embedding);
        }
    }
}
