//! Core affect-plane types: the continuous circumplex plane, the legacy
//! 0–99 playback scale, and the 20×20 mood-anchor lookup that ties plane
//! regions to labels, colors, and seed genres.
//!
//! Two scales coexist on purpose. Model-facing code (priors, fusion,
//! trajectories) works on the circumplex square `[-1, 1]²`; the playback
//! policy and the anchor grid work on the legacy integer scale `[0, 99]²`.
//! The affine maps between them are exact on the legacy lattice: mapping a
//! legacy point up to the plane and back returns the same point.

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::GENRE_POOL;

/// Half of the legacy range; the scale factor of the legacy↔plane maps.
const LEGACY_HALF: f64 = 49.5;
/// Top of the legacy scale.
pub const LEGACY_MAX: u8 = 99;
/// Anchor grid is `GRID × GRID` cells over the legacy square.
pub const GRID: usize = 20;
/// Width of one anchor cell in legacy units.
pub const CELL: u8 = 5;

/// A point on the valence/arousal plane, each axis clamped to `[-1, +1]`.
///
/// Construction clamps rather than errors: affect inputs come from noisy
/// sources (dials, track features, fused estimates) and a silently saturated
/// point is always a meaningful mood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircumplexPoint {
    pub valence: f64,
    pub arousal: f64,
}

impl CircumplexPoint {
    /// Builds a point, clamping both axes into `[-1, +1]`.
    /// Non-finite inputs collapse to `0.0`.
    pub fn new(valence: f64, arousal: f64) -> Self {
        Self {
            valence: clamp_axis(valence),
            arousal: clamp_axis(arousal),
        }
    }

    /// The neutral origin `(0, 0)`.
    pub const ORIGIN: CircumplexPoint = CircumplexPoint {
        valence: 0.0,
        arousal: 0.0,
    };

    /// Euclidean distance to another point. Bounded by `2√2` on the square.
    pub fn distance(&self, other: &CircumplexPoint) -> f64 {
        let dv = self.valence - other.valence;
        let da = self.arousal - other.arousal;
        (dv * dv + da * da).sqrt()
    }

    /// Maps onto the legacy scale: `(x + 1)/2 · 99`, rounded half-up and
    /// clamped. Valence becomes the legacy *emotion* axis, arousal the
    /// legacy *energy* axis.
    pub fn to_legacy(&self) -> LegacyPoint {
        LegacyPoint {
            emotion: axis_to_legacy(self.valence),
            energy: axis_to_legacy(self.arousal),
        }
    }
}

fn clamp_axis(x: f64) -> f64 {
    if x.is_finite() {
        x.clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

fn axis_to_legacy(x: f64) -> u8 {
    let scaled = (x + 1.0) / 2.0 * f64::from(LEGACY_MAX);
    // Round half-up; the operand is non-negative here so floor(v + 0.5) is it.
    let rounded = (scaled + 0.5).floor();
    rounded.clamp(0.0, f64::from(LEGACY_MAX)) as u8
}

/// A point on the legacy playback scale: `emotion` (valence axis) and
/// `energy` (arousal axis), both integers in `[0, 99]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LegacyPoint {
    pub emotion: u8,
    pub energy: u8,
}

impl LegacyPoint {
    /// Builds a legacy point, clamping both axes to `[0, 99]`.
    pub fn new(emotion: u8, energy: u8) -> Self {
        Self {
            emotion: emotion.min(LEGACY_MAX),
            energy: energy.min(LEGACY_MAX),
        }
    }

    /// Maps back onto the plane: `q / 49.5 − 1` per axis.
    pub fn to_circumplex(&self) -> CircumplexPoint {
        CircumplexPoint {
            valence: f64::from(self.emotion) / LEGACY_HALF - 1.0,
            arousal: f64::from(self.energy) / LEGACY_HALF - 1.0,
        }
    }

    /// Per-axis absolute differences `(|Δemotion|, |Δenergy|)`.
    pub fn axis_deltas(&self, other: &LegacyPoint) -> (u8, u8) {
        (
            self.emotion.abs_diff(other.emotion),
            self.energy.abs_diff(other.energy),
        )
    }
}

impl fmt::Display for LegacyPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.emotion, self.energy)
    }
}

/// Grid coordinates of a mood anchor: `(row, col)` with row indexed by the
/// emotion axis and col by the energy axis, both in `0..20`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnchorId {
    pub row: u8,
    pub col: u8,
}

impl fmt::Display for AnchorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// One of the 400 mood anchors: a labeled cell of the legacy plane carrying
/// retrieval metadata for curation.
#[derive(Debug, Clone, PartialEq)]
pub struct MoodAnchor {
    pub id: AnchorId,
    /// Human-readable mood label, e.g. `"brisk warmth"`.
    pub label: String,
    /// Display color as `#rrggbb`.
    pub color: String,
    pub synonyms: Vec<String>,
    /// Genres whose catalog material suits this region of the plane.
    pub seed_genres: Vec<String>,
    /// Free-text retrieval terms; always non-empty.
    pub search_terms: Vec<String>,
}

impl MoodAnchor {
    /// Center of this anchor's cell on the legacy scale.
    pub fn center(&self) -> LegacyPoint {
        LegacyPoint {
            emotion: self.id.row * CELL + 2,
            energy: self.id.col * CELL + 2,
        }
    }
}

/// Errors from parsing a mood-lookup file.
#[derive(Debug, thiserror::Error)]
pub enum LookupError {
    #[error("i/o error reading lookup: {0}")]
    Io(#[from] std::io::Error),
    #[error("lookup line {line}: expected 7 comma-separated fields, got {got}")]
    FieldCount { line: usize, got: usize },
    #[error("lookup line {line}: bad cell coordinates {text:?}")]
    BadCell { line: usize, text: String },
    #[error("lookup line {line}: duplicate cell ({row}, {col})")]
    DuplicateCell { line: usize, row: u8, col: u8 },
    #[error("lookup line {line}: empty {what}")]
    EmptyField { line: usize, what: &'static str },
    #[error("lookup covers {got} cells, expected {expected}")]
    Incomplete { got: usize, expected: usize },
}

/// The full 20×20 anchor table. Indexable by cell and by legacy point.
#[derive(Debug, Clone, PartialEq)]
pub struct MoodLookup {
    /// Row-major: index `row * 20 + col`.
    anchors: Vec<MoodAnchor>,
}

impl MoodLookup {
    /// Number of anchors in a complete lookup.
    pub const LEN: usize = GRID * GRID;

    /// The anchor whose cell contains `point`: `(⌊emotion/5⌋, ⌊energy/5⌋)`.
    pub fn nearest_anchor(&self, point: LegacyPoint) -> &MoodAnchor {
        let row = (point.emotion / CELL).min(GRID as u8 - 1);
        let col = (point.energy / CELL).min(GRID as u8 - 1);
        self.anchor(AnchorId { row, col })
    }

    /// The anchor at exact grid coordinates. Panics on out-of-range ids,
    /// which cannot be produced by [`MoodLookup::nearest_anchor`].
    pub fn anchor(&self, id: AnchorId) -> &MoodAnchor {
        &self.anchors[id.row as usize * GRID + id.col as usize]
    }

    /// All anchors whose cell centers lie within `radius` legacy units of
    /// `id`'s center on *both* axes, in row-major order. With the default
    /// radius of 10 this is a 5×5 block in the interior (25 anchors) and a
    /// 3×3 block at a corner (9 anchors). `radius = 0` yields just `id`.
    pub fn adjacent_expansion(&self, id: AnchorId, radius: u8) -> Vec<&MoodAnchor> {
        let span = i32::from(radius / CELL);
        let mut out = Vec::new();
        for dr in -span..=span {
            for dc in -span..=span {
                let r = i32::from(id.row) + dr;
                let c = i32::from(id.col) + dc;
                if (0..GRID as i32).contains(&r) && (0..GRID as i32).contains(&c) {
                    out.push(self.anchor(AnchorId {
                        row: r as u8,
                        col: c as u8,
                    }));
                }
            }
        }
        out
    }

    /// Iterates anchors in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = &MoodAnchor> {
        self.anchors.iter()
    }

    /// Generates the default lookup deterministically from a seed.
    ///
    /// Labels combine an energy word and a valence word per cell; synonyms
    /// are drawn from a quadrant pool; seed genres are the two nearest
    /// entries of the shared genre pool plus one seeded extra; colors encode
    /// the cell position. The same seed always yields the same table.
    pub fn generate(seed: u64) -> MoodLookup {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut anchors = Vec::with_capacity(Self::LEN);
        for row in 0..GRID as u8 {
            for col in 0..GRID as u8 {
                let id = AnchorId { row, col };
                let label = format!(
                    "{} {}",
                    ENERGY_WORDS[col as usize], VALENCE_WORDS[row as usize]
                );
                let quadrant = quadrant_pool(row, col);
                let mut synonyms = Vec::with_capacity(2);
                while synonyms.len() < 2 {
                    let pick = quadrant[rng.gen_range(0..quadrant.len())];
                    if !synonyms.iter().any(|s| s == pick) {
                        synonyms.push(pick.to_string());
                    }
                }
                let seed_genres = pick_seed_genres(row, col, &mut rng);
                let mut search_terms = vec![label.clone()];
                search_terms.extend(synonyms.iter().cloned());
                search_terms.extend(seed_genres.iter().cloned());
                anchors.push(MoodAnchor {
                    id,
                    color: cell_color(row, col),
                    label,
                    synonyms,
                    seed_genres,
                    search_terms,
                });
            }
        }
        MoodLookup { anchors }
    }

    /// Serializes to the lookup file format, one line per anchor:
    /// `row,col,label,color,syn|syn,genre|genre,term|term`.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for a in &self.anchors {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                a.id.row,
                a.id.col,
                a.label,
                a.color,
                a.synonyms.join("|"),
                a.seed_genres.join("|"),
                a.search_terms.join("|"),
            ));
        }
        out
    }

    /// Writes the lookup file format to `path`.
    pub fn save(&self, path: &Path) -> Result<(), LookupError> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }

    /// Parses the lookup file format. The file must cover all 400 cells
    /// exactly once; labels and search terms must be non-empty.
    pub fn parse(text: &str) -> Result<MoodLookup, LookupError> {
        let mut slots: Vec<Option<MoodAnchor>> = vec![None; Self::LEN];
        let mut seen = 0usize;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = raw.split(',').collect();
            if parts.len() != 7 {
                return Err(LookupError::FieldCount {
                    line,
                    got: parts.len(),
                });
            }
            let row: u8 = parts[0].parse().map_err(|_| LookupError::BadCell {
                line,
                text: raw.to_string(),
            })?;
            let col: u8 = parts[1].parse().map_err(|_| LookupError::BadCell {
                line,
                text: raw.to_string(),
            })?;
            if row as usize >= GRID || col as usize >= GRID {
                return Err(LookupError::BadCell {
                    line,
                    text: raw.to_string(),
                });
            }
            let slot = &mut slots[row as usize * GRID + col as usize];
            if slot.is_some() {
                return Err(LookupError::DuplicateCell { line, row, col });
            }
            if parts[2].is_empty() {
                return Err(LookupError::EmptyField {
                    line,
                    what: "label",
                });
            }
            let terms: Vec<String> = split_list(parts[6]);
            if terms.is_empty() {
                return Err(LookupError::EmptyField {
                    line,
                    what: "search terms",
                });
            }
            *slot = Some(MoodAnchor {
                id: AnchorId { row, col },
                label: parts[2].to_string(),
                color: parts[3].to_string(),
                synonyms: split_list(parts[4]),
                seed_genres: split_list(parts[5]),
                search_terms: terms,
            });
            seen += 1;
        }
        if seen != Self::LEN {
            return Err(LookupError::Incomplete {
                got: seen,
                expected: Self::LEN,
            });
        }
        Ok(MoodLookup {
            anchors: slots.into_iter().map(Option::unwrap).collect(),
        })
    }

    /// Loads a lookup file from disk.
    pub fn load(path: &Path) -> Result<MoodLookup, LookupError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn split_list(field: &str) -> Vec<String> {
    field
        .split('|')
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn pick_seed_genres(row: u8, col: u8, rng: &mut ChaCha20Rng) -> Vec<String> {
    // Rank the genre pool by feature-space distance to the cell center,
    // where the feature point of a cell is its center scaled into [0, 1]².
    let v = (f64::from(row) * f64::from(CELL) + 2.0) / f64::from(LEGACY_MAX);
    let e = (f64::from(col) * f64::from(CELL) + 2.0) / f64::from(LEGACY_MAX);
    let mut ranked: Vec<(f64, &str)> = GENRE_POOL
        .iter()
        .map(|g| {
            let dv = g.valence_center - v;
            let de = g.energy_center - e;
            (dv * dv + de * de, g.name)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(b.1)));
    let mut genres: Vec<String> = ranked.iter().take(2).map(|g| g.1.to_string()).collect();
    // One seeded extra from the next three candidates for variety.
    let extra = ranked[2 + rng.gen_range(0..3usize)].1.to_string();
    if !genres.contains(&extra) {
        genres.push(extra);
    }
    genres
}

fn quadrant_pool(row: u8, col: u8) -> &'static [&'static str] {
    match (row >= GRID as u8 / 2, col >= GRID as u8 / 2) {
        (false, false) => &["heavy", "muted", "somber", "withdrawn", "leaden"],
        (false, true) => &["agitated", "restless", "stormy", "tense", "jagged"],
        (true, false) => &["serene", "mellow", "gentle", "soft", "hushed"],
        (true, true) => &["bright", "upbeat", "electric", "soaring", "vivid"],
    }
}

fn cell_color(row: u8, col: u8) -> String {
    // Valence drives hue (cold blue → warm amber), energy drives lightness.
    let r = 40 + (f64::from(row) / 19.0 * 180.0) as u32;
    let g = 60 + (f64::from(col) / 19.0 * 140.0) as u32;
    let b = 220 - (f64::from(row) / 19.0 * 160.0) as u32;
    format!("#{r:02x}{g:02x}{b:02x}")
}

const ENERGY_WORDS: [&str; GRID] = [
    "dormant", "drowsy", "languid", "tranquil", "settled", "easy", "steady", "measured",
    "flowing", "lively", "brisk", "spirited", "animated", "vigorous", "charged", "driving",
    "surging", "blazing", "frenzied", "explosive",
];

const VALENCE_WORDS: [&str; GRID] = [
    "despair", "anguish", "gloom", "sorrow", "unease", "tension", "doubt", "reserve",
    "neutrality", "poise", "comfort", "warmth", "content", "cheer", "delight", "joy",
    "elation", "euphoria", "radiance", "bliss",
];
