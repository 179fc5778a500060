//! Deterministic synthetic track catalog.
//!
//! Tracks carry audio-style features in `[0, 1]` plus tempo and loudness,
//! and are generated stratified over a fixed genre pool so that every genre
//! used elsewhere (lookups, behavioral logs) has material at any realistic
//! catalog size. The *population prior* of a track — the mood a generic
//! listener model would assign — is an affine map of its valence/energy
//! features onto the circumplex plane.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::affect::CircumplexPoint;

/// A catalog genre with its characteristic center in feature space
/// (`valence`, `energy`), both in `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct GenreProfile {
    pub name: &'static str,
    pub valence_center: f64,
    pub energy_center: f64,
}

const fn g(name: &'static str, valence_center: f64, energy_center: f64) -> GenreProfile {
    GenreProfile {
        name,
        valence_center,
        energy_center,
    }
}

/// The shared genre pool. Includes every genre that appears in bundled
/// behavioral logs plus enough additional genres to tile the feature plane,
/// so anchor seed-genres always have nearby material.
pub static GENRE_POOL: &[GenreProfile] = &[
    g("pop", 0.70, 0.65),
    g("jazz", 0.60, 0.35),
    g("house", 0.62, 0.78),
    g("dance", 0.68, 0.82),
    g("hard_rock", 0.45, 0.90),
    g("classic_rock", 0.58, 0.70),
    g("classical", 0.55, 0.22),
    g("electronic", 0.52, 0.72),
    g("cantopop", 0.66, 0.50),
    g("mandopop", 0.60, 0.45),
    g("edm", 0.62, 0.88),
    g("ambient", 0.48, 0.10),
    g("new_age", 0.58, 0.12),
    g("chillwave", 0.60, 0.20),
    g("lofi", 0.55, 0.28),
    g("bossa_nova", 0.70, 0.30),
    g("acoustic", 0.78, 0.22),
    g("folk", 0.62, 0.38),
    g("country", 0.68, 0.55),
    g("soul", 0.70, 0.42),
    g("reggae", 0.72, 0.48),
    g("gospel", 0.80, 0.60),
    g("funk", 0.75, 0.72),
    g("disco", 0.78, 0.78),
    g("synthpop", 0.72, 0.68),
    g("power_pop", 0.85, 0.82),
    g("hyperpop", 0.88, 0.92),
    g("trance", 0.55, 0.85),
    g("drum_and_bass", 0.50, 0.92),
    g("punk", 0.35, 0.88),
    g("industrial", 0.25, 0.80),
    g("noise", 0.10, 0.90),
    g("doom_metal", 0.15, 0.60),
    g("emo", 0.22, 0.55),
    g("grunge", 0.30, 0.65),
    g("shoegaze", 0.35, 0.50),
    g("post_rock", 0.45, 0.55),
    g("darkwave", 0.20, 0.45),
    g("trip_hop", 0.40, 0.40),
    g("blues", 0.30, 0.35),
    g("slowcore", 0.25, 0.20),
    g("dark_ambient", 0.15, 0.12),
    g("drone", 0.35, 0.08),
];

/// Returns the profile for `name`, if it is in the pool.
pub fn genre_profile(name: &str) -> Option<&'static GenreProfile> {
    GENRE_POOL.iter().find(|p| p.name == name)
}

/// One catalog track.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: String,
    pub title: String,
    pub artist: String,
    pub genre: String,
    /// Length in seconds, always within `[60, 600]`.
    pub duration: u32,
    pub energy: f64,
    pub valence: f64,
    pub danceability: f64,
    pub acousticness: f64,
    /// Beats per minute.
    pub tempo: f64,
    /// Integrated loudness in dB, within `[-30, 0]`.
    pub loudness: f64,
}

impl Track {
    /// The population prior for this track on the circumplex plane:
    /// `valence = 2·valence_feature − 1`, `arousal = 2·energy − 1`.
    pub fn mei_prior(&self) -> CircumplexPoint {
        CircumplexPoint::new(2.0 * self.valence - 1.0, 2.0 * self.energy - 1.0)
    }

    /// Feature-plane point `(valence, energy)` used for ranking against
    /// curation targets.
    pub fn feature_point(&self) -> (f64, f64) {
        (self.valence, self.energy)
    }
}

/// Generation parameters beyond the seed and count. The defaults produce a
/// general-purpose catalog; scenarios override them when they need special
/// material (for instance long tracks).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CatalogParams {
    pub seed: u64,
    pub count: usize,
    /// Inclusive duration range in seconds; must stay within `[60, 600]`.
    pub duration_min: u32,
    pub duration_max: u32,
    /// Standard deviation of feature scatter around each genre center.
    pub spread: f64,
}

impl Default for CatalogParams {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 2000,
            duration_min: 120,
            duration_max: 420,
            spread: 0.10,
        }
    }
}

/// Errors from parsing a catalog CSV.
#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("i/o error reading catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog line {line}: expected 11 comma-separated fields, got {got}")]
    FieldCount { line: usize, got: usize },
    #[error("catalog line {line}: bad numeric field {field}: {value:?}")]
    BadNumber {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("catalog line {line}: {field} {value} outside valid range")]
    OutOfRange {
        line: usize,
        field: &'static str,
        value: f64,
    },
    #[error("catalog line {line}: duplicate track id {id:?}")]
    DuplicateId { line: usize, id: String },
}

const CSV_HEADER: &str =
    "id,title,artist,genre,duration,energy,valence,danceability,acousticness,tempo,loudness";

/// An in-memory track catalog with deterministic ordering by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Catalog {
    tracks: Vec<Track>,
}

impl Catalog {
    /// Generates a catalog with default parameters and the given seed/count.
    pub fn generate(seed: u64, count: usize) -> Catalog {
        Self::generate_with(&CatalogParams {
            seed,
            count,
            ..CatalogParams::default()
        })
    }

    /// Generates a catalog deterministically from full parameters.
    ///
    /// Genres are assigned round-robin over [`GENRE_POOL`], so any count of
    /// at least the pool size covers every genre. Features scatter around
    /// the genre center with truncation into `[0, 1]`.
    pub fn generate_with(params: &CatalogParams) -> Catalog {
        assert!(
            params.duration_min >= 60 && params.duration_max <= 600,
            "duration range must stay within [60, 600] s"
        );
        assert!(params.duration_min <= params.duration_max);
        let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
        let mut tracks = Vec::with_capacity(params.count);
        for i in 0..params.count {
            let genre = GENRE_POOL[i % GENRE_POOL.len()];
            let valence = sample_feature(&mut rng, genre.valence_center, params.spread);
            let energy = sample_feature(&mut rng, genre.energy_center, params.spread);
            let danceability = sample_feature(&mut rng, 0.3 + 0.6 * energy, 0.08);
            let acousticness = sample_feature(&mut rng, 0.9 - 0.8 * energy, 0.08);
            let tempo = 60.0 + 120.0 * energy + rng.gen_range(-8.0..8.0);
            let loudness = (-25.0 + 20.0 * energy + rng.gen_range(-2.0..2.0)).clamp(-30.0, 0.0);
            let duration = if params.duration_min == params.duration_max {
                params.duration_min
            } else {
                rng.gen_range(params.duration_min..=params.duration_max)
            };
            tracks.push(Track {
                id: format!("t{i:05}"),
                title: make_title(&mut rng),
                artist: make_artist(&mut rng),
                genre: genre.name.to_string(),
                duration,
                energy,
                valence,
                danceability,
                acousticness,
                tempo: round6(tempo),
                loudness: round6(loudness),
            });
        }
        Catalog { tracks }
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn get(&self, id: &str) -> Option<&Track> {
        self.tracks.iter().find(|t| t.id == id)
    }

    /// All tracks whose genre is in `genres`, in id order, up to `limit`.
    pub fn search(&self, genres: &BTreeSet<String>, limit: usize) -> Vec<&Track> {
        self.tracks
            .iter()
            .filter(|t| genres.contains(&t.genre))
            .take(limit)
            .collect()
    }

    /// Serializes to the catalog CSV format (with header).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for t in &self.tracks {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                t.id,
                t.title,
                t.artist,
                t.genre,
                t.duration,
                t.energy,
                t.valence,
                t.danceability,
                t.acousticness,
                t.tempo,
                t.loudness,
            ));
        }
        out
    }

    /// Writes the CSV format to `path`.
    pub fn save(&self, path: &Path) -> Result<(), CatalogError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parses the catalog CSV format, validating ranges and id uniqueness.
    pub fn parse(text: &str) -> Result<Catalog, CatalogError> {
        let mut tracks = Vec::new();
        let mut ids = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw == CSV_HEADER {
                continue;
            }
            let parts: Vec<&str> = raw.split(',').collect();
            if parts.len() != 11 {
                return Err(CatalogError::FieldCount {
                    line,
                    got: parts.len(),
                });
            }
            let duration: u32 = parse_num(parts[4], line, "duration")?;
            if !(60..=600).contains(&duration) {
                return Err(CatalogError::OutOfRange {
                    line,
                    field: "duration",
                    value: f64::from(duration),
                });
            }
            let energy = parse_unit(parts[5], line, "energy")?;
            let valence = parse_unit(parts[6], line, "valence")?;
            let danceability = parse_unit(parts[7], line, "danceability")?;
            let acousticness = parse_unit(parts[8], line, "acousticness")?;
            let tempo: f64 = parse_num(parts[9], line, "tempo")?;
            let loudness: f64 = parse_num(parts[10], line, "loudness")?;
            if !(-30.0..=0.0).contains(&loudness) {
                return Err(CatalogError::OutOfRange {
                    line,
                    field: "loudness",
                    value: loudness,
                });
            }
            let id = parts[0].to_string();
            if !ids.insert(id.clone()) {
                return Err(CatalogError::DuplicateId { line, id });
            }
            tracks.push(Track {
                id,
                title: parts[1].to_string(),
                artist: parts[2].to_string(),
                genre: parts[3].to_string(),
                duration,
                energy,
                valence,
                danceability,
                acousticness,
                tempo,
                loudness,
            });
        }
        Ok(Catalog { tracks })
    }

    /// Loads a catalog CSV from disk.
    pub fn load(path: &Path) -> Result<Catalog, CatalogError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn parse_num<T: std::str::FromStr>(
    field: &str,
    line: usize,
    name: &'static str,
) -> Result<T, CatalogError> {
    field.parse().map_err(|_| CatalogError::BadNumber {
        line,
        field: name,
        value: field.to_string(),
    })
}

fn parse_unit(field: &str, line: usize, name: &'static str) -> Result<f64, CatalogError> {
    let v: f64 = parse_num(field, line, name)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(CatalogError::OutOfRange {
            line,
            field: name,
            value: v,
        });
    }
    Ok(v)
}

fn sample_feature(rng: &mut ChaCha20Rng, center: f64, spread: f64) -> f64 {
    let normal = Normal::new(center, spread).expect("finite spread");
    round6(normal.sample(rng).clamp(0.0, 1.0))
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

const TITLE_HEADS: [&str; 16] = [
    "Midnight", "Paper", "Neon", "Amber", "Hollow", "Silver", "Velvet", "Static", "Golden",
    "Quiet", "Electric", "Distant", "Broken", "Crystal", "Wandering", "Sunlit",
];

const TITLE_TAILS: [&str; 16] = [
    "Circuit", "Harbor", "Window", "Season", "Signal", "Garden", "Avenue", "Horizon", "Letters",
    "Motive", "Current", "Meadow", "Arcade", "Lantern", "Outline", "Tide",
];

const ARTIST_HEADS: [&str; 12] = [
    "The Velvet", "Night", "Glass", "Low", "Northern", "Echo", "Slow", "Bright", "Iron",
    "Half", "Wild", "Pale",
];

const ARTIST_TAILS: [&str; 12] = [
    "Stations", "Cartographers", "Harbors", "Meridian", "Foxes", "Parade", "Archive",
    "Gardeners", "Veranda", "Signals", "Collective", "Motel",
];

fn make_title(rng: &mut ChaCha20Rng) -> String {
    format!(
        "{} {}",
        TITLE_HEADS[rng.gen_range(0..TITLE_HEADS.len())],
        TITLE_TAILS[rng.gen_range(0..TITLE_TAILS.len())]
    )
}

fn make_artist(rng: &mut ChaCha20Rng) -> String {
    format!(
        "{} {}",
        ARTIST_HEADS[rng.gen_range(0..ARTIST_HEADS.len())],
        ARTIST_TAILS[rng.gen_range(0..ARTIST_TAILS.len())]
    )
}
