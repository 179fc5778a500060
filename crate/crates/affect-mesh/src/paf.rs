//! Per-context preference calibration from listening behavior.
//!
//! Catalog feature scores and a listener's felt arousal disagree in
//! genre- and daypart-specific ways: the same track reads as more
//! energizing at night than over lunch. This module keeps one bounded
//! correction per (genre, time band) bucket, learned as an exponential
//! moving average of signed behavioral signals — skips, completions,
//! favorites, volume moves — each voting on whether the catalog's arousal
//! estimate ran high or low. A bucket's correction is applied in
//! proportion to how much evidence it has accumulated, so a single odd
//! skip cannot bend a profile.
//!
//! [`replay`] rebuilds a profile from a behavioral log, and
//! [`ReplayReport`] compares it against a bundled reference profile,
//! flagging buckets the reference does not know about. Reference drift
//! values are treated as calibration targets: sign agreement is reported,
//! never asserted, because honest magnitudes depend on history the log
//! does not carry.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Bundled 46-event behavioral log used by the replay tooling.
pub const BUNDLED_LOG: &str = include_str!("../fixtures/paf/behavioral_log.csv");
/// Bundled reference profile the replay report compares against.
pub const BUNDLED_REFERENCE: &str = include_str!("../fixtures/paf/reference_profile.csv");

/// Day parts used for preference bucketing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeBand {
    Morning,
    Afternoon,
    Evening,
    Night,
}

impl TimeBand {
    /// Band for an hour of day (0–23).
    pub fn from_hour(hour: u32) -> TimeBand {
        match hour % 24 {
            5..=11 => TimeBand::Morning,
            12..=17 => TimeBand::Afternoon,
            18..=23 => TimeBand::Evening,
            _ => TimeBand::Night,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TimeBand::Morning => "morning",
            TimeBand::Afternoon => "afternoon",
            TimeBand::Evening => "evening",
            TimeBand::Night => "night",
        }
    }

    /// Accepts both full names and the common log abbreviations.
    pub fn parse(s: &str) -> Option<TimeBand> {
        match s {
            "morning" | "morn" => Some(TimeBand::Morning),
            "afternoon" | "aft" => Some(TimeBand::Afternoon),
            "evening" | "eve" => Some(TimeBand::Evening),
            "night" => Some(TimeBand::Night),
            _ => None,
        }
    }
}

/// Behavioral signal kinds, as they appear in the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalKind {
    SkipEarly,
    SkipMid,
    Completed,
    Favorite,
    Repeat,
    VolumeUp,
    VolumeDown,
}

impl SignalKind {
    pub fn parse(s: &str) -> Option<SignalKind> {
        match s {
            "skipEarly" => Some(SignalKind::SkipEarly),
            "skipMid" => Some(SignalKind::SkipMid),
            "completed" => Some(SignalKind::Completed),
            "favorite" => Some(SignalKind::Favorite),
            "repeat" => Some(SignalKind::Repeat),
            "volumeUp" => Some(SignalKind::VolumeUp),
            "volumeDown" => Some(SignalKind::VolumeDown),
        _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SignalKind::SkipEarly => "skipEarly",
            SignalKind::SkipMid => "skipMid",
            SignalKind::Completed => "completed",
            SignalKind::Favorite => "favorite",
            SignalKind::Repeat => "repeat",
            SignalKind::VolumeUp => "volumeUp",
            SignalKind::VolumeDown => "volumeDown",
        }
    }
}

/// Per-kind signal magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalWeights {
    pub skip_early: f64,
    pub skip_mid: f64,
    pub completed: f64,
    pub favorite: f64,
    pub repeat: f64,
    pub volume: f64,
}

impl Default for SignalWeights {
    fn default() -> Self {
        Self {
            skip_early: 0.35,
            skip_mid: 0.20,
            completed: 0.05,
            favorite: 0.15,
            repeat: 0.15,
            volume: 0.15,
        }
    }
}

/// Tunables for the adaptation filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PafConfig {
    /// EMA gain on new evidence (the complement keeps history).
    pub ema_gain: f64,
    /// Correction magnitude ceiling per bucket.
    pub delta_clamp: f64,
    /// Observations for full confidence.
    pub confidence_n: u32,
    /// Mood-drift magnitudes inside this window feed the drift channel;
    /// larger gaps are treated as context changes, not calibration error.
    pub drift_window: (f64, f64),
    /// Minimum signals since the last re-classification before another is
    /// allowed.
    pub reclass_min_signals: u32,
    pub weights: SignalWeights,
}

impl Default for PafConfig {
    fn default() -> Self {
        Self {
            ema_gain: 0.15,
            delta_clamp: 0.5,
            confidence_n: 20,
            drift_window: (0.1, 0.5),
            reclass_min_signals: 20,
            weights: SignalWeights::default(),
        }
    }
}

/// Accumulated state of one (genre, band) bucket.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BucketState {
    pub delta: f64,
    pub n: u32,
}

/// The preference-adaptation filter.
#[derive(Debug, Clone, Default)]
pub struct Paf {
    pub config: PafConfig,
    pub buckets: BTreeMap<(String, TimeBand), BucketState>,
    signals_since_reclass: u32,
}

impl Paf {
    pub fn new(config: PafConfig) -> Paf {
        Paf {
            config,
            buckets: BTreeMap::new(),
            signals_since_reclass: 0,
        }
    }

    /// Signed evidence for one signal. Skip/complete/favorite/repeat vote
    /// with the sign of (felt − estimated) arousal, so they are silent when
    /// the felt reading is missing or the gap is zero. Volume moves are
    /// direct arousal statements and vote unconditionally.
    pub fn signed_signal(&self, kind: SignalKind, mei_arousal: f64, uea_arousal: Option<f64>) -> f64 {
        let w = &self.config.weights;
        match kind {
            SignalKind::VolumeUp => w.volume,
            SignalKind::VolumeDown => -w.volume,
            _ => {
                let Some(uea) = uea_arousal else { return 0.0 };
                let sign = (uea - mei_arousal).signum();
                if uea == mei_arousal {
                    return 0.0;
                }
                let magnitude = match kind {
                    SignalKind::SkipEarly => w.skip_early,
                    SignalKind::SkipMid => w.skip_mid,
                    SignalKind::Completed => w.completed,
                    SignalKind::Favorite | SignalKind::Repeat => w.favorite.max(w.repeat),
                    _ => unreachable!(),
                };
                sign * magnitude
            }
        }
    }

    fn feed(&mut self, genre: &str, band: TimeBand, s: f64) {
        let bucket = self
            .buckets
            .entry((genre.to_lowercase(), band))
            .or_default();
        let gain = self.config.ema_gain;
        bucket.delta = (gain * s + (1.0 - gain) * bucket.delta)
            .clamp(-self.config.delta_clamp, self.config.delta_clamp);
        bucket.n += 1;
        self.signals_since_reclass += 1;
    }

    /// Records one behavioral signal against its bucket.
    pub fn observe(
        &mut self,
        genre: &str,
        band: TimeBand,
        kind: SignalKind,
        mei_arousal: f64,
        uea_arousal: Option<f64>,
    ) {
        let s = self.signed_signal(kind, mei_arousal, uea_arousal);
        self.feed(genre, band, s);
    }

    /// Feeds sustained mood drift into the bucket. Only moderate gaps
    /// count: below the window is noise, above it is a context change that
    /// calibration must not absorb.
    pub fn integrate_drift(&mut self, genre: &str, band: TimeBand, mei_arousal: f64, uea_arousal: f64) {
        let gap = uea_arousal - mei_arousal;
        let (lo, hi) = self.config.drift_window;
        if gap.abs() >= lo && gap.abs() <= hi {
            self.feed(genre, band, gap.clamp(-hi, hi));
        }
    }

    pub fn bucket(&self, genre: &str, band: TimeBand) -> Option<&BucketState> {
        self.buckets.get(&(genre.to_lowercase(), band))
    }

    /// Evidence-scaled confidence in a bucket's correction.
    pub fn confidence(&self, genre: &str, band: TimeBand) -> f64 {
        let n = self.bucket(genre, band).map_or(0, |b| b.n);
        (n as f64 / self.config.confidence_n as f64).min(1.0)
    }

    /// Applies the bucket's correction to a prior arousal estimate.
    pub fn adjusted_arousal(&self, prior: f64, genre: &str, band: TimeBand) -> f64 {
        let delta = self.bucket(genre, band).map_or(0.0, |b| b.delta);
        let c = self.confidence(genre, band);
        (prior + delta * c).clamp(-1.0, 1.0)
    }

    /// Whether enough settled evidence exists to re-run classification:
    /// some bucket at full confidence, and a quarantine of fresh signals
    /// since the last pass.
    pub fn should_reclassify(&self) -> bool {
        self.signals_since_reclass >= self.config.reclass_min_signals
            && self
                .buckets
                .values()
                .any(|b| b.n >= self.config.confidence_n)
    }

    pub fn mark_reclassified(&mut self) {
        self.signals_since_reclass = 0;
    }
}

/// One parsed behavioral-log row.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub idx: u32,
    pub genre: String,
    pub band: TimeBand,
    pub kind: SignalKind,
    pub position: u32,
    pub mei_arousal: f64,
    pub uea_arousal: f64,
}

/// Log- or reference-parsing failure, with the offending line.
#[derive(Debug, thiserror::Error)]
pub enum PafError {
    #[error("log i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: bad {what}: {value:?}")]
    BadField {
        line: usize,
        what: &'static str,
        value: String,
    },
    #[error("log is empty")]
    Empty,
}

const LOG_HEADER: &str = "idx,genre,band,signal,position,mei_arousal,uea_arousal";

/// Parses a behavioral log CSV (with header).
pub fn parse_log(text: &str) -> Result<Vec<LogRow>, PafError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != LOG_HEADER {
                return Err(PafError::BadField {
                    line: 1,
                    what: "header",
                    value: line.to_string(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(PafError::FieldCount {
                line: line_no,
                expected: 7,
                found: fields.len(),
            });
        }
        let bad = |what: &'static str, value: &str| PafError::BadField {
            line: line_no,
            what,
            value: value.to_string(),
        };
        rows.push(LogRow {
            idx: fields[0].parse().map_err(|_| bad("idx", fields[0]))?,
            genre: fields[1].to_lowercase(),
            band: TimeBand::parse(fields[2]).ok_or_else(|| bad("band", fields[2]))?,
            kind: SignalKind::parse(fields[3]).ok_or_else(|| bad("signal", fields[3]))?,
            position: fields[4].parse().map_err(|_| bad("position", fields[4]))?,
            mei_arousal: parse_arousal(fields[5]).ok_or_else(|| bad("mei_arousal", fields[5]))?,
            uea_arousal: parse_arousal(fields[6]).ok_or_else(|| bad("uea_arousal", fields[6]))?,
        });
    }
    if rows.is_empty() {
        return Err(PafError::Empty);
    }
    Ok(rows)
}

fn parse_arousal(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    (v.is_finite() && (-1.0..=1.0).contains(&v)).then_some(v)
}

/// One row of a reference profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub delta: f64,
    pub confidence: f64,
    pub n: u32,
}

/// Parses a reference profile CSV (`genre,band,delta,confidence,n`).
pub fn parse_reference(text: &str) -> Result<BTreeMap<(String, TimeBand), ReferenceRow>, PafError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "genre,band,delta,confidence,n" {
                return Err(PafError::BadField {
                    line: 1,
                    what: "header",
                    value: line.to_string(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(PafError::FieldCount {
                line: line_no,
                expected: 5,
                found: fields.len(),
            });
        }
        let bad = |what: &'static str, value: &str| PafError::BadField {
            line: line_no,
            what,
            value: value.to_string(),
        };
        let band = TimeBand::parse(fields[1]).ok_or_else(|| bad("band", fields[1]))?;
        out.insert(
            (fields[0].to_lowercase(), band),
            ReferenceRow {
                delta: fields[2].parse().map_err(|_| bad("delta", fields[2]))?,
                confidence: fields[3].parse().map_err(|_| bad("confidence", fields[3]))?,
                n: fields[4].parse().map_err(|_| bad("n", fields[4]))?,
            },
        );
    }
    if out.is_empty() {
        return Err(PafError::Empty);
    }
    Ok(out)
}

/// Replays a behavioral log into a fresh filter.
pub fn replay(rows: &[LogRow], config: PafConfig) -> Paf {
    let mut paf = Paf::new(config);
    for row in rows {
        paf.observe(
            &row.genre,
            row.band,
            row.kind,
            row.mei_arousal,
            Some(row.uea_arousal),
        );
    }
    paf
}

/// One bucket of the replay comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub genre: String,
    pub band: TimeBand,
    pub n: u32,
    pub confidence: f64,
    pub delta: f64,
    pub reference: Option<ReferenceRow>,
    /// True when the bucket has no reference row — evidence the log and
    /// reference disagree about which contexts exist.
    pub flagged: bool,
    /// For buckets with at least [`SIGN_REPORT_MIN_N`] observations and a
    /// reference: whether the replayed drift sign matches the reference.
    pub sign_agrees: Option<bool>,
}

/// Buckets below this observation count are too thin for sign calibration.
pub const SIGN_REPORT_MIN_N: u32 = 4;

/// Replay comparison: every replayed bucket against the reference.
#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub rows: Vec<ReportRow>,
    pub flagged: Vec<(String, TimeBand)>,
    /// (matching, total) across sign-calibration-eligible buckets.
    pub sign_calibration: (usize, usize),
    /// Reference buckets the replay never produced.
    pub missing: Vec<(String, TimeBand)>,
}

/// Compares a replayed filter against a reference profile.
pub fn compare(paf: &Paf, reference: &BTreeMap<(String, TimeBand), ReferenceRow>) -> ReplayReport {
    let mut rows = Vec::new();
    let mut flagged = Vec::new();
    let mut sign_match = 0;
    let mut sign_total = 0;
    for ((genre, band), state) in &paf.buckets {
        let reference_row = reference.get(&(genre.clone(), *band)).copied();
        let confidence = paf.confidence(genre, *band);
        let sign_agrees = reference_row.and_then(|r| {
            (state.n >= SIGN_REPORT_MIN_N).then(|| state.delta.signum() == r.delta.signum())
        });
        if let Some(agrees) = sign_agrees {
            sign_total += 1;
            if agrees {
                sign_match += 1;
            }
        }
        if reference_row.is_none() {
            flagged.push((genre.clone(), *band));
        }
        rows.push(ReportRow {
            genre: genre.clone(),
            band: *band,
            n: state.n,
            confidence,
            delta: state.delta,
            reference: reference_row,
            flagged: reference_row.is_none(),
            sign_agrees,
        });
    }
    let missing = reference
        .keys()
        .filter(|k| !paf.buckets.contains_key(*k))
        .cloned()
        .collect();
    ReplayReport {
        rows,
        flagged,
        sign_calibration: (sign_match, sign_total),
        missing,
    }
}

impl ReplayReport {
    /// Human-readable comparison table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:<10} {:>3} {:>6} {:>9} {:>9}  note",
            "genre", "band", "n", "conf", "delta", "ref"
        );
        for row in &self.rows {
            let reference = row
                .reference
                .map_or("-".to_string(), |r| format!("{:+.4}", r.delta));
            let note = if row.flagged {
                "FLAGGED: not in reference"
            } else {
                match row.sign_agrees {
                    Some(true) => "sign agrees",
                    Some(false) => "sign differs",
                    None => "",
                }
            };
            let _ = writeln!(
                out,
                "{:<14} {:<10} {:>3} {:>6.2} {:>+9.4} {:>9}  {note}",
                row.genre,
                row.band.as_str(),
                row.n,
                row.confidence,
                row.delta,
                reference,
            );
        }
        let _ = writeln!(
            out,
            "sign calibration (n ≥ {}): {}/{} buckets agree with the reference",
            SIGN_REPORT_MIN_N, self.sign_calibration.0, self.sign_calibration.1
        );
        if !self.missing.is_empty() {
            let names: Vec<String> = self
                .missing
                .iter()
                .map(|(g, b)| format!("{g}/{}", b.as_str()))
                .collect();
            let _ = writeln!(out, "missing from replay: {}", names.join(", "));
        }
        out
    }
}
