//! Affect-aware music coordination: bounded mood signaling between
//! listening agents, continuous-time listener models, drift-gated fusion,
//! per-context preference calibration, and a deterministic simulation
//! harness that ties them together.
//!
//! The crate is organized around the wire record ([`cmb`]): a seven-field
//! affect broadcast whose schema is closed, so a conforming node *cannot*
//! smuggle hidden state between peers. Everything else consumes or
//! produces those records:
//!
//! - [`affect`] — the valence/arousal plane, the legacy `[0, 99]` grid, and
//!   the 20×20 mood-anchor lookup.
//! - [`catalog`] — synthetic track catalogs with genre-anchored feature
//!   scatter.
//! - [`svaf`] — semantic drift scoring and per-field admission gates.
//! - [`cfc`] — closed-form continuous-time cells and the listener model.
//! - [`train`] — synthetic-task training with hand-rolled gradients.
//! - [`paf`] — per-(genre, daypart) preference calibration from behavior.
//! - [`ere`] — the organic/external mood ledger with isolation windows.
//! - [`curation`] — trajectory projection and playlist assembly.
//! - [`mesh`] — peer state, fusion policy, and broadcast decisions.
//! - [`sim`] — the discrete-event network simulator and scenario scripts.

#![forbid(unsafe_code)]

pub mod affect;
pub mod catalog;
pub mod cfc;
pub mod cmb;
pub mod curation;
pub mod ere;
pub mod mesh;
pub mod paf;
pub mod sim;
pub mod svaf;
pub mod train;
