//! The organic/external mood ledger.
//!
//! A node carries two mood registers. The *organic* register is the
//! listener's own state: it moves when they turn the mood dial or when
//! their music settles into them. The *external* register absorbs peer
//! influence. Keeping the registers separate — and broadcasting only the
//! organic one — is what stops two nodes from amplifying each other's
//! echo: influence a peer caused never flows back out to peers.
//!
//! After a mesh-induced playlist change, the node marks itself isolated
//! for a window; during it, organic fusion from track moods is suppressed
//! so the register cannot absorb the very music the mesh just queued.
//! Deliberate dial moves always land — the listener outranks the
//! machinery.

use serde::{Deserialize, Serialize};

use crate::affect::CircumplexPoint;

/// How long after a mesh-induced change organic fusion stays suppressed.
pub const ISOLATION_WINDOW: f64 = 60.0;

/// Fraction of the gap a single organic fusion closes.
pub const FUSION_BETA: f64 = 0.2;

/// Dual mood registers with mesh-isolation bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EreState {
    organic: CircumplexPoint,
    external: CircumplexPoint,
    /// Isolation suppresses organic fusion while active (cleared when the
    /// window passes). `None` once expired or never marked.
    isolation_expires: Option<f64>,
    /// Whether isolation is honored at all; a node may opt out.
    isolation_enabled: bool,
}

impl EreState {
    pub fn new(initial: CircumplexPoint, isolation_enabled: bool) -> EreState {
        EreState {
            organic: initial,
            external: initial,
            isolation_expires: None,
            isolation_enabled,
        }
    }

    pub fn organic(&self) -> CircumplexPoint {
        self.organic
    }

    pub fn external(&self) -> CircumplexPoint {
        self.external
    }

    /// What this node broadcasts: always the organic register.
    pub fn outbound_mood(&self) -> CircumplexPoint {
        self.organic
    }

    pub fn isolated(&self, now: f64) -> bool {
        self.isolation_enabled && self.isolation_expires.is_some_and(|t| now < t)
    }

    /// Marks (or re-arms) the isolation window after a mesh-induced
    /// playlist change.
    pub fn mark_mesh_induced(&mut self, now: f64) {
        if self.isolation_enabled {
            self.isolation_expires = Some(now + ISOLATION_WINDOW);
        }
    }

    /// Organic fusion toward a track's mood as it settles in. Suppressed
    /// during isolation; returns whether the fusion landed.
    pub fn fuse_organic(&mut self, toward: CircumplexPoint, now: f64) -> bool {
        if self.isolated(now) {
            return false;
        }
        self.organic = lerp(self.organic, toward, FUSION_BETA);
        true
    }

    /// External fusion from peer influence. Never touches the organic
    /// register and is not subject to isolation (the external register is
    /// exactly where mesh influence belongs).
    pub fn fuse_external(&mut self, toward: CircumplexPoint, now: f64) {
        let _ = now;
        self.external = lerp(self.external, toward, FUSION_BETA);
    }

    /// A deliberate mood-dial move: lands on both registers regardless of
    /// isolation, and clears any active window — the listener has spoken.
    pub fn set_organic(&mut self, mood: CircumplexPoint) {
        self.organic = mood;
        self.external = mood;
        self.isolation_expires = None;
    }
}

fn lerp(from: CircumplexPoint, to: CircumplexPoint, beta: f64) -> CircumplexPoint {
    CircumplexPoint::new(
        from.valence + beta * (to.valence - from.valence),
        from.arousal + beta * (to.arousal - from.arousal),
    )
}
