//! Per-frame feature observations.

use serde::{Deserialize, Serialize};

use crate::map::TrackId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub track: TrackId,
    pub u: f64,
    pub v: f64,
}

/// One input frame: observations sorted by track, at most one per track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub id: usize,
    pub timestamp: f64,
    pub observations: Vec<Observation>,
}

impl Frame {
    pub fn find(&self, track: TrackId) -> Option<&Observation> {
        self.observations.binary_search_by_key(&track, |o| o.track).ok().map(|i| &self.observations[i])
    }
}
