//! Map points and the local map shared by tracking, filtering and mapping.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

/// Identifier of a feature track. Tracks are created by the front-end (here the
/// simulator) and are stable for the whole sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrackId(pub u64);

/// Map point identifier. A track yields at most one map point, so the track id is reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MapPointId(pub u64);

impl From<TrackId> for MapPointId {
    fn from(t: TrackId) -> Self {
        MapPointId(t.0)
    }
}

impl std::fmt::Display for MapPointId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapPoint {
    pub id: MapPointId,
    pub position: Vec3,
    pub reference_keyframe: usize,
    pub observation_count: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("unknown map point id {0}")]
    UnknownId(MapPointId),
    #[error("map point {0} already exists")]
    DuplicateId(MapPointId),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RemovalReport {
    pub points_removed: usize,
    pub observations_removed: usize,
}

/// Map points plus, per frame, the points that frame observed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocalMap {
    points: BTreeMap<MapPointId, MapPoint>,
    frame_observations: BTreeMap<usize, Vec<MapPointId>>,
    retired: BTreeSet<MapPointId>,
}

impl LocalMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, point: MapPoint) -> Result<(), MapError> {
        if self.points.contains_key(&point.id) {
            return Err(MapError::DuplicateId(point.id));
        }
        self.points.insert(point.id, point);
        Ok(())
    }

    pub fn get(&self, id: MapPointId) -> Option<&MapPoint> {
        self.points.get(&id)
    }

    pub fn contains(&self, id: MapPointId) -> bool {
        self.points.contains_key(&id)
    }

    /// True for ids that were removed; such tracks are not re-triangulated.
    pub fn is_retired(&self, id: MapPointId) -> bool {
        self.retired.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &MapPoint> {
        self.points.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = MapPointId> + '_ {
        self.points.keys().copied()
    }

    /// Records that `frame` observed `ids`; unknown ids are skipped.
    pub fn record_observations(&mut self, frame: usize, ids: &[MapPointId]) {
        let mut kept = Vec::with_capacity(ids.len());
        for id in ids {
            if let Some(p) = self.points.get_mut(id) {
                p.observation_count += 1;
                kept.push(*id);
            }
        }
        self.frame_observations.insert(frame, kept);
    }

    pub fn observations_of(&self, frame: usize) -> &[MapPointId] {
        self.frame_observations.get(&frame).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn frames(&self) -> impl Iterator<Item = usize> + '_ {
        self.frame_observations.keys().copied()
    }

    /// Removes the points and every frame observation of them. All ids are
    /// checked before anything is removed.
    pub fn remove(&mut self, ids: &BTreeSet<MapPointId>) -> Result<RemovalReport, MapError> {
        if let Some(missing) = ids.iter().find(|id| !self.points.contains_key(id)) {
            return Err(MapError::UnknownId(*missing));
        }
        let mut report = RemovalReport::default();
        for id in ids {
            self.points.remove(id);
            self.retired.insert(*id);
            report.points_removed += 1;
        }
        for obs in self.frame_observations.values_mut() {
            let before = obs.len();
            obs.retain(|id| !ids.contains(id));
            report.observations_removed += before - obs.len();
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(id: u64) -> MapPoint {
        MapPoint { id: MapPointId(id), position: Vec3::new(0.0, 0.0, id as f64 + 1.0), reference_keyframe: 0, observation_count: 0 }
    }

    #[test]
    fn remove_updates_observations() {
        let mut m = LocalMap::new();
        for i in 0..10 {
            m.insert(point(i)).unwrap();
        }
        let all: Vec<_> = m.ids().collect();
        m.record_observations(0, &all);
        m.record_observations(1, &all[..5]);
        let gone: BTreeSet<_> = [MapPointId(1), MapPointId(7), MapPointId(8)].into();
        let r = m.remove(&gone).unwrap();
        assert_eq!(r, RemovalReport { points_removed: 3, observations_removed: 4 });
        assert_eq!(m.len(), 7);
        for f in m.frames() {
            assert!(m.observations_of(f).iter().all(|id| m.contains(*id)));
        }
        assert!(m.is_retired(MapPointId(7)));
    }

    #[test]
    fn unknown_id_leaves_map_untouched() {
        let mut m = LocalMap::new();
        m.insert(point(0)).unwrap();
        let ids: BTreeSet<_> = [MapPointId(0), MapPointId(5)].into();
        assert_eq!(m.remove(&ids), Err(MapError::UnknownId(MapPointId(5))));
        assert_eq!(m.len(), 1);
        assert_eq!(m.remove(&BTreeSet::new()).unwrap(), RemovalReport::default());
        assert!(m.insert(point(0)).is_err());
    }
}
