//! Near-far consistency filter: map points whose depth rank under the VO map
//! disagrees with their rank under the predicted depth map are removed.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{project, CameraIntrinsics, PoseSE3, Vec3, MIN_DEPTH};
use crate::image::DepthMap;
use crate::map::{LocalMap, MapError, MapPointId, RemovalReport};

/// Sets smaller than this are left alone by the pipeline.
pub const MIN_FILTER_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub map_point_id: MapPointId,
    pub u: f64,
    pub v: f64,
    pub z_vo: f64,
    pub z_pred: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("rank displacement needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    /// `(id, lambda)` in input order.
    pub lambdas: Vec<(MapPointId, usize)>,
    pub n: usize,
    pub sigma: Option<usize>,
    pub outlier_ids: BTreeSet<MapPointId>,
}

/// Threshold on the rank displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaPolicy {
    /// `max(3, ceil(0.1 n))`
    #[default]
    Adaptive,
    Fixed(usize),
}

impl SigmaPolicy {
    pub fn resolve(&self, n: usize) -> usize {
        match *self {
            SigmaPolicy::Adaptive => 3.max(n.div_ceil(10)),
            SigmaPolicy::Fixed(s) => s,
        }
    }
}

impl Serialize for SigmaPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            SigmaPolicy::Adaptive => s.serialize_str("adaptive"),
            SigmaPolicy::Fixed(v) => s.serialize_u64(*v as u64),
        }
    }
}

impl<'de> Deserialize<'de> for SigmaPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Str(String),
        }
        match Raw::deserialize(d).map_err(|_| serde::de::Error::custom("sigma must be a non-negative integer or \"adaptive\""))? {
            Raw::Num(v) => Ok(SigmaPolicy::Fixed(v as usize)),
            Raw::Str(s) if s == "adaptive" => Ok(SigmaPolicy::Adaptive),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("unknown sigma {s:?}, expected a number or \"adaptive\""))),
        }
    }
}

/// Predicted depth at a sub-pixel location: bilinear, else the nearest valid pixel within 1 px.
pub fn sample_prediction(depth: &DepthMap, u: f64, v: f64) -> Option<f64> {
    depth.bilinear(u, v).or_else(|| depth.nearest_valid(u, v, 1))
}

/// Projects map points into the frame and pairs each visible one with the predicted depth.
pub fn project_local_map(
    points: impl IntoIterator<Item = (MapPointId, Vec3)>,
    pose: &PoseSE3,
    k: &CameraIntrinsics,
    depth_pred: &DepthMap,
) -> Vec<ProjectedPoint> {
    points
        .into_iter()
        .filter_map(|(id, p)| {
            let px = project(k, pose, &p).ok()?;
            let z_vo = px.z?;
            if z_vo <= MIN_DEPTH || !k.contains(px.u, px.v) {
                return None;
            }
            let z_pred = sample_prediction(depth_pred, px.u, px.v)?;
            Some(ProjectedPoint { map_point_id: id, u: px.u, v: px.v, z_vo, z_pred })
        })
        .collect()
}

/// 1-based rank of every element under the key, ties broken by id.
fn ranks(points: &[ProjectedPoint], key: impl Fn(&ProjectedPoint) -> f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        key(&points[a]).total_cmp(&key(&points[b])).then(points[a].map_point_id.cmp(&points[b].map_point_id))
    });
    let mut rank = vec![0; points.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    rank
}

pub fn rank_displacement(points: &[ProjectedPoint]) -> Result<RankReport, FilterError> {
    if points.len() < 2 {
        return Err(FilterError::TooFewPoints(points.len()));
    }
    let i = ranks(points, |p| p.z_vo);
    let j = ranks(points, |p| p.z_pred);
    let lambdas = points.iter().zip(i.iter().zip(&j)).map(|(p, (a, b))| (p.map_point_id, a.abs_diff(*b))).collect();
    Ok(RankReport { lambdas, n: points.len(), sigma: None, outlier_ids: BTreeSet::new() })
}

/// Ids with `lambda > sigma`.
pub fn select_outliers(report: &RankReport, sigma: usize) -> BTreeSet<MapPointId> {
    report.lambdas.iter().filter(|(_, l)| *l > sigma).map(|(id, _)| *id).collect()
}

/// Ranks, thresholds and records the outliers in the report.
pub fn evaluate(points: &[ProjectedPoint], policy: SigmaPolicy) -> Result<RankReport, FilterError> {
    let mut report = rank_displacement(points)?;
    let sigma = policy.resolve(report.n);
    report.outlier_ids = select_outliers(&report, sigma);
    report.sigma = Some(sigma);
    Ok(report)
}

pub fn apply_filter(map: &mut LocalMap, outlier_ids: &BTreeSet<MapPointId>) -> Result<RemovalReport, FilterError> {
    Ok(map.remove(outlier_ids)?)
}

/// One row of the removal log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterLogRow {
    pub frame_id: usize,
    pub map_point_id: MapPointId,
    pub z_vo: f64,
    pub z_pred: f64,
    pub lambda: usize,
    pub removed: bool,
}

pub const FILTER_LOG_HEADER: &str = "frame_id,map_point_id,z_vo,z_pred,lambda,removed";

pub fn log_rows(frame_id: usize, points: &[ProjectedPoint], report: &RankReport) -> Vec<FilterLogRow> {
    points
        .iter()
        .zip(&report.lambdas)
        .map(|(p, (id, lambda))| FilterLogRow {
            frame_id,
            map_point_id: *id,
            z_vo: p.z_vo,
            z_pred: p.z_pred,
            lambda: *lambda,
            removed: report.outlier_ids.contains(id),
        })
        .collect()
}

pub fn format_log(rows: &[FilterLogRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 48 + 64);
    out.push_str(FILTER_LOG_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.9},{:.9},{},{}\n",
            r.frame_id, r.map_point_id, r.z_vo, r.z_pred, r.lambda, r.removed as u8
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(z_vo: &[f64], z_pred: &[f64]) -> Vec<ProjectedPoint> {
        z_vo.iter()
            .zip(z_pred)
            .enumerate()
            .map(|(i, (&a, &b))| ProjectedPoint { map_point_id: MapPointId(i as u64), u: 0.0, v: 0.0, z_vo: a, z_pred: b })
            .collect()
    }

    fn lambdas(r: &RankReport) -> Vec<usize> {
        r.lambdas.iter().map(|(_, l)| *l).collect()
    }

    #[test]
    fn hand_examples() {
        let r = rank_displacement(&pts(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 4.0, 3.0])).unwrap();
        assert_eq!(lambdas(&r), vec![0, 0, 1, 1]);
        let out = select_outliers(&r, 0);
        assert_eq!(out, [MapPointId(2), MapPointId(3)].into());
        let r = rank_displacement(&pts(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0])).unwrap();
        assert_eq!(lambdas(&r), vec![3, 1, 1, 3]);
        assert!(select_outliers(&r, 3).is_empty());
        assert_eq!(rank_displacement(&pts(&[1.0], &[1.0])), Err(FilterError::TooFewPoints(1)));
    }

    #[test]
    fn ties_do_not_create_outliers() {
        let r = rank_displacement(&pts(&[2.0, 2.0, 2.0], &[5.0, 5.0, 5.0])).unwrap();
        assert_eq!(lambdas(&r), vec![0, 0, 0]);
    }

    #[test]
    fn adaptive_sigma() {
        assert_eq!(SigmaPolicy::Adaptive.resolve(10), 3);
        assert_eq!(SigmaPolicy::Adaptive.resolve(31), 4);
        assert_eq!(SigmaPolicy::Adaptive.resolve(300), 30);
        assert_eq!(SigmaPolicy::Fixed(7).resolve(300), 7);
    }

    #[test]
    fn sigma_policy_serde() {
        assert_eq!(serde_json::from_str::<SigmaPolicy>("\"adaptive\"").unwrap(), SigmaPolicy::Adaptive);
        assert_eq!(serde_json::from_str::<SigmaPolicy>("12").unwrap(), SigmaPolicy::Fixed(12));
        assert!(serde_json::from_str::<SigmaPolicy>("\"loose\"").is_err());
        assert!(serde_json::from_str::<SigmaPolicy>("-1").is_err());
        assert_eq!(serde_json::to_string(&SigmaPolicy::Fixed(4)).unwrap(), "4");
    }

    #[test]
    fn projection_examples() {
        let k = CameraIntrinsics::new(100.0, 100.0, 32.0, 24.0, 64, 48).unwrap();
        let pred = DepthMap::from_values(64, 48, vec![7.0; 64 * 48]).unwrap();
        let pose = PoseSE3::identity();
        let out = project_local_map(
            [(MapPointId(1), Vec3::new(0.0, 0.0, 2.0)), (MapPointId(2), Vec3::new(0.0, 0.0, -2.0))],
            &pose,
            &k,
            &pred,
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].map_point_id, MapPointId(1));
        assert_eq!(out[0].z_vo, 2.0);
        assert_eq!(out[0].z_pred, 7.0);
    }
}
