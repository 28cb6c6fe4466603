//! Trajectory and depth evaluation.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{umeyama_least_squares, GeometryError, Vec3};
use crate::image::DepthMap;
use crate::map::MapPointId;
use crate::scale::upper_median;
use crate::trajectory::Trajectory;

/// Maximum timestamp difference for pairing poses of two trajectories, in seconds.
pub const ASSOCIATION_TOLERANCE: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("need at least {need} associated poses, found {found}")]
    TooFewPoses { need: usize, found: usize },
    #[error("trajectories share no timestamps within tolerance")]
    NoTimestampOverlap,
    #[error("alignment failed: {0}")]
    Alignment(GeometryError),
    #[error("prediction and ground truth are {0}x{1} and {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("no pixel is valid in both maps")]
    EmptyOverlap,
}

/// Camera-center pairs of timestamp-associated poses.
pub fn associated_centers(est: &Trajectory, gt: &Trajectory) -> Result<(Vec<Vec3>, Vec<Vec3>), MetricsError> {
    let pairs = est.associate(gt, ASSOCIATION_TOLERANCE);
    if pairs.is_empty() {
        return Err(MetricsError::NoTimestampOverlap);
    }
    let ep = est.positions();
    let gp = gt.positions();
    Ok(pairs.iter().map(|&(i, j)| (ep[i], gp[j])).unzip())
}

/// RMSE of camera-center residuals, optionally after a similarity alignment of `est` onto `gt`.
/// Straight-line trajectories are fine; only coincident centers fail to align.
pub fn ate_rmse(est: &Trajectory, gt: &Trajectory, align_7dof: bool) -> Result<f64, MetricsError> {
    let (e, g) = associated_centers(est, gt)?;
    let e = if align_7dof {
        if e.len() < 3 {
            return Err(MetricsError::TooFewPoses { need: 3, found: e.len() });
        }
        let sim = umeyama_least_squares(&e, &g).map_err(MetricsError::Alignment)?;
        e.iter().map(|p| sim.apply(p)).collect()
    } else {
        e
    };
    let sq: f64 = e.iter().zip(&g).map(|(a, b)| (a - b).norm_squared()).sum();
    Ok((sq / e.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rms: f64,
    pub rms_log: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
}

/// Upper median of `gt / pred` over jointly valid pixels.
pub fn median_scale(pred: &DepthMap, gt: &DepthMap) -> Result<f64, MetricsError> {
    let ratios: Vec<f64> = joint(pred, gt)?.map(|(p, g)| g / p).collect();
    upper_median(ratios).ok_or(MetricsError::EmptyOverlap)
}

fn joint<'a>(pred: &'a DepthMap, gt: &'a DepthMap) -> Result<impl Iterator<Item = (f64, f64)> + 'a, MetricsError> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(MetricsError::DimensionMismatch(pred.width(), pred.height(), gt.width(), gt.height()));
    }
    Ok((0..pred.values().len()).filter_map(|i| Some((pred.get_index(i)?, gt.get_index(i)?))))
}

/// Depth error metrics over pixels valid in both maps. Relative errors are divided
/// by the prediction; `rms_log` uses base-10 logarithms.
pub fn depth_metrics(pred: &DepthMap, gt: &DepthMap, scale_recover: bool) -> Result<DepthMetrics, MetricsError> {
    let scale = if scale_recover { median_scale(pred, gt)? } else { 1.0 };
    let mut n = 0usize;
    let (mut abs_rel, mut sq_rel, mut sq, mut sq_log) = (0.0, 0.0, 0.0, 0.0);
    let mut hits = [0usize; 3];
    for (p, g) in joint(pred, gt)? {
        let p = p * scale;
        let d = g - p;
        abs_rel += d.abs() / p;
        sq_rel += d * d / p;
        sq += d * d;
        let dl = g.log10() - p.log10();
        sq_log += dl * dl;
        let ratio = (g / p).max(p / g);
        for (i, h) in hits.iter_mut().enumerate() {
            if ratio < 1.25f64.powi(i as i32 + 1) {
                *h += 1;
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(MetricsError::EmptyOverlap);
    }
    let nf = n as f64;
    Ok(DepthMetrics {
        abs_rel: abs_rel / nf,
        sq_rel: sq_rel / nf,
        rms: (sq / nf).sqrt(),
        rms_log: (sq_log / nf).sqrt(),
        delta1: hits[0] as f64 / nf,
        delta2: hits[1] as f64 / nf,
        delta3: hits[2] as f64 / nf,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterScore {
    pub precision: f64,
    pub recall: f64,
}

/// Precision is 1 when nothing was removed; recall is 1 when nothing was corrupted.
pub fn filter_score(removed: &BTreeSet<MapPointId>, corrupted: &BTreeSet<MapPointId>) -> FilterScore {
    let hit = removed.intersection(corrupted).count() as f64;
    FilterScore {
        precision: if removed.is_empty() { 1.0 } else { hit / removed.len() as f64 },
        recall: if corrupted.is_empty() { 1.0 } else { hit / corrupted.len() as f64 },
    }
}

/// Fraction of clean points of `population` that were removed; 0 when there are none.
pub fn false_removal_rate(
    removed: &BTreeSet<MapPointId>,
    corrupted: &BTreeSet<MapPointId>,
    population: &BTreeSet<MapPointId>,
) -> f64 {
    let clean = population.difference(corrupted).count();
    if clean == 0 {
        return 0.0;
    }
    let wrong = removed.iter().filter(|id| population.contains(id) && !corrupted.contains(id)).count();
    wrong as f64 / clean as f64
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsRow {
    pub run: String,
    pub ate_rmse: Option<f64>,
    pub depth: Option<DepthMetrics>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub false_removal_rate: Option<f64>,
}

pub const METRICS_CSV_HEADER: &str =
    "run,ate_rmse,abs_rel,sq_rel,rms,rms_log,delta1,delta2,delta3,precision,recall,false_removal_rate";

pub fn format_metrics_csv(rows: &[MetricsRow]) -> String {
    let f = |v: Option<f64>| v.map(|x| format!("{x:.9}")).unwrap_or_default();
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let d = r.depth;
        let cols = [
            f(r.ate_rmse),
            f(d.map(|d| d.abs_rel)),
            f(d.map(|d| d.sq_rel)),
            f(d.map(|d| d.rms)),
            f(d.map(|d| d.rms_log)),
            f(d.map(|d| d.delta1)),
            f(d.map(|d| d.delta2)),
            f(d.map(|d| d.delta3)),
            f(r.precision),
            f(r.recall),
            f(r.false_removal_rate),
        ];
        out.push_str(&r.run);
        for c in cols {
            out.push(',');
            out.push_str(&c);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PoseSE3;

    fn line(n: usize) -> Trajectory {
        Trajectory::from_entries(
            (0..n)
                .map(|i| {
                    let f = i as f64;
                    (f * 0.1, PoseSE3::from_axis_angle(Vec3::new(0.0, 0.02 * f, 0.0), Vec3::new(f, 0.1 * f * f, 0.5)))
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ate_examples() {
        let gt = line(10);
        assert_eq!(ate_rmse(&gt, &gt, false).unwrap(), 0.0);
        assert!(ate_rmse(&gt, &gt, true).unwrap() < 1e-12);
        let mut entries = gt.entries().to_vec();
        let p = entries[4].1;
        entries[4].1 = PoseSE3::from_center(p.rotation().transpose(), p.center() + Vec3::new(0.0, 1.0, 0.0)).unwrap();
        let est = Trajectory::from_entries(entries).unwrap();
        assert!((ate_rmse(&est, &gt, false).unwrap() - 1.0 / 10f64.sqrt()).abs() < 1e-12);
        let far = Trajectory::from_entries(vec![(100.0, PoseSE3::identity())]).unwrap();
        assert_eq!(ate_rmse(&far, &gt, false), Err(MetricsError::NoTimestampOverlap));
    }

    #[test]
    fn delta_thresholds() {
        let gt = DepthMap::from_values(3, 1, vec![1.0, 2.0, 5.0]).unwrap();
        let pred = gt.scaled(1.3);
        let m = depth_metrics(&pred, &gt, false).unwrap();
        assert_eq!((m.delta1, m.delta2, m.delta3), (0.0, 1.0, 1.0));
        let same = depth_metrics(&gt, &gt, false).unwrap();
        assert_eq!(same.abs_rel, 0.0);
        assert_eq!((same.delta1, same.delta2, same.delta3), (1.0, 1.0, 1.0));
        let rec = depth_metrics(&gt.scaled(2.0), &gt, true).unwrap();
        assert_eq!(rec, same);
    }

    #[test]
    fn filter_scores() {
        let c: BTreeSet<_> = (0..4).map(MapPointId).collect();
        assert_eq!(filter_score(&c, &c), FilterScore { precision: 1.0, recall: 1.0 });
        assert_eq!(filter_score(&BTreeSet::new(), &c), FilterScore { precision: 1.0, recall: 0.0 });
        let half: BTreeSet<_> = (0..2).map(MapPointId).collect();
        assert_eq!(filter_score(&half, &c), FilterScore { precision: 1.0, recall: 0.5 });
        let pop: BTreeSet<_> = (0..14).map(MapPointId).collect();
        let r: BTreeSet<_> = [MapPointId(0), MapPointId(9)].into();
        assert_eq!(false_removal_rate(&r, &c, &pop), 0.1);
    }
}
