//! Timestamped pose sequences and the TUM text format.
//!
//! A TUM line is `timestamp tx ty tz qx qy qz qw` and describes the camera in the
//! world (camera center and camera-to-world rotation). Poses are kept world-to-camera
//! in memory and converted at the file boundary.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Quaternion, Rotation3, UnitQuaternion};
use thiserror::Error;

use crate::geometry::{PoseSE3, Sim3, Vec3};

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("timestamps must be strictly increasing ({prev} then {next})")]
    NonIncreasingTimestamp { prev: f64, next: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    entries: Vec<(f64, PoseSE3)>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<(f64, PoseSE3)>) -> Result<Self, TrajectoryError> {
        let mut t = Trajectory::new();
        for (ts, pose) in entries {
            t.push(ts, pose)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, timestamp: f64, pose: PoseSE3) -> Result<(), TrajectoryError> {
        if let Some(&(prev, _)) = self.entries.last() {
            if !(timestamp > prev) {
                return Err(TrajectoryError::NonIncreasingTimestamp { prev, next: timestamp });
            }
        }
        self.entries.push((timestamp, pose));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(f64, PoseSE3)] {
        &self.entries
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.entries.iter().map(|(t, _)| *t).collect()
    }

    pub fn poses(&self) -> impl Iterator<Item = &PoseSE3> {
        self.entries.iter().map(|(_, p)| p)
    }

    pub fn pose(&self, i: usize) -> &PoseSE3 {
        &self.entries[i].1
    }

    /// Camera centers in world coordinates.
    pub fn positions(&self) -> Vec<Vec3> {
        self.entries.iter().map(|(_, p)| p.center()).collect()
    }

    /// Applies a similarity to the world frame of every pose.
    pub fn transformed(&self, sim: &Sim3) -> Trajectory {
        Trajectory { entries: self.entries.iter().map(|(t, p)| (*t, sim.transform_pose(p))).collect() }
    }

    pub fn to_tum_string(&self) -> String {
        let mut out = String::new();
        out.push_str("# timestamp tx ty tz qx qy qz qw\n");
        for (ts, pose) in &self.entries {
            let c = pose.center();
            let r_wc = Rotation3::from_matrix_unchecked(pose.rotation().transpose());
            let q = UnitQuaternion::from_rotation_matrix(&r_wc);
            // Canonical sign so identical rotations print identically.
            let q = if q.w < 0.0 { -q.into_inner() } else { q.into_inner() };
            writeln!(
                out,
                "{:.6} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9}",
                ts, c.x, c.y, c.z, q.i, q.j, q.k, q.w
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    pub fn parse_tum(text: &str) -> Result<Trajectory, TrajectoryError> {
        let mut traj = Trajectory::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|e| TrajectoryError::Parse { line: line_no, msg: format!("bad number {tok:?}: {e}") })
                })
                .collect::<Result<_, _>>()?;
            if vals.len() != 8 {
                return Err(TrajectoryError::Parse {
                    line: line_no,
                    msg: format!("expected 8 fields, found {}", vals.len()),
                });
            }
            let q = Quaternion::new(vals[7], vals[4], vals[5], vals[6]);
            if !(q.norm() > 1e-12) || vals.iter().any(|v| !v.is_finite()) {
                return Err(TrajectoryError::Parse { line: line_no, msg: "degenerate quaternion".into() });
            }
            let r_wc = UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
            let pose = PoseSE3::from_center(r_wc, Vec3::new(vals[1], vals[2], vals[3]))
                .map_err(|e| TrajectoryError::Parse { line: line_no, msg: e.to_string() })?;
            traj.push(vals[0], pose).map_err(|e| TrajectoryError::Parse { line: line_no, msg: e.to_string() })?;
        }
        Ok(traj)
    }

    pub fn write_tum(&self, path: impl AsRef<Path>) -> Result<(), TrajectoryError> {
        std::fs::write(path, self.to_tum_string())?;
        Ok(())
    }

    pub fn read_tum(path: impl AsRef<Path>) -> Result<Trajectory, TrajectoryError> {
        Self::parse_tum(&std::fs::read_to_string(path)?)
    }

    /// Nearest-timestamp association; each pose of `other` is used at most once.
    ///
    /// Returns index pairs `(i_self, i_other)` with `|t_self - t_other| <= tol`,
    /// in increasing order of `i_self`.
    pub fn associate(&self, other: &Trajectory, tol: f64) -> Vec<(usize, usize)> {
        let mut used = vec![false; other.len()];
        let mut pairs = Vec::new();
        let other_ts = other.timestamps();
        for (i, (t, _)) in self.entries.iter().enumerate() {
            let pos = other_ts.partition_point(|x| x < t);
            let mut best: Option<(usize, f64)> = None;
            for j in [pos.wrapping_sub(1), pos] {
                if j < other_ts.len() && !used[j] {
                    let d = (other_ts[j] - t).abs();
                    if d <= tol && best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((j, d));
                    }
                }
            }
            if let Some((j, _)) = best {
                used[j] = true;
                pairs.push((i, j));
            }
        }
        pairs
    }
}
