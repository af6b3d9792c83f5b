//! Ego-position recovery from matched anchors and multi-camera /
//! multi-anchor averaging.
//!
//! Conventions: the vehicle frame is +x forward, +y left; headings are
//! radians measured counter-clockwise from the lot frame's +X axis. An
//! anchor observed at vehicle-frame offset `o` from a vehicle at pose
//! `(e, heading)` satisfies `anchor = e + R(heading) * o`, so the ego
//! position is recovered as `e = anchor - R(heading) * o`.

use crate::detection::CameraId;
use crate::geometry::Point2Ground;
use crate::hdmap::ParkingSpot;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("empty input")]
    EmptyInput,
}

/// A matched anchor's position in the vehicle frame, as seen by one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeEstimate {
    pub camera_id: CameraId,
    /// Anchor position in the vehicle frame, meters (+x forward, +y left).
    pub offset: [f64; 2],
    pub spot_label: String,
}

/// Estimated vehicle position in the lot frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoPose {
    pub x: f64,
    pub y: f64,
    /// Supplied by odometry, not estimated here.
    pub heading: f64,
    pub timestamp: f64,
    /// Number of distinct anchors fused into this pose.
    pub n_anchors: usize,
}

/// Rotates a vehicle-frame vector into the lot frame.
fn rotate(heading: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = heading.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Ego position implied by one anchor observation:
/// `ego = anchor - R(heading) * offset`.
pub fn ego_from_anchor(spot: &ParkingSpot, rel: &RelativeEstimate, heading: f64) -> [f64; 2] {
    let lot_offset = rotate(heading, rel.offset);
    [spot.anchor.x - lot_offset[0], spot.anchor.y - lot_offset[1]]
}

/// Forward observation model, the exact inverse of [`ego_from_anchor`]:
/// where an anchor at `anchor` appears in the frame of a vehicle at
/// `(ego, heading)`.
pub fn anchor_offset_in_vehicle_frame(
    anchor: Point2Ground,
    ego: [f64; 2],
    heading: f64,
) -> [f64; 2] {
    let d = [anchor.x - ego[0], anchor.y - ego[1]];
    rotate(-heading, d)
}

/// Component-wise mean of per-camera ego estimates for one anchor.
pub fn fuse_relative(estimates: &[[f64; 2]]) -> Result<[f64; 2], FusionError> {
    mean(estimates)
}

/// Mean over per-anchor ego positions. Each entry is one distinct anchor
/// (per-camera duplicates were already averaged by [`fuse_relative`]);
/// returns the fused position and the distinct-anchor count.
pub fn fuse_frame(per_anchor: &[(String, [f64; 2])]) -> Result<([f64; 2], usize), FusionError> {
    let positions: Vec<[f64; 2]> = per_anchor.iter().map(|(_, p)| *p).collect();
    let fused = mean(&positions)?;
    let mut labels: Vec<&str> = per_anchor.iter().map(|(l, _)| l.as_str()).collect();
    labels.sort_unstable();
    labels.dedup();
    Ok((fused, labels.len()))
}

fn mean(points: &[[f64; 2]]) -> Result<[f64; 2], FusionError> {
    if points.is_empty() {
        return Err(FusionError::EmptyInput);
    }
    let n = points.len() as f64;
    let sum = points
        .iter()
        .fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
    Ok([sum[0] / n, sum[1] / n])
}
