//! Closed-loop synthetic world: lot generation, trajectory generation, and
//! rendering of parking-number observations through the camera rig, with
//! seeded noise and anomaly injection.
//!
//! The renderer is the exact forward model of the pipeline's observation
//! equations: with all noise zero, replaying a synthesized log reproduces
//! the generating trajectory to floating-point precision.

use crate::config::CameraRig;
use crate::detection::{BoundingBox, CameraId, DetectionRecord, FrameBundle, TextClass};
use crate::filter::extract_number;
use crate::fusion::anchor_offset_in_vehicle_frame;
use crate::geometry::{Homography, Point2Ground, Point2Image};
use crate::hdmap::{HdMap, ParkingSpot};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

/// Trajectory sampling rate, frames per second.
pub const SAMPLE_RATE_HZ: f64 = 30.0;

/// Ground-plane extent of one painted marking, meters (full width/height).
const MARKING_SIZE: (f64, f64) = (0.6, 0.4);

/// Per-camera visible ground region in the vehicle frame: axial range along
/// the camera axis and lateral half-width (a rectangle standing in for the
/// 0.5-6 m, +/-60 degree wedge a close-range camera covers).
const VISIBLE_AXIAL: (f64, f64) = (0.5, 6.0);
const VISIBLE_HALF_WIDTH: f64 = 5.5;

/// Injected ghost labels are at least this far, numerically, from the
/// nearest true label, which puts them far outside any plausible
/// acceptance window. The upper bound keeps the injected error magnitude
/// bounded so metrics do not hinge on lot size.
const GHOST_LABEL_DISTANCE: (i64, i64) = (25, 35);

/// Misread content lands on an in-map label this far from the true one:
/// past the filter's acceptance window (the failure channel the box-plot
/// filter exists to catch) but within the span a plausible digit confusion
/// produces.
const MISREAD_LABEL_DISTANCE: (i64, i64) = (5, 20);

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid lot spec: {0}")]
    InvalidLot(&'static str),
    #[error("speed must be positive")]
    BadSpeed,
    #[error("failed to read truth sidecar")]
    Io(#[from] std::io::Error),
    #[error("truth sidecar line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Geometry of a rectangular lot: `rows` lines of `spots_per_row` markings.
///
/// Row `r` lies at `y = r * 2 * aisle_width`; its serving aisle centerline
/// runs at lateral offset `aisle_width / 2`, which keeps the next row
/// outside camera range. Labels are zero-padded decimal strings counting
/// from "001" along each row in +x order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LotSpec {
    pub rows: u32,
    pub spots_per_row: u32,
    pub spot_pitch: f64,
    pub aisle_width: f64,
}

impl Default for LotSpec {
    fn default() -> Self {
        Self {
            rows: 1,
            spots_per_row: 300,
            spot_pitch: 2.2,
            aisle_width: 6.0,
        }
    }
}

impl LotSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.rows == 0 || self.spots_per_row == 0 {
            return Err(SimError::InvalidLot("rows and spots_per_row must be positive"));
        }
        if !(self.spot_pitch > 0.0) || !(self.aisle_width > 0.0) {
            return Err(SimError::InvalidLot("pitch and aisle width must be positive"));
        }
        Ok(())
    }

    pub fn row_spacing(&self) -> f64 {
        2.0 * self.aisle_width
    }

    pub fn aisle_y(&self, row: u32) -> f64 {
        row as f64 * self.row_spacing() + self.aisle_width / 2.0
    }

    pub fn last_x(&self) -> f64 {
        (self.spots_per_row - 1) as f64 * self.spot_pitch
    }
}

/// Builds the lot map: labels "001", "002", ... in +x order within each
/// row, so spatially adjacent spots of a row carry consecutive numbers.
pub fn generate_lot(spec: &LotSpec) -> Result<HdMap, SimError> {
    spec.validate()?;
    let width = usize::max(3, format!("{}", spec.rows * spec.spots_per_row).len());
    let mut spots = Vec::with_capacity((spec.rows * spec.spots_per_row) as usize);
    for row in 0..spec.rows {
        for s in 0..spec.spots_per_row {
            let n = row * spec.spots_per_row + s + 1;
            spots.push(ParkingSpot {
                label: format!("{n:0width$}"),
                anchor: Point2Ground::new(
                    s as f64 * spec.spot_pitch,
                    row as f64 * spec.row_spacing(),
                ),
                floor: 0,
            });
        }
    }
    HdMap::new(
        format!("sim-{}x{}", spec.rows, spec.spots_per_row),
        spots,
    )
    .map_err(|_| SimError::InvalidLot("generated spots were invalid"))
}

/// Noise and anomaly knobs. All randomness derives from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Gaussian sigma on every box corner coordinate, pixels.
    pub pixel_sigma: f64,
    /// Probability a surviving detection's content is replaced by a random
    /// different in-map label.
    pub misread_rate: f64,
    /// Probability a visible (spot, camera) observation yields no detection.
    pub dropout_rate: f64,
    /// Probability per frame of one injected far-label ghost detection.
    pub ghost_rate: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn clean(seed: u64) -> Self {
        Self {
            pixel_sigma: 0.0,
            misread_rate: 0.0,
            dropout_rate: 0.0,
            ghost_rate: 0.0,
            seed,
        }
    }
}

/// One ground-truth pose sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub t: f64,
}

/// Ground-truth poses at a fixed rate with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrivePattern {
    /// Down row 0's aisle in +x, constant heading.
    StraightAisle,
    /// Every aisle in turn, linked by half-circle U-turns.
    Serpentine,
}

impl std::str::FromStr for DrivePattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "straight-aisle" | "straight" => Ok(DrivePattern::StraightAisle),
            "serpentine" => Ok(DrivePattern::Serpentine),
            other => Err(format!(
                "unknown pattern {other:?} (expected straight-aisle or serpentine)"
            )),
        }
    }
}

enum Segment {
    Straight {
        from: (f64, f64),
        heading: f64,
        length: f64,
    },
    Arc {
        center: (f64, f64),
        radius: f64,
        angle0: f64,
        /// +1 counter-clockwise, -1 clockwise.
        dir: f64,
        heading0: f64,
        length: f64,
    },
}

impl Segment {
    fn length(&self) -> f64 {
        match self {
            Segment::Straight { length, .. } | Segment::Arc { length, .. } => *length,
        }
    }

    fn pose_at(&self, s: f64) -> (f64, f64, f64) {
        match self {
            Segment::Straight { from, heading, .. } => (
                from.0 + s * heading.cos(),
                from.1 + s * heading.sin(),
                *heading,
            ),
            Segment::Arc {
                center,
                radius,
                angle0,
                dir,
                heading0,
                ..
            } => {
                let theta = angle0 + dir * s / radius;
                (
                    center.0 + radius * theta.cos(),
                    center.1 + radius * theta.sin(),
                    heading0 + dir * s / radius,
                )
            }
        }
    }
}

/// Samples a kinematically smooth drive through the lot at constant speed.
pub fn generate_trajectory(
    lot: &LotSpec,
    speed_mps: f64,
    pattern: DrivePattern,
) -> Result<Trajectory, SimError> {
    lot.validate()?;
    if !(speed_mps > 0.0) {
        return Err(SimError::BadSpeed);
    }

    let mut segments: Vec<Segment> = Vec::new();
    let x_span = lot.last_x();
    match pattern {
        DrivePattern::StraightAisle => {
            segments.push(Segment::Straight {
                from: (0.0, lot.aisle_y(0)),
                heading: 0.0,
                length: x_span.max(lot.spot_pitch),
            });
        }
        DrivePattern::Serpentine => {
            let radius = lot.row_spacing() / 2.0;
            let margin = 2.0;
            let length = x_span + 2.0 * margin;
            for row in 0..lot.rows {
                let eastbound = row % 2 == 0;
                let heading = if eastbound { 0.0 } else { std::f64::consts::PI };
                let from_x = if eastbound { -margin } else { x_span + margin };
                segments.push(Segment::Straight {
                    from: (from_x, lot.aisle_y(row)),
                    heading,
                    length,
                });
                if row + 1 < lot.rows {
                    // U-turn "up" to the next aisle: left when eastbound,
                    // right when westbound.
                    let dir = if eastbound { 1.0 } else { -1.0 };
                    let end_x = if eastbound { x_span + margin } else { -margin };
                    let center = (end_x, lot.aisle_y(row) + radius);
                    let angle0 = if eastbound {
                        -std::f64::consts::FRAC_PI_2
                    } else {
                        std::f64::consts::FRAC_PI_2
                    };
                    segments.push(Segment::Arc {
                        center,
                        radius,
                        angle0,
                        dir,
                        heading0: heading,
                        length: std::f64::consts::PI * radius,
                    });
                }
            }
        }
    }

    let total: f64 = segments.iter().map(Segment::length).sum();
    let n = ((total / speed_mps) * SAMPLE_RATE_HZ).round().max(1.0) as usize;
    let mut points = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / SAMPLE_RATE_HZ;
        let mut s = speed_mps * t;
        let mut pose = None;
        for seg in &segments {
            if s <= seg.length() {
                pose = Some(seg.pose_at(s));
                break;
            }
            s -= seg.length();
        }
        let (x, y, heading) = pose.unwrap_or_else(|| {
            let last = segments.last().expect("at least one segment");
            last.pose_at(last.length())
        });
        points.push(TrajectoryPoint { x, y, heading, t });
    }
    Ok(Trajectory { points })
}

/// Synthetic surround-view rig: each camera is a pinhole at 1.8 m height
/// looking along its axis, so a ground point at axial distance `a` and
/// lateral offset `l` lands at `u = cx + fx*l/a`, `v = cy + fy*h/a`. That
/// projection is an honest (non-affine) homography of the vehicle-frame
/// ground plane. The short focal length models the coarse ground sampling
/// of a wide-angle surround camera: a pixel of corner noise is worth
/// centimeters on the ground.
pub fn default_rig() -> CameraRig {
    let (fx, fy, cx, cy, h) = (140.0, 140.0, 640.0, 360.0, 1.8);
    let persp = [[cx, fx, 0.0], [cy, 0.0, fy * h], [1.0, 0.0, 0.0]];
    // (axial, lateral) axes of each camera in vehicle-frame coordinates.
    let axes = [
        [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]],  // front
        [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],  // rear
        [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],   // left
        [[0.0, -1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], // right
    ];
    let cameras = axes.map(|axis| {
        let mut product = [[0.0; 3]; 3];
        for (r, row) in product.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| persp[r][k] * axis[k][c]).sum();
            }
        }
        Homography::from_entries(product).expect("synthetic camera matrices are invertible")
    });
    CameraRig::new(cameras)
}

/// Vehicle-frame point mapped to one camera's (axial, lateral) coordinates.
fn camera_axes(camera: CameraId, offset: [f64; 2]) -> (f64, f64) {
    let [x, y] = offset;
    match camera {
        CameraId::Front => (x, -y),
        CameraId::Rear => (-x, y),
        CameraId::Left => (y, x),
        CameraId::Right => (-y, -x),
    }
}

fn visible(camera: CameraId, offset: [f64; 2]) -> bool {
    let (a, l) = camera_axes(camera, offset);
    (VISIBLE_AXIAL.0..=VISIBLE_AXIAL.1).contains(&a) && l.abs() <= VISIBLE_HALF_WIDTH
}

/// Ground-truth classification of one emitted detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionTag {
    Clean,
    Misread,
    Ghost,
}

impl DetectionTag {
    pub fn is_anomaly(self) -> bool {
        matches!(self, DetectionTag::Misread | DetectionTag::Ghost)
    }
}

/// One line of the `.truth` sidecar: the generating pose plus per-detection
/// tags aligned with the log line's detections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub frame: u64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub tags: Vec<DetectionTag>,
    /// Labels of visible observations suppressed by dropout.
    pub dropped: Vec<String>,
}

pub fn write_truth<'a, W: Write>(
    mut writer: W,
    records: impl IntoIterator<Item = &'a TruthRecord>,
) -> Result<(), SimError> {
    for r in records {
        let mut line = serde_json::to_string(r).expect("truth serialization cannot fail");
        line.push('\n');
        writer.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn read_truth<R: BufRead>(reader: R) -> Result<Vec<TruthRecord>, SimError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| SimError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<Vec<TruthRecord>, SimError> {
    read_truth(std::io::BufReader::new(std::fs::File::open(path)?))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Independent RNG per frame, so frames could be generated in parallel
/// without changing the output.
fn frame_rng(seed: u64, frame: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ frame.wrapping_mul(0xA076_1D64_78BD_642F)))
}

/// Projects the marking of `spot` into `camera`, centered exactly on the
/// anchor's image point. Corners come from the projected lot-frame marking
/// rectangle and are then recentered so the corner mean coincides with the
/// anchor's image point: the box center is the measurement, and the
/// zero-noise loop must reproduce it exactly.
fn project_marking(
    rig: &CameraRig,
    camera: CameraId,
    spot_anchor: Point2Ground,
    offset: [f64; 2],
    heading: f64,
) -> Option<[Point2Image; 4]> {
    let h = rig.homography(camera);
    let center = h.project(Point2Ground::new(offset[0], offset[1])).ok()?;

    let (hw, hh) = (MARKING_SIZE.0 / 2.0, MARKING_SIZE.1 / 2.0);
    let lot_corners = [
        (spot_anchor.x - hw, spot_anchor.y - hh),
        (spot_anchor.x + hw, spot_anchor.y - hh),
        (spot_anchor.x + hw, spot_anchor.y + hh),
        (spot_anchor.x - hw, spot_anchor.y + hh),
    ];
    // ego = anchor_lot - R(heading) * offset, so corner offsets reuse the
    // same transform as the anchor itself.
    let ego = [
        spot_anchor.x - heading.cos() * offset[0] + heading.sin() * offset[1],
        spot_anchor.y - heading.sin() * offset[0] - heading.cos() * offset[1],
    ];
    let mut corners = [Point2Image::new(0.0, 0.0); 4];
    let (mut su, mut sv) = (0.0, 0.0);
    for (i, (cx, cy)) in lot_corners.iter().enumerate() {
        let corner_offset =
            anchor_offset_in_vehicle_frame(Point2Ground::new(*cx, *cy), ego, heading);
        let p = h
            .project(Point2Ground::new(corner_offset[0], corner_offset[1]))
            .ok()?;
        corners[i] = p;
        su += p.u;
        sv += p.v;
    }
    let (du, dv) = (center.u - su / 4.0, center.v - sv / 4.0);
    for c in &mut corners {
        c.u += du;
        c.v += dv;
    }
    Some(corners)
}

fn numeric_label(label: &str) -> Option<i64> {
    extract_number(label).ok().flatten()
}

/// In-map labels whose numeric distance from `n` lies in `range`.
fn labels_in_distance_band<'a>(
    map: &'a HdMap,
    n: i64,
    range: (i64, i64),
) -> Vec<&'a ParkingSpot> {
    map.spots()
        .iter()
        .filter(|s| {
            numeric_label(&s.label)
                .map(|m| {
                    let d = (m - n).abs();
                    range.0 <= d && d <= range.1
                })
                .unwrap_or(false)
        })
        .collect()
}

/// A misread target for `true_label`: a different in-map label past the
/// acceptance window. Falls back to any different label when the band is
/// empty, and to `None` for single-spot maps.
fn pick_misread_label(map: &HdMap, true_label: &str, rng: &mut ChaCha8Rng) -> Option<String> {
    if let Some(n) = numeric_label(true_label) {
        let band = labels_in_distance_band(map, n, MISREAD_LABEL_DISTANCE);
        if !band.is_empty() {
            return Some(band[rng.random_range(0..band.len())].label.clone());
        }
    }
    let others: Vec<&ParkingSpot> = map
        .spots()
        .iter()
        .filter(|s| s.label != true_label)
        .collect();
    if others.is_empty() {
        return None;
    }
    Some(others[rng.random_range(0..others.len())].label.clone())
}

/// Renders every visible (spot, camera) observation for one pose, applying
/// dropout, misreads, corner noise, and at most one ghost injection.
pub fn synthesize_frame(
    map: &HdMap,
    rig: &CameraRig,
    pose: &TrajectoryPoint,
    frame: u64,
    noise: &NoiseSpec,
) -> (FrameBundle, TruthRecord) {
    let mut rng = frame_rng(noise.seed, frame);
    let corner_noise = if noise.pixel_sigma > 0.0 {
        Some(Normal::new(0.0, noise.pixel_sigma).expect("sigma is non-negative"))
    } else {
        None
    };
    let ego = [pose.x, pose.y];

    let mut detections = Vec::new();
    let mut tags = Vec::new();
    let mut dropped = Vec::new();

    let emit = |rng: &mut ChaCha8Rng,
                    detections: &mut Vec<DetectionRecord>,
                    tags: &mut Vec<DetectionTag>,
                    camera: CameraId,
                    anchor: Point2Ground,
                    offset: [f64; 2],
                    content: String,
                    tag: DetectionTag| {
        let Some(mut corners) = project_marking(rig, camera, anchor, offset, pose.heading) else {
            return;
        };
        if let Some(dist) = corner_noise {
            for c in &mut corners {
                c.u += dist.sample(rng);
                c.v += dist.sample(rng);
            }
        }
        let Ok(bbox) = BoundingBox::new(corners) else {
            return;
        };
        let score = rng.random_range(0.6..1.0);
        detections.push(DetectionRecord {
            frame,
            timestamp: pose.t,
            camera_id: camera,
            bbox,
            text_class: TextClass::ParklotText,
            content,
            score,
        });
        tags.push(tag);
    };

    for camera in CameraId::ALL {
        for spot in map.spots() {
            let offset = anchor_offset_in_vehicle_frame(spot.anchor, ego, pose.heading);
            if !visible(camera, offset) {
                continue;
            }
            if noise.dropout_rate > 0.0 && rng.random::<f64>() < noise.dropout_rate {
                dropped.push(spot.label.clone());
                continue;
            }
            let misread = noise.misread_rate > 0.0
                && rng.random::<f64>() < noise.misread_rate;
            let (content, tag) = match misread
                .then(|| pick_misread_label(map, &spot.label, &mut rng))
                .flatten()
            {
                Some(label) => (label, DetectionTag::Misread),
                None => (spot.label.clone(), DetectionTag::Clean),
            };
            emit(
                &mut rng,
                &mut detections,
                &mut tags,
                camera,
                spot.anchor,
                offset,
                content,
                tag,
            );
        }
    }

    if noise.ghost_rate > 0.0 && rng.random::<f64>() < noise.ghost_rate {
        if let Some((label, camera, offset, lot_point)) = plan_ghost(map, ego, pose.heading, &mut rng)
        {
            emit(
                &mut rng,
                &mut detections,
                &mut tags,
                camera,
                lot_point,
                offset,
                label,
                DetectionTag::Ghost,
            );
        }
    }

    (
        FrameBundle {
            frame,
            timestamp: pose.t,
            heading: pose.heading,
            detections,
        },
        TruthRecord {
            frame,
            x: pose.x,
            y: pose.y,
            heading: pose.heading,
            tags,
            dropped,
        },
    )
}

/// Picks a far-away in-map label and a plausible image placement for a
/// ghost detection. Returns `None` when the lot is too small to contain a
/// label far enough from the vehicle's surroundings.
fn plan_ghost(
    map: &HdMap,
    ego: [f64; 2],
    heading: f64,
    rng: &mut ChaCha8Rng,
) -> Option<(String, CameraId, [f64; 2], Point2Ground)> {
    // Numeric label of the nearest spot stands in for "where we are".
    let nearest = map
        .spots()
        .iter()
        .min_by(|a, b| {
            let da = (a.anchor.x - ego[0]).powi(2) + (a.anchor.y - ego[1]).powi(2);
            let db = (b.anchor.x - ego[0]).powi(2) + (b.anchor.y - ego[1]).powi(2);
            da.partial_cmp(&db).unwrap()
        })?;
    let current = numeric_label(&nearest.label)?;
    let mut far = labels_in_distance_band(map, current, GHOST_LABEL_DISTANCE);
    if far.is_empty() {
        // Small lots: take anything at least the minimum distance away.
        far = labels_in_distance_band(map, current, (GHOST_LABEL_DISTANCE.0, i64::MAX));
    }
    if far.is_empty() {
        return None;
    }
    let label = far[rng.random_range(0..far.len())].label.clone();

    let camera = CameraId::ALL[rng.random_range(0..4)];
    let a = rng.random_range(1.0..5.5);
    let l = rng.random_range(-3.0..3.0);
    // Invert the camera-axes mapping to place the point in vehicle frame.
    let offset = match camera {
        CameraId::Front => [a, -l],
        CameraId::Rear => [-a, l],
        CameraId::Left => [l, a],
        CameraId::Right => [-l, -a],
    };
    let (s, c) = heading.sin_cos();
    let lot_point = Point2Ground::new(
        ego[0] + c * offset[0] - s * offset[1],
        ego[1] + s * offset[0] + c * offset[1],
    );
    Some((label, camera, offset, lot_point))
}

/// Renders the whole trajectory. Frame `k` is trajectory point `k`.
pub fn synthesize_log(
    map: &HdMap,
    rig: &CameraRig,
    trajectory: &Trajectory,
    noise: &NoiseSpec,
) -> (Vec<FrameBundle>, Vec<TruthRecord>) {
    trajectory
        .points
        .iter()
        .enumerate()
        .map(|(k, pose)| synthesize_frame(map, rig, pose, k as u64, noise))
        .unzip()
}

/// A fully specified reproducible run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub lot: LotSpec,
    pub noise: NoiseSpec,
    pub speed_mps: f64,
    pub pattern: DrivePattern,
}

impl Scenario {
    /// The reference noisy scenario used by the evaluation harness:
    /// a 300-spot single-row lot at 2 m/s with sigma 2 px corner noise,
    /// 10% misreads, 5% ghosts, and 10% dropout.
    pub fn standard(seed: u64) -> Self {
        Self {
            lot: LotSpec::default(),
            noise: NoiseSpec {
                pixel_sigma: 2.0,
                misread_rate: 0.10,
                dropout_rate: 0.10,
                ghost_rate: 0.05,
                seed,
            },
            speed_mps: 2.0,
            pattern: DrivePattern::StraightAisle,
        }
    }

    /// Two-row serpentine variant crossing between label ranges mid-run.
    pub fn serpentine(seed: u64) -> Self {
        Self {
            lot: LotSpec {
                rows: 2,
                spots_per_row: 50,
                ..LotSpec::default()
            },
            noise: NoiseSpec::clean(seed),
            speed_mps: 2.0,
            pattern: DrivePattern::Serpentine,
        }
    }
}

/// Everything a scenario run produces.
pub struct SimArtifacts {
    pub map: HdMap,
    pub rig: CameraRig,
    pub trajectory: Trajectory,
    pub frames: Vec<FrameBundle>,
    pub truth: Vec<TruthRecord>,
}

pub fn run_scenario(scenario: &Scenario) -> Result<SimArtifacts, SimError> {
    let map = generate_lot(&scenario.lot)?;
    let rig = default_rig();
    let trajectory = generate_trajectory(&scenario.lot, scenario.speed_mps, scenario.pattern)?;
    let (frames, truth) = synthesize_log(&map, &rig, &trajectory, &scenario.noise);
    Ok(SimArtifacts {
        map,
        rig,
        trajectory,
        frames,
        truth,
    })
}
