//! Per-frame positioning state machine.
//!
//! For every detection of a frame: keep only parking-number text, match it
//! exactly against the lot map, test the extracted number against the
//! anomaly filter, project the box center to the vehicle-frame ground
//! plane, then fuse per-anchor and per-frame estimates into an ego pose.
//! Per-detection failures are counted per stage and are never fatal; a
//! live positioning loop must not halt on one bad record.

use crate::config::{CameraRig, ModuleFlags, PipelineConfig};
use crate::detection::{CameraId, FrameBundle, TextClass};
use crate::filter::{self, Decision, FilterState};
use crate::fusion::{self, EgoPose, RelativeEstimate};
use crate::geometry::Homography;
use crate::hdmap::HdMap;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Map(#[from] crate::hdmap::MapError),
    #[error(transparent)]
    Rig(#[from] crate::config::RigError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("config is missing paths.{0} and no override was given")]
    MissingPath(&'static str),
}

/// Points back at one detection of the processed frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRef {
    /// Index into `FrameBundle::detections`.
    pub det: usize,
    /// The recognized content (equals the map label once matched).
    pub label: String,
    pub camera: CameraId,
}

/// What one frame produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameOutcome {
    pub frame: u64,
    /// Present iff at least one detection survived every stage.
    pub pose: Option<EgoPose>,
    pub accepted: Vec<DetectionRef>,
    pub rejected_by_map: Vec<DetectionRef>,
    pub rejected_by_filter: Vec<DetectionRef>,
    pub rejected_by_projection: Vec<DetectionRef>,
    /// Detections discarded for not being parking-number text.
    pub skipped_class: usize,
    /// Wall-clock processing seconds. Run-local diagnostics: intentionally
    /// not serialized, so persisted outcomes stay reproducible.
    #[serde(skip)]
    pub latency: f64,
}

/// First line of an outcomes file: enough to interpret the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeHeader {
    pub modules: ModuleFlags,
    pub filter_capacity: usize,
    pub reset_after_rejections: u32,
}

#[derive(Debug, Error)]
pub enum OutcomeFileError {
    #[error("failed to read outcomes file")]
    Io(#[from] std::io::Error),
    #[error("outcomes line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("outcomes file is empty (missing header line)")]
    MissingHeader,
}

struct AnchorGroup {
    offsets: Vec<[f64; 2]>,
    camera: CameraId,
    best_score: f64,
    order: usize,
}

/// One positioning pipeline instance; owns the filter state for one
/// detection stream.
pub struct Pipeline {
    map: HdMap,
    ground_from_image: [Homography; 4],
    flags: ModuleFlags,
    filter: FilterState,
    consecutive_rejections: u32,
    reset_after: u32,
}

impl Pipeline {
    pub fn new(map: HdMap, rig: &CameraRig, config: &PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        // Pre-invert once; per-detection projection then needs no solve.
        let invert = |cam: CameraId| {
            rig.homography(cam)
                .invert()
                .map_err(|source| crate::config::RigError::BadHomography {
                    camera: match cam {
                        CameraId::Front => "front",
                        CameraId::Rear => "rear",
                        CameraId::Left => "left",
                        CameraId::Right => "right",
                    },
                    source,
                })
        };
        let ground_from_image = [
            invert(CameraId::Front)?,
            invert(CameraId::Rear)?,
            invert(CameraId::Left)?,
            invert(CameraId::Right)?,
        ];
        Ok(Self {
            map,
            ground_from_image,
            flags: config.modules,
            filter: FilterState::new(config.filter.capacity),
            consecutive_rejections: 0,
            reset_after: config.filter.reset_after_rejections,
        })
    }

    /// Loads map and rig from the config's paths.
    pub fn from_config(config: &PipelineConfig) -> Result<Self, PipelineError> {
        let map_path = config
            .paths
            .map
            .as_ref()
            .ok_or(PipelineError::MissingPath("map"))?;
        let rig_path = config
            .paths
            .rig
            .as_ref()
            .ok_or(PipelineError::MissingPath("rig"))?;
        let map = HdMap::load(map_path)?;
        let rig = CameraRig::load(rig_path)?;
        Self::new(map, &rig, config)
    }

    pub fn flags(&self) -> ModuleFlags {
        self.flags
    }

    pub fn map(&self) -> &HdMap {
        &self.map
    }

    pub fn header(&self) -> OutcomeHeader {
        OutcomeHeader {
            modules: self.flags,
            filter_capacity: self.filter.capacity(),
            reset_after_rejections: self.reset_after,
        }
    }

    /// Runs one frame through every stage and updates the filter state.
    pub fn process_frame(&mut self, bundle: &FrameBundle) -> FrameOutcome {
        let start = Instant::now();
        let mut outcome = FrameOutcome {
            frame: bundle.frame,
            pose: None,
            accepted: Vec::new(),
            rejected_by_map: Vec::new(),
            rejected_by_filter: Vec::new(),
            rejected_by_projection: Vec::new(),
            skipped_class: 0,
            latency: 0.0,
        };

        // Anchors keyed by label; BTreeMap keeps fusion order deterministic.
        let mut anchors: BTreeMap<String, AnchorGroup> = BTreeMap::new();

        for (det, record) in bundle.detections.iter().enumerate() {
            if record.text_class != TextClass::ParklotText {
                outcome.skipped_class += 1;
                continue;
            }
            let reference = |content: &str| DetectionRef {
                det,
                label: content.to_string(),
                camera: record.camera_id,
            };

            // Exact map match comes before the numeric filter so labels that
            // do not exist in the lot never enter the queue.
            if self.map.match_exact(&record.content).is_none() {
                outcome.rejected_by_map.push(reference(&record.content));
                continue;
            }

            if self.flags.afm {
                match filter::extract_number(&record.content) {
                    Ok(Some(number)) => {
                        if self.offer_to_filter(number) == Decision::Rejected {
                            outcome.rejected_by_filter.push(reference(&record.content));
                            continue;
                        }
                    }
                    // A matched label with no digits cannot be judged
                    // numerically; let it through untested.
                    Ok(None) => {}
                    Err(_) => {
                        outcome.rejected_by_filter.push(reference(&record.content));
                        continue;
                    }
                }
            }

            let center = record.bbox.center();
            let ground = &self.ground_from_image[record.camera_id.index()];
            let offset = match ground.project(crate::geometry::Point2Ground::new(center.u, center.v))
            {
                Ok(p) => [p.u, p.v],
                Err(_) => {
                    outcome.rejected_by_projection.push(reference(&record.content));
                    continue;
                }
            };

            outcome.accepted.push(reference(&record.content));
            let order = outcome.accepted.len();
            anchors
                .entry(record.content.clone())
                .and_modify(|g| {
                    g.offsets.push(offset);
                    if record.score > g.best_score {
                        g.best_score = record.score;
                    }
                })
                .or_insert_with(|| AnchorGroup {
                    offsets: vec![offset],
                    camera: record.camera_id,
                    best_score: record.score,
                    order,
                });
        }

        if !anchors.is_empty() {
            let mut per_anchor: Vec<(String, [f64; 2], f64, usize)> = Vec::new();
            for (label, group) in &anchors {
                let offset = if self.flags.mcrp {
                    fusion::fuse_relative(&group.offsets).expect("group is non-empty")
                } else {
                    group.offsets[0]
                };
                let spot = self.map.match_exact(label).expect("label came from the map");
                let rel = RelativeEstimate {
                    camera_id: group.camera,
                    offset,
                    spot_label: label.clone(),
                };
                let ego = fusion::ego_from_anchor(spot, &rel, bundle.heading);
                per_anchor.push((label.clone(), ego, group.best_score, group.order));
            }

            let (position, n_anchors) = if self.flags.mcap {
                let labeled: Vec<(String, [f64; 2])> = per_anchor
                    .iter()
                    .map(|(l, p, _, _)| (l.clone(), *p))
                    .collect();
                fusion::fuse_frame(&labeled).expect("anchors are non-empty")
            } else {
                // Single best-score anchor; ties resolve to the earliest
                // accepted detection.
                let best = per_anchor
                    .iter()
                    .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(b.3.cmp(&a.3)))
                    .expect("anchors are non-empty");
                (best.1, 1)
            };
            outcome.pose = Some(EgoPose {
                x: position[0],
                y: position[1],
                heading: bundle.heading,
                timestamp: bundle.timestamp,
                n_anchors,
            });
        }

        outcome.latency = start.elapsed().as_secs_f64();
        outcome
    }

    /// Stateful fold of `process_frame` over an in-memory stream.
    pub fn run<'a>(&mut self, frames: impl IntoIterator<Item = &'a FrameBundle>) -> Vec<FrameOutcome> {
        frames.into_iter().map(|b| self.process_frame(b)).collect()
    }

    fn offer_to_filter(&mut self, number: i64) -> Decision {
        let decision = self.filter.filter_step(number);
        match decision {
            Decision::Accepted => self.consecutive_rejections = 0,
            Decision::Rejected => {
                self.consecutive_rejections += 1;
                // A long uninterrupted rejection streak means the window no
                // longer reflects the surroundings (e.g. after a swerve into
                // another aisle): drop it and re-learn.
                if self.consecutive_rejections >= self.reset_after {
                    self.filter.reset();
                    self.consecutive_rejections = 0;
                }
            }
        }
        decision
    }
}

/// Writes a header line followed by one outcome per line.
pub fn write_outcomes<W: Write>(
    mut writer: W,
    header: &OutcomeHeader,
    outcomes: &[FrameOutcome],
) -> Result<(), OutcomeFileError> {
    let mut line = serde_json::to_string(header).expect("header serialization cannot fail");
    line.push('\n');
    writer.write_all(line.as_bytes())?;
    for o in outcomes {
        let mut line = serde_json::to_string(o).expect("outcome serialization cannot fail");
        line.push('\n');
        writer.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Reads an outcomes file produced by [`write_outcomes`]. Latencies are not
/// persisted and read back as zero.
pub fn read_outcomes<R: BufRead>(
    reader: R,
) -> Result<(OutcomeHeader, Vec<FrameOutcome>), OutcomeFileError> {
    let mut header: Option<OutcomeHeader> = None;
    let mut outcomes = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(|e| OutcomeFileError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?);
        } else {
            outcomes.push(serde_json::from_str(&line).map_err(|e| {
                OutcomeFileError::Parse {
                    line: idx + 1,
                    message: e.to_string(),
                }
            })?);
        }
    }
    Ok((header.ok_or(OutcomeFileError::MissingHeader)?, outcomes))
}
