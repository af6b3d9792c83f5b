//! Run evaluation against ground truth, the metrics CSV format, and the
//! module ablation sweep.
//!
//! Position errors are computed only on frames that emitted a pose. Filter
//! precision/recall compare the pipeline's per-detection rejections with
//! the simulator's truth tags, counting only detections that actually
//! reached the filter (parking-number class, exact map match).

use crate::config::{ModuleFlags, PipelineConfig};
use crate::pipeline::{FrameOutcome, Pipeline, PipelineError};
use crate::sim::{self, Scenario, SimError, TruthRecord};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("outcome stream has {outcomes} frames but truth has {truth}")]
    LengthMismatch { outcomes: usize, truth: usize },
    #[error("frame index mismatch at position {index}: outcome {outcome_frame}, truth {truth_frame}")]
    FrameMismatch {
        index: usize,
        outcome_frame: u64,
        truth_frame: u64,
    },
    #[error("frame {frame}: detection index {det} has no truth tag")]
    TagMisalignment { frame: u64, det: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Aggregate quality of one replay run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub mean_abs_x: f64,
    pub median_abs_x: f64,
    pub p95_abs_x: f64,
    pub mean_abs_y: f64,
    pub median_abs_y: f64,
    pub p95_abs_y: f64,
    /// Mean Euclidean position error, meters.
    pub precision: f64,
    pub median_euclid: f64,
    pub p95_euclid: f64,
    pub filter_precision: f64,
    pub filter_recall: f64,
    /// Fraction of frames that emitted a pose.
    pub frames_with_pose: f64,
    pub latency_mean: f64,
    pub latency_max: f64,
}

/// Confusion counts of the anomaly filter against truth tags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterConfusion {
    /// Rejected detections whose tag was misread or ghost.
    pub true_pos: usize,
    /// Rejected detections that were actually clean.
    pub false_pos: usize,
    /// Anomalous detections the filter let through.
    pub false_neg: usize,
    /// The ghost-only split, for far-label injection analysis.
    pub ghost_true_pos: usize,
    pub ghost_false_neg: usize,
}

impl FilterConfusion {
    /// 1.0 when the filter made no positive calls.
    pub fn precision(&self) -> f64 {
        let called = self.true_pos + self.false_pos;
        if called == 0 {
            1.0
        } else {
            self.true_pos as f64 / called as f64
        }
    }

    /// 1.0 when no anomalies reached the filter.
    pub fn recall(&self) -> f64 {
        let actual = self.true_pos + self.false_neg;
        if actual == 0 {
            1.0
        } else {
            self.true_pos as f64 / actual as f64
        }
    }

    /// Recall restricted to ghost-tagged detections.
    pub fn ghost_recall(&self) -> f64 {
        let actual = self.ghost_true_pos + self.ghost_false_neg;
        if actual == 0 {
            1.0
        } else {
            self.ghost_true_pos as f64 / actual as f64
        }
    }
}

fn check_alignment(outcomes: &[FrameOutcome], truth: &[TruthRecord]) -> Result<(), EvalError> {
    if outcomes.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            outcomes: outcomes.len(),
            truth: truth.len(),
        });
    }
    for (index, (o, t)) in outcomes.iter().zip(truth).enumerate() {
        if o.frame != t.frame {
            return Err(EvalError::FrameMismatch {
                index,
                outcome_frame: o.frame,
                truth_frame: t.frame,
            });
        }
    }
    Ok(())
}

/// Compares per-detection filter decisions with truth tags.
pub fn filter_confusion(
    outcomes: &[FrameOutcome],
    truth: &[TruthRecord],
) -> Result<FilterConfusion, EvalError> {
    check_alignment(outcomes, truth)?;
    let mut c = FilterConfusion::default();
    for (o, t) in outcomes.iter().zip(truth) {
        let tag_of = |det: usize| {
            t.tags
                .get(det)
                .copied()
                .ok_or(EvalError::TagMisalignment { frame: o.frame, det })
        };
        for r in &o.rejected_by_filter {
            let tag = tag_of(r.det)?;
            if tag.is_anomaly() {
                c.true_pos += 1;
                if tag == sim::DetectionTag::Ghost {
                    c.ghost_true_pos += 1;
                }
            } else {
                c.false_pos += 1;
            }
        }
        // Anything the filter passed that later stages kept or dropped for
        // geometric reasons still counts as a miss if it was anomalous.
        for r in o.accepted.iter().chain(&o.rejected_by_projection) {
            let tag = tag_of(r.det)?;
            if tag.is_anomaly() {
                c.false_neg += 1;
                if tag == sim::DetectionTag::Ghost {
                    c.ghost_false_neg += 1;
                }
            }
        }
    }
    Ok(c)
}

/// Quantile by linear interpolation at rank `f * (n - 1)` over a sorted
/// slice; 0.0 for empty input.
fn quantile(sorted: &[f64], f: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = f * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] * (1.0 - (rank - lo as f64)) + sorted[hi] * (rank - lo as f64)
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Scores a time-aligned (outcomes, truth) pair.
pub fn evaluate(outcomes: &[FrameOutcome], truth: &[TruthRecord]) -> Result<RunMetrics, EvalError> {
    check_alignment(outcomes, truth)?;
    let confusion = filter_confusion(outcomes, truth)?;

    let mut ex = Vec::new();
    let mut ey = Vec::new();
    let mut ee = Vec::new();
    for (o, t) in outcomes.iter().zip(truth) {
        if let Some(pose) = &o.pose {
            let dx = (pose.x - t.x).abs();
            let dy = (pose.y - t.y).abs();
            ex.push(dx);
            ey.push(dy);
            ee.push((dx * dx + dy * dy).sqrt());
        }
    }
    let (mean_abs_x, mean_abs_y, precision) = (mean(&ex), mean(&ey), mean(&ee));
    ex.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ey.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ee.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let latencies: Vec<f64> = outcomes.iter().map(|o| o.latency).collect();
    Ok(RunMetrics {
        mean_abs_x,
        median_abs_x: quantile(&ex, 0.5),
        p95_abs_x: quantile(&ex, 0.95),
        mean_abs_y,
        median_abs_y: quantile(&ey, 0.5),
        p95_abs_y: quantile(&ey, 0.95),
        precision,
        median_euclid: quantile(&ee, 0.5),
        p95_euclid: quantile(&ee, 0.95),
        filter_precision: confusion.precision(),
        filter_recall: confusion.recall(),
        frames_with_pose: if outcomes.is_empty() {
            0.0
        } else {
            ee.len() as f64 / outcomes.len() as f64
        },
        latency_mean: mean(&latencies),
        latency_max: latencies.iter().fold(0.0, |a: f64, &b| a.max(b)),
    })
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsCsvRow {
    pub flags: ModuleFlags,
    pub mean_ex: f64,
    pub mean_ey: f64,
    pub med_e: f64,
    pub p95_e: f64,
    pub precision_m: f64,
    pub filt_prec: f64,
    pub filt_rec: f64,
    pub pose_ratio: f64,
    pub lat_mean_s: f64,
    pub lat_max_s: f64,
}

impl MetricsCsvRow {
    pub fn new(flags: ModuleFlags, m: &RunMetrics) -> Self {
        Self {
            flags,
            mean_ex: m.mean_abs_x,
            mean_ey: m.mean_abs_y,
            med_e: m.median_euclid,
            p95_e: m.p95_euclid,
            precision_m: m.precision,
            filt_prec: m.filter_precision,
            filt_rec: m.filter_recall,
            pose_ratio: m.frames_with_pose,
            lat_mean_s: m.latency_mean,
            lat_max_s: m.latency_max,
        }
    }
}

pub const METRICS_CSV_HEADER: &str =
    "afm,mcrp,mcap,mean_ex,mean_ey,med_e,p95_e,precision_m,filt_prec,filt_rec,pose_ratio,lat_mean_s,lat_max_s";

/// Renders rows in input order with dot-decimal, locale-independent
/// formatting.
pub fn metrics_csv(rows: &[MetricsCsvRow]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let flag = |b: bool| if b { "1" } else { "0" };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            flag(r.flags.afm),
            flag(r.flags.mcrp),
            flag(r.flags.mcap),
            r.mean_ex,
            r.mean_ey,
            r.med_e,
            r.p95_e,
            r.precision_m,
            r.filt_prec,
            r.filt_rec,
            r.pose_ratio,
            r.lat_mean_s,
            r.lat_max_s
        ));
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsCsvError {
    #[error("missing or wrong header line")]
    BadHeader,
    #[error("malformed metrics row at line {line}")]
    BadRow { line: usize },
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsCsvRow>, MetricsCsvError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(MetricsCsvError::BadHeader)?;
    if header.trim_end() != METRICS_CSV_HEADER {
        return Err(MetricsCsvError::BadHeader);
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || MetricsCsvError::BadRow { line: idx + 1 };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(bad());
        }
        let flag = |s: &str| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad()),
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        rows.push(MetricsCsvRow {
            flags: ModuleFlags {
                afm: flag(fields[0])?,
                mcrp: flag(fields[1])?,
                mcap: flag(fields[2])?,
            },
            mean_ex: num(fields[3])?,
            mean_ey: num(fields[4])?,
            med_e: num(fields[5])?,
            p95_e: num(fields[6])?,
            precision_m: num(fields[7])?,
            filt_prec: num(fields[8])?,
            filt_rec: num(fields[9])?,
            pose_ratio: num(fields[10])?,
            lat_mean_s: num(fields[11])?,
            lat_max_s: num(fields[12])?,
        });
    }
    Ok(rows)
}

/// One ablation configuration and its evaluated metrics.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub flags: ModuleFlags,
    pub metrics: RunMetrics,
}

/// Runs the scenario once and replays it under all 8 module-flag
/// combinations (recognition itself is always on: it produces the input).
pub fn ablation_sweep(scenario: &Scenario) -> Result<Vec<AblationRow>, EvalError> {
    let artifacts = sim::run_scenario(scenario)?;
    let mut rows = Vec::with_capacity(8);
    for flags in ModuleFlags::combinations() {
        let mut config = PipelineConfig::default();
        config.modules = flags;
        let mut pipeline = Pipeline::new(artifacts.map.clone(), &artifacts.rig, &config)?;
        let outcomes = pipeline.run(&artifacts.frames);
        let metrics = evaluate(&outcomes, &artifacts.truth)?;
        rows.push(AblationRow { flags, metrics });
    }
    Ok(rows)
}

/// CSV for a full sweep, rows in `ModuleFlags::combinations()` order.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let csv_rows: Vec<MetricsCsvRow> = rows
        .iter()
        .map(|r| MetricsCsvRow::new(r.flags, &r.metrics))
        .collect();
    metrics_csv(&csv_rows)
}
