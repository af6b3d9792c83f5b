//! Real-time vehicle positioning for parking lots, driven by recognized
//! parking-number markings.
//!
//! The positioning loop works on a stream of per-frame text detections:
//!
//! 1. **detection** — detection records, bounding-box utilities, and the
//!    newline-delimited detection-log format.
//! 2. **hdmap** — the semantic lot map keyed by exact parking-number label.
//! 3. **filter** — streaming anomaly rejection over a bounded FIFO of recent
//!    parking numbers (box-plot / IQR acceptance window).
//! 4. **geometry** — planar homography estimation (normalized DLT), inversion,
//!    and bidirectional ground/image projection.
//! 5. **fusion** — anchor-relative ego positioning and multi-camera /
//!    multi-anchor averaging.
//! 6. **pipeline** — the per-frame state machine composing the stages above.
//! 7. **sim** — synthetic lot, trajectory, and detection-stream generation
//!    with seeded noise and anomaly injection.
//! 8. **metrics** — run evaluation against ground truth and the module
//!    ablation sweep.

pub mod config;
pub mod detection;
pub mod filter;
pub mod fusion;
pub mod geometry;
pub mod hdmap;
pub mod metrics;
pub mod pipeline;
pub mod sim;

pub use config::{CameraRig, ModuleFlags, PipelineConfig};
pub use detection::{BoundingBox, CameraId, DetectionRecord, FrameBundle, TextClass};
pub use filter::{BoxplotBounds, Decision, FilterState};
pub use fusion::EgoPose;
pub use geometry::{Correspondence, Homography, Point2Ground, Point2Image};
pub use hdmap::{HdMap, ParkingSpot};
pub use metrics::RunMetrics;
pub use pipeline::{FrameOutcome, Pipeline};
