//! Text-recognition output contract and the newline-delimited detection log.
//!
//! A recognizer (real or simulated) produces, per text instance, a location
//! (4-corner bounding box), a class, and a content string. One log line is
//! one [`FrameBundle`]: the frame index, timestamp, odometry heading, and
//! all detections of that frame.

use crate::geometry::Point2Image;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("failed to read detection log")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: timestamp decreases along the stream")]
    NonMonotoneTimestamp { line: usize },
}

/// Category assigned by the recognizer's classification head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TextClass {
    PillarText,
    ParklotText,
    OtherText,
}

impl TextClass {
    pub fn as_id(self) -> u8 {
        match self {
            TextClass::PillarText => 0,
            TextClass::ParklotText => 1,
            TextClass::OtherText => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(TextClass::PillarText),
            1 => Some(TextClass::ParklotText),
            2 => Some(TextClass::OtherText),
            _ => None,
        }
    }
}

/// One of the four surround cameras.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraId {
    Front,
    Rear,
    Left,
    Right,
}

impl CameraId {
    pub const ALL: [CameraId; 4] = [
        CameraId::Front,
        CameraId::Rear,
        CameraId::Left,
        CameraId::Right,
    ];

    pub fn index(self) -> usize {
        match self {
            CameraId::Front => 0,
            CameraId::Rear => 1,
            CameraId::Left => 2,
            CameraId::Right => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CameraId::Front => "front",
            CameraId::Rear => "rear",
            CameraId::Left => "left",
            CameraId::Right => "right",
        }
    }
}

/// Four image corners, clockwise from top-left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub corners: [Point2Image; 4],
}

fn cross(o: Point2Image, a: Point2Image, b: Point2Image) -> f64 {
    (a.u - o.u) * (b.v - o.v) - (a.v - o.v) * (b.u - o.u)
}

fn segments_cross(a: Point2Image, b: Point2Image, c: Point2Image, d: Point2Image) -> bool {
    let d1 = cross(a, b, c);
    let d2 = cross(a, b, d);
    let d3 = cross(c, d, a);
    let d4 = cross(c, d, b);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

impl BoundingBox {
    /// Validates finiteness, positive area, and that opposite edges do not
    /// cross (no bowtie orderings).
    pub fn new(corners: [Point2Image; 4]) -> Result<Self, &'static str> {
        if corners.iter().any(|c| !c.is_finite()) {
            return Err("non-finite corner");
        }
        let b = Self { corners };
        if b.area() <= 0.0 {
            return Err("zero or negative polygon area");
        }
        let [c0, c1, c2, c3] = corners;
        if segments_cross(c0, c1, c2, c3) || segments_cross(c1, c2, c3, c0) {
            return Err("self-intersecting polygon");
        }
        Ok(b)
    }

    /// Shoelace area of the corner polygon.
    pub fn area(&self) -> f64 {
        let c = &self.corners;
        let mut twice = 0.0;
        for i in 0..4 {
            let j = (i + 1) % 4;
            twice += c[i].u * c[j].v - c[j].u * c[i].v;
        }
        twice.abs() / 2.0
    }

    /// Arithmetic mean of the four corners; the point that gets projected
    /// to the ground plane.
    pub fn center(&self) -> Point2Image {
        let (su, sv) = self
            .corners
            .iter()
            .fold((0.0, 0.0), |(su, sv), c| (su + c.u, sv + c.v));
        Point2Image::new(su / 4.0, sv / 4.0)
    }

    pub fn to_flat(&self) -> [f64; 8] {
        let c = &self.corners;
        [
            c[0].u, c[0].v, c[1].u, c[1].v, c[2].u, c[2].v, c[3].u, c[3].v,
        ]
    }

    pub fn from_flat(v: [f64; 8]) -> Result<Self, &'static str> {
        Self::new([
            Point2Image::new(v[0], v[1]),
            Point2Image::new(v[2], v[3]),
            Point2Image::new(v[4], v[5]),
            Point2Image::new(v[6], v[7]),
        ])
    }
}

/// One recognized text instance.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub frame: u64,
    pub timestamp: f64,
    pub camera_id: CameraId,
    pub bbox: BoundingBox,
    pub text_class: TextClass,
    pub content: String,
    pub score: f64,
}

/// All detections of one frame plus the odometry heading.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBundle {
    pub frame: u64,
    pub timestamp: f64,
    /// Ego yaw in the lot frame, radians, supplied by odometry.
    pub heading: f64,
    pub detections: Vec<DetectionRecord>,
}

#[derive(Serialize, Deserialize)]
struct DetectionWire {
    cam: CameraId,
    #[serde(rename = "box")]
    bbox: [f64; 8],
    class: u8,
    text: String,
    score: f64,
}

#[derive(Serialize, Deserialize)]
struct BundleWire {
    frame: u64,
    t: f64,
    heading: f64,
    detections: Vec<DetectionWire>,
}

impl FrameBundle {
    fn from_wire(wire: BundleWire, line: usize) -> Result<Self, DetectionError> {
        let parse_err = |message: String| DetectionError::Parse { line, message };
        if !wire.t.is_finite() || !wire.heading.is_finite() {
            return Err(parse_err("non-finite timestamp or heading".into()));
        }
        let mut detections = Vec::with_capacity(wire.detections.len());
        for (i, d) in wire.detections.into_iter().enumerate() {
            let text_class = TextClass::from_id(d.class)
                .ok_or_else(|| parse_err(format!("detection {i}: unknown class {}", d.class)))?;
            let bbox = BoundingBox::from_flat(d.bbox)
                .map_err(|reason| parse_err(format!("detection {i}: {reason}")))?;
            if !(0.0..=1.0).contains(&d.score) {
                return Err(parse_err(format!(
                    "detection {i}: score {} outside [0, 1]",
                    d.score
                )));
            }
            if d.text.is_empty() {
                return Err(parse_err(format!("detection {i}: empty content")));
            }
            detections.push(DetectionRecord {
                frame: wire.frame,
                timestamp: wire.t,
                camera_id: d.cam,
                bbox,
                text_class,
                content: d.text,
                score: d.score,
            });
        }
        Ok(FrameBundle {
            frame: wire.frame,
            timestamp: wire.t,
            heading: wire.heading,
            detections,
        })
    }

    fn to_wire(&self) -> BundleWire {
        BundleWire {
            frame: self.frame,
            t: self.timestamp,
            heading: self.heading,
            detections: self
                .detections
                .iter()
                .map(|d| DetectionWire {
                    cam: d.camera_id,
                    bbox: d.bbox.to_flat(),
                    class: d.text_class.as_id(),
                    text: d.content.clone(),
                    score: d.score,
                })
                .collect(),
        }
    }

    /// Canonical one-line JSON encoding (without trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_wire()).expect("bundle serialization cannot fail")
    }
}

/// Streaming reader over a detection log. Yields bundles in file order and
/// verifies that timestamps never decrease.
pub struct LogReader<R: BufRead> {
    reader: R,
    line_no: usize,
    last_t: Option<f64>,
    buf: String,
}

impl<R: BufRead> LogReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            reader,
            line_no: 0,
            last_t: None,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for LogReader<R> {
    type Item = Result<FrameBundle, DetectionError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.is_empty() {
                continue;
            }
            let wire: BundleWire = match serde_json::from_str(line) {
                Ok(w) => w,
                Err(e) => {
                    return Some(Err(DetectionError::Parse {
                        line: self.line_no,
                        message: e.to_string(),
                    }))
                }
            };
            let bundle = match FrameBundle::from_wire(wire, self.line_no) {
                Ok(b) => b,
                Err(e) => return Some(Err(e)),
            };
            if let Some(last) = self.last_t {
                if bundle.timestamp < last {
                    return Some(Err(DetectionError::NonMonotoneTimestamp {
                        line: self.line_no,
                    }));
                }
            }
            self.last_t = Some(bundle.timestamp);
            return Some(Ok(bundle));
        }
    }
}

/// Opens a detection log for streaming reads.
pub fn read_log(
    path: impl AsRef<Path>,
) -> Result<LogReader<BufReader<std::fs::File>>, DetectionError> {
    Ok(LogReader::new(BufReader::new(std::fs::File::open(path)?)))
}

/// Writes bundles in the canonical one-line-per-frame encoding.
pub fn write_log<'a, W: Write>(
    mut writer: W,
    bundles: impl IntoIterator<Item = &'a FrameBundle>,
) -> Result<(), DetectionError> {
    for b in bundles {
        writer.write_all(b.to_json_line().as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn collect(log: &str) -> Result<Vec<FrameBundle>, DetectionError> {
        LogReader::new(Cursor::new(log)).collect()
    }

    const TWO_LINES: &str = concat!(
        r#"{"frame":0,"t":0.0,"heading":0.0,"detections":[{"cam":"front","box":[0.0,0.0,2.0,0.0,2.0,2.0,0.0,2.0],"class":1,"text":"098","score":0.9}]}"#,
        "\n",
        r#"{"frame":1,"t":0.033,"heading":0.0,"detections":[]}"#,
        "\n",
    );

    #[test]
    fn center_of_square() {
        let b = BoundingBox::from_flat([0.0, 0.0, 2.0, 0.0, 2.0, 2.0, 0.0, 2.0]).unwrap();
        assert_eq!(b.center(), Point2Image::new(1.0, 1.0));
    }

    #[test]
    fn center_of_rectangle() {
        let b =
            BoundingBox::from_flat([10.0, 10.0, 14.0, 10.0, 14.0, 12.0, 10.0, 12.0]).unwrap();
        assert_eq!(b.center(), Point2Image::new(12.0, 11.0));
    }

    #[test]
    fn degenerate_boxes_rejected() {
        // Zero area.
        assert!(BoundingBox::from_flat([0.0; 8]).is_err());
        // Bowtie ordering: opposite edges cross.
        assert!(
            BoundingBox::from_flat([0.0, 0.0, 2.0, 2.0, 2.0, 0.0, 0.0, 2.0]).is_err()
        );
        // Non-finite corner.
        assert!(
            BoundingBox::from_flat([f64::NAN, 0.0, 2.0, 0.0, 2.0, 2.0, 0.0, 2.0]).is_err()
        );
    }

    #[test]
    fn reads_two_bundles_in_order() {
        let bundles = collect(TWO_LINES).unwrap();
        assert_eq!(bundles.len(), 2);
        assert_eq!(bundles[0].frame, 0);
        assert_eq!(bundles[0].detections.len(), 1);
        assert_eq!(bundles[0].detections[0].content, "098");
        assert_eq!(bundles[0].detections[0].frame, 0);
        assert_eq!(bundles[1].frame, 1);
        assert!(bundles[1].detections.is_empty());
    }

    #[test]
    fn out_of_range_score_names_the_line() {
        let log = concat!(
            r#"{"frame":0,"t":0.0,"heading":0.0,"detections":[]}"#,
            "\n",
            r#"{"frame":1,"t":0.1,"heading":0.0,"detections":[{"cam":"rear","box":[0.0,0.0,2.0,0.0,2.0,2.0,0.0,2.0],"class":1,"text":"x","score":1.5}]}"#,
            "\n",
        );
        match collect(log).unwrap_err() {
            DetectionError::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("score"), "{message}");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn decreasing_timestamp_is_rejected() {
        let log = concat!(
            r#"{"frame":0,"t":1.0,"heading":0.0,"detections":[]}"#,
            "\n",
            r#"{"frame":1,"t":0.5,"heading":0.0,"detections":[]}"#,
            "\n",
        );
        assert!(matches!(
            collect(log).unwrap_err(),
            DetectionError::NonMonotoneTimestamp { line: 2 }
        ));
    }

    #[test]
    fn unknown_class_and_camera_are_rejected() {
        let bad_class = r#"{"frame":0,"t":0.0,"heading":0.0,"detections":[{"cam":"front","box":[0.0,0.0,2.0,0.0,2.0,2.0,0.0,2.0],"class":7,"text":"x","score":0.5}]}"#;
        assert!(collect(bad_class).is_err());
        let bad_cam = r#"{"frame":0,"t":0.0,"heading":0.0,"detections":[{"cam":"top","box":[0.0,0.0,2.0,0.0,2.0,2.0,0.0,2.0],"class":1,"text":"x","score":0.5}]}"#;
        assert!(collect(bad_cam).is_err());
    }

    #[test]
    fn write_after_read_is_byte_identical() {
        let bundles = collect(TWO_LINES).unwrap();
        let mut out = Vec::new();
        write_log(&mut out, &bundles).unwrap();
        assert_eq!(out, TWO_LINES.as_bytes());
    }

    proptest! {
        #[test]
        fn center_is_translation_equivariant(
            base in prop::array::uniform8(-100.0f64..100.0),
            dx in -50.0f64..50.0,
            dy in -50.0f64..50.0,
        ) {
            let Ok(b) = BoundingBox::from_flat(base) else {
                return Ok(());
            };
            let mut shifted = base;
            for i in 0..4 {
                shifted[2 * i] += dx;
                shifted[2 * i + 1] += dy;
            }
            let s = BoundingBox::from_flat(shifted).unwrap();
            let (c0, c1) = (b.center(), s.center());
            prop_assert!((c1.u - (c0.u + dx)).abs() < 1e-9);
            prop_assert!((c1.v - (c0.v + dy)).abs() < 1e-9);
        }

        #[test]
        fn log_line_round_trips(frame in 0u64..10_000, t in 0.0f64..1000.0, heading in -3.2f64..3.2) {
            let bundle = FrameBundle {
                frame,
                timestamp: t,
                heading,
                detections: vec![DetectionRecord {
                    frame,
                    timestamp: t,
                    camera_id: CameraId::Left,
                    bbox: BoundingBox::from_flat([0.0, 0.0, 2.0, 0.0, 2.0, 2.0, 0.0, 2.0]).unwrap(),
                    text_class: TextClass::ParklotText,
                    content: "042".into(),
                    score: 0.75,
                }],
            };
            let line = bundle.to_json_line();
            let parsed = collect(&format!("{line}\n")).unwrap();
            prop_assert_eq!(&parsed[0], &bundle);
            prop_assert_eq!(parsed[0].to_json_line(), line);
        }
    }
}
