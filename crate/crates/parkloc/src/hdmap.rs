//! Semantic lot map: absolute coordinates of every parking-number marking,
//! looked up by exact label.
//!
//! Matching is byte-for-byte on the label text. No normalization of any
//! kind is applied (no case folding, no `O`/`0` repair): recognition
//! fuzziness is the anomaly filter's problem, never the map's.

use crate::geometry::Point2Ground;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("failed to read map file")]
    Io(#[from] std::io::Error),
    #[error("malformed map file")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate parking-number label {0:?}")]
    DuplicateLabel(String),
    #[error("map contains no spots")]
    EmptyMap,
    #[error("spot {label:?} is invalid: {reason}")]
    InvalidSpot { label: String, reason: &'static str },
}

/// One parking spot: its painted label and the lot-frame position of the
/// marking's center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParkingSpot {
    pub label: String,
    #[serde(flatten)]
    pub anchor: Point2Ground,
    pub floor: i32,
}

#[derive(Debug, Serialize, Deserialize)]
struct MapFile {
    lot_id: String,
    spots: Vec<ParkingSpot>,
}

/// Immutable lot map with exact label lookup.
#[derive(Debug, Clone)]
pub struct HdMap {
    lot_id: String,
    spots: Vec<ParkingSpot>,
    index: HashMap<String, usize>,
}

impl HdMap {
    /// Validates and indexes a spot list. Duplicate labels, empty labels,
    /// non-finite anchors, and empty maps are rejected.
    pub fn new(lot_id: impl Into<String>, spots: Vec<ParkingSpot>) -> Result<Self, MapError> {
        if spots.is_empty() {
            return Err(MapError::EmptyMap);
        }
        let mut index = HashMap::with_capacity(spots.len());
        for (i, spot) in spots.iter().enumerate() {
            if spot.label.is_empty() {
                return Err(MapError::InvalidSpot {
                    label: spot.label.clone(),
                    reason: "empty label",
                });
            }
            if !spot.anchor.is_finite() {
                return Err(MapError::InvalidSpot {
                    label: spot.label.clone(),
                    reason: "non-finite anchor",
                });
            }
            if index.insert(spot.label.clone(), i).is_some() {
                return Err(MapError::DuplicateLabel(spot.label.clone()));
            }
        }
        Ok(Self {
            lot_id: lot_id.into(),
            spots,
            index,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MapError> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    pub fn parse_str(text: &str) -> Result<Self, MapError> {
        let file: MapFile = serde_json::from_str(text)?;
        Self::new(file.lot_id, file.spots)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MapError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json_string().as_bytes())?;
        Ok(())
    }

    /// Serializes in stable spot order; `parse_str(to_json_string())` is the
    /// identity and repeated saves are byte-identical.
    pub fn to_json_string(&self) -> String {
        let file = MapFile {
            lot_id: self.lot_id.clone(),
            spots: self.spots.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("map serialization cannot fail");
        s.push('\n');
        s
    }

    /// The spot whose label equals `text` byte-for-byte, if any. Absence is
    /// a normal outcome (the recognized text is not a parking number of
    /// this lot), not an error.
    pub fn match_exact(&self, text: &str) -> Option<&ParkingSpot> {
        self.index.get(text).map(|&i| &self.spots[i])
    }

    pub fn lot_id(&self) -> &str {
        &self.lot_id
    }

    pub fn len(&self) -> usize {
        self.spots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spots.is_empty()
    }

    /// Spots in stable (file) order.
    pub fn spots(&self) -> &[ParkingSpot] {
        &self.spots
    }
}

impl PartialEq for HdMap {
    fn eq(&self, other: &Self) -> bool {
        self.lot_id == other.lot_id && self.spots == other.spots
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spot(label: &str, x: f64, y: f64) -> ParkingSpot {
        ParkingSpot {
            label: label.to_string(),
            anchor: Point2Ground::new(x, y),
            floor: 0,
        }
    }

    const THREE_SPOTS: &str = r#"{
        "lot_id": "b2",
        "spots": [
            {"label": "097", "x": 0.0, "y": 0.0, "floor": -2},
            {"label": "098", "x": 2.5, "y": 0.0, "floor": -2},
            {"label": "099", "x": 5.0, "y": 0.0, "floor": -2}
        ]
    }"#;

    #[test]
    fn loads_three_spots() {
        let map = HdMap::parse_str(THREE_SPOTS).unwrap();
        assert_eq!(map.len(), 3);
        assert_eq!(map.lot_id(), "b2");
        assert_eq!(map.match_exact("098").unwrap().anchor.x, 2.5);
    }

    #[test]
    fn duplicate_label_is_rejected() {
        let err = HdMap::new(
            "lot",
            vec![spot("098", 0.0, 0.0), spot("098", 1.0, 0.0)],
        )
        .unwrap_err();
        assert!(matches!(err, MapError::DuplicateLabel(l) if l == "098"));
    }

    #[test]
    fn empty_map_is_rejected() {
        assert!(matches!(HdMap::new("lot", vec![]), Err(MapError::EmptyMap)));
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(
            HdMap::parse_str("{\"lot_id\": 3}"),
            Err(MapError::Parse(_))
        ));
    }

    #[test]
    fn non_finite_anchor_is_rejected() {
        let err = HdMap::new("lot", vec![spot("001", f64::NAN, 0.0)]).unwrap_err();
        assert!(matches!(err, MapError::InvalidSpot { .. }));
    }

    #[test]
    fn matching_is_exact() {
        let map = HdMap::parse_str(THREE_SPOTS).unwrap();
        assert!(map.match_exact("098").is_some());
        assert!(map.match_exact("O98").is_none());
        assert!(map.match_exact("98").is_none());
        assert!(map.match_exact(" 098").is_none());
    }

    #[test]
    fn every_label_matches_itself() {
        let map = HdMap::parse_str(THREE_SPOTS).unwrap();
        for s in map.spots() {
            assert_eq!(map.match_exact(&s.label).unwrap(), s);
        }
    }

    #[test]
    fn save_load_round_trip_is_byte_identical() {
        let spots: Vec<ParkingSpot> = (1..=100)
            .map(|i| spot(&format!("{i:03}"), i as f64 * 2.5, 0.0))
            .collect();
        let map = HdMap::new("generated", spots).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lot.json");
        map.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let reloaded = HdMap::load(&path).unwrap();
        assert_eq!(reloaded, map);
        reloaded.save(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
    }
}
