//! Run configuration and the camera-rig calibration file.
//!
//! The config file is a small TOML document; every key has a default and
//! can be overridden by CLI flags. The rig file maps each camera name to
//! the 9 row-major entries of its ground-to-image homography, where
//! "ground" is the vehicle-frame ground plane (+x forward, +y left).

use crate::detection::CameraId;
use crate::filter::{DEFAULT_CAPACITY, DEFAULT_RESET_AFTER_REJECTIONS};
use crate::geometry::{GeometryError, Homography};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config file")]
    Io(#[from] std::io::Error),
    #[error("malformed config file")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Error)]
pub enum RigError {
    #[error("failed to read rig file")]
    Io(#[from] std::io::Error),
    #[error("malformed rig file")]
    Parse(#[from] serde_json::Error),
    #[error("camera {camera}: {source}")]
    BadHomography {
        camera: &'static str,
        source: GeometryError,
    },
}

fn default_true() -> bool {
    true
}

/// Ablation toggles for the pipeline stages downstream of recognition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleFlags {
    /// Anomaly filtering of recognized numbers.
    #[serde(default = "default_true")]
    pub afm: bool,
    /// Per-anchor averaging of multi-camera relative estimates.
    #[serde(default = "default_true")]
    pub mcrp: bool,
    /// Per-frame averaging over all visible anchors.
    #[serde(default = "default_true")]
    pub mcap: bool,
}

impl ModuleFlags {
    pub fn all_on() -> Self {
        Self {
            afm: true,
            mcrp: true,
            mcap: true,
        }
    }

    pub fn all_off() -> Self {
        Self {
            afm: false,
            mcrp: false,
            mcap: false,
        }
    }

    /// All 8 flag combinations in stable (binary ascending) order.
    pub fn combinations() -> [ModuleFlags; 8] {
        let mut out = [ModuleFlags::all_off(); 8];
        for (i, flags) in out.iter_mut().enumerate() {
            flags.afm = i & 4 != 0;
            flags.mcrp = i & 2 != 0;
            flags.mcap = i & 1 != 0;
        }
        out
    }
}

impl Default for ModuleFlags {
    fn default() -> Self {
        Self::all_on()
    }
}

fn default_capacity() -> usize {
    DEFAULT_CAPACITY
}

fn default_reset_after() -> u32 {
    DEFAULT_RESET_AFTER_REJECTIONS
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    #[serde(default = "default_capacity")]
    pub capacity: usize,
    #[serde(default = "default_reset_after")]
    pub reset_after_rejections: u32,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            capacity: default_capacity(),
            reset_after_rejections: default_reset_after(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathsConfig {
    pub map: Option<PathBuf>,
    pub rig: Option<PathBuf>,
}

/// Everything a replay run needs besides the input stream.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub modules: ModuleFlags,
    #[serde(default)]
    pub paths: PathsConfig,
}

// serde(default) on the struct fields needs Default on ModuleFlags, which
// defaults to all-on: a plain `replay` without a config file runs the full
// system.

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.filter.capacity < 2 {
            return Err(ConfigError::Invalid("filter.capacity must be >= 2"));
        }
        if self.filter.reset_after_rejections < 1 {
            return Err(ConfigError::Invalid(
                "filter.reset_after_rejections must be >= 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RigFile {
    front: [f64; 9],
    rear: [f64; 9],
    left: [f64; 9],
    right: [f64; 9],
}

/// Per-camera homographies from the vehicle-frame ground plane to each
/// camera's image plane.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    homographies: [Homography; 4],
}

impl CameraRig {
    /// Homographies indexed per [`CameraId::index`].
    pub fn new(homographies: [Homography; 4]) -> Self {
        Self { homographies }
    }

    pub fn homography(&self, camera: CameraId) -> &Homography {
        &self.homographies[camera.index()]
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RigError> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    pub fn parse_str(text: &str) -> Result<Self, RigError> {
        let file: RigFile = serde_json::from_str(text)?;
        let build = |camera: &'static str, v: [f64; 9]| {
            Homography::from_row_major(v).map_err(|source| RigError::BadHomography { camera, source })
        };
        Ok(Self::new([
            build("front", file.front)?,
            build("rear", file.rear)?,
            build("left", file.left)?,
            build("right", file.right)?,
        ]))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RigError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json_string().as_bytes())?;
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        let file = RigFile {
            front: self.homography(CameraId::Front).to_row_major(),
            rear: self.homography(CameraId::Rear).to_row_major(),
            left: self.homography(CameraId::Left).to_row_major(),
            right: self.homography(CameraId::Right).to_row_major(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("rig serialization cannot fail");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_full_system() {
        let cfg = PipelineConfig::parse_str("").unwrap();
        assert_eq!(cfg.filter.capacity, 30);
        assert_eq!(cfg.filter.reset_after_rejections, 90);
        assert_eq!(cfg.modules, ModuleFlags::all_on());
        assert!(cfg.paths.map.is_none());
    }

    #[test]
    fn parses_partial_overrides() {
        let cfg = PipelineConfig::parse_str(
            "filter.capacity = 10\nmodules.mcap = false\npaths.map = \"lot.json\"\n",
        )
        .unwrap();
        assert_eq!(cfg.filter.capacity, 10);
        assert_eq!(cfg.filter.reset_after_rejections, 90);
        assert!(cfg.modules.afm);
        assert!(!cfg.modules.mcap);
        assert_eq!(cfg.paths.map.as_deref(), Some(Path::new("lot.json")));
    }

    #[test]
    fn rejects_tiny_capacity() {
        assert!(matches!(
            PipelineConfig::parse_str("filter.capacity = 1"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            PipelineConfig::parse_str("filter.reset_after_rejections = 0"),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn rejects_malformed_toml() {
        assert!(matches!(
            PipelineConfig::parse_str("filter.capacity = \"many\""),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn flag_combinations_are_exhaustive_and_stable() {
        let combos = ModuleFlags::combinations();
        assert_eq!(combos[0], ModuleFlags::all_off());
        assert_eq!(combos[7], ModuleFlags::all_on());
        let mut seen: Vec<_> = combos.to_vec();
        seen.dedup();
        assert_eq!(seen.len(), 8);
    }

    #[test]
    fn rig_round_trips() {
        let identity = Homography::identity();
        let rig = CameraRig::new([identity, identity, identity, identity]);
        let text = rig.to_json_string();
        let parsed = CameraRig::parse_str(&text).unwrap();
        assert_eq!(parsed, rig);
        assert_eq!(parsed.to_json_string(), text);
    }

    #[test]
    fn rig_requires_all_cameras() {
        assert!(matches!(
            CameraRig::parse_str(r#"{"front":[1,0,0,0,1,0,0,0,1]}"#),
            Err(RigError::Parse(_))
        ));
    }

    #[test]
    fn rig_rejects_singular_camera() {
        let text = r#"{
            "front": [1,0,0,0,1,0,0,0,1],
            "rear": [0,0,0,0,0,0,0,0,0],
            "left": [1,0,0,0,1,0,0,0,1],
            "right": [1,0,0,0,1,0,0,0,1]
        }"#;
        assert!(matches!(
            CameraRig::parse_str(text),
            Err(RigError::BadHomography { camera: "rear", .. })
        ));
    }
}
