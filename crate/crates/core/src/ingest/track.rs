use std::path::Path;

use nalgebra::{Point2, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{centroid_rle, decode_rle, BinaryMask, IngestError};
use crate::camera::{lift_planar, CameraExtrinsics, CameraIntrinsics, MotionPlane};

fn default_conditioning() -> usize {
    9
}

/// Per-video metadata (`meta.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub frame_count: usize,
    /// Camera-frame depth of the motion plane (m).
    pub depth_m: f64,
    /// First retained source frame index.
    #[serde(default)]
    pub trim_offset: usize,
    /// Leading frames handed to a video model as conditioning.
    #[serde(default = "default_conditioning")]
    pub conditioning_frames: usize,
}

impl VideoMeta {
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: &str| Err(IngestError::InvalidMeta(m.into()));
        if self.width == 0 || self.height == 0 || self.frame_count == 0 {
            return bad("width, height and frame_count must be ≥ 1");
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad("fps must be positive");
        }
        if !(self.depth_m.is_finite() && self.depth_m > 0.0) {
            return bad("depth_m must be positive");
        }
        Ok(())
    }

    /// Timestamp of retained frame `index`, computed per index.
    pub fn time_of(&self, index: usize) -> f64 {
        index as f64 / self.fps
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let m: Self = super::read_json(path)?;
        m.validate()?;
        Ok(m)
    }
}

/// One object's per-frame masks; also the on-disk mask file layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSequence {
    pub object_id: String,
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub frames: Vec<Vec<u64>>,
}

impl MaskSequence {
    pub fn from_masks(object_id: impl Into<String>, fps: f64, masks: &[BinaryMask]) -> Result<Self, IngestError> {
        let (width, height) = masks.first().map(|m| (m.width(), m.height())).unwrap_or((0, 0));
        if masks.iter().any(|m| m.width() != width || m.height() != height) {
            return Err(IngestError::DimensionMismatch("masks differ in size".into()));
        }
        Ok(Self {
            object_id: object_id.into(),
            width,
            height,
            fps,
            frames: masks.iter().map(super::encode_rle).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn decode_frame(&self, index: usize) -> Result<BinaryMask, IngestError> {
        decode_rle(&self.frames[index], self.width, self.height)
    }

    pub fn decode_all(&self) -> Result<Vec<BinaryMask>, IngestError> {
        (0..self.frames.len()).map(|i| self.decode_frame(i)).collect()
    }

    /// Checks every frame decodes to width × height pixels.
    pub fn validate(&self) -> Result<(), IngestError> {
        let expected = (self.width as u64) * (self.height as u64);
        for runs in &self.frames {
            let got: u64 = runs.iter().sum();
            if got != expected {
                return Err(IngestError::LengthMismatch { expected, got });
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let s: Self = super::read_json(path)?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        super::write_json(path, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSample {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub valid: bool,
}

/// Time-stamped pixel track of one object. Invalid samples mark frames where
/// the object mask was empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Track2D {
    pub object_id: String,
    pub samples: Vec<TrackSample>,
}

#[derive(Serialize, Deserialize)]
struct TrackFile {
    object_id: String,
    samples: Vec<[f64; 3]>,
}

impl Track2D {
    pub fn valid(&self) -> impl Iterator<Item = &TrackSample> {
        self.samples.iter().filter(|s| s.valid)
    }

    pub fn valid_count(&self) -> usize {
        self.valid().count()
    }

    /// Reads the `{object_id, samples: [[t,u,v],...]}` track format.
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let f: TrackFile = super::read_json(path)?;
        if f.samples.windows(2).any(|w| !(w[1][0] > w[0][0])) {
            return Err(IngestError::Format { what: "track", reason: "times must be strictly increasing".into() });
        }
        Ok(Self {
            object_id: f.object_id,
            samples: f.samples.into_iter().map(|[t, u, v]| TrackSample { t, u, v, valid: true }).collect(),
        })
    }

    /// Writes valid samples in the track file format.
    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        let f = TrackFile {
            object_id: self.object_id.clone(),
            samples: self.valid().map(|s| [s.t, s.u, s.v]).collect(),
        };
        super::write_json(path, &f)
    }
}

/// Mask centroids per frame; empty masks become invalid samples.
pub fn track_from_masks(seq: &MaskSequence, meta: &VideoMeta) -> Result<Track2D, IngestError> {
    meta.validate()?;
    if seq.len() != meta.frame_count {
        return Err(IngestError::FrameCountMismatch { expected: meta.frame_count, got: seq.len() });
    }
    if seq.width != meta.width || seq.height != meta.height {
        return Err(IngestError::DimensionMismatch(format!(
            "masks are {}×{}, video is {}×{}",
            seq.width, seq.height, meta.width, meta.height
        )));
    }
    let mut samples = Vec::with_capacity(seq.len());
    for i in 0..seq.len() {
        let t = meta.time_of(i);
        samples.push(match centroid_rle(&seq.frames[i], seq.width, seq.height) {
            Ok(c) => TrackSample { t, u: c.x, v: c.y, valid: true },
            Err(IngestError::EmptyMask) => TrackSample { t, u: f64::NAN, v: f64::NAN, valid: false },
            Err(e) => return Err(e),
        });
    }
    Ok(Track2D { object_id: seq.object_id.clone(), samples })
}

/// Metric track on the motion plane. Only valid samples are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track3D {
    pub object_id: String,
    pub plane: MotionPlane,
    /// `[t, x, y, z]` rows in the lifting frame.
    pub samples: Vec<[f64; 4]>,
}

impl Track3D {
    pub fn point(&self, i: usize) -> Point3<f64> {
        let s = self.samples[i];
        Point3::new(s[1], s[2], s[3])
    }

    /// Coordinate along `axis` versus time.
    pub fn series(&self, axis: &Vector3<f64>) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .map(|s| (s[0], axis.dot(&Vector3::new(s[1], s[2], s[3]))))
            .collect()
    }

    pub fn vertical(&self) -> Vec<(f64, f64)> {
        self.series(&self.plane.up)
    }

    pub fn horizontal(&self) -> Vec<(f64, f64)> {
        self.series(&self.plane.horizontal)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        super::read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        super::write_json(path, self)
    }
}

/// Lift every valid pixel sample onto the motion plane at `depth`.
pub fn lift_track(
    track: &Track2D,
    depth: f64,
    intr: &CameraIntrinsics,
    extr: Option<&CameraExtrinsics>,
    plane: MotionPlane,
) -> Track3D {
    let samples = track
        .valid()
        .map(|s| {
            let p = lift_planar(&Point2::new(s.u, s.v), depth, intr, extr);
            [s.t, p.x, p.y, p.z]
        })
        .collect();
    Track3D { object_id: track.object_id.clone(), plane, samples }
}
