//! Metric test bundles: translating rectangles and simple degenerate
//! "predictions" derived from a ground-truth bundle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::ingest::{BinaryMask, RgbImage, VideoMeta};
use crate::metrics::VideoBundle;

/// An axis-aligned rectangle moving `step_px` columns per frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectMotion {
    pub width: usize,
    pub height: usize,
    pub rect_w: usize,
    pub rect_h: usize,
    pub row0: usize,
    pub col0: usize,
    pub step_px: usize,
    pub frames: usize,
    pub fps: f64,
}

impl Default for RectMotion {
    fn default() -> Self {
        Self { width: 160, height: 90, rect_w: 24, rect_h: 16, row0: 30, col0: 8, step_px: 2, frames: 40, fps: 16.0 }
    }
}

pub fn rect_mask(width: usize, height: usize, row0: usize, col0: usize, rect_h: usize, rect_w: usize) -> BinaryMask {
    BinaryMask::from_fn(width, height, |r, c| r >= row0 && r < row0 + rect_h && c >= col0 && c < col0 + rect_w)
}

const RECT_BG: [u8; 3] = [200, 200, 200];
const RECT_FG: [u8; 3] = [30, 90, 160];

pub fn translating_rect_bundle(m: &RectMotion) -> Result<VideoBundle, SynthError> {
    if m.frames == 0 || m.rect_w == 0 || m.rect_h == 0 || m.row0 + m.rect_h > m.height || !(m.fps > 0.0) {
        return Err(SynthError::InvalidConfig("rectangle does not fit the frame".into()));
    }
    let mut masks = Vec::with_capacity(m.frames);
    let mut frames = Vec::with_capacity(m.frames);
    for k in 0..m.frames {
        let mask = rect_mask(m.width, m.height, m.row0, m.col0 + k * m.step_px, m.rect_h, m.rect_w);
        let mut img = RgbImage::filled(m.width, m.height, RECT_BG);
        for (r, c) in mask.set_pixels() {
            img.put(r, c, RECT_FG);
        }
        masks.push(mask);
        frames.push(img);
    }
    let meta = VideoMeta {
        width: m.width,
        height: m.height,
        fps: m.fps,
        frame_count: m.frames,
        depth_m: 1.0,
        trim_offset: 0,
        conditioning_frames: 0,
    };
    Ok(VideoBundle { meta, masks: BTreeMap::from([("rect".to_string(), masks)]), frames: Some(frames) })
}

/// Prediction that repeats frame `from - 1` (masks and pixels) from index
/// `from` on; a model that stops moving once it takes over.
pub fn frozen_prediction(gt: &VideoBundle, from: usize) -> VideoBundle {
    let hold = from.saturating_sub(1).min(gt.frame_count().saturating_sub(1));
    let freeze = |i: usize| if i >= from { hold } else { i };
    let n = gt.frame_count();
    VideoBundle {
        meta: gt.meta.clone(),
        masks: gt.masks.iter().map(|(id, seq)| (id.clone(), (0..n).map(|i| seq[freeze(i)].clone()).collect())).collect(),
        frames: gt.frames.as_ref().map(|f| (0..n).map(|i| f[freeze(i)].clone()).collect()),
    }
}

/// Every mask dilated by one pixel; frames unchanged.
pub fn dilated_prediction(gt: &VideoBundle) -> VideoBundle {
    VideoBundle {
        meta: gt.meta.clone(),
        masks: gt.masks.iter().map(|(id, seq)| (id.clone(), seq.iter().map(BinaryMask::dilated).collect())).collect(),
        frames: gt.frames.clone(),
    }
}
