//! Foreground mIoU and background RMSE between ground-truth and predicted
//! videos, per-frame series and scenario summaries.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{self, BinaryMask, IngestError, MaskSequence, RgbImage, VideoMeta};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("object ids differ: gt {gt:?}, pred {pred:?}")]
    IdMismatch { gt: Vec<String>, pred: Vec<String> },
    #[error("object masks cover every pixel; no background left")]
    EmptyBackground,
    #[error("frame count mismatch: gt {expected}, pred {got}")]
    FrameCountMismatch { expected: usize, got: usize },
    #[error("nothing to summarize")]
    EmptyInput,
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Per-object masks of one frame, keyed by object id.
pub type FrameMasks = BTreeMap<String, BinaryMask>;

/// |A ∩ B| / |A ∪ B|, or `None` when both masks are empty.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<Option<f64>, MetricsError> {
    if !a.same_shape(b) {
        return Err(MetricsError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok((union > 0).then(|| inter as f64 / union as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameIou {
    /// Mean over objects with at least one non-empty mask.
    pub miou: Option<f64>,
    pub per_object: BTreeMap<String, Option<f64>>,
}

pub fn frame_miou(gt: &FrameMasks, pred: &FrameMasks) -> Result<FrameIou, MetricsError> {
    if !gt.keys().eq(pred.keys()) {
        return Err(MetricsError::IdMismatch { gt: gt.keys().cloned().collect(), pred: pred.keys().cloned().collect() });
    }
    let mut per_object = BTreeMap::new();
    let (mut sum, mut n) = (0.0, 0usize);
    for (id, g) in gt {
        let v = iou(g, &pred[id])?;
        if let Some(v) = v {
            sum += v;
            n += 1;
        }
        per_object.insert(id.clone(), v);
    }
    Ok(FrameIou { miou: (n > 0).then(|| sum / n as f64), per_object })
}

/// RMSE over all channels of pixels outside every ground-truth mask, with
/// 8-bit values scaled by 1/255.
pub fn background_rmse<'a>(
    gt: &RgbImage,
    pred: &RgbImage,
    gt_masks: impl IntoIterator<Item = &'a BinaryMask>,
) -> Result<f64, MetricsError> {
    if gt.width != pred.width || gt.height != pred.height {
        return Err(MetricsError::DimensionMismatch(format!(
            "frames {}x{} vs {}x{}",
            gt.width, gt.height, pred.width, pred.height
        )));
    }
    let mut foreground = vec![false; gt.width * gt.height];
    for m in gt_masks {
        if m.width() != gt.width || m.height() != gt.height {
            return Err(MetricsError::DimensionMismatch(format!(
                "mask {}x{} vs frame {}x{}",
                m.width(),
                m.height(),
                gt.width,
                gt.height
            )));
        }
        for (f, &b) in foreground.iter_mut().zip(m.bits()) {
            *f |= b;
        }
    }
    let (mut ss, mut n) = (0.0, 0usize);
    for (i, _) in foreground.iter().enumerate().filter(|(_, &f)| !f) {
        for c in 0..3 {
            let d = (gt.data[3 * i + c] as f64 - pred.data[3 * i + c] as f64) / 255.0;
            ss += d * d;
        }
        n += 3;
    }
    if n == 0 {
        return Err(MetricsError::EmptyBackground);
    }
    Ok((ss / n as f64).sqrt())
}

/// A video as seen by the metrics: per-object masks and optional RGB frames.
///
/// On disk: `meta.json`, `masks/<object>.json` and optionally
/// `frames/frame_%06d.ppm`.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoBundle {
    pub meta: VideoMeta,
    pub masks: BTreeMap<String, Vec<BinaryMask>>,
    pub frames: Option<Vec<RgbImage>>,
}

impl VideoBundle {
    pub fn frame_count(&self) -> usize {
        self.meta.frame_count
    }

    pub fn frame_masks(&self, index: usize) -> FrameMasks {
        self.masks.iter().map(|(id, seq)| (id.clone(), seq[index].clone())).collect()
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        self.meta.validate()?;
        let (w, h, n) = (self.meta.width, self.meta.height, self.meta.frame_count);
        for (id, seq) in &self.masks {
            if seq.len() != n {
                return Err(IngestError::FrameCountMismatch { expected: n, got: seq.len() }.into());
            }
            if seq.iter().any(|m| m.width() != w || m.height() != h) {
                return Err(MetricsError::DimensionMismatch(format!("masks of {id:?} are not {w}x{h}")));
            }
        }
        if let Some(frames) = &self.frames {
            if frames.len() != n {
                return Err(IngestError::FrameCountMismatch { expected: n, got: frames.len() }.into());
            }
            if frames.iter().any(|f| f.width != w || f.height != h) {
                return Err(MetricsError::DimensionMismatch(format!("frames are not {w}x{h}")));
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, MetricsError> {
        let meta = VideoMeta::load(&dir.join("meta.json"))?;
        let mask_dir = dir.join("masks");
        let entries = std::fs::read_dir(&mask_dir)
            .map_err(|source| IngestError::Io { path: mask_dir.display().to_string(), source })?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut masks = BTreeMap::new();
        for p in paths {
            let seq = MaskSequence::load(&p)?;
            masks.insert(seq.object_id.clone(), seq.decode_all()?);
        }
        let frame_dir = dir.join("frames");
        let frames = if frame_dir.is_dir() { Some(ingest::read_frame_dir(&frame_dir)?) } else { None };
        let b = Self { meta, masks, frames };
        b.validate()?;
        Ok(b)
    }

    pub fn save(&self, dir: &Path) -> Result<(), MetricsError> {
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| IngestError::Io { path, source }
        };
        let mask_dir = dir.join("masks");
        std::fs::create_dir_all(&mask_dir).map_err(io(&mask_dir))?;
        ingest::write_json(&dir.join("meta.json"), &self.meta)?;
        for (id, seq) in &self.masks {
            MaskSequence::from_masks(id.clone(), self.meta.fps, seq)?.save(&mask_dir.join(format!("{id}.json")))?;
        }
        if let Some(frames) = &self.frames {
            let frame_dir = dir.join("frames");
            std::fs::create_dir_all(&frame_dir).map_err(io(&frame_dir))?;
            for (i, f) in frames.iter().enumerate() {
                ingest::write_ppm(&frame_dir.join(ingest::frame_file_name(i)), f)?;
            }
        }
        Ok(())
    }
}

/// Per-frame metrics of one predicted video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    /// Source index of the first scored frame.
    pub first_frame: usize,
    pub per_frame_miou: Vec<Option<f64>>,
    /// `None` throughout when either bundle has no RGB frames.
    pub per_frame_bg_rmse: Vec<Option<f64>>,
    pub frame_count: usize,
}

fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl MetricSeries {
    pub fn mean_miou(&self) -> Option<f64> {
        mean_defined(&self.per_frame_miou)
    }

    pub fn mean_bg_rmse(&self) -> Option<f64> {
        mean_defined(&self.per_frame_bg_rmse)
    }
}

/// Scores `pred` against `gt` frame by frame, skipping the first `skip`
/// (conditioning) frames.
pub fn sequence_metrics(gt: &VideoBundle, pred: &VideoBundle, skip: usize) -> Result<MetricSeries, MetricsError> {
    let n = gt.frame_count();
    if pred.frame_count() != n {
        return Err(MetricsError::FrameCountMismatch { expected: n, got: pred.frame_count() });
    }
    let first = skip.min(n);
    let mut per_frame_miou = Vec::with_capacity(n - first);
    let mut per_frame_bg_rmse = Vec::with_capacity(n - first);
    for i in first..n {
        let g = gt.frame_masks(i);
        per_frame_miou.push(frame_miou(&g, &pred.frame_masks(i))?.miou);
        let rmse = match (&gt.frames, &pred.frames) {
            (Some(gf), Some(pf)) => Some(background_rmse(&gf[i], &pf[i], g.values())?),
            _ => None,
        };
        per_frame_bg_rmse.push(rmse);
    }
    Ok(MetricSeries { first_frame: first, frame_count: per_frame_miou.len(), per_frame_miou, per_frame_bg_rmse })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub frame_index: usize,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub scenario: String,
    pub n_videos: usize,
    pub mean_miou: Option<f64>,
    pub mean_bg_rmse: Option<f64>,
    pub miou_vs_frame: Vec<CurvePoint>,
    pub bg_rmse_vs_frame: Vec<CurvePoint>,
}

fn curve(series: &[MetricSeries], pick: impl Fn(&MetricSeries) -> &[Option<f64>]) -> Vec<CurvePoint> {
    let mut by_frame: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for s in series {
        for (k, v) in pick(s).iter().enumerate() {
            if let Some(v) = v {
                by_frame.entry(s.first_frame + k).or_default().push(*v);
            }
        }
    }
    by_frame
        .into_iter()
        .map(|(frame_index, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            CurvePoint { frame_index, mean, std, n: v.len() }
        })
        .collect()
}

/// Frames-then-videos averages plus frame-indexed curves.
pub fn summarize(series: &[MetricSeries], scenario: &str) -> Result<MetricSummary, MetricsError> {
    if series.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let miou: Vec<Option<f64>> = series.iter().map(MetricSeries::mean_miou).collect();
    let rmse: Vec<Option<f64>> = series.iter().map(MetricSeries::mean_bg_rmse).collect();
    Ok(MetricSummary {
        scenario: scenario.into(),
        n_videos: series.len(),
        mean_miou: mean_defined(&miou),
        mean_bg_rmse: mean_defined(&rmse),
        miou_vs_frame: curve(series, |s| &s.per_frame_miou),
        bg_rmse_vs_frame: curve(series, |s| &s.per_frame_bg_rmse),
    })
}
