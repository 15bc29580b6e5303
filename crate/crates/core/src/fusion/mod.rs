//! Ensemble fusion of detections from several models or test-time
//! augmentation passes.
//!
//! Detections of one image and category are linked when their IoU exceeds
//! `group_iou`; each connected group collapses to the member with the
//! largest `area * score`, which then takes the group's maximum (or mean)
//! score. A detection that ended up alone is down-weighted by
//! `singleton_factor`.

pub mod experimental;
mod group;

pub use group::{group_detections, DetectionGroup};

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coco::{DetectionRecord, Segmentation};
use crate::eval::IouDomain;
use crate::maskops::{check_shape, MaskError, RleMask};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("invalid fusion config: {0}")]
    InvalidConfig(String),
    #[error("detection {position} of source {source_id} has no bbox")]
    MissingBbox { source_id: u32, position: usize },
    #[error("detection {position} of source {source_id} has an empty mask")]
    EmptyMask { source_id: u32, position: usize },
    #[error("category {0} is not covered by the co-occurrence matrix")]
    UnknownCategory(u64),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreAggregation {
    #[default]
    Max,
    Mean,
}

/// Which area enters the `area * score` weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightArea {
    #[default]
    Mask,
    Bbox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub group_iou: f64,
    pub score_aggregation: ScoreAggregation,
    /// `None` picks 1.0 for a single source and 0.5 for several.
    pub singleton_factor: Option<f64>,
    pub iou_domain: IouDomain,
    pub weight_area: WeightArea,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            group_iou: 0.5,
            score_aggregation: ScoreAggregation::Max,
            singleton_factor: None,
            iou_domain: IouDomain::Bbox,
            weight_area: WeightArea::Mask,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        if !(self.group_iou > 0.0 && self.group_iou <= 1.0) {
            return Err(FusionError::InvalidConfig(format!(
                "group_iou {} not in (0, 1]",
                self.group_iou
            )));
        }
        if let Some(f) = self.singleton_factor {
            if !(0.0..=1.0).contains(&f) {
                return Err(FusionError::InvalidConfig(format!(
                    "singleton_factor {f} not in [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn effective_singleton_factor(&self, num_sources: usize) -> f64 {
        self.singleton_factor
            .unwrap_or(if num_sources > 1 { 0.5 } else { 1.0 })
    }
}

/// A detection tagged with the model / pass that produced it and its
/// position within that source's list.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcedDetection {
    pub source_id: u32,
    pub position: usize,
    pub detection: DetectionRecord,
}

impl SourcedDetection {
    pub fn flatten(det_sets: &[(u32, Vec<DetectionRecord>)]) -> Vec<SourcedDetection> {
        det_sets
            .iter()
            .flat_map(|(source_id, dets)| {
                dets.iter().enumerate().map(|(position, d)| SourcedDetection {
                    source_id: *source_id,
                    position,
                    detection: d.clone(),
                })
            })
            .collect()
    }
}

/// Rasterization frame per image: the shared RLE shape if any member is
/// RLE, otherwise the polygons' combined extent.
pub(crate) fn image_frames<'a>(
    dets: impl IntoIterator<Item = &'a DetectionRecord>,
) -> Result<BTreeMap<u64, (u32, u32)>, MaskError> {
    let mut rle_shapes: BTreeMap<u64, (u32, u32)> = BTreeMap::new();
    let mut poly_extent: BTreeMap<u64, (u32, u32)> = BTreeMap::new();
    for d in dets {
        match &d.segmentation {
            Segmentation::Polygons(_) => {
                let (h, w) = d.segmentation.natural_frame();
                let e = poly_extent.entry(d.image_id).or_insert((1, 1));
                *e = (e.0.max(h), e.1.max(w));
            }
            seg => {
                let shape = seg.natural_frame();
                match rle_shapes.get(&d.image_id) {
                    Some(&prev) => check_shape(prev, shape)?,
                    None => {
                        rle_shapes.insert(d.image_id, shape);
                    }
                }
            }
        }
    }
    for (img, ext) in poly_extent {
        rle_shapes.entry(img).or_insert(ext);
    }
    Ok(rle_shapes)
}

pub(crate) fn mask_on_frame(seg: &Segmentation, frame: (u32, u32)) -> Result<RleMask, MaskError> {
    seg.to_rle(frame.0, frame.1)
}

struct Weighted {
    weight: f64,
    score: f64,
    source_id: u32,
    position: usize,
    flat_index: usize,
}

/// Higher weight first, then higher score, lower source id, earlier
/// position.
fn survivor_order(a: &Weighted, b: &Weighted) -> Ordering {
    b.weight
        .total_cmp(&a.weight)
        .then(b.score.total_cmp(&a.score))
        .then(a.source_id.cmp(&b.source_id))
        .then(a.position.cmp(&b.position))
        .then(a.flat_index.cmp(&b.flat_index))
}

/// Canonical output order: image, category, score descending, bbox.
fn output_order(a: &DetectionRecord, b: &DetectionRecord) -> Ordering {
    let bbox = |d: &DetectionRecord| d.bbox.map(<[f64; 4]>::from).unwrap_or_default();
    a.image_id
        .cmp(&b.image_id)
        .then(a.category_id.cmp(&b.category_id))
        .then(b.score.total_cmp(&a.score))
        .then_with(|| {
            bbox(a)
                .iter()
                .zip(&bbox(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Fuses several result sets into one. One detection survives per group.
pub fn fuse(
    det_sets: &[(u32, Vec<DetectionRecord>)],
    cfg: &FusionConfig,
) -> Result<Vec<DetectionRecord>, FusionError> {
    cfg.validate()?;
    let num_sources = det_sets
        .iter()
        .map(|(s, _)| *s)
        .collect::<BTreeSet<_>>()
        .len();
    let factor = cfg.effective_singleton_factor(num_sources);
    let flat = SourcedDetection::flatten(det_sets);
    let groups = group_detections(&flat, cfg)?;
    let frames = image_frames(flat.iter().map(|s| &s.detection))?;

    let mut out = Vec::with_capacity(groups.len());
    for group in &groups {
        let mut members = Vec::with_capacity(group.members.len());
        for &i in &group.members {
            let s = &flat[i];
            let d = &s.detection;
            let bbox = d.bbox.ok_or(FusionError::MissingBbox {
                source_id: s.source_id,
                position: s.position,
            })?;
            let mask_area = mask_on_frame(&d.segmentation, frames[&d.image_id])?.area();
            if mask_area == 0 {
                return Err(FusionError::EmptyMask {
                    source_id: s.source_id,
                    position: s.position,
                });
            }
            let area = match cfg.weight_area {
                WeightArea::Mask => mask_area as f64,
                WeightArea::Bbox => bbox.area(),
            };
            members.push(Weighted {
                weight: area * d.score,
                score: d.score,
                source_id: s.source_id,
                position: s.position,
                flat_index: i,
            });
        }
        let survivor = members
            .iter()
            .min_by(|a, b| survivor_order(a, b))
            .expect("groups are non-empty");
        let score = if members.len() == 1 {
            survivor.score * factor
        } else {
            match cfg.score_aggregation {
                ScoreAggregation::Max => members.iter().map(|m| m.score).fold(f64::MIN, f64::max),
                ScoreAggregation::Mean => {
                    members.iter().map(|m| m.score).sum::<f64>() / members.len() as f64
                }
            }
        };
        let mut det = flat[survivor.flat_index].detection.clone();
        det.score = score;
        out.push(det);
    }
    out.sort_by(output_order);
    Ok(out)
}
