//! Dataset checks and the bounding-box repair pass.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{AnnotationRecord, DatasetDoc, ImageRecord, Segmentation};
use crate::maskops::{bbox_from_mask, BinaryMask, Bbox, MaskError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    BboxMismatch,
    DegeneratePolygon,
    ZeroArea,
    OutOfBounds,
    DuplicateId,
    DanglingReference,
    Crowd,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub record_id: u64,
    pub rule: Rule,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
    pub repaired_count: usize,
    pub removed_count: usize,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn count(&self, rule: Rule) -> usize {
        self.errors.iter().filter(|f| f.rule == rule).count()
    }

    fn error(&mut self, record_id: u64, rule: Rule, message: String) {
        self.errors.push(Finding {
            record_id,
            rule,
            message,
        });
    }

    fn warn(&mut self, record_id: u64, rule: Rule, message: String) {
        self.warnings.push(Finding {
            record_id,
            rule,
            message,
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    /// Allowed deviation, in pixels, of each bbox side from the mask extent.
    pub bbox_tolerance: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            bbox_tolerance: 1.0,
        }
    }
}

pub fn validate(doc: &DatasetDoc) -> ValidationReport {
    validate_with(doc, &ValidateOptions::default())
}

pub fn validate_with(doc: &DatasetDoc, opts: &ValidateOptions) -> ValidationReport {
    let index = doc.index();
    let mut report = ValidationReport::default();
    let mut seen = HashSet::with_capacity(doc.annotations.len());
    for ann in &doc.annotations {
        if !seen.insert(ann.id) {
            report.error(ann.id, Rule::DuplicateId, format!("annotation id {} repeats", ann.id));
        }
        if ann.crowd {
            report.warn(ann.id, Rule::Crowd, "crowd flag is ignored by evaluation".into());
        }
        let Some(image) = index.images.get(&ann.image_id) else {
            report.error(
                ann.id,
                Rule::DanglingReference,
                format!("image {} not in dataset", ann.image_id),
            );
            continue;
        };
        if !index.categories.contains_key(&ann.category_id) {
            report.error(
                ann.id,
                Rule::DanglingReference,
                format!("category {} not in dataset", ann.category_id),
            );
        }
        if let Some(msg) = out_of_bounds(&ann.segmentation, image) {
            report.error(ann.id, Rule::OutOfBounds, msg);
        }
        let degenerate = degenerate_parts(&ann.segmentation);
        if !degenerate.is_empty() {
            report.error(
                ann.id,
                Rule::DegeneratePolygon,
                format!("polygons {degenerate:?} have fewer than 3 points"),
            );
        }
        let mask = match instance_mask(&ann.segmentation, image) {
            Ok(m) => m,
            // already reported by the bounds check
            Err(MaskError::ShapeMismatch { .. }) => continue,
            Err(e) => {
                report.error(ann.id, Rule::OutOfBounds, e.to_string());
                continue;
            }
        };
        match bbox_from_mask::<f64>(&mask) {
            Err(_) => report.error(ann.id, Rule::ZeroArea, "segmentation covers no pixels".into()),
            Ok(tight) => {
                let dev = tight.max_side_deviation(&ann.bbox);
                if dev.is_nan() || dev > opts.bbox_tolerance {
                    report.error(
                        ann.id,
                        Rule::BboxMismatch,
                        format!(
                            "bbox {:?} differs from mask extent {:?} by {dev} px",
                            <[f64; 4]>::from(ann.bbox),
                            <[f64; 4]>::from(tight)
                        ),
                    );
                }
            }
        }
    }
    report
}

pub fn fix_bboxes(doc: &DatasetDoc) -> (DatasetDoc, ValidationReport) {
    fix_bboxes_with(doc, &ValidateOptions::default())
}

/// Recomputes every bbox and area from the rasterized segmentation.
/// Degenerate polygons are dropped; annotations left with no pixels are
/// removed. The returned report's `errors` are what `validate` still finds
/// on the repaired document.
pub fn fix_bboxes_with(doc: &DatasetDoc, opts: &ValidateOptions) -> (DatasetDoc, ValidationReport) {
    let index = doc.index();
    let mut report = ValidationReport::default();
    let mut kept = Vec::with_capacity(doc.annotations.len());
    for ann in &doc.annotations {
        let Some(image) = index.images.get(&ann.image_id) else {
            kept.push(ann.clone());
            continue;
        };
        let mut fixed: AnnotationRecord = ann.clone();
        let mut changed = false;
        if let Segmentation::Polygons(polys) = &mut fixed.segmentation {
            let before = polys.len();
            polys.retain(|p| !p.is_degenerate());
            if polys.len() != before {
                changed = true;
                report.warn(
                    ann.id,
                    Rule::DegeneratePolygon,
                    format!("dropped {} degenerate polygon(s)", before - polys.len()),
                );
            }
        }
        let mask = instance_mask(&fixed.segmentation, image);
        let tight = mask.as_ref().ok().and_then(|m| bbox_from_mask::<f64>(m).ok());
        let (Ok(mask), Some(tight)) = (mask, tight) else {
            report.removed_count += 1;
            report.warn(ann.id, Rule::Removed, "segmentation has no pixels inside the image".into());
            continue;
        };
        let area = mask.area() as f64;
        if fixed.bbox != tight || fixed.area != area {
            changed = true;
        }
        fixed.bbox = tight;
        fixed.area = area;
        if changed {
            report.repaired_count += 1;
        }
        kept.push(fixed);
    }
    let repaired = DatasetDoc {
        annotations: kept,
        ..doc.clone()
    };
    report.errors = validate_with(&repaired, opts).errors;
    (repaired, report)
}

fn instance_mask(seg: &Segmentation, image: &ImageRecord) -> Result<BinaryMask, MaskError> {
    match seg {
        Segmentation::Polygons(polys) => {
            let usable: Vec<_> = polys.iter().filter(|p| !p.is_degenerate()).cloned().collect();
            crate::maskops::rasterize(&usable, image.height, image.width)
        }
        other => other.to_mask(image.height, image.width),
    }
}

fn degenerate_parts(seg: &Segmentation) -> Vec<usize> {
    seg.polygons()
        .map(|ps| {
            ps.iter()
                .enumerate()
                .filter(|(_, p)| p.is_degenerate())
                .map(|(i, _)| i)
                .collect()
        })
        .unwrap_or_default()
}

fn out_of_bounds(seg: &Segmentation, image: &ImageRecord) -> Option<String> {
    let frame = Bbox::new(0.0, 0.0, image.width as f64, image.height as f64);
    match seg {
        Segmentation::Polygons(polys) => {
            let (x0, y0, x1, y1) = polys.iter().filter_map(|p| p.extent()).reduce(|a, b| {
                (a.0.min(b.0), a.1.min(b.1), a.2.max(b.2), a.3.max(b.3))
            })?;
            (x0 < frame.x || y0 < frame.y || x1 > frame.right() || y1 > frame.bottom()).then(|| {
                format!(
                    "polygon extent ({x0}, {y0})-({x1}, {y1}) leaves the {}x{} image",
                    image.width, image.height
                )
            })
        }
        _ => {
            let rle = seg.rle()?;
            (rle.shape() != (image.height, image.width)).then(|| {
                format!(
                    "RLE size {}x{} differs from image {}x{}",
                    rle.height(),
                    rle.width(),
                    image.height,
                    image.width
                )
            })
        }
    }
}
