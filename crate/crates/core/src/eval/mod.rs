//! Instance-segmentation scoring: per-category AP and AR at a single IoU
//! threshold, pooled across images, averaged into mAP and mAR.

mod curve;
mod matching;

pub use curve::{average_precision, PRCurve};
pub use matching::{match_detections, MatchOutcome};

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coco::{DatasetDoc, DetectionRecord};
use crate::maskops::{Bbox, MaskError};
use matching::{greedy_match, rank_order, Instance, RankedDet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("invalid match config: {0}")]
    InvalidConfig(String),
    #[error("no ground truth instances; AP is undefined")]
    EmptyGt,
    #[error("detection {index} references unknown image {image_id}")]
    UnknownImage { index: usize, image_id: u64 },
    #[error("detection {index} references unknown category {category_id}")]
    UnknownCategory { index: usize, category_id: u64 },
    #[error("annotation {annotation_id} references unknown image {image_id}")]
    DanglingAnnotation { annotation_id: u64, image_id: u64 },
    #[error(transparent)]
    Mask(#[from] MaskError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Comparator {
    #[default]
    StrictGreater,
    GreaterOrEqual,
}

impl Comparator {
    pub fn accepts(self, iou: f64, threshold: f64) -> bool {
        match self {
            Comparator::StrictGreater => iou > threshold,
            Comparator::GreaterOrEqual => iou >= threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Interpolation {
    #[default]
    #[serde(rename = "101-point")]
    Point101,
    #[serde(rename = "all-point")]
    AllPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum IouDomain {
    #[default]
    Mask,
    Bbox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub iou_threshold: f64,
    pub comparator: Comparator,
    pub max_dets_per_image: usize,
    pub interpolation: Interpolation,
    pub iou_domain: IouDomain,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            comparator: Comparator::StrictGreater,
            max_dets_per_image: 100,
            interpolation: Interpolation::Point101,
            iou_domain: IouDomain::Mask,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(EvalError::InvalidConfig(format!(
                "iou_threshold {} not in (0, 1]",
                self.iou_threshold
            )));
        }
        if self.max_dets_per_image == 0 {
            return Err(EvalError::InvalidConfig("max_dets_per_image must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryEval {
    /// `None` when the category has no ground truth.
    #[serde(rename = "AP")]
    pub ap: Option<f64>,
    #[serde(rename = "AR")]
    pub ar: Option<f64>,
    pub num_gt: usize,
    pub num_det: usize,
    #[serde(rename = "TP")]
    pub tp: usize,
    #[serde(rename = "FP")]
    pub fp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(rename = "mAP")]
    pub map: f64,
    #[serde(rename = "mAR")]
    pub mar: f64,
    pub per_category: BTreeMap<u64, CategoryEval>,
    pub config: MatchConfig,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub(crate) fn rank_detection(
    index: usize,
    det: &DetectionRecord,
    height: u32,
    width: u32,
) -> Result<RankedDet, EvalError> {
    let rle = det.segmentation.to_rle(height, width)?;
    let bbox = det
        .bbox
        .or_else(|| rle.bbox())
        .unwrap_or(Bbox::new(0.0, 0.0, 0.0, 0.0));
    Ok(RankedDet {
        input_index: index,
        image_id: det.image_id,
        category_id: det.category_id,
        score: det.score,
        instance: Instance { rle, bbox },
    })
}

/// Everything `evaluate` and `pr_curves` derive from one matching pass.
struct Matched {
    /// Kept detections per category, in global rank order, with TP flags.
    ranked: BTreeMap<u64, Vec<bool>>,
    num_gt: BTreeMap<u64, usize>,
    matched_gt: BTreeMap<u64, usize>,
}

fn run(gt: &DatasetDoc, dets: &[DetectionRecord], cfg: &MatchConfig) -> Result<Matched, EvalError> {
    cfg.validate()?;
    let index = gt.index();

    let mut ranked = Vec::with_capacity(dets.len());
    for (i, d) in dets.iter().enumerate() {
        let image = index.images.get(&d.image_id).ok_or(EvalError::UnknownImage {
            index: i,
            image_id: d.image_id,
        })?;
        if !index.categories.contains_key(&d.category_id) {
            return Err(EvalError::UnknownCategory {
                index: i,
                category_id: d.category_id,
            });
        }
        ranked.push(rank_detection(i, d, image.height, image.width)?);
    }

    // per-image cap on the best-ranked detections
    let mut per_image: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, r) in ranked.iter().enumerate() {
        per_image.entry(r.image_id).or_default().push(i);
    }
    let mut cell_dets: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
    for mut idxs in per_image.into_values() {
        idxs.sort_by(|&a, &b| rank_order(&ranked[a], &ranked[b]));
        idxs.truncate(cfg.max_dets_per_image);
        for i in idxs {
            let r = &ranked[i];
            cell_dets.entry((r.image_id, r.category_id)).or_default().push(i);
        }
    }

    let mut num_gt: BTreeMap<u64, usize> = gt.categories.iter().map(|c| (c.id, 0)).collect();
    let mut cell_gts: BTreeMap<(u64, u64), Vec<Instance>> = BTreeMap::new();
    for ann in &gt.annotations {
        let image = index.images.get(&ann.image_id).ok_or(EvalError::DanglingAnnotation {
            annotation_id: ann.id,
            image_id: ann.image_id,
        })?;
        *num_gt.entry(ann.category_id).or_default() += 1;
        cell_gts
            .entry((ann.image_id, ann.category_id))
            .or_default()
            .push(Instance {
                rle: ann.segmentation.to_rle(image.height, image.width)?,
                bbox: ann.bbox,
            });
    }

    let mut is_tp = vec![false; ranked.len()];
    let mut matched_gt: BTreeMap<u64, usize> = num_gt.keys().map(|&k| (k, 0)).collect();
    for (&(image, category), idxs) in &cell_dets {
        let gts: Vec<&Instance> = cell_gts
            .get(&(image, category))
            .map(|v| v.iter().collect())
            .unwrap_or_default();
        let dets: Vec<&Instance> = idxs.iter().map(|&i| &ranked[i].instance).collect();
        // idxs is already in rank order
        let order: Vec<usize> = (0..idxs.len()).collect();
        let out = greedy_match(&dets, &order, &gts, cfg)?;
        for (k, &i) in idxs.iter().enumerate() {
            is_tp[i] = out.det_is_tp[k];
        }
        *matched_gt.entry(category).or_default() += out.gt_matched.iter().filter(|&&m| m).count();
    }

    let mut by_category: BTreeMap<u64, Vec<usize>> = num_gt.keys().map(|&k| (k, vec![])).collect();
    for idxs in cell_dets.values() {
        for &i in idxs {
            by_category.entry(ranked[i].category_id).or_default().push(i);
        }
    }
    let ranked_flags = by_category
        .into_iter()
        .map(|(cat, mut idxs)| {
            idxs.sort_by(|&a, &b| rank_order(&ranked[a], &ranked[b]));
            (cat, idxs.into_iter().map(|i| is_tp[i]).collect())
        })
        .collect();
    Ok(Matched {
        ranked: ranked_flags,
        num_gt,
        matched_gt,
    })
}

/// Scores `dets` against `gt`. Categories without ground truth are reported
/// but left out of both means.
pub fn evaluate(
    gt: &DatasetDoc,
    dets: &[DetectionRecord],
    cfg: &MatchConfig,
) -> Result<EvalReport, EvalError> {
    let matched = run(gt, dets, cfg)?;
    let mut per_category = BTreeMap::new();
    let (mut ap_sum, mut ar_sum, mut n) = (0.0, 0.0, 0usize);
    for (&cat, flags) in &matched.ranked {
        let num_gt = matched.num_gt[&cat];
        let tp = flags.iter().filter(|&&t| t).count();
        let (ap, ar) = if num_gt == 0 {
            (None, None)
        } else {
            let curve = PRCurve::<f64>::from_outcomes(flags.iter().copied(), num_gt);
            let ap = average_precision(&curve, cfg.interpolation)?;
            let ar = matched.matched_gt[&cat] as f64 / num_gt as f64;
            ap_sum += ap;
            ar_sum += ar;
            n += 1;
            (Some(ap), Some(ar))
        };
        per_category.insert(
            cat,
            CategoryEval {
                ap,
                ar,
                num_gt,
                num_det: flags.len(),
                tp,
                fp: flags.len() - tp,
            },
        );
    }
    let (map, mar) = if n == 0 {
        (0.0, 0.0)
    } else {
        (ap_sum / n as f64, ar_sum / n as f64)
    };
    Ok(EvalReport {
        map,
        mar,
        per_category,
        config: *cfg,
    })
}

/// The curves behind [`evaluate`], for categories with ground truth.
pub fn pr_curves(
    gt: &DatasetDoc,
    dets: &[DetectionRecord],
    cfg: &MatchConfig,
) -> Result<BTreeMap<u64, PRCurve>, EvalError> {
    let matched = run(gt, dets, cfg)?;
    Ok(matched
        .ranked
        .into_iter()
        .filter_map(|(cat, flags)| {
            let num_gt = matched.num_gt[&cat];
            (num_gt > 0).then(|| (cat, PRCurve::from_outcomes(flags, num_gt)))
        })
        .collect())
}
