use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{EvalError, IouDomain, MatchConfig};
use crate::coco::{AnnotationRecord, DetectionRecord};
use crate::maskops::{bbox_iou, Bbox, RleMask};

/// Per-detection and per-ground-truth outcome of greedy matching, indexed
/// by input position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub det_is_tp: Vec<bool>,
    pub det_to_gt: Vec<Option<usize>>,
    pub gt_matched: Vec<bool>,
}

/// Geometry used for matching, rasterized on the image frame.
#[derive(Debug, Clone)]
pub(crate) struct Instance {
    pub rle: RleMask,
    pub bbox: Bbox,
}

#[derive(Debug, Clone)]
pub(crate) struct RankedDet {
    pub input_index: usize,
    pub image_id: u64,
    pub category_id: u64,
    pub score: f64,
    pub instance: Instance,
}

/// Rank order: score descending, then a content key so that the result
/// does not depend on where a tied detection sits in the input, then input
/// position (only reachable for exact duplicates).
pub(crate) fn rank_order(a: &RankedDet, b: &RankedDet) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.image_id.cmp(&b.image_id))
        .then(a.category_id.cmp(&b.category_id))
        .then_with(|| a.instance.rle.counts().cmp(b.instance.rle.counts()))
        .then_with(|| {
            let ka: [f64; 4] = a.instance.bbox.into();
            let kb: [f64; 4] = b.instance.bbox.into();
            ka.iter()
                .zip(&kb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then(a.input_index.cmp(&b.input_index))
}

pub(crate) fn iou(a: &Instance, b: &Instance, domain: IouDomain) -> Result<f64, EvalError> {
    match domain {
        IouDomain::Mask => a.rle.iou(&b.rle).map_err(EvalError::from),
        IouDomain::Bbox => Ok(bbox_iou(&a.bbox, &b.bbox)),
    }
}

/// Greedy assignment. `order` lists detection positions best first; each
/// takes the unmatched ground truth with the highest qualifying IoU (lowest
/// index on ties).
pub(crate) fn greedy_match(
    dets: &[&Instance],
    order: &[usize],
    gts: &[&Instance],
    cfg: &MatchConfig,
) -> Result<MatchOutcome, EvalError> {
    let mut out = MatchOutcome {
        det_is_tp: vec![false; dets.len()],
        det_to_gt: vec![None; dets.len()],
        gt_matched: vec![false; gts.len()],
    };
    for &d in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if out.gt_matched[g] {
                continue;
            }
            let v = iou(dets[d], gt, cfg.iou_domain)?;
            if cfg.comparator.accepts(v, cfg.iou_threshold) && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            out.gt_matched[g] = true;
            out.det_is_tp[d] = true;
            out.det_to_gt[d] = Some(g);
        }
    }
    Ok(out)
}

/// Matches the detections of one image and one category against its
/// ground truth, rasterizing on a `height x width` frame.
pub fn match_detections(
    gt: &[AnnotationRecord],
    dets: &[DetectionRecord],
    height: u32,
    width: u32,
    cfg: &MatchConfig,
) -> Result<MatchOutcome, EvalError> {
    cfg.validate()?;
    let gts = gt
        .iter()
        .map(|a| {
            Ok(Instance {
                rle: a.segmentation.to_rle(height, width)?,
                bbox: a.bbox,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let ranked = dets
        .iter()
        .enumerate()
        .map(|(i, d)| super::rank_detection(i, d, height, width))
        .collect::<Result<Vec<_>, _>>()?;
    let mut order: Vec<usize> = (0..ranked.len()).collect();
    order.sort_by(|&a, &b| rank_order(&ranked[a], &ranked[b]));
    let det_refs: Vec<&Instance> = ranked.iter().map(|r| &r.instance).collect();
    let gt_refs: Vec<&Instance> = gts.iter().collect();
    greedy_match(&det_refs, &order, &gt_refs, cfg)
}
