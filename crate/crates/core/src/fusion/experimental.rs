//! Post-processing filters that were tried as fusion add-ons. Neither is
//! part of the default pipeline.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::{image_frames, mask_on_frame, FusionError};
use crate::coco::DetectionRecord;
use crate::maskops::{rle_decode, BinaryMask};
use crate::stats::CoOccurrenceMatrix;

fn score_then_index(dets: &[DetectionRecord], a: usize, b: usize) -> Ordering {
    dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b))
}

/// Drops every detection whose mask lies inside another mask of the same
/// image and category. Of two identical masks the higher-scored one stays
/// (the earlier one on a tie). Survivors keep their input order.
pub fn containment_merge(dets: &[DetectionRecord]) -> Result<Vec<DetectionRecord>, FusionError> {
    let frames = image_frames(dets)?;
    let masks: Vec<BinaryMask> = dets
        .iter()
        .map(|d| Ok(rle_decode(&mask_on_frame(&d.segmentation, frames[&d.image_id])?)))
        .collect::<Result<_, FusionError>>()?;

    let mut cells: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        cells.entry((d.image_id, d.category_id)).or_default().push(i);
    }
    let mut keep = vec![true; dets.len()];
    for idxs in cells.values() {
        for &i in idxs {
            keep[i] = !idxs.iter().any(|&j| {
                j != i
                    && masks[i].is_subset_of(&masks[j]) == Ok(true)
                    && (masks[i] != masks[j] || score_then_index(dets, j, i).is_lt())
            });
        }
    }
    Ok(dets
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(d, _)| d.clone())
        .collect())
}

/// Per image, walks detections from highest score down. The first is always
/// kept; a later one is kept when its category equals, or co-occurs at least
/// `min_count` times with, the category of some detection already kept.
/// Survivors keep their input order.
pub fn cooccurrence_filter(
    dets: &[DetectionRecord],
    matrix: &CoOccurrenceMatrix,
    min_count: u64,
) -> Result<Vec<DetectionRecord>, FusionError> {
    for d in dets {
        if matrix.position(d.category_id).is_none() {
            return Err(FusionError::UnknownCategory(d.category_id));
        }
    }
    let mut by_image: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        by_image.entry(d.image_id).or_default().push(i);
    }
    let mut keep = vec![false; dets.len()];
    for mut idxs in by_image.into_values() {
        idxs.sort_by(|&a, &b| score_then_index(dets, a, b));
        let mut kept_categories: Vec<u64> = Vec::new();
        for i in idxs {
            let c = dets[i].category_id;
            let compatible = kept_categories.is_empty()
                || kept_categories
                    .iter()
                    .any(|&k| k == c || matrix.get(c, k).unwrap_or(0) >= min_count);
            if compatible {
                keep[i] = true;
                if !kept_categories.contains(&c) {
                    kept_categories.push(c);
                }
            }
        }
    }
    Ok(dets
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(d, _)| d.clone())
        .collect())
}
