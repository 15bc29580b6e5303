use std::collections::BTreeMap;

use super::{image_frames, mask_on_frame, FusionConfig, FusionError, SourcedDetection};
use crate::eval::IouDomain;
use crate::maskops::{bbox_iou, RleMask};

/// Indices into the grouped slice, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionGroup {
    pub members: Vec<usize>,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// The smaller root wins, so a group's root is its first member.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Single-link groups over detections of the same image and category whose
/// IoU exceeds `cfg.group_iou`. Groups are ordered by their first member.
pub fn group_detections(
    dets: &[SourcedDetection],
    cfg: &FusionConfig,
) -> Result<Vec<DetectionGroup>, FusionError> {
    cfg.validate()?;
    let mut boxes = Vec::with_capacity(dets.len());
    for s in dets {
        boxes.push(s.detection.bbox.ok_or(FusionError::MissingBbox {
            source_id: s.source_id,
            position: s.position,
        })?);
    }
    let masks: Vec<RleMask> = match cfg.iou_domain {
        IouDomain::Bbox => Vec::new(),
        IouDomain::Mask => {
            let frames = image_frames(dets.iter().map(|s| &s.detection))?;
            dets.iter()
                .map(|s| mask_on_frame(&s.detection.segmentation, frames[&s.detection.image_id]))
                .collect::<Result<_, _>>()?
        }
    };

    let mut cells: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
    for (i, s) in dets.iter().enumerate() {
        cells
            .entry((s.detection.image_id, s.detection.category_id))
            .or_default()
            .push(i);
    }

    let mut sets = DisjointSet::new(dets.len());
    for idxs in cells.values() {
        for (k, &i) in idxs.iter().enumerate() {
            for &j in &idxs[k + 1..] {
                let v = match cfg.iou_domain {
                    IouDomain::Bbox => bbox_iou(&boxes[i], &boxes[j]),
                    IouDomain::Mask => masks[i].iou(&masks[j])?,
                };
                if v > cfg.group_iou {
                    sets.union(i, j);
                }
            }
        }
    }

    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..dets.len() {
        by_root.entry(sets.find(i)).or_default().push(i);
    }
    Ok(by_root
        .into_values()
        .map(|members| DetectionGroup { members })
        .collect())
}
