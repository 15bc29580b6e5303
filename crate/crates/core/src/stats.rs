//! Dataset statistics: class counts, class selection, co-occurrence and
//! simple histograms over polygon complexity and image size.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::coco::{DatasetDoc, Segmentation};

pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_MAX_POINTS: u64 = 1500;

/// Symmetric category co-occurrence counts with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoOccurrenceMatrix {
    pub category_ids: Vec<u64>,
    pub counts: Vec<Vec<u64>>,
}

impl CoOccurrenceMatrix {
    pub fn len(&self) -> usize {
        self.category_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.category_ids.is_empty()
    }

    pub fn position(&self, category_id: u64) -> Option<usize> {
        self.category_ids.binary_search(&category_id).ok()
    }

    /// Count for a pair of category ids, `None` if either is unknown.
    pub fn get(&self, a: u64, b: u64) -> Option<u64> {
        Some(self.counts[self.position(a)?][self.position(b)?])
    }

    pub fn is_symmetric_with_zero_diagonal(&self) -> bool {
        let n = self.len();
        self.counts.len() == n
            && self.counts.iter().all(|row| row.len() == n)
            && (0..n).all(|i| self.counts[i][i] == 0)
            && (0..n).all(|i| (0..i).all(|j| self.counts[i][j] == self.counts[j][i]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` strictly increasing edges; bins are half-open.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins over `[min, max + 1)` of integer observations. Uses
    /// one bin per value when the range is narrower than `bins`.
    pub fn of_integers(values: &[u64], bins: usize) -> Self {
        let (Some(&lo), Some(&max)) = (values.iter().min(), values.iter().max()) else {
            return Self {
                bin_edges: vec![],
                counts: vec![],
            };
        };
        let span = max - lo + 1;
        let nb = (bins.max(1) as u64).min(span);
        let mut counts = vec![0u64; nb as usize];
        for &v in values {
            let idx = ((v - lo) as u128 * nb as u128 / span as u128) as usize;
            counts[idx] += 1;
        }
        let bin_edges = (0..=nb)
            .map(|i| lo as f64 + (span as f64 * i as f64) / nb as f64)
            .collect();
        Self { bin_edges, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointHistogram {
    pub histogram: Histogram,
    /// Polygons with more than `max_points` vertices.
    pub excluded: u64,
    /// Annotations stored as RLE, which have no vertices.
    pub rle_skipped: u64,
}

/// Annotations per category, including categories with none.
pub fn class_counts(doc: &DatasetDoc) -> BTreeMap<u64, u64> {
    let mut counts: BTreeMap<u64, u64> = doc.categories.iter().map(|c| (c.id, 0)).collect();
    for a in &doc.annotations {
        *counts.entry(a.category_id).or_default() += 1;
    }
    counts
}

/// Categories with at least `min_annotations` annotations, most frequent
/// first, ties by ascending id.
pub fn select_classes(doc: &DatasetDoc, min_annotations: u64) -> Vec<u64> {
    let mut selected: Vec<(u64, u64)> = class_counts(doc)
        .into_iter()
        .filter(|&(_, n)| n >= min_annotations)
        .collect();
    selected.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    selected.into_iter().map(|(id, _)| id).collect()
}

/// Each image adds one to every unordered pair of distinct categories
/// present in it.
pub fn cooccurrence(doc: &DatasetDoc) -> CoOccurrenceMatrix {
    let mut category_ids: Vec<u64> = doc.categories.iter().map(|c| c.id).collect();
    category_ids.sort_unstable();
    category_ids.dedup();
    let n = category_ids.len();
    let mut counts = vec![vec![0u64; n]; n];

    let mut present: BTreeMap<u64, BTreeSet<usize>> = BTreeMap::new();
    for a in &doc.annotations {
        if let Ok(pos) = category_ids.binary_search(&a.category_id) {
            present.entry(a.image_id).or_default().insert(pos);
        }
    }
    for cats in present.values() {
        let cats: Vec<usize> = cats.iter().copied().collect();
        for (k, &i) in cats.iter().enumerate() {
            for &j in &cats[k + 1..] {
                counts[i][j] += 1;
                counts[j][i] += 1;
            }
        }
    }
    CoOccurrenceMatrix {
        category_ids,
        counts,
    }
}

/// Principal submatrix over categories with some off-diagonal count
/// strictly above `min_count`.
pub fn filter_cooccurrence(m: &CoOccurrenceMatrix, min_count: u64) -> CoOccurrenceMatrix {
    let keep: Vec<usize> = (0..m.len())
        .filter(|&i| (0..m.len()).any(|j| j != i && m.counts[i][j] > min_count))
        .collect();
    CoOccurrenceMatrix {
        category_ids: keep.iter().map(|&i| m.category_ids[i]).collect(),
        counts: keep
            .iter()
            .map(|&i| keep.iter().map(|&j| m.counts[i][j]).collect())
            .collect(),
    }
}

pub fn polygon_point_histogram(doc: &DatasetDoc, max_points: u64, bins: usize) -> PointHistogram {
    let mut values = Vec::new();
    let (mut excluded, mut rle_skipped) = (0, 0);
    for a in &doc.annotations {
        match &a.segmentation {
            Segmentation::Polygons(polys) => {
                for p in polys {
                    let n = p.len() as u64;
                    if n > max_points {
                        excluded += 1;
                    } else {
                        values.push(n);
                    }
                }
            }
            _ => rle_skipped += 1,
        }
    }
    PointHistogram {
        histogram: Histogram::of_integers(&values, bins),
        excluded,
        rle_skipped,
    }
}

/// `(widths, heights)` over all images.
pub fn image_size_histogram(doc: &DatasetDoc, bins: usize) -> (Histogram, Histogram) {
    let widths: Vec<u64> = doc.images.iter().map(|i| i.width as u64).collect();
    let heights: Vec<u64> = doc.images.iter().map(|i| i.height as u64).collect();
    (
        Histogram::of_integers(&widths, bins),
        Histogram::of_integers(&heights, bins),
    )
}
