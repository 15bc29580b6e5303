use std::collections::HashSet;

use serde::de::DeserializeOwned;
use serde_json::Value;

use super::{AnnotationRecord, CategoryRecord, CocoError, DatasetDoc, DetectionRecord, ImageRecord};

const IMAGES: &str = "images";
const ANNOTATIONS: &str = "annotations";
const CATEGORIES: &str = "categories";

fn records<T: DeserializeOwned>(value: Value, what: &str) -> Result<Vec<T>, CocoError> {
    let Value::Array(items) = value else {
        return Err(CocoError::Schema(format!("`{what}` must be an array")));
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::from_value(v).map_err(|e| CocoError::Schema(format!("{what}[{i}]: {e}")))
        })
        .collect()
}

/// Parses a COCO annotation document and checks referential integrity.
pub fn parse_dataset(bytes: &[u8]) -> Result<DatasetDoc, CocoError> {
    let root: Value =
        serde_json::from_slice(bytes).map_err(|e| CocoError::Syntax(e.to_string()))?;
    let Value::Object(mut root) = root else {
        return Err(CocoError::Schema("top level must be an object".into()));
    };
    let mut take = |key: &str| {
        root.remove(key)
            .ok_or_else(|| CocoError::Schema(format!("missing top-level `{key}`")))
    };
    let images: Vec<ImageRecord> = records(take(IMAGES)?, IMAGES)?;
    let annotations: Vec<AnnotationRecord> = records(take(ANNOTATIONS)?, ANNOTATIONS)?;
    let categories: Vec<CategoryRecord> = records(take(CATEGORIES)?, CATEGORIES)?;

    let mut image_ids = HashSet::with_capacity(images.len());
    for img in &images {
        if img.width == 0 || img.height == 0 {
            return Err(CocoError::Schema(format!(
                "image {} has zero size {}x{}",
                img.id, img.width, img.height
            )));
        }
        if !image_ids.insert(img.id) {
            return Err(CocoError::Schema(format!("duplicate image id {}", img.id)));
        }
    }
    let mut category_ids = HashSet::with_capacity(categories.len());
    for cat in &categories {
        if cat.name.is_empty() {
            return Err(CocoError::Schema(format!("category {} has an empty name", cat.id)));
        }
        if !category_ids.insert(cat.id) {
            return Err(CocoError::Schema(format!("duplicate category id {}", cat.id)));
        }
    }
    for ann in &annotations {
        if !image_ids.contains(&ann.image_id) {
            return Err(CocoError::Reference {
                annotation_id: ann.id,
                message: format!("image_id {} does not exist", ann.image_id),
            });
        }
        if !category_ids.contains(&ann.category_id) {
            return Err(CocoError::Reference {
                annotation_id: ann.id,
                message: format!("category_id {} does not exist", ann.category_id),
            });
        }
    }
    Ok(DatasetDoc {
        images,
        annotations,
        categories,
        extra: root,
    })
}

/// Parses a COCO results array. Scores must lie in `[0, 1]`.
pub fn parse_results(bytes: &[u8]) -> Result<Vec<DetectionRecord>, CocoError> {
    let root: Value =
        serde_json::from_slice(bytes).map_err(|e| CocoError::Syntax(e.to_string()))?;
    let dets: Vec<DetectionRecord> = records(root, "results")?;
    if let Some((index, d)) = dets
        .iter()
        .enumerate()
        .find(|(_, d)| !(0.0..=1.0).contains(&d.score))
    {
        return Err(CocoError::ScoreRange {
            index,
            score: d.score,
        });
    }
    Ok(dets)
}

pub fn serialize_dataset(doc: &DatasetDoc) -> Vec<u8> {
    let mut root = doc.extra.clone();
    root.insert(IMAGES.into(), to_value(&doc.images));
    root.insert(ANNOTATIONS.into(), to_value(&doc.annotations));
    root.insert(CATEGORIES.into(), to_value(&doc.categories));
    serde_json::to_vec(&Value::Object(root)).expect("JSON values always serialize")
}

pub fn serialize_results(dets: &[DetectionRecord]) -> Vec<u8> {
    serde_json::to_vec(dets).expect("detections always serialize")
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("records always serialize")
}
