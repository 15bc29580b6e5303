//! COCO-style ground-truth and results documents.

mod parse;
mod segmentation;
mod validate;

pub use parse::{parse_dataset, parse_results, serialize_dataset, serialize_results};
pub use segmentation::Segmentation;
pub use validate::{
    fix_bboxes, fix_bboxes_with, validate, validate_with, Finding, Rule, ValidateOptions,
    ValidationReport,
};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::maskops::Bbox;

/// Unknown fields, kept so documents survive a parse/serialize round trip.
pub type Extra = Map<String, Value>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CocoError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("annotation {annotation_id}: {message}")]
    Reference { annotation_id: u64, message: String },
    #[error("detection {index}: score {score} outside [0, 1]")]
    ScoreRange { index: usize, score: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    pub width: u32,
    pub height: u32,
    pub file_name: String,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRecord {
    pub id: u64,
    pub name: String,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub segmentation: Segmentation,
    pub bbox: Bbox,
    #[serde(default)]
    pub area: f64,
    /// Parsed and written back, never consulted by evaluation.
    #[serde(rename = "iscrowd", default, with = "crowd_flag")]
    pub crowd: bool,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: u64,
    pub category_id: u64,
    pub segmentation: Segmentation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<Bbox>,
    pub score: f64,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetDoc {
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<AnnotationRecord>,
    pub categories: Vec<CategoryRecord>,
    /// Top-level members other than the three arrays (`info`, `licenses`, ...).
    pub extra: Extra,
}

/// Id lookups over a borrowed document.
#[derive(Debug)]
pub struct DocIndex<'a> {
    pub images: HashMap<u64, &'a ImageRecord>,
    pub categories: HashMap<u64, &'a CategoryRecord>,
}

impl DatasetDoc {
    pub fn index(&self) -> DocIndex<'_> {
        DocIndex {
            images: self.images.iter().map(|i| (i.id, i)).collect(),
            categories: self.categories.iter().map(|c| (c.id, c)).collect(),
        }
    }

    /// The ground truth restated as detections with score 1.
    pub fn annotations_as_detections(&self) -> Vec<DetectionRecord> {
        self.annotations
            .iter()
            .map(|a| DetectionRecord {
                image_id: a.image_id,
                category_id: a.category_id,
                segmentation: a.segmentation.clone(),
                bbox: Some(a.bbox),
                score: 1.0,
                extra: Extra::new(),
            })
            .collect()
    }
}

mod crowd_flag {
    use serde::{de, Deserialize, Deserializer, Serializer};
    use serde_json::Value;

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*v as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match Value::deserialize(d)? {
            Value::Bool(b) => Ok(b),
            Value::Number(n) if n.as_f64() == Some(0.0) => Ok(false),
            Value::Number(n) if n.as_f64() == Some(1.0) => Ok(true),
            other => Err(de::Error::custom(format!(
                "iscrowd must be 0, 1 or a boolean, got {other}"
            ))),
        }
    }
}
