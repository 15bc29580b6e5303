//! Non-learning toolkit for the food recognition benchmark: mask
//! encodings, COCO-style I/O, instance segmentation evaluation, ensemble
//! fusion and dataset statistics.
//!
//! Geometry and curve types are generic over [`Scalar`]; the aliases below
//! fix the precision.

pub mod coco;
pub mod eval;
pub mod fusion;
pub mod maskops;
mod scalar;
pub mod stats;

pub use scalar::Scalar;

pub use coco::{AnnotationRecord, CocoError, DatasetDoc, DetectionRecord, Segmentation};
pub use eval::{evaluate, EvalError, EvalReport, MatchConfig, PRCurve};
pub use fusion::{fuse, FusionConfig, FusionError};
pub use maskops::{BinaryMask, Bbox, MaskError, Polygon, RleMask};

pub type Bbox32 = maskops::Bbox<f32>;
pub type Bbox64 = maskops::Bbox<f64>;
pub type Polygon32 = maskops::Polygon<f32>;
pub type Polygon64 = maskops::Polygon<f64>;
pub type PRCurve32 = eval::PRCurve<f32>;
pub type PRCurve64 = eval::PRCurve<f64>;
/// Exact IoU as returned by [`maskops::mask_iou_exact`].
pub type ExactRatio = num_rational::Ratio<u64>;
