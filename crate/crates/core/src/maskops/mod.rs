//! Mask geometry: binary masks, the column-major run-length codec, the
//! compressed COCO string form, polygon rasterization and IoU kernels.

mod bbox;
mod codec;
mod mask;
mod raster;
mod rle;

pub use bbox::{bbox_from_mask, bbox_iou, Bbox};
pub use codec::{rle_compress_string, rle_decompress_string};
pub use mask::{mask_area, mask_iou, mask_iou_exact, mask_overlap, BinaryMask};
pub use raster::{rasterize, rasterize_rle, Polygon};
pub use rle::{rle_decode, rle_encode, RleMask};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("mask dimensions must be at least 1x1, got {height}x{width}")]
    ZeroDimension { height: u32, width: u32 },
    #[error("run lengths sum to {sum}, expected {expected}")]
    SumMismatch { sum: u64, expected: u64 },
    #[error("run {index} is zero; only the first run may be empty")]
    MalformedRuns { index: usize },
    #[error("malformed compressed RLE string: {0}")]
    Malformed(String),
    #[error("polygon {index} has {vertices} vertices, at least 3 are required")]
    DegeneratePolygon { index: usize, vertices: usize },
    #[error("polygon {index} has a non-finite coordinate")]
    NonFiniteCoordinate { index: usize },
    #[error("shape mismatch: {left_height}x{left_width} vs {right_height}x{right_width}")]
    ShapeMismatch {
        left_height: u32,
        left_width: u32,
        right_height: u32,
        right_width: u32,
    },
    #[error("mask has no foreground pixels")]
    EmptyMask,
}

pub(crate) fn check_shape(a: (u32, u32), b: (u32, u32)) -> Result<(), MaskError> {
    if a == b {
        Ok(())
    } else {
        Err(MaskError::ShapeMismatch {
            left_height: a.0,
            left_width: a.1,
            right_height: b.0,
            right_width: b.1,
        })
    }
}
