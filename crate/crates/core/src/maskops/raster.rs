//! Scanline polygon fill with pixel-center sampling and the even-odd rule.

use serde::{Deserialize, Serialize};

use super::{rle_encode, BinaryMask, MaskError, RleMask};
use crate::Scalar;

/// Closed polygon in continuous image coordinates `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon<T: Scalar = f64> {
    vertices: Vec<[T; 2]>,
}

impl<T: Scalar> Polygon<T> {
    /// Vertex count is not checked here; degenerate polygons are reported
    /// by [`rasterize`] and by dataset validation.
    pub fn new(vertices: Vec<[T; 2]>) -> Self {
        Self { vertices }
    }

    /// From the COCO flat form `[x0, y0, x1, y1, ...]`.
    pub fn from_flat(coords: &[T]) -> Option<Self> {
        if !coords.len().is_multiple_of(2) {
            return None;
        }
        Some(Self::new(
            coords.chunks_exact(2).map(|p| [p[0], p[1]]).collect(),
        ))
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.vertices.iter().flat_map(|&[x, y]| [x, y]).collect()
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3
    }

    /// `(min_x, min_y, max_x, max_y)` over the vertices.
    pub fn extent(&self) -> Option<(T, T, T, T)> {
        let mut it = self.vertices.iter();
        let &[x, y] = it.next()?;
        Some(it.fold((x, y, x, y), |(x0, y0, x1, y1), &[x, y]| {
            (x0.min(x), y0.min(y), x1.max(x), y1.max(y))
        }))
    }
}

/// Pixel `(r, c)` is set iff its center `(c + 0.5, r + 0.5)` is inside at
/// least one polygon under the even-odd rule.
pub fn rasterize<T: Scalar>(
    polygons: &[Polygon<T>],
    height: u32,
    width: u32,
) -> Result<BinaryMask, MaskError> {
    let mut mask = BinaryMask::new(height, width)?;
    let mut crossings: Vec<T> = Vec::new();
    for (index, poly) in polygons.iter().enumerate() {
        if poly.is_degenerate() {
            return Err(MaskError::DegeneratePolygon {
                index,
                vertices: poly.len(),
            });
        }
        if poly.vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(MaskError::NonFiniteCoordinate { index });
        }
        fill_polygon(&mut mask, poly, &mut crossings);
    }
    Ok(mask)
}

pub fn rasterize_rle<T: Scalar>(
    polygons: &[Polygon<T>],
    height: u32,
    width: u32,
) -> Result<RleMask, MaskError> {
    rasterize(polygons, height, width).map(|m| rle_encode(&m))
}

fn fill_polygon<T: Scalar>(mask: &mut BinaryMask, poly: &Polygon<T>, crossings: &mut Vec<T>) {
    let half = T::half();
    let Some((_, min_y, _, max_y)) = poly.extent() else {
        return;
    };
    let n = poly.vertices.len();
    let first_row = first_index_at_or_above(min_y - half);
    let height = mask.height() as u64;
    for row in first_row..height {
        let cy = T::from_count(row) + half;
        if cy > max_y {
            break;
        }
        crossings.clear();
        for i in 0..n {
            let [xi, yi] = poly.vertices[i];
            let [xj, yj] = poly.vertices[(i + n - 1) % n];
            if (yi > cy) != (yj > cy) {
                crossings.push(xi + (cy - yi) * (xj - xi) / (yj - yi));
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).expect("finite crossings"));
        // center cx is inside iff an odd number of crossings lie strictly
        // right of it: xs[2k] <= cx < xs[2k+1]
        for pair in crossings.chunks_exact(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let mut col = first_index_at_or_above(lo - half);
            while col < mask.width() as u64 {
                let cx = T::from_count(col) + half;
                if cx >= hi {
                    break;
                }
                if cx >= lo {
                    mask.set(row as u32, col as u32, true);
                }
                col += 1;
            }
        }
    }
}

/// Smallest non-negative integer `i` with `i >= v`, backed off by one to
/// absorb rounding in `v`; callers re-test the exact condition.
fn first_index_at_or_above<T: Scalar>(v: T) -> u64 {
    if v <= T::zero() {
        return 0;
    }
    v.ceil().to_u64().unwrap_or(u64::MAX).saturating_sub(1)
}
