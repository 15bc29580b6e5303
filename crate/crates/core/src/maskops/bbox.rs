use serde::{Deserialize, Serialize};

use super::{BinaryMask, MaskError};
use crate::Scalar;

/// Axis-aligned box `[x, y, w, h]` with a top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 4]", into = "[T; 4]")]
pub struct Bbox<T: Scalar = f64> {
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
}

impl<T: Scalar> Bbox<T> {
    pub fn new(x: T, y: T, w: T, h: T) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> T {
        self.x + self.w
    }

    pub fn bottom(&self) -> T {
        self.y + self.h
    }

    pub fn area(&self) -> T {
        self.w.max(T::zero()) * self.h.max(T::zero())
    }

    pub fn is_valid(&self) -> bool {
        self.w >= T::zero() && self.h >= T::zero() && self.x.is_finite() && self.y.is_finite()
    }

    pub fn intersection_area(&self, other: &Self) -> T {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= T::zero() || ih <= T::zero() {
            T::zero()
        } else {
            iw * ih
        }
    }

    /// Largest absolute difference between corresponding sides.
    pub fn max_side_deviation(&self, other: &Self) -> T {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.right() - other.right()).abs())
            .max((self.bottom() - other.bottom()).abs())
    }

    pub fn cast<U: Scalar>(&self) -> Bbox<U> {
        let c = |v: T| U::from_f64(v.to_f64().unwrap_or(f64::NAN)).unwrap_or_else(U::nan);
        Bbox::new(c(self.x), c(self.y), c(self.w), c(self.h))
    }
}

impl<T: Scalar> From<[T; 4]> for Bbox<T> {
    fn from([x, y, w, h]: [T; 4]) -> Self {
        Self { x, y, w, h }
    }
}

impl<T: Scalar> From<Bbox<T>> for [T; 4] {
    fn from(b: Bbox<T>) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

/// Rectangle IoU on continuous coordinates; 0 when the union is empty.
pub fn bbox_iou<T: Scalar>(a: &Bbox<T>, b: &Bbox<T>) -> T {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= T::zero() {
        T::zero()
    } else {
        inter / union
    }
}

/// Tightest box around the foreground: `[min_col, min_row, cols, rows]`.
pub fn bbox_from_mask<T: Scalar>(mask: &BinaryMask) -> Result<Bbox<T>, MaskError> {
    let mut fg = mask.foreground();
    let (r, c) = fg.next().ok_or(MaskError::EmptyMask)?;
    let (mut r0, mut r1, mut c0, mut c1) = (r, r, c, c);
    for (r, c) in fg {
        r0 = r0.min(r);
        r1 = r1.max(r);
        c0 = c0.min(c);
        c1 = c1.max(c);
    }
    let f = |v: u32| T::from_count(v as u64);
    Ok(Bbox::new(f(c0), f(r0), f(c1 - c0 + 1), f(r1 - r0 + 1)))
}
