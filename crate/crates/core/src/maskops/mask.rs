use std::fmt;

use num_rational::Ratio;

use super::{check_shape, MaskError};
use crate::Scalar;

/// Dense foreground grid. Pixels are stored column-major so that the
/// storage order equals the run-length scan order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: u32,
    width: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    /// All-background mask.
    pub fn new(height: u32, width: u32) -> Result<Self, MaskError> {
        if height == 0 || width == 0 {
            return Err(MaskError::ZeroDimension { height, width });
        }
        Ok(Self {
            height,
            width,
            bits: vec![false; height as usize * width as usize],
        })
    }

    pub fn from_fn(
        height: u32,
        width: u32,
        mut f: impl FnMut(u32, u32) -> bool,
    ) -> Result<Self, MaskError> {
        let mut mask = Self::new(height, width)?;
        for col in 0..width {
            for row in 0..height {
                if f(row, col) {
                    mask.bits[col as usize * height as usize + row as usize] = true;
                }
            }
        }
        Ok(mask)
    }

    /// Builds a mask from foreground `(row, col)` coordinates. Coordinates
    /// outside the grid are rejected with `ShapeMismatch`.
    pub fn from_pixels(
        height: u32,
        width: u32,
        pixels: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self, MaskError> {
        let mut mask = Self::new(height, width)?;
        for (row, col) in pixels {
            if row >= height || col >= width {
                return Err(MaskError::ShapeMismatch {
                    left_height: height,
                    left_width: width,
                    right_height: row + 1,
                    right_width: col + 1,
                });
            }
            mask.set(row, col, true);
        }
        Ok(mask)
    }

    pub(crate) fn from_column_major(height: u32, width: u32, bits: Vec<bool>) -> Self {
        debug_assert_eq!(bits.len(), height as usize * width as usize);
        Self {
            height,
            width,
            bits,
        }
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn shape(&self) -> (u32, u32) {
        (self.height, self.width)
    }

    /// # Panics
    /// If `(row, col)` is outside the grid.
    pub fn get(&self, row: u32, col: u32) -> bool {
        assert!(row < self.height && col < self.width, "pixel out of range");
        self.bits[self.offset(row, col)]
    }

    /// # Panics
    /// If `(row, col)` is outside the grid.
    pub fn set(&mut self, row: u32, col: u32, value: bool) {
        assert!(row < self.height && col < self.width, "pixel out of range");
        let i = self.offset(row, col);
        self.bits[i] = value;
    }

    /// Foreground pixels as `(row, col)`, in column-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let h = self.height as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i % h) as u32, (i / h) as u32))
    }

    pub fn area(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// True when every foreground pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> Result<bool, MaskError> {
        check_shape(self.shape(), other.shape())?;
        Ok(self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b))
    }

    /// Logical OR in place.
    pub fn union_with(&mut self, other: &BinaryMask) -> Result<(), MaskError> {
        check_shape(self.shape(), other.shape())?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    pub(crate) fn column_major(&self) -> &[bool] {
        &self.bits
    }

    fn offset(&self, row: u32, col: u32) -> usize {
        col as usize * self.height as usize + row as usize
    }
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinaryMask {}x{}", self.height, self.width)?;
        for row in 0..self.height {
            let line: String = (0..self.width)
                .map(|col| if self.get(row, col) { '#' } else { '.' })
                .collect();
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}

pub fn mask_area(mask: &BinaryMask) -> u64 {
    mask.area()
}

/// `(|a ∩ b|, |a ∪ b|)` in pixels.
pub fn mask_overlap(a: &BinaryMask, b: &BinaryMask) -> Result<(u64, u64), MaskError> {
    check_shape(a.shape(), b.shape())?;
    let (mut inter, mut union) = (0u64, 0u64);
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += (x && y) as u64;
        union += (x || y) as u64;
    }
    Ok((inter, union))
}

/// Exact IoU as a reduced fraction. Two empty masks give `0/1`.
pub fn mask_iou_exact(a: &BinaryMask, b: &BinaryMask) -> Result<Ratio<u64>, MaskError> {
    let (inter, union) = mask_overlap(a, b)?;
    if union == 0 {
        return Ok(Ratio::from_integer(0));
    }
    Ok(Ratio::new(inter, union))
}

/// Pixel IoU. Two empty masks have IoU 0.
pub fn mask_iou<T: Scalar>(a: &BinaryMask, b: &BinaryMask) -> Result<T, MaskError> {
    let (inter, union) = mask_overlap(a, b)?;
    Ok(ratio(inter, union))
}

pub(crate) fn ratio<T: Scalar>(num: u64, den: u64) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::from_count(num) / T::from_count(den)
    }
}
