use super::{check_shape, BinaryMask, Bbox, MaskError};
use crate::Scalar;

/// Run lengths over the column-major pixel scan, alternating
/// background/foreground and always starting with background.
///
/// Construction enforces `sum(counts) == height * width`, no empty interior
/// runs, and drops a trailing empty run.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RleMask {
    height: u32,
    width: u32,
    counts: Vec<u32>,
}

impl RleMask {
    pub fn new(height: u32, width: u32, mut counts: Vec<u32>) -> Result<Self, MaskError> {
        if height == 0 || width == 0 {
            return Err(MaskError::ZeroDimension { height, width });
        }
        let expected = height as u64 * width as u64;
        let sum: u64 = counts.iter().map(|&c| c as u64).sum();
        if sum != expected {
            return Err(MaskError::SumMismatch { sum, expected });
        }
        if counts.len() > 1 && counts.last() == Some(&0) {
            counts.pop();
        }
        let last = counts.len().saturating_sub(1);
        if let Some(index) = (1..last).find(|&i| counts[i] == 0) {
            return Err(MaskError::MalformedRuns { index });
        }
        Ok(Self {
            height,
            width,
            counts,
        })
    }

    /// All-background RLE.
    pub fn empty(height: u32, width: u32) -> Result<Self, MaskError> {
        Self::new(height, width, vec![height * width])
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

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| c as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    /// Foreground runs as half-open `[start, end)` offsets into the scan.
    pub fn runs(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let mut pos = 0u64;
        self.counts.iter().enumerate().filter_map(move |(i, &c)| {
            let start = pos;
            pos += c as u64;
            (i % 2 == 1).then_some((start, pos))
        })
    }

    /// Pixels set in both masks, computed without decoding.
    pub fn intersection_area(&self, other: &RleMask) -> Result<u64, MaskError> {
        check_shape(self.shape(), other.shape())?;
        let mut a = self.runs().peekable();
        let mut b = other.runs().peekable();
        let mut total = 0u64;
        while let (Some(&(a0, a1)), Some(&(b0, b1))) = (a.peek(), b.peek()) {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi > lo {
                total += hi - lo;
            }
            if a1 <= b1 {
                a.next();
            } else {
                b.next();
            }
        }
        Ok(total)
    }

    /// IoU in the run-length domain; equals the pixel computation exactly.
    pub fn iou<T: Scalar>(&self, other: &RleMask) -> Result<T, MaskError> {
        let inter = self.intersection_area(other)?;
        let union = self.area() + other.area() - inter;
        Ok(super::mask::ratio(inter, union))
    }

    /// Tight bounding box, `None` when empty.
    pub fn bbox<T: Scalar>(&self) -> Option<Bbox<T>> {
        let h = self.height as u64;
        let (mut r0, mut r1, mut c0, mut c1) = (u64::MAX, 0u64, u64::MAX, 0u64);
        let mut any = false;
        for (start, end) in self.runs() {
            if end == start {
                continue;
            }
            any = true;
            let (sc, sr) = (start / h, start % h);
            let (ec, er) = ((end - 1) / h, (end - 1) % h);
            c0 = c0.min(sc);
            c1 = c1.max(ec);
            if sc == ec {
                r0 = r0.min(sr);
                r1 = r1.max(er);
            } else {
                // a run crossing a column boundary touches both the last and first row
                r0 = 0;
                r1 = h - 1;
            }
        }
        any.then(|| {
            Bbox::new(
                T::from_count(c0),
                T::from_count(r0),
                T::from_count(c1 - c0 + 1),
                T::from_count(r1 - r0 + 1),
            )
        })
    }
}

/// Encodes a mask; total, canonical, inverse of [`rle_decode`].
pub fn rle_encode(mask: &BinaryMask) -> RleMask {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for &bit in mask.column_major() {
        if bit != current {
            counts.push(run);
            run = 0;
            current = bit;
        }
        run += 1;
    }
    counts.push(run);
    RleMask {
        height: mask.height(),
        width: mask.width(),
        counts,
    }
}

pub fn rle_decode(rle: &RleMask) -> BinaryMask {
    let mut bits = Vec::with_capacity(rle.height as usize * rle.width as usize);
    for (i, &c) in rle.counts.iter().enumerate() {
        bits.extend(std::iter::repeat_n(i % 2 == 1, c as usize));
    }
    BinaryMask::from_column_major(rle.height, rle.width, bits)
}
