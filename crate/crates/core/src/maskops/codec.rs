//! The compressed RLE string used in COCO result and annotation files.
//!
//! Each count is written as little-endian 5-bit groups plus a continuation
//! bit, offset by 48 into printable ASCII. From index 3 onward the value
//! written is `counts[i] - counts[i - 2]`, which is what the reference
//! tooling does (it differences only when `i > 2`).

use super::{MaskError, RleMask};

pub fn rle_compress_string(rle: &RleMask) -> String {
    let counts = rle.counts();
    let mut out = String::with_capacity(counts.len() * 2);
    for (i, &c) in counts.iter().enumerate() {
        let mut x = c as i64;
        if i > 2 {
            x -= counts[i - 2] as i64;
        }
        loop {
            let mut group = (x & 0x1f) as u8;
            x >>= 5;
            let more = if group & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                group |= 0x20;
            }
            out.push((group + 48) as char);
            if !more {
                break;
            }
        }
    }
    out
}

pub fn rle_decompress_string(s: &str, height: u32, width: u32) -> Result<RleMask, MaskError> {
    let bytes = s.as_bytes();
    let mut counts: Vec<u32> = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let mut x: i64 = 0;
        let mut shift = 0u32;
        loop {
            let Some(&b) = bytes.get(i) else {
                return Err(MaskError::Malformed(format!(
                    "truncated value at byte {i}"
                )));
            };
            if !(48..48 + 64).contains(&b) {
                return Err(MaskError::Malformed(format!(
                    "byte {b:#04x} at {i} is outside the code alphabet"
                )));
            }
            if shift > 55 {
                return Err(MaskError::Malformed(format!("value overflows at byte {i}")));
            }
            let group = (b - 48) as i64;
            i += 1;
            x |= (group & 0x1f) << shift;
            shift += 5;
            if group & 0x20 == 0 {
                if group & 0x10 != 0 {
                    x |= -1i64 << shift;
                }
                break;
            }
        }
        if counts.len() > 2 {
            x += counts[counts.len() - 2] as i64;
        }
        let count = u32::try_from(x).map_err(|_| {
            MaskError::Malformed(format!("run {} decodes to {x}", counts.len()))
        })?;
        counts.push(count);
    }
    RleMask::new(height, width, counts).map_err(|e| MaskError::Malformed(e.to_string()))
}
