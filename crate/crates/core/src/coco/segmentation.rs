use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::maskops::{
    check_shape, rasterize, rle_compress_string, rle_decode, rle_decompress_string, rle_encode,
    BinaryMask, MaskError, Polygon, RleMask,
};

/// Instance geometry as found in COCO documents.
#[derive(Debug, Clone, PartialEq)]
pub enum Segmentation {
    /// One or more flat polygons, rasterized as their union.
    Polygons(Vec<Polygon>),
    /// `{"size": [h, w], "counts": [..]}`
    Rle(RleMask),
    /// `{"size": [h, w], "counts": "<string>"}`
    CompressedRle(RleMask),
}

impl Segmentation {
    pub fn from_value(value: &Value) -> Result<Self, String> {
        match value {
            Value::Array(parts) => parts
                .iter()
                .enumerate()
                .map(|(i, part)| {
                    let coords = part
                        .as_array()
                        .ok_or_else(|| format!("polygon {i} is not an array"))?
                        .iter()
                        .map(|v| {
                            v.as_f64()
                                .ok_or_else(|| format!("polygon {i} has a non-numeric coordinate"))
                        })
                        .collect::<Result<Vec<f64>, _>>()?;
                    Polygon::from_flat(&coords)
                        .ok_or_else(|| format!("polygon {i} has an odd number of coordinates"))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Segmentation::Polygons),
            Value::Object(obj) => {
                let size = obj
                    .get("size")
                    .and_then(Value::as_array)
                    .filter(|s| s.len() == 2)
                    .ok_or("RLE segmentation needs size [height, width]")?;
                let dim = |v: &Value| {
                    v.as_u64()
                        .and_then(|d| u32::try_from(d).ok())
                        .ok_or_else(|| "RLE size must be positive integers".to_string())
                };
                let (h, w) = (dim(&size[0])?, dim(&size[1])?);
                match obj.get("counts") {
                    Some(Value::String(s)) => rle_decompress_string(s, h, w)
                        .map(Segmentation::CompressedRle)
                        .map_err(|e| e.to_string()),
                    Some(Value::Array(counts)) => {
                        let counts = counts
                            .iter()
                            .map(|c| {
                                c.as_u64()
                                    .and_then(|c| u32::try_from(c).ok())
                                    .ok_or_else(|| "RLE counts must be non-negative integers".to_string())
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        RleMask::new(h, w, counts)
                            .map(Segmentation::Rle)
                            .map_err(|e| e.to_string())
                    }
                    _ => Err("RLE segmentation needs counts".into()),
                }
            }
            _ => Err("segmentation must be a polygon list or an RLE object".into()),
        }
    }

    pub fn to_value(&self) -> Value {
        match self {
            Segmentation::Polygons(polys) => {
                Value::Array(polys.iter().map(|p| json!(p.to_flat())).collect())
            }
            Segmentation::Rle(rle) => json!({
                "size": [rle.height(), rle.width()],
                "counts": rle.counts(),
            }),
            Segmentation::CompressedRle(rle) => json!({
                "size": [rle.height(), rle.width()],
                "counts": rle_compress_string(rle),
            }),
        }
    }

    pub fn rle(&self) -> Option<&RleMask> {
        match self {
            Segmentation::Rle(r) | Segmentation::CompressedRle(r) => Some(r),
            Segmentation::Polygons(_) => None,
        }
    }

    pub fn polygons(&self) -> Option<&[Polygon]> {
        match self {
            Segmentation::Polygons(p) => Some(p),
            _ => None,
        }
    }

    /// Dense mask on a `height x width` frame. RLE segmentations must
    /// already have that shape.
    pub fn to_mask(&self, height: u32, width: u32) -> Result<BinaryMask, MaskError> {
        match self {
            Segmentation::Polygons(p) => rasterize(p, height, width),
            Segmentation::Rle(r) | Segmentation::CompressedRle(r) => {
                check_shape(r.shape(), (height, width))?;
                Ok(rle_decode(r))
            }
        }
    }

    pub fn to_rle(&self, height: u32, width: u32) -> Result<RleMask, MaskError> {
        match self {
            Segmentation::Polygons(p) => Ok(rle_encode(&rasterize(p, height, width)?)),
            Segmentation::Rle(r) | Segmentation::CompressedRle(r) => {
                check_shape(r.shape(), (height, width))?;
                Ok(r.clone())
            }
        }
    }

    /// A frame large enough to hold the geometry when no image size is
    /// known: the RLE shape, or the polygons' extent rounded up.
    pub fn natural_frame(&self) -> (u32, u32) {
        match self {
            Segmentation::Polygons(polys) => {
                let (mut h, mut w) = (1.0f64, 1.0f64);
                for (_, _, x1, y1) in polys.iter().filter_map(Polygon::extent) {
                    w = w.max(x1.ceil());
                    h = h.max(y1.ceil());
                }
                (h.min(u32::MAX as f64) as u32, w.min(u32::MAX as f64) as u32)
            }
            Segmentation::Rle(r) | Segmentation::CompressedRle(r) => r.shape(),
        }
    }
}

impl Serialize for Segmentation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Segmentation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Segmentation::from_value(&v).map_err(de::Error::custom)
    }
}
