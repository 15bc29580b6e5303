//! Reference implementations and generators shared by the integration
//! tests and the acceptance harness. Nothing here calls into the library
//! except the `check_*` drivers, which compare library output against the
//! oracles defined above them.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use num_rational::Ratio;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use foodbench_core::coco::{parse_dataset, parse_results, DetectionRecord};
use foodbench_core::eval::{evaluate, Comparator, Interpolation, MatchConfig};
use foodbench_core::fusion::{fuse, group_detections, FusionConfig, SourcedDetection};
use foodbench_core::maskops::{
    mask_iou, mask_iou_exact, rasterize, rle_compress_string, rle_decode, rle_decompress_string,
    rle_encode, BinaryMask, Polygon, RleMask,
};
use foodbench_core::stats::cooccurrence;

pub type CheckResult = Result<String, String>;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Dense grids
// ---------------------------------------------------------------------------

/// Row-major boolean image, independent of the library's mask type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub h: u32,
    pub w: u32,
    pub rows: Vec<Vec<bool>>,
}

impl Grid {
    pub fn blank(h: u32, w: u32) -> Self {
        Self {
            h,
            w,
            rows: vec![vec![false; w as usize]; h as usize],
        }
    }

    pub fn rect(h: u32, w: u32, r0: u32, r1: u32, c0: u32, c1: u32) -> Self {
        let mut g = Self::blank(h, w);
        for r in r0..r1.min(h) {
            for c in c0..c1.min(w) {
                g.rows[r as usize][c as usize] = true;
            }
        }
        g
    }

    pub fn random(rng: &mut StdRng, h: u32, w: u32, density: f64) -> Self {
        let mut g = Self::blank(h, w);
        for row in &mut g.rows {
            for px in row.iter_mut() {
                *px = rng.gen_bool(density);
            }
        }
        g
    }

    pub fn get(&self, r: u32, c: u32) -> bool {
        self.rows[r as usize][c as usize]
    }

    pub fn area(&self) -> u64 {
        self.rows.iter().flatten().filter(|&&b| b).count() as u64
    }

    /// Column-major runs starting with background; only the first run may
    /// be zero.
    pub fn naive_counts(&self) -> Vec<u32> {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for c in 0..self.w {
            for r in 0..self.h {
                if self.get(r, c) == current {
                    run += 1;
                } else {
                    counts.push(run);
                    current = !current;
                    run = 1;
                }
            }
        }
        counts.push(run);
        counts
    }

    /// Tight `[x, y, w, h]`, `None` when empty.
    pub fn tight_bbox(&self) -> Option<[f64; 4]> {
        let px: Vec<(u32, u32)> = (0..self.h)
            .flat_map(|r| (0..self.w).map(move |c| (r, c)))
            .filter(|&(r, c)| self.get(r, c))
            .collect();
        let r0 = px.iter().map(|p| p.0).min()?;
        let r1 = px.iter().map(|p| p.0).max()?;
        let c0 = px.iter().map(|p| p.1).min()?;
        let c1 = px.iter().map(|p| p.1).max()?;
        Some([c0 as f64, r0 as f64, (c1 - c0 + 1) as f64, (r1 - r0 + 1) as f64])
    }

    pub fn to_mask(&self) -> BinaryMask {
        BinaryMask::from_fn(self.h, self.w, |r, c| self.get(r, c)).unwrap()
    }

    pub fn matches(&self, m: &BinaryMask) -> bool {
        m.shape() == (self.h, self.w)
            && (0..self.h).all(|r| (0..self.w).all(|c| self.get(r, c) == m.get(r, c)))
    }

    pub fn rle_json(&self) -> Value {
        json!({"size": [self.h, self.w], "counts": self.naive_counts()})
    }
}

/// `(intersection, union)` by visiting every pixel.
pub fn pixel_overlap(a: &Grid, b: &Grid) -> (u64, u64) {
    let (mut inter, mut union) = (0, 0);
    for r in 0..a.h {
        for c in 0..a.w {
            let (x, y) = (a.get(r, c), b.get(r, c));
            inter += (x && y) as u64;
            union += (x || y) as u64;
        }
    }
    (inter, union)
}

// ---------------------------------------------------------------------------
// Point in polygon
// ---------------------------------------------------------------------------

/// Even-odd crossing test (PNPOLY). Horizontal edges never count; a vertex
/// exactly on the ray belongs to the edge above it.
pub fn point_in_polygon(px: f64, py: f64, verts: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = verts.len();
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = verts[i];
        let [xj, yj] = verts[j];
        if (yi > py) != (yj > py) && px < xi + (py - yi) * (xj - xi) / (yj - yi) {
            inside = !inside;
        }
        j = i;
    }
    inside
}

pub fn oracle_raster(verts: &[[f64; 2]], h: u32, w: u32) -> Grid {
    let mut g = Grid::blank(h, w);
    for r in 0..h {
        for c in 0..w {
            g.rows[r as usize][c as usize] =
                point_in_polygon(c as f64 + 0.5, r as f64 + 0.5, verts);
        }
    }
    g
}

// ---------------------------------------------------------------------------
// Axis-aligned boxes
// ---------------------------------------------------------------------------

pub fn box_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let iw = ((a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0])).max(0.0);
    let ih = ((a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let union = a[2] * a[3] + b[2] * b[3] - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Connected components of the "same image, same category, IoU above
/// threshold" graph by depth-first search. Components are sorted by their
/// smallest member.
pub fn overlap_components(items: &[(u64, u64, [f64; 4])], threshold: f64) -> Vec<Vec<usize>> {
    let n = items.len();
    let linked = |i: usize, j: usize| {
        items[i].0 == items[j].0
            && items[i].1 == items[j].1
            && box_iou(items[i].2, items[j].2) > threshold
    };
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut comp = vec![];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            comp.push(i);
            for j in 0..n {
                if !seen[j] && linked(i, j) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

// ---------------------------------------------------------------------------
// Synthetic evaluation scenes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Inst {
    pub image_id: u64,
    pub category_id: u64,
    pub grid: Grid,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub images: Vec<(u64, u32, u32)>,
    pub categories: Vec<u64>,
    pub gts: Vec<Inst>,
    pub dets: Vec<Inst>,
}

fn random_rect(rng: &mut StdRng, h: u32, w: u32) -> (u32, u32, u32, u32) {
    let r0 = rng.gen_range(0..h);
    let r1 = rng.gen_range(r0 + 1..=h);
    let c0 = rng.gen_range(0..w);
    let c1 = rng.gen_range(c0 + 1..=w);
    (r0, r1, c0, c1)
}

fn jitter(rng: &mut StdRng, lo: u32, hi: u32, limit: u32) -> (u32, u32) {
    let d = |rng: &mut StdRng| rng.gen_range(-2i64..=2);
    let a = (lo as i64 + d(rng)).clamp(0, limit as i64 - 1) as u32;
    let b = (hi as i64 + d(rng)).clamp(a as i64 + 1, limit as i64) as u32;
    (a, b)
}

impl Scene {
    /// Up to 5 images, 4 categories, 6 detections per image; at least one
    /// ground-truth instance. Scores are distinct.
    pub fn random(rng: &mut StdRng) -> Self {
        let n_images = rng.gen_range(1..=5u64);
        let n_cats = rng.gen_range(1..=4u64);
        let categories: Vec<u64> = (1..=n_cats).collect();
        let images: Vec<(u64, u32, u32)> = (1..=n_images)
            .map(|id| (id, rng.gen_range(6..=20), rng.gen_range(6..=20)))
            .collect();
        let mut gts = Vec::new();
        let mut gt_rects = Vec::new();
        let mut dets = Vec::new();
        let mut used_scores = BTreeSet::new();
        for &(image_id, h, w) in &images {
            let n_gt = rng.gen_range(0..=4);
            let first = gts.len();
            for _ in 0..n_gt {
                let rect = random_rect(rng, h, w);
                let category_id = rng.gen_range(1..=n_cats);
                gts.push(Inst {
                    image_id,
                    category_id,
                    grid: Grid::rect(h, w, rect.0, rect.1, rect.2, rect.3),
                    score: 1.0,
                });
                gt_rects.push(rect);
            }
            for _ in 0..rng.gen_range(0..=6) {
                let own = gts.len() - first;
                let (mut grid, mut category_id);
                if own > 0 && rng.gen_bool(0.7) {
                    let k = first + rng.gen_range(0..own);
                    let (r0, r1, c0, c1) = gt_rects[k];
                    let (r0, r1) = jitter(rng, r0, r1, h);
                    let (c0, c1) = jitter(rng, c0, c1, w);
                    grid = Grid::rect(h, w, r0, r1, c0, c1);
                    category_id = gts[k].category_id;
                } else {
                    let (r0, r1, c0, c1) = random_rect(rng, h, w);
                    grid = Grid::rect(h, w, r0, r1, c0, c1);
                    category_id = rng.gen_range(1..=n_cats);
                }
                if rng.gen_bool(0.2) {
                    category_id = rng.gen_range(1..=n_cats);
                }
                if rng.gen_bool(0.3) {
                    let (r, c) = (rng.gen_range(0..h), rng.gen_range(0..w));
                    grid.rows[r as usize][c as usize] ^= true;
                }
                let score = loop {
                    let s: f64 = rng.gen_range(0.01..1.0);
                    if used_scores.insert(s.to_bits()) {
                        break s;
                    }
                };
                dets.push(Inst {
                    image_id,
                    category_id,
                    grid,
                    score,
                });
            }
        }
        if gts.is_empty() {
            let (image_id, h, w) = images[0];
            gts.push(Inst {
                image_id,
                category_id: 1,
                grid: Grid::rect(h, w, 0, 2, 0, 2),
                score: 1.0,
            });
        }
        Self {
            images,
            categories,
            gts,
            dets,
        }
    }

    pub fn gt_json(&self) -> Value {
        json!({
            "images": self.images.iter().map(|&(id, h, w)| json!({
                "id": id, "width": w, "height": h, "file_name": format!("{id}.jpg")
            })).collect::<Vec<_>>(),
            "categories": self.categories.iter().map(|&id| json!({
                "id": id, "name": format!("class-{id}")
            })).collect::<Vec<_>>(),
            "annotations": self.gts.iter().enumerate().map(|(k, g)| json!({
                "id": k + 1,
                "image_id": g.image_id,
                "category_id": g.category_id,
                "segmentation": g.grid.rle_json(),
                "bbox": g.grid.tight_bbox().unwrap_or([0.0; 4]),
                "area": g.grid.area(),
                "iscrowd": 0,
            })).collect::<Vec<_>>(),
        })
    }

    pub fn results_json(&self) -> Value {
        Value::Array(
            self.dets
                .iter()
                .map(|d| {
                    json!({
                        "image_id": d.image_id,
                        "category_id": d.category_id,
                        "segmentation": d.grid.rle_json(),
                        "score": d.score,
                    })
                })
                .collect(),
        )
    }
}

type Q = Ratio<i128>;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCategory {
    pub ap_101: Option<f64>,
    pub ap_all: Option<f64>,
    pub ar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub per_category: BTreeMap<u64, OracleCategory>,
    pub map_101: f64,
    pub map_all: f64,
    pub mar: f64,
}

/// Exhaustive greedy matching and direct envelope integration in exact
/// rational arithmetic. Assumes distinct detection scores.
pub fn brute_force_eval(scene: &Scene, inclusive: bool, max_dets: usize) -> OracleReport {
    let mut kept: Vec<usize> = Vec::new();
    for &(image_id, _, _) in &scene.images {
        let mut idx: Vec<usize> = (0..scene.dets.len())
            .filter(|&i| scene.dets[i].image_id == image_id)
            .collect();
        idx.sort_by(|&a, &b| scene.dets[b].score.total_cmp(&scene.dets[a].score));
        kept.extend(idx.into_iter().take(max_dets));
    }

    let mut per_category = BTreeMap::new();
    let (mut s101, mut sall, mut sar, mut n) = (Q::from(0), Q::from(0), Q::from(0), 0i128);
    for &cat in &scene.categories {
        let mut order: Vec<usize> = kept
            .iter()
            .copied()
            .filter(|&i| scene.dets[i].category_id == cat)
            .collect();
        order.sort_by(|&a, &b| scene.dets[b].score.total_cmp(&scene.dets[a].score));
        let gt_idx: Vec<usize> = (0..scene.gts.len())
            .filter(|&g| scene.gts[g].category_id == cat)
            .collect();
        let num_gt = gt_idx.len() as i128;
        if num_gt == 0 {
            per_category.insert(
                cat,
                OracleCategory {
                    ap_101: None,
                    ap_all: None,
                    ar: None,
                },
            );
            continue;
        }
        let mut matched = vec![false; scene.gts.len()];
        let mut flags = Vec::new();
        for &d in &order {
            let det = &scene.dets[d];
            let mut best: Option<(usize, u64, u64)> = None;
            for &g in &gt_idx {
                let gt = &scene.gts[g];
                if matched[g] || gt.image_id != det.image_id {
                    continue;
                }
                let (inter, union) = pixel_overlap(&det.grid, &gt.grid);
                let qualifies = if inclusive {
                    2 * inter >= union && union > 0
                } else {
                    2 * inter > union
                };
                let better = match best {
                    None => true,
                    Some((_, bi, bu)) => inter as u128 * bu as u128 > bi as u128 * union as u128,
                };
                if qualifies && better {
                    best = Some((g, inter, union));
                }
            }
            if let Some((g, _, _)) = best {
                matched[g] = true;
            }
            flags.push(best.is_some());
        }

        let mut tp = 0i128;
        let mut points: Vec<(Q, Q)> = Vec::new();
        for (i, &f) in flags.iter().enumerate() {
            tp += f as i128;
            points.push((Q::new(tp, num_gt), Q::new(tp, i as i128 + 1)));
        }
        let max_prec_from = |i: usize| {
            points[i..]
                .iter()
                .map(|p| p.1)
                .max()
                .unwrap_or_else(|| Q::from(0))
        };
        let mut ap101 = Q::from(0);
        for t in 0..=100 {
            let thr = Q::new(t, 100);
            if let Some(i) = points.iter().position(|p| p.0 >= thr) {
                ap101 += max_prec_from(i);
            }
        }
        ap101 /= Q::from(101);
        let mut apall = Q::from(0);
        let mut prev = Q::from(0);
        for i in 0..points.len() {
            apall += (points[i].0 - prev) * max_prec_from(i);
            prev = points[i].0;
        }
        let ar = Q::new(tp, num_gt);
        s101 += ap101;
        sall += apall;
        sar += ar;
        n += 1;
        per_category.insert(
            cat,
            OracleCategory {
                ap_101: Some(to_f64(ap101)),
                ap_all: Some(to_f64(apall)),
                ar: Some(to_f64(ar)),
            },
        );
    }
    let mean = |s: Q| if n == 0 { 0.0 } else { to_f64(s / Q::from(n)) };
    OracleReport {
        per_category,
        map_101: mean(s101),
        map_all: mean(sall),
        mar: mean(sar),
    }
}

fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

pub fn check_rle_roundtrip(n: usize, seed: u64) -> CheckResult {
    let mut rng = rng(seed);
    for k in 0..n {
        let (h, w) = (rng.gen_range(1..=64), rng.gen_range(1..=64));
        let density = [0.0, 1.0, 0.05, 0.5, 0.95][k % 5];
        let g = Grid::random(&mut rng, h, w, density);
        let rle = rle_encode(&g.to_mask());
        if rle.counts() != g.naive_counts().as_slice() {
            return Err(format!("mask {k} ({h}x{w}): counts differ from naive scan"));
        }
        if !g.matches(&rle_decode(&rle)) {
            return Err(format!("mask {k} ({h}x{w}): decode(encode(m)) != m"));
        }
        let s = rle_compress_string(&rle);
        if rle_decompress_string(&s, h, w).as_ref() != Ok(&rle) {
            return Err(format!("mask {k} ({h}x{w}): string codec round trip failed"));
        }
    }
    Ok(format!("{n}/{n} masks round-trip"))
}

pub fn check_codec_reference() -> CheckResult {
    let path = fixtures_dir().join("rle_reference.json");
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let cases = doc["cases"].as_array().ok_or("fixture has no cases")?;
    for case in cases {
        let name = case["name"].as_str().unwrap_or("?");
        let h = case["height"].as_u64().unwrap() as u32;
        let w = case["width"].as_u64().unwrap() as u32;
        let counts: Vec<u32> = serde_json::from_value(case["counts"].clone()).unwrap();
        let expected = case["compressed"].as_str().unwrap();
        let rows: Vec<String> = serde_json::from_value(case["mask_rows"].clone()).unwrap();
        let mut g = Grid::blank(h, w);
        for (r, line) in rows.iter().enumerate() {
            for (c, ch) in line.chars().enumerate() {
                g.rows[r][c] = ch == '1';
            }
        }
        let rle = rle_encode(&g.to_mask());
        if rle.counts() != counts.as_slice() {
            return Err(format!("{name}: counts {:?} != reference", rle.counts()));
        }
        let got = rle_compress_string(&rle);
        if got != expected {
            return Err(format!("{name}: compressed {got:?} != reference {expected:?}"));
        }
        let back = rle_decompress_string(expected, h, w).map_err(|e| format!("{name}: {e}"))?;
        if back != rle {
            return Err(format!("{name}: decompressed reference differs"));
        }
    }
    Ok(format!("{} reference strings byte-identical", cases.len()))
}

pub fn check_iou_oracle(n: usize, seed: u64) -> CheckResult {
    let mut rng = rng(seed);
    for k in 0..n {
        let (h, w) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
        let (da, db) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let a = Grid::random(&mut rng, h, w, da);
        let b = Grid::random(&mut rng, h, w, db);
        let (inter, union) = pixel_overlap(&a, &b);
        let expected = if union == 0 {
            Ratio::from_integer(0)
        } else {
            Ratio::new(inter, union)
        };
        let (ma, mb) = (a.to_mask(), b.to_mask());
        let exact = mask_iou_exact(&ma, &mb).map_err(|e| e.to_string())?;
        let float: f64 = mask_iou(&ma, &mb).map_err(|e| e.to_string())?;
        let rle: f64 = rle_encode(&ma).iou(&rle_encode(&mb)).map_err(|e| e.to_string())?;
        let expected_f = if union == 0 { 0.0 } else { inter as f64 / union as f64 };
        if exact != expected || float != expected_f || rle != expected_f {
            return Err(format!(
                "pair {k} ({h}x{w}): oracle {inter}/{union}, exact {exact}, dense {float}, rle {rle}"
            ));
        }
    }
    Ok(format!("{n}/{n} pairs exact"))
}

pub fn random_polygon(rng: &mut StdRng, h: u32, w: u32, integral: bool) -> Vec<[f64; 2]> {
    let n = if rng.gen_bool(0.5) { 3 } else { 4 };
    (0..n)
        .map(|_| {
            let x = rng.gen_range(-4.0..w as f64 + 4.0);
            let y = rng.gen_range(-4.0..h as f64 + 4.0);
            if integral {
                [x.round(), y.round()]
            } else {
                [x, y]
            }
        })
        .collect()
}

pub fn check_raster_oracle(n: usize, seed: u64) -> CheckResult {
    let mut rng = rng(seed);
    let mut pixels = 0u64;
    for k in 0..n {
        let (h, w) = (rng.gen_range(1..=64), rng.gen_range(1..=64));
        let verts = random_polygon(&mut rng, h, w, k % 3 == 0);
        let expected = oracle_raster(&verts, h, w);
        let got = rasterize(&[Polygon::new(verts.clone())], h, w).map_err(|e| e.to_string())?;
        if !expected.matches(&got) {
            return Err(format!("polygon {k} {verts:?} on {h}x{w}: pixel disagreement"));
        }
        pixels += h as u64 * w as u64;
    }
    Ok(format!("{n} polygons, {pixels} pixels agree"))
}

pub fn check_eval_oracle(n: usize, seed: u64) -> CheckResult {
    const TOL: f64 = 1e-9;
    let mut rng = rng(seed);
    for k in 0..n {
        let scene = Scene::random(&mut rng);
        let gt = parse_dataset(scene.gt_json().to_string().as_bytes()).map_err(|e| e.to_string())?;
        let dets =
            parse_results(scene.results_json().to_string().as_bytes()).map_err(|e| e.to_string())?;
        let inclusive = k % 4 == 3;
        let comparator = if inclusive {
            Comparator::GreaterOrEqual
        } else {
            Comparator::StrictGreater
        };
        let oracle = brute_force_eval(&scene, inclusive, 100);
        for interpolation in [Interpolation::Point101, Interpolation::AllPoint] {
            let cfg = MatchConfig {
                comparator,
                interpolation,
                ..MatchConfig::default()
            };
            let report = evaluate(&gt, &dets, &cfg).map_err(|e| e.to_string())?;
            let (omap, pick): (f64, fn(&OracleCategory) -> Option<f64>) = match interpolation {
                Interpolation::Point101 => (oracle.map_101, |c| c.ap_101),
                Interpolation::AllPoint => (oracle.map_all, |c| c.ap_all),
            };
            let close = |a: f64, b: f64| (a - b).abs() <= TOL;
            let opt_close = |a: Option<f64>, b: Option<f64>| match (a, b) {
                (Some(a), Some(b)) => close(a, b),
                (None, None) => true,
                _ => false,
            };
            if !close(report.map, omap) || !close(report.mar, oracle.mar) {
                return Err(format!(
                    "scene {k} {interpolation:?}: mAP/mAR ({}, {}) vs oracle ({omap}, {})",
                    report.map, report.mar, oracle.mar
                ));
            }
            for (cat, oc) in &oracle.per_category {
                let Some(c) = report.per_category.get(cat) else {
                    return Err(format!("scene {k}: category {cat} missing from report"));
                };
                if !opt_close(c.ap, pick(oc)) || !opt_close(c.ar, oc.ar) {
                    return Err(format!(
                        "scene {k} {interpolation:?} category {cat}: ({:?}, {:?}) vs oracle ({:?}, {:?})",
                        c.ap,
                        c.ar,
                        pick(oc),
                        oc.ar
                    ));
                }
            }
        }
        let self_report = evaluate(&gt, &gt.annotations_as_detections(), &MatchConfig::default())
            .map_err(|e| e.to_string())?;
        if self_report.map != 1.0 || self_report.mar != 1.0 {
            return Err(format!(
                "scene {k}: evaluate(gt, gt) = ({}, {})",
                self_report.map, self_report.mar
            ));
        }
    }
    Ok(format!("{n} scenes match within {TOL:e}; gt-vs-gt exactly (1, 1)"))
}

// ---------------------------------------------------------------------------
// Fusion instances
// ---------------------------------------------------------------------------

pub const FUSION_FRAME: u32 = 32;

pub fn rect_detection(image_id: u64, category_id: u64, r: (u32, u32, u32, u32), score: f64) -> Value {
    let g = Grid::rect(FUSION_FRAME, FUSION_FRAME, r.0, r.1, r.2, r.3);
    json!({
        "image_id": image_id,
        "category_id": category_id,
        "segmentation": g.rle_json(),
        "bbox": g.tight_bbox().unwrap(),
        "score": score,
    })
}

fn to_records(values: Vec<Value>) -> Vec<DetectionRecord> {
    parse_results(Value::Array(values).to_string().as_bytes()).unwrap()
}

/// Objects are placed first; each source then reports jittered copies of
/// some of them, so overlaps and chains are common.
pub fn random_fusion_instance(rng: &mut StdRng) -> Vec<(u32, Vec<DetectionRecord>)> {
    let n_sources = rng.gen_range(1..=3u32);
    let n_objects = rng.gen_range(1..=5);
    let objects: Vec<(u64, u64, (u32, u32, u32, u32))> = (0..n_objects)
        .map(|_| {
            let r0 = rng.gen_range(0..FUSION_FRAME - 4);
            let c0 = rng.gen_range(0..FUSION_FRAME - 4);
            let r1 = rng.gen_range(r0 + 2..=(r0 + 14).min(FUSION_FRAME));
            let c1 = rng.gen_range(c0 + 2..=(c0 + 14).min(FUSION_FRAME));
            (rng.gen_range(1..=2), rng.gen_range(1..=3), (r0, r1, c0, c1))
        })
        .collect();
    (0..n_sources)
        .map(|source| {
            let dets = (0..rng.gen_range(0..=6))
                .map(|_| {
                    let (image, cat, (r0, r1, c0, c1)) = objects[rng.gen_range(0..objects.len())];
                    let (r0, r1) = jitter(rng, r0, r1, FUSION_FRAME);
                    let (c0, c1) = jitter(rng, c0, c1, FUSION_FRAME);
                    let score = (rng.gen_range(1..=100) as f64) / 100.0;
                    rect_detection(image, cat, (r0, r1, c0, c1), score)
                })
                .collect();
            (source + 10, to_records(dets))
        })
        .collect()
}

fn bbox_of(d: &DetectionRecord) -> [f64; 4] {
    d.bbox.expect("fusion inputs carry bboxes").into()
}

/// Same records regardless of order.
pub fn same_multiset(a: &[DetectionRecord], b: &[DetectionRecord]) -> bool {
    let key = |d: &DetectionRecord| serde_json::to_string(d).unwrap();
    let mut ka: Vec<String> = a.iter().map(key).collect();
    let mut kb: Vec<String> = b.iter().map(key).collect();
    ka.sort();
    kb.sort();
    ka == kb
}

/// Greedily drops detections until no same-image, same-category pair has
/// bbox IoU above `threshold`.
pub fn separate(dets: &[DetectionRecord], threshold: f64) -> Vec<DetectionRecord> {
    let mut out: Vec<DetectionRecord> = Vec::new();
    for d in dets {
        let clash = out.iter().any(|o| {
            o.image_id == d.image_id
                && o.category_id == d.category_id
                && box_iou(bbox_of(o), bbox_of(d)) > threshold
        });
        if !clash {
            out.push(d.clone());
        }
    }
    out
}

pub fn check_fusion_worked_example() -> CheckResult {
    // 10x10 = 100 px at 0.4 and 10x5 = 50 px at 0.9 overlap with bbox IoU
    // 0.5, so group at 0.4
    let big = to_records(vec![rect_detection(1, 1, (0, 10, 0, 10), 0.4)]);
    let small = to_records(vec![rect_detection(1, 1, (0, 10, 0, 5), 0.9)]);
    let cfg = FusionConfig {
        group_iou: 0.4,
        ..FusionConfig::default()
    };
    let out = fuse(&[(1, big), (2, small.clone())], &cfg).map_err(|e| e.to_string())?;
    let weight_big = 100.0 * 0.4;
    let weight_small = 50.0 * 0.9;
    if out.len() != 1 || out[0].bbox != small[0].bbox || out[0].score != 0.9 || weight_small != 45.0 {
        return Err(format!("fused {out:?}; weights {weight_big} / {weight_small}"));
    }
    Ok("weights 40 / 45, survivor = 50-px mask, score 0.9".into())
}

pub fn check_fusion_invariants(n: usize, seed: u64) -> CheckResult {
    let mut rng = rng(seed);
    let one = FusionConfig {
        singleton_factor: Some(1.0),
        ..FusionConfig::default()
    };
    let mut groups_seen = 0usize;
    for k in 0..n {
        let sets = random_fusion_instance(&mut rng);
        let fused = fuse(&sets, &FusionConfig::default()).map_err(|e| format!("instance {k}: {e}"))?;
        let input_len: usize = sets.iter().map(|s| s.1.len()).sum();
        let max_score = sets
            .iter()
            .flat_map(|s| s.1.iter().map(|d| d.score))
            .fold(0.0, f64::max);

        // (a) separation
        for (i, a) in fused.iter().enumerate() {
            for b in &fused[i + 1..] {
                if a.image_id == b.image_id
                    && a.category_id == b.category_id
                    && box_iou(bbox_of(a), bbox_of(b)) > 0.5
                {
                    return Err(format!("instance {k}: fused output keeps an overlapping pair"));
                }
            }
        }
        if fused.len() > input_len || fused.iter().any(|d| d.score > max_score) {
            return Err(format!("instance {k}: cardinality or score bound violated"));
        }

        // (d) grouping equals connected components
        let flat = SourcedDetection::flatten(&sets);
        let groups = group_detections(&flat, &FusionConfig::default()).map_err(|e| e.to_string())?;
        let items: Vec<(u64, u64, [f64; 4])> = flat
            .iter()
            .map(|s| (s.detection.image_id, s.detection.category_id, bbox_of(&s.detection)))
            .collect();
        let comps = overlap_components(&items, 0.5);
        let got: Vec<Vec<usize>> = groups.iter().map(|g| g.members.clone()).collect();
        if got != comps {
            return Err(format!("instance {k}: groups {got:?} != components {comps:?}"));
        }
        if fused.len() != groups.len() {
            return Err(format!("instance {k}: {} outputs for {} groups", fused.len(), groups.len()));
        }
        groups_seen += groups.len();

        // source permutation
        let mut reversed = sets.clone();
        reversed.reverse();
        if fuse(&reversed, &FusionConfig::default()).map_err(|e| e.to_string())? != fused {
            return Err(format!("instance {k}: output depends on source order"));
        }

        // (b) identity on separated input
        let all: Vec<DetectionRecord> = sets.iter().flat_map(|s| s.1.clone()).collect();
        let sep = separate(&all, 0.5);
        let out = fuse(&[(0, sep.clone())], &one).map_err(|e| e.to_string())?;
        if !same_multiset(&out, &sep) {
            return Err(format!("instance {k}: separated input not returned unchanged"));
        }

        // (c) idempotence
        let once = fuse(&sets, &one).map_err(|e| e.to_string())?;
        let twice = fuse(&[(0, once.clone())], &one).map_err(|e| e.to_string())?;
        if once != twice {
            return Err(format!("instance {k}: fuse is not idempotent"));
        }
    }
    Ok(format!("{n} instances ({groups_seen} groups): separation, identity, idempotence, components"))
}

// ---------------------------------------------------------------------------
// Co-occurrence
// ---------------------------------------------------------------------------

pub fn random_doc(rng: &mut StdRng) -> Value {
    let n_images = rng.gen_range(0..=8u64);
    let n_cats = rng.gen_range(1..=6u64);
    let mut anns = Vec::new();
    for image in 1..=n_images {
        for _ in 0..rng.gen_range(0..=5) {
            anns.push(json!({
                "id": anns.len() + 1,
                "image_id": image,
                "category_id": rng.gen_range(1..=n_cats),
                "segmentation": [[0, 0, 3, 0, 3, 3, 0, 3]],
                "bbox": [0, 0, 3, 3],
            }));
        }
    }
    json!({
        "images": (1..=n_images).map(|id| json!({"id": id, "width": 8, "height": 8, "file_name": "f"})).collect::<Vec<_>>(),
        "categories": (1..=n_cats).map(|id| json!({"id": id, "name": format!("c{id}")})).collect::<Vec<_>>(),
        "annotations": anns,
    })
}

/// Ordered-pair counting over each image's distinct categories.
pub fn pair_count_oracle(doc: &Value) -> BTreeMap<(u64, u64), u64> {
    let mut per_image: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for a in doc["annotations"].as_array().unwrap() {
        per_image
            .entry(a["image_id"].as_u64().unwrap())
            .or_default()
            .insert(a["category_id"].as_u64().unwrap());
    }
    let mut out = BTreeMap::new();
    for cats in per_image.values() {
        for &a in cats {
            for &b in cats {
                if a != b {
                    *out.entry((a, b)).or_insert(0) += 1;
                }
            }
        }
    }
    out
}

pub fn check_cooccurrence_oracle(n: usize, seed: u64) -> CheckResult {
    let mut rng = rng(seed);
    for k in 0..n {
        let raw = random_doc(&mut rng);
        let doc = parse_dataset(raw.to_string().as_bytes()).map_err(|e| e.to_string())?;
        let m = cooccurrence(&doc);
        if !m.is_symmetric_with_zero_diagonal() {
            return Err(format!("doc {k}: matrix not symmetric with zero diagonal"));
        }
        let oracle = pair_count_oracle(&raw);
        for &a in &m.category_ids {
            for &b in &m.category_ids {
                let expected = oracle.get(&(a, b)).copied().unwrap_or(0);
                if m.get(a, b) != Some(expected) {
                    return Err(format!("doc {k}: cell ({a}, {b}) = {:?}, oracle {expected}", m.get(a, b)));
                }
            }
        }
    }
    Ok(format!("{n} random docs match pair counting"))
}

pub fn rle_of(g: &Grid) -> RleMask {
    RleMask::new(g.h, g.w, g.naive_counts()).unwrap()
}
