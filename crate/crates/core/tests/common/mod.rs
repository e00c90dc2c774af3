//! Shared generators and reference implementations for integration tests.
#![allow(dead_code)]

use obbkit::eval::{DetectionRecord, GroundTruthRecord};
use obbkit::geometry::{normalize, AngleConvention, Point, RotatedBox};
use obbkit::overlap::rotated_iou;
use rand::Rng;
use std::f64::consts::PI;

/// Box with center in `[0, extent]^2`, sides in `[min_side, max_side]`, any
/// angle, normalized into `conv`.
pub fn random_box<R: Rng>(rng: &mut R, conv: AngleConvention, extent: f64, min_side: f64, max_side: f64) -> RotatedBox {
    let raw = RotatedBox::unchecked(
        rng.gen_range(0.0..extent),
        rng.gen_range(0.0..extent),
        rng.gen_range(min_side..max_side),
        rng.gen_range(min_side..max_side),
        rng.gen_range(-PI..PI),
        conv,
    );
    normalize(&raw, conv).unwrap()
}

pub fn random_convention<R: Rng>(rng: &mut R) -> AngleConvention {
    AngleConvention::ALL[rng.gen_range(0..3)]
}

fn inside(corners: &[Point; 4], p: Point) -> bool {
    (0..4).all(|i| (corners[(i + 1) % 4] - corners[i]).cross(p - corners[i]) >= 0.0)
}

/// IoU estimated by jittered stratified sampling on an `n x n` grid over the
/// union's bounding box.
pub fn monte_carlo_iou<R: Rng>(rng: &mut R, a: &RotatedBox, b: &RotatedBox, n: usize) -> f64 {
    let (ca, cb) = (a.corners(), b.corners());
    let all: Vec<Point> = ca.iter().chain(cb.iter()).copied().collect();
    let x0 = all.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let x1 = all.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let y0 = all.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let y1 = all.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let (dx, dy) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
    let (mut inter, mut union) = (0u64, 0u64);
    for i in 0..n {
        for j in 0..n {
            let p = Point::new(x0 + (i as f64 + rng.gen::<f64>()) * dx, y0 + (j as f64 + rng.gen::<f64>()) * dy);
            let (ia, ib) = (inside(&ca, p), inside(&cb, p));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// O(n^2) greedy NMS written directly from its definition: walk boxes by
/// descending score (ties by index) and keep one unless it overlaps an
/// already kept box by more than `thr`.
pub fn reference_nms(boxes: &[RotatedBox], scores: &[f64], thr: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| scores[j].partial_cmp(&scores[i]).unwrap().then(i.cmp(&j)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&k| rotated_iou(&boxes[k], &boxes[i]) <= thr) {
            kept.push(i);
        }
    }
    kept
}

/// Ground truth plus noisy detections of it (and some clutter) over a few images.
pub fn random_dataset<R: Rng>(
    rng: &mut R,
    images: usize,
    cats: &[&str],
) -> (Vec<DetectionRecord>, Vec<GroundTruthRecord>) {
    let mut gts = Vec::new();
    let mut dets = Vec::new();
    for img in 0..images {
        let image_id = format!("img{img}");
        for _ in 0..rng.gen_range(0..8) {
            let b = random_box(rng, AngleConvention::Le90, 200.0, 5.0, 40.0);
            let category = cats[rng.gen_range(0..cats.len())].to_string();
            gts.push(GroundTruthRecord {
                image_id: image_id.clone(),
                rbox: b,
                category: category.clone(),
                difficult: rng.gen_bool(0.15),
            });
            for _ in 0..rng.gen_range(0..3) {
                let jitter = b.translated(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
                let category =
                    if rng.gen_bool(0.8) { category.clone() } else { cats[rng.gen_range(0..cats.len())].to_string() };
                dets.push(DetectionRecord {
                    image_id: image_id.clone(),
                    rbox: jitter,
                    category,
                    score: rng.gen::<f64>(),
                });
            }
        }
        for _ in 0..rng.gen_range(0..4) {
            let b = random_box(rng, AngleConvention::Le90, 200.0, 5.0, 40.0);
            dets.push(DetectionRecord {
                image_id: image_id.clone(),
                rbox: b,
                category: cats[rng.gen_range(0..cats.len())].to_string(),
                score: rng.gen::<f64>(),
            });
        }
    }
    (dets, gts)
}
