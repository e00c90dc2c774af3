//! Exact rotated IoU and rotated NMS.
//!
//! Intersections are computed by Sutherland-Hodgman clipping of one box's
//! corner polygon against the other's four half-planes, followed by the
//! shoelace formula. Everything here is a pure function of its inputs.

use std::cmp::Ordering;

use smallvec::SmallVec;
use thiserror::Error;

use crate::geometry::{shoelace, Point, RotatedBox, GEOM_EPS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OverlapError {
    #[error("IoU threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
}

type PolyBuf = SmallVec<[Point; 16]>;

/// Counter-clockwise convex polygon produced by clipping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexPoly {
    vertices: PolyBuf,
}

impl ConvexPoly {
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> f64 {
        shoelace(&self.vertices).max(0.0)
    }
}

/// A box with a confidence score and its position in the caller's batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub rbox: RotatedBox,
    pub score: f64,
    pub index: usize,
}

impl ScoredBox {
    pub fn new(rbox: RotatedBox, score: f64, index: usize) -> Self {
        Self { rbox, score, index }
    }
}

/// Corner polygon plus cached area and bounding radius; what the batched
/// kernels work on.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PreparedBox {
    corners: [Point; 4],
    center: Point,
    radius: f64,
    area: f64,
}

impl PreparedBox {
    pub(crate) fn new(b: &RotatedBox) -> Self {
        let corners = b.corners();
        let degenerate = !(b.w > 0.0 && b.h > 0.0);
        Self {
            corners,
            center: b.center(),
            radius: 0.5 * b.w.hypot(b.h),
            area: if degenerate { 0.0 } else { shoelace(&corners).max(0.0) },
        }
    }
}

/// Clips `subject` to the inside (left side) of the directed line `a -> b`.
/// Points within [`GEOM_EPS`] of the line count as inside.
fn clip_half_plane(subject: &[Point], a: Point, b: Point, out: &mut PolyBuf) {
    out.clear();
    let n = subject.len();
    if n == 0 {
        return;
    }
    let edge = b - a;
    let len = edge.x.hypot(edge.y);
    if len == 0.0 {
        out.extend_from_slice(subject);
        return;
    }
    let dist = |p: Point| edge.cross(p - a) / len;
    let mut prev = subject[n - 1];
    let mut prev_d = dist(prev);
    for &cur in subject {
        let cur_d = dist(cur);
        let cur_in = cur_d >= -GEOM_EPS;
        let prev_in = prev_d >= -GEOM_EPS;
        if cur_in != prev_in {
            let t = prev_d / (prev_d - cur_d);
            out.push(Point::new(prev.x + (cur.x - prev.x) * t, prev.y + (cur.y - prev.y) * t));
        }
        if cur_in {
            out.push(cur);
        }
        prev = cur;
        prev_d = cur_d;
    }
}

/// Clips an arbitrary simple polygon against a counter-clockwise convex one.
pub(crate) fn clip_polygon(subject: &[Point], clip: &[Point]) -> PolyBuf {
    let mut cur: PolyBuf = SmallVec::from_slice(subject);
    let mut next = PolyBuf::new();
    let m = clip.len();
    for i in 0..m {
        clip_half_plane(&cur, clip[i], clip[(i + 1) % m], &mut next);
        std::mem::swap(&mut cur, &mut next);
        if cur.len() < 3 {
            cur.clear();
            break;
        }
    }
    cur
}

fn prepared_intersection(a: &PreparedBox, b: &PreparedBox) -> f64 {
    if a.area == 0.0 || b.area == 0.0 {
        return 0.0;
    }
    if a.center.dist(b.center) > a.radius + b.radius {
        return 0.0;
    }
    let poly = clip_polygon(&a.corners, &b.corners);
    shoelace(&poly).clamp(0.0, a.area.min(b.area))
}

pub(crate) fn prepared_iou(a: &PreparedBox, b: &PreparedBox) -> f64 {
    let inter = prepared_intersection(a, b);
    let union = a.area + b.area - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// The convex polygon `a ∩ b` (empty if the boxes are disjoint or degenerate).
pub fn intersection_polygon(a: &RotatedBox, b: &RotatedBox) -> ConvexPoly {
    let (pa, pb) = (PreparedBox::new(a), PreparedBox::new(b));
    if pa.area == 0.0 || pb.area == 0.0 {
        return ConvexPoly::default();
    }
    ConvexPoly { vertices: clip_polygon(&pa.corners, &pb.corners) }
}

/// Area of `a ∩ b` in px².
pub fn intersect_area(a: &RotatedBox, b: &RotatedBox) -> f64 {
    prepared_intersection(&PreparedBox::new(a), &PreparedBox::new(b))
}

/// Rotated intersection-over-union. Zero when either box is degenerate.
pub fn rotated_iou(a: &RotatedBox, b: &RotatedBox) -> f64 {
    prepared_iou(&PreparedBox::new(a), &PreparedBox::new(b))
}

/// Row-major dense matrix of IoU values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IouMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl IouMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// `rotated_iou(as[i], bs[j])` for every pair.
pub fn iou_matrix(a: &[RotatedBox], b: &[RotatedBox]) -> IouMatrix {
    let pa: Vec<_> = a.iter().map(PreparedBox::new).collect();
    let pb: Vec<_> = b.iter().map(PreparedBox::new).collect();
    let mut data = Vec::with_capacity(pa.len() * pb.len());
    for x in &pa {
        data.extend(pb.iter().map(|y| prepared_iou(x, y)));
    }
    IouMatrix { rows: pa.len(), cols: pb.len(), data }
}

fn check_threshold(thr: f64) -> Result<(), OverlapError> {
    if (0.0..=1.0).contains(&thr) {
        Ok(())
    } else {
        Err(OverlapError::InvalidThreshold(thr))
    }
}

/// Descending score, ties by ascending batch index.
pub(crate) fn score_order(a: &ScoredBox, b: &ScoredBox) -> Ordering {
    b.score.total_cmp(&a.score).then(a.index.cmp(&b.index))
}

/// Greedy rotated NMS. Returns the `index` of each kept box, in keep order.
///
/// A candidate is suppressed when its IoU with a kept box is strictly greater
/// than `iou_thr`.
pub fn rotated_nms(dets: &[ScoredBox], iou_thr: f64) -> Result<Vec<usize>, OverlapError> {
    check_threshold(iou_thr)?;
    let mut order: Vec<&ScoredBox> = dets.iter().collect();
    order.sort_by(|a, b| score_order(a, b));
    let prepared: Vec<PreparedBox> = order.iter().map(|d| PreparedBox::new(&d.rbox)).collect();

    let mut suppressed = vec![false; order.len()];
    let mut keep = Vec::new();
    for i in 0..order.len() {
        if suppressed[i] {
            continue;
        }
        keep.push(order[i].index);
        let top = &prepared[i];
        for j in i + 1..order.len() {
            if !suppressed[j] && prepared_iou(top, &prepared[j]) > iou_thr {
                suppressed[j] = true;
            }
        }
    }
    Ok(keep)
}
