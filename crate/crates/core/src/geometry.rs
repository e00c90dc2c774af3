//! Rotated-box representations and conversions.
//!
//! A [`RotatedBox`] is `(cx, cy, w, h, theta)` tagged with an
//! [`AngleConvention`]. Angles are radians, measured clockwise from the +x
//! axis in image coordinates (y pointing down); the corner expansion is
//! `center + R(theta) * (±w/2, ±h/2)` with `R = [[cos, -sin], [sin, cos]]`.
//!
//! Three conventions pin `(w, h, theta)` to a unique representative:
//!
//! | convention | theta range        | edge rule |
//! |------------|--------------------|-----------|
//! | `Oc`       | `[-pi/2, 0)`       | none      |
//! | `Le90`     | `[-pi/2, pi/2)`    | `w >= h`  |
//! | `Le135`    | `[-pi/4, 3pi/4)`   | `w >= h`  |
//!
//! Boxes that share a corner set describe the same rectangle regardless of
//! their parameters; [`RotatedBox::corner_distance`] compares them that way.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Internal geometric equality tolerance (px).
pub const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),
    #[error("negative box extent (w={w}, h={h})")]
    NegativeExtent { w: f64, h: f64 },
    #[error("box {0:?} violates the {1} convention")]
    OutsideConvention([f64; 5], AngleConvention),
    #[error("covariance is not symmetric (off-diagonal mismatch {0:e})")]
    NotSymmetric(f64),
    #[error("covariance is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("unknown angle convention `{0}` (expected oc, le90 or le135)")]
    UnknownConvention(String),
}

/// Angle definition used to pick a canonical `(w, h, theta)` for a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleConvention {
    /// OpenCV definition (pre-4.5 `minAreaRect`): theta in `[-pi/2, 0)`, no edge ordering.
    Oc,
    /// Long-edge definition, theta in `[-pi/2, pi/2)`.
    Le90,
    /// Long-edge definition, theta in `[-pi/4, 3pi/4)`.
    Le135,
}

impl AngleConvention {
    pub const ALL: [AngleConvention; 3] = [Self::Oc, Self::Le90, Self::Le135];

    /// Half-open admissible range `[lo, hi)`.
    pub fn range(self) -> (f64, f64) {
        match self {
            Self::Oc => (-FRAC_PI_2, 0.0),
            Self::Le90 => (-FRAC_PI_2, FRAC_PI_2),
            Self::Le135 => (-FRAC_PI_4, 3.0 * FRAC_PI_4),
        }
    }

    pub fn min_angle(self) -> f64 {
        self.range().0
    }

    pub fn requires_long_edge(self) -> bool {
        !matches!(self, Self::Oc)
    }

    pub fn contains_angle(self, theta: f64) -> bool {
        let (lo, hi) = self.range();
        theta >= lo && theta < hi
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Oc => "oc",
            Self::Le90 => "le90",
            Self::Le135 => "le135",
        }
    }
}

impl fmt::Display for AngleConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AngleConvention {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "oc" => Ok(Self::Oc),
            "le90" => Ok(Self::Le90),
            "le135" => Ok(Self::Le135),
            other => Err(GeometryError::UnknownConvention(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;

    #[inline]
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::new(x, y)
    }
}

/// Oriented rectangle `(cx, cy, w, h, theta)` in a given angle convention.
///
/// Fields are public for cheap access; use [`RotatedBox::new`] to get a value
/// that is checked against its convention, or [`normalize`] to coerce raw
/// parameters into one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
    pub convention: AngleConvention,
}

impl RotatedBox {
    /// Builds a box and checks it against `convention`.
    pub fn new(
        cx: f64,
        cy: f64,
        w: f64,
        h: f64,
        theta: f64,
        convention: AngleConvention,
    ) -> Result<Self, GeometryError> {
        let b = Self::unchecked(cx, cy, w, h, theta, convention);
        b.validate()?;
        Ok(b)
    }

    /// Builds a box without checking the convention invariants.
    pub const fn unchecked(cx: f64, cy: f64, w: f64, h: f64, theta: f64, convention: AngleConvention) -> Self {
        Self { cx, cy, w, h, theta, convention }
    }

    pub fn params(&self) -> [f64; 5] {
        [self.cx, self.cy, self.w, self.h, self.theta]
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn check_finite(&self) -> Result<(), GeometryError> {
        if self.params().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(GeometryError::NonFiniteInput("rotated box parameter"))
        }
    }

    /// Checks finiteness, non-negative extents, the angle range and the
    /// long-edge rule.
    pub fn validate(&self) -> Result<(), GeometryError> {
        self.check_finite()?;
        if self.w < 0.0 || self.h < 0.0 {
            return Err(GeometryError::NegativeExtent { w: self.w, h: self.h });
        }
        let conv = self.convention;
        if !conv.contains_angle(self.theta) || (conv.requires_long_edge() && self.w < self.h) {
            return Err(GeometryError::OutsideConvention(self.params(), conv));
        }
        Ok(())
    }

    /// Corners in counter-clockwise order (positive shoelace area), starting
    /// from the local `(-w/2, -h/2)` corner. Not canonicalized.
    #[inline]
    pub fn corners(&self) -> [Point; 4] {
        let (s, c) = self.theta.sin_cos();
        let hw = self.w * 0.5;
        let hh = self.h * 0.5;
        let local = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)];
        local.map(|(u, v)| Point::new(self.cx + c * u - s * v, self.cy + s * u + c * v))
    }

    /// Maximum vertex distance between the two corner sets after optimal
    /// vertex matching (the 4 cyclic shifts of the CCW order).
    pub fn corner_distance(&self, other: &RotatedBox) -> f64 {
        corner_set_distance(&self.corners(), &other.corners())
    }

    /// Same box moved by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self { cx: self.cx + dx, cy: self.cy + dy, ..*self }
    }

    /// Same box with center and extents multiplied by `s` (> 0).
    pub fn scaled(&self, s: f64) -> Self {
        Self { cx: self.cx * s, cy: self.cy * s, w: self.w * s, h: self.h * s, ..*self }
    }
}

/// Distance between two 4-vertex corner sets, minimized over cyclic vertex
/// matchings. Both inputs must share an orientation (both CCW here).
pub fn corner_set_distance(a: &[Point; 4], b: &[Point; 4]) -> f64 {
    (0..4).map(|shift| (0..4).map(|i| a[i].dist(b[(i + shift) % 4])).fold(0.0, f64::max)).fold(f64::INFINITY, f64::min)
}

/// Four-vertex polygon in DOTA corner form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadPoly {
    pub vertices: [Point; 4],
}

impl QuadPoly {
    pub fn new(vertices: [Point; 4]) -> Self {
        Self { vertices }
    }

    pub fn from_flat(c: [f64; 8]) -> Self {
        Self::new([Point::new(c[0], c[1]), Point::new(c[2], c[3]), Point::new(c[4], c[5]), Point::new(c[6], c[7])])
    }

    pub fn to_flat(&self) -> [f64; 8] {
        let v = &self.vertices;
        [v[0].x, v[0].y, v[1].x, v[1].y, v[2].x, v[2].y, v[3].x, v[3].y]
    }

    /// Shoelace signed area; positive for counter-clockwise order.
    pub fn signed_area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Reorders the vertices counter-clockwise and rotates the list so the
    /// lexicographically smallest `(x, y)` vertex comes first. Degenerate
    /// (zero-area) quads keep their winding.
    pub fn canonical(&self) -> Self {
        let mut v = self.vertices;
        if self.signed_area() < 0.0 {
            v.reverse();
        }
        let first = (0..4).min_by(|&i, &j| v[i].x.total_cmp(&v[j].x).then(v[i].y.total_cmp(&v[j].y))).unwrap_or(0);
        v.rotate_left(first);
        Self::new(v)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.vertices.map(|p| Point::new(p.x + dx, p.y + dy)))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.vertices.map(|p| Point::new(p.x * s, p.y * s)))
    }

    pub fn is_finite(&self) -> bool {
        self.vertices.iter().all(|p| p.x.is_finite() && p.y.is_finite())
    }
}

pub(crate) fn shoelace(pts: &[Point]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += pts[i].cross(pts[(i + 1) % n]);
    }
    0.5 * acc
}

/// Bivariate Gaussian `N(mu, sigma)` with a symmetric covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian2D {
    mu: [f64; 2],
    sigma: [[f64; 2]; 2],
}

impl Gaussian2D {
    /// Checks symmetry (within [`GEOM_EPS`]) and positive semidefiniteness.
    /// The stored covariance is symmetrized.
    pub fn new(mu: [f64; 2], sigma: [[f64; 2]; 2]) -> Result<Self, GeometryError> {
        if !mu.iter().chain(sigma.iter().flatten()).all(|v| v.is_finite()) {
            return Err(GeometryError::NonFiniteInput("gaussian parameter"));
        }
        let skew = (sigma[0][1] - sigma[1][0]).abs();
        if skew > GEOM_EPS {
            return Err(GeometryError::NotSymmetric(skew));
        }
        let off = 0.5 * (sigma[0][1] + sigma[1][0]);
        let g = Self { mu, sigma: [[sigma[0][0], off], [off, sigma[1][1]]] };
        let (_, lmin) = g.eigenvalues();
        if lmin < -GEOM_EPS {
            return Err(GeometryError::NotPsd(lmin));
        }
        Ok(g)
    }

    pub fn mu(&self) -> [f64; 2] {
        self.mu
    }

    pub fn sigma(&self) -> [[f64; 2]; 2] {
        self.sigma
    }

    pub(crate) fn xx(&self) -> f64 {
        self.sigma[0][0]
    }

    pub(crate) fn xy(&self) -> f64 {
        self.sigma[0][1]
    }

    pub(crate) fn yy(&self) -> f64 {
        self.sigma[1][1]
    }

    pub fn trace(&self) -> f64 {
        self.xx() + self.yy()
    }

    pub fn det(&self) -> f64 {
        self.xx() * self.yy() - self.xy() * self.xy()
    }

    /// Eigenvalues `(largest, smallest)`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let half_tr = 0.5 * self.trace();
        let half_diff = 0.5 * (self.xx() - self.yy());
        let r = half_diff.hypot(self.xy());
        (half_tr + r, half_tr - r)
    }
}

fn angle_mod(theta: f64, lo: f64, period: f64) -> (f64, i64) {
    let k = ((theta - lo) / period).floor();
    let mut t = theta - k * period;
    let mut k = k as i64;
    let hi = lo + period;
    if t >= hi {
        t -= period;
        k += 1;
    }
    if t < lo {
        t += period;
        k -= 1;
    }
    if t >= hi {
        // lo + period rounded back up to hi; lo is the exact representative
        t = lo;
    }
    (t, k)
}

/// Coerces raw `(w, h, theta)` into `target`'s canonical form without moving
/// any corner. May swap `w`/`h` together with a quarter-turn shift of theta,
/// and reduces theta modulo pi (modulo pi/2 for `Oc`).
pub fn normalize(b: &RotatedBox, target: AngleConvention) -> Result<RotatedBox, GeometryError> {
    b.check_finite()?;
    if b.w < 0.0 || b.h < 0.0 {
        return Err(GeometryError::NegativeExtent { w: b.w, h: b.h });
    }
    let (lo, _) = target.range();
    let (mut w, mut h, mut theta) = (b.w, b.h, b.theta);
    match target {
        AngleConvention::Oc => {
            let (t, k) = angle_mod(theta, lo, FRAC_PI_2);
            if k.rem_euclid(2) == 1 {
                std::mem::swap(&mut w, &mut h);
            }
            theta = t;
        }
        AngleConvention::Le90 | AngleConvention::Le135 => {
            if w < h {
                std::mem::swap(&mut w, &mut h);
                theta += FRAC_PI_2;
            }
            theta = angle_mod(theta, lo, PI).0;
        }
    }
    Ok(RotatedBox::unchecked(b.cx, b.cy, w, h, theta, target))
}

/// Re-expresses a valid box in another convention by routing through its
/// corner set.
pub fn convert(b: &RotatedBox, target: AngleConvention) -> Result<RotatedBox, GeometryError> {
    b.validate()?;
    quad_to_rbox(&rbox_to_quad(b)?, target)
}

/// Corner polygon of a box, canonicalized (CCW, lexicographically smallest
/// vertex first).
pub fn rbox_to_quad(b: &RotatedBox) -> Result<QuadPoly, GeometryError> {
    b.check_finite()?;
    Ok(QuadPoly::new(b.corners()).canonical())
}

fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    // Andrew's monotone chain, collinear points dropped.
    let mut hull: Vec<Point> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if (b - a).cross(p - a) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Minimum-area enclosing rectangle of the quad's convex hull, expressed in
/// `target`.
///
/// Every hull edge orientation is tried (the optimum is flush with one hull
/// edge). If all vertices coincide the result is a zero-size box at that
/// point with theta at the range minimum.
pub fn quad_to_rbox(q: &QuadPoly, target: AngleConvention) -> Result<RotatedBox, GeometryError> {
    if !q.is_finite() {
        return Err(GeometryError::NonFiniteInput("quad vertex"));
    }
    let hull = convex_hull(&q.vertices);
    if hull.len() == 1 {
        let p = hull[0];
        return Ok(RotatedBox::unchecked(p.x, p.y, 0.0, 0.0, target.min_angle(), target));
    }

    let n = hull.len();
    let mut best: Option<(f64, RotatedBox)> = None;
    for i in 0..n {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        let e = b - a;
        let len = e.x.hypot(e.y);
        if len == 0.0 {
            continue;
        }
        let u = Point::new(e.x / len, e.y / len);
        let v = Point::new(-u.y, u.x);
        let (mut umin, mut umax, mut vmin, mut vmax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &hull {
            let d = *p - a;
            let pu = d.dot(u);
            let pv = d.dot(v);
            umin = umin.min(pu);
            umax = umax.max(pu);
            vmin = vmin.min(pv);
            vmax = vmax.max(pv);
        }
        let w = umax - umin;
        let h = vmax - vmin;
        let area = w * h;
        if best.as_ref().is_some_and(|(ba, _)| area >= *ba) {
            continue;
        }
        let mu = 0.5 * (umin + umax);
        let mv = 0.5 * (vmin + vmax);
        let cx = a.x + mu * u.x + mv * v.x;
        let cy = a.y + mu * u.y + mv * v.y;
        let theta = u.y.atan2(u.x);
        best = Some((area, RotatedBox::unchecked(cx, cy, w, h, theta, target)));
    }
    let (_, raw) = best.expect("hull with >= 2 distinct points has a non-zero edge");
    normalize(&raw, target)
}

/// Gaussian embedding: `mu = center`, `sigma = R diag(w^2/4, h^2/4) R^T`.
pub fn rbox_to_gaussian(b: &RotatedBox) -> Result<Gaussian2D, GeometryError> {
    b.check_finite()?;
    let (s, c) = b.theta.sin_cos();
    let a = b.w * b.w * 0.25;
    let d = b.h * b.h * 0.25;
    let xx = a * c * c + d * s * s;
    let yy = a * s * s + d * c * c;
    let xy = (a - d) * c * s;
    Ok(Gaussian2D { mu: [b.cx, b.cy], sigma: [[xx, xy], [xy, yy]] })
}

/// Inverse of [`rbox_to_gaussian`]. The orientation of a square (equal
/// eigenvalues) is undefined; it is reported as the target range minimum.
pub fn gaussian_to_rbox(g: &Gaussian2D, target: AngleConvention) -> Result<RotatedBox, GeometryError> {
    let (l1, l2) = g.eigenvalues();
    if l2 < -GEOM_EPS {
        return Err(GeometryError::NotPsd(l2));
    }
    let w = 2.0 * l1.max(0.0).sqrt();
    let h = 2.0 * l2.max(0.0).sqrt();
    let [cx, cy] = g.mu;
    if w - h <= GEOM_EPS * w.max(1.0) {
        return Ok(RotatedBox::unchecked(cx, cy, w, h, target.min_angle(), target));
    }
    let theta = 0.5 * (2.0 * g.xy()).atan2(g.xx() - g.yy());
    normalize(&RotatedBox::unchecked(cx, cy, w, h, theta, target), target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use AngleConvention::*;

    fn rb(cx: f64, cy: f64, w: f64, h: f64, t: f64, c: AngleConvention) -> RotatedBox {
        RotatedBox::unchecked(cx, cy, w, h, t, c)
    }

    fn assert_same_box(a: &RotatedBox, b: &RotatedBox, tol: f64) {
        for (x, y) in a.params().iter().zip(b.params()) {
            assert_abs_diff_eq!(*x, y, epsilon = tol);
        }
        assert_eq!(a.convention, b.convention);
    }

    #[test]
    fn normalize_identity_when_valid() {
        let b = rb(0.0, 0.0, 4.0, 2.0, PI / 3.0, Le90);
        assert_eq!(normalize(&b, Le90).unwrap(), b);
    }

    #[test]
    fn normalize_swaps_short_long_edge() {
        let out = normalize(&rb(0.0, 0.0, 2.0, 4.0, 0.0, Le90), Le90).unwrap();
        assert_same_box(&out, &rb(0.0, 0.0, 4.0, 2.0, -FRAC_PI_2, Le90), 1e-12);
    }

    #[test]
    fn normalize_shifts_by_pi_into_le135() {
        let out = normalize(&rb(0.0, 0.0, 4.0, 2.0, -PI / 3.0, Le135), Le135).unwrap();
        assert_same_box(&out, &rb(0.0, 0.0, 4.0, 2.0, 2.0 * PI / 3.0, Le135), 1e-12);
    }

    #[test]
    fn normalize_into_oc_keeps_corners() {
        let src = rb(3.0, -1.0, 2.0, 5.0, 1.3, Le90);
        let out = normalize(&src, Oc).unwrap();
        assert!(Oc.contains_angle(out.theta));
        assert!(src.corner_distance(&out) < 1e-12);
        // theta = 1.3 is 3 quarter turns above [-pi/2, 0): edges swap
        assert_abs_diff_eq!(out.w, 5.0);
        assert_abs_diff_eq!(out.h, 2.0);
    }

    #[test]
    fn normalize_upper_bound_is_excluded() {
        let out = normalize(&rb(0.0, 0.0, 4.0, 2.0, FRAC_PI_2, Le90), Le90).unwrap();
        assert_eq!(out.theta, -FRAC_PI_2);
        let out = normalize(&rb(0.0, 0.0, 4.0, 2.0, 0.0, Oc), Oc).unwrap();
        assert_eq!(out.theta, -FRAC_PI_2);
        assert_eq!((out.w, out.h), (2.0, 4.0));
    }

    #[test]
    fn normalize_rejects_non_finite_and_negative() {
        assert!(matches!(
            normalize(&rb(f64::NAN, 0.0, 1.0, 1.0, 0.0, Le90), Le90),
            Err(GeometryError::NonFiniteInput(_))
        ));
        assert!(matches!(
            normalize(&rb(0.0, 0.0, 1.0, 1.0, f64::INFINITY, Le90), Oc),
            Err(GeometryError::NonFiniteInput(_))
        ));
        assert!(matches!(
            normalize(&rb(0.0, 0.0, -1.0, 1.0, 0.0, Le90), Oc),
            Err(GeometryError::NegativeExtent { .. })
        ));
    }

    #[test]
    fn convert_examples() {
        let out = convert(&rb(0.0, 0.0, 4.0, 2.0, PI / 3.0, Le90), Le135).unwrap();
        assert_same_box(&out, &rb(0.0, 0.0, 4.0, 2.0, PI / 3.0, Le135), 1e-9);
        let out = convert(&rb(0.0, 0.0, 4.0, 2.0, -PI / 3.0, Le90), Le135).unwrap();
        assert_same_box(&out, &rb(0.0, 0.0, 4.0, 2.0, 2.0 * PI / 3.0, Le135), 1e-9);
    }

    #[test]
    fn convert_rejects_box_outside_its_convention() {
        let bad = rb(0.0, 0.0, 2.0, 4.0, 0.0, Le90);
        assert!(matches!(convert(&bad, Oc), Err(GeometryError::OutsideConvention(..))));
    }

    #[test]
    fn quad_of_axis_aligned_square() {
        let q = rbox_to_quad(&rb(0.0, 0.0, 2.0, 2.0, 0.0, Le90)).unwrap();
        let expect = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
        for (p, e) in q.vertices.iter().zip(expect) {
            assert_eq!((p.x, p.y), e);
        }
        let q = rbox_to_quad(&rb(1.0, 1.0, 2.0, 2.0, 0.0, Le90)).unwrap();
        let expect = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)];
        for (p, e) in q.vertices.iter().zip(expect) {
            assert_eq!((p.x, p.y), e);
        }
    }

    #[test]
    fn quad_of_diamond() {
        let q = rbox_to_quad(&rb(0.0, 0.0, 2.0, 2.0, FRAC_PI_4, Le90)).unwrap();
        let s = 2f64.sqrt();
        // CCW starting from the leftmost vertex
        let expect = [(-s, 0.0), (0.0, -s), (s, 0.0), (0.0, s)];
        for (p, e) in q.vertices.iter().zip(expect) {
            assert_abs_diff_eq!(p.x, e.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p.y, e.1, epsilon = 1e-12);
        }
        assert!(q.signed_area() > 0.0);
    }

    #[test]
    fn canonical_reverses_clockwise_input() {
        let q = QuadPoly::from_flat([0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 2.0, 0.0]).canonical();
        assert!(q.signed_area() > 0.0);
        assert_eq!(q.vertices[0], Point::new(0.0, 0.0));
        assert_eq!(q.vertices[1], Point::new(2.0, 0.0));
    }

    #[test]
    fn canonical_keeps_degenerate_vertices() {
        let q = QuadPoly::from_flat([1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]).canonical();
        assert_eq!(q.vertices.len(), 4);
        assert_eq!(q.vertices[0], Point::new(0.0, 0.0));
    }

    #[test]
    fn quad_to_rbox_inverts_rbox_to_quad() {
        let b = rb(0.0, 0.0, 4.0, 2.0, PI / 6.0, Le90);
        let out = quad_to_rbox(&rbox_to_quad(&b).unwrap(), Le90).unwrap();
        assert_same_box(&out, &b, 1e-12);
    }

    fn brute_force_min_rect_area(pts: &[Point], samples: usize) -> f64 {
        (0..samples)
            .map(|k| {
                let phi = PI * k as f64 / samples as f64;
                let (s, c) = phi.sin_cos();
                let us = pts.iter().map(|p| p.x * c + p.y * s);
                let vs = pts.iter().map(|p| -p.x * s + p.y * c);
                let span = |it: &mut dyn Iterator<Item = f64>| {
                    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(x), h.max(x)));
                    hi - lo
                };
                span(&mut us.into_iter()) * span(&mut vs.into_iter())
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn quad_to_rbox_non_rectangular() {
        // Hull-edge orientations by hand: the axis-aligned edges give 2x2 = 4,
        // the slanted edge (2,1)->(0,2) gives (6/sqrt5)*(4/sqrt5) = 4.8.
        let q = QuadPoly::from_flat([0.0, 0.0, 2.0, 0.0, 2.0, 1.0, 0.0, 2.0]);
        let out = quad_to_rbox(&q, Le90).unwrap();
        assert_abs_diff_eq!(out.area(), 4.0, epsilon = 1e-12);
        assert!(out.area() <= brute_force_min_rect_area(&q.vertices, 3600) + 1e-12);
        for p in q.vertices {
            let d = p - out.center();
            let (s, c) = out.theta.sin_cos();
            let u = d.x * c + d.y * s;
            let v = -d.x * s + d.y * c;
            assert!(u.abs() <= out.w / 2.0 + 1e-9 && v.abs() <= out.h / 2.0 + 1e-9);
        }
    }

    #[test]
    fn quad_to_rbox_degenerate_point() {
        let q = QuadPoly::from_flat([5.0; 8]);
        for conv in AngleConvention::ALL {
            let out = quad_to_rbox(&q, conv).unwrap();
            assert_eq!(out, rb(5.0, 5.0, 0.0, 0.0, conv.min_angle(), conv));
        }
    }

    #[test]
    fn quad_to_rbox_segment() {
        let q = QuadPoly::from_flat([0.0, 0.0, 4.0, 0.0, 4.0, 0.0, 0.0, 0.0]);
        let out = quad_to_rbox(&q, Le90).unwrap();
        assert_abs_diff_eq!(out.w, 4.0);
        assert_abs_diff_eq!(out.h, 0.0);
        assert_abs_diff_eq!(out.cx, 2.0);
    }

    #[test]
    fn gaussian_examples() {
        for conv in AngleConvention::ALL {
            for t in [conv.min_angle(), conv.min_angle() + 0.3] {
                let g = rbox_to_gaussian(&rb(0.0, 0.0, 2.0, 2.0, t, conv)).unwrap();
                assert_eq!(g.mu(), [0.0, 0.0]);
                let s = g.sigma();
                assert_abs_diff_eq!(s[0][0], 1.0, epsilon = 1e-15);
                assert_abs_diff_eq!(s[1][1], 1.0, epsilon = 1e-15);
                assert_abs_diff_eq!(s[0][1], 0.0, epsilon = 1e-15);
            }
        }
        let g = rbox_to_gaussian(&rb(3.0, 4.0, 4.0, 2.0, 0.0, Le90)).unwrap();
        assert_eq!(g.mu(), [3.0, 4.0]);
        assert_eq!(g.sigma(), [[4.0, 0.0], [0.0, 1.0]]);
        // diag(4,1) conjugated by a quarter turn
        let g = rbox_to_gaussian(&rb(0.0, 0.0, 4.0, 2.0, FRAC_PI_2, Le135)).unwrap();
        let s = g.sigma();
        assert_abs_diff_eq!(s[0][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1][1], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[0][1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_trace_identity() {
        let b = rb(1.0, 2.0, 7.0, 3.0, 0.4, Le90);
        let g = rbox_to_gaussian(&b).unwrap();
        assert_abs_diff_eq!(g.trace(), (49.0 + 9.0) / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_to_rbox_examples() {
        let g = Gaussian2D::new([0.0, 0.0], [[4.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(gaussian_to_rbox(&g, Le90).unwrap(), rb(0.0, 0.0, 4.0, 2.0, 0.0, Le90));
        let g = Gaussian2D::new([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap();
        for conv in AngleConvention::ALL {
            let out = gaussian_to_rbox(&g, conv).unwrap();
            assert_eq!(out, rb(0.0, 0.0, 2.0, 2.0, conv.min_angle(), conv));
        }
    }

    #[test]
    fn gaussian_validation() {
        assert!(matches!(Gaussian2D::new([0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]]), Err(GeometryError::NotSymmetric(_))));
        assert!(matches!(Gaussian2D::new([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]]), Err(GeometryError::NotPsd(_))));
        assert!(Gaussian2D::new([0.0, 0.0], [[0.0, 0.0], [0.0, 0.0]]).is_ok());
    }

    #[test]
    fn convention_parsing() {
        assert_eq!("LE90".parse::<AngleConvention>().unwrap(), Le90);
        assert_eq!("oc".parse::<AngleConvention>().unwrap(), Oc);
        assert!("le45".parse::<AngleConvention>().is_err());
    }
}
