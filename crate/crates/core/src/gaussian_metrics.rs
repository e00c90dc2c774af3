//! Distances and overlap measures between the Gaussian embeddings of boxes.
//!
//! A box `(cx, cy, w, h, theta)` maps to `N(mu, sigma)` with `mu = (cx, cy)`
//! and `sigma = R diag(w^2/4, h^2/4) R^T` (see
//! [`rbox_to_gaussian`](crate::geometry::rbox_to_gaussian)). On top of that
//! embedding this module provides:
//!
//! - [`gwd`]: the 2-Wasserstein distance,
//! - [`kld`]: Kullback-Leibler divergence, forward or symmetrized,
//! - [`kfiou`]: a Kalman-fusion overlap ratio whose maximum is 1/3,
//! - [`loss_transform`]: the `1 - 1/(tau + ln(1 + d))` normalization used to
//!   turn a distance into a bounded loss.
//!
//! All 2x2 algebra is closed form; no eigensolver is involved.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{rbox_to_gaussian, Gaussian2D, GeometryError, RotatedBox};

/// Covariances with a determinant below this (px^4) are treated as singular.
pub const MIN_DET: f64 = 1e-24;
/// Smallest eigenvalue accepted for a positive-definite covariance.
pub const MIN_EIGENVALUE: f64 = 1e-12;
pub const DEFAULT_TAU: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("covariance is not positive definite (det {det:e}, min eigenvalue {min_eig:e})")]
    NotPd { det: f64, min_eig: f64 },
    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown distance kind `{0}` (expected gwd, kld, kld-sym or kfiou)")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GaussianDistanceKind {
    Gwd,
    KldForward,
    KldSymmetric,
    KfIou,
}

impl GaussianDistanceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gwd => "gwd",
            Self::KldForward => "kld",
            Self::KldSymmetric => "kld-sym",
            Self::KfIou => "kfiou",
        }
    }
}

impl fmt::Display for GaussianDistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GaussianDistanceKind {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gwd" => Ok(Self::Gwd),
            "kld" | "kld-forward" => Ok(Self::KldForward),
            "kld-sym" | "kld-symmetric" => Ok(Self::KldSymmetric),
            "kfiou" => Ok(Self::KfIou),
            other => Err(MetricError::UnknownKind(other.to_string())),
        }
    }
}

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    fn of(g: &Gaussian2D) -> Self {
        let s = g.sigma();
        Self::new(s[0][0], s[0][1], s[1][1])
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn add(&self, o: &Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    /// `tr(self * o)`, written so that swapping the operands is exact.
    pub fn trace_product(&self, o: &Sym2) -> f64 {
        self.xx * o.xx + self.yy * o.yy + 2.0 * self.xy * o.xy
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        let half_tr = 0.5 * self.trace();
        let r = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        (half_tr + r, half_tr - r)
    }

    pub fn inverse(&self) -> Sym2 {
        let d = self.det();
        Sym2::new(self.yy / d, -self.xy / d, self.xx / d)
    }

    /// `v^T self v`
    pub fn quad_form(&self, v: [f64; 2]) -> f64 {
        self.xx * v[0] * v[0] + 2.0 * self.xy * v[0] * v[1] + self.yy * v[1] * v[1]
    }

    pub fn to_array(&self) -> [[f64; 2]; 2] {
        [[self.xx, self.xy], [self.xy, self.yy]]
    }
}

/// Principal square root of a PSD 2x2 matrix:
/// `(S + sqrt(det S) I) / sqrt(tr S + 2 sqrt(det S))`.
///
/// Falls back to an eigendecomposition when the denominator vanishes (which
/// only happens for `S ~ 0`).
pub fn sqrt_psd(s: &Sym2) -> Sym2 {
    let root_det = s.det().max(0.0).sqrt();
    let denom = (s.trace() + 2.0 * root_det).max(0.0).sqrt();
    if denom >= 1e-12 {
        return Sym2::new((s.xx + root_det) / denom, s.xy / denom, (s.yy + root_det) / denom);
    }
    let (l1, l2) = s.eigenvalues();
    let (r1, r2) = (l1.max(0.0).sqrt(), l2.max(0.0).sqrt());
    let phi = 0.5 * (2.0 * s.xy).atan2(s.xx - s.yy);
    let (sn, c) = phi.sin_cos();
    Sym2::new(r1 * c * c + r2 * sn * sn, (r1 - r2) * c * sn, r1 * sn * sn + r2 * c * c)
}

fn require_pd(s: &Sym2) -> Result<(), MetricError> {
    let det = s.det();
    let (_, min_eig) = s.eigenvalues();
    if det < MIN_DET || min_eig <= MIN_EIGENVALUE {
        return Err(MetricError::NotPd { det, min_eig });
    }
    Ok(())
}

fn mean_delta(p: &Gaussian2D, q: &Gaussian2D) -> [f64; 2] {
    let (mp, mq) = (p.mu(), q.mu());
    [mq[0] - mp[0], mq[1] - mp[1]]
}

/// 2-Wasserstein distance between two Gaussians (px).
///
/// `sqrt(|mu_p - mu_q|^2 + tr(Sp + Sq - 2 (Sp^1/2 Sq Sp^1/2)^1/2))`. The
/// trace of the inner square root uses the same closed form as [`sqrt_psd`]:
/// for `M = Sp^1/2 Sq Sp^1/2`, `tr sqrt(M) = sqrt(tr M + 2 sqrt(det M))` with
/// `tr M = tr(Sp Sq)` and `det M = det Sp det Sq`.
pub fn gwd(p: &Gaussian2D, q: &Gaussian2D) -> f64 {
    let (sp, sq) = (Sym2::of(p), Sym2::of(q));
    let d = mean_delta(p, q);
    let center = d[0] * d[0] + d[1] * d[1];
    let root_det = (sp.det().max(0.0) * sq.det().max(0.0)).sqrt();
    let cross = (sp.trace_product(&sq) + 2.0 * root_det).max(0.0).sqrt();
    let bures = (sp.trace() + sq.trace() - 2.0 * cross).max(0.0);
    (center + bures).sqrt()
}

fn kld_forward(p: &Gaussian2D, q: &Gaussian2D) -> f64 {
    let (sp, sq) = (Sym2::of(p), Sym2::of(q));
    let q_inv = sq.inverse();
    let d = mean_delta(p, q);
    let value = 0.5 * (q_inv.trace_product(&sp) + q_inv.quad_form(d) - 2.0 + (sq.det() / sp.det()).ln());
    value.max(0.0)
}

/// `D(p || q)`, or `(D(p || q) + D(q || p)) / 2` when `symmetric`.
/// `p` is the prediction and `q` the target in the forward direction.
pub fn kld(p: &Gaussian2D, q: &Gaussian2D, symmetric: bool) -> Result<f64, MetricError> {
    require_pd(&Sym2::of(p))?;
    require_pd(&Sym2::of(q))?;
    let forward = kld_forward(p, q);
    if symmetric {
        Ok(0.5 * (forward + kld_forward(q, p)))
    } else {
        Ok(forward)
    }
}

/// Box "volume" of a covariance, `4 sqrt(det)`; equals `w * h` for a box.
fn volume(det: f64) -> f64 {
    4.0 * det.max(0.0).sqrt()
}

/// Kalman-fusion overlap of two boxes, in `[0, 1/3]`.
///
/// The fused covariance is `Sa (Sa + Sb)^-1 Sb`, whose determinant is
/// `det Sa det Sb / det(Sa + Sb)`. Its volume is attenuated by the Gaussian
/// product's center factor `exp(-1/2 d^T (Sa + Sb)^-1 d)` so that the
/// measure alone reflects center offsets. Identical boxes score exactly 1/3.
pub fn kfiou(a: &RotatedBox, b: &RotatedBox) -> Result<f64, MetricError> {
    let (ga, gb) = (rbox_to_gaussian(a)?, rbox_to_gaussian(b)?);
    let (sa, sb) = (Sym2::of(&ga), Sym2::of(&gb));
    require_pd(&sa)?;
    require_pd(&sb)?;
    let sum = sa.add(&sb);
    let (det_a, det_b, det_sum) = (sa.det(), sb.det(), sum.det());
    let d = mean_delta(&ga, &gb);
    let center = (-0.5 * sum.inverse().quad_form(d)).exp();
    let v3 = volume(det_a * det_b / det_sum) * center;
    let (va, vb) = (volume(det_a), volume(det_b));
    Ok((v3 / (va + vb - v3)).clamp(0.0, 1.0 / 3.0))
}

/// `1 - 1 / (tau + ln(1 + d))`, increasing in `d`, valued in `[1 - 1/tau, 1)`.
pub fn loss_transform(d: f64, tau: f64) -> Result<f64, MetricError> {
    if !d.is_finite() || !tau.is_finite() {
        return Err(MetricError::NonFiniteInput("loss_transform argument"));
    }
    if d < 0.0 {
        return Err(MetricError::InvalidArgument(format!("distance {d} is negative")));
    }
    if tau <= 0.0 {
        return Err(MetricError::InvalidArgument(format!("tau {tau} must be positive")));
    }
    Ok(1.0 - 1.0 / (tau + d.ln_1p()))
}

/// Dispatches on `kind` for a pair of boxes.
pub fn box_distance(kind: GaussianDistanceKind, a: &RotatedBox, b: &RotatedBox) -> Result<f64, MetricError> {
    match kind {
        GaussianDistanceKind::Gwd => Ok(gwd(&rbox_to_gaussian(a)?, &rbox_to_gaussian(b)?)),
        GaussianDistanceKind::KldForward => kld(&rbox_to_gaussian(a)?, &rbox_to_gaussian(b)?, false),
        GaussianDistanceKind::KldSymmetric => kld(&rbox_to_gaussian(a)?, &rbox_to_gaussian(b)?, true),
        GaussianDistanceKind::KfIou => kfiou(a, b),
    }
}
