//! Derivative scans of the analytic AtRT near singular rays, one-sided
//! limits, and the predicted jump and blow-up coefficients.

use alloc::format;
use alloc::vec::Vec;

use super::oracle::{analytic_atrt, upstream_integral};
use super::shapes::{ConvexShape, NestedConvexPhantom};
use crate::geometry::Point2;
use crate::grid::Ray;
use crate::math::{log, sin, sqrt};
use crate::source::Source;
use crate::{Error, Result};

/// Offsets per side of a default scan.
pub const LADDER_LEN: usize = 6;
/// Smallest default offset, relative to a unit domain.
pub const SMALLEST_OFFSET: f64 = 1e-5;
/// Exponent tolerance when checking for a `|s - s*|^{-1/2}` blow-up.
pub const EXPONENT_TOL: f64 = 0.1;

/// Half-width of the default ladder: `SMALLEST_OFFSET * 2^(LADDER_LEN - 1)`.
pub fn default_half_width() -> f64 {
    SMALLEST_OFFSET * (1u32 << (LADDER_LEN - 1)) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxis {
    S,
    Omega,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

/// Central-difference samples of `d/ds R_a f(s, omega*)` at `s = s* + offset`,
/// or of `d/domega R_a f(x*.theta_perp, omega)` at `omega = omega* + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeScan {
    pub axis: ScanAxis,
    pub s_star: f64,
    pub omega_star: f64,
    /// Pivot point of an `omega` scan.
    pub anchor: Option<Point2>,
    /// Ascending, symmetric about 0, without 0.
    pub offsets: Vec<f64>,
    pub values: Vec<f64>,
}

impl DerivativeScan {
    /// `(|offset|, value)` pairs on one side, nearest first.
    pub fn side(&self, side: Side) -> (Vec<f64>, Vec<f64>) {
        let mut pairs: Vec<(f64, f64)> = self
            .offsets
            .iter()
            .zip(&self.values)
            .filter(|(o, _)| **o * side.sign() > 0.0)
            .map(|(o, v)| (o.abs(), *v))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.into_iter().unzip()
    }
}

/// Dyadic ladder `±half_width * 2^-k`, `k = 0..n/2`, in ascending order.
pub fn dyadic_offsets(half_width: f64, n: usize) -> Result<Vec<f64>> {
    if n < 8 || n % 2 != 0 {
        return Err(Error::invalid("scan needs an even number of offsets, at least 8"));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::invalid("scan half-width must be positive"));
    }
    let m = n / 2;
    let positive: Vec<f64> = (0..m).map(|k| half_width / (1u64 << (m - 1 - k)) as f64).collect();
    Ok(positive.iter().rev().map(|o| -o).chain(positive.iter().copied()).collect())
}

// Central-difference step at a given offset; well inside the offset so the
// stencil never straddles the singular ray.
fn diff_step(offset: f64, half_width: f64, n: usize) -> f64 {
    (offset.abs() / 64.0).min(half_width / (10 * n) as f64)
}

pub fn ds_scan<S: Source + ?Sized>(
    ph: &NestedConvexPhantom,
    src: &S,
    s_star: f64,
    omega_star: f64,
    half_width: f64,
    n: usize,
) -> Result<DerivativeScan> {
    let offsets = dyadic_offsets(half_width, n)?;
    let r = |s: f64| analytic_atrt(ph, src, &Ray::new(s, omega_star));
    let values = offsets
        .iter()
        .map(|&o| {
            let h = diff_step(o, half_width, n);
            let s = s_star + o;
            (r(s + h) - r(s - h)) / (2.0 * h)
        })
        .collect();
    Ok(DerivativeScan { axis: ScanAxis::S, s_star, omega_star, anchor: None, offsets, values })
}

/// Scan with the ray pivoting about `anchor`: `s(omega) = anchor . theta_perp(omega)`.
pub fn domega_scan<S: Source + ?Sized>(
    ph: &NestedConvexPhantom,
    src: &S,
    anchor: Point2,
    omega_star: f64,
    half_width: f64,
    n: usize,
) -> Result<DerivativeScan> {
    let offsets = dyadic_offsets(half_width, n)?;
    let r = |w: f64| analytic_atrt(ph, src, &Ray::through(anchor, w));
    let values = offsets
        .iter()
        .map(|&o| {
            let h = diff_step(o, half_width, n);
            let w = omega_star + o;
            (r(w + h) - r(w - h)) / (2.0 * h)
        })
        .collect();
    Ok(DerivativeScan {
        axis: ScanAxis::Omega,
        s_star: Ray::through(anchor, omega_star).s,
        omega_star,
        anchor: Some(anchor),
        offsets,
        values,
    })
}

/// Value at `x = 0` of the interpolating polynomial through `(x_k, y_k)`
/// (Neville's scheme). With `x_k = delta_k^p` this is Richardson
/// extrapolation for an expansion in powers of `delta^p`.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p: Vec<f64> = ys.to_vec();
    let n = p.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i]);
        }
    }
    p.first().copied().unwrap_or(0.0)
}

/// Limit of `scan` as the offset shrinks to 0 from `side`, assuming an
/// expansion in integer powers of the offset.
pub fn one_sided_limit(scan: &DerivativeScan, side: Side) -> f64 {
    let (d, v) = scan.side(side);
    extrapolate_to_zero(&d, &v)
}

/// Least-squares slope of `log |value|` against `log |offset|` on one side.
pub fn fit_exponent(scan: &DerivativeScan, side: Side) -> f64 {
    let (d, v) = scan.side(side);
    let xs: Vec<f64> = d.iter().map(|&x| log(x)).collect();
    let ys: Vec<f64> = v.iter().map(|&y| log(y.abs().max(f64::MIN_POSITIVE))).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

// A blow-up on either side rules out a bounded corner jump.
fn bounded_sides(scan: &DerivativeScan) -> Result<()> {
    for side in [Side::Plus, Side::Minus] {
        let e = fit_exponent(scan, side);
        if e < -0.25 {
            return Err(Error::HypothesisViolation(format!(
                "derivative grows like |offset|^{e:.3}: the ray is tangent to a boundary"
            )));
        }
    }
    Ok(())
}

/// `lim_{0+} - lim_{0-}` of an `s` scan.
pub fn measure_corner_jump(scan: &DerivativeScan) -> Result<f64> {
    bounded_sides(scan)?;
    Ok(one_sided_limit(scan, Side::Plus) - one_sided_limit(scan, Side::Minus))
}

/// `lim |s - s*|^{1/2} dR/ds` from `side`, extrapolated in powers of `|s - s*|^{1/2}`.
pub fn measure_tangent_coefficient(scan: &DerivativeScan, side: Side) -> Result<f64> {
    let e = fit_exponent(scan, side);
    if (e + 0.5).abs() > EXPONENT_TOL {
        return Err(Error::HypothesisViolation(format!(
            "fitted exponent {e:.3} is not -1/2 within {EXPONENT_TOL}"
        )));
    }
    Ok(weighted_limit(scan, side))
}

// Extrapolated limit of |sin delta|^{1/2} v (s scans: |delta|^{1/2} v).
fn weighted_limit(scan: &DerivativeScan, side: Side) -> f64 {
    let (d, v) = scan.side(side);
    let weight = |x: f64| match scan.axis {
        ScanAxis::S => sqrt(x),
        ScanAxis::Omega => sqrt(sin(x).abs()),
    };
    let xs: Vec<f64> = d.iter().map(|&x| sqrt(x)).collect();
    let ys: Vec<f64> = d.iter().zip(&v).map(|(&x, &y)| weight(x) * y).collect();
    extrapolate_to_zero(&xs, &ys)
}

fn check_on_ray(p: Point2, ray: &Ray) -> Result<f64> {
    if (p.dot(ray.normal()) - ray.s).abs() > 1e-9 {
        return Err(Error::invalid("point does not lie on the ray"));
    }
    Ok(p.dot(ray.direction()))
}

/// Predicted `lim_{0+} - lim_{0-}` of `dR/ds` for a ray through the corner
/// `corner` of one polygon, with no other corner or tangency on the ray.
///
/// Each boundary branch `k` leaving the corner crosses nearby parallel rays at
/// `t = t* + tan(alpha_k) (s - s*)` on one side only; crossing it changes `a`
/// by `b_k`, and moving the crossing downstream of the upstream source changes
/// the attenuation of everything before it. That gives
/// `jump = I* (sum_{+} b_k tan alpha_k - sum_{-} b_k tan alpha_k)` with
/// `I* = int_{-inf}^{t*} f e^{-Da}`.
pub fn predict_corner_jump<S: Source + ?Sized>(
    ph: &NestedConvexPhantom,
    src: &S,
    corner: Point2,
    ray: &Ray,
) -> Result<f64> {
    let t_star = check_on_ray(corner, ray)?;
    let (theta, normal) = (ray.direction(), ray.normal());
    let mut found = None;
    for (j, set) in ph.sets().iter().enumerate() {
        match set {
            ConvexShape::Polygon { vertices } => {
                let n = vertices.len();
                for (i, v) in vertices.iter().enumerate() {
                    if v.distance(corner) <= 1e-9 {
                        if found.is_some() {
                            return Err(Error::HypothesisViolation("corner shared by two sets".into()));
                        }
                        found = Some((j, vertices[(i + n - 1) % n], *v, vertices[(i + 1) % n]));
                    } else if (v.dot(normal) - ray.s).abs() <= 1e-9 {
                        return Err(Error::HypothesisViolation("ray passes through two corners".into()));
                    }
                }
            }
            ConvexShape::Disk { center, radius } => {
                if ((center.dot(normal) - ray.s).abs() - radius).abs() <= 1e-9 {
                    return Err(Error::HypothesisViolation("ray is tangent to a disk".into()));
                }
            }
        }
    }
    let Some((j, prev, v, next)) = found else {
        return Err(Error::invalid("point is not a polygon corner"));
    };
    let c = ph.values()[j];
    let mut sum = 0.0;
    // Edges prev -> v and v -> next, each written as v + u e with u >= 0.
    for (e, edge) in [(prev - v, v - prev), (next - v, next - v)] {
        let across = e.dot(normal);
        if across.abs() <= 1e-12 * e.norm() {
            return Err(Error::HypothesisViolation("ray runs along a polygon edge".into()));
        }
        let tan_alpha = e.dot(theta) / across;
        let outward = Point2::new(edge.y, -edge.x);
        let b = if outward.dot(theta) < 0.0 { c } else { -c };
        sum += across.signum() * b * tan_alpha;
    }
    Ok(upstream_integral(ph, src, ray, t_star) * sum)
}

/// Predicted `lim |s - s*|^{1/2} dR/ds` on the side where the ray enters the
/// set tangent at `point`: `-sigma c sqrt(2/kappa) I*`, where `c` is the
/// jump entering the set and `sigma = ±1` says whether increasing `s` moves
/// the ray inward. On the other side the limit is 0. A flat edge (`kappa = 0`)
/// gives `±inf`.
pub fn predict_tangent_coefficient<S: Source + ?Sized>(
    ph: &NestedConvexPhantom,
    src: &S,
    point: Point2,
    ray: &Ray,
) -> Result<f64> {
    let t_star = check_on_ray(point, ray)?;
    let normal = ray.normal();
    let (j, dist) = ph
        .nearest_boundary(point)
        .ok_or_else(|| Error::invalid("phantom has no boundaries"))?;
    if dist > 1e-9 {
        return Err(Error::invalid("point is not on a set boundary"));
    }
    let c = ph.values()[j];
    let set = &ph.sets()[j];
    let (sigma, kappa) = match set {
        ConvexShape::Disk { center, radius } => {
            let offset = center.dot(normal) - ray.s;
            if (offset.abs() - radius).abs() > 1e-9 {
                return Err(Error::HypothesisViolation("ray is not tangent at the point".into()));
            }
            (offset.signum(), 1.0 / radius)
        }
        ConvexShape::Polygon { vertices } => {
            let along_edge = super::shapes::edges(vertices).any(|(a, b)| {
                (a.dot(normal) - ray.s).abs() <= 1e-9 && (b.dot(normal) - ray.s).abs() <= 1e-9
            });
            if !along_edge {
                return Err(Error::HypothesisViolation(
                    "a polygon is only tangent along an edge".into(),
                ));
            }
            let inside = vertices.iter().map(|v| v.dot(normal) - ray.s).fold(0.0, |m: f64, d| {
                if d.abs() > m.abs() {
                    d
                } else {
                    m
                }
            });
            (inside.signum(), 0.0)
        }
    };
    let upstream = upstream_integral(ph, src, ray, t_star);
    if kappa == 0.0 {
        let scale = -sigma * c * upstream;
        return Ok(if scale == 0.0 { 0.0 } else { scale.signum() * f64::INFINITY });
    }
    Ok(-sigma * c * sqrt(2.0 / kappa) * upstream)
}

/// `max_side |lim |sin(omega - omega*)|^{1/2} d/domega R(x*.theta_perp, theta)|`
/// for the pivot `anchor`. It vanishes when `anchor` is the tangency point.
pub fn omega_limit<S: Source + ?Sized>(
    ph: &NestedConvexPhantom,
    src: &S,
    anchor: Point2,
    omega_star: f64,
) -> Result<f64> {
    let scan = domega_scan(ph, src, anchor, omega_star, default_half_width(), 2 * LADDER_LEN)?;
    Ok(weighted_limit(&scan, Side::Plus).abs().max(weighted_limit(&scan, Side::Minus).abs()))
}

/// Candidate on `ray` where pivoting the ray removes the `1/2`-order blow-up.
pub fn locate_tangency_point<S: Source + ?Sized>(
    ph: &NestedConvexPhantom,
    src: &S,
    ray: &Ray,
    candidates: &[Point2],
) -> Result<Point2> {
    locate_by(candidates, ray, |p| omega_limit(ph, src, p, ray.omega))
}

/// Candidate on `ray` where pivoting the ray removes the derivative jump of
/// a corner ray.
pub fn locate_corner_point<S: Source + ?Sized>(
    ph: &NestedConvexPhantom,
    src: &S,
    ray: &Ray,
    candidates: &[Point2],
) -> Result<Point2> {
    locate_by(candidates, ray, |p| {
        let scan = domega_scan(ph, src, p, ray.omega, default_half_width(), 2 * LADDER_LEN)?;
        Ok((one_sided_limit(&scan, Side::Plus) - one_sided_limit(&scan, Side::Minus)).abs())
    })
}

fn locate_by(
    candidates: &[Point2],
    ray: &Ray,
    mut score: impl FnMut(Point2) -> Result<f64>,
) -> Result<Point2> {
    if candidates.len() < 2 {
        return Err(Error::invalid("need at least two candidate points"));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    for &p in candidates {
        check_on_ray(p, ray)?;
        scores.push(score(p)?);
    }
    let (best, lo) = scores
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, 0.0));
    let hi = scores.iter().copied().fold(0.0, f64::max);
    if !(hi - lo > 1e-3 * hi) {
        return Err(Error::Degenerate("all candidate points give the same limit".into()));
    }
    Ok(candidates[best])
}

/// Whether `R_a f` itself jumps across `ray` (a ray containing a boundary
/// segment with source upstream of its far end).
///
/// The jump must exceed ten times the quadrature tolerance and ten times the
/// extrapolation uncertainty (the spread between extrapolating from all
/// offsets and from all but the widest).
pub fn detect_flat_segment<S: Source + ?Sized>(ph: &NestedConvexPhantom, src: &S, ray: &Ray) -> bool {
    let (plus, plus_err) = value_limit(ph, src, ray, 1.0);
    let (minus, minus_err) = value_limit(ph, src, ray, -1.0);
    let tol = 1e-10 * (1.0 + plus.abs().max(minus.abs()));
    (plus - minus).abs() > 10.0 * tol.max(plus_err + minus_err)
}

// One-sided limit of R itself across the ray, with an error estimate.
fn value_limit<S: Source + ?Sized>(ph: &NestedConvexPhantom, src: &S, ray: &Ray, sign: f64) -> (f64, f64) {
    let hw = default_half_width();
    let offsets: Vec<f64> = (0..LADDER_LEN).map(|k| hw / (1u64 << (LADDER_LEN - 1 - k)) as f64).collect();
    let v: Vec<f64> = offsets
        .iter()
        .map(|&o| analytic_atrt(ph, src, &Ray::new(ray.s + sign * o, ray.omega)))
        .collect();
    // R may carry a square-root cusp (tangent rays), so expand in sqrt(delta).
    let xs: Vec<f64> = offsets.iter().map(|&o| sqrt(o)).collect();
    let all = extrapolate_to_zero(&xs, &v);
    let fewer = extrapolate_to_zero(&xs[..LADDER_LEN - 1], &v[..LADDER_LEN - 1]);
    (all, (all - fewer).abs())
}

/// What kind of singularity a ray carries, read off from scans of `R_a f` only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayClass {
    /// `dR/ds` continuous.
    Regular,
    /// Bounded jump of `dR/ds`.
    Corner,
    /// `|s - s*|^{-1/2}` blow-up of `dR/ds`.
    Tangent,
    /// `R` itself jumps.
    FlatSegment,
}

/// The blow-up test runs first: near a square-root cusp any error in `s*`
/// shows up as an apparent jump of `R` of order `sqrt(error)`.
pub fn classify_ray<S: Source + ?Sized>(ph: &NestedConvexPhantom, src: &S, ray: &Ray) -> Result<RayClass> {
    let scan = ds_scan(ph, src, ray.s, ray.omega, default_half_width(), 2 * LADDER_LEN)?;
    if bounded_sides(&scan).is_err() {
        return Ok(RayClass::Tangent);
    }
    if detect_flat_segment(ph, src, ray) {
        return Ok(RayClass::FlatSegment);
    }
    let (plus, minus) = (one_sided_limit(&scan, Side::Plus), one_sided_limit(&scan, Side::Minus));
    if (plus - minus).abs() > 1e-4 * (1.0 + plus.abs().max(minus.abs())) {
        Ok(RayClass::Corner)
    } else {
        Ok(RayClass::Regular)
    }
}
