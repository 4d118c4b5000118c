//! Boundary recovery: singular rays from sinogram scans, their tangency or
//! corner points, then convex-hull peeling.

use alloc::format;
use alloc::vec::Vec;

use super::oracle::analytic_atrt;
use super::scan::{classify_ray, locate_corner_point, locate_tangency_point, RayClass};
use super::shapes::NestedConvexPhantom;
use crate::geometry::Point2;
use crate::grid::Ray;
use crate::math::sqrt;
use crate::source::Source;
use crate::{Error, Result};

/// Fewest located points that make up one recovered set.
pub const MIN_POINTS_PER_SET: usize = 5;

/// Points of one peeled layer and their convex hull (anticlockwise).
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredSet {
    pub points: Vec<Point2>,
    pub hull: Vec<Point2>,
}

/// A singular ray found in a sinogram scan and the boundary point on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPoint {
    pub ray: Ray,
    pub class: RayClass,
    pub point: Point2,
}

/// Offsets `s*` in `(s_grid[0], s_grid[last])` where `s -> R(s, omega)` is
/// singular, each refined to about `1e-10`.
///
/// A kink or square-root cusp makes the second difference stand out against
/// the `O(h^2)` background; the bracket is then halved towards the half with
/// the larger local second difference.
pub fn singular_offsets<S: Source + ?Sized>(
    ph: &NestedConvexPhantom,
    src: &S,
    omega: f64,
    s_grid: &[f64],
) -> Result<Vec<f64>> {
    if s_grid.len() < 5 || s_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("s grid needs at least 5 strictly increasing values"));
    }
    let r = |s: f64| analytic_atrt(ph, src, &Ray::new(s, omega));
    let values: Vec<f64> = s_grid.iter().map(|&s| r(s)).collect();
    let n = values.len();
    let mut second = alloc::vec![0.0; n];
    for i in 1..n - 1 {
        let (hl, hr) = (s_grid[i] - s_grid[i - 1], s_grid[i + 1] - s_grid[i]);
        let h = 0.5 * (hl + hr);
        // Second divided difference scaled back to a plain second difference.
        second[i] = ((values[i + 1] - values[i]) / hr - (values[i] - values[i - 1]) / hl).abs() * h;
    }
    let mut positive: Vec<f64> = second.iter().copied().filter(|&d| d > 0.0).collect();
    if positive.is_empty() {
        return Ok(Vec::new());
    }
    positive.sort_by(f64::total_cmp);
    let median = positive[positive.len() / 2];
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = (20.0 * median).max(1e-9 * (1.0 + scale));
    // (offset, peak height)
    let mut found: Vec<(f64, f64)> = Vec::new();
    for i in 1..n - 1 {
        if second[i] > threshold && second[i] > second[i - 1] && second[i] >= second[i + 1] {
            let s = refine(&r, s_grid[i - 1], s_grid[i + 1]);
            // One cusp can leave two peaks, and the weaker one may refine to
            // a bracket end. The grid cannot separate singularities closer
            // than two spacings anyway, so keep the stronger peak.
            match found.last_mut() {
                Some(last) if s - last.0 <= s_grid[i + 1] - s_grid[i - 1] => {
                    if second[i] > last.1 {
                        *last = (s, second[i]);
                    }
                }
                _ => found.push((s, second[i])),
            }
        }
    }
    Ok(found.into_iter().map(|(s, _)| s).collect())
}

// Each step compares second differences centred at the quarter points and
// the midpoint; the largest one straddles the cusp, and its stencil becomes
// the next (half as wide) bracket.
fn refine(r: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut r_lo = r(lo);
    let mut r_hi = r(hi);
    let mut r_mid = r(0.5 * (lo + hi));
    while hi - lo > 1e-10 {
        let q = 0.25 * (hi - lo);
        let (r_q1, r_q3) = (r(lo + q), r(hi - q));
        let at_q1 = (r_lo - 2.0 * r_q1 + r_mid).abs();
        let at_mid = (r_q1 - 2.0 * r_mid + r_q3).abs();
        let at_q3 = (r_mid - 2.0 * r_q3 + r_hi).abs();
        if at_mid >= at_q1 && at_mid >= at_q3 {
            (lo, hi) = (lo + q, hi - q);
            (r_lo, r_hi) = (r_q1, r_q3);
        } else if at_q1 > at_q3 {
            hi = lo + 2.0 * q;
            r_hi = r_mid;
            r_mid = r_q1;
        } else {
            lo = hi - 2.0 * q;
            r_lo = r_mid;
            r_mid = r_q3;
        }
    }
    0.5 * (lo + hi)
}

/// Candidate refinement along a ray: repeated grids of `points` candidates,
/// each centred on the previous winner and four spacings wide.
fn locate_on_ray<S: Source + ?Sized>(
    ph: &NestedConvexPhantom,
    src: &S,
    ray: &Ray,
    class: RayClass,
    t_range: (f64, f64),
) -> Result<Point2> {
    const POINTS: usize = 21;
    const PASSES: usize = 5;
    let (mut lo, mut hi) = t_range;
    let mut best = ray.point(0.5 * (lo + hi));
    for _ in 0..PASSES {
        let step = (hi - lo) / (POINTS - 1) as f64;
        let candidates: Vec<Point2> = (0..POINTS).map(|k| ray.point(lo + k as f64 * step)).collect();
        best = match class {
            RayClass::Corner => locate_corner_point(ph, src, ray, &candidates)?,
            _ => locate_tangency_point(ph, src, ray, &candidates)?,
        };
        let t = ray.param_of(best);
        lo = t - 2.0 * step;
        hi = t + 2.0 * step;
    }
    Ok(best)
}

/// Scans every `omega` in `omega_grid` over `s_grid`, classifies the singular
/// rays and locates the boundary point on each tangent or corner ray.
pub fn singular_points<S: Source + ?Sized>(
    ph: &NestedConvexPhantom,
    src: &S,
    s_grid: &[f64],
    omega_grid: &[f64],
) -> Result<Vec<SingularPoint>> {
    let reach = s_grid[0].abs().max(s_grid[s_grid.len() - 1].abs());
    let mut out = Vec::new();
    for &omega in omega_grid {
        for s in singular_offsets(ph, src, omega, s_grid)? {
            let ray = Ray::new(s, omega);
            let class = classify_ray(ph, src, &ray)?;
            if !matches!(class, RayClass::Tangent | RayClass::Corner) {
                continue;
            }
            let half = sqrt((reach * reach - s * s).max(0.0));
            let point = match locate_on_ray(ph, src, &ray, class, (-half, half)) {
                Ok(p) => p,
                Err(Error::Degenerate(_)) => continue,
                Err(e) => return Err(e),
            };
            out.push(SingularPoint { ray, class, point });
        }
    }
    Ok(out)
}

/// Recovers `C_1 ⊃ C_2 ⊃ ...` from `R_a f` sampled on `s_grid x omega_grid`.
///
/// The phantom and source are only used to evaluate the sinogram. Points on
/// the outer layer lie on the hull of everything found; they are peeled
/// off and the rest is treated the same way.
pub fn recover_nested_boundaries<S: Source + ?Sized>(
    ph: &NestedConvexPhantom,
    src: &S,
    s_grid: &[f64],
    omega_grid: &[f64],
) -> Result<Vec<RecoveredSet>> {
    let points: Vec<Point2> = singular_points(ph, src, s_grid, omega_grid)?.iter().map(|p| p.point).collect();
    peel(points)
}

/// Hull peeling with a layer tolerance of 1% of the current hull diameter.
pub fn peel(mut points: Vec<Point2>) -> Result<Vec<RecoveredSet>> {
    let mut sets = Vec::new();
    while !points.is_empty() {
        let hull = convex_hull(&points);
        let diameter = hull
            .iter()
            .flat_map(|a| hull.iter().map(move |b| a.distance(*b)))
            .fold(0.0, f64::max);
        let tol = 0.01 * diameter;
        let (layer, rest): (Vec<Point2>, Vec<Point2>) =
            points.iter().partition(|p| hull_distance(&hull, **p) <= tol);
        if layer.len() < MIN_POINTS_PER_SET {
            return Err(Error::Resolution(format!(
                "set {} has only {} located points (need {MIN_POINTS_PER_SET})",
                sets.len() + 1,
                layer.len()
            )));
        }
        sets.push(RecoveredSet { hull: convex_hull(&layer), points: layer });
        points = rest;
    }
    Ok(sets)
}

/// Andrew's monotone chain; anticlockwise, without collinear points.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: alloc::boxed::Box<dyn Iterator<Item = &Point2>> =
            if pass == 0 { alloc::boxed::Box::new(pts.iter()) } else { alloc::boxed::Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                if (b - a).cross(p - b) <= 0.0 {
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

// Distance from p to the hull boundary.
fn hull_distance(hull: &[Point2], p: Point2) -> f64 {
    if hull.len() == 1 {
        return p.distance(hull[0]);
    }
    let n = hull.len();
    (0..n)
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            let e = b - a;
            let u = ((p - a).dot(e) / e.dot(e)).clamp(0.0, 1.0);
            p.distance(a + e * u)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Algebraic least-squares circle fit: minimizes
/// `sum (x^2 + y^2 + D x + E y + F)^2`.
pub fn fit_circle(points: &[Point2]) -> Result<(Point2, f64)> {
    if points.len() < 3 {
        return Err(Error::invalid("circle fit needs at least three points"));
    }
    let mut m = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for p in points {
        let row = [p.x, p.y, 1.0];
        let z = -(p.x * p.x + p.y * p.y);
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            rhs[i] += row[i] * z;
        }
    }
    let [d, e, f] = solve3(m, rhs).ok_or_else(|| Error::Degenerate("collinear points".into()))?;
    let center = Point2::new(-0.5 * d, -0.5 * e);
    let r2 = center.dot(center) - f;
    if !(r2 > 0.0) {
        return Err(Error::Degenerate("circle fit has no real radius".into()));
    }
    Ok((center, sqrt(r2)))
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let k = m[row][col] / m[col][col];
            for c in col..3 {
                m[row][c] -= k * m[col][c];
            }
            b[row] -= k * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|c| m[row][c] * x[c]).sum();
        x[row] = (b[row] - tail) / m[row][row];
    }
    Some(x)
}
