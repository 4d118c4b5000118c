//! Disks, convex polygons and strictly nested stacks of them.

use alloc::vec::Vec;

use crate::geometry::Point2;
use crate::grid::Ray;
use crate::math::sqrt;
use crate::{Error, Result};

/// Required gap between consecutive sets of a [`NestedConvexPhantom`].
pub const NESTING_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum ConvexShape {
    Disk { center: Point2, radius: f64 },
    /// Vertices in anticlockwise order, strictly convex position.
    Polygon { vertices: Vec<Point2> },
}

impl ConvexShape {
    pub fn disk(center: Point2, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0 && center.x.is_finite() && center.y.is_finite()) {
            return Err(Error::invalid("disk needs a finite centre and positive radius"));
        }
        Ok(ConvexShape::Disk { center, radius })
    }

    pub fn polygon(vertices: Vec<Point2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::invalid("polygon needs at least three vertices"));
        }
        if vertices.iter().any(|v| !(v.x.is_finite() && v.y.is_finite())) {
            return Err(Error::invalid("polygon vertices must be finite"));
        }
        for i in 0..n {
            let (p, q, r) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if (q - p).cross(r - q) <= 0.0 {
                return Err(Error::invalid(
                    "polygon vertices must be anticlockwise and in strictly convex position",
                ));
            }
        }
        // Local convexity everywhere plus a single turn rules out star shapes.
        let mut winding = 0.0;
        for i in 0..n {
            let (p, q, r) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            let (u, v) = (q - p, r - q);
            winding += crate::math::atan2(u.cross(v), u.dot(v));
        }
        if (winding - 2.0 * core::f64::consts::PI).abs() > 1e-6 {
            return Err(Error::invalid("polygon boundary must turn exactly once"));
        }
        Ok(ConvexShape::Polygon { vertices })
    }

    /// Axis-aligned square.
    pub fn square(center: Point2, half_side: f64) -> Result<Self> {
        let h = half_side;
        ConvexShape::polygon(alloc::vec![
            center + Point2::new(-h, -h),
            center + Point2::new(h, -h),
            center + Point2::new(h, h),
            center + Point2::new(-h, h),
        ])
    }

    /// Distance to the boundary, positive inside. Outside a polygon this is
    /// only a lower bound on the true distance, with the right sign.
    pub fn signed_distance(&self, p: Point2) -> f64 {
        match self {
            ConvexShape::Disk { center, radius } => radius - p.distance(*center),
            ConvexShape::Polygon { vertices } => edges(vertices)
                .map(|(a, b)| inward_distance(a, b, p))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.signed_distance(p) > 0.0
    }

    /// Parameter interval `[t_in, t_out]` of the ray inside the closed set,
    /// if it has positive length.
    pub fn chord(&self, ray: &Ray) -> Option<(f64, f64)> {
        let (theta, normal) = (ray.direction(), ray.normal());
        match self {
            ConvexShape::Disk { center, radius } => {
                let p = ray.s - center.dot(normal);
                let w2 = radius * radius - p * p;
                if w2 <= 0.0 {
                    return None;
                }
                let w = sqrt(w2);
                let mid = center.dot(theta);
                Some((mid - w, mid + w))
            }
            ConvexShape::Polygon { vertices } => {
                let base = normal * ray.s;
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for (a, b) in edges(vertices) {
                    let e = b - a;
                    let outward = Point2::new(e.y, -e.x);
                    let along = outward.dot(theta);
                    let gap = outward.dot(a - base);
                    if along == 0.0 {
                        if gap < 0.0 {
                            return None;
                        }
                    } else if along > 0.0 {
                        hi = hi.min(gap / along);
                    } else {
                        lo = lo.max(gap / along);
                    }
                }
                (lo < hi).then_some((lo, hi))
            }
        }
    }

    /// Boundary curvature away from corners: `1/R` for disks, 0 for polygons.
    pub fn curvature(&self) -> f64 {
        match self {
            ConvexShape::Disk { radius, .. } => 1.0 / radius,
            ConvexShape::Polygon { .. } => 0.0,
        }
    }

    /// Rotation about the origin followed by a translation.
    pub fn moved(&self, angle: f64, shift: Point2) -> Self {
        match self {
            ConvexShape::Disk { center, radius } => {
                ConvexShape::Disk { center: center.rotated(angle) + shift, radius: *radius }
            }
            ConvexShape::Polygon { vertices } => ConvexShape::Polygon {
                vertices: vertices.iter().map(|v| v.rotated(angle) + shift).collect(),
            },
        }
    }

    // Smallest signed distance to `outer` over this shape.
    fn depth_in(&self, outer: &ConvexShape) -> f64 {
        match (self, outer) {
            (ConvexShape::Disk { center, radius }, ConvexShape::Disk { center: c, radius: r }) => {
                r - center.distance(*c) - radius
            }
            (ConvexShape::Disk { center, radius }, ConvexShape::Polygon { .. }) => {
                outer.signed_distance(*center) - radius
            }
            (ConvexShape::Polygon { vertices }, _) => vertices
                .iter()
                .map(|&v| outer.signed_distance(v))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

pub(crate) fn edges(vertices: &[Point2]) -> impl Iterator<Item = (Point2, Point2)> + '_ {
    let n = vertices.len();
    (0..n).map(move |i| (vertices[i], vertices[(i + 1) % n]))
}

// Distance of `p` from the line through a, b, positive on the left (inside
// for anticlockwise polygons).
fn inward_distance(a: Point2, b: Point2, p: Point2) -> f64 {
    let e = b - a;
    e.cross(p - a) / e.norm()
}

/// `a = sum_j c_j 1_{C_j}` with `C_1 ⊃ C_2 ⊃ ... ⊃ C_n` strictly nested.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedConvexPhantom {
    sets: Vec<ConvexShape>,
    values: Vec<f64>,
}

impl NestedConvexPhantom {
    /// `values[j]` is the increment `c_j` added inside `sets[j]`.
    pub fn new(sets: Vec<ConvexShape>, values: Vec<f64>) -> Result<Self> {
        if sets.len() != values.len() {
            return Err(Error::LengthMismatch { expected: sets.len(), found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("set values must be finite"));
        }
        for (j, pair) in sets.windows(2).enumerate() {
            let depth = pair[1].depth_in(&pair[0]);
            if depth < NESTING_MARGIN {
                return Err(Error::invalid(alloc::format!(
                    "set {} is not nested inside set {} with margin {NESTING_MARGIN} (depth {depth})",
                    j + 2,
                    j + 1
                )));
            }
        }
        Ok(NestedConvexPhantom { sets, values })
    }

    /// No attenuation at all.
    pub fn empty() -> Self {
        NestedConvexPhantom { sets: Vec::new(), values: Vec::new() }
    }

    pub fn sets(&self) -> &[ConvexShape] {
        &self.sets
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn attenuation(&self, p: Point2) -> f64 {
        self.sets.iter().zip(&self.values).filter(|(s, _)| s.contains(p)).map(|(_, v)| v).sum()
    }

    pub fn moved(&self, angle: f64, shift: Point2) -> Self {
        NestedConvexPhantom {
            sets: self.sets.iter().map(|s| s.moved(angle, shift)).collect(),
            values: self.values.clone(),
        }
    }

    /// Index of the set whose boundary passes closest to `p`, and that distance.
    pub fn nearest_boundary(&self, p: Point2) -> Option<(usize, f64)> {
        self.sets
            .iter()
            .enumerate()
            .map(|(j, s)| (j, s.signed_distance(p).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygon_validation() {
        let cw = alloc::vec![Point2::new(0.0, 0.0), Point2::new(0.0, 1.0), Point2::new(1.0, 0.0)];
        assert!(ConvexShape::polygon(cw).is_err());
        let collinear = alloc::vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(1.0, 1.0)
        ];
        assert!(ConvexShape::polygon(collinear).is_err());
        assert!(ConvexShape::square(Point2::default(), 1.0).is_ok());
    }

    #[test]
    fn chords() {
        let sq = ConvexShape::square(Point2::default(), 1.0).unwrap();
        assert_eq!(sq.chord(&Ray::new(0.5, 0.0)), Some((-1.0, 1.0)));
        assert_eq!(sq.chord(&Ray::new(1.5, 0.0)), None);
        let disk = ConvexShape::disk(Point2::new(0.0, 0.3), 0.5).unwrap();
        let (a, b) = disk.chord(&Ray::new(0.3, 0.0)).unwrap();
        assert!((a + 0.5).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nesting_is_checked() {
        let outer = ConvexShape::disk(Point2::default(), 1.0).unwrap();
        let inner = ConvexShape::square(Point2::default(), 0.7).unwrap();
        assert!(NestedConvexPhantom::new(alloc::vec![outer.clone(), inner], alloc::vec![1.0, 1.0]).is_ok());
        let too_big = ConvexShape::square(Point2::default(), 0.71).unwrap();
        assert!(NestedConvexPhantom::new(alloc::vec![outer, too_big], alloc::vec![1.0, 1.0]).is_err());
    }
}
