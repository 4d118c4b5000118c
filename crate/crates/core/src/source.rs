//! Compactly supported source densities for the continuous model.

use alloc::vec::Vec;

use crate::geometry::Point2;
use crate::grid::{Image, PixelGrid, Ray};
use crate::math::sqrt;
use crate::{Error, Result};

/// A source density that can be integrated along lines.
pub trait Source {
    fn value(&self, p: Point2) -> f64;

    /// Appends the closed parameter intervals (in the ray's own `t`) outside
    /// of which the source vanishes on `ray`. Inside each interval the source
    /// is smooth; intervals may overlap.
    fn support_on(&self, ray: &Ray, out: &mut Vec<(f64, f64)>);
}

/// Radial bump `amplitude * (1 - (r / radius)^2)^2` for `r < radius`.
///
/// The bump and its gradient vanish on the support boundary, so it is C1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: Point2,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn new(center: Point2, radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("bump radius must be positive"));
        }
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::invalid("bump amplitude must be non-negative"));
        }
        if !(center.x.is_finite() && center.y.is_finite()) {
            return Err(Error::invalid("bump centre must be finite"));
        }
        Ok(Bump { center, radius, amplitude })
    }

    pub fn value(&self, p: Point2) -> f64 {
        let d = p - self.center;
        let q = 1.0 - d.dot(d) / (self.radius * self.radius);
        if q <= 0.0 {
            0.0
        } else {
            self.amplitude * q * q
        }
    }

    /// `(t_in, t_out)` where the ray crosses the support circle.
    pub fn chord(&self, ray: &Ray) -> Option<(f64, f64)> {
        let p = ray.s - self.center.dot(ray.normal());
        let w2 = self.radius * self.radius - p * p;
        if w2 <= 0.0 {
            return None;
        }
        let w = sqrt(w2);
        let mid = ray.param_of(self.center);
        Some((mid - w, mid + w))
    }

    /// Unattenuated line integral, in closed form.
    pub fn line_integral(&self, ray: &Ray) -> f64 {
        let p = ray.s - self.center.dot(ray.normal());
        let w2 = self.radius * self.radius - p * p;
        if w2 <= 0.0 {
            return 0.0;
        }
        let q = w2 / (self.radius * self.radius);
        16.0 / 15.0 * self.amplitude * sqrt(w2) * q * q
    }
}

/// Finite sum of [`Bump`]s.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SmoothSource {
    pub bumps: Vec<Bump>,
}

impl SmoothSource {
    pub fn new(bumps: Vec<Bump>) -> Self {
        SmoothSource { bumps }
    }

    pub fn is_zero(&self) -> bool {
        self.bumps.iter().all(|b| b.amplitude == 0.0)
    }

    pub fn line_integral(&self, ray: &Ray) -> f64 {
        self.bumps.iter().map(|b| b.line_integral(ray)).sum()
    }

    /// Samples the source at pixel centres.
    pub fn rasterize(&self, grid: PixelGrid) -> Image {
        Image::from_fn(grid, |p| Source::value(self, p))
    }

    /// Rotation by `angle` about the origin.
    pub fn rotated(&self, angle: f64) -> Self {
        self.map_centers(|c| c.rotated(angle))
    }

    pub fn translated(&self, shift: Point2) -> Self {
        self.map_centers(|c| c + shift)
    }

    /// Reflection across the x-axis.
    pub fn mirrored(&self) -> Self {
        self.map_centers(Point2::mirrored)
    }

    fn map_centers(&self, map: impl Fn(Point2) -> Point2) -> Self {
        SmoothSource {
            bumps: self
                .bumps
                .iter()
                .map(|b| Bump { center: map(b.center), ..*b })
                .collect(),
        }
    }
}

impl Source for SmoothSource {
    fn value(&self, p: Point2) -> f64 {
        self.bumps.iter().map(|b| b.value(p)).sum()
    }

    fn support_on(&self, ray: &Ray, out: &mut Vec<(f64, f64)>) {
        out.extend(self.bumps.iter().filter(|b| b.amplitude > 0.0).filter_map(|b| b.chord(ray)));
    }
}

/// Indicator-type source `value * 1_{|x - center| < radius}`.
///
/// Only C0 across its rim; meant for cross-checking the grid projector
/// against the continuous oracle, not for singularity scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformDisk {
    pub center: Point2,
    pub radius: f64,
    pub value: f64,
}

impl Source for UniformDisk {
    fn value(&self, p: Point2) -> f64 {
        if p.distance(self.center) < self.radius {
            self.value
        } else {
            0.0
        }
    }

    fn support_on(&self, ray: &Ray, out: &mut Vec<(f64, f64)>) {
        let bump = Bump { center: self.center, radius: self.radius, amplitude: self.value };
        if let Some(chord) = bump.chord(ray) {
            out.push(chord);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_vanishes_outside_support() {
        let b = Bump::new(Point2::new(0.1, 0.0), 0.5, 2.0).unwrap();
        assert_eq!(b.value(Point2::new(0.1, 0.0)), 2.0);
        assert_eq!(b.value(Point2::new(0.7, 0.0)), 0.0);
        assert!(Bump::new(Point2::default(), 0.0, 1.0).is_err());
        assert!(Bump::new(Point2::default(), 1.0, -1.0).is_err());
    }

    #[test]
    fn closed_form_chord_matches_simpson() {
        let b = Bump::new(Point2::new(0.2, -0.1), 0.6, 1.5).unwrap();
        let ray = Ray::new(0.13, 0.7);
        let (t0, t1) = b.chord(&ray).unwrap();
        let n = 20_000;
        let h = (t1 - t0) / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * b.value(ray.point(t0 + k as f64 * h));
        }
        let simpson = acc * h / 3.0;
        assert!((simpson - b.line_integral(&ray)).abs() < 1e-12);
    }
}
