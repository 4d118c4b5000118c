//! Multi-bang penalty, finite differences and smoothed total variation.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Image, PixelGrid};
use crate::math::sqrt;
use crate::{Error, Result};

/// Strictly increasing admissible attenuation levels `a_0 < ... < a_n`, `n >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleSet {
    levels: Vec<f64>,
}

impl AdmissibleSet {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::invalid("admissible set needs at least two levels"));
        }
        if levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("admissible levels must be finite"));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("admissible levels must be strictly increasing"));
        }
        Ok(AdmissibleSet { levels })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn min(&self) -> f64 {
        self.levels[0]
    }

    pub fn max(&self) -> f64 {
        self.levels[self.levels.len() - 1]
    }

    /// Index of the level closest to `x` (the lower one on ties).
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, &l) in self.levels.iter().enumerate() {
            if (x - l).abs() < (x - self.levels[best]).abs() {
                best = i;
            }
        }
        best
    }

    /// Pointwise penalty `m(t) = (a_{i+1} - t)(t - a_i)` on `[a_i, a_{i+1}]`,
    /// infinite outside `[a_0, a_n]`.
    pub fn penalty(&self, t: f64) -> f64 {
        if !(t >= self.min() && t <= self.max()) {
            return f64::INFINITY;
        }
        let i = self.bracket(t);
        (self.levels[i + 1] - t) * (t - self.levels[i])
    }

    // Largest i < n with a_i <= t.
    fn bracket(&self, t: f64) -> usize {
        let n = self.levels.len() - 1;
        let mut i = 0;
        while i + 1 < n && self.levels[i + 1] <= t {
            i += 1;
        }
        i
    }

    /// `argmin_z w m(z) + (z - x)^2 / 2` for `0 < w < 1/2`.
    pub fn prox(&self, x: f64, w: f64) -> Result<f64> {
        if !(w > 0.0 && w < 0.5) {
            return Err(Error::invalid("prox weight must lie in (0, 1/2)"));
        }
        Ok(self.prox_unchecked(x, w))
    }

    pub(crate) fn prox_unchecked(&self, x: f64, w: f64) -> f64 {
        let a = &self.levels;
        let n = a.len() - 1;
        for i in 0..n {
            // Closed threshold interval around a_i, then the open gap to a_{i+1}.
            let upper = a[i] + w * (a[i + 1] - a[i]);
            if x <= upper {
                return a[i];
            }
            let next_lower = a[i + 1] - w * (a[i + 1] - a[i]);
            if x < next_lower {
                return (x - w * (a[i] + a[i + 1])) / (1.0 - 2.0 * w);
            }
        }
        a[n]
    }
}

/// `sum_i m(x_i)`; infinite if any pixel leaves `[a_0, a_n]`.
pub fn multibang_penalty(x: &Image, set: &AdmissibleSet) -> f64 {
    x.values().iter().map(|&v| set.penalty(v)).sum()
}

/// Proximal map of the multi-bang penalty with weight `w = alpha * t`.
pub fn multibang_prox(x: f64, set: &AdmissibleSet, w: f64) -> Result<f64> {
    set.prox(x, w)
}

/// Stacked forward differences `D_i a`, `i = 1..M^2-1`.
///
/// For a pixel not in the last column the first component is
/// `a(i) - a(i+1)`, otherwise 0. For a pixel not in the last row the second
/// component is `a(i) - a(i+M)`, otherwise 0. The last pixel has no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    grid: PixelGrid,
    vectors: Vec<[f64; 2]>,
}

impl GradientField {
    pub fn zeros(grid: PixelGrid) -> Self {
        GradientField { grid, vectors: vec![[0.0; 2]; grid.pixel_count() - 1] }
    }

    pub fn from_vectors(grid: PixelGrid, vectors: Vec<[f64; 2]>) -> Result<Self> {
        if vectors.len() != grid.pixel_count() - 1 {
            return Err(Error::LengthMismatch {
                expected: grid.pixel_count() - 1,
                found: vectors.len(),
            });
        }
        Ok(GradientField { grid, vectors })
    }

    pub fn grid(&self) -> &PixelGrid {
        &self.grid
    }

    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }

    pub fn vectors_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dot(&self, other: &GradientField) -> f64 {
        self.vectors
            .iter()
            .zip(&other.vectors)
            .map(|(u, v)| u[0] * v[0] + u[1] * v[1])
            .sum()
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.dot(self))
    }

    /// `||self - other||`.
    pub fn distance(&self, other: &GradientField) -> f64 {
        sqrt(
            self.vectors
                .iter()
                .zip(&other.vectors)
                .map(|(u, v)| (u[0] - v[0]) * (u[0] - v[0]) + (u[1] - v[1]) * (u[1] - v[1]))
                .sum(),
        )
    }
}

pub(crate) fn apply_d_into(a: &[f64], m: usize, out: &mut [[f64; 2]]) {
    let last_row = m * m - m;
    for (j, o) in out.iter_mut().enumerate() {
        let right = if (j + 1) % m != 0 { a[j] - a[j + 1] } else { 0.0 };
        let down = if j < last_row { a[j] - a[j + m] } else { 0.0 };
        *o = [right, down];
    }
}

pub(crate) fn apply_dt_into(y: &[[f64; 2]], m: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let last_row = m * m - m;
    for (j, v) in y.iter().enumerate() {
        if (j + 1) % m != 0 {
            out[j] += v[0];
            out[j + 1] -= v[0];
        }
        if j < last_row {
            out[j] += v[1];
            out[j + m] -= v[1];
        }
    }
}

pub fn apply_d(a: &Image) -> GradientField {
    let grid = *a.grid();
    let mut field = GradientField::zeros(grid);
    apply_d_into(a.values(), grid.size(), &mut field.vectors);
    field
}

/// Exact adjoint of [`apply_d`].
pub fn apply_d_transpose(y: &GradientField) -> Image {
    let mut out = Image::zeros(y.grid);
    apply_dt_into(&y.vectors, y.grid.size(), out.values_mut());
    out
}

/// `sum_i sqrt(||D_i a||^2 + c)`.
pub fn tv_smoothed(a: &Image, c: f64) -> Result<f64> {
    check_smoothing(c)?;
    Ok(apply_d(a).vectors.iter().map(|v| sqrt(v[0] * v[0] + v[1] * v[1] + c)).sum())
}

/// Gradient of [`tv_smoothed`]. It is Lipschitz with constant at most
/// `||D||^2 / sqrt(c) <= 8 / sqrt(c)`.
pub fn tv_gradient(a: &Image, c: f64) -> Result<Image> {
    check_smoothing(c)?;
    let mut field = apply_d(a);
    for v in field.vectors.iter_mut() {
        let n = sqrt(v[0] * v[0] + v[1] * v[1] + c);
        *v = [v[0] / n, v[1] / n];
    }
    Ok(apply_d_transpose(&field))
}

fn check_smoothing(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("TV smoothing parameter must be positive"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary() -> AdmissibleSet {
        AdmissibleSet::new(vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn admissible_set_validation() {
        assert!(AdmissibleSet::new(vec![0.0]).is_err());
        assert!(AdmissibleSet::new(vec![0.0, 0.0]).is_err());
        assert!(AdmissibleSet::new(vec![1.0, 0.5]).is_err());
        assert!(AdmissibleSet::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn penalty_examples() {
        let set = binary();
        let g = PixelGrid::new(1, 1.0).unwrap();
        assert_eq!(multibang_penalty(&Image::constant(g, 0.5), &set), 0.25);
        assert_eq!(multibang_penalty(&Image::constant(g, 1.0), &set), 0.0);
        assert_eq!(multibang_penalty(&Image::constant(g, 1.1), &set), f64::INFINITY);
        let three = AdmissibleSet::new(vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(three.penalty(0.75), 0.25 * 0.25);
    }

    #[test]
    fn prox_examples() {
        let set = AdmissibleSet::new(vec![0.0, 0.2, 0.3, 0.4, 1.0]).unwrap();
        for &l in set.levels() {
            assert_eq!(multibang_prox(l, &set, 0.3).unwrap(), l);
        }
        assert_eq!(multibang_prox(0.5, &binary(), 0.25).unwrap(), 0.5);
        assert!(multibang_prox(0.5, &binary(), 0.5).is_err());
        assert!(multibang_prox(0.5, &binary(), 0.0).is_err());
        // Threshold endpoints belong to the level.
        assert_eq!(binary().prox(0.25, 0.25).unwrap(), 0.0);
        assert_eq!(binary().prox(0.75, 0.25).unwrap(), 1.0);
        assert_eq!(binary().prox(-3.0, 0.25).unwrap(), 0.0);
        assert_eq!(binary().prox(3.0, 0.25).unwrap(), 1.0);
    }

    #[test]
    fn last_column_has_no_horizontal_difference() {
        let g = PixelGrid::new(3, 1.0).unwrap();
        let a = Image::new(g, (0..9).map(|v| (v * v) as f64).collect()).unwrap();
        let d = apply_d(&a);
        assert_eq!(d.len(), 8);
        // 1-based i = 3 and 6 sit in the last column.
        assert_eq!(d.vectors()[2][0], 0.0);
        assert_eq!(d.vectors()[5][0], 0.0);
        assert_eq!(d.vectors()[0], [0.0 - 1.0, 0.0 - 9.0]);
        // Bottom row: no vertical difference.
        assert_eq!(d.vectors()[6], [36.0 - 49.0, 0.0]);
    }

    #[test]
    fn constant_image_tv() {
        let g = PixelGrid::new(5, 0.2).unwrap();
        let a = Image::constant(g, 0.7);
        assert!(apply_d(&a).vectors().iter().all(|v| *v == [0.0, 0.0]));
        let c = 1e-3;
        assert!((tv_smoothed(&a, c).unwrap() - 24.0 * sqrt(c)).abs() < 1e-14);
        assert!(tv_gradient(&a, c).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(tv_smoothed(&a, 0.0).is_err());
    }
}
