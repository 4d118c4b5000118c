//! Pixel grids, oriented rays and exact ray/grid traversal.
//!
//! The grid is square, centred at the origin, with pixels ordered row-major
//! from the top-left corner to the bottom-right one. A ray `(s, omega)` is the
//! oriented line `t -> s * perp(theta) + t * theta` with
//! `theta = (cos omega, sin omega)`, so `t = 0` is the point of closest
//! approach to the origin.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::geometry::Point2;
use crate::math::{cos, floor, sin};
use crate::{Error, Result};

/// Square `size x size` pixel grid of pitch `dx`, centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelGrid {
    size: usize,
    dx: f64,
}

impl PixelGrid {
    pub fn new(size: usize, dx: f64) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("grid needs at least one pixel per side"));
        }
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::invalid("pixel size must be positive and finite"));
        }
        Ok(PixelGrid { size, dx })
    }

    /// Grid of `size` pixels per side covering a square of side `side`.
    pub fn spanning(size: usize, side: f64) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("grid needs at least one pixel per side"));
        }
        PixelGrid::new(size, side / size as f64)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn pixel_count(&self) -> usize {
        self.size * self.size
    }

    /// Side length of the covered square.
    pub fn extent(&self) -> f64 {
        self.size as f64 * self.dx
    }

    pub fn half_extent(&self) -> f64 {
        0.5 * self.extent()
    }

    /// Zero-based flat index of zero-based `(row, col)`.
    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.size && col < self.size);
        row * self.size + col
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.size, index % self.size)
    }

    pub fn pixel_center(&self, index: usize) -> Point2 {
        let (row, col) = self.row_col(index);
        let h = self.half_extent();
        Point2::new(
            -h + (col as f64 + 0.5) * self.dx,
            h - (row as f64 + 0.5) * self.dx,
        )
    }

    /// Pixel containing `p`, if any. Points on an interior edge go to the
    /// pixel with the larger column / smaller row.
    pub fn locate(&self, p: Point2) -> Option<usize> {
        let h = self.half_extent();
        let u = (p.x + h) / self.dx;
        let v = (h - p.y) / self.dx;
        if !(0.0..=self.size as f64).contains(&u) || !(0.0..=self.size as f64).contains(&v) {
            return None;
        }
        let col = (floor(u) as usize).min(self.size - 1);
        let row = (floor(v) as usize).min(self.size - 1);
        Some(self.index(row, col))
    }
}

/// One-based lexicographic pixel index: `(row - 1) * m + col`.
pub fn pixel_index(row: usize, col: usize, m: usize) -> Result<usize> {
    if m == 0 || row == 0 || col == 0 || row > m || col > m {
        return Err(Error::invalid("row and column must lie in 1..=m"));
    }
    Ok((row - 1) * m + col)
}

/// Inverse of [`pixel_index`].
pub fn pixel_row_col(index: usize, m: usize) -> Result<(usize, usize)> {
    if m == 0 || index == 0 || index > m * m {
        return Err(Error::invalid("pixel index must lie in 1..=m*m"));
    }
    Ok(((index - 1) / m + 1, (index - 1) % m + 1))
}

/// Piecewise-constant image on a [`PixelGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    grid: PixelGrid,
    values: Vec<f64>,
}

impl Image {
    pub fn new(grid: PixelGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.pixel_count() {
            return Err(Error::LengthMismatch {
                expected: grid.pixel_count(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("image values must be finite"));
        }
        Ok(Image { grid, values })
    }

    pub fn zeros(grid: PixelGrid) -> Self {
        Image::constant(grid, 0.0)
    }

    pub fn constant(grid: PixelGrid, value: f64) -> Self {
        Image {
            grid,
            values: alloc::vec![value; grid.pixel_count()],
        }
    }

    /// Samples `func` at every pixel centre.
    pub fn from_fn(grid: PixelGrid, mut func: impl FnMut(Point2) -> f64) -> Self {
        let values = (0..grid.pixel_count())
            .map(|i| func(grid.pixel_center(i)))
            .collect();
        Image { grid, values }
    }

    pub fn grid(&self) -> &PixelGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Zero-based `(row, col)` access.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.grid.index(row, col)]
    }

    pub(crate) fn same_grid(&self, other: &Image) -> Result<()> {
        if self.grid.size != other.grid.size {
            return Err(Error::GridMismatch {
                expected: self.grid.size,
                found: other.grid.size,
            });
        }
        if self.grid.dx != other.grid.dx {
            return Err(Error::invalid("images have different pixel sizes"));
        }
        Ok(())
    }
}

/// Oriented line `t -> s * perp(theta) + t * theta`.
///
/// `(s, omega)` and `(-s, omega + pi)` are the same line with opposite
/// orientation; they are different rays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub s: f64,
    pub omega: f64,
}

impl Ray {
    pub const fn new(s: f64, omega: f64) -> Self {
        Ray { s, omega }
    }

    /// Ray through `p` with direction angle `omega`.
    pub fn through(p: Point2, omega: f64) -> Self {
        let normal = Point2::new(-sin(omega), cos(omega));
        Ray::new(p.dot(normal), omega)
    }

    /// `theta = (cos omega, sin omega)`.
    pub fn direction(&self) -> Point2 {
        Point2::new(cos(self.omega), sin(self.omega))
    }

    /// `perp(theta) = (-sin omega, cos omega)`.
    pub fn normal(&self) -> Point2 {
        Point2::new(-sin(self.omega), cos(self.omega))
    }

    pub fn point(&self, t: f64) -> Point2 {
        self.normal() * self.s + self.direction() * t
    }

    /// Arclength parameter of the orthogonal projection of `p` on the line.
    pub fn param_of(&self, p: Point2) -> f64 {
        p.dot(self.direction())
    }

    pub fn reversed(&self) -> Self {
        Ray::new(-self.s, self.omega + PI)
    }
}

/// Ordered traversal record of one ray through a grid.
///
/// `pixels[i]` (zero-based flat index) is crossed for
/// `t in [breakpoints[i], breakpoints[i + 1]]`, a segment of length
/// `lengths[i]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RayTrace {
    pub pixels: Vec<usize>,
    pub breakpoints: Vec<f64>,
    pub lengths: Vec<f64>,
}

impl RayTrace {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }
}

// Direction components below this are treated as exactly axis-parallel.
const PARALLEL_EPS: f64 = 1e-14;
// Crossings closer than this (in units of dx) are merged into one breakpoint.
const MERGE_TOL: f64 = 1e-10;
// Distance (in units of dx) under which a point counts as lying on an edge.
const EDGE_TOL: f64 = 1e-9;

#[derive(Clone, Copy)]
enum Crossing {
    Vertical,
    Horizontal,
    Vertex,
}

/// Traces `ray` through `grid` by incremental edge crossing.
///
/// Rays running exactly along a pixel edge are assigned to the pixel on the
/// `+perp(theta)` side; zero-length segments are dropped. A ray that misses
/// the grid gives an empty trace.
pub fn trace_ray(grid: &PixelGrid, ray: &Ray) -> RayTrace {
    let h = grid.half_extent();
    let dx = grid.dx;
    let m = grid.size;
    let mut dir = ray.direction();
    let normal = ray.normal();
    if dir.x.abs() < PARALLEL_EPS {
        dir.x = 0.0;
    }
    if dir.y.abs() < PARALLEL_EPS {
        dir.y = 0.0;
    }
    let origin = normal * ray.s;

    let (Some((x_lo, x_hi)), Some((y_lo, y_hi))) =
        (slab(origin.x, dir.x, h), slab(origin.y, dir.y, h))
    else {
        return RayTrace::default();
    };
    let t_min = x_lo.max(y_lo);
    let t_max = x_hi.min(y_hi);
    let tol = MERGE_TOL * dx;
    if !(t_max - t_min > tol) {
        return RayTrace::default();
    }

    let inside = |t: f64| t > t_min + tol && t < t_max - tol;
    let mut xs = Vec::new();
    if dir.x != 0.0 {
        let ks: &mut dyn Iterator<Item = usize> = if dir.x > 0.0 {
            &mut (1..m)
        } else {
            &mut (1..m).rev()
        };
        for k in ks {
            let t = (-h + k as f64 * dx - origin.x) / dir.x;
            if inside(t) {
                xs.push(t);
            }
        }
    }
    let mut ys = Vec::new();
    if dir.y != 0.0 {
        // Horizontal line k separates row k - 1 (above) from row k.
        let ks: &mut dyn Iterator<Item = usize> = if dir.y > 0.0 {
            &mut (1..m).rev()
        } else {
            &mut (1..m)
        };
        for k in ks {
            let t = (h - k as f64 * dx - origin.y) / dir.y;
            if inside(t) {
                ys.push(t);
            }
        }
    }

    let mut events: Vec<(f64, Crossing)> = Vec::with_capacity(xs.len() + ys.len());
    let (mut i, mut j) = (0, 0);
    while i < xs.len() || j < ys.len() {
        match (xs.get(i), ys.get(j)) {
            (Some(&tx), Some(&ty)) if (tx - ty).abs() <= tol => {
                events.push((tx.min(ty), Crossing::Vertex));
                i += 1;
                j += 1;
            }
            (Some(&tx), Some(&ty)) if tx < ty => {
                events.push((tx, Crossing::Vertical));
                i += 1;
            }
            (_, Some(&ty)) => {
                events.push((ty, Crossing::Horizontal));
                j += 1;
            }
            (Some(&tx), None) => {
                events.push((tx, Crossing::Vertical));
                i += 1;
            }
            (None, None) => unreachable!(),
        }
    }

    let first_end = events.first().map_or(t_max, |e| e.0);
    let start = origin + dir * (0.5 * (t_min + first_end));
    let Some((mut row, mut col)) = start_pixel(grid, start, normal) else {
        return RayTrace::default();
    };
    let col_step: isize = if dir.x > 0.0 { 1 } else { -1 };
    let row_step: isize = if dir.y > 0.0 { -1 } else { 1 };

    let mut trace = RayTrace {
        pixels: Vec::with_capacity(events.len() + 1),
        breakpoints: Vec::with_capacity(events.len() + 2),
        lengths: Vec::with_capacity(events.len() + 1),
    };
    trace.breakpoints.push(t_min);
    for &(t, kind) in &events {
        trace.pixels.push(grid.index(row as usize, col as usize));
        trace.breakpoints.push(t);
        match kind {
            Crossing::Vertical => col += col_step,
            Crossing::Horizontal => row += row_step,
            Crossing::Vertex => {
                col += col_step;
                row += row_step;
            }
        }
        // Rounding near the far boundary must not step outside the grid.
        row = row.clamp(0, m as isize - 1);
        col = col.clamp(0, m as isize - 1);
    }
    trace.pixels.push(grid.index(row as usize, col as usize));
    trace.breakpoints.push(t_max);
    trace.lengths = trace.breakpoints.windows(2).map(|w| w[1] - w[0]).collect();
    trace
}

// Parameter interval in which `origin + t * dir` lies in `[-h, h]`.
fn slab(origin: f64, dir: f64, h: f64) -> Option<(f64, f64)> {
    if dir == 0.0 {
        if origin < -h || origin > h {
            None
        } else {
            Some((f64::NEG_INFINITY, f64::INFINITY))
        }
    } else {
        let t1 = (-h - origin) / dir;
        let t2 = (h - origin) / dir;
        Some((t1.min(t2), t1.max(t2)))
    }
}

fn start_pixel(grid: &PixelGrid, p: Point2, normal: Point2) -> Option<(isize, isize)> {
    let h = grid.half_extent();
    let u = (p.x + h) / grid.dx;
    let v = (h - p.y) / grid.dx;
    let col = edge_aware_floor(u, normal.x);
    // Rows grow downwards, so the +perp side is the smaller row when normal.y > 0.
    let row = edge_aware_floor(v, -normal.y);
    let m = grid.size as isize;
    if row < 0 || col < 0 || row >= m || col >= m {
        None
    } else {
        Some((row, col))
    }
}

// floor(u), except that on an edge the cell is chosen on the side that
// `side` points to.
fn edge_aware_floor(u: f64, side: f64) -> isize {
    let nearest = libm::round(u);
    if (u - nearest).abs() <= EDGE_TOL && side != 0.0 {
        if side > 0.0 {
            nearest as isize
        } else {
            nearest as isize - 1
        }
    } else {
        floor(u) as isize
    }
}
