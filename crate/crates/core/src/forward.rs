//! Discrete attenuated Radon transform for piecewise-constant `a` and `f`.
//!
//! Along a traced ray with segments `i = 0..N` (in order of increasing `t`),
//! segment lengths `L_i` and pixel values `a_i`, `f_i`,
//!
//! ```text
//! R[a]f = sum_i f_i * L_i * exp(-L_i a_i / 2) * sinhc(L_i a_i / 2) * S_i
//! S_{N-1} = 1,   S_{i-1} = S_i * exp(-L_i a_i)
//! ```
//!
//! which is the exact line integral of `f * exp(-Da)` for such images.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{trace_ray, Image, PixelGrid, Ray, RayTrace};
use crate::math::{exp, expm1, sinh};
use crate::{Error, Result};

/// `sinh(z) / z`, with the removable singularity filled in.
pub fn sinhc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 + z2 / 6.0 * (1.0 + z2 / 20.0 * (1.0 + z2 / 42.0))
    } else {
        sinh(z) / z
    }
}

/// Weight of one segment of length `len` in a pixel of attenuation `a`,
/// excluding the downstream factor: `(1 - exp(-len a)) / a`.
#[inline]
fn segment_weight(len: f64, a: f64) -> f64 {
    let z = 0.5 * len * a;
    len * exp(-z) * sinhc(z)
}

/// Derivative of [`segment_weight`] with respect to `a`.
#[inline]
fn segment_weight_da(len: f64, a: f64) -> f64 {
    let x = len * a;
    let h = if x.abs() < 1e-4 {
        -0.5 + x * (1.0 / 3.0 + x * (-1.0 / 8.0 + x / 30.0))
    } else {
        (x * exp(-x) + expm1(-x)) / (x * x)
    };
    len * len * h
}

/// Downstream attenuation factors `S` for each segment of `trace`.
pub fn attenuation_suffix(a: &Image, trace: &RayTrace) -> Vec<f64> {
    let n = trace.len();
    let mut s = vec![1.0; n];
    let av = a.values();
    for i in (1..n).rev() {
        s[i - 1] = s[i] * exp(-trace.lengths[i] * av[trace.pixels[i]]);
    }
    s
}

fn ray_sum(a: &[f64], f: &[f64], trace: &RayTrace) -> f64 {
    let mut downstream = 1.0;
    let mut acc_rev = Vec::with_capacity(trace.len());
    for i in (0..trace.len()).rev() {
        let p = trace.pixels[i];
        let len = trace.lengths[i];
        acc_rev.push(f[p] * (segment_weight(len, a[p]) * downstream));
        downstream *= exp(-len * a[p]);
    }
    // Summed in traversal order so that rows of the system matrix agree bitwise.
    acc_rev.iter().rev().sum()
}

/// AtRT of `f` with attenuation `a` along one traced ray.
pub fn atrt_ray(a: &Image, f: &Image, trace: &RayTrace) -> Result<f64> {
    a.same_grid(f)?;
    Ok(ray_sum(a.values(), f.values(), trace))
}

/// Parallel-beam acquisition: every offset at every angle, angle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionGeometry {
    angles: Vec<f64>,
    offsets: Vec<f64>,
}

impl ProjectionGeometry {
    pub fn new(angles: Vec<f64>, offsets: Vec<f64>) -> Result<Self> {
        if angles.is_empty() || offsets.is_empty() {
            return Err(Error::invalid("geometry needs at least one angle and one offset"));
        }
        if angles.iter().chain(&offsets).any(|v| !v.is_finite()) {
            return Err(Error::invalid("angles and offsets must be finite"));
        }
        Ok(ProjectionGeometry { angles, offsets })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn ray_count(&self) -> usize {
        self.angles.len() * self.offsets.len()
    }

    pub fn ray(&self, index: usize) -> Ray {
        let n = self.offsets.len();
        Ray::new(self.offsets[index % n], self.angles[index / n])
    }

    pub fn rays(&self) -> impl Iterator<Item = Ray> + '_ {
        self.angles
            .iter()
            .flat_map(move |&w| self.offsets.iter().map(move |&s| Ray::new(s, w)))
    }
}

/// AtRT values for every ray of a geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    geometry: ProjectionGeometry,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn new(geometry: ProjectionGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.ray_count() {
            return Err(Error::LengthMismatch {
                expected: geometry.ray_count(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sinogram values must be finite"));
        }
        Ok(Sinogram { geometry, values })
    }

    pub fn geometry(&self) -> &ProjectionGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Sparse `rays x pixels` matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SystemMatrix {
    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of one row, in traversal order.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.vals[span])
    }

    pub fn mul(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::LengthMismatch { expected: self.cols, found: x.len() });
        }
        Ok((0..self.rows())
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| x[c] * v).sum()
            })
            .collect())
    }

    pub fn mul_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows() {
            return Err(Error::LengthMismatch { expected: self.rows(), found: y.len() });
        }
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c] += v * yr;
            }
        }
        Ok(out)
    }
}

/// Geometry traced once through a grid, reused for every `a` and `f`.
#[derive(Debug, Clone)]
pub struct Projector {
    grid: PixelGrid,
    geometry: ProjectionGeometry,
    traces: Vec<RayTrace>,
}

impl Projector {
    pub fn new(grid: PixelGrid, geometry: ProjectionGeometry) -> Self {
        let traces = geometry.rays().map(|ray| trace_ray(&grid, &ray)).collect();
        Projector { grid, geometry, traces }
    }

    pub fn grid(&self) -> &PixelGrid {
        &self.grid
    }

    pub fn geometry(&self) -> &ProjectionGeometry {
        &self.geometry
    }

    pub fn traces(&self) -> &[RayTrace] {
        &self.traces
    }

    pub(crate) fn check(&self, image: &Image) -> Result<()> {
        let g = image.grid();
        if g.size() != self.grid.size() {
            return Err(Error::GridMismatch { expected: self.grid.size(), found: g.size() });
        }
        if g.dx() != self.grid.dx() {
            return Err(Error::invalid("image pixel size differs from the projector grid"));
        }
        Ok(())
    }

    pub(crate) fn check_data(&self, d: &Sinogram) -> Result<()> {
        if d.len() != self.traces.len() {
            return Err(Error::LengthMismatch { expected: self.traces.len(), found: d.len() });
        }
        Ok(())
    }

    pub fn forward(&self, a: &Image, f: &Image) -> Result<Sinogram> {
        self.check(a)?;
        self.check(f)?;
        let values = self
            .traces
            .iter()
            .map(|tr| ray_sum(a.values(), f.values(), tr))
            .collect();
        Sinogram::new(self.geometry.clone(), values)
    }

    pub fn assemble(&self, a: &Image) -> Result<SystemMatrix> {
        self.check(a)?;
        let av = a.values();
        let nnz = self.traces.iter().map(RayTrace::len).sum();
        let mut row_ptr = Vec::with_capacity(self.traces.len() + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut vals = vec![0.0; nnz];
        row_ptr.push(0);
        for tr in &self.traces {
            let start = col_idx.len();
            col_idx.extend_from_slice(&tr.pixels);
            let mut downstream = 1.0;
            for i in (0..tr.len()).rev() {
                let p = tr.pixels[i];
                let len = tr.lengths[i];
                vals[start + i] = segment_weight(len, av[p]) * downstream;
                downstream *= exp(-len * av[p]);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SystemMatrix { cols: self.grid.pixel_count(), row_ptr, col_idx, vals })
    }

    /// `||R[a]f - d||^2`.
    pub fn misfit(&self, a: &Image, f: &Image, d: &Sinogram) -> Result<f64> {
        self.check(a)?;
        self.check(f)?;
        self.check_data(d)?;
        Ok(self.misfit_raw(a.values(), f.values(), d.values()))
    }

    /// `||R[a]f - d||^2` together with its gradient with respect to `a`.
    pub fn misfit_gradient_a(&self, a: &Image, f: &Image, d: &Sinogram) -> Result<(f64, Vec<f64>)> {
        self.check(a)?;
        self.check(f)?;
        self.check_data(d)?;
        let mut grad = vec![0.0; self.grid.pixel_count()];
        let value = self.misfit_gradient_raw(a.values(), f.values(), d.values(), &mut grad);
        Ok((value, grad))
    }

    pub(crate) fn misfit_raw(&self, a: &[f64], f: &[f64], d: &[f64]) -> f64 {
        self.traces
            .iter()
            .zip(d)
            .map(|(tr, &y)| {
                let r = ray_sum(a, f, tr) - y;
                r * r
            })
            .sum()
    }

    pub(crate) fn misfit_gradient_raw(&self, a: &[f64], f: &[f64], d: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        let mut terms = Vec::new();
        let mut slopes = Vec::new();
        for (tr, &y) in self.traces.iter().zip(d) {
            let n = tr.len();
            if n == 0 {
                value += y * y;
                continue;
            }
            terms.clear();
            slopes.clear();
            terms.resize(n, 0.0);
            slopes.resize(n, 0.0);
            let mut downstream = 1.0;
            for i in (0..n).rev() {
                let p = tr.pixels[i];
                let len = tr.lengths[i];
                terms[i] = f[p] * (segment_weight(len, a[p]) * downstream);
                slopes[i] = f[p] * segment_weight_da(len, a[p]) * downstream;
                downstream *= exp(-len * a[p]);
            }
            let r: f64 = terms.iter().sum::<f64>() - y;
            value += r * r;
            if r == 0.0 {
                continue;
            }
            // Pixel k attenuates every segment before it on the ray.
            let mut upstream = 0.0;
            for k in 0..n {
                grad[tr.pixels[k]] += 2.0 * r * (slopes[k] - tr.lengths[k] * upstream);
                upstream += terms[k];
            }
        }
        value
    }
}

/// [`Projector::forward`] for a one-off evaluation.
pub fn forward(a: &Image, f: &Image, geometry: &ProjectionGeometry) -> Result<Sinogram> {
    a.same_grid(f)?;
    Projector::new(*a.grid(), geometry.clone()).forward(a, f)
}

/// [`Projector::assemble`] for a one-off evaluation.
pub fn assemble_system_matrix(a: &Image, geometry: &ProjectionGeometry) -> Result<SystemMatrix> {
    Projector::new(*a.grid(), geometry.clone()).assemble(a)
}

/// Gradient of `a -> ||R[a]f - d||^2` using the geometry stored in `d`.
pub fn fidelity_gradient_a(a: &Image, f: &Image, d: &Sinogram) -> Result<Image> {
    a.same_grid(f)?;
    let proj = Projector::new(*a.grid(), d.geometry().clone());
    let (_, grad) = proj.misfit_gradient_a(a, f, d)?;
    Image::new(*a.grid(), grad)
}
