//! Synthetic multi-bang phantoms, acquisition geometries and measurement noise.
//!
//! Shapes are given in absolute coordinates; the default phantoms are laid
//! out for the square `[-1, 1]^2`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::forward::{ProjectionGeometry, Sinogram};
use crate::geometry::Point2;
use crate::grid::{Image, PixelGrid};
use crate::math::sqrt;
use crate::regularizer::AdmissibleSet;
use crate::source::{Bump, SmoothSource};
use crate::{Error, Result};

/// Filled region used when painting a phantom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Disk { center: Point2, radius: f64 },
    /// Axis-aligned square.
    Square { center: Point2, half_side: f64 },
    /// Ellipse with semi-axes `(a, b)` rotated anticlockwise by `angle`.
    Ellipse { center: Point2, a: f64, b: f64, angle: f64 },
}

impl Shape {
    pub fn contains(&self, p: Point2) -> bool {
        match *self {
            Shape::Disk { center, radius } => p.distance(center) <= radius,
            Shape::Square { center, half_side } => {
                (p.x - center.x).abs() <= half_side && (p.y - center.y).abs() <= half_side
            }
            Shape::Ellipse { center, a, b, angle } => {
                let q = (p - center).rotated(-angle);
                (q.x / a) * (q.x / a) + (q.y / b) * (q.y / b) <= 1.0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhantomKind {
    /// Ring with a square in its hole, levels {0, 1}.
    BinaryShapes,
    /// Disk containing an ellipse and a hole, levels {0, 0.5, 1}.
    ThreeRegion,
    /// Shepp-Logan layout with levels {0, 0.2, 0.3, 0.4, 1}.
    MultibangSheppLogan,
    /// Concentric disks; `levels[j]` is painted inside `radii[j]`.
    NestedDisks { radii: Vec<f64>, levels: Vec<f64> },
}

impl PhantomKind {
    /// Parses one of `binary_shapes`, `three_region`, `multibang_shepp_logan`,
    /// `nested_disks` (radii 0.8, 0.4 with levels 0.5, 1).
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "binary_shapes" => Ok(PhantomKind::BinaryShapes),
            "three_region" => Ok(PhantomKind::ThreeRegion),
            "multibang_shepp_logan" => Ok(PhantomKind::MultibangSheppLogan),
            "nested_disks" => Ok(PhantomKind::NestedDisks {
                radii: vec![0.8, 0.4],
                levels: vec![0.5, 1.0],
            }),
            other => Err(Error::InvalidArgument(alloc::format!("unknown phantom '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PhantomKind::BinaryShapes => "binary_shapes",
            PhantomKind::ThreeRegion => "three_region",
            PhantomKind::MultibangSheppLogan => "multibang_shepp_logan",
            PhantomKind::NestedDisks { .. } => "nested_disks",
        }
    }

    /// Background level plus shapes painted in order.
    pub fn layers(&self) -> (f64, Vec<(Shape, f64)>) {
        let disk = |x, y, r| Shape::Disk { center: Point2::new(x, y), radius: r };
        match self {
            PhantomKind::BinaryShapes => (
                0.0,
                vec![
                    (disk(0.0, 0.0, 0.7), 1.0),
                    (disk(0.05, 0.0, 0.42), 0.0),
                    (Shape::Square { center: Point2::new(0.05, 0.0), half_side: 0.18 }, 1.0),
                ],
            ),
            PhantomKind::ThreeRegion => (
                0.0,
                vec![
                    (disk(0.0, 0.0, 0.75), 0.5),
                    (
                        Shape::Ellipse { center: Point2::new(-0.2, 0.1), a: 0.3, b: 0.18, angle: 0.5 },
                        1.0,
                    ),
                    (disk(0.3, -0.25, 0.16), 0.0),
                ],
            ),
            PhantomKind::MultibangSheppLogan => {
                let e = |x, y, a, b, deg: f64, v| {
                    (
                        Shape::Ellipse { center: Point2::new(x, y), a, b, angle: deg * PI / 180.0 },
                        v,
                    )
                };
                (
                    0.0,
                    vec![
                        e(0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
                        e(0.0, -0.0184, 0.6624, 0.874, 0.0, 0.2),
                        e(0.22, 0.0, 0.11, 0.31, -18.0, 0.0),
                        e(-0.22, 0.0, 0.16, 0.41, 18.0, 0.0),
                        e(0.0, 0.35, 0.21, 0.25, 0.0, 0.3),
                        e(0.0, 0.1, 0.046, 0.046, 0.0, 0.4),
                        e(0.0, -0.1, 0.046, 0.046, 0.0, 0.4),
                        e(-0.08, -0.605, 0.046, 0.023, 0.0, 0.4),
                        e(0.0, -0.606, 0.023, 0.023, 0.0, 0.3),
                        e(0.06, -0.605, 0.023, 0.046, 0.0, 0.3),
                    ],
                )
            }
            PhantomKind::NestedDisks { radii, levels } => (
                0.0,
                radii.iter().zip(levels).map(|(&r, &v)| (disk(0.0, 0.0, r), v)).collect(),
            ),
        }
    }

    pub fn default_admissible(&self) -> AdmissibleSet {
        let levels = match self {
            PhantomKind::BinaryShapes => vec![0.0, 1.0],
            PhantomKind::ThreeRegion => vec![0.0, 0.5, 1.0],
            PhantomKind::MultibangSheppLogan => vec![0.0, 0.2, 0.3, 0.4, 1.0],
            PhantomKind::NestedDisks { levels, .. } => {
                let mut l = levels.clone();
                l.push(0.0);
                l.sort_by(f64::total_cmp);
                l.dedup();
                if l.len() < 2 {
                    l.push(l[0] + 1.0);
                }
                l
            }
        };
        AdmissibleSet::new(levels).expect("built-in levels are valid")
    }
}

/// Source used by the built-in phantoms: three overlapping bumps.
pub fn default_source() -> SmoothSource {
    SmoothSource::new(vec![
        Bump { center: Point2::new(0.0, 0.0), radius: 0.95, amplitude: 1.0 },
        Bump { center: Point2::new(0.3, 0.25), radius: 0.35, amplitude: 0.8 },
        Bump { center: Point2::new(-0.35, -0.3), radius: 0.3, amplitude: 0.6 },
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub admissible: AdmissibleSet,
    pub source: SmoothSource,
}

impl PhantomSpec {
    /// Built-in phantom with its own admissible set and the default source.
    pub fn named(name: &str) -> Result<Self> {
        let kind = PhantomKind::from_name(name)?;
        Ok(PhantomSpec { admissible: kind.default_admissible(), kind, source: default_source() })
    }
}

/// Rasterizes `(a, f)` by sampling pixel centres.
pub fn make_phantom(spec: &PhantomSpec, grid: PixelGrid) -> Result<(Image, Image)> {
    let (background, layers) = spec.kind.layers();
    if let PhantomKind::NestedDisks { radii, levels } = &spec.kind {
        if radii.len() != levels.len() {
            return Err(Error::invalid("nested disks need one level per radius"));
        }
        if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::invalid("disk radii must be positive"));
        }
    }
    let levels = spec.admissible.levels();
    for v in core::iter::once(background).chain(layers.iter().map(|l| l.1)) {
        if !levels.contains(&v) {
            return Err(Error::InvalidArgument(alloc::format!(
                "phantom value {v} is not an admissible level"
            )));
        }
    }
    let h = grid.half_extent();
    for b in &spec.source.bumps {
        let inside = b.center.x.abs() + b.radius <= h && b.center.y.abs() + b.radius <= h;
        if !inside {
            return Err(Error::invalid("source support must lie inside the grid"));
        }
    }
    let a = Image::from_fn(grid, |p| {
        layers
            .iter()
            .rev()
            .find(|(shape, _)| shape.contains(p))
            .map_or(background, |l| l.1)
    });
    Ok((a, spec.source.rasterize(grid)))
}

/// `ceil(M * sqrt(2))`, enough detector bins to cover the grid diagonal at
/// roughly one pixel spacing.
pub fn default_detector_count(grid: &PixelGrid) -> usize {
    libm::ceil(grid.size() as f64 * SQRT_2) as usize
}

/// `n_proj` angles `j * pi / n_proj + eps_j`, `|eps_j| <= pi / (100 n_proj)`,
/// and `n_det` equispaced offsets over `[-M dx / sqrt 2, M dx / sqrt 2]`.
pub fn make_geometry(
    n_proj: usize,
    n_det: usize,
    grid: &PixelGrid,
    perturb_seed: u64,
) -> Result<ProjectionGeometry> {
    if n_proj == 0 {
        return Err(Error::invalid("need at least one projection"));
    }
    if n_det < 2 {
        return Err(Error::invalid("need at least two detector bins"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(perturb_seed);
    let step = PI / n_proj as f64;
    let max_eps = step / 100.0;
    let angles = (0..n_proj)
        .map(|j| j as f64 * step + rng.random_range(-max_eps..=max_eps))
        .collect();
    let radius = grid.extent() / SQRT_2;
    let offsets = (0..n_det)
        .map(|k| -radius + 2.0 * radius * k as f64 / (n_det - 1) as f64)
        .collect();
    ProjectionGeometry::new(angles, offsets)
}

/// Adds i.i.d. Gaussian noise with standard deviation `level * rms(d)`.
pub fn add_noise(d: &Sinogram, level: f64, seed: u64) -> Result<Sinogram> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::invalid("noise level must be non-negative"));
    }
    if level == 0.0 || d.is_empty() {
        return Ok(d.clone());
    }
    let rms = sqrt(d.values().iter().map(|v| v * v).sum::<f64>() / d.len() as f64);
    let sigma = level * rms;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = d
        .values()
        .iter()
        .map(|&v| {
            let z: f64 = rng.sample(StandardNormal);
            v + sigma * z
        })
        .collect();
    Sinogram::new(d.geometry().clone(), values)
}

/// Fraction of pixels whose value differs between `a` and `truth` after
/// snapping `a` to its nearest admissible level.
pub fn misclassification(a: &Image, truth: &Image, set: &AdmissibleSet) -> Result<f64> {
    if a.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), found: a.len() });
    }
    let levels = set.levels();
    let wrong = a
        .values()
        .iter()
        .zip(truth.values())
        .filter(|(&x, &t)| levels[set.nearest(x)] != levels[set.nearest(t)])
        .count();
    Ok(wrong as f64 / a.len().max(1) as f64)
}

/// Nearest-neighbour resampling of `image` onto `grid` (both centred).
pub fn resample_nearest(image: &Image, grid: PixelGrid) -> Image {
    let src = *image.grid();
    Image::from_fn(grid, |p| match src.locate(p) {
        Some(i) => image.values()[i],
        None => 0.0,
    })
}

/// Confusion counts `[true level][reconstructed level]` after snapping both
/// images to the nearest admissible level.
pub fn confusion(a: &Image, truth: &Image, set: &AdmissibleSet) -> Result<Vec<Vec<usize>>> {
    if a.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), found: a.len() });
    }
    let n = set.levels().len();
    let mut table = vec![vec![0usize; n]; n];
    for (&x, &t) in a.values().iter().zip(truth.values()) {
        table[set.nearest(t)][set.nearest(x)] += 1;
    }
    Ok(table)
}

/// Level values of `image` that do not belong to `set`, deduplicated.
pub fn foreign_values(image: &Image, set: &AdmissibleSet) -> Vec<f64> {
    let mut out: Vec<f64> = image
        .values()
        .iter()
        .copied()
        .filter(|v| !set.levels().contains(v))
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}
