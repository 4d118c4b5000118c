//! Grid-free AtRT for nested convex phantoms.

use alloc::vec::Vec;

use super::quad;
use super::shapes::NestedConvexPhantom;
use crate::grid::Ray;
use crate::math::exp;
use crate::source::Source;

/// Per-panel absolute quadrature tolerance.
pub const QUAD_TOL: f64 = 1e-13;

/// Piecewise-constant attenuation along one ray together with the beam
/// transform `Da` at each breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct LineProfile {
    knots: Vec<f64>,
    /// `values[i]` holds on `(knots[i], knots[i + 1])`.
    values: Vec<f64>,
    /// `Da` at `knots[i]`.
    beam: Vec<f64>,
}

impl LineProfile {
    pub fn new(ph: &NestedConvexPhantom, ray: &Ray) -> Self {
        let chords: Vec<(f64, f64, f64)> = ph
            .sets()
            .iter()
            .zip(ph.values())
            .filter_map(|(set, &c)| set.chord(ray).map(|(a, b)| (a, b, c)))
            .collect();
        let mut knots: Vec<f64> = chords.iter().flat_map(|&(a, b, _)| [a, b]).collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let values: Vec<f64> = knots
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                chords.iter().filter(|&&(a, b, _)| a < mid && mid < b).map(|&(_, _, c)| c).sum()
            })
            .collect();
        let mut beam = alloc::vec![0.0; knots.len()];
        for i in (0..values.len()).rev() {
            beam[i] = beam[i + 1] + values[i] * (knots[i + 1] - knots[i]);
        }
        LineProfile { knots, values, beam }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Attenuation at parameter `t` (zero outside every set).
    pub fn attenuation(&self, t: f64) -> f64 {
        match self.interval(t) {
            Some(i) => self.values[i],
            None => 0.0,
        }
    }

    /// `Da(t) = int_t^inf a`.
    pub fn beam(&self, t: f64) -> f64 {
        if self.knots.is_empty() || t >= self.knots[self.knots.len() - 1] {
            return 0.0;
        }
        if t <= self.knots[0] {
            return self.beam[0];
        }
        let i = self.interval(t).unwrap_or(0);
        self.beam[i + 1] + self.values[i] * (self.knots[i + 1] - t)
    }

    fn interval(&self, t: f64) -> Option<usize> {
        if self.knots.len() < 2 || t <= self.knots[0] || t >= self.knots[self.knots.len() - 1] {
            return None;
        }
        Some(self.knots.partition_point(|&k| k <= t) - 1)
    }
}

/// `R_a f(s, theta) = int f(s theta_perp + t theta) exp(-Da) dt`.
///
/// Breakpoints of `a` and of the source support are found in closed form;
/// each smooth piece is integrated adaptively.
pub fn analytic_atrt<S: Source + ?Sized>(ph: &NestedConvexPhantom, src: &S, ray: &Ray) -> f64 {
    upstream_integral(ph, src, ray, f64::INFINITY)
}

/// `int_{-inf}^{t_star} f exp(-Da) dt` along `ray`.
pub fn upstream_integral<S: Source + ?Sized>(
    ph: &NestedConvexPhantom,
    src: &S,
    ray: &Ray,
    t_star: f64,
) -> f64 {
    let profile = LineProfile::new(ph, ray);
    integrate_profile(&profile, src, ray, t_star)
}

pub(crate) fn integrate_profile<S: Source + ?Sized>(
    profile: &LineProfile,
    src: &S,
    ray: &Ray,
    t_star: f64,
) -> f64 {
    let mut support = Vec::new();
    src.support_on(ray, &mut support);
    if support.is_empty() {
        return 0.0;
    }
    let mut cuts: Vec<f64> = support.iter().flat_map(|&(a, b)| [a, b]).collect();
    cuts.extend_from_slice(&profile.knots);
    cuts.retain(|&c| c < t_star);
    if t_star.is_finite() {
        cuts.push(t_star);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (l, r) = (w[0], w[1]);
        let mid = 0.5 * (l + r);
        if !support.iter().any(|&(a, b)| a < mid && mid < b) {
            continue;
        }
        let av = profile.attenuation(mid);
        let dr = profile.beam(r);
        total += quad::integrate(
            |t| src.value(ray.point(t)) * exp(-(dr + av * (r - t))),
            l,
            r,
            QUAD_TOL,
        );
    }
    total
}
