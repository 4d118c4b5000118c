//! The singularity checks behind `atrt singscan`: a tangent ray of a disk, corner
//! rays of a square, a regular ray, a ray along a square edge, and recovery of
//! two nested disks.

use atrt_core::singularity::{
    analytic_atrt, detect_flat_segment, ds_scan, fit_circle, fit_exponent, measure_corner_jump,
    measure_tangent_coefficient, one_sided_limit, predict_corner_jump, predict_tangent_coefficient,
    recover_nested_boundaries, ConvexShape, DerivativeScan, NestedConvexPhantom, RecoveredSet,
    Side, QUAD_TOL,
};
use atrt_core::{Point2, Ray, SmoothSource};

use crate::config::SingscanConfig;
use crate::error::CliResult;

/// One line of the verification report. `predicted` is NaN when there is
/// nothing to compare against.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ReportRow {
    pub check: String,
    pub measured: f64,
    pub predicted: f64,
    pub ratio: f64,
    pub pass: bool,
}

impl ReportRow {
    fn new(check: impl Into<String>, measured: f64, predicted: f64, pass: bool) -> Self {
        let ratio = if predicted.is_nan() { f64::NAN } else { measured / predicted };
        ReportRow { check: check.into(), measured, predicted, ratio, pass }
    }
}

#[derive(Debug, Clone)]
pub struct SingscanReport {
    pub rows: Vec<ReportRow>,
    /// `(file stem, scan)` pairs.
    pub scans: Vec<(String, DerivativeScan)>,
    pub sets: Vec<RecoveredSet>,
}

impl SingscanReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

fn pt(p: [f64; 2]) -> Point2 {
    Point2::new(p[0], p[1])
}

pub fn run(cfg: &SingscanConfig) -> CliResult<SingscanReport> {
    let src = SmoothSource::new(vec![cfg.source.to_bump()?]);
    let mut rows = Vec::new();
    let mut scans = Vec::new();

    // Tangent ray on the far side of the disk: inside is s < s*.
    let center = pt(cfg.disk_center);
    let disk = NestedConvexPhantom::new(vec![ConvexShape::disk(center, cfg.disk_radius)?], vec![1.0])?;
    let normal = Ray::new(0.0, cfg.tangent_omega).normal();
    let s_star = center.dot(normal) + cfg.disk_radius;
    let tangent = Ray::new(s_star, cfg.tangent_omega);
    let scan = ds_scan(&disk, &src, s_star, cfg.tangent_omega, cfg.half_width, cfg.points)?;
    let p = fit_exponent(&scan, Side::Minus);
    rows.push(ReportRow::new("tangent_exponent", p, -0.5, (p + 0.5).abs() <= 0.05));
    let measured = measure_tangent_coefficient(&scan, Side::Minus)?;
    let predicted = predict_tangent_coefficient(&disk, &src, center + normal * cfg.disk_radius, &tangent)?;
    rows.push(ReportRow::new(
        "tangent_coefficient",
        measured,
        predicted,
        (measured / predicted - 1.0).abs() <= 0.03,
    ));
    scans.push(("tangent_scan".to_string(), scan));

    // Corner rays through the lower-right corner of the square.
    let sq_center = pt(cfg.square_center);
    let square = NestedConvexPhantom::new(
        vec![ConvexShape::square(sq_center, cfg.square_half_side)?],
        vec![1.0],
    )?;
    let corner = sq_center + Point2::new(cfg.square_half_side, -cfg.square_half_side);
    for (i, &omega) in cfg.corner_omegas.iter().enumerate() {
        let ray = Ray::through(corner, omega);
        let scan = ds_scan(&square, &src, ray.s, omega, cfg.half_width, cfg.points)?;
        let measured = measure_corner_jump(&scan)?;
        let predicted = predict_corner_jump(&square, &src, corner, &ray)?;
        rows.push(ReportRow::new(
            format!("corner_jump_{i}"),
            measured,
            predicted,
            (measured / predicted - 1.0).abs() <= 0.02,
        ));
        // A corner gives a bounded jump, not a power-law blow-up.
        let worst = fit_exponent(&scan, Side::Plus).abs().max(fit_exponent(&scan, Side::Minus).abs());
        rows.push(ReportRow::new(format!("corner_exponent_{i}"), worst, f64::NAN, worst < 0.1));
        scans.push((format!("corner_scan_{i}"), scan));
    }

    let [gs, gw] = cfg.generic_ray;
    let scan = ds_scan(&square, &src, gs, gw, cfg.half_width, cfg.points)?;
    let (minus, plus) = (one_sided_limit(&scan, Side::Minus), one_sided_limit(&scan, Side::Plus));
    rows.push(ReportRow::new("generic_limit_gap", (plus - minus).abs(), f64::NAN, (plus - minus).abs() <= 1e-4));
    scans.push(("generic_scan".to_string(), scan));

    // The top edge seen edge-on.
    let edge = Ray::new(sq_center.y + cfg.square_half_side, 0.0);
    let d = 1e-7;
    let jump = (analytic_atrt(&square, &src, &Ray::new(edge.s + d, 0.0))
        - analytic_atrt(&square, &src, &Ray::new(edge.s - d, 0.0)))
    .abs();
    let flat = detect_flat_segment(&square, &src, &edge);
    rows.push(ReportRow::new("flat_edge_jump", jump, f64::NAN, flat && jump > 10.0 * QUAD_TOL));

    let outer = (pt(cfg.outer_center), cfg.outer_radius);
    let inner = (pt(cfg.inner_center), cfg.inner_radius);
    let nested = NestedConvexPhantom::new(
        vec![ConvexShape::disk(outer.0, outer.1)?, ConvexShape::disk(inner.0, inner.1)?],
        cfg.increments.to_vec(),
    )?;
    let reach = outer.0.norm() + outer.1 + 0.2;
    let n_s = (2.0 * reach / cfg.s_step).round() as usize;
    let s_grid: Vec<f64> = (0..=n_s).map(|i| -reach + cfg.s_step * i as f64).collect();
    let omegas: Vec<f64> = (0..cfg.angles)
        .map(|i| i as f64 * std::f64::consts::TAU / cfg.angles as f64 + 0.01)
        .collect();
    let sets = recover_nested_boundaries(&nested, &src, &s_grid, &omegas)?;
    rows.push(ReportRow::new("recovered_sets", sets.len() as f64, 2.0, sets.len() == 2));
    for (i, (set, (c, r))) in sets.iter().zip([outer, inner]).enumerate() {
        let (fc, fr) = fit_circle(&set.points)?;
        let ce = fc.distance(c) / r;
        let re = (fr - r).abs() / r;
        rows.push(ReportRow::new(format!("set_{i}_center_error"), ce, f64::NAN, ce <= 0.02));
        rows.push(ReportRow::new(format!("set_{i}_radius_error"), re, f64::NAN, re <= 0.02));
    }
    Ok(SingscanReport { rows, scans, sets })
}

pub fn summary(report: &SingscanReport) -> String {
    let mut out = String::new();
    for r in &report.rows {
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        if r.predicted.is_nan() {
            out.push_str(&format!("{verdict} {:<24} measured {:.6e}\n", r.check, r.measured));
        } else {
            out.push_str(&format!(
                "{verdict} {:<24} measured {:.6e} predicted {:.6e} ratio {:.5}\n",
                r.check, r.measured, r.predicted, r.ratio
            ));
        }
    }
    out
}
