//! `atrt verify`: a quick run of the library's property checks on small random
//! instances, followed by the singularity checks.

use atrt_core::phantom::make_geometry;
use atrt_core::regularizer::{apply_d, apply_d_transpose, multibang_prox, tv_gradient, tv_smoothed};
use atrt_core::solver::{beta_update, SolverConfig};
use atrt_core::{
    assemble_system_matrix, fidelity_gradient_a, forward, trace_ray, AdmissibleSet, GradientField, Image,
    PixelGrid, Projector, Ray, Sinogram,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::singscan;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct VerifyRow {
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

fn row(check: &str, pass: bool, detail: String) -> VerifyRow {
    VerifyRow { check: check.into(), pass, detail }
}

struct Draw(ChaCha8Rng);

impl Draw {
    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.0.random_range(lo..hi)
    }

    fn image(&mut self, grid: PixelGrid, lo: f64, hi: f64) -> Image {
        let v = (0..grid.pixel_count()).map(|_| self.uniform(lo, hi)).collect();
        Image::new(grid, v).expect("sized to the grid")
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n.max(f64::MIN_POSITIVE)
}

pub fn run(cfg: &RunConfig) -> CliResult<Vec<VerifyRow>> {
    let mut rng = Draw(ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut rows = Vec::new();

    let grid = PixelGrid::spanning(16, 2.0)?;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let ray = Ray::new(rng.uniform(-1.0, 1.0), rng.uniform(0.0, std::f64::consts::TAU));
        let tr = trace_ray(&grid, &ray);
        // Chord of the square by slab clipping.
        let (p, d) = (ray.normal() * ray.s, ray.direction());
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (x, v) in [(p.x, d.x), (p.y, d.y)] {
            if v.abs() > 1e-15 {
                let (a, b) = ((-1.0 - x) / v, (1.0 - x) / v);
                lo = lo.max(a.min(b));
                hi = hi.min(a.max(b));
            }
        }
        worst = worst.max((tr.total_length() - (hi - lo).max(0.0)).abs());
    }
    rows.push(row("trace_lengths", worst < 1e-9, format!("max chord error {worst:.2e}")));

    let mut worst = 0.0f64;
    for _ in 0..20 {
        let g = PixelGrid::spanning(8, 2.0)?;
        let a = rng.image(g, 0.0, 2.0);
        let f = rng.image(g, 0.0, 1.0);
        let geo = make_geometry(6, 12, &g, 3)?;
        let d = forward(&a, &f, &geo)?;
        let m = assemble_system_matrix(&a, &geo)?.mul(f.values())?;
        worst = worst.max(rel_err(d.values(), &m));
    }
    rows.push(row("forward_equals_matrix", worst < 1e-12, format!("max relative gap {worst:.2e}")));

    let g8 = PixelGrid::spanning(8, 2.0)?;
    let mut worst_fid = 0.0f64;
    let mut worst_tv = 0.0f64;
    for seed in 0..5u64 {
        let a = rng.image(g8, 0.1, 2.0);
        let f = rng.image(g8, 0.0, 1.0);
        let geo = make_geometry(8, 13, &g8, seed)?;
        let clean = forward(&a, &f, &geo)?;
        let d = Sinogram::new(geo.clone(), clean.values().iter().map(|v| 0.8 * v + 0.02).collect())?;
        let proj = Projector::new(g8, geo);
        let grad = fidelity_gradient_a(&a, &f, &d)?;
        let tv = tv_gradient(&a, 1e-3)?;
        let (mut num_fid, mut num_tv) = (Vec::new(), Vec::new());
        for i in 0..g8.pixel_count() {
            let h = 1e-6;
            let (mut ap, mut am) = (a.clone(), a.clone());
            ap.values_mut()[i] += h;
            am.values_mut()[i] -= h;
            num_fid.push((proj.misfit(&ap, &f, &d)? - proj.misfit(&am, &f, &d)?) / (2.0 * h));
            num_tv.push((tv_smoothed(&ap, 1e-3)? - tv_smoothed(&am, 1e-3)?) / (2.0 * h));
        }
        worst_fid = worst_fid.max(rel_err(grad.values(), &num_fid));
        worst_tv = worst_tv.max(rel_err(tv.values(), &num_tv));
    }
    rows.push(row("fidelity_gradient", worst_fid <= 1e-5, format!("max relative error {worst_fid:.2e}")));
    rows.push(row("tv_gradient", worst_tv <= 1e-5, format!("max relative error {worst_tv:.2e}")));

    let a = rng.image(g8, -1.0, 1.0);
    let y = GradientField::from_vectors(
        g8,
        (0..g8.pixel_count() - 1).map(|_| [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)]).collect(),
    )?;
    let lhs = apply_d(&a).dot(&y);
    let rhs: f64 = a.values().iter().zip(apply_d_transpose(&y).values()).map(|(p, q)| p * q).sum();
    rows.push(row("d_adjoint", (lhs - rhs).abs() < 1e-12, format!("<Da,y> - <a,D'y> = {:.2e}", lhs - rhs)));

    let set = AdmissibleSet::new(vec![0.0, 0.25, 1.0])?;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let x = rng.uniform(-0.3, 1.3);
        let w = rng.uniform(0.01, 0.49);
        let p = multibang_prox(x, &set, w)?;
        let n = 100_000;
        let best = (0..=n)
            .map(|k| k as f64 / n as f64)
            .map(|z| (w * set.penalty(z) + 0.5 * (z - x) * (z - x), z))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map_or(0.0, |b| b.1);
        worst = worst.max((p - best).abs());
    }
    let fixed = set.levels().iter().all(|&l| multibang_prox(l, &set, 0.3).is_ok_and(|p| p == l));
    rows.push(row("prox_grid_search", worst <= 1e-4, format!("max gap {worst:.2e}")));
    rows.push(row("prox_fixes_levels", fixed, String::new()));

    let mut c = SolverConfig::new(set);
    c.nu = 10.0;
    let ok = beta_update(11.0, 1.0, 1.0, &c) == c.tau_plus
        && beta_update(1.0, 11.0, 1.0, &c) == 1.0 / c.tau_minus
        && beta_update(1.0, 1.0, 1.0, &c) == 1.0;
    rows.push(row("beta_update", ok, String::new()));

    let report = singscan::run(&cfg.singscan)?;
    for r in report.rows {
        let detail = if r.predicted.is_nan() {
            format!("measured {:.6e}", r.measured)
        } else {
            format!("measured {:.6e} predicted {:.6e}", r.measured, r.predicted)
        };
        rows.push(VerifyRow { check: r.check, pass: r.pass, detail });
    }
    Ok(rows)
}
