use std::path::Path;
use std::time::Instant;

use atrt_core::phantom::{
    add_noise, confusion, default_detector_count, make_geometry, make_phantom, misclassification,
};
use atrt_core::solver::{joint_reconstruct_from, least_squares_source, multibang_proportion, HistoryRow};
use atrt_core::{forward, Image, PixelGrid, ProjectionGeometry, Projector, Sinogram};
use serde::Serialize;

use crate::config::{Command, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io;
use crate::singscan;
use crate::verify;

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seeds: Seeds,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct Seeds {
    master: u64,
    perturb: u64,
    forward_noise: u64,
    recon_noise: u64,
}

fn write_manifest(cfg: &RunConfig, command: &str) -> CliResult<()> {
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seeds: Seeds {
            master: cfg.seed,
            perturb: cfg.perturb_seed(),
            forward_noise: cfg.forward_noise_seed(),
            recon_noise: cfg.recon_noise_seed(),
        },
        config: cfg,
    };
    let text = toml::to_string(&m).map_err(|e| CliError::Validation(format!("manifest: {e}")))?;
    io::write_text(&cfg.out.join("manifest.toml"), &text)
}

fn image_range(image: &Image) -> (f64, f64) {
    let lo = image.values().iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let hi = image.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

fn write_image_pair(out: &Path, a: &Image, f: &Image, lo: f64, hi: f64) -> CliResult<()> {
    io::write_image_csv(&out.join("a.csv"), a)?;
    io::write_image_csv(&out.join("f.csv"), f)?;
    io::write_pgm(&out.join("a.pgm"), a, lo, hi)?;
    let (flo, fhi) = image_range(f);
    io::write_pgm(&out.join("f.pgm"), f, flo, fhi)
}

fn geometry_for(cfg: &RunConfig, grid: &PixelGrid) -> CliResult<ProjectionGeometry> {
    let n_det = cfg.geometry.detectors.unwrap_or_else(|| default_detector_count(grid));
    Ok(make_geometry(cfg.geometry.projections, n_det, grid, cfg.perturb_seed())?)
}

pub fn run(cfg: &RunConfig, command: Command) -> CliResult<()> {
    match command {
        Command::Phantom => phantom(cfg),
        Command::Forward => forward_cmd(cfg),
        Command::Recon => recon(cfg),
        Command::Singscan => singscan_cmd(cfg),
        Command::Verify => verify_cmd(cfg),
    }
}

pub fn phantom(cfg: &RunConfig) -> CliResult<()> {
    let spec = cfg.phantom_spec()?;
    let grid = PixelGrid::spanning(cfg.phantom.grid, cfg.phantom.side)?;
    let (a, f) = make_phantom(&spec, grid)?;
    let set = &spec.admissible;
    write_image_pair(&cfg.out, &a, &f, set.min(), set.max())?;
    let echo = toml::to_string(&cfg.phantom).map_err(|e| CliError::Validation(e.to_string()))?;
    let levels: Vec<String> = set.levels().iter().map(|l| l.to_string()).collect();
    io::write_text(
        &cfg.out.join("spec.toml"),
        &format!("{echo}admissible = [{}]\n", levels.join(", ")),
    )?;
    write_manifest(cfg, "phantom")?;
    println!("wrote {}x{} phantom '{}' to {}", grid.size(), grid.size(), cfg.phantom.name, cfg.out.display());
    Ok(())
}

/// Noise-free or noisy data for the configured inputs.
pub fn simulate(cfg: &RunConfig) -> CliResult<Sinogram> {
    let (a, f) = match (&cfg.forward.a, &cfg.forward.f) {
        (Some(pa), Some(pf)) => {
            let a = io::read_image_csv(pa, cfg.phantom.side)?;
            let f = io::read_image_csv(pf, cfg.phantom.side)?;
            if a.grid() != f.grid() {
                return Err(CliError::Validation(format!(
                    "attenuation is {0}x{0} but source is {1}x{1}",
                    a.grid().size(),
                    f.grid().size()
                )));
            }
            (a, f)
        }
        _ => {
            let grid = PixelGrid::spanning(cfg.phantom.grid, cfg.phantom.side)?;
            make_phantom(&cfg.phantom_spec()?, grid)?
        }
    };
    let geo = geometry_for(cfg, a.grid())?;
    let d = forward(&a, &f, &geo)?;
    Ok(add_noise(&d, cfg.forward.noise, cfg.forward_noise_seed())?)
}

fn forward_cmd(cfg: &RunConfig) -> CliResult<()> {
    let d = simulate(cfg)?;
    io::write_sinogram_csv(&cfg.out.join("sinogram.csv"), &d)?;
    write_manifest(cfg, "forward")?;
    println!("wrote {} rays to {}", d.len(), cfg.out.join("sinogram.csv").display());
    Ok(())
}

/// Everything `recon` produces, before it is written out.
pub struct ReconOutput {
    pub a: Image,
    pub f: Image,
    pub history: Vec<HistoryRow>,
    pub converged: bool,
    pub objective: f64,
    pub mb_proportion: f64,
    pub misclassification: Option<f64>,
    pub confusion: Option<Vec<Vec<usize>>>,
    pub levels: Vec<f64>,
}

pub fn reconstruct(cfg: &RunConfig, mut progress: impl FnMut(&HistoryRow)) -> CliResult<ReconOutput> {
    let spec = cfg.phantom_spec()?;
    let solver = cfg.solver.to_solver_config(spec.admissible.clone())?;
    let grid = PixelGrid::spanning(cfg.recon.grid, cfg.phantom.side)?;
    let (d, simulated_truth) = match &cfg.recon.data {
        Some(path) => (io::read_sinogram_csv(path)?, None),
        None => {
            // Finer data grid than reconstruction grid, same geometry.
            let data_grid = PixelGrid::spanning(cfg.recon.data_grid, cfg.phantom.side)?;
            let (a, f) = make_phantom(&spec, data_grid)?;
            let geo = geometry_for(cfg, &grid)?;
            let clean = forward(&a, &f, &geo)?;
            let noisy = add_noise(&clean, cfg.recon.noise, cfg.recon_noise_seed())?;
            (noisy, Some(make_phantom(&spec, grid)?.0))
        }
    };
    let truth = match &cfg.recon.truth {
        Some(path) => {
            let t = io::read_image_csv(path, cfg.phantom.side)?;
            if t.grid() != &grid {
                return Err(CliError::Validation(format!(
                    "ground truth is {0}x{0}, reconstruction grid is {1}x{1}",
                    t.grid().size(),
                    grid.size()
                )));
            }
            Some(t)
        }
        None => simulated_truth,
    };
    let set = &solver.admissible;
    let a0_value = cfg.recon.a0.unwrap_or(0.5 * (set.min() + set.max()));
    let a0 = Image::constant(grid, a0_value);
    let projector = Projector::new(grid, d.geometry().clone());
    let f0 = least_squares_source(&projector, &a0, &d, &solver)?;
    let state = joint_reconstruct_from(&projector, &d, &solver, &a0, &f0, &mut progress)?;
    let objective = state.history.last().map_or(f64::NAN, |h| h.objective);
    let mb_proportion = multibang_proportion(&state.a, set, solver.mb_tol);
    let (mis, conf) = match &truth {
        Some(t) => (Some(misclassification(&state.a, t, set)?), Some(confusion(&state.a, t, set)?)),
        None => (None, None),
    };
    Ok(ReconOutput {
        a: state.a,
        f: state.f,
        history: state.history,
        converged: state.converged,
        objective,
        mb_proportion,
        misclassification: mis,
        confusion: conf,
        levels: set.levels().to_vec(),
    })
}

pub fn summary_csv(r: &ReconOutput) -> String {
    let mut rows: Vec<(&str, String)> = vec![
        ("outer_iterations", r.history.len().to_string()),
        ("converged", r.converged.to_string()),
        ("final_objective", r.objective.to_string()),
        ("mb_proportion", r.mb_proportion.to_string()),
    ];
    if let Some(m) = r.misclassification {
        rows.push(("misclassification", m.to_string()));
    }
    io::table_csv(&["metric", "value"], &rows)
}

pub fn confusion_csv(levels: &[f64], table: &[Vec<usize>]) -> String {
    let mut rows = Vec::new();
    for (i, row) in table.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            rows.push((levels[i], levels[j], count));
        }
    }
    io::table_csv(&["true_level", "recon_level", "count"], &rows)
}

fn recon(cfg: &RunConfig) -> CliResult<()> {
    let start = Instant::now();
    let r = reconstruct(cfg, |h| {
        eprintln!(
            "k {:>4}  objective {:.6e}  r {:.2e}  s {:.2e}  beta {:.3e}  mb {:.4}",
            h.k, h.objective, h.r, h.s, h.beta, h.mb_proportion
        );
    })?;
    let set_min = r.levels[0];
    let set_max = r.levels[r.levels.len() - 1];
    write_image_pair(&cfg.out, &r.a, &r.f, set_min, set_max)?;
    io::write_text(&cfg.out.join("history.csv"), &io::history_csv(&r.history))?;
    io::write_text(&cfg.out.join("summary.csv"), &summary_csv(&r))?;
    if let Some(table) = &r.confusion {
        io::write_text(&cfg.out.join("confusion.csv"), &confusion_csv(&r.levels, table))?;
    }
    write_manifest(cfg, "recon")?;
    println!(
        "{} outer iterations in {:.1} s; objective {:.6e}, multi-bang proportion {:.4}{}",
        r.history.len(),
        start.elapsed().as_secs_f64(),
        r.objective,
        r.mb_proportion,
        r.misclassification.map_or(String::new(), |m| format!(", misclassification {m:.4}"))
    );
    Ok(())
}

fn singscan_cmd(cfg: &RunConfig) -> CliResult<()> {
    let report = singscan::run(&cfg.singscan)?;
    for (name, scan) in &report.scans {
        io::write_text(&cfg.out.join(format!("{name}.csv")), &io::scan_csv(scan))?;
    }
    io::write_text(&cfg.out.join("boundaries.csv"), &io::boundary_csv(&report.sets))?;
    io::write_text(
        &cfg.out.join("report.csv"),
        &io::table_csv(&["check", "measured", "predicted", "ratio", "pass"], &report.rows),
    )?;
    let text = singscan::summary(&report);
    io::write_text(&cfg.out.join("report.txt"), &text)?;
    write_manifest(cfg, "singscan")?;
    print!("{text}");
    Ok(())
}

fn verify_cmd(cfg: &RunConfig) -> CliResult<()> {
    let rows = verify::run(cfg)?;
    let mut failed = 0;
    for r in &rows {
        println!("{} {:<28} {}", if r.pass { "PASS" } else { "FAIL" }, r.check, r.detail);
        failed += usize::from(!r.pass);
    }
    io::write_text(&cfg.out.join("verify.csv"), &io::table_csv(&["check", "pass", "detail"], &rows))?;
    write_manifest(cfg, "verify")?;
    if failed > 0 {
        return Err(CliError::Validation(format!("{failed} of {} checks failed", rows.len())));
    }
    Ok(())
}
