use atrt_core::phantom::{make_geometry, make_phantom, PhantomSpec};
use atrt_core::regularizer::apply_d;
use atrt_core::solver::{
    a_update, beta_update, f_update, joint_reconstruct, least_squares_source, multibang_proportion,
    objective, y_step, ProxGradient, SolverConfig, YSolver,
};
use atrt_core::{AdmissibleSet, GradientField, Image, PixelGrid, Projector, Sinogram};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    projector: Projector,
    a: Image,
    f: Image,
    d: Sinogram,
    cfg: SolverConfig,
}

fn instance(m: usize) -> Instance {
    let grid = PixelGrid::spanning(m, 2.0).unwrap();
    let spec = PhantomSpec::named("binary_shapes").unwrap();
    let (a, f) = make_phantom(&spec, grid).unwrap();
    let geo = make_geometry(12, 2 * m, &grid, 1).unwrap();
    let projector = Projector::new(grid, geo);
    let d = projector.forward(&a, &f).unwrap();
    let mut cfg = SolverConfig::new(spec.admissible.clone());
    cfg.alpha = 0.01;
    cfg.step = 10.0;
    cfg.lambda = 1e-3;
    cfg.eta = 1e-3;
    cfg.max_outer = 5;
    Instance { projector, a, f, d, cfg }
}

#[test]
fn beta_update_follows_residual_balancing() {
    let mut cfg = SolverConfig::new(AdmissibleSet::new(vec![0.0, 1.0]).unwrap());
    cfg.nu = 10.0;
    cfg.tau_plus = 3.0;
    cfg.tau_minus = 4.0;
    assert_eq!(beta_update(101.0, 10.0, 1.0, &cfg), 3.0);
    assert_eq!(beta_update(100.0, 10.0, 1.0, &cfg), 1.0);
    assert_eq!(beta_update(10.0, 101.0, 1.0, &cfg), 0.25);
    assert_eq!(beta_update(10.0, 100.0, 1.0, &cfg), 1.0);
    assert_eq!(beta_update(0.0, 0.0, 1.0, &cfg), 1.0);
}

#[test]
fn y_step_solves_its_equation() {
    let grid = PixelGrid::spanning(9, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = Image::new(grid, (0..81).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
    let mu = GradientField::from_vectors(
        grid,
        (0..80).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect(),
    )
    .unwrap();
    let mut cfg = SolverConfig::new(AdmissibleSet::new(vec![0.0, 1.0]).unwrap());
    for solver in [YSolver::Newton, YSolver::GradientDescent] {
        cfg.y_solver = solver;
        let (beta, weight) = (0.7, 0.3);
        let y = y_step(&x, &mu, beta, weight, &cfg).unwrap();
        let dx = apply_d(&x);
        for ((yi, mi), di) in y.vectors().iter().zip(mu.vectors()).zip(dx.vectors()) {
            let n = (yi[0] * yi[0] + yi[1] * yi[1] + cfg.smoothing).sqrt();
            for k in 0..2 {
                let res = weight * yi[k] / n - mi[k] + beta * (yi[k] - di[k]);
                assert!(res.abs() < 1e-6, "{solver:?}: residual {res}");
            }
        }
    }
}

#[test]
fn a_update_decreases_the_objective_and_meets_tolerances() {
    let inst = instance(16);
    let a0 = Image::constant(*inst.a.grid(), 0.5);
    let before = objective(&inst.projector, &a0, &inst.f, &inst.d, &inst.cfg).unwrap().0;
    for pg in [ProxGradient::Ista, ProxGradient::Fista] {
        let mut cfg = inst.cfg.clone();
        cfg.prox_gradient = pg;
        let up = a_update(&inst.projector, &a0, &inst.f, &inst.d, &cfg).unwrap();
        let after = objective(&inst.projector, &up.a, &inst.f, &inst.d, &cfg).unwrap().0;
        assert!(after < before, "{pg:?}: {after} >= {before}");
        assert!(up.converged);
        assert!(up.state.r < cfg.tol_primal && up.state.s_res < cfg.tol_dual);
        let set = &cfg.admissible;
        assert!(up.a.values().iter().all(|&v| v >= set.min() && v <= set.max()));
    }
}

#[test]
fn f_update_with_true_attenuation_fits_the_data() {
    let inst = instance(16);
    let f0 = Image::zeros(*inst.a.grid());
    let start = inst.projector.misfit(&inst.a, &f0, &inst.d).unwrap();
    let up = f_update(&inst.projector, &inst.a, &f0, &inst.d, &inst.cfg).unwrap();
    let end = inst.projector.misfit(&inst.a, &up.f, &inst.d).unwrap();
    assert!(up.converged);
    assert!(end < 0.05 * start, "{end} vs {start}");
}

#[test]
fn least_squares_source_reproduces_noise_free_data() {
    let inst = instance(12);
    let f = least_squares_source(&inst.projector, &inst.a, &inst.d, &inst.cfg).unwrap();
    let mis = inst.projector.misfit(&inst.a, &f, &inst.d).unwrap();
    let scale: f64 = inst.d.values().iter().map(|v| v * v).sum();
    assert!(mis < 1e-6 * scale);
    // The true source is one exact solution; the fitted one reproduces the data
    // just as well.
    assert!(inst.projector.misfit(&inst.a, &inst.f, &inst.d).unwrap() < 1e-20);
}

#[test]
fn joint_run_is_deterministic_and_reports_history() {
    let inst = instance(12);
    let a0 = Image::constant(*inst.a.grid(), 0.5);
    let r1 = joint_reconstruct(&inst.projector, &inst.d, &inst.cfg, &a0).unwrap();
    let r2 = joint_reconstruct(&inst.projector, &inst.d, &inst.cfg, &a0).unwrap();
    assert_eq!(r1, r2);
    assert!(!r1.history.is_empty() && r1.history.len() <= inst.cfg.max_outer);
    let last = r1.history.last().unwrap();
    assert_eq!(last.mb_proportion, multibang_proportion(&r1.a, &inst.cfg.admissible, inst.cfg.mb_tol));
    for (i, row) in r1.history.iter().enumerate() {
        assert_eq!(row.k, i + 1);
        assert!(row.objective.is_finite());
    }
}

#[test]
fn invalid_configs_are_rejected_before_work() {
    let inst = instance(8);
    let mut cfg = inst.cfg.clone();
    cfg.alpha = 0.1;
    cfg.step = 5.0;
    assert!(a_update(&inst.projector, &inst.a, &inst.f, &inst.d, &cfg).is_err());
    let mut cfg = inst.cfg.clone();
    cfg.xi = f64::INFINITY;
    assert!(cfg.validate().is_ok());
    let outside = Image::constant(*inst.a.grid(), 2.0);
    assert!(joint_reconstruct(&inst.projector, &inst.d, &inst.cfg, &outside).is_err());
}
