//! Run configuration: a TOML file with one section per concern. Every key is
//! optional; unknown keys are rejected. Relative paths are taken relative to
//! the config file.

use std::path::{Path, PathBuf};

use atrt_core::phantom::{PhantomKind, PhantomSpec};
use atrt_core::solver::{ProxGradient, SolverConfig, YSolver};
use atrt_core::{AdmissibleSet, Bump, Point2, SmoothSource};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; geometry perturbation and noise seeds derive from it
    /// unless set explicitly.
    pub seed: u64,
    pub out: PathBuf,
    pub phantom: PhantomConfig,
    pub geometry: GeometryConfig,
    pub forward: ForwardConfig,
    pub recon: ReconConfig,
    pub solver: SolverSection,
    pub singscan: SingscanConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            phantom: PhantomConfig::default(),
            geometry: GeometryConfig::default(),
            forward: ForwardConfig::default(),
            recon: ReconConfig::default(),
            solver: SolverSection::default(),
            singscan: SingscanConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomConfig {
    /// `binary_shapes`, `three_region`, `multibang_shepp_logan` or `nested_disks`.
    pub name: String,
    pub grid: usize,
    /// Side length of the square field of view, centred at the origin.
    pub side: f64,
    /// Only for `nested_disks`: radii and the level painted inside each.
    pub radii: Option<Vec<f64>>,
    pub levels: Option<Vec<f64>>,
    /// Replaces the default three-bump source.
    pub source: Option<Vec<BumpConfig>>,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            name: "binary_shapes".into(),
            grid: 64,
            side: 2.0,
            radii: None,
            levels: None,
            source: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub projections: usize,
    /// Defaults to `ceil(M sqrt 2)` for the reconstruction grid.
    pub detectors: Option<usize>,
    pub perturb_seed: Option<u64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { projections: 12, detectors: None, perturb_seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardConfig {
    /// Attenuation and source image CSVs; both or neither. Without them the
    /// configured phantom is used.
    pub a: Option<PathBuf>,
    pub f: Option<PathBuf>,
    pub noise: f64,
    pub noise_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconConfig {
    /// Sinogram CSV. Without it data are simulated from the phantom on
    /// `data_grid` and reconstructed on `grid`.
    pub data: Option<PathBuf>,
    pub grid: usize,
    pub data_grid: usize,
    pub noise: f64,
    pub noise_seed: Option<u64>,
    /// Ground-truth attenuation CSV on the reconstruction grid. Simulated
    /// runs use the phantom itself when this is absent.
    pub truth: Option<PathBuf>,
    /// Constant initial attenuation; defaults to the mean of the extreme levels.
    pub a0: Option<f64>,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            data: None,
            grid: 64,
            data_grid: 96,
            noise: 0.05,
            noise_seed: None,
            truth: None,
            a0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxGradientName {
    Ista,
    Fista,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YSolverName {
    Newton,
    GradientDescent,
}

/// Mirrors [`SolverConfig`]; the admissible set comes from the phantom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub alpha: f64,
    pub lambda: f64,
    pub eta: f64,
    pub xi: f64,
    pub step: f64,
    pub beta0: f64,
    pub tau_plus: f64,
    pub tau_minus: f64,
    pub nu: f64,
    pub smoothing: f64,
    pub tol_x: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub tol_stationarity: f64,
    pub tol_outer: f64,
    pub y_tol: f64,
    pub cg_tol: f64,
    pub mb_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub max_x_iters: usize,
    pub max_cg_iters: usize,
    pub prox_gradient: ProxGradientName,
    pub y_solver: YSolverName,
    pub nonnegative_f: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = SolverConfig::new(AdmissibleSet::new(vec![0.0, 1.0]).expect("valid"));
        SolverSection {
            alpha: c.alpha,
            lambda: c.lambda,
            eta: c.eta,
            xi: c.xi,
            step: c.step,
            beta0: c.beta0,
            tau_plus: c.tau_plus,
            tau_minus: c.tau_minus,
            nu: c.nu,
            smoothing: c.smoothing,
            tol_x: c.tol_x,
            tol_primal: c.tol_primal,
            tol_dual: c.tol_dual,
            tol_stationarity: c.tol_stationarity,
            tol_outer: c.tol_outer,
            y_tol: c.y_tol,
            cg_tol: c.cg_tol,
            mb_tol: c.mb_tol,
            max_inner: c.max_inner,
            max_outer: c.max_outer,
            max_x_iters: c.max_x_iters,
            max_cg_iters: c.max_cg_iters,
            prox_gradient: ProxGradientName::Fista,
            y_solver: YSolverName::Newton,
            nonnegative_f: c.nonnegative_f,
        }
    }
}

impl SolverSection {
    pub fn to_solver_config(&self, admissible: AdmissibleSet) -> CliResult<SolverConfig> {
        let mut c = SolverConfig::new(admissible);
        c.alpha = self.alpha;
        c.lambda = self.lambda;
        c.eta = self.eta;
        c.xi = self.xi;
        c.step = self.step;
        c.beta0 = self.beta0;
        c.tau_plus = self.tau_plus;
        c.tau_minus = self.tau_minus;
        c.nu = self.nu;
        c.smoothing = self.smoothing;
        c.tol_x = self.tol_x;
        c.tol_primal = self.tol_primal;
        c.tol_dual = self.tol_dual;
        c.tol_stationarity = self.tol_stationarity;
        c.tol_outer = self.tol_outer;
        c.y_tol = self.y_tol;
        c.cg_tol = self.cg_tol;
        c.mb_tol = self.mb_tol;
        c.max_inner = self.max_inner;
        c.max_outer = self.max_outer;
        c.max_x_iters = self.max_x_iters;
        c.max_cg_iters = self.max_cg_iters;
        c.prox_gradient = match self.prox_gradient {
            ProxGradientName::Ista => ProxGradient::Ista,
            ProxGradientName::Fista => ProxGradient::Fista,
        };
        c.y_solver = match self.y_solver {
            YSolverName::Newton => YSolver::Newton,
            YSolverName::GradientDescent => YSolver::GradientDescent,
        };
        c.nonnegative_f = self.nonnegative_f;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SingscanConfig {
    /// Half-width of the dyadic offset ladder on each side of a singular ray.
    pub half_width: f64,
    /// Scan points, both sides together.
    pub points: usize,
    pub source: BumpConfig,
    pub disk_center: [f64; 2],
    pub disk_radius: f64,
    pub tangent_omega: f64,
    pub square_center: [f64; 2],
    pub square_half_side: f64,
    pub corner_omegas: Vec<f64>,
    /// `(s, omega)` of a ray expected to be regular.
    pub generic_ray: [f64; 2],
    pub outer_center: [f64; 2],
    pub outer_radius: f64,
    pub inner_center: [f64; 2],
    pub inner_radius: f64,
    pub increments: [f64; 2],
    /// Offset spacing and angle count of the recovery sweep.
    pub s_step: f64,
    pub angles: usize,
}

impl Default for SingscanConfig {
    fn default() -> Self {
        SingscanConfig {
            half_width: atrt_core::singularity::default_half_width(),
            points: 2 * atrt_core::singularity::LADDER_LEN,
            source: BumpConfig { center: [0.0, 0.0], radius: 1.6, amplitude: 1.0 },
            disk_center: [0.1, -0.05],
            disk_radius: 0.5,
            tangent_omega: 0.7,
            square_center: [0.0, 0.0],
            square_half_side: 0.5,
            corner_omegas: vec![std::f64::consts::FRAC_PI_4, 1.1],
            generic_ray: [0.13, 0.4],
            outer_center: [0.05, -0.03],
            outer_radius: 0.8,
            inner_center: [0.15, 0.05],
            inner_radius: 0.35,
            increments: [0.5, 0.5],
            s_step: 0.01,
            angles: 16,
        }
    }
}

impl BumpConfig {
    pub fn to_bump(&self) -> CliResult<Bump> {
        Ok(Bump::new(Point2::new(self.center[0], self.center[1]), self.radius, self.amplitude)?)
    }
}

/// Command-line overrides, applied after the file is read.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub grid: Option<usize>,
    pub projections: Option<usize>,
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Phantom,
    Forward,
    Recon,
    Singscan,
    Verify,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    /// Reads `path` (or starts from the defaults), applies `over` for
    /// `command`, resolves relative paths against the config directory and
    /// checks that every input file exists.
    pub fn load(path: Option<&Path>, over: &Overrides, command: Command) -> CliResult<Self> {
        let (mut cfg, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (Self::parse(&text)?, dir)
            }
            None => (RunConfig::default(), PathBuf::new()),
        };
        cfg.apply(over, command);
        cfg.resolve_paths(&base);
        cfg.check(command)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, over: &Overrides, command: Command) {
        if let Some(s) = over.seed {
            self.seed = s;
        }
        if let Some(o) = &over.out {
            self.out = o.clone();
        }
        if let Some(p) = over.projections {
            self.geometry.projections = p;
        }
        if let Some(g) = over.grid {
            match command {
                Command::Recon => self.recon.grid = g,
                _ => self.phantom.grid = g,
            }
        }
        if let Some(n) = over.noise {
            match command {
                Command::Recon => self.recon.noise = n,
                _ => self.forward.noise = n,
            }
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.forward.a);
        fix(&mut self.forward.f);
        fix(&mut self.recon.data);
        fix(&mut self.recon.truth);
    }

    fn check(&self, command: Command) -> CliResult<()> {
        for p in [&self.forward.a, &self.forward.f, &self.recon.data, &self.recon.truth]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(CliError::Validation(format!("input file {} not found", p.display())));
            }
        }
        if self.forward.a.is_some() != self.forward.f.is_some() {
            return Err(CliError::Validation("forward.a and forward.f go together".into()));
        }
        // Unknown phantom names are a usage error, everything else validation.
        self.phantom_spec()?;
        if self.phantom.grid == 0 || self.recon.grid == 0 || self.recon.data_grid == 0 {
            return Err(CliError::Validation("grid sizes must be positive".into()));
        }
        if self.geometry.projections == 0 {
            return Err(CliError::Validation("need at least one projection".into()));
        }
        for n in [self.forward.noise, self.recon.noise] {
            if !(n >= 0.0 && n.is_finite()) {
                return Err(CliError::Validation("noise level must be non-negative".into()));
            }
        }
        if command == Command::Recon {
            self.solver.to_solver_config(self.phantom_spec()?.admissible)?;
        }
        Ok(())
    }

    pub fn phantom_spec(&self) -> CliResult<PhantomSpec> {
        let mut spec = PhantomSpec::named(&self.phantom.name).map_err(|e| CliError::Usage(e.to_string()))?;
        match (&self.phantom.radii, &self.phantom.levels) {
            (None, None) => {}
            (Some(radii), Some(levels)) if matches!(spec.kind, PhantomKind::NestedDisks { .. }) => {
                spec.kind = PhantomKind::NestedDisks { radii: radii.clone(), levels: levels.clone() };
                spec.admissible = spec.kind.default_admissible();
            }
            _ => {
                return Err(CliError::Validation(
                    "phantom.radii and phantom.levels go together and need nested_disks".into(),
                ))
            }
        }
        if let Some(bumps) = &self.phantom.source {
            spec.source = SmoothSource::new(bumps.iter().map(BumpConfig::to_bump).collect::<CliResult<_>>()?);
        }
        Ok(spec)
    }

    pub fn perturb_seed(&self) -> u64 {
        self.geometry.perturb_seed.unwrap_or(self.seed)
    }

    pub fn forward_noise_seed(&self) -> u64 {
        self.forward.noise_seed.unwrap_or(self.seed.wrapping_add(1))
    }

    pub fn recon_noise_seed(&self) -> u64 {
        self.recon.noise_seed.unwrap_or(self.seed.wrapping_add(1))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
