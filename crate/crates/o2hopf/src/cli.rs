//! Command-line driver: run configuration, experiment orchestration and data-file emission.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io;
use crate::linalg::C64;
use crate::model::energy::{energy_check, linearization_error};
use crate::model::profile::solve_profile_with_tol;
use crate::model::system::structural_check;
use crate::model::{ChannelField, Grid, M0Params, ModelSystem, Problem};
use crate::reduced_o2::{self, fit_slope, CubicCoefficients};
use crate::reduction::{
    self, fit_coefficients, locate_periodic_orbits, solve_transverse, PdeOptions, PdeSetup, ReducibleSystem, ReductionOptions,
    SyntheticParams, SyntheticSystem,
};
use crate::spectral::crossing::multiplicity_check;
use crate::spectral::evans::circle;
use crate::spectral::{
    assemble_lk, find_crossing, spectrum_in_region, tune_m0, verify_equivariance, CrossingOptions, EigenBundle, Evans,
    EvansOptions, Projections, Region, WindingOptions,
};

pub const ENV_OUT: &str = "O2HOPF_OUT";
pub const ENV_THREADS: &str = "O2HOPF_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Profile,
    Spectrum,
    Evans,
    Crossing,
    EnergyCheck,
    Reduce,
    Bifurcate,
    Verify,
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Profile => "profile",
            Command::Spectrum => "spectrum",
            Command::Evans => "evans",
            Command::Crossing => "crossing",
            Command::EnergyCheck => "energy-check",
            Command::Reduce => "reduce",
            Command::Bifurcate => "bifurcate",
            Command::Verify => "verify",
            Command::Selftest => "selftest",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        <Command as clap::ValueEnum>::from_str(s, false).map_err(|_| Error::InvalidInput(format!("unknown command {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub l: f64,
    pub n1: usize,
    pub k_max: usize,
    pub dt: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.l, self.n1, self.k_max, self.dt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub profile: f64,
    pub genericity: f64,
    pub equivariance: f64,
    pub selftest_rel: f64,
    pub orbit_return: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { profile: 1e-8, genericity: 1e-10, equivariance: 1e-8, selftest_rel: 0.02, orbit_return: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub eps: f64,
    pub modes: Vec<i64>,
    pub region: Region,
}

/// Closed polyline contour at mode k, vertices as [re, im].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourSpec {
    pub k: i64,
    pub vertices: Vec<[f64; 2]>,
}

impl ContourSpec {
    pub fn circle(k: i64, center: C64, radius: f64, vertices: usize) -> Self {
        ContourSpec { k, vertices: circle(center, radius, vertices).iter().map(|z| [z.re, z.im]).collect() }
    }

    pub fn points(&self) -> Vec<C64> {
        self.vertices.iter().map(|v| C64::new(v[0], v[1])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvansConfig {
    pub eps: f64,
    pub options: EvansOptionsConfig,
    pub winding: WindingConfig,
    pub contours: Vec<ContourSpec>,
}

// Local mirrors so the config derives PartialEq.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvansOptionsConfig {
    pub l: f64,
    pub rtol: f64,
    pub renorm_every: usize,
    pub lambda_ref: f64,
    pub splitting_tol: f64,
}

impl From<EvansOptionsConfig> for EvansOptions {
    fn from(c: EvansOptionsConfig) -> Self {
        EvansOptions { l: c.l, rtol: c.rtol, renorm_every: c.renorm_every, lambda_ref: c.lambda_ref, splitting_tol: c.splitting_tol }
    }
}

impl Default for EvansOptionsConfig {
    fn default() -> Self {
        let o = EvansOptions::default();
        EvansOptionsConfig { l: o.l, rtol: o.rtol, renorm_every: o.renorm_every, lambda_ref: o.lambda_ref, splitting_tol: o.splitting_tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindingConfig {
    pub root_tol: f64,
    pub max_depth: usize,
    pub max_evals: usize,
    pub max_step: f64,
}

impl From<WindingConfig> for WindingOptions {
    fn from(c: WindingConfig) -> Self {
        WindingOptions { root_tol: c.root_tol, max_depth: c.max_depth, max_evals: c.max_evals, max_step: c.max_step }
    }
}

impl Default for WindingConfig {
    fn default() -> Self {
        let o = WindingOptions::default();
        WindingConfig { root_tol: o.root_tol, max_depth: o.max_depth, max_evals: o.max_evals, max_step: o.max_step }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingConfig {
    pub interval: [f64; 2],
    pub gamma_tol: f64,
    pub max_iter: usize,
    pub derivative_step: f64,
    /// Retune (alpha_c, beta) of M0 on the configured grid so the crossing frequency is this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_omega: Option<f64>,
}

impl CrossingConfig {
    pub fn options(&self) -> CrossingOptions {
        CrossingOptions { gamma_tol: self.gamma_tol, max_iter: self.max_iter, derivative_step: self.derivative_step }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub s: usize,
    pub t0: f64,
    pub amplitudes: Vec<f64>,
    pub base_amplitude: f64,
    pub halvings: usize,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionConfig {
    pub sample_radius: f64,
    pub n_samples: usize,
    pub options: ReductionOptions,
    pub pde: PdeOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub theta: f64,
    pub draws: usize,
    pub with_crossing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestConfig {
    pub kappa: f64,
    pub lambda: [f64; 2],
    pub gamma: [f64; 2],
    pub eps: Vec<f64>,
    pub sample_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: String,
    /// Worker threads; 0 picks the available parallelism.
    pub threads: usize,
    /// Eps values (offsets from the crossing) for `bifurcate`.
    pub eps: Vec<f64>,
    pub model: ModelSystem,
    pub grid: GridConfig,
    pub tolerances: Tolerances,
    pub profile: ProfileConfig,
    pub spectrum: SpectrumConfig,
    pub evans: EvansConfig,
    pub crossing: CrossingConfig,
    pub energy: EnergyConfig,
    pub reduction: ReductionConfig,
    pub verify: VerifyConfig,
    pub selftest: SelftestConfig,
}

/// (alpha_c, beta) of M0 tuned to the crossing frequency 0.8 on the default grid.
pub const M0_TUNED: (f64, f64) = (1.232441163116112, 0.9719492323526346);

impl Default for RunConfig {
    fn default() -> Self {
        Self::m0()
    }
}

impl RunConfig {
    fn common(model: ModelSystem, grid: GridConfig) -> Self {
        RunConfig {
            seed: 7,
            output_dir: "out".into(),
            threads: 0,
            eps: (0..5).map(|i| 2e-3 * 10f64.powf(i as f64 / 4.0)).collect(),
            model,
            grid,
            tolerances: Tolerances::default(),
            profile: ProfileConfig { eps: 0.0 },
            spectrum: SpectrumConfig { eps: 0.0, modes: vec![0, 1, 2], region: Region::new(-0.5, 0.5, -2.0, 2.0) },
            evans: EvansConfig {
                eps: 0.0,
                options: EvansOptionsConfig::default(),
                winding: WindingConfig::default(),
                contours: Vec::new(),
            },
            crossing: CrossingConfig { interval: [-0.1, 0.1], gamma_tol: 1e-10, max_iter: 60, derivative_step: 1e-4, tune_omega: None },
            energy: EnergyConfig { s: 1, t0: 2.0, amplitudes: vec![1e-3, 2e-3, 5e-3, 1e-2], base_amplitude: 1e-2, halvings: 3, horizon: 1.0 },
            reduction: ReductionConfig { sample_radius: 0.1, n_samples: 6, options: ReductionOptions::default(), pde: PdeOptions::default() },
            verify: VerifyConfig { theta: 0.7, draws: 3, with_crossing: true },
            selftest: SelftestConfig { kappa: 1.0, lambda: [-1.0, 0.3], gamma: [-2.0, -0.1], eps: vec![1e-2, 2e-2, 4e-2], sample_radius: 0.05 },
        }
    }

    /// Tuned M0 on the desk grid with contours around the crossing pair.
    pub fn m0() -> Self {
        let p = M0Params { alpha_c: M0_TUNED.0, beta: M0_TUNED.1, ..M0Params::default() };
        let mut c = Self::common(ModelSystem::M0(p), GridConfig { l: 8.0, n1: 65, k_max: 4, dt: 0.1 });
        c.evans.contours = vec![
            ContourSpec::circle(1, C64::new(0.0, 0.8), 0.1, 12),
            ContourSpec::circle(-1, C64::new(0.0, -0.8), 0.1, 12),
            ContourSpec { k: 0, vertices: vec![[0.05, -1.0], [1.0, -1.0], [1.0, 1.0], [0.05, 1.0]] },
        ];
        c
    }

    /// M1 with the translation-mode contour at k = 0.
    pub fn m1() -> Self {
        let mut c = Self::common(ModelSystem::m1(), GridConfig { l: 12.0, n1: 129, k_max: 4, dt: 0.05 });
        c.evans.contours = vec![
            ContourSpec::circle(0, C64::new(0.0, 0.0), 0.05, 12),
            ContourSpec { k: 1, vertices: vec![[0.05, -1.0], [1.0, -1.0], [1.0, 1.0], [0.05, 1.0]] },
        ];
        c.verify.with_crossing = false;
        c
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Checks made before any computation.
    pub fn validate(&self, command: Command) -> Result<()> {
        self.model.validate()?;
        self.grid.build()?;
        if command == Command::Bifurcate {
            if self.eps.is_empty() {
                return Err(Error::InvalidInput("bifurcate needs a nonempty eps list".into()));
            }
            if self.eps.iter().any(|e| *e == 0.0 || !e.is_finite()) {
                return Err(Error::InvalidInput("eps values must be finite and nonzero".into()));
            }
        }
        if command == Command::Evans {
            for (i, c) in self.evans.contours.iter().enumerate() {
                if c.vertices.len() < 3 {
                    return Err(Error::InvalidInput(format!("contour {i} has fewer than 3 vertices")));
                }
            }
        }
        if command == Command::EnergyCheck && self.energy.amplitudes.len() < 2 {
            return Err(Error::InvalidInput("energy-check needs at least two amplitudes".into()));
        }
        if command == Command::Selftest && self.selftest.eps.is_empty() {
            return Err(Error::InvalidInput("selftest needs a nonempty eps list".into()));
        }
        let [a, b] = self.crossing.interval;
        if matches!(command, Command::Crossing | Command::Reduce | Command::Bifurcate) && !(a < b) {
            return Err(Error::InvalidInput(format!("empty crossing interval [{a}, {b}]")));
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    RunConfig::from_toml(&text)
}

/// Listing of what a command read and wrote.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub files: Vec<String>,
    pub summary: Value,
}

struct Out {
    dir: PathBuf,
    files: Vec<String>,
}

impl Out {
    fn new(dir: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Out { dir: PathBuf::from(dir), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    /// CSV plus the gnuplot variant.
    fn table(&mut self, stem: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let p = self.path(&format!("{stem}.csv"));
        io::write_csv(&p, header, rows)?;
        let p = self.path(&format!("{stem}.dat"));
        io::write_dat(&p, header, rows)
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let p = self.path(name);
        io::write_json(&p, v)
    }
}

/// Runs one command and writes its artifacts and manifest into the output directory.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate(command)?;
    crate::set_threads(cfg.threads);
    let mut out = Out::new(&cfg.output_dir)?;
    let summary = match command {
        Command::Profile => cmd_profile(cfg, &mut out)?,
        Command::Spectrum => cmd_spectrum(cfg, &mut out)?,
        Command::Evans => cmd_evans(cfg, &mut out)?,
        Command::Crossing => cmd_crossing(cfg, &mut out)?,
        Command::EnergyCheck => cmd_energy(cfg, &mut out)?,
        Command::Reduce => cmd_reduce(cfg, &mut out)?,
        Command::Bifurcate => cmd_bifurcate(cfg, &mut out)?,
        Command::Verify => cmd_verify(cfg, &mut out)?,
        Command::Selftest => cmd_selftest(cfg, &mut out)?,
    };
    let name = format!("{}_manifest.json", command.name());
    let mut files = out.files.clone();
    files.push(name.clone());
    let m = Manifest { command: command.name().into(), version: env!("CARGO_PKG_VERSION").into(), config: cfg.clone(), files, summary };
    io::write_json(&out.dir.join(name), &m)?;
    Ok(m)
}

/// Machine-readable error record.
pub fn error_json(command: Option<Command>, e: &Error) -> Value {
    json!({
        "command": command.map(|c| c.name()),
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": e.exit_code(),
    })
}

fn problem(cfg: &RunConfig, model: ModelSystem, eps: f64) -> Result<Problem> {
    let grid = cfg.grid.build()?;
    let p = solve_profile_with_tol(&model, eps, &grid, cfg.tolerances.profile)?;
    Problem::with_profile(model, eps, grid, p)
}

fn cplx(v: [f64; 2]) -> C64 {
    C64::new(v[0], v[1])
}

fn cmd_profile(cfg: &RunConfig, out: &mut Out) -> Result<Value> {
    let grid = cfg.grid.build()?;
    let p = solve_profile_with_tol(&cfg.model, cfg.profile.eps, &grid, cfg.tolerances.profile)?;
    let mut header = vec!["x1".to_string()];
    header.extend((0..p.n).map(|c| format!("u{c}")));
    let rows: Vec<Vec<f64>> = (0..p.x.len()).map(|j| std::iter::once(p.x[j]).chain(p.at(j).iter().cloned()).collect()).collect();
    let h: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    out.table("profile", &h, &rows)?;
    let meta = json!({
        "model": cfg.model.name(),
        "eps": p.eps,
        "grid": cfg.grid,
        "residual": p.residual,
        "boundary_gap": p.boundary_gap,
        "u_minus": p.u_minus,
        "u_plus": p.u_plus,
    });
    out.json("profile.json", &meta)?;
    Ok(meta)
}

fn cmd_spectrum(cfg: &RunConfig, out: &mut Out) -> Result<Value> {
    let pb = problem(cfg, cfg.model, cfg.spectrum.eps)?;
    let mut rows = Vec::new();
    let mut counts = Vec::new();
    for &k in &cfg.spectrum.modes {
        let op = assemble_lk(&pb, k);
        let sp = spectrum_in_region(&op, &cfg.spectrum.region)?;
        counts.push(json!({"k": k, "count": sp.len(), "rightmost": sp.first().map(|e| e.lambda)}));
        for e in sp {
            rows.push(vec![k as f64, pb.eps, e.lambda.re, e.lambda.im, e.residual]);
        }
    }
    out.table("spectrum", &["k", "eps", "lambda_re", "lambda_im", "residual"], &rows)?;
    Ok(json!({"model": cfg.model.name(), "eps": pb.eps, "region": cfg.spectrum.region, "modes": counts}))
}

/// Crossing-number test of a point against a closed polyline.
pub fn inside_polygon(poly: &[C64], z: C64) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.im > z.im) != (b.im > z.im) {
            let x = a.re + (z.im - a.im) * (b.re - a.re) / (b.im - a.im);
            if z.re < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn cmd_evans(cfg: &RunConfig, out: &mut Out) -> Result<Value> {
    let ev = Evans::new(cfg.model, cfg.evans.eps, cfg.evans.options.into());
    let pb = problem(cfg, cfg.model, cfg.evans.eps)?;
    let wopts: WindingOptions = cfg.evans.winding.into();
    let mut samples = Vec::new();
    let mut counts = Vec::new();
    for (i, c) in cfg.evans.contours.iter().enumerate() {
        let pts = c.points();
        for z in &pts {
            let d = ev.evaluate(*z, c.k)?;
            samples.push(vec![i as f64, c.k as f64, cfg.evans.eps, z.re, z.im, d.re, d.im, d.norm(), d.arg()]);
        }
        let winding = ev.root_count(&pts, c.k, &wopts)?;
        let eig = crate::spectral::eigen::eigenvalues_sorted(&assemble_lk(&pb, c.k))?;
        let inside: Vec<C64> = eig.into_iter().filter(|l| inside_polygon(&pts, *l)).collect();
        counts.push(vec![i as f64, c.k as f64, winding as f64, inside.len() as f64]);
    }
    out.table("evans_contour", &["contour", "k", "eps", "lambda_re", "lambda_im", "d_re", "d_im", "abs_d", "arg_d"], &samples)?;
    out.table("evans_counts", &["contour", "k", "evans_count", "matrix_count"], &counts)?;
    let agree = counts.iter().all(|r| r[2] == r[3]);
    Ok(json!({"model": cfg.model.name(), "eps": cfg.evans.eps, "counts": counts, "counts_agree": agree}))
}

/// The model to use, with M0 retuned when requested, and its crossing.
pub fn prepare_crossing(cfg: &RunConfig) -> Result<(ModelSystem, EigenBundle)> {
    let grid = cfg.grid.build()?;
    let model = match (cfg.model, cfg.crossing.tune_omega) {
        (ModelSystem::M0(p), Some(w)) => ModelSystem::M0(tune_m0(p, &grid, w)?),
        (m, _) => m,
    };
    let [a, b] = cfg.crossing.interval;
    let bundle = find_crossing(&model, &grid, (a, b), &cfg.crossing.options())?;
    Ok((model, bundle))
}

fn bundle_summary(model: &ModelSystem, b: &EigenBundle) -> Value {
    json!({
        "model": model,
        "eps0": b.eps0,
        "k_star": b.k_star,
        "lambda": b.lambda,
        "omega0": b.omega0,
        "gamma_prime0": b.gamma_prime0,
        "residuals": b.residuals,
    })
}

fn cmd_crossing(cfg: &RunConfig, out: &mut Out) -> Result<Value> {
    let (model, b) = prepare_crossing(cfg)?;
    let grid = cfg.grid.build()?;
    let n = b.n;
    let mut header = vec!["x1".to_string()];
    for name in ["w", "w_adj"] {
        for c in 0..n {
            header.push(format!("{name}{c}_re"));
            header.push(format!("{name}{c}_im"));
        }
    }
    let rows: Vec<Vec<f64>> = (0..b.w.len() / n)
        .map(|j| {
            let mut r = vec![grid.x(j + 1)];
            for v in [&b.w, &b.w_adj] {
                for c in 0..n {
                    r.push(v[j * n + c].re);
                    r.push(v[j * n + c].im);
                }
            }
            r
        })
        .collect();
    let h: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    out.table("eigenfunction", &h, &rows)?;
    let s = bundle_summary(&model, &b);
    out.json("crossing.json", &s)?;
    Ok(s)
}

/// Smooth localized perturbation on modes 0 and 1 with seeded random component phases.
pub fn test_field(pb: &Problem, seed: u64) -> ChannelField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = pb.n();
    let ph: Vec<C64> = (0..2 * n).map(|_| C64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI))).collect();
    let mut f = ChannelField::zeros(n, &pb.grid);
    for j in 1..pb.grid.n1 - 1 {
        let x = pb.grid.x(j);
        for c in 0..n {
            f.set(0, j, c, C64::new((-x * x).exp() * ph[c].re, 0.0));
            f.set(1, j, c, ph[n + c] * 0.5 * (-(x - 0.5) * (x - 0.5)).exp());
        }
    }
    f
}

fn cmd_energy(cfg: &RunConfig, out: &mut Out) -> Result<Value> {
    let e = &cfg.energy;
    let pb = problem(cfg, cfg.model, cfg.profile.eps)?;
    let shape = test_field(&pb, cfg.seed);
    let chk = energy_check(&pb, &shape, &e.amplitudes, e.t0, e.s)?;
    let rows: Vec<Vec<f64>> = (0..chk.amplitudes.len()).map(|i| vec![chk.amplitudes[i], chk.growth[i], chk.dissipation[i]]).collect();
    out.table("energy", &["amplitude", "growth", "dissipation"], &rows)?;
    let base = crate::model::energy::hs_norm(&shape, &pb.grid, e.s)?;
    let mut lin = Vec::new();
    let mut amp = e.base_amplitude;
    for _ in 0..=e.halvings {
        let r = linearization_error(&pb, &shape.scaled(amp / base), e.horizon, e.s)?;
        lin.push(vec![r.amplitude, r.err, r.en_bound_ratio]);
        amp *= 0.5;
    }
    let factors: Vec<f64> = lin.windows(2).map(|w| w[0][1] / w[1][1]).collect();
    out.table("linearization", &["amplitude", "err", "err_over_amp2"], &lin)?;
    Ok(json!({
        "model": cfg.model.name(),
        "growth_spread": chk.growth_spread,
        "dissipation_exponent": chk.dissipation_exponent,
        "halving_factors": factors,
    }))
}

fn fit_pde(cfg: &RunConfig) -> Result<(ModelSystem, EigenBundle, reduction::CoefficientFit)> {
    let (model, b) = prepare_crossing(cfg)?;
    let sys = PdeSetup::new(model, cfg.grid.build()?, &b, 0.0, cfg.reduction.pde)?;
    let fit = fit_coefficients(&sys, cfg.reduction.sample_radius, cfg.reduction.n_samples, &cfg.reduction.options)?;
    Ok((model, b, fit))
}

fn cmd_reduce(cfg: &RunConfig, out: &mut Out) -> Result<Value> {
    let (model, b, fit) = fit_pde(cfg)?;
    let c = fit.coefficients()?;
    let report = reduced_o2::check_genericity_with_tol(&c, cfg.tolerances.genericity);
    let s = json!({
        "crossing": bundle_summary(&model, &b),
        "fit": fit,
        "spurious_ok": fit.spurious_ok(cfg.reduction.options.spurious_ratio),
        "genericity": report,
    });
    out.json("coefficients.json", &s)?;
    Ok(s)
}

fn orbit_rows(recs: &[reduction::OrbitRecord]) -> Vec<Vec<f64>> {
    let kind = |k: &str| match k {
        "trivial" => 0.0,
        "traveling1" | "traveling2" => 1.0,
        _ => 2.0,
    };
    recs.iter()
        .map(|r| {
            vec![
                r.eps,
                kind(&r.kind),
                r.amplitude,
                r.field_norm,
                r.a1.re,
                r.a1.im,
                r.a2.re,
                r.a2.im,
                r.mu,
                r.period,
                r.return_residual,
                r.traveling_speed.unwrap_or(f64::NAN),
                r.shift_residual,
                r.unshifted_residual,
            ]
        })
        .collect()
}

const ORBIT_HEADER: [&str; 14] = [
    "eps", "kind", "amplitude", "field_norm", "a1_re", "a1_im", "a2_re", "a2_im", "mu", "T", "return_residual", "traveling_speed",
    "shift_residual", "unshifted_residual",
];

/// Log-log slopes of field norm against |eps| for each nontrivial kind.
pub fn branch_slopes(recs: &[reduction::OrbitRecord]) -> Vec<(String, Option<f64>)> {
    let mut kinds: Vec<String> = recs.iter().filter(|r| r.kind != "trivial").map(|r| r.kind.clone()).collect();
    kinds.dedup();
    kinds.sort();
    kinds.dedup();
    kinds
        .into_iter()
        .map(|k| {
            let sel: Vec<&reduction::OrbitRecord> = recs.iter().filter(|r| r.kind == k).collect();
            let x: Vec<f64> = sel.iter().map(|r| r.eps.abs().ln()).collect();
            let y: Vec<f64> = sel.iter().map(|r| r.field_norm.ln()).collect();
            (k, fit_slope(&x, &y))
        })
        .collect()
}

fn cmd_bifurcate(cfg: &RunConfig, out: &mut Out) -> Result<Value> {
    let (model, b, fit) = fit_pde(cfg)?;
    let grid = cfg.grid.build()?;
    let opts = &cfg.reduction.options;
    let setup_at = |eps: f64| PdeSetup::new(model, grid, &b, eps, cfg.reduction.pde);
    let search = locate_periodic_orbits(setup_at, &fit, &cfg.eps, opts)?;
    for (i, &eps) in cfg.eps.iter().enumerate() {
        let recs: Vec<&reduction::OrbitRecord> = search.orbits.iter().filter(|r| r.eps == eps && r.kind != "trivial").collect();
        if recs.is_empty() {
            continue;
        }
        let sys = setup_at(eps)?;
        for r in recs {
            let z = solve_transverse(&sys, r.a1, r.a2, r.period, 0.0, opts)?;
            let v0 = sys.lin_comb(&sys.center(r.a1, r.a2), 1.0, &z.field);
            let p = out.path(&format!("orbit_{i}_{}.o2hf", r.kind));
            io::write_checkpoint(&p, &grid, &v0)?;
        }
    }
    out.table("orbits", &ORBIT_HEADER, &orbit_rows(&search.orbits))?;
    out.json("orbits.json", &search)?;
    let worst = search.orbits.iter().map(|r| r.return_residual).fold(0.0, f64::max);
    Ok(json!({
        "crossing": bundle_summary(&model, &b),
        "fit": fit,
        "slopes": branch_slopes(&search.orbits),
        "max_return_residual": worst,
        "return_ok": worst <= cfg.tolerances.orbit_return,
        "failures": search.failures.len(),
    }))
}

fn cmd_verify(cfg: &RunConfig, out: &mut Out) -> Result<Value> {
    let (model, bundle) = if cfg.verify.with_crossing {
        let (m, b) = prepare_crossing(cfg)?;
        (m, Some(b))
    } else {
        (cfg.model, None)
    };
    let eps = bundle.as_ref().map(|b| b.eps0).unwrap_or(cfg.profile.eps);
    let pb = problem(cfg, model, eps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let structural = structural_check(&model, eps, 200, &mut rng);
    let mult = match &bundle {
        Some(b) => Some(multiplicity_check(&pb, b)?),
        None => None,
    };
    let proj = bundle.map(Projections::new);
    let rep = verify_equivariance(&pb, proj.as_ref(), cfg.verify.theta, cfg.verify.draws, cfg.seed);
    let worst = rep.max_residual();
    let s = json!({
        "model": model,
        "eps": eps,
        "structural": structural,
        "structural_ok": structural.all_hold(),
        "equivariance": rep,
        "max_residual": worst,
        "multiplicity_singular_values": mult,
    });
    out.json("verify.json", &s)?;
    if !(worst <= cfg.tolerances.equivariance) {
        return Err(Error::ProjectionLeak(worst));
    }
    if !structural.all_hold() {
        return Err(Error::InvalidInput("model fails its structural checks".into()));
    }
    Ok(s)
}

fn cmd_selftest(cfg: &RunConfig, out: &mut Out) -> Result<Value> {
    let st = &cfg.selftest;
    let params = SyntheticParams::prescribed(st.kappa, 2.0 * PI, cplx(st.lambda), cplx(st.gamma))?;
    let sys = SyntheticSystem::new(params, 0.0);
    let opts = &cfg.reduction.options;
    let fit = fit_coefficients(&sys, st.sample_radius, cfg.reduction.n_samples, opts)?;
    let (le, ge) = params.expected();
    let rel_l = (fit.lambda - le).norm() / le.norm();
    let rel_g = (fit.gamma - ge).norm() / ge.norm();
    let kappa_rel = (fit.kappa - st.kappa).abs() / st.kappa.abs();
    let search = locate_periodic_orbits(|e| Ok(SyntheticSystem::new(params, e)), &fit, &st.eps, opts)?;
    let expected = CubicCoefficients::new(st.kappa, 2.0 * PI, le, ge)?;
    out.table("selftest_orbits", &ORBIT_HEADER, &orbit_rows(&search.orbits))?;
    let pass = rel_l <= cfg.tolerances.selftest_rel
        && rel_g <= cfg.tolerances.selftest_rel
        && kappa_rel <= cfg.tolerances.selftest_rel
        && fit.spurious_ok(opts.spurious_ratio)
        && search.failures.is_empty();
    let s = json!({
        "expected": expected,
        "fit": fit,
        "lambda_rel_error": rel_l,
        "gamma_rel_error": rel_g,
        "kappa_rel_error": kappa_rel,
        "orbits": search.orbits.len(),
        "failures": search.failures,
        "pass": pass,
    });
    out.json("selftest.json", &s)?;
    if !pass {
        return Err(Error::FitDegenerate(rel_l.max(rel_g)));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_configs_round_trip() {
        for c in [RunConfig::m0(), RunConfig::m1()] {
            let t = c.to_toml().unwrap();
            let back = RunConfig::from_toml(&t).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_toml().unwrap(), t);
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let t = RunConfig::m0().to_toml().unwrap().replacen("seed = 7", "seed = 7\nsede = 3", 1);
        match RunConfig::from_toml(&t) {
            Err(Error::Parse(m)) => assert!(m.contains("sede"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_eps_list_is_rejected_up_front() {
        let mut c = RunConfig::m0();
        c.eps.clear();
        c.output_dir = "/nonexistent/should-not-be-created".into();
        let e = run(Command::Bifurcate, &c).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(!Path::new(&c.output_dir).exists());
    }

    #[test]
    fn polygon_membership() {
        let sq = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 1.0), C64::new(0.0, 1.0)];
        assert!(inside_polygon(&sq, C64::new(0.5, 0.5)));
        assert!(!inside_polygon(&sq, C64::new(1.5, 0.5)));
        let c = ContourSpec::circle(0, C64::new(0.0, 0.8), 0.1, 12).points();
        assert!(inside_polygon(&c, C64::new(0.0, 0.8)));
        assert!(!inside_polygon(&c, C64::new(0.0, 0.5)));
    }
}
