//! `simulate`, `restore` and `evaluate`.
//!
//! Each command validates its configuration before touching the solver, so bad
//! keys exit with code 2 and only numerical failures exit with code 3.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use corosa::bcd::write_trace_csv;
use corosa::forward::{make_gaussian_psf, make_mask, mri_simulate, tirf_simulate};
use corosa::grid::padded_dims;
use corosa::metrics::{snr_db, ssim};
use corosa::{
    BcdConfig, Config, DataOperator, Image, Measurement, Model, NoiseSpec, PyramidSchedule,
    SchattenOrder,
};
use rayon::prelude::*;

use crate::config::{require, ModelKind, Preset, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io;
use crate::presets::{run_preset, SolverSettings};

pub const DEFAULT_PSF_SIGMA: f64 = 2.0;
pub const DEFAULT_PSF_RADIUS: usize = 8;
/// Default box bound as a multiple of the data peak.
pub const DEFAULT_BOUND_FACTOR: f64 = 1.2;

pub const CSV_HEADER: &str = "image,method,lambda,gamma,p,K,ssim,snr_db,seconds";

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.noise.seed = Some(s);
        }
        if let Some(d) = &self.out {
            cfg.output.dir = Some(d.clone());
        }
    }
}

fn config_err(key: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {e}"))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))
}

fn manifest_text(cfg: &RunConfig, run: toml::Table) -> CliResult<String> {
    let err = |e: toml::ser::Error| CliError::Output(format!("manifest: {e}"));
    let mut text = toml::to_string(cfg).map_err(err)?;
    text += "\n[run]\n";
    text += &toml::to_string(&run).map_err(err)?;
    Ok(text)
}

fn run_table(command: &str, start: Instant) -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("command".into(), command.into());
    t.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    t.insert("elapsed_seconds".into(), start.elapsed().as_secs_f64().into());
    t
}

fn order_number(p: SchattenOrder) -> u32 {
    match p {
        SchattenOrder::One => 1,
        SchattenOrder::Two => 2,
    }
}

/// Writes a simulated measurement (and mask for the Fourier model) plus a
/// manifest. Returns the output directory.
pub fn simulate(cfg: &RunConfig, o: &Overrides) -> CliResult<PathBuf> {
    let start = Instant::now();
    let mut cfg = cfg.clone();
    o.apply(&mut cfg);
    let truth_path = require(&cfg.input.ground_truth, "input.ground_truth")?;
    let kind = require(&cfg.model.kind, "model.kind")?;
    let seed = cfg.seed()?;
    let out = cfg.output_dir()?;

    enum Plan {
        Tirf { sigma: f64, radius: usize, gamma_p: f64, sigma_eta: f64 },
        Mri { mask: corosa::MaskKind, density: f64, mask_seed: u64, psnr: f64 },
    }
    let plan = match kind {
        ModelKind::Convolution => {
            let sigma = cfg.model.psf_sigma.unwrap_or(DEFAULT_PSF_SIGMA);
            let radius = cfg.model.psf_radius.unwrap_or(DEFAULT_PSF_RADIUS);
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(config_err("model.psf_sigma", "must be finite and > 0"));
            }
            let gamma_p = require(&cfg.noise.gamma_p, "noise.gamma_p")?;
            let sigma_eta = require(&cfg.noise.sigma_eta, "noise.sigma_eta")?;
            NoiseSpec::MixedPoissonGaussian { gamma_p, sigma_eta }
                .validate()
                .map_err(|e| config_err("noise", e))?;
            cfg.model.psf_sigma = Some(sigma);
            cfg.model.psf_radius = Some(radius);
            Plan::Tirf { sigma, radius, gamma_p, sigma_eta }
        }
        ModelKind::Fourier => {
            let mask = require(&cfg.model.mask_kind, "model.mask_kind")?;
            let density = require(&cfg.model.density, "model.density")?;
            if !(density > 0.0 && density <= 1.0) {
                return Err(config_err("model.density", format!("must be in (0, 1], got {density}")));
            }
            let psnr = require(&cfg.noise.psnr_db, "noise.psnr_db")?;
            NoiseSpec::CalibratedComplexGaussian { target_psnr_db: psnr }
                .validate()
                .map_err(|e| config_err("noise.psnr_db", e))?;
            let mask_seed = cfg.model.mask_seed.unwrap_or(seed);
            cfg.model.mask_seed = Some(mask_seed);
            Plan::Mri { mask: mask.into(), density, mask_seed, psnr }
        }
    };

    let truth = io::read_image(&truth_path)?;
    if truth.min() < 0.0 {
        return Err(CliError::input(&truth_path, "ground truth must be nonnegative"));
    }
    let (w, h) = truth.dims();
    create_dir(&out)?;
    match plan {
        Plan::Tirf { sigma, radius, gamma_p, sigma_eta } => {
            let psf = make_gaussian_psf(sigma, radius).map_err(|e| config_err("model", e))?;
            let m = tirf_simulate(&truth, &psf, gamma_p, sigma_eta, seed)?;
            let path = out.join("measurement.f64");
            io::write_f64(&path, &m)?;
            cfg.input.measurement = Some(path);
        }
        Plan::Mri { mask, density, mask_seed, psnr } => {
            let mask = make_mask(mask, w, h, density, mask_seed)?;
            let mask_path = out.join("mask.pgm");
            io::write_mask(&mask_path, &mask)?;
            let m = mri_simulate(&truth, &mask, psnr, seed)?;
            let path = out.join("measurement.c64");
            io::write_c64(&path, &m)?;
            cfg.input.measurement = Some(path);
            cfg.input.mask = Some(mask_path);
        }
    }
    let mut run = run_table("simulate", start);
    run.insert("seed".into(), (seed as i64).into());
    run.insert("width".into(), (w as i64).into());
    run.insert("height".into(), (h as i64).into());
    io::write_text(&out.join("manifest.toml"), &manifest_text(&cfg, run)?)?;
    log::info!("wrote simulation to {}", out.display());
    Ok(out)
}

/// Everything `restore` needs, resolved and validated.
pub struct Prepared {
    pub cfg: RunConfig,
    pub op: DataOperator<f64>,
    pub m: Measurement<f64>,
    pub settings: SolverSettings,
    /// Size of the restored image; the solve may run on a padded grid.
    pub dims: (usize, usize),
}

/// Reads the measurement and resolves every solver setting, filling defaults
/// back into the config so the manifest records them.
pub fn prepare(cfg: &RunConfig, lambda: Option<f64>) -> CliResult<Prepared> {
    let mut cfg = cfg.clone();
    let kind = require(&cfg.model.kind, "model.kind")?;
    let preset = require(&cfg.method.preset, "method.preset")?;
    let lambda = match lambda {
        Some(l) => l,
        None => require(&cfg.solver.lambda, "solver.lambda")?,
    };
    let levels = cfg.solver.levels.unwrap_or(PyramidSchedule::<f64>::DEFAULT_LEVELS);
    if levels > 16 {
        return Err(config_err("solver.levels", format!("{levels} is too many levels")));
    }
    let p = match (preset.forced_order(), cfg.solver.p) {
        (Some(forced), Some(p)) if p != order_number(forced) => {
            return Err(config_err(
                "solver.p",
                format!("preset {} requires p = {}", preset.name(), order_number(forced)),
            ));
        }
        (Some(forced), _) => forced,
        (None, p) => SchattenOrder::new(p.unwrap_or(1)).map_err(|e| config_err("solver.p", e))?,
    };
    match (preset, cfg.method.beta) {
        (Preset::Cotv | Preset::Cohs, Some(b)) if !(0.0..=1.0).contains(&b) => {
            return Err(config_err("method.beta", format!("must be in [0, 1], got {b}")));
        }
        (Preset::Cotv | Preset::Cohs, _) | (_, None) => {}
        (_, Some(_)) => {
            return Err(config_err("method.beta", "only used by the cotv and cohs presets"));
        }
    }
    let m_path = require(&cfg.input.measurement, "input.measurement")?;

    let (op, m, dims) = match kind {
        ModelKind::Convolution => {
            let scale = cfg
                .solver
                .intensity_scale
                .or(cfg.noise.gamma_p.map(|g| 1.0 / g))
                .unwrap_or(1.0);
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(config_err("solver.intensity_scale", "must be finite and > 0"));
            }
            cfg.solver.intensity_scale = Some(scale);
            let sigma = cfg.model.psf_sigma.unwrap_or(DEFAULT_PSF_SIGMA);
            let radius = cfg.model.psf_radius.unwrap_or(DEFAULT_PSF_RADIUS);
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(config_err("model.psf_sigma", "must be finite and > 0"));
            }
            cfg.model.psf_sigma = Some(sigma);
            cfg.model.psf_radius = Some(radius);
            let raw = io::read_image(&m_path)?;
            let dims = raw.dims();
            let (pw, ph) = padded_dims(dims.0, dims.1, levels);
            let m = raw.scaled(scale).pad_edge(pw, ph)?;
            let psf = make_gaussian_psf(sigma, radius).map_err(|e| config_err("model", e))?;
            let op = DataOperator::new(&Model::Convolution { psf }, pw, ph)
                .map_err(|e| config_err("model", e))?;
            (op, Measurement::Real(m), dims)
        }
        ModelKind::Fourier => {
            let scale = cfg.solver.intensity_scale.unwrap_or(1.0);
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(config_err("solver.intensity_scale", "must be finite and > 0"));
            }
            cfg.solver.intensity_scale = Some(scale);
            let mask_path = require(&cfg.input.mask, "input.mask")?;
            let mut raw = io::read_complex(&m_path)?;
            let mask = io::read_mask(&mask_path)?;
            let dims = raw.dims();
            if mask.dims() != dims {
                return Err(CliError::Input(format!(
                    "mask is {:?} but measurement is {:?}",
                    mask.dims(),
                    dims
                )));
            }
            let f = 1usize << levels;
            if dims.0 % f != 0 || dims.1 % f != 0 {
                return Err(config_err(
                    "solver.levels",
                    format!("{}x{} k-space is not divisible by 2^{levels}", dims.0, dims.1),
                ));
            }
            raw.data_mut().iter_mut().for_each(|c| *c *= scale);
            let op = DataOperator::new(&Model::FourierMask { mask }, dims.0, dims.1)
                .map_err(|e| CliError::input(&mask_path, e))?;
            (op, Measurement::Complex(raw), dims)
        }
    };

    let u = match cfg.solver.u {
        Some(u) => u,
        None => {
            let peak = match &m {
                Measurement::Real(g) => g.max(),
                Measurement::Complex(_) => op.adjoint(&m)?.data().iter().fold(0.0, |a: f64, v| a.max(v.abs())),
            };
            DEFAULT_BOUND_FACTOR * peak
        }
    };
    let mut admm = Config::new(lambda, u);
    admm.p = p;
    let s = &cfg.solver;
    admm.gamma = s.gamma.unwrap_or(admm.gamma);
    admm.max_iters = s.max_iters.unwrap_or(admm.max_iters);
    admm.cg_max_iters = s.cg_max_iters.unwrap_or(admm.cg_max_iters);
    admm.cg_rel_tol = s.cg_rel_tol.unwrap_or(admm.cg_rel_tol);
    admm.primal_tol = s.primal_tol.unwrap_or(admm.primal_tol);
    if let Some(k) = s.precond {
        admm.precond = k.into();
    }
    admm.validate().map_err(|e| config_err("solver", e))?;
    let cycles = s.cycles.unwrap_or(BcdConfig::<f64>::DEFAULT_CYCLES);
    let rel_tol = s.rel_tol.unwrap_or(1e-5);
    if !(rel_tol >= 0.0) {
        return Err(config_err("solver.rel_tol", "must be >= 0"));
    }

    let s = &mut cfg.solver;
    s.lambda = Some(lambda);
    s.gamma = Some(admm.gamma);
    s.p = Some(order_number(p));
    s.u = Some(u);
    s.levels = Some(levels);
    s.cycles = Some(cycles);
    s.rel_tol = Some(rel_tol);
    s.max_iters = Some(admm.max_iters);
    s.cg_max_iters = Some(admm.cg_max_iters);
    s.cg_rel_tol = Some(admm.cg_rel_tol);
    s.primal_tol = Some(admm.primal_tol);
    s.precond = Some(match admm.precond {
        corosa::admm::PrecondKind::None => crate::config::PrecondName::None,
        corosa::admm::PrecondKind::Unweighted => crate::config::PrecondName::Unweighted,
        corosa::admm::PrecondKind::Matched => crate::config::PrecondName::Matched,
    });
    let settings = SolverSettings { preset, admm, levels, cycles, rel_tol, beta: cfg.method.beta };
    Ok(Prepared { cfg, op, m, settings, dims })
}

/// Files written by one restoration.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub lambda: f64,
    pub image: Image,
}

/// Solves one prepared problem and writes its outputs into `cfg.output.dir`.
pub fn restore_prepared(prep: &Prepared) -> CliResult<RunOutput> {
    let start = Instant::now();
    let mut cfg = prep.cfg.clone();
    let dir = cfg.output_dir()?;
    create_dir(&dir)?;
    let result = run_preset(&prep.op, &prep.m, &prep.settings)?;
    let (w, h) = prep.dims;
    let image = result.image.crop(0, 0, w, h)?;

    io::write_f64(&dir.join("restored.f64"), &image)?;
    io::write_png(&dir.join("restored.png"), &image, 0.0, image.max())?;
    if let Some(beta) = &result.beta {
        let beta = beta.grid().crop(0, 0, w, h)?;
        io::write_f64(&dir.join("beta.f64"), &beta)?;
        io::write_png(&dir.join("beta.png"), &beta, 0.0, 1.0)?;
    }
    let mut csv = Vec::new();
    write_trace_csv(&result.trace, &mut csv).map_err(|e| CliError::Output(e.to_string()))?;
    fs::write(dir.join("trace.csv"), csv).map_err(|e| CliError::output(&dir, e))?;

    if let Some(c) = result.constant_beta {
        cfg.method.beta = Some(c);
    }
    let mut run = run_table("restore", start);
    let (pw, ph) = prep.op.dims();
    run.insert("width".into(), (w as i64).into());
    run.insert("height".into(), (h as i64).into());
    run.insert("padded_width".into(), (pw as i64).into());
    run.insert("padded_height".into(), (ph as i64).into());
    if let Some(warning) = &result.warning {
        run.insert("warning".into(), warning.clone().into());
    }
    io::write_text(&dir.join("manifest.toml"), &manifest_text(&cfg, run)?)?;
    log::info!("wrote restoration to {}", dir.display());
    Ok(RunOutput { dir, lambda: prep.settings.admm.lambda, image })
}

/// Score of one run of a lambda sweep.
#[derive(Clone, Debug)]
pub struct SweepScore {
    pub lambda: f64,
    pub dir: PathBuf,
    pub ssim: f64,
    pub snr_db: f64,
}

/// Restores once, or once per lambda of `--lambda-grid` into `lambda_<value>`
/// subdirectories. With a ground truth available the sweep is scored and the
/// best run is returned first.
pub fn restore(cfg: &RunConfig, o: &Overrides) -> CliResult<Vec<SweepScore>> {
    let mut cfg = cfg.clone();
    o.apply(&mut cfg);
    let Some(grid) = &o.lambda_grid else {
        let out = restore_prepared(&prepare(&cfg, None)?)?;
        return score_runs(&cfg, vec![out]);
    };
    if grid.is_empty() {
        return Err(config_err("--lambda-grid", "needs at least one value"));
    }
    let root = cfg.output_dir()?;
    let prepared = grid
        .iter()
        .map(|&l| {
            let mut c = cfg.clone();
            c.output.dir = Some(root.join(format!("lambda_{l}")));
            prepare(&c, Some(l))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let outputs =
        prepared.par_iter().map(restore_prepared).collect::<CliResult<Vec<_>>>()?;
    let mut scores = score_runs(&cfg, outputs)?;
    if !scores.is_empty() {
        let mut text = String::from("lambda,ssim,snr_db,dir\n");
        for s in &scores {
            text += &format!("{},{},{},{}\n", s.lambda, s.ssim, s.snr_db, s.dir.display());
        }
        io::write_text(&root.join("sweep.csv"), &text)?;
        scores.sort_by(|a, b| b.ssim.total_cmp(&a.ssim));
        let best = &scores[0];
        println!(
            "best lambda {} (ssim {:.4}, snr {:.2} dB): {}",
            best.lambda,
            best.ssim,
            best.snr_db,
            best.dir.display()
        );
    }
    Ok(scores)
}

fn score_runs(cfg: &RunConfig, outputs: Vec<RunOutput>) -> CliResult<Vec<SweepScore>> {
    let Some(path) = &cfg.input.ground_truth else {
        return Ok(Vec::new());
    };
    let truth = io::read_image(path)?;
    outputs
        .into_iter()
        .map(|o| {
            if truth.dims() != o.image.dims() {
                return Err(CliError::input(path, "ground truth and restoration sizes differ"));
            }
            Ok(SweepScore {
                lambda: o.lambda,
                ssim: ssim(&truth, &o.image)?,
                snr_db: snr_db(&truth, &o.image)?,
                dir: o.dir,
            })
        })
        .collect()
}

/// One line of the score report.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub image: String,
    pub method: String,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub p: Option<u32>,
    pub levels: Option<usize>,
    pub ssim: f64,
    pub snr_db: f64,
    pub seconds: Option<f64>,
}

impl ScoreRow {
    pub fn to_csv(&self) -> String {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(T::to_string).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.image,
            self.method,
            opt(&self.lambda),
            opt(&self.gamma),
            opt(&self.p),
            opt(&self.levels),
            self.ssim,
            self.snr_db,
            opt(&self.seconds)
        )
    }
}

/// Scores a run directory (restored image plus manifest) or a bare image file.
pub fn score_run(image: &str, reference: &Image, run: &Path) -> CliResult<ScoreRow> {
    let (est, manifest) = if run.is_dir() {
        let manifest = RunConfig::load(&run.join("manifest.toml"))?;
        (io::read_image(&run.join("restored.f64"))?, Some(manifest))
    } else {
        (io::read_image(run)?, None)
    };
    if est.dims() != reference.dims() {
        return Err(CliError::input(
            run,
            format!("estimate is {:?} but reference is {:?}", est.dims(), reference.dims()),
        ));
    }
    let method = match &manifest {
        Some(m) => m.method.preset.map(Preset::name).unwrap_or("unknown").to_string(),
        None => run.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    let solver = manifest.as_ref().map(|m| m.solver.clone()).unwrap_or_default();
    let seconds = manifest
        .as_ref()
        .and_then(|m| m.run.as_ref())
        .and_then(|r| r.get("elapsed_seconds"))
        .and_then(toml::Value::as_float);
    Ok(ScoreRow {
        image: image.to_string(),
        method,
        lambda: solver.lambda,
        gamma: solver.gamma,
        p: solver.p,
        levels: solver.levels,
        ssim: ssim(reference, &est)?,
        snr_db: snr_db(reference, &est)?,
        seconds,
    })
}

/// Appends one row per entry of `evaluate.runs` to the score CSV, writing the
/// header when the file is new. Returns the CSV path.
pub fn evaluate(cfg: &RunConfig, o: &Overrides) -> CliResult<PathBuf> {
    let mut cfg = cfg.clone();
    o.apply(&mut cfg);
    let ref_path = require(&cfg.input.ground_truth, "input.ground_truth")?;
    if cfg.evaluate.runs.is_empty() {
        return Err(CliError::Config("missing key `evaluate.runs`".into()));
    }
    let csv = match (&cfg.evaluate.csv, &cfg.output.dir) {
        (Some(c), _) => c.clone(),
        (None, Some(d)) => d.join("scores.csv"),
        (None, None) => return Err(CliError::Config("missing key `evaluate.csv`".into())),
    };
    let reference = io::read_image(&ref_path)?;
    let name = cfg.image_name();
    let rows = cfg
        .evaluate
        .runs
        .iter()
        .map(|r| score_run(&name, &reference, r))
        .collect::<CliResult<Vec<_>>>()?;

    if let Some(parent) = csv.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let fresh = !csv.exists();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&csv)
        .map_err(|e| CliError::output(&csv, e))?;
    let mut text = String::new();
    if fresh {
        text += CSV_HEADER;
        text.push('\n');
    }
    for r in &rows {
        text += &r.to_csv();
        text.push('\n');
    }
    file.write_all(text.as_bytes()).map_err(|e| CliError::output(&csv, e))?;
    Ok(csv)
}
