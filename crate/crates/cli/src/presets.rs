//! Method presets mapped onto the solver pipeline.

use corosa::admm::regularizer;
use corosa::bcd::level_rows;
use corosa::multires::baseline;
use corosa::{
    bcd_solve, multires_init, BcdConfig, BetaPolicy, Config, DataOperator, Image, Measurement,
    PyramidSchedule, SchattenOrder, TraceRow, Weights,
};

use crate::config::Preset;

/// Candidate constant weights for `cotv` and `cohs`.
pub const WEIGHT_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    pub preset: Preset,
    pub admm: Config,
    pub levels: usize,
    pub cycles: usize,
    pub rel_tol: f64,
    /// Constant weight for `cotv`/`cohs`; searched when `None`.
    pub beta: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Restoration {
    pub image: Image,
    /// Weight map of adaptive presets.
    pub beta: Option<Weights>,
    /// Weight used by the constant-weight presets.
    pub constant_beta: Option<f64>,
    pub trace: Vec<TraceRow<f64>>,
    pub warning: Option<String>,
}

/// Constant weight from `WEIGHT_GRID` with the lowest regularizer on the baseline.
pub fn constant_weight(
    op: &DataOperator<f64>,
    m: &Measurement<f64>,
    u: f64,
    p: SchattenOrder,
) -> corosa::Result<f64> {
    let b = baseline(op, m, u)?;
    let (w, h) = b.dims();
    let mut best = (f64::INFINITY, WEIGHT_GRID[0]);
    for c in WEIGHT_GRID {
        let r = regularizer(&b, &Weights::constant(w, h, c)?, p)?;
        if r < best.0 {
            best = (r, c);
        }
    }
    Ok(best.1)
}

/// Runs a preset. Presets with a fixed Schatten order override `settings.admm.p`.
pub fn run_preset(
    op: &DataOperator<f64>,
    m: &Measurement<f64>,
    settings: &SolverSettings,
) -> corosa::Result<Restoration> {
    let mut admm = settings.admm.clone();
    if let Some(p) = settings.preset.forced_order() {
        admm.p = p;
    }
    let mut constant_beta = None;
    let policy = match settings.preset {
        Preset::Tv1 => BetaPolicy::Fixed(1.0),
        Preset::Tv2 | Preset::Hs => BetaPolicy::Fixed(0.0),
        Preset::Cotv | Preset::Cohs => {
            let c = match settings.beta {
                Some(c) => c,
                None => constant_weight(op, m, admm.u, admm.p)?,
            };
            log::info!("constant weight {c}");
            constant_beta = Some(c);
            BetaPolicy::Fixed(c)
        }
        Preset::CorosaI | Preset::Corosa => BetaPolicy::Adaptive,
    };
    let schedule = PyramidSchedule::new(settings.levels, admm.clone());
    let init = multires_init(op, m, &schedule, policy)?;
    let mut trace = level_rows(&init.levels);
    let adaptive = settings.preset.is_adaptive();
    if settings.preset != Preset::Corosa {
        return Ok(Restoration {
            image: init.image,
            beta: adaptive.then_some(init.beta),
            constant_beta,
            trace,
            warning: None,
        });
    }
    let mut bcd = BcdConfig::new(admm);
    bcd.cycles = settings.cycles;
    bcd.rel_tol = settings.rel_tol;
    let out = bcd_solve(op, m, &init.image, &bcd)?;
    if let Some(w) = &out.warning {
        log::warn!("{w}");
    }
    trace.extend(out.trace);
    Ok(Restoration {
        image: out.image,
        beta: Some(out.beta),
        constant_beta,
        trace,
        warning: out.warning,
    })
}
