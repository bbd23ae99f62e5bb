//! Coarse-to-fine initialization.
//!
//! The coarsest level is solved from zeros with a purely second-order weight. Each
//! finer level recomputes the weights from the interpolated previous solution and
//! warm-starts from its 2-fold interpolation. Only the unknown shrinks with the
//! level; weights, barrier strengths and data always live on the fine grid.

use crate::admm::{admm_solve, objective_eval, AdmmConfig, AdmmReport, CostBreakdown};
use crate::error::{Error, Result};
use crate::forward::{DataOperator, Measurement};
use crate::grid::ImageGrid;
use crate::resample::{upsample2, upsample_j};
use crate::scalar::Real;
use crate::weight::{beta_solve, d_map, tau_map, TauMap, WeightMap};

/// How the per-pixel weights are chosen at each level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaPolicy<T> {
    /// Exact weight update from the previous level (pure second order at the top).
    Adaptive,
    /// The same constant everywhere and at every level.
    Fixed(T),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PyramidSchedule<T> {
    pub levels: usize,
    pub admm: AdmmConfig<T>,
    /// Per-level replacements for `admm`, indexed by level.
    pub overrides: Vec<Option<AdmmConfig<T>>>,
}

impl<T: Real> PyramidSchedule<T> {
    pub const DEFAULT_LEVELS: usize = 4;

    pub fn new(levels: usize, admm: AdmmConfig<T>) -> Self {
        Self { levels, admm, overrides: Vec::new() }
    }

    pub fn config(&self, level: usize) -> &AdmmConfig<T> {
        self.overrides.get(level).and_then(Option::as_ref).unwrap_or(&self.admm)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelReport<T> {
    pub level: usize,
    pub dims: (usize, usize),
    /// Cost at the warm start and at the level solution, with that level's weights.
    pub cost_warm: CostBreakdown<T>,
    pub cost_out: CostBreakdown<T>,
    pub admm: AdmmReport<T>,
    /// Level solution (on the level grid) and the weights it was solved with.
    pub image: ImageGrid<T>,
    pub beta: WeightMap<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiresOutcome<T> {
    pub image: ImageGrid<T>,
    pub beta: WeightMap<T>,
    /// Barrier strengths behind `beta`; `None` for fixed weights and the top level.
    pub tau: Option<TauMap<T>>,
    pub levels: Vec<LevelReport<T>>,
}

/// Weights and barrier strengths minimizing the cost for a fine-grid estimate `f`.
pub fn adaptive_weights<T: Real>(
    f: &ImageGrid<T>,
    p: crate::prox::SchattenOrder,
) -> Result<(WeightMap<T>, TauMap<T>)> {
    let tau = tau_map(f);
    let beta = beta_solve(&d_map(f, p), &tau)?;
    Ok((beta, tau))
}

/// Baseline estimate `clip(H^T m)`.
pub fn baseline<T: Real>(op: &DataOperator<T>, m: &Measurement<T>, u: T) -> Result<ImageGrid<T>> {
    Ok(op.adjoint(m)?.map(|v| v.max(T::zero()).min(u)))
}

pub fn multires_init<T: Real>(
    op: &DataOperator<T>,
    m: &Measurement<T>,
    schedule: &PyramidSchedule<T>,
    policy: BetaPolicy<T>,
) -> Result<MultiresOutcome<T>> {
    let k = schedule.levels;
    let (w, h) = op.dims();
    let f = 1usize << k;
    if w % f != 0 || h % f != 0 {
        return Err(Error::Parameter(format!("grid {w}x{h} not divisible by 2^{k}")));
    }
    let fixed = |c: T| WeightMap::constant(w, h, c);

    let (mut beta, mut tau) = match policy {
        BetaPolicy::Fixed(c) => (fixed(c)?, None),
        BetaPolicy::Adaptive if k == 0 => {
            let cfg = schedule.config(0);
            let (b, t) = adaptive_weights(&baseline(op, m, cfg.u)?, cfg.p)?;
            (b, Some(t))
        }
        BetaPolicy::Adaptive => (fixed(T::zero())?, None),
    };

    let mut s = ImageGrid::zeros(w >> k, h >> k);
    let mut reports = Vec::with_capacity(k + 1);
    for level in (0..=k).rev() {
        let cfg = schedule.config(level);
        if level < k {
            if let BetaPolicy::Adaptive = policy {
                let prev = upsample_j(&s, level + 1);
                let (b, t) = adaptive_weights(&prev, cfg.p)?;
                beta = b;
                tau = Some(t);
            }
            s = upsample2(&s);
        }
        let cost = |img: &ImageGrid<T>| {
            objective_eval(op, m, img, &beta, tau.as_ref(), level, cfg.lambda, cfg.p, cfg.u)
        };
        let cost_warm = cost(&s)?;
        let (out, admm) = admm_solve(op, m, &s, &beta, level, cfg)
            .map_err(|e| Error::Level { level, source: Box::new(e) })?;
        let cost_out = cost(&out)?;
        log::debug!(
            "level {level}: {} ADMM iterations, residual {:.3e}, cost {} -> {}",
            admm.iterations,
            admm.final_residual().as_f64(),
            cost_warm.smooth(),
            cost_out.smooth()
        );
        reports.push(LevelReport {
            level,
            dims: out.dims(),
            cost_warm,
            cost_out,
            admm,
            image: out.clone(),
            beta: beta.clone(),
        });
        s = out;
    }
    Ok(MultiresOutcome { image: s, beta, tau, levels: reports })
}
