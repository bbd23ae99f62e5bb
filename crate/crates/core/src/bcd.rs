//! Alternating exact weight updates and full-resolution image updates on one cost,
//! with a descent monitor.

use std::io::Write;

use crate::admm::{admm_solve, cost_at, AdmmConfig, CostBreakdown};
use crate::error::{check_dims, Error, Result};
use crate::forward::{DataOperator, Measurement};
use crate::grid::ImageGrid;
use crate::multires::LevelReport;
use crate::scalar::Real;
use crate::weight::{beta_solve, d_map, tau_map, TauMap, WeightMap};

/// Relative slack of the descent monitor.
pub const DESCENT_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct BcdConfig<T> {
    pub admm: AdmmConfig<T>,
    pub cycles: usize,
    pub rel_tol: T,
}

impl<T: Real> BcdConfig<T> {
    pub const DEFAULT_CYCLES: usize = 10;

    pub fn new(admm: AdmmConfig<T>) -> Self {
        Self { admm, cycles: Self::DEFAULT_CYCLES, rel_tol: T::lit(1e-5) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HalfStep {
    /// A coarse-to-fine level solution; `cycle` holds the level.
    Level,
    /// Weights solved against the starting image.
    Init,
    Image,
    Weight,
}

impl HalfStep {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Level => "level",
            Self::Init => "init",
            Self::Image => "image",
            Self::Weight => "weight",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow<T> {
    pub cycle: usize,
    pub half_step: HalfStep,
    pub cost: CostBreakdown<T>,
    /// Relative primal residual of the ADMM solve (zero for weight steps).
    pub primal_residual: T,
}

impl<T: Real> TraceRow<T> {
    pub fn j_sa(&self) -> T {
        self.cost.total()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BcdOutcome<T> {
    pub image: ImageGrid<T>,
    pub beta: WeightMap<T>,
    pub tau: TauMap<T>,
    pub trace: Vec<TraceRow<T>>,
    pub cycles_run: usize,
    /// Set when a half-step increased the cost and the loop stopped early.
    pub warning: Option<String>,
}

/// Trace rows for the levels of a coarse-to-fine run, coarsest first.
pub fn level_rows<T: Real>(levels: &[LevelReport<T>]) -> Vec<TraceRow<T>> {
    levels
        .iter()
        .map(|l| TraceRow {
            cycle: l.level,
            half_step: HalfStep::Level,
            cost: l.cost_out,
            primal_residual: l.admm.final_residual(),
        })
        .collect()
}

/// Writes `cycle,half_step,j_sa,data,lambda_reg,lambda_barrier,primal_residual`.
pub fn write_trace_csv<T: Real, W: Write>(trace: &[TraceRow<T>], mut out: W) -> std::io::Result<()> {
    writeln!(out, "cycle,half_step,j_sa,data,lambda_reg,lambda_barrier,primal_residual")?;
    for r in trace {
        writeln!(
            out,
            "{},{},{:e},{:e},{:e},{:e},{:e}",
            r.cycle,
            r.half_step.as_str(),
            r.j_sa().as_f64(),
            r.cost.data.as_f64(),
            r.cost.lambda_reg.as_f64(),
            r.cost.lambda_barrier().as_f64(),
            r.primal_residual.as_f64()
        )?;
    }
    Ok(())
}

fn descended<T: Real>(prev: T, next: T) -> bool {
    let slack = T::lit(DESCENT_SLACK) * prev.abs().max(T::one());
    next <= prev + slack
}

/// Alternates `s <- argmin_s J(s, beta)` and `beta <- argmin_beta J(s, beta)` from
/// `s0`, with barrier strengths frozen at `tau_map(s0)`.
pub fn bcd_solve<T: Real>(
    op: &DataOperator<T>,
    m: &Measurement<T>,
    s0: &ImageGrid<T>,
    cfg: &BcdConfig<T>,
) -> Result<BcdOutcome<T>> {
    let admm = &cfg.admm;
    admm.validate()?;
    check_dims(op.dims(), s0.dims())?;
    if admm.lambda == T::zero() && op.annihilates_constants() {
        return Err(Error::Degenerate(
            "lambda = 0 with a forward model that annihilates constants".into(),
        ));
    }
    let tau = tau_map(s0);
    let weights = |s: &ImageGrid<T>| beta_solve(&d_map(s, admm.p), &tau);
    let cost = |s: &ImageGrid<T>, beta: &WeightMap<T>| {
        cost_at(op, m, s, beta, Some(&tau), admm.lambda, admm.p, admm.u)
    };

    let mut s = s0.clone();
    let mut beta = weights(&s)?;
    let mut current = cost(&s, &beta)?;
    let mut trace = vec![TraceRow {
        cycle: 0,
        half_step: HalfStep::Init,
        cost: current,
        primal_residual: T::zero(),
    }];
    let mut warning = None;
    let mut cycles_run = 0;

    'cycles: for cycle in 1..=cfg.cycles {
        let start = current.total();

        let (s_new, report) = admm_solve(op, m, &s, &beta, 0, admm)?;
        let after_image = cost(&s_new, &beta)?;
        trace.push(TraceRow {
            cycle,
            half_step: HalfStep::Image,
            cost: after_image,
            primal_residual: report.final_residual(),
        });
        if !descended(current.total(), after_image.total()) {
            warning = Some(format!(
                "cycle {cycle}: image step raised the cost from {} to {}",
                current.total(),
                after_image.total()
            ));
            break 'cycles;
        }
        s = s_new;
        current = after_image;

        let beta_new = weights(&s)?;
        let after_weight = cost(&s, &beta_new)?;
        trace.push(TraceRow {
            cycle,
            half_step: HalfStep::Weight,
            cost: after_weight,
            primal_residual: T::zero(),
        });
        if !descended(current.total(), after_weight.total()) {
            warning = Some(format!(
                "cycle {cycle}: weight step raised the cost from {} to {}",
                current.total(),
                after_weight.total()
            ));
            break 'cycles;
        }
        beta = beta_new;
        current = after_weight;
        cycles_run = cycle;

        let progress = (start - current.total()).abs() / start.abs().max(T::min_positive_value());
        if progress < cfg.rel_tol {
            break;
        }
    }
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(BcdOutcome { image: s, beta, tau, trace, cycles_run, warning })
}
