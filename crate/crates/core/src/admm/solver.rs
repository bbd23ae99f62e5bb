//! ADMM on the split problem
//! `min F(E s) + lambda (|d_f|_1,2 + |d_s|_S,p) + box(d_0)` subject to
//! `d_f = D_f' E s`, `d_s = D_s' E s`, `d_0 = E s`.

use crate::error::{check_dims, Error, Result};
use crate::forward::{DataOperator, Measurement};
use crate::grid::{ImageGrid, VectorField};
use crate::prox::{shrink_hessian, shrink_vec2, SchattenOrder};
use crate::resample::{upsample_j, upsample_j_adjoint};
use crate::scalar::Real;
use crate::weight::WeightMap;

use super::cg::{pcg, CgStats};
use super::objective::cost_at;
use super::precond::{PrecondKind, PrecondWeights, Preconditioner};
use super::weighted::{
    apply_hessian_metric, weighted_grad, weighted_grad_adjoint, weighted_hess,
    weighted_hess_adjoint,
};

#[derive(Clone, Debug, PartialEq)]
pub struct AdmmConfig<T> {
    pub lambda: T,
    /// Penalty parameter of the augmented Lagrangian.
    pub gamma: T,
    pub p: SchattenOrder,
    /// Upper bound of the box constraint.
    pub u: T,
    pub max_iters: usize,
    pub cg_max_iters: usize,
    pub cg_rel_tol: T,
    /// Stop once `|M E s - d| / |d|` falls to this level.
    pub primal_tol: T,
    pub precond: PrecondKind,
}

impl<T: Real> AdmmConfig<T> {
    pub const DEFAULT_MAX_ITERS: usize = 100;

    pub fn new(lambda: T, u: T) -> Self {
        Self {
            lambda,
            gamma: T::one(),
            p: SchattenOrder::One,
            u,
            max_iters: Self::DEFAULT_MAX_ITERS,
            cg_max_iters: 50,
            cg_rel_tol: T::lit(1e-5),
            primal_tol: T::lit(1e-4),
            precond: PrecondKind::Matched,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        positive("gamma", self.gamma)?;
        positive("u", self.u)?;
        positive("cg_rel_tol", self.cg_rel_tol)?;
        if !(self.primal_tol >= T::zero()) {
            return Err(Error::Parameter("primal_tol must be >= 0".into()));
        }
        if self.cg_max_iters == 0 {
            return Err(Error::Parameter("cg_max_iters must be > 0".into()));
        }
        Ok(())
    }
}

/// ADMM variables. `s` lives on the level grid, everything else on the fine grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitState<T> {
    pub s: ImageGrid<T>,
    pub d_f: VectorField<T>,
    pub d_s: VectorField<T>,
    pub d_0: ImageGrid<T>,
    pub w_f: VectorField<T>,
    pub w_s: VectorField<T>,
    pub w_0: ImageGrid<T>,
}

impl<T: Real> SplitState<T> {
    /// Splitting variables consistent with `s`, zero duals.
    pub fn new(s: ImageGrid<T>, beta: &WeightMap<T>, level: usize, u: T) -> Result<Self> {
        let x = upsample_j(&s, level);
        let d_f = weighted_grad(&x, beta)?;
        let d_s = weighted_hess(&x, beta)?;
        let (w, h) = x.dims();
        let d_0 = x.map(|v| v.max(T::zero()).min(u));
        Ok(Self {
            s,
            d_f,
            d_s,
            d_0,
            w_f: VectorField::zeros(w, h, 2),
            w_s: VectorField::zeros(w, h, 3),
            w_0: ImageGrid::zeros(w, h),
        })
    }

    /// `d_f <- shrink(D_f' x + w_f / gamma, lambda / gamma)` for the fine-grid image `x`.
    pub fn shrink_gradient(&mut self, x: &ImageGrid<T>, beta: &WeightMap<T>, gamma: T, lambda: T) -> Result<()> {
        let (inv, t) = (T::one() / gamma, lambda / gamma);
        let v = weighted_grad(x, beta)?;
        let (vx, vy) = (v.channel(0).data(), v.channel(1).data());
        let n = vx.len();
        let mut out = [vec![T::zero(); n], vec![T::zero(); n]];
        {
            let (wx, wy) = (self.w_f.channel(0).data(), self.w_f.channel(1).data());
            for i in 0..n {
                let r = shrink_vec2([vx[i] + wx[i] * inv, vy[i] + wy[i] * inv], t);
                out[0][i] = r[0];
                out[1][i] = r[1];
            }
        }
        for (c, data) in out.iter().enumerate() {
            self.d_f.channel_mut(c).data_mut().copy_from_slice(data);
        }
        Ok(())
    }

    /// `d_s <- HT(D_s' x + w_s / gamma, lambda / gamma, p)`.
    pub fn shrink_hessian(
        &mut self,
        x: &ImageGrid<T>,
        beta: &WeightMap<T>,
        gamma: T,
        lambda: T,
        p: SchattenOrder,
    ) -> Result<()> {
        let (inv, t) = (T::one() / gamma, lambda / gamma);
        let v = weighted_hess(x, beta)?;
        let n = x.len();
        let mut out = [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]];
        for i in 0..n {
            let arg = [0, 1, 2].map(|c| v.channel(c).data()[i] + self.w_s.channel(c).data()[i] * inv);
            let r = shrink_hessian(arg, t, p);
            for (dst, val) in out.iter_mut().zip(r) {
                dst[i] = val;
            }
        }
        for (c, data) in out.iter().enumerate() {
            self.d_s.channel_mut(c).data_mut().copy_from_slice(data);
        }
        Ok(())
    }

    /// `d_0 <- clip(x + w_0 / gamma, 0, u)`.
    pub fn project_box(&mut self, x: &ImageGrid<T>, gamma: T, u: T) -> Result<()> {
        let inv = T::one() / gamma;
        self.d_0 = x.zip_map(&self.w_0, |a, w| (a + w * inv).max(T::zero()).min(u))?;
        Ok(())
    }

    /// `w <- w + gamma (M E s - d)`, given the blocks of the constraint residual.
    pub fn dual_ascent(
        &mut self,
        residual: &(VectorField<T>, VectorField<T>, ImageGrid<T>),
        gamma: T,
    ) {
        self.w_f.axpy(gamma, &residual.0);
        self.w_s.axpy(gamma, &residual.1);
        self.w_0.axpy(gamma, &residual.2);
    }

    /// `(M E s - d)` for the current `s`, block by block.
    pub fn constraint_residual(
        &self,
        beta: &WeightMap<T>,
        level: usize,
    ) -> Result<(VectorField<T>, VectorField<T>, ImageGrid<T>)> {
        let x = upsample_j(&self.s, level);
        let mut r_f = weighted_grad(&x, beta)?;
        r_f.axpy(-T::one(), &self.d_f);
        let mut r_s = weighted_hess(&x, beta)?;
        r_s.axpy(-T::one(), &self.d_s);
        let mut r_0 = x;
        r_0.axpy(-T::one(), &self.d_0);
        Ok((r_f, r_s, r_0))
    }

    /// `|M E s - d| / |d|` in the plain Euclidean norm.
    pub fn relative_primal_residual(&self, beta: &WeightMap<T>, level: usize) -> Result<T> {
        let (r_f, r_s, r_0) = self.constraint_residual(beta, level)?;
        let num = r_f.norm_sq() + r_s.norm_sq() + r_0.norm_sq();
        let den = self.d_f.norm_sq() + self.d_s.norm_sq() + self.d_0.norm_sq();
        Ok(relative(num, den))
    }
}

fn relative<T: Real>(num_sq: T, den_sq: T) -> T {
    if den_sq > T::zero() {
        (num_sq / den_sq).sqrt()
    } else {
        num_sq.sqrt()
    }
}

/// The s-update normal operator
/// `2 E^T H^T H E + gamma E^T (D_f'^T D_f' + D_s'^T W D_s' + I) E` at one level.
pub struct SUpdateSystem<'a, T: Real> {
    op: &'a DataOperator<T>,
    beta: &'a WeightMap<T>,
    beta_sq: ImageGrid<T>,
    comp_sq: ImageGrid<T>,
    level: usize,
    gamma: T,
}

impl<'a, T: Real> SUpdateSystem<'a, T> {
    pub fn new(
        op: &'a DataOperator<T>,
        beta: &'a WeightMap<T>,
        level: usize,
        gamma: T,
    ) -> Result<Self> {
        check_dims(op.dims(), beta.dims())?;
        let f = 1usize << level;
        let (w, h) = op.dims();
        if w % f != 0 || h % f != 0 {
            return Err(Error::Parameter(format!(
                "grid {w}x{h} not divisible by 2^{level}"
            )));
        }
        let beta_sq = beta.grid().map(|b| b * b);
        let comp_sq = beta.grid().map(|b| (T::one() - b) * (T::one() - b));
        Ok(Self { op, beta, beta_sq, comp_sq, level, gamma })
    }

    pub fn level_dims(&self) -> (usize, usize) {
        let (w, h) = self.op.dims();
        (w >> self.level, h >> self.level)
    }

    pub fn apply(&self, s: &ImageGrid<T>) -> ImageGrid<T> {
        let x = upsample_j(s, self.level);
        let mut acc = self.op.normal(&x);
        acc.scale(T::lit(2.0));

        let g = crate::diff::grad(&x).weighted(&self.beta_sq).expect("dims checked");
        let mut h = crate::diff::hess(&x).weighted(&self.comp_sq).expect("dims checked");
        apply_hessian_metric(&mut h);
        let mut reg = crate::diff::grad_adjoint(&g).expect("two channels");
        reg.axpy(T::one(), &crate::diff::hess_adjoint(&h).expect("three channels"));
        reg.axpy(T::one(), &x);
        acc.axpy(self.gamma, &reg);
        upsample_j_adjoint(&acc, self.level)
    }

    /// `gamma E^T M^T W (d - w / gamma)`, the penalty part of the right-hand side.
    pub fn penalty_rhs(&self, state: &SplitState<T>) -> Result<ImageGrid<T>> {
        let inv = T::one() / self.gamma;
        let mut vf = state.d_f.clone();
        vf.axpy(-inv, &state.w_f);
        let mut vs = state.d_s.clone();
        vs.axpy(-inv, &state.w_s);
        apply_hessian_metric(&mut vs);
        let mut v0 = state.d_0.clone();
        v0.axpy(-inv, &state.w_0);

        let mut acc = weighted_grad_adjoint(&vf, self.beta)?;
        acc.axpy(T::one(), &weighted_hess_adjoint(&vs, self.beta)?);
        acc.axpy(T::one(), &v0);
        acc.scale(self.gamma);
        Ok(upsample_j_adjoint(&acc, self.level))
    }

    /// `2 E^T H^T m`.
    pub fn data_rhs(&self, m: &Measurement<T>) -> Result<ImageGrid<T>> {
        let mut b = self.op.adjoint(m)?;
        b.scale(T::lit(2.0));
        Ok(upsample_j_adjoint(&b, self.level))
    }

    pub fn preconditioner(&self, kind: PrecondKind) -> Option<Preconditioner<T>> {
        let weights = match kind {
            PrecondKind::None => return None,
            PrecondKind::Unweighted => PrecondWeights::unweighted(),
            PrecondKind::Matched => PrecondWeights::matched(self.op, self.beta, self.gamma),
        };
        Some(Preconditioner::new(self.op.dims(), self.level, &weights))
    }
}

/// Solves `A s = rhs` by (preconditioned) CG, warm-started at `s0`.
pub fn s_update_cg<T: Real>(
    system: &SUpdateSystem<'_, T>,
    precond: Option<&Preconditioner<T>>,
    rhs: &ImageGrid<T>,
    s0: &ImageGrid<T>,
    max_iters: usize,
    rel_tol: T,
) -> Result<(ImageGrid<T>, CgStats)> {
    check_dims(system.level_dims(), rhs.dims())?;
    check_dims(system.level_dims(), s0.dims())?;
    let apply = |x: &ImageGrid<T>| system.apply(x);
    match precond {
        Some(p) => pcg(apply, Some(|x: &ImageGrid<T>| p.apply_inverse(x)), rhs, s0, max_iters, rel_tol),
        None => pcg(apply, None::<fn(&ImageGrid<T>) -> ImageGrid<T>>, rhs, s0, max_iters, rel_tol),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmmReport<T> {
    pub iterations: usize,
    /// Relative primal residual after every iteration.
    pub primal_residuals: Vec<T>,
    pub cg_iterations: Vec<usize>,
    pub converged: bool,
    /// True when the iterate was worse than the initialization and was discarded.
    pub fell_back: bool,
    /// `F + lambda R` (with box indicator) at the initialization and at the output.
    pub cost_init: T,
    pub cost_out: T,
}

impl<T: Real> AdmmReport<T> {
    pub fn final_residual(&self) -> T {
        self.primal_residuals.last().copied().unwrap_or(T::zero())
    }
}

/// Minimizes `F(E s) + lambda R(E s) + box(E s)` for fixed weights at one level.
///
/// The returned image is clipped to `[0, u]`. If its cost exceeds that of `s_init`,
/// `s_init` is returned instead and the report says so.
pub fn admm_solve<T: Real>(
    op: &DataOperator<T>,
    m: &Measurement<T>,
    s_init: &ImageGrid<T>,
    beta: &WeightMap<T>,
    level: usize,
    cfg: &AdmmConfig<T>,
) -> Result<(ImageGrid<T>, AdmmReport<T>)> {
    cfg.validate()?;
    check_dims(op.dims(), m.dims())?;
    let system = SUpdateSystem::new(op, beta, level, cfg.gamma)?;
    check_dims(system.level_dims(), s_init.dims())?;

    let precond = system.preconditioner(cfg.precond);
    let data_rhs = system.data_rhs(m)?;
    let mut state = SplitState::new(s_init.clone(), beta, level, cfg.u)?;
    let mut x = upsample_j(&state.s, level);
    let mut report = AdmmReport {
        iterations: 0,
        primal_residuals: Vec::new(),
        cg_iterations: Vec::new(),
        converged: false,
        fell_back: false,
        cost_init: T::zero(),
        cost_out: T::zero(),
    };

    for _ in 0..cfg.max_iters {
        state.shrink_gradient(&x, beta, cfg.gamma, cfg.lambda)?;
        state.shrink_hessian(&x, beta, cfg.gamma, cfg.lambda, cfg.p)?;
        state.project_box(&x, cfg.gamma, cfg.u)?;

        let mut rhs = system.penalty_rhs(&state)?;
        rhs.axpy(T::one(), &data_rhs);
        let (s_new, stats) =
            s_update_cg(&system, precond.as_ref(), &rhs, &state.s, cfg.cg_max_iters, cfg.cg_rel_tol)?;
        state.s = s_new;
        x = upsample_j(&state.s, level);
        report.cg_iterations.push(stats.iterations);

        let residual = state.constraint_residual(beta, level)?;
        state.dual_ascent(&residual, cfg.gamma);
        let (r_f, r_s, r_0) = residual;

        let num = r_f.norm_sq() + r_s.norm_sq() + r_0.norm_sq();
        let den = state.d_f.norm_sq() + state.d_s.norm_sq() + state.d_0.norm_sq();
        let rel = relative(num, den);
        report.primal_residuals.push(rel);
        report.iterations += 1;
        if rel <= cfg.primal_tol {
            report.converged = true;
            break;
        }
    }

    let s_out = state.s.map(|v| v.max(T::zero()).min(cfg.u));
    let cost = |s: &ImageGrid<T>| -> Result<T> {
        let c = cost_at(op, m, &upsample_j(s, level), beta, None, cfg.lambda, cfg.p, cfg.u)?;
        Ok(c.constrained())
    };
    report.cost_init = cost(s_init)?;
    report.cost_out = cost(&s_out)?;
    if report.cost_out > report.cost_init {
        log::debug!(
            "level {level}: ADMM output cost {} above initial {}; keeping initialization",
            report.cost_out,
            report.cost_init
        );
        report.fell_back = true;
        report.cost_out = report.cost_init;
        return Ok((s_init.clone(), report));
    }
    Ok((s_out, report))
}
