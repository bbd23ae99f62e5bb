//! Fixed-weight subproblem solver: weighted operators, the s-update system and its
//! circulant preconditioner, the cost, and the ADMM loop.

pub mod cg;
pub mod objective;
pub mod precond;
pub mod solver;
pub mod weighted;

pub use cg::{pcg, CgStats};
pub use objective::{cost_at, objective_eval, regularizer, CostBreakdown};
pub use precond::{PrecondKind, PrecondWeights, Preconditioner};
pub use solver::{admm_solve, s_update_cg, AdmmConfig, AdmmReport, SUpdateSystem, SplitState};
pub use weighted::{
    apply_hessian_metric, hessian_metric_dot, weighted_grad, weighted_grad_adjoint,
    weighted_hess, weighted_hess_adjoint,
};
