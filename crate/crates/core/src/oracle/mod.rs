//! Independent ground-truth machinery: an exact enumeration oracle, the
//! triangle-relaxation LP, a gradient attack, and a from-scratch reference
//! implementation of the plain relaxation bound. Everything here is built to
//! disagree with the propagation engine if the engine is wrong — shared code
//! is kept to the model itself.

mod crown_ref;
mod enumerate;
mod lp;
mod pgd;
pub mod simplex;

pub use crown_ref::crown_reference_bound;
pub use enumerate::{exact_min, pattern_minima, OracleOutcome, PatternResult, ENUM_GUARD};
pub use lp::{lp_relaxation_min, LpOutcome};
pub use pgd::{input_gradient, pgd_attack};
pub use simplex::{simplex_solve, LPProblem, LpSolution, LpStatus};
