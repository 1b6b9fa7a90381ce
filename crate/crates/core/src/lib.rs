//! Complete robustness verification for feedforward ReLU networks.
//!
//! The crate proves statements of the form "the scalar output of this network
//! is nonnegative everywhere on this input region", or refutes them with a
//! concrete counterexample. The positive side rests on optimizable linear
//! relaxations of each ReLU, tightened by gradient ascent over relaxation
//! slopes (α) and split multipliers (β); completeness comes from branch and
//! bound over neuron activation splits. An independent oracle stack — exact
//! enumeration, an LP baseline, and a reference bound implementation — exists
//! to validate every sound claim the fast path makes.
//!
//! Module map:
//! - [`model`]: networks, input regions, specifications, (de)serialization.
//! - [`bounds`]: interval and backward-mode linear bound propagation with
//!   split constraints.
//! - [`optimizer`]: projected gradient ascent on the bound's parameters.
//! - [`bab`]: branch-and-bound driver, branching heuristics, verdicts.
//! - [`oracle`]: ground-truth implementations for validation.
//! - [`selftest`]: fast internal consistency battery for release builds.

pub mod bab;
pub mod bounds;
pub mod error;
pub mod model;
pub mod optimizer;
pub mod oracle;
pub mod selftest;

pub use bab::{run_bab, BabConfig, BabStats, Branching, Domain, Status, Verdict};
pub use bounds::{NeuronStatus, PreActBounds, SplitSet};
pub use error::{Result, VerifierError};
pub use model::{InputRegion, Layer, Network, Norm, Property, Specification};
pub use optimizer::{OptimizerConfig, ParamState};
pub use selftest::{all_passed, run_all, CheckResult};
