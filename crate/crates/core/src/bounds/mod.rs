//! Linear bound propagation for ReLU networks under neuron-split constraints.
//!
//! The engine relaxes each unstable ReLU with a slope-`α` lower line and the
//! chord upper line, back-substitutes a linear objective through the layers,
//! folds split constraints in via nonnegative multipliers `β`, and finally
//! concretizes the resulting affine lower bound over the input region. All
//! functions here are pure; optimization of (α, β) lives in
//! [`crate::optimizer`].

mod backward;
mod intermediate;
mod interval;
mod relax;

pub use backward::{
    argmin_input, backward_bound, backward_bound_traced, concretize, BackwardTrace, BoundObjective,
    TraceStep,
};
pub use intermediate::compute_intermediate_bounds;
pub use interval::{affine_interval, input_box, interval_bounds, interval_bounds_with_splits};
pub use relax::relu_layer_relaxation;

use ndarray::Array1;

use crate::error::{Result, VerifierError};

/// Branch-and-bound status of one neuron.
///
/// `Pos` constrains the pre-activation to `z ≥ 0` (multiplier sign −1),
/// `Neg` to `z < 0` (multiplier sign +1), `Free` leaves it relaxed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeuronStatus {
    Free,
    Pos,
    Neg,
}

impl NeuronStatus {
    /// Sign entry of the split constraint matrix: the multiplier `β ≥ 0`
    /// contributes `β · sign · z` to the lower bound, which is nonpositive on
    /// the constrained side.
    pub fn sign(self) -> f64 {
        match self {
            NeuronStatus::Free => 0.0,
            NeuronStatus::Pos => -1.0,
            NeuronStatus::Neg => 1.0,
        }
    }
}

/// Per-neuron split statuses for every hidden layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSet {
    status: Vec<Vec<NeuronStatus>>,
}

impl SplitSet {
    pub fn all_free(hidden_dims: &[usize]) -> Self {
        Self {
            status: hidden_dims
                .iter()
                .map(|&d| vec![NeuronStatus::Free; d])
                .collect(),
        }
    }

    pub fn num_hidden(&self) -> usize {
        self.status.len()
    }

    pub fn layer(&self, h: usize) -> &[NeuronStatus] {
        &self.status[h]
    }

    pub fn get(&self, h: usize, j: usize) -> NeuronStatus {
        self.status[h][j]
    }

    pub fn set(&mut self, h: usize, j: usize, s: NeuronStatus) {
        self.status[h][j] = s;
    }

    /// Count of neurons carrying a split constraint.
    pub fn num_split(&self) -> usize {
        self.status
            .iter()
            .flatten()
            .filter(|s| **s != NeuronStatus::Free)
            .count()
    }

    /// All split neurons as `(hidden layer, neuron, status)`, in layer order.
    pub fn split_neurons(&self) -> Vec<(usize, usize, NeuronStatus)> {
        let mut out = Vec::new();
        for (h, layer) in self.status.iter().enumerate() {
            for (j, &s) in layer.iter().enumerate() {
                if s != NeuronStatus::Free {
                    out.push((h, j, s));
                }
            }
        }
        out
    }

    /// Does the sign pattern of these pre-activations satisfy every split?
    pub fn admits(&self, preacts: &[Array1<f64>]) -> bool {
        self.status.iter().enumerate().all(|(h, layer)| {
            layer.iter().enumerate().all(|(j, &s)| match s {
                NeuronStatus::Free => true,
                NeuronStatus::Pos => preacts[h][j] >= 0.0,
                NeuronStatus::Neg => preacts[h][j] < 0.0,
            })
        })
    }
}

/// Lower/upper bounds on every hidden pre-activation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PreActBounds {
    pub lower: Vec<Array1<f64>>,
    pub upper: Vec<Array1<f64>>,
}

impl PreActBounds {
    pub fn new(lower: Vec<Array1<f64>>, upper: Vec<Array1<f64>>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(VerifierError::Dimension(
                "bound layer counts differ".into(),
            ));
        }
        for (h, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.len() != u.len() {
                return Err(VerifierError::Dimension(format!(
                    "layer {h}: bound lengths differ"
                )));
            }
            for j in 0..l.len() {
                if !l[j].is_finite() || !u[j].is_finite() {
                    return Err(VerifierError::NonFinite(format!("bound at layer {h}")));
                }
                if l[j] > u[j] {
                    return Err(VerifierError::Dimension(format!(
                        "layer {h} neuron {j}: lower {} > upper {}",
                        l[j], u[j]
                    )));
                }
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn num_hidden(&self) -> usize {
        self.lower.len()
    }

    /// Unstable means the interval strictly straddles zero.
    pub fn is_unstable(&self, h: usize, j: usize) -> bool {
        self.lower[h][j] < 0.0 && self.upper[h][j] > 0.0
    }

    /// Neurons that are unstable *and* not yet split — the branch candidates.
    pub fn unstable_free(&self, splits: &SplitSet) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for h in 0..self.num_hidden() {
            for j in 0..self.lower[h].len() {
                if self.is_unstable(h, j) && splits.get(h, j) == NeuronStatus::Free {
                    out.push((h, j));
                }
            }
        }
        out
    }

    /// True when no unstable neuron remains unsplit (the concave regime).
    pub fn fully_split(&self, splits: &SplitSet) -> bool {
        self.unstable_free(splits).is_empty()
    }

    /// Tighten entries in place to agree with split signs
    /// (`Pos`: l := max(l, 0); `Neg`: u := min(u, 0)).
    ///
    /// Returns `false` if some entry crossed, i.e. the constrained domain is
    /// provably empty; crossed entries are snapped to the clamp boundary so
    /// the l ≤ u invariant survives either way.
    pub fn clamp_splits(&mut self, splits: &SplitSet) -> bool {
        let mut consistent = true;
        for h in 0..self.num_hidden() {
            for j in 0..self.lower[h].len() {
                match splits.get(h, j) {
                    NeuronStatus::Free => {}
                    NeuronStatus::Pos => {
                        if self.upper[h][j] < 0.0 {
                            consistent = false;
                            self.upper[h][j] = 0.0;
                        }
                        self.lower[h][j] = self.lower[h][j].max(0.0);
                    }
                    NeuronStatus::Neg => {
                        if self.lower[h][j] > 0.0 {
                            consistent = false;
                            self.lower[h][j] = 0.0;
                        }
                        self.upper[h][j] = self.upper[h][j].min(0.0);
                    }
                }
            }
        }
        consistent
    }

    /// Elementwise intersection with another sound bound set (max of lowers,
    /// min of uppers). Returns `false` on a crossing beyond `tol`, which means
    /// the underlying domain is provably empty; small crossings from rounding
    /// are snapped to the midpoint.
    pub fn intersect(&mut self, other: &PreActBounds, tol: f64) -> bool {
        let mut consistent = true;
        for h in 0..self.num_hidden() {
            for j in 0..self.lower[h].len() {
                let l = self.lower[h][j].max(other.lower[h][j]);
                let u = self.upper[h][j].min(other.upper[h][j]);
                if l > u + tol {
                    consistent = false;
                }
                if l > u {
                    let mid = 0.5 * (l + u);
                    self.lower[h][j] = mid;
                    self.upper[h][j] = mid;
                } else {
                    self.lower[h][j] = l;
                    self.upper[h][j] = u;
                }
            }
        }
        consistent
    }
}

/// Slope/intercept pairs describing one layer's relaxed ReLUs: the bound
/// propagates as `w · ReLU(v) ≥ w · (d ⊙ v) + w · bcheck` for the given
/// coefficient row `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxCoeffs {
    pub d: Array1<f64>,
    pub bcheck: Array1<f64>,
}

/// An affine lower bound on the objective over the input region:
/// `objective(x) ≥ a · x + c` for every feasible x in the split subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBound {
    pub a: Array1<f64>,
    pub c: f64,
}

/// Per-objective optimizable parameters: one `alpha` and one `beta` vector per
/// ReLU layer the objective's backward pass crosses.
///
/// `alpha` entries are relaxation slopes in [0, 1] (consulted only at unstable
/// free neurons with nonnegative propagated coefficient); `beta` entries are
/// split multipliers ≥ 0 (consulted only at split neurons).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    pub alpha: Vec<Array1<f64>>,
    pub beta: Vec<Array1<f64>>,
}

impl ParamGroup {
    /// Fresh parameters for a pass crossing the first `layers` ReLU layers:
    /// α = 1 everywhere (the plain-CROWN choice for nonnegative coefficients),
    /// β = 0 (reduces to CROWN until ascended).
    pub fn init(hidden_dims: &[usize], layers: usize) -> Self {
        Self {
            alpha: hidden_dims[..layers]
                .iter()
                .map(|&d| Array1::ones(d))
                .collect(),
            beta: hidden_dims[..layers]
                .iter()
                .map(|&d| Array1::zeros(d))
                .collect(),
        }
    }

    /// Project in place onto the feasible set: α into [0, 1], β into [0, ∞).
    pub fn project(&mut self) {
        for a in &mut self.alpha {
            a.mapv_inplace(|v| v.clamp(0.0, 1.0));
        }
        for b in &mut self.beta {
            b.mapv_inplace(|v| v.max(0.0));
        }
    }
}
