//! Per-layer ReLU relaxation under split overrides.

use ndarray::Array1;

use super::{NeuronStatus, RelaxCoeffs};
use crate::error::{Result, VerifierError};

/// Slope/intercept selection for one ReLU layer.
///
/// For a coefficient row `w` over the layer's post-activations, returns the
/// diagonal `d` and intercept `bcheck` with
/// `w · ReLU(v) ≥ w · (d ⊙ v) + w · bcheck` for all `v ∈ [l, u]` that satisfy
/// the split constraints. Cases per neuron:
///
/// * `Pos` split, or stable active (l ≥ 0): exact, `(1, 0)`.
/// * `Neg` split, or stable inactive (u ≤ 0): exact, `(0, 0)`.
/// * unstable free, coefficient ≥ 0: the lower line through the origin with
///   free slope `α ∈ [0, 1]`, `(α, 0)`.
/// * unstable free, coefficient < 0: the chord upper line,
///   `(u/(u−l), −u·l/(u−l))`.
///
/// A zero-width interval at the origin (l = u = 0) counts as stable inactive,
/// which avoids 0/0 in the chord slope. Split statuses take precedence over
/// stability so stale bounds on an (empty) contradictory subdomain still
/// produce the constraint-consistent — and therefore sound — exact cases.
pub fn relu_layer_relaxation(
    l: &Array1<f64>,
    u: &Array1<f64>,
    status: &[NeuronStatus],
    coeff: &Array1<f64>,
    alpha: &Array1<f64>,
) -> Result<RelaxCoeffs> {
    let n = l.len();
    if u.len() != n || status.len() != n || coeff.len() != n || alpha.len() != n {
        return Err(VerifierError::Dimension(format!(
            "relaxation arity mismatch: l={} u={} status={} coeff={} alpha={}",
            n,
            u.len(),
            status.len(),
            coeff.len(),
            alpha.len()
        )));
    }
    let mut d = Array1::zeros(n);
    let mut bcheck = Array1::zeros(n);
    for j in 0..n {
        let (lj, uj) = (l[j], u[j]);
        if lj.is_nan() || uj.is_nan() || coeff[j].is_nan() || alpha[j].is_nan() {
            return Err(VerifierError::NonFinite(format!("relaxation input {j}")));
        }
        if lj > uj {
            return Err(VerifierError::Dimension(format!(
                "neuron {j}: lower {lj} > upper {uj}"
            )));
        }
        let (dj, bj) = match status[j] {
            NeuronStatus::Pos => (1.0, 0.0),
            NeuronStatus::Neg => (0.0, 0.0),
            NeuronStatus::Free => {
                if uj <= 0.0 {
                    (0.0, 0.0)
                } else if lj >= 0.0 {
                    (1.0, 0.0)
                } else if coeff[j] >= 0.0 {
                    debug_assert!((0.0..=1.0).contains(&alpha[j]));
                    (alpha[j], 0.0)
                } else {
                    let slope = uj / (uj - lj);
                    (slope, -uj * lj / (uj - lj))
                }
            }
        };
        d[j] = dj;
        bcheck[j] = bj;
    }
    Ok(RelaxCoeffs { d, bcheck })
}
