//! The triangle-relaxation linear program: the convex baseline the optimized
//! propagation bounds are compared against.

use ndarray::Array1;

use super::simplex::{simplex_solve, LPProblem, LpStatus};
use crate::bounds::{NeuronStatus, PreActBounds, SplitSet};
use crate::error::{Result, VerifierError};
use crate::model::{InputRegion, Network, Norm};

/// Outcome of the relaxation LP over a split subdomain.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    /// Optimal objective of the relaxation (a sound lower bound on f).
    Optimal(f64),
    /// The constraint system is infeasible: the subdomain is provably empty.
    Empty,
}

/// Minimize the merged network output over the relaxation polytope:
/// input box, exact network equalities `z = W·ẑ_prev + b`, stable neurons as
/// equalities, unstable free neurons as the triangle
/// `ẑ ≥ 0, ẑ ≥ z, ẑ ≤ u·(z − l)/(u − l)`, and split neurons as
/// `ẑ = z ∧ z ≥ 0` (Pos) or `ẑ = 0 ∧ z ≤ 0` (Neg).
///
/// The supplied `bounds` are treated as fixed coefficients of the triangle
/// constraints; using the same bounds the propagation engine saw makes this
/// exactly the program whose dual the (α, β) ascent explores.
pub fn lp_relaxation_min(
    net: &Network,
    region: &InputRegion,
    bounds: &PreActBounds,
    splits: &SplitSet,
) -> Result<LpOutcome> {
    if net.output_dim() != 1 {
        return Err(VerifierError::NotScalarOutput {
            got: net.output_dim(),
        });
    }
    if !matches!(region.norm, Norm::Inf) {
        return Err(VerifierError::UnsupportedNorm {
            op: "lp_relaxation_min",
            norm: region.norm.to_string(),
        });
    }
    let num_hidden = net.num_hidden();
    if bounds.num_hidden() != num_hidden || splits.num_hidden() != num_hidden {
        return Err(VerifierError::Dimension(
            "bounds/splits do not match the network".into(),
        ));
    }

    let d0 = net.input_dim();
    let hidden = net.hidden_dims();
    let total_hidden: usize = hidden.iter().sum();
    let n = d0 + 2 * total_hidden;
    let mut lp = LPProblem::new(n);

    // column layout: x, then per layer h the pre-activations z[h], then ẑ[h]
    let mut z_off = Vec::with_capacity(num_hidden);
    let mut zh_off = Vec::with_capacity(num_hidden);
    let mut off = d0;
    for &w in &hidden {
        z_off.push(off);
        zh_off.push(off + w);
        off += 2 * w;
    }

    for i in 0..d0 {
        lp.var_bounds[i] = (
            region.center[i] - region.epsilon,
            region.center[i] + region.epsilon,
        );
    }

    // network equalities: z[h] − W[h]·prev = b[h]
    for h in 0..num_hidden {
        let layer = net.layer(h);
        for j in 0..hidden[h] {
            let mut row = Array1::zeros(n);
            row[z_off[h] + j] = 1.0;
            for (i, &wji) in layer.weight.row(j).iter().enumerate() {
                let col = if h == 0 { i } else { zh_off[h - 1] + i };
                row[col] -= wji;
            }
            lp.eq.push((row, layer.bias[j]));
        }
    }

    // per-neuron activation constraints
    for h in 0..num_hidden {
        for j in 0..hidden[h] {
            let zc = z_off[h] + j;
            let hc = zh_off[h] + j;
            let (l, u) = (bounds.lower[h][j], bounds.upper[h][j]);
            let eq_identity = || {
                let mut row = Array1::zeros(n);
                row[hc] = 1.0;
                row[zc] = -1.0;
                (row, 0.0)
            };
            match splits.get(h, j) {
                NeuronStatus::Pos => {
                    lp.eq.push(eq_identity());
                    let mut row = Array1::zeros(n);
                    row[zc] = -1.0; // z ≥ 0
                    lp.ineq.push((row, 0.0));
                }
                NeuronStatus::Neg => {
                    lp.var_bounds[hc] = (0.0, 0.0); // ẑ = 0
                    let mut row = Array1::zeros(n);
                    row[zc] = 1.0; // z ≤ 0
                    lp.ineq.push((row, 0.0));
                }
                NeuronStatus::Free => {
                    if u <= 0.0 {
                        lp.var_bounds[hc] = (0.0, 0.0);
                    } else if l >= 0.0 {
                        lp.eq.push(eq_identity());
                    } else {
                        // triangle: ẑ ≥ 0; ẑ ≥ z; (u−l)·ẑ − u·z ≤ −u·l
                        let mut r1 = Array1::zeros(n);
                        r1[hc] = -1.0;
                        lp.ineq.push((r1, 0.0));
                        let mut r2 = Array1::zeros(n);
                        r2[zc] = 1.0;
                        r2[hc] = -1.0;
                        lp.ineq.push((r2, 0.0));
                        let mut r3 = Array1::zeros(n);
                        r3[hc] = u - l;
                        r3[zc] = -u;
                        lp.ineq.push((r3, -u * l));
                    }
                }
            }
        }
    }

    // objective: the final affine layer over the last post-activations
    let last = net.layer(num_hidden);
    let constant = last.bias[0];
    for (i, &wi) in last.weight.row(0).iter().enumerate() {
        let col = if num_hidden == 0 {
            i
        } else {
            zh_off[num_hidden - 1] + i
        };
        lp.objective[col] = wi;
    }

    let sol = simplex_solve(&lp)?;
    match sol.status {
        LpStatus::Infeasible => Ok(LpOutcome::Empty),
        LpStatus::Optimal => Ok(LpOutcome::Optimal(sol.value + constant)),
    }
}
