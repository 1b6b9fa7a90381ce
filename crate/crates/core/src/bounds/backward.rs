//! Backward substitution of a linear objective to the input, and
//! concretization of the result over the input region.

use ndarray::{Array1, ArrayView1};

use super::{relu_layer_relaxation, LinearBound, NeuronStatus, PreActBounds, SplitSet};
use crate::error::{Result, VerifierError};
use crate::model::{InputRegion, Network, Norm};

/// What the backward pass lower-bounds.
#[derive(Debug, Clone, Copy)]
pub enum BoundObjective<'a> {
    /// The merged network's scalar output f(x).
    Output,
    /// The linear functional `row · z[hidden]` of a hidden pre-activation
    /// vector (used to compute intermediate bounds: `+e_j` rows give lower
    /// bounds, `−e_j` rows give negated upper bounds).
    PreAct {
        hidden: usize,
        row: ArrayView1<'a, f64>,
    },
}

/// One recorded relaxation step; enough state to replay the pass in reverse
/// for gradients.
#[derive(Debug, Clone)]
pub struct TraceStep {
    /// ReLU layer this step crossed.
    pub hidden: usize,
    /// Coefficient row over the layer's post-activations, before relaxation.
    pub coeff: Array1<f64>,
    /// Selected slopes.
    pub d: Array1<f64>,
    /// Selected intercepts.
    pub bcheck: Array1<f64>,
    /// Entries whose slope came from α (gradient flows to α there).
    pub alpha_active: Vec<bool>,
    /// Split-constraint signs (0 where Free).
    pub s: Array1<f64>,
}

/// Full record of a backward pass, in visit order (deepest layer first).
#[derive(Debug, Clone)]
pub struct BackwardTrace {
    pub steps: Vec<TraceStep>,
}

/// Back-substitute `objective` through every ReLU layer below it.
///
/// `alpha`/`beta` hold one vector per crossed ReLU layer, indexed by hidden
/// layer; for the `Output` objective that is all of them, for `PreAct{hidden}`
/// only layers `0..hidden` (the split constraints of deeper layers do not
/// constrain shallower pre-activations). The returned bound satisfies
/// `objective(x) ≥ a·x + c` for every x in the region that respects the
/// splits — for any feasible parameter values, which is what makes ascent on
/// (α, β) sound at every iterate.
pub fn backward_bound(
    net: &Network,
    bounds: &PreActBounds,
    splits: &SplitSet,
    alpha: &[Array1<f64>],
    beta: &[Array1<f64>],
    objective: BoundObjective,
) -> Result<LinearBound> {
    run_backward(net, bounds, splits, alpha, beta, objective, false).map(|(lb, _)| lb)
}

/// As [`backward_bound`], but also returns the relaxation tape consumed by
/// the optimizer's reverse-mode gradient.
pub fn backward_bound_traced(
    net: &Network,
    bounds: &PreActBounds,
    splits: &SplitSet,
    alpha: &[Array1<f64>],
    beta: &[Array1<f64>],
    objective: BoundObjective,
) -> Result<(LinearBound, BackwardTrace)> {
    let (lb, trace) = run_backward(net, bounds, splits, alpha, beta, objective, true)?;
    Ok((lb, trace.expect("trace requested")))
}

fn run_backward(
    net: &Network,
    bounds: &PreActBounds,
    splits: &SplitSet,
    alpha: &[Array1<f64>],
    beta: &[Array1<f64>],
    objective: BoundObjective,
    want_trace: bool,
) -> Result<(LinearBound, Option<BackwardTrace>)> {
    let num_hidden = net.num_hidden();
    if bounds.num_hidden() != num_hidden || splits.num_hidden() != num_hidden {
        return Err(VerifierError::Dimension(format!(
            "bounds cover {} hidden layers, splits {}, network has {}",
            bounds.num_hidden(),
            splits.num_hidden(),
            num_hidden
        )));
    }

    // Initialize the coefficient row just below the objective's layer.
    // `crossed` = number of ReLU layers the pass will traverse.
    let (mut a, mut c, crossed) = match objective {
        BoundObjective::Output => {
            if net.output_dim() != 1 {
                return Err(VerifierError::NotScalarOutput {
                    got: net.output_dim(),
                });
            }
            let last = net.layer(net.num_layers() - 1);
            (last.weight.row(0).to_owned(), last.bias[0], num_hidden)
        }
        BoundObjective::PreAct { hidden, row } => {
            if hidden >= num_hidden {
                return Err(VerifierError::Dimension(format!(
                    "pre-activation objective at hidden layer {hidden}, network has {num_hidden}"
                )));
            }
            let layer = net.layer(hidden);
            if row.len() != layer.out_dim() {
                return Err(VerifierError::Dimension(format!(
                    "objective row has {} entries, layer has {}",
                    row.len(),
                    layer.out_dim()
                )));
            }
            (row.dot(&layer.weight), row.dot(&layer.bias), hidden)
        }
    };

    if alpha.len() < crossed || beta.len() < crossed {
        return Err(VerifierError::Dimension(format!(
            "parameters cover {}/{} ReLU layers, pass crosses {}",
            alpha.len(),
            beta.len(),
            crossed
        )));
    }

    let mut steps = if want_trace {
        Some(Vec::with_capacity(crossed))
    } else {
        None
    };

    for h in (0..crossed).rev() {
        let layer = net.layer(h);
        let d_h = layer.out_dim();
        if alpha[h].len() != d_h || beta[h].len() != d_h {
            return Err(VerifierError::Dimension(format!(
                "layer {h}: alpha/beta length {}/{} vs width {d_h}",
                alpha[h].len(),
                beta[h].len()
            )));
        }
        debug_assert!(
            splits
                .layer(h)
                .iter()
                .zip(beta[h].iter())
                .all(|(&st, &b)| st == NeuronStatus::Free || b >= 0.0),
            "beta must stay ≥ 0 where consulted"
        );

        let rc = relu_layer_relaxation(
            &bounds.lower[h],
            &bounds.upper[h],
            splits.layer(h),
            &a,
            &alpha[h],
        )?;

        // Fold the relaxation intercepts, then the split multipliers, then the
        // layer bias into the running constant; finally push the coefficients
        // through the layer's weight matrix.
        c += a.dot(&rc.bcheck);
        let mut ahat = &a * &rc.d;
        let mut s_row = Array1::zeros(d_h);
        for (j, &st) in splits.layer(h).iter().enumerate() {
            if st != NeuronStatus::Free {
                let sgn = st.sign();
                s_row[j] = sgn;
                ahat[j] += beta[h][j] * sgn;
            }
        }
        c += ahat.dot(&layer.bias);

        if let Some(steps) = steps.as_mut() {
            let alpha_active = (0..d_h)
                .map(|j| {
                    splits.get(h, j) == NeuronStatus::Free
                        && bounds.is_unstable(h, j)
                        && a[j] >= 0.0
                })
                .collect();
            steps.push(TraceStep {
                hidden: h,
                coeff: a.clone(),
                d: rc.d.clone(),
                bcheck: rc.bcheck,
                alpha_active,
                s: s_row,
            });
        }

        a = ahat.dot(&layer.weight);
    }

    Ok((LinearBound { a, c }, steps.map(|s| BackwardTrace { steps: s })))
}

/// Scalar lower bound of an affine form over the region, by Hölder:
/// `min over the ε-ball of a·x + c  =  −ε·‖a‖_q + a·x0 + c`.
pub fn concretize(lb: &LinearBound, region: &InputRegion) -> f64 {
    let q = region.norm.dual();
    -region.epsilon * q.vector_norm(&lb.a) + lb.a.dot(&region.center) + lb.c
}

/// The minimizer of an affine form over the ℓ∞ ball:
/// `x* = x0 − ε·sign(a)`, keeping the center coordinate where a = 0.
///
/// For finite-p regions the center is returned instead — feasible, hence
/// still a sound source of upper bounds, just not the minimizer.
pub fn argmin_input(lb: &LinearBound, region: &InputRegion) -> Array1<f64> {
    match region.norm {
        Norm::Inf => {
            let mut x = region.center.clone();
            for (xi, &ai) in x.iter_mut().zip(lb.a.iter()) {
                if ai > 0.0 {
                    *xi -= region.epsilon;
                } else if ai < 0.0 {
                    *xi += region.epsilon;
                }
            }
            x
        }
        Norm::P(_) => region.center.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Layer;
    use ndarray::{arr1, arr2};

    fn hand_net() -> Network {
        // f(x) = ReLU(x1 + x2) − ReLU(x1 − x2)
        Network::new(vec![
            Layer::new(arr2(&[[1.0, 1.0], [1.0, -1.0]]), arr1(&[0.0, 0.0])).unwrap(),
            Layer::new(arr2(&[[1.0, -1.0]]), arr1(&[0.0])).unwrap(),
        ])
        .unwrap()
    }

    fn hand_bounds() -> PreActBounds {
        PreActBounds::new(
            vec![arr1(&[-2.0, -2.0])],
            vec![arr1(&[2.0, 2.0])],
        )
        .unwrap()
    }

    #[test]
    fn no_relu_crossed_returns_layer_row() {
        let net =
            Network::new(vec![Layer::new(arr2(&[[2.0, -1.0]]), arr1(&[0.5])).unwrap()]).unwrap();
        let bounds = PreActBounds::new(vec![], vec![]).unwrap();
        let splits = SplitSet::all_free(&[]);
        let lb = backward_bound(&net, &bounds, &splits, &[], &[], BoundObjective::Output).unwrap();
        assert_eq!(lb.a, arr1(&[2.0, -1.0]));
        assert_eq!(lb.c, 0.5);
    }

    #[test]
    fn hand_back_substitution_free() {
        // α = (0.5, ·): coefficient on neuron 2 is −1 so its chord is used:
        // a = 0.5·(1,1) − 0.5·(1,−1) = (0,1), c = −(u·l/(u−l)) · |−1| = −1.
        let net = hand_net();
        let bounds = hand_bounds();
        let splits = SplitSet::all_free(&[2]);
        let alpha = vec![arr1(&[0.5, 0.5])];
        let beta = vec![arr1(&[0.0, 0.0])];
        let lb = backward_bound(&net, &bounds, &splits, &alpha, &beta, BoundObjective::Output)
            .unwrap();
        assert!((lb.a[0] - 0.0).abs() < 1e-15);
        assert!((lb.a[1] - 1.0).abs() < 1e-15);
        assert!((lb.c - -1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_back_substitution_neg_split() {
        // Splitting z2 < 0 kills the −ReLU(x1−x2) term exactly: with α1 = 0
        // and β2 = 0 the bound is f ≥ 0 on the subdomain.
        let net = hand_net();
        let bounds = hand_bounds();
        let mut splits = SplitSet::all_free(&[2]);
        splits.set(0, 1, NeuronStatus::Neg);
        let alpha = vec![arr1(&[0.0, 0.0])];
        let beta = vec![arr1(&[0.0, 0.0])];
        let lb = backward_bound(&net, &bounds, &splits, &alpha, &beta, BoundObjective::Output)
            .unwrap();
        assert_eq!(lb.a, arr1(&[0.0, 0.0]));
        assert_eq!(lb.c, 0.0);
    }

    #[test]
    fn beta_fold_matches_hand_value() {
        // Same Neg split with β2 = 0.3: ahat = (0, 0) + 0.3·(+1)·e2, so
        // a = 0.3·(1, −1) and c stays 0 (zero biases).
        let net = hand_net();
        let bounds = hand_bounds();
        let mut splits = SplitSet::all_free(&[2]);
        splits.set(0, 1, NeuronStatus::Neg);
        let alpha = vec![arr1(&[0.0, 0.0])];
        let beta = vec![arr1(&[0.0, 0.3])];
        let lb = backward_bound(&net, &bounds, &splits, &alpha, &beta, BoundObjective::Output)
            .unwrap();
        assert!((lb.a[0] - 0.3).abs() < 1e-15);
        assert!((lb.a[1] - -0.3).abs() < 1e-15);
        assert_eq!(lb.c, 0.0);
    }

    #[test]
    fn preact_objective_uses_layers_below_only() {
        // Bounding z(1) itself crosses no ReLU: the result is the first
        // layer's row regardless of splits or bounds at layer 1.
        let net = hand_net();
        let bounds = hand_bounds();
        let mut splits = SplitSet::all_free(&[2]);
        splits.set(0, 1, NeuronStatus::Neg);
        let row = arr1(&[0.0, 1.0]);
        let lb = backward_bound(
            &net,
            &bounds,
            &splits,
            &[],
            &[],
            BoundObjective::PreAct {
                hidden: 0,
                row: row.view(),
            },
        )
        .unwrap();
        assert_eq!(lb.a, arr1(&[1.0, -1.0]));
        assert_eq!(lb.c, 0.0);
    }

    #[test]
    fn concretize_hand_values() {
        let region = InputRegion::linf(arr1(&[0.0, 0.0]), 1.0).unwrap();
        let lb = LinearBound {
            a: arr1(&[1.0, 0.0]),
            c: 0.0,
        };
        assert_eq!(concretize(&lb, &region), -1.0);

        // ‖(1,−2)‖₁·0.5 = 1.5; a·x0 = −1; −1.5 − 1 + 3 = 0.5
        let region = InputRegion::linf(arr1(&[1.0, 1.0]), 0.5).unwrap();
        let lb = LinearBound {
            a: arr1(&[1.0, -2.0]),
            c: 3.0,
        };
        assert!((concretize(&lb, &region) - 0.5).abs() < 1e-15);

        // degenerate region: a·x0 + c
        let region = InputRegion::linf(arr1(&[1.0, 1.0]), 0.0).unwrap();
        assert!((concretize(&lb, &region) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn argmin_hand_values() {
        let region = InputRegion::linf(arr1(&[0.0, 0.0]), 1.0).unwrap();
        let lb = LinearBound {
            a: arr1(&[1.0, -1.0]),
            c: 0.0,
        };
        assert_eq!(argmin_input(&lb, &region), arr1(&[-1.0, 1.0]));

        let region = InputRegion::linf(arr1(&[0.5, 0.5]), 0.25).unwrap();
        let lb = LinearBound {
            a: arr1(&[0.0, 2.0]),
            c: 0.0,
        };
        assert_eq!(argmin_input(&lb, &region), arr1(&[0.5, 0.25]));

        let lb = LinearBound {
            a: arr1(&[0.0, 0.0]),
            c: 0.0,
        };
        assert_eq!(argmin_input(&lb, &region), arr1(&[0.5, 0.5]));
    }

    #[test]
    fn argmin_attains_concretization() {
        // On an ℓ∞ ball the Hölder bound is tight: evaluating the affine form
        // at argmin_input reproduces concretize exactly.
        let region = InputRegion::linf(arr1(&[0.3, -0.2, 1.0]), 0.7).unwrap();
        let lb = LinearBound {
            a: arr1(&[1.5, -0.25, 0.0]),
            c: -2.0,
        };
        let x = argmin_input(&lb, &region);
        let direct = lb.a.dot(&x) + lb.c;
        assert!((direct - concretize(&lb, &region)).abs() < 1e-12);
        assert!(region.contains(&x, 0.0));
    }

    #[test]
    fn crown_reduction_with_splits_as_stable_signs() {
        // β = 0 with a split is the same propagation as no split with bounds
        // clamped to the matching stable sign.
        let net = hand_net();
        let mut splits = SplitSet::all_free(&[2]);
        splits.set(0, 1, NeuronStatus::Neg);
        let alpha = vec![arr1(&[0.8, 0.8])];
        let beta = vec![arr1(&[0.0, 0.0])];
        let split_lb = backward_bound(
            &net,
            &hand_bounds(),
            &splits,
            &alpha,
            &beta,
            BoundObjective::Output,
        )
        .unwrap();

        let clamped = PreActBounds::new(
            vec![arr1(&[-2.0, -2.0])],
            vec![arr1(&[2.0, 0.0])], // u₂ clamped to 0 makes neuron 2 stably inactive
        )
        .unwrap();
        let free = SplitSet::all_free(&[2]);
        let clamped_lb = backward_bound(
            &net,
            &clamped,
            &free,
            &alpha,
            &beta,
            BoundObjective::Output,
        )
        .unwrap();
        assert_eq!(split_lb, clamped_lb);
    }
}
