//! Exact minimization by activation-pattern enumeration.
//!
//! Over a box, every input falls into some assignment of active/inactive
//! branches for the hidden neurons. Fixing an assignment makes the network
//! affine, so the exact minimum over the inputs consistent with that
//! assignment is a small linear program. Enumerating all assignments that the
//! interval analysis cannot rule out yields the true minimum — the ground
//! truth the propagation bounds are validated against. Cost is exponential in
//! the number of unstable neurons, hence the hard guard.

use ndarray::{Array1, Array2};

use super::simplex::{simplex_solve, LPProblem, LpStatus};
use crate::bounds::{affine_interval, input_box, NeuronStatus, SplitSet};
use crate::error::{Result, VerifierError};
use crate::model::{InputRegion, Network, Norm};

/// Hard cap on interval-unstable neurons before enumeration refuses to run.
pub const ENUM_GUARD: usize = 20;

/// Result of exact minimization over a (possibly split) subdomain.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    /// The true minimum and an input attaining it.
    Min { value: f64, argmin: Array1<f64> },
    /// No input in the box satisfies the split constraints.
    Empty,
}

/// Outcome for a single activation pattern.
#[derive(Debug, Clone)]
pub struct PatternResult {
    /// Active (`true`) / inactive (`false`) branch per hidden neuron.
    pub pattern: Vec<Vec<bool>>,
    /// Whether any input in the box realizes this pattern (given the splits).
    pub feasible: bool,
    /// Minimum of the (affine) restriction when feasible.
    pub min_value: Option<f64>,
    /// A minimizer when feasible.
    pub argmin: Option<Array1<f64>>,
}

/// How a neuron participates in the enumeration.
#[derive(Clone, Copy, PartialEq)]
enum Role {
    /// Branch fixed by interval stability; holds everywhere, no constraint row.
    Stable(bool),
    /// Branch fixed by a split; needs its half-space row.
    Forced(bool),
    /// Interval-unstable and unsplit; both branches enumerated.
    Enumerated,
}

/// Exact minimum of the merged network over `C ∩ Z` for an ℓ∞ region.
///
/// Fails with [`VerifierError::EnumerationGuard`] when more than
/// [`ENUM_GUARD`] neurons are interval-unstable.
pub fn exact_min(net: &Network, region: &InputRegion, splits: &SplitSet) -> Result<OracleOutcome> {
    let results = pattern_minima(net, region, splits)?;
    let mut best: Option<(f64, Array1<f64>)> = None;
    for r in &results {
        if let (true, Some(v), Some(x)) = (r.feasible, r.min_value, r.argmin.as_ref()) {
            if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                best = Some((v, x.clone()));
            }
        }
    }
    Ok(match best {
        Some((value, argmin)) => OracleOutcome::Min { value, argmin },
        None => OracleOutcome::Empty,
    })
}

/// Per-pattern minima over every activation assignment not excluded by
/// interval analysis. Patterns whose constraint system is interval- or
/// LP-infeasible are reported with `feasible: false`.
pub fn pattern_minima(
    net: &Network,
    region: &InputRegion,
    splits: &SplitSet,
) -> Result<Vec<PatternResult>> {
    if net.output_dim() != 1 {
        return Err(VerifierError::NotScalarOutput {
            got: net.output_dim(),
        });
    }
    if !matches!(region.norm, Norm::Inf) {
        return Err(VerifierError::UnsupportedNorm {
            op: "exact_min",
            norm: region.norm.to_string(),
        });
    }
    let num_hidden = net.num_hidden();
    if splits.num_hidden() != num_hidden {
        return Err(VerifierError::Dimension(
            "splits do not match the network".into(),
        ));
    }

    if num_hidden == 0 {
        // already affine: minimize directly over the box
        let a = net.layer(0).weight.row(0).to_owned();
        let x = region.center.iter().zip(a.iter()).map(|(&c, &ai)| {
            c - region.epsilon * if ai > 0.0 { 1.0 } else if ai < 0.0 { -1.0 } else { 0.0 }
        });
        let argmin = Array1::from_iter(x);
        let value = a.dot(&argmin) + net.layer(0).bias[0];
        return Ok(vec![PatternResult {
            pattern: vec![],
            feasible: true,
            min_value: Some(value),
            argmin: Some(argmin),
        }]);
    }

    let ib = crate::bounds::interval_bounds(net, region)?;
    let hidden = net.hidden_dims();
    let mut roles: Vec<Vec<Role>> = Vec::with_capacity(num_hidden);
    let mut enum_list: Vec<(usize, usize)> = Vec::new();
    let mut unstable = 0usize;
    for h in 0..num_hidden {
        let mut layer_roles = Vec::with_capacity(hidden[h]);
        for j in 0..hidden[h] {
            let (l, u) = (ib.lower[h][j], ib.upper[h][j]);
            if l < 0.0 && u > 0.0 {
                unstable += 1;
            }
            let role = match splits.get(h, j) {
                NeuronStatus::Pos => Role::Forced(true),
                NeuronStatus::Neg => Role::Forced(false),
                NeuronStatus::Free => {
                    if u <= 0.0 {
                        Role::Stable(false)
                    } else if l >= 0.0 {
                        Role::Stable(true)
                    } else {
                        enum_list.push((h, j));
                        Role::Enumerated
                    }
                }
            };
            layer_roles.push(role);
        }
        roles.push(layer_roles);
    }
    if unstable > ENUM_GUARD {
        return Err(VerifierError::EnumerationGuard {
            unstable,
            cap: ENUM_GUARD,
        });
    }

    let (box_lo, box_hi) = input_box(region);
    let mut results = Vec::new();
    for mask in 0u64..(1u64 << enum_list.len()) {
        let mut pattern: Vec<Vec<bool>> = Vec::with_capacity(num_hidden);
        for h in 0..num_hidden {
            let row = (0..hidden[h])
                .map(|j| match roles[h][j] {
                    Role::Stable(active) | Role::Forced(active) => active,
                    Role::Enumerated => {
                        let k = enum_list.iter().position(|&p| p == (h, j)).unwrap();
                        mask >> k & 1 == 1
                    }
                })
                .collect();
            pattern.push(row);
        }
        let constrained = |h: usize, j: usize| roles[h][j] != Role::Stable(pattern[h][j]);

        // cheap interval pruning under the branch constraints
        let mut feasible = true;
        let (mut lo, mut hi) = (box_lo.clone(), box_hi.clone());
        for h in 0..num_hidden {
            let layer = net.layer(h);
            let (mut zl, mut zu) = affine_interval(&layer.weight, &layer.bias, &lo, &hi);
            for j in 0..hidden[h] {
                if pattern[h][j] {
                    if constrained(h, j) {
                        if zu[j] < 0.0 {
                            feasible = false;
                            break;
                        }
                        zl[j] = zl[j].max(0.0);
                    } else {
                        zl[j] = zl[j].max(0.0);
                        zu[j] = zu[j].max(0.0);
                    }
                } else {
                    if constrained(h, j) && zl[j] > 0.0 {
                        feasible = false;
                        break;
                    }
                    zl[j] = 0.0;
                    zu[j] = 0.0;
                }
            }
            if !feasible {
                break;
            }
            lo = zl;
            hi = zu;
        }
        if !feasible {
            results.push(PatternResult {
                pattern,
                feasible: false,
                min_value: None,
                argmin: None,
            });
            continue;
        }

        // affine composition under the pattern, with half-space rows for every
        // constrained neuron
        let d0 = net.input_dim();
        let mut lp = LPProblem::new(d0);
        for i in 0..d0 {
            lp.var_bounds[i] = (box_lo[i], box_hi[i]);
        }
        let mut mpost = Array2::<f64>::eye(d0);
        let mut vpost = Array1::<f64>::zeros(d0);
        for h in 0..num_hidden {
            let layer = net.layer(h);
            let mz = layer.weight.dot(&mpost);
            let vz = layer.weight.dot(&vpost) + &layer.bias;
            for j in 0..hidden[h] {
                if constrained(h, j) {
                    let row = mz.row(j).to_owned();
                    if pattern[h][j] {
                        lp.ineq.push((-row, vz[j])); // −Mz·x ≤ vz  ⇔  z ≥ 0
                    } else {
                        lp.ineq.push((row, -vz[j])); // Mz·x ≤ −vz  ⇔  z ≤ 0
                    }
                }
            }
            let mut next_m = mz;
            let mut next_v = vz;
            for j in 0..hidden[h] {
                if !pattern[h][j] {
                    next_m.row_mut(j).fill(0.0);
                    next_v[j] = 0.0;
                }
            }
            mpost = next_m;
            vpost = next_v;
        }
        let last = net.layer(num_hidden);
        let a = last.weight.row(0).dot(&mpost);
        let c = last.weight.row(0).dot(&vpost) + last.bias[0];
        lp.objective = a;

        let sol = simplex_solve(&lp)?;
        match sol.status {
            LpStatus::Infeasible => results.push(PatternResult {
                pattern,
                feasible: false,
                min_value: None,
                argmin: None,
            }),
            LpStatus::Optimal => results.push(PatternResult {
                pattern,
                feasible: true,
                min_value: Some(sol.value + c),
                argmin: Some(sol.x),
            }),
        }
    }
    Ok(results)
}
