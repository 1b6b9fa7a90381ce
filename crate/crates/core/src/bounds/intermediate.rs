//! Intermediate pre-activation bounds: every hidden neuron bounded as its own
//! backward-pass objective, layer by layer, intersected with the interval
//! baseline.

use ndarray::Array1;

use super::{
    backward_bound, concretize, interval_bounds_with_splits, BoundObjective, ParamGroup,
    PreActBounds, SplitSet,
};
use crate::error::{Result, VerifierError};
use crate::model::{InputRegion, Network};

/// Result of an intermediate-bound computation. `consistent == false` means
/// two sound bounds crossed, which proves the split subdomain empty; the
/// snapped bounds are still safe to hold but the domain should be pruned.
pub struct IntermediateBounds {
    pub bounds: PreActBounds,
    pub consistent: bool,
}

/// Compute per-neuron pre-activation bounds for every hidden layer.
///
/// Layer `h` is bounded by running one backward pass per objective row `±e_j`
/// using only the layers below it — and therefore only the splits and
/// parameters of layers `< h`, matching the nesting of the split constraint
/// sets. Freshly tightened bounds for shallow layers feed the relaxations of
/// deeper ones within the same sweep.
///
/// `params` supplies one optional [`ParamGroup`] per hidden layer (entry `h`
/// covers ReLU layers `0..h`; entry 0 is never consulted since the first
/// layer's bounds are exact). Missing entries fall back to α = 1, β = 0.
/// Results are always intersected with the split-clamped interval baseline,
/// so they are never looser than it.
pub fn compute_intermediate_bounds(
    net: &Network,
    region: &InputRegion,
    splits: &SplitSet,
    params: Option<&[ParamGroup]>,
) -> Result<IntermediateBounds> {
    let num_hidden = net.num_hidden();
    if let Some(groups) = params {
        if groups.len() != num_hidden {
            return Err(VerifierError::Dimension(format!(
                "{} parameter groups for {} hidden layers",
                groups.len(),
                num_hidden
            )));
        }
    }

    let (mut work, mut consistent) = interval_bounds_with_splits(net, region, splits)?;
    let hidden_dims = net.hidden_dims();

    // Layer 0 crosses no ReLU, so the interval values are already exact.
    for h in 1..num_hidden {
        let width = hidden_dims[h];
        let default_group;
        let group = match params.and_then(|g| g.get(h)) {
            Some(g) => g,
            None => {
                default_group = ParamGroup::init(&hidden_dims, h);
                &default_group
            }
        };
        if group.alpha.len() < h || group.beta.len() < h {
            return Err(VerifierError::Dimension(format!(
                "parameter group for layer {h} covers {} layers",
                group.alpha.len()
            )));
        }

        let mut row = Array1::zeros(width);
        for j in 0..width {
            // lower bound via the +e_j objective
            row[j] = 1.0;
            let lb = backward_bound(
                net,
                &work,
                splits,
                &group.alpha,
                &group.beta,
                BoundObjective::PreAct {
                    hidden: h,
                    row: row.view(),
                },
            )?;
            let lo = concretize(&lb, region);

            // upper bound via the −e_j objective, negated back
            row[j] = -1.0;
            let ub = backward_bound(
                net,
                &work,
                splits,
                &group.alpha,
                &group.beta,
                BoundObjective::PreAct {
                    hidden: h,
                    row: row.view(),
                },
            )?;
            let hi = -concretize(&ub, region);
            row[j] = 0.0;

            // Intersect with the interval-with-splits baseline already in
            // `work`. Both are sound, so a crossing beyond noise proves the
            // subdomain empty.
            let l = work.lower[h][j].max(lo);
            let u = work.upper[h][j].min(hi);
            if l > u + 1e-9 {
                consistent = false;
            }
            if l > u {
                let mid = 0.5 * (l + u);
                work.lower[h][j] = mid;
                work.upper[h][j] = mid;
            } else {
                work.lower[h][j] = l;
                work.upper[h][j] = u;
            }
        }
    }

    Ok(IntermediateBounds {
        bounds: work,
        consistent,
    })
}
