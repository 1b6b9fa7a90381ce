//! Interval (box) propagation — the initialization baseline the linear bound
//! propagation must dominate.

use ndarray::{Array1, Array2};

use super::{NeuronStatus, PreActBounds, SplitSet};
use crate::error::Result;
use crate::model::{InputRegion, Network, Norm};

/// Image of a box under an affine layer, coordinate by coordinate.
pub fn affine_interval(
    w: &Array2<f64>,
    b: &Array1<f64>,
    lo: &Array1<f64>,
    hi: &Array1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    let n = w.nrows();
    let mut out_lo = Array1::zeros(n);
    let mut out_hi = Array1::zeros(n);
    for i in 0..n {
        let mut acc_lo = b[i];
        let mut acc_hi = b[i];
        for (j, &wij) in w.row(i).iter().enumerate() {
            if wij >= 0.0 {
                acc_lo += wij * lo[j];
                acc_hi += wij * hi[j];
            } else {
                acc_lo += wij * hi[j];
                acc_hi += wij * lo[j];
            }
        }
        out_lo[i] = acc_lo;
        out_hi[i] = acc_hi;
    }
    (out_lo, out_hi)
}

/// The input region's bounding box. Exact for ℓ∞; for finite p the box with
/// half-width ε encloses the ball, so downstream bounds stay sound.
pub fn input_box(region: &InputRegion) -> (Array1<f64>, Array1<f64>) {
    let r = match region.norm {
        Norm::Inf | Norm::P(_) => region.epsilon,
    };
    (
        region.center.mapv(|c| c - r),
        region.center.mapv(|c| c + r),
    )
}

/// Plain interval pre-activation bounds, no split information.
pub fn interval_bounds(net: &Network, region: &InputRegion) -> Result<PreActBounds> {
    propagate(net, region, None).map(|(b, _)| b)
}

/// Interval bounds with split signs folded in: each split neuron's
/// pre-activation interval is clamped to its constrained side before the
/// post-activation box continues forward. The flag is `false` if some clamp
/// crossed, i.e. even interval reasoning proves the subdomain empty.
pub fn interval_bounds_with_splits(
    net: &Network,
    region: &InputRegion,
    splits: &SplitSet,
) -> Result<(PreActBounds, bool)> {
    propagate(net, region, Some(splits))
}

fn propagate(
    net: &Network,
    region: &InputRegion,
    splits: Option<&SplitSet>,
) -> Result<(PreActBounds, bool)> {
    let (mut lo, mut hi) = input_box(region);
    let mut lower = Vec::with_capacity(net.num_hidden());
    let mut upper = Vec::with_capacity(net.num_hidden());
    let mut consistent = true;
    for h in 0..net.num_hidden() {
        let layer = net.layer(h);
        let (mut zl, mut zu) = affine_interval(&layer.weight, &layer.bias, &lo, &hi);
        if let Some(splits) = splits {
            for (j, &st) in splits.layer(h).iter().enumerate() {
                match st {
                    NeuronStatus::Free => {}
                    NeuronStatus::Pos => {
                        if zu[j] < 0.0 {
                            consistent = false;
                            zu[j] = 0.0;
                        }
                        zl[j] = zl[j].max(0.0);
                    }
                    NeuronStatus::Neg => {
                        if zl[j] > 0.0 {
                            consistent = false;
                            zl[j] = 0.0;
                        }
                        zu[j] = zu[j].min(0.0);
                    }
                }
            }
        }
        lower.push(zl.clone());
        upper.push(zu.clone());
        lo = zl.mapv(|v| v.max(0.0));
        hi = zu.mapv(|v| v.max(0.0));
    }
    Ok((PreActBounds::new(lower, upper)?, consistent))
}
