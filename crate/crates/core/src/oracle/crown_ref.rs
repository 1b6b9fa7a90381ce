//! An independent re-derivation of the plain (split-free, β-free) linear
//! relaxation bound, computed through explicit matrix-product chains instead
//! of the incremental backward fold. Agreement between the two routes — to
//! floating-point reassociation error — is a strong check that the fold's
//! bookkeeping (coefficient updates, bias accumulation, slope selection) is
//! implemented correctly, because the two share no code beyond the model.

use ndarray::{Array1, Array2};

use crate::error::{Result, VerifierError};
use crate::model::{InputRegion, Network};

/// Plain relaxation lower bound on the scalar output over the region, with
/// fixed lower-slope values `alpha[h][j] ∈ [0, 1]` for unstable neurons whose
/// running coefficient is nonnegative.
///
/// `lower`/`upper` are the pre-activation boxes to relax against; no split
/// information participates.
pub fn crown_reference_bound(
    net: &Network,
    region: &InputRegion,
    lower: &[Array1<f64>],
    upper: &[Array1<f64>],
    alpha: &[Array1<f64>],
) -> Result<f64> {
    if net.output_dim() != 1 {
        return Err(VerifierError::NotScalarOutput {
            got: net.output_dim(),
        });
    }
    let num_hidden = net.num_hidden();
    if lower.len() != num_hidden || upper.len() != num_hidden || alpha.len() != num_hidden {
        return Err(VerifierError::Dimension(
            "per-layer slices do not match the network depth".into(),
        ));
    }

    // First pass (deep to shallow): pick each layer's slopes and intercepts
    // from the sign of the running coefficient row, recomputed directly.
    let mut d: Vec<Array1<f64>> = vec![Array1::zeros(0); num_hidden];
    let mut bcheck: Vec<Array1<f64>> = vec![Array1::zeros(0); num_hidden];
    let mut row = net.layer(num_hidden).weight.row(0).to_owned();
    for h in (0..num_hidden).rev() {
        let width = net.layer(h).bias.len();
        let mut dh = Array1::zeros(width);
        let mut bh = Array1::zeros(width);
        for j in 0..width {
            let (l, u) = (lower[h][j], upper[h][j]);
            if u <= 0.0 {
                // inactive: both coefficients stay zero
            } else if l >= 0.0 {
                dh[j] = 1.0;
            } else if row[j] >= 0.0 {
                dh[j] = alpha[h][j];
            } else {
                dh[j] = u / (u - l);
                bh[j] = -u * l / (u - l);
            }
        }
        row = (&row * &dh).dot(&net.layer(h).weight);
        d[h] = dh;
        bcheck[h] = bh;
    }

    // Second pass: assemble the bound from scratch as explicit products
    //   a = W_L · D_{L−1} W_{L−1} ⋯ D_1 W_1
    //   c = b_L + Σ_h (W_L · Π_{g>h} D_g W_g) · (D_h b_h + b̌_h)
    // with each factor chain rebuilt per term, never reusing the fold's state.
    let mut chain: Option<Array2<f64>> = None;
    for h in 0..num_hidden {
        let scaled = scale_rows(&net.layer(h).weight, &d[h]);
        chain = Some(match chain {
            None => scaled,
            Some(m) => scaled.dot(&m),
        });
    }
    let a = match &chain {
        None => net.layer(0).weight.row(0).to_owned(),
        Some(m) => net.layer(num_hidden).weight.row(0).dot(m),
    };

    let mut c = net.layer(num_hidden).bias[0];
    for h in 0..num_hidden {
        let mut r = net.layer(num_hidden).weight.row(0).to_owned();
        for g in (h + 1..num_hidden).rev() {
            r = (&r * &d[g]).dot(&net.layer(g).weight);
        }
        let term = &(&d[h] * &net.layer(h).bias) + &bcheck[h];
        c += r.dot(&term);
    }

    let q = region.norm.dual();
    Ok(-region.epsilon * q.vector_norm(&a) + a.dot(&region.center) + c)
}

fn scale_rows(w: &Array2<f64>, d: &Array1<f64>) -> Array2<f64> {
    let mut out = w.clone();
    for (mut r, &dj) in out.rows_mut().into_iter().zip(d.iter()) {
        r *= dj;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::interval_bounds;
    use crate::model::Layer;
    use ndarray::{arr1, arr2};

    #[test]
    fn hand_network_half_slope() {
        // 2-2-1 net, both neurons on [−1, 1] boxes... α = 0.5 everywhere:
        // matches the value the fold produces on the same configuration.
        let net = Network::new(vec![
            Layer::new(arr2(&[[1.0, 1.0], [1.0, -1.0]]), arr1(&[0.0, 0.0])).unwrap(),
            Layer::new(arr2(&[[1.0, -1.0]]), arr1(&[0.0])).unwrap(),
        ])
        .unwrap();
        let region = InputRegion::linf(arr1(&[0.0, 0.0]), 1.0).unwrap();
        let lower = vec![arr1(&[-2.0, -2.0])];
        let upper = vec![arr1(&[2.0, 2.0])];
        let alpha = vec![arr1(&[0.5, 0.5])];
        let v = crown_reference_bound(&net, &region, &lower, &upper, &alpha).unwrap();
        // first neuron coeff +1 → slope α = 0.5; second coeff −1 → upper line
        // (slope 0.5, intercept 1); a = (0, 1), c = −1, bound = −1·1 + 0 − 1
        assert!((v - -2.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn stable_layers_collapse_to_exact_affine() {
        let net = Network::new(vec![
            Layer::new(arr2(&[[1.0, 0.0], [0.0, 1.0]]), arr1(&[5.0, 5.0])).unwrap(),
            Layer::new(arr2(&[[2.0, -1.0]]), arr1(&[0.5])).unwrap(),
        ])
        .unwrap();
        let region = InputRegion::linf(arr1(&[0.0, 0.0]), 1.0).unwrap();
        let ib = interval_bounds(&net, &region).unwrap();
        let alpha = vec![arr1(&[1.0, 1.0])];
        let v = crown_reference_bound(&net, &region, &ib.lower, &ib.upper, &alpha).unwrap();
        // f = 2(x1+5) − (x2+5) + 0.5 = 2x1 − x2 + 5.5; stable layers make the
        // relaxation exact, so the bound is the box minimum 5.5 − 3 = 2.5
        assert!((v - 2.5).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn affine_only_network() {
        let net =
            Network::new(vec![Layer::new(arr2(&[[3.0, -1.0]]), arr1(&[0.25])).unwrap()]).unwrap();
        let region = InputRegion::linf(arr1(&[0.1, 0.2]), 0.5).unwrap();
        let v = crown_reference_bound(&net, &region, &[], &[], &[]).unwrap();
        // −0.5·4 + (0.3 − 0.2) + 0.25 = −2 + 0.35 = −1.65
        assert!((v - -1.65).abs() < 1e-12, "got {v}");
    }
}
