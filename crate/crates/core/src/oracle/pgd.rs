//! Projected gradient descent on the network output: the falsification side
//! of the verifier. Any point it finds is a genuine input, so a negative
//! value is a certified counterexample regardless of how it was found.

use ndarray::Array1;
use rand::Rng;

use crate::error::{Result, VerifierError};
use crate::model::{InputRegion, Network, Norm};

/// Gradient of the scalar network output at `x` (any fixed subgradient at
/// ReLU kinks: the inactive branch, matching `z > 0` masking).
pub fn input_gradient(net: &Network, x: &Array1<f64>) -> Result<Array1<f64>> {
    if net.output_dim() != 1 {
        return Err(VerifierError::NotScalarOutput {
            got: net.output_dim(),
        });
    }
    let (preacts, _) = net.forward_with_preacts(x)?;
    let num_hidden = net.num_hidden();
    let mut g = net.layer(num_hidden).weight.row(0).to_owned();
    for h in (0..num_hidden).rev() {
        let mut masked = g;
        for (j, m) in masked.iter_mut().enumerate() {
            if preacts[h][j] <= 0.0 {
                *m = 0.0;
            }
        }
        g = masked.dot(&net.layer(h).weight);
    }
    Ok(g)
}

/// Signed-gradient descent with restarts over an ℓ∞ ball.
///
/// Returns the best `(value, input)` pair seen across every iterate of every
/// restart. The first restart starts from the center; later ones from
/// uniform samples in the ball. Step size is `epsilon / 10` along
/// `−sign(∇f)`, projected back onto the ball each step.
pub fn pgd_attack<R: Rng + ?Sized>(
    net: &Network,
    region: &InputRegion,
    steps: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<(f64, Array1<f64>)> {
    if !matches!(region.norm, Norm::Inf) {
        return Err(VerifierError::UnsupportedNorm {
            op: "pgd_attack",
            norm: region.norm.to_string(),
        });
    }
    if net.input_dim() != region.dim() {
        return Err(VerifierError::Dimension(format!(
            "network expects {} inputs, region has {}",
            net.input_dim(),
            region.dim()
        )));
    }
    let mut best_x = region.center.clone();
    let mut best_v = net.forward_eval(&best_x)?;
    if region.epsilon == 0.0 || steps == 0 || restarts == 0 {
        return Ok((best_v, best_x));
    }
    let step = region.epsilon / 10.0;
    for restart in 0..restarts {
        let mut x = if restart == 0 {
            region.center.clone()
        } else {
            Array1::from_iter(
                region
                    .center
                    .iter()
                    .map(|&c| c + region.epsilon * rng.gen_range(-1.0..=1.0)),
            )
        };
        let v = net.forward_eval(&x)?;
        if v < best_v {
            best_v = v;
            best_x = x.clone();
        }
        for _ in 0..steps {
            let g = input_gradient(net, &x)?;
            for (xi, &gi) in x.iter_mut().zip(g.iter()) {
                if gi > 0.0 {
                    *xi -= step;
                } else if gi < 0.0 {
                    *xi += step;
                }
            }
            x = region.project(&x);
            let v = net.forward_eval(&x)?;
            if v < best_v {
                best_v = v;
                best_x = x.clone();
            }
        }
    }
    Ok((best_v, best_x))
}
