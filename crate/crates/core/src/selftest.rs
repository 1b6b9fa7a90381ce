//! Fast internal consistency battery.
//!
//! Reduced-scale replicas of the release acceptance checks, cheap enough to
//! run from any build via `--mode selftest`: relaxation soundness by
//! sampling, agreement with the reference bound, weak duality against the
//! LP, exactness on fully split subdomains, gradient checking, end-to-end
//! verdicts against exact enumeration, and byte-level reproducibility.
//! Every check is deterministic; a clean build passes all of them.

use ndarray::{Array1, Array2};

use crate::bab::{run_bab, BabConfig, Branching, Status};
use crate::bounds::{
    affine_interval, backward_bound, concretize, interval_bounds, interval_bounds_with_splits,
    relu_layer_relaxation, BoundObjective, NeuronStatus, SplitSet,
};
use crate::model::{InputRegion, Layer, Network, Norm};
use crate::optimizer::{ascend, gradient, OptimizerConfig, ParamState};
use crate::oracle::{crown_reference_bound, exact_min, lp_relaxation_min, LpOutcome, OracleOutcome};

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// One-line summary: the measured quantity on success, the violation on
    /// failure.
    pub detail: String,
}

/// A check body: `Ok` carries the success summary, `Err` the violation.
type Check = fn() -> Result<String, String>;

/// Run the full battery and report one result per check, in a fixed order.
pub fn run_all() -> Vec<CheckResult> {
    let checks: [(&'static str, Check); 7] = [
        ("relaxation-soundness", relaxation_soundness),
        ("reference-agreement", reference_agreement),
        ("weak-duality", weak_duality),
        ("split-exactness", split_exactness),
        ("gradient-check", gradient_check),
        ("completeness", completeness),
        ("determinism", determinism),
    ];
    checks
        .iter()
        .map(|&(name, f)| match f() {
            Ok(detail) => CheckResult {
                name,
                passed: true,
                detail,
            },
            Err(detail) => CheckResult {
                name,
                passed: false,
                detail,
            },
        })
        .collect()
}

/// True when every check passed.
pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

// --- deterministic test-data generation -------------------------------------

fn xorshift(state: &mut u64) -> f64 {
    *state ^= *state << 13;
    *state ^= *state >> 7;
    *state ^= *state << 17;
    (*state as f64 / u64::MAX as f64) * 2.0 - 1.0
}

fn random_net(seed: u64, dims: &[usize]) -> Result<Network, String> {
    let mut s = seed.max(1);
    let mut layers = Vec::new();
    for w in dims.windows(2) {
        let layer = Layer::new(
            Array2::from_shape_fn((w[1], w[0]), |_| xorshift(&mut s)),
            Array1::from_shape_fn(w[1], |_| 0.5 * xorshift(&mut s)),
        )
        .map_err(|e| e.to_string())?;
        layers.push(layer);
    }
    Network::new(layers).map_err(|e| e.to_string())
}

fn random_region(seed: u64, dim: usize, eps: f64) -> Result<InputRegion, String> {
    let mut s = seed.max(1);
    let center = Array1::from_shape_fn(dim, |_| 0.5 * xorshift(&mut s));
    InputRegion::new(center, eps, Norm::Inf).map_err(|e| e.to_string())
}

/// Lower bound on the scalar output from pure box propagation: clamp the
/// last hidden box through the ReLU and push it through the output layer.
fn interval_output_floor(net: &Network, region: &InputRegion) -> Result<f64, String> {
    let pre = interval_bounds(net, region).map_err(|e| e.to_string())?;
    let last = net.num_hidden() - 1;
    let post_lo = pre.lower[last].mapv(|v| v.max(0.0));
    let post_hi = pre.upper[last].mapv(|v| v.max(0.0));
    let out = net.layer(net.num_layers() - 1);
    let (lo, _) = affine_interval(&out.weight, &out.bias, &post_lo, &post_hi);
    Ok(lo[0])
}

/// Alternate split sides over `free` unstable neurons, taking those whose
/// position index k satisfies `k % stride == 0`.
fn alternating_splits(
    splits: &mut SplitSet,
    free: &[(usize, usize)],
    stride: usize,
) -> usize {
    let mut taken = 0;
    for (k, &(h, j)) in free.iter().enumerate() {
        if k % stride == 0 {
            let side = if k % (2 * stride) == 0 {
                NeuronStatus::Pos
            } else {
                NeuronStatus::Neg
            };
            splits.set(h, j, side);
            taken += 1;
        }
    }
    taken
}

// --- individual checks ------------------------------------------------------

/// The per-layer relaxation never undercuts the true ReLU image: for random
/// intervals, slopes, and coefficient rows, sampled points satisfy
/// `w·ReLU(v) ≥ w·(d ⊙ v + b̌)` up to 1e-9.
fn relaxation_soundness() -> Result<String, String> {
    let mut s = 0x5eed_u64;
    let mut worst = f64::NEG_INFINITY;
    for cfg_idx in 0..20 {
        let n = 4 + (cfg_idx % 3);
        // Mixed-sign intervals with a strict gap, so all three stability
        // classes appear across configurations.
        let mut l = Array1::zeros(n);
        let mut u = Array1::zeros(n);
        for i in 0..n {
            let a = 2.0 * xorshift(&mut s);
            let b = 2.0 * xorshift(&mut s);
            l[i] = a.min(b) - 0.05;
            u[i] = a.max(b) + 0.05;
        }
        let status = vec![NeuronStatus::Free; n];
        let coeff = Array1::from_shape_fn(n, |_| 3.0 * xorshift(&mut s));
        let alpha = Array1::from_shape_fn(n, |_| 0.5 * (xorshift(&mut s) + 1.0));
        let relax = relu_layer_relaxation(&l, &u, &status, &coeff, &alpha)
            .map_err(|e| e.to_string())?;
        for _ in 0..2000 {
            let v = Array1::from_shape_fn(n, |i| {
                let t = 0.5 * (xorshift(&mut s) + 1.0);
                l[i] + t * (u[i] - l[i])
            });
            let exact: f64 = v
                .iter()
                .zip(coeff.iter())
                .map(|(&vi, &wi)| wi * vi.max(0.0))
                .sum();
            let relaxed: f64 = v
                .iter()
                .zip(coeff.iter())
                .zip(relax.d.iter().zip(relax.bcheck.iter()))
                .map(|((&vi, &wi), (&di, &bi))| wi * (di * vi + bi))
                .sum();
            let violation = relaxed - exact;
            worst = worst.max(violation);
            if violation > 1e-9 {
                return Err(format!(
                    "config {cfg_idx}: relaxed value exceeds exact by {violation:.3e}"
                ));
            }
        }
    }
    Ok(format!("worst violation {worst:.3e} over 20×2000 samples"))
}

/// With β = 0 the backward pass agrees with the independent reference
/// implementation to 1e-12 and never falls below the interval floor.
fn reference_agreement() -> Result<String, String> {
    let mut worst = 0.0_f64;
    for seed in 0..20u64 {
        let dims: &[usize] = if seed % 2 == 0 { &[2, 4, 4, 1] } else { &[3, 5, 1] };
        let net = random_net(seed * 31 + 7, dims)?;
        let reg = random_region(seed * 17 + 3, dims[0], 0.4)?;
        let pre = interval_bounds(&net, &reg).map_err(|e| e.to_string())?;
        let splits = SplitSet::all_free(&net.hidden_dims());
        // α = 0 picks the zero lower line everywhere, the configuration the
        // reference bound also uses.
        let alpha: Vec<Array1<f64>> = net.hidden_dims().iter().map(|&d| Array1::zeros(d)).collect();
        let beta: Vec<Array1<f64>> = net.hidden_dims().iter().map(|&d| Array1::zeros(d)).collect();
        let lb = backward_bound(&net, &pre, &splits, &alpha, &beta, BoundObjective::Output)
            .map_err(|e| e.to_string())?;
        let ours = concretize(&lb, &reg);
        let reference = crown_reference_bound(&net, &reg, &pre.lower, &pre.upper, &alpha)
            .map_err(|e| e.to_string())?;
        let gap = (ours - reference).abs();
        worst = worst.max(gap);
        if gap > 1e-12 {
            return Err(format!("seed {seed}: |ours − reference| = {gap:.3e}"));
        }
        let floor = interval_output_floor(&net, &reg)?;
        if ours < floor - 1e-12 {
            return Err(format!(
                "seed {seed}: bound {ours:.6} below interval floor {floor:.6}"
            ));
        }
    }
    Ok(format!("max |ours − reference| = {worst:.3e} over 20 nets"))
}

/// The ascended bound never exceeds the LP optimum over the identical
/// relaxation (weak duality), including under split constraints.
fn weak_duality() -> Result<String, String> {
    let mut compared = 0;
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..10u64 {
        let net = random_net(seed * 23 + 5, &[2, 4, 4, 1])?;
        let reg = random_region(seed * 13 + 1, 2, 0.5)?;
        let mut splits = SplitSet::all_free(&net.hidden_dims());
        let pre0 = interval_bounds(&net, &reg).map_err(|e| e.to_string())?;
        let free = pre0.unstable_free(&splits);
        alternating_splits(&mut splits, &free, 3);
        let (bounds, consistent) =
            interval_bounds_with_splits(&net, &reg, &splits).map_err(|e| e.to_string())?;
        if !consistent {
            continue;
        }
        let mut state = ParamState::init(&net);
        let cfg = OptimizerConfig {
            iters: 40,
            ..OptimizerConfig::default()
        };
        let out = ascend(&net, &reg, &bounds, &splits, &mut state, &cfg)
            .map_err(|e| e.to_string())?;
        match lp_relaxation_min(&net, &reg, &bounds, &splits).map_err(|e| e.to_string())? {
            LpOutcome::Optimal(value) => {
                let excess = out.best - value;
                worst = worst.max(excess);
                compared += 1;
                if excess > 1e-6 {
                    return Err(format!(
                        "seed {seed}: ascended bound exceeds LP optimum by {excess:.3e}"
                    ));
                }
            }
            LpOutcome::Empty => continue,
        }
    }
    if compared < 5 {
        return Err(format!("only {compared} feasible LP comparisons"));
    }
    Ok(format!(
        "bound ≤ LP on {compared} instances, worst slack {:.3e}",
        -worst
    ))
}

/// On fully split subdomains the exact concave ascent reaches the LP optimum
/// to 1e-6 (strong duality for the resulting linear program).
fn split_exactness() -> Result<String, String> {
    let mut compared = 0;
    let mut worst = 0.0_f64;
    for seed in 0..24u64 {
        if compared >= 6 {
            break;
        }
        let net = random_net(seed * 41 + 9, &[2, 3, 1])?;
        let reg = random_region(seed * 11 + 2, 2, 0.5)?;
        let mut splits = SplitSet::all_free(&net.hidden_dims());
        let pre0 = interval_bounds(&net, &reg).map_err(|e| e.to_string())?;
        let free = pre0.unstable_free(&splits);
        alternating_splits(&mut splits, &free, 1);
        let (bounds, consistent) =
            interval_bounds_with_splits(&net, &reg, &splits).map_err(|e| e.to_string())?;
        if !consistent || !bounds.fully_split(&splits) {
            continue;
        }
        let value = match lp_relaxation_min(&net, &reg, &bounds, &splits)
            .map_err(|e| e.to_string())?
        {
            LpOutcome::Optimal(value) => value,
            LpOutcome::Empty => continue,
        };
        let mut state = ParamState::init(&net);
        let cfg = OptimizerConfig {
            iters: 200,
            ..OptimizerConfig::default()
        };
        let out = ascend(&net, &reg, &bounds, &splits, &mut state, &cfg)
            .map_err(|e| e.to_string())?;
        let gap = (out.best - value).abs();
        worst = worst.max(gap);
        compared += 1;
        if gap > 1e-6 {
            return Err(format!("seed {seed}: |ascent − LP| = {gap:.3e}"));
        }
    }
    if compared < 5 {
        return Err(format!("only {compared} fully split feasible instances"));
    }
    Ok(format!(
        "ascent matches LP on {compared} instances, worst gap {worst:.3e}"
    ))
}

/// The reverse-mode gradient matches central finite differences (step 1e-5)
/// to 1e-4 relative error on every consulted coordinate.
fn gradient_check() -> Result<String, String> {
    let h = 1e-5;
    let mut worst = 0.0_f64;
    for seed in 0..5u64 {
        let net = random_net(seed * 19 + 13, &[2, 4, 1])?;
        let reg = random_region(seed * 7 + 5, 2, 0.5)?;
        let mut splits = SplitSet::all_free(&net.hidden_dims());
        let pre0 = interval_bounds(&net, &reg).map_err(|e| e.to_string())?;
        let free = pre0.unstable_free(&splits);
        if let Some(&(hh, jj)) = free.first() {
            splits.set(hh, jj, NeuronStatus::Pos);
        }
        let (bounds, consistent) =
            interval_bounds_with_splits(&net, &reg, &splits).map_err(|e| e.to_string())?;
        if !consistent {
            continue;
        }
        let mut s = seed * 3 + 11;
        let mut group = ParamState::init(&net).objective;
        for a in &mut group.alpha {
            a.mapv_inplace(|_| 0.3 + 0.4 * (0.5 * (xorshift(&mut s) + 1.0)));
        }
        for b in &mut group.beta {
            b.mapv_inplace(|_| 0.25 * (xorshift(&mut s) + 1.0));
        }
        let g = gradient(&net, &reg, &bounds, &splits, &group).map_err(|e| e.to_string())?;
        let eval = |gr: &crate::bounds::ParamGroup| -> Result<f64, String> {
            let lb = backward_bound(&net, &bounds, &splits, &gr.alpha, &gr.beta, BoundObjective::Output)
                .map_err(|e| e.to_string())?;
            Ok(concretize(&lb, &reg))
        };
        let mut probe = |which: char, layer: usize, idx: usize, analytic: f64| -> Result<(), String> {
            let mut plus = group.clone();
            let mut minus = group.clone();
            match which {
                'a' => {
                    plus.alpha[layer][idx] += h;
                    minus.alpha[layer][idx] -= h;
                }
                _ => {
                    plus.beta[layer][idx] += h;
                    minus.beta[layer][idx] -= h;
                }
            }
            let fd = (eval(&plus)? - eval(&minus)?) / (2.0 * h);
            let rel = (analytic - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(rel);
            if rel > 1e-4 {
                return Err(format!(
                    "seed {seed} {which}[{layer}][{idx}]: analytic {analytic:.6} vs fd {fd:.6}"
                ));
            }
            Ok(())
        };
        for (layer, ga) in g.g_alpha.iter().enumerate() {
            for (idx, &v) in ga.iter().enumerate() {
                probe('a', layer, idx, v)?;
            }
        }
        for (layer, gb) in g.g_beta.iter().enumerate() {
            for (idx, &v) in gb.iter().enumerate() {
                probe('b', layer, idx, v)?;
            }
        }
    }
    Ok(format!("max relative error {worst:.3e} over 5 instances"))
}

/// End-to-end verdicts match exact enumeration on small nets, under both
/// branching heuristics, and falsification witnesses actually falsify.
fn completeness() -> Result<String, String> {
    let mut checked = 0;
    for seed in 0..10u64 {
        let net = random_net(seed * 37 + 3, &[2, 4, 4, 1])?;
        let reg = random_region(seed * 29 + 1, 2, 0.6)?;
        let splits = SplitSet::all_free(&net.hidden_dims());
        let truth = match exact_min(&net, &reg, &splits).map_err(|e| e.to_string())? {
            OracleOutcome::Min { value, .. } => value,
            OracleOutcome::Empty => return Err(format!("seed {seed}: oracle empty on free net")),
        };
        let expected = if truth < 0.0 {
            Status::Falsified
        } else {
            Status::Verified
        };
        for branching in [Branching::BabSr, Branching::Fsb] {
            let cfg = BabConfig {
                branching,
                seed: seed * 2 + 1,
                ..BabConfig::default()
            };
            let verdict = run_bab(&net, &reg, &cfg, None).map_err(|e| e.to_string())?;
            if verdict.status != expected {
                return Err(format!(
                    "seed {seed} {branching:?}: got {:?}, oracle min {truth:.6}",
                    verdict.status
                ));
            }
            if let Some(w) = &verdict.counterexample {
                let fx = net.forward_eval(w).map_err(|e| e.to_string())?;
                if fx >= 0.0 {
                    return Err(format!("seed {seed}: witness evaluates to {fx:.6} ≥ 0"));
                }
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} verdicts match enumeration"))
}

/// Two identical single-threaded runs produce bitwise-equal verdict numbers
/// and byte-identical progress logs.
fn determinism() -> Result<String, String> {
    let net = random_net(991, &[2, 4, 4, 1])?;
    let reg = random_region(173, 2, 0.55)?;
    let cfg = BabConfig {
        seed: 7,
        threads: 1,
        ..BabConfig::default()
    };
    let run = || -> Result<(crate::bab::Verdict, Vec<u8>), String> {
        let mut log = Vec::new();
        let v = run_bab(&net, &reg, &cfg, Some(&mut log)).map_err(|e| e.to_string())?;
        Ok((v, log))
    };
    let (v1, log1) = run()?;
    let (v2, log2) = run()?;
    if v1.global_lower.to_bits() != v2.global_lower.to_bits()
        || v1.global_upper.to_bits() != v2.global_upper.to_bits()
        || v1.status != v2.status
    {
        return Err("verdicts differ between identical runs".to_string());
    }
    if log1 != log2 {
        return Err(format!(
            "progress logs differ ({} vs {} bytes)",
            log1.len(),
            log2.len()
        ));
    }
    Ok(format!("identical verdicts and {}-byte logs", log1.len()))
}
