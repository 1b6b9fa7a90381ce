//! Release acceptance battery.
//!
//! Eleven independent criteria, each validating one load-bearing claim of the
//! verifier against sampling, an independent reference implementation, the
//! triangle-relaxation LP, exhaustive enumeration, or byte-level comparison
//! of repeated runs. Each test prints exactly one `acceptance NN name: PASS`
//! or `... FAIL` line (visible with `--nocapture`) and asserts the criterion,
//! including its runtime budget.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ndarray::{Array1, Array2};

use relucert::bab::{run_bab, BabConfig, Branching, Status};
use relucert::bounds::{
    affine_interval, backward_bound, concretize, interval_bounds, interval_bounds_with_splits,
    relu_layer_relaxation, BoundObjective, NeuronStatus, ParamGroup, SplitSet,
};
use relucert::model::{InputRegion, Layer, Network, Norm, Property, Specification};
use relucert::optimizer::{
    ascend, gradient, joint_optimize, LineSearchMode, OptimizerConfig, ParamState,
};
use relucert::oracle::{crown_reference_bound, exact_min, lp_relaxation_min, LpOutcome, OracleOutcome};

// --- shared deterministic generators ----------------------------------------

fn xorshift(state: &mut u64) -> f64 {
    *state ^= *state << 13;
    *state ^= *state >> 7;
    *state ^= *state << 17;
    (*state as f64 / u64::MAX as f64) * 2.0 - 1.0
}

fn unit(state: &mut u64) -> f64 {
    0.5 * (xorshift(state) + 1.0)
}

fn random_net(seed: u64, dims: &[usize]) -> Network {
    let mut s = seed.max(1);
    let layers = dims
        .windows(2)
        .map(|w| {
            Layer::new(
                Array2::from_shape_fn((w[1], w[0]), |_| xorshift(&mut s)),
                Array1::from_shape_fn(w[1], |_| 0.5 * xorshift(&mut s)),
            )
            .unwrap()
        })
        .collect();
    Network::new(layers).unwrap()
}

fn random_region(seed: u64, dim: usize, eps: f64) -> InputRegion {
    let mut s = seed.max(1);
    let center = Array1::from_shape_fn(dim, |_| 0.5 * xorshift(&mut s));
    InputRegion::new(center, eps, Norm::Inf).unwrap()
}

/// Assign alternating split sides to a deterministic subset of the free
/// unstable neurons; `keep(k)` decides membership by position.
fn split_subset(
    splits: &mut SplitSet,
    free: &[(usize, usize)],
    mut keep: impl FnMut(usize) -> bool,
) -> usize {
    let mut taken = 0;
    for (k, &(h, j)) in free.iter().enumerate() {
        if keep(k) {
            let side = if taken % 2 == 0 {
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

/// Scalar output lower bound from pure box propagation.
fn interval_floor(net: &Network, region: &InputRegion) -> f64 {
    let pre = interval_bounds(net, region).unwrap();
    let last = net.num_hidden() - 1;
    let post_lo = pre.lower[last].mapv(|v| v.max(0.0));
    let post_hi = pre.upper[last].mapv(|v| v.max(0.0));
    let out = net.layer(net.num_layers() - 1);
    let (lo, _) = affine_interval(&out.weight, &out.bias, &post_lo, &post_hi);
    lo[0]
}

fn zero_params(net: &Network) -> (Vec<Array1<f64>>, Vec<Array1<f64>>) {
    let dims = net.hidden_dims();
    (
        dims.iter().map(|&d| Array1::zeros(d)).collect(),
        dims.iter().map(|&d| Array1::zeros(d)).collect(),
    )
}

fn report(index: usize, name: &str, passed: bool, detail: &str) {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("acceptance {index:02} {name}: {tag} ({detail})");
    assert!(passed, "acceptance {index:02} {name}: {detail}");
}

// --- criteria ---------------------------------------------------------------

/// 100 random (w, l, u, α) configurations × 100 000 samples: the selected
/// per-neuron lines never overestimate w·ReLU(v) by more than 1e-9.
#[test]
fn c01_relaxation_soundness_sampling() {
    let start = Instant::now();
    let mut s = 0xace1_u64;
    let mut worst = f64::NEG_INFINITY;
    for cfg_idx in 0..100u64 {
        let n = 4 + (cfg_idx as usize % 5);
        let mut l = Array1::zeros(n);
        let mut u = Array1::zeros(n);
        for i in 0..n {
            let a = 2.5 * xorshift(&mut s);
            let b = 2.5 * xorshift(&mut s);
            l[i] = a.min(b) - 0.02;
            u[i] = a.max(b) + 0.02;
        }
        let status = vec![NeuronStatus::Free; n];
        let coeff = Array1::from_shape_fn(n, |_| 4.0 * xorshift(&mut s));
        let alpha = Array1::from_shape_fn(n, |_| unit(&mut s));
        let relax = relu_layer_relaxation(&l, &u, &status, &coeff, &alpha).unwrap();
        for _ in 0..100_000 {
            let mut exact = 0.0;
            let mut relaxed = 0.0;
            for i in 0..n {
                let v = l[i] + unit(&mut s) * (u[i] - l[i]);
                exact += coeff[i] * v.max(0.0);
                relaxed += coeff[i] * (relax.d[i] * v + relax.bcheck[i]);
            }
            worst = worst.max(relaxed - exact);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = worst <= 1e-9 && secs < 10.0;
    report(
        1,
        "relaxation-soundness-sampling",
        passed,
        &format!("worst violation {worst:.3e} over 100×1e5 samples, {secs:.2}s"),
    );
}

/// 100 random nets, 2–3 hidden layers, ≤ 8 neurons/layer: with β = 0 the
/// backward pass equals the independent reference bound to 1e-12 for several
/// slope configurations, and with zero slopes it dominates the interval
/// bound.
#[test]
fn c02_zero_beta_matches_reference() {
    let start = Instant::now();
    let mut worst_gap = 0.0_f64;
    let mut worst_margin = f64::INFINITY;
    for seed in 0..100u64 {
        let mut s = seed * 77 + 5;
        let input = 2 + (seed as usize % 3);
        let depth = 2 + (seed as usize % 2);
        let mut dims = vec![input];
        for _ in 0..depth {
            dims.push(3 + (5.0 * unit(&mut s)) as usize);
        }
        dims.push(1);
        let net = random_net(seed * 31 + 7, &dims);
        let reg = random_region(seed * 17 + 3, dims[0], 0.3 + 0.3 * unit(&mut s));
        let pre = interval_bounds(&net, &reg).unwrap();
        let splits = SplitSet::all_free(&net.hidden_dims());
        let (alpha0, beta0) = zero_params(&net);

        let mut configs = vec![alpha0.clone()];
        configs.push(alpha0.iter().map(|a| Array1::ones(a.len())).collect());
        configs.push(
            alpha0
                .iter()
                .map(|a| Array1::from_shape_fn(a.len(), |_| unit(&mut s)))
                .collect(),
        );
        for alpha in &configs {
            let lb =
                backward_bound(&net, &pre, &splits, alpha, &beta0, BoundObjective::Output).unwrap();
            let ours = concretize(&lb, &reg);
            let reference =
                crown_reference_bound(&net, &reg, &pre.lower, &pre.upper, alpha).unwrap();
            worst_gap = worst_gap.max((ours - reference).abs());
        }

        // Zero slopes floor every relaxation at 0, which provably dominates
        // plain box propagation.
        let lb =
            backward_bound(&net, &pre, &splits, &alpha0, &beta0, BoundObjective::Output).unwrap();
        worst_margin = worst_margin.min(concretize(&lb, &reg) - interval_floor(&net, &reg));
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = worst_gap <= 1e-12 && worst_margin >= -1e-12 && secs < 10.0;
    report(
        2,
        "zero-beta-matches-reference",
        passed,
        &format!(
            "max |ours − reference| = {worst_gap:.3e}, min margin over interval {worst_margin:.3e}, {secs:.2}s"
        ),
    );
}

/// 50 split instances × 20 random feasible (α, β): the concretized bound
/// never exceeds the triangle-LP optimum by more than 1e-6.
#[test]
fn c03_weak_duality_vs_lp() {
    let start = Instant::now();
    let mut instances = 0;
    let mut pairs = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut seed = 0u64;
    while instances < 50 {
        seed += 1;
        assert!(seed < 400, "instance generation exhausted");
        let dims: &[usize] = if seed.is_multiple_of(2) { &[2, 4, 4, 1] } else { &[3, 5, 5, 1] };
        let net = random_net(seed * 23 + 5, dims);
        let reg = random_region(seed * 13 + 1, dims[0], 0.5);
        let mut splits = SplitSet::all_free(&net.hidden_dims());
        let pre0 = interval_bounds(&net, &reg).unwrap();
        let free = pre0.unstable_free(&splits);
        let mut pick = seed * 7 + 3;
        split_subset(&mut splits, &free, |_| unit(&mut pick) < 0.4);
        let (bounds, consistent) = interval_bounds_with_splits(&net, &reg, &splits).unwrap();
        if !consistent {
            continue;
        }
        let lp = match lp_relaxation_min(&net, &reg, &bounds, &splits).unwrap() {
            LpOutcome::Optimal(v) => v,
            LpOutcome::Empty => continue,
        };
        instances += 1;
        let mut ps = seed * 101 + 9;
        for _ in 0..20 {
            let dimsh = net.hidden_dims();
            let alpha: Vec<Array1<f64>> = dimsh
                .iter()
                .map(|&d| Array1::from_shape_fn(d, |_| unit(&mut ps)))
                .collect();
            let beta: Vec<Array1<f64>> = dimsh
                .iter()
                .map(|&d| Array1::from_shape_fn(d, |_| 1.5 * unit(&mut ps)))
                .collect();
            let lb =
                backward_bound(&net, &bounds, &splits, &alpha, &beta, BoundObjective::Output)
                    .unwrap();
            worst = worst.max(concretize(&lb, &reg) - lp);
            pairs += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = worst <= 1e-6 && secs < 60.0;
    report(
        3,
        "weak-duality-vs-lp",
        passed,
        &format!("{pairs} (α, β) draws on {instances} instances, worst excess {worst:.3e}, {secs:.2}s"),
    );
}

/// 50 tiny split instances, fixed intermediate bounds, 500 ascent iterations
/// with line search: the ascended bound reaches the LP optimum to
/// 1e-3·max(1, |p*|) on at least 48, and never exceeds it beyond 1e-6.
#[test]
fn c04_ascent_reaches_lp_optimum() {
    let start = Instant::now();
    let mut close = 0;
    let mut instances = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_rel = 0.0_f64;
    let mut seed = 0u64;
    while instances < 50 {
        seed += 1;
        assert!(seed < 500, "instance generation exhausted");
        let dims: &[usize] = if seed.is_multiple_of(2) { &[2, 4, 1] } else { &[2, 3, 3, 1] };
        let net = random_net(seed * 41 + 11, dims);
        let reg = random_region(seed * 19 + 7, 2, 0.5);
        let mut splits = SplitSet::all_free(&net.hidden_dims());
        let pre0 = interval_bounds(&net, &reg).unwrap();
        let free = pre0.unstable_free(&splits);
        if free.is_empty() {
            continue;
        }
        let want = 1 + (seed as usize % 2).min(free.len() - 1);
        split_subset(&mut splits, &free, |k| k < want);
        let (bounds, consistent) = interval_bounds_with_splits(&net, &reg, &splits).unwrap();
        if !consistent {
            continue;
        }
        let lp = match lp_relaxation_min(&net, &reg, &bounds, &splits).unwrap() {
            LpOutcome::Optimal(v) => v,
            LpOutcome::Empty => continue,
        };
        instances += 1;
        let mut state = ParamState::init(&net);
        let cfg = OptimizerConfig {
            iters: 500,
            line_search: LineSearchMode::Always,
            ..OptimizerConfig::default()
        };
        let out = ascend(&net, &reg, &bounds, &splits, &mut state, &cfg).unwrap();
        worst_excess = worst_excess.max(out.best - lp);
        let rel = (lp - out.best).abs() / lp.abs().max(1.0);
        if rel <= 1e-3 {
            close += 1;
        } else {
            worst_rel = worst_rel.max(rel);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = close >= 48 && worst_excess <= 1e-6 && secs < 300.0;
    report(
        4,
        "ascent-reaches-lp-optimum",
        passed,
        &format!(
            "{close}/{instances} within 1e-3 (worst miss {worst_rel:.3e}), worst excess {worst_excess:.3e}, {secs:.2}s"
        ),
    );
}

/// 30 instances with every unstable neuron split: the ascended bound, the LP
/// optimum, and exhaustive enumeration agree to 1e-6 on all 30.
#[test]
fn c05_full_split_exactness() {
    let start = Instant::now();
    let mut instances = 0;
    let mut worst = 0.0_f64;
    let mut seed = 0u64;
    while instances < 30 {
        seed += 1;
        assert!(seed < 600, "instance generation exhausted");
        let dims: &[usize] = if seed.is_multiple_of(2) { &[2, 3, 1] } else { &[2, 4, 1] };
        let net = random_net(seed * 53 + 17, dims);
        let reg = random_region(seed * 29 + 13, 2, 0.5);
        let mut splits = SplitSet::all_free(&net.hidden_dims());
        let pre0 = interval_bounds(&net, &reg).unwrap();
        let free = pre0.unstable_free(&splits);
        split_subset(&mut splits, &free, |_| true);
        let (bounds, consistent) = interval_bounds_with_splits(&net, &reg, &splits).unwrap();
        if !consistent || !bounds.fully_split(&splits) {
            continue;
        }
        let lp = match lp_relaxation_min(&net, &reg, &bounds, &splits).unwrap() {
            LpOutcome::Optimal(v) => v,
            LpOutcome::Empty => continue,
        };
        let truth = match exact_min(&net, &reg, &splits).unwrap() {
            OracleOutcome::Min { value, .. } => value,
            OracleOutcome::Empty => continue,
        };
        let mut state = ParamState::init(&net);
        let cfg = OptimizerConfig {
            iters: 500,
            ..OptimizerConfig::default()
        };
        let out = ascend(&net, &reg, &bounds, &splits, &mut state, &cfg).unwrap();
        instances += 1;
        worst = worst
            .max((out.best - lp).abs())
            .max((out.best - truth).abs())
            .max((lp - truth).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = worst <= 1e-6 && secs < 60.0;
    report(
        5,
        "full-split-exactness",
        passed,
        &format!("ascent = LP = enumeration on {instances} instances, worst spread {worst:.3e}, {secs:.2}s"),
    );
}

/// 100 random 2-4-4-1 nets at a radius calibrated to balance verdicts:
/// branch and bound matches exhaustive enumeration on every instance, under
/// both branching heuristics, within 10 s per instance.
#[test]
fn c06_completeness_vs_oracle() {
    let net_for = |seed: u64| random_net(seed * 37 + 3, &[2, 4, 4, 1]);
    let region_for = |seed: u64, eps: f64| random_region(seed * 43 + 19, 2, eps);

    // Calibrate ε on a 30-net pre-scan: pick the candidate whose robust
    // fraction is closest to one half.
    let mut best_eps = 0.5;
    let mut best_dist = f64::INFINITY;
    for &eps in &[0.4, 0.5, 0.6, 0.7] {
        let mut robust = 0;
        for seed in 0..30u64 {
            let net = net_for(seed);
            let splits = SplitSet::all_free(&net.hidden_dims());
            if let OracleOutcome::Min { value, .. } =
                exact_min(&net, &region_for(seed, eps), &splits).unwrap()
            {
                if value >= 0.0 {
                    robust += 1;
                }
            }
        }
        let dist = (robust as f64 / 30.0 - 0.5).abs();
        if dist < best_dist {
            best_dist = dist;
            best_eps = eps;
        }
    }

    let mut robust = 0;
    let mut matched = 0;
    let mut slowest = 0.0_f64;
    for seed in 0..100u64 {
        let net = net_for(seed);
        let reg = region_for(seed, best_eps);
        let splits = SplitSet::all_free(&net.hidden_dims());
        let truth = match exact_min(&net, &reg, &splits).unwrap() {
            OracleOutcome::Min { value, .. } => value,
            OracleOutcome::Empty => unreachable!("free subdomain is never empty"),
        };
        let expected = if truth < 0.0 {
            Status::Falsified
        } else {
            Status::Verified
        };
        if expected == Status::Verified {
            robust += 1;
        }
        for branching in [Branching::BabSr, Branching::Fsb] {
            let cfg = BabConfig {
                branching,
                seed: seed + 1,
                ..BabConfig::default()
            };
            let t = Instant::now();
            let verdict = run_bab(&net, &reg, &cfg, None).unwrap();
            let elapsed = t.elapsed().as_secs_f64();
            slowest = slowest.max(elapsed);
            assert!(elapsed < 10.0, "seed {seed} {branching:?} took {elapsed:.1}s");
            if verdict.status == expected {
                matched += 1;
            }
            if let Some(w) = &verdict.counterexample {
                assert!(net.forward_eval(w).unwrap() < 0.0, "witness fails at seed {seed}");
                let linf = w
                    .iter()
                    .zip(reg.center.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(linf <= reg.epsilon + 1e-9, "witness outside region at seed {seed}");
            }
        }
    }
    let passed = matched == 200;
    report(
        6,
        "completeness-vs-oracle",
        passed,
        &format!(
            "{matched}/200 verdicts match enumeration (ε = {best_eps}, {robust}/100 robust), slowest run {slowest:.2}s"
        ),
    );
}

/// 20 random instances: reverse-mode gradients match central finite
/// differences (step 1e-5) to 1e-4 over every consulted (α, β) coordinate.
#[test]
fn c07_gradient_finite_differences() {
    let h = 1e-5;
    let mut worst = 0.0_f64;
    let mut coords = 0usize;
    for seed in 0..20u64 {
        let dims: &[usize] = if seed.is_multiple_of(2) { &[2, 4, 1] } else { &[2, 3, 3, 1] };
        let net = random_net(seed * 61 + 13, dims);
        let reg = random_region(seed * 11 + 5, 2, 0.5);
        let mut splits = SplitSet::all_free(&net.hidden_dims());
        let pre0 = interval_bounds(&net, &reg).unwrap();
        let free = pre0.unstable_free(&splits);
        split_subset(&mut splits, &free, |k| k < (seed as usize % 3).min(free.len()));
        let (bounds, consistent) = interval_bounds_with_splits(&net, &reg, &splits).unwrap();
        if !consistent {
            continue;
        }
        let mut ps = seed * 3 + 29;
        let mut group = ParamState::init(&net).objective;
        for a in &mut group.alpha {
            a.mapv_inplace(|_| 0.1 + 0.8 * unit(&mut ps));
        }
        for b in &mut group.beta {
            b.mapv_inplace(|_| 0.5 * unit(&mut ps));
        }
        let g = gradient(&net, &reg, &bounds, &splits, &group).unwrap();
        let eval = |gr: &ParamGroup| {
            let lb = backward_bound(&net, &bounds, &splits, &gr.alpha, &gr.beta, BoundObjective::Output)
                .unwrap();
            concretize(&lb, &reg)
        };
        let mut probe = |is_alpha: bool, layer: usize, idx: usize, analytic: f64| {
            let mut plus = group.clone();
            let mut minus = group.clone();
            if is_alpha {
                plus.alpha[layer][idx] += h;
                minus.alpha[layer][idx] -= h;
            } else {
                plus.beta[layer][idx] += h;
                minus.beta[layer][idx] -= h;
            }
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let rel = (analytic - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(rel);
            coords += 1;
        };
        for (layer, ga) in g.g_alpha.iter().enumerate() {
            for (idx, &v) in ga.iter().enumerate() {
                probe(true, layer, idx, v);
            }
        }
        for (layer, gb) in g.g_beta.iter().enumerate() {
            for (idx, &v) in gb.iter().enumerate() {
                probe(false, layer, idx, v);
            }
        }
    }
    let passed = worst <= 1e-4 && coords > 0;
    report(
        7,
        "gradient-finite-differences",
        passed,
        &format!("max relative error {worst:.3e} over {coords} coordinates"),
    );
}

/// 50 robust instances the root pass cannot verify: the certified lower
/// bound is nondecreasing across time budgets, and the generous-budget run
/// strictly improves on the root bound on at least 80%.
#[test]
fn c08_anytime_lower_bounds() {
    let mut picked = Vec::new();
    let mut seed = 0u64;
    while picked.len() < 50 {
        seed += 1;
        assert!(seed < 2000, "instance generation exhausted");
        let net = random_net(seed * 37 + 3, &[2, 4, 4, 1]);
        let reg = random_region(seed * 43 + 19, 2, 0.55);
        let splits = SplitSet::all_free(&net.hidden_dims());
        let robust = match exact_min(&net, &reg, &splits).unwrap() {
            OracleOutcome::Min { value, .. } => value >= 0.0,
            OracleOutcome::Empty => false,
        };
        if !robust {
            continue;
        }
        let root_cfg = BabConfig {
            timeout: Some(0.0),
            incomplete: true,
            seed,
            ..BabConfig::default()
        };
        let root = run_bab(&net, &reg, &root_cfg, None).unwrap();
        if root.status == Status::Verified {
            continue;
        }
        picked.push((net, reg, seed, root.global_lower));
    }

    let mut improved = 0;
    let mut monotone = true;
    for (net, reg, seed, root_lower) in &picked {
        let run = |timeout: f64| {
            let cfg = BabConfig {
                timeout: Some(timeout),
                incomplete: true,
                seed: *seed,
                ..BabConfig::default()
            };
            run_bab(net, reg, &cfg, None).unwrap()
        };
        let mid = run(0.02);
        let full = run(10.0);
        monotone &= *root_lower <= mid.global_lower + 1e-9;
        monotone &= mid.global_lower <= full.global_lower + 1e-9;
        if full.global_lower > root_lower + 1e-12 {
            improved += 1;
        }
    }
    let frac = improved as f64 / picked.len() as f64;
    let passed = monotone && frac >= 0.8;
    report(
        8,
        "anytime-lower-bounds",
        passed,
        &format!(
            "lower bounds nondecreasing: {monotone}; improved over root on {improved}/{} ({:.0}%)",
            picked.len(),
            100.0 * frac
        ),
    );
}

/// At least one instance where jointly optimizing intermediate bounds beats
/// the triangle-LP optimum computed under interval intermediate bounds by
/// 1e-3 or more.
#[test]
fn c09_joint_tightening_beats_lp() {
    let splits_for = |net: &Network| SplitSet::all_free(&net.hidden_dims());
    let mut found = None;
    for seed in 0..120u64 {
        let net = random_net(seed * 71 + 23, &[2, 4, 4, 1]);
        let reg = random_region(seed * 31 + 11, 2, 0.5);
        let splits = splits_for(&net);
        let pre = interval_bounds(&net, &reg).unwrap();
        let lp = match lp_relaxation_min(&net, &reg, &pre, &splits).unwrap() {
            LpOutcome::Optimal(v) => v,
            LpOutcome::Empty => continue,
        };
        let mut state = ParamState::init(&net);
        let cfg = OptimizerConfig {
            iters: 60,
            refine_rounds: 2,
            ..OptimizerConfig::default()
        };
        let joint = joint_optimize(&net, &reg, &splits, &mut state, &cfg).unwrap();
        if joint.consistent && joint.bound - lp >= 1e-3 {
            found = Some((seed, joint.bound - lp));
            break;
        }
    }
    let passed = found.is_some();
    let detail = match found {
        Some((seed, gap)) => format!("joint bound exceeds interval-LP by {gap:.4} at seed {seed}"),
        None => "no instance found in 120 seeds".to_string(),
    };
    report(9, "joint-tightening-beats-lp", passed, &detail);
}

/// 30 constructed empty subdomains (two neurons sharing a weight vector,
/// offset biases, split to contradict; LP-confirmed infeasible): the β
/// ascent pushes the bound past the incumbent on at least 90%.
#[test]
fn c10_infeasible_subdomain_pruning() {
    let mut built = 0;
    let mut pruned = 0;
    let mut seed = 0u64;
    while built < 30 {
        seed += 1;
        assert!(seed < 300, "instance generation exhausted");
        let mut s = seed * 97 + 31;
        // First layer: two copies of one weight row with biases 0.5 apart,
        // placed so both neurons straddle zero on the region.
        let w: Vec<f64> = (0..2).map(|_| xorshift(&mut s)).collect();
        let scale = 1.0 / (w[0].abs() + w[1].abs()).max(0.2);
        let wrow = [w[0] * scale * 2.0, w[1] * scale * 2.0];
        let b0 = -0.25 + 0.2 * xorshift(&mut s);
        let l1 = Layer::new(
            Array2::from_shape_vec((2, 2), vec![wrow[0], wrow[1], wrow[0], wrow[1]]).unwrap(),
            Array1::from_vec(vec![b0, b0 + 0.5]),
        )
        .unwrap();
        let l2 = Layer::new(
            Array2::from_shape_vec((1, 2), vec![xorshift(&mut s), xorshift(&mut s)]).unwrap(),
            Array1::from_vec(vec![0.2 * xorshift(&mut s)]),
        )
        .unwrap();
        let net = Network::new(vec![l1, l2]).unwrap();
        let reg = InputRegion::new(Array1::zeros(2), 0.6, Norm::Inf).unwrap();

        let pre = interval_bounds(&net, &reg).unwrap();
        if !(pre.is_unstable(0, 0) && pre.is_unstable(0, 1)) {
            continue;
        }
        // z₂ = z₁ + 0.5 everywhere, so forcing z₁ ≥ 0 and z₂ ≤ 0 is
        // contradictory even though each side is interval-feasible.
        let mut splits = SplitSet::all_free(&net.hidden_dims());
        splits.set(0, 0, NeuronStatus::Pos);
        splits.set(0, 1, NeuronStatus::Neg);
        let (bounds, consistent) = interval_bounds_with_splits(&net, &reg, &splits).unwrap();
        if !consistent {
            continue;
        }
        match lp_relaxation_min(&net, &reg, &bounds, &splits).unwrap() {
            LpOutcome::Empty => {}
            LpOutcome::Optimal(_) => continue,
        }
        built += 1;

        let incumbent = net.forward_eval(&reg.center).unwrap();
        let mut state = ParamState::init(&net);
        let cfg = OptimizerConfig {
            iters: 100,
            prune_threshold: Some(incumbent),
            ..OptimizerConfig::default()
        };
        let out = ascend(&net, &reg, &bounds, &splits, &mut state, &cfg).unwrap();
        if out.best > incumbent {
            pruned += 1;
        }
    }
    let frac = pruned as f64 / built as f64;
    let passed = frac >= 0.9;
    report(
        10,
        "infeasible-subdomain-pruning",
        passed,
        &format!("{pruned}/{built} empty subdomains pruned past the incumbent ({:.0}%)", 100.0 * frac),
    );
}

/// Fixed seed, one thread: two consecutive verify runs of the binary produce
/// byte-identical JSON reports and CSV progress logs.
#[test]
fn c11_byte_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.json");
    let property_path = dir.path().join("property.json");
    random_net(4242, &[2, 4, 4, 1]).save(&model_path).unwrap();
    let region = random_region(99, 2, 0.5);
    let spec = Specification::new(
        Array2::from_shape_vec((2, 1), vec![1.0, -1.0]).unwrap(),
        Array1::from_vec(vec![0.0, 0.5]),
    )
    .unwrap();
    Property { region, spec }.save(&property_path).unwrap();

    let run = |tag: &str| {
        let report_path = dir.path().join(format!("report-{tag}.json"));
        let log_path = dir.path().join(format!("log-{tag}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_relucert"))
            .args([
                "--model",
                model_path.to_str().unwrap(),
                "--property",
                property_path.to_str().unwrap(),
                "--mode",
                "verify",
                "--seed",
                "5",
                "--threads",
                "1",
                "--report",
                report_path.to_str().unwrap(),
                "--log",
                log_path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(
            status.status.code().is_some(),
            "verifier terminated without an exit code"
        );
        let read = |p: &Path| std::fs::read(p).unwrap();
        let mut bytes = read(&report_path);
        for row in 0..2 {
            let log_row = dir.path().join(format!("log-{tag}.row{row}.csv"));
            bytes.extend(read(&log_row));
        }
        bytes
    };
    let first = run("a");
    let second = run("b");
    let passed = first == second;
    report(
        11,
        "byte-identical-reruns",
        passed,
        &format!("{} bytes of report + logs compared", first.len()),
    );
}
