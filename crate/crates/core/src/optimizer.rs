//! Projected first-order ascent on the bound's free parameters.
//!
//! Every (α, β) with α ∈ [0, 1] and β ≥ 0 yields a sound lower bound, so the
//! optimizer may stop anywhere: it tracks the best value seen and only ever
//! improves the certificate. Gradients come from replaying the backward
//! pass's relaxation tape in reverse (a hand-rolled adjoint of the fold).
//! With every unstable neuron split the objective is concave in β and an
//! exact line search applies; otherwise an adaptive-moment update with
//! decaying learning rates does the work.

use ndarray::Array1;

use crate::bounds::{
    argmin_input, backward_bound, backward_bound_traced, concretize, interval_bounds_with_splits,
    BackwardTrace, BoundObjective, LinearBound, ParamGroup, PreActBounds, SplitSet,
};
use crate::error::Result;
use crate::model::{InputRegion, Network, Norm};

/// When to replace the moment update with a supergradient line search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSearchMode {
    /// Line search exactly when the domain is fully split (the concave case).
    Auto,
    /// Always line search.
    Always,
    /// Never line search.
    Never,
}

/// Ascent hyperparameters. Defaults: 20 iterations, learning rates 0.1 (α)
/// and 0.05 (β), multiplicative decay 0.98 per iteration.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub iters: usize,
    pub lr_alpha: f64,
    pub lr_beta: f64,
    pub decay: f64,
    pub line_search: LineSearchMode,
    /// Rounds of intermediate-bound refinement in [`joint_optimize`].
    pub refine_rounds: usize,
    /// Also evaluate the all-zero-slope parameter point, whose bound provably
    /// dominates pure interval propagation — a cheap floor for best-so-far.
    pub interval_floor: bool,
    /// Stop ascending once the best bound reaches this value (the caller's
    /// prune threshold); the partial result is still sound.
    pub prune_threshold: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            iters: 20,
            lr_alpha: 0.1,
            lr_beta: 0.05,
            decay: 0.98,
            line_search: LineSearchMode::Auto,
            refine_rounds: 1,
            interval_floor: true,
            prune_threshold: None,
        }
    }
}

/// Adam-style first and second moment accumulators, shaped like a
/// [`ParamGroup`].
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    m_alpha: Vec<Array1<f64>>,
    v_alpha: Vec<Array1<f64>>,
    m_beta: Vec<Array1<f64>>,
    v_beta: Vec<Array1<f64>>,
    step: usize,
}

impl Moments {
    pub fn zeros_like(group: &ParamGroup) -> Self {
        let z = |vs: &Vec<Array1<f64>>| vs.iter().map(|v| Array1::zeros(v.len())).collect();
        Self {
            m_alpha: z(&group.alpha),
            v_alpha: z(&group.alpha),
            m_beta: z(&group.beta),
            v_beta: z(&group.beta),
            step: 0,
        }
    }

    pub fn reset(&mut self) {
        for v in self
            .m_alpha
            .iter_mut()
            .chain(&mut self.v_alpha)
            .chain(&mut self.m_beta)
            .chain(&mut self.v_beta)
        {
            v.fill(0.0);
        }
        self.step = 0;
    }
}

/// All optimizable parameters for one subdomain: the final objective's
/// (α, β) with their moment buffers, plus one shared (α′, β′) group per
/// hidden layer for that layer's own intermediate-bound objectives (the
/// group for layer `h` covers only the ReLU layers below `h`).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamState {
    pub objective: ParamGroup,
    pub intermediate: Vec<ParamGroup>,
    pub moments: Moments,
}

impl ParamState {
    pub fn init(net: &Network) -> Self {
        let hidden = net.hidden_dims();
        let objective = ParamGroup::init(&hidden, hidden.len());
        let moments = Moments::zeros_like(&objective);
        Self {
            objective,
            intermediate: (0..hidden.len())
                .map(|h| ParamGroup::init(&hidden, h))
                .collect(),
            moments,
        }
    }

    /// Drop optimizer momentum while keeping parameter values — used when a
    /// domain is split and the children restart ascent from the parent's
    /// parameters.
    pub fn reset_moments(&mut self) {
        self.moments.reset();
    }
}

/// Value, linear form, and reverse-mode gradient of one concretized bound.
#[derive(Debug, Clone)]
pub struct BoundGradient {
    pub value: f64,
    pub linear: LinearBound,
    pub g_alpha: Vec<Array1<f64>>,
    pub g_beta: Vec<Array1<f64>>,
}

/// Subgradient of `‖a‖_q` (zero vector at a = 0; coordinate subgradient 0 at
/// individual zero entries).
fn norm_subgradient(a: &Array1<f64>, q: Norm) -> Array1<f64> {
    match q {
        Norm::P(p) if p == 1.0 => a.mapv(|v| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        }),
        Norm::Inf => {
            let mut g = Array1::zeros(a.len());
            if let Some((i, &v)) = a
                .iter()
                .enumerate()
                .max_by(|(_, x), (_, y)| x.abs().partial_cmp(&y.abs()).unwrap())
            {
                if v != 0.0 {
                    g[i] = v.signum();
                }
            }
            g
        }
        Norm::P(p) => {
            let norm = q.vector_norm(a);
            if norm == 0.0 {
                Array1::zeros(a.len())
            } else {
                a.mapv(|v| v.signum() * (v.abs() / norm).powf(p - 1.0))
            }
        }
    }
}

/// Concretized bound and its gradient w.r.t. every (α, β) entry the backward
/// pass consulted, obtained by replaying the relaxation tape in reverse.
pub fn gradient(
    net: &Network,
    region: &InputRegion,
    bounds: &PreActBounds,
    splits: &SplitSet,
    group: &ParamGroup,
) -> Result<BoundGradient> {
    gradient_for(net, region, bounds, splits, group, BoundObjective::Output)
}

fn gradient_for(
    net: &Network,
    region: &InputRegion,
    bounds: &PreActBounds,
    splits: &SplitSet,
    group: &ParamGroup,
    objective: BoundObjective,
) -> Result<BoundGradient> {
    let (linear, trace) =
        backward_bound_traced(net, bounds, splits, &group.alpha, &group.beta, objective)?;
    let value = concretize(&linear, region);

    let mut g_alpha: Vec<Array1<f64>> =
        group.alpha.iter().map(|v| Array1::zeros(v.len())).collect();
    let mut g_beta: Vec<Array1<f64>> =
        group.beta.iter().map(|v| Array1::zeros(v.len())).collect();

    // Adjoint of the final coefficient row: ∂/∂a of (−ε‖a‖_q + a·x0 + c).
    let q = region.norm.dual();
    let mut ga = &region.center - &(norm_subgradient(&linear.a, q) * region.epsilon);

    // The tape holds steps deepest-first; the fold's last step (layer 0)
    // produced the final row, so the adjoint walk consumes the tape reversed.
    for step in trace.steps.iter().rev() {
        let layer = net.layer(step.hidden);
        // a_next = ahat·W and c += ahat·b ⇒ ∂/∂ahat = W·ga + b
        let ghat = layer.weight.dot(&ga) + &layer.bias;
        for j in 0..ghat.len() {
            if step.s[j] != 0.0 {
                g_beta[step.hidden][j] = ghat[j] * step.s[j];
            }
            if step.alpha_active[j] {
                // ahat_j = a_j·α_j there, so ∂/∂α_j = ahat-adjoint · a_j
                g_alpha[step.hidden][j] = ghat[j] * step.coeff[j];
            }
        }
        // a enters ahat via the slopes and c via the intercepts
        ga = &ghat * &step.d + &step.bcheck;
    }

    Ok(BoundGradient {
        value,
        linear,
        g_alpha,
        g_beta,
    })
}

/// Result of one ascent: the best certified bound seen and the linear form
/// that produced it (whose concretization argmin supplies upper-bound
/// witnesses).
#[derive(Debug, Clone)]
pub struct AscendOutcome {
    pub best: f64,
    pub linear: LinearBound,
}

fn all_finite(g: &BoundGradient) -> bool {
    g.value.is_finite()
        && g.g_alpha.iter().all(|v| v.iter().all(|x| x.is_finite()))
        && g.g_beta.iter().all(|v| v.iter().all(|x| x.is_finite()))
}

/// Maximize the concretized output bound over `state.objective`, leaving the
/// best-seen parameters in the state. With `iters = 0` the state is untouched
/// and the returned value is the bound at the initial parameters.
///
/// In the fully-split ℓ∞ case the objective is concave piecewise-linear in β
/// (the backward fold is affine in β once no slope depends on a coefficient
/// sign), and a dedicated exact ascent — supergradient steps with exact
/// breakpoint line maximization, plus a steepest-ascent direction program at
/// kinks — converges finitely and certifies optimality. Everywhere else a
/// projected adaptive-moment update (optionally with a bracketing line
/// search) does the climbing.
pub fn ascend(
    net: &Network,
    region: &InputRegion,
    bounds: &PreActBounds,
    splits: &SplitSet,
    state: &mut ParamState,
    cfg: &OptimizerConfig,
) -> Result<AscendOutcome> {
    let eval = |g: &ParamGroup| -> Result<(f64, LinearBound)> {
        let lb = backward_bound(net, bounds, splits, &g.alpha, &g.beta, BoundObjective::Output)?;
        Ok((concretize(&lb, region), lb))
    };

    let (v0, lb0) = eval(&state.objective)?;
    if cfg.iters == 0 {
        return Ok(AscendOutcome {
            best: v0,
            linear: lb0,
        });
    }

    let mut best = v0;
    let mut best_lb = lb0;
    let mut best_params = state.objective.clone();

    if cfg.interval_floor {
        // α ≡ 0 turns every relaxation's lower line into the interval floor;
        // this candidate dominates plain box propagation no matter where the
        // ascent itself wanders.
        let mut floor = state.objective.clone();
        for a in &mut floor.alpha {
            a.fill(0.0);
        }
        for b in &mut floor.beta {
            b.fill(0.0);
        }
        let (vf, lbf) = eval(&floor)?;
        if vf > best {
            best = vf;
            best_lb = lbf;
            best_params = floor;
        }
    }

    let concave_case = matches!(region.norm, Norm::Inf)
        && bounds.fully_split(splits)
        && cfg.line_search != LineSearchMode::Never;
    if concave_case {
        if let Some((v, lb)) = concave_beta_ascent(net, region, bounds, splits, state, cfg)? {
            if v > best {
                best = v;
                best_lb = lb;
                best_params = state.objective.clone();
            }
        }
    } else if cfg.line_search == LineSearchMode::Always {
        // The objective is only piecewise smooth in α: each pattern of slope
        // selections is its own facet, and a supergradient run can wedge into
        // a facet boundary far from the optimum. Three deterministic starts —
        // as entered, all-zero slopes, centered slopes — seed the coarse
        // selection patterns; the overall winner stands.
        let entry = state.objective.clone();
        for fill in [None, Some(0.0), Some(0.5)] {
            let mut cur = entry.clone();
            if let Some(v) = fill {
                for al in &mut cur.alpha {
                    al.fill(v);
                }
                for be in &mut cur.beta {
                    be.fill(0.0);
                }
            }
            let (v, lb) = line_search_ascent(net, region, bounds, splits, &mut cur, cfg)?;
            if v > best {
                best = v;
                best_lb = lb;
                best_params = cur;
            }
            if let Some(thr) = cfg.prune_threshold {
                if best >= thr {
                    break;
                }
            }
        }
        state.objective = best_params.clone();
    } else {
        for it in 0..cfg.iters {
            if let Some(thr) = cfg.prune_threshold {
                if best >= thr {
                    break;
                }
            }
            let g = gradient(net, region, bounds, splits, &state.objective)?;
            if g.value > best {
                best = g.value;
                best_lb = g.linear.clone();
                best_params = state.objective.clone();
            }
            if !all_finite(&g) {
                break;
            }
            adam_step(&mut state.objective, &mut state.moments, &g, cfg, it);
            state.objective.project();
        }
    }

    let (vl, lbl) = eval(&state.objective)?;
    if vl > best {
        best = vl;
        best_lb = lbl;
    } else {
        // leave the state at the iterate that achieved the best bound — the
        // natural warm start for any follow-up ascent
        state.objective = best_params;
    }
    Ok(AscendOutcome {
        best,
        linear: best_lb,
    })
}

/// One supergradient line-search run from the current parameter point, with
/// an exact β sharpening after every step. Tracks its own best; on return
/// `group` sits at the parameters that achieved it.
fn line_search_ascent(
    net: &Network,
    region: &InputRegion,
    bounds: &PreActBounds,
    splits: &SplitSet,
    group: &mut ParamGroup,
    cfg: &OptimizerConfig,
) -> Result<(f64, LinearBound)> {
    let lb0 = backward_bound(
        net,
        bounds,
        splits,
        &group.alpha,
        &group.beta,
        BoundObjective::Output,
    )?;
    let mut best = concretize(&lb0, region);
    let mut best_lb = lb0;
    let mut best_params = group.clone();
    let mut ls_step = 1.0_f64;

    for it in 0..cfg.iters {
        if let Some(thr) = cfg.prune_threshold {
            if best >= thr {
                break;
            }
        }
        let g = gradient(net, region, bounds, splits, group)?;
        if g.value > best {
            best = g.value;
            best_lb = g.linear.clone();
            best_params = group.clone();
        }
        if !all_finite(&g) {
            break;
        }
        let improved = line_search_step(net, region, bounds, splits, group, &g, &mut ls_step, it)?;
        if let Some((v, lb)) = improved {
            if v > best {
                best = v;
                best_lb = lb;
                best_params = group.clone();
            }
        }
        // Sharpen β exactly under the relaxation selections the last step
        // settled on; the piecewise-linear landscape has ridges the
        // supergradient zigzags across, and the frozen-selection model walks
        // straight along them. Acceptance re-checks the proposal through the
        // real fold, so this never loosens the bound.
        let polished = beta_polish(
            net,
            region,
            bounds,
            splits,
            group,
            cfg.iters.max(50),
            cfg.prune_threshold,
        )?;
        if let Some((v, lb)) = polished {
            if v > best {
                best = v;
                best_lb = lb;
                best_params = group.clone();
            }
        }
    }

    *group = best_params;
    Ok((best, best_lb))
}

/// An affine model of the backward fold as a function of the flattened β
/// vector: coefficients and constant at the current point, plus their
/// (constant) sensitivities. The concretized objective of such a model,
/// `g(β) = Σ_i min over both signs of (x0_i ± ε)·a_i(β) + c(β)`, is concave
/// piecewise linear.
struct AffineBetaModel {
    a: Array1<f64>,
    c: f64,
    jac: ndarray::Array2<f64>,
    c_lin: Array1<f64>,
}

/// Exact ascent of a concave piecewise-linear model objective over β ≥ 0.
///
/// Every step is exact linear algebra: breakpoint-walking line maximization
/// along the projected supergradient, and at kinks a tiny direction LP over
/// the active pieces that either yields a strictly improving direction or
/// certifies global optimality of the model. On return `beta` holds the best
/// point found; the best model value is returned.
fn maximize_affine_beta(
    mut model: AffineBetaModel,
    beta: &mut Array1<f64>,
    x0: &Array1<f64>,
    eps: f64,
    iters: usize,
    prune_threshold: Option<f64>,
) -> Result<f64> {
    let d0 = model.a.len();
    let k = beta.len();
    let model_value = |a: &Array1<f64>, c: f64| -> f64 {
        a.iter()
            .zip(x0.iter())
            .map(|(&ai, &xi)| (ai * (xi - eps)).min(ai * (xi + eps)))
            .sum::<f64>()
            + c
    };

    let (jac, c_lin) = (&model.jac, &model.c_lin);
    let (a, c) = (&mut model.a, &mut model.c);
    let mut best_beta = beta.clone();
    let mut best_model = model_value(a, *c);

    for _ in 0..iters {
        if let Some(thr) = prune_threshold {
            if best_model >= thr {
                break;
            }
        }
        // Snap coefficients sitting within rounding noise of a kink onto it,
        // so the supergradient, the active set, and the line maximizer agree
        // on which pieces meet here; without this the iterate can dither
        // across a microscopic residue forever, never engaging the escape
        // program. Callers re-evaluate the winner through the real fold, which
        // erases the ≤1e-11 model perturbation.
        let snap = 1e-11 * (1.0 + a.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        a.mapv_inplace(|ai| if ai.abs() <= snap { 0.0 } else { ai });
        let v_cur = model_value(a, *c);
        // An improving direction that never hits a box wall or a slope drop
        // means the dual is unbounded — the split set is infeasible. Step far
        // enough to clear the prune threshold (plus slack) so the caller can
        // prune; without a threshold, just climb a healthy amount per pass.
        let overshoot = match prune_threshold {
            Some(thr) => (thr - v_cur).max(0.0) + 1.0,
            None => 10.0 * (1.0 + v_cur.abs()),
        };
        // Centered supergradient of the model, projected at β = 0.
        let w = a.mapv(|ai| {
            if ai > 0.0 {
                -eps
            } else if ai < 0.0 {
                eps
            } else {
                0.0
            }
        }) + x0;
        let mut dir = jac.t().dot(&w) + c_lin;
        for j in 0..k {
            if beta[j] <= 0.0 && dir[j] < 0.0 {
                dir[j] = 0.0;
            }
        }

        let mut moved = false;
        if dir.iter().any(|&d| d != 0.0) {
            moved = advance_along(beta, a, c, jac, c_lin, &dir, x0, eps, overshoot);
        }
        if !moved {
            // Kink (or optimum): consult every piece active at the current
            // point. |I0| is at most the input dimension, so the 2^|I0|
            // enumeration stays tiny at this crate's scale.
            let active: Vec<usize> = (0..d0).filter(|&i| a[i] == 0.0).collect();
            if active.len() > 12 {
                break; // give up escaping; best-so-far stands
            }
            match kink_escape_direction(jac, c_lin, a, beta, &active, x0, eps)? {
                None => break, // certified: no ascent direction exists
                Some(u) => {
                    if !advance_along(beta, a, c, jac, c_lin, &u, x0, eps, overshoot) {
                        break;
                    }
                }
            }
        }
        let v = model_value(a, *c);
        if v > best_model {
            best_model = v;
            best_beta = beta.clone();
        }
    }

    *beta = best_beta;
    Ok(best_model)
}

/// Exact ascent for the concave fully-split ℓ∞ case.
///
/// With every slope pinned by a split or stability, the backward fold is an
/// affine map of the flattened β vector — so [`maximize_affine_beta`] applies
/// to the true objective directly. The affine model is probed once (one extra
/// backward pass per split neuron).
///
/// Returns the best true (re-evaluated through the fold) value and linear
/// form, with `state.objective.beta` moved to the maximizer.
fn concave_beta_ascent(
    net: &Network,
    region: &InputRegion,
    bounds: &PreActBounds,
    splits: &SplitSet,
    state: &mut ParamState,
    cfg: &OptimizerConfig,
) -> Result<Option<(f64, LinearBound)>> {
    let coords = splits.split_neurons();
    let k = coords.len();
    let group = &mut state.objective;
    let fold = |g: &ParamGroup| -> Result<LinearBound> {
        backward_bound(net, bounds, splits, &g.alpha, &g.beta, BoundObjective::Output)
    };

    let base = fold(group)?;
    if k == 0 {
        let v = concretize(&base, region);
        return Ok(Some((v, base)));
    }

    // Affine model: a(β) = a_base + J·(β − β_base), c(β) = c_base + w·(β − β_base)
    let d0 = net.input_dim();
    let mut jac = ndarray::Array2::<f64>::zeros((d0, k));
    let mut c_lin = Array1::<f64>::zeros(k);
    for (col, &(h, j, _)) in coords.iter().enumerate() {
        let mut probe = group.clone();
        probe.beta[h][j] += 1.0;
        let lb = fold(&probe)?;
        jac.column_mut(col).assign(&(&lb.a - &base.a));
        c_lin[col] = lb.c - base.c;
    }

    let mut beta: Array1<f64> = Array1::from_iter(coords.iter().map(|&(h, j, _)| group.beta[h][j]));
    let model = AffineBetaModel {
        a: base.a.clone(),
        c: base.c,
        jac,
        c_lin,
    };
    maximize_affine_beta(
        model,
        &mut beta,
        &region.center,
        region.epsilon,
        cfg.iters,
        cfg.prune_threshold,
    )?;

    // Re-evaluate the best iterate through the real fold: authoritative value,
    // immune to any drift the incremental model accumulated.
    for (col, &(h, j, _)) in coords.iter().enumerate() {
        group.beta[h][j] = beta[col].max(0.0);
    }
    let lb = fold(group)?;
    let v = concretize(&lb, region);
    Ok(Some((v, lb)))
}

/// Re-run the backward fold with every relaxation selection pinned to a
/// recorded tape; only the split multipliers vary. With selections frozen the
/// result is affine in β — but no longer guaranteed sound once a coefficient
/// sign flips, so values read off this replay are proposals to be re-checked
/// through the real fold, never bounds.
fn replay_frozen(net: &Network, trace: &BackwardTrace, beta: &[Array1<f64>]) -> LinearBound {
    let last = net.layer(net.num_layers() - 1);
    let mut a = last.weight.row(0).to_owned();
    let mut c = last.bias[0];
    for step in &trace.steps {
        let layer = net.layer(step.hidden);
        c += a.dot(&step.bcheck);
        let mut ahat = &a * &step.d;
        ahat += &(&step.s * &beta[step.hidden]);
        c += ahat.dot(&layer.bias);
        a = ahat.dot(&layer.weight);
    }
    LinearBound { a, c }
}

/// One exact β maximization over the concave model obtained by freezing the
/// current relaxation selections, used to sharpen line-search ascent between
/// supergradient steps. The maximizer is proposed to the true fold and kept
/// only when the re-evaluated bound improves on the entry value.
fn beta_polish(
    net: &Network,
    region: &InputRegion,
    bounds: &PreActBounds,
    splits: &SplitSet,
    group: &mut ParamGroup,
    inner_iters: usize,
    prune_threshold: Option<f64>,
) -> Result<Option<(f64, LinearBound)>> {
    if !matches!(region.norm, Norm::Inf) {
        return Ok(None);
    }
    let coords = splits.split_neurons();
    let k = coords.len();
    if k == 0 {
        return Ok(None);
    }

    let (lb0, trace) = backward_bound_traced(
        net,
        bounds,
        splits,
        &group.alpha,
        &group.beta,
        BoundObjective::Output,
    )?;
    let v0 = concretize(&lb0, region);

    let base = replay_frozen(net, &trace, &group.beta);
    let d0 = net.input_dim();
    let mut jac = ndarray::Array2::<f64>::zeros((d0, k));
    let mut c_lin = Array1::<f64>::zeros(k);
    for (col, &(h, j, _)) in coords.iter().enumerate() {
        let mut probe = group.beta.clone();
        probe[h][j] += 1.0;
        let lb = replay_frozen(net, &trace, &probe);
        jac.column_mut(col).assign(&(&lb.a - &base.a));
        c_lin[col] = lb.c - base.c;
    }

    let mut beta: Array1<f64> = Array1::from_iter(coords.iter().map(|&(h, j, _)| group.beta[h][j]));
    let model = AffineBetaModel {
        a: base.a,
        c: base.c,
        jac,
        c_lin,
    };
    maximize_affine_beta(
        model,
        &mut beta,
        &region.center,
        region.epsilon,
        inner_iters,
        prune_threshold,
    )?;

    let mut cand = group.clone();
    for (col, &(h, j, _)) in coords.iter().enumerate() {
        cand.beta[h][j] = beta[col].max(0.0);
    }
    let lb1 = backward_bound(
        net,
        bounds,
        splits,
        &cand.alpha,
        &cand.beta,
        BoundObjective::Output,
    )?;
    let v1 = concretize(&lb1, region);
    if v1 > v0 {
        *group = cand;
        Ok(Some((v1, lb1)))
    } else {
        Ok(None)
    }
}

/// Exact maximization of the affine-model objective along `dir` from the
/// current point, capped at the first β-coordinate that would cross zero.
/// When the objective keeps rising and no cap exists (an unbounded —
/// infeasible — dual), steps far enough to gain at least `overshoot`.
/// Updates `(beta, a, c)` in place; returns whether any progress was made.
#[allow(clippy::too_many_arguments)]
fn advance_along(
    beta: &mut Array1<f64>,
    a: &mut Array1<f64>,
    c: &mut f64,
    jac: &ndarray::Array2<f64>,
    c_lin: &Array1<f64>,
    dir: &Array1<f64>,
    x0: &Array1<f64>,
    eps: f64,
    overshoot: f64,
) -> bool {
    let v = jac.dot(dir);
    let dc = c_lin.dot(dir);
    let mut t_box = f64::INFINITY;
    for j in 0..beta.len() {
        if dir[j] < 0.0 {
            t_box = t_box.min(beta[j] / -dir[j]);
        }
    }
    if t_box <= 0.0 {
        return false;
    }

    // slope(t) = Σ_i v_i·(x0_i − ε·sign(a_i + t·v_i)) + dc — concave in t,
    // dropping by 2ε|v_i| at each breakpoint t_i = −a_i/v_i.
    let sgn_plus = |ai: f64, vi: f64| -> f64 {
        if ai != 0.0 {
            ai.signum()
        } else if vi != 0.0 {
            vi.signum()
        } else {
            0.0
        }
    };
    let mut slope = dc;
    for i in 0..a.len() {
        slope += v[i] * (x0[i] - eps * sgn_plus(a[i], v[i]));
    }
    if slope <= 0.0 {
        return false;
    }

    let mut breaks: Vec<(f64, f64)> = (0..a.len())
        .filter(|&i| v[i] != 0.0)
        .map(|i| (-a[i] / v[i], 2.0 * eps * v[i].abs()))
        .filter(|&(t, _)| t > 0.0 && t < t_box)
        .collect();
    breaks.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    let mut t_star = t_box;
    let mut t_prev = 0.0;
    let mut gain = 0.0;
    for &(t, drop) in &breaks {
        gain += slope * (t - t_prev);
        t_prev = t;
        slope -= drop;
        if slope <= 0.0 {
            t_star = t;
            break;
        }
    }
    if !t_star.is_finite() {
        // still rising with no wall ahead: unbounded ray — overshoot
        t_star = t_prev + (overshoot - gain).max(1.0) / slope;
    }

    *beta += &(dir * t_star);
    beta.mapv_inplace(|b| b.max(0.0));
    *a += &(v * t_star);
    *c += dc * t_star;
    true
}

/// Steepest-ascent direction at a kink of the concave model: maximize the
/// worst active-piece slope over the unit box (honoring β ≥ 0), via a small
/// LP. `None` means no direction has positive slope — the point is a global
/// maximizer of the concave objective.
fn kink_escape_direction(
    jac: &ndarray::Array2<f64>,
    c_lin: &Array1<f64>,
    a: &Array1<f64>,
    beta: &Array1<f64>,
    active: &[usize],
    x0: &Array1<f64>,
    eps: f64,
) -> Result<Option<Array1<f64>>> {
    use crate::oracle::{simplex_solve, LPProblem, LpStatus};
    let k = beta.len();
    let num_pieces = 1usize << active.len();

    // variables: u_0..u_{k−1}, then δ; maximize δ s.t. δ ≤ γ_σ·u for each
    // sign choice σ on the active coordinates
    let mut lp = LPProblem::new(k + 1);
    lp.objective[k] = -1.0; // minimize −δ
    for j in 0..k {
        lp.var_bounds[j] = if beta[j] <= 0.0 { (0.0, 1.0) } else { (-1.0, 1.0) };
    }
    for mask in 0..num_pieces {
        let mut w = Array1::zeros(a.len());
        for i in 0..a.len() {
            let sgn = match active.iter().position(|&ai| ai == i) {
                Some(pos) => {
                    if mask >> pos & 1 == 1 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                None => a[i].signum(),
            };
            w[i] = x0[i] - eps * sgn;
        }
        let gamma = jac.t().dot(&w) + c_lin;
        let mut row = Array1::zeros(k + 1);
        for j in 0..k {
            row[j] = -gamma[j];
        }
        row[k] = 1.0;
        lp.ineq.push((row, 0.0));
    }

    let sol = simplex_solve(&lp)?;
    if sol.status != LpStatus::Optimal || -sol.value <= 1e-10 {
        return Ok(None);
    }
    Ok(Some(sol.x.slice(ndarray::s![..k]).to_owned()))
}

/// One adaptive-moment ascent step (coefficients 0.9/0.999, ε = 1e-8, bias
/// correction), learning rates decayed by `decay^iteration`.
fn adam_step(
    group: &mut ParamGroup,
    moments: &mut Moments,
    g: &BoundGradient,
    cfg: &OptimizerConfig,
    iteration: usize,
) {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    moments.step += 1;
    let t = moments.step as i32;
    let decay = cfg.decay.powi(iteration as i32);
    let lr_a = cfg.lr_alpha * decay;
    let lr_b = cfg.lr_beta * decay;
    let corr1 = 1.0 - B1.powi(t);
    let corr2 = 1.0 - B2.powi(t);
    for h in 0..group.alpha.len() {
        for j in 0..group.alpha[h].len() {
            let gr = g.g_alpha[h][j];
            let m = &mut moments.m_alpha[h][j];
            let v = &mut moments.v_alpha[h][j];
            *m = B1 * *m + (1.0 - B1) * gr;
            *v = B2 * *v + (1.0 - B2) * gr * gr;
            group.alpha[h][j] += lr_a * (*m / corr1) / ((*v / corr2).sqrt() + EPS);
        }
        for j in 0..group.beta[h].len() {
            let gr = g.g_beta[h][j];
            let m = &mut moments.m_beta[h][j];
            let v = &mut moments.v_beta[h][j];
            *m = B1 * *m + (1.0 - B1) * gr;
            *v = B2 * *v + (1.0 - B2) * gr * gr;
            group.beta[h][j] += lr_b * (*m / corr1) / ((*v / corr2).sqrt() + EPS);
        }
    }
}

/// Supergradient line search: move along the projection-aware ascent
/// direction, maximizing over the step by bracketing + ternary search (exact
/// up to tolerance when the objective is concave along the segment). When no
/// improving step exists — possible at kinks — fall back to a small
/// diminishing step so the iteration still makes progress toward the optimum.
#[allow(clippy::too_many_arguments)]
fn line_search_step(
    net: &Network,
    region: &InputRegion,
    bounds: &PreActBounds,
    splits: &SplitSet,
    group: &mut ParamGroup,
    g: &BoundGradient,
    ls_step: &mut f64,
    iteration: usize,
) -> Result<Option<(f64, LinearBound)>> {
    // Zero the direction where projection would immediately block it, and
    // find the largest step that keeps the segment inside the feasible box
    // (the objective stays concave along a straight feasible segment).
    let mut dir_a: Vec<Array1<f64>> = Vec::with_capacity(g.g_alpha.len());
    let mut dir_b: Vec<Array1<f64>> = Vec::with_capacity(g.g_beta.len());
    let mut t_box = f64::INFINITY;
    let mut norm2 = 0.0;
    for h in 0..group.alpha.len() {
        let mut da = Array1::zeros(group.alpha[h].len());
        for j in 0..da.len() {
            let gr = g.g_alpha[h][j];
            let a = group.alpha[h][j];
            let blocked = (a <= 0.0 && gr < 0.0) || (a >= 1.0 && gr > 0.0);
            if !blocked && gr != 0.0 {
                da[j] = gr;
                norm2 += gr * gr;
                let room = if gr > 0.0 { 1.0 - a } else { a };
                t_box = t_box.min(room / gr.abs());
            }
        }
        dir_a.push(da);
        let mut db = Array1::zeros(group.beta[h].len());
        for j in 0..db.len() {
            let gr = g.g_beta[h][j];
            let b = group.beta[h][j];
            let blocked = b <= 0.0 && gr < 0.0;
            if !blocked && gr != 0.0 {
                db[j] = gr;
                norm2 += gr * gr;
                if gr < 0.0 {
                    t_box = t_box.min(b / -gr);
                }
            }
        }
        dir_b.push(db);
    }
    if norm2 == 0.0 {
        return Ok(None);
    }

    let at = |t: f64| -> ParamGroup {
        let mut p = group.clone();
        for h in 0..p.alpha.len() {
            p.alpha[h] = &p.alpha[h] + &(&dir_a[h] * t);
            p.beta[h] = &p.beta[h] + &(&dir_b[h] * t);
        }
        p.project();
        p
    };
    let eval = |p: &ParamGroup| -> Result<(f64, LinearBound)> {
        let lb = backward_bound(net, bounds, splits, &p.alpha, &p.beta, BoundObjective::Output)?;
        Ok((concretize(&lb, region), lb))
    };

    // Bracket: grow from the previous accepted step while the value improves.
    let mut t_hi = ls_step.min(t_box);
    let mut f_hi = eval(&at(t_hi))?;
    let mut best_t = t_hi;
    let mut best_f = f_hi.clone();
    for _ in 0..40 {
        if t_hi >= t_box {
            break;
        }
        let t2 = (t_hi * 2.0).min(t_box);
        let f2 = eval(&at(t2))?;
        if f2.0 > f_hi.0 {
            t_hi = t2;
            f_hi = f2;
            if f_hi.0 > best_f.0 {
                best_t = t_hi;
                best_f = f_hi.clone();
            }
        } else {
            t_hi = t2;
            break;
        }
    }
    // Ternary refinement on [0, t_hi].
    let (mut lo, mut hi) = (0.0_f64, t_hi);
    for _ in 0..40 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let f1 = eval(&at(m1))?;
        let f2 = eval(&at(m2))?;
        if f1.0 > best_f.0 {
            best_t = m1;
            best_f = f1.clone();
        }
        if f2.0 > best_f.0 {
            best_t = m2;
            best_f = f2.clone();
        }
        if f1.0 < f2.0 {
            lo = m1;
        } else {
            hi = m2;
        }
    }

    if best_f.0 > g.value {
        *group = at(best_t);
        *ls_step = best_t.max(1e-10);
        Ok(Some(best_f))
    } else {
        // Kink: no improvement along this supergradient. Take a diminishing
        // step anyway (classic subgradient schedule) — best-so-far tracking
        // keeps the reported bound monotone.
        let t = 0.1 / (1.0 + iteration as f64) / norm2.sqrt();
        *group = at(t.min(t_box.max(1e-12)));
        Ok(None)
    }
}

/// Outcome of [`joint_optimize`]: the certified bound, its linear form, the
/// refined intermediate bounds, and whether the subdomain is even feasible
/// (`consistent = false` proves it empty; the bound is then +∞).
#[derive(Debug, Clone)]
pub struct JointOutcome {
    pub bound: f64,
    pub linear: LinearBound,
    pub bounds: PreActBounds,
    pub consistent: bool,
}

/// Alternate between tightening each hidden layer's own bounds (with that
/// layer's shared (α′, β′) ascended) and ascending the final objective on the
/// refreshed bounds. Intermediate bounds tighten monotonically across rounds;
/// the best final bound over all rounds is returned.
pub fn joint_optimize(
    net: &Network,
    region: &InputRegion,
    splits: &SplitSet,
    state: &mut ParamState,
    cfg: &OptimizerConfig,
) -> Result<JointOutcome> {
    let (mut work, consistent) = interval_bounds_with_splits(net, region, splits)?;
    if !consistent {
        return Ok(empty_outcome(net, work));
    }

    let first = ascend(net, region, &work, splits, state, cfg)?;
    let mut best = first.best;
    let mut best_lb = first.linear;
    let mut best_bounds = work.clone();

    for _ in 0..cfg.refine_rounds {
        if !refine_intermediate(net, region, splits, state, cfg, &mut work)? {
            return Ok(empty_outcome(net, work));
        }
        let out = ascend(net, region, &work, splits, state, cfg)?;
        if out.best > best {
            best = out.best;
            best_lb = out.linear;
            best_bounds = work.clone();
        }
    }

    Ok(JointOutcome {
        bound: best,
        linear: best_lb,
        bounds: best_bounds,
        consistent: true,
    })
}

fn empty_outcome(net: &Network, bounds: PreActBounds) -> JointOutcome {
    JointOutcome {
        bound: f64::INFINITY,
        linear: LinearBound {
            a: Array1::zeros(net.input_dim()),
            c: f64::INFINITY,
        },
        bounds,
        consistent: false,
    }
}

/// One sweep of per-layer refinement: ascend layer `h`'s shared parameters on
/// the summed tightness objective, recompute its (l, u) via backward passes,
/// and intersect into `work`. Returns `false` if a crossing proves the
/// subdomain empty.
fn refine_intermediate(
    net: &Network,
    region: &InputRegion,
    splits: &SplitSet,
    state: &mut ParamState,
    cfg: &OptimizerConfig,
    work: &mut PreActBounds,
) -> Result<bool> {
    let hidden = net.hidden_dims();
    for h in 1..net.num_hidden() {
        let width = hidden[h];
        ascend_intermediate_layer(net, region, splits, state, cfg, work, h)?;
        let group = &state.intermediate[h];

        let mut lo = Array1::zeros(width);
        let mut hi = Array1::zeros(width);
        let mut row = Array1::zeros(width);
        for j in 0..width {
            row[j] = 1.0;
            let lb = backward_bound(
                net,
                work,
                splits,
                &group.alpha,
                &group.beta,
                BoundObjective::PreAct {
                    hidden: h,
                    row: row.view(),
                },
            )?;
            lo[j] = concretize(&lb, region);
            row[j] = -1.0;
            let ub = backward_bound(
                net,
                work,
                splits,
                &group.alpha,
                &group.beta,
                BoundObjective::PreAct {
                    hidden: h,
                    row: row.view(),
                },
            )?;
            hi[j] = -concretize(&ub, region);
            row[j] = 0.0;
        }

        // Respect split clamps on the refined values, then tighten w.r.t. the
        // existing bounds; a crossing beyond tolerance proves emptiness.
        let mut fresh = PreActBounds {
            lower: work.lower.clone(),
            upper: work.upper.clone(),
        };
        for j in 0..width {
            let (l, u) = if lo[j] <= hi[j] {
                (lo[j], hi[j])
            } else if lo[j] - hi[j] <= 1e-9 {
                let mid = 0.5 * (lo[j] + hi[j]);
                (mid, mid)
            } else {
                return Ok(false);
            };
            fresh.lower[h][j] = l;
            fresh.upper[h][j] = u;
        }
        if !fresh.clamp_splits(splits) {
            return Ok(false);
        }
        if !work.intersect(&fresh, 1e-9) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Ascend the shared (α′, β′) of layer `h` on the sum of all its neurons'
/// lower and (negated) upper objectives — a proxy whose gradient is the sum
/// of the per-neuron gradients, pushing every bound of the layer tighter at
/// once.
fn ascend_intermediate_layer(
    net: &Network,
    region: &InputRegion,
    splits: &SplitSet,
    state: &mut ParamState,
    cfg: &OptimizerConfig,
    work: &PreActBounds,
    h: usize,
) -> Result<()> {
    let width = net.hidden_dims()[h];
    let mut moments = Moments::zeros_like(&state.intermediate[h]);

    let total_gradient = |group: &ParamGroup| -> Result<(f64, BoundGradient)> {
        let mut acc: Option<BoundGradient> = None;
        let mut total = 0.0;
        let mut row = Array1::zeros(width);
        for j in 0..width {
            for sign in [1.0, -1.0] {
                row[j] = sign;
                let g = gradient_for(
                    net,
                    region,
                    work,
                    splits,
                    group,
                    BoundObjective::PreAct {
                        hidden: h,
                        row: row.view(),
                    },
                )?;
                total += g.value;
                match acc.as_mut() {
                    None => acc = Some(g),
                    Some(acc) => {
                        for l in 0..acc.g_alpha.len() {
                            acc.g_alpha[l] += &g.g_alpha[l];
                            acc.g_beta[l] += &g.g_beta[l];
                        }
                    }
                }
            }
            row[j] = 0.0;
        }
        let mut g = acc.expect("layer has at least one neuron");
        g.value = total;
        Ok((total, g))
    };

    let mut best_total = f64::NEG_INFINITY;
    let mut best_params = state.intermediate[h].clone();
    for it in 0..cfg.iters {
        let (total, g) = total_gradient(&state.intermediate[h])?;
        if total > best_total {
            best_total = total;
            best_params = state.intermediate[h].clone();
        }
        if !all_finite(&g) {
            break;
        }
        adam_step(&mut state.intermediate[h], &mut moments, &g, cfg, it);
        state.intermediate[h].project();
    }
    let (final_total, _) = total_gradient(&state.intermediate[h])?;
    if final_total < best_total {
        state.intermediate[h] = best_params;
    }
    Ok(())
}

/// Feasible upper bound for a domain: evaluate the network at the linear
/// bound's concretization argmin (always a point of the region).
pub fn feasible_upper(net: &Network, region: &InputRegion, linear: &LinearBound) -> Result<(f64, Array1<f64>)> {
    let x = argmin_input(linear, region);
    let v = net.forward_eval(&x)?;
    Ok((v, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{interval_bounds, NeuronStatus};
    use crate::model::Layer;
    use crate::oracle::{exact_min, lp_relaxation_min, LpOutcome, OracleOutcome};
    use ndarray::{arr1, arr2, Array2};

    fn hand_net() -> Network {
        Network::new(vec![
            Layer::new(arr2(&[[1.0, 1.0], [1.0, -1.0]]), arr1(&[0.0, 0.0])).unwrap(),
            Layer::new(arr2(&[[1.0, -1.0]]), arr1(&[0.0])).unwrap(),
        ])
        .unwrap()
    }

    fn xorshift(state: &mut u64) -> f64 {
        *state ^= *state << 13;
        *state ^= *state >> 7;
        *state ^= *state << 17;
        (*state as f64 / u64::MAX as f64) * 2.0 - 1.0
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

    #[test]
    fn zero_iterations_leave_state_and_bound_unchanged() {
        let net = hand_net();
        let region = InputRegion::linf(arr1(&[0.0, 0.0]), 1.0).unwrap();
        let splits = SplitSet::all_free(&net.hidden_dims());
        let bounds = interval_bounds(&net, &region).unwrap();
        let mut state = ParamState::init(&net);
        let before = state.clone();
        let cfg = OptimizerConfig {
            iters: 0,
            ..OptimizerConfig::default()
        };
        let out = ascend(&net, &region, &bounds, &splits, &mut state, &cfg).unwrap();
        assert_eq!(state, before);
        let lb = backward_bound(
            &net,
            &bounds,
            &splits,
            &state.objective.alpha,
            &state.objective.beta,
            BoundObjective::Output,
        )
        .unwrap();
        assert_eq!(out.best, concretize(&lb, &region));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let net = random_net(9001, &[2, 3, 3, 1]);
        let region = InputRegion::linf(arr1(&[0.1, -0.2]), 0.6).unwrap();
        let mut splits = SplitSet::all_free(&net.hidden_dims());
        splits.set(0, 1, NeuronStatus::Pos);
        splits.set(1, 0, NeuronStatus::Neg);
        let mut bounds = interval_bounds(&net, &region).unwrap();
        bounds.clamp_splits(&splits);

        // interior parameter point, away from projection boundaries and kinks
        let mut s = 77_u64;
        let mut group = ParamGroup::init(&net.hidden_dims(), 2);
        for a in &mut group.alpha {
            a.mapv_inplace(|_| 0.5 + 0.25 * xorshift(&mut s));
        }
        group.beta[0][1] = 0.3;
        group.beta[1][0] = 0.2;

        let g = gradient(&net, &region, &bounds, &splits, &group).unwrap();
        let h = 1e-5;
        let eval = |gr: &ParamGroup| {
            let lb = backward_bound(
                &net,
                &bounds,
                &splits,
                &gr.alpha,
                &gr.beta,
                BoundObjective::Output,
            )
            .unwrap();
            concretize(&lb, &region)
        };
        for l in 0..2 {
            for j in 0..3 {
                let mut p = group.clone();
                p.alpha[l][j] += h;
                let mut m = group.clone();
                m.alpha[l][j] -= h;
                let fd = (eval(&p) - eval(&m)) / (2.0 * h);
                let err = (g.g_alpha[l][j] - fd).abs() / fd.abs().max(1.0);
                assert!(err < 1e-4, "alpha[{l}][{j}]: {} vs {fd}", g.g_alpha[l][j]);

                let mut p = group.clone();
                p.beta[l][j] += h;
                let mut m = group.clone();
                m.beta[l][j] -= h;
                let fd = (eval(&p) - eval(&m)) / (2.0 * h);
                let err = (g.g_beta[l][j] - fd).abs() / fd.abs().max(1.0);
                assert!(err < 1e-4, "beta[{l}][{j}]: {} vs {fd}", g.g_beta[l][j]);
            }
        }
    }

    #[test]
    fn beta_gradient_zero_at_free_neurons() {
        let net = hand_net();
        let region = InputRegion::linf(arr1(&[0.0, 0.0]), 1.0).unwrap();
        let splits = SplitSet::all_free(&net.hidden_dims());
        let bounds = interval_bounds(&net, &region).unwrap();
        let group = ParamGroup::init(&net.hidden_dims(), 1);
        let g = gradient(&net, &region, &bounds, &splits, &group).unwrap();
        assert_eq!(g.g_beta[0], arr1(&[0.0, 0.0]));
    }

    #[test]
    fn alpha_gradient_zero_when_coefficient_negative() {
        // single neuron, output row −1: relaxation takes the upper line, α
        // never consulted ⇒ zero gradient and α-independent value
        let net = Network::new(vec![
            Layer::new(arr2(&[[1.0]]), arr1(&[0.0])).unwrap(),
            Layer::new(arr2(&[[-1.0]]), arr1(&[0.0])).unwrap(),
        ])
        .unwrap();
        let region = InputRegion::linf(arr1(&[0.0]), 1.0).unwrap();
        let splits = SplitSet::all_free(&[1]);
        let bounds = interval_bounds(&net, &region).unwrap();
        let mut group = ParamGroup::init(&[1], 1);
        let g = gradient(&net, &region, &bounds, &splits, &group).unwrap();
        assert_eq!(g.g_alpha[0][0], 0.0);
        let v1 = g.value;
        group.alpha[0][0] = 0.25;
        let g2 = gradient(&net, &region, &bounds, &splits, &group).unwrap();
        assert_eq!(v1, g2.value);
    }

    #[test]
    fn best_bound_nondecreasing_in_iterations() {
        let net = random_net(42, &[2, 4, 4, 1]);
        let region = InputRegion::linf(arr1(&[0.0, 0.0]), 0.4).unwrap();
        let splits = SplitSet::all_free(&net.hidden_dims());
        let bounds = interval_bounds(&net, &region).unwrap();
        let mut last = f64::NEG_INFINITY;
        for iters in [0, 1, 5, 20, 60] {
            let mut state = ParamState::init(&net);
            let cfg = OptimizerConfig {
                iters,
                interval_floor: false,
                ..OptimizerConfig::default()
            };
            let out = ascend(&net, &region, &bounds, &splits, &mut state, &cfg).unwrap();
            assert!(
                out.best >= last - 1e-12,
                "iters {iters}: {} < {last}",
                out.best
            );
            last = out.best;
        }
    }

    #[test]
    fn ascended_bound_stays_sound_against_the_oracle() {
        for seed in 1..=20_u64 {
            let net = random_net(seed * 131, &[2, 4, 3, 1]);
            let region = InputRegion::linf(arr1(&[0.1, -0.1]), 0.5).unwrap();
            let splits = SplitSet::all_free(&net.hidden_dims());
            let bounds = interval_bounds(&net, &region).unwrap();
            let mut state = ParamState::init(&net);
            let out = ascend(
                &net,
                &region,
                &bounds,
                &splits,
                &mut state,
                &OptimizerConfig::default(),
            )
            .unwrap();
            let OracleOutcome::Min { value, .. } = exact_min(&net, &region, &splits).unwrap()
            else {
                panic!("nonempty domain")
            };
            assert!(
                out.best <= value + 1e-9,
                "seed {seed}: bound {} exceeds exact {value}",
                out.best
            );
        }
    }

    #[test]
    fn interval_floor_candidate_never_hurts() {
        let net = random_net(7, &[2, 5, 1]);
        let region = InputRegion::linf(arr1(&[0.0, 0.0]), 0.8).unwrap();
        let splits = SplitSet::all_free(&net.hidden_dims());
        let bounds = interval_bounds(&net, &region).unwrap();
        let run = |floor: bool| {
            let mut state = ParamState::init(&net);
            let cfg = OptimizerConfig {
                interval_floor: floor,
                ..OptimizerConfig::default()
            };
            ascend(&net, &region, &bounds, &splits, &mut state, &cfg)
                .unwrap()
                .best
        };
        assert!(run(true) >= run(false) - 1e-12);
    }

    #[test]
    fn projection_is_idempotent() {
        let mut s = 5_u64;
        let mut group = ParamGroup::init(&[4, 4], 2);
        for a in &mut group.alpha {
            a.mapv_inplace(|_| 2.0 * xorshift(&mut s));
        }
        for b in &mut group.beta {
            b.mapv_inplace(|_| 2.0 * xorshift(&mut s));
        }
        group.project();
        let once = group.clone();
        group.project();
        assert_eq!(group, once);
    }

    #[test]
    fn fully_split_objective_is_concave_in_beta() {
        let net = hand_net();
        let region = InputRegion::linf(arr1(&[0.0, 0.0]), 1.0).unwrap();
        let mut splits = SplitSet::all_free(&net.hidden_dims());
        splits.set(0, 0, NeuronStatus::Pos);
        splits.set(0, 1, NeuronStatus::Neg);
        let mut bounds = interval_bounds(&net, &region).unwrap();
        bounds.clamp_splits(&splits);
        assert!(bounds.fully_split(&splits));

        let eval = |b1: f64, b2: f64| {
            let group = ParamGroup {
                alpha: vec![arr1(&[1.0, 1.0])],
                beta: vec![arr1(&[b1, b2])],
            };
            let lb = backward_bound(
                &net,
                &bounds,
                &splits,
                &group.alpha,
                &group.beta,
                BoundObjective::Output,
            )
            .unwrap();
            concretize(&lb, &region)
        };
        let mut s = 11_u64;
        for _ in 0..200 {
            let p = (xorshift(&mut s).abs() * 2.0, xorshift(&mut s).abs() * 2.0);
            let q = (xorshift(&mut s).abs() * 2.0, xorshift(&mut s).abs() * 2.0);
            let t = xorshift(&mut s).abs();
            let mix = eval(
                t * p.0 + (1.0 - t) * q.0,
                t * p.1 + (1.0 - t) * q.1,
            );
            let chord = t * eval(p.0, p.1) + (1.0 - t) * eval(q.0, q.1);
            assert!(mix >= chord - 1e-9, "concavity violated: {mix} < {chord}");
        }
    }

    #[test]
    fn fully_split_ascent_reaches_the_lp_optimum() {
        // all unstable neurons split ⇒ the LP has no triangles and the dual
        // ascent should close the gap completely
        for seed in 1..=8_u64 {
            let net = random_net(seed * 17, &[2, 3, 1]);
            let region = InputRegion::linf(arr1(&[0.0, 0.0]), 0.7).unwrap();
            let ib = interval_bounds(&net, &region).unwrap();
            let mut splits = SplitSet::all_free(&net.hidden_dims());
            for (h, j) in ib.unstable_free(&SplitSet::all_free(&net.hidden_dims())) {
                let status = if seed & (1 << j) != 0 {
                    NeuronStatus::Pos
                } else {
                    NeuronStatus::Neg
                };
                splits.set(h, j, status);
            }
            let mut bounds = ib.clone();
            if !bounds.clamp_splits(&splits) {
                continue; // provably empty split pattern; nothing to compare
            }
            let lp = lp_relaxation_min(&net, &region, &bounds, &splits).unwrap();
            let LpOutcome::Optimal(lp_val) = lp else {
                continue; // LP infeasible: domain empty
            };
            let mut state = ParamState::init(&net);
            let cfg = OptimizerConfig {
                iters: 300,
                line_search: LineSearchMode::Auto,
                ..OptimizerConfig::default()
            };
            let out = ascend(&net, &region, &bounds, &splits, &mut state, &cfg).unwrap();
            assert!(
                out.best <= lp_val + 1e-6,
                "seed {seed}: ascent {} above LP {lp_val}",
                out.best
            );
            assert!(
                (out.best - lp_val).abs() <= 1e-6,
                "seed {seed}: ascent {} vs LP {lp_val}",
                out.best
            );
        }
    }

    #[test]
    fn joint_zero_rounds_equals_plain_ascend() {
        let net = random_net(23, &[2, 3, 3, 1]);
        let region = InputRegion::linf(arr1(&[0.0, 0.0]), 0.5).unwrap();
        let splits = SplitSet::all_free(&net.hidden_dims());
        let cfg = OptimizerConfig {
            refine_rounds: 0,
            ..OptimizerConfig::default()
        };
        let mut state1 = ParamState::init(&net);
        let joint = joint_optimize(&net, &region, &splits, &mut state1, &cfg).unwrap();

        let (bounds, ok) = interval_bounds_with_splits(&net, &region, &splits).unwrap();
        assert!(ok);
        let mut state2 = ParamState::init(&net);
        let plain = ascend(&net, &region, &bounds, &splits, &mut state2, &cfg).unwrap();
        assert_eq!(joint.bound, plain.best);
    }

    #[test]
    fn joint_refinement_never_loosens() {
        for seed in 1..=10_u64 {
            let net = random_net(seed * 71 + 3, &[2, 4, 4, 1]);
            let region = InputRegion::linf(arr1(&[0.0, 0.0]), 0.4).unwrap();
            let splits = SplitSet::all_free(&net.hidden_dims());
            let run = |rounds: usize| {
                let mut state = ParamState::init(&net);
                let cfg = OptimizerConfig {
                    refine_rounds: rounds,
                    ..OptimizerConfig::default()
                };
                joint_optimize(&net, &region, &splits, &mut state, &cfg)
                    .unwrap()
                    .bound
            };
            let plain = run(0);
            let joint = run(1);
            assert!(
                joint >= plain - 1e-9,
                "seed {seed}: joint {joint} < plain {plain}"
            );
        }
    }

    #[test]
    fn empty_subdomain_reports_inconsistent() {
        let net = Network::new(vec![
            Layer::new(arr2(&[[1.0]]), arr1(&[10.0])).unwrap(),
            Layer::new(arr2(&[[1.0]]), arr1(&[0.0])).unwrap(),
        ])
        .unwrap();
        let region = InputRegion::linf(arr1(&[0.0]), 1.0).unwrap();
        let mut splits = SplitSet::all_free(&[1]);
        splits.set(0, 0, NeuronStatus::Neg);
        let mut state = ParamState::init(&net);
        let out = joint_optimize(
            &net,
            &region,
            &splits,
            &mut state,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!(!out.consistent);
        assert_eq!(out.bound, f64::INFINITY);
    }
}
