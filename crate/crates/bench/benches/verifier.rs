//! Microbenchmarks along the verifier's hot path: one backward fold, one
//! adjoint gradient, a full per-domain ascent, the triangle-relaxation LP,
//! the enumeration oracle, a projected-gradient attack, and an end-to-end
//! branch-and-bound run on an instance that actually needs splitting.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use relucert::bab::{run_bab, BabConfig};
use relucert::bounds::{backward_bound, interval_bounds, BoundObjective, SplitSet};
use relucert::model::{InputRegion, Layer, Network, Norm};
use relucert::optimizer::{ascend, gradient, OptimizerConfig, ParamState};
use relucert::oracle::{exact_min, lp_relaxation_min, pgd_attack};

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

fn region(seed: u64, dim: usize, eps: f64) -> InputRegion {
    let mut s = seed.max(1);
    let center = Array1::from_shape_fn(dim, |_| 0.5 * xorshift(&mut s));
    InputRegion::new(center, eps, Norm::Inf).unwrap()
}

fn bench_backward_fold(c: &mut Criterion) {
    let net = random_net(11, &[4, 16, 16, 1]);
    let reg = region(3, 4, 0.1);
    let splits = SplitSet::all_free(&net.hidden_dims());
    let bounds = interval_bounds(&net, &reg).unwrap();
    let params = ParamState::init(&net);
    c.bench_function("backward_fold/4x16x16", |b| {
        b.iter(|| {
            backward_bound(
                black_box(&net),
                &bounds,
                &splits,
                &params.objective.alpha,
                &params.objective.beta,
                BoundObjective::Output,
            )
            .unwrap()
        })
    });
}

fn bench_gradient(c: &mut Criterion) {
    let net = random_net(11, &[4, 16, 16, 1]);
    let reg = region(3, 4, 0.1);
    let splits = SplitSet::all_free(&net.hidden_dims());
    let bounds = interval_bounds(&net, &reg).unwrap();
    let params = ParamState::init(&net);
    c.bench_function("gradient/4x16x16", |b| {
        b.iter(|| gradient(black_box(&net), &reg, &bounds, &splits, &params.objective).unwrap())
    });
}

fn bench_ascend(c: &mut Criterion) {
    let net = random_net(11, &[4, 16, 16, 1]);
    let reg = region(3, 4, 0.1);
    let splits = SplitSet::all_free(&net.hidden_dims());
    let bounds = interval_bounds(&net, &reg).unwrap();
    let cfg = OptimizerConfig::default();
    c.bench_function("ascend_20_iters/4x16x16", |b| {
        b.iter(|| {
            let mut state = ParamState::init(&net);
            ascend(black_box(&net), &reg, &bounds, &splits, &mut state, &cfg).unwrap()
        })
    });
}

fn bench_lp_relaxation(c: &mut Criterion) {
    let net = random_net(7, &[2, 8, 8, 1]);
    let reg = region(5, 2, 0.3);
    let splits = SplitSet::all_free(&net.hidden_dims());
    let bounds = interval_bounds(&net, &reg).unwrap();
    c.bench_function("lp_relaxation/2x8x8", |b| {
        b.iter(|| lp_relaxation_min(black_box(&net), &reg, &bounds, &splits).unwrap())
    });
}

fn bench_enumeration_oracle(c: &mut Criterion) {
    let net = random_net(19, &[2, 6, 1]);
    let reg = region(9, 2, 0.5);
    let splits = SplitSet::all_free(&net.hidden_dims());
    c.bench_function("enumeration_oracle/2x6", |b| {
        b.iter(|| exact_min(black_box(&net), &reg, &splits).unwrap())
    });
}

fn bench_pgd_attack(c: &mut Criterion) {
    let net = random_net(11, &[4, 16, 16, 1]);
    let reg = region(3, 4, 0.1);
    c.bench_function("pgd_attack_50x5/4x16x16", |b| {
        b.iter(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            pgd_attack(black_box(&net), &reg, 50, 5, &mut rng).unwrap()
        })
    });
}

fn bench_bab_complete(c: &mut Criterion) {
    // Chosen so the root bound is inconclusive: the run exercises scoring,
    // splitting, bounding, and leaf resolution, not just one backward pass.
    let net = random_net(70 * 53 + 17, &[2, 4, 4, 1]);
    let reg = region(70 * 29 + 5, 2, 0.55);
    let cfg = BabConfig::default();
    c.bench_function("bab_complete/2x4x4", |b| {
        b.iter(|| run_bab(black_box(&net), &reg, &cfg, None).unwrap())
    });
}

criterion_group!(
    benches,
    bench_backward_fold,
    bench_gradient,
    bench_ascend,
    bench_lp_relaxation,
    bench_enumeration_oracle,
    bench_pgd_attack,
    bench_bab_complete
);
criterion_main!(benches);
