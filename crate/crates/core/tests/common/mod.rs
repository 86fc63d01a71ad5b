#![allow(dead_code)]

use gap_gauge_core::model::{ReducedModel, SliceMarginals, SliceParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_slice<R: Rng>(rng: &mut R) -> SliceParams {
    SliceParams {
        p: rng.random(),
        r: rng.random(),
        a: rng.random(),
        b: rng.random(),
        c: rng.random(),
        d: Some(rng.random()),
    }
}

pub fn random_model<R: Rng>(rng: &mut R) -> ReducedModel {
    ReducedModel {
        slice0: random_slice(rng),
        slice1: random_slice(rng),
    }
}

/// Marginals consistent with `model`, with a random true-positive mass
/// small enough that every `(v, vhat)` cell stays positive.
pub fn random_marginals<R: Rng>(rng: &mut R, model: &ReducedModel) -> SliceMarginals {
    let mut tp = [0.0; 2];
    for (l, slot) in tp.iter_mut().enumerate() {
        let s = model.slice(l == 1);
        let max_tp = 1.0 / (1.0 + s.p / (1.0 - s.p) + s.r / (1.0 - s.r));
        *slot = max_tp * rng.random_range(0.05..0.95);
    }
    SliceMarginals::consistent_with(model, rng.random_range(0.05..0.95), tp).unwrap()
}

pub fn m1() -> ReducedModel {
    ReducedModel::new(
        SliceParams::new(0.05, 0.1, 0.5, 0.4, 0.6)
            .unwrap()
            .with_d(0.5)
            .unwrap(),
        SliceParams::new(0.07, 0.09, 0.7, 0.6, 0.8)
            .unwrap()
            .with_d(0.5)
            .unwrap(),
    )
    .unwrap()
}

/// Independent grid search for the best uniform translation.
pub fn grid_minimax(deltas: [f64; 3]) -> (f64, f64) {
    let mut best = (0.0, f64::INFINITY);
    for k in 0..=20_000 {
        let g = -1.0 + k as f64 * 1e-4;
        let worst = deltas.iter().map(|d| (d - g).abs()).fold(0.0, f64::max);
        if worst < best.1 {
            best = (g, worst);
        }
    }
    best
}
