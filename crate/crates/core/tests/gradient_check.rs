//! Central finite differences against the analytic backward pass.

use hopcpt_core::data::Matrix;
use hopcpt_core::hopfield::{backward, forward_loss, HopfieldModel, ModelShape, Params};
use hopcpt_core::rng::rng_from_seed;
use rand::Rng;

const STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;
/// Gradients smaller than this are compared in absolute terms.
const FLOOR: f64 = 1e-6;

struct Instance {
    model: HopfieldModel,
    x: Matrix,
    ts: Vec<f64>,
    abs: Vec<f64>,
}

fn instance(seed: u64, dropout: f64, use_time: bool) -> Instance {
    let shape = ModelShape::new(2, 4, 3, 3);
    let mut model = HopfieldModel::initialize(shape, dropout, use_time, seed).unwrap();
    model.beta = 1.0;
    let mut rng = rng_from_seed(seed ^ 0xABCD);
    let t = 12;
    let x = Matrix::from_fn(t, 2, |_, _| rng.random_range(-2.0..2.0));
    let abs = (0..t).map(|_| rng.random_range(0.0..3.0)).collect();
    let ts = (1..=t).map(|v| v as f64).collect();
    Instance { model, x, ts, abs }
}

fn numeric_gradient(inst: &Instance, dropout_seed: Option<u64>) -> Vec<f64> {
    let base = inst.model.params.flatten();
    let total = inst.ts.len() as f64;
    (0..base.len())
        .map(|i| {
            let mut plus = inst.model.clone();
            plus.params.set_flat(i, base[i] + STEP);
            let mut minus = inst.model.clone();
            minus.params.set_flat(i, base[i] - STEP);
            let lp = forward_loss(&plus, &inst.x, &inst.ts, total, &inst.abs, dropout_seed).unwrap();
            let lm = forward_loss(&minus, &inst.x, &inst.ts, total, &inst.abs, dropout_seed).unwrap();
            (lp - lm) / (2.0 * STEP)
        })
        .collect()
}

fn max_relative_error(analytic: &Params, numeric: &[f64]) -> f64 {
    analytic
        .flatten()
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(FLOOR))
        .fold(0.0, f64::max)
}

fn check(seed: u64, dropout: f64, use_time: bool) -> f64 {
    let inst = instance(seed, dropout, use_time);
    let dropout_seed = Some(seed + 1000);
    let total = inst.ts.len() as f64;
    let g = backward(&inst.model, &inst.x, &inst.ts, total, &inst.abs, dropout_seed).unwrap();
    max_relative_error(&g, &numeric_gradient(&inst, dropout_seed))
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let err = check(seed, 0.0, true);
        assert!(err <= TOLERANCE, "seed {seed}: max relative error {err:e}");
    }
}

#[test]
fn gradient_check_without_time_channel() {
    for seed in 100..110 {
        let err = check(seed, 0.0, false);
        assert!(err <= TOLERANCE, "seed {seed}: max relative error {err:e}");
    }
}

#[test]
fn gradient_check_with_fixed_dropout_mask() {
    for seed in 200..210 {
        let err = check(seed, 0.25, true);
        assert!(err <= TOLERANCE, "seed {seed}: max relative error {err:e}");
    }
}
