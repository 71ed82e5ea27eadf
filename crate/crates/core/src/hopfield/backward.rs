//! Analytic gradients of the self-association reconstruction loss.

use alloc::vec::Vec;

use super::{association_logits, dropout_mask, encoder_pass, masked_softmax, HopfieldModel, Params};
use crate::data::Matrix;
use crate::error::{check_len, invalid, Result};

struct Pass {
    loss: f64,
    residual: Vec<f64>,
    pred: Vec<f64>,
    assoc: Matrix,
    q: Matrix,
    k: Matrix,
    enc: super::EncoderPass,
}

fn forward(
    model: &HopfieldModel,
    features: &Matrix,
    timestamps: &[f64],
    total: f64,
    abs_errors: &[f64],
    dropout_seed: Option<u64>,
) -> Result<Pass> {
    let t = features.nrows();
    check_len(model.shape().input, features.ncols())?;
    check_len(t, timestamps.len())?;
    check_len(t, abs_errors.len())?;
    if t < 2 {
        return Err(invalid("self-association needs at least two steps"));
    }
    let time = model.time_channel(timestamps, total);
    let mask = dropout_seed.and_then(|s| dropout_mask(t, model.shape().hidden, model.dropout_rate, s));
    let enc = encoder_pass(model, features, &time, mask);
    let (q, k, s) = association_logits(model, &enc.encoded, &enc.encoded);
    let assoc = masked_softmax(&s, true);
    let mut pred = Vec::with_capacity(t);
    let mut residual = Vec::with_capacity(t);
    let mut loss = 0.0;
    for i in 0..t {
        let p: f64 = (0..t).map(|j| assoc[(i, j)] * abs_errors[j]).sum();
        let r = p - abs_errors[i];
        loss += r * r;
        pred.push(p);
        residual.push(r);
    }
    Ok(Pass { loss: loss / t as f64, residual, pred, assoc, q, k, enc })
}

/// Loss only; `dropout_seed = None` disables dropout.
pub fn forward_loss(
    model: &HopfieldModel,
    features: &Matrix,
    timestamps: &[f64],
    total: f64,
    abs_errors: &[f64],
    dropout_seed: Option<u64>,
) -> Result<f64> {
    Ok(forward(model, features, timestamps, total, abs_errors, dropout_seed)?.loss)
}

/// Loss and its exact gradient with respect to every parameter.
pub fn loss_and_gradient(
    model: &HopfieldModel,
    features: &Matrix,
    timestamps: &[f64],
    total: f64,
    abs_errors: &[f64],
    dropout_seed: Option<u64>,
) -> Result<(f64, Params)> {
    let pass = forward(model, features, timestamps, total, abs_errors, dropout_seed)?;
    let p = &model.params;
    let t = features.nrows();
    let enc_width = p.w2.nrows();

    // dL/dlogit_ij = A_ij * g_i * (v_j - pred_i), g_i = 2 r_i / T.
    let mut d_logits = Matrix::zeros(t, t);
    for i in 0..t {
        let g = 2.0 * pass.residual[i] / t as f64;
        for j in 0..t {
            let a = pass.assoc[(i, j)];
            if a != 0.0 {
                d_logits[(i, j)] = a * g * (abs_errors[j] - pass.pred[i]);
            }
        }
    }
    let d_logits = d_logits * model.beta;
    let d_q = &d_logits * &pass.k;
    let d_k = d_logits.transpose() * &pass.q;

    let encoded = &pass.enc.encoded;
    let wq = d_q.transpose() * encoded;
    let wk = d_k.transpose() * encoded;
    let d_enc = &d_q * &p.wq + &d_k * &p.wk;
    let d_body = d_enc.columns(0, enc_width).into_owned();

    let w2 = d_body.transpose() * &pass.enc.hidden;
    let b2 = d_body.row_sum().transpose();
    let mut d_pre = &d_body * &p.w2;
    if let Some(m) = &pass.enc.mask {
        d_pre.component_mul_assign(m);
    }
    d_pre.zip_apply(&pass.enc.pre, |d, z| {
        if z <= 0.0 {
            *d = 0.0;
        }
    });
    let w1 = d_pre.transpose() * features;
    let b1 = d_pre.row_sum().transpose();

    Ok((pass.loss, Params { w1, b1, w2, b2, wq, wk }))
}

/// Gradient of the training loss (see [`loss_and_gradient`]).
pub fn backward(
    model: &HopfieldModel,
    features: &Matrix,
    timestamps: &[f64],
    total: f64,
    abs_errors: &[f64],
    dropout_seed: Option<u64>,
) -> Result<Params> {
    loss_and_gradient(model, features, timestamps, total, abs_errors, dropout_seed).map(|(_, g)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hopfield::{associate, encode, training_loss, ModelShape};

    #[test]
    fn forward_agrees_with_public_pieces() {
        let m = HopfieldModel::initialize(ModelShape::new(2, 5, 3, 4), 0.0, true, 3).unwrap();
        let x = Matrix::from_fn(7, 2, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let ts: Vec<f64> = (1..=7).map(f64::from).collect();
        let v = [0.5, 1.0, 2.0, 0.1, 3.0, 1.2, 0.7];
        let e = encode(&m, &x, &ts, 7.0, false, 0).unwrap();
        let a = associate(&m, &e, &e, true).unwrap();
        let expected = training_loss(&a, &v).unwrap();
        let got = forward_loss(&m, &x, &ts, 7.0, &v, None).unwrap();
        assert!((expected - got).abs() < 1e-12);
    }

    #[test]
    fn constant_errors_have_zero_gradient() {
        let m = HopfieldModel::initialize(ModelShape::new(2, 4, 3, 3), 0.0, true, 1).unwrap();
        let x = Matrix::from_fn(6, 2, |i, j| (i as f64) * 0.4 - j as f64);
        let ts: Vec<f64> = (1..=6).map(f64::from).collect();
        let (loss, g) = loss_and_gradient(&m, &x, &ts, 6.0, &[1.7; 6], None).unwrap();
        assert!(loss < 1e-20);
        assert!(g.norm_sq().sqrt() <= 1e-8);
    }

    #[test]
    fn zero_rate_dropout_matches_disabled() {
        let m = HopfieldModel::initialize(ModelShape::new(2, 4, 3, 3), 0.0, true, 2).unwrap();
        let x = Matrix::from_fn(6, 2, |i, j| (i * j) as f64 * 0.3 - 0.5);
        let ts: Vec<f64> = (1..=6).map(f64::from).collect();
        let v = [0.1, 2.0, 0.3, 1.5, 0.2, 2.2];
        let a = backward(&m, &x, &ts, 6.0, &v, None).unwrap();
        let b = backward(&m, &x, &ts, 6.0, &v, Some(77)).unwrap();
        assert_eq!(a, b);
    }
}
