//! From-scratch CNN: the VGG-MI stack (six 3×3 convolutions, three 2×2
//! max-pools, three fully-connected layers with dropout) with forward and
//! backward passes in f64, plus a width-scaled "desk profile" of the same
//! architecture for CPU-feasible training.

mod checkpoint;
mod train;

pub use checkpoint::{load_params, save_params, CheckpointError};
pub use train::{
    extract_features, image_to_tensor, init_params, predict_mi1, sample_loss_and_gradients,
    train_mi1, EpochStats,
    TrainConfig, TrainError,
};

use thiserror::Error;

use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("odd spatial dimensions {h}x{w} for 2x2 pooling")]
    OddDimensions { h: usize, w: usize },
}

/// One architecture row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    /// 3×3 convolution, stride 1, zero padding 1, followed by ReLU.
    Conv3x3 { in_channels: usize, out_channels: usize },
    /// 2×2 max-pool, stride 2.
    MaxPool2x2,
    /// Dense layer; `relu` is false only on the final softmax head.
    FullyConnected { in_units: usize, out_units: usize, relu: bool },
    /// Inverted dropout; identity at inference.
    Dropout { rate: f64 },
}

/// Exact multiplication of a reference channel count by the width scale.
fn scaled(base: usize, num: u32, den: u32) -> usize {
    let v = base * num as usize;
    assert!(v % den as usize == 0, "width scale {num}/{den} does not divide {base}");
    (v / den as usize).max(1)
}

/// The VGG-MI layer stack at a given width scale and input resolution.
/// At scale 1 and input 128 this is exactly: Conv(1→64), Conv(64→64), Pool,
/// Conv(64→128), Conv(128→128), Pool, Conv(128→256), Conv(256→256), Pool,
/// FC(16·16·256→2048), FC(2048→2048)+Dropout(0.5), FC(2048→2).
pub fn vgg_mi_architecture(num: u32, den: u32, input_size: usize) -> Vec<LayerSpec> {
    assert!(num >= 1 && den >= 1 && num <= den, "width scale must be in (0, 1]");
    assert!(input_size % 8 == 0, "input size must be divisible by 8 (three pools)");
    let c1 = scaled(64, num, den);
    let c2 = scaled(128, num, den);
    let c3 = scaled(256, num, den);
    let fc = scaled(2048, num, den);
    let spatial = input_size / 8;
    vec![
        LayerSpec::Conv3x3 { in_channels: 1, out_channels: c1 },
        LayerSpec::Conv3x3 { in_channels: c1, out_channels: c1 },
        LayerSpec::MaxPool2x2,
        LayerSpec::Conv3x3 { in_channels: c1, out_channels: c2 },
        LayerSpec::Conv3x3 { in_channels: c2, out_channels: c2 },
        LayerSpec::MaxPool2x2,
        LayerSpec::Conv3x3 { in_channels: c2, out_channels: c3 },
        LayerSpec::Conv3x3 { in_channels: c3, out_channels: c3 },
        LayerSpec::MaxPool2x2,
        LayerSpec::FullyConnected { in_units: spatial * spatial * c3, out_units: fc, relu: true },
        LayerSpec::FullyConnected { in_units: fc, out_units: fc, relu: true },
        LayerSpec::Dropout { rate: 0.5 },
        LayerSpec::FullyConnected { in_units: fc, out_units: 2, relu: false },
    ]
}

/// Input shapes of every layer (plus the final output shape), computed from
/// metadata only — no tensor allocation.
pub fn shape_trace(arch: &[LayerSpec], input_size: usize) -> Vec<Vec<usize>> {
    let mut shapes = Vec::with_capacity(arch.len() + 1);
    let mut cur = vec![1usize, input_size, input_size];
    for spec in arch {
        shapes.push(cur.clone());
        cur = match *spec {
            LayerSpec::Conv3x3 { out_channels, .. } => vec![out_channels, cur[1], cur[2]],
            LayerSpec::MaxPool2x2 => vec![cur[0], cur[1] / 2, cur[2] / 2],
            LayerSpec::FullyConnected { out_units, .. } => vec![out_units],
            LayerSpec::Dropout { .. } => cur,
        };
    }
    shapes.push(cur);
    shapes
}

/// Total weight and bias element count, from metadata only.
pub fn parameter_count(arch: &[LayerSpec]) -> usize {
    arch.iter()
        .map(|spec| match *spec {
            LayerSpec::Conv3x3 { in_channels, out_channels } => {
                out_channels * in_channels * 9 + out_channels
            }
            LayerSpec::FullyConnected { in_units, out_units, .. } => {
                out_units * in_units + out_units
            }
            _ => 0,
        })
        .sum()
}

/// Trainable parameters plus the architecture they instantiate.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub architecture: Vec<LayerSpec>,
    /// Width scale as (numerator, denominator).
    pub width_scale: (u32, u32),
    pub input_size: usize,
    /// One (weight, bias) pair per Conv3x3/FullyConnected layer, in order.
    pub weights: Vec<(Tensor, Tensor)>,
}

impl NetworkParams {
    pub fn n_parameters(&self) -> usize {
        self.weights.iter().map(|(w, b)| w.len() + b.len()).sum()
    }
}

/// Elementwise max(0, x).
pub fn relu(x: &Tensor) -> Tensor {
    Tensor::from_vec(x.shape(), x.data().iter().map(|&v| v.max(0.0)).collect())
}

/// ReLU backward; the derivative at exactly 0 is defined as 0.
pub fn relu_backward(x: &Tensor, grad: &Tensor) -> Tensor {
    let data = x
        .data()
        .iter()
        .zip(grad.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(x.shape(), data)
}

/// 3×3 cross-correlation, stride 1, zero padding 1; bias per out channel.
/// Input `[C_in, H, W]`, weights `[C_out, C_in, 3, 3]`, output `[C_out, H, W]`.
pub fn conv3x3_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
    let (c_in, h, wd) = expect_3d(x)?;
    let ws = w.shape();
    if ws.len() != 4 || ws[1] != c_in || ws[2] != 3 || ws[3] != 3 || b.shape() != [ws[0]] {
        return Err(NnError::ShapeMismatch(format!(
            "conv weights {ws:?} / bias {:?} vs input {:?}",
            b.shape(),
            x.shape()
        )));
    }
    let c_out = ws[0];
    let mut out = Tensor::zeros(&[c_out, h, wd]);
    let xd = x.data();
    let wv = w.data();
    let od = out.data_mut();
    for co in 0..c_out {
        let plane = &mut od[co * h * wd..(co + 1) * h * wd];
        plane.fill(b.data()[co]);
        for ci in 0..c_in {
            let xin = &xd[ci * h * wd..(ci + 1) * h * wd];
            let wbase = (co * c_in + ci) * 9;
            for dy in 0..3usize {
                for dx in 0..3usize {
                    let wk = wv[wbase + dy * 3 + dx];
                    if wk == 0.0 {
                        continue;
                    }
                    // out[y][x] += wk * in[y+dy-1][x+dx-1], clipped to bounds.
                    let y_lo = 1usize.saturating_sub(dy);
                    let y_hi = h.min(h + 1 - dy);
                    let x_lo = 1usize.saturating_sub(dx);
                    let x_hi = wd.min(wd + 1 - dx);
                    for y in y_lo..y_hi {
                        let src = (y + dy - 1) * wd;
                        let dst = y * wd;
                        let in_row = &xin[src + x_lo + dx - 1..src + x_hi + dx - 1];
                        let out_row = &mut plane[dst + x_lo..dst + x_hi];
                        for (o, i) in out_row.iter_mut().zip(in_row) {
                            *o += wk * i;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of the 3×3 convolution: (d_input, d_weights, d_bias).
pub fn conv3x3_backward(
    x: &Tensor,
    w: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor), NnError> {
    let (c_in, h, wd) = expect_3d(x)?;
    let c_out = w.shape()[0];
    if grad_out.shape() != [c_out, h, wd] {
        return Err(NnError::ShapeMismatch(format!(
            "conv grad {:?} vs expected [{c_out}, {h}, {wd}]",
            grad_out.shape()
        )));
    }
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[c_out]);
    let xd = x.data();
    let wv = w.data();
    let gd = grad_out.data();

    for co in 0..c_out {
        let g = &gd[co * h * wd..(co + 1) * h * wd];
        db.data_mut()[co] = g.iter().sum();
        for ci in 0..c_in {
            let xin = &xd[ci * h * wd..(ci + 1) * h * wd];
            let dxin = &mut dx.data_mut()[ci * h * wd..(ci + 1) * h * wd];
            let wbase = (co * c_in + ci) * 9;
            for dy in 0..3usize {
                for dxk in 0..3usize {
                    let y_lo = 1usize.saturating_sub(dy);
                    let y_hi = h.min(h + 1 - dy);
                    let x_lo = 1usize.saturating_sub(dxk);
                    let x_hi = wd.min(wd + 1 - dxk);
                    let wk = wv[wbase + dy * 3 + dxk];
                    let mut acc = 0.0;
                    for y in y_lo..y_hi {
                        let src = (y + dy - 1) * wd;
                        let dst = y * wd;
                        let g_row = &g[dst + x_lo..dst + x_hi];
                        let in_row = &xin[src + x_lo + dxk - 1..src + x_hi + dxk - 1];
                        let dx_row = &mut dxin[src + x_lo + dxk - 1..src + x_hi + dxk - 1];
                        for ((gv, iv), dv) in g_row.iter().zip(in_row).zip(dx_row) {
                            acc += gv * iv;
                            *dv += wk * gv;
                        }
                    }
                    dw.data_mut()[wbase + dy * 3 + dxk] = acc;
                }
            }
        }
    }
    Ok((dx, dw, db))
}

/// 2×2 max-pool, stride 2. Returns the pooled tensor and the argmax index
/// (into the input's flat data) per output element, for gradient routing.
/// Ties go to the first position in row-major order.
pub fn maxpool2x2(x: &Tensor) -> Result<(Tensor, Vec<usize>), NnError> {
    let (c, h, w) = expect_3d(x)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(NnError::OddDimensions { h, w });
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut argmax = vec![0usize; c * oh * ow];
    let xd = x.data();
    let od = out.data_mut();
    for ci in 0..c {
        for y in 0..oh {
            for xx in 0..ow {
                let base = ci * h * w + 2 * y * w + 2 * xx;
                let candidates = [base, base + 1, base + w, base + w + 1];
                let mut best = candidates[0];
                for &cand in &candidates[1..] {
                    if xd[cand] > xd[best] {
                        best = cand;
                    }
                }
                let oi = ci * oh * ow + y * ow + xx;
                od[oi] = xd[best];
                argmax[oi] = best;
            }
        }
    }
    Ok((out, argmax))
}

/// Max-pool backward: routes each output gradient to its argmax position.
pub fn maxpool2x2_backward(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(input_shape);
    let dxd = dx.data_mut();
    for (g, &idx) in grad_out.data().iter().zip(argmax) {
        dxd[idx] += g;
    }
    dx
}

/// Dense forward: w·x + b with `w: [m, n]`, `x: [n]`.
pub fn fc_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
    let n = x.len();
    let ws = w.shape();
    if ws.len() != 2 || ws[1] != n || b.len() != ws[0] {
        return Err(NnError::ShapeMismatch(format!(
            "fc weights {ws:?} / bias {:?} vs input length {n}",
            b.shape()
        )));
    }
    let m = ws[0];
    let xd = x.data();
    let wv = w.data();
    let mut out = Vec::with_capacity(m);
    for row in 0..m {
        let wr = &wv[row * n..(row + 1) * n];
        let mut acc = b.data()[row];
        for (a, c) in wr.iter().zip(xd) {
            acc += a * c;
        }
        out.push(acc);
    }
    Ok(Tensor::from_vec(&[m], out))
}

/// Dense backward: (d_input = wᵀ·g, d_weights = g⊗x, d_bias = g).
pub fn fc_backward(
    x: &Tensor,
    w: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor), NnError> {
    let n = x.len();
    let m = w.shape()[0];
    if grad_out.len() != m {
        return Err(NnError::ShapeMismatch(format!(
            "fc grad length {} vs {m}",
            grad_out.len()
        )));
    }
    let mut dx = Tensor::zeros(&[n]);
    let mut dw = Tensor::zeros(w.shape());
    let xd = x.data();
    let wv = w.data();
    let gd = grad_out.data();
    for row in 0..m {
        let g = gd[row];
        let wr = &wv[row * n..(row + 1) * n];
        let dwr = &mut dw.data_mut()[row * n..(row + 1) * n];
        let dxd = dx.data_mut();
        for j in 0..n {
            dwr[j] = g * xd[j];
            dxd[j] += g * wr[j];
        }
    }
    let db = Tensor::from_vec(&[m], gd.to_vec());
    Ok((dx, dw, db))
}

/// Dropout execution mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Infer,
}

/// Inverted dropout: in Train mode each unit is zeroed with probability
/// `rate` and survivors are scaled by 1/(1−rate); Infer is the identity.
/// Returns the output and the keep mask (empty in Infer mode).
pub fn dropout(
    x: &Tensor,
    rate: f64,
    mode: DropoutMode,
    rng: &mut impl rand::Rng,
) -> (Tensor, Vec<bool>) {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if mode == DropoutMode::Infer || rate == 0.0 {
        return (x.clone(), Vec::new());
    }
    let scale = 1.0 / (1.0 - rate);
    let mut mask = Vec::with_capacity(x.len());
    let data = x
        .data()
        .iter()
        .map(|&v| {
            let keep = rng.gen::<f64>() >= rate;
            mask.push(keep);
            if keep {
                v * scale
            } else {
                0.0
            }
        })
        .collect();
    (Tensor::from_vec(x.shape(), data), mask)
}

/// Dropout backward under a recorded keep mask.
pub fn dropout_backward(grad: &Tensor, rate: f64, mask: &[bool]) -> Tensor {
    if mask.is_empty() {
        return grad.clone();
    }
    let scale = 1.0 / (1.0 - rate);
    let data = grad
        .data()
        .iter()
        .zip(mask)
        .map(|(&g, &keep)| if keep { g * scale } else { 0.0 })
        .collect();
    Tensor::from_vec(grad.shape(), data)
}

/// Numerically stable softmax + cross-entropy for the two-class head.
/// Returns (loss, probabilities, gradient w.r.t. logits).
pub fn softmax_xent(logits: &Tensor, target: usize) -> (f64, Tensor, Tensor) {
    assert!(target < logits.len(), "target out of range");
    let max = logits.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.data().iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
    let loss = -probs[target].max(f64::MIN_POSITIVE).ln();
    let mut grad = probs.clone();
    grad[target] -= 1.0;
    (
        loss,
        Tensor::from_vec(logits.shape(), probs),
        Tensor::from_vec(logits.shape(), grad),
    )
}

fn expect_3d(x: &Tensor) -> Result<(usize, usize, usize), NnError> {
    match x.shape() {
        [c, h, w] => Ok((*c, *h, *w)),
        other => Err(NnError::ShapeMismatch(format!(
            "expected 3-d tensor, got {other:?}"
        ))),
    }
}
