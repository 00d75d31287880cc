//! SGD-with-momentum training of the VGG-MI network, inference, and
//! second-FC feature extraction.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use super::{
    conv3x3_backward, conv3x3_forward, dropout, dropout_backward, fc_backward, fc_forward,
    maxpool2x2, maxpool2x2_backward, relu, relu_backward, softmax_xent, DropoutMode, LayerSpec,
    NetworkParams, NnError,
};
use crate::raster::EcgImage;
use crate::tensor::Tensor;
use crate::Label;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set must contain both classes")]
    SingleClassTraining,
    #[error("non-finite loss at epoch {epoch}, batch {batch} (diverged)")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("network error: {0}")]
    Nn(#[from] NnError),
    #[error("empty training set")]
    EmptyTrainingSet,
}

/// Training hyper-parameters. The defaults are the published values:
/// learning rate 0.001, weight decay 0.0005, momentum 0.9, 50 epochs,
/// minibatch 5, Gaussian(0, 0.01) weight initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub init_std: f64,
    pub init_mean: f64,
    /// Apply weight decay to biases too (simplest reading; configurable off).
    pub decay_biases: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            weight_decay: 0.0005,
            momentum: 0.9,
            epochs: 50,
            minibatch: 5,
            init_std: 0.01,
            init_mean: 0.0,
            decay_biases: true,
            seed: 0,
        }
    }
}

/// Per-epoch training log entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_accuracy: f64,
}

/// Initialize parameters for an architecture: weights i.i.d. Gaussian
/// (`init_mean`, `init_std`), biases zero, in layer order from the seed.
pub fn init_params(
    architecture: Vec<LayerSpec>,
    width_scale: (u32, u32),
    input_size: usize,
    cfg: &TrainConfig,
) -> NetworkParams {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(cfg.init_mean, cfg.init_std).expect("valid init distribution");
    let mut weights = Vec::new();
    for spec in &architecture {
        match *spec {
            LayerSpec::Conv3x3 { in_channels, out_channels } => {
                let n = out_channels * in_channels * 9;
                let w = Tensor::from_vec(
                    &[out_channels, in_channels, 3, 3],
                    (0..n).map(|_| normal.sample(&mut rng)).collect(),
                );
                weights.push((w, Tensor::zeros(&[out_channels])));
            }
            LayerSpec::FullyConnected { in_units, out_units, .. } => {
                let n = out_units * in_units;
                let w = Tensor::from_vec(
                    &[out_units, in_units],
                    (0..n).map(|_| normal.sample(&mut rng)).collect(),
                );
                weights.push((w, Tensor::zeros(&[out_units])));
            }
            _ => {}
        }
    }
    NetworkParams {
        architecture,
        width_scale,
        input_size,
        weights,
    }
}

/// Convert an 8-bit image to a `[1, h, w]` tensor scaled to `[0, 1]`.
pub fn image_to_tensor(image: &EcgImage) -> Tensor {
    let data = image.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    Tensor::from_vec(&[1, image.height, image.width], data)
}

enum LayerCache {
    Conv { input: Tensor, pre_relu: Tensor },
    Pool { input_shape: Vec<usize>, argmax: Vec<usize> },
    Fc { input: Tensor, pre_relu: Option<Tensor> },
    Dropout { mask: Vec<bool> },
}

struct ForwardResult {
    logits: Tensor,
    caches: Vec<LayerCache>,
    /// Post-ReLU activation of the last hidden (ReLU) fully-connected layer.
    features: Tensor,
}

fn forward(
    params: &NetworkParams,
    input: &Tensor,
    mode: DropoutMode,
    rng: &mut ChaCha8Rng,
) -> Result<ForwardResult, NnError> {
    let mut cur = input.clone();
    let mut caches = Vec::with_capacity(params.architecture.len());
    let mut param_idx = 0;
    let mut features = None;
    for spec in &params.architecture {
        match *spec {
            LayerSpec::Conv3x3 { .. } => {
                let (w, b) = &params.weights[param_idx];
                param_idx += 1;
                let pre = conv3x3_forward(&cur, w, b)?;
                let post = relu(&pre);
                caches.push(LayerCache::Conv { input: cur, pre_relu: pre });
                cur = post;
            }
            LayerSpec::MaxPool2x2 => {
                let (out, argmax) = maxpool2x2(&cur)?;
                caches.push(LayerCache::Pool {
                    input_shape: cur.shape().to_vec(),
                    argmax,
                });
                cur = out;
            }
            LayerSpec::FullyConnected { relu: with_relu, .. } => {
                let flat_len = cur.len();
                let flat = cur.reshape(&[flat_len]);
                let (w, b) = &params.weights[param_idx];
                param_idx += 1;
                let pre = fc_forward(&flat, w, b)?;
                if with_relu {
                    let post = relu(&pre);
                    features = Some(post.clone());
                    caches.push(LayerCache::Fc { input: flat, pre_relu: Some(pre) });
                    cur = post;
                } else {
                    caches.push(LayerCache::Fc { input: flat, pre_relu: None });
                    cur = pre;
                }
            }
            LayerSpec::Dropout { rate } => {
                let (out, mask) = dropout(&cur, rate, mode, rng);
                caches.push(LayerCache::Dropout { mask });
                cur = out;
            }
        }
    }
    Ok(ForwardResult {
        logits: cur,
        caches,
        features: features.expect("architecture has a hidden fully-connected layer"),
    })
}

/// Per-parameter gradients in the same order as `NetworkParams::weights`.
type Gradients = Vec<(Tensor, Tensor)>;

fn backward(
    params: &NetworkParams,
    fwd: &ForwardResult,
    grad_logits: Tensor,
) -> Result<Gradients, NnError> {
    let mut grads: Vec<Option<(Tensor, Tensor)>> = vec![None; params.weights.len()];
    let mut grad = grad_logits;
    let mut param_idx = params.weights.len();
    for (spec, cache) in params.architecture.iter().zip(&fwd.caches).rev() {
        match (spec, cache) {
            (LayerSpec::Conv3x3 { .. }, LayerCache::Conv { input, pre_relu }) => {
                param_idx -= 1;
                let g = relu_backward(pre_relu, &grad);
                let (w, _) = &params.weights[param_idx];
                let (dx, dw, db) = conv3x3_backward(input, w, &g)?;
                grads[param_idx] = Some((dw, db));
                grad = dx;
            }
            (LayerSpec::MaxPool2x2, LayerCache::Pool { input_shape, argmax }) => {
                grad = maxpool2x2_backward(input_shape, argmax, &grad);
            }
            (LayerSpec::FullyConnected { .. }, LayerCache::Fc { input, pre_relu }) => {
                param_idx -= 1;
                let g = match pre_relu {
                    Some(pre) => relu_backward(pre, &grad),
                    None => grad,
                };
                let (w, _) = &params.weights[param_idx];
                let (dx, dw, db) = fc_backward(input, w, &g)?;
                grads[param_idx] = Some((dw, db));
                grad = dx;
            }
            (LayerSpec::Dropout { rate }, LayerCache::Dropout { mask, .. }) => {
                grad = dropout_backward(&grad, *rate, mask);
            }
            _ => unreachable!("cache kind always matches layer kind"),
        }
    }
    Ok(grads.into_iter().map(|g| g.unwrap()).collect())
}

/// Loss and gradients for one labeled sample (training mode).
pub fn sample_loss_and_gradients(
    params: &NetworkParams,
    input: &Tensor,
    target: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Gradients), NnError> {
    let fwd = forward(params, input, DropoutMode::Train, rng)?;
    let (loss, _, grad_logits) = softmax_xent(&fwd.logits, target);
    let grads = backward(params, &fwd, grad_logits)?;
    Ok((loss, grads))
}

/// Train the end-to-end classifier. Deterministic for a fixed config and
/// data; returns the parameters of the epoch with the best validation
/// accuracy (ties resolved toward the latest epoch) plus the epoch log.
pub fn train_mi1(
    train: &[EcgImage],
    val: &[EcgImage],
    cfg: &TrainConfig,
    width_scale: (u32, u32),
    input_size: usize,
) -> Result<(NetworkParams, Vec<EpochStats>), TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let has_normal = train.iter().any(|i| i.label == Label::Normal);
    let has_mi = train.iter().any(|i| i.label == Label::Mi);
    if !has_normal || !has_mi {
        return Err(TrainError::SingleClassTraining);
    }

    let arch = super::vgg_mi_architecture(width_scale.0, width_scale.1, input_size);
    let mut params = init_params(arch, width_scale, input_size, cfg);
    let mut velocity: Gradients = params
        .weights
        .iter()
        .map(|(w, b)| (Tensor::zeros(w.shape()), Tensor::zeros(b.shape())))
        .collect();

    let inputs: Vec<Tensor> = train.iter().map(image_to_tensor).collect();
    let targets: Vec<usize> = train.iter().map(|i| i.label.class_index()).collect();

    // One stream drives shuffling, a second drives dropout; both derive
    // from the config seed.
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));

    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, NetworkParams)> = None;
    let mut order: Vec<usize> = (0..inputs.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(cfg.minibatch.max(1)).enumerate() {
            let mut batch_grads: Option<Gradients> = None;
            let mut batch_loss = 0.0;
            for &i in batch {
                let (loss, grads) =
                    sample_loss_and_gradients(&params, &inputs[i], targets[i], &mut dropout_rng)?;
                batch_loss += loss;
                match &mut batch_grads {
                    None => batch_grads = Some(grads),
                    Some(acc) => {
                        for ((aw, ab), (gw, gb)) in acc.iter_mut().zip(&grads) {
                            add_assign(aw, gw, 1.0);
                            add_assign(ab, gb, 1.0);
                        }
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: batch_no });
            }
            epoch_loss += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            let grads = batch_grads.expect("non-empty batch");
            // v ← momentum·v − lr·(grad + λ·w); w ← w + v.
            for (((w, b), (vw, vb)), (gw, gb)) in params
                .weights
                .iter_mut()
                .zip(velocity.iter_mut())
                .zip(&grads)
            {
                sgd_step(w, vw, gw, scale, cfg, true);
                sgd_step(b, vb, gb, scale, cfg, cfg.decay_biases);
            }
        }

        let val_accuracy = if val.is_empty() {
            accuracy_on(&params, train)?
        } else {
            accuracy_on(&params, val)?
        };
        log.push(EpochStats {
            epoch,
            mean_loss: epoch_loss / inputs.len() as f64,
            val_accuracy,
        });
        if best.as_ref().map_or(true, |(acc, _)| val_accuracy >= *acc) {
            best = Some((val_accuracy, params.clone()));
        }
    }
    let (_, best_params) = best.expect("at least one epoch");
    Ok((best_params, log))
}

fn sgd_step(
    w: &mut Tensor,
    v: &mut Tensor,
    g: &Tensor,
    grad_scale: f64,
    cfg: &TrainConfig,
    decay: bool,
) {
    let lambda = if decay { cfg.weight_decay } else { 0.0 };
    for ((wv, vv), gv) in w.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
        *vv = cfg.momentum * *vv - cfg.learning_rate * (gv * grad_scale + lambda * *wv);
        *wv += *vv;
    }
}

fn add_assign(dst: &mut Tensor, src: &Tensor, scale: f64) {
    for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
        *d += scale * s;
    }
}

fn accuracy_on(params: &NetworkParams, images: &[EcgImage]) -> Result<f64, NnError> {
    let mut correct = 0usize;
    for img in images {
        let (label, _) = predict_mi1(params, img)?;
        if label == img.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / images.len() as f64)
}

/// Classify one image (dropout in inference mode; deterministic).
pub fn predict_mi1(params: &NetworkParams, image: &EcgImage) -> Result<(Label, [f64; 2]), NnError> {
    let input = image_to_tensor(image);
    // Inference never touches the rng.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let fwd = forward(params, &input, DropoutMode::Infer, &mut rng)?;
    let (_, probs, _) = softmax_xent(&fwd.logits, 0);
    let p = [probs.data()[0], probs.data()[1]];
    let label = if p[1] > p[0] { Label::Mi } else { Label::Normal };
    Ok((label, p))
}

/// Post-ReLU activation of the second fully-connected layer (layer 11),
/// dropout disabled — the VGG-MI2 feature descriptor.
pub fn extract_features(params: &NetworkParams, image: &EcgImage) -> Result<Vec<f64>, NnError> {
    let input = image_to_tensor(image);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let fwd = forward(params, &input, DropoutMode::Infer, &mut rng)?;
    Ok(fwd.features.into_data())
}
