//! Acceptance suite: one test per release criterion, each printing a
//! single pass line (visible with `cargo test -- --nocapture`).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ecgmi::augment::{augment_dataset, nine_crops, CROP_ORIGINS, CROP_SIZE};
use ecgmi::crossval::{run_scenario, ModelKind, ScenarioSpec, SplitMode};
use ecgmi::dataset::{build_synthetic_image_set, SyntheticDatasetSpec};
use ecgmi::filter::{bandpass_filter, cascade_response, design_bandpass, FilterSpec};
use ecgmi::ingest::{extract_label, generate_synthetic, parse_header, read_signals, SyntheticSpec};
use ecgmi::metrics::{compute_metrics, ConfusionMatrix};
use ecgmi::nn::{
    conv3x3_backward, conv3x3_forward, dropout, dropout_backward, fc_backward, fc_forward,
    init_params, maxpool2x2, maxpool2x2_backward, relu, relu_backward, shape_trace, softmax_xent,
    vgg_mi_architecture, DropoutMode, TrainConfig,
};
use ecgmi::peaks::detect_peaks;
use ecgmi::raster::{EcgImage, IMAGE_SIZE};
use ecgmi::segment::segment_beats;
use ecgmi::svm::{
    dual_objective, gram_matrix, qg_kernel, train_svm, QGKernelParams, SmoConfig,
};
use ecgmi::tensor::Tensor;
use ecgmi::{Label, NoiseCondition};

fn assert_metric(value: Option<f64>, expect: f64) {
    let v = value.expect("metric defined");
    assert!((v - expect).abs() <= 0.01 + 1e-9, "got {v}, want {expect}");
}

#[test]
fn criterion_01_metric_arithmetic() {
    let m = compute_metrics(&ConfusionMatrix::new(796812, 209856, 1064, 6828)).unwrap();
    assert_metric(m.accuracy, 99.22);
    assert_metric(m.sensitivity, 99.15);
    assert_metric(m.predictivity, 99.87);
    assert_metric(m.specificity, 99.50);
    let m = compute_metrics(&ConfusionMatrix::new(795472, 209174, 1746, 8168)).unwrap();
    assert_metric(m.accuracy, 99.02);
    assert_metric(m.predictivity, 99.78);
    assert_metric(m.specificity, 99.17);
    // The published sensitivity for this row (98.76) does not match its
    // own counts; the recomputed value is asserted instead.
    assert_metric(m.sensitivity, 98.98);
    println!("criterion 1 (metric arithmetic vs published tables): pass");
}

fn desk_dataset(per_class: usize) -> Vec<EcgImage> {
    build_synthetic_image_set(&SyntheticDatasetSpec {
        images_per_class: per_class,
        image_size: 32,
        seed: 20,
        ..SyntheticDatasetSpec::default()
    })
    .unwrap()
}

fn desk_train_cfg() -> TrainConfig {
    // The published Gaussian(0, 0.01) initialization under-excites the
    // 1/8-width network, so scaled-down runs open up init_std; every
    // other hyperparameter keeps its published default.
    TrainConfig { epochs: 10, init_std: 0.1, seed: 2, ..TrainConfig::default() }
}

#[test]
fn criterion_02_desk_scale_accuracy() {
    let images = desk_dataset(400);
    let budget = 900.0; // seconds per pipeline
    let base = ScenarioSpec {
        noise: NoiseCondition::Filtered,
        augmentation: false,
        model: ModelKind::Mi2,
        folds: 10,
        split_mode: SplitMode::TenFold,
        seed: 0,
    };
    let cfg = desk_train_cfg();
    let smo = SmoConfig::default();

    let t0 = Instant::now();
    let mi2 = run_scenario(&images, &base, &cfg, &smo, (1, 8), 32).unwrap();
    let mi2_secs = t0.elapsed().as_secs_f64();
    let mi2_acc = mi2.metrics.accuracy.unwrap();
    assert_eq!(mi2.pooled.total() as usize, images.len());
    assert!(mi2_acc >= 95.0, "MI2 pooled accuracy {mi2_acc:.2} < 95");
    assert!(mi2_secs < budget, "MI2 pipeline took {mi2_secs:.0}s");

    let t1 = Instant::now();
    let spec1 = ScenarioSpec { model: ModelKind::Mi1, ..base };
    let mi1 = run_scenario(&images, &spec1, &cfg, &smo, (1, 8), 32).unwrap();
    let mi1_secs = t1.elapsed().as_secs_f64();
    let mi1_acc = mi1.metrics.accuracy.unwrap();
    assert!(mi1_acc >= 90.0, "MI1 pooled accuracy {mi1_acc:.2} < 90");
    assert!(mi1_secs < budget, "MI1 pipeline took {mi1_secs:.0}s");

    println!(
        "criterion 2 (desk-scale ten-fold: MI2 {mi2_acc:.2}% in {mi2_secs:.0}s, \
         MI1 {mi1_acc:.2}% in {mi1_secs:.0}s): pass"
    );
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Relative-error check between an analytic gradient and central finite
/// differences of `loss` with respect to `x`.
fn check_grad(
    x: &mut Tensor,
    analytic: &Tensor,
    mut loss: impl FnMut(&Tensor) -> f64,
) {
    let eps = 1e-5;
    for k in 0..x.len() {
        let orig = x.data()[k];
        x.data_mut()[k] = orig + eps;
        let lp = loss(x);
        x.data_mut()[k] = orig - eps;
        let lm = loss(x);
        x.data_mut()[k] = orig;
        let fd = (lp - lm) / (2.0 * eps);
        let an = analytic.data()[k];
        let denom = an.abs().max(fd.abs()).max(1e-8);
        assert!(
            (an - fd).abs() / denom < 1e-4,
            "index {k}: analytic {an:.8e} vs fd {fd:.8e}"
        );
    }
}

/// Scalar loss used to probe layer gradients: Σ wᵢ·outᵢ for a fixed
/// random weighting w, whose gradient w.r.t. the layer output is w.
fn weighted_sum(out: &Tensor, weights: &Tensor) -> f64 {
    out.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
}

#[test]
fn criterion_03_gradient_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..20 {
        let _ = trial;
        // Convolution: dx, dw, db.
        let (c_in, c_out, h, w) = (2, 3, 5, 4);
        let mut x = rand_tensor(&mut rng, &[c_in, h, w]);
        let mut wt = rand_tensor(&mut rng, &[c_out, c_in, 3, 3]);
        let mut b = rand_tensor(&mut rng, &[c_out]);
        let probe = rand_tensor(&mut rng, &[c_out, h, w]);
        let (dx, dw, db) = conv3x3_backward(&x, &wt, &probe).unwrap();
        let (wt2, b2) = (wt.clone(), b.clone());
        check_grad(&mut x, &dx, |x| {
            weighted_sum(&conv3x3_forward(x, &wt2, &b2).unwrap(), &probe)
        });
        let x2 = x.clone();
        check_grad(&mut wt, &dw, |wt| {
            weighted_sum(&conv3x3_forward(&x2, wt, &b2).unwrap(), &probe)
        });
        let wt3 = wt.clone();
        check_grad(&mut b, &db, |b| {
            weighted_sum(&conv3x3_forward(&x2, &wt3, b).unwrap(), &probe)
        });

        // Max pooling: input gradient via stored argmax.
        let mut x = rand_tensor(&mut rng, &[2, 6, 4]);
        let probe = rand_tensor(&mut rng, &[2, 3, 2]);
        let (_, argmax) = maxpool2x2(&x).unwrap();
        let dx = maxpool2x2_backward(&[2, 6, 4], &argmax, &probe);
        check_grad(&mut x, &dx, |x| weighted_sum(&maxpool2x2(x).unwrap().0, &probe));

        // Fully connected: dx, dw, db.
        let (n_in, n_out) = (7, 4);
        let mut x = rand_tensor(&mut rng, &[n_in]);
        let mut wt = rand_tensor(&mut rng, &[n_out, n_in]);
        let mut b = rand_tensor(&mut rng, &[n_out]);
        let probe = rand_tensor(&mut rng, &[n_out]);
        let (dx, dw, db) = fc_backward(&x, &wt, &probe).unwrap();
        let (wt2, b2) = (wt.clone(), b.clone());
        check_grad(&mut x, &dx, |x| weighted_sum(&fc_forward(x, &wt2, &b2).unwrap(), &probe));
        let x2 = x.clone();
        check_grad(&mut wt, &dw, |wt| {
            weighted_sum(&fc_forward(&x2, wt, &b2).unwrap(), &probe)
        });
        let wt3 = wt.clone();
        check_grad(&mut b, &db, |b| weighted_sum(&fc_forward(&x2, &wt3, b).unwrap(), &probe));

        // ReLU (offset inputs away from the kink).
        let mut x = rand_tensor(&mut rng, &[12]);
        for v in x.data_mut() {
            if v.abs() < 1e-3 {
                *v += 0.01;
            }
        }
        let probe = rand_tensor(&mut rng, &[12]);
        let dx = relu_backward(&x, &probe);
        check_grad(&mut x, &dx, |x| weighted_sum(&relu(x), &probe));

        // Dropout in training mode with a frozen mask.
        let rate = 0.5;
        let mut x = rand_tensor(&mut rng, &[16]);
        let mut drop_rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let (_, mask) = dropout(&x, rate, DropoutMode::Train, &mut drop_rng);
        let probe = rand_tensor(&mut rng, &[16]);
        let dx = dropout_backward(&probe, rate, &mask);
        let mask2 = mask.clone();
        check_grad(&mut x, &dx, |x| {
            let kept: Vec<f64> = x
                .data()
                .iter()
                .zip(&mask2)
                .map(|(v, &m)| if m { v / (1.0 - rate) } else { 0.0 })
                .collect();
            kept.iter().zip(probe.data()).map(|(a, b)| a * b).sum()
        });

        // Softmax cross-entropy logits gradient.
        let mut logits = rand_tensor(&mut rng, &[2]);
        let target = (trial % 2) as usize;
        let (_, _, grad) = softmax_xent(&logits, target);
        check_grad(&mut logits, &grad, |l| softmax_xent(l, target).0);
    }
    println!("criterion 3 (per-layer analytic gradients vs finite differences): pass");
}

#[test]
fn criterion_04_architecture_conformance() {
    // Shape trace at full width must reproduce the published per-layer
    // input sizes (channels-first here, channels-last in the table).
    let arch = vgg_mi_architecture(1, 1, 128);
    let shapes = shape_trace(&arch, 128);
    let expected: Vec<Vec<usize>> = vec![
        vec![1, 128, 128],
        vec![64, 128, 128],
        vec![64, 128, 128],
        vec![64, 64, 64],
        vec![128, 64, 64],
        vec![128, 64, 64],
        vec![128, 32, 32],
        vec![256, 32, 32],
        vec![256, 32, 32],
        vec![256, 16, 16],
        vec![2048],
        vec![2048],
        vec![2048],
        vec![2],
    ];
    assert_eq!(shapes, expected);

    // Initialization statistics over more than 10⁶ weights.
    let cfg = TrainConfig { seed: 31, ..TrainConfig::default() };
    let arch = vgg_mi_architecture(1, 8, 128);
    let params = init_params(arch, (1, 8), 128, &cfg);
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for (w, _) in &params.weights {
        for v in w.data() {
            n += 1;
            sum += v;
            sum_sq += v * v;
        }
    }
    assert!(n >= 1_000_000, "only {n} weights sampled");
    let mean = sum / n as f64;
    let std = (sum_sq / n as f64 - mean * mean).sqrt();
    assert!(mean.abs() <= 0.001, "mean {mean}");
    assert!((std - 0.01).abs() <= 0.001, "std {std}");
    println!("criterion 4 (architecture shape trace and init statistics over {n} weights): pass");
}

#[test]
fn criterion_05_kernel_suite() {
    let p = QGKernelParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..10_000 {
        let dim = rng.gen_range(1..8);
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        let closed = (1.0 + d2 / 6.0).powi(-2);
        let k = qg_kernel(&x, &y, &p).unwrap();
        assert!((k - closed).abs() < 1e-12, "{k} vs {closed}");
        // Symmetry and boundedness.
        assert!((k - qg_kernel(&y, &x, &p).unwrap()).abs() < 1e-12);
        assert!(k > 0.0 && k <= 1.0);
        assert_eq!(qg_kernel(&x, &x, &p).unwrap(), 1.0);
    }
    // Strict monotone decrease in squared distance.
    let mut prev = f64::INFINITY;
    for i in 0..200 {
        let d = i as f64 * 0.05;
        let k = qg_kernel(&[0.0], &[d], &p).unwrap();
        if i > 0 {
            assert!(k < prev);
        }
        prev = k;
    }
    // Empirical PSD: minimum Gram eigenvalue over random vector sets.
    for trial in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + trial);
        let vectors: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let gram = gram_matrix(&vectors, &p).unwrap();
        let mat = nalgebra::DMatrix::from_fn(10, 10, |i, j| gram[i][j]);
        let min_eig = mat
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(min_eig >= -1e-8, "trial {trial}: min eigenvalue {min_eig}");
    }
    println!("criterion 5 (kernel closed form, invariants, empirical PSD): pass");
}

/// Brute-force reference maximizer of the SVM dual: projected gradient
/// ascent with exact projection onto {0 ≤ α ≤ C, Σ αᵢyᵢ = 0}.
fn projected_gradient_oracle(gram: &[Vec<f64>], labels: &[f64], c: f64) -> f64 {
    let n = labels.len();
    let project = |alpha: &mut Vec<f64>| {
        // Bisection on the multiplier of the equality constraint; the
        // clipped balance is nonincreasing in the multiplier.
        let (mut lo, mut hi) = (-10.0 * c - 10.0, 10.0 * c + 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let balance: f64 = alpha
                .iter()
                .zip(labels)
                .map(|(a, y)| y * (a - mid * y).clamp(0.0, c))
                .sum();
            if balance > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda = 0.5 * (lo + hi);
        for (a, y) in alpha.iter_mut().zip(labels) {
            *a = (*a - lambda * y).clamp(0.0, c);
        }
    };
    let mut alpha = vec![0.0; n];
    project(&mut alpha);
    let mut best = dual_objective(&alpha, labels, gram);
    let step = 0.02;
    for _ in 0..40_000 {
        let grad: Vec<f64> = (0..n)
            .map(|i| {
                1.0 - labels[i]
                    * (0..n).map(|j| alpha[j] * labels[j] * gram[i][j]).sum::<f64>()
            })
            .collect();
        for (a, g) in alpha.iter_mut().zip(&grad) {
            *a += step * g;
        }
        project(&mut alpha);
        best = best.max(dual_objective(&alpha, labels, gram));
    }
    best
}

#[test]
fn criterion_06_smo_vs_oracle() {
    let kernel = QGKernelParams::default();
    // Tight stopping settings so the solver runs to optimality for the
    // objective comparison; training defaults trade this for speed.
    let cfg = SmoConfig {
        kkt_tolerance: 1e-6,
        max_passes: 100,
        ..SmoConfig::default()
    };
    for trial in 0..25 {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + trial);
        let features: Vec<Vec<f64>> = (0..6)
            .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let mut labels: Vec<f64> =
            (0..6).map(|i| if i < 3 { 1.0 } else { -1.0 }).collect();
        // Shuffle label order per trial.
        for i in (1..6).rev() {
            labels.swap(i, rng.gen_range(0..=i));
        }
        let sol = train_svm(&features, &labels, kernel, &cfg).unwrap();
        let gram = gram_matrix(&features, &kernel).unwrap();
        let smo_obj = dual_objective(&sol.alphas, &labels, &gram);
        let oracle_obj = projected_gradient_oracle(&gram, &labels, cfg.c);
        assert!(
            (smo_obj - oracle_obj).abs() <= 1e-3,
            "trial {trial}: SMO {smo_obj:.6} vs oracle {oracle_obj:.6}"
        );
    }
    // XOR reaches 4/4 at defaults.
    let features = vec![
        vec![0.0, 0.0],
        vec![1.0, 1.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
    ];
    let labels = vec![-1.0, -1.0, 1.0, 1.0];
    let sol = train_svm(&features, &labels, kernel, &cfg).unwrap();
    for (x, y) in features.iter().zip(&labels) {
        assert_eq!(sol.model.decision_value(x).unwrap().signum(), *y);
    }
    println!("criterion 6 (SMO dual objective vs projected-gradient oracle, XOR): pass");
}

#[test]
fn criterion_07_augmentation() {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let mut images = Vec::new();
    for i in 0..100 {
        let label = if i % 2 == 0 { Label::Normal } else { Label::Mi };
        let mut img = EcgImage::new(IMAGE_SIZE, IMAGE_SIZE, label, format!("img{i}"));
        for r in 0..IMAGE_SIZE {
            for c in 0..IMAGE_SIZE {
                img.set(r, c, rng.gen_range(0..=255));
            }
        }
        images.push(img);
    }
    // 10× count exactness, order, and label propagation.
    let augmented = augment_dataset(&images, true).unwrap();
    assert_eq!(augmented.len(), 10 * images.len());
    for (i, img) in images.iter().enumerate() {
        assert_eq!(&augmented[10 * i], img);
        for k in 0..10 {
            assert_eq!(augmented[10 * i + k].label, img.label);
            assert_eq!(augmented[10 * i + k].provenance, img.provenance);
        }
    }
    assert_eq!(augment_dataset(&images, false).unwrap(), images);

    // Crop-origin grid exactness: the resized crop's corner pixels are
    // the source image's crop corner pixels (corner-aligned resize).
    let img = &images[0];
    let crops = nine_crops(img).unwrap();
    assert_eq!(CROP_ORIGINS.len(), 9);
    for (crop, &(r0, c0)) in crops.iter().zip(CROP_ORIGINS.iter()) {
        assert!(r0 <= IMAGE_SIZE - CROP_SIZE && c0 <= IMAGE_SIZE - CROP_SIZE);
        let last = CROP_SIZE - 1;
        assert_eq!(crop.get(0, 0), img.get(r0, c0));
        assert_eq!(crop.get(0, IMAGE_SIZE - 1), img.get(r0, c0 + last));
        assert_eq!(crop.get(IMAGE_SIZE - 1, 0), img.get(r0 + last, c0));
        assert_eq!(
            crop.get(IMAGE_SIZE - 1, IMAGE_SIZE - 1),
            img.get(r0 + last, c0 + last)
        );
    }

    // Constant images are a fixed point of crop-and-resize.
    let mut flat = EcgImage::new(IMAGE_SIZE, IMAGE_SIZE, Label::Normal, String::new());
    for r in 0..IMAGE_SIZE {
        for c in 0..IMAGE_SIZE {
            flat.set(r, c, 173);
        }
    }
    for crop in nine_crops(&flat).unwrap() {
        assert!(crop.pixels.iter().all(|&p| p == 173));
    }
    println!("criterion 7 (nine-crop augmentation geometry and counts): pass");
}

#[test]
fn criterion_08_filter_response() {
    let fs = 1000.0;
    let spec = FilterSpec::default();
    let sections = design_bandpass(fs, &spec).unwrap();
    let single = |f: f64| cascade_response(&sections, fs, f).norm();
    // Single-pass −3 dB at the upper cutoff; DC essentially eliminated.
    assert!((single(40.0) - 0.7071).abs() <= 0.02, "|H(40)| = {}", single(40.0));
    assert!(single(0.0) <= 1e-3, "|H(0)| = {}", single(0.0));
    // Zero-phase magnitude at 10 Hz is the squared single-pass response.
    let zero_phase_10 = single(10.0).powi(2);
    assert!(zero_phase_10 >= 0.98, "|H(10)|² = {zero_phase_10}");
    // And the implementation agrees: a 10 Hz tone passes nearly intact.
    let n = 8000;
    let tone: Vec<f64> = (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / fs).sin())
        .collect();
    let out = bandpass_filter(&tone, fs, &spec).unwrap();
    let power_in: f64 = tone[2000..6000].iter().map(|v| v * v).sum();
    let power_out: f64 = out[2000..6000].iter().map(|v| v * v).sum();
    assert!((power_out / power_in).sqrt() >= 0.98);
    println!("criterion 8 (Butterworth band-pass response): pass");
}

#[test]
fn criterion_09_peak_detection() {
    let fs = 1000.0;
    let tolerance = (0.020 * fs) as i64;
    let mut true_positives = 0usize;
    let mut false_negatives = 0usize;
    let mut false_positives = 0usize;
    for seed in 0..50 {
        let spec = SyntheticSpec {
            n_beats: 10,
            heart_rate_bpm: 60.0 + (seed % 7) as f64 * 5.0,
            sampling_rate: fs,
            noise_amplitude: 0.05,
            class: if seed % 2 == 0 { Label::Normal } else { Label::Mi },
            seed: 7000 + seed,
        };
        let synth = generate_synthetic(&spec);
        let ann = detect_peaks(&synth.record.samples[0], fs).unwrap();
        let mut matched = vec![false; ann.r_indices.len()];
        for &truth in &synth.r_peaks {
            let hit = ann.r_indices.iter().enumerate().find(|(k, &r)| {
                !matched[*k] && (r as i64 - truth as i64).abs() <= tolerance
            });
            match hit {
                Some((k, _)) => {
                    matched[k] = true;
                    true_positives += 1;
                }
                None => false_negatives += 1,
            }
        }
        false_positives += matched.iter().filter(|&&m| !m).count();
    }
    let se = true_positives as f64 / (true_positives + false_negatives) as f64;
    let ppv = true_positives as f64 / (true_positives + false_positives) as f64;
    assert!(se >= 0.99, "R sensitivity {se:.4}");
    assert!(ppv >= 0.99, "R positive predictivity {ppv:.4}");
    println!("criterion 9 (R detection Se {se:.4} / PPV {ppv:.4} on 50 records): pass");
}

fn run_cli(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_ecgmi"))
        .args(args)
        .status()
        .expect("binary runs");
    assert!(status.success(), "ecgmi {args:?} failed");
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    entries
        .into_iter()
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn criterion_10_determinism() {
    let root = tempfile::tempdir().unwrap();
    let p = |name: &str| root.path().join(name).display().to_string();

    // First pass: full desk pipeline through the CLI.
    run_cli(&["synth", "--out", &p("records"), "--seed", "6", "--set", "records_per_class=5"]);
    run_cli(&["preprocess", "--records", &p("records"), "--out", &p("segments")]);
    run_cli(&["render", "--segments", &p("segments"), "--out", &p("images"), "--set", "image_size=32"]);
    run_cli(&[
        "train-mi1", "--images", &p("images"), "--out", &p("train"),
        "--set", "width_scale=1/8", "--set", "epochs=2", "--set", "init_std=0.1",
    ]);
    run_cli(&["extract-features", "--checkpoint", &p("train/vggmi1.ckpt"), "--images", &p("images"), "--out", &p("feat")]);
    run_cli(&["train-svm", "--features", &p("feat/features.tsv"), "--out", &p("svm")]);
    run_cli(&[
        "cross-validate", "--images", &p("images"), "--out", &p("cv"),
        "--set", "folds=3", "--set", "epochs=2", "--set", "init_std=0.1",
        "--set", "width_scale=1/8", "--set", "augment=false",
    ]);

    // Replay every stage from its echoed run-config into fresh
    // directories and compare bytes.
    for (stage, cmd) in [
        ("records", "synth"),
        ("segments", "preprocess"),
        ("images", "render"),
        ("train", "train-mi1"),
        ("feat", "extract-features"),
        ("svm", "train-svm"),
        ("cv", "cross-validate"),
    ] {
        let replay = format!("{stage}.replay");
        run_cli(&[
            cmd,
            "--config",
            &p(&format!("{stage}/run-config.txt")),
            "--out",
            &p(&replay),
        ]);
        let a = dir_bytes(&root.path().join(stage));
        let b = dir_bytes(&root.path().join(&replay));
        assert_eq!(
            a.iter().map(|(n, _)| n).collect::<Vec<_>>(),
            b.iter().map(|(n, _)| n).collect::<Vec<_>>(),
            "{stage}: file lists differ"
        );
        for ((name, bytes_a), (_, bytes_b)) in a.iter().zip(&b) {
            assert_eq!(bytes_a, bytes_b, "{stage}/{name} differs between runs");
        }
    }
    println!("criterion 10 (bitwise replay of every stage from run-config.txt): pass");
}

#[test]
fn criterion_11_ptb_corpus_if_present() {
    let dir = match std::env::var("ECGMI_PTB_DIR") {
        Ok(d) => PathBuf::from(d),
        Err(_) => {
            let fallback = PathBuf::from("data/ptb");
            if !fallback.is_dir() {
                println!("criterion 11 (PTB corpus ingestion): skipped, corpus not present");
                return;
            }
            fallback
        }
    };
    let mut headers = Vec::new();
    let mut stack = vec![dir.clone()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|x| x == "hea") {
                headers.push(path);
            }
        }
    }
    headers.sort();
    let mut mi_records = 0usize;
    let mut healthy_records = 0usize;
    let mut beat_images = 0usize;
    for hea in &headers {
        let text = std::fs::read_to_string(hea).unwrap();
        let header = match parse_header(&text) {
            Ok(h) => h,
            Err(_) => continue,
        };
        let label = extract_label(&header.comments);
        match label {
            Label::Mi => mi_records += 1,
            Label::Normal => healthy_records += 1,
            Label::Other => continue,
        }
        let bytes = std::fs::read(hea.with_extension("dat")).unwrap();
        let samples = read_signals(&header, &bytes, false).unwrap();
        let lead = header
            .signals
            .iter()
            .position(|s| s.lead_name.eq_ignore_ascii_case("ii"))
            .unwrap_or(0);
        let fs = header.sampling_rate;
        let filtered = bandpass_filter(&samples[lead], fs, &FilterSpec::default()).unwrap();
        if let Ok(ann) = detect_peaks(&filtered, fs) {
            if let Ok(seg) = segment_beats(
                &filtered,
                &ann,
                fs,
                &header.record_name,
                label,
                NoiseCondition::Filtered,
            ) {
                beat_images += seg.segments.len();
            }
        }
    }
    assert_eq!(mi_records, 368, "MI record count");
    assert!(healthy_records > 0, "no healthy-control records admitted");
    let target = 101_456.0;
    let deviation = (beat_images as f64 - target).abs() / target;
    assert!(
        deviation <= 0.05,
        "beat-image count {beat_images} deviates {:.1}% from {target}",
        deviation * 100.0
    );
    println!(
        "criterion 11 (PTB ingestion: {mi_records} MI / {healthy_records} healthy records, \
         {beat_images} beat images): pass"
    );
}
