//! Command-line pipeline driver: synthetic data generation, WFDB
//! ingestion, preprocessing, rendering, augmentation, training of both
//! classifiers, and cross-validated evaluation — all reproducible from
//! the `run-config.txt` echoed into every output directory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ecgmi::augment::augment_dataset;
use ecgmi::config::Config;
use ecgmi::crossval::{run_scenario, summary, ModelKind, ScenarioSpec, SplitMode};
use ecgmi::filter::{bandpass_filter, FilterSpec};
use ecgmi::ingest::{
    encode_format16, extract_label, generate_synthetic, parse_header, read_signals, select_lead,
    write_header, write_manifest, EcgRecord, SyntheticSpec,
};
use ecgmi::metrics::{compute_metrics, ConfusionMatrix};
use ecgmi::nn::{
    extract_features, load_params, predict_mi1, save_params, train_mi1, TrainConfig,
};
use ecgmi::peaks::detect_peaks;
use ecgmi::raster::{read_image_set, render, write_image_set, EcgImage, IMAGE_SIZE};
use ecgmi::segment::{read_segments, segment_beats, write_segments, BeatSegment};
use ecgmi::svm::{
    load_model, predict_svm, save_model, train_svm, QGKernelParams, SmoConfig,
};
use ecgmi::{Label, NoiseCondition};

#[derive(Parser)]
#[command(name = "ecgmi", version, about = "ECG myocardial-infarction detection pipeline")]
struct Cli {
    /// key = value configuration file supplying module parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides the config file's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override any config key (repeatable): --set key=value.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a deterministic synthetic WFDB record directory.
    Synth,
    /// Scan a WFDB directory and write an admission manifest.
    Ingest {
        /// Directory of .hea/.dat records (config key `records_dir`).
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Filter, detect beats, and cut two-beat segments.
    Preprocess {
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Rasterize segments into a PGM image set.
    Render {
        /// Segment dump directory (config key `segments_dir`).
        #[arg(long)]
        segments: Option<PathBuf>,
    },
    /// Ten-fold the dataset with nine-crop augmentation.
    Augment {
        /// Image set directory (config key `images_dir`).
        #[arg(long)]
        images: Option<PathBuf>,
    },
    /// Train the end-to-end CNN classifier.
    TrainMi1 {
        #[arg(long)]
        images: Option<PathBuf>,
        /// Optional held-out validation image set (`val_images_dir`).
        #[arg(long)]
        val_images: Option<PathBuf>,
    },
    /// Dump second-FC feature vectors for an image set.
    ExtractFeatures {
        /// Network checkpoint (config key `checkpoint`).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        images: Option<PathBuf>,
    },
    /// Train the Q-Gaussian SVM head on dumped features.
    TrainSvm {
        /// Feature table from extract-features (config key `features`).
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Evaluate a checkpoint (plus optional SVM head) on an image set.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// SVM model file; when given, classification uses the SVM head.
        #[arg(long)]
        svm_model: Option<PathBuf>,
        #[arg(long)]
        images: Option<PathBuf>,
    },
    /// Run a full cross-validated scenario and emit the CSV report.
    CrossValidate {
        #[arg(long)]
        images: Option<PathBuf>,
    },
}

/// Exit 1: bad usage (flags, keys, values). Exit 2: data/processing.
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

fn usage(msg: impl ToString) -> CliError {
    CliError::Usage(msg.to_string())
}

fn data(msg: impl ToString) -> CliError {
    CliError::Data(msg.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not errors.
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::from_file(path).map_err(|e| usage(format!("--config: {e}")))?,
        None => Config::new(),
    };
    for pair in &cli.sets {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| usage(format!("--set {pair}: expected KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim());
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", seed);
    }
    if let Ok(threads) = std::env::var("ECGMI_THREADS") {
        cfg.set("threads", threads);
    }
    // Worker cap; execution is sequential so only the value range is
    // validated (0 = auto).
    cfg.get_usize("threads", 0).map_err(usage)?;

    let out = cli
        .out
        .clone()
        .ok_or_else(|| usage("--out DIR is required"))?;
    std::fs::create_dir_all(&out).map_err(|e| data(format!("creating {}: {e}", out.display())))?;

    match &cli.cmd {
        Cmd::Synth => cmd_synth(&mut cfg, &out),
        Cmd::Ingest { records } => {
            resolve_path(&mut cfg, "records_dir", records, "--records")?;
            cmd_ingest(&mut cfg, &out)
        }
        Cmd::Preprocess { records } => {
            resolve_path(&mut cfg, "records_dir", records, "--records")?;
            cmd_preprocess(&mut cfg, &out)
        }
        Cmd::Render { segments } => {
            resolve_path(&mut cfg, "segments_dir", segments, "--segments")?;
            cmd_render(&mut cfg, &out)
        }
        Cmd::Augment { images } => {
            resolve_path(&mut cfg, "images_dir", images, "--images")?;
            cmd_augment(&mut cfg, &out)
        }
        Cmd::TrainMi1 { images, val_images } => {
            resolve_path(&mut cfg, "images_dir", images, "--images")?;
            if let Some(v) = val_images {
                cfg.set("val_images_dir", v.display());
            }
            cmd_train_mi1(&mut cfg, &out)
        }
        Cmd::ExtractFeatures { checkpoint, images } => {
            resolve_path(&mut cfg, "checkpoint", checkpoint, "--checkpoint")?;
            resolve_path(&mut cfg, "images_dir", images, "--images")?;
            cmd_extract_features(&mut cfg, &out)
        }
        Cmd::TrainSvm { features } => {
            resolve_path(&mut cfg, "features", features, "--features")?;
            cmd_train_svm(&mut cfg, &out)
        }
        Cmd::Evaluate { checkpoint, svm_model, images } => {
            resolve_path(&mut cfg, "checkpoint", checkpoint, "--checkpoint")?;
            resolve_path(&mut cfg, "images_dir", images, "--images")?;
            if let Some(m) = svm_model {
                cfg.set("svm_model", m.display());
            }
            cmd_evaluate(&mut cfg, &out)
        }
        Cmd::CrossValidate { images } => {
            resolve_path(&mut cfg, "images_dir", images, "--images")?;
            cmd_cross_validate(&mut cfg, &out)
        }
    }
}

/// A required input path comes from its flag or the config key.
fn resolve_path(
    cfg: &mut Config,
    key: &str,
    flag: &Option<PathBuf>,
    flag_name: &str,
) -> Result<(), CliError> {
    if let Some(p) = flag {
        cfg.set(key, p.display());
    }
    if cfg.get(key).is_none() {
        return Err(usage(format!("missing {flag_name} (config key `{key}`)")));
    }
    Ok(())
}

fn write_run_config(cfg: &Config, out: &Path) -> Result<(), CliError> {
    std::fs::write(out.join("run-config.txt"), cfg.serialize())
        .map_err(|e| data(format!("writing run-config.txt: {e}")))
}

fn cmd_synth(cfg: &mut Config, out: &Path) -> Result<(), CliError> {
    let per_class = cfg.get_usize("records_per_class", 4).map_err(usage)?;
    let beats = cfg.get_usize("beats_per_record", 13).map_err(usage)?;
    let bpm = cfg.get_f64("heart_rate_bpm", 60.0).map_err(usage)?;
    let fs = cfg.get_f64("sampling_rate", 1000.0).map_err(usage)?;
    let noise = cfg.get_f64("noise_amplitude", 0.03).map_err(usage)?;
    let seed = cfg.get_u64("seed", 0).map_err(usage)?;
    if per_class == 0 || beats == 0 {
        return Err(usage("records_per_class and beats_per_record must be positive"));
    }
    if !(30.0..=220.0).contains(&bpm) {
        return Err(usage("heart_rate_bpm must lie in [30, 220]"));
    }
    cfg.set("records_per_class", per_class);
    cfg.set("beats_per_record", beats);
    cfg.set("heart_rate_bpm", bpm);
    cfg.set("sampling_rate", fs);
    cfg.set("noise_amplitude", noise);
    cfg.set("seed", seed);

    let mut manifest = Vec::new();
    for i in 0..per_class {
        for class in [Label::Normal, Label::Mi] {
            let rec_no = 2 * i + if class == Label::Mi { 1 } else { 0 };
            let spec = SyntheticSpec {
                n_beats: beats,
                heart_rate_bpm: bpm,
                sampling_rate: fs,
                noise_amplitude: noise,
                class,
                seed: seed
                    .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                    .wrapping_add(rec_no as u64),
            };
            let mut record = generate_synthetic(&spec).record;
            record.header.record_name = format!("rec{rec_no:03}");
            let bytes = encode_format16(&mut record);
            let name = &record.header.record_name;
            std::fs::write(out.join(format!("{name}.hea")), write_header(&record.header))
                .map_err(|e| data(format!("writing {name}.hea: {e}")))?;
            std::fs::write(out.join(format!("{name}.dat")), bytes)
                .map_err(|e| data(format!("writing {name}.dat: {e}")))?;
            manifest.push((name.clone(), class, record.header.n_samples));
        }
    }
    manifest.sort_by(|a, b| a.0.cmp(&b.0));
    std::fs::write(out.join("manifest.tsv"), write_manifest(&manifest))
        .map_err(|e| data(format!("writing manifest: {e}")))?;
    write_run_config(cfg, out)
}

fn load_records(dir: &Path, strict: bool) -> Result<Vec<EcgRecord>, CliError> {
    let mut headers: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| data(format!("reading {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "hea"))
        .collect();
    headers.sort();
    if headers.is_empty() {
        return Err(data(format!("no .hea files in {}", dir.display())));
    }
    let mut records = Vec::new();
    for hea in headers {
        let text = std::fs::read_to_string(&hea)
            .map_err(|e| data(format!("reading {}: {e}", hea.display())))?;
        let header = parse_header(&text).map_err(|e| data(format!("{}: {e}", hea.display())))?;
        let dat = hea.with_extension("dat");
        let bytes = std::fs::read(&dat)
            .map_err(|e| data(format!("reading {}: {e}", dat.display())))?;
        let samples = read_signals(&header, &bytes, strict)
            .map_err(|e| data(format!("{}: {e}", dat.display())))?;
        let label = extract_label(&header.comments);
        records.push(EcgRecord { header, samples, label });
    }
    Ok(records)
}

fn cmd_ingest(cfg: &mut Config, out: &Path) -> Result<(), CliError> {
    let strict = cfg.get_bool("strict_checksums", true).map_err(usage)?;
    cfg.set("strict_checksums", strict);
    let dir = PathBuf::from(cfg.get("records_dir").expect("resolved"));
    let records = load_records(&dir, strict)?;
    let manifest: Vec<(String, Label, usize)> = records
        .iter()
        .map(|r| (r.header.record_name.clone(), r.label, r.header.n_samples))
        .collect();
    std::fs::write(out.join("manifest.tsv"), write_manifest(&manifest))
        .map_err(|e| data(format!("writing manifest: {e}")))?;
    write_run_config(cfg, out)
}

fn cmd_preprocess(cfg: &mut Config, out: &Path) -> Result<(), CliError> {
    let noise = parse_noise(cfg)?;
    let lead = cfg.get("lead").unwrap_or("").to_string();
    cfg.set("lead", &lead);
    let low = cfg.get_f64("filter_low_hz", 0.5).map_err(usage)?;
    let high = cfg.get_f64("filter_high_hz", 40.0).map_err(usage)?;
    let order = cfg.get_usize("filter_order", 2).map_err(usage)?;
    if !(0.0 < low && low < high) || order == 0 || order % 2 != 0 {
        return Err(usage(
            "filter_low_hz/filter_high_hz must satisfy 0 < low < high and filter_order must be a positive even number",
        ));
    }
    cfg.set("filter_low_hz", low);
    cfg.set("filter_high_hz", high);
    cfg.set("filter_order", order);
    let strict = cfg.get_bool("strict_checksums", true).map_err(usage)?;
    cfg.set("strict_checksums", strict);

    let dir = PathBuf::from(cfg.get("records_dir").expect("resolved"));
    let records = load_records(&dir, strict)?;
    let spec = FilterSpec { low_cutoff: low, high_cutoff: high, order, zero_phase: true };
    let mut segments: Vec<BeatSegment> = Vec::new();
    for record in &records {
        let fs = record.header.sampling_rate;
        let signal = if lead.is_empty() {
            record.samples[0].clone()
        } else {
            select_lead(record, &lead)
                .map_err(|e| data(format!("{}: {e}", record.header.record_name)))?
                .to_vec()
        };
        let signal = match noise {
            NoiseCondition::Filtered => bandpass_filter(&signal, fs, &spec)
                .map_err(|e| data(format!("{}: {e}", record.header.record_name)))?,
            NoiseCondition::Raw => signal,
        };
        let ann = detect_peaks(&signal, fs)
            .map_err(|e| data(format!("{}: {e}", record.header.record_name)))?;
        let seg = segment_beats(&signal, &ann, fs, &record.header.record_name, record.label, noise)
            .map_err(|e| data(format!("{}: {e}", record.header.record_name)))?;
        segments.extend(seg.segments);
    }
    if segments.is_empty() {
        return Err(data("no segments produced from any record"));
    }
    write_segments(out, &segments).map_err(|e| data(format!("writing segments: {e}")))?;
    write_run_config(cfg, out)
}

fn cmd_render(cfg: &mut Config, out: &Path) -> Result<(), CliError> {
    let image_size = cfg.get_usize("image_size", IMAGE_SIZE).map_err(usage)?;
    if image_size < 2 {
        return Err(usage("image_size must be at least 2"));
    }
    cfg.set("image_size", image_size);
    let dir = PathBuf::from(cfg.get("segments_dir").expect("resolved"));
    let segments = read_segments(&dir).map_err(|e| data(format!("reading segments: {e}")))?;
    let mut images = Vec::with_capacity(segments.len());
    for seg in &segments {
        let img = render(seg).map_err(|e| data(format!("{}: {e}", seg.source_record)))?;
        images.push(if image_size == IMAGE_SIZE {
            img
        } else {
            ecgmi::augment::resize_bilinear(&img, image_size, image_size)
        });
    }
    write_image_set(out, &images).map_err(|e| data(format!("writing images: {e}")))?;
    write_run_config(cfg, out)
}

fn cmd_augment(cfg: &mut Config, out: &Path) -> Result<(), CliError> {
    let dir = PathBuf::from(cfg.get("images_dir").expect("resolved"));
    let images = read_image_set(&dir).map_err(|e| data(format!("reading images: {e}")))?;
    let augmented = augment_dataset(&images, true).map_err(|e| data(e.to_string()))?;
    write_image_set(out, &augmented).map_err(|e| data(format!("writing images: {e}")))?;
    write_run_config(cfg, out)
}

fn parse_noise(cfg: &mut Config) -> Result<NoiseCondition, CliError> {
    let v = cfg.get("noise").unwrap_or("filtered").to_string();
    let n = match v.as_str() {
        "filtered" => NoiseCondition::Filtered,
        "raw" => NoiseCondition::Raw,
        other => return Err(usage(format!("noise: expected `filtered` or `raw`, got `{other}`"))),
    };
    cfg.set("noise", v);
    Ok(n)
}

fn parse_width_scale(cfg: &mut Config) -> Result<(u32, u32), CliError> {
    let v = cfg.get("width_scale").unwrap_or("1").to_string();
    let (num, den) = match v.split_once('/') {
        Some((n, d)) => (
            n.trim().parse::<u32>().ok(),
            d.trim().parse::<u32>().ok(),
        ),
        None => (v.trim().parse::<u32>().ok(), Some(1)),
    };
    match (num, den) {
        (Some(n), Some(d)) if n >= 1 && d >= 1 && n <= d => {
            cfg.set("width_scale", &v);
            Ok((n, d))
        }
        _ => Err(usage(format!(
            "width_scale: expected a rational in (0, 1] like `1` or `1/8`, got `{v}`"
        ))),
    }
}

fn train_config(cfg: &mut Config) -> Result<TrainConfig, CliError> {
    let tc = TrainConfig {
        learning_rate: cfg.get_f64("learning_rate", 0.001).map_err(usage)?,
        weight_decay: cfg.get_f64("weight_decay", 0.0005).map_err(usage)?,
        momentum: cfg.get_f64("momentum", 0.9).map_err(usage)?,
        epochs: cfg.get_usize("epochs", 50).map_err(usage)?,
        minibatch: cfg.get_usize("minibatch", 5).map_err(usage)?,
        init_std: cfg.get_f64("init_std", 0.01).map_err(usage)?,
        init_mean: cfg.get_f64("init_mean", 0.0).map_err(usage)?,
        decay_biases: cfg.get_bool("decay_biases", true).map_err(usage)?,
        seed: cfg.get_u64("seed", 0).map_err(usage)?,
    };
    if tc.learning_rate <= 0.0 || tc.epochs == 0 || tc.minibatch == 0 || tc.init_std <= 0.0 {
        return Err(usage(
            "learning_rate, epochs, minibatch, and init_std must all be positive",
        ));
    }
    cfg.set("learning_rate", tc.learning_rate);
    cfg.set("weight_decay", tc.weight_decay);
    cfg.set("momentum", tc.momentum);
    cfg.set("epochs", tc.epochs);
    cfg.set("minibatch", tc.minibatch);
    cfg.set("init_std", tc.init_std);
    cfg.set("init_mean", tc.init_mean);
    cfg.set("decay_biases", tc.decay_biases);
    cfg.set("seed", tc.seed);
    Ok(tc)
}

fn svm_config(cfg: &mut Config) -> Result<(QGKernelParams, SmoConfig), CliError> {
    let kernel = QGKernelParams {
        q: cfg.get_f64("svm_q", 1.5).map_err(usage)?,
        inv_sigma_sq: cfg.get_f64("svm_inv_sigma_sq", 0.5).map_err(usage)?,
    };
    kernel
        .validate()
        .map_err(|e| usage(format!("svm_q / svm_inv_sigma_sq: {e}")))?;
    let smo = SmoConfig {
        c: cfg.get_f64("svm_c", 1.0).map_err(usage)?,
        kkt_tolerance: cfg.get_f64("svm_tolerance", 1e-3).map_err(usage)?,
        max_passes: cfg.get_usize("svm_max_passes", 10).map_err(usage)?,
        max_iterations: cfg.get_usize("svm_max_iterations", 100_000).map_err(usage)?,
        seed: cfg.get_u64("seed", 0).map_err(usage)?,
        standardize: cfg.get_bool("svm_standardize", false).map_err(usage)?,
    };
    if smo.c <= 0.0 || smo.kkt_tolerance <= 0.0 || smo.max_passes == 0 || smo.max_iterations == 0 {
        return Err(usage(
            "svm_c, svm_tolerance, svm_max_passes, and svm_max_iterations must all be positive",
        ));
    }
    cfg.set("svm_q", kernel.q);
    cfg.set("svm_inv_sigma_sq", kernel.inv_sigma_sq);
    cfg.set("svm_c", smo.c);
    cfg.set("svm_tolerance", smo.kkt_tolerance);
    cfg.set("svm_max_passes", smo.max_passes);
    cfg.set("svm_max_iterations", smo.max_iterations);
    cfg.set("svm_standardize", smo.standardize);
    Ok((kernel, smo))
}

fn read_images_key(cfg: &Config, key: &str) -> Result<Vec<EcgImage>, CliError> {
    let dir = PathBuf::from(cfg.get(key).expect("resolved"));
    read_image_set(&dir).map_err(|e| data(format!("reading {}: {e}", dir.display())))
}

fn cmd_train_mi1(cfg: &mut Config, out: &Path) -> Result<(), CliError> {
    let tc = train_config(cfg)?;
    let ws = parse_width_scale(cfg)?;
    let images = read_images_key(cfg, "images_dir")?;
    let val = match cfg.get("val_images_dir") {
        Some(_) => read_images_key(cfg, "val_images_dir")?,
        None => Vec::new(),
    };
    let input_size = images.first().map(|i| i.width).unwrap_or(IMAGE_SIZE);
    cfg.set("input_size", input_size);
    let (params, log) =
        train_mi1(&images, &val, &tc, ws, input_size).map_err(|e| data(e.to_string()))?;
    let mut file = std::fs::File::create(out.join("vggmi1.ckpt"))
        .map_err(|e| data(format!("creating checkpoint: {e}")))?;
    save_params(&params, &mut file).map_err(|e| data(format!("writing checkpoint: {e}")))?;
    let mut log_text = String::from("epoch\tmean_loss\tval_accuracy\n");
    for e in &log {
        log_text.push_str(&format!("{}\t{}\t{}\n", e.epoch, e.mean_loss, e.val_accuracy));
    }
    std::fs::write(out.join("train-log.tsv"), log_text)
        .map_err(|e| data(format!("writing train log: {e}")))?;
    write_run_config(cfg, out)
}

fn cmd_extract_features(cfg: &mut Config, out: &Path) -> Result<(), CliError> {
    let ckpt = PathBuf::from(cfg.get("checkpoint").expect("resolved"));
    let mut file =
        std::fs::File::open(&ckpt).map_err(|e| data(format!("{}: {e}", ckpt.display())))?;
    let params = load_params(&mut file).map_err(|e| data(format!("{}: {e}", ckpt.display())))?;
    let images = read_images_key(cfg, "images_dir")?;
    let mut table = String::new();
    for img in &images {
        let features = extract_features(&params, img).map_err(|e| data(e.to_string()))?;
        table.push_str(img.label.as_str());
        for v in features {
            table.push('\t');
            table.push_str(&format!("{v}"));
        }
        table.push('\n');
    }
    std::fs::write(out.join("features.tsv"), table)
        .map_err(|e| data(format!("writing features: {e}")))?;
    write_run_config(cfg, out)
}

fn read_features(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<f64>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| data(format!("{}: {e}", path.display())))?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let mut parts = line.split('\t');
        let label = parts
            .next()
            .and_then(Label::from_str_loose)
            .ok_or_else(|| data(format!("{}:{}: bad label", path.display(), no + 1)))?;
        labels.push(if label == Label::Mi { 1.0 } else { -1.0 });
        let row: Result<Vec<f64>, _> = parts.map(|v| v.parse::<f64>()).collect();
        features.push(
            row.map_err(|e| data(format!("{}:{}: bad value: {e}", path.display(), no + 1)))?,
        );
    }
    Ok((features, labels))
}

fn cmd_train_svm(cfg: &mut Config, out: &Path) -> Result<(), CliError> {
    let (kernel, smo) = svm_config(cfg)?;
    let path = PathBuf::from(cfg.get("features").expect("resolved"));
    let (features, labels) = read_features(&path)?;
    let sol = train_svm(&features, &labels, kernel, &smo).map_err(|e| data(e.to_string()))?;
    save_model(&sol.model, &out.join("model.svm"))
        .map_err(|e| data(format!("writing model: {e}")))?;
    if sol.model.iteration_limit_hit {
        eprintln!("warning: SMO stopped at the iteration limit; model is best-so-far");
    }
    write_run_config(cfg, out)
}

fn cmd_evaluate(cfg: &mut Config, out: &Path) -> Result<(), CliError> {
    let ckpt = PathBuf::from(cfg.get("checkpoint").expect("resolved"));
    let mut file =
        std::fs::File::open(&ckpt).map_err(|e| data(format!("{}: {e}", ckpt.display())))?;
    let params = load_params(&mut file).map_err(|e| data(format!("{}: {e}", ckpt.display())))?;
    let svm = match cfg.get("svm_model") {
        Some(p) => {
            let p = PathBuf::from(p);
            Some(load_model(&p).map_err(|e| data(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let images = read_images_key(cfg, "images_dir")?;
    let mut cm = ConfusionMatrix::default();
    for img in &images {
        let pred = match &svm {
            Some(model) => {
                let f = extract_features(&params, img).map_err(|e| data(e.to_string()))?;
                predict_svm(model, &f).map_err(|e| data(e.to_string()))?.0
            }
            None => predict_mi1(&params, img).map_err(|e| data(e.to_string()))?.0,
        };
        cm.record(img.label, pred);
    }
    let metrics = compute_metrics(&cm).map_err(|e| data(e.to_string()))?;
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.2}")).unwrap_or_default();
    let text = format!(
        "model={}\ntp={}\ntn={}\nfp={}\nfn={}\nacc={}\nse={}\npre={}\nspe={}\n",
        if svm.is_some() { "mi2" } else { "mi1" },
        cm.tp,
        cm.tn,
        cm.fp,
        cm.fn_,
        fmt(metrics.accuracy),
        fmt(metrics.sensitivity),
        fmt(metrics.predictivity),
        fmt(metrics.specificity),
    );
    std::fs::write(out.join("evaluation.txt"), text)
        .map_err(|e| data(format!("writing evaluation: {e}")))?;
    write_run_config(cfg, out)
}

fn cmd_cross_validate(cfg: &mut Config, out: &Path) -> Result<(), CliError> {
    let noise = parse_noise(cfg)?;
    let model = match cfg.get("model").unwrap_or("mi2") {
        "mi1" => ModelKind::Mi1,
        "mi2" => ModelKind::Mi2,
        other => return Err(usage(format!("model: expected `mi1` or `mi2`, got `{other}`"))),
    };
    cfg.set("model", model.as_str());
    let augmentation = cfg.get_bool("augment", true).map_err(usage)?;
    cfg.set("augment", augmentation);
    let folds = cfg.get_usize("folds", 10).map_err(usage)?;
    if folds < 2 {
        return Err(usage("folds must be at least 2"));
    }
    cfg.set("folds", folds);
    let split_mode = match cfg.get("split_mode").unwrap_or("tenfold") {
        "tenfold" => SplitMode::TenFold,
        "holdout" => SplitMode::Holdout60_30_10,
        other => {
            return Err(usage(format!(
                "split_mode: expected `tenfold` or `holdout`, got `{other}`"
            )))
        }
    };
    cfg.set(
        "split_mode",
        if split_mode == SplitMode::TenFold { "tenfold" } else { "holdout" },
    );
    let tc = train_config(cfg)?;
    let (_, smo) = svm_config(cfg)?;
    let ws = parse_width_scale(cfg)?;

    let images = read_images_key(cfg, "images_dir")?;
    let input_size = images.first().map(|i| i.width).unwrap_or(IMAGE_SIZE);
    cfg.set("input_size", input_size);
    let spec = ScenarioSpec {
        noise,
        augmentation,
        model,
        folds,
        split_mode,
        seed: cfg.get_u64("seed", 0).map_err(usage)?,
    };
    let result = run_scenario(&images, &spec, &tc, &smo, ws, input_size)
        .map_err(|e| data(e.to_string()))?;
    std::fs::write(out.join("report.csv"), ecgmi::crossval::report(std::slice::from_ref(&result)))
        .map_err(|e| data(format!("writing report: {e}")))?;
    std::fs::write(out.join("summary.txt"), summary(&result))
        .map_err(|e| data(format!("writing summary: {e}")))?;
    write_run_config(cfg, out)
}
