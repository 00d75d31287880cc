//! Q-Gaussian kernel SVM trained by simplified SMO — the classification
//! head that sits on top of the network's second-FC feature vectors.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::Label;

const MODEL_MAGIC: &[u8; 6] = b"QGSVM\0";
const MODEL_VERSION_PLAIN: u8 = 1;
const MODEL_VERSION_STANDARDIZED: u8 = 2;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("feature dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("kernel parameter q must lie strictly inside (1, 3), got {0}")]
    InvalidQ(f64),
    #[error("inv_sigma_sq must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("training set must contain both classes")]
    SingleClassTraining,
    #[error("labels must be +1 or -1, got {0}")]
    InvalidLabel(f64),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("model must have at least one support vector")]
    EmptySupportSet,
    #[error("non-finite feature value in training data")]
    NonFiniteFeature,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad model file: {0}")]
    BadModelFile(String),
}

/// Q-Gaussian kernel parameters. Defaults: q = 1.5, 1/σ² = 0.5, which
/// reduces the kernel to (1 + ‖x−y‖²/6)^(−2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QGKernelParams {
    pub q: f64,
    pub inv_sigma_sq: f64,
}

impl Default for QGKernelParams {
    fn default() -> Self {
        QGKernelParams { q: 1.5, inv_sigma_sq: 0.5 }
    }
}

impl QGKernelParams {
    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.q > 1.0 && self.q < 3.0) {
            return Err(SvmError::InvalidQ(self.q));
        }
        if !(self.inv_sigma_sq > 0.0 && self.inv_sigma_sq.is_finite()) {
            return Err(SvmError::InvalidSigma(self.inv_sigma_sq));
        }
        Ok(())
    }
}

/// K(x, y) = (1 + (q−1)/(3−q)·(1/σ²)·‖x−y‖²)^(1/(1−q)).
pub fn qg_kernel(x: &[f64], y: &[f64], p: &QGKernelParams) -> Result<f64, SvmError> {
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch { left: x.len(), right: y.len() });
    }
    p.validate()?;
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let base = 1.0 + (p.q - 1.0) / (3.0 - p.q) * p.inv_sigma_sq * d2;
    Ok(base.powf(1.0 / (1.0 - p.q)))
}

/// SMO solver knobs. C and the tolerance are conventional defaults; the
/// seed drives the random second-index fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoConfig {
    pub c: f64,
    pub kkt_tolerance: f64,
    pub max_passes: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Standardize features to zero mean / unit variance before training
    /// (off by default; the transform is stored in the model).
    pub standardize: bool,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            c: 1.0,
            kkt_tolerance: 1e-3,
            max_passes: 10,
            max_iterations: 100_000,
            seed: 0,
            standardize: false,
        }
    }
}

/// Per-dimension affine transform applied to inputs before the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Trained binary model. `dual_coeffs[i]` is αᵢ·yᵢ; the class map is
/// −1 → Normal, +1 → MI.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    pub kernel: QGKernelParams,
    pub standardizer: Option<Standardizer>,
    /// Set when the solver stopped on the iteration cap rather than
    /// convergence; the model is the best found so far.
    pub iteration_limit_hit: bool,
}

impl SvmModel {
    fn validate(&self) -> Result<(), SvmError> {
        if self.support_vectors.is_empty() {
            return Err(SvmError::EmptySupportSet);
        }
        if self.support_vectors.len() != self.dual_coeffs.len() {
            return Err(SvmError::BadModelFile(
                "support vector / coefficient count mismatch".into(),
            ));
        }
        self.kernel.validate()
    }

    /// Decision value f(x) = Σ (αᵢyᵢ)·K(sᵢ, x) + bias.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64, SvmError> {
        let stdx;
        let x = match &self.standardizer {
            Some(s) => {
                stdx = s.apply(x);
                &stdx[..]
            }
            None => x,
        };
        let mut f = self.bias;
        for (sv, &coef) in self.support_vectors.iter().zip(&self.dual_coeffs) {
            f += coef * qg_kernel(sv, x, &self.kernel)?;
        }
        Ok(f)
    }
}

/// Classify one feature vector; a decision value of exactly zero maps to
/// Normal (the conservative side).
pub fn predict_svm(model: &SvmModel, x: &[f64]) -> Result<(Label, f64), SvmError> {
    let f = model.decision_value(x)?;
    let label = if f > 0.0 { Label::Mi } else { Label::Normal };
    Ok((label, f))
}

/// Dual objective W(α) = Σαᵢ − ½ ΣΣ αᵢαⱼyᵢyⱼK(xᵢ,xⱼ) for a trained
/// model evaluated against its own training set.
pub fn dual_objective(alphas: &[f64], labels: &[f64], gram: &[Vec<f64>]) -> f64 {
    let n = alphas.len();
    let mut obj: f64 = alphas.iter().sum();
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            obj -= 0.5 * alphas[i] * alphas[j] * labels[i] * labels[j] * gram[i][j];
        }
    }
    obj
}

/// Precompute the full Gram matrix (plain cache; training sets here are
/// small enough to hold it whole).
pub fn gram_matrix(features: &[Vec<f64>], kernel: &QGKernelParams) -> Result<Vec<Vec<f64>>, SvmError> {
    let n = features.len();
    let mut gram = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let k = qg_kernel(&features[i], &features[j], kernel)?;
            gram[i][j] = k;
            gram[j][i] = k;
        }
    }
    Ok(gram)
}

/// Result of training: the model plus the final dual variables (exposed
/// so callers can audit feasibility and the objective value).
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub model: SvmModel,
    pub alphas: Vec<f64>,
}

/// Train a binary QG-SVM with simplified SMO: scan for an αᵢ violating
/// the KKT conditions within tolerance, pair it with the αⱼ maximizing
/// |Eᵢ−Eⱼ| (seeded-random fallback when the heuristic is degenerate),
/// optimize the pair analytically with [0, C] clipping, and update the
/// bias from non-bound support vectors. Stops after `max_passes`
/// consecutive full passes without an update, or at `max_iterations`
/// (then the best-so-far model is returned with a warning flag).
pub fn train_svm(
    features: &[Vec<f64>],
    labels: &[f64],
    kernel: QGKernelParams,
    cfg: &SmoConfig,
) -> Result<SmoSolution, SvmError> {
    kernel.validate()?;
    if features.is_empty() {
        return Err(SvmError::EmptyTrainingSet);
    }
    if features.len() != labels.len() {
        return Err(SvmError::DimensionMismatch { left: features.len(), right: labels.len() });
    }
    for y in labels {
        if *y != 1.0 && *y != -1.0 {
            return Err(SvmError::InvalidLabel(*y));
        }
    }
    if !labels.iter().any(|&y| y > 0.0) || !labels.iter().any(|&y| y < 0.0) {
        return Err(SvmError::SingleClassTraining);
    }
    let dim = features[0].len();
    for f in features {
        if f.len() != dim {
            return Err(SvmError::DimensionMismatch { left: dim, right: f.len() });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFiniteFeature);
        }
    }

    let standardizer = if cfg.standardize { Some(fit_standardizer(features, dim)) } else { None };
    let owned: Vec<Vec<f64>>;
    let xs: &[Vec<f64>] = match &standardizer {
        Some(s) => {
            owned = features.iter().map(|f| s.apply(f)).collect();
            &owned
        }
        None => features,
    };

    let n = xs.len();
    let gram = gram_matrix(xs, &kernel)?;
    let mut alphas = vec![0.0_f64; n];
    let mut bias = 0.0_f64;
    // f_cache[i] = Σ αⱼyⱼK(i,j) + b, maintained incrementally.
    let mut f_cache = vec![0.0_f64; n];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let tol = cfg.kkt_tolerance;
    let c = cfg.c;
    let mut passes_without_update = 0;
    let mut iterations = 0usize;
    let mut hit_limit = false;

    'outer: while passes_without_update < cfg.max_passes {
        let mut updated_this_pass = false;
        for i in 0..n {
            if iterations >= cfg.max_iterations {
                hit_limit = true;
                break 'outer;
            }
            iterations += 1;
            let e_i = f_cache[i] - labels[i];
            let violates = (labels[i] * e_i < -tol && alphas[i] < c)
                || (labels[i] * e_i > tol && alphas[i] > 0.0);
            if !violates {
                continue;
            }
            // Second-choice heuristic: maximize |Eᵢ−Eⱼ|.
            let mut j_best = None;
            let mut gap_best = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let gap = (e_i - (f_cache[j] - labels[j])).abs();
                if gap > gap_best {
                    gap_best = gap;
                    j_best = Some(j);
                }
            }
            // Second-choice hierarchy: the best-gap partner first, then
            // every other partner starting from a seeded-random offset,
            // so a violator is never abandoned just because one pair was
            // unusable (bounds coincide or non-positive curvature).
            let mut progressed = false;
            if let Some(j) = j_best {
                progressed =
                    optimize_pair(i, j, &gram, labels, c, &mut alphas, &mut bias, &mut f_cache);
            }
            if !progressed {
                let start = rng.gen_range(0..n);
                for k in 0..n {
                    let j = (start + k) % n;
                    if j == i || Some(j) == j_best {
                        continue;
                    }
                    if optimize_pair(i, j, &gram, labels, c, &mut alphas, &mut bias, &mut f_cache)
                    {
                        progressed = true;
                        break;
                    }
                }
            }
            if progressed {
                updated_this_pass = true;
            }
        }
        if updated_this_pass {
            passes_without_update = 0;
        } else {
            passes_without_update += 1;
        }
    }

    let mut support_vectors = Vec::new();
    let mut dual_coeffs = Vec::new();
    for i in 0..n {
        if alphas[i] > 0.0 {
            support_vectors.push(xs[i].clone());
            dual_coeffs.push(alphas[i] * labels[i]);
        }
    }
    let model = SvmModel {
        support_vectors,
        dual_coeffs,
        bias,
        kernel,
        standardizer,
        iteration_limit_hit: hit_limit,
    };
    model.validate()?;
    Ok(SmoSolution { model, alphas })
}

fn fit_standardizer(features: &[Vec<f64>], dim: usize) -> Standardizer {
    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for f in features {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v / n;
        }
    }
    let mut scale = vec![0.0; dim];
    for f in features {
        for ((s, m), v) in scale.iter_mut().zip(&mean).zip(f) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in &mut scale {
        *s = s.sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    Standardizer { mean, scale }
}

/// Analytic joint optimization of (αᵢ, αⱼ) with box clipping; returns
/// whether a meaningful update happened.
#[allow(clippy::too_many_arguments)]
fn optimize_pair(
    i: usize,
    j: usize,
    gram: &[Vec<f64>],
    labels: &[f64],
    c: f64,
    alphas: &mut [f64],
    bias: &mut f64,
    f_cache: &mut [f64],
) -> bool {
    let (yi, yj) = (labels[i], labels[j]);
    let (ai_old, aj_old) = (alphas[i], alphas[j]);
    let e_i = f_cache[i] - yi;
    let e_j = f_cache[j] - yj;

    let (lo, hi) = if yi != yj {
        ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
    } else {
        ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
    };
    if lo >= hi {
        return false;
    }
    let eta = 2.0 * gram[i][j] - gram[i][i] - gram[j][j];
    if eta >= 0.0 {
        return false;
    }
    let mut aj_new = aj_old - yj * (e_i - e_j) / eta;
    aj_new = aj_new.clamp(lo, hi);
    if (aj_new - aj_old).abs() < 1e-12 {
        return false;
    }
    // The identity keeps ai_new in [0, c] exactly; clamp to absorb
    // floating-point rounding at the box edges.
    let ai_new = (ai_old + yi * yj * (aj_old - aj_new)).clamp(0.0, c);

    let b1 = *bias - e_i - yi * (ai_new - ai_old) * gram[i][i] - yj * (aj_new - aj_old) * gram[i][j];
    let b2 = *bias - e_j - yi * (ai_new - ai_old) * gram[i][j] - yj * (aj_new - aj_old) * gram[j][j];
    let b_new = if ai_new > 0.0 && ai_new < c {
        b1
    } else if aj_new > 0.0 && aj_new < c {
        b2
    } else {
        (b1 + b2) / 2.0
    };

    let db = b_new - *bias;
    let di = yi * (ai_new - ai_old);
    let dj = yj * (aj_new - aj_old);
    for (k, f) in f_cache.iter_mut().enumerate() {
        *f += di * gram[i][k] + dj * gram[j][k] + db;
    }
    alphas[i] = ai_new;
    alphas[j] = aj_new;
    *bias = b_new;
    true
}

/// One-vs-rest reduction over `k ≥ 2` class indices: class `c`'s model is
/// trained with label +1 for class `c` and −1 for the rest.
pub fn train_one_vs_rest(
    features: &[Vec<f64>],
    labels: &[usize],
    kernel: QGKernelParams,
    cfg: &SmoConfig,
) -> Result<Vec<SvmModel>, SvmError> {
    if features.len() != labels.len() {
        return Err(SvmError::DimensionMismatch { left: features.len(), right: labels.len() });
    }
    let k = match labels.iter().max() {
        Some(&m) => m + 1,
        None => return Err(SvmError::EmptyTrainingSet),
    };
    if k < 2 || !(0..k).all(|c| labels.iter().any(|&l| l == c)) {
        return Err(SvmError::SingleClassTraining);
    }
    let mut models = Vec::with_capacity(k);
    for class in 0..k {
        let y: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
        models.push(train_svm(features, &y, kernel, cfg)?.model);
    }
    Ok(models)
}

/// Argmax over per-class decision values; ties resolve to the lowest
/// class index.
pub fn predict_one_vs_rest(models: &[SvmModel], x: &[f64]) -> Result<(usize, Vec<f64>), SvmError> {
    if models.is_empty() {
        return Err(SvmError::EmptySupportSet);
    }
    let mut values = Vec::with_capacity(models.len());
    for m in models {
        values.push(m.decision_value(x)?);
    }
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    Ok((best, values))
}

/// Serialize a model: magic, version, q, 1/σ², bias, support-vector and
/// dimension counts, then coefficients and vectors as little-endian
/// 64-bit floats. Round-trips bitwise.
pub fn save_model(model: &SvmModel, path: &Path) -> Result<(), SvmError> {
    model.validate()?;
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.push(if model.standardizer.is_some() {
        MODEL_VERSION_STANDARDIZED
    } else {
        MODEL_VERSION_PLAIN
    });
    out.extend_from_slice(&model.kernel.q.to_le_bytes());
    out.extend_from_slice(&model.kernel.inv_sigma_sq.to_le_bytes());
    out.extend_from_slice(&model.bias.to_le_bytes());
    let n = model.support_vectors.len();
    let dim = model.support_vectors[0].len();
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(dim as u64).to_le_bytes());
    for c in &model.dual_coeffs {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for sv in &model.support_vectors {
        for v in sv {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(s) = &model.standardizer {
        for v in s.mean.iter().chain(&s.scale) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SvmModel, SvmError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cur = &bytes[..];
    let magic = take(&mut cur, 6)?;
    if magic != MODEL_MAGIC {
        return Err(SvmError::BadModelFile("bad magic".into()));
    }
    let version = take(&mut cur, 1)?[0];
    if version != MODEL_VERSION_PLAIN && version != MODEL_VERSION_STANDARDIZED {
        return Err(SvmError::BadModelFile(format!("unknown version {version}")));
    }
    let q = read_f64(&mut cur)?;
    let inv_sigma_sq = read_f64(&mut cur)?;
    let bias = read_f64(&mut cur)?;
    let n = read_u64(&mut cur)? as usize;
    let dim = read_u64(&mut cur)? as usize;
    let mut dual_coeffs = Vec::with_capacity(n);
    for _ in 0..n {
        dual_coeffs.push(read_f64(&mut cur)?);
    }
    let mut support_vectors = Vec::with_capacity(n);
    for _ in 0..n {
        let mut sv = Vec::with_capacity(dim);
        for _ in 0..dim {
            sv.push(read_f64(&mut cur)?);
        }
        support_vectors.push(sv);
    }
    let standardizer = if version == MODEL_VERSION_STANDARDIZED {
        let mut mean = Vec::with_capacity(dim);
        for _ in 0..dim {
            mean.push(read_f64(&mut cur)?);
        }
        let mut scale = Vec::with_capacity(dim);
        for _ in 0..dim {
            scale.push(read_f64(&mut cur)?);
        }
        Some(Standardizer { mean, scale })
    } else {
        None
    };
    if !cur.is_empty() {
        return Err(SvmError::BadModelFile("trailing bytes".into()));
    }
    let model = SvmModel {
        support_vectors,
        dual_coeffs,
        bias,
        kernel: QGKernelParams { q, inv_sigma_sq },
        standardizer,
        iteration_limit_hit: false,
    };
    model.validate()?;
    Ok(model)
}

fn take<'a>(cur: &mut &'a [u8], n: usize) -> Result<&'a [u8], SvmError> {
    if cur.len() < n {
        return Err(SvmError::BadModelFile("truncated file".into()));
    }
    let (head, tail) = cur.split_at(n);
    *cur = tail;
    Ok(head)
}

fn read_f64(cur: &mut &[u8]) -> Result<f64, SvmError> {
    let b = take(cur, 8)?;
    Ok(f64::from_le_bytes(b.try_into().unwrap()))
}

fn read_u64(cur: &mut &[u8]) -> Result<u64, SvmError> {
    let b = take(cur, 8)?;
    Ok(u64::from_le_bytes(b.try_into().unwrap()))
}
