//! End-to-end ECG myocardial-infarction detection pipeline.
//!
//! The pipeline stages, in order:
//!
//! 1. [`ingest`] — parse WFDB `.hea`/`.dat` record pairs (PTB layout), pick
//!    Lead II, derive Normal/MI labels, or generate labeled synthetic ECG.
//! 2. [`filter`] — optional zero-phase Butterworth band-pass denoising.
//! 3. [`peaks`] / [`segment`] — R/P/T peak detection and fixed-length
//!    two-beat segment extraction.
//! 4. [`raster`] — 128×128 grayscale rasterization of each segment, with a
//!    binary PGM interchange format.
//! 5. [`augment`] — nine-crop augmentation (10× dataset growth).
//! 6. [`nn`] — from-scratch CNN (VGG-MI1): training, inference, and layer-11
//!    feature extraction for VGG-MI2.
//! 7. [`svm`] — Q-Gaussian kernel SVM trained by SMO (the VGG-MI2 head).
//! 8. [`metrics`] / [`crossval`] — confusion-matrix metrics, stratified
//!    ten-fold cross-validation, and the noise×augmentation scenario runner.

pub mod augment;
pub mod config;
pub mod crossval;
pub mod dataset;
pub mod filter;
pub mod ingest;
pub mod metrics;
pub mod nn;
pub mod peaks;
pub mod raster;
pub mod segment;
pub mod svm;
pub mod tensor;

/// Diagnosis class carried through the whole pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    Mi,
    /// Any other PTB diagnosis; dropped before segmentation.
    Other,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Mi => "mi",
            Label::Other => "other",
        }
    }

    pub fn from_str_loose(s: &str) -> Option<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Some(Label::Normal),
            "mi" => Some(Label::Mi),
            "other" => Some(Label::Other),
            _ => None,
        }
    }

    /// Class index used by the softmax head: Normal = 0, MI = 1.
    pub fn class_index(&self) -> usize {
        match self {
            Label::Normal => 0,
            Label::Mi => 1,
            Label::Other => panic!("Other records never reach the classifier"),
        }
    }
}

/// Noise condition of a segment: raw keeps the acquisition noise, filtered
/// has been band-passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseCondition {
    Raw,
    Filtered,
}

impl NoiseCondition {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseCondition::Raw => "raw",
            NoiseCondition::Filtered => "filtered",
        }
    }

    pub fn from_str_loose(s: &str) -> Option<NoiseCondition> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Some(NoiseCondition::Raw),
            "filtered" => Some(NoiseCondition::Filtered),
            _ => None,
        }
    }
}
