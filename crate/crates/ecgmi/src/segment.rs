//! Fixed-length two-beat segment extraction, plus the binary segment dump
//! format used between pipeline stages.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::peaks::PeakAnnotations;
use crate::{Label, NoiseCondition};

/// Segment start anchor: this long before the first R of the pair.
pub const ANCHOR_BEFORE_R_SECS: f64 = 0.250;
/// Segment duration in seconds.
pub const SEGMENT_SECS: f64 = 2.0;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("too few beats: {0} R peaks, need at least 4")]
    TooFewBeats(usize),
    #[error("segment dump io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed segment index line: {0:?}")]
    MalformedIndex(String),
}

/// One fixed-duration Lead-II excerpt spanning two beats.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatSegment {
    /// Exactly `round(2 s × fs)` samples, zero-padded at the record tail.
    pub samples: Vec<f64>,
    pub source_record: String,
    pub start_index: usize,
    pub label: Label,
    pub noise_condition: NoiseCondition,
}

/// Output of [`segment_beats`]: the emitted segments plus the count of
/// windows dropped for containing a third R peak (heart rate too high) or
/// only one (too low).
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub segments: Vec<BeatSegment>,
    pub dropped: usize,
}

/// Cut two-beat segments: for each consecutive interior R pair (the first
/// and last beats are excluded), emit `round(2 s × fs)` samples starting
/// 250 ms before the pair's first R, zero-padding past the record tail.
/// Pairs advance one beat at a time, so successive segments overlap.
pub fn segment_beats(
    signal: &[f64],
    ann: &PeakAnnotations,
    fs: f64,
    source_record: &str,
    label: Label,
    noise_condition: NoiseCondition,
) -> Result<Segmentation, SegmentError> {
    let r = &ann.r_indices;
    let n = r.len();
    if n < 4 {
        return Err(SegmentError::TooFewBeats(n));
    }
    let len = (SEGMENT_SECS * fs).round() as usize;
    let anchor = (ANCHOR_BEFORE_R_SECS * fs).round() as usize;
    let mut segments = Vec::with_capacity(n - 3);
    let mut dropped = 0;
    // 1-based interior pairs (i, i+1) with 2 <= i and i+1 <= n-1.
    for i in 1..n - 2 {
        let start = r[i].saturating_sub(anchor);
        let end = start + len;
        let inside = r.iter().filter(|&&x| x >= start && x < end).count();
        if inside != 2 {
            dropped += 1;
            continue;
        }
        let mut samples = vec![0.0; len];
        let copy_end = end.min(signal.len());
        if start < copy_end {
            samples[..copy_end - start].copy_from_slice(&signal[start..copy_end]);
        }
        segments.push(BeatSegment {
            samples,
            source_record: source_record.to_string(),
            start_index: start,
            label,
            noise_condition,
        });
    }
    Ok(Segmentation { segments, dropped })
}

/// Write segments to `dir`: one `<id>.f64` file per segment (little-endian
/// 64-bit floats) plus an `index.tsv` of
/// `segment_id<TAB>record<TAB>label<TAB>noise_condition` lines.
pub fn write_segments(dir: &Path, segments: &[BeatSegment]) -> Result<(), SegmentError> {
    fs::create_dir_all(dir)?;
    let mut index = String::new();
    for (i, seg) in segments.iter().enumerate() {
        let id = format!("seg{:06}", i);
        let mut f = fs::File::create(dir.join(format!("{id}.f64")))?;
        let mut bytes = Vec::with_capacity(8 * seg.samples.len());
        for v in &seg.samples {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        f.write_all(&bytes)?;
        index.push_str(&format!(
            "{id}\t{}\t{}\t{}\n",
            seg.source_record,
            seg.label.as_str(),
            seg.noise_condition.as_str()
        ));
    }
    fs::write(dir.join("index.tsv"), index)?;
    Ok(())
}

/// Read a segment dump written by [`write_segments`]. Start indices are not
/// stored in the dump and come back as 0.
pub fn read_segments(dir: &Path) -> Result<Vec<BeatSegment>, SegmentError> {
    let index = fs::read_to_string(dir.join("index.tsv"))?;
    let mut segments = Vec::new();
    for line in index.lines() {
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 4 {
            return Err(SegmentError::MalformedIndex(line.to_string()));
        }
        let label = Label::from_str_loose(parts[2])
            .ok_or_else(|| SegmentError::MalformedIndex(line.to_string()))?;
        let noise = NoiseCondition::from_str_loose(parts[3])
            .ok_or_else(|| SegmentError::MalformedIndex(line.to_string()))?;
        let mut bytes = Vec::new();
        fs::File::open(dir.join(format!("{}.f64", parts[0])))?.read_to_end(&mut bytes)?;
        let samples = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        segments.push(BeatSegment {
            samples,
            source_record: parts[1].to_string(),
            start_index: 0,
            label,
            noise_condition: noise,
        });
    }
    Ok(segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_synthetic, SyntheticSpec};
    use crate::peaks::detect_peaks;

    fn annotations(r: Vec<usize>) -> PeakAnnotations {
        PeakAnnotations {
            r_indices: r,
            p_indices: vec![],
            t_indices: vec![],
        }
    }

    fn evenly_spaced(n: usize, period: usize) -> Vec<usize> {
        (0..n).map(|k| period / 2 + k * period).collect()
    }

    fn cut(r: Vec<usize>, signal_len: usize) -> Segmentation {
        let signal = vec![0.5; signal_len];
        segment_beats(
            &signal,
            &annotations(r),
            1000.0,
            "t",
            Label::Normal,
            NoiseCondition::Raw,
        )
        .unwrap()
    }

    #[test]
    fn four_beats_yield_one_segment() {
        let s = cut(evenly_spaced(4, 1000), 4000);
        assert_eq!(s.segments.len(), 1);
        assert_eq!(s.dropped, 0);
        // Pair (R_2, R_3), start 250 ms before R_2 = 1500.
        assert_eq!(s.segments[0].start_index, 1250);
        assert_eq!(s.segments[0].samples.len(), 2000);
    }

    #[test]
    fn n_beats_yield_n_minus_3_segments() {
        for n in 4..=8 {
            let s = cut(evenly_spaced(n, 1000), n * 1000);
            assert_eq!(s.segments.len(), n - 3, "n = {n}");
        }
    }

    #[test]
    fn too_few_beats_rejected() {
        let signal = vec![0.0; 3000];
        let err = segment_beats(
            &signal,
            &annotations(evenly_spaced(3, 1000)),
            1000.0,
            "t",
            Label::Normal,
            NoiseCondition::Raw,
        );
        assert!(matches!(err, Err(SegmentError::TooFewBeats(3))));
    }

    #[test]
    fn tail_zero_padded_to_full_length() {
        // Last interior pair starts at 3250 but the record ends at 4100.
        let s = cut(evenly_spaced(5, 1000), 4100);
        let last = s.segments.last().unwrap();
        assert_eq!(last.samples.len(), 2000);
        assert!(last.samples[..1850].iter().all(|&v| v == 0.5));
        assert!(last.samples[1850..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn high_heart_rate_windows_dropped() {
        // 150 bpm: period 400 ms, so a 2 s window catches 5 R peaks.
        let s = cut(evenly_spaced(10, 400), 4000);
        assert_eq!(s.segments.len(), 0);
        assert_eq!(s.dropped, 7);
    }

    #[test]
    fn every_segment_contains_exactly_two_rs() {
        let rec = generate_synthetic(&SyntheticSpec {
            n_beats: 12,
            heart_rate_bpm: 62.0,
            noise_amplitude: 0.02,
            seed: 5,
            ..SyntheticSpec::default()
        });
        let ann = detect_peaks(&rec.record.samples[0], 1000.0).unwrap();
        let s = segment_beats(
            &rec.record.samples[0],
            &ann,
            1000.0,
            "synth",
            Label::Normal,
            NoiseCondition::Raw,
        )
        .unwrap();
        assert!(!s.segments.is_empty());
        for seg in &s.segments {
            let inside = ann
                .r_indices
                .iter()
                .filter(|&&r| r >= seg.start_index && r < seg.start_index + 2000)
                .count();
            assert_eq!(inside, 2);
            assert_eq!(seg.samples.len(), 2000);
        }
    }

    #[test]
    fn dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = cut(evenly_spaced(6, 1000), 6000);
        write_segments(dir.path(), &s.segments).unwrap();
        let back = read_segments(dir.path()).unwrap();
        assert_eq!(back.len(), s.segments.len());
        for (a, b) in s.segments.iter().zip(&back) {
            assert_eq!(a.samples, b.samples);
            assert_eq!(a.label, b.label);
            assert_eq!(a.noise_condition, b.noise_condition);
            assert_eq!(a.source_record, b.source_record);
        }
    }
}
