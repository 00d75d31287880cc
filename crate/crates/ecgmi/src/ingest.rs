//! WFDB record ingest (PTB layout): `.hea` header parsing, format-16 signal
//! decoding, diagnosis labeling, lead selection, and a seeded synthetic ECG
//! generator for dataset-free testing.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::Label;

/// Default ADC gain when the header omits it, per WFDB convention.
pub const DEFAULT_ADC_GAIN: f64 = 200.0;
/// Default sampling frequency when the header omits it, per WFDB convention.
pub const DEFAULT_SAMPLING_RATE: f64 = 250.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported storage format {0} (only format 16 is supported)")]
    UnsupportedFormat(i64),
    #[error("truncated data: need {needed} bytes, got {got}")]
    TruncatedData { needed: usize, got: usize },
    #[error("checksum mismatch on signal {signal}: expected {expected}, computed {computed}")]
    ChecksumMismatch {
        signal: usize,
        expected: i16,
        computed: i16,
    },
    #[error("lead not found: {0}")]
    LeadNotFound(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-channel description from one header signal line.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub lead_name: String,
    /// ADC units per millivolt.
    pub adc_gain: f64,
    pub adc_baseline: i32,
    /// Storage format code; only 16 is accepted.
    pub storage_format: i64,
    pub initial_value: i32,
    pub checksum: i16,
}

/// Parsed `.hea` header.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalHeader {
    pub record_name: String,
    pub n_signals: usize,
    pub sampling_rate: f64,
    pub n_samples: usize,
    pub signals: Vec<SignalSpec>,
    /// Comment lines (leading `#` stripped, trimmed).
    pub comments: Vec<String>,
}

/// Multi-lead record with samples converted to millivolts.
#[derive(Debug, Clone)]
pub struct EcgRecord {
    pub header: SignalHeader,
    /// `samples[ch][t]` in mV; `samples.len() == header.n_signals`.
    pub samples: Vec<Vec<f64>>,
    pub label: Label,
}

/// Parse a WFDB `.hea` header.
///
/// Record line: `name n_signals fs n_samples`; one signal line per channel:
/// `file format gain(baseline)/units adc_res adc_zero init_value checksum
/// blocksize description`. Lines starting with `#` are comments. Absent gain
/// defaults to 200 adu/mV, absent baseline to the adc-zero field (or 0).
pub fn parse_header(text: &str) -> Result<SignalHeader, IngestError> {
    let mut lines = Vec::new();
    let mut comments = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
        } else {
            lines.push(line);
        }
    }
    let record_line = *lines
        .first()
        .ok_or_else(|| IngestError::MalformedHeader("missing record line".into()))?;
    let tokens: Vec<&str> = record_line.split_whitespace().collect();
    if tokens.len() < 2 {
        return Err(IngestError::MalformedHeader(format!(
            "record line needs at least `name n_signals`: {record_line:?}"
        )));
    }
    // Record name may carry a /segments suffix in multi-segment headers.
    let record_name = tokens[0].split('/').next().unwrap_or(tokens[0]).to_string();
    let n_signals: usize = tokens[1]
        .parse()
        .map_err(|_| IngestError::MalformedHeader(format!("bad signal count {:?}", tokens[1])))?;
    if n_signals < 1 {
        return Err(IngestError::MalformedHeader("n_signals must be >= 1".into()));
    }
    // fs may carry /counter-frequency; take the leading number.
    let sampling_rate = match tokens.get(2) {
        Some(t) => {
            let lead = t.split('/').next().unwrap_or(t);
            lead.parse::<f64>()
                .map_err(|_| IngestError::MalformedHeader(format!("bad sampling rate {t:?}")))?
        }
        None => DEFAULT_SAMPLING_RATE,
    };
    if !(sampling_rate > 0.0) {
        return Err(IngestError::MalformedHeader("sampling rate must be > 0".into()));
    }
    let n_samples: usize = match tokens.get(3) {
        Some(t) => t
            .parse()
            .map_err(|_| IngestError::MalformedHeader(format!("bad sample count {t:?}")))?,
        None => 0,
    };

    let signal_lines = &lines[1..];
    if signal_lines.len() < n_signals {
        return Err(IngestError::MalformedHeader(format!(
            "record line declares {n_signals} signals but only {} signal lines follow",
            signal_lines.len()
        )));
    }
    let mut signals = Vec::with_capacity(n_signals);
    for (idx, line) in signal_lines.iter().take(n_signals).enumerate() {
        signals.push(parse_signal_line(line, idx)?);
    }
    Ok(SignalHeader {
        record_name,
        n_signals,
        sampling_rate,
        n_samples,
        signals,
        comments,
    })
}

fn parse_signal_line(line: &str, idx: usize) -> Result<SignalSpec, IngestError> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() < 2 {
        return Err(IngestError::MalformedHeader(format!(
            "signal line needs at least `file format`: {line:?}"
        )));
    }
    // Format may carry xN / :N / +N modifiers; the leading integer is the code.
    let fmt_digits: String = tokens[1]
        .chars()
        .take_while(|c| c.is_ascii_digit())
        .collect();
    let storage_format: i64 = fmt_digits
        .parse()
        .map_err(|_| IngestError::MalformedHeader(format!("bad format {:?}", tokens[1])))?;
    if storage_format != 16 {
        return Err(IngestError::UnsupportedFormat(storage_format));
    }

    // Gain field: `gain(baseline)/units`, all three parts optional.
    let (mut adc_gain, mut baseline): (f64, Option<i32>) = (DEFAULT_ADC_GAIN, None);
    if let Some(tok) = tokens.get(2) {
        let no_units = tok.split('/').next().unwrap_or(tok);
        let (gain_part, base_part) = match no_units.find('(') {
            Some(open) => {
                let close = no_units.find(')').unwrap_or(no_units.len());
                (&no_units[..open], Some(&no_units[open + 1..close]))
            }
            None => (no_units, None),
        };
        if let Ok(g) = gain_part.parse::<f64>() {
            if g != 0.0 {
                adc_gain = g;
            }
        }
        if let Some(b) = base_part {
            baseline = b.parse::<i32>().ok();
        }
    }
    if !(adc_gain > 0.0) {
        return Err(IngestError::MalformedHeader(format!(
            "adc gain must be > 0 on signal {idx}"
        )));
    }
    let adc_zero: i32 = tokens
        .get(4)
        .and_then(|t| t.parse().ok())
        .unwrap_or(0);
    let initial_value: i32 = tokens
        .get(5)
        .and_then(|t| t.parse().ok())
        .unwrap_or(adc_zero);
    let checksum: i16 = tokens
        .get(6)
        .and_then(|t| t.parse().ok())
        .unwrap_or(0);
    let lead_name = if tokens.len() > 8 {
        tokens[8..].join(" ")
    } else {
        format!("sig{idx}")
    };
    Ok(SignalSpec {
        lead_name,
        adc_gain,
        adc_baseline: baseline.unwrap_or(adc_zero),
        storage_format,
        initial_value,
        checksum,
    })
}

/// Serialize a header back to `.hea` text; `parse_header(write_header(h))`
/// round-trips field-for-field.
pub fn write_header(h: &SignalHeader) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {} {}",
        h.record_name, h.n_signals, h.sampling_rate, h.n_samples
    );
    for s in &h.signals {
        let _ = writeln!(
            out,
            "{}.dat {} {}({})/mV 16 0 {} {} 0 {}",
            h.record_name, s.storage_format, s.adc_gain, s.adc_baseline, s.initial_value,
            s.checksum, s.lead_name
        );
    }
    for c in &h.comments {
        let _ = writeln!(out, "# {c}");
    }
    out
}

/// Decode a format-16 `.dat` byte stream: little-endian two's-complement
/// 16-bit samples, channel-interleaved frame by frame.
/// mV = (adu − adc_baseline) / adc_gain. Trailing bytes beyond the declared
/// sample count are ignored; with `strict_checksums` the per-channel 16-bit
/// sum of raw adu values must match the header.
pub fn read_signals(
    header: &SignalHeader,
    bytes: &[u8],
    strict_checksums: bool,
) -> Result<Vec<Vec<f64>>, IngestError> {
    let needed = 2 * header.n_signals * header.n_samples;
    if bytes.len() < needed {
        return Err(IngestError::TruncatedData {
            needed,
            got: bytes.len(),
        });
    }
    let mut channels = vec![Vec::with_capacity(header.n_samples); header.n_signals];
    let mut sums = vec![0i16; header.n_signals];
    for frame in 0..header.n_samples {
        for ch in 0..header.n_signals {
            let off = 2 * (frame * header.n_signals + ch);
            let adu = i16::from_le_bytes([bytes[off], bytes[off + 1]]);
            sums[ch] = sums[ch].wrapping_add(adu);
            let spec = &header.signals[ch];
            channels[ch].push((adu as f64 - spec.adc_baseline as f64) / spec.adc_gain);
        }
    }
    if strict_checksums {
        for (ch, spec) in header.signals.iter().enumerate() {
            if sums[ch] != spec.checksum {
                return Err(IngestError::ChecksumMismatch {
                    signal: ch,
                    expected: spec.checksum,
                    computed: sums[ch],
                });
            }
        }
    }
    Ok(channels)
}

/// Derive the diagnosis label from header comment lines.
/// "Myocardial infarction" → MI, "Healthy control" → Normal, anything
/// else (including no diagnosis comment) → Other.
pub fn extract_label(comments: &[String]) -> Label {
    for c in comments {
        let lower = c.to_ascii_lowercase();
        if lower.contains("myocardial infarction") {
            return Label::Mi;
        }
        if lower.contains("healthy control") {
            return Label::Normal;
        }
    }
    Label::Other
}

/// Return one channel's full sample sequence by lead name
/// (case-insensitive, whitespace-trimmed).
pub fn select_lead<'a>(record: &'a EcgRecord, lead_name: &str) -> Result<&'a [f64], IngestError> {
    let want = lead_name.trim().to_ascii_lowercase();
    for (i, s) in record.header.signals.iter().enumerate() {
        if s.lead_name.trim().to_ascii_lowercase() == want {
            return Ok(&record.samples[i]);
        }
    }
    Err(IngestError::LeadNotFound(lead_name.to_string()))
}

/// Parameters for the synthetic ECG generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_beats: usize,
    pub heart_rate_bpm: f64,
    pub sampling_rate: f64,
    /// Uniform noise amplitude in mV.
    pub noise_amplitude: f64,
    pub class: Label,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_beats: 10,
            heart_rate_bpm: 60.0,
            sampling_rate: 1000.0,
            noise_amplitude: 0.0,
            class: Label::Normal,
            seed: 0,
        }
    }
}

/// One synthesized record plus exact ground-truth R-peak sample indices.
#[derive(Debug, Clone)]
pub struct SyntheticRecord {
    pub record: EcgRecord,
    pub r_peaks: Vec<usize>,
}

fn gaussian_bump(t: f64, center: f64, width: f64, amp: f64) -> f64 {
    let d = (t - center) / width;
    amp * (-0.5 * d * d).exp()
}

/// Generate a deterministic synthetic Lead-II record: a sum of Gaussian
/// bumps per beat (P, Q, R, S, T at fixed offsets from each R) plus uniform
/// noise. The frozen morphology (offsets in seconds, amplitudes in mV):
///
/// | wave | offset  | width | Normal amp | MI amp |
/// |------|---------|-------|------------|--------|
/// | P    | −0.150  | 0.025 |  0.15      |  0.15  |
/// | Q    | −0.035  | 0.010 | −0.10      | −0.35 (width 0.020) |
/// | R    |  0.000  | 0.012 |  1.00      |  1.00  |
/// | S    | +0.030  | 0.010 | −0.15      | −0.15  |
/// | ST   | +0.120  | 0.080 |  0.00      |  0.25  |
/// | T    | +0.250  | 0.060 |  0.30      |  0.30  |
///
/// The MI class deepens/widens the Q wave and elevates the ST region.
/// R peaks sit at `round((k + 0.5) * period)` for beat k.
pub fn generate_synthetic(spec: &SyntheticSpec) -> SyntheticRecord {
    assert!(spec.n_beats >= 1, "n_beats must be >= 1");
    assert!(
        (30.0..=220.0).contains(&spec.heart_rate_bpm),
        "heart rate out of [30, 220] bpm"
    );
    assert!(spec.noise_amplitude >= 0.0);
    let fs = spec.sampling_rate;
    let period = fs * 60.0 / spec.heart_rate_bpm;
    let n_samples = (spec.n_beats as f64 * period).round() as usize;
    let r_peaks: Vec<usize> = (0..spec.n_beats)
        .map(|k| ((k as f64 + 0.5) * period).round() as usize)
        .collect();

    let mi = spec.class == Label::Mi;
    let (q_amp, q_width) = if mi { (-0.35, 0.020) } else { (-0.10, 0.010) };
    let st_amp = if mi { 0.25 } else { 0.0 };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let t = i as f64 / fs;
        let mut v = 0.0;
        for &r in &r_peaks {
            let tr = r as f64 / fs;
            if (t - tr).abs() > 0.6 {
                continue;
            }
            v += gaussian_bump(t, tr - 0.150, 0.025, 0.15);
            v += gaussian_bump(t, tr - 0.035, q_width, q_amp);
            v += gaussian_bump(t, tr, 0.012, 1.0);
            v += gaussian_bump(t, tr + 0.030, 0.010, -0.15);
            v += gaussian_bump(t, tr + 0.120, 0.080, st_amp);
            v += gaussian_bump(t, tr + 0.250, 0.060, 0.30);
        }
        if spec.noise_amplitude > 0.0 {
            v += rng.gen_range(-spec.noise_amplitude..=spec.noise_amplitude);
        }
        samples.push(v);
    }

    let header = SignalHeader {
        record_name: format!("synth_{}_{:016x}", spec.class.as_str(), spec.seed),
        n_signals: 1,
        sampling_rate: fs,
        n_samples,
        signals: vec![SignalSpec {
            lead_name: "ii".to_string(),
            adc_gain: 2000.0,
            adc_baseline: 0,
            storage_format: 16,
            initial_value: 0,
            checksum: 0,
        }],
        comments: vec![match spec.class {
            Label::Mi => "Reason for admission: Myocardial infarction".to_string(),
            _ => "Reason for admission: Healthy control".to_string(),
        }],
    };
    SyntheticRecord {
        record: EcgRecord {
            header,
            samples: vec![samples],
            label: spec.class,
        },
        r_peaks,
    }
}

/// Encode a single-channel record to format-16 bytes using its gain/baseline,
/// updating the header checksum. Used by the `synth` subcommand and the
/// header round-trip tests.
pub fn encode_format16(record: &mut EcgRecord) -> Vec<u8> {
    let n_sig = record.header.n_signals;
    let n_samp = record.header.n_samples;
    let mut bytes = Vec::with_capacity(2 * n_sig * n_samp);
    let mut sums = vec![0i16; n_sig];
    for frame in 0..n_samp {
        for ch in 0..n_sig {
            let spec = &record.header.signals[ch];
            let adu = (record.samples[ch][frame] * spec.adc_gain + spec.adc_baseline as f64)
                .round()
                .clamp(i16::MIN as f64, i16::MAX as f64) as i16;
            sums[ch] = sums[ch].wrapping_add(adu);
            bytes.extend_from_slice(&adu.to_le_bytes());
        }
    }
    for (ch, sum) in sums.iter().enumerate() {
        record.header.signals[ch].checksum = *sum;
    }
    bytes
}

/// Manifest line per admitted record: `record_name<TAB>label<TAB>n_samples`.
pub fn write_manifest(records: &[(String, Label, usize)]) -> String {
    let mut out = String::new();
    for (name, label, n) in records {
        let _ = writeln!(out, "{name}\t{}\t{n}", label.as_str());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const PTB_HEADER: &str = "\
s0010_re 15 1000 38400
s0010_re.dat 16 2000(0)/mV 16 0 -489 -8337 0 i
s0010_re.dat 16 2000(0)/mV 16 0 -559 16546 0 ii
s0010_re.dat 16 2000(0)/mV 16 0 -69 10966 0 iii
s0010_re.dat 16 2000(0)/mV 16 0 524 -14546 0 avr
s0010_re.dat 16 2000(0)/mV 16 0 -210 6119 0 avl
s0010_re.dat 16 2000(0)/mV 16 0 -314 2227 0 avf
s0010_re.dat 16 2000(0)/mV 16 0 -137 -17750 0 v1
s0010_re.dat 16 2000(0)/mV 16 0 -162 13844 0 v2
s0010_re.dat 16 2000(0)/mV 16 0 -190 20567 0 v3
s0010_re.dat 16 2000(0)/mV 16 0 -178 -9509 0 v4
s0010_re.dat 16 2000(0)/mV 16 0 -239 8293 0 v5
s0010_re.dat 16 2000(0)/mV 16 0 -272 26434 0 v6
s0010_re.dat 16 2000(0)/mV 16 0 -119 12694 0 vx
s0010_re.dat 16 2000(0)/mV 16 0 29 -3208 0 vy
s0010_re.dat 16 2000(0)/mV 16 0 -1732 8429 0 vz
# age: 81
# sex: female
# Reason for admission: Myocardial infarction
";

    #[test]
    fn parses_ptb_record_line() {
        let h = parse_header(PTB_HEADER).unwrap();
        assert_eq!(h.record_name, "s0010_re");
        assert_eq!(h.n_signals, 15);
        assert_eq!(h.sampling_rate, 1000.0);
        assert_eq!(h.n_samples, 38400);
        assert_eq!(h.signals[1].lead_name, "ii");
        assert_eq!(h.signals[1].adc_gain, 2000.0);
        assert_eq!(h.comments.len(), 3);
    }

    #[test]
    fn missing_gain_defaults_to_200() {
        let h = parse_header("r 1 500 10\nr.dat 16\n").unwrap();
        assert_eq!(h.signals[0].adc_gain, DEFAULT_ADC_GAIN);
        assert_eq!(h.signals[0].adc_baseline, 0);
    }

    #[test]
    fn per_signal_gains_parsed() {
        let h = parse_header("r 2 500 10\nr.dat 16 2000(3)/mV 16 0 0 0 0 a\nr.dat 16 1000/mV 16 0 0 0 0 b\n")
            .unwrap();
        assert_eq!(h.signals[0].adc_gain, 2000.0);
        assert_eq!(h.signals[0].adc_baseline, 3);
        assert_eq!(h.signals[1].adc_gain, 1000.0);
        assert_eq!(h.signals[1].adc_baseline, 0);
    }

    #[test]
    fn missing_record_line_is_malformed() {
        assert!(matches!(
            parse_header("# only a comment\n"),
            Err(IngestError::MalformedHeader(_))
        ));
    }

    #[test]
    fn signal_count_mismatch_is_malformed() {
        assert!(matches!(
            parse_header("r 3 500 10\nr.dat 16\n"),
            Err(IngestError::MalformedHeader(_))
        ));
    }

    #[test]
    fn format_212_rejected() {
        assert!(matches!(
            parse_header("r 1 500 10\nr.dat 212\n"),
            Err(IngestError::UnsupportedFormat(212))
        ));
    }

    #[test]
    fn header_round_trip() {
        let h = parse_header(PTB_HEADER).unwrap();
        let h2 = parse_header(&write_header(&h)).unwrap();
        assert_eq!(h, h2);
    }

    fn one_channel_header(gain: f64, baseline: i32, n_samples: usize) -> SignalHeader {
        SignalHeader {
            record_name: "t".into(),
            n_signals: 1,
            sampling_rate: 1000.0,
            n_samples,
            signals: vec![SignalSpec {
                lead_name: "ii".into(),
                adc_gain: gain,
                adc_baseline: baseline,
                storage_format: 16,
                initial_value: 0,
                checksum: 0,
            }],
            comments: vec![],
        }
    }

    #[test]
    fn adu_to_mv_conversion() {
        let h = one_channel_header(2000.0, 0, 2);
        let bytes: Vec<u8> = [0i16, 2000]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let ch = read_signals(&h, &bytes, false).unwrap();
        assert_eq!(ch[0], vec![0.0, 1.0]);
    }

    #[test]
    fn interleaved_channels_decoded() {
        let mut h = one_channel_header(1.0, 0, 2);
        h.n_signals = 2;
        h.signals.push(h.signals[0].clone());
        let bytes = [0x01u8, 0x00, 0x02, 0x00, 0x03, 0x00, 0x04, 0x00];
        let ch = read_signals(&h, &bytes, false).unwrap();
        assert_eq!(ch[0], vec![1.0, 3.0]);
        assert_eq!(ch[1], vec![2.0, 4.0]);
    }

    #[test]
    fn truncated_data_rejected() {
        let h = one_channel_header(1.0, 0, 4);
        assert!(matches!(
            read_signals(&h, &[0, 0, 0], false),
            Err(IngestError::TruncatedData { needed: 8, got: 3 })
        ));
    }

    #[test]
    fn trailing_bytes_ignored() {
        let h = one_channel_header(1.0, 0, 1);
        let ch = read_signals(&h, &[5, 0, 0xff, 0xff, 0xff], false).unwrap();
        assert_eq!(ch[0], vec![5.0]);
    }

    #[test]
    fn strict_checksum_enforced() {
        let mut h = one_channel_header(1.0, 0, 2);
        h.signals[0].checksum = 3;
        let bytes = [1u8, 0, 2, 0];
        assert!(read_signals(&h, &bytes, true).is_ok());
        h.signals[0].checksum = 4;
        assert!(matches!(
            read_signals(&h, &bytes, true),
            Err(IngestError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn decoding_is_linear_in_adu() {
        let h = one_channel_header(7.0, 0, 3);
        let enc = |vals: &[i16]| -> Vec<u8> { vals.iter().flat_map(|v| v.to_le_bytes()).collect() };
        let a = read_signals(&h, &enc(&[3, -5, 11]), false).unwrap();
        let b = read_signals(&h, &enc(&[9, -15, 33]), false).unwrap();
        for (x, y) in a[0].iter().zip(&b[0]) {
            assert!((3.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn label_extraction() {
        let c = |s: &str| vec![s.to_string()];
        assert_eq!(
            extract_label(&c("Reason for admission: Myocardial infarction")),
            Label::Mi
        );
        assert_eq!(
            extract_label(&c("Reason for admission: Healthy control")),
            Label::Normal
        );
        assert_eq!(
            extract_label(&c("Reason for admission: Dysrhythmia")),
            Label::Other
        );
        assert_eq!(extract_label(&[]), Label::Other);
    }

    #[test]
    fn lead_selection_case_insensitive() {
        let spec = SyntheticSpec::default();
        let rec = generate_synthetic(&spec).record;
        assert!(select_lead(&rec, "II").is_ok());
        assert!(select_lead(&rec, " ii ").is_ok());
        assert!(matches!(
            select_lead(&rec, "v9"),
            Err(IngestError::LeadNotFound(_))
        ));
    }

    #[test]
    fn ptb_lead_ii_is_channel_1() {
        let h = parse_header(PTB_HEADER).unwrap();
        assert_eq!(h.signals[1].lead_name, "ii");
    }

    #[test]
    fn synthetic_r_peaks_evenly_spaced() {
        let spec = SyntheticSpec {
            n_beats: 5,
            ..SyntheticSpec::default()
        };
        let s = generate_synthetic(&spec);
        assert_eq!(s.r_peaks.len(), 5);
        for w in s.r_peaks.windows(2) {
            assert_eq!(w[1] - w[0], 1000);
        }
        // R bump dominates: the signal peaks at each ground-truth index.
        let sig = &s.record.samples[0];
        for &r in &s.r_peaks {
            let lo = r.saturating_sub(400);
            let hi = (r + 400).min(sig.len());
            let argmax = (lo..hi)
                .max_by(|&a, &b| sig[a].partial_cmp(&sig[b]).unwrap())
                .unwrap();
            assert_eq!(argmax, r);
        }
    }

    #[test]
    fn synthetic_deterministic() {
        let spec = SyntheticSpec {
            noise_amplitude: 0.03,
            seed: 42,
            ..SyntheticSpec::default()
        };
        let a = generate_synthetic(&spec);
        let b = generate_synthetic(&spec);
        assert_eq!(a.record.samples, b.record.samples);
        assert_eq!(a.r_peaks, b.r_peaks);
    }

    #[test]
    fn noise_amplitude_bounds_deviation() {
        let clean = generate_synthetic(&SyntheticSpec::default());
        let noisy = generate_synthetic(&SyntheticSpec {
            noise_amplitude: 0.05,
            ..SyntheticSpec::default()
        });
        let max_dev = clean.record.samples[0]
            .iter()
            .zip(&noisy.record.samples[0])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_dev <= 0.05 + 1e-12, "max deviation {max_dev}");
    }

    #[test]
    fn format16_encode_round_trip() {
        let mut s = generate_synthetic(&SyntheticSpec::default());
        let bytes = encode_format16(&mut s.record);
        let decoded = read_signals(&s.record.header, &bytes, true).unwrap();
        let gain = s.record.header.signals[0].adc_gain;
        for (a, b) in s.record.samples[0].iter().zip(&decoded[0]) {
            assert!((a - b).abs() <= 0.5 / gain + 1e-12);
        }
    }

    #[test]
    fn manifest_format() {
        let m = write_manifest(&[
            ("a".into(), Label::Mi, 100),
            ("b".into(), Label::Normal, 200),
        ]);
        assert_eq!(m, "a\tmi\t100\nb\tnormal\t200\n");
    }
}
