//! R-peak detection (Pan–Tompkins style) with windowed P/T wave search.

use thiserror::Error;

use crate::filter::{bandpass_filter, FilterSpec};

#[derive(Debug, Error)]
pub enum PeakError {
    #[error("fewer than 3 R peaks detected")]
    NoBeatsFound,
    #[error("signal too short: {got} samples, need at least {need}")]
    SignalTooShort { got: usize, need: usize },
    #[error("sampling rate {0} Hz below the 250 Hz minimum")]
    SamplingRateTooLow(f64),
}

/// Detected fiducial points, strictly increasing within each sequence.
/// Every P precedes its paired R; every T follows it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeakAnnotations {
    pub r_indices: Vec<usize>,
    pub p_indices: Vec<usize>,
    pub t_indices: Vec<usize>,
}

/// Detect R, P and T peaks.
///
/// R pipeline: band-limit 5–15 Hz → five-point derivative → square →
/// 150 ms moving-window integration → adaptive dual threshold with a
/// 200 ms refractory period and missed-beat searchback. Each R is then
/// refined to the local maximum of the original signal in a window
/// reaching 150 ms back (the integrator delay) and 40 ms forward.
/// P = max in [R−200 ms, R−80 ms]; T = max in [R+120 ms, R+380 ms], both
/// clamped to midpoints between adjacent R peaks.
pub fn detect_peaks(signal: &[f64], fs: f64) -> Result<PeakAnnotations, PeakError> {
    if fs < 250.0 {
        return Err(PeakError::SamplingRateTooLow(fs));
    }
    let need = (2.0 * fs) as usize;
    if signal.len() < need {
        return Err(PeakError::SignalTooShort {
            got: signal.len(),
            need,
        });
    }

    let qrs_band = FilterSpec {
        low_cutoff: 5.0,
        high_cutoff: 15.0,
        order: 2,
        zero_phase: true,
    };
    let bp = bandpass_filter(signal, fs, &qrs_band).expect("fixed band is valid above 250 Hz");

    // Five-point derivative (zero-phase form), then squaring.
    let n = bp.len();
    let mut feat = vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        let d = (-bp[i - 2] - 2.0 * bp[i - 1] + 2.0 * bp[i + 1] + bp[i + 2]) / 8.0;
        feat[i] = d * d;
    }

    // 150 ms moving-window integration.
    let w = ((0.150 * fs) as usize).max(1);
    let mut integ = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        acc += feat[i];
        if i >= w {
            acc -= feat[i - w];
        }
        integ[i] = acc / w as f64;
    }

    let refractory = (0.200 * fs) as usize;
    let r_candidates = adaptive_threshold(&integ, fs, refractory);

    // Refine each candidate to the raw-signal maximum. The integrator
    // delays its peak by up to the window width, so search back over the
    // full 150 ms window (plus 40 ms forward), then drop refined peaks
    // that collapse into the refractory window of the previous one.
    let back = w;
    let fwd = (0.040 * fs) as usize;
    let mut r_indices: Vec<usize> = Vec::with_capacity(r_candidates.len());
    for &c in &r_candidates {
        let lo = c.saturating_sub(back);
        let hi = (c + fwd + 1).min(signal.len());
        let r = (lo..hi)
            .max_by(|&a, &b| signal[a].partial_cmp(&signal[b]).unwrap())
            .unwrap();
        match r_indices.last() {
            Some(&prev) if r <= prev + refractory => {
                if signal[r] > signal[prev] {
                    *r_indices.last_mut().unwrap() = r;
                }
            }
            _ => r_indices.push(r),
        }
    }

    if r_indices.len() < 3 {
        return Err(PeakError::NoBeatsFound);
    }

    let (p_indices, t_indices) = locate_p_t(signal, fs, &r_indices);
    Ok(PeakAnnotations {
        r_indices,
        p_indices,
        t_indices,
    })
}

/// Candidate QRS locations in the integrated feature signal: local maxima
/// passed through the Pan–Tompkins running SPK/NPK thresholds, with a
/// half-threshold searchback when an expected beat goes missing.
fn adaptive_threshold(integ: &[f64], fs: f64, refractory: usize) -> Vec<usize> {
    let mut maxima: Vec<usize> = Vec::new();
    for i in 1..integ.len().saturating_sub(1) {
        if integ[i] > integ[i - 1] && integ[i] >= integ[i + 1] && integ[i] > 0.0 {
            // Plateau rule: take the first sample of a flat top.
            if maxima.last().map_or(true, |&m| integ[m] != integ[i] || i > m + refractory) {
                maxima.push(i);
            }
        }
    }

    let lead_in = ((2.0 * fs) as usize).min(integ.len());
    let init_max = integ[..lead_in].iter().fold(0.0f64, |m, &v| m.max(v));
    let mut spk = init_max;
    let mut npk = init_max / 4.0;
    let mut accepted: Vec<usize> = Vec::new();
    let mut rr_avg = fs; // prior: 60 bpm
    let mut searchback_from = 0usize;

    let mut k = 0;
    while k < maxima.len() {
        let i = maxima[k];
        let peak = integ[i];
        let threshold = npk + 0.25 * (spk - npk);
        let since_last = accepted.last().map(|&l| i - l);
        let in_refractory = since_last.map_or(false, |d| d < refractory);
        if !in_refractory && peak > threshold {
            if let Some(d) = since_last {
                rr_avg = 0.875 * rr_avg + 0.125 * d as f64;
            }
            accepted.push(i);
            spk = 0.125 * peak + 0.875 * spk;
            searchback_from = k + 1;
        } else if !in_refractory {
            npk = 0.125 * peak + 0.875 * npk;
            // Searchback: the expected beat never arrived; re-scan the
            // skipped maxima against half the threshold.
            if since_last.map_or(false, |d| d as f64 > 1.66 * rr_avg) {
                let half_threshold = threshold / 2.0;
                let last = *accepted.last().unwrap();
                if let Some(&best) = maxima[searchback_from..=k]
                    .iter()
                    .filter(|&&m| m > last + refractory && integ[m] > half_threshold)
                    .max_by(|&&a, &&b| integ[a].partial_cmp(&integ[b]).unwrap())
                {
                    accepted.push(best);
                    accepted.sort_unstable();
                    spk = 0.25 * integ[best] + 0.75 * spk;
                    searchback_from = k + 1;
                }
            }
        }
        k += 1;
    }
    accepted
}

/// P and T locations for each R, clamped to midpoints between adjacent Rs
/// so the annotations never interleave.
fn locate_p_t(signal: &[f64], fs: f64, r_indices: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let ms = |m: f64| (m * fs) as usize;
    let mut p = Vec::with_capacity(r_indices.len());
    let mut t = Vec::with_capacity(r_indices.len());
    for (k, &r) in r_indices.iter().enumerate() {
        let prev_mid = if k > 0 {
            (r_indices[k - 1] + r) / 2 + 1
        } else {
            0
        };
        let next_mid = if k + 1 < r_indices.len() {
            (r + r_indices[k + 1]) / 2
        } else {
            signal.len()
        };

        let p_lo = r.saturating_sub(ms(0.200)).max(prev_mid);
        let p_hi = r.saturating_sub(ms(0.080)).max(p_lo + 1).min(r);
        if p_lo < p_hi {
            let idx = (p_lo..p_hi)
                .max_by(|&a, &b| signal[a].partial_cmp(&signal[b]).unwrap())
                .unwrap();
            if p.last().map_or(true, |&l| idx > l) && idx < r {
                p.push(idx);
            }
        }

        let t_lo = (r + ms(0.120)).min(next_mid.saturating_sub(1));
        let t_hi = (r + ms(0.380) + 1).min(next_mid).min(signal.len());
        if t_lo > r && t_lo < t_hi {
            let idx = (t_lo..t_hi)
                .max_by(|&a, &b| signal[a].partial_cmp(&signal[b]).unwrap())
                .unwrap();
            if t.last().map_or(true, |&l| idx > l) && idx > r {
                t.push(idx);
            }
        }
    }
    (p, t)
}
