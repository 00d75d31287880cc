//! Butterworth band-pass filtering as cascaded second-order sections,
//! designed by analog prototype + bilinear transform, with optional
//! zero-phase (forward-backward) application.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("invalid cutoff: need 0 < low < high < fs/2 (got low {low}, high {high}, fs {fs})")]
    InvalidCutoff { low: f64, high: f64, fs: f64 },
    #[error("signal too short: {len} samples for order {order}")]
    SignalTooShort { len: usize, order: usize },
}

/// Band-pass design parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub low_cutoff: f64,
    pub high_cutoff: f64,
    pub order: usize,
    pub zero_phase: bool,
}

impl Default for FilterSpec {
    /// The pipeline's denoising band: 0.5–40 Hz, order 2, zero-phase.
    fn default() -> Self {
        FilterSpec {
            low_cutoff: 0.5,
            high_cutoff: 40.0,
            order: 2,
            zero_phase: true,
        }
    }
}

/// One biquad: b0 + b1 z⁻¹ + b2 z⁻² over 1 + a1 z⁻¹ + a2 z⁻².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

/// Design a Butterworth band-pass of the given prototype order as a cascade
/// of `order` biquads. Band edges sit at the −3 dB points.
pub fn design_bandpass(fs: f64, spec: &FilterSpec) -> Result<Vec<Biquad>, FilterError> {
    if !(spec.low_cutoff > 0.0 && spec.low_cutoff < spec.high_cutoff && spec.high_cutoff < fs / 2.0)
    {
        return Err(FilterError::InvalidCutoff {
            low: spec.low_cutoff,
            high: spec.high_cutoff,
            fs,
        });
    }
    assert!(spec.order >= 1, "order must be >= 1");
    let n = spec.order;
    // Prewarped analog band edges.
    let w1 = 2.0 * fs * (std::f64::consts::PI * spec.low_cutoff / fs).tan();
    let w2 = 2.0 * fs * (std::f64::consts::PI * spec.high_cutoff / fs).tan();
    let bw = w2 - w1;
    let w0 = (w1 * w2).sqrt();

    // Prototype low-pass poles on the unit circle, left half-plane.
    let mut analog_poles = Vec::with_capacity(2 * n);
    for k in 0..n {
        let theta = std::f64::consts::PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let p = Complex64::new(theta.cos(), theta.sin());
        // Low-pass → band-pass: s² − p·bw·s + w0² = 0.
        let half = p * (bw / 2.0);
        let disc = (half * half - Complex64::new(w0 * w0, 0.0)).sqrt();
        analog_poles.push(half + disc);
        analog_poles.push(half - disc);
    }

    // Bilinear transform; n zeros at z = 1 (from s = 0) and n at z = −1.
    let two_fs = 2.0 * fs;
    let digital_poles: Vec<Complex64> = analog_poles
        .iter()
        .map(|s| (Complex64::new(two_fs, 0.0) + s) / (Complex64::new(two_fs, 0.0) - s))
        .collect();

    // Group into conjugate pairs.
    let mut upper: Vec<Complex64> = digital_poles.iter().copied().filter(|p| p.im > 1e-12).collect();
    let mut real: Vec<Complex64> = digital_poles
        .iter()
        .copied()
        .filter(|p| p.im.abs() <= 1e-12)
        .collect();
    upper.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    real.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());

    let mut sections = Vec::with_capacity(n);
    for p in upper {
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-2.0 * p.re, p.norm_sqr()],
        });
    }
    let mut it = real.chunks_exact(2);
    for pair in &mut it {
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-(pair[0].re + pair[1].re), pair[0].re * pair[1].re],
        });
    }
    assert_eq!(sections.len(), n, "pole pairing produced a wrong section count");

    // Normalize to unit gain at the band's geometric center.
    let fc = (w0 / two_fs).atan() * fs / std::f64::consts::PI;
    let g = cascade_response(&sections, fs, fc).norm();
    let scale = 1.0 / g;
    for c in sections[0].b.iter_mut() {
        *c *= scale;
    }
    Ok(sections)
}

/// Complex frequency response of a biquad cascade at `freq` Hz.
pub fn cascade_response(sections: &[Biquad], fs: f64, freq: f64) -> Complex64 {
    let w = 2.0 * std::f64::consts::PI * freq / fs;
    let z1 = Complex64::new(0.0, -w).exp();
    let z2 = z1 * z1;
    let mut h = Complex64::new(1.0, 0.0);
    for s in sections {
        let num = Complex64::new(s.b[0], 0.0) + z1 * s.b[1] + z2 * s.b[2];
        let den = Complex64::new(1.0, 0.0) + z1 * s.a[0] + z2 * s.a[1];
        h *= num / den;
    }
    h
}

fn run_cascade(sections: &[Biquad], signal: &mut [f64]) {
    for s in sections {
        // Direct form II transposed.
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for x in signal.iter_mut() {
            let y = s.b[0] * *x + s1;
            s1 = s.b[1] * *x - s.a[0] * y + s2;
            s2 = s.b[2] * *x - s.a[1] * y;
            *x = y;
        }
    }
}

/// Zero-pad length after which the cascade's impulse response has decayed
/// below f64 resolution, from the slowest pole radius.
fn transient_len(sections: &[Biquad]) -> usize {
    let r_max = sections
        .iter()
        .map(|s| s.a[1].abs().sqrt())
        .fold(0.0f64, f64::max)
        .min(0.999999);
    let t = (1e-18f64.ln() / r_max.ln()).ceil() as usize;
    t.clamp(64, 200_000)
}

/// Apply the band-pass to a signal. With `zero_phase`, the cascade runs
/// forward then backward (magnitude squared, zero phase distortion) over a
/// zero-padded buffer long enough that edge transients die out, which makes
/// the operation commute exactly with time reversal. Output length equals
/// input length.
pub fn bandpass_filter(signal: &[f64], fs: f64, spec: &FilterSpec) -> Result<Vec<f64>, FilterError> {
    if signal.len() <= 3 * spec.order {
        return Err(FilterError::SignalTooShort {
            len: signal.len(),
            order: spec.order,
        });
    }
    let sections = design_bandpass(fs, spec)?;
    if !spec.zero_phase {
        let mut out = signal.to_vec();
        run_cascade(&sections, &mut out);
        return Ok(out);
    }
    let pad = transient_len(&sections);
    let mut buf = vec![0.0; signal.len() + 2 * pad];
    buf[pad..pad + signal.len()].copy_from_slice(signal);
    run_cascade(&sections, &mut buf);
    buf.reverse();
    run_cascade(&sections, &mut buf);
    buf.reverse();
    Ok(buf[pad..pad + signal.len()].to_vec())
}
