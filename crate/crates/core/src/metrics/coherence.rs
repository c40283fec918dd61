use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Welch estimator settings for the magnitude-squared coherence.
#[derive(Debug, Clone)]
pub struct WelchOptions {
    pub segment: usize,
    pub hop: usize,
    /// Bins are kept where `P_aa · P_bb` exceeds this fraction of its peak.
    pub relative_floor: f64,
    pub min_segments: usize,
}

impl Default for WelchOptions {
    fn default() -> Self {
        Self {
            segment: 1024,
            hop: 512,
            relative_floor: 1e-12,
            min_segments: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherence {
    /// Minimum coherence over the retained bins, or 1 if none was retained.
    pub value: f64,
    /// Set when both signals are numerically silent.
    pub degenerate: bool,
    pub bins: usize,
}

/// Minimum over frequency of the Welch magnitude-squared coherence of two
/// equally sampled signals. Each segment has its mean removed and a periodic
/// Hann window applied; the DC bin is excluded.
pub fn min_msc_coherence(a: &[f64], b: &[f64], options: &WelchOptions) -> Result<Coherence> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (seg, hop) = (options.segment, options.hop);
    if seg < 2 || hop == 0 || a.len() < seg {
        return Err(Error::Domain(format!(
            "signal of length {} too short for segment {seg}",
            a.len()
        )));
    }
    let count = (a.len() - seg) / hop + 1;
    if count < options.min_segments {
        return Err(Error::Domain(format!(
            "{count} Welch segments, at least {} required",
            options.min_segments
        )));
    }
    let window: Vec<f64> = (0..seg)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / seg as f64).cos())
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let bins = seg / 2 + 1;
    let mut paa = vec![0.0; bins];
    let mut pbb = vec![0.0; bins];
    let mut pab = vec![Complex64::new(0.0, 0.0); bins];
    let mut xa = vec![Complex64::new(0.0, 0.0); seg];
    let mut xb = vec![Complex64::new(0.0, 0.0); seg];
    for s in 0..count {
        let start = s * hop;
        let fill = |x: &[f64], out: &mut [Complex64]| {
            let chunk = &x[start..start + seg];
            let mean = chunk.iter().sum::<f64>() / seg as f64;
            for (k, v) in chunk.iter().enumerate() {
                out[k] = Complex64::new((v - mean) * window[k], 0.0);
            }
        };
        fill(a, &mut xa);
        fill(b, &mut xb);
        fft.process(&mut xa);
        fft.process(&mut xb);
        for k in 0..bins {
            paa[k] += xa[k].norm_sqr();
            pbb[k] += xb[k].norm_sqr();
            pab[k] += xa[k].conj() * xb[k];
        }
    }
    let peak = (1..bins).map(|k| paa[k] * pbb[k]).fold(0.0, f64::max);
    let floor = options.relative_floor * peak;
    let mut value = f64::INFINITY;
    let mut kept = 0;
    for k in 1..bins {
        let power = paa[k] * pbb[k];
        if power > floor && power > 0.0 {
            kept += 1;
            value = value.min(pab[k].norm_sqr() / power);
        }
    }
    Ok(if kept == 0 {
        Coherence {
            value: 1.0,
            degenerate: true,
            bins: 0,
        }
    } else {
        Coherence {
            value,
            degenerate: false,
            bins: kept,
        }
    })
}
