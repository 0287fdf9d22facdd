//! Fourier analysis of sampled series: `F(Ω) = Σⱼ f(tⱼ) e^{iΩtⱼ}`, peak
//! extraction and matching against reference excitation energies.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nccm::ClusterState;

/// Relative tolerance on the spacing of sample times.
pub const UNIFORM_TOL: f64 = 1e-6;

/// Default peak prominence, as a fraction of the largest magnitude.
pub const DEFAULT_PROMINENCE: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    fn weights(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => {
                let d = (len - 1) as f64;
                (0..len)
                    .map(|j| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * j as f64 / d).cos()))
                    .collect()
            }
        }
    }
}

/// Magnitude spectrum on an ascending frequency grid. Magnitudes are
/// normalized by the sample count, so a unit tone on a bin has magnitude 1
/// and `Σ |F|² = mean |f|²` of the processed series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// bin spacing `2π / (L·dt)`
    pub resolution: f64,
}

impl Spectrum {
    /// Only the bins with `Ω > 0`.
    pub fn positive(&self) -> Spectrum {
        let (frequencies, magnitudes) = self
            .frequencies
            .iter()
            .zip(&self.magnitudes)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, m)| (*w, *m))
            .unzip();
        Spectrum { frequencies, magnitudes, resolution: self.resolution }
    }

    pub fn power(&self) -> f64 {
        self.magnitudes.iter().map(|m| m * m).sum()
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

/// Sampling step of `times`, or `NonUniformSampling`.
pub fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::InvalidParams("a spectrum needs at least two samples".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::NonUniformSampling);
    }
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > UNIFORM_TOL * dt) {
        return Err(Error::NonUniformSampling);
    }
    Ok(dt)
}

/// Mean-subtracted, windowed series as fed to the transform.
pub fn preprocess(series: &[C64], window: Window) -> Vec<C64> {
    let mean = series.iter().sum::<C64>() / series.len() as f64;
    series
        .iter()
        .zip(window.weights(series.len()))
        .map(|(x, w)| (x - mean) * w)
        .collect()
}

pub fn dft(series: &[C64], times: &[f64], window: Window) -> Result<Spectrum> {
    if series.len() != times.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), got: series.len() });
    }
    let dt = uniform_step(times)?;
    let len = series.len();
    let mut buf = preprocess(series, window);
    // e^{+iΩt} is the inverse transform in rustfft's convention
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    let resolution = 2.0 * std::f64::consts::PI / (len as f64 * dt);
    let half = len.div_ceil(2);
    let order = (half..len).chain(0..half);
    let (frequencies, magnitudes) = order
        .map(|k| {
            let signed = if k < half { k as f64 } else { k as f64 - len as f64 };
            (signed * resolution, buf[k].norm() / len as f64)
        })
        .unzip();
    Ok(Spectrum { frequencies, magnitudes, resolution })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub omega: f64,
    pub magnitude: f64,
    pub prominence: f64,
}

fn prominence(m: &[f64], i: usize) -> f64 {
    let h = m[i];
    let mut left = h;
    for &x in m[..i].iter().rev() {
        if x > h {
            break;
        }
        left = left.min(x);
    }
    let mut right = h;
    for &x in &m[i + 1..] {
        if x > h {
            break;
        }
        right = right.min(x);
    }
    h - left.max(right)
}

/// The `count` largest local maxima whose prominence is at least
/// `min_prominence` times the global maximum, refined by a parabola through
/// the three nearest bins. Sorted by magnitude, largest first.
pub fn find_peaks(spec: &Spectrum, count: usize, min_prominence: f64) -> Result<Vec<Peak>> {
    if count == 0 {
        return Err(Error::InvalidParams("peak count must be at least 1".into()));
    }
    let m = &spec.magnitudes;
    let max = m.iter().copied().fold(0.0, f64::max);
    let floor = min_prominence * max;
    let mut peaks: Vec<Peak> = (1..m.len().saturating_sub(1))
        .filter(|&i| m[i] > m[i - 1] && m[i] >= m[i + 1] && m[i] >= floor)
        .filter_map(|i| {
            let p = prominence(m, i);
            (p >= floor && p > 0.0).then(|| {
                let (y0, y1, y2) = (m[i - 1], m[i], m[i + 1]);
                let denom = y0 - 2.0 * y1 + y2;
                let delta = if denom != 0.0 { 0.5 * (y0 - y2) / denom } else { 0.0 };
                Peak {
                    omega: spec.frequencies[i] + delta * spec.resolution,
                    magnitude: y1 - 0.25 * (y0 - y2) * delta,
                    prominence: p,
                }
            })
        })
        .collect();
    peaks.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    if peaks.len() < count {
        return Err(Error::FewerPeaksThanRequested { requested: count, found: peaks.len() });
    }
    peaks.truncate(count);
    Ok(peaks)
}

/// A peak paired with the nearest reference level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakMatch {
    pub omega: f64,
    pub reference: f64,
    pub deviation: f64,
    /// `|deviation|` in units of the bin spacing
    pub bins: f64,
}

pub fn match_peaks(peaks: &[Peak], reference: &[f64], resolution: f64) -> Vec<PeakMatch> {
    peaks
        .iter()
        .filter_map(|p| {
            let nearest = reference
                .iter()
                .copied()
                .min_by(|a, b| (a - p.omega).abs().total_cmp(&(b - p.omega).abs()))?;
            let deviation = p.omega - nearest;
            Some(PeakMatch { omega: p.omega, reference: nearest, deviation, bins: deviation.abs() / resolution })
        })
        .collect()
}

/// `(t, Re s⁽²⁾ₙ, Im s⁽²⁾ₙ)` along a run, for phase-space plots.
pub fn parametric_trace(samples: &[ClusterState], n: usize) -> Vec<(f64, f64, f64)> {
    samples
        .iter()
        .map(|s| {
            let c = s.s2(n);
            (s.t, c.re, c.im)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(len: usize, dt: f64) -> Vec<f64> {
        (0..len).map(|j| j as f64 * dt).collect()
    }

    #[test]
    fn pure_tone_lands_on_its_bin() {
        let dt = 0.05;
        let t = grid(4000, dt);
        let w0 = 1.3;
        let f: Vec<C64> = t.iter().map(|&t| C64::from_polar(1.0, -w0 * t)).collect();
        let spec = dft(&f, &t, Window::Rectangular).unwrap();
        let p = find_peaks(&spec, 1, DEFAULT_PROMINENCE).unwrap();
        assert!((p[0].omega - w0).abs() < 0.5 * spec.resolution);
        assert!(spec.frequencies.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn constant_is_removed() {
        let t = grid(64, 0.1);
        let f = vec![C64::new(2.5, -1.0); 64];
        let spec = dft(&f, &t, Window::Rectangular).unwrap();
        assert!(spec.magnitudes.iter().all(|m| *m < 1e-14));
        assert!(matches!(find_peaks(&spec, 1, 0.01), Err(Error::FewerPeaksThanRequested { .. })));
    }

    #[test]
    fn parseval() {
        let t = grid(1000, 0.02);
        let f: Vec<C64> = t.iter().map(|&t| C64::new((3.0 * t).sin() + 0.2 * t.cos(), 0.1 * t)).collect();
        for w in [Window::Rectangular, Window::Hann] {
            let x = preprocess(&f, w);
            let ms = x.iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64;
            let spec = dft(&f, &t, w).unwrap();
            assert!((spec.power() - ms).abs() <= 1e-8 * ms);
        }
    }

    #[test]
    fn non_uniform_is_rejected() {
        let mut t = grid(10, 0.1);
        t[5] += 0.01;
        let f = vec![C64::new(0.0, 0.0); 10];
        assert!(matches!(dft(&f, &t, Window::Hann), Err(Error::NonUniformSampling)));
    }

    #[test]
    fn matching() {
        let peaks = [Peak { omega: 1.02, magnitude: 1.0, prominence: 1.0 }];
        let m = match_peaks(&peaks, &[0.5, 1.0, 2.0], 0.04);
        assert_eq!(m[0].reference, 1.0);
        assert!((m[0].bins - 0.5).abs() < 1e-12);
    }
}
