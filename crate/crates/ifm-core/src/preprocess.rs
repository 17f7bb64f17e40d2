//! Trial preprocessing: zero-phase Butterworth filtering, wrist-velocity
//! trimming, and resampling onto the normalized `[0,1]` timeline.

use serde::{Deserialize, Serialize};

use crate::error::{IfmError, Result};
use crate::trial::Trial;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Low-pass cutoff in Hz.
    pub cutoff_hz: f64,
    /// Butterworth order of a single pass. Applied forward-backward,
    /// so the effective attenuation order is twice this.
    pub filter_order: usize,
    /// Wrist-speed threshold in mm/s for movement detection.
    pub epsilon_mm_s: f64,
    /// Number of samples on the normalized timeline.
    pub resample_count: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            cutoff_hz: 6.0,
            filter_order: 2,
            epsilon_mm_s: 20.0,
            resample_count: 100,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if !(self.cutoff_hz > 0.0) {
            return Err(IfmError::config("cutoff_hz must be positive"));
        }
        if self.cutoff_hz >= sample_rate_hz / 2.0 {
            return Err(IfmError::config(format!(
                "cutoff {} Hz is at or above Nyquist ({} Hz)",
                self.cutoff_hz,
                sample_rate_hz / 2.0
            )));
        }
        if self.filter_order == 0 {
            return Err(IfmError::config("filter_order must be positive"));
        }
        if !(self.epsilon_mm_s > 0.0) {
            return Err(IfmError::config("epsilon_mm_s must be positive"));
        }
        if self.resample_count == 0 {
            return Err(IfmError::config("resample_count must be positive"));
        }
        Ok(())
    }
}

/// Inclusive start / exclusive stop indices of the detected movement window
/// on the raw sample grid. `tf_index` is the first sub-threshold sample after
/// onset, or the sequence length when the speed never drops back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrimWindow {
    pub t0_index: usize,
    pub tf_index: usize,
}

/// One second-order filter section in normalized direct form II transposed.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    /// Runs the section over `signal` in place, starting from the DC steady
    /// state for the first input value so constant signals pass unchanged.
    fn run(&self, signal: &mut [f64]) {
        let x0 = signal[0];
        // Steady state for constant input x0 with unit DC gain (y = x0):
        //   z1 = (b1 + b2) x0 - (a1 + a2) y,  z2 = b2 x0 - a2 y
        let y0 = x0 * (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2);
        let mut z1 = (self.b1 + self.b2) * x0 - (self.a1 + self.a2) * y0;
        let mut z2 = self.b2 * x0 - self.a2 * y0;
        for x in signal.iter_mut() {
            let y = self.b0 * *x + z1;
            z1 = z2 + self.b1 * *x - self.a1 * y;
            z2 = self.b2 * *x - self.a2 * y;
            *x = y;
        }
    }
}

/// First-order section for odd filter orders.
#[derive(Debug, Clone, Copy)]
struct FirstOrder {
    b0: f64,
    b1: f64,
    a1: f64,
}

impl FirstOrder {
    fn run(&self, signal: &mut [f64]) {
        let x0 = signal[0];
        let y0 = x0 * (self.b0 + self.b1) / (1.0 + self.a1);
        let mut z1 = self.b1 * x0 - self.a1 * y0;
        for x in signal.iter_mut() {
            let y = self.b0 * *x + z1;
            z1 = self.b1 * *x - self.a1 * y;
            *x = y;
        }
    }
}

/// Digital Butterworth low-pass as a cascade of bilinear-transformed
/// sections with frequency prewarping.
#[derive(Debug, Clone)]
pub struct ButterworthLowpass {
    biquads: Vec<Biquad>,
    first_order: Option<FirstOrder>,
}

impl ButterworthLowpass {
    pub fn design(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        if order == 0 {
            return Err(IfmError::config("filter order must be positive"));
        }
        if !(cutoff_hz > 0.0) || cutoff_hz >= sample_rate_hz / 2.0 {
            return Err(IfmError::config(format!(
                "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
                sample_rate_hz / 2.0
            )));
        }
        // Prewarped analog cutoff for the bilinear transform (T = 2).
        let warped = (std::f64::consts::PI * cutoff_hz / sample_rate_hz).tan();

        let mut biquads = Vec::new();
        let mut first_order = None;
        // Analog prototype poles on the unit circle, scaled by the warped
        // cutoff; conjugate pairs share one biquad.
        for k in 0..order / 2 {
            let theta = std::f64::consts::PI * (2.0 * k as f64 + 1.0) / (2.0 * order as f64)
                + std::f64::consts::FRAC_PI_2;
            let (sr, si) = (warped * theta.cos(), warped * theta.sin());
            // Bilinear transform of s^2 - 2 sr s + (sr^2+si^2) denominator:
            let w2 = sr * sr + si * si;
            let d = 1.0 - 2.0 * sr + w2;
            let a1 = (2.0 * w2 - 2.0) / d;
            let a2 = (1.0 + 2.0 * sr + w2) / d;
            // Numerator (1 + z^-1)^2 scaled for exact unit DC gain.
            let g = (1.0 + a1 + a2) / 4.0;
            biquads.push(Biquad {
                b0: g,
                b1: 2.0 * g,
                b2: g,
                a1,
                a2,
            });
        }
        if order % 2 == 1 {
            // Real pole at s = -warped.
            let a1 = (warped - 1.0) / (warped + 1.0);
            let g = (1.0 + a1) / 2.0;
            first_order = Some(FirstOrder { b0: g, b1: g, a1 });
        }
        Ok(ButterworthLowpass {
            biquads,
            first_order,
        })
    }

    /// Single forward pass (causal, with phase lag).
    pub fn filter_forward(&self, signal: &[f64]) -> Vec<f64> {
        let mut out = signal.to_vec();
        for bq in &self.biquads {
            bq.run(&mut out);
        }
        if let Some(fo) = &self.first_order {
            fo.run(&mut out);
        }
        out
    }

    /// Magnitude of the frequency response at `freq_hz` for a single pass.
    pub fn magnitude_at(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        use nalgebra::Complex;
        let omega = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz;
        let zi = Complex::new(omega.cos(), -omega.sin()); // z^-1
        let zi2 = zi * zi;
        let mut h = Complex::new(1.0, 0.0);
        for bq in &self.biquads {
            let num = Complex::new(bq.b0, 0.0) + zi * bq.b1 + zi2 * bq.b2;
            let den = Complex::new(1.0, 0.0) + zi * bq.a1 + zi2 * bq.a2;
            h *= num / den;
        }
        if let Some(fo) = &self.first_order {
            let num = Complex::new(fo.b0, 0.0) + zi * fo.b1;
            let den = Complex::new(1.0, 0.0) + zi * fo.a1;
            h *= num / den;
        }
        h.norm()
    }
}

/// Zero-phase low-pass: forward-backward Butterworth with anti-symmetric
/// edge reflection of `3 * filter_order` samples on each side.
pub fn butterworth_lowpass(
    signal: &[f64],
    sample_rate_hz: f64,
    cfg: &PreprocessConfig,
) -> Result<Vec<f64>> {
    let filt = ButterworthLowpass::design(cfg.filter_order, cfg.cutoff_hz, sample_rate_hz)?;
    let pad = 3 * cfg.filter_order;
    if signal.len() < pad.max(2) {
        return Err(IfmError::data(format!(
            "signal too short to filter: {} samples, need at least {}",
            signal.len(),
            pad.max(2)
        )));
    }

    // Odd (anti-symmetric) reflection preserves level and slope at the edges.
    let n = signal.len();
    let mut padded = Vec::with_capacity(n + 2 * pad);
    for k in (1..=pad).rev() {
        padded.push(2.0 * signal[0] - signal[k]);
    }
    padded.extend_from_slice(signal);
    for k in 1..=pad {
        padded.push(2.0 * signal[n - 1] - signal[n - 1 - k]);
    }

    // Average the two pass orders (forward-then-backward and
    // backward-then-forward) so the result is exactly symmetric under time
    // reversal despite the finite edge transients.
    let mut fb = filt.filter_forward(&padded);
    fb.reverse();
    fb = filt.filter_forward(&fb);
    fb.reverse();

    let mut bf: Vec<f64> = padded.iter().rev().copied().collect();
    bf = filt.filter_forward(&bf);
    bf.reverse();
    bf = filt.filter_forward(&bf);

    Ok(fb[pad..pad + n]
        .iter()
        .zip(bf[pad..pad + n].iter())
        .map(|(a, b)| 0.5 * (a + b))
        .collect())
}

/// Per-sample wrist speed in mm/s: norm of the central-difference derivative,
/// one-sided at the endpoints.
pub fn wrist_speed(trial: &Trial) -> Result<Vec<f64>> {
    let wrist = trial.marker("wrist")?;
    Ok(speed_of(wrist, trial.sample_rate_hz))
}

pub(crate) fn speed_of(points: &[nalgebra::Point3<f64>], sample_rate_hz: f64) -> Vec<f64> {
    let n = points.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    out[0] = (points[1] - points[0]).norm() * sample_rate_hz;
    out[n - 1] = (points[n - 1] - points[n - 2]).norm() * sample_rate_hz;
    for t in 1..n - 1 {
        out[t] = ((points[t + 1] - points[t - 1]) * (sample_rate_hz / 2.0)).norm();
    }
    out
}

/// Finds the movement window in a speed sequence: `t0` is the first index
/// with speed above `epsilon`; `tf` is the first index after `t0` with speed
/// below `epsilon`, or the sequence length when it never drops back. The
/// retained samples are the half-open range `[t0, tf)`.
pub fn find_trim_window(speed: &[f64], epsilon: f64) -> Option<TrimWindow> {
    let t0 = speed.iter().position(|&v| v > epsilon)?;
    let tf = speed[t0..]
        .iter()
        .position(|&v| v < epsilon)
        .map(|off| t0 + off)
        .unwrap_or(speed.len());
    Some(TrimWindow {
        t0_index: t0,
        tf_index: tf,
    })
}

/// Crops a trial to its movement window, detected by thresholding the
/// zero-phase-filtered wrist speed at `cfg.epsilon_mm_s`.
pub fn trim_by_velocity(trial: &Trial, cfg: &PreprocessConfig) -> Result<(Trial, TrimWindow)> {
    cfg.validate(trial.sample_rate_hz)?;
    let wrist = trial.marker("wrist")?;
    let filtered = filter_points(wrist, trial.sample_rate_hz, cfg)?;
    let speed = speed_of(&filtered, trial.sample_rate_hz);

    let window = find_trim_window(&speed, cfg.epsilon_mm_s).ok_or(IfmError::NoMovement {
        trial_id: trial.trial_id.clone(),
    })?;
    if window.tf_index - window.t0_index < 2 {
        return Err(IfmError::data(format!(
            "trial '{}': movement window [{}, {}) is shorter than 2 samples",
            trial.trial_id, window.t0_index, window.tf_index
        )));
    }
    Ok((trial.cropped(window.t0_index, window.tf_index), window))
}

/// Low-pass filters every coordinate of every marker (zero phase).
pub fn filter_trial(trial: &Trial, cfg: &PreprocessConfig) -> Result<Trial> {
    cfg.validate(trial.sample_rate_hz)?;
    let mut out = trial.clone();
    for seq in &mut out.markers {
        *seq = filter_points(seq, trial.sample_rate_hz, cfg)?;
    }
    Ok(out)
}

fn filter_points(
    points: &[nalgebra::Point3<f64>],
    sample_rate_hz: f64,
    cfg: &PreprocessConfig,
) -> Result<Vec<nalgebra::Point3<f64>>> {
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let zs: Vec<f64> = points.iter().map(|p| p.z).collect();
    let xs = butterworth_lowpass(&xs, sample_rate_hz, cfg)?;
    let ys = butterworth_lowpass(&ys, sample_rate_hz, cfg)?;
    let zs = butterworth_lowpass(&zs, sample_rate_hz, cfg)?;
    Ok(xs
        .iter()
        .zip(ys.iter())
        .zip(zs.iter())
        .map(|((&x, &y), &z)| nalgebra::Point3::new(x, y, z))
        .collect())
}

/// Full preprocessing: filter all markers, then trim to the movement window.
pub fn preprocess_trial(trial: &Trial, cfg: &PreprocessConfig) -> Result<(Trial, TrimWindow)> {
    let filtered = filter_trial(trial, cfg)?;
    let speed = wrist_speed(&filtered)?;
    let window = find_trim_window(&speed, cfg.epsilon_mm_s).ok_or(IfmError::NoMovement {
        trial_id: trial.trial_id.clone(),
    })?;
    if window.tf_index - window.t0_index < 2 {
        return Err(IfmError::data(format!(
            "trial '{}': movement window [{}, {}) is shorter than 2 samples",
            trial.trial_id, window.t0_index, window.tf_index
        )));
    }
    Ok((
        filtered.cropped(window.t0_index, window.tf_index),
        window,
    ))
}

/// Linear resampling of a series onto `resample_count` equispaced points of
/// the rescaled `[0, 1]` axis. Endpoint-preserving and monotone in time.
pub fn normalize_time(series: &[f64], resample_count: usize) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(IfmError::data(format!(
            "normalize_time needs at least 2 samples, got {}",
            series.len()
        )));
    }
    if resample_count == 0 {
        return Err(IfmError::config("resample_count must be positive"));
    }
    if resample_count == 1 {
        return Ok(vec![series[0]]);
    }
    let n = series.len();
    let mut out = Vec::with_capacity(resample_count);
    for k in 0..resample_count {
        let u = k as f64 / (resample_count - 1) as f64 * (n - 1) as f64;
        let i = (u.floor() as usize).min(n - 2);
        let frac = u - i as f64;
        out.push(series[i] * (1.0 - frac) + series[i + 1] * frac);
    }
    // Exact endpoints regardless of rounding.
    out[0] = series[0];
    out[resample_count - 1] = series[n - 1];
    Ok(out)
}
