#![allow(dead_code)]

use std::f64::consts::TAU;

use hopfbank::resonator::{step_rk4, DetectorSpec, DetectorState};
use num_complex::Complex64;

/// Amplitude of the component at `freq` in `x`, by correlation with a complex
/// exponential. Exact for integer-Hz tones over whole seconds.
pub fn tone_level(x: &[f64], freq: f64, sample_rate: f64) -> f64 {
    let w = TAU * freq / sample_rate;
    let acc: Complex64 = x
        .iter()
        .enumerate()
        .map(|(n, v)| Complex64::from_polar(*v, -w * n as f64))
        .sum();
    2.0 * acc.norm() / x.len() as f64
}

/// Trajectory of one undamped RK4 detector at `oversample` times
/// `sample_rate`, forced by `forcing(t)` evaluated exactly at every stage,
/// decimated back to `sample_rate`.
pub fn rk4_oracle(
    spec: &DetectorSpec,
    sample_rate: f64,
    seconds: f64,
    oversample: usize,
    forcing: impl Fn(f64) -> f64,
) -> Vec<Complex64> {
    let fine = sample_rate * oversample as f64;
    let h = 1.0 / fine;
    let n = (seconds * sample_rate).round() as usize;
    let mut state = DetectorState::default();
    let mut out = Vec::with_capacity(n);
    for k in 0..n * oversample {
        let t = k as f64 * h;
        state = step_rk4(
            &state,
            spec,
            h,
            forcing(t),
            forcing(t + h / 2.0),
            forcing(t + h),
        );
        if (k + 1) % oversample == 0 {
            out.push(state.z);
        }
    }
    out
}

pub fn max_envelope_deviation(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.norm() - y.norm()).abs())
        .fold(0.0, f64::max)
}

/// Zero-crossing frequency estimate of a real signal.
pub fn zero_crossing_frequency(x: &[f64], sample_rate: f64) -> f64 {
    let mut crossings = Vec::new();
    for n in 1..x.len() {
        if x[n - 1] < 0.0 && x[n] >= 0.0 {
            crossings.push((n - 1) as f64 + x[n - 1] / (x[n - 1] - x[n]));
        }
    }
    let span = crossings.last().unwrap() - crossings[0];
    (crossings.len() - 1) as f64 * sample_rate / span
}
