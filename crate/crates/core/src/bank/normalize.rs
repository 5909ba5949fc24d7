//! Frequency (search) normalization and output amplitude normalization.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::resonator::{check_frequency, effective_frequency_unchecked};
use crate::{Error, Result, SolverMethod};

/// Characteristic frequency at which the discretized detector oscillates at
/// exactly `f0`. Solved by bisection on the (monotone) effective-frequency
/// map.
pub fn search_normalize(f0: f64, sample_rate: f64, method: SolverMethod) -> Result<f64> {
    check_frequency(f0, sample_rate)?;
    let eff = |f: f64| effective_frequency_unchecked(method, f, sample_rate);
    let no_solution = || Error::NoSolutionInRange {
        freq: f0,
        sample_rate,
    };
    let mut lo = 0.5 * f0;
    let mut hi = (2.0 * f0).min(0.5 * sample_rate * (1.0 - 1e-12));
    if eff(lo) > f0 || eff(hi) < f0 {
        return Err(no_solution());
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eff(mid) < f0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * f0 {
            break;
        }
    }
    let f = 0.5 * (lo + hi);
    if ((eff(f) - f0) / f0).abs() > 1e-9 {
        return Err(no_solution());
    }
    Ok(f)
}

/// Largest stretch applied to the minor axis.
const MAX_STRETCH: f64 = 4.0;

/// Streaming orbit-eccentricity correction.
///
/// The second-moment matrix of `(Re z, Im z)` over a sliding window gives the
/// principal axes of the orbit; the component along the minor axis is scaled
/// by the ratio of the axis extents, so an elliptical orbit becomes circular
/// with the major-axis radius. For an axis-aligned ellipse this is the ratio
/// of maximum real and imaginary parts applied to the imaginary component.
/// The result is finally multiplied by `scale`.
#[derive(Clone, Debug)]
pub struct AmplitudeNormalizer {
    window: usize,
    moments: VecDeque<[f64; 3]>,
    sum: [f64; 3],
    since_refresh: usize,
    scale: f64,
}

impl AmplitudeNormalizer {
    pub fn new(window: usize, scale: f64) -> Self {
        let window = window.max(1);
        AmplitudeNormalizer {
            window,
            moments: VecDeque::with_capacity(window + 1),
            sum: [0.0; 3],
            since_refresh: 0,
            scale,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn set_scale(&mut self, scale: f64) {
        self.scale = scale;
    }

    pub fn reset(&mut self) {
        self.moments.clear();
        self.sum = [0.0; 3];
        self.since_refresh = 0;
    }

    fn push(&mut self, z: Complex64) {
        let m = [z.re * z.re, z.im * z.im, z.re * z.im];
        self.moments.push_back(m);
        for (s, v) in self.sum.iter_mut().zip(m) {
            *s += v;
        }
        if self.moments.len() > self.window {
            let old = self.moments.pop_front().unwrap();
            for (s, v) in self.sum.iter_mut().zip(old) {
                *s -= v;
            }
        }
        self.since_refresh += 1;
        if self.since_refresh >= self.window {
            // drop accumulated cancellation error
            self.since_refresh = 0;
            self.sum = self.moments.iter().fold([0.0; 3], |acc, m| {
                [acc[0] + m[0], acc[1] + m[1], acc[2] + m[2]]
            });
        }
    }

    /// Correct one sample. Until a full window has been seen the sample is
    /// only scaled.
    pub fn apply(&mut self, z: Complex64) -> Complex64 {
        self.push(z);
        if self.moments.len() < self.window {
            return z * self.scale;
        }
        whiten(z, self.sum) * self.scale
    }
}

/// Map `z` through the stretch that makes an orbit with second moments
/// `[sxx, syy, sxy]` circular.
fn whiten(z: Complex64, [sxx, syy, sxy]: [f64; 3]) -> Complex64 {
    let trace = sxx + syy;
    if !(trace > f64::MIN_POSITIVE) {
        return z;
    }
    let half_diff = 0.5 * (sxx - syy);
    let radius = (half_diff * half_diff + sxy * sxy).sqrt();
    let major = 0.5 * trace + radius;
    let minor = 0.5 * trace - radius;
    let stretch = if minor > 0.0 {
        (major / minor).sqrt().min(MAX_STRETCH)
    } else {
        MAX_STRETCH
    };
    let rot = Complex64::from_polar(1.0, 0.5 * sxy.atan2(half_diff));
    let mut w = z * rot.conj();
    w.im *= stretch;
    w * rot
}

/// Offline amplitude normalization of a complex trajectory: eccentricity
/// correction over a sliding window of `window` samples, then a rescale so the
/// largest `|z|` is 1. An all-zero trajectory is returned unchanged.
pub fn amplitude_normalize(trajectory: &[Complex64], window: usize) -> Vec<Complex64> {
    if trajectory.iter().all(|z| z.norm_sqr() == 0.0) {
        return trajectory.to_vec();
    }
    let window = window.max(1);
    // offline, the samples before the first full window use its moments
    let head = &trajectory[..window.min(trajectory.len())];
    let first = head.iter().fold([0.0; 3], |acc, z| {
        [
            acc[0] + z.re * z.re,
            acc[1] + z.im * z.im,
            acc[2] + z.re * z.im,
        ]
    });
    let mut norm = AmplitudeNormalizer::new(window, 1.0);
    let mut out: Vec<Complex64> = trajectory
        .iter()
        .enumerate()
        .map(|(n, &z)| {
            let c = norm.apply(z);
            if n + 1 < head.len() || (n + 1 == head.len() && head.len() < window) {
                whiten(z, first)
            } else {
                c
            }
        })
        .collect();
    let peak = out.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak > 0.0 {
        out.iter_mut().for_each(|z| *z /= peak);
    }
    out
}
