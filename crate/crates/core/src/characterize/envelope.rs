//! Envelope measurements.

use std::collections::VecDeque;

use num_complex::Complex64;

/// Centered moving maximum over `window` samples.
pub fn moving_max(x: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let mut out = Vec::with_capacity(x.len());
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for i in 0..x.len() {
        let hi = (i + half).min(x.len() - 1);
        while next <= hi {
            while deque.back().is_some_and(|&j| x[j] <= x[next]) {
                deque.pop_back();
            }
            deque.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(half);
        while deque.front().is_some_and(|&j| j < lo) {
            deque.pop_front();
        }
        out.push(x[*deque.front().unwrap()]);
    }
    out
}

/// Samples in the 5 ms smoothing window.
pub fn smoothing_window(sample_rate: f64) -> usize {
    ((0.005 * sample_rate).round() as usize).max(1)
}

/// Fractional index at which `x` first reaches `level` at or after `from`,
/// linearly interpolated between samples.
pub fn first_rise_through(x: &[f64], level: f64, from: usize) -> Option<f64> {
    let i = (from..x.len()).find(|&i| x[i] >= level)?;
    if i == from || i == 0 {
        return Some(i as f64);
    }
    let (a, b) = (x[i - 1], x[i]);
    Some((i - 1) as f64 + (level - a) / (b - a))
}

/// Fractional index at which `x` first drops to `level` at or after `from`.
pub fn first_fall_through(x: &[f64], level: f64, from: usize) -> Option<f64> {
    let i = (from..x.len()).find(|&i| x[i] <= level)?;
    if i == from || i == 0 {
        return Some(i as f64);
    }
    let (a, b) = (x[i - 1], x[i]);
    Some((i - 1) as f64 + (a - level) / (a - b))
}

/// First local maximum confirmed by the signal falling `drop` (a fraction)
/// below it. Returns the index of that maximum.
pub fn confirmed_peak(x: &[f64], drop: f64) -> Option<usize> {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        } else if x[best] > 0.0 && v <= (1.0 - drop) * x[best] {
            return Some(best);
        }
    }
    None
}

/// Pearson correlation coefficient.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return f64::NAN;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 && sbb == 0.0 {
        // two constant signals have the same shape
        return 1.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Orbit flattening `1 - min|z| / max|z|`: 0 for a circle.
pub fn flattening(orbit: &[Complex64]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for z in orbit {
        let r = z.norm();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if hi == 0.0 {
        return 0.0;
    }
    1.0 - lo / hi
}

/// Peak-to-peak variation of `x` relative to its mean.
pub fn relative_ripple(x: &[f64]) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    (hi - lo) / mean
}
