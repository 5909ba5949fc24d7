//! Single-sideband frequency shifting.
//!
//! Detectors tuned above a method-dependent threshold `f_t` do not respond
//! well, so their input is translated down into `[50, f_t + 50]` Hz and the
//! detector runs at the translated frequency. The shift mixes the input with
//! a carrier and cancels the unwanted sideband with a windowed-FIR Hilbert
//! transformer:
//!
//! ```text
//! y = x cos(ws t) + H{x} sin(ws t)
//! ```

use std::f64::consts::{PI, TAU};

use crate::tables::shift_threshold_hz;
use crate::SolverMethod;

/// Where shifted detectors land: `(f_t, n f_t]` is moved down by `n f_t - 50`.
pub const LANDING_FLOOR_HZ: f64 = 50.0;

/// Kaiser window shape used for the quadrature filter.
const KAISER_BETA: f64 = 5.0;

pub fn shift_threshold(method: SolverMethod, search_normalized: bool) -> f64 {
    shift_threshold_hz(method, search_normalized)
}

/// One shift band: detectors in `(lower_hz, upper_hz]` are driven by the input
/// shifted down by `downshift_hz`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftBand {
    pub index: usize,
    pub lower_hz: f64,
    pub upper_hz: f64,
    pub downshift_hz: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftPlan {
    pub threshold_hz: f64,
    /// All bands `n >= 1` covering `(f_t, Nyquist)`.
    pub bands: Vec<ShiftBand>,
    /// Band index for each requested frequency (0 = unshifted).
    pub assignments: Vec<usize>,
    pub filter_taps: usize,
    /// Latency of the shifted paths in samples.
    pub delay: usize,
}

impl ShiftPlan {
    pub fn band(&self, index: usize) -> Option<&ShiftBand> {
        index.checked_sub(1).and_then(|i| self.bands.get(i))
    }

    pub fn downshift_for(&self, index: usize) -> f64 {
        self.band(index).map_or(0.0, |b| b.downshift_hz)
    }

    /// Distinct shifted bands actually needed by the requests, ascending.
    pub fn active_bands(&self) -> Vec<usize> {
        let mut used: Vec<usize> = self
            .assignments
            .iter()
            .copied()
            .filter(|&b| b > 0)
            .collect();
        used.sort_unstable();
        used.dedup();
        used
    }
}

pub fn band_index(freq_hz: f64, threshold_hz: f64) -> usize {
    if freq_hz <= threshold_hz {
        0
    } else {
        ((freq_hz / threshold_hz).ceil() as usize)
            .saturating_sub(1)
            .max(1)
    }
}

/// Downshift applied to band `n >= 1`: `(n - 1) f_t + (f_t - 50)`.
pub fn band_downshift(index: usize, threshold_hz: f64) -> f64 {
    if index == 0 {
        0.0
    } else {
        (index - 1) as f64 * threshold_hz + (threshold_hz - LANDING_FLOOR_HZ)
    }
}

pub fn plan_shifts(
    requested_hz: &[f64],
    method: SolverMethod,
    search_normalized: bool,
    sample_rate: f64,
) -> ShiftPlan {
    let threshold_hz = shift_threshold(method, search_normalized);
    let nyquist = sample_rate / 2.0;
    let mut bands = Vec::new();
    let mut n = 1;
    while (n as f64) * threshold_hz < nyquist {
        bands.push(ShiftBand {
            index: n,
            lower_hz: n as f64 * threshold_hz,
            upper_hz: ((n + 1) as f64 * threshold_hz).min(nyquist),
            downshift_hz: band_downshift(n, threshold_hz),
        });
        n += 1;
    }
    let filter_taps = HilbertFir::default_taps(sample_rate);
    ShiftPlan {
        threshold_hz,
        bands,
        assignments: requested_hz
            .iter()
            .map(|&f| band_index(f, threshold_hz))
            .collect(),
        filter_taps,
        delay: (filter_taps - 1) / 2,
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed FIR approximation of the Hilbert transformer (type III:
/// odd length, antisymmetric, zero at DC and Nyquist).
#[derive(Clone, Debug, PartialEq)]
pub struct HilbertFir {
    taps: Vec<f64>,
}

impl HilbertFir {
    /// 255 taps at 48 kHz, scaled with the sample rate so the usable lower
    /// edge stays near 0.4 kHz.
    pub fn default_taps(sample_rate: f64) -> usize {
        let n = (255.0 * sample_rate / 48_000.0).round() as usize;
        (n.max(31) / 2) * 2 + 1
    }

    pub fn new(num_taps: usize) -> Self {
        assert!(
            num_taps % 2 == 1 && num_taps >= 3,
            "Hilbert FIR length must be odd and >= 3"
        );
        let mid = (num_taps - 1) / 2;
        let norm = bessel_i0(KAISER_BETA);
        let taps = (0..num_taps)
            .map(|n| {
                let m = n as isize - mid as isize;
                if m % 2 == 0 {
                    0.0
                } else {
                    let r = m as f64 / mid as f64;
                    let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / norm;
                    2.0 / (PI * m as f64) * w
                }
            })
            .collect();
        HilbertFir { taps }
    }

    pub fn for_sample_rate(sample_rate: f64) -> Self {
        Self::new(Self::default_taps(sample_rate))
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Group delay in samples.
    pub fn delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Magnitude of the (delay-compensated) response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        let w = TAU * freq_hz / sample_rate;
        let mid = self.delay() as isize;
        self.taps
            .iter()
            .enumerate()
            .map(|(n, h)| {
                let m = mid - n as isize;
                h * (w * m as f64).sin()
            })
            .sum::<f64>()
            .abs()
    }
}

/// Output of [`quadrature_component`]: `samples[n]` approximates the Hilbert
/// transform of the input at `n - delay`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    pub samples: Vec<f64>,
    pub delay: usize,
}

pub fn quadrature_component(x: &[f64], filter: &HilbertFir) -> Quadrature {
    let taps = filter.taps();
    let samples = (0..x.len())
        .map(|n| {
            taps.iter()
                .enumerate()
                .take(n + 1)
                .map(|(k, h)| h * x[n - k])
                .sum()
        })
        .collect();
    Quadrature {
        samples,
        delay: filter.delay(),
    }
}

/// Fractional carrier cycles `rate * k`, reduced to `[0, 1)` without losing
/// precision for large sample indices.
fn carrier_cycles(rate: f64, k: i64) -> f64 {
    const BLOCK: i64 = 1 << 20;
    let q = k.div_euclid(BLOCK);
    let r = k.rem_euclid(BLOCK);
    let block_cycles = (rate * BLOCK as f64).rem_euclid(1.0);
    (block_cycles * q as f64 + rate * r as f64).rem_euclid(1.0)
}

/// Streaming single-sideband downshifter. Output sample `n` corresponds to
/// input sample `n - delay`.
#[derive(Clone, Debug)]
pub struct SsbShifter {
    reversed_taps: Vec<f64>,
    history: Vec<f64>,
    pos: usize,
    consumed: i64,
    cycles_per_sample: f64,
}

impl SsbShifter {
    pub fn new(filter: &HilbertFir, shift_hz: f64, sample_rate: f64) -> Self {
        let n = filter.len();
        SsbShifter {
            reversed_taps: filter.taps().iter().rev().copied().collect(),
            history: vec![0.0; 2 * n],
            pos: 0,
            consumed: 0,
            cycles_per_sample: shift_hz / sample_rate,
        }
    }

    pub fn delay(&self) -> usize {
        (self.reversed_taps.len() - 1) / 2
    }

    #[inline]
    pub fn push(&mut self, x: f64) -> f64 {
        let n = self.reversed_taps.len();
        self.pos = (self.pos + 1) % n;
        self.history[self.pos] = x;
        self.history[self.pos + n] = x;
        let window = &self.history[self.pos + 1..=self.pos + n];
        let quad: f64 = window
            .iter()
            .zip(&self.reversed_taps)
            .map(|(a, b)| a * b)
            .sum();
        let delay = self.delay();
        let direct = self.history[self.pos + n - delay];
        let k = self.consumed - delay as i64;
        self.consumed += 1;
        let phase = TAU * carrier_cycles(self.cycles_per_sample, k);
        direct * phase.cos() + quad * phase.sin()
    }

    pub fn process(&mut self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(input.iter().map(|&x| self.push(x)));
    }
}

/// Shift every component of `x` down by `shift_hz`, using the default
/// quadrature filter for the sample rate.
pub fn ssb_shift(x: &[f64], shift_hz: f64, sample_rate: f64) -> Vec<f64> {
    let filter = HilbertFir::for_sample_rate(sample_rate);
    let mut shifter = SsbShifter::new(&filter, shift_hz, sample_rate);
    let mut out = Vec::with_capacity(x.len());
    shifter.process(x, &mut out);
    out
}
