//! Characterization experiments: bandwidth, timing, discrimination, neighbor
//! response, full-band sweeps, orbit shape and noise robustness.
//!
//! Envelope maxima are taken from `|z|` after a centered 5 ms moving maximum
//! (see [`envelope::moving_max`]).

pub mod envelope;
mod report;

use std::f64::consts::E;

use num_complex::Complex64;

pub use report::{ExperimentReport, Measurement, Tolerance};

use self::envelope::{
    confirmed_peak, correlation, first_fall_through, first_rise_through, flattening, moving_max,
    relative_ripple, smoothing_window,
};
use crate::bank::{min_bandwidth, search_normalize};
use crate::shift::{ssb_shift, LANDING_FLOOR_HZ};
use crate::signal::{generate_sine, mix_noise};
use crate::tables::shift_threshold_hz;
use crate::{BandwidthRequest, BankConfig, DetectorBank, Error, Features, Result, SolverMethod};

/// Samples per call when streaming long runs through a bank.
const CHUNK: usize = 8192;

/// Fraction the discrimination envelope must fall to confirm its peak.
pub const PEAK_CONFIRM_DROP: f64 = 0.05;

/// Settings shared by every experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSettings {
    pub sample_rate: f64,
    pub method: SolverMethod,
    pub search_normalize: bool,
    pub damping: f64,
    pub gain: f64,
}

impl RunSettings {
    pub fn new(sample_rate: f64, method: SolverMethod) -> Self {
        RunSettings {
            sample_rate,
            method,
            search_normalize: false,
            damping: crate::DetectorSpec::DEFAULT_DAMPING,
            gain: crate::DetectorSpec::DEFAULT_GAIN,
        }
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        self
    }

    pub fn with_search_normalize(mut self, on: bool) -> Self {
        self.search_normalize = on;
        self
    }

    /// Envelope decay rate of an undriven degenerate detector, 1/s.
    pub fn decay_rate(&self) -> f64 {
        self.damping * self.sample_rate / 2.0
    }

    pub fn features(&self) -> Features {
        Features {
            search_normalize: self.search_normalize,
            ..Features::default()
        }
    }

    pub fn bank_config(&self, freqs: &[f64], bandwidth: BandwidthRequest) -> BankConfig {
        BankConfig::new(self.sample_rate, self.method)
            .with_detectors(freqs, bandwidth)
            .with_damping(self.damping)
            .with_gain(self.gain)
            .with_features(self.features())
    }

    /// `multiple` time constants, clamped to `[lo, hi]` seconds.
    fn settle_time(&self, multiple: f64, lo: f64, hi: f64) -> f64 {
        let a = self.decay_rate();
        if a > 0.0 {
            (multiple / a).clamp(lo, hi)
        } else {
            hi
        }
    }
}

/// Largest envelope value of every detector over `samples`, without keeping
/// the whole response in memory.
pub fn stream_peaks(bank: &mut DetectorBank, samples: &[f64]) -> Result<Vec<f64>> {
    let mut peaks = vec![0.0f64; bank.len()];
    for chunk in samples.chunks(CHUNK) {
        let m = bank.process(chunk)?;
        for (p, env) in peaks.iter_mut().zip(&m.envelopes) {
            *p = env.iter().copied().fold(*p, f64::max);
        }
    }
    Ok(peaks)
}

fn smoothed(env: &[f64], sample_rate: f64) -> Vec<f64> {
    moving_max(env, smoothing_window(sample_rate))
}

fn peak_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(0.0, f64::max)
}

/// Search-normalization correction at `f0` in percent of `f0`.
pub fn frequency_adjustment_percent(
    f0: f64,
    sample_rate: f64,
    method: SolverMethod,
) -> Result<f64> {
    Ok((search_normalize(f0, sample_rate, method)? - f0) / f0 * 100.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandwidthMeasurement {
    pub bandwidth_hz: f64,
    pub lower_hz: f64,
    pub upper_hz: f64,
    pub grid: Vec<f64>,
    pub peaks: Vec<f64>,
}

fn half_power_crossing(
    grid: &[f64],
    peaks: &[f64],
    top: usize,
    level: f64,
    step: isize,
) -> Option<f64> {
    let mut i = top as isize;
    loop {
        let j = i + step;
        if j < 0 || j as usize >= peaks.len() {
            return None;
        }
        let (a, b) = (peaks[i as usize], peaks[j as usize]);
        if b < level {
            let w = (a - level) / (a - b);
            let (fa, fb) = (grid[i as usize], grid[j as usize]);
            return Some(fa + w * (fb - fa));
        }
        i = j;
    }
}

/// -3 dB bandwidth of a detector type: a tone at `f0` drives detectors spaced
/// `step_hz` apart around it, and the bandwidth is the distance between the
/// interpolated points where their envelope maxima fall to `1/sqrt(2)` of the
/// largest.
pub fn measure_bandwidth(
    settings: &RunSettings,
    f0: f64,
    bandwidth: BandwidthRequest,
    step_hz: Option<f64>,
) -> Result<BandwidthMeasurement> {
    let expected = match bandwidth {
        BandwidthRequest::Minimum => min_bandwidth(settings.damping, settings.sample_rate)?,
        BandwidthRequest::Hz(b) => b,
    };
    let step = step_hz.unwrap_or(match bandwidth {
        BandwidthRequest::Minimum => (expected / 20.0).min(0.1),
        BandwidthRequest::Hz(_) => expected / 25.0,
    });
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "grid step must be positive (got {step})"
        )));
    }
    let duration = settings.settle_time(8.0, 2.0, 10.0);
    let tone = generate_sine(f0, duration, settings.sample_rate, 1.0, 0.0)?;

    let mut half_span = expected;
    for _ in 0..4 {
        let k = (half_span / step).ceil() as i64;
        let grid: Vec<f64> = (-k..=k)
            .map(|i| f0 + i as f64 * step)
            .filter(|f| *f > 0.0 && *f < settings.sample_rate / 2.0)
            .collect();
        let mut bank = DetectorBank::build(settings.bank_config(&grid, bandwidth))?;
        let peaks = stream_peaks(&mut bank, &tone.samples)?;
        let top = (0..peaks.len())
            .max_by(|&a, &b| peaks[a].total_cmp(&peaks[b]))
            .ok_or_else(|| Error::Measurement("empty detector grid".into()))?;
        let level = peaks[top] / 2f64.sqrt();
        let lower = half_power_crossing(&grid, &peaks, top, level, -1);
        let upper = half_power_crossing(&grid, &peaks, top, level, 1);
        if let (Some(lower_hz), Some(upper_hz)) = (lower, upper) {
            return Ok(BandwidthMeasurement {
                bandwidth_hz: upper_hz - lower_hz,
                lower_hz,
                upper_hz,
                grid,
                peaks,
            });
        }
        half_span *= 2.0;
    }
    Err(Error::Measurement(format!(
        "detector grid around {f0} Hz does not bracket the -3 dB points"
    )))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingMeasurement {
    /// 10% to 90% of the maximum envelope.
    pub rise_ms: f64,
    /// From tone offset until the envelope falls to `1/e` of its maximum.
    pub relaxation_ms: f64,
    pub peak: f64,
    pub tone_s: f64,
}

/// Rise and relaxation time of a matched degenerate detector at `f0`.
pub fn measure_timing(settings: &RunSettings, f0: f64) -> Result<TimingMeasurement> {
    let sr = settings.sample_rate;
    let tone_s = settings.settle_time(12.0, 1.0, 60.0);
    let tail_s = settings.settle_time(8.0, 0.5, 40.0);
    let mut input = generate_sine(f0, tone_s, sr, 1.0, 0.0)?;
    let offset = input.len();
    input
        .samples
        .resize(offset + (tail_s * sr).round() as usize, 0.0);

    let mut bank = DetectorBank::build(settings.bank_config(&[f0], BandwidthRequest::Minimum))?;
    let m = bank.process(&input.samples)?;
    let env = smoothed(&m.envelopes[0], sr);
    let peak = peak_of(&env);
    if peak == 0.0 {
        return Err(Error::Measurement("detector did not respond".into()));
    }
    let tail = &env[offset - offset / 20..offset];
    let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
    if tail_mean < 0.98 * peak {
        return Err(Error::Measurement(
            "envelope did not reach a plateau".into(),
        ));
    }
    let t10 = first_rise_through(&env, 0.1 * peak, 0);
    let t90 = first_rise_through(&env, 0.9 * peak, 0);
    let t_rel = first_fall_through(&env, peak / E, offset);
    match (t10, t90, t_rel) {
        (Some(a), Some(b), Some(c)) => Ok(TimingMeasurement {
            rise_ms: (b - a) / sr * 1e3,
            relaxation_ms: (c - offset as f64) / sr * 1e3,
            peak,
            tone_s,
        }),
        _ => Err(Error::Measurement("envelope crossings not found".into())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Discrimination {
    /// Time from tone onset to the peak of the mismatched detector.
    pub dt_s: f64,
    /// `dt * |f1 - f2|`.
    pub product: f64,
    /// Half a beat period minus `dt`.
    pub advance_s: f64,
    /// Matched over mismatched envelope maximum during the tone, dB.
    pub rejection_db: f64,
}

/// Drive detectors at `f1` and `f2` with a tone at `f1` and time how long the
/// `f2` detector takes to peak and turn down.
pub fn discriminate(settings: &RunSettings, f1: f64, f2: f64) -> Result<Discrimination> {
    let df = (f1 - f2).abs();
    if df == 0.0 {
        return Err(Error::InvalidParameter("frequencies must differ".into()));
    }
    let sr = settings.sample_rate;
    let tone = generate_sine(f1, (1.0 / df + 0.5).clamp(1.0, 20.0), sr, 1.0, 0.0)?;
    let mut bank = DetectorBank::build(settings.bank_config(&[f1, f2], BandwidthRequest::Minimum))?;
    let m = bank.process(&tone.samples)?;
    // the 2f ripple of a low detector is slower than the 5 ms window, so
    // take the upper envelope over a whole ripple period
    let ripple = (sr / (2.0 * f1.min(f2))).round() as usize;
    let window = smoothing_window(sr).max(ripple);
    let matched = moving_max(&m.envelopes[0], window);
    let other = moving_max(&m.envelopes[1], window);
    let idx = confirmed_peak(&other, PEAK_CONFIRM_DROP).ok_or_else(|| {
        Error::Measurement(format!(
            "{f2} Hz envelope has no local maximum within the tone"
        ))
    })?;
    let dt_s = m.time(idx);
    Ok(Discrimination {
        dt_s,
        product: dt_s * df,
        advance_s: 0.5 / df - dt_s,
        rejection_db: 20.0 * (peak_of(&matched) / peak_of(&other)).log10(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborRatio {
    pub offset_hz: f64,
    pub measured: f64,
    pub predicted: f64,
}

/// Envelope maxima of detectors offset from `f_in`, relative to the matched
/// detector, for a tone of `duration_s` at `f_in`.
pub fn neighbor_ratios(
    settings: &RunSettings,
    f_in: f64,
    offsets_hz: &[f64],
    duration_s: f64,
) -> Result<Vec<NeighborRatio>> {
    let mut freqs = vec![f_in];
    freqs.extend(offsets_hz.iter().map(|o| f_in + o));
    let tone = generate_sine(f_in, duration_s, settings.sample_rate, 1.0, 0.0)?;
    let mut bank = DetectorBank::build(settings.bank_config(&freqs, BandwidthRequest::Minimum))?;
    let peaks = stream_peaks(&mut bank, &tone.samples)?;
    Ok(offsets_hz
        .iter()
        .zip(&peaks[1..])
        .map(|(&o, &p)| NeighborRatio {
            offset_hz: o,
            measured: p / peaks[0],
            predicted: crate::bank::predicted_neighbor_ratio(f_in + o, f_in),
        })
        .collect())
}

/// Where a full-band shifted bank is expected to show spurious responses to
/// a tone at `f_in`: the mirror of the input in the first shifted band and
/// its mirror about Nyquist.
pub fn expected_artefacts(
    f_in: f64,
    threshold_hz: f64,
    sample_rate: f64,
) -> [(&'static str, f64); 2] {
    [
        (
            "shift-image",
            2.0 * (threshold_hz - LANDING_FLOOR_HZ) - f_in,
        ),
        ("nyquist-mirror", sample_rate / 2.0 - f_in),
    ]
}

/// Log-spaced detector frequencies from 20 Hz to just under Nyquist, plus
/// any `extra` frequencies.
pub fn sweep_grid(sample_rate: f64, per_octave: f64, extra: &[f64]) -> Vec<f64> {
    let top = 0.999 * sample_rate / 2.0;
    let mut grid: Vec<f64> = (0..)
        .map(|k| 20.0 * 2f64.powf(k as f64 / per_octave))
        .take_while(|f| *f < top)
        .collect();
    grid.extend(
        extra
            .iter()
            .copied()
            .filter(|f| *f > 0.0 && *f < sample_rate / 2.0),
    );
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    grid
}

#[derive(Clone, Debug, PartialEq)]
pub struct Artefact {
    pub label: &'static str,
    pub expected_hz: f64,
    /// Detector with the largest response within 3% of the expected
    /// frequency.
    pub detector_hz: f64,
    pub level: f64,
    /// Level relative to the main peak, dB.
    pub relative_db: f64,
    /// Level relative to the strongest detector 10-20% away, dB.
    pub prominence_db: f64,
}

impl Artefact {
    /// A distinct peak at least 6 dB above its surroundings.
    pub fn present(&self) -> bool {
        self.prominence_db >= 6.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub f_in: f64,
    pub freqs: Vec<f64>,
    pub peaks: Vec<f64>,
    pub main_index: usize,
    pub artefacts: Vec<Artefact>,
}

impl SweepResult {
    pub fn main_hz(&self) -> f64 {
        self.freqs[self.main_index]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("f0_hz,max_envelope\n");
        for (f, p) in self.freqs.iter().zip(&self.peaks) {
            s.push_str(&format!(
                "{},{}\n",
                crate::signal::sig9(*f),
                crate::signal::sig9(*p)
            ));
        }
        s
    }
}

fn band_max(freqs: &[f64], peaks: &[f64], lo: f64, hi: f64) -> Option<(usize, f64)> {
    freqs
        .iter()
        .zip(peaks)
        .enumerate()
        .filter(|(_, (f, _))| **f >= lo && **f <= hi)
        .map(|(i, (_, p))| (i, *p))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Envelope maxima of a full-band bank for a 1 s tone at `f_in`.
pub fn sweep(
    settings: &RunSettings,
    f_in: f64,
    frequency_shift: bool,
    grid: Option<Vec<f64>>,
    duration_s: f64,
) -> Result<SweepResult> {
    let sr = settings.sample_rate;
    let threshold = shift_threshold_hz(settings.method, settings.search_normalize);
    let expected = expected_artefacts(f_in, threshold, sr);
    let freqs = grid.unwrap_or_else(|| {
        let mut extra = vec![f_in];
        extra.extend(expected.iter().map(|e| e.1));
        sweep_grid(sr, 24.0, &extra)
    });
    let mut config = settings.bank_config(&freqs, BandwidthRequest::Minimum);
    config.features.frequency_shift = frequency_shift;
    let mut bank = DetectorBank::build(config)?;
    let tone = generate_sine(f_in, duration_s, sr, 1.0, 0.0)?;
    let peaks = stream_peaks(&mut bank, &tone.samples)?;
    let main_index = (0..peaks.len())
        .max_by(|&a, &b| peaks[a].total_cmp(&peaks[b]).then(b.cmp(&a)))
        .ok_or_else(|| Error::Measurement("empty sweep grid".into()))?;
    let main = peaks[main_index];
    let artefacts = expected
        .iter()
        .filter_map(|&(label, hz)| {
            let (i, level) = band_max(&freqs, &peaks, 0.97 * hz, 1.03 * hz)?;
            let around = [
                band_max(&freqs, &peaks, 0.8 * hz, 0.9 * hz),
                band_max(&freqs, &peaks, 1.1 * hz, 1.2 * hz),
            ]
            .into_iter()
            .flatten()
            .map(|(_, p)| p)
            .fold(0.0, f64::max);
            Some(Artefact {
                label,
                expected_hz: hz,
                detector_hz: freqs[i],
                level,
                relative_db: 20.0 * (level / main).log10(),
                prominence_db: 20.0 * (level / around).log10(),
            })
        })
        .collect();
    Ok(SweepResult {
        f_in,
        freqs,
        peaks,
        main_index,
        artefacts,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftComparison {
    pub shifted_peak: f64,
    pub native_peak: f64,
}

impl ShiftComparison {
    pub fn ratio(&self) -> f64 {
        self.shifted_peak / self.native_peak
    }
}

/// Envelope maximum of a detector at `f_target` driven by a tone at `f_in`
/// shifted down onto it, against the same detector driven directly.
pub fn shift_comparison(
    settings: &RunSettings,
    f_in: f64,
    f_target: f64,
    duration_s: f64,
) -> Result<ShiftComparison> {
    let sr = settings.sample_rate;
    let tone = generate_sine(f_in, duration_s, sr, 1.0, 0.0)?;
    let shifted = ssb_shift(&tone.samples, f_in - f_target, sr);
    let native = generate_sine(f_target, duration_s, sr, 1.0, 0.0)?;
    let config = settings.bank_config(&[f_target], BandwidthRequest::Minimum);
    let shifted_peak = stream_peaks(&mut DetectorBank::build(config.clone())?, &shifted)?[0];
    let native_peak = stream_peaks(&mut DetectorBank::build(config)?, &native.samples)?[0];
    Ok(ShiftComparison {
        shifted_peak,
        native_peak,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitCorrection {
    pub raw_flattening: f64,
    pub normalized_flattening: f64,
    /// Peak-to-peak envelope ripple relative to its mean.
    pub raw_ripple: f64,
    pub normalized_ripple: f64,
    pub raw_orbit: Vec<Complex64>,
    pub normalized_orbit: Vec<Complex64>,
}

/// Orbit shape of a matched degenerate detector at `f` over the final
/// `periods` periods of a tone long enough to saturate it, with and without
/// amplitude normalization.
pub fn orbit_correction(settings: &RunSettings, f: f64, periods: f64) -> Result<OrbitCorrection> {
    let sr = settings.sample_rate;
    let duration = settings.settle_time(10.0, 2.0, 20.0).max(periods / f + 1.0);
    let tone = generate_sine(f, duration, sr, 1.0, 0.0)?;
    let tail = ((periods / f) * sr).round() as usize;
    let run = |normalize: bool| -> Result<Vec<Complex64>> {
        let mut config = settings.bank_config(&[f], BandwidthRequest::Minimum);
        config.features.amplitude_normalize = normalize;
        let mut bank = DetectorBank::build(config)?;
        let m = bank.process_complex(&tone.samples)?;
        let z = m.complex.unwrap().swap_remove(0);
        Ok(z[z.len() - tail..].to_vec())
    };
    let raw_orbit = run(false)?;
    let normalized_orbit = run(true)?;
    let ripple = |o: &[Complex64]| relative_ripple(&o.iter().map(|z| z.norm()).collect::<Vec<_>>());
    Ok(OrbitCorrection {
        raw_flattening: flattening(&raw_orbit),
        normalized_flattening: flattening(&normalized_orbit),
        raw_ripple: ripple(&raw_orbit),
        normalized_ripple: ripple(&normalized_orbit),
        raw_orbit,
        normalized_orbit,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRobustness {
    pub snr_db: f64,
    /// Pearson correlation of the noisy and clean envelopes.
    pub correlation: f64,
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
}

/// Envelope of a matched detector for a tone at `f` with and without white
/// noise at `snr_db` (measured over the whole buffer).
pub fn noise_robustness(
    settings: &RunSettings,
    f: f64,
    snr_db: f64,
    seed: u64,
    duration_s: f64,
) -> Result<NoiseRobustness> {
    let sr = settings.sample_rate;
    let clean_in = generate_sine(f, duration_s, sr, 1.0, 0.0)?;
    let noisy_in = mix_noise(&clean_in, snr_db, seed)?;
    let config = settings.bank_config(&[f], BandwidthRequest::Minimum);
    let clean = DetectorBank::build(config.clone())?
        .process(&clean_in.samples)?
        .envelopes
        .swap_remove(0);
    let noisy = DetectorBank::build(config)?
        .process(&noisy_in.samples)?
        .envelopes
        .swap_remove(0);
    Ok(NoiseRobustness {
        snr_db,
        correlation: correlation(&clean, &noisy),
        clean,
        noisy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SR: f64 = 48_000.0;

    fn rk4() -> RunSettings {
        RunSettings::new(SR, SolverMethod::RungeKutta4)
    }

    #[test]
    fn stream_peaks_matches_whole_run() {
        let tone = generate_sine(440.0, 0.3, SR, 1.0, 0.0).unwrap();
        let config = rk4().bank_config(&[430.0, 440.0], BandwidthRequest::Minimum);
        let whole = DetectorBank::build(config.clone())
            .unwrap()
            .process(&tone.samples)
            .unwrap();
        let peaks = stream_peaks(&mut DetectorBank::build(config).unwrap(), &tone.samples).unwrap();
        assert_eq!(peaks, vec![whole.peak(0), whole.peak(1)]);
    }

    #[test]
    fn infinite_snr_correlates_perfectly() {
        let r = noise_robustness(&rk4(), 440.0, f64::INFINITY, 1, 0.2).unwrap();
        assert!((r.correlation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discrimination_requires_distinct_frequencies() {
        assert!(discriminate(&rk4(), 100.0, 100.0).is_err());
    }

    #[test]
    fn artefact_locations() {
        let a = expected_artefacts(400.0, 1600.0, SR);
        assert_eq!(a[0].1, 2700.0);
        assert_eq!(a[1].1, 23_600.0);
    }

    #[test]
    fn sweep_grid_includes_extras_below_nyquist() {
        let g = sweep_grid(SR, 12.0, &[400.0, 2700.0, 30_000.0]);
        assert!(g.contains(&400.0) && g.contains(&2700.0));
        assert!(g.iter().all(|f| *f < 24_000.0));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn adjustment_is_small_at_low_frequency() {
        let p = frequency_adjustment_percent(100.0, SR, SolverMethod::RungeKutta4).unwrap();
        assert!(p.abs() < 1e-5);
    }
}
