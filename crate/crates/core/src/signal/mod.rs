//! Test-signal synthesis, noise mixing and file I/O.

mod csv;
mod wav;

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::resonator::check_frequency;
use crate::{Error, Result};

pub(crate) use self::csv::sig9;
pub use self::csv::{read_response_csv, write_response_csv, CsvTable};
pub use self::wav::{read_wav, write_wav, WavFormat};

/// Mono audio with its sample rate. Samples are nominally in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

impl AudioBuffer {
    pub fn new(sample_rate: f64, samples: Vec<f64>) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive (got {sample_rate})"
            )));
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteInput {
                position: pos as u64,
            });
        }
        Ok(AudioBuffer {
            sample_rate,
            samples,
        })
    }

    pub fn silence(sample_rate: f64, duration: f64) -> Self {
        AudioBuffer {
            sample_rate,
            samples: vec![0.0; sample_count(duration, sample_rate)],
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Mean square value.
    pub fn power(&self) -> f64 {
        power(&self.samples)
    }

    pub fn append(&mut self, other: &AudioBuffer) {
        debug_assert_eq!(self.sample_rate, other.sample_rate);
        self.samples.extend_from_slice(&other.samples);
    }
}

pub fn power(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        0.0
    } else {
        samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64
    }
}

pub(crate) fn sample_count(duration: f64, sample_rate: f64) -> usize {
    (duration * sample_rate).round().max(0.0) as usize
}

/// `amplitude * sin(2 pi f t + phase)`, sampled at `t = n / sample_rate`.
pub fn generate_sine(
    freq: f64,
    duration: f64,
    sample_rate: f64,
    amplitude: f64,
    phase: f64,
) -> Result<AudioBuffer> {
    check_frequency(freq, sample_rate)?;
    let n = sample_count(duration, sample_rate);
    let w = TAU * freq / sample_rate;
    let samples = (0..n)
        .map(|i| amplitude * (w * i as f64 + phase).sin())
        .collect();
    Ok(AudioBuffer {
        sample_rate,
        samples,
    })
}

/// One segment of a tone sequence. A frequency of zero means silence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToneSegment {
    pub freq: f64,
    pub duration: f64,
}

impl std::str::FromStr for ToneSegment {
    type Err = Error;

    /// Parses `freq:duration`, e.g. `440:1.5`. `0:0.5` or `rest:0.5` is silence.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("tone segment '{s}' is not freq:duration"));
        let (f, d) = s.trim().split_once(':').ok_or_else(bad)?;
        let freq = if f.eq_ignore_ascii_case("rest") {
            0.0
        } else {
            f.trim().parse().map_err(|_| bad())?
        };
        let duration: f64 = d.trim().parse().map_err(|_| bad())?;
        if freq < 0.0 || !(duration >= 0.0) {
            return Err(bad());
        }
        Ok(ToneSegment { freq, duration })
    }
}

/// Plain consecutive tones with unit amplitude, no crossfade.
pub fn tone_sequence(segments: &[ToneSegment], sample_rate: f64) -> Result<AudioBuffer> {
    let mut out = AudioBuffer {
        sample_rate,
        samples: Vec::new(),
    };
    for seg in segments {
        if seg.freq == 0.0 {
            out.append(&AudioBuffer::silence(sample_rate, seg.duration));
        } else {
            out.append(&generate_sine(
                seg.freq,
                seg.duration,
                sample_rate,
                1.0,
                0.0,
            )?);
        }
    }
    Ok(out)
}

/// Add white Gaussian noise so the full-buffer signal-to-noise ratio equals
/// `snr_db`. `f64::INFINITY` returns the signal unchanged.
pub fn mix_noise(signal: &AudioBuffer, snr_db: f64, seed: u64) -> Result<AudioBuffer> {
    if snr_db == f64::INFINITY {
        return Ok(signal.clone());
    }
    if snr_db.is_nan() {
        return Err(Error::InvalidParameter("SNR must not be NaN".into()));
    }
    let p_signal = signal.power();
    if p_signal == 0.0 {
        return Err(Error::SilentSignal);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..signal.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let p_noise = power(&noise);
    let target = p_signal / 10f64.powf(snr_db / 10.0);
    let scale = (target / p_noise).sqrt();
    let samples = signal
        .samples
        .iter()
        .zip(&noise)
        .map(|(s, n)| s + scale * n)
        .collect();
    Ok(AudioBuffer {
        sample_rate: signal.sample_rate,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sine_quarter_period_peak() {
        let b = generate_sine(100.0, 0.01, 48_000.0, 1.0, 0.0).unwrap();
        // t = 0.25 / 100 s = sample 120
        assert!((b.samples[120] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_duration_is_empty() {
        assert!(generate_sine(100.0, 0.0, 48_000.0, 1.0, 0.0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn sine_rejects_out_of_range() {
        assert!(generate_sine(0.0, 1.0, 48_000.0, 1.0, 0.0).is_err());
        assert!(generate_sine(24_000.0, 1.0, 48_000.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn sine_power_over_whole_periods() {
        for (f, a) in [(100.0, 1.0), (440.0, 0.3), (1000.0, 2.0)] {
            let b = generate_sine(f, 1.0, 48_000.0, a, 0.7).unwrap();
            assert_relative_eq!(b.power(), a * a / 2.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn a_series_stimulus() {
        let segs: Vec<ToneSegment> = [27.5, 110.0, 440.0, 1760.0]
            .iter()
            .map(|&freq| ToneSegment {
                freq,
                duration: 1.0,
            })
            .collect();
        let b = tone_sequence(&segs, 48_000.0).unwrap();
        assert_eq!(b.len(), 4 * 48_000);
        assert_eq!(b.samples[48_000], 0.0);
    }

    #[test]
    fn tone_segment_parsing() {
        let s: ToneSegment = "27.5:1".parse().unwrap();
        assert_eq!(
            s,
            ToneSegment {
                freq: 27.5,
                duration: 1.0
            }
        );
        assert_eq!("rest:0.5".parse::<ToneSegment>().unwrap().freq, 0.0);
        assert!("440".parse::<ToneSegment>().is_err());
        assert!("a:b".parse::<ToneSegment>().is_err());
    }

    #[test]
    fn infinite_snr_is_identity() {
        let b = generate_sine(440.0, 0.1, 48_000.0, 1.0, 0.0).unwrap();
        assert_eq!(mix_noise(&b, f64::INFINITY, 1).unwrap(), b);
    }

    #[test]
    fn minus_four_db_noise_power() {
        let b = generate_sine(440.0, 1.0, 48_000.0, 1.0, 0.0).unwrap();
        let noisy = mix_noise(&b, -4.0, 7).unwrap();
        let noise: Vec<f64> = noisy
            .samples
            .iter()
            .zip(&b.samples)
            .map(|(a, s)| a - s)
            .collect();
        assert_relative_eq!(
            power(&noise) / b.power(),
            10f64.powf(0.4),
            max_relative = 1e-9
        );
        assert!((power(&noise) / b.power() - 2.51).abs() < 0.01);
    }

    #[test]
    fn measured_snr_matches_for_many_seeds() {
        let b = generate_sine(440.0, 0.5, 48_000.0, 0.8, 0.0).unwrap();
        for seed in 0..20 {
            let snr = -15.0 + seed as f64;
            let noisy = mix_noise(&b, snr, seed).unwrap();
            let noise: Vec<f64> = noisy
                .samples
                .iter()
                .zip(&b.samples)
                .map(|(a, s)| a - s)
                .collect();
            let measured = 10.0 * (b.power() / power(&noise)).log10();
            assert!(
                (measured - snr).abs() < 0.01,
                "seed {seed}: {measured} vs {snr}"
            );
        }
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let b = generate_sine(440.0, 0.1, 48_000.0, 1.0, 0.0).unwrap();
        assert_eq!(
            mix_noise(&b, 0.0, 3).unwrap(),
            mix_noise(&b, 0.0, 3).unwrap()
        );
        assert_ne!(
            mix_noise(&b, 0.0, 3).unwrap(),
            mix_noise(&b, 0.0, 4).unwrap()
        );
    }

    #[test]
    fn silent_signal_is_rejected() {
        let b = AudioBuffer::silence(48_000.0, 0.1);
        assert!(matches!(mix_noise(&b, 0.0, 1), Err(Error::SilentSignal)));
    }
}
