//! Banks of detectors sharing one input stream.
//!
//! Building a bank compiles each request into a runtime detector: the
//! frequency-shift band is chosen, the characteristic frequency is corrected
//! for the integrator's frequency warp, the Lyapunov coefficient is derived
//! from the requested bandwidth and the output gain is looked up. Processing
//! is streaming: state carries over between calls and the output does not
//! depend on how the input is split into chunks.

mod calibrate;
mod laws;
mod normalize;
mod response;

use std::str::FromStr;

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;

pub use calibrate::{
    calibrate_amp_scale, calibration_grid, matched_peak, AmpScaleTable, REFERENCE_HZ,
};
pub use laws::{
    bandwidth_to_lyapunov, lyapunov_amplitude_rescale, lyapunov_for_request, min_bandwidth,
    predicted_neighbor_ratio,
};
pub use normalize::{amplitude_normalize, search_normalize, AmplitudeNormalizer};
pub use response::ResponseMatrix;

use crate::resonator::{
    check_damping, check_frequency, DetectorSpec, DetectorState, Features, Resonator,
};
use crate::shift::{plan_shifts, HilbertFir, ShiftPlan, SsbShifter};
use crate::signal::generate_sine;
use crate::tables::SAMPLE_RATE_GRID;
use crate::{Error, Result, SolverMethod};

/// Requested -3 dB bandwidth of a detector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BandwidthRequest {
    /// The narrowest the damping allows: a degenerate (`b = 0`) detector.
    Minimum,
    Hz(f64),
}

impl FromStr for BandwidthRequest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("min") || s.eq_ignore_ascii_case("minimum") {
            return Ok(BandwidthRequest::Minimum);
        }
        s.parse::<f64>()
            .map(BandwidthRequest::Hz)
            .map_err(|e| Error::Parse {
                what: "bandwidth".into(),
                reason: format!("{s:?}: {e}"),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorRequest {
    pub freq: f64,
    pub bandwidth: BandwidthRequest,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BankConfig {
    pub sample_rate: f64,
    pub method: SolverMethod,
    pub detectors: Vec<DetectorRequest>,
    pub damping: f64,
    /// Forcing amplitude `X`.
    pub gain: f64,
    pub features: Features,
    /// Calibrated gains used when `features.amplitude_scale` is set. Without
    /// one, the needed gains are measured while building.
    pub amp_table: Option<AmpScaleTable>,
    /// Quadrature filter length for shifted bands; defaults by sample rate.
    pub hilbert_taps: Option<usize>,
}

impl BankConfig {
    pub fn new(sample_rate: f64, method: SolverMethod) -> Self {
        BankConfig {
            sample_rate,
            method,
            detectors: Vec::new(),
            damping: DetectorSpec::DEFAULT_DAMPING,
            gain: DetectorSpec::DEFAULT_GAIN,
            features: Features::default(),
            amp_table: None,
            hilbert_taps: None,
        }
    }

    pub fn with_detectors(mut self, freqs: &[f64], bandwidth: BandwidthRequest) -> Self {
        self.detectors.extend(
            freqs
                .iter()
                .map(|&freq| DetectorRequest { freq, bandwidth }),
        );
        self
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        self
    }

    pub fn with_features(mut self, features: Features) -> Self {
        self.features = features;
        self
    }
}

/// A compiled detector and its running state.
#[derive(Clone, Debug)]
pub struct DetectorRuntime {
    /// Nominal frequency, resolved Lyapunov coefficient, damping and gain.
    pub spec: DetectorSpec,
    /// Frequency the resonator actually runs at (after any shift and search
    /// normalization).
    pub f_adjusted: f64,
    pub shift_band: usize,
    pub amp_scale: f64,
    pub state: DetectorState,
    resonator: Resonator,
    channel: usize,
    normalizer: Option<AmplitudeNormalizer>,
}

impl DetectorRuntime {
    /// Frequency the input component of interest appears at after shifting.
    pub fn landing_hz(&self, plan: &ShiftPlan) -> f64 {
        self.spec.f0 - plan.downshift_for(self.shift_band)
    }

    fn reset(&mut self) {
        self.state = DetectorState::default();
        if let Some(n) = self.normalizer.as_mut() {
            n.reset();
        }
    }
}

#[derive(Clone, Debug)]
struct DriveChannel {
    band: usize,
    shifter: Option<SsbShifter>,
    /// Last drive sample of the previous chunk.
    prev: f64,
}

#[derive(Clone, Debug)]
pub struct DetectorBank {
    config: BankConfig,
    plan: ShiftPlan,
    detectors: Vec<DetectorRuntime>,
    channels: Vec<DriveChannel>,
    filter: HilbertFir,
    position: u64,
}

/// Seconds of matched tone used to find the amplitude-normalization
/// reference: long enough to approach the plateau.
fn reference_seconds(damping: f64, sample_rate: f64) -> f64 {
    if damping <= 0.0 {
        return 1.0;
    }
    let decay_rate = damping * sample_rate / 2.0;
    (8.0 / decay_rate).clamp(1.0, 10.0)
}

fn normalization_reference(
    resonator: &Resonator,
    f: f64,
    sample_rate: f64,
    damping: f64,
) -> Result<f64> {
    let tone = generate_sine(
        f,
        reference_seconds(damping, sample_rate),
        sample_rate,
        1.0,
        0.0,
    )?;
    let mut norm = AmplitudeNormalizer::new(sample_rate.round() as usize, 1.0);
    let mut peak = 0.0f64;
    resonator.drive(tone.samples.iter().copied(), |z| {
        peak = peak.max(norm.apply(z).norm());
    });
    Ok(if peak > 0.0 { 1.0 / peak } else { 1.0 })
}

pub fn build_bank(config: BankConfig) -> Result<DetectorBank> {
    DetectorBank::build(config)
}

impl DetectorBank {
    pub fn build(config: BankConfig) -> Result<Self> {
        let sr = config.sample_rate;
        if !(sr.is_finite() && sr > 0.0) {
            return Err(Error::UnsupportedSampleRate(sr));
        }
        if !SAMPLE_RATE_GRID.contains(&sr) {
            warn!("sample rate {sr} Hz has not been characterized; tables are extrapolated");
        }
        check_damping(config.damping)?;
        if !(config.gain.is_finite() && config.gain > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "forcing gain must be positive (got {})",
                config.gain
            )));
        }
        for req in &config.detectors {
            check_frequency(req.freq, sr)?;
        }
        let features = config.features;
        if let Some(t) = &config.amp_table {
            if features.amplitude_scale && !t.matches(sr, config.method, features.search_normalize)
            {
                return Err(Error::InvalidParameter(format!(
                    "amplitude scale table is for sr={} method={} norm={}",
                    t.sample_rate,
                    t.method,
                    if t.search_normalized {
                        "search"
                    } else {
                        "none"
                    }
                )));
            }
        }

        let freqs: Vec<f64> = config.detectors.iter().map(|r| r.freq).collect();
        let mut plan = plan_shifts(&freqs, config.method, features.search_normalize, sr);
        if let Some(taps) = config.hilbert_taps {
            if taps < 3 || taps % 2 == 0 {
                return Err(Error::InvalidParameter(format!(
                    "quadrature filter length must be odd and >= 3 (got {taps})"
                )));
            }
            plan.filter_taps = taps;
            plan.delay = (taps - 1) / 2;
        }
        if !features.frequency_shift {
            plan.assignments.iter_mut().for_each(|a| *a = 0);
        }
        let filter = HilbertFir::new(plan.filter_taps);

        let mut channels: Vec<DriveChannel> = Vec::new();
        let mut detectors = Vec::with_capacity(config.detectors.len());
        let reference_peak = if features.amplitude_scale && config.amp_table.is_none() {
            Some(matched_peak(
                REFERENCE_HZ,
                sr,
                config.method,
                features.search_normalize,
                config.damping,
                config.gain,
            )?)
        } else {
            None
        };

        for (req, &band) in config.detectors.iter().zip(&plan.assignments) {
            let landing = req.freq - plan.downshift_for(band);
            let f_adjusted = if features.search_normalize {
                search_normalize(landing, sr, config.method)?
            } else {
                landing
            };
            let b = lyapunov_for_request(req.bandwidth, config.damping, sr, config.gain)?;
            let spec = DetectorSpec {
                f0: req.freq,
                mu: 0.0,
                b,
                damping: config.damping,
                gain: config.gain,
                method: config.method,
                features,
            };
            let tuned = DetectorSpec {
                f0: f_adjusted,
                ..spec
            };
            tuned.validate(sr)?;
            let resonator = Resonator::new(&tuned, sr);

            let amp_scale = if !features.amplitude_scale {
                1.0
            } else if let Some(table) = &config.amp_table {
                table.gain_at(landing).max(1.0)
            } else {
                let p = matched_peak(
                    landing,
                    sr,
                    config.method,
                    features.search_normalize,
                    config.damping,
                    config.gain,
                )?;
                (reference_peak.unwrap_or(p) / p).max(1.0)
            };

            let normalizer = if features.amplitude_normalize {
                let scale = normalization_reference(&resonator, landing, sr, config.damping)?;
                Some(AmplitudeNormalizer::new(sr.round() as usize, scale))
            } else {
                None
            };

            let channel = match channels.iter().position(|c| c.band == band) {
                Some(i) => i,
                None => {
                    channels.push(DriveChannel {
                        band,
                        shifter: (band > 0)
                            .then(|| SsbShifter::new(&filter, plan.downshift_for(band), sr)),
                        prev: 0.0,
                    });
                    channels.len() - 1
                }
            };

            detectors.push(DetectorRuntime {
                spec,
                f_adjusted,
                shift_band: band,
                amp_scale,
                state: DetectorState::default(),
                resonator,
                channel,
                normalizer,
            });
        }

        Ok(DetectorBank {
            config,
            plan,
            detectors,
            channels,
            filter,
            position: 0,
        })
    }

    pub fn config(&self) -> &BankConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> f64 {
        self.config.sample_rate
    }

    pub fn plan(&self) -> &ShiftPlan {
        &self.plan
    }

    pub fn detectors(&self) -> &[DetectorRuntime] {
        &self.detectors
    }

    pub fn len(&self) -> usize {
        self.detectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detectors.is_empty()
    }

    /// Nominal frequencies, in request order.
    pub fn labels(&self) -> Vec<f64> {
        self.detectors.iter().map(|d| d.spec.f0).collect()
    }

    /// Number of distinct drive signals (the unshifted input plus one per
    /// shifted band in use).
    pub fn drive_channels(&self) -> usize {
        self.channels.len()
    }

    /// Number of input samples consumed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Return every detector and shifter to its initial state.
    pub fn reset(&mut self) {
        self.position = 0;
        for d in &mut self.detectors {
            d.reset();
        }
        let sr = self.config.sample_rate;
        for c in &mut self.channels {
            c.prev = 0.0;
            if c.shifter.is_some() {
                c.shifter = Some(SsbShifter::new(
                    &self.filter,
                    self.plan.downshift_for(c.band),
                    sr,
                ));
            }
        }
    }

    /// Feed `samples` through every detector and return the envelopes.
    pub fn process(&mut self, samples: &[f64]) -> Result<ResponseMatrix> {
        self.run(samples, false)
    }

    /// As [`process`](Self::process), also returning the complex outputs.
    pub fn process_complex(&mut self, samples: &[f64]) -> Result<ResponseMatrix> {
        self.run(samples, true)
    }

    fn run(&mut self, samples: &[f64], keep_complex: bool) -> Result<ResponseMatrix> {
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput {
                position: self.position + i as u64,
            });
        }
        let start_sample = self.position;

        // Each drive carries the previous chunk's last sample in front.
        let drives: Vec<Vec<f64>> = self
            .channels
            .iter_mut()
            .map(|c| {
                let mut d = Vec::with_capacity(samples.len() + 1);
                d.push(c.prev);
                match c.shifter.as_mut() {
                    Some(s) => d.extend(samples.iter().map(|&x| s.push(x))),
                    None => d.extend_from_slice(samples),
                }
                c.prev = *d.last().unwrap();
                d
            })
            .collect();

        let outputs: Vec<(Vec<f64>, Option<Vec<Complex64>>)> = self
            .detectors
            .par_iter_mut()
            .map(|det| {
                let drive = &drives[det.channel];
                let mut env = Vec::with_capacity(samples.len());
                let mut cplx = keep_complex.then(|| Vec::with_capacity(samples.len()));
                for w in drive.windows(2) {
                    let z = det.resonator.advance(&mut det.state, w[0], w[1]);
                    let out = match det.normalizer.as_mut() {
                        Some(n) => n.apply(z),
                        None => z * det.amp_scale,
                    };
                    env.push(out.norm());
                    if let Some(c) = cplx.as_mut() {
                        c.push(out);
                    }
                }
                (env, cplx)
            })
            .collect();

        self.position += samples.len() as u64;
        let (envelopes, complex): (Vec<_>, Vec<_>) = outputs.into_iter().unzip();
        Ok(ResponseMatrix {
            sample_rate: self.config.sample_rate,
            start_sample,
            labels: self.labels(),
            envelopes,
            complex: keep_complex.then(|| complex.into_iter().map(Option::unwrap).collect()),
        })
    }
}
