//! Single-resonator Hopf dynamics and the two fixed-step integrators.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::{Error, Result};

/// Complex internal state `z` of a detector.
pub type ComplexState = Complex64;

/// Numerical method used to advance a detector by one sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolverMethod {
    RungeKutta4,
    CentralDifference,
}

impl SolverMethod {
    /// Short tag used in file headers and on the command line.
    pub fn tag(self) -> &'static str {
        match self {
            SolverMethod::RungeKutta4 => "rk4",
            SolverMethod::CentralDifference => "cd",
        }
    }
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk4" | "rungekutta4" | "runge-kutta" => Ok(SolverMethod::RungeKutta4),
            "cd" | "centraldifference" | "central-difference" => {
                Ok(SolverMethod::CentralDifference)
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown solver method '{other}' (expected rk4 or cd)"
            ))),
        }
    }
}

/// Optional processing stages applied around the raw resonator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Features {
    pub search_normalize: bool,
    pub amplitude_normalize: bool,
    pub amplitude_scale: bool,
    pub frequency_shift: bool,
}

/// Parameters of a single resonator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorSpec {
    /// Characteristic frequency in Hz.
    pub f0: f64,
    /// Distance from the bifurcation point. The bank always uses 0.
    pub mu: f64,
    /// First Lyapunov coefficient, `<= 0`.
    pub b: f64,
    /// Per-sample damping factor in `[0, 1)`.
    pub damping: f64,
    /// Forcing amplitude `X` applied to the input signal.
    pub gain: f64,
    pub method: SolverMethod,
    pub features: Features,
}

impl DetectorSpec {
    pub const DEFAULT_DAMPING: f64 = 1e-4;
    pub const DEFAULT_GAIN: f64 = 5.0;

    /// A degenerate (`b = 0`) detector with the default damping and gain.
    pub fn new(f0: f64, method: SolverMethod) -> Self {
        DetectorSpec {
            f0,
            mu: 0.0,
            b: 0.0,
            damping: Self::DEFAULT_DAMPING,
            gain: Self::DEFAULT_GAIN,
            method,
            features: Features::default(),
        }
    }

    pub fn with_lyapunov(mut self, b: f64) -> Self {
        self.b = b;
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

    pub fn omega(&self) -> f64 {
        TAU * self.f0
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        check_frequency(self.f0, sample_rate)?;
        if !(self.b <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Lyapunov coefficient must be <= 0 (got {})",
                self.b
            )));
        }
        check_damping(self.damping)?;
        if !self.gain.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "forcing gain must be finite (got {})",
                self.gain
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_frequency(f0: f64, sample_rate: f64) -> Result<()> {
    let limit = sample_rate / 2.0;
    if f0 > 0.0 && f0 < limit {
        Ok(())
    } else {
        Err(Error::FrequencyOutOfRange { freq: f0, limit })
    }
}

pub(crate) fn check_damping(damping: f64) -> Result<()> {
    if (0.0..1.0).contains(&damping) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "damping must lie in [0, 1) (got {damping})"
        )))
    }
}

/// State of one detector: `z[n]` plus the previous value needed by the
/// central-difference recurrence.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DetectorState {
    pub z: ComplexState,
    pub z_prev: Option<ComplexState>,
}

impl DetectorState {
    pub fn new(z: ComplexState) -> Self {
        DetectorState { z, z_prev: None }
    }
}

/// Vector field of the forced Hopf oscillator. The real forcing sample is
/// added to the real component.
#[inline]
pub fn hopf_derivative(z: ComplexState, mu: f64, omega: f64, b: f64, f: f64) -> ComplexState {
    let r2 = z.norm_sqr();
    Complex64::new(
        mu * z.re - omega * z.im + b * r2 * z.re + f,
        omega * z.re + mu * z.im + b * r2 * z.im,
    )
}

/// Per-sample amplitude retention for damping factor `d`.
///
/// `d` is the fraction of `|z|^2` removed each sample, so the amplitude is
/// scaled by `sqrt(1 - d)`.
#[inline]
pub fn damping_retention(d: f64) -> f64 {
    (1.0 - d).sqrt()
}

pub fn apply_damping(z: ComplexState, d: f64) -> ComplexState {
    z * damping_retention(d)
}

/// Eigenvalues of the linearization at the origin.
pub fn eigenvalues(mu: f64, omega: f64) -> (Complex64, Complex64) {
    (Complex64::new(mu, omega), Complex64::new(mu, -omega))
}

/// One-step amplification factor of classical RK4 applied to `dz/dt = j*omega*z`
/// with `theta = omega * T`.
pub fn rk4_amplification(theta: f64) -> Complex64 {
    let x = Complex64::new(0.0, theta);
    Complex64::new(1.0, 0.0) + x + x * x / 2.0 + x * x * x / 6.0 + x * x * x * x / 24.0
}

/// Root of `lambda^2 - 2j*theta*lambda - 1 = 0` continuous with `exp(j*theta)`.
pub fn central_difference_root(theta: f64) -> Complex64 {
    let j_theta = Complex64::new(0.0, theta);
    j_theta + (Complex64::new(1.0 - theta * theta, 0.0)).sqrt()
}

/// Frequency at which the discretized linear detector actually oscillates
/// when tuned to `f0`.
pub fn effective_frequency(method: SolverMethod, f0: f64, sample_rate: f64) -> Result<f64> {
    check_frequency(f0, sample_rate)?;
    Ok(effective_frequency_unchecked(method, f0, sample_rate))
}

pub(crate) fn effective_frequency_unchecked(
    method: SolverMethod,
    f0: f64,
    sample_rate: f64,
) -> f64 {
    let theta = TAU * f0 / sample_rate;
    let phase = match method {
        SolverMethod::RungeKutta4 => rk4_amplification(theta).arg(),
        SolverMethod::CentralDifference => central_difference_root(theta).arg(),
    };
    // arg() wraps at pi; an unwrapped phase beyond pi aliases anyway.
    phase.rem_euclid(TAU).min(PI) * sample_rate / TAU
}

/// A detector compiled for a fixed sample rate. The arithmetic here is the
/// single source for every stepping path in the crate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resonator {
    mu: f64,
    omega: f64,
    b: f64,
    gain: f64,
    dt: f64,
    retain: f64,
    retain_span: f64,
    method: SolverMethod,
}

impl Resonator {
    pub fn new(spec: &DetectorSpec, sample_rate: f64) -> Self {
        Resonator {
            mu: spec.mu,
            omega: spec.omega(),
            b: spec.b,
            gain: spec.gain,
            dt: 1.0 / sample_rate,
            retain: damping_retention(spec.damping),
            retain_span: 1.0 - spec.damping,
            method: spec.method,
        }
    }

    pub fn method(&self) -> SolverMethod {
        self.method
    }

    #[inline]
    fn derivative(&self, z: ComplexState, f: f64) -> ComplexState {
        hopf_derivative(z, self.mu, self.omega, self.b, f)
    }

    /// Classical RK4 over one sample period with the three stage forcings,
    /// followed by damping.
    #[inline]
    pub fn rk4(&self, z: ComplexState, f_n: f64, f_half: f64, f_next: f64) -> ComplexState {
        let h = self.dt;
        let k1 = self.derivative(z, f_n);
        let k2 = self.derivative(z + k1 * (0.5 * h), f_half);
        let k3 = self.derivative(z + k2 * (0.5 * h), f_half);
        let k4 = self.derivative(z + k3 * h, f_next);
        (z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)) * self.retain
    }

    /// Central difference `z[n+1] = z[n-1] + 2T f(z[n])`, damped over the two
    /// samples it spans. The first call bootstraps `z[n-1]` with one explicit
    /// Euler step taken backwards.
    ///
    /// The cubic term is evaluated at `z[n-1]`: leapfrog is unconditionally
    /// unstable for dissipative terms taken at the centre point, while the
    /// lagged form is stable whenever `2T |b| |z|^2 < 2`. With `b = 0` this is
    /// the plain recurrence.
    #[inline]
    pub fn central_difference(&self, state: &mut DetectorState, f_n: f64) -> ComplexState {
        let h = self.dt;
        let z = state.z;
        let prev = state
            .z_prev
            .unwrap_or_else(|| z - self.derivative(z, f_n) * h);
        let linear = Complex64::new(
            self.mu * z.re - self.omega * z.im + f_n,
            self.omega * z.re + self.mu * z.im,
        );
        let cubic = prev * (self.b * prev.norm_sqr());
        let next = (prev + (linear + cubic) * (2.0 * h)) * self.retain_span;
        state.z_prev = Some(z);
        state.z = next;
        next
    }

    /// Advance by one input sample using the bank's framing: RK4 integrates
    /// from the previous sample to the current one (midpoint forcing by linear
    /// interpolation); central difference uses the current sample. The input
    /// is multiplied by the forcing gain.
    #[inline]
    pub fn advance(&self, state: &mut DetectorState, x_prev: f64, x: f64) -> ComplexState {
        match self.method {
            SolverMethod::RungeKutta4 => {
                let f0 = self.gain * x_prev;
                let f1 = self.gain * x;
                state.z = self.rk4(state.z, f0, 0.5 * (f0 + f1), f1);
                state.z
            }
            SolverMethod::CentralDifference => self.central_difference(state, self.gain * x),
        }
    }

    /// Run a fresh detector over `input`, calling `visit` with every new state.
    pub fn drive(&self, input: impl IntoIterator<Item = f64>, mut visit: impl FnMut(ComplexState)) {
        let mut state = DetectorState::default();
        let mut prev = 0.0;
        for x in input {
            visit(self.advance(&mut state, prev, x));
            prev = x;
        }
    }

    /// Largest `|z|` reached over `input` by a fresh detector.
    pub fn peak(&self, input: impl IntoIterator<Item = f64>) -> f64 {
        let mut peak = 0.0f64;
        self.drive(input, |z| peak = peak.max(z.norm()));
        peak
    }
}

/// One RK4 sample step of a detector. `f_n`, `f_half` and `f_next` are the
/// forcing values at `t`, `t + T/2` and `t + T`.
pub fn step_rk4(
    state: &DetectorState,
    spec: &DetectorSpec,
    dt: f64,
    f_n: f64,
    f_half: f64,
    f_next: f64,
) -> DetectorState {
    let r = Resonator::new(spec, 1.0 / dt);
    DetectorState {
        z: r.rk4(state.z, f_n, f_half, f_next),
        z_prev: Some(state.z),
    }
}

/// One central-difference sample step of a detector.
pub fn step_central_difference(
    state: &DetectorState,
    spec: &DetectorSpec,
    dt: f64,
    f_n: f64,
) -> DetectorState {
    let r = Resonator::new(spec, 1.0 / dt);
    let mut next = *state;
    r.central_difference(&mut next, f_n);
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const SR: f64 = 48_000.0;

    #[test]
    fn derivative_examples() {
        let w = TAU * 100.0;
        assert_eq!(
            hopf_derivative(Complex64::new(0.0, 0.0), 0.3, w, -2.0, 0.0),
            Complex64::new(0.0, 0.0)
        );
        assert_eq!(
            hopf_derivative(Complex64::new(1.0, 0.0), 0.0, w, 0.0, 0.0),
            Complex64::new(0.0, w)
        );
        assert_eq!(
            hopf_derivative(Complex64::new(1.0, 0.0), 0.0, w, -1.0, 0.0),
            Complex64::new(-1.0, w)
        );
        // forcing lands on the real part only
        assert_eq!(
            hopf_derivative(Complex64::new(0.0, 0.0), 0.0, w, 0.0, 2.5),
            Complex64::new(2.5, 0.0)
        );
    }

    #[test]
    fn eigenvalue_examples() {
        let w = TAU * 100.0;
        assert_eq!(
            eigenvalues(0.0, w),
            (Complex64::new(0.0, w), Complex64::new(0.0, -w))
        );
        assert_eq!(
            eigenvalues(-1.0, 1.0),
            (Complex64::new(-1.0, 1.0), Complex64::new(-1.0, -1.0))
        );
        assert_eq!(
            eigenvalues(0.5, 0.0),
            (Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0))
        );
    }

    #[test]
    fn damping_examples() {
        let z = Complex64::new(1.0, 1.0);
        assert_eq!(apply_damping(z, 0.0), z);
        assert_relative_eq!(
            apply_damping(Complex64::new(1.0, 0.0), 1e-4).re,
            (1.0f64 - 1e-4).sqrt()
        );
        // |z|^2 loses exactly the fraction d
        assert_relative_eq!(
            apply_damping(z, 1e-4).norm_sqr(),
            z.norm_sqr() * (1.0 - 1e-4),
            max_relative = 1e-15
        );
    }

    #[test]
    fn zero_state_stays_zero() {
        for method in [SolverMethod::RungeKutta4, SolverMethod::CentralDifference] {
            let spec = DetectorSpec::new(440.0, method).with_lyapunov(-3.0);
            let mut s = DetectorState::default();
            s = step_rk4(&s, &spec, 1.0 / SR, 0.0, 0.0, 0.0);
            assert_eq!(s.z, Complex64::new(0.0, 0.0));
            let mut s = DetectorState::default();
            for _ in 0..10 {
                s = step_central_difference(&s, &spec, 1.0 / SR, 0.0);
            }
            assert_eq!(s.z, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn undamped_detector_holds_its_level_after_the_tone() {
        let spec = DetectorSpec::new(100.0, SolverMethod::RungeKutta4).with_damping(0.0);
        let r = Resonator::new(&spec, SR);
        let n = SR as usize;
        let tone = (0..n).map(|i| (TAU * 100.0 * i as f64 / SR).sin());
        let mut last = Vec::new();
        let silence = std::iter::repeat_n(0.0, n);
        r.drive(tone.chain(silence), |z| last.push(z.norm()));
        let at_offset = last[n - 1];
        let end = *last.last().unwrap();
        assert!(at_offset > 1.0);
        assert_relative_eq!(end, at_offset, max_relative = 1e-2);
    }

    #[test]
    fn effective_frequency_limits() {
        // warp is O(theta^4) for RK4 and O(theta^2) for central difference
        for (method, tol) in [
            (SolverMethod::RungeKutta4, 1e-12),
            (SolverMethod::CentralDifference, 1e-6),
        ] {
            let f = effective_frequency(method, 10.0, SR).unwrap();
            assert!(((f - 10.0) / 10.0).abs() < tol, "{method}: {f}");
        }
        assert!(effective_frequency(SolverMethod::RungeKutta4, 0.0, SR).is_err());
        assert!(effective_frequency(SolverMethod::RungeKutta4, 24_000.0, SR).is_err());
        // RK4 lags, central difference leads
        assert!(effective_frequency(SolverMethod::RungeKutta4, 3000.0, SR).unwrap() < 3000.0);
        assert!(effective_frequency(SolverMethod::CentralDifference, 3000.0, SR).unwrap() > 3000.0);
    }

    #[test]
    fn rk4_amplification_matches_one_step() {
        let spec = DetectorSpec::new(1234.0, SolverMethod::RungeKutta4).with_damping(0.0);
        let s = step_rk4(
            &DetectorState::new(Complex64::new(1.0, 0.0)),
            &spec,
            1.0 / SR,
            0.0,
            0.0,
            0.0,
        );
        let expect = rk4_amplification(TAU * 1234.0 / SR);
        assert_relative_eq!(s.z.re, expect.re, max_relative = 1e-14);
        assert_relative_eq!(s.z.im, expect.im, max_relative = 1e-14);
    }

    fn zero_crossing_frequency(samples: &[f64], sample_rate: f64) -> f64 {
        let crossings: Vec<f64> = samples
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] < 0.0 && w[1] >= 0.0)
            .map(|(i, w)| i as f64 + w[0] / (w[0] - w[1]))
            .collect();
        let span = crossings.last().unwrap() - crossings[0];
        (crossings.len() - 1) as f64 * sample_rate / span
    }

    #[test]
    fn central_difference_oscillates_at_its_effective_frequency() {
        let f0 = 1000.0;
        let spec = DetectorSpec::new(f0, SolverMethod::CentralDifference).with_damping(0.0);
        let r = Resonator::new(&spec, SR);
        let mut state = DetectorState::new(Complex64::new(1.0, 0.0));
        let re: Vec<f64> = (0..100_000)
            .map(|_| r.central_difference(&mut state, 0.0).re)
            .collect();
        let measured = zero_crossing_frequency(&re, SR);
        let expected = effective_frequency(SolverMethod::CentralDifference, f0, SR).unwrap();
        assert!(
            ((measured - expected) / expected).abs() < 1e-6,
            "{measured} vs {expected}"
        );
    }

    #[test]
    fn rk4_oscillates_at_its_effective_frequency() {
        let f0 = 3000.0;
        let spec = DetectorSpec::new(f0, SolverMethod::RungeKutta4).with_damping(0.0);
        let r = Resonator::new(&spec, SR);
        let mut z = Complex64::new(1.0, 0.0);
        let re: Vec<f64> = (0..100_000)
            .map(|_| {
                z = r.rk4(z, 0.0, 0.0, 0.0);
                z.re
            })
            .collect();
        let measured = zero_crossing_frequency(&re, SR);
        let expected = effective_frequency(SolverMethod::RungeKutta4, f0, SR).unwrap();
        assert!(
            ((measured - expected) / expected).abs() < 1e-6,
            "{measured} vs {expected}"
        );
    }

    #[test]
    fn spec_validation() {
        let spec = DetectorSpec::new(440.0, SolverMethod::RungeKutta4);
        assert!(spec.validate(SR).is_ok());
        assert!(spec.with_lyapunov(0.1).validate(SR).is_err());
        assert!(spec.with_damping(1.0).validate(SR).is_err());
        assert!(spec.with_damping(-0.1).validate(SR).is_err());
        assert!(DetectorSpec::new(30_000.0, SolverMethod::RungeKutta4)
            .validate(SR)
            .is_err());
    }

    #[test]
    fn method_tags_round_trip() {
        for m in [SolverMethod::RungeKutta4, SolverMethod::CentralDifference] {
            assert_eq!(m.tag().parse::<SolverMethod>().unwrap(), m);
        }
        assert!("euler".parse::<SolverMethod>().is_err());
    }
}
