//! Published characterization data for degenerate and supercritical
//! detectors. These are the reference values the harness compares against
//! and the lookup data used when building banks.

use crate::SolverMethod;

/// Damping levels of the minimum-bandwidth grid.
pub const DAMPING_GRID: [f64; 5] = [1e-4, 2e-4, 3e-4, 4e-4, 5e-4];

/// Sample rates of the minimum-bandwidth grid, Hz.
pub const SAMPLE_RATE_GRID: [f64; 3] = [48_000.0, 96_000.0, 192_000.0];

/// Minimum detector bandwidth in Hz, indexed `[damping][sample rate]`.
pub const MIN_BANDWIDTH_HZ: [[f64; 3]; 5] = [
    [0.922, 1.824, 3.653],
    [1.832, 3.648, 7.307],
    [2.752, 5.496, 11.040],
    [3.606, 7.328, 14.700],
    [4.860, 9.160, 18.367],
];

/// Lyapunov coefficients measured for a given bandwidth at 48 kHz, `X = 25`.
pub const LYAPUNOV_48K: [(f64, f64); 5] = [
    (2.0, -0.160),
    (4.0, -1.278),
    (6.0, -4.303),
    (8.0, -10.183),
    (10.0, -19.863),
];

/// Lyapunov coefficients at 96 kHz, `X = 25`.
pub const LYAPUNOV_96K: [(f64, f64); 5] = [
    (2.0, -0.04),
    (4.0, -1.25),
    (6.0, -4.44),
    (8.0, -10.64),
    (10.0, -20.61),
];

/// Lyapunov coefficients at 192 kHz, `X = 25`. No value reaches 2 Hz.
pub const LYAPUNOV_192K: [(f64, f64); 4] =
    [(4.0, -0.32), (6.0, -3.60), (8.0, -9.99), (10.0, -20.43)];

/// Forcing amplitude the Lyapunov tables were measured with.
pub const LYAPUNOV_REFERENCE_GAIN: f64 = 25.0;

/// 10%->90% rise times at 48 kHz, `(damping, ms)`.
pub const RISE_TIME_MS: [(f64, f64); 5] = [
    (1e-4, 912.625),
    (2e-4, 458.146),
    (3e-4, 305.583),
    (4e-4, 229.562),
    (5e-4, 183.062),
];

/// Decay-to-1/e relaxation times at 48 kHz, `(damping, ms)`.
pub const RELAXATION_TIME_MS: [(f64, f64); 5] = [
    (1e-4, 416.396),
    (2e-4, 208.104),
    (3e-4, 138.667),
    (4e-4, 103.958),
    (5e-4, 83.1250),
];

/// Discrimination time of 27.5 Hz against 29.1 Hz, `(sample rate, ms)`.
pub const DISCRIMINATION_MS: [(f64, f64); 3] =
    [(48_000.0, 265.0), (96_000.0, 247.0), (192_000.0, 230.0)];

/// Frequency above which inputs are shifted down before detection.
pub fn shift_threshold_hz(method: SolverMethod, search_normalized: bool) -> f64 {
    match (method, search_normalized) {
        (SolverMethod::RungeKutta4, false) => 1600.0,
        (SolverMethod::RungeKutta4, true) => 2200.0,
        (SolverMethod::CentralDifference, false) => 500.0,
        (SolverMethod::CentralDifference, true) => 700.0,
    }
}

pub(crate) fn lookup<const N: usize>(table: &[(f64, f64); N], key: f64) -> Option<f64> {
    table
        .iter()
        .find(|(k, _)| (k - key).abs() <= 1e-9 * k.abs().max(1.0))
        .map(|(_, v)| *v)
}

/// Reference minimum bandwidth for an exact grid point.
pub fn min_bandwidth_reference(damping: f64, sample_rate: f64) -> Option<f64> {
    let row = DAMPING_GRID
        .iter()
        .position(|d| (d - damping).abs() < 1e-12)?;
    let col = SAMPLE_RATE_GRID.iter().position(|s| *s == sample_rate)?;
    Some(MIN_BANDWIDTH_HZ[row][col])
}

pub fn rise_time_reference_ms(damping: f64) -> Option<f64> {
    lookup(&RISE_TIME_MS, damping)
}

pub fn relaxation_time_reference_ms(damping: f64) -> Option<f64> {
    lookup(&RELAXATION_TIME_MS, damping)
}
