//! Closed-form relations between bandwidth, Lyapunov coefficient, forcing
//! amplitude and damping.

use log::warn;

use super::BandwidthRequest;
use crate::tables::{
    DAMPING_GRID, LYAPUNOV_192K, LYAPUNOV_96K, LYAPUNOV_REFERENCE_GAIN, MIN_BANDWIDTH_HZ,
    SAMPLE_RATE_GRID,
};
use crate::{Error, Result};

/// Lyapunov coefficient giving a -3 dB bandwidth of `bandwidth_hz` for
/// forcing amplitude `gain`: `b = -12.5 B^3 / X^2`.
pub fn bandwidth_to_lyapunov(bandwidth_hz: f64, gain: f64) -> f64 {
    if bandwidth_hz == 0.0 {
        return 0.0;
    }
    -12.5 * bandwidth_hz.powi(3) / (gain * gain)
}

/// Carry a coefficient found for forcing amplitude `gain_from` over to
/// `gain_to`: `b1 = b0 (X0 / X1)^2`.
pub fn lyapunov_amplitude_rescale(b0: f64, gain_from: f64, gain_to: f64) -> f64 {
    b0 * (gain_from / gain_to).powi(2)
}

/// Expected ratio of a mismatched detector's peak envelope to the matched
/// one. Only characterized at 48 kHz.
pub fn predicted_neighbor_ratio(f_in: f64, f0: f64) -> f64 {
    1.0 / ((f_in - f0).abs() + 1.0)
}

fn interp(x0: f64, y0: f64, x1: f64, y1: f64, x: f64) -> f64 {
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

fn min_bandwidth_column(col: usize, damping: f64) -> f64 {
    let n = DAMPING_GRID.len();
    if damping < DAMPING_GRID[0] || damping > DAMPING_GRID[n - 1] {
        warn!("damping {damping} is outside the tabulated range; extrapolating linearly");
    }
    let seg = DAMPING_GRID
        .windows(2)
        .position(|w| damping <= w[1])
        .unwrap_or(n - 2);
    interp(
        DAMPING_GRID[seg],
        MIN_BANDWIDTH_HZ[seg][col],
        DAMPING_GRID[seg + 1],
        MIN_BANDWIDTH_HZ[seg + 1][col],
        damping,
    )
}

/// Narrowest bandwidth a detector can have for the given damping and sample
/// rate, interpolated linearly in damping. Rates other than 48, 96 and
/// 192 kHz scale the nearest column in proportion to the sample rate.
pub fn min_bandwidth(damping: f64, sample_rate: f64) -> Result<f64> {
    if !(sample_rate > 0.0) {
        return Err(Error::UnsupportedSampleRate(sample_rate));
    }
    if let Some(col) = SAMPLE_RATE_GRID.iter().position(|&s| s == sample_rate) {
        return Ok(min_bandwidth_column(col, damping));
    }
    let col = SAMPLE_RATE_GRID
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1.ln() - sample_rate.ln())
                .abs()
                .total_cmp(&(b.1.ln() - sample_rate.ln()).abs())
        })
        .map(|(i, _)| i)
        .unwrap();
    warn!(
        "no bandwidth data at {sample_rate} Hz; scaling the {} Hz column",
        SAMPLE_RATE_GRID[col]
    );
    Ok(min_bandwidth_column(col, damping) * sample_rate / SAMPLE_RATE_GRID[col])
}

/// Log-log interpolation of a high-rate Lyapunov table.
fn high_rate_lyapunov(table: &[(f64, f64)], bandwidth_hz: f64, sample_rate: f64) -> Result<f64> {
    let lowest = table[0].0;
    let highest = table[table.len() - 1].0;
    if bandwidth_hz < lowest {
        return Err(Error::UnsupportedBandwidthAtHighRate {
            requested: bandwidth_hz,
            lowest,
            sample_rate,
        });
    }
    if bandwidth_hz > highest {
        return Ok(bandwidth_to_lyapunov(bandwidth_hz, LYAPUNOV_REFERENCE_GAIN));
    }
    let seg = table
        .windows(2)
        .position(|w| bandwidth_hz <= w[1].0)
        .unwrap_or(table.len() - 2);
    let (b0, l0) = table[seg];
    let (b1, l1) = table[seg + 1];
    let log_mag = interp(b0.ln(), (-l0).ln(), b1.ln(), (-l1).ln(), bandwidth_hz.ln());
    Ok(-log_mag.exp())
}

/// Lyapunov coefficient for a bandwidth request at the bank's settings.
///
/// At 48 kHz (and untabulated rates) the closed form is used; at 96 and
/// 192 kHz the measured tables are interpolated because they do not follow
/// the same cubic law at small bandwidths.
pub fn lyapunov_for_request(
    request: BandwidthRequest,
    damping: f64,
    sample_rate: f64,
    gain: f64,
) -> Result<f64> {
    let bandwidth_hz = match request {
        BandwidthRequest::Minimum => return Ok(0.0),
        BandwidthRequest::Hz(b) => b,
    };
    if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive (got {bandwidth_hz})"
        )));
    }
    let minimum = min_bandwidth(damping, sample_rate)?;
    if bandwidth_hz < minimum {
        return Err(Error::BandwidthTooNarrow {
            requested: bandwidth_hz,
            minimum,
            damping,
            sample_rate,
        });
    }
    let at_reference = if sample_rate == 96_000.0 {
        high_rate_lyapunov(&LYAPUNOV_96K, bandwidth_hz, sample_rate)?
    } else if sample_rate == 192_000.0 {
        high_rate_lyapunov(&LYAPUNOV_192K, bandwidth_hz, sample_rate)?
    } else {
        return Ok(bandwidth_to_lyapunov(bandwidth_hz, gain));
    };
    Ok(lyapunov_amplitude_rescale(
        at_reference,
        LYAPUNOV_REFERENCE_GAIN,
        gain,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::LYAPUNOV_48K;
    use approx::assert_relative_eq;

    #[test]
    fn cubic_law_examples() {
        assert_relative_eq!(
            bandwidth_to_lyapunov(2.0, 25.0),
            -0.16,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            bandwidth_to_lyapunov(10.0, 25.0),
            -20.0,
            max_relative = 1e-12
        );
        assert_eq!(bandwidth_to_lyapunov(0.0, 25.0), 0.0);
    }

    #[test]
    fn cubic_law_tracks_measured_table() {
        for (b, measured) in LYAPUNOV_48K {
            let predicted = bandwidth_to_lyapunov(b, 25.0);
            assert!(
                ((predicted - measured) / measured).abs() <= 0.25,
                "{b}: {predicted} vs {measured}"
            );
        }
    }

    #[test]
    fn rescale_examples() {
        assert_relative_eq!(lyapunov_amplitude_rescale(-0.16, 25.0, 25.0), -0.16);
        assert_relative_eq!(
            lyapunov_amplitude_rescale(-0.16, 25.0, 5.0),
            -4.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn neighbor_ratio_examples() {
        assert_eq!(predicted_neighbor_ratio(440.0, 440.0), 1.0);
        assert_eq!(predicted_neighbor_ratio(441.0, 440.0), 0.5);
        assert_eq!(predicted_neighbor_ratio(439.0, 440.0), 0.5);
    }

    #[test]
    fn min_bandwidth_grid_points() {
        assert_relative_eq!(
            min_bandwidth(1e-4, 48_000.0).unwrap(),
            0.922,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            min_bandwidth(5e-4, 48_000.0).unwrap(),
            4.860,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            min_bandwidth(3e-4, 192_000.0).unwrap(),
            11.040,
            max_relative = 1e-12
        );
        for (row, d) in DAMPING_GRID.iter().enumerate() {
            for (col, sr) in SAMPLE_RATE_GRID.iter().enumerate() {
                assert_relative_eq!(
                    min_bandwidth(*d, *sr).unwrap(),
                    MIN_BANDWIDTH_HZ[row][col],
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn min_bandwidth_interpolates_and_extrapolates() {
        let mid = min_bandwidth(1.5e-4, 48_000.0).unwrap();
        assert_relative_eq!(mid, (0.922 + 1.832) / 2.0, max_relative = 1e-12);
        let above = min_bandwidth(6e-4, 48_000.0).unwrap();
        assert_relative_eq!(above, 4.860 + (4.860 - 3.606), max_relative = 1e-12);
        let cd_rate = min_bandwidth(1e-4, 44_100.0).unwrap();
        assert_relative_eq!(cd_rate, 0.922 * 44_100.0 / 48_000.0, max_relative = 1e-12);
    }

    #[test]
    fn request_mapping() {
        assert_eq!(
            lyapunov_for_request(BandwidthRequest::Minimum, 1e-4, 48_000.0, 5.0).unwrap(),
            0.0
        );
        let b = lyapunov_for_request(BandwidthRequest::Hz(6.0), 1e-4, 48_000.0, 25.0).unwrap();
        assert_relative_eq!(b, -4.32, max_relative = 1e-12);
        match lyapunov_for_request(BandwidthRequest::Hz(0.5), 1e-4, 48_000.0, 5.0) {
            Err(Error::BandwidthTooNarrow { minimum, .. }) => assert_relative_eq!(minimum, 0.922),
            other => panic!("expected BandwidthTooNarrow, got {other:?}"),
        }
    }

    #[test]
    fn high_rate_tables() {
        let b = lyapunov_for_request(BandwidthRequest::Hz(6.0), 1e-4, 96_000.0, 25.0).unwrap();
        assert_relative_eq!(b, -4.44, max_relative = 1e-12);
        // X = 5 rescales by (25/5)^2
        let b = lyapunov_for_request(BandwidthRequest::Hz(8.0), 1e-4, 192_000.0, 5.0).unwrap();
        assert_relative_eq!(b, -9.99 * 25.0, max_relative = 1e-12);
        let between =
            lyapunov_for_request(BandwidthRequest::Hz(5.0), 1e-4, 96_000.0, 25.0).unwrap();
        assert!(between < -1.25 && between > -4.44);
        assert!(matches!(
            lyapunov_for_request(BandwidthRequest::Hz(3.8), 1e-4, 192_000.0, 25.0),
            Err(Error::UnsupportedBandwidthAtHighRate { .. })
        ));
        // above the table the closed form takes over
        let wide = lyapunov_for_request(BandwidthRequest::Hz(20.0), 1e-4, 192_000.0, 25.0).unwrap();
        assert_relative_eq!(
            wide,
            bandwidth_to_lyapunov(20.0, 25.0),
            max_relative = 1e-12
        );
    }
}
