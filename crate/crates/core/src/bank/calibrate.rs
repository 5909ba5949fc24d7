//! Per-frequency output gains that equalize matched-detector responses.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::normalize::search_normalize;
use crate::resonator::{DetectorSpec, Resonator};
use crate::signal::generate_sine;
use crate::tables::shift_threshold_hz;
use crate::{Error, Result, SolverMethod};

/// Frequency every gain is relative to.
pub const REFERENCE_HZ: f64 = 100.0;

const POINTS_PER_OCTAVE: f64 = 24.0;
const LOWEST_HZ: f64 = 20.0;
const TONE_SECONDS: f64 = 1.0;

/// Calibration gains for one `(sample rate, method, normalization)` setting.
#[derive(Clone, Debug, PartialEq)]
pub struct AmpScaleTable {
    pub sample_rate: f64,
    pub method: SolverMethod,
    pub search_normalized: bool,
    /// `(f0, gain)` sorted by frequency.
    pub entries: Vec<(f64, f64)>,
}

impl AmpScaleTable {
    /// Gain at `f0`, interpolated linearly in log frequency and held constant
    /// beyond the ends of the table.
    pub fn gain_at(&self, f0: f64) -> f64 {
        let e = &self.entries;
        match e.len() {
            0 => return 1.0,
            1 => return e[0].1,
            _ => {}
        }
        if f0 <= e[0].0 {
            return e[0].1;
        }
        if f0 >= e[e.len() - 1].0 {
            return e[e.len() - 1].1;
        }
        let i = e.partition_point(|(f, _)| *f <= f0);
        let (f_lo, g_lo) = e[i - 1];
        let (f_hi, g_hi) = e[i];
        let w = (f0 / f_lo).ln() / (f_hi / f_lo).ln();
        g_lo + w * (g_hi - g_lo)
    }

    pub fn matches(&self, sample_rate: f64, method: SolverMethod, search_normalized: bool) -> bool {
        self.sample_rate == sample_rate
            && self.method == method
            && self.search_normalized == search_normalized
    }

    fn header(&self) -> String {
        format!(
            "# ampscale v1 sr={} method={} norm={}",
            self.sample_rate.round() as i64,
            self.method.tag(),
            if self.search_normalized {
                "search"
            } else {
                "none"
            }
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = self.header();
        s.push('\n');
        for (f, g) in &self.entries {
            s.push_str(&format!("{f},{g}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let err = |reason: String| Error::Parse {
            what: "amplitude scale table".into(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| err("empty file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "#" || fields[1] != "ampscale" || fields[2] != "v1" {
            return Err(err(format!("bad header {header:?}")));
        }
        let value = |field: &str, key: &str| -> Result<String> {
            field
                .strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .map(str::to_owned)
                .ok_or_else(|| err(format!("expected {key}= in header, found {field:?}")))
        };
        let sample_rate: f64 = value(fields[3], "sr")?
            .parse::<u32>()
            .map_err(|e| err(format!("sample rate: {e}")))?
            .into();
        let method: SolverMethod = value(fields[4], "method")?.parse()?;
        let search_normalized = match value(fields[5], "norm")?.as_str() {
            "search" => true,
            "none" => false,
            other => return Err(err(format!("unknown normalization {other:?}"))),
        };
        let mut entries = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (f, g) = line
                .split_once(',')
                .ok_or_else(|| err(format!("line {}: expected f0,gain", k + 2)))?;
            let f: f64 = f
                .trim()
                .parse()
                .map_err(|e| err(format!("line {}: {e}", k + 2)))?;
            let g: f64 = g
                .trim()
                .parse()
                .map_err(|e| err(format!("line {}: {e}", k + 2)))?;
            if !(f > 0.0 && g.is_finite() && g > 0.0) {
                return Err(err(format!("line {}: invalid entry {f},{g}", k + 2)));
            }
            entries.push((f, g));
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(AmpScaleTable {
            sample_rate,
            method,
            search_normalized,
            entries,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// 24 points per octave from 20 Hz up to the shift threshold, plus the
/// reference frequency.
pub fn calibration_grid(method: SolverMethod, search_normalized: bool) -> Vec<f64> {
    let top = shift_threshold_hz(method, search_normalized);
    let mut grid: Vec<f64> = (0..)
        .map(|k| LOWEST_HZ * 2f64.powf(k as f64 / POINTS_PER_OCTAVE))
        .take_while(|f| *f <= top * (1.0 + 1e-12))
        .collect();
    if !grid.iter().any(|f| (f - REFERENCE_HZ).abs() < 1e-9) {
        grid.push(REFERENCE_HZ);
        grid.sort_by(f64::total_cmp);
    }
    grid
}

/// Peak `|z|` of a matched degenerate detector driven by a 1 s unit tone.
pub fn matched_peak(
    f0: f64,
    sample_rate: f64,
    method: SolverMethod,
    search_normalized: bool,
    damping: f64,
    gain: f64,
) -> Result<f64> {
    let tuned = if search_normalized {
        search_normalize(f0, sample_rate, method)?
    } else {
        f0
    };
    let spec = DetectorSpec::new(tuned, method)
        .with_damping(damping)
        .with_gain(gain);
    spec.validate(sample_rate)?;
    let tone = generate_sine(f0, TONE_SECONDS, sample_rate, 1.0, 0.0)?;
    Ok(Resonator::new(&spec, sample_rate).peak(tone.samples.iter().copied()))
}

/// Measure the gain table over `grid`. Gains are `peak(100 Hz) / peak(f0)`,
/// floored at 1.
pub fn calibrate_amp_scale(
    grid: &[f64],
    sample_rate: f64,
    method: SolverMethod,
    search_normalized: bool,
) -> Result<AmpScaleTable> {
    let damping = DetectorSpec::DEFAULT_DAMPING;
    let gain = DetectorSpec::DEFAULT_GAIN;
    let reference = matched_peak(
        REFERENCE_HZ,
        sample_rate,
        method,
        search_normalized,
        damping,
        gain,
    )?;
    let peaks: Vec<f64> = grid
        .par_iter()
        .map(|&f| matched_peak(f, sample_rate, method, search_normalized, damping, gain))
        .collect::<Result<_>>()?;
    let mut entries: Vec<(f64, f64)> = grid
        .iter()
        .zip(peaks)
        .map(|(&f, p)| {
            let g = if (f - REFERENCE_HZ).abs() < 1e-9 {
                1.0
            } else {
                (reference / p).max(1.0)
            };
            (f, g)
        })
        .collect();
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(AmpScaleTable {
        sample_rate,
        method,
        search_normalized,
        entries,
    })
}
