use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use clap::Args;
use hopfbank::bank::{calibrate_amp_scale, calibration_grid, AmpScaleTable};
use hopfbank::characterize::{
    self, ExperimentReport, Measurement, RunSettings, Tolerance, PEAK_CONFIRM_DROP,
};
use hopfbank::shift::{ssb_shift, HilbertFir};
use hopfbank::signal::{read_wav, tone_sequence, write_response_csv, AudioBuffer};
use hopfbank::tables::{
    min_bandwidth_reference, relaxation_time_reference_ms, rise_time_reference_ms,
    DISCRIMINATION_MS,
};
use hopfbank::{BandwidthRequest, BankConfig, DetectorBank, Error, Result, SolverMethod};

use crate::{Common, Norm};

const MIN_BANDWIDTH_TOL: f64 = 0.15;
const CONFIGURED_BANDWIDTH_TOL: f64 = 0.15;
const TIMING_TOL: f64 = 0.10;
const UNCERTAINTY_TARGET: f64 = 0.464;
const UNCERTAINTY_TOL: f64 = 0.05;
const UNCERTAINTY_BOUND: f64 = 0.5;
const ARTEFACT_PROMINENCE_DB: f64 = 6.0;

impl Common {
    fn settings(&self) -> RunSettings {
        RunSettings::new(self.sr, self.method)
            .with_damping(self.damping)
            .with_gain(self.gain)
            .with_search_normalize(self.norm == Norm::Search)
    }

    fn bank_config(&self, sample_rate: f64, freqs: &[f64]) -> Result<BankConfig> {
        let mut config = RunSettings {
            sample_rate,
            ..self.settings()
        }
        .bank_config(freqs, self.bandwidth);
        config.features.amplitude_normalize = self.amp_normalize;
        config.features.amplitude_scale = self.amp_scale;
        config.features.frequency_shift = self.freq_shift;
        if let Some(path) = &self.amp_table {
            config.amp_table = Some(AmpScaleTable::read(path)?);
        }
        Ok(config)
    }

    fn base_report(&self, id: &str) -> ExperimentReport {
        self.report_at(id, self.sr)
    }

    fn report_at(&self, id: &str, sample_rate: f64) -> ExperimentReport {
        let mut r = ExperimentReport::new(id);
        r.param("sample_rate_hz", sample_rate)
            .param("method", self.method)
            .param("norm", format!("{:?}", self.norm).to_lowercase())
            .param("damping", self.damping)
            .param("gain", self.gain);
        r
    }

    fn input(&self) -> Result<AudioBuffer> {
        match (&self.input, self.tone.is_empty()) {
            (Some(_), false) => Err(Error::InvalidParameter(
                "give either --in or --tone, not both".into(),
            )),
            (Some(path), true) => read_wav(path),
            (None, false) => tone_sequence(&self.tone, self.sr),
            (None, true) => Err(Error::InvalidParameter(
                "an input is required: --in or --tone".into(),
            )),
        }
    }

    fn require_freqs(&self) -> Result<&[f64]> {
        if self.freqs.is_empty() {
            Err(Error::InvalidParameter("--freqs is required".into()))
        } else {
            Ok(&self.freqs)
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidParameter(format!("{}: {e}", path.display()))
}

fn finish(report: ExperimentReport, out: &Path) -> Result<ExperimentReport> {
    report.write(out)?;
    Ok(report)
}

#[derive(Args, Debug)]
pub struct RespondArgs {
    /// Also write the complex trajectory of these detectors (Hz), or `all`.
    #[arg(long, value_delimiter = ',')]
    complex: Vec<String>,
    /// Shift the whole input down by this many Hz before the bank.
    #[arg(long, value_name = "HZ")]
    demo_shift: Option<f64>,
    /// Write the quadrature FIR coefficients, one per line.
    #[arg(long)]
    dump_taps: bool,
}

pub fn respond(c: &Common, a: &RespondArgs) -> Result<ExperimentReport> {
    let freqs = c.require_freqs()?;
    let mut audio = c.input()?;
    let sr = audio.sample_rate;
    if let Some(shift) = a.demo_shift {
        audio.samples = ssb_shift(&audio.samples, shift, sr);
    }
    let mut bank = DetectorBank::build(c.bank_config(sr, freqs)?)?;
    let want_complex = !a.complex.is_empty();
    let m = if want_complex {
        bank.process_complex(&audio.samples)?
    } else {
        bank.process(&audio.samples)?
    };
    if c.csv_decimate == 0 {
        return Err(Error::InvalidParameter(
            "--csv-decimate must be >= 1".into(),
        ));
    }
    fs::create_dir_all(&c.out).map_err(|e| io_error(&c.out, e))?;
    write_response_csv(&m, c.out.join("response.csv"), c.csv_decimate)?;

    if want_complex {
        let all = a.complex.iter().any(|s| s.eq_ignore_ascii_case("all"));
        let chosen: Vec<usize> = if all {
            (0..freqs.len()).collect()
        } else {
            let mut idx = Vec::new();
            for s in &a.complex {
                let f: f64 = s.parse().map_err(|_| {
                    Error::InvalidParameter(format!("--complex: '{s}' is not a frequency"))
                })?;
                let i = freqs
                    .iter()
                    .position(|g| (g - f).abs() < 1e-9)
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!("--complex: {f} Hz is not in --freqs"))
                    })?;
                idx.push(i);
            }
            idx
        };
        let z = m.complex.as_ref().expect("complex output requested");
        let mut text = String::from("time_s");
        for &i in &chosen {
            let _ = write!(text, ",re_{0},im_{0}", freqs[i]);
        }
        text.push('\n');
        for n in (0..m.len()).step_by(c.csv_decimate) {
            let _ = write!(text, "{:.8e}", m.time(n));
            for &i in &chosen {
                let _ = write!(text, ",{:.8e},{:.8e}", z[i][n].re, z[i][n].im);
            }
            text.push('\n');
        }
        write_file(&c.out.join("complex.csv"), &text)?;
    }

    if a.dump_taps {
        let fir = HilbertFir::for_sample_rate(sr);
        let mut text = String::new();
        for t in fir.taps() {
            let _ = writeln!(text, "{t:.17e}");
        }
        write_file(&c.out.join("hilbert_taps.csv"), &text)?;
    }

    let mut r = c.report_at("respond", sr);
    r.param("samples", audio.len());
    if let Some(shift) = a.demo_shift {
        r.param("demo_shift_hz", shift);
    }
    for (i, f) in freqs.iter().enumerate() {
        r.push(Measurement::new(format!("peak_{f}"), m.peak(i), "1"));
    }
    finish(r, &c.out)
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Input tone frequency, Hz.
    #[arg(long, default_value_t = 400.0)]
    f_in: f64,
    /// Detector grid density, points per octave.
    #[arg(long, default_value_t = 24.0)]
    per_octave: f64,
    /// Tone duration, s.
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
    /// Run without frequency shifting (detectors above the threshold are
    /// dropped from the grid).
    #[arg(long)]
    no_shift: bool,
}

pub fn sweep(c: &Common, a: &SweepArgs) -> Result<ExperimentReport> {
    let settings = c.settings();
    let grid = if c.freqs.is_empty() {
        None
    } else {
        Some(c.freqs.clone())
    };
    let grid = if a.no_shift {
        let threshold = hopfbank::tables::shift_threshold_hz(c.method, c.norm == Norm::Search);
        let full = grid.unwrap_or_else(|| characterize::sweep_grid(c.sr, a.per_octave, &[a.f_in]));
        Some(full.into_iter().filter(|f| *f <= threshold).collect())
    } else {
        grid.or_else(|| {
            let threshold = hopfbank::tables::shift_threshold_hz(c.method, c.norm == Norm::Search);
            let mut extra = vec![a.f_in];
            extra.extend(characterize::expected_artefacts(a.f_in, threshold, c.sr).map(|e| e.1));
            Some(characterize::sweep_grid(c.sr, a.per_octave, &extra))
        })
    };
    let result = characterize::sweep(&settings, a.f_in, !a.no_shift, grid, a.duration)?;
    write_file(&c.out.join("sweep_response.csv"), &result.to_csv())?;

    let mut r = c.base_report("sweep");
    r.param("f_in_hz", a.f_in)
        .param("frequency_shift", !a.no_shift)
        .param("detectors", result.freqs.len());
    let step = 2f64.powf(1.0 / a.per_octave) - 1.0;
    r.push(
        Measurement::new("main_peak_hz", result.main_hz(), "Hz")
            .reference(a.f_in)
            .tolerance(Tolerance::Relative(step)),
    );
    for art in &result.artefacts {
        let name = format!("{}_{:.0}", art.label, art.expected_hz);
        r.push(Measurement::new(
            format!("{name}_detector_hz"),
            art.detector_hz,
            "Hz",
        ));
        r.push(
            Measurement::new(format!("{name}_relative"), art.relative_db, "dB")
                .tolerance(Tolerance::AtMost(0.0))
                .note("below the main peak"),
        );
        if !a.no_shift {
            r.push(
                Measurement::new(format!("{name}_prominence"), art.prominence_db, "dB")
                    .tolerance(Tolerance::AtLeast(ARTEFACT_PROMINENCE_DB))
                    .note("artefact present"),
            );
        }
    }
    finish(r, &c.out)
}

#[derive(Args, Debug)]
pub struct BandwidthArgs {
    /// Tone and centre detector frequency, Hz.
    #[arg(long, default_value_t = 440.0)]
    f0: f64,
    /// Detector grid spacing, Hz.
    #[arg(long)]
    step: Option<f64>,
}

pub fn bandwidth(c: &Common, a: &BandwidthArgs) -> Result<ExperimentReport> {
    if let (BandwidthRequest::Minimum, Some(step)) = (c.bandwidth, a.step) {
        if step > 0.1 {
            return Err(Error::InvalidParameter(
                "grid step must be <= 0.1 Hz for minimum-bandwidth runs".into(),
            ));
        }
    }
    let m = characterize::measure_bandwidth(&c.settings(), a.f0, c.bandwidth, a.step)?;
    let mut grid_csv = String::from("detector_hz,peak\n");
    for (f, p) in m.grid.iter().zip(&m.peaks) {
        let _ = writeln!(grid_csv, "{f:.8e},{p:.8e}");
    }
    write_file(&c.out.join("bandwidth_grid.csv"), &grid_csv)?;

    let mut r = c.base_report("bandwidth");
    r.param("f0_hz", a.f0)
        .param("bandwidth", format!("{:?}", c.bandwidth));
    let mut bw = Measurement::new("bandwidth", m.bandwidth_hz, "Hz");
    match c.bandwidth {
        BandwidthRequest::Minimum => {
            if let Some(reference) = min_bandwidth_reference(c.damping, c.sr) {
                bw = bw
                    .reference(reference)
                    .tolerance(Tolerance::Relative(MIN_BANDWIDTH_TOL));
            }
        }
        BandwidthRequest::Hz(b) => {
            bw = bw
                .reference(b)
                .tolerance(Tolerance::Relative(CONFIGURED_BANDWIDTH_TOL));
        }
    }
    r.push(bw)
        .push(Measurement::new("lower_edge", m.lower_hz, "Hz"))
        .push(Measurement::new("upper_edge", m.upper_hz, "Hz"));
    finish(r, &c.out)
}

#[derive(Args, Debug)]
pub struct TimingArgs {
    /// Damping factors to measure (defaults to --damping).
    #[arg(long, value_delimiter = ',')]
    dampings: Vec<f64>,
    /// Tone frequency, Hz.
    #[arg(long, default_value_t = 440.0)]
    f0: f64,
}

pub fn timing(c: &Common, a: &TimingArgs) -> Result<ExperimentReport> {
    let dampings = if a.dampings.is_empty() {
        vec![c.damping]
    } else {
        a.dampings.clone()
    };
    let mut r = c.base_report("timing");
    r.param("f0_hz", a.f0);
    let tabulated = c.sr == 48_000.0;
    let mut first: Option<(f64, f64, f64)> = None;
    for &d in &dampings {
        let t = characterize::measure_timing(&c.settings().with_damping(d), a.f0)?;
        let mut rise = Measurement::new(format!("rise_d{d:e}"), t.rise_ms, "ms");
        let mut relax = Measurement::new(format!("relaxation_d{d:e}"), t.relaxation_ms, "ms");
        if tabulated {
            if let Some(v) = rise_time_reference_ms(d) {
                rise = rise.reference(v).tolerance(Tolerance::Relative(TIMING_TOL));
            }
            if let Some(v) = relaxation_time_reference_ms(d) {
                relax = relax
                    .reference(v)
                    .tolerance(Tolerance::Relative(TIMING_TOL));
            }
        }
        r.push(rise).push(relax);
        match first {
            None => first = Some((d, t.rise_ms, t.relaxation_ms)),
            Some((d0, rise0, relax0)) => {
                r.push(
                    Measurement::new(
                        format!("rise_x_d_ratio_d{d:e}"),
                        t.rise_ms * d / (rise0 * d0),
                        "1",
                    )
                    .reference(1.0)
                    .tolerance(Tolerance::Relative(TIMING_TOL))
                    .note("inverse proportionality to damping"),
                );
                r.push(
                    Measurement::new(
                        format!("relaxation_x_d_ratio_d{d:e}"),
                        t.relaxation_ms * d / (relax0 * d0),
                        "1",
                    )
                    .reference(1.0)
                    .tolerance(Tolerance::Relative(TIMING_TOL))
                    .note("inverse proportionality to damping"),
                );
            }
        }
    }
    finish(r, &c.out)
}

#[derive(Args, Debug)]
pub struct DiscriminateArgs {
    /// Tone and matched detector frequency, Hz.
    #[arg(long, default_value_t = 27.5)]
    f1: f64,
    /// Neighbouring detector frequency, Hz.
    #[arg(long, default_value_t = 29.1)]
    f2: f64,
}

pub fn discriminate(c: &Common, a: &DiscriminateArgs) -> Result<ExperimentReport> {
    let d = characterize::discriminate(&c.settings(), a.f1, a.f2)?;
    let mut r = c.base_report("discriminate");
    r.param("f1_hz", a.f1)
        .param("f2_hz", a.f2)
        .param("peak_confirm_drop", PEAK_CONFIRM_DROP);
    let reference_pair = (a.f1 - 27.5).abs() < 1e-9 && (a.f2 - 29.1).abs() < 1e-9;
    let mut dt = Measurement::new("dt", d.dt_s * 1e3, "ms")
        .note("peak confirmed by a 5% fall; the threshold can move dt by a few ms");
    let mut product = Measurement::new("dt_x_df", d.product, "1");
    if reference_pair {
        if let Some((_, ms)) = DISCRIMINATION_MS.iter().find(|(sr, _)| *sr == c.sr) {
            dt = dt.reference(*ms);
        }
        product = if c.sr == 48_000.0 {
            product
                .reference(UNCERTAINTY_TARGET)
                .tolerance(Tolerance::Absolute(UNCERTAINTY_TOL))
        } else {
            product.tolerance(Tolerance::AtMost(UNCERTAINTY_BOUND))
        };
    }
    r.push(dt)
        .push(product)
        .push(
            Measurement::new("advance", d.advance_s * 1e3, "ms")
                .note("before half the beat period"),
        )
        .push(Measurement::new("rejection", d.rejection_db, "dB"));
    finish(r, &c.out)
}

#[derive(Args, Debug)]
pub struct NoiseArgs {
    /// Tone and detector frequency, Hz.
    #[arg(long, default_value_t = 440.0)]
    f: f64,
    /// Signal-to-noise ratios, dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = vec![-4.0, -15.0])]
    snr: Vec<f64>,
    /// Tone duration, s.
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
}

/// Operationalized similarity floors for "shape preserved".
fn noise_floor(snr_db: f64) -> Option<f64> {
    if snr_db >= -4.0 {
        Some(0.9)
    } else if snr_db >= -15.0 {
        Some(0.7)
    } else {
        None
    }
}

pub fn noise(c: &Common, a: &NoiseArgs) -> Result<ExperimentReport> {
    let seed = c
        .seed
        .ok_or_else(|| Error::InvalidParameter("--seed is required for noise runs".into()))?;
    if c.csv_decimate == 0 {
        return Err(Error::InvalidParameter(
            "--csv-decimate must be >= 1".into(),
        ));
    }
    let mut r = c.base_report("noise");
    r.param("f_hz", a.f).param("seed", seed);
    for &snr in &a.snr {
        let n = characterize::noise_robustness(&c.settings(), a.f, snr, seed, a.duration)?;
        let mut csv = String::from("time_s,clean,noisy\n");
        for i in (0..n.clean.len()).step_by(c.csv_decimate) {
            let _ = writeln!(
                csv,
                "{:.8e},{:.8e},{:.8e}",
                i as f64 / c.sr,
                n.clean[i],
                n.noisy[i]
            );
        }
        write_file(&c.out.join(format!("noise_{snr}dB.csv")), &csv)?;
        let mut m = Measurement::new(format!("correlation_{snr}dB"), n.correlation, "1");
        if let Some(floor) = noise_floor(snr) {
            m = m
                .tolerance(Tolerance::AtLeast(floor))
                .note("operationalized threshold");
        }
        r.push(m);
    }
    finish(r, &c.out)
}

pub fn calibrate(c: &Common) -> Result<ExperimentReport> {
    let search = c.norm == Norm::Search;
    let grid = calibration_grid(c.method, search);
    let table = calibrate_amp_scale(&grid, c.sr, c.method, search)?;
    let method = match c.method {
        SolverMethod::RungeKutta4 => "rk4",
        SolverMethod::CentralDifference => "cd",
    };
    let name = format!(
        "amp_scale_{}_{method}_{}.txt",
        c.sr,
        if search { "search" } else { "none" }
    );
    fs::create_dir_all(&c.out).map_err(|e| io_error(&c.out, e))?;
    table.write(c.out.join(&name))?;
    let mut r = c.base_report("calibrate");
    r.param("table", name);
    r.push(Measurement::new("entries", table.entries.len() as f64, "1"));
    let top = table.entries.last().map(|e| e.1).unwrap_or(1.0);
    r.push(Measurement::new("gain_at_top", top, "1"));
    finish(r, &c.out)
}
