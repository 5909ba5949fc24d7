use std::path::Path;

use hound::{SampleFormat, WavSpec};

use super::AudioBuffer;
use crate::{Error, Result};

const SUPPORTED_RATES: [u32; 4] = [44_100, 48_000, 96_000, 192_000];
const PCM16_SCALE: f64 = 32_768.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

fn malformed(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::io(path, e),
        other => Error::MalformedWav {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

/// Read a mono PCM16 or IEEE float32 WAV file.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| malformed(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedLayout(format!(
            "{}: {} channels, only mono is supported",
            path.display(),
            spec.channels
        )));
    }
    if !SUPPORTED_RATES.contains(&spec.sample_rate) {
        return Err(Error::UnsupportedSampleRate(spec.sample_rate as f64));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>(),
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (fmt, bits) => {
            return Err(Error::UnsupportedLayout(format!(
                "{}: {bits}-bit {fmt:?} samples (expected 16-bit PCM or 32-bit float)",
                path.display()
            )))
        }
    }
    .map_err(|e| malformed(path, e))?;
    AudioBuffer::new(spec.sample_rate as f64, samples)
}

pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer, format: WavFormat) -> Result<()> {
    let path = path.as_ref();
    if audio.sample_rate.fract() != 0.0 || audio.sample_rate <= 0.0 {
        return Err(Error::UnsupportedSampleRate(audio.sample_rate));
    }
    let (bits_per_sample, sample_format) = match format {
        WavFormat::Pcm16 => (16, SampleFormat::Int),
        WavFormat::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate as u32,
        bits_per_sample,
        sample_format,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| malformed(path, e))?;
    for &s in &audio.samples {
        let res = match format {
            WavFormat::Pcm16 => {
                let q = (s * PCM16_SCALE).round().clamp(-32_768.0, 32_767.0) as i16;
                writer.write_sample(q)
            }
            WavFormat::Float32 => writer.write_sample(s as f32),
        };
        res.map_err(|e| malformed(path, e))?;
    }
    writer.finalize().map_err(|e| malformed(path, e))
}
