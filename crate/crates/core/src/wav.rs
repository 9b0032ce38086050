//! Mono WAV reading and writing (PCM 16/24-bit or 32-bit float).

use std::fs;
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use crate::error::{HlsError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavFormat {
    Pcm16,
    Pcm24,
    Float32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavInfo {
    pub sample_rate: u32,
    pub format: WavFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Audio<T: Real> {
    pub samples: Vec<T>,
    pub info: WavInfo,
}

pub fn read_wav<T: Real>(path: impl AsRef<Path>) -> Result<Audio<T>> {
    let path = path.as_ref();
    let reader = WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(HlsError::InvalidInput(format!(
            "{}: expected mono audio, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    let (samples, format) = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => (
            reader
                .into_samples::<f32>()
                .map(|s| s.map(|v| T::lit(v as f64)))
                .collect::<Result<Vec<T>, _>>()?,
            WavFormat::Float32,
        ),
        (SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = 1.0 / (1u32 << (bits - 1)) as f64;
            (
                reader
                    .into_samples::<i32>()
                    .map(|s| s.map(|v| T::lit(v as f64 * scale)))
                    .collect::<Result<Vec<T>, _>>()?,
                if bits == 16 { WavFormat::Pcm16 } else { WavFormat::Pcm24 },
            )
        }
        (fmt, bits) => {
            return Err(HlsError::InvalidInput(format!(
                "{}: unsupported sample format {fmt:?} with {bits} bits",
                path.display()
            )))
        }
    };
    Ok(Audio {
        samples,
        info: WavInfo {
            sample_rate: spec.sample_rate,
            format,
        },
    })
}

/// Writes mono audio through a temporary file renamed into place. Integer
/// formats clip to full scale; the number of clipped samples is returned.
pub fn write_wav<T: Real>(path: impl AsRef<Path>, samples: &[T], info: WavInfo) -> Result<usize> {
    let path = path.as_ref();
    let tmp = temp_path(path);
    let (bits, sample_format) = match info.format {
        WavFormat::Pcm16 => (16, SampleFormat::Int),
        WavFormat::Pcm24 => (24, SampleFormat::Int),
        WavFormat::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: info.sample_rate,
        bits_per_sample: bits,
        sample_format,
    };
    let mut clipped = 0usize;
    {
        let mut writer = WavWriter::create(&tmp, spec)?;
        match info.format {
            WavFormat::Float32 => {
                for &s in samples {
                    writer.write_sample(s.as_f64() as f32)?;
                }
            }
            WavFormat::Pcm16 | WavFormat::Pcm24 => {
                let full = (1i64 << (bits - 1)) as f64;
                let (lo, hi) = (-full, full - 1.0);
                for &s in samples {
                    let v = (s.as_f64() * full).round();
                    if v > hi || v < lo {
                        clipped += 1;
                    }
                    writer.write_sample(v.clamp(lo, hi) as i32)?;
                }
            }
        }
        writer.finalize()?;
    }
    fs::rename(&tmp, path)?;
    Ok(clipped)
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}
