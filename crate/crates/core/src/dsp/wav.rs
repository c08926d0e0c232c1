//! WAV reading and writing (16-bit PCM and 32-bit float, any channel count).

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use super::{AudioBuffer, MultichannelAudio};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WavEncoding {
    Pcm16,
    #[default]
    Float32,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<MultichannelAudio> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let reader = WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::format(path, "WAV file declares zero channels"));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (format, bits) => {
            return Err(Error::format(
                path,
                format!("unsupported WAV encoding {format:?} with {bits} bits per sample"),
            ))
        }
    };
    let frames = interleaved.len() / channels;
    let buffers = (0..channels)
        .map(|c| {
            let samples = (0..frames).map(|i| interleaved[i * channels + c]).collect();
            AudioBuffer::new(samples, spec.sample_rate).map_err(|e| Error::format(path, e))
        })
        .collect::<Result<Vec<_>>>()?;
    MultichannelAudio::new(buffers)
}

/// Reads a WAV file and checks its sample rate.
pub fn read_wav_at(path: impl AsRef<Path>, sample_rate: u32) -> Result<MultichannelAudio> {
    let audio = read_wav(path)?;
    if audio.sample_rate() != sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: sample_rate,
            found: audio.sample_rate(),
        });
    }
    Ok(audio)
}

pub fn read_mono(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let audio = read_wav(path)?;
    if audio.num_channels() != 1 {
        return Err(Error::format(
            path,
            format!("expected a mono file, found {} channels", audio.num_channels()),
        ));
    }
    Ok(audio.into_channels().remove(0))
}

pub fn write_wav(path: impl AsRef<Path>, audio: &MultichannelAudio, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let (bits, format) = match encoding {
        WavEncoding::Pcm16 => (16, SampleFormat::Int),
        WavEncoding::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: audio.num_channels() as u16,
        sample_rate: audio.sample_rate(),
        bits_per_sample: bits,
        sample_format: format,
    };
    let mut writer = WavWriter::create(path, spec).map_err(wav_err)?;
    for i in 0..audio.len() {
        for ch in audio.channels() {
            let v = ch.samples()[i];
            match encoding {
                WavEncoding::Float32 => writer.write_sample(v as f32),
                WavEncoding::Pcm16 => {
                    writer.write_sample((v * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
                }
            }
            .map_err(wav_err)?;
        }
    }
    writer.finalize().map_err(wav_err)
}

pub fn write_mono(path: impl AsRef<Path>, audio: &AudioBuffer, encoding: WavEncoding) -> Result<()> {
    write_wav(path, &MultichannelAudio::new(vec![audio.clone()])?, encoding)
}
