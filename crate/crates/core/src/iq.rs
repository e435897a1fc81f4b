//! IQ files: interleaved little-endian `f32` pairs (I then Q) with a JSON
//! sidecar at `<path>.json` holding the sample rate and carrier layout.
//!
//! Samples are held as `f64` in memory. Widening `f32` to `f64` is exact, so
//! a file read and written back without modification is byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::CarrierLayout;
use crate::waveform::IqFrame;

pub const SAMPLE_FORMAT: &str = "cf32le";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IqMetadata {
    pub format: String,
    pub sample_rate: f64,
    pub samples: usize,
    pub layout: CarrierLayout,
}

impl IqMetadata {
    pub fn new(frame: &IqFrame, layout: &CarrierLayout) -> Self {
        Self {
            format: SAMPLE_FORMAT.to_string(),
            sample_rate: frame.sample_rate(),
            samples: frame.len(),
            layout: layout.clone(),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".json");
    PathBuf::from(name)
}

pub fn encode_samples(samples: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 8);
    for x in samples {
        out.extend_from_slice(&(x.re as f32).to_le_bytes());
        out.extend_from_slice(&(x.im as f32).to_le_bytes());
    }
    out
}

pub fn decode_samples(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Parse {
            line: 0,
            message: format!("{} bytes is not a whole number of f32 pairs", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect())
}

pub fn write_iq(path: impl AsRef<Path>, frame: &IqFrame, layout: &CarrierLayout) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_samples(frame.samples()))?;
    let meta = serde_json::to_string_pretty(&IqMetadata::new(frame, layout))?;
    fs::write(sidecar_path(path), meta + "\n")?;
    Ok(())
}

/// Reads samples and sidecar. The sidecar's sample count must match the file.
pub fn read_iq(path: impl AsRef<Path>) -> Result<(IqFrame, IqMetadata)> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let meta: IqMetadata = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    if meta.format != SAMPLE_FORMAT {
        return Err(Error::InvalidParameter(format!(
            "unsupported sample format {}",
            meta.format
        )));
    }
    meta.layout.validate()?;
    let samples = decode_samples(&bytes)?;
    if samples.len() != meta.samples {
        return Err(Error::LengthMismatch {
            expected: meta.samples,
            found: samples.len(),
        });
    }
    Ok((IqFrame::new(samples, meta.sample_rate)?, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_round_trip() {
        let samples = vec![Complex64::new(1.5, -0.25), Complex64::new(f32::MIN_POSITIVE as f64, 3e7)];
        let bytes = encode_samples(&samples);
        assert_eq!(bytes.len(), 16);
        assert_eq!(decode_samples(&bytes).unwrap(), samples);
        assert_eq!(encode_samples(&decode_samples(&bytes).unwrap()), bytes);
        assert!(decode_samples(&bytes[..5]).is_err());
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("a/tag.iq")), PathBuf::from("a/tag.iq.json"));
    }
}
