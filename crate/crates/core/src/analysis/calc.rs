//! Deterministic calculators: range gain, tag overhead and the SNR at which
//! the expected strength meets a threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::CarrierLayout;

/// Range multiplier bought by an SNR margin under `p ~ 1 / r^d`.
pub fn range_gain(snr_gap_db: f64, path_loss_exponent: f64) -> Result<f64> {
    if path_loss_exponent.is_nan() || path_loss_exponent <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "path loss exponent must be positive, got {path_loss_exponent}"
        )));
    }
    Ok(10f64.powf(snr_gap_db / (10.0 * path_loss_exponent)))
}

/// How payloads map onto data frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameAccounting {
    /// Payload bytes carried by one data frame.
    pub bytes_per_frame: usize,
    /// Synchronisation frames added to every payload.
    pub sync_frames: usize,
    /// Airtime of one tag in data frames.
    pub tag_frames: usize,
}

impl Default for FrameAccounting {
    /// 48 data carriers at QPSK and rate 1/2 carry 12 bytes per frame; a
    /// 640-sample tag lasts as long as eight 80-sample data frames.
    fn default() -> Self {
        Self {
            bytes_per_frame: 12,
            sync_frames: 6,
            tag_frames: 8,
        }
    }
}

impl FrameAccounting {
    pub fn payload_frames(&self, payload_bytes: usize) -> usize {
        payload_bytes.div_ceil(self.bytes_per_frame)
    }
}

/// Tag airtime relative to the packet it precedes.
pub fn overhead(payload_bytes: usize, accounting: &FrameAccounting) -> Result<f64> {
    if payload_bytes == 0 || accounting.bytes_per_frame == 0 {
        return Err(Error::InvalidParameter("payload and frame size must be positive".to_string()));
    }
    let frames = accounting.payload_frames(payload_bytes) + accounting.sync_frames;
    Ok(accounting.tag_frames as f64 / frames as f64)
}

/// SNR in dB at which expected powers give strength exactly `gamma` with
/// the all-carrier denominator:
/// `(beta c p + alpha c n) / (beta c p + alpha W n) = gamma`.
pub fn threshold_equivalent_snr(gamma: f64, layout: &CarrierLayout) -> Result<f64> {
    let alpha = layout.thin_per_wide as f64;
    let beta = layout.active_thin_per_wide as f64;
    let c = layout.groups as f64;
    let w = layout.wide_total as f64;
    let floor = c / w;
    if !(gamma > floor && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be in ({floor}, 1), got {gamma}"
        )));
    }
    let p_over_n = alpha * (gamma * w - c) / (beta * c * (1.0 - gamma));
    Ok(10.0 * (beta * p_over_n / alpha).log10())
}
