//! Channel impairments: AWGN, carrier frequency offset, fading and additive
//! interference.
//!
//! SNR follows the thick-carrier convention `SNR = beta * p / (alpha * n)`,
//! where `p` is the received power of one active thin carrier and `n` the
//! noise power per thin-carrier FFT bin.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::fft::{energy, UnitaryFft};
use crate::layout::CarrierLayout;
use crate::waveform::{
    build_tag_spectrum, synthesize_data_interference, synthesize_with, IqFrame, TagSpectrum,
};

/// Largest offset, in thin carriers, the detector is built to tolerate.
pub const DETECTOR_CFO_TOLERANCE: f64 = 2.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fading {
    #[default]
    None,
    /// One unit-magnitude gain with uniform random phase.
    Narrowband,
    /// Independent CN(0, 1) gain on every thin carrier.
    WidebandRayleigh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceKind {
    /// Continuous OFDM-like payload frames.
    Data,
    /// Another tag carrying a random codeword.
    Tag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterferenceSpec {
    pub kind: InterferenceKind,
    pub sir_db: f64,
    /// Interferer start relative to the signal, in samples.
    #[serde(default)]
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelSpec {
    /// `None` leaves the signal noise-free.
    pub snr_db: Option<f64>,
    /// Frequency offset in thin-carrier widths.
    pub cfo: f64,
    pub max_cfo: f64,
    pub fading: Fading,
    pub interference: Option<InterferenceSpec>,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            snr_db: None,
            cfo: 0.0,
            max_cfo: DETECTOR_CFO_TOLERANCE,
            fading: Fading::None,
            interference: None,
        }
    }
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.cfo.is_finite() || self.cfo.abs() > self.max_cfo {
            return Err(Error::InvalidParameter(format!(
                "cfo {} outside +-{}",
                self.cfo, self.max_cfo
            )));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::InvalidParameter(format!("snr {snr}")));
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.snr_db.is_none()
            && self.cfo == 0.0
            && self.fading == Fading::None
            && self.interference.is_none()
    }

    /// Applies fading, then CFO, then interference, then noise.
    ///
    /// `frame` must be a whole number of tag frames when fading is enabled.
    /// The noise level is calibrated against `frame`'s own power, taken as a
    /// tag of the given layout.
    pub fn apply<R: Rng + ?Sized>(
        &self,
        frame: &IqFrame,
        layout: &CarrierLayout,
        codebook: Option<&Codebook>,
        rng: &mut R,
    ) -> Result<IqFrame> {
        self.validate()?;
        let per_thin = per_thin_power(frame.mean_power() * layout.fft_size as f64, layout);
        let mut out = apply_fading(frame, layout, self.fading, rng)?;
        out = apply_cfo(&out, self.cfo, layout);
        if let Some(spec) = &self.interference {
            let extent = frame.len().saturating_sub(spec.offset).max(1);
            let interferer = match spec.kind {
                InterferenceKind::Data => {
                    let frames = extent.div_ceil(data_frame_len(layout));
                    let f = synthesize_data_interference(layout, frames, 1.0, rng)?;
                    IqFrame::from_parts(f.samples()[..extent].to_vec(), f.sample_rate())
                }
                InterferenceKind::Tag => {
                    let cb = codebook.cloned().unwrap_or_else(Codebook::sloane_seidel);
                    random_tag_stream(&cb, layout, extent, rng)?
                }
            };
            let gain = sir_gain(&out, 0, &interferer, spec.offset, spec.sir_db)?;
            out = mix(&[(&out, 0, 1.0), (&interferer, spec.offset, gain)]);
        }
        if let Some(snr) = self.snr_db {
            if per_thin == 0.0 {
                return Err(Error::ZeroPower);
            }
            out = apply_awgn(&out, noise_power_for_snr(snr, per_thin, layout), rng);
        }
        Ok(out)
    }
}

/// Samples per data frame: `wide_total` plus its cyclic prefix.
pub fn data_frame_len(layout: &CarrierLayout) -> usize {
    layout.wide_total + (layout.cp_fraction * layout.wide_total as f64).round() as usize
}

fn random_tag_stream<R: Rng + ?Sized>(
    codebook: &Codebook,
    layout: &CarrierLayout,
    extent: usize,
    rng: &mut R,
) -> Result<IqFrame> {
    let masks = codebook.masks(layout)?;
    let fft = UnitaryFft::new(layout.fft_size);
    let mut samples = Vec::with_capacity(extent + layout.frame_len());
    while samples.len() < extent {
        let mask = &masks[rng.random_range(0..masks.len())];
        let spectrum = build_tag_spectrum(mask, layout, 1.0, rng)?;
        samples.extend(synthesize_with(&spectrum, layout, &fft)?.into_samples());
    }
    samples.truncate(extent);
    Ok(IqFrame::from_parts(samples, crate::waveform::DEFAULT_SAMPLE_RATE))
}

/// Power of one active thin carrier for a tag of total spectral power
/// `total_power`.
pub fn per_thin_power(total_power: f64, layout: &CarrierLayout) -> f64 {
    total_power / layout.active_thin_total() as f64
}

/// Noise power per thin-carrier bin giving `snr_db` for per-carrier signal
/// power `per_thin_power`: `n = beta * p / (alpha * 10^(snr/10))`.
pub fn noise_power_for_snr(snr_db: f64, per_thin_power: f64, layout: &CarrierLayout) -> f64 {
    let ratio = layout.active_thin_per_wide as f64 / layout.thin_per_wide as f64;
    ratio * per_thin_power / 10f64.powf(snr_db / 10.0)
}

/// Inverse of [`noise_power_for_snr`].
pub fn snr_db_for_powers(per_thin_power: f64, noise_power: f64, layout: &CarrierLayout) -> f64 {
    let ratio = layout.active_thin_per_wide as f64 / layout.thin_per_wide as f64;
    10.0 * (ratio * per_thin_power / noise_power).log10()
}

/// Circular complex Gaussian with variance `variance` (each axis `variance / 2`).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let sigma = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(sigma * re, sigma * im)
}

/// Adds white noise of `noise_power` per sample, which is also the expected
/// power in every bin of the unitary transform.
pub fn apply_awgn<R: Rng + ?Sized>(frame: &IqFrame, noise_power: f64, rng: &mut R) -> IqFrame {
    let mut out = frame.clone();
    if noise_power > 0.0 {
        for x in out.samples_mut() {
            *x += complex_gaussian(rng, noise_power);
        }
    }
    out
}

/// Rotates sample `k` by `exp(2 pi i cfo k / fft_size)`.
pub fn apply_cfo(frame: &IqFrame, cfo: f64, layout: &CarrierLayout) -> IqFrame {
    let mut out = frame.clone();
    if cfo != 0.0 {
        let step = 2.0 * PI * cfo / layout.fft_size as f64;
        for (k, x) in out.samples_mut().iter_mut().enumerate() {
            *x *= Complex64::from_polar(1.0, step * k as f64);
        }
    }
    out
}

/// Fading applied to a spectrum directly.
pub fn fade_spectrum<R: Rng + ?Sized>(
    spectrum: &TagSpectrum,
    fading: Fading,
    rng: &mut R,
) -> TagSpectrum {
    let mut out = spectrum.clone();
    match fading {
        Fading::None => {}
        Fading::Narrowband => {
            let g = Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI);
            out.amplitudes.iter_mut().for_each(|a| *a *= g);
        }
        Fading::WidebandRayleigh => {
            for a in out.amplitudes.iter_mut() {
                *a *= complex_gaussian(rng, 1.0);
            }
        }
    }
    out
}

/// Fading applied to consecutive tag frames in the time domain. Wideband
/// gains act on the transform of each cyclic-prefix-stripped body.
pub fn apply_fading<R: Rng + ?Sized>(
    frame: &IqFrame,
    layout: &CarrierLayout,
    fading: Fading,
    rng: &mut R,
) -> Result<IqFrame> {
    match fading {
        Fading::None => Ok(frame.clone()),
        Fading::Narrowband => {
            let g = Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI);
            let mut out = frame.clone();
            out.samples_mut().iter_mut().for_each(|x| *x *= g);
            Ok(out)
        }
        Fading::WidebandRayleigh => {
            let len = layout.frame_len();
            if !frame.len().is_multiple_of(len) {
                return Err(Error::LengthMismatch {
                    expected: len * frame.len().div_ceil(len),
                    found: frame.len(),
                });
            }
            let fft = UnitaryFft::new(layout.fft_size);
            let cp = layout.cp_len();
            let mut out = Vec::with_capacity(frame.len());
            for block in frame.samples().chunks_exact(len) {
                let mut body = block[cp..].to_vec();
                fft.forward(&mut body);
                body.iter_mut().for_each(|a| *a *= complex_gaussian(rng, 1.0));
                fft.inverse(&mut body);
                out.extend_from_slice(&body[layout.fft_size - cp..]);
                out.extend_from_slice(&body);
            }
            Ok(IqFrame::from_parts(out, frame.sample_rate()))
        }
    }
}

/// Sum of gain-scaled frames placed at sample offsets, zero-padded to the
/// longest extent.
pub fn mix(frames: &[(&IqFrame, usize, f64)]) -> IqFrame {
    let extent = frames
        .iter()
        .map(|(f, offset, _)| offset + f.len())
        .max()
        .unwrap_or(0);
    let rate = frames.first().map_or(crate::waveform::DEFAULT_SAMPLE_RATE, |f| f.0.sample_rate());
    let mut out = vec![Complex64::new(0.0, 0.0); extent];
    for (frame, offset, gain) in frames {
        for (o, x) in out[*offset..].iter_mut().zip(frame.samples()) {
            *o += x * gain;
        }
    }
    IqFrame::from_parts(out, rate)
}

/// Mean power per thin-carrier bin over the non-null wide carriers, averaged
/// over consecutive `fft_size`-sample windows. For white noise of variance
/// `n` this is `n`; for band-limited interference it is the per-bin level
/// seen by the carriers a tag can occupy.
pub fn in_band_power(frame: &IqFrame, layout: &CarrierLayout) -> Result<f64> {
    let size = layout.fft_size;
    if frame.len() < size {
        return Err(Error::LengthMismatch {
            expected: size,
            found: frame.len(),
        });
    }
    let fft = UnitaryFft::new(size);
    let in_band: Vec<bool> = (0..size).map(|b| !layout.is_null(layout.wide_of_bin(b))).collect();
    let bins = in_band.iter().filter(|&&b| b).count() as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for chunk in frame.samples().chunks_exact(size) {
        let mut buf = chunk.to_vec();
        fft.forward(&mut buf);
        total += buf
            .iter()
            .zip(&in_band)
            .filter(|(_, &b)| b)
            .map(|(x, _)| x.norm_sqr())
            .sum::<f64>()
            / bins;
        windows += 1;
    }
    Ok(total / windows as f64)
}

/// Amplitude gain for `interferer` so that, over the samples where both
/// frames are present, signal power over interference power is `sir_db`.
pub fn sir_gain(
    signal: &IqFrame,
    signal_offset: usize,
    interferer: &IqFrame,
    interferer_offset: usize,
    sir_db: f64,
) -> Result<f64> {
    let start = signal_offset.max(interferer_offset);
    let end = (signal_offset + signal.len()).min(interferer_offset + interferer.len());
    if start >= end {
        return Err(Error::InvalidParameter("frames do not overlap".to_string()));
    }
    let s = energy(&signal.samples()[start - signal_offset..end - signal_offset]);
    let i = energy(&interferer.samples()[start - interferer_offset..end - interferer_offset]);
    if i == 0.0 {
        return Err(Error::ZeroPower);
    }
    Ok((s / (i * 10f64.powf(sir_db / 10.0))).sqrt())
}
