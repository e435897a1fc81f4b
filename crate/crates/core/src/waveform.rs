//! Time-domain synthesis of tags and of OFDM-like data interference.
//!
//! Power bookkeeping: a tag's `total_power` is the energy of its spectrum,
//! which by the unitary transform equals the energy of the 512-sample body.
//! The interferer's `total_power` is its expected energy over the same
//! number of samples, so both share a mean sample power of
//! `total_power / fft_size`.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fft::{energy, UnitaryFft};
use crate::layout::{CarrierLayout, WideCarrierMask};

/// Complex baseband samples. `sample_rate` is carried as metadata only.
#[derive(Clone, Debug, PartialEq)]
pub struct IqFrame {
    samples: Vec<Complex64>,
    sample_rate: f64,
}

impl IqFrame {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("frame has no samples".to_string()));
        }
        if samples.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::InvalidParameter("frame has non-finite samples".to_string()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub(crate) fn from_parts(samples: Vec<Complex64>, sample_rate: f64) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        energy(&self.samples)
    }

    pub fn mean_power(&self) -> f64 {
        self.energy() / self.samples.len() as f64
    }
}

/// Nominal sample rate stamped on synthesised frames (1 MHz baseband).
pub const DEFAULT_SAMPLE_RATE: f64 = 1.0e6;

/// One complex amplitude per thin carrier, in FFT bin order.
#[derive(Clone, Debug, PartialEq)]
pub struct TagSpectrum {
    pub amplitudes: Vec<Complex64>,
}

impl TagSpectrum {
    pub fn power(&self) -> f64 {
        energy(&self.amplitudes)
    }
}

fn check_mask(mask: &WideCarrierMask, layout: &CarrierLayout) -> Result<()> {
    if mask.len() != layout.groups {
        return Err(Error::Mask(format!(
            "{} active carriers, layout has {} groups",
            mask.len(),
            layout.groups
        )));
    }
    if let Some(&w) = mask
        .active()
        .iter()
        .find(|&&w| w >= layout.wide_total || layout.is_null(w))
    {
        return Err(Error::Mask(format!("carrier {w} cannot be active")));
    }
    Ok(())
}

/// Energises the central `beta` thin carriers of every active wide carrier
/// with equal magnitudes and independent uniform phases.
pub fn build_tag_spectrum<R: Rng + ?Sized>(
    mask: &WideCarrierMask,
    layout: &CarrierLayout,
    total_power: f64,
    rng: &mut R,
) -> Result<TagSpectrum> {
    check_mask(mask, layout)?;
    if !total_power.is_finite() || total_power < 0.0 {
        return Err(Error::InvalidParameter(format!("total power {total_power}")));
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); layout.fft_size];
    let active_bins = (mask.len() * layout.active_thin_per_wide) as f64;
    let magnitude = (total_power / active_bins).sqrt();
    for &wide in mask.active() {
        for offset in layout.active_offsets() {
            let phase = rng.random::<f64>() * 2.0 * PI;
            amplitudes[layout.thin_bin(wide, offset)] = Complex64::from_polar(magnitude, phase);
        }
    }
    Ok(TagSpectrum { amplitudes })
}

/// Inverse transform plus cyclic prefix.
pub fn synthesize_tag(spectrum: &TagSpectrum, layout: &CarrierLayout) -> Result<IqFrame> {
    synthesize_with(spectrum, layout, &UnitaryFft::new(layout.fft_size))
}

pub(crate) fn synthesize_with(
    spectrum: &TagSpectrum,
    layout: &CarrierLayout,
    fft: &UnitaryFft,
) -> Result<IqFrame> {
    if spectrum.amplitudes.len() != layout.fft_size {
        return Err(Error::LengthMismatch {
            expected: layout.fft_size,
            found: spectrum.amplitudes.len(),
        });
    }
    let mut body = spectrum.amplitudes.clone();
    fft.inverse(&mut body);
    Ok(IqFrame::from_parts(
        add_cyclic_prefix(&body, layout.cp_len()),
        DEFAULT_SAMPLE_RATE,
    ))
}

fn add_cyclic_prefix(body: &[Complex64], cp: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(body.len() + cp);
    out.extend_from_slice(&body[body.len() - cp..]);
    out.extend_from_slice(body);
    out
}

/// Peak-to-average power ratio in dB.
pub fn papr(frame: &IqFrame) -> Result<f64> {
    let mean = frame.mean_power();
    if mean == 0.0 {
        return Err(Error::ZeroPower);
    }
    let peak = frame
        .samples()
        .iter()
        .map(|x| x.norm_sqr())
        .fold(0.0, f64::max);
    Ok(10.0 * (peak / mean).log10())
}

#[derive(Clone, Debug)]
pub struct PaprLimitedTag {
    pub frame: IqFrame,
    pub spectrum: TagSpectrum,
    pub papr_db: f64,
    pub attempts: usize,
    /// False when no draw met the cap and `frame` is the best attempt.
    pub within_cap: bool,
}

/// Redraws the random phases until the frame's PAPR is at most `papr_cap_db`.
pub fn synthesize_tag_papr_limited<R: Rng + ?Sized>(
    mask: &WideCarrierMask,
    layout: &CarrierLayout,
    total_power: f64,
    papr_cap_db: f64,
    rng: &mut R,
    max_attempts: usize,
) -> Result<PaprLimitedTag> {
    if max_attempts == 0 {
        return Err(Error::InvalidParameter("max_attempts must be at least 1".to_string()));
    }
    let fft = UnitaryFft::new(layout.fft_size);
    let mut best: Option<PaprLimitedTag> = None;
    let mut made = 0;
    for attempt in 1..=max_attempts {
        made = attempt;
        let spectrum = build_tag_spectrum(mask, layout, total_power, rng)?;
        let frame = synthesize_with(&spectrum, layout, &fft)?;
        let value = if total_power == 0.0 { 0.0 } else { papr(&frame)? };
        let within_cap = value <= papr_cap_db;
        if best.as_ref().is_none_or(|b| value < b.papr_db) {
            best = Some(PaprLimitedTag {
                frame,
                spectrum,
                papr_db: value,
                attempts: attempt,
                within_cap,
            });
        }
        if within_cap {
            break;
        }
    }
    let mut best = best.expect("at least one attempt");
    best.attempts = made;
    Ok(best)
}

/// Signed 64-point carrier indices carrying data: +-1..=26 without the
/// pilot positions +-7 and +-21.
pub fn data_carriers() -> Vec<i32> {
    (-26..=26)
        .filter(|&k: &i32| k != 0 && k.abs() != 7 && k.abs() != 21)
        .collect()
}

/// Concatenated OFDM-like data frames: a `wide_total`-point body with random
/// QPSK symbols on the 48 data carriers, plus a cyclic prefix of the layout's
/// fraction (80 samples per frame for the reference layout).
pub fn synthesize_data_interference<R: Rng + ?Sized>(
    layout: &CarrierLayout,
    n_frames: usize,
    total_power: f64,
    rng: &mut R,
) -> Result<IqFrame> {
    if n_frames == 0 {
        return Err(Error::InvalidParameter("n_frames must be at least 1".to_string()));
    }
    let size = layout.wide_total;
    let carriers = data_carriers();
    if carriers.iter().any(|k| k.unsigned_abs() as usize >= size / 2) {
        return Err(Error::Layout(format!(
            "{size}-point data frames cannot hold the data carrier plan"
        )));
    }
    let cp = (layout.cp_fraction * size as f64).round() as usize;
    let fft = UnitaryFft::new(size);
    // body energy is (size / fft_size) of the per-window energy
    let body_energy = total_power * size as f64 / layout.fft_size as f64;
    let magnitude = (body_energy / carriers.len() as f64).sqrt();
    let mut out = Vec::with_capacity(n_frames * (size + cp));
    let mut body = vec![Complex64::new(0.0, 0.0); size];
    for _ in 0..n_frames {
        body.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        for &k in &carriers {
            let quadrant = rng.random_range(0..4) as f64;
            let bin = k.rem_euclid(size as i32) as usize;
            body[bin] = Complex64::from_polar(magnitude, FRAC_PI_4 + quadrant * PI / 2.0);
        }
        fft.inverse(&mut body);
        out.extend(add_cyclic_prefix(&body, cp));
    }
    Ok(IqFrame::from_parts(out, DEFAULT_SAMPLE_RATE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{codeword_to_mask, Codebook};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference_mask(layout: &CarrierLayout) -> WideCarrierMask {
        codeword_to_mask(&Codebook::sloane_seidel().words()[7], layout).unwrap()
    }

    #[test]
    fn tag_spectrum_structure() {
        let layout = CarrierLayout::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = build_tag_spectrum(&reference_mask(&layout), &layout, 3.0, &mut rng).unwrap();
        let nonzero: Vec<f64> = s.amplitudes.iter().map(|a| a.norm()).filter(|&m| m > 0.0).collect();
        assert_eq!(nonzero.len(), 112);
        assert!(nonzero.iter().all(|m| (m - nonzero[0]).abs() < 1e-15));
        assert!((s.power() - 3.0).abs() < 1e-12);

        let zero = build_tag_spectrum(&reference_mask(&layout), &layout, 0.0, &mut rng).unwrap();
        assert!(zero.amplitudes.iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn spectrum_determinism() {
        let layout = CarrierLayout::reference();
        let mask = reference_mask(&layout);
        let a = build_tag_spectrum(&mask, &layout, 1.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = build_tag_spectrum(&mask, &layout, 1.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let c = build_tag_spectrum(&mask, &layout, 1.0, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for (x, y) in a.amplitudes.iter().zip(&c.amplitudes) {
            assert!((x.norm() - y.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_inconsistent_mask() {
        let layout = CarrierLayout::reference();
        let bad = WideCarrierMask::from_sorted_unchecked(vec![0, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(build_tag_spectrum(&bad, &layout, 1.0, &mut rng).is_err());
    }

    #[test]
    fn frame_length_and_prefix() {
        let layout = CarrierLayout::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = build_tag_spectrum(&reference_mask(&layout), &layout, 1.0, &mut rng).unwrap();
        let f = synthesize_tag(&s, &layout).unwrap();
        assert_eq!(f.len(), 640);
        assert_eq!(&f.samples()[..128], &f.samples()[512..]);
    }

    #[test]
    fn single_carrier_is_constant_modulus() {
        let layout = CarrierLayout::reference();
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 512];
        amplitudes[17] = Complex64::new(1.0, 0.0);
        let f = synthesize_tag(&TagSpectrum { amplitudes }, &layout).unwrap();
        let m0 = f.samples()[0].norm();
        assert!(f.samples().iter().all(|x| (x.norm() - m0).abs() < 1e-12));
        assert!(papr(&f).unwrap().abs() < 1e-9);
    }

    #[test]
    fn papr_known_values() {
        let z = Complex64::new(0.0, 0.0);
        let f = IqFrame::new(vec![z, z, Complex64::new(2.0, 0.0), z], 1.0).unwrap();
        assert!((papr(&f).unwrap() - 10.0 * 4f64.log10()).abs() < 1e-12);
        let zeros = IqFrame::new(vec![z; 4], 1.0).unwrap();
        assert!(matches!(papr(&zeros), Err(Error::ZeroPower)));
    }

    #[test]
    fn papr_cap_behaviour() {
        let layout = CarrierLayout::reference();
        let mask = reference_mask(&layout);
        let plain = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let s = build_tag_spectrum(&mask, &layout, 1.0, &mut rng).unwrap();
            synthesize_tag(&s, &layout).unwrap()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let uncapped =
            synthesize_tag_papr_limited(&mask, &layout, 1.0, f64::INFINITY, &mut rng, 10).unwrap();
        assert_eq!(uncapped.frame, plain);
        assert_eq!(uncapped.attempts, 1);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zero_cap = synthesize_tag_papr_limited(&mask, &layout, 1.0, 0.0, &mut rng, 5).unwrap();
        assert!(!zero_cap.within_cap);
        assert!(zero_cap.papr_db > 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let capped = synthesize_tag_papr_limited(&mask, &layout, 1.0, 9.0, &mut rng, 100).unwrap();
        assert!(capped.within_cap && capped.papr_db <= 9.0);
    }

    #[test]
    fn interference_frames() {
        let layout = CarrierLayout::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = synthesize_data_interference(&layout, 8, 1.0, &mut rng).unwrap();
        assert_eq!(f.len(), 640);
        let zero = synthesize_data_interference(&layout, 3, 0.0, &mut rng).unwrap();
        assert!(zero.samples().iter().all(|x| x.norm() == 0.0));
        assert_eq!(data_carriers().len(), 48);
    }

    #[test]
    fn interference_spectrum_is_flat() {
        let layout = CarrierLayout::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let frames = 1000;
        let f = synthesize_data_interference(&layout, frames, 512.0, &mut rng).unwrap();
        let fft = UnitaryFft::new(64);
        let mut acc = [0.0f64; 64];
        for chunk in f.samples().chunks_exact(80) {
            let mut body = chunk[16..].to_vec();
            fft.forward(&mut body);
            for (a, b) in acc.iter_mut().zip(&body) {
                *a += b.norm_sqr();
            }
        }
        let occupied: Vec<f64> = data_carriers()
            .iter()
            .map(|&k| acc[k.rem_euclid(64) as usize] / frames as f64)
            .collect();
        let mean = occupied.iter().sum::<f64>() / occupied.len() as f64;
        assert!(occupied.iter().all(|p| (p / mean - 1.0).abs() < 0.05));
        let quiet = acc[0] + acc[7] + acc[30];
        assert!(quiet < 1e-9 * mean);
    }

    #[test]
    fn tag_to_data_power_ratio() {
        // equal per-carrier density: 28 tag carriers against 48 data carriers
        let layout = CarrierLayout::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let density = 1.0;
        let s = build_tag_spectrum(&reference_mask(&layout), &layout, 28.0 * density, &mut rng).unwrap();
        let tag = synthesize_tag(&s, &layout).unwrap();
        let data = synthesize_data_interference(&layout, 8, 48.0 * density, &mut rng).unwrap();
        let tag_body = energy(&tag.samples()[128..]);
        let data_body: f64 = data.samples().chunks_exact(80).map(|c| energy(&c[16..])).sum();
        let ratio = tag_body / data_body;
        assert!((ratio - 28.0 / 48.0).abs() < 1e-9, "ratio {ratio}");
    }
}
