//! Sliding-window tag spotter.
//!
//! Windows of `fft_size` samples start every cyclic-prefix length, so any
//! tag fully inside the stream covers at least one window completely. Each
//! window passes a carrier-sense gate, is transformed and folded onto wide
//! carriers, and is scored against every codeword mask. A window becomes a
//! candidate when its best strength exceeds `gamma` and its centre of mass
//! lies in the central quarter of the band; a candidate is reported only if
//! it beats every overlapping candidate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::fft::UnitaryFft;
use crate::layout::{CarrierLayout, WideCarrierMask};
use crate::waveform::IqFrame;

/// Which wide carriers the tag-strength denominator sums over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Denominator {
    /// Every wide carrier, nulls included.
    #[default]
    AllCarriers,
    /// Only the carriers belonging to some group.
    ExcludeNulls,
}

#[derive(Clone, Debug)]
pub struct DetectorConfig {
    pub gamma: f64,
    pub layout: CarrierLayout,
    pub codebook: Codebook,
    /// Windows whose power over the tracked noise is below this are skipped.
    /// `None` analyses every window.
    pub carrier_sense_db: Option<f64>,
    /// Largest accepted |centre of mass|, in wide carriers from band centre.
    pub com_limit: f64,
    /// Smoothing constant of the noise tracker, in (0, 1].
    pub noise_smoothing: f64,
    /// Starting noise level per sample; `None` takes the first window's power.
    pub initial_noise: Option<f64>,
    pub denominator: Denominator,
}

impl DetectorConfig {
    pub fn new(gamma: f64, layout: CarrierLayout, codebook: Codebook) -> Self {
        let com_limit = layout.wide_total as f64 / 8.0;
        Self {
            gamma,
            layout,
            codebook,
            carrier_sense_db: Some(-1.0),
            com_limit,
            noise_smoothing: 0.05,
            initial_noise: None,
            denominator: Denominator::AllCarriers,
        }
    }

    pub fn reference() -> Self {
        Self::new(0.62, CarrierLayout::reference(), Codebook::sloane_seidel())
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.noise_smoothing > 0.0 && self.noise_smoothing <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "noise smoothing must be in (0, 1], got {}",
                self.noise_smoothing
            )));
        }
        if self.codebook.word_length() != self.layout.groups {
            return Err(Error::LengthMismatch {
                expected: self.layout.groups,
                found: self.codebook.word_length(),
            });
        }
        if let Some(n) = self.initial_noise {
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::InvalidParameter(format!("initial noise {n}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub interval_start: usize,
    pub codeword_index: usize,
    pub strength: f64,
    pub com_position: f64,
    pub com_valid: bool,
    pub snr_estimate_db: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpotSummary {
    pub windows_total: usize,
    pub windows_analyzed: usize,
    pub windows_gated: usize,
    pub candidates: usize,
    pub detections: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpotReport {
    pub events: Vec<DetectionEvent>,
    pub summary: SpotSummary,
}

/// Best-matching codeword of one window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowScore {
    pub codeword_index: usize,
    pub strength: f64,
    pub com_position: f64,
    pub com_valid: bool,
}

/// Sums `|bin|^2` over the thin bins of each wide carrier.
pub fn fold_spectrum(bins: &[Complex64], layout: &CarrierLayout) -> Result<Vec<f64>> {
    if bins.len() != layout.fft_size {
        return Err(Error::LengthMismatch {
            expected: layout.fft_size,
            found: bins.len(),
        });
    }
    let mut wide = vec![0.0; layout.wide_total];
    for (bin, x) in bins.iter().enumerate() {
        wide[layout.wide_of_bin(bin)] += x.norm_sqr();
    }
    Ok(wide)
}

/// In-mask power over the power of all wide carriers.
pub fn tag_strength(wide_powers: &[f64], mask: &WideCarrierMask) -> Result<f64> {
    let total: f64 = wide_powers.iter().sum();
    strength_over(wide_powers, mask.active(), total)
}

/// Tag strength under an explicit denominator convention.
pub fn tag_strength_with(
    wide_powers: &[f64],
    mask: &WideCarrierMask,
    layout: &CarrierLayout,
    denominator: Denominator,
) -> Result<f64> {
    if wide_powers.len() != layout.wide_total {
        return Err(Error::LengthMismatch {
            expected: layout.wide_total,
            found: wide_powers.len(),
        });
    }
    strength_over(wide_powers, mask.active(), denominator_power(wide_powers, layout, denominator))
}

fn denominator_power(wide_powers: &[f64], layout: &CarrierLayout, denominator: Denominator) -> f64 {
    match denominator {
        Denominator::AllCarriers => wide_powers.iter().sum(),
        Denominator::ExcludeNulls => wide_powers
            .iter()
            .enumerate()
            .filter(|(w, _)| !layout.is_null(*w))
            .map(|(_, p)| p)
            .sum(),
    }
}

fn strength_over(wide_powers: &[f64], active: &[usize], total: f64) -> Result<f64> {
    if total <= 0.0 || total.is_nan() {
        return Err(Error::ZeroPower);
    }
    let inside: f64 = active
        .iter()
        .map(|&w| {
            wide_powers
                .get(w)
                .copied()
                .ok_or_else(|| Error::Mask(format!("carrier {w} outside spectrum")))
        })
        .sum::<Result<f64>>()?;
    Ok((inside / total).clamp(0.0, 1.0))
}

/// Power-weighted mean wide-carrier index measured from band centre, and
/// whether it lies within `limit` of it.
pub fn center_of_mass_within(wide_powers: &[f64], limit: f64) -> Result<(f64, bool)> {
    let total: f64 = wide_powers.iter().sum();
    if total <= 0.0 || total.is_nan() {
        return Err(Error::ZeroPower);
    }
    let centre = (wide_powers.len() as f64 - 1.0) / 2.0;
    let moment: f64 = wide_powers
        .iter()
        .enumerate()
        .map(|(i, p)| (i as f64 - centre) * p)
        .sum();
    let position = moment / total;
    Ok((position, position.abs() <= limit))
}

/// Centre of mass with the default central-quarter band.
pub fn center_of_mass(wide_powers: &[f64], layout: &CarrierLayout) -> Result<(f64, bool)> {
    center_of_mass_within(wide_powers, layout.wide_total as f64 / 8.0)
}

/// One step of the exponential moving average.
pub fn noise_tracker_update(current: f64, interval_power: f64, smoothing: f64) -> f64 {
    current + smoothing * (interval_power - current)
}

/// Detector with its transform plan and codeword masks prepared.
#[derive(Clone, Debug)]
pub struct Detector {
    config: DetectorConfig,
    fft: UnitaryFft,
    masks: Vec<Vec<usize>>,
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        let masks = config
            .codebook
            .masks(&config.layout)?
            .into_iter()
            .map(|m| m.active().to_vec())
            .collect();
        Ok(Self {
            fft: UnitaryFft::new(config.layout.fft_size),
            masks,
            config,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    /// Wide-carrier powers of one `fft_size`-sample window.
    pub fn wide_powers(&self, window: &[Complex64]) -> Result<Vec<f64>> {
        let mut buf = window.to_vec();
        if buf.len() != self.fft.len() {
            return Err(Error::LengthMismatch {
                expected: self.fft.len(),
                found: buf.len(),
            });
        }
        self.fft.forward(&mut buf);
        fold_spectrum(&buf, &self.config.layout)
    }

    /// Strength of every codeword for the given wide powers.
    pub fn strengths(&self, wide_powers: &[f64]) -> Result<Vec<f64>> {
        let total = denominator_power(wide_powers, &self.config.layout, self.config.denominator);
        self.masks
            .iter()
            .map(|m| strength_over(wide_powers, m, total))
            .collect()
    }

    /// Best codeword (lowest index on ties) and the centre-of-mass test.
    pub fn score_powers(&self, wide_powers: &[f64]) -> Result<WindowScore> {
        let strengths = self.strengths(wide_powers)?;
        let (codeword_index, strength) = strengths
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, s)| if s > best.1 { (i, s) } else { best });
        let (com_position, com_valid) = center_of_mass_within(wide_powers, self.config.com_limit)?;
        Ok(WindowScore {
            codeword_index,
            strength,
            com_position,
            com_valid,
        })
    }

    pub fn score_window(&self, window: &[Complex64]) -> Result<WindowScore> {
        self.score_powers(&self.wide_powers(window)?)
    }

    /// Runs the spotter over a stream.
    pub fn spot(&self, frame: &IqFrame) -> Result<SpotReport> {
        let layout = &self.config.layout;
        let size = layout.fft_size;
        let hop = layout.cp_len().max(1);
        let samples = frame.samples();
        let mut summary = SpotSummary::default();
        let mut candidates: Vec<DetectionEvent> = Vec::new();
        let mut noise = self.config.initial_noise;
        let gate = self.config.carrier_sense_db.map(|db| 10f64.powf(db / 10.0));
        let mut start = 0;
        while start + size <= samples.len() {
            let window = &samples[start..start + size];
            let power = crate::fft::energy(window) / size as f64;
            summary.windows_total += 1;
            let floor = *noise.get_or_insert(power);
            let ratio = if floor > 0.0 { power / floor } else { f64::INFINITY };
            if gate.is_some_and(|g| ratio < g) {
                summary.windows_gated += 1;
                noise = Some(noise_tracker_update(floor, power, self.config.noise_smoothing));
                start += hop;
                continue;
            }
            summary.windows_analyzed += 1;
            let score = if power > 0.0 { Some(self.score_window(window)?) } else { None };
            match score {
                Some(s) if s.strength > self.config.gamma && s.com_valid => {
                    candidates.push(DetectionEvent {
                        interval_start: start,
                        codeword_index: s.codeword_index,
                        strength: s.strength,
                        com_position: s.com_position,
                        com_valid: s.com_valid,
                        snr_estimate_db: 10.0 * ratio.log10(),
                    });
                }
                _ => {
                    noise = Some(noise_tracker_update(floor, power, self.config.noise_smoothing));
                }
            }
            start += hop;
        }
        summary.candidates = candidates.len();
        let events = maximal_events(&candidates, size);
        summary.detections = events.len();
        Ok(SpotReport { events, summary })
    }
}

/// `a` wins over `b`: higher strength, then earlier window, then lower index.
fn beats(a: &DetectionEvent, b: &DetectionEvent) -> bool {
    if a.strength != b.strength {
        return a.strength > b.strength;
    }
    (a.interval_start, a.codeword_index) < (b.interval_start, b.codeword_index)
}

/// Keeps candidates that beat every other candidate whose window overlaps
/// theirs. `candidates` must be sorted by start.
fn maximal_events(candidates: &[DetectionEvent], window: usize) -> Vec<DetectionEvent> {
    candidates
        .iter()
        .enumerate()
        .filter(|(i, c)| {
            let before = candidates[..*i]
                .iter()
                .rev()
                .take_while(|o| c.interval_start - o.interval_start < window);
            let after = candidates[i + 1..]
                .iter()
                .take_while(|o| o.interval_start - c.interval_start < window);
            before.chain(after).all(|o| beats(c, o))
        })
        .map(|(_, c)| c.clone())
        .collect()
}

/// Convenience wrapper building a [`Detector`] for a single call.
pub fn spot(frame: &IqFrame, config: &DetectorConfig) -> Result<SpotReport> {
    Detector::new(config.clone())?.spot(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_awgn, noise_power_for_snr};
    use crate::codebook::codeword_to_mask;
    use crate::waveform::{build_tag_spectrum, synthesize_tag};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn layout() -> CarrierLayout {
        CarrierLayout::reference()
    }

    #[test]
    fn fold_examples() {
        let l = layout();
        let mut bins = vec![Complex64::new(0.0, 0.0); 512];
        bins[8] = Complex64::new(1.0, 0.0);
        let w = fold_spectrum(&bins, &l).unwrap();
        assert_eq!(w[33], 1.0);
        assert_eq!(w.iter().sum::<f64>(), 1.0);
        let flat = vec![Complex64::new(1.0, 0.0); 512];
        assert!(fold_spectrum(&flat, &l).unwrap().iter().all(|&p| p == 8.0));
        assert!(fold_spectrum(&flat[..100], &l).is_err());
    }

    #[test]
    fn strength_examples() {
        let l = layout();
        let mask = codeword_to_mask(&Codebook::sloane_seidel().words()[0], &l).unwrap();
        let mut inside = vec![0.0; 64];
        for &w in mask.active() {
            inside[w] = 2.0;
        }
        assert_eq!(tag_strength(&inside, &mask).unwrap(), 1.0);
        assert_eq!(tag_strength(&[1.0; 64], &mask).unwrap(), 0.4375);
        assert_eq!(
            tag_strength_with(&[1.0; 64], &mask, &l, Denominator::ExcludeNulls).unwrap(),
            0.5
        );
        assert!(tag_strength(&[0.0; 64], &mask).is_err());
        assert!((0.62f64 - 0.4375 - 0.18).abs() < 0.01);
    }

    #[test]
    fn com_examples() {
        let l = layout();
        let (pos, ok) = center_of_mass(&[1.0; 64], &l).unwrap();
        assert_eq!(pos, 0.0);
        assert!(ok);
        let mut top = vec![0.0; 64];
        top[63] = 1.0;
        let (pos, ok) = center_of_mass(&top, &l).unwrap();
        assert_eq!(pos, 31.5);
        assert!(!ok);
        assert!(center_of_mass(&[0.0; 64], &l).is_err());
    }

    #[test]
    fn legal_tags_pass_com_test() {
        let l = layout();
        let det = Detector::new(DetectorConfig::reference()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let masks = Codebook::sloane_seidel().masks(&l).unwrap();
        let mut valid = 0;
        let mut total = 0;
        for mask in &masks {
            for _ in 0..20 {
                let s = build_tag_spectrum(mask, &l, 1.0, &mut rng).unwrap();
                let f = synthesize_tag(&s, &l).unwrap();
                let score = det.score_window(&f.samples()[128..]).unwrap();
                valid += score.com_valid as usize;
                total += 1;
            }
        }
        assert!(valid as f64 >= 0.99 * total as f64);
    }

    #[test]
    fn tracker_examples() {
        assert_eq!(noise_tracker_update(3.0, 7.0, 1.0), 7.0);
        let mut est = 0.0;
        for _ in 0..400 {
            est = noise_tracker_update(est, 2.0, 0.05);
        }
        assert!((est - 2.0).abs() < 1e-8);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = apply_awgn(
            &IqFrame::new(vec![Complex64::new(0.0, 0.0); 512 * 101], 1.0).unwrap(),
            1.0,
            &mut rng,
        );
        let powers: Vec<f64> = noise
            .samples()
            .chunks_exact(512)
            .map(|w| crate::fft::energy(w) / 512.0)
            .collect();
        let mut est = powers[0];
        for &p in &powers[1..] {
            est = noise_tracker_update(est, p, 0.05);
        }
        assert!((est - 1.0).abs() < 0.05, "estimate {est}");
    }

    fn tag_stream(word: usize, snr_db: f64, offset: usize, cfo: f64, seed: u64) -> IqFrame {
        let l = layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = codeword_to_mask(&Codebook::sloane_seidel().words()[word], &l).unwrap();
        let spec = build_tag_spectrum(&mask, &l, 112.0, &mut rng).unwrap();
        let tag = crate::channel::apply_cfo(&synthesize_tag(&spec, &l).unwrap(), cfo, &l);
        let mut samples = vec![Complex64::new(0.0, 0.0); 640 + offset];
        samples.extend_from_slice(tag.samples());
        samples.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), 640));
        let frame = IqFrame::new(samples, 1.0).unwrap();
        apply_awgn(&frame, noise_power_for_snr(snr_db, 1.0, &l), &mut rng)
    }

    #[test]
    fn clean_tag_spotted_once() {
        let det = Detector::new(DetectorConfig::reference()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..50 {
            let word = rng.random_range(0..60);
            let offset = rng.random_range(0..640);
            let cfo = rng.random_range(-2.0..=2.0);
            let report = det.spot(&tag_stream(word, 30.0, offset, cfo, trial)).unwrap();
            assert_eq!(report.events.len(), 1, "trial {trial}: {:?}", report.events);
            assert_eq!(report.events[0].codeword_index, word);
            assert!(report.events[0].strength > 0.62);
        }
    }

    #[test]
    fn overlapping_events_resolved() {
        let mk = |start, strength, idx| DetectionEvent {
            interval_start: start,
            codeword_index: idx,
            strength,
            com_position: 0.0,
            com_valid: true,
            snr_estimate_db: 0.0,
        };
        let c = vec![mk(0, 0.7, 1), mk(128, 0.9, 2), mk(256, 0.9, 0), mk(1024, 0.8, 3)];
        let out = maximal_events(&c, 512);
        assert_eq!(out.iter().map(|e| e.interval_start).collect::<Vec<_>>(), vec![128, 1024]);
    }

    #[test]
    fn carrier_sense_gates_quiet_windows() {
        let mut cfg = DetectorConfig::reference();
        cfg.initial_noise = Some(1.0);
        let det = Detector::new(cfg).unwrap();
        let quiet = IqFrame::new(vec![Complex64::new(0.1, 0.0); 2048], 1.0).unwrap();
        let report = det.spot(&quiet).unwrap();
        assert!(report.summary.windows_gated > 0);
        assert_eq!(report.summary.windows_total, 13);
        let mut cfg = DetectorConfig::reference();
        cfg.carrier_sense_db = None;
        cfg.initial_noise = Some(1.0);
        let report = Detector::new(cfg).unwrap().spot(&quiet).unwrap();
        assert_eq!(report.summary.windows_gated, 0);
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = DetectorConfig::reference();
        cfg.gamma = 1.0;
        assert!(Detector::new(cfg).is_err());
        let mut cfg = DetectorConfig::reference();
        cfg.noise_smoothing = 0.0;
        assert!(Detector::new(cfg).is_err());
    }
}
