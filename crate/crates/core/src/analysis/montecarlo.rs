//! Monte Carlo estimates for codeword families, drawn directly from the
//! wide-carrier power model rather than through waveforms.
//!
//! Powers are in units of the per-bin noise power. Noise on a wide carrier
//! of `alpha` thin bins is `Gamma(alpha)`. An active carrier adds signal on
//! its `beta` energised bins: under wideband fading those bins total
//! `(1 + s) Gamma(beta)`, under narrowband fading `Gamma(beta + K)` with
//! `K ~ Poisson(beta s)`, the Poisson form of the noncentral chi-square.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::codebook::Codebook;
use crate::detector::Denominator;
use crate::error::{Error, Result};
use crate::layout::CarrierLayout;
use crate::trials::{count_trials, Proportion, TrialPlan};

use super::single::ModelFading;

/// A set of codewords the detector searches over.
#[derive(Clone, Debug)]
pub enum CodeFamily {
    Explicit(Codebook),
    /// All `2^c` words: one free bit per group, minimum distance 1.
    Unencoded,
}

impl CodeFamily {
    pub fn name(&self) -> String {
        match self {
            CodeFamily::Explicit(cb) => cb.name().to_string(),
            CodeFamily::Unencoded => "unencoded".to_string(),
        }
    }

    pub fn size(&self, layout: &CarrierLayout) -> f64 {
        match self {
            CodeFamily::Explicit(cb) => cb.len() as f64,
            CodeFamily::Unencoded => 2f64.powi(layout.groups as i32),
        }
    }
}

/// A family prepared for scoring against one layout.
#[derive(Clone, Debug)]
pub struct FamilyScorer {
    layout: CarrierLayout,
    groups: Vec<(usize, usize)>,
    masks: Option<Vec<Vec<usize>>>,
    denominator: Denominator,
}

impl FamilyScorer {
    pub fn new(family: &CodeFamily, layout: &CarrierLayout, denominator: Denominator) -> Result<Self> {
        layout.validate()?;
        let masks = match family {
            CodeFamily::Explicit(cb) => {
                if cb.is_empty() {
                    return Err(Error::TooFewWords(0));
                }
                Some(cb.masks(layout)?.into_iter().map(|m| m.active().to_vec()).collect())
            }
            CodeFamily::Unencoded => {
                if layout.groups > 63 {
                    return Err(Error::InvalidParameter("too many groups".to_string()));
                }
                None
            }
        };
        Ok(Self {
            layout: layout.clone(),
            groups: layout.group_map(),
            masks,
            denominator,
        })
    }

    /// Number of words in the family.
    pub fn words(&self) -> u64 {
        match &self.masks {
            Some(m) => m.len() as u64,
            None => 1u64 << self.groups.len(),
        }
    }

    /// Active wide carriers of word `index`. For the unencoded family bit `g`
    /// of the index selects the second carrier of group `g`.
    pub fn active(&self, index: u64) -> Vec<usize> {
        match &self.masks {
            Some(m) => m[index as usize].clone(),
            None => self
                .groups
                .iter()
                .enumerate()
                .map(|(g, &(a, b))| if index >> g & 1 == 1 { b } else { a })
                .collect(),
        }
    }

    pub fn denominator(&self, powers: &[f64]) -> f64 {
        match self.denominator {
            Denominator::AllCarriers => powers.iter().sum(),
            Denominator::ExcludeNulls => self.groups.iter().map(|&(a, b)| powers[a] + powers[b]).sum(),
        }
    }

    /// Word with the most in-mask power (lowest index on ties) and that power.
    pub fn best(&self, powers: &[f64]) -> (u64, f64) {
        match &self.masks {
            Some(masks) => {
                let mut best = (0u64, f64::NEG_INFINITY);
                for (i, m) in masks.iter().enumerate() {
                    let inside: f64 = m.iter().map(|&w| powers[w]).sum();
                    if inside > best.1 {
                        best = (i as u64, inside);
                    }
                }
                best
            }
            None => {
                let mut index = 0u64;
                let mut inside = 0.0;
                for (g, &(a, b)) in self.groups.iter().enumerate() {
                    if powers[b] > powers[a] {
                        index |= 1 << g;
                        inside += powers[b];
                    } else {
                        inside += powers[a];
                    }
                }
                (index, inside)
            }
        }
    }

    /// Noise-only wide powers. Groups are drawn in order, first carrier then
    /// second, followed by the nulls, so every family sees the same draws.
    pub fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let noise = Gamma::new(self.layout.thin_per_wide as f64, 1.0).expect("positive shape");
        let mut powers = vec![0.0; self.layout.wide_total];
        for &(a, b) in &self.groups {
            powers[a] = noise.sample(rng);
            powers[b] = noise.sample(rng);
        }
        for &w in &self.layout.null_wide {
            powers[w] = noise.sample(rng);
        }
        powers
    }

    /// Wide powers received for word `index` at per-thin signal ratio `s`.
    pub fn draw_received<R: Rng + ?Sized>(
        &self,
        index: u64,
        s: f64,
        fading: ModelFading,
        rng: &mut R,
    ) -> Vec<f64> {
        let alpha = self.layout.thin_per_wide as f64;
        let beta = self.layout.active_thin_per_wide as f64;
        let mut powers = self.draw_noise(rng);
        if s <= 0.0 {
            return powers;
        }
        let energised = Gamma::new(beta, 1.0).expect("positive shape");
        let idle = (alpha > beta).then(|| Gamma::new(alpha - beta, 1.0).expect("positive shape"));
        let poisson = Poisson::new(beta * s).expect("positive mean");
        for w in self.active(index) {
            let idle_power = idle.as_ref().map_or(0.0, |d| d.sample(rng));
            let signal = match fading {
                ModelFading::Wideband => (1.0 + s) * energised.sample(rng),
                ModelFading::Narrowband => {
                    let k: f64 = poisson.sample(rng);
                    Gamma::new(beta + k, 1.0).expect("positive shape").sample(rng)
                }
            };
            powers[w] = signal + idle_power;
        }
        powers
    }

    pub fn random_word<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.random_range(0..self.words())
    }
}

fn check_gamma(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma {gamma} outside (0, 1)")));
    }
    Ok(gamma)
}

fn check_trials(plan: &TrialPlan) -> Result<()> {
    if plan.trials < 1000 {
        return Err(Error::InvalidParameter(format!(
            "at least 1000 trials required, got {}",
            plan.trials
        )));
    }
    Ok(())
}

/// Probability that the best word of `family` exceeds `gamma` on noise alone.
pub fn pf_family_mc(
    gamma: f64,
    family: &CodeFamily,
    layout: &CarrierLayout,
    denominator: Denominator,
    plan: &TrialPlan,
) -> Result<Proportion> {
    let gamma = check_gamma(gamma)?;
    check_trials(plan)?;
    let scorer = FamilyScorer::new(family, layout, denominator)?;
    let hits = count_trials(plan, |_, rng: &mut ChaCha8Rng| {
        let powers = scorer.draw_noise(rng);
        scorer.best(&powers).1 > gamma * scorer.denominator(&powers)
    });
    Ok(Proportion::new(hits, plan.trials))
}

/// False-alarm probability of the full `2^c` code, which picks the larger
/// carrier of every group and so dominates every other family draw by draw.
pub fn pf_pairs_bound(
    gamma: f64,
    layout: &CarrierLayout,
    denominator: Denominator,
    plan: &TrialPlan,
) -> Result<Proportion> {
    pf_family_mc(gamma, &CodeFamily::Unencoded, layout, denominator, plan)
}

/// Probability that the strongest word is not the one sent, with no threshold.
pub fn pm_mc(
    snr_db: f64,
    family: &CodeFamily,
    layout: &CarrierLayout,
    fading: ModelFading,
    plan: &TrialPlan,
) -> Result<Proportion> {
    check_trials(plan)?;
    let scorer = FamilyScorer::new(family, layout, Denominator::ExcludeNulls)?;
    let s = per_thin_ratio(snr_db, layout);
    let misses = count_trials(plan, |_, rng: &mut ChaCha8Rng| {
        let sent = scorer.random_word(rng);
        let powers = scorer.draw_received(sent, s, fading, rng);
        scorer.best(&powers).0 != sent
    });
    Ok(Proportion::new(misses, plan.trials))
}

/// Probability that the strongest word is the one sent and exceeds `gamma`.
pub fn pd_family_mc(
    gamma: f64,
    snr_db: f64,
    family: &CodeFamily,
    layout: &CarrierLayout,
    fading: ModelFading,
    denominator: Denominator,
    plan: &TrialPlan,
) -> Result<Proportion> {
    let gamma = check_gamma(gamma)?;
    check_trials(plan)?;
    let scorer = FamilyScorer::new(family, layout, denominator)?;
    let s = per_thin_ratio(snr_db, layout);
    let hits = count_trials(plan, |_, rng: &mut ChaCha8Rng| {
        let sent = scorer.random_word(rng);
        let powers = scorer.draw_received(sent, s, fading, rng);
        let (best, inside) = scorer.best(&powers);
        best == sent && inside > gamma * scorer.denominator(&powers)
    });
    Ok(Proportion::new(hits, plan.trials))
}

/// `p / n` for a thick-carrier SNR.
pub fn per_thin_ratio(snr_db: f64, layout: &CarrierLayout) -> f64 {
    10f64.powf(snr_db / 10.0) * layout.thin_per_wide as f64 / layout.active_thin_per_wide as f64
}
