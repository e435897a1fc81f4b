//! Detection / false-alarm curves over a threshold grid.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::Denominator;
use crate::error::{Error, Result};
use crate::layout::CarrierLayout;
use crate::trials::{map_trials, Proportion, TrialPlan};

use super::montecarlo::{per_thin_ratio, CodeFamily, FamilyScorer};
use super::single::{pd_single, pf_single_with, AnalysisModel, ModelFading};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub gamma: f64,
    pub pd: f64,
    pub pd_ci95: f64,
    pub pf: f64,
    pub pf_ci95: f64,
    /// Set when a Monte Carlo interval is wide relative to its estimate.
    pub imprecise: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    /// Zero for closed-form curves.
    pub trials: u64,
    pub seed: u64,
}

/// Single-tag curve from the closed forms.
pub fn closed_form_roc(model: &AnalysisModel, gammas: &[f64]) -> Result<RocCurve> {
    check_grid(gammas)?;
    let points = gammas
        .iter()
        .map(|&gamma| {
            let m = AnalysisModel { gamma, ..model.clone() };
            RocPoint {
                gamma,
                pd: pd_single(&m),
                pd_ci95: 0.0,
                pf: pf_single_with(gamma, &m.layout, m.denominator),
                pf_ci95: 0.0,
                imprecise: false,
            }
        })
        .collect();
    Ok(RocCurve { points, trials: 0, seed: 0 })
}

/// Family curve by Monte Carlo. Each trial draws one noise-only spectrum and
/// one received spectrum and scores them once; every threshold reuses the
/// same scores, so both columns are nonincreasing in `gamma`.
pub fn family_roc_mc(
    family: &CodeFamily,
    layout: &CarrierLayout,
    snr_db: f64,
    fading: ModelFading,
    denominator: Denominator,
    gammas: &[f64],
    plan: &TrialPlan,
) -> Result<RocCurve> {
    check_grid(gammas)?;
    let scorer = FamilyScorer::new(family, layout, denominator)?;
    let s = per_thin_ratio(snr_db, layout);
    let scores = map_trials(plan, |_, rng: &mut ChaCha8Rng| {
        let noise = scorer.draw_noise(rng);
        let noise_strength = scorer.best(&noise).1 / scorer.denominator(&noise);
        let sent = scorer.random_word(rng);
        let rx = scorer.draw_received(sent, s, fading, rng);
        let (best, inside) = scorer.best(&rx);
        let signal_strength = if best == sent { inside / scorer.denominator(&rx) } else { -1.0 };
        (noise_strength, signal_strength)
    });
    let points = gammas
        .iter()
        .map(|&gamma| {
            let pf = Proportion::new(scores.iter().filter(|s| s.0 > gamma).count() as u64, plan.trials);
            let pd = Proportion::new(scores.iter().filter(|s| s.1 > gamma).count() as u64, plan.trials);
            RocPoint {
                gamma,
                pd: pd.estimate(),
                pd_ci95: pd.ci95(),
                pf: pf.estimate(),
                pf_ci95: pf.ci95(),
                imprecise: pf.is_imprecise() || pd.is_imprecise(),
            }
        })
        .collect();
    Ok(RocCurve {
        points,
        trials: plan.trials,
        seed: plan.seed,
    })
}

fn check_grid(gammas: &[f64]) -> Result<()> {
    if gammas.is_empty() {
        return Err(Error::InvalidParameter("empty gamma grid".to_string()));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
        return Err(Error::InvalidParameter(format!("gamma {g} outside (0, 1)")));
    }
    Ok(())
}
