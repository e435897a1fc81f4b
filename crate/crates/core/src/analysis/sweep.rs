//! How many of `N` wide carriers a tag should energise.
//!
//! Simplified model: every thin carrier of an active wide carrier is
//! energised (`alpha = beta`), so the thick-carrier SNR equals `s = p / n`.
//! With `q` active carriers the in/out ratio on noise is
//! `R = Gamma(alpha q) / Gamma(alpha (N - q))`, and with a wideband-faded tag
//! it is `(1 + s) R`. The threshold `t0` puts detection at one half, so
//! `t0 = (1 + s) median(R)`, and the false-alarm rate at that threshold is
//! `P(R > t0)`. Both are invariant to rescaling `R`, so reading the ratio as
//! an F variable instead gives the same curve.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trials::{count_trials, Proportion, TrialPlan};

use super::special::{beta_sf, beta_sf_inv};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub q: usize,
    /// Strength threshold giving detection probability one half.
    pub gamma0: f64,
    /// False-alarm probability at `gamma0`.
    pub pf: f64,
}

pub fn sweep_active_carriers(n_carriers: usize, snr_db: f64, alpha: usize) -> Result<Vec<SweepPoint>> {
    if n_carriers < 2 || alpha == 0 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 carriers and alpha > 0, got {n_carriers} and {alpha}"
        )));
    }
    Ok((1..n_carriers)
        .map(|q| sweep_point(q, n_carriers, snr_db, alpha))
        .collect())
}

pub fn sweep_point(q: usize, n_carriers: usize, snr_db: f64, alpha: usize) -> SweepPoint {
    let (a, b) = shapes(q, n_carriers, alpha);
    let s = 10f64.powf(snr_db / 10.0);
    let median_b = beta_sf_inv(a, b, 0.5);
    let t0 = (1.0 + s) * median_b / (1.0 - median_b);
    let gamma0 = t0 / (1.0 + t0);
    SweepPoint {
        q,
        gamma0,
        pf: beta_sf(a, b, gamma0),
    }
}

/// The `q` with the smallest false-alarm rate.
pub fn optimal_q(points: &[SweepPoint]) -> Option<usize> {
    points
        .iter()
        .min_by(|x, y| x.pf.total_cmp(&y.pf))
        .map(|p| p.q)
}

/// Monte Carlo detection probability at a point's `gamma0`; should be 1/2.
pub fn sweep_pd_mc(point: &SweepPoint, n_carriers: usize, snr_db: f64, alpha: usize, plan: &TrialPlan) -> Proportion {
    let (a, b) = shapes(point.q, n_carriers, alpha);
    let s = 10f64.powf(snr_db / 10.0);
    let inside = Gamma::new(a, 1.0).expect("positive shape");
    let outside = Gamma::new(b, 1.0).expect("positive shape");
    let hits = count_trials(plan, |_, rng: &mut ChaCha8Rng| {
        let x = (1.0 + s) * inside.sample(rng);
        let y = outside.sample(rng);
        x / (x + y) > point.gamma0
    });
    Proportion::new(hits, plan.trials)
}

fn shapes(q: usize, n_carriers: usize, alpha: usize) -> (f64, f64) {
    ((alpha * q) as f64, (alpha * (n_carriers - q)) as f64)
}
