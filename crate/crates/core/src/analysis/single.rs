//! Closed-form detection and false-alarm probabilities for one tag.
//!
//! In units of the per-bin noise power, the wide-carrier powers a detector
//! sums are gamma variables: noise over `k` thin bins is `Gamma(k)`. For a
//! tag with per-thin power ratio `s = p / n`:
//!
//! * in-mask energised bins (`beta * c` of them): `(1 + s) Gamma(beta c)`
//!   under wideband Rayleigh fading, or a noncentral variable with Poisson
//!   mean `beta c s` under narrowband fading;
//! * in-mask idle bins: `Gamma((alpha - beta) c)`;
//! * bins in the denominator but outside the mask: `Gamma(alpha m)`, where
//!   `m` is `c` without nulls or `wide_total - c` with them.
//!
//! Strength exceeds `gamma` exactly when in/out exceeds `gamma / (1 - gamma)`.

use serde::{Deserialize, Serialize};

use crate::detector::Denominator;
use crate::layout::CarrierLayout;

use super::special::{beta_sf, composite_rule, gamma_p, noncentral_beta_sf};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFading {
    /// Constant amplitude, uniform phase.
    Narrowband,
    /// Independent Rayleigh gain per thin carrier.
    #[default]
    Wideband,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisModel {
    pub layout: CarrierLayout,
    pub snr_db: f64,
    pub fading: ModelFading,
    pub gamma: f64,
    pub denominator: Denominator,
}

impl AnalysisModel {
    /// Reference layout with nulls excluded from the denominator.
    pub fn new(snr_db: f64, fading: ModelFading, gamma: f64) -> Self {
        Self {
            layout: CarrierLayout::reference(),
            snr_db,
            fading,
            gamma,
            denominator: Denominator::ExcludeNulls,
        }
    }

    pub fn with_denominator(mut self, denominator: Denominator) -> Self {
        self.denominator = denominator;
        self
    }

    /// `p / n` from the thick-carrier SNR `beta p / (alpha n)`.
    pub fn signal_to_noise_per_thin(&self) -> f64 {
        super::montecarlo::per_thin_ratio(self.snr_db, &self.layout)
    }
}

/// Gamma shapes of the strength statistic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shapes {
    pub energised: f64,
    pub idle: f64,
    pub outside: f64,
}

impl Shapes {
    pub fn new(layout: &CarrierLayout, denominator: Denominator) -> Self {
        let alpha = layout.thin_per_wide as f64;
        let beta = layout.active_thin_per_wide as f64;
        let c = layout.groups as f64;
        let outside_wide = match denominator {
            Denominator::ExcludeNulls => c,
            Denominator::AllCarriers => (layout.wide_total - layout.groups) as f64,
        };
        Self {
            energised: beta * c,
            idle: (alpha - beta) * c,
            outside: alpha * outside_wide,
        }
    }

    pub fn inside(&self) -> f64 {
        self.energised + self.idle
    }
}

/// Noise-only probability that one codeword's strength exceeds `gamma`,
/// with nulls excluded: the F(2 alpha c, 2 alpha c) tail at `gamma / (1 - gamma)`.
pub fn pf_single(gamma: f64, layout: &CarrierLayout) -> f64 {
    pf_single_with(gamma, layout, Denominator::ExcludeNulls)
}

pub fn pf_single_with(gamma: f64, layout: &CarrierLayout, denominator: Denominator) -> f64 {
    let s = Shapes::new(layout, denominator);
    beta_sf(s.inside(), s.outside, gamma)
}

/// Probability that the transmitted codeword's strength exceeds `gamma`.
pub fn pd_single(model: &AnalysisModel) -> f64 {
    let shapes = Shapes::new(&model.layout, model.denominator);
    let s = model.signal_to_noise_per_thin();
    match model.fading {
        ModelFading::Narrowband => pd_narrowband(shapes, s, model.gamma),
        ModelFading::Wideband => pd_wideband(shapes, s, model.gamma),
    }
}

/// The energised bins form a noncentral chi-square with noncentrality
/// `2 beta c s`, so the strength is noncentral beta.
pub fn pd_narrowband(shapes: Shapes, s: f64, gamma: f64) -> f64 {
    noncentral_beta_sf(shapes.inside(), shapes.outside, 2.0 * shapes.energised * s, gamma)
}

/// `P((1 + s) X + Y > t Z)` for independent `X ~ Gamma(energised)`,
/// `Y ~ Gamma(idle)`, `Z ~ Gamma(outside)` and `t = gamma / (1 - gamma)`,
/// integrating the conditional gamma CDF of `Z` over `X` and `Y`.
pub fn pd_wideband(shapes: Shapes, s: f64, gamma: f64) -> f64 {
    if gamma <= 0.0 {
        return 1.0;
    }
    if gamma >= 1.0 {
        return 0.0;
    }
    if s == 0.0 {
        return beta_sf(shapes.inside(), shapes.outside, gamma);
    }
    let t = gamma / (1.0 - gamma);
    let xs = gamma_rule(shapes.energised);
    let ys = if shapes.idle > 0.0 { gamma_rule(shapes.idle) } else { vec![(0.0, 1.0)] };
    let mut total = 0.0;
    for &(x, wx) in &xs {
        let mut inner = 0.0;
        for &(y, wy) in &ys {
            inner += wy * gamma_p(shapes.outside, ((1.0 + s) * x + y) / t);
        }
        total += wx * inner;
    }
    total.clamp(0.0, 1.0)
}

/// Quadrature nodes carrying the `Gamma(shape)` density in their weights.
fn gamma_rule(shape: f64) -> Vec<(f64, f64)> {
    let sd = shape.sqrt();
    let lo = (shape - 12.0 * sd).max(0.0);
    let hi = shape + 12.0 * sd + 40.0;
    let ln_norm = super::special::ln_gamma(shape);
    composite_rule(lo, hi, 24, 8)
        .into_iter()
        .map(|(x, w)| {
            let density = if x > 0.0 {
                ((shape - 1.0) * x.ln() - x - ln_norm).exp()
            } else {
                0.0
            };
            (x, w * density)
        })
        .collect()
}
