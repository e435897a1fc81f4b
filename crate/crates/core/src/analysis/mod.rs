//! Performance analysis: leakage, closed-form single-tag probabilities,
//! Monte Carlo estimates for codeword families, the active-carrier sweep
//! and small calculators.

pub mod calc;
pub mod curves;
pub mod leakage;
pub mod montecarlo;
pub mod single;
pub mod special;
pub mod sweep;

pub use calc::{overhead, range_gain, threshold_equivalent_snr, FrameAccounting};
pub use curves::{closed_form_roc, family_roc_mc, RocCurve, RocPoint};
pub use leakage::{expected_offset_leak, leakage_block, leakage_single};
pub use montecarlo::{pd_family_mc, pf_family_mc, pf_pairs_bound, pm_mc, CodeFamily, FamilyScorer};
pub use single::{pd_single, pf_single, pf_single_with, AnalysisModel, ModelFading};
pub use sweep::{optimal_q, sweep_active_carriers, SweepPoint};
