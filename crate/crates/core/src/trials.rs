//! Seeded Monte Carlo trial execution.
//!
//! Every trial owns a ChaCha8 stream selected by its index under the master
//! seed, so results depend only on `(seed, trial index)` and are bit-identical
//! whether trials run on one thread or many. With the `parallel` feature
//! (default) trials are spread over the rayon pool; without it, or with
//! [`Execution::Sequential`], they run in a plain loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this mode actually fans out in the current build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// How many trials to run, from which seed, and on what executor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialPlan {
    pub trials: u64,
    pub seed: u64,
    pub execution: Execution,
}

impl TrialPlan {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            execution: Execution::default(),
        }
    }

    pub fn sequential(mut self) -> Self {
        self.execution = Execution::Sequential;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    /// Same size and executor, different seed.
    pub fn reseeded(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// RNG for trial `index` under `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `f` once per trial and returns results in trial order.
pub fn map_trials<T, F>(plan: &TrialPlan, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync + Send,
{
    let run = |i: u64| f(i, &mut trial_rng(plan.seed, i));
    #[cfg(feature = "parallel")]
    if plan.execution.is_parallel() {
        return (0..plan.trials).into_par_iter().map(run).collect();
    }
    (0..plan.trials).map(run).collect()
}

/// Number of trials for which `f` returns true.
pub fn count_trials<F>(plan: &TrialPlan, f: F) -> u64
where
    F: Fn(u64, &mut ChaCha8Rng) -> bool + Sync + Send,
{
    let run = |i: u64| f(i, &mut trial_rng(plan.seed, i)) as u64;
    #[cfg(feature = "parallel")]
    if plan.execution.is_parallel() {
        return (0..plan.trials).into_par_iter().map(run).sum();
    }
    (0..plan.trials).map(run).sum()
}

/// Applies `f` to every item, in parallel when enabled; output keeps input order.
pub fn map_items<I, T, F>(items: &[I], execution: Execution, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if execution.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = execution;
    items.iter().map(f).collect()
}

/// A binomial proportion with its 95% confidence half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        Self { successes, trials }
    }

    pub fn estimate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    /// Wilson score interval at 95%.
    pub fn wilson95(&self) -> (f64, f64) {
        wilson(self.successes, self.trials, Z95)
    }

    /// Half-width of the Wilson 95% interval.
    pub fn ci95(&self) -> f64 {
        let (lo, hi) = self.wilson95();
        (hi - lo) / 2.0
    }

    /// Standard error of the estimate (normal approximation).
    pub fn std_error(&self) -> f64 {
        let p = self.estimate();
        (p * (1.0 - p) / self.trials.max(1) as f64).sqrt()
    }

    /// Flagged when the interval is wide relative to the estimate.
    pub fn is_imprecise(&self) -> bool {
        let p = self.estimate();
        p == 0.0 || self.ci95() > 0.2 * p
    }
}

pub const Z95: f64 = 1.959_963_984_540_054;

fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}
