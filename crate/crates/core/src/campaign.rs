//! Independent trials on a worker pool.
//!
//! Trial `i` runs with seed `base + i`; results come back in seed order no
//! matter how many workers ran them. A panicking trial aborts the campaign
//! with an error naming its seed.

use std::panic::{self, AssertUnwindSafe};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{analyze, TrialResult};
use crate::params::DerivedParams;
use crate::sim::{run, RunOptions, Scenario};

fn guarded(s: &Scenario, p: &DerivedParams, seed: u64) -> Result<TrialResult> {
    panic::catch_unwind(AssertUnwindSafe(|| run_trial(s, p, seed))).unwrap_or_else(|e| {
        let message = e
            .downcast_ref::<&str>()
            .map(|m| m.to_string())
            .or_else(|| e.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(Error::TrialPanic { seed, message })
    })
}

pub fn run_trial(s: &Scenario, p: &DerivedParams, seed: u64) -> Result<TrialResult> {
    let mut s = s.clone();
    s.seed = seed;
    let trace = run(&s, p, &RunOptions::default())?;
    analyze(&trace, p)
}

pub fn run_campaign(s: &Scenario, p: &DerivedParams, trials: usize, workers: usize) -> Result<Vec<TrialResult>> {
    if trials < 2 {
        return Err(Error::Config(format!("need at least 2 trials, got {trials}")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| {
        (0..trials as u64)
            .into_par_iter()
            .map(|i| guarded(s, p, s.seed.wrapping_add(i)))
            .collect()
    })
}
