//! Many independent runs at once. Each run owns its whole world, so the
//! parallel path shares nothing mutable; results keep input order.

use crate::config::Scenario;
use crate::error::Result;
use crate::topology::{run_scenario, RunOutput};

/// Applies `f` to every scenario, on the rayon pool when the `parallel`
/// feature is on.
pub fn map_batch<T, F>(scenarios: &[Scenario], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&Scenario) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        scenarios.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        scenarios.iter().map(f).collect()
    }
}

/// Same as [`map_batch`] but always on the calling thread.
pub fn map_batch_sequential<T, F>(scenarios: &[Scenario], f: F) -> Vec<T>
where
    F: Fn(&Scenario) -> T,
{
    scenarios.iter().map(f).collect()
}

pub fn run_batch(scenarios: &[Scenario]) -> Vec<Result<RunOutput>> {
    map_batch(scenarios, run_scenario)
}

pub fn run_batch_sequential(scenarios: &[Scenario]) -> Vec<Result<RunOutput>> {
    map_batch_sequential(scenarios, run_scenario)
}
