//! Independent runs over a set of scenarios. With the `parallel` feature the
//! runs are spread over the rayon pool; otherwise they run in order.

use crate::error::Result;
use crate::scenario::Scenario;
use crate::sim::{run_experiment, RunOutcome};

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
/// Output order always matches input order.
pub fn parallel_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

pub fn run_batch(scenarios: &[Scenario]) -> Vec<Result<RunOutcome>> {
    parallel_map(scenarios, run_experiment)
}

pub fn run_batch_sequential(scenarios: &[Scenario]) -> Vec<Result<RunOutcome>> {
    scenarios.iter().map(run_experiment).collect()
}
