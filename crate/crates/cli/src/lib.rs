//! Experiment harness for the counterfactual-regression toolkit: dataset
//! simulation, grid-selected training runs, alpha sweeps, and bound
//! reports, all reproducible from a config file and a master seed.

pub mod config;
pub mod harness;
pub mod meta;

pub use config::ExperimentConfig;
pub use harness::{cmd_bound, cmd_run, cmd_simulate, cmd_sweep_alpha};

/// Builds a rayon pool with the requested worker count and runs `f` inside
/// it; `None` uses the default pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}
