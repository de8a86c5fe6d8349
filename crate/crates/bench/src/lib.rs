//! Dataset files, the timed benchmark harness and the `rbt` command line for
//! [`rbt_core`].

pub mod bench;
pub mod cli;
pub mod config;
pub mod datagen;
pub mod method;
pub mod report;

pub use bench::{run_benchmark, BenchConfig, BenchError, BenchReport, RunRecord};
pub use method::{BitBias, Method, ParamColumns};
