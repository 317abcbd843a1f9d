//! Front end for the `prefail` prover: run configurations, the benchmark
//! manifest, and report formatting shared by the binary and its tests.

pub mod manifest;
pub mod report;
pub mod run;

pub use manifest::{Entry, Expect, Manifest};
pub use report::{RunReport, SizeReport, Verdict};
pub use run::{run, Engine, RunConfig, RunError};
