//! Fixtures, brute-force oracles and the acceptance experiments for
//! `affinv`.

pub mod experiments;
pub mod fixtures;
pub mod oracles;

pub use experiments::{default_suite, run, CriterionReport, ExperimentSpec, CRITERIA};
