//! Scenario loading, closed-loop run, metrics and export.

mod export;
mod metrics;
mod run;
mod scenario;

pub use export::*;
pub use metrics::*;
pub use run::*;
pub use scenario::*;
