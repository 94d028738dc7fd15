mod metrics;
mod report;
mod sweep;

pub use metrics::*;
pub use report::*;
pub use sweep::*;
