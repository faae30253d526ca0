//! Flame graphs as sparse vectors over call stacks.
//!
//! * [`model`]: frames, stacks, flame graphs, signed deltas, flame charts.
//! * [`folded`]: the collapsed stack text format and the JSON report.
//! * [`algebra`]: sums, differences, the four-way delta decomposition, the
//!   L1 norm, distance and similarity.
//! * [`stats`]: the two-sample Hotelling T² regression test with
//!   simultaneous per-stack confidence intervals.
//! * [`sim`]: a synthetic sampling-profiler scenario generator.
//! * [`cli`]: the `fgalgebra` command line.

pub mod algebra;
pub mod cli;
pub mod error;
pub mod folded;
pub mod model;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use model::{DeltaGraph, FlameChart, FlameGraph, Frame, Stack, Unit};
