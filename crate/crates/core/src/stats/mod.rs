//! Statistics over samples of flame graphs: mean graphs, frequency-based
//! dimensionality reduction, pooled covariance, the two-sample Hotelling T²
//! test, simultaneous per-stack confidence intervals and noise-reduced
//! deltas.

mod hotelling;
pub mod linalg;
mod sample;
pub mod special;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use hotelling::{
    confidence_intervals, g_squared, hotelling_test, reduce_delta, regression_test,
    significant_stacks, HotellingOutcome, Interval, RegressionReport, StackRow,
};
pub use sample::{frequency_reduce, mean_graph, pooled_stats, PooledStats, StackBasis};
pub use special::{f_cdf, f_quantile, f_sf};

use crate::error::{Error, Result};
use crate::model::{FlameGraph, Unit};

/// Flame graphs from repeated profiling runs of one code base.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    graphs: Vec<FlameGraph>,
    unit: Unit,
}

impl SampleSet {
    pub fn new(unit: Unit, graphs: Vec<FlameGraph>) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::EmptySample);
        }
        for g in &graphs {
            unit.check(g.unit())?;
        }
        Ok(Self { graphs, unit })
    }

    pub fn graphs(&self) -> &[FlameGraph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }
}

/// How the constant `G²` in front of the Hotelling statistic is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    /// `(n1+n2-p-1) / ((n1+n2-2) p) · n1 n2 / (n1+n2)`.
    #[default]
    Standard,
    /// The same without the `n1 n2 / (n1+n2)` factor. Only useful to
    /// reproduce published worked examples that omit it.
    ExampleCompatible,
}

impl Scaling {
    pub fn as_str(self) -> &'static str {
        match self {
            Scaling::Standard => "standard",
            Scaling::ExampleCompatible => "example-compatible",
        }
    }
}

impl fmt::Display for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Scaling::Standard),
            "example-compatible" | "example_compatible" => Ok(Scaling::ExampleCompatible),
            other => Err(Error::Config(format!("unknown scaling {other:?}"))),
        }
    }
}

/// Knobs of the regression test.
#[derive(Debug, Clone, PartialEq)]
pub struct HotellingConfig {
    /// Critical p-value; the critical `F*` is the `1 - p_star` quantile.
    pub p_star: f64,
    pub scaling: Scaling,
    /// Relative ridge `λ = ridge · mean(diag Σp)` added when the direct
    /// factorization of `Σp` fails.
    pub ridge: f64,
    /// Minimum number of runs (across both samples) a stack must appear in.
    /// `None` uses `max(2, ⌈min(n1, n2) / 2⌉)`.
    pub min_df: Option<usize>,
    /// Use this `F*` instead of deriving it from `p_star`.
    pub f_star: Option<f64>,
}

impl Default for HotellingConfig {
    fn default() -> Self {
        Self {
            p_star: 0.01,
            scaling: Scaling::Standard,
            ridge: 1e-9,
            min_df: None,
            f_star: None,
        }
    }
}

impl HotellingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_star > 0.0 && self.p_star < 1.0) {
            return Err(Error::Config(format!(
                "p_star {} outside (0, 1)",
                self.p_star
            )));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::Config(format!("ridge {} must be >= 0", self.ridge)));
        }
        if let Some(f) = self.f_star {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::Config(format!("F* {f} must be positive")));
            }
        }
        Ok(())
    }

    pub fn effective_min_df(&self, n1: usize, n2: usize) -> usize {
        self.min_df.unwrap_or_else(|| 2.max(n1.min(n2).div_ceil(2)))
    }
}

/// Sum of `values` in ascending order, so the result does not depend on the
/// order in which runs were supplied.
pub(crate) fn ordered_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().fold(0.0, |acc, v| acc + v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_min_df() {
        let cfg = HotellingConfig::default();
        assert_eq!(cfg.effective_min_df(50, 50), 25);
        assert_eq!(cfg.effective_min_df(51, 80), 26);
        assert_eq!(cfg.effective_min_df(2, 2), 2);
        assert_eq!(cfg.effective_min_df(100, 100), 50);
        let cfg = HotellingConfig {
            min_df: Some(1),
            ..cfg
        };
        assert_eq!(cfg.effective_min_df(50, 50), 1);
    }

    #[test]
    fn config_validation() {
        assert!(HotellingConfig::default().validate().is_ok());
        for bad in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            let cfg = HotellingConfig {
                p_star: bad,
                ..HotellingConfig::default()
            };
            assert!(cfg.validate().is_err());
        }
        let cfg = HotellingConfig {
            ridge: -1.0,
            ..HotellingConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sample_set_invariants() {
        assert!(matches!(
            SampleSet::new(Unit::Samples, vec![]),
            Err(Error::EmptySample)
        ));
        let mixed = vec![
            FlameGraph::empty(Unit::Samples),
            FlameGraph::empty(Unit::Milliseconds),
        ];
        assert!(matches!(
            SampleSet::new(Unit::Samples, mixed),
            Err(Error::UnitMismatch { .. })
        ));
    }

    #[test]
    fn scaling_parse() {
        assert_eq!("standard".parse::<Scaling>().unwrap(), Scaling::Standard);
        assert_eq!(
            "example-compatible".parse::<Scaling>().unwrap(),
            Scaling::ExampleCompatible
        );
        assert!("other".parse::<Scaling>().is_err());
    }
}
