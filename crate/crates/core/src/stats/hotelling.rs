use std::collections::BTreeSet;

use super::sample::{frequency_reduce, mean_graph, pooled_stats, PooledStats, StackBasis};
use super::special::{f_quantile, f_sf};
use super::{HotellingConfig, SampleSet, Scaling};
use crate::algebra::{decompose_delta, diff, restrict, DeltaClass, DeltaDecomposition};
use crate::error::{Error, Result};
use crate::model::{DeltaGraph, FlameGraph, Stack};

/// The constant `G²` relating `Δᵀ Σp⁻¹ Δ` to an `F(p, n1+n2-p-1)` variate.
pub fn g_squared(n1: usize, n2: usize, p: usize, scaling: Scaling) -> Result<f64> {
    let d2 = denominator_dof(n1, n2, p)?;
    let n = (n1 + n2) as f64;
    let base = d2 as f64 / ((n - 2.0) * p as f64);
    Ok(match scaling {
        Scaling::Standard => base * (n1 as f64 * n2 as f64) / n,
        Scaling::ExampleCompatible => base,
    })
}

/// `n1 + n2 - p - 1`, required to be at least 2 (i.e. `p <= n1 + n2 - 3`,
/// the same bound frequency reduction enforces).
fn denominator_dof(n1: usize, n2: usize, p: usize) -> Result<usize> {
    match (n1 + n2).checked_sub(p + 1) {
        Some(d2) if d2 >= 2 && p >= 1 => Ok(d2),
        _ => Err(Error::DegenerateDof { n1, n2, p }),
    }
}

/// Result of the omnibus two-sample test.
#[derive(Debug, Clone, PartialEq)]
pub struct HotellingOutcome {
    pub statistic_f: f64,
    pub p_value: f64,
    pub critical_f_star: f64,
    pub g_squared: f64,
    /// `(p, n1 + n2 - p - 1)`.
    pub dof: (usize, usize),
    pub ridge_applied: bool,
}

fn critical_value(cfg: &HotellingConfig, dof: (usize, usize)) -> Result<f64> {
    match cfg.f_star {
        Some(f) => Ok(f),
        None => f_quantile(1.0 - cfg.p_star, dof.0 as f64, dof.1 as f64),
    }
}

/// `f = G² Δᵀ Σp⁻¹ Δ`, its upper-tail p-value and the critical `F*`.
///
/// `Σp` is factorized directly; if that fails it is retried once with
/// `Σp + ridge·mean(diag Σp)·I`.
pub fn hotelling_test(stats: &PooledStats, cfg: &HotellingConfig) -> Result<HotellingOutcome> {
    cfg.validate()?;
    let p = stats.p();
    let dof = (p, denominator_dof(stats.n1, stats.n2, p)?);
    let g2 = g_squared(stats.n1, stats.n2, p, cfg.scaling)?;
    let critical_f_star = critical_value(cfg, dof)?;

    let (quad, ridge_applied) = if stats.delta.iter().all(|d| *d == 0.0) {
        (0.0, false)
    } else if let Some(chol) = stats.pooled_cov.cholesky() {
        (chol.quadratic_form(&stats.delta), false)
    } else {
        let diag = stats.pooled_cov.diagonal();
        let lambda = cfg.ridge * diag.iter().sum::<f64>() / p as f64;
        if lambda.is_nan() || lambda <= 0.0 {
            return Err(Error::SingularCovariance);
        }
        let chol = stats
            .pooled_cov
            .shifted(lambda)
            .cholesky()
            .ok_or(Error::SingularCovariance)?;
        (chol.quadratic_form(&stats.delta), true)
    };
    let statistic_f = g2 * quad;
    let p_value = f_sf(statistic_f, dof.0 as f64, dof.1 as f64)?;
    Ok(HotellingOutcome {
        statistic_f,
        p_value,
        critical_f_star,
        g_squared: g2,
        dof,
        ridge_applied,
    })
}

/// Closed interval `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

/// Squared half-widths `F*·diag(Σp)_k / G²`.
fn thresholds(stats: &PooledStats, cfg: &HotellingConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let p = stats.p();
    let dof = (p, denominator_dof(stats.n1, stats.n2, p)?);
    let g2 = g_squared(stats.n1, stats.n2, p, cfg.scaling)?;
    let f_star = critical_value(cfg, dof)?;
    Ok(stats.variances().iter().map(|v| f_star * v / g2).collect())
}

/// Simultaneous `F*` confidence intervals `Δ_k ± sqrt(F*·diag(Σp)_k / G²)`.
pub fn confidence_intervals(stats: &PooledStats, cfg: &HotellingConfig) -> Result<Vec<Interval>> {
    Ok(thresholds(stats, cfg)?
        .into_iter()
        .zip(&stats.delta)
        .map(|(t, d)| {
            let h = t.sqrt();
            Interval {
                low: d - h,
                high: d + h,
            }
        })
        .collect())
}

/// Stacks with `Δ_k² > F*·diag(Σp)_k / G²`.
pub fn significant_stacks(stats: &PooledStats, cfg: &HotellingConfig) -> Result<BTreeSet<Stack>> {
    let t = thresholds(stats, cfg)?;
    Ok(stats
        .basis
        .stacks()
        .iter()
        .zip(t.iter().zip(&stats.delta))
        .filter(|(_, (t, d))| **d * **d > **t)
        .map(|(s, _)| s.clone())
        .collect())
}

/// Restriction of `delta` to the significant stacks.
pub fn reduce_delta(delta: &DeltaGraph, significant: &BTreeSet<Stack>) -> DeltaGraph {
    restrict(delta, |s| significant.contains(s))
}

/// Everything produced by a regression test between two samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionReport {
    pub scaling: Scaling,
    pub n1: usize,
    pub n2: usize,
    pub min_df: usize,
    pub stats: PooledStats,
    pub outcome: HotellingOutcome,
    /// One interval per basis stack, in basis order.
    pub intervals: Vec<Interval>,
    pub significant: BTreeSet<Stack>,
    pub mean1: FlameGraph,
    pub mean2: FlameGraph,
    /// `mean2 - mean1` restricted to the significant stacks.
    pub reduced_delta: DeltaGraph,
    pub decomposition_r: DeltaDecomposition,
}

/// One basis stack of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct StackRow<'a> {
    pub stack: &'a Stack,
    pub delta: f64,
    pub var_pooled: f64,
    pub interval: Interval,
    pub significant: bool,
    pub class: Option<DeltaClass>,
}

impl RegressionReport {
    pub fn basis(&self) -> &StackBasis {
        &self.stats.basis
    }

    pub fn p(&self) -> usize {
        self.stats.p()
    }

    pub fn is_regression(&self) -> bool {
        !self.significant.is_empty()
    }

    /// Rows in basis order.
    pub fn rows(&self) -> Vec<StackRow<'_>> {
        let var = self.stats.variances();
        self.basis()
            .stacks()
            .iter()
            .enumerate()
            .map(|(k, stack)| StackRow {
                stack,
                delta: self.stats.delta[k],
                var_pooled: var[k],
                interval: self.intervals[k],
                significant: self.significant.contains(stack),
                class: self.decomposition_r.class_of(stack),
            })
            .collect()
    }

    /// Significant rows, largest `|Δ|` first.
    pub fn significant_rows(&self) -> Vec<StackRow<'_>> {
        let mut rows: Vec<_> = self.rows().into_iter().filter(|r| r.significant).collect();
        rows.sort_by(|a, b| {
            b.delta
                .abs()
                .total_cmp(&a.delta.abs())
                .then_with(|| a.stack.cmp(b.stack))
        });
        rows
    }
}

/// Full pipeline: frequency reduction, pooled statistics, Hotelling test,
/// intervals, significant stacks and the decomposition of the reduced delta.
pub fn regression_test(
    baseline: &SampleSet,
    candidate: &SampleSet,
    cfg: &HotellingConfig,
) -> Result<RegressionReport> {
    cfg.validate()?;
    let (n1, n2) = (baseline.len(), candidate.len());
    if n1 < 2 || n2 < 2 {
        return Err(Error::InsufficientSamples { n1, n2 });
    }
    baseline.unit().check(candidate.unit())?;

    let basis = frequency_reduce(baseline, candidate, cfg)?;
    let stats = pooled_stats(baseline, candidate, &basis)?;
    let outcome = hotelling_test(&stats, cfg)?;
    let intervals = confidence_intervals(&stats, cfg)?;
    let significant = significant_stacks(&stats, cfg)?;

    let mean1 = mean_graph(baseline);
    let mean2 = mean_graph(candidate);
    let reduced_delta = reduce_delta(&diff(&mean2, &mean1)?, &significant);
    let decomposition_r = decompose_delta(&reduced_delta, &mean2, &mean1)?;

    Ok(RegressionReport {
        scaling: cfg.scaling,
        n1,
        n2,
        min_df: cfg.effective_min_df(n1, n2),
        stats,
        outcome,
        intervals,
        significant,
        mean1,
        mean2,
        reduced_delta,
        decomposition_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Unit;
    use crate::stats::linalg::SymMatrix;

    fn st(s: &str) -> Stack {
        s.parse().unwrap()
    }

    fn worked_example() -> PooledStats {
        PooledStats::from_parts(
            StackBasis::new([st("A"), st("B"), st("C")]),
            vec![1e5, 2e5, 3e5],
            vec![1.001e5, 4e5, 2.998e5],
            SymMatrix::from_diagonal(&[5000.0, 7500.0, 10000.0]),
            100,
            100,
            Unit::Samples,
        )
        .unwrap()
    }

    fn cfg(scaling: Scaling) -> HotellingConfig {
        HotellingConfig {
            scaling,
            f_star: Some(3.8),
            ..HotellingConfig::default()
        }
    }

    #[test]
    fn g_squared_values() {
        let std = g_squared(100, 100, 3, Scaling::Standard).unwrap();
        assert!((std - 196.0 / (198.0 * 3.0) * 10000.0 / 200.0).abs() < 1e-12);
        assert!((std - 16.4983).abs() < 1e-4);
        let ex = g_squared(100, 100, 3, Scaling::ExampleCompatible).unwrap();
        assert!((ex - 196.0 / 594.0).abs() < 1e-15);
        assert!((ex - 0.32997).abs() < 1e-5);
        assert!(matches!(
            g_squared(100, 100, 198, Scaling::Standard),
            Err(Error::DegenerateDof { .. })
        ));
        assert!(g_squared(100, 100, 0, Scaling::Standard).is_err());
        assert!(g_squared(100, 100, 197, Scaling::Standard).is_ok());
        assert!(g_squared(2, 2, 2, Scaling::Standard).is_err());
    }

    #[test]
    fn worked_example_intervals() {
        let ci = confidence_intervals(&worked_example(), &cfg(Scaling::ExampleCompatible)).unwrap();
        let g2 = 196.0 / 594.0;
        for (k, var) in [5000.0f64, 7500.0, 10000.0].iter().enumerate() {
            let h = (3.8 * var / g2).sqrt();
            let d = worked_example().delta[k];
            assert!((ci[k].low - (d - h)).abs() < 1e-9);
            assert!((ci[k].high - (d + h)).abs() < 1e-9);
        }
        // half-widths 239.9617, 293.8919, 339.3571
        assert!((ci[0].low - -139.9617).abs() < 1e-4 && (ci[0].high - 339.9617).abs() < 1e-4);
        assert!(
            (ci[1].low - 199_706.108_1).abs() < 1e-4 && (ci[1].high - 200_293.891_9).abs() < 1e-4
        );
        assert!((ci[2].low - -539.3571).abs() < 1e-4 && (ci[2].high - 139.3571).abs() < 1e-4);

        let sig = significant_stacks(&worked_example(), &cfg(Scaling::ExampleCompatible)).unwrap();
        assert_eq!(sig, BTreeSet::from([st("B")]));
    }

    #[test]
    fn worked_example_under_standard_scaling() {
        let sig = significant_stacks(&worked_example(), &cfg(Scaling::Standard)).unwrap();
        // thresholds sqrt(3.8·diag/16.498) ≈ 33.9, 41.6, 48.0 against |Δ| = 100, 2e5, 200
        assert_eq!(sig, BTreeSet::from([st("A"), st("B"), st("C")]));
    }

    #[test]
    fn worked_example_statistic() {
        let out = hotelling_test(&worked_example(), &cfg(Scaling::Standard)).unwrap();
        let g2 = g_squared(100, 100, 3, Scaling::Standard).unwrap();
        let expect =
            g2 * (100.0f64.powi(2) / 5000.0 + 2e5f64.powi(2) / 7500.0 + 200.0f64.powi(2) / 10000.0);
        assert!((out.statistic_f - expect).abs() <= 1e-12 * expect);
        let b_term = g2 * 2e5f64.powi(2) / 7500.0;
        assert!(b_term / out.statistic_f > 0.999_99);
        assert_eq!(out.dof, (3, 196));
        assert_eq!(out.critical_f_star, 3.8);
        assert!(out.p_value < 1e-100);
        assert!(!out.ridge_applied);
    }

    #[test]
    fn zero_delta_is_not_significant() {
        let ps = PooledStats::from_parts(
            StackBasis::new([st("A"), st("B")]),
            vec![1.0, 2.0],
            vec![1.0, 2.0],
            SymMatrix::from_diagonal(&[0.0, 3.0]),
            10,
            10,
            Unit::Samples,
        )
        .unwrap();
        let c = HotellingConfig::default();
        let out = hotelling_test(&ps, &c).unwrap();
        assert_eq!(out.statistic_f, 0.0);
        assert_eq!(out.p_value, 1.0);
        assert!(significant_stacks(&ps, &c).unwrap().is_empty());
        let ci = confidence_intervals(&ps, &c).unwrap();
        assert_eq!(
            ci[0],
            Interval {
                low: 0.0,
                high: 0.0
            }
        );
    }

    #[test]
    fn univariate_matches_t_squared() {
        let (n1, n2, d, v) = (12usize, 9usize, 1.7, 2.3);
        let ps = PooledStats::from_parts(
            StackBasis::new([st("A")]),
            vec![0.0],
            vec![d],
            SymMatrix::from_diagonal(&[v]),
            n1,
            n2,
            Unit::Samples,
        )
        .unwrap();
        let out = hotelling_test(&ps, &HotellingConfig::default()).unwrap();
        let t = d / (v * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
        assert!((out.statistic_f - t * t).abs() < 1e-12 * t * t);
    }

    #[test]
    fn singular_covariance_uses_ridge() {
        let cov = SymMatrix::from_rows(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let ps = PooledStats::from_parts(
            StackBasis::new([st("A"), st("B")]),
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            cov.clone(),
            10,
            10,
            Unit::Samples,
        )
        .unwrap();
        let out = hotelling_test(&ps, &HotellingConfig::default()).unwrap();
        assert!(out.ridge_applied);
        assert!(out.statistic_f.is_finite());

        let no_ridge = HotellingConfig {
            ridge: 0.0,
            ..HotellingConfig::default()
        };
        assert!(matches!(
            hotelling_test(&ps, &no_ridge),
            Err(Error::SingularCovariance)
        ));

        let zero = PooledStats::from_parts(
            StackBasis::new([st("A")]),
            vec![0.0],
            vec![1.0],
            SymMatrix::zeros(1),
            10,
            10,
            Unit::Samples,
        )
        .unwrap();
        assert!(matches!(
            hotelling_test(&zero, &HotellingConfig::default()),
            Err(Error::SingularCovariance)
        ));
    }

    #[test]
    fn reduce_delta_cases() {
        let d = DeltaGraph::from_entries(Unit::Samples, [(st("a"), 5.0), (st("b"), -1.0)]).unwrap();
        let r = reduce_delta(&d, &BTreeSet::from([st("a")]));
        assert_eq!(r.len(), 1);
        assert_eq!(r.get(&st("a")), 5.0);
        let all: BTreeSet<Stack> = d.stacks().cloned().collect();
        assert_eq!(reduce_delta(&d, &all), d);
        assert!(reduce_delta(&d, &BTreeSet::new()).is_empty());
    }

    #[test]
    fn degenerate_dof_reported() {
        let ps = PooledStats::from_parts(
            StackBasis::new([st("A"), st("B"), st("C")]),
            vec![0.0; 3],
            vec![1.0; 3],
            SymMatrix::from_diagonal(&[1.0; 3]),
            2,
            2,
            Unit::Samples,
        )
        .unwrap();
        assert!(matches!(
            hotelling_test(&ps, &HotellingConfig::default()),
            Err(Error::DegenerateDof { .. })
        ));
    }
}
