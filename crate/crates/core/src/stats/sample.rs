use std::collections::{BTreeMap, BTreeSet};

use super::linalg::SymMatrix;
use super::{ordered_sum, HotellingConfig, SampleSet};
use crate::error::{Error, Result};
use crate::model::{DeltaGraph, FlameGraph, Stack, Unit};

/// Per-stack arithmetic mean over all runs; a stack absent from a run
/// counts as zero there.
pub fn mean_graph(s: &SampleSet) -> FlameGraph {
    let n = s.len() as f64;
    let mut columns: BTreeMap<&Stack, Vec<f64>> = BTreeMap::new();
    for g in s.graphs() {
        for (stack, v) in g {
            columns.entry(stack).or_default().push(*v);
        }
    }
    let map = columns
        .into_iter()
        .map(|(stack, mut values)| (stack.clone(), ordered_sum(&mut values) / n))
        .collect();
    FlameGraph::from_pruned(s.unit(), map)
}

/// Ordered set of stacks spanning the coordinates used by the test.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StackBasis {
    stacks: Vec<Stack>,
}

impl StackBasis {
    /// Sorts and deduplicates.
    pub fn new(stacks: impl IntoIterator<Item = Stack>) -> Self {
        let set: BTreeSet<Stack> = stacks.into_iter().collect();
        Self {
            stacks: set.into_iter().collect(),
        }
    }

    pub fn stacks(&self) -> &[Stack] {
        &self.stacks
    }

    pub fn len(&self) -> usize {
        self.stacks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stacks.is_empty()
    }

    pub fn index_of(&self, stack: &Stack) -> Option<usize> {
        self.stacks.binary_search(stack).ok()
    }

    /// Coordinates of `g` along the basis.
    pub fn coordinates(&self, g: &FlameGraph) -> Vec<f64> {
        self.stacks.iter().map(|s| g.get(s)).collect()
    }
}

/// Keeps the stacks that appear in at least `min_df` runs across both
/// samples. If more than `n1 + n2 - 3` survive, only the most frequent are
/// kept (ties broken by larger total weight, then stack order) so that the
/// test keeps at least two denominator degrees of freedom.
pub fn frequency_reduce(
    s1: &SampleSet,
    s2: &SampleSet,
    cfg: &HotellingConfig,
) -> Result<StackBasis> {
    let (n1, n2) = (s1.len(), s2.len());
    let min_df = cfg.effective_min_df(n1, n2);

    let mut stats: BTreeMap<&Stack, (usize, Vec<f64>)> = BTreeMap::new();
    for g in s1.graphs().iter().chain(s2.graphs()) {
        for (stack, v) in g {
            let e = stats.entry(stack).or_default();
            e.0 += 1;
            e.1.push(*v);
        }
    }
    let mut survivors: Vec<(&Stack, usize, f64)> = stats
        .into_iter()
        .filter(|(_, (df, _))| *df >= min_df)
        .map(|(s, (df, mut w))| (s, df, ordered_sum(&mut w)))
        .collect();
    if survivors.is_empty() {
        return Err(Error::EmptyBasis { min_df });
    }

    let max_p = (n1 + n2).saturating_sub(3);
    if max_p == 0 {
        return Err(Error::DegenerateDof {
            n1,
            n2,
            p: survivors.len(),
        });
    }
    if survivors.len() > max_p {
        survivors.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then_with(|| b.2.total_cmp(&a.2))
                .then_with(|| a.0.cmp(b.0))
        });
        survivors.truncate(max_p);
    }
    Ok(StackBasis::new(
        survivors.into_iter().map(|(s, _, _)| s.clone()),
    ))
}

/// Sample means, their difference and the pooled covariance over a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledStats {
    pub basis: StackBasis,
    pub mean1: Vec<f64>,
    pub mean2: Vec<f64>,
    /// `mean2 - mean1`.
    pub delta: Vec<f64>,
    pub pooled_cov: SymMatrix,
    pub n1: usize,
    pub n2: usize,
    pub unit: Unit,
}

impl PooledStats {
    /// Assembles statistics computed elsewhere, checking dimensions and that
    /// the covariance diagonal is non-negative.
    pub fn from_parts(
        basis: StackBasis,
        mean1: Vec<f64>,
        mean2: Vec<f64>,
        pooled_cov: SymMatrix,
        n1: usize,
        n2: usize,
        unit: Unit,
    ) -> Result<Self> {
        let p = basis.len();
        if mean1.len() != p || mean2.len() != p || pooled_cov.dim() != p {
            return Err(Error::Domain(format!(
                "dimension mismatch: basis {p}, means {}/{}, covariance {}",
                mean1.len(),
                mean2.len(),
                pooled_cov.dim()
            )));
        }
        if pooled_cov
            .diagonal()
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::Domain(
                "covariance diagonal must be finite and >= 0".into(),
            ));
        }
        let delta = mean2.iter().zip(&mean1).map(|(b, a)| b - a).collect();
        Ok(Self {
            basis,
            mean1,
            mean2,
            delta,
            pooled_cov,
            n1,
            n2,
            unit,
        })
    }

    pub fn p(&self) -> usize {
        self.basis.len()
    }

    /// Pooled variance of each basis stack.
    pub fn variances(&self) -> Vec<f64> {
        self.pooled_cov.diagonal()
    }

    /// `delta` as a sparse graph over the basis.
    pub fn delta_graph(&self) -> DeltaGraph {
        let map = self
            .basis
            .stacks()
            .iter()
            .cloned()
            .zip(self.delta.iter().copied())
            .collect();
        DeltaGraph::from_pruned(self.unit, map)
    }
}

/// Means over the basis and the pooled covariance
/// `((n1-1) S1 + (n2-1) S2) / (n1 + n2 - 2)`.
pub fn pooled_stats(s1: &SampleSet, s2: &SampleSet, basis: &StackBasis) -> Result<PooledStats> {
    let (n1, n2) = (s1.len(), s2.len());
    if n1 < 2 || n2 < 2 {
        return Err(Error::InsufficientSamples { n1, n2 });
    }
    let unit = s1.unit().check(s2.unit())?;
    let p = basis.len();

    let x1: Vec<Vec<f64>> = s1.graphs().iter().map(|g| basis.coordinates(g)).collect();
    let x2: Vec<Vec<f64>> = s2.graphs().iter().map(|g| basis.coordinates(g)).collect();
    let mean1 = column_means(&x1, p);
    let mean2 = column_means(&x2, p);

    let mut cov = SymMatrix::zeros(p);
    let mut terms = Vec::with_capacity(n1.max(n2));
    for j in 0..p {
        for k in 0..=j {
            let mut scatter = |x: &[Vec<f64>], m: &[f64]| {
                terms.clear();
                terms.extend(x.iter().map(|row| (row[j] - m[j]) * (row[k] - m[k])));
                ordered_sum(&mut terms)
            };
            let total = scatter(&x1, &mean1) + scatter(&x2, &mean2);
            cov.set(j, k, total / (n1 + n2 - 2) as f64);
        }
    }
    PooledStats::from_parts(basis.clone(), mean1, mean2, cov, n1, n2, unit)
}

fn column_means(rows: &[Vec<f64>], p: usize) -> Vec<f64> {
    let n = rows.len() as f64;
    let mut column = Vec::with_capacity(rows.len());
    (0..p)
        .map(|k| {
            column.clear();
            column.extend(rows.iter().map(|r| r[k]));
            ordered_sum(&mut column) / n
        })
        .collect()
}
