//! Vector-space operations on flame graphs.
//!
//! Graphs are sparse vectors indexed by [`Stack`]. Combining operations work
//! on the union of supports and prune exact zeros afterwards, so the support
//! of every result is exactly its key set.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{DeltaGraph, FlameChart, FlameGraph, Stack, Unit};

/// The four support-disjoint parts of `f2 - f1`.
///
/// Each part is stored as a magnitude; the sign is given by the field:
/// `diff = (appeared + grown) - (disappeared + shrunk)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeltaDecomposition {
    /// Positive change on stacks only present in `f2`.
    pub appeared: FlameGraph,
    /// Positive change on stacks present in both.
    pub grown: FlameGraph,
    /// Negative change on stacks only present in `f1`.
    pub disappeared: FlameGraph,
    /// Negative change on stacks present in both.
    pub shrunk: FlameGraph,
}

/// Classification of a stack within a [`DeltaDecomposition`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeltaClass {
    Appeared,
    Grown,
    Disappeared,
    Shrunk,
}

impl DeltaClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DeltaClass::Appeared => "appeared",
            DeltaClass::Grown => "grown",
            DeltaClass::Disappeared => "disappeared",
            DeltaClass::Shrunk => "shrunk",
        }
    }

    /// Class of a non-zero change `delta` on a stack, given whether the stack
    /// belongs to the support of the old and the new graph.
    pub fn classify(delta: f64, in_old: bool, in_new: bool) -> Option<DeltaClass> {
        if delta > 0.0 {
            Some(if in_old {
                DeltaClass::Grown
            } else {
                DeltaClass::Appeared
            })
        } else if delta < 0.0 {
            Some(if in_new {
                DeltaClass::Shrunk
            } else {
                DeltaClass::Disappeared
            })
        } else {
            None
        }
    }
}

impl DeltaDecomposition {
    pub fn empty(unit: Unit) -> Self {
        Self {
            appeared: FlameGraph::empty(unit),
            grown: FlameGraph::empty(unit),
            disappeared: FlameGraph::empty(unit),
            shrunk: FlameGraph::empty(unit),
        }
    }

    pub fn unit(&self) -> Unit {
        self.appeared.unit()
    }

    pub fn part(&self, class: DeltaClass) -> &FlameGraph {
        match class {
            DeltaClass::Appeared => &self.appeared,
            DeltaClass::Grown => &self.grown,
            DeltaClass::Disappeared => &self.disappeared,
            DeltaClass::Shrunk => &self.shrunk,
        }
    }

    /// Which part, if any, holds `stack`.
    pub fn class_of(&self, stack: &Stack) -> Option<DeltaClass> {
        [
            DeltaClass::Appeared,
            DeltaClass::Grown,
            DeltaClass::Disappeared,
            DeltaClass::Shrunk,
        ]
        .into_iter()
        .find(|c| self.part(*c).contains(stack))
    }

    /// `(appeared + grown) - (disappeared + shrunk)`.
    pub fn recombine(&self) -> DeltaGraph {
        let mut map = BTreeMap::new();
        for (s, v) in self.appeared.iter().chain(self.grown.iter()) {
            map.insert(s.clone(), *v);
        }
        for (s, v) in self.disappeared.iter().chain(self.shrunk.iter()) {
            map.insert(s.clone(), -*v);
        }
        DeltaGraph::from_pruned(self.unit(), map)
    }
}

/// Pointwise sum.
pub fn add(f: &FlameGraph, g: &FlameGraph) -> Result<FlameGraph> {
    let unit = f.unit().check(g.unit())?;
    let mut map = f.entries().clone();
    for (s, v) in g {
        *map.entry(s.clone()).or_insert(0.0) += v;
    }
    Ok(FlameGraph::from_pruned(unit, map))
}

/// Cone-preserving scaling by `c >= 0`.
pub fn scale(f: &FlameGraph, c: f64) -> Result<FlameGraph> {
    if !c.is_finite() {
        return Err(Error::NonFiniteScale(c));
    }
    if c < 0.0 {
        return Err(Error::NegativeScale(c));
    }
    let map = f.iter().map(|(s, v)| (s.clone(), v * c)).collect();
    Ok(FlameGraph::from_pruned(f.unit(), map))
}

/// Scaling of a signed delta by any finite `c`.
pub fn scale_signed(d: &DeltaGraph, c: f64) -> Result<DeltaGraph> {
    if !c.is_finite() {
        return Err(Error::NonFiniteScale(c));
    }
    let map = d.iter().map(|(s, v)| (s.clone(), v * c)).collect();
    Ok(DeltaGraph::from_pruned(d.unit(), map))
}

/// `f2 - f1` over the union of supports.
pub fn diff(f2: &FlameGraph, f1: &FlameGraph) -> Result<DeltaGraph> {
    let unit = f2.unit().check(f1.unit())?;
    let mut map = f2.entries().clone();
    for (s, v) in f1 {
        *map.entry(s.clone()).or_insert(0.0) -= v;
    }
    Ok(DeltaGraph::from_pruned(unit, map))
}

/// Splits `d` into positive and negative parts with disjoint supports,
/// `d = plus - minus`.
pub fn split_signed(d: &DeltaGraph) -> (FlameGraph, FlameGraph) {
    let (mut plus, mut minus) = (BTreeMap::new(), BTreeMap::new());
    for (s, &v) in d {
        if v > 0.0 {
            plus.insert(s.clone(), v);
        } else {
            minus.insert(s.clone(), -v);
        }
    }
    (
        FlameGraph::from_pruned(d.unit(), plus),
        FlameGraph::from_pruned(d.unit(), minus),
    )
}

/// Four-way decomposition of `f2 - f1` by sign and support membership.
pub fn decompose(f2: &FlameGraph, f1: &FlameGraph) -> Result<DeltaDecomposition> {
    let delta = diff(f2, f1)?;
    Ok(classify_delta(
        &delta,
        |s| f1.contains(s),
        |s| f2.contains(s),
    ))
}

/// Decomposes an arbitrary delta (e.g. a reduced one) using the supports of
/// the two graphs it was derived from.
pub fn decompose_delta(
    delta: &DeltaGraph,
    f2: &FlameGraph,
    f1: &FlameGraph,
) -> Result<DeltaDecomposition> {
    delta.unit().check(f2.unit().check(f1.unit())?)?;
    Ok(classify_delta(
        delta,
        |s| f1.contains(s),
        |s| f2.contains(s),
    ))
}

fn classify_delta(
    delta: &DeltaGraph,
    in_old: impl Fn(&Stack) -> bool,
    in_new: impl Fn(&Stack) -> bool,
) -> DeltaDecomposition {
    let mut parts: [BTreeMap<Stack, f64>; 4] = Default::default();
    for (s, &v) in delta {
        if let Some(class) = DeltaClass::classify(v, in_old(s), in_new(s)) {
            parts[class as usize].insert(s.clone(), v.abs());
        }
    }
    let unit = delta.unit();
    let [appeared, grown, disappeared, shrunk] = parts.map(|m| FlameGraph::from_pruned(unit, m));
    DeltaDecomposition {
        appeared,
        grown,
        disappeared,
        shrunk,
    }
}

/// L1 norm: the sum of absolute weights.
pub fn norm<'a, G>(graph: G) -> f64
where
    G: IntoIterator<Item = (&'a Stack, &'a f64)>,
{
    // fold from +0.0: an empty f64 `sum()` is -0.0
    graph.into_iter().fold(0.0, |acc, (_, v)| acc + v.abs())
}

/// `‖f - g‖`.
pub fn distance(f: &FlameGraph, g: &FlameGraph) -> Result<f64> {
    Ok(norm(&diff(f, g)?))
}

/// `1 - ‖f - g‖ / (‖f‖ + ‖g‖)`, with `σ({}, {}) = 1`.
///
/// Evaluated as `Σ 2·min(f(s), g(s)) / (‖f‖ + ‖g‖)`, which is the same
/// quantity term by term (`f + g - |f - g| = 2·min(f, g)`) and is exactly 0
/// on disjoint supports and exactly 1 on identical graphs.
pub fn similarity(f: &FlameGraph, g: &FlameGraph) -> Result<f64> {
    f.unit().check(g.unit())?;
    let total = norm(f) + norm(g);
    if total == 0.0 {
        return Ok(1.0);
    }
    let overlap: f64 = f
        .iter()
        .filter_map(|(s, &a)| g.entries().get(s).map(|&b| 2.0 * a.min(b)))
        .fold(0.0, |acc, x| acc + x);
    Ok((overlap / total).clamp(0.0, 1.0))
}

fn check_norm(by: f64) -> Result<f64> {
    if by.is_finite() && by > 0.0 {
        Ok(by)
    } else {
        Err(Error::ZeroNorm(by))
    }
}

/// Divides every entry by `by` (typically `‖f1‖` or `‖f2‖`); the result is
/// unitless.
pub fn normalize(d: &DeltaGraph, by: f64) -> Result<DeltaGraph> {
    let by = check_norm(by)?;
    let map = d.iter().map(|(s, v)| (s.clone(), v / by)).collect();
    Ok(DeltaGraph::from_pruned(Unit::Unitless, map))
}

/// [`normalize`] applied to each part of a decomposition.
pub fn normalize_decomposition(d: &DeltaDecomposition, by: f64) -> Result<DeltaDecomposition> {
    let by = check_norm(by)?;
    let part = |g: &FlameGraph| {
        let map = g.iter().map(|(s, v)| (s.clone(), v / by)).collect();
        FlameGraph::from_pruned(Unit::Unitless, map)
    };
    Ok(DeltaDecomposition {
        appeared: part(&d.appeared),
        grown: part(&d.grown),
        disappeared: part(&d.disappeared),
        shrunk: part(&d.shrunk),
    })
}

/// Restriction of `d` to the stacks accepted by `keep`.
pub fn restrict(d: &DeltaGraph, keep: impl Fn(&Stack) -> bool) -> DeltaGraph {
    let map = d
        .iter()
        .filter(|(s, _)| keep(s))
        .map(|(s, v)| (s.clone(), *v))
        .collect();
    DeltaGraph::from_pruned(d.unit(), map)
}

/// Sums every event graph of a chart into one flame graph ("left-heavy"
/// aggregation). An empty chart folds to an empty graph in `unit`.
pub fn fold_chart(chart: &FlameChart, unit: Unit) -> Result<FlameGraph> {
    chart
        .events()
        .iter()
        .try_fold(FlameGraph::empty(unit), |acc, (_, g)| add(&acc, g))
}
