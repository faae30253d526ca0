//! Value types: frames, stacks, flame graphs, signed deltas and flame charts.
//!
//! A [`FlameGraph`] is a finitely supported map from [`Stack`] to a strictly
//! positive weight, i.e. an element of the positive cone of the free vector
//! space over stacks. A [`DeltaGraph`] is an arbitrary element of that space
//! (signed, non-zero weights). Zero-weight entries are never stored, so the
//! support of a graph is exactly its key set.

use std::collections::btree_map;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on the number of frames in a stack.
pub const DEFAULT_MAX_DEPTH: usize = 2048;

/// Separator between frames in the folded representation of a stack.
pub const FRAME_SEPARATOR: char = ';';

/// A single call-stack entry, identified by an opaque label.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frame(Arc<str>);

impl Frame {
    pub fn new(label: impl AsRef<str>) -> Result<Self> {
        let label = label.as_ref();
        let reason = if label.is_empty() {
            Some("empty label")
        } else if label.contains(FRAME_SEPARATOR) {
            Some("contains ';'")
        } else if label.contains(['\n', '\r']) {
            Some("contains a line break")
        } else if label.trim() != label {
            Some("leading or trailing whitespace")
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::InvalidFrame {
                label: label.to_owned(),
                reason,
            }),
            None => Ok(Frame(label.into())),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An ordered tuple of frames, root (outermost caller) first.
///
/// Ordering is lexicographic over the frame sequence; this is the canonical
/// order used for emission and for statistical bases.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Stack(Arc<[Frame]>);

impl Stack {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        Self::with_max_depth(frames, DEFAULT_MAX_DEPTH)
    }

    pub fn with_max_depth(frames: Vec<Frame>, max_depth: usize) -> Result<Self> {
        if frames.is_empty() || frames.len() > max_depth {
            return Err(Error::InvalidStackDepth {
                depth: frames.len(),
                max_depth,
            });
        }
        Ok(Stack(frames.into()))
    }

    pub fn frames(&self) -> &[Frame] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }
}

impl FromStr for Stack {
    type Err = Error;

    /// Parses `a;b;c` into a stack. Labels are taken verbatim.
    fn from_str(s: &str) -> Result<Self> {
        let frames = s
            .split(FRAME_SEPARATOR)
            .map(Frame::new)
            .collect::<Result<Vec<_>>>()?;
        Stack::new(frames)
    }
}

impl TryFrom<String> for Stack {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Stack> for String {
    fn from(s: Stack) -> String {
        s.to_string()
    }
}

impl fmt::Display for Stack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, frame) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            f.write_str(frame.as_str())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Stack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Stack({self})")
    }
}

/// Unit attached to every weight of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Samples,
    Microseconds,
    Milliseconds,
    Unitless,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Samples => "samples",
            Unit::Microseconds => "microseconds",
            Unit::Milliseconds => "milliseconds",
            Unit::Unitless => "unitless",
        }
    }

    pub(crate) fn check(self, other: Unit) -> Result<Unit> {
        if self == other {
            Ok(self)
        } else {
            Err(Error::UnitMismatch {
                left: self,
                right: other,
            })
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "samples" => Ok(Unit::Samples),
            "us" | "microseconds" => Ok(Unit::Microseconds),
            "ms" | "milliseconds" => Ok(Unit::Milliseconds),
            "unitless" => Ok(Unit::Unitless),
            other => Err(Error::Config(format!("unknown unit {other:?}"))),
        }
    }
}

/// A single invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroWeight { stack: Stack },
    NegativeWeight { stack: Stack, value: f64 },
    NonFiniteWeight { stack: Stack, value: f64 },
    TooDeep { stack: Stack, max_depth: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroWeight { stack } => write!(f, "zero-weight entry at {stack}"),
            Violation::NegativeWeight { stack, value } => {
                write!(f, "negative weight {value} at {stack}")
            }
            Violation::NonFiniteWeight { stack, value } => {
                write!(f, "non-finite weight {value} at {stack}")
            }
            Violation::TooDeep { stack, max_depth } => write!(
                f,
                "stack depth {} exceeds {max_depth} at {stack}",
                stack.depth()
            ),
        }
    }
}

/// Checks raw `(stack, weight)` entries against the flame graph invariants and
/// reports every violation found, in input order.
pub fn validate<'a, I>(entries: I, max_depth: usize) -> std::result::Result<(), Vec<Violation>>
where
    I: IntoIterator<Item = (&'a Stack, f64)>,
{
    let mut violations = Vec::new();
    for (stack, value) in entries {
        if stack.depth() > max_depth {
            violations.push(Violation::TooDeep {
                stack: stack.clone(),
                max_depth,
            });
        }
        if !value.is_finite() {
            violations.push(Violation::NonFiniteWeight {
                stack: stack.clone(),
                value,
            });
        } else if value == 0.0 {
            violations.push(Violation::ZeroWeight {
                stack: stack.clone(),
            });
        } else if value < 0.0 {
            violations.push(Violation::NegativeWeight {
                stack: stack.clone(),
                value,
            });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Element of the positive cone: every stored weight is finite and `> 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlameGraph {
    entries: BTreeMap<Stack, f64>,
    unit: Unit,
}

/// Signed element of the stack vector space: every stored weight is finite
/// and non-zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeltaGraph {
    entries: BTreeMap<Stack, f64>,
    unit: Unit,
}

macro_rules! graph_accessors {
    ($ty:ty) => {
        impl $ty {
            pub fn empty(unit: Unit) -> Self {
                Self {
                    entries: BTreeMap::new(),
                    unit,
                }
            }

            pub fn unit(&self) -> Unit {
                self.unit
            }

            /// Weight of `stack`, zero when outside the support.
            pub fn get(&self, stack: &Stack) -> f64 {
                self.entries.get(stack).copied().unwrap_or(0.0)
            }

            pub fn contains(&self, stack: &Stack) -> bool {
                self.entries.contains_key(stack)
            }

            pub fn len(&self) -> usize {
                self.entries.len()
            }

            pub fn is_empty(&self) -> bool {
                self.entries.is_empty()
            }

            /// Entries in canonical stack order.
            pub fn iter(&self) -> btree_map::Iter<'_, Stack, f64> {
                self.entries.iter()
            }

            pub fn stacks(&self) -> btree_map::Keys<'_, Stack, f64> {
                self.entries.keys()
            }

            /// The support: exactly the set of stored stacks.
            pub fn support(&self) -> BTreeSet<&Stack> {
                self.entries.keys().collect()
            }

            #[allow(dead_code)]
            pub(crate) fn entries(&self) -> &BTreeMap<Stack, f64> {
                &self.entries
            }

            /// Same entries, relabelled with another unit.
            pub fn with_unit(mut self, unit: Unit) -> Self {
                self.unit = unit;
                self
            }
        }

        impl<'a> IntoIterator for &'a $ty {
            type Item = (&'a Stack, &'a f64);
            type IntoIter = btree_map::Iter<'a, Stack, f64>;

            fn into_iter(self) -> Self::IntoIter {
                self.entries.iter()
            }
        }
    };
}

graph_accessors!(FlameGraph);
graph_accessors!(DeltaGraph);

impl FlameGraph {
    /// Builds a flame graph from entries. Duplicate stacks are summed; any
    /// zero, negative or non-finite weight is rejected with the full list of
    /// violations.
    pub fn from_entries<I>(unit: Unit, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Stack, f64)>,
    {
        let raw: Vec<(Stack, f64)> = entries.into_iter().collect();
        validate(raw.iter().map(|(s, v)| (s, *v)), usize::MAX).map_err(Error::Invalid)?;
        let mut map = BTreeMap::new();
        for (stack, value) in raw {
            *map.entry(stack).or_insert(0.0) += value;
        }
        Ok(Self::from_pruned(unit, map))
    }

    /// Assumes every value is finite and non-negative; drops exact zeros.
    pub(crate) fn from_pruned(unit: Unit, mut entries: BTreeMap<Stack, f64>) -> Self {
        entries.retain(|_, v| *v != 0.0);
        debug_assert!(entries.values().all(|v| v.is_finite() && *v > 0.0));
        Self { entries, unit }
    }

    /// Re-checks the invariants, including a possibly tighter depth bound.
    pub fn validate(&self, max_depth: usize) -> std::result::Result<(), Vec<Violation>> {
        validate(self.iter().map(|(s, v)| (s, *v)), max_depth)
    }

    /// The same graph viewed as an all-positive delta.
    pub fn to_delta(&self) -> DeltaGraph {
        DeltaGraph {
            entries: self.entries.clone(),
            unit: self.unit,
        }
    }
}

impl DeltaGraph {
    /// Builds a delta from signed entries. Duplicate stacks are summed and
    /// exact zeros dropped; non-finite weights are rejected.
    pub fn from_entries<I>(unit: Unit, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Stack, f64)>,
    {
        let mut map = BTreeMap::new();
        for (stack, value) in entries {
            if !value.is_finite() {
                return Err(Error::NonFiniteWeight(value));
            }
            *map.entry(stack).or_insert(0.0) += value;
        }
        Ok(Self::from_pruned(unit, map))
    }

    pub(crate) fn from_pruned(unit: Unit, mut entries: BTreeMap<Stack, f64>) -> Self {
        entries.retain(|_, v| *v != 0.0);
        debug_assert!(entries.values().all(|v| v.is_finite()));
        Self { entries, unit }
    }
}

/// A time-ordered sequence of `(timestamp, flame graph)` events.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlameChart {
    events: Vec<(f64, FlameGraph)>,
}

impl FlameChart {
    /// Rejects non-finite timestamps and any decreasing pair.
    pub fn new(events: Vec<(f64, FlameGraph)>) -> Result<Self> {
        for (index, (t, _)) in events.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::Domain(format!("non-finite timestamp {t}")));
            }
            if index > 0 {
                let previous = events[index - 1].0;
                if previous > *t {
                    return Err(Error::UnorderedChart {
                        index,
                        previous,
                        current: *t,
                    });
                }
            }
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[(f64, FlameGraph)] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}
