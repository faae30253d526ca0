//! Synthetic profiling scenarios.
//!
//! Each run gives every stack a dwell time jittered uniformly by
//! `±noise` (relative), converted to a whole number of samples at
//! `sample_period_ms`. The default scenario is a program whose `c;b;a`
//! path sleeps 200 ms in the baseline and 150 ms in the treatment, which
//! also gains a 100 ms start-up hook.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::DeltaClass;
use crate::error::{Error, Result};
use crate::folded::emit_folded;
use crate::model::{FlameGraph, Stack, Unit};
use crate::stats::SampleSet;

/// Stack of the start-up hook that only runs in the default treatment.
pub const SITECUSTOMIZE_STACK: &str = "<module> (site.py);<module> (sitecustomize.py)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackDwell {
    pub stack: Stack,
    pub dwell_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditKind {
    Appeared,
    Grown,
    Disappeared,
    Shrunk,
}

impl From<EditKind> for DeltaClass {
    fn from(k: EditKind) -> Self {
        match k {
            EditKind::Appeared => DeltaClass::Appeared,
            EditKind::Grown => DeltaClass::Grown,
            EditKind::Disappeared => DeltaClass::Disappeared,
            EditKind::Shrunk => DeltaClass::Shrunk,
        }
    }
}

/// Change applied to the baseline to obtain the treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentEdit {
    pub stack: Stack,
    pub delta_ms: f64,
    pub kind: EditKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSpec {
    pub runs_per_side: usize,
    pub sample_period_ms: f64,
    /// Unit of the emitted weights; `samples` writes raw sample counts.
    pub unit: Unit,
    pub baseline: Vec<StackDwell>,
    pub edits: Vec<TreatmentEdit>,
    /// Relative jitter, uniform on `[-noise, +noise]`.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        let st = |s: &str| s.parse::<Stack>().expect("valid literal stack");
        Self {
            runs_per_side: 50,
            sample_period_ms: 1.0,
            unit: Unit::Milliseconds,
            baseline: vec![
                StackDwell {
                    stack: st("c;b;a"),
                    dwell_ms: 200.0,
                },
                StackDwell {
                    stack: st("c;b"),
                    dwell_ms: 100.0,
                },
                StackDwell {
                    stack: st("c"),
                    dwell_ms: 50.0,
                },
            ],
            edits: vec![
                TreatmentEdit {
                    stack: st("c;b;a"),
                    delta_ms: -50.0,
                    kind: EditKind::Shrunk,
                },
                TreatmentEdit {
                    stack: st(SITECUSTOMIZE_STACK),
                    delta_ms: 100.0,
                    kind: EditKind::Appeared,
                },
            ],
            noise: 0.05,
            seed: 0,
        }
    }
}

/// Which side of the comparison a run belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Baseline,
    Treatment,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.runs_per_side < 2 {
            return bad(format!("runs_per_side {} < 2", self.runs_per_side));
        }
        if !(self.sample_period_ms > 0.0 && self.sample_period_ms.is_finite()) {
            return bad(format!(
                "sample period {} must be > 0",
                self.sample_period_ms
            ));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return bad(format!("noise {} outside [0, 1)", self.noise));
        }
        let mut seen = BTreeMap::new();
        for d in &self.baseline {
            if !(d.dwell_ms > 0.0 && d.dwell_ms.is_finite()) {
                return bad(format!("dwell of {} must be > 0", d.stack));
            }
            if seen.insert(&d.stack, d.dwell_ms).is_some() {
                return bad(format!("duplicate baseline stack {}", d.stack));
            }
        }
        for e in &self.edits {
            let base = seen.get(&e.stack).copied();
            let after = base.unwrap_or(0.0) + e.delta_ms;
            let ok = match e.kind {
                EditKind::Appeared => base.is_none() && e.delta_ms > 0.0,
                EditKind::Grown => base.is_some() && e.delta_ms > 0.0,
                EditKind::Shrunk => base.is_some() && e.delta_ms < 0.0 && after > 0.0,
                EditKind::Disappeared => base.is_some() && after == 0.0,
            };
            if !ok || !e.delta_ms.is_finite() {
                return bad(format!(
                    "edit {:?} of {:+} ms on {} is inconsistent with the baseline",
                    e.kind, e.delta_ms, e.stack
                ));
            }
        }
        Ok(())
    }

    /// Noise-free dwell per stack for one side.
    pub fn dwell(&self, side: Side) -> BTreeMap<Stack, f64> {
        let mut dwell: BTreeMap<Stack, f64> = self
            .baseline
            .iter()
            .map(|d| (d.stack.clone(), d.dwell_ms))
            .collect();
        if side == Side::Treatment {
            for e in &self.edits {
                *dwell.entry(e.stack.clone()).or_insert(0.0) += e.delta_ms;
            }
            dwell.retain(|_, v| *v > 0.0);
        }
        dwell
    }

    fn weight(&self, samples: f64) -> f64 {
        match self.unit {
            Unit::Samples | Unit::Unitless => samples,
            Unit::Milliseconds => samples * self.sample_period_ms,
            Unit::Microseconds => samples * self.sample_period_ms * 1000.0,
        }
    }

    /// Draws `runs_per_side` runs for one side.
    pub fn sample_runs(&self, side: Side, rng: &mut impl Rng) -> Vec<FlameGraph> {
        let dwell = self.dwell(side);
        (0..self.runs_per_side)
            .map(|_| {
                let mut map = BTreeMap::new();
                for (stack, ms) in &dwell {
                    let u: f64 = rng.random();
                    let jitter = self.noise * (2.0 * u - 1.0);
                    let samples = (ms * (1.0 + jitter) / self.sample_period_ms).round();
                    if samples > 0.0 {
                        map.insert(stack.clone(), self.weight(samples));
                    }
                }
                FlameGraph::from_entries(self.unit, map).expect("positive finite weights")
            })
            .collect()
    }
}

/// Both sides of a simulated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub baseline: SampleSet,
    pub treatment: SampleSet,
}

/// Runs the scenario. Output depends only on the spec (including its seed).
pub fn simulate(spec: &SimSpec) -> Result<Simulation> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let baseline = spec.sample_runs(Side::Baseline, &mut rng);
    let treatment = spec.sample_runs(Side::Treatment, &mut rng);
    Ok(Simulation {
        baseline: SampleSet::new(spec.unit, baseline)?,
        treatment: SampleSet::new(spec.unit, treatment)?,
    })
}

/// Writes one folded file per run (`run-000.folded`, ...) into `dir`, which
/// is created if missing and must otherwise be empty.
pub fn write_sample_dir(dir: &Path, sample: &SampleSet) -> Result<()> {
    let io = |source| Error::Io {
        path: dir.to_owned(),
        source,
    };
    fs::create_dir_all(dir).map_err(io)?;
    if fs::read_dir(dir).map_err(io)?.next().is_some() {
        return Err(Error::Config(format!(
            "output directory {} is not empty",
            dir.display()
        )));
    }
    let width = sample.len().saturating_sub(1).to_string().len().max(3);
    for (i, g) in sample.graphs().iter().enumerate() {
        let path = dir.join(format!("run-{i:0width$}.folded"));
        fs::write(&path, emit_folded(g)).map_err(|source| Error::Io { path, source })?;
    }
    Ok(())
}
