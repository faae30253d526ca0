//! Reading and writing the collapsed ("folded") stack format.
//!
//! Each non-empty line is `frame;frame;...<whitespace>value`. The value is
//! the token after the last whitespace run, so frame labels may themselves
//! contain spaces. Canonical emission writes one line per stack, sorted by
//! stack, with the value in its shortest round-trip decimal form.

mod json;
mod normalize;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub use json::{report_to_json, JsonReport, JsonStack, JSON_SCHEMA_VERSION};
pub use normalize::FrameNormalizer;

use crate::error::{Error, Result};
use crate::model::{
    DeltaGraph, FlameChart, FlameGraph, Frame, Stack, Unit, DEFAULT_MAX_DEPTH, FRAME_SEPARATOR,
};
use crate::stats::SampleSet;

/// Options shared by every folded reader.
#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub normalizer: FrameNormalizer,
    pub unit: Unit,
    pub max_depth: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            normalizer: FrameNormalizer::Identity,
            unit: Unit::Samples,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

impl ParseOptions {
    pub fn new(normalizer: FrameNormalizer, unit: Unit) -> Self {
        Self {
            normalizer,
            unit,
            ..Self::default()
        }
    }
}

/// Parses folded text into a flame graph. Duplicate stacks are summed and
/// zero-valued lines dropped; negative values are an error.
pub fn parse_folded(text: &str, normalizer: &FrameNormalizer, unit: Unit) -> Result<FlameGraph> {
    let opts = ParseOptions::new(normalizer.clone(), unit);
    parse_folded_with(text, &opts, "<input>")
}

/// Like [`parse_folded`], but negative values are allowed.
pub fn parse_folded_signed(
    text: &str,
    normalizer: &FrameNormalizer,
    unit: Unit,
) -> Result<DeltaGraph> {
    let opts = ParseOptions::new(normalizer.clone(), unit);
    parse_folded_signed_with(text, &opts, "<input>")
}

pub fn parse_folded_with(text: &str, opts: &ParseOptions, source_name: &str) -> Result<FlameGraph> {
    let lines = parse_lines(text, opts, source_name)?;
    for line in &lines {
        if line.value < 0.0 {
            return Err(Error::NegativeValue {
                source_name: source_name.to_owned(),
                line_no: line.line_no,
                value: line.value,
            });
        }
    }
    Ok(FlameGraph::from_pruned(opts.unit, sum_duplicates(lines)))
}

pub fn parse_folded_signed_with(
    text: &str,
    opts: &ParseOptions,
    source_name: &str,
) -> Result<DeltaGraph> {
    let lines = parse_lines(text, opts, source_name)?;
    Ok(DeltaGraph::from_pruned(opts.unit, sum_duplicates(lines)))
}

/// Canonical folded text for any graph: sorted stacks, `stack value\n`.
pub fn emit_folded<'a, G>(graph: G) -> String
where
    G: IntoIterator<Item = (&'a Stack, &'a f64)>,
{
    let mut out = String::new();
    for (stack, value) in graph {
        // f64 Display is the shortest round-trip decimal, never exponential.
        let _ = writeln!(out, "{stack} {value}");
    }
    out
}

/// Reads a flame chart: one event per line, `timestamp<TAB>stack value`,
/// with non-decreasing timestamps.
pub fn parse_chart(text: &str, opts: &ParseOptions, source_name: &str) -> Result<FlameChart> {
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let malformed = |reason: &str| Error::MalformedLine {
            source_name: source_name.to_owned(),
            line_no,
            reason: reason.to_owned(),
        };
        let (ts, rest) = raw
            .split_once('\t')
            .ok_or_else(|| malformed("missing tab after timestamp"))?;
        let timestamp: f64 = ts
            .trim()
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite())
            .ok_or_else(|| malformed("unparsable timestamp"))?;
        let Some(line) = parse_line(rest, line_no, opts, source_name)? else {
            return Err(malformed("missing stack"));
        };
        if line.value < 0.0 {
            return Err(Error::NegativeValue {
                source_name: source_name.to_owned(),
                line_no,
                value: line.value,
            });
        }
        let graph = FlameGraph::from_pruned(opts.unit, BTreeMap::from([(line.stack, line.value)]));
        events.push((timestamp, graph));
    }
    FlameChart::new(events)
}

/// Loads one flame graph per regular file in `dir`, ordered by file name.
/// Dot-files are skipped.
pub fn load_sample_dir(dir: &Path, opts: &ParseOptions) -> Result<SampleSet> {
    let io_err = |path: &Path, source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let path = entry.path();
        let name = entry.file_name();
        if name.to_string_lossy().starts_with('.') {
            continue;
        }
        let meta = fs::metadata(&path).map_err(|e| io_err(&path, e))?;
        if meta.is_file() {
            files.push((name, path));
        }
    }
    files.sort();

    let mut graphs = Vec::with_capacity(files.len());
    for (_, path) in &files {
        graphs.push(load_folded_file(path, opts)?);
    }
    SampleSet::new(opts.unit, graphs)
}

/// Reads and parses a single folded file.
pub fn load_folded_file(path: &Path, opts: &ParseOptions) -> Result<FlameGraph> {
    let text = read_text(path)?;
    parse_folded_with(&text, opts, &path.display().to_string())
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|e| {
        let valid = &e.as_bytes()[..e.utf8_error().valid_up_to()];
        Error::MalformedLine {
            source_name: path.display().to_string(),
            line_no: valid.iter().filter(|b| **b == b'\n').count() + 1,
            reason: "invalid UTF-8".to_owned(),
        }
    })
}

struct Line {
    line_no: usize,
    stack: Stack,
    value: f64,
}

fn parse_lines(text: &str, opts: &ParseOptions, source_name: &str) -> Result<Vec<Line>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if let Some(line) = parse_line(raw, idx + 1, opts, source_name)? {
            out.push(line);
        }
    }
    Ok(out)
}

fn parse_line(
    raw: &str,
    line_no: usize,
    opts: &ParseOptions,
    source_name: &str,
) -> Result<Option<Line>> {
    let line = raw.trim();
    if line.is_empty() {
        return Ok(None);
    }
    let malformed = |reason: String| Error::MalformedLine {
        source_name: source_name.to_owned(),
        line_no,
        reason,
    };
    let split = line
        .rfind(char::is_whitespace)
        .ok_or_else(|| malformed("missing value".into()))?;
    let (stack_part, value_part) = line.split_at(split);
    let value_part = value_part.trim_start();
    let value: f64 = value_part
        .parse()
        .ok()
        .filter(|v: &f64| v.is_finite())
        .ok_or_else(|| malformed(format!("unparsable number {value_part:?}")))?;

    let stack_part = stack_part.trim_end();
    let mut frames = Vec::new();
    for label in stack_part.split(FRAME_SEPARATOR) {
        let label = opts.normalizer.normalize(label)?;
        frames.push(Frame::new(&*label).map_err(|e| malformed(e.to_string()))?);
    }
    let stack =
        Stack::with_max_depth(frames, opts.max_depth).map_err(|e| malformed(e.to_string()))?;
    Ok(Some(Line {
        line_no,
        stack,
        value,
    }))
}

/// Sums duplicate stacks. Values of each stack are added in sorted order so
/// the result does not depend on line order.
fn sum_duplicates(lines: Vec<Line>) -> BTreeMap<Stack, f64> {
    let mut grouped: BTreeMap<Stack, Vec<f64>> = BTreeMap::new();
    for line in lines {
        if line.value != 0.0 {
            grouped.entry(line.stack).or_default().push(line.value);
        }
    }
    grouped
        .into_iter()
        .map(|(stack, mut values)| {
            values.sort_by(f64::total_cmp);
            (stack, values.iter().sum())
        })
        .collect()
}
