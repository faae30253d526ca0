//! The `fgalgebra` command line.
//!
//! Exit codes: 0 success (no significant difference for `regress`), 1 usage
//! or I/O error, 2 significant difference detected, 3 statistical
//! precondition failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::algebra::{self, DeltaClass};
use crate::error::{Error, Result};
use crate::folded::{
    emit_folded, load_folded_file, load_sample_dir, parse_chart, read_text, report_to_json,
    FrameNormalizer, ParseOptions,
};
use crate::model::Unit;
use crate::sim::{self, SimSpec};
use crate::stats::{regression_test, HotellingConfig, RegressionReport, Scaling};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_SIGNIFICANT: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "fgalgebra",
    version,
    about = "Flame graph algebra and regression detection"
)]
struct Cli {
    /// Frame label normalization applied while reading folded files.
    #[arg(long, value_enum, default_value_t = NormalizerArg::Identity, global = true)]
    normalizer: NormalizerArg,

    /// Regex rewrite applied to every frame label (overrides --normalizer).
    #[arg(long, global = true, value_name = "PATTERN")]
    frame_regex: Option<String>,

    /// Replacement for --frame-regex.
    #[arg(long, global = true, default_value = "", value_name = "TEXT")]
    frame_replace: String,

    /// Unit of the weights in the input files.
    #[arg(long, default_value = "samples", global = true)]
    unit: Unit,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NormalizerArg {
    Identity,
    StripLocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NormalizeBy {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScalingArg {
    Standard,
    ExampleCompatible,
}

impl From<ScalingArg> for Scaling {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::Standard => Scaling::Standard,
            ScalingArg::ExampleCompatible => Scaling::ExampleCompatible,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Signed difference `second - first` as signed folded text.
    Diff {
        first: PathBuf,
        second: PathBuf,
        /// Divide by the norm of the first or second graph.
        #[arg(long, value_enum)]
        normalize_by: Option<NormalizeBy>,
    },
    /// Write appeared/grown/disappeared/shrunk parts of `second - first`.
    Decompose {
        first: PathBuf,
        second: PathBuf,
        out_dir: PathBuf,
    },
    /// Similarity score in [0, 1].
    Similarity { first: PathBuf, second: PathBuf },
    /// Sum the events of a flame chart (`timestamp<TAB>stack value` lines).
    FoldChart { chart: PathBuf },
    /// Hotelling T² regression test between two directories of folded runs.
    Regress {
        baseline: PathBuf,
        candidate: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        p_star: f64,
        #[arg(long, value_enum, default_value_t = ScalingArg::Standard)]
        scaling: ScalingArg,
        /// Minimum number of runs a stack must appear in.
        #[arg(long)]
        min_df: Option<usize>,
        /// Fixed critical value instead of the (1 - p*) quantile.
        #[arg(long)]
        f_star: Option<f64>,
        #[arg(long, default_value_t = 1e-9)]
        ridge: f64,
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Generate baseline and treatment run directories from a scenario.
    Simulate {
        out_baseline: PathBuf,
        out_treatment: PathBuf,
        /// JSON scenario; defaults to the built-in one.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        sample_period: Option<f64>,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write, color: bool) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = if color {
                e.render().ansi().to_string()
            } else {
                e.render().to_string()
            };
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let is_regress = matches!(cli.command, Command::Regress { .. });
    match execute(cli, out, color) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if is_regress && e.is_statistical() {
                let _ = writeln!(err, "hint: increase --min-df or collect more runs");
                EXIT_PRECONDITION
            } else {
                EXIT_ERROR
            }
        }
    }
}

fn parse_options(cli: &Cli) -> Result<ParseOptions> {
    let normalizer = match (&cli.frame_regex, cli.normalizer) {
        (Some(pattern), _) => FrameNormalizer::regex(pattern, cli.frame_replace.clone())?,
        (None, NormalizerArg::Identity) => FrameNormalizer::Identity,
        (None, NormalizerArg::StripLocation) => FrameNormalizer::StripTrailingLocation,
    };
    Ok(ParseOptions::new(normalizer, cli.unit))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn execute(cli: Cli, out: &mut dyn Write, color: bool) -> Result<i32> {
    let opts = parse_options(&cli)?;
    let stdout = |out: &mut dyn Write, s: &str| {
        out.write_all(s.as_bytes())
            .map_err(io_err(Path::new("<stdout>")))
    };
    match cli.command {
        Command::Diff {
            first,
            second,
            normalize_by,
        } => {
            let f1 = load_folded_file(&first, &opts)?;
            let f2 = load_folded_file(&second, &opts)?;
            let mut delta = algebra::diff(&f2, &f1)?;
            if let Some(by) = normalize_by {
                let norm = match by {
                    NormalizeBy::First => algebra::norm(&f1),
                    NormalizeBy::Second => algebra::norm(&f2),
                };
                delta = algebra::normalize(&delta, norm)?;
            }
            stdout(out, &emit_folded(&delta))?;
        }
        Command::Decompose {
            first,
            second,
            out_dir,
        } => {
            let f1 = load_folded_file(&first, &opts)?;
            let f2 = load_folded_file(&second, &opts)?;
            let parts = algebra::decompose(&f2, &f1)?;
            fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
            for class in [
                DeltaClass::Appeared,
                DeltaClass::Grown,
                DeltaClass::Disappeared,
                DeltaClass::Shrunk,
            ] {
                let path = out_dir.join(format!("{}.folded", class.as_str()));
                fs::write(&path, emit_folded(parts.part(class))).map_err(io_err(&path))?;
            }
        }
        Command::Similarity { first, second } => {
            let f1 = load_folded_file(&first, &opts)?;
            let f2 = load_folded_file(&second, &opts)?;
            stdout(out, &format!("{:.6}\n", algebra::similarity(&f1, &f2)?))?;
        }
        Command::FoldChart { chart } => {
            let text = read_text(&chart)?;
            let chart = parse_chart(&text, &opts, &chart.display().to_string())?;
            stdout(out, &emit_folded(&algebra::fold_chart(&chart, opts.unit)?))?;
        }
        Command::Regress {
            baseline,
            candidate,
            p_star,
            scaling,
            min_df,
            f_star,
            ridge,
            json_out,
        } => {
            let cfg = HotellingConfig {
                p_star,
                scaling: scaling.into(),
                ridge,
                min_df,
                f_star,
            };
            // reject bad flags before touching the file system
            cfg.validate()?;
            let s1 = load_sample_dir(&baseline, &opts)?;
            let s2 = load_sample_dir(&candidate, &opts)?;
            let report = regression_test(&s1, &s2, &cfg)?;
            if let Some(path) = json_out {
                fs::write(&path, report_to_json(&report)).map_err(io_err(&path))?;
            }
            stdout(out, &render_report(&report, p_star, color))?;
            return Ok(if report.is_regression() {
                EXIT_SIGNIFICANT
            } else {
                EXIT_OK
            });
        }
        Command::Simulate {
            out_baseline,
            out_treatment,
            spec,
            seed,
            runs,
            noise,
            sample_period,
        } => {
            let mut spec = match spec {
                Some(path) => serde_json::from_str::<SimSpec>(&read_text(&path)?)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
                None => SimSpec::default(),
            };
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            if let Some(runs) = runs {
                spec.runs_per_side = runs;
            }
            if let Some(noise) = noise {
                spec.noise = noise;
            }
            if let Some(period) = sample_period {
                spec.sample_period_ms = period;
            }
            let simulation = sim::simulate(&spec)?;
            sim::write_sample_dir(&out_baseline, &simulation.baseline)?;
            sim::write_sample_dir(&out_treatment, &simulation.treatment)?;
            stdout(
                out,
                &format!(
                    "wrote {} baseline runs to {} and {} treatment runs to {}\n",
                    simulation.baseline.len(),
                    out_baseline.display(),
                    simulation.treatment.len(),
                    out_treatment.display()
                ),
            )?;
        }
    }
    Ok(EXIT_OK)
}

/// Human-readable report; significant stacks listed by decreasing `|Δ|`.
pub fn render_report(report: &RegressionReport, p_star: f64, color: bool) -> String {
    let (red, green, reset) = if color {
        ("\x1b[31m", "\x1b[32m", "\x1b[0m")
    } else {
        ("", "", "")
    };
    let o = &report.outcome;
    let unit = report.stats.unit;
    let mut s = format!(
        "Hotelling T² test: n1={} n2={} p={} (min_df={}) scaling={}\n",
        report.n1,
        report.n2,
        report.p(),
        report.min_df,
        report.scaling
    );
    s += &format!(
        "  F = {:.6}  p-value = {:.3e}  F* = {:.6} (p*={p_star}, dof {}, {})  G² = {:.6}\n",
        o.statistic_f, o.p_value, o.critical_f_star, o.dof.0, o.dof.1, o.g_squared
    );
    if o.ridge_applied {
        s += "  note: pooled covariance was regularized (ridge)\n";
    }
    let rows = report.significant_rows();
    if rows.is_empty() {
        s += &format!("{green}no significant difference{reset}\n");
        return s;
    }
    s += &format!(
        "{red}significant difference in {} stack(s){reset}\n",
        rows.len()
    );
    for row in rows {
        let class = row.class.map_or("-", DeltaClass::as_str);
        s += &format!(
            "  {class:<11} {:>+14.3} {unit}  [{:.3}, {:.3}]  {}\n",
            row.delta, row.interval.low, row.interval.high, row.stack
        );
    }
    s
}
