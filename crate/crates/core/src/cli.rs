//! Command-line front end. Exit codes: 0 success, 1 pipeline error,
//! 2 usage or configuration error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;

use crate::backtest::{run_backtest_with_jobs, BacktestOutput, BacktestReport, ModelBundle, RunConfig, NATIONAL};
use crate::calendar::{CivilDate, DateRange};
use crate::dataset::{load_series, write_series, DailySeries, SeriesKind};
use crate::error::Error;
use crate::features::{build_full_matrix, feature_row, N_COLUMNS};
use crate::synthgen::{generate, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (report format 1, model format 1)");

#[derive(Debug, Parser)]
#[command(name = "gasfc", version = VERSION, about = "Day-ahead gas demand forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic series CSV from a JSON spec.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the generator config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the rolling yearly evaluation.
    Backtest {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Day-ahead forecast from models saved by `backtest`.
    Forecast {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        date: String,
        /// Directory the models were written to; overrides `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the feature matrix of every configured series.
    Features {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type CliResult = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Synth { config, out, seed } => cmd_synth(&config, &out, seed),
        Command::Backtest { config, out, seed, jobs } => cmd_backtest(&config, out, seed, jobs, stdout),
        Command::Forecast { config, date, out } => cmd_forecast(&config, &date, out, stdout),
        Command::Features { config, out } => cmd_features(&config, &out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn read_json(path: &Path) -> std::result::Result<serde_json::Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn parse_date(s: &str) -> std::result::Result<CivilDate, Failure> {
    s.parse().map_err(|e: Error| usage(e.to_string()))
}

/// Spec JSON: the generator fields plus optional `start` and `end`
/// (default 2007-01-01..2018-12-31).
fn cmd_synth(config: &Path, out: &Path, seed: Option<u64>) -> CliResult {
    let mut value = read_json(config)?;
    let obj = value.as_object_mut().ok_or_else(|| usage("synth spec must be a JSON object"))?;
    let date_field = |obj: &mut serde_json::Map<String, serde_json::Value>, key: &str, default: CivilDate| match obj.remove(key) {
        None => Ok(default),
        Some(serde_json::Value::String(s)) => parse_date(&s),
        Some(v) => Err(usage(format!("`{key}` must be a date string, got {v}"))),
    };
    let start = date_field(obj, "start", CivilDate::ymd(2007, 1, 1))?;
    let end = date_field(obj, "end", CivilDate::ymd(2018, 12, 31))?;
    if let Some(s) = seed {
        obj.insert("seed".into(), s.into());
    }
    let spec: SynthSpec = serde_json::from_value(value).map_err(|e| usage(format!("synth spec: {e}")))?;
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let range = DateRange::new(start, end).map_err(|e| usage(e.to_string()))?;
    let series = generate(&spec, range).map_err(|e| usage(e.to_string()))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::from)?;
    }
    let mut w = BufWriter::new(File::create(out).map_err(Error::from)?);
    write_series(&series, &mut w)?;
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn load_config(path: &Path) -> std::result::Result<RunConfig, Failure> {
    let value = read_json(path)?;
    let mut cfg: RunConfig = serde_json::from_value(value).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if cfg.series_paths.is_empty() {
        return Err(usage("series_paths is empty"));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    for p in cfg.series_paths.values_mut() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    if let Some(d) = cfg.out_dir.as_mut().filter(|d| d.is_relative()) {
        *d = base.join(&*d);
    }
    Ok(cfg)
}

fn load_all(cfg: &RunConfig) -> std::result::Result<Vec<DailySeries>, Failure> {
    cfg.series_paths
        .iter()
        .map(|(kind, path)| {
            let f = File::open(path).map_err(|e| Error::from(e).context(format!("{kind} {}", path.display())))?;
            load_series(BufReader::new(f), *kind).map_err(|e| Failure::Runtime(e.context(format!("{kind} {}", path.display()))))
        })
        .collect()
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> crate::Result<()>) -> crate::Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::from(e).context(path.display().to_string()))?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes `report.csv`, per-year forecast panels under `forecasts/` and the
/// latest year's models under `models/`.
pub fn write_outputs(out: &Path, output: &BacktestOutput) -> crate::Result<()> {
    fs::create_dir_all(out.join("forecasts"))?;
    fs::create_dir_all(out.join("models"))?;
    write_file(&out.join("report.csv"), |w| output.report.write_csv(w))?;
    for run in &output.runs {
        let stem = format!("{}_{}", run.kind.code(), run.plan.test_year);
        write_file(&out.join("forecasts").join(format!("{stem}_test.csv")), |w| run.test.write_csv(w))?;
        write_file(&out.join("forecasts").join(format!("{stem}_validation.csv")), |w| run.validation.write_csv(w))?;
    }
    for (year, gd) in &output.national {
        write_file(&out.join("forecasts").join(format!("{NATIONAL}_{year}_test.csv")), |w| gd.write_csv(w))?;
    }
    for kind in SeriesKind::ALL {
        if let Some(run) = output.runs.iter().filter(|r| r.kind == kind).max_by_key(|r| r.plan.test_year) {
            let json = serde_json::to_string(&ModelBundle::from_run(run))?;
            fs::write(out.join("models").join(format!("{}.json", kind.code())), json)?;
        }
    }
    Ok(())
}

/// MAE tables, one per series: rows are models, columns test years and
/// their average.
pub fn format_tables(report: &BacktestReport) -> String {
    let mut years: Vec<i32> = report.rows.iter().map(|r| r.test_year).collect();
    years.sort();
    years.dedup();
    let mut out = String::new();
    for series in ["RGD", "IGD", "TGD", NATIONAL] {
        let averages = report.averages(series);
        if averages.is_empty() {
            continue;
        }
        let _ = write!(out, "{series:<18}");
        for y in &years {
            let _ = write!(out, "{y:>10}");
        }
        let _ = writeln!(out, "{:>10}", "Average");
        for (model, avg) in averages {
            let _ = write!(out, "{model:<18}");
            for y in &years {
                match report.get(series, &model, *y) {
                    Some(v) => { let _ = write!(out, "{v:>10.3}"); }
                    None => { let _ = write!(out, "{:>10}", "-"); }
                }
            }
            let _ = writeln!(out, "{avg:>10.3}");
        }
        out.push('\n');
    }
    out
}

fn cmd_backtest(config: &Path, out: Option<PathBuf>, seed: Option<u64>, jobs: usize, stdout: &mut dyn Write) -> CliResult {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let out = out.or_else(|| cfg.out_dir.clone()).ok_or_else(|| usage("no output directory: pass --out or set out_dir"))?;
    let series = load_all(&cfg)?;
    let output = run_backtest_with_jobs(&series, &cfg, jobs)?;
    write_outputs(&out, &output)?;
    write!(stdout, "{}", format_tables(&output.report)).map_err(Error::from)?;
    Ok(())
}

fn cmd_forecast(config: &Path, date: &str, out: Option<PathBuf>, stdout: &mut dyn Write) -> CliResult {
    let cfg = load_config(config)?;
    let date = parse_date(date)?;
    let dir = out.or_else(|| cfg.out_dir.clone()).ok_or_else(|| usage("no model directory: pass --out or set out_dir"))?;
    let series = load_all(&cfg)?;
    let mut total = 0.0;
    let mut lines = String::new();
    for s in &series {
        let path = dir.join("models").join(format!("{}.json", s.kind().code()));
        let text = fs::read_to_string(&path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        let bundle = ModelBundle::from_json(&text)?;
        if bundle.kind != s.kind() {
            return Err(Failure::Runtime(Error::Misaligned(format!("{} holds {} models", path.display(), bundle.kind))));
        }
        let row = feature_row(s, date).map_err(|e| e.context(s.kind().code()))?;
        let x = DMatrix::from_row_slice(1, N_COLUMNS, &row);
        let v = bundle.predict(&cfg.forecast_model, &x).map_err(|e| e.context(s.kind().code()))?[0];
        total += v;
        let _ = writeln!(lines, "{} {v}", s.kind().code());
    }
    if series.len() == SeriesKind::ALL.len() {
        let _ = writeln!(lines, "{NATIONAL} {total}");
    }
    write!(stdout, "{lines}").map_err(Error::from)?;
    Ok(())
}

fn cmd_features(config: &Path, out: &Path) -> CliResult {
    let cfg = load_config(config)?;
    let series = load_all(&cfg)?;
    fs::create_dir_all(out).map_err(Error::from)?;
    for s in &series {
        let m = build_full_matrix(s).map_err(|e| e.context(s.kind().code()))?;
        write_file(&out.join(format!("features_{}.csv", s.kind().code())), |w| m.write_csv(w))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::REPORT_FORMAT_VERSION;
    use crate::models::MODEL_FORMAT_VERSION;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(args.iter().copied(), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn version_lists_formats() {
        let (code, out, _) = run_capture(&["gasfc", "--version"]);
        assert_eq!(code, 0);
        assert!(out.contains(&format!("report format {REPORT_FORMAT_VERSION}")));
        assert!(out.contains(&format!("model format {MODEL_FORMAT_VERSION}")));
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run_capture(&["gasfc", "plot"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["gasfc", "synth"]).0, EXIT_USAGE);
    }

    #[test]
    fn synth_requires_seed() {
        let dir = tempfile::tempdir().unwrap();
        let spec = dir.path().join("spec.json");
        let mut v = serde_json::to_value(SynthSpec::preset(SeriesKind::Industrial, 1)).unwrap();
        v.as_object_mut().unwrap().remove("seed");
        fs::write(&spec, v.to_string()).unwrap();
        let out = dir.path().join("s.csv");
        let (code, _, err) = run_capture(&["gasfc", "synth", "--config", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("seed"));
        let (code, _, _) =
            run_capture(&["gasfc", "synth", "--config", spec.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "5"]);
        assert_eq!(code, EXIT_OK);
    }

    #[test]
    fn tables_average_years() {
        let report = BacktestReport {
            rows: vec![
                crate::backtest::ReportRow { series: "RGD".into(), model: "ridge".into(), test_year: 2017, mae_mscm: 1.0 },
                crate::backtest::ReportRow { series: "RGD".into(), model: "ridge".into(), test_year: 2018, mae_mscm: 2.0 },
            ],
        };
        let t = format_tables(&report);
        assert!(t.contains("Average"));
        assert!(t.lines().nth(1).unwrap().trim_end().ends_with("1.500"));
    }
}
