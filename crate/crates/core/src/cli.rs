//! Command-line driver, configuration and data formats.
//!
//! Config files are flat `key = value` text:
//!
//! ```text
//! # two-point alternative
//! model.pi0 = 0.8
//! model.alt = two_point        # or gaussian_mixture
//! model.pi11 = 0.5
//! model.mu_minus = -3
//! model.mu_plus = 4
//! model.tau = 0.5              # gaussian_mixture only
//! severity.kind = power        # or constant
//! severity.power = 2
//! ```
//!
//! Data files are CSV with a single `x` column. Lines starting with `#` are
//! ignored everywhere.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::Error;
use crate::error_rates::posterior_mfdr_star;
use crate::experiments::{
    default_pi11_grid, run_study1, run_study2, verify_suite, Budget, Procedure, Study1Result,
    Study2Row, Study2Template,
};
use crate::model::{sample, AlternativeSpec, SeveritySpec, SimulatedSample, TwoGroupsModel};
use crate::posterior::posterior_scores;
use crate::procedures::stepup;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// A failure carrying its process exit code.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn from_lib(err: Error) -> Self {
        match err {
            Error::NumericalFailure(_) => CliError::Numerical(err.to_string()),
            Error::InvalidParameter(_) | Error::Unattainable { .. } => {
                CliError::Usage(err.to_string())
            }
            Error::OutOfRange { .. } | Error::LengthMismatch { .. } => {
                CliError::Data(err.to_string())
            }
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

const CONFIG_KEYS: [&str; 8] = [
    "model.pi0",
    "model.alt",
    "model.pi11",
    "model.mu_minus",
    "model.mu_plus",
    "model.tau",
    "severity.kind",
    "severity.power",
];

/// Model and severity read from a config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub model: TwoGroupsModel,
    pub severity: SeveritySpec,
}

fn config_err(line: usize, msg: impl std::fmt::Display) -> CliError {
    if line == 0 {
        CliError::Config(msg.to_string())
    } else {
        CliError::Config(format!("line {line}: {msg}"))
    }
}

pub fn parse_config(text: &str) -> CliResult<Config> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(line_no, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if !CONFIG_KEYS.contains(&key) {
            return Err(config_err(line_no, format!("unknown key `{key}`")));
        }
        if entries.insert(key, (line_no, value)).is_some() {
            return Err(config_err(line_no, format!("duplicate key `{key}`")));
        }
    }

    let num = |key: &str| -> CliResult<Option<f64>> {
        match entries.get(key) {
            None => Ok(None),
            Some(&(line, v)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| config_err(line, format!("`{key}` must be a number, got `{v}`"))),
        }
    };
    let required = |key: &str| -> CliResult<f64> {
        num(key)?.ok_or_else(|| config_err(0, format!("missing required key `{key}`")))
    };

    let pi0 = required("model.pi0")?;
    let pi11 = required("model.pi11")?;
    let mu_minus = required("model.mu_minus")?;
    let mu_plus = required("model.mu_plus")?;
    let alt_kind = entries
        .get("model.alt")
        .copied()
        .unwrap_or((0, "two_point"));
    let alt = match alt_kind.1 {
        "two_point" => {
            if entries.contains_key("model.tau") {
                return Err(config_err(
                    entries["model.tau"].0,
                    "`model.tau` only applies to gaussian_mixture",
                ));
            }
            AlternativeSpec::two_point(pi11, mu_minus, mu_plus)
        }
        "gaussian_mixture" => {
            AlternativeSpec::gaussian_mixture(pi11, mu_minus, mu_plus, required("model.tau")?)
        }
        other => {
            return Err(config_err(
                alt_kind.0,
                format!("`model.alt` must be two_point or gaussian_mixture, got `{other}`"),
            ))
        }
    }
    .map_err(|e| config_err(0, e))?;
    let model = TwoGroupsModel::new(pi0, alt).map_err(|e| config_err(0, e))?;

    let kind = entries
        .get("severity.kind")
        .copied()
        .unwrap_or((0, "power"));
    let severity = match kind.1 {
        "constant" => {
            if let Some(&(line, _)) = entries.get("severity.power") {
                return Err(config_err(
                    line,
                    "`severity.power` needs severity.kind = power",
                ));
            }
            SeveritySpec::Constant
        }
        "power" => SeveritySpec::Power(num("severity.power")?.unwrap_or(2.0)),
        other => {
            return Err(config_err(
                kind.0,
                format!("`severity.kind` must be power or constant, got `{other}`"),
            ))
        }
    };
    severity.validate().map_err(|e| config_err(0, e))?;
    Ok(Config { model, severity })
}

// ---------------------------------------------------------------------------
// Data and CSV
// ---------------------------------------------------------------------------

fn data_err(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("line {line}: {msg}"))
}

/// Parse a one-column CSV with header `x`.
pub fn parse_data(text: &str) -> CliResult<Vec<f64>> {
    let mut header_seen = false;
    let mut xs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != "x" {
                return Err(data_err(
                    line_no,
                    format!("expected header `x`, got `{line}`"),
                ));
            }
            header_seen = true;
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| data_err(line_no, format!("not a number: `{line}`")))?;
        if !v.is_finite() {
            return Err(data_err(
                line_no,
                format!("observation must be finite, got `{line}`"),
            ));
        }
        xs.push(v);
    }
    if !header_seen {
        return Err(CliError::Data("empty data file (no `x` header)".into()));
    }
    if xs.is_empty() {
        return Err(CliError::Data("data file has no observations".into()));
    }
    Ok(xs)
}

/// Format a float with 12 significant digits, `inf`/`-inf`/`nan` for
/// non-finite values.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const STUDY1_HEADER: &str = "R,beta_star_glfdr,beta_star_lfdr";
pub const STUDY2_HEADER: &str = "pi11,procedure,c_l,c_u,mfdr_star,mfnr,mfnr_star";
pub const DECISIONS_HEADER: &str = "index,x,fdr,w,T,d,rejected";
pub const SAMPLE_HEADER: &str = "rep,index,x,mu,theta";

pub fn study1_csv(rows: &[Study1Result]) -> String {
    let mut out = String::from(STUDY1_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            r.r,
            fmt_float(r.beta_star_glfdr),
            fmt_float(r.beta_star_lfdr)
        );
    }
    out
}

pub fn study2_csv(rows: &[Study2Row]) -> String {
    let mut out = String::from(STUDY2_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_float(r.pi11),
            r.procedure.as_str(),
            fmt_float(r.c_l),
            fmt_float(r.c_u),
            fmt_float(r.mfdr_star),
            fmt_float(r.mfnr),
            fmt_float(r.mfnr_star)
        );
    }
    out
}

pub fn samples_csv(samples: &[SimulatedSample]) -> String {
    let mut out = String::from(SAMPLE_HEADER);
    out.push('\n');
    for s in samples {
        for i in 0..s.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.rep_index,
                i,
                fmt_float(s.x[i]),
                fmt_float(s.mu[i]),
                u8::from(s.theta[i])
            );
        }
    }
    out
}

fn csv_rows<'a>(
    text: &'a str,
    header: &str,
    width: usize,
) -> CliResult<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        Some((i, h)) => {
            return Err(data_err(
                i + 1,
                format!("expected header `{header}`, got `{h}`"),
            ))
        }
        None => return Err(CliError::Data("empty CSV".into())),
    }
    lines
        .map(|(i, l)| {
            let fields: Vec<&str> = l.trim().split(',').collect();
            if fields.len() != width {
                return Err(data_err(
                    i + 1,
                    format!("expected {width} fields, got {}", fields.len()),
                ));
            }
            Ok((i + 1, fields))
        })
        .collect()
}

fn field<T: std::str::FromStr>(line: usize, s: &str) -> CliResult<T> {
    s.parse()
        .map_err(|_| data_err(line, format!("cannot parse `{s}`")))
}

/// Parse a file written by [`study1_csv`]. `n_reps` and the standard error
/// are not stored and come back as 0 and NaN.
pub fn parse_study1_csv(text: &str) -> CliResult<Vec<Study1Result>> {
    csv_rows(text, STUDY1_HEADER, 3)?
        .into_iter()
        .map(|(line, f)| {
            Ok(Study1Result {
                r: field(line, f[0])?,
                beta_star_glfdr: field(line, f[1])?,
                beta_star_lfdr: field(line, f[2])?,
                n_reps: 0,
                diff_std_error: f64::NAN,
            })
        })
        .collect()
}

pub fn parse_study2_csv(text: &str) -> CliResult<Vec<Study2Row>> {
    csv_rows(text, STUDY2_HEADER, 7)?
        .into_iter()
        .map(|(line, f)| {
            Ok(Study2Row {
                pi11: field(line, f[0])?,
                procedure: Procedure::parse(f[1])
                    .ok_or_else(|| data_err(line, format!("unknown procedure `{}`", f[1])))?,
                c_l: field(line, f[2])?,
                c_u: field(line, f[3])?,
                mfdr_star: field(line, f[4])?,
                mfnr: field(line, f[5])?,
                mfnr_star: field(line, f[6])?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(name = "sevfdr", version, about = "Severity-weighted multiple testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score observations and run the step-up rule.
    Test {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ranking comparison of Glfdr against lfdr.
    Study1 {
        /// Overrides the default mixture model and severity.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        m: usize,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form comparison of the three oracle procedures.
    Study2 {
        /// Supplies pi0, mu_minus, mu_plus and severity; pi11 is ignored.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Comma-separated pi11 values.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw samples from a model.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property verification suite.
    Verify {
        #[arg(long, default_value = "small")]
        budget: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn read_config(path: &Path) -> CliResult<Config> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn emit(out: &Option<PathBuf>, body: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, body)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
        None => io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Usage(format!("cannot write stdout: {e}"))),
    }
}

fn report(out: &Option<PathBuf>, line: &str) {
    if out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn cmd_test(data: &Path, config: &Path, alpha: f64, out: &Option<PathBuf>) -> CliResult<()> {
    let text =
        fs::read_to_string(data).map_err(|e| CliError::Data(format!("{}: {e}", data.display())))?;
    let xs = parse_data(&text)?;
    let cfg = read_config(config)?;
    let scores = posterior_scores(&cfg.model, cfg.severity, &xs).map_err(CliError::from_lib)?;
    let result = stepup(&scores, alpha).map_err(CliError::from_lib)?;

    let mut body = String::from(DECISIONS_HEADER);
    body.push('\n');
    for (i, &x) in xs.iter().enumerate() {
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{}",
            i,
            fmt_float(x),
            fmt_float(scores.fdr[i]),
            fmt_float(scores.w[i]),
            fmt_float(scores.glfdr[i]),
            fmt_float(scores.d[i]),
            u8::from(result.decisions.delta[i])
        );
    }
    emit(out, &body)?;
    report(
        out,
        &format!(
            "k={} threshold={} mfdr_star={}",
            result.k,
            fmt_float(result.threshold),
            fmt_float(posterior_mfdr_star(&scores, result.threshold))
        ),
    );
    Ok(())
}

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Test {
            data,
            config,
            alpha,
            out,
        } => cmd_test(&data, &config, alpha, &out),
        Command::Study1 {
            config,
            m,
            reps,
            seed,
            out,
        } => {
            let (model, spec) = match config {
                Some(p) => {
                    let c = read_config(&p)?;
                    (c.model, c.severity)
                }
                None => (TwoGroupsModel::study1(), SeveritySpec::SQUARED),
            };
            let rows = run_study1(&model, spec, m, reps, seed).map_err(CliError::from_lib)?;
            emit(&out, &study1_csv(&rows))
        }
        Command::Study2 {
            config,
            alpha,
            grid,
            out,
        } => {
            let (template, spec) = match config {
                Some(p) => {
                    let c = read_config(&p)?;
                    let [minus, plus] = c.model.alt().components();
                    if !matches!(c.model.alt(), AlternativeSpec::TwoPoint { .. }) {
                        return Err(CliError::Config(
                            "study2 needs a two_point alternative".into(),
                        ));
                    }
                    (
                        Study2Template {
                            pi0: c.model.pi0(),
                            mu_minus: minus.center,
                            mu_plus: plus.center,
                        },
                        c.severity,
                    )
                }
                None => (Study2Template::default(), SeveritySpec::SQUARED),
            };
            let grid = grid.unwrap_or_else(default_pi11_grid);
            let rows = run_study2(alpha, &grid, template, spec).map_err(CliError::from_lib)?;
            emit(&out, &study2_csv(&rows))
        }
        Command::Simulate {
            config,
            m,
            reps,
            seed,
            out,
        } => {
            let c = read_config(&config)?;
            let samples = (0..reps as u64)
                .map(|r| sample(&c.model, m, seed, r))
                .collect::<Result<Vec<_>, _>>()
                .map_err(CliError::from_lib)?;
            emit(&out, &samples_csv(&samples))
        }
        Command::Verify { budget, seed } => {
            let budget = Budget::parse(&budget).ok_or_else(|| {
                CliError::Usage(format!("--budget must be small or full, got `{budget}`"))
            })?;
            let report = verify_suite(budget, seed);
            println!("{report}");
            if report.all_passed() {
                Ok(())
            } else {
                Err(CliError::Numerical("verification checks failed".into()))
            }
        }
    }
}

fn configure_threads() {
    let threads = std::env::var("SEVFDR_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        // Fails only if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    configure_threads();
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("sevfdr: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_POINT: &str = "\
# study 2
model.pi0 = 0.8
model.alt = two_point
model.pi11 = 0.5
model.mu_minus = -3
model.mu_plus = 4   # trailing comment
severity.kind = power
severity.power = 2
";

    #[test]
    fn config_round_trip() {
        let c = parse_config(TWO_POINT).unwrap();
        assert_eq!(c.model, TwoGroupsModel::study2(0.5).unwrap());
        assert_eq!(c.severity, SeveritySpec::SQUARED);

        let mix = "model.pi0=0.95\nmodel.alt=gaussian_mixture\nmodel.pi11=0.2\nmodel.mu_minus=-1.5\nmodel.mu_plus=1\nmodel.tau=0.5\nseverity.kind=constant\n";
        let c = parse_config(mix).unwrap();
        assert_eq!(c.model, TwoGroupsModel::study1());
        assert_eq!(c.severity, SeveritySpec::Constant);
    }

    #[test]
    fn config_errors() {
        for bad in [
            "model.pi0 = 0.8\n",
            &TWO_POINT.replace("model.pi0 = 0.8", "model.pi0 = 1.5"),
            &TWO_POINT.replace("model.pi0 = 0.8", "model.pi0 = abc"),
            &format!("{TWO_POINT}model.colour = red\n"),
            &format!("{TWO_POINT}model.pi0 = 0.7\n"),
            &TWO_POINT.replace("severity.power = 2", "severity.power = -1"),
            &TWO_POINT.replace("two_point", "three_point"),
            &format!("{TWO_POINT}model.tau = 0.5\n"),
            "just some words\n",
        ] {
            let err = parse_config(bad).unwrap_err();
            assert_eq!(err.exit_code(), EXIT_CONFIG, "{bad}");
        }
        let err = parse_config(&format!("{TWO_POINT}oops\n")).unwrap_err();
        assert!(err.to_string().contains("line 9"), "{err}");
    }

    #[test]
    fn data_parsing() {
        assert_eq!(
            parse_data("# c\nx\n1.5\n-2\n\n3e-1\n").unwrap(),
            vec![1.5, -2.0, 0.3]
        );
        let err = parse_data("x\n1\nfoo\n").unwrap_err();
        assert_eq!(err.exit_code(), EXIT_DATA);
        assert!(err.to_string().contains("line 3"));
        assert!(parse_data("").is_err());
        assert!(parse_data("x\n").is_err());
        assert!(parse_data("y\n1\n").is_err());
        assert!(parse_data("x\nnan\n").is_err());
    }

    #[test]
    fn float_format() {
        assert_eq!(fmt_float(0.05), "0.05");
        assert_eq!(fmt_float(-1.25), "-1.25");
        assert_eq!(fmt_float(75.0), "75");
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_float(1e-40), "1e-40");
        assert_eq!(fmt_float(123456789012345.0), "1.23456789012e14");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
        assert_eq!(fmt_float(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!("inf".parse::<f64>().unwrap(), f64::INFINITY);
    }

    #[test]
    fn study2_csv_parses_back() {
        let rows = vec![Study2Row {
            pi11: 0.05,
            procedure: Procedure::PvalueOracle,
            c_l: f64::NEG_INFINITY,
            c_u: 2.5,
            mfdr_star: 0.1,
            mfnr: 0.2,
            mfnr_star: 1.0 / 3.0,
        }];
        let text = study2_csv(&rows);
        let back = parse_study2_csv(&text).unwrap();
        assert_eq!(back[0].procedure, Procedure::PvalueOracle);
        assert_eq!(back[0].c_l, f64::NEG_INFINITY);
        assert_eq!(study2_csv(&back), text);
        assert!(parse_study2_csv("pi11,procedure\n").is_err());
    }
}
