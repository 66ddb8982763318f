//! Command-line front end. [`run`] parses arguments, dispatches, writes to
//! the given streams and returns the process exit status: 0 on an answer
//! (a `not_certified` verdict included), 2 on invalid input, 1 on internal
//! failure.

use std::ffi::OsString;
use std::io::{IsTerminal, Write};
use std::path::PathBuf;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::classno;
use crate::criteria::{self, FreenessReport, PRationalityReport, PratError, UnitMode, Verdict};
use crate::quadratic::{self, FundUnit};
use crate::scan::{self, ScanConfig, ScanError, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "prational", version, about = "p-rationality checks and freeness certificates")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Certify the freeness hypotheses for K = Q(sqrt(pq), sqrt(-d)).
    Check {
        #[arg(long)]
        p: i64,
        #[arg(long)]
        q: i64,
        #[arg(long)]
        d: i64,
        /// Reduce unit coefficients modulo p^3 and q^3 instead of computing them in full.
        #[arg(long)]
        residue: bool,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// List the certified q = -1 mod p up to q_max.
    Scan {
        #[arg(long)]
        p: i64,
        #[arg(long)]
        d: i64,
        #[arg(long)]
        q_max: u64,
        #[arg(long)]
        jobs: Option<usize>,
        /// Append-only JSON-lines cache; existing records are reused.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Compute fundamental units in full instead of modulo p^3 and q^3.
        #[arg(long)]
        exact: bool,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Per p: the q with K p-rational and v(eps^2 - 1) = 1 above p and q, plus the certified subset.
    Table {
        #[arg(long, value_delimiter = ',', required = true)]
        p_list: Vec<i64>,
        #[arg(long)]
        d: i64,
        #[arg(long)]
        q_max: u64,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Quadratic-field utilities.
    #[command(subcommand)]
    Quad(QuadCmd),
}

#[derive(Debug, Subcommand)]
enum QuadCmd {
    /// Fundamental unit of Q(sqrt(m)).
    Unit {
        #[arg(long, allow_negative_numbers = true)]
        m: i64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Class number of a fundamental discriminant.
    Classno {
        #[arg(long, allow_negative_numbers = true)]
        disc: i64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// p-rationality of Q(sqrt(m)), or of Q(sqrt(m), sqrt(m2)) when --m2 is given.
    Prat {
        #[arg(long, allow_negative_numbers = true)]
        m: i64,
        #[arg(long, allow_negative_numbers = true)]
        m2: Option<i64>,
        #[arg(long)]
        p: u64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
}

/// ANSI styling for text output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Style {
    pub color: bool,
}

impl Style {
    /// Color only on a terminal and when `NO_COLOR` is unset or empty.
    pub fn from_env() -> Self {
        let no_color = std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty());
        Style { color: !no_color && std::io::stdout().is_terminal() }
    }

    fn paint(&self, s: &str, code: &str) -> String {
        if self.color {
            format!("\x1b[{code}m{s}\x1b[0m")
        } else {
            s.to_string()
        }
    }

    fn good(&self, s: &str) -> String {
        self.paint(s, "1;32")
    }

    fn bad(&self, s: &str) -> String {
        self.paint(s, "1;31")
    }
}

enum Failure {
    Input(String),
    Internal(String),
}

impl From<ScanError> for Failure {
    fn from(e: ScanError) -> Self {
        match e {
            ScanError::BadPrime(_) | ScanError::BadD(_) => Failure::Input(e.to_string()),
            ScanError::Cache { .. } | ScanError::Pool(_) => Failure::Internal(e.to_string()),
        }
    }
}

impl From<PratError> for Failure {
    fn from(e: PratError) -> Self {
        Failure::Input(e.to_string())
    }
}

/// Entry point used by the binary, with styling taken from the environment.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_styled(args, out, err, Style::from_env())
}

pub fn run_styled<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write, style: Style) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let mut rendered = e.render().to_string();
            if code == 2 && !rendered.contains("Usage:") {
                rendered.push_str(&format!("\n{}\n", Cli::command().render_usage()));
            }
            let _ = if code == 0 { out.write_all(rendered.as_bytes()) } else { err.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    let result = dispatch(cli.cmd, style, err).and_then(|text| {
        out.write_all(text.as_bytes()).map_err(|e| Failure::Internal(e.to_string()))
    });
    match result {
        Ok(()) => 0,
        Err(Failure::Input(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Internal(msg)) => {
            let _ = writeln!(err, "internal error: {msg}");
            1
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_unsupported(what: &str) -> Failure {
    Failure::Input(format!("--format csv is not available for {what}"))
}

fn dispatch(cmd: Cmd, style: Style, err: &mut dyn Write) -> Result<String, Failure> {
    match cmd {
        Cmd::Check { p, q, d, residue, format } => {
            let mode = if residue { UnitMode::Residue } else { UnitMode::Exact };
            let report = criteria::certify_freeness(p, q, d, mode);
            if report.is_invalid_input() {
                let msgs: Vec<String> = report.reasons.iter().map(ToString::to_string).collect();
                return Err(Failure::Input(msgs.join("; ")));
            }
            match format {
                OutputFormat::Text => Ok(render_report_text(&report, style)),
                OutputFormat::Json => Ok(to_json(&report)),
                OutputFormat::Csv => Err(csv_unsupported("check")),
            }
        }
        Cmd::Scan { p, d, q_max, jobs, cache, exact, format } => {
            let config = ScanConfig {
                jobs,
                cache,
                mode: if exact { UnitMode::Exact } else { UnitMode::Residue },
                ..ScanConfig::new(p, d, q_max)
            };
            let outcome = scan::scan_q(&config)?;
            for w in &outcome.warnings {
                let _ = writeln!(err, "warning: skipped cache line {w}");
            }
            let qs = outcome.certified();
            Ok(match format {
                OutputFormat::Text => scan::render_row_text(p, d, q_max, &qs),
                OutputFormat::Csv => scan::render_row_csv(p, &qs),
                OutputFormat::Json => to_json(&json!({
                    "schema_version": SCHEMA_VERSION,
                    "p": p,
                    "d": d,
                    "q_max": q_max,
                    "candidates": outcome.records.len(),
                    "q": qs,
                })),
            })
        }
        Cmd::Table { p_list, d, q_max, jobs, format } => {
            let table = scan::reproduce_table(&p_list, q_max, d, jobs);
            let text = match format {
                OutputFormat::Text => scan::render_table_text(&table),
                OutputFormat::Csv => scan::render_table_csv(&table),
                OutputFormat::Json => to_json(&table),
            };
            let failed: Vec<String> =
                table.rows.iter().filter_map(|r| r.error.as_ref().map(|e| format!("row p = {}: {e}", r.p))).collect();
            if failed.is_empty() {
                Ok(text)
            } else {
                let _ = err.write_all(text.as_bytes());
                Err(Failure::Input(failed.join("; ")))
            }
        }
        Cmd::Quad(QuadCmd::Unit { m, format }) => {
            let field = quadratic::make_field(m).map_err(|e| Failure::Input(e.to_string()))?;
            let unit = quadratic::fundamental_unit(&field).map_err(|e| Failure::Input(e.to_string()))?;
            match format {
                OutputFormat::Text => Ok(format!("{unit}\n")),
                OutputFormat::Json => Ok(to_json(&unit_json(&unit))),
                OutputFormat::Csv => Err(csv_unsupported("quad unit")),
            }
        }
        Cmd::Quad(QuadCmd::Classno { disc, format }) => {
            let r = classno::class_number(disc).map_err(|e| Failure::Input(e.to_string()))?;
            match format {
                OutputFormat::Text => Ok(match r.h_plus {
                    Some(hp) => format!("h({disc}) = {}, h+ = {hp}\n", r.h),
                    None => format!("h({disc}) = {}\n", r.h),
                }),
                OutputFormat::Json => Ok(to_json(&r)),
                OutputFormat::Csv => Err(csv_unsupported("quad classno")),
            }
        }
        Cmd::Quad(QuadCmd::Prat { m, m2, p, format }) => {
            let report = match m2 {
                Some(m2) => criteria::prat_biquad(m, m2, p, UnitMode::Exact)?,
                None => criteria::prat_quadratic(m, p, UnitMode::Exact)?,
            };
            match format {
                OutputFormat::Text => Ok(render_prat_text(&report, style)),
                OutputFormat::Json => Ok(to_json(&report)),
                OutputFormat::Csv => Err(csv_unsupported("quad prat")),
            }
        }
    }
}

/// JSON form of a fundamental unit; coefficients are decimal strings.
pub fn unit_json(unit: &FundUnit) -> Value {
    let e = &unit.elem;
    json!({
        "radicand": e.field().radicand(),
        "unit": e.to_string(),
        "x": e.x().to_string(),
        "y": e.y().to_string(),
        "den": e.den(),
        "norm": unit.unit_norm,
        "period": unit.period,
    })
}

/// Leaves of a JSON value as `(dotted.path, scalar)` pairs, in document order.
pub fn flatten_json(v: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(map) => {
                for (k, v) in map {
                    walk(&key(k), v, out);
                }
            }
            Value::Array(items) => {
                if items.is_empty() {
                    out.push((prefix.to_string(), "[]".into()));
                }
                for (i, v) in items.iter().enumerate() {
                    walk(&key(&i.to_string()), v, out);
                }
            }
            Value::String(s) => out.push((prefix.to_string(), s.clone())),
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut out = Vec::new();
    walk("", v, &mut out);
    out
}

/// A verdict line, the failed hypotheses as `# ` comments, then one
/// `key: value` line per JSON leaf.
pub fn render_report_text(report: &FreenessReport, style: Style) -> String {
    let verdict = match report.verdict {
        Verdict::CertifiedFree => style.good("CERTIFIED_FREE"),
        Verdict::NotCertified => style.bad("NOT_CERTIFIED"),
    };
    let rank = report.rank.map(|r| format!(" (rank {r})")).unwrap_or_default();
    let mut out = format!(
        "K = Q(sqrt({}), sqrt(-{})), p = {}: {verdict}{rank}\n",
        report.p * report.q,
        report.d,
        report.p
    );
    for r in &report.reasons {
        out.push_str(&format!("# {r}\n"));
    }
    let value = serde_json::to_value(report).expect("reports serialize");
    for (k, v) in flatten_json(&value) {
        out.push_str(&format!("{k}: {v}\n"));
    }
    out
}

pub fn render_prat_text(report: &PRationalityReport, style: Style) -> String {
    let name = match report.radicands.as_slice() {
        [m] => format!("Q(sqrt({m}))"),
        [a, b, _] => format!("Q(sqrt({a}), sqrt({b}))"),
        _ => unreachable!("one or three radicands"),
    };
    let verdict = if report.verdict {
        style.good(&format!("{}-rational", report.p))
    } else {
        style.bad(&format!("not {}-rational", report.p))
    };
    let mut out = format!("{name} is {verdict}\n");
    for (check, ok) in report.checks() {
        out.push_str(&format!("  [{}] {check}\n", if ok { "pass" } else { "FAIL" }));
    }
    for s in &report.subfields {
        if let Some(u) = s.unit.as_ref().and_then(|u| u.unit.as_ref()) {
            out.push_str(&format!("  fundamental unit of Q(sqrt({})): {u}\n", s.radicand));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let argv = std::iter::once("prational").chain(args.iter().copied());
        let code = run_styled(argv, &mut out, &mut err, Style::default());
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn check_worked_example() {
        let (code, out, _) = call(&["check", "--p", "7", "--q", "13", "--d", "2", "--format", "json"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["verdict"], "certified_free");
        assert_eq!(v["rank"], 2);
    }

    #[test]
    fn invalid_input_exits_two() {
        let (code, out, err) = call(&["check", "--p", "7", "--q", "14", "--d", "2"]);
        assert_eq!(code, 2);
        assert!(out.is_empty());
        assert!(err.contains("q must be an odd prime"), "{err}");
        assert_eq!(call(&["check", "--p", "7", "--q", "x", "--d", "2"]).0, 2);
        assert_eq!(call(&["check", "--bogus"]).0, 2);
        assert_eq!(call(&["quad", "classno", "--disc", "-12"]).0, 2);
    }

    #[test]
    fn not_certified_is_success() {
        let (code, out, _) = call(&["check", "--p", "5", "--q", "149", "--d", "2"]);
        assert_eq!(code, 0);
        assert!(out.contains("NOT_CERTIFIED"));
        assert!(out.contains("# s = 5, expected 1"));
    }

    #[test]
    fn quad_commands() {
        assert_eq!(call(&["quad", "unit", "--m", "91"]).1, "1574 + 165*sqrt(91), norm +1\n");
        assert_eq!(call(&["quad", "classno", "--disc", "-23"]).1, "h(-23) = 3\n");
        assert_eq!(call(&["quad", "classno", "--disc", "364"]).1, "h(364) = 2, h+ = 4\n");
        let (code, out, _) = call(&["quad", "prat", "--m", "-47", "--p", "5"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("Q(sqrt(-47)) is not 5-rational"));
        let (_, out, _) = call(&["quad", "prat", "--m", "91", "--m2", "-2", "--p", "7"]);
        assert!(out.starts_with("Q(sqrt(91), sqrt(-2)) is 7-rational"));
    }

    #[test]
    fn styling_is_opt_in() {
        let report = criteria::certify_freeness(7, 13, 2, UnitMode::Exact);
        assert!(!render_report_text(&report, Style::default()).contains('\x1b'));
        assert!(render_report_text(&report, Style { color: true }).contains("\x1b[1;32m"));
    }
}
