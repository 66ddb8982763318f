//! Sweeps over `q` for fixed `(p, d)`, with an append-only JSON-lines cache.
//!
//! Every candidate prime `q = -1 mod p` up to `q_max` goes through
//! [`certify_freeness`]; its record (pass or fail) carries enough facts to
//! re-derive the verdict. Candidates run on a rayon pool and are merged by
//! `q`, so the output does not depend on the worker count.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::arith::{self, kronecker};
use crate::criteria::{certify_freeness, FamilyFacts, FreenessReport, Reason, UnitMode, Verdict};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("p = {0} must be a prime >= 5")]
    BadPrime(i64),
    #[error("d = {0} must be a positive squarefree integer")]
    BadD(i64),
    #[error("cache {path}: {source}")]
    Cache { path: PathBuf, source: io::Error },
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// One persisted line of the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub schema_version: u32,
    pub p: i64,
    pub q: i64,
    pub d: i64,
    pub verdict: Verdict,
    #[serde(default)]
    pub rank: Option<u32>,
    pub facts: BTreeMap<String, Value>,
    pub tool_version: String,
    /// Fields written by other versions, kept as they were read.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl ScanRecord {
    pub fn from_report(report: &FreenessReport) -> Self {
        let mut facts = match report.facts.as_ref().map(serde_json::to_value) {
            Some(Ok(Value::Object(map))) => map.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        facts.insert("reasons".into(), serde_json::to_value(&report.reasons).expect("reasons serialize"));
        ScanRecord {
            schema_version: SCHEMA_VERSION,
            p: report.p,
            q: report.q,
            d: report.d,
            verdict: report.verdict,
            rank: report.rank,
            facts,
            tool_version: TOOL_VERSION.to_string(),
            extra: BTreeMap::new(),
        }
    }

    fn key(&self) -> (u32, &str, i64, i64, i64) {
        (self.schema_version, &self.tool_version, self.p, self.q, self.d)
    }

    /// The stored reasons.
    pub fn reasons(&self) -> Option<Vec<Reason>> {
        serde_json::from_value(self.facts.get("reasons")?.clone()).ok()
    }

    /// Recomputes the verdict from the stored facts alone; `None` when the
    /// facts do not parse.
    pub fn rederive_verdict(&self) -> Option<Verdict> {
        let reasons = self.reasons()?;
        if reasons.iter().any(|r| matches!(r, Reason::InvalidParameters { .. })) {
            return Some(Verdict::NotCertified);
        }
        let mut map = self.facts.clone();
        map.remove("reasons");
        let facts: FamilyFacts = serde_json::from_value(Value::Object(map.into_iter().collect())).ok()?;
        let failures = facts.failures();
        if failures != reasons || facts.table_conditions != facts.meets_table_conditions() {
            return None;
        }
        Some(if failures.is_empty() { Verdict::CertifiedFree } else { Verdict::NotCertified })
    }
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub p: i64,
    pub d: i64,
    pub q_max: u64,
    /// Worker count; `None` uses the global rayon pool.
    pub jobs: Option<usize>,
    pub cache: Option<PathBuf>,
    pub mode: UnitMode,
}

impl ScanConfig {
    pub fn new(p: i64, d: i64, q_max: u64) -> Self {
        ScanConfig { p, d, q_max, jobs: None, cache: None, mode: UnitMode::Residue }
    }
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub p: i64,
    pub d: i64,
    pub q_max: u64,
    /// Every candidate's record, ascending in `q`.
    pub records: Vec<ScanRecord>,
    pub reused: usize,
    pub computed: usize,
    /// Cache lines that were skipped, with line numbers.
    pub warnings: Vec<String>,
}

impl ScanOutcome {
    /// The certified `q`, ascending.
    pub fn certified(&self) -> Vec<u64> {
        self.records
            .iter()
            .filter(|r| r.verdict == Verdict::CertifiedFree)
            .map(|r| r.q as u64)
            .collect()
    }

    /// The `q` meeting the published table's conditions, ascending.
    pub fn table_row(&self) -> Vec<u64> {
        self.records
            .iter()
            .filter(|r| r.facts.get("table_conditions") == Some(&Value::Bool(true)))
            .map(|r| r.q as u64)
            .collect()
    }
}

/// Primes `q <= q_max` with `q = -1 mod p`.
pub fn candidates(p: u64, q_max: u64) -> Vec<u64> {
    (1..)
        .map(|k| k * p - 1)
        .take_while(|&q| q <= q_max)
        .filter(|&q| arith::is_prime(q))
        .collect()
}

fn check_inputs(p: i64, d: i64) -> Result<(), ScanError> {
    if p < 5 || !arith::is_prime(p as u64) {
        return Err(ScanError::BadPrime(p));
    }
    if d <= 0 || !arith::is_squarefree(d) {
        return Err(ScanError::BadD(d));
    }
    Ok(())
}

fn read_cache(path: &PathBuf, warnings: &mut Vec<String>) -> Result<Vec<ScanRecord>, ScanError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => return Err(ScanError::Cache { path: path.clone(), source }),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).split(b'\n').enumerate() {
        let line = line.map_err(|source| ScanError::Cache { path: path.clone(), source })?;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let parsed = std::str::from_utf8(&line)
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str::<ScanRecord>(s).map_err(|e| e.to_string()));
        match parsed {
            Ok(rec) if rec.rederive_verdict() == Some(rec.verdict) => out.push(rec),
            Ok(_) => warnings.push(format!("{}:{}: facts do not support the stored verdict", path.display(), i + 1)),
            Err(e) => warnings.push(format!("{}:{}: {e}", path.display(), i + 1)),
        }
    }
    Ok(out)
}

/// Evaluates every candidate and returns the records sorted by `q`.
pub fn scan_q(config: &ScanConfig) -> Result<ScanOutcome, ScanError> {
    check_inputs(config.p, config.d)?;
    let (p, d) = (config.p, config.d);
    let mut warnings = Vec::new();

    let mut known: HashMap<u64, ScanRecord> = HashMap::new();
    if let Some(path) = &config.cache {
        for rec in read_cache(path, &mut warnings)? {
            if rec.key() == (SCHEMA_VERSION, TOOL_VERSION, p, rec.q, d) && rec.q > 0 {
                known.entry(rec.q as u64).or_insert(rec);
            }
        }
    }

    let all = candidates(p as u64, config.q_max);
    let todo: Vec<u64> = all.iter().copied().filter(|q| !known.contains_key(q)).collect();
    let writer = match &config.cache {
        Some(path) => {
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|source| ScanError::Cache { path: path.clone(), source })?;
            Some(Mutex::new(file))
        }
        None => None,
    };

    let evaluate = |q: u64| -> Result<ScanRecord, ScanError> {
        let rec = ScanRecord::from_report(&certify_freeness(p, q as i64, d, config.mode));
        if let (Some(w), Some(path)) = (&writer, &config.cache) {
            let mut line = serde_json::to_string(&rec).expect("records serialize");
            line.push('\n');
            let mut file = w.lock().expect("cache writer poisoned");
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|source| ScanError::Cache { path: path.clone(), source })?;
        }
        Ok(rec)
    };
    let fresh: Vec<ScanRecord> = match config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()?
            .install(|| todo.par_iter().map(|&q| evaluate(q)).collect::<Result<_, _>>())?,
        None => todo.par_iter().map(|&q| evaluate(q)).collect::<Result<_, _>>()?,
    };

    let computed = fresh.len();
    let reused = all.len() - computed;
    for rec in fresh {
        known.insert(rec.q as u64, rec);
    }
    let records = all.iter().map(|q| known.remove(q).expect("every candidate evaluated")).collect();
    Ok(ScanOutcome { p, d, q_max: config.q_max, records, reused, computed, warnings })
}

/// Checks the congruence conditions every listed `q` must meet; returns one
/// message per violation. `certified` adds `q != -1 mod p^2` (that is,
/// `s = 1`), which table rows do not require.
pub fn validate_row(p: u64, d: i64, row: &[u64], certified: bool) -> Vec<String> {
    let mut out = Vec::new();
    for &q in row {
        if (q + 1) % p != 0 {
            out.push(format!("q = {q} is not -1 mod {p}"));
        }
        if certified && (q + 1) % (p * p) == 0 {
            out.push(format!("q = {q} is -1 mod {p}^2"));
        }
        if kronecker(-d, q as i64) != -1 {
            out.push(format!("-{d} is not a non-residue mod {q}"));
        }
    }
    if row.windows(2).any(|w| w[0] >= w[1]) {
        out.push("row is not strictly ascending".into());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub p: i64,
    /// `q` with `K` p-rational and `v_p(eps^2 - 1) = v_q(eps^2 - 1) = 1`.
    pub q: Vec<u64>,
    /// The subset of all candidates certified free (adds `s = 1`).
    pub certified: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub schema_version: u32,
    pub d: i64,
    pub q_max: u64,
    pub rows: Vec<TableRow>,
}

/// One row per `p`; a failing row records its error and the rest continue.
/// Rows list the `q` meeting [`FamilyFacts::meets_table_conditions`], with
/// the certified subset alongside.
pub fn reproduce_table(p_list: &[i64], q_max: u64, d: i64, jobs: Option<usize>) -> Table {
    let rows = p_list
        .iter()
        .map(|&p| {
            let config = ScanConfig { jobs, ..ScanConfig::new(p, d, q_max) };
            match scan_q(&config) {
                Ok(outcome) => TableRow { p, q: outcome.table_row(), certified: outcome.certified(), error: None },
                Err(e) => TableRow { p, q: Vec::new(), certified: Vec::new(), error: Some(e.to_string()) },
            }
        })
        .collect();
    Table { schema_version: SCHEMA_VERSION, d, q_max, rows }
}

fn join(qs: &[u64]) -> String {
    qs.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

/// `p = 7, d = 2, q <= 500: {13,167,181,223,461}`
pub fn render_row_text(p: i64, d: i64, q_max: u64, qs: &[u64]) -> String {
    format!("p = {p}, d = {d}, q <= {q_max}: {{{}}}\n", join(qs))
}

pub fn render_row_csv(p: i64, qs: &[u64]) -> String {
    let mut out = String::from("p,q\n");
    for q in qs {
        let _ = writeln!(out, "{p},{q}");
    }
    out
}

pub fn render_table_text(table: &Table) -> String {
    let mut out = format!("d = {}, q <= {}\n", table.d, table.q_max);
    for row in &table.rows {
        match &row.error {
            Some(e) => {
                let _ = writeln!(out, "{:>5} | error: {e}", row.p);
            }
            None => {
                let _ = writeln!(out, "{:>5} | {{{}}}", row.p, join(&row.q));
                let _ = writeln!(out, "{:>5} | certified: {{{}}}", "", join(&row.certified));
            }
        }
    }
    out
}

/// One line per `q` in either list, flagging membership of each.
pub fn render_table_csv(table: &Table) -> String {
    let mut out = String::from("p,q,table,certified\n");
    for row in &table.rows {
        let mut qs: Vec<u64> = row.q.iter().chain(&row.certified).copied().collect();
        qs.sort_unstable();
        qs.dedup();
        for q in qs {
            let _ = writeln!(out, "{},{q},{},{}", row.p, row.q.contains(&q), row.certified.contains(&q));
        }
    }
    out
}
