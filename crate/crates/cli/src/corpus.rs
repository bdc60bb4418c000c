//! Corpus manifests: one entry per program with the verdicts it is expected
//! to produce.

use std::path::Path;
use std::process::ExitCode;

use serde::{Deserialize, Serialize};

use pbo_core::harness::{
    check_behavior_uniqueness, check_diamond, check_leak_freedom, run, Outcome, Scheduler, Semantics, DEFAULT_BUDGET,
};
use pbo_core::types::type_check;

use crate::{parse_file, Suite};

#[derive(Debug, Deserialize)]
pub struct Manifest {
    #[serde(rename = "entry", default)]
    pub entries: Vec<Entry>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Positive,
    Negative,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub name: String,
    pub suite: Kind,
    /// Error class of the first diagnostic, for negative entries.
    pub error: Option<String>,
    pub returns: Option<i64>,
    /// Accepted outcome kinds when the program does not return an integer.
    pub outcome: Option<Vec<String>>,
    pub budget: Option<usize>,
    pub confluence_depth: Option<usize>,
    pub leak_schedules: Option<usize>,
    /// Number of cells expected to remain in every run; zero by default.
    pub leak_residue: Option<usize>,
    pub uniq_schedules: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Line {
    name: String,
    passed: bool,
    details: Vec<String>,
}

fn outcome_kind(o: &Outcome) -> &'static str {
    match o {
        Outcome::ReturnedInt(_) => "ReturnedInt",
        Outcome::NormalValue(_) => "NormalValue",
        Outcome::BlackHole(_) => "BlackHole",
        Outcome::BudgetExhausted(_) => "BudgetExhausted",
        Outcome::Stuck(_) => "Stuck",
        Outcome::SeparationViolation(_) => "SeparationViolation",
    }
}

fn evaluate(dir: &Path, e: &Entry, suite: Suite) -> Line {
    let mut details = Vec::new();
    let mut passed = true;
    let mut note = |ok: bool, what: String| {
        passed &= ok;
        details.push(format!("{} {what}", if ok { "ok" } else { "FAILED" }));
    };
    let path = dir.join(format!("{}.pbo", e.name));
    let program = match parse_file(&path) {
        Ok(p) => p,
        Err(_) => {
            note(false, format!("parse {}", path.display()));
            return Line { name: e.name.clone(), passed, details };
        }
    };
    let basic = matches!(
        (&suite, &e.suite),
        (Suite::All, _) | (Suite::Positive, Kind::Positive) | (Suite::Negative, Kind::Negative)
    );
    let meta = matches!(suite, Suite::All | Suite::Metatheory);
    let budget = e.budget.unwrap_or(DEFAULT_BUDGET);
    if basic {
        let checked = type_check(&program);
        match (&e.suite, &checked) {
            (Kind::Positive, Ok(t)) => note(true, format!("check : {}", t.ty)),
            (Kind::Positive, Err(es)) => note(false, format!("check: {}", es[0])),
            (Kind::Negative, Ok(_)) => note(false, "check: accepted".into()),
            (Kind::Negative, Err(es)) => {
                let got = es[0].kind.code();
                let want = e.error.as_deref().unwrap_or("");
                note(got == want, format!("check: {got} (expected {want})"));
            }
        }
        if e.returns.is_some() || e.outcome.is_some() {
            for sem in [Semantics::Mut, Semantics::Den] {
                let (o, _) = run(&program, sem, &Scheduler::SeededRandom(0), budget);
                let ok = match (&o, e.returns, &e.outcome) {
                    (Outcome::ReturnedInt(n), Some(want), _) => *n == want,
                    (o, None, Some(kinds)) => kinds.iter().any(|k| k == outcome_kind(o)),
                    _ => false,
                };
                note(ok, format!("run {sem}: {o}"));
            }
        }
    }
    if meta {
        if let Some(depth) = e.confluence_depth {
            let r = check_diamond(&program, depth);
            note(r.passed(), format!("confluence depth {depth}: {} nodes, {} violations", r.stats.nodes, r.violations.len()));
        }
        if let Some(n) = e.leak_schedules {
            let r = check_leak_freedom(&program, n, budget);
            let want = e.leak_residue.unwrap_or(0);
            let ok = if want == 0 {
                r.passed()
            } else {
                r.normal_forms == n && r.residues.len() == n && r.residues.iter().all(|res| res.cells.len() == want)
            };
            note(ok, format!("leak {n} schedules: {} runs with residue", r.residues.len()));
        }
        if let Some(n) = e.uniq_schedules {
            let r = check_behavior_uniqueness(&program, n, budget);
            let ok = r.passed() && e.returns.is_none_or(|v| r.values.len() == 1 && r.values.contains(&v));
            note(ok, format!("uniq {n} schedules: values {:?}", r.values));
        }
    }
    Line { name: e.name.clone(), passed, details }
}

pub fn run_corpus(dir: &Path, suite: Suite, filter: Option<&str>, json: bool) -> ExitCode {
    let manifest_path = dir.join("manifest.toml");
    let manifest: Manifest = match std::fs::read_to_string(&manifest_path).map_err(|e| e.to_string()).and_then(|s| {
        toml::from_str(&s).map_err(|e| e.to_string())
    }) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("pbo: {}: {e}", manifest_path.display());
            return ExitCode::from(2);
        }
    };
    let selected: Vec<&Entry> = manifest
        .entries
        .iter()
        .filter(|e| filter.is_none_or(|f| e.name.contains(f)))
        .filter(|e| match suite {
            Suite::All => true,
            Suite::Positive => matches!(e.suite, Kind::Positive),
            Suite::Negative => matches!(e.suite, Kind::Negative),
            Suite::Metatheory => e.confluence_depth.is_some() || e.leak_schedules.is_some() || e.uniq_schedules.is_some(),
        })
        .collect();
    let mut lines: Vec<Line> = std::thread::scope(|s| {
        let handles: Vec<_> = selected.iter().map(|e| s.spawn(move || evaluate(dir, e, suite))).collect();
        handles.into_iter().map(|h| h.join().expect("corpus worker panicked")).collect()
    });
    lines.sort_by(|a, b| a.name.cmp(&b.name));
    let failed = lines.iter().filter(|l| !l.passed).count();
    if json {
        out!("{}", serde_json::to_string_pretty(&lines).expect("lines serialize"));
    } else {
        for l in &lines {
            out!("{:<4}  {:<22}  {}", if l.passed { "PASS" } else { "FAIL" }, l.name, l.details.join("; "));
        }
        out!("{} entries, {} failed", lines.len(), failed);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
