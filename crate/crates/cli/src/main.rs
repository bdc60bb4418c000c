/// `println!` that ignores a closed stdout, so piping into `head` is quiet.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

mod corpus;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pbo_core::harness::{
    check_behavior_uniqueness, check_diamond, check_leak_freedom, reduction_graph, run, Report, Scheduler, Semantics,
    Verdict, DEFAULT_BUDGET,
};
use pbo_core::syntax::{parse_program, Program, Span};
use pbo_core::types::{type_check, TypeError};

#[derive(Parser)]
#[command(name = "pbo", version, about = "Checker, interpreters and metatheory harness for pure borrowing programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sem {
    Mut,
    Den,
}

impl From<Sem> for Semantics {
    fn from(s: Sem) -> Self {
        match s {
            Sem::Mut => Semantics::Mut,
            Sem::Den => Semantics::Den,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Random,
    First,
    Last,
    RoundRobin,
    Scripted,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    All,
    Positive,
    Negative,
    Metatheory,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and type-check a program, printing diagnostics as JSON.
    Check { file: PathBuf },
    /// Run a program under one semantics and print its outcome.
    Run {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "mut")]
        semantics: Sem,
        #[arg(long, value_enum, default_value = "random")]
        scheduler: Strategy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated redex indices for the scripted scheduler.
        #[arg(long, value_delimiter = ',')]
        script: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        /// Write the step trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long = "unsafe")]
        skip_check: bool,
    },
    /// Check the diamond property of the denotational semantics.
    Confluence {
        file: PathBuf,
        #[arg(long, default_value_t = 20)]
        depth: usize,
        #[arg(long = "unsafe")]
        skip_check: bool,
    },
    /// Compare returned integers across schedules and both semantics.
    Uniq {
        file: PathBuf,
        #[arg(long, default_value_t = 100)]
        schedules: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long = "unsafe")]
        skip_check: bool,
    },
    /// Look for memory left over at normal forms of the mutative semantics.
    Leak {
        file: PathBuf,
        #[arg(long, default_value_t = 100)]
        schedules: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long = "unsafe")]
        skip_check: bool,
    },
    /// Print the reduction graph up to a depth as JSON.
    Graph {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "den")]
        semantics: Sem,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long = "unsafe")]
        skip_check: bool,
    },
    /// Run the expectations recorded in a corpus manifest.
    Corpus {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        /// Only entries whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value = "corpus")]
        dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Serialize)]
struct Diagnostic {
    code: String,
    message: String,
    span: Span,
}

impl From<&TypeError> for Diagnostic {
    fn from(e: &TypeError) -> Self {
        Diagnostic { code: e.kind.code().into(), message: e.message.clone(), span: e.span }
    }
}

enum LoadError {
    Io(String),
    Parse(Vec<Diagnostic>),
    Type(Vec<Diagnostic>),
}

impl LoadError {
    fn exit(self) -> ExitCode {
        match self {
            LoadError::Io(m) => {
                eprintln!("pbo: {m}");
                ExitCode::from(2)
            }
            LoadError::Parse(d) => {
                out!("{}", to_json(&d));
                ExitCode::from(2)
            }
            LoadError::Type(d) => {
                out!("{}", to_json(&d));
                ExitCode::from(1)
            }
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("values serialize")
}

pub(crate) fn parse_file(path: &Path) -> Result<Program, LoadError> {
    let bytes = fs::read(path).map_err(|e| LoadError::Io(format!("{}: {e}", path.display())))?;
    let src = String::from_utf8(bytes).map_err(|_| {
        LoadError::Parse(vec![Diagnostic {
            code: "ParseError".into(),
            message: "source is not valid UTF-8".into(),
            span: Span::default(),
        }])
    })?;
    parse_program(&src).map_err(|e| {
        LoadError::Parse(vec![Diagnostic { code: "ParseError".into(), message: e.message.clone(), span: e.span }])
    })
}

fn load(path: &Path, skip_check: bool) -> Result<Program, LoadError> {
    let p = parse_file(path)?;
    if !skip_check {
        type_check(&p).map_err(|es| LoadError::Type(es.iter().map(Diagnostic::from).collect()))?;
    }
    Ok(p)
}

fn program_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn emit(report: &Report) -> ExitCode {
    out!("{}", to_json(report));
    match report.verdict {
        Verdict::Pass => ExitCode::SUCCESS,
        Verdict::Fail => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Check { file } => match load(&file, false) {
            Ok(_) => {
                out!("[]");
                ExitCode::SUCCESS
            }
            Err(e) => e.exit(),
        },
        Cmd::Run { file, semantics, scheduler, seed, script, budget, trace, json, skip_check } => {
            let p = match load(&file, skip_check) {
                Ok(p) => p,
                Err(e) => return e.exit(),
            };
            let sched = match scheduler {
                Strategy::Random => Scheduler::SeededRandom(seed),
                Strategy::First => Scheduler::FirstRedex,
                Strategy::Last => Scheduler::LastRedex,
                Strategy::RoundRobin => Scheduler::RoundRobin,
                Strategy::Scripted => Scheduler::Scripted(script),
            };
            let (outcome, steps) = run(&p, semantics.into(), &sched, budget);
            if let Some(path) = trace {
                let write = || -> std::io::Result<()> {
                    let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
                    for s in &steps {
                        writeln!(f, "{}", serde_json::to_string(s).expect("trace serializes"))?;
                    }
                    f.flush()
                };
                if let Err(e) = write() {
                    eprintln!("pbo: {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
            if json {
                out!("{}", serde_json::to_string(&outcome).expect("outcome serializes"));
            } else {
                out!("{outcome}");
            }
            ExitCode::SUCCESS
        }
        Cmd::Confluence { file, depth, skip_check } => match load(&file, skip_check) {
            Ok(p) => emit(&check_diamond(&p, depth).report(&program_name(&file))),
            Err(e) => e.exit(),
        },
        Cmd::Uniq { file, schedules, budget, skip_check } => match load(&file, skip_check) {
            Ok(p) => emit(&check_behavior_uniqueness(&p, schedules, budget).report(&program_name(&file))),
            Err(e) => e.exit(),
        },
        Cmd::Leak { file, schedules, budget, skip_check } => match load(&file, skip_check) {
            Ok(p) => emit(&check_leak_freedom(&p, schedules, budget).report(&program_name(&file))),
            Err(e) => e.exit(),
        },
        Cmd::Graph { file, semantics, depth, skip_check } => {
            let p = match load(&file, skip_check) {
                Ok(p) => p,
                Err(e) => return e.exit(),
            };
            match reduction_graph(&p, semantics.into(), depth) {
                Ok(g) => {
                    out!("{}", to_json(&g));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("pbo: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Cmd::Corpus { suite, filter, dir, json } => corpus::run_corpus(&dir, suite, filter.as_deref(), json),
    }
}
