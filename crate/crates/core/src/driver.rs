//! Pipeline orchestration and reporting: parse, well-formedness, ANF,
//! shapes and instantiation, elaboration, checking, Horn splitting,
//! fixpoint and discharge of the concrete obligations.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Instant;

use thiserror::Error;

use crate::anf::normalize_program;
use crate::ast::{Name, Pred, Span};
use crate::elaborate::{self, ElabError, Elaborated};
use crate::infer::horn::{apply_vc, certify, split, HornClause, HornError};
use crate::infer::shape::{prepare, ShapeError};
use crate::infer::solve::{simplify, solve, Outcome};
use crate::infer::Kappas;
use crate::logic::{parse_vc_file, Vc, VcFileError};
use crate::smt::{Backend, SmtError, Verdict};
use crate::surface::{parse_program, Program, Qualifier, SurfaceError};
use crate::typecheck::{check_program, wf::wf_program, Checked, TypeError};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{0}")]
    Surface(#[from] SurfaceError),
    #[error("{0}")]
    VcFile(#[from] VcFileError),
    #[error("{0}")]
    Type(#[from] TypeError),
    #[error("{0}")]
    Shape(#[from] ShapeError),
    #[error("{0}")]
    Elab(#[from] ElabError),
    #[error("{0}")]
    Horn(#[from] HornError),
    #[error("{0}")]
    Smt(#[from] SmtError),
}

impl DriverError {
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::Smt(_) => 3,
            _ => 2,
        }
    }

    pub fn span(&self) -> Option<Span> {
        match self {
            DriverError::Surface(e) => Some(e.span()),
            _ => None,
        }
    }
}

/// Everything produced before the solver runs.
#[derive(Clone, Debug)]
pub struct Frontend {
    pub program: Program,
    pub elaborated: Elaborated,
    pub kappas: Kappas,
    pub checked: Checked,
    pub clauses: Vec<HornClause>,
}

pub fn frontend(src: &str, opts: elaborate::Options) -> Result<Frontend, DriverError> {
    let program = parse_program(src)?;
    wf_program(&program)?;
    let anf = normalize_program(&program);
    let mut kappas = Kappas::default();
    let prepared = prepare(&anf, &mut kappas)?;
    let elaborated = elaborate::elaborate(&prepared, opts)?;
    let checked = check_program(&elaborated, &program, &mut kappas)?;
    let mut clauses = Vec::new();
    for vc in &checked.vcs {
        for c in split(vc, &kappas)? {
            certify(&c)?;
            clauses.push(c);
        }
    }
    Ok(Frontend { program, elaborated, kappas, checked, clauses })
}

/// One discharged obligation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Obligation {
    pub name: String,
    pub span: Option<Span>,
    pub verdict: Verdict,
    pub millis: u64,
}

#[derive(Clone, Debug)]
pub struct DefReport {
    pub name: Name,
    pub span: Span,
    pub obligations: Vec<Obligation>,
}

impl DefReport {
    pub fn safe(&self) -> bool {
        self.obligations.iter().all(|o| o.verdict.is_valid())
    }

    pub fn failures(&self) -> impl Iterator<Item = &Obligation> {
        self.obligations.iter().filter(|o| !o.verdict.is_valid())
    }
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub front: Frontend,
    pub outcome: Outcome,
    pub defs: Vec<DefReport>,
}

impl Analysis {
    pub fn safe(&self) -> bool {
        self.defs.iter().all(DefReport::safe)
    }

    /// The clauses with the inferred solution substituted.
    pub fn solved_vcs(&self) -> Vec<Vc> {
        self.front.clauses.iter().map(|c| apply_vc(&c.vc, &self.front.kappas, &self.outcome.assignment)).collect()
    }
}

/// Records the wall-clock time of each query by VC name.
pub struct Timed<'a> {
    pub inner: &'a dyn Backend,
    pub millis: Mutex<HashMap<String, u64>>,
}

impl<'a> Timed<'a> {
    pub fn new(inner: &'a dyn Backend) -> Timed<'a> {
        Timed { inner, millis: Mutex::new(HashMap::new()) }
    }

    fn take(&self, name: &str) -> u64 {
        self.millis.lock().expect("timing table").get(name).copied().unwrap_or(0)
    }
}

impl Backend for Timed<'_> {
    fn check(&self, vc: &Vc) -> Result<Verdict, SmtError> {
        let t = Instant::now();
        let r = self.inner.check(vc);
        let ms = t.elapsed().as_millis() as u64;
        self.millis.lock().expect("timing table").insert(vc.name.clone(), ms);
        r
    }

    fn name(&self) -> String {
        self.inner.name()
    }
}

/// The definition a VC belongs to is the prefix of its name.
fn owner(vc: &str) -> &str {
    vc.split('.').next().unwrap_or(vc)
}

fn by_position(a: &Obligation, b: &Obligation) -> std::cmp::Ordering {
    let key = |o: &Obligation| o.span.map(|s| (s.line, s.col));
    key(a).cmp(&key(b)).then_with(|| a.name.cmp(&b.name))
}

/// Solve the unknowns and discharge the concrete clauses.
pub fn analyze(
    front: Frontend,
    quals: &[Qualifier],
    backend: &dyn Backend,
    jobs: usize,
) -> Result<Analysis, DriverError> {
    let timed = Timed::new(backend);
    let outcome = solve(&front.clauses, &front.kappas, quals, &timed, jobs)?;
    let mut defs: Vec<DefReport> = front
        .program
        .defs
        .iter()
        .map(|d| DefReport { name: d.name.clone(), span: d.span, obligations: Vec::new() })
        .collect();
    for (i, verdict) in &outcome.concrete {
        let vc = &front.clauses[*i].vc;
        let ob = Obligation { name: vc.name.clone(), span: vc.span, verdict: verdict.clone(), millis: timed.take(&vc.name) };
        if let Some(d) = defs.iter_mut().find(|d| d.name == owner(&vc.name)) {
            d.obligations.push(ob);
        }
    }
    for d in &mut defs {
        d.obligations.sort_by(by_position);
    }
    Ok(Analysis { front, outcome, defs })
}

/// Discharge the VCs of a `.vc` file directly.
pub fn check_vc_source(src: &str, backend: &dyn Backend, jobs: usize) -> Result<Vec<Obligation>, DriverError> {
    let vcs = parse_vc_file(src)?;
    let timed = Timed::new(backend);
    let verdicts = crate::infer::solve::check_parallel(&timed, &vcs, jobs)?;
    Ok(vcs
        .iter()
        .zip(verdicts)
        .map(|(vc, verdict)| Obligation { name: vc.name.clone(), span: vc.span, verdict, millis: timed.take(&vc.name) })
        .collect())
}

/// `label := \params -> solution  -- kN at def:line:col`, one per unknown.
pub fn solution_lines(a: &Analysis, backend: &dyn Backend) -> Result<Vec<String>, DriverError> {
    let mut out = Vec::new();
    for k in &a.front.kappas.vars {
        let insts = a.outcome.assignment.get(&k.name).cloned().unwrap_or_default();
        let kept = simplify(&a.front.kappas, &k.name, &insts, backend)?;
        let params: Vec<&str> = k.params[k.nscope..].iter().map(|(x, _)| x.as_str()).collect();
        let body = if kept.is_empty() { Pred::tt() } else { Pred::conj(kept) };
        out.push(format!(
            "{} := \\{} -> {}  -- {} at {}:{}",
            k.label,
            params.join(" "),
            body,
            k.name.trim_start_matches('$'),
            k.origin,
            k.span
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Command line

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Tap,
    Records,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum MaterializeArg {
    New,
    All,
}

#[derive(Clone, Debug, clap::Parser)]
#[command(name = "boundcheck", version, about = "Check λB programs with bounded refinement types")]
pub struct Args {
    /// A `.bl` program or a `.vc` file of verification conditions.
    pub input: std::path::PathBuf,
    /// SMT-LIB2 solver command line.
    #[arg(long, env = "BOUNDCHECK_SOLVER", default_value = crate::smt::DEFAULT_SOLVER)]
    pub solver: String,
    #[arg(long, env = "BOUNDCHECK_TIMEOUT_MS", default_value_t = 10_000)]
    pub timeout_ms: u64,
    /// Keep one solver process and scope queries with push/pop.
    #[arg(long)]
    pub solver_persistent: bool,
    /// Use the bounded enumeration oracle instead of the solver.
    #[arg(long)]
    pub oracle: bool,
    /// Integer range [-N, N] explored by the oracle.
    #[arg(long, env = "BOUNDCHECK_ORACLE_BOUND", default_value_t = 3)]
    pub oracle_bound: i64,
    /// Extra qualifiers, added to the defaults and the program's own.
    #[arg(long)]
    pub qualifiers: Option<std::path::PathBuf>,
    /// Write the elaborated program to this file.
    #[arg(long)]
    pub emit_elaborated: Option<std::path::PathBuf>,
    /// Write one `.vc` file per obligation into this directory.
    #[arg(long)]
    pub emit_vcs: Option<std::path::PathBuf>,
    /// Write one `.smt2` script per obligation into this directory.
    #[arg(long)]
    pub emit_smt: Option<std::path::PathBuf>,
    /// Print the inferred solution of every unknown.
    #[arg(long)]
    pub dump_solution: bool,
    #[arg(long, value_enum, env = "BOUNDCHECK_MATERIALIZE", default_value = "new")]
    pub materialize: MaterializeArg,
    /// Reject binding sites needing more ghost calls than this.
    #[arg(long)]
    pub max_materialize: Option<usize>,
    /// Evaluate a top-level definition of the elaborated program.
    #[arg(long)]
    pub eval: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    pub fuel: u64,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Parallel solver queries.
    #[arg(long, env = "BOUNDCHECK_JOBS", default_value_t = 1)]
    pub jobs: usize,
}

fn read(path: &std::path::Path) -> Result<String, DriverError> {
    std::fs::read_to_string(path).map_err(|e| DriverError::Io { path: path.display().to_string(), msg: e.to_string() })
}

fn write(path: &std::path::Path, text: &str) -> Result<(), DriverError> {
    std::fs::write(path, text).map_err(|e| DriverError::Io { path: path.display().to_string(), msg: e.to_string() })
}

fn file_stem(i: usize, name: &str) -> String {
    let clean: String =
        name.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect();
    format!("{i:03}_{clean}")
}

/// Write `.vc` and `.smt2` files for each VC into the requested directories.
fn emit_vcs(args: &Args, vcs: &[Vc]) -> Result<(), DriverError> {
    for (dir, ext) in [(&args.emit_vcs, "vc"), (&args.emit_smt, "smt2")] {
        let Some(dir) = dir else { continue };
        std::fs::create_dir_all(dir)
            .map_err(|e| DriverError::Io { path: dir.display().to_string(), msg: e.to_string() })?;
        for (i, vc) in vcs.iter().enumerate() {
            let text = if ext == "vc" { crate::logic::print_vc(vc) } else { crate::smt::emit_script(vc) };
            write(&dir.join(format!("{}.{ext}", file_stem(i, &vc.name))), &text)?;
        }
    }
    Ok(())
}

fn backend(args: &Args) -> Result<Box<dyn Backend>, DriverError> {
    Ok(if args.oracle {
        Box::new(crate::smt::Oracle { bound: args.oracle_bound })
    } else if args.solver_persistent {
        Box::new(crate::smt::PersistentSolver::new(&args.solver, args.timeout_ms)?)
    } else {
        Box::new(crate::smt::ExternalSolver::new(&args.solver, args.timeout_ms)?)
    })
}

fn verdict_word(v: &Verdict) -> &'static str {
    match v {
        Verdict::Valid => "valid",
        Verdict::Invalid(_) => "invalid",
        Verdict::Unknown(_) => "unknown",
    }
}

fn span_text(s: Option<Span>) -> String {
    s.map(|s| s.to_string()).unwrap_or_else(|| "-".into())
}

fn failure_text(o: &Obligation, out: &mut String) {
    out.push_str(&format!("  {} at {}: {}\n", o.name, span_text(o.span), o.verdict));
    if let Verdict::Invalid(Some(m)) = &o.verdict {
        for line in m.lines() {
            out.push_str(&format!("    {line}\n"));
        }
    }
}

/// Render grouped results; each group is a named unit with its obligations.
pub fn render(groups: &[(String, Option<Span>, Vec<Obligation>)], format: Format) -> String {
    let mut out = String::new();
    let all: Vec<&Obligation> = groups.iter().flat_map(|g| &g.2).collect();
    let safe = all.iter().all(|o| o.verdict.is_valid());
    match format {
        Format::Text => {
            for (name, _, obs) in groups {
                let ok = obs.iter().all(|o| o.verdict.is_valid());
                out.push_str(&format!("{name}: {}\n", if ok { "SAFE" } else { "UNSAFE" }));
                for o in obs.iter().filter(|o| !o.verdict.is_valid()) {
                    failure_text(o, &mut out);
                }
            }
            let bad = groups.iter().filter(|g| g.2.iter().any(|o| !o.verdict.is_valid())).count();
            if safe {
                out.push_str("SAFE\n");
            } else {
                out.push_str(&format!("UNSAFE ({bad} of {})\n", groups.len()));
            }
        }
        Format::Tap => {
            out.push_str("TAP version 13\n");
            out.push_str(&format!("1..{}\n", all.len()));
            for (i, o) in all.iter().enumerate() {
                let ok = if o.verdict.is_valid() { "ok" } else { "not ok" };
                out.push_str(&format!("{ok} {} - {}\n", i + 1, o.name));
                if !o.verdict.is_valid() {
                    out.push_str(&format!("  # {} at {}\n", o.verdict, span_text(o.span)));
                }
            }
        }
        Format::Records => {
            for o in all {
                let mut rec = serde_json::json!({
                    "name": o.name,
                    "verdict": verdict_word(&o.verdict),
                    "span": span_text(o.span),
                    "millis": o.millis,
                });
                if let Verdict::Invalid(Some(m)) = &o.verdict {
                    rec["model"] = serde_json::Value::String(m.clone());
                }
                out.push_str(&format!("{rec}\n"));
            }
        }
    }
    out
}

/// Run the tool; returns the exit code.
pub fn run(args: &Args, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32 {
    match run_inner(args, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "{}: error: {e}", args.input.display());
            e.exit_code()
        }
    }
}

fn run_inner(args: &Args, out: &mut dyn std::io::Write) -> Result<i32, DriverError> {
    let src = read(&args.input)?;
    let be = backend(args)?;
    let io = |e: std::io::Error| DriverError::Io { path: "<stdout>".into(), msg: e.to_string() };
    if args.input.extension().is_some_and(|e| e == "vc") {
        emit_vcs(args, &parse_vc_file(&src)?)?;
        let obs = check_vc_source(&src, be.as_ref(), args.jobs)?;
        let safe = obs.iter().all(|o| o.verdict.is_valid());
        let groups: Vec<_> = obs.into_iter().map(|o| (o.name.clone(), o.span, vec![o])).collect();
        out.write_all(render(&groups, args.format).as_bytes()).map_err(io)?;
        return Ok(if safe { 0 } else { 1 });
    }
    let opts = elaborate::Options {
        materialize: match args.materialize {
            MaterializeArg::New => elaborate::Materialize::New,
            MaterializeArg::All => elaborate::Materialize::All,
        },
        max_materialize: args.max_materialize,
    };
    let front = frontend(&src, opts)?;
    if let Some(path) = &args.emit_elaborated {
        write(path, &print_elaborated(&front.elaborated))?;
    }
    let mut quals = crate::infer::qualifier::defaults();
    quals.extend(front.program.qualifiers.iter().cloned());
    if let Some(path) = &args.qualifiers {
        quals.extend(crate::infer::qualifier::parse_qualifiers(&read(path)?)?);
    }
    let analysis = analyze(front, &quals, be.as_ref(), args.jobs)?;
    emit_vcs(args, &analysis.solved_vcs())?;
    let groups: Vec<_> = analysis.defs.iter().map(|d| (d.name.clone(), Some(d.span), d.obligations.clone())).collect();
    out.write_all(render(&groups, args.format).as_bytes()).map_err(io)?;
    if args.dump_solution {
        for line in solution_lines(&analysis, be.as_ref())? {
            writeln!(out, "{line}").map_err(io)?;
        }
    }
    if let Some(name) = &args.eval {
        writeln!(out, "{}", eval_def(&analysis.front.elaborated, name, args.fuel)?).map_err(io)?;
    }
    Ok(if analysis.safe() { 0 } else { 1 })
}

pub fn print_elaborated(el: &Elaborated) -> String {
    let mut s = String::new();
    for d in &el.defs {
        if let Some(sc) = &d.schema {
            s.push_str(&format!("val {} :: {}\n", d.name, crate::surface::print_schema(sc)));
        }
        let kw = if d.recursive { "letrec" } else { "let" };
        s.push_str(&format!("{kw} {} = {}\n\n", d.name, crate::surface::print_term(&d.body)));
    }
    s
}

/// Evaluate one elaborated definition in λP with the others in scope.
pub fn eval_def(el: &Elaborated, name: &str, fuel: u64) -> Result<String, DriverError> {
    use crate::eval::{eval_with, Mode};
    let globals: HashMap<Name, crate::ast::Term> = el.defs.iter().map(|d| (d.name.clone(), d.body.clone())).collect();
    let body = globals.get(name).ok_or_else(|| DriverError::Usage(format!("no definition named `{name}`")))?;
    Ok(match eval_with(&globals, body, fuel, Mode::LambdaP) {
        Ok(v) => format!("{name} = {v}"),
        Err(e) => format!("{name}: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use clap::Parser;

    use super::*;

    fn parse(argv: &[&str]) -> Args {
        Args::try_parse_from(std::iter::once("boundcheck").chain(argv.iter().copied())).unwrap()
    }

    // The only test touching these variables, so no other test races on them.
    #[test]
    fn flags_override_environment_override_defaults() {
        std::env::remove_var("BOUNDCHECK_JOBS");
        std::env::remove_var("BOUNDCHECK_ORACLE_BOUND");
        let a = parse(&["x.bl"]);
        assert_eq!((a.jobs, a.oracle_bound, a.timeout_ms), (1, 3, 10000));
        std::env::set_var("BOUNDCHECK_JOBS", "4");
        std::env::set_var("BOUNDCHECK_ORACLE_BOUND", "5");
        let a = parse(&["x.bl"]);
        assert_eq!((a.jobs, a.oracle_bound), (4, 5));
        let a = parse(&["x.bl", "--jobs", "2", "--oracle-bound", "1"]);
        assert_eq!((a.jobs, a.oracle_bound), (2, 1));
        std::env::remove_var("BOUNDCHECK_JOBS");
        std::env::remove_var("BOUNDCHECK_ORACLE_BOUND");
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        let e = Args::try_parse_from(["boundcheck", "x.bl", "--frobnicate"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
