use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use super::script::{body, emit_script};
use super::{Backend, SmtError, Verdict};
use crate::logic::Vc;

fn split_cmd(cmd: &str) -> Result<Vec<String>, SmtError> {
    let argv: Vec<String> = cmd.split_whitespace().map(String::from).collect();
    if argv.is_empty() {
        return Err(SmtError::Spawn { cmd: cmd.into(), reason: "empty command".into() });
    }
    Ok(argv)
}

fn spawn(argv: &[String]) -> Result<Child, SmtError> {
    Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| SmtError::Spawn { cmd: argv.join(" "), reason: e.to_string() })
}

fn parse_reply(out: &str) -> Result<Verdict, SmtError> {
    let mut lines = out.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("unsat") => Ok(Verdict::Valid),
        Some("sat") => {
            let model: Vec<&str> = lines.filter(|l| !l.starts_with(";;")).collect();
            let model = model.join(" ").replace("( ", "(").replace(" )", ")");
            Ok(Verdict::Invalid(if model.is_empty() { None } else { Some(model) }))
        }
        Some("unknown") => Ok(Verdict::Unknown("solver answered unknown".into())),
        Some(other) => Err(SmtError::Protocol(other.to_string())),
        None => Err(SmtError::Protocol("empty reply".into())),
    }
}

/// Runs one solver process per query.
pub struct ExternalSolver {
    argv: Vec<String>,
    timeout: Duration,
}

impl ExternalSolver {
    pub fn new(cmd: &str, timeout_ms: u64) -> Result<ExternalSolver, SmtError> {
        Ok(ExternalSolver { argv: split_cmd(cmd)?, timeout: Duration::from_millis(timeout_ms) })
    }

    /// Feed `script` to a fresh process; `None` when the deadline passes
    /// (the process is killed).
    fn run(&self, script: &str, deadline: Duration) -> Result<Option<String>, SmtError> {
        let mut child = spawn(&self.argv)?;
        let mut stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = channel();
        let reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout.read_to_string(&mut s);
            let _ = tx.send(s);
        });
        if let Some(mut stdin) = child.stdin.take() {
            // A solver that exits early closes the pipe; its reply still tells us why.
            let _ = stdin.write_all(script.as_bytes());
        }
        match rx.recv_timeout(deadline) {
            Ok(s) => {
                let _ = child.wait();
                let _ = reader.join();
                Ok(Some(s))
            }
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                Ok(None)
            }
        }
    }
}

impl Backend for ExternalSolver {
    fn check(&self, vc: &Vc) -> Result<Verdict, SmtError> {
        match self.run(&emit_script(vc), self.timeout)? {
            Some(out) => parse_reply(&out),
            None => Ok(Verdict::Unknown(format!("timeout after {} ms", self.timeout.as_millis()))),
        }
    }

    fn check_many(&self, vcs: &[Vc]) -> Result<Vec<Verdict>, SmtError> {
        if vcs.len() <= 1 {
            return vcs.iter().map(|vc| self.check(vc)).collect();
        }
        let mut script = String::from("(set-logic QF_UFLIA)\n");
        for vc in vcs {
            script.push_str("(push 1)\n");
            script.push_str(&body(vc));
            script.push_str("(check-sat)\n(pop 1)\n");
        }
        let deadline = self.timeout * vcs.len() as u32;
        if let Some(out) = self.run(&script, deadline)? {
            let answers: Vec<&str> = out
                .lines()
                .map(str::trim)
                .filter(|l| matches!(*l, "sat" | "unsat" | "unknown"))
                .collect();
            if answers.len() == vcs.len() && !answers.contains(&"unknown") {
                return Ok(answers
                    .into_iter()
                    .map(|a| if a == "unsat" { Verdict::Valid } else { Verdict::Invalid(None) })
                    .collect());
            }
        }
        // Batch failed somewhere: fall back to one process per VC.
        vcs.iter().map(|vc| self.check(vc)).collect()
    }

    fn name(&self) -> String {
        self.argv.join(" ")
    }
}

struct Proc {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

/// Keeps one solver process alive and scopes each query with push/pop.
pub struct PersistentSolver {
    argv: Vec<String>,
    timeout: Duration,
    proc: Mutex<Option<Proc>>,
}

const DONE: &str = "@@done";

impl PersistentSolver {
    pub fn new(cmd: &str, timeout_ms: u64) -> Result<PersistentSolver, SmtError> {
        Ok(PersistentSolver {
            argv: split_cmd(cmd)?,
            timeout: Duration::from_millis(timeout_ms),
            proc: Mutex::new(None),
        })
    }

    fn start(&self) -> Result<Proc, SmtError> {
        let mut child = spawn(&self.argv)?;
        let stdout = child.stdout.take().expect("piped stdout");
        let mut stdin = child.stdin.take().expect("piped stdin");
        let (tx, rx) = channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        stdin
            .write_all(b"(set-option :produce-models true)\n(set-logic QF_UFLIA)\n")
            .map_err(|e| SmtError::Protocol(e.to_string()))?;
        Ok(Proc { child, stdin, lines: rx })
    }
}

impl Backend for PersistentSolver {
    fn check(&self, vc: &Vc) -> Result<Verdict, SmtError> {
        let mut guard = self.proc.lock().unwrap_or_else(|e| e.into_inner());
        if guard.is_none() {
            *guard = Some(self.start()?);
        }
        let p = guard.as_mut().unwrap();
        let query = format!("(push 1)\n{}(check-sat)\n(echo \"{DONE}\")\n(pop 1)\n", body(vc));
        if p.stdin.write_all(query.as_bytes()).and_then(|_| p.stdin.flush()).is_err() {
            *guard = None;
            return Err(SmtError::Protocol("solver process went away".into()));
        }
        let start = Instant::now();
        let mut reply = Vec::new();
        loop {
            let left = self.timeout.saturating_sub(start.elapsed());
            match p.lines.recv_timeout(left) {
                Ok(l) if l.trim() == DONE => break,
                Ok(l) => reply.push(l),
                Err(RecvTimeoutError::Timeout) => {
                    let _ = p.child.kill();
                    let _ = p.child.wait();
                    *guard = None;
                    return Ok(Verdict::Unknown(format!("timeout after {} ms", self.timeout.as_millis())));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    *guard = None;
                    return Err(SmtError::Protocol("solver process went away".into()));
                }
            }
        }
        match parse_reply(&reply.join("\n"))? {
            Verdict::Invalid(_) => Ok(Verdict::Invalid(None)),
            v => Ok(v),
        }
    }

    fn name(&self) -> String {
        format!("{} (persistent)", self.argv.join(" "))
    }
}

impl Drop for PersistentSolver {
    fn drop(&mut self) {
        if let Some(mut p) = self.proc.lock().ok().and_then(|mut g| g.take()) {
            let _ = p.child.kill();
            let _ = p.child.wait();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_vc_file;

    fn z3() -> Option<ExternalSolver> {
        let s = ExternalSolver::new(crate::smt::DEFAULT_SOLVER, 5000).ok()?;
        spawn(&s.argv).ok().map(|mut c| {
            let _ = c.kill();
            let _ = c.wait();
            s
        })
    }

    #[test]
    fn missing_solver_is_a_spawn_error() {
        let s = ExternalSolver::new("/nonexistent/solver -in", 1000).unwrap();
        let vc = &parse_vc_file("goal : true").unwrap()[0];
        assert!(matches!(s.check(vc), Err(SmtError::Spawn { .. })));
    }

    #[test]
    fn timeout_kills_process_promptly() {
        let s = ExternalSolver::new("sleep 30", 200).unwrap();
        let vc = &parse_vc_file("goal : true").unwrap()[0];
        let t = Instant::now();
        assert!(matches!(s.check(vc), Ok(Verdict::Unknown(_))));
        assert!(t.elapsed() < Duration::from_millis(700));
    }

    #[test]
    fn z3_verdicts() {
        let Some(s) = z3() else { return };
        let vcs = parse_vc_file(
            "vc a\nbind y : Int\nbind z : Int | z = y + 1\nbind x : Int | y = x + 1\ngoal : z = x + 2\n\
             vc b\nbind i : Int | p i\ngoal : p (i + 1)\n\
             vc c\ngoal : true\n",
        )
        .unwrap();
        assert_eq!(s.check(&vcs[0]).unwrap(), Verdict::Valid);
        assert!(matches!(s.check(&vcs[1]).unwrap(), Verdict::Invalid(Some(_))));
        assert_eq!(s.check(&vcs[2]).unwrap(), Verdict::Valid);
        let batch = s.check_many(&vcs).unwrap();
        assert_eq!(batch[0], Verdict::Valid);
        assert!(matches!(batch[1], Verdict::Invalid(_)));
        let p = PersistentSolver::new(crate::smt::DEFAULT_SOLVER, 5000).unwrap();
        assert_eq!(p.check(&vcs[0]).unwrap(), Verdict::Valid);
        assert!(matches!(p.check(&vcs[1]).unwrap(), Verdict::Invalid(_)));
        assert_eq!(p.check(&vcs[2]).unwrap(), Verdict::Valid);
    }
}
