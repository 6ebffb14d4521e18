//! External SMT solver processes: one child per check, fed on stdin.

use std::io::{Read, Write};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;
use wait_timeout::ChildExt;

use crate::smtlib::sexp::{parse_all, Sexp};
use crate::smtlib::{parse_reply, ProtocolError, SmtScript, SolverReply};

pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    pub executable: PathBuf,
    pub args: Vec<String>,
    pub timeout_ms: u64,
    pub memory_mb: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SolverError {
    #[error("solver exceeded {timeout_ms} ms and was killed")]
    Timeout { timeout_ms: u64 },
    #[error("solver crashed (exit {exit_code:?}): {stderr}")]
    Crash { exit_code: Option<i32>, stderr: String },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Output of one solver process.
#[derive(Clone, Debug)]
pub struct RawRun {
    pub stdout: String,
    pub stderr: String,
    pub status: ExitStatus,
    pub wall_ms: f64,
}

impl SolverConfig {
    /// Configuration for `executable` with arguments inferred from its name.
    pub fn new(executable: impl Into<PathBuf>) -> Self {
        let executable = executable.into();
        let stem = executable.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_ascii_lowercase();
        let args = if stem.starts_with("z3") {
            vec!["-in".to_string(), "-smt2".to_string()]
        } else if stem.starts_with("cvc") {
            vec!["--lang=smt2".to_string()]
        } else {
            Vec::new()
        };
        Self { executable, args, timeout_ms: DEFAULT_TIMEOUT_MS, memory_mb: None }
    }

    pub fn with_timeout(mut self, timeout_ms: u64) -> Self {
        self.timeout_ms = timeout_ms.max(1);
        self
    }

    pub fn with_args(mut self, args: Vec<String>) -> Self {
        self.args = args;
        self
    }

    /// Resolves the solver from an explicit path, then `LEXV_SOLVER`, then `z3`
    /// on `PATH`. `LEXV_SOLVER_ARGS` (whitespace separated) overrides arguments
    /// and `LEXV_SOLVER_TIMEOUT_MS` the timeout.
    pub fn locate(explicit: Option<&Path>) -> Option<Self> {
        let path = explicit
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os("LEXV_SOLVER").filter(|v| !v.is_empty()).map(PathBuf::from))
            .or_else(|| find_on_path("z3"))?;
        let mut cfg = Self::new(path);
        if let Ok(args) = std::env::var("LEXV_SOLVER_ARGS") {
            cfg.args = args.split_whitespace().map(str::to_string).collect();
        }
        if let Some(ms) = std::env::var("LEXV_SOLVER_TIMEOUT_MS").ok().and_then(|v| v.parse().ok()) {
            cfg = cfg.with_timeout(ms);
        }
        Some(cfg)
    }

    /// Runs raw SMT-LIB text through a fresh solver process.
    pub fn run_text(&self, text: &str) -> Result<RawRun, SolverError> {
        let started = Instant::now();
        let mut command = Command::new(&self.executable);
        command.args(&self.args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
        // Own process group, so a timeout can take down helpers the solver forked.
        command.process_group(0);
        if let Some(mb) = self.memory_mb {
            let bytes = mb.saturating_mul(1024 * 1024) as libc::rlim_t;
            // SAFETY: setrlimit is async-signal-safe and touches no shared state.
            unsafe {
                command.pre_exec(move || {
                    let limit = libc::rlimit { rlim_cur: bytes, rlim_max: bytes };
                    if libc::setrlimit(libc::RLIMIT_AS, &limit) != 0 {
                        return Err(std::io::Error::last_os_error());
                    }
                    Ok(())
                });
            }
        }
        let mut child = command.spawn().map_err(|e| SolverError::Crash {
            exit_code: None,
            stderr: format!("cannot start {}: {e}", self.executable.display()),
        })?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let input = text.to_string();
        let writer = thread::spawn(move || {
            // A solver that exits early closes the pipe; that surfaces through its output instead.
            let _ = stdin.write_all(input.as_bytes());
        });
        let stdout = spawn_reader(child.stdout.take().expect("piped stdout"));
        let stderr = spawn_reader(child.stderr.take().expect("piped stderr"));

        let status = match child.wait_timeout(Duration::from_millis(self.timeout_ms)) {
            Ok(Some(status)) => status,
            Ok(None) => {
                kill_group(&mut child);
                let _ = writer.join();
                let _ = stdout.join();
                let _ = stderr.join();
                return Err(SolverError::Timeout { timeout_ms: self.timeout_ms });
            }
            Err(e) => {
                kill_group(&mut child);
                return Err(SolverError::Crash { exit_code: None, stderr: format!("wait failed: {e}") });
            }
        };
        // The solver is gone; reap any helpers left in its group.
        unsafe {
            libc::killpg(child.id() as libc::pid_t, libc::SIGKILL);
        }
        let _ = writer.join();
        let stdout = stdout.join().unwrap_or_default();
        let stderr = stderr.join().unwrap_or_default();
        Ok(RawRun { stdout, stderr, status, wall_ms: started.elapsed().as_secs_f64() * 1e3 })
    }

    /// Runs a compiled script and parses the reply.
    pub fn run_check(&self, script: &SmtScript) -> Result<SolverReply, SolverError> {
        let run = self.run_text(&script.text)?;
        match parse_reply(&run.stdout, script) {
            Ok(mut reply) => {
                reply.wall_ms = run.wall_ms;
                Ok(reply)
            }
            Err(_) if !run.status.success() && !has_error_line(&run.stdout) => Err(crash(&run)),
            Err(e) => Err(SolverError::Protocol(e)),
        }
    }

    /// Sends a two-assertion contradiction and reports version and core support.
    pub fn probe(&self) -> Result<Capabilities, SolverError> {
        let run = self.run_text(PROBE_SCRIPT)?;
        let items = match parse_all(&run.stdout) {
            Ok(items) => items,
            Err(_) if !run.status.success() => return Err(crash(&run)),
            Err(e) => return Err(ProtocolError { message: e.to_string(), excerpt: run.stdout }.into()),
        };
        let mut version = None;
        let mut status = None;
        let mut unsat_cores = false;
        for item in &items {
            match item {
                Sexp::Atom(a) if matches!(a.as_str(), "sat" | "unsat" | "unknown") => status = Some(a.clone()),
                Sexp::List(parts) if parts.first().and_then(Sexp::atom) == Some(":version") => {
                    version = parts.get(1).map(|v| match v {
                        Sexp::Str(s) => s.clone(),
                        other => other.to_string(),
                    });
                }
                Sexp::List(parts) if status.as_deref() == Some("unsat") => {
                    let names: Vec<&str> = parts.iter().filter_map(Sexp::atom).collect();
                    if names.len() == parts.len() && names.contains(&"lexv_probe_a") && names.contains(&"lexv_probe_b") {
                        unsat_cores = true;
                    }
                }
                _ => {}
            }
        }
        match status.as_deref() {
            Some("unsat") => Ok(Capabilities { version, unsat_cores }),
            _ if !run.status.success() => Err(crash(&run)),
            _ => Err(ProtocolError { message: "probe did not answer unsat".into(), excerpt: run.stdout }.into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Capabilities {
    pub version: Option<String>,
    pub unsat_cores: bool,
}

const PROBE_SCRIPT: &str = "(set-option :produce-unsat-cores true)
(set-logic QF_LIA)
(get-info :version)
(declare-fun lexv_probe () Bool)
(assert (! lexv_probe :named lexv_probe_a))
(assert (! (not lexv_probe) :named lexv_probe_b))
(check-sat)
(get-unsat-core)
";

/// Anything that can decide a compiled script.
pub trait SmtBackend: Send + Sync {
    fn check(&self, script: &SmtScript) -> Result<SolverReply, SolverError>;

    fn timeout_ms(&self) -> u64 {
        DEFAULT_TIMEOUT_MS
    }
}

impl SmtBackend for SolverConfig {
    fn check(&self, script: &SmtScript) -> Result<SolverReply, SolverError> {
        self.run_check(script)
    }

    fn timeout_ms(&self) -> u64 {
        self.timeout_ms
    }
}

fn spawn_reader<R: Read + Send + 'static>(mut pipe: R) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = pipe.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

fn kill_group(child: &mut Child) {
    unsafe {
        libc::killpg(child.id() as libc::pid_t, libc::SIGKILL);
    }
    let _ = child.kill();
    let _ = child.wait();
}

fn has_error_line(stdout: &str) -> bool {
    stdout.lines().any(|l| l.trim_start().starts_with("(error"))
}

fn crash(run: &RawRun) -> SolverError {
    let text = if run.stderr.trim().is_empty() { &run.stdout } else { &run.stderr };
    let excerpt: String = text.chars().take(400).collect();
    SolverError::Crash { exit_code: run.status.code(), stderr: excerpt }
}

fn find_on_path(name: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path).map(|dir| dir.join(name)).find(|p| p.is_file())
}
