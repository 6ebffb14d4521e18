mod common;

use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};

use lexverify_core::engine::{Engine, EngineError};
use lexverify_core::fixtures::fsc_case;
use lexverify_core::smtlib::{emit_script, EmitOptions, Mode, Status};
use lexverify_core::solver::{SolverConfig, SolverError};

fn stub(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn alive(pid: u32) -> bool {
    match std::fs::read_to_string(format!("/proc/{pid}/stat")) {
        Ok(stat) => !stat.rsplit(')').next().unwrap_or("").trim_start().starts_with('Z'),
        Err(_) => false,
    }
}

#[test]
fn probe_reports_core_support() {
    let caps = common::solver().probe().unwrap();
    assert!(caps.unsat_cores);
    assert!(caps.version.is_some());
}

#[test]
fn solver_without_cores_is_detected_and_core_operations_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = stub(dir.path(), "nocores", "cat > /dev/null\necho unsat\necho '(error \"unsat core production disabled\")'");
    let cfg = SolverConfig::new(path);
    assert!(!cfg.probe().unwrap().unsat_cores);
    let engine = Engine::connect(cfg).unwrap();
    assert!(matches!(engine.check_case_illegality(&fsc_case()), Err(EngineError::CoresUnsupported)));
    assert!(matches!(engine.enumerate_illegal_terms(&fsc_case()), Err(EngineError::CoresUnsupported)));
}

#[test]
fn missing_executable_is_a_crash() {
    let cfg = SolverConfig::new("/nonexistent/solver");
    assert!(matches!(cfg.probe(), Err(SolverError::Crash { exit_code: None, .. })));
}

#[test]
fn nonzero_exit_without_answer_is_a_crash() {
    let dir = tempfile::tempdir().unwrap();
    let path = stub(dir.path(), "dies", "cat > /dev/null\necho 'segfault in theory solver' >&2\nexit 3");
    let script = emit_script(&fsc_case(), Mode::Consistency, &EmitOptions::default()).unwrap();
    match SolverConfig::new(path).run_check(&script) {
        Err(SolverError::Crash { exit_code, stderr }) => {
            assert_eq!(exit_code, Some(3));
            assert!(stderr.contains("segfault"));
        }
        other => panic!("expected a crash, got {other:?}"),
    }
}

#[test]
fn garbage_output_is_a_protocol_error_with_excerpt() {
    let dir = tempfile::tempdir().unwrap();
    let path = stub(dir.path(), "garbage", "cat > /dev/null\necho 'sat'\necho '(model (define-fun'");
    let script = emit_script(&fsc_case(), Mode::Consistency, &EmitOptions::default()).unwrap();
    match SolverConfig::new(path).run_check(&script) {
        Err(SolverError::Protocol(e)) => assert!(e.excerpt.contains("define-fun")),
        other => panic!("expected a protocol error, got {other:?}"),
    }
}

#[test]
fn timeout_kills_the_whole_process_group() {
    let dir = tempfile::tempdir().unwrap();
    let pids = dir.path().join("pids");
    let body = format!("sleep 60 &\necho $$ $! > {}\nwait", pids.display());
    let path = stub(dir.path(), "hangs", &body);
    let cfg = SolverConfig::new(path).with_timeout(300);
    let script = emit_script(&fsc_case(), Mode::Consistency, &EmitOptions::default()).unwrap();
    let started = std::time::Instant::now();
    assert_eq!(cfg.run_check(&script), Err(SolverError::Timeout { timeout_ms: 300 }));
    assert!(started.elapsed().as_millis() < 5_000);
    let text = std::fs::read_to_string(&pids).unwrap();
    for pid in text.split_whitespace().map(|p| p.parse::<u32>().unwrap()) {
        for _ in 0..50 {
            if !alive(pid) {
                break;
            }
            std::thread::sleep(std::time::Duration::from_millis(20));
        }
        assert!(!alive(pid), "process {pid} survived the timeout");
    }
    let engine = Engine::new(cfg);
    assert!(matches!(engine.check_law_consistency(&fsc_case()), Err(EngineError::SolverTimeout { timeout_ms: 300, .. })));
}

#[test]
fn trivial_contradiction_is_unsat() {
    let run = common::solver().run_text("(assert false)\n(check-sat)\n").unwrap();
    assert_eq!(run.stdout.trim(), "unsat");
}

#[test]
fn concurrent_checks_are_independent() {
    let cfg = common::solver();
    let script = emit_script(&fsc_case(), Mode::Illegality, &EmitOptions::default()).unwrap();
    let replies: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..6).map(|_| s.spawn(|| cfg.run_check(&script).unwrap())).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert!(replies.iter().all(|r| r.status == Status::Unsat && r.core == replies[0].core));
}
