#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use lexverify_core::constraint::{ConstraintBundle, Expr, Sort};
use lexverify_core::engine::Engine;
use lexverify_core::smtlib::{symbol, term};
use lexverify_core::solver::SolverConfig;

pub fn solver() -> SolverConfig {
    SolverConfig::locate(None).expect("an SMT solver on PATH or in LEXV_SOLVER").with_timeout(60_000)
}

pub fn engine() -> Engine {
    Engine::connect(solver()).unwrap()
}

/// Maps `f` over `items` on a few scoped threads, keeping order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get()).min(8);
    let chunk = items.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|part| s.spawn(|| part.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    })
}

fn sort_name(s: Sort) -> &'static str {
    match s {
        Sort::Bool => "Bool",
        Sort::Int => "Int",
        Sort::Real => "Real",
    }
}

/// Runs one satisfiability query per item subset in a single solver session.
/// `base` is always asserted; each subset asserts the chosen `items`.
fn sat_per_subset(bundle: &ConstraintBundle, base: &[Expr], items: &[Expr], subsets: &[Vec<usize>]) -> Vec<bool> {
    let logic = if bundle.has_variable_denominator() { "QF_NIRA" } else { "QF_LIRA" };
    let mut text = format!("(set-logic {logic})\n");
    for v in &bundle.vars {
        let _ = writeln!(text, "(declare-fun {} () {})", symbol(&v.name), sort_name(v.sort));
    }
    for e in base {
        let _ = writeln!(text, "(assert {})", term(e).unwrap());
    }
    let items: Vec<String> = items.iter().map(|e| term(e).unwrap()).collect();
    for subset in subsets {
        text.push_str("(push 1)\n");
        for &i in subset {
            let _ = writeln!(text, "(assert {})", items[i]);
        }
        text.push_str("(check-sat)\n(pop 1)\n");
    }
    let run = solver().run_text(&text).unwrap();
    let answers: Vec<bool> = run
        .stdout
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| match l {
            "sat" => true,
            "unsat" => false,
            other => panic!("oracle solver said {other}"),
        })
        .collect();
    assert_eq!(answers.len(), subsets.len());
    answers
}

fn masks(n: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n).map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect()).collect()
}

/// Least total weight of SOFT constraints whose removal makes HARD ∪ rest ∪ {penalty clear} satisfiable.
pub fn brute_force_min_cost(bundle: &ConstraintBundle, weights: &BTreeMap<String, u64>) -> Option<u64> {
    let mut base: Vec<Expr> = bundle.hard().map(|c| c.expr.clone()).collect();
    base.push(bundle.penalty_clear());
    let soft: Vec<_> = bundle.soft().collect();
    let items: Vec<Expr> = soft.iter().map(|c| c.expr.clone()).collect();
    let kept = masks(soft.len());
    let sat = sat_per_subset(bundle, &base, &items, &kept);
    kept.iter()
        .zip(sat)
        .filter(|(_, ok)| *ok)
        .map(|(k, _)| {
            soft.iter()
                .enumerate()
                .filter(|(i, _)| !k.contains(i))
                .map(|(_, c)| weights.get(&c.id).copied().unwrap_or_else(|| c.effective_weight()))
                .sum()
        })
        .min()
}

pub const PIN: &str = "<pin>";

/// Every minimal unsatisfiable subset of all constraints plus the penalty pin, by exhaustive enumeration.
pub fn all_minimal_cores(bundle: &ConstraintBundle) -> Vec<BTreeSet<String>> {
    let mut names: Vec<String> = bundle.constraints.iter().map(|c| c.id.clone()).collect();
    let mut items: Vec<Expr> = bundle.constraints.iter().map(|c| c.expr.clone()).collect();
    names.push(PIN.to_string());
    items.push(bundle.penalty_clear());
    assert!(items.len() <= 12, "oracle is exponential");
    let subsets = masks(items.len());
    let sat = sat_per_subset(bundle, &[], &items, &subsets);
    let unsat: BTreeSet<u32> = (0u32..1 << items.len()).filter(|&m| !sat[m as usize]).collect();
    unsat
        .iter()
        .filter(|&&m| (0..items.len()).filter(|i| m & (1 << i) != 0).all(|i| !unsat.contains(&(m & !(1 << i)))))
        .map(|&m| (0..items.len()).filter(|i| m & (1 << i) != 0).map(|i| names[i].clone()).collect())
        .collect()
}

/// HARD constraint ids appearing in any minimal core.
pub fn hard_members_of_all_cores(bundle: &ConstraintBundle) -> BTreeSet<String> {
    let hard: BTreeSet<String> = bundle.hard().map(|c| c.id.clone()).collect();
    all_minimal_cores(bundle).into_iter().flatten().filter(|id| hard.contains(id)).collect()
}

pub fn fixture_path(rel: &str) -> String {
    format!("{}/../../fixtures/{rel}", env!("CARGO_MANIFEST_DIR"))
}

/// Compares `actual` with the frozen JSON at `rel`; `LEXV_FREEZE=1` rewrites it instead.
pub fn frozen<T: serde::Serialize + serde::de::DeserializeOwned + PartialEq + std::fmt::Debug>(rel: &str, actual: &T) {
    let path = fixture_path(rel);
    if std::env::var("LEXV_FREEZE").as_deref() == Ok("1") {
        std::fs::create_dir_all(std::path::Path::new(&path).parent().unwrap()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(actual).unwrap() + "\n").unwrap();
        return;
    }
    let raw = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e} (run with LEXV_FREEZE=1 once)"));
    let expected: T = serde_json::from_str(&raw).unwrap();
    assert_eq!(&expected, actual, "frozen oracle {rel} disagrees");
}
