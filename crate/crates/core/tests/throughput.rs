mod common;

use lexverify_core::batch::{run_batch, Execution};
use lexverify_core::gen::{generate_batch, GenParams};
use lexverify_core::maxsmt::Strategy;
use lexverify_core::smtlib::Status;

#[test]
fn eighty_seven_cases_check_and_correct_within_budget() {
    let engine = common::engine();
    let bundles = generate_batch(87, 7, &GenParams::default());
    let report = run_batch(&engine, &bundles, Strategy::CoreGuided, Execution::Parallel);
    assert_eq!(report.failures().count(), 0, "{:?}", report.failures().next());
    assert!(report.outcomes.iter().all(|o| o.law == Some(Status::Sat) && o.case == Some(Status::Unsat)));
    assert!(report.elapsed_ms < 90_000.0, "took {:.1} s", report.elapsed_ms / 1e3);
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let engine = common::engine();
    let bundles = generate_batch(10, 99, &GenParams::default());
    let seq = run_batch(&engine, &bundles, Strategy::LinearSearch, Execution::Sequential);
    let par = run_batch(&engine, &bundles, Strategy::LinearSearch, Execution::Parallel);
    let costs = |r: &lexverify_core::batch::BatchReport| r.outcomes.iter().map(|o| (o.case_id.clone(), o.cost)).collect::<Vec<_>>();
    assert_eq!(costs(&seq), costs(&par));
    assert_eq!(seq.execution, Execution::Sequential);
}
