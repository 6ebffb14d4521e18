use std::fs;
use std::io::Write;

use lexverify_core::constraint::{ConstraintBundle, Value};
use lexverify_core::engine::{CheckKind, Verdict};
use lexverify_core::fixtures::fsc_case;
use lexverify_core::smtlib::Status;
use lexverify_store::{bundle_bytes, CaseFilter, Operation, Store, StoreError, StoredResult};
use proptest::prelude::*;

fn verdict(check: CheckKind, status: Status) -> Verdict {
    Verdict { check, status, model: None, core: vec![], core_groups: vec![], checks_performed: 1, elapsed_ms: 0.5 }
}

fn open() -> (tempfile::TempDir, Store) {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path().join("store")).unwrap();
    (dir, store)
}

#[test]
fn new_case_gets_version_one() {
    let (_d, store) = open();
    let b = fsc_case();
    assert_eq!(store.put_case(&b, 0, "alice", Operation::Create).unwrap(), 1);
    let rec = store.get_case(&b.case_id).unwrap();
    assert_eq!(rec.version, 1);
    assert_eq!(rec.bundle, b);
    assert_eq!(rec.history.len(), 1);
    assert_eq!(rec.history[0].operation, Operation::Create);
    assert_eq!(rec.history[0].actor, "alice");
    let dir = store.root().join(&b.case_id);
    assert!(dir.join("bundle.v1.json").is_file());
    assert!(dir.join("log.jsonl").is_file());
}

#[test]
fn stale_expected_version_conflicts() {
    let (_d, store) = open();
    let b = fsc_case();
    store.put_case(&b, 0, "a", Operation::Create).unwrap();
    store.put_case(&b, 1, "a", Operation::Update).unwrap();
    match store.put_case(&b, 1, "b", Operation::Update) {
        Err(StoreError::VersionConflict { expected: 1, current: 2, .. }) => {}
        other => panic!("expected conflict, got {other:?}"),
    }
    // Creating an existing case is a conflict too.
    assert!(matches!(store.put_case(&b, 0, "b", Operation::Create), Err(StoreError::VersionConflict { .. })));
    assert_eq!(store.current_version(&b.case_id).unwrap(), 2);
}

#[test]
fn unknown_case_is_not_found() {
    let (_d, store) = open();
    assert!(matches!(store.get_case("nope"), Err(StoreError::NotFound(_))));
    let r = store.record_result("nope", StoredResult::Verdict(verdict(CheckKind::Illegality, Status::Unsat)), "a");
    assert!(matches!(r, Err(StoreError::NotFound(_))));
    assert!(matches!(store.get_case("../etc"), Err(StoreError::InvalidCaseId(_))));
}

#[test]
fn invalid_bundles_are_refused() {
    let (_d, store) = open();
    let mut b = fsc_case();
    b.penalty_var = "undeclared".into();
    assert!(matches!(store.put_case(&b, 0, "a", Operation::Create), Err(StoreError::Invalid(_))));
    assert!(store.list_cases(&CaseFilter::default()).unwrap().is_empty());
}

#[test]
fn results_bump_version_and_keep_order() {
    let (_d, store) = open();
    let b = fsc_case();
    store.put_case(&b, 0, "a", Operation::Create).unwrap();
    let v2 = store.record_result(&b.case_id, StoredResult::Verdict(verdict(CheckKind::Illegality, Status::Unsat)), "a").unwrap();
    let v3 = store.record_result(&b.case_id, StoredResult::Verdict(verdict(CheckKind::Consistency, Status::Sat)), "a").unwrap();
    assert_eq!((v2, v3), (2, 3));
    let rec = store.get_case(&b.case_id).unwrap();
    let results: Vec<_> = rec.history.iter().filter_map(|e| e.result.as_ref()).collect();
    assert_eq!(results.len(), 2);
    assert!(matches!(results[0], StoredResult::Verdict(v) if v.check == CheckKind::Illegality));
    assert!(matches!(results[1], StoredResult::Verdict(v) if v.check == CheckKind::Consistency));
    assert_eq!(rec.latest.illegality.as_ref().unwrap().status, Status::Unsat);
    assert_eq!(rec.latest.consistency.as_ref().unwrap().status, Status::Sat);
    assert!(rec.latest.correction.is_none());
    // A result leaves the bundle alone.
    assert!(rec.history[1].diff.0.is_empty());
    assert_eq!(rec.bundle, b);
}

#[test]
fn list_filters_by_prefix_and_meta() {
    let (_d, store) = open();
    for (id, court) in [("fsc-1", "fsc"), ("fsc-2", "other"), ("bank-1", "fsc")] {
        let mut b = fsc_case();
        b.case_id = id.into();
        b.meta.insert("court".into(), court.into());
        store.put_case(&b, 0, "a", Operation::Create).unwrap();
    }
    let ids = |f: &CaseFilter| store.list_cases(f).unwrap().into_iter().map(|s| s.case_id).collect::<Vec<_>>();
    assert_eq!(ids(&CaseFilter::default()), ["bank-1", "fsc-1", "fsc-2"]);
    assert_eq!(ids(&CaseFilter { id_prefix: Some("fsc".into()), ..Default::default() }), ["fsc-1", "fsc-2"]);
    let f = CaseFilter { meta: [("court".to_string(), "fsc".to_string())].into(), ..Default::default() };
    assert_eq!(ids(&f), ["bank-1", "fsc-1"]);
}

#[test]
fn reads_do_not_change_the_version() {
    let (_d, store) = open();
    let b = fsc_case();
    store.put_case(&b, 0, "a", Operation::Create).unwrap();
    for _ in 0..3 {
        store.get_case(&b.case_id).unwrap();
        store.list_cases(&CaseFilter::default()).unwrap();
        store.replay(&b.case_id, 1).unwrap();
    }
    assert_eq!(store.current_version(&b.case_id).unwrap(), 1);
}

fn edited(base: &ConstraintBundle, step: u32) -> ConstraintBundle {
    let mut b = base.clone();
    b.meta.insert("step".into(), step.to_string());
    match step % 3 {
        0 => {
            b.facts.insert("plan_executed".to_string(), Value::Bool(step % 2 == 0));
        }
        1 => {
            b.constraints.retain(|c| c.id != "f_plan_submitted");
        }
        _ => {
            if let Some(c) = b.constraints.iter_mut().find(|c| c.kind == lexverify_core::constraint::Kind::Soft) {
                c.weight = Some(1 + step as i64);
            }
        }
    }
    b
}

#[test]
fn replay_reproduces_every_version_byte_for_byte() {
    let (_d, store) = open();
    let base = fsc_case();
    store.put_case(&base, 0, "a", Operation::Create).unwrap();
    let mut current = base.clone();
    for step in 1..=8 {
        let v = store.current_version(&base.case_id).unwrap();
        if step % 4 == 0 {
            store.record_result(&base.case_id, StoredResult::Verdict(verdict(CheckKind::Illegality, Status::Unsat)), "a").unwrap();
        } else {
            current = edited(&current, step);
            store.put_case(&current, v, "a", Operation::Update).unwrap();
        }
    }
    let last = store.current_version(&base.case_id).unwrap();
    assert_eq!(last, 9);
    for v in 1..=last {
        let replayed = store.replay(&base.case_id, v).unwrap();
        assert_eq!(bundle_bytes(&replayed), store.bundle_file_bytes(&base.case_id, v).unwrap(), "version {v}");
    }
    assert_eq!(store.replay(&base.case_id, last).unwrap(), current);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn replay_equality_under_random_edit_sequences(steps in proptest::collection::vec(0u32..30, 1..6)) {
        let (_d, store) = open();
        let base = fsc_case();
        store.put_case(&base, 0, "a", Operation::Create).unwrap();
        let mut current = base.clone();
        for (i, s) in steps.iter().enumerate() {
            current = edited(&current, *s);
            store.put_case(&current, i as u64 + 1, "a", Operation::Update).unwrap();
        }
        let last = steps.len() as u64 + 1;
        prop_assert_eq!(bundle_bytes(&store.replay(&base.case_id, last).unwrap()), store.bundle_file_bytes(&base.case_id, last).unwrap());
    }
}

#[test]
fn torn_log_line_and_orphans_are_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("store");
    let b = fsc_case();
    {
        let store = Store::open(&root).unwrap();
        store.put_case(&b, 0, "a", Operation::Create).unwrap();
        store.put_case(&edited(&b, 1), 1, "a", Operation::Update).unwrap();
    }
    let case = root.join(&b.case_id);
    // Simulate a crash halfway through version 3: bundle file and temp file
    // written, log line only partly appended.
    fs::write(case.join("bundle.v3.json"), "{\"partial\": ").unwrap();
    fs::write(case.join(".tmp-abc"), "junk").unwrap();
    let mut log = fs::OpenOptions::new().append(true).open(case.join("log.jsonl")).unwrap();
    log.write_all(b"{\"version\":3,\"timesta").unwrap();
    drop(log);

    let store = Store::open(&root).unwrap();
    assert_eq!(store.current_version(&b.case_id).unwrap(), 2);
    assert!(!case.join("bundle.v3.json").exists());
    assert!(!case.join(".tmp-abc").exists());
    assert!(fs::read_to_string(case.join("log.jsonl")).unwrap().ends_with('\n'));
    assert_eq!(store.put_case(&edited(&b, 2), 2, "a", Operation::Update).unwrap(), 3);
    assert_eq!(bundle_bytes(&store.replay(&b.case_id, 3).unwrap()), store.bundle_file_bytes(&b.case_id, 3).unwrap());
}

#[test]
fn empty_case_directory_is_not_a_case() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("store");
    fs::create_dir_all(root.join("half-made")).unwrap();
    let store = Store::open(&root).unwrap();
    assert!(matches!(store.get_case("half-made"), Err(StoreError::NotFound(_))));
    assert!(store.list_cases(&CaseFilter::default()).unwrap().is_empty());
    let mut b = fsc_case();
    b.case_id = "half-made".into();
    assert_eq!(store.put_case(&b, 0, "a", Operation::Create).unwrap(), 1);
}
