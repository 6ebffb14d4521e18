mod common;

use lexverify_core::constraint::{eval_expr, parse_decimal, Expr, Value};
use lexverify_core::fixtures::fsc_case;
use lexverify_core::smtlib::{emit_script, EmitOptions, Mode, Status};
use lexverify_core::whatif::{apply_modification, ModifyAction};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::json;

/// Four-level supervisory classification, written out independently of the fixture.
fn expected_level(r: &BigRational, net_worth: &BigRational) -> i64 {
    let n = |v: i64| BigRational::from_integer(BigInt::from(v));
    if *r < n(50) || *net_worth < n(0) {
        4
    } else if *r < n(150) {
        3
    } else if *r < n(200) {
        2
    } else {
        1
    }
}

#[test]
fn capital_level_matches_the_piecewise_definition_at_every_boundary() {
    let solver = common::solver();
    let base = fsc_case();
    let level_rhs = match &base.constraint("c_capital_level").unwrap().expr {
        Expr::Cmp(_, _, rhs) => (**rhs).clone(),
        other => panic!("unexpected shape {other:?}"),
    };
    for r in ["49.999", "50", "149.999", "150", "199.999", "200", "250"] {
        for net_worth in ["2.97", "-0.01"] {
            let mut b = base.clone();
            for (var, value) in [("own_capital", r), ("risk_capital", "100"), ("net_worth", net_worth)] {
                b = apply_modification(&b, var, &ModifyAction::FixValue { value: json!(value) }).unwrap();
            }
            let opts = EmitOptions { pin_penalty: Some(false), want_core: Some(false), ..EmitOptions::default() };
            let script = emit_script(&b, Mode::Illegality, &opts).unwrap();
            let reply = solver.run_check(&script).unwrap();
            assert_eq!(reply.status, Status::Sat);
            let model = reply.model.unwrap();

            let r_exact = parse_decimal(r).unwrap();
            let nw_exact = parse_decimal(net_worth).unwrap();
            assert_eq!(model.get("r"), Some(&Value::Real(r_exact.clone())), "r = {r}");
            let want = Value::Int(BigInt::from(expected_level(&r_exact, &nw_exact)));
            assert_eq!(model.get("capital_level"), Some(&want), "solver at r = {r}, net worth {net_worth}");
            assert_eq!(eval_expr(&level_rhs, &model).unwrap(), want, "evaluator at r = {r}, net worth {net_worth}");
        }
    }
}
