//! Bundled example cases.

/// The worked insurance capital-adequacy case.
pub const FSC_CASE: &str = include_str!("../../../fixtures/fsc_case.json");

pub fn fsc_case() -> crate::constraint::ConstraintBundle {
    crate::constraint::ConstraintBundle::from_json_str(FSC_CASE).expect("bundled fixture parses")
}

#[cfg(test)]
mod tests {
    use crate::constraint::Expr;

    #[test]
    fn schema_lists_only_operators_the_parser_accepts() {
        let schema: serde_json::Value = serde_json::from_str(crate::BUNDLE_SCHEMA).unwrap();
        let ops = schema["$defs"]["expr"]["oneOf"][3]["prefixItems"][0]["enum"].as_array().unwrap();
        for op in ops {
            let op = op.as_str().unwrap();
            let args = match op {
                "not" => serde_json::json!([op, true]),
                "ite" => serde_json::json!([op, true, 1, 2]),
                "int" => serde_json::json!([op, "3"]),
                "-" | "*" | "/" | "+" | "<" | "<=" | ">" | ">=" | "=" | "distinct" => serde_json::json!([op, 1, 2]),
                _ => serde_json::json!([op, true, false]),
            };
            serde_json::from_value::<Expr>(args).unwrap_or_else(|e| panic!("{op}: {e}"));
        }
        let fixture: serde_json::Value = serde_json::from_str(super::FSC_CASE).unwrap();
        for key in schema["required"].as_array().unwrap() {
            assert!(fixture.get(key.as_str().unwrap()).is_some());
        }
    }
}
