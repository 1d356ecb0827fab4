//! Records must validate against the published schema file.

use congestlab::cluster::Fidelity;
use congestlab::config;
use congestlab::graph::{GraphSpec, WeightDist};
use congestlab::sssp::AlgorithmConstants;
use congestlab_cli::{run_experiment, Algo, ExperimentSpec};
use serde_json::Value;

/// Minimal structural validator for the schema subset we publish: type,
/// required, properties, additionalProperties, items, enum.
fn validate(schema: &Value, value: &Value, path: &str) -> Result<(), String> {
    if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            return Err(format!("{path}: {value} not in enum"));
        }
    }
    match schema.get("type").and_then(Value::as_str) {
        Some("object") => {
            let obj = value
                .as_object()
                .ok_or(format!("{path}: expected object"))?;
            let props = schema.get("properties").and_then(Value::as_object);
            if let Some(required) = schema.get("required").and_then(Value::as_array) {
                for key in required.iter().filter_map(Value::as_str) {
                    if !obj.contains_key(key) {
                        return Err(format!("{path}: missing required key {key}"));
                    }
                }
            }
            for (k, v) in obj {
                let sub = props.and_then(|p| p.get(k));
                match sub {
                    Some(s) => validate(s, v, &format!("{path}.{k}"))?,
                    None => match schema.get("additionalProperties") {
                        Some(Value::Bool(false)) => {
                            return Err(format!("{path}: unexpected key {k}"))
                        }
                        Some(s @ Value::Object(_)) => {
                            validate(s, v, &format!("{path}.{k}"))?
                        }
                        _ => {}
                    },
                }
            }
            Ok(())
        }
        Some("array") => {
            let arr = value.as_array().ok_or(format!("{path}: expected array"))?;
            if let Some(items) = schema.get("items") {
                for (i, v) in arr.iter().enumerate() {
                    validate(items, v, &format!("{path}[{i}]"))?;
                }
            }
            Ok(())
        }
        Some("string") => value
            .as_str()
            .map(|_| ())
            .ok_or(format!("{path}: expected string")),
        Some("number") => value
            .as_f64()
            .map(|_| ())
            .ok_or(format!("{path}: expected number")),
        Some("integer") => value
            .as_i64()
            .or(value.as_u64().map(|v| v as i64))
            .map(|_| ())
            .ok_or(format!("{path}: expected integer")),
        Some("boolean") => value
            .as_bool()
            .map(|_| ())
            .ok_or(format!("{path}: expected boolean")),
        _ => Ok(()),
    }
}

#[test]
fn records_validate_against_published_schema() {
    let schema_text = std::fs::read_to_string(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/result-record.schema.json"),
    )
    .expect("published schema file exists");
    let schema: Value = serde_json::from_str(&schema_text).unwrap();
    for (algo, graph) in [
        (Algo::Ldd, GraphSpec::Grid { rows: 6, cols: 6, weights: WeightDist::Unit }),
        (
            Algo::Partwise,
            GraphSpec::ErdosRenyiConnected { n: 24, p: 0.2, weights: WeightDist::Unit },
        ),
        (Algo::HeadsTails, GraphSpec::Line { n: 20, weights: WeightDist::Unit }),
    ] {
        let spec = ExperimentSpec {
            graph,
            algo,
            beta: 0.15,
            trials: 4,
            seed: 9,
            constants: AlgorithmConstants::default(),
            kappa_bits: config::DEFAULT_KAPPA_BITS,
            fidelity: Fidelity::RoundAccounted,
        };
        let record = run_experiment(&spec).unwrap();
        let value: Value = serde_json::from_str(&record.to_json()).unwrap();
        validate(&schema, &value, "$").unwrap_or_else(|e| panic!("{algo:?}: {e}"));
    }
}
