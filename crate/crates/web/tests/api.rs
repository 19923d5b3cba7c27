use serde_json::Value;

use islm_web::{simulate_json, stabilize_json, trace_json};

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn trace_reference() {
    let v = parse(trace_json("reference", 0.0, 0.0, 0.0).unwrap());
    assert_eq!(v["isocline"]["folds"].as_array().unwrap().len(), 2);
    assert_eq!(v["equilibria"].as_array().unwrap().len(), 1);
}

#[test]
fn fiscal_shift_changes_equilibrium_count() {
    let n = |g: f64| {
        parse(trace_json("reference_fiscal", g, 0.0, 0.0).unwrap())["equilibria"]
            .as_array()
            .unwrap()
            .len()
    };
    assert_eq!(n(0.0), 3);
    assert_eq!(n(0.8), 1);
}

#[test]
fn unknown_economy_is_an_error() {
    assert!(trace_json("nope", 0.0, 0.0, 0.0).is_err());
    assert!(simulate_json("reference", 0.0, 0.0, 0.0, 0.001, "sideways", 3.0, 0.02, 10.0).is_err());
}

#[test]
fn reduced_simulation_cycles() {
    let v = parse(simulate_json("reference", 0.0, 0.0, 0.0, 0.001, "reduced", 3.0, 0.0, 40.0).unwrap());
    let points = v["points"].as_array().unwrap();
    assert!(points.len() > 10 && points.len() <= 3001);
    assert!(v["jumps"].as_array().unwrap().len() >= 2);
    assert!(v["cycle"].is_object());
}

#[test]
fn full_simulation_respects_epsilon() {
    let v = parse(simulate_json("reference", 0.0, 0.0, 0.0, 0.01, "full", 3.0, 0.02, 40.0).unwrap());
    let last = v["points"].as_array().unwrap().last().unwrap()[0].as_f64().unwrap();
    assert!((last - 4000.0).abs() < 1e-6);
}

#[test]
fn stabilizer_removes_the_jump() {
    let v = parse(stabilize_json("reference", 3.0, 5.0, 2000.0, "reduced").unwrap());
    assert_eq!(v["jumps_uncontrolled"], 1);
    assert_eq!(v["jumps_controlled"], 0);
    assert!(stabilize_json("reference", 3.0, 3.5, 2000.0, "reduced").is_err());
}
