use pinvit_web::{contraction_json, epsilon_trace_json, grid_solve_json};
use serde_json::Value;

#[test]
fn grid_solve_returns_field_on_the_lshape() {
    let v: Value = serde_json::from_str(&grid_solve_json("lshape", 16, 1e-6, "truncate", 1).unwrap()).unwrap();
    let (nx, ny) = (v["nx"].as_u64().unwrap() as usize, v["ny"].as_u64().unwrap() as usize);
    let field = v["field"].as_array().unwrap();
    assert_eq!(field.len(), (nx + 1) * (ny + 1));
    // the removed quadrant and the boundary carry no values
    assert!(field[ny * (nx + 1) + nx].is_null());
    let values: Vec<f64> = field.iter().filter_map(Value::as_f64).collect();
    assert_eq!(values.len(), v["unknowns"].as_u64().unwrap() as usize);
    assert!(values.iter().all(|&x| x > 0.0 && x <= 1.0 + 1e-12));
    let mu = v["mu"].as_f64().unwrap();
    assert!((mu - 9.64).abs() < 0.5, "mu = {mu}");
}

#[test]
fn grid_solve_rejects_bad_input() {
    assert!(grid_solve_json("torus", 8, 1e-6, "exact", 1).is_err());
    assert!(grid_solve_json("square", 8, 1e-6, "fuzzy", 1).is_err());
    assert!(grid_solve_json("square", 400, 1e-6, "exact", 1).is_err());
}

#[test]
fn contraction_never_exceeds_q_squared() {
    for gamma in [0.0, 0.3, 0.9] {
        let v: Value = serde_json::from_str(&contraction_json(gamma, 1.0, 2.0, 40).unwrap()).unwrap();
        let q2 = v["q_squared"].as_f64().unwrap();
        let observed = v["observed"].as_array().unwrap();
        assert!(!observed.is_empty());
        assert!(observed.iter().all(|r| r.as_f64().unwrap() <= q2 + 1e-10), "gamma {gamma}: {v}");
    }
}

#[test]
fn epsilon_trace_stays_above_floor() {
    let v: Value = serde_json::from_str(&epsilon_trace_json(31, 1e-8, 1.0).unwrap()).unwrap();
    let kappa = v["kappa_floor"].as_f64().unwrap();
    let c3 = v["c3"].as_f64().unwrap();
    assert!(kappa > 0.0);
    let eps: Vec<f64> = v["epsilon"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let rho: Vec<f64> = v["rho_eps"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    // every stepped row passed the accuracy test
    for (e, r) in eps.iter().zip(&rho).take(eps.len() - 1) {
        assert!(*e <= c3 * r);
    }
}
