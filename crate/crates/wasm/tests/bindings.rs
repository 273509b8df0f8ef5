use serde_json::Value;
use spnodal_wasm::{mutation_names, nehari_landscape, solve_radial, verify_suite};

#[test]
fn radial_solve_returns_two_domain_profile() {
    let r: Value = serde_json::from_str(&solve_radial(63, 5.0).unwrap()).unwrap();
    assert_eq!(r["nodal_domains"], 2);
    assert_eq!(r["converged"], true);
    let n = r["r"].as_array().unwrap().len();
    for key in ["nodal", "ground", "potential"] {
        assert_eq!(r[key].as_array().unwrap().len(), n, "{key}");
    }
    let (c0, cn) = (r["c0"].as_f64().unwrap(), r["c_n"].as_f64().unwrap());
    assert!(c0 > cn && cn > 0.0);
}

#[test]
fn landscape_marks_a_point_inside_its_box() {
    let r: Value = serde_json::from_str(&nehari_landscape(5.0, 1.0, 0.0, 20).unwrap()).unwrap();
    assert_eq!(r["h"].as_array().unwrap().len(), 400);
    let span = r["t"].as_array().unwrap().last().unwrap().as_f64().unwrap();
    assert!(r["t_star"].as_f64().unwrap() < span && r["s_star"].as_f64().unwrap() < span);
    let (lo, hi) = (
        r["box_r"].as_f64().unwrap(),
        r["box_big_r"].as_f64().unwrap(),
    );
    for key in ["t_star", "s_star"] {
        let x = r[key].as_f64().unwrap();
        assert!(lo <= x && x <= hi, "{key} = {x} outside [{lo}, {hi}]");
    }
    // The projection point maximises h along its own ray pair, so it beats the grid origin.
    assert!(r["h_star"].as_f64().unwrap() > 0.0);
}

#[test]
fn suite_passes_clean_and_flags_a_fault() {
    let clean: Value =
        serde_json::from_str(&verify_suite(63, 5.0, 7, 10, "none").unwrap()).unwrap();
    assert_eq!(clean["passed"], true);
    let bad: Value =
        serde_json::from_str(&verify_suite(63, 5.0, 7, 10, "stiffness_skew").unwrap()).unwrap();
    assert_eq!(bad["passed"], false);
}

#[test]
fn mutation_list_starts_with_none() {
    let names: Vec<String> = serde_json::from_str(&mutation_names()).unwrap();
    assert_eq!(names[0], "none");
    assert!(names.len() > 10);
}
