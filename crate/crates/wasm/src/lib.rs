//! Browser bindings for the demo page in `www/`. Every entry point takes
//! plain numbers and returns a JSON string.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use spnodal::minimizer::{
    ground_guess, initial_guess, minimize_ground, minimize_nodal, InitStyle, MinimizeOptions,
};
use spnodal::nehari::{
    coefficients, eval_h, find_miranda_box, solve_projection, DEFAULT_PROJECTION_TOL,
};
use spnodal::verify::{run_suite, Mutation, SuiteConfig};
use spnodal::{Error, GridDomain, Nonlinearity, Problem};

fn to_js<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data")
}

fn err(e: Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn setup(n: usize, p: f64) -> Result<(GridDomain, Nonlinearity), JsValue> {
    let d = GridDomain::build_radial_grid(n, 1.0).map_err(err)?;
    let nl = Nonlinearity::pure_power(1.0, p).map_err(err)?;
    Ok((d, nl))
}

#[derive(Serialize)]
struct Profiles {
    r: Vec<f64>,
    nodal: Vec<f64>,
    ground: Vec<f64>,
    potential: Vec<f64>,
    c0: f64,
    c_n: f64,
    iterations: usize,
    converged: bool,
    nodal_domains: usize,
    energy: Vec<f64>,
}

/// Nodal and ground-state profiles on the unit ball for `f(u) = |u|^{p-2}u`,
/// with the potential of the nodal solution and the energy history.
#[wasm_bindgen]
pub fn solve_radial(n: usize, p: f64) -> Result<String, JsValue> {
    let (d, nl) = setup(n, p)?;
    let prob = Problem::new(&d, &nl);
    let opts = MinimizeOptions::default();
    let nodal =
        minimize_nodal(&prob, &initial_guess(&d, InitStyle::Dipole, 0), &opts).map_err(err)?;
    let ground = minimize_ground(&prob, &ground_guess(&d), &opts).map_err(err)?;
    let potential = prob
        .poisson
        .solve_phi(&nodal.w)
        .map_err(err)?
        .phi
        .values()
        .to_vec();
    Ok(to_js(&Profiles {
        r: (0..d.len()).map(|k| d.node_radius(k)).collect(),
        nodal: nodal.w.values().to_vec(),
        ground: ground.w.values().to_vec(),
        potential,
        c0: nodal.c0,
        c_n: ground.c0,
        iterations: nodal.iterations,
        converged: nodal.converged(),
        nodal_domains: nodal.nodal.count,
        energy: nodal.history.iter().map(|h| h.j).collect(),
    }))
}

#[derive(Serialize)]
struct Landscape {
    t: Vec<f64>,
    s: Vec<f64>,
    /// Row-major: `h[i * s.len() + j] = h(t[i], s[j])`.
    h: Vec<f64>,
    t_star: f64,
    s_star: f64,
    h_star: f64,
    box_r: f64,
    box_big_r: f64,
}

/// `h(t, s) = J(t v⁺ + s v⁻)` on `[0, t_max]²` for a field mixing a core
/// bump and a shell of opposite sign, with its projection point and the
/// sign-certified box around it. `t_max ≤ 0` picks a range that shows the
/// projection point.
#[wasm_bindgen]
pub fn nehari_landscape(p: f64, shell: f64, t_max: f64, samples: usize) -> Result<String, JsValue> {
    let (d, nl) = setup(127, p)?;
    let prob = Problem::new(&d, &nl);
    let v = d
        .field_from_fn(|[r, _, _]| {
            (-(r / 0.25).powi(2)).exp() - shell * (-((r - 0.65) / 0.15).powi(2)).exp()
        })
        .map_err(err)?;
    let c = coefficients(&prob, &v).map_err(err)?;
    let proj = solve_projection(&c, &nl, DEFAULT_PROJECTION_TOL).map_err(err)?;
    let bx = find_miranda_box(&c, &nl).map_err(err)?;
    let m = samples.clamp(8, 200);
    let t_max = if t_max > 0.0 {
        t_max
    } else {
        1.5 * proj.t.max(proj.s)
    };
    let axis: Vec<f64> = (0..m).map(|i| t_max * i as f64 / (m - 1) as f64).collect();
    let mut h = Vec::with_capacity(m * m);
    for t in &axis {
        for s in &axis {
            h.push(eval_h(&c, &nl, *t, *s));
        }
    }
    Ok(to_js(&Landscape {
        t: axis.clone(),
        s: axis,
        h,
        t_star: proj.t,
        s_star: proj.s,
        h_star: eval_h(&c, &nl, proj.t, proj.s),
        box_r: bx.r,
        box_big_r: bx.big_r,
    }))
}

/// The invariant suite on a radial grid, optionally with a deliberate fault.
#[wasm_bindgen]
pub fn verify_suite(
    n: usize,
    p: f64,
    seed: u32,
    samples: usize,
    mutation: &str,
) -> Result<String, JsValue> {
    let (d, nl) = setup(n, p)?;
    let mutation: Mutation = mutation.parse().map_err(err)?;
    let report = run_suite(
        &d,
        &nl,
        &SuiteConfig {
            seed: seed.into(),
            n_samples: samples,
            mutation,
        },
    )
    .map_err(err)?;
    Ok(report.to_json())
}

/// Names accepted by `verify_suite`.
#[wasm_bindgen]
pub fn mutation_names() -> String {
    to_js(&Mutation::ALL.iter().map(|m| m.as_str()).collect::<Vec<_>>())
}
