//! Property tests against test-side oracles.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spnodal::discretization::{random_smooth_field, smallest_eigenpair};
use spnodal::io::{export, format_field, import, parse_field, ExportFormat};
use spnodal::{DomainKind, Field, GridDomain, Nonlinearity, Problem};

fn domain(kind: u8, n: usize) -> GridDomain {
    match kind % 3 {
        0 => GridDomain::build_radial_grid(8 * n + 7, 1.0).unwrap(),
        1 => GridDomain::build_box_grid(n + 2, 1.0).unwrap(),
        _ => GridDomain::build_ball_grid(n + 4, 1.0).unwrap(),
    }
}

fn field(d: &GridDomain, seed: u64) -> Field {
    random_smooth_field(d, &mut ChaCha8Rng::seed_from_u64(seed), 2)
}

/// Bitwise equality, except that masked nodes are stored as `+0`.
fn same(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a == 0.0 && b == 0.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sign_parts_recombine(kind in 0u8..3, n in 1usize..6, seed in any::<u64>()) {
        let d = domain(kind, n);
        let u = field(&d, seed);
        let (p, m) = (u.positive_part(), u.negative_part());
        for i in 0..u.len() {
            prop_assert_eq!(p.values()[i] + m.values()[i], u.values()[i]);
            prop_assert_eq!(p.values()[i] * m.values()[i], 0.0);
            prop_assert!(p.values()[i] >= 0.0 && m.values()[i] <= 0.0);
        }
    }

    #[test]
    fn stiffness_is_symmetric_and_positive(kind in 0u8..3, n in 1usize..6, s1 in any::<u64>(), s2 in any::<u64>()) {
        let d = domain(kind, n);
        let (u, v) = (field(&d, s1), field(&d, s2));
        let a = dot(&d.stiffness(u.values()), v.values());
        let b = dot(&d.stiffness(v.values()), u.values());
        let scale = (dot(&d.stiffness(u.values()), u.values()) * dot(&d.stiffness(v.values()), v.values())).sqrt();
        prop_assert!((a - b).abs() <= 1e-12 * scale);
        prop_assert!(dot(&d.stiffness(u.values()), u.values()) > 0.0);
    }

    #[test]
    fn poincare_inequality_holds(kind in 0u8..3, n in 1usize..5, seed in any::<u64>()) {
        let d = domain(kind, n);
        let lambda = smallest_eigenpair(&d).unwrap().value;
        let u = field(&d, seed);
        let h1 = dot(&d.stiffness(u.values()), u.values());
        let l2: f64 = d.quad_weights().iter().zip(u.values()).map(|(w, x)| w * x * x).sum();
        prop_assert!(h1 >= lambda * l2 * (1.0 - 1e-8));
    }

    #[test]
    fn potential_scales_quadratically(kind in 0u8..3, n in 1usize..5, seed in any::<u64>(), t in 0.1f64..4.0) {
        let d = domain(kind, n);
        let nl = Nonlinearity::pure_power(1.0, 5.0).unwrap();
        let p = Problem::with_tol(&d, &nl, 1e-12);
        let u = field(&d, seed);
        let phi = p.poisson.solve_phi(&u).unwrap().phi.clone();
        let pt = p.poisson.solve_phi(&u.scaled(t)).unwrap().phi.clone();
        let err = pt.values().iter().zip(phi.values()).map(|(a, b)| (a - t * t * b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-8 * pt.max_abs());
        prop_assert!(phi.values().iter().all(|v| *v >= -1e-10 * phi.max_abs()));
    }

    #[test]
    fn field_file_round_trips_bitwise(kind in 0u8..3, n in 1usize..5, seed in any::<u64>(), scale in -1e6f64..1e6) {
        let d = domain(kind, n);
        let u = field(&d, seed).scaled(scale);
        let (d2, u2) = parse_field(&format_field(&d, &u).unwrap()).unwrap();
        prop_assert_eq!(d2.key(), d.key());
        for (a, b) in u.values().iter().zip(u2.values()) {
            prop_assert!(same(*a, *b), "{} vs {}", a, b);
        }
        let fmt = ExportFormat::for_kind(d.kind());
        let (d3, u3) = import(&export(&d, &u, fmt).unwrap()).unwrap();
        prop_assert_eq!(d3.key(), d.key());
        for (a, b) in u.values().iter().zip(u3.values()) {
            prop_assert!(same(*a, *b), "{} vs {}", a, b);
        }
    }
}

#[test]
fn box_eigenvalue_matches_closed_form() {
    // Discrete 7-point Dirichlet eigenvalue: 3 · (4/h²) sin²(πh/2).
    let d = GridDomain::build(DomainKind::Box3d, 9, 1.0).unwrap();
    let h = d.h();
    let exact = 3.0 * 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
    let got = smallest_eigenpair(&d).unwrap().value;
    assert!((got - exact).abs() <= 1e-8 * exact, "{got} vs {exact}");
}
