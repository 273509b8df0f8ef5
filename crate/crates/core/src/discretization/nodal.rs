//! Nodal-domain counting by connected-component labelling of the strict
//! positivity and negativity sets.

use std::collections::VecDeque;

use serde::Serialize;

use crate::discretization::grid::{Field, GridDomain};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodalReport {
    pub count: usize,
    pub volumes: Vec<f64>,
    pub signs: Vec<i8>,
    pub threshold: f64,
}

/// `1e-8 · max|u|`.
pub fn default_threshold(u: &Field) -> f64 {
    1e-8 * u.max_abs()
}

/// Components of `{u > threshold}` and `{u < -threshold}` under face
/// connectivity (6-neighbour in 3D, interval in radial).
pub fn nodal_domains(d: &GridDomain, u: &Field, threshold: f64) -> Result<NodalReport> {
    d.check(u)?;
    let values = u.values();
    let weights = d.quad_weights();
    let sign_of = |v: f64| -> i8 {
        if v > threshold {
            1
        } else if v < -threshold {
            -1
        } else {
            0
        }
    };
    let mut seen = vec![false; d.len()];
    let mut volumes = Vec::new();
    let mut signs = Vec::new();
    let mut queue = VecDeque::new();
    let mut nbrs = Vec::with_capacity(6);
    for start in 0..d.len() {
        if seen[start] || !d.is_active(start) {
            continue;
        }
        let sign = sign_of(values[start]);
        if sign == 0 {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut volume = 0.0;
        while let Some(idx) = queue.pop_front() {
            volume += weights[idx];
            d.neighbours(idx, &mut nbrs);
            for &j in &nbrs {
                if !seen[j] && d.is_active(j) && sign_of(values[j]) == sign {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        volumes.push(volume);
        signs.push(sign);
    }
    Ok(NodalReport {
        count: volumes.len(),
        volumes,
        signs,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(c: [f64; 3], w: f64) -> impl Fn([f64; 3]) -> f64 {
        move |x| {
            let r2: f64 = (0..3).map(|i| (x[i] - c[i]).powi(2)).sum();
            if r2 < w * w {
                (w * w - r2).powi(2)
            } else {
                0.0
            }
        }
    }

    #[test]
    fn counts_bumps_in_box() {
        let d = GridDomain::build_box_grid(15, 1.0).unwrap();
        let one = d.field_from_fn(bump([0.5; 3], 0.3)).unwrap();
        let r = nodal_domains(&d, &one, default_threshold(&one)).unwrap();
        assert_eq!(r.count, 1);
        assert_eq!(r.signs, vec![1]);

        let plus = bump([0.25; 3], 0.2);
        let minus = bump([0.75; 3], 0.2);
        let two = d.field_from_fn(|x| plus(x) - minus(x)).unwrap();
        let r = nodal_domains(&d, &two, default_threshold(&two)).unwrap();
        assert_eq!(r.count, 2);
        let mut signs = r.signs.clone();
        signs.sort();
        assert_eq!(signs, vec![-1, 1]);
        assert!(r.volumes.iter().all(|v| *v > 0.0));
        assert!((r.volumes[0] - r.volumes[1]).abs() < 1e-12);

        let zero = d.zeros();
        assert_eq!(nodal_domains(&d, &zero, 0.0).unwrap().count, 0);
    }

    #[test]
    fn radial_intervals() {
        let d = GridDomain::build_radial_grid(63, 1.0).unwrap();
        let u = d
            .field_from_fn(|[r, _, _]| (3.0 * std::f64::consts::PI * r).sin() / r)
            .unwrap();
        let r = nodal_domains(&d, &u, default_threshold(&u)).unwrap();
        assert_eq!(r.count, 3);
        assert_eq!(r.signs, vec![1, -1, 1]);
    }

    #[test]
    fn same_sign_components_stay_separate() {
        let d = GridDomain::build_box_grid(15, 1.0).unwrap();
        let a = bump([0.25, 0.5, 0.5], 0.15);
        let b = bump([0.75, 0.5, 0.5], 0.15);
        let u = d.field_from_fn(|x| a(x) + b(x)).unwrap();
        let r = nodal_domains(&d, &u, default_threshold(&u)).unwrap();
        assert_eq!(r.count, 2);
        assert_eq!(r.signs, vec![1, 1]);
    }
}
