//! Linear solves against the stiffness matrix.

use crate::discretization::grid::{dot, GridDomain};
use crate::error::{Error, Result};

/// A symmetric positive definite operator given by its action.
pub trait SpdOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

impl SpdOperator for GridDomain {
    fn dim(&self) -> usize {
        self.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.apply_stiffness(x, out)
    }

    fn diagonal(&self) -> Vec<f64> {
        self.stiffness_diagonal()
    }
}

#[derive(Clone, Debug)]
pub struct LinearSolve {
    pub x: Vec<f64>,
    /// `‖A x − b‖₂ / ‖b‖₂`.
    pub residual: f64,
    pub iterations: usize,
}

pub const DEFAULT_CG_TOL: f64 = 1e-10;

pub fn default_iteration_cap(dim: usize) -> usize {
    10 * (dim as f64).sqrt().ceil() as usize + 1000
}

/// Jacobi-preconditioned conjugate gradients with the default iteration cap.
pub fn cg_solve<O: SpdOperator + ?Sized>(op: &O, rhs: &[f64], tol: f64) -> Result<LinearSolve> {
    cg_solve_capped(op, rhs, tol, default_iteration_cap(op.dim()))
}

pub fn cg_solve_capped<O: SpdOperator + ?Sized>(
    op: &O,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<LinearSolve> {
    let n = op.dim();
    if rhs.len() != n {
        return Err(Error::DomainMismatch(format!(
            "right-hand side has {} entries, operator has dimension {n}",
            rhs.len()
        )));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "cg tolerance must lie in (0, 1), got {tol}"
        )));
    }
    let b_norm = dot(rhs, rhs).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(LinearSolve {
            x,
            residual: 0.0,
            iterations: 0,
        });
    }
    let inv_diag: Vec<f64> = op
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let target = tol * b_norm;
    let mut r_norm = b_norm;
    for it in 1..=max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotConverged {
                solver: "cg (operator not positive definite)",
                iterations: it,
                residual: r_norm / b_norm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        r_norm = dot(&r, &r).sqrt();
        if r_norm <= target {
            return Ok(LinearSolve {
                x,
                residual: r_norm / b_norm,
                iterations: it,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        solver: "cg",
        iterations: max_iter,
        residual: r_norm / b_norm,
    })
}

/// Solves the SPD tridiagonal system with diagonal `diag` and symmetric
/// off-diagonal `off` (length `n - 1`) by Thomas elimination.
pub fn tridiagonal_solve(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    debug_assert_eq!(off.len() + 1, n);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { off[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - off[i - 1] * c[i - 1];
        if i + 1 < n {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Solves `K x = rhs` on a domain: direct tridiagonal elimination on radial
/// grids, preconditioned CG on 3D grids.
pub fn stiffness_solve(d: &GridDomain, rhs: &[f64], tol: f64) -> Result<LinearSolve> {
    if !d.kind().is_radial() {
        return cg_solve(d, rhs, tol);
    }
    if rhs.len() != d.len() {
        return Err(Error::DomainMismatch(format!(
            "right-hand side has {} entries, domain has {}",
            rhs.len(),
            d.len()
        )));
    }
    let (diag, off) = d.radial_bands();
    let x = tridiagonal_solve(&diag, &off, rhs);
    let b_norm = dot(rhs, rhs).sqrt();
    let residual = if b_norm == 0.0 {
        0.0
    } else {
        let kx = d.stiffness(&x);
        let r: f64 = kx.iter().zip(rhs).map(|(a, b)| (a - b) * (a - b)).sum();
        r.sqrt() / b_norm
    };
    Ok(LinearSolve {
        x,
        residual,
        iterations: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_rhs_gives_zero() {
        let d = GridDomain::build_box_grid(7, 1.0).unwrap();
        let s = cg_solve(&d, &vec![0.0; d.len()], 1e-10).unwrap();
        assert!(s.x.iter().all(|v| *v == 0.0));
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn recovers_known_solution() {
        for d in [
            GridDomain::build_box_grid(11, 1.0).unwrap(),
            GridDomain::build_ball_grid(11, 1.0).unwrap(),
            GridDomain::build_radial_grid(101, 1.0).unwrap(),
        ] {
            let y = d
                .field_from_fn(|[x, y, z]| (1.0 + x + 0.5 * y * y - z).sin())
                .unwrap();
            let rhs = d.stiffness(y.values());
            for sol in [
                cg_solve(&d, &rhs, 1e-12).unwrap(),
                stiffness_solve(&d, &rhs, 1e-12).unwrap(),
            ] {
                assert!(sol.residual <= 1e-12);
                let err = sol
                    .x
                    .iter()
                    .zip(y.values())
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                assert!(err < 1e-8, "err {err}");
            }
        }
    }

    #[test]
    fn radial_poisson_matches_closed_form() {
        let d = GridDomain::build_radial_grid(127, 1.0).unwrap();
        let rhs = d.quad_weights().to_vec();
        let phi = stiffness_solve(&d, &rhs, 1e-12).unwrap().x;
        // −Δφ = 1 on the unit ball: φ = (1 − r²)/6
        let err = (0..d.len())
            .map(|k| {
                let r = d.node_radius(k);
                (phi[k] - (1.0 - r * r) / 6.0).abs()
            })
            .fold(0.0f64, f64::max);
        assert!(err * 6.0 < 1e-3, "relative error {}", err * 6.0);
        assert!((phi[0] - 1.0 / 6.0).abs() < 1e-3);
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let d = GridDomain::build_box_grid(15, 1.0).unwrap();
        let rhs: Vec<f64> = (0..d.len()).map(|i| ((i as f64) * 0.37).sin()).collect();
        match cg_solve_capped(&d, &rhs, 1e-12, 3) {
            Err(Error::NotConverged {
                iterations,
                residual,
                ..
            }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-12);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let d = GridDomain::build_box_grid(3, 1.0).unwrap();
        assert!(cg_solve(&d, &vec![1.0; 27], 0.0).is_err());
        assert!(cg_solve(&d, &vec![1.0; 27], 1.5).is_err());
    }

    #[test]
    fn tridiagonal_matches_cg() {
        let d = GridDomain::build_radial_grid(64, 2.0).unwrap();
        let rhs: Vec<f64> = (0..64).map(|k| (k as f64 * PI / 64.0).cos()).collect();
        let a = stiffness_solve(&d, &rhs, 1e-12).unwrap();
        let b = cg_solve(&d, &rhs, 1e-13).unwrap();
        for (x, y) in a.x.iter().zip(&b.x) {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }
}
