use crate::discretization::grid::{dot, GridDomain};
use crate::discretization::solve::stiffness_solve;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct EigenEstimate {
    pub value: f64,
    /// Eigenvector normalised to `∫ v² = 1`, positive.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

const EIGEN_TOL: f64 = 1e-8;
const EIGEN_MAX_ITER: usize = 500;

/// Smallest Dirichlet eigenvalue of `-Δ` on `d` by inverse power iteration
/// on the pencil `K v = λ M v`.
pub fn smallest_eigenvalue(d: &GridDomain) -> Result<f64> {
    Ok(smallest_eigenpair(d)?.value)
}

pub fn smallest_eigenpair(d: &GridDomain) -> Result<EigenEstimate> {
    let m = d.quad_weights();
    let mut x: Vec<f64> = (0..d.len())
        .map(|i| if d.is_active(i) { 1.0 } else { 0.0 })
        .collect();
    let mut residual = f64::INFINITY;
    for it in 1..=EIGEN_MAX_ITER {
        let mx: Vec<f64> = x.iter().zip(m).map(|(a, w)| a * w).collect();
        let mut y = stiffness_solve(d, &mx, 1e-13)?.x;
        let mass = y.iter().zip(m).map(|(a, w)| w * a * a).sum::<f64>().sqrt();
        for v in y.iter_mut() {
            *v /= mass;
        }
        let ky = d.stiffness(&y);
        let lambda = dot(&ky, &y);
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..y.len() {
            let my = m[i] * y[i];
            num += (ky[i] - lambda * my).powi(2);
            den += my * my;
        }
        residual = num.sqrt() / (lambda * den.sqrt());
        x = y;
        if residual <= EIGEN_TOL {
            return Ok(EigenEstimate {
                value: lambda,
                vector: x,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        solver: "inverse power iteration",
        iterations: EIGEN_MAX_ITER,
        residual,
    })
}
