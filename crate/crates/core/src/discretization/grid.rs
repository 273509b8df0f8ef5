//! Uniform grids on the unit-style domains used by the solver and the
//! nodal fields that live on them.
//!
//! Three layouts are supported:
//! - `Box3d`: the cube `[0, side]^3` with `n^3` interior nodes and the
//!   7-point stencil;
//! - `Ball3d`: the ball of radius `R` embedded in the cube `[-R, R]^3`, where
//!   every node with `|x| >= R` is masked out and treated as Dirichlet;
//! - `RadialBall`: radially symmetric functions on the ball, reduced to a 1D
//!   conservative (finite-volume) discretization of `v'' + (2/r) v'`.
//!
//! Every layout is written as `K u = M (-Δu)` with `K` the symmetric
//! stiffness matrix and `M` the diagonal quadrature (lumped mass) matrix, so
//! `uᵀ K v` is the discrete `∫ ∇u·∇v` and `Σ M_i g_i` is the discrete `∫ g`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Box3d,
    Ball3d,
    RadialBall,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::Box3d => "box3d",
            DomainKind::Ball3d => "ball3d",
            DomainKind::RadialBall => "radial_ball",
        }
    }

    pub fn is_radial(self) -> bool {
        self == DomainKind::RadialBall
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box3d" | "box" => Ok(DomainKind::Box3d),
            "ball3d" | "ballmask" | "ball_mask" => Ok(DomainKind::Ball3d),
            "radial_ball" | "ball" | "radial" => Ok(DomainKind::RadialBall),
            other => Err(Error::Parse(format!("unknown domain kind `{other}`"))),
        }
    }
}

/// Identifies the domain a [`Field`] was built on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DomainKey {
    kind: DomainKind,
    n: usize,
    extent_bits: u64,
}

#[derive(Clone, Debug)]
pub struct GridDomain {
    kind: DomainKind,
    n: usize,
    h: f64,
    extent: f64,
    boundary_mask: Vec<bool>,
    quad_weights: Vec<f64>,
    /// Radial only: `4π r²/h` on the face between node `k` and `k + 1`
    /// (the last entry couples node `n - 1` to the Dirichlet node at `r = R`).
    couplings: Vec<f64>,
}

impl GridDomain {
    /// Uniform grid on `[0, side]^3` with `n` interior nodes per axis.
    pub fn build_box_grid(n: usize, side: f64) -> Result<Self> {
        check_size(n, side, "side")?;
        let h = side / (n + 1) as f64;
        let len = n * n * n;
        Ok(GridDomain {
            kind: DomainKind::Box3d,
            n,
            h,
            extent: side,
            boundary_mask: vec![false; len],
            quad_weights: vec![h * h * h; len],
            couplings: Vec::new(),
        })
    }

    /// Ball of radius `radius` embedded in `[-radius, radius]^3` with `n`
    /// interior nodes per axis; nodes with `|x| >= radius` are boundary.
    pub fn build_ball_grid(n: usize, radius: f64) -> Result<Self> {
        check_size(n, radius, "radius")?;
        let h = 2.0 * radius / (n + 1) as f64;
        let len = n * n * n;
        let mut mask = vec![false; len];
        let mut weights = vec![0.0; len];
        let mut d = GridDomain {
            kind: DomainKind::Ball3d,
            n,
            h,
            extent: radius,
            boundary_mask: Vec::new(),
            quad_weights: Vec::new(),
            couplings: Vec::new(),
        };
        for idx in 0..len {
            if d.node_radius(idx) >= radius {
                mask[idx] = true;
            } else {
                weights[idx] = h * h * h;
            }
        }
        d.boundary_mask = mask;
        d.quad_weights = weights;
        Ok(d)
    }

    /// Radial mesh `r_k = (k + 1) h`, `h = radius / (n + 1)`, for radially
    /// symmetric functions on the ball. Node 0 owns the cell `[0, 3h/2]`
    /// (no flux through `r = 0`, i.e. `v'(0) = 0`), the last node owns
    /// `[R - 3h/2, R]`, and the weights sum to `4πR³/3` exactly.
    pub fn build_radial_grid(n: usize, radius: f64) -> Result<Self> {
        check_size(n, radius, "radius")?;
        let h = radius / (n + 1) as f64;
        let shell = |a: f64, b: f64| 4.0 * PI / 3.0 * (b * b * b - a * a * a);
        let mut weights = Vec::with_capacity(n);
        for k in 0..n {
            let lo = if k == 0 { 0.0 } else { (k as f64 + 0.5) * h };
            let hi = if k + 1 == n {
                radius
            } else {
                (k as f64 + 1.5) * h
            };
            weights.push(shell(lo, hi));
        }
        let couplings = (0..n)
            .map(|k| {
                let face = (k as f64 + 1.5) * h;
                4.0 * PI * face * face / h
            })
            .collect();
        Ok(GridDomain {
            kind: DomainKind::RadialBall,
            n,
            h,
            extent: radius,
            boundary_mask: vec![false; n],
            quad_weights: weights,
            couplings,
        })
    }

    /// Rebuilds a domain from its descriptor.
    pub fn build(kind: DomainKind, n: usize, extent: f64) -> Result<Self> {
        match kind {
            DomainKind::Box3d => Self::build_box_grid(n, extent),
            DomainKind::Ball3d => Self::build_ball_grid(n, extent),
            DomainKind::RadialBall => Self::build_radial_grid(n, extent),
        }
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Box side length, or ball radius.
    pub fn extent(&self) -> f64 {
        self.extent
    }

    /// Number of stored nodes (masked ones included).
    pub fn len(&self) -> usize {
        self.quad_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quad_weights.is_empty()
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    #[inline]
    pub fn is_active(&self, idx: usize) -> bool {
        !self.boundary_mask[idx]
    }

    pub fn active_count(&self) -> usize {
        self.boundary_mask.iter().filter(|b| !**b).count()
    }

    /// |Ω| as seen by the quadrature.
    pub fn volume(&self) -> f64 {
        self.quad_weights.iter().sum()
    }

    pub fn key(&self) -> DomainKey {
        DomainKey {
            kind: self.kind,
            n: self.n,
            extent_bits: self.extent.to_bits(),
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "{} n={} extent={} h={}",
            self.kind, self.n, self.extent, self.h
        )
    }

    /// Cartesian coordinates of a 3D node (`Box3d`/`Ball3d` only).
    pub fn coordinates(&self, idx: usize) -> [f64; 3] {
        debug_assert!(!self.kind.is_radial());
        let n = self.n;
        let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
        let origin = match self.kind {
            DomainKind::Ball3d => -self.extent,
            _ => 0.0,
        };
        [
            origin + (i + 1) as f64 * self.h,
            origin + (j + 1) as f64 * self.h,
            origin + (k + 1) as f64 * self.h,
        ]
    }

    /// Distance of a node from the domain centre.
    pub fn node_radius(&self, idx: usize) -> f64 {
        match self.kind {
            DomainKind::RadialBall => (idx + 1) as f64 * self.h,
            DomainKind::Ball3d => {
                let [x, y, z] = self.coordinates(idx);
                (x * x + y * y + z * z).sqrt()
            }
            DomainKind::Box3d => {
                let c = 0.5 * self.extent;
                let [x, y, z] = self.coordinates(idx);
                ((x - c).powi(2) + (y - c).powi(2) + (z - c).powi(2)).sqrt()
            }
        }
    }

    /// Face neighbours of a node (6-connectivity in 3D, interval in radial),
    /// restricted to stored nodes.
    pub fn neighbours(&self, idx: usize, out: &mut Vec<usize>) {
        out.clear();
        let n = self.n;
        if self.kind.is_radial() {
            if idx > 0 {
                out.push(idx - 1);
            }
            if idx + 1 < n {
                out.push(idx + 1);
            }
            return;
        }
        let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
        let plane = n * n;
        if i > 0 {
            out.push(idx - 1);
        }
        if i + 1 < n {
            out.push(idx + 1);
        }
        if j > 0 {
            out.push(idx - n);
        }
        if j + 1 < n {
            out.push(idx + n);
        }
        if k > 0 {
            out.push(idx - plane);
        }
        if k + 1 < n {
            out.push(idx + plane);
        }
    }

    /// `out = K x`, the symmetric stiffness matrix with Dirichlet elimination.
    pub fn apply_stiffness(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.len());
        debug_assert_eq!(out.len(), self.len());
        if self.kind.is_radial() {
            let n = self.n;
            let c = &self.couplings;
            for k in 0..n {
                let mut acc = c[k] * x[k];
                if k + 1 < n {
                    acc -= c[k] * x[k + 1];
                }
                if k > 0 {
                    acc += c[k - 1] * (x[k] - x[k - 1]);
                }
                out[k] = acc;
            }
            return;
        }
        // K = h³ · (1/h²) · (6 u_i − Σ u_j)
        let n = self.n;
        let plane = n * n;
        let h = self.h;
        let masked = self.kind == DomainKind::Ball3d;
        for k in 0..n {
            for j in 0..n {
                let row = n * (j + n * k);
                for i in 0..n {
                    let idx = row + i;
                    if masked && self.boundary_mask[idx] {
                        out[idx] = 0.0;
                        continue;
                    }
                    let mut s = 6.0 * x[idx];
                    if i > 0 {
                        s -= x[idx - 1];
                    }
                    if i + 1 < n {
                        s -= x[idx + 1];
                    }
                    if j > 0 {
                        s -= x[idx - n];
                    }
                    if j + 1 < n {
                        s -= x[idx + n];
                    }
                    if k > 0 {
                        s -= x[idx - plane];
                    }
                    if k + 1 < n {
                        s -= x[idx + plane];
                    }
                    out[idx] = h * s;
                }
            }
        }
    }

    pub fn stiffness(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_stiffness(x, &mut out);
        out
    }

    pub fn stiffness_diagonal(&self) -> Vec<f64> {
        if self.kind.is_radial() {
            return (0..self.n)
                .map(|k| self.couplings[k] + if k > 0 { self.couplings[k - 1] } else { 0.0 })
                .collect();
        }
        self.boundary_mask
            .iter()
            .map(|&m| if m { 1.0 } else { 6.0 * self.h })
            .collect()
    }

    /// Radial only: the tridiagonal stiffness as (diagonal, off-diagonal).
    pub(crate) fn radial_bands(&self) -> (Vec<f64>, Vec<f64>) {
        debug_assert!(self.kind.is_radial());
        let diag = self.stiffness_diagonal();
        let off = self.couplings[..self.n - 1].iter().map(|c| -c).collect();
        (diag, off)
    }

    pub fn check(&self, u: &Field) -> Result<()> {
        if u.key != self.key() {
            return Err(Error::DomainMismatch(format!(
                "field built for {:?} n={} but domain is {}",
                u.key.kind,
                u.key.n,
                self.describe()
            )));
        }
        Ok(())
    }

    /// Wraps nodal values as a field, zeroing masked nodes.
    pub fn field(&self, mut values: Vec<f64>) -> Result<Field> {
        if values.len() != self.len() {
            return Err(Error::DomainMismatch(format!(
                "expected {} nodal values, got {}",
                self.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        for (v, &m) in values.iter_mut().zip(&self.boundary_mask) {
            if m {
                *v = 0.0;
            }
        }
        Ok(Field {
            key: self.key(),
            values,
        })
    }

    pub fn zeros(&self) -> Field {
        Field {
            key: self.key(),
            values: vec![0.0; self.len()],
        }
    }

    /// Samples `g(x)` at every active node; for radial grids `x = [r, 0, 0]`.
    pub fn field_from_fn(&self, mut g: impl FnMut([f64; 3]) -> f64) -> Result<Field> {
        let values = (0..self.len())
            .map(|idx| {
                if !self.is_active(idx) {
                    0.0
                } else if self.kind.is_radial() {
                    g([self.node_radius(idx), 0.0, 0.0])
                } else {
                    g(self.coordinates(idx))
                }
            })
            .collect();
        self.field(values)
    }

    /// Discrete `-Δu` with Dirichlet elimination: `M⁻¹ K u`.
    pub fn apply_laplacian(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let mut out = self.stiffness(&u.values);
        for (idx, o) in out.iter_mut().enumerate() {
            let w = self.quad_weights[idx];
            *o = if w > 0.0 { *o / w } else { 0.0 };
        }
        Ok(Field {
            key: u.key,
            values: out,
        })
    }

    /// `⟨-Δu, v⟩ = uᵀ K v`, the discrete `∫ ∇u·∇v`.
    pub fn inner_h1(&self, u: &Field, v: &Field) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(dot(&self.stiffness(&u.values), &v.values))
    }

    pub fn norm_h1(&self, u: &Field) -> Result<f64> {
        Ok(self.inner_h1(u, u)?.max(0.0).sqrt())
    }

    /// `Σ w_i g_i` over the stored nodes (masked nodes have zero weight).
    pub fn integrate(&self, g: &[f64]) -> Result<f64> {
        if g.len() != self.len() {
            return Err(Error::DomainMismatch(format!(
                "expected {} nodal values, got {}",
                self.len(),
                g.len()
            )));
        }
        Ok(dot(&self.quad_weights, g))
    }

    /// `∫ u v` with the lumped quadrature.
    pub fn inner_l2(&self, u: &Field, v: &Field) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(self
            .quad_weights
            .iter()
            .zip(u.values.iter().zip(&v.values))
            .map(|(w, (a, b))| w * a * b)
            .sum())
    }

    /// `Σ w_i g(u_i)` without allocating.
    pub fn integrate_map(&self, u: &Field, g: impl Fn(f64) -> f64) -> Result<f64> {
        self.check(u)?;
        Ok(self
            .quad_weights
            .iter()
            .zip(&u.values)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, &x)| w * g(x))
            .sum())
    }
}

fn check_size(n: usize, extent: f64, what: &str) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidGrid(format!(
            "need at least 3 nodes per axis, got {n}"
        )));
    }
    if !(extent.is_finite() && extent > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "{what} must be positive, got {extent}"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Nodal values of a function in the discrete `H¹₀(Ω)`; masked nodes are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    key: DomainKey,
    values: Vec<f64>,
}

impl Field {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn key(&self) -> DomainKey {
        self.key
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Field, b: f64) -> Field {
        assert_eq!(self.key, other.key, "fields live on different domains");
        Field {
            key: self.key,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn map(&self, g: impl Fn(f64) -> f64) -> Field {
        Field {
            key: self.key,
            values: self.values.iter().map(|&v| g(v)).collect(),
        }
    }

    pub fn positive_part(&self) -> Field {
        positive_part(self)
    }

    pub fn negative_part(&self) -> Field {
        negative_part(self)
    }
}

/// `u⁺ = max{u, 0}` nodewise.
pub fn positive_part(u: &Field) -> Field {
    u.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// `u⁻ = min{u, 0}` nodewise.
pub fn negative_part(u: &Field) -> Field {
    u.map(|v| if v < 0.0 { v } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(d: &GridDomain, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        d.field((0..d.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn box_grid_counts() {
        let d = GridDomain::build_box_grid(3, 1.0).unwrap();
        assert_eq!(d.len(), 27);
        assert_eq!(d.h(), 0.25);
        let d = GridDomain::build_box_grid(31, 1.0).unwrap();
        assert_eq!(d.len(), 29791);
        assert_eq!(d.h(), 1.0 / 32.0);
        assert!(GridDomain::build_box_grid(2, 1.0).is_err());
        assert!(GridDomain::build_box_grid(5, 0.0).is_err());
    }

    #[test]
    fn radial_grid_spacing_and_volume() {
        let d = GridDomain::build_radial_grid(3, 2.0).unwrap();
        assert_eq!(d.h(), 0.5);
        assert!(GridDomain::build_radial_grid(1, 1.0).is_err());
        let d = GridDomain::build_radial_grid(511, 1.0).unwrap();
        assert_eq!(d.h(), 1.0 / 512.0);
        let ball = 4.0 * PI / 3.0;
        assert!((d.volume() - ball).abs() / ball < 1e-3);
        for (k, w) in d.quad_weights().iter().enumerate().skip(1).take(500) {
            let r = (k + 1) as f64 * d.h();
            // interior cells: 4πh(r² + h²/12)
            assert_relative_eq!(
                *w,
                4.0 * PI * d.h() * (r * r + d.h() * d.h() / 12.0),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn box_volume_is_weight_sum() {
        let d = GridDomain::build_box_grid(9, 1.0).unwrap();
        let ones = vec![1.0; d.len()];
        let nh = 9.0 * d.h();
        assert_relative_eq!(
            d.integrate(&ones).unwrap(),
            nh * nh * nh,
            max_relative = 1e-13
        );
        assert_eq!(d.integrate(&vec![0.0; d.len()]).unwrap(), 0.0);
    }

    #[test]
    fn ball_mask_volume_close_to_ball() {
        let d = GridDomain::build_ball_grid(31, 1.0).unwrap();
        let ball = 4.0 * PI / 3.0;
        assert!((d.volume() - ball).abs() / ball < 0.05);
        let u = d.field(vec![1.0; d.len()]).unwrap();
        for (idx, m) in d.boundary_mask().iter().enumerate() {
            if *m {
                assert_eq!(u.values()[idx], 0.0);
            }
        }
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        for d in [
            GridDomain::build_box_grid(5, 1.0).unwrap(),
            GridDomain::build_radial_grid(17, 1.0).unwrap(),
        ] {
            assert!(d.apply_laplacian(&d.zeros()).unwrap().is_zero());
            assert_eq!(d.inner_h1(&d.zeros(), &d.zeros()).unwrap(), 0.0);
        }
    }

    #[test]
    fn box_sine_mode_is_discrete_eigenfunction() {
        let n = 15;
        let d = GridDomain::build_box_grid(n, 1.0).unwrap();
        let u = d
            .field_from_fn(|[x, y, z]| (PI * x).sin() * (PI * y).sin() * (PI * z).sin())
            .unwrap();
        let h = d.h();
        let lambda = 4.0 / (h * h) * 3.0 * (PI * h / 2.0).sin().powi(2);
        let lu = d.apply_laplacian(&u).unwrap();
        for (a, b) in lu.values().iter().zip(u.values()) {
            assert!((a - lambda * b).abs() <= 1e-10 * lambda);
        }
    }

    #[test]
    fn stiffness_is_symmetric() {
        for d in [
            GridDomain::build_box_grid(7, 1.3).unwrap(),
            GridDomain::build_ball_grid(9, 1.0).unwrap(),
            GridDomain::build_radial_grid(40, 2.0).unwrap(),
        ] {
            for seed in 0..5 {
                let u = random_field(&d, seed);
                let v = random_field(&d, seed + 100);
                let a = d.inner_h1(&u, &v).unwrap();
                let b = d.inner_h1(&v, &u).unwrap();
                let scale = d.norm_h1(&u).unwrap() * d.norm_h1(&v).unwrap();
                assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
                assert!(d.inner_h1(&u, &u).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn domain_mismatch_is_rejected() {
        let a = GridDomain::build_box_grid(5, 1.0).unwrap();
        let b = GridDomain::build_box_grid(5, 2.0).unwrap();
        let u = a.zeros();
        assert!(matches!(
            b.apply_laplacian(&u),
            Err(Error::DomainMismatch(_))
        ));
        assert!(b.integrate(&[1.0, 2.0]).is_err());
        assert!(a.field(vec![0.0; 3]).is_err());
        assert!(matches!(
            a.field(vec![f64::NAN; a.len()]),
            Err(Error::NonFinite(0))
        ));
    }

    #[test]
    fn sign_split() {
        let d = GridDomain::build_radial_grid(33, 1.0).unwrap();
        let u = random_field(&d, 7);
        let (p, m) = (positive_part(&u), negative_part(&u));
        for i in 0..u.len() {
            assert_eq!(p.values()[i] + m.values()[i], u.values()[i]);
            assert_eq!(p.values()[i] * m.values()[i], 0.0);
        }
        let neg = u.scaled(-1.0);
        assert_eq!(positive_part(&neg), m.scaled(-1.0));
        assert_eq!(negative_part(&neg), p.scaled(-1.0));
        let abs = u.map(f64::abs);
        assert_eq!(positive_part(&abs), abs);
        assert!(negative_part(&abs).is_zero());
    }
}
