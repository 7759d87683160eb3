//! Spatial discretization of the needle axis.
//!
//! Nodes sit at `x_i = i * spacing`, `i = 0..n_points`, on `[0, length]`. All
//! inner products use the trapezoid rule, and the Laplacian closes the Neumann
//! condition with mirror ghost nodes `m[-1] = m[1]`, `m[n] = m[n-2]`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::vec3::{self, Vec3};

/// Tolerance on `| |m(x)| - 1 |` for a field to count as saturated.
pub const SATURATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    length: f64,
    n_points: usize,
    spacing: f64,
}

impl Grid1D {
    pub fn new(length: f64, n_points: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(invalid(format!("grid length must be positive, got {length}")));
        }
        if n_points < 3 {
            return Err(invalid(format!("grid needs at least 3 nodes, got {n_points}")));
        }
        Ok(Self {
            length,
            n_points,
            spacing: length / (n_points - 1) as f64,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.length
        } else {
            i as f64 * self.spacing
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.node(i))
    }

    /// Trapezoid quadrature weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n_points {
            0.5 * self.spacing
        } else {
            self.spacing
        }
    }

    fn check(&self, m: &MagnetizationField) -> Result<()> {
        if m.len() != self.n_points {
            return Err(invalid(format!(
                "field has {} nodes but grid has {}",
                m.len(),
                self.n_points
            )));
        }
        Ok(())
    }
}

/// `make_grid` under its operational name.
pub fn make_grid(length: f64, n_points: usize) -> Result<Grid1D> {
    Grid1D::new(length, n_points)
}

/// Nodal values of an R³-valued function on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationField {
    pub values: Vec<Vec3>,
}

impl MagnetizationField {
    pub fn new(values: Vec<Vec3>) -> Self {
        Self { values }
    }

    pub fn uniform(n_points: usize, v: Vec3) -> Self {
        Self {
            values: vec![v; n_points],
        }
    }

    pub fn zeros(n_points: usize) -> Self {
        Self::uniform(n_points, vec3::ZERO)
    }

    pub fn from_fn(g: &Grid1D, f: impl Fn(f64) -> Vec3) -> Self {
        Self {
            values: g.nodes().map(f).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest `| |m(x)| - 1 |` over the nodes.
    pub fn sphere_residual(&self) -> f64 {
        self.values
            .iter()
            .map(|v| (vec3::norm(*v) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_saturated(&self, tol: f64) -> bool {
        self.sphere_residual() <= tol
    }

    /// Nodewise renormalization. Fails on a zero (or non-finite) node.
    pub fn normalized(&self) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| vec3::normalize(*v).ok_or_else(|| invalid(format!("node {i} cannot be normalized"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { values })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(invalid("field length mismatch"));
        }
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| vec3::sub(*a, *b))
                .collect(),
        })
    }

    pub fn sub_uniform(&self, v: Vec3) -> Self {
        Self {
            values: self.values.iter().map(|a| vec3::sub(*a, v)).collect(),
        }
    }

    /// Largest distance between any node value and node 0.
    pub fn spread(&self) -> f64 {
        let first = match self.values.first() {
            Some(v) => *v,
            None => return 0.0,
        };
        self.values
            .iter()
            .map(|v| vec3::norm(vec3::sub(*v, first)))
            .fold(0.0, f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| vec3::norm(*v)).fold(0.0, f64::max)
    }

    /// Component `c` as a scalar sequence.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }
}

/// Second-difference Laplacian with mirror ghost nodes.
pub fn laplacian(m: &MagnetizationField, g: &Grid1D) -> Result<MagnetizationField> {
    g.check(m)?;
    Ok(laplacian_unchecked(m, g))
}

pub(crate) fn laplacian_unchecked(m: &MagnetizationField, g: &Grid1D) -> MagnetizationField {
    let n = m.len();
    let inv_h2 = 1.0 / (g.spacing() * g.spacing());
    let v = &m.values;
    let mut out = Vec::with_capacity(n);
    out.push(vec3::scale(2.0 * inv_h2, vec3::sub(v[1], v[0])));
    for i in 1..n - 1 {
        let s = vec3::add(vec3::sub(v[i - 1], v[i]), vec3::sub(v[i + 1], v[i]));
        out.push(vec3::scale(inv_h2, s));
    }
    out.push(vec3::scale(2.0 * inv_h2, vec3::sub(v[n - 2], v[n - 1])));
    MagnetizationField { values: out }
}

/// Trapezoid-rule inner product of two vector fields.
pub fn inner(a: &MagnetizationField, b: &MagnetizationField, g: &Grid1D) -> Result<f64> {
    g.check(a)?;
    g.check(b)?;
    Ok(a
        .values
        .iter()
        .zip(&b.values)
        .enumerate()
        .map(|(i, (x, y))| g.weight(i) * vec3::dot(*x, *y))
        .sum())
}

fn inner_scalar(a: &[f64], b: &[f64], g: &Grid1D) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| g.weight(i) * x * y)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub index: usize,
    pub eigenvalue: f64,
    pub eigenfunction: Vec<f64>,
}

/// First `n_modes` Neumann eigenpairs of `-d²/dx²` on the grid interval.
///
/// Eigenvalues are the analytic `(jπ/l)²`; eigenfunctions are the sampled
/// cosines, Gram-Schmidt re-orthonormalized under the trapezoid rule.
pub fn neumann_eigenpairs(g: &Grid1D, n_modes: usize) -> Result<Vec<EigenPair>> {
    if n_modes == 0 || n_modes > g.n_points() {
        return Err(invalid(format!(
            "n_modes must lie in 1..={}, got {n_modes}",
            g.n_points()
        )));
    }
    let l = g.length();
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(n_modes);
    for j in 0..n_modes {
        let k = j as f64 * std::f64::consts::PI / l;
        let amp = if j == 0 { (1.0 / l).sqrt() } else { (2.0 / l).sqrt() };
        let mut f: Vec<f64> = g.nodes().map(|x| amp * (k * x).cos()).collect();
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for p in &pairs {
                let c = inner_scalar(&f, &p.eigenfunction, g);
                for (fi, ei) in f.iter_mut().zip(&p.eigenfunction) {
                    *fi -= c * ei;
                }
            }
        }
        let nrm = inner_scalar(&f, &f, g).sqrt();
        for fi in f.iter_mut() {
            *fi /= nrm;
        }
        pairs.push(EigenPair {
            index: j,
            eigenvalue: k * k,
            eigenfunction: f,
        });
    }
    Ok(pairs)
}

/// Componentwise orthogonal projection onto the span of `basis`.
pub fn spectral_project(
    m: &MagnetizationField,
    basis: &[EigenPair],
    g: &Grid1D,
) -> Result<MagnetizationField> {
    g.check(m)?;
    if basis.is_empty() {
        return Err(invalid("projection basis is empty"));
    }
    if basis.iter().any(|e| e.eigenfunction.len() != g.n_points()) {
        return Err(invalid("basis does not conform to grid"));
    }
    let coeffs = spectral_coefficients(m, basis, g);
    Ok(synthesize(&coeffs, basis, g.n_points()))
}

/// `⟨m, e_j⟩` per component, one row per basis element.
pub(crate) fn spectral_coefficients(
    m: &MagnetizationField,
    basis: &[EigenPair],
    g: &Grid1D,
) -> Vec<Vec3> {
    basis
        .iter()
        .map(|e| {
            let mut c = vec3::ZERO;
            for (i, (v, ei)) in m.values.iter().zip(&e.eigenfunction).enumerate() {
                let w = g.weight(i) * ei;
                c = vec3::axpy(c, w, *v);
            }
            c
        })
        .collect()
}

pub(crate) fn synthesize(coeffs: &[Vec3], basis: &[EigenPair], n: usize) -> MagnetizationField {
    let mut out = MagnetizationField::zeros(n);
    for (c, e) in coeffs.iter().zip(basis) {
        for (o, ei) in out.values.iter_mut().zip(&e.eigenfunction) {
            *o = vec3::axpy(*o, *ei, *c);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
    pub grad_l2: f64,
}

/// Trapezoid L², forward-difference gradient L², their H¹ combination and the
/// nodal sup norm.
pub fn norms(m: &MagnetizationField, g: &Grid1D) -> Result<Norms> {
    g.check(m)?;
    Ok(norms_unchecked(m, g))
}

pub(crate) fn norms_unchecked(m: &MagnetizationField, g: &Grid1D) -> Norms {
    let l2_sq: f64 = m
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| g.weight(i) * vec3::norm_sq(*v))
        .sum();
    let grad_sq = grad_l2_sq(m, g);
    Norms {
        l2: l2_sq.sqrt(),
        h1: (l2_sq + grad_sq).sqrt(),
        linf: m.max_norm(),
        grad_l2: grad_sq.sqrt(),
    }
}

/// `Σ |m_{i+1} - m_i|² / h`, the squared L² norm of the forward difference.
pub(crate) fn grad_l2_sq(m: &MagnetizationField, g: &Grid1D) -> f64 {
    m.values
        .windows(2)
        .map(|w| vec3::norm_sq(vec3::sub(w[1], w[0])))
        .sum::<f64>()
        / g.spacing()
}

/// H¹ distance between `m` and the uniform field `v`.
pub fn h1_distance_to_uniform(m: &MagnetizationField, v: Vec3, g: &Grid1D) -> f64 {
    let l2_sq: f64 = m
        .values
        .iter()
        .enumerate()
        .map(|(i, a)| g.weight(i) * vec3::norm_sq(vec3::sub(*a, v)))
        .sum();
    (l2_sq + grad_l2_sq(m, g)).sqrt()
}

/// H¹ distance between two fields on the same grid.
pub fn h1_distance(a: &MagnetizationField, b: &MagnetizationField, g: &Grid1D) -> Result<f64> {
    let d = a.sub(b)?;
    Ok(norms(&d, g)?.h1)
}

/// Constant of the 1D sup-norm interpolation inequality, `2 max(1, 1/√l)`.
pub fn embedding_constant_k(length: f64) -> Result<f64> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(invalid(format!("length must be positive, got {length}")));
    }
    Ok(2.0 * f64::max(1.0, 1.0 / length.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_spacing() {
        assert_eq!(make_grid(1.0, 101).unwrap().spacing(), 0.01);
        assert_eq!(make_grid(2.0, 3).unwrap().spacing(), 1.0);
        assert!(matches!(make_grid(1.0, 2), Err(crate::Error::InvalidArgument(_))));
        assert!(make_grid(0.0, 10).is_err());
        assert!(make_grid(-1.0, 10).is_err());
        let g = make_grid(0.7, 13).unwrap();
        assert!((g.spacing() * 12.0 - 0.7).abs() < 1e-15);
        assert_eq!(g.node(12), 0.7);
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = make_grid(1.3, 17).unwrap();
        let m = MagnetizationField::uniform(17, [0.0, 1.0, 0.0]);
        let lap = laplacian(&m, &g).unwrap();
        assert!(lap.values.iter().all(|v| *v == [0.0; 3]));
    }

    #[test]
    fn laplacian_hand_stencil() {
        let g = make_grid(2.0, 3).unwrap();
        let m = MagnetizationField::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0; 3]]);
        let lap = laplacian(&m, &g).unwrap();
        assert_eq!(
            lap.values,
            vec![[2.0, 0.0, 0.0], [-2.0, 0.0, 0.0], [2.0, 0.0, 0.0]]
        );
    }

    #[test]
    fn laplacian_shape_mismatch() {
        let g = make_grid(1.0, 5).unwrap();
        let m = MagnetizationField::uniform(4, [1.0, 0.0, 0.0]);
        assert!(laplacian(&m, &g).is_err());
    }

    fn first_mode_error(n: usize) -> f64 {
        let l = 1.0;
        let g = make_grid(l, n).unwrap();
        let k = PI / l;
        let m = MagnetizationField::from_fn(&g, |x| [(k * x).cos(), (k * x).sin(), 0.0]);
        let lap = laplacian(&m, &g).unwrap();
        // Only the cosine component satisfies the Neumann condition.
        g.nodes()
            .zip(&lap.values)
            .map(|(x, v)| (v[0] + k * k * (k * x).cos()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn laplacian_second_order_on_neumann_mode() {
        let errs: Vec<f64> = [11, 21, 41, 81, 161].iter().map(|&n| first_mode_error(n)).collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.8..=2.2).contains(&order), "order {order}");
        }
        assert!(errs[4] < 1e-3);
    }

    #[test]
    fn eigenvalues_match_analytic_spectrum() {
        let g = make_grid(1.0, 41).unwrap();
        let e = neumann_eigenpairs(&g, 3).unwrap();
        assert_eq!(e[0].eigenvalue, 0.0);
        let c = e[0].eigenfunction[0];
        assert!(e[0].eigenfunction.iter().all(|v| (v - c).abs() < 1e-14));
        assert!((e[1].eigenvalue - PI * PI).abs() < 1e-12);
        let g2 = make_grid(2.0, 41).unwrap();
        let e2 = neumann_eigenpairs(&g2, 3).unwrap();
        assert!((e2[2].eigenvalue - PI * PI).abs() < 1e-12);
        assert!(neumann_eigenpairs(&g, 0).is_err());
        assert!(neumann_eigenpairs(&g, 42).is_err());
    }

    #[test]
    fn eigenfunctions_orthonormal_full_basis() {
        let g = make_grid(1.7, 25).unwrap();
        let e = neumann_eigenpairs(&g, 25).unwrap();
        for a in &e {
            for b in &e {
                let ip = inner_scalar(&a.eigenfunction, &b.eigenfunction, &g);
                let want = if a.index == b.index { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-8, "{} {} {ip}", a.index, b.index);
            }
        }
        assert!(e.windows(2).all(|w| w[0].eigenvalue <= w[1].eigenvalue));
    }

    fn field_from_mode(e: &EigenPair) -> MagnetizationField {
        MagnetizationField::new(e.eigenfunction.iter().map(|v| [*v, -2.0 * v, 0.5 * v]).collect())
    }

    #[test]
    fn projection_fixes_basis_elements() {
        let g = make_grid(1.0, 33).unwrap();
        let basis = neumann_eigenpairs(&g, 2).unwrap();
        let m = field_from_mode(&basis[1]);
        let p = spectral_project(&m, &basis, &g).unwrap();
        for (a, b) in m.values.iter().zip(&p.values) {
            assert!(vec3::norm(vec3::sub(*a, *b)) < 1e-8);
        }
    }

    #[test]
    fn projection_onto_full_basis_is_identity() {
        let g = make_grid(1.0, 19).unwrap();
        let basis = neumann_eigenpairs(&g, 19).unwrap();
        let m = MagnetizationField::from_fn(&g, |x| [x.exp(), (3.0 * x).sin(), x * x - 0.2]);
        let p = spectral_project(&m, &basis, &g).unwrap();
        for (a, b) in m.values.iter().zip(&p.values) {
            assert!(vec3::norm(vec3::sub(*a, *b)) < 1e-10);
        }
    }

    #[test]
    fn projection_kills_higher_cosine() {
        let g = make_grid(1.0, 65).unwrap();
        let basis = neumann_eigenpairs(&g, 2).unwrap();
        let m = MagnetizationField::from_fn(&g, |x| {
            let c = (3.0 * PI * x).cos();
            [c, 0.0, -c]
        });
        // Oracle: direct trapezoid quadrature against the sampled cosines.
        for j in 0..2 {
            let cj: Vec<f64> = g.nodes().map(|x| (j as f64 * PI * x).cos()).collect();
            assert!(inner_scalar(&m.component(0), &cj, &g).abs() < 1e-12);
        }
        let p = spectral_project(&m, &basis, &g).unwrap();
        assert!(p.max_norm() < 1e-6);
    }

    #[test]
    fn norms_of_constant_fields() {
        let g = make_grid(1.0, 11).unwrap();
        let m = MagnetizationField::uniform(11, [1.0, 0.0, 0.0]);
        let n = norms(&m, &g).unwrap();
        assert!((n.l2 - 1.0).abs() < 1e-14);
        assert_eq!(n.grad_l2, 0.0);
        assert!((n.h1 - 1.0).abs() < 1e-14);
        assert_eq!(n.linf, 1.0);
        let g4 = make_grid(4.0, 11).unwrap();
        assert!((norms(&m, &g4).unwrap().l2 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gradient_norm_converges_to_pi() {
        let mut prev = f64::INFINITY;
        for n in [11, 41, 161, 641] {
            let g = make_grid(1.0, n).unwrap();
            let m = MagnetizationField::from_fn(&g, |x| [(PI * x).sin(), (PI * x).cos(), 0.0]);
            let err = (norms(&m, &g).unwrap().grad_l2 - PI).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn embedding_constant() {
        assert_eq!(embedding_constant_k(1.0).unwrap(), 2.0);
        assert_eq!(embedding_constant_k(0.25).unwrap(), 4.0);
        assert_eq!(embedding_constant_k(9.0).unwrap(), 2.0);
        assert!(embedding_constant_k(0.0).is_err());
        assert!(embedding_constant_k(-2.0).is_err());
    }

    fn arb_field(n: usize) -> impl Strategy<Value = Vec<Vec3>> {
        prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), n)
    }

    proptest! {
        #[test]
        fn summation_by_parts(values in arb_field(9), length in 0.1f64..5.0) {
            let g = make_grid(length, 9).unwrap();
            let m = MagnetizationField::new(values);
            let lap = laplacian(&m, &g).unwrap();
            let ip = inner(&lap, &m, &g).unwrap();
            let grad_sq = grad_l2_sq(&m, &g);
            prop_assert!(ip <= 1e-10 * grad_sq.max(1e-300));
            prop_assert!((ip + grad_sq).abs() <= 1e-10 * grad_sq.max(1.0));
        }

        #[test]
        fn projection_idempotent(values in arb_field(15), modes in 1usize..15) {
            let g = make_grid(1.0, 15).unwrap();
            let basis = neumann_eigenpairs(&g, modes).unwrap();
            let m = MagnetizationField::new(values);
            let p1 = spectral_project(&m, &basis, &g).unwrap();
            let p2 = spectral_project(&p1, &basis, &g).unwrap();
            for (a, b) in p1.values.iter().zip(&p2.values) {
                prop_assert!(vec3::norm(vec3::sub(*a, *b)) < 1e-12);
            }
        }

        #[test]
        fn k_is_continuous_and_two_above_one(l in 1.0f64..100.0) {
            prop_assert_eq!(embedding_constant_k(l).unwrap(), 2.0);
            let a = embedding_constant_k(l * (1.0 - 1e-9)).unwrap();
            prop_assert!((a - 2.0).abs() < 1e-8);
        }
    }
}
