//! Spectral Galerkin approximation of the deterministic flow.
//!
//! The state lives in the span of the first `n` Neumann cosines and evolves by
//!
//! ```text
//! y' = π_n(y × g) − α π_n(y × (y × g)),   g = Δy − β(0, y₂, y₃) + K
//! ```
//!
//! with the Laplacian applied spectrally. There is no sphere projection, so
//! the L² norm is conserved only because the nonlinearity is pointwise
//! orthogonal to `y`; this makes it a useful cross-check of the basis and
//! quadrature.

use crate::error::{invalid, Result};
use crate::grid::{self, EigenPair, Grid1D, MagnetizationField};
use crate::model::{self, PhysicalParams};
use crate::vec3::{self, Vec3};

#[derive(Debug, Clone)]
pub struct GalerkinSolver {
    grid: Grid1D,
    params: PhysicalParams,
    applied: Vec3,
    basis: Vec<EigenPair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinRecord {
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub final_state: MagnetizationField,
}

impl GalerkinRecord {
    /// Largest relative deviation of the L² norm from its initial value.
    pub fn max_l2_drift(&self) -> f64 {
        let l0 = self.l2[0];
        self.l2
            .iter()
            .map(|l| (l - l0).abs() / l0)
            .fold(0.0, f64::max)
    }
}

impl GalerkinSolver {
    pub fn new(grid: Grid1D, params: PhysicalParams, applied: Vec3, n_modes: usize) -> Result<Self> {
        params.validate_dynamics()?;
        let basis = grid::neumann_eigenpairs(&grid, n_modes)?;
        Ok(Self {
            grid,
            params,
            applied,
            basis,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.basis.len()
    }

    pub fn project(&self, m: &MagnetizationField) -> Result<MagnetizationField> {
        grid::spectral_project(m, &self.basis, &self.grid)
    }

    fn rhs(&self, coeffs: &[Vec3]) -> Vec<Vec3> {
        let n = self.grid.n_points();
        let y = grid::synthesize(coeffs, &self.basis, n);
        let lap: Vec<Vec3> = coeffs
            .iter()
            .zip(&self.basis)
            .map(|(c, e)| vec3::scale(-e.eigenvalue, *c))
            .collect();
        let mut h = grid::synthesize(&lap, &self.basis, n);
        let (beta, k) = (self.params.beta, self.applied);
        for (hv, yv) in h.values.iter_mut().zip(&y.values) {
            *hv = [hv[0] + k[0], hv[1] - beta * yv[1] + k[1], hv[2] - beta * yv[2] + k[2]];
        }
        let f = MagnetizationField::new(
            y.values
                .iter()
                .zip(&h.values)
                .map(|(yv, hv)| model::llg_vector(*yv, *hv, self.params.alpha))
                .collect(),
        );
        grid::spectral_coefficients(&f, &self.basis, &self.grid)
    }

    /// Classical RK4 from `π_n m0` over `[0, horizon]`.
    pub fn solve(&self, m0: &MagnetizationField, dt: f64) -> Result<GalerkinRecord> {
        if m0.len() != self.grid.n_points() {
            return Err(invalid("initial state does not conform to grid"));
        }
        let n_steps = super::step_count(self.params.horizon, dt)?;
        let mut c = grid::spectral_coefficients(m0, &self.basis, &self.grid);
        let l2 = |c: &[Vec3]| c.iter().map(|v| vec3::norm_sq(*v)).sum::<f64>().sqrt();
        let comb = |c: &[Vec3], s: f64, d: &[Vec3]| -> Vec<Vec3> {
            c.iter().zip(d).map(|(a, b)| vec3::axpy(*a, s, *b)).collect()
        };
        let mut rec = GalerkinRecord {
            times: vec![0.0],
            l2: vec![l2(&c)],
            final_state: MagnetizationField::zeros(0),
        };
        for step in 0..n_steps {
            let k1 = self.rhs(&c);
            let k2 = self.rhs(&comb(&c, 0.5 * dt, &k1));
            let k3 = self.rhs(&comb(&c, 0.5 * dt, &k2));
            let k4 = self.rhs(&comb(&c, dt, &k3));
            for (i, ci) in c.iter_mut().enumerate() {
                let incr = vec3::add(
                    vec3::add(k1[i], vec3::scale(2.0, k2[i])),
                    vec3::add(vec3::scale(2.0, k3[i]), k4[i]),
                );
                *ci = vec3::axpy(*ci, dt / 6.0, incr);
            }
            if c.iter().flatten().any(|v| !v.is_finite()) {
                return Err(crate::Error::StepFailure {
                    time: (step + 1) as f64 * dt,
                    seed: None,
                    reason: "Galerkin coefficients are not finite".into(),
                });
            }
            rec.times.push((step + 1) as f64 * dt);
            rec.l2.push(l2(&c));
        }
        rec.final_state = grid::synthesize(&c, &self.basis, self.grid.n_points());
        Ok(rec)
    }
}
