//! Pointwise algebra of the Landau-Lifshitz-Gilbert equation.
//!
//! Everything here acts node by node on a [`MagnetizationField`]; the only
//! spatial coupling is the Laplacian inside [`effective_field`] and the
//! gradient in [`harmonic_identity_residual`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{self, Grid1D, MagnetizationField, SATURATION_TOL};
use crate::vec3::{self, cross, Vec3};

/// Determinant threshold below which three noise directions are rejected.
pub const DIRECTION_DET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub horizon: f64,
}

impl PhysicalParams {
    pub fn new(alpha: f64, beta: f64, eps: f64, horizon: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            eps,
            horizon,
        };
        p.validate()?;
        Ok(p)
    }

    /// Damping-free parameters, for the idealized rotation models used as
    /// integrator checks. Configuration input always goes through [`Self::new`].
    pub fn undamped(beta: f64, eps: f64, horizon: f64) -> Result<Self> {
        let p = Self {
            alpha: 0.0,
            beta,
            eps,
            horizon,
        };
        p.validate_dynamics()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        self.validate_dynamics()
    }

    /// Like [`Self::validate`] but also admits `alpha = 0`.
    pub fn validate_dynamics(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(invalid(format!("beta must be nonnegative, got {}", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.eps) {
            return Err(invalid(format!("eps must lie in [0, 1], got {}", self.eps)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        Ok(())
    }
}

/// Spatial structure of the noise (and of the control channels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NoiseModel {
    /// One channel with a space-dependent field `h(x)`.
    ScalarProfile { profile: MagnetizationField },
    /// Three channels with constant, linearly independent directions.
    ThreeDirections { directions: [Vec3; 3] },
}

impl NoiseModel {
    pub fn three_directions(directions: [Vec3; 3]) -> Result<Self> {
        let m = Self::ThreeDirections { directions };
        m.validate(None)?;
        Ok(m)
    }

    pub fn standard_basis() -> Self {
        Self::ThreeDirections {
            directions: [vec3::E1, vec3::E2, vec3::E3],
        }
    }

    pub fn scalar_profile(profile: MagnetizationField, g: &Grid1D) -> Result<Self> {
        let m = Self::ScalarProfile { profile };
        m.validate(Some(g))?;
        Ok(m)
    }

    pub fn validate(&self, g: Option<&Grid1D>) -> Result<()> {
        match self {
            Self::ThreeDirections { directions } => {
                if directions.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidNoiseModel("non-finite direction".into()));
                }
                let d = vec3::det3(directions[0], directions[1], directions[2]);
                if d.abs() <= DIRECTION_DET_TOL {
                    return Err(Error::InvalidNoiseModel(format!(
                        "directions are (nearly) linearly dependent, |det| = {:e}",
                        d.abs()
                    )));
                }
            }
            Self::ScalarProfile { profile } => {
                if let Some(g) = g {
                    if profile.len() != g.n_points() {
                        return Err(Error::InvalidNoiseModel(format!(
                            "profile has {} nodes but grid has {}",
                            profile.len(),
                            g.n_points()
                        )));
                    }
                }
                if profile.values.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidNoiseModel("non-finite profile value".into()));
                }
            }
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        match self {
            Self::ScalarProfile { .. } => 1,
            Self::ThreeDirections { .. } => 3,
        }
    }

    /// Direction vector of channel `c` at node `i`.
    #[inline]
    pub fn channel_at(&self, c: usize, i: usize) -> Vec3 {
        match self {
            Self::ScalarProfile { profile } => profile.values[i],
            Self::ThreeDirections { directions } => directions[c],
        }
    }

    /// `max_i |a^i|²` for three-direction noise, `max_x |h(x)|²` otherwise.
    pub fn max_direction_norm_sq(&self) -> f64 {
        match self {
            Self::ScalarProfile { profile } => profile
                .values
                .iter()
                .map(|v| vec3::norm_sq(*v))
                .fold(0.0, f64::max),
            Self::ThreeDirections { directions } => directions
                .iter()
                .map(|v| vec3::norm_sq(*v))
                .fold(0.0, f64::max),
        }
    }

    fn check(&self, m: &MagnetizationField) -> Result<()> {
        if let Self::ScalarProfile { profile } = self {
            if profile.len() != m.len() {
                return Err(invalid(format!(
                    "noise profile has {} nodes but field has {}",
                    profile.len(),
                    m.len()
                )));
            }
        }
        Ok(())
    }
}

/// Index of the segment containing `t` under the right-continuous convention
/// `t ∈ (b_i, b_{i+1}]`, with the first segment also closed on the left.
pub(crate) fn segment_index(breakpoints: &[f64], t: f64) -> Option<usize> {
    let n_seg = breakpoints.len().checked_sub(1)?;
    if n_seg == 0 || t < breakpoints[0] || t > breakpoints[n_seg] {
        return None;
    }
    // First breakpoint index strictly >= t, minus one.
    let idx = breakpoints.partition_point(|b| *b < t);
    Some(idx.saturating_sub(1).min(n_seg - 1))
}

pub(crate) fn validate_breakpoints(breakpoints: &[f64], n_values: usize, what: &str) -> Result<()> {
    if breakpoints.is_empty() && n_values == 0 {
        return Ok(());
    }
    if breakpoints.len() != n_values + 1 {
        return Err(invalid(format!(
            "{what}: {} breakpoints for {n_values} segments (need segments + 1)",
            breakpoints.len()
        )));
    }
    if breakpoints.iter().any(|b| !b.is_finite()) {
        return Err(invalid(format!("{what}: non-finite breakpoint")));
    }
    if breakpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid(format!("{what}: breakpoints must be nondecreasing")));
    }
    Ok(())
}

/// Piecewise-constant, spatially uniform applied field `K(t)`.
///
/// Outside `[b_0, b_last]` the field is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AppliedFieldSchedule {
    pub breakpoints: Vec<f64>,
    pub segment_values: Vec<Vec3>,
}

impl AppliedFieldSchedule {
    pub fn new(breakpoints: Vec<f64>, segment_values: Vec<Vec3>) -> Result<Self> {
        let s = Self {
            breakpoints,
            segment_values,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: Vec3, horizon: f64) -> Self {
        Self {
            breakpoints: vec![0.0, horizon],
            segment_values: vec![value],
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_breakpoints(&self.breakpoints, self.segment_values.len(), "applied field")?;
        if self.segment_values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("applied field: non-finite value"));
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> Vec3 {
        segment_index(&self.breakpoints, t)
            .map(|i| self.segment_values[i])
            .unwrap_or(vec3::ZERO)
    }
}

/// `m × h − α m × (m × h)` at a single node.
#[inline]
pub fn llg_vector(m: Vec3, h: Vec3, alpha: f64) -> Vec3 {
    let mxh = cross(m, h);
    vec3::axpy(mxh, -alpha, cross(m, mxh))
}

/// Diffusion channel `σ_b(m) = m × b − α m × (m × b)`; same form as the drift.
#[inline]
pub fn channel_vector(m: Vec3, b: Vec3, alpha: f64) -> Vec3 {
    llg_vector(m, b, alpha)
}

/// Stratonovich-to-Ito drift of one channel, without the ε factor:
///
/// ½[(m×b)×b − α(m×(m×b))×b − α{m×((m×b)×b) − α(m×(m×b))×(m×b) + α((m×(m×b))×b)×m}]
#[inline]
pub fn ito_bracket(m: Vec3, b: Vec3, alpha: f64) -> Vec3 {
    let mxb = cross(m, b);
    let mxmxb = cross(m, mxb);
    let t1 = cross(mxb, b);
    let t2 = cross(mxmxb, b);
    let t3 = cross(m, t1);
    let t4 = cross(mxmxb, mxb);
    let t5 = cross(t2, m);
    let inner = vec3::add(vec3::axpy(t3, -alpha, t4), vec3::scale(alpha, t5));
    let outer = vec3::axpy(vec3::axpy(t1, -alpha, t2), -alpha, inner);
    vec3::scale(0.5, outer)
}

fn check_len(a: &MagnetizationField, b: &MagnetizationField) -> Result<()> {
    if a.len() != b.len() {
        return Err(invalid(format!("field lengths differ: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

fn check_grid(m: &MagnetizationField, g: &Grid1D) -> Result<()> {
    if m.len() != g.n_points() {
        return Err(invalid(format!(
            "field has {} nodes but grid has {}",
            m.len(),
            g.n_points()
        )));
    }
    Ok(())
}

/// `Δm − β (0, m₂, m₃) + K`.
pub fn effective_field(
    m: &MagnetizationField,
    k: Vec3,
    p: &PhysicalParams,
    g: &Grid1D,
) -> Result<MagnetizationField> {
    check_grid(m, g)?;
    Ok(effective_field_unchecked(m, k, p.beta, g))
}

pub(crate) fn effective_field_unchecked(
    m: &MagnetizationField,
    k: Vec3,
    beta: f64,
    g: &Grid1D,
) -> MagnetizationField {
    let mut h = grid::laplacian_unchecked(m, g);
    for (hv, mv) in h.values.iter_mut().zip(&m.values) {
        *hv = [hv[0] + k[0], hv[1] - beta * mv[1] + k[1], hv[2] - beta * mv[2] + k[2]];
    }
    h
}

pub fn llg_drift(
    m: &MagnetizationField,
    h_eff: &MagnetizationField,
    alpha: f64,
) -> Result<MagnetizationField> {
    check_len(m, h_eff)?;
    Ok(MagnetizationField::new(
        m.values
            .iter()
            .zip(&h_eff.values)
            .map(|(mv, hv)| llg_vector(*mv, *hv, alpha))
            .collect(),
    ))
}

/// One field per noise channel.
pub fn diffusion_channels(
    m: &MagnetizationField,
    noise: &NoiseModel,
    alpha: f64,
) -> Result<Vec<MagnetizationField>> {
    noise.check(m)?;
    Ok((0..noise.n_channels())
        .map(|c| {
            MagnetizationField::new(
                m.values
                    .iter()
                    .enumerate()
                    .map(|(i, mv)| channel_vector(*mv, noise.channel_at(c, i), alpha))
                    .collect(),
            )
        })
        .collect())
}

/// Sum over channels of [`ito_bracket`].
pub fn ito_correction(
    m: &MagnetizationField,
    noise: &NoiseModel,
    alpha: f64,
) -> Result<MagnetizationField> {
    noise.check(m)?;
    Ok(ito_correction_unchecked(m, noise, alpha))
}

pub(crate) fn ito_correction_unchecked(
    m: &MagnetizationField,
    noise: &NoiseModel,
    alpha: f64,
) -> MagnetizationField {
    MagnetizationField::new(
        m.values
            .iter()
            .enumerate()
            .map(|(i, mv)| {
                (0..noise.n_channels()).fold(vec3::ZERO, |acc, c| {
                    vec3::add(acc, ito_bracket(*mv, noise.channel_at(c, i), alpha))
                })
            })
            .collect(),
    )
}

/// `½|Dm|² + ½β∫(m₂² + m₃²) − ⟨K, m⟩`.
pub fn energy(m: &MagnetizationField, k: Vec3, p: &PhysicalParams, g: &Grid1D) -> Result<f64> {
    check_grid(m, g)?;
    Ok(energy_unchecked(m, k, p.beta, g))
}

pub(crate) fn energy_unchecked(m: &MagnetizationField, k: Vec3, beta: f64, g: &Grid1D) -> f64 {
    let exchange = 0.5 * grid::grad_l2_sq(m, g);
    let (aniso, zeeman) = m
        .values
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(a, z), (i, v)| {
            let w = g.weight(i);
            (a + w * (v[1] * v[1] + v[2] * v[2]), z + w * vec3::dot(k, *v))
        });
    exchange + 0.5 * beta * aniso - zeeman
}

/// Nodewise `m × (m × Δm) + |Dm|² m + Δm`, which vanishes identically for
/// smooth saturated fields in the continuum.
///
/// `Dm` is a centered difference inside and one-sided at the two ends.
pub fn harmonic_identity_residual(
    m: &MagnetizationField,
    g: &Grid1D,
) -> Result<MagnetizationField> {
    check_grid(m, g)?;
    let res = m.sphere_residual();
    if res > SATURATION_TOL {
        return Err(Error::PreconditionViolation(format!(
            "field is not saturated (max | |m| - 1 | = {res:e})"
        )));
    }
    let lap = grid::laplacian_unchecked(m, g);
    let n = m.len();
    let h = g.spacing();
    let v = &m.values;
    let out = (0..n)
        .map(|i| {
            let dm = if i == 0 {
                vec3::scale(1.0 / h, vec3::sub(v[1], v[0]))
            } else if i == n - 1 {
                vec3::scale(1.0 / h, vec3::sub(v[n - 1], v[n - 2]))
            } else {
                vec3::scale(0.5 / h, vec3::sub(v[i + 1], v[i - 1]))
            };
            let mm_lap = cross(v[i], cross(v[i], lap.values[i]));
            vec3::add(vec3::axpy(mm_lap, vec3::norm_sq(dm), v[i]), lap.values[i])
        })
        .collect();
    Ok(MagnetizationField::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn params(alpha: f64, beta: f64) -> PhysicalParams {
        PhysicalParams::new(alpha, beta, 0.0, 1.0).unwrap()
    }

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        vec3::norm(vec3::sub(a, b)) <= tol
    }

    fn random_unit(rng: &mut impl Rng) -> Vec3 {
        loop {
            let v = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let n = vec3::norm(v);
            if n > 0.1 && n <= 1.0 {
                return vec3::scale(1.0 / n, v);
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(PhysicalParams::new(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(PhysicalParams::new(-1.0, 1.0, 0.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, -0.1, 0.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, 0.1, 1.5, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, 0.1, 0.5, 0.0).is_err());
        assert!(PhysicalParams::new(1.0, 0.0, 1.0, 2.0).is_ok());
    }

    #[test]
    fn noise_model_rejects_dependent_directions() {
        let bad = NoiseModel::three_directions([vec3::E1, vec3::E2, [1.0, 1.0, 0.0]]);
        assert!(matches!(bad, Err(Error::InvalidNoiseModel(_))));
        assert!(NoiseModel::three_directions([vec3::E1, vec3::E2, vec3::E3]).is_ok());
        let g = Grid1D::new(1.0, 5).unwrap();
        assert!(NoiseModel::scalar_profile(MagnetizationField::zeros(4), &g).is_err());
    }

    #[test]
    fn schedule_is_right_continuous() {
        let s = AppliedFieldSchedule::new(vec![0.0, 1.0, 2.0], vec![vec3::E1, vec3::E2]).unwrap();
        assert_eq!(s.at(0.0), vec3::E1);
        assert_eq!(s.at(0.5), vec3::E1);
        assert_eq!(s.at(1.0), vec3::E1);
        assert_eq!(s.at(1.0 + 1e-12), vec3::E2);
        assert_eq!(s.at(2.0), vec3::E2);
        assert_eq!(s.at(2.5), vec3::ZERO);
        assert_eq!(AppliedFieldSchedule::zero().at(0.3), vec3::ZERO);
        assert!(AppliedFieldSchedule::new(vec![0.0, 1.0], vec![vec3::E1, vec3::E2]).is_err());
        assert!(AppliedFieldSchedule::new(vec![1.0, 0.0], vec![vec3::E1]).is_err());
    }

    #[test]
    fn effective_field_examples() {
        let g = Grid1D::new(1.0, 7).unwrap();
        for beta in [0.0, 0.3, 5.0] {
            let m = MagnetizationField::uniform(7, vec3::E1);
            let h = effective_field(&m, vec3::ZERO, &params(1.0, beta), &g).unwrap();
            assert!(h.values.iter().all(|v| *v == [0.0; 3]));
        }
        let m = MagnetizationField::uniform(7, vec3::E2);
        let h = effective_field(&m, vec3::ZERO, &params(1.0, 1.0), &g).unwrap();
        assert!(h.values.iter().all(|v| *v == [0.0, -1.0, 0.0]));
        let h = effective_field(&m, [0.0, 0.0, 2.0], &params(1.0, 1.0), &g).unwrap();
        assert!(h.values.iter().all(|v| *v == [0.0, -1.0, 2.0]));
    }

    #[test]
    fn llg_drift_examples() {
        assert_eq!(llg_vector(vec3::E1, vec3::E1, 0.7), [0.0; 3]);
        assert_eq!(llg_vector(vec3::E1, vec3::E2, 1.0), [0.0, 1.0, 1.0]);
        let c = FRAC_1_SQRT_2;
        let m = [c, c, 0.0];
        let h = [0.0, -c, 0.0];
        let want = [2f64.sqrt() / 4.0, -(2f64.sqrt()) / 4.0, -0.5];
        assert!(close(llg_vector(m, h, 1.0), want, 1e-15));
        // Brute-force cross-check through the triple-product expansion.
        let mxh = cross(m, h);
        let expanded = vec3::sub(mxh, vec3::sub(vec3::scale(vec3::dot(m, h), m), h));
        assert!(close(expanded, want, 1e-15));
    }

    #[test]
    fn diffusion_channel_examples() {
        let m = vec3::E3;
        assert_eq!(channel_vector(m, vec3::E1, 0.0), [0.0, 1.0, 0.0]);
        assert_eq!(channel_vector(m, vec3::E1, 2.0), [2.0, 1.0, 0.0]);
        assert_eq!(channel_vector(vec3::E2, [0.0, 3.0, 0.0], 1.3), [0.0; 3]);
        let field = MagnetizationField::uniform(4, m);
        let ch = diffusion_channels(&field, &NoiseModel::standard_basis(), 2.0).unwrap();
        assert_eq!(ch.len(), 3);
        assert_eq!(ch[0].values[2], [2.0, 1.0, 0.0]);
        assert_eq!(ch[2].values[1], [0.0; 3]);
    }

    #[test]
    fn ito_bracket_examples() {
        assert_eq!(ito_bracket(vec3::E3, vec3::E1, 0.0), [0.0, 0.0, -0.5]);
        assert_eq!(ito_bracket(vec3::E2, [0.0, 2.0, 0.0], 1.7), [0.0; 3]);
    }

    /// ½ Dσ(m)[σ(m)] by forward differences of the channel map.
    fn ito_oracle(m: Vec3, b: Vec3, alpha: f64, delta: f64) -> Vec3 {
        let s = channel_vector(m, b, alpha);
        let shifted = channel_vector(vec3::axpy(m, delta, s), b, alpha);
        vec3::scale(0.5 / delta, vec3::sub(shifted, s))
    }

    #[test]
    fn ito_bracket_matches_directional_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let m = random_unit(&mut rng);
            let b = vec3::scale(rng.random_range(0.2..2.0), random_unit(&mut rng));
            let alpha = rng.random_range(0.0..3.0);
            let exact = ito_bracket(m, b, alpha);
            let fd = ito_oracle(m, b, alpha, 1e-6);
            let scale = vec3::norm(exact).max(vec3::norm_sq(b) * (1.0 + alpha * alpha) * 1e-2);
            assert!(
                vec3::norm(vec3::sub(exact, fd)) <= 1e-4 * scale,
                "m={m:?} b={b:?} alpha={alpha} exact={exact:?} fd={fd:?}"
            );
        }
    }

    #[test]
    fn ito_correction_sums_channels() {
        let m = MagnetizationField::uniform(3, [0.6, 0.0, 0.8]);
        let noise = NoiseModel::standard_basis();
        let c = ito_correction(&m, &noise, 0.5).unwrap();
        let want = [vec3::E1, vec3::E2, vec3::E3]
            .iter()
            .fold(vec3::ZERO, |a, b| vec3::add(a, ito_bracket(m.values[0], *b, 0.5)));
        assert!(c.values.iter().all(|v| close(*v, want, 1e-15)));
    }

    #[test]
    fn energy_examples() {
        let g = Grid1D::new(1.0, 9).unwrap();
        let p = params(1.0, 1.0);
        let e1 = MagnetizationField::uniform(9, vec3::E1);
        assert_eq!(energy(&e1, vec3::ZERO, &p, &g).unwrap(), 0.0);
        let e2 = MagnetizationField::uniform(9, vec3::E2);
        assert!((energy(&e2, vec3::ZERO, &p, &g).unwrap() - 0.5).abs() < 1e-14);
        assert!((energy(&e2, [0.0, 2.0, 0.0], &p, &g).unwrap() + 1.5).abs() < 1e-14);
        let m = MagnetizationField::from_fn(&g, |x| [(PI * x).cos(), (PI * x).sin(), 0.0]);
        let grad = grid::norms(&m, &g).unwrap().grad_l2;
        let e = energy(&m, vec3::ZERO, &params(1.0, 0.0), &g).unwrap();
        assert_eq!(e, 0.5 * grad * grad);
    }

    fn half_turn_residual(n: usize) -> f64 {
        let g = Grid1D::new(1.0, n).unwrap();
        let m = MagnetizationField::from_fn(&g, |x| {
            let th = 0.5 * PI * x;
            [th.cos(), th.sin(), 0.0]
        });
        harmonic_identity_residual(&m, &g).unwrap().max_norm()
    }

    #[test]
    fn harmonic_residual_second_order() {
        let r: Vec<f64> = [17, 33, 65, 129, 257].iter().map(|&n| half_turn_residual(n)).collect();
        for w in r.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.8..=2.2).contains(&order), "order {order} from {r:?}");
        }
    }

    #[test]
    fn harmonic_residual_uniform_and_unsaturated() {
        let g = Grid1D::new(1.0, 9).unwrap();
        let m = MagnetizationField::uniform(9, [0.0, 0.6, 0.8]);
        let r = harmonic_identity_residual(&m, &g).unwrap();
        assert!(r.values.iter().all(|v| *v == [0.0; 3]));
        let bad = MagnetizationField::uniform(9, [0.0, 0.6, 0.7]);
        assert!(matches!(
            harmonic_identity_residual(&bad, &g),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn harmonic_residual_random_smooth_field_refines() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let coeffs: Vec<[f64; 3]> = (0..4)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let residual = |n: usize| {
            let g = Grid1D::new(1.0, n).unwrap();
            let m = MagnetizationField::from_fn(&g, |x| {
                let mut v = [1.5, 0.0, 0.0];
                for (j, c) in coeffs.iter().enumerate() {
                    let cj = ((j + 1) as f64 * PI * x).cos();
                    v = vec3::axpy(v, cj, *c);
                }
                vec3::normalize(v).unwrap()
            });
            harmonic_identity_residual(&m, &g).unwrap().max_norm()
        };
        let r: Vec<f64> = [33, 65, 129, 257].iter().map(|&n| residual(n)).collect();
        assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
    }

    proptest! {
        #[test]
        fn drift_and_channels_orthogonal_to_m(
            m in prop::array::uniform3(-1.0f64..1.0),
            h in prop::array::uniform3(-5.0f64..5.0),
            alpha in 0.0f64..4.0,
        ) {
            prop_assume!(vec3::norm(m) > 0.1);
            let m = vec3::normalize(m).unwrap();
            let d = llg_vector(m, h, alpha);
            let scale = vec3::norm(h) * (1.0 + alpha);
            prop_assert!(vec3::dot(d, m).abs() <= 1e-12 * scale.max(1e-300));
        }

        #[test]
        fn triple_product_expansion(
            m in prop::array::uniform3(-1.0f64..1.0),
            v in prop::array::uniform3(-3.0f64..3.0),
        ) {
            let lhs = cross(m, cross(m, v));
            let rhs = vec3::sub(vec3::scale(vec3::dot(m, v), m), vec3::scale(vec3::norm_sq(m), v));
            prop_assert!(vec3::norm(vec3::sub(lhs, rhs)) <= 1e-14 * (1.0 + vec3::norm(v)));
        }
    }
}
