//! Two-body free energy of point dipoles.
//!
//! At Matsubara index `n` the round trip is
//!
//! ```text
//! N_n = ξ² P(κ_n, O₁ − O₂) α₂(iξ_n) P(κ_n, O₂ − O₁) α₁(iξ_n),   P = κ² G
//! ```
//!
//! with the dipole coupling `ξ` fixed by [`DIPOLE_COUPLING`]. The one
//! reflection free energy is `F = −k_BT Σ′ Tr N_n`; the full coupled-dipole
//! result is `F = k_BT Σ′ ln det(I − N_n)`.
//!
//! Internally all lengths are measured in `λ_T`, wavenumbers are
//! `u_n = κ_n λ_T = 2πn`, polarizabilities in `λ_T³` and energies in `k_BT`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::em::{antisymmetric_part, propagator, propagator_gradient, symmetric_part, ThermalContext};
use crate::error::{Error, Result};
use crate::materials::Material;
use crate::matsubara::{matsubara_sum, Convergence, MatsubaraPolicy};

/// Point-dipole coupling `ξ` entering `T = ξ κ² α`.
///
/// Fixed so the one-reflection energy of two isotropic dipoles reproduces the
/// retarded `−23 ħc α₀²/(64 π³ d⁷)` law; see [`calibrate_coupling`]. The sign
/// makes `−ξ κ² G p` the field radiated by a dipole `p`, which matters only
/// for odd numbers of propagators (three-body terms).
pub const DIPOLE_COUPLING: f64 = -1.0;

/// Relative disagreement allowed between analytic and finite-difference
/// gradients.
pub const GRADIENT_CONSISTENCY: f64 = 1e-6;

/// Force finite-difference step, relative to the separation.
pub const FORCE_STEP: f64 = 1e-4;
/// Laplacian and Hessian finite-difference step, relative to the separation.
pub const CURVATURE_STEP: f64 = 1e-3;

/// One polarizable point particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleSpec {
    /// Position (m).
    pub position: Vector3<f64>,
    pub material: Material,
}

impl ParticleSpec {
    pub fn new(position: Vector3<f64>, material: impl Into<Material>) -> Self {
        Self {
            position,
            material: material.into(),
        }
    }

    pub fn moved_to(&self, position: Vector3<f64>) -> Self {
        Self { position, ..*self }
    }

    pub fn displaced(&self, delta: Vector3<f64>) -> Self {
        self.moved_to(self.position + delta)
    }
}

/// Which truncation of `Tr ln(1 − N)` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Approximation {
    OneReflection,
    ExactDipole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceMethod {
    Analytic,
    FiniteDifference,
    /// Both; fails if they disagree beyond [`GRADIENT_CONSISTENCY`].
    CrossChecked,
}

/// Round-trip operator at one Matsubara index, in reduced units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTrip {
    pub n: u64,
    /// `N_n` (dimensionless).
    pub matrix: Matrix3<f64>,
    /// `κ² G(κ_n, O₁ − O₂)` in units of `λ_T⁻³`; the same block serves both
    /// directions since `G` is even in the separation.
    pub propagator: Matrix3<f64>,
    /// `α₁(iξ_n)` in units of `λ_T³`.
    pub alpha1: Matrix3<f64>,
    /// `α₂(iξ_n)` in units of `λ_T³`.
    pub alpha2: Matrix3<f64>,
}

impl RoundTrip {
    pub fn spectral_radius(&self) -> f64 {
        self.matrix
            .complex_eigenvalues()
            .iter()
            .fold(0.0f64, |m, l| m.max(l.norm()))
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.matrix.norm_squared()
    }
}

/// One-reflection split of the free energy by reciprocal (`+`) and
/// anti-reciprocal (`−`) parts of the two polarizabilities (J).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    /// `F⁺⁺`
    pub reciprocal: f64,
    /// `F⁻⁻`
    pub anti_reciprocal: f64,
    /// `F⁺⁻ + F⁻⁺`, zero up to rounding.
    pub cross: f64,
}

impl Decomposition {
    pub fn sum(&self) -> f64 {
        self.reciprocal + self.anti_reciprocal + self.cross
    }
}

/// Free energy and derived quantities for a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub approximation: Approximation,
    /// Free energy (J).
    pub free_energy: f64,
    /// One-reflection decomposition; `None` for the exact branch.
    pub decomposition: Option<Decomposition>,
    /// `k_BT Σ′ ‖N_n‖²_F` (J), the second-order bound on the gap between the
    /// two approximations. Filled by the exact branch.
    pub second_order_bound: Option<f64>,
    /// Force on particle 1 and on particle 2 (N).
    pub forces: Option<[Vector3<f64>; 2]>,
    /// Laplacian with respect to the position of particle 2 (J/m²).
    pub laplacian: Option<LaplacianEstimate>,
    pub convergence: Convergence,
}

/// Richardson-extrapolated Laplacian with the two underlying estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacianEstimate {
    /// Extrapolated value (J/m²).
    pub value: f64,
    /// Second difference with step `h`.
    pub coarse: f64,
    /// Second difference with step `h/2`.
    pub fine: f64,
    /// The two step sizes disagree by more than 1 %.
    pub noisy: bool,
}

/// Pair geometry in reduced units.
struct Reduced<'a> {
    /// `(O_target − O_other)/λ_T`
    dx: Vector3<f64>,
    target: &'a Material,
    other: &'a Material,
    ctx: &'a ThermalContext,
    volume: f64,
}

impl<'a> Reduced<'a> {
    fn new(target: &'a ParticleSpec, other: &'a ParticleSpec, ctx: &'a ThermalContext) -> Result<Self> {
        let delta = target.position - other.position;
        let separation = delta.norm();
        if separation == 0.0 {
            return Err(Error::SingularGeometry);
        }
        if separation < ctx.min_separation() {
            return Err(Error::TooClose {
                separation,
                minimum: ctx.min_separation(),
            });
        }
        let lt = ctx.thermal_length();
        Ok(Self {
            dx: delta / lt,
            target: &target.material,
            other: &other.material,
            ctx,
            volume: lt * lt * lt,
        })
    }

    fn alphas(&self, n: u64) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
        let xi = self.ctx.matsubara_xi(n);
        let t = self.target.polarizability(xi)?.value / self.volume;
        let o = self.other.polarizability(xi)?.value / self.volume;
        Ok((t, o))
    }

    fn u(n: u64) -> f64 {
        2.0 * PI * n as f64
    }

    fn distance(&self) -> f64 {
        self.dx.norm()
    }
}

/// `Tr(P B P A)` symmetrized over the two orderings so that exchanging the
/// particles is exact in floating point.
fn pair_trace(p: &Matrix3<f64>, a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let pa = p * a;
    let pb = p * b;
    0.5 * ((pb * pa).trace() + (pa * pb).trace())
}

/// Assemble the round trip at index `n`.
pub fn round_trip(n: u64, p1: &ParticleSpec, p2: &ParticleSpec, ctx: &ThermalContext) -> Result<RoundTrip> {
    let red = Reduced::new(p1, p2, ctx)?;
    let (a1, a2) = red.alphas(n)?;
    let p = propagator(Reduced::u(n), &red.dx)?;
    Ok(RoundTrip {
        n,
        matrix: p * a2 * p * a1 * (DIPOLE_COUPLING * DIPOLE_COUPLING),
        propagator: p,
        alpha1: a1,
        alpha2: a2,
    })
}

fn one_reflection_sum(red: &Reduced<'_>, policy: &MatsubaraPolicy, coupling: f64) -> Result<PairResult> {
    let c2 = coupling * coupling;
    let kt = red.ctx.thermal_energy();
    let sum = matsubara_sum::<4, _>(policy, policy.abs_tol / kt, 2.0 * PI, red.distance(), |n| {
        let (at, ao) = red.alphas(n)?;
        let p = propagator(Reduced::u(n), &red.dx)?;
        let (tp, tm) = (symmetric_part(&at), antisymmetric_part(&at));
        let (op, om) = (symmetric_part(&ao), antisymmetric_part(&ao));
        Ok([
            c2 * pair_trace(&p, &at, &ao),
            c2 * pair_trace(&p, &tp, &op),
            c2 * pair_trace(&p, &tm, &om),
            c2 * (pair_trace(&p, &tp, &om) + pair_trace(&p, &tm, &op)),
        ])
    })?;
    let [f, pp, mm, pm] = sum.values.map(|v| -kt * v);
    Ok(PairResult {
        approximation: Approximation::OneReflection,
        free_energy: f,
        decomposition: Some(Decomposition {
            reciprocal: pp,
            anti_reciprocal: mm,
            cross: pm,
        }),
        second_order_bound: None,
        forces: None,
        laplacian: None,
        convergence: sum.convergence,
    })
}

/// `ln det(I − N)` from the characteristic coefficients, accurate for small
/// `N`. Fails when the spectral radius reaches one.
fn log_det_one_minus(n_index: u64, m: &Matrix3<f64>) -> Result<f64> {
    let rho = m
        .complex_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, l| acc.max(l.norm()));
    if !(rho < 1.0) {
        return Err(Error::StrongCoupling {
            n: n_index,
            spectral_radius: rho,
        });
    }
    let tr = m.trace();
    let e2 = 0.5 * (tr * tr - (m * m).trace());
    let det = m.determinant();
    Ok((-tr + e2 - det).ln_1p())
}

fn exact_sum(red: &Reduced<'_>, policy: &MatsubaraPolicy, coupling: f64) -> Result<PairResult> {
    let c2 = coupling * coupling;
    let kt = red.ctx.thermal_energy();
    let sum = matsubara_sum::<2, _>(policy, policy.abs_tol / kt, 2.0 * PI, red.distance(), |n| {
        let (at, ao) = red.alphas(n)?;
        let p = propagator(Reduced::u(n), &red.dx)?;
        let m = p * ao * p * at * c2;
        Ok([log_det_one_minus(n, &m)?, m.norm_squared()])
    })?;
    Ok(PairResult {
        approximation: Approximation::ExactDipole,
        free_energy: kt * sum.values[0],
        decomposition: None,
        second_order_bound: Some(kt * sum.values[1]),
        forces: None,
        laplacian: None,
        convergence: sum.convergence,
    })
}

/// `F ≈ −k_BT Σ′ Tr N_n` with its `F⁺⁺ / F⁻⁻ / F⁺⁻` decomposition.
pub fn free_energy_one_reflection(
    p1: &ParticleSpec,
    p2: &ParticleSpec,
    ctx: &ThermalContext,
    policy: &MatsubaraPolicy,
) -> Result<PairResult> {
    one_reflection_sum(&Reduced::new(p2, p1, ctx)?, policy, DIPOLE_COUPLING)
}

/// `F = k_BT Σ′ ln det(I − N_n)`.
pub fn free_energy_exact_dipole(
    p1: &ParticleSpec,
    p2: &ParticleSpec,
    ctx: &ThermalContext,
    policy: &MatsubaraPolicy,
) -> Result<PairResult> {
    exact_sum(&Reduced::new(p2, p1, ctx)?, policy, DIPOLE_COUPLING)
}

pub fn free_energy(
    p1: &ParticleSpec,
    p2: &ParticleSpec,
    ctx: &ThermalContext,
    policy: &MatsubaraPolicy,
    approximation: Approximation,
) -> Result<PairResult> {
    match approximation {
        Approximation::OneReflection => free_energy_one_reflection(p1, p2, ctx, policy),
        Approximation::ExactDipole => free_energy_exact_dipole(p1, p2, ctx, policy),
    }
}

fn energy_only(
    target: &ParticleSpec,
    other: &ParticleSpec,
    ctx: &ThermalContext,
    policy: &MatsubaraPolicy,
    approximation: Approximation,
) -> Result<f64> {
    free_energy(other, target, ctx, policy, approximation).map(|r| r.free_energy)
}

/// Gradient of `F` with respect to the target position, summed analytically
/// (J/m). Returns the gradient and the convergence report.
fn analytic_gradient(
    target: &ParticleSpec,
    other: &ParticleSpec,
    ctx: &ThermalContext,
    policy: &MatsubaraPolicy,
    approximation: Approximation,
) -> Result<(Vector3<f64>, Convergence)> {
    let red = Reduced::new(target, other, ctx)?;
    let c2 = DIPOLE_COUPLING * DIPOLE_COUPLING;
    let kt = ctx.thermal_energy();
    let sum = matsubara_sum::<4, _>(policy, policy.abs_tol / kt, 2.0 * PI, red.distance(), |n| {
        let (at, ao) = red.alphas(n)?;
        let u = Reduced::u(n);
        let p = propagator(u, &red.dx)?;
        let dp = propagator_gradient(u, &red.dx)?;
        let mut out = [0.0; 4];
        match approximation {
            Approximation::OneReflection => {
                out[0] = c2 * pair_trace(&p, &at, &ao);
                for a in 0..3 {
                    // d/dx Tr(P αₒ P αₜ) = 2 Tr(P′ αₒ P αₜ)-type terms, both kept
                    let d = (dp[a] * ao * p * at).trace() + (p * ao * dp[a] * at).trace();
                    out[a + 1] = -c2 * d;
                }
            }
            Approximation::ExactDipole => {
                let m = p * ao * p * at * c2;
                out[0] = log_det_one_minus(n, &m)?;
                let resolvent = (Matrix3::identity() - m)
                    .try_inverse()
                    .ok_or(Error::StrongCoupling { n, spectral_radius: 1.0 })?;
                for a in 0..3 {
                    let dm = (dp[a] * ao * p * at + p * ao * dp[a] * at) * c2;
                    out[a + 1] = -(resolvent * dm).trace();
                }
            }
        }
        Ok(out)
    })?;
    // Both branches accumulate d(F/k_BT)/dx with the sign of F.
    let scale = kt / ctx.thermal_length();
    let g = Vector3::new(sum.values[1], sum.values[2], sum.values[3]) * scale;
    Ok((g, sum.convergence))
}

/// Richardson-extrapolated central difference of `f` along `dir`.
fn richardson_first<F: Fn(Vector3<f64>) -> Result<f64>>(f: &F, dir: Vector3<f64>, h: f64) -> Result<f64> {
    let d = |s: f64| -> Result<f64> { Ok((f(dir * s)? - f(-dir * s)?) / (2.0 * s)) };
    let coarse = d(h)?;
    let fine = d(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn finite_difference_gradient(
    target: &ParticleSpec,
    other: &ParticleSpec,
    ctx: &ThermalContext,
    policy: &MatsubaraPolicy,
    approximation: Approximation,
) -> Result<Vector3<f64>> {
    let centre = free_energy(other, target, ctx, policy, approximation)?;
    let pinned = policy.pinned(centre.convergence.terms);
    let d = (target.position - other.position).norm();
    let f = |delta: Vector3<f64>| energy_only(&target.displaced(delta), other, ctx, &pinned, approximation);
    let mut g = Vector3::zeros();
    for a in 0..3 {
        let mut e = Vector3::zeros();
        e[a] = 1.0;
        g[a] = richardson_first(&f, e, FORCE_STEP * d)?;
    }
    Ok(g)
}

/// Force `−∇_{O_target} F` on `target` (N).
pub fn force(
    target: &ParticleSpec,
    other: &ParticleSpec,
    ctx: &ThermalContext,
    policy: &MatsubaraPolicy,
    approximation: Approximation,
    method: ForceMethod,
) -> Result<Vector3<f64>> {
    match method {
        ForceMethod::Analytic => Ok(-analytic_gradient(target, other, ctx, policy, approximation)?.0),
        ForceMethod::FiniteDifference => {
            Ok(-finite_difference_gradient(target, other, ctx, policy, approximation)?)
        }
        ForceMethod::CrossChecked => {
            let (analytic, _) = analytic_gradient(target, other, ctx, policy, approximation)?;
            let fd = finite_difference_gradient(target, other, ctx, policy, approximation)?;
            let relative = (analytic - fd).norm() / analytic.norm().max(fd.norm()).max(f64::MIN_POSITIVE);
            if relative > GRADIENT_CONSISTENCY {
                return Err(Error::NumericalConsistency { relative });
            }
            Ok(-analytic)
        }
    }
}

/// `∇²_{O_target} F` by Richardson-extrapolated second differences with step
/// `10⁻³ d` (J/m²).
pub fn laplacian(
    target: &ParticleSpec,
    other: &ParticleSpec,
    ctx: &ThermalContext,
    policy: &MatsubaraPolicy,
    approximation: Approximation,
) -> Result<LaplacianEstimate> {
    let centre_result = free_energy(other, target, ctx, policy, approximation)?;
    let centre = centre_result.free_energy;
    let pinned = policy.pinned(centre_result.convergence.terms);
    let d = (target.position - other.position).norm();
    let f = |delta: Vector3<f64>| energy_only(&target.displaced(delta), other, ctx, &pinned, approximation);
    let second = |h: f64| -> Result<f64> {
        let mut acc = 0.0;
        for a in 0..3 {
            let mut e = Vector3::zeros();
            e[a] = h;
            acc += (f(e)? - 2.0 * centre + f(-e)?) / (h * h);
        }
        Ok(acc)
    };
    let h = CURVATURE_STEP * d;
    let coarse = second(h)?;
    let fine = second(0.5 * h)?;
    let value = (4.0 * fine - coarse) / 3.0;
    let noisy = (coarse - fine).abs() > 1e-2 * value.abs().max(fine.abs());
    if noisy {
        log::warn!("noisy Laplacian at {:?}: h → {coarse:e}, h/2 → {fine:e}", target.position);
    }
    Ok(LaplacianEstimate {
        value,
        coarse,
        fine,
        noisy,
    })
}

/// Hessian of `F` with respect to the target position (J/m²), from central
/// differences with the Laplacian step policy.
pub fn hessian(
    target: &ParticleSpec,
    other: &ParticleSpec,
    ctx: &ThermalContext,
    policy: &MatsubaraPolicy,
    approximation: Approximation,
) -> Result<Matrix3<f64>> {
    let centre_result = free_energy(other, target, ctx, policy, approximation)?;
    let pinned = policy.pinned(centre_result.convergence.terms);
    let d = (target.position - other.position).norm();
    let f = |delta: Vector3<f64>| energy_only(&target.displaced(delta), other, ctx, &pinned, approximation);
    hessian_of(&f, centre_result.free_energy, CURVATURE_STEP * d)
}

/// Richardson-extrapolated central-difference Hessian of a scalar field
/// around the origin of `f`'s displacement argument.
pub(crate) fn hessian_of<F: Fn(Vector3<f64>) -> Result<f64>>(f: &F, centre: f64, h: f64) -> Result<Matrix3<f64>> {
    let at_step = |h: f64| -> Result<Matrix3<f64>> {
        let mut m = Matrix3::zeros();
        let basis = [Vector3::x(), Vector3::y(), Vector3::z()];
        for i in 0..3 {
            let ei = basis[i] * h;
            m[(i, i)] = (f(ei)? - 2.0 * centre + f(-ei)?) / (h * h);
            for j in (i + 1)..3 {
                let ej = basis[j] * h;
                let v = (f(ei + ej)? - f(ei - ej)? - f(-ei + ej)? + f(-ei - ej)?) / (4.0 * h * h);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    };
    let coarse = at_step(h)?;
    let fine = at_step(0.5 * h)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

/// Free energy with forces on both particles and the Laplacian with respect
/// to particle 2.
pub fn evaluate_pair(
    p1: &ParticleSpec,
    p2: &ParticleSpec,
    ctx: &ThermalContext,
    policy: &MatsubaraPolicy,
    approximation: Approximation,
) -> Result<PairResult> {
    let mut result = free_energy(p1, p2, ctx, policy, approximation)?;
    let f1 = force(p1, p2, ctx, policy, approximation, ForceMethod::Analytic)?;
    let f2 = force(p2, p1, ctx, policy, approximation, ForceMethod::Analytic)?;
    result.forces = Some([f1, f2]);
    result.laplacian = Some(laplacian(p2, p1, ctx, policy, approximation)?);
    Ok(result)
}

/// Outcome of matching the engine to the two printed asymptotic laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingCalibration {
    /// `ξ²` that makes the one-reflection energy equal the retarded law at
    /// the calibration distance.
    pub xi_squared_short: f64,
    /// `ξ²` the classical law would require on its own.
    pub xi_squared_long: f64,
    /// `F_engine / f_long` with the adopted coupling.
    pub long_ratio: f64,
    /// Calibration distances in units of λ_T.
    pub short_distance: f64,
    pub long_distance: f64,
}

/// Match the unit-coupling engine against the retarded and classical laws for
/// two isotropic toy dipoles.
pub fn calibrate_coupling(ctx: &ThermalContext, policy: &MatsubaraPolicy) -> Result<CouplingCalibration> {
    use crate::materials::ToyPolarizability;
    use nrcasimir_asymptotics::{f_long, f_short, ToyGeometry};

    let lt = ctx.thermal_length();
    let alpha0 = 1e-9 * lt.powi(3);
    let m = Material::from(ToyPolarizability::along_x(alpha0, 0.0)?);
    let unit = |d: f64| -> Result<f64> {
        let p1 = ParticleSpec::new(Vector3::zeros(), m);
        let p2 = ParticleSpec::new(Vector3::new(0.0, 0.0, d * lt), m);
        let ctx = ctx.with_min_separation(ctx.min_separation_factor().min(0.5 * d));
        Ok(one_reflection_sum(&Reduced::new(&p2, &p1, &ctx)?, policy, 1.0)?.free_energy)
    };
    let geometry = |d: f64| ToyGeometry {
        distance: d * lt,
        theta: 0.0,
        phi: 0.0,
        b1: 0.0,
        b2: 0.0,
        alpha0,
        temperature: ctx.temperature(),
    };
    let (short_distance, long_distance) = (1e-4, 30.0);
    let xi_squared_short = f_short(&geometry(short_distance)) / unit(short_distance)?;
    let f_unit_long = unit(long_distance)?;
    let xi_squared_long = f_long(&geometry(long_distance)) / f_unit_long;
    Ok(CouplingCalibration {
        xi_squared_short,
        xi_squared_long,
        long_ratio: DIPOLE_COUPLING * DIPOLE_COUPLING * f_unit_long / f_long(&geometry(long_distance)),
        short_distance,
        long_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{MagnetoOpticalModel, ToyPolarizability};
    use approx::assert_relative_eq;

    fn ctx() -> ThermalContext {
        ThermalContext::new(300.0).unwrap()
    }

    fn toy(alpha0_lt3: f64, b: f64) -> Material {
        let lt = ctx().thermal_length();
        Material::from(ToyPolarizability::along_x(alpha0_lt3 * lt.powi(3), b).unwrap())
    }

    fn pair(d_lt: f64, dir: Vector3<f64>, m1: Material, m2: Material) -> (ParticleSpec, ParticleSpec) {
        let lt = ctx().thermal_length();
        (
            ParticleSpec::new(Vector3::new(0.1, -0.2, 0.05) * lt, m1),
            ParticleSpec::new((Vector3::new(0.1, -0.2, 0.05) + dir.normalize() * d_lt) * lt, m2),
        )
    }

    #[test]
    fn static_round_trip_trace() {
        // Tr{(I − 3x̂x̂)²} = 6 → Tr N₀ = ξ² 6 α₀²/(16 π² d⁶)
        let (p1, p2) = pair(0.7, Vector3::x(), toy(1e-3, 0.0), toy(1e-3, 0.0));
        let rt = round_trip(0, &p1, &p2, &ctx()).unwrap();
        let expected = 6.0 * 1e-6 / (16.0 * PI * PI * 0.7f64.powi(6));
        assert_relative_eq!(rt.matrix.trace(), expected, max_relative = 1e-12);
    }

    #[test]
    fn round_trip_is_screened() {
        let d = 0.7;
        let n = (40.0 / (2.0 * PI * d)).ceil() as u64;
        let (p1, p2) = pair(d, Vector3::y(), toy(1e-3, 1.0), toy(1e-3, 1.0));
        let rt = round_trip(n, &p1, &p2, &ctx()).unwrap();
        let x = 2.0 * PI * n as f64 * d;
        let poly = (x * x + 3.0 * x + 3.0).powi(2) * 1e-6 * 4.0 / (16.0 * PI * PI * d.powi(6));
        assert!(rt.matrix.norm() < (-2.0 * x).exp() * poly * 10.0);
        assert!(rt.matrix.norm() < 1e-35);
    }

    #[test]
    fn too_close_is_rejected() {
        let (p1, p2) = pair(1e-4, Vector3::x(), toy(1e-9, 0.0), toy(1e-9, 0.0));
        let err = free_energy_one_reflection(&p1, &p2, &ctx(), &MatsubaraPolicy::default()).unwrap_err();
        assert!(matches!(err, Error::TooClose { .. }));
        let same = p1.moved_to(p1.position);
        assert_eq!(
            free_energy_one_reflection(&p1, &same, &ctx(), &MatsubaraPolicy::default()).unwrap_err(),
            Error::SingularGeometry
        );
    }

    #[test]
    fn one_nonreciprocal_particle_does_not_contribute() {
        let policy = MatsubaraPolicy::default();
        let dir = Vector3::new(0.3, 1.0, -0.4);
        let base = {
            let (p1, p2) = pair(0.4, dir, toy(1e-3, 0.0), toy(1e-3, 0.0));
            free_energy_one_reflection(&p1, &p2, &ctx(), &policy).unwrap().free_energy
        };
        for b1 in [1.0, 5.0] {
            let (p1, p2) = pair(0.4, dir, toy(1e-3, b1), toy(1e-3, 0.0));
            let f = free_energy_one_reflection(&p1, &p2, &ctx(), &policy).unwrap().free_energy;
            assert_relative_eq!(f, base, max_relative = 1e-14);
        }
    }

    #[test]
    fn decomposition_sums_and_cross_vanishes() {
        let (p1, p2) = pair(0.3, Vector3::new(1.0, 0.5, 0.2), toy(1e-3, 1.5), toy(1e-3, -0.7));
        let r = free_energy_one_reflection(&p1, &p2, &ctx(), &MatsubaraPolicy::default()).unwrap();
        let dec = r.decomposition.unwrap();
        assert!(dec.cross.abs() <= 1e-12 * r.free_energy.abs());
        assert_relative_eq!(dec.sum(), r.free_energy, max_relative = 1e-13);
        assert!(dec.reciprocal < 0.0);
    }

    #[test]
    fn exchange_symmetry_is_exact() {
        let (p1, p2) = pair(0.25, Vector3::new(0.2, 1.0, 0.7), toy(1e-3, 2.0), toy(2e-3, -0.4));
        let policy = MatsubaraPolicy::default();
        let a = free_energy_one_reflection(&p1, &p2, &ctx(), &policy).unwrap().free_energy;
        let b = free_energy_one_reflection(&p2, &p1, &ctx(), &policy).unwrap().free_energy;
        assert_eq!(a, b);
    }

    #[test]
    fn exact_branch_is_second_order_close() {
        let policy = MatsubaraPolicy::default();
        let (p1, p2) = pair(0.2, Vector3::new(1.0, 1.0, 0.0), toy(2e-4, 1.0), toy(2e-4, 1.3));
        let one = free_energy_one_reflection(&p1, &p2, &ctx(), &policy).unwrap();
        let exact = free_energy_exact_dipole(&p1, &p2, &ctx(), &policy).unwrap();
        let gap = (exact.free_energy - one.free_energy).abs();
        assert!(gap <= exact.second_order_bound.unwrap());
        assert!(gap > 0.0);
    }

    #[test]
    fn exact_branch_deviates_at_strong_polarizability() {
        let policy = MatsubaraPolicy::default();
        let d = 0.1;
        let rel = |a: f64| {
            let (p1, p2) = pair(d, Vector3::z(), toy(a, 0.0), toy(a, 0.0));
            let one = free_energy_one_reflection(&p1, &p2, &ctx(), &policy).unwrap().free_energy;
            let exact = free_energy_exact_dipole(&p1, &p2, &ctx(), &policy).unwrap().free_energy;
            (exact - one) / one
        };
        let small = rel(1e-6 * d.powi(3));
        assert!(small.abs() < 1e-9);
        // α₀/d³ = 0.1 → ‖N‖ ≈ 1e-2/(4π)², a measurable 1e-4-level correction
        let big = rel(0.1 * d.powi(3));
        assert!(big.abs() > 1e-5);
        // One-reflection energy is exactly quadratic in α₀
        let f = |a: f64| {
            let (p1, p2) = pair(d, Vector3::z(), toy(a, 0.0), toy(a, 0.0));
            free_energy_one_reflection(&p1, &p2, &ctx(), &policy).unwrap().free_energy
        };
        assert_relative_eq!(f(2e-5), 4.0 * f(1e-5), max_relative = 1e-13);
    }

    #[test]
    fn strong_coupling_is_refused() {
        let (p1, p2) = pair(0.01, Vector3::x(), toy(0.5e-6 * 4.0 * PI * 2.0, 0.0), toy(0.5e-6 * 4.0 * PI * 2.0, 0.0));
        let err = free_energy_exact_dipole(&p1, &p2, &ctx(), &MatsubaraPolicy::default()).unwrap_err();
        assert!(matches!(err, Error::StrongCoupling { n: 0, .. }));
    }

    #[test]
    fn forces_are_reciprocal_and_consistent() {
        let policy = MatsubaraPolicy::default();
        for approx in [Approximation::OneReflection, Approximation::ExactDipole] {
            let (p1, p2) = pair(0.35, Vector3::new(1.0, -0.3, 0.6), toy(1e-3, 1.2), toy(1e-3, 0.8));
            let f1 = force(&p1, &p2, &ctx(), &policy, approx, ForceMethod::CrossChecked).unwrap();
            let f2 = force(&p2, &p1, &ctx(), &policy, approx, ForceMethod::CrossChecked).unwrap();
            assert!((f1 + f2).norm() <= 1e-10 * f1.norm());
        }
    }

    #[test]
    fn reciprocal_pair_attracts() {
        let policy = MatsubaraPolicy::default();
        for d in [0.01, 0.3, 3.0] {
            let (p1, p2) = pair(d, Vector3::x(), toy(1e-9, 0.0), toy(1e-9, 0.0));
            let f2 = force(&p2, &p1, &ctx(), &policy, Approximation::OneReflection, ForceMethod::Analytic).unwrap();
            // Points from target toward the other particle.
            assert!(f2.dot(&(p1.position - p2.position)) > 0.0);
        }
    }

    #[test]
    fn strong_gyrotropy_repels_at_short_range() {
        let policy = MatsubaraPolicy::default();
        let (p1, p2) = pair(0.01, Vector3::x(), toy(1e-9, 2.0), toy(1e-9, 2.0));
        let f2 = force(&p2, &p1, &ctx(), &policy, Approximation::OneReflection, ForceMethod::Analytic).unwrap();
        assert!(f2.dot(&(p2.position - p1.position)) > 0.0);
        let e = free_energy_one_reflection(&p1, &p2, &ctx(), &policy).unwrap().free_energy;
        assert!(e > 0.0);
    }

    #[test]
    fn laplacian_of_reciprocal_power_law() {
        // F ≈ −C/d⁶ at d ≫ λ_T → ∇²F = −30 C/d⁸ = 30 F/d².
        let policy = MatsubaraPolicy::default();
        let (p1, p2) = pair(12.0, Vector3::new(0.3, 0.4, 1.0), toy(1e-3, 0.0), toy(1e-3, 0.0));
        let f = free_energy_one_reflection(&p1, &p2, &ctx(), &policy).unwrap().free_energy;
        let lap = laplacian(&p2, &p1, &ctx(), &policy, Approximation::OneReflection).unwrap();
        let d = (p2.position - p1.position).norm();
        assert!(!lap.noisy);
        assert_relative_eq!(lap.value, 30.0 * f / (d * d), max_relative = 1e-2);
        assert!(lap.value < 0.0);
        let h = hessian(&p2, &p1, &ctx(), &policy, Approximation::OneReflection).unwrap();
        assert_relative_eq!(h.trace(), lap.value, max_relative = 1e-4);
    }

    #[test]
    fn coupling_reproduces_retarded_law() {
        let cal = calibrate_coupling(&ctx(), &MatsubaraPolicy::default()).unwrap();
        assert_relative_eq!(cal.xi_squared_short, DIPOLE_COUPLING * DIPOLE_COUPLING, max_relative = 1e-3);
        // The classical law as printed would need twice the coupling.
        assert_relative_eq!(cal.xi_squared_long, 2.0, max_relative = 1e-9);
        assert_relative_eq!(cal.long_ratio, 0.5, max_relative = 1e-9);
    }

    #[test]
    fn magneto_optical_pair_is_finite_and_attractive() {
        let lt = ctx().thermal_length();
        let m = Material::from(MagnetoOpticalModel::new(2e8, 2.46e14, 1.0, Vector3::x(), 1e-3 * lt).unwrap());
        let (p1, p2) = pair(0.47, Vector3::x(), m, m);
        let r = free_energy_one_reflection(&p1, &p2, &ctx(), &MatsubaraPolicy::default()).unwrap();
        assert!(r.free_energy < 0.0 && r.free_energy.is_finite());
    }
}
