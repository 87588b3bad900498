//! Units, thermal scales and the free-space dyadic Green's function on the
//! imaginary frequency axis.
//!
//! The Green's function used throughout is the transverse imaginary-frequency
//! dyadic
//!
//! ```text
//! G(κ, r) = e^{−κr}/(4πr) [(1 + 1/(κr) + 1/(κr)²) I − (1 + 3/(κr) + 3/(κr)²) r̂r̂]
//! ```
//!
//! The engine works with the combination `P = κ² G`, which stays finite as
//! `κ → 0` and reduces to the static tensor `(I − 3r̂r̂)/(4πr³)`:
//!
//! ```text
//! P(κ, r) = e^{−x}/(4πr³) [(x² + x + 1) I − (x² + 3x + 3) r̂r̂],   x = κr
//! ```
//!
//! All functions here are unit-agnostic: lengths and wavenumbers only need to
//! be mutually consistent.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Default minimum separation, in units of the thermal length.
pub const DEFAULT_MIN_SEPARATION: f64 = 1e-3;

/// Temperature together with the derived thermal length `λ_T = ħc/(k_B T)`
/// and Matsubara wavenumber unit `κ₁ = 2π/λ_T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalContext {
    temperature: f64,
    thermal_length: f64,
    kappa_unit: f64,
    min_separation: f64,
}

impl ThermalContext {
    pub fn new(temperature: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::InvalidParameter {
                name: "temperature",
                value: temperature,
                reason: "must be positive and finite",
            });
        }
        let thermal_length = HBAR * SPEED_OF_LIGHT / (BOLTZMANN * temperature);
        Ok(Self {
            temperature,
            thermal_length,
            kappa_unit: 2.0 * PI / thermal_length,
            min_separation: DEFAULT_MIN_SEPARATION,
        })
    }

    /// Override the minimum allowed separation (in units of λ_T).
    pub fn with_min_separation(mut self, factor: f64) -> Self {
        self.min_separation = factor;
        self
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// `λ_T = ħc/(k_B T)` in meters.
    pub fn thermal_length(&self) -> f64 {
        self.thermal_length
    }

    /// `κ₁ = 2π k_B T/(ħc)` in 1/m.
    pub fn kappa_unit(&self) -> f64 {
        self.kappa_unit
    }

    /// `k_B T` in joules.
    pub fn thermal_energy(&self) -> f64 {
        BOLTZMANN * self.temperature
    }

    /// Minimum separation in units of λ_T.
    pub fn min_separation_factor(&self) -> f64 {
        self.min_separation
    }

    /// Minimum separation in meters.
    pub fn min_separation(&self) -> f64 {
        self.min_separation * self.thermal_length
    }

    /// Imaginary angular frequency `ξ_n = c κ_n` (rad/s).
    pub fn matsubara_xi(&self, n: u64) -> f64 {
        SPEED_OF_LIGHT * matsubara_kappa(n, self)
    }
}

/// Matsubara wavenumber `κ_n = 2π n k_B T/(ħc)` (1/m).
pub fn matsubara_kappa(n: u64, ctx: &ThermalContext) -> f64 {
    n as f64 * ctx.kappa_unit
}

/// Antisymmetric generator `[a]×` with `[a]× v = a × v`.
pub fn cross_matrix(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// `(M + Mᵀ)/2`
pub fn symmetric_part(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// `(M − Mᵀ)/2`
pub fn antisymmetric_part(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m - m.transpose()) * 0.5
}

fn unit_and_length(dr: &Vector3<f64>) -> Result<(Vector3<f64>, f64)> {
    let r = dr.norm();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::SingularGeometry);
    }
    Ok((dr / r, r))
}

fn isotropic_plus_dyad(a: f64, b: f64, u: &Vector3<f64>) -> Matrix3<f64> {
    let mut m = u * u.transpose() * b;
    m[(0, 0)] += a;
    m[(1, 1)] += a;
    m[(2, 2)] += a;
    m
}

/// Static dipole tensor `(I − 3r̂r̂)/(4πr³)`, the `κ → 0` limit of `κ² G`.
pub fn static_dyadic(dr: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let (u, r) = unit_and_length(dr)?;
    let s = 1.0 / (4.0 * PI * r * r * r);
    Ok(isotropic_plus_dyad(s, -3.0 * s, &u))
}

/// `G(κ, Δr)` for `κ > 0`. Units of 1/length.
pub fn green_dyadic(kappa: f64, dr: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let (u, r) = unit_and_length(dr)?;
    if kappa <= 0.0 {
        return Err(Error::ZeroWavenumber);
    }
    let x = kappa * r;
    let pre = (-x).exp() / (4.0 * PI * r);
    let a = 1.0 + 1.0 / x + 1.0 / (x * x);
    let b = 1.0 + 3.0 / x + 3.0 / (x * x);
    Ok(isotropic_plus_dyad(pre * a, -pre * b, &u))
}

/// `∂G/∂Δr_axis` for `κ > 0`.
pub fn green_gradient(kappa: f64, dr: &Vector3<f64>, axis: usize) -> Result<Matrix3<f64>> {
    if kappa <= 0.0 {
        unit_and_length(dr)?;
        return Err(Error::ZeroWavenumber);
    }
    Ok(propagator_gradient(kappa, dr)?[axis] / (kappa * kappa))
}

/// Coupling propagator `P = κ² G(κ, Δr)`, finite for every `κ ≥ 0`; at
/// `κ = 0` it is the static tensor.
pub fn propagator(kappa: f64, dr: &Vector3<f64>) -> Result<Matrix3<f64>> {
    if kappa == 0.0 {
        return static_dyadic(dr);
    }
    let (u, r) = unit_and_length(dr)?;
    let x = kappa * r;
    let pre = (-x).exp() / (4.0 * PI * r * r * r);
    let a = x * x + x + 1.0;
    let b = x * x + 3.0 * x + 3.0;
    Ok(isotropic_plus_dyad(pre * a, -pre * b, &u))
}

/// `∂P/∂Δr_a` for `a = x, y, z`.
///
/// With `P = A(r) I − B(r) r̂r̂`:
/// `∂_a P = A′ r̂_a I − B′ r̂_a r̂r̂ − B (e_a r̂ᵀ + r̂ e_aᵀ − 2 r̂_a r̂r̂)/r`.
pub fn propagator_gradient(kappa: f64, dr: &Vector3<f64>) -> Result<[Matrix3<f64>; 3]> {
    let (u, r) = unit_and_length(dr)?;
    let x = kappa * r;
    let e = (-x).exp();
    let r3 = 4.0 * PI * r * r * r;
    let r4 = r3 * r;
    let b = e * (x * x + 3.0 * x + 3.0) / r3;
    let da = -e * (((x + 2.0) * x + 3.0) * x + 3.0) / r4;
    let db = -e * (((x + 4.0) * x + 9.0) * x + 9.0) / r4;
    let uu = u * u.transpose();
    let mut out = [Matrix3::zeros(); 3];
    for (a, grad) in out.iter_mut().enumerate() {
        let mut ea = Vector3::zeros();
        ea[a] = 1.0;
        let sym = ea * u.transpose() + u * ea.transpose();
        *grad = Matrix3::identity() * (da * u[a]) - uu * (db * u[a])
            - (sym - uu * (2.0 * u[a])) * (b / r);
    }
    Ok(out)
}
