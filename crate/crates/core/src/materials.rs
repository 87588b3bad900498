//! Polarizability models on the imaginary frequency axis.
//!
//! Two models are provided. The toy model is frequency independent,
//! `α = α₀ (I + b [a]×)`, where `[a]×` is the cross-product generator of the
//! field axis `a`. The magneto-optical model is a Drude metal in a static
//! field along `a`, mapped to a sphere polarizability by the tensor
//! Clausius–Mossotti relation `α = R³ (ε − I)(ε + 2I)⁻¹`.

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::em::{antisymmetric_part, cross_matrix, symmetric_part};
use crate::error::{Error, Result};

/// Axes within this distance of unit norm are renormalized; anything else is
/// rejected.
pub const AXIS_TOLERANCE: f64 = 1e-12;

fn unit_axis(axis: Vector3<f64>) -> Result<Vector3<f64>> {
    let norm = axis.norm();
    if (norm - 1.0).abs() > AXIS_TOLERANCE || !norm.is_finite() {
        return Err(Error::InvalidAxis { norm });
    }
    if norm != 1.0 {
        log::warn!("renormalizing material axis of norm {norm}");
    }
    Ok(axis / norm)
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be non-negative and finite",
        })
    }
}

/// Frequency-independent non-reciprocal polarizability `α₀ (I + b [a]×)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyPolarizability {
    alpha0: f64,
    b: f64,
    axis: Vector3<f64>,
}

impl ToyPolarizability {
    pub fn new(alpha0: f64, b: f64, axis: Vector3<f64>) -> Result<Self> {
        if !b.is_finite() {
            return Err(Error::InvalidParameter {
                name: "b",
                value: b,
                reason: "must be finite",
            });
        }
        Ok(Self {
            alpha0: positive("alpha0", alpha0)?,
            b,
            axis: unit_axis(axis)?,
        })
    }

    /// Field along x̂.
    pub fn along_x(alpha0: f64, b: f64) -> Result<Self> {
        Self::new(alpha0, b, Vector3::x())
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    pub fn tensor(&self) -> Matrix3<f64> {
        (Matrix3::identity() + cross_matrix(&self.axis) * self.b) * self.alpha0
    }
}

/// Drude metal sphere in a static field: plasma frequency `ω_p`, relaxation
/// `ω_τ`, cyclotron frequency `ω_b` (all rad/s), field axis, radius `R` (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetoOpticalModel {
    omega_p: f64,
    omega_tau: f64,
    omega_b: f64,
    axis: Vector3<f64>,
    radius: f64,
}

impl MagnetoOpticalModel {
    pub fn new(
        omega_p: f64,
        omega_tau: f64,
        omega_b: f64,
        axis: Vector3<f64>,
        radius: f64,
    ) -> Result<Self> {
        if !omega_b.is_finite() {
            return Err(Error::InvalidParameter {
                name: "omega_b",
                value: omega_b,
                reason: "must be finite",
            });
        }
        Ok(Self {
            omega_p: positive("omega_p", omega_p)?,
            omega_tau: non_negative("omega_tau", omega_tau)?,
            omega_b,
            axis: unit_axis(axis)?,
            radius: positive("radius", radius)?,
        })
    }

    pub fn omega_p(&self) -> f64 {
        self.omega_p
    }

    pub fn omega_tau(&self) -> f64 {
        self.omega_tau
    }

    pub fn omega_b(&self) -> f64 {
        self.omega_b
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Diagonal, axial and gyrotropic components `(ε_d, ε_p, g)` at `ω = iξ`.
    ///
    /// `ε_d = 1 + ω_p²(ξ + ω_τ)/(ξ D)`, `ε_p = 1 + ω_p²/(ξ(ξ + ω_τ))`,
    /// `g = ω_b ω_p²/(ξ D)` with `D = (ξ + ω_τ)² + ω_b²`.
    pub fn components(&self, xi: f64) -> Result<(f64, f64, f64)> {
        if !(xi > 0.0) {
            return Err(Error::Domain {
                what: "magneto-optical permittivity",
                xi,
            });
        }
        let wp2 = self.omega_p * self.omega_p;
        let s = xi + self.omega_tau;
        let d = s * s + self.omega_b * self.omega_b;
        let eps_d = 1.0 + wp2 * s / (xi * d);
        let eps_p = 1.0 + wp2 / (xi * s);
        let g = self.omega_b * wp2 / (xi * d);
        Ok((eps_d, eps_p, g))
    }
}

/// Where a polarizability tensor came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Toy,
    MagnetoOptical,
}

/// Real 3×3 polarizability (m³) at one imaginary frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizabilityTensor {
    pub value: Matrix3<f64>,
    pub provenance: Provenance,
}

/// Either material model, as carried by a particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Material {
    Toy(ToyPolarizability),
    MagnetoOptical(MagnetoOpticalModel),
}

impl From<ToyPolarizability> for Material {
    fn from(m: ToyPolarizability) -> Self {
        Material::Toy(m)
    }
}

impl From<MagnetoOpticalModel> for Material {
    fn from(m: MagnetoOpticalModel) -> Self {
        Material::MagnetoOptical(m)
    }
}

impl Material {
    /// Polarizability at imaginary frequency `ξ ≥ 0` (rad/s). At `ξ = 0` the
    /// magneto-optical sphere takes its `ξ → 0⁺` limit `R³ I`.
    pub fn polarizability(&self, xi: f64) -> Result<PolarizabilityTensor> {
        match self {
            Material::Toy(m) => Ok(toy_alpha(m)),
            Material::MagnetoOptical(m) if xi == 0.0 => Ok(PolarizabilityTensor {
                value: Matrix3::identity() * m.radius.powi(3),
                provenance: Provenance::MagnetoOptical,
            }),
            Material::MagnetoOptical(m) => {
                let eps = mo_permittivity(xi, m)?;
                cm_polarizability(&eps, m.radius)
                    .map_err(|_| Error::Resonance { xi: Some(xi) })
            }
        }
    }

    pub fn axis(&self) -> Vector3<f64> {
        match self {
            Material::Toy(m) => m.axis,
            Material::MagnetoOptical(m) => m.axis,
        }
    }

    /// Same material with its field axis rotated.
    pub fn rotated(&self, rotation: &Rotation3<f64>) -> Self {
        let mut out = *self;
        match &mut out {
            Material::Toy(m) => m.axis = rotation * m.axis,
            Material::MagnetoOptical(m) => m.axis = rotation * m.axis,
        }
        out
    }

    /// Partner with the field reversed (`b → −b` or `ω_b → −ω_b`).
    pub fn field_reversed(&self) -> Self {
        let mut out = *self;
        match &mut out {
            Material::Toy(m) => m.b = -m.b,
            Material::MagnetoOptical(m) => m.omega_b = -m.omega_b,
        }
        out
    }

    pub fn is_reciprocal(&self) -> bool {
        match self {
            Material::Toy(m) => m.b == 0.0,
            Material::MagnetoOptical(m) => m.omega_b == 0.0,
        }
    }
}

/// The toy model's tensor.
pub fn toy_alpha(model: &ToyPolarizability) -> PolarizabilityTensor {
    PolarizabilityTensor {
        value: model.tensor(),
        provenance: Provenance::Toy,
    }
}

/// Dielectric tensor at `ω = iξ`. In the axis frame (axis = x̂) it reads
/// `[[ε_p, 0, 0], [0, ε_d, −g], [0, g, ε_d]]`.
pub fn mo_permittivity(xi: f64, model: &MagnetoOpticalModel) -> Result<Matrix3<f64>> {
    let (eps_d, eps_p, g) = model.components(xi)?;
    let a = model.axis;
    Ok(Matrix3::identity() * eps_d
        + a * a.transpose() * (eps_p - eps_d)
        + cross_matrix(&a) * g)
}

/// Tensor Clausius–Mossotti sphere polarizability `R³ (ε − I)(ε + 2I)⁻¹`.
pub fn cm_polarizability(eps: &Matrix3<f64>, radius: f64) -> Result<PolarizabilityTensor> {
    let shifted = eps + Matrix3::identity() * 2.0;
    let scale = shifted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let det = shifted.determinant();
    if !(det.abs() > 1e-14 * scale.powi(3)) {
        return Err(Error::Resonance { xi: None });
    }
    let inv = shifted.try_inverse().ok_or(Error::Resonance { xi: None })?;
    Ok(PolarizabilityTensor {
        value: (eps - Matrix3::identity()) * inv * radius.powi(3),
        provenance: Provenance::MagnetoOptical,
    })
}

/// Reciprocal and anti-reciprocal parts `A± = (α ± αᵀ)/2`.
pub fn split_reciprocal(alpha: &PolarizabilityTensor) -> (Matrix3<f64>, Matrix3<f64>) {
    (symmetric_part(&alpha.value), antisymmetric_part(&alpha.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig2(axis: Vector3<f64>) -> MagnetoOpticalModel {
        MagnetoOpticalModel::new(2e8, 2.46e14, 1.0, axis, 1e-8).unwrap()
    }

    #[test]
    fn toy_reciprocal_isotropic() {
        let t = toy_alpha(&ToyPolarizability::along_x(1.0, 0.0).unwrap());
        assert_eq!(t.value, Matrix3::identity());
    }

    #[test]
    fn toy_matrix_layout() {
        let t = toy_alpha(&ToyPolarizability::along_x(1.0, 2.0).unwrap());
        let expected = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, -2.0, 0.0, 2.0, 1.0);
        assert_eq!(t.value, expected);
    }

    #[test]
    fn toy_transpose_flips_gyrotropy() {
        let axis = Vector3::new(0.48, -0.6, 0.64);
        let plus = ToyPolarizability::new(0.7, 1.3, axis).unwrap();
        let minus = ToyPolarizability::new(0.7, -1.3, axis).unwrap();
        assert_eq!(plus.tensor().transpose(), minus.tensor());
    }

    #[test]
    fn axis_validation() {
        let almost = Vector3::new(1.0 + 5e-13, 0.0, 0.0);
        let ok = ToyPolarizability::new(1.0, 1.0, almost).unwrap();
        assert_eq!(ok.axis(), Vector3::x());
        let err = ToyPolarizability::new(1.0, 1.0, Vector3::new(2.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidAxis { .. }));
        assert!(ToyPolarizability::along_x(0.0, 1.0).is_err());
    }

    #[test]
    fn split_of_toy_tensor() {
        let m = ToyPolarizability::along_x(2.0, 0.5).unwrap();
        let (plus, minus) = split_reciprocal(&toy_alpha(&m));
        assert_eq!(plus, Matrix3::identity() * 2.0);
        assert_eq!(minus, cross_matrix(&Vector3::x()) * 1.0);
        assert_eq!(plus + minus, m.tensor());
        let sym = PolarizabilityTensor {
            value: Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0),
            provenance: Provenance::Toy,
        };
        assert_eq!(split_reciprocal(&sym).1, Matrix3::zeros());
    }

    #[test]
    fn reciprocal_drude_is_isotropic() {
        let m = MagnetoOpticalModel::new(3e14, 1e13, 0.0, Vector3::x(), 1e-8).unwrap();
        let xi = 2e14;
        let eps = mo_permittivity(xi, &m).unwrap();
        // ε(iξ) = 1 + ω_p²/(ξ(ξ + ω_τ)) by direct substitution
        let by_hand = 1.0 + 9e28 / (2e14 * 2.1e14);
        assert_relative_eq!(eps, Matrix3::identity() * by_hand, max_relative = 1e-14);
    }

    #[test]
    fn high_frequency_transparency() {
        let m = MagnetoOpticalModel::new(3e14, 1e13, 5e13, Vector3::y(), 1e-8).unwrap();
        let eps = mo_permittivity(1e22, &m).unwrap();
        assert!((eps - Matrix3::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn gyrotropic_sign_follows_real_frequency_form() {
        // ε_yz = −i ε_f(iξ) and ε_f(iξ) = −i ω_b ω_p²/(ξ D), so ε_yz = −g < 0 for ω_b > 0.
        let m = MagnetoOpticalModel::new(3e14, 1e13, 5e13, Vector3::x(), 1e-8).unwrap();
        let eps = mo_permittivity(1e14, &m).unwrap();
        assert!(eps[(1, 2)] < 0.0);
        assert_eq!(eps[(1, 2)], -eps[(2, 1)]);
        assert_eq!(eps[(0, 1)], 0.0);
    }

    #[test]
    fn weak_field_drude_sphere_at_first_matsubara_frequency() {
        let xi1 = 2.0 * std::f64::consts::PI * crate::em::BOLTZMANN * 300.0 / crate::em::HBAR;
        let (eps_d, eps_p, g) = fig2(Vector3::x()).components(xi1).unwrap();
        // Direct substitution: ε_d − 1 ≈ 3.29e-13, g ≈ 6.67e-28.
        assert_relative_eq!(eps_d - 1.0, 3.289_27e-13, max_relative = 1e-4);
        assert_relative_eq!(g, 6.674_94e-28, max_relative = 1e-4);
        assert!(g.abs() < 1e-10 * (eps_d - 1.0));
        assert!(eps_p.is_finite());
        let eps = mo_permittivity(xi1, &fig2(Vector3::x())).unwrap();
        assert!(eps.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn permittivity_domain() {
        let m = fig2(Vector3::x());
        assert!(matches!(mo_permittivity(0.0, &m), Err(Error::Domain { .. })));
        assert!(mo_permittivity(-1.0, &m).is_err());
    }

    #[test]
    fn clausius_mossotti_limits() {
        assert_eq!(cm_polarizability(&Matrix3::identity(), 1.0).unwrap().value, Matrix3::zeros());
        let eps = 4.5;
        let a = cm_polarizability(&(Matrix3::identity() * eps), 2.0).unwrap().value;
        assert_relative_eq!(a, Matrix3::identity() * 8.0 * (eps - 1.0) / (eps + 2.0), max_relative = 1e-14);
        let gyro = Matrix3::new(3.0, 0.0, 0.0, 0.0, 2.0, -0.4, 0.0, 0.4, 2.0);
        let a1 = cm_polarizability(&gyro, 1.0).unwrap().value;
        let a2 = cm_polarizability(&gyro, 2.0).unwrap().value;
        assert_relative_eq!(a2, a1 * 8.0, max_relative = 1e-15);
        let resonant = Matrix3::identity() * -2.0;
        assert!(matches!(cm_polarizability(&resonant, 1.0), Err(Error::Resonance { .. })));
    }

    #[test]
    fn static_limit_is_perfect_conductor() {
        let m = Material::from(fig2(Vector3::z()));
        let a = m.polarizability(0.0).unwrap().value;
        assert_relative_eq!(a, Matrix3::identity() * 1e-24, max_relative = 1e-15);
        // ...and the finite-ξ formula approaches it
        let strong = MagnetoOpticalModel::new(1e15, 1e12, 1e11, Vector3::z(), 1e-8).unwrap();
        let near = Material::from(strong).polarizability(1.0).unwrap().value;
        assert!((near / 1e-24 - Matrix3::identity()).abs().max() < 1e-3);
    }

    #[test]
    fn toy_anticommutator_traceless() {
        let m = ToyPolarizability::new(1.3, 0.8, Vector3::new(0.0, 0.6, 0.8)).unwrap();
        let (p, a) = split_reciprocal(&toy_alpha(&m));
        assert!((p * a + a * p).trace().abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn passive_and_monotone(log_xi in 10.0..18.0f64, wp in 13.0..16.0f64, wt in 11.0..14.0f64,
                                wb in -14.0..14.0f64, ax in -1.0..1.0f64, ay in -1.0..1.0f64) {
            let axis = Vector3::new(ax, ay, 0.5).normalize();
            let wb = wb.signum() * 10f64.powf(wb.abs().max(1.0));
            let m = MagnetoOpticalModel::new(10f64.powf(wp), 10f64.powf(wt), wb, axis, 1e-8).unwrap();
            let xi = 10f64.powf(log_xi);
            let eps = mo_permittivity(xi, &m).unwrap();
            let sym = symmetric_part(&eps).symmetric_eigenvalues();
            prop_assert!(sym.iter().all(|&l| l >= 1.0 - 1e-12));
            let alpha = Material::from(m).polarizability(xi).unwrap();
            let (plus, _) = split_reciprocal(&alpha);
            prop_assert!(plus.symmetric_eigenvalues().iter().all(|&l| l > 0.0));
            let (d1, _, _) = m.components(xi).unwrap();
            let (d2, _, _) = m.components(xi * 1.5).unwrap();
            prop_assert!(d2 <= d1 && d2 >= 1.0);
        }
    }
}
