//! Closed-form limits of the two-particle free energy for the frequency
//! independent non-reciprocal toy polarizability `α₀ (I + b K_x)`.
//!
//! The second particle sits at `d (cos φ sin θ, sin φ sin θ, cos θ)` relative
//! to the first. Two regimes have printed closed forms:
//!
//! * classical, `d ≫ ħc/k_BT`:
//!   `F = k_BT α₀² / (32 π² d⁶) · [−12 − 5 b₁b₂ − 3 b₁b₂ (cos 2θ − 2 cos 2φ sin²θ)]`
//! * retarded, `d ≪ ħc/k_BT`:
//!   `F = ħc α₀² / (64 π³ d⁷) · [−23 − 8 b₁b₂ − 7 b₁b₂ (cos 2θ − 2 cos 2φ sin²θ)]`
//!
//! Nothing in this crate shares numerics with the scattering engine. The
//! engine is validated against these formulas, so they are kept verbatim and
//! self-contained.

use std::f64::consts::PI;
use std::fmt;

mod crossover;

pub use crossover::{crossover_scan, CrossoverReport, CrossoverRow, ScanRange};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Placement and material parameters of a toy particle pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyGeometry {
    /// Separation (m).
    pub distance: f64,
    /// Polar angle of the displacement (rad).
    pub theta: f64,
    /// Azimuth of the displacement (rad).
    pub phi: f64,
    pub b1: f64,
    pub b2: f64,
    /// Polarizability volume (m³).
    pub alpha0: f64,
    /// Temperature (K).
    pub temperature: f64,
}

impl ToyGeometry {
    /// Displacement of particle 2 relative to particle 1 (m).
    pub fn displacement(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [
            self.distance * cp * st,
            self.distance * sp * st,
            self.distance * ct,
        ]
    }

    /// Thermal length ħc/(k_B T) (m).
    pub fn thermal_length(&self) -> f64 {
        HBAR * SPEED_OF_LIGHT / (BOLTZMANN * self.temperature)
    }
}

impl fmt::Display for ToyGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "d={:e} m, θ={}, φ={}, b₁={}, b₂={}, α₀={:e} m³, T={} K",
            self.distance, self.theta, self.phi, self.b1, self.b2, self.alpha0, self.temperature
        )
    }
}

/// Angular factor `cos 2θ − 2 cos 2φ sin²θ` shared by both limits.
pub fn angular_factor(theta: f64, phi: f64) -> f64 {
    let s = theta.sin();
    (2.0 * theta).cos() - 2.0 * (2.0 * phi).cos() * s * s
}

/// Dimensionless bracket of the classical limit.
pub fn long_bracket(b1b2: f64, theta: f64, phi: f64) -> f64 {
    -12.0 - 5.0 * b1b2 - 3.0 * b1b2 * angular_factor(theta, phi)
}

/// Dimensionless bracket of the retarded limit.
pub fn short_bracket(b1b2: f64, theta: f64, phi: f64) -> f64 {
    -23.0 - 8.0 * b1b2 - 7.0 * b1b2 * angular_factor(theta, phi)
}

/// Classical (`d ≫ λ_T`) free energy in joules.
pub fn f_long(g: &ToyGeometry) -> f64 {
    let kt = BOLTZMANN * g.temperature;
    let d6 = g.distance.powi(6);
    kt * g.alpha0 * g.alpha0 / (32.0 * d6 * PI * PI) * long_bracket(g.b1 * g.b2, g.theta, g.phi)
}

/// Retarded (`d ≪ λ_T`) free energy in joules.
pub fn f_short(g: &ToyGeometry) -> f64 {
    let d7 = g.distance.powi(7);
    HBAR * SPEED_OF_LIGHT * g.alpha0 * g.alpha0 / (64.0 * d7 * PI.powi(3))
        * short_bracket(g.b1 * g.b2, g.theta, g.phi)
}

/// Product `b₁b₂` at which the bracket vanishes for the given direction, if
/// the gyrotropic coefficient is nonzero.
pub fn long_threshold(theta: f64, phi: f64) -> Option<f64> {
    let slope = -5.0 - 3.0 * angular_factor(theta, phi);
    (slope != 0.0).then(|| 12.0 / slope)
}

/// Retarded counterpart of [`long_threshold`].
pub fn short_threshold(theta: f64, phi: f64) -> Option<f64> {
    let slope = -8.0 - 7.0 * angular_factor(theta, phi);
    (slope != 0.0).then(|| 23.0 / slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn geometry(theta: f64, phi: f64, b1: f64, b2: f64) -> ToyGeometry {
        ToyGeometry {
            distance: 1e-6,
            theta,
            phi,
            b1,
            b2,
            alpha0: 1e-24,
            temperature: 300.0,
        }
    }

    #[test]
    fn reciprocal_brackets() {
        for &(t, p) in &[(0.0, 0.0), (0.3, 1.1), (FRAC_PI_2, 0.0)] {
            assert_eq!(long_bracket(0.0, t, p), -12.0);
            assert_eq!(short_bracket(0.0, t, p), -23.0);
        }
    }

    #[test]
    fn equatorial_x_axis_thresholds() {
        // θ = π/2, φ = 0: angular factor is −3.
        assert_relative_eq!(angular_factor(FRAC_PI_2, 0.0), -3.0, epsilon = 1e-15);
        assert_relative_eq!(long_bracket(2.0, FRAC_PI_2, 0.0), -12.0 + 8.0, epsilon = 1e-14);
        assert_relative_eq!(short_bracket(2.0, FRAC_PI_2, 0.0), -23.0 + 26.0, epsilon = 1e-14);
        assert_relative_eq!(long_threshold(FRAC_PI_2, 0.0).unwrap(), 3.0, epsilon = 1e-14);
        assert_relative_eq!(short_threshold(FRAC_PI_2, 0.0).unwrap(), 23.0 / 13.0, epsilon = 1e-14);
    }

    #[test]
    fn mirror_pair_along_z() {
        let b = 1.7;
        // b₂ = −b₁ = b along z.
        assert_relative_eq!(long_bracket(-b * b, 0.0, FRAC_PI_2), -12.0 + 8.0 * b * b, epsilon = 1e-13);
        assert_relative_eq!(short_bracket(-b * b, 0.0, FRAC_PI_2), -23.0 + 15.0 * b * b, epsilon = 1e-13);
    }

    #[test]
    fn prefactors() {
        let g = geometry(0.0, 0.0, 0.0, 0.0);
        let kt = BOLTZMANN * 300.0;
        let expected_long = -12.0 * kt * 1e-48 / (32.0 * 1e-36 * PI * PI);
        assert_relative_eq!(f_long(&g), expected_long, max_relative = 1e-14);
        let expected_short = -23.0 * HBAR * SPEED_OF_LIGHT * 1e-48 / (64.0 * 1e-42 * PI.powi(3));
        assert_relative_eq!(f_short(&g), expected_short, max_relative = 1e-14);
        assert!(f_long(&g) < 0.0 && f_short(&g) < 0.0);
    }

    #[test]
    fn displacement_matches_angles() {
        let g = geometry(FRAC_PI_2, 0.0, 0.0, 0.0);
        let r = g.displacement();
        assert_relative_eq!(r[0], 1e-6, max_relative = 1e-15);
        assert!(r[1].abs() < 1e-20 && r[2].abs() < 1e-20);
    }

    proptest! {
        #[test]
        fn brackets_depend_only_on_product(b1 in -5.0..5.0f64, b2 in -5.0..5.0f64,
                                           t in 0.0..3.2f64, p in 0.0..6.3f64) {
            let a = f_long(&geometry(t, p, b1, b2));
            let b = f_long(&geometry(t, p, -b1, -b2));
            prop_assert!((a - b).abs() <= 1e-14 * a.abs());
            let a = f_short(&geometry(t, p, b1, b2));
            let b = f_short(&geometry(t, p, -b1, -b2));
            prop_assert!((a - b).abs() <= 1e-14 * a.abs());
        }

        #[test]
        fn angular_symmetries(t in 0.0..3.2f64, p in 0.0..6.3f64) {
            let base = angular_factor(t, p);
            prop_assert!((angular_factor(t, p + PI) - base).abs() < 1e-12);
            prop_assert!((angular_factor(PI - t, p) - base).abs() < 1e-12);
            prop_assert!((angular_factor(t, -p) - base).abs() < 1e-12);
        }
    }
}
