//! The engine against the closed-form toy-model limits.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;
use nrcasimir::materials::ToyPolarizability;
use nrcasimir::{free_energy_one_reflection, MatsubaraPolicy, PairResult, ParticleSpec, ThermalContext};
use nrcasimir_asymptotics::{f_long, f_short, long_threshold, short_threshold, ToyGeometry};
use serde::Serialize;

use crate::tasks::EngineResult;

pub const RETARDED_DISTANCES: [f64; 3] = [1e-3, 3e-3, 1e-2];
pub const CLASSICAL_DISTANCES: [f64; 2] = [10.0, 30.0];
pub const PRODUCTS: [f64; 3] = [0.0, 1.0, 2.0];
pub const CALIBRATION_TOLERANCE: f64 = 1e-2;
pub const STRUCTURE_TOLERANCE: f64 = 1e-2;
pub const THRESHOLD_TOLERANCE: f64 = 2e-2;
pub const MIRROR_TOLERANCE: f64 = 1e-2;

/// Five polar and five azimuthal angles, away from the poles.
pub fn angle_grid() -> Vec<(f64, f64)> {
    let thetas = [0.2, 0.6, 1.0, 1.4, FRAC_PI_2];
    let phis = [0.0, 0.5, 1.1, 1.9, 2.8];
    thetas.iter().flat_map(|&t| phis.iter().map(move |&p| (t, p))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub check: &'static str,
    pub distance_lambda: f64,
    pub theta: f64,
    pub phi: f64,
    pub b1: f64,
    pub b2: f64,
    pub numeric_J: f64,
    pub reference_J: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckSummary>,
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Two toy particles with fields along x̂, the second at
/// `d (cos φ sin θ, sin φ sin θ, cos θ)` λ_T from the first.
pub fn toy_pair(
    ctx: &ThermalContext,
    alpha0_lambda3: f64,
    b1: f64,
    b2: f64,
    geometry: (f64, f64, f64),
) -> EngineResult<(ParticleSpec, ParticleSpec)> {
    let lt = ctx.thermal_length();
    let (d, theta, phi) = geometry;
    let a = alpha0_lambda3 * lt.powi(3);
    let dir = Vector3::new(phi.cos() * theta.sin(), phi.sin() * theta.sin(), theta.cos());
    Ok((
        ParticleSpec::new(Vector3::zeros(), ToyPolarizability::along_x(a, b1)?),
        ParticleSpec::new(dir * d * lt, ToyPolarizability::along_x(a, b2)?),
    ))
}

fn geometry(ctx: &ThermalContext, alpha0_lambda3: f64, b1: f64, b2: f64, g: (f64, f64, f64)) -> ToyGeometry {
    let lt = ctx.thermal_length();
    ToyGeometry {
        distance: g.0 * lt,
        theta: g.1,
        phi: g.2,
        b1,
        b2,
        alpha0: alpha0_lambda3 * lt.powi(3),
        temperature: ctx.temperature(),
    }
}

fn pair_energy(
    ctx: &ThermalContext,
    policy: &MatsubaraPolicy,
    a: f64,
    b1: f64,
    b2: f64,
    g: (f64, f64, f64),
) -> EngineResult<PairResult> {
    let ctx = ctx.with_min_separation(ctx.min_separation_factor().min(0.5 * g.0));
    let (p1, p2) = toy_pair(&ctx, a, b1, b2, g)?;
    free_energy_one_reflection(&p1, &p2, &ctx, policy)
}

fn row(
    check: &'static str,
    ctx: &ThermalContext,
    policy: &MatsubaraPolicy,
    a: f64,
    b: (f64, f64),
    g: (f64, f64, f64),
    reference: fn(&ToyGeometry) -> f64,
) -> EngineResult<ValidationRow> {
    let numeric = pair_energy(ctx, policy, a, b.0, b.1, g)?.free_energy;
    let reference = reference(&geometry(ctx, a, b.0, b.1, g));
    Ok(ValidationRow {
        check,
        distance_lambda: g.0,
        theta: g.1,
        phi: g.2,
        b1: b.0,
        b2: b.1,
        numeric_J: numeric,
        reference_J: reference,
        ratio: numeric / reference,
    })
}

/// `F / f_short` for reciprocal toy particles deep in the retarded regime.
pub fn retarded_calibration(ctx: &ThermalContext, policy: &MatsubaraPolicy, a: f64) -> EngineResult<Vec<ValidationRow>> {
    RETARDED_DISTANCES
        .iter()
        .map(|&d| row("retarded-calibration", ctx, policy, a, (0.0, 0.0), (d, FRAC_PI_2, 0.0), f_short))
        .collect()
}

/// `F / f_long` over distances, angles and gyrotropy products.
pub fn classical_structure(ctx: &ThermalContext, policy: &MatsubaraPolicy, a: f64) -> EngineResult<Vec<ValidationRow>> {
    let mut rows = Vec::new();
    for &d in &CLASSICAL_DISTANCES {
        for (theta, phi) in angle_grid() {
            for &bb in &PRODUCTS {
                let b = bb.sqrt();
                rows.push(row("classical-structure", ctx, policy, a, (b, b), (d, theta, phi), f_long)?);
            }
        }
    }
    Ok(rows)
}

/// Mean ratio and relative spread `(max − min)/|mean|`.
pub fn ratio_spread(rows: &[ValidationRow]) -> (f64, f64) {
    let mean = rows.iter().map(|r| r.ratio).sum::<f64>() / rows.len() as f64;
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.ratio), hi.max(r.ratio)));
    (mean, (hi - lo) / mean.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub distance_lambda: f64,
    /// `b₁b₂` at which the one-reflection energy changes sign.
    pub numeric: f64,
    pub expected: f64,
}

/// Sign-change threshold in `b₁b₂` at `θ = π/2, φ = 0`. The one-reflection
/// energy is affine in `b₁b₂` there, so two evaluations fix it.
pub fn repulsion_threshold(ctx: &ThermalContext, policy: &MatsubaraPolicy, a: f64, d: f64) -> EngineResult<f64> {
    let g = (d, FRAC_PI_2, 0.0);
    let f0 = pair_energy(ctx, policy, a, 0.0, 0.0, g)?.free_energy;
    let f1 = pair_energy(ctx, policy, a, 1.0, 1.0, g)?.free_energy;
    Ok(-f0 / (f1 - f0))
}

pub fn repulsion_thresholds(ctx: &ThermalContext, policy: &MatsubaraPolicy, a: f64) -> EngineResult<[Threshold; 2]> {
    let short = short_threshold(FRAC_PI_2, 0.0).expect("nonzero slope");
    let long = long_threshold(FRAC_PI_2, 0.0).expect("nonzero slope");
    Ok([
        Threshold {
            distance_lambda: 1e-3,
            numeric: repulsion_threshold(ctx, policy, a, 1e-3)?,
            expected: short,
        },
        Threshold {
            distance_lambda: 30.0,
            numeric: repulsion_threshold(ctx, policy, a, 30.0)?,
            expected: long,
        },
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MirrorCheck {
    pub distance_lambda: f64,
    /// `F⁻⁻` (J).
    pub anti_reciprocal_J: f64,
    /// `∂F⁻⁻/∂d` (J per λ_T).
    pub anti_reciprocal_slope: f64,
    /// `F(b₂ = −b₁ = 1) / F(b = 0)`.
    pub bracket_ratio: f64,
    /// `(−12 + 8b²)/(−12)` at `b = 1`.
    pub expected_ratio: f64,
}

/// Mirror pair: fields `∓x̂`, displaced along ẑ.
pub fn mirror(ctx: &ThermalContext, policy: &MatsubaraPolicy, a: f64, d: f64) -> EngineResult<MirrorCheck> {
    let at = |d: f64, b: f64| pair_energy(ctx, policy, a, -b, b, (d, 0.0, 0.0));
    let mm = |d: f64| -> EngineResult<f64> {
        Ok(at(d, 1.0)?.decomposition.expect("one reflection").anti_reciprocal)
    };
    let h = 1e-4 * d;
    let slope = (mm(d + h)? - mm(d - h)?) / (2.0 * h);
    Ok(MirrorCheck {
        distance_lambda: d,
        anti_reciprocal_J: mm(d)?,
        anti_reciprocal_slope: slope,
        bracket_ratio: at(d, 1.0)?.free_energy / at(d, 0.0)?.free_energy,
        expected_ratio: (-12.0 + 8.0) / -12.0,
    })
}

pub fn run_all(ctx: &ThermalContext, policy: &MatsubaraPolicy, a: f64) -> EngineResult<ValidationReport> {
    let mut checks = Vec::new();
    let mut rows = retarded_calibration(ctx, policy, a)?;
    let worst = rows.iter().map(|r| (r.ratio - 1.0).abs()).fold(0.0, f64::max);
    checks.push(CheckSummary {
        name: "retarded-calibration",
        passed: worst <= CALIBRATION_TOLERANCE,
        measured: worst,
        target: 0.0,
        tolerance: CALIBRATION_TOLERANCE,
        detail: "max |F/f_short − 1| at d/λ_T = 1e-3, 3e-3, 1e-2".into(),
    });

    let classical = classical_structure(ctx, policy, a)?;
    let (mean, spread) = ratio_spread(&classical);
    checks.push(CheckSummary {
        name: "classical-structure",
        passed: spread <= STRUCTURE_TOLERANCE,
        measured: spread,
        target: 0.0,
        tolerance: STRUCTURE_TOLERANCE,
        detail: format!("spread of F/f_long over {} points; constant ratio {mean:.12}", classical.len()),
    });
    rows.extend(classical);

    for t in repulsion_thresholds(ctx, policy, a)? {
        let rel = (t.numeric - t.expected).abs() / t.expected;
        checks.push(CheckSummary {
            name: "repulsion-threshold",
            passed: rel <= THRESHOLD_TOLERANCE,
            measured: t.numeric,
            target: t.expected,
            tolerance: THRESHOLD_TOLERANCE,
            detail: format!("b₁b₂ sign change at d = {} λ_T", t.distance_lambda),
        });
    }

    let m = mirror(ctx, policy, a, 30.0)?;
    let rel = (m.bracket_ratio - m.expected_ratio).abs() / m.expected_ratio;
    checks.push(CheckSummary {
        name: "mirror-repulsion",
        passed: m.anti_reciprocal_J > 0.0 && m.anti_reciprocal_slope < 0.0 && rel <= MIRROR_TOLERANCE,
        measured: m.bracket_ratio,
        target: m.expected_ratio,
        tolerance: MIRROR_TOLERANCE,
        detail: format!(
            "F⁻⁻ = {:e} J, ∂F⁻⁻/∂d = {:e} J/λ_T at d = 30 λ_T",
            m.anti_reciprocal_J, m.anti_reciprocal_slope
        ),
    });
    Ok(ValidationReport { checks, rows })
}
