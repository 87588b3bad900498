use std::f64::consts::PI;

use nalgebra::{SymmetricEigen, Vector3};
use nrcasimir::manybody::{axis_torques_3, forces_3, orbital_torque, total_free_energy_3, Scene};
use nrcasimir::{
    force, free_energy, hessian, laplacian, Error as EngineError, ForceMethod, LaplacianEstimate, ParticleSpec,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{GridConfig, Plane, Resolved, RunConfig, ScanConfig};
use crate::validate::{self, ValidationReport};

pub type EngineResult<T> = Result<T, EngineError>;

fn arr(v: Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    /// Position of particle 2 relative to particle 1 (m).
    pub separation_m: [f64; 3],
    pub distance_lambda: f64,
    pub free_energy_J: f64,
    pub reciprocal_J: Option<f64>,
    pub anti_reciprocal_J: Option<f64>,
    pub cross_J: Option<f64>,
    pub second_order_bound_J: Option<f64>,
    pub matsubara_terms: u64,
}

pub fn energy(r: &Resolved) -> EngineResult<EnergyReport> {
    let (p1, p2) = (&r.particles[0], &r.particles[1]);
    let res = free_energy(p1, p2, &r.ctx, &r.policy, r.approximation)?;
    let sep = p2.position - p1.position;
    Ok(EnergyReport {
        separation_m: arr(sep),
        distance_lambda: sep.norm() / r.ctx.thermal_length(),
        free_energy_J: res.free_energy,
        reciprocal_J: res.decomposition.map(|d| d.reciprocal),
        anti_reciprocal_J: res.decomposition.map(|d| d.anti_reciprocal),
        cross_J: res.decomposition.map(|d| d.cross),
        second_order_bound_J: res.second_order_bound,
        matsubara_terms: res.convergence.terms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForceReport {
    pub free_energy_J: f64,
    pub force_1_N: [f64; 3],
    pub force_2_N: [f64; 3],
    /// Laplacian with respect to the position of particle 2 (J/m²).
    pub laplacian_2_J_m2: f64,
    pub laplacian_noisy: bool,
}

pub fn force_task(r: &Resolved) -> EngineResult<ForceReport> {
    let (p1, p2) = (&r.particles[0], &r.particles[1]);
    let f1 = force(p1, p2, &r.ctx, &r.policy, r.approximation, ForceMethod::CrossChecked)?;
    let f2 = force(p2, p1, &r.ctx, &r.policy, r.approximation, ForceMethod::CrossChecked)?;
    let lap = laplacian(p2, p1, &r.ctx, &r.policy, r.approximation)?;
    Ok(ForceReport {
        free_energy_J: free_energy(p1, p2, &r.ctx, &r.policy, r.approximation)?.free_energy,
        force_1_N: arr(f1),
        force_2_N: arr(f2),
        laplacian_2_J_m2: lap.value,
        laplacian_noisy: lap.noisy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Field {
    FreeEnergy,
    Laplacian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Minimum,
    Maximum,
    Saddle,
    /// An eigenvalue is zero within the relative tolerance.
    Degenerate,
}

/// Relative tolerance on Hessian eigenvalues for classification.
pub const EIGEN_TOLERANCE: f64 = 1e-6;

pub fn classify(eigenvalues: &[f64; 3]) -> Classification {
    let scale = eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let tol = EIGEN_TOLERANCE * scale;
    if scale == 0.0 || eigenvalues.iter().any(|e| e.abs() <= tol) {
        Classification::Degenerate
    } else if eigenvalues.iter().all(|&e| e > 0.0) {
        Classification::Minimum
    } else if eigenvalues.iter().all(|&e| e < 0.0) {
        Classification::Maximum
    } else {
        Classification::Saddle
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremum {
    /// Relative to the fixed particle, in units of λ_T.
    pub position_lambda: [f64; 3],
    pub free_energy_J: f64,
    /// |∇F| at the refined point (J/m).
    pub gradient_norm: f64,
    /// Ascending Hessian eigenvalues (J/m²).
    pub hessian_eigenvalues: [f64; 3],
    pub classification: Classification,
    /// Found by bisection of the radial force on the `u` axis.
    pub on_axis: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cut {
    pub axis: &'static str,
    pub coordinate_lambda: Vec<f64>,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapResult {
    pub field: Field,
    pub plane: Plane,
    pub u_lambda: Vec<f64>,
    pub v_lambda: Vec<f64>,
    pub offset_lambda: f64,
    /// Row-major over `v`, then `u`; NaN where the particles would overlap.
    pub values: Vec<f64>,
    pub extrema: Vec<Extremum>,
    pub cuts: [Cut; 2],
    pub positive_cells: usize,
    pub noisy_cells: usize,
}

impl MapResult {
    pub fn value(&self, iu: usize, iv: usize) -> f64 {
        self.values[iv * self.u_lambda.len() + iu]
    }

    /// Cartesian position (λ_T) of grid cell `(iu, iv)`.
    pub fn point(&self, iu: usize, iv: usize) -> [f64; 3] {
        plane_point(self.plane, self.u_lambda[iu], self.v_lambda[iv], self.offset_lambda)
    }

    /// Nearest grid cell to an in-plane point.
    pub fn nearest(&self, u: f64, v: f64) -> (usize, usize) {
        let near = |axis: &[f64], x: f64| {
            axis.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        (near(&self.u_lambda, u), near(&self.v_lambda, v))
    }
}

fn plane_point(plane: Plane, u: f64, v: f64, w: f64) -> [f64; 3] {
    let (iu, iv, iw) = plane.axes();
    let mut p = [0.0; 3];
    p[iu] = u;
    p[iv] = v;
    p[iw] = w;
    p
}

fn linspace(range: [f64; 2], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                range[1]
            } else {
                range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Fixed and moving particle for a map or scan.
pub fn roles(r: &Resolved, moving_particle: usize) -> (ParticleSpec, ParticleSpec) {
    let m = moving_particle - 1;
    (r.particles[1 - m], r.particles[m])
}

/// Moving particle placed at `rel` (λ_T) from the fixed one.
fn place(r: &Resolved, fixed: &ParticleSpec, moving: &ParticleSpec, rel: [f64; 3]) -> ParticleSpec {
    moving.moved_to(fixed.position + Vector3::from(rel) * r.ctx.thermal_length())
}

fn overlap(e: &EngineError) -> bool {
    matches!(e, EngineError::TooClose { .. } | EngineError::SingularGeometry)
}

/// Free energy of the moving particle at `rel` (λ_T), NaN inside the
/// exclusion radius.
pub fn energy_at(r: &Resolved, fixed: &ParticleSpec, moving: &ParticleSpec, rel: [f64; 3]) -> EngineResult<f64> {
    let m = place(r, fixed, moving, rel);
    match free_energy(fixed, &m, &r.ctx, &r.policy, r.approximation) {
        Ok(res) => Ok(res.free_energy),
        Err(e) if overlap(&e) => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

/// Laplacian with respect to the moving particle at `rel` (λ_T).
pub fn laplacian_at(
    r: &Resolved,
    fixed: &ParticleSpec,
    moving: &ParticleSpec,
    rel: [f64; 3],
) -> EngineResult<Option<LaplacianEstimate>> {
    let m = place(r, fixed, moving, rel);
    match laplacian(&m, fixed, &r.ctx, &r.policy, r.approximation) {
        Ok(l) => Ok(Some(l)),
        Err(e) if overlap(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

fn gradient_at(r: &Resolved, fixed: &ParticleSpec, m: &ParticleSpec) -> EngineResult<Vector3<f64>> {
    Ok(-force(m, fixed, &r.ctx, &r.policy, r.approximation, ForceMethod::Analytic)?)
}

fn describe(r: &Resolved, fixed: &ParticleSpec, m: &ParticleSpec, on_axis: bool) -> EngineResult<Extremum> {
    let lt = r.ctx.thermal_length();
    let h = hessian(m, fixed, &r.ctx, &r.policy, r.approximation)?;
    let mut eig: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let eig = [eig[0], eig[1], eig[2]];
    Ok(Extremum {
        position_lambda: arr((m.position - fixed.position) / lt),
        free_energy_J: free_energy(fixed, m, &r.ctx, &r.policy, r.approximation)?.free_energy,
        gradient_norm: gradient_at(r, fixed, m)?.norm(),
        hessian_eigenvalues: eig,
        classification: classify(&eig),
        on_axis,
    })
}

/// Newton iteration on ∇F = 0 from a grid candidate. Gives up if the
/// iterate leaves the box or does not settle.
fn refine(
    r: &Resolved,
    fixed: &ParticleSpec,
    start: &ParticleSpec,
    bounds: ([f64; 3], [f64; 3]),
    step_cap: f64,
) -> EngineResult<Option<ParticleSpec>> {
    let lt = r.ctx.thermal_length();
    let mut m = *start;
    for _ in 0..40 {
        let g = gradient_at(r, fixed, &m)?;
        let h = hessian(&m, fixed, &r.ctx, &r.policy, r.approximation)?;
        let Some(step) = h.try_inverse().map(|hi| -(hi * g)) else {
            return Ok(None);
        };
        let step = if step.norm() > step_cap { step * (step_cap / step.norm()) } else { step };
        m = m.displaced(step);
        let rel = (m.position - fixed.position) / lt;
        if (0..3).any(|i| rel[i] < bounds.0[i] - 1e-12 || rel[i] > bounds.1[i] + 1e-12) {
            return Ok(None);
        }
        if (m.position - fixed.position).norm() < r.ctx.min_separation() {
            return Ok(None);
        }
        if step.norm() < 1e-11 * lt {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// Stationary points of the radial force along the `u` axis, by bisection
/// between grid samples where `∂F/∂u` changes sign.
fn axis_stationary(
    r: &Resolved,
    fixed: &ParticleSpec,
    moving: &ParticleSpec,
    plane: Plane,
    u: &[f64],
    offset: f64,
) -> EngineResult<Vec<ParticleSpec>> {
    let (iu, _, _) = plane.axes();
    let slope = |x: f64| -> EngineResult<Option<f64>> {
        let m = place(r, fixed, moving, plane_point(plane, x, 0.0, offset));
        match gradient_at(r, fixed, &m) {
            Ok(g) => Ok(Some(g[iu])),
            Err(e) if overlap(&e) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let samples: Vec<Option<f64>> = u.par_iter().map(|&x| slope(x)).collect::<EngineResult<_>>()?;
    let mut out = Vec::new();
    for i in 1..u.len() {
        let (Some(a), Some(b)) = (samples[i - 1], samples[i]) else { continue };
        if a == 0.0 || a.signum() == b.signum() {
            continue;
        }
        let (mut lo, mut hi, mut flo) = (u[i - 1], u[i], a);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let Some(fm) = slope(mid)? else { break };
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        out.push(place(r, fixed, moving, plane_point(plane, 0.5 * (lo + hi), 0.0, offset)));
    }
    Ok(out)
}

fn cuts(
    r: &Resolved,
    fixed: &ParticleSpec,
    moving: &ParticleSpec,
    grid: &GridConfig,
    u: &[f64],
    v: &[f64],
    field: Field,
) -> EngineResult<[Cut; 2]> {
    let (lu, lv, _) = grid.plane.labels();
    let eval = |p: [f64; 3]| -> EngineResult<f64> {
        match field {
            Field::FreeEnergy => energy_at(r, fixed, moving, p),
            Field::Laplacian => Ok(laplacian_at(r, fixed, moving, p)?.map_or(f64::NAN, |l| l.value)),
        }
    };
    let along_u = u
        .par_iter()
        .map(|&x| eval(plane_point(grid.plane, x, 0.0, grid.offset_lambda)))
        .collect::<EngineResult<Vec<_>>>()?;
    let along_v = v
        .par_iter()
        .map(|&y| eval(plane_point(grid.plane, 0.0, y, grid.offset_lambda)))
        .collect::<EngineResult<Vec<_>>>()?;
    Ok([
        Cut {
            axis: lu,
            coordinate_lambda: u.to_vec(),
            value: along_u,
        },
        Cut {
            axis: lv,
            coordinate_lambda: v.to_vec(),
            value: along_v,
        },
    ])
}

/// Free-energy or Laplacian map over the configured grid.
pub fn map(cfg: &RunConfig, r: &Resolved, field: Field) -> EngineResult<MapResult> {
    let grid = cfg.grid.as_ref().expect("validated");
    let (fixed, moving) = roles(r, grid.moving_particle);
    let u = linspace(grid.u_range_lambda, grid.resolution[0]);
    let v = linspace(grid.v_range_lambda, grid.resolution[1]);
    let cells: Vec<(f64, f64)> = v.iter().flat_map(|&y| u.iter().map(move |&x| (x, y))).collect();
    let evaluated: Vec<(f64, bool)> = cells
        .par_iter()
        .map(|&(x, y)| {
            let p = plane_point(grid.plane, x, y, grid.offset_lambda);
            match field {
                Field::FreeEnergy => energy_at(r, &fixed, &moving, p).map(|e| (e, false)),
                Field::Laplacian => Ok(laplacian_at(r, &fixed, &moving, p)?.map_or((f64::NAN, false), |l| (l.value, l.noisy))),
            }
        })
        .collect::<EngineResult<_>>()?;
    let values: Vec<f64> = evaluated.iter().map(|e| e.0).collect();
    let noisy_cells = evaluated.iter().filter(|e| e.1).count();
    let positive_cells = values.iter().filter(|&&x| x > 0.0).count();
    if noisy_cells > 0 {
        log::warn!("{noisy_cells} Laplacian cells disagree between step sizes by more than 1 %");
    }

    let mut result = MapResult {
        field,
        plane: grid.plane,
        u_lambda: u.clone(),
        v_lambda: v.clone(),
        offset_lambda: grid.offset_lambda,
        values,
        extrema: Vec::new(),
        cuts: cuts(r, &fixed, &moving, grid, &u, &v, field)?,
        positive_cells,
        noisy_cells,
    };
    if field == Field::FreeEnergy {
        result.extrema = extrema(r, &fixed, &moving, grid, &result)?;
    }
    Ok(result)
}

fn extrema(
    r: &Resolved,
    fixed: &ParticleSpec,
    moving: &ParticleSpec,
    grid: &GridConfig,
    map: &MapResult,
) -> EngineResult<Vec<Extremum>> {
    let (nu, nv) = (map.u_lambda.len(), map.v_lambda.len());
    let lt = r.ctx.thermal_length();
    let du = map.u_lambda[1] - map.u_lambda[0];
    let dv = map.v_lambda[1] - map.v_lambda[0];
    // Discrete |∇F|² on interior cells.
    let grad = |iu: usize, iv: usize| -> f64 {
        let gu = (map.value(iu + 1, iv) - map.value(iu - 1, iv)) / (2.0 * du);
        let gv = (map.value(iu, iv + 1) - map.value(iu, iv - 1)) / (2.0 * dv);
        gu * gu + gv * gv
    };
    let mut g = vec![f64::NAN; nu * nv];
    for iv in 1..nv.saturating_sub(1) {
        for iu in 1..nu.saturating_sub(1) {
            g[iv * nu + iu] = grad(iu, iv);
        }
    }
    let mut candidates = Vec::new();
    for iv in 2..nv.saturating_sub(2) {
        for iu in 2..nu.saturating_sub(2) {
            let c = g[iv * nu + iu];
            if !c.is_finite() {
                continue;
            }
            let neighbours = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
            let is_min = neighbours.iter().all(|&(a, b)| {
                let n = g[(iv as isize + b) as usize * nu + (iu as isize + a) as usize];
                n.is_finite() && c < n
            });
            if is_min {
                candidates.push(map.point(iu, iv));
            }
        }
    }

    let (iu_axis, iv_axis, _) = grid.plane.axes();
    let mut lo = [f64::NEG_INFINITY; 3];
    let mut hi = [f64::INFINITY; 3];
    lo[iu_axis] = grid.u_range_lambda[0];
    hi[iu_axis] = grid.u_range_lambda[1];
    lo[iv_axis] = grid.v_range_lambda[0];
    hi[iv_axis] = grid.v_range_lambda[1];
    let step_cap = 2.0 * du.max(dv) * lt;

    let refined: Vec<Option<ParticleSpec>> = candidates
        .par_iter()
        .map(|&p| refine(r, fixed, &place(r, fixed, moving, p), (lo, hi), step_cap))
        .collect::<EngineResult<_>>()?;
    let mut found: Vec<Extremum> = Vec::new();
    let mut push = |e: Extremum| {
        let near = found.iter().any(|f| {
            let d: f64 = (0..3).map(|i| (f.position_lambda[i] - e.position_lambda[i]).powi(2)).sum();
            d.sqrt() < 1e-6
        });
        if !near {
            found.push(e);
        }
    };
    for m in refined.into_iter().flatten() {
        push(describe(r, fixed, &m, false)?);
    }
    for m in axis_stationary(r, fixed, moving, grid.plane, &map.u_lambda, grid.offset_lambda)? {
        push(describe(r, fixed, &m, true)?);
    }
    found.sort_by(|a, b| {
        a.position_lambda
            .iter()
            .zip(&b.position_lambda)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(found)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleExtremum {
    pub phi: f64,
    pub free_energy_J: f64,
    pub kind: Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub radius_lambda: f64,
    pub z_lambda: f64,
    pub phi: Vec<f64>,
    pub free_energy_J: Vec<f64>,
    pub extrema: Vec<AngleExtremum>,
}

/// Relative variation of `F(φ)` below which neighbouring samples count as equal.
pub const SCAN_FLATNESS: f64 = 1e-10;

/// `F(φ)` on the circle `(R cos φ, R sin φ, z)` around the fixed particle.
pub fn scan_angle(cfg: &RunConfig, r: &Resolved) -> EngineResult<ScanResult> {
    let scan: &ScanConfig = cfg.scan.as_ref().expect("validated");
    let (fixed, moving) = roles(r, scan.moving_particle);
    let n = scan.samples;
    let phi: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
    let f: Vec<f64> = phi
        .par_iter()
        .map(|&p| {
            let rel = [scan.radius_lambda * p.cos(), scan.radius_lambda * p.sin(), scan.z_lambda];
            energy_at(r, &fixed, &moving, rel)
        })
        .collect::<EngineResult<_>>()?;
    // Differences below this are rounding, not structure.
    let tol = SCAN_FLATNESS * f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut extrema = Vec::new();
    for i in 0..n {
        let (a, b, c) = (f[(i + n - 1) % n], f[i], f[(i + 1) % n]);
        let kind = if b > a + tol && b > c + tol {
            Classification::Maximum
        } else if b < a - tol && b < c - tol {
            Classification::Minimum
        } else {
            continue;
        };
        extrema.push(AngleExtremum {
            phi: phi[i],
            free_energy_J: b,
            kind,
        });
    }
    Ok(ScanResult {
        radius_lambda: scan.radius_lambda,
        z_lambda: scan.z_lambda,
        phi,
        free_energy_J: f,
        extrema,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreeBodyReport {
    pub total_J: f64,
    /// Pairs (1,2), (2,3), (3,1).
    pub pairwise_J: [f64; 3],
    pub correction_J: f64,
    pub forces_N: [[f64; 3]; 3],
    pub net_force_N: [f64; 3],
    /// `Σ (O_i − O_c) × F_i` about the centroid.
    pub orbital_torque_N_m: [f64; 3],
    /// Torques on the field axes of each particle.
    pub axis_torques_N_m: [[f64; 3]; 3],
    /// Orbital plus axis torques.
    pub net_torque_N_m: [f64; 3],
    pub matsubara_terms: u64,
}

pub fn three_body(r: &Resolved) -> EngineResult<ThreeBodyReport> {
    let scene = Scene::new(&r.particles, r.ctx, r.policy.clone())?;
    let e = total_free_energy_3(&scene)?;
    let f = forces_3(&scene)?;
    let orbital = orbital_torque(&scene, &f);
    let axes = axis_torques_3(&scene)?;
    let net_axes: Vector3<f64> = axes.iter().sum();
    Ok(ThreeBodyReport {
        total_J: e.total,
        pairwise_J: e.pairwise,
        correction_J: e.correction,
        forces_N: f.map(arr),
        net_force_N: arr(f.iter().sum()),
        orbital_torque_N_m: arr(orbital),
        axis_torques_N_m: axes.map(arr),
        net_torque_N_m: arr(orbital + net_axes),
        matsubara_terms: e.convergence.terms,
    })
}

pub fn validate_asymptotics(cfg: &RunConfig, r: &Resolved) -> EngineResult<ValidationReport> {
    validate::run_all(&r.ctx, &r.policy, cfg.validate.alpha0_lambda3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_follows_eigenvalue_signs() {
        assert_eq!(classify(&[1.0, 2.0, 3.0]), Classification::Minimum);
        assert_eq!(classify(&[-3.0, -2.0, -1.0]), Classification::Maximum);
        assert_eq!(classify(&[-1.0, 2.0, 3.0]), Classification::Saddle);
        assert_eq!(classify(&[1e-9, 2.0, 3.0]), Classification::Degenerate);
    }

    #[test]
    fn linspace_hits_both_ends_and_zero() {
        let g = linspace([-1.0, 1.0], 201);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[100], 0.0);
        assert_eq!(g[200], 1.0);
    }
}
