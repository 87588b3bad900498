//! Three particles at leading order: the three pairwise one-reflection
//! energies plus the cubic term
//!
//! ```text
//! ΔF = −k_BT Σ′ ξ³ [Tr(P₃₁α₁P₁₂α₂P₂₃α₃) + Tr(P₂₁α₁P₁₃α₃P₃₂α₂)]
//! ```
//!
//! Each of the two traces is invariant under cyclic relabeling and the two
//! are exchanged by a transposition, so the sum is a single scalar potential
//! whose gradients give all three forces.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::em::{cross_matrix, propagator, propagator_gradient, ThermalContext};
use crate::error::{Error, Result};
use crate::interaction::{free_energy_one_reflection, ParticleSpec, DIPOLE_COUPLING, FORCE_STEP};
use crate::matsubara::{matsubara_sum, Convergence, MatsubaraPolicy};

/// Unordered pairs, in a fixed order.
const PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    particles: [ParticleSpec; 3],
    ctx: ThermalContext,
    policy: MatsubaraPolicy,
}

impl Scene {
    pub fn new(particles: &[ParticleSpec], ctx: ThermalContext, policy: MatsubaraPolicy) -> Result<Self> {
        let particles: [ParticleSpec; 3] = particles.try_into().map_err(|_| Error::ParticleCount {
            expected: 3,
            got: particles.len(),
        })?;
        for (i, j) in PAIRS {
            let separation = (particles[i].position - particles[j].position).norm();
            if separation == 0.0 {
                return Err(Error::SingularGeometry);
            }
            if separation < ctx.min_separation() {
                return Err(Error::TooClose {
                    separation,
                    minimum: ctx.min_separation(),
                });
            }
        }
        Ok(Self { particles, ctx, policy })
    }

    pub fn particles(&self) -> &[ParticleSpec; 3] {
        &self.particles
    }

    pub fn ctx(&self) -> &ThermalContext {
        &self.ctx
    }

    pub fn policy(&self) -> &MatsubaraPolicy {
        &self.policy
    }

    /// Relabel: particle `i` of the result is particle `order[i]` of `self`.
    pub fn permuted(&self, order: [usize; 3]) -> Self {
        Self {
            particles: order.map(|i| self.particles[i]),
            ..self.clone()
        }
    }

    fn with_particles(&self, particles: [ParticleSpec; 3]) -> Self {
        Self {
            particles,
            ..self.clone()
        }
    }

    fn pinned(&self, terms: u64) -> Self {
        Self {
            policy: self.policy.pinned(terms),
            ..self.clone()
        }
    }

    /// Smallest separation, in units of λ_T.
    fn min_distance(&self) -> f64 {
        PAIRS
            .iter()
            .map(|&(i, j)| (self.particles[i].position - self.particles[j].position).norm())
            .fold(f64::INFINITY, f64::min)
            / self.ctx.thermal_length()
    }

    fn centroid(&self) -> Vector3<f64> {
        self.particles.iter().map(|p| p.position).sum::<Vector3<f64>>() / 3.0
    }

    /// Reduced polarizabilities at index `n`.
    fn alphas(&self, n: u64) -> Result<[Matrix3<f64>; 3]> {
        let xi = self.ctx.matsubara_xi(n);
        let v = self.ctx.thermal_length().powi(3);
        let mut out = [Matrix3::zeros(); 3];
        for (o, p) in out.iter_mut().zip(&self.particles) {
            *o = p.material.polarizability(xi)?.value / v;
        }
        Ok(out)
    }

    /// `(O_i − O_j)/λ_T` for each entry of [`PAIRS`].
    fn separations(&self) -> [Vector3<f64>; 3] {
        let lt = self.ctx.thermal_length();
        PAIRS.map(|(i, j)| (self.particles[i].position - self.particles[j].position) / lt)
    }

    /// Propagator table indexed by particle labels.
    fn propagators(&self, u: f64) -> Result<[[Matrix3<f64>; 3]; 3]> {
        let dx = self.separations();
        let mut p = [[Matrix3::zeros(); 3]; 3];
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            let m = propagator(u, &dx[k])?;
            p[i][j] = m;
            p[j][i] = m;
        }
        Ok(p)
    }

    fn sum<const K: usize, F>(&self, term: F) -> Result<crate::matsubara::MatsubaraSum<K>>
    where
        F: Fn(u64) -> Result<[f64; K]> + Sync,
    {
        let kt = self.ctx.thermal_energy();
        matsubara_sum::<K, _>(&self.policy, self.policy.abs_tol / kt, 2.0 * PI, self.min_distance(), term)
    }
}

/// `Tr(α_i P_ij α_j P_jk α_k P_ki)`.
fn loop_trace(a: &[Matrix3<f64>; 3], p: &[[Matrix3<f64>; 3]; 3], i: usize, j: usize, k: usize) -> f64 {
    (a[i] * p[i][j] * a[j] * p[j][k] * a[k] * p[k][i]).trace()
}

/// Both orientation classes, evaluated from every starting particle and
/// summed in sorted order so that any relabeling reproduces the same bits.
fn cubic_trace(a: &[Matrix3<f64>; 3], p: &[[Matrix3<f64>; 3]; 3]) -> f64 {
    let mut t = [
        loop_trace(a, p, 0, 1, 2),
        loop_trace(a, p, 1, 2, 0),
        loop_trace(a, p, 2, 0, 1),
        loop_trace(a, p, 0, 2, 1),
        loop_trace(a, p, 2, 1, 0),
        loop_trace(a, p, 1, 0, 2),
    ];
    t.sort_by(f64::total_cmp);
    t.iter().sum::<f64>() / 3.0
}

fn sorted_sum(mut v: [f64; 3]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[0] + v[1] + v[2]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeBodyEnergy {
    /// Total free energy (J).
    pub total: f64,
    /// Pair energies for the pairs (1,2), (2,3), (3,1) (J).
    pub pairwise: [f64; 3],
    /// Cubic correction (J).
    pub correction: f64,
    pub convergence: Convergence,
}

/// The cubic three-body term `ΔF` (J).
pub fn three_body_correction(scene: &Scene) -> Result<(f64, Convergence)> {
    let c3 = DIPOLE_COUPLING.powi(3);
    let sum = scene.sum::<1, _>(|n| {
        let a = scene.alphas(n)?;
        let p = scene.propagators(2.0 * PI * n as f64)?;
        Ok([c3 * cubic_trace(&a, &p)])
    })?;
    Ok((-scene.ctx.thermal_energy() * sum.values[0], sum.convergence))
}

/// Pairwise one-reflection energies plus [`three_body_correction`].
pub fn total_free_energy_3(scene: &Scene) -> Result<ThreeBodyEnergy> {
    let [a, b, c] = &scene.particles;
    let pairwise = [
        free_energy_one_reflection(a, b, &scene.ctx, &scene.policy)?.free_energy,
        free_energy_one_reflection(b, c, &scene.ctx, &scene.policy)?.free_energy,
        free_energy_one_reflection(c, a, &scene.ctx, &scene.policy)?.free_energy,
    ];
    let (correction, convergence) = three_body_correction(scene)?;
    Ok(ThreeBodyEnergy {
        total: sorted_sum(pairwise) + correction,
        pairwise,
        correction,
        convergence,
    })
}

/// Energy of the expansion seen from object `i`:
/// `F_ij + F_ik + F_jk − k_BT Σ′ ξ³ Tr{P α_i P (α_j P α_k + α_k P α_j)}`
/// with `(i, j, k)` cyclic. Its gradient with respect to `O_i` is the force
/// on `i`.
pub fn object_expansion_energy(scene: &Scene, i: usize) -> Result<f64> {
    if i > 2 {
        return Err(Error::InvalidParameter {
            name: "object index",
            value: i as f64,
            reason: "must be 0, 1 or 2",
        });
    }
    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
    let ps = &scene.particles;
    let (ctx, policy) = (&scene.ctx, &scene.policy);
    let pairs = free_energy_one_reflection(&ps[i], &ps[j], ctx, policy)?.free_energy
        + free_energy_one_reflection(&ps[i], &ps[k], ctx, policy)?.free_energy
        + free_energy_one_reflection(&ps[j], &ps[k], ctx, policy)?.free_energy;
    let c3 = DIPOLE_COUPLING.powi(3);
    let sum = scene.sum::<1, _>(|n| {
        let a = scene.alphas(n)?;
        let p = scene.propagators(2.0 * PI * n as f64)?;
        let jk = p[i][j] * a[j] * p[j][k] * a[k] * p[k][i];
        let kj = p[i][k] * a[k] * p[k][j] * a[j] * p[j][i];
        Ok([c3 * (a[i] * (jk + kj)).trace()])
    })?;
    Ok(pairs - ctx.thermal_energy() * sum.values[0])
}

/// Forces on the three particles (N), `−∇_{O_i}` of the total energy,
/// summed analytically term by term. Each pair gradient enters with
/// opposite signs on its two ends, so the forces sum to zero up to rounding.
pub fn forces_3(scene: &Scene) -> Result<[Vector3<f64>; 3]> {
    let c2 = DIPOLE_COUPLING * DIPOLE_COUPLING;
    let c3 = DIPOLE_COUPLING.powi(3);
    let dx = scene.separations();
    // Component 0: energy integrand; then ∂/∂(O_i − O_j) for each pair.
    let sum = scene.sum::<10, _>(|n| {
        let u = 2.0 * PI * n as f64;
        let a = scene.alphas(n)?;
        let p = scene.propagators(u)?;
        let mut out = [0.0; 10];
        let pair_traces = PAIRS.map(|(i, j)| (p[i][j] * a[j] * p[j][i] * a[i]).trace());
        out[0] = -c2 * pair_traces.iter().sum::<f64>() - c3 * cubic_trace(&a, &p);
        for (q, &(i, j)) in PAIRS.iter().enumerate() {
            let k = 3 - i - j;
            let g = propagator_gradient(u, &dx[q])?;
            let pij = p[i][j];
            for c in 0..3 {
                let d = g[c];
                let pair = (d * a[j] * pij * a[i]).trace() + (pij * a[j] * d * a[i]).trace();
                // P_ij appears once in each orientation class.
                let cubic = (a[i] * d * a[j] * p[j][k] * a[k] * p[k][i]).trace()
                    + (a[j] * d * a[i] * p[i][k] * a[k] * p[k][j]).trace();
                out[1 + 3 * q + c] = -c2 * pair - c3 * cubic;
            }
        }
        Ok(out)
    })?;
    let scale = scene.ctx.thermal_energy() / scene.ctx.thermal_length();
    let g = |q: usize| Vector3::new(sum.values[1 + 3 * q], sum.values[2 + 3 * q], sum.values[3 + 3 * q]) * scale;
    let mut grad = [Vector3::zeros(); 3];
    for (q, &(i, j)) in PAIRS.iter().enumerate() {
        let gq = g(q);
        grad[i] += gq;
        grad[j] -= gq;
    }
    Ok(grad.map(|v| -v))
}

/// Force on object `i` by Richardson differences of
/// [`object_expansion_energy`] with respect to `O_i`.
pub fn expansion_force(scene: &Scene, i: usize) -> Result<Vector3<f64>> {
    let terms = three_body_correction(scene)?.1.terms;
    let pinned = scene.pinned(terms.max(pair_terms(scene)?));
    let h = FORCE_STEP * scene.min_distance() * scene.ctx.thermal_length();
    let f = |delta: Vector3<f64>| {
        let mut ps = scene.particles;
        ps[i] = ps[i].displaced(delta);
        object_expansion_energy(&pinned.with_particles(ps), i)
    };
    let mut out = Vector3::zeros();
    for c in 0..3 {
        let mut e = Vector3::zeros();
        e[c] = 1.0;
        let d = |s: f64| -> Result<f64> { Ok((f(e * s)? - f(-e * s)?) / (2.0 * s)) };
        out[c] = -(4.0 * d(0.5 * h)? - d(h)?) / 3.0;
    }
    Ok(out)
}

fn pair_terms(scene: &Scene) -> Result<u64> {
    let ps = &scene.particles;
    let mut terms = 0;
    for (i, j) in PAIRS {
        terms = terms.max(free_energy_one_reflection(&ps[i], &ps[j], &scene.ctx, &scene.policy)?.convergence.terms);
    }
    Ok(terms)
}

/// `Σ_i (O_i − O_c) × F_i` about the centroid (N·m).
pub fn orbital_torque(scene: &Scene, forces: &[Vector3<f64>; 3]) -> Vector3<f64> {
    let c = scene.centroid();
    scene
        .particles
        .iter()
        .zip(forces)
        .map(|(p, f)| (p.position - c).cross(f))
        .sum()
}

/// Torques on the field axes (N·m): `−∂F/∂θ` for a rotation of particle
/// `i`'s axis about each Cartesian direction. A rotation `R` maps `α` to
/// `RαRᵀ` and every term of the energy is linear in each `α_i`, so the
/// derivative is the energy with `α_i` replaced by `[Ω, α_i]` and the terms
/// without `α_i` dropped. Rotation invariance of the energy makes
/// `orbital_torque + Σ_i axis_torques_3[i] = 0`.
pub fn axis_torques_3(scene: &Scene) -> Result<[Vector3<f64>; 3]> {
    let c2 = DIPOLE_COUPLING * DIPOLE_COUPLING;
    let c3 = DIPOLE_COUPLING.powi(3);
    let sum = scene.sum::<9, _>(|n| {
        let a = scene.alphas(n)?;
        let p = scene.propagators(2.0 * PI * n as f64)?;
        let mut out = [0.0; 9];
        for i in 0..3 {
            for c in 0..3 {
                let w = cross_matrix(&Vector3::ith(c, 1.0));
                let mut da = a;
                da[i] = w * a[i] - a[i] * w;
                let pair: f64 = (0..3)
                    .filter(|&j| j != i)
                    .map(|j| (p[i][j] * a[j] * p[j][i] * da[i]).trace())
                    .sum();
                out[3 * i + c] = -c2 * pair - c3 * cubic_trace(&da, &p);
            }
        }
        Ok(out)
    })?;
    let kt = scene.ctx.thermal_energy();
    Ok([0, 1, 2].map(|i| -Vector3::new(sum.values[3 * i], sum.values[3 * i + 1], sum.values[3 * i + 2]) * kt))
}
