//! Cross-checks against a brute-force block-matrix assembly that shares no
//! code with the library.

use approx::assert_relative_eq;
use nalgebra::{DMatrix, Matrix3, Vector3};
use nrcasimir::manybody::{three_body_correction, total_free_energy_3, Scene};
use nrcasimir::{
    free_energy_exact_dipole, free_energy_one_reflection, Material, MatsubaraPolicy, ParticleSpec, ThermalContext,
    ToyPolarizability,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const HBAR: f64 = 1.054_571_817e-34;
const C: f64 = 299_792_458.0;
const KB: f64 = 1.380_649e-23;

/// κ²G written out directly in SI; static limit at κ = 0.
fn k2g(kappa: f64, r: &Vector3<f64>) -> Matrix3<f64> {
    let d = r.norm();
    let rr = r * r.transpose() / (d * d);
    let id = Matrix3::identity();
    if kappa == 0.0 {
        return (id - rr * 3.0) / (4.0 * PI * d.powi(3));
    }
    let x = kappa * d;
    let pre = kappa * kappa * (-x).exp() / (4.0 * PI * d);
    (id * (1.0 + 1.0 / x + 1.0 / (x * x)) - rr * (1.0 + 3.0 / x + 3.0 / (x * x))) * pre
}

/// Block matrix `M_ij = −κ²G(O_i − O_j) α_j` for all particles.
fn block(n: u64, t: f64, ps: &[ParticleSpec]) -> DMatrix<f64> {
    let kappa = 2.0 * PI * n as f64 * KB * t / (HBAR * C);
    let xi = kappa * C;
    let m = ps.len();
    let mut out = DMatrix::zeros(3 * m, 3 * m);
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let alpha = ps[j].material.polarizability(xi).unwrap().value;
            let b = -k2g(kappa, &(ps[i].position - ps[j].position)) * alpha;
            out.view_mut((3 * i, 3 * j), (3, 3)).copy_from(&b);
        }
    }
    out
}

/// `k_BT Σ′ f(M_n)` summed far past convergence.
fn brute<F: Fn(&DMatrix<f64>) -> f64>(t: f64, ps: &[ParticleSpec], terms: u64, f: F) -> f64 {
    let mut s = 0.0;
    for n in 0..terms {
        let w = if n == 0 { 0.5 } else { 1.0 };
        s += w * f(&block(n, t, ps));
    }
    KB * t * s
}

fn toy(alpha0_lt3: f64, b: f64, axis: Vector3<f64>, lt: f64) -> Material {
    Material::from(ToyPolarizability::new(alpha0_lt3 * lt.powi(3), b, axis.normalize()).unwrap())
}

#[test]
fn pair_energies_match_block_oracle() {
    let t = 300.0;
    let ctx = ThermalContext::new(t).unwrap();
    let lt = ctx.thermal_length();
    let policy = MatsubaraPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let axis = |rng: &mut ChaCha8Rng| Vector3::new(rng.random(), rng.random(), rng.random::<f64>() + 0.1);
        let m1 = toy(rng.random_range(1e-4..1e-2), rng.random_range(-2.0..2.0), axis(&mut rng), lt);
        let m2 = toy(rng.random_range(1e-4..1e-2), rng.random_range(-2.0..2.0), axis(&mut rng), lt);
        let d = rng.random_range(0.1..2.0);
        let dir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0).normalize();
        let ps = [ParticleSpec::new(Vector3::zeros(), m1), ParticleSpec::new(dir * d * lt, m2)];
        let terms = (60.0 / (2.0 * PI * d)).ceil() as u64 + 2;

        let one = brute(t, &ps, terms, |m| -(m * m).trace() / 2.0);
        let got = free_energy_one_reflection(&ps[0], &ps[1], &ctx, &policy).unwrap().free_energy;
        assert_relative_eq!(got, one, max_relative = 1e-10);

        let exact = brute(t, &ps, terms, |m| {
            let id = DMatrix::<f64>::identity(6, 6);
            (id - m).determinant().ln()
        });
        let got = free_energy_exact_dipole(&ps[0], &ps[1], &ctx, &policy).unwrap().free_energy;
        assert_relative_eq!(got, exact, max_relative = 1e-9);
    }
}

#[test]
fn static_toy_trace_in_closed_form() {
    // n = 0 term for two toy particles along x̂ with unit separation r̂:
    // Tr(SαSα)·16π²d⁶ = α₀²(6 + b₁b₂(4 − 6 r̂ₓ²))
    let t = 300.0;
    let lt = ThermalContext::new(t).unwrap().thermal_length();
    for (b1, b2, r) in [(1.0, 2.0, Vector3::x()), (0.5, -3.0, Vector3::new(0.6, 0.8, 0.0)), (2.0, 2.0, Vector3::z())] {
        let ps = [
            ParticleSpec::new(Vector3::zeros(), toy(1e-3, b1, Vector3::x(), lt)),
            ParticleSpec::new(r * 0.5 * lt, toy(1e-3, b2, Vector3::x(), lt)),
        ];
        let m = block(0, t, &ps);
        let trace = (&m * &m).trace() / 2.0;
        let d = 0.5 * lt;
        let a0 = 1e-3 * lt.powi(3);
        let expected = a0 * a0 * (6.0 + b1 * b2 * (4.0 - 6.0 * r.x * r.x)) / (16.0 * PI * PI * d.powi(6));
        assert_relative_eq!(trace, expected, max_relative = 1e-12);
        let rt = nrcasimir::interaction::round_trip(0, &ps[0], &ps[1], &ThermalContext::new(t).unwrap()).unwrap();
        assert_relative_eq!(rt.matrix.trace(), expected, max_relative = 1e-12);
    }
}

fn scene_from(t: f64, ps: &[ParticleSpec]) -> Scene {
    Scene::new(ps, ThermalContext::new(t).unwrap(), MatsubaraPolicy::default()).unwrap()
}

fn cubic_oracle(t: f64, ps: &[ParticleSpec], terms: u64) -> f64 {
    brute(t, ps, terms, |m| -(m * m * m).trace() / 3.0)
}

#[test]
fn collinear_reciprocal_correction_matches_block_oracle() {
    let t = 300.0;
    let lt = ThermalContext::new(t).unwrap().thermal_length();
    let m = toy(1e-3, 0.0, Vector3::x(), lt);
    let ps = [
        ParticleSpec::new(Vector3::zeros(), m),
        ParticleSpec::new(Vector3::x() * 0.2 * lt, m),
        ParticleSpec::new(Vector3::x() * 0.5 * lt, m),
    ];
    let got = three_body_correction(&scene_from(t, &ps)).unwrap().0;
    assert_relative_eq!(got, cubic_oracle(t, &ps, 400), max_relative = 1e-10);
}

#[test]
fn equilateral_total_matches_block_oracle() {
    let t = 300.0;
    let lt = ThermalContext::new(t).unwrap().thermal_length();
    let m = toy(2e-3, 0.0, Vector3::x(), lt);
    let s = 0.3 * lt;
    let ps = [
        ParticleSpec::new(Vector3::zeros(), m),
        ParticleSpec::new(Vector3::x() * s, m),
        ParticleSpec::new(Vector3::new(0.5, 3f64.sqrt() / 2.0, 0.0) * s, m),
    ];
    let e = total_free_energy_3(&scene_from(t, &ps)).unwrap();
    let oracle = brute(t, &ps, 200, |m| -((m * m).trace() / 2.0 + (m * m * m).trace() / 3.0));
    assert_relative_eq!(e.total, oracle, max_relative = 1e-10);
}

#[test]
fn nonreciprocal_triangles_match_block_oracle() {
    let t = 300.0;
    let lt = ThermalContext::new(t).unwrap().thermal_length();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let ps: Vec<_> = (0..3)
            .map(|_| {
                let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0);
                let pos = Vector3::new(rng.random_range(0.0..0.6), rng.random_range(0.0..0.6), rng.random_range(0.0..0.6));
                ParticleSpec::new(pos * lt, toy(rng.random_range(1e-4..5e-3), rng.random_range(-3.0..3.0), axis, lt))
            })
            .collect();
        let e = total_free_energy_3(&scene_from(t, &ps)).unwrap();
        let oracle = brute(t, &ps, 2000, |m| -((m * m).trace() / 2.0 + (m * m * m).trace() / 3.0));
        assert_relative_eq!(e.total, oracle, max_relative = 1e-9);
    }
}
