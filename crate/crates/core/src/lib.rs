//! Equilibrium Casimir free energies, forces and Laplacians between
//! non-reciprocal point dipoles, with a leading-order three-body term.

pub mod em;
pub mod error;
pub mod interaction;
pub mod manybody;
pub mod materials;
pub mod matsubara;

pub use em::ThermalContext;
pub use error::{Error, Result};
pub use interaction::{
    evaluate_pair, force, free_energy, free_energy_exact_dipole, free_energy_one_reflection, hessian, laplacian,
    Approximation, Decomposition, ForceMethod, LaplacianEstimate, PairResult, ParticleSpec,
};
pub use manybody::{forces_3, three_body_correction, total_free_energy_3, Scene, ThreeBodyEnergy};
pub use materials::{MagnetoOpticalModel, Material, ToyPolarizability};
pub use matsubara::{Convergence, MatsubaraPolicy};
