use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("zero separation between point dipoles")]
    SingularGeometry,

    #[error("separation {separation:.6e} m is below the minimum {minimum:.6e} m")]
    TooClose { separation: f64, minimum: f64 },

    #[error("free dyadic Green's function diverges at zero wavenumber; use the static tensor")]
    ZeroWavenumber,

    #[error("axis has norm {norm}, expected a unit vector")]
    InvalidAxis { norm: f64 },

    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{what} requires ξ > 0, got ξ = {xi}")]
    Domain { what: &'static str, xi: f64 },

    #[error("ε + 2I is singular{}", match .xi { Some(x) => format!(" at ξ = {x:e} rad/s"), None => String::new() })]
    Resonance { xi: Option<f64> },

    #[error(
        "Matsubara sum not converged after {terms} terms (partial sum {partial_sum:e}, tail estimate {tail:e})"
    )]
    NoConvergence {
        terms: u64,
        partial_sum: f64,
        tail: f64,
    },

    #[error("round trip at n = {n} has spectral radius {spectral_radius} ≥ 1; dipole model invalid at this distance")]
    StrongCoupling { n: u64, spectral_radius: f64 },

    #[error("analytic and finite-difference gradients disagree: relative difference {relative:e}")]
    NumericalConsistency { relative: f64 },

    #[error("expected {expected} particles, got {got}")]
    ParticleCount { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
