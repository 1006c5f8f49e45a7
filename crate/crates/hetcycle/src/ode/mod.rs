//! The smooth example family and the numerical machinery to study it:
//! vector fields ([`rhs`]), adaptive integration with section events
//! ([`integrate`]), Floquet data of the lifted periodic orbits ([`floquet`]),
//! and hitting-time records extracted from the lifted flow ([`bowen`]).

pub mod bowen;
pub mod floquet;
pub mod integrate;
pub mod rhs;

pub use bowen::{bowen_hitting_record, default_start, lifted_sections, BowenConfig};
pub use floquet::{floquet_estimate, FloquetEstimate, OrbitId};
pub use integrate::{
    integrate, ControlParams, CrossingDirection, Failure, SectionEvent, SectionSpec, Trajectory,
};
pub use rhs::{
    first_integral, lift_state, lifted_divergence, lifted_jacobian, project_state, rhs,
    vector_field, Variant,
};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum OdeError {
    #[error("state dimension mismatch: variant expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("monodromy matrix is not finite")]
    MonodromyNonFinite,
    #[error("integration failed: {0}")]
    IntegrationFailed(String),
    #[error("not enough section crossings: needed {needed}, got {got}")]
    InsufficientEvents { needed: usize, got: usize },
    #[error("trajectory left the configured basin window at t = {t}")]
    LeftBasin { t: f64 },
    #[error("unexpected section crossing (section {section}) at t = {t}; sections misconfigured or trajectory outside the cycle regime")]
    UnexpectedCrossing { t: f64, section: u32 },
}
