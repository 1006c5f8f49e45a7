//! Numerical toolkit for attracting heteroclinic cycles between two hyperbolic
//! periodic orbits.
//!
//! The crate has two halves that validate each other:
//!
//! * an **exact piecewise model** of the dynamics near the cycle — linear flow
//!   inside an isolating block around each orbit, linear transitions between
//!   blocks, and the hitting-time sequences they generate ([`piecewise`]) —
//!   together with the closed-form conjugacy invariants ([`model`]), their
//!   extraction from hitting-time data ([`estimator`]), and the construction
//!   of the point map conjugating two systems with equal invariants
//!   ([`conjugacy`]);
//! * a **smooth realization** ([`ode`]): a planar conservative system with a
//!   saddle loop, its dissipative perturbation, and the three-dimensional
//!   vector field obtained by lifting it by rotation, whose two periodic
//!   orbits form an attracting cycle. Section-crossing records extracted from
//!   the smooth flow feed the same estimators as the piecewise model.

pub mod conjugacy;
pub mod estimator;
pub mod model;
pub mod ode;
pub mod piecewise;
