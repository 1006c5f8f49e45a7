//! The example family of vector fields: a planar conservative system with a
//! saddle loop, its dissipative perturbation, the half-plane reduction used
//! for lifting, and the lift by rotation to three dimensions.
//!
//! The planar system is `x' = -y, y' = x - x^3`, with first integral
//! `v(x,y) = (x^2/2)(1 - x^2/2) + y^2/2`; its saddles `(±1, 0)` sit on the
//! level `v = 1/4` and are joined by two separatrix connections bounding a
//! disk of closed orbits. The perturbation adds the damping term
//! `-eps_pert * y * (v - 1/4)`, which pushes `v` toward `1/4` from inside,
//! making the saddle loop attracting. Writing `y + 1 = r^2` and multiplying
//! by `2 r^2` gives the half-plane form, whose lift by rotation (append
//! `theta' = omega`, use Cartesian `(x, r1, r2)`) has two hyperbolic
//! periodic orbits of radius 1 in the planes `x = ±1` joined by
//! two-dimensional connections.

use super::OdeError;

/// Which member of the family to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `x' = -y, y' = x - x^3` (dimension 2).
    Conservative,
    /// Conservative plus the damping term `-eps_pert*y*(v - 1/4)` (dimension 2).
    Perturbed,
    /// The `(x, r)` half-plane form after the `2 r^2` time rescale (dimension 2).
    HalfPlane,
    /// The rotation lift in Cartesian `(x, r1, r2)` (dimension 3).
    Lifted,
}

impl Variant {
    pub fn dim(&self) -> usize {
        match self {
            Variant::Conservative | Variant::Perturbed | Variant::HalfPlane => 2,
            Variant::Lifted => 3,
        }
    }

    pub fn state_headers(&self) -> &'static [&'static str] {
        match self {
            Variant::Conservative | Variant::Perturbed => &["x", "y"],
            Variant::HalfPlane => &["x", "r"],
            Variant::Lifted => &["x", "r1", "r2"],
        }
    }
}

/// First integral of the conservative system, `v = (x^2/2)(1-x^2/2) + y^2/2`.
pub fn first_integral(x: f64, y: f64) -> f64 {
    0.5 * x * x * (1.0 - 0.5 * x * x) + 0.5 * y * y
}

// damping bracket in the (x, u = r^2) variables: v - 1/4 with y = u - 1
fn w_bracket(x: f64, u: f64) -> f64 {
    let x2 = x * x;
    0.5 * x2 - 0.25 * x2 * x2 + 0.5 * (u - 1.0) * (u - 1.0) - 0.25
}

fn g_term(x: f64, u: f64, eps_pert: f64) -> f64 {
    x - x * x * x - eps_pert * (u - 1.0) * w_bracket(x, u)
}

/// Evaluate the selected vector field. `state` and `out` must both have the
/// variant's dimension.
pub fn rhs(
    variant: Variant,
    state: &[f64],
    eps_pert: f64,
    omega: f64,
    out: &mut [f64],
) -> Result<(), OdeError> {
    if state.len() != variant.dim() || out.len() != variant.dim() {
        return Err(OdeError::DimensionMismatch {
            expected: variant.dim(),
            got: state.len().min(out.len()),
        });
    }
    match variant {
        Variant::Conservative => {
            let (x, y) = (state[0], state[1]);
            out[0] = -y;
            out[1] = x - x * x * x;
        }
        Variant::Perturbed => {
            let (x, y) = (state[0], state[1]);
            out[0] = -y;
            out[1] = x - x * x * x - eps_pert * y * (first_integral(x, y) - 0.25);
        }
        Variant::HalfPlane => {
            let (x, r) = (state[0], state[1]);
            let u = r * r;
            out[0] = 2.0 * u * (1.0 - u);
            out[1] = r * g_term(x, u, eps_pert);
        }
        Variant::Lifted => {
            let (x, r1, r2) = (state[0], state[1], state[2]);
            let u = r1 * r1 + r2 * r2;
            let g = g_term(x, u, eps_pert);
            out[0] = 2.0 * (1.0 - u) * u;
            out[1] = r1 * g - omega * r2;
            out[2] = r2 * g + omega * r1;
        }
    }
    Ok(())
}

/// The variant as a time-autonomous closure suitable for
/// [`super::integrate::integrate`]. Dimensions are the caller's contract.
pub fn vector_field(
    variant: Variant,
    eps_pert: f64,
    omega: f64,
) -> impl Fn(f64, &[f64], &mut [f64]) {
    move |_t, y, dy| {
        rhs(variant, y, eps_pert, omega, dy).expect("dimension fixed by caller");
    }
}

/// Analytic Jacobian of the lifted field at a state.
pub fn lifted_jacobian(state: &[f64], eps_pert: f64, omega: f64) -> [[f64; 3]; 3] {
    let (x, r1, r2) = (state[0], state[1], state[2]);
    let u = r1 * r1 + r2 * r2;
    let g = g_term(x, u, eps_pert);
    // dW/dx = x - x^3, dW/du = u - 1
    let g_x = 1.0 - 3.0 * x * x - eps_pert * (u - 1.0) * (x - x * x * x);
    let g_u = -eps_pert * (w_bracket(x, u) + (u - 1.0) * (u - 1.0));
    let fx_u = 2.0 - 4.0 * u; // d/du of 2u(1-u)
    [
        [0.0, fx_u * 2.0 * r1, fx_u * 2.0 * r2],
        [r1 * g_x, g + 2.0 * r1 * r1 * g_u, 2.0 * r1 * r2 * g_u - omega],
        [r2 * g_x, 2.0 * r1 * r2 * g_u + omega, g + 2.0 * r2 * r2 * g_u],
    ]
}

/// Trace of the lifted Jacobian (divergence), used for the log-determinant
/// of monodromy matrices.
pub fn lifted_divergence(state: &[f64], eps_pert: f64) -> f64 {
    let (x, r1, r2) = (state[0], state[1], state[2]);
    let u = r1 * r1 + r2 * r2;
    let g = g_term(x, u, eps_pert);
    let g_u = -eps_pert * (w_bracket(x, u) + (u - 1.0) * (u - 1.0));
    2.0 * g + 2.0 * u * g_u
}

/// Lift a half-plane state `(x, r)` to Cartesian coordinates at angle `theta`.
pub fn lift_state(x: f64, r: f64, theta: f64) -> [f64; 3] {
    [x, r * theta.cos(), r * theta.sin()]
}

/// Project a lifted state back to `(x, r, theta)`. The angle is undefined on
/// the axis `r = 0` and reported as `None` there.
pub fn project_state(state: &[f64]) -> (f64, f64, Option<f64>) {
    let r = (state[1] * state[1] + state[2] * state[2]).sqrt();
    let theta = if r > 0.0 {
        Some(state[2].atan2(state[1]))
    } else {
        None
    };
    (state[0], r, theta)
}
