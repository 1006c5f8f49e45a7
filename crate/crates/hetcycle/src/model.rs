//! System parameters, hypothesis checks, derived constants, and closed-form
//! conjugacy invariants.
//!
//! A system is described by the data of its two periodic orbits
//! ([`CycleParams`]) and of the two global transitions joining their
//! neighborhoods ([`TransitionParams`]). All quantities the rest of the crate
//! needs are ratios and log-combinations of these ([`DerivedConstants`],
//! [`InvariantSet`]).

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Floquet data of the two periodic orbits.
///
/// `E*` are expansion rates and `C*` contraction rates of the linearized
/// return maps (all stored positive: the return-map eigenvalues are `e^{E}`
/// and `e^{-C}`). `omega*` are the angular speeds inside the linearizing
/// neighborhoods, `period*` the minimal periods, and `eps` the half-width of
/// the isolating blocks (all other modules work with offsets normalized by
/// `eps`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleParams {
    #[serde(rename = "E1")]
    pub e1: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "E2")]
    pub e2: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub period1: f64,
    pub period2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    1.0
}

impl CycleParams {
    /// Parameters with the default block half-width `eps = 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        e1: f64,
        c1: f64,
        e2: f64,
        c2: f64,
        omega1: f64,
        omega2: f64,
        period1: f64,
        period2: f64,
    ) -> Self {
        Self {
            e1,
            c1,
            e2,
            c2,
            omega1,
            omega2,
            period1,
            period2,
            eps: 1.0,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }
}

/// Coefficients of the two linear transition maps and the transit times they
/// consume.
///
/// `a`, `c` multiply the angular coordinate and `b`, `d` map the radial
/// offset on an outflow annulus to the axial offset on the next inflow wall
/// (`a`,`b` on the leg leaving orbit 1; `c`,`d` on the leg leaving orbit 2).
/// `s1` is the transit time from orbit 2's outflow to orbit 1's inflow, `s2`
/// the reverse leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub s1: f64,
    pub s2: f64,
}

impl TransitionParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64, s1: f64, s2: f64) -> Self {
        Self { a, b, c, d, s1, s2 }
    }
}

/// One violated hypothesis, reported by [`validate`]. Violations are data,
/// not errors: callers decide what to do with them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub name: &'static str,
    pub message: String,
}

fn violation(out: &mut Vec<Violation>, name: &'static str, message: String) {
    out.push(Violation { name, message });
}

/// Check every standing hypothesis on the parameters and return the violated
/// ones by name (empty list = valid). With `strict` set, additionally require
/// the strict-contraction inequalities `C1 > E1`, `C2 > E2`. These are kept
/// behind a flag because the flagship lifted example has `C = E` while its
/// cycle remains asymptotically stable.
pub fn validate(cycle: &CycleParams, trans: &TransitionParams, strict: bool) -> Vec<Violation> {
    let mut v = Vec::new();
    let positives = [
        ("E1", cycle.e1),
        ("C1", cycle.c1),
        ("E2", cycle.e2),
        ("C2", cycle.c2),
        ("omega1", cycle.omega1),
        ("omega2", cycle.omega2),
        ("period1", cycle.period1),
        ("period2", cycle.period2),
        ("eps", cycle.eps),
    ];
    for (name, value) in positives {
        if !(value > 0.0) || !value.is_finite() {
            violation(
                &mut v,
                "positivity",
                format!("{name} must be strictly positive and finite, got {value}"),
            );
        }
    }
    if strict {
        if !(cycle.c1 > cycle.e1) {
            violation(&mut v, "strict-contraction", "C1>E1 fails".into());
        }
        if !(cycle.c2 > cycle.e2) {
            violation(&mut v, "strict-contraction", "C2>E2 fails".into());
        }
    }
    for (name, value) in [("a", trans.a), ("c", trans.c)] {
        if !(value > 0.0) || !value.is_finite() {
            violation(
                &mut v,
                "angular-multiplier-range",
                format!("{name} must be strictly positive and finite, got {value}"),
            );
        }
    }
    for (name, value) in [("b", trans.b), ("d", trans.d)] {
        if !(value > 0.0 && value <= 1.0) {
            violation(
                &mut v,
                "radial-multiplier-range",
                format!("{name} must lie in (0,1], got {value}"),
            );
        }
    }
    for (name, value) in [("s1", trans.s1), ("s2", trans.s2)] {
        if !(value >= 0.0) || !value.is_finite() {
            violation(
                &mut v,
                "transit-time-range",
                format!("{name} must be finite and >= 0, got {value}"),
            );
        }
    }
    v
}

/// Constants derived from the Floquet data; every asymptotic statement in the
/// crate is expressed through these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// Orbit radii `R_j = omega_j * period_j / (2 pi)`.
    pub r1: f64,
    pub r2: f64,
    /// `gamma1 = C1/E2`, `gamma2 = C2/E1`: cross-ratios governing consecutive
    /// leg-time growth.
    pub gamma1: f64,
    pub gamma2: f64,
    /// `delta_j = C_j/E_j`; `delta = delta1*delta2 = gamma1*gamma2` is the
    /// contraction rate of the full return.
    pub delta1: f64,
    pub delta2: f64,
    pub delta: f64,
    /// `tau_j = (1+gamma_j)/E_j`.
    pub tau1: f64,
    pub tau2: f64,
}

/// Compute the derived constants. `delta == gamma1*gamma2` holds exactly by
/// construction.
pub fn derive_constants(cycle: &CycleParams) -> DerivedConstants {
    let gamma1 = cycle.c1 / cycle.e2;
    let gamma2 = cycle.c2 / cycle.e1;
    let delta1 = cycle.c1 / cycle.e1;
    let delta2 = cycle.c2 / cycle.e2;
    DerivedConstants {
        r1: cycle.omega1 * cycle.period1 / TAU,
        r2: cycle.omega2 * cycle.period2 / TAU,
        gamma1,
        gamma2,
        delta1,
        delta2,
        delta: gamma1 * gamma2,
        tau1: (1.0 + gamma1) / cycle.e1,
        tau2: (1.0 + gamma2) / cycle.e2,
    }
}

/// The eight scalars that classify a system up to time-preserving
/// conjugacy near the cycle.
///
/// `logcomb1` pairs the leg *into* block 1 (multiplier `d`, rate `E1`,
/// transit `s1`) with `gamma2 = C2/E1`; `logcomb2` pairs the leg into block 2
/// with `gamma1`. This is the pairing forced by the leg-time identities (see
/// [`crate::estimator::identity_residuals`]); the weighted combination
/// `(1+gamma1)*logcomb1 + (1+gamma2)*logcomb2` recovers [`InvariantSet::combo`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantSet {
    pub period1: f64,
    pub period2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// `omega1 + gamma1*omega2`
    pub mix1: f64,
    /// `omega2 + gamma2*omega1`
    pub mix2: f64,
    /// `-(1/E1) log d + (s1 - gamma2*s2)`
    pub logcomb1: f64,
    /// `-(1/E2) log b + (s2 - gamma1*s1)`
    pub logcomb2: f64,
}

impl InvariantSet {
    /// `-tau1 log d - tau2 log b + (s1+s2)(1-delta)`, the contracted-return
    /// combination; equals `(1+gamma1)*logcomb1 + (1+gamma2)*logcomb2`.
    pub fn combo(&self) -> f64 {
        (1.0 + self.gamma1) * self.logcomb1 + (1.0 + self.gamma2) * self.logcomb2
    }

    /// Field names and values, in a fixed order (used for mismatch reports).
    pub fn fields(&self) -> [(&'static str, f64); 8] {
        [
            ("period1", self.period1),
            ("period2", self.period2),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("mix1", self.mix1),
            ("mix2", self.mix2),
            ("logcomb1", self.logcomb1),
            ("logcomb2", self.logcomb2),
        ]
    }

    /// Names of the fields on which `self` and `other` differ by more than
    /// `tol` relative to `max(1, |x|, |y|)`.
    pub fn differing_fields(&self, other: &Self, tol: f64) -> Vec<&'static str> {
        self.fields()
            .iter()
            .zip(other.fields().iter())
            .filter(|((_, x), (_, y))| (x - y).abs() > tol * x.abs().max(y.abs()).max(1.0))
            .map(|((name, _), _)| *name)
            .collect()
    }
}

/// Evaluate the complete invariant set in closed form.
pub fn invariants_closed_form(cycle: &CycleParams, trans: &TransitionParams) -> InvariantSet {
    let d = derive_constants(cycle);
    InvariantSet {
        period1: cycle.period1,
        period2: cycle.period2,
        gamma1: d.gamma1,
        gamma2: d.gamma2,
        mix1: cycle.omega1 + d.gamma1 * cycle.omega2,
        mix2: cycle.omega2 + d.gamma2 * cycle.omega1,
        logcomb1: -trans.d.ln() / cycle.e1 + (trans.s1 - d.gamma2 * trans.s2),
        logcomb2: -trans.b.ln() / cycle.e2 + (trans.s2 - d.gamma1 * trans.s1),
    }
}

/// The invariant set for a homoclinic cycle (both orbits coincide): four
/// scalars, with `gamma1 = C1/E1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomoclinicInvariantSet {
    pub period1: f64,
    pub gamma1: f64,
    pub omega1: f64,
    /// `-(1/E1) log b + s1*(1 - gamma1)`
    pub logcomb: f64,
}

/// Invariants of the single-orbit (homoclinic) reduction, from the data of
/// orbit 1 and its one transition (`b`, `s1`).
pub fn homoclinic_invariants(
    e1: f64,
    c1: f64,
    omega1: f64,
    period1: f64,
    b: f64,
    s1: f64,
) -> HomoclinicInvariantSet {
    let gamma1 = c1 / e1;
    HomoclinicInvariantSet {
        period1,
        gamma1,
        omega1,
        logcomb: -b.ln() / e1 + s1 * (1.0 - gamma1),
    }
}

/// A full system: orbit data, transition data, and the derived constants,
/// validated (non-strict) at construction.
#[derive(Debug, Clone, Copy)]
pub struct System {
    pub cycle: CycleParams,
    pub trans: TransitionParams,
    pub derived: DerivedConstants,
}

/// Parameters failed the (non-strict) hypothesis checks.
#[derive(Debug, Clone, thiserror::Error)]
#[error("invalid parameters: {}", .0.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; "))]
pub struct InvalidParams(pub Vec<Violation>);

impl System {
    pub fn new(cycle: CycleParams, trans: TransitionParams) -> Result<Self, InvalidParams> {
        let violations = validate(&cycle, &trans, false);
        if !violations.is_empty() {
            return Err(InvalidParams(violations));
        }
        Ok(Self {
            cycle,
            trans,
            derived: derive_constants(&cycle),
        })
    }

    pub fn invariants(&self) -> InvariantSet {
        invariants_closed_form(&self.cycle, &self.trans)
    }
}
