//! The exact piecewise model of the flow near the cycle: linear local flow
//! inside each isolating block, the induced inflow-to-outflow maps, the linear
//! global transitions, the first-return map, and full hitting-time sequences.
//!
//! Conventions used throughout:
//!
//! * Angles are stored **unwrapped** (real-valued); reduction mod 2π is a
//!   presentation concern. The time/angle recovery formulas in
//!   [`crate::conjugacy`] are ill-posed on wrapped angles.
//! * Trajectories always exit a block through the top annulus (`z = +eps`).
//!   A transition landing with a negative axial offset means the inner inflow
//!   wall of the next block is hit instead of the outer one; the radial side
//!   is carried as a sign and the moduli of the offsets obey the same
//!   formulas on both sides.
//! * The radial offset shrinks super-exponentially (doubly exponentially in
//!   the return index when `delta > 1`), so [`hitting_sequence`] evolves its
//!   logarithm. Hit times and angles stay exact long after the offset itself
//!   has left the range of `f64`; the stored `rho` saturates at the orbit
//!   radius and the first such index is reported in
//!   [`HittingRecord::underflow_at`].

use crate::model::{CycleParams, DerivedConstants, TransitionParams};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Which orbit's chart a point lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    One,
    Two,
}

impl Block {
    pub fn other(self) -> Self {
        match self {
            Block::One => Block::Two,
            Block::Two => Block::One,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Block::One => 1,
            Block::Two => 2,
        }
    }
}

/// A point in cylindrical coordinates `(rho, theta, z)` of one block's chart.
/// `theta` is unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylPoint {
    pub rho: f64,
    pub theta: f64,
    pub z: f64,
    pub block: Block,
}

impl CylPoint {
    pub fn new(rho: f64, theta: f64, z: f64, block: Block) -> Self {
        Self {
            rho,
            theta,
            z,
            block,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum PiecewiseError {
    #[error("point on or below local stable manifold: never exits upward")]
    StableManifold,
    #[error("initial point on unstable manifold of C2: infinite dwell")]
    UnstableManifold,
    #[error("point outside section: {0}")]
    OutsideSection(String),
    #[error("hit count must be >= 1")]
    EmptyRequest,
}

/// Per-block geometry of the isolating block and its boundary pieces: the
/// inflow walls `rho = R ± eps`, the outflow annuli `z = ± eps`, and the
/// corner circles where they meet.
#[derive(Debug, Clone, Copy)]
pub struct SectionGeometry {
    pub block: Block,
    pub radius: f64,
    pub eps: f64,
    /// Tolerance used by the membership predicates.
    pub tol: f64,
}

impl SectionGeometry {
    pub fn new(block: Block, cycle: &CycleParams, derived: &DerivedConstants) -> Self {
        Self {
            block,
            radius: match block {
                Block::One => derived.r1,
                Block::Two => derived.r2,
            },
            eps: cycle.eps,
            tol: 1e-12,
        }
    }

    /// Inside the block (walls included).
    pub fn contains(&self, p: &CylPoint) -> bool {
        p.block == self.block
            && (p.rho - self.radius).abs() <= self.eps + self.tol
            && p.z.abs() <= self.eps + self.tol
    }

    /// On the outer inflow wall `rho = R + eps`.
    pub fn on_in_plus(&self, p: &CylPoint) -> bool {
        p.block == self.block
            && (p.rho - self.radius - self.eps).abs() <= self.tol
            && p.z.abs() <= self.eps + self.tol
    }

    /// On the top outflow annulus `z = eps`.
    pub fn on_out_plus(&self, p: &CylPoint) -> bool {
        p.block == self.block
            && (p.z - self.eps).abs() <= self.tol
            && (p.rho - self.radius).abs() <= self.eps + self.tol
    }

    /// On the trace of the unstable set in the outflow annuli (`rho = R`).
    pub fn on_unstable_trace(&self, p: &CylPoint) -> bool {
        p.block == self.block
            && (p.rho - self.radius).abs() <= self.tol
            && (p.z.abs() - self.eps).abs() <= self.tol
    }

    /// On a corner circle (`|rho - R| = eps` and `|z| = eps`), the only locus
    /// where inflow and outflow boundaries meet.
    pub fn on_corner(&self, p: &CylPoint) -> bool {
        p.block == self.block
            && ((p.rho - self.radius).abs() - self.eps).abs() <= self.tol
            && (p.z.abs() - self.eps).abs() <= self.tol
    }
}

fn block_data(j: Block, cycle: &CycleParams, derived: &DerivedConstants) -> (f64, f64, f64, f64) {
    // (R, C, E, omega)
    match j {
        Block::One => (derived.r1, cycle.c1, cycle.e1, cycle.omega1),
        Block::Two => (derived.r2, cycle.c2, cycle.e2, cycle.omega2),
    }
}

/// Flow the linearized field inside block `j` for time `t`:
/// `(R + k e^{-C t}, theta + omega t, z e^{E t})` with `k = rho - R`.
/// Valid for all real `t`.
pub fn local_flow(
    j: Block,
    p: &CylPoint,
    t: f64,
    cycle: &CycleParams,
    derived: &DerivedConstants,
) -> CylPoint {
    let (r, c, e, omega) = block_data(j, cycle, derived);
    CylPoint {
        rho: r + (p.rho - r) * (-c * t).exp(),
        theta: p.theta + omega * t,
        z: p.z * (e * t).exp(),
        block: j,
    }
}

/// Map a point of the outer inflow wall (`rho = R + eps`, `0 < z <= eps`) to
/// its exit through the top outflow annulus, returning the exit point and the
/// dwell time `-(1/E) log(z/eps)`.
///
/// The exit point is `(R + eps (z/eps)^{C/E}, theta - (omega/E) log(z/eps), eps)`;
/// the subtracted log term is nonnegative, so it acts as a forward rotation.
pub fn local_map(
    p: &CylPoint,
    cycle: &CycleParams,
    derived: &DerivedConstants,
) -> Result<(CylPoint, f64), PiecewiseError> {
    let (r, c, e, omega) = block_data(p.block, cycle, derived);
    let eps = cycle.eps;
    if p.z <= 0.0 {
        return Err(PiecewiseError::StableManifold);
    }
    if p.z > eps * (1.0 + 1e-12) {
        return Err(PiecewiseError::OutsideSection(format!(
            "z = {} exceeds eps = {eps}",
            p.z
        )));
    }
    let lam = (p.z / eps).ln(); // <= 0
    let dwell = -lam / e;
    let exit = CylPoint {
        rho: r + eps * (lam * (c / e)).exp(),
        theta: p.theta + omega * dwell,
        z: eps,
        block: p.block,
    };
    Ok((exit, dwell))
}

/// Apply the linear global transition from the top outflow annulus of `from`
/// to the inflow wall of the other block.
///
/// From block 1: `(rho, theta, eps) -> (R2 + eps, a theta, b (rho - R1))`;
/// from block 2: `(R1 + eps, c theta, d (rho - R2))`. The angular coordinate
/// is multiplied on its unwrapped value. The returned axial offset keeps the
/// sign of the radial offset; a nonpositive value means the inner wall (or
/// the stable set itself) is hit, which callers resolve.
pub fn transition(
    from: Block,
    p: &CylPoint,
    trans: &TransitionParams,
    derived: &DerivedConstants,
    eps: f64,
) -> CylPoint {
    match from {
        Block::One => CylPoint {
            rho: derived.r2 + eps,
            theta: trans.a * p.theta,
            z: trans.b * (p.rho - derived.r1),
            block: Block::Two,
        },
        Block::Two => CylPoint {
            rho: derived.r1 + eps,
            theta: trans.c * p.theta,
            z: trans.d * (p.rho - derived.r2),
            block: Block::One,
        },
    }
}

/// One full turn of the return map on the inflow wall of block 2, in closed
/// form. Input `(R2 ± eps, theta, z)` with `0 < z <= eps`; the output sits on
/// the same radial side with
///
/// ```text
/// Z     = b eps d^{delta1} (z/eps)^{delta}
/// Theta = a c theta - [(a c omega2 E1 + a omega1 C2)/(E1 E2)] log(z/eps)
///         - (a omega1 / E1) log d
/// ```
///
/// computed on unwrapped angles. Equals the explicit four-map composition
/// (transition and local map alternately) exactly; the composition is the
/// oracle in this module's tests.
pub fn first_return(
    p: &CylPoint,
    cycle: &CycleParams,
    trans: &TransitionParams,
    derived: &DerivedConstants,
) -> Result<CylPoint, PiecewiseError> {
    let eps = cycle.eps;
    if p.z <= 0.0 {
        return Err(PiecewiseError::StableManifold);
    }
    if p.z > eps * (1.0 + 1e-12) {
        return Err(PiecewiseError::OutsideSection(format!(
            "z = {} exceeds eps = {eps}",
            p.z
        )));
    }
    let side = if p.rho >= derived.r2 { 1.0 } else { -1.0 };
    let lam = (p.z / eps).ln();
    let big_z = trans.b * eps * trans.d.powf(derived.delta1) * (lam * derived.delta).exp();
    let coeff = (trans.a * trans.c * cycle.omega2 * cycle.e1 + trans.a * cycle.omega1 * cycle.c2)
        / (cycle.e1 * cycle.e2);
    let theta =
        trans.a * trans.c * p.theta - coeff * lam - trans.a * cycle.omega1 / cycle.e1 * trans.d.ln();
    Ok(CylPoint {
        rho: derived.r2 + side * eps,
        theta,
        z: big_z,
        block: Block::Two,
    })
}

/// The sequence of section hits generated by one trajectory: hit times,
/// points on the alternating top outflow annuli, per-leg transit times, and
/// the radial side of each hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingRecord {
    /// Hit times, `t[0] = 0`, strictly increasing.
    pub t: Vec<f64>,
    /// Hit points; even indices on block 2's outflow annulus, odd on block 1's.
    pub points: Vec<CylPoint>,
    /// Transit time consumed by the leg ending at each hit (`legs[0] = 0`).
    pub legs: Vec<f64>,
    /// Sign of `rho - R` at each hit.
    pub branch: Vec<i8>,
    /// `log(|rho - R| / eps)` at each hit, the exact radial state.
    pub log_offsets: Vec<f64>,
    /// First index at which the radial offset fell below the smallest
    /// positive normal `f64` (the stored `rho` saturates at `R` from there on).
    pub underflow_at: Option<usize>,
    /// Block half-width the record was generated with.
    pub eps: f64,
}

impl HittingRecord {
    /// Number of recorded hits (length of `t`).
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Number of complete returns to the starting annulus.
    pub fn returns(&self) -> usize {
        (self.t.len().saturating_sub(1)) / 2
    }

    /// Unwrapped angles of the hits.
    pub fn thetas(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.theta)
    }

    /// CSV serialization, one row per hit.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,t,rho,theta_unwrapped,z,block,leg_time,branch\n");
        for i in 0..self.t.len() {
            let p = &self.points[i];
            let _ = writeln!(
                out,
                "{i},{},{},{},{},{},{},{}",
                self.t[i],
                p.rho,
                p.theta,
                p.z,
                p.block.index(),
                self.legs[i],
                self.branch[i]
            );
        }
        out
    }

    /// JSON serialization with the same field names as the CSV columns.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<_> = (0..self.t.len())
            .map(|i| {
                let p = &self.points[i];
                serde_json::json!({
                    "i": i,
                    "t": self.t[i],
                    "rho": p.rho,
                    "theta_unwrapped": p.theta,
                    "z": p.z,
                    "block": p.block.index(),
                    "leg_time": self.legs[i],
                    "branch": self.branch[i],
                })
            })
            .collect();
        serde_json::json!({ "rows": rows, "underflow_at": self.underflow_at, "eps": self.eps })
    }
}

struct LegCoeffs {
    // data of the block being entered
    r: f64,
    e: f64,
    delta_big: f64,
    omega: f64,
    ln_mult: f64,
    ang_mult: f64,
    s: f64,
    block: Block,
}

fn leg_coeffs(into: Block, cycle: &CycleParams, trans: &TransitionParams, derived: &DerivedConstants) -> LegCoeffs {
    match into {
        Block::One => LegCoeffs {
            r: derived.r1,
            e: cycle.e1,
            delta_big: derived.delta1,
            omega: cycle.omega1,
            ln_mult: trans.d.ln(),
            ang_mult: trans.c,
            s: trans.s1,
            block: Block::One,
        },
        Block::Two => LegCoeffs {
            r: derived.r2,
            e: cycle.e2,
            delta_big: derived.delta2,
            omega: cycle.omega2,
            ln_mult: trans.b.ln(),
            ang_mult: trans.a,
            s: trans.s2,
            block: Block::Two,
        },
    }
}

/// Iterate the cycle dynamics from a point `(rho0, theta0, eps)` on the top
/// outflow annulus of block 2, producing `n` further hits (`t_1 .. t_n`, so
/// the record holds `n + 1` entries).
///
/// Legs alternate: odd-index legs transit to block 1 (multipliers `c`, `d`,
/// transit `s1`), even-index legs back to block 2 (`a`, `b`, `s2`). The
/// radial side of the start is preserved along the whole record. Requires
/// `rho0 != R2` (a point of the unstable set never reaches the next block)
/// and `|rho0 - R2| <= eps`.
pub fn hitting_sequence(
    p0: &CylPoint,
    n: usize,
    cycle: &CycleParams,
    trans: &TransitionParams,
    derived: &DerivedConstants,
) -> Result<HittingRecord, PiecewiseError> {
    if n == 0 {
        return Err(PiecewiseError::EmptyRequest);
    }
    let eps = cycle.eps;
    let offset0 = p0.rho - derived.r2;
    if offset0 == 0.0 {
        return Err(PiecewiseError::UnstableManifold);
    }
    if offset0.abs() > eps * (1.0 + 1e-12) {
        return Err(PiecewiseError::OutsideSection(format!(
            "|rho0 - R2| = {} exceeds eps = {eps}",
            offset0.abs()
        )));
    }
    if p0.block != Block::Two || (p0.z - eps).abs() > eps * 1e-9 {
        return Err(PiecewiseError::OutsideSection(
            "start point must lie on the top outflow annulus of block 2".into(),
        ));
    }

    let sigma = offset0.signum();
    let mut lam = (offset0.abs() / eps).ln();
    let mut theta = p0.theta;
    let mut t = 0.0f64;

    let mut rec = HittingRecord {
        t: Vec::with_capacity(n + 1),
        points: Vec::with_capacity(n + 1),
        legs: Vec::with_capacity(n + 1),
        branch: Vec::with_capacity(n + 1),
        log_offsets: Vec::with_capacity(n + 1),
        underflow_at: None,
        eps,
    };
    rec.t.push(0.0);
    rec.points.push(CylPoint::new(p0.rho, p0.theta, eps, Block::Two));
    rec.legs.push(0.0);
    rec.branch.push(sigma as i8);
    rec.log_offsets.push(lam);

    for i in 1..=n {
        let into = if i % 2 == 1 { Block::One } else { Block::Two };
        let k = leg_coeffs(into, cycle, trans, derived);
        let lam_in = k.ln_mult + lam; // log of the entering axial offset / eps
        let dwell = -lam_in / k.e;
        t += k.s + dwell;
        theta = k.ang_mult * theta + k.omega * dwell;
        lam = k.delta_big * lam_in;

        let off = eps * lam.exp();
        if off < f64::MIN_POSITIVE && rec.underflow_at.is_none() {
            rec.underflow_at = Some(i);
        }
        rec.t.push(t);
        rec.points
            .push(CylPoint::new(k.r + sigma * off, theta, eps, k.block));
        rec.legs.push(k.s);
        rec.branch.push(sigma as i8);
        rec.log_offsets.push(lam);
    }
    Ok(rec)
}

/// State of the piecewise trajectory at an arbitrary time: either inside a
/// block or in transit between blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowState {
    Inside(CylPoint),
    Transit { from: Block, to: Block, progress: f64 },
}

enum Segment {
    Transit {
        t0: f64,
        t1: f64,
        from: Block,
        to: Block,
    },
    Dwell {
        t0: f64,
        t1: f64,
        block: Block,
        r: f64,
        sigma: f64,
        lam_in: f64,
        theta_in: f64,
        e: f64,
        c: f64,
        omega: f64,
    },
}

/// Time-parameterized reconstruction of a piecewise trajectory, for use as a
/// sampler in Birkhoff averaging.
pub struct PiecewiseSampler {
    segments: Vec<Segment>,
    eps: f64,
    horizon: f64,
}

impl PiecewiseSampler {
    /// Reconstruct the trajectory of `p0` over `n` legs.
    pub fn new(
        p0: &CylPoint,
        n: usize,
        cycle: &CycleParams,
        trans: &TransitionParams,
        derived: &DerivedConstants,
    ) -> Result<Self, PiecewiseError> {
        let eps = cycle.eps;
        let rec = hitting_sequence(p0, n, cycle, trans, derived)?;
        let sigma = (p0.rho - derived.r2).signum();
        let mut segments = Vec::with_capacity(2 * n);
        for i in 1..rec.t.len() {
            let into = if i % 2 == 1 { Block::One } else { Block::Two };
            let k = leg_coeffs(into, cycle, trans, derived);
            let (c_rate, _) = match into {
                Block::One => (cycle.c1, ()),
                Block::Two => (cycle.c2, ()),
            };
            let t_prev = rec.t[i - 1];
            let lam_in = k.ln_mult + rec.log_offsets[i - 1];
            let theta_in = k.ang_mult * rec.points[i - 1].theta;
            segments.push(Segment::Transit {
                t0: t_prev,
                t1: t_prev + k.s,
                from: into.other(),
                to: into,
            });
            segments.push(Segment::Dwell {
                t0: t_prev + k.s,
                t1: rec.t[i],
                block: into,
                r: k.r,
                sigma,
                lam_in,
                theta_in,
                e: k.e,
                c: c_rate,
                omega: k.omega,
            });
        }
        let horizon = *rec.t.last().unwrap();
        Ok(Self {
            segments,
            eps,
            horizon,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// The state at time `t` (clamped to the reconstructed span).
    pub fn state(&self, t: f64) -> FlowState {
        let idx = self
            .segments
            .partition_point(|s| match s {
                Segment::Transit { t1, .. } | Segment::Dwell { t1, .. } => *t1 < t,
            })
            .min(self.segments.len() - 1);
        match &self.segments[idx] {
            Segment::Transit { t0, t1, from, to } => FlowState::Transit {
                from: *from,
                to: *to,
                progress: ((t - t0) / (t1 - t0).max(f64::MIN_POSITIVE)).clamp(0.0, 1.0),
            },
            Segment::Dwell {
                t0,
                t1,
                block,
                r,
                sigma,
                lam_in,
                theta_in,
                e,
                c,
                omega,
            } => {
                let tau = (t - t0).clamp(0.0, t1 - t0);
                FlowState::Inside(CylPoint {
                    rho: r + sigma * self.eps * (-c * tau).exp(),
                    theta: theta_in + omega * tau,
                    z: self.eps * (lam_in + e * tau).exp(),
                    block: *block,
                })
            }
        }
    }
}

/// Sampler for a point riding the periodic orbit of block `j` itself
/// (`rho = R`, `z = 0`, angle advancing at `omega`).
pub fn orbit_sampler(
    j: Block,
    theta0: f64,
    cycle: &CycleParams,
    derived: &DerivedConstants,
) -> impl Fn(f64) -> FlowState {
    let (r, _, _, omega) = block_data(j, cycle, derived);
    move |t| {
        FlowState::Inside(CylPoint {
            rho: r,
            theta: theta0 + omega * t,
            z: 0.0,
            block: j,
        })
    }
}
