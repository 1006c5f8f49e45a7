//! Hitting-time records measured from the lifted flow.
//!
//! The cross sections are the rotation lifts of the planar ones: planes
//! `x = ±(1 - eps_hat)` windowed in `r^2`. A trajectory attracted to the
//! cycle crosses, per turn, the outflow section of the orbit at `x = -1`,
//! the inflow of the orbit at `x = 1`, its outflow, and the inflow back —
//! four gated crossings whose times and unwrapped angles assemble into the
//! same [`HittingRecord`] the piecewise model produces.

use super::integrate::{integrate, ControlParams, CrossingDirection, SectionEvent, SectionSpec, Trajectory};
use super::rhs::{vector_field, Variant};
use super::OdeError;
use crate::piecewise::{Block, CylPoint, HittingRecord};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Section ids used by [`lifted_sections`].
pub mod section_id {
    pub const OUT_C1: u32 = 1;
    pub const OUT_C2: u32 = 2;
    pub const IN_C1: u32 = 3;
    pub const IN_C2: u32 = 4;
}

/// Configuration of the lifted example runs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BowenConfig {
    /// Damping strength of the perturbation.
    pub epsilon_pert: f64,
    /// Angular speed of the lift.
    pub omega: f64,
    /// Section offset from the orbit planes.
    #[serde(default = "default_eps_hat")]
    pub eps_hat: f64,
    /// Section window half-width factor: windows span `r^2` offsets up to
    /// `K * eps_hat`. Must exceed `sqrt(2)` for the windows to contain the
    /// separatrix crossings.
    #[serde(default = "default_k", rename = "K")]
    pub k_width: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_max_step")]
    pub max_step: f64,
}

fn default_eps_hat() -> f64 {
    0.05
}
fn default_k() -> f64 {
    2.0
}
fn default_rel_tol() -> f64 {
    1e-10
}
fn default_abs_tol() -> f64 {
    1e-12
}
fn default_max_step() -> f64 {
    0.1
}

impl Default for BowenConfig {
    fn default() -> Self {
        Self {
            epsilon_pert: 1e-3,
            omega: 1.0,
            eps_hat: default_eps_hat(),
            k_width: default_k(),
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            max_step: default_max_step(),
        }
    }
}

impl BowenConfig {
    pub fn control(&self) -> ControlParams {
        ControlParams {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            // keep the per-step rotation well under pi so angle unwrapping
            // by nearest continuation is unambiguous
            max_step: self.max_step.min(1.0 / self.omega.max(1.0)),
            first_step: None,
        }
    }
}

/// The four gated sections of the lifted system.
///
/// Outflow of the orbit at `x = -1`: plane `x = -1 + eps_hat` crossed
/// rightward in the window `r^2 <= 1` (the lower connection); inflow of the
/// orbit at `x = 1`: same plane side, window; and the mirrored pair on
/// `x = 1 - eps_hat`.
pub fn lifted_sections(cfg: &BowenConfig) -> Vec<SectionSpec> {
    let e = cfg.eps_hat;
    let k = cfg.k_width;
    let slack = 1e-9;
    let upper = move |y: &[f64]| {
        let u = y[1] * y[1] + y[2] * y[2];
        (1.0 - slack..=1.0 + k * e + slack).contains(&u)
    };
    let lower = move |y: &[f64]| {
        let u = y[1] * y[1] + y[2] * y[2];
        (1.0 - k * e - slack..=1.0 + slack).contains(&u)
    };
    vec![
        SectionSpec::new(
            section_id::OUT_C1,
            "out-c1",
            CrossingDirection::Falling,
            move |y: &[f64]| y[0] - (1.0 - e),
        )
        .with_gate(upper),
        SectionSpec::new(
            section_id::OUT_C2,
            "out-c2",
            CrossingDirection::Rising,
            move |y: &[f64]| y[0] - (-1.0 + e),
        )
        .with_gate(lower),
        SectionSpec::new(
            section_id::IN_C1,
            "in-c1",
            CrossingDirection::Rising,
            move |y: &[f64]| y[0] - (1.0 - e),
        )
        .with_gate(lower),
        SectionSpec::new(
            section_id::IN_C2,
            "in-c2",
            CrossingDirection::Falling,
            move |y: &[f64]| y[0] - (-1.0 + e),
        )
        .with_gate(upper),
    ]
}

/// A start just inside the outflow section of the orbit at `x = -1`, on the
/// lower connection side, within the basin.
pub fn default_start(cfg: &BowenConfig) -> [f64; 3] {
    let x = -1.0 + 0.9 * cfg.eps_hat;
    let y_planar = -0.6 * cfg.eps_hat;
    [x, (1.0 + y_planar).sqrt(), 0.0]
}

fn wrap_to_pi(mut d: f64) -> f64 {
    while d > PI {
        d -= 2.0 * PI;
    }
    while d < -PI {
        d += 2.0 * PI;
    }
    d
}

fn in_basin_window(y: &[f64]) -> bool {
    let r = (y[1] * y[1] + y[2] * y[2]).sqrt();
    y[0].abs() <= 1.3 && (0.2..=1.6).contains(&r)
}

struct MergedRun {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    thetas: Vec<f64>,
    events: Vec<SectionEvent>,
}

/// Integrate in chunks until enough outflow crossings have accumulated,
/// maintaining a continuously unwrapped angle along the accepted steps.
fn run_until_out_events(
    cfg: &BowenConfig,
    start: [f64; 3],
    out_events_wanted: usize,
    budget: f64,
) -> Result<MergedRun, OdeError> {
    let field = vector_field(Variant::Lifted, cfg.epsilon_pert, cfg.omega);
    let control = cfg.control();
    let mut merged = MergedRun {
        times: vec![0.0],
        states: vec![start.to_vec()],
        thetas: vec![start[2].atan2(start[1])],
        events: Vec::new(),
    };
    let mut t_base = 0.0f64;
    let mut state = start.to_vec();
    let chunk = 50.0f64;

    while t_base < budget {
        let sections = lifted_sections(cfg);
        let traj = integrate(&field, &state, chunk, &control, &sections);
        if let Some(fail) = traj.failure {
            return Err(OdeError::IntegrationFailed(format!("{fail:?}")));
        }
        for i in 1..traj.times.len() {
            let prev = &traj.states[i - 1];
            let cur = &traj.states[i];
            let d = wrap_to_pi(cur[2].atan2(cur[1]) - prev[2].atan2(prev[1]));
            let theta = merged.thetas.last().unwrap() + d;
            merged.times.push(t_base + traj.times[i]);
            merged.states.push(cur.clone());
            merged.thetas.push(theta);
            if !in_basin_window(cur) {
                return Err(OdeError::LeftBasin {
                    t: t_base + traj.times[i],
                });
            }
        }
        for mut ev in traj.events {
            ev.t += t_base;
            merged.events.push(ev);
        }
        let outs = merged
            .events
            .iter()
            .filter(|e| e.section == section_id::OUT_C1 || e.section == section_id::OUT_C2)
            .count();
        if outs >= out_events_wanted {
            return Ok(merged);
        }
        t_base += chunk;
        state = traj.states.last().unwrap().clone();
    }
    let outs = merged
        .events
        .iter()
        .filter(|e| e.section == section_id::OUT_C1 || e.section == section_id::OUT_C2)
        .count();
    Err(OdeError::InsufficientEvents {
        needed: out_events_wanted,
        got: outs,
    })
}

fn theta_at_event(merged: &MergedRun, ev: &SectionEvent) -> f64 {
    let idx = merged
        .times
        .partition_point(|t| *t <= ev.t)
        .saturating_sub(1);
    let base = &merged.states[idx];
    merged.thetas[idx] + wrap_to_pi(ev.state[2].atan2(ev.state[1]) - base[2].atan2(base[1]))
}

/// Extract a hitting record (`n` hits after the first outflow crossing of
/// the orbit at `x = -1`) from the lifted flow, together with the full
/// trajectory it was measured on.
///
/// Angles are unwrapped by nearest continuation along the trajectory; hit
/// times are re-zeroed at the first outflow crossing; per-leg transit times
/// are measured between each outflow crossing and the next inflow crossing
/// (they are only approximately constant at finite `eps_hat`, and the
/// estimators consume the measured values).
pub fn bowen_hitting_record(
    cfg: &BowenConfig,
    start: [f64; 3],
    n: usize,
) -> Result<(HittingRecord, Trajectory), OdeError> {
    let budget = 500.0 + n as f64 * 100.0;
    let merged = run_until_out_events(cfg, start, n + 1, budget)?;

    let mut rec = HittingRecord {
        t: Vec::new(),
        points: Vec::new(),
        legs: Vec::new(),
        branch: Vec::new(),
        log_offsets: Vec::new(),
        underflow_at: None,
        eps: cfg.eps_hat,
    };
    let mut t0 = None;
    let mut last_out_t = 0.0f64;
    let mut pending_leg = 0.0f64;
    for ev in &merged.events {
        match (t0, ev.section) {
            (None, s) if s == section_id::OUT_C2 => {
                t0 = Some(ev.t);
                last_out_t = ev.t;
                let theta = theta_at_event(&merged, ev);
                let r = (ev.state[1] * ev.state[1] + ev.state[2] * ev.state[2]).sqrt();
                rec.t.push(0.0);
                rec.points
                    .push(CylPoint::new(r, theta, ev.state[0], Block::Two));
                rec.legs.push(0.0);
                rec.branch.push(if r >= 1.0 { 1 } else { -1 });
                rec.log_offsets
                    .push((r - 1.0).abs().max(f64::MIN_POSITIVE).ln());
            }
            (None, _) => continue,
            (Some(base), s) => {
                let expect_block_one = rec.t.len() % 2 == 1; // odd hits sit on block 1's annulus
                match s {
                    x if x == section_id::IN_C1 || x == section_id::IN_C2 => {
                        pending_leg = ev.t - last_out_t;
                        continue;
                    }
                    x if x == section_id::OUT_C1 && expect_block_one
                        || x == section_id::OUT_C2 && !expect_block_one =>
                    {
                        let theta = theta_at_event(&merged, ev);
                        let r = (ev.state[1] * ev.state[1] + ev.state[2] * ev.state[2]).sqrt();
                        let block = if x == section_id::OUT_C1 {
                            Block::One
                        } else {
                            Block::Two
                        };
                        rec.t.push(ev.t - base);
                        rec.points.push(CylPoint::new(r, theta, ev.state[0], block));
                        rec.legs.push(pending_leg);
                        rec.branch.push(if r >= 1.0 { 1 } else { -1 });
                        rec.log_offsets
                            .push((r - 1.0).abs().max(f64::MIN_POSITIVE).ln());
                        last_out_t = ev.t;
                        pending_leg = 0.0;
                        if rec.t.len() == n + 1 {
                            break;
                        }
                    }
                    other => {
                        return Err(OdeError::UnexpectedCrossing {
                            t: ev.t,
                            section: other,
                        });
                    }
                }
            }
        }
    }
    // the start hit carries no transit leg
    if let Some(first_leg) = rec.legs.first_mut() {
        *first_leg = 0.0;
    }
    if rec.t.len() < n + 1 {
        return Err(OdeError::InsufficientEvents {
            needed: n + 1,
            got: rec.t.len(),
        });
    }

    let trajectory = Trajectory {
        times: merged.times,
        states: merged.states,
        events: merged.events,
        failure: None,
    };
    Ok((rec, trajectory))
}
