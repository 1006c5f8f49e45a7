//! Embedded Runge–Kutta 5(4) integration (Dormand–Prince pair) with PI step
//! control, fourth-order dense output, and section-crossing detection.
//!
//! Crossings are located on the dense output by bracketing bisection until
//! the event function is below [`EVENT_TOL`] in magnitude. Sections carry a
//! crossing-direction filter and an optional gate predicate evaluated at the
//! located crossing state; gated-out crossings are dropped silently.

/// Target magnitude of the event function at a located crossing.
pub const EVENT_TOL: f64 = 1e-10;

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// fifth-order weights minus the embedded fourth-order ones
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// dense-output weights
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Step-size and tolerance knobs.
#[derive(Debug, Clone, Copy)]
pub struct ControlParams {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Initial step; estimated from the data when absent.
    pub first_step: Option<f64>,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.1,
            first_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CrossingDirection {
    /// Event function passes from negative to positive.
    Rising,
    /// Positive to negative.
    Falling,
}

/// A cross-section given by the zero set of a scalar function of the state,
/// with sign-change semantics, a crossing-direction filter, and an optional
/// window gate.
pub struct SectionSpec {
    pub id: u32,
    pub name: String,
    pub direction: CrossingDirection,
    pub event: Box<dyn Fn(&[f64]) -> f64>,
    pub gate: Option<Box<dyn Fn(&[f64]) -> bool>>,
}

impl SectionSpec {
    pub fn new(
        id: u32,
        name: impl Into<String>,
        direction: CrossingDirection,
        event: impl Fn(&[f64]) -> f64 + 'static,
    ) -> Self {
        Self {
            id,
            name: name.into(),
            direction,
            event: Box::new(event),
            gate: None,
        }
    }

    pub fn with_gate(mut self, gate: impl Fn(&[f64]) -> bool + 'static) -> Self {
        self.gate = Some(Box::new(gate));
        self
    }
}

/// A located section crossing.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SectionEvent {
    pub t: f64,
    pub state: Vec<f64>,
    pub section: u32,
    /// +1 rising, -1 falling.
    pub direction: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum Failure {
    StepSizeUnderflow { t: f64 },
    NonFiniteState { t: f64 },
}

/// Integration output: accepted-step samples, located events in time order,
/// and an optional failure flag (the trajectory up to the failure is kept).
#[derive(Debug, Clone, serde::Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub events: Vec<SectionEvent>,
    pub failure: Option<Failure>,
}

impl Trajectory {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the start")
    }

    /// CSV with one row per accepted step; `headers` names the state columns.
    pub fn to_csv(&self, headers: &[&str]) -> String {
        let mut out = String::from("t");
        for h in headers {
            out.push(',');
            out.push_str(h);
        }
        out.push('\n');
        for (t, y) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t}"));
            for v in y {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// Events CSV: `t,section,<state columns>,direction`.
    pub fn events_to_csv(&self, headers: &[&str]) -> String {
        let mut out = String::from("t,section");
        for h in headers {
            out.push(',');
            out.push_str(h);
        }
        out.push_str(",direction\n");
        for e in &self.events {
            out.push_str(&format!("{},{}", e.t, e.section));
            for v in &e.state {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}\n", e.direction));
        }
        out
    }
}

struct DenseStep<'a> {
    rcont: &'a [Vec<f64>; 5],
}

impl DenseStep<'_> {
    fn eval(&self, theta: f64, out: &mut [f64]) {
        let s = theta;
        let s1 = 1.0 - theta;
        for i in 0..out.len() {
            out[i] = self.rcont[0][i]
                + s * (self.rcont[1][i]
                    + s1 * (self.rcont[2][i] + s * (self.rcont[3][i] + s1 * self.rcont[4][i])));
        }
    }
}

fn locate_event(
    section: &SectionSpec,
    dense: &DenseStep,
    t0: f64,
    h: f64,
    g0: f64,
    g1: f64,
    nd: usize,
) -> Option<(f64, Vec<f64>)> {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut glo = g0;
    let mut buf = vec![0.0; nd];
    let _ = g1;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        dense.eval(mid, &mut buf);
        let gm = (section.event)(&buf);
        if gm.abs() <= EVENT_TOL || (hi - lo) < 1e-15 {
            return Some((t0 + mid * h, buf));
        }
        if (glo < 0.0) == (gm < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    dense.eval(0.5 * (lo + hi), &mut buf);
    Some((t0 + 0.5 * (lo + hi) * h, buf))
}

/// Integrate `dy/dt = f(t, y)` from `y0` over `[0, t_end]`, locating
/// crossings of the given sections along the way.
pub fn integrate(
    f: impl Fn(f64, &[f64], &mut [f64]),
    y0: &[f64],
    t_end: f64,
    control: &ControlParams,
    sections: &[SectionSpec],
) -> Trajectory {
    let nd = y0.len();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![y0.to_vec()],
        events: Vec::new(),
        failure: None,
    };
    if t_end <= 0.0 {
        return traj;
    }

    let mut y = y0.to_vec();
    let mut t = 0.0f64;
    let mut k: [Vec<f64>; 7] = Default::default();
    for ki in k.iter_mut() {
        *ki = vec![0.0; nd];
    }
    {
        let (head, _) = k.split_at_mut(1);
        f(t, &y, &mut head[0]);
    }

    let sc = |yv: &[f64], i: usize| control.abs_tol + control.rel_tol * yv[i].abs();
    let mut h = control.first_step.unwrap_or_else(|| {
        let d0 = (0..nd).map(|i| (y[i] / sc(&y, i)).powi(2)).sum::<f64>().sqrt();
        let d1 = (0..nd)
            .map(|i| (k[0][i] / sc(&y, i)).powi(2))
            .sum::<f64>()
            .sqrt();
        if d1 > 1e-10 {
            (0.01 * d0 / d1).clamp(1e-8, control.max_step)
        } else {
            1e-6
        }
    });
    let mut facold: f64 = 1e-4;
    let mut ynew = vec![0.0; nd];
    let mut ystage = vec![0.0; nd];
    let mut g_old = vec![0.0f64; sections.len()];
    for (s, g) in sections.iter().zip(g_old.iter_mut()) {
        *g = (s.event)(&y);
    }

    while t < t_end {
        h = h.min(control.max_step).min(t_end - t);
        if h < 1e-14 * t.abs().max(1.0) {
            traj.failure = Some(Failure::StepSizeUnderflow { t });
            break;
        }

        // stages 2..6
        let a_rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
        for (s, row) in a_rows.iter().enumerate() {
            for i in 0..nd {
                let mut acc = 0.0;
                for (j, a) in row.iter().enumerate() {
                    acc += a * k[j][i];
                }
                ystage[i] = y[i] + h * acc;
            }
            let (done, rest) = k.split_at_mut(s + 1);
            let _ = done;
            f(t + C[s + 1] * h, &ystage, &mut rest[0]);
        }
        // fifth-order solution, then the FSAL stage
        for i in 0..nd {
            let mut acc = 0.0;
            for (j, b) in B5.iter().enumerate() {
                acc += b * k[j][i];
            }
            ynew[i] = y[i] + h * acc;
        }
        {
            let (done, rest) = k.split_at_mut(6);
            let _ = done;
            f(t + h, &ynew, &mut rest[0]);
        }

        if !ynew.iter().all(|v| v.is_finite()) {
            h *= 0.25;
            if h < 1e-14 {
                traj.failure = Some(Failure::NonFiniteState { t });
                break;
            }
            continue;
        }

        let mut err = 0.0;
        for i in 0..nd {
            let mut acc = 0.0;
            for (j, e) in E.iter().enumerate() {
                acc += e * k[j][i];
            }
            let scale = control.abs_tol + control.rel_tol * y[i].abs().max(ynew[i].abs());
            err += (h * acc / scale).powi(2);
        }
        err = (err / nd as f64).sqrt();

        if !err.is_finite() {
            h *= 0.25;
            continue;
        }

        if err <= 1.0 {
            // dense coefficients for this step
            let ydiff: Vec<f64> = (0..nd).map(|i| ynew[i] - y[i]).collect();
            let bspl: Vec<f64> = (0..nd).map(|i| h * k[0][i] - ydiff[i]).collect();
            let rcont = [
                y.clone(),
                ydiff.clone(),
                bspl.clone(),
                (0..nd)
                    .map(|i| ydiff[i] - h * k[6][i] - bspl[i])
                    .collect(),
                (0..nd)
                    .map(|i| {
                        h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>()
                    })
                    .collect(),
            ];
            let dense = DenseStep { rcont: &rcont };

            let mut step_events: Vec<SectionEvent> = Vec::new();
            for (si, section) in sections.iter().enumerate() {
                let g0 = g_old[si];
                let g1 = (section.event)(&ynew);
                let crossed = match section.direction {
                    CrossingDirection::Rising => g0 < 0.0 && g1 > 0.0,
                    CrossingDirection::Falling => g0 > 0.0 && g1 < 0.0,
                };
                if crossed {
                    if let Some((t_ev, y_ev)) = locate_event(section, &dense, t, h, g0, g1, nd) {
                        let admitted = section.gate.as_ref().map_or(true, |gate| gate(&y_ev));
                        if admitted {
                            step_events.push(SectionEvent {
                                t: t_ev,
                                state: y_ev,
                                section: section.id,
                                direction: match section.direction {
                                    CrossingDirection::Rising => 1,
                                    CrossingDirection::Falling => -1,
                                },
                            });
                        }
                    }
                }
                g_old[si] = g1;
            }
            step_events.sort_by(|a, b| a.t.total_cmp(&b.t));
            traj.events.extend(step_events);

            t += h;
            y.copy_from_slice(&ynew);
            k.swap(0, 6); // FSAL
            traj.times.push(t);
            traj.states.push(y.clone());

            // PI controller
            let fac11 = err.powf(0.17);
            let fac = (fac11 / facold.powf(0.04) / 0.9).clamp(0.1, 5.0);
            facold = err.max(1e-4);
            h /= fac;
        } else {
            let fac11 = err.powf(0.17);
            h /= (fac11 / 0.9).min(5.0);
        }
    }
    traj
}
