//! Extraction of the conjugacy invariants and asymptotic ratios from
//! hitting-time records, plus running Birkhoff averages.
//!
//! Everything here consumes a [`HittingRecord`] and never looks at how it was
//! produced, so the same estimators serve the exact piecewise model and
//! section-crossing records measured from a smooth flow.
//!
//! Limit extraction reports the final sequence value together with the last
//! Cauchy gap instead of extrapolating: convergence is geometric on
//! strict-contraction systems, so the last term is already the best estimate
//! and extrapolation only adds failure modes.

use crate::model::{DerivedConstants, TransitionParams};
use crate::piecewise::{Block, CylPoint, FlowState, HittingRecord};
use serde::Serialize;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum EstimatorError {
    #[error("record too short: need at least {needed} hits, got {got}")]
    RecordTooShort { needed: usize, got: usize },
    #[error("malformed record: non-positive time difference at hit {index}")]
    NonPositiveGap { index: usize },
    #[error("step and horizon must be strictly positive")]
    BadQuadrature,
}

/// A convergent sequence of estimates: its terms, the final value, and the
/// gap between the last two terms as a convergence diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct SeqEstimate {
    pub values: Vec<f64>,
    pub final_value: f64,
    pub last_gap: f64,
}

impl SeqEstimate {
    fn from_values(values: Vec<f64>) -> Self {
        let n = values.len();
        let final_value = values[n - 1];
        let last_gap = if n >= 2 {
            (values[n - 1] - values[n - 2]).abs()
        } else {
            0.0
        };
        Self {
            values,
            final_value,
            last_gap,
        }
    }
}

/// Quotient estimates of the contraction ratios and (optionally) of the
/// normalized spin averages.
#[derive(Debug, Clone, Serialize)]
pub struct RatioEstimates {
    /// `(t_{2i+2}-t_{2i+1})/(t_{2i+1}-t_{2i}) -> gamma1`
    pub gamma1_hat: SeqEstimate,
    /// `(t_{2i+1}-t_{2i})/(t_{2i}-t_{2i-1}) -> gamma2`
    pub gamma2_hat: SeqEstimate,
    /// `(t_{2i+2}-t_{2i})/(t_{2i}-t_{2i-2}) -> delta`
    pub delta_hat: SeqEstimate,
    /// `(theta_{2i+2}-c*theta_{2i})/(t_{2i+2}-t_{2i}) -> (omega1+gamma1*omega2)/(gamma1+1)`
    pub angular1_hat: Option<SeqEstimate>,
    /// `(theta_{2i+1}-a*theta_{2i-1})/(t_{2i+1}-t_{2i-1}) -> (omega2+gamma2*omega1)/(gamma2+1)`
    pub angular2_hat: Option<SeqEstimate>,
}

fn gap(rec: &HittingRecord, hi: usize, lo: usize) -> Result<f64, EstimatorError> {
    let d = rec.t[hi] - rec.t[lo];
    if d <= 0.0 {
        return Err(EstimatorError::NonPositiveGap { index: hi });
    }
    Ok(d)
}

/// Ratio estimates of `gamma1`, `gamma2`, `delta` from consecutive leg
/// times. Needs at least 6 hits.
pub fn ratio_limits(rec: &HittingRecord) -> Result<RatioEstimates, EstimatorError> {
    let n = rec.len();
    if n < 6 {
        return Err(EstimatorError::RecordTooShort { needed: 6, got: n });
    }
    let mut g1 = Vec::new();
    let mut g2 = Vec::new();
    let mut dl = Vec::new();
    let mut i = 0usize;
    while 2 * i + 2 < n {
        g1.push(gap(rec, 2 * i + 2, 2 * i + 1)? / gap(rec, 2 * i + 1, 2 * i)?);
        if i >= 1 {
            g2.push(gap(rec, 2 * i + 1, 2 * i)? / gap(rec, 2 * i, 2 * i - 1)?);
            dl.push(gap(rec, 2 * i + 2, 2 * i)? / gap(rec, 2 * i, 2 * i - 2)?);
        }
        i += 1;
    }
    Ok(RatioEstimates {
        gamma1_hat: SeqEstimate::from_values(g1),
        gamma2_hat: SeqEstimate::from_values(g2),
        delta_hat: SeqEstimate::from_values(dl),
        angular1_hat: None,
        angular2_hat: None,
    })
}

/// Spin-average estimates from the unwrapped hit angles. The angular
/// multipliers `a`, `c` are inputs, not estimated: they belong to the
/// transition maps and are presumed known.
///
/// The even-index sequence telescopes exactly only when `a = 1` and the
/// odd-index one only when `c = 1`; away from that the limits acquire a
/// multiplier-dependent factor (the sequences are still reported).
pub fn angular_limits(
    rec: &HittingRecord,
    a: f64,
    c: f64,
) -> Result<(SeqEstimate, SeqEstimate), EstimatorError> {
    let n = rec.len();
    if n < 6 {
        return Err(EstimatorError::RecordTooShort { needed: 6, got: n });
    }
    let th: Vec<f64> = rec.thetas().collect();
    let mut even = Vec::new();
    let mut odd = Vec::new();
    let mut i = 0usize;
    while 2 * i + 2 < n {
        even.push((th[2 * i + 2] - c * th[2 * i]) / gap(rec, 2 * i + 2, 2 * i)?);
        if i >= 1 {
            odd.push((th[2 * i + 1] - a * th[2 * i - 1]) / gap(rec, 2 * i + 1, 2 * i - 1)?);
        }
        i += 1;
    }
    Ok((
        SeqEstimate::from_values(even),
        SeqEstimate::from_values(odd),
    ))
}

/// Ratio estimates computed on transit-corrected gaps: each section gap has
/// the record's measured transit leg subtracted, leaving the block-dwell
/// durations.
///
/// The limits are the same as [`ratio_limits`]'s — the dwells satisfy
/// `D_{2i+1} - gamma2*D_{2i} = -(1/E1) log d` exactly — but the transit-time
/// constants drop out of the convergence error. On flows measured through
/// real cross sections the two transit legs can be strongly unequal (here
/// the rotation lift's clock factor stretches one connection against the
/// other), which pins the raw gap quotients far from their limits for as
/// long as the dwells stay moderate; the dwell quotients are free of that
/// offset.
pub fn dwell_ratio_limits(rec: &HittingRecord) -> Result<RatioEstimates, EstimatorError> {
    let n = rec.len();
    if n < 6 {
        return Err(EstimatorError::RecordTooShort { needed: 6, got: n });
    }
    let dwell = |hi: usize| -> Result<f64, EstimatorError> {
        let d = rec.t[hi] - rec.t[hi - 1] - rec.legs[hi];
        if d <= 0.0 {
            return Err(EstimatorError::NonPositiveGap { index: hi });
        }
        Ok(d)
    };
    let mut g1 = Vec::new();
    let mut g2 = Vec::new();
    let mut dl = Vec::new();
    let mut i = 0usize;
    while 2 * i + 2 < n {
        g1.push(dwell(2 * i + 2)? / dwell(2 * i + 1)?);
        if i >= 1 {
            g2.push(dwell(2 * i + 1)? / dwell(2 * i)?);
            dl.push((dwell(2 * i + 2)? + dwell(2 * i + 1)?) / (dwell(2 * i)? + dwell(2 * i - 1)?));
        }
        i += 1;
    }
    Ok(RatioEstimates {
        gamma1_hat: SeqEstimate::from_values(g1),
        gamma2_hat: SeqEstimate::from_values(g2),
        delta_hat: SeqEstimate::from_values(dl),
        angular1_hat: None,
        angular2_hat: None,
    })
}

/// Fill the angular fields of a [`RatioEstimates`].
pub fn ratio_limits_with_angular(
    rec: &HittingRecord,
    a: f64,
    c: f64,
) -> Result<RatioEstimates, EstimatorError> {
    let mut r = ratio_limits(rec)?;
    let (even, odd) = angular_limits(rec, a, c)?;
    r.angular1_hat = Some(even);
    r.angular2_hat = Some(odd);
    Ok(r)
}

/// Estimates of the two log-combination invariants and of their contracted
/// combination, evaluated at every available index. On exact piecewise
/// records the three sequences are constant.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantEstimates {
    /// `(t_{2i+1}-t_{2i}) - gamma2*(t_{2i}-t_{2i-1}) -> logcomb1`
    pub logcomb1_hat: SeqEstimate,
    /// `(t_{2i+2}-t_{2i+1}) - gamma1*(t_{2i+1}-t_{2i}) -> logcomb2`
    pub logcomb2_hat: SeqEstimate,
    /// `(t_{2i+2}-t_{2i}) - delta*(t_{2i}-t_{2i-2}) -> combo`
    pub combo_hat: SeqEstimate,
}

impl InvariantEstimates {
    /// The weighted-sum consistency value
    /// `(1+gamma1)*logcomb1_hat + (1+gamma2)*logcomb2_hat`, which must agree
    /// with `combo_hat`.
    pub fn combo_from_parts(&self, gamma1: f64, gamma2: f64) -> f64 {
        (1.0 + gamma1) * self.logcomb1_hat.final_value
            + (1.0 + gamma2) * self.logcomb2_hat.final_value
    }
}

/// Evaluate the invariant estimates with supplied contraction ratios
/// (either the true values or final ratio estimates).
pub fn invariant_estimates(
    rec: &HittingRecord,
    gamma1: f64,
    gamma2: f64,
    delta: f64,
) -> Result<InvariantEstimates, EstimatorError> {
    let n = rec.len();
    if n < 5 {
        return Err(EstimatorError::RecordTooShort { needed: 5, got: n });
    }
    let mut l1 = Vec::new();
    let mut l2 = Vec::new();
    let mut co = Vec::new();
    let mut i = 1usize;
    while 2 * i + 2 < n {
        l1.push((rec.t[2 * i + 1] - rec.t[2 * i]) - gamma2 * (rec.t[2 * i] - rec.t[2 * i - 1]));
        l2.push((rec.t[2 * i + 2] - rec.t[2 * i + 1]) - gamma1 * (rec.t[2 * i + 1] - rec.t[2 * i]));
        co.push((rec.t[2 * i + 2] - rec.t[2 * i]) - delta * (rec.t[2 * i] - rec.t[2 * i - 2]));
        i += 1;
    }
    Ok(InvariantEstimates {
        logcomb1_hat: SeqEstimate::from_values(l1),
        logcomb2_hat: SeqEstimate::from_values(l2),
        combo_hat: SeqEstimate::from_values(co),
    })
}

/// Same, taking the ratios from a [`RatioEstimates`].
pub fn invariant_estimates_from_ratios(
    rec: &HittingRecord,
    ratios: &RatioEstimates,
) -> Result<InvariantEstimates, EstimatorError> {
    invariant_estimates(
        rec,
        ratios.gamma1_hat.final_value,
        ratios.gamma2_hat.final_value,
        ratios.delta_hat.final_value,
    )
}

/// Residuals of the three exact leg-time identities against the constants
/// predicted by the parameters, using the per-leg transit times stored in the
/// record. Index `i` starts at 1; both raw residuals and residuals scaled by
/// the magnitude of the terms involved are reported (the raw difference of
/// two huge, nearly equal time gaps is meaningless below their floating-point
/// resolution).
#[derive(Debug, Clone, Serialize)]
pub struct IdentityResiduals {
    pub start_index: usize,
    pub absolute: Vec<[f64; 3]>,
    pub relative: Vec<[f64; 3]>,
}

pub fn identity_residuals(
    rec: &HittingRecord,
    derived: &DerivedConstants,
    trans: &TransitionParams,
) -> Result<IdentityResiduals, EstimatorError> {
    let n = rec.len();
    if n < 5 {
        return Err(EstimatorError::RecordTooShort { needed: 5, got: n });
    }
    let g1 = derived.gamma1;
    let g2 = derived.gamma2;
    // tau_j = (1+gamma_j)/E_j
    let e1 = (1.0 + g1) / derived.tau1;
    let e2 = (1.0 + g2) / derived.tau2;
    let ln_d = trans.d.ln();
    let ln_b = trans.b.ln();

    let mut absolute = Vec::new();
    let mut relative = Vec::new();
    let mut i = 1usize;
    while 2 * i + 2 < n {
        let d_odd = rec.t[2 * i + 1] - rec.t[2 * i];
        let d_even_prev = rec.t[2 * i] - rec.t[2 * i - 1];
        let d_even = rec.t[2 * i + 2] - rec.t[2 * i + 1];
        let big = rec.t[2 * i + 2] - rec.t[2 * i];
        let big_prev = rec.t[2 * i] - rec.t[2 * i - 2];

        let lhs1 = d_odd - g2 * d_even_prev;
        let rhs1 = -ln_d / e1 + (rec.legs[2 * i + 1] - g2 * rec.legs[2 * i]);
        let lhs2 = d_even - g1 * d_odd;
        let rhs2 = -ln_b / e2 + (rec.legs[2 * i + 2] - g1 * rec.legs[2 * i + 1]);
        let lhs3 = big - derived.delta * big_prev;
        let rhs3 = -derived.tau1 * ln_d - derived.tau2 * ln_b
            + (rec.legs[2 * i + 2] + rec.legs[2 * i + 1])
            - derived.delta * (rec.legs[2 * i] + rec.legs[2 * i - 1]);

        let r = [lhs1 - rhs1, lhs2 - rhs2, lhs3 - rhs3];
        let scales = [
            d_odd.abs().max(g2 * d_even_prev.abs()).max(1.0),
            d_even.abs().max(g1 * d_odd.abs()).max(1.0),
            big.abs().max(derived.delta * big_prev.abs()).max(1.0),
        ];
        absolute.push(r);
        relative.push([r[0] / scales[0], r[1] / scales[1], r[2] / scales[2]]);
        i += 1;
    }
    Ok(IdentityResiduals {
        start_index: 1,
        absolute,
        relative,
    })
}

/// Running time-averages `(1/T) ∫_0^T G dt` of an observable along a sampled
/// trajectory, by the trapezoid rule at a fixed step.
#[derive(Debug, Clone, Serialize)]
pub struct BirkhoffSeries {
    pub times: Vec<f64>,
    pub averages: Vec<f64>,
}

impl BirkhoffSeries {
    /// `max - min` of the averages over the tail of the series starting at
    /// the given fraction of the horizon. A positive value that does not
    /// shrink with the horizon is the signature of non-convergent averages.
    pub fn oscillation_over(&self, from_fraction: f64) -> f64 {
        let start = ((self.averages.len() as f64) * from_fraction) as usize;
        let tail = &self.averages[start.min(self.averages.len() - 1)..];
        let max = tail.iter().cloned().fold(f64::MIN, f64::max);
        let min = tail.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,average\n");
        for (t, a) in self.times.iter().zip(&self.averages) {
            out.push_str(&format!("{t},{a}\n"));
        }
        out
    }
}

/// Trapezoid running averages of `observable(sampler(t))` on `[0, horizon]`.
pub fn birkhoff_series<S>(
    sampler: impl Fn(f64) -> S,
    observable: impl Fn(&S) -> f64,
    horizon: f64,
    step: f64,
) -> Result<BirkhoffSeries, EstimatorError> {
    if !(step > 0.0) || !(horizon > 0.0) || !step.is_finite() || !horizon.is_finite() {
        return Err(EstimatorError::BadQuadrature);
    }
    let n = (horizon / step).floor() as usize;
    if n == 0 {
        return Err(EstimatorError::BadQuadrature);
    }
    let mut times = Vec::with_capacity(n);
    let mut averages = Vec::with_capacity(n);
    let mut integral = 0.0;
    let mut prev = observable(&sampler(0.0));
    for k in 1..=n {
        let t = k as f64 * step;
        let cur = observable(&sampler(t));
        integral += 0.5 * step * (prev + cur);
        prev = cur;
        times.push(t);
        averages.push(integral / t);
    }
    Ok(BirkhoffSeries { times, averages })
}

/// Smooth bump supported on one block, peaking at its periodic orbit:
/// `(1-(k/eps)^2)^2 (1-(z/eps)^2)^2` inside the block, zero elsewhere.
/// Range `[0, 1]`.
pub fn block_bump(block: Block, radius: f64, eps: f64) -> impl Fn(&FlowState) -> f64 {
    move |state| match state {
        FlowState::Inside(CylPoint {
            rho,
            z,
            block: b,
            ..
        }) if *b == block => {
            let u = ((rho - radius) / eps).clamp(-1.0, 1.0);
            let w = (z / eps).clamp(-1.0, 1.0);
            (1.0 - u * u).powi(2) * (1.0 - w * w).powi(2)
        }
        _ => 0.0,
    }
}

/// Flat record of the final estimates, for machine-readable reports.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub gamma1_hat: f64,
    pub gamma1_gap: f64,
    pub gamma2_hat: f64,
    pub gamma2_gap: f64,
    pub delta_hat: f64,
    pub delta_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angular1_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angular1_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angular2_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angular2_gap: Option<f64>,
    pub logcomb1_hat: f64,
    pub logcomb1_gap: f64,
    pub logcomb2_hat: f64,
    pub logcomb2_gap: f64,
    pub combo_hat: f64,
    pub combo_gap: f64,
}

impl EstimateReport {
    pub fn new(ratios: &RatioEstimates, invariants: &InvariantEstimates) -> Self {
        Self {
            gamma1_hat: ratios.gamma1_hat.final_value,
            gamma1_gap: ratios.gamma1_hat.last_gap,
            gamma2_hat: ratios.gamma2_hat.final_value,
            gamma2_gap: ratios.gamma2_hat.last_gap,
            delta_hat: ratios.delta_hat.final_value,
            delta_gap: ratios.delta_hat.last_gap,
            angular1_hat: ratios.angular1_hat.as_ref().map(|s| s.final_value),
            angular1_gap: ratios.angular1_hat.as_ref().map(|s| s.last_gap),
            angular2_hat: ratios.angular2_hat.as_ref().map(|s| s.final_value),
            angular2_gap: ratios.angular2_hat.as_ref().map(|s| s.last_gap),
            logcomb1_hat: invariants.logcomb1_hat.final_value,
            logcomb1_gap: invariants.logcomb1_hat.last_gap,
            logcomb2_hat: invariants.logcomb2_hat.final_value,
            logcomb2_gap: invariants.logcomb2_hat.last_gap,
            combo_hat: invariants.combo_hat.final_value,
            combo_gap: invariants.combo_hat.last_gap,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_constants, invariants_closed_form, CycleParams, TransitionParams};
    use crate::piecewise::{hitting_sequence, orbit_sampler, PiecewiseSampler};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn record(
        cycle: &CycleParams,
        trans: &TransitionParams,
        off0: f64,
        theta0: f64,
        legs: usize,
    ) -> HittingRecord {
        let derived = derive_constants(cycle);
        let p0 = CylPoint::new(derived.r2 + off0, theta0, cycle.eps, Block::Two);
        hitting_sequence(&p0, legs, cycle, trans, &derived).unwrap()
    }

    fn workhorse() -> (CycleParams, TransitionParams) {
        (
            CycleParams::new(1.0, 3.0, 2.0, 4.0, 1.0, 2.0, TAU, TAU),
            TransitionParams::new(1.0, 0.5, 1.0, 0.5, 0.1, 0.2),
        )
    }

    #[test]
    fn identity_residuals_vanish_on_exact_records() {
        let (cycle, trans) = workhorse();
        let derived = derive_constants(&cycle);
        let rec = record(&cycle, &trans, 0.3, 0.7, 24);
        let res = identity_residuals(&rec, &derived, &trans).unwrap();
        for row in &res.relative {
            for r in row {
                assert!(r.abs() <= 1e-12, "residual {r}");
            }
        }
    }

    #[test]
    fn identity_constants_vanish_for_trivial_multipliers() {
        let cycle = CycleParams::new(1.0, 3.0, 2.0, 4.0, 1.0, 2.0, TAU, TAU);
        let trans = TransitionParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 0.0);
        let inv = invariants_closed_form(&cycle, &trans);
        assert_eq!(inv.logcomb1, 0.0);
        assert_eq!(inv.logcomb2, 0.0);
        assert_eq!(inv.combo(), 0.0);
        // and the measured identity values agree
        let rec = record(&cycle, &trans, 0.3, 0.0, 16);
        let est = invariant_estimates(&rec, 1.5, 4.0, 6.0).unwrap();
        assert!(est.logcomb1_hat.final_value.abs() <= 1e-10);
        assert!(est.logcomb2_hat.final_value.abs() <= 1e-10);
        assert!(est.combo_hat.final_value.abs() <= 1e-9);
    }

    #[test]
    fn ratio_limits_converge_to_the_derived_constants() {
        let (cycle, trans) = workhorse();
        let rec = record(&cycle, &trans, 0.3, 0.0, 60);
        let r = ratio_limits(&rec).unwrap();
        assert_relative_eq!(r.gamma1_hat.final_value, 1.5, epsilon = 1e-6);
        assert_relative_eq!(r.gamma2_hat.final_value, 4.0, epsilon = 1e-6);
        assert_relative_eq!(r.delta_hat.final_value, 6.0, epsilon = 1e-6);
    }

    #[test]
    fn symmetric_systems_have_interleaved_gamma_sequences() {
        // With E1=E2, C1=C2, s1=s2, b=d every leg obeys one and the same
        // recursion, so the gamma1 and gamma2 quotient sequences are the odd
        // and even subsequences of a single consecutive-leg ratio sequence:
        // each gamma1 value is bracketed by its gamma2 neighbors, and both
        // converge to the common gamma. (An asymmetric system fails this
        // immediately: the two limits differ.)
        let cycle = CycleParams::new(1.0, 2.2, 1.0, 2.2, 1.0, 1.0, TAU, TAU);
        let trans = TransitionParams::new(1.0, 0.6, 1.0, 0.6, 0.3, 0.3);
        let rec = record(&cycle, &trans, 0.4, 0.0, 30);
        let r = ratio_limits(&rec).unwrap();
        let g1 = &r.gamma1_hat.values;
        let g2 = &r.gamma2_hat.values;
        // gamma1[i] is the leg ratio between the gamma2 values at i and i+1
        for i in 0..g2.len() - 1 {
            let lo = g2[i].min(g2[i + 1]) - 1e-12;
            let hi = g2[i].max(g2[i + 1]) + 1e-12;
            assert!(
                (lo..=hi).contains(&g1[i + 1]),
                "gamma1[{}] = {} not bracketed by ({}, {})",
                i + 1,
                g1[i + 1],
                g2[i],
                g2[i + 1]
            );
        }
        assert_relative_eq!(
            r.gamma1_hat.final_value,
            r.gamma2_hat.final_value,
            epsilon = 1e-9
        );
    }

    #[test]
    fn equal_angular_speeds_collapse_both_spin_limits() {
        let cycle = CycleParams::new(1.0, 3.0, 2.0, 4.0, 1.7, 1.7, TAU, TAU);
        let trans = TransitionParams::new(1.0, 0.5, 1.0, 0.5, 0.1, 0.2);
        let rec = record(&cycle, &trans, 0.3, 0.4, 60);
        let (even, odd) = angular_limits(&rec, trans.a, trans.c).unwrap();
        assert_relative_eq!(even.final_value, 1.7, epsilon = 1e-6);
        assert_relative_eq!(odd.final_value, 1.7, epsilon = 1e-6);
    }

    #[test]
    fn spin_limits_on_the_workhorse_system() {
        // (omega1+gamma1*omega2)/(gamma1+1) = 4/2.5, (omega2+gamma2*omega1)/(gamma2+1) = 6/5.
        let (cycle, trans) = workhorse();
        let rec = record(&cycle, &trans, 0.3, 0.4, 60);
        let (even, odd) = angular_limits(&rec, trans.a, trans.c).unwrap();
        assert_relative_eq!(even.final_value, 1.6, epsilon = 1e-6);
        assert_relative_eq!(odd.final_value, 1.2, epsilon = 1e-6);
    }

    #[test]
    fn estimates_match_closed_form_invariants() {
        // Independent route to the closed-form log-combinations: measure them
        // from a simulated record. On the exact model the estimate sequences
        // are constant, so index 5 already equals the limit.
        let cycle = CycleParams::new(1.0, 3.0, 2.0, 4.0, 1.0, 2.0, TAU, TAU);
        let trans =
            TransitionParams::new(1.0, (-2.0f64).exp(), 1.0, (-1.0f64).exp(), 1.0, 0.5);
        let derived = derive_constants(&cycle);
        let inv = invariants_closed_form(&cycle, &trans);
        let rec = record(&cycle, &trans, 0.3, 0.0, 14);
        let est = invariant_estimates(&rec, derived.gamma1, derived.gamma2, derived.delta).unwrap();
        for v in &est.logcomb1_hat.values {
            assert_relative_eq!(*v, inv.logcomb1, epsilon = 1e-9);
        }
        for v in &est.logcomb2_hat.values {
            assert_relative_eq!(*v, inv.logcomb2, epsilon = 1e-9);
        }
        assert_relative_eq!(est.combo_hat.final_value, inv.combo(), epsilon = 1e-9);
        // the contracted combination equals the weighted sum of the parts
        assert_relative_eq!(
            est.combo_hat.final_value,
            est.combo_from_parts(derived.gamma1, derived.gamma2),
            epsilon = 1e-9
        );
    }

    #[test]
    fn ratio_gaps_shrink_geometrically() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let e1 = rng.gen_range(0.6..1.8);
            let e2 = rng.gen_range(0.6..1.8);
            let cycle = CycleParams::new(
                e1,
                rng.gen_range(1.5..2.2) * e1,
                e2,
                rng.gen_range(1.5..2.2) * e2,
                1.0,
                1.0,
                TAU,
                TAU,
            );
            let trans = TransitionParams::new(
                1.0,
                rng.gen_range(0.3..0.9),
                1.0,
                rng.gen_range(0.3..0.9),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
            );
            let rec = record(&cycle, &trans, rng.gen_range(0.05..0.5), 0.0, 30);
            let r = ratio_limits(&rec).unwrap();
            let vals = &r.delta_hat.values;
            for i in 2..vals.len() {
                let g_prev = (vals[i - 1] - vals[i - 2]).abs();
                let g = (vals[i] - vals[i - 1]).abs();
                if g_prev < 1e-11 {
                    break; // at the floating-point floor
                }
                assert!(
                    g <= g_prev / 1.2,
                    "gap did not shrink geometrically: {g_prev} -> {g}"
                );
            }
        }
    }

    #[test]
    fn angular_limits_do_not_depend_on_the_initial_angle() {
        let (cycle, trans) = workhorse();
        let rec_a = record(&cycle, &trans, 0.3, 0.0, 60);
        let rec_b = record(&cycle, &trans, 0.3, 2.9, 60);
        let (even_a, odd_a) = angular_limits(&rec_a, trans.a, trans.c).unwrap();
        let (even_b, odd_b) = angular_limits(&rec_b, trans.a, trans.c).unwrap();
        assert_relative_eq!(even_a.final_value, even_b.final_value, epsilon = 1e-6);
        assert_relative_eq!(odd_a.final_value, odd_b.final_value, epsilon = 1e-6);
        // with multipliers != 1 the theta0 dependence decays like (ac/delta)^i
        let trans2 = TransitionParams::new(1.4, 0.5, 0.8, 0.5, 0.1, 0.2);
        let rec_c = record(&cycle, &trans2, 0.3, 0.0, 60);
        let rec_d = record(&cycle, &trans2, 0.3, 2.9, 60);
        let (even_c, _) = angular_limits(&rec_c, trans2.a, trans2.c).unwrap();
        let (even_d, _) = angular_limits(&rec_d, trans2.a, trans2.c).unwrap();
        assert_relative_eq!(even_c.final_value, even_d.final_value, epsilon = 1e-6);
    }

    #[test]
    fn short_records_are_rejected() {
        let (cycle, trans) = workhorse();
        let rec = record(&cycle, &trans, 0.3, 0.0, 3);
        assert!(matches!(
            ratio_limits(&rec),
            Err(EstimatorError::RecordTooShort { .. })
        ));
    }

    #[test]
    fn constant_observable_averages_to_itself() {
        let series = birkhoff_series(|_t| (), |_s| 1.0, 10.0, 0.01).unwrap();
        for a in &series.averages {
            assert_relative_eq!(*a, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bad_quadrature_parameters_are_rejected() {
        assert!(birkhoff_series(|_t| (), |_s| 1.0, 10.0, 0.0).is_err());
        assert!(birkhoff_series(|_t| (), |_s| 1.0, -1.0, 0.1).is_err());
    }

    #[test]
    fn averages_over_the_periodic_orbit_are_flat() {
        let (cycle, _) = workhorse();
        let derived = derive_constants(&cycle);
        let sampler = orbit_sampler(Block::One, 0.3, &cycle, &derived);
        let g = block_bump(Block::One, derived.r1, cycle.eps);
        let series = birkhoff_series(sampler, g, 200.0, 0.05).unwrap();
        assert!(series.oscillation_over(0.0) <= 1e-12);
    }

    #[test]
    fn averages_along_an_attracted_orbit_keep_oscillating() {
        // delta = 2 with symmetric legs: the running mean of a block-1 bump
        // swings between visits for as long as the record lasts.
        let s = 2.0f64.sqrt();
        let cycle = CycleParams::new(1.0, s, 1.0, s, 1.0, 1.3, TAU, TAU);
        let trans = TransitionParams::new(1.0, 0.6, 1.0, 0.6, 0.2, 0.3);
        let derived = derive_constants(&cycle);
        let p0 = CylPoint::new(derived.r2 + 0.5, 0.0, cycle.eps, Block::Two);
        let sampler = PiecewiseSampler::new(&p0, 34, &cycle, &trans, &derived).unwrap();
        let g = block_bump(Block::One, derived.r1, cycle.eps);
        let horizon = sampler.horizon();
        let step = horizon / 150_000.0;
        let series = birkhoff_series(|t| sampler.state(t), g, horizon, step).unwrap();
        assert!(
            series.oscillation_over(0.5) >= 0.1,
            "oscillation too small: {}",
            series.oscillation_over(0.5)
        );
    }
}
