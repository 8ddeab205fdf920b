//! Lyapunov weights and the decrease check `V̇ ≤ (R₀ - 1) ∫ k₂ i U`.
//!
//! The weights solve the backward problems
//!
//! ```text
//! α₃' = γ α₃ - k₂ U
//! α₂' = (γ₁ + γ₂) α₂ - γ₁ α₃
//! α₁' = (μ₁ + q₁) α₁ - q₁ α₂ - μ₁ α₃
//! ```
//!
//! with all three vanishing at the maximal age, so `V = ∫ (α₁ e + α₂ q + α₃ i)`
//! and `∫ k₁ α₁ = R₀`.

use std::io::Write;

use serde::Serialize;

use crate::grid::{discounted_tail_integral, integrate, Profile};
use crate::transient::{EpiParams, EpiState};

/// Slack on `ΔV/Δt` against the bound, absorbing time discretization error.
pub const DECREASE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovWeights {
    pub alpha1: Profile,
    pub alpha2: Profile,
    pub alpha3: Profile,
}

pub fn compute_weights(params: &EpiParams, u: &Profile) -> LyapunovWeights {
    let alpha3 = discounted_tail_integral(&(&params.k2 * u), params.gamma);
    let alpha2 = discounted_tail_integral(&alpha3.scale(params.gamma1), params.gamma1 + params.gamma2);
    let source = alpha2.zip_map(&alpha3, |a2, a3| params.q1 * a2 + params.mu1 * a3);
    let alpha1 = discounted_tail_integral(&source, params.mu1 + params.q1);
    LyapunovWeights { alpha1, alpha2, alpha3 }
}

pub fn evaluate_v(state: &EpiState, w: &LyapunovWeights) -> f64 {
    let density = w.alpha1.zip_map(&state.e, |a, e| a * e);
    let density = &density + &(&w.alpha2 * &state.q);
    let density = &density + &(&w.alpha3 * &state.i);
    integrate(&density)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovSample {
    pub t: f64,
    #[serde(rename = "V")]
    pub v: f64,
    /// `(R₀ - 1) ∫ k₂ i U` at time `t`.
    pub bound: f64,
}

pub fn sample(state: &EpiState, w: &LyapunovWeights, params: &EpiParams, u: &Profile, r0: f64) -> LyapunovSample {
    let pressure = integrate(&(&(&params.k2 * u) * &state.i));
    LyapunovSample { t: state.t, v: evaluate_v(state, w), bound: (r0 - 1.0) * pressure }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecreaseReport {
    pub r0: f64,
    /// Largest `ΔV/Δt - bound` over consecutive samples, floored at 0.
    pub max_violation: f64,
    pub pass: bool,
    pub samples: Vec<LyapunovSample>,
}

impl DecreaseReport {
    /// `ΔV/Δt` for each pair of consecutive samples.
    pub fn rates(&self) -> Vec<f64> {
        self.samples.windows(2).map(|p| (p[1].v - p[0].v) / (p[1].t - p[0].t)).collect()
    }

    /// Largest `V(t_{k+1}) - V(t_k)`.
    pub fn max_increase(&self) -> f64 {
        self.samples.windows(2).map(|p| p[1].v - p[0].v).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_json<W: Write>(&self, out: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(out, self)
    }
}

/// Compares the finite-difference `ΔV/Δt` with the bound averaged over
/// each sampling interval.
pub fn verify_samples(samples: Vec<LyapunovSample>, r0: f64) -> DecreaseReport {
    let mut max_violation: f64 = 0.0;
    for p in samples.windows(2) {
        let rate = (p[1].v - p[0].v) / (p[1].t - p[0].t);
        let bound = 0.5 * (p[0].bound + p[1].bound);
        max_violation = max_violation.max(rate - bound);
    }
    DecreaseReport { r0, max_violation, pass: max_violation <= DECREASE_TOL, samples }
}

pub fn verify_decrease(
    states: &[EpiState],
    w: &LyapunovWeights,
    params: &EpiParams,
    u: &Profile,
    r0: f64,
) -> DecreaseReport {
    let samples = states.iter().map(|s| sample(s, w, params, u, r0)).collect();
    verify_samples(samples, r0)
}
