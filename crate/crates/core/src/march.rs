//! One-cell transfer along a characteristic, shared by the transient
//! integrator and the steady-state age march.
//!
//! Susceptibles are depleted with the exact exponential of the
//! trapezoid-averaged force of infection. The linear chain `E → Q → I` is
//! advanced with the trapezoid (Crank–Nicolson) rule, so every outflow is
//! exactly the trapezoid integral of `rate · compartment` and the amount
//! leaving one compartment is exactly the amount entering the next. Mass is
//! therefore conserved to rounding, all compartments stay nonnegative while
//! `rate · Δa ≤ 2`, and for a fixed force of infection the cell map is
//! linear in the upwind state.

use crate::transient::EpiParams;

/// `(1 - e^{-x}) / x`, continuous at 0.
pub(crate) fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// Trapezoid step `y_k = keep · y_{k-1} + gain · source` for `y' = -rate y + f`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Decay {
    pub keep: f64,
    pub gain: f64,
}

impl Decay {
    fn new(rate: f64, dx: f64) -> Self {
        let half = 0.5 * rate * dx;
        Self { keep: (1.0 - half) / (1.0 + half), gain: 1.0 / (1.0 + half) }
    }
}

/// `(e, q, i)` at one node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Chain {
    pub e: f64,
    pub q: f64,
    pub i: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CellMap {
    pub dx: f64,
    pub exposed: Decay,
    pub quarantine: Decay,
    pub infected: Decay,
    /// `q₁ Δa / 2`, `μ₁ Δa / 2`, `γ₁ Δa / 2`.
    pub to_quarantine: f64,
    pub to_infected_from_e: f64,
    pub to_infected_from_q: f64,
    /// `γ Δa / 2`, `γ₂ Δa / 2`.
    pub recover_from_i: f64,
    pub recover_from_q: f64,
}

impl CellMap {
    pub fn new(p: &EpiParams, dx: f64) -> Self {
        Self {
            dx,
            exposed: Decay::new(p.mu1 + p.q1, dx),
            quarantine: Decay::new(p.gamma1 + p.gamma2, dx),
            infected: Decay::new(p.gamma, dx),
            to_quarantine: 0.5 * p.q1 * dx,
            to_infected_from_e: 0.5 * p.mu1 * dx,
            to_infected_from_q: 0.5 * p.gamma1 * dx,
            recover_from_i: 0.5 * p.gamma * dx,
            recover_from_q: 0.5 * p.gamma2 * dx,
        }
    }

    /// Advances the chain over one cell given the amount `inflow` of newly
    /// exposed mass entering during the cell.
    #[inline]
    pub fn advance(&self, prev: Chain, inflow: f64) -> Chain {
        let e = self.exposed.keep * prev.e + self.exposed.gain * inflow;
        let e_sum = prev.e + e;
        let q = self.quarantine.keep * prev.q + self.quarantine.gain * self.to_quarantine * e_sum;
        let i = self.infected.keep * prev.i
            + self.infected.gain * (self.to_infected_from_e * e_sum + self.to_infected_from_q * (prev.q + q));
        Chain { e, q, i }
    }

    /// Mass entering `R` over the cell, for residual checks.
    #[inline]
    pub fn recovered_inflow(&self, prev: Chain, next: Chain) -> f64 {
        self.recover_from_i * (prev.i + next.i) + self.recover_from_q * (prev.q + next.q)
    }

    /// Integrated force of infection over a cell, trapezoid in age.
    #[inline]
    pub fn exposure(&self, phi_prev: f64, phi_next: f64) -> f64 {
        0.5 * self.dx * (phi_prev + phi_next)
    }
}
