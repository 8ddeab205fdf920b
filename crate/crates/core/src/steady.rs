//! Steady states of the normalized system, the endemic consistency
//! function, and the basic reproduction number.
//!
//! Under separable mixing the steady force of infection is `φ(a) = h k₁(a)`
//! and the whole steady state is determined by the scalar `h`. With
//! `ĩ = i / h` the consistency condition `h = ∫ k₂ U i` becomes
//! `G(h) := ∫ k₂ U ĩ_h = 1`, and `G(0)` is the basic reproduction number.
//! Profiles are produced by the same cell transfer as the transient
//! integrator, so the transient fixed point and the steady state coincide
//! on the grid.

use std::io::Write;

use serde::Serialize;

use crate::demography::Demography;
use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::grid::{integrate, Profile};
use crate::march::{phi1, CellMap, Chain};
use crate::transient::EpiParams;

/// Tolerance on `|G(h*) - 1|` for the endemic root.
pub const ENDEMIC_TOL: f64 = 1e-10;
/// Upper limit for the bracketing search on `h`.
pub const H_BRACKET_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Amplitude of the force of infection, `φ(a) = h k₁(a)`.
    pub h: f64,
    pub phi: Profile,
    pub s: Profile,
    pub e: Profile,
    pub q: Profile,
    pub i: Profile,
    pub r: Profile,
}

impl SteadyState {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "a,s,e,q,i,r")?;
        for (k, a) in self.s.grid().nodes().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(a),
                fmt_f64(self.s.get(k)),
                fmt_f64(self.e.get(k)),
                fmt_f64(self.q.get(k)),
                fmt_f64(self.i.get(k)),
                fmt_f64(self.r.get(k)),
            )?;
        }
        Ok(())
    }
}

/// Reproduction number split by route into the infected class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct R0Breakdown {
    pub r0: f64,
    /// Direct route `E → I`.
    pub r1: f64,
    /// Quarantine route `E → Q → I`.
    pub r2: f64,
}

impl R0Breakdown {
    fn from_routes(r1: f64, r2: f64) -> Self {
        Self { r0: r1 + r2, r1, r2 }
    }
}

/// Result of marching the steady system with the chain scaled by `1/h`.
struct ScaledMarch {
    s: Vec<f64>,
    chain: Vec<Chain>,
}

fn scaled_march(h: f64, params: &EpiParams, map: &CellMap) -> ScaledMarch {
    let n = params.grid().len();
    let dx = map.dx;
    let k1 = params.k1.values();
    let mut s = Vec::with_capacity(n);
    let mut chain = Vec::with_capacity(n);
    s.push(1.0);
    chain.push(Chain::default());
    for k in 1..n {
        let kbar = 0.5 * (k1[k - 1] + k1[k]);
        let x = h * dx * kbar;
        let upwind = s[k - 1];
        s.push(upwind * (-x).exp());
        // exposure leaving s over the cell, per unit h
        let inflow = upwind * dx * kbar * phi1(x);
        chain.push(map.advance(chain[k - 1], inflow));
    }
    ScaledMarch { s, chain }
}

/// Steady profiles for a given amplitude `h ≥ 0`.
pub fn steady_profiles(h: f64, params: &EpiParams) -> SteadyState {
    let grid = *params.grid();
    let m = scaled_march(h, params, &params.cell_map());
    let e: Vec<f64> = m.chain.iter().map(|c| h * c.e).collect();
    let q: Vec<f64> = m.chain.iter().map(|c| h * c.q).collect();
    let i: Vec<f64> = m.chain.iter().map(|c| h * c.i).collect();
    let r: Vec<f64> = (0..grid.len()).map(|k| (1.0 - m.s[k] - e[k] - q[k] - i[k]).max(0.0)).collect();
    SteadyState {
        h,
        phi: params.k1.scale(h),
        s: Profile::from_vec(grid, m.s),
        e: Profile::from_vec(grid, e),
        q: Profile::from_vec(grid, q),
        i: Profile::from_vec(grid, i),
        r: Profile::from_vec(grid, r),
    }
}

fn weighted_infected(chain: &[Chain], kernel: &Profile) -> f64 {
    let grid = *kernel.grid();
    let i = Profile::from_vec(grid, chain.iter().map(|c| c.i).collect());
    integrate(&(kernel * &i))
}

/// `G(h) = ∫ k₂ U i_h / h`, evaluated without dividing by `h`.
pub fn characteristic_value(h: f64, params: &EpiParams, u: &Profile) -> f64 {
    let m = scaled_march(h, params, &params.cell_map());
    weighted_infected(&m.chain, &(&params.k2 * u))
}

/// Basic reproduction number `G(0)`, innermost integral over the youngest
/// age first.
pub fn r0_quadrature(params: &EpiParams, u: &Profile) -> f64 {
    characteristic_value(0.0, params, u)
}

/// `R₀` split into its direct and quarantine routes, both by quadrature.
pub fn r0_breakdown_quadrature(params: &EpiParams, u: &Profile) -> R0Breakdown {
    let kernel = &params.k2 * u;
    let full = params.cell_map();
    let direct = CellMap { to_infected_from_q: 0.0, ..full };
    let via_q = CellMap { to_infected_from_e: 0.0, ..full };
    let r1 = weighted_infected(&scaled_march(0.0, params, &direct).chain, &kernel);
    let r2 = weighted_infected(&scaled_march(0.0, params, &via_q).chain, &kernel);
    R0Breakdown::from_routes(r1, r2)
}

/// Weights `ζ_j` with `R₀ = Σ_j k₁(a_j) ζ_j`, accumulated from the oldest
/// age downwards. This is the exact transpose of the forward march, i.e.
/// the same iterated integral with the order of integration reversed.
pub fn r0_reversed_order_weights(params: &EpiParams, u: &Profile) -> Profile {
    let grid = *params.grid();
    let n = grid.len();
    let map = params.cell_map();
    let g = &params.k2 * u;
    let (ae, be) = (map.exposed.keep, map.exposed.gain);
    let (aq, bq) = (map.quarantine.keep, map.quarantine.gain);
    let (ai, bi) = (map.infected.keep, map.infected.gain);

    // adjoint variables for k = 1..=n-1; index n holds the zero terminal value
    let mut lam_i = vec![0.0; n + 1];
    let mut lam_q = vec![0.0; n + 1];
    let mut lam_e = vec![0.0; n + 1];
    for k in (1..n).rev() {
        lam_i[k] = grid.weight(k) * g.get(k) + ai * lam_i[k + 1];
        let di = lam_i[k] + lam_i[k + 1];
        lam_q[k] = bi * map.to_infected_from_q * di + aq * lam_q[k + 1];
        lam_e[k] = bq * map.to_quarantine * (lam_q[k] + lam_q[k + 1])
            + bi * map.to_infected_from_e * di
            + ae * lam_e[k + 1];
    }
    let half = 0.5 * map.dx * be;
    let zeta = (0..n)
        .map(|j| {
            let here = if j >= 1 { lam_e[j] } else { 0.0 };
            let next = if j + 1 < n { lam_e[j + 1] } else { 0.0 };
            half * (here + next)
        })
        .collect();
    Profile::from_vec(grid, zeta)
}

/// `R₀` evaluated in reversed integration order: outermost over the age of
/// the susceptible contact, innermost over the infective's age.
pub fn r0_reversed_order(params: &EpiParams, u: &Profile) -> f64 {
    let zeta = r0_reversed_order_weights(params, u);
    params.k1.values().iter().zip(zeta.values()).map(|(k, z)| k * z).sum()
}

/// Closed-form reproduction number for constant mortality `μ`, `k₁ ≡ 1`
/// and constant `k₂`.
pub fn r0_closed_form(mu: f64, gamma: f64, mu1: f64, q1: f64, gamma1: f64, gamma2: f64, k2: f64) -> Result<R0Breakdown> {
    if mu <= 0.0 {
        return Err(Error::DegenerateDemography);
    }
    for v in [gamma, mu1, q1, gamma1, gamma2, k2] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParams(format!("closed form needs nonnegative rates, got {v}")));
        }
    }
    let common = (mu + gamma) * (mu + mu1 + q1);
    let r1 = k2 * mu1 / common;
    let r2 = k2 * gamma1 * q1 / (common * (mu + gamma1 + gamma2));
    Ok(R0Breakdown::from_routes(r1, r2))
}

/// Endemic steady state, or `None` when `R₀ ≤ 1`.
pub fn solve_endemic(params: &EpiParams, u: &Profile) -> Result<Option<SteadyState>> {
    Ok(endemic_amplitude(params, u)?.map(|h| steady_profiles(h, params)))
}

/// Root `h*` of `G(h) = 1` by bisection, or `None` when `R₀ ≤ 1`.
pub fn endemic_amplitude(params: &EpiParams, u: &Profile) -> Result<Option<f64>> {
    let map = params.cell_map();
    let kernel = &params.k2 * u;
    let g = |h: f64| weighted_infected(&scaled_march(h, params, &map).chain, &kernel);

    if g(0.0) <= 1.0 {
        return Ok(None);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while g(hi) >= 1.0 {
        lo = hi;
        hi *= 2.0;
        if hi > H_BRACKET_LIMIT {
            return Err(Error::NoBracket { h_hi: hi });
        }
    }
    let mut best = (hi, (g(hi) - 1.0).abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        let resid = (gm - 1.0).abs();
        if resid < best.1 {
            best = (mid, resid);
        }
        if resid <= 1e-3 * ENDEMIC_TOL {
            break;
        }
        if gm > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(best.0))
}

/// Mean age at which a birth cohort is infected,
/// `∫ a φ s π / ∫ φ s π` with `π` the survival function.
pub fn average_age_of_infection(ss: &SteadyState, d: &Demography) -> Result<f64> {
    if ss.h <= 0.0 {
        return Err(Error::NoInfection);
    }
    let grid = *ss.s.grid();
    let rate = &(&ss.phi * &ss.s) * d.survival();
    let den = integrate(&rate);
    if den <= 0.0 {
        return Err(Error::NoInfection);
    }
    let ages = Profile::from_fn(grid, |a| a)?;
    Ok(integrate(&(&ages * &rate)) / den)
}
