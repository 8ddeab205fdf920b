//! Cost and prevalence kernels of the vaccination problem at a fixed force
//! of infection amplitude `h`.
//!
//! Vaccination removes susceptible and exposed individuals alike, so with
//! `D(a) = 1 - ∫₀^a ψ` the vaccinated profiles are `s = D s₀` and `e = D e₀`
//! while `i` solves `i' = μ₁ D e₀ - γ i`. Each functional `∫ w U i` is then
//! affine in the atom weights of `ψ`, with a kernel that is the adjoint of
//! the infected-class march. Atoms between nodes are split onto the two
//! neighbouring nodes in proportion to their distance, which makes linear
//! interpolation of the node kernels exact.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::policy::PsiMeasure;
use super::CostWeights;
use crate::demography::Demography;
use crate::error::{Error, Result};
use crate::grid::{integrate, AgeGrid, Profile};
use crate::march::{phi1, Chain};
use crate::steady::SteadyState;
use crate::transient::EpiParams;

/// Relative tolerance of the linearization check.
pub const KERNEL_TOL: f64 = 1e-6;
const KERNEL_CHECK_ATOMS: usize = 20;
const KERNEL_CHECK_SEED: u64 = 0x5e91_7a11;

#[derive(Debug, Clone, PartialEq)]
pub struct VaccKernels {
    /// Cost density of vaccinating at age `a`.
    pub c1: Profile,
    /// Reduction in weighted prevalence per unit `ψ` mass at age `a`.
    pub f1: Profile,
    /// Reduction in the force of infection amplitude per unit `ψ` mass.
    pub h1: Profile,
    /// Weighted prevalence without vaccination.
    pub f0: f64,
    /// Force of infection amplitude produced without vaccination.
    pub h0: f64,
    /// Amplitude the kernels were built at.
    pub h: f64,
}

/// Values of the four functionals at a `ψ` measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyValue {
    pub cost: f64,
    pub f: f64,
    pub h: f64,
    pub q: f64,
}

/// Spreads `ψ` atoms over grid nodes.
pub(crate) fn node_weights(psi: &PsiMeasure, grid: &AgeGrid) -> Vec<f64> {
    let mut w = vec![0.0; grid.len()];
    for &(age, mass) in psi.atoms() {
        let (k, theta) = grid.locate(age);
        w[k] += (1.0 - theta) * mass;
        if theta > 0.0 {
            w[k + 1] += theta * mass;
        }
    }
    w
}

struct Marched {
    s: Vec<f64>,
    e: Vec<f64>,
    i: Vec<f64>,
}

/// Quarantine-free steady march at amplitude `h` with node `ψ` weights
/// applied as multiplicative jumps of `s` and `e`.
fn vaccinated_march(h: f64, params: &EpiParams, weights: &[f64]) -> Marched {
    let grid = *params.grid();
    let n = grid.len();
    let map = params.cell_map();
    let k1 = params.k1.values();
    let mut s = vec![1.0; n];
    let mut e = vec![0.0; n];
    let mut i = vec![0.0; n];
    let mut unvaccinated = 1.0;
    let mut jump = |k: usize, s: &mut [f64], e: &mut [f64]| {
        if weights[k] > 0.0 {
            let after = (unvaccinated - weights[k]).max(0.0);
            let factor = if unvaccinated > 0.0 { after / unvaccinated } else { 0.0 };
            s[k] *= factor;
            e[k] *= factor;
            unvaccinated = after;
        }
    };
    jump(0, &mut s, &mut e);
    for k in 1..n {
        let kbar = 0.5 * (k1[k - 1] + k1[k]);
        let x = h * map.dx * kbar;
        let inflow = h * s[k - 1] * map.dx * kbar * phi1(x);
        s[k] = s[k - 1] * (-x).exp();
        let next = map.advance(Chain { e: e[k - 1], q: 0.0, i: i[k - 1] }, inflow);
        e[k] = next.e;
        i[k] = next.i;
        jump(k, &mut s, &mut e);
    }
    Marched { s, e, i }
}

/// Vaccinated steady profiles at a fixed amplitude `h`; `r` collects the
/// recovered and the vaccinated.
pub fn vaccinated_profiles(h: f64, params: &EpiParams, psi: &PsiMeasure) -> SteadyState {
    let qf = params.quarantine_free();
    let grid = *qf.grid();
    let m = vaccinated_march(h, &qf, &node_weights(psi, &grid));
    let r = (0..grid.len()).map(|k| (1.0 - m.s[k] - m.e[k] - m.i[k]).max(0.0)).collect();
    SteadyState {
        h,
        phi: qf.k1.scale(h),
        s: Profile::from_vec(grid, m.s),
        e: Profile::from_vec(grid, m.e),
        q: Profile::zeros(grid),
        i: Profile::from_vec(grid, m.i),
        r: Profile::from_vec(grid, r),
    }
}

/// Cell sums `S_k` with `∫ weight·i = Σ_k S_k D_k`, `D_k` the unvaccinated
/// fraction on cell `k`, turned into node kernels `K[m] = Σ_{k>m} S_k`.
fn adjoint_kernel(weight: &Profile, e0: &[f64], params: &EpiParams) -> Profile {
    let grid = *params.grid();
    let n = grid.len();
    let map = params.cell_map();
    let (keep, gain) = (map.infected.keep, map.infected.gain);
    let mut lam_next = 0.0;
    let mut cell = vec![0.0; n];
    for k in (1..n).rev() {
        let lam = grid.weight(k) * weight.get(k) + keep * lam_next;
        cell[k] = lam * gain * map.to_infected_from_e * (e0[k - 1] + e0[k]);
        lam_next = lam;
    }
    let mut kernel = vec![0.0; n];
    for m in (0..n - 1).rev() {
        kernel[m] = kernel[m + 1] + cell[m + 1];
    }
    Profile::from_vec(grid, kernel)
}

pub fn build_kernels(h: f64, params: &EpiParams, d: &Demography, w: &CostWeights) -> Result<VaccKernels> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::InvalidParams(format!("force of infection amplitude must be >= 0, got {h}")));
    }
    let qf = params.quarantine_free();
    qf.validate()?;
    let grid = *qf.grid();
    let u = d.stable_age_distribution();
    if *u.grid() != grid || *w.g1.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let base = vaccinated_march(h, &qf, &vec![0.0; grid.len()]);
    let s0 = Profile::from_vec(grid, base.s);
    let e0 = Profile::from_vec(grid, base.e);
    let i0 = Profile::from_vec(grid, base.i);

    let fu = &w.f * &u;
    let hu = &qf.k2 * &u;
    let kernels = VaccKernels {
        c1: &u * &(&(&w.g1 * &s0) + &(&w.g2 * &e0)),
        f1: adjoint_kernel(&fu, e0.values(), &qf),
        h1: adjoint_kernel(&hu, e0.values(), &qf),
        f0: integrate(&(&fu * &i0)),
        h0: integrate(&(&hu * &i0)),
        h,
    };
    check_linearization(&kernels, &qf, &fu, &hu)?;
    Ok(kernels)
}

/// Compares the affine prediction against a direct march for random
/// single-atom measures.
fn check_linearization(k: &VaccKernels, qf: &EpiParams, fu: &Profile, hu: &Profile) -> Result<()> {
    let grid = *qf.grid();
    let mut rng = StdRng::seed_from_u64(KERNEL_CHECK_SEED);
    for _ in 0..KERNEL_CHECK_ATOMS {
        let age = rng.random_range(0.0..grid.a_max());
        let weight = rng.random_range(0.0..1.0f64).max(1e-3);
        let psi = PsiMeasure::new(vec![(age, weight)])?;
        let m = vaccinated_march(k.h, qf, &node_weights(&psi, &grid));
        let i = Profile::from_vec(grid, m.i);
        let direct_f = integrate(&(fu * &i));
        let direct_h = integrate(&(hu * &i));
        let v = evaluate_policy(&psi, k);
        let miss_f = (direct_f - (k.f0 - v.f)).abs();
        let miss_h = (direct_h - (k.h0 - v.h)).abs();
        if miss_f > KERNEL_TOL * k.f0 || miss_h > KERNEL_TOL * k.h0 {
            let scale = |x: f64| if x > 0.0 { x } else { 1.0 };
            return Err(Error::KernelMismatch { age, mismatch: (miss_f / scale(k.f0)).max(miss_h / scale(k.h0)) });
        }
    }
    Ok(())
}

pub fn evaluate_policy(psi: &PsiMeasure, k: &VaccKernels) -> PolicyValue {
    let mut v = PolicyValue { cost: 0.0, f: 0.0, h: 0.0, q: 0.0 };
    for &(age, w) in psi.atoms() {
        v.cost += w * k.c1.interpolate(age);
        v.f += w * k.f1.interpolate(age);
        v.h += w * k.h1.interpolate(age);
        v.q += w;
    }
    v
}
