//! Minimum-cost vaccination under a weighted-prevalence cap.
//!
//! With the kernels fixed, cost, prevalence reduction, mass and force of
//! infection reduction are all linear in the `ψ` node weights, so the
//! problem is a linear program over nonnegative node weights with at most
//! three constraint rows. A basic optimal solution therefore has at most
//! three atoms and the row duals are the Kuhn–Tucker multipliers.

use log::debug;
use serde::Serialize;

use super::kernels::{build_kernels, evaluate_policy, PolicyValue, VaccKernels};
use super::policy::{psi_to_policy, Atom, PsiMeasure, VaccinationPolicy};
use super::simplex::{self, LpError};
use super::CostWeights;
use crate::demography::Demography;
use crate::error::{Error, Result};
use crate::steady::endemic_amplitude;
use crate::transient::EpiParams;

/// Relative tolerance of the Kuhn–Tucker checks.
pub const KKT_TOL: f64 = 1e-5;
const WEIGHT_FLOOR: f64 = 1e-13;
const DAMPING: f64 = 0.5;
const MAX_OUTER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Multipliers {
    /// Prevalence cap `F(ψ) ≥ F̃(0) - F̄`, `λ₁ ≥ 0`.
    pub lambda1: f64,
    /// Mass bound `Q(ψ) ≤ 1`, `λ₂ ≥ 0`.
    pub lambda2: f64,
    /// Force of infection equality `H(ψ) = H̃(0) - h`, free sign.
    pub lambda3: f64,
}

impl Multipliers {
    /// Reduced cost `C₁ - λ₁F₁ + λ₂ - λ₃H₁` at node `k`; nonnegative at an
    /// optimum and zero on the atoms.
    pub fn reduced_cost(&self, k: &VaccKernels, node: usize) -> f64 {
        k.c1.get(node) - self.lambda1 * k.f1.get(node) + self.lambda2 - self.lambda3 * k.h1.get(node)
    }

    fn reduced_cost_at(&self, k: &VaccKernels, age: f64) -> f64 {
        k.c1.interpolate(age) - self.lambda1 * k.f1.interpolate(age) + self.lambda2 - self.lambda3 * k.h1.interpolate(age)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport {
    pub tol: f64,
    /// Largest negative reduced cost over the grid, relative.
    pub stationarity: f64,
    /// Largest reduced cost at an atom, relative.
    pub atom_gap: f64,
    pub slack_prevalence: f64,
    pub slack_mass: f64,
    /// `|C - λ₁F + λ₂Q - λ₃H|`, relative.
    pub zero_sum: f64,
    pub dual_sign: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub policy: VaccinationPolicy,
    pub psi: PsiMeasure,
    pub value: PolicyValue,
    /// Weighted prevalence with vaccination, `F̃(0) - F(ψ)`.
    pub prevalence: f64,
    pub multipliers: Multipliers,
    pub kkt: KktReport,
}

/// Which constraints beyond the prevalence cap and mass bound apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceConstraint {
    /// Require `H(ψ) = H̃(0) - h` at the kernels' amplitude.
    Enforced,
    Free,
}

fn required_reduction(k: &VaccKernels, w: &CostWeights) -> f64 {
    k.f0 - w.f_bar
}

pub fn optimize(k: &VaccKernels, w: &CostWeights, force: ForceConstraint) -> Result<Optimum> {
    let grid = *k.c1.grid();
    // ψ may sit on every node below the maximal age
    let nodes = grid.len() - 1;
    let enforce = force == ForceConstraint::Enforced;
    let cols = nodes + 2;
    let mut c = vec![0.0; cols];
    c[..nodes].copy_from_slice(&k.c1.values()[..nodes]);

    let mut f_row = k.f1.values()[..nodes].to_vec();
    f_row.extend([-1.0, 0.0]);
    let mut q_row = vec![1.0; nodes];
    q_row.extend([0.0, 1.0]);
    let mut a = vec![f_row, q_row];
    let mut b = vec![required_reduction(k, w), 1.0];
    if enforce {
        let mut h_row = k.h1.values()[..nodes].to_vec();
        h_row.extend([0.0, 0.0]);
        a.push(h_row);
        b.push(k.h0 - k.h);
    }
    let sol = simplex::solve(&c, &a, &b).map_err(|e| match e {
        LpError::Infeasible => Error::Infeasible,
        other => Error::InvalidParams(format!("vaccination program could not be solved: {other:?}")),
    })?;

    let atoms: Vec<(f64, f64)> =
        (0..nodes).filter(|&m| sol.x[m] > WEIGHT_FLOOR).map(|m| (grid.age(m), sol.x[m])).collect();
    // rounding may push the total a hair above one
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    let atoms = if total > 1.0 { atoms.into_iter().map(|(a, x)| (a, x / total)).collect() } else { atoms };
    let psi = PsiMeasure::new(atoms)?;
    let policy = psi_to_policy(&psi, grid.a_max())?;
    let multipliers = Multipliers {
        lambda1: sol.y[0],
        lambda2: -sol.y[1],
        lambda3: if enforce { sol.y[2] } else { 0.0 },
    };
    let value = evaluate_policy(&psi, k);
    let kkt = kkt_residuals(&psi, &multipliers, k, w, force);
    debug!("optimum: {} atoms, cost {:.6e}, kkt pass {}", psi.atoms().len(), value.cost, kkt.pass);
    Ok(Optimum { policy, psi, value, prevalence: k.f0 - value.f, multipliers, kkt })
}

pub fn kkt_residuals(
    psi: &PsiMeasure,
    m: &Multipliers,
    k: &VaccKernels,
    w: &CostWeights,
    force: ForceConstraint,
) -> KktReport {
    let grid = *k.c1.grid();
    let nodes = grid.len() - 1;
    let v = evaluate_policy(psi, k);
    let tiny = f64::MIN_POSITIVE;
    let scale = (k.c1.max() + m.lambda1.abs() * k.f1.max() + m.lambda2.abs() + m.lambda3.abs() * k.h1.max()).max(tiny);
    let min_reduced = (0..nodes).map(|n| m.reduced_cost(k, n)).fold(f64::INFINITY, f64::min);
    let stationarity = (-min_reduced).max(0.0) / scale;
    let atom_gap =
        psi.atoms().iter().map(|&(a, _)| m.reduced_cost_at(k, a).abs()).fold(0.0, f64::max) / scale;

    let need = required_reduction(k, w);
    let dh = k.h0 - k.h;
    let value_scale = (v.cost
        + m.lambda1.abs() * v.f.max(need.abs())
        + m.lambda2.abs() * v.q.max(1.0)
        + m.lambda3.abs() * v.h.max(dh.abs()))
    .max(tiny);
    let slack_prevalence = (m.lambda1 * (v.f - need)).abs() / value_scale;
    let slack_mass = (m.lambda2 * (v.q - 1.0)).abs() / value_scale;
    let zero_sum = (v.cost - m.lambda1 * v.f + m.lambda2 * v.q - m.lambda3 * v.h).abs() / value_scale;
    let dual_sign = m.lambda1 >= -KKT_TOL * scale
        && m.lambda2 >= -KKT_TOL * scale
        && (force == ForceConstraint::Enforced || m.lambda3 == 0.0);
    let primal = v.f >= need - KKT_TOL * k.f0.max(tiny)
        && v.q <= 1.0 + KKT_TOL
        && (force == ForceConstraint::Free || (v.h - dh).abs() <= KKT_TOL * k.h0.max(tiny));
    let pass = primal
        && dual_sign
        && [stationarity, atom_gap, slack_prevalence, slack_mass, zero_sum].iter().all(|&r| r <= KKT_TOL);
    KktReport { tol: KKT_TOL, stationarity, atom_gap, slack_prevalence, slack_mass, zero_sum, dual_sign, pass }
}

#[derive(Debug, Clone)]
pub struct SelfConsistent {
    pub optimum: Optimum,
    pub kernels: VaccKernels,
    pub h: f64,
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Fixed point in `h`: kernels at `h`, optimal policy under the prevalence
/// cap, then `h ← h + ½ (H̃(0) - H(ψ) - h)`.
pub fn solve_self_consistent(params: &EpiParams, d: &Demography, w: &CostWeights, target_tol: f64) -> Result<SelfConsistent> {
    let u = d.stable_age_distribution();
    let Some(mut h) = endemic_amplitude(&params.quarantine_free(), &u)? else {
        let kernels = build_kernels(0.0, params, d, w)?;
        let optimum = optimize(&kernels, w, ForceConstraint::Free)?;
        return Ok(SelfConsistent { optimum, kernels, h: 0.0, history: vec![0.0], converged: true });
    };
    let mut history = vec![h];
    for _ in 0..MAX_OUTER {
        let kernels = build_kernels(h, params, d, w)?;
        let optimum = optimize(&kernels, w, ForceConstraint::Free)?;
        let produced = (kernels.h0 - optimum.value.h).max(0.0);
        let next = h + DAMPING * (produced - h);
        debug!("self-consistent step: h = {h:.10e} -> {next:.10e}");
        history.push(next);
        if (next - h).abs() <= target_tol {
            return Ok(SelfConsistent { optimum, kernels, h, history, converged: true });
        }
        h = next;
    }
    Err(Error::NotConverged { history })
}

#[derive(Debug, Clone, Serialize)]
struct AtomReport {
    #[serde(flatten)]
    atom: Atom,
    weight: f64,
}

/// JSON policy report.
#[derive(Debug, Clone, Serialize)]
pub struct PolicyReport {
    atoms: Vec<AtomReport>,
    cost: f64,
    prevalence: f64,
    h: f64,
    multipliers: Multipliers,
    kkt: KktReport,
    converged: bool,
}

impl PolicyReport {
    pub fn new(opt: &Optimum, h: f64, converged: bool) -> Self {
        let atoms = opt
            .policy
            .atoms()
            .iter()
            .zip(opt.psi.atoms())
            .map(|(&atom, &(_, weight))| AtomReport { atom, weight })
            .collect();
        Self {
            atoms,
            cost: opt.value.cost,
            prevalence: opt.prevalence,
            h,
            multipliers: opt.multipliers,
            kkt: opt.kkt,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{AgeGrid, Profile};

    fn synthetic(g: AgeGrid, c1: impl Fn(f64) -> f64, f1: impl Fn(f64) -> f64, f0: f64) -> VaccKernels {
        VaccKernels {
            c1: Profile::from_fn(g, c1).unwrap(),
            f1: Profile::from_fn(g, f1).unwrap(),
            h1: Profile::from_fn(g, |a| (-a / 30.0).exp()).unwrap(),
            f0,
            h0: 1.0,
            h: 1.0,
        }
    }

    fn weights(g: AgeGrid, f_bar: f64) -> CostWeights {
        CostWeights::new(Profile::constant(g, 1.0), Profile::zeros(g), Profile::constant(g, 1.0), f_bar).unwrap()
    }

    #[test]
    fn no_reduction_demanded_gives_empty_policy() {
        let g = AgeGrid::new(50.0, 501).unwrap();
        let k = synthetic(g, |a| 1.0 + a, |a| 2.0 - a / 50.0, 1.0);
        let opt = optimize(&k, &weights(g, 2.0), ForceConstraint::Free).unwrap();
        assert!(opt.policy.is_empty());
        assert_eq!(opt.value.cost, 0.0);
        assert_eq!(opt.multipliers, Multipliers { lambda1: 0.0, lambda2: 0.0, lambda3: 0.0 });
        assert!(opt.kkt.pass);
        let with_h = optimize(&k, &weights(g, 2.0), ForceConstraint::Enforced).unwrap();
        assert!(with_h.policy.is_empty());
    }

    #[test]
    fn case_one_single_atom_at_ratio_minimizer() {
        let g = AgeGrid::new(50.0, 501).unwrap();
        // C₁/F₁ = 1 + (a - 12)² / 100, minimized at a = 12
        let f1 = |a: f64| 1.0 + (-a / 20.0).exp();
        let k = synthetic(g, move |a| f1(a) * (1.0 + (a - 12.0).powi(2) / 100.0), f1, 1.0);
        let opt = optimize(&k, &weights(g, 0.5), ForceConstraint::Free).unwrap();
        assert_eq!(opt.psi.atoms().len(), 1);
        let (age, w) = opt.psi.atoms()[0];
        assert!((age - 12.0).abs() < 1e-12);
        assert!((w - 0.5 / f1(12.0)).abs() < 1e-12);
        assert!((opt.multipliers.lambda1 - 1.0).abs() < 1e-12);
        assert_eq!(opt.multipliers.lambda2, 0.0);
        assert!(opt.kkt.pass, "{:?}", opt.kkt);
    }

    #[test]
    fn case_two_mass_bound_active() {
        let g = AgeGrid::new(50.0, 501).unwrap();
        // demanding 2.5 of reduction with F₁ ≤ 3 and Q ≤ 1 forces a mix
        let k = synthetic(g, |a| 0.1 + 0.5 * (-a / 10.0).exp() + a / 100.0, |a| 3.0 * (-a / 25.0).exp(), 3.0);
        let opt = optimize(&k, &weights(g, 0.5), ForceConstraint::Free).unwrap();
        assert!((opt.value.q - 1.0).abs() < 1e-12, "Q = {}", opt.value.q);
        let m = opt.multipliers;
        assert!(m.lambda2 > 0.0);
        assert!((m.lambda2 - (m.lambda1 * opt.value.f - opt.value.cost)).abs() < 1e-10);
        assert!(opt.kkt.pass, "{:?}", opt.kkt);
        assert!(opt.psi.atoms().len() <= 2);
    }

    #[test]
    fn infeasible_cap() {
        let g = AgeGrid::new(50.0, 501).unwrap();
        let k = synthetic(g, |_| 1.0, |_| 0.5, 1.0);
        assert!(matches!(optimize(&k, &weights(g, 0.1), ForceConstraint::Free), Err(Error::Infeasible)));
    }

    #[test]
    fn force_constraint_is_met() {
        let g = AgeGrid::new(50.0, 501).unwrap();
        let mut k = synthetic(g, |a| 1.0 + a / 10.0, |a| 2.0 * (-a / 40.0).exp(), 2.0);
        k.h = 0.7;
        let opt = optimize(&k, &weights(g, 1.5), ForceConstraint::Enforced).unwrap();
        assert!((opt.value.h - 0.3).abs() < 1e-10);
        assert!(opt.value.f >= 0.5 - 1e-12);
        assert!(opt.psi.atoms().len() <= 3);
        assert!(opt.kkt.pass, "{:?}", opt.kkt);
    }

    #[test]
    fn report_serializes() {
        let g = AgeGrid::new(50.0, 501).unwrap();
        let k = synthetic(g, |a| 1.0 + a, |_| 2.0, 4.0);
        let opt = optimize(&k, &weights(g, 2.0), ForceConstraint::Free).unwrap();
        let v = serde_json::to_value(PolicyReport::new(&opt, 0.1, true)).unwrap();
        assert_eq!(v["atoms"][0]["age"], 0.0);
        assert_eq!(v["atoms"][0]["deplete"], true);
        assert!(v["atoms"][0]["intensity"].is_null());
        assert_eq!(v["converged"], true);
    }
}
