//! Optimal vaccination with delta-peak policies in the quarantine-free model.

mod kernels;
mod optimize;
mod policy;
mod simplex;

pub use kernels::{build_kernels, evaluate_policy, vaccinated_profiles, PolicyValue, VaccKernels, KERNEL_TOL};
pub use optimize::{
    kkt_residuals, optimize, solve_self_consistent, ForceConstraint, KktReport, Multipliers, Optimum, PolicyReport,
    SelfConsistent, KKT_TOL,
};
pub use policy::{
    policy_to_psi, psi_to_policy, Atom, Intensity, PsiMeasure, StepFunction, VaccinationPolicy, MAX_ATOMS,
};

use crate::error::{Error, Result};
use crate::grid::Profile;

#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    /// Cost per vaccinated susceptible.
    pub g1: Profile,
    /// Cost per vaccinated exposed individual.
    pub g2: Profile,
    /// Social impact of one infected individual.
    pub f: Profile,
    /// Cap on the weighted prevalence `∫ f U i`.
    pub f_bar: f64,
}

impl CostWeights {
    pub fn new(g1: Profile, g2: Profile, f: Profile, f_bar: f64) -> Result<Self> {
        if !g1.same_grid(&g2) || !g1.same_grid(&f) {
            return Err(Error::GridMismatch);
        }
        if g1.min() < 0.0 || g2.min() < 0.0 || f.min() < 0.0 {
            return Err(Error::InvalidParams("cost and impact weights must be >= 0".into()));
        }
        if !(f_bar > 0.0 && f_bar.is_finite()) {
            return Err(Error::InvalidParams(format!("prevalence cap must be > 0, got {f_bar}")));
        }
        Ok(Self { g1, g2, f, f_bar })
    }

    pub fn with_cap(&self, f_bar: f64) -> Result<Self> {
        Self::new(self.g1.clone(), self.g2.clone(), self.f.clone(), f_bar)
    }
}
