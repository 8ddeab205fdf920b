//! Stationary demography: survival, stable age density and net reproduction.

use log::warn;

use crate::error::{Error, Result};
use crate::grid::{cumulative_integral, integrate, Profile};

/// Default bound on survival to `a_max`, the truncated stand-in for `∫μ = ∞`.
pub const DEFAULT_TAIL_SURVIVAL: f64 = 1e-6;

/// Mortality and fertility rates on a shared age grid.
#[derive(Debug, Clone)]
pub struct Demography {
    mu: Profile,
    beta: Profile,
    survival: Profile,
}

impl Demography {
    pub fn new(mu: Profile, beta: Profile) -> Result<Self> {
        Self::with_tail_tolerance(mu, beta, DEFAULT_TAIL_SURVIVAL)
    }

    /// Like [`Demography::new`] but accepting survival to `a_max` up to
    /// `tail_survival`; use for deliberately short truncations.
    pub fn with_tail_tolerance(mu: Profile, beta: Profile, tail_survival: f64) -> Result<Self> {
        if !mu.same_grid(&beta) {
            return Err(Error::GridMismatch);
        }
        if mu.min() < 0.0 {
            return Err(Error::InvalidDemography("mortality rate must be >= 0".into()));
        }
        if beta.min() < 0.0 {
            return Err(Error::InvalidDemography("fertility rate must be >= 0".into()));
        }
        let survival = cumulative_integral(&mu).map(|m| (-m).exp());
        let tail = survival.get(survival.values().len() - 1);
        if tail > tail_survival {
            return Err(Error::InvalidDemography(format!(
                "survival to a_max is {tail:.3e} > {tail_survival:.1e}; raise mortality or a_max"
            )));
        }
        Ok(Self { mu, beta, survival })
    }

    pub fn mu(&self) -> &Profile {
        &self.mu
    }

    pub fn beta(&self) -> &Profile {
        &self.beta
    }

    /// `π(a) = exp(-∫₀^a μ)`.
    pub fn survival(&self) -> &Profile {
        &self.survival
    }

    /// Stable age density `U(a) = β₀ π(a)` normalized with the trapezoid rule.
    pub fn stable_age_distribution(&self) -> Profile {
        let beta0 = 1.0 / integrate(&self.survival);
        self.survival.scale(beta0)
    }

    /// `∫ β(a) π(a) da`. The stationary theory assumes this is 1; a warning
    /// is logged otherwise.
    pub fn net_reproduction_rate(&self) -> f64 {
        let r = integrate(&(&self.beta * &self.survival));
        if (r - 1.0).abs() > 1e-3 {
            warn!("net reproduction rate is {r:.6}, not 1; the population is not stationary");
        }
        r
    }
}
