#![allow(dead_code)]

use seqir::grid::{AgeGrid, Profile};
use seqir::steady::r0_quadrature;
use seqir::vaccination::CostWeights;
use seqir::{Demography, EpiParams};

/// Gompertz mortality on `[0, 100]`, quarantine rates and age-dependent mixing.
pub struct Fixture {
    pub grid: AgeGrid,
    pub demography: Demography,
    pub u: Profile,
    pub params: EpiParams,
}

pub fn gompertz(n: usize) -> Fixture {
    let grid = AgeGrid::new(100.0, n).unwrap();
    let mu = Profile::from_fn(grid, |a| 0.0005 * (0.08 * a).exp()).unwrap();
    let demography = Demography::new(mu.clone(), mu).unwrap();
    let u = demography.stable_age_distribution();
    let k1 = Profile::from_fn(grid, |a| 1.0 + (-a / 15.0).exp()).unwrap();
    let k2 = Profile::from_fn(grid, |a| 0.5 + 0.5 * (-((a - 20.0) / 15.0).powi(2)).exp()).unwrap();
    let params = EpiParams::new(0.2, 0.1, 0.05, 0.1, 0.1, k1, k2).unwrap();
    Fixture { grid, demography, u, params }
}

impl Fixture {
    /// Parameters with `k₂` rescaled so the reproduction number is `r0`.
    pub fn at_r0(&self, r0: f64) -> EpiParams {
        self.params.with_k2_scaled(r0 / r0_quadrature(&self.params, &self.u))
    }

    pub fn costs(&self, f_bar: f64) -> CostWeights {
        let g = self.grid;
        CostWeights::new(
            Profile::constant(g, 1.0),
            Profile::constant(g, 0.5),
            Profile::from_fn(g, |a| 1.0 + a / 50.0).unwrap(),
            f_bar,
        )
        .unwrap()
    }
}

/// Constant mortality `μ` on a long grid, `k₁ ≡ 1`, constant `k₂`.
pub fn constant_mortality(mu: f64, a_max: f64, n: usize) -> (AgeGrid, Demography, Profile) {
    let grid = AgeGrid::new(a_max, n).unwrap();
    let m = Profile::constant(grid, mu);
    let tail = (-mu * a_max).exp() * 1.01;
    let d = Demography::with_tail_tolerance(m.clone(), m, tail).unwrap();
    let u = d.stable_age_distribution();
    (grid, d, u)
}
