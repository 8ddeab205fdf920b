//! Time integration of the normalized SEQIR system along characteristics.
//!
//! With `dt = Δa` a characteristic moves exactly one node per step, so node
//! `k` at `t + dt` is obtained from node `k-1` at `t` by the cell transfer in
//! [`crate::march`]. The force of infection is evaluated once per step from
//! the current state.

use std::io::Write;

use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::grid::{integrate, AgeGrid, Profile};
use crate::march::{CellMap, Chain};

/// Clamp window for rounding noise around `[0, 1]`.
pub const POSITIVITY_SLACK: f64 = 1e-10;
/// Pointwise bound on `|s+e+q+i+r-1|` and on the `r`-equation residual.
pub const CONSERVATION_TOL: f64 = 1e-6;

/// Scalar rates (per year) and the separable contact kernel `k(a,b) = k₁(a) k₂(b)`.
#[derive(Debug, Clone)]
pub struct EpiParams {
    /// Progression rate from exposure to symptom onset.
    pub mu1: f64,
    /// Rate of recruitment of exposed individuals into quarantine.
    pub q1: f64,
    /// Rate from quarantine into the infected class.
    pub gamma1: f64,
    /// Recovery rate out of quarantine.
    pub gamma2: f64,
    /// Recovery rate of infected individuals.
    pub gamma: f64,
    pub k1: Profile,
    pub k2: Profile,
}

impl EpiParams {
    pub fn new(mu1: f64, q1: f64, gamma1: f64, gamma2: f64, gamma: f64, k1: Profile, k2: Profile) -> Result<Self> {
        let p = Self { mu1, q1, gamma1, gamma2, gamma, k1, k2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu1", self.mu1),
            ("q1", self.q1),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma", self.gamma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be a finite rate >= 0, got {v}")));
            }
        }
        if !self.k1.same_grid(&self.k2) {
            return Err(Error::GridMismatch);
        }
        if self.k1.min() < 0.0 || self.k2.min() < 0.0 {
            return Err(Error::InvalidParams("contact kernel factors must be >= 0".into()));
        }
        let dx = self.grid().spacing();
        for rate in [self.mu1 + self.q1, self.gamma1 + self.gamma2, self.gamma] {
            if rate * dx > 2.0 {
                return Err(Error::GridTooCoarse { rate, spacing: dx });
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &AgeGrid {
        self.k1.grid()
    }

    /// Same parameters with `k₂` multiplied by `c`; the reproduction number
    /// scales by exactly `c`.
    pub fn with_k2_scaled(&self, c: f64) -> Self {
        Self { k2: self.k2.scale(c), ..self.clone() }
    }

    /// The quarantine-free specialization (`q₁ = γ₁ = γ₂ = 0`).
    pub fn quarantine_free(&self) -> Self {
        Self { q1: 0.0, gamma1: 0.0, gamma2: 0.0, ..self.clone() }
    }

    pub(crate) fn cell_map(&self) -> CellMap {
        CellMap::new(self, self.grid().spacing())
    }
}

/// Compartment fractions `(s, e, q, i, r)` over age at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpiState {
    pub t: f64,
    pub s: Profile,
    pub e: Profile,
    pub q: Profile,
    pub i: Profile,
    pub r: Profile,
}

impl EpiState {
    /// Validates boundary values, ranges and pointwise conservation.
    pub fn new(t: f64, s: Profile, e: Profile, q: Profile, i: Profile, r: Profile) -> Result<Self> {
        let grid = *s.grid();
        if [&e, &q, &i, &r].iter().any(|p| *p.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        let state = Self { t, s, e, q, i, r };
        if state.s.get(0) != 1.0 || [&state.e, &state.q, &state.i, &state.r].iter().any(|p| p.get(0) != 0.0) {
            return Err(Error::InvalidParams("state must satisfy s(0)=1 and e(0)=q(0)=i(0)=r(0)=0".into()));
        }
        for p in state.compartments() {
            if p.min() < -POSITIVITY_SLACK || p.max() > 1.0 + POSITIVITY_SLACK {
                return Err(Error::InvalidParams("compartment fractions must lie in [0, 1]".into()));
            }
        }
        let (k, residual) = state.max_conservation_error();
        if residual > 1e-8 {
            return Err(Error::ConservationViolation { t, age: grid.age(k), residual });
        }
        Ok(state)
    }

    pub fn disease_free(grid: AgeGrid) -> Self {
        Self {
            t: 0.0,
            s: Profile::constant(grid, 1.0),
            e: Profile::zeros(grid),
            q: Profile::zeros(grid),
            i: Profile::zeros(grid),
            r: Profile::zeros(grid),
        }
    }

    /// Disease-free state with a Gaussian bump of exposed individuals moved
    /// out of `s`. `mass` is the exposed fraction of the whole population,
    /// `∫ e(a) U(a) da`.
    pub fn seeded_exposed(u: &Profile, mass: f64, center: f64, width: f64) -> Result<Self> {
        let grid = *u.grid();
        if !(mass >= 0.0 && width > 0.0) {
            return Err(Error::InvalidParams("seed mass must be >= 0 and width > 0".into()));
        }
        let mut bump =
            Profile::from_fn(grid, |a| (-0.5 * ((a - center) / width).powi(2)).exp())?.into_values();
        bump[0] = 0.0;
        let shape = Profile::from_vec(grid, bump);
        let norm = integrate(&(&shape * u));
        let e = if mass == 0.0 || norm == 0.0 { Profile::zeros(grid) } else { shape.scale(mass / norm) };
        if e.max() > 1.0 {
            return Err(Error::InvalidParams("seed too concentrated: exposed fraction exceeds 1".into()));
        }
        let s = e.map(|v| 1.0 - v);
        Self::new(0.0, s, e, Profile::zeros(grid), Profile::zeros(grid), Profile::zeros(grid))
    }

    pub fn grid(&self) -> &AgeGrid {
        self.s.grid()
    }

    pub fn compartments(&self) -> [&Profile; 5] {
        [&self.s, &self.e, &self.q, &self.i, &self.r]
    }

    /// Node index and value of the largest `|s+e+q+i+r-1|`.
    pub fn max_conservation_error(&self) -> (usize, f64) {
        (0..self.grid().len())
            .map(|k| {
                let total: f64 = self.compartments().iter().map(|p| p.get(k)).sum();
                (k, (total - 1.0).abs())
            })
            .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
    }

    /// Infected fraction of the population, `∫ i U`.
    pub fn prevalence(&self, u: &Profile) -> f64 {
        integrate(&(&self.i * u))
    }
}

/// `φ(a) = k₁(a) ∫ k₂ U i`.
pub fn force_of_infection(state: &EpiState, params: &EpiParams, u: &Profile) -> Profile {
    params.k1.scale(infection_pressure(state, params, u))
}

/// The amplitude `∫ k₂(σ) U(σ) i(σ) dσ` multiplying `k₁`.
pub fn infection_pressure(state: &EpiState, params: &EpiParams, u: &Profile) -> f64 {
    let w = &params.k2 * u;
    integrate(&(&w * &state.i))
}

/// Advances every node by one characteristic step of length `dt = Δa`.
pub fn step(state: &EpiState, params: &EpiParams, u: &Profile, dt: f64) -> Result<EpiState> {
    let grid = *state.grid();
    if *params.grid() != grid || *u.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let dx = grid.spacing();
    if (dt - dx).abs() > 1e-12 * dx {
        return Err(Error::InvalidParams(format!("time step {dt} must equal the age spacing {dx}")));
    }
    advance(state, params, &params.cell_map(), infection_pressure(state, params, u))
}

fn advance(state: &EpiState, params: &EpiParams, map: &CellMap, pressure: f64) -> Result<EpiState> {
    let grid = *state.grid();
    let n = grid.len();
    let t = state.t + grid.spacing();
    let k1 = params.k1.values();
    let (s0, e0, q0, i0, r0) =
        (state.s.values(), state.e.values(), state.q.values(), state.i.values(), state.r.values());

    let mut s = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut i = vec![0.0; n];
    let mut r = vec![0.0; n];
    s[0] = 1.0;

    for k in 1..n {
        let x = map.exposure(pressure * k1[k - 1], pressure * k1[k]);
        let upwind = s0[k - 1];
        s[k] = upwind * (-x).exp();
        let inflow = upwind * -(-x).exp_m1();
        let prev = Chain { e: e0[k - 1], q: q0[k - 1], i: i0[k - 1] };
        let next = map.advance(prev, inflow);
        e[k] = next.e;
        q[k] = next.q;
        i[k] = next.i;

        let mut rk = 1.0 - s[k] - next.e - next.q - next.i;
        let residual = rk - (r0[k - 1] + map.recovered_inflow(prev, next));
        if residual.abs() > CONSERVATION_TOL || rk < -POSITIVITY_SLACK {
            return Err(Error::ConservationViolation { t, age: grid.age(k), residual });
        }
        if rk < 0.0 {
            rk = 0.0;
        }
        r[k] = rk;
    }

    let next = EpiState {
        t,
        s: Profile::from_vec(grid, s),
        e: Profile::from_vec(grid, e),
        q: Profile::from_vec(grid, q),
        i: Profile::from_vec(grid, i),
        r: Profile::from_vec(grid, r),
    };
    let (k, residual) = next.max_conservation_error();
    if residual > CONSERVATION_TOL {
        return Err(Error::ConservationViolation { t, age: grid.age(k), residual });
    }
    Ok(next)
}

/// Sampled sequence of states with strictly increasing times.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub states: Vec<EpiState>,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.t)
    }

    pub fn last(&self) -> Option<&EpiState> {
        self.states.last()
    }

    /// Tidy CSV with one row per node per sample: `t,a,s,e,q,i,r`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,a,s,e,q,i,r")?;
        for st in &self.states {
            for (k, a) in st.grid().nodes().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    fmt_f64(st.t),
                    fmt_f64(a),
                    fmt_f64(st.s.get(k)),
                    fmt_f64(st.e.get(k)),
                    fmt_f64(st.q.get(k)),
                    fmt_f64(st.i.get(k)),
                    fmt_f64(st.r.get(k)),
                )?;
            }
        }
        Ok(())
    }
}

/// Number of characteristic steps needed to reach `t_end` from `t = 0`.
pub fn steps_for(grid: &AgeGrid, t_end: f64) -> usize {
    let raw = t_end / grid.spacing();
    // tolerate t_end values that are a whole number of steps up to rounding
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

/// Runs `step` until `t_end`, calling `observe` on the initial state, on
/// every `stride`-th state and on the final state. Returns the final state.
pub fn simulate_observed(
    initial: &EpiState,
    params: &EpiParams,
    u: &Profile,
    t_end: f64,
    stride: usize,
    mut observe: impl FnMut(&EpiState),
) -> Result<EpiState> {
    if !(t_end >= 0.0) {
        return Err(Error::InvalidParams(format!("t_end must be >= 0, got {t_end}")));
    }
    let grid = *initial.grid();
    if *params.grid() != grid || *u.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let stride = stride.max(1);
    let steps = steps_for(&grid, t_end);
    let map = params.cell_map();
    let kernel = &params.k2 * u;

    observe(initial);
    let mut state = initial.clone();
    for n in 1..=steps {
        let pressure = integrate(&(&kernel * &state.i));
        state = advance(&state, params, &map, pressure)?;
        if n % stride == 0 || n == steps {
            observe(&state);
        }
    }
    Ok(state)
}

/// Stores the states visited by [`simulate_observed`].
pub fn simulate(initial: &EpiState, params: &EpiParams, u: &Profile, t_end: f64, stride: usize) -> Result<Trajectory> {
    let mut states = Vec::new();
    simulate_observed(initial, params, u, t_end, stride, |s| states.push(s.clone()))?;
    Ok(Trajectory { states })
}
