//! Uniform age mesh, sampled age profiles and composite trapezoid quadrature.
//!
//! Every integral over age in this crate goes through the rules defined
//! here, so normalizations (for instance the stable age distribution) are
//! exact with respect to the library's own quadrature.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Uniform discretization of `[0, a_max]` with `n` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeGrid {
    a_max: f64,
    n: usize,
}

impl AgeGrid {
    pub fn new(a_max: f64, n: usize) -> Result<Self> {
        if !(a_max.is_finite() && a_max > 0.0) {
            return Err(Error::InvalidGrid(format!("a_max must be positive and finite, got {a_max}")));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes, got {n}")));
        }
        Ok(Self { a_max, n })
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node spacing; also the time step of the characteristic integrator.
    pub fn spacing(&self) -> f64 {
        self.a_max / (self.n - 1) as f64
    }

    pub fn age(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.a_max
        } else {
            k as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.age(k))
    }

    /// Trapezoid weight of node `k`.
    pub fn weight(&self, k: usize) -> f64 {
        let dx = self.spacing();
        if k == 0 || k + 1 == self.n {
            0.5 * dx
        } else {
            dx
        }
    }

    /// Locates `age` inside the mesh: returns the left node index and the
    /// fractional position `theta` in `[0, 1)` within that cell.
    ///
    /// Ages at or beyond `a_max` map onto the last cell with `theta = 1`.
    pub fn locate(&self, age: f64) -> (usize, f64) {
        let dx = self.spacing();
        let x = (age / dx).max(0.0);
        let cell = x.floor() as usize;
        if cell + 1 >= self.n {
            return (self.n - 2, 1.0);
        }
        (cell, x - cell as f64)
    }
}

/// Real-valued function of age sampled on an [`AgeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    grid: AgeGrid,
    values: Vec<f64>,
}

impl Profile {
    pub fn new(grid: AgeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidProfile(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile(format!("non-finite value at node {k}")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: AgeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn constant(grid: AgeGrid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn zeros(grid: AgeGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Internal constructor for values produced by this crate's own kernels.
    pub(crate) fn from_vec(grid: AgeGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { grid, values }
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Profile {
        Profile::from_vec(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Profile, f: impl Fn(f64, f64) -> f64) -> Profile {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Profile::from_vec(self.grid, values)
    }

    pub fn scale(&self, c: f64) -> Profile {
        self.map(|v| v * c)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_distance(&self, other: &Profile) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Piecewise-linear interpolation between nodes; clamps outside `[0, a_max]`.
    pub fn interpolate(&self, age: f64) -> f64 {
        let (k, theta) = self.grid.locate(age);
        (1.0 - theta) * self.values[k] + theta * self.values[k + 1]
    }

    pub fn same_grid(&self, other: &Profile) -> bool {
        self.grid == other.grid
    }
}

impl Add for &Profile {
    type Output = Profile;
    fn add(self, rhs: &Profile) -> Profile {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Profile {
    type Output = Profile;
    fn sub(self, rhs: &Profile) -> Profile {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul for &Profile {
    type Output = Profile;
    fn mul(self, rhs: &Profile) -> Profile {
        self.zip_map(rhs, |a, b| a * b)
    }
}

/// Composite trapezoid approximation of `∫₀^{a_max} p(a) da`.
pub fn integrate(p: &Profile) -> f64 {
    let v = p.values();
    let n = v.len();
    let interior: f64 = v[1..n - 1].iter().sum();
    p.grid().spacing() * (0.5 * (v[0] + v[n - 1]) + interior)
}

/// Running trapezoid integral `F(a_k) = ∫₀^{a_k} p`.
pub fn cumulative_integral(p: &Profile) -> Profile {
    let half = 0.5 * p.grid().spacing();
    let v = p.values();
    let mut out = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in v.windows(2) {
        acc += half * (w[0] + w[1]);
        out.push(acc);
    }
    Profile::from_vec(*p.grid(), out)
}

/// Backward trapezoid tail `T(a_k) = ∫_{a_k}^{a_max} p(x) e^{rate (a_k - x)} dx`.
///
/// The trapezoid rule is applied to the full integrand on each cell and the
/// exponential is carried by the recursion `T_k = e^{-rate Δ} T_{k+1} + cell_k`,
/// so no factor ever overflows.
pub fn discounted_tail_integral(p: &Profile, rate: f64) -> Profile {
    let grid = *p.grid();
    let dx = grid.spacing();
    let decay = (-rate * dx).exp();
    let v = p.values();
    let n = v.len();
    let mut out = vec![0.0; n];
    for k in (0..n - 1).rev() {
        out[k] = decay * out[k + 1] + 0.5 * dx * (v[k] + decay * v[k + 1]);
    }
    Profile::from_vec(grid, out)
}
