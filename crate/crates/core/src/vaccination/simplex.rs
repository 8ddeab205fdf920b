//! Dense two-phase tableau simplex for `min c·x` subject to `A x = b`,
//! `x ≥ 0`, with a handful of rows.

const EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpError {
    Infeasible,
    Unbounded,
    Stalled,
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    /// Row duals `y` with reduced costs `c - Aᵀy ≥ 0` at the optimum.
    pub y: Vec<f64>,
}

struct Tableau {
    /// `m` rows of `n + m` coefficients followed by the right-hand side.
    rows: Vec<Vec<f64>>,
    /// Reduced costs; the last entry is minus the objective.
    cost: Vec<f64>,
    basis: Vec<usize>,
    n: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r && row[col] != 0.0 {
                let f = row[col];
                row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            }
        }
        let f = self.cost[col];
        if f != 0.0 {
            self.cost.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
        }
        self.basis[r] = col;
    }

    /// Most negative reduced cost among `allowed` columns, lowest index on ties.
    fn entering(&self, allowed: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..allowed {
            let d = self.cost[j];
            if d < -EPS && best.is_none_or(|(_, b)| d < b) {
                best = Some((j, d));
            }
        }
        best.map(|b| b.0)
    }

    fn leaving(&self, col: usize) -> Option<usize> {
        let rhs = self.rows[0].len() - 1;
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            if row[col] > EPS {
                let ratio = row[rhs] / row[col];
                let better = match best {
                    None => true,
                    Some((bi, br)) => ratio < br - EPS || (ratio <= br + EPS && self.basis[i] < self.basis[bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
        }
        best.map(|b| b.0)
    }

    fn run(&mut self, allowed: usize) -> Result<(), LpError> {
        for _ in 0..MAX_PIVOTS {
            let Some(col) = self.entering(allowed) else { return Ok(()) };
            let Some(r) = self.leaving(col) else { return Err(LpError::Unbounded) };
            self.pivot(r, col);
        }
        Err(LpError::Stalled)
    }
}

pub(crate) fn solve(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution, LpError> {
    let n = c.len();
    let m = a.len();
    // scale rows and costs to unit size; sign-flip rows so b ≥ 0
    let mut row_scale = vec![1.0; m];
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mag = a[i].iter().chain([&b[i]]).fold(0.0f64, |acc, v| acc.max(v.abs()));
        let mag = if mag > 0.0 { mag } else { 1.0 };
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        row_scale[i] = sign / mag;
        let mut row: Vec<f64> = a[i].iter().map(|v| v * row_scale[i]).collect();
        row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
        row.push(b[i] * row_scale[i]);
        rows.push(row);
    }
    let c_scale = c.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let c_scale = if c_scale > 0.0 { c_scale } else { 1.0 };

    // phase 1: minimize the sum of artificials
    let width = n + m + 1;
    let mut cost = vec![0.0; width];
    for row in &rows {
        for j in 0..n {
            cost[j] -= row[j];
        }
        cost[width - 1] -= row[width - 1];
    }
    let mut t = Tableau { rows, cost, basis: (n..n + m).collect(), n };
    t.run(n)?;
    if -t.cost[width - 1] > 1e-9 {
        return Err(LpError::Infeasible);
    }
    // drive zero-level artificials out of the basis where possible
    for r in 0..m {
        if t.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| t.rows[r][j].abs() > 1e-9) {
                t.pivot(r, col);
            }
        }
    }

    // phase 2
    let mut cost = vec![0.0; width];
    for j in 0..n {
        cost[j] = c[j] / c_scale;
    }
    for r in 0..m {
        let cb = if t.basis[r] < n { cost[t.basis[r]] } else { 0.0 };
        if cb != 0.0 {
            let row = t.rows[r].clone();
            cost.iter_mut().zip(&row).for_each(|(v, p)| *v -= cb * p);
        }
    }
    t.cost = cost;
    t.run(t.n)?;

    let mut x = vec![0.0; n];
    for (r, &j) in t.basis.iter().enumerate() {
        if j < n {
            x[j] = t.rows[r][width - 1].max(0.0);
        }
    }
    // reduced cost of artificial i is -y'_i in the scaled system
    let y = (0..m).map(|i| -t.cost[n + i] * row_scale[i] * c_scale).collect();
    Ok(LpSolution { x, y })
}
