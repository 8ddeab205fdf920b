use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{RunKind, Scenario};
use super::ScenarioError;
use crate::demography::Demography;
use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::grid::{AgeGrid, Profile};
use crate::lyapunov::{compute_weights, sample, verify_samples};
use crate::steady::{
    average_age_of_infection, characteristic_value, r0_breakdown_quadrature, r0_closed_form, r0_quadrature,
    r0_reversed_order, solve_endemic, steady_profiles,
};
use crate::transient::{simulate, simulate_observed, steps_for, EpiParams, EpiState};
use crate::vaccination::{
    build_kernels, optimize, solve_self_consistent, vaccinated_profiles, CostWeights, ForceConstraint, Optimum,
    PolicyReport,
};

/// Everything a run needs, evaluated on the scenario grid.
#[derive(Debug, Clone)]
pub struct Model {
    pub grid: AgeGrid,
    pub demography: Demography,
    pub u: Profile,
    pub params: EpiParams,
    /// Factor applied to the configured `k₂` to hit a target `R₀`.
    pub k2_scale: f64,
}

pub fn build_model(s: &Scenario) -> Result<Model> {
    let grid = s.grid()?;
    let mu = s.demography.mu.on(grid)?;
    let beta = match &s.demography.beta {
        Some(b) => b.on(grid)?,
        None => mu.clone(),
    };
    let demography = Demography::with_tail_tolerance(mu, beta, s.demography.tail_survival)?;
    demography.net_reproduction_rate();
    let u = demography.stable_age_distribution();
    let e = &s.epi;
    let mut params = EpiParams::new(e.mu1, e.q1, e.gamma1, e.gamma2, e.gamma, e.k1.on(grid)?, e.k2.on(grid)?)?;
    let mut k2_scale = 1.0;
    if let Some(target) = e.target_r0 {
        let r0 = r0_quadrature(&params, &u);
        if r0 <= 0.0 {
            return Err(Error::InvalidParams("cannot rescale k2 to a target R0: the configured R0 is 0".into()));
        }
        k2_scale = target / r0;
        params = params.with_k2_scaled(k2_scale);
    }
    Ok(Model { grid, demography, u, params, k2_scale })
}

fn cost_weights(s: &Scenario, grid: AgeGrid, f_bar: f64) -> Result<CostWeights> {
    CostWeights::new(s.costs.g1.on(grid)?, s.costs.g2.on(grid)?, s.costs.f.on(grid)?, f_bar)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

/// Failure inside a run: either the model or writing artifacts.
enum Fail {
    Model(Error),
    Io(PathBuf, std::io::Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Model(e)
    }
}

struct Out {
    dir: PathBuf,
    stem: &'static str,
    written: Vec<PathBuf>,
}

impl Out {
    fn write(&mut self, ext: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> std::result::Result<(), Fail> {
        let path = self.dir.join(format!("{}.{ext}", self.stem));
        let wrap = |e| Fail::Io(path.clone(), e);
        let file = File::create(&path).map_err(wrap)?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(wrap)?;
        self.written.push(path);
        Ok(())
    }

    fn json(&mut self, value: &impl Serialize) -> std::result::Result<(), Fail> {
        self.write("json", |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
            writeln!(w)
        })
    }
}

pub fn run_scenario(s: &Scenario) -> std::result::Result<RunOutcome, ScenarioError> {
    let ctx = |source| ScenarioError::Model { scenario: s.name.clone(), run: s.run, source };
    let model = build_model(s).map_err(ctx)?;
    fs::create_dir_all(&s.output_dir).map_err(|source| ScenarioError::Io { path: s.output_dir.clone(), source })?;
    let mut out = Out { dir: s.output_dir.clone(), stem: s.run.name(), written: Vec::new() };
    info!("scenario '{}': run = {}, grid n = {}, a_max = {}", s.name, s.run, s.n, s.a_max);
    let result = match s.run {
        RunKind::Simulate => run_simulate(s, &model, &mut out),
        RunKind::Steady => run_steady(&model, &mut out),
        RunKind::R0 => run_r0(s, &model, &mut out),
        RunKind::Lyapunov => run_lyapunov(s, &model, &mut out),
        RunKind::Vaccinate => run_vaccinate(s, &model, &mut out),
        RunKind::Sweep => run_sweep(s, &model, &mut out),
    };
    match result {
        Ok(summary) => Ok(RunOutcome { summary, artifacts: out.written }),
        Err(Fail::Model(e)) => Err(ctx(e)),
        Err(Fail::Io(path, source)) => Err(ScenarioError::Io { path, source }),
    }
}

fn initial_state(s: &Scenario, m: &Model) -> Result<EpiState> {
    let sim = &s.simulate;
    EpiState::seeded_exposed(&m.u, sim.seed_mass, sim.seed_center, sim.seed_width)
}

fn run_simulate(s: &Scenario, m: &Model, out: &mut Out) -> std::result::Result<String, Fail> {
    let initial = initial_state(s, m)?;
    let traj = simulate(&initial, &m.params, &m.u, s.simulate.t_end, s.simulate.stride)?;
    out.write("csv", |w| traj.write_csv(w))?;
    let samples: Vec<Value> = traj
        .states
        .iter()
        .map(|st| {
            json!({
                "t": st.t,
                "prevalence": st.prevalence(&m.u),
                "max_conservation_error": st.max_conservation_error().1,
            })
        })
        .collect();
    let r0 = r0_quadrature(&m.params, &m.u);
    out.json(&json!({
        "r0": r0,
        "t_end": s.simulate.t_end,
        "steps": steps_for(&m.grid, s.simulate.t_end),
        "samples": samples,
    }))?;
    let last = traj.last().map_or(0.0, |st| st.prevalence(&m.u));
    Ok(format!("simulated to t = {} (R0 = {r0:.3}): final prevalence = {last:.6e}", s.simulate.t_end))
}

fn run_steady(m: &Model, out: &mut Out) -> std::result::Result<String, Fail> {
    let b = r0_breakdown_quadrature(&m.params, &m.u);
    let endemic = solve_endemic(&m.params, &m.u)?;
    let (ss, age) = match endemic {
        Some(ss) => {
            let age = average_age_of_infection(&ss, &m.demography)?;
            (ss, Some(age))
        }
        None => (steady_profiles(0.0, &m.params), None),
    };
    out.write("csv", |w| ss.write_csv(w))?;
    let g_residual = age.map(|_| characteristic_value(ss.h, &m.params, &m.u) - 1.0);
    out.json(&json!({
        "r0": b.r0,
        "r1": b.r1,
        "r2": b.r2,
        "endemic": age.is_some(),
        "h": ss.h,
        "g_residual": g_residual,
        "average_age_of_infection": age,
    }))?;
    Ok(match age {
        Some(a) => format!("R0 = {:.3}: endemic h* = {:.6e}, average age of infection = {a:.3} years", b.r0, ss.h),
        None => format!("R0 = {:.3} <= 1: no endemic state", b.r0),
    })
}

/// Closed form applies when mortality, `k₁` and `k₂` are all constant.
fn closed_form(s: &Scenario, m: &Model) -> Result<Option<crate::steady::R0Breakdown>> {
    let (Some(mu), Some(k1), Some(k2)) = (s.demography.mu.as_constant(), s.epi.k1.as_constant(), s.epi.k2.as_constant())
    else {
        return Ok(None);
    };
    let p = &m.params;
    let b = r0_closed_form(mu, p.gamma, p.mu1, p.q1, p.gamma1, p.gamma2, k1 * k2 * m.k2_scale)?;
    Ok(Some(b))
}

fn run_r0(s: &Scenario, m: &Model, out: &mut Out) -> std::result::Result<String, Fail> {
    let q = r0_breakdown_quadrature(&m.params, &m.u);
    let reversed = r0_reversed_order(&m.params, &m.u);
    let closed = closed_form(s, m)?;
    let gap = closed.map(|c| if c.r0 > 0.0 { (q.r0 - c.r0).abs() / c.r0 } else { (q.r0 - c.r0).abs() });
    out.write("csv", |w| {
        writeln!(w, "quantity,quadrature,closed_form")?;
        for (name, qv, cv) in [
            ("r0", q.r0, closed.map(|c| c.r0)),
            ("r1", q.r1, closed.map(|c| c.r1)),
            ("r2", q.r2, closed.map(|c| c.r2)),
        ] {
            writeln!(w, "{name},{},{}", fmt_f64(qv), cv.map(fmt_f64).unwrap_or_default())?;
        }
        Ok(())
    })?;
    out.json(&json!({
        "quadrature": q,
        "reversed_order": reversed,
        "closed_form": closed,
        "relative_gap": gap,
        "k2_scale": m.k2_scale,
    }))?;
    Ok(format!("R0 = {:.3} (R1 = {:.3}, R2 = {:.3})", q.r0, q.r1, q.r2))
}

fn run_lyapunov(s: &Scenario, m: &Model, out: &mut Out) -> std::result::Result<String, Fail> {
    let r0 = r0_quadrature(&m.params, &m.u);
    let w = compute_weights(&m.params, &m.u);
    let mut samples = Vec::new();
    simulate_observed(&initial_state(s, m)?, &m.params, &m.u, s.simulate.t_end, s.simulate.stride, |st| {
        samples.push(sample(st, &w, &m.params, &m.u, r0))
    })?;
    let report = verify_samples(samples, r0);
    out.write("csv", |wr| {
        writeln!(wr, "t,V,bound")?;
        for p in &report.samples {
            writeln!(wr, "{},{},{}", fmt_f64(p.t), fmt_f64(p.v), fmt_f64(p.bound))?;
        }
        Ok(())
    })?;
    out.json(&report)?;
    Ok(format!(
        "Lyapunov check {}: R0 = {r0:.3}, max violation = {:.3e} over {} samples",
        if report.pass { "PASS" } else { "FAIL" },
        report.max_violation,
        report.samples.len()
    ))
}

struct Solved {
    optimum: Optimum,
    h: f64,
    converged: bool,
}

fn solve_policy(s: &Scenario, m: &Model, f_bar: f64) -> Result<Solved> {
    let w = cost_weights(s, m.grid, f_bar)?;
    if s.vaccinate.self_consistent {
        let sc = solve_self_consistent(&m.params, &m.demography, &w, s.vaccinate.tol)?;
        return Ok(Solved { optimum: sc.optimum, h: sc.h, converged: sc.converged });
    }
    let h = crate::steady::endemic_amplitude(&m.params.quarantine_free(), &m.u)?.unwrap_or(0.0);
    let k = build_kernels(h, &m.params, &m.demography, &w)?;
    let optimum = optimize(&k, &w, ForceConstraint::Free)?;
    Ok(Solved { optimum, h, converged: true })
}

fn describe_atoms(opt: &Optimum) -> String {
    if opt.psi.atoms().is_empty() {
        return "no vaccination".into();
    }
    let ages: Vec<String> = opt.psi.atoms().iter().map(|(a, w)| format!("{a:.2} (weight {w:.4})")).collect();
    format!("vaccinate at ages {}", ages.join(", "))
}

fn run_vaccinate(s: &Scenario, m: &Model, out: &mut Out) -> std::result::Result<String, Fail> {
    let f_bar = s.costs.f_bar.expect("validated: f_bar present for vaccinate");
    let sol = solve_policy(s, m, f_bar)?;
    let profiles = vaccinated_profiles(sol.h, &m.params, &sol.optimum.psi);
    out.write("csv", |w| profiles.write_csv(w))?;
    out.json(&PolicyReport::new(&sol.optimum, sol.h, sol.converged))?;
    Ok(format!(
        "{}; cost = {:.6e}, prevalence = {:.6e} (cap {f_bar:.6e}), h = {:.6e}",
        describe_atoms(&sol.optimum),
        sol.optimum.value.cost,
        sol.optimum.prevalence,
        sol.h
    ))
}

struct SweepRow {
    f_bar: f64,
    outcome: Result<Solved>,
}

fn run_sweep(s: &Scenario, m: &Model, out: &mut Out) -> std::result::Result<String, Fail> {
    let rows: Vec<SweepRow> =
        s.vaccinate.sweep.iter().map(|&f_bar| SweepRow { f_bar, outcome: solve_policy(s, m, f_bar) }).collect();
    // anything other than infeasibility or non-convergence aborts the sweep
    for row in &rows {
        if let Err(e) = &row.outcome {
            if !matches!(e, Error::Infeasible | Error::NotConverged { .. }) {
                return Err(Fail::Model(e.clone()));
            }
        }
    }
    out.write("csv", |w| {
        writeln!(w, "f_bar,status,cost,prevalence,h,n_atoms,age1,weight1,age2,weight2,age3,weight3,kkt_pass")?;
        for row in &rows {
            match &row.outcome {
                Ok(sol) => {
                    let o = &sol.optimum;
                    write!(
                        w,
                        "{},ok,{},{},{},{}",
                        fmt_f64(row.f_bar),
                        fmt_f64(o.value.cost),
                        fmt_f64(o.prevalence),
                        fmt_f64(sol.h),
                        o.psi.atoms().len()
                    )?;
                    for j in 0..3 {
                        match o.psi.atoms().get(j) {
                            Some(&(a, x)) => write!(w, ",{},{}", fmt_f64(a), fmt_f64(x))?,
                            None => write!(w, ",,")?,
                        }
                    }
                    writeln!(w, ",{}", o.kkt.pass)?;
                }
                Err(e) => {
                    let status = if matches!(e, Error::Infeasible) { "infeasible" } else { "not_converged" };
                    writeln!(w, "{},{status},,,,,,,,,,,", fmt_f64(row.f_bar))?;
                }
            }
        }
        Ok(())
    })?;
    let reports: Vec<Value> = rows
        .iter()
        .map(|row| match &row.outcome {
            Ok(sol) => json!({"f_bar": row.f_bar, "status": "ok", "policy": PolicyReport::new(&sol.optimum, sol.h, sol.converged)}),
            Err(e) => json!({"f_bar": row.f_bar, "status": e.to_string()}),
        })
        .collect();
    out.json(&reports)?;
    // the table is written; the first failure still sets the exit status
    if let Some(Err(e)) = rows.iter().map(|r| &r.outcome).find(|o| o.is_err()) {
        return Err(Fail::Model(e.clone()));
    }
    let costs: Vec<String> = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .map(|sol| format!("{:.4e}", sol.optimum.value.cost))
        .collect();
    Ok(format!("sweep over {} caps: costs {}", rows.len(), costs.join(", ")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{validate_config, ProfileSpec};

    #[test]
    fn closed_form_only_for_constant_inputs() {
        let text = r#"
run = "r0"
[grid]
a_max = 400.0
[demography]
mu = 0.02
tail_survival = 1e-3
[epi]
mu1 = 0.2
q1 = 0.1
gamma1 = 0.05
gamma2 = 0.1
gamma = 0.1
k2 = 1.0
"#;
        let s = validate_config(text, "x").unwrap();
        let m = build_model(&s).unwrap();
        assert!(closed_form(&s, &m).unwrap().is_some());
        let mut varying = s.clone();
        varying.epi.k1 = ProfileSpec::PiecewiseLinear(vec![(0.0, 1.0), (50.0, 2.0)]);
        let m2 = build_model(&varying).unwrap();
        assert!(closed_form(&varying, &m2).unwrap().is_none());
    }
}
