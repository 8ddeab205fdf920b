//! Scenario files: TOML with nested sections, validated in full before any
//! computation so that every problem is reported at once.

use std::fmt;
use std::path::PathBuf;

use toml::{Table, Value};

use crate::grid::{AgeGrid, Profile};

pub const DEFAULT_A_MAX: f64 = 100.0;
pub const DEFAULT_N: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    Simulate,
    Steady,
    R0,
    Lyapunov,
    Vaccinate,
    Sweep,
}

impl RunKind {
    pub fn name(self) -> &'static str {
        match self {
            RunKind::Simulate => "simulate",
            RunKind::Steady => "steady",
            RunKind::R0 => "r0",
            RunKind::Lyapunov => "lyapunov",
            RunKind::Vaccinate => "vaccinate",
            RunKind::Sweep => "sweep",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Self::Simulate, Self::Steady, Self::R0, Self::Lyapunov, Self::Vaccinate, Self::Sweep]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

impl fmt::Display for RunKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An age profile given as a constant or a named shape.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSpec {
    Constant(f64),
    /// Linear between breakpoints `(age, value)`, constant beyond the ends.
    PiecewiseLinear(Vec<(f64, f64)>),
    /// `scale · exp(rate · a)`.
    Exponential { scale: f64, rate: f64 },
}

impl ProfileSpec {
    pub fn eval(&self, a: f64) -> f64 {
        match self {
            ProfileSpec::Constant(c) => *c,
            ProfileSpec::Exponential { scale, rate } => scale * (rate * a).exp(),
            ProfileSpec::PiecewiseLinear(pts) => {
                let first = pts[0];
                let last = pts[pts.len() - 1];
                if a <= first.0 {
                    return first.1;
                }
                if a >= last.0 {
                    return last.1;
                }
                let j = pts.partition_point(|p| p.0 <= a);
                let (a0, v0) = pts[j - 1];
                let (a1, v1) = pts[j];
                v0 + (v1 - v0) * (a - a0) / (a1 - a0)
            }
        }
    }

    pub fn on(&self, grid: AgeGrid) -> crate::Result<Profile> {
        Profile::from_fn(grid, |a| self.eval(a))
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            ProfileSpec::Constant(c) => Some(*c),
            ProfileSpec::Exponential { scale, rate } if *rate == 0.0 => Some(*scale),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpiSpec {
    pub mu1: f64,
    pub q1: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma: f64,
    pub k1: ProfileSpec,
    pub k2: ProfileSpec,
    /// When set, `k₂` is rescaled so the reproduction number equals it.
    pub target_r0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemographySpec {
    pub mu: ProfileSpec,
    /// Defaults to `mu`, which keeps the population stationary.
    pub beta: Option<ProfileSpec>,
    pub tail_survival: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub g1: ProfileSpec,
    pub g2: ProfileSpec,
    pub f: ProfileSpec,
    pub f_bar: Option<f64>,
}

/// Transient runs start from a Gaussian bump of exposed individuals.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSpec {
    pub t_end: f64,
    pub stride: usize,
    pub seed_mass: f64,
    pub seed_center: f64,
    pub seed_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaccinateSpec {
    /// Iterate on the force of infection; otherwise optimize once at the
    /// unvaccinated endemic amplitude.
    pub self_consistent: bool,
    pub tol: f64,
    /// Caps for `run = "sweep"`.
    pub sweep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub run: RunKind,
    pub output_dir: PathBuf,
    pub a_max: f64,
    pub n: usize,
    pub demography: DemographySpec,
    pub epi: EpiSpec,
    pub costs: CostSpec,
    pub simulate: SimulateSpec,
    pub vaccinate: VaccinateSpec,
}

impl Scenario {
    pub fn grid(&self) -> crate::Result<AgeGrid> {
        AgeGrid::new(self.a_max, self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Dotted field path, e.g. `epi.gamma`.
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

struct Checker<'a> {
    text: &'a str,
    diags: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn report(&mut self, field: &str, message: impl Into<String>) {
        let line = locate_key(self.text, field);
        self.diags.push(Diagnostic { field: field.to_string(), line, message: message.into() });
    }

    fn section<'t>(&mut self, root: &'t Table, name: &str, allowed: &[&str], required: bool) -> Option<&'t Table> {
        match root.get(name) {
            None => {
                if required {
                    self.report(name, "missing section");
                }
                None
            }
            Some(Value::Table(t)) => {
                self.unknown_keys(t, name, allowed);
                Some(t)
            }
            Some(_) => {
                self.report(name, "expected a section");
                None
            }
        }
    }

    fn unknown_keys(&mut self, t: &Table, prefix: &str, allowed: &[&str]) {
        for key in t.keys() {
            if !allowed.contains(&key.as_str()) {
                let field = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
                self.report(&field, "unknown key");
            }
        }
    }

    fn number(&mut self, t: Option<&Table>, section: &str, key: &str) -> Option<Option<f64>> {
        let field = format!("{section}.{key}");
        match t.and_then(|t| t.get(key)) {
            None => Some(None),
            Some(v) => match as_f64(v) {
                Some(x) if x.is_finite() => Some(Some(x)),
                Some(_) => {
                    self.report(&field, "must be finite");
                    None
                }
                None => {
                    self.report(&field, "expected a number");
                    None
                }
            },
        }
    }

    fn rate(&mut self, t: Option<&Table>, section: &str, key: &str) -> f64 {
        match self.number(t, section, key) {
            Some(Some(x)) if x >= 0.0 => x,
            Some(Some(_)) => {
                self.report(&format!("{section}.{key}"), "rate must be ≥ 0");
                0.0
            }
            Some(None) if t.is_some() => {
                self.report(&format!("{section}.{key}"), "missing required field");
                0.0
            }
            _ => 0.0,
        }
    }

    fn optional(&mut self, t: Option<&Table>, section: &str, key: &str, default: f64, positive: bool) -> f64 {
        match self.number(t, section, key) {
            Some(Some(x)) => {
                if positive && x <= 0.0 {
                    self.report(&format!("{section}.{key}"), "must be > 0");
                } else if !positive && x < 0.0 {
                    self.report(&format!("{section}.{key}"), "must be ≥ 0");
                }
                x
            }
            _ => default,
        }
    }

    fn profile(&mut self, t: Option<&Table>, section: &str, key: &str, default: Option<f64>) -> ProfileSpec {
        let field = format!("{section}.{key}");
        let fallback = ProfileSpec::Constant(default.unwrap_or(0.0));
        let Some(v) = t.and_then(|t| t.get(key)) else {
            if default.is_none() && t.is_some() {
                self.report(&field, "missing required field");
            }
            return fallback;
        };
        if let Some(x) = as_f64(v) {
            if !(x.is_finite() && x >= 0.0) {
                self.report(&field, "rate must be ≥ 0");
            }
            return ProfileSpec::Constant(x);
        }
        let Value::Table(tbl) = v else {
            self.report(&field, "expected a number or a profile table");
            return fallback;
        };
        let kind = tbl.get("kind").and_then(Value::as_str).unwrap_or("");
        match kind {
            "constant" => {
                self.unknown_keys(tbl, &field, &["kind", "value"]);
                match tbl.get("value").and_then(as_f64) {
                    Some(x) if x.is_finite() && x >= 0.0 => ProfileSpec::Constant(x),
                    Some(_) => {
                        self.report(&format!("{field}.value"), "rate must be ≥ 0");
                        fallback
                    }
                    None => {
                        self.report(&format!("{field}.value"), "missing required number");
                        fallback
                    }
                }
            }
            "exponential" => {
                self.unknown_keys(tbl, &field, &["kind", "scale", "rate"]);
                let scale = tbl.get("scale").and_then(as_f64);
                let rate = tbl.get("rate").and_then(as_f64);
                match (scale, rate) {
                    (Some(s), Some(r)) if s.is_finite() && r.is_finite() => {
                        if s < 0.0 {
                            self.report(&format!("{field}.scale"), "rate must be ≥ 0");
                        }
                        ProfileSpec::Exponential { scale: s, rate: r }
                    }
                    _ => {
                        self.report(&field, "exponential profile needs numeric `scale` and `rate`");
                        fallback
                    }
                }
            }
            "piecewise_linear" => {
                self.unknown_keys(tbl, &field, &["kind", "points"]);
                match tbl.get("points").and_then(|p| parse_points(p)) {
                    Some(pts) if pts.iter().all(|p| p.1 >= 0.0) => ProfileSpec::PiecewiseLinear(pts),
                    Some(_) => {
                        self.report(&format!("{field}.points"), "rate must be ≥ 0");
                        fallback
                    }
                    None => {
                        self.report(
                            &format!("{field}.points"),
                            "expected a nonempty list of [age, value] pairs with increasing ages",
                        );
                        fallback
                    }
                }
            }
            other => {
                self.report(
                    &format!("{field}.kind"),
                    format!("unknown profile kind {other:?}; use constant, piecewise_linear or exponential"),
                );
                fallback
            }
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn parse_points(v: &Value) -> Option<Vec<(f64, f64)>> {
    let arr = v.as_array()?;
    let mut pts = Vec::with_capacity(arr.len());
    for p in arr {
        let pair = p.as_array()?;
        if pair.len() != 2 {
            return None;
        }
        let (a, y) = (as_f64(&pair[0])?, as_f64(&pair[1])?);
        if !(a.is_finite() && y.is_finite()) {
            return None;
        }
        if let Some(&(prev, _)) = pts.last() {
            if a <= prev {
                return None;
            }
        }
        pts.push((a, y));
    }
    (!pts.is_empty()).then_some(pts)
}

/// Best-effort line of `section.key` in the source text (1-based).
fn locate_key(text: &str, field: &str) -> Option<usize> {
    let mut parts: Vec<&str> = field.split('.').collect();
    let key = parts.pop()?;
    let section = parts.first().copied().unwrap_or("");
    let mut current = "";
    let mut section_line = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[') {
            current = h.trim_end_matches(']').trim();
            if current == key && section.is_empty() {
                return Some(n + 1);
            }
            if current == section {
                section_line = Some(n + 1);
            }
            continue;
        }
        if current == section {
            if let Some((lhs, _)) = line.split_once('=') {
                if lhs.trim() == key {
                    return Some(n + 1);
                }
            }
        }
    }
    section_line
}

const TOP_KEYS: &[&str] = &["name", "run", "output_dir", "grid", "demography", "epi", "costs", "simulate", "vaccinate"];

/// Parses and validates a scenario; on failure every violation is listed.
pub fn validate_config(text: &str, default_name: &str) -> Result<Scenario, Vec<Diagnostic>> {
    let root: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            let e: toml::de::Error = e;
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            return Err(vec![Diagnostic { field: "<syntax>".into(), line, message: e.message().to_string() }]);
        }
    };
    let mut c = Checker { text, diags: Vec::new() };
    c.unknown_keys(&root, "", TOP_KEYS);

    let name = match root.get("name") {
        None => default_name.to_string(),
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(_) => {
            c.report("name", "expected a nonempty string");
            default_name.to_string()
        }
    };
    let run = match root.get("run") {
        None => {
            c.report("run", "missing required field");
            RunKind::R0
        }
        Some(Value::String(s)) => RunKind::parse(s).unwrap_or_else(|| {
            c.report("run", format!("unknown run {s:?}; use simulate, steady, r0, lyapunov, vaccinate or sweep"));
            RunKind::R0
        }),
        Some(_) => {
            c.report("run", "expected a string");
            RunKind::R0
        }
    };
    let output_dir = match root.get("output_dir") {
        None => PathBuf::from("."),
        Some(Value::String(s)) => PathBuf::from(s),
        Some(_) => {
            c.report("output_dir", "expected a path string");
            PathBuf::from(".")
        }
    };

    let grid = c.section(&root, "grid", &["a_max", "n"], false);
    let a_max = c.optional(grid, "grid", "a_max", DEFAULT_A_MAX, true);
    let n = match grid.and_then(|g| g.get("n")) {
        None => DEFAULT_N,
        Some(Value::Integer(i)) if *i >= 3 => *i as usize,
        Some(_) => {
            c.report("grid.n", "expected an integer ≥ 3");
            DEFAULT_N
        }
    };

    let dem = c.section(&root, "demography", &["mu", "beta", "tail_survival"], true);
    let demography = DemographySpec {
        mu: c.profile(dem, "demography", "mu", None),
        beta: dem.and_then(|d| d.get("beta")).map(|_| c.profile(dem, "demography", "beta", None)),
        tail_survival: c.optional(dem, "demography", "tail_survival", crate::demography::DEFAULT_TAIL_SURVIVAL, true),
    };

    let epi_t = c.section(&root, "epi", &["mu1", "q1", "gamma1", "gamma2", "gamma", "k1", "k2", "r0"], true);
    let epi = EpiSpec {
        mu1: c.rate(epi_t, "epi", "mu1"),
        q1: c.rate(epi_t, "epi", "q1"),
        gamma1: c.rate(epi_t, "epi", "gamma1"),
        gamma2: c.rate(epi_t, "epi", "gamma2"),
        gamma: c.rate(epi_t, "epi", "gamma"),
        k1: c.profile(epi_t, "epi", "k1", Some(1.0)),
        k2: c.profile(epi_t, "epi", "k2", None),
        target_r0: match c.number(epi_t, "epi", "r0") {
            Some(Some(x)) if x >= 0.0 => Some(x),
            Some(Some(_)) => {
                c.report("epi.r0", "must be ≥ 0");
                None
            }
            _ => None,
        },
    };

    let cost_t = c.section(&root, "costs", &["g1", "g2", "f", "f_bar"], false);
    let costs = CostSpec {
        g1: c.profile(cost_t, "costs", "g1", Some(1.0)),
        g2: c.profile(cost_t, "costs", "g2", Some(0.0)),
        f: c.profile(cost_t, "costs", "f", Some(1.0)),
        f_bar: match c.number(cost_t, "costs", "f_bar") {
            Some(Some(x)) if x > 0.0 => Some(x),
            Some(Some(_)) => {
                c.report("costs.f_bar", "must be > 0");
                None
            }
            _ => None,
        },
    };

    let sim_t = c.section(&root, "simulate", &["t_end", "stride", "seed_mass", "seed_center", "seed_width"], false);
    let simulate = SimulateSpec {
        t_end: c.optional(sim_t, "simulate", "t_end", 100.0, false),
        stride: match sim_t.and_then(|s| s.get("stride")) {
            None => 20,
            Some(Value::Integer(i)) if *i >= 1 => *i as usize,
            Some(_) => {
                c.report("simulate.stride", "expected an integer ≥ 1");
                20
            }
        },
        seed_mass: c.optional(sim_t, "simulate", "seed_mass", 1e-4, false),
        seed_center: c.optional(sim_t, "simulate", "seed_center", 25.0, false),
        seed_width: c.optional(sim_t, "simulate", "seed_width", 5.0, true),
    };

    let vac_t = c.section(&root, "vaccinate", &["self_consistent", "tol", "sweep"], false);
    let self_consistent = match vac_t.and_then(|v| v.get("self_consistent")) {
        None => true,
        Some(Value::Boolean(b)) => *b,
        Some(_) => {
            c.report("vaccinate.self_consistent", "expected true or false");
            true
        }
    };
    let sweep = match vac_t.and_then(|v| v.get("sweep")) {
        None => Vec::new(),
        Some(v) => match v.as_array().map(|a| a.iter().map(as_f64).collect::<Option<Vec<f64>>>()) {
            Some(Some(caps)) if caps.iter().all(|&x| x > 0.0 && x.is_finite()) => caps,
            _ => {
                c.report("vaccinate.sweep", "expected a list of positive prevalence caps");
                Vec::new()
            }
        },
    };
    let vaccinate = VaccinateSpec { self_consistent, tol: c.optional(vac_t, "vaccinate", "tol", 1e-9, true), sweep };

    match run {
        RunKind::Vaccinate if costs.f_bar.is_none() => c.report("costs.f_bar", "required for run = \"vaccinate\""),
        RunKind::Sweep if vaccinate.sweep.is_empty() => c.report("vaccinate.sweep", "required for run = \"sweep\""),
        _ => {}
    }
    if let ProfileSpec::Constant(m) = demography.mu {
        if m == 0.0 && dem.is_some() {
            c.report("demography.mu", "mortality must be positive somewhere");
        }
    }

    if c.diags.is_empty() {
        Ok(Scenario { name, run, output_dir, a_max, n, demography, epi, costs, simulate, vaccinate })
    } else {
        Err(c.diags)
    }
}
