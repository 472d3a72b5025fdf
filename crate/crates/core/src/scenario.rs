//! Scenario files: line-oriented `key = value` text with dotted section names.
//!
//! ```text
//! # comments start with '#'
//! jet.p = 1
//! jet.tau = 1.0
//! jet.lambda = 1.0
//! jet.theta_bar = "1 + 0.1*sin(t - x)"
//! jet.xi_bar = "0"
//! jet.zeta = "0"
//!
//! [grid]            # a header applies its name to the keys below it
//! n_sites = 512
//! t_final = 1.0
//! ```
//!
//! The syntax is the key/value subset of TOML and is read with the `toml`
//! crate; the schema is checked here so every error names its key path.

use std::fs;
use std::path::{Path, PathBuf};

use toml::{Table, Value};
use thiserror::Error;

use crate::coin::WalkJet;
use crate::expr::{Expr, ExprError};
use crate::harness::{EpsilonLadder, Reference};
use crate::lattice::InitialProfile;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("`{key}`: {message}")]
    Schema { key: String, message: String },
    #[error("`{key}`: {source}")]
    Expression {
        key: String,
        #[source]
        source: ExprError,
    },
}

fn schema(key: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Schema { key: key.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Check {
    Probability,
    Converge,
    Hadamard,
    Kg,
    Gauge,
    ConservationForm,
    VariationalMinus,
    VariationalPlus,
    Lagrangian,
}

impl Check {
    pub const ALL: [Check; 9] = [
        Check::Probability,
        Check::Converge,
        Check::Hadamard,
        Check::Kg,
        Check::Gauge,
        Check::ConservationForm,
        Check::VariationalMinus,
        Check::VariationalPlus,
        Check::Lagrangian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Probability => "probability",
            Check::Converge => "converge",
            Check::Hadamard => "hadamard",
            Check::Kg => "kg",
            Check::Gauge => "gauge",
            Check::ConservationForm => "conservation_form",
            Check::VariationalMinus => "variational_minus",
            Check::VariationalPlus => "variational_plus",
            Check::Lagrangian => "lagrangian",
        }
    }

    pub fn from_name(s: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Duration {
    Steps(usize),
    Time(f64),
}

/// The walk lattice at the scenario's own `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkGrid {
    pub n_sites: usize,
    pub duration: Duration,
    pub x0: f64,
    pub t0: f64,
    pub epsilon: f64,
    pub snapshot_every: usize,
}

impl WalkGrid {
    pub fn dx(&self, jet: &WalkJet) -> f64 {
        jet.lambda * self.epsilon.powf(jet.delta)
    }

    pub fn dt(&self, jet: &WalkJet) -> f64 {
        jet.tau * self.epsilon
    }

    pub fn period(&self, jet: &WalkJet) -> f64 {
        self.n_sites as f64 * self.dx(jet)
    }

    pub fn j_steps(&self, jet: &WalkJet) -> usize {
        match self.duration {
            Duration::Steps(j) => j,
            Duration::Time(t) => (t / self.dt(jet)).round() as usize,
        }
    }

    pub fn t_final(&self, jet: &WalkJet) -> f64 {
        match self.duration {
            Duration::Steps(j) => j as f64 * self.dt(jet),
            Duration::Time(t) => t,
        }
    }
}

/// Pass thresholds; every field can be overridden under `tolerances.`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub probability: f64,
    pub continuum_drift: f64,
    pub order_min: f64,
    pub order_max: f64,
    pub hadamard_factor: f64,
    pub kg_order: f64,
    pub gauge_order: f64,
    pub gauge_finest: f64,
    pub conservation_drift: f64,
    pub lagrangian_order: f64,
    pub variational: f64,
    pub variational_match: f64,
    pub curvature_order: f64,
    pub curvature_finest: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            probability: 1e-12,
            continuum_drift: 1e-6,
            order_min: 0.8,
            order_max: 1.2,
            hadamard_factor: 10.0,
            kg_order: 1.8,
            gauge_order: 1.8,
            gauge_finest: 1e-5,
            conservation_drift: 1e-8,
            lagrangian_order: 1.8,
            variational: 1e-3,
            variational_match: 0.05,
            curvature_order: 1.8,
            curvature_finest: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumSettings {
    pub cfl: f64,
    pub x0: f64,
    pub period: f64,
    /// Integration time of the continuum checks.
    pub t_final: f64,
    /// Site counts of the refinement studies, coarsest first.
    pub refinement: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSettings {
    pub j: u8,
    pub alpha: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub jet: WalkJet,
    pub grid: WalkGrid,
    pub initial: InitialProfile,
    pub ladder: EpsilonLadder,
    pub checks: Vec<Check>,
    pub output_dir: Option<PathBuf>,
    pub tolerances: Tolerances,
    pub continuum: ContinuumSettings,
    pub gauge: GaugeSettings,
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Scenario::parse(&text)
}

/// Typed view of one section with key-path-aware accessors.
struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn of(root: &'a Table, name: &'a str, allowed: &[&str]) -> Result<Self, ScenarioError> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(schema(name, "expected a section")),
        };
        if let Some(t) = table {
            if let Some(k) = t.keys().find(|k| !allowed.contains(&k.as_str())) {
                return Err(schema(format!("{name}.{k}"), "unknown key"));
            }
        }
        Ok(Section { name, table })
    }

    fn key(&self, k: &str) -> String {
        format!("{}.{}", self.name, k)
    }

    fn raw(&self, k: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(k))
    }

    fn require<T>(&self, k: &str, v: Option<T>) -> Result<T, ScenarioError> {
        v.ok_or_else(|| schema(self.key(k), "required key is missing"))
    }

    fn f64(&self, k: &str) -> Result<Option<f64>, ScenarioError> {
        self.raw(k).map(|v| number(v, || self.key(k))).transpose()
    }

    fn f64_or(&self, k: &str, default: f64) -> Result<f64, ScenarioError> {
        Ok(self.f64(k)?.unwrap_or(default))
    }

    fn positive(&self, k: &str, default: Option<f64>) -> Result<f64, ScenarioError> {
        let v = match self.f64(k)? {
            Some(v) => v,
            None => self.require(k, default)?,
        };
        if v > 0.0 {
            Ok(v)
        } else {
            Err(schema(self.key(k), format!("must be positive, got {v}")))
        }
    }

    fn usize(&self, k: &str) -> Result<Option<usize>, ScenarioError> {
        self.raw(k).map(|v| count(v, || self.key(k))).transpose()
    }

    fn string(&self, k: &str) -> Result<Option<&'a str>, ScenarioError> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(schema(self.key(k), "expected a quoted string")),
        }
    }

    /// A quoted expression or a bare number.
    fn expr(&self, k: &str) -> Result<Option<Expr>, ScenarioError> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::String(s)) => s
                .parse()
                .map(Some)
                .map_err(|source| ScenarioError::Expression { key: self.key(k), source }),
            Some(v) => number(v, || self.key(k)).map(|x| Some(Expr::Num(x))),
        }
    }

    fn list(&self, k: &str) -> Result<Option<&'a [Value]>, ScenarioError> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Array(a)) => Ok(Some(a)),
            Some(_) => Err(schema(self.key(k), "expected a list")),
        }
    }

    fn complex(&self, k: &str, default: Complex64) -> Result<Complex64, ScenarioError> {
        match self.list(k)? {
            None => Ok(default),
            Some([re, im]) => Ok(Complex64::new(number(re, || self.key(k))?, number(im, || self.key(k))?)),
            Some(_) => Err(schema(self.key(k), "expected [re, im]")),
        }
    }
}

fn number(v: &Value, key: impl Fn() -> String) -> Result<f64, ScenarioError> {
    match v {
        Value::Float(x) if x.is_finite() => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(schema(key(), "expected a finite number")),
    }
}

fn count(v: &Value, key: impl Fn() -> String) -> Result<usize, ScenarioError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(schema(key(), "expected a non-negative integer")),
    }
}

const TOP_LEVEL: [&str; 9] = [
    "jet", "grid", "initial", "ladder", "checks", "output", "tolerances", "continuum", "gauge",
];

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| ScenarioError::Parse {
            line: e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1),
            message: e.message().to_string(),
        })?;
        if let Some(k) = root.keys().find(|k| !TOP_LEVEL.contains(&k.as_str())) {
            return Err(schema(k.as_str(), "unknown key"));
        }
        let jet = parse_jet(&root)?;
        let grid = parse_grid(&root, &jet)?;
        let period = grid.period(&jet);
        let initial = parse_initial(&root, grid.x0, period)?;
        let ladder = parse_ladder(&root, &jet)?;
        let checks = parse_checks(&root)?;
        let output = Section::of(&root, "output", &["dir"])?;
        let output_dir = output.string("dir")?.map(PathBuf::from);
        let tolerances = parse_tolerances(&root)?;
        let continuum = parse_continuum(&root, &grid, period)?;
        let gauge = parse_gauge(&root)?;
        Ok(Scenario {
            jet,
            grid,
            initial,
            ladder,
            checks,
            output_dir,
            tolerances,
            continuum,
            gauge,
        })
    }
}

fn parse_jet(root: &Table) -> Result<WalkJet, ScenarioError> {
    let s = Section::of(
        root,
        "jet",
        &["p", "alpha", "beta", "delta", "tau", "lambda", "theta_bar", "xi_bar", "zeta"],
    )?;
    let p = match s.usize("p")? {
        None => 1,
        Some(p @ 0..=1) => p as u8,
        Some(p) => return Err(schema(s.key("p"), format!("must be 0 or 1, got {p}"))),
    };
    let theta_bar = s.expr("theta_bar")?;
    let xi_bar = s.expr("xi_bar")?;
    let zeta = s.expr("zeta")?;
    Ok(WalkJet {
        p,
        alpha: s.positive("alpha", Some(1.0))?,
        beta: s.positive("beta", Some(1.0))?,
        delta: s.positive("delta", Some(1.0))?,
        tau: s.positive("tau", None)?,
        lambda: s.positive("lambda", None)?,
        theta_bar: s.require("theta_bar", theta_bar)?,
        xi_bar: s.require("xi_bar", xi_bar)?,
        zeta: s.require("zeta", zeta)?,
    })
}

fn parse_grid(root: &Table, jet: &WalkJet) -> Result<WalkGrid, ScenarioError> {
    let s = Section::of(
        root,
        "grid",
        &["n_sites", "j_steps", "t_final", "x0", "t0", "epsilon", "snapshot_every"],
    )?;
    let n = s.usize("n_sites")?;
    let n_sites = s.require("n_sites", n)?;
    if n_sites < 5 {
        return Err(schema(s.key("n_sites"), "need at least 5 sites"));
    }
    let duration = match (s.usize("j_steps")?, s.f64("t_final")?) {
        (Some(j), None) => Duration::Steps(j),
        (None, Some(t)) if t >= 0.0 => Duration::Time(t),
        (None, Some(_)) => return Err(schema(s.key("t_final"), "must be non-negative")),
        (Some(_), Some(_)) => return Err(schema(s.key("t_final"), "give j_steps or t_final, not both")),
        (None, None) => return Err(schema(s.key("j_steps"), "one of j_steps or t_final is required")),
    };
    let grid = WalkGrid {
        n_sites,
        duration,
        x0: s.f64_or("x0", 0.0)?,
        t0: s.f64_or("t0", 0.0)?,
        epsilon: s.positive("epsilon", Some(0.01))?,
        snapshot_every: s.usize("snapshot_every")?.unwrap_or(0),
    };
    if let Duration::Time(t) = duration {
        let steps = t / grid.dt(jet);
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(schema(s.key("t_final"), "must be a whole number of steps tau * epsilon"));
        }
    }
    Ok(grid)
}

fn parse_initial(root: &Table, x0: f64, period: f64) -> Result<InitialProfile, ScenarioError> {
    let s = Section::of(root, "initial", &["center", "width", "wavenumber", "weight_minus", "weight_plus"])?;
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let p = InitialProfile::gaussian(
        s.f64_or("center", x0 + 0.5 * period)?,
        s.positive("width", Some(period / 20.0))?,
        s.f64_or("wavenumber", 0.0)?,
        s.complex("weight_minus", one)?,
        s.complex("weight_plus", zero)?,
    );
    if p.weights.0.norm() == 0.0 && p.weights.1.norm() == 0.0 {
        return Err(schema(s.key("weight_minus"), "both weights are zero"));
    }
    Ok(p)
}

fn parse_ladder(root: &Table, jet: &WalkJet) -> Result<EpsilonLadder, ScenarioError> {
    let s = Section::of(root, "ladder", &["eps", "t_physical", "reference"])?;
    let mut ladder = EpsilonLadder::default();
    if let Some(list) = s.list("eps")? {
        ladder.eps = list.iter().map(|v| number(v, || s.key("eps"))).collect::<Result<_, _>>()?;
    }
    ladder.t_physical = s.positive("t_physical", Some(ladder.t_physical))?;
    ladder.reference = match s.string("reference")? {
        None => ladder.reference,
        Some("analytic") => Reference::Analytic,
        Some("fine_continuum") => Reference::FineContinuum,
        Some(other) => {
            return Err(schema(s.key("reference"), format!("expected \"analytic\" or \"fine_continuum\", got {other:?}")))
        }
    };
    ladder.validate().map_err(|e| schema(s.key("eps"), e.to_string()))?;
    ladder.steps(jet.tau).map_err(|e| schema(s.key("t_physical"), e.to_string()))?;
    Ok(ladder)
}

fn parse_checks(root: &Table) -> Result<Vec<Check>, ScenarioError> {
    let Some(v) = root.get("checks") else {
        return Ok(Check::ALL.to_vec());
    };
    let Value::Array(items) = v else {
        return Err(schema("checks", "expected a list of check names"));
    };
    let mut out = Vec::new();
    for item in items {
        let name = item.as_str().ok_or_else(|| schema("checks", "expected quoted check names"))?;
        let c = Check::from_name(name).ok_or_else(|| schema("checks", format!("unknown check {name:?}")))?;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    Ok(out)
}

fn parse_tolerances(root: &Table) -> Result<Tolerances, ScenarioError> {
    let names = [
        "probability",
        "continuum_drift",
        "order_min",
        "order_max",
        "hadamard_factor",
        "kg_order",
        "gauge_order",
        "gauge_finest",
        "conservation_drift",
        "lagrangian_order",
        "variational",
        "variational_match",
        "curvature_order",
        "curvature_finest",
    ];
    let s = Section::of(root, "tolerances", &names)?;
    let mut t = Tolerances::default();
    let slots: [&mut f64; 14] = [
        &mut t.probability,
        &mut t.continuum_drift,
        &mut t.order_min,
        &mut t.order_max,
        &mut t.hadamard_factor,
        &mut t.kg_order,
        &mut t.gauge_order,
        &mut t.gauge_finest,
        &mut t.conservation_drift,
        &mut t.lagrangian_order,
        &mut t.variational,
        &mut t.variational_match,
        &mut t.curvature_order,
        &mut t.curvature_finest,
    ];
    for (name, slot) in names.iter().zip(slots) {
        *slot = s.positive(name, Some(*slot))?;
    }
    if t.order_min > t.order_max {
        return Err(schema("tolerances.order_min", "exceeds tolerances.order_max"));
    }
    Ok(t)
}

fn parse_continuum(root: &Table, grid: &WalkGrid, period: f64) -> Result<ContinuumSettings, ScenarioError> {
    let s = Section::of(root, "continuum", &["cfl", "x0", "period", "t_final", "refinement"])?;
    let refinement = match s.list("refinement")? {
        None => vec![256, 512, 1024, 2048],
        Some(list) => list.iter().map(|v| count(v, || s.key("refinement"))).collect::<Result<_, _>>()?,
    };
    if refinement.iter().any(|&n| n < 5) || refinement.windows(2).any(|w| w[1] <= w[0]) {
        return Err(schema(s.key("refinement"), "site counts must be at least 5 and strictly increasing"));
    }
    Ok(ContinuumSettings {
        cfl: s.positive("cfl", Some(0.5))?,
        x0: s.f64_or("x0", grid.x0)?,
        period: s.positive("period", Some(period))?,
        t_final: s.positive("t_final", Some(0.5))?,
        refinement,
    })
}

fn parse_gauge(root: &Table) -> Result<GaugeSettings, ScenarioError> {
    let s = Section::of(root, "gauge", &["j", "alpha"])?;
    let j = match s.usize("j")? {
        None => 3,
        Some(j @ 1..=3) => j as u8,
        Some(j) => return Err(schema(s.key("j"), format!("must be 1, 2 or 3, got {j}"))),
    };
    let alpha = match s.expr("alpha")? {
        Some(a) => a,
        None => "0.5*sin(t + x)".parse().expect("default gauge function parses"),
    };
    Ok(GaugeSettings { j, alpha })
}
