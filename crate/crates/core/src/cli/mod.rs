//! The `fieldlab` command line: `parse`, `run` and `converge`.
//!
//! Exit codes: 0 every check passed, 1 a check failed, 2 usage, parse or
//! refused-check error, 3 numerical abort.

pub mod checks;
pub mod output;
pub mod scenario;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::currents::{canonical_form, exponential_weight, CurrentError, NonlocalReport, VerificationEntry};
use crate::dsl::analysis::{check_k_condition, homogeneity_of};
use crate::dsl::{parse_lagrangian, DslError, LagrangianSpec, Poly};
use crate::dynamics::{evolve, fit_order, DynamicsError};
use crate::lattice::LatticeError;
use crate::solution::Solution;
use crate::theory::{Theory, TheoryError};

use checks::{CheckSummary, Outcome, RefusalRecord};
use output::{float, to_json};
use scenario::{preset, preset_scenario, Scenario};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(#[from] DslError),
    #[error("{0}")]
    Theory(#[from] TheoryError),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Unstable { .. } => CliError::Numerical(e.to_string()),
            DynamicsError::Theory(t) => CliError::Theory(t),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<CurrentError> for CliError {
    fn from(e: CurrentError) -> Self {
        match e {
            CurrentError::Theory(t) => CliError::Theory(t),
            CurrentError::Dsl(d) => CliError::Parse(d),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<LatticeError> for CliError {
    fn from(e: LatticeError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// A scenario file, or the id of a preset for its default scenario.
pub fn load_scenario(arg: &str) -> Result<Scenario, CliError> {
    match preset_scenario(arg) {
        Some(s) if !Path::new(arg).exists() => Ok(s),
        _ => Scenario::load(Path::new(arg)),
    }
}

/// Derived quantities shared by `parse` and the report header.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheorySummary {
    pub dim: usize,
    pub components: Vec<String>,
    pub lagrangian: String,
    pub dl_dfield: Vec<String>,
    /// `δL/δ∂_μφ_a` with the index lowered, indexed `[a][μ]`.
    pub dl_dgrad: Vec<Vec<String>>,
    pub euler_lagrange: Vec<String>,
    pub spacetime_independent: bool,
    /// `h` of an `e^{h·x}` weight, when the density has one.
    pub exponential_weight: Option<Vec<f64>>,
    /// Degree of `U` in `L = ½G∂φ∂φ − U` (of the weighted part when there is
    /// a weight). Absent when `L` is not of that form or `U` is not
    /// homogeneous; `U ≡ 0` is reported as degree 0.
    pub potential_degree: Option<f64>,
    pub scaling_dimension: f64,
    pub rho: Option<f64>,
}

impl TheorySummary {
    pub fn of(theory: &Theory) -> TheorySummary {
        let names = theory.component_names();
        let show = |p: &Poly| p.to_expr(names).to_string();
        let d = theory.dim();
        let weight = exponential_weight(theory).ok();
        let base = weight.as_ref().map_or(theory.lagrangian.clone(), |(_, l0)| l0.clone());
        let comps: Vec<usize> = (0..theory.ncomp()).collect();
        let potential_degree = canonical_form(theory, &base).ok().and_then(|c| {
            if c.potential.is_zero() {
                Some(0.0)
            } else {
                homogeneity_of(&c.potential, &comps, 16).map(|k| *k.numer() as f64 / *k.denom() as f64)
            }
        });
        TheorySummary {
            dim: d,
            components: names.to_vec(),
            lagrangian: show(&theory.lagrangian),
            dl_dfield: theory.dl_dfield.iter().map(show).collect(),
            dl_dgrad: (0..theory.ncomp()).map(|a| (0..d).map(|mu| show(&theory.momentum_lower(a, mu))).collect()).collect(),
            euler_lagrange: theory.euler_lagrange.iter().map(show).collect(),
            spacetime_independent: theory.is_spacetime_independent(),
            exponential_weight: weight.map(|(h, _)| h),
            potential_degree,
            scaling_dimension: (d as f64 - 2.0) / 2.0,
            rho: check_k_condition(theory.spec()),
        }
    }

    pub fn render(&self, spec: &LagrangianSpec) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| s.push_str(&format!("{k:<24}{v}\n"));
        line("ast", spec.to_string().replace('\n', "; "));
        line("dimension", self.dim.to_string());
        line("components", self.components.join(", "));
        line("canonical", self.lagrangian.clone());
        for (a, c) in self.components.iter().enumerate() {
            line(&format!("dL/d{c}"), self.dl_dfield[a].clone());
            for (mu, p) in self.dl_dgrad[a].iter().enumerate() {
                line(&format!("dL/d(d_{mu} {c})"), p.clone());
            }
            line(&format!("field equation [{c}]"), format!("{} = 0", self.euler_lagrange[a]));
        }
        line(
            "spacetime",
            if self.spacetime_independent { "spacetime-independent".into() } else { "spacetime-dependent".into() },
        );
        if let Some(h) = &self.exponential_weight {
            line("exponential weight h", format!("{h:?}"));
        }
        line("potential degree k", self.potential_degree.map_or("none".into(), |k| format!("{k}")));
        line("scaling dimension", format!("{}", self.scaling_dimension));
        line("rho", self.rho.map_or("none".into(), |r| format!("{r}")));
        s
    }
}

/// `fieldlab parse`: a Lagrangian file, a scenario file or a preset id.
pub fn cmd_parse(arg: &str) -> Result<String, CliError> {
    let spec = if let Some(src) = preset(arg).filter(|_| !Path::new(arg).exists()) {
        parse_lagrangian(src)?
    } else {
        let text =
            std::fs::read_to_string(arg).map_err(|e| CliError::Usage(format!("{arg}: {e}")))?;
        if text.trim_start().starts_with('{') {
            Scenario::from_json(&text)?.spec()?
        } else {
            parse_lagrangian(&text)?
        }
    };
    let theory = Theory::new(spec.clone())?;
    Ok(TheorySummary::of(&theory).render(&spec))
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub version: u32,
    pub scenario: Scenario,
    pub seed: Option<u64>,
    pub theory: TheorySummary,
    pub grid: Vec<usize>,
    pub checks: Vec<CheckSummary>,
    pub currents: Vec<VerificationEntry>,
    pub nonlocal: Vec<NonlocalReport>,
    pub refusals: Vec<RefusalRecord>,
    pub pass: bool,
}

/// Evolves the scenario and runs every requested check. Refusals come back
/// in the report, with no evolution done.
pub fn run_scenario(scenario: &Scenario, seed: Option<u64>) -> Result<(RunReport, Option<Solution>), CliError> {
    let theory = Arc::new(Theory::new(scenario.spec()?)?);
    let summary = TheorySummary::of(&theory);
    let (prepared, refusals) = checks::prepare(&theory, scenario)?;
    let mut report = RunReport {
        version: scenario::SCENARIO_VERSION,
        scenario: scenario.clone(),
        seed,
        theory: summary,
        grid: Vec::new(),
        checks: Vec::new(),
        currents: Vec::new(),
        nonlocal: Vec::new(),
        refusals,
        pass: false,
    };
    if !report.refusals.is_empty() {
        return Ok((report, None));
    }
    for p in &scenario.evolution.initial.fields {
        p.validate(&scenario.grid)?;
    }
    let block = evolve(&theory, &scenario.grid, &scenario.evolution_config(seed))?;
    let sol = Solution::new(theory, block)?;
    report.grid = sol.grid().shape().to_vec();
    let mut all = Outcome::default();
    for p in &prepared {
        let o = checks::execute(&sol, p, scenario)?;
        all.checks.extend(o.checks);
        all.entries.extend(o.entries);
        all.nonlocal.extend(o.nonlocal);
    }
    let finite = all.entries.iter().all(|e| e.residual_l2.is_finite() && e.drift.is_finite())
        && all.checks.iter().all(|c| c.metrics.values().all(|v| v.is_finite()));
    if !finite {
        return Err(CliError::Numerical("non-finite value in a check".into()));
    }
    report.pass = all.checks.iter().all(|c| c.pass);
    report.checks = all.checks;
    report.currents = all.entries;
    report.nonlocal = all.nonlocal;
    Ok((report, Some(sol)))
}

fn create_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))
}

/// `fieldlab run`: writes `report.json`, one CSV per current and
/// `nonlocal.csv`. Returns the exit code.
pub fn cmd_run(scenario: &Scenario, out: &Path, seed: Option<u64>) -> Result<i32, CliError> {
    create_dir(out)?;
    let (report, _) = run_scenario(scenario, seed)?;
    std::fs::write(out.join("report.json"), to_json(&report)?)?;
    if !report.refusals.is_empty() {
        for r in &report.refusals {
            eprintln!("refused {} ({}): {}", r.check, r.code, r.message);
        }
        return Ok(2);
    }
    for e in &report.currents {
        output::write_current_csv(&out.join(format!("{}.csv", output::file_stem(&e.current))), e)?;
    }
    for (i, r) in report.nonlocal.iter().enumerate() {
        let name = if i == 0 { "nonlocal.csv".to_string() } else { format!("nonlocal-{i}-{}.csv", r.family) };
        output::write_nonlocal_csv(&out.join(name), r)?;
    }
    for c in &report.checks {
        let fam = c.family.as_deref().map(|f| format!(" [{f}]")).unwrap_or_default();
        eprintln!("{:<18}{fam} {}", c.check, if c.pass { "pass" } else { "FAIL" });
    }
    Ok(if report.pass { 0 } else { 1 })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub check: String,
    pub family: Option<String>,
    pub quantity: String,
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    pub order: Option<f64>,
    pub pairwise: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub version: u32,
    pub scenario: Scenario,
    pub resolutions: Vec<usize>,
    pub rows: Vec<ConvergenceRow>,
    pub refusals: Vec<RefusalRecord>,
    pub pass: bool,
}

/// Errors at or below this are rounding; such a quantity converges exactly.
const EXACT: f64 = 1e-13;

/// Check, family and quantity of one convergence row.
type SeriesKey = (String, Option<String>, String);

/// Runs the scenario at every resolution and fits an order to each residual
/// and nonlocal constant.
pub fn converge_scenario(scenario: &Scenario, resolutions: &[usize], seed: Option<u64>) -> Result<ConvergenceReport, CliError> {
    if resolutions.len() < 3 {
        return Err(CliError::Usage(format!("{} resolutions given; at least 3 are needed", resolutions.len())));
    }
    let mut series: BTreeMap<SeriesKey, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut push = |key: SeriesKey, h: f64, e: f64| {
        let v = series.entry(key).or_default();
        v.0.push(h);
        v.1.push(e);
    };
    let mut refusals = Vec::new();
    for &n in resolutions {
        let s = scenario.refined(n);
        let (report, _) = run_scenario(&s, seed)?;
        if !report.refusals.is_empty() {
            refusals = report.refusals;
            break;
        }
        let h = s.grid.lengths[0] / n as f64;
        for c in &report.checks {
            for name in &c.currents {
                let e = report.currents.iter().find(|e| &e.current == name).expect("entry per current");
                push((c.check.clone(), c.family.clone(), format!("{name} residual_l2")), h, e.residual_l2);
            }
            for q in ["max_abs", "deviation"] {
                if let (true, Some(v)) = (c.currents.is_empty(), c.metrics.get(q)) {
                    push((c.check.clone(), c.family.clone(), format!("nonlocal {q}")), h, *v);
                }
            }
        }
    }
    let [lo, hi] = scenario.tolerances.order;
    let mut rows = Vec::new();
    for ((check, family, quantity), (h, errors)) in series {
        let lower_only = quantity.starts_with("nonlocal");
        let (order, pairwise, pass) = if errors.iter().all(|e| e.abs() <= EXACT) {
            (None, Vec::new(), true)
        } else {
            match fit_order(&h, &errors) {
                Ok(r) => {
                    let ok = r.order >= lo && (lower_only || r.order <= hi);
                    (Some(r.order), r.pairwise, ok)
                }
                Err(_) => (None, Vec::new(), false),
            }
        };
        rows.push(ConvergenceRow { check, family, quantity, h, errors, order, pairwise, pass });
    }
    if refusals.is_empty() && rows.is_empty() {
        return Err(CliError::Usage("the scenario requests nothing that converges".into()));
    }
    let pass = refusals.is_empty() && rows.iter().all(|r| r.pass);
    Ok(ConvergenceReport {
        version: scenario::SCENARIO_VERSION,
        scenario: scenario.clone(),
        resolutions: resolutions.to_vec(),
        rows,
        refusals,
        pass,
    })
}

/// `fieldlab converge`: writes `convergence.json` and `convergence.csv`.
pub fn cmd_converge(scenario: &Scenario, out: &Path, resolutions: &[usize], seed: Option<u64>) -> Result<i32, CliError> {
    create_dir(out)?;
    let report = converge_scenario(scenario, resolutions, seed)?;
    std::fs::write(out.join("convergence.json"), to_json(&report)?)?;
    if !report.refusals.is_empty() {
        for r in &report.refusals {
            eprintln!("refused {} ({}): {}", r.check, r.code, r.message);
        }
        return Ok(2);
    }
    let mut rows = Vec::new();
    for r in &report.rows {
        for (k, (h, e)) in r.h.iter().zip(&r.errors).enumerate() {
            rows.push(vec![
                r.check.clone(),
                r.family.clone().unwrap_or_default(),
                r.quantity.clone(),
                float(*h),
                float(*e),
                if k == 0 { r.order.map_or(String::new(), float) } else { String::new() },
            ]);
        }
        eprintln!(
            "{:<18} {:<28} order {}  {}",
            r.check,
            r.quantity,
            r.order.map_or("exact".into(), |o| format!("{o:.3}")),
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    output::write_table_csv(&out.join("convergence.csv"), &["check", "family", "quantity", "h", "error", "order"], &rows)?;
    Ok(if report.pass { 0 } else { 1 })
}

/// Parses `n1,n2,...`.
pub fn parse_resolutions(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("bad resolution \"{t}\""))))
        .collect()
}

pub fn default_out(scenario: &Scenario) -> PathBuf {
    PathBuf::from(format!("fieldlab-{}", output::file_stem(&scenario.name)))
}
