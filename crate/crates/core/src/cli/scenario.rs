//! Scenario files: a theory, a spatial torus, Cauchy data and the checks to
//! run. JSON with a top-level `version`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::currents::{FamilyKind, PerturbationFamily};
use crate::dsl::{parse_lagrangian, LagrangianSpec};
use crate::dynamics::{EvolutionConfig, InitialData, Profile, SpatialGrid};

use super::CliError;

pub const SCENARIO_VERSION: u32 = 1;

pub const PRESETS: [&str; 8] = [
    "free-massless",
    "klein-gordon",
    "phi4",
    "phi4-massless-4d",
    "complex-kg",
    "complex-phi4-massless",
    "dissipative-kg",
    "spacetime-dependent",
];

/// Lagrangian source of a preset. Parameters can be overridden per scenario.
pub fn preset(id: &str) -> Option<&'static str> {
    Some(match id {
        "free-massless" => "dim 2\nL = 0.5*d(phi,mu)*d(phi,^mu)",
        "klein-gordon" => "dim 2\nparam m = 1\nL = 0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2",
        "phi4" => "dim 2\nparam m = 1\nparam g = 1\nL = 0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2 - g/24*phi^4",
        "phi4-massless-4d" => "dim 4\nparam g = 1\nL = 0.5*d(phi,mu)*d(phi,^mu) - g/24*phi^4",
        "complex-kg" => "dim 2\nfield phi complex\nparam m = 1\nL = d(phi,mu)*d(phistar,^mu) - m^2*phi*phistar",
        "complex-phi4-massless" => {
            "dim 4\nfield phi complex\nparam v = 1\nL = d(phi,mu)*d(phistar,^mu) - v/2*(phi*phistar)^2"
        }
        "dissipative-kg" => {
            "dim 2\nparam m = 1\nparam h0 = 0.1\nparam h1 = 0.05\n\
             L = exp(h0*x0 + h1*x1)*(0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2)"
        }
        // a(x) = al·x0², so ∂^μa ∂_μφ = 2 al x0 ∂_0φ.
        "spacetime-dependent" => {
            "dim 2\nparam sigma = 2\nparam al = 0.1\nparam c = 0\n\
             L = 0.5*d(phi,mu)*d(phi,^mu) + 2*al*x0*d(phi,0) - 0.5*sigma*phi^2 - sigma*al*x0^2*phi + c"
        }
        _ => return None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Check {
    #[serde(rename = "nonlocal")]
    Nonlocal,
    T,
    K,
    #[serde(rename = "T-generated")]
    TGenerated,
    #[serde(rename = "scaling")]
    Scaling,
    #[serde(rename = "dissipative")]
    Dissipative,
    #[serde(rename = "finite-invariance")]
    FiniteInvariance,
    #[serde(rename = "trivial-families")]
    TrivialFamilies,
}

impl Check {
    pub fn label(self) -> &'static str {
        match self {
            Check::Nonlocal => "nonlocal",
            Check::T => "T",
            Check::K => "K",
            Check::TGenerated => "T-generated",
            Check::Scaling => "scaling",
            Check::Dissipative => "dissipative",
            Check::FiniteInvariance => "finite-invariance",
            Check::TrivialFamilies => "trivial-families",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evolution {
    pub dt: f64,
    pub steps: usize,
    #[serde(default = "yes")]
    pub courant_check: bool,
    pub initial: InitialData,
}

fn yes() -> bool {
    true
}

/// Pass thresholds. Defaults match the acceptance tolerances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative (or absolute, for a vanishing charge) drift of `Q(t)`.
    pub drift: f64,
    /// Largest `|nonlocal constant|` accepted in a single run, relative to
    /// the size of the terms that cancel in it.
    pub nonlocal: f64,
    /// Accepted range of measured convergence orders.
    pub order: [f64; 2],
    /// Pointwise distance identity error relative to `1 + |φ|`.
    pub distance: f64,
    /// Relative asymmetry below which a tensor counts as symmetric.
    pub symmetry: f64,
    /// Relative generator-condition residual for T-generated currents.
    pub generator: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { drift: 1e-4, nonlocal: 1e-2, order: [1.8, 2.2], distance: 1e-11, symmetry: 1e-12, generator: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    /// Preset id or Lagrangian source.
    pub lagrangian: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub grid: SpatialGrid,
    pub evolution: Evolution,
    #[serde(default)]
    pub checks: Vec<Check>,
    /// Families for `nonlocal`, `T-generated` and `finite-invariance`.
    /// Empty selects a default per check.
    #[serde(default)]
    pub families: Vec<PerturbationFamily>,
    /// `ϑ` with `∂L/∂x^μ = D_μϑ`, for T-generated currents of
    /// spacetime-dependent densities.
    #[serde(default)]
    pub theta: Option<String>,
    /// First slice of the nonlocal slab; the last is always `N-2`.
    #[serde(default = "one")]
    pub nonlocal_t0: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn one() -> usize {
    1
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Scenario::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Scenario, CliError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("scenario: {e}")))?;
        if s.version != SCENARIO_VERSION {
            return Err(CliError::Usage(format!(
                "scenario version {} is not supported (expected {SCENARIO_VERSION})",
                s.version
            )));
        }
        Ok(s)
    }

    pub fn source(&self) -> &str {
        preset(&self.lagrangian).unwrap_or(&self.lagrangian)
    }

    pub fn spec(&self) -> Result<LagrangianSpec, CliError> {
        let mut spec = parse_lagrangian(self.source())?;
        for (k, v) in &self.params {
            if !spec.params.contains_key(k) {
                return Err(CliError::Usage(format!("parameter \"{k}\" is not declared by the Lagrangian")));
            }
            spec = spec.with_param(k, *v);
        }
        Ok(spec)
    }

    pub fn evolution_config(&self, seed: Option<u64>) -> EvolutionConfig {
        let mut initial = self.evolution.initial.clone();
        if let Some(s) = seed {
            for p in &mut initial.fields {
                if let Profile::RandomSmooth { seed, .. } = p {
                    *seed = s;
                }
            }
        }
        EvolutionConfig {
            dt: self.evolution.dt,
            steps: self.evolution.steps,
            courant_check: self.evolution.courant_check,
            initial,
        }
    }

    /// The same scenario with `n` sites along every spatial axis and `dt`
    /// scaled with the spacing, over the same time span.
    pub fn refined(&self, n: usize) -> Scenario {
        let n0 = self.grid.sites[0];
        let r = n as f64 / n0 as f64;
        let mut s = self.clone();
        s.grid.sites = vec![n; self.grid.sites.len()];
        s.evolution.dt = self.evolution.dt / r;
        s.evolution.steps = (self.evolution.steps as f64 * r).round() as usize;
        s
    }

    /// Families for `check`, defaulting when the scenario names none.
    pub fn families_for(&self, check: Check, complex: bool, dim: usize) -> Vec<PerturbationFamily> {
        if check == Check::TrivialFamilies {
            return vec![FamilyKind::FieldShiftConst.into(), FamilyKind::FieldScale.into()];
        }
        if !self.families.is_empty() {
            return self.families.clone();
        }
        let mut e0 = vec![0.0; dim];
        e0[0] = 1.0;
        match check {
            Check::FiniteInvariance if complex => vec![FamilyKind::Phase.into()],
            Check::TGenerated => {
                let f = (0..dim).map(|mu| if mu == 0 { "1".to_string() } else { "0".to_string() }).collect();
                vec![FamilyKind::MixedGeneral { f, internal: Vec::new() }.into()]
            }
            _ => vec![FamilyKind::SpacetimeShift { a: e0 }.into()],
        }
    }
}

/// A ready-to-run scenario for a preset, used by `--scenario <preset>`.
pub fn preset_scenario(id: &str) -> Option<Scenario> {
    let src = preset(id)?;
    let spec = parse_lagrangian(src).ok()?;
    let ds = spec.dim - 1;
    let length = 2.0 * std::f64::consts::PI;
    let mut tolerances = Tolerances::default();
    let (sites, dt, steps, initial, checks) = match id {
        "phi4-massless-4d" | "complex-phi4-massless" => {
            let p = Profile::Gaussian { center: vec![std::f64::consts::PI; ds], width: 1.5, amplitude: 0.5 };
            // A dispersing pulse on 16³ sites keeps an O(h²) energy error
            // of a few percent; the convergence study is the real test.
            tolerances.drift = 0.1;
            (16, length / 16.0 / 4.0, 128, p, vec![Check::T, Check::Scaling])
        }
        "spacetime-dependent" => {
            let p = Profile::PlaneWave { amplitude: 1.0, k: vec![1.0; ds], mass: 2f64.sqrt() };
            (128, length / 256.0, 512, p, vec![Check::K])
        }
        "dissipative-kg" => {
            let p = Profile::PlaneWave { amplitude: 1.0, k: vec![1.0; ds], mass: 1.0 };
            (128, length / 256.0, 512, p, vec![Check::Dissipative])
        }
        "complex-kg" => {
            let p = Profile::PlaneWave { amplitude: 1.0, k: vec![2.0; ds], mass: 1.0 };
            (128, length / 256.0, 512, p, vec![Check::T, Check::FiniteInvariance, Check::Nonlocal])
        }
        _ => {
            let (mass, k) = if id == "free-massless" { (0.0, 1.0) } else { (1.0, 2.0) };
            let p = Profile::PlaneWave { amplitude: 1.0, k: vec![k; ds], mass };
            let mut checks = vec![Check::T, Check::Nonlocal, Check::TrivialFamilies];
            if id == "klein-gordon" {
                checks.push(Check::K);
            }
            (128, length / 256.0, 512, p, checks)
        }
    };
    Some(Scenario {
        version: SCENARIO_VERSION,
        name: id.to_string(),
        lagrangian: id.to_string(),
        params: BTreeMap::new(),
        grid: SpatialGrid::cube(ds, sites, length),
        evolution: Evolution { dt, steps, courant_check: true, initial: InitialData { fields: vec![initial; spec.fields.len()] } },
        checks,
        families: Vec::new(),
        theta: None,
        nonlocal_t0: 1,
        tolerances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for id in PRESETS {
            let s = preset_scenario(id).unwrap();
            s.spec().unwrap_or_else(|e| panic!("{id}: {e}"));
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn round_trip_and_version() {
        let s = preset_scenario("klein-gordon").unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(Scenario::from_json(&text).unwrap(), s);
        let bad = text.replace("\"version\":1", "\"version\":7");
        assert!(matches!(Scenario::from_json(&bad), Err(CliError::Usage(_))));
    }

    #[test]
    fn refinement_keeps_the_time_span() {
        let s = preset_scenario("klein-gordon").unwrap().refined(64);
        assert_eq!(s.grid.sites, vec![64]);
        assert!((s.evolution.dt * s.evolution.steps as f64 - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn unknown_parameter_is_a_usage_error() {
        let mut s = preset_scenario("klein-gordon").unwrap();
        s.params.insert("q".into(), 1.0);
        assert!(matches!(s.spec(), Err(CliError::Usage(_))));
    }
}
