//! Browser bindings: describe a density, evolve it on a periodic 1+1D
//! lattice, and watch the energy and a nonlocal constant along the run.

use std::f64::consts::TAU;
use std::sync::Arc;

use fieldlab::cli::scenario::preset;
use fieldlab::cli::TheorySummary;
use fieldlab::currents::{energy_momentum, nonlocal_constant, FamilyKind, PerturbationFamily};
use fieldlab::dsl::parse_lagrangian;
use fieldlab::dynamics::{evolve, EvolutionConfig, InitialData, Profile, SpatialGrid};
use fieldlab::lattice::slice_integral;
use fieldlab::{Solution, Theory};
use wasm_bindgen::prelude::*;

#[wasm_bindgen(start)]
pub fn start() {
    std::panic::set_hook(Box::new(|info| {
        let msg = info.to_string();
        console_error(&msg);
    }));
}

#[wasm_bindgen]
extern "C" {
    #[wasm_bindgen(js_namespace = console, js_name = error)]
    fn console_error(s: &str);
}

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// A preset id resolves to its source; anything else is taken as source.
fn theory(source: &str) -> Result<Theory, JsError> {
    let src = preset(source.trim()).unwrap_or(source);
    Theory::new(parse_lagrangian(src).map_err(err)?).map_err(err)
}

/// The same text `fieldlab parse` prints.
#[wasm_bindgen]
pub fn describe(source: &str) -> Result<String, JsError> {
    let src = preset(source.trim()).unwrap_or(source);
    let spec = parse_lagrangian(src).map_err(err)?;
    let t = Theory::new(spec.clone()).map_err(err)?;
    Ok(TheorySummary::of(&t).render(&spec))
}

/// A finished run on `[0, 2π)` with `dt = h/2`.
#[wasm_bindgen]
pub struct Simulation {
    sol: Solution,
}

#[wasm_bindgen]
impl Simulation {
    /// `profile` is `"plane-wave"` (`param` is the wave number) or
    /// `"gaussian"` (`param` is the width).
    #[wasm_bindgen(constructor)]
    pub fn new(source: &str, sites: usize, steps: usize, profile: &str, param: f64) -> Result<Simulation, JsError> {
        let t = Arc::new(theory(source)?);
        if t.dim() != 2 {
            return Err(JsError::new("the demo evolves 1+1D densities only"));
        }
        let p = match profile {
            "plane-wave" => Profile::PlaneWave { amplitude: 1.0, k: vec![param], mass: 1.0 },
            "gaussian" => Profile::Gaussian { center: vec![TAU / 2.0], width: param, amplitude: 1.0 },
            other => return Err(JsError::new(&format!("unknown profile \"{other}\""))),
        };
        let space = SpatialGrid::cube(1, sites, TAU);
        let config = EvolutionConfig {
            dt: TAU / sites as f64 / 2.0,
            steps,
            courant_check: true,
            initial: InitialData { fields: vec![p; t.spec().fields.len()] },
        };
        let block = evolve(&t, &space, &config).map_err(err)?;
        Ok(Simulation { sol: Solution::new(t, block).map_err(err)? })
    }

    pub fn slices(&self) -> usize {
        self.sol.grid().time_slices()
    }

    pub fn times(&self) -> Vec<f64> {
        let g = self.sol.grid();
        (0..g.time_slices()).map(|t| t as f64 * g.h(0)).collect()
    }

    /// Real channel of the first field at time slice `t`.
    pub fn field(&self, t: usize) -> Result<Vec<f64>, JsError> {
        let g = self.sol.grid();
        if t >= g.time_slices() {
            return Err(JsError::new("slice out of range"));
        }
        let m = g.slice_len();
        Ok(self.sol.block().channel(0)[t * m..(t + 1) * m].to_vec())
    }

    /// `∫T⁰₀ dx` on slices `1..N-1`, where every derivative is central.
    /// Refused for densities with explicit coordinates.
    pub fn energy(&self) -> Result<Vec<f64>, JsError> {
        let t = energy_momentum(self.sol.theory()).map_err(err)?;
        let j = t.column(0).evaluate(&self.sol);
        let g = self.sol.grid();
        Ok((1..g.time_slices() - 1).map(|s| slice_integral(j.field.component(0), g, s)).collect())
    }

    /// Nonlocal constant from slice 1 to every later interior slice, for
    /// `"field-shift"`, `"field-scale"` or `"time-shift"`.
    pub fn nonlocal(&self, family: &str) -> Result<Vec<f64>, JsError> {
        let kind = match family {
            "field-shift" => FamilyKind::FieldShiftConst,
            "field-scale" => FamilyKind::FieldScale,
            "time-shift" => FamilyKind::SpacetimeShift { a: vec![1.0, 0.0] },
            other => return Err(JsError::new(&format!("unknown family \"{other}\""))),
        };
        let n = self.slices();
        let r = nonlocal_constant(&self.sol, &PerturbationFamily::from(kind), 1, n - 2, 1e-2).map_err(err)?;
        Ok(r.values.iter().map(|v| v.value).collect())
    }
}
