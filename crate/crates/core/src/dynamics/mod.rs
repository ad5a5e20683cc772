//! Discrete solutions of the field equation and the oracles that check them.

pub mod convergence;
pub mod exact;
pub mod initial;
pub mod stepper;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{LatticeError, LatticeGrid, ScalarLatticeField};
use crate::solution::Solution;
use crate::theory::{Scratch, Source, Theory, TheoryError};

pub use convergence::{fit_order, ConvergenceResult};
pub use exact::exact_plane_wave;
pub use initial::{Cauchy, InitialData, Profile};
pub use stepper::Stepper;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("dt = {dt} violates the Courant bound dt <= {bound}")]
    Courant { dt: f64, bound: f64 },
    #[error("non-finite value produced at step {step} (site {site})")]
    Unstable { step: usize, site: usize },
    #[error("wave number {k} along axis {axis} does not fit the period {length}")]
    Incommensurate { axis: usize, k: f64, length: f64 },
    #[error("initial data: {0}")]
    Initial(String),
    #[error("convergence study: {0}")]
    Convergence(String),
    #[error("a spacetime block needs at least {needed} time slices, got {got}")]
    TooFewSlices { needed: usize, got: usize },
}

/// The spatial torus a run lives on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub sites: Vec<usize>,
    pub lengths: Vec<f64>,
    pub origin: Vec<f64>,
}

impl SpatialGrid {
    pub fn cube(dims: usize, sites: usize, length: f64) -> Self {
        SpatialGrid { sites: vec![sites; dims], lengths: vec![length; dims], origin: vec![0.0; dims] }
    }

    pub fn of(grid: &LatticeGrid) -> Self {
        let d = grid.dim();
        SpatialGrid {
            sites: grid.shape()[1..].to_vec(),
            lengths: (1..d).map(|mu| grid.period(mu)).collect(),
            origin: grid.origin()[1..].to_vec(),
        }
    }

    pub fn min_spacing(&self) -> f64 {
        self.sites.iter().zip(&self.lengths).map(|(&n, &l)| l / n as f64).fold(f64::INFINITY, f64::min)
    }

    /// Spatial coordinates of every slice site, row-major.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let m: usize = self.sites.iter().product();
        (0..m)
            .map(|mut s| {
                let mut x = vec![0.0; self.sites.len()];
                for j in (0..self.sites.len()).rev() {
                    let n = self.sites[j];
                    x[j] = self.origin[j] + (s % n) as f64 * self.lengths[j] / n as f64;
                    s /= n;
                }
                x
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub steps: usize,
    pub courant_check: bool,
    pub initial: InitialData,
}

/// Courant factor: `dt <= COURANT · min h`.
pub const COURANT: f64 = 0.5;

/// Evolves Cauchy data at `t = 0` and returns every slice.
pub fn evolve(theory: &Arc<Theory>, space: &SpatialGrid, config: &EvolutionConfig) -> Result<ScalarLatticeField, DynamicsError> {
    let bound = COURANT * space.min_spacing();
    if config.courant_check && config.dt > bound * (1.0 + 1e-12) {
        return Err(DynamicsError::Courant { dt: config.dt, bound });
    }
    if config.steps < 3 {
        return Err(DynamicsError::TooFewSlices { needed: 4, got: config.steps + 1 });
    }
    let grid = LatticeGrid::spacetime(config.steps, config.dt, 0.0, &space.sites, &space.lengths, &space.origin)?;
    if grid.dim() != theory.dim() {
        return Err(TheoryError::DimensionMismatch { theory: theory.dim(), grid: grid.dim() }.into());
    }
    let (phi, pi) = cauchy_slices(theory, space, &config.initial)?;
    let stepper = Stepper::new(theory.clone())?;
    let slices = run(&stepper, &grid, phi, pi, config.steps)?;
    assemble(grid, theory.ncomp(), &slices)
}

/// Leapfrog from `phi`, `pi` at the grid's first slice for `steps` steps.
pub fn run(stepper: &Stepper, grid: &LatticeGrid, phi: Vec<f64>, pi: Vec<f64>, steps: usize) -> Result<Vec<Vec<f64>>, DynamicsError> {
    let t0 = grid.origin()[0];
    let first = stepper.taylor_start(grid, &phi, &pi, t0);
    if let Some(i) = first.iter().position(|v| !v.is_finite()) {
        return Err(DynamicsError::Unstable { step: 1, site: i % grid.slice_len() });
    }
    let mut slices = vec![phi, first];
    continue_run(stepper, grid, &mut slices, steps)?;
    Ok(slices)
}

/// Extends `slices` (at least two) until it holds `steps + 1` slices.
pub fn continue_run(stepper: &Stepper, grid: &LatticeGrid, slices: &mut Vec<Vec<f64>>, steps: usize) -> Result<(), DynamicsError> {
    let t0 = grid.origin()[0];
    let dt = grid.h(0);
    while slices.len() <= steps {
        let n = slices.len();
        let t = t0 + (n - 1) as f64 * dt;
        let next = stepper
            .advance(grid, &slices[n - 2], &slices[n - 1], t)
            .map_err(|site| DynamicsError::Unstable { step: n, site })?;
        slices.push(next);
    }
    Ok(())
}

/// Channel-major slices into a spacetime block on `grid`.
pub fn assemble(grid: LatticeGrid, nc: usize, slices: &[Vec<f64>]) -> Result<ScalarLatticeField, DynamicsError> {
    let grid = grid.with_time_slices(slices.len())?;
    let m = grid.slice_len();
    let n = grid.len();
    let mut values = vec![0.0; nc * n];
    for (t, sl) in slices.iter().enumerate() {
        for c in 0..nc {
            values[c * n + t * m..c * n + (t + 1) * m].copy_from_slice(&sl[c * m..(c + 1) * m]);
        }
    }
    Ok(ScalarLatticeField::from_values(grid, nc, values)?)
}

/// Field values and time derivatives at `t = 0`, each channel-major.
pub fn cauchy_slices(theory: &Theory, space: &SpatialGrid, init: &InitialData) -> Result<(Vec<f64>, Vec<f64>), DynamicsError> {
    let fields = &theory.spec().fields;
    let profiles: Vec<&Profile> = match init.fields.len() {
        1 => vec![&init.fields[0]; fields.len()],
        n if n == fields.len() => init.fields.iter().collect(),
        n => {
            return Err(DynamicsError::Initial(format!("{n} profiles given for {} declared fields", fields.len())));
        }
    };
    let m: usize = space.sites.iter().product();
    let nc = theory.ncomp();
    let mut phi = vec![0.0; nc * m];
    let mut pi = vec![0.0; nc * m];
    let mut a = 0;
    for (f, p) in fields.iter().zip(profiles) {
        p.validate(space)?;
        let data = p.sample(space, 0.0, f.is_complex());
        match theory.source(a) {
            Source::Real(c) => {
                for (s, d) in data.iter().enumerate() {
                    phi[c * m + s] = d.re;
                    pi[c * m + s] = d.re_t;
                }
                a += 1;
            }
            Source::Complex { re, im, .. } => {
                for (s, d) in data.iter().enumerate() {
                    phi[re * m + s] = d.re;
                    pi[re * m + s] = d.re_t;
                    phi[im * m + s] = d.im;
                    pi[im * m + s] = d.im_t;
                }
                a += 2;
            }
        }
    }
    Ok((phi, pi))
}

/// Pointwise `δL/δφ − ∂_μ(δL/δ∂_μφ)` on a block, with lattice derivatives.
///
/// One channel per storage channel: a real field reports its own equation,
/// a complex field reports the real and imaginary parts of the equation
/// whose principal part is `□φ`.
pub fn el_residual(theory: &Arc<Theory>, block: &ScalarLatticeField) -> Result<ScalarLatticeField, DynamicsError> {
    if block.grid().time_slices() < 3 {
        return Err(DynamicsError::TooFewSlices { needed: 3, got: block.grid().time_slices() });
    }
    let sol = Solution::new(theory.clone(), block.clone())?;
    let n = block.grid().len();
    let nc = theory.ncomp();
    let el: Vec<_> = theory.euler_lagrange.iter().map(|p| theory.compile(p)).collect();
    let mut out = vec![0.0; nc * n];
    let mut scratch = Scratch::default();
    let mut buf: Vec<Complex64> = Vec::new();
    for a in 0..nc {
        match theory.source(a) {
            Source::Real(c) => {
                for s in 0..n {
                    out[c * n + s] = theory.eval_real(&el[a], sol.jet(s), &mut scratch);
                }
            }
            Source::Complex { re, im, conj: false } => {
                let eq = &el[theory.partner(a)];
                for s in 0..n {
                    let v = sol.evaluate_at::<Complex64>(eq, s, &mut buf);
                    out[re * n + s] = v.re;
                    out[im * n + s] = v.im;
                }
            }
            Source::Complex { conj: true, .. } => {}
        }
    }
    Ok(ScalarLatticeField::from_values(block.grid().clone(), nc, out)?)
}
