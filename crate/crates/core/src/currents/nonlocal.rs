//! The nonlocal constant of a family over slabs `[t₀, t₁]`:
//! the boundary flux of `P^μ v` minus the volume integral of `∂L_ε/∂ε|₀`.
//!
//! On a solution it is the same for every `t₁`, and since it vanishes for
//! `t₁ = t₀` it is zero; the lattice value is a discretization error. Only
//! the two time faces contribute, which assumes `P^i v` is periodic in
//! space. Families with explicit `x` dependence break that on the torus.

use serde::Serialize;

use crate::lattice::ops::slice_integral;
use crate::lattice::{LatticeError, SlabRegion};
use crate::solution::Solution;

use super::family::{momentum_flux, PerturbationFamily};
use super::{CurrentError, Observable};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonlocalValue {
    pub t1: usize,
    pub time: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonlocalReport {
    pub family: String,
    pub t0: usize,
    pub values: Vec<NonlocalValue>,
    /// `max − min` over `t₁`.
    pub deviation: f64,
    pub max_abs: f64,
    /// Size of the terms that cancel: `∫|j⁰(t)| + ∫|j⁰(t₀)| + ∫∫|∂L_ε/∂ε|`,
    /// maximised over `t₁`.
    pub scale: f64,
    /// Passing needs `max_abs ≤ tolerance · scale`.
    pub tolerance: f64,
    pub pass: bool,
}

/// Values for every `t₁` in `[t₀, t1]`. Both ends must lie in `[1, N-2]`,
/// where every derivative in the jets is central.
pub fn nonlocal_constant(
    sol: &Solution,
    family: &PerturbationFamily,
    t0: usize,
    t1: usize,
    tolerance: f64,
) -> Result<NonlocalReport, CurrentError> {
    let theory = sol.theory();
    let g = sol.grid();
    let n = g.time_slices();
    if t0 >= t1 {
        return Err(CurrentError::EmptySlab { t0, t1 });
    }
    if t0 < 1 || t1 > n - 2 {
        return Err(LatticeError::SlabOutOfRange { t1: t1.max(t0), slices: n }.into());
    }
    SlabRegion::new(t0, t1).check(g)?;
    let v = family.velocity(theory)?;
    let flux0 = Observable { poly: momentum_flux(theory, &v).swap_remove(0), imaginary: v.imaginary };
    let j0 = flux0.compile(theory).evaluate(sol);
    let dl = family.dl_depsilon(theory)?.compile(theory).evaluate(sol);
    let m = g.slice_len();
    let q0 = slice_integral(&j0, g, t0);
    let abs_integral = |f: &[f64], t: usize| f[t * m..(t + 1) * m].iter().map(|v| v.abs()).sum::<f64>() * g.spatial_cell_volume();
    let mut vol = 0.0;
    let mut mass = 0.0;
    let mut scale = 0.0f64;
    let q0_mass = abs_integral(&j0, t0);
    let mut prev_mass = abs_integral(&dl, t0);
    let mut prev = slice_integral(&dl, g, t0);
    let mut values = vec![NonlocalValue { t1: t0, time: g.coordinate(t0 * m, 0), value: 0.0 }];
    for t in t0 + 1..=t1 {
        let cur = slice_integral(&dl, g, t);
        vol += 0.5 * (prev + cur) * g.h(0);
        let cur_mass = abs_integral(&dl, t);
        mass += 0.5 * (prev_mass + cur_mass) * g.h(0);
        prev = cur;
        prev_mass = cur_mass;
        let q = slice_integral(&j0, g, t);
        scale = scale.max(abs_integral(&j0, t) + q0_mass + mass);
        values.push(NonlocalValue { t1: t, time: g.coordinate(t * m, 0), value: (q - q0) - vol });
    }
    let max = values.iter().map(|v| v.value).fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().map(|v| v.value).fold(f64::INFINITY, f64::min);
    let max_abs = values.iter().fold(0.0f64, |a, v| a.max(v.value.abs()));
    if !values.iter().all(|v| v.value.is_finite()) {
        return Err(CurrentError::Other("nonlocal constant is not finite".into()));
    }
    Ok(NonlocalReport {
        family: family.name().into(),
        t0,
        values,
        deviation: max - min,
        max_abs,
        scale,
        tolerance,
        pass: max_abs == 0.0 || max_abs <= tolerance * scale,
    })
}
