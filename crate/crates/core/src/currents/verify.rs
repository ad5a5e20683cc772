//! Conservation measured on the lattice.
//!
//! The divergence of a current is taken with central differences over the
//! slices `[2, N-3]`: the current itself uses one-sided time stencils on the
//! outermost slices, so slice `t` needs central values at `t ± 1`. Currents
//! with explicit `x` dependence are re-evaluated at the seam of the spatial
//! torus with the coordinate continued by one period, which keeps the stencil
//! inside a single chart.

use serde::Serialize;

use crate::lattice::ops::slice_integral;
use crate::lattice::par_fill;
use crate::solution::Solution;
use crate::theory::Scratch;

use crate::dsl::Var;

use super::{CompiledObservable, CurrentExpr, TensorExpr};

/// Relative charge below which drift is reported in absolute terms.
const Q_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SliceResidual {
    pub t: f64,
    pub l2: f64,
    pub linf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationEntry {
    pub current: String,
    pub theorem: String,
    pub grid: Vec<usize>,
    pub residual_l2: f64,
    pub residual_linf: f64,
    /// `(t, Q(t))` over the slices `[1, N-2]`, trapezoid-corrected at the
    /// seam when the density is not periodic.
    pub charge_series: Vec<(f64, f64)>,
    #[serde(skip)]
    pub divergence_series: Vec<SliceResidual>,
    /// Largest `|Q(t) − Q(t₀) + outflow|`, relative to `max_t ∫|j⁰(t)|`.
    pub drift: f64,
    /// Set when `max_t ∫|j⁰(t)|` is too small for a relative drift.
    pub drift_absolute: bool,
    pub convergence_order: Option<f64>,
    pub pass: Option<bool>,
}

/// First interior slice of the divergence.
pub const FIRST: usize = 2;

/// `∂_μ j^μ` at every site; zero outside the slices `[2, N-3]`.
pub fn chart_divergence(sol: &Solution, current: &CurrentExpr) -> Vec<f64> {
    let g = sol.grid();
    let d = g.dim();
    let n = g.time_slices();
    let m = g.slice_len();
    let compiled = current.compile(sol.theory());
    let vals: Vec<Vec<f64>> = compiled.iter().map(|c| c.evaluate(sol)).collect();
    let xdep = current.depends_on_coordinates();
    let mut out = vec![0.0; g.len()];
    if n < 5 {
        return out;
    }
    let lo = FIRST * m;
    let hi = (n - FIRST) * m;
    par_fill(&mut out[lo..hi], |k| {
        let s = lo + k;
        let mut acc = (vals[0][s + m] - vals[0][s - m]) / (2.0 * g.h(0));
        for mu in 1..d {
            let i = g.index_along(s, mu);
            let last = g.shape()[mu] - 1;
            let sf = g.shifted(s, mu, 1);
            let sb = g.shifted(s, mu, -1);
            let at = |site: usize, shift: f64| {
                if xdep && shift != 0.0 {
                    let mut x: Vec<f64> = (0..d).map(|nu| g.coordinate(site, nu)).collect();
                    x[mu] += shift;
                    let mut scratch = Scratch::default();
                    compiled[mu].eval_with_coords(sol, site, &x, &mut scratch)
                } else {
                    vals[mu][site]
                }
            };
            let p = g.period(mu);
            let jf = at(sf, if i == last { p } else { 0.0 });
            let jb = at(sb, if i == 0 { -p } else { 0.0 });
            acc += (jf - jb) / (2.0 * g.h(mu));
        }
        acc
    });
    out
}

/// Divergence residuals and charge history of one current.
pub fn verify_current(sol: &Solution, current: &CurrentExpr) -> VerificationEntry {
    let g = sol.grid();
    let n = g.time_slices();
    let m = g.slice_len();
    let div = chart_divergence(sol, current);
    let vol = g.spatial_cell_volume();
    let mut series = Vec::new();
    let mut sum2 = 0.0;
    let mut linf = 0.0f64;
    for t in FIRST..n.saturating_sub(FIRST) {
        let sl = &div[t * m..(t + 1) * m];
        let s2: f64 = sl.iter().map(|r| r * r).sum();
        let li = sl.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        sum2 += s2;
        linf = linf.max(li);
        series.push(SliceResidual { t: g.coordinate(t * m, 0), l2: (s2 * vol).sqrt(), linf: li });
    }
    let compiled = current.compile(sol.theory());
    let j0 = compiled[0].evaluate(sol);
    let seams: Vec<(f64, f64)> = (1..n - 1).map(|t| seam_terms(sol, current, &compiled, t)).collect();
    let charge_series: Vec<(f64, f64)> = (1..n - 1)
        .zip(&seams)
        .map(|(t, (dq, _))| (g.coordinate(t * m, 0), slice_integral(&j0, g, t) + dq))
        .collect();
    // Q(t) − Q(t₀) + ∫ seam flux dt, which vanishes for a conserved current
    // whether or not its density is periodic.
    let q0 = charge_series[0].1;
    let mut outflow = 0.0;
    let mut spread = 0.0f64;
    for k in 0..charge_series.len() {
        if k > 0 {
            outflow += 0.5 * g.h(0) * (seams[k - 1].1 + seams[k].1);
        }
        spread = spread.max((charge_series[k].1 - q0 + outflow).abs());
    }
    // max_t ∫|j⁰| rather than |Q(t₀)| sets the scale, so a charge that
    // vanishes by cancellation, or starts at zero, is not divided by its own
    // rounding.
    let mass = (1..n - 1)
        .map(|t| j0[t * m..(t + 1) * m].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        * g.spatial_cell_volume();
    let qmax = charge_series.iter().fold(0.0f64, |a, q| a.max(q.1.abs()));
    let drift_absolute = mass <= Q_FLOOR * qmax.max(1.0);
    let drift = if drift_absolute { spread } else { spread / mass };
    VerificationEntry {
        current: current.name.clone(),
        theorem: current.theorem.clone(),
        grid: g.shape().to_vec(),
        residual_l2: (sum2 * g.cell_volume()).sqrt(),
        residual_linf: linf,
        charge_series,
        divergence_series: series,
        drift,
        drift_absolute,
        convergence_order: None,
        pass: None,
    }
}

/// Seam corrections at slice `t` for a density with explicit spatial `x`
/// dependence: the trapezoid correction to the chart charge, and the net flux
/// out through the seams. Both vanish for periodic currents.
///
/// The chart is closed to `[0, L]` on every axis, with the far faces read
/// from the sites at index 0 and the coordinate continued by one period, and
/// integrated with the trapezoid rule. Faces get the same treatment along
/// their own axes, or the corners would leave a first-order error.
fn seam_terms(sol: &Solution, current: &CurrentExpr, compiled: &[CompiledObservable], t: usize) -> (f64, f64) {
    let g = sol.grid();
    let d = g.dim();
    let spatial = current
        .components
        .iter()
        .any(|p| p.depends_on(&|v| matches!(v, Var::Coord(mu) if *mu > 0)));
    if !spatial {
        return (0.0, 0.0);
    }
    let shape = g.shape();
    let vol = g.spatial_cell_volume();
    let base = t * g.slice_len();
    let mut scratch = Scratch::default();
    // Multi-index over the closed chart; idx[k] is along axis k + 1.
    let mut idx = vec![0usize; d - 1];
    let eval = |c: &CompiledObservable, idx: &[usize], scratch: &mut Scratch| {
        let mut site = base;
        let mut x = vec![g.coordinate(base, 0)];
        for (k, &i) in idx.iter().enumerate() {
            let mu = k + 1;
            site += (i % shape[mu]) * g.stride(mu);
            x.push(g.origin()[mu] + i as f64 * g.h(mu));
        }
        c.eval_with_coords(sol, site, &x, scratch)
    };
    let (mut trap, mut rect, mut flux) = (0.0, 0.0, 0.0);
    loop {
        let mut w = 1.0;
        let mut far = false;
        for (k, &i) in idx.iter().enumerate() {
            if i == 0 || i == shape[k + 1] {
                w *= 0.5;
            }
            far |= i == shape[k + 1];
        }
        let f = eval(&compiled[0], &idx, &mut scratch);
        trap += w * f;
        if !far {
            rect += f;
        }
        // Outflow through the far face of each axis, inflow through the near.
        for k in 0..d - 1 {
            let n = shape[k + 1];
            if idx[k] == 0 || idx[k] == n {
                let wf = w * 2.0;
                let sign = if idx[k] == n { 1.0 } else { -1.0 };
                flux += sign * wf * eval(&compiled[k + 1], &idx, &mut scratch) / g.h(k + 1);
            }
        }
        let mut k = 0;
        loop {
            if k == d - 1 {
                return ((trap - rect) * vol, flux * vol);
            }
            idx[k] += 1;
            if idx[k] <= shape[k + 1] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// One entry per column `X^{·ν}`.
pub fn verify_tensor(sol: &Solution, t: &TensorExpr) -> Vec<VerificationEntry> {
    t.columns.iter().map(|c| verify_current(sol, c)).collect()
}
