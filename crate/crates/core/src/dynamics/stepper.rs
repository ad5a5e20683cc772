//! Explicit leapfrog for `EL_a = 0`.
//!
//! At each site the time-derivative slots of the jet are the centred
//! differences through the unknown next value,
//! `∂_0φ = (u − φ⁻)/2dt` and `∂_0∂_0φ = (u − 2φ + φ⁻)/dt²`, and every other
//! slot comes from the current slice. When the field equation is affine in
//! those two slots (all the standard theories are) one linear solve per
//! site gives `u` exactly, which is the classical leapfrog. A first-order
//! friction term enters through the centred `∂_0φ`, which is the usual damped
//! leapfrog average. Only equations nonlinear in `∂_0φ` or `∂_0∂_0φ` fall back
//! to a few Newton iterations.

use std::sync::Arc;

use num_complex::Complex64;

use crate::dsl::compile::Compiled;
use crate::dsl::Var;
use crate::lattice::ops::{diff_at, second_diff_at};
use crate::lattice::{par_chunks, LatticeGrid};
use crate::scalar::Scalar;
use crate::theory::{Source, Theory, TheoryError};


const NEWTON_MAX: usize = 40;

#[derive(Debug)]
pub struct Stepper {
    theory: Arc<Theory>,
    el: Vec<Compiled>,
    /// `∂EL_a/∂(∂_0∂_0φ_b)`.
    m: Vec<Vec<Compiled>>,
    /// `∂EL_a/∂(∂_0φ_b)`.
    f: Vec<Vec<Compiled>>,
    affine: bool,
    affine_in_acceleration: bool,
}

impl Stepper {
    pub fn new(theory: Arc<Theory>) -> Result<Stepper, TheoryError> {
        let nc = theory.ncomp();
        for el in &theory.euler_lagrange {
            if el.vars().iter().any(|v| matches!(v, Var::Hess(_, 0, nu) if *nu > 0)) {
                return Err(TheoryError::MixedTimeDerivatives);
            }
        }
        let m_poly: Vec<Vec<_>> = (0..nc)
            .map(|a| (0..nc).map(|b| theory.euler_lagrange[a].diff(Var::hess(b, 0, 0))).collect())
            .collect();
        let f_poly: Vec<Vec<_>> = (0..nc)
            .map(|a| (0..nc).map(|b| theory.euler_lagrange[a].diff(Var::Grad(b, 0))).collect())
            .collect();
        for (a, row) in m_poly.iter().enumerate() {
            if row.iter().all(|p| p.is_zero()) {
                return Err(TheoryError::NotHyperbolic(theory.component_names()[a].clone()));
            }
        }
        let time_slot = |v: &Var| matches!(v, Var::Hess(_, 0, 0) | Var::Grad(_, 0));
        let accel = |v: &Var| matches!(v, Var::Hess(_, 0, 0));
        let affine = m_poly.iter().chain(&f_poly).flatten().all(|p| !p.depends_on(&time_slot));
        let affine_in_acceleration = m_poly.iter().flatten().all(|p| !p.depends_on(&accel));
        Ok(Stepper {
            el: theory.euler_lagrange.iter().map(|p| theory.compile(p)).collect(),
            m: m_poly.iter().map(|r| r.iter().map(|p| theory.compile(p)).collect()).collect(),
            f: f_poly.iter().map(|r| r.iter().map(|p| theory.compile(p)).collect()).collect(),
            theory,
            affine,
            affine_in_acceleration,
        })
    }

    pub fn theory(&self) -> &Arc<Theory> {
        &self.theory
    }

    /// True when one linear solve per site is exact.
    pub fn is_affine(&self) -> bool {
        self.affine
    }

    /// Second-order Taylor start: `φ¹ = φ⁰ + dt·π + dt²/2·∂_0∂_0φ`, with the
    /// acceleration solved from the field equation at `t0`.
    pub fn taylor_start(&self, grid: &LatticeGrid, phi: &[f64], pi: &[f64], t0: f64) -> Vec<f64> {
        if self.theory.is_complex() {
            self.taylor::<Complex64>(grid, phi, pi, t0)
        } else {
            self.taylor::<f64>(grid, phi, pi, t0)
        }
    }

    /// Next slice from the previous two. Fails with the first site that
    /// produced a non-finite value.
    pub fn advance(&self, grid: &LatticeGrid, prev: &[f64], cur: &[f64], t: f64) -> Result<Vec<f64>, usize> {
        let next = if self.theory.is_complex() {
            self.leap::<Complex64>(grid, prev, cur, t)
        } else {
            self.leap::<f64>(grid, prev, cur, t)
        };
        match next.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(i % grid.slice_len()),
            None => Ok(next),
        }
    }

    fn taylor<S: Scalar>(&self, grid: &LatticeGrid, phi: &[f64], pi: &[f64], t0: f64) -> Vec<f64> {
        let nc = self.theory.ncomp();
        let m = grid.slice_len();
        let dt = grid.h(0);
        let l = self.theory.layout();
        let mut site_major = vec![0.0; m * nc];
        par_chunks(&mut site_major, nc, |s, out| {
            let mut jet = vec![0.0; l.len()];
            spatial_jet(&self.theory, grid, phi, s, t0, &mut jet);
            let mut acc = vec![0.0; nc];
            for c in 0..nc {
                jet[l.grad(c, 0)] = pi[c * m + s];
            }
            let mut buf: Vec<S> = Vec::new();
            let iters = if self.affine_in_acceleration { 1 } else { NEWTON_MAX };
            for _ in 0..iters {
                for c in 0..nc {
                    jet[l.hess(c, 0, 0)] = acc[c];
                }
                self.theory.component_jet(&jet, &mut buf);
                let r: Vec<S> = self.el.iter().map(|e| e.eval(&buf)).collect();
                let mut jac: Vec<S> = self.m.iter().flat_map(|row| row.iter().map(|c| c.eval(&buf))).collect();
                let delta = solve(&mut jac, r.into_iter().map(|v| -v).collect(), nc);
                let step = apply(&self.theory, &acc, &delta);
                let moved = step.iter().zip(&acc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                acc = step;
                if moved <= 1e-15 * (1.0 + acc.iter().fold(0.0f64, |x, v| x.max(v.abs()))) {
                    break;
                }
            }
            for c in 0..nc {
                out[c] = phi[c * m + s] + dt * pi[c * m + s] + 0.5 * dt * dt * acc[c];
            }
        });
        transpose(&site_major, nc, m)
    }

    fn leap<S: Scalar>(&self, grid: &LatticeGrid, prev: &[f64], cur: &[f64], t: f64) -> Vec<f64> {
        let nc = self.theory.ncomp();
        let m = grid.slice_len();
        let dt = grid.h(0);
        let l = self.theory.layout();
        let mut site_major = vec![0.0; m * nc];
        par_chunks(&mut site_major, nc, |s, out| {
            let mut jet = vec![0.0; l.len()];
            spatial_jet(&self.theory, grid, cur, s, t, &mut jet);
            let mut u: Vec<f64> = (0..nc).map(|c| 2.0 * cur[c * m + s] - prev[c * m + s]).collect();
            let mut buf: Vec<S> = Vec::new();
            let iters = if self.affine { 1 } else { NEWTON_MAX };
            for _ in 0..iters {
                for c in 0..nc {
                    let (p, q) = (prev[c * m + s], cur[c * m + s]);
                    jet[l.grad(c, 0)] = (u[c] - p) / (2.0 * dt);
                    jet[l.hess(c, 0, 0)] = (u[c] - 2.0 * q + p) / (dt * dt);
                }
                self.theory.component_jet(&jet, &mut buf);
                let r: Vec<S> = self.el.iter().map(|e| e.eval(&buf)).collect();
                let inv2 = S::from_f64(1.0 / (dt * dt));
                let inv1 = S::from_f64(1.0 / (2.0 * dt));
                let mut jac: Vec<S> = (0..nc)
                    .flat_map(|a| (0..nc).map(move |b| (a, b)))
                    .map(|(a, b)| self.m[a][b].eval(&buf) * inv2 + self.f[a][b].eval(&buf) * inv1)
                    .collect();
                let delta = solve(&mut jac, r.into_iter().map(|v| -v).collect(), nc);
                let next = apply(&self.theory, &u, &delta);
                let moved = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                u = next;
                if moved <= 1e-15 * (1.0 + u.iter().fold(0.0f64, |x, v| x.max(v.abs()))) {
                    break;
                }
            }
            out.copy_from_slice(&u);
        });
        transpose(&site_major, nc, m)
    }
}

/// Coordinates, current values and all spatial derivatives at slice site `s`.
/// Time-derivative slots are left for the caller.
fn spatial_jet(theory: &Theory, grid: &LatticeGrid, slice: &[f64], s: usize, t: f64, jet: &mut [f64]) {
    let l = theory.layout();
    let d = grid.dim();
    let m = grid.slice_len();
    jet[l.coord(0)] = t;
    for mu in 1..d {
        jet[l.coord(mu)] = grid.coordinate(s, mu);
    }
    for c in 0..theory.ncomp() {
        let f = &slice[c * m..(c + 1) * m];
        jet[l.field(c)] = f[s];
        for mu in 1..d {
            jet[l.grad(c, mu)] = diff_at(f, grid, s, mu);
            jet[l.hess(c, mu, mu)] = second_diff_at(f, grid, s, mu);
            for nu in mu + 1..d {
                let h = grid.h(nu);
                let dp = diff_at(f, grid, grid.shifted(s, nu, 1), mu);
                let dm = diff_at(f, grid, grid.shifted(s, nu, -1), mu);
                jet[l.hess(c, mu, nu)] = (dp - dm) / (2.0 * h);
            }
        }
    }
}

/// Adds a component-space correction to channel values.
fn apply<S: Scalar>(theory: &Theory, channels: &[f64], delta: &[S]) -> Vec<f64> {
    let mut out = channels.to_vec();
    for (a, d) in delta.iter().enumerate() {
        match theory.source(a) {
            Source::Real(c) => out[c] += d.re(),
            Source::Complex { re, im, conj: false } => {
                out[re] += d.re();
                out[im] += d.im();
            }
            Source::Complex { conj: true, .. } => {}
        }
    }
    out
}

fn transpose(site_major: &[f64], nc: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; nc * m];
    for s in 0..m {
        for c in 0..nc {
            out[c * m + s] = site_major[s * nc + c];
        }
    }
    out
}

/// Dense solve with partial pivoting; `a` is row-major `n × n`. A singular
/// system yields NaN, which the caller's finiteness check reports.
pub(crate) fn solve<S: Scalar>(a: &mut [S], mut b: Vec<S>, n: usize) -> Vec<S> {
    if n == 1 {
        return vec![b[0] / a[0]];
    }
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i * n + k].modulus().total_cmp(&a[j * n + k].modulus())).unwrap_or(k);
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        let piv = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / piv;
            for j in k..n {
                let v = a[k * n + j];
                a[i * n + j] = a[i * n + j] - f * v;
            }
            let v = b[k];
            b[i] = b[i] - f * v;
        }
    }
    let mut x = vec![S::zero(); n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in k + 1..n {
            acc = acc - a[k * n + j] * x[j];
        }
        x[k] = acc / a[k * n + k];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pivoting_solver() {
        let mut a = vec![0.0, 2.0, 1.0, 1.0];
        let x = solve(&mut a, vec![4.0, 3.0], 2);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }
}
