//! A spacetime block together with the jets every current is evaluated on.
//!
//! The jet at a site holds coordinates, channel values, first derivatives and
//! the `μ <= ν` second derivatives, all from the lattice stencils. Channel
//! jets are converted to component jets only at evaluation time.

use std::sync::Arc;

use crate::dsl::compile::Compiled;
use crate::lattice::ops::{diff_at, diff_axis, second_diff_at};
use crate::lattice::{par_chunks, LatticeGrid, ScalarLatticeField};
use crate::scalar::Scalar;
use crate::theory::{Scratch, Theory, TheoryError};

#[derive(Clone, Debug)]
pub struct Solution {
    theory: Arc<Theory>,
    block: ScalarLatticeField,
    jets: Vec<f64>,
}

impl Solution {
    pub fn new(theory: Arc<Theory>, block: ScalarLatticeField) -> Result<Solution, TheoryError> {
        let grid = block.grid();
        if grid.dim() != theory.dim() {
            return Err(TheoryError::DimensionMismatch { theory: theory.dim(), grid: grid.dim() });
        }
        assert_eq!(block.channels(), theory.ncomp(), "block channels must match the theory");
        let jets = build_jets(&theory, &block);
        Ok(Solution { theory, block, jets })
    }

    pub fn theory(&self) -> &Arc<Theory> {
        &self.theory
    }

    pub fn block(&self) -> &ScalarLatticeField {
        &self.block
    }

    pub fn grid(&self) -> &LatticeGrid {
        self.block.grid()
    }

    pub fn jet_len(&self) -> usize {
        self.theory.layout().len()
    }

    /// Channel jet at `site`.
    pub fn jet(&self, site: usize) -> &[f64] {
        let l = self.jet_len();
        &self.jets[site * l..(site + 1) * l]
    }

    /// Evaluates a real observable at every site.
    pub fn evaluate(&self, c: &Compiled) -> Vec<f64> {
        let n = self.grid().len();
        let mut out = vec![0.0; n];
        par_chunks(&mut out, 1024, |chunk, vals| {
            let mut scratch = Scratch::default();
            for (k, v) in vals.iter_mut().enumerate() {
                *v = self.theory.eval_real(c, self.jet(chunk * 1024 + k), &mut scratch);
            }
        });
        out
    }

    /// Evaluates at `site` over an arbitrary scalar type. Only meaningful for
    /// real theories when `S` is real.
    pub fn evaluate_at<S: Scalar>(&self, c: &Compiled, site: usize, buf: &mut Vec<S>) -> S {
        self.theory.component_jet(self.jet(site), buf);
        c.eval(buf)
    }

    /// Evaluates on the jet of `site` with its coordinates replaced, which is
    /// how explicit `x` dependence is kept continuous across the seam of the
    /// spatial torus.
    pub fn evaluate_with_coords(&self, c: &Compiled, site: usize, x: &[f64], scratch: &mut Scratch) -> f64 {
        let d = self.grid().dim();
        scratch.real.clear();
        scratch.real.extend_from_slice(self.jet(site));
        scratch.real[..d].copy_from_slice(x);
        let jet = std::mem::take(&mut scratch.real);
        let v = self.theory.eval_real(c, &jet, scratch);
        scratch.real = jet;
        v
    }
}

fn build_jets(theory: &Theory, block: &ScalarLatticeField) -> Vec<f64> {
    let grid = block.grid();
    let d = grid.dim();
    let l = theory.layout();
    let nc = theory.ncomp();
    let n = grid.len();
    // First derivatives as whole fields so mixed second derivatives can be
    // taken as differences of differences.
    let grads: Vec<Vec<Vec<f64>>> =
        (0..nc).map(|c| (0..d).map(|mu| diff_axis(block.channel(c), grid, mu)).collect()).collect();
    let mut jets = vec![0.0; n * l.len()];
    par_chunks(&mut jets, l.len(), |site, jet| {
        for mu in 0..d {
            jet[l.coord(mu)] = grid.coordinate(site, mu);
        }
        for c in 0..nc {
            let f = block.channel(c);
            jet[l.field(c)] = f[site];
            for mu in 0..d {
                jet[l.grad(c, mu)] = grads[c][mu][site];
                jet[l.hess(c, mu, mu)] = second_diff_at(f, grid, site, mu);
                for nu in mu + 1..d {
                    jet[l.hess(c, mu, nu)] = diff_at(&grads[c][nu], grid, site, mu);
                }
            }
        }
    });
    jets
}
