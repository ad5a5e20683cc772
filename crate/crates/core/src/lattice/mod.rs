//! Minkowski lattice: grids, fields, finite differences and slab integrals.

mod field;
mod grid;
pub mod io;
pub mod ops;

use thiserror::Error;

pub use field::{ScalarLatticeField, VectorLatticeField};
pub use grid::{LatticeGrid, SlabRegion};
pub use ops::{central_difference, divergence, second_difference, slice_integral, surface_flux, volume_integral};

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("invalid grid: {0}")]
    Shape(String),
    #[error("axis {axis} is out of range for dimension {dim}")]
    Axis { axis: usize, dim: usize },
    #[error("slab is empty: t0 = {t0} must be below t1 = {t1}")]
    EmptySlab { t0: usize, t1: usize },
    #[error("slab slice {t1} is outside a grid with {slices} time slices")]
    SlabOutOfRange { t1: usize, slices: usize },
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad field header: {0}")]
    Header(#[from] serde_json::Error),
}

/// `out[i] = f(i)`, split across threads when the `parallel` feature is on.
pub(crate) fn par_fill<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().with_min_len(256).for_each(|(i, v)| *v = f(i));
    }
    #[cfg(not(feature = "parallel"))]
    for (i, v) in out.iter_mut().enumerate() {
        *v = f(i);
    }
}

/// Calls `f(i, chunk)` for consecutive `chunk`-sized pieces of `out`.
pub(crate) fn par_chunks<F>(out: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk).enumerate().with_min_len(64).for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    for (i, c) in out.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}
