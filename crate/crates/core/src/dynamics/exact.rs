//! Closed-form solutions used as oracles.

use crate::lattice::{LatticeGrid, ScalarLatticeField};

use super::initial::Profile;
use super::{DynamicsError, SpatialGrid};

/// `A cos(ωt − k·x)` on every site of `grid`, or the two channels of
/// `A e^{i(ωt − k·x)}` when `complex`; `ω = sqrt(|k|² + m²)`.
pub fn exact_plane_wave(
    mass: f64,
    k: &[f64],
    amplitude: f64,
    grid: &LatticeGrid,
    complex: bool,
) -> Result<ScalarLatticeField, DynamicsError> {
    let space = SpatialGrid::of(grid);
    let p = Profile::PlaneWave { amplitude, k: k.to_vec(), mass };
    p.validate(&space)?;
    let m = grid.slice_len();
    let nch = if complex { 2 } else { 1 };
    let mut values = vec![0.0; nch * grid.len()];
    for t in 0..grid.time_slices() {
        let time = grid.origin()[0] + t as f64 * grid.h(0);
        for (s, c) in p.sample(&space, time, complex).into_iter().enumerate() {
            values[t * m + s] = c.re;
            if complex {
                values[grid.len() + t * m + s] = c.im;
            }
        }
    }
    Ok(ScalarLatticeField::from_values(grid.clone(), nch, values)?)
}
