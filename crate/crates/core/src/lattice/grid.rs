use serde::{Deserialize, Serialize};

use super::LatticeError;

/// Rectangular lattice; axis 0 is time and is not periodic, every other axis
/// is a periodic spatial direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeGrid {
    shape: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
}

impl LatticeGrid {
    pub fn new(shape: Vec<usize>, spacing: Vec<f64>, origin: Vec<f64>) -> Result<Self, LatticeError> {
        let d = shape.len();
        if d == 0 || spacing.len() != d || origin.len() != d {
            return Err(LatticeError::Shape(format!(
                "shape, spacing and origin must have one entry per axis (got {}, {}, {})",
                d,
                spacing.len(),
                origin.len()
            )));
        }
        if let Some(mu) = shape.iter().position(|&n| n < 4) {
            return Err(LatticeError::Shape(format!("axis {mu} has {} sites; at least 4 are needed", shape[mu])));
        }
        if let Some(mu) = spacing.iter().position(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(LatticeError::Shape(format!("axis {mu} has non-positive spacing {}", spacing[mu])));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(LatticeError::Shape("origin must be finite".into()));
        }
        Ok(LatticeGrid { shape, spacing, origin })
    }

    /// `steps + 1` time slices of width `dt` starting at `t0`, on a spatial
    /// torus with `sites[k]` points over physical length `lengths[k]`.
    pub fn spacetime(
        steps: usize,
        dt: f64,
        t0: f64,
        sites: &[usize],
        lengths: &[f64],
        origin: &[f64],
    ) -> Result<Self, LatticeError> {
        if sites.len() != lengths.len() || sites.len() != origin.len() {
            return Err(LatticeError::Shape("spatial sites, lengths and origin differ in length".into()));
        }
        let mut shape = vec![steps + 1];
        shape.extend_from_slice(sites);
        let mut spacing = vec![dt];
        spacing.extend(sites.iter().zip(lengths).map(|(&n, &l)| l / n as f64));
        let mut o = vec![t0];
        o.extend_from_slice(origin);
        LatticeGrid::new(shape, spacing, o)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn h(&self, mu: usize) -> f64 {
        self.spacing[mu]
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time_slices(&self) -> usize {
        self.shape[0]
    }

    /// Sites in one time slice.
    pub fn slice_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    /// Distance in flat index between neighbours along `mu`.
    pub fn stride(&self, mu: usize) -> usize {
        self.shape[mu + 1..].iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn spatial_cell_volume(&self) -> f64 {
        self.spacing[1..].iter().product()
    }

    /// Physical extent of the spatial torus along `mu >= 1`.
    pub fn period(&self, mu: usize) -> f64 {
        self.shape[mu] as f64 * self.spacing[mu]
    }

    pub fn index_along(&self, site: usize, mu: usize) -> usize {
        (site / self.stride(mu)) % self.shape[mu]
    }

    /// Coordinate `x^μ` of a site. Spatial coordinates are not wrapped: they
    /// run over `[origin, origin + period)`.
    pub fn coordinate(&self, site: usize, mu: usize) -> f64 {
        self.origin[mu] + self.index_along(site, mu) as f64 * self.spacing[mu]
    }

    /// Neighbour of `site` at offset `k` along a spatial axis, wrapping.
    pub fn shifted(&self, site: usize, mu: usize, k: isize) -> usize {
        let n = self.shape[mu] as isize;
        let i = self.index_along(site, mu) as isize;
        let j = (i + k).rem_euclid(n);
        (site as isize + (j - i) * self.stride(mu) as isize) as usize
    }

    pub fn with_time_slices(&self, n: usize) -> Result<Self, LatticeError> {
        let mut g = self.clone();
        g.shape[0] = n;
        LatticeGrid::new(g.shape, g.spacing, g.origin)
    }
}

/// The region between two time slices over the whole spatial torus. Its
/// boundary is the pair of slices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlabRegion {
    pub t0: usize,
    pub t1: usize,
}

impl SlabRegion {
    pub fn new(t0: usize, t1: usize) -> Self {
        SlabRegion { t0, t1 }
    }

    pub fn check(&self, grid: &LatticeGrid) -> Result<(), LatticeError> {
        if self.t0 >= self.t1 {
            return Err(LatticeError::EmptySlab { t0: self.t0, t1: self.t1 });
        }
        if self.t1 >= grid.time_slices() {
            return Err(LatticeError::SlabOutOfRange { t1: self.t1, slices: grid.time_slices() });
        }
        Ok(())
    }
}
