use super::{LatticeError, LatticeGrid};

/// One or more real channels per site, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarLatticeField {
    grid: LatticeGrid,
    channels: usize,
    values: Vec<f64>,
}

impl ScalarLatticeField {
    pub fn zeros(grid: LatticeGrid, channels: usize) -> Self {
        let values = vec![0.0; grid.len() * channels];
        ScalarLatticeField { grid, channels, values }
    }

    /// Rejects a wrong length or any non-finite entry.
    pub fn from_values(grid: LatticeGrid, channels: usize, values: Vec<f64>) -> Result<Self, LatticeError> {
        if values.len() != grid.len() * channels {
            return Err(LatticeError::Length { expected: grid.len() * channels, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LatticeError::NonFinite(i));
        }
        Ok(ScalarLatticeField { grid, channels, values })
    }

    /// Unchecked constructor for values produced inside the crate.
    pub(crate) fn from_raw(grid: LatticeGrid, channels: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * channels);
        ScalarLatticeField { grid, channels, values }
    }

    /// Samples `f(x)` for a single channel.
    pub fn from_fn(grid: LatticeGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = grid.dim();
        let mut x = vec![0.0; d];
        let values = (0..grid.len())
            .map(|s| {
                for (mu, xm) in x.iter_mut().enumerate() {
                    *xm = grid.coordinate(s, mu);
                }
                f(&x)
            })
            .collect();
        ScalarLatticeField { grid, channels: 1, values }
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.values[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, site: usize) -> f64 {
        self.values[c * self.grid.len() + site]
    }

    /// The time slice `t` of channel `c`.
    pub fn slice(&self, c: usize, t: usize) -> &[f64] {
        let m = self.grid.slice_len();
        &self.channel(c)[t * m..(t + 1) * m]
    }

    pub fn single_channel(&self, c: usize) -> ScalarLatticeField {
        ScalarLatticeField { grid: self.grid.clone(), channels: 1, values: self.channel(c).to_vec() }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A contravariant D-vector per site, stored component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorLatticeField {
    grid: LatticeGrid,
    values: Vec<f64>,
}

impl VectorLatticeField {
    pub fn zeros(grid: LatticeGrid) -> Self {
        let values = vec![0.0; grid.len() * grid.dim()];
        VectorLatticeField { grid, values }
    }

    pub fn from_values(grid: LatticeGrid, values: Vec<f64>) -> Result<Self, LatticeError> {
        let n = grid.len() * grid.dim();
        if values.len() != n {
            return Err(LatticeError::Length { expected: n, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LatticeError::NonFinite(i));
        }
        Ok(VectorLatticeField { grid, values })
    }

    pub(crate) fn from_raw(grid: LatticeGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * grid.dim());
        VectorLatticeField { grid, values }
    }

    pub fn from_fn(grid: LatticeGrid, f: impl Fn(&[f64], usize) -> f64) -> Self {
        let d = grid.dim();
        let n = grid.len();
        let mut values = vec![0.0; n * d];
        let mut x = vec![0.0; d];
        for s in 0..n {
            for (mu, xm) in x.iter_mut().enumerate() {
                *xm = grid.coordinate(s, mu);
            }
            for mu in 0..d {
                values[mu * n + s] = f(&x, mu);
            }
        }
        VectorLatticeField { grid, values }
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn component(&self, mu: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[mu * n..(mu + 1) * n]
    }

    pub fn component_mut(&mut self, mu: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.values[mu * n..(mu + 1) * n]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
