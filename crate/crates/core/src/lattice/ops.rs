//! Finite differences and slab integrals.
//!
//! Along time: second-order central differences inside, second-order
//! one-sided stencils on the two edge slices. Along space: periodic central
//! differences. Every operator here uses this one stencil family, which is
//! what makes the discrete Gauss identity hold to second order.

use crate::dsl::Variance;

use super::{par_fill, LatticeError, LatticeGrid, ScalarLatticeField, SlabRegion, VectorLatticeField};

fn check_axis(grid: &LatticeGrid, mu: usize) -> Result<(), LatticeError> {
    if mu >= grid.dim() {
        return Err(LatticeError::Axis { axis: mu, dim: grid.dim() });
    }
    Ok(())
}

/// `∂_μ f` at one site.
#[inline]
pub fn diff_at(f: &[f64], grid: &LatticeGrid, site: usize, mu: usize) -> f64 {
    let h = grid.h(mu);
    let s = grid.stride(mu);
    if mu == 0 {
        let t = site / s;
        let n = grid.time_slices();
        if t == 0 {
            (-3.0 * f[site] + 4.0 * f[site + s] - f[site + 2 * s]) / (2.0 * h)
        } else if t == n - 1 {
            (3.0 * f[site] - 4.0 * f[site - s] + f[site - 2 * s]) / (2.0 * h)
        } else {
            (f[site + s] - f[site - s]) / (2.0 * h)
        }
    } else {
        (f[grid.shifted(site, mu, 1)] - f[grid.shifted(site, mu, -1)]) / (2.0 * h)
    }
}

/// `∂_μ∂_μ f` at one site.
#[inline]
pub fn second_diff_at(f: &[f64], grid: &LatticeGrid, site: usize, mu: usize) -> f64 {
    let h2 = grid.h(mu) * grid.h(mu);
    let s = grid.stride(mu);
    if mu == 0 {
        let t = site / s;
        let n = grid.time_slices();
        if t == 0 {
            (2.0 * f[site] - 5.0 * f[site + s] + 4.0 * f[site + 2 * s] - f[site + 3 * s]) / h2
        } else if t == n - 1 {
            (2.0 * f[site] - 5.0 * f[site - s] + 4.0 * f[site - 2 * s] - f[site - 3 * s]) / h2
        } else {
            (f[site + s] - 2.0 * f[site] + f[site - s]) / h2
        }
    } else {
        (f[grid.shifted(site, mu, 1)] - 2.0 * f[site] + f[grid.shifted(site, mu, -1)]) / h2
    }
}

/// Full-field `∂_μ f` of a single channel slice.
pub fn diff_axis(f: &[f64], grid: &LatticeGrid, mu: usize) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    par_fill(&mut out, |s| diff_at(f, grid, s, mu));
    out
}

/// `∂_μ f` of channel 0, optionally raised with `η^{μμ}`.
pub fn central_difference(
    f: &ScalarLatticeField,
    mu: usize,
    variance: Variance,
) -> Result<ScalarLatticeField, LatticeError> {
    check_axis(f.grid(), mu)?;
    let mut d = diff_axis(f.channel(0), f.grid(), mu);
    if variance == Variance::Up && mu > 0 {
        d.iter_mut().for_each(|v| *v = -*v);
    }
    ScalarLatticeField::from_values(f.grid().clone(), 1, d)
}

/// `∂_μ∂_μ f` of channel 0 with the edge stencils above.
pub fn second_difference(f: &ScalarLatticeField, mu: usize) -> Result<ScalarLatticeField, LatticeError> {
    check_axis(f.grid(), mu)?;
    let g = f.grid();
    let mut out = vec![0.0; g.len()];
    par_fill(&mut out, |s| second_diff_at(f.channel(0), g, s, mu));
    ScalarLatticeField::from_values(g.clone(), 1, out)
}

/// `∂_μ j^μ`.
pub fn divergence(j: &VectorLatticeField) -> ScalarLatticeField {
    let g = j.grid();
    let mut out = vec![0.0; g.len()];
    par_fill(&mut out, |s| (0..g.dim()).map(|mu| diff_at(j.component(mu), g, s, mu)).sum());
    ScalarLatticeField::from_raw(g.clone(), 1, out)
}

/// `∫ f d^{D-1}x` over the spatial torus at slice `t`.
pub fn slice_integral(f: &[f64], grid: &LatticeGrid, t: usize) -> f64 {
    let m = grid.slice_len();
    f[t * m..(t + 1) * m].iter().sum::<f64>() * grid.spatial_cell_volume()
}

/// Trapezoid rule in time between the slab's slices, rectangle rule on the
/// spatial torus.
pub fn volume_integral(f: &ScalarLatticeField, slab: SlabRegion) -> Result<f64, LatticeError> {
    slab.check(f.grid())?;
    Ok(volume_integral_raw(f.channel(0), f.grid(), slab))
}

pub(crate) fn volume_integral_raw(f: &[f64], grid: &LatticeGrid, slab: SlabRegion) -> f64 {
    let mut acc = 0.5 * (slice_integral(f, grid, slab.t0) + slice_integral(f, grid, slab.t1));
    for t in slab.t0 + 1..slab.t1 {
        acc += slice_integral(f, grid, t);
    }
    acc * grid.h(0)
}

/// `∮ n_μ j^μ` over the slab boundary. Spatial faces cancel on the torus, so
/// only the two time slices remain, with outward normals of opposite sign.
pub fn surface_flux(j: &VectorLatticeField, slab: SlabRegion) -> Result<f64, LatticeError> {
    slab.check(j.grid())?;
    let g = j.grid();
    Ok(slice_integral(j.component(0), g, slab.t1) - slice_integral(j.component(0), g, slab.t0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid2(nt: usize, nx: usize, lt: f64, lx: f64) -> LatticeGrid {
        LatticeGrid::new(vec![nt, nx], vec![lt / (nt - 1) as f64, lx / nx as f64], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn linear_fields_are_differentiated_exactly() {
        let g = grid2(9, 16, 1.0, 2.0);
        let f = ScalarLatticeField::from_fn(g.clone(), |x| 3.0 * x[0] - 1.0);
        let d = central_difference(&f, 0, Variance::Down).unwrap();
        assert!(d.values().iter().all(|v| (v - 3.0).abs() < 1e-12));
        let q = ScalarLatticeField::from_fn(g, |x| x[0] * x[0]);
        let d2 = second_difference(&q, 0).unwrap();
        assert!(d2.values().iter().all(|v| (v - 2.0).abs() < 1e-9));
    }

    #[test]
    fn raising_a_spatial_index_flips_sign() {
        let g = grid2(8, 32, 1.0, 2.0 * PI);
        let f = ScalarLatticeField::from_fn(g, |x| x[1].sin());
        let down = central_difference(&f, 1, Variance::Down).unwrap();
        let up = central_difference(&f, 1, Variance::Up).unwrap();
        for (a, b) in down.values().iter().zip(up.values()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn sine_derivative_within_taylor_bound() {
        let h = 2.0 * PI / 256.0;
        let g = grid2(4, 256, 1.0, 2.0 * PI);
        let f = ScalarLatticeField::from_fn(g.clone(), |x| x[1].sin());
        let d = central_difference(&f, 1, Variance::Down).unwrap();
        let err = (0..g.len()).map(|s| (d.values()[s] - g.coordinate(s, 1).cos()).abs()).fold(0.0, f64::max);
        assert!(err <= h * h, "{err}");
    }

    #[test]
    fn integrals_of_simple_fields() {
        let g = grid2(11, 10, 1.0, 3.0);
        let one = ScalarLatticeField::from_fn(g.clone(), |_| 1.0);
        let v = volume_integral(&one, SlabRegion::new(0, 10)).unwrap();
        assert!((v - 3.0).abs() < 1e-13);
        let s = ScalarLatticeField::from_fn(g.clone(), |x| (2.0 * PI * x[1] / 3.0).sin());
        assert!(volume_integral(&s, SlabRegion::new(0, 10)).unwrap().abs() < 1e-12);
        let j = VectorLatticeField::from_fn(g.clone(), |_, mu| if mu == 0 { 2.5 } else { 0.0 });
        assert_eq!(surface_flux(&j, SlabRegion::new(2, 7)).unwrap(), 0.0);
        let j = VectorLatticeField::from_fn(g, |x, mu| if mu == 0 { x[0] } else { 0.0 });
        assert!((surface_flux(&j, SlabRegion::new(0, 10)).unwrap() - 3.0).abs() < 1e-12);
        assert!(divergence(&j).values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn empty_slabs_are_errors() {
        let g = grid2(8, 8, 1.0, 1.0);
        let f = ScalarLatticeField::zeros(g, 1);
        assert!(matches!(volume_integral(&f, SlabRegion::new(4, 2)), Err(LatticeError::EmptySlab { .. })));
    }
}
