//! Observed order of accuracy from a refinement sequence.

use serde::{Deserialize, Serialize};

use super::DynamicsError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceResult {
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log e` against `log h`.
    pub order: f64,
    /// Orders between consecutive resolutions.
    pub pairwise: Vec<f64>,
    /// Errors strictly decrease as `h` decreases.
    pub monotone: bool,
}

/// Fits `e ≈ C hᵖ`. Needs at least three resolutions with positive errors.
pub fn fit_order(h: &[f64], errors: &[f64]) -> Result<ConvergenceResult, DynamicsError> {
    if h.len() != errors.len() {
        return Err(DynamicsError::Convergence("one error per resolution is required".into()));
    }
    if h.len() < 3 {
        return Err(DynamicsError::Convergence(format!("{} resolutions given; at least 3 are needed", h.len())));
    }
    if errors.iter().any(|e| !e.is_finite() || *e <= 0.0) || h.iter().any(|v| v.is_nan() || *v <= 0.0) {
        return Err(DynamicsError::Convergence("errors and spacings must be positive and finite".into()));
    }
    let mut idx: Vec<usize> = (0..h.len()).collect();
    idx.sort_by(|&a, &b| h[b].total_cmp(&h[a]));
    let hs: Vec<f64> = idx.iter().map(|&i| h[i]).collect();
    let es: Vec<f64> = idx.iter().map(|&i| errors[i]).collect();
    let xs: Vec<f64> = hs.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = es.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let pairwise = (1..xs.len()).map(|i| (ys[i - 1] - ys[i]) / (xs[i - 1] - xs[i])).collect();
    let monotone = es.windows(2).all(|w| w[1] < w[0]);
    Ok(ConvergenceResult { h: hs, errors: es, order: sxy / sxx, pairwise, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|v| 3.0 * v * v).collect();
        let r = fit_order(&h, &e).unwrap();
        assert!((r.order - 2.0).abs() < 1e-12);
        assert!(r.monotone);
    }

    #[test]
    fn flags_and_errors() {
        assert!(fit_order(&[0.1, 0.05], &[1.0, 0.5]).is_err());
        let r = fit_order(&[0.1, 0.05, 0.025], &[1.0, 2.0, 0.1]).unwrap();
        assert!(!r.monotone);
    }
}
