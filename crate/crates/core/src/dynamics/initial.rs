//! Cauchy data at `t = t0`: field values and first time derivatives.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DynamicsError, SpatialGrid};

/// Initial profile of one declared field. A complex field gets both its real
/// and imaginary channel from the same profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// `A cos(ωt − k·x)` for a real field, `A e^{i(ωt − k·x)}` for a complex
    /// one, with `ω = sqrt(|k|² + m²)`.
    PlaneWave { amplitude: f64, k: Vec<f64>, mass: f64 },
    /// Periodised Gaussian at rest; the imaginary channel of a complex field
    /// starts at zero.
    Gaussian { center: Vec<f64>, width: f64, amplitude: f64 },
    /// Random Fourier modes with integer wave numbers up to `cutoff` per axis,
    /// at rest. Reproducible from `seed`.
    RandomSmooth { seed: u64, cutoff: usize, amplitude: f64 },
    /// `value + rate·t`, uniform in space.
    Constant { value: f64, rate: f64 },
}

/// One profile per declared field, in declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub fields: Vec<Profile>,
}

impl InitialData {
    pub fn uniform(p: Profile) -> Self {
        InitialData { fields: vec![p] }
    }
}

/// Channel values and time derivatives at one spatial point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Cauchy {
    pub re: f64,
    pub im: f64,
    pub re_t: f64,
    pub im_t: f64,
}

impl Profile {
    pub fn validate(&self, space: &SpatialGrid) -> Result<(), DynamicsError> {
        let ds = space.sites.len();
        match self {
            Profile::PlaneWave { k, mass, amplitude } => {
                if k.len() != ds {
                    return Err(DynamicsError::Initial(format!(
                        "wave vector has {} entries for {} spatial axes",
                        k.len(),
                        ds
                    )));
                }
                if !amplitude.is_finite() || !mass.is_finite() {
                    return Err(DynamicsError::Initial("non-finite plane-wave parameter".into()));
                }
                for (j, (&kj, &lj)) in k.iter().zip(&space.lengths).enumerate() {
                    let n = kj * lj / (2.0 * PI);
                    if (n - n.round()).abs() > 1e-9 * (1.0 + n.abs()) {
                        return Err(DynamicsError::Incommensurate { axis: j + 1, k: kj, length: lj });
                    }
                }
            }
            Profile::Gaussian { center, width, .. } => {
                if center.len() != ds {
                    return Err(DynamicsError::Initial(format!(
                        "Gaussian centre has {} entries for {} spatial axes",
                        center.len(),
                        ds
                    )));
                }
                if width.is_nan() || *width <= 0.0 {
                    return Err(DynamicsError::Initial("Gaussian width must be positive".into()));
                }
            }
            Profile::RandomSmooth { cutoff, .. } => {
                if *cutoff == 0 {
                    return Err(DynamicsError::Initial("random-smooth cutoff must be at least 1".into()));
                }
            }
            Profile::Constant { .. } => {}
        }
        Ok(())
    }

    /// Samples the profile on every site of a spatial slice at time `t`.
    /// `complex` selects the two-channel form.
    pub fn sample(&self, space: &SpatialGrid, t: f64, complex: bool) -> Vec<Cauchy> {
        let points = space.points();
        match self {
            Profile::PlaneWave { amplitude, k, mass } => {
                let w = (k.iter().map(|v| v * v).sum::<f64>() + mass * mass).sqrt();
                points
                    .iter()
                    .map(|x| {
                        let th = w * t - k.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                        let (s, c) = th.sin_cos();
                        if complex {
                            Cauchy { re: amplitude * c, im: amplitude * s, re_t: -amplitude * w * s, im_t: amplitude * w * c }
                        } else {
                            Cauchy { re: amplitude * c, re_t: -amplitude * w * s, ..Default::default() }
                        }
                    })
                    .collect()
            }
            Profile::Gaussian { center, width, amplitude } => points
                .iter()
                .map(|x| {
                    let mut g = 1.0;
                    for (j, (&xj, &cj)) in x.iter().zip(center).enumerate() {
                        let l = space.lengths[j];
                        // Sum over images keeps the profile smooth on the torus.
                        let reach = (8.0 * width / l).ceil() as i64 + 1;
                        let s: f64 = (-reach..=reach)
                            .map(|n| {
                                let dx = xj - cj + n as f64 * l;
                                (-dx * dx / (2.0 * width * width)).exp()
                            })
                            .sum();
                        g *= s;
                    }
                    Cauchy { re: amplitude * g, ..Default::default() }
                })
                .collect(),
            Profile::RandomSmooth { seed, cutoff, amplitude } => {
                let modes = random_modes(*seed, *cutoff, space.sites.len(), complex);
                points
                    .iter()
                    .map(|x| {
                        let mut re = 0.0;
                        let mut im = 0.0;
                        for m in &modes {
                            let th: f64 = m.n.iter().zip(x).zip(&space.lengths).map(|((&n, &xj), &l)| 2.0 * PI * n as f64 * xj / l).sum();
                            re += m.a * (th + m.phase).cos();
                            im += m.b * (th + m.phase_b).cos();
                        }
                        Cauchy { re: amplitude * re, im: if complex { amplitude * im } else { 0.0 }, ..Default::default() }
                    })
                    .collect()
            }
            Profile::Constant { value, rate } => {
                let v = value + rate * t;
                points
                    .iter()
                    .map(|_| Cauchy { re: v, re_t: *rate, im: 0.0, im_t: 0.0 })
                    .collect()
            }
        }
    }
}

struct Mode {
    n: Vec<i64>,
    a: f64,
    phase: f64,
    b: f64,
    phase_b: f64,
}

fn random_modes(seed: u64, cutoff: usize, axes: usize, complex: bool) -> Vec<Mode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = cutoff as i64;
    let mut out = Vec::new();
    let mut n = vec![-c; axes];
    loop {
        // Amplitudes fall off with |n| so the field stays smooth.
        let n2: i64 = n.iter().map(|v| v * v).sum();
        let decay = 1.0 / (1.0 + n2 as f64);
        let a = rng.gen_range(-1.0..1.0) * decay;
        let phase = rng.gen_range(0.0..2.0 * PI);
        let (b, phase_b) = if complex {
            (rng.gen_range(-1.0..1.0) * decay, rng.gen_range(0.0..2.0 * PI))
        } else {
            (0.0, 0.0)
        };
        out.push(Mode { n: n.clone(), a, phase, b, phase_b });
        let mut j = 0;
        loop {
            if j == axes {
                return out;
            }
            n[j] += 1;
            if n[j] <= c {
                break;
            }
            n[j] = -c;
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> SpatialGrid {
        SpatialGrid { sites: vec![16], lengths: vec![2.0 * PI], origin: vec![0.0] }
    }

    #[test]
    fn incommensurate_wave_vectors_are_refused() {
        let p = Profile::PlaneWave { amplitude: 1.0, k: vec![1.5], mass: 1.0 };
        assert!(matches!(p.validate(&space()), Err(DynamicsError::Incommensurate { .. })));
        let p = Profile::PlaneWave { amplitude: 1.0, k: vec![2.0], mass: 1.0 };
        assert!(p.validate(&space()).is_ok());
    }

    #[test]
    fn complex_plane_wave_is_a_rotation() {
        let p = Profile::PlaneWave { amplitude: 1.0, k: vec![1.0], mass: 0.0 };
        let s = p.sample(&space(), 0.3, true);
        for c in &s {
            assert!((c.re * c.re + c.im * c.im - 1.0).abs() < 1e-14);
            // d/dt e^{iθ} = iω e^{iθ}
            assert!((c.re_t + c.im).abs() < 1e-14 && (c.im_t - c.re).abs() < 1e-14);
        }
    }

    #[test]
    fn random_data_is_reproducible_and_periodic() {
        let p = Profile::RandomSmooth { seed: 7, cutoff: 3, amplitude: 1.0 };
        let a = p.sample(&space(), 0.0, false);
        let b = p.sample(&space(), 0.0, false);
        assert_eq!(a, b);
        let q = Profile::RandomSmooth { seed: 8, cutoff: 3, amplitude: 1.0 };
        assert_ne!(a, q.sample(&space(), 0.0, false));
    }
}
