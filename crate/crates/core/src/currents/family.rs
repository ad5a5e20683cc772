//! One-parameter deformations `φ_ε` of a field, represented by their
//! ε-velocity `∂φ_ε/∂ε` at `ε = 0`. Every construction downstream only ever
//! needs that velocity, so families are stored as one polynomial per
//! component over the jet variables.

use serde::{Deserialize, Serialize};

use crate::dsl::lower::{lower, Params};
use crate::dsl::{parse_expr, Poly, Var};
use crate::lattice::ScalarLatticeField;
use crate::solution::Solution;
use crate::theory::Theory;

use super::{theorems, Observable, Refusal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilyKind {
    Identity,
    /// `φ - ε`
    FieldShiftConst,
    /// `(1 + ε)φ`
    FieldScale,
    /// `φ(x + εa)`
    SpacetimeShift { a: Vec<f64> },
    /// `φ + ε b^μ δL/δ∂^μφ`, paired with the conjugate for complex fields.
    MomentumFieldShift { b: Vec<f64> },
    /// `e^(εΔ) φ(e^ε x)`; `Δ` defaults to `(D-2)/2`.
    Scaling {
        #[serde(default)]
        delta: Option<f64>,
    },
    /// `φ + ε(φ + c^μ∂_μφ)`; `c` defaults to the value that makes the
    /// exponentially weighted density a total divergence.
    DissipativeMixed {
        #[serde(default)]
        c: Option<Vec<f64>>,
    },
    /// `e^(iε)φ`, and `e^(-iε)φ*` for the conjugate.
    Phase,
    /// `φ(x + εf(x)) + ϕ_ε(x)` with `ϕ_0 = 0`. Both `f^α` and the internal
    /// velocity `∂ϕ_ε/∂ε` are written in the Lagrangian syntax; an empty
    /// `internal` list means zero.
    MixedGeneral {
        f: Vec<String>,
        #[serde(default)]
        internal: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationFamily {
    #[serde(flatten)]
    pub kind: FamilyKind,
}

impl From<FamilyKind> for PerturbationFamily {
    fn from(kind: FamilyKind) -> Self {
        PerturbationFamily { kind }
    }
}

/// `∂φ_a,ε/∂ε` at `ε = 0` per component. With `imaginary` set the velocity
/// is `i` times the stored polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct Velocity {
    pub polys: Vec<Poly>,
    pub imaginary: bool,
}

impl Velocity {
    fn real(polys: Vec<Poly>) -> Self {
        Velocity { polys, imaginary: false }
    }

    pub fn is_zero(&self) -> bool {
        self.polys.iter().all(Poly::is_zero)
    }
}

fn check_len(v: &[f64], dim: usize, what: &str) -> Result<(), Refusal> {
    if v.len() != dim {
        return Err(Refusal::FamilyParameters(format!("{what} has {} entries, expected {dim}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Refusal::FamilyParameters(format!("{what} is not finite")));
    }
    Ok(())
}

/// `Σ_μ w^μ ∂_μφ_a` for every component.
fn transport(theory: &Theory, w: &[Poly]) -> Vec<Poly> {
    (0..theory.ncomp())
        .map(|a| Poly::sum(w.iter().enumerate().map(|(mu, c)| c.mul(&Poly::var(Var::Grad(a, mu)))).collect::<Vec<_>>().iter()))
        .collect()
}

/// Lowers an auxiliary expression in the theory's own variables.
pub(crate) fn lower_aux(theory: &Theory, src: &str) -> Result<Poly, Refusal> {
    let e = parse_expr(src).map_err(|e| Refusal::FamilyParameters(format!("\"{src}\": {e}")))?;
    lower(theory.spec(), &e, Params::Bind).map_err(|e| Refusal::FamilyParameters(format!("\"{src}\": {e}")))
}

impl PerturbationFamily {
    pub fn name(&self) -> &'static str {
        match self.kind {
            FamilyKind::Identity => "identity",
            FamilyKind::FieldShiftConst => "field-shift-const",
            FamilyKind::FieldScale => "field-scale",
            FamilyKind::SpacetimeShift { .. } => "spacetime-shift",
            FamilyKind::MomentumFieldShift { .. } => "momentum-field-shift",
            FamilyKind::Scaling { .. } => "scaling",
            FamilyKind::DissipativeMixed { .. } => "dissipative-mixed",
            FamilyKind::Phase => "phase",
            FamilyKind::MixedGeneral { .. } => "mixed-general",
        }
    }

    /// The generator `f^α(x)` of the spacetime part of a mixed family.
    pub fn shift_vector(&self, theory: &Theory) -> Result<Vec<Poly>, Refusal> {
        let d = theory.dim();
        let c = |v: &[f64]| v.iter().map(|&x| Poly::constant(x)).collect();
        Ok(match &self.kind {
            FamilyKind::SpacetimeShift { a } => {
                check_len(a, d, "a")?;
                c(a)
            }
            FamilyKind::Scaling { .. } => (0..d).map(|mu| Poly::var(Var::Coord(mu))).collect(),
            FamilyKind::MixedGeneral { f, .. } => {
                if f.len() != d {
                    return Err(Refusal::FamilyParameters(format!("f has {} entries, expected {d}", f.len())));
                }
                let f = f.iter().map(|s| lower_aux(theory, s)).collect::<Result<Vec<_>, _>>()?;
                if f.iter().any(|p| p.depends_on(&|v| !matches!(v, Var::Coord(_)))) {
                    return Err(Refusal::FamilyParameters("f may depend on coordinates only".into()));
                }
                f
            }
            _ => vec![Poly::zero(); d],
        })
    }

    /// Velocity of the internal part `ϕ_ε` of a mixed family.
    pub fn internal_velocity(&self, theory: &Theory) -> Result<Velocity, Refusal> {
        let nc = theory.ncomp();
        match &self.kind {
            FamilyKind::MixedGeneral { internal, .. } => {
                if internal.is_empty() {
                    return Ok(Velocity::real(vec![Poly::zero(); nc]));
                }
                if internal.len() != nc {
                    return Err(Refusal::FamilyParameters(format!(
                        "internal velocity has {} entries, expected one per component ({nc})",
                        internal.len()
                    )));
                }
                let polys = internal.iter().map(|s| lower_aux(theory, s)).collect::<Result<Vec<_>, _>>()?;
                if polys.iter().any(|p| p.vars().iter().any(|v| matches!(v, Var::Hess(..)))) {
                    return Err(Refusal::FamilyParameters("internal velocity may not use second derivatives".into()));
                }
                Ok(Velocity::real(polys))
            }
            FamilyKind::Scaling { delta } => {
                let delta = delta.unwrap_or((theory.dim() as f64 - 2.0) / 2.0);
                Ok(Velocity::real((0..nc).map(|a| Poly::var(Var::Field(a)).scale(delta)).collect()))
            }
            _ => {
                let mut v = self.velocity(theory)?;
                let f = self.shift_vector(theory)?;
                let t = transport(theory, &f);
                for (p, s) in v.polys.iter_mut().zip(&t) {
                    *p = p.sub(s);
                }
                Ok(v)
            }
        }
    }

    pub fn velocity(&self, theory: &Theory) -> Result<Velocity, Refusal> {
        let nc = theory.ncomp();
        let d = theory.dim();
        let field = |a| Poly::var(Var::Field(a));
        Ok(match &self.kind {
            FamilyKind::Identity => Velocity::real(vec![Poly::zero(); nc]),
            FamilyKind::FieldShiftConst => Velocity::real(vec![Poly::constant(-1.0); nc]),
            FamilyKind::FieldScale => Velocity::real((0..nc).map(field).collect()),
            FamilyKind::SpacetimeShift { .. } => Velocity::real(transport(theory, &self.shift_vector(theory)?)),
            FamilyKind::MomentumFieldShift { b } => {
                check_len(b, d, "b")?;
                Velocity::real(
                    (0..nc)
                        .map(|a| {
                            let p = theory.partner(a);
                            let parts: Vec<Poly> =
                                (0..d).map(|nu| theory.momentum_lower(p, nu).scale(b[nu])).collect();
                            Poly::sum(parts.iter())
                        })
                        .collect(),
                )
            }
            FamilyKind::Scaling { .. } | FamilyKind::MixedGeneral { .. } => {
                let f = self.shift_vector(theory)?;
                let w = self.internal_velocity(theory)?;
                let t = transport(theory, &f);
                Velocity::real(w.polys.iter().zip(&t).map(|(w, t)| w.add(t)).collect())
            }
            FamilyKind::DissipativeMixed { c } => {
                let c = match c {
                    Some(c) => {
                        check_len(c, d, "c")?;
                        c.clone()
                    }
                    None => theorems::dissipative_c(theory, theorems::DissipativeVariant::Minkowski)?,
                };
                let cp: Vec<Poly> = c.iter().map(|&x| Poly::constant(x)).collect();
                let t = transport(theory, &cp);
                Velocity::real((0..nc).map(|a| field(a).add(&t[a])).collect())
            }
            FamilyKind::Phase => {
                if !theory.is_complex() {
                    return Err(Refusal::NeedsComplexField);
                }
                // v_φ = iφ and v_φ* = -iφ* on complex pairs; real fields do not rotate.
                let polys = (0..nc)
                    .map(|a| match theory.source(a) {
                        crate::theory::Source::Complex { conj: false, .. } => field(a),
                        crate::theory::Source::Complex { conj: true, .. } => field(a).neg(),
                        crate::theory::Source::Real(_) => Poly::zero(),
                    })
                    .collect();
                Velocity { polys, imaginary: true }
            }
        })
    }

    /// `∂L(x, φ_ε, ∂φ_ε)/∂ε` at `ε = 0`, by the chain rule.
    pub fn dl_depsilon(&self, theory: &Theory) -> Result<Observable, Refusal> {
        let v = self.velocity(theory)?;
        dl_depsilon_of(theory, &v)
    }

    /// The velocity sampled on a block, one field per component. Imaginary
    /// velocities are reported through their real part.
    pub fn family_velocity(&self, sol: &Solution) -> Result<Vec<ScalarLatticeField>, Refusal> {
        let theory = sol.theory();
        let v = self.velocity(theory)?;
        Ok(v
            .polys
            .iter()
            .map(|p| {
                let obs = Observable { poly: p.clone(), imaginary: v.imaginary }.compile(theory);
                ScalarLatticeField::from_raw(sol.grid().clone(), 1, obs.evaluate(sol))
            })
            .collect())
    }
}

pub fn dl_depsilon_of(theory: &Theory, v: &Velocity) -> Result<Observable, Refusal> {
    let nc = theory.ncomp();
    let d = theory.dim();
    let mut parts = Vec::with_capacity(nc * (d + 1));
    for a in 0..nc {
        if v.polys[a].is_zero() {
            continue;
        }
        parts.push(theory.dl_dfield[a].mul(&v.polys[a]));
        for alpha in 0..d {
            let dv = v.polys[a]
                .total_derivative(alpha, nc, d)
                .ok_or_else(|| Refusal::FamilyParameters("velocity uses second derivatives".into()))?;
            parts.push(theory.momentum[a][alpha].mul(&dv));
        }
    }
    Ok(Observable { poly: Poly::sum(parts.iter()), imaginary: v.imaginary })
}

/// `Σ_a P_a^μ v_a` per μ.
pub fn momentum_flux(theory: &Theory, v: &Velocity) -> Vec<Poly> {
    (0..theory.dim())
        .map(|mu| {
            let parts: Vec<Poly> =
                (0..theory.ncomp()).map(|a| theory.momentum[a][mu].mul(&v.polys[a])).collect();
            Poly::sum(parts.iter())
        })
        .collect()
}
