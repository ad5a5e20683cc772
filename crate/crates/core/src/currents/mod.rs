//! Perturbation families, the nonlocal constant, and conserved currents.
//!
//! Every current is built symbolically as one polynomial per contravariant
//! component over the jet variables, then compiled and evaluated on the jets
//! of a [`Solution`]. Conservation is never assumed: it is measured by the
//! lattice divergence in [`verify`].

pub mod family;
pub mod nonlocal;
pub mod theorems;
pub mod verify;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::dsl::compile::Compiled;
use crate::dsl::{Expr, Poly};
use crate::lattice::{par_chunks, LatticeError, VectorLatticeField};
use crate::solution::Solution;
use crate::theory::{Scratch, Theory, TheoryError};

pub use family::{FamilyKind, PerturbationFamily, Velocity};
pub use nonlocal::{nonlocal_constant, NonlocalReport};
pub use theorems::*;
pub use verify::{chart_divergence, verify_current, verify_tensor, SliceResidual, VerificationEntry};

/// A theorem hypothesis that does not hold, with a stable code for reports.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Refusal {
    #[error("the density depends explicitly on spacetime, so translations are not a symmetry")]
    SpacetimeDependent,
    #[error("no constant ρ makes δL/δ∂^μφ = ρ ∂_μ(δL/δφ) hold identically")]
    NoConstantRho,
    #[error("the scaling dimension (D-2)/2 vanishes for D = 2, so the required degree D/Δ is undefined")]
    ScalingDimensionZero,
    #[error("the density is not of the form ½G∂φ∂φ - U(φ): {0}")]
    NotCanonical(String),
    #[error("the potential has degree {found}, but {required} is required")]
    WrongDegree { found: String, required: String },
    #[error("the density is not of the form e^(h·x) L(φ, ∂φ)")]
    NotExponentiallyWeighted,
    #[error("the weight vector h is null (h·h = 0), so no c with c·h = 2 is of the form c ∝ h")]
    NullWeight,
    #[error("h_{0} = 0, so the componentwise reciprocal 2/h_{0} does not exist")]
    ZeroWeightComponent(usize),
    #[error("the phase family needs a complex field")]
    NeedsComplexField,
    #[error("D_{0}ϑ differs from ∂L/∂x^{0}")]
    ThetaInconsistent(usize),
    #[error("the generator condition fails: residual {0:e} off zero")]
    GeneratorCondition(f64),
    #[error("the total divergence condition fails identically: {0}")]
    DivergenceCondition(String),
    #[error("∂L_ε/∂ε is not constant: deviation {deviation:e} exceeds {threshold:e}")]
    NotFinitelyInvariant { deviation: f64, threshold: f64 },
    #[error("family parameters: {0}")]
    FamilyParameters(String),
}

impl Refusal {
    pub fn code(&self) -> &'static str {
        match self {
            Refusal::SpacetimeDependent => "spacetime-dependent",
            Refusal::NoConstantRho => "no-constant-rho",
            Refusal::ScalingDimensionZero => "scaling-dimension-zero",
            Refusal::NotCanonical(_) => "not-canonical",
            Refusal::WrongDegree { .. } => "wrong-homogeneity-degree",
            Refusal::NotExponentiallyWeighted => "not-exponentially-weighted",
            Refusal::NullWeight => "null-weight",
            Refusal::ZeroWeightComponent(_) => "zero-weight-component",
            Refusal::NeedsComplexField => "needs-complex-field",
            Refusal::ThetaInconsistent(_) => "theta-inconsistent",
            Refusal::GeneratorCondition(_) => "generator-condition",
            Refusal::DivergenceCondition(_) => "divergence-condition",
            Refusal::NotFinitelyInvariant { .. } => "not-finitely-invariant",
            Refusal::FamilyParameters(_) => "family-parameters",
        }
    }
}

#[derive(Debug, Error)]
pub enum CurrentError {
    #[error("refused ({code}): {0}", code = .0.code())]
    Refused(#[from] Refusal),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Dsl(#[from] crate::dsl::DslError),
    #[error("slab is empty: t0 = {t0}, t1 = {t1}")]
    EmptySlab { t0: usize, t1: usize },
    #[error("{0}")]
    Other(String),
}

/// A scalar observable `q` or `i·q` over the jet variables. The `i·q` form
/// carries the phase family; its value is always taken as the real part.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub poly: Poly,
    pub imaginary: bool,
}

impl Observable {
    pub fn real(poly: Poly) -> Self {
        Observable { poly, imaginary: false }
    }

    pub fn compile(&self, theory: &Theory) -> CompiledObservable {
        CompiledObservable { c: theory.compile(&self.poly), imaginary: self.imaginary }
    }
}

#[derive(Clone, Debug)]
pub struct CompiledObservable {
    c: Compiled,
    imaginary: bool,
}

impl CompiledObservable {
    #[inline]
    pub fn eval(&self, theory: &Theory, channels: &[f64], scratch: &mut Scratch) -> f64 {
        if self.imaginary {
            theory.component_jet::<Complex64>(channels, &mut scratch.complex);
            // Re(i z) = -Im z
            -self.c.eval(&scratch.complex).im
        } else {
            theory.eval_real(&self.c, channels, scratch)
        }
    }

    pub fn evaluate(&self, sol: &Solution) -> Vec<f64> {
        let n = sol.grid().len();
        let mut out = vec![0.0; n];
        let theory = sol.theory();
        par_chunks(&mut out, 1024, |chunk, vals| {
            let mut scratch = Scratch::default();
            for (k, v) in vals.iter_mut().enumerate() {
                *v = self.eval(theory, sol.jet(chunk * 1024 + k), &mut scratch);
            }
        });
        out
    }

    /// Value on the jet of `site` with its coordinates replaced by `x`.
    pub fn eval_with_coords(&self, sol: &Solution, site: usize, x: &[f64], scratch: &mut Scratch) -> f64 {
        let d = x.len();
        let mut jet = std::mem::take(&mut scratch.real);
        jet.clear();
        jet.extend_from_slice(sol.jet(site));
        jet[..d].copy_from_slice(x);
        let v = self.eval(sol.theory(), &jet, scratch);
        scratch.real = jet;
        v
    }
}

/// Symbolic D-vector `j^μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurrentExpr {
    pub name: String,
    /// Short label of the construction that produced it.
    pub theorem: String,
    pub components: Vec<Poly>,
    pub imaginary: bool,
}

impl CurrentExpr {
    pub fn compile(&self, theory: &Theory) -> Vec<CompiledObservable> {
        self.components
            .iter()
            .map(|p| CompiledObservable { c: theory.compile(p), imaginary: self.imaginary })
            .collect()
    }

    pub fn evaluate(&self, sol: &Solution) -> CurrentField {
        let g = sol.grid().clone();
        let mut values = Vec::with_capacity(g.len() * g.dim());
        for c in self.compile(sol.theory()) {
            values.extend(c.evaluate(sol));
        }
        CurrentField {
            name: self.name.clone(),
            theorem: self.theorem.clone(),
            field: VectorLatticeField::from_raw(g, values),
        }
    }

    pub fn depends_on_coordinates(&self) -> bool {
        self.components.iter().any(|p| p.depends_on(&|v| matches!(v, crate::dsl::Var::Coord(_))))
    }

    /// Surface syntax per component, for reports.
    pub fn display(&self, names: &[String]) -> Vec<String> {
        self.components
            .iter()
            .map(|p| {
                let e: Expr = p.to_expr(names);
                if self.imaginary {
                    format!("i*({e})")
                } else {
                    e.to_string()
                }
            })
            .collect()
    }

    pub fn zero(name: &str, theorem: &str, dim: usize) -> Self {
        CurrentExpr { name: name.into(), theorem: theorem.into(), components: vec![Poly::zero(); dim], imaginary: false }
    }
}

/// Rank-2 tensor as a list of currents: column `ν` holds `X^μ_ν` (or
/// `X^{μν}`), conserved in `μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorExpr {
    pub name: String,
    pub theorem: String,
    pub columns: Vec<CurrentExpr>,
}

impl TensorExpr {
    pub fn column(&self, nu: usize) -> &CurrentExpr {
        &self.columns[nu]
    }

    pub fn component(&self, mu: usize, nu: usize) -> &Poly {
        &self.columns[nu].components[mu]
    }

    pub fn evaluate(&self, sol: &Solution) -> TensorField {
        TensorField {
            name: self.name.clone(),
            theorem: self.theorem.clone(),
            columns: self.columns.iter().map(|c| c.evaluate(sol)).collect(),
        }
    }
}

/// A current on the lattice, named after its construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurrentField {
    pub name: String,
    pub theorem: String,
    #[serde(skip)]
    pub field: VectorLatticeField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    pub name: String,
    pub theorem: String,
    pub columns: Vec<CurrentField>,
}

impl TensorField {
    pub fn at(&self, mu: usize, nu: usize, site: usize) -> f64 {
        self.columns[nu].field.component(mu)[site]
    }
}
