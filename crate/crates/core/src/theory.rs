//! A parsed density with every parameter bound, lowered once into the
//! polynomials the rest of the crate evaluates on jets.
//!
//! Storage is by *channel*: a real field owns one channel, a complex field
//! owns two (real and imaginary part). Evaluation is by *component*: a complex
//! field contributes `φ` and `φ*` as independent variables. Both lists have the
//! same length, so a channel jet converts to a component jet slot by slot.

use num_complex::Complex64;
use thiserror::Error;

use crate::dsl::analysis::SYMBOLIC_TOL;
use crate::dsl::compile::{Compiled, JetLayout};
use crate::dsl::lower::{lower_lagrangian, Params};
use crate::dsl::{DslError, LagrangianSpec, Poly, Var};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("parameter \"{0}\" has no value")]
    Unbound(String),
    #[error("the density depends on second derivatives of the field")]
    SecondOrderDensity,
    #[error("the field equation for component {0} cannot be solved for its second time derivative")]
    NotHyperbolic(String),
    #[error("the field equation couples mixed time-space second derivatives, which the explicit stepper cannot handle")]
    MixedTimeDerivatives,
    #[error("theory has dimension {theory} but the grid has dimension {grid}")]
    DimensionMismatch { theory: usize, grid: usize },
}

/// Where a component reads its value from in channel storage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Real(usize),
    /// `re + i·im`, or its conjugate when `conj` is set.
    Complex { re: usize, im: usize, conj: bool },
}

#[derive(Debug)]
pub struct Theory {
    spec: LagrangianSpec,
    layout: JetLayout,
    names: Vec<String>,
    sources: Vec<Source>,
    partner: Vec<usize>,
    /// `L` in canonical form.
    pub lagrangian: Poly,
    /// `∂L/∂φ_a`.
    pub dl_dfield: Vec<Poly>,
    /// `∂L/∂(∂_μφ_a)`, indexed `[a][μ]`; carries an upper μ.
    pub momentum: Vec<Vec<Poly>>,
    /// `∂L/∂φ_a − D_μ ∂L/∂(∂_μφ_a)`.
    pub euler_lagrange: Vec<Poly>,
    /// `∂L/∂x^μ` at fixed field values.
    pub explicit_x: Vec<Poly>,
    compiled_l: Compiled,
}

impl Theory {
    pub fn new(spec: LagrangianSpec) -> Result<Theory, TheoryError> {
        if let Some(p) = spec.unbound_params().into_iter().next() {
            return Err(TheoryError::Unbound(p));
        }
        let lagrangian = lower_lagrangian(&spec, Params::Bind)?;
        if let Some(p) = lagrangian.params().into_iter().next() {
            return Err(TheoryError::Unbound(p));
        }
        if lagrangian.vars().iter().any(|v| matches!(v, Var::Hess(..))) {
            return Err(TheoryError::SecondOrderDensity);
        }
        let dim = spec.dim;
        let names = spec.components();
        let ncomp = names.len();
        let layout = JetLayout::new(dim, ncomp);

        let mut sources = Vec::with_capacity(ncomp);
        let mut partner = Vec::with_capacity(ncomp);
        let mut ch = 0;
        for f in &spec.fields {
            if f.is_complex() {
                let a = sources.len();
                sources.push(Source::Complex { re: ch, im: ch + 1, conj: false });
                sources.push(Source::Complex { re: ch, im: ch + 1, conj: true });
                partner.push(a + 1);
                partner.push(a);
                ch += 2;
            } else {
                partner.push(sources.len());
                sources.push(Source::Real(ch));
                ch += 1;
            }
        }

        let dl_dfield: Vec<Poly> = (0..ncomp).map(|a| lagrangian.diff(Var::Field(a))).collect();
        let momentum: Vec<Vec<Poly>> = (0..ncomp)
            .map(|a| (0..dim).map(|mu| lagrangian.diff(Var::Grad(a, mu))).collect())
            .collect();
        let euler_lagrange = (0..ncomp)
            .map(|a| {
                let mut el = dl_dfield[a].clone();
                for (mu, p) in momentum[a].iter().enumerate() {
                    // P has no Hess because L has none.
                    let d = p.total_derivative(mu, ncomp, dim).expect("first-order density");
                    el = el.sub(&d);
                }
                el
            })
            .collect();
        let explicit_x = (0..dim).map(|mu| lagrangian.diff(Var::Coord(mu))).collect();
        let compiled_l = Compiled::new(&lagrangian, layout)?;
        Ok(Theory {
            spec,
            layout,
            names,
            sources,
            partner,
            lagrangian,
            dl_dfield,
            momentum,
            euler_lagrange,
            explicit_x,
            compiled_l,
        })
    }

    pub fn spec(&self) -> &LagrangianSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn eta(&self, mu: usize) -> f64 {
        self.spec.metric.eta(mu)
    }

    pub fn layout(&self) -> JetLayout {
        self.layout
    }

    /// Number of components, which equals the number of storage channels.
    pub fn ncomp(&self) -> usize {
        self.names.len()
    }

    pub fn component_names(&self) -> &[String] {
        &self.names
    }

    pub fn source(&self, a: usize) -> Source {
        self.sources[a]
    }

    /// The component paired with `a` in bilinear contractions: the conjugate
    /// for a complex component, `a` itself for a real one.
    pub fn partner(&self, a: usize) -> usize {
        self.partner[a]
    }

    pub fn is_complex(&self) -> bool {
        self.spec.is_complex()
    }

    pub fn is_spacetime_independent(&self) -> bool {
        self.explicit_x.iter().all(Poly::is_zero)
    }

    /// `δL/δ∂^μφ_a`, the momentum with its index lowered.
    pub fn momentum_lower(&self, a: usize, mu: usize) -> Poly {
        self.momentum[a][mu].scale(self.eta(mu))
    }

    pub fn compile(&self, p: &Poly) -> Compiled {
        // Every poly handed in is built from this theory's own variables.
        Compiled::new(p, self.layout).expect("poly over the theory's jet layout")
    }

    /// Component jet from a channel jet. The channel jet has the same layout
    /// with channels in place of components.
    pub fn component_jet<S: Scalar>(&self, channels: &[f64], out: &mut Vec<S>) {
        let l = self.layout;
        out.clear();
        out.extend(channels[..l.dim].iter().map(|&x| S::from_f64(x)));
        out.resize(l.len(), S::zero());
        let per = 1 + l.dim + l.dim * l.dim;
        for (a, src) in self.sources.iter().enumerate() {
            for k in 0..per {
                let slot = |c: usize| match k {
                    0 => l.field(c),
                    k if k <= l.dim => l.grad(c, k - 1),
                    k => {
                        let r = k - 1 - l.dim;
                        l.dim + l.ncomp * (1 + l.dim) + c * l.dim * l.dim + r
                    }
                };
                out[slot(a)] = match *src {
                    Source::Real(c) => S::from_f64(channels[slot(c)]),
                    Source::Complex { re, im, conj } => {
                        let i = channels[slot(im)];
                        S::from_parts(channels[slot(re)], if conj { -i } else { i })
                            .expect("complex theories evaluate over a complex scalar")
                    }
                };
            }
        }
    }

    /// Evaluates a real-valued observable on a channel jet.
    pub fn eval_real(&self, c: &Compiled, channels: &[f64], scratch: &mut Scratch) -> f64 {
        if self.is_complex() {
            self.component_jet::<Complex64>(channels, &mut scratch.complex);
            c.eval(&scratch.complex).re
        } else {
            c.eval(&channels[..self.layout.len()])
        }
    }

    /// `L` on a channel jet.
    pub fn density(&self, channels: &[f64], scratch: &mut Scratch) -> f64 {
        self.eval_real(&self.compiled_l, channels, scratch)
    }

    /// Maximum of `|poly|` relative to its largest coefficient is below the
    /// symbolic tolerance, i.e. the poly is zero up to coefficient rounding.
    pub fn negligible(p: &Poly, scale: f64) -> bool {
        p.max_coefficient() <= SYMBOLIC_TOL * scale.max(1.0)
    }
}

/// Reusable buffers for per-site evaluation.
#[derive(Default, Clone, Debug)]
pub struct Scratch {
    pub complex: Vec<Complex64>,
    pub real: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_lagrangian;

    #[test]
    fn klein_gordon_field_equation() {
        let s = parse_lagrangian("dim 2\nparam m = 2\nL = 0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2").unwrap();
        let t = Theory::new(s).unwrap();
        // EL = -m²φ - φ_00 + φ_11
        let el = &t.euler_lagrange[0];
        let expect = Poly::var(Var::Field(0))
            .scale(-4.0)
            .sub(&Poly::var(Var::hess(0, 0, 0)))
            .add(&Poly::var(Var::hess(0, 1, 1)));
        assert_eq!(el, &expect);
        assert!(t.is_spacetime_independent());
    }

    #[test]
    fn complex_components_pair_up() {
        let s = parse_lagrangian("dim 2\nparam m = 1\nd(phi,mu)*d(phistar,^mu) - m^2*phi*phistar").unwrap();
        let t = Theory::new(s).unwrap();
        assert_eq!(t.ncomp(), 2);
        assert_eq!(t.partner(0), 1);
        let l = t.layout();
        let mut ch = vec![0.0; l.len()];
        ch[l.field(0)] = 0.3;
        ch[l.field(1)] = 0.4;
        ch[l.grad(1, 1)] = 2.0;
        let mut jet: Vec<Complex64> = Vec::new();
        t.component_jet(&ch, &mut jet);
        assert_eq!(jet[l.field(0)], Complex64::new(0.3, 0.4));
        assert_eq!(jet[l.field(1)], Complex64::new(0.3, -0.4));
        assert_eq!(jet[l.grad(1, 1)], Complex64::new(0.0, -2.0));
        // |φ|² kinetic density is real.
        let mut scratch = Scratch::default();
        let v = t.density(&ch, &mut scratch);
        assert!((v - (-4.0 - 0.25)).abs() < 1e-14);
    }

    #[test]
    fn unbound_parameters_are_refused() {
        let s = parse_lagrangian("0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2").unwrap();
        assert!(matches!(Theory::new(s), Err(TheoryError::Unbound(_))));
    }
}
