//! Flattened evaluator for canonical polynomials over a jet.
//!
//! A jet is a slice laid out as `[x^0..x^{D-1}, φ_a, ∂_μφ_a, ∂_μ∂_νφ_a]` with
//! the derivative blocks component-major. Only `μ <= ν` Hessian slots are read.

use num_rational::Rational64;
use num_traits::{One, ToPrimitive};

use crate::scalar::Scalar;

use super::poly::{Atom, Poly, Var};
use super::DslError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JetLayout {
    pub dim: usize,
    pub ncomp: usize,
}

impl JetLayout {
    pub fn new(dim: usize, ncomp: usize) -> Self {
        JetLayout { dim, ncomp }
    }

    pub fn len(&self) -> usize {
        self.dim + self.ncomp * (1 + self.dim + self.dim * self.dim)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, mu: usize) -> usize {
        mu
    }

    pub fn field(&self, a: usize) -> usize {
        self.dim + a
    }

    pub fn grad(&self, a: usize, mu: usize) -> usize {
        self.dim + self.ncomp + a * self.dim + mu
    }

    pub fn hess(&self, a: usize, mu: usize, nu: usize) -> usize {
        let (lo, hi) = (mu.min(nu), mu.max(nu));
        self.dim + self.ncomp * (1 + self.dim) + a * self.dim * self.dim + lo * self.dim + hi
    }

    pub fn slot(&self, v: Var) -> usize {
        match v {
            Var::Coord(k) => self.coord(k),
            Var::Field(a) => self.field(a),
            Var::Grad(a, mu) => self.grad(a, mu),
            Var::Hess(a, mu, nu) => self.hess(a, mu, nu),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Power {
    One,
    Int(i32),
    Real(f64),
}

impl Power {
    fn of(r: Rational64) -> Power {
        if r.is_one() {
            Power::One
        } else if r.is_integer() && r.numer().to_i32().is_some() {
            Power::Int(r.numer().to_i32().unwrap())
        } else {
            Power::Real(r.to_f64().unwrap_or(f64::NAN))
        }
    }

    #[inline]
    fn apply<S: Scalar>(self, b: S) -> S {
        match self {
            Power::One => b,
            Power::Int(2) => b * b,
            Power::Int(n) => b.powi(n),
            Power::Real(e) => b.powf(e),
        }
    }
}

#[derive(Clone, Debug)]
enum Leaf {
    Slot(usize),
    Sub(Box<Compiled>),
}

#[derive(Clone, Debug)]
struct Term {
    coef: f64,
    factors: Vec<(Leaf, Power)>,
    exp: Option<Box<Compiled>>,
}

#[derive(Clone, Debug, Default)]
pub struct Compiled {
    terms: Vec<Term>,
}

impl Compiled {
    /// Fails if a parameter is still symbolic or a variable falls outside
    /// the layout.
    pub fn new(p: &Poly, layout: JetLayout) -> Result<Compiled, DslError> {
        let mut terms = Vec::with_capacity(p.len());
        for (m, c) in p.terms() {
            let mut factors = Vec::with_capacity(m.factors().len());
            for (a, e) in m.factors() {
                let leaf = match a {
                    Atom::Var(v) => {
                        check(*v, layout)?;
                        Leaf::Slot(layout.slot(*v))
                    }
                    Atom::Param(name) => return Err(DslError::MissingValue(name.clone())),
                    Atom::Pow(b) => Leaf::Sub(Box::new(Compiled::new(b, layout)?)),
                };
                factors.push((leaf, Power::of(*e)));
            }
            let exp = match m.exp_arg() {
                Some(arg) => Some(Box::new(Compiled::new(arg, layout)?)),
                None => None,
            };
            terms.push(Term { coef: c, factors, exp });
        }
        Ok(Compiled { terms })
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    #[inline]
    pub fn eval<S: Scalar>(&self, jet: &[S]) -> S {
        let mut acc = S::zero();
        for t in &self.terms {
            let mut v = S::from_f64(t.coef);
            for (leaf, pw) in &t.factors {
                let b = match leaf {
                    Leaf::Slot(i) => jet[*i],
                    Leaf::Sub(c) => c.eval(jet),
                };
                v = v * pw.apply(b);
            }
            if let Some(e) = &t.exp {
                v = v * e.eval(jet).exp();
            }
            acc = acc + v;
        }
        acc
    }
}

fn check(v: Var, layout: JetLayout) -> Result<(), DslError> {
    let (comp, axes): (Option<usize>, Vec<usize>) = match v {
        Var::Coord(k) => (None, vec![k]),
        Var::Field(a) => (Some(a), vec![]),
        Var::Grad(a, mu) => (Some(a), vec![mu]),
        Var::Hess(a, mu, nu) => (Some(a), vec![mu, nu]),
    };
    if let Some(a) = comp {
        if a >= layout.ncomp {
            return Err(DslError::AxisOutOfRange { index: a, dim: layout.ncomp });
        }
    }
    for mu in axes {
        if mu >= layout.dim {
            return Err(DslError::AxisOutOfRange { index: mu, dim: layout.dim });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dd;

    #[test]
    fn compiled_matches_tree_evaluation() {
        let layout = JetLayout::new(2, 1);
        let x = Poly::var(Var::Coord(0));
        let phi = Poly::var(Var::Field(0));
        let g = Poly::var(Var::Grad(0, 1));
        let p = x.scale(0.3).exp().mul(&phi.pow(3.into())).add(&g.mul(&g).scale(-0.5))
            .add(&phi.mul(&phi).add(&Poly::constant(1.0)).pow(Rational64::new(-1, 2)));
        let c = Compiled::new(&p, layout).unwrap();
        let mut jet = vec![0.0; layout.len()];
        jet[layout.coord(0)] = 0.7;
        jet[layout.field(0)] = 1.3;
        jet[layout.grad(0, 1)] = -0.4;
        let direct = p.eval(&|v: Var| jet[layout.slot(v)]).unwrap();
        assert!((c.eval(&jet) - direct).abs() < 1e-14);
        let dd: Vec<Dd> = jet.iter().map(|&v| Dd::new(v)).collect();
        assert!((c.eval(&dd).to_f64() - direct).abs() < 1e-14);
    }

    #[test]
    fn symbolic_parameters_do_not_compile() {
        let p = Poly::param("m").mul(&Poly::var(Var::Field(0)));
        assert!(matches!(Compiled::new(&p, JetLayout::new(1, 1)), Err(DslError::MissingValue(_))));
    }
}
