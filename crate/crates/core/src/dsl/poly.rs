//! Canonical sum-of-monomials form used for all symbolic work.
//!
//! A `Poly` is a map from monomials to nonzero coefficients. A monomial is a
//! sorted product of atoms raised to rational powers, times at most one
//! exponential whose argument has no constant term. Sums that cannot be
//! expanded (negative or fractional powers of a sum) become opaque `Pow`
//! atoms keyed by their canonical base, so equal subexpressions still merge.
//! Structural equality is therefore a sound zero test for everything the
//! parser can produce, and a complete one for polynomials in the variables.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Rational64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use ordered_float::OrderedFloat;

use crate::scalar::Scalar;

use super::ast::{Expr, Index, Variance};

/// Jet variable. `Grad(a, μ)` is `∂_μ φ_a`; `Hess(a, μ, ν)` has `μ <= ν`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Coord(usize),
    Field(usize),
    Grad(usize, usize),
    Hess(usize, usize, usize),
}

impl Var {
    pub fn hess(a: usize, mu: usize, nu: usize) -> Var {
        Var::Hess(a, mu.min(nu), mu.max(nu))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Atom {
    Var(Var),
    Param(String),
    /// A base that does not expand; its exponent lives in the monomial.
    Pow(Poly),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Monomial {
    factors: Vec<(Atom, Rational64)>,
    exp: Option<Box<Poly>>,
}

impl Monomial {
    fn one() -> Self {
        Monomial::default()
    }

    fn atom(a: Atom) -> Self {
        Monomial { factors: vec![(a, Rational64::one())], exp: None }
    }

    pub fn factors(&self) -> &[(Atom, Rational64)] {
        &self.factors
    }

    pub fn exp_arg(&self) -> Option<&Poly> {
        self.exp.as_deref()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut merged: BTreeMap<Atom, Rational64> = BTreeMap::new();
        for (a, e) in self.factors.iter().chain(&other.factors) {
            *merged.entry(a.clone()).or_insert_with(Rational64::zero) += *e;
        }
        let factors = merged.into_iter().filter(|(_, e)| !e.is_zero()).collect();
        let exp = match (&self.exp, &other.exp) {
            (None, None) => None,
            (Some(a), None) | (None, Some(a)) => Some(a.clone()),
            (Some(a), Some(b)) => {
                let s = a.add(b);
                (!s.is_zero()).then(|| Box::new(s))
            }
        };
        Monomial { factors, exp }
    }

    fn degree_in(&self, pred: &dyn Fn(&Var) -> bool) -> Option<Rational64> {
        if self.exp.as_ref().is_some_and(|p| p.depends_on(pred)) {
            return None;
        }
        let mut k = Rational64::zero();
        for (a, e) in &self.factors {
            match a {
                Atom::Var(v) if pred(v) => k += *e,
                Atom::Pow(p) if p.depends_on(pred) => return None,
                _ => {}
            }
        }
        Some(k)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Poly {
    terms: BTreeMap<Monomial, OrderedFloat<f64>>,
}

fn insert(terms: &mut BTreeMap<Monomial, OrderedFloat<f64>>, m: Monomial, c: f64) {
    if c == 0.0 {
        return;
    }
    let slot = terms.entry(m).or_insert(OrderedFloat(0.0));
    slot.0 += c;
}

fn prune(mut terms: BTreeMap<Monomial, OrderedFloat<f64>>) -> Poly {
    terms.retain(|_, c| c.0 != 0.0);
    Poly { terms }
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: f64) -> Poly {
        let mut terms = BTreeMap::new();
        insert(&mut terms, Monomial::one(), c);
        Poly { terms }
    }

    pub fn var(v: Var) -> Poly {
        Poly::from_atom(Atom::Var(v))
    }

    pub fn param(name: &str) -> Poly {
        Poly::from_atom(Atom::Param(name.to_string()))
    }

    fn from_atom(a: Atom) -> Poly {
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::atom(a), OrderedFloat(1.0));
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, c)| (m, c.0))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value if the polynomial has no variables, parameters or exponentials.
    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                (m.factors.is_empty() && m.exp.is_none()).then_some(c.0)
            }
            _ => None,
        }
    }

    pub fn constant_term(&self) -> f64 {
        self.terms.get(&Monomial::one()).map_or(0.0, |c| c.0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            insert(&mut terms, m.clone(), c.0);
        }
        prune(terms)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Poly {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> Poly {
        if s == 0.0 {
            return Poly::zero();
        }
        prune(self.terms.iter().map(|(m, c)| (m.clone(), OrderedFloat(c.0 * s))).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut terms = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                insert(&mut terms, ma.mul(mb), ca.0 * cb.0);
            }
        }
        prune(terms)
    }

    pub fn sum<'a>(items: impl IntoIterator<Item = &'a Poly>) -> Poly {
        let mut terms = BTreeMap::new();
        for p in items {
            for (m, c) in &p.terms {
                insert(&mut terms, m.clone(), c.0);
            }
        }
        prune(terms)
    }

    pub fn exp(&self) -> Poly {
        let c = self.constant_term();
        let rest = self.sub(&Poly::constant(c));
        let m = Monomial { factors: Vec::new(), exp: (!rest.is_zero()).then(|| Box::new(rest)) };
        let mut terms = BTreeMap::new();
        insert(&mut terms, m, c.exp());
        Poly { terms }
    }

    pub fn pow(&self, r: Rational64) -> Poly {
        if r.is_zero() {
            return Poly::constant(1.0);
        }
        if r.is_one() {
            return self.clone();
        }
        if let Some(c) = self.as_constant() {
            return Poly::constant(pow_f64(c, r));
        }
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            return single_term_pow(m, c.0, r);
        }
        if r.is_integer() && r.is_positive() && *r.numer() <= 32 {
            let mut n = *r.numer();
            let mut base = self.clone();
            let mut acc = Poly::constant(1.0);
            while n > 0 {
                if n & 1 == 1 {
                    acc = acc.mul(&base);
                }
                n >>= 1;
                if n > 0 {
                    base = base.mul(&base);
                }
            }
            return acc;
        }
        let mut terms = BTreeMap::new();
        terms.insert(
            Monomial { factors: vec![(Atom::Pow(self.clone()), r)], exp: None },
            OrderedFloat(1.0),
        );
        Poly { terms }
    }

    pub fn diff(&self, v: Var) -> Poly {
        let mut parts = Vec::new();
        for (m, c) in &self.terms {
            for (i, (atom, e)) in m.factors.iter().enumerate() {
                let inner = match atom {
                    Atom::Var(w) if *w == v => Poly::constant(1.0),
                    Atom::Pow(p) => p.diff(v),
                    _ => continue,
                };
                if inner.is_zero() {
                    continue;
                }
                let mut reduced = m.clone();
                let e1 = *e - Rational64::one();
                if e1.is_zero() {
                    reduced.factors.remove(i);
                } else {
                    reduced.factors[i].1 = e1;
                }
                let coef = c.0 * e.to_f64().unwrap_or(f64::NAN);
                let mut head = BTreeMap::new();
                insert(&mut head, reduced, coef);
                parts.push(prune(head).mul(&inner));
            }
            if let Some(arg) = &m.exp {
                let inner = arg.diff(v);
                if !inner.is_zero() {
                    let mut head = BTreeMap::new();
                    insert(&mut head, m.clone(), c.0);
                    parts.push(prune(head).mul(&inner));
                }
            }
        }
        Poly::sum(parts.iter())
    }

    /// Total derivative `D_μ` along a field configuration with `ncomp`
    /// components. Needs one more jet order than the input carries, so inputs
    /// containing second derivatives are rejected.
    pub fn total_derivative(&self, mu: usize, ncomp: usize, dim: usize) -> Option<Poly> {
        let vars = self.vars();
        if vars.iter().any(|v| matches!(v, Var::Hess(..))) {
            return None;
        }
        let mut parts = vec![self.diff(Var::Coord(mu))];
        for a in 0..ncomp {
            let d = self.diff(Var::Field(a));
            if !d.is_zero() {
                parts.push(d.mul(&Poly::var(Var::Grad(a, mu))));
            }
            for nu in 0..dim {
                let d = self.diff(Var::Grad(a, nu));
                if !d.is_zero() {
                    parts.push(d.mul(&Poly::var(Var::hess(a, mu, nu))));
                }
            }
        }
        Some(Poly::sum(parts.iter()))
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        for m in self.terms.keys() {
            for (a, _) in &m.factors {
                match a {
                    Atom::Var(v) => {
                        out.insert(*v);
                    }
                    Atom::Pow(p) => p.collect_vars(out),
                    Atom::Param(_) => {}
                }
            }
            if let Some(p) = &m.exp {
                p.collect_vars(out);
            }
        }
    }

    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_params(&mut out);
        out
    }

    fn collect_params(&self, out: &mut BTreeSet<String>) {
        for m in self.terms.keys() {
            for (a, _) in &m.factors {
                match a {
                    Atom::Param(p) => {
                        out.insert(p.clone());
                    }
                    Atom::Pow(p) => p.collect_params(out),
                    Atom::Var(_) => {}
                }
            }
            if let Some(p) = &m.exp {
                p.collect_params(out);
            }
        }
    }

    pub fn depends_on(&self, pred: &dyn Fn(&Var) -> bool) -> bool {
        self.vars().iter().any(pred)
    }

    /// Common degree of all monomials in the variables selected by `pred`.
    /// `None` if the degrees differ or a variable sits inside an exponential
    /// or an unexpanded power. The zero polynomial has no degree.
    pub fn homogeneous_degree(&self, pred: &dyn Fn(&Var) -> bool) -> Option<Rational64> {
        let mut k = None;
        for m in self.terms.keys() {
            let d = m.degree_in(pred)?;
            match k {
                None => k = Some(d),
                Some(k0) if k0 != d => return None,
                _ => {}
            }
        }
        k
    }

    /// Terms whose monomial satisfies `keep`.
    pub fn filter_terms(&self, keep: &dyn Fn(&Monomial) -> bool) -> Poly {
        Poly { terms: self.terms.iter().filter(|(m, _)| keep(m)).map(|(m, c)| (m.clone(), *c)).collect() }
    }

    /// Replaces parameters by values where `value` knows them.
    pub fn bind_params(&self, value: &dyn Fn(&str) -> Option<f64>) -> Poly {
        let mut parts = Vec::with_capacity(self.terms.len());
        for (m, c) in &self.terms {
            let mut p = Poly::constant(c.0);
            for (a, e) in &m.factors {
                let f = match a {
                    Atom::Param(name) => match value(name) {
                        Some(v) => Poly::constant(v),
                        None => Poly::param(name),
                    },
                    Atom::Var(v) => Poly::var(*v),
                    Atom::Pow(b) => b.bind_params(value),
                };
                p = p.mul(&f.pow(*e));
            }
            if let Some(arg) = &m.exp {
                p = p.mul(&arg.bind_params(value).exp());
            }
            parts.push(p);
        }
        Poly::sum(parts.iter())
    }

    /// Replaces variables by polynomials where `value` gives one.
    pub fn substitute(&self, value: &dyn Fn(&Var) -> Option<Poly>) -> Poly {
        let mut parts = Vec::with_capacity(self.terms.len());
        for (m, c) in &self.terms {
            let mut p = Poly::constant(c.0);
            for (a, e) in &m.factors {
                let f = match a {
                    Atom::Var(v) => value(v).unwrap_or_else(|| Poly::var(*v)),
                    Atom::Param(name) => Poly::param(name),
                    Atom::Pow(b) => b.substitute(value),
                };
                p = p.mul(&f.pow(*e));
            }
            if let Some(arg) = &m.exp {
                p = p.mul(&arg.substitute(value).exp());
            }
            parts.push(p);
        }
        Poly::sum(parts.iter())
    }

    /// Evaluates with variables from `var`; fails on an unbound parameter.
    pub fn eval<S: Scalar>(&self, var: &dyn Fn(Var) -> S) -> Result<S, String> {
        let mut acc = S::zero();
        for (m, c) in &self.terms {
            let mut t = S::from_f64(c.0);
            for (a, e) in &m.factors {
                let base = match a {
                    Atom::Var(v) => var(*v),
                    Atom::Param(p) => return Err(p.clone()),
                    Atom::Pow(p) => p.eval(var)?,
                };
                t = t * pow_scalar(base, *e);
            }
            if let Some(arg) = &m.exp {
                t = t * arg.eval(var)?.exp();
            }
            acc = acc + t;
        }
        Ok(acc)
    }

    /// Largest coefficient magnitude, used to scale zero tests.
    pub fn max_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.0.abs()).fold(0.0, f64::max)
    }

    /// Back to surface syntax, with `names` naming the field components.
    pub fn to_expr(&self, names: &[String]) -> Expr {
        let mut terms: Vec<Expr> = Vec::new();
        for (m, c) in &self.terms {
            let mut factors = Vec::new();
            let neg = c.0 < 0.0;
            let mag = c.0.abs();
            if mag != 1.0 || (m.factors.is_empty() && m.exp.is_none()) {
                factors.push(Expr::Const(mag));
            }
            for (a, e) in &m.factors {
                let base = atom_expr(a, names);
                factors.push(if e.is_one() { base } else { Expr::Pow(Box::new(base), *e) });
            }
            if let Some(arg) = &m.exp {
                factors.push(Expr::Exp(Box::new(arg.to_expr(names))));
            }
            let body = if factors.len() == 1 { factors.pop().unwrap() } else { Expr::Product(factors) };
            terms.push(if neg { Expr::Neg(Box::new(body)) } else { body });
        }
        match terms.len() {
            0 => Expr::Const(0.0),
            1 => {
                let t = terms.pop().unwrap();
                match t {
                    Expr::Neg(inner) => match *inner {
                        Expr::Const(c) => Expr::Const(-c),
                        other => Expr::Neg(Box::new(other)),
                    },
                    other => other,
                }
            }
            _ => Expr::Sum(terms),
        }
    }
}

fn atom_expr(a: &Atom, names: &[String]) -> Expr {
    let name = |i: usize| names.get(i).cloned().unwrap_or_else(|| format!("f{i}"));
    match a {
        Atom::Param(p) => Expr::Param(p.clone()),
        Atom::Var(Var::Coord(k)) => Expr::Coord(*k),
        Atom::Var(Var::Field(i)) => Expr::Field(name(*i)),
        Atom::Var(Var::Grad(i, mu)) => {
            Expr::Partial { field: name(*i), indices: vec![Index::axis(*mu, Variance::Down)] }
        }
        Atom::Var(Var::Hess(i, mu, nu)) => Expr::Partial {
            field: name(*i),
            indices: vec![Index::axis(*mu, Variance::Down), Index::axis(*nu, Variance::Down)],
        },
        Atom::Pow(p) => p.to_expr(names),
    }
}

fn pow_f64(c: f64, r: Rational64) -> f64 {
    if r.is_integer() {
        if let Some(n) = r.numer().to_i32() {
            return c.powi(n);
        }
    }
    c.powf(r.to_f64().unwrap_or(f64::NAN))
}

pub(crate) fn pow_scalar<S: Scalar>(b: S, r: Rational64) -> S {
    if r.is_integer() {
        if let Some(n) = r.numer().to_i32() {
            return b.powi(n);
        }
    }
    b.powf(r.to_f64().unwrap_or(f64::NAN))
}

fn single_term_pow(m: &Monomial, c: f64, r: Rational64) -> Poly {
    // (c·m)^r = c^r·m^r holds for integer r. For fractional r it needs c > 0
    // and a monomial part whose exponents scale without changing branch,
    // which we only trust for a lone atom to the first power.
    let integer = r.is_integer();
    let lone = m.factors.len() == 1 && m.factors[0].1.is_one();
    let exp = m.exp.as_ref().map(|a| Box::new(a.scale(r.to_f64().unwrap_or(f64::NAN))));
    if integer || (c > 0.0 && (m.factors.is_empty() || lone)) {
        let factors = m.factors.iter().map(|(a, e)| (a.clone(), *e * r)).collect();
        let mut terms = BTreeMap::new();
        insert(&mut terms, Monomial { factors, exp }, pow_f64(c, r));
        return Poly { terms };
    }
    // Keep the exponential apart: e^{r·arg} is always exact.
    let mut stripped = m.clone();
    stripped.exp = None;
    let mut base_terms = BTreeMap::new();
    insert(&mut base_terms, stripped, c);
    let base = Poly { terms: base_terms };
    let mut terms = BTreeMap::new();
    terms.insert(
        Monomial { factors: vec![(Atom::Pow(base), r)], exp },
        OrderedFloat(1.0),
    );
    Poly { terms }
}
