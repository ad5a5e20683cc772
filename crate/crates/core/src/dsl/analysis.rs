//! Variational calculus on a parsed Lagrangian.

use std::collections::HashMap;

use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ast::{Expr, Slot, Variance};
use super::lower::{lower, lower_lagrangian, Params};
use super::poly::{Poly, Var};
use super::spec::LagrangianSpec;
use super::DslError;

/// Relative tolerance for coefficient matching and homogeneity checks.
pub const SYMBOLIC_TOL: f64 = 1e-10;

fn component(spec: &LagrangianSpec, name: &str) -> Result<usize, DslError> {
    spec.component_index(name).ok_or_else(|| DslError::UnknownField(name.to_string()))
}

/// `∂L/∂φ_a` as a polynomial.
pub fn dl_dfield(spec: &LagrangianSpec, a: usize) -> Result<Poly, DslError> {
    Ok(lower_lagrangian(spec, Params::Bind)?.diff(Var::Field(a)))
}

/// `∂L/∂(∂_μφ_a)`, which carries an upper index μ.
pub fn dl_dgrad(spec: &LagrangianSpec, a: usize, mu: usize) -> Result<Poly, DslError> {
    Ok(lower_lagrangian(spec, Params::Bind)?.diff(Var::Grad(a, mu)))
}

/// `δL/δφ` for the named component, in canonical form.
pub fn variational_derivative(spec: &LagrangianSpec, field: &str) -> Result<Expr, DslError> {
    let a = component(spec, field)?;
    Ok(dl_dfield(spec, a)?.to_expr(&spec.components()))
}

/// `δL/δ∂_μφ` when `variance` is `Up` (the result is contravariant in μ),
/// `δL/δ∂^μφ` when it is `Down`.
pub fn momentum_derivative(
    spec: &LagrangianSpec,
    field: &str,
    mu: usize,
    variance: Variance,
) -> Result<Expr, DslError> {
    let a = component(spec, field)?;
    if mu >= spec.dim {
        return Err(DslError::AxisOutOfRange { index: mu, dim: spec.dim });
    }
    let mut p = dl_dgrad(spec, a, mu)?;
    if variance == Variance::Down {
        p = p.scale(spec.metric.eta(mu));
    }
    Ok(p.to_expr(&spec.components()))
}

/// True iff no coordinate appears in the density.
pub fn check_spacetime_independence(spec: &LagrangianSpec) -> bool {
    !spec.expr.contains_coord()
}

/// Degree `k` with `U(sφ) = s^k U(φ)` under joint scaling of `fields`.
///
/// Polynomials are decided symbolically. Anything else falls back to a
/// numerical test at `sample_count` seeded random points.
pub fn detect_homogeneity(
    spec: &LagrangianSpec,
    u: &Expr,
    fields: &[&str],
    sample_count: usize,
) -> Result<Option<Rational64>, DslError> {
    let idx = fields.iter().map(|f| component(spec, f)).collect::<Result<Vec<_>, _>>()?;
    let poly = lower(spec, u, Params::Bind)?;
    if poly.vars().iter().any(|v| matches!(v, Var::Grad(..) | Var::Hess(..))) {
        return Err(DslError::DependsOnDerivatives);
    }
    Ok(homogeneity_of(&poly, &idx, sample_count))
}

pub fn homogeneity_of(poly: &Poly, comps: &[usize], sample_count: usize) -> Option<Rational64> {
    let scaled = |v: &Var| matches!(v, Var::Field(a) if comps.contains(a));
    if poly.is_zero() || poly.vars().iter().any(|v| matches!(v, Var::Grad(..) | Var::Hess(..))) {
        return None;
    }
    if !poly.params().is_empty() {
        // Symbolic parameters only make sense on the exact path.
        return poly.homogeneous_degree(&scaled);
    }
    let polynomial = poly.terms().all(|(m, _)| {
        m.exp_arg().is_none_or(|a| !a.depends_on(&scaled))
            && m.factors().iter().all(|(a, _)| match a {
                super::poly::Atom::Pow(p) => !p.depends_on(&scaled),
                _ => true,
            })
    });
    if polynomial {
        return poly.homogeneous_degree(&scaled);
    }
    numeric_degree(poly, &scaled, sample_count.max(3))
}

fn numeric_degree(poly: &Poly, scaled: &dyn Fn(&Var) -> bool, samples: usize) -> Option<Rational64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_4a11);
    let mut estimate: Option<f64> = None;
    let mut points = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut vals: HashMap<Var, f64> = HashMap::new();
        for v in poly.vars() {
            vals.insert(v, rng.gen_range(0.3..1.7));
        }
        let at = |s: f64| {
            poly.eval(&|v: Var| {
                let x = vals.get(&v).copied().unwrap_or(0.0);
                if scaled(&v) {
                    s * x
                } else {
                    x
                }
            })
            .ok()
        };
        let u1 = at(1.0)?;
        let u2 = at(2.0)?;
        if u1 == 0.0 || !(u2 / u1).is_finite() || u2 / u1 <= 0.0 {
            return None;
        }
        let k = (u2 / u1).ln() / 2f64.ln();
        match estimate {
            None => estimate = Some(k),
            Some(k0) if (k - k0).abs() > 1e-6 * (1.0 + k0.abs()) => return None,
            _ => {}
        }
        points.push((u1, at(0.5)?, at(3.0)?));
    }
    let k = snap(estimate?)?;
    let kf = k.to_f64()?;
    let ok = points.iter().all(|&(u1, uh, u3)| {
        let e1 = (uh - 0.5f64.powf(kf) * u1).abs() <= SYMBOLIC_TOL * uh.abs().max(f64::MIN_POSITIVE);
        let e3 = (u3 - 3f64.powf(kf) * u1).abs() <= SYMBOLIC_TOL * u3.abs().max(f64::MIN_POSITIVE);
        e1 && e3
    });
    ok.then_some(k)
}

/// Nearest rational with a small denominator.
fn snap(k: f64) -> Option<Rational64> {
    (1..=12i64).find_map(|d| {
        let n = (k * d as f64).round();
        ((n / d as f64 - k).abs() < 1e-7).then(|| Rational64::new(n as i64, d))
    })
}

/// Constant ρ with `δL/δ∂^μφ_a = ρ ∂_μ(δL/δφ_a)` identically, if one exists.
///
/// Both sides are expanded to canonical form and matched coefficient by
/// coefficient; a ratio that differs between monomials means no constant ρ.
pub fn check_k_condition(spec: &LagrangianSpec) -> Option<f64> {
    let l = lower_lagrangian(spec, Params::Bind).ok()?;
    let ncomp = spec.components().len();
    let mut pairs = Vec::new();
    for a in 0..ncomp {
        let e = l.diff(Var::Field(a));
        for mu in 0..spec.dim {
            let lhs = l.diff(Var::Grad(a, mu)).scale(spec.metric.eta(mu));
            let rhs = e.total_derivative(mu, ncomp, spec.dim)?;
            pairs.push((lhs, rhs));
        }
    }
    let (m, b) = pairs
        .iter()
        .flat_map(|(_, r)| r.terms())
        .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))?;
    let a = pairs
        .iter()
        .find_map(|(l, r)| r.terms().any(|(mm, _)| mm == m).then(|| l.terms().find(|(mm, _)| *mm == m).map_or(0.0, |t| t.1)))
        .unwrap_or(0.0);
    let rho = a / b;
    if rho == 0.0 || !rho.is_finite() {
        return None;
    }
    let scale = pairs
        .iter()
        .map(|(l, r)| l.max_coefficient().max(rho.abs() * r.max_coefficient()))
        .fold(0.0, f64::max);
    let consistent = pairs.iter().all(|(l, r)| {
        let diff = l.sub(&r.scale(rho));
        let ok = diff.terms().all(|(_, c)| c.abs() <= SYMBOLIC_TOL * scale);
        ok
    });
    consistent.then_some(rho)
}

/// Values for direct evaluation of surface syntax.
///
/// Keys are parameter and field names, coordinates as `x0`, `x1`, ... and
/// derivatives as `d(phi,0)` or `d(phi,0,1)` with ascending covariant axes.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    pub dim: usize,
    pub values: HashMap<String, f64>,
}

impl Bindings {
    pub fn new(dim: usize) -> Self {
        Bindings { dim, values: HashMap::new() }
    }

    pub fn set(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.to_string(), v);
        self
    }

    fn get(&self, key: &str) -> Result<f64, DslError> {
        self.values.get(key).copied().ok_or_else(|| DslError::UnboundSymbol(key.to_string()))
    }
}

/// Direct double-precision evaluation of an expression tree. Contractions use
/// the mostly-minus metric of dimension `bindings.dim`.
pub fn evaluate(expr: &Expr, bindings: &Bindings) -> Result<f64, DslError> {
    let mut env = Vec::new();
    eval_in(expr, bindings, &mut env)
}

fn eval_in(e: &Expr, b: &Bindings, env: &mut Vec<(String, usize)>) -> Result<f64, DslError> {
    Ok(match e {
        Expr::Const(c) => *c,
        Expr::Param(n) | Expr::Field(n) => b.get(n)?,
        Expr::Coord(k) => b.get(&format!("x{k}"))?,
        Expr::Partial { field, indices } => {
            let mut axes = Vec::new();
            let mut sign = 1.0;
            for ix in indices {
                let mu = match &ix.slot {
                    Slot::Axis(m) => *m,
                    Slot::Named(n) => env
                        .iter()
                        .rev()
                        .find(|(name, _)| name == n)
                        .map(|(_, m)| *m)
                        .ok_or_else(|| DslError::UnboundSymbol(n.clone()))?,
                };
                if ix.variance == Variance::Up && mu > 0 {
                    sign = -sign;
                }
                axes.push(mu);
            }
            axes.sort_unstable();
            let key = format!(
                "d({field},{})",
                axes.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
            );
            sign * b.get(&key)?
        }
        Expr::Sum(ts) => {
            let mut s = 0.0;
            for t in ts {
                s += eval_in(t, b, env)?;
            }
            s
        }
        Expr::Product(fs) => {
            let mut p = 1.0;
            for f in fs {
                p *= eval_in(f, b, env)?;
            }
            p
        }
        Expr::Neg(x) => -eval_in(x, b, env)?,
        Expr::Pow(x, r) => {
            let base = eval_in(x, b, env)?;
            if r.is_integer() && r.numer().abs() < i64::from(i32::MAX) {
                base.powi(*r.numer() as i32)
            } else {
                base.powf(r.to_f64().unwrap_or(f64::NAN))
            }
        }
        Expr::Exp(x) => eval_in(x, b, env)?.exp(),
        Expr::Contract { index, body } => {
            let mut s = 0.0;
            for mu in 0..b.dim {
                env.push((index.clone(), mu));
                let v = eval_in(body, b, env);
                env.pop();
                s += v?;
            }
            s
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_lagrangian;

    fn kg() -> LagrangianSpec {
        parse_lagrangian("0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2").unwrap().with_param("m", 1.5)
    }

    #[test]
    fn klein_gordon_derivatives() {
        let s = kg();
        let e = variational_derivative(&s, "phi").unwrap();
        let b = Bindings::new(4).set("phi", 2.0);
        assert!((evaluate(&e, &b).unwrap() - (-2.25 * 2.0)).abs() < 1e-15);
        let p = momentum_derivative(&s, "phi", 1, Variance::Up).unwrap();
        let b = Bindings::new(4).set("d(phi,1)", 0.7);
        assert!((evaluate(&p, &b).unwrap() + 0.7).abs() < 1e-15);
        let p = momentum_derivative(&s, "phi", 1, Variance::Down).unwrap();
        assert!((evaluate(&p, &b).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn rho_for_klein_gordon_is_minus_inverse_mass_squared() {
        let rho = check_k_condition(&kg()).unwrap();
        assert!((rho + 1.0 / 2.25).abs() < 1e-15);
        let massless = parse_lagrangian("0.5*d(phi,mu)*d(phi,^mu)").unwrap();
        assert_eq!(check_k_condition(&massless), None);
    }

    #[test]
    fn phi4_is_not_k_compatible() {
        let s = parse_lagrangian("0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2 - g4/24*phi^4")
            .unwrap()
            .with_param("m", 1.0)
            .with_param("g4", 1.0);
        assert_eq!(check_k_condition(&s), None);
    }

    #[test]
    fn homogeneity_of_potentials() {
        let s = parse_lagrangian("field phi\nparam g4 = 1\nparam m = 1\nL = phi").unwrap();
        let u = crate::dsl::parse_expr("g4/24*phi^4").unwrap();
        let u = rename(u, "phi");
        assert_eq!(detect_homogeneity(&s, &u, &["phi"], 10).unwrap(), Some(4.into()));
        let u = rename(crate::dsl::parse_expr("0.5*m^2*phi^2 + g4/24*phi^4").unwrap(), "phi");
        assert_eq!(detect_homogeneity(&s, &u, &["phi"], 10).unwrap(), None);
        let u = rename(crate::dsl::parse_expr("(phi^2 + 1)^(-1)*phi^3").unwrap(), "phi");
        assert_eq!(detect_homogeneity(&s, &u, &["phi"], 10).unwrap(), None);
        let u = rename(crate::dsl::parse_expr("phi^6*(phi^2)^(-1/2)*(phi^4)^(-1/2)").unwrap(), "phi");
        assert_eq!(detect_homogeneity(&s, &u, &["phi"], 10).unwrap(), Some(3.into()));
    }

    #[test]
    fn derivatives_are_not_potentials() {
        let s = kg();
        let err = detect_homogeneity(&s, &s.expr, &["phi"], 5).unwrap_err();
        assert_eq!(err, DslError::DependsOnDerivatives);
    }

    fn rename(e: Expr, field: &str) -> Expr {
        match e {
            Expr::Param(n) if n == field => Expr::Field(n),
            Expr::Sum(v) => Expr::Sum(v.into_iter().map(|t| rename(t, field)).collect()),
            Expr::Product(v) => Expr::Product(v.into_iter().map(|t| rename(t, field)).collect()),
            Expr::Neg(b) => Expr::Neg(Box::new(rename(*b, field))),
            Expr::Pow(b, r) => Expr::Pow(Box::new(rename(*b, field)), r),
            Expr::Exp(b) => Expr::Exp(Box::new(rename(*b, field))),
            other => other,
        }
    }
}
