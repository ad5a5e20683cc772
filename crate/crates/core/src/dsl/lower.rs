//! Surface syntax to canonical polynomial: contractions are expanded over the
//! `D` axes and contravariant derivatives are lowered with the metric.

use super::ast::{Expr, Slot, Variance};
use super::poly::{Poly, Var};
use super::spec::LagrangianSpec;
use super::DslError;

/// Whether parameters with values are substituted or kept symbolic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Params {
    Bind,
    Symbolic,
}

pub fn lower(spec: &LagrangianSpec, expr: &Expr, params: Params) -> Result<Poly, DslError> {
    let comps = spec.components();
    let mut env = Vec::new();
    lower_in(spec, &comps, expr, params, &mut env)
}

pub fn lower_lagrangian(spec: &LagrangianSpec, params: Params) -> Result<Poly, DslError> {
    lower(spec, &spec.expr, params)
}

fn lower_in(
    spec: &LagrangianSpec,
    comps: &[String],
    e: &Expr,
    params: Params,
    env: &mut Vec<(String, usize)>,
) -> Result<Poly, DslError> {
    Ok(match e {
        Expr::Const(c) => Poly::constant(*c),
        Expr::Param(p) => match (params, spec.params.get(p)) {
            (Params::Bind, Some(Some(v))) => Poly::constant(*v),
            (_, Some(_)) => Poly::param(p),
            // Auxiliary expressions are parsed without the field list, so a
            // bare field name arrives here.
            (_, None) if comps.contains(p) => Poly::var(Var::Field(component(comps, p)?)),
            (_, None) => {
                return Err(DslError::UnboundParameter { name: p.clone(), line: 0, col: 0 })
            }
        },
        Expr::Coord(k) => {
            if *k >= spec.dim {
                return Err(DslError::CoordinateOutOfRange { index: *k, dim: spec.dim });
            }
            Poly::var(Var::Coord(*k))
        }
        Expr::Field(n) => Poly::var(Var::Field(component(comps, n)?)),
        Expr::Partial { field, indices } => {
            let a = component(comps, field)?;
            let mut axes = Vec::with_capacity(indices.len());
            let mut sign = 1.0;
            for ix in indices {
                let mu = match &ix.slot {
                    Slot::Axis(m) => *m,
                    Slot::Named(n) => env
                        .iter()
                        .rev()
                        .find(|(name, _)| name == n)
                        .map(|(_, m)| *m)
                        .ok_or_else(|| DslError::FreeIndex { index: n.clone(), line: 0, col: 0 })?,
                };
                if mu >= spec.dim {
                    return Err(DslError::AxisOutOfRange { index: mu, dim: spec.dim });
                }
                if ix.variance == Variance::Up {
                    sign *= spec.metric.eta(mu);
                }
                axes.push(mu);
            }
            let v = match axes[..] {
                [mu] => Var::Grad(a, mu),
                [mu, nu] => Var::hess(a, mu, nu),
                _ => return Err(DslError::HigherDerivative(axes.len())),
            };
            Poly::var(v).scale(sign)
        }
        Expr::Sum(ts) => {
            let parts =
                ts.iter().map(|t| lower_in(spec, comps, t, params, env)).collect::<Result<Vec<_>, _>>()?;
            Poly::sum(parts.iter())
        }
        Expr::Product(fs) => {
            let mut acc = Poly::constant(1.0);
            for f in fs {
                acc = acc.mul(&lower_in(spec, comps, f, params, env)?);
            }
            acc
        }
        Expr::Neg(x) => lower_in(spec, comps, x, params, env)?.neg(),
        Expr::Pow(b, r) => lower_in(spec, comps, b, params, env)?.pow(*r),
        Expr::Exp(x) => lower_in(spec, comps, x, params, env)?.exp(),
        Expr::Contract { index, body } => {
            let mut parts = Vec::with_capacity(spec.dim);
            for mu in 0..spec.dim {
                env.push((index.clone(), mu));
                let p = lower_in(spec, comps, body, params, env);
                env.pop();
                parts.push(p?);
            }
            Poly::sum(parts.iter())
        }
    })
}

fn component(comps: &[String], name: &str) -> Result<usize, DslError> {
    comps.iter().position(|c| c == name).ok_or_else(|| DslError::UnknownField(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_lagrangian;

    #[test]
    fn kinetic_term_expands_with_metric_signs() {
        let s = parse_lagrangian("dim 3\n0.5*d(phi,mu)*d(phi,^mu)").unwrap();
        let p = lower_lagrangian(&s, Params::Bind).unwrap();
        let g = |mu| Poly::var(Var::Grad(0, mu));
        let expect = g(0).mul(&g(0)).scale(0.5).sub(&g(1).mul(&g(1)).scale(0.5)).sub(&g(2).mul(&g(2)).scale(0.5));
        assert_eq!(p, expect);
    }

    #[test]
    fn parameters_bind_only_when_valued() {
        let s = parse_lagrangian("-0.5*m^2*phi^2 + 0*d(phi,mu)*d(phi,^mu)").unwrap();
        let sym = lower_lagrangian(&s, Params::Bind).unwrap();
        assert!(sym.params().contains("m"));
        let s = s.with_param("m", 2.0);
        let num = lower_lagrangian(&s, Params::Bind).unwrap();
        assert!(num.params().is_empty());
        let sym = lower_lagrangian(&s, Params::Symbolic).unwrap();
        assert!(sym.params().contains("m"));
    }
}
