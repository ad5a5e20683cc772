use std::collections::BTreeSet;
use std::fmt;

use num_rational::Rational64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variance {
    Down,
    Up,
}

impl fmt::Display for Variance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variance::Down => "covariant",
            Variance::Up => "contravariant",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Named(String),
    Axis(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Index {
    pub slot: Slot,
    pub variance: Variance,
}

impl Index {
    pub fn down(name: &str) -> Self {
        Index { slot: Slot::Named(name.to_string()), variance: Variance::Down }
    }
    pub fn up(name: &str) -> Self {
        Index { slot: Slot::Named(name.to_string()), variance: Variance::Up }
    }
    pub fn axis(mu: usize, variance: Variance) -> Self {
        Index { slot: Slot::Axis(mu), variance }
    }
}

/// Surface syntax tree of a Lagrangian density.
///
/// Named indices are only legal inside `Partial`. Every named index that is
/// summed over is bound by exactly one enclosing `Contract`, whose body holds
/// it once `Down` and once `Up`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Param(String),
    Coord(usize),
    Field(String),
    Partial { field: String, indices: Vec<Index> },
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, Rational64),
    Exp(Box<Expr>),
    Contract { index: String, body: Box<Expr> },
}

impl Expr {
    pub fn num(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn field(name: &str) -> Expr {
        Expr::Field(name.to_string())
    }

    pub fn param(name: &str) -> Expr {
        Expr::Param(name.to_string())
    }

    pub fn partial(field: &str, indices: Vec<Index>) -> Expr {
        Expr::Partial { field: field.to_string(), indices }
    }

    pub fn powi(base: Expr, n: i64) -> Expr {
        Expr::Pow(Box::new(base), Rational64::from_integer(n))
    }

    /// Names of free indices with their variance.
    pub fn free_indices(&self) -> BTreeSet<(String, Variance)> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<(String, Variance)>) {
        match self {
            Expr::Partial { indices, .. } => {
                for ix in indices {
                    if let Slot::Named(n) = &ix.slot {
                        out.insert((n.clone(), ix.variance));
                    }
                }
            }
            Expr::Sum(ts) | Expr::Product(ts) => ts.iter().for_each(|t| t.collect_free(out)),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Exp(e) => e.collect_free(out),
            Expr::Contract { index, body } => {
                let mut inner = BTreeSet::new();
                body.collect_free(&mut inner);
                out.extend(inner.into_iter().filter(|(n, _)| n != index));
            }
            Expr::Const(_) | Expr::Param(_) | Expr::Coord(_) | Expr::Field(_) => {}
        }
    }

    pub fn contains_coord(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Coord(_)))
    }

    pub fn contains_partial(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Partial { .. }))
    }

    fn any(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Expr::Sum(ts) | Expr::Product(ts) => ts.iter().any(|t| t.any(pred)),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Exp(e) => e.any(pred),
            Expr::Contract { body, .. } => body.any(pred),
            _ => false,
        }
    }

    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Sum(ts) | Expr::Product(ts) => ts.iter().for_each(|t| t.visit(f)),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Exp(e) => e.visit(f),
            Expr::Contract { body, .. } => body.visit(f),
            _ => {}
        }
    }
}

// Printing. The output reparses to the same tree: parentheses are emitted
// exactly where the parser would otherwise build a different shape.

fn write_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
        write!(f, "(-{})", -c)
    } else {
        write!(f, "{}", c)
    }
}

fn write_exponent(f: &mut fmt::Formatter<'_>, r: Rational64) -> fmt::Result {
    if r.is_integer() && *r.numer() >= 0 {
        write!(f, "^{}", r.numer())
    } else if r.is_integer() {
        write!(f, "^({})", r.numer())
    } else {
        write!(f, "^({}/{})", r.numer(), r.denom())
    }
}

fn write_index(f: &mut fmt::Formatter<'_>, ix: &Index) -> fmt::Result {
    if ix.variance == Variance::Up {
        f.write_str("^")?;
    }
    match &ix.slot {
        Slot::Named(n) => f.write_str(n),
        Slot::Axis(a) => write!(f, "{}", a),
    }
}

/// Strips contraction wrappers, which print as their body.
fn peel(e: &Expr) -> &Expr {
    match e {
        Expr::Contract { body, .. } => peel(body),
        other => other,
    }
}

fn is_primary(e: &Expr) -> bool {
    match peel(e) {
        Expr::Const(c) => *c >= 0.0 && !c.is_sign_negative(),
        Expr::Param(_) | Expr::Coord(_) | Expr::Field(_) | Expr::Partial { .. } | Expr::Exp(_) => {
            true
        }
        _ => false,
    }
}

/// Factor position: inside a product, or as the operand of unary minus.
fn write_factor(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match peel(e) {
        Expr::Sum(_) | Expr::Product(_) => write!(f, "({})", e),
        _ => write!(f, "{}", e),
    }
}

/// Term position: a summand after a binary operator.
fn write_term(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match peel(e) {
        Expr::Sum(_) => write!(f, "({})", e),
        _ => write!(f, "{}", e),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write_number(f, *c),
            Expr::Param(p) => f.write_str(p),
            Expr::Coord(k) => write!(f, "x{}", k),
            Expr::Field(n) => f.write_str(n),
            Expr::Partial { field, indices } => {
                write!(f, "d({}", field)?;
                for ix in indices {
                    f.write_str(",")?;
                    write_index(f, ix)?;
                }
                f.write_str(")")
            }
            Expr::Sum(ts) => {
                for (i, t) in ts.iter().enumerate() {
                    match (i, peel(t)) {
                        (0, Expr::Neg(_)) => write!(f, "{}", t)?,
                        (0, _) => write_term(f, t)?,
                        (_, Expr::Neg(inner)) => {
                            f.write_str(" - ")?;
                            write_term(f, inner)?;
                        }
                        _ => {
                            f.write_str(" + ")?;
                            write_term(f, t)?;
                        }
                    }
                }
                Ok(())
            }
            Expr::Product(fs) => {
                for (i, x) in fs.iter().enumerate() {
                    match peel(x) {
                        Expr::Pow(b, r) if i > 0 && *r == Rational64::from_integer(-1) => {
                            f.write_str("/")?;
                            write_factor(f, b)?;
                        }
                        _ => {
                            if i > 0 {
                                f.write_str("*")?;
                            }
                            write_factor(f, x)?;
                        }
                    }
                }
                Ok(())
            }
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_factor(f, e)
            }
            Expr::Pow(b, r) => {
                if is_primary(b) {
                    write!(f, "{}", b)?;
                } else {
                    write!(f, "({})", b)?;
                }
                write_exponent(f, *r)
            }
            Expr::Exp(e) => write!(f, "exp({})", e),
            Expr::Contract { body, .. } => write!(f, "{}", body),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prints_negative_constants_in_parentheses() {
        let e = Expr::Sum(vec![Expr::num(-2.0), Expr::field("phi")]);
        assert_eq!(e.to_string(), "(-2) + phi");
    }

    #[test]
    fn prints_division_and_rational_powers() {
        let e = Expr::Product(vec![
            Expr::param("g4"),
            Expr::Pow(Box::new(Expr::num(24.0)), Rational64::from_integer(-1)),
            Expr::Pow(Box::new(Expr::field("phi")), Rational64::new(3, 2)),
        ]);
        assert_eq!(e.to_string(), "g4/24*phi^(3/2)");
    }

    #[test]
    fn contraction_leaves_no_free_index() {
        let body = Expr::Product(vec![
            Expr::partial("phi", vec![Index::down("mu")]),
            Expr::partial("phi", vec![Index::up("mu")]),
        ]);
        assert_eq!(body.free_indices().len(), 2);
        let c = Expr::Contract { index: "mu".into(), body: Box::new(body) };
        assert!(c.free_indices().is_empty());
        assert_eq!(c.to_string(), "d(phi,mu)*d(phi,^mu)");
    }
}
