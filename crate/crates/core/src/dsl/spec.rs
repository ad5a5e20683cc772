use std::collections::BTreeMap;
use std::fmt;

use super::ast::Expr;
use super::DslError;

/// Mostly-minus Minkowski metric, `diag(+1, -1, ..., -1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Metric {
    signature: Vec<i8>,
}

impl Metric {
    pub fn minkowski(dim: usize) -> Self {
        let mut signature = vec![-1; dim];
        if dim > 0 {
            signature[0] = 1;
        }
        Metric { signature }
    }

    pub fn dim(&self) -> usize {
        self.signature.len()
    }

    /// `η_{μμ}`, which equals `η^{μμ}` for a diagonal metric of ±1.
    pub fn eta(&self, mu: usize) -> f64 {
        f64::from(self.signature[mu])
    }

    pub fn signature(&self) -> &[i8] {
        &self.signature
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    /// Name of the conjugate component for a complex field.
    pub conjugate: Option<String>,
}

impl FieldDecl {
    pub fn real(name: &str) -> Self {
        FieldDecl { name: name.to_string(), conjugate: None }
    }

    pub fn complex(name: &str) -> Self {
        FieldDecl { name: name.to_string(), conjugate: Some(format!("{name}star")) }
    }

    pub fn is_complex(&self) -> bool {
        self.conjugate.is_some()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianSpec {
    pub expr: Expr,
    pub fields: Vec<FieldDecl>,
    /// `None` marks a parameter that is declared but not yet given a value.
    pub params: BTreeMap<String, Option<f64>>,
    pub dim: usize,
    pub metric: Metric,
}

impl LagrangianSpec {
    pub fn new(
        expr: Expr,
        fields: Vec<FieldDecl>,
        params: BTreeMap<String, Option<f64>>,
        dim: usize,
    ) -> Result<Self, DslError> {
        let spec = LagrangianSpec { expr, fields, params, dim, metric: Metric::minkowski(dim) };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), DslError> {
        if self.dim == 0 {
            return Err(DslError::Dimension(0));
        }
        let comps = self.components();
        let mut err = None;
        self.expr.visit(&mut |e| {
            if err.is_some() {
                return;
            }
            match e {
                Expr::Param(p) if !self.params.contains_key(p) => {
                    err = Some(DslError::UnboundParameter { name: p.clone(), line: 0, col: 0 });
                }
                Expr::Field(n) | Expr::Partial { field: n, .. } if !comps.contains(n) => {
                    err = Some(DslError::UnknownField(n.clone()));
                }
                Expr::Coord(k) if *k >= self.dim => {
                    err = Some(DslError::CoordinateOutOfRange { index: *k, dim: self.dim });
                }
                _ => {}
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        if let Some((name, _)) = self.expr.free_indices().into_iter().next() {
            return Err(DslError::FreeIndex { index: name, line: 0, col: 0 });
        }
        Ok(())
    }

    /// Independent field components in evaluation order; a complex field
    /// contributes itself followed by its conjugate.
    pub fn components(&self) -> Vec<String> {
        let mut out = Vec::new();
        for f in &self.fields {
            out.push(f.name.clone());
            if let Some(c) = &f.conjugate {
                out.push(c.clone());
            }
        }
        out
    }

    pub fn component_index(&self, name: &str) -> Option<usize> {
        self.components().iter().position(|c| c == name)
    }

    pub fn is_complex(&self) -> bool {
        self.fields.iter().any(FieldDecl::is_complex)
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), Some(value));
        self
    }

    pub fn with_dimension(mut self, dim: usize) -> Result<Self, DslError> {
        self.dim = dim;
        self.metric = Metric::minkowski(dim);
        self.validate()?;
        Ok(self)
    }

    pub fn unbound_params(&self) -> Vec<String> {
        self.params.iter().filter(|(_, v)| v.is_none()).map(|(k, _)| k.clone()).collect()
    }
}

/// Document form accepted by the parser: directives, then the density.
impl fmt::Display for LagrangianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dim {}", self.dim)?;
        for fd in &self.fields {
            if fd.is_complex() {
                writeln!(f, "field {} complex", fd.name)?;
            } else {
                writeln!(f, "field {}", fd.name)?;
            }
        }
        for (k, v) in &self.params {
            match v {
                Some(v) => writeln!(f, "param {k} = {v}")?,
                None => writeln!(f, "param {k}")?,
            }
        }
        write!(f, "L = {}", self.expr)
    }
}
