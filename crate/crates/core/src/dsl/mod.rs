//! Lagrangian expression language and the symbolic calculus built on it.

pub mod analysis;
pub mod ast;
pub mod compile;
pub mod lower;
pub mod parser;
pub mod poly;
pub mod spec;

use thiserror::Error;

pub use analysis::{
    check_k_condition, check_spacetime_independence, detect_homogeneity, evaluate,
    momentum_derivative, variational_derivative, Bindings,
};
pub use ast::{Expr, Index, Slot, Variance};
pub use parser::{parse_expr, parse_lagrangian};
pub use poly::{Poly, Var};
pub use spec::{FieldDecl, LagrangianSpec, Metric};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unbound parameter \"{name}\"")]
    UnboundParameter { name: String, line: usize, col: usize },
    #[error("{line}:{col}: dummy index \"{index}\" appears twice {variance}")]
    RepeatedIndex { index: String, variance: Variance, line: usize, col: usize },
    #[error("{line}:{col}: dummy index \"{index}\" appears {count} times")]
    OverusedIndex { index: String, count: usize, line: usize, col: usize },
    #[error("{line}:{col}: summands carry different free indices")]
    IndexMismatch { line: usize, col: usize },
    #[error("{line}:{col}: free index inside a power or exponential")]
    IndexUnderFunction { line: usize, col: usize },
    #[error("{line}:{col}: free index \"{index}\" left over; the Lagrangian must be a scalar")]
    FreeIndex { index: String, line: usize, col: usize },
    #[error("invalid spacetime dimension {0}")]
    Dimension(usize),
    #[error("unknown field \"{0}\"")]
    UnknownField(String),
    #[error("coordinate x{index} does not exist in dimension {dim}")]
    CoordinateOutOfRange { index: usize, dim: usize },
    #[error("index {index} is out of range for dimension {dim}")]
    AxisOutOfRange { index: usize, dim: usize },
    #[error("derivatives of order {0} are not supported")]
    HigherDerivative(usize),
    #[error("unbound symbol \"{0}\"")]
    UnboundSymbol(String),
    #[error("expression depends on field derivatives")]
    DependsOnDerivatives,
    #[error("parameter \"{0}\" has no value")]
    MissingValue(String),
}
