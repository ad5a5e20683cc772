//! Recursive-descent parser for Lagrangian documents.
//!
//! ```text
//! document  := line*          (directives and the density, '#' starts a comment)
//! directive := 'dim' int | 'field' ident ['complex'] | 'param' ident ['=' number]
//! density   := ['L' '='] expr
//! expr      := term (('+' | '-') term)*
//! term      := unary (('*' | '/') unary)*
//! unary     := '-' unary | power
//! power     := atom ['^' exponent]
//! exponent  := int | '-' int | '(' ['-'] int ['/' int] ')'
//! atom      := number | ident | 'd(' ident (',' index)+ ')' | 'exp(' expr ')' | '(' expr ')'
//! index     := ['^'] (ident | int)
//! ```
//!
//! Identifiers `x0`, `x1`, ... are coordinates. Without `field` directives the
//! fields are the names differentiated by `d(...)`, and `name` together with
//! `namestar` form a complex pair. Without `param` directives every other name
//! is a parameter with no value.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::Rational64;

use super::ast::{Expr, Index, Slot, Variance};
use super::spec::{FieldDecl, LagrangianSpec};
use super::DslError;

pub const DEFAULT_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Eq,
    End,
}

fn syntax(pos: Pos, msg: impl Into<String>) -> DslError {
    DslError::Syntax { line: pos.line, col: pos.col, msg: msg.into() }
}

fn lex(src: &str, first_line: usize) -> Result<Vec<(Tok, Pos)>, DslError> {
    let mut out = Vec::new();
    for (li, line) in src.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = Pos { line: first_line + li, col: i + 1 };
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let single = match c {
                '(' => Some(Tok::LParen),
                ')' => Some(Tok::RParen),
                ',' => Some(Tok::Comma),
                '+' => Some(Tok::Plus),
                '-' => Some(Tok::Minus),
                '*' => Some(Tok::Star),
                '/' => Some(Tok::Slash),
                '^' => Some(Tok::Caret),
                '=' => Some(Tok::Eq),
                _ => None,
            };
            if let Some(t) = single {
                out.push((t, pos));
                i += 1;
            } else if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v: f64 =
                    text.parse().map_err(|_| syntax(pos, format!("malformed number \"{text}\"")))?;
                out.push((Tok::Num(v, text), pos));
            } else if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
            } else {
                return Err(syntax(pos, format!("unexpected character '{c}'")));
            }
        }
    }
    // Just past the last character, so a truncated density points at its end.
    let last = src.lines().last().map_or(0, |l| l.chars().count());
    let end = Pos { line: first_line + src.lines().count().max(1) - 1, col: last + 1 };
    out.push((Tok::End, end));
    Ok(out)
}

fn coordinate_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    /// First occurrence of every bare name, parsed provisionally as `Param`.
    names: BTreeMap<String, Pos>,
    differentiated: BTreeMap<String, Pos>,
    coords: Vec<(usize, Pos)>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Pos, DslError> {
        let (t, p) = self.bump();
        if t == want {
            Ok(p)
        } else {
            Err(syntax(p, format!("expected {what}, found {}", describe(&t))))
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let start = self.pos();
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    terms.push(Expr::Neg(Box::new(self.term()?)));
                }
                _ => break,
            }
        }
        if terms.len() == 1 {
            return Ok(terms.pop().unwrap());
        }
        let first = terms[0].free_indices();
        if terms.iter().any(|t| t.free_indices() != first) {
            return Err(DslError::IndexMismatch { line: start.line, col: start.col });
        }
        Ok(Expr::Sum(terms))
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let start = self.pos();
        let mut factors = vec![self.unary()?];
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    factors.push(self.unary()?);
                }
                Tok::Slash => {
                    self.bump();
                    let d = self.unary()?;
                    factors.push(Expr::Pow(Box::new(d), Rational64::from_integer(-1)));
                }
                _ => break,
            }
        }
        if factors.len() == 1 {
            return Ok(factors.pop().unwrap());
        }
        let slots: Vec<Vec<(String, Variance)>> =
            factors.iter().map(|f| f.free_indices().into_iter().collect()).collect();
        contract(Expr::Product(factors), slots.concat(), start)
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, DslError> {
        let start = self.pos();
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let r = self.exponent()?;
        if !base.free_indices().is_empty() {
            return Err(DslError::IndexUnderFunction { line: start.line, col: start.col });
        }
        Ok(Expr::Pow(Box::new(base), r))
    }

    fn integer(&mut self) -> Result<i64, DslError> {
        let (t, p) = self.bump();
        match t {
            Tok::Num(v, text) if !text.contains(['.', 'e', 'E']) && v.abs() < 1e15 => Ok(v as i64),
            other => Err(syntax(p, format!("expected an integer, found {}", describe(&other)))),
        }
    }

    fn exponent(&mut self) -> Result<Rational64, DslError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(Rational64::from_integer(-self.integer()?))
            }
            Tok::LParen => {
                self.bump();
                let neg = if *self.peek() == Tok::Minus {
                    self.bump();
                    true
                } else {
                    false
                };
                let n = self.integer()?;
                let d = if *self.peek() == Tok::Slash {
                    self.bump();
                    let p = self.pos();
                    let d = self.integer()?;
                    if d == 0 {
                        return Err(syntax(p, "zero denominator in exponent"));
                    }
                    d
                } else {
                    1
                };
                self.expect(Tok::RParen, "')'")?;
                Ok(Rational64::new(if neg { -n } else { n }, d))
            }
            _ => Ok(Rational64::from_integer(self.integer()?)),
        }
    }

    fn atom(&mut self) -> Result<Expr, DslError> {
        let (t, p) = self.bump();
        match t {
            Tok::Num(v, _) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "d" && *self.peek() == Tok::LParen => {
                self.bump();
                self.partial(p)
            }
            Tok::Ident(name) if name == "exp" && *self.peek() == Tok::LParen => {
                self.bump();
                let inner_pos = self.pos();
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                if !e.free_indices().is_empty() {
                    return Err(DslError::IndexUnderFunction {
                        line: inner_pos.line,
                        col: inner_pos.col,
                    });
                }
                Ok(Expr::Exp(Box::new(e)))
            }
            Tok::Ident(name) => {
                if let Some(k) = coordinate_index(&name) {
                    self.coords.push((k, p));
                    return Ok(Expr::Coord(k));
                }
                self.names.entry(name.clone()).or_insert(p);
                Ok(Expr::Param(name))
            }
            other => Err(syntax(p, format!("expected an operand, found {}", describe(&other)))),
        }
    }

    fn partial(&mut self, start: Pos) -> Result<Expr, DslError> {
        let (t, p) = self.bump();
        let field = match t {
            Tok::Ident(n) if coordinate_index(&n).is_none() => n,
            other => return Err(syntax(p, format!("expected a field name, found {}", describe(&other)))),
        };
        self.differentiated.entry(field.clone()).or_insert(p);
        let mut indices = Vec::new();
        while *self.peek() == Tok::Comma {
            self.bump();
            let variance = if *self.peek() == Tok::Caret {
                self.bump();
                Variance::Up
            } else {
                Variance::Down
            };
            let (t, p) = self.bump();
            let slot = match t {
                Tok::Ident(n) => Slot::Named(n),
                Tok::Num(v, text) if !text.contains(['.', 'e', 'E']) => Slot::Axis(v as usize),
                other => return Err(syntax(p, format!("expected an index, found {}", describe(&other)))),
            };
            indices.push(Index { slot, variance });
        }
        if indices.is_empty() {
            return Err(syntax(self.pos(), "d(...) needs at least one index"));
        }
        self.expect(Tok::RParen, "')'")?;
        let slots: Vec<(String, Variance)> = indices
            .iter()
            .filter_map(|ix| match &ix.slot {
                Slot::Named(n) => Some((n.clone(), ix.variance)),
                Slot::Axis(_) => None,
            })
            .collect();
        contract(Expr::Partial { field, indices }, slots, start)
    }
}

/// Wraps `body` in one `Contract` per index name that occurs exactly twice
/// with opposite variance among `slots`.
fn contract(body: Expr, slots: Vec<(String, Variance)>, at: Pos) -> Result<Expr, DslError> {
    let mut seen: BTreeMap<String, Vec<Variance>> = BTreeMap::new();
    for (n, v) in slots {
        seen.entry(n).or_default().push(v);
    }
    let mut dummies = Vec::new();
    for (name, vs) in seen {
        match vs.len() {
            1 => {}
            2 if vs[0] != vs[1] => dummies.push(name),
            2 => {
                return Err(DslError::RepeatedIndex {
                    index: name,
                    variance: vs[0],
                    line: at.line,
                    col: at.col,
                })
            }
            n => {
                return Err(DslError::OverusedIndex {
                    index: name,
                    count: n,
                    line: at.line,
                    col: at.col,
                })
            }
        }
    }
    let mut e = body;
    for name in dummies.into_iter().rev() {
        e = Expr::Contract { index: name, body: Box::new(e) };
    }
    Ok(e)
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(_, s) => format!("number {s}"),
        Tok::Ident(s) => format!("\"{s}\""),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Comma => "','".into(),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Star => "'*'".into(),
        Tok::Slash => "'/'".into(),
        Tok::Caret => "'^'".into(),
        Tok::Eq => "'='".into(),
        Tok::End => "end of input".into(),
    }
}

/// Parses a bare expression. Every name is provisionally a `Param`.
pub fn parse_expr(text: &str) -> Result<Expr, DslError> {
    let mut p = parser_for(text, 1)?;
    let e = p.expr()?;
    finish(&mut p)?;
    Ok(e)
}

fn parser_for(text: &str, first_line: usize) -> Result<Parser, DslError> {
    Ok(Parser {
        toks: lex(text, first_line)?,
        at: 0,
        names: BTreeMap::new(),
        differentiated: BTreeMap::new(),
        coords: Vec::new(),
    })
}

fn finish(p: &mut Parser) -> Result<(), DslError> {
    let (t, pos) = p.bump();
    if t != Tok::End {
        return Err(syntax(pos, format!("unexpected {}", describe(&t))));
    }
    Ok(())
}

fn rename_fields(e: Expr, fields: &BTreeSet<String>) -> Expr {
    match e {
        Expr::Param(n) if fields.contains(&n) => Expr::Field(n),
        Expr::Sum(ts) => Expr::Sum(ts.into_iter().map(|t| rename_fields(t, fields)).collect()),
        Expr::Product(ts) => {
            Expr::Product(ts.into_iter().map(|t| rename_fields(t, fields)).collect())
        }
        Expr::Neg(b) => Expr::Neg(Box::new(rename_fields(*b, fields))),
        Expr::Pow(b, r) => Expr::Pow(Box::new(rename_fields(*b, fields)), r),
        Expr::Exp(b) => Expr::Exp(Box::new(rename_fields(*b, fields))),
        Expr::Contract { index, body } => {
            Expr::Contract { index, body: Box::new(rename_fields(*body, fields)) }
        }
        other => other,
    }
}

struct Directives {
    dim: Option<usize>,
    fields: Vec<FieldDecl>,
    params: BTreeMap<String, Option<f64>>,
    declared_params: bool,
}

fn parse_directive(line: &str, lineno: usize, d: &mut Directives) -> Result<bool, DslError> {
    let body = line.split('#').next().unwrap_or("");
    let words: Vec<&str> = body.split_whitespace().collect();
    let Some(&head) = words.first() else { return Ok(false) };
    let col = line.find(head).map_or(1, |c| c + 1);
    let pos = Pos { line: lineno, col };
    match head {
        "dim" => {
            let [_, n] = words[..] else { return Err(syntax(pos, "usage: dim <integer>")) };
            let n: usize = n.parse().map_err(|_| syntax(pos, "dimension must be an integer"))?;
            if n == 0 {
                return Err(DslError::Dimension(0));
            }
            d.dim = Some(n);
        }
        "field" => {
            let decl = match words[..] {
                [_, name] => FieldDecl::real(name),
                [_, name, "complex"] => FieldDecl::complex(name),
                [_, name, "real"] => FieldDecl::real(name),
                _ => return Err(syntax(pos, "usage: field <name> [complex]")),
            };
            if !is_ident(&decl.name) || coordinate_index(&decl.name).is_some() {
                return Err(syntax(pos, format!("\"{}\" is not a valid field name", decl.name)));
            }
            d.fields.push(decl);
        }
        "param" => {
            let rest = body.trim_start().trim_start_matches("param").trim();
            let (name, value) = match rest.split_once('=') {
                Some((n, v)) => {
                    let v: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| syntax(pos, format!("malformed value \"{}\"", v.trim())))?;
                    (n.trim(), Some(v))
                }
                None => (rest, None),
            };
            if !is_ident(name) || coordinate_index(name).is_some() {
                return Err(syntax(pos, format!("\"{name}\" is not a valid parameter name")));
            }
            d.params.insert(name.to_string(), value);
            d.declared_params = true;
        }
        _ => return Ok(false),
    }
    Ok(true)
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_alphabetic() || c == '_')
        && cs.all(|c| c.is_alphanumeric() || c == '_')
}

/// Parses a Lagrangian document into a validated spec.
pub fn parse_lagrangian(text: &str) -> Result<LagrangianSpec, DslError> {
    let mut d = Directives {
        dim: None,
        fields: Vec::new(),
        params: BTreeMap::new(),
        declared_params: false,
    };
    // Directive lines are blanked so the density keeps its original positions.
    let mut density = String::new();
    for (i, line) in text.lines().enumerate() {
        if !parse_directive(line, i + 1, &mut d)? {
            density.push_str(line);
        }
        density.push('\n');
    }

    let mut p = parser_for(&density, 1)?;
    if matches!(p.toks.first(), Some((Tok::Ident(n), _)) if n == "L")
        && matches!(p.toks.get(1), Some((Tok::Eq, _)))
    {
        p.at = 2;
    }
    if *p.peek() == Tok::End {
        return Err(syntax(p.pos(), "empty Lagrangian"));
    }
    let expr = p.expr()?;
    finish(&mut p)?;
    if let Some((name, _)) = expr.free_indices().into_iter().next() {
        return Err(DslError::FreeIndex { index: name, line: 1, col: 1 });
    }

    let dim = d.dim.unwrap_or(DEFAULT_DIM);
    if let Some(&(k, pos)) = p.coords.iter().find(|(k, _)| *k >= dim) {
        return Err(DslError::Syntax {
            line: pos.line,
            col: pos.col,
            msg: format!("coordinate x{k} does not exist in dimension {dim}"),
        });
    }

    let fields = if d.fields.is_empty() {
        infer_fields(&p.differentiated, &p.names)
    } else {
        d.fields
    };
    let mut field_names = BTreeSet::new();
    for f in &fields {
        field_names.insert(f.name.clone());
        if let Some(c) = &f.conjugate {
            field_names.insert(c.clone());
        }
    }
    if let Some((n, pos)) = p.differentiated.iter().find(|(n, _)| !field_names.contains(*n)) {
        return Err(DslError::Syntax {
            line: pos.line,
            col: pos.col,
            msg: format!("\"{n}\" is differentiated but not declared as a field"),
        });
    }

    let mut params = d.params;
    for (name, pos) in &p.names {
        if field_names.contains(name) || params.contains_key(name) {
            continue;
        }
        if d.declared_params {
            return Err(DslError::UnboundParameter {
                name: name.clone(),
                line: pos.line,
                col: pos.col,
            });
        }
        params.insert(name.clone(), None);
    }

    let expr = rename_fields(expr, &field_names);
    LagrangianSpec::new(expr, fields, params, dim)
}

fn infer_fields(
    differentiated: &BTreeMap<String, Pos>,
    names: &BTreeMap<String, Pos>,
) -> Vec<FieldDecl> {
    let mut order: Vec<(&String, Pos)> = differentiated.iter().map(|(n, p)| (n, *p)).collect();
    order.sort_by_key(|(_, p)| (p.line, p.col));
    let known = |n: &str| differentiated.contains_key(n) || names.contains_key(n);
    let mut taken: HashMap<String, ()> = HashMap::new();
    let mut out = Vec::new();
    for (name, _) in order {
        if taken.contains_key(name.as_str()) {
            continue;
        }
        let stem = name.strip_suffix("star").filter(|s| !s.is_empty() && known(s));
        let decl = if let Some(stem) = stem {
            FieldDecl::complex(stem)
        } else if known(&format!("{name}star")) {
            FieldDecl::complex(name)
        } else {
            FieldDecl::real(name)
        };
        taken.insert(decl.name.clone(), ());
        if let Some(c) = &decl.conjugate {
            taken.insert(c.clone(), ());
        }
        out.push(decl);
    }
    out
}
