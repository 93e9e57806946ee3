//! Expression grammar and the JSON system format.
//!
//! Expressions use identifiers with derivative suffixes (`u1''` or `u1^(2)`),
//! integer and rational literals (`3`, `1/2`), `+ - * ^`, unary minus and
//! parentheses. Precedence is `^` over unary `-` over `*` over binary `+ -`.
//! Implicit multiplication is rejected.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::coeff::{fmt_rational, Coeff, UniPoly};
use crate::diffpoly::{DiffPoly, JetVar, Monomial, VarId};
use crate::error::{Error, ParseError, Result};
use crate::sysmodel::{assemble, DaeSystem, Field};

/// Symbol table used while parsing.
pub trait Resolver {
    fn resolve(&self, name: &str) -> Option<VarId>;
}

impl<F: Fn(&str) -> Option<VarId>> Resolver for F {
    fn resolve(&self, name: &str) -> Option<VarId> {
        self(name)
    }
}

impl Resolver for Vec<String> {
    fn resolve(&self, name: &str) -> Option<VarId> {
        self.iter().position(|n| n == name).map(|i| VarId(i as u32))
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a dyn Resolver,
    field: Field,
}

type PResult<T> = std::result::Result<T, ParseError>;

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic()
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn err<T>(&self, pos: usize, msg: impl Into<String>) -> PResult<T> {
        Err(ParseError::new(pos, msg))
    }

    fn expect(&mut self, c: u8) -> PResult<()> {
        match self.peek() {
            Some(x) if x == c => {
                self.pos += 1;
                Ok(())
            }
            Some(x) => self.err(
                self.pos,
                format!("expected `{}`, found `{}`", c as char, x as char),
            ),
            None => self.err(
                self.pos,
                format!("expected `{}`, found end of input", c as char),
            ),
        }
    }

    fn expression(&mut self) -> PResult<DiffPoly> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = &acc + &self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> PResult<DiffPoly> {
        let mut acc = self.unary()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            acc = &acc * &self.unary()?;
        }
        if self.peek() == Some(b'/') {
            return self.err(
                self.pos,
                "`/` is only allowed inside a rational literal p/q",
            );
        }
        Ok(acc)
    }

    fn unary(&mut self) -> PResult<DiffPoly> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(-&self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> PResult<DiffPoly> {
        let base = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        let at = {
            self.skip_ws();
            self.pos
        };
        let exp = if self.peek() == Some(b'(') {
            self.pos += 1;
            let e = self.exponent(at)?;
            self.expect(b')')?;
            e
        } else {
            self.exponent(at)?
        };
        if self.peek() == Some(b'^') {
            return self.err(self.pos, "chained exponents need parentheses");
        }
        Ok(base.pow(exp))
    }

    fn exponent(&mut self, at: usize) -> PResult<u32> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() => {
                let digits = self.digits();
                digits
                    .parse::<u32>()
                    .or_else(|_| self.err(at, "exponent too large"))
            }
            _ => self.err(at, "exponent must be a non-negative integer"),
        }
    }

    fn digits(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn atom(&mut self) -> PResult<DiffPoly> {
        let start = {
            self.skip_ws();
            self.pos
        };
        match self.peek() {
            None => self.err(start, "unexpected end of input"),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expression()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() => {
                let num: BigInt = self.digits().parse().expect("digits");
                let mut value = BigRational::from_integer(num);
                if self.peek() == Some(b'/') {
                    self.pos += 1;
                    let at = {
                        self.skip_ws();
                        self.pos
                    };
                    match self.peek() {
                        Some(d) if d.is_ascii_digit() => {
                            let den: BigInt = self.digits().parse().expect("digits");
                            if den.is_zero() {
                                return self.err(at, "zero denominator in rational literal");
                            }
                            value /= BigRational::from_integer(den);
                        }
                        _ => {
                            return self
                                .err(at, "`/` is only allowed inside a rational literal p/q")
                        }
                    }
                }
                self.no_implicit_product()?;
                Ok(DiffPoly::constant(Coeff::Rational(value)))
            }
            Some(c) if is_ident_start(c) => {
                while self.pos < self.src.len() && is_ident_char(self.src[self.pos]) {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                let deriv = self.derivative_suffix()?;
                self.no_implicit_product()?;
                if name == "t" && self.vars.resolve("t").is_none() {
                    if !self.field.has_t() {
                        return self.err(start, "`t` is reserved and only usable over Q(t)");
                    }
                    if deriv.is_some() {
                        return self.err(
                            start,
                            "malformed derivative suffix: `t` is the field generator",
                        );
                    }
                    return Ok(DiffPoly::constant(Coeff::t()));
                }
                match self.vars.resolve(name) {
                    Some(v) => Ok(DiffPoly::var(JetVar::new(v, deriv.unwrap_or(0)))),
                    None => self.err(start, format!("unknown identifier `{name}`")),
                }
            }
            Some(c) => self.err(start, format!("unexpected character `{}`", c as char)),
        }
    }

    fn no_implicit_product(&mut self) -> PResult<()> {
        match self.peek() {
            Some(c) if is_ident_start(c) || c.is_ascii_digit() || c == b'(' => {
                self.err(self.pos, "implicit multiplication is not allowed; use `*`")
            }
            _ => Ok(()),
        }
    }

    /// Apostrophes directly after the identifier, or `^(k)`.
    fn derivative_suffix(&mut self) -> PResult<Option<u32>> {
        let mut primes = 0u32;
        while self.src.get(self.pos) == Some(&b'\'') {
            primes += 1;
            self.pos += 1;
        }
        let save = self.pos;
        if self.peek() == Some(b'^') {
            let caret = self.pos;
            self.pos += 1;
            if self.peek() == Some(b'(') {
                if primes > 0 {
                    return self.err(caret, "malformed derivative suffix: both `'` and `^(k)`");
                }
                self.pos += 1;
                let at = {
                    self.skip_ws();
                    self.pos
                };
                let k = match self.peek() {
                    Some(c) if c.is_ascii_digit() => {
                        self.digits().parse::<u32>().or_else(|_| {
                            self.err(at, "malformed derivative suffix: order too large")
                        })?
                    }
                    _ => {
                        return self.err(
                            at,
                            "malformed derivative suffix: expected `^(k)` with integer k ≥ 0",
                        )
                    }
                };
                if self.peek() != Some(b')') {
                    return self.err(self.pos, "malformed derivative suffix: expected `)`");
                }
                self.pos += 1;
                return Ok(Some(k));
            }
        }
        self.pos = save;
        Ok((primes > 0).then_some(primes))
    }
}

/// Parses one expression into expanded normal form.
pub fn parse_expression(
    text: &str,
    vars: &dyn Resolver,
    field: Field,
) -> Result<DiffPoly, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        vars,
        field,
    };
    let out = p.expression()?;
    if let Some(c) = p.peek() {
        return p.err(
            p.pos,
            format!("unexpected `{}` after expression", c as char),
        );
    }
    Ok(out)
}

/// Parses a single jet variable such as `u4''` or `y1^(3)`.
pub fn parse_jet(text: &str, vars: &dyn Resolver) -> Result<JetVar, ParseError> {
    let p = parse_expression(text, vars, Field::Rationals)?;
    let single = match p.terms().next() {
        Some((m, c)) if p.len() == 1 && c.is_one() && m.factors().len() == 1 && m.degree() == 1 => {
            Some(m.factors()[0].0)
        }
        _ => None,
    };
    single.ok_or_else(|| ParseError::new(0, format!("`{text}` is not a single jet variable")))
}

fn write_jet(out: &mut String, v: JetVar, names: &[String]) {
    out.push_str(&names[v.var.0 as usize]);
    match v.deriv {
        0 => {}
        1 => out.push('\''),
        2 => out.push_str("''"),
        k => {
            let _ = write!(out, "^({k})");
        }
    }
}

fn write_monomial(out: &mut String, m: &Monomial, names: &[String]) {
    for (k, &(v, e)) in m.factors().iter().enumerate() {
        if k > 0 {
            out.push('*');
        }
        write_jet(out, v, names);
        if e > 1 {
            let _ = write!(out, "^{e}");
        }
    }
}

struct Rat<'a>(&'a BigRational);

impl std::fmt::Display for Rat<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fmt_rational(self.0, f)
    }
}

fn single_term(p: &UniPoly) -> bool {
    p.coeffs().iter().filter(|c| !c.is_zero()).count() == 1
}

/// Text of a nonnegative-leading coefficient factor and whether it is a bare 1.
fn coeff_text(c: &Coeff) -> (String, bool) {
    match c {
        Coeff::Rational(q) => (Rat(q).to_string(), q.is_one()),
        Coeff::Function(f) if f.is_polynomial() => {
            let text = f.numer().to_string();
            if single_term(f.numer()) {
                (text, false)
            } else {
                (format!("({text})"), false)
            }
        }
        Coeff::Function(f) => (format!("({})/({})", f.numer(), f.denom()), false),
    }
}

/// Canonical text, terms in descending monomial order.
pub fn serialize(p: &DiffPoly, names: &[String]) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (k, (m, c)) in p.terms().rev().enumerate() {
        let neg = c.is_negative();
        let mag = if neg { -c } else { c.clone() };
        if k == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let (text, unit) = coeff_text(&mag);
        if m.is_one() {
            out.push_str(&text);
        } else {
            if !unit {
                out.push_str(&text);
                out.push('*');
            }
            write_monomial(&mut out, m, names);
        }
    }
    out
}

/// Serialization of a single jet variable.
pub fn jet_name(v: JetVar, names: &[String]) -> String {
    let mut s = String::new();
    write_jet(&mut s, v, names);
    s
}

/// The versioned JSON system format.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub field: Field,
    #[serde(default)]
    pub x: Vec<String>,
    pub u: Vec<String>,
    #[serde(default)]
    pub f: Vec<String>,
    #[serde(default)]
    pub g: Vec<String>,
}

fn valid_identifier(name: &str) -> bool {
    let b = name.as_bytes();
    !b.is_empty() && is_ident_start(b[0]) && b.iter().all(|&c| is_ident_char(c))
}

impl SystemDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SystemDocument =
            serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
        if doc.format_version != 1 {
            return Err(Error::Document(format!(
                "unsupported format_version {} (expected 1)",
                doc.format_version
            )));
        }
        Ok(doc)
    }

    pub fn build(&self) -> Result<DaeSystem> {
        if self.u.is_empty() {
            return Err(Error::Shape("the list of U variables is empty".into()));
        }
        if self.x.len() != self.f.len() {
            return Err(Error::Shape(format!(
                "length mismatch: {} X variables but {} f equations",
                self.x.len(),
                self.f.len()
            )));
        }
        let declared: Vec<String> = self.x.iter().chain(&self.u).cloned().collect();
        for (k, name) in declared.iter().enumerate() {
            if !valid_identifier(name) {
                return Err(Error::Shape(format!("`{name}` is not a valid identifier")));
            }
            if name == "t" {
                return Err(Error::Shape(
                    "`t` is reserved for the field generator".into(),
                ));
            }
            if declared[..k].contains(name) {
                return Err(Error::Shape(format!("duplicate name `{name}`")));
            }
        }
        let parse_all = |label: &str, list: &[String]| -> Result<Vec<DiffPoly>> {
            list.iter()
                .enumerate()
                .map(|(k, text)| {
                    parse_expression(text, &declared, self.field)
                        .map_err(|e| Error::Parse(e.within(format!("{label}[{k}]"))))
                })
                .collect()
        };
        let f = parse_all("f", &self.f)?;
        let g = parse_all("g", &self.g)?;
        assemble(self.field, &self.x, &self.u, f, g)
    }
}

/// Parses and validates a JSON system document.
pub fn load_system(text: &str) -> Result<DaeSystem> {
    SystemDocument::from_json(text)?.build()
}

/// Convenience constructor from expression strings.
pub fn parse_system_text(
    field: &str,
    x: &[&str],
    u: &[&str],
    f: &[&str],
    g: &[&str],
) -> Result<DaeSystem> {
    let field = match field {
        "Q" => Field::Rationals,
        "Q(t)" => Field::RationalFunctions,
        other => return Err(Error::Document(format!("unknown field `{other}`"))),
    };
    let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    SystemDocument {
        format_version: 1,
        name: None,
        field,
        x: owned(x),
        u: owned(u),
        f: owned(f),
        g: owned(g),
    }
    .build()
}

/// Parses a signed decimal or `p/q` string into an exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let value = match body.split_once('/') {
        Some((p, q)) => {
            let q: BigInt = q.parse().ok()?;
            if q.is_zero() {
                return None;
            }
            BigRational::new(p.parse().ok()?, q)
        }
        None => BigRational::from_integer(body.parse().ok()?),
    };
    Some(if neg { -value } else { value })
}
