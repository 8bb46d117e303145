//! Sparse multivariate polynomials over ℚ in the fixed variables λ, μ, ∂, s.
//!
//! Every identity the workbench checks ends up as "this [`MPoly`] is zero",
//! so equality here is exact term-map equality on canonical forms.
//! Coefficients are arbitrary-precision rationals.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact rational number; always stored in lowest terms with positive denominator.
pub type Rational = BigRational;

/// Builds the rational `n/d`. Panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rint(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Prints a rational as `p` or `p/q`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal {0:?}")]
pub struct ParseRationalError(pub String);

/// Parses `p`, `-p`, or `p/q` with integer `p`, `q` (`q != 0`).
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let t = text.trim();
    let err = || ParseRationalError(text.to_string());
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| err())?;
    let d: BigInt = d.parse().map_err(|_| err())?;
    if d.is_zero() {
        return Err(err());
    }
    Ok(Rational::new(n, d))
}

/// The four polynomial variables, in canonical id order λ < μ < ∂ < s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Lambda = 0,
    Mu = 1,
    Del = 2,
    S = 3,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::Lambda, Var::Mu, Var::Del, Var::S];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::Lambda => "lam",
            Var::Mu => "mu",
            Var::Del => "del",
            Var::S => "s",
        }
    }

    fn from_name(name: &str) -> Option<Var> {
        match name {
            "lam" | "λ" => Some(Var::Lambda),
            "mu" | "μ" => Some(Var::Mu),
            "del" | "∂" => Some(Var::Del),
            "s" => Some(Var::S),
            _ => None,
        }
    }
}

/// Exponent vector indexed by [`Var::id`].
///
/// Ordered graded-lexicographically: total degree first, then exponents
/// compared from the highest variable id (`s`) down to `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Monomial(pub [u32; 4]);

impl Monomial {
    pub const ONE: Monomial = Monomial([0; 4]);

    pub fn var(v: Var) -> Self {
        Self::var_pow(v, 1)
    }

    pub fn var_pow(v: Var, k: u32) -> Self {
        let mut e = [0; 4];
        e[v.id()] = k;
        Monomial(e)
    }

    pub fn exp(&self, v: Var) -> u32 {
        self.0[v.id()]
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0 == [0; 4]
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut e = self.0;
        for (a, b) in e.iter_mut().zip(other.0) {
            *a += b;
        }
        Monomial(e)
    }

    fn with_exp(&self, v: Var, k: u32) -> Monomial {
        let mut e = self.0;
        e[v.id()] = k;
        Monomial(e)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.0.iter().rev().cmp(other.0.iter().rev()))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return f.write_str("1");
        }
        let mut first = true;
        for v in Var::ALL {
            let k = self.exp(v);
            if k == 0 {
                continue;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            f.write_str(v.name())?;
            if k > 1 {
                write!(f, "^{k}")?;
            }
        }
        Ok(())
    }
}

/// Sparse polynomial: monomial → nonzero rational coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct MPoly {
    terms: BTreeMap<Monomial, Rational>,
}

/// Simultaneous substitution `var ↦ poly`; unbound variables map to themselves.
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    map: [Option<MPoly>; 4],
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(mut self, v: Var, p: MPoly) -> Self {
        self.map[v.id()] = Some(p);
        self
    }

    pub fn get(&self, v: Var) -> Option<&MPoly> {
        self.map[v.id()].as_ref()
    }

    pub fn is_empty(&self) -> bool {
        self.map.iter().all(Option::is_none)
    }
}

impl MPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial(Monomial::ONE, c)
    }

    pub fn int(n: i64) -> Self {
        Self::constant(rint(n))
    }

    pub fn var(v: Var) -> Self {
        Self::monomial(Monomial::var(v), Rational::one())
    }

    pub fn monomial(m: Monomial, c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        MPoly { terms }
    }

    pub fn lambda() -> Self {
        Self::var(Var::Lambda)
    }

    pub fn mu() -> Self {
        Self::var(Var::Mu)
    }

    pub fn del() -> Self {
        Self::var(Var::Del)
    }

    pub fn s() -> Self {
        Self::var(Var::S)
    }

    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, Rational)>,
    {
        let mut p = MPoly::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending monomial order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    /// `Some(c)` iff the polynomial is the constant `c` (including zero).
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self.terms.get(&Monomial::ONE).cloned(),
            _ => None,
        }
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(&Monomial::ONE)
    }

    pub fn contains_var(&self, v: Var) -> bool {
        self.terms.keys().any(|m| m.exp(v) > 0)
    }

    /// True if every variable occurring is in `allowed`.
    pub fn uses_only(&self, allowed: &[Var]) -> bool {
        Var::ALL
            .iter()
            .filter(|v| !allowed.contains(v))
            .all(|&v| !self.contains_var(v))
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> MPoly {
        if c.is_zero() {
            return MPoly::zero();
        }
        MPoly {
            terms: self.terms.iter().map(|(m, a)| (*m, a * c)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> MPoly {
        let mut acc = MPoly::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Maximum exponent of `v`; `-1` for the zero polynomial.
    pub fn degree_in(&self, v: Var) -> i64 {
        self.terms
            .keys()
            .map(|m| m.exp(v) as i64)
            .max()
            .unwrap_or(-1)
    }

    /// Total degree; `-1` for the zero polynomial.
    pub fn total_degree(&self) -> i64 {
        self.terms
            .keys()
            .map(|m| m.total_degree() as i64)
            .max()
            .unwrap_or(-1)
    }

    /// Coefficient of `v^k`, as a polynomial in the remaining variables.
    pub fn coeff_in(&self, v: Var, k: u32) -> MPoly {
        MPoly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.exp(v) == k)
                .map(|(m, c)| (m.with_exp(v, 0), c.clone()))
                .collect(),
        }
    }

    pub fn partial(&self, v: Var) -> MPoly {
        let mut out = MPoly::zero();
        for (m, c) in &self.terms {
            let k = m.exp(v);
            if k > 0 {
                out.add_term(m.with_exp(v, k - 1), c * rint(k as i64));
            }
        }
        out
    }

    /// Simultaneous substitution of every bound variable.
    pub fn substitute(&self, bindings: &Bindings) -> MPoly {
        if bindings.is_empty() {
            return self.clone();
        }
        // powers[v][k] = binding(v)^k, filled lazily
        let mut powers: [Vec<MPoly>; 4] = Default::default();
        let mut out = MPoly::zero();
        for (m, c) in &self.terms {
            let mut kept = Monomial::ONE;
            let mut factor = MPoly::one();
            for v in Var::ALL {
                let k = m.exp(v);
                if k == 0 {
                    continue;
                }
                match bindings.get(v) {
                    None => kept.0[v.id()] = k,
                    Some(b) => {
                        let cache = &mut powers[v.id()];
                        if cache.is_empty() {
                            cache.push(MPoly::one());
                        }
                        while cache.len() <= k as usize {
                            let next = cache.last().unwrap() * b;
                            cache.push(next);
                        }
                        factor = &factor * &cache[k as usize];
                    }
                }
            }
            for (fm, fc) in factor.terms {
                out.add_term(fm.mul(&kept), fc * c);
            }
        }
        out
    }

    /// Substitutes a single variable.
    pub fn subst(&self, v: Var, p: &MPoly) -> MPoly {
        self.substitute(&Bindings::new().bind(v, p.clone()))
    }

    /// Evaluates at a point given in [`Var::id`] order.
    pub fn eval(&self, point: &[Rational; 4]) -> Rational {
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for v in Var::ALL {
                for _ in 0..m.exp(v) {
                    t *= &point[v.id()];
                }
            }
            acc += t;
        }
        acc
    }

    /// Leading coefficient with respect to the monomial order.
    pub fn leading(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().next_back()
    }
}

impl From<Rational> for MPoly {
    fn from(c: Rational) -> Self {
        MPoly::constant(c)
    }
}

impl From<i64> for MPoly {
    fn from(n: i64) -> Self {
        MPoly::int(n)
    }
}

impl From<Var> for MPoly {
    fn from(v: Var) -> Self {
        MPoly::var(v)
    }
}

impl AddAssign<&MPoly> for MPoly {
    fn add_assign(&mut self, rhs: &MPoly) {
        for (m, c) in &rhs.terms {
            self.add_term(*m, c.clone());
        }
    }
}

impl SubAssign<&MPoly> for MPoly {
    fn sub_assign(&mut self, rhs: &MPoly) {
        for (m, c) in &rhs.terms {
            self.add_term(*m, -c.clone());
        }
    }
}

impl Add<&MPoly> for &MPoly {
    type Output = MPoly;
    fn add(self, rhs: &MPoly) -> MPoly {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub<&MPoly> for &MPoly {
    type Output = MPoly;
    fn sub(self, rhs: &MPoly) -> MPoly {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Mul<&MPoly> for &MPoly {
    type Output = MPoly;
    fn mul(self, rhs: &MPoly) -> MPoly {
        let mut out = MPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &MPoly {
    type Output = MPoly;
    fn neg(self) -> MPoly {
        MPoly {
            terms: self.terms.iter().map(|(m, c)| (*m, -c.clone())).collect(),
        }
    }
}

macro_rules! forward_owned_binop {
    ($tr:ident, $method:ident) => {
        impl $tr<MPoly> for MPoly {
            type Output = MPoly;
            fn $method(self, rhs: MPoly) -> MPoly {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&MPoly> for MPoly {
            type Output = MPoly;
            fn $method(self, rhs: &MPoly) -> MPoly {
                (&self).$method(rhs)
            }
        }
        impl $tr<MPoly> for &MPoly {
            type Output = MPoly;
            fn $method(self, rhs: MPoly) -> MPoly {
                self.$method(&rhs)
            }
        }
    };
}

forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);

impl Neg for MPoly {
    type Output = MPoly;
    fn neg(self) -> MPoly {
        -&self
    }
}

impl std::iter::Sum for MPoly {
    fn sum<I: Iterator<Item = MPoly>>(iter: I) -> MPoly {
        let mut acc = MPoly::zero();
        for p in iter {
            acc += &p;
        }
        acc
    }
}

impl fmt::Display for MPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (idx, (m, c)) in self.terms.iter().rev().enumerate() {
            let negative = c.is_negative();
            let abs = c.abs();
            if idx == 0 {
                if negative {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if negative { " - " } else { " + " })?;
            }
            if m.is_one() {
                f.write_str(&format_rational(&abs))?;
            } else if abs.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", format_rational(&abs))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("polynomial parse error at byte {pos}: {msg}")]
pub struct ParsePolyError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParsePolyError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(pos, ch)) = chars.peek() {
        if ch.is_whitespace() {
            chars.next();
        } else if ch.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&(_, d)) = chars.peek() {
                if d.is_ascii_digit() {
                    s.push(d);
                    chars.next();
                } else {
                    break;
                }
            }
            out.push((pos, Tok::Num(s.parse().expect("digits"))));
        } else if ch.is_alphabetic() {
            let mut s = String::new();
            while let Some(&(_, d)) = chars.peek() {
                if d.is_alphanumeric() || d == '_' {
                    s.push(d);
                    chars.next();
                } else {
                    break;
                }
            }
            out.push((pos, Tok::Ident(s)));
        } else if "+-*/^()∂".contains(ch) {
            chars.next();
            if ch == '∂' {
                out.push((pos, Tok::Ident("∂".into())));
            } else {
                out.push((pos, Tok::Sym(ch)));
            }
        } else {
            return Err(ParsePolyError {
                pos,
                msg: format!("unexpected character {ch:?}"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParsePolyError> {
        Err(ParsePolyError {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<MPoly, ParsePolyError> {
        let mut acc = if self.eat('-') {
            -self.term()?
        } else {
            self.eat('+');
            self.term()?
        };
        loop {
            if self.eat('+') {
                acc += &self.term()?;
            } else if self.eat('-') {
                acc -= &self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<MPoly, ParsePolyError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = &acc * &self.unary()?;
            } else if self.eat('/') {
                let divisor = self.unary()?;
                match divisor.as_constant() {
                    Some(c) if !c.is_zero() => acc = acc.scale(&c.recip()),
                    Some(_) => return self.err("division by zero"),
                    None => return self.err("division by a non-constant polynomial"),
                }
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<MPoly, ParsePolyError> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        let base = self.atom()?;
        if self.eat('^') {
            match self.peek().cloned() {
                Some(Tok::Num(n)) => {
                    self.at += 1;
                    let k: u32 = n.try_into().or_else(|_| self.err("exponent too large"))?;
                    Ok(base.pow(k))
                }
                _ => self.err("expected a non-negative integer exponent"),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<MPoly, ParsePolyError> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.at += 1;
                Ok(MPoly::constant(Rational::from_integer(n)))
            }
            Some(Tok::Ident(name)) => match Var::from_name(&name) {
                Some(v) => {
                    self.at += 1;
                    Ok(MPoly::var(v))
                }
                None => self.err(format!("unknown variable {name:?}")),
            },
            Some(Tok::Sym('(')) => {
                self.at += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected ')'");
                }
                Ok(inner)
            }
            Some(t) => self.err(format!("unexpected token {t:?}")),
            None => self.err("unexpected end of input"),
        }
    }
}

impl FromStr for MPoly {
    type Err = ParsePolyError;

    /// Accepts the printed grammar (`3*lam^2*del + 1/2`) plus parentheses,
    /// so `2*(lam + del)^2` is also valid input.
    fn from_str(src: &str) -> Result<Self, Self::Err> {
        let toks = tokenize(src)?;
        let mut p = Parser {
            toks,
            at: 0,
            end: src.len(),
        };
        let out = p.expr()?;
        if p.at != p.toks.len() {
            return p.err("trailing input");
        }
        Ok(out)
    }
}

/// Serde adapter storing a [`Rational`] as its `p/q` string.
pub mod serde_rational {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        parse_rational(&text).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter storing an [`MPoly`](super::MPoly) in the text grammar.
pub mod serde_poly {
    use super::MPoly;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &MPoly, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(p)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<MPoly, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> MPoly {
        s.parse().unwrap()
    }

    fn lam() -> MPoly {
        MPoly::lambda()
    }
    fn mu() -> MPoly {
        MPoly::mu()
    }
    fn del() -> MPoly {
        MPoly::del()
    }

    fn sample_points() -> Vec<[Rational; 4]> {
        (0..20i64)
            .map(|k| {
                [
                    rat(3 * k - 7, k + 1),
                    rat(k * k - 5, 2 * k + 3),
                    rat(11 - 2 * k, 3),
                    rat(k + 2, 7),
                ]
            })
            .collect()
    }

    #[test]
    fn add_cancels() {
        assert_eq!(&(&lam() + &del()) + &(-&lam()), del());
        assert_eq!(&MPoly::zero() + &p("lam*del + 3"), p("lam*del + 3"));
    }

    #[test]
    fn add_matches_pointwise_evaluation() {
        let a = p("3*lam^2 + 2*del");
        let b = p("-3*lam^2 + del");
        let sum = &a + &b;
        assert_eq!(sum, p("3*del"));
        for pt in sample_points() {
            assert_eq!(sum.eval(&pt), a.eval(&pt) + b.eval(&pt));
        }
    }

    #[test]
    fn mul_examples() {
        assert_eq!(&(&lam() - &mu()) * &(&lam() + &mu()), p("lam^2 - mu^2"));
        let q = p("lam^3 - 2/3*del");
        assert_eq!(&q * &MPoly::one(), q);
        let a = p("2*mu + del + lam");
        let b = p("3*lam + del");
        let prod = &a * &b;
        assert_eq!(prod, p("3*lam^2 + 6*lam*mu + 4*lam*del + 2*mu*del + del^2"));
        for pt in sample_points() {
            assert_eq!(prod.eval(&pt), a.eval(&pt) * b.eval(&pt));
        }
    }

    #[test]
    fn substitute_examples() {
        let minus_del_minus_lam = -&(&del() + &lam());
        let q = p("lam*del").subst(Var::Lambda, &minus_del_minus_lam);
        assert_eq!(q, p("-lam*del - del^2"));
        let f = p("lam^2*del + 5");
        assert_eq!(f.substitute(&Bindings::new()), f);

        let g = p("lam + del").subst(Var::Del, &(&del() + &mu()));
        assert_eq!(g, p("lam + del + mu"));
        for pt in sample_points() {
            assert_eq!(g.eval(&pt), pt[0].clone() + pt[2].clone() + pt[1].clone());
        }
    }

    #[test]
    fn substitution_is_simultaneous() {
        let swapped = p("lam - 2*mu")
            .substitute(&Bindings::new().bind(Var::Lambda, mu()).bind(Var::Mu, lam()));
        assert_eq!(swapped, p("mu - 2*lam"));
    }

    #[test]
    fn coefficient_extraction() {
        assert_eq!(p("3*lam^2*del + lam").coeff_in(Var::Lambda, 2), p("3*del"));
        assert!(p("del^2").coeff_in(Var::Lambda, 1).is_zero());
    }

    #[test]
    fn jacobi_term_lambda_squared_coefficient() {
        // (βλ+β∂+βμ+γμ)(α∂+(α+β+γ)λ) at α=β=γ=1; λ² coefficient is β(α+β+γ) = 3
        let first = p("del + lam + mu + mu");
        let second = p("del + 3*lam");
        let prod = &first * &second;
        assert_eq!(prod.coeff_in(Var::Lambda, 2), MPoly::int(3));
        // oracle: second finite difference in λ at λ=0, divided by 2
        for pt in sample_points() {
            let at = |l: i64| {
                let mut q = pt.clone();
                q[0] = rint(l);
                prod.eval(&q)
            };
            let second_diff = (at(2) - at(1) * rint(2) + at(0)) / rint(2);
            assert_eq!(second_diff, rint(3));
        }
    }

    #[test]
    fn degrees() {
        assert_eq!(p("lam^2*del").degree_in(Var::Lambda), 2);
        assert_eq!(MPoly::zero().degree_in(Var::Lambda), -1);
        assert_eq!(MPoly::zero().total_degree(), -1);
        // f_{0,γ} = (γ+C)λ is ∂-free
        assert_eq!(p("7/2*lam").degree_in(Var::Del), 0);
    }

    #[test]
    fn partial_derivatives() {
        assert_eq!(p("(lam + del)^2").partial(Var::Lambda), p("2*lam + 2*del"));
        assert!(p("del^3").partial(Var::Lambda).is_zero());
    }

    #[test]
    fn characteristic_pde_annihilates_linear_form() {
        for (alpha, gamma, c) in [(1, 0, rint(0)), (2, -3, rat(1, 2)), (-4, 1, rat(-5, 3))] {
            let k = rint(alpha + gamma) + c;
            let f = &MPoly::lambda().scale(&k) + &MPoly::del().scale(&rint(alpha));
            let lhs = f.partial(Var::Lambda).scale(&rint(alpha));
            let rhs = f.partial(Var::Del).scale(&k);
            assert!((&lhs - &rhs).is_zero());
        }
    }

    #[test]
    fn display_order_and_format() {
        assert_eq!(p("3*lam + del").to_string(), "del + 3*lam");
        assert_eq!(p("1/2 + 3*lam^2*del").to_string(), "3*lam^2*del + 1/2");
        assert_eq!(p("-lam + -1/2*mu").to_string(), "-1/2*mu - lam");
        assert_eq!(MPoly::zero().to_string(), "0");
    }

    #[test]
    fn parse_errors() {
        assert!("lam +".parse::<MPoly>().is_err());
        assert!("x + 1".parse::<MPoly>().is_err());
        assert!("lam / del".parse::<MPoly>().is_err());
        assert!("lam / 0".parse::<MPoly>().is_err());
        assert!("(lam".parse::<MPoly>().is_err());
    }

    #[test]
    fn parse_accepts_unicode_names() {
        assert_eq!(p("λ + ∂ - μ"), p("lam + del - mu"));
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("-3/4").unwrap(), rat(-3, 4));
        assert_eq!(parse_rational("6/4").unwrap(), rat(3, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("a").is_err());
        assert_eq!(format_rational(&rat(4, 2)), "2");
    }
}
