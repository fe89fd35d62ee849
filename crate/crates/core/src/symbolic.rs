//! Exact symbolic expressions: sums of
//! `coefficient * monomial(a_j, u_i) * exp(integer-linear form in u_i)`.
//!
//! Coefficients are Gaussian rationals. Terms live in a `BTreeMap` keyed by
//! `(exponent form, monomial)`, which is the canonical order; zero
//! coefficients are never stored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

pub type Coeff = num_complex::Complex<Rational64>;

pub fn int(v: i64) -> Coeff {
    Coeff::new(Rational64::from_integer(v), Rational64::zero())
}

/// A variable: `u_i` (unknown) or `a_j` (input coefficient), 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    A(usize),
    U(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::U(i) => write!(f, "u{}", i + 1),
            Var::A(i) => write!(f, "a{}", i + 1),
        }
    }
}

impl Var {
    fn latex(&self) -> String {
        match self {
            Var::U(i) => format!("u_{{{}}}", i + 1),
            Var::A(i) => format!("a_{{{}}}", i + 1),
        }
    }

    fn parse(name: &str) -> Option<Var> {
        let (head, digits) = name.split_at(1);
        let idx: usize = digits.parse().ok()?;
        if idx == 0 {
            return None;
        }
        match head {
            "u" => Some(Var::U(idx - 1)),
            "a" => Some(Var::A(idx - 1)),
            _ => None,
        }
    }
}

/// Product of variables with positive powers, sorted by variable.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn factors(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, p)| p).sum()
    }

    pub fn u_degree(&self) -> u32 {
        self.0
            .iter()
            .filter(|(v, _)| matches!(v, Var::U(_)))
            .map(|&(_, p)| p)
            .sum()
    }

    pub fn power_of(&self, v: Var) -> u32 {
        self.0.iter().find(|&&(w, _)| w == v).map_or(0, |&(_, p)| p)
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => {
                    out.push(a);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a.0, a.1 + b.1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// Splits into the part over variables satisfying `keep` and the rest.
    fn split(&self, keep: impl Fn(Var) -> bool) -> (Monomial, Monomial) {
        let (a, b): (Vec<_>, Vec<_>) = self.0.iter().partition(|(v, _)| keep(*v));
        (Monomial(a), Monomial(b))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.u_degree()
            .cmp(&other.u_degree())
            .then_with(|| self.degree().cmp(&other.degree()))
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Integer-linear form `Σ k_i u_i`, sorted by index, no zero entries.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExpForm(Vec<(usize, i32)>);

impl ExpForm {
    pub fn zero() -> Self {
        ExpForm(Vec::new())
    }

    pub fn new(mut terms: Vec<(usize, i32)>) -> Self {
        terms.sort();
        let mut out: Vec<(usize, i32)> = Vec::with_capacity(terms.len());
        for (i, k) in terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += k,
                _ => out.push((i, k)),
            }
        }
        out.retain(|&(_, k)| k != 0);
        ExpForm(out)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> &[(usize, i32)] {
        &self.0
    }

    fn add(&self, other: &ExpForm) -> ExpForm {
        let mut all = self.0.clone();
        all.extend_from_slice(&other.0);
        ExpForm::new(all)
    }

    fn eval(&self, u: &[C64]) -> C64 {
        self.0.iter().map(|&(i, k)| u[i] * k as f64).sum::<C64>().exp()
    }
}

/// Canonical sum of terms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymbolicExpr {
    terms: BTreeMap<(ExpForm, Monomial), Coeff>,
}

impl SymbolicExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Coeff) -> Self {
        Self::term(c, Monomial::one(), ExpForm::zero())
    }

    pub fn var(v: Var) -> Self {
        Self::term(Coeff::one(), Monomial::var(v), ExpForm::zero())
    }

    pub fn u(i: usize) -> Self {
        Self::var(Var::U(i))
    }

    pub fn a(j: usize) -> Self {
        Self::var(Var::A(j))
    }

    pub fn exp(form: ExpForm) -> Self {
        Self::term(Coeff::one(), Monomial::one(), form)
    }

    pub fn term(c: Coeff, m: Monomial, e: ExpForm) -> Self {
        let mut s = Self::zero();
        s.add_term(e, m, c);
        s
    }

    fn add_term(&mut self, e: ExpForm, m: Monomial, c: Coeff) {
        if c.is_zero() {
            return;
        }
        let key = (e, m);
        match self.terms.get_mut(&key) {
            Some(existing) => {
                *existing += c;
                if existing.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, c);
            }
        }
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

    /// Terms in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&ExpForm, &Monomial, &Coeff)> {
        self.terms.iter().map(|((e, m), c)| (e, m, c))
    }

    pub fn scale(&self, c: Coeff) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        SymbolicExpr {
            terms: self.terms.iter().map(|(k, v)| (k.clone(), *v * c)).collect(),
        }
    }

    pub fn mul_exp(&self, form: &ExpForm) -> Self {
        let mut out = Self::zero();
        for ((e, m), c) in &self.terms {
            out.add_term(e.add(form), m.clone(), *c);
        }
        out
    }

    pub fn add_assign_ref(&mut self, other: &SymbolicExpr) {
        for ((e, m), c) in &other.terms {
            self.add_term(e.clone(), m.clone(), *c);
        }
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &SymbolicExpr, c: Coeff) {
        if c.is_zero() {
            return;
        }
        for ((e, m), d) in &other.terms {
            self.add_term(e.clone(), m.clone(), *d * c);
        }
    }

    /// Every variable that occurs, in monomials or in exponent forms.
    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for (e, m) in self.terms.keys() {
            out.extend(m.0.iter().map(|&(v, _)| v));
            out.extend(e.0.iter().map(|&(i, _)| Var::U(i)));
        }
        out
    }

    /// Variables appearing in exponent forms.
    pub fn exp_variables(&self) -> BTreeSet<usize> {
        self.terms
            .keys()
            .flat_map(|(e, _)| e.0.iter().map(|&(i, _)| i))
            .collect()
    }

    /// Maximum total polynomial degree in the given unknowns.
    pub fn degree_in(&self, unknowns: &[usize]) -> u32 {
        self.terms
            .keys()
            .map(|(_, m)| {
                m.0.iter()
                    .filter(|(v, _)| matches!(v, Var::U(i) if unknowns.contains(i)))
                    .map(|&(_, p)| p)
                    .sum()
            })
            .max()
            .unwrap_or(0)
    }

    /// Maximum power of any single unknown satisfying `pred`.
    pub fn max_power(&self, pred: impl Fn(usize) -> bool) -> u32 {
        self.terms
            .keys()
            .flat_map(|(_, m)| m.0.iter())
            .filter(|(v, _)| matches!(v, Var::U(i) if pred(*i)))
            .map(|&(_, p)| p)
            .max()
            .unwrap_or(0)
    }

    /// Groups terms by their monomial over `unknowns`; each group holds the
    /// cofactor, free of those unknowns.
    pub fn collect_in(&self, unknowns: &[usize]) -> BTreeMap<Monomial, SymbolicExpr> {
        let mut out: BTreeMap<Monomial, SymbolicExpr> = BTreeMap::new();
        for ((e, m), c) in &self.terms {
            let (head, rest) = m.split(|v| matches!(v, Var::U(i) if unknowns.contains(&i)));
            out.entry(head).or_default().add_term(e.clone(), rest, *c);
        }
        out
    }

    pub fn eval(&self, u: &[C64], a: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for ((e, m), c) in &self.terms {
            let mut t = coeff_to_c64(c);
            for &(v, p) in &m.0 {
                let x = match v {
                    Var::U(i) => u[i],
                    Var::A(j) => a[j],
                };
                t *= x.powu(p);
            }
            if !e.is_zero() {
                t *= e.eval(u);
            }
            acc += t;
        }
        acc
    }

    /// Variable substitution; `f` must map `u` variables occurring in
    /// exponent forms to `u` variables.
    pub fn map_vars(&self, f: impl Fn(Var) -> Var) -> Self {
        let mut out = Self::zero();
        for ((e, m), c) in &self.terms {
            let mut mono = Monomial::one();
            for &(v, p) in &m.0 {
                for _ in 0..p {
                    mono = mono.mul(&Monomial::var(f(v)));
                }
            }
            let form = e
                .0
                .iter()
                .map(|&(i, k)| match f(Var::U(i)) {
                    Var::U(j) => (j, k),
                    Var::A(_) => panic!("exponent variable u{} mapped to an input", i + 1),
                })
                .collect();
            out.add_term(ExpForm::new(form), mono, *c);
        }
        out
    }

    pub fn render(&self, style: Style) -> String {
        join_signed(self.terms.iter().map(|((e, m), c)| render_term(c, m, e, style)).collect())
    }

    /// Renders with terms grouped by their monomial in `unknowns` and their
    /// exponential factor; multi-term cofactors are parenthesized.
    pub fn render_grouped(&self, unknowns: &[usize], style: Style) -> String {
        let mut groups: BTreeMap<(Monomial, ExpForm), SymbolicExpr> = BTreeMap::new();
        for ((e, m), c) in &self.terms {
            let (head, rest) = m.split(|v| matches!(v, Var::U(i) if unknowns.contains(&i)));
            groups
                .entry((head, e.clone()))
                .or_default()
                .add_term(ExpForm::zero(), rest, *c);
        }
        let mut parts = Vec::new();
        for ((head, e), cofactor) in groups {
            if cofactor.len() == 1 || (head.0.is_empty() && e.is_zero()) {
                for ((_, rest), c) in &cofactor.terms {
                    parts.push(render_term(c, &rest.mul(&head), &e, style));
                }
                continue;
            }
            let mut body = match style {
                Style::Plain => format!("({})", cofactor.render(style)),
                Style::Latex => format!("\\left({}\\right)", cofactor.render(style)),
            };
            let tail = render_term(&Coeff::one(), &head, &e, style).1;
            if !(head.0.is_empty() && e.is_zero()) {
                body.push(' ');
                body.push_str(&tail);
            }
            parts.push((false, body));
        }
        join_signed(parts)
    }

    pub fn parse(src: &str) -> Result<Self> {
        Parser::new(src).parse_all()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Plain,
    Latex,
}

impl fmt::Display for SymbolicExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(Style::Plain))
    }
}

impl std::str::FromStr for SymbolicExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SymbolicExpr::parse(s)
    }
}

fn join_signed(parts: Vec<(bool, String)>) -> String {
    if parts.is_empty() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, (negative, body)) in parts.into_iter().enumerate() {
        match (i, negative) {
            (0, true) => out.push('-'),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        out.push_str(&body);
    }
    out
}

/// Sign and body of one term.
fn render_term(c: &Coeff, m: &Monomial, e: &ExpForm, style: Style) -> (bool, String) {
    let (negative, mag) = split_sign(c);
    let mut factors: Vec<String> = Vec::new();
    if mag != Coeff::one() || (m.0.is_empty() && e.is_zero()) {
        factors.push(render_coeff(&mag, style));
    }
    for &(v, p) in &m.0 {
        let base = match style {
            Style::Plain => v.to_string(),
            Style::Latex => v.latex(),
        };
        factors.push(match (p, style) {
            (1, _) => base,
            (_, Style::Plain) => format!("{base}^{p}"),
            (_, Style::Latex) => format!("{base}^{{{p}}}"),
        });
    }
    if !e.is_zero() {
        factors.push(render_exp(e, style));
    }
    (negative, factors.join(" "))
}

pub fn coeff_to_c64(c: &Coeff) -> C64 {
    let f = |r: &Rational64| *r.numer() as f64 / *r.denom() as f64;
    C64::new(f(&c.re), f(&c.im))
}

/// Sign used for display: a term is "negative" when its leading nonzero
/// part is negative.
fn split_sign(c: &Coeff) -> (bool, Coeff) {
    let lead_negative = if !c.re.is_zero() {
        c.re.is_negative()
    } else {
        c.im.is_negative()
    };
    if lead_negative {
        (true, -*c)
    } else {
        (false, *c)
    }
}

fn render_rational(r: &Rational64, style: Style) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        match style {
            Style::Plain => format!("{}/{}", r.numer(), r.denom()),
            Style::Latex => format!("\\frac{{{}}}{{{}}}", r.numer(), r.denom()),
        }
    }
}

fn render_coeff(c: &Coeff, style: Style) -> String {
    let unit = match style {
        Style::Plain => "i",
        Style::Latex => "\\mathrm{i}",
    };
    match (c.re.is_zero(), c.im.is_zero()) {
        (_, true) => render_rational(&c.re, style),
        (true, false) => {
            if c.im == Rational64::one() {
                unit.to_string()
            } else if c.im == -Rational64::one() {
                format!("-{unit}")
            } else {
                format!("{} {unit}", render_rational(&c.im, style))
            }
        }
        (false, false) => {
            let sign = if c.im.is_negative() { "-" } else { "+" };
            format!(
                "({} {sign} {} {unit})",
                render_rational(&c.re, style),
                render_rational(&c.im.abs(), style)
            )
        }
    }
}

fn render_exp(e: &ExpForm, style: Style) -> String {
    let mut inner = String::new();
    for (i, &(idx, k)) in e.0.iter().enumerate() {
        let var = match style {
            Style::Plain => Var::U(idx).to_string(),
            Style::Latex => Var::U(idx).latex(),
        };
        let sep = match style {
            Style::Plain => " ",
            Style::Latex => "",
        };
        if i > 0 {
            let _ = write!(inner, "{sep}{}{sep}", if k < 0 { '-' } else { '+' });
        } else if k < 0 {
            inner.push('-');
        }
        if k.abs() != 1 {
            let _ = write!(inner, "{}{sep}", k.abs());
        }
        inner.push_str(&var);
    }
    match style {
        Style::Plain => format!("e^({inner})"),
        Style::Latex => format!("e^{{{inner}}}"),
    }
}

impl Add for &SymbolicExpr {
    type Output = SymbolicExpr;
    fn add(self, rhs: &SymbolicExpr) -> SymbolicExpr {
        let mut out = self.clone();
        out.add_assign_ref(rhs);
        out
    }
}

impl Add for SymbolicExpr {
    type Output = SymbolicExpr;
    fn add(mut self, rhs: SymbolicExpr) -> SymbolicExpr {
        self.add_assign_ref(&rhs);
        self
    }
}

impl Sub for &SymbolicExpr {
    type Output = SymbolicExpr;
    fn sub(self, rhs: &SymbolicExpr) -> SymbolicExpr {
        let mut out = self.clone();
        out.add_scaled(rhs, -Coeff::one());
        out
    }
}

impl Sub for SymbolicExpr {
    type Output = SymbolicExpr;
    fn sub(self, rhs: SymbolicExpr) -> SymbolicExpr {
        &self - &rhs
    }
}

impl Neg for &SymbolicExpr {
    type Output = SymbolicExpr;
    fn neg(self) -> SymbolicExpr {
        self.scale(-Coeff::one())
    }
}

impl Neg for SymbolicExpr {
    type Output = SymbolicExpr;
    fn neg(self) -> SymbolicExpr {
        -&self
    }
}

impl Mul for &SymbolicExpr {
    type Output = SymbolicExpr;
    fn mul(self, rhs: &SymbolicExpr) -> SymbolicExpr {
        let mut out = SymbolicExpr::zero();
        for ((e1, m1), c1) in &self.terms {
            for ((e2, m2), c2) in &rhs.terms {
                out.add_term(e1.add(e2), m1.mul(m2), *c1 * *c2);
            }
        }
        out
    }
}

impl Mul for SymbolicExpr {
    type Output = SymbolicExpr;
    fn mul(self, rhs: SymbolicExpr) -> SymbolicExpr {
        &self * &rhs
    }
}

// Parsing: the plain rendering, plus `*`, parentheses, `exp(...)` and
// numeric literals `p/q`, is accepted.

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(i64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    err: Option<Error>,
}

impl Parser {
    fn new(src: &str) -> Self {
        let mut toks = Vec::new();
        let bytes = src.as_bytes();
        let mut i = 0;
        let mut err = None;
        while i < bytes.len() {
            let ch = bytes[i] as char;
            let start = i;
            match ch {
                ' ' | '\t' | '\n' | '\r' => {
                    i += 1;
                    continue;
                }
                '+' => toks.push((start, Tok::Plus)),
                '-' => toks.push((start, Tok::Minus)),
                '*' => toks.push((start, Tok::Star)),
                '/' => toks.push((start, Tok::Slash)),
                '^' => toks.push((start, Tok::Caret)),
                '(' => toks.push((start, Tok::LParen)),
                ')' => toks.push((start, Tok::RParen)),
                c if c.is_ascii_digit() => {
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    match src[start..i].parse() {
                        Ok(v) => toks.push((start, Tok::Int(v))),
                        Err(_) => {
                            err.get_or_insert(Error::Parse {
                                pos: start,
                                msg: "integer overflow".into(),
                            });
                        }
                    }
                    continue;
                }
                c if c.is_ascii_alphabetic() => {
                    while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                        i += 1;
                    }
                    // `a12`, `u3`: a single letter followed by digits.
                    if i - start == 1 {
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                    toks.push((start, Tok::Ident(src[start..i].to_string())));
                    continue;
                }
                other => {
                    err.get_or_insert(Error::Parse {
                        pos: start,
                        msg: format!("unexpected character `{other}`"),
                    });
                }
            }
            i += 1;
        }
        Parser { toks, pos: 0, err }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(usize::MAX, |&(o, _)| o)
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.offset(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected {t:?}"))
        }
    }

    fn parse_all(mut self) -> Result<SymbolicExpr> {
        if let Some(e) = self.err.take() {
            return Err(e);
        }
        let e = self.expr()?;
        if self.pos != self.toks.len() {
            return self.fail("trailing input");
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<SymbolicExpr> {
        let mut acc = match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                -self.term()?
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.term()?
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = acc + self.term()?;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<SymbolicExpr> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    acc = acc * self.power()?;
                }
                Some(Tok::Int(_)) | Some(Tok::Ident(_)) | Some(Tok::LParen) => {
                    acc = acc * self.power()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> Result<SymbolicExpr> {
        // `e^(...)` is an exponential, not a power of a variable `e`.
        if let Some(Tok::Ident(name)) = self.peek() {
            if name == "e" {
                self.pos += 1;
                self.expect(Tok::Caret)?;
                self.expect(Tok::LParen)?;
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                return self.exp_of(inner);
            }
        }
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let Some(Tok::Int(p)) = self.peek().cloned() else {
                return self.fail("expected a nonnegative integer exponent");
            };
            self.pos += 1;
            let mut out = SymbolicExpr::constant(Coeff::one());
            for _ in 0..p {
                out = &out * &base;
            }
            return Ok(out);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<SymbolicExpr> {
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::Slash) {
                    self.pos += 1;
                    let Some(Tok::Int(d)) = self.peek().cloned() else {
                        return self.fail("expected a denominator");
                    };
                    if d == 0 {
                        return self.fail("zero denominator");
                    }
                    self.pos += 1;
                    return Ok(SymbolicExpr::constant(Coeff::new(
                        Rational64::new(v, d),
                        Rational64::zero(),
                    )));
                }
                Ok(SymbolicExpr::constant(int(v)))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if name == "i" {
                    return Ok(SymbolicExpr::constant(Coeff::new(
                        Rational64::zero(),
                        Rational64::one(),
                    )));
                }
                if name == "exp" {
                    self.expect(Tok::LParen)?;
                    let inner = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return self.exp_of(inner);
                }
                match Var::parse(&name) {
                    Some(v) => Ok(SymbolicExpr::var(v)),
                    None => {
                        self.pos -= 1;
                        self.fail(format!("unknown identifier `{name}`"))
                    }
                }
            }
            _ => self.fail("expected a factor"),
        }
    }

    fn exp_of(&self, inner: SymbolicExpr) -> Result<SymbolicExpr> {
        let mut form = Vec::new();
        for ((e, m), c) in &inner.terms {
            let ok_shape = e.is_zero() && m.0.len() == 1 && m.0[0].1 == 1;
            let ok_coeff = c.im.is_zero() && c.re.is_integer();
            match (ok_shape, ok_coeff, m.0.first()) {
                (true, true, Some(&(Var::U(i), _))) => {
                    let k = i32::try_from(*c.re.numer())
                        .map_err(|_| Error::Parse { pos: 0, msg: "exponent overflow".into() })?;
                    form.push((i, k));
                }
                _ => return self.fail("exponent must be an integer-linear form in the u variables"),
            }
        }
        Ok(SymbolicExpr::exp(ExpForm::new(form)))
    }
}

// JSON term-list representation.

#[derive(Serialize, Deserialize)]
struct TermRepr {
    coeff: [String; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    vars: Vec<(String, u32)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    exp: Vec<(String, i32)>,
}

fn rational_to_string(r: &Rational64) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn rational_from_str(s: &str) -> std::result::Result<Rational64, String> {
    let parse = |t: &str| t.trim().parse::<i64>().map_err(|e| format!("bad rational `{s}`: {e}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let d = parse(d)?;
            if d == 0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            Ok(Rational64::new(parse(n)?, d))
        }
        None => Ok(Rational64::from_integer(parse(s)?)),
    }
}

impl Serialize for SymbolicExpr {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let terms: Vec<TermRepr> = self
            .terms
            .iter()
            .map(|((e, m), c)| TermRepr {
                coeff: [rational_to_string(&c.re), rational_to_string(&c.im)],
                vars: m.0.iter().map(|&(v, p)| (v.to_string(), p)).collect(),
                exp: e.0.iter().map(|&(i, k)| (Var::U(i).to_string(), k)).collect(),
            })
            .collect();
        terms.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for SymbolicExpr {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let terms = Vec::<TermRepr>::deserialize(de)?;
        let mut out = SymbolicExpr::zero();
        for t in terms {
            let c = Coeff::new(
                rational_from_str(&t.coeff[0]).map_err(D::Error::custom)?,
                rational_from_str(&t.coeff[1]).map_err(D::Error::custom)?,
            );
            let mut m = Monomial::one();
            for (name, p) in t.vars {
                let v = Var::parse(&name).ok_or_else(|| D::Error::custom(format!("bad variable `{name}`")))?;
                for _ in 0..p {
                    m = m.mul(&Monomial::var(v));
                }
            }
            let mut form = Vec::new();
            for (name, k) in t.exp {
                match Var::parse(&name) {
                    Some(Var::U(i)) => form.push((i, k)),
                    _ => return Err(D::Error::custom(format!("bad exponent variable `{name}`"))),
                }
            }
            out.add_term(ExpForm::new(form), m, c);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> SymbolicExpr {
        SymbolicExpr::parse(s).unwrap()
    }

    #[test]
    fn canonical_collection() {
        let e = p("a1 + u1 a2 - a2 u1 + 2 a1");
        assert_eq!(e, p("3 a1"));
        assert!(p("u1 - u1").is_zero());
        assert_eq!(p("(a1 + u2)^2"), p("a1^2 + 2 a1 u2 + u2^2"));
    }

    #[test]
    fn exponentials_combine() {
        let e = p("a3 e^(2 u2)") * p("e^(-2 u2)");
        assert_eq!(e, p("a3"));
        assert_eq!(p("exp(u4 + u5) e^(-u4)"), p("e^(u5)"));
    }

    #[test]
    fn render_plain_sl2_riccati() {
        let e = p("-a3 u1^2 + a1 + 2 a2 u1");
        assert_eq!(e.render(Style::Plain), "a1 + 2 a2 u1 - a3 u1^2");
        assert_eq!(p("a3 e^(2u2)").render(Style::Plain), "a3 e^(2 u2)");
        assert_eq!(p("-a6 e^(2u4 - u5)").render(Style::Latex), "-a_{6} e^{2u_{4}-u_{5}}");
    }

    #[test]
    fn render_complex_coefficients() {
        assert_eq!(p("i a1").render(Style::Plain), "i a1");
        assert_eq!(p("-3/2 i").render(Style::Plain), "-3/2 i");
        assert_eq!(p("(1 + 2 i) u1").render(Style::Plain), "(1 + 2 i) u1");
        assert_eq!(SymbolicExpr::zero().render(Style::Plain), "0");
    }

    #[test]
    fn parse_errors() {
        assert!(SymbolicExpr::parse("a0").is_err());
        assert!(SymbolicExpr::parse("e^(u1 u2)").is_err());
        assert!(SymbolicExpr::parse("a1 +").is_err());
        assert!(SymbolicExpr::parse("x1").is_err());
        assert!(SymbolicExpr::parse("1/0").is_err());
        assert!(SymbolicExpr::parse("a1 $").is_err());
    }

    #[test]
    fn analysis_helpers() {
        let e = p("a1 + a2 u1 u3 - a3 u1^2 e^(u4)");
        assert_eq!(e.degree_in(&[0]), 2);
        assert_eq!(e.degree_in(&[0, 2]), 2);
        assert_eq!(e.degree_in(&[5]), 0);
        assert_eq!(e.exp_variables(), BTreeSet::from([3]));
        let groups = e.collect_in(&[0]);
        assert_eq!(groups[&Monomial::one()], p("a1"));
        assert_eq!(groups[&Monomial::var(Var::U(0))], p("a2 u3"));
    }

    #[test]
    fn eval_matches_manual() {
        let e = p("a1 + 2 a2 u1 - a3 u1^2 e^(-2 u2)");
        let u = [C64::new(0.3, 0.1), C64::new(-0.2, 0.5)];
        let a = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.5, -0.5)];
        let manual = a[0] + 2.0 * a[1] * u[0] - a[2] * u[0] * u[0] * (-2.0 * u[1]).exp();
        assert!((e.eval(&u, &a) - manual).norm() < 1e-15);
    }

    fn arb_term() -> impl Strategy<Value = SymbolicExpr> {
        (
            -5i64..=5,
            1i64..=3,
            -2i64..=2,
            prop::collection::vec((0usize..4, 0usize..6, 1u32..=2), 0..3),
            prop::collection::vec((0usize..3, -2i32..=2), 0..2),
        )
            .prop_map(|(re, den, im, vars, exp)| {
                let c = Coeff::new(Rational64::new(re, den), Rational64::from_integer(im));
                let mut e = SymbolicExpr::constant(c);
                for (kind, idx, pow) in vars {
                    let v = if kind % 2 == 0 { Var::U(idx) } else { Var::A(idx) };
                    for _ in 0..pow {
                        e = &e * &SymbolicExpr::var(v);
                    }
                }
                e.mul_exp(&ExpForm::new(exp))
            })
    }

    fn arb_expr() -> impl Strategy<Value = SymbolicExpr> {
        prop::collection::vec(arb_term(), 0..6)
            .prop_map(|ts| ts.into_iter().fold(SymbolicExpr::zero(), |acc, t| acc + t))
    }

    proptest! {
        #[test]
        fn plain_rendering_parses_back(e in arb_expr()) {
            prop_assert_eq!(SymbolicExpr::parse(&e.render(Style::Plain)).unwrap(), e);
        }

        #[test]
        fn json_round_trip(e in arb_expr()) {
            let s = serde_json::to_string(&e).unwrap();
            let back: SymbolicExpr = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back, e);
        }

        #[test]
        fn ring_laws(x in arb_expr(), y in arb_expr(), z in arb_expr()) {
            prop_assert_eq!(&x * &(&y + &z), &(&x * &y) + &(&x * &z));
            prop_assert_eq!(&x * &y, &y * &x);
            prop_assert!((&x - &x).is_zero());
        }
    }
}
