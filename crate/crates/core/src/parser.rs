//! Text format for polynomial maps.
//!
//! A map is written as components separated by commas or newlines, with an
//! optional leading `vars: z1 z2 ...` header. Variables are `z1..zk`, `i` is
//! the imaginary unit, coefficients are rationals (`3`, `3/4`, `2.5`) or
//! complex literals like `(1+2i)`. Multiplication may be explicit (`*`) or
//! implicit before a variable. Errors carry 1-based line/column positions.

use crate::gaussian::GaussianRational;
use crate::poly::{Polynomial, PolynomialMap};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{kind} at line {line}, column {col}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("unexpected token `{0}`")]
    UnexpectedToken(String),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("exponent must be a nonnegative integer")]
    BadExponent,
    #[error("malformed number literal `{0}`")]
    BadNumber(String),
    #[error("unbalanced parentheses")]
    UnbalancedParens,
    #[error("empty component")]
    EmptyComponent,
    #[error("division by zero")]
    DivisionByZero,
    #[error("divisor must be a numeric constant")]
    NonConstantDivisor,
    #[error("vars header declares {declared} variables but map has {found} components")]
    HeaderMismatch { declared: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Newline,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(kind: ParseErrorKind, line: usize, col: usize) -> ParseError {
    ParseError { kind, line, col }
}

fn tokenize(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            chars.next();
            col += 1;
        };
        match c {
            '\n' => {
                chars.next();
                out.push(Spanned { tok: Tok::Newline, line: tl, col: tc });
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => bump(&mut chars),
            '+' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::Plus, line: tl, col: tc });
            }
            '-' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::Minus, line: tl, col: tc });
            }
            '*' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::Star, line: tl, col: tc });
            }
            '/' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::Slash, line: tl, col: tc });
            }
            '^' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::Caret, line: tl, col: tc });
            }
            '(' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::LParen, line: tl, col: tc });
            }
            ')' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::RParen, line: tl, col: tc });
            }
            ',' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::Comma, line: tl, col: tc });
            }
            '0'..='9' | '.' => {
                let mut s = String::new();
                let mut seen_dot = false;
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        s.push(d);
                        bump(&mut chars);
                    } else if d == '.' && !seen_dot {
                        seen_dot = true;
                        s.push(d);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                if s == "." || s.starts_with('.') && s.len() == 1 || !s.chars().any(|c| c.is_ascii_digit()) {
                    return Err(err(ParseErrorKind::BadNumber(s), tl, tc));
                }
                out.push(Spanned { tok: Tok::Num(s), line: tl, col: tc });
            }
            c if c.is_ascii_alphabetic() => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        s.push(d);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                // `vars:` header keyword keeps its colon attached here.
                if s == "vars" && chars.peek() == Some(&':') {
                    bump(&mut chars);
                    s.push(':');
                }
                out.push(Spanned { tok: Tok::Ident(s), line: tl, col: tc });
            }
            other => {
                return Err(err(ParseErrorKind::UnexpectedToken(other.to_string()), tl, tc));
            }
        }
    }
    Ok(out)
}

/// Raw term during parsing: exponents keyed by 0-based variable index.
#[derive(Clone, Debug)]
struct RawPoly {
    terms: Vec<(BTreeMap<usize, u32>, GaussianRational)>,
}

impl RawPoly {
    fn constant(c: GaussianRational) -> Self {
        Self { terms: vec![(BTreeMap::new(), c)] }
    }

    fn var(idx: usize) -> Self {
        let mut e = BTreeMap::new();
        e.insert(idx, 1u32);
        Self { terms: vec![(e, GaussianRational::one())] }
    }

    fn neg(&self) -> Self {
        Self { terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect() }
    }

    fn add(&self, o: &Self) -> Self {
        let mut t = self.terms.clone();
        t.extend(o.terms.iter().cloned());
        Self { terms: t }
    }

    fn mul(&self, o: &Self) -> Self {
        let mut t = Vec::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let mut e = e1.clone();
                for (&v, &x) in e2 {
                    *e.entry(v).or_insert(0) += x;
                }
                t.push((e, c1 * c2));
            }
        }
        Self { terms: t }
    }

    fn pow(&self, n: u32) -> Self {
        let mut r = Self::constant(GaussianRational::one());
        for _ in 0..n {
            r = r.mul(self);
        }
        r
    }

    /// Constant value, if no variable appears.
    fn as_constant(&self) -> Option<GaussianRational> {
        let mut acc = GaussianRational::zero();
        for (e, c) in &self.terms {
            if e.values().any(|&x| x > 0) {
                return None;
            }
            acc = &acc + c;
        }
        Some(acc)
    }

    fn max_var(&self) -> Option<usize> {
        self.terms.iter().flat_map(|(e, _)| e.keys().copied()).max()
    }

    fn into_polynomial(self, nvars: usize) -> Polynomial {
        let mut p = Polynomial::zero(nvars);
        for (e, c) in self.terms {
            let mut exps = vec![0u32; nvars];
            for (v, x) in e {
                exps[v] += x;
            }
            p.add_term(exps, c);
        }
        p
    }
}

struct Parser<'a> {
    toks: &'a [Spanned],
    pos: usize,
    end_line: usize,
    end_col: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<&Spanned> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (usize, usize) {
        match self.peek() {
            Some(t) => (t.line, t.col),
            None => (self.end_line, self.end_col),
        }
    }

    fn expr(&mut self) -> Result<RawPoly, ParseError> {
        let mut negate = false;
        while let Some(t) = self.peek() {
            match t.tok {
                Tok::Plus => {
                    self.pos += 1;
                }
                Tok::Minus => {
                    negate = !negate;
                    self.pos += 1;
                }
                _ => break,
            }
        }
        let mut acc = self.term()?;
        if negate {
            acc = acc.neg();
        }
        while let Some(t) = self.peek() {
            match t.tok {
                Tok::Plus => {
                    self.pos += 1;
                    acc = acc.add(&self.signed_term()?);
                }
                Tok::Minus => {
                    self.pos += 1;
                    acc = acc.add(&self.signed_term()?.neg());
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn signed_term(&mut self) -> Result<RawPoly, ParseError> {
        let mut negate = false;
        while let Some(t) = self.peek() {
            match t.tok {
                Tok::Minus => {
                    negate = !negate;
                    self.pos += 1;
                }
                Tok::Plus => {
                    self.pos += 1;
                }
                _ => break,
            }
        }
        let t = self.term()?;
        Ok(if negate { t.neg() } else { t })
    }

    fn term(&mut self) -> Result<RawPoly, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek().map(|t| t.tok.clone()) {
                Some(Tok::Star) => {
                    self.pos += 1;
                    acc = acc.mul(&self.factor()?);
                }
                Some(Tok::Slash) => {
                    let (l, c) = self.here();
                    self.pos += 1;
                    let divisor = self.factor()?;
                    let val = divisor
                        .as_constant()
                        .ok_or_else(|| err(ParseErrorKind::NonConstantDivisor, l, c))?;
                    let inv = val
                        .recip()
                        .ok_or_else(|| err(ParseErrorKind::DivisionByZero, l, c))?;
                    acc = acc.mul(&RawPoly::constant(inv));
                }
                Some(Tok::Ident(_)) | Some(Tok::LParen) => {
                    acc = acc.mul(&self.factor()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<RawPoly, ParseError> {
        let base = self.primary()?;
        if let Some(t) = self.peek() {
            if t.tok == Tok::Caret {
                let (l, c) = (t.line, t.col);
                self.pos += 1;
                let et = self.next().cloned();
                match et {
                    Some(Spanned { tok: Tok::Num(s), line, col }) => {
                        if s.contains('.') {
                            return Err(err(ParseErrorKind::BadExponent, line, col));
                        }
                        let n: u32 = s
                            .parse()
                            .map_err(|_| err(ParseErrorKind::BadExponent, line, col))?;
                        return Ok(base.pow(n));
                    }
                    Some(Spanned { line, col, .. }) => {
                        return Err(err(ParseErrorKind::BadExponent, line, col));
                    }
                    None => return Err(err(ParseErrorKind::BadExponent, l, c)),
                }
            }
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<RawPoly, ParseError> {
        let (l, c) = self.here();
        match self.next().cloned() {
            Some(Spanned { tok: Tok::Num(s), line, col }) => {
                parse_number(&s).map(RawPoly::constant).ok_or_else(|| {
                    err(ParseErrorKind::BadNumber(s.clone()), line, col)
                })
            }
            Some(Spanned { tok: Tok::Ident(s), line, col }) => {
                if s == "i" {
                    return Ok(RawPoly::constant(GaussianRational::i()));
                }
                if let Some(rest) = s.strip_prefix('z') {
                    if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
                        if let Ok(idx) = rest.parse::<usize>() {
                            if idx >= 1 {
                                return Ok(RawPoly::var(idx - 1));
                            }
                        }
                    }
                }
                Err(err(ParseErrorKind::UnknownVariable(s), line, col))
            }
            Some(Spanned { tok: Tok::LParen, line, col }) => {
                let inner = self.expr()?;
                match self.next() {
                    Some(t) if t.tok == Tok::RParen => Ok(inner),
                    Some(t) => Err(err(
                        ParseErrorKind::UnexpectedToken(tok_text(&t.tok)),
                        t.line,
                        t.col,
                    )),
                    None => Err(err(ParseErrorKind::UnbalancedParens, line, col)),
                }
            }
            Some(Spanned { tok, line, col }) => {
                Err(err(ParseErrorKind::UnexpectedToken(tok_text(&tok)), line, col))
            }
            None => Err(err(ParseErrorKind::UnexpectedEnd, l, c)),
        }
    }
}

fn tok_text(t: &Tok) -> String {
    match t {
        Tok::Num(s) | Tok::Ident(s) => s.clone(),
        Tok::Plus => "+".into(),
        Tok::Minus => "-".into(),
        Tok::Star => "*".into(),
        Tok::Slash => "/".into(),
        Tok::Caret => "^".into(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::Comma => ",".into(),
        Tok::Newline => "\\n".into(),
    }
}

fn parse_number(s: &str) -> Option<GaussianRational> {
    if let Some(dot) = s.find('.') {
        let int_part = &s[..dot];
        let frac_part = &s[dot + 1..];
        if frac_part.is_empty() && int_part.is_empty() {
            return None;
        }
        let int: BigInt = if int_part.is_empty() { BigInt::zero() } else { int_part.parse().ok()? };
        let frac: BigInt = if frac_part.is_empty() { BigInt::zero() } else { frac_part.parse().ok()? };
        let den = BigInt::from(10u32).pow(frac_part.len() as u32);
        let val = BigRational::from_integer(int) + BigRational::new(frac, den);
        Some(GaussianRational::from_real(val))
    } else {
        let n: BigInt = s.parse().ok()?;
        Some(GaussianRational::from_real(BigRational::from_integer(n)))
    }
}

/// Parse a polynomial map from text.
pub fn parse_map(src: &str) -> Result<PolynomialMap, ParseError> {
    let toks = tokenize(src)?;
    let lines = src.lines().count().max(1);
    let end_col = src.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);

    // Optional header: `vars: z1 z2 ... zk` on its own (logical) line.
    let mut start = 0usize;
    let mut declared: Option<usize> = None;
    if let Some(t) = toks.first() {
        if t.tok == Tok::Ident("vars:".into()) {
            let mut j = 1;
            let mut count = 0usize;
            while j < toks.len() && toks[j].tok != Tok::Newline {
                match &toks[j].tok {
                    Tok::Ident(s) => {
                        let ok = s
                            .strip_prefix('z')
                            .and_then(|r| r.parse::<usize>().ok())
                            .map(|idx| idx == count + 1)
                            .unwrap_or(false);
                        if !ok {
                            return Err(err(
                                ParseErrorKind::UnknownVariable(s.clone()),
                                toks[j].line,
                                toks[j].col,
                            ));
                        }
                        count += 1;
                    }
                    other => {
                        return Err(err(
                            ParseErrorKind::UnexpectedToken(tok_text(other)),
                            toks[j].line,
                            toks[j].col,
                        ));
                    }
                }
                j += 1;
            }
            declared = Some(count);
            start = j;
        }
    }

    // Split into component segments at top-level commas/newlines.
    let mut segments: Vec<(usize, usize)> = Vec::new();
    let mut depth = 0i32;
    let mut seg_start = start;
    for j in start..toks.len() {
        match toks[j].tok {
            Tok::LParen => depth += 1,
            Tok::RParen => {
                depth -= 1;
                if depth < 0 {
                    return Err(err(ParseErrorKind::UnbalancedParens, toks[j].line, toks[j].col));
                }
            }
            Tok::Comma | Tok::Newline if depth == 0 => {
                segments.push((seg_start, j));
                seg_start = j + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(err(ParseErrorKind::UnbalancedParens, lines, end_col));
    }
    segments.push((seg_start, toks.len()));

    let mut raws: Vec<(RawPoly, (usize, usize))> = Vec::new();
    for (a, b) in segments {
        let slice = &toks[a..b];
        let is_comma = b < toks.len() && toks[b].tok == Tok::Comma;
        if slice.is_empty() {
            if is_comma {
                let (l, c) = (toks[b].line, toks[b].col);
                return Err(err(ParseErrorKind::EmptyComponent, l, c));
            }
            continue; // blank line
        }
        let mut p = Parser { toks: slice, pos: 0, end_line: lines, end_col };
        let raw = p.expr()?;
        if p.pos < slice.len() {
            let t = &slice[p.pos];
            return Err(err(ParseErrorKind::UnexpectedToken(tok_text(&t.tok)), t.line, t.col));
        }
        let span = (slice[0].line, slice[0].col);
        raws.push((raw, span));
    }
    if raws.is_empty() {
        return Err(err(ParseErrorKind::EmptyComponent, 1, 1));
    }

    let k = raws.len();
    if let Some(d) = declared {
        if d != k {
            return Err(err(ParseErrorKind::HeaderMismatch { declared: d, found: k }, 1, 1));
        }
    }
    // Reject variables beyond the component count.
    for (raw, span) in &raws {
        if let Some(mx) = raw.max_var() {
            if mx >= k {
                return Err(err(
                    ParseErrorKind::UnknownVariable(format!("z{}", mx + 1)),
                    span.0,
                    span.1,
                ));
            }
        }
    }
    Ok(PolynomialMap::new(
        raws.into_iter().map(|(raw, _)| raw.into_polynomial(k)).collect(),
    ))
}

/// Canonical text form: components joined by `, `, terms in descending
/// graded-lex order, explicit `*` between coefficient and variables.
pub fn format_map(map: &PolynomialMap) -> String {
    map.components.iter().map(format_polynomial).collect::<Vec<_>>().join(", ")
}

pub fn format_polynomial(p: &Polynomial) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut terms: Vec<(&Vec<u32>, &GaussianRational)> = p.terms().collect();
    terms.sort_by(|a, b| {
        let da: u32 = a.0.iter().sum();
        let db: u32 = b.0.iter().sum();
        db.cmp(&da).then_with(|| b.0.cmp(a.0))
    });
    let mut out = String::new();
    for (idx, (e, c)) in terms.iter().enumerate() {
        let (neg, body) = term_string(e, c);
        if idx == 0 {
            if neg {
                out.push('-');
            }
            out.push_str(&body);
        } else {
            out.push_str(if neg { " - " } else { " + " });
            out.push_str(&body);
        }
    }
    out
}

fn rat_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn term_string(e: &[u32], c: &GaussianRational) -> (bool, String) {
    let mono: Vec<String> = e
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 0)
        .map(|(v, &x)| if x == 1 { format!("z{}", v + 1) } else { format!("z{}^{}", v + 1, x) })
        .collect();
    let mono_str = mono.join("*");

    let (neg, coeff_str) = if c.is_real() {
        let neg = c.re.is_negative();
        let mag = c.re.abs();
        let s = if mag.is_one() && !mono_str.is_empty() { String::new() } else { rat_string(&mag) };
        (neg, s)
    } else if c.re.is_zero() {
        let neg = c.im.is_negative();
        let mag = c.im.abs();
        let s = if mag.is_one() { "i".to_string() } else { format!("{}i", rat_string(&mag)) };
        (neg, s)
    } else {
        let im = &c.im;
        let im_mag = im.abs();
        let im_str = if im_mag.is_one() { "i".to_string() } else { format!("{}i", rat_string(&im_mag)) };
        let joiner = if im.is_negative() { "-" } else { "+" };
        (false, format!("({}{}{})", rat_string(&c.re), joiner, im_str))
    };

    let body = match (coeff_str.is_empty(), mono_str.is_empty()) {
        (true, true) => "1".to_string(),
        (true, false) => mono_str,
        (false, true) => coeff_str,
        (false, false) => format!("{}*{}", coeff_str, mono_str),
    };
    (neg, body)
}
