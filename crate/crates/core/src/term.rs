//! The toy term language: arithmetic expressions over `+` and `*` with
//! variables and natural-number literals, plus a small set of rewrite rules.
//!
//! Statements are equations `lhs = rhs`. Rendering is canonical — compound
//! subterms are always parenthesized, the top level of each side is bare — and
//! the parser accepts canonical renderings plus ordinary precedence notation
//! (`*` binds tighter than `+`, both left-associative), so `parse ∘ render`
//! is the identity on terms.

use std::fmt;

/// A term: variables, literals, sums, products.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ToyTerm {
    Const(u64),
    Var(String),
    Add(Box<ToyTerm>, Box<ToyTerm>),
    Mul(Box<ToyTerm>, Box<ToyTerm>),
}

/// An equation between two terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyGoal {
    pub lhs: ToyTerm,
    pub rhs: ToyTerm,
}

/// Which side of the equation a rewrite targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "l",
            Side::Right => "r",
        })
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("unexpected character {0:?} at byte {1}")]
    UnexpectedChar(char, usize),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("expected {expected} at byte {at}")]
    Expected { expected: &'static str, at: usize },
    #[error("trailing input at byte {0}")]
    Trailing(usize),
    #[error("a goal needs exactly one '='")]
    BadEquation,
}

/// Why a rewrite failed to apply.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ApplyError {
    #[error("no subterm at path")]
    NoSubterm,
    #[error("pattern does not match the subterm")]
    NoMatch,
    #[error("reversed rule would have to invent a term for an unbound variable")]
    Unbound,
}

impl ToyTerm {
    /// Canonical rendering: compound children parenthesized, atoms bare.
    pub fn render(&self) -> String {
        fn child(t: &ToyTerm, out: &mut String) {
            match t {
                ToyTerm::Const(_) | ToyTerm::Var(_) => inner(t, out),
                _ => {
                    out.push('(');
                    inner(t, out);
                    out.push(')');
                }
            }
        }
        fn inner(t: &ToyTerm, out: &mut String) {
            match t {
                ToyTerm::Const(n) => out.push_str(&n.to_string()),
                ToyTerm::Var(v) => out.push_str(v),
                ToyTerm::Add(a, b) => {
                    child(a, out);
                    out.push_str(" + ");
                    child(b, out);
                }
                ToyTerm::Mul(a, b) => {
                    child(a, out);
                    out.push_str(" * ");
                    child(b, out);
                }
            }
        }
        let mut out = String::new();
        inner(self, &mut out);
        out
    }

    /// The subterm at `path` (child indices from the root of this term).
    pub fn subterm_at(&self, path: &[usize]) -> Option<&ToyTerm> {
        let mut current = self;
        for &idx in path {
            current = match (current, idx) {
                (ToyTerm::Add(a, _), 0) | (ToyTerm::Mul(a, _), 0) => a,
                (ToyTerm::Add(_, b), 1) | (ToyTerm::Mul(_, b), 1) => b,
                _ => return None,
            };
        }
        Some(current)
    }

    /// A copy of this term with the subterm at `path` replaced.
    pub fn replace_at(&self, path: &[usize], replacement: ToyTerm) -> Option<ToyTerm> {
        if path.is_empty() {
            return Some(replacement);
        }
        let (idx, rest) = (path[0], &path[1..]);
        match (self, idx) {
            (ToyTerm::Add(a, b), 0) => {
                Some(ToyTerm::Add(Box::new(a.replace_at(rest, replacement)?), b.clone()))
            }
            (ToyTerm::Add(a, b), 1) => {
                Some(ToyTerm::Add(a.clone(), Box::new(b.replace_at(rest, replacement)?)))
            }
            (ToyTerm::Mul(a, b), 0) => {
                Some(ToyTerm::Mul(Box::new(a.replace_at(rest, replacement)?), b.clone()))
            }
            (ToyTerm::Mul(a, b), 1) => {
                Some(ToyTerm::Mul(a.clone(), Box::new(b.replace_at(rest, replacement)?)))
            }
            _ => None,
        }
    }

    /// All valid paths into this term in depth-first preorder (root first).
    pub fn paths(&self) -> Vec<Vec<usize>> {
        fn walk(t: &ToyTerm, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            out.push(prefix.clone());
            if let ToyTerm::Add(a, b) | ToyTerm::Mul(a, b) = t {
                prefix.push(0);
                walk(a, prefix, out);
                prefix.pop();
                prefix.push(1);
                walk(b, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    /// Evaluate modulo `modulus` under a variable assignment. Used to check
    /// that rewrites preserve meaning.
    pub fn eval(&self, assign: &dyn Fn(&str) -> u64, modulus: u64) -> u64 {
        match self {
            ToyTerm::Const(n) => n % modulus,
            ToyTerm::Var(v) => assign(v) % modulus,
            ToyTerm::Add(a, b) => {
                ((a.eval(assign, modulus) as u128 + b.eval(assign, modulus) as u128)
                    % modulus as u128) as u64
            }
            ToyTerm::Mul(a, b) => {
                ((a.eval(assign, modulus) as u128 * b.eval(assign, modulus) as u128)
                    % modulus as u128) as u64
            }
        }
    }

    /// Collect variable names into `out`.
    pub fn vars(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            ToyTerm::Const(_) => {}
            ToyTerm::Var(v) => {
                out.insert(v.clone());
            }
            ToyTerm::Add(a, b) | ToyTerm::Mul(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }
}

impl ToyGoal {
    pub fn render(&self) -> String {
        format!("{} = {}", self.lhs.render(), self.rhs.render())
    }

    pub fn side(&self, side: Side) -> &ToyTerm {
        match side {
            Side::Left => &self.lhs,
            Side::Right => &self.rhs,
        }
    }

    pub fn with_side(&self, side: Side, term: ToyTerm) -> ToyGoal {
        match side {
            Side::Left => ToyGoal { lhs: term, rhs: self.rhs.clone() },
            Side::Right => ToyGoal { lhs: self.lhs.clone(), rhs: term },
        }
    }
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src: src.as_bytes(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<ToyTerm, ParseError> {
        let mut acc = self.product()?;
        while self.peek() == Some(b'+') {
            self.pos += 1;
            let rhs = self.product()?;
            acc = ToyTerm::Add(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn product(&mut self) -> Result<ToyTerm, ParseError> {
        let mut acc = self.atom()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            let rhs = self.atom()?;
            acc = ToyTerm::Mul(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<ToyTerm, ParseError> {
        match self.peek() {
            None => Err(ParseError::UnexpectedEnd),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.sum()?;
                if self.peek() == Some(b')') {
                    self.pos += 1;
                    Ok(inner)
                } else {
                    Err(ParseError::Expected { expected: "')'", at: self.pos })
                }
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let value = text
                    .parse()
                    .map_err(|_| ParseError::Expected { expected: "number", at: start })?;
                Ok(ToyTerm::Const(value))
            }
            Some(c) if c.is_ascii_lowercase() => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_lowercase()
                        || self.src[self.pos].is_ascii_digit()
                        || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                Ok(ToyTerm::Var(name.to_string()))
            }
            Some(c) => Err(ParseError::UnexpectedChar(c as char, self.pos)),
        }
    }
}

/// Parse a bare term.
pub fn parse_term(text: &str) -> Result<ToyTerm, ParseError> {
    let mut p = Parser::new(text);
    let term = p.sum()?;
    if p.peek().is_some() {
        return Err(ParseError::Trailing(p.pos));
    }
    Ok(term)
}

/// Parse an equation `lhs = rhs`.
pub fn parse_goal(text: &str) -> Result<ToyGoal, ParseError> {
    let mut sides = text.splitn(2, '=');
    let lhs_text = sides.next().ok_or(ParseError::BadEquation)?;
    let rhs_text = sides.next().ok_or(ParseError::BadEquation)?;
    if rhs_text.contains('=') {
        return Err(ParseError::BadEquation);
    }
    Ok(ToyGoal { lhs: parse_term(lhs_text)?, rhs: parse_term(rhs_text)? })
}

// ---------------------------------------------------------------------------
// rewrite rules
// ---------------------------------------------------------------------------

/// Pattern metavariables are written `A`, `B`, `C`; `Zero`/`One` match the
/// literals 0 and 1 exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Pat {
    Meta(u8),
    Zero,
    One,
    Add(Box<Pat>, Box<Pat>),
    Mul(Box<Pat>, Box<Pat>),
}

/// A named bidirectional rewrite rule `lhs → rhs`.
#[derive(Debug)]
pub struct RewriteRule {
    pub name: &'static str,
    lhs: Pat,
    rhs: Pat,
}

fn meta(i: u8) -> Box<Pat> {
    Box::new(Pat::Meta(i))
}

/// The built-in rule set, in canonical order.
pub fn rules() -> &'static [RewriteRule] {
    use Pat::{Add, Mul, One, Zero};
    static RULES: std::sync::OnceLock<Vec<RewriteRule>> = std::sync::OnceLock::new();
    RULES.get_or_init(|| {
        vec![
            RewriteRule { name: "comm_add", lhs: Add(meta(0), meta(1)), rhs: Add(meta(1), meta(0)) },
            RewriteRule {
                name: "assoc_add",
                lhs: Add(Box::new(Add(meta(0), meta(1))), meta(2)),
                rhs: Add(meta(0), Box::new(Add(meta(1), meta(2)))),
            },
            RewriteRule { name: "comm_mul", lhs: Mul(meta(0), meta(1)), rhs: Mul(meta(1), meta(0)) },
            RewriteRule {
                name: "assoc_mul",
                lhs: Mul(Box::new(Mul(meta(0), meta(1))), meta(2)),
                rhs: Mul(meta(0), Box::new(Mul(meta(1), meta(2)))),
            },
            RewriteRule { name: "add_zero", lhs: Add(meta(0), Box::new(Zero)), rhs: Pat::Meta(0) },
            RewriteRule { name: "mul_one", lhs: Mul(meta(0), Box::new(One)), rhs: Pat::Meta(0) },
            RewriteRule { name: "mul_zero", lhs: Mul(meta(0), Box::new(Zero)), rhs: Pat::Zero },
            RewriteRule {
                name: "distrib",
                lhs: Mul(meta(0), Box::new(Add(meta(1), meta(2)))),
                rhs: Add(Box::new(Mul(meta(0), meta(1))), Box::new(Mul(meta(0), meta(2)))),
            },
        ]
    })
}

/// Look up a rule by name.
pub fn rule_by_name(name: &str) -> Option<&'static RewriteRule> {
    rules().iter().find(|r| r.name == name)
}

fn match_pat(pat: &Pat, term: &ToyTerm, bindings: &mut [Option<ToyTerm>; 3]) -> bool {
    match (pat, term) {
        (Pat::Meta(i), t) => match &bindings[*i as usize] {
            Some(bound) => bound == t,
            None => {
                bindings[*i as usize] = Some(t.clone());
                true
            }
        },
        (Pat::Zero, ToyTerm::Const(0)) => true,
        (Pat::One, ToyTerm::Const(1)) => true,
        (Pat::Add(pa, pb), ToyTerm::Add(a, b)) => {
            match_pat(pa, a, bindings) && match_pat(pb, b, bindings)
        }
        (Pat::Mul(pa, pb), ToyTerm::Mul(a, b)) => {
            match_pat(pa, a, bindings) && match_pat(pb, b, bindings)
        }
        _ => false,
    }
}

fn instantiate(pat: &Pat, bindings: &[Option<ToyTerm>; 3]) -> Result<ToyTerm, ApplyError> {
    match pat {
        Pat::Meta(i) => bindings[*i as usize].clone().ok_or(ApplyError::Unbound),
        Pat::Zero => Ok(ToyTerm::Const(0)),
        Pat::One => Ok(ToyTerm::Const(1)),
        Pat::Add(a, b) => Ok(ToyTerm::Add(
            Box::new(instantiate(a, bindings)?),
            Box::new(instantiate(b, bindings)?),
        )),
        Pat::Mul(a, b) => Ok(ToyTerm::Mul(
            Box::new(instantiate(a, bindings)?),
            Box::new(instantiate(b, bindings)?),
        )),
    }
}

impl RewriteRule {
    /// Apply this rule at `path` inside `side` of `goal`. `reversed` swaps
    /// source and target patterns (right-to-left application).
    pub fn apply(
        &self,
        goal: &ToyGoal,
        side: Side,
        path: &[usize],
        reversed: bool,
    ) -> Result<ToyGoal, ApplyError> {
        let term = goal.side(side);
        let target = term.subterm_at(path).ok_or(ApplyError::NoSubterm)?;
        let (source_pat, target_pat) =
            if reversed { (&self.rhs, &self.lhs) } else { (&self.lhs, &self.rhs) };
        let mut bindings: [Option<ToyTerm>; 3] = [None, None, None];
        if !match_pat(source_pat, target, &mut bindings) {
            return Err(ApplyError::NoMatch);
        }
        let replacement = instantiate(target_pat, &bindings)?;
        let new_side = term.replace_at(path, replacement).ok_or(ApplyError::NoSubterm)?;
        Ok(goal.with_side(side, new_side))
    }
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
