//! Small closed-form expression language for coefficient fields.
//!
//! Configs describe analytic fields (`phi`, `rhs`, subsolutions, variable
//! coefficients) as strings over the coordinates `x1..x9`, the constant `pi`,
//! the functions `sin cos exp abs sqrt`, and the operators `+ - * / ^`
//! (`^` binds tightest and associates right). This is deliberately tiny:
//! manufactured solutions need smooth analytic fields, not a scripting
//! language.
//!
//! Integer powers are evaluated via repeated multiplication (`powi`), so
//! expressions like `(1 - x1^2)` vanish *exactly* at `x1 = +-1`. Boundary
//! identities written in this language therefore hold bitwise, which the
//! solver's subsolution checks rely on.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
}

#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    Coord(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Coord(i) => x.get(*i).copied().unwrap_or(f64::NAN),
            Node::Neg(a) => -a.eval(x),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => a.eval(x) / b.eval(x),
            Node::Pow(a, b) => {
                let base = a.eval(x);
                let e = b.eval(x);
                // exact integer powers keep algebraic identities exact
                if e.fract() == 0.0 && e.abs() <= 64.0 {
                    base.powi(e as i32)
                } else {
                    base.powf(e)
                }
            }
            Node::Call(f, a) => {
                let v = a.eval(x);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Abs => v.abs(),
                    Func::Sqrt => v.sqrt(),
                }
            }
        }
    }

    fn max_coord(&self) -> usize {
        match self {
            Node::Num(_) => 0,
            Node::Coord(i) => i + 1,
            Node::Neg(a) | Node::Call(_, a) => a.max_coord(),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b) => a.max_coord().max(b.max_coord()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                let mut seen_digit = false;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    seen_digit = true;
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        seen_digit = true;
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') && seen_digit {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                if !seen_digit {
                    return Err(Error::Parse {
                        position: start,
                        message: "number with no digits".into(),
                    });
                }
                let lit = &src[start..i];
                let v: f64 = lit.parse().map_err(|_| Error::Parse {
                    position: start,
                    message: format!("bad number literal {lit:?}"),
                })?;
                toks.push((Tok::Num(v), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Parse {
                    position: i,
                    message: format!("unexpected character {c:?}"),
                });
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|&(_, p)| p)
            .unwrap_or(self.src_len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let pos = self.here();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            other => Err(Error::Parse {
                position: pos,
                message: format!("expected {what}, found {other:?}"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            // right-associative; exponent may carry its own unary minus
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        let pos = self.here();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                if matches!(self.peek(), Some(Tok::LParen)) {
                    let func = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "exp" => Func::Exp,
                        "abs" => Func::Abs,
                        "sqrt" => Func::Sqrt,
                        _ => {
                            return Err(Error::Parse {
                                position: pos,
                                message: format!("unknown function {name:?}"),
                            })
                        }
                    };
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "')'")?;
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Node::Num(std::f64::consts::PI));
                }
                if let Some(rest) = name.strip_prefix('x') {
                    if let Ok(i) = rest.parse::<usize>() {
                        if (1..=9).contains(&i) {
                            return Ok(Node::Coord(i - 1));
                        }
                    }
                }
                Err(Error::Parse {
                    position: pos,
                    message: format!(
                        "unknown identifier {name:?} (coordinates are x1..x9, constant pi)"
                    ),
                })
            }
            other => Err(Error::Parse {
                position: pos,
                message: format!("expected a value, found {other:?}"),
            }),
        }
    }
}

/// A parsed closed-form scalar expression over grid coordinates.
#[derive(Debug, Clone)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let toks = tokenize(src)?;
        let mut p = Parser {
            toks: &toks,
            pos: 0,
            src_len: src.len(),
        };
        let root = p.expr()?;
        if p.pos != toks.len() {
            return Err(Error::Parse {
                position: p.here(),
                message: "trailing input after expression".into(),
            });
        }
        Ok(Self {
            root,
            source: src.to_string(),
        })
    }

    /// Evaluates at a point. Coordinates the expression references beyond
    /// `x.len()` yield NaN, which downstream finiteness checks reject;
    /// use [`Expr::max_coord`] to validate up front.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.root.eval(x)
    }

    /// Smallest dimension the expression is valid in (`x1+x3` needs 3).
    pub fn max_coord(&self) -> usize {
        self.root.max_coord()
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}
