//! Scalar field expressions over `r` and ambient coordinates.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numbers, the variables
//! `r`, `x`, `y`, `z`, `x0`..`x7`, and the functions `exp` and `sqrt`.
//! `^` binds tightest and associates to the right.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Vector, MAX_COORDS};
use crate::mesh::SimplicialImmersion;
use crate::operators::ScalarField;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    R,
    Coord(usize),
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sqrt,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.sum()?;
        match p.peek() {
            None => Ok(e),
            Some(t) => Err(p.unexpected(t)),
        }
    }

    pub fn eval(&self, r: f64, x: &Vector) -> f64 {
        match self {
            Self::Num(v) => *v,
            Self::R => r,
            Self::Coord(i) => {
                if *i < x.len() {
                    x[*i]
                } else {
                    f64::NAN
                }
            }
            Self::Neg(e) => -e.eval(r, x),
            Self::Bin(op, a, b) => {
                let (a, b) = (a.eval(r, x), b.eval(r, x));
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div => a / b,
                    Op::Pow => a.powf(b),
                }
            }
            Self::Call(f, e) => {
                let v = e.eval(r, x);
                match f {
                    Func::Exp => v.exp(),
                    Func::Sqrt => v.sqrt(),
                }
            }
        }
    }

    /// True when the expression reads some ambient coordinate.
    pub fn uses_coordinates(&self) -> bool {
        match self {
            Self::Num(_) | Self::R => false,
            Self::Coord(_) => true,
            Self::Neg(e) | Self::Call(_, e) => e.uses_coordinates(),
            Self::Bin(_, a, b) => a.uses_coordinates() || b.uses_coordinates(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    text: String,
    at: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (at, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            // Exponent part, e.g. 1e-3.
            if i < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j].1, '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().map(|c| c.1).collect();
            let v: f64 = text
                .parse()
                .map_err(|_| Error::Parse(format!("invalid number '{text}' at position {at}")))?;
            out.push(Token {
                tok: Tok::Num(v),
                text,
                at,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().map(|c| c.1).collect();
            out.push(Token {
                tok: Tok::Ident(text.clone()),
                text,
                at,
            });
        } else if "+-*/^()".contains(c) {
            i += 1;
            out.push(Token {
                tok: Tok::Sym(c),
                text: c.to_string(),
                at,
            });
        } else {
            return Err(Error::Parse(format!(
                "unexpected character '{c}' at position {at}"
            )));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn unexpected(&self, t: &Token) -> Error {
        Error::Parse(format!(
            "unexpected token '{}' at position {}",
            t.text, t.at
        ))
    }

    fn eat(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Token { tok: Tok::Sym(s), .. }) if *s == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut e = self.product()?;
        loop {
            let op = if self.eat('+') {
                Op::Add
            } else if self.eat('-') {
                Op::Sub
            } else {
                return Ok(e);
            };
            e = Expr::Bin(op, Box::new(e), Box::new(self.product()?));
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        loop {
            let op = if self.eat('*') {
                Op::Mul
            } else if self.eat('/') {
                Op::Div
            } else {
                return Ok(e);
            };
            e = Expr::Bin(op, Box::new(e), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(t) = self.peek().cloned() else {
            return Err(Error::Parse("unexpected end of expression".into()));
        };
        self.pos += 1;
        match &t.tok {
            Tok::Num(v) => Ok(Expr::Num(*v)),
            Tok::Sym('(') => {
                let e = self.sum()?;
                if !self.eat(')') {
                    return Err(match self.peek() {
                        Some(t) => self.unexpected(t),
                        None => Error::Parse("missing ')'".into()),
                    });
                }
                Ok(e)
            }
            Tok::Sym(_) => Err(self.unexpected(&t)),
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "exp" => Some(Func::Exp),
                    "sqrt" => Some(Func::Sqrt),
                    _ => None,
                };
                if let Some(f) = func {
                    if !self.eat('(') {
                        return Err(Error::Parse(format!(
                            "expected '(' after '{name}' at position {}",
                            t.at
                        )));
                    }
                    self.pos -= 1;
                    return Ok(Expr::Call(f, Box::new(self.atom()?)));
                }
                variable(name).ok_or_else(|| {
                    Error::Parse(format!("unknown identifier '{name}' at position {}", t.at))
                })
            }
        }
    }
}

fn variable(name: &str) -> Option<Expr> {
    match name {
        "r" => Some(Expr::R),
        "x" => Some(Expr::Coord(0)),
        "y" => Some(Expr::Coord(1)),
        "z" => Some(Expr::Coord(2)),
        _ => {
            let i: usize = name.strip_prefix('x')?.parse().ok()?;
            (i < MAX_COORDS).then_some(Expr::Coord(i))
        }
    }
}

/// Source of a test function.
#[derive(Clone, Debug, PartialEq)]
pub enum PsiSpec {
    /// Function of `r` only.
    Radial(Expr),
    /// Function of the ambient coordinates (and `r`).
    Coord(Expr),
    /// Vertex values, one per line.
    File(String),
}

impl PsiSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, body) = spec.split_once(':').ok_or_else(|| {
            Error::Parse(format!(
                "psi spec '{spec}' needs a 'radial:', 'coord:' or 'file:' prefix"
            ))
        })?;
        match kind {
            "radial" => {
                let e = Expr::parse(body)?;
                if e.uses_coordinates() {
                    return Err(Error::Parse(format!(
                        "radial expression '{body}' may only use r"
                    )));
                }
                Ok(Self::Radial(e))
            }
            "coord" => Ok(Self::Coord(Expr::parse(body)?)),
            "file" => Ok(Self::File(body.to_string())),
            other => Err(Error::Parse(format!("unknown psi kind '{other}'"))),
        }
    }

    /// Vertex values on `mesh` with `r` measured from `xi`.
    pub fn field(&self, mesh: &SimplicialImmersion, xi: &Vector) -> Result<ScalarField> {
        let values = match self {
            Self::Radial(e) | Self::Coord(e) => {
                let space = mesh.space();
                mesh.vertices()
                    .iter()
                    .map(|v| e.eval(space.dist(v, xi), v))
                    .collect()
            }
            Self::File(path) => read_values(Path::new(path))?,
        };
        ScalarField::new(mesh, values)
    }
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(i, l)| {
            l.parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: value {} is not a number: '{l}'",
                    path.display(),
                    i + 1
                ))
            })
        })
        .collect()
}
