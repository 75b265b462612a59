//! Boundary-data expressions in `x` and `y`, parsed by precedence climbing.
//!
//! Binding from loosest to tightest: `+ −`, `* /`, unary `−`, `^` (right
//! associative). So `-x^2` is `−(x²)` and `2^-x` is `2^(−x)`.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sinh,
    Cosh,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Sin, Func::Cos, Func::Exp, Func::Sinh, Func::Cosh, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// A finite, non-negative literal; signs are unary operators.
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the source where parsing failed.
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at offset {}: {}", self.offset, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalError {
    pub message: String,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for EvalError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut k = i + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    i = k;
                }
            }
            let text = &src[start..i];
            let v: f64 = text
                .parse()
                .map_err(|_| ParseError { offset: start, message: format!("malformed number `{text}`") })?;
            if !v.is_finite() {
                return Err(ParseError { offset: start, message: format!("number `{text}` is not finite") });
            }
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else {
            let tok = match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                _ => {
                    let ch = src[i..].chars().next().unwrap_or('?');
                    return Err(ParseError { offset: i, message: format!("unexpected character `{ch}`") });
                }
            };
            out.push((tok, i));
            i += 1;
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

const UNARY_PREC: u8 = 3;

fn binary(c: char) -> Option<(BinOp, u8, bool)> {
    // (operator, precedence, right associative)
    match c {
        '+' => Some((BinOp::Add, 1, false)),
        '-' => Some((BinOp::Sub, 1, false)),
        '*' => Some((BinOp::Mul, 2, false)),
        '/' => Some((BinOp::Div, 2, false)),
        '^' => Some((BinOp::Pow, 4, true)),
        _ => None,
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { offset: self.offset(), message: message.into() })
    }

    fn expr(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c) = *self.peek() {
            let Some((op, prec, right)) = binary(c) else { break };
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.expr(if right { prec } else { prec + 1 })?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.expr(UNARY_PREC)?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::Var(Var::X)),
                "y" => Ok(Expr::Var(Var::Y)),
                _ => {
                    let Some(f) = Func::from_name(&name) else {
                        return Err(ParseError { offset: at, message: format!("unknown name `{name}`") });
                    };
                    if *self.peek() != Tok::LParen {
                        return self.error(format!("expected `(` after `{name}`"));
                    }
                    self.bump();
                    let arg = self.expr(1)?;
                    self.close()?;
                    Ok(Expr::Call(f, Box::new(arg)))
                }
            },
            Tok::LParen => {
                let e = self.expr(1)?;
                self.close()?;
                Ok(e)
            }
            Tok::End => Err(ParseError { offset: at, message: "unexpected end of input".into() }),
            Tok::RParen => Err(ParseError { offset: at, message: "unexpected `)`".into() }),
            Tok::Op(c) => Err(ParseError { offset: at, message: format!("unexpected `{c}`") }),
        }
    }

    fn close(&mut self) -> Result<(), ParseError> {
        if *self.peek() != Tok::RParen {
            return self.error("expected `)`");
        }
        self.bump();
        Ok(())
    }
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let e = p.expr(1)?;
    match p.peek() {
        Tok::End => Ok(e),
        Tok::RParen => p.error("unbalanced `)`"),
        _ => p.error("expected an operator"),
    }
}

impl Expr {
    pub fn eval(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Neg(a) => -a.eval(x, y)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, y)?, b.eval(x, y)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, a) => {
                let a = a.eval(x, y)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sinh => a.sinh(),
                    Func::Cosh => a.cosh(),
                    Func::Sqrt if a < 0.0 => {
                        return Err(EvalError { message: format!("sqrt of negative value {a:e} at ({x}, {y})") })
                    }
                    Func::Sqrt => a.sqrt(),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError { message: format!("`{self}` is not finite at ({x}, {y})") })
        }
    }
}

/// Fully parenthesized; parsing the output gives back the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => {
                let c = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                    BinOp::Pow => '^',
                };
                write!(f, "({a} {c} {b})")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(src: &str, x: f64, y: f64) -> f64 {
        parse_expr(src).unwrap().eval(x, y).unwrap()
    }

    #[test]
    fn precedence() {
        assert_eq!(at("x^2 - y^2", 2.0, 1.0), 3.0);
        assert_eq!(at("-x^2", 3.0, 0.0), -9.0);
        assert_eq!(at("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(at("2^-1", 0.0, 0.0), 0.5);
        assert_eq!(at("8/4/2", 0.0, 0.0), 1.0);
        assert_eq!(at("1-2-3", 0.0, 0.0), -4.0);
        assert_eq!(at("-x*y", 2.0, 3.0), -6.0);
        assert_eq!(at("--x", 2.0, 0.0), 2.0);
    }

    #[test]
    fn literals() {
        assert_eq!(at("1.5e2", 0.0, 0.0), 150.0);
        assert_eq!(at(".25", 0.0, 0.0), 0.25);
        assert_eq!(at("2E-1", 0.0, 0.0), 0.2);
        let e = parse_expr("1e999").unwrap_err();
        assert_eq!(e.offset, 0);
        assert!(parse_expr("1.2.3").is_err());
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(parse_expr("x +").unwrap_err().offset, 3);
        assert_eq!(parse_expr("sin x").unwrap_err().offset, 4);
        assert_eq!(parse_expr("(x").unwrap_err().offset, 2);
        assert_eq!(parse_expr("x)").unwrap_err().offset, 1);
        assert_eq!(parse_expr("x y").unwrap_err().offset, 2);
        assert_eq!(parse_expr("z").unwrap_err().offset, 0);
        assert_eq!(parse_expr("x # 1").unwrap_err().offset, 2);
        assert_eq!(parse_expr("").unwrap_err().offset, 0);
    }

    #[test]
    fn domain_errors() {
        let e = parse_expr("sqrt(x)").unwrap();
        assert!(e.eval(-1.0, 0.0).is_err());
        assert!(parse_expr("1/x").unwrap().eval(0.0, 0.0).is_err());
        assert!(parse_expr("exp(x)").unwrap().eval(1000.0, 0.0).is_err());
    }

    #[test]
    fn printing() {
        let e = parse_expr("-x^2 + sin(y)*3").unwrap();
        assert_eq!(e.to_string(), "((-(x ^ 2.0)) + (sin(y) * 3.0))");
    }
}
