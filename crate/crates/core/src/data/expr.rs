//! Arithmetic expressions over named channels and constants.
//!
//! Grammar, loosest first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | identifier | '(' expr ')'
//! ```
//!
//! `^` is right associative and binds tighter than unary minus, so `-2^2`
//! is -4 and `2^-1` is 0.5. `×`, `÷`, `·` and `−` are accepted as operator
//! spellings. Juxtaposition is not multiplication.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("column {column}: {message}")]
pub struct ParseError {
    /// 1-based character column.
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound identifier `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite result")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some((col, Tok::Ident(_) | Tok::Num(_) | Tok::LParen)) => Err(ParseError {
                column: col,
                message: "expected an operator (implicit multiplication is not supported)".into(),
            }),
            Some((col, t)) => Err(ParseError {
                column: col,
                message: format!("unexpected `{t}`"),
            }),
        }
    }

    pub fn eval(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(x) => *x,
            Expr::Var(name) => lookup(name).ok_or_else(|| EvalError::Unbound(name.clone()))?,
            Expr::Neg(e) => -e.eval(lookup)?,
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval(lookup)?, b.eval(lookup)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        x / y
                    }
                    BinOp::Pow => x.powf(y),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    pub fn identifiers(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(e) => e.collect(out),
            Expr::Bin(_, a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }
}

/// Fully parenthesized canonical form; parses back to an equal tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

/// Parses and evaluates in one step.
pub fn evaluate_expression(src: &str, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, ExprError> {
    Ok(Expr::parse(src)?.eval(lookup)?)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(BinOp),
    LParen,
    RParen,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(x) => write!(f, "{x}"),
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Op(op) => write!(f, "{}", op.symbol()),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        let op = match c {
            '+' => Some(BinOp::Add),
            '-' | '\u{2212}' => Some(BinOp::Sub),
            '*' | '\u{00d7}' | '\u{00b7}' => Some(BinOp::Mul),
            '/' | '\u{00f7}' => Some(BinOp::Div),
            '^' => Some(BinOp::Pow),
            _ => None,
        };
        if let Some(op) = op {
            out.push((col, Tok::Op(op)));
            i += 1;
        } else if c == '(' {
            out.push((col, Tok::LParen));
            i += 1;
        } else if c == ')' {
            out.push((col, Tok::RParen));
            i += 1;
        } else if c.is_whitespace() {
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
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| ParseError {
                column: col,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((col, Tok::Num(v)));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((col, Tok::Ident(chars[start..i].iter().collect())));
        } else {
            return Err(ParseError {
                column: col,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<(usize, &Tok)> {
        self.tokens.get(self.pos).map(|(c, t)| (*c, t))
    }

    fn end_column(&self) -> usize {
        self.tokens.last().map_or(1, |(c, _)| c + 1)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some((_, Tok::Op(op @ (BinOp::Add | BinOp::Sub)))) = self.peek() {
            let op = *op;
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some((_, Tok::Op(op @ (BinOp::Mul | BinOp::Div)))) = self.peek() {
            let op = *op;
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some((_, Tok::Op(BinOp::Sub))) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some((_, Tok::Op(BinOp::Add))) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if let Some((_, Tok::Op(BinOp::Pow))) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some((col, tok)) = self.peek() else {
            return Err(ParseError {
                column: self.end_column(),
                message: "unexpected end of expression".into(),
            });
        };
        let tok = tok.clone();
        self.pos += 1;
        match tok {
            Tok::Num(x) => Ok(Expr::Num(x)),
            Tok::Ident(s) => Ok(Expr::Var(s)),
            Tok::LParen => {
                let e = self.expr()?;
                match self.peek() {
                    Some((_, Tok::RParen)) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    Some((c, t)) => Err(ParseError {
                        column: c,
                        message: format!("expected `)`, found `{t}`"),
                    }),
                    None => Err(ParseError {
                        column: self.end_column(),
                        message: "unclosed `(`".into(),
                    }),
                }
            }
            t => Err(ParseError {
                column: col,
                message: format!("unexpected `{t}`"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn eval(src: &str, vars: &[(&str, f64)]) -> Result<f64, ExprError> {
        let m: HashMap<String, f64> = vars.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        evaluate_expression(src, &|n| m.get(n).copied())
    }

    #[test]
    fn precedence() {
        assert_eq!(eval("1 + 2 * 3", &[]).unwrap(), 7.0);
        assert_eq!(eval("2 ^ 3 ^ 2", &[]).unwrap(), 512.0);
        assert_eq!(eval("-2 ^ 2", &[]).unwrap(), -4.0);
        assert_eq!(eval("2 ^ -1", &[]).unwrap(), 0.5);
        assert_eq!(eval("8 / 4 / 2", &[]).unwrap(), 1.0);
        assert_eq!(eval("10 - 4 - 3", &[]).unwrap(), 3.0);
        assert_eq!(eval("(1 + 2) * 3", &[]).unwrap(), 9.0);
        assert_eq!(eval("1.5e2 + .5", &[]).unwrap(), 150.5);
    }

    #[test]
    fn wind_force() {
        let v = eval(
            "average_density_of_air_mass_at_sea_level * sensor_wind_speed^2",
            &[("average_density_of_air_mass_at_sea_level", 1.225), ("sensor_wind_speed", 10.0)],
        )
        .unwrap();
        assert!((v - 122.5).abs() < 1e-12);
        assert_eq!(eval("density * speed^2", &[("density", 1.0), ("speed", 2.0)]).unwrap(), 4.0);
    }

    #[test]
    fn unicode_operators() {
        assert_eq!(eval("6 × 2 ÷ 4 − 1", &[]).unwrap(), 2.0);
    }

    #[test]
    fn errors() {
        assert_eq!(eval("a / b", &[("a", 1.0), ("b", 0.0)]), Err(ExprError::Eval(EvalError::DivisionByZero)));
        assert_eq!(eval("a + 1", &[]), Err(ExprError::Eval(EvalError::Unbound("a".into()))));
        assert_eq!(eval("10 ^ 400", &[]), Err(ExprError::Eval(EvalError::NonFinite)));
        assert!(matches!(eval("density speed", &[]), Err(ExprError::Parse(ParseError { column: 9, .. }))));
        assert!(matches!(eval("(1 + 2", &[]), Err(ExprError::Parse(_))));
        assert!(matches!(eval("", &[]), Err(ExprError::Parse(_))));
        assert!(matches!(eval("1 + $", &[]), Err(ExprError::Parse(ParseError { column: 5, .. }))));
    }

    #[test]
    fn display_round_trip() {
        let e = Expr::parse("-a ^ 2 * (b - 3) / c + 1e-3").unwrap();
        assert_eq!(Expr::parse(&e.to_string()).unwrap(), e);
        assert_eq!(e.identifiers().into_iter().collect::<Vec<_>>(), vec!["a", "b", "c"]);
    }
}
