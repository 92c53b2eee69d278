//! Tiny arithmetic expression grammar for user-supplied coefficient
//! functions.
//!
//! Grammar (usual precedence, `^` binds tightest and is right-associative):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?
//! atom   := number | 'x' | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Supported functions: `exp`, `log`, `abs`, `sqrt`, `pow(a, b)`,
//! `min(a, b)`, `max(a, b)`. The single free variable is `x`.

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Abs(Box<Expr>),
    Sqrt(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Parses the textual form of an expression.
    pub fn parse(input: &str) -> Result<Expr> {
        let tokens = tokenize(input)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::FunctionSpec(format!(
                "unexpected trailing input at token {} in {input:?}",
                p.pos
            )));
        }
        Ok(e)
    }

    /// Evaluates the expression at `x`.
    pub fn eval<F: Real>(&self, x: F) -> F {
        match self {
            Expr::Const(c) => F::of(*c),
            Expr::Var => x,
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Expr::Exp(a) => a.eval(x).exp(),
            Expr::Log(a) => a.eval(x).ln(),
            Expr::Abs(a) => a.eval(x).abs(),
            Expr::Sqrt(a) => a.eval(x).sqrt(),
            Expr::Min(a, b) => a.eval(x).min(b.eval(x)),
            Expr::Max(a, b) => a.eval(x).max(b.eval(x)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn tokenize(input: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let bytes: Vec<char> = input.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' | '\n' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' | '\u{2212}' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            ',' => {
                out.push(Token::Comma);
                i += 1;
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == '.'
                        || bytes[i] == 'e'
                        || bytes[i] == 'E'
                        || ((bytes[i] == '+' || bytes[i] == '-')
                            && i > start
                            && (bytes[i - 1] == 'e' || bytes[i - 1] == 'E')))
                {
                    i += 1;
                }
                let s: String = bytes[start..i].iter().collect();
                let v = s
                    .parse::<f64>()
                    .map_err(|_| Error::FunctionSpec(format!("bad number {s:?}")))?;
                out.push(Token::Num(v));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(bytes[start..i].iter().collect()));
            }
            _ => {
                return Err(Error::FunctionSpec(format!(
                    "unexpected character {c:?} in expression"
                )))
            }
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

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Token) -> Result<()> {
        match self.bump() {
            Some(got) if got == t => Ok(()),
            got => Err(Error::FunctionSpec(format!("expected {t:?}, got {got:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut e = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    e = Expr::Add(Box::new(e), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.bump();
                    e = Expr::Sub(Box::new(e), Box::new(self.term()?));
                }
                _ => return Ok(e),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut e = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.bump();
                    e = Expr::Mul(Box::new(e), Box::new(self.factor()?));
                }
                Some(Token::Slash) => {
                    self.bump();
                    e = Expr::Div(Box::new(e), Box::new(self.factor()?));
                }
                _ => return Ok(e),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.bump();
            let exp = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Some(Token::Ident(name)) => {
                if name == "x" {
                    return Ok(Expr::Var);
                }
                if name == "pi" {
                    return Ok(Expr::Const(std::f64::consts::PI));
                }
                if name == "e" {
                    return Ok(Expr::Const(std::f64::consts::E));
                }
                if name == "inf" {
                    return Ok(Expr::Const(f64::INFINITY));
                }
                self.expect(Token::LParen)?;
                let first = self.expr()?;
                let mut args = vec![first];
                while matches!(self.peek(), Some(Token::Comma)) {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect(Token::RParen)?;
                let arity = |n: usize| -> Result<()> {
                    if args.len() == n {
                        Ok(())
                    } else {
                        Err(Error::FunctionSpec(format!(
                            "{name} takes {n} argument(s), got {}",
                            args.len()
                        )))
                    }
                };
                match name.as_str() {
                    "exp" => {
                        arity(1)?;
                        Ok(Expr::Exp(Box::new(args.pop().unwrap())))
                    }
                    "log" => {
                        arity(1)?;
                        Ok(Expr::Log(Box::new(args.pop().unwrap())))
                    }
                    "abs" => {
                        arity(1)?;
                        Ok(Expr::Abs(Box::new(args.pop().unwrap())))
                    }
                    "sqrt" => {
                        arity(1)?;
                        Ok(Expr::Sqrt(Box::new(args.pop().unwrap())))
                    }
                    "pow" => {
                        arity(2)?;
                        let b = args.pop().unwrap();
                        let a = args.pop().unwrap();
                        Ok(Expr::Pow(Box::new(a), Box::new(b)))
                    }
                    "min" => {
                        arity(2)?;
                        let b = args.pop().unwrap();
                        let a = args.pop().unwrap();
                        Ok(Expr::Min(Box::new(a), Box::new(b)))
                    }
                    "max" => {
                        arity(2)?;
                        let b = args.pop().unwrap();
                        let a = args.pop().unwrap();
                        Ok(Expr::Max(Box::new(a), Box::new(b)))
                    }
                    _ => Err(Error::FunctionSpec(format!("unknown function {name:?}"))),
                }
            }
            t => Err(Error::FunctionSpec(format!("unexpected token {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(s: &str, x: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(eval("(1 + 2) * 3", 0.0), 9.0);
        assert_eq!(eval("2 ^ 3 ^ 2", 0.0), 512.0); // right-assoc
        assert_eq!(eval("-x^2", 3.0), -9.0);
        assert_eq!(eval("6 / 3 / 2", 0.0), 1.0);
    }

    #[test]
    fn functions() {
        assert!((eval("exp(log(x))", 2.5) - 2.5).abs() < 1e-14);
        assert_eq!(eval("abs(-x)", 4.0), 4.0);
        assert_eq!(eval("pow(x, 3)", 2.0), 8.0);
        assert_eq!(eval("min(x, 0)", -1.5), -1.5);
        assert_eq!(eval("min(x, 0)", 1.5), 0.0);
        assert_eq!(eval("sqrt(x)", 9.0), 3.0);
    }

    #[test]
    fn scientific_notation() {
        assert_eq!(eval("1e-3 + 2.5E2", 0.0), 250.001);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("x +").is_err());
        assert!(Expr::parse("foo(x)").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("sin(x)").is_err());
    }
}
