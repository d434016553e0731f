//! Surface syntax for scalar coefficient expressions.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := ['-'] atom
//! atom   := number | identifier | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp
//! ```

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            _ => None,
        }
    }
}

/// Location of a token, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Syntax {
    Num(f64),
    Ident(String, Span),
    Neg(Box<Syntax>),
    Bin(BinOp, Box<Syntax>, Box<Syntax>),
    Call(Func, Box<Syntax>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "identifier '{s}'"),
            Tok::Plus => f.write_str("'+'"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Star => f.write_str("'*'"),
            Tok::Slash => f.write_str("'/'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, column: col };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((tok, span));
            col += 1;
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
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
            let value: f64 = text.parse().map_err(|_| ParseError {
                line: span.line,
                column: span.column,
                message: format!("malformed number '{text}'"),
            })?;
            out.push((Tok::Num(value), span));
            col += i - start;
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push((Tok::Ident(text), span));
            col += i - start;
            continue;
        }
        return Err(ParseError {
            line,
            column: col,
            message: format!("unexpected character '{c}'"),
        });
    }
    out.push((Tok::End, Span { line, column: col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: String) -> Result<T, ParseError> {
        let s = self.span();
        Err(ParseError {
            line: s.line,
            column: s.column,
            message,
        })
    }

    fn expr(&mut self) -> Result<Syntax, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Syntax::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Syntax, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Syntax::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Syntax, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.atom()?;
            return Ok(Syntax::Neg(Box::new(inner)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Syntax, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Syntax::Num(v))
            }
            Tok::Ident(name) => {
                let (_, span) = self.bump();
                if let Some(func) = Func::from_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return self.error(format!("expected '(' after '{name}', found {}", self.peek()));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Syntax::Call(func, Box::new(arg)))
                } else {
                    Ok(Syntax::Ident(name, span))
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            other => self.error(format!("expected a number, identifier, function or '(', found {other}")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected ')', found {}", self.peek()))
        }
    }
}

/// Parses `src` into a syntax tree. Identifiers are not resolved here.
pub fn parse(src: &str) -> Result<Syntax, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0 };
    let tree = p.expr()?;
    if *p.peek() != Tok::End {
        return p.error(format!("unexpected {} after expression", p.peek()));
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_associativity() {
        let t = parse("a - b - c * d / e").unwrap();
        let expected = Syntax::Bin(
            BinOp::Sub,
            Box::new(Syntax::Bin(
                BinOp::Sub,
                Box::new(Syntax::Ident("a".into(), Span { line: 1, column: 1 })),
                Box::new(Syntax::Ident("b".into(), Span { line: 1, column: 5 })),
            )),
            Box::new(Syntax::Bin(
                BinOp::Div,
                Box::new(Syntax::Bin(
                    BinOp::Mul,
                    Box::new(Syntax::Ident("c".into(), Span { line: 1, column: 9 })),
                    Box::new(Syntax::Ident("d".into(), Span { line: 1, column: 13 })),
                )),
                Box::new(Syntax::Ident("e".into(), Span { line: 1, column: 17 })),
            )),
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn numbers_with_exponents() {
        assert_eq!(parse("1.5e-3").unwrap(), Syntax::Num(1.5e-3));
        assert_eq!(parse("2E2").unwrap(), Syntax::Num(200.0));
    }

    #[test]
    fn unary_minus_binds_to_atom() {
        let t = parse("-x*y").unwrap();
        match t {
            Syntax::Bin(BinOp::Mul, lhs, _) => assert!(matches!(*lhs, Syntax::Neg(_))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unclosed_call_reports_column() {
        let err = parse("sin(").unwrap_err();
        assert_eq!((err.line, err.column), (1, 5));
    }

    #[test]
    fn error_on_second_line() {
        let err = parse("x +\n  * y").unwrap_err();
        assert_eq!((err.line, err.column), (2, 3));
    }

    #[test]
    fn function_requires_parenthesis() {
        let err = parse("cos x").unwrap_err();
        assert_eq!(err.column, 5);
    }

    #[test]
    fn trailing_garbage() {
        let err = parse("x y").unwrap_err();
        assert_eq!(err.column, 3);
        assert!(parse("x $").is_err());
    }
}
