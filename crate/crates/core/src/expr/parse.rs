//! Recursive-descent parser for the ASCII expression grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | '+' unary | power
//! power   := primary ('^' unary)?
//! primary := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus (`-x^2 == -(x^2)`) and is right
//! associative. Exponents must fold to an integer constant. U+2212 is read
//! as `-`.

use super::{Expr, UnaryOp};
use crate::error::ParseError;

#[derive(Clone, Debug, PartialEq)]
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
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

impl Lexer {
    fn run(text: &str) -> Result<Lexer, ParseError> {
        let chars: Vec<char> = text.chars().collect();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let start = i;
            match c {
                c if c.is_whitespace() => {
                    i += 1;
                    continue;
                }
                '+' => toks.push((Tok::Plus, start)),
                '-' | '\u{2212}' => toks.push((Tok::Minus, start)),
                '*' => toks.push((Tok::Star, start)),
                '/' => toks.push((Tok::Slash, start)),
                '^' => toks.push((Tok::Caret, start)),
                '(' => toks.push((Tok::LParen, start)),
                ')' => toks.push((Tok::RParen, start)),
                c if c.is_ascii_digit() || c == '.' => {
                    while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                        i += 1;
                    }
                    if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                        let mut j = i + 1;
                        if j < chars.len() && matches!(chars[j], '+' | '-' | '\u{2212}') {
                            j += 1;
                        }
                        if j < chars.len() && chars[j].is_ascii_digit() {
                            while j < chars.len() && chars[j].is_ascii_digit() {
                                j += 1;
                            }
                            i = j;
                        }
                    }
                    let lexeme: String = chars[start..i]
                        .iter()
                        .map(|&c| if c == '\u{2212}' { '-' } else { c })
                        .collect();
                    let value = lexeme.parse::<f64>().map_err(|_| ParseError::Syntax {
                        position: start,
                        message: format!("malformed number `{lexeme}`"),
                    })?;
                    toks.push((Tok::Num(value), start));
                    continue;
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    toks.push((Tok::Ident(chars[start..i].iter().collect()), start));
                    continue;
                }
                other => {
                    return Err(ParseError::Syntax {
                        position: start,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            }
            i += 1;
        }
        toks.push((Tok::End, chars.len()));
        Ok(Lexer { toks })
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn position(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            position: self.position(),
            message: message.into(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::add(lhs, self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::mul(lhs, self.unary()?);
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::div(lhs, self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(Expr::neg(self.unary()?))
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let position = self.position();
        let exponent = self.unary()?;
        match exponent.as_const() {
            Some(k) if k.fract() == 0.0 && k.abs() <= i32::MAX as f64 => {
                Ok(Expr::powi(base, k as i32))
            }
            _ => Err(ParseError::NonIntegerExponent { position }),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let position = self.position();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::constant(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    let op = match name.as_str() {
                        "sin" => UnaryOp::Sin,
                        "cos" => UnaryOp::Cos,
                        "exp" => UnaryOp::Exp,
                        "log" | "ln" => UnaryOp::Log,
                        "sqrt" => UnaryOp::Sqrt,
                        _ => return Err(ParseError::UnknownFunction { name, position }),
                    };
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::unary(op, arg));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Expr::var(i)),
                    None => Err(ParseError::UndeclaredVariable { name, position }),
                }
            }
            Tok::End => Err(ParseError::Syntax {
                position,
                message: "unexpected end of input".into(),
            }),
            other => Err(ParseError::Syntax {
                position,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax("expected `)`"))
        }
    }
}

/// Parses `text` with variables resolved against `variables` (index = position).
pub fn parse(text: &str, variables: &[String]) -> Result<Expr, ParseError> {
    let lexer = Lexer::run(text)?;
    let mut parser = Parser {
        toks: lexer.toks,
        pos: 0,
        vars: variables,
    };
    let e = parser.expr()?;
    if *parser.peek() != Tok::End {
        return Err(parser.syntax("trailing input"));
    }
    Ok(e)
}
