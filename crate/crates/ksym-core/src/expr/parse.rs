//! Recursive-descent parser for the scalar-field grammar.

use super::{Expr, Func, ParseError, ScalarField};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64, bool), // value, had fractional/exponent part
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::Eof, start));
        }
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => {
                self.pos += 1;
                Tok::Plus
            }
            b'-' => {
                self.pos += 1;
                Tok::Minus
            }
            b'*' => {
                self.pos += 1;
                Tok::Star
            }
            b'/' => {
                self.pos += 1;
                Tok::Slash
            }
            b'^' => {
                self.pos += 1;
                Tok::Caret
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => {
                let mut fractional = false;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if self.pos < self.src.len() && self.src[self.pos] == b'.' {
                    fractional = true;
                    self.pos += 1;
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                }
                if self.pos < self.src.len()
                    && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E')
                {
                    let mark = self.pos;
                    self.pos += 1;
                    if self.pos < self.src.len()
                        && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                    {
                        self.pos += 1;
                    }
                    if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        fractional = true;
                        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                            self.pos += 1;
                        }
                    } else {
                        // `e` starts an identifier, not an exponent.
                        self.pos = mark;
                    }
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    position: start,
                    expected: "number".into(),
                })?;
                Tok::Number(value, fractional)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                Tok::Ident(text.to_string())
            }
            _ => {
                return Err(ParseError::Syntax {
                    position: start,
                    expected: "number, identifier, operator, or parenthesis".into(),
                })
            }
        };
        Ok((tok, start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: Tok,
    current_pos: usize,
    n: usize,
    k: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, n: usize, k: usize) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let (current, current_pos) = lexer.next()?;
        Ok(Parser {
            lexer,
            current,
            current_pos,
            n,
            k,
        })
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let (tok, pos) = self.lexer.next()?;
        self.current = tok;
        self.current_pos = pos;
        Ok(())
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.current == tok {
            self.advance()
        } else {
            Err(ParseError::Syntax {
                position: self.current_pos,
                expected: what.into(),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.current {
                Tok::Plus => {
                    self.advance()?;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.advance()?;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.current {
                Tok::Star => {
                    self.advance()?;
                    let rhs = self.factor()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Tok::Slash => {
                    self.advance()?;
                    let rhs = self.factor()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.current == Tok::Caret {
            self.advance()?;
            let exponent = self.integer_exponent()?;
            return Ok(Expr::Pow(Box::new(base), exponent));
        }
        Ok(base)
    }

    fn integer_exponent(&mut self) -> Result<i32, ParseError> {
        let negative = if self.current == Tok::Minus {
            self.advance()?;
            true
        } else {
            false
        };
        match self.current.clone() {
            Tok::Number(v, fractional) => {
                if fractional || v.fract() != 0.0 || v.abs() > i32::MAX as f64 {
                    return Err(ParseError::BadExponent {
                        position: self.current_pos,
                    });
                }
                self.advance()?;
                let m = v as i32;
                Ok(if negative { -m } else { m })
            }
            _ => Err(ParseError::BadExponent {
                position: self.current_pos,
            }),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.current.clone() {
            Tok::Number(v, _) => {
                self.advance()?;
                Ok(Expr::Lit(v))
            }
            Tok::Minus => {
                self.advance()?;
                let inner = self.atom()?;
                Ok(Expr::Neg(Box::new(inner)))
            }
            Tok::LParen => {
                self.advance()?;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let pos = self.current_pos;
                self.advance()?;
                if let Some(func) = Func::from_name(&name) {
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match self.coordinate(&name) {
                    Some(idx) => Ok(Expr::Var(idx)),
                    None => Err(ParseError::UnknownIdentifier {
                        name,
                        position: pos,
                    }),
                }
            }
            _ => Err(ParseError::Syntax {
                position: self.current_pos,
                expected: "number, coordinate, function call, `(`, or `-`".into(),
            }),
        }
    }

    /// `x1..xn` map to flat indices `0..n`, `y1..y{kn}` to `n..n(k+1)`.
    fn coordinate(&self, name: &str) -> Option<usize> {
        let (prefix, digits) = name.split_at(1);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        // Reject leading zeros so each coordinate has one spelling.
        if digits.len() > 1 && digits.starts_with('0') {
            return None;
        }
        let idx: usize = digits.parse().ok()?;
        match prefix {
            "x" if (1..=self.n).contains(&idx) => Some(idx - 1),
            "y" if (1..=self.n * self.k).contains(&idx) => Some(self.n + idx - 1),
            _ => None,
        }
    }
}

/// Parse `src` as a scalar field over the chart with dimensions `(n, k)`.
pub fn parse_scalar_field(src: &str, n: usize, k: usize) -> Result<ScalarField, ParseError> {
    assert!(n > 0 && k > 0, "chart dimensions must be positive");
    let mut parser = Parser::new(src, n, k)?;
    let ast = parser.expr()?;
    if parser.current != Tok::Eof {
        return Err(ParseError::Syntax {
            position: parser.current_pos,
            expected: "end of input".into(),
        });
    }
    Ok(ScalarField { ast, n, k })
}
