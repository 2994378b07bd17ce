//! Scalar-field expressions over the coordinates of a Darboux chart.
//!
//! A [`ScalarField`] is a parsed expression tree over the chart coordinates
//! `x1..xn, y1..y{kn}`, evaluated either as a plain value or as a second-order
//! jet (value, gradient, Hessian) via [`eval_jet2`]. The grammar is
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' integer)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')' | '-' atom
//! ```
//!
//! with `ident` one of the chart coordinates or a call to
//! `sin`, `cos`, `exp`, `log`, `sqrt`. Exponents are integers.

mod jet;
mod parse;

pub use jet::{eval_jet2, Jet2};
pub use parse::parse_scalar_field;

use std::fmt;

use thiserror::Error;

/// Unary functions admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }
}

/// Expression tree. Variables are stored as flat coordinate indices
/// (`0..n` the x block, `n..n(k+1)` the y block).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Integer power of a subexpression.
    Pow(Box<Expr>, i32),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
}

/// A scalar field on a chart of dimensions `(n, k)`; total dimension `n(k+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub ast: Expr,
    pub n: usize,
    pub k: usize,
}

/// Parse failure, with the byte position in the source text.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {position}: expected {expected}")]
    Syntax { position: usize, expected: String },
    #[error("unknown identifier `{name}` at byte {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("non-integer exponent at byte {position}")]
    BadExponent { position: usize },
}

/// Evaluation failure; carries the offending subexpression rendered as text.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("log of nonpositive argument in `{0}`")]
    LogNonpositive(String),
    #[error("sqrt of nonpositive argument in `{0}`")]
    SqrtNonpositive(String),
    #[error("zero raised to a negative power in `{0}`")]
    ZeroToNegativePower(String),
    #[error("point has length {got}, chart dimension is {expected}")]
    Dimension { expected: usize, got: usize },
}

impl ScalarField {
    /// A constant field on the given chart.
    pub fn constant(value: f64, n: usize, k: usize) -> ScalarField {
        ScalarField {
            ast: Expr::Lit(value),
            n,
            k,
        }
    }

    pub fn dim(&self) -> usize {
        self.n * (self.k + 1)
    }

    /// True when the expression contains no coordinate variable.
    pub fn is_constant(&self) -> bool {
        fn walk(e: &Expr) -> bool {
            match e {
                Expr::Lit(_) => true,
                Expr::Var(_) => false,
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                    walk(a) && walk(b)
                }
                Expr::Pow(a, _) | Expr::Neg(a) | Expr::Call(_, a) => walk(a),
            }
        }
        walk(&self.ast)
    }

    /// True when the expression is the literal zero.
    pub fn is_zero_literal(&self) -> bool {
        matches!(self.ast, Expr::Lit(v) if v == 0.0)
    }

    /// Plain value evaluation, with the same domain checks as the jet walker.
    pub fn eval_value(&self, p: &[f64]) -> Result<f64, EvalError> {
        if p.len() != self.dim() {
            return Err(EvalError::Dimension {
                expected: self.dim(),
                got: p.len(),
            });
        }
        eval_value_rec(&self.ast, p, self.n)
    }

    /// Name of the coordinate with flat index `idx` on this chart.
    pub fn coord_name(&self, idx: usize) -> String {
        coord_name(idx, self.n)
    }
}

pub(crate) fn coord_name(idx: usize, n: usize) -> String {
    if idx < n {
        format!("x{}", idx + 1)
    } else {
        format!("y{}", idx - n + 1)
    }
}

fn eval_value_rec(e: &Expr, p: &[f64], n: usize) -> Result<f64, EvalError> {
    Ok(match e {
        Expr::Lit(v) => *v,
        Expr::Var(i) => p[*i],
        Expr::Add(a, b) => eval_value_rec(a, p, n)? + eval_value_rec(b, p, n)?,
        Expr::Sub(a, b) => eval_value_rec(a, p, n)? - eval_value_rec(b, p, n)?,
        Expr::Mul(a, b) => eval_value_rec(a, p, n)? * eval_value_rec(b, p, n)?,
        Expr::Div(a, b) => {
            let denom = eval_value_rec(b, p, n)?;
            if denom == 0.0 {
                return Err(EvalError::DivisionByZero(format_expr(e, n)));
            }
            eval_value_rec(a, p, n)? / denom
        }
        Expr::Pow(a, m) => {
            let base = eval_value_rec(a, p, n)?;
            if base == 0.0 && *m < 0 {
                return Err(EvalError::ZeroToNegativePower(format_expr(e, n)));
            }
            base.powi(*m)
        }
        Expr::Neg(a) => -eval_value_rec(a, p, n)?,
        Expr::Call(f, a) => {
            let arg = eval_value_rec(a, p, n)?;
            match f {
                Func::Sin => arg.sin(),
                Func::Cos => arg.cos(),
                Func::Exp => arg.exp(),
                Func::Log => {
                    if arg <= 0.0 {
                        return Err(EvalError::LogNonpositive(format_expr(e, n)));
                    }
                    arg.ln()
                }
                Func::Sqrt => {
                    if arg <= 0.0 {
                        return Err(EvalError::SqrtNonpositive(format_expr(e, n)));
                    }
                    arg.sqrt()
                }
            }
        }
    })
}

/// Render a field back to source text. `parse_scalar_field(format_field(f))`
/// is structurally identical to `f`.
pub fn format_field(f: &ScalarField) -> String {
    format_expr(&f.ast, f.n)
}

pub(crate) fn format_expr(e: &Expr, n: usize) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, n, 0).expect("string write");
    s
}

// Precedence levels: 1 additive, 2 multiplicative, 3 power base, 4 atom.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Pow(..) => 3,
        // '-' atom is itself an atom in the grammar.
        Expr::Neg(..) => 4,
        Expr::Lit(_) | Expr::Var(_) | Expr::Call(..) => 4,
    }
}

fn write_expr(out: &mut String, e: &Expr, n: usize, min_prec: u8) -> fmt::Result {
    use fmt::Write;
    let p = prec(e);
    let parens = p < min_prec;
    if parens {
        out.push('(');
    }
    match e {
        Expr::Lit(v) => write!(out, "{v}")?,
        Expr::Var(i) => write!(out, "{}", coord_name(*i, n))?,
        Expr::Add(a, b) => {
            write_expr(out, a, n, 1)?;
            out.push('+');
            write_expr(out, b, n, 2)?;
        }
        Expr::Sub(a, b) => {
            write_expr(out, a, n, 1)?;
            out.push('-');
            write_expr(out, b, n, 2)?;
        }
        Expr::Mul(a, b) => {
            write_expr(out, a, n, 2)?;
            out.push('*');
            write_expr(out, b, n, 3)?;
        }
        Expr::Div(a, b) => {
            write_expr(out, a, n, 2)?;
            out.push('/');
            write_expr(out, b, n, 3)?;
        }
        Expr::Pow(a, m) => {
            write_expr(out, a, n, 4)?;
            write!(out, "^{m}")?;
        }
        Expr::Neg(a) => {
            out.push('-');
            write_expr(out, a, n, 4)?;
        }
        Expr::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write_expr(out, a, n, 0)?;
            out.push(')');
        }
    }
    if parens {
        out.push(')');
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str, n: usize, k: usize) -> ScalarField {
        parse_scalar_field(src, n, k).unwrap()
    }

    #[test]
    fn grammar_examples() {
        let f = parse("y1^2/2", 1, 1);
        assert_eq!(
            f.ast,
            Expr::Div(
                Box::new(Expr::Pow(Box::new(Expr::Var(1)), 2)),
                Box::new(Expr::Lit(2.0))
            )
        );

        let f = parse("x1*sin(y2)", 2, 1);
        assert_eq!(
            f.ast,
            Expr::Mul(
                Box::new(Expr::Var(0)),
                Box::new(Expr::Call(Func::Sin, Box::new(Expr::Var(3))))
            )
        );
    }

    #[test]
    fn unknown_identifier_rejected() {
        let err = parse_scalar_field("foo + 1", 1, 1).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "foo".into(),
                position: 0
            }
        );
        // Coordinate out of the declared chart.
        let err = parse_scalar_field("x3", 2, 1).unwrap_err();
        assert!(matches!(err, ParseError::UnknownIdentifier { .. }));
    }

    #[test]
    fn bad_exponent_rejected() {
        assert!(matches!(
            parse_scalar_field("x1^2.5", 1, 1).unwrap_err(),
            ParseError::BadExponent { .. }
        ));
        assert!(matches!(
            parse_scalar_field("x1^y1", 1, 1).unwrap_err(),
            ParseError::BadExponent { .. }
        ));
    }

    #[test]
    fn format_round_trips_named_cases() {
        for (src, n, k) in [
            ("2", 1, 1),
            ("y1^2/2", 1, 1),
            ("x1*sin(y2)", 2, 1),
            ("-(x1+y1)^3*exp(y1)", 1, 1),
            ("1/(1+x1^2)", 1, 2),
        ] {
            let f = parse(src, n, k);
            let printed = format_field(&f);
            let back = parse(&printed, n, k);
            assert_eq!(f, back, "round-trip of {src} via {printed}");
        }
    }

    #[test]
    fn eval_value_domain_errors() {
        let f = parse("1/x1", 1, 1);
        assert!(matches!(
            f.eval_value(&[0.0, 1.0]),
            Err(EvalError::DivisionByZero(_))
        ));
        let f = parse("log(x1)", 1, 1);
        assert!(matches!(
            f.eval_value(&[-1.0, 0.0]),
            Err(EvalError::LogNonpositive(_))
        ));
        let f = parse("sqrt(x1)", 1, 1);
        assert!(f.eval_value(&[4.0, 0.0]).is_ok());
        assert!(f.eval_value(&[-4.0, 0.0]).is_err());
    }
}
