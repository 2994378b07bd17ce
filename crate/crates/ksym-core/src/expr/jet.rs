//! Second-order truncated Taylor arithmetic: value, gradient, Hessian.

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use super::{format_expr, Expr, EvalError, Func, ScalarField};

/// Value, gradient, and symmetric Hessian of a scalar quantity at a point.
///
/// The Hessian is kept exactly symmetric: every arithmetic rule below only
/// ever adds symmetric matrices (`a b^T + b a^T` patterns and scalings).
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl Jet2 {
    pub fn constant(value: f64, dim: usize) -> Jet2 {
        Jet2 {
            value,
            grad: DVector::zeros(dim),
            hess: DMatrix::zeros(dim, dim),
        }
    }

    /// The coordinate variable with flat index `idx`.
    pub fn var(value: f64, idx: usize, dim: usize) -> Jet2 {
        let mut grad = DVector::zeros(dim);
        grad[idx] = 1.0;
        Jet2 {
            value,
            grad,
            hess: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    /// Chain rule through a scalar function with derivatives `du`, `ddu`
    /// evaluated at `self.value`.
    fn chain(&self, u: f64, du: f64, ddu: f64) -> Jet2 {
        let outer = &self.grad * self.grad.transpose();
        Jet2 {
            value: u,
            grad: &self.grad * du,
            hess: &self.hess * du + outer * ddu,
        }
    }

    pub fn sin(&self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(&self) -> Jet2 {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    /// Natural logarithm; caller checks the argument is positive.
    pub fn ln(&self) -> Jet2 {
        let v = self.value;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    /// Square root; caller checks the argument is positive.
    pub fn sqrt(&self) -> Jet2 {
        let r = self.value.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * r * r))
    }

    /// Integer power. For a zero base the exponent must be nonnegative.
    pub fn powi(&self, m: i32) -> Jet2 {
        match m {
            0 => Jet2::constant(1.0, self.dim()),
            1 => self.clone(),
            _ => {
                let v = self.value;
                let fm = f64::from(m);
                // v = 0 only reaches here with m >= 2; the guards keep the
                // 0^0 = 1 convention out of the derivative terms.
                let u = v.powi(m);
                let du = fm * v.powi(m - 1);
                let ddu = if m == 2 {
                    2.0
                } else {
                    fm * (fm - 1.0) * v.powi(m - 2)
                };
                self.chain(u, du, ddu)
            }
        }
    }

    pub fn recip(&self) -> Jet2 {
        let v = self.value;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    /// Directional derivative along `dir` (coordinate components).
    pub fn directional(&self, dir: &DVector<f64>) -> f64 {
        self.grad.dot(dir)
    }
}

impl Add for &Jet2 {
    type Output = Jet2;
    fn add(self, rhs: &Jet2) -> Jet2 {
        Jet2 {
            value: self.value + rhs.value,
            grad: &self.grad + &rhs.grad,
            hess: &self.hess + &rhs.hess,
        }
    }
}

impl Sub for &Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: &Jet2) -> Jet2 {
        Jet2 {
            value: self.value - rhs.value,
            grad: &self.grad - &rhs.grad,
            hess: &self.hess - &rhs.hess,
        }
    }
}

impl Mul for &Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: &Jet2) -> Jet2 {
        let cross = &self.grad * rhs.grad.transpose();
        Jet2 {
            value: self.value * rhs.value,
            grad: &self.grad * rhs.value + &rhs.grad * self.value,
            hess: &self.hess * rhs.value
                + &rhs.hess * self.value
                + &cross
                + cross.transpose(),
        }
    }
}

impl Div for &Jet2 {
    type Output = Jet2;
    #[allow(clippy::suspicious_arithmetic_impl)] // quotient via the reciprocal chain rule
    fn div(self, rhs: &Jet2) -> Jet2 {
        self * &rhs.recip()
    }
}

impl Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 {
            value: -self.value,
            grad: -&self.grad,
            hess: -&self.hess,
        }
    }
}

macro_rules! owned_ops {
    ($($trait:ident :: $method:ident),*) => {$(
        impl $trait for Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: Jet2) -> Jet2 {
                $trait::$method(&self, &rhs)
            }
        }
        impl $trait<&Jet2> for Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: &Jet2) -> Jet2 {
                $trait::$method(&self, rhs)
            }
        }
    )*};
}
owned_ops!(Add::add, Sub::sub, Mul::mul, Div::div);

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        -&self
    }
}

impl Mul<f64> for &Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: f64) -> Jet2 {
        Jet2 {
            value: self.value * rhs,
            grad: &self.grad * rhs,
            hess: &self.hess * rhs,
        }
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: f64) -> Jet2 {
        &self * rhs
    }
}

/// Evaluate `f` at `p` with exact first and second derivatives.
pub fn eval_jet2(f: &ScalarField, p: &[f64]) -> Result<Jet2, EvalError> {
    let dim = f.dim();
    if p.len() != dim {
        return Err(EvalError::Dimension {
            expected: dim,
            got: p.len(),
        });
    }
    eval_rec(&f.ast, p, f.n, dim)
}

fn eval_rec(e: &Expr, p: &[f64], n: usize, dim: usize) -> Result<Jet2, EvalError> {
    Ok(match e {
        Expr::Lit(v) => Jet2::constant(*v, dim),
        Expr::Var(i) => Jet2::var(p[*i], *i, dim),
        Expr::Add(a, b) => eval_rec(a, p, n, dim)? + eval_rec(b, p, n, dim)?,
        Expr::Sub(a, b) => eval_rec(a, p, n, dim)? - eval_rec(b, p, n, dim)?,
        Expr::Mul(a, b) => eval_rec(a, p, n, dim)? * eval_rec(b, p, n, dim)?,
        Expr::Div(a, b) => {
            let denom = eval_rec(b, p, n, dim)?;
            if denom.value == 0.0 {
                return Err(EvalError::DivisionByZero(format_expr(e, n)));
            }
            eval_rec(a, p, n, dim)? / denom
        }
        Expr::Pow(a, m) => {
            let base = eval_rec(a, p, n, dim)?;
            if base.value == 0.0 && *m < 0 {
                return Err(EvalError::ZeroToNegativePower(format_expr(e, n)));
            }
            base.powi(*m)
        }
        Expr::Neg(a) => -eval_rec(a, p, n, dim)?,
        Expr::Call(func, a) => {
            let arg = eval_rec(a, p, n, dim)?;
            match func {
                Func::Sin => arg.sin(),
                Func::Cos => arg.cos(),
                Func::Exp => arg.exp(),
                Func::Log => {
                    if arg.value <= 0.0 {
                        return Err(EvalError::LogNonpositive(format_expr(e, n)));
                    }
                    arg.ln()
                }
                Func::Sqrt => {
                    if arg.value <= 0.0 {
                        return Err(EvalError::SqrtNonpositive(format_expr(e, n)));
                    }
                    arg.sqrt()
                }
            }
        }
    })
}
