//! Coordinate expressions and their jets.
//!
//! Metric components, vector-field components and scalar functions are all
//! written as small expression trees over the chart coordinates `x1..xn`.
//! [`Expr::jet`] propagates truncated Taylor data through the tree, so every
//! derivative up to order three is exact up to rounding.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := atom ('^' exponent)?
//! exponent:= ['-'|'+'] INT | '(' ['-'|'+'] INT ')'
//! atom    := NUMBER | 'x' INT | FUNC '(' expr ')' | '(' expr ')'
//! FUNC    := sin | cos | exp | log | sqrt
//! ```

mod jet;
mod parse;

use std::fmt;
use std::ops;

pub use jet::Jet;
pub use parse::parse;

use crate::error::{Error, Result};

/// Highest derivative order carried by a [`Jet`].
pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    /// Value and first three derivatives at `x`, or a description of the
    /// domain violation.
    fn derivatives(self, x: f64, order: usize) -> std::result::Result<[f64; 4], &'static str> {
        Ok(match self {
            Func::Sin => {
                let (s, c) = x.sin_cos();
                [s, c, -s, -c]
            }
            Func::Cos => {
                let (s, c) = x.sin_cos();
                [c, -s, -c, s]
            }
            Func::Exp => {
                let e = x.exp();
                [e; 4]
            }
            Func::Log => {
                if x <= 0.0 {
                    return Err("log of a non-positive number");
                }
                let r = 1.0 / x;
                [x.ln(), r, -r * r, 2.0 * r * r * r]
            }
            Func::Sqrt => {
                if x < 0.0 {
                    return Err("sqrt of a negative number");
                }
                if x == 0.0 && order > 0 {
                    return Err("sqrt is not differentiable at zero");
                }
                let s = x.sqrt();
                if x == 0.0 {
                    [0.0; 4]
                } else {
                    let r = 1.0 / x;
                    [s, 0.5 * s * r, -0.25 * s * r * r, 0.375 * s * r * r * r]
                }
            }
        })
    }
}

/// An expression over chart coordinates. Variables are 0-based internally
/// and print as `x1..xn`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Neg(Box<Expr>),
    Func(Func, Box<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    /// Coordinate `x_{index+1}`.
    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    pub fn powi(self, exponent: i32) -> Expr {
        Expr::Pow(Box::new(self), exponent)
    }

    pub fn apply(func: Func, arg: Expr) -> Expr {
        Expr::Func(func, Box::new(arg))
    }

    pub fn sin(self) -> Expr {
        Expr::apply(Func::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::apply(Func::Cos, self)
    }

    pub fn exp(self) -> Expr {
        Expr::apply(Func::Exp, self)
    }

    pub fn ln(self) -> Expr {
        Expr::apply(Func::Log, self)
    }

    pub fn sqrt(self) -> Expr {
        Expr::apply(Func::Sqrt, self)
    }

    /// `x1^2 + ... + xn^2`.
    pub fn norm_squared(dim: usize) -> Expr {
        (0..dim)
            .map(|i| Expr::var(i).powi(2))
            .reduce(|a, b| a + b)
            .unwrap_or(Expr::Const(0.0))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    /// Largest variable index used plus one (0 for constant expressions).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.arity().max(b.arity())
            }
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Func(_, a) => a.arity(),
        }
    }

    /// Replaces every variable `x_i` by `values[i]`.
    pub fn substitute(&self, values: &[Expr]) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => values[*i].clone(),
            Expr::Add(a, b) => a.substitute(values) + b.substitute(values),
            Expr::Sub(a, b) => a.substitute(values) - b.substitute(values),
            Expr::Mul(a, b) => a.substitute(values) * b.substitute(values),
            Expr::Div(a, b) => a.substitute(values) / b.substitute(values),
            Expr::Pow(a, m) => a.substitute(values).powi(*m),
            Expr::Neg(a) => -a.substitute(values),
            Expr::Func(f, a) => Expr::apply(*f, a.substitute(values)),
        }
    }

    /// Plain value at `p`.
    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => p[*i],
            Expr::Add(a, b) => a.eval(p)? + b.eval(p)?,
            Expr::Sub(a, b) => a.eval(p)? - b.eval(p)?,
            Expr::Mul(a, b) => a.eval(p)? * b.eval(p)?,
            Expr::Div(a, b) => {
                let den = b.eval(p)?;
                if den == 0.0 {
                    return Err(self.domain_error("division by zero"));
                }
                a.eval(p)? / den
            }
            Expr::Pow(a, m) => {
                let base = a.eval(p)?;
                if base == 0.0 && *m < 0 {
                    return Err(self.domain_error("negative power of zero"));
                }
                base.powi(*m)
            }
            Expr::Neg(a) => -a.eval(p)?,
            Expr::Func(f, a) => {
                let x = a.eval(p)?;
                f.derivatives(x, 0).map_err(|what| self.domain_error(what))?[0]
            }
        };
        if !v.is_finite() {
            return Err(self.domain_error("non-finite value"));
        }
        Ok(v)
    }

    /// Value and partial derivatives up to `order` (at most 3) at `p`.
    pub fn jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let n = p.len();
        let out = match self {
            Expr::Const(c) => Jet::constant(n, order, *c),
            Expr::Var(i) => Jet::variable(n, order, *i, p[*i]),
            Expr::Add(a, b) => a.jet(p, order)?.add(&b.jet(p, order)?),
            Expr::Sub(a, b) => a.jet(p, order)?.sub(&b.jet(p, order)?),
            Expr::Mul(a, b) => a.jet(p, order)?.mul(&b.jet(p, order)?),
            Expr::Div(a, b) => {
                let den = b.jet(p, order)?;
                let x = den.value();
                if x == 0.0 {
                    return Err(self.domain_error("division by zero"));
                }
                let r = 1.0 / x;
                let recip = den.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]);
                a.jet(p, order)?.mul(&recip)
            }
            Expr::Pow(a, m) => {
                let base = a.jet(p, order)?;
                let x = base.value();
                if x == 0.0 && *m < 0 {
                    return Err(self.domain_error("negative power of zero"));
                }
                base.compose(power_derivatives(x, *m))
            }
            Expr::Neg(a) => a.jet(p, order)?.neg(),
            Expr::Func(f, a) => {
                let inner = a.jet(p, order)?;
                let d = f
                    .derivatives(inner.value(), order)
                    .map_err(|what| self.domain_error(what))?;
                inner.compose(d)
            }
        };
        if !out.is_finite() {
            return Err(self.domain_error("non-finite value"));
        }
        Ok(out)
    }

    fn domain_error(&self, what: &str) -> Error {
        Error::Domain {
            what: what.to_string(),
            subexpr: self.to_string(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if c.is_sign_negative() => 3,
            Expr::Pow(..) => 4,
            Expr::Const(_) | Expr::Var(_) | Expr::Func(..) => 5,
        }
    }
}

/// `x^m` and its first three derivatives; falling-factorial zeros are kept
/// exact so that e.g. `x^2` has vanishing third derivative at the origin.
fn power_derivatives(x: f64, m: i32) -> [f64; 4] {
    let mut out = [0.0; 4];
    let mut coeff = 1.0;
    for (k, slot) in out.iter_mut().enumerate() {
        if coeff == 0.0 {
            break;
        }
        *slot = coeff * x.powi(m - k as i32);
        coeff *= (m - k as i32) as f64;
    }
    out
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Add(a, b) => {
                write_child(f, a, 1)?;
                f.write_str(" + ")?;
                write_child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                write_child(f, a, 1)?;
                f.write_str(" - ")?;
                write_child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_child(f, a, 2)?;
                f.write_str("*")?;
                write_child(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_child(f, a, 2)?;
                f.write_str("/")?;
                write_child(f, b, 3)
            }
            Expr::Pow(a, m) => {
                write_child(f, a, 5)?;
                if *m < 0 {
                    write!(f, "^({m})")
                } else {
                    write!(f, "^{m}")
                }
            }
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, 3)
            }
            Expr::Func(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::Const(c)
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
        impl ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$variant(Box::new(self), Box::new(Expr::Const(rhs)))
            }
        }
        impl ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(Expr::Const(self)), Box::new(rhs))
            }
        }
    };
}

binary_op!(Add, add, Add);
binary_op!(Sub, sub, Sub);
binary_op!(Mul, mul, Mul);
binary_op!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_reparses_to_same_values() {
        let sources = [
            "x1^2 + x2^2",
            "-x1^2",
            "(-x1)^2",
            "4/(1 + x1^2 + x2^2)^2",
            "x1 - (x2 - x1)",
            "x1/(x2*x1)",
            "2^(-2)*x1",
            "exp(-2*sin(x1))*cos(x2)",
            "1e-3*x1 - -x2",
        ];
        let p = [0.7, -1.3];
        for src in sources {
            let e = parse(src, 2).unwrap();
            let printed = e.to_string();
            let again = parse(&printed, 2).unwrap();
            assert_eq!(e.eval(&p).unwrap(), again.eval(&p).unwrap(), "{src} -> {printed}");
        }
    }

    #[test]
    fn substitute_composes() {
        let e = parse("x1*x2 + x2", 2).unwrap();
        let s = e.substitute(&[Expr::var(1), Expr::Const(3.0)]);
        assert_eq!(s.eval(&[10.0, 2.0]).unwrap(), 2.0 * 3.0 + 3.0);
    }

    #[test]
    fn power_derivatives_at_origin() {
        assert_eq!(power_derivatives(0.0, 2), [0.0, 0.0, 2.0, 0.0]);
        assert_eq!(power_derivatives(0.0, 0), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(power_derivatives(2.0, -1), [0.5, -0.25, 0.25, -0.375]);
    }

    #[test]
    fn eval_domain_errors_name_the_subexpression() {
        let e = parse("1 + log(x1 - 1)", 1).unwrap();
        match e.eval(&[1.0]) {
            Err(Error::Domain { subexpr, .. }) => assert_eq!(subexpr, "log(x1 - 1.0)"),
            other => panic!("unexpected {other:?}"),
        }
        let d = parse("1/(x1 - x1)", 1).unwrap();
        assert!(matches!(d.jet(&[0.3], 1), Err(Error::Domain { .. })));
        assert!(matches!(parse("sqrt(x1)", 1).unwrap().jet(&[0.0], 1), Err(Error::Domain { .. })));
        assert_eq!(parse("sqrt(x1)", 1).unwrap().eval(&[0.0]).unwrap(), 0.0);
    }
}
