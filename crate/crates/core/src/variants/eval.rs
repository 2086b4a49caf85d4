use std::borrow::Cow;

use num_complex::Complex64;
use thiserror::Error;

use super::value::{protected_div, protected_div_complex, Value};
use super::{Primitive, Signal, Variant};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("{prim} takes {expected} arguments, got {found}")]
    Arity {
        prim: Primitive,
        expected: usize,
        found: usize,
    },
    #[error("{prim} cannot take a {found} argument")]
    Kind { prim: Primitive, found: &'static str },
    #[error("{prim} got vectors of lengths {left} and {right}")]
    Length {
        prim: Primitive,
        left: usize,
        right: usize,
    },
    #[error("{prim} is not defined over {domain} values")]
    Domain {
        prim: Primitive,
        domain: &'static str,
    },
    #[error("{variant} agent produced a {found} output")]
    Output { variant: Variant, found: &'static str },
    #[error("window terminal {0} is undefined at this row")]
    Window(String),
}

#[derive(Clone, Copy)]
enum Arg<'a, T> {
    Scalar(T),
    Vector(&'a [T]),
}

impl<'a, T: Copy> Arg<'a, T> {
    fn len(&self) -> usize {
        match self {
            Arg::Scalar(_) => 1,
            Arg::Vector(v) => v.len(),
        }
    }

    fn map<U>(self, f: impl Fn(T) -> U) -> Numeric<U> {
        match self {
            Arg::Scalar(x) => Numeric::Scalar(f(x)),
            Arg::Vector(v) => Numeric::Vector(v.iter().map(|&x| f(x)).collect()),
        }
    }

    fn as_slice(&self) -> Cow<'a, [T]>
    where
        T: Clone,
    {
        match *self {
            Arg::Scalar(x) => Cow::Owned(vec![x]),
            Arg::Vector(v) => Cow::Borrowed(v),
        }
    }
}

enum Numeric<T> {
    Scalar(T),
    Vector(Vec<T>),
}

impl From<Numeric<f64>> for Value {
    fn from(n: Numeric<f64>) -> Value {
        match n {
            Numeric::Scalar(x) => Value::Real(x),
            Numeric::Vector(v) => Value::RealVec(v),
        }
    }
}

impl From<Numeric<Complex64>> for Value {
    fn from(n: Numeric<Complex64>) -> Value {
        match n {
            Numeric::Scalar(x) => Value::Complex(x),
            Numeric::Vector(v) => Value::ComplexVec(v),
        }
    }
}

/// Element-wise binary operation; a scalar operand is replicated to the
/// other operand's length.
fn zip<T: Copy, U>(
    prim: Primitive,
    a: Arg<'_, T>,
    b: Arg<'_, T>,
    f: impl Fn(T, T) -> U,
) -> Result<Numeric<U>, EvalError> {
    Ok(match (a, b) {
        (Arg::Scalar(x), Arg::Scalar(y)) => Numeric::Scalar(f(x, y)),
        (Arg::Scalar(x), Arg::Vector(v)) => Numeric::Vector(v.iter().map(|&y| f(x, y)).collect()),
        (Arg::Vector(v), Arg::Scalar(y)) => Numeric::Vector(v.iter().map(|&x| f(x, y)).collect()),
        (Arg::Vector(v), Arg::Vector(w)) => {
            if v.len() != w.len() {
                return Err(EvalError::Length {
                    prim,
                    left: v.len(),
                    right: w.len(),
                });
            }
            Numeric::Vector(v.iter().zip(w).map(|(&x, &y)| f(x, y)).collect())
        }
    })
}

/// Both operands as equal-length slices, broadcasting a scalar side.
fn aligned<'a, T: Copy>(
    prim: Primitive,
    a: Arg<'a, T>,
    b: Arg<'a, T>,
) -> Result<(Cow<'a, [T]>, Cow<'a, [T]>), EvalError> {
    match (a, b) {
        (Arg::Scalar(x), Arg::Vector(v)) => Ok((Cow::Owned(vec![x; v.len()]), Cow::Borrowed(v))),
        (Arg::Vector(v), Arg::Scalar(y)) => Ok((Cow::Borrowed(v), Cow::Owned(vec![y; v.len()]))),
        _ if a.len() != b.len() => Err(EvalError::Length {
            prim,
            left: a.len(),
            right: b.len(),
        }),
        _ => Ok((a.as_slice(), b.as_slice())),
    }
}

fn real_arg(prim: Primitive, v: &Value) -> Result<Arg<'_, f64>, EvalError> {
    match v {
        Value::Real(x) => Ok(Arg::Scalar(*x)),
        Value::RealVec(v) => Ok(Arg::Vector(v)),
        other => Err(EvalError::Kind {
            prim,
            found: other.kind_name(),
        }),
    }
}

fn complex_arg(prim: Primitive, v: &Value) -> Result<Arg<'_, Complex64>, EvalError> {
    match v {
        Value::Complex(z) => Ok(Arg::Scalar(*z)),
        Value::ComplexVec(v) => Ok(Arg::Vector(v)),
        other => Err(EvalError::Kind {
            prim,
            found: other.kind_name(),
        }),
    }
}

fn boolean(prim: Primitive, v: &Value) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(*b),
        other => Err(EvalError::Kind {
            prim,
            found: other.kind_name(),
        }),
    }
}

fn mean_real(a: Arg<'_, f64>) -> f64 {
    match a {
        Arg::Scalar(x) => x,
        Arg::Vector(v) => v.iter().sum::<f64>() / v.len() as f64,
    }
}

fn mean_complex(a: Arg<'_, Complex64>) -> Complex64 {
    match a {
        Arg::Scalar(z) => z,
        Arg::Vector(v) => v.iter().sum::<Complex64>() / v.len() as f64,
    }
}

fn sample_std(a: Arg<'_, f64>) -> f64 {
    let v = a.as_slice();
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    (ss / (v.len() - 1) as f64).sqrt()
}

fn cumulative_mean<T>(a: Arg<'_, T>) -> Numeric<T>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Div<f64, Output = T>,
{
    match a {
        Arg::Scalar(x) => Numeric::Scalar(x),
        Arg::Vector(v) => {
            let mut out = Vec::with_capacity(v.len());
            let mut acc: Option<T> = None;
            for (i, &x) in v.iter().enumerate() {
                let sum = acc.map_or(x, |s| s + x);
                acc = Some(sum);
                out.push(sum / (i + 1) as f64);
            }
            Numeric::Vector(out)
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn real_op(variant: Variant, prim: Primitive, args: &[Value]) -> Result<Value, EvalError> {
    use Primitive::*;
    let a = real_arg(prim, &args[0])?;
    if prim.arity() == 1 {
        return Ok(match prim {
            Neg => a.map(|x| -x).into(),
            Sin => a.map(f64::sin).into(),
            Cos => a.map(f64::cos).into(),
            Tan => a.map(f64::tan).into(),
            Signum => a.map(sign).into(),
            Mean => Value::Real(mean_real(a)),
            StdVar => Value::Real(sample_std(a)),
            CumMean => cumulative_mean(a).into(),
            _ => {
                return Err(EvalError::Domain {
                    prim,
                    domain: "real",
                })
            }
        });
    }
    let b = real_arg(prim, &args[1])?;
    Ok(match prim {
        Add => zip(prim, a, b, |x, y| x + y)?.into(),
        Sub => zip(prim, a, b, |x, y| x - y)?.into(),
        Mult => zip(prim, a, b, |x, y| x * y)?.into(),
        Div => zip(prim, a, b, protected_div)?.into(),
        Dot => {
            let (x, y) = aligned(prim, a, b)?;
            Value::Real(x.iter().zip(y.iter()).map(|(p, q)| p * q).sum())
        }
        Gt => Value::Real(if mean_real(a) > mean_real(b) { 1.0 } else { -1.0 }),
        GtThan => {
            let (ma, mb) = (mean_real(a), mean_real(b));
            if variant == Variant::Stvgp {
                Value::Bool(ma > mb)
            } else {
                Value::Real(sign(ma - mb))
            }
        }
        SumGt => {
            let (x, y) = aligned(prim, a, b)?;
            Value::Bool(x.iter().sum::<f64>() > y.iter().sum::<f64>())
        }
        _ => {
            return Err(EvalError::Domain {
                prim,
                domain: "real",
            })
        }
    })
}

fn complex_op(prim: Primitive, args: &[Value]) -> Result<Value, EvalError> {
    use Primitive::*;
    let promoted: Vec<Value> = args.iter().map(Value::to_complex).collect();
    let a = complex_arg(prim, &promoted[0])?;
    if prim.arity() == 1 {
        return Ok(match prim {
            Neg => a.map(|z| -z).into(),
            Log => a.map(|z| z.ln()).into(),
            Sqrt => a.map(|z| z.sqrt()).into(),
            Sin => a.map(|z| z.sin()).into(),
            Cos => a.map(|z| z.cos()).into(),
            Tan => a.map(|z| z.tan()).into(),
            Mean => Value::Complex(mean_complex(a)),
            CumMean => cumulative_mean(a).into(),
            _ => {
                return Err(EvalError::Domain {
                    prim,
                    domain: "complex",
                })
            }
        });
    }
    let b = complex_arg(prim, &promoted[1])?;
    Ok(match prim {
        Add => zip(prim, a, b, |x, y| x + y)?.into(),
        Sub => zip(prim, a, b, |x, y| x - y)?.into(),
        Mult => zip(prim, a, b, |x, y| x * y)?.into(),
        Div => zip(prim, a, b, protected_div_complex)?.into(),
        Dot => {
            let (x, y) = aligned(prim, a, b)?;
            Value::Complex(x.iter().zip(y.iter()).map(|(p, q)| p.conj() * q).sum())
        }
        GtThanReal => {
            let re = if mean_complex(a).re > mean_complex(b).re { 1.0 } else { -1.0 };
            Value::Complex(Complex64::new(re, 0.0))
        }
        GtThanComplex => {
            let im = if mean_complex(a).im > mean_complex(b).im { 1.0 } else { -1.0 };
            Value::Complex(Complex64::new(0.0, im))
        }
        _ => {
            return Err(EvalError::Domain {
                prim,
                domain: "complex",
            })
        }
    })
}

fn is_complex(v: &Value) -> bool {
    matches!(v, Value::Complex(_) | Value::ComplexVec(_))
}

/// Applies `prim` with the semantics of `variant`.
///
/// The only primitive whose result depends on the variant is `GT_THAN`,
/// which yields a boolean in STVGP. Real arguments given to a CVGP primitive
/// are embedded with zero imaginary part.
pub fn apply_primitive(
    variant: Variant,
    prim: Primitive,
    args: &[Value],
) -> Result<Value, EvalError> {
    if args.len() != prim.arity() {
        return Err(EvalError::Arity {
            prim,
            expected: prim.arity(),
            found: args.len(),
        });
    }
    use Primitive::*;
    match prim {
        And | Or | Xor => {
            let (a, b) = (boolean(prim, &args[0])?, boolean(prim, &args[1])?);
            Ok(Value::Bool(match prim {
                And => a && b,
                Or => a || b,
                _ => a ^ b,
            }))
        }
        Not => Ok(Value::Bool(!boolean(prim, &args[0])?)),
        IfElse => Ok(if boolean(prim, &args[0])? {
            args[1].clone()
        } else {
            args[2].clone()
        }),
        _ if variant == Variant::Cvgp || args.iter().any(is_complex) => complex_op(prim, args),
        _ => real_op(variant, prim, args),
    }
}

fn threshold(x: f64) -> Signal {
    if !x.is_finite() {
        Signal::Hold
    } else if x >= 1.0 {
        Signal::Buy
    } else if x <= -1.0 {
        Signal::Sell
    } else {
        Signal::Hold
    }
}

/// Turns an agent's output into a trading decision.
///
/// Numeric outputs are reduced to their mean (real part for complex values)
/// and compared against ±1; STVGP outputs are booleans.
pub fn interpret_signal(output: &Value, variant: Variant) -> Result<Signal, EvalError> {
    let wrong = || EvalError::Output {
        variant,
        found: output.kind_name(),
    };
    match (variant, output) {
        (Variant::Stvgp, Value::Bool(true)) => Ok(Signal::Buy),
        (Variant::Stvgp, Value::Bool(false)) => Ok(Signal::Sell),
        (Variant::Stvgp, _) | (_, Value::Bool(_)) => Err(wrong()),
        (_, Value::Real(x)) => Ok(threshold(*x)),
        (_, Value::RealVec(v)) => Ok(threshold(mean_real(Arg::Vector(v)))),
        (_, Value::Complex(z)) => Ok(threshold(z.re)),
        (_, Value::ComplexVec(v)) => Ok(threshold(mean_complex(Arg::Vector(v)).re)),
    }
}
