use num_complex::Complex64;

/// Runtime value produced by evaluating a node.
///
/// Scalars stand for length-1 vectors. Vectors built from window terminals
/// always have 21 elements; primitives themselves accept any length so long
/// as both operands agree after broadcasting.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    RealVec(Vec<f64>),
    Complex(Complex64),
    ComplexVec(Vec<Complex64>),
    Bool(bool),
}

impl Value {
    pub fn is_scalar(&self) -> bool {
        matches!(self, Value::Real(_) | Value::Complex(_) | Value::Bool(_))
    }

    pub fn len(&self) -> usize {
        match self {
            Value::RealVec(v) => v.len(),
            Value::ComplexVec(v) => v.len(),
            _ => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Real(_) => "real scalar",
            Value::RealVec(_) => "real vector",
            Value::Complex(_) => "complex scalar",
            Value::ComplexVec(_) => "complex vector",
            Value::Bool(_) => "boolean",
        }
    }

    /// Embeds a real value in the complex domain with zero imaginary part.
    pub fn to_complex(&self) -> Value {
        match self {
            Value::Real(x) => Value::Complex(Complex64::new(*x, 0.0)),
            Value::RealVec(v) => {
                Value::ComplexVec(v.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            }
            other => other.clone(),
        }
    }
}

/// Replicates a scalar `len` times. Non-scalars are returned unchanged.
pub fn broadcast(scalar: &Value, len: usize) -> Value {
    match scalar {
        Value::Real(x) => Value::RealVec(vec![*x; len]),
        Value::Complex(z) => Value::ComplexVec(vec![*z; len]),
        other => other.clone(),
    }
}

/// Division that yields 1 when the denominator is zero.
pub fn protected_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        1.0
    } else {
        a / b
    }
}

/// Complex division yielding `1 + 0i` when the denominator is exactly zero.
pub fn protected_div_complex(a: Complex64, b: Complex64) -> Complex64 {
    if b.re == 0.0 && b.im == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        a / b
    }
}
