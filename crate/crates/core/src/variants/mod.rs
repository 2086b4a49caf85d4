//! Primitive sets, value domain and evaluation semantics of the four
//! genetic-programming variants.

mod eval;
mod tree;
mod value;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::Feature;

pub use eval::{apply_primitive, interpret_signal, EvalError};
pub use tree::{ExprTree, Node, ParseError, RowContext, TypeViolation};
pub use value::{broadcast, protected_div, protected_div_complex, Value};

/// Which genetic-programming flavour a tree belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "GP")]
    Gp,
    #[serde(rename = "VGP")]
    Vgp,
    #[serde(rename = "CVGP")]
    Cvgp,
    #[serde(rename = "STVGP")]
    Stvgp,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Gp, Variant::Vgp, Variant::Cvgp, Variant::Stvgp];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Gp => "GP",
            Variant::Vgp => "VGP",
            Variant::Cvgp => "CVGP",
            Variant::Stvgp => "STVGP",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("unknown variant `{0}` (expected GP, VGP, CVGP or STVGP)")]
pub struct UnknownVariant(String);

impl FromStr for Variant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownVariant(s.to_string()))
    }
}

/// Static type of a node's result. Scalars and vectors share `Num` because
/// broadcasting makes them interchangeable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Num,
    Bool,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Num => "numeric",
            Kind::Bool => "boolean",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Primitive {
    Add,
    Mult,
    Sub,
    Div,
    Dot,
    Neg,
    Sin,
    Cos,
    Tan,
    Signum,
    Gt,
    Mean,
    StdVar,
    CumMean,
    GtThan,
    Log,
    Sqrt,
    GtThanReal,
    GtThanComplex,
    SumGt,
    And,
    Or,
    Xor,
    Not,
    IfElse,
}

impl Primitive {
    pub const ALL: [Primitive; 25] = [
        Primitive::Add,
        Primitive::Mult,
        Primitive::Sub,
        Primitive::Div,
        Primitive::Dot,
        Primitive::Neg,
        Primitive::Sin,
        Primitive::Cos,
        Primitive::Tan,
        Primitive::Signum,
        Primitive::Gt,
        Primitive::Mean,
        Primitive::StdVar,
        Primitive::CumMean,
        Primitive::GtThan,
        Primitive::Log,
        Primitive::Sqrt,
        Primitive::GtThanReal,
        Primitive::GtThanComplex,
        Primitive::SumGt,
        Primitive::And,
        Primitive::Or,
        Primitive::Xor,
        Primitive::Not,
        Primitive::IfElse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Add => "ADD",
            Primitive::Mult => "MULT",
            Primitive::Sub => "SUB",
            Primitive::Div => "DIV",
            Primitive::Dot => "DOT",
            Primitive::Neg => "NEG",
            Primitive::Sin => "SIN",
            Primitive::Cos => "COS",
            Primitive::Tan => "TAN",
            Primitive::Signum => "SIGNUM",
            Primitive::Gt => "GT",
            Primitive::Mean => "MEAN",
            Primitive::StdVar => "STD_VAR",
            Primitive::CumMean => "CUM_MEAN",
            Primitive::GtThan => "GT_THAN",
            Primitive::Log => "LOG",
            Primitive::Sqrt => "SQRT",
            Primitive::GtThanReal => "GT_THAN_REAL",
            Primitive::GtThanComplex => "GT_THAN_COMPLEX",
            Primitive::SumGt => "SUM_GT",
            Primitive::And => "AND",
            Primitive::Or => "OR",
            Primitive::Xor => "XOR",
            Primitive::Not => "NOT",
            Primitive::IfElse => "IF_ELSE",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Primitive::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn arity(self) -> usize {
        use Primitive::*;
        match self {
            Neg | Sin | Cos | Tan | Signum | Mean | StdVar | CumMean | Log | Sqrt | Not => 1,
            IfElse => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A feature read either at the current row or as its trailing 21-row window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Terminal {
    pub feature: Feature,
    pub windowed: bool,
}

impl Terminal {
    pub const WINDOW_SUFFIX: &'static str = "_w21";

    pub fn scalar(feature: Feature) -> Self {
        Terminal {
            feature,
            windowed: false,
        }
    }

    pub fn window(feature: Feature) -> Self {
        Terminal {
            feature,
            windowed: true,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.strip_suffix(Self::WINDOW_SUFFIX) {
            Some(base) => Feature::from_name(base)
                .filter(|f| f.column().is_some())
                .map(Terminal::window),
            None => Feature::from_name(name).map(Terminal::scalar),
        }
    }
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.windowed {
            write!(f, "{}{}", self.feature, Self::WINDOW_SUFFIX)
        } else {
            write!(f, "{}", self.feature)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub args: Vec<Kind>,
    pub ret: Kind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Buy,
    Sell,
    Hold,
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Signal::Buy => "buy",
            Signal::Sell => "sell",
            Signal::Hold => "hold",
        })
    }
}

/// Functions and terminals available to one variant.
#[derive(Debug, Clone)]
pub struct PrimitiveSet {
    variant: Variant,
    functions: Vec<(Primitive, Signature)>,
    terminals: Vec<Terminal>,
}

const GP_FUNCTIONS: &[Primitive] = &[
    Primitive::Add,
    Primitive::Mult,
    Primitive::Sub,
    Primitive::Div,
    Primitive::Neg,
    Primitive::Sin,
    Primitive::Cos,
    Primitive::Tan,
    Primitive::Signum,
    Primitive::Gt,
];

const VGP_FUNCTIONS: &[Primitive] = &[
    Primitive::Add,
    Primitive::Mult,
    Primitive::Sub,
    Primitive::Div,
    Primitive::Dot,
    Primitive::Neg,
    Primitive::Sin,
    Primitive::Cos,
    Primitive::Tan,
    Primitive::Mean,
    Primitive::StdVar,
    Primitive::CumMean,
    Primitive::GtThan,
];

const CVGP_FUNCTIONS: &[Primitive] = &[
    Primitive::Add,
    Primitive::Mult,
    Primitive::Sub,
    Primitive::Div,
    Primitive::Dot,
    Primitive::Neg,
    Primitive::Log,
    Primitive::Sqrt,
    Primitive::Sin,
    Primitive::Cos,
    Primitive::Tan,
    Primitive::Mean,
    Primitive::CumMean,
    Primitive::GtThanReal,
    Primitive::GtThanComplex,
];

const STVGP_EXTRA: &[Primitive] = &[
    Primitive::SumGt,
    Primitive::And,
    Primitive::Or,
    Primitive::Xor,
    Primitive::Not,
    Primitive::IfElse,
];

impl PrimitiveSet {
    pub fn new(variant: Variant) -> Self {
        let num = |n: usize| Signature {
            args: vec![Kind::Num; n],
            ret: Kind::Num,
        };
        let functions: Vec<(Primitive, Signature)> = match variant {
            Variant::Gp => GP_FUNCTIONS.iter().map(|&p| (p, num(p.arity()))).collect(),
            Variant::Vgp => VGP_FUNCTIONS.iter().map(|&p| (p, num(p.arity()))).collect(),
            Variant::Cvgp => CVGP_FUNCTIONS.iter().map(|&p| (p, num(p.arity()))).collect(),
            Variant::Stvgp => VGP_FUNCTIONS
                .iter()
                .chain(STVGP_EXTRA)
                .map(|&p| {
                    use Kind::*;
                    let sig = match p {
                        Primitive::GtThan | Primitive::SumGt => Signature {
                            args: vec![Num, Num],
                            ret: Bool,
                        },
                        Primitive::And | Primitive::Or | Primitive::Xor => Signature {
                            args: vec![Bool, Bool],
                            ret: Bool,
                        },
                        Primitive::Not => Signature {
                            args: vec![Bool],
                            ret: Bool,
                        },
                        Primitive::IfElse => Signature {
                            args: vec![Bool, Num, Num],
                            ret: Num,
                        },
                        other => num(other.arity()),
                    };
                    (p, sig)
                })
                .collect(),
        };
        let terminals = match variant {
            Variant::Gp => Feature::ALL.into_iter().map(Terminal::scalar).collect(),
            _ => Feature::ALL
                .into_iter()
                .map(Terminal::scalar)
                .chain(Feature::STATIC.into_iter().map(Terminal::window))
                .collect(),
        };
        PrimitiveSet {
            variant,
            functions,
            terminals,
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn functions(&self) -> &[(Primitive, Signature)] {
        &self.functions
    }

    pub fn terminals(&self) -> &[Terminal] {
        &self.terminals
    }

    pub fn signature(&self, prim: Primitive) -> Option<&Signature> {
        self.functions
            .iter()
            .find(|(p, _)| *p == prim)
            .map(|(_, s)| s)
    }

    pub fn contains_terminal(&self, terminal: Terminal) -> bool {
        self.terminals.contains(&terminal)
    }

    /// Kind every tree of this variant must produce at its root.
    pub fn root_kind(&self) -> Kind {
        match self.variant {
            Variant::Stvgp => Kind::Bool,
            _ => Kind::Num,
        }
    }

    /// Result kind of a node, `None` if the node is not in this set.
    pub fn node_kind(&self, node: Node) -> Option<Kind> {
        match node {
            Node::Prim(p) => self.signature(p).map(|s| s.ret),
            Node::Term(t) => self.contains_terminal(t).then_some(Kind::Num),
        }
    }

    /// Nodes that can stand in for `node` without changing arity or typing.
    pub fn same_signature(&self, node: Node) -> Vec<Node> {
        match node {
            Node::Term(t) => self
                .terminals
                .iter()
                .filter(|&&o| o != t)
                .map(|&o| Node::Term(o))
                .collect(),
            Node::Prim(p) => match self.signature(p) {
                Some(sig) => self
                    .functions
                    .iter()
                    .filter(|(o, s)| *o != p && s == sig)
                    .map(|(o, _)| Node::Prim(*o))
                    .collect(),
                None => Vec::new(),
            },
        }
    }
}
