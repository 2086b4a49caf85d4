use std::fmt;

use arrayvec::ArrayVec;
use thiserror::Error;

use super::eval::{apply_primitive, interpret_signal, EvalError};
use super::value::Value;
use super::{Kind, Primitive, PrimitiveSet, Signal, Terminal, Variant};
use crate::market_data::{Feature, FeatureTable};

/// One node of a prefix-ordered tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Prim(Primitive),
    Term(Terminal),
}

impl Node {
    pub fn arity(self) -> usize {
        match self {
            Node::Prim(p) => p.arity(),
            Node::Term(_) => 0,
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Prim(p) => p.fmt(f),
            Node::Term(t) => t.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("unknown primitive `{0}`")]
    UnknownPrimitive(String),
    #[error("unknown terminal `{0}`")]
    UnknownTerminal(String),
    #[error("unexpected character `{ch}` at offset {offset}")]
    Char { ch: char, offset: usize },
    #[error("expected {expected} at offset {offset}")]
    Expected { expected: &'static str, offset: usize },
    #[error("{prim} takes {expected} arguments, got {found}")]
    Arity {
        prim: Primitive,
        expected: usize,
        found: usize,
    },
    #[error("trailing input at offset {0}")]
    Trailing(usize),
    #[error("node sequence is not a single well-formed prefix tree")]
    Malformed,
}

/// Location and reason of the first ill-typed node. `path` lists child
/// indices from the root.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("type violation at {}: {message}", display_path(.path))]
pub struct TypeViolation {
    pub path: Vec<usize>,
    pub message: String,
}

fn display_path(path: &[usize]) -> String {
    if path.is_empty() {
        "root".to_string()
    } else {
        path.iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(".")
    }
}

/// What a tree sees while deciding on one row.
#[derive(Debug, Clone, Copy)]
pub struct RowContext<'a> {
    pub table: &'a FeatureTable,
    pub row: usize,
    pub profit_percentage: f64,
}

/// An expression tree stored as its prefix (Polish) node sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExprTree {
    nodes: Vec<Node>,
    depth: usize,
}

fn scan(nodes: &[Node], at: usize) -> Option<(usize, usize)> {
    let node = nodes.get(at)?;
    let mut end = at + 1;
    let mut depth = 0;
    for _ in 0..node.arity() {
        let (child_end, child_depth) = scan(nodes, end)?;
        end = child_end;
        depth = depth.max(child_depth + 1);
    }
    Some((end, depth))
}

impl ExprTree {
    pub fn new(nodes: Vec<Node>) -> Result<Self, ParseError> {
        match scan(&nodes, 0) {
            Some((end, depth)) if end == nodes.len() => Ok(ExprTree { nodes, depth }),
            _ => Err(ParseError::Malformed),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    /// Edges on the longest root-to-leaf path; a lone terminal has depth 0.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// One past the last node of the subtree rooted at `start`.
    pub fn subtree_end(&self, start: usize) -> usize {
        let mut pending = 1usize;
        let mut i = start;
        while pending > 0 {
            pending = pending - 1 + self.nodes[i].arity();
            i += 1;
        }
        i
    }

    pub fn subtree(&self, start: usize) -> &[Node] {
        &self.nodes[start..self.subtree_end(start)]
    }

    /// Copy of this tree with the subtree at `start` replaced.
    pub fn with_subtree(&self, start: usize, replacement: &[Node]) -> ExprTree {
        let end = self.subtree_end(start);
        let mut nodes = Vec::with_capacity(self.nodes.len() - (end - start) + replacement.len());
        nodes.extend_from_slice(&self.nodes[..start]);
        nodes.extend_from_slice(replacement);
        nodes.extend_from_slice(&self.nodes[end..]);
        ExprTree::new(nodes).expect("subtree replacement keeps the tree well formed")
    }

    /// Copy with the node at `at` swapped for one of identical arity.
    pub fn with_node(&self, at: usize, node: Node) -> ExprTree {
        assert_eq!(self.nodes[at].arity(), node.arity());
        let mut nodes = self.nodes.clone();
        nodes[at] = node;
        ExprTree {
            nodes,
            depth: self.depth,
        }
    }

    /// Depth of every node below the root, in prefix order.
    pub fn node_depths(&self) -> Vec<usize> {
        let mut depths = Vec::with_capacity(self.nodes.len());
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for node in &self.nodes {
            let depth = match stack.last_mut() {
                Some((d, remaining)) => {
                    *remaining -= 1;
                    *d + 1
                }
                None => 0,
            };
            while matches!(stack.last(), Some((_, 0))) {
                stack.pop();
            }
            depths.push(depth);
            if node.arity() > 0 {
                stack.push((depth, node.arity()));
            }
        }
        depths
    }

    pub fn evaluate(&self, variant: Variant, ctx: &RowContext<'_>) -> Result<Value, EvalError> {
        let mut pos = 0;
        self.eval_at(&mut pos, variant, ctx)
    }

    pub fn signal(&self, variant: Variant, ctx: &RowContext<'_>) -> Result<Signal, EvalError> {
        interpret_signal(&self.evaluate(variant, ctx)?, variant)
    }

    fn eval_at(
        &self,
        pos: &mut usize,
        variant: Variant,
        ctx: &RowContext<'_>,
    ) -> Result<Value, EvalError> {
        let node = self.nodes[*pos];
        *pos += 1;
        match node {
            Node::Term(t) => terminal_value(t, variant, ctx),
            Node::Prim(p) => {
                let mut args: ArrayVec<Value, 3> = ArrayVec::new();
                for _ in 0..p.arity() {
                    args.push(self.eval_at(pos, variant, ctx)?);
                }
                apply_primitive(variant, p, &args)
            }
        }
    }

    /// Checks set membership and argument/result kinds of every node, and
    /// that the root yields the variant's required kind.
    pub fn typecheck(&self, set: &PrimitiveSet) -> Result<(), TypeViolation> {
        let mut path = Vec::new();
        let end = self.check_at(set, 0, set.root_kind(), &mut path)?;
        debug_assert_eq!(end, self.nodes.len());
        Ok(())
    }

    fn check_at(
        &self,
        set: &PrimitiveSet,
        at: usize,
        expected: Kind,
        path: &mut Vec<usize>,
    ) -> Result<usize, TypeViolation> {
        let node = self.nodes[at];
        let violation = |message: String| TypeViolation {
            path: path.clone(),
            message,
        };
        let kind = set
            .node_kind(node)
            .ok_or_else(|| violation(format!("{node} is not part of the {} set", set.variant())))?;
        if kind != expected {
            return Err(violation(format!("expected {expected}, {node} yields {kind}")));
        }
        let mut next = at + 1;
        if let Node::Prim(p) = node {
            let args = set.signature(p).expect("kind lookup succeeded").args.clone();
            for (i, arg) in args.into_iter().enumerate() {
                path.push(i);
                next = self.check_at(set, next, arg, path)?;
                path.pop();
            }
        }
        Ok(next)
    }

    pub fn parse(text: &str) -> Result<ExprTree, ParseError> {
        let mut parser = Parser { text, pos: 0 };
        let mut nodes = Vec::new();
        parser.expr(&mut nodes)?;
        parser.skip_ws();
        if parser.pos != text.len() {
            return Err(ParseError::Trailing(parser.pos));
        }
        ExprTree::new(nodes)
    }

    fn fmt_at(&self, at: usize, f: &mut fmt::Formatter<'_>) -> Result<usize, fmt::Error> {
        let node = self.nodes[at];
        write!(f, "{node}")?;
        let mut next = at + 1;
        if node.arity() > 0 {
            f.write_str("(")?;
            for i in 0..node.arity() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                next = self.fmt_at(next, f)?;
            }
            f.write_str(")")?;
        }
        Ok(next)
    }
}

impl fmt::Display for ExprTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(0, f).map(|_| ())
    }
}

impl std::str::FromStr for ExprTree {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExprTree::parse(s)
    }
}

fn terminal_value(t: Terminal, variant: Variant, ctx: &RowContext<'_>) -> Result<Value, EvalError> {
    let value = if t.feature == Feature::ProfitPercentage {
        Value::Real(ctx.profit_percentage)
    } else if t.windowed {
        let slice = ctx
            .table
            .window_slice(t.feature, ctx.row)
            .ok_or_else(|| EvalError::Window(t.to_string()))?;
        Value::RealVec(slice.to_vec())
    } else {
        Value::Real(ctx.table.value(t.feature, ctx.row))
    };
    Ok(if variant == Variant::Cvgp {
        value.to_complex()
    } else {
        value
    })
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn eat(&mut self, ch: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(ch) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<&str, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if start == self.pos {
            return Err(match self.peek() {
                Some(ch) => ParseError::Char { ch, offset: start },
                None => ParseError::Expected {
                    expected: "a primitive or terminal",
                    offset: start,
                },
            });
        }
        Ok(&self.text[start..self.pos])
    }

    fn expr(&mut self, out: &mut Vec<Node>) -> Result<(), ParseError> {
        let name = self.ident()?.to_string();
        if self.eat('(') {
            let prim = Primitive::from_name(&name).ok_or(ParseError::UnknownPrimitive(name))?;
            out.push(Node::Prim(prim));
            let mut found = 0;
            if !self.eat(')') {
                loop {
                    self.expr(out)?;
                    found += 1;
                    if self.eat(')') {
                        break;
                    }
                    if !self.eat(',') {
                        return Err(ParseError::Expected {
                            expected: "`,` or `)`",
                            offset: self.pos,
                        });
                    }
                }
            }
            if found != prim.arity() {
                return Err(ParseError::Arity {
                    prim,
                    expected: prim.arity(),
                    found,
                });
            }
        } else {
            let term = Terminal::from_name(&name).ok_or(ParseError::UnknownTerminal(name))?;
            out.push(Node::Term(term));
        }
        Ok(())
    }
}
