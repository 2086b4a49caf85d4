//! Type-driven ramped half-and-half initialisation.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{EngineError, Limits};
use crate::variants::{ExprTree, Kind, Node, PrimitiveSet};

const ATTEMPTS: usize = 64;

/// Random tree builder that only emits well-typed trees.
#[derive(Debug, Clone)]
pub struct TreeGenerator<'a> {
    set: &'a PrimitiveSet,
    /// Shallowest tree producing a numeric / boolean result.
    min_num: Option<usize>,
    min_bool: Option<usize>,
}

impl<'a> TreeGenerator<'a> {
    pub fn new(set: &'a PrimitiveSet) -> Self {
        let mut min_num = (!set.terminals().is_empty()).then_some(0);
        let mut min_bool = None;
        // fixpoint over function signatures
        loop {
            let mut changed = false;
            for (_, sig) in set.functions() {
                let need = sig.args.iter().try_fold(0usize, |acc, k| {
                    let d = match k {
                        Kind::Num => min_num,
                        Kind::Bool => min_bool,
                    }?;
                    Some(acc.max(d + 1))
                });
                let Some(need) = need else { continue };
                let slot = match sig.ret {
                    Kind::Num => &mut min_num,
                    Kind::Bool => &mut min_bool,
                };
                if slot.is_none_or(|d| need < d) {
                    *slot = Some(need);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        TreeGenerator {
            set,
            min_num,
            min_bool,
        }
    }

    pub fn min_depth(&self, kind: Kind) -> Option<usize> {
        match kind {
            Kind::Num => self.min_num,
            Kind::Bool => self.min_bool,
        }
    }

    /// A tree of `kind` no deeper than `depth`. With `full`, functions are
    /// preferred until `depth` is reached; otherwise functions and
    /// terminals are drawn together (grow).
    pub fn generate<R: Rng + ?Sized>(
        &self,
        kind: Kind,
        depth: usize,
        full: bool,
        rng: &mut R,
    ) -> Result<ExprTree, EngineError> {
        match self.min_depth(kind) {
            Some(d) if d <= depth => {}
            _ => return Err(EngineError::Unreachable { kind, depth }),
        }
        let mut nodes = Vec::new();
        self.build(kind, depth, full, rng, &mut nodes);
        Ok(ExprTree::new(nodes).expect("generator emits well-formed trees"))
    }

    fn build<R: Rng + ?Sized>(
        &self,
        kind: Kind,
        depth_left: usize,
        full: bool,
        rng: &mut R,
        out: &mut Vec<Node>,
    ) {
        let functions: Vec<Node> = if depth_left == 0 {
            Vec::new()
        } else {
            self.set
                .functions()
                .iter()
                .filter(|(_, sig)| {
                    sig.ret == kind
                        && sig
                            .args
                            .iter()
                            .all(|&a| self.min_depth(a).is_some_and(|d| d < depth_left))
                })
                .map(|(p, _)| Node::Prim(*p))
                .collect()
        };
        let terminals: Vec<Node> = if kind == Kind::Num {
            self.set.terminals().iter().map(|&t| Node::Term(t)).collect()
        } else {
            Vec::new()
        };
        let node = if functions.is_empty() {
            *terminals.choose(rng).expect("kind reachable at this depth")
        } else if full || terminals.is_empty() {
            *functions.choose(rng).expect("non-empty")
        } else {
            let pick = rng.random_range(0..functions.len() + terminals.len());
            if pick < functions.len() {
                functions[pick]
            } else {
                terminals[pick - functions.len()]
            }
        };
        out.push(node);
        if let Node::Prim(p) = node {
            let args = self.set.signature(p).expect("from this set").args.clone();
            for arg in args {
                self.build(arg, depth_left - 1, full, rng, out);
            }
        }
    }

    /// One ramped half-and-half individual: depth uniform in `depths`,
    /// full or grow by `full`, redrawn until it respects `limits`.
    pub fn ramped<R: Rng + ?Sized>(
        &self,
        depths: (usize, usize),
        full: bool,
        limits: Limits,
        rng: &mut R,
    ) -> Result<ExprTree, EngineError> {
        let kind = self.set.root_kind();
        let lowest = self
            .min_depth(kind)
            .ok_or(EngineError::Unreachable { kind, depth: depths.1 })?;
        let lo = depths.0.max(lowest);
        let hi = depths.1.min(limits.max_depth);
        if lo > hi {
            return Err(EngineError::Unreachable { kind, depth: hi });
        }
        for attempt in 0..ATTEMPTS {
            let depth = rng.random_range(lo..=hi);
            // fall back to grow when full trees keep overflowing the size cap
            let full = full && attempt < ATTEMPTS / 2;
            let tree = self.generate(kind, depth, full, rng)?;
            if limits.admits(&tree) {
                return Ok(tree);
            }
        }
        self.generate(kind, lo, false, rng)
            .ok()
            .filter(|t| limits.admits(t))
            .ok_or(EngineError::Unreachable { kind, depth: lo })
    }
}
