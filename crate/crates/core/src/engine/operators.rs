//! Selection and variation operators.

use std::cmp::Ordering;

use rand::seq::IndexedRandom;
use rand::Rng;

use super::Limits;
use crate::backtest::Fitness;
use crate::variants::{ExprTree, Kind, Node, PrimitiveSet};

const CROSSOVER_ATTEMPTS: usize = 10;

/// Total order used everywhere individuals are compared: higher fitness
/// first, then smaller trees, then lower index. `Less` means `a` is better.
pub fn rank_order(fitness: &[Fitness], sizes: &[usize], a: usize, b: usize) -> Ordering {
    fitness[b]
        .cmp(&fitness[a])
        .then(sizes[a].cmp(&sizes[b]))
        .then(a.cmp(&b))
}

/// Index of the best individual overall.
pub fn best_index(fitness: &[Fitness], sizes: &[usize]) -> usize {
    (0..fitness.len())
        .min_by(|&a, &b| rank_order(fitness, sizes, a, b))
        .expect("non-empty population")
}

/// Samples `k` indices with replacement and returns the best of them. A
/// tournament at least as large as the population compares everyone.
pub fn tournament_select<R: Rng + ?Sized>(
    fitness: &[Fitness],
    sizes: &[usize],
    k: usize,
    rng: &mut R,
) -> usize {
    assert!(!fitness.is_empty() && k >= 1);
    let n = fitness.len();
    if k >= n {
        return best_index(fitness, sizes);
    }
    let mut best = rng.random_range(0..n);
    for _ in 1..k {
        let challenger = rng.random_range(0..n);
        if rank_order(fitness, sizes, challenger, best) == Ordering::Less {
            best = challenger;
        }
    }
    best
}

/// Swaps a random subtree of `a` with a random subtree of `b` producing the
/// same kind. A child that breaks `limits` is replaced by its parent.
pub fn subtree_crossover<R: Rng + ?Sized>(
    a: &ExprTree,
    b: &ExprTree,
    set: &PrimitiveSet,
    limits: Limits,
    rng: &mut R,
) -> (ExprTree, ExprTree) {
    let kind_at = |tree: &ExprTree, i: usize| -> Kind {
        set.node_kind(tree.nodes()[i]).unwrap_or(Kind::Num)
    };
    for _ in 0..CROSSOVER_ATTEMPTS {
        let i = rng.random_range(0..a.size());
        let kind = kind_at(a, i);
        let candidates: Vec<usize> = (0..b.size()).filter(|&j| kind_at(b, j) == kind).collect();
        let Some(&j) = candidates.choose(rng) else {
            continue;
        };
        let child_a = a.with_subtree(i, b.subtree(j));
        let child_b = b.with_subtree(j, a.subtree(i));
        let child_a = if limits.admits(&child_a) { child_a } else { a.clone() };
        let child_b = if limits.admits(&child_b) { child_b } else { b.clone() };
        return (child_a, child_b);
    }
    (a.clone(), b.clone())
}

/// Independently replaces each node, with probability `rate`, by a
/// different node of identical signature. Shape never changes.
pub fn point_mutation<R: Rng + ?Sized>(
    tree: &ExprTree,
    set: &PrimitiveSet,
    rate: f64,
    rng: &mut R,
) -> ExprTree {
    let mut out: Option<ExprTree> = None;
    for (i, &node) in tree.nodes().iter().enumerate() {
        if rng.random::<f64>() >= rate {
            continue;
        }
        let alternatives: Vec<Node> = set.same_signature(node);
        if let Some(&replacement) = alternatives.choose(rng) {
            let current = out.as_ref().unwrap_or(tree);
            out = Some(current.with_node(i, replacement));
        }
    }
    out.unwrap_or_else(|| tree.clone())
}
