//! Baseline orderings: natural, uniform random and greedy minimum degree.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::sparsity::{Ordering, SparsityPattern};
use crate::symbolic::EliminationGraph;

pub fn natural_order(pattern: &SparsityPattern) -> Ordering {
    Ordering::identity(pattern.n())
}

pub fn random_order<R: Rng + ?Sized>(pattern: &SparsityPattern, rng: &mut R) -> Ordering {
    let mut perm: Vec<usize> = (0..pattern.n()).collect();
    perm.shuffle(rng);
    Ordering::new(perm).expect("a shuffled identity is a permutation")
}

/// Exact greedy minimum degree on the elimination graph.
///
/// At each step the live node of smallest current degree is eliminated; ties
/// go to the lowest node id. This is the exact-degree ancestor of AMD, with
/// no quotient graph or approximate degrees.
pub fn min_degree_order(pattern: &SparsityPattern) -> Ordering {
    let n = pattern.n();
    let mut graph = EliminationGraph::new(pattern);
    let mut perm = Vec::with_capacity(n);
    let mut live: Vec<usize> = (0..n).collect();
    while !live.is_empty() {
        let (slot, &v) = live
            .iter()
            .enumerate()
            .min_by_key(|&(_, &v)| (graph.degree(v), v))
            .expect("live set is non-empty");
        live.swap_remove(slot);
        graph.eliminate(v).expect("v is live");
        perm.push(v);
    }
    Ordering::new(perm).expect("every node is eliminated exactly once")
}
