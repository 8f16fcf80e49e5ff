//! Elimination graphs and symbolic Cholesky factorization.
//!
//! Eliminating node `v` from the elimination graph removes `v` and turns its
//! current neighborhood into a clique; the edges added to complete the clique
//! are the fill produced at that step. Running this over a whole ordering
//! yields the structure of `L + Lᵀ`.

use std::collections::BTreeSet;
use std::io::Write;

use crate::error::{Error, Result};
use crate::sparsity::{Ordering, SparsityPattern};

/// Undirected edge in canonical `(min, max)` form.
pub type Edge = (usize, usize);

/// Mutable elimination graph `G_k` over the live (not yet eliminated) nodes.
///
/// Node ids are those of the original pattern; eliminated nodes keep their id
/// but have an empty adjacency set and are marked dead.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationGraph {
    adj: Vec<BTreeSet<usize>>,
    live: Vec<bool>,
    live_count: usize,
    num_edges: usize,
}

impl EliminationGraph {
    pub fn new(pattern: &SparsityPattern) -> Self {
        let n = pattern.n();
        let mut adj = vec![BTreeSet::new(); n];
        for &(i, j) in pattern.edges() {
            adj[i].insert(j);
            adj[j].insert(i);
        }
        Self {
            adj,
            live: vec![true; n],
            live_count: n,
            num_edges: pattern.num_edges(),
        }
    }

    /// Node count of the original graph.
    pub fn n_original(&self) -> usize {
        self.live.len()
    }

    pub fn live_count(&self) -> usize {
        self.live_count
    }

    /// `|E_k|`.
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn is_live(&self, v: usize) -> bool {
        self.live.get(v).copied().unwrap_or(false)
    }

    /// Live nodes in ascending id order. This is the row order used by
    /// features and the policy network.
    pub fn live_nodes(&self) -> Vec<usize> {
        (0..self.live.len()).filter(|&v| self.live[v]).collect()
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, w: usize) -> bool {
        self.adj.get(u).is_some_and(|s| s.contains(&w))
    }

    /// Eliminates `v` and returns the fill edges it creates, sorted and in
    /// canonical form.
    pub fn eliminate(&mut self, v: usize) -> Result<Vec<Edge>> {
        if !self.is_live(v) {
            return Err(Error::InvalidAction(v));
        }
        let neighbors: Vec<usize> = std::mem::take(&mut self.adj[v]).into_iter().collect();
        for &u in &neighbors {
            self.adj[u].remove(&v);
        }
        self.num_edges -= neighbors.len();
        self.live[v] = false;
        self.live_count -= 1;

        let mut fill = Vec::new();
        for (a, &u) in neighbors.iter().enumerate() {
            for &w in &neighbors[a + 1..] {
                if self.adj[u].insert(w) {
                    self.adj[w].insert(u);
                    fill.push((u, w));
                }
            }
        }
        self.num_edges += fill.len();
        Ok(fill)
    }
}

/// One elimination step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub node: usize,
    /// Degree of `node` in the elimination graph just before elimination.
    pub degree: usize,
    /// `|E_t|` before elimination.
    pub edges_before: usize,
    pub fill: Vec<Edge>,
}

impl TraceStep {
    /// `r_t = -|F_t|`.
    pub fn reward(&self) -> i64 {
        -(self.fill.len() as i64)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EliminationTrace {
    pub steps: Vec<TraceStep>,
}

impl EliminationTrace {
    pub fn total_fill(&self) -> usize {
        self.steps.iter().map(|s| s.fill.len()).sum()
    }

    /// Line-oriented dump: `step,node,fill_count,edges_before`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,node,fill_count,edges_before")?;
        for (t, s) in self.steps.iter().enumerate() {
            writeln!(w, "{},{},{},{}", t, s.node, s.fill.len(), s.edges_before)?;
        }
        Ok(())
    }
}

/// Result of a full symbolic factorization.
#[derive(Clone, Debug)]
pub struct SymbolicFactor {
    /// All fill edges, sorted.
    pub fill: Vec<Edge>,
    /// Pattern of `L + Lᵀ`: original edges plus fill.
    pub filled: SparsityPattern,
    pub trace: EliminationTrace,
}

impl SymbolicFactor {
    pub fn fill_count(&self) -> usize {
        self.fill.len()
    }
}

/// Symbolic Cholesky factorization of `pattern` under `ordering`.
pub fn symbolic_factorize(pattern: &SparsityPattern, ordering: &Ordering) -> Result<SymbolicFactor> {
    ordering.check_for(pattern)?;
    let mut graph = EliminationGraph::new(pattern);
    let mut steps = Vec::with_capacity(pattern.n());
    let mut all_fill = Vec::new();
    for &v in ordering.perm() {
        let edges_before = graph.num_edges();
        let degree = graph.degree(v);
        let fill = graph.eliminate(v)?;
        all_fill.extend_from_slice(&fill);
        steps.push(TraceStep {
            node: v,
            degree,
            edges_before,
            fill,
        });
    }
    all_fill.sort_unstable();
    let filled = SparsityPattern::from_edges(
        pattern.n(),
        pattern.edges().iter().chain(all_fill.iter()).copied(),
    )?;
    Ok(SymbolicFactor {
        fill: all_fill,
        filled,
        trace: EliminationTrace { steps },
    })
}

/// Total fill of `ordering` without keeping the trace.
pub fn fill_count(pattern: &SparsityPattern, ordering: &Ordering) -> Result<usize> {
    ordering.check_for(pattern)?;
    let mut graph = EliminationGraph::new(pattern);
    let mut total = 0;
    for &v in ordering.perm() {
        total += graph.eliminate(v)?.len();
    }
    Ok(total)
}

/// Fill computed directly from path reachability: a non-edge `(i, j)` fills
/// iff some path joins them whose interior nodes are all eliminated before
/// both endpoints. Cost is O(n² (n + |E|)); meant as a test oracle.
pub fn fill_path_oracle(pattern: &SparsityPattern, ordering: &Ordering) -> Result<Vec<Edge>> {
    ordering.check_for(pattern)?;
    let n = pattern.n();
    let pos = ordering.positions();
    let adj = pattern.adjacency();
    let mut fill = Vec::new();
    let mut seen = vec![false; n];
    let mut stack = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if pattern.contains_edge(i, j) {
                continue;
            }
            let limit = pos[i].min(pos[j]);
            seen.iter_mut().for_each(|s| *s = false);
            stack.clear();
            seen[i] = true;
            stack.push(i);
            let mut found = false;
            'search: while let Some(u) = stack.pop() {
                for &w in &adj[u] {
                    if w == j {
                        found = true;
                        break 'search;
                    }
                    if !seen[w] && pos[w] < limit {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            if found {
                fill.push((i, j));
            }
        }
    }
    Ok(fill)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_mirrors_pattern() {
        let g = EliminationGraph::new(&SparsityPattern::path(3));
        assert_eq!(g.live_nodes(), vec![0, 1, 2]);
        assert_eq!(g.neighbors(1).iter().copied().collect::<Vec<_>>(), vec![0, 2]);

        let g = EliminationGraph::new(&SparsityPattern::empty(2));
        assert_eq!(g.live_count(), 2);
        assert_eq!(g.num_edges(), 0);

        let g = EliminationGraph::new(&SparsityPattern::cycle(4));
        assert!((0..4).all(|v| g.degree(v) == 2));
    }

    #[test]
    fn eliminate_star_center() {
        let mut g = EliminationGraph::new(&SparsityPattern::star(3));
        let fill = g.eliminate(0).unwrap();
        assert_eq!(fill, vec![(1, 2), (1, 3), (2, 3)]);
        assert_eq!(g.live_nodes(), vec![1, 2, 3]);
        assert_eq!(g.num_edges(), 3);
        assert!((1..4).all(|v| g.degree(v) == 2));
    }

    #[test]
    fn eliminate_leaf_and_cycle() {
        let mut g = EliminationGraph::new(&SparsityPattern::path(3));
        assert!(g.eliminate(0).unwrap().is_empty());

        let mut g = EliminationGraph::new(&SparsityPattern::cycle(4));
        assert_eq!(g.eliminate(0).unwrap(), vec![(1, 3)]);
    }

    #[test]
    fn eliminating_dead_node_fails() {
        let mut g = EliminationGraph::new(&SparsityPattern::path(3));
        g.eliminate(1).unwrap();
        assert!(matches!(g.eliminate(1), Err(Error::InvalidAction(1))));
        assert!(matches!(g.eliminate(7), Err(Error::InvalidAction(7))));
    }

    #[test]
    fn factorize_examples() {
        let path = SparsityPattern::path(8);
        assert_eq!(
            symbolic_factorize(&path, &Ordering::identity(8))
                .unwrap()
                .fill_count(),
            0
        );

        let star = SparsityPattern::star(5);
        let center_first = Ordering::identity(6);
        assert_eq!(symbolic_factorize(&star, &center_first).unwrap().fill_count(), 10);
        let center_last = Ordering::new(vec![1, 2, 3, 4, 5, 0]).unwrap();
        assert_eq!(symbolic_factorize(&star, &center_last).unwrap().fill_count(), 0);
    }

    #[test]
    fn factorize_rejects_wrong_length() {
        let p = SparsityPattern::path(3);
        assert!(matches!(
            symbolic_factorize(&p, &Ordering::identity(2)),
            Err(Error::InvalidOrdering(_))
        ));
        assert!(fill_path_oracle(&p, &Ordering::identity(4)).is_err());
    }

    #[test]
    fn filled_pattern_contains_original() {
        let p = SparsityPattern::cycle(6);
        let f = symbolic_factorize(&p, &Ordering::identity(6)).unwrap();
        for &(i, j) in p.edges() {
            assert!(f.filled.contains_edge(i, j));
        }
        assert_eq!(f.filled.num_edges(), p.num_edges() + f.fill_count());
    }

    #[test]
    fn oracle_examples() {
        let path = SparsityPattern::path(6);
        assert!(fill_path_oracle(&path, &Ordering::identity(6))
            .unwrap()
            .is_empty());
        let star = SparsityPattern::star(3);
        assert_eq!(
            fill_path_oracle(&star, &Ordering::identity(4)).unwrap(),
            vec![(1, 2), (1, 3), (2, 3)]
        );
    }

    #[test]
    fn trace_dump() {
        let f = symbolic_factorize(&SparsityPattern::star(2), &Ordering::identity(3)).unwrap();
        let mut out = Vec::new();
        f.trace.write_text(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "step,node,fill_count,edges_before\n0,0,1,2\n1,1,0,1\n2,2,0,0\n"
        );
    }
}
