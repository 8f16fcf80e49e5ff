//! Graph propagation operators over the live subgraph.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::symbolic::EliminationGraph;

/// A linear operator applied to node representations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    /// `Â^j` with `Â = D̃^{-1/2} (A + I) D̃^{-1/2}`; `j = 0` is the identity.
    NormalizedPower(usize),
    /// Mean over neighbors, `D^{-1} A`; isolated nodes aggregate to zero.
    NeighborMean,
}

/// Compressed sparse rows over local (live) indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `self * x`.
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let width = x.ncols();
        let mut out = Array2::zeros((self.n, width));
        for i in 0..self.n {
            let mut row = out.row_mut(i);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row.scaled_add(self.vals[k], &x.row(self.cols[k]));
            }
        }
        out
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.n + 1];
        for &c in &self.cols {
            counts[c + 1] += 1;
        }
        for i in 0..self.n {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut cols = vec![0; self.cols.len()];
        let mut vals = vec![0.0; self.vals.len()];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.cols[k];
                cols[next[c]] = i;
                vals[next[c]] = self.vals[k];
                next[c] += 1;
            }
        }
        Csr {
            n: self.n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[[i, self.cols[k]]] += self.vals[k];
            }
        }
        out
    }
}

/// Operators for one elimination state, indexed by local (live) position.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    normalized: Csr,
    /// Neighbor mean and its transpose, built only when requested.
    mean: Option<(Csr, Csr)>,
}

/// Builds the propagation operators needed by `operators` for the live
/// subgraph of `g`.
pub fn build_propagation(g: &EliminationGraph, operators: &[Operator]) -> Propagation {
    let nodes = g.live_nodes();
    let mut local = vec![usize::MAX; g.n_original()];
    for (i, &v) in nodes.iter().enumerate() {
        local[v] = i;
    }
    let n = nodes.len();
    let scale: Vec<f64> = nodes
        .iter()
        .map(|&v| 1.0 / ((g.degree(v) + 1) as f64).sqrt())
        .collect();

    let nnz: usize = nodes.iter().map(|&v| g.degree(v) + 1).sum();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    row_ptr.push(0);
    for (i, &v) in nodes.iter().enumerate() {
        // Neighbors are sorted by id and the id -> local map is monotone,
        // so the self-loop is inserted at its sorted position.
        let mut diag_done = false;
        for &u in g.neighbors(v) {
            let j = local[u];
            if !diag_done && j > i {
                cols.push(i);
                vals.push(scale[i] * scale[i]);
                diag_done = true;
            }
            cols.push(j);
            vals.push(scale[i] * scale[j]);
        }
        if !diag_done {
            cols.push(i);
            vals.push(scale[i] * scale[i]);
        }
        row_ptr.push(cols.len());
    }
    let normalized = Csr {
        n,
        row_ptr,
        cols,
        vals,
    };

    let mean = operators.contains(&Operator::NeighborMean).then(|| {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for &v in &nodes {
            let deg = g.degree(v);
            for &u in g.neighbors(v) {
                cols.push(local[u]);
                vals.push(1.0 / deg as f64);
            }
            row_ptr.push(cols.len());
        }
        let m = Csr {
            n,
            row_ptr,
            cols,
            vals,
        };
        let t = m.transpose();
        (m, t)
    });

    Propagation { normalized, mean }
}

impl Propagation {
    pub fn n(&self) -> usize {
        self.normalized.n
    }

    pub fn normalized(&self) -> &Csr {
        &self.normalized
    }

    fn mean_pair(&self) -> &(Csr, Csr) {
        self.mean
            .as_ref()
            .expect("propagation was built without the neighbor-mean operator")
    }

    pub fn apply(&self, op: Operator, x: ArrayView2<'_, f64>) -> Array2<f64> {
        match op {
            Operator::NormalizedPower(j) => {
                let mut out = x.to_owned();
                for _ in 0..j {
                    out = self.normalized.apply(out.view());
                }
                out
            }
            Operator::NeighborMean => self.mean_pair().0.apply(x),
        }
    }

    pub fn apply_transpose(&self, op: Operator, x: ArrayView2<'_, f64>) -> Array2<f64> {
        match op {
            // Â is symmetric.
            Operator::NormalizedPower(_) => self.apply(op, x),
            Operator::NeighborMean => self.mean_pair().1.apply(x),
        }
    }

    /// Dense matrix of `op`, for inspection and tests.
    pub fn operator_dense(&self, op: Operator) -> Array2<f64> {
        self.apply(op, Array2::eye(self.n()).view())
    }
}
