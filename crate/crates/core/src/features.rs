//! Node features of the elimination state: degree and collective influence.

use ndarray::Array2;

use crate::symbolic::EliminationGraph;

pub const NUM_FEATURES: usize = 2;

/// Feature matrix with one row per live node, rows in ascending node-id order.
/// Column 0 is the degree, column 1 the collective influence.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeFeatures {
    pub nodes: Vec<usize>,
    pub x: Array2<f64>,
}

impl NodeFeatures {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }
}

/// `CI(v) = (deg(v) - 1) * sum_{u in N(v)} (deg(u) - 1)`, and 0 for isolated nodes.
pub fn collective_influence(g: &EliminationGraph, v: usize) -> usize {
    let deg = g.degree(v);
    if deg == 0 {
        return 0;
    }
    // Every neighbor has degree >= 1 (it is adjacent to v), so nothing underflows.
    let neighborhood: usize = g.neighbors(v).iter().map(|&u| g.degree(u) - 1).sum();
    (deg - 1) * neighborhood
}

/// Raw `(deg, CI)` for every live node of the current graph.
pub fn compute_features(g: &EliminationGraph) -> NodeFeatures {
    let nodes = g.live_nodes();
    let mut x = Array2::zeros((nodes.len(), NUM_FEATURES));
    for (row, &v) in nodes.iter().enumerate() {
        x[[row, 0]] = g.degree(v) as f64;
        x[[row, 1]] = collective_influence(g, v) as f64;
    }
    NodeFeatures { nodes, x }
}

/// Scales each column by `1 / max(1, column max)`.
pub fn normalize_features(mut features: NodeFeatures) -> NodeFeatures {
    for mut col in features.x.columns_mut() {
        let max = col.iter().copied().fold(1.0_f64, f64::max);
        col.mapv_inplace(|v| v / max);
    }
    features
}

/// Normalized features, the form the policy network consumes.
pub fn state_features(g: &EliminationGraph) -> NodeFeatures {
    normalize_features(compute_features(g))
}
