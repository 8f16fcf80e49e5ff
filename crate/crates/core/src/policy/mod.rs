//! Actor–critic over elimination graphs.
//!
//! Both the actor and the critic are towers of multi-hop graph convolutions.
//! A layer applies each configured propagation operator to a separately
//! projected copy of its input and concatenates the results:
//!
//! ```text
//! H_{l+1} = tanh( [ Op_1 H_l W_{l,1} + b_{l,1} || ... || Op_K H_l W_{l,K} + b_{l,K} ] )
//! ```
//!
//! The actor maps the last layer to one logit per live node and normalizes
//! with `log_softmax`; the critic maps it to one scalar per node, applies
//! `tanh` and mean-pools, so the state value lies in `(-1, 1)`.
//!
//! Gradients come from [`PolicyValueNet::backward`], a hand-written reverse
//! pass over the activations recorded in a [`ForwardTape`].

mod checkpoint;
mod propagation;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use propagation::{build_propagation, Csr, Operator, Propagation};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{NodeFeatures, NUM_FEATURES};
use crate::symbolic::EliminationGraph;

/// Aggregation scheme of the graph convolution layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    /// Powers of the normalized adjacency, default hops `{0, 1, 2}`.
    MixHop,
    /// Self projection plus neighbor mean (GraphSAGE-style).
    SingleHop,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub backbone: Backbone,
    pub operators: Vec<Operator>,
    pub layers: usize,
    /// Output width of each operator branch.
    pub hidden: usize,
}

impl NetConfig {
    pub fn mixhop(hops: &[usize], layers: usize, hidden: usize) -> Self {
        Self {
            backbone: Backbone::MixHop,
            operators: hops.iter().map(|&j| Operator::NormalizedPower(j)).collect(),
            layers,
            hidden,
        }
    }

    pub fn single_hop(layers: usize, hidden: usize) -> Self {
        Self {
            backbone: Backbone::SingleHop,
            operators: vec![Operator::NormalizedPower(0), Operator::NeighborMean],
            layers,
            hidden,
        }
    }

    pub fn for_backbone(backbone: Backbone) -> Self {
        match backbone {
            Backbone::MixHop => Self::default(),
            Backbone::SingleHop => Self::single_hop(2, 16),
        }
    }

    /// Width of the representation produced by every layer.
    pub fn layer_width(&self) -> usize {
        self.operators.len() * self.hidden
    }

    fn validate(&self) -> Result<()> {
        if self.operators.is_empty() || self.layers == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument(
                "network needs at least one operator, one layer and one hidden unit".into(),
            ));
        }
        Ok(())
    }
}

impl Default for NetConfig {
    fn default() -> Self {
        Self::mixhop(&[0, 1, 2], 2, 16)
    }
}

/// Location of one parameter block inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Block {
    offset: usize,
    rows: usize,
    cols: usize,
    fan_in: usize,
}

impl Block {
    fn len(&self) -> usize {
        self.rows * self.cols
    }

    fn view<'a>(&self, params: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape(
            (self.rows, self.cols),
            &params[self.offset..self.offset + self.len()],
        )
        .expect("block lies inside the parameter vector")
    }

    fn view_mut<'a>(&self, params: &'a mut [f64]) -> ArrayViewMut2<'a, f64> {
        ArrayViewMut2::from_shape(
            (self.rows, self.cols),
            &mut params[self.offset..self.offset + self.len()],
        )
        .expect("block lies inside the parameter vector")
    }

    fn vector_mut<'a>(&self, params: &'a mut [f64]) -> ArrayViewMut1<'a, f64> {
        ArrayViewMut1::from(&mut params[self.offset..self.offset + self.len()])
    }
}

#[derive(Clone, Debug)]
struct LayerLayout {
    weights: Vec<Block>,
    biases: Vec<Block>,
}

#[derive(Clone, Debug)]
struct TowerLayout {
    layers: Vec<LayerLayout>,
    head_weight: Block,
    head_bias: Block,
}

#[derive(Clone, Debug)]
struct Layout {
    actor: TowerLayout,
    critic: TowerLayout,
    len: usize,
    /// `(name, rows, cols)` in storage order.
    shapes: Vec<(String, usize, usize)>,
}

impl Layout {
    fn new(config: &NetConfig) -> Self {
        let mut offset = 0;
        let mut shapes = Vec::new();
        let mut block = |name: String, rows: usize, cols: usize, fan_in: usize| {
            let b = Block {
                offset,
                rows,
                cols,
                fan_in,
            };
            offset += rows * cols;
            shapes.push((name, rows, cols));
            b
        };
        let mut tower = |tag: &str| {
            let mut in_dim = NUM_FEATURES;
            let mut layers = Vec::with_capacity(config.layers);
            for l in 0..config.layers {
                let mut weights = Vec::new();
                let mut biases = Vec::new();
                for k in 0..config.operators.len() {
                    weights.push(block(
                        format!("{tag}.layer{l}.op{k}.weight"),
                        in_dim,
                        config.hidden,
                        in_dim,
                    ));
                    biases.push(block(
                        format!("{tag}.layer{l}.op{k}.bias"),
                        1,
                        config.hidden,
                        in_dim,
                    ));
                }
                layers.push(LayerLayout { weights, biases });
                in_dim = config.layer_width();
            }
            TowerLayout {
                layers,
                head_weight: block(format!("{tag}.head.weight"), in_dim, 1, in_dim),
                head_bias: block(format!("{tag}.head.bias"), 1, 1, in_dim),
            }
        };
        let actor = tower("actor");
        let critic = tower("critic");
        Self {
            actor,
            critic,
            len: offset,
            shapes,
        }
    }

    fn blocks(&self) -> impl Iterator<Item = &Block> {
        [&self.actor, &self.critic].into_iter().flat_map(|t| {
            t.layers
                .iter()
                .flat_map(|l| l.weights.iter().zip(&l.biases).flat_map(|(w, b)| [w, b]))
                .chain([&t.head_weight, &t.head_bias])
        })
    }
}

/// Flat gradient vector, laid out like [`PolicyValueNet::params`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug)]
pub struct PolicyValueNet {
    config: NetConfig,
    layout: Layout,
    params: Vec<f64>,
}

/// Activations of one tower: `hidden[l]` is the output of layer `l`, plus the head output.
#[derive(Clone, Debug)]
struct TowerTape {
    hidden: Vec<Array2<f64>>,
    head: Array1<f64>,
}

/// Everything [`PolicyValueNet::backward`] needs from a forward call.
#[derive(Clone, Debug)]
pub struct ForwardTape {
    config: NetConfig,
    param_len: usize,
    propagation: Propagation,
    features: Array2<f64>,
    actor: TowerTape,
    critic: TowerTape,
    log_probs: Array1<f64>,
    value: f64,
}

impl ForwardTape {
    pub fn log_probs(&self) -> ArrayView1<'_, f64> {
        self.log_probs.view()
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Recomputes the forward pass from the recorded inputs.
    pub fn replay(&self, net: &PolicyValueNet) -> Result<(Array1<f64>, f64)> {
        net.check_tape(self)?;
        let tape = net.run(self.propagation.clone(), self.features.clone());
        Ok((tape.log_probs, tape.value))
    }
}

/// Output of [`PolicyValueNet::forward`]. `log_probs[i]` belongs to `nodes[i]`.
#[derive(Clone, Debug)]
pub struct Forward {
    pub nodes: Vec<usize>,
    pub log_probs: Array1<f64>,
    pub value: f64,
    pub tape: ForwardTape,
}

pub fn log_softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
    logits.mapv(|z| z - log_sum)
}

/// Vector–Jacobian product of `log_softmax`: maps `dL/d log_probs` to `dL/d logits`.
pub fn log_softmax_backward(log_probs: ArrayView1<'_, f64>, upstream: ArrayView1<'_, f64>) -> Array1<f64> {
    let total = upstream.sum();
    let mut out = upstream.to_owned();
    out.zip_mut_with(&log_probs, |d, &lp| *d -= lp.exp() * total);
    out
}

impl PolicyValueNet {
    /// Parameters drawn uniformly from `±1/sqrt(fan_in)`.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; layout.len];
        for block in layout.blocks() {
            let bound = 1.0 / (block.fan_in as f64).sqrt();
            for p in &mut params[block.offset..block.offset + block.len()] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    pub(crate) fn from_parts(config: NetConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.len {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                layout.len,
                params.len()
            )));
        }
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `(name, rows, cols)` of every parameter block in storage order.
    pub fn shapes(&self) -> &[(String, usize, usize)] {
        &self.layout.shapes
    }

    /// Mutable row-major view of the block named as in [`shapes`](Self::shapes),
    /// e.g. `"actor.layer0.op1.weight"`.
    pub fn param_block_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let mut offset = 0;
        for (block, rows, cols) in &self.layout.shapes {
            if block == name {
                return Some(&mut self.params[offset..offset + rows * cols]);
            }
            offset += rows * cols;
        }
        None
    }

    pub fn forward(&self, g: &EliminationGraph, features: &NodeFeatures) -> Result<Forward> {
        if g.live_count() == 0 {
            return Err(Error::InvalidState("elimination graph has no live nodes".into()));
        }
        if features.rows() != g.live_count() || features.x.ncols() != NUM_FEATURES {
            return Err(Error::InvalidState(format!(
                "feature matrix is {}x{}, expected {}x{}",
                features.rows(),
                features.x.ncols(),
                g.live_count(),
                NUM_FEATURES
            )));
        }
        let propagation = build_propagation(g, &self.config.operators);
        let tape = self.run(propagation, features.x.clone());
        Ok(Forward {
            nodes: features.nodes.clone(),
            log_probs: tape.log_probs.clone(),
            value: tape.value,
            tape,
        })
    }

    fn run(&self, propagation: Propagation, features: Array2<f64>) -> ForwardTape {
        let actor = self.tower_forward(&self.layout.actor, &propagation, features.view(), false);
        let critic = self.tower_forward(&self.layout.critic, &propagation, features.view(), true);
        let log_probs = log_softmax(actor.head.view());
        let value = critic.head.mean().expect("at least one live node");
        ForwardTape {
            config: self.config.clone(),
            param_len: self.params.len(),
            propagation,
            features,
            actor,
            critic,
            log_probs,
            value,
        }
    }

    fn tower_forward(
        &self,
        tower: &TowerLayout,
        propagation: &Propagation,
        features: ArrayView2<'_, f64>,
        squash_head: bool,
    ) -> TowerTape {
        let m = features.nrows();
        let hidden = self.config.hidden;
        let mut activations: Vec<Array2<f64>> = Vec::with_capacity(tower.layers.len());
        for layer in &tower.layers {
            let input = activations.last().map_or(features, |h| h.view());
            let mut out = Array2::zeros((m, self.config.layer_width()));
            for (k, &op) in self.config.operators.iter().enumerate() {
                let projected = input.dot(&layer.weights[k].view(&self.params));
                let mut z = propagation.apply(op, projected.view());
                z += &layer.biases[k].view(&self.params).row(0);
                out.slice_mut(s![.., k * hidden..(k + 1) * hidden])
                    .assign(&z.mapv(f64::tanh));
            }
            activations.push(out);
        }
        let last = activations.last().expect("at least one layer");
        let mut head = last.dot(&tower.head_weight.view(&self.params).column(0));
        head += self.params[tower.head_bias.offset];
        if squash_head {
            head.mapv_inplace(f64::tanh);
        }
        TowerTape {
            hidden: activations,
            head,
        }
    }

    fn check_tape(&self, tape: &ForwardTape) -> Result<()> {
        if tape.config != self.config || tape.param_len != self.params.len() {
            return Err(Error::TapeMismatch(
                "tape was recorded by a network with a different architecture".into(),
            ));
        }
        Ok(())
    }

    /// Exact gradients of `sum_i d_log_probs[i] * log_probs[i] + d_value * value`.
    pub fn backward(
        &self,
        tape: &ForwardTape,
        d_log_probs: ArrayView1<'_, f64>,
        d_value: f64,
    ) -> Result<Gradients> {
        let mut grads = Gradients::zeros(self.params.len());
        self.accumulate_gradients(tape, d_log_probs, d_value, &mut grads)?;
        Ok(grads)
    }

    /// As [`backward`](Self::backward), adding into `grads`.
    pub fn accumulate_gradients(
        &self,
        tape: &ForwardTape,
        d_log_probs: ArrayView1<'_, f64>,
        d_value: f64,
        grads: &mut Gradients,
    ) -> Result<()> {
        self.check_tape(tape)?;
        if grads.0.len() != self.params.len() {
            return Err(Error::TapeMismatch(format!(
                "gradient buffer has {} entries, network has {}",
                grads.0.len(),
                self.params.len()
            )));
        }
        let m = tape.log_probs.len();
        if d_log_probs.len() != m {
            return Err(Error::TapeMismatch(format!(
                "upstream gradient has {} entries, tape has {m} nodes",
                d_log_probs.len()
            )));
        }

        let d_logits = log_softmax_backward(tape.log_probs.view(), d_log_probs);
        self.tower_backward(&self.layout.actor, tape, &tape.actor, d_logits, grads);

        // value = mean(tanh(s)): ds_i = d_value / m * (1 - u_i^2)
        let d_head = tape.critic.head.mapv(|u| d_value / m as f64 * (1.0 - u * u));
        self.tower_backward(&self.layout.critic, tape, &tape.critic, d_head, grads);
        Ok(())
    }

    /// `d_head` is the gradient with respect to the pre-squash head output.
    fn tower_backward(
        &self,
        tower: &TowerLayout,
        tape: &ForwardTape,
        tower_tape: &TowerTape,
        d_head: Array1<f64>,
        grads: &mut Gradients,
    ) {
        let hidden = self.config.hidden;
        let last = tower_tape.hidden.last().expect("at least one layer");

        tower
            .head_weight
            .view_mut(&mut grads.0)
            .column_mut(0)
            .scaled_add(1.0, &last.t().dot(&d_head));
        grads.0[tower.head_bias.offset] += d_head.sum();

        let head_w = tower.head_weight.view(&self.params).column(0).to_owned();
        let mut d_hidden = d_head
            .view()
            .insert_axis(Axis(1))
            .dot(&head_w.view().insert_axis(Axis(0)));

        for (l, layer) in tower.layers.iter().enumerate().rev() {
            let output = &tower_tape.hidden[l];
            let input = if l == 0 {
                tape.features.view()
            } else {
                tower_tape.hidden[l - 1].view()
            };
            // tanh' = 1 - tanh^2
            let mut d_pre = d_hidden;
            d_pre.zip_mut_with(output, |d, &h| *d *= 1.0 - h * h);

            let mut d_input = (l > 0).then(|| Array2::<f64>::zeros(input.raw_dim()));
            for (k, &op) in self.config.operators.iter().enumerate() {
                let d_branch = d_pre.slice(s![.., k * hidden..(k + 1) * hidden]);
                layer.biases[k]
                    .vector_mut(&mut grads.0)
                    .scaled_add(1.0, &d_branch.sum_axis(Axis(0)));
                let d_projected = tape.propagation.apply_transpose(op, d_branch);
                layer.weights[k]
                    .view_mut(&mut grads.0)
                    .scaled_add(1.0, &input.t().dot(&d_projected));
                if let Some(d_in) = d_input.as_mut() {
                    d_in.scaled_add(1.0, &d_projected.dot(&layer.weights[k].view(&self.params).t()));
                }
            }
            match d_input {
                Some(d) => d_hidden = d,
                None => break,
            }
        }
    }
}
