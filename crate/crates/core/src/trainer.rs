//! Policy training against the symbolic elimination environment.
//!
//! One episode eliminates every node of a graph, sampling each action from the
//! actor. Rewards are `-|F_t|`; undiscounted suffix sums `R_t` are squashed by
//! the adaptive saturation return
//!
//! ```text
//! ASR_t = (|E_t| + R_t) / (|E_t| - R_t)
//! ```
//!
//! which lies in `(-1, 1]` and is the regression target of the critic.
//! Each episode produces one optimizer step on `L_actor + L_critic`.

use std::io::Write;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::state_features;
use crate::policy::{ForwardTape, Gradients, NetConfig, PolicyValueNet};
use crate::sparsity::{Ordering, SparsityPattern};
use crate::symbolic::EliminationGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardVariant {
    /// Adaptive saturation return.
    Asr,
    /// `R_t / max(1, |E_0|)`, for ablations.
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RolloutMode {
    /// Sample from the policy and keep tapes for the update.
    Sample,
    /// Arg-max with lowest-node-id tie-break; no tapes kept.
    Greedy,
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    pub node: usize,
    /// Row of `node` among the live nodes at this step.
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub reward: i64,
    pub edges_before: usize,
    pub tape: Option<ForwardTape>,
}

#[derive(Clone, Debug, Default)]
pub struct EpisodeRecord {
    pub steps: Vec<StepRecord>,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn log_probs(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.log_prob).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.value).collect()
    }

    pub fn rewards(&self) -> Vec<i64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn edge_counts(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.edges_before).collect()
    }

    pub fn total_fill(&self) -> usize {
        self.steps.iter().map(|s| (-s.reward) as usize).sum()
    }
}

fn sample_index<R: Rng + ?Sized>(log_probs: &Array1<f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (i, &lp) in log_probs.iter().enumerate() {
        cumulative += lp.exp();
        if u < cumulative {
            return i;
        }
    }
    // Rounding left the total slightly below u; take the last node with mass.
    log_probs
        .iter()
        .rposition(|lp| lp.exp() > 0.0)
        .unwrap_or(log_probs.len() - 1)
}

fn argmax_index(log_probs: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &lp) in log_probs.iter().enumerate().skip(1) {
        if lp > log_probs[best] {
            best = i;
        }
    }
    best
}

/// Runs one full episode on `pattern`.
pub fn rollout<R: Rng + ?Sized>(
    net: &PolicyValueNet,
    pattern: &SparsityPattern,
    rng: &mut R,
    mode: RolloutMode,
) -> Result<(EpisodeRecord, Ordering)> {
    let n = pattern.n();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot roll out an empty pattern".into()));
    }
    let mut graph = EliminationGraph::new(pattern);
    let mut steps = Vec::with_capacity(n);
    let mut perm = Vec::with_capacity(n);
    while graph.live_count() > 0 {
        let features = state_features(&graph);
        let out = net.forward(&graph, &features)?;
        let action = match mode {
            RolloutMode::Sample => sample_index(&out.log_probs, rng),
            RolloutMode::Greedy => argmax_index(&out.log_probs),
        };
        let node = out.nodes[action];
        let edges_before = graph.num_edges();
        let fill = graph.eliminate(node)?;
        perm.push(node);
        steps.push(StepRecord {
            node,
            action,
            log_prob: out.log_probs[action],
            value: out.value,
            reward: -(fill.len() as i64),
            edges_before,
            tape: (mode == RolloutMode::Sample).then_some(out.tape),
        });
    }
    Ok((EpisodeRecord { steps }, Ordering::new(perm)?))
}

/// Greedy ordering produced by the learned policy.
pub fn greedy_order(net: &PolicyValueNet, pattern: &SparsityPattern) -> Result<Ordering> {
    // Greedy mode never touches the generator.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Ok(rollout(net, pattern, &mut rng, RolloutMode::Greedy)?.1)
}

/// `R_t = sum_{k >= t} r_k`.
pub fn suffix_returns(rewards: &[i64]) -> Vec<i64> {
    let mut out = vec![0; rewards.len()];
    let mut acc = 0;
    for t in (0..rewards.len()).rev() {
        acc += rewards[t];
        out[t] = acc;
    }
    out
}

/// `ASR_t = (|E_t| + R_t) / (|E_t| - R_t)`, with the `0/0` case defined as 1.
///
/// # Panics
/// If the sequences differ in length.
pub fn adaptive_saturation_return(edge_counts: &[usize], rewards: &[i64]) -> Vec<f64> {
    assert_eq!(
        edge_counts.len(),
        rewards.len(),
        "edge counts and rewards must have equal length"
    );
    edge_counts
        .iter()
        .zip(suffix_returns(rewards))
        .map(|(&edges, ret)| {
            let edges = edges as f64;
            let ret = ret as f64;
            let den = edges - ret;
            if den == 0.0 {
                1.0
            } else {
                (edges + ret) / den
            }
        })
        .collect()
}

/// `R_t / max(1, |E_0|)`.
pub fn raw_returns(edge_counts: &[usize], rewards: &[i64]) -> Vec<f64> {
    let scale = edge_counts.first().copied().unwrap_or(0).max(1) as f64;
    suffix_returns(rewards)
        .into_iter()
        .map(|r| r as f64 / scale)
        .collect()
}

pub fn episode_returns(record: &EpisodeRecord, variant: RewardVariant) -> Vec<f64> {
    let edges = record.edge_counts();
    let rewards = record.rewards();
    match variant {
        RewardVariant::Asr => adaptive_saturation_return(&edges, &rewards),
        RewardVariant::Raw => raw_returns(&edges, &rewards),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Losses {
    pub actor: f64,
    pub critic: f64,
    pub advantages: Vec<f64>,
}

/// `A_t = G_t - V_t`, `L_actor = -mean(log pi_t * A_t)`, `L_critic = mean(A_t^2)`.
pub fn losses(log_probs: &[f64], values: &[f64], returns: &[f64]) -> Losses {
    assert!(
        log_probs.len() == values.len() && values.len() == returns.len(),
        "episode sequences must have equal length"
    );
    let n = log_probs.len().max(1) as f64;
    let advantages: Vec<f64> = returns.iter().zip(values).map(|(g, v)| g - v).collect();
    let actor = -log_probs
        .iter()
        .zip(&advantages)
        .map(|(lp, a)| lp * a)
        .sum::<f64>()
        / n;
    let critic = advantages.iter().map(|a| a * a).sum::<f64>() / n;
    Losses {
        actor,
        critic,
        advantages,
    }
}

/// Losses of a sampled episode and the gradient of `L_actor + L_critic`.
///
/// Advantages are constants for the actor; the critic term differentiates
/// through the value only.
pub fn episode_gradients(
    net: &PolicyValueNet,
    record: &EpisodeRecord,
    returns: &[f64],
) -> Result<(Losses, Gradients)> {
    let l = losses(&record.log_probs(), &record.values(), returns);
    let n = record.len() as f64;
    let mut grads = Gradients::zeros(net.num_params());
    for (step, &adv) in record.steps.iter().zip(&l.advantages) {
        let tape = step
            .tape
            .as_ref()
            .ok_or_else(|| Error::InvalidState("episode was recorded without tapes".into()))?;
        let mut d_log_probs = Array1::zeros(tape.log_probs().len());
        d_log_probs[step.action] = -adv / n;
        let d_value = -2.0 * adv / n;
        net.accumulate_gradients(tape, d_log_probs.view(), d_value, &mut grads)?;
    }
    Ok((l, grads))
}

/// Adaptive moment estimation.
#[derive(Clone, Debug)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            beta1,
            beta2,
            epsilon,
            step: 0,
            first: vec![0.0; len],
            second: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.first.len());
        assert_eq!(grads.len(), self.first.len());
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            let g = grads[i];
            self.first[i] = self.beta1 * self.first[i] + (1.0 - self.beta1) * g;
            self.second[i] = self.beta2 * self.second[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first[i] / c1;
            let v_hat = self.second[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub epochs: usize,
    /// Consecutive episodes (each with its own update) per graph per epoch.
    pub episodes_per_graph: usize,
    pub lr_first_epoch: f64,
    pub lr_later_epochs: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub net: NetConfig,
    pub reward: RewardVariant,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            epochs: 1,
            episodes_per_graph: 1,
            lr_first_epoch: 0.01,
            lr_later_epochs: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            net: NetConfig::default(),
            reward: RewardVariant::Asr,
        }
    }
}

impl TrainerConfig {
    /// Learning rate for a 1-based epoch number.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if epoch <= 1 {
            self.lr_first_epoch
        } else {
            self.lr_later_epochs
        }
    }

    fn validate(&self) -> Result<()> {
        let lr_ok = |lr: f64| lr.is_finite() && lr >= 0.0;
        if !lr_ok(self.lr_first_epoch) || !lr_ok(self.lr_later_epochs) {
            return Err(Error::InvalidArgument(
                "learning rates must be finite and non-negative".into(),
            ));
        }
        if self.epochs == 0 || self.episodes_per_graph == 0 {
            return Err(Error::InvalidArgument(
                "epochs and episodes per graph must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(Error::InvalidArgument("invalid optimizer hyperparameters".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub epoch: usize,
    pub graph_id: usize,
    pub total_fill: usize,
    pub actor_loss: f64,
    pub critic_loss: f64,
}

/// `epoch,graph_id,total_fill,l_actor,l_critic` per line, with a header.
pub fn write_log<W: Write>(records: &[LogRecord], mut w: W) -> Result<()> {
    writeln!(w, "epoch,graph_id,total_fill,l_actor,l_critic")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.epoch, r.graph_id, r.total_fill, r.actor_loss, r.critic_loss
        )?;
    }
    Ok(())
}

pub struct TrainOutput {
    pub net: PolicyValueNet,
    pub log: Vec<LogRecord>,
}

/// Trains a freshly initialized network.
pub fn train(graphs: &[SparsityPattern], cfg: &TrainerConfig) -> Result<TrainOutput> {
    train_with(graphs, cfg, |_, _| Ok(()))
}

/// Trains and calls `on_episode` after every update.
pub fn train_with<F>(graphs: &[SparsityPattern], cfg: &TrainerConfig, on_episode: F) -> Result<TrainOutput>
where
    F: FnMut(&LogRecord, &PolicyValueNet) -> Result<()>,
{
    let net = PolicyValueNet::new(cfg.net.clone(), cfg.seed)?;
    train_from(net, graphs, cfg, on_episode)
}

/// Continues training `net`.
pub fn train_from<F>(
    mut net: PolicyValueNet,
    graphs: &[SparsityPattern],
    cfg: &TrainerConfig,
    mut on_episode: F,
) -> Result<TrainOutput>
where
    F: FnMut(&LogRecord, &PolicyValueNet) -> Result<()>,
{
    cfg.validate()?;
    if graphs.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if let Some(id) = graphs.iter().position(|g| g.n() == 0) {
        return Err(Error::InvalidArgument(format!(
            "training graph {id} has no nodes"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(net.num_params(), cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut log = Vec::with_capacity(cfg.epochs * graphs.len() * cfg.episodes_per_graph);

    for epoch in 1..=cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        for (graph_id, pattern) in graphs.iter().enumerate() {
            for _ in 0..cfg.episodes_per_graph {
                let (record, _) = rollout(&net, pattern, &mut rng, RolloutMode::Sample)?;
                let returns = episode_returns(&record, cfg.reward);
                let (l, grads) = episode_gradients(&net, &record, &returns)?;
                adam.step(net.params_mut(), grads.as_slice(), lr);
                let entry = LogRecord {
                    epoch,
                    graph_id,
                    total_fill: record.total_fill(),
                    actor_loss: l.actor,
                    critic_loss: l.critic,
                };
                on_episode(&entry, &net)?;
                log.push(entry);
            }
        }
    }
    Ok(TrainOutput { net, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn asr_examples() {
        // |E_t| = 10, R_t = -5.
        let asr = adaptive_saturation_return(&[10, 6], &[-2, -3]);
        assert_abs_diff_eq!(asr[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(adaptive_saturation_return(&[7], &[0]), vec![1.0]);
        assert_eq!(adaptive_saturation_return(&[0], &[0]), vec![1.0]);
    }

    #[test]
    fn raw_variant() {
        assert_eq!(raw_returns(&[4, 3, 0], &[-2, 0, 0]), vec![-0.5, 0.0, 0.0]);
        assert_eq!(raw_returns(&[0], &[0]), vec![0.0]);
    }

    #[test]
    fn loss_examples() {
        let l = losses(&[-0.5], &[0.0], &[1.0]);
        assert_eq!(l.actor, 0.5);
        assert_eq!(l.critic, 1.0);

        let l = losses(&[-0.1, -2.0, -0.7], &[0.2, 0.5, 1.0], &[0.2, 0.5, 1.0]);
        assert_eq!(l.actor, 0.0);
        assert_eq!(l.critic, 0.0);
    }

    #[test]
    fn value_shift_changes_critic_loss_by_identity() {
        let lp = [-0.3, -1.1, -0.2, -2.5];
        let values = [0.1, -0.4, 0.3, 0.9];
        let returns = [0.5, 0.2, -0.1, 1.0];
        let delta = 0.37;
        let base = losses(&lp, &values, &returns);
        let shifted_values: Vec<f64> = values.iter().map(|v| v + delta).collect();
        let shifted = losses(&lp, &shifted_values, &returns);
        let n = lp.len() as f64;
        let expected = base.advantages.iter().map(|a| (a - delta).powi(2)).sum::<f64>() / n
            - base.advantages.iter().map(|a| a * a).sum::<f64>() / n;
        assert_abs_diff_eq!(shifted.critic - base.critic, expected, epsilon = 1e-14);
    }

    #[test]
    fn single_node_rollout() {
        let net = PolicyValueNet::new(NetConfig::default(), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (rec, ord) = rollout(&net, &SparsityPattern::empty(1), &mut rng, RolloutMode::Sample).unwrap();
        assert_eq!(rec.len(), 1);
        assert_eq!(rec.steps[0].reward, 0);
        assert_eq!(ord.perm(), &[0]);
    }

    #[test]
    fn greedy_breaks_ties_by_lowest_id() {
        assert_eq!(argmax_index(&Array1::from(vec![-1.0, -0.5, -0.5])), 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut adam = Adam::new(2, 0.9, 0.999, 1e-8);
        let mut p = vec![1.0, -1.0];
        adam.step(&mut p, &[0.5, -2.0], 0.01);
        assert_abs_diff_eq!(p[0], 0.99, epsilon = 1e-9);
        assert_abs_diff_eq!(p[1], -0.99, epsilon = 1e-9);
    }

    #[test]
    fn schedule() {
        let cfg = TrainerConfig::default();
        assert_eq!(cfg.learning_rate(1), 0.01);
        assert_eq!(cfg.learning_rate(2), 0.001);
        assert_eq!(cfg.learning_rate(7), 0.001);
    }

    #[test]
    fn config_validation() {
        let graphs = [SparsityPattern::path(3)];
        let bad = TrainerConfig {
            lr_first_epoch: -1.0,
            ..TrainerConfig::default()
        };
        assert!(train(&graphs, &bad).is_err());
        assert!(train(&[], &TrainerConfig::default()).is_err());
        assert!(train(&[SparsityPattern::empty(0)], &TrainerConfig::default()).is_err());
    }

    #[test]
    fn log_format() {
        let rec = LogRecord {
            epoch: 1,
            graph_id: 3,
            total_fill: 4,
            actor_loss: 0.5,
            critic_loss: 0.25,
        };
        let mut out = Vec::new();
        write_log(&[rec], &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "epoch,graph_id,total_fill,l_actor,l_critic\n1,3,4,0.5,0.25\n"
        );
    }
}
