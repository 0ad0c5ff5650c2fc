//! Continuous-time Glauber dynamics for a fixed parameter θ.
//!
//! Every node carries a unit-rate Poisson clock. The superposition is
//! simulated directly: holding times are exponential with rate |V| and the
//! ticking node is drawn uniformly. On a tick node `i` becomes active with
//! probability `sigmoid(θ_i + Σ_{j∈N(i)} σ_j θ_ij)`, which makes the chain
//! reversible with stationary law `p_θ(σ) ∝ exp⟨θ, φ(σ)⟩`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::Result;
use crate::graph::{Configuration, Network, NodeEdgeVector, ENUMERATION_CAP};

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `θ_i + Σ_{j∈N(i)} σ_j θ_ij`
pub fn local_field(net: &Network, theta: &NodeEdgeVector, config: &Configuration, i: usize) -> f64 {
    net.incident(i)
        .iter()
        .filter(|&&(j, _)| config.is_active(j))
        .fold(theta.nodes[i], |acc, &(_, e)| acc + theta.edges[e])
}

/// Probability that node `i` is active after its next tick.
pub fn activation_probability(net: &Network, theta: &NodeEdgeVector, config: &Configuration, i: usize) -> f64 {
    sigmoid(local_field(net, theta, config, i))
}

/// One node's state change.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub node: usize,
    pub was_active: bool,
    pub is_active: bool,
}

#[derive(Clone, Debug)]
pub struct CdmState {
    pub config: Configuration,
    pub clock: f64,
    pub event_count: u64,
    pub messages: u64,
    rng: ChaCha8Rng,
    // absolute time of the next tick once drawn; survives frame boundaries
    pending: Option<f64>,
}

impl CdmState {
    /// All nodes inactive at time 0.
    pub fn new(net: &Network, seed: u64) -> Self {
        Self::with_config(Configuration::zeros(net.node_count()), seed)
    }

    pub fn with_config(config: Configuration, seed: u64) -> Self {
        CdmState {
            config,
            clock: 0.0,
            event_count: 0,
            messages: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: None,
        }
    }

    fn next_tick(&mut self, node_count: usize) -> f64 {
        match self.pending {
            Some(t) => t,
            None => {
                let hold = Exp::new(node_count as f64)
                    .expect("positive rate")
                    .sample(&mut self.rng);
                let t = self.clock + hold;
                self.pending = Some(t);
                t
            }
        }
    }
}

/// Advances the chain by one tick: moves the clock to the next tick, picks
/// the ticking node uniformly and resamples its state. The node broadcasts
/// its decision to every neighbor, which is charged to `messages`.
pub fn cdm_step(net: &Network, theta: &NodeEdgeVector, state: &mut CdmState) -> Event {
    let n = net.node_count();
    let tick = state.next_tick(n);
    state.pending = None;
    state.clock = tick;
    let node = state.rng.gen_range(0..n);
    let p = activation_probability(net, theta, &state.config, node);
    let was_active = state.config.is_active(node);
    let is_active = state.rng.gen::<f64>() < p;
    state.config.set(node, is_active);
    state.event_count += 1;
    state.messages += net.degree(node) as u64;
    Event {
        node,
        was_active,
        is_active,
    }
}

/// Per-frame empirical rates.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameStats {
    /// Fraction of the frame each node was active / each edge coordinated.
    pub s_hat: NodeEdgeVector,
    pub duration: f64,
    pub events: u64,
    pub messages: u64,
}

/// Runs the chain for `duration` time units under θ and returns the exact
/// holding-time-weighted average of φ(σ(τ)) over the frame. The chain state
/// (including a pending tick) carries over to the next frame.
pub fn run_frame(net: &Network, theta: &NodeEdgeVector, state: &mut CdmState, duration: f64) -> FrameStats {
    assert!(duration > 0.0, "frame duration must be positive");
    let n = net.node_count();
    let start = state.clock;
    let end = start + duration;
    let events0 = state.event_count;
    let messages0 = state.messages;

    // accumulated active time and the instant each entry last switched on
    let mut node_time = vec![0.0; n];
    let mut node_since = vec![start; n];
    let mut edge_time = vec![0.0; net.edge_count()];
    let mut edge_since = vec![start; net.edge_count()];

    loop {
        let tick = state.next_tick(n);
        if tick > end {
            break;
        }
        let ev = cdm_step(net, theta, state);
        if ev.was_active == ev.is_active {
            continue;
        }
        let i = ev.node;
        if ev.is_active {
            node_since[i] = tick;
        } else {
            node_time[i] += tick - node_since[i];
        }
        for &(j, e) in net.incident(i) {
            if !state.config.is_active(j) {
                continue;
            }
            if ev.is_active {
                edge_since[e] = tick;
            } else {
                edge_time[e] += tick - edge_since[e];
            }
        }
    }
    state.clock = end;

    for i in 0..n {
        if state.config.is_active(i) {
            node_time[i] += end - node_since[i];
        }
    }
    for (e, &(i, j)) in net.edges().iter().enumerate() {
        if state.config.is_active(i) && state.config.is_active(j) {
            edge_time[e] += end - edge_since[e];
        }
    }

    let norm = |v: Vec<f64>| -> Vec<f64> {
        v.into_iter()
            .map(|x| (x / duration).clamp(0.0, 1.0))
            .collect()
    };
    FrameStats {
        s_hat: NodeEdgeVector {
            nodes: norm(node_time),
            edges: norm(edge_time),
        },
        duration,
        events: state.event_count - events0,
        messages: state.messages - messages0,
    }
}

/// Time-weighted occupancy of every configuration over `total_time`, indexed
/// like [`crate::graph::enumerate_configurations`]. The chain starts from
/// the all-inactive configuration.
pub fn empirical_distribution(net: &Network, theta: &NodeEdgeVector, total_time: f64, seed: u64) -> Result<Vec<f64>> {
    net.check_enumerable(ENUMERATION_CAP)?;
    theta.check_shape(net)?;
    let n = net.node_count();
    let mut state = CdmState::new(net, seed);
    let mut occupancy = vec![0.0; 1 << n];
    let mut mask = state.config.mask() as usize;
    let mut last = 0.0;
    loop {
        let tick = state.next_tick(n);
        if tick > total_time {
            break;
        }
        let ev = cdm_step(net, theta, &mut state);
        if ev.was_active != ev.is_active {
            occupancy[mask] += tick - last;
            last = tick;
            mask ^= 1 << ev.node;
        }
    }
    occupancy[mask] += total_time - last;
    let sum: f64 = occupancy.iter().sum();
    occupancy.iter_mut().for_each(|p| *p /= sum);
    Ok(occupancy)
}
