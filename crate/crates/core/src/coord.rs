//! Frame-based parameter updates driven by the Glauber dynamics: the dual
//! subgradient scheme (`Dual`), the smoothed fixed-point scheme (`Steep`)
//! and the penalized individual-gradient scheme (`Ind`).
//!
//! Each frame runs the chain for `T` time units under θ[t], measures the
//! instant rates ŝ[t], folds them into the running mean s̄[t] and then
//! updates every coordinate of θ from purely local quantities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cdm::{run_frame, CdmState};
use crate::error::{Error, Result};
use crate::graph::{Entry, Network, NodeEdgeVector};
use crate::objective::{ClampBounds, ObjectiveSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dual,
    Steep,
    Ind,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Dual, Algorithm::Steep, Algorithm::Ind];
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dual" => Ok(Algorithm::Dual),
            "steep" => Ok(Algorithm::Steep),
            "ind" => Ok(Algorithm::Ind),
            other => Err(Error::config(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Dual => "dual",
            Algorithm::Steep => "steep",
            Algorithm::Ind => "ind",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordParams {
    pub beta: f64,
    /// Smoothing parameter of `Steep` and `Ind`, in (0, 1].
    pub alpha: f64,
    /// `c` in the step size `a[t] = c/t` of `Dual`.
    pub step_scale: f64,
    /// Frame duration `T`.
    pub frame_duration: f64,
    pub bounds: ClampBounds,
}

impl CoordParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::config("beta must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("alpha must lie in (0, 1]"));
        }
        if !(self.step_scale > 0.0) {
            return Err(Error::config("step_scale must be positive"));
        }
        if !(self.frame_duration > 0.0) {
            return Err(Error::config("frame duration must be positive"));
        }
        Ok(())
    }

    /// `a[t] = c/t`, with `a[0] = 0`.
    pub fn step_size(&self, t: u64) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.step_scale / t as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoordState {
    pub theta: NodeEdgeVector,
    pub s_bar: NodeEdgeVector,
    /// Index of the next frame to run.
    pub frame: u64,
    pub cdm: CdmState,
    pub algorithm: Algorithm,
    pub params: CoordParams,
    /// Number of coordinate updates the θ box actually changed.
    pub clamp_events: u64,
}

impl CoordState {
    pub fn new(net: &Network, algorithm: Algorithm, params: CoordParams, seed: u64) -> Self {
        CoordState {
            theta: NodeEdgeVector::zeros(net),
            s_bar: NodeEdgeVector::zeros(net),
            frame: 0,
            cdm: CdmState::new(net, seed),
            algorithm,
            params,
            clamp_events: 0,
        }
    }
}

/// Running mean of the instant rates: `s̄[t] = s̄[t−1] − (s̄[t−1] − ŝ[t])/(t+1)`,
/// i.e. the exact average of ŝ[0..=t].
pub fn update_cumulative(s_bar: &NodeEdgeVector, s_hat: &NodeEdgeVector, t: u64) -> NodeEdgeVector {
    let w = 1.0 / (t as f64 + 1.0);
    NodeEdgeVector {
        nodes: s_bar
            .nodes
            .iter()
            .zip(&s_hat.nodes)
            .map(|(b, h)| b - w * (b - h))
            .collect(),
        edges: s_bar
            .edges
            .iter()
            .zip(&s_hat.edges)
            .map(|(b, h)| b - w * (b - h))
            .collect(),
    }
}

/// What node `i` may read when updating: its own parameter and rates and
/// those of its incident edges. Node `i` controls the edges to neighbors
/// with a larger index.
struct LocalView<'a> {
    net: &'a Network,
    node: usize,
    theta: &'a NodeEdgeVector,
    rates: &'a NodeEdgeVector,
}

impl<'a> LocalView<'a> {
    fn audit(&self, edge: usize) {
        debug_assert!(
            self.net.incident(self.node).iter().any(|&(_, e)| e == edge),
            "node {} read non-incident edge {}",
            self.node,
            edge
        );
    }

    fn own_theta(&self) -> f64 {
        self.theta.nodes[self.node]
    }

    fn own_rate(&self) -> f64 {
        self.rates.nodes[self.node]
    }

    fn edge_theta(&self, edge: usize) -> f64 {
        self.audit(edge);
        self.theta.edges[edge]
    }

    fn edge_rate(&self, edge: usize) -> f64 {
        self.audit(edge);
        self.rates.edges[edge]
    }

    fn controlled_edges(&self) -> impl Iterator<Item = usize> + 'a {
        let node = self.node;
        self.net
            .incident(node)
            .iter()
            .filter(move |&&(j, _)| j > node)
            .map(|&(_, e)| e)
    }
}

/// Single-coordinate rule shared by the three schemes.
#[allow(clippy::too_many_arguments)]
fn coordinate_update(
    net: &Network,
    spec: &ObjectiveSpec,
    algorithm: Algorithm,
    params: &CoordParams,
    t: u64,
    entry: Entry,
    theta: f64,
    rate: f64,
) -> f64 {
    let beta = params.beta;
    match algorithm {
        Algorithm::Dual => {
            let drift = spec.primal(net, entry, theta, beta) - rate;
            theta + params.step_size(t) * drift
        }
        Algorithm::Steep => {
            let r = params.bounds.clamp_rate(rate);
            theta + params.alpha * (spec.target(net, entry, r, beta) - theta)
        }
        Algorithm::Ind => {
            let r = params.bounds.clamp_rate(rate);
            let grad = r * (1.0 - r);
            theta + params.alpha / beta * grad * (spec.target(net, entry, r, beta) - theta)
        }
    }
}

fn apply_updates(net: &Network, spec: &ObjectiveSpec, state: &mut CoordState, rates: &NodeEdgeVector) {
    let t = state.frame;
    let algorithm = state.algorithm;
    let params = state.params;
    let mut next = state.theta.clone();
    let mut clamps = 0;
    let mut put = |slot: &mut f64, raw: f64| {
        let c = params.bounds.clamp_theta(raw);
        if c != raw {
            clamps += 1;
        }
        *slot = c;
    };
    for i in 0..net.node_count() {
        let view = LocalView {
            net,
            node: i,
            theta: &state.theta,
            rates,
        };
        let raw = coordinate_update(net, spec, algorithm, &params, t, Entry::Node(i), view.own_theta(), view.own_rate());
        put(&mut next.nodes[i], raw);
        for e in view.controlled_edges() {
            let raw = coordinate_update(net, spec, algorithm, &params, t, Entry::Edge(e), view.edge_theta(e), view.edge_rate(e));
            put(&mut next.edges[e], raw);
        }
    }
    state.theta = next;
    state.clamp_events += clamps;
    state.frame += 1;
}

fn require(state: &CoordState, algorithm: Algorithm) -> Result<()> {
    if state.algorithm != algorithm {
        return Err(Error::usage(format!(
            "state runs {}, not {}",
            state.algorithm, algorithm
        )));
    }
    Ok(())
}

/// Dual subgradient step on the instant rates with `a[t] = c/t`:
/// `θ_n ← [θ_n + a[t]·(y*_n(θ_n) − ŝ_n)]`, where `y*` is the clamped
/// `C′⁻¹(−θ_i/β)` / `U′⁻¹(θ_ij/β)`.
pub fn step_dual(net: &Network, spec: &ObjectiveSpec, state: &mut CoordState, s_hat: &NodeEdgeVector) -> Result<()> {
    require(state, Algorithm::Dual)?;
    state.s_bar = update_cumulative(&state.s_bar, s_hat, state.frame);
    apply_updates(net, spec, state, s_hat);
    Ok(())
}

/// Exponential moving average towards the fixed-point target evaluated at
/// the cumulative rates: `θ_i ← [θ_i + α(−β·C′(s̄_i) − θ_i)]`, and
/// `θ_ij ← [θ_ij + α(β·U′(s̄_ij) − θ_ij)]`.
pub fn step_steep(net: &Network, spec: &ObjectiveSpec, state: &mut CoordState, s_hat: &NodeEdgeVector) -> Result<()> {
    require(state, Algorithm::Steep)?;
    state.s_bar = update_cumulative(&state.s_bar, s_hat, state.frame);
    let rates = state.s_bar.clone();
    apply_updates(net, spec, state, &rates);
    Ok(())
}

/// Payoff-gradient step with the plug-in self gradient `s̄_n(1 − s̄_n)`:
/// `θ_n ← [θ_n + (α/β)·s̄_n(1 − s̄_n)·(target_n(s̄_n) − θ_n)]`.
pub fn step_ind(net: &Network, spec: &ObjectiveSpec, state: &mut CoordState, s_hat: &NodeEdgeVector) -> Result<()> {
    require(state, Algorithm::Ind)?;
    state.s_bar = update_cumulative(&state.s_bar, s_hat, state.frame);
    let rates = state.s_bar.clone();
    apply_updates(net, spec, state, &rates);
    Ok(())
}

pub fn step(net: &Network, spec: &ObjectiveSpec, state: &mut CoordState, s_hat: &NodeEdgeVector) -> Result<()> {
    match state.algorithm {
        Algorithm::Dual => step_dual(net, spec, state, s_hat),
        Algorithm::Steep => step_steep(net, spec, state, s_hat),
        Algorithm::Ind => step_ind(net, spec, state, s_hat),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameRecord {
    pub t: u64,
    /// Parameter in force during the frame.
    pub theta: NodeEdgeVector,
    pub s_hat: NodeEdgeVector,
    pub s_bar: NodeEdgeVector,
    /// Coordination gain at s̄[t].
    pub gain: f64,
    pub events: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trace {
    pub scenario: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub frames: u64,
    /// Sampled per-frame records (every frame unless thinned).
    pub records: Vec<FrameRecord>,
    /// Gain at s̄[t] for every frame.
    pub gains: Vec<f64>,
    pub final_theta: NodeEdgeVector,
    pub final_s_bar: NodeEdgeVector,
    pub clamp_events: u64,
    pub total_events: u64,
    pub total_messages: u64,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub frames: u64,
    pub seed: u64,
    pub theta0: Option<NodeEdgeVector>,
    /// Keep a full record every `record_every` frames (the last frame is
    /// always kept); 1 keeps everything.
    pub record_every: u64,
    pub scenario: String,
}

impl RunOptions {
    pub fn new(frames: u64, seed: u64) -> Self {
        RunOptions {
            frames,
            seed,
            theta0: None,
            record_every: 1,
            scenario: String::new(),
        }
    }
}

/// Runs `frames` frames of the chosen algorithm from θ[0] (zeros unless
/// overridden).
pub fn run(net: &Network, spec: &ObjectiveSpec, algorithm: Algorithm, params: CoordParams, opts: &RunOptions) -> Result<Trace> {
    params.validate()?;
    if opts.frames == 0 {
        return Err(Error::config("frames must be at least 1"));
    }
    let mut state = CoordState::new(net, algorithm, params, opts.seed);
    if let Some(t0) = &opts.theta0 {
        t0.check_shape(net)?;
        state.theta = t0.map(|x| params.bounds.clamp_theta(x));
    }
    let every = opts.record_every.max(1);
    let mut records = Vec::new();
    let mut gains = Vec::with_capacity(opts.frames as usize);
    for t in 0..opts.frames {
        let theta_t = state.theta.clone();
        let stats = run_frame(net, &state.theta, &mut state.cdm, params.frame_duration);
        step(net, spec, &mut state, &stats.s_hat)?;
        let g = spec.gain(net, &state.s_bar);
        gains.push(g);
        if t % every == 0 || t + 1 == opts.frames {
            records.push(FrameRecord {
                t,
                theta: theta_t,
                s_hat: stats.s_hat,
                s_bar: state.s_bar.clone(),
                gain: g,
                events: stats.events,
            });
        }
    }
    Ok(Trace {
        scenario: opts.scenario.clone(),
        algorithm,
        seed: opts.seed,
        frames: opts.frames,
        records,
        gains,
        final_theta: state.theta,
        final_s_bar: state.s_bar,
        clamp_events: state.clamp_events,
        total_events: state.cdm.event_count,
        total_messages: state.cdm.messages,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum AltSequenceOutcome {
    /// Largest deviation found across both identities.
    Deviation(f64),
    /// The identity does not apply to this trace.
    Skipped(String),
}

/// Rebuilds `ρ[t] = θ[t]/α + (1 − 1/α)·θ[t−1]` from a `Steep` trace and
/// checks that (a) `ρ[t+1]` equals the fixed-point target at s̄[t] and
/// (b) `θ[t] = Σ_{m<t} α(1−α)^m ρ[t−m] + (1−α)^t θ[0]`.
pub fn alternative_sequence_check(net: &Network, spec: &ObjectiveSpec, trace: &Trace, params: &CoordParams) -> AltSequenceOutcome {
    if trace.algorithm != Algorithm::Steep {
        return AltSequenceOutcome::Skipped(format!("trace is from {}, not steep", trace.algorithm));
    }
    if trace.clamp_events > 0 {
        return AltSequenceOutcome::Skipped(format!(
            "{} clamping events; the identity only holds on the unclamped path",
            trace.clamp_events
        ));
    }
    if trace.records.len() as u64 != trace.frames {
        return AltSequenceOutcome::Skipped("trace is thinned".into());
    }
    let alpha = params.alpha;
    let mut thetas: Vec<Vec<f64>> = trace.records.iter().map(|r| r.theta.to_flat()).collect();
    thetas.push(trace.final_theta.to_flat());
    let entries: Vec<Entry> = net.entries().collect();
    let d = entries.len();
    let frames = trace.frames as usize;

    let rho: Vec<Vec<f64>> = (0..=frames)
        .map(|t| {
            if t == 0 {
                thetas[0].clone()
            } else {
                (0..d)
                    .map(|k| thetas[t][k] / alpha + (1.0 - 1.0 / alpha) * thetas[t - 1][k])
                    .collect()
            }
        })
        .collect();

    let mut worst: f64 = 0.0;
    for t in 0..frames {
        let s_bar = &trace.records[t].s_bar;
        for (k, &en) in entries.iter().enumerate() {
            let r = params.bounds.clamp_rate(s_bar.get(en));
            let want = spec.target(net, en, r, params.beta);
            worst = worst.max((rho[t + 1][k] - want).abs());
        }
    }
    for t in 1..=frames {
        for k in 0..d {
            let mut acc = (1.0 - alpha).powi(t as i32) * thetas[0][k];
            let mut w = alpha;
            for m in 0..t {
                acc += w * rho[t - m][k];
                w *= 1.0 - alpha;
            }
            worst = worst.max((thetas[t][k] - acc).abs());
        }
    }
    AltSequenceOutcome::Deviation(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_topology, TopologyKind};
    use crate::objective::{a1_bounds, builtin_objective, BOUND_EPSILON};
    use approx::assert_abs_diff_eq;

    fn params(beta: f64, bounds: ClampBounds) -> CoordParams {
        CoordParams {
            beta,
            alpha: 0.5,
            step_scale: 3.0,
            frame_duration: 10.0,
            bounds,
        }
    }

    fn wide() -> ClampBounds {
        ClampBounds::new(-1e6, 1e6, 1e-4).unwrap()
    }

    fn one_node() -> Network {
        Network::new(1, &[]).unwrap()
    }

    fn scalar(x: f64) -> NodeEdgeVector {
        NodeEdgeVector {
            nodes: vec![x],
            edges: vec![],
        }
    }

    #[test]
    fn cumulative_mean() {
        let net = one_node();
        let half = NodeEdgeVector::filled(&net, 0.5);
        assert_eq!(update_cumulative(&half, &half, 7), half);
        assert_abs_diff_eq!(update_cumulative(&scalar(0.9), &scalar(0.3), 0).nodes[0], 0.3);
        let mut s = scalar(0.0);
        for (t, x) in [0.2, 0.4, 0.6].into_iter().enumerate() {
            s = update_cumulative(&s, &scalar(x), t as u64);
        }
        assert_abs_diff_eq!(s.nodes[0], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn step_sizes() {
        let p = params(1.0, wide());
        assert_eq!(p.step_size(0), 0.0);
        assert_abs_diff_eq!(p.step_size(3), 1.0);
        // a[t] = c/t: the partial sums diverge like c·ln t while Σ a² stays
        // below c²·π²/6
        let s1: f64 = (1..100_000).map(|t| p.step_size(t)).sum();
        let s2: f64 = (1..100_000).map(|t| p.step_size(t).powi(2)).sum();
        assert!(s1 > 3.0 * (100_000f64).ln() * 0.99);
        assert!(s2 < 9.0 * std::f64::consts::PI.powi(2) / 6.0);
    }

    #[test]
    fn dual_first_frame_is_frozen() {
        let net = one_node();
        let spec = builtin_objective("C1").unwrap();
        let mut st = CoordState::new(&net, Algorithm::Dual, params(1.0, wide()), 0);
        st.theta = scalar(0.7);
        step_dual(&net, &spec, &mut st, &scalar(0.9)).unwrap();
        assert_eq!(st.theta.nodes[0], 0.7);
        assert_eq!(st.frame, 1);
    }

    #[test]
    fn dual_hand_examples() {
        // a[t] = 0.1 at t = 30 with c = 3
        let net = Network::new(2, &[(0, 1)]).unwrap();
        let spec = builtin_objective("C1").unwrap();
        let mut st = CoordState::new(&net, Algorithm::Dual, params(1.0, wide()), 0);
        st.frame = 30;
        st.theta = NodeEdgeVector {
            nodes: vec![0.0, 0.0],
            edges: vec![2.0],
        };
        let s_hat = NodeEdgeVector::filled(&net, 0.5);
        step_dual(&net, &spec, &mut st, &s_hat).unwrap();
        assert_abs_diff_eq!(st.theta.nodes[0], -0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(st.theta.edges[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn steep_hand_examples() {
        let net = Network::new(2, &[(0, 1)]).unwrap();
        let spec = builtin_objective("C1").unwrap();
        let mut p = params(5.0, wide());
        // α = 1 lands on the target
        p.alpha = 1.0;
        let mut st = CoordState::new(&net, Algorithm::Steep, p, 0);
        st.frame = 1;
        st.s_bar = NodeEdgeVector::filled(&net, 0.3);
        step_steep(&net, &spec, &mut st, &NodeEdgeVector::filled(&net, 0.3)).unwrap();
        assert_abs_diff_eq!(st.theta.nodes[0], -5.0 * 4.0 * 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(st.theta.edges[0], 5.0 / 0.3, epsilon = 1e-12);

        // stationary points
        let mut st = CoordState::new(&net, Algorithm::Steep, params(5.0, wide()), 0);
        st.frame = 1;
        st.s_bar = NodeEdgeVector {
            nodes: vec![0.447, 0.447],
            edges: vec![0.5],
        };
        st.theta = NodeEdgeVector {
            nodes: vec![-8.94, -8.94],
            edges: vec![10.0],
        };
        let s_hat = st.s_bar.clone();
        step_steep(&net, &spec, &mut st, &s_hat).unwrap();
        assert_abs_diff_eq!(st.theta.nodes[0], -8.94, epsilon = 1e-12);
        assert_abs_diff_eq!(st.theta.edges[0], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn ind_hand_examples() {
        let net = one_node();
        let spec = builtin_objective("C1").unwrap();
        let mut st = CoordState::new(&net, Algorithm::Ind, params(5.0, wide()), 0);
        st.frame = 1;
        st.s_bar = scalar(0.5);
        step_ind(&net, &spec, &mut st, &scalar(0.5)).unwrap();
        assert_abs_diff_eq!(st.theta.nodes[0], -0.25, epsilon = 1e-15);

        // zero drift at the shared stationary point
        let mut st = CoordState::new(&net, Algorithm::Ind, params(5.0, wide()), 0);
        st.frame = 1;
        st.s_bar = scalar(0.3);
        st.theta = scalar(-6.0);
        step_ind(&net, &spec, &mut st, &scalar(0.3)).unwrap();
        assert_abs_diff_eq!(st.theta.nodes[0], -6.0, epsilon = 1e-12);
    }

    #[test]
    fn ind_gradient_vanishes_at_rate_clamp() {
        let net = one_node();
        let spec = builtin_objective("C1").unwrap();
        let bounds = ClampBounds::new(-1e6, 1e6, 0.01).unwrap();
        let mut st = CoordState::new(&net, Algorithm::Ind, params(5.0, bounds), 0);
        st.frame = 5;
        // previous mean 0 and new sample 0 keep s̄ at the clamp boundary
        step_ind(&net, &spec, &mut st, &scalar(0.0)).unwrap();
        let moved = st.theta.nodes[0].abs();
        let target = (5.0 * 4.0 * 0.01f64).abs();
        let full = 0.5 / 5.0 * target;
        assert_abs_diff_eq!(moved / full, 0.01 * 0.99, epsilon = 1e-12);
    }

    #[test]
    fn wrong_algorithm_is_rejected() {
        let net = one_node();
        let spec = builtin_objective("C1").unwrap();
        let mut st = CoordState::new(&net, Algorithm::Steep, params(1.0, wide()), 0);
        assert!(step_dual(&net, &spec, &mut st, &scalar(0.5)).is_err());
    }

    #[test]
    fn single_frame_run_respects_bounds() {
        let net = build_topology(TopologyKind::Star, 5, None, 0).unwrap();
        let spec = builtin_objective("C1").unwrap();
        let bounds = a1_bounds(&net, &spec, 5.0, BOUND_EPSILON).unwrap();
        for alg in Algorithm::ALL {
            let tr = run(&net, &spec, alg, params(5.0, bounds), &RunOptions::new(1, 4)).unwrap();
            assert_eq!(tr.records.len(), 1);
            assert_eq!(tr.gains.len(), 1);
            assert!(tr.final_theta.iter().all(|x| bounds.contains(x)));
        }
    }

    #[test]
    fn clamp_invariant_over_a_run() {
        let net = build_topology(TopologyKind::Complete, 4, None, 0).unwrap();
        let spec = builtin_objective("C2").unwrap();
        let bounds = ClampBounds::new(-3.0, 3.0, 1e-4).unwrap();
        for alg in Algorithm::ALL {
            let tr = run(&net, &spec, alg, params(5.0, bounds), &RunOptions::new(300, 2)).unwrap();
            for r in &tr.records {
                assert!(r.theta.iter().all(|x| bounds.contains(x)));
                assert!(r.s_bar.iter().all(|x| (0.0..=1.0).contains(&x)));
            }
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let net = build_topology(TopologyKind::Star, 5, None, 0).unwrap();
        let spec = builtin_objective("C1").unwrap();
        let bounds = a1_bounds(&net, &spec, 5.0, BOUND_EPSILON).unwrap();
        let a = run(&net, &spec, Algorithm::Ind, params(5.0, bounds), &RunOptions::new(200, 8)).unwrap();
        let b = run(&net, &spec, Algorithm::Ind, params(5.0, bounds), &RunOptions::new(200, 8)).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn thinned_records_keep_last_frame() {
        let net = build_topology(TopologyKind::Line, 3, None, 0).unwrap();
        let spec = builtin_objective("C1").unwrap();
        let bounds = a1_bounds(&net, &spec, 2.0, BOUND_EPSILON).unwrap();
        let mut o = RunOptions::new(25, 1);
        o.record_every = 10;
        let tr = run(&net, &spec, Algorithm::Steep, params(2.0, bounds), &o).unwrap();
        let ts: Vec<u64> = tr.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0, 10, 20, 24]);
        assert_eq!(tr.gains.len(), 25);
    }

    #[test]
    fn alternative_sequence_on_unclamped_run() {
        let net = build_topology(TopologyKind::Line, 3, None, 0).unwrap();
        let spec = builtin_objective("C1").unwrap();
        let p = params(2.0, wide());
        let tr = run(&net, &spec, Algorithm::Steep, p, &RunOptions::new(100, 3)).unwrap();
        assert_eq!(tr.clamp_events, 0);
        match alternative_sequence_check(&net, &spec, &tr, &p) {
            AltSequenceOutcome::Deviation(d) => assert!(d < 1e-8, "deviation {d}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn alternative_sequence_alpha_one() {
        let net = build_topology(TopologyKind::Line, 3, None, 0).unwrap();
        let spec = builtin_objective("C1").unwrap();
        let mut p = params(2.0, wide());
        p.alpha = 1.0;
        let tr = run(&net, &spec, Algorithm::Steep, p, &RunOptions::new(30, 3)).unwrap();
        match alternative_sequence_check(&net, &spec, &tr, &p) {
            AltSequenceOutcome::Deviation(d) => assert!(d < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn alternative_sequence_skips_clamped_runs() {
        let net = build_topology(TopologyKind::Line, 3, None, 0).unwrap();
        let spec = builtin_objective("C1").unwrap();
        let p = params(2.0, ClampBounds::new(-0.5, 0.5, 1e-4).unwrap());
        let tr = run(&net, &spec, Algorithm::Steep, p, &RunOptions::new(50, 3)).unwrap();
        assert!(tr.clamp_events > 0);
        assert!(matches!(
            alternative_sequence_check(&net, &spec, &tr, &p),
            AltSequenceOutcome::Skipped(_)
        ));
    }

    #[test]
    #[cfg(debug_assertions)]
    #[should_panic(expected = "non-incident")]
    fn local_view_rejects_remote_edges() {
        let net = build_topology(TopologyKind::Line, 4, None, 0).unwrap();
        let theta = NodeEdgeVector::zeros(&net);
        let view = LocalView {
            net: &net,
            node: 0,
            theta: &theta,
            rates: &theta,
        };
        // edge 2 joins nodes 3 and 4
        view.edge_theta(2);
    }
}
