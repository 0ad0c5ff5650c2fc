//! The coordination game: every node and every edge is a player whose
//! strategy is its own parameter θ_n. Payoffs carry the designed penalty
//! `V_n = θ_n s_n + ln(1 − s_n)`, which turns the game into an ordinal
//! potential game with potential `−D(θ)`.
//!
//! All dynamics here use exact marginals and are limited to enumerable
//! networks.

use serde::Serialize;

use crate::cdm::sigmoid;
use crate::error::{Error, Result};
use crate::graph::{Entry, Network, NodeEdgeVector};
use crate::objective::{a1_bounds, ClampBounds, ObjectiveSpec, BOUND_EPSILON};
use crate::oracle::{self, SolverOptions};

const STALL_ROUNDS: usize = 20;
const MIN_DAMPING: f64 = 1e-3;
const SOCIAL_SCHEDULE: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

#[derive(Clone, Debug)]
pub struct GameInstance {
    pub net: Network,
    pub spec: ObjectiveSpec,
    pub beta: f64,
    /// Strategy box searched by best responses.
    pub bounds: ClampBounds,
    players: Vec<Entry>,
}

impl GameInstance {
    /// Uses the default clamp box for `(net, spec, beta)`.
    pub fn new(net: Network, spec: ObjectiveSpec, beta: f64) -> Result<Self> {
        let bounds = a1_bounds(&net, &spec, beta, BOUND_EPSILON)?;
        Self::with_bounds(net, spec, beta, bounds)
    }

    pub fn with_bounds(net: Network, spec: ObjectiveSpec, beta: f64, bounds: ClampBounds) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::config(format!("beta must be positive and finite, got {beta}")));
        }
        let players = net.entries().collect();
        Ok(GameInstance {
            net,
            spec,
            beta,
            bounds,
            players,
        })
    }

    /// Nodes first, then edges.
    pub fn players(&self) -> &[Entry] {
        &self.players
    }

    fn check_player(&self, player: Entry) -> Result<()> {
        let ok = match player {
            Entry::Node(i) => i < self.net.node_count(),
            Entry::Edge(e) => e < self.net.edge_count(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::usage(format!("no player {player:?}")))
        }
    }
}

/// Log-odds of `φ_n = 1` when θ_n is zeroed. Since φ_n is binary,
/// `s_n(x, θ_{−n}) = sigmoid(x + offset)` for every x.
pub fn player_offset(game: &GameInstance, theta: &NodeEdgeVector, player: Entry) -> Result<f64> {
    game.check_player(player)?;
    let mut probe = theta.clone();
    probe.set(player, 0.0);
    oracle::log_odds(&game.net, &probe, player)
}

/// `s_n` as a function of the player's own strategy, others held fixed.
pub fn own_marginal(offset: f64, x: f64) -> f64 {
    sigmoid(x + offset)
}

fn player_rate(game: &GameInstance, theta: &NodeEdgeVector, player: Entry) -> Result<f64> {
    game.check_player(player)?;
    let s = oracle::marginals(&game.net, theta)?.get(player);
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Evaluation(format!("marginal of {player:?} is {s}, outside (0, 1)")));
    }
    Ok(s)
}

fn penalty_at(theta_n: f64, s: f64) -> f64 {
    theta_n * s + (-s).ln_1p()
}

/// `V_n(θ) = θ_n s_n(θ) + ln(1 − s_n(θ))`, equal to `∫_{−∞}^{θ_n} x ∂s_n/∂x dx`.
pub fn penalty(game: &GameInstance, theta: &NodeEdgeVector, player: Entry) -> Result<f64> {
    let s = player_rate(game, theta, player)?;
    Ok(penalty_at(theta.get(player), s))
}

fn payoff_at(game: &GameInstance, player: Entry, theta_n: f64, s: f64) -> f64 {
    let v = penalty_at(theta_n, s) / game.beta;
    match player {
        Entry::Node(i) => -game.spec.cost(i).value(s) - v,
        Entry::Edge(e) => game.spec.utility(&game.net, e).value(s) - v,
    }
}

fn payoff_gradient_at(game: &GameInstance, player: Entry, theta_n: f64, s: f64) -> f64 {
    let b = game.beta;
    match player {
        Entry::Node(i) => -s * (1.0 - s) * (game.spec.cost(i).deriv(s) + theta_n / b),
        Entry::Edge(e) => s * (1.0 - s) * (game.spec.utility(&game.net, e).deriv(s) - theta_n / b),
    }
}

/// Node: `−C_i(s_i) − V_i/β`; edge: `U_ij(s_ij) − V_ij/β`.
pub fn payoff(game: &GameInstance, theta: &NodeEdgeVector, player: Entry) -> Result<f64> {
    let s = player_rate(game, theta, player)?;
    Ok(payoff_at(game, player, theta.get(player), s))
}

/// Derivative of the player's payoff in its own strategy.
pub fn payoff_gradient(game: &GameInstance, theta: &NodeEdgeVector, player: Entry) -> Result<f64> {
    let s = player_rate(game, theta, player)?;
    Ok(payoff_gradient_at(game, player, theta.get(player), s))
}

/// `P(θ) = −D(θ)`.
pub fn potential(game: &GameInstance, theta: &NodeEdgeVector) -> Result<f64> {
    Ok(-oracle::dual_value(&game.net, &game.spec, game.beta, theta)?)
}

enum Bracketed {
    Root(f64),
    Below,
    Above,
}

fn bisect_response(game: &GameInstance, theta: &NodeEdgeVector, player: Entry, tol: f64) -> Result<Bracketed> {
    if !(tol > 0.0) {
        return Err(Error::config("tolerance must be positive"));
    }
    let offset = player_offset(game, theta, player)?;
    let h = |x: f64| x - game.spec.target(&game.net, player, own_marginal(offset, x), game.beta);
    let (mut lo, mut hi) = (game.bounds.theta_min, game.bounds.theta_max);
    let (h_lo, h_hi) = (h(lo), h(hi));
    if h_lo.is_nan() || h_hi.is_nan() {
        return Err(Error::Evaluation(format!("best response of {player:?} is undefined")));
    }
    if h_lo > 0.0 {
        return Ok(Bracketed::Below);
    }
    if h_hi < 0.0 {
        return Ok(Bracketed::Above);
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..300 {
        mid = 0.5 * (lo + hi);
        let hm = h(mid);
        if hm.abs() <= tol || mid <= lo || mid >= hi {
            break;
        }
        if hm > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Bracketed::Root(mid))
}

/// Solves `x = target_n(s_n(x, θ_{−n}))` by bisection on the strategy box.
/// `x − target_n(s_n(x))` is strictly increasing, so the root is unique.
pub fn best_response(game: &GameInstance, theta: &NodeEdgeVector, player: Entry, tol: f64) -> Result<f64> {
    match bisect_response(game, theta, player, tol)? {
        Bracketed::Root(x) => Ok(x),
        _ => Err(Error::Bracket {
            player: game.net.label(player),
            lo: game.bounds.theta_min,
            hi: game.bounds.theta_max,
        }),
    }
}

/// Best response over the strategy box. The payoff is single-peaked in the
/// player's own strategy, so when the root lies outside the box the nearest
/// endpoint is optimal.
pub fn projected_best_response(game: &GameInstance, theta: &NodeEdgeVector, player: Entry, tol: f64) -> Result<f64> {
    Ok(match bisect_response(game, theta, player, tol)? {
        Bracketed::Root(x) => x,
        Bracketed::Below => game.bounds.theta_min,
        Bracketed::Above => game.bounds.theta_max,
    })
}

/// One row of the potential-ascent history.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AscentRow {
    pub round: usize,
    pub potential: f64,
    /// Sup-norm best-response displacement at the start of the round.
    pub displacement: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NashResult {
    pub theta_ne: NodeEdgeVector,
    pub lambda_ne: NodeEdgeVector,
    pub potential_value: f64,
    pub gain_ne: f64,
    /// Gain of the unregularized optimum, approximated from above in β.
    pub social_gain: f64,
    pub gap_to_social_opt: f64,
    /// `|V|·ln 2/β`
    pub poa_bound: f64,
    /// `social_gain / gain_ne` when both are positive.
    pub poa_ratio: Option<f64>,
    pub residual: f64,
    pub rounds: usize,
    /// Damping in force when the dynamics stopped.
    pub final_alpha: f64,
    /// `‖θ^NE − θ°‖∞` against the regularized optimum.
    pub oracle_distance: f64,
    pub history: Vec<AscentRow>,
}

fn br_profile(game: &GameInstance, theta: &NodeEdgeVector, tol: f64) -> Result<NodeEdgeVector> {
    let mut br = theta.clone();
    for &p in game.players() {
        br.set(p, projected_best_response(game, theta, p, tol)?);
    }
    Ok(br)
}

/// Simultaneous damped projected best-response step
/// `θ_n ← θ_n + α(BR_n(θ_{−n}) − θ_n)`; returns the new profile and the
/// sup-norm displacement `‖BR − θ‖∞`.
pub fn jacobi_step(game: &GameInstance, theta: &NodeEdgeVector, alpha: f64, tol: f64) -> Result<(NodeEdgeVector, f64)> {
    check_alpha(alpha)?;
    let br = br_profile(game, theta, tol)?;
    let displacement = br.sup_distance(theta);
    let mut next = theta.clone();
    for (t, b) in next.iter_mut().zip(br.iter()) {
        *t += alpha * (b - *t);
    }
    Ok((next, displacement))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::usage(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

/// Runs damped Jacobi dynamics from zero until the best-response
/// displacement drops below `tol`, then compares with the regularized
/// optimum and with the unregularized social optimum. The damping starts at
/// `alpha` and is halved whenever the displacement has not reached a new
/// low for a while, which breaks the limit cycles plain damping can fall
/// into on strongly coupled graphs.
pub fn find_ne(game: &GameInstance, tol: f64, max_rounds: usize, alpha: f64) -> Result<NashResult> {
    if !(tol > 0.0) {
        return Err(Error::config("tolerance must be positive"));
    }
    check_alpha(alpha)?;
    let br_tol = tol * 1e-3;
    let mut alpha = alpha;
    let mut theta = NodeEdgeVector::zeros(&game.net);
    let mut history = Vec::new();
    let mut rounds = 0;
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let residual = loop {
        let (next, disp) = jacobi_step(game, &theta, alpha, br_tol)?;
        history.push(AscentRow {
            round: rounds,
            potential: potential(game, &theta)?,
            displacement: disp,
        });
        if disp <= tol {
            break disp;
        }
        if rounds >= max_rounds {
            return Err(Error::NonConvergence {
                iterations: rounds,
                residual: disp,
                best: None,
            });
        }
        if disp < best {
            best = disp;
            stale = 0;
        } else {
            stale += 1;
            if stale >= STALL_ROUNDS && alpha > MIN_DAMPING {
                alpha = (alpha * 0.5).max(MIN_DAMPING);
                stale = 0;
            }
        }
        theta = next;
        rounds += 1;
    };

    let net = &game.net;
    let exact = oracle::solve_a_cg_opt(
        net,
        &game.spec,
        game.beta,
        &SolverOptions {
            theta0: Some(theta.clone()),
            ..SolverOptions::default()
        },
    )?;
    let oracle_distance = theta.sup_distance(&exact.theta_star);

    let lambda_ne = oracle::marginals(net, &theta)?;
    let gain_ne = game.spec.gain(net, &lambda_ne);
    let social_gain = social_optimum(game)?.max(exact.gain);
    let poa_ratio = (gain_ne > 0.0 && social_gain > 0.0).then(|| social_gain / gain_ne);
    Ok(NashResult {
        potential_value: potential(game, &theta)?,
        lambda_ne,
        gain_ne,
        social_gain,
        gap_to_social_opt: social_gain - gain_ne,
        poa_bound: net.node_count() as f64 * std::f64::consts::LN_2 / game.beta,
        poa_ratio,
        residual,
        rounds,
        final_alpha: alpha,
        oracle_distance,
        theta_ne: theta,
        history,
    })
}

fn social_optimum(game: &GameInstance) -> Result<f64> {
    let top = SOCIAL_SCHEDULE[SOCIAL_SCHEDULE.len() - 1].max(game.beta);
    let mut schedule: Vec<f64> = SOCIAL_SCHEDULE.iter().copied().filter(|&b| b < top).collect();
    schedule.push(top);
    let res = oracle::solve_cg_opt(&game.net, &game.spec, &schedule, oracle::DEFAULT_TOL)?;
    Ok(res.solution.gain)
}

/// `θ_n ← θ_n + α·∂u_n/∂θ_n` for all players at once.
pub fn gradient_dynamics_step(game: &GameInstance, theta: &NodeEdgeVector, alpha: f64) -> Result<NodeEdgeVector> {
    check_alpha(alpha)?;
    let s = oracle::marginals(&game.net, theta)?;
    let mut next = theta.clone();
    for &p in game.players() {
        let sp = s.get(p);
        if !(sp > 0.0 && sp < 1.0) {
            return Err(Error::Evaluation(format!("marginal of {p:?} is {sp}, outside (0, 1)")));
        }
        next.set(p, theta.get(p) + alpha * payoff_gradient_at(game, p, theta.get(p), sp));
    }
    Ok(next)
}

/// Potential along `steps` gradient-dynamics steps from `theta0`.
pub fn gradient_ascent(game: &GameInstance, theta0: &NodeEdgeVector, alpha: f64, steps: usize) -> Result<(NodeEdgeVector, Vec<AscentRow>)> {
    let mut theta = theta0.clone();
    let mut rows = Vec::with_capacity(steps + 1);
    for round in 0..=steps {
        let next = gradient_dynamics_step(game, &theta, alpha)?;
        rows.push(AscentRow {
            round,
            potential: potential(game, &theta)?,
            displacement: next.sup_distance(&theta),
        });
        if round < steps {
            theta = next;
        }
    }
    Ok((theta, rows))
}
