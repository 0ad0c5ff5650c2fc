//! Exact computations by enumerating all 2^|V| configurations: the Ising
//! stationary law, its marginals, the entropy-regularized dual and the
//! solvers built on them. These are the reference values the stochastic
//! algorithms are checked against.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Entry, Network, NodeEdgeVector, ENUMERATION_CAP};
use crate::objective::ObjectiveSpec;

/// Default sup-norm tolerance on the fixed-point residual.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default iteration cap for [`solve_a_cg_opt`].
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Solution of the entropy-regularized problem for one β.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactSolution {
    pub theta_star: NodeEdgeVector,
    pub lambda_star: NodeEdgeVector,
    pub gain: f64,
    pub dual_value: f64,
    pub beta: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// `⟨θ, φ(σ)⟩` for the configuration encoded by `mask`.
fn energy(net: &Network, theta: &NodeEdgeVector, mask: u64) -> f64 {
    let mut acc = 0.0;
    for i in 0..net.node_count() {
        if mask >> i & 1 == 1 {
            acc += theta.nodes[i];
        }
    }
    for (e, &(i, j)) in net.edges().iter().enumerate() {
        if mask >> i & mask >> j & 1 == 1 {
            acc += theta.edges[e];
        }
    }
    acc
}

/// Flat indices (nodes first, then edges) of the coordinates of φ(σ) that
/// equal one.
fn active_coords(net: &Network, mask: u64, out: &mut Vec<usize>) {
    out.clear();
    let n = net.node_count();
    out.extend((0..n).filter(|&i| mask >> i & 1 == 1));
    for (e, &(i, j)) in net.edges().iter().enumerate() {
        if mask >> i & mask >> j & 1 == 1 {
            out.push(n + e);
        }
    }
}

struct Gibbs {
    log_z: f64,
    probs: Vec<f64>,
}

fn gibbs(net: &Network, theta: &NodeEdgeVector) -> Result<Gibbs> {
    net.check_enumerable(ENUMERATION_CAP)?;
    theta.check_shape(net)?;
    let count = 1u64 << net.node_count();
    let energies: Vec<f64> = (0..count).map(|m| energy(net, theta, m)).collect();
    let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Evaluation("non-finite parameter".into()));
    }
    let sum: f64 = energies.iter().map(|&x| (x - max).exp()).sum();
    let log_z = max + sum.ln();
    let probs = energies.iter().map(|&x| (x - log_z).exp()).collect();
    Ok(Gibbs { log_z, probs })
}

impl Gibbs {
    fn marginals(&self, net: &Network) -> NodeEdgeVector {
        let mut flat = vec![0.0; net.dim()];
        let mut buf = Vec::new();
        for (m, &p) in self.probs.iter().enumerate() {
            active_coords(net, m as u64, &mut buf);
            for &k in &buf {
                flat[k] += p;
            }
        }
        NodeEdgeVector::from_flat(net, &flat).expect("dimension matches")
    }

    /// Covariance matrix of φ(σ) under p_θ (row-major, dim × dim).
    fn covariance(&self, net: &Network, mean: &[f64]) -> Vec<f64> {
        let d = net.dim();
        let mut second = vec![0.0; d * d];
        let mut buf = Vec::new();
        for (m, &p) in self.probs.iter().enumerate() {
            active_coords(net, m as u64, &mut buf);
            for &a in &buf {
                for &b in &buf {
                    second[a * d + b] += p;
                }
            }
        }
        for a in 0..d {
            for b in 0..d {
                second[a * d + b] -= mean[a] * mean[b];
            }
        }
        second
    }
}

/// `log Σ_σ exp⟨θ, φ(σ)⟩`, max-shifted.
pub fn log_partition(net: &Network, theta: &NodeEdgeVector) -> Result<f64> {
    Ok(gibbs(net, theta)?.log_z)
}

/// `p_θ` over all configurations, in enumeration order.
pub fn stationary_distribution(net: &Network, theta: &NodeEdgeVector) -> Result<Vec<f64>> {
    Ok(gibbs(net, theta)?.probs)
}

/// Node activation and edge coordination probabilities under `p_θ`.
pub fn marginals(net: &Network, theta: &NodeEdgeVector) -> Result<NodeEdgeVector> {
    Ok(gibbs(net, theta)?.marginals(net))
}

/// `∂s_n/∂θ_n = s_n(1 − s_n)`, which holds because every coordinate of
/// φ(σ) is binary.
pub fn marginal_self_gradient(net: &Network, theta: &NodeEdgeVector) -> Result<NodeEdgeVector> {
    Ok(marginals(net, theta)?.map(|s| s * (1.0 - s)))
}

/// Shannon entropy in nats; zero-probability terms contribute nothing.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// `log P(φ_n = 1) − log P(φ_n = 0)` under `p_θ`, by log-sum-exp over the
/// two halves of the configuration space.
pub fn log_odds(net: &Network, theta: &NodeEdgeVector, entry: Entry) -> Result<f64> {
    net.check_enumerable(ENUMERATION_CAP)?;
    theta.check_shape(net)?;
    let on = |mask: u64| match entry {
        Entry::Node(i) => mask >> i & 1 == 1,
        Entry::Edge(e) => {
            let (i, j) = net.edge(e);
            mask >> i & mask >> j & 1 == 1
        }
    };
    let count = 1u64 << net.node_count();
    let mut max = [f64::NEG_INFINITY; 2];
    let energies: Vec<(usize, f64)> = (0..count)
        .map(|m| {
            let side = on(m) as usize;
            let x = energy(net, theta, m);
            max[side] = max[side].max(x);
            (side, x)
        })
        .collect();
    let mut sum = [0.0; 2];
    for (side, x) in energies {
        sum[side] += (x - max[side]).exp();
    }
    let lo = max[1] + sum[1].ln() - max[0] - sum[0].ln();
    if lo.is_nan() {
        return Err(Error::Evaluation("non-finite parameter".into()));
    }
    Ok(lo)
}

/// `½ Σ |p − q|`
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// KKT primal maximizers `y*(θ)` of the Lagrangian for the rate variables.
pub fn kkt_primal(net: &Network, spec: &ObjectiveSpec, beta: f64, theta: &NodeEdgeVector) -> NodeEdgeVector {
    let mut y = NodeEdgeVector::zeros(net);
    for en in net.entries() {
        y.set(en, spec.primal(net, en, theta.get(en), beta));
    }
    y
}

fn dual_from_parts(
    net: &Network,
    spec: &ObjectiveSpec,
    beta: f64,
    theta: &NodeEdgeVector,
    log_z: f64,
    y: &NodeEdgeVector,
) -> Result<f64> {
    let mut d = log_z / beta;
    for e in 0..net.edge_count() {
        d += spec.utility(net, e).value(y.edges[e]) - theta.edges[e] / beta * y.edges[e];
    }
    for i in 0..net.node_count() {
        d += -spec.cost(i).value(y.nodes[i]) - theta.nodes[i] / beta * y.nodes[i];
    }
    if d.is_nan() {
        return Err(Error::Evaluation(format!("dual value is NaN at beta = {beta}")));
    }
    Ok(d)
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("beta must be positive and finite, got {beta}")))
    }
}

/// Dual function of the entropy-regularized problem, parameterized by
/// `θ = β·k`:
///
/// `D(θ) = (1/β)·log Z(θ) + Σ_e [U(y*_e) − θ_e y*_e/β] + Σ_i [−C(y*_i) − θ_i y*_i/β]`.
pub fn dual_value(net: &Network, spec: &ObjectiveSpec, beta: f64, theta: &NodeEdgeVector) -> Result<f64> {
    check_beta(beta)?;
    let g = gibbs(net, theta)?;
    let y = kkt_primal(net, spec, beta, theta);
    dual_from_parts(net, spec, beta, theta, g.log_z, &y)
}

/// `∇D(θ) = (s(θ) − y*(θ))/β`.
pub fn dual_gradient(net: &Network, spec: &ObjectiveSpec, beta: f64, theta: &NodeEdgeVector) -> Result<NodeEdgeVector> {
    check_beta(beta)?;
    let s = marginals(net, theta)?;
    let y = kkt_primal(net, spec, beta, theta);
    let mut g = NodeEdgeVector::zeros(net);
    for en in net.entries() {
        g.set(en, (s.get(en) - y.get(en)) / beta);
    }
    Ok(g)
}

/// One step of exact dual descent with the `1/β` factor absorbed into the
/// step size: `θ ← θ + a·(y*(θ) − s(θ))`.
pub fn dual_descent_step(
    net: &Network,
    spec: &ObjectiveSpec,
    beta: f64,
    theta: &NodeEdgeVector,
    step: f64,
) -> Result<NodeEdgeVector> {
    let g = dual_gradient(net, spec, beta, theta)?;
    let mut next = theta.clone();
    for (t, gi) in next.iter_mut().zip(g.iter()) {
        *t -= step * beta * gi;
    }
    Ok(next)
}

/// Objective of the regularized primal at `(p, λ)`:
/// `gain(λ) + H(p)/β`.
pub fn regularized_primal(net: &Network, spec: &ObjectiveSpec, beta: f64, p: &[f64], lambda: &NodeEdgeVector) -> f64 {
    spec.gain(net, lambda) + entropy(p) / beta
}

/// The coordination gain `Σ U_ij(λ_ij) − Σ C_i(λ_i)`. Returns `-inf` when a
/// log utility sees a zero coordination rate.
pub fn gain(net: &Network, spec: &ObjectiveSpec, lambda: &NodeEdgeVector) -> Result<f64> {
    lambda.check_shape(net)?;
    if let Some(bad) = lambda.iter().find(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::usage(format!("rate {bad} outside [0, 1]")));
    }
    Ok(spec.gain(net, lambda))
}

/// `F(θ)`: `−β·C_i′(s_i(θ))` on nodes and `β·U_ij′(s_ij(θ))` on edges.
pub fn fixed_point_map(net: &Network, spec: &ObjectiveSpec, beta: f64, s: &NodeEdgeVector) -> NodeEdgeVector {
    let mut f = NodeEdgeVector::zeros(net);
    for en in net.entries() {
        f.set(en, spec.target(net, en, s.get(en), beta));
    }
    f
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point; zeros if absent.
    pub theta0: Option<NodeEdgeVector>,
    /// Initial damping of the fixed-point iteration.
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            theta0: None,
            damping: 0.5,
        }
    }
}

struct Eval {
    theta: NodeEdgeVector,
    s: NodeEdgeVector,
    residual: f64,
}

fn evaluate(net: &Network, spec: &ObjectiveSpec, beta: f64, theta: NodeEdgeVector) -> Result<Eval> {
    let s = marginals(net, &theta)?;
    let f = fixed_point_map(net, spec, beta, &s);
    let residual = f.sup_distance(&theta);
    if residual.is_nan() {
        return Err(Error::Evaluation("fixed-point residual is NaN".into()));
    }
    Ok(Eval { theta, s, residual })
}

fn finish(net: &Network, spec: &ObjectiveSpec, beta: f64, ev: &Eval, iterations: usize) -> Result<ExactSolution> {
    Ok(ExactSolution {
        theta_star: ev.theta.clone(),
        lambda_star: ev.s.clone(),
        gain: spec.gain(net, &ev.s),
        dual_value: dual_value(net, spec, beta, &ev.theta)?,
        beta,
        iterations,
        residual: ev.residual,
    })
}

/// Solves `θ = F(θ)` (equivalently minimizes the dual).
///
/// Damped fixed-point iteration `θ ← θ + α(F(θ) − θ)` runs first, halving
/// α whenever the residual grows. If it stalls the solver switches to
/// damped Newton descent on the dual, whose Hessian
/// `(Cov_θ(φ) + diag(−∂y*/∂θ))/β` is available in closed form.
pub fn solve_a_cg_opt(net: &Network, spec: &ObjectiveSpec, beta: f64, opts: &SolverOptions) -> Result<ExactSolution> {
    check_beta(beta)?;
    if !(opts.tol > 0.0) {
        return Err(Error::config("tolerance must be positive"));
    }
    let theta0 = match &opts.theta0 {
        Some(t) => {
            t.check_shape(net)?;
            t.clone()
        }
        None => NodeEdgeVector::zeros(net),
    };
    let mut cur = evaluate(net, spec, beta, theta0)?;
    let mut best_residual = cur.residual;
    let mut alpha = opts.damping.clamp(1e-6, 1.0);
    let mut iterations = 0;
    let mut since_improvement = 0;

    // fixed-point phase
    while cur.residual > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let f = fixed_point_map(net, spec, beta, &cur.s);
        let mut next = cur.theta.clone();
        for (t, ft) in next.iter_mut().zip(f.iter()) {
            *t += alpha * (ft - *t);
        }
        let cand = evaluate(net, spec, beta, next)?;
        if cand.residual < cur.residual {
            cur = cand;
            alpha = (alpha * 1.2).min(1.0);
        } else {
            alpha *= 0.5;
        }
        if cur.residual < 0.5 * best_residual {
            best_residual = cur.residual;
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        if alpha < 1e-6 || since_improvement > 50 {
            break;
        }
    }

    // Newton phase on the dual
    while cur.residual > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        match newton_step(net, spec, beta, &cur)? {
            Some(next) => cur = next,
            None => break,
        }
    }

    if cur.residual <= opts.tol {
        finish(net, spec, beta, &cur, iterations)
    } else {
        Err(Error::NonConvergence {
            iterations,
            residual: cur.residual,
            best: finish(net, spec, beta, &cur, iterations).ok().map(Box::new),
        })
    }
}

fn newton_step(net: &Network, spec: &ObjectiveSpec, beta: f64, cur: &Eval) -> Result<Option<Eval>> {
    let d = net.dim();
    let g = gibbs(net, &cur.theta)?;
    let s_flat = cur.s.to_flat();
    let mut hess = g.covariance(net, &s_flat);
    let y = kkt_primal(net, spec, beta, &cur.theta);
    let y_flat = y.to_flat();
    let theta_flat = cur.theta.to_flat();
    let entries: Vec<Entry> = net.entries().collect();
    for (k, en) in entries.iter().enumerate() {
        let yk = y_flat[k];
        // −∂y*/∂θ, zero where the maximizer sits on the boundary
        let curv = if yk <= 0.0 || yk >= 1.0 {
            0.0
        } else {
            match *en {
                Entry::Node(i) => 1.0 / (beta * spec.cost(i).second(yk)),
                Entry::Edge(e) => -1.0 / (beta * spec.utility(net, e).second(yk)),
            }
        };
        hess[k * d + k] += curv;
    }
    // gradient scaled by β to match the β-scaled Hessian
    let grad: Vec<f64> = s_flat.iter().zip(&y_flat).map(|(s, y)| s - y).collect();
    let rhs: Vec<f64> = grad.iter().map(|x| -x).collect();
    let Some(dir) = solve_linear(hess, rhs, d) else {
        return Ok(None);
    };
    let d0 = dual_from_parts(net, spec, beta, &cur.theta, g.log_z, &y)?;
    let slope: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() / beta;
    let mut t = 1.0;
    for _ in 0..60 {
        let trial: Vec<f64> = theta_flat.iter().zip(&dir).map(|(th, dd)| th + t * dd).collect();
        let trial = NodeEdgeVector::from_flat(net, &trial)?;
        if let Ok(dv) = dual_value(net, spec, beta, &trial) {
            let armijo = dv <= d0 + 1e-4 * t * slope + 1e-13 * d0.abs().max(1.0);
            if armijo {
                let cand = evaluate(net, spec, beta, trial)?;
                if cand.residual.is_finite() {
                    return Ok(Some(cand));
                }
            }
        }
        t *= 0.5;
    }
    Ok(None)
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_linear(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row * n + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Result of solving along an increasing β schedule.
#[derive(Clone, Debug, Serialize)]
pub struct ContinuationResult {
    /// Solution at the largest β.
    pub solution: ExactSolution,
    /// One solution per schedule entry, in order.
    pub path: Vec<ExactSolution>,
    /// `|V|·log 2 / β_final`, the guaranteed distance to the unregularized
    /// optimum.
    pub gap_bound: f64,
}

/// Approximates the unregularized optimum by solving the regularized problem
/// along an increasing β schedule, warm-starting each solve from the
/// previous parameter scaled by the β ratio.
pub fn solve_cg_opt(net: &Network, spec: &ObjectiveSpec, schedule: &[f64], tol: f64) -> Result<ContinuationResult> {
    if schedule.is_empty() {
        return Err(Error::config("beta schedule is empty"));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("beta schedule must be strictly increasing"));
    }
    let mut path: Vec<ExactSolution> = Vec::with_capacity(schedule.len());
    for &beta in schedule {
        let theta0 = path.last().map(|prev| {
            let r = beta / prev.beta;
            prev.theta_star.map(|x| x * r)
        });
        let opts = SolverOptions {
            tol,
            theta0,
            ..SolverOptions::default()
        };
        path.push(solve_a_cg_opt(net, spec, beta, &opts)?);
    }
    let solution = path.last().cloned().expect("non-empty schedule");
    let gap_bound = net.node_count() as f64 * std::f64::consts::LN_2 / solution.beta;
    Ok(ContinuationResult {
        solution,
        path,
        gap_bound,
    })
}
