//! Property suite behind the `verify` subcommand: each check compares a
//! closed form against an independent numerical evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::scenario::Scenario;
use crate::cdm::empirical_distribution;
use crate::coord::{self, alternative_sequence_check, AltSequenceOutcome, Algorithm, CoordParams, RunOptions};
use crate::error::Result;
use crate::game::{self, GameInstance};
use crate::graph::{build_topology, Entry, Network, NodeEdgeVector, TopologyKind};
use crate::objective::{builtin_objective, ClampBounds};
use crate::oracle::{self, SolverOptions};

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn random_theta(net: &Network, rng: &mut ChaCha8Rng, r: f64) -> NodeEdgeVector {
    let flat: Vec<f64> = (0..net.dim()).map(|_| rng.gen_range(-r..r)).collect();
    NodeEdgeVector::from_flat(net, &flat).expect("shape")
}

fn bump(theta: &NodeEdgeVector, en: Entry, h: f64) -> NodeEdgeVector {
    let mut t = theta.clone();
    t.set(en, theta.get(en) + h);
    t
}

fn small_scenarios() -> Vec<Scenario> {
    ["LINE-EX", "STAR-C1", "COMP-C1"]
        .iter()
        .map(|p| Scenario::preset(p).expect("preset"))
        .collect()
}

/// `∂s_n/∂θ_n = s_n(1 − s_n)` against central differences of the marginals.
pub fn check_self_gradient() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for sc in small_scenarios() {
        let net = sc.network()?;
        for _ in 0..20 {
            let th = random_theta(&net, &mut rng, 2.0);
            let an = oracle::marginal_self_gradient(&net, &th)?;
            let h = 1e-5;
            for en in net.entries() {
                let up = oracle::marginals(&net, &bump(&th, en, h))?.get(en);
                let dn = oracle::marginals(&net, &bump(&th, en, -h))?.get(en);
                let fd = (up - dn) / (2.0 * h);
                worst = worst.max((fd - an.get(en)).abs() / an.get(en).abs());
            }
        }
    }
    Ok(CheckResult::new("self-gradient", worst < 1e-6, format!("max rel. error {worst:.2e} (< 1e-6)")))
}

/// Dual gradient against central differences of the dual value.
pub fn check_dual_gradient() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for sc in small_scenarios() {
        let net = sc.network()?;
        let spec = sc.objective_spec()?;
        for _ in 0..20 {
            let beta = rng.gen_range(0.5..5.0);
            let th = random_theta(&net, &mut rng, 3.0);
            let an = oracle::dual_gradient(&net, &spec, beta, &th)?;
            let scale = an.sup_norm();
            let h = 1e-5;
            for en in net.entries() {
                let up = oracle::dual_value(&net, &spec, beta, &bump(&th, en, h))?;
                let dn = oracle::dual_value(&net, &spec, beta, &bump(&th, en, -h))?;
                let fd = (up - dn) / (2.0 * h);
                worst = worst.max((fd - an.get(en)).abs() / scale);
            }
        }
    }
    Ok(CheckResult::new("dual-gradient", worst < 1e-5, format!("max rel. error {worst:.2e} (< 1e-5)")))
}

/// `D(θ°)` against the regularized primal objective at `(p_θ°, λ°)`.
pub fn check_strong_duality() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for sc in small_scenarios() {
        let net = sc.network()?;
        let spec = sc.objective_spec()?;
        for beta in [0.5, 1.0, 5.0] {
            let sol = oracle::solve_a_cg_opt(&net, &spec, beta, &SolverOptions::default())?;
            let p = oracle::stationary_distribution(&net, &sol.theta_star)?;
            let primal = oracle::regularized_primal(&net, &spec, beta, &p, &sol.lambda_star);
            worst = worst.max((primal - sol.dual_value).abs());
        }
    }
    Ok(CheckResult::new("strong-duality", worst < 1e-5, format!("max |gap| {worst:.2e} (< 1e-5)")))
}

/// Payoff gradients share their sign with the potential gradient.
pub fn check_sign_identity() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let sc = Scenario::preset("STAR-C1")?;
    let g = GameInstance::new(sc.network()?, sc.objective_spec()?, sc.beta)?;
    let lo = g.bounds.theta_min.max(-8.0);
    let hi = g.bounds.theta_max.min(8.0);
    let (mut drawn, mut mismatches, mut compared) = (0, 0, 0);
    while drawn < 100 {
        let flat: Vec<f64> = (0..g.net.dim()).map(|_| rng.gen_range(lo..hi)).collect();
        let th = NodeEdgeVector::from_flat(&g.net, &flat)?;
        let s = oracle::marginals(&g.net, &th)?;
        if s.iter().any(|x| !(1e-12..1.0 - 1e-12).contains(&x)) {
            continue;
        }
        drawn += 1;
        let dg = oracle::dual_gradient(&g.net, &g.spec, g.beta, &th)?;
        for &p in g.players() {
            let a = game::payoff_gradient(&g, &th, p)?;
            let b = -g.beta * dg.get(p);
            if a.abs() > 1e-9 && b.abs() > 1e-9 {
                compared += 1;
                if a.signum() != b.signum() {
                    mismatches += 1;
                }
            }
        }
    }
    Ok(CheckResult::new(
        "sign-identity",
        mismatches == 0,
        format!("{mismatches} mismatches over {compared} player gradients at 100 profiles"),
    ))
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// Penalty closed form against `∫_{−40}^{θ_n} x ∂s_n/∂x dx`, with the
/// derivative taken by central differences of the exact marginal.
pub fn check_penalty_quadrature() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let net = build_topology(TopologyKind::Line, 3, None, 0)?;
    let g = GameInstance::new(net.clone(), builtin_objective("C1")?, 2.0)?;
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let th = random_theta(&net, &mut rng, 2.0);
        for &p in g.players() {
            let s_at = |x: f64| -> f64 {
                oracle::marginals(&net, &bump(&th, p, x - th.get(p)))
                    .map(|m| m.get(p))
                    .unwrap_or(f64::NAN)
            };
            let h = 1e-4;
            let integrand = |x: f64| x * (s_at(x + h) - s_at(x - h)) / (2.0 * h);
            let quad = adaptive_simpson(&integrand, -40.0, th.get(p), 1e-10);
            let closed = game::penalty(&g, &th, p)?;
            worst = worst.max((quad - closed).abs());
        }
    }
    Ok(CheckResult::new("penalty-quadrature", worst < 1e-6, format!("max |error| {worst:.2e} (< 1e-6)")))
}

/// Nash equilibrium against the regularized optimum.
pub fn check_equilibrium() -> Result<CheckResult> {
    let mut parts = Vec::new();
    let mut ok = true;
    for sc in small_scenarios() {
        let g = GameInstance::new(sc.network()?, sc.objective_spec()?, sc.beta)?;
        let ne = game::find_ne(&g, 1e-8, 100_000, sc.alpha)?;
        ok &= ne.oracle_distance <= 1e-4 && ne.gap_to_social_opt <= ne.poa_bound + 1e-8;
        parts.push(format!("{} {:.1e}", sc.id, ne.oracle_distance));
    }
    Ok(CheckResult::new(
        "nash-equals-optimum",
        ok,
        format!("sup distance {} (<= 1e-4)", parts.join(", ")),
    ))
}

/// Geometric-convolution identity of the smoothed fixed-point scheme.
pub fn check_alternative_sequence() -> Result<CheckResult> {
    let net = build_topology(TopologyKind::Line, 3, None, 0)?;
    let spec = builtin_objective("C1")?;
    let params = CoordParams {
        beta: 2.0,
        alpha: 0.5,
        step_scale: 3.0,
        frame_duration: 10.0,
        bounds: ClampBounds::new(-1e6, 1e6, 1e-4)?,
    };
    let trace = coord::run(&net, &spec, Algorithm::Steep, params, &RunOptions::new(100, 3))?;
    Ok(match alternative_sequence_check(&net, &spec, &trace, &params) {
        AltSequenceOutcome::Deviation(d) => {
            CheckResult::new("alternative-sequence", d < 1e-8, format!("max deviation {d:.2e} (< 1e-8)"))
        }
        AltSequenceOutcome::Skipped(why) => CheckResult::new("alternative-sequence", false, format!("skipped: {why}")),
    })
}

/// Time-weighted occupancy of the chain against the exact Gibbs law.
pub fn check_cdm_stationarity() -> Result<CheckResult> {
    let net = build_topology(TopologyKind::Line, 3, None, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let th = random_theta(&net, &mut rng, 2.0);
    let exact = oracle::stationary_distribution(&net, &th)?;
    let events = 1e6;
    let mut worst: f64 = 0.0;
    for seed in [1, 2, 3] {
        let emp = empirical_distribution(&net, &th, events / net.node_count() as f64, seed)?;
        worst = worst.max(oracle::total_variation(&emp, &exact));
    }
    Ok(CheckResult::new("cdm-stationarity", worst < 0.02, format!("max TV {worst:.4} over 3 seeds (< 0.02)")))
}

type Check = fn() -> Result<CheckResult>;

/// Runs the whole suite. A check that errors is reported as a failure.
pub fn run_verify() -> Vec<CheckResult> {
    let checks: [(&str, Check); 8] = [
        ("self-gradient", check_self_gradient),
        ("dual-gradient", check_dual_gradient),
        ("strong-duality", check_strong_duality),
        ("sign-identity", check_sign_identity),
        ("penalty-quadrature", check_penalty_quadrature),
        ("nash-equals-optimum", check_equilibrium),
        ("alternative-sequence", check_alternative_sequence),
        ("cdm-stationarity", check_cdm_stationarity),
    ];
    checks
        .iter()
        .map(|(name, f)| f().unwrap_or_else(|e| CheckResult::new(name, false, format!("error: {e}"))))
        .collect()
}
