//! Edge utilities and node costs together with the derivative calculus the
//! algorithms rely on: first and second derivatives, the inverse of the
//! first derivative, and the KKT primal maximizers on `[0, 1]`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Entry, Network, NodeEdgeVector};

/// Default margin used when deriving θ bounds.
pub const BOUND_EPSILON: f64 = 0.05;
/// Default margin used to keep empirical rates away from {0, 1}.
pub const RATE_EPSILON: f64 = 1e-4;

/// A scalar function on the unit interval with the derivatives the
/// algorithms need.
pub trait Curve: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;
    fn deriv(&self, x: f64) -> f64;
    fn second(&self, x: f64) -> f64;
    /// Inverse of [`Curve::deriv`]. May return NaN outside the range of the
    /// derivative.
    fn deriv_inv(&self, y: f64) -> f64;
    fn describe(&self) -> String;
}

/// `U(x) = w·ln x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogUtility {
    pub weight: f64,
}

impl Curve for LogUtility {
    fn value(&self, x: f64) -> f64 {
        // ln(0) = -inf is the intended sentinel for zero coordination
        self.weight * x.ln()
    }
    fn deriv(&self, x: f64) -> f64 {
        self.weight / x
    }
    fn second(&self, x: f64) -> f64 {
        -self.weight / (x * x)
    }
    fn deriv_inv(&self, y: f64) -> f64 {
        if y > 0.0 {
            self.weight / y
        } else {
            f64::NAN
        }
    }
    fn describe(&self) -> String {
        format!("log:{}", self.weight)
    }
}

/// `C(x) = c·x²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadCost {
    pub coef: f64,
}

impl Curve for QuadCost {
    fn value(&self, x: f64) -> f64 {
        self.coef * x * x
    }
    fn deriv(&self, x: f64) -> f64 {
        2.0 * self.coef * x
    }
    fn second(&self, _x: f64) -> f64 {
        2.0 * self.coef
    }
    fn deriv_inv(&self, y: f64) -> f64 {
        y / (2.0 * self.coef)
    }
    fn describe(&self) -> String {
        format!("quad:{}", self.coef)
    }
}

/// `C(x) = s/(1 − x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierCost {
    pub scale: f64,
}

impl Curve for BarrierCost {
    fn value(&self, x: f64) -> f64 {
        self.scale / (1.0 - x)
    }
    fn deriv(&self, x: f64) -> f64 {
        self.scale / ((1.0 - x) * (1.0 - x))
    }
    fn second(&self, x: f64) -> f64 {
        2.0 * self.scale / ((1.0 - x) * (1.0 - x) * (1.0 - x))
    }
    fn deriv_inv(&self, y: f64) -> f64 {
        if y >= self.scale {
            1.0 - (self.scale / y).sqrt()
        } else {
            f64::NAN
        }
    }
    fn describe(&self) -> String {
        format!("barrier:{}", self.scale)
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied curve given as four closures. Construct it through
/// [`ClosureCurve::utility`] or [`ClosureCurve::cost`], which run the
/// shape certification.
#[derive(Clone)]
pub struct ClosureCurve {
    name: String,
    value: ScalarFn,
    deriv: ScalarFn,
    second: ScalarFn,
    deriv_inv: ScalarFn,
}

impl fmt::Debug for ClosureCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosureCurve").field("name", &self.name).finish()
    }
}

impl ClosureCurve {
    fn raw(name: &str, value: ScalarFn, deriv: ScalarFn, second: ScalarFn, deriv_inv: ScalarFn) -> Self {
        ClosureCurve {
            name: name.to_string(),
            value,
            deriv,
            second,
            deriv_inv,
        }
    }

    /// Registers a strictly concave utility.
    pub fn utility(name: &str, value: ScalarFn, deriv: ScalarFn, second: ScalarFn, deriv_inv: ScalarFn) -> Result<Self> {
        let c = Self::raw(name, value, deriv, second, deriv_inv);
        certify(&c, Shape::Concave)?;
        Ok(c)
    }

    /// Registers a strictly convex cost.
    pub fn cost(name: &str, value: ScalarFn, deriv: ScalarFn, second: ScalarFn, deriv_inv: ScalarFn) -> Result<Self> {
        let c = Self::raw(name, value, deriv, second, deriv_inv);
        certify(&c, Shape::Convex)?;
        Ok(c)
    }
}

impl Curve for ClosureCurve {
    fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }
    fn deriv(&self, x: f64) -> f64 {
        (self.deriv)(x)
    }
    fn second(&self, x: f64) -> f64 {
        (self.second)(x)
    }
    fn deriv_inv(&self, y: f64) -> f64 {
        (self.deriv_inv)(y)
    }
    fn describe(&self) -> String {
        format!("custom:{}", self.name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Concave,
    Convex,
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Finite-difference and inverse round-trip checks a curve must pass before
/// it is accepted.
pub fn certify(curve: &dyn Curve, shape: Shape) -> Result<()> {
    let h = 1e-6;
    for k in 0..=90 {
        let x = 0.05 + 0.01 * k as f64;
        let fd1 = (curve.value(x + h) - curve.value(x - h)) / (2.0 * h);
        if rel_err(curve.deriv(x), fd1) > 1e-6 {
            return Err(Error::config(format!(
                "{}: first derivative disagrees with finite differences at x = {x}",
                curve.describe()
            )));
        }
        let fd2 = (curve.deriv(x + h) - curve.deriv(x - h)) / (2.0 * h);
        if rel_err(curve.second(x), fd2) > 1e-6 {
            return Err(Error::config(format!(
                "{}: second derivative disagrees with finite differences at x = {x}",
                curve.describe()
            )));
        }
        let ok = match shape {
            Shape::Concave => curve.second(x) < 0.0,
            Shape::Convex => curve.second(x) > 0.0,
        };
        if !ok {
            return Err(Error::config(format!(
                "{}: not strictly {:?} at x = {x}",
                curve.describe(),
                shape
            )));
        }
    }
    for k in 0..=98 {
        let x = 0.01 + 0.01 * k as f64;
        let back = curve.deriv_inv(curve.deriv(x));
        if !((back - x).abs() <= 1e-10) {
            return Err(Error::config(format!(
                "{}: derivative inverse round trip fails at x = {x} (got {back})",
                curve.describe()
            )));
        }
    }
    Ok(())
}

/// Parses `log:w`, `quad:c` or `barrier:s` (the coefficient may be omitted
/// and defaults to 1).
pub fn parse_curve(desc: &str) -> Result<Arc<dyn Curve>> {
    let (kind, arg) = match desc.split_once(':') {
        Some((k, a)) => (k.trim(), Some(a.trim())),
        None => (desc.trim(), None),
    };
    let coef = match arg {
        None => 1.0,
        Some(a) => a
            .parse::<f64>()
            .map_err(|_| Error::config(format!("bad coefficient in `{desc}`")))?,
    };
    if !(coef > 0.0 && coef.is_finite()) {
        return Err(Error::config(format!("coefficient in `{desc}` must be positive")));
    }
    match kind.to_ascii_lowercase().as_str() {
        "log" => Ok(Arc::new(LogUtility { weight: coef })),
        "quad" => Ok(Arc::new(QuadCost { coef })),
        "barrier" => Ok(Arc::new(BarrierCost { scale: coef })),
        _ => Err(Error::config(format!("unknown curve `{desc}`"))),
    }
}

/// Per-edge utilities and per-node costs. Each edge (node) uses the default
/// curve unless an override is registered for it.
#[derive(Clone, Debug)]
pub struct ObjectiveSpec {
    pub name: String,
    utility: Arc<dyn Curve>,
    cost: Arc<dyn Curve>,
    edge_utilities: BTreeMap<(usize, usize), Arc<dyn Curve>>,
    node_costs: BTreeMap<usize, Arc<dyn Curve>>,
}

impl ObjectiveSpec {
    pub fn uniform(name: &str, utility: Arc<dyn Curve>, cost: Arc<dyn Curve>) -> Self {
        ObjectiveSpec {
            name: name.to_string(),
            utility,
            cost,
            edge_utilities: BTreeMap::new(),
            node_costs: BTreeMap::new(),
        }
    }

    pub fn with_node_cost(mut self, node: usize, cost: Arc<dyn Curve>) -> Self {
        self.node_costs.insert(node, cost);
        self
    }

    pub fn with_edge_utility(mut self, i: usize, j: usize, utility: Arc<dyn Curve>) -> Self {
        self.edge_utilities.insert((i.min(j), i.max(j)), utility);
        self
    }

    pub fn cost(&self, node: usize) -> &dyn Curve {
        self.node_costs.get(&node).unwrap_or(&self.cost).as_ref()
    }

    pub fn utility(&self, net: &Network, edge: usize) -> &dyn Curve {
        self.edge_utilities
            .get(&net.edge(edge))
            .unwrap_or(&self.utility)
            .as_ref()
    }

    /// `Σ U_ij(λ_ij) − Σ C_i(λ_i)`; `-inf` if a log utility sees a zero rate.
    pub fn gain(&self, net: &Network, lambda: &NodeEdgeVector) -> f64 {
        let util: f64 = (0..net.edge_count())
            .map(|e| self.utility(net, e).value(lambda.edges[e]))
            .sum();
        let cost: f64 = (0..net.node_count())
            .map(|i| self.cost(i).value(lambda.nodes[i]))
            .sum();
        util - cost
    }

    /// `argmax_{y ∈ [0,1]} −C_i(y) − k·y` with `k = θ_i/β`, i.e.
    /// `C_i′⁻¹(−θ_i/β)` clamped to the unit interval.
    pub fn node_primal(&self, node: usize, theta: f64, beta: f64) -> f64 {
        let c = self.cost(node);
        let target = -theta / beta;
        if target <= c.deriv(0.0) {
            0.0
        } else if target >= c.deriv(1.0) {
            1.0
        } else {
            c.deriv_inv(target).clamp(0.0, 1.0)
        }
    }

    /// `argmax_{y ∈ [0,1]} U_ij(y) − k·y` with `k = θ_ij/β`, i.e.
    /// `U_ij′⁻¹(θ_ij/β)` clamped to the unit interval.
    pub fn edge_primal(&self, net: &Network, edge: usize, theta: f64, beta: f64) -> f64 {
        let u = self.utility(net, edge);
        let target = theta / beta;
        if target >= u.deriv(0.0) {
            0.0
        } else if target <= u.deriv(1.0) {
            1.0
        } else {
            u.deriv_inv(target).clamp(0.0, 1.0)
        }
    }

    pub fn primal(&self, net: &Network, entry: Entry, theta: f64, beta: f64) -> f64 {
        match entry {
            Entry::Node(i) => self.node_primal(i, theta, beta),
            Entry::Edge(e) => self.edge_primal(net, e, theta, beta),
        }
    }

    /// Fixed-point target of a coordinate given its rate: `−β·C_i′(s)` for
    /// nodes and `β·U_ij′(s)` for edges.
    pub fn target(&self, net: &Network, entry: Entry, rate: f64, beta: f64) -> f64 {
        match entry {
            Entry::Node(i) => -beta * self.cost(i).deriv(rate),
            Entry::Edge(e) => beta * self.utility(net, e).deriv(rate),
        }
    }

    /// `g_i(x) = β·C_i″(C_i′⁻¹(−x/β))`.
    pub fn g_node(&self, node: usize, x: f64, beta: f64) -> f64 {
        let c = self.cost(node);
        beta * c.second(c.deriv_inv(-x / beta))
    }

    /// `g_ij(x) = −β·U_ij″(U_ij′⁻¹(x/β))`.
    pub fn g_edge(&self, net: &Network, edge: usize, x: f64, beta: f64) -> f64 {
        let u = self.utility(net, edge);
        -beta * u.second(u.deriv_inv(x / beta))
    }
}

/// Built-in objectives: `C1` (log utility, `2x²` cost), `C2` (log utility,
/// `1/(1−x)` cost) and `line-example` (log utility, costs `x², x², 3x²`).
pub fn builtin_objective(name: &str) -> Result<ObjectiveSpec> {
    let log: Arc<dyn Curve> = Arc::new(LogUtility { weight: 1.0 });
    match name.trim().to_ascii_lowercase().as_str() {
        "c1" => Ok(ObjectiveSpec::uniform("C1", log, Arc::new(QuadCost { coef: 2.0 }))),
        "c2" => Ok(ObjectiveSpec::uniform("C2", log, Arc::new(BarrierCost { scale: 1.0 }))),
        "line-example" | "line-ex" => Ok(ObjectiveSpec::uniform(
            "line-example",
            log,
            Arc::new(QuadCost { coef: 1.0 }),
        )
        .with_node_cost(2, Arc::new(QuadCost { coef: 3.0 }))),
        other => Err(Error::config(format!("unknown objective `{other}`"))),
    }
}

/// Box constraints for θ and the margin used to clamp empirical rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClampBounds {
    pub theta_min: f64,
    pub theta_max: f64,
    pub rate_epsilon: f64,
}

impl ClampBounds {
    pub fn new(theta_min: f64, theta_max: f64, rate_epsilon: f64) -> Result<Self> {
        if !(theta_min < theta_max) {
            return Err(Error::config(format!(
                "theta_min ({theta_min}) must be below theta_max ({theta_max})"
            )));
        }
        if !(rate_epsilon > 0.0 && rate_epsilon < 0.5) {
            return Err(Error::config(format!(
                "rate_epsilon ({rate_epsilon}) must lie in (0, 0.5)"
            )));
        }
        Ok(ClampBounds {
            theta_min,
            theta_max,
            rate_epsilon,
        })
    }

    pub fn clamp_theta(&self, x: f64) -> f64 {
        x.clamp(self.theta_min, self.theta_max)
    }

    pub fn clamp_rate(&self, x: f64) -> f64 {
        x.clamp(self.rate_epsilon, 1.0 - self.rate_epsilon)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.theta_min..=self.theta_max).contains(&x)
    }
}

/// θ bounds that contain every fixed-point component whose rate lies in
/// `[eps, 1 − eps]`:
///
/// `theta_max = β·max_e U′(eps)`,
/// `theta_min = min(−β·max_i C′(1 − eps), β·min_e U′(1 − eps), 0)`.
///
/// The returned bounds carry [`RATE_EPSILON`] as their rate clamp.
pub fn a1_bounds(net: &Network, spec: &ObjectiveSpec, beta: f64, eps: f64) -> Result<ClampBounds> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::config(format!("eps ({eps}) must lie in (0, 0.5)")));
    }
    if !(beta > 0.0) {
        return Err(Error::config("beta must be positive"));
    }
    let u_lo = (0..net.edge_count())
        .map(|e| spec.utility(net, e).deriv(eps))
        .fold(f64::NEG_INFINITY, f64::max);
    let u_hi = (0..net.edge_count())
        .map(|e| spec.utility(net, e).deriv(1.0 - eps))
        .fold(f64::INFINITY, f64::min);
    let c_hi = (0..net.node_count())
        .map(|i| spec.cost(i).deriv(1.0 - eps))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut theta_max = beta * u_lo;
    if net.edge_count() == 0 {
        theta_max = 0.0;
    }
    let mut theta_min = (-beta * c_hi).min(0.0);
    if net.edge_count() > 0 {
        theta_min = theta_min.min(beta * u_hi);
    }
    // an edgeless network still needs a non-empty box
    if theta_max <= theta_min || theta_max <= 0.0 {
        theta_max = theta_max.max(-theta_min).max(1.0);
    }
    ClampBounds::new(theta_min, theta_max, RATE_EPSILON)
}
