//! Randomized checks of the model invariants across modules.

use std::sync::OnceLock;

use coordsim::cdm::{cdm_step, run_frame, CdmState};
use coordsim::coord::{self, Algorithm, CoordParams, RunOptions};
use coordsim::graph::{build_topology, Network, NodeEdgeVector, TopologyKind};
use coordsim::harness::Scenario;
use coordsim::objective::{a1_bounds, builtin_objective, ClampBounds, ObjectiveSpec, BOUND_EPSILON};
use coordsim::oracle::{self, solve_a_cg_opt, solve_cg_opt, SolverOptions, DEFAULT_TOL};
use proptest::prelude::*;

fn small_net() -> impl Strategy<Value = Network> {
    prop_oneof![
        (2usize..=6).prop_map(|n| build_topology(TopologyKind::Line, n, None, 0).unwrap()),
        (3usize..=6).prop_map(|n| build_topology(TopologyKind::Star, n, None, 0).unwrap()),
        (2usize..=5).prop_map(|n| build_topology(TopologyKind::Complete, n, None, 0).unwrap()),
        (4usize..=8, 0u64..50).prop_map(|(n, seed)| build_topology(TopologyKind::Random, n, Some(n), seed).unwrap()),
    ]
}

fn net_and_theta(lo: f64, hi: f64) -> impl Strategy<Value = (Network, NodeEdgeVector)> {
    small_net().prop_flat_map(move |net| {
        let d = net.dim();
        (Just(net), prop::collection::vec(lo..hi, d))
            .prop_map(|(net, flat)| {
                let theta = NodeEdgeVector::from_flat(&net, &flat).unwrap();
                (net, theta)
            })
    })
}

/// θ with negative node parameters and positive edge parameters, the region
/// the dual is defined on for log utilities.
fn dual_point(net: &Network, nodes: &[f64], edges: &[f64]) -> NodeEdgeVector {
    NodeEdgeVector::from_parts(net, nodes[..net.node_count()].to_vec(), edges[..net.edge_count()].to_vec()).unwrap()
}

struct Instance {
    id: &'static str,
    net: Network,
    spec: ObjectiveSpec,
    best_gain: f64,
}

fn instances() -> &'static [Instance] {
    static CELL: OnceLock<Vec<Instance>> = OnceLock::new();
    CELL.get_or_init(|| {
        ["LINE-EX", "STAR-C1", "COMP-C1"]
            .into_iter()
            .map(|id| {
                let sc = Scenario::preset(id).unwrap();
                let net = sc.network().unwrap();
                let spec = sc.objective_spec().unwrap();
                let best = solve_cg_opt(&net, &spec, &[1.0, 10.0, 100.0, 1000.0], DEFAULT_TOL).unwrap();
                Instance {
                    id,
                    net,
                    spec,
                    best_gain: best.solution.gain,
                }
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_law_is_a_distribution((net, theta) in net_and_theta(-6.0, 6.0)) {
        let p = oracle::stationary_distribution(&net, &theta).unwrap();
        let total: f64 = p.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        let s = oracle::marginals(&net, &theta).unwrap();
        prop_assert!(s.iter().all(|x| x > 0.0 && x < 1.0));
        // an edge is active only when both endpoints are
        for (e, &(i, j)) in net.edges().iter().enumerate() {
            prop_assert!(s.edges[e] <= s.nodes[i].min(s.nodes[j]) + 1e-12);
        }
    }

    #[test]
    fn self_gradient_matches_differences((net, theta) in net_and_theta(-3.0, 3.0)) {
        let grad = oracle::marginal_self_gradient(&net, &theta).unwrap();
        let h = 1e-5;
        for (k, entry) in net.entries().enumerate() {
            let mut up = theta.clone();
            up.set(entry, theta.get(entry) + h);
            let mut down = theta.clone();
            down.set(entry, theta.get(entry) - h);
            let fd = (oracle::marginals(&net, &up).unwrap().get(entry)
                - oracle::marginals(&net, &down).unwrap().get(entry))
                / (2.0 * h);
            let exact = grad.iter().nth(k).unwrap();
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "{fd} vs {exact}");
        }
    }

    #[test]
    fn dual_is_convex_on_segments(
        net in small_net(),
        a_nodes in prop::collection::vec(-20.0..2.0f64, 8),
        a_edges in prop::collection::vec(0.5..20.0f64, 28),
        b_nodes in prop::collection::vec(-20.0..2.0f64, 8),
        b_edges in prop::collection::vec(0.5..20.0f64, 28),
        beta in 0.5..20.0f64,
        t in 0.0..1.0f64,
    ) {
        let spec = builtin_objective("C1").unwrap();
        let a = dual_point(&net, &a_nodes, &a_edges);
        let b = dual_point(&net, &b_nodes, &b_edges);
        let mid = NodeEdgeVector::from_flat(
            &net,
            &a.iter().zip(b.iter()).map(|(x, y)| (1.0 - t) * x + t * y).collect::<Vec<_>>(),
        )
        .unwrap();
        let d = |th: &NodeEdgeVector| oracle::dual_value(&net, &spec, beta, th).unwrap();
        let chord = (1.0 - t) * d(&a) + t * d(&b);
        prop_assert!(d(&mid) <= chord + 1e-9 * chord.abs().max(1.0));
    }

    #[test]
    fn dual_gradient_matches_differences(
        net in small_net(),
        nodes in prop::collection::vec(-15.0..0.0f64, 8),
        edges in prop::collection::vec(1.0..15.0f64, 28),
        beta in 1.0..10.0f64,
    ) {
        let spec = builtin_objective("C1").unwrap();
        let theta = dual_point(&net, &nodes, &edges);
        let grad = oracle::dual_gradient(&net, &spec, beta, &theta).unwrap();
        let h = 1e-5;
        let mut err = 0.0f64;
        for (k, entry) in net.entries().enumerate() {
            let mut up = theta.clone();
            up.set(entry, theta.get(entry) + h);
            let mut down = theta.clone();
            down.set(entry, theta.get(entry) - h);
            let fd = (oracle::dual_value(&net, &spec, beta, &up).unwrap()
                - oracle::dual_value(&net, &spec, beta, &down).unwrap())
                / (2.0 * h);
            err = err.max((fd - grad.iter().nth(k).unwrap()).abs());
        }
        prop_assert!(err <= 1e-5 * grad.sup_norm().max(1e-3), "error {err}");
    }

    #[test]
    fn regularization_gap_is_bounded(which in 0usize..3, beta in 0.3..30.0f64) {
        let inst = &instances()[which];
        let sol = solve_a_cg_opt(&inst.net, &inst.spec, beta, &SolverOptions::default()).unwrap();
        let bound = inst.net.node_count() as f64 * std::f64::consts::LN_2 / beta;
        prop_assert!(sol.gain >= inst.best_gain - bound - 1e-9, "{}: {} vs {}", inst.id, sol.gain, inst.best_gain - bound);
        // the regularized optimum can never beat the unregularized one by more than its tolerance
        prop_assert!(sol.gain <= inst.best_gain + 1e-3);
    }

    #[test]
    fn optimum_lies_in_the_clamp_box(which in 0usize..3, beta in 0.3..30.0f64) {
        let inst = &instances()[which];
        let sol = solve_a_cg_opt(&inst.net, &inst.spec, beta, &SolverOptions::default()).unwrap();
        let interior = sol.lambda_star.iter().all(|x| (BOUND_EPSILON..=1.0 - BOUND_EPSILON).contains(&x));
        prop_assume!(interior);
        let b = a1_bounds(&inst.net, &inst.spec, beta, BOUND_EPSILON).unwrap();
        prop_assert!(sol.theta_star.iter().all(|x| b.contains(x)));
    }

    #[test]
    fn builtin_curves_match_differences(name in prop::sample::select(vec!["C1", "C2", "line-example"]), x in 0.05..0.95f64) {
        let spec = builtin_objective(name).unwrap();
        let h = 1e-6;
        for curve in [spec.cost(0), spec.utility(&build_topology(TopologyKind::Line, 2, None, 0).unwrap(), 0)] {
            let d1 = (curve.value(x + h) - curve.value(x - h)) / (2.0 * h);
            prop_assert!((d1 - curve.deriv(x)).abs() <= 1e-6 * curve.deriv(x).abs().max(1.0));
            let d2 = (curve.deriv(x + h) - curve.deriv(x - h)) / (2.0 * h);
            prop_assert!((d2 - curve.second(x)).abs() <= 1e-6 * curve.second(x).abs().max(1.0));
            let y = curve.deriv(x);
            prop_assert!((curve.deriv_inv(y) - x).abs() <= 1e-9);
        }
    }

    #[test]
    fn g_functions_are_positive(name in prop::sample::select(vec!["C1", "C2"]), beta in 0.5..50.0f64, u in 0.0..1.0f64) {
        let spec = builtin_objective(name).unwrap();
        let net = build_topology(TopologyKind::Line, 2, None, 0).unwrap();
        let b = a1_bounds(&net, &spec, beta, BOUND_EPSILON).unwrap();
        let x = b.theta_min + u * (b.theta_max - b.theta_min);
        // g_i exists where C′⁻¹(−x/β) does, g_ij where U′⁻¹(x/β) does
        let gn = spec.g_node(0, x, beta);
        if gn.is_finite() {
            prop_assert!(gn > 0.0, "g_node({x}) = {gn}");
        }
        if x > 0.0 {
            prop_assert!(spec.g_edge(&net, 0, x, beta) > 0.0);
        }
    }

    #[test]
    fn frame_rates_are_consistent((net, theta) in net_and_theta(-3.0, 3.0), seed in 0u64..1000, duration in 0.5..20.0f64) {
        let mut state = CdmState::new(&net, seed);
        for _ in 0..3 {
            let before_events = state.event_count;
            let stats = run_frame(&net, &theta, &mut state, duration);
            prop_assert_eq!(stats.events, state.event_count - before_events);
            prop_assert!(stats.s_hat.iter().all(|x| (0.0..=1.0).contains(&x)));
            for (e, &(i, j)) in net.edges().iter().enumerate() {
                prop_assert!(stats.s_hat.edges[e] <= stats.s_hat.nodes[i].min(stats.s_hat.nodes[j]) + 1e-12);
            }
        }
    }

    #[test]
    fn messages_follow_degrees((net, theta) in net_and_theta(-2.0, 2.0), seed in 0u64..1000) {
        let mut state = CdmState::new(&net, seed);
        let mut expected = 0u64;
        for _ in 0..500 {
            let ev = cdm_step(&net, &theta, &mut state);
            expected += net.degree(ev.node) as u64;
        }
        prop_assert_eq!(state.messages, expected);
        prop_assert_eq!(state.event_count, 500);
    }

    #[test]
    fn theta_stays_in_the_box(
        net in small_net(),
        alg in prop::sample::select(Algorithm::ALL.to_vec()),
        start in prop::collection::vec(-100.0..100.0f64, 36),
        seed in 0u64..1000,
        beta in 0.5..20.0f64,
        width in 0.5..10.0f64,
    ) {
        let spec = builtin_objective("C1").unwrap();
        let bounds = ClampBounds::new(-width, width, 1e-4).unwrap();
        let params = CoordParams { beta, alpha: 0.5, step_scale: 3.0, frame_duration: 2.0, bounds };
        let mut opts = RunOptions::new(25, seed);
        opts.theta0 = Some(NodeEdgeVector::from_flat(&net, &start[..net.dim()]).unwrap());
        let trace = coord::run(&net, &spec, alg, params, &opts).unwrap();
        prop_assert_eq!(trace.records.len(), 25);
        for r in &trace.records {
            prop_assert!(r.theta.iter().all(|x| bounds.contains(x)));
            prop_assert!(r.s_bar.iter().all(|x| (0.0..=1.0).contains(&x)));
        }
    }
}

#[test]
fn detailed_balance_on_three_nodes() {
    let net = build_topology(TopologyKind::Line, 3, None, 0).unwrap();
    let theta = NodeEdgeVector::from_flat(&net, &[0.3, -0.4, 0.1, 0.8, -0.5]).unwrap();
    let emp = coordsim::cdm::empirical_distribution(&net, &theta, 1e6 / 3.0, 5).unwrap();
    let exact = oracle::stationary_distribution(&net, &theta).unwrap();
    // configurations one flip apart: the occupancy ratio tracks exp of the energy difference
    for mask in 0..8usize {
        for i in 0..3 {
            let other = mask ^ (1 << i);
            let want = exact[other] / exact[mask];
            let got = emp[other] / emp[mask];
            assert!((got / want - 1.0).abs() < 0.1, "{mask}->{other}: {got} vs {want}");
        }
    }
}
