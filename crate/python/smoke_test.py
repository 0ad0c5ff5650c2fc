"""Smoke test for the coordsim Python bindings.

Build and install the extension first:

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/coordsim-*.whl
"""

import math
import sys

import coordsim_py as cs


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    failures = []

    def check(name, ok, detail=""):
        print(f"{'ok  ' if ok else 'FAIL'} {name} {detail}")
        if not ok:
            failures.append(name)

    line = cs.Network("line", 3)
    check("network shape", line.dim == 5 and line.edges == [(0, 1), (1, 2)], repr(line))
    check("labels", line.labels == ["n1", "n2", "n3", "e1_2", "e2_3"])

    p = cs.stationary_distribution(line, [0.0] * 5)
    check("uniform law at zero", all(close(x, 1 / 8, 1e-12) for x in p))

    # single node: marginal is the logistic function of its parameter
    solo = cs.Network.from_edges(1, [])
    check("logistic marginal", close(cs.marginals(solo, [1.3])[0], 1 / (1 + math.exp(-1.3)), 1e-12))

    sc = cs.scenario("LINE-EX")
    res = cs.solve_continuation(sc.network(), sc.objective(), [1, 10, 100, 1000])
    want = [0.5, 0.5, 0.4085, 0.5, 0.4085]
    check("line example optimum", all(close(a, b, 0.01) for a, b in zip(res["rates"], want)), str(res["rates"]))

    star = cs.scenario("STAR-C1")
    net, obj = star.network(), star.objective()
    opt = cs.solve(net, obj, 5.0)
    run = cs.simulate(net, obj, "steep", 5.0, 20000, seed=1)
    dev = max(abs(a - b) for a, b in zip(run["rates"], opt["rates"]))
    check("steep tracks the optimum", dev <= 0.05, f"deviation {dev:.4f}")
    check("gain trace length", len(run["gains"]) == 20000)

    ne = cs.find_ne(net, obj, 5.0)
    check("equilibrium is the regularized optimum", ne["oracle_distance"] <= 1e-4, f"{ne['oracle_distance']:.2e}")

    try:
        cs.scenario("NOPE")
        check("unknown scenario raises", False)
    except ValueError:
        check("unknown scenario raises", True)

    results = cs.verify()
    check("property suite", all(ok for _, ok, _ in results), f"{len(results)} checks")

    if failures:
        print(f"{len(failures)} failure(s)")
        return 1
    print("all smoke checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
