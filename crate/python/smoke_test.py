#!/usr/bin/env python3
"""Smoke test for the gwp_py extension module.

Builds nothing itself: run `cargo build -p gwp-py` (or --release) first.
The script locates the compiled cdylib, exposes it under the importable
module name, and exercises one call of each binding family.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        REPO / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libgwp_py.so", "gwp_py.so", "libgwp_py.dylib")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p gwp-py")
    stage = Path(tempfile.mkdtemp(prefix="gwp_py_"))
    shutil.copy2(built, stage / "gwp_py.so")
    sys.path.insert(0, str(stage))
    import gwp_py

    return gwp_py


def approx(x, y, tol=1e-12):
    assert abs(x - y) <= tol * (1.0 + abs(y)), f"{x} !~ {y}"


def main():
    g = load_module()

    # Distribution basics at (1, 1, 2): known closed-form values.
    approx(g.pmf(1.0, 1.0, 2.0, 0), 2.0 / 3.0)
    approx(g.pmf(1.0, 1.0, 2.0, 1), 1.0 / 6.0)
    approx(g.cdf(1.0, 1.0, 2.0, 1), 5.0 / 6.0)
    approx(g.log_pmf(1.0, 1.0, 2.0, 0), math.log(2.0 / 3.0), 1e-13)
    table = g.pmf_table(1.0, 1.0, 2.0, 10)
    assert len(table) == 11 and abs(sum(table) - g.cdf(1.0, 1.0, 2.0, 10)) < 1e-12
    assert g.quantile(1.0, 1.0, 2.0, 0.5) == 0

    m = g.moments(1.0, 1.0, 3.0)
    approx(m["mean"], 0.5)
    approx(m["variance"], 2.25)
    assert m["factorial_moments"][2] is None and m["factorial_moments"][3] is None
    approx(g.pgf(1.0, 1.0, 3.0, 0.0), g.pmf(1.0, 1.0, 3.0, 0), 1e-10)

    # Symmetric roles of the two shape parameters.
    approx(g.log_pmf(2.5, 0.7, 1.8, 9), g.log_pmf(0.7, 2.5, 1.8, 9), 1e-12)

    # Sampling is deterministic per (seed, stream) and respects the law.
    d1 = g.sample(1.0, 1.0, 3.0, 2000, 42)
    d2 = g.sample(1.0, 1.0, 3.0, 2000, 42, stream=0)
    assert d1 == d2
    assert g.sample(1.0, 1.0, 3.0, 2000, 42, stream=1) != d1
    emp = sum(d1) / len(d1)
    assert abs(emp - 0.5) < 0.2, f"sample mean {emp}"

    # Joint law sums over a diagonal slice to the aggregated marginal.
    total = sum(g.mgwd_pmf(1.3, [0.7, 1.9], 2.4, [j, 3 - j]) for j in range(4))
    approx(total, g.pmf(1.3, 2.6, 2.4, 3), 1e-10)

    # Avoidance probability and its inversion round-trip.
    p0 = g.avoidance_probability(1.3, 2.0, 2.5, 1.0)
    approx(g.solve_avoidance_inverse(1.3, 2.5, p0), 2.0, 1e-10)

    # Conditional split of 2 points over half a window: uniform thirds.
    for j in range(3):
        approx(g.conditional_count_pmf(1.0, 1.0, 2.0, 1.0, 2.0, 2, j), 1.0 / 3.0, 1e-12)

    # Intensity of the unit window at (1, 1, 3).
    approx(g.moment_measures(1.0, 1.0, 3.0, [1.0], [1]), 0.5)

    # Orderliness ratio at the hand-checked point, and its volume limit.
    approx(g.orderliness_ratio(1.0, 1.0, 1.0, 1.0), 2.0 / 3.0)
    limit = g.orderliness_small_volume_limit(1.0, 2.0, 2.0)
    assert 0.0 < limit < 1.0

    # Field simulation: reproducible, and backends see the same grid.
    counts = g.simulate_counts(1.0, 1.0, 2.0, [0.0, 0.0], [1.0, 1.0], [4, 4], "cox", 7, 0)
    assert len(counts) == 16
    assert counts == g.simulate_counts(1.0, 1.0, 2.0, [0.0, 0.0], [1.0, 1.0], [4, 4], "cox", 7, 0)
    try:
        g.simulate_counts(1.0, 1.0, 2.0, [0.0], [1.0], [4], "bogus", 7, 0)
        raise AssertionError("bogus backend accepted")
    except ValueError:
        pass

    pts = g.simulate_points(2.0, 4.0, 1.5, [0.0, 0.0], [1.0, 1.0], [8, 8], 11, 0)
    assert all(0.0 <= x <= 1.0 and 0.0 <= y <= 1.0 for x, y in pts)

    # Convergence curves shrink towards their limits.
    nb = g.nb_limit_curve(2.0, 1.0, 1.0, [10.0, 100.0, 1000.0])
    assert nb[-1][1] < 0.01 and nb[0][1] > nb[-1][1]
    po = g.poisson_limit_curve(1.0, 1.0, [10.0, 100.0, 1000.0])
    assert po[-1][1] < 0.005

    # Moment fit returns the full record; first matched moment is the
    # sample mean.
    draws = g.sample(2.0, 3.0, 8.0, 200_000, 31)
    fit = g.fit_moments(draws)
    assert set(fit) == {
        "a_hat", "k_hat", "rho_hat", "matched_moments", "canonical", "converged", "note",
    }
    approx(fit["matched_moments"][0], sum(draws) / len(draws), 1e-12)

    approx(g.tv_distance([0.5, 0.5], [0.5, 0.25]), 0.25)

    # Validation errors surface as ValueError.
    try:
        g.pmf(1.0, 1.0, -2.0, 0)
        raise AssertionError("negative rho accepted")
    except ValueError:
        pass

    print("gwp_py smoke test: all checks passed")


if __name__ == "__main__":
    main()
