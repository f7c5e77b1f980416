"""Smoke test for the Python extension.

    pip install -e crates/python --no-build-isolation
    python python/smoke_test.py [--skip-gamma]
"""

import math
import sys

import sandlab_py as s


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def greens():
    m = 6
    g = s.greens_torus(m)
    close(sum(map(sum, g)), 0.0, 1e-12)
    # discrete Laplacian of the torus Green's function is e_0 - 1/m^2
    for i in range(m):
        for j in range(m):
            nb = g[(i + 1) % m][j] + g[i - 1][j] + g[i][(j + 1) % m] + g[i][j - 1]
            lap = 4 * g[i][j] - nb
            close(lap, (i == 0 and j == 0) - 1 / m**2, 1e-12)
    e1, diag = s.greens_z2([(1, 0), (1, 1)])
    close(e1, -0.25, 1e-9)
    close(diag, -1 / math.pi, 1e-9)


def group_and_dual():
    g = s.group(3)
    assert g["order"] == math.prod(g["invariant_factors"]) == 11664
    d = s.dual(2, [0, 1, 50])
    assert d["order"] == s.group(2)["order"]
    close(d["l2_sq"][0], d["order"] - 1, 1e-9)
    assert d["l2_sq"][2] < 1e-6
    search = s.gap(2)
    close(search["gap"], d["gap"], 1e-12)


def stabilize():
    pile = [[0, 5, 1], [2, 9, 0], [3, 3, 3]]
    r = s.stabilize(pile)
    assert max(map(max, r["heights"])) <= 3
    assert sum(map(sum, pile)) == sum(map(sum, r["heights"])) + r["lost"]
    assert s.is_recurrent([[0, 3, 3], [3, 3, 3], [3, 3, 3]])
    try:
        s.stabilize([[0, 1], [2]])
    except ValueError:
        pass
    else:
        raise AssertionError("ragged pile accepted")


def iid():
    a = s.iid([(2, 0.5), (4, 0.5)], radius=8, trials=4, seed=5)
    b = s.iid([(2, 0.5), (4, 0.5)], radius=8, trials=4, seed=5)
    assert a == b
    assert a["max_invariant_drift"] < 1e-8


def gamma():
    r = s.gamma()
    close(r["gamma"], 2.868114013, 1e-6)
    close(r["gamma"] * r["c0"], 1.0, 1e-12)
    assert r["minimizer_is_delta12"]
    try:
        s.gamma(threshold=2.0)
    except s.NumericalGuardError:
        pass
    else:
        raise AssertionError("guard did not fire")


if __name__ == "__main__":
    checks = [greens, group_and_dual, stabilize, iid]
    if "--skip-gamma" not in sys.argv:
        checks.append(gamma)
    for check in checks:
        check()
        print("ok", check.__name__)
