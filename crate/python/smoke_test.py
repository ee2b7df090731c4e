"""Smoke test for the Python bindings; oracles are computed with numpy."""

import json

import numpy as np

import semigroup_hls as sh


def dense_check(chain):
    n = chain.n
    L = np.array(chain.generator).reshape(n, n)
    m = np.array(chain.weights)
    # Symmetrise: D^{1/2} L D^{-1/2} is symmetric for a reversible chain.
    d = np.sqrt(m)
    lam, u = np.linalg.eigh(-(d[:, None] * L / d[None, :]))
    assert np.allclose(np.sort(lam), chain.eigenvalues, atol=1e-10)

    f = np.linspace(-1.0, 1.0, n) ** 3
    heat = u @ np.diag(np.exp(-0.7 * lam)) @ u.T
    want = (heat @ (d * f)) / d
    assert np.allclose(chain.heat(0.7, list(f)), want, atol=1e-10)

    poisson = u @ np.diag(np.exp(-1.3 * np.sqrt(np.maximum(lam, 0)))) @ u.T
    assert np.allclose(chain.poisson(1.3, list(f)), (poisson @ (d * f)) / d, atol=1e-10)

    g = np.array(chain.project_out_null(list(f)))
    pos = lam > 1e-12
    coef = u.T @ (d * g)
    i1 = (u[:, pos] @ (coef[pos] / np.sqrt(lam[pos]))) / d
    assert np.allclose(chain.fractional_integral(1.0, list(g)), i1, atol=1e-9)
    return g


def main():
    two = sh.Chain.builtin("two-state")
    assert repr(two) == "Chain(n=2)"
    for chain in (two, sh.Chain.random(7, 3), sh.Chain.builtin("path-5")):
        g = dense_check(chain)
        limit = chain.pairing_limit(list(g), list(g), 1.0)
        quad = chain.pairing(list(g), list(g), 1.0)
        assert abs(limit - quad) < 1e-8, (limit, quad)

    # Half-stable density integrates to one.
    s = np.linspace(1e-6, 400.0, 400_001)
    dens = np.array([sh.subordinator_density(1.0, x) for x in s[::100]])
    mass = np.trapezoid(dens, s[::100])
    assert abs(mass - 1.0) < 0.03, mass

    est, se, oracle = two.green_indicator(1.0, 1.0, 20_000, seed=3)
    assert oracle == 2.0 and abs(est - oracle) < 4 * se + 0.02, (est, se)

    reports = json.loads(sh.run_suite(json.dumps({"suite": "spectral"})))
    assert reports and all(r["status"] == "pass" for r in reports)
    assert "2 ∫∫ (y∧s) f(x,y) dx dy" in sh.describe("green-formula")
    assert sh.describe("bogus") is None
    try:
        sh.Chain([0.0, 1.0, 1.0, 0.0], [1.0, 1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("invalid generator accepted")
    print("python smoke test: ok ({} spectral checks)".format(len(reports)))


if __name__ == "__main__":
    main()
