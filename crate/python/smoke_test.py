"""Smoke test of the o2hopf_py extension.

Build first:
    cargo build -p o2hopf-py --features extension-module
then run from the repository root:
    python3 python/smoke_test.py
"""

import cmath
import importlib
import math
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load():
    try:
        return importlib.import_module("o2hopf_py")
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = os.path.join(ROOT, "target", profile, "libo2hopf_py.so")
        if os.path.exists(lib):
            tmp = tempfile.mkdtemp()
            shutil.copy(lib, os.path.join(tmp, "o2hopf_py.so"))
            sys.path.insert(0, tmp)
            return importlib.import_module("o2hopf_py")
    sys.exit("o2hopf_py not found; build it with: cargo build -p o2hopf-py --features extension-module")


def main():
    m = load()

    c = m.CubicCoefficients(1.0, 1.0, -1.0, -2.0)
    g = c.genericity()
    assert all(g[k]["holds"] for k in ("lambda_ne_gamma", "re_sum_nonzero", "re_lambda_nonzero"))
    kind = lambda b: b["kind"] if isinstance(b["kind"], str) else next(iter(b["kind"]))
    branches = {kind(b): b for b in c.equilibria(1)}
    assert abs(branches["Traveling1"]["amplitude"] - 1.0) < 1e-12
    assert abs(branches["Standing"]["amplitude"] - math.sqrt(1.0 / 3.0)) < 1e-12
    f1, f2 = c.evaluate(1.0, 0.0, 0.0, 1)
    assert abs(f1) < 1e-12 and abs(f2) < 1e-12
    try:
        m.CubicCoefficients(1.0, 1.0, -1.0, -1.0).equilibria(1)
        raise AssertionError("Lambda = Gamma accepted")
    except ValueError as e:
        assert "GenericityViolation" in str(e)

    ch = m.Channel("m1", 12.0, 129, 4, 0.05)
    x, u, res = ch.profile()
    assert len(x) == 129 and res < 1e-10
    ev0 = ch.spectrum(0, -1e-3, 1e-3, -1e-3, 1e-3)
    assert len(ev0) == 1 and abs(ev0[0]) < 1e-8
    e1 = ch.eigenvalues(1)
    em1 = ch.eigenvalues(-1)
    assert max(min(abs(a - b) for b in em1) for a in e1) < 1e-8

    circle = [0.05 * cmath.exp(2j * math.pi * i / 12) for i in range(12)]
    assert m.evans_root_count("m1", circle, 0) == 1
    d = m.evans("m1", 0.5 + 0.2j, 1)
    assert abs(m.evans("m1", 0.5 - 0.2j, -1) - d.conjugate()) < 1e-8

    fit = m.synthetic_fit(1.0, -1.0 + 0.3j, -2.0 - 0.1j)
    lam = complex(*fit["Lambda"])
    assert abs(lam - (-1.0 + 0.3j)) < 0.02 * abs(lam)

    cfg = m.RunConfig("m1")
    text = cfg.to_toml()
    assert m.RunConfig.from_toml(text).to_toml() == text
    cfg.output_dir = tempfile.mkdtemp()
    man = cfg.run("profile")
    assert man["summary"]["residual"] < 1e-10
    assert "profile.csv" in man["files"]
    cfg.eps = []
    try:
        cfg.run("bifurcate")
        raise AssertionError("empty eps list accepted")
    except ValueError:
        pass

    print("smoke test passed")


if __name__ == "__main__":
    main()
