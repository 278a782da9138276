"""Smoke test for the singheat Python bindings.

Build the extension first:

    cargo build --release -p singheat-py --features extension-module
    cp target/release/libsingheat_py.so python/singheat_py.so

then run `python3 python/smoke_test.py`.
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import singheat_py as sh


def main():
    ex = sh.critical_exponents(4, 1, 2.0)
    assert ex["p_star"] == 3.0 and ex["subcritical"], ex
    assert abs(ex["L"] - 2.0) < 1e-12, ex

    # flat plane: the quadrature must agree with the closed form
    plane = sh.Manifold.flat(4, 1, lower_time=-1.0)
    assert plane.codim == 3
    got = plane.potential([0.0, 0.0, 0.0, 0.3], 0.0)["value"]
    want = sh.flat_plane_oracle(0.3, 3, 1.0)
    assert abs(got - want) <= 1e-8 * want, (got, want)

    circle = sh.Manifold.circle(4)
    assert abs(circle.distance([1.5, 0.0, 0.0, 0.0], 0.0) - 0.5) < 1e-12
    ev = circle.potential([1.0, 0.0, 0.0, 0.05], 0.0)
    # near field: U ~ d^{-(N-2)} with N = 3
    assert 0.9 < ev["value"] * ev["distance"] < 1.1, ev

    cfg = sh.Scenario()
    text = cfg.to_toml()
    again = sh.Scenario(text)
    assert again.to_toml() == text
    cfg.validate("solve")

    try:
        sh.Scenario("[dimensions]\nn = 3\n").validate("solve")
    except ValueError as e:
        assert "codimension" in str(e), e
    else:
        raise AssertionError("codimension 2 must be rejected")

    err = sh.ode_sanity(2.0)
    assert err < 1e-3, err
    assert not math.isnan(err)

    print("smoke test passed")


if __name__ == "__main__":
    main()
