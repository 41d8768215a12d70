"""Smoke test for the pycavity extension: python python/smoke_test.py"""

import math
import os
import tempfile

import pycavity

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIGS = os.path.join(HERE, "..", "..", "core", "configs")


def main():
    m = pycavity.resonance(1.0, 5e-5, 1 + 0j, 100 + 0.1j, 100)
    assert abs(m["omega_k"] - 100 * math.pi) < 1e-2, m["omega_k"]
    assert m["closure_residual"] < 0.05
    assert isinstance(m["Omega_k"], complex) and m["Omega_k"].imag < 0

    rate = m["gamma_rad"] + m["gamma_abs"]
    r = pycavity.extraction(1.0, 5e-5, 1 + 0j, 100 + 0.1j, 100, 2.0 / rate)
    assert abs(r["eta"] / r["eta_closed_form"] - 1) < 1e-3, r
    total = r["eta"] ** 2 + sum(abs(c) ** 2 for v in r["chi"].values() for c in v)
    assert total <= 1 + 1e-8, total

    assert abs(pycavity.wigner("vacuum", 0j) - 2 / math.pi) < 1e-14
    assert abs(pycavity.wigner("squeezed_number", 0j, squeeze=0.8, photons=1) + 2 / math.pi) < 1e-12
    assert abs(pycavity.fidelity_condition(0.9, 0.0) - 0.81 / 0.19) < 1e-12

    a = pycavity.cat_output(0.8, 1, 0.9, 0.1, 0.9 + 0j, 2 + 0j, 0.001)
    b = pycavity.cat_output(0.8, 1, 0.7, 0.7, 0.7 + 0j, 2 + 0j, 0.001)
    assert a["min_W"] < 0 and a["sign_changes"] >= 2, a["min_W"]
    assert b["min_W"] > -0.01 and b["sign_changes"] < 2, b["min_W"]
    assert abs(a["normalization"] - 1) < 1e-3
    assert len(a["values"]) == len(a["values"][0])

    with tempfile.TemporaryDirectory() as out:
        res = pycavity.run_scenario("cat-demo", os.path.join(CONFIGS, "fig2a.toml"), out)
        assert len(res["files"]) == 2 and len(res["config_hash"]) == 64
        try:
            pycavity.run_scenario("cat-demo", os.path.join(out, "missing.toml"), out)
        except ValueError as e:
            assert "config" in str(e)
        else:
            raise AssertionError("missing config accepted")

    print("pycavity smoke test passed")


if __name__ == "__main__":
    main()
