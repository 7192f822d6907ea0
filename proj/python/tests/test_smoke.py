import math

import numpy as np
import pytest

cgff = pytest.importorskip("cgff")


def test_green_at_origin():
    assert cgff.green([0, 0, 0]) == pytest.approx(0.252731009859, abs=1e-10)
    assert cgff.visits([0, 0, 0]) == pytest.approx(6 * cgff.green([0, 0, 0]))
    assert cgff.sigma0_sq(3) == pytest.approx(1 / 12)


def test_two_point_capacity():
    g0, g1 = cgff.green([0, 0, 0]), cgff.green([1, 0, 0])
    assert cgff.capacity([[0, 0, 0], [1, 0, 0]]) == pytest.approx(2 / (g0 + g1), rel=1e-8)


def test_field_shape_and_determinism():
    a = cgff.sample_gff([4, 5, 6], seed=3)
    b = cgff.sample_gff([4, 5, 6], seed=3)
    assert a.shape == (4, 5, 6)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, cgff.sample_gff([4, 5, 6], seed=4))


def test_bridge_formulas():
    assert cgff.bridge_sup_tail(0.0, 0.0, M=1.0) == pytest.approx(math.exp(-2.0), rel=1e-14)
    assert 0.0 < cgff.bridge_band_prob(0.0, 0.0, a=1.0) < 1.0


def test_iid_recursion_starts_at_q():
    p = cgff.iid_recursion(0.1, 2, 4, 2, 2)
    assert p[0] == pytest.approx(0.1)
    assert len(p) == 3


def test_laplace_single_site():
    g0 = cgff.green([0, 0, 0])
    v = cgff.laplace_exact([([0, 0, 0], 0.5)], 1.3)
    assert v == pytest.approx(math.exp(1.3 * 0.5 / (1 - g0 * 0.5)))


def test_run_flip_from_dict(tmp_path):
    cfg = {
        "experiment": {"kind": "flip"},
        "levels": {"h": [0.02]},
        "flip": {"boundaries": 5, "inner": 200},
        "run": {"seed": 2},
    }
    rep = cgff.run(cfg, str(tmp_path))
    assert rep["schema"] == "cgff-report/1"
    assert rep["kind"] == "flip"
    assert (tmp_path / "flip.json").exists()


def test_bad_config_raises():
    with pytest.raises(cgff.ConfigError, match="transien"):
        cgff.run("[experiment]\nkind = flip\n[lattice]\nd = 2\n")
    assert "run.seed" in cgff.config_keys()
