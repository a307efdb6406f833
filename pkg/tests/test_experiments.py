import pickle

import numpy as np
import pytest

from spherank import experiments as ex


def test_streams_named_and_reproducible():
    a = [s.generate_state(2).tolist() for s in ex.streams(0, "x", 3)]
    assert a == [s.generate_state(2).tolist() for s in ex.streams(0, "x", 3)]
    assert a != [s.generate_state(2).tolist() for s in ex.streams(0, "y", 3)]
    assert len({tuple(v) for v in a}) == 3


@pytest.mark.parametrize("target, d, n, rows", [("table1", 3, 400, 13), ("table2", 2, 100, 10)])
def test_designs_shape_and_pickle(target, d, n, rows):
    designs = ex.gof_designs(target)
    assert len(designs) == rows and designs[0].label == "uniform"
    rng = np.random.default_rng(0)
    for design in designs:
        assert (design.d, design.n) == (d, n)
        x = pickle.loads(pickle.dumps(design.sampler))(25, rng)
        assert x.shape == (25, d)
        np.testing.assert_allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("case", list(ex.FIG3_XI))
def test_case_groups(case):
    g1, g2 = ex._case_groups(case, 0.5, np.random.default_rng(1), (30, 40))
    assert g1.shape == (30, 3) and g2.shape == (40, 3)
    with pytest.raises(ValueError):
        ex._case_groups("fig3-case9", 0.0, np.random.default_rng(1))


def test_gof_rejection_order_independent_of_mapper():
    design = ex.table2_designs()[0]
    a = ex.gof_rejection(design, 8, seed=2, n_mc=100)
    b = ex.gof_rejection(design, 8, seed=2, n_mc=100, map_fn=lambda f, xs: [f(x) for x in reversed(list(xs))][::-1])
    assert a == b and 0.0 <= a["ot"] <= 1.0


def test_manova_rejection_keys():
    rates = ex.manova_rejection("fig3-case1", 0.8, 3, seed=0, sizes=(50, 60), grid=(10, 11, 0))
    assert set(rates) == {"uniform", "vmf-location", "vmf-concentration", "vmf-location-concentration", "pvmf"}


def test_replicate_unknown():
    with pytest.raises(ValueError):
        ex.replicate("table7", 1)
