import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from esqpt import cuspmodel
from esqpt.hamiltonian import gradient, harmonic, quartic_minimum, spec_from_text
from esqpt.singularity import JUMP, LOG, DegenerateStationaryPointError
from esqpt.stationary import (
    PlausibilityWarning,
    SearchConfig,
    classify,
    find_stationary_points,
    index_histogram,
)


@pytest.fixture(scope="module")
def triple():
    return find_stationary_points(cuspmodel.build())


def test_triple_cusp_has_27_points(triple):
    assert len(triple) == 27
    assert index_histogram(triple) == {0: 8, 1: 12, 2: 6, 3: 1}


def test_extreme_points(triple):
    assert triple[0].energy == pytest.approx(-4.551, abs=5e-3) and triple[0].index_r == 0
    assert triple[-1].energy == pytest.approx(0.111, abs=5e-3) and triple[-1].index_r == 3


def test_sorted_and_converged(triple):
    h = cuspmodel.build()
    es = [p.energy for p in triple]
    assert es == sorted(es)
    for p in triple:
        assert np.linalg.norm(gradient(h, p.x)) < 1e-10
        assert p.index_r + p.null_directions + p.positive_directions == 6


def test_deduplicated(triple):
    xs = np.array([p.x for p in triple])
    d = np.linalg.norm(xs[:, None] - xs[None], axis=-1) + np.eye(len(xs))
    assert d.min() >= 1e-6


def test_harmonic_single_minimum():
    pts = find_stationary_points(harmonic(1))
    assert len(pts) == 1
    assert_allclose(pts[0].x, 0, atol=1e-12)
    assert pts[0].energy == pytest.approx(0.0, abs=1e-20)
    assert pts[0].index_r == 0 and not pts[0].degenerate


def test_nine_point_variant():
    h = cuspmodel.build(cuspmodel.CuspParams((1.6, 0.5, 0.75)))
    assert len(find_stationary_points(h)) == 9


def test_block_and_full_search_agree(triple):
    full = find_stationary_points(cuspmodel.build(), SearchConfig(seeds_per_axis=5), use_blocks=False)
    assert len(full) == 27
    for a, b in zip(full, triple):
        assert np.linalg.norm(a.x - b.x) < 1e-6
        assert a.index_r == b.index_r


def test_indices_stable_under_tighter_tolerance(triple):
    tight = find_stationary_points(cuspmodel.build(), SearchConfig(newton_tol=5e-11))
    assert [p.index_r for p in tight] == [p.index_r for p in triple]


def test_empty_result_when_nothing_in_box():
    h = spec_from_text("dof = 1\nterm = 0.5 p1^2\nterm = 0.5 q1^2\nterm = -3 q1\n")
    assert find_stationary_points(h, SearchConfig(box=(-1.0, 1.0))) == []


def test_no_critical_point_gives_empty():
    h = spec_from_text("dof = 1\nterm = 0.5 p1^2\nterm = 1 q1\n")
    assert find_stationary_points(h) == []


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(seeds_per_axis=1)
    with pytest.raises(ValueError):
        SearchConfig(box=(1.0, -1.0))


def test_classify_table_rows(triple):
    row15 = classify(triple[14], 3)
    assert (row15.kind, row15.sign, row15.derivative_order) == (JUMP, "down", 2)
    row4 = classify(triple[3], 3)
    assert (row4.kind, row4.sign, row4.derivative_order) == (LOG, "up", 2)
    assert row4.energy == pytest.approx(triple[3].energy)


def test_classify_harmonic_origin():
    sp = find_stationary_points(harmonic(1))[0]
    c = classify(sp, 1)
    assert (c.kind, c.sign, c.derivative_order) == (JUMP, "up", 0)


def test_degenerate_point_refused():
    pts = find_stationary_points(quartic_minimum())
    assert len(pts) == 1 and pts[0].degenerate and pts[0].null_directions == 1
    with pytest.raises(DegenerateStationaryPointError, match="no Morse classification"):
        classify(pts[0], 1)


def test_flat_hessian_counts_as_degenerate():
    h = spec_from_text("variables = x y\nterm = 1 x^4\nterm = 1 y^4\nterm = 1 x^2 y^2\n")
    pts = find_stationary_points(h)
    assert len(pts) == 1 and pts[0].degenerate and pts[0].null_directions == 2


def test_plausibility_warning_for_large_index():
    h = spec_from_text("dof = 1\nterm = -0.5 p1^2\nterm = -0.5 q1^2\n")
    sp = find_stationary_points(h)[0]
    assert sp.index_r == 2
    with pytest.warns(PlausibilityWarning):
        classify(sp, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        classify(find_stationary_points(harmonic(1))[0], 1)
