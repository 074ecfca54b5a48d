import numpy as np
import pytest

from idnc_video.errors import ArgumentError, OracleUnavailable
from idnc_video.graph import Clique, Vertex, build_graph
from idnc_video.schedulers import (
    EwIdnc,
    MaxClique,
    NowIdnc,
    ew_idnc_step,
    ew_idnc_trace,
    exact_selector,
    expected_affected_increase,
    max_clique_baseline_step,
    noncritical_objective,
    now_idnc_step,
    select_clique_exact,
    select_clique_heuristic,
    select_noncritical_exact,
)
from idnc_video.video import (
    LayeredGop,
    SessionClock,
    classify_receivers,
    largest_feasible_window,
    smallest_feasible_window,
    wants_counts,
)

from conftest import EXAMPLE1_F, EXAMPLE1_GOP, TWO_LAYER_F, TWO_LAYER_GOP, WINDOWS_F, WINDOWS_GOP, random_instance
from oracles import audit

EPS2 = [0.2, 0.2]


def test_two_layer_window_bounds():
    d1 = select_clique_exact(TWO_LAYER_F, TWO_LAYER_GOP, 1, 2, EPS2)
    assert d1.packets == {0}
    assert d1.bound.value == pytest.approx(0.96, abs=1e-12)
    d2 = select_clique_exact(TWO_LAYER_F, TWO_LAYER_GOP, 2, 2, EPS2)
    assert d2.packets == {1}
    assert d2.bound.value == pytest.approx(0.6144, abs=1e-12)
    for sel in (select_clique_exact, select_clique_heuristic):
        assert sel(TWO_LAYER_F, TWO_LAYER_GOP, 2, 2, EPS2).clique == d2.clique


@pytest.mark.parametrize("selector", [select_clique_exact, select_clique_heuristic])
def test_windows_example_selection(selector):
    d = selector(WINDOWS_F, WINDOWS_GOP, 2, 3, [0.2, 0.2])
    assert d.clique == Clique([(0, 2), (1, 2)])
    assert d.packets == {2}
    # both targeted: P[T_2 <= 3] * P[T_1 <= 3] = 0.896 * 0.992
    assert d.bound.value == pytest.approx(0.888832, abs=1e-9)


def test_expected_affected_increase():
    # each receiver misses one packet with one slot left, so both are critical
    F = np.array([[1, 0], [0, 1]], dtype=bool)
    gop = LayeredGop((2,))
    assert expected_affected_increase(F, gop, 1, 1, {0, 1}, EPS2) == pytest.approx(0.4, abs=1e-15)
    assert expected_affected_increase(F, gop, 1, 1, {0}, EPS2) == pytest.approx(1.2, abs=1e-15)
    with pytest.raises(ArgumentError):
        expected_affected_increase(F, gop, 1, 2, {0}, EPS2)


def test_ew_idnc_threshold_examples():
    d = ew_idnc_step(TWO_LAYER_F, TWO_LAYER_GOP, SessionClock(1, 2), 0.9, EPS2)
    assert (d.window, d.packets) == (1, {0})
    assert d.bound.value == pytest.approx(0.96, abs=1e-12)
    d = ew_idnc_step(TWO_LAYER_F, TWO_LAYER_GOP, 2, 0.6, EPS2)
    assert (d.window, d.packets) == (2, {1})
    assert [t.window for t in ew_idnc_trace(TWO_LAYER_F, TWO_LAYER_GOP, 2, 0.9, EPS2)] == [1, 2]


def test_ew_idnc_extreme_thresholds(rng):
    for _ in range(200):
        F, gop, eps, Q = random_instance(rng)
        if not F.any():
            continue
        lo = smallest_feasible_window(F, gop)
        hi = largest_feasible_window(F, gop, Q, lo)
        assert ew_idnc_step(F, gop, Q, 1.0 + 1e-9, eps).clique == now_idnc_step(F, gop, Q, eps).clique
        assert ew_idnc_step(F, gop, Q, 1.5, eps).window == lo
        assert ew_idnc_step(F, gop, Q, 0.0, eps).window == hi


def test_ew_idnc_window_rule(rng):
    for _ in range(200):
        F, gop, eps, Q = random_instance(rng)
        if not F.any():
            continue
        lam = float(rng.uniform(0, 1))
        trace = ew_idnc_trace(F, gop, Q, lam, eps)
        d = ew_idnc_step(F, gop, Q, lam, eps)
        if trace[-1].bound.value < lam and len(trace) > 1:
            assert d.window == trace[-2].window
        else:
            assert d.window == trace[-1].window
        assert all(t.bound.value >= lam for t in trace[:-1])


def test_ew_idnc_rejects_spent_clock():
    with pytest.raises(ArgumentError):
        ew_idnc_step(TWO_LAYER_F, TWO_LAYER_GOP, 0, 0.5, EPS2)
    with pytest.raises(ArgumentError):
        EwIdnc(-0.1)


def test_now_idnc_uses_smallest_window():
    d = now_idnc_step(WINDOWS_F, WINDOWS_GOP, 3, [0.2, 0.2])
    assert d.window == 2
    only_base = np.array([[1, 0, 0, 0, 0], [0, 1, 0, 0, 0]], dtype=bool)
    assert now_idnc_step(only_base, EXAMPLE1_GOP, 3, EPS2).clique == ew_idnc_step(
        only_base, EXAMPLE1_GOP, 3, 0.5, EPS2
    ).clique


def test_max_clique_baseline():
    d = max_clique_baseline_step(EXAMPLE1_F, EXAMPLE1_GOP)
    assert d.clique == Clique([(0, 0), (1, 1)])
    assert np.isnan(d.bound.value)
    big = np.ones((5, 8), dtype=bool)
    big[np.arange(5), np.arange(5)] = False
    d = max_clique_baseline_step(big, LayeredGop((4, 4)))
    assert build_graph(big, LayeredGop((4, 4)), 2).is_clique(d.clique)
    assert len(d.clique) >= 2


def test_critical_receivers_served_first(rng):
    for _ in range(300):
        F, gop, eps, Q = random_instance(rng)
        ell = gop.n_layers
        c = classify_receivers(F, gop, ell, Q)
        if not c.critical:
            continue
        d = select_clique_heuristic(F, gop, ell, Q, eps)
        assert len(d.critical_part) >= 1
        assert d.critical_part.targeted <= set(c.critical)


def test_heuristic_against_exact_oracle(rng):
    failures = []
    for _ in range(300):
        F, gop, eps, Q = random_instance(rng)
        ell = int(rng.integers(1, gop.n_layers + 1))
        failures += audit(F, gop, ell, Q, eps)
    assert not failures


def test_exact_selector_budget():
    F = np.ones((5, 8), dtype=bool)
    with pytest.raises(OracleUnavailable):
        select_clique_exact(F, LayeredGop((8,)), 1, 10, [0.1] * 5)
    with pytest.raises(OracleUnavailable):
        exact_selector(30)(F, LayeredGop((8,)), 1, 10, [0.1] * 5)


def test_scheduler_objects_share_signature():
    for s in (EwIdnc(0.5), EwIdnc(0.5, exact_selector()), NowIdnc(), MaxClique()):
        d = s(EXAMPLE1_F, EXAMPLE1_GOP, 3, EPS2)
        assert len(d.clique) >= 1
        assert all(isinstance(v, Vertex) for v in d.clique.vertices)
