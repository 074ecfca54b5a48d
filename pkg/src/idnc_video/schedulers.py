"""Per-slot packet selection for deadline-aware IDNC broadcast.

Selection over a window runs in two stages.  Critical receivers (exactly as
many missing packets as slots left) are served first by a clique that
minimises the expected number of receivers turning affected.  Non-critical
receivers adjacent to that clique are then added to maximise the completion
bound.  ``select_clique_exact`` enumerates maximal cliques and is meant for
small instances; ``select_clique_heuristic`` grows each stage greedily.

EW-IDNC widens the window layer by layer while the post-selection bound stays
at or above ``lam``; NOW-IDNC always uses the smallest feasible window.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .completion import CompletionBound, bound_from_counts, completion_probs
from .errors import ArgumentError
from .graph import (
    DEFAULT_MAX_VERTICES,
    Clique,
    IdncGraph,
    build_graph,
    enumerate_maximal_cliques,
)
from .video import (
    Classification,
    LayeredGop,
    SessionClock,
    as_sfm,
    classify_counts,
    largest_feasible_window,
    smallest_feasible_window,
    wants_counts,
)

TIE_TOL = 1e-12


@dataclass(frozen=True)
class SchedulerDecision:
    clique: Clique
    window: int
    bound: CompletionBound
    critical_part: Clique = Clique()
    noncritical_part: Clique = Clique()

    @property
    def packets(self) -> frozenset[int]:
        return self.clique.packets


@dataclass
class _Window:
    """Everything the selectors need about one window at one slot."""

    W: np.ndarray
    Q: int
    eps: np.ndarray
    classes: Classification
    graph: IdncGraph
    ell: int

    @classmethod
    def of(cls, F, gop: LayeredGop, ell: int, Q: int, eps) -> "_Window":
        F = as_sfm(F, gop)
        eps = np.asarray(eps, dtype=float)
        if eps.shape != (F.shape[0],):
            raise ArgumentError(f"need one erasure probability per receiver, got shape {eps.shape}")
        W = wants_counts(F, gop, ell)
        return cls(W, Q, eps, classify_counts(W, Q), build_graph(F, gop, ell), ell)

    def bound(self, targeted: Iterable[int]) -> CompletionBound:
        targeted = frozenset(targeted)
        if self.Q < 1:
            return CompletionBound(0.0, self.ell, self.Q, targeted)
        value = bound_from_counts(self.W, self.Q, self.eps, targeted, self.classes)
        return CompletionBound(value, self.ell, self.Q, targeted)

    @cached_property
    def gain(self) -> np.ndarray:
        """Per receiver, log-gain of the non-critical bound from serving it now (0 outside B)."""
        out = np.zeros(len(self.W))
        B = list(self.classes.noncritical)
        if B and self.Q >= 1:
            p_now = completion_probs(self.W, self.Q, self.eps)[B]
            p_next = completion_probs(self.W, self.Q - 1, self.eps)[B]
            # W < Q for non-critical receivers, so p_next > 0
            out[B] = np.log(p_now) - np.log(p_next)
        return out

    def mask(self, receivers: Iterable[int]) -> np.ndarray:
        chosen = np.zeros(len(self.W), dtype=bool)
        chosen[list(receivers)] = True
        return chosen[self.graph.receivers]


# objectives -----------------------------------------------------------------


def expected_affected_increase(
    F, gop: LayeredGop, ell: int, Q: int, targeted_critical: Iterable[int], eps: Sequence[float]
) -> float:
    """Expected number of critical receivers that turn affected after this slot."""
    classes = classify_counts(wants_counts(F, gop, ell), Q)
    targeted_critical = set(targeted_critical)
    if not targeted_critical <= set(classes.critical):
        raise ArgumentError("targeted receivers must all be critical")
    return _affected_increase(len(classes.critical), targeted_critical, np.asarray(eps, dtype=float))


def _affected_increase(n_critical: int, targeted: Iterable[int], eps: np.ndarray) -> float:
    return n_critical - sum(1.0 - eps[i] for i in sorted(targeted))


def noncritical_objective(
    W: Sequence[int], Q: int, eps: Sequence[float], noncritical: Iterable[int], targeted: Iterable[int]
) -> float:
    """Completion bound over non-critical receivers when ``targeted`` of them are served."""
    targeted = set(targeted)
    noncritical = sorted(noncritical)
    p_now = completion_probs(W, Q, eps)
    p_next = completion_probs(W, Q - 1, eps)
    return float(np.prod([p_now[i] if i in targeted else p_next[i] for i in noncritical]))


def _pick(scores: np.ndarray, maximise: bool) -> int:
    """First index whose score ties the optimum; indices are in (receiver, packet) order."""
    best = scores.max() if maximise else scores.min()
    return int(np.flatnonzero(np.abs(scores - best) <= TIE_TOL)[0])


# exact two-stage selection ---------------------------------------------------


def select_clique_exact(
    F, gop: LayeredGop, ell: int, Q: int, eps: Sequence[float], max_vertices: int = DEFAULT_MAX_VERTICES
) -> SchedulerDecision:
    win = _Window.of(F, gop, ell, Q, eps)
    kc = _exact_critical(win, max_vertices)
    kb = exact_noncritical_stage(win, kc, max_vertices)
    clique = kc | kb
    if not len(clique) and len(win.graph):
        clique = _best_effort(win)
    return SchedulerDecision(clique, ell, win.bound(clique.targeted), kc, kb)


def _exact_critical(win: _Window, max_vertices: int) -> Clique:
    if not win.classes.critical:
        return Clique()
    Gc = win.graph.restrict_receivers(win.classes.critical)
    cliques = enumerate_maximal_cliques(Gc, max_vertices)
    if not cliques:
        return Clique()
    n = len(win.classes.critical)
    scores = np.array([_affected_increase(n, c.targeted, win.eps) for c in cliques])
    tied = [c for c, s in zip(cliques, scores) if s - scores.min() <= TIE_TOL]
    if len(tied) == 1 or not win.classes.noncritical:
        return tied[0]
    # equal critical service: prefer the clique leaving the best non-critical follow-up
    follow = np.array([
        noncritical_objective(
            win.W, win.Q, win.eps, win.classes.noncritical,
            exact_noncritical_stage(win, c, max_vertices).targeted,
        )
        for c in tied
    ])
    return tied[_pick(follow, maximise=True)]


def exact_noncritical_stage(win: _Window, kc: Clique, max_vertices: int = DEFAULT_MAX_VERTICES) -> Clique:
    """Best non-critical clique among vertices adjacent to all of ``kc``."""
    if not win.classes.noncritical:
        return Clique()
    G = win.graph
    Gb = G.induced(win.mask(win.classes.noncritical) & G.common_neighbours(kc))
    cliques = enumerate_maximal_cliques(Gb, max_vertices)
    if not cliques:
        return Clique()
    scores = np.array(
        [noncritical_objective(win.W, win.Q, win.eps, win.classes.noncritical, c.targeted) for c in cliques]
    )
    return cliques[_pick(scores, maximise=True)]


def select_noncritical_exact(
    F, gop: LayeredGop, ell: int, Q: int, eps: Sequence[float], critical_part: Clique,
    max_vertices: int = DEFAULT_MAX_VERTICES,
) -> Clique:
    """Optimal second stage for a given first-stage clique (used to audit the heuristic)."""
    return exact_noncritical_stage(_Window.of(F, gop, ell, Q, eps), critical_part, max_vertices)


# greedy heuristic ------------------------------------------------------------


def _reach(G: IdncGraph, cand: np.ndarray, n_receivers: int) -> tuple[np.ndarray, np.ndarray]:
    """For each candidate vertex: receivers it covers (itself plus receivers of adjacent candidates)."""
    idx = np.flatnonzero(cand)
    owner = G.receivers[idx][:, None] == np.arange(n_receivers)[None, :]
    sub = G.adj[np.ix_(idx, idx)].astype(np.int32)
    reach = (sub @ owner.astype(np.int32) > 0) | owner
    return idx, reach


def _greedy_critical(win: _Window, pool: Sequence[int]) -> Clique:
    G = win.graph
    M = len(win.W)
    weight = 1.0 - win.eps
    n = len(pool)
    cand = win.mask(pool)
    follow = win.mask(win.classes.noncritical) if pool == win.classes.critical else None
    chosen: list[int] = []
    served = 0.0
    while cand.any():
        idx, reach = _reach(G, cand, M)
        # lower bound on the affected increase if v and every reachable receiver were served
        scores = n - served - reach @ weight
        tied = idx[np.abs(scores - scores.min()) <= TIE_TOL]
        v = int(tied[0])
        if len(tied) > 1 and follow is not None and follow.any():
            # equal critical service: prefer the vertex leaving more non-critical gain reachable
            follow_gain = [
                win.gain[np.unique(G.receivers[follow & G.adj[u]])].sum() for u in tied
            ]
            v = int(tied[_pick(np.array(follow_gain), maximise=True)])
        chosen.append(v)
        served += weight[G.receivers[v]]
        cand &= G.adj[v]
        if follow is not None:
            follow &= G.adj[v]
    return Clique([(int(G.receivers[v]), int(G.packets[v])) for v in chosen])


def _greedy_noncritical(win: _Window, kc: Clique) -> Clique:
    G = win.graph
    B = win.classes.noncritical
    if not B:
        return Clique()
    M = len(win.W)
    gain = win.gain
    cand = win.mask(B) & G.common_neighbours(kc)
    chosen: list[int] = []
    served = 0.0
    while cand.any():
        idx, reach = _reach(G, cand, M)
        # log of the bound over B, up to the constant sum of log p_next
        scores = served + reach @ gain
        v = int(idx[_pick(scores, maximise=True)])
        chosen.append(v)
        served += gain[G.receivers[v]]
        cand &= G.adj[v]
    return Clique([(int(G.receivers[v]), int(G.packets[v])) for v in chosen])


def _best_effort(win: _Window) -> Clique:
    """Clique for a window holding only affected receivers; keeps the slot in use."""
    return _greedy_critical(win, win.classes.affected)


def select_clique_heuristic(F, gop: LayeredGop, ell: int, Q: int, eps: Sequence[float]) -> SchedulerDecision:
    win = _Window.of(F, gop, ell, Q, eps)
    kc = _greedy_critical(win, win.classes.critical)
    kb = _greedy_noncritical(win, kc)
    clique = kc | kb
    if not len(clique) and len(win.graph):
        clique = _best_effort(win)
    return SchedulerDecision(clique, ell, win.bound(clique.targeted), kc, kb)


# window policies -------------------------------------------------------------

Selector = Callable[..., SchedulerDecision]


def _remaining(clock: SessionClock | int) -> int:
    Q = clock.remaining if isinstance(clock, SessionClock) else int(clock)
    if Q < 1:
        raise ArgumentError(f"no transmissions left (Q={Q})")
    return Q


def ew_idnc_step(
    F,
    gop: LayeredGop,
    clock: SessionClock | int,
    lam: float,
    eps: Sequence[float],
    selector: Selector = select_clique_heuristic,
) -> SchedulerDecision:
    """Expand the coding window while the post-selection bound meets ``lam``."""
    Q = _remaining(clock)
    lo = smallest_feasible_window(F, gop)
    hi = largest_feasible_window(F, gop, Q, lo)
    previous = None
    for ell in range(lo, hi + 1):
        decision = selector(F, gop, ell, Q, eps)
        if decision.bound.value < lam:
            return previous if previous is not None else decision
        if ell == hi:
            return decision
        previous = decision
    raise AssertionError("unreachable")


def ew_idnc_trace(
    F, gop: LayeredGop, clock: SessionClock | int, lam: float, eps, selector: Selector = select_clique_heuristic
) -> list[SchedulerDecision]:
    """Every per-window decision EW-IDNC evaluates in one slot, in window order."""
    Q = _remaining(clock)
    lo = smallest_feasible_window(F, gop)
    hi = largest_feasible_window(F, gop, Q, lo)
    trace = []
    for ell in range(lo, hi + 1):
        trace.append(selector(F, gop, ell, Q, eps))
        if trace[-1].bound.value < lam:
            break
    return trace


def now_idnc_step(
    F, gop: LayeredGop, clock: SessionClock | int, eps: Sequence[float], selector: Selector = select_clique_heuristic
) -> SchedulerDecision:
    Q = _remaining(clock)
    return selector(F, gop, smallest_feasible_window(F, gop), Q, eps)


def max_clique_baseline_step(
    F, gop: LayeredGop, eps: Sequence[float] | None = None, max_vertices: int = DEFAULT_MAX_VERTICES
) -> SchedulerDecision:
    """Serve as many receivers as possible over all layers, ignoring layers and deadline.

    ``eps`` is accepted for a uniform scheduler signature and does not affect the choice.
    """
    L = gop.n_layers
    G = build_graph(F, gop, L)
    if len(G) <= max_vertices:
        cliques = enumerate_maximal_cliques(G, max_vertices)
        clique = min(cliques, key=lambda c: (-len(c), sum(c.packets), c.vertices))
    else:
        clique = _greedy_max_clique(G)
    bound = CompletionBound(float("nan"), L, -1, clique.targeted)
    return SchedulerDecision(clique, L, bound)


def _greedy_max_clique(G: IdncGraph) -> Clique:
    cand = np.ones(len(G), dtype=bool)
    # ties go to the lowest packet, then the lowest receiver
    order = np.lexsort((G.receivers, G.packets))
    chosen = []
    while cand.any():
        idx = order[cand[order]]
        degree = G.adj[np.ix_(idx, idx)].sum(axis=1)
        v = int(idx[int(np.argmax(degree))])
        chosen.append(v)
        cand &= G.adj[v]
    return Clique([(int(G.receivers[v]), int(G.packets[v])) for v in chosen])


# scheduler objects for the simulator -----------------------------------------


class EwIdnc:
    name = "ew-idnc"

    def __init__(self, lam: float, selector: Selector = select_clique_heuristic):
        # thresholds above 1 are allowed and simply never met
        if lam < 0.0:
            raise ArgumentError(f"threshold must be non-negative, got {lam}")
        self.lam = lam
        self.selector = selector

    def __call__(self, F, gop, Q, eps) -> SchedulerDecision:
        return ew_idnc_step(F, gop, Q, self.lam, eps, self.selector)


class NowIdnc:
    name = "now-idnc"

    def __init__(self, selector: Selector = select_clique_heuristic):
        self.selector = selector

    def __call__(self, F, gop, Q, eps) -> SchedulerDecision:
        return now_idnc_step(F, gop, Q, eps, self.selector)


class MaxClique:
    name = "max-clique"

    def __init__(self, max_vertices: int = DEFAULT_MAX_VERTICES):
        self.max_vertices = max_vertices

    def __call__(self, F, gop, Q, eps) -> SchedulerDecision:
        return max_clique_baseline_step(F, gop, eps, self.max_vertices)


def exact_selector(max_vertices: int = DEFAULT_MAX_VERTICES) -> Selector:
    def select(F, gop, ell, Q, eps):
        return select_clique_exact(F, gop, ell, Q, eps, max_vertices)

    return select
