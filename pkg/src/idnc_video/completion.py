"""Deadline-completion probabilities for receivers under Bernoulli erasures.

A receiver missing ``W`` packets that is served a new packet every slot needs
``W + z`` slots with probability ``C(W+z-1, z) eps^z (1-eps)^W``; summing ``z``
up to ``Q - W`` gives the chance of finishing within ``Q`` slots.  Multiplying
these per-receiver chances ignores the coupling between receivers, so the
products below are upper bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import ArgumentError
from .video import Classification, LayeredGop, classify_counts, wants_counts


@dataclass(frozen=True)
class CompletionBound:
    value: float
    window: int
    remaining: int
    targeted: frozenset[int] = frozenset()

    def __float__(self):
        return self.value


def _check_eps(eps: float) -> None:
    if not 0.0 <= eps < 1.0:
        raise ArgumentError(f"erasure probability must lie in [0, 1), got {eps}")


def nb_pmf(W: int, z: int, eps: float) -> float:
    """Probability that the ``W``-th reception lands exactly ``z`` slots late."""
    if W < 1:
        raise ArgumentError(f"completion time is undefined for W={W}")
    if z < 0:
        raise ArgumentError(f"extra slots must be >= 0, got {z}")
    _check_eps(eps)
    return math.comb(W + z - 1, z) * eps**z * (1.0 - eps) ** W


def prob_complete_within(W: int, Q: int, eps: float) -> float:
    """``P[T_W <= Q]``: all ``W`` missing packets arrive within ``Q`` slots."""
    if W < 0 or Q < 0:
        raise ArgumentError(f"need W >= 0 and Q >= 0, got W={W}, Q={Q}")
    _check_eps(eps)
    if W == 0:
        return 1.0
    return math.fsum(nb_pmf(W, z, eps) for z in range(Q - W + 1))


@lru_cache(maxsize=256)
def _table(eps: tuple[float, ...], horizon: int) -> np.ndarray:
    """``table[i, W, Q] = P[T_W <= Q]`` for receiver ``i`` and ``0 <= W, Q <= horizon``."""
    e = np.asarray(eps, dtype=float)
    for x in e:
        _check_eps(float(x))
    out = np.zeros((len(e), horizon + 1, horizon + 1))
    out[:, 0, :] = 1.0
    # condition on the first slot: success leaves W-1 packets for Q-1 slots
    for W in range(1, horizon + 1):
        for Q in range(W, horizon + 1):
            out[:, W, Q] = (1.0 - e) * out[:, W - 1, Q - 1] + e * out[:, W, Q - 1]
    out.setflags(write=False)
    return out


def completion_probs(W: Sequence[int], Q: int, eps: Sequence[float]) -> np.ndarray:
    """Vectorised ``prob_complete_within`` over receivers; ``Q < 0`` gives zeros."""
    W = np.asarray(W, dtype=int)
    if Q < 0:
        return np.zeros(len(W))
    horizon = max(int(W.max(initial=0)), Q)
    # round the horizon up so one table serves a whole session
    horizon = 1 << max(horizon, 1).bit_length()
    table = _table(tuple(float(e) for e in eps), horizon)
    return table[np.arange(len(W)), W, Q]


def upper_bound_all(F, gop: LayeredGop, ell: int, Q: int, eps: Sequence[float]) -> float:
    """Product of ``P[T_{W_i} <= Q]`` over receivers still wanting packets in window ``ell``."""
    W = wants_counts(F, gop, ell)
    probs = completion_probs(W, Q, eps)
    return float(np.prod(probs[W > 0]))


def bound_from_counts(
    W: np.ndarray,
    Q: int,
    eps: Sequence[float],
    targeted: Iterable[int],
    classes: Classification | None = None,
) -> float:
    if classes is None:
        classes = classify_counts(W, Q)
    targeted = frozenset(targeted)
    if classes.affected or any(i not in targeted for i in classes.critical):
        return 0.0
    wanting = np.asarray(W) > 0
    hit = np.zeros(len(W), dtype=bool)
    hit[list(targeted)] = True
    p_now = completion_probs(W, Q, eps)
    p_next = completion_probs(W, Q - 1, eps)
    return float(np.prod(p_now[wanting & hit]) * np.prod(p_next[wanting & ~hit]))


def post_selection_bound(
    F,
    gop: LayeredGop,
    ell: int,
    Q: int,
    targeted: Iterable[int],
    eps: Sequence[float],
    classes: Classification | None = None,
) -> CompletionBound:
    """Upper bound on finishing window ``ell`` for everyone after serving ``targeted`` this slot.

    Zero when a critical receiver is left out or an affected receiver exists.
    """
    if Q < 1:
        raise ArgumentError(f"post-selection bound needs Q >= 1, got {Q}")
    W = wants_counts(F, gop, ell)
    targeted = frozenset(int(i) for i in targeted)
    value = bound_from_counts(W, Q, eps, targeted, classes)
    return CompletionBound(value, ell, Q, targeted)
