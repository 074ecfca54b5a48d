"""Expanding-window RLNC baseline with open-loop transmission policies.

A policy ``z = (theta_1, ..., theta_L)`` sends ``theta_k`` random combinations
of window ``k`` (the first ``k`` layers).  Over a large field the received
combinations decode the first ``j`` layers exactly when, for every ``m < j``,
the combinations drawn from windows ``m+1..j`` outnumber the packets of layers
``m+1..j``.  With ``D[m] = R[m] - N[m]`` (cumulative receptions minus
cumulative packets, ``D[0] = 0``) that is ``D[j] >= max(D[0..j-1])``.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ArgumentError, OracleUnavailable
from .video import LayeredGop

POLICY_BUDGET = 10**6
PROFILE_BUDGET = 10**6
MC_SAMPLES = 200_000

TransmissionPolicy = tuple[int, ...]


class Estimate(NamedTuple):
    value: float
    stderr: float


def n_policies(theta: int, L: int) -> int:
    return math.comb(theta + L - 1, L - 1)


def enumerate_policies(theta: int, L: int, budget: int = POLICY_BUDGET) -> list[TransmissionPolicy]:
    """All weak compositions of ``theta`` into ``L`` parts, in lexicographic order."""
    if theta < 0 or L < 1:
        raise ArgumentError(f"need theta >= 0 and L >= 1, got theta={theta}, L={L}")
    count = n_policies(theta, L)
    if count > budget:
        raise OracleUnavailable(
            f"{count} policies for theta={theta}, L={L} exceeds the budget of {budget}; "
            "reduce the deadline or the number of layers"
        )
    out = []
    # stars and bars: choose the L-1 bar positions among theta + L - 1 slots
    for bars in itertools.combinations(range(theta + L - 1), L - 1):
        edges = (-1, *bars, theta + L - 1)
        out.append(tuple(b - a - 1 for a, b in zip(edges, edges[1:])))
    return sorted(out)


def _levels(prefix: np.ndarray, profiles: np.ndarray) -> np.ndarray:
    """Decodable layer count for each row of ``profiles`` (shape ``(K, L)``)."""
    K, L = profiles.shape
    D = np.zeros((K, L + 1), dtype=np.int64)
    D[:, 1:] = np.cumsum(profiles, axis=1) - prefix[None, :]
    running = np.maximum.accumulate(D, axis=1)
    ok = D[:, 1:] >= running[:, :-1]
    layer = np.arange(1, L + 1)
    return np.where(ok, layer[None, :], 0).max(axis=1)


def decodable_layers(gop: LayeredGop, r: Sequence[int]) -> int:
    r = np.asarray(r, dtype=np.int64)
    if r.shape != (gop.n_layers,) or (r < 0).any():
        raise ArgumentError(f"reception profile must have {gop.n_layers} non-negative entries, got {r}")
    return int(_levels(np.asarray(gop.prefix_sizes), r[None, :])[0])


def _check_policy(gop: LayeredGop, z: Sequence[int]) -> np.ndarray:
    z = np.asarray(z, dtype=np.int64)
    if z.shape != (gop.n_layers,) or (z < 0).any():
        raise ArgumentError(f"policy must have {gop.n_layers} non-negative entries, got {z}")
    return z


def _profiles(z: np.ndarray) -> np.ndarray:
    grids = np.meshgrid(*[np.arange(t + 1) for t in z], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


@lru_cache(maxsize=4096)
def _success_weights(layer_sizes: tuple[int, ...], z: tuple[int, ...]) -> np.ndarray:
    """``c[ell-1, s]``: number of ways to receive ``s`` of the ``sum(z)`` packets and decode >= ``ell`` layers.

    Each way counts ``prod_k C(theta_k, r_k)``, so a receiver with success
    probability ``p`` decodes ``ell`` layers with probability
    ``sum_s c[ell-1, s] p^s (1-p)^(Theta-s)``.
    """
    z_arr = np.asarray(z, dtype=np.int64)
    prof = _profiles(z_arr)
    lv = _levels(np.cumsum(layer_sizes), prof)
    mult = np.ones(len(prof))
    for k, t in enumerate(z):
        mult *= np.array([math.comb(t, r) for r in range(t + 1)], dtype=float)[prof[:, k]]
    s = prof.sum(axis=1)
    L = len(layer_sizes)
    out = np.zeros((L, int(z_arr.sum()) + 1))
    for ell in range(1, L + 1):
        hit = lv >= ell
        out[ell - 1] = np.bincount(s[hit], weights=mult[hit], minlength=out.shape[1])
    out.setflags(write=False)
    return out


def _bernstein(eps: np.ndarray, theta: int) -> np.ndarray:
    """``B[i, s] = (1-eps_i)^s eps_i^(theta-s)``."""
    s = np.arange(theta + 1)
    p = 1.0 - eps[:, None]
    return p**s * eps[:, None] ** (theta - s)


def per_receiver_decode_prob(
    gop: LayeredGop,
    z: Sequence[int],
    eps: float,
    ell: int,
    budget: int = PROFILE_BUDGET,
    rng: np.random.Generator | None = None,
) -> float:
    """Probability one receiver decodes the first ``ell`` layers under policy ``z``.

    Exact over all reception profiles when there are at most ``budget`` of
    them; otherwise a Monte Carlo estimate (see :func:`decode_prob_estimate`).
    """
    return decode_prob_estimate(gop, z, eps, ell, budget, rng).value


def decode_prob_estimate(
    gop: LayeredGop,
    z: Sequence[int],
    eps: float,
    ell: int,
    budget: int = PROFILE_BUDGET,
    rng: np.random.Generator | None = None,
    samples: int = MC_SAMPLES,
) -> Estimate:
    gop.check_window(ell)
    z = _check_policy(gop, z)
    if not 0.0 <= eps < 1.0:
        raise ArgumentError(f"erasure probability must lie in [0, 1), got {eps}")
    if math.prod(int(t) + 1 for t in z) <= budget:
        c = _success_weights(gop.layer_sizes, tuple(int(t) for t in z))
        value = float(c[ell - 1] @ _bernstein(np.array([eps]), int(z.sum()))[0])
        return Estimate(value, 0.0)
    rng = rng if rng is not None else np.random.default_rng()
    r = rng.binomial(z[None, :], 1.0 - eps, size=(samples, len(z)))
    hits = _levels(np.asarray(gop.prefix_sizes), r) >= ell
    p = hits.mean()
    return Estimate(float(p), float(math.sqrt(p * (1 - p) / samples)))


def all_receivers_prob(gop: LayeredGop, z: Sequence[int], eps: Sequence[float], ell: int, **kw) -> float:
    return math.prod(per_receiver_decode_prob(gop, z, float(e), ell, **kw) for e in eps)


def policy_layer_probs(
    gop: LayeredGop, theta: int, eps: Sequence[float], budget: int = POLICY_BUDGET
) -> tuple[list[TransmissionPolicy], np.ndarray]:
    """All policies and ``P[z, ell-1]``, the chance every receiver decodes ``ell`` layers."""
    policies = enumerate_policies(theta, gop.n_layers, budget)
    eps = np.asarray(eps, dtype=float)
    B = _bernstein(eps, theta)  # (M, theta+1)
    probs = np.empty((len(policies), gop.n_layers))
    for k, z in enumerate(policies):
        per_rx = _success_weights(gop.layer_sizes, z) @ B.T  # (L, M)
        probs[k] = np.prod(np.clip(per_rx, 0.0, 1.0), axis=1)
    return policies, probs


def rank_key(layer_probs: np.ndarray, lam: float) -> tuple[int, float]:
    """Ranking of one policy: layers meeting ``lam`` in sequence, then the next layer's probability."""
    meets = layer_probs >= lam
    depth = len(meets) if meets.all() else int(np.argmin(meets))
    nxt = float(layer_probs[depth]) if depth < len(layer_probs) else 0.0
    return depth, nxt


def select_policy(
    gop: LayeredGop, theta: int, eps: Sequence[float], lam: float, budget: int = POLICY_BUDGET
) -> TransmissionPolicy:
    """Policy meeting ``lam`` for the most successive layers.

    Ties go to the higher probability for the first layer that misses
    ``lam``, then to the lexicographically smallest policy.
    """
    policies, probs = policy_layer_probs(gop, theta, eps, budget)
    best, best_key = None, None
    for z, p in zip(policies, probs):
        depth, nxt = rank_key(p, lam)
        if best_key is None or depth > best_key[0] or (depth == best_key[0] and nxt > best_key[1] + 1e-12):
            best, best_key = z, (depth, nxt)
    return best


def transmission_schedule(z: Sequence[int]) -> np.ndarray:
    """Window index (1-based) used in each slot: all window-1 packets first, then window 2, ..."""
    return np.repeat(np.arange(1, len(z) + 1), np.asarray(z, dtype=int))
