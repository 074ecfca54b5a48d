"""Layered GOP model, reception state and per-window receiver classification.

Packets are addressed by a global 0-based index ``j`` in ``[0, N)``.  Windows
are addressed by the number of layers they span, ``ell`` in ``[1, L]``, so
window ``ell`` holds packets ``[0, gop.window_size(ell))``.

The state feedback matrix (SFM) is a boolean ``M x N`` numpy array where
``True`` marks a missing packet (``f_ij = 1``) and ``False`` a received one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ArgumentError, ContractViolation, SessionComplete


@dataclass(frozen=True)
class LayeredGop:
    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        if not sizes:
            raise ArgumentError("a GOP needs at least one layer")
        if any(n < 1 for n in sizes):
            raise ArgumentError(f"layer sizes must be positive, got {sizes}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes)

    @property
    def n_packets(self) -> int:
        return sum(self.layer_sizes)

    @cached_property
    def prefix_sizes(self) -> tuple[int, ...]:
        """``N^{1:ell}`` for ``ell = 1..L``."""
        return tuple(int(x) for x in np.cumsum(self.layer_sizes))

    def window_size(self, ell: int) -> int:
        self.check_window(ell)
        return self.prefix_sizes[ell - 1]

    def layer_of(self, j: int) -> int:
        """1-based layer holding packet ``j``."""
        if not 0 <= j < self.n_packets:
            raise ArgumentError(f"packet index {j} outside [0, {self.n_packets})")
        return int(np.searchsorted(self.prefix_sizes, j, side="right")) + 1

    def check_window(self, ell: int) -> None:
        if not 1 <= ell <= self.n_layers:
            raise ArgumentError(f"window {ell} outside [1, {self.n_layers}]")


@dataclass(frozen=True)
class SessionClock:
    """Slot ``t`` (1-based) of a session with deadline ``theta``."""

    t: int
    theta: int

    def __post_init__(self):
        if self.theta < 0 or not 1 <= self.t <= self.theta + 1:
            raise ArgumentError(f"need 1 <= t <= theta + 1, got t={self.t}, theta={self.theta}")

    @property
    def remaining(self) -> int:
        """Remaining transmissions ``Q = theta - t + 1``."""
        return self.theta - self.t + 1

    def advance(self) -> "SessionClock":
        return SessionClock(self.t + 1, self.theta)


class ReceiverClass(enum.Enum):
    CRITICAL = "critical"
    AFFECTED = "affected"
    NONCRITICAL = "noncritical"
    SATISFIED = "satisfied"


class Classification(NamedTuple):
    """Receiver partition for one window; each field is a sorted tuple of receiver indices."""

    critical: tuple[int, ...]
    affected: tuple[int, ...]
    noncritical: tuple[int, ...]
    satisfied: tuple[int, ...]

    @property
    def wanting(self) -> tuple[int, ...]:
        """Receivers with a non-empty Wants set (``M_w``)."""
        return tuple(sorted(self.critical + self.affected + self.noncritical))

    def of(self, i: int) -> ReceiverClass:
        for cls, members in zip(ReceiverClass, (self.critical, self.affected, self.noncritical)):
            if i in members:
                return cls
        return ReceiverClass.SATISFIED


def new_sfm(n_receivers: int, gop: LayeredGop) -> np.ndarray:
    """SFM of a fresh GOP: every receiver misses every packet."""
    return np.ones((n_receivers, gop.n_packets), dtype=bool)


def as_sfm(F, gop: LayeredGop | None = None) -> np.ndarray:
    F = np.asarray(F)
    if F.ndim != 2:
        raise ArgumentError(f"SFM must be 2-D, got shape {F.shape}")
    if F.dtype != bool:
        if not np.isin(F, (0, 1)).all():
            raise ArgumentError("SFM entries must be 0 or 1")
        F = F.astype(bool)
    if gop is not None and F.shape[1] != gop.n_packets:
        raise ArgumentError(f"SFM has {F.shape[1]} columns but the GOP has {gop.n_packets} packets")
    return F


def _check_receiver(F: np.ndarray, i: int) -> None:
    if not 0 <= i < F.shape[0]:
        raise ArgumentError(f"receiver index {i} outside [0, {F.shape[0]})")


def wants_counts(F, gop: LayeredGop, ell: int) -> np.ndarray:
    """``W_i^{1:ell}`` for every receiver."""
    F = as_sfm(F, gop)
    return F[:, : gop.window_size(ell)].sum(axis=1)


def wants_set(F, gop: LayeredGop, i: int, ell: int) -> frozenset[int]:
    F = as_sfm(F, gop)
    _check_receiver(F, i)
    return frozenset(int(j) for j in np.flatnonzero(F[i, : gop.window_size(ell)]))


def has_set(F, gop: LayeredGop, i: int, ell: int) -> frozenset[int]:
    F = as_sfm(F, gop)
    _check_receiver(F, i)
    return frozenset(int(j) for j in np.flatnonzero(~F[i, : gop.window_size(ell)]))


def classify_counts(W: np.ndarray, Q: int) -> Classification:
    if Q < 0:
        raise ArgumentError(f"remaining transmissions must be >= 0, got {Q}")
    W = np.asarray(W)
    idx = lambda mask: tuple(int(i) for i in np.flatnonzero(mask))  # noqa: E731
    return Classification(
        critical=idx((W > 0) & (W == Q)),
        affected=idx((W > 0) & (W > Q)),
        noncritical=idx((W > 0) & (W < Q)),
        satisfied=idx(W == 0),
    )


def classify_receivers(F, gop: LayeredGop, ell: int, Q: int) -> Classification:
    return classify_counts(wants_counts(F, gop, ell), Q)


def smallest_feasible_window(F, gop: LayeredGop) -> int:
    """Fewest leading layers in which some receiver still misses a packet."""
    F = as_sfm(F, gop)
    for ell in range(1, gop.n_layers + 1):
        if F[:, : gop.window_size(ell)].any():
            return ell
    raise SessionComplete("all receivers hold every packet")


def largest_feasible_window(F, gop: LayeredGop, Q: int, smallest: int | None = None) -> int:
    """Most leading layers whose Wants sets all fit in ``Q`` transmissions.

    Never returns less than the smallest feasible window, even when that window
    already contains affected receivers.
    """
    if smallest is None:
        smallest = smallest_feasible_window(F, gop)
    F = as_sfm(F, gop)
    best = smallest
    for ell in range(smallest, gop.n_layers + 1):
        if wants_counts(F, gop, ell).max() <= Q:
            best = ell
        else:
            break  # Wants counts only grow with the window
    return best


def decoded_layers(F, gop: LayeredGop) -> np.ndarray:
    """Per receiver, the number of leading layers it holds completely."""
    F = as_sfm(F, gop)
    first_missing = np.where(F.any(axis=1), F.argmax(axis=1), gop.n_packets)
    # prefixes are nested, so counting the complete ones gives the decoded depth
    return np.searchsorted(gop.prefix_sizes, first_missing, side="right")


def apply_feedback(
    F, targeted: Iterable[tuple[int, int]], received: Sequence[bool]
) -> np.ndarray:
    """Return a copy of ``F`` with ``f_ij`` cleared for each targeted pair whose receiver got the slot."""
    F = as_sfm(F).copy()
    received = np.asarray(received, dtype=bool)
    if received.shape != (F.shape[0],):
        raise ArgumentError(f"need one reception outcome per receiver, got shape {received.shape}")
    for i, j in targeted:
        _check_receiver(F, i)
        if not 0 <= j < F.shape[1]:
            raise ArgumentError(f"packet index {j} outside [0, {F.shape[1]})")
        if not F[i, j]:
            raise ContractViolation(f"receiver {i} already holds packet {j}")
        if received[i]:
            F[i, j] = False
    return F
