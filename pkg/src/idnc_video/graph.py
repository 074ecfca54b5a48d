"""IDNC conflict graph over a windowed SFM.

Vertices are ``(receiver, packet)`` pairs for missing packets, ordered
receiver-major.  Two vertices are adjacent when they request the same packet
from different receivers (C1) or when each requested packet is held by the
other vertex's receiver (C2).  Has sets are read inside the window only.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np

from .errors import OracleUnavailable
from .video import LayeredGop, as_sfm

DEFAULT_MAX_VERTICES = 30


class Vertex(NamedTuple):
    receiver: int
    packet: int


@dataclass(frozen=True)
class Clique:
    vertices: tuple[Vertex, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(sorted(Vertex(*v) for v in self.vertices)))

    @property
    def targeted(self) -> frozenset[int]:
        return frozenset(v.receiver for v in self.vertices)

    @property
    def packets(self) -> frozenset[int]:
        return frozenset(v.packet for v in self.vertices)

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __or__(self, other: "Clique") -> "Clique":
        return Clique(self.vertices + other.vertices)


class IdncGraph:
    """Vertices plus a symmetric boolean adjacency matrix."""

    def __init__(self, receivers, packets, adj):
        self.receivers = np.asarray(receivers, dtype=int)
        self.packets = np.asarray(packets, dtype=int)
        self.adj = np.asarray(adj, dtype=bool)

    @cached_property
    def _index(self) -> dict[Vertex, int]:
        return {v: k for k, v in enumerate(self.vertices)}

    @property
    def vertices(self) -> list[Vertex]:
        return [Vertex(int(i), int(j)) for i, j in zip(self.receivers, self.packets)]

    def __len__(self):
        return len(self.receivers)

    def __contains__(self, v) -> bool:
        return Vertex(*v) in self._index

    def index(self, v) -> int:
        return self._index[Vertex(*v)]

    def adjacent(self, u, v) -> bool:
        return bool(self.adj[self.index(u), self.index(v)])

    def edges(self) -> set[frozenset[Vertex]]:
        verts = self.vertices
        a, b = np.nonzero(np.triu(self.adj, 1))
        return {frozenset((verts[x], verts[y])) for x, y in zip(a, b)}

    def induced(self, keep) -> "IdncGraph":
        """Induced subgraph on a boolean mask or index array."""
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.flatnonzero(keep)
        return IdncGraph(self.receivers[keep], self.packets[keep], self.adj[np.ix_(keep, keep)])

    def restrict_receivers(self, receivers: Iterable[int]) -> "IdncGraph":
        return self.induced(np.isin(self.receivers, list(receivers)))

    def is_clique(self, vertices: Iterable) -> bool:
        idx = [self.index(v) for v in vertices]
        sub = self.adj[np.ix_(idx, idx)]
        return bool((sub | np.eye(len(idx), dtype=bool)).all())

    def common_neighbours(self, clique: Iterable) -> np.ndarray:
        """Mask of vertices adjacent to every vertex of ``clique`` (members excluded)."""
        mask = np.ones(len(self), dtype=bool)
        for v in clique:
            if v in self:
                mask &= self.adj[self.index(v)]
            else:
                mask[:] = False
        return mask


def build_graph(F, gop: LayeredGop, ell: int) -> IdncGraph:
    F = as_sfm(F, gop)
    missing = F[:, : gop.window_size(ell)]
    recv, pkt = np.nonzero(missing)  # row-major: receiver, then packet
    held = ~missing
    same_packet = (pkt[:, None] == pkt[None, :]) & (recv[:, None] != recv[None, :])
    # C2: packet of u held by receiver of v, and packet of v held by receiver of u
    u_pkt_held_by_v = held[recv[None, :], pkt[:, None]]
    c2 = u_pkt_held_by_v & u_pkt_held_by_v.T
    return IdncGraph(recv, pkt, same_packet | c2)


def enumerate_maximal_cliques(G: IdncGraph, max_vertices: int = DEFAULT_MAX_VERTICES) -> list[Clique]:
    """All maximal cliques via Bron-Kerbosch with pivoting, in sorted order."""
    if len(G) > max_vertices:
        raise OracleUnavailable(
            f"graph has {len(G)} vertices; exact clique enumeration is capped at {max_vertices}"
        )
    if len(G) == 0:
        return []
    nbrs = [int(sum(1 << int(b) for b in np.flatnonzero(row))) for row in G.adj]
    found: list[int] = []

    def expand(r: int, p: int, x: int) -> None:
        if not p and not x:
            found.append(r)
            return
        # pivot with the most neighbours in P to prune branches
        px = p | x
        pivot = max(_bits(px), key=lambda u: bin(nbrs[u] & p).count("1"))
        for v in _bits(p & ~nbrs[pivot]):
            bit = 1 << v
            expand(r | bit, p & nbrs[v], x & nbrs[v])
            p &= ~bit
            x |= bit

    expand(0, (1 << len(G)) - 1, 0)
    verts = G.vertices
    cliques = [Clique([verts[k] for k in _bits(r)]) for r in found]
    return sorted(cliques, key=lambda c: c.vertices)


def _bits(x: int) -> list[int]:
    out = []
    while x:
        low = x & -x
        out.append(low.bit_length() - 1)
        x ^= low
    return out


def adjacent_subgraph(G: IdncGraph, clique: Clique | Iterable) -> IdncGraph:
    return G.induced(G.common_neighbours(clique))


def decode_attempt(clique: Clique | Iterable[int], has: Iterable[int]) -> int | None:
    """Packet a receiver recovers from the XOR of ``clique``'s packets, if instantly decodable.

    ``clique`` may be a :class:`Clique` or a bare collection of packet indices.
    """
    packets = clique.packets if isinstance(clique, Clique) else frozenset(clique)
    unknown = packets - frozenset(has)
    if len(unknown) == 1:
        return next(iter(unknown))
    return None
