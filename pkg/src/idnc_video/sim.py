"""Session simulation over Bernoulli erasure channels and Monte Carlo aggregation.

Randomness: every episode gets ``SeedSequence(seed, spawn_key=(run,))``, which
is split into one stream for the receivers' erasure probabilities, one for the
GOP layer sizes, and one stream per receiver for its per-slot erasures.  All
streams drive a Philox counter-based generator, so any receiver's channel can
be replayed on its own and two schedulers given the same seed face the same
channel realisations.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import rlnc
from .errors import ConfigError
from .graph import DEFAULT_MAX_VERTICES
from .schedulers import EwIdnc, MaxClique, NowIdnc, exact_selector, select_clique_heuristic
from .video import LayeredGop, apply_feedback, as_sfm, decoded_layers, new_sfm

log = logging.getLogger(__name__)

PACKET_BITS = 1500 * 8
FRAMES_PER_GOP = 8
FRAME_RATE = 30
DEFAULT_LAYER_SIZES = (8, 3, 3, 3)
DEFAULT_LAYER_MEANS = (8.35, 3.11, 3.29, 3.43)
SCHEDULERS = ("ew-idnc", "now-idnc", "max-clique", "ew-rlnc")


def theta_from_bitrate(bitrate: float) -> int:
    """Transmissions available per GOP at ``bitrate`` bit/s (8-frame GOPs at 30 fps, 1500-byte packets)."""
    if not bitrate > 0:
        raise ConfigError(f"bitrate must be positive, got {bitrate}")
    theta = math.floor(FRAMES_PER_GOP * bitrate / (PACKET_BITS * FRAME_RATE))
    if theta < 1:
        raise ConfigError(f"bitrate {bitrate} leaves no transmission slot per GOP")
    return theta


def sample_receiver_erasures(mean: float, spread: float, M: int, rng: np.random.Generator) -> np.ndarray:
    if spread < 0 or mean - spread < 0 or mean + spread >= 1:
        raise ConfigError(f"erasure range [{mean - spread}, {mean + spread}] must lie inside [0, 1)")
    if spread == 0:
        return np.full(M, float(mean))
    return rng.uniform(mean - spread, mean + spread, size=M)


@lru_cache(maxsize=64)
def _fixed_gop(layer_sizes: tuple[int, ...]) -> LayeredGop:
    return LayeredGop(layer_sizes)


def sample_gop(means: Sequence[float], rng: np.random.Generator) -> LayeredGop:
    return LayeredGop(tuple(max(1, int(n)) for n in rng.poisson(means)))


@dataclass(frozen=True)
class SimConfig:
    scheduler: str = "ew-idnc"
    lam: float = 0.95
    receivers: int = 15
    erasure_mean: float = 0.2
    erasure_spread: float = 0.15
    theta: int | None = 25
    bitrate: float | None = None
    layer_sizes: tuple[int, ...] = DEFAULT_LAYER_SIZES
    gop_sampler: str = "fixed"
    layer_means: tuple[float, ...] = DEFAULT_LAYER_MEANS
    selector: str = "heuristic"
    max_vertices: int = DEFAULT_MAX_VERTICES
    policy_budget: int = rlnc.POLICY_BUDGET
    runs: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.scheduler not in SCHEDULERS:
            raise ConfigError(f"unknown scheduler {self.scheduler!r}; choose from {SCHEDULERS}")
        if self.selector not in ("heuristic", "exact"):
            raise ConfigError(f"selector must be 'heuristic' or 'exact', got {self.selector!r}")
        if self.gop_sampler not in ("fixed", "poisson"):
            raise ConfigError(f"gop_sampler must be 'fixed' or 'poisson', got {self.gop_sampler!r}")
        if self.receivers < 1:
            raise ConfigError("need at least one receiver")
        if self.runs < 1:
            raise ConfigError("need at least one run")
        if self.lam < 0:
            raise ConfigError(f"lambda must be non-negative, got {self.lam}")
        if self.theta is None and self.bitrate is None:
            raise ConfigError("give either theta or bitrate")
        if self.theta is not None and self.theta < 1:
            raise ConfigError(f"theta must be >= 1, got {self.theta}")
        if self.bitrate is not None:
            theta_from_bitrate(self.bitrate)
        LayeredGop(self.layer_sizes)
        # range check only; the draw happens per episode
        sample_receiver_erasures(self.erasure_mean, self.erasure_spread, 0, np.random.default_rng(0))

    @property
    def deadline(self) -> int:
        return self.theta if self.theta is not None else theta_from_bitrate(self.bitrate)


class EwRlnc:
    """Open-loop baseline: picks a policy once per GOP and never reads feedback."""

    name = "ew-rlnc"
    open_loop = True

    def __init__(self, lam: float, budget: int = rlnc.POLICY_BUDGET):
        self.lam = lam
        self.budget = budget

    def policy(self, gop: LayeredGop, theta: int, eps) -> rlnc.TransmissionPolicy:
        return rlnc.select_policy(gop, theta, eps, self.lam, self.budget)


class FixedPolicy:
    """Open-loop RLNC with a caller-chosen policy, for checking the evaluator against simulation."""

    name = "rlnc-fixed"
    open_loop = True

    def __init__(self, z: Sequence[int]):
        self.z = tuple(int(t) for t in z)

    def policy(self, gop: LayeredGop, theta: int, eps) -> rlnc.TransmissionPolicy:
        if sum(self.z) != theta or len(self.z) != gop.n_layers:
            raise ConfigError(f"policy {self.z} does not fit theta={theta} with {gop.n_layers} layers")
        return self.z


class Transmission(NamedTuple):
    packets: frozenset[int]


class Scripted:
    """Send fixed packet combinations for the first slots, then defer to ``then``."""

    def __init__(self, script: Sequence[Sequence[int]], then: Callable):
        self.script = [frozenset(p) for p in script]
        self.then = then
        self.name = f"scripted+{getattr(then, 'name', 'custom')}"

    def __call__(self, F, gop, Q, eps, slot: int | None = None):
        if slot is not None and slot <= len(self.script):
            return Transmission(self.script[slot - 1])
        return self.then(F, gop, Q, eps)


class Memoized:
    """Cache a deterministic scheduler's decisions by state; pays off when few SFM states recur."""

    def __init__(self, scheduler: Callable):
        self.scheduler = scheduler
        self.name = getattr(scheduler, "name", "custom")
        self._cache: dict = {}

    def __call__(self, F, gop, Q, eps):
        F = np.asarray(F, dtype=bool)
        key = (F.shape, F.tobytes(), gop, Q, tuple(np.asarray(eps, dtype=float).tolist()))
        if key not in self._cache:
            self._cache[key] = self.scheduler(F, gop, Q, eps)
        return self._cache[key]


def make_scheduler(config: SimConfig):
    selector = select_clique_heuristic if config.selector == "heuristic" else exact_selector(config.max_vertices)
    if config.scheduler == "ew-idnc":
        return EwIdnc(config.lam, selector)
    if config.scheduler == "now-idnc":
        return NowIdnc(selector)
    if config.scheduler == "max-clique":
        return MaxClique(config.max_vertices)
    return EwRlnc(config.lam, config.policy_budget)


@dataclass
class RunMetrics:
    layers: np.ndarray
    n_layers: int
    transmissions: int = 0
    erasures: np.ndarray | None = None
    policy: tuple[int, ...] | None = None

    @property
    def min_pct(self) -> float:
        return 100.0 * self.layers.min() / self.n_layers

    @property
    def mean_pct(self) -> float:
        return 100.0 * self.layers.mean() / self.n_layers

    @property
    def histogram(self) -> np.ndarray:
        return np.bincount(self.layers, minlength=self.n_layers + 1)


def _philox(ss: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(ss))


class EpisodeStreams:
    """Independent generators for one episode.

    Children are built as ``SeedSequence(entropy, spawn_key=parent_key + (k, ...))``,
    exactly what ``spawn`` would return, without materialising the parents.
    Child 0 draws the erasure vector, child 1 the GOP, child ``(2, i)`` receiver ``i``'s slots.
    """

    def __init__(self, ss: np.random.SeedSequence, n_receivers: int):
        self._entropy, self._key = ss.entropy, tuple(ss.spawn_key)
        self.receivers = [_philox(self._child(2, i)) for i in range(n_receivers)]

    def _child(self, *key: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(self._entropy, spawn_key=self._key + key)

    @cached_property
    def erasure(self) -> np.random.Generator:
        return _philox(self._child(0))

    @cached_property
    def gop(self) -> np.random.Generator:
        return _philox(self._child(1))


def episode_streams(seed: int | np.random.SeedSequence, run: int, n_receivers: int) -> EpisodeStreams:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed, spawn_key=(run,))
    return EpisodeStreams(ss, n_receivers)


def run_episode(
    config: SimConfig,
    scheduler,
    seed: int | np.random.SeedSequence | None = None,
    run: int = 0,
    *,
    gop: LayeredGop | None = None,
    erasures: Sequence[float] | None = None,
    initial_sfm=None,
) -> RunMetrics:
    """One GOP session: choose, transmit, apply erasures and feedback, until the deadline or completion.

    ``gop``, ``erasures`` and ``initial_sfm`` override what the config would
    otherwise draw or assume (fresh receivers holding nothing).
    """
    streams = episode_streams(config.seed if seed is None else seed, run, config.receivers)
    M = config.receivers
    if erasures is None:
        erasures = sample_receiver_erasures(config.erasure_mean, config.erasure_spread, M, streams.erasure)
    eps = np.asarray(erasures, dtype=float)
    if gop is None:
        gop = _fixed_gop(config.layer_sizes) if config.gop_sampler == "fixed" else sample_gop(config.layer_means, streams.gop)
    theta = config.deadline
    F = new_sfm(M, gop) if initial_sfm is None else as_sfm(initial_sfm, gop).copy()
    if F.shape[0] != M:
        raise ConfigError(f"initial SFM has {F.shape[0]} rows for {M} receivers")
    # uniform draw per slot per receiver; a slot is received when the draw is >= eps_i
    draws = np.empty((theta, M))
    for i, g in enumerate(streams.receivers):
        draws[:, i] = g.random(theta)
    received = draws >= eps[None, :]

    if getattr(scheduler, "open_loop", False):
        z = scheduler.policy(gop, theta, eps)
        window = rlnc.transmission_schedule(z)
        counts = np.stack([np.bincount(window[received[: len(window), i]] - 1, minlength=gop.n_layers) for i in range(M)])
        layers = np.array([rlnc.decodable_layers(gop, r) for r in counts])
        return RunMetrics(layers, gop.n_layers, len(window), eps, tuple(z))

    sent = 0
    for t in range(1, theta + 1):
        if not F.any():
            break
        Q = theta - t + 1
        decision = scheduler(F, gop, Q, eps, slot=t) if isinstance(scheduler, Scripted) else scheduler(F, gop, Q, eps)
        packets = sorted(decision.packets)
        sent += 1
        if not packets:
            continue
        unknown = F[:, packets]
        decodable = np.flatnonzero(unknown.sum(axis=1) == 1)
        pairs = [(int(i), packets[int(np.argmax(unknown[i]))]) for i in decodable]
        F = apply_feedback(F, pairs, received[t - 1])
    return RunMetrics(decoded_layers(F, gop), gop.n_layers, sent, eps)


@dataclass
class MonteCarloReport:
    config: SimConfig
    min_pct: np.ndarray
    mean_pct: np.ndarray
    histogram: np.ndarray  # pooled receiver counts per decoded-layer total
    transmissions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def runs(self) -> int:
        return len(self.min_pct)

    @staticmethod
    def _se(x: np.ndarray) -> float:
        return float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0

    @property
    def min_pct_mean(self) -> float:
        return float(self.min_pct.mean())

    @property
    def min_pct_se(self) -> float:
        return self._se(self.min_pct)

    @property
    def mean_pct_mean(self) -> float:
        return float(self.mean_pct.mean())

    @property
    def mean_pct_se(self) -> float:
        return self._se(self.mean_pct)

    @property
    def histogram_pct(self) -> np.ndarray:
        return 100.0 * self.histogram / self.histogram.sum()

    def row(self) -> dict:
        c = self.config
        out = {
            "scheduler": c.scheduler,
            "lambda": c.lam if c.scheduler in ("ew-idnc", "ew-rlnc") else "",
            "theta": c.deadline,
            "receivers": c.receivers,
            "erasure_mean": c.erasure_mean,
            "runs": self.runs,
            "min_pct_mean": self.min_pct_mean,
            "min_pct_se": self.min_pct_se,
            "mean_pct_mean": self.mean_pct_mean,
            "mean_pct_se": self.mean_pct_se,
        }
        out.update({f"hist_{k}": float(v) for k, v in enumerate(self.histogram_pct)})
        return out


def _run_chunk(config: SimConfig, runs: range) -> list[RunMetrics]:
    scheduler = make_scheduler(config)
    return [run_episode(config, scheduler, config.seed, k) for k in runs]


def monte_carlo(config: SimConfig, workers: int = 1) -> MonteCarloReport:
    """Run ``config.runs`` independent episodes; the report depends only on ``config``."""
    if workers <= 1:
        metrics = _run_chunk(config, range(config.runs))
    else:
        chunks = [range(k, config.runs, workers) for k in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_chunk, [config] * workers, chunks))
        metrics = [None] * config.runs
        for chunk, part in zip(chunks, parts):
            for k, m in zip(chunk, part):
                metrics[k] = m
    L = max(m.n_layers for m in metrics)
    hist = np.zeros(L + 1, dtype=int)
    for m in metrics:
        hist[: m.n_layers + 1] += m.histogram
    log.debug("finished %d runs of %s", config.runs, config.scheduler)
    return MonteCarloReport(
        config,
        np.array([m.min_pct for m in metrics]),
        np.array([m.mean_pct for m in metrics]),
        hist,
        np.array([m.transmissions for m in metrics]),
    )


def sweep(base: SimConfig, **grid: Sequence) -> list[MonteCarloReport]:
    """Monte Carlo report for each combination of the given field values (e.g. ``lam=[...]``)."""
    keys = list(grid)
    reports = []
    for values in itertools.product(*(grid[k] for k in keys)):
        reports.append(monte_carlo(replace(base, **dict(zip(keys, values)))))
    return reports


def exact_session_probabilities(
    F, gop: LayeredGop, theta: int, eps: Sequence[float], scheduler
) -> np.ndarray:
    """``P[every receiver decodes the first ell layers by the deadline]`` for ``ell = 1..L``.

    Exhaustive over all ``2^(M*theta)`` reception patterns with the scheduler
    replayed in each branch, so only tiny sessions are tractable.
    """
    F = as_sfm(F, gop)
    eps = np.asarray(eps, dtype=float)
    M = F.shape[0]
    outcomes = list(itertools.product((False, True), repeat=M))
    weights = [math.prod(1 - eps[i] if r else eps[i] for i, r in enumerate(o)) for o in outcomes]

    def visit(F: np.ndarray, t: int) -> np.ndarray:
        layers = decoded_layers(F, gop)
        if t > theta or not F.any():
            return np.array([float((layers >= ell).all()) for ell in range(1, gop.n_layers + 1)])
        Q = theta - t + 1
        decision = scheduler(F, gop, Q, eps, slot=t) if isinstance(scheduler, Scripted) else scheduler(F, gop, Q, eps)
        packets = sorted(decision.packets)
        unknown = F[:, packets]
        pairs = [(int(i), packets[int(np.argmax(unknown[i]))]) for i in np.flatnonzero(unknown.sum(axis=1) == 1)]
        total = np.zeros(gop.n_layers)
        for o, w in zip(outcomes, weights):
            if w > 0:
                total += w * visit(apply_feedback(F, pairs, o), t + 1)
        return total

    return visit(F, 1)
