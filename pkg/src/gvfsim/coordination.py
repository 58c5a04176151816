"""Distributed synchronization over a simulated lossy broadcast bus.

Two consensus laws share the same bus:

* implicit GVF on a circle: each vehicle shifts the level set it tracks,
  inside to gain on its neighbors or outside to fall back;
* parametric GVF: each vehicle nudges the rate of its virtual coordinate
  toward ``w_j - offset_ij`` for every neighbor ``j``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .vehicle import wrap_angle


@dataclass
class CommGraph:
    """Undirected graph; ``offsets[(i, j)]`` is the desired ``value_j - value_i``.

    ``modulus`` (e.g. 2*pi for phases) makes cycle consistency modular.
    """

    ids: list[str]
    offsets: dict[tuple[str, str], float]
    modulus: float | None = None

    @classmethod
    def from_edges(
        cls, ids: Sequence[str], edges: Iterable[Sequence], modulus: float | None = None
    ) -> "CommGraph":
        offsets: dict[tuple[str, str], float] = {}
        known = set(ids)
        for edge in edges:
            if len(edge) == 2:
                i, j, d = edge[0], edge[1], 0.0
            elif len(edge) == 3:
                i, j, d = edge
            else:
                raise ConfigError(f"edge must be [i, j] or [i, j, offset], got {edge!r}")
            if i not in known or j not in known:
                raise ConfigError(f"edge {edge!r} names an unknown vehicle")
            if i == j:
                raise ConfigError(f"self-loop on {i!r}")
            for key, val in (((i, j), float(d)), ((j, i), -float(d))):
                if key in offsets and abs(offsets[key] - val) > 1e-9:
                    raise ConfigError(f"conflicting offsets for edge {key}")
                offsets[key] = val
        graph = cls(list(ids), offsets, modulus)
        graph.validate()
        return graph

    def neighbors(self, i: str) -> list[tuple[str, float]]:
        return [(j, d) for (a, j), d in sorted(self.offsets.items()) if a == i]

    def validate(self) -> None:
        if not self.ids:
            raise ConfigError("communication graph has no vehicles")
        for (i, j), d in self.offsets.items():
            if (j, i) not in self.offsets or abs(self.offsets[(j, i)] + d) > 1e-9:
                raise ConfigError(f"offsets on edge ({i}, {j}) are not antisymmetric")
        # Assign potentials along a BFS tree; every other edge must agree with them.
        potential = {self.ids[0]: 0.0}
        queue = deque([self.ids[0]])
        while queue:
            i = queue.popleft()
            for j, d in self.neighbors(i):
                if j not in potential:
                    potential[j] = potential[i] + d
                    queue.append(j)
        missing = [i for i in self.ids if i not in potential]
        if missing:
            raise ConfigError(f"communication graph is not connected; unreachable: {missing}")
        for (i, j), d in self.offsets.items():
            gap = potential[j] - potential[i] - d
            if self.modulus:
                gap = math.remainder(gap, self.modulus)
            if abs(gap) > 1e-9:
                raise ConfigError(f"offsets are inconsistent around a cycle through ({i}, {j})")


@dataclass(frozen=True)
class BusConfig:
    period: float = 0.1
    delay: float = 0.0
    drop_probability: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.period > 0:
            raise ConfigError("bus period must be positive")
        if self.delay < 0:
            raise ConfigError("bus delay must be nonnegative")
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ConfigError("drop_probability must lie in [0, 1]")


@dataclass(frozen=True)
class CoordMessage:
    sender: str
    payload: float
    sent_at: float

    def __post_init__(self):
        if not math.isfinite(self.payload):
            raise ConfigError(f"non-finite payload from {self.sender!r}")


@dataclass
class MessageBus:
    """Broadcast bus with fixed latency and independent per-receiver drops.

    Receivers keep only the freshest payload per sender.
    """

    config: BusConfig
    graph: CommGraph
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)
    _in_flight: list = field(default_factory=list, repr=False)
    latest: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._rng = np.random.default_rng(self.config.seed)
        self.latest = {i: {} for i in self.graph.ids}

    def tick(self, outbox: Iterable[CoordMessage], now: float) -> dict[str, list[CoordMessage]]:
        """Send ``outbox`` and return what arrives at ``now``, keyed by receiver."""
        for msg in sorted(outbox, key=lambda m: m.sender):
            if msg.sent_at > now + 1e-9:
                raise ConfigError(f"message from {msg.sender!r} is stamped in the future")
            for receiver, _ in self.graph.neighbors(msg.sender):
                self.sent += 1
                if self._rng.random() < self.config.drop_probability:
                    self.dropped += 1
                    continue
                self._in_flight.append((msg.sent_at + self.config.delay, receiver, msg))
        arrived: dict[str, list[CoordMessage]] = {i: [] for i in self.graph.ids}
        pending = []
        for due, receiver, msg in self._in_flight:
            if due <= now + 1e-9:
                arrived[receiver].append(msg)
            else:
                pending.append((due, receiver, msg))
        self._in_flight = pending
        for receiver, msgs in arrived.items():
            for msg in msgs:
                self.delivered += 1
                prev = self.latest[receiver].get(msg.sender)
                if prev is None or msg.sent_at >= prev.sent_at:
                    self.latest[receiver][msg.sender] = msg
        return arrived

    def latest_messages(self, i: str) -> list[tuple[CoordMessage, float]]:
        """(latest message, desired offset) for every neighbor heard from so far."""
        out = []
        for j, d in self.graph.neighbors(i):
            msg = self.latest[i].get(j)
            if msg is not None:
                out.append((msg, d))
        return out

    def known_neighbors(self, i: str) -> list[tuple[float, float]]:
        """(latest payload, desired offset) for every neighbor heard from so far."""
        out = []
        for j, d in self.graph.neighbors(i):
            msg = self.latest[i].get(j)
            if msg is not None:
                out.append((msg.payload, d))
        return out


def circle_phase(x: float, y: float, center: Sequence[float]) -> float:
    return math.atan2(y - center[1], x - center[0])


def gvf_level_set_offset(
    self_phase: float,
    neighbor_phases: Iterable[tuple[float, float]],
    kc: float,
    e_max: float,
    direction: int = 1,
) -> float:
    """Level-set shift for phase consensus on a closed curve.

    ``direction`` is the travel sense (+1 counter-clockwise). A vehicle behind
    its targets gets a negative shift (inner, shorter lap).
    """
    if not e_max > 0:
        raise ConfigError("e_max must be positive")
    total = sum(wrap_angle(th_j - self_phase - d) for th_j, d in neighbor_phases)
    return min(max(-direction * kc * total, -e_max), e_max)


def pgvf_w_correction(
    self_w: float, neighbor_ws: Iterable[tuple[float, float]], kc: float
) -> float:
    """Additive w-rate correction ``kc * sum(w_j - w_i - offset_ij)``."""
    return kc * sum(w_j - self_w - d for w_j, d in neighbor_ws)
