"""Localized real-time aggregation with rollback, plus a gossip simulator.

Collective measurements (sum, avg, max, min, count) are computed over the
contributions of currently-localized participants only. Departures roll the
participant's value back. Contributions are versioned and tombstoned, which
makes the per-participant latest-value map a state-based semilattice: merge
keeps the highest version, so gossip duplication and reordering are safe and
rollback survives replication.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

AGGREGATE_FNS = ("sum", "avg", "max", "min", "count")


class _Empty:
    """Sentinel for aggregates undefined on an empty state (avg/min/max)."""

    def __repr__(self) -> str:
        return "Empty"


EMPTY = _Empty()


class AlreadyJoinedError(Exception):
    pass


class NotJoinedError(Exception):
    pass


@dataclass(frozen=True)
class Contribution:
    participant_id: str
    task_id: str
    value: float
    version: int
    tombstone: bool = False


def merge_contribution(a: Optional[Contribution], b: Optional[Contribution]) -> Optional[Contribution]:
    """Version-max semilattice merge of two contributions for one participant."""
    if a is None:
        return b
    if b is None:
        return a
    if a.version != b.version:
        return a if a.version > b.version else b
    return a if a.tombstone or not b.tombstone else b


def _read_values(values: Iterable[float], fn: str):
    vals = list(values)
    if fn == "count":
        return len(vals)
    if fn == "sum":
        return sum(vals)
    if not vals:
        return EMPTY
    if fn == "avg":
        return sum(vals) / len(vals)
    if fn == "max":
        return max(vals)
    if fn == "min":
        return min(vals)
    raise ValueError(f"unknown aggregate function {fn!r}")


class AggregateState:
    """Centralized engine holding the latest contribution per participant."""

    def __init__(self, task_id: str = "task"):
        self.task_id = task_id
        self.contributions: dict[str, Contribution] = {}

    def _live(self, participant: str) -> Optional[Contribution]:
        c = self.contributions.get(participant)
        return c if c is not None and not c.tombstone else None

    def join(self, participant: str, value: float) -> None:
        if self._live(participant) is not None:
            raise AlreadyJoinedError(participant)
        prev = self.contributions.get(participant)
        version = prev.version + 1 if prev else 1
        self.contributions[participant] = Contribution(
            participant, self.task_id, float(value), version
        )

    def update(self, participant: str, value: float) -> None:
        live = self._live(participant)
        if live is None:
            raise NotJoinedError(participant)
        self.contributions[participant] = replace(
            live, value=float(value), version=live.version + 1
        )

    def leave(self, participant: str) -> None:
        live = self._live(participant)
        if live is None:
            raise NotJoinedError(participant)
        self.contributions[participant] = replace(
            live, tombstone=True, version=live.version + 1
        )

    def live_values(self) -> list[float]:
        return [c.value for c in self.contributions.values() if not c.tombstone]

    def read(self, fn: str):
        return _read_values(self.live_values(), fn)

    def is_live(self, participant: str) -> bool:
        return self._live(participant) is not None


def oracle_aggregate(events: list[tuple], fn: str):
    """Independent brute-force oracle: replay join/update/leave events into a
    plain multiset and compute the function directly.

    Events are ("join", p, v) / ("update", p, v) / ("leave", p).
    """
    values: Counter = Counter()
    current: dict[str, float] = {}
    for ev in events:
        kind, participant = ev[0], ev[1]
        if kind == "join":
            if participant in current:
                raise AlreadyJoinedError(participant)
            current[participant] = ev[2]
            values[ev[2]] += 1
        elif kind == "update":
            if participant not in current:
                raise NotJoinedError(participant)
            old = current[participant]
            values[old] -= 1
            if values[old] == 0:
                del values[old]
            current[participant] = ev[2]
            values[ev[2]] += 1
        elif kind == "leave":
            if participant not in current:
                raise NotJoinedError(participant)
            old = current.pop(participant)
            values[old] -= 1
            if values[old] == 0:
                del values[old]
        else:
            raise ValueError(f"unknown event kind {kind!r}")
    return _read_values(values.elements(), fn)


# --- gossip simulator ------------------------------------------------------

@dataclass
class GossipNode:
    node_id: str
    store: dict[str, Contribution] = field(default_factory=dict)
    neighbors: set[str] = field(default_factory=set)

    def ingest(self, c: Contribution) -> None:
        self.store[c.participant_id] = merge_contribution(
            self.store.get(c.participant_id), c
        )

    def merge_store(self, other: "GossipNode") -> None:
        for pid, c in other.store.items():
            self.ingest(c)

    def read(self, fn: str):
        live = [c.value for c in self.store.values() if not c.tombstone]
        return _read_values(live, fn)


@dataclass
class GossipNetwork:
    nodes: dict[str, GossipNode]

    @classmethod
    def complete(cls, n: int) -> "GossipNetwork":
        ids = [f"n{i}" for i in range(n)]
        return cls({
            i: GossipNode(i, neighbors=set(ids) - {i}) for i in ids
        })

    @classmethod
    def ring(cls, n: int) -> "GossipNetwork":
        ids = [f"n{i}" for i in range(n)]
        nodes = {}
        for k, i in enumerate(ids):
            nodes[i] = GossipNode(i, neighbors={ids[(k - 1) % n], ids[(k + 1) % n]})
        return cls(nodes)

    def converged(self, fn: str, expected) -> bool:
        for node in self.nodes.values():
            got = node.read(fn)
            if isinstance(expected, _Empty):
                if not isinstance(got, _Empty):
                    return False
            elif isinstance(got, _Empty) or abs(got - expected) > 1e-9:
                return False
        return True


def gossip_round(network: GossipNetwork, rng: random.Random) -> GossipNetwork:
    """One synchronous round: every node push-pulls its store with one
    uniformly chosen neighbor. Mutates and returns the network."""
    for node_id in sorted(network.nodes):
        node = network.nodes[node_id]
        if not node.neighbors:
            continue
        peer = network.nodes[rng.choice(sorted(node.neighbors))]
        # push-pull: exchange both ways
        peer_snapshot = dict(peer.store)
        peer.merge_store(node)
        for c in peer_snapshot.values():
            node.ingest(c)
    return network
