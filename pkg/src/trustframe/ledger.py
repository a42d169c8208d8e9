"""Replicated trust ledger with windowed rolling averages.

Each cluster owns a replica.  Local evaluations are applied immediately and
queued; :func:`sync_replicas` rolls every replica back to its last committed
state and replays the union of all queues in a global order, so replicas are
byte-identical afterwards no matter which one saw which record first.  The
committed state of an entry is snapshotted on its first local write after a
sync, so untouched entries cost nothing.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from ._keys import node_key
from .errors import ContractError, NoEvidenceError

DEFAULT_WINDOW = 20
DEFAULT_MATURITY = 10
BOOTSTRAP = "__bootstrap__"


@dataclass(frozen=True)
class TrustRecord:
    evaluated_node: str
    evaluator: str
    round: int
    rating: float

    def __post_init__(self):
        if self.evaluator == self.evaluated_node:
            raise ContractError(f"node {self.evaluator!r} cannot evaluate itself")
        if not 0.0 <= self.rating <= 1.0:
            raise ContractError(f"rating {self.rating} outside [0, 1]")
        if self.round < 0:
            raise ContractError(f"negative round {self.round}")

    @property
    def key(self) -> tuple:
        return (self.round, node_key(self.evaluator), node_key(self.evaluated_node))


class LedgerEntry:
    __slots__ = ("node_id", "history", "rolling_average", "count")

    def __init__(self, node_id: str, window: int = DEFAULT_WINDOW):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.node_id = node_id
        self.history: deque[float] = deque(maxlen=window)
        self.rolling_average = math.nan
        self.count = 0

    def add(self, rating: float) -> None:
        self.history.append(rating)
        self.count += 1
        self.rolling_average = math.fsum(self.history) / len(self.history)

    def copy(self) -> LedgerEntry:
        other = LedgerEntry(self.node_id, self.history.maxlen)
        other.history.extend(self.history)
        other.rolling_average = self.rolling_average
        other.count = self.count
        return other

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "history": list(self.history),
            "rolling_average": self.rolling_average,
            "count": self.count,
        }

    def __eq__(self, other):
        if not isinstance(other, LedgerEntry):
            return NotImplemented
        return (self.node_id, list(self.history), self.count, self.history.maxlen) == (
            other.node_id,
            list(other.history),
            other.count,
            other.history.maxlen,
        )

    def __repr__(self) -> str:
        return f"LedgerEntry({self.node_id!r}, avg={self.rolling_average:.4f}, count={self.count})"


def rolling_average(entry: LedgerEntry) -> float:
    if not entry.history:
        raise NoEvidenceError(f"no ratings recorded for {entry.node_id!r}")
    return entry.rolling_average


class LedgerReplica:
    """One cluster's copy of the network-wide trust ledger."""

    def __init__(self, cluster_id: str, window: int = DEFAULT_WINDOW):
        self.cluster_id = cluster_id
        self.window = window
        self.entries: dict[str, LedgerEntry] = {}
        self.pending: list[TrustRecord] = []
        self._snapshots: dict[str, LedgerEntry | None] = {}
        self._applied: set[tuple] = set()

    def _entry(self, node_id: str) -> LedgerEntry:
        entry = self.entries.get(node_id)
        if entry is None:
            entry = self.entries[node_id] = LedgerEntry(node_id, self.window)
        return entry

    def record_evaluation(self, record: TrustRecord) -> LedgerEntry:
        node = record.evaluated_node
        if node not in self._snapshots:
            held = self.entries.get(node)
            self._snapshots[node] = None if held is None else held.copy()
        entry = self._entry(node)
        entry.add(record.rating)
        self.pending.append(record)
        return entry

    def preseed(self, node_id: str, ratings: Sequence[float], count: int | None = None) -> LedgerEntry:
        """Install a committed history directly, bypassing the sync queue.

        ``count`` may exceed the number of ratings to represent a node that has
        been rated for longer than the window.
        """
        entry = LedgerEntry(node_id, self.window)
        for r in ratings:
            if not 0.0 <= r <= 1.0:
                raise ContractError(f"rating {r} outside [0, 1]")
            entry.add(float(r))
        if count is not None:
            if count < len(entry.history):
                raise ContractError("count cannot be below the stored history length")
            entry.count = count
        self.entries[node_id] = entry
        if node_id in self._snapshots:
            self._snapshots[node_id] = entry.copy()
        return entry

    def get(self, node_id: str) -> LedgerEntry | None:
        return self.entries.get(node_id)

    def view(self) -> dict[str, tuple[float, int]]:
        """node id -> (rolling average, lifetime count)."""
        return {n: (e.rolling_average, e.count) for n, e in self.entries.items()}

    def state(self) -> list[dict]:
        return [self.entries[n].to_dict() for n in sorted(self.entries, key=node_key)]

    def fingerprint(self) -> tuple:
        return tuple(
            sorted((n, e.count, tuple(e.history), e.rolling_average) for n, e in self.entries.items())
        )

    def serialize(self) -> bytes:
        return json.dumps(self.state(), sort_keys=True, separators=(",", ":")).encode()

    def clone(self, cluster_id: str) -> LedgerReplica:
        """Fresh replica for a new cluster, holding this one's committed state."""
        if self.pending:
            raise ContractError("clone a replica only after syncing")
        other = LedgerReplica(cluster_id, self.window)
        other.entries = {n: e.copy() for n, e in self.entries.items()}
        other._applied = set(self._applied)
        return other


def coordinator_of(replica: LedgerReplica, members: Iterable[str], maturity: int = DEFAULT_MATURITY) -> str:
    """Mature member with the highest rolling average, lowest id on ties.

    Returns :data:`BOOTSTRAP` when no member has ``count >= maturity``.
    """
    best, best_key = BOOTSTRAP, None
    for node in members:
        entry = replica.entries.get(node)
        if entry is None or entry.count < maturity or not entry.history:
            continue
        key = (-entry.rolling_average, node_key(node))
        if best_key is None or key < best_key:
            best, best_key = node, key
    return best


def sync_replicas(replicas: Sequence[LedgerReplica]) -> Sequence[LedgerReplica]:
    """Apply every queued record everywhere, ordered by (round, evaluator, evaluated).

    A record whose key was already applied, in this or an earlier sync, is
    dropped.
    """
    merged: dict[tuple, TrustRecord] = {}
    for replica in replicas:
        for rec in replica.pending:
            key = rec.key
            held = merged.get(key)
            if held is None or rec.rating < held.rating:
                merged[key] = rec
    ordered = sorted(merged.items())
    for replica in replicas:
        applied = replica._applied
        for node, snap in replica._snapshots.items():
            if snap is None:
                replica.entries.pop(node, None)
            else:
                replica.entries[node] = snap
        for key, rec in ordered:
            if key not in applied:
                replica._entry(rec.evaluated_node).add(rec.rating)
                applied.add(key)
        replica._snapshots.clear()
        replica.pending.clear()
    return replicas


def divergence(replicas: Sequence[LedgerReplica]) -> int:
    """Number of replicas whose state differs from the first.

    Compares :meth:`LedgerReplica.fingerprint`, of which the serialized
    bytes are a pure function, so this matches a byte comparison.
    """
    if not replicas:
        return 0
    ref = replicas[0].fingerprint()
    return sum(r.fingerprint() != ref for r in replicas[1:])


def ratings_view(replica: LedgerReplica) -> Mapping[str, float]:
    return {n: e.rolling_average for n, e in replica.entries.items() if e.history}
