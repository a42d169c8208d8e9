"""Clusters of peer nodes arranged as a directed acyclic graph.

An edge ``A -> B`` means cluster A may delegate decision-making toward B;
coordinator-to-coordinator collaboration follows out-edges only.
"""

from __future__ import annotations

import graphlib
import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ._keys import node_key
from .errors import ContractError


@dataclass(frozen=True)
class Cluster:
    id: str
    members: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))
        if not self.members:
            raise ContractError(f"cluster {self.id!r} has no members")

    def sorted_members(self) -> list[str]:
        return sorted(self.members, key=node_key)


@dataclass(frozen=True)
class AcyclicityReport:
    order: tuple[str, ...] | None = None
    cycle: tuple[str, ...] | None = None

    @property
    def acyclic(self) -> bool:
        return self.cycle is None


@dataclass(frozen=True)
class SizeReport:
    tolerance: float
    sizes: Mapping[str, int]
    flagged: tuple[tuple[str, str], ...]

    @property
    def uniform(self) -> bool:
        return not self.flagged


@dataclass
class ClusterDag:
    clusters: dict[str, Cluster] = field(default_factory=dict)
    edges: set[tuple[str, str]] = field(default_factory=set)

    @classmethod
    def build(cls, clusters: Iterable[Cluster], edges: Iterable[tuple[str, str]] = ()) -> ClusterDag:
        dag = cls()
        for c in clusters:
            dag.add_cluster(c)
        for a, b in edges:
            dag.add_edge(a, b)
        return dag

    def add_cluster(self, cluster: Cluster) -> None:
        if cluster.id in self.clusters:
            raise ContractError(f"duplicate cluster id {cluster.id!r}")
        clash = cluster.members & self.members()
        if clash:
            raise ContractError(f"nodes already in another cluster: {sorted(clash, key=node_key)}")
        self.clusters[cluster.id] = cluster

    def add_edge(self, src: str, dst: str) -> None:
        """Add ``src -> dst``.  Cycles are allowed here and caught by :meth:`validate_acyclic`."""
        for c in (src, dst):
            if c not in self.clusters:
                raise ContractError(f"unknown cluster {c!r}")
        if src == dst:
            raise ContractError(f"self-loop on {src!r}")
        if (src, dst) in self.edges:
            raise ContractError(f"duplicate edge {src!r} -> {dst!r}")
        self.edges.add((src, dst))

    def members(self) -> set[str]:
        return {n for c in self.clusters.values() for n in c.members}

    def cluster_of(self, node: str) -> str:
        for c in self.clusters.values():
            if node in c.members:
                return c.id
        raise ContractError(f"node {node!r} is in no cluster")

    def validate_acyclic(self) -> AcyclicityReport:
        """Topological order (lowest ready id first) or the vertices of one cycle."""
        indegree = {c: 0 for c in self.clusters}
        succ: dict[str, list[str]] = {c: [] for c in self.clusters}
        for a, b in self.edges:
            succ[a].append(b)
            indegree[b] += 1
        ready = [(node_key(c), c) for c, d in indegree.items() if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            _, c = heapq.heappop(ready)
            order.append(c)
            for b in succ[c]:
                indegree[b] -= 1
                if indegree[b] == 0:
                    heapq.heappush(ready, (node_key(b), b))
        if len(order) == len(self.clusters):
            return AcyclicityReport(order=tuple(order))
        sorter = graphlib.TopologicalSorter()
        for a, b in sorted(self.edges):
            sorter.add(b, a)
        try:
            sorter.prepare()
        except graphlib.CycleError as exc:
            return AcyclicityReport(cycle=tuple(exc.args[1][:-1]))
        raise AssertionError("Kahn and graphlib disagree")  # pragma: no cover

    def delegation_targets(self, cluster: str) -> list[str]:
        if cluster not in self.clusters:
            raise ContractError(f"unknown cluster {cluster!r}")
        return sorted((b for a, b in self.edges if a == cluster), key=node_key)

    def attach_cluster(self, cluster: Cluster, trust: Mapping[str, float], fanout: int = 2) -> ClusterDag:
        """Add ``cluster`` with out-edges to the ``fanout`` most trusted clusters.

        A cluster's trust is the mean rolling average of its rated members
        (0 when none are rated); ties go to the lower cluster id.  The new
        vertex gets no in-edges, so acyclicity is preserved.
        """
        if fanout < 0:
            raise ValueError("fanout must be non-negative")
        ranked = sorted(
            self.clusters,
            key=lambda cid: (-self.mean_trust(cid, trust), node_key(cid)),
        )
        self.add_cluster(cluster)
        for target in ranked[:fanout]:
            self.add_edge(cluster.id, target)
        return self

    def mean_trust(self, cluster: str, trust: Mapping[str, float]) -> float:
        rated = [trust[n] for n in self.clusters[cluster].members if n in trust]
        return math.fsum(rated) / len(rated) if rated else 0.0

    def size_uniformity_report(self, tolerance: float = 2.0) -> SizeReport:
        """Flag every cluster pair whose larger/smaller size ratio exceeds ``tolerance``."""
        sizes = {cid: len(c.members) for cid, c in self.clusters.items()}
        ids = sorted(sizes, key=node_key)
        flagged = tuple(
            (a, b)
            for a, b in itertools.combinations(ids, 2)
            if max(sizes[a], sizes[b]) / min(sizes[a], sizes[b]) > tolerance
        )
        return SizeReport(tolerance, sizes, flagged)
