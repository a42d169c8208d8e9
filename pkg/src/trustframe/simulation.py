"""Round-based simulation of clustered nodes rating one another.

Each round, per cluster: random member pairs exchange evidence and rate each
other, the ratings are written to the cluster's ledger replica, replicas are
synced, coordinators are re-elected, and scheduled attaches, faults and tasks
are processed.  Everything is a pure function of the scenario and its seed;
random streams are keyed by (purpose, entity, round) so adding a node never
perturbs the draws of another.

Evidence model: a node of reliability ``r`` produces aleatoric samples with
mean ``observation_mean`` and standard deviation ``observation_mean * cap *
(1 - r)``, so its expected certainty is close to ``r``.  Its epistemic label
is the facet's first (least uncertain) term with probability ``r`` and
otherwise uniform over the remaining terms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy import stats

from ._keys import derive_rng, node_key, stable_int
from .errors import ContractError, RoutingError
from .kernel import KernelConfig, WeightSet, default_weights, evaluate_node, weighted_trust
from .ledger import (
    BOOTSTRAP,
    LedgerReplica,
    TrustRecord,
    coordinator_of,
    divergence,
    ratings_view,
    sync_replicas,
)
from .montecarlo import certainties, point_estimates
from .scenario import (
    COORDINATOR_TARGET,
    AttachEvent,
    FaultEvent,
    NodeProfile,
    ScenarioConfig,
    ScenarioInvalid,
    TaskSpec,
    to_dict,
    validate_config,
)
from .topology import Cluster, ClusterDag
from .uncertainty import FacetKind, Observation, QualLabel, QuantSamples, UncertaintyFacet, UncertaintySet

ASSIGNED, REFUSED, ROUTING_ERROR = "assigned", "refused", "routing_error"


@dataclass
class NetNode:
    """A simulated node.  ``baseline`` is its configured profile, ``profile``
    the current one (faults change it); ``capable`` is reserved for fault
    modes that take a node out of decision-making and is always true today."""

    id: str
    cluster: str
    baseline: NodeProfile
    profile: NodeProfile = None
    capable: bool = True

    def __post_init__(self):
        if self.profile is None:
            self.profile = self.baseline


@dataclass
class Environment:
    """Shared, read-only machinery for evaluating evidence."""

    facets: tuple[UncertaintyFacet, ...]
    kernel: KernelConfig
    weights: tuple[float, ...]
    samples: int = 16
    mean: float = 10.0
    seed: int = 0

    @classmethod
    def from_config(cls, config: ScenarioConfig, seed: int | None = None) -> Environment:
        seed = config.simulation.seed if seed is None else seed
        facets = tuple(config.observed_facets())
        kernel = KernelConfig(
            taxonomy=config.taxonomy,
            rulebase=config.rulebase,
            montecarlo=config.montecarlo.build(stable_int(seed, "montecarlo") >> 1),
            weight_overrides=dict(config.weights),
            resolution=config.resolution,
        )
        weights = default_weights(facets, config.taxonomy, config.weights).values
        sim = config.simulation
        return cls(facets, kernel, weights, sim.samples_per_observation, sim.observation_mean, seed)

    def __post_init__(self):
        self.aleatoric = [i for i, f in enumerate(self.facets) if f.kind is FacetKind.ALEATORIC]
        self.epistemic = [i for i, f in enumerate(self.facets) if f.kind is FacetKind.EPISTEMIC]
        self._levels: dict[NodeProfile, tuple] = {}

    def levels(self, profile: NodeProfile) -> tuple[np.ndarray, list[tuple[float, tuple[str, ...]]]]:
        """Per-profile constants: sample spreads and (reliability, terms) per label facet."""
        got = self._levels.get(profile)
        if got is None:
            cap = self.kernel.montecarlo.dispersion_cap
            sd = np.array([self.mean * cap * (1.0 - profile.for_facet(self.facets[i].name)) for i in self.aleatoric])
            labels = [(profile.for_facet(self.facets[i].name), self.facets[i].terms) for i in self.epistemic]
            got = self._levels[profile] = (sd[:, None], labels)
        return got


# -- evidence -----------------------------------------------------------------


class RawEvidence(NamedTuple):
    samples: np.ndarray  # (aleatoric facets, samples per observation)
    terms: tuple[str, ...]  # one label per epistemic facet


def _draw_many(profile: NodeProfile, env: Environment, rng: np.random.Generator, k: int) -> list[RawEvidence]:
    """``k`` independent evidence draws: all samples first, then all label picks."""
    sd, labels = env.levels(profile)
    samples = env.mean + sd * rng.standard_normal((k, len(sd), env.samples))
    u = rng.random((k, len(labels), 2)).tolist()
    out = []
    for i in range(k):
        terms = []
        for (r, options), (pick, which) in zip(labels, u[i]):
            if pick < r or len(options) == 1:
                terms.append(options[0])
            else:
                terms.append(options[1 + int(which * (len(options) - 1))])
        out.append(RawEvidence(samples[i], tuple(terms)))
    return out


def _as_uncertainty_set(raw: RawEvidence, env: Environment) -> UncertaintySet:
    obs: list[Observation | None] = [None] * len(env.facets)
    for i, row in zip(env.aleatoric, raw.samples):
        obs[i] = Observation(env.facets[i], QuantSamples(tuple(row)))
    for i, term in zip(env.epistemic, raw.terms):
        obs[i] = Observation(env.facets[i], QualLabel(term))
    return UncertaintySet(tuple(obs))


def observation_rng(env: Environment, node: str, round: int) -> np.random.Generator:
    return derive_rng(env.seed, "observe", node, round)


def gather_evidence(node: NetNode, env: Environment, rng: np.random.Generator) -> UncertaintySet:
    """One observation per configured facet, generated from the node's current profile."""
    return _as_uncertainty_set(_draw_many(node.profile, env, rng, 1)[0], env)


def communication_round(
    a: NetNode,
    b: NetNode,
    env: Environment,
    round: int,
    rng_a: np.random.Generator | None = None,
    rng_b: np.random.Generator | None = None,
) -> tuple[TrustRecord, TrustRecord]:
    """Mutual evaluation: returns (record about ``a`` by ``b``, record about ``b`` by ``a``)."""
    if a.cluster != b.cluster:
        raise ContractError(f"{a.id!r} and {b.id!r} are in different clusters")
    if a.id == b.id:
        raise ContractError("a node cannot communicate with itself")
    rng_a = rng_a if rng_a is not None else observation_rng(env, a.id, round)
    rng_b = rng_b if rng_b is not None else observation_rng(env, b.id, round)
    about_a = gather_evidence(a, env, rng_a)
    about_b = gather_evidence(b, env, rng_b)
    weights = WeightSet(env.weights) if env.facets else None
    t_a = evaluate_node(about_a, weights, env.kernel, evaluated=a.id, evaluator=b.id, round=round)
    t_b = evaluate_node(about_b, weights, env.kernel, evaluated=b.id, evaluator=a.id, round=round)
    return TrustRecord(a.id, b.id, round, t_a.value), TrustRecord(b.id, a.id, round, t_b.value)


def rate_batch(raws: Sequence[RawEvidence], env: Environment) -> list[float]:
    """Trust ratings for many evidence draws at once.

    Same arithmetic as :func:`~trustframe.kernel.evaluate_node`, with all
    bootstrap work for the batch done in one pass.
    """
    if not raws:
        return []
    n_al = len(env.aleatoric)
    q = np.empty((len(raws), len(env.facets)))
    if n_al:
        block = np.concatenate([r.samples for r in raws]).T  # (samples, evaluations * facets)
        q[:, env.aleatoric] = certainties(point_estimates(block, env.kernel.montecarlo), env.kernel.montecarlo).reshape(
            len(raws), n_al
        )
    if env.epistemic:
        q[:, env.epistemic] = [[env.kernel.label_score(t) for t in r.terms] for r in raws]
    w = env.weights
    return [weighted_trust(row, w) for row in q.tolist()]


# -- coordination and tasks ------------------------------------------------------


@dataclass(frozen=True)
class Designation:
    coordinator: str
    bootstrap: bool


def bootstrap_coordinator(cluster: Cluster, replica: LedgerReplica, maturity: int) -> Designation:
    """Elected coordinator, or the smallest member id while nobody is mature."""
    elected = coordinator_of(replica, cluster.members, maturity)
    if elected == BOOTSTRAP:
        return Designation(cluster.sorted_members()[0], True)
    return Designation(elected, False)


@dataclass(frozen=True)
class TaskRecord:
    round: int
    task_id: str
    cluster_id: str
    status: str
    workers: tuple[str, ...] = ()
    coordinator: str = ""
    partner: str = ""
    bootstrap: bool = False
    detail: str = ""


def assign_task(
    task: TaskSpec,
    replica: LedgerReplica,
    dag: ClusterDag,
    threshold: float,
    maturity: int,
    *,
    bootstrap_ok: bool = True,
) -> TaskRecord:
    """Top-``k`` trusted, mature members of the issuing cluster, or a refusal.

    While a cluster has no mature member its bootstrap coordinator may take a
    single-worker task; such records carry ``bootstrap=True``.
    """
    if task.cluster not in dag.clusters:
        raise ContractError(f"unknown cluster {task.cluster!r}")
    cluster = dag.clusters[task.cluster]
    own = bootstrap_coordinator(cluster, replica, maturity)
    base = dict(round=task.round, task_id=task.id, cluster_id=task.cluster, coordinator=own.coordinator)
    partner = ""
    if task.partner is not None:
        try:
            if task.partner not in dag.delegation_targets(task.cluster):
                raise RoutingError(f"{task.partner!r} is not a delegation target of {task.cluster!r}")
        except ContractError as exc:
            return TaskRecord(status=ROUTING_ERROR, detail=str(exc), **base)
        partner = bootstrap_coordinator(dag.clusters[task.partner], replica, maturity).coordinator
    eligible = []
    for node in cluster.members:
        entry = replica.get(node)
        if entry is not None and entry.count >= maturity and entry.rolling_average >= threshold:
            eligible.append((-entry.rolling_average, node_key(node), node))
    eligible.sort()
    if len(eligible) >= task.workers:
        workers = tuple(n for _, _, n in eligible[: task.workers])
        return TaskRecord(status=ASSIGNED, workers=workers, partner=partner, **base)
    if own.bootstrap and bootstrap_ok and task.workers == 1:
        return TaskRecord(
            status=ASSIGNED, workers=(own.coordinator,), partner=partner, bootstrap=True,
            detail="no mature member; bootstrap coordinator", **base,
        )
    detail = f"{len(eligible)} eligible of {task.workers} required"
    return TaskRecord(status=REFUSED, partner=partner, detail=detail, **base)


def resolve_target(target: str, coordinators: Mapping[str, Designation]) -> str:
    if target.startswith(COORDINATOR_TARGET):
        return coordinators[target[len(COORDINATOR_TARGET):]].coordinator
    return target


def inject_fault(event: FaultEvent, nodes: Mapping[str, NetNode], coordinators: Mapping[str, Designation] = {}) -> NetNode:
    target = resolve_target(event.target, coordinators)
    if target not in nodes:
        raise ContractError(f"fault target {target!r} is not a node")
    node = nodes[target]
    if event.effect == "degrade":
        node.profile = node.profile.shifted(event.delta)
    elif event.effect == "restore":
        node.profile = node.baseline
    else:
        raise ContractError(f"unknown fault effect {event.effect!r}")
    return node


# -- report ---------------------------------------------------------------------


class TrustRow(NamedTuple):
    round: int
    node_id: str
    cluster_id: str
    rolling_average: float
    count: int
    is_coordinator: bool


@dataclass
class SimulationReport:
    seed: int
    config: ScenarioConfig
    trust_rows: list[TrustRow] = field(default_factory=list)
    timelines: dict[str, list[dict]] = field(default_factory=dict)
    task_log: list[TaskRecord] = field(default_factory=list)
    divergence: list[int] = field(default_factory=list)
    faults: list[dict] = field(default_factory=list)
    members: dict[str, list[str]] = field(default_factory=dict)
    final: dict[str, tuple[float, int]] = field(default_factory=dict)
    latent: dict[str, float] = field(default_factory=dict)
    spearman: float | None = None

    def coordinator_at(self, cluster: str, round: int) -> str | None:
        current = None
        for change in self.timelines.get(cluster, []):
            if change["round"] > round:
                break
            current = change["coordinator"]
        return current

    def summary(self) -> dict:
        counts = {s: 0 for s in (ASSIGNED, REFUSED, ROUTING_ERROR)}
        for t in self.task_log:
            counts[t.status] += 1
        return {
            "seed": self.seed,
            "rounds": self.config.simulation.rounds,
            "final_rolling_average": {n: avg for n, (avg, _) in self.final.items()},
            "final_count": {n: c for n, (_, c) in self.final.items()},
            "latent_reliability": dict(self.latent),
            "spearman": self.spearman,
            "coordinators": {c: tl[-1]["coordinator"] for c, tl in self.timelines.items() if tl},
            "coordinator_timelines": self.timelines,
            "faults": self.faults,
            "max_divergence": max(self.divergence, default=0),
            "tasks": counts,
            "config": to_dict(self.config),
        }


def spearman(latent: Mapping[str, float], trust: Mapping[str, float]) -> float | None:
    nodes = sorted(set(latent) & set(trust), key=node_key)
    if len(nodes) < 2:
        return None
    a = [latent[n] for n in nodes]
    b = [trust[n] for n in nodes]
    if len(set(a)) < 2 or len(set(b)) < 2:
        return None
    return float(stats.spearmanr(a, b).statistic)


# -- driver -----------------------------------------------------------------------


class Simulation:
    """Mutable run state; :meth:`step` advances one round."""

    def __init__(self, config: ScenarioConfig, seed: int | None = None):
        problems = validate_config(config)
        if problems:
            raise ScenarioInvalid(problems)
        self.config = config
        self.seed = config.simulation.seed if seed is None else seed
        self.env = Environment.from_config(config, self.seed)
        sim = config.simulation
        self.dag = config.build_dag()
        self.nodes = {
            n: NetNode(n, c.id, config.profiles[n]) for c in config.clusters for n in c.members
        }
        self.replicas: dict[str, LedgerReplica] = {}
        for cid in sorted(self.dag.clusters, key=node_key):
            replica = LedgerReplica(cid, sim.window)
            for p in sim.preseed:
                replica.preseed(p.node, p.ratings, p.count)
            self.replicas[cid] = replica
        self.round = 0
        self.coordinators: dict[str, Designation] = {}
        self.report = SimulationReport(self.seed, config.with_overrides(seed=self.seed))
        self._by_round: dict[int, list] = {}
        for ev in (*config.attaches, *config.faults, *config.tasks):
            self._by_round.setdefault(ev.round, []).append(ev)

    def _pairs(self, cluster: Cluster) -> list[tuple[str, str]]:
        want = self.config.simulation.interactions_per_round
        members = cluster.sorted_members()
        if want <= 0 or len(members) < 2:
            return []
        pairs = list(itertools.combinations(members, 2))
        rng = derive_rng(self.seed, "pairs", cluster.id, self.round)
        chosen = rng.choice(len(pairs), size=min(want, len(pairs)), replace=False)
        return [pairs[i] for i in sorted(chosen)]

    def _communicate(self) -> None:
        pairs = []
        for cid in sorted(self.dag.clusters, key=node_key):
            pairs += [(cid, a, b) for a, b in self._pairs(self.dag.clusters[cid])]
        need: dict[str, int] = {}
        for _, a, b in pairs:
            need[a] = need.get(a, 0) + 1
            need[b] = need.get(b, 0) + 1
        # Each node's evidence for the round comes from its own stream, in pair order.
        drawn = {
            n: iter(_draw_many(self.nodes[n].profile, self.env, observation_rng(self.env, n, self.round), k))
            for n, k in need.items()
        }
        jobs, raws = [], []
        for cid, a, b in pairs:
            raws += [next(drawn[a]), next(drawn[b])]
            jobs += [(cid, a, b), (cid, b, a)]
        for (cid, evaluated, evaluator), t in zip(jobs, rate_batch(raws, self.env)):
            self.replicas[cid].record_evaluation(TrustRecord(evaluated, evaluator, self.round, t))

    def _elect(self) -> None:
        any_replica = next(iter(self.replicas.values()))
        for cid in sorted(self.dag.clusters, key=node_key):
            d = bootstrap_coordinator(self.dag.clusters[cid], any_replica, self.config.simulation.maturity)
            if self.coordinators.get(cid) != d:
                self.report.timelines.setdefault(cid, []).append(
                    {"round": self.round, "coordinator": d.coordinator, "bootstrap": d.bootstrap}
                )
            self.coordinators[cid] = d

    def _attach(self, ev) -> None:
        any_replica = next(iter(self.replicas.values()))
        cluster = Cluster(ev.cluster, frozenset(ev.members))
        fanout = self.config.attach_fanout if ev.fanout is None else ev.fanout
        self.dag.attach_cluster(cluster, ratings_view(any_replica), fanout)
        self.replicas[ev.cluster] = any_replica.clone(ev.cluster)
        for n in ev.members:
            self.nodes[n] = NetNode(n, ev.cluster, self.config.profiles[n])

    def step(self) -> None:
        self.round += 1
        sim = self.config.simulation
        events = self._by_round.get(self.round, [])
        self._communicate()
        sync_replicas(list(self.replicas.values()))
        self.report.divergence.append(divergence(list(self.replicas.values())))
        for ev in events:
            if isinstance(ev, AttachEvent):
                self._attach(ev)
        self._elect()
        ledger = next(iter(self.replicas.values()))
        for ev in events:
            if isinstance(ev, FaultEvent):
                node = inject_fault(ev, self.nodes, self.coordinators)
                self.report.faults.append(
                    {"round": self.round, "target": ev.target, "node": node.id, "effect": ev.effect,
                     "reliability": node.profile.reliability}
                )
            elif isinstance(ev, TaskSpec):
                self.report.task_log.append(
                    assign_task(ev, ledger, self.dag, sim.threshold, sim.maturity,
                                bootstrap_ok=sim.bootstrap_accepts_tasks)
                )
        coordinators = {d.coordinator for d in self.coordinators.values()}
        rows = self.report.trust_rows
        for n in sorted(ledger.entries, key=node_key):
            e = ledger.entries[n]
            if n in self.nodes and e.history:
                rows.append(TrustRow(self.round, n, self.nodes[n].cluster, e.rolling_average, e.count, n in coordinators))

    def run(self) -> SimulationReport:
        while self.round < self.config.simulation.rounds:
            self.step()
        return self.finish()

    def finish(self) -> SimulationReport:
        report = self.report
        ledger = next(iter(self.replicas.values()))
        report.members = {cid: c.sorted_members() for cid, c in sorted(self.dag.clusters.items(), key=lambda kv: node_key(kv[0]))}
        report.final = {
            n: (ledger.entries[n].rolling_average, ledger.entries[n].count)
            for n in sorted(ledger.entries, key=node_key)
            if n in self.nodes and ledger.entries[n].history
        }
        names = [f.name for f in self.env.facets]
        report.latent = {
            n: math.fsum(self.nodes[n].profile.for_facet(f) for f in names) / len(names) if names else self.nodes[n].profile.reliability
            for n in sorted(self.nodes, key=node_key)
        }
        report.spearman = spearman(report.latent, {n: avg for n, (avg, _) in report.final.items()})
        return report


def run(config: ScenarioConfig, seed: int | None = None) -> SimulationReport:
    """Validate ``config`` and run it to completion.

    Raises :class:`~trustframe.scenario.ScenarioInvalid` before doing any
    work if the config has violations.
    """
    return Simulation(config, seed).run()


# -- audits -----------------------------------------------------------------------


def audit(report: SimulationReport) -> list[str]:
    """Post-hoc checks that need nothing but the report's own tables."""
    cfg = report.config.simulation
    problems = []
    by_round: dict[int, dict[str, TrustRow]] = {}
    for row in report.trust_rows:
        by_round.setdefault(row.round, {})[row.node_id] = row
    for t in report.task_log:
        if t.status != ASSIGNED or t.bootstrap:
            continue
        rows = by_round.get(t.round, {})
        for w in t.workers:
            r = rows.get(w)
            if r is None or r.count < cfg.maturity or r.rolling_average < cfg.threshold:
                problems.append(f"task {t.task_id}: worker {w} fails the trust gate")
    for i, d in enumerate(report.divergence, start=1):
        if d:
            problems.append(f"round {i}: {d} replicas diverge after sync")
    for rnd in range(1, len(report.divergence) + 1):
        rows = by_round.get(rnd, {})
        for cid, members in report.members.items():
            logged = report.coordinator_at(cid, rnd)
            if logged is None:
                continue  # cluster not attached yet
            mature = [(-rows[n].rolling_average, node_key(n), n) for n in members
                      if n in rows and rows[n].count >= cfg.maturity]
            expect = min(mature)[2] if mature else members[0]
            if logged != expect:
                problems.append(f"round {rnd}: {cid} logged {logged}, ledger says {expect}")
    return problems
