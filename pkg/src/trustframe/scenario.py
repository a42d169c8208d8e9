"""Scenario documents: parsing, serialization and validation.

A scenario is one YAML document with the top-level sections ``taxonomy``,
``fuzzy``, ``montecarlo``, ``weights``, ``topology``, ``profiles``,
``schedule`` and ``simulation``.  Every section is optional; missing ones
take the library defaults.  See README.md for the key-by-key schema.

Two failure classes are kept apart because the CLI maps them to different
exit codes: :class:`ScenarioFormatError` for documents that cannot be read
as a scenario at all, :class:`ScenarioInvalid` for well-formed documents
whose content breaks a rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from . import fuzzy
from ._keys import node_key
from .errors import ConfigError, TrustFrameError
from .montecarlo import MonteCarloConfig
from .topology import Cluster, ClusterDag
from .uncertainty import (
    Category,
    FacetKind,
    Taxonomy,
    UncertaintyFacet,
    UncertaintySource,
    Violation,
    canonical_taxonomy,
    default_facets,
    validate_scenario_taxonomy,
)

SECTIONS = ("taxonomy", "fuzzy", "montecarlo", "weights", "topology", "profiles", "schedule", "simulation")
COORDINATOR_TARGET = "coordinator:"


class ScenarioFormatError(ConfigError):
    """The file is unreadable, not YAML, or does not follow the schema."""


class ScenarioInvalid(ConfigError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(map(str, violations)))


# -- config objects -----------------------------------------------------------


@dataclass(frozen=True)
class MonteCarloSettings:
    trials: int = 10_000
    seed: int | None = None  # None: derived from the simulation seed
    dispersion_cap: float = 1.0

    def build(self, fallback_seed: int) -> MonteCarloConfig:
        return MonteCarloConfig(self.trials, fallback_seed if self.seed is None else self.seed, self.dispersion_cap)


@dataclass(frozen=True)
class NodeProfile:
    """Latent ground truth for one node: 1 is perfectly reliable.

    ``facets`` overrides the base reliability for individual facets.
    """

    reliability: float
    facets: Mapping[str, float] = field(default_factory=dict)

    def for_facet(self, facet: str) -> float:
        return self.facets.get(facet, self.reliability)

    def shifted(self, delta: float) -> NodeProfile:
        clamp = lambda r: min(1.0, max(0.0, r - delta))  # noqa: E731
        return NodeProfile(clamp(self.reliability), {k: clamp(v) for k, v in self.facets.items()})

    def __hash__(self):
        return hash((self.reliability, tuple(sorted(self.facets.items()))))


@dataclass(frozen=True)
class TaskSpec:
    id: str
    round: int
    cluster: str
    workers: int = 1
    partner: str | None = None


Task = TaskSpec


@dataclass(frozen=True)
class FaultEvent:
    """``degrade`` lowers reliability by ``delta`` (floored at 0); ``restore``
    returns the node to its configured profile.  A target of the form
    ``coordinator:<cluster>`` resolves to that cluster's coordinator when the
    fault fires."""

    round: int
    target: str
    effect: str
    delta: float = 0.0


@dataclass(frozen=True)
class AttachEvent:
    round: int
    cluster: str
    members: tuple[str, ...]
    fanout: int | None = None


@dataclass(frozen=True)
class Preseed:
    node: str
    ratings: tuple[float, ...]
    count: int | None = None


@dataclass(frozen=True)
class SimulationSettings:
    rounds: int = 1
    interactions_per_round: int = 0
    maturity: int = 10
    window: int = 20
    threshold: float = 0.5
    seed: int = 0
    samples_per_observation: int = 16
    observation_mean: float = 10.0
    facets: tuple[str, ...] | None = None  # observed facets; None means all
    bootstrap_accepts_tasks: bool = True
    preseed: tuple[Preseed, ...] = ()


@dataclass(frozen=True)
class ScenarioConfig:
    taxonomy: Taxonomy = field(default_factory=Taxonomy.canonical)
    rulebase: fuzzy.RuleBase = field(default_factory=fuzzy.default_rule_base)
    resolution: int = fuzzy.DEFAULT_RESOLUTION
    montecarlo: MonteCarloSettings = MonteCarloSettings()
    weights: Mapping[str, float] = field(default_factory=dict)
    clusters: tuple[Cluster, ...] = ()
    edges: tuple[tuple[str, str], ...] = ()
    attach_fanout: int = 2
    size_tolerance: float = 2.0
    profiles: Mapping[str, NodeProfile] = field(default_factory=dict)
    tasks: tuple[TaskSpec, ...] = ()
    faults: tuple[FaultEvent, ...] = ()
    attaches: tuple[AttachEvent, ...] = ()
    simulation: SimulationSettings = SimulationSettings()

    def with_overrides(self, seed: int | None = None, rounds: int | None = None) -> ScenarioConfig:
        sim = self.simulation
        if seed is not None:
            sim = replace(sim, seed=seed)
        if rounds is not None:
            sim = replace(sim, rounds=rounds)
        return replace(self, simulation=sim)

    def observed_facets(self) -> list[UncertaintyFacet]:
        names = self.simulation.facets
        if names is None:
            return list(self.taxonomy.facets)
        return [self.taxonomy.facet(n) for n in names]

    def build_dag(self) -> ClusterDag:
        return ClusterDag.build(self.clusters, self.edges)

    def to_dict(self) -> dict:
        return to_dict(self)


# -- parsing ------------------------------------------------------------------


def _need(data: Mapping, key: str, where: str):
    if key not in data:
        raise ScenarioFormatError(f"{where}: missing key {key!r}")
    return data[key]


def _mapping(value, where: str) -> Mapping:
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise ScenarioFormatError(f"{where}: expected a mapping, got {type(value).__name__}")
    return value


def _list(value, where: str) -> list:
    if value is None:
        return []
    if not isinstance(value, list):
        raise ScenarioFormatError(f"{where}: expected a list, got {type(value).__name__}")
    return value


def _num(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioFormatError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioFormatError(f"{where}: expected an integer, got {value!r}")
    return value


def _str(value, where: str) -> str:
    if isinstance(value, (str, int)) and not isinstance(value, bool):
        return str(value)
    raise ScenarioFormatError(f"{where}: expected a string, got {value!r}")


def _check_keys(data: Mapping, allowed: tuple[str, ...], where: str) -> None:
    extra = sorted(set(map(str, data)) - set(allowed))
    if extra:
        raise ScenarioFormatError(f"{where}: unknown keys {extra}")


def _parse_taxonomy(raw) -> Taxonomy:
    if raw in (None, "canonical"):
        return Taxonomy.canonical()
    raw = _mapping(raw, "taxonomy")
    _check_keys(raw, ("sources", "facets"), "taxonomy")
    src_raw = raw.get("sources", "canonical")
    if src_raw == "canonical":
        sources = canonical_taxonomy()
    else:
        sources = []
        for i, item in enumerate(_list(src_raw, "taxonomy.sources")):
            where = f"taxonomy.sources[{i}]"
            item = _mapping(item, where)
            _check_keys(item, ("id", "name", "priority", "category"), where)
            name = _str(_need(item, "name", where), where + ".name")
            category = _str(_need(item, "category", where), where + ".category")
            try:
                category = Category(category)
            except ValueError:
                pass  # reported by validation
            sources.append(
                UncertaintySource(
                    _str(item.get("id", "-".join(name.lower().split())), where + ".id"),
                    name,
                    _int(_need(item, "priority", where), where + ".priority"),
                    category,
                )
            )
    facet_raw = raw.get("facets", "default")
    if facet_raw == "default":
        facets = default_facets(sources)
    else:
        facets = []
        for i, item in enumerate(_list(facet_raw, "taxonomy.facets")):
            where = f"taxonomy.facets[{i}]"
            item = _mapping(item, where)
            _check_keys(item, ("name", "source", "kind", "terms"), where)
            terms = tuple(_str(t, where + ".terms") for t in _list(item.get("terms", ["Low", "Medium", "High"]), where))
            facets.append(
                UncertaintyFacet(
                    _str(_need(item, "source", where), where + ".source"),
                    _str(_need(item, "kind", where), where + ".kind"),
                    _str(_need(item, "name", where), where + ".name"),
                    terms,
                )
            )
    return Taxonomy(tuple(sources), tuple(facets))


def _parse_variable(raw, where: str) -> fuzzy.LinguisticVariable:
    raw = _mapping(raw, where)
    _check_keys(raw, ("name", "universe", "terms"), where)
    universe = _list(_need(raw, "universe", where), where + ".universe")
    if len(universe) != 2:
        raise ScenarioFormatError(f"{where}.universe: expected [lo, hi]")
    terms = {}
    for term, spec in _mapping(_need(raw, "terms", where), where + ".terms").items():
        tw = f"{where}.terms.{term}"
        spec = _mapping(spec, tw)
        _check_keys(spec, ("shape", "params"), tw)
        params = [_num(p, tw + ".params") for p in _list(_need(spec, "params", tw), tw + ".params")]
        terms[str(term)] = fuzzy.membership(_str(_need(spec, "shape", tw), tw + ".shape"), params)
    return fuzzy.LinguisticVariable(
        _str(_need(raw, "name", where), where + ".name"),
        (_num(universe[0], where), _num(universe[1], where)),
        terms,
    )


def _parse_rule(raw, where: str) -> fuzzy.FuzzyRule:
    if isinstance(raw, list):
        if len(raw) != 3:
            raise ScenarioFormatError(f"{where}: a rule triple is [variable, term, consequent]")
        var, term, out = (_str(x, where) for x in raw)
        return fuzzy.FuzzyRule(((var, term),), out)
    raw = _mapping(raw, where)
    _check_keys(raw, ("if", "then"), where)
    ants = []
    for pair in _list(_need(raw, "if", where), where + ".if"):
        pair = _list(pair, where + ".if")
        if len(pair) != 2:
            raise ScenarioFormatError(f"{where}.if: antecedents are [variable, term] pairs")
        ants.append((_str(pair[0], where), _str(pair[1], where)))
    return fuzzy.FuzzyRule(tuple(ants), _str(_need(raw, "then", where), where + ".then"))


def _parse_fuzzy(raw) -> tuple[fuzzy.RuleBase, int]:
    if raw in (None, "default"):
        return fuzzy.default_rule_base(), fuzzy.DEFAULT_RESOLUTION
    raw = _mapping(raw, "fuzzy")
    _check_keys(raw, ("inputs", "output", "rules", "resolution"), "fuzzy")
    resolution = _int(raw.get("resolution", fuzzy.DEFAULT_RESOLUTION), "fuzzy.resolution")
    if "inputs" not in raw and "output" not in raw and "rules" not in raw:
        return fuzzy.default_rule_base(), resolution
    inputs = tuple(
        _parse_variable(v, f"fuzzy.inputs[{i}]") for i, v in enumerate(_list(_need(raw, "inputs", "fuzzy"), "fuzzy.inputs"))
    )
    output = _parse_variable(_need(raw, "output", "fuzzy"), "fuzzy.output")
    rules = tuple(_parse_rule(r, f"fuzzy.rules[{i}]") for i, r in enumerate(_list(_need(raw, "rules", "fuzzy"), "fuzzy.rules")))
    return fuzzy.RuleBase(inputs, output, rules), resolution


def _parse_montecarlo(raw) -> MonteCarloSettings:
    raw = _mapping(raw, "montecarlo")
    _check_keys(raw, ("trials", "seed", "dispersion_cap"), "montecarlo")
    seed = raw.get("seed")
    return MonteCarloSettings(
        _int(raw.get("trials", 10_000), "montecarlo.trials"),
        None if seed is None else _int(seed, "montecarlo.seed"),
        _num(raw.get("dispersion_cap", 1.0), "montecarlo.dispersion_cap"),
    )


def _parse_topology(raw) -> dict:
    raw = _mapping(raw, "topology")
    _check_keys(raw, ("clusters", "edges", "attach_fanout", "size_tolerance"), "topology")
    clusters = []
    for i, item in enumerate(_list(raw.get("clusters"), "topology.clusters")):
        where = f"topology.clusters[{i}]"
        item = _mapping(item, where)
        _check_keys(item, ("id", "members"), where)
        members = [_str(m, where + ".members") for m in _list(_need(item, "members", where), where + ".members")]
        clusters.append(Cluster(_str(_need(item, "id", where), where + ".id"), frozenset(members)))
    edges = []
    for i, e in enumerate(_list(raw.get("edges"), "topology.edges")):
        e = _list(e, f"topology.edges[{i}]")
        if len(e) != 2:
            raise ScenarioFormatError(f"topology.edges[{i}]: expected [from, to]")
        edges.append((_str(e[0], "topology.edges"), _str(e[1], "topology.edges")))
    return {
        "clusters": tuple(clusters),
        "edges": tuple(edges),
        "attach_fanout": _int(raw.get("attach_fanout", 2), "topology.attach_fanout"),
        "size_tolerance": _num(raw.get("size_tolerance", 2.0), "topology.size_tolerance"),
    }


def _parse_profiles(raw) -> dict[str, NodeProfile]:
    profiles = {}
    for node, spec in _mapping(raw, "profiles").items():
        where = f"profiles.{node}"
        if isinstance(spec, (int, float)) and not isinstance(spec, bool):
            profiles[str(node)] = NodeProfile(float(spec))
            continue
        spec = _mapping(spec, where)
        _check_keys(spec, ("reliability", "facets"), where)
        facets = {str(k): _num(v, f"{where}.facets.{k}") for k, v in _mapping(spec.get("facets"), where).items()}
        profiles[str(node)] = NodeProfile(_num(_need(spec, "reliability", where), where + ".reliability"), facets)
    return profiles


def _parse_schedule(raw) -> dict:
    raw = _mapping(raw, "schedule")
    _check_keys(raw, ("tasks", "faults", "attach"), "schedule")
    tasks, faults, attaches = [], [], []
    for i, item in enumerate(_list(raw.get("tasks"), "schedule.tasks")):
        w = f"schedule.tasks[{i}]"
        item = _mapping(item, w)
        _check_keys(item, ("id", "round", "cluster", "workers", "partner"), w)
        partner = item.get("partner")
        tasks.append(
            TaskSpec(
                _str(_need(item, "id", w), w + ".id"),
                _int(_need(item, "round", w), w + ".round"),
                _str(_need(item, "cluster", w), w + ".cluster"),
                _int(item.get("workers", 1), w + ".workers"),
                None if partner is None else _str(partner, w + ".partner"),
            )
        )
    for i, item in enumerate(_list(raw.get("faults"), "schedule.faults")):
        w = f"schedule.faults[{i}]"
        item = _mapping(item, w)
        _check_keys(item, ("round", "target", "effect", "delta"), w)
        faults.append(
            FaultEvent(
                _int(_need(item, "round", w), w + ".round"),
                _str(_need(item, "target", w), w + ".target"),
                _str(_need(item, "effect", w), w + ".effect"),
                _num(item.get("delta", 0.0), w + ".delta"),
            )
        )
    for i, item in enumerate(_list(raw.get("attach"), "schedule.attach")):
        w = f"schedule.attach[{i}]"
        item = _mapping(item, w)
        _check_keys(item, ("round", "cluster", "members", "fanout"), w)
        fanout = item.get("fanout")
        attaches.append(
            AttachEvent(
                _int(_need(item, "round", w), w + ".round"),
                _str(_need(item, "cluster", w), w + ".cluster"),
                tuple(_str(m, w + ".members") for m in _list(_need(item, "members", w), w + ".members")),
                None if fanout is None else _int(fanout, w + ".fanout"),
            )
        )
    return {"tasks": tuple(tasks), "faults": tuple(faults), "attaches": tuple(attaches)}


def _parse_simulation(raw) -> SimulationSettings:
    raw = _mapping(raw, "simulation")
    _check_keys(raw, tuple(SimulationSettings.__dataclass_fields__), "simulation")
    d = SimulationSettings()
    facets = raw.get("facets")
    preseed = []
    for i, item in enumerate(_list(raw.get("preseed"), "simulation.preseed")):
        w = f"simulation.preseed[{i}]"
        item = _mapping(item, w)
        _check_keys(item, ("node", "rating", "ratings", "count"), w)
        if "ratings" in item:
            ratings = tuple(_num(r, w + ".ratings") for r in _list(item["ratings"], w + ".ratings"))
        else:
            ratings = (_num(_need(item, "rating", w), w + ".rating"),)
        count = item.get("count")
        preseed.append(Preseed(_str(_need(item, "node", w), w + ".node"), ratings, None if count is None else _int(count, w + ".count")))
    accepts = raw.get("bootstrap_accepts_tasks", d.bootstrap_accepts_tasks)
    if not isinstance(accepts, bool):
        raise ScenarioFormatError("simulation.bootstrap_accepts_tasks: expected true/false")
    return SimulationSettings(
        rounds=_int(raw.get("rounds", d.rounds), "simulation.rounds"),
        interactions_per_round=_int(raw.get("interactions_per_round", d.interactions_per_round), "simulation.interactions_per_round"),
        maturity=_int(raw.get("maturity", d.maturity), "simulation.maturity"),
        window=_int(raw.get("window", d.window), "simulation.window"),
        threshold=_num(raw.get("threshold", d.threshold), "simulation.threshold"),
        seed=_int(raw.get("seed", d.seed), "simulation.seed"),
        samples_per_observation=_int(raw.get("samples_per_observation", d.samples_per_observation), "simulation.samples_per_observation"),
        observation_mean=_num(raw.get("observation_mean", d.observation_mean), "simulation.observation_mean"),
        facets=None if facets is None else tuple(_str(f, "simulation.facets") for f in _list(facets, "simulation.facets")),
        bootstrap_accepts_tasks=accepts,
        preseed=tuple(preseed),
    )


def from_dict(data: Any) -> ScenarioConfig:
    """Build a config from a parsed document.

    Raises :class:`ScenarioFormatError` on schema problems and
    :class:`ScenarioInvalid` when a domain object rejects its values.
    """
    data = _mapping(data, "scenario")
    _check_keys(data, SECTIONS, "scenario")
    try:
        rulebase, resolution = _parse_fuzzy(data.get("fuzzy"))
        topo = _parse_topology(data.get("topology"))
        weights = {str(k): _num(v, f"weights.{k}") for k, v in _mapping(data.get("weights"), "weights").items()}
        return ScenarioConfig(
            taxonomy=_parse_taxonomy(data.get("taxonomy")),
            rulebase=rulebase,
            resolution=resolution,
            montecarlo=_parse_montecarlo(data.get("montecarlo")),
            weights=weights,
            profiles=_parse_profiles(data.get("profiles")),
            simulation=_parse_simulation(data.get("simulation")),
            **topo,
            **_parse_schedule(data.get("schedule")),
        )
    except ScenarioFormatError:
        raise
    except TrustFrameError as exc:
        raise ScenarioInvalid([Violation("scenario", str(exc))]) from exc


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioFormatError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioFormatError(f"{path}: not valid YAML: {exc}") from exc
    return from_dict(data)


# -- serialization --------------------------------------------------------------


def _variable_dict(var: fuzzy.LinguisticVariable) -> dict:
    return {
        "name": var.name,
        "universe": list(var.universe),
        "terms": {t: {"shape": fuzzy.shape_name(mf), "params": list(mf.params)} for t, mf in var.terms.items()},
    }


def _rule_dict(rule: fuzzy.FuzzyRule):
    if len(rule.antecedents) == 1:
        (var, term), = rule.antecedents
        return [var, term, rule.consequent]
    return {"if": [list(p) for p in rule.antecedents], "then": rule.consequent}


def to_dict(config: ScenarioConfig) -> dict:
    """Fully explicit document; ``from_dict(to_dict(c)) == c``."""
    sim = config.simulation
    sim_dict = {
        "rounds": sim.rounds,
        "interactions_per_round": sim.interactions_per_round,
        "maturity": sim.maturity,
        "window": sim.window,
        "threshold": sim.threshold,
        "seed": sim.seed,
        "samples_per_observation": sim.samples_per_observation,
        "observation_mean": sim.observation_mean,
        "bootstrap_accepts_tasks": sim.bootstrap_accepts_tasks,
        "preseed": [
            {"node": p.node, "ratings": list(p.ratings), **({} if p.count is None else {"count": p.count})}
            for p in sim.preseed
        ],
    }
    if sim.facets is not None:
        sim_dict["facets"] = list(sim.facets)
    return {
        "taxonomy": {
            "sources": [
                {"id": s.id, "name": s.name, "priority": s.priority, "category": getattr(s.category, "value", s.category)}
                for s in config.taxonomy.sources
            ],
            "facets": [
                {"name": f.name, "source": f.source_id, "kind": f.kind.value, "terms": list(f.terms)}
                for f in config.taxonomy.facets
            ],
        },
        "fuzzy": {
            "resolution": config.resolution,
            "inputs": [_variable_dict(v) for v in config.rulebase.inputs],
            "output": _variable_dict(config.rulebase.output),
            "rules": [_rule_dict(r) for r in config.rulebase.rules],
        },
        "montecarlo": {
            "trials": config.montecarlo.trials,
            "seed": config.montecarlo.seed,
            "dispersion_cap": config.montecarlo.dispersion_cap,
        },
        "weights": dict(config.weights),
        "topology": {
            "clusters": [{"id": c.id, "members": c.sorted_members()} for c in config.clusters],
            "edges": [list(e) for e in config.edges],
            "attach_fanout": config.attach_fanout,
            "size_tolerance": config.size_tolerance,
        },
        "profiles": {
            n: ({"reliability": p.reliability, "facets": dict(p.facets)} if p.facets else {"reliability": p.reliability})
            for n, p in config.profiles.items()
        },
        "schedule": {
            "tasks": [
                {"id": t.id, "round": t.round, "cluster": t.cluster, "workers": t.workers, "partner": t.partner}
                for t in config.tasks
            ],
            "faults": [{"round": f.round, "target": f.target, "effect": f.effect, "delta": f.delta} for f in config.faults],
            "attach": [
                {"round": a.round, "cluster": a.cluster, "members": list(a.members), "fanout": a.fanout}
                for a in config.attaches
            ],
        },
        "simulation": sim_dict,
    }


def dump_scenario(config: ScenarioConfig) -> str:
    return yaml.safe_dump(to_dict(config), sort_keys=False, default_flow_style=None, width=100)


# -- validation ---------------------------------------------------------------


def _bad_number(x: float) -> bool:
    return not math.isfinite(x)


def validate_config(config: ScenarioConfig) -> list[Violation]:
    """Every content check the scenario must pass before a run."""
    v: list[Violation] = []
    tax = config.taxonomy
    v += validate_scenario_taxonomy(tax.sources, tax.facets)

    for problem in fuzzy.validate_rule_base(config.rulebase, config.resolution):
        v.append(Violation("fuzzy", problem))
    if config.resolution < 1:
        v.append(Violation("fuzzy", "resolution must be positive"))
    label_terms = set(config.rulebase.inputs[0].terms)
    for facet in tax.facets:
        if facet.kind is FacetKind.EPISTEMIC:
            missing = [t for t in facet.terms if t not in label_terms]
            if missing:
                v.append(Violation(facet.name, f"terms {missing} unknown to fuzzy input {config.rulebase.inputs[0].name!r}"))

    mc = config.montecarlo
    if mc.trials < 100:
        v.append(Violation("montecarlo", f"trials must be >= 100, got {mc.trials}"))
    if not mc.dispersion_cap > 0 or _bad_number(mc.dispersion_cap):
        v.append(Violation("montecarlo", f"dispersion_cap must be positive, got {mc.dispersion_cap}"))

    source_keys = {s.name for s in tax.sources} | {s.id for s in tax.sources}
    for name, w in config.weights.items():
        if name not in source_keys:
            v.append(Violation("weights", f"unknown source {name!r}"))
        if not w > 0 or _bad_number(w):
            v.append(Violation("weights", f"weight for {name!r} must be positive, got {w}"))

    # topology
    seen: dict[str, str] = {}
    ids = set()
    for c in config.clusters:
        if c.id in ids:
            v.append(Violation("topology", f"duplicate cluster id {c.id!r}"))
        ids.add(c.id)
        for n in c.sorted_members():
            if n.startswith("__"):
                v.append(Violation("topology", f"node id {n!r} uses the reserved '__' prefix"))
            if n in seen:
                v.append(Violation("topology", f"node {n!r} is in clusters {seen[n]!r} and {c.id!r}"))
            seen[n] = c.id
    edge_ok = True
    pairs = set()
    for a, b in config.edges:
        if a not in ids or b not in ids:
            v.append(Violation("topology", f"edge {a!r} -> {b!r} refers to an unknown cluster"))
            edge_ok = False
        elif a == b:
            v.append(Violation("topology", f"self-loop on {a!r}"))
            edge_ok = False
        elif (a, b) in pairs:
            v.append(Violation("topology", f"duplicate edge {a!r} -> {b!r}"))
            edge_ok = False
        pairs.add((a, b))
    if edge_ok and len(ids) == len(config.clusters) and len(seen) == sum(len(c.members) for c in config.clusters):
        report = config.build_dag().validate_acyclic()
        if not report.acyclic:
            v.append(Violation("topology", f"cluster edges form a cycle through {', '.join(report.cycle)}"))
    if not config.size_tolerance >= 1:
        v.append(Violation("topology", f"size_tolerance must be >= 1, got {config.size_tolerance}"))
    if config.attach_fanout < 0:
        v.append(Violation("topology", "attach_fanout must be non-negative"))

    # attach events bring their own nodes
    all_nodes = set(seen)
    for a in config.attaches:
        if a.cluster in ids:
            v.append(Violation("schedule", f"attach of existing cluster id {a.cluster!r}"))
        ids.add(a.cluster)
        if not a.members:
            v.append(Violation("schedule", f"attached cluster {a.cluster!r} has no members"))
        for n in a.members:
            if n in all_nodes:
                v.append(Violation("schedule", f"attached node {n!r} already belongs to a cluster"))
            all_nodes.add(n)
        if a.fanout is not None and a.fanout < 0:
            v.append(Violation("schedule", f"attach {a.cluster!r}: negative fanout"))

    # profiles
    facet_names = {f.name for f in tax.facets}
    for n in sorted(all_nodes - set(config.profiles), key=node_key):
        v.append(Violation("profiles", f"node {n!r} has no profile"))
    for n, p in config.profiles.items():
        if n not in all_nodes:
            v.append(Violation("profiles", f"profile for unknown node {n!r}"))
        for label, r in (("reliability", p.reliability), *p.facets.items()):
            if not 0.0 <= r <= 1.0:
                v.append(Violation("profiles", f"{n}: {label} {r} outside [0, 1]"))
        for f in p.facets:
            if f not in facet_names:
                v.append(Violation("profiles", f"{n}: unknown facet {f!r}"))

    # simulation
    sim = config.simulation
    if sim.rounds < 1:
        v.append(Violation("simulation", "rounds must be >= 1"))
    if sim.interactions_per_round < 0:
        v.append(Violation("simulation", "interactions_per_round must be >= 0"))
    if sim.maturity < 1:
        v.append(Violation("simulation", "maturity must be >= 1"))
    if sim.window < 1:
        v.append(Violation("simulation", "window must be >= 1"))
    if not 0.0 <= sim.threshold <= 1.0:
        v.append(Violation("simulation", f"threshold {sim.threshold} outside [0, 1]"))
    if sim.samples_per_observation < 2:
        v.append(Violation("simulation", "samples_per_observation must be >= 2"))
    if not sim.observation_mean > 0 or _bad_number(sim.observation_mean):
        v.append(Violation("simulation", "observation_mean must be positive"))
    for f in sim.facets or ():
        if f not in facet_names:
            v.append(Violation("simulation", f"unknown observed facet {f!r}"))
    if sim.facets is not None and not sim.facets:
        v.append(Violation("simulation", "facets list is empty"))
    for p in sim.preseed:
        if p.node not in all_nodes:
            v.append(Violation("simulation", f"preseed for unknown node {p.node!r}"))
        if not p.ratings:
            v.append(Violation("simulation", f"preseed for {p.node!r} has no ratings"))
        if any(not 0.0 <= r <= 1.0 for r in p.ratings):
            v.append(Violation("simulation", f"preseed rating for {p.node!r} outside [0, 1]"))
        if p.count is not None and p.count < min(len(p.ratings), sim.window):
            v.append(Violation("simulation", f"preseed count for {p.node!r} below its history length"))

    # schedule
    for t in config.tasks:
        if t.cluster not in ids:
            v.append(Violation("schedule", f"task {t.id!r}: unknown cluster {t.cluster!r}"))
        if t.partner is not None and t.partner not in ids:
            v.append(Violation("schedule", f"task {t.id!r}: unknown partner {t.partner!r}"))
        if t.workers < 1:
            v.append(Violation("schedule", f"task {t.id!r}: workers must be >= 1"))
        if t.round < 1:
            v.append(Violation("schedule", f"task {t.id!r}: round {t.round} before round 1"))
    for f in config.faults:
        if f.effect not in ("degrade", "restore"):
            v.append(Violation("schedule", f"fault effect must be degrade or restore, got {f.effect!r}"))
        if f.target.startswith(COORDINATOR_TARGET):
            if f.target[len(COORDINATOR_TARGET):] not in ids:
                v.append(Violation("schedule", f"fault target {f.target!r}: unknown cluster"))
        elif f.target not in all_nodes:
            v.append(Violation("schedule", f"fault target {f.target!r} is not a node"))
        if f.effect == "degrade" and not 0.0 < f.delta <= 1.0:
            v.append(Violation("schedule", f"degrade delta {f.delta} outside (0, 1]"))
        if f.round < 1:
            v.append(Violation("schedule", f"fault round {f.round} before round 1"))
    for a in config.attaches:
        if a.round < 1:
            v.append(Violation("schedule", f"attach round {a.round} before round 1"))
    return v
