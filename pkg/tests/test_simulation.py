import copy

import numpy as np
import pytest

from trustframe.errors import ContractError
from trustframe.ledger import LedgerReplica
from trustframe.scenario import FaultEvent, NodeProfile, ScenarioInvalid, TaskSpec, from_dict
from trustframe.simulation import (
    Designation,
    Environment,
    NetNode,
    Simulation,
    _draw_many,
    assign_task,
    audit,
    bootstrap_coordinator,
    communication_round,
    inject_fault,
    observation_rng,
    rate_batch,
    run,
    spearman,
)
from trustframe.topology import Cluster, ClusterDag

FACETS = ["Hardware Malfunctions/measured", "Data Quality", "Quality of Service", "Hardware Malfunctions/assessed", "Network Scalability"]

SMALL = {
    "montecarlo": {"trials": 200},
    "topology": {
        "clusters": [{"id": "H1", "members": ["N1", "N2", "N3", "N4"]}, {"id": "H2", "members": ["N5", "N6", "N7", "N8"]}],
        "edges": [["H1", "H2"]],
    },
    "profiles": {f"N{i}": round(0.15 + 0.1 * i, 2) for i in range(1, 9)},
    "schedule": {
        "tasks": [
            {"id": "T1", "round": 1, "cluster": "H1"},
            {"id": "T2", "round": 25, "cluster": "H1", "workers": 2},
            {"id": "T3", "round": 26, "cluster": "H2", "partner": "H1"},
        ],
        "faults": [{"round": 20, "target": "coordinator:H2", "effect": "degrade", "delta": 0.5}],
    },
    "simulation": {"rounds": 30, "interactions_per_round": 3, "seed": 4, "facets": FACETS},
}


def small(**sim):
    data = copy.deepcopy(SMALL)
    data["simulation"].update(sim)
    return from_dict(data)


def env_for(config, seed=0):
    return Environment.from_config(config, seed)


def test_invalid_config_is_refused():
    data = copy.deepcopy(SMALL)
    data["topology"]["edges"].append(["H2", "H1"])
    with pytest.raises(ScenarioInvalid):
        Simulation(from_dict(data))


def test_null_scenario_produces_no_rows():
    report = run(small(interactions_per_round=0))
    assert report.trust_rows == []
    assert report.final == {}
    assert report.spearman is None
    assert all(t.bootstrap or t.status != "assigned" for t in report.task_log)


def test_same_seed_same_report():
    a, b = run(small()), run(small())
    assert a.trust_rows == b.trust_rows and a.task_log == b.task_log and a.timelines == b.timelines


def test_different_seed_changes_ratings():
    assert run(small()).trust_rows != run(small(), seed=5).trust_rows


def test_audit_is_clean():
    report = run(small())
    assert audit(report) == []
    assert max(report.divergence) == 0


def test_partner_must_be_successor():
    report = run(small())
    t3 = next(t for t in report.task_log if t.task_id == "T3")
    assert t3.status == "routing_error"


def test_communication_round_shape():
    config = small()
    env = env_for(config)
    a, b = NetNode("N1", "H1", NodeProfile(0.9)), NetNode("N2", "H1", NodeProfile(0.3))
    about_a, about_b = communication_round(a, b, env, 7)
    assert (about_a.evaluated_node, about_a.evaluator, about_a.round) == ("N1", "N2", 7)
    assert (about_b.evaluated_node, about_b.evaluator) == ("N2", "N1")
    assert 0 <= about_b.rating <= 1 and 0 <= about_a.rating <= 1
    with pytest.raises(ContractError):
        communication_round(a, NetNode("N5", "H2", NodeProfile(0.5)), env, 1)
    with pytest.raises(ContractError):
        communication_round(a, a, env, 1)


def test_perfect_node_rates_high():
    env = env_for(small())
    a, b = NetNode("N1", "H1", NodeProfile(1.0)), NetNode("N2", "H1", NodeProfile(0.5))
    for rnd in range(1, 21):
        assert communication_round(a, b, env, rnd)[0].rating >= 0.8


def test_batched_rating_matches_kernel():
    env = env_for(small())
    a, b = NetNode("N1", "H1", NodeProfile(0.7)), NetNode("N2", "H1", NodeProfile(0.4))
    raws = _draw_many(a.profile, env, observation_rng(env, "N1", 3), 1) + _draw_many(b.profile, env, observation_rng(env, "N2", 3), 1)
    about_a, about_b = communication_round(a, b, env, 3)
    fast = rate_batch(raws, env)
    assert fast[0] == pytest.approx(about_a.rating, abs=1e-12)
    assert fast[1] == pytest.approx(about_b.rating, abs=1e-12)


def test_expected_trust_increases_with_reliability():
    env = env_for(small())
    rng = np.random.default_rng(0)
    means = [np.mean(rate_batch(_draw_many(NodeProfile(r), env, rng, 400), env)) for r in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert all(x < y for x, y in zip(means, means[1:]))


def test_symmetric_profiles_converge_together():
    data = copy.deepcopy(SMALL)
    data["topology"] = {"clusters": [{"id": "H1", "members": ["N1", "N2"]}]}
    data["profiles"] = {"N1": 0.6, "N2": 0.6}
    data["schedule"] = {}
    data["simulation"].update(rounds=1000, interactions_per_round=1, window=1000)
    report = run(from_dict(data))
    (a, _), (b, _) = report.final["N1"], report.final["N2"]
    assert abs(a - b) < 0.05


def established_replica(count=10):
    replica = LedgerReplica("H1")
    for node, r in {"N1": 0.54, "N2": 0.79, "N3": 0.86, "N4": 0.91}.items():
        replica.preseed(node, [r], count=count)
    return replica


TABLE_DAG = ClusterDag.build([Cluster("H1", {"N1", "N2", "N3", "N4"})])


@pytest.mark.parametrize(
    "threshold, workers, status, chosen",
    [(0.9, 1, "assigned", ("N4",)), (0.95, 1, "refused", ()), (0.5, 2, "assigned", ("N4", "N3")), (0.8, 3, "refused", ())],
)
def test_assign_task_on_established_cluster(threshold, workers, status, chosen):
    rec = assign_task(TaskSpec("T", 1, "H1", workers), established_replica(), TABLE_DAG, threshold, 10)
    assert rec.status == status and rec.workers == chosen
    assert rec.coordinator == "N4" and not rec.bootstrap


def test_immature_cluster_uses_bootstrap():
    replica = established_replica(count=3)
    rec = assign_task(TaskSpec("T", 1, "H1"), replica, TABLE_DAG, 0.5, 10)
    assert rec.status == "assigned" and rec.bootstrap and rec.workers == ("N1",)
    refused = assign_task(TaskSpec("T", 1, "H1"), replica, TABLE_DAG, 0.5, 10, bootstrap_ok=False)
    assert refused.status == "refused"
    assert assign_task(TaskSpec("T", 1, "H1", 2), replica, TABLE_DAG, 0.5, 10).status == "refused"


def test_bootstrap_coordinator_is_smallest_id():
    d = bootstrap_coordinator(Cluster("H", {"N7", "N2", "N9"}), LedgerReplica("H"), 10)
    assert d == Designation("N2", True)


def test_mature_member_supersedes_bootstrap():
    replica = LedgerReplica("H")
    cluster = Cluster("H", {"N7", "N2", "N9"})
    replica.preseed("N9", [0.3], count=10)
    assert bootstrap_coordinator(cluster, replica, 10) == Designation("N9", False)


def test_fault_degrade_and_restore():
    nodes = {"N1": NetNode("N1", "H1", NodeProfile(0.8, {"Data Quality": 0.9}))}
    coords = {"H1": Designation("N1", False)}
    inject_fault(FaultEvent(1, "coordinator:H1", "degrade", 0.5), nodes, coords)
    assert nodes["N1"].profile.reliability == pytest.approx(0.3)
    assert nodes["N1"].profile.for_facet("Data Quality") == pytest.approx(0.4)
    inject_fault(FaultEvent(2, "N1", "degrade", 0.5), nodes)
    assert nodes["N1"].profile.reliability == 0.0
    inject_fault(FaultEvent(3, "N1", "restore"), nodes)
    assert nodes["N1"].profile == nodes["N1"].baseline
    with pytest.raises(ContractError):
        inject_fault(FaultEvent(1, "N9", "degrade", 0.1), nodes)


def test_fault_on_isolated_node_changes_nothing_else():
    data = copy.deepcopy(SMALL)
    data["topology"]["clusters"].append({"id": "H3", "members": ["N9"]})
    data["profiles"]["N9"] = 0.5
    base = run(from_dict(data))
    data["schedule"]["faults"].append({"round": 5, "target": "N9", "effect": "degrade", "delta": 0.4})
    faulted = run(from_dict(data))
    assert base.trust_rows == faulted.trust_rows


def test_degraded_coordinator_loses_trust():
    report = run(small(rounds=60))
    fault = report.faults[0]
    victim = fault["node"]
    before = [r.rolling_average for r in report.trust_rows if r.node_id == victim and r.round == fault["round"]]
    after = report.final[victim][0]
    assert after < before[0]


def test_spearman_degenerate_inputs():
    assert spearman({"a": 1.0}, {"a": 0.5}) is None
    assert spearman({"a": 1.0, "b": 1.0}, {"a": 0.2, "b": 0.5}) is None
    assert spearman({"a": 0.1, "b": 0.2, "c": 0.3}, {"a": 0.3, "b": 0.5, "c": 0.9}) == pytest.approx(1.0)


def test_attach_mid_run():
    data = copy.deepcopy(SMALL)
    data["profiles"].update({"N9": 0.8, "N10": 0.4})
    data["schedule"]["attach"] = [{"round": 10, "cluster": "H3", "members": ["N9", "N10"]}]
    report = run(from_dict(data))
    assert report.timelines["H3"][0]["round"] == 10
    assert audit(report) == []
    assert {"N9", "N10"} <= set(report.final)


def test_null_scenario_has_bootstrap_coordinators_everywhere():
    data = copy.deepcopy(SMALL)
    data["schedule"] = {}
    data["simulation"].update(rounds=1, interactions_per_round=0)
    report = run(from_dict(data))
    assert report.trust_rows == []
    assert report.timelines == {
        "H1": [{"round": 1, "coordinator": "N1", "bootstrap": True}],
        "H2": [{"round": 1, "coordinator": "N5", "bootstrap": True}],
    }


def test_fault_free_run_has_one_bootstrap_handover_per_cluster():
    data = copy.deepcopy(SMALL)
    data["schedule"]["faults"] = []
    report = run(from_dict(data))
    for cid, timeline in report.timelines.items():
        assert timeline[0]["bootstrap"]
        handovers = sum(a["bootstrap"] and not b["bootstrap"] for a, b in zip(timeline, timeline[1:]))
        assert handovers == 1, cid
        assert all(not entry["bootstrap"] for entry in timeline[1:])


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_more_noise_never_raises_final_trust(seed):
    finals = []
    for r in (0.8, 0.6, 0.4):
        data = copy.deepcopy(SMALL)
        data["profiles"]["N2"] = r
        finals.append(run(from_dict(data), seed=seed).final["N2"][0])
    assert finals[0] >= finals[1] >= finals[2]
