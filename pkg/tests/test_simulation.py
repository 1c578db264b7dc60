import logging
import os
import random
from decimal import Decimal

import pytest

from hcmvne import EmbedParams, SubstrateNetwork, VirtualNetwork, VnRequest, revenue
from hcmvne.model import demands
from hcmvne.simulation import (
    REPORT_HEADER,
    acceptance_ratio,
    average_cost,
    average_revenue,
    format_report_csv,
    read_report_csv,
    revenue_cost_ratio,
    run_simulation,
    sample_row,
    write_report_csv,
)
from hcmvne.workload import WaxmanParams, WorkloadParams, generate_substrate, generate_workload
from conftest import random_sn


def one_host(cpu=10):
    sn = SubstrateNetwork()
    sn.add_node(0, cpu)
    return sn


def req(i, arrival, lifetime, cpu=10):
    return VnRequest(i, VirtualNetwork.build({0: cpu}, []), arrival, lifetime)


def test_empty_workload():
    rep = run_simulation(one_host(), [], "hcm", EmbedParams(), 30000, 1000)
    assert len(rep.samples) == 31
    assert all(s.offered == 0 and s.accepted == 0 for s in rep.samples)
    assert acceptance_ratio(rep, 30000) == 1.0
    assert average_revenue(rep, 30000) == 0.0
    assert revenue_cost_ratio(rep, 30000) == 1.0
    rows = format_report_csv(rep).splitlines()
    assert rows[0] == ",".join(REPORT_HEADER)
    assert rows[1] == "0,0,0,1.000000,0.000000,0.000000,1.000000"
    assert len(rows) == 32


def test_single_request_revenue():
    r = req(0, 100, 500, cpu=7)
    rep = run_simulation(one_host(), [r], "hcm", EmbedParams(), 1000, 100)
    assert acceptance_ratio(rep, 1000) == 1.0
    assert average_revenue(rep, 1000) == pytest.approx(7 * 500 / 1000)
    assert average_revenue(rep, 300) == pytest.approx(7 * 200 / 300)
    assert average_revenue(rep, 0) == 0.0
    assert acceptance_ratio(rep, 50) == 1.0  # nothing offered yet


def test_two_of_four_accepted():
    # single host of cpu 10: overlapping requests are turned away
    wl = [req(0, 0, 100), req(1, 10, 100), req(2, 100, 50), req(3, 120, 5)]
    rep = run_simulation(one_host(), wl, "hcm", EmbedParams(), 200, 10)
    assert [r.accepted for r in rep.requests] == [True, False, True, False]
    assert acceptance_ratio(rep, 200) == 0.5


def test_departure_frees_before_simultaneous_arrival():
    wl = [req(0, 0, 10), req(1, 10, 10)]
    rep = run_simulation(one_host(), wl, "hcm", EmbedParams(), 30, 10)
    assert [r.accepted for r in rep.requests] == [True, True]


def test_rejected_only():
    rep = run_simulation(one_host(5), [req(0, 0, 10)], "hcm", EmbedParams(), 20, 10)
    assert acceptance_ratio(rep, 20) == 0.0
    assert average_revenue(rep, 20) == 0.0
    assert revenue_cost_ratio(rep, 20) == 1.0


def test_metric_time_bounds():
    rep = run_simulation(one_host(), [], "hcm", EmbedParams(), 100, 10)
    with pytest.raises(ValueError):
        acceptance_ratio(rep, 101)


def test_interval_not_dividing_horizon():
    rep = run_simulation(one_host(), [], "greedy", EmbedParams(), 25, 10)
    assert [s.time for s in rep.samples] == [0, 10, 20, 25]


def test_horizon_before_last_arrival_warns(caplog):
    wl = [req(0, 0, 5), req(1, 50, 5)]
    with caplog.at_level(logging.WARNING):
        rep = run_simulation(one_host(), wl, "hcm", EmbedParams(), 20, 10)
    assert "truncating" in caplog.text
    assert [r.vnr_id for r in rep.requests] == [0]


def test_bad_arguments():
    with pytest.raises(ValueError):
        run_simulation(one_host(), [], "nope", EmbedParams(), 10)
    with pytest.raises(ValueError):
        run_simulation(one_host(), [req(0, 5, 1), req(1, 4, 1)], "hcm", EmbedParams(), 10)


def small_case(seed=1, n=40):
    sn = generate_substrate(WaxmanParams(15, target_link_count=30), [3720, 5320], (50, 100), seed)
    wl = generate_workload(WorkloadParams(n, (2, 6), seed=seed))
    return sn, wl


@pytest.mark.parametrize("algorithm", ["hcm", "no-coarsen", "greedy"])
def test_resource_closure_and_drain(algorithm):
    sn, wl = small_case()
    checked = []

    def observe(t, net, active):
        cpu_used = {n: node.total_cpu - node.residual_cpu for n, node in net.nodes.items()}
        bw_used = {l: link.total_bw - link.residual_bw for l, link in net.links.items()}
        cpu_expect = {n: Decimal(0) for n in net.nodes}
        bw_expect = {l: Decimal(0) for l in net.links}
        for r, m in active.values():
            assert r.arrival <= t < r.departure
            c, b = demands(r.graph, m)
            for k, v in c.items():
                cpu_expect[k] += v
            for k, v in b.items():
                bw_expect[k] += v
        assert cpu_used == cpu_expect
        assert bw_used == bw_expect
        checked.append(t)

    last = max(r.departure for r in wl)
    horizon = last + 100
    rep = run_simulation(sn, wl, algorithm, EmbedParams(), horizon, 50, observer=observe)
    assert len(checked) == len(rep.samples)
    assert all(n.residual_cpu == n.total_cpu for n in sn.nodes.values())
    assert all(l.residual_bw == l.total_bw for l in sn.links.values())


def test_samples_agree_with_request_log():
    sn, wl = small_case(seed=2, n=60)
    rep = run_simulation(sn, wl, "hcm", EmbedParams(), 400, 25)
    for s in rep.samples:
        row = sample_row(s)
        assert float(row[3]) == pytest.approx(acceptance_ratio(rep, s.time), abs=1e-6)
        assert float(row[4]) == pytest.approx(average_revenue(rep, s.time), abs=1e-6)
        assert float(row[5]) == pytest.approx(average_cost(rep, s.time), abs=1e-6)
        assert float(row[6]) == pytest.approx(revenue_cost_ratio(rep, s.time), abs=1e-6)
    # cumulative revenue = sum of revenue x time alive within the horizon
    expect = sum((revenue(r) * min(r.lifetime, 400 - r.arrival)
                  for r, rec in zip(wl, rep.requests) if rec.accepted), Decimal(0))
    assert rep.samples[-1].revenue == expect
    offered = [s.offered for s in rep.samples]
    accepted = [s.accepted for s in rep.samples]
    assert offered == sorted(offered) and accepted == sorted(accepted)
    assert all(a <= o for a, o in zip(accepted, offered))
    revs = [s.revenue for s in rep.samples]
    assert revs == sorted(revs)


def test_csv_determinism_and_round_trip(tmp_path):
    texts = []
    for _ in range(2):
        sn, wl = small_case(seed=3)
        rep = run_simulation(sn, wl, "hcm", EmbedParams(), 500, 50)
        write_report_csv(rep, tmp_path / "r.csv")
        texts.append((tmp_path / "r.csv").read_bytes())
    assert texts[0] == texts[1]
    rows = read_report_csv(tmp_path / "r.csv")
    assert [r["time"] for r in rows] == list(range(0, 501, 50))
    assert rows[-1]["offered"] == rep.samples[-1].offered


def test_missing_column_named(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,offered,accepted,acceptance_ratio,avg_cost\n0,0,0,1,0\n")
    with pytest.raises(ValueError, match="avg_revenue, rc_ratio"):
        read_report_csv(path)


def test_interrupted_write_leaves_nothing(tmp_path, monkeypatch):
    rep = run_simulation(one_host(), [], "hcm", EmbedParams(), 10, 5)
    target = tmp_path / "out.csv"

    def boom(src, dst):
        raise OSError("disk gone")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError, match="out.csv"):
        write_report_csv(rep, target)
    assert list(tmp_path.iterdir()) == []


def test_substrate_mutated_only_by_simulation_events():
    rng = random.Random(4)
    sn = random_sn(rng, 8, cpu=(50, 100), bw=(50, 100))
    start = sn.copy()
    wl = [VnRequest(i, VirtualNetwork.build({0: 10, 1: 10}, [(0, 1, 5)]), i * 3, 20) for i in range(10)]
    run_simulation(sn, wl, "no-coarsen", EmbedParams(), 200, 50)
    assert sn == start and sn.residual_cpu() == start.residual_cpu()
