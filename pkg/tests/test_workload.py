import random
import statistics
from pathlib import Path

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from hcmvne import SubstrateNetwork, VirtualNetwork
from hcmvne.workload import (
    BriteFormatError,
    ManifestError,
    ManifestRow,
    WaxmanParams,
    WorkloadParams,
    format_brite,
    generate_substrate,
    generate_vn,
    generate_workload,
    parse_brite,
    read_brite,
    read_manifest,
    read_manifest_rows,
    write_brite,
    write_manifest,
    write_workload,
)
from conftest import DATA


def to_nx(net):
    g = nx.Graph()
    g.add_nodes_from(net.nodes)
    g.add_edges_from((l.u, l.v) for l in net.links.values())
    return g


def golden_substrate():
    sn = SubstrateNetwork()
    sn.add_node(0, 3720, x=1.5, y=2)
    sn.add_node(1, 5320, x=10, y=20.25)
    sn.add_node(2, 3720)
    sn.add_link(0, 1, 75.5)
    sn.add_link(1, 2, 50)
    return sn


def golden_vn():
    vn = VirtualNetwork()
    vn.add_node(0, 500, pos=(3, 4))
    vn.add_node(1, 2500, pos=(0, 0))
    vn.add_link(0, 1, 12.34)
    return vn


# -- generators --------------------------------------------------------------


@pytest.mark.parametrize("n,m,seed", [(50, 150, 1), (200, 1000, 7), (10, 9, 3), (6, 15, 2)])
def test_substrate_exact_link_count_and_connected(n, m, seed):
    sn = generate_substrate(WaxmanParams(n, target_link_count=m), [3720, 5320], (50, 100), seed)
    g = to_nx(sn)
    assert len(sn.nodes) == n and len(sn.links) == m
    assert nx.is_connected(g)
    assert {node.total_cpu for node in sn.nodes.values()} <= {3720, 5320}
    assert all(50 <= l.total_bw <= 100 for l in sn.links.values())


def test_substrate_impossible_link_counts():
    with pytest.raises(ValueError):
        generate_substrate(WaxmanParams(5, target_link_count=11), [1], (1, 2), 0)
    with pytest.raises(ValueError):
        generate_substrate(WaxmanParams(5, target_link_count=3), [1], (1, 2), 0)


def test_waxman_prefers_short_links():
    sn = generate_substrate(WaxmanParams(100, target_link_count=300), [1], (1, 2), 4)
    present = [((sn.nodes[l.u].x - sn.nodes[l.v].x) ** 2 + (sn.nodes[l.u].y - sn.nodes[l.v].y) ** 2) ** 0.5
               for l in sn.links.values()]
    everything = [((a.x - b.x) ** 2 + (a.y - b.y) ** 2) ** 0.5
                  for a in sn.nodes.values() for b in sn.nodes.values() if a.id < b.id]
    assert statistics.mean(present) < 0.7 * statistics.mean(everything)


def test_vn_density_and_ranges():
    densities = []
    rng = random.Random(5)
    for _ in range(300):
        n = rng.randint(5, 10)
        vn = generate_vn(WaxmanParams(n, target_density=0.5), [500, 1000, 2000, 2500], (1, 50), rng.getrandbits(32))
        assert nx.is_connected(to_nx(vn))
        assert set(vn.nodes.values()) <= {500, 1000, 2000, 2500}
        assert all(1 <= l.bw <= 50 for l in vn.links.values())
        densities.append(vn.density())
    assert abs(statistics.mean(densities) - 0.5) < 0.05


def test_workload_distributions():
    wl = generate_workload(WorkloadParams(3000, seed=11))
    assert [r.id for r in wl] == list(range(3000))
    arrivals = [r.arrival for r in wl]
    assert arrivals == sorted(arrivals)
    # mean inter-arrival 1 / rate = 10; std of the mean over 3000 draws is ~0.18
    assert abs(arrivals[-1] / 3000 - 10) < 0.8
    lifetimes = [r.lifetime for r in wl]
    assert min(lifetimes) >= 300 and max(lifetimes) <= 700
    assert abs(statistics.mean(lifetimes) - 500) < 10
    sizes = [len(r.graph.nodes) for r in wl]
    assert min(sizes) == 2 and max(sizes) == 20


def test_workload_determinism():
    a = generate_workload(WorkloadParams(50, (2, 10), seed=3))
    b = generate_workload(WorkloadParams(50, (2, 10), seed=3))
    c = generate_workload(WorkloadParams(50, (2, 10), seed=4))
    assert [(r.arrival, r.lifetime, format_brite(r.graph)) for r in a] == \
        [(r.arrival, r.lifetime, format_brite(r.graph)) for r in b]
    assert [r.arrival for r in a] != [r.arrival for r in c]


# -- BRITE -------------------------------------------------------------------


def test_brite_golden_bytes(tmp_path):
    assert format_brite(golden_substrate()) == (DATA / "substrate_golden.brite").read_text()
    assert format_brite(golden_vn()) == (DATA / "vn_golden.brite").read_text()
    write_brite(golden_substrate(), tmp_path / "s.brite")
    assert (tmp_path / "s.brite").read_bytes() == (DATA / "substrate_golden.brite").read_bytes()


def test_brite_golden_parse():
    assert read_brite(DATA / "substrate_golden.brite") == golden_substrate()
    assert read_brite(DATA / "vn_golden.brite", kind="virtual") == golden_vn()


@settings(max_examples=30)
@given(st.integers(0, 2**32), st.integers(2, 12))
def test_brite_round_trip_generated(seed, n):
    vn = generate_vn(WaxmanParams(n, target_density=0.5), [500, 1000], (1, 50), seed)
    text = format_brite(vn)
    assert parse_brite(text, "virtual") == vn
    assert format_brite(parse_brite(text, "virtual")) == text


@pytest.mark.parametrize("text,lineno,fragment", [
    ("", 1, "Topology"),
    ("Topology: ( 1 Nodes, 0 Edges )\n\nNodes: ( 2 )\n", 3, "Nodes"),
    ("Topology: ( 1 Nodes, 0 Edges )\n\nNodes: ( 1 )\n0\t0\t0\t0\t0\t0\t5\n", 4, "8 tab-separated"),
    ("Topology: ( 1 Nodes, 0 Edges )\n\nNodes: ( 1 )\n0\t0\t0\t0\t0\t0\t0\tx\n", 4, "cpu"),
    ("Topology: ( 2 Nodes, 1 Edges )\n\nNodes: ( 2 )\n0\t0\t0\t0\t0\t0\t0\t5\n1\t0\t0\t0\t0\t0\t0\t5\n"
     "\nEdges: ( 1 )\n0\t0\t0\t0\t0\t5\t0\t0\t0\n", 8, "self-loop"),
    ("Topology: ( 1 Nodes, 0 Edges )\n\nNodes: ( 1 )\n0\t0\t0\t0\t0\t0\t0\t5\n\nEdges: ( 0 )\nextra\n", 7, "trailing"),
])
def test_brite_errors_name_line(text, lineno, fragment):
    with pytest.raises(BriteFormatError) as info:
        parse_brite(text, "virtual" if "self-loop" in fragment else "substrate")
    assert info.value.lineno == lineno
    assert fragment in str(info.value)


# -- manifest ----------------------------------------------------------------


def test_manifest_round_trip(tmp_path):
    wl = generate_workload(WorkloadParams(20, (2, 6), seed=2))
    manifest = write_workload(wl, tmp_path)
    back = read_manifest(manifest)
    assert [(r.id, r.arrival, r.lifetime) for r in back] == [(r.id, r.arrival, r.lifetime) for r in wl]
    assert all(a.graph == b.graph for a, b in zip(back, wl))
    first = manifest.read_bytes()
    write_workload(back, tmp_path)
    assert manifest.read_bytes() == first


def test_empty_manifest_is_header_only(tmp_path):
    path = write_workload([], tmp_path)
    assert path.read_text() == "vnr_id,brite_file,arrival,lifetime\n"
    assert read_manifest(path) == []


@pytest.mark.parametrize("body,row,fragment", [
    ("id,file,a,l\n", 0, "header"),
    ("vnr_id,brite_file,arrival,lifetime\n0,x.brite,5\n", 1, "4 columns"),
    ("vnr_id,brite_file,arrival,lifetime\n0,x.brite,five,3\n", 1, "integers"),
    ("vnr_id,brite_file,arrival,lifetime\n0,x.brite,5,3\n1,y.brite,4,3\n", 2, "decreases"),
])
def test_manifest_errors(tmp_path, body, row, fragment):
    path = tmp_path / "m.csv"
    path.write_text(body)
    with pytest.raises(ManifestError) as info:
        read_manifest_rows(path)
    assert info.value.row == row and fragment in str(info.value)


def test_manifest_missing_vn_file(tmp_path):
    write_manifest([ManifestRow(0, "nope.brite", 0, 10)], tmp_path / "m.csv")
    with pytest.raises(ManifestError, match="missing VN file"):
        read_manifest(tmp_path / "m.csv")
