import random
from decimal import Decimal

import pytest
from hypothesis import given, settings, strategies as st

from hcmvne.coarsening import CoarsenedGraph, coarsen
from hcmvne.refinement import RefineTrace, boundary_nodes, crossing_bandwidth, move_candidate, optimize
from conftest import random_vn, two_triangles
from oracles import crossing_bw


def fig3(ad_bw=10, tri_bw=20, cpu_max=40):
    vn = two_triangles(ad_bw=ad_bw, tri_bw=tri_bw)
    return CoarsenedGraph(vn, [set("abc"), set("def")], Decimal(cpu_max), Decimal(1000))


def test_boundary_nodes_fig3():
    cg = fig3()
    assert boundary_nodes(cg, 0) == {"a"}
    assert boundary_nodes(cg, 1) == {"d"}
    with pytest.raises(KeyError):
        boundary_nodes(cg, 5)


def test_boundary_extremes(fig_vn):
    whole = CoarsenedGraph(fig_vn, [set("abcdef")])
    assert boundary_nodes(whole, 0) == set()
    single = CoarsenedGraph.singletons(fig_vn)
    assert set().union(*(boundary_nodes(single, c) for c in single.ids())) == set("abcdef")


def test_crossing_bandwidth_readout(fig_vn):
    assert crossing_bandwidth(fig3()) == 10
    assert crossing_bandwidth(CoarsenedGraph(fig_vn, [set("abcdef")])) == 0
    assert crossing_bandwidth(CoarsenedGraph.singletons(fig_vn)) == fig_vn.total_bw()


def test_heavy_cross_link_moves_a():
    cg = fig3(ad_bw=50, tri_bw=20)
    cand = move_candidate(cg, "a")
    assert (cand.source, cand.target, cand.gain) == (0, 1, Decimal(10))
    trace = RefineTrace()
    out = optimize(cg, trace)
    assert set(map(frozenset, out.members.values())) == {frozenset("bc"), frozenset("adef")}
    assert [(a.kind, a.node) for a in trace.actions] == [("move", "a")]
    assert out.crossing_bandwidth() == 40
    assert cg.partition() == [frozenset("abc"), frozenset("def")]  # input untouched


def test_cpu_cap_forces_swap_or_nothing():
    # target block cannot take a fourth member, so a move is impossible
    cg = fig3(ad_bw=50, tri_bw=20, cpu_max=30)
    out = optimize(cg)
    assert out.crossing_bandwidth() <= cg.crossing_bandwidth()
    for cid in out.ids():
        assert out.cpu(cid) <= 30


def test_optimal_partition_is_fixed_point():
    cg = fig3(ad_bw=10, tri_bw=20)
    trace = RefineTrace()
    out = optimize(cg, trace)
    assert out.partition() == cg.partition()
    assert trace.actions == [] and trace.sweeps == 1


def replay_and_check(cg, trace):
    """Apply the recorded actions to a plain partition, checking each one independently."""
    vn = cg.vn
    blocks = {c: set(m) for c, m in cg.members.items()}

    def block_of(v):
        return next(c for c, m in blocks.items() if v in m)

    def caps_ok(cid):
        members = blocks.get(cid)
        if not members:
            return True
        cpu = sum(vn.nodes[v] for v in members)
        ext = sum(l.bw for l in vn.links.values() if (l.u in members) != (l.v in members))
        return cpu <= cg.cpu_max and ext <= cg.bw_max

    current = crossing_bw(vn, blocks.values())
    for act in trace.actions:
        assert block_of(act.node) == act.source
        blocks[act.source].discard(act.node)
        blocks[act.target].add(act.node)
        if act.kind == "swap":
            assert block_of(act.partner) == act.target
            blocks[act.target].discard(act.partner)
            blocks[act.source].add(act.partner)
        blocks = {c: m for c, m in blocks.items() if m}
        after = crossing_bw(vn, blocks.values())
        assert after < current, act
        assert after == act.crossing_after
        assert caps_ok(act.source) and caps_ok(act.target)
        current = after
    return blocks


def random_partition(rng, vn, k):
    nodes = sorted(vn.nodes)
    rng.shuffle(nodes)
    groups = [[] for _ in range(k)]
    for i, v in enumerate(nodes):
        groups[i % k if i < k else rng.randrange(k)].append(v)
    return groups


@settings(max_examples=200)
@given(st.integers(0, 2**32), st.integers(2, 10))
def test_refinement_actions_strictly_improve(seed, n):
    rng = random.Random(seed)
    vn = random_vn(rng, n, p=rng.random(), cpu=(1, 20), bw=(1, 50))
    groups = random_partition(rng, vn, rng.randint(1, n))
    loose = CoarsenedGraph(vn, groups)
    # caps at or above the starting blocks so the input is feasible
    cpu_max = max(loose.cpu(c) for c in loose.ids()) + rng.randint(0, 20)
    bw_max = max(loose.external_bw(c) for c in loose.ids()) + rng.randint(0, 60)
    cg = CoarsenedGraph(vn, groups, Decimal(cpu_max), Decimal(bw_max))
    trace = RefineTrace()
    out = optimize(cg, trace)
    blocks = replay_and_check(cg, trace)
    assert sorted(map(sorted, blocks.values())) == sorted(map(sorted, out.members.values()))
    assert out.crossing_bandwidth() <= cg.crossing_bandwidth()
    assert (out.crossing_bandwidth() == cg.crossing_bandwidth()) == (not trace.actions)
    assert trace.sweeps <= 10 * len(vn.nodes)
    # no empty blocks survive, and no block is left over a cap
    assert all(out.members.values())
    assert not out.flagged


@settings(max_examples=50)
@given(st.integers(0, 2**32))
def test_refine_after_coarsen(seed):
    rng = random.Random(seed)
    vn = random_vn(rng, rng.randint(2, 10))
    cg = coarsen(vn, 60, 200)
    trace = RefineTrace()
    out = optimize(cg, trace)
    replay_and_check(cg, trace)
    assert out.crossing_bandwidth() <= cg.crossing_bandwidth()
