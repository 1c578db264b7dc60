"""Coarsen-then-embed driver with backtracking, plus two comparison baselines.

The driver never mutates the substrate it is given. Partial placements are
reserved on scratch copies of the residual capacities so that later nodes in
the search see the effect of earlier ones; the caller allocates the returned
map on success.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Hashable, Optional

from hcmvne.coarsening import CoarsenedGraph, coarsen
from hcmvne.model import ZERO, EmbeddingMap, EmbedParams, SubstrateNetwork, VirtualNetwork
from hcmvne.refinement import optimize

logger = logging.getLogger(__name__)

NO_CANDIDATES = "no-candidates"
BACKTRACK_LIMIT = "backtrack-limit"
NO_PATH = "no-path"


@dataclass
class EmbedOutcome:
    success: bool
    mapping: Optional[EmbeddingMap]
    backtrack_count: int
    reason: Optional[str] = None
    coarsened: Optional[CoarsenedGraph] = None
    order: list = field(default_factory=list)
    hosts: dict = field(default_factory=dict)


def coarsening_caps(sn: SubstrateNetwork, residual_cpu=None, residual_bw=None) -> tuple[Decimal, Decimal]:
    """Largest residual CPU on any node, largest residual bandwidth incident to any node."""
    cpu = sn.residual_cpu() if residual_cpu is None else residual_cpu
    bw = sn.residual_bw() if residual_bw is None else residual_bw
    cpu_max = max(cpu.values(), default=ZERO)
    bw_max = ZERO
    for n, nbrs in sn.adjacency.items():
        bw_max = max(bw_max, sum((bw[l] for l in nbrs.values()), ZERO))
    return cpu_max, bw_max


def embed_order(cg: CoarsenedGraph) -> list[int]:
    """Breadth-first order from the block with the most cpu + external bandwidth.

    Each BFS level is sorted by the same resource total, descending, ties by id.
    Disconnected remainders restart from their own heaviest block.
    """
    weight = {c: cg.cpu(c) + cg.external_bw(c) for c in cg.ids()}
    key = lambda c: (-weight[c], c)
    remaining = set(weight)
    order: list[int] = []
    while remaining:
        root = min(remaining, key=key)
        seen = {root}
        level = [root]
        while level:
            level.sort(key=key)
            order.extend(level)
            remaining.difference_update(level)
            nxt = set()
            for c in level:
                nxt.update(n for n in cg.neighbors(c) if n not in seen)
            seen |= nxt
            level = list(nxt)
    return order


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------


def _bfs(sn: SubstrateNetwork, source: int, need: Decimal, max_hops: int,
         residual_bw: dict, stop: Optional[int] = None) -> dict[int, tuple[int, Optional[int], Optional[int]]]:
    """Hop-limited BFS over links with residual >= need.

    Returns ``node -> (hops, parent, link)``. Frontiers are expanded in
    ascending node order so each node's parent is the lowest-id node one hop
    closer to the source.
    """
    adj = sn.sorted_adjacency()
    tree = {source: (0, None, None)}
    frontier = [source]
    for hops in range(1, max_hops + 1):
        nxt = []
        for u in frontier:
            for w, lid in adj[u]:
                if w in tree or residual_bw[lid] < need:
                    continue
                tree[w] = (hops, u, lid)
                nxt.append(w)
        if not nxt or (stop is not None and stop in tree):
            break
        frontier = sorted(nxt)
    return tree


def route_virtual_link(sn: SubstrateNetwork, bw, source: int, target: int, max_hops: int,
                       residual_bw: Optional[dict] = None) -> Optional[tuple[int, ...]]:
    """Fewest-hop path from *source* to *target* whose links all have residual >= *bw*.

    Returns a tuple of substrate link ids, ``()`` when the endpoints coincide,
    or ``None`` when no such path exists within *max_hops*.
    """
    if source == target:
        return ()
    res = sn.residual_bw() if residual_bw is None else residual_bw
    tree = _bfs(sn, source, Decimal(bw), max_hops, res, stop=target)
    if target not in tree:
        return None
    path = []
    node = target
    while node != source:
        _, parent, lid = tree[node]
        path.append(lid)
        node = parent
    return tuple(reversed(path))


# ---------------------------------------------------------------------------
# Candidate lists
# ---------------------------------------------------------------------------


def _available(sn: SubstrateNetwork, s: int, cpu: dict, bw: dict) -> Decimal:
    return cpu[s] + sum((bw[l] for l in sn.adjacency[s].values()), ZERO)


def _candidates(sn: SubstrateNetwork, need_cpu: Decimal, anchors: list[tuple[int, Decimal, Decimal]],
                used: set, max_hops: int, cpu: dict, bw: dict) -> list[int]:
    if not anchors:
        pool = [s for s in sn.nodes if s not in used and cpu[s] >= need_cpu]
        return sorted(pool, key=lambda s: (-_available(sn, s, cpu, bw), s))
    trees = [(need, _bfs(sn, host, floor, max_hops, bw)) for host, need, floor in anchors]
    common = set(trees[0][1])
    for _, tree in trees[1:]:
        common &= tree.keys()
    pool = [s for s in common if s not in used and cpu[s] >= need_cpu]
    link_cost = {s: sum((need * tree[s][0] for need, tree in trees), ZERO) for s in pool}
    return sorted(pool, key=lambda s: (link_cost[s], -_available(sn, s, cpu, bw), s))


def _anchors(cg: CoarsenedGraph, cid: int, hosts: dict, bundle_check: str = "largest"
             ) -> list[tuple[int, Decimal, Decimal]]:
    """(host, bundle bandwidth, path floor) for every already placed neighbour block.

    The floor is the residual every link of a path to that host must have.
    """
    vn = cg.vn
    largest: dict[int, Decimal] = {}
    for v in cg.members[cid]:
        for w, lid in vn.adjacency[v].items():
            other = cg.owner[w]
            if other != cid and other in hosts:
                largest[other] = max(largest.get(other, ZERO), vn.links[lid].bw)
    out = []
    for other, bw in sorted(cg.neighbors(cid).items()):
        if other in hosts:
            out.append((hosts[other], bw, bw if bundle_check == "aggregate" else largest[other]))
    return out


def build_candidates(cg: CoarsenedGraph, cid: int, hosts: dict, sn: SubstrateNetwork, p: EmbedParams,
                     residual_cpu: Optional[dict] = None, residual_bw: Optional[dict] = None) -> list[int]:
    """Ordered substrate nodes that can host block *cid* given the placed blocks in *hosts*.

    With no placed neighbours every node with enough CPU qualifies, richest
    first. Otherwise a node must also reach every neighbour's host within
    ``p.max_hops`` over links able to carry the largest virtual link between
    the two blocks (the whole bundle with ``bundle_check="aggregate"``); such
    nodes are ordered by bundle bandwidth times hop count.
    Nodes already hosting another block are excluded.
    """
    cpu = sn.residual_cpu() if residual_cpu is None else residual_cpu
    bw = sn.residual_bw() if residual_bw is None else residual_bw
    return _candidates(sn, cg.cpu(cid), _anchors(cg, cid, hosts, p.bundle_check), set(hosts.values()),
                       p.max_hops, cpu, bw)


# ---------------------------------------------------------------------------
# Backtracking search
# ---------------------------------------------------------------------------


class _Search:
    def __init__(self, sn: SubstrateNetwork, cg: CoarsenedGraph, order: list[int], p: EmbedParams):
        self.sn = sn
        self.cg = cg
        self.vn = cg.vn
        self.order = order
        self.p = p
        self.max_hops = p.max_hops
        self.limit = p.backtrack_limit(len(order))
        self.cpu = sn.residual_cpu()
        self.bw = sn.residual_bw()
        self.count = 0
        self.hit_limit = False
        self.hosts: dict[int, int] = {}
        self.paths: dict[int, tuple] = {}
        self.block_cpu = {c: cg.cpu(c) for c in order}
        position = {c: i for i, c in enumerate(order)}
        # virtual links from each block back to blocks placed before it
        self.back_links: dict[int, list[int]] = {c: [] for c in order}
        for lid in sorted(self.vn.links):
            l = self.vn.links[lid]
            a, b = cg.owner[l.u], cg.owner[l.v]
            if a != b:
                later = a if position[a] > position[b] else b
                self.back_links[later].append(lid)

    def run(self) -> bool:
        return self._embed(0)

    def _embed(self, i: int) -> bool:
        if i == len(self.order):
            return True
        cid = self.order[i]
        anchors = _anchors(self.cg, cid, self.hosts, self.p.bundle_check)
        candidates = _candidates(self.sn, self.block_cpu[cid], anchors, set(self.hosts.values()),
                                 self.max_hops, self.cpu, self.bw)
        for s in candidates:
            if self._add(cid, s):
                if self._embed(i + 1):
                    return True
                self._delete(cid, s)
            if self.limit is not None and self.count > self.limit:
                self.hit_limit = True
                return False
        self.count += 1
        return False

    def _add(self, cid: int, s: int) -> bool:
        self.cpu[s] -= self.block_cpu[cid]
        self.hosts[cid] = s
        routed = []
        for lid in self.back_links[cid]:
            l = self.vn.links[lid]
            src = self.hosts[self.cg.owner[l.u]]
            dst = self.hosts[self.cg.owner[l.v]]
            path = route_virtual_link(self.sn, l.bw, src, dst, self.max_hops, self.bw)
            if path is None:
                for done in routed:
                    self._unroute(done)
                del self.hosts[cid]
                self.cpu[s] += self.block_cpu[cid]
                return False
            for sl in path:
                self.bw[sl] -= l.bw
            self.paths[lid] = path
            routed.append(lid)
        return True

    def _unroute(self, lid: int) -> None:
        need = self.vn.links[lid].bw
        for sl in self.paths.pop(lid):
            self.bw[sl] += need

    def _delete(self, cid: int, s: int) -> None:
        for lid in self.back_links[cid]:
            self._unroute(lid)
        del self.hosts[cid]
        self.cpu[s] += self.block_cpu[cid]

    def mapping(self) -> EmbeddingMap:
        node_map = {v: self.hosts[c] for v, c in self.cg.owner.items()}
        link_map = {lid: self.paths.get(lid, ()) for lid in sorted(self.vn.links)}
        return EmbeddingMap(node_map, link_map, self.max_hops)


def _run(vn: VirtualNetwork, sn: SubstrateNetwork, cg: CoarsenedGraph, p: EmbedParams) -> EmbedOutcome:
    order = embed_order(cg)
    search = _Search(sn, cg, order, p)
    if search.run():
        return EmbedOutcome(True, search.mapping(), search.count, None, cg, order, dict(search.hosts))
    reason = BACKTRACK_LIMIT if search.hit_limit else NO_CANDIDATES
    return EmbedOutcome(False, None, search.count, reason, cg, order)


def hcm_embed(vn: VirtualNetwork, sn: SubstrateNetwork, p: EmbedParams) -> EmbedOutcome:
    """Coarsen, refine, then place blocks one per substrate node with backtracking."""
    if not vn.nodes:
        return EmbedOutcome(True, EmbeddingMap({}, {}, p.max_hops), 0)
    cpu_max, bw_max = coarsening_caps(sn)
    if p.coarsening_enabled and cpu_max > 0 and bw_max > 0:
        cg = optimize(coarsen(vn, cpu_max, bw_max))
    else:
        cg = CoarsenedGraph.singletons(vn, cpu_max, bw_max)
    return _run(vn, sn, cg, p)


def baseline_no_coarsen(vn: VirtualNetwork, sn: SubstrateNetwork, p: EmbedParams) -> EmbedOutcome:
    """The same search with every virtual node as its own block."""
    return hcm_embed(vn, sn, replace(p, coarsening_enabled=False))


def baseline_greedy(vn: VirtualNetwork, sn: SubstrateNetwork, p: EmbedParams) -> EmbedOutcome:
    """Two-stage greedy: biggest virtual node onto the richest free substrate node, then route links.

    One virtual node per substrate node. No re-mapping on link failure.
    """
    cpu = sn.residual_cpu()
    bw = sn.residual_bw()
    node_map: dict[Hashable, int] = {}
    used: set[int] = set()
    for v in sorted(vn.nodes, key=lambda v: (-vn.nodes[v], v)):
        need = vn.nodes[v]
        pool = [s for s in sn.nodes if s not in used and cpu[s] >= need]
        if not pool:
            return EmbedOutcome(False, None, 0, NO_CANDIDATES)
        s = min(pool, key=lambda s: (-cpu[s], s))
        cpu[s] -= need
        used.add(s)
        node_map[v] = s
    link_map = {}
    for lid in sorted(vn.links):
        l = vn.links[lid]
        path = route_virtual_link(sn, l.bw, node_map[l.u], node_map[l.v], p.max_hops, bw)
        if path is None:
            return EmbedOutcome(False, None, 0, NO_PATH)
        for sl in path:
            bw[sl] -= l.bw
        link_map[lid] = path
    return EmbedOutcome(True, EmbeddingMap(node_map, link_map, p.max_hops), 0)


ALGORITHMS = {
    "hcm": hcm_embed,
    "no-coarsen": baseline_no_coarsen,
    "greedy": baseline_greedy,
}
