"""Heavy clique matching: merge virtual nodes into dense sub-networks.

A :class:`CoarsenedGraph` is a partition of a virtual network's nodes. Each
block (coarsened node) is destined for a single substrate node, so the virtual
links inside a block cost no substrate bandwidth; virtual links between two
blocks are bundled into coarsened links.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Hashable, Iterable, Optional

from hcmvne.model import ZERO, EmbeddingMap, StructuralError, VirtualNetwork, amount


def link_density(member_nodes, internal_link_count: int) -> Fraction:
    """How close a sub-network is to a clique: ``2|L| / (|N|(|N|-1))``.

    A single node counts as a clique (density 1).
    """
    n = len(member_nodes)
    if n == 0:
        raise ValueError("link density of an empty node set")
    if n == 1:
        return Fraction(1)
    return Fraction(2 * internal_link_count, n * (n - 1))


@dataclass(frozen=True)
class CoarsenedNode:
    id: int
    members: frozenset
    internal_links: frozenset
    cpu: Decimal
    external_bw: Decimal

    @property
    def resources(self) -> Decimal:
        return self.cpu + self.external_bw


@dataclass(frozen=True)
class CoarsenedLink:
    id: int
    endpoints: tuple[int, int]
    members: frozenset
    bw: Decimal


def _sort_key(value):
    # mixed id types are not expected, but keep ordering total
    return (type(value).__name__, value)


class CoarsenedGraph:
    """Partition of a virtual network under per-block CPU/bandwidth caps.

    The partition itself is ``members`` (block id -> set of virtual nodes) and
    its inverse ``owner``; everything else is derived on demand.
    """

    def __init__(self, vn: VirtualNetwork, groups: Iterable[Iterable[Hashable]],
                 cpu_max: Optional[Decimal] = None, bw_max: Optional[Decimal] = None):
        self.vn = vn
        self.cpu_max = cpu_max
        self.bw_max = bw_max
        self.members: dict[int, set] = {}
        self.owner: dict[Hashable, int] = {}
        for cid, group in enumerate(groups):
            block = set(group)
            if not block:
                raise StructuralError("empty coarsened node")
            self.members[cid] = block
            for v in block:
                if v in self.owner:
                    raise StructuralError(f"virtual node {v!r} in two coarsened nodes")
                if v not in vn.nodes:
                    raise StructuralError(f"unknown virtual node {v!r}")
                self.owner[v] = cid
        missing = set(vn.nodes) - set(self.owner)
        if missing:
            raise StructuralError(f"virtual nodes not covered: {sorted(missing, key=_sort_key)!r}")

    @classmethod
    def singletons(cls, vn: VirtualNetwork, cpu_max=None, bw_max=None) -> "CoarsenedGraph":
        return cls(vn, ([v] for v in sorted(vn.nodes, key=_sort_key)), cpu_max, bw_max)

    def copy(self) -> "CoarsenedGraph":
        cg = CoarsenedGraph.__new__(CoarsenedGraph)
        cg.vn, cg.cpu_max, cg.bw_max = self.vn, self.cpu_max, self.bw_max
        cg.members = {c: set(m) for c, m in self.members.items()}
        cg.owner = dict(self.owner)
        return cg

    # -- derived quantities -------------------------------------------------

    def ids(self) -> list[int]:
        return sorted(self.members)

    def cpu(self, cid: int) -> Decimal:
        return sum((self.vn.nodes[v] for v in self.members[cid]), ZERO)

    def external_bw(self, cid: int) -> Decimal:
        total = ZERO
        for v in self.members[cid]:
            for w, lid in self.vn.adjacency[v].items():
                if self.owner[w] != cid:
                    total += self.vn.links[lid].bw
        return total

    def internal_links(self, cid: int) -> frozenset:
        return frozenset(lid for lid, l in self.vn.links.items()
                         if self.owner[l.u] == cid and self.owner[l.v] == cid)

    def node(self, cid: int) -> CoarsenedNode:
        if cid not in self.members:
            raise KeyError(f"no coarsened node {cid}")
        return CoarsenedNode(cid, frozenset(self.members[cid]), self.internal_links(cid),
                             self.cpu(cid), self.external_bw(cid))

    @property
    def nodes(self) -> list[CoarsenedNode]:
        return [self.node(c) for c in self.ids()]

    def _bundles(self) -> dict[tuple[int, int], list[int]]:
        bundles: dict[tuple[int, int], list[int]] = {}
        for lid in sorted(self.vn.links):
            l = self.vn.links[lid]
            a, b = self.owner[l.u], self.owner[l.v]
            if a != b:
                bundles.setdefault((min(a, b), max(a, b)), []).append(lid)
        return bundles

    @property
    def links(self) -> list[CoarsenedLink]:
        out = []
        for i, (ends, lids) in enumerate(sorted(self._bundles().items())):
            bw = sum((self.vn.links[l].bw for l in lids), ZERO)
            out.append(CoarsenedLink(i, ends, frozenset(lids), bw))
        return out

    def neighbors(self, cid: int) -> dict[int, Decimal]:
        """Adjacent block -> total bandwidth of virtual links joining the two."""
        out: dict[int, Decimal] = {}
        for v in self.members[cid]:
            for w, lid in self.vn.adjacency[v].items():
                other = self.owner[w]
                if other != cid:
                    out[other] = out.get(other, ZERO) + self.vn.links[lid].bw
        return out

    def crossing_bandwidth(self) -> Decimal:
        return sum((l.bw for l in self.vn.links.values() if self.owner[l.u] != self.owner[l.v]), ZERO)

    def violates_caps(self, cid: int) -> bool:
        if self.cpu_max is not None and self.cpu(cid) > self.cpu_max:
            return True
        return self.bw_max is not None and self.external_bw(cid) > self.bw_max

    @property
    def flagged(self) -> list[int]:
        """Blocks over a cap; only unmergeable singletons end up here after coarsening."""
        return [c for c in self.ids() if self.violates_caps(c)]

    def partition(self) -> list[frozenset]:
        return sorted((frozenset(m) for m in self.members.values()),
                      key=lambda s: sorted(map(_sort_key, s)))

    def dump(self) -> str:
        """Annotated text form, stable enough for golden comparisons."""
        lines = [f"coarsened graph: {len(self.members)} nodes, caps cpu<={self.cpu_max} bw<={self.bw_max}"]
        for n in self.nodes:
            members = ",".join(str(v) for v in sorted(n.members, key=_sort_key))
            flag = " FLAGGED" if self.violates_caps(n.id) else ""
            lines.append(f"node {n.id}: {{{members}}} cpu={n.cpu} ext_bw={n.external_bw} "
                         f"internal={sorted(n.internal_links)}{flag}")
        for l in self.links:
            lines.append(f"link {l.id}: {l.endpoints[0]}-{l.endpoints[1]} bw={l.bw} members={sorted(l.members)}")
        return "\n".join(lines) + "\n"

    def __repr__(self) -> str:
        return f"CoarsenedGraph({len(self.members)} nodes over {len(self.vn.nodes)} virtual nodes)"


def coarsen(vn: VirtualNetwork, cpu_max, bw_max) -> CoarsenedGraph:
    """Repeated heavy clique matching rounds until a round merges nothing.

    In each round blocks are visited heaviest first (cpu + external bandwidth,
    then lowest id). A visited block that is still unmatched pairs with the
    unmatched neighbour whose union has the highest link density among unions
    within both caps; ties prefer the larger bandwidth absorbed by the merge,
    then the lower id. All pairs are merged at the end of the round.
    """
    cpu_max = amount(cpu_max)
    bw_max = amount(bw_max)
    if cpu_max <= 0 or bw_max <= 0:
        raise ValueError("coarsening caps must be positive")

    order = sorted(vn.nodes, key=_sort_key)
    index = {v: i for i, v in enumerate(order)}
    members = {i: {v} for i, v in enumerate(order)}
    cpu = {i: vn.nodes[v] for i, v in enumerate(order)}
    internal = {i: 0 for i in members}
    ext = {i: ZERO for i in members}
    # cross[a][b] = (link count, bandwidth) between blocks a and b
    cross: dict[int, dict[int, list]] = {i: {} for i in members}
    for l in vn.links.values():
        a, b = index[l.u], index[l.v]
        ext[a] += l.bw
        ext[b] += l.bw
        cross[a][b] = [1, l.bw]
        cross[b][a] = [1, l.bw]

    while True:
        visit = sorted(members, key=lambda c: (-(cpu[c] + ext[c]), c))
        matched: set[int] = set()
        pairs = []
        for ci in visit:
            if ci in matched:
                continue
            best = None
            for cj in sorted(cross[ci]):
                if cj in matched:
                    continue
                count, bw = cross[ci][cj]
                if cpu[ci] + cpu[cj] > cpu_max:
                    continue
                if ext[ci] + ext[cj] - 2 * bw > bw_max:
                    continue
                n = len(members[ci]) + len(members[cj])
                density = link_density(range(n), internal[ci] + internal[cj] + count)
                key = (density, bw)
                # cj ascends, so strict '>' keeps the lowest id on ties
                if best is None or key > best[0]:
                    best = (key, cj)
            if best is not None:
                cj = best[1]
                matched.update((ci, cj))
                pairs.append((ci, cj))
        if not pairs:
            break
        for ci, cj in pairs:
            keep, gone = min(ci, cj), max(ci, cj)
            count, bw = cross[keep].pop(gone)
            del cross[gone][keep]
            members[keep] |= members.pop(gone)
            cpu[keep] += cpu.pop(gone)
            internal[keep] += internal.pop(gone) + count
            ext[keep] = ext[keep] + ext.pop(gone) - 2 * bw
            for other, (c2, b2) in cross.pop(gone).items():
                del cross[other][gone]
                if other in cross[keep]:
                    cross[keep][other][0] += c2
                    cross[keep][other][1] += b2
                    cross[other][keep] = cross[keep][other][:]
                else:
                    cross[keep][other] = [c2, b2]
                    cross[other][keep] = [c2, b2]

    groups = sorted(members.values(), key=lambda block: min(index[v] for v in block))
    return CoarsenedGraph(vn, groups, cpu_max, bw_max)


def uncoarsen_map(cg: CoarsenedGraph, coarse_map: EmbeddingMap) -> EmbeddingMap:
    """Expand a map over coarsened nodes/links into one over the virtual network.

    ``coarse_map.node_map`` is keyed by coarsened node id and
    ``coarse_map.link_map`` by coarsened link id, with each path oriented from
    the host of ``endpoints[0]`` to the host of ``endpoints[1]``.
    """
    for cid in cg.ids():
        if cid not in coarse_map.node_map:
            raise StructuralError(f"coarsened node {cid} is unmapped")
    links = cg.links
    for cl in links:
        if cl.id not in coarse_map.link_map:
            raise StructuralError(f"coarsened link {cl.id} is unmapped")
    node_map = {v: coarse_map.node_map[cid] for v, cid in cg.owner.items()}
    link_map = {}
    for lid, l in cg.vn.links.items():
        if cg.owner[l.u] == cg.owner[l.v]:
            link_map[lid] = ()
    for cl in links:
        path = tuple(coarse_map.link_map[cl.id])
        for lid in cl.members:
            l = cg.vn.links[lid]
            link_map[lid] = path if cg.owner[l.u] == cl.endpoints[0] else path[::-1]
    return EmbeddingMap(node_map, dict(sorted(link_map.items())), coarse_map.max_hops)
