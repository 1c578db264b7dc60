"""Substrate and virtual network types, embedding maps and resource accounting.

CPU and bandwidth quantities are :class:`decimal.Decimal` values fixed at two
fractional digits, so reserving and later releasing the same amounts restores
residual capacities exactly.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from typing import Hashable, Iterable, Optional, Union

CENT = Decimal("0.01")
ZERO = Decimal("0.00")

Number = Union[int, str, float, Decimal]


class NetworkError(Exception):
    """Base class for errors raised by the network model."""


class StructuralError(NetworkError):
    """A map or graph refers to ids that do not exist, or is malformed."""


class CapacityError(NetworkError):
    """An allocation was refused because it would violate residual capacity."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class ReleaseError(NetworkError):
    """Release of resources that are not currently allocated."""


def amount(value: Number) -> Decimal:
    """Normalise *value* to a non-negative two-digit decimal."""
    if isinstance(value, float):
        value = repr(value)
    try:
        d = Decimal(value).quantize(CENT, rounding=ROUND_HALF_EVEN)
    except (InvalidOperation, TypeError, ValueError) as exc:
        raise ValueError(f"not a numeric amount: {value!r}") from exc
    if not d.is_finite() or d < 0:
        raise ValueError(f"amount must be finite and non-negative: {value!r}")
    return d


# ---------------------------------------------------------------------------
# Substrate network
# ---------------------------------------------------------------------------


@dataclass
class SubstrateNode:
    id: int
    total_cpu: Decimal
    residual_cpu: Optional[Decimal] = None
    x: float = 0.0
    y: float = 0.0

    def __post_init__(self):
        self.total_cpu = amount(self.total_cpu)
        self.residual_cpu = self.total_cpu if self.residual_cpu is None else amount(self.residual_cpu)
        if self.residual_cpu > self.total_cpu:
            raise ValueError(f"node {self.id}: residual cpu exceeds total")


@dataclass
class SubstrateLink:
    id: int
    u: int
    v: int
    total_bw: Decimal
    residual_bw: Optional[Decimal] = None

    def __post_init__(self):
        if self.u == self.v:
            raise StructuralError(f"link {self.id}: self-loop on node {self.u}")
        self.total_bw = amount(self.total_bw)
        self.residual_bw = self.total_bw if self.residual_bw is None else amount(self.residual_bw)
        if self.residual_bw > self.total_bw:
            raise ValueError(f"link {self.id}: residual bandwidth exceeds total")

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.u, self.v)

    def other(self, node: int) -> int:
        return self.v if node == self.u else self.u


class SubstrateNetwork:
    """Undirected simple graph with CPU on nodes and bandwidth on links.

    ``adjacency[n]`` maps each neighbour of ``n`` to the id of the link joining
    them. Mutation of residuals happens only through :func:`allocate` and
    :func:`release`.
    """

    def __init__(self) -> None:
        self.nodes: dict[int, SubstrateNode] = {}
        self.links: dict[int, SubstrateLink] = {}
        self.adjacency: dict[int, dict[int, int]] = {}
        self._active: Counter = Counter()
        self._sorted_adj: Optional[dict[int, list[tuple[int, int]]]] = None

    def add_node(self, node_id: int, cpu: Number, *, x: float = 0.0, y: float = 0.0) -> SubstrateNode:
        if node_id in self.nodes:
            raise StructuralError(f"duplicate substrate node {node_id}")
        node = SubstrateNode(node_id, cpu, x=x, y=y)
        self.nodes[node_id] = node
        self.adjacency[node_id] = {}
        self._sorted_adj = None
        return node

    def add_link(self, u: int, v: int, bw: Number, *, link_id: Optional[int] = None) -> SubstrateLink:
        for n in (u, v):
            if n not in self.nodes:
                raise StructuralError(f"link endpoint {n} is not a substrate node")
        if v in self.adjacency[u]:
            raise StructuralError(f"duplicate link between {u} and {v}")
        if link_id is None:
            link_id = max(self.links, default=-1) + 1
        elif link_id in self.links:
            raise StructuralError(f"duplicate substrate link id {link_id}")
        link = SubstrateLink(link_id, u, v, bw)
        self.links[link_id] = link
        self.adjacency[u][v] = link_id
        self.adjacency[v][u] = link_id
        self._sorted_adj = None
        return link

    def sorted_adjacency(self) -> dict[int, list[tuple[int, int]]]:
        """``node -> [(neighbour, link id), ...]`` in ascending neighbour order (cached)."""
        if self._sorted_adj is None:
            self._sorted_adj = {n: sorted(nbrs.items()) for n, nbrs in self.adjacency.items()}
        return self._sorted_adj

    def link_between(self, u: int, v: int) -> Optional[int]:
        return self.adjacency.get(u, {}).get(v)

    def incident_links(self, node_id: int) -> list[int]:
        return sorted(self.adjacency[node_id].values())

    def incident_residual_bw(self, node_id: int) -> Decimal:
        return sum((self.links[l].residual_bw for l in self.adjacency[node_id].values()), ZERO)

    def residual_cpu(self) -> dict[int, Decimal]:
        return {n: node.residual_cpu for n, node in self.nodes.items()}

    def residual_bw(self) -> dict[int, Decimal]:
        return {l: link.residual_bw for l, link in self.links.items()}

    def copy(self) -> "SubstrateNetwork":
        sn = SubstrateNetwork()
        for n in self.nodes.values():
            sn.nodes[n.id] = SubstrateNode(n.id, n.total_cpu, n.residual_cpu, n.x, n.y)
            sn.adjacency[n.id] = dict(self.adjacency[n.id])
        for l in self.links.values():
            sn.links[l.id] = SubstrateLink(l.id, l.u, l.v, l.total_bw, l.residual_bw)
        sn._active = Counter(self._active)
        sn._sorted_adj = None
        return sn

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SubstrateNetwork):
            return NotImplemented
        return self.nodes == other.nodes and self.links == other.links

    def __repr__(self) -> str:
        return f"SubstrateNetwork({len(self.nodes)} nodes, {len(self.links)} links)"


# ---------------------------------------------------------------------------
# Virtual network and requests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VirtualLink:
    id: int
    u: Hashable
    v: Hashable
    bw: Decimal


class VirtualNetwork:
    """Demand graph: CPU per virtual node, bandwidth per virtual link."""

    def __init__(self) -> None:
        self.nodes: dict[Hashable, Decimal] = {}
        self.links: dict[int, VirtualLink] = {}
        self.adjacency: dict[Hashable, dict[Hashable, int]] = {}
        self.positions: dict[Hashable, tuple[float, float]] = {}

    @classmethod
    def build(cls, nodes: dict, links: Iterable[tuple]) -> "VirtualNetwork":
        """Shorthand constructor: ``nodes`` maps id to cpu, ``links`` are ``(u, v, bw)``."""
        vn = cls()
        for n, cpu in nodes.items():
            vn.add_node(n, cpu)
        for u, v, bw in links:
            vn.add_link(u, v, bw)
        return vn

    def add_node(self, node_id: Hashable, cpu: Number, *, pos: Optional[tuple[float, float]] = None) -> None:
        if node_id in self.nodes:
            raise StructuralError(f"duplicate virtual node {node_id!r}")
        cpu = amount(cpu)
        if cpu <= 0:
            raise ValueError(f"virtual node {node_id!r}: cpu demand must be positive")
        self.nodes[node_id] = cpu
        self.adjacency[node_id] = {}
        if pos is not None:
            self.positions[node_id] = pos

    def add_link(self, u: Hashable, v: Hashable, bw: Number, *, link_id: Optional[int] = None) -> VirtualLink:
        for n in (u, v):
            if n not in self.nodes:
                raise StructuralError(f"link endpoint {n!r} is not a virtual node")
        if u == v:
            raise StructuralError(f"self-loop on virtual node {u!r}")
        if v in self.adjacency[u]:
            raise StructuralError(f"duplicate virtual link between {u!r} and {v!r}")
        bw = amount(bw)
        if bw <= 0:
            raise ValueError(f"virtual link ({u!r}, {v!r}): bandwidth demand must be positive")
        if link_id is None:
            link_id = max(self.links, default=-1) + 1
        elif link_id in self.links:
            raise StructuralError(f"duplicate virtual link id {link_id}")
        link = VirtualLink(link_id, u, v, bw)
        self.links[link_id] = link
        self.adjacency[u][v] = link_id
        self.adjacency[v][u] = link_id
        return link

    def link_between(self, u: Hashable, v: Hashable) -> Optional[int]:
        return self.adjacency.get(u, {}).get(v)

    def total_cpu(self) -> Decimal:
        return sum(self.nodes.values(), ZERO)

    def total_bw(self) -> Decimal:
        return sum((l.bw for l in self.links.values()), ZERO)

    def density(self) -> float:
        n = len(self.nodes)
        return 1.0 if n < 2 else 2 * len(self.links) / (n * (n - 1))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VirtualNetwork):
            return NotImplemented
        return (self.nodes == other.nodes and self.links == other.links
                and all(self.position(n) == other.position(n) for n in self.nodes))

    def position(self, node_id: Hashable) -> tuple[float, float]:
        return self.positions.get(node_id, (0.0, 0.0))

    def __repr__(self) -> str:
        return f"VirtualNetwork({len(self.nodes)} nodes, {len(self.links)} links)"


@dataclass
class VnRequest:
    id: int
    graph: VirtualNetwork
    arrival: int
    lifetime: int

    def __post_init__(self):
        if self.arrival < 0:
            raise ValueError(f"request {self.id}: negative arrival")
        if self.lifetime <= 0:
            raise ValueError(f"request {self.id}: lifetime must be positive")

    @property
    def departure(self) -> int:
        return self.arrival + self.lifetime

    def in_lifetime(self, t: float) -> bool:
        # half-open: released exactly at arrival + lifetime
        return self.arrival <= t < self.departure


# ---------------------------------------------------------------------------
# Embedding maps
# ---------------------------------------------------------------------------

_BACKTRACK_RE = re.compile(r"^\s*(\d*)\s*n\s*$")


@dataclass
class EmbedParams:
    """Search limits shared by all embedding algorithms.

    ``max_backtrack`` is an int, ``None`` for unbounded, or a string ``"<k>n"``
    meaning k times the node count of the graph being embedded.

    ``bundle_check`` picks the bandwidth a candidate host's paths to placed
    neighbours must offer: ``"largest"`` (the biggest single virtual link in
    the coarsened link, each being routed separately) or ``"aggregate"``
    (the coarsened link's total).
    """

    max_hops: int = 2
    max_backtrack: Union[int, str, None] = "3n"
    coarsening_enabled: bool = True
    bundle_check: str = "largest"

    def __post_init__(self):
        if self.max_hops < 0:
            raise ValueError("max_hops must be >= 0")
        if isinstance(self.max_backtrack, str):
            if not _BACKTRACK_RE.match(self.max_backtrack):
                raise ValueError(f"bad max_backtrack expression {self.max_backtrack!r}")
        elif self.max_backtrack is not None and self.max_backtrack < 0:
            raise ValueError("max_backtrack must be >= 0")
        if self.bundle_check not in ("largest", "aggregate"):
            raise ValueError(f"bundle_check must be 'largest' or 'aggregate', not {self.bundle_check!r}")

    def backtrack_limit(self, n: int) -> Optional[int]:
        if isinstance(self.max_backtrack, str):
            return int(_BACKTRACK_RE.match(self.max_backtrack).group(1) or 1) * n
        return self.max_backtrack


@dataclass
class EmbeddingMap:
    """Virtual node -> substrate node and virtual link -> substrate link path.

    Paths are tuples of substrate link ids walking from the host of the virtual
    link's ``u`` endpoint to the host of its ``v`` endpoint; the empty tuple
    means both endpoints share a host.
    """

    node_map: dict = field(default_factory=dict)
    link_map: dict = field(default_factory=dict)
    max_hops: Optional[int] = None

    def path_length(self, vlink_id: int) -> int:
        return len(self.link_map[vlink_id])

    def is_empty(self) -> bool:
        return not self.node_map and not self.link_map


def _check_ids(sn: SubstrateNetwork, vn: VirtualNetwork, m: EmbeddingMap) -> None:
    for vnode, snode in m.node_map.items():
        if vnode not in vn.nodes:
            raise StructuralError(f"map references unknown virtual node {vnode!r}")
        if snode not in sn.nodes:
            raise StructuralError(f"map references unknown substrate node {snode!r}")
    for vlink, path in m.link_map.items():
        if vlink not in vn.links:
            raise StructuralError(f"map references unknown virtual link {vlink!r}")
        for l in path:
            if l not in sn.links:
                raise StructuralError(f"map references unknown substrate link {l!r}")


def _walk_violation(sn: SubstrateNetwork, start: int, end: int, path) -> Optional[str]:
    if not path:
        return None if start == end else "empty path between distinct hosts"
    if start == end:
        return "non-empty path between co-located endpoints"
    seen = {start}
    at = start
    for l in path:
        link = sn.links[l]
        if at not in link.endpoints:
            return f"substrate link {l} is not incident to node {at}"
        at = link.other(at)
        if at in seen:
            return f"path revisits substrate node {at}"
        seen.add(at)
    if at != end:
        return f"path ends at {at}, expected {end}"
    return None


def demands(vn: VirtualNetwork, m: EmbeddingMap) -> tuple[dict[int, Decimal], dict[int, Decimal]]:
    """Per-substrate-node CPU and per-substrate-link bandwidth that *m* consumes."""
    cpu: dict[int, Decimal] = {}
    for vnode, snode in m.node_map.items():
        cpu[snode] = cpu.get(snode, ZERO) + vn.nodes[vnode]
    bw: dict[int, Decimal] = {}
    for vlink, path in m.link_map.items():
        need = vn.links[vlink].bw
        for l in path:
            bw[l] = bw.get(l, ZERO) + need
    return cpu, bw


def validate_embedding(
    sn: SubstrateNetwork,
    vn: VirtualNetwork,
    m: EmbeddingMap,
    p: Optional[EmbedParams] = None,
) -> list[str]:
    """Return the list of violations of *m* against the current residuals.

    An empty list means the map is valid. Ids unknown to *sn* or *vn* raise
    :class:`StructuralError` instead, since they are not capacity questions.
    """
    _check_ids(sn, vn, m)
    violations = []
    for vnode in vn.nodes:
        if vnode not in m.node_map:
            violations.append(f"virtual node {vnode!r} is unmapped")
    max_hops = p.max_hops if p is not None else m.max_hops
    for vlink in sorted(vn.links):
        link = vn.links[vlink]
        if vlink not in m.link_map:
            violations.append(f"virtual link {vlink} is unmapped")
            continue
        if link.u not in m.node_map or link.v not in m.node_map:
            continue
        path = m.link_map[vlink]
        problem = _walk_violation(sn, m.node_map[link.u], m.node_map[link.v], path)
        if problem:
            violations.append(f"virtual link {vlink}: {problem}")
        if max_hops is not None and len(path) > max_hops:
            violations.append(f"virtual link {vlink}: path length {len(path)} exceeds {max_hops} hops")
    cpu, bw = demands(vn, m)
    for snode in sorted(cpu):
        if cpu[snode] > sn.nodes[snode].residual_cpu:
            violations.append(
                f"substrate node {snode}: cpu {cpu[snode]} exceeds residual {sn.nodes[snode].residual_cpu}")
    for l in sorted(bw):
        if bw[l] > sn.links[l].residual_bw:
            violations.append(
                f"substrate link {l}: bandwidth {bw[l]} exceeds residual {sn.links[l].residual_bw}")
    return violations


def _allocation_key(vn: VirtualNetwork, m: EmbeddingMap) -> tuple:
    nodes = tuple(sorted(((repr(k), v, vn.nodes[k]) for k, v in m.node_map.items())))
    links = tuple(sorted((k, tuple(p), vn.links[k].bw) for k, p in m.link_map.items()))
    return nodes, links


def allocate(
    sn: SubstrateNetwork,
    vn: VirtualNetwork,
    m: EmbeddingMap,
    p: Optional[EmbedParams] = None,
) -> SubstrateNetwork:
    """Reserve the resources of *m* on *sn* in place; all-or-nothing."""
    violations = validate_embedding(sn, vn, m, p)
    if violations:
        raise CapacityError(violations)
    cpu, bw = demands(vn, m)
    for snode, need in cpu.items():
        sn.nodes[snode].residual_cpu -= need
    for l, need in bw.items():
        sn.links[l].residual_bw -= need
    sn._active[_allocation_key(vn, m)] += 1
    return sn


def release(sn: SubstrateNetwork, vn: VirtualNetwork, m: EmbeddingMap) -> SubstrateNetwork:
    """Return the resources of a previously allocated map to *sn* in place."""
    if m.is_empty():
        return sn
    _check_ids(sn, vn, m)
    key = _allocation_key(vn, m)
    if sn._active[key] <= 0:
        raise ReleaseError("map is not currently allocated on this substrate")
    cpu, bw = demands(vn, m)
    for snode, need in cpu.items():
        node = sn.nodes[snode]
        if node.residual_cpu + need > node.total_cpu:
            raise ReleaseError(f"release would push node {snode} above its total cpu")
    for l, need in bw.items():
        link = sn.links[l]
        if link.residual_bw + need > link.total_bw:
            raise ReleaseError(f"release would push link {l} above its total bandwidth")
    for snode, need in cpu.items():
        sn.nodes[snode].residual_cpu += need
    for l, need in bw.items():
        sn.links[l].residual_bw += need
    sn._active[key] -= 1
    if not sn._active[key]:
        del sn._active[key]
    return sn


# ---------------------------------------------------------------------------
# Revenue and cost
# ---------------------------------------------------------------------------


def _graph(vnr: Union[VnRequest, VirtualNetwork]) -> VirtualNetwork:
    return vnr.graph if isinstance(vnr, VnRequest) else vnr


def revenue(vnr: Union[VnRequest, VirtualNetwork]) -> Decimal:
    """Total requested CPU plus total requested bandwidth."""
    vn = _graph(vnr)
    return vn.total_cpu() + vn.total_bw()


def cost(vnr: Union[VnRequest, VirtualNetwork], m: EmbeddingMap) -> Decimal:
    """Allocated CPU plus each link's bandwidth times its substrate path length."""
    vn = _graph(vnr)
    missing = [n for n in vn.nodes if n not in m.node_map]
    missing += [l for l in vn.links if l not in m.link_map]
    if missing:
        raise StructuralError(f"incomplete map, missing {missing!r}")
    total = vn.total_cpu()
    for vlink, link in vn.links.items():
        total += link.bw * len(m.link_map[vlink])
    return total
