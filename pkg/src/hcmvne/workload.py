"""Waxman topologies, VNR workloads, and their on-disk formats.

Edge probability follows the BRITE convention ``alpha * exp(-d / (beta * L))``
where ``d`` is the Euclidean distance between two nodes and ``L`` the largest
distance between any two placed nodes.
"""

from __future__ import annotations

import csv
import io
import math
import os
import random
import re
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from hcmvne.model import (
    StructuralError,
    SubstrateNetwork,
    VirtualNetwork,
    VnRequest,
    amount,
)

MAX_SAMPLING_ROUNDS = 50

PathLike = Union[str, os.PathLike]


@dataclass
class WaxmanParams:
    node_count: int
    target_link_count: Optional[int] = None
    target_density: Optional[float] = None
    alpha: float = 0.5
    beta: float = 0.2
    plane_size: float = 100.0

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("node_count must be >= 1")
        if not (0 < self.alpha <= 1 and 0 < self.beta <= 1):
            raise ValueError("Waxman alpha and beta must lie in (0, 1]")


@dataclass
class WorkloadParams:
    vnr_count: int
    vn_node_range: tuple[int, int] = (2, 20)
    cpu_choices: Sequence = (2500, 2000, 1000, 500)
    bw_range: tuple = (1, 50)
    arrival_rate: float = 0.1
    lifetime_range: tuple[int, int] = (300, 700)
    seed: int = 0
    density: float = 0.5
    alpha: float = 0.5
    beta: float = 0.2
    plane_size: float = 100.0

    def __post_init__(self):
        for name in ("vn_node_range", "bw_range", "lifetime_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: min exceeds max")
        if self.arrival_rate <= 0:
            raise ValueError("arrival_rate must be positive")
        if self.vn_node_range[0] < 1:
            raise ValueError("virtual networks need at least one node")


# ---------------------------------------------------------------------------
# Waxman sampling
# ---------------------------------------------------------------------------


def _place(rng: random.Random, n: int, plane: float) -> list[tuple[float, float]]:
    return [(round(rng.uniform(0, plane), 2), round(rng.uniform(0, plane), 2)) for _ in range(n)]


def _waxman_probabilities(pos, alpha: float, beta: float) -> dict[tuple[int, int], float]:
    n = len(pos)
    dist = {}
    for i in range(n):
        for j in range(i + 1, n):
            dist[i, j] = math.dist(pos[i], pos[j])
    longest = max(dist.values(), default=0.0) or 1.0
    return {pair: alpha * math.exp(-d / (beta * longest)) for pair, d in dist.items()}


def _spanning_tree(rng: random.Random, n: int, prob) -> set[tuple[int, int]]:
    """Random tree: each node in a shuffled order attaches to an earlier one, Waxman-weighted."""
    order = list(range(n))
    rng.shuffle(order)
    edges = set()
    for k in range(1, n):
        node = order[k]
        earlier = order[:k]
        weights = [prob[min(node, e), max(node, e)] for e in earlier]
        parent = rng.choices(earlier, weights=weights)[0]
        edges.add((min(node, parent), max(node, parent)))
    return edges


def _draw_amount(rng: random.Random, lo, hi) -> Decimal:
    """Uniform draw on [lo, hi] at cent resolution."""
    a, b = amount(lo), amount(hi)
    cents = rng.randint(int(a * 100), int(b * 100))
    return Decimal(cents).scaleb(-2)


def waxman_edges(p: WaxmanParams, rng: random.Random) -> tuple[list, set[tuple[int, int]]]:
    """Node positions and a connected edge set meeting the link-count or density target."""
    n = p.node_count
    pos = _place(rng, n, p.plane_size)
    prob = _waxman_probabilities(pos, p.alpha, p.beta)
    edges = _spanning_tree(rng, n, prob)
    all_pairs = sorted(prob)

    if p.target_link_count is not None:
        target = p.target_link_count
        if target > n * (n - 1) // 2:
            raise ValueError(f"{target} links do not fit in a simple graph on {n} nodes")
        if target < n - 1:
            raise ValueError(f"{target} links cannot connect {n} nodes")
        for _ in range(MAX_SAMPLING_ROUNDS):
            if len(edges) >= target:
                break
            absent = [pair for pair in all_pairs if pair not in edges]
            rng.shuffle(absent)
            for pair in absent:
                if rng.random() < prob[pair]:
                    edges.add(pair)
                    if len(edges) == target:
                        break
        if len(edges) < target:
            absent = sorted((pair for pair in all_pairs if pair not in edges),
                            key=lambda pair: (-prob[pair], pair))
            edges.update(absent[: target - len(edges)])
        return pos, edges

    density = 0.5 if p.target_density is None else p.target_density
    absent = [pair for pair in all_pairs if pair not in edges]
    extra = density * n * (n - 1) / 2 - len(edges)
    scale = _density_scale([prob[pair] for pair in absent], extra)
    for pair in absent:
        if rng.random() < min(1.0, scale * prob[pair]):
            edges.add(pair)
    return pos, edges


def _density_scale(probs: list[float], expected: float) -> float:
    """Factor s with sum(min(1, s * p)) == expected, by bisection."""
    if expected <= 0 or not probs:
        return 0.0
    if expected >= len(probs):
        return math.inf
    lo, hi = 0.0, 1.0
    while sum(min(1.0, hi * q) for q in probs) < expected:
        hi *= 2
    for _ in range(80):
        mid = (lo + hi) / 2
        if sum(min(1.0, mid * q) for q in probs) < expected:
            lo = mid
        else:
            hi = mid
    return hi


def generate_substrate(p: WaxmanParams, cpu_profiles: Sequence, bw_range: tuple, seed: int) -> SubstrateNetwork:
    """Connected Waxman substrate with exactly ``p.target_link_count`` links."""
    if p.target_link_count is None:
        raise ValueError("substrate generation needs target_link_count")
    rng = random.Random(seed)
    pos, edges = waxman_edges(p, rng)
    sn = SubstrateNetwork()
    for i, (x, y) in enumerate(pos):
        sn.add_node(i, rng.choice(list(cpu_profiles)), x=x, y=y)
    for link_id, (u, v) in enumerate(sorted(edges)):
        sn.add_link(u, v, _draw_amount(rng, *bw_range), link_id=link_id)
    return sn


def generate_vn(p: WaxmanParams, cpu_choices: Sequence, bw_range: tuple, seed: int) -> VirtualNetwork:
    """Connected Waxman virtual network whose expected link density is ``p.target_density``."""
    rng = random.Random(seed)
    pos, edges = waxman_edges(p, rng)
    vn = VirtualNetwork()
    for i, xy in enumerate(pos):
        vn.add_node(i, rng.choice(list(cpu_choices)), pos=xy)
    for link_id, (u, v) in enumerate(sorted(edges)):
        vn.add_link(u, v, _draw_amount(rng, *bw_range), link_id=link_id)
    return vn


def generate_workload(p: WorkloadParams) -> list[VnRequest]:
    """Poisson arrivals, uniform integer lifetimes, one Waxman VN per request."""
    rng = random.Random(p.seed)
    requests = []
    clock = 0.0
    for i in range(p.vnr_count):
        clock += rng.expovariate(p.arrival_rate)
        lifetime = rng.randint(*p.lifetime_range)
        n = rng.randint(*p.vn_node_range)
        vn_seed = rng.getrandbits(63)
        wp = WaxmanParams(n, target_density=p.density, alpha=p.alpha, beta=p.beta,
                          plane_size=p.plane_size)
        vn = generate_vn(wp, p.cpu_choices, p.bw_range, vn_seed)
        requests.append(VnRequest(i, vn, round(clock), lifetime))
    return requests


# ---------------------------------------------------------------------------
# BRITE subset
# ---------------------------------------------------------------------------


class BriteFormatError(ValueError):
    def __init__(self, lineno: int, message: str, source: str = "<string>"):
        super().__init__(f"{source}:{lineno}: {message}")
        self.lineno = lineno


_TOPOLOGY_RE = re.compile(r"^Topology: \( (\d+) Nodes, (\d+) Edges \)$")
_NODES_RE = re.compile(r"^Nodes: \( (\d+) \)$")
_EDGES_RE = re.compile(r"^Edges: \( (\d+) \)$")

Network = Union[SubstrateNetwork, VirtualNetwork]


def format_brite(net: Network) -> str:
    if isinstance(net, SubstrateNetwork):
        nodes = [(n.id, n.x, n.y, n.total_cpu, len(net.adjacency[n.id]))
                 for n in sorted(net.nodes.values(), key=lambda n: n.id)]
        edges = [(l.id, l.u, l.v, l.total_bw) for l in sorted(net.links.values(), key=lambda l: l.id)]
    else:
        nodes = []
        for nid, cpu in net.nodes.items():
            x, y = net.position(nid)
            nodes.append((nid, x, y, cpu, len(net.adjacency[nid])))
        edges = [(l.id, l.u, l.v, l.bw) for l in sorted(net.links.values(), key=lambda l: l.id)]
    out = io.StringIO()
    out.write(f"Topology: ( {len(nodes)} Nodes, {len(edges)} Edges )\n\n")
    out.write(f"Nodes: ( {len(nodes)} )\n")
    for nid, x, y, cpu, deg in nodes:
        out.write(f"{nid}\t{x:.2f}\t{y:.2f}\t{deg}\t{deg}\t0\t0\t{cpu}\n")
    out.write(f"\nEdges: ( {len(edges)} )\n")
    for lid, u, v, bw in edges:
        out.write(f"{lid}\t{u}\t{v}\t0\t0\t{bw}\t0\t0\t0\n")
    return out.getvalue()


def write_brite(net: Network, path: PathLike) -> None:
    _atomic_write(Path(path), format_brite(net))


def _int_field(value: str, lineno: int, name: str, source: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise BriteFormatError(lineno, f"{name} is not an integer: {value!r}", source) from None


def _num_field(value: str, lineno: int, name: str, source: str):
    try:
        return amount(value)
    except ValueError:
        raise BriteFormatError(lineno, f"{name} is not a non-negative number: {value!r}", source) from None


def parse_brite(text: str, kind: str = "substrate", source: str = "<string>") -> Network:
    """Parse the BRITE subset written by :func:`format_brite`.

    *kind* is ``"substrate"`` or ``"virtual"`` and selects the network type.
    """
    if kind not in ("substrate", "virtual"):
        raise ValueError(f"unknown network kind {kind!r}")
    lines = text.splitlines()
    pos = 0

    def next_content():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            return len(lines) + 1, None
        pos += 1
        return pos, lines[pos - 1]

    lineno, line = next_content()
    m = _TOPOLOGY_RE.match(line or "")
    if not m:
        raise BriteFormatError(lineno, "expected 'Topology: ( N Nodes, M Edges )' header", source)
    n_nodes, n_edges = int(m.group(1)), int(m.group(2))

    lineno, line = next_content()
    m = _NODES_RE.match(line or "")
    if not m or int(m.group(1)) != n_nodes:
        raise BriteFormatError(lineno, f"expected 'Nodes: ( {n_nodes} )'", source)

    net: Network = SubstrateNetwork() if kind == "substrate" else VirtualNetwork()
    for _ in range(n_nodes):
        lineno = pos + 1
        if pos >= len(lines) or not lines[pos].strip() or lines[pos].startswith("Edges:"):
            raise BriteFormatError(lineno, "missing node line", source)
        fields = lines[pos].split("\t")
        pos += 1
        if len(fields) != 8:
            raise BriteFormatError(lineno, f"node line needs 8 tab-separated fields, got {len(fields)}", source)
        nid = _int_field(fields[0], lineno, "node id", source)
        try:
            x, y = float(fields[1]), float(fields[2])
        except ValueError:
            raise BriteFormatError(lineno, "non-numeric coordinate", source) from None
        for idx, name in ((3, "indegree"), (4, "outdegree"), (5, "as"), (6, "type")):
            _int_field(fields[idx], lineno, name, source)
        cpu = _num_field(fields[7], lineno, "cpu", source)
        try:
            if kind == "substrate":
                net.add_node(nid, cpu, x=x, y=y)
            else:
                net.add_node(nid, cpu, pos=(x, y))
        except (StructuralError, ValueError) as exc:
            raise BriteFormatError(lineno, str(exc), source) from None

    lineno, line = next_content()
    m = _EDGES_RE.match(line or "")
    if not m or int(m.group(1)) != n_edges:
        raise BriteFormatError(lineno, f"expected 'Edges: ( {n_edges} )'", source)
    for _ in range(n_edges):
        lineno = pos + 1
        if pos >= len(lines) or not lines[pos].strip():
            raise BriteFormatError(lineno, "missing edge line", source)
        fields = lines[pos].split("\t")
        pos += 1
        if len(fields) != 9:
            raise BriteFormatError(lineno, f"edge line needs 9 tab-separated fields, got {len(fields)}", source)
        lid = _int_field(fields[0], lineno, "edge id", source)
        u = _int_field(fields[1], lineno, "from", source)
        v = _int_field(fields[2], lineno, "to", source)
        for idx, name in ((3, "length"), (4, "delay")):
            try:
                float(fields[idx])
            except ValueError:
                raise BriteFormatError(lineno, f"{name} is not numeric", source) from None
        bw = _num_field(fields[5], lineno, "bandwidth", source)
        for idx, name in ((6, "as_from"), (7, "as_to"), (8, "type")):
            _int_field(fields[idx], lineno, name, source)
        try:
            net.add_link(u, v, bw, link_id=lid)
        except (StructuralError, ValueError) as exc:
            raise BriteFormatError(lineno, str(exc), source) from None

    lineno, line = next_content()
    if line is not None:
        raise BriteFormatError(lineno, "unexpected trailing content", source)
    return net


def read_brite(path: PathLike, kind: str = "substrate") -> Network:
    path = Path(path)
    return parse_brite(path.read_text(encoding="ascii"), kind, source=str(path))


# ---------------------------------------------------------------------------
# Workload manifest
# ---------------------------------------------------------------------------

MANIFEST_HEADER = ["vnr_id", "brite_file", "arrival", "lifetime"]


class ManifestError(ValueError):
    def __init__(self, row: int, message: str):
        super().__init__(f"manifest row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class ManifestRow:
    vnr_id: int
    brite_file: str
    arrival: int
    lifetime: int


def write_manifest(rows: Iterable[ManifestRow], path: PathLike) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_HEADER)
    for r in rows:
        writer.writerow([r.vnr_id, r.brite_file, r.arrival, r.lifetime])
    _atomic_write(Path(path), buf.getvalue())


def read_manifest_rows(path: PathLike) -> list[ManifestRow]:
    """Parse and check a manifest without loading the referenced VN files.

    Row numbers in errors count data rows from 1 (the header is row 0).
    """
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise ManifestError(0, f"header must be {','.join(MANIFEST_HEADER)}")
        rows = []
        last = None
        for i, rec in enumerate(reader, start=1):
            if len(rec) != 4:
                raise ManifestError(i, f"expected 4 columns, got {len(rec)}")
            try:
                row = ManifestRow(int(rec[0]), rec[1], int(rec[2]), int(rec[3]))
            except ValueError:
                raise ManifestError(i, "vnr_id, arrival and lifetime must be integers") from None
            if last is not None and row.arrival < last:
                raise ManifestError(i, f"arrival {row.arrival} decreases (previous {last})")
            last = row.arrival
            rows.append(row)
    return rows


def read_manifest(path: PathLike) -> list[VnRequest]:
    """Load a workload; ``brite_file`` entries resolve relative to the manifest."""
    path = Path(path)
    requests = []
    for i, row in enumerate(read_manifest_rows(path), start=1):
        vn_path = path.parent / row.brite_file
        if not vn_path.is_file():
            raise ManifestError(i, f"missing VN file {row.brite_file}")
        try:
            vn = read_brite(vn_path, kind="virtual")
            requests.append(VnRequest(row.vnr_id, vn, row.arrival, row.lifetime))
        except ValueError as exc:
            raise ManifestError(i, str(exc)) from None
    return requests


def vn_filename(vnr_id: int) -> str:
    return f"vn_{vnr_id:05d}.brite"


def write_workload(requests: Sequence[VnRequest], directory: PathLike, manifest: str = "manifest.csv") -> Path:
    """Write one BRITE file per request plus the manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = []
    for r in requests:
        name = vn_filename(r.id)
        write_brite(r.graph, directory / name)
        rows.append(ManifestRow(r.id, name, r.arrival, r.lifetime))
    target = directory / manifest
    write_manifest(rows, target)
    return target


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="ascii", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
