"""Kernighan-Lin style refinement of a coarsened virtual network.

Boundary virtual nodes are moved (or, when a move would break a cap, swapped
with a boundary node of the target block) whenever that strictly lowers the
bandwidth crossing between blocks. Unlike classic KL no tentative worsening
steps are taken, so every accepted action is an improvement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Hashable, Optional

from hcmvne.coarsening import CoarsenedGraph, _sort_key
from hcmvne.model import ZERO


@dataclass(frozen=True)
class MoveCandidate:
    virtual_node_id: Hashable
    source: int
    target: int
    gain: Decimal


@dataclass(frozen=True)
class Action:
    kind: str  # "move" or "swap"
    node: Hashable
    partner: Optional[Hashable]
    source: int
    target: int
    sweep: int
    crossing_before: Decimal
    crossing_after: Decimal


@dataclass
class RefineTrace:
    actions: list[Action] = field(default_factory=list)
    sweeps: int = 0


def crossing_bandwidth(cg: CoarsenedGraph) -> Decimal:
    """Total bandwidth of virtual links whose endpoints sit in different blocks."""
    return cg.crossing_bandwidth()


def boundary_nodes(cg: CoarsenedGraph, cn: int) -> set:
    if cn not in cg.members:
        raise KeyError(f"no coarsened node {cn}")
    return {v for v in cg.members[cn]
            if any(cg.owner[w] != cn for w in cg.vn.adjacency[v])}


def _weight_to(cg: CoarsenedGraph, v: Hashable, cid: int) -> Decimal:
    """Bandwidth between *v* and the members of block *cid* other than itself."""
    vn = cg.vn
    return sum((vn.links[lid].bw for w, lid in vn.adjacency[v].items() if cg.owner[w] == cid), ZERO)


def move_candidate(cg: CoarsenedGraph, v: Hashable) -> Optional[MoveCandidate]:
    """Best block to pull *v* into, if any pulls harder than its own block holds it."""
    source = cg.owner[v]
    held = _weight_to(cg, v, source)
    pull: dict[int, Decimal] = {}
    for w, lid in cg.vn.adjacency[v].items():
        other = cg.owner[w]
        if other != source:
            pull[other] = pull.get(other, ZERO) + cg.vn.links[lid].bw
    best = None
    for target in sorted(pull):
        gain = pull[target] - held
        if gain > 0 and (best is None or gain > best.gain):
            best = MoveCandidate(v, source, target, gain)
    return best


def _fits(cg: CoarsenedGraph, cid: int) -> bool:
    if cid not in cg.members:
        return True
    return not cg.violates_caps(cid)


def _relocate(cg: CoarsenedGraph, v: Hashable, target: int) -> None:
    source = cg.owner[v]
    cg.members[source].discard(v)
    cg.members.setdefault(target, set()).add(v)
    cg.owner[v] = target
    if not cg.members[source]:
        del cg.members[source]


def _try_move(cg: CoarsenedGraph, cand: MoveCandidate) -> bool:
    v, source, target = cand.virtual_node_id, cand.source, cand.target
    _relocate(cg, v, target)
    if _fits(cg, target) and _fits(cg, source):
        return True
    _relocate(cg, v, source)
    return False


def _swap_delta(cg: CoarsenedGraph, v, a: int, u, b: int) -> Decimal:
    link = cg.vn.link_between(u, v)
    shared = cg.vn.links[link].bw if link is not None else ZERO
    return (_weight_to(cg, v, a) - _weight_to(cg, v, b)
            + _weight_to(cg, u, b) - _weight_to(cg, u, a) + 2 * shared)


def _try_swap(cg: CoarsenedGraph, v, a: int, b: int) -> Optional[Hashable]:
    best = None
    for u in sorted(boundary_nodes(cg, b), key=_sort_key):
        delta = _swap_delta(cg, v, a, u, b)
        if delta >= 0 or (best is not None and delta >= best[0]):
            continue
        _relocate(cg, v, b)
        _relocate(cg, u, a)
        ok = _fits(cg, a) and _fits(cg, b)
        _relocate(cg, u, b)
        _relocate(cg, v, a)
        if ok:
            best = (delta, u)
    if best is None:
        return None
    u = best[1]
    _relocate(cg, v, b)
    _relocate(cg, u, a)
    return u


def optimize(cg: CoarsenedGraph, trace: Optional[RefineTrace] = None) -> CoarsenedGraph:
    """Sweep boundary nodes, moving or swapping them until a sweep changes nothing.

    Returns a new graph; *cg* is left untouched. Caps are the ones stored on
    *cg*. Blocks emptied by a move disappear.
    """
    cg = cg.copy()
    sweep = 0
    while True:
        acted = False
        for ci in cg.ids():
            if ci not in cg.members:
                continue
            for v in sorted(boundary_nodes(cg, ci), key=_sort_key):
                if cg.owner[v] != ci:
                    continue
                cand = move_candidate(cg, v)
                if cand is None:
                    continue
                before = cg.crossing_bandwidth() if trace is not None else None
                if _try_move(cg, cand):
                    kind, partner = "move", None
                else:
                    partner = _try_swap(cg, v, ci, cand.target)
                    if partner is None:
                        continue  # retried on the next sweep
                    kind = "swap"
                acted = True
                if trace is not None:
                    trace.actions.append(Action(kind, v, partner, ci, cand.target, sweep,
                                                before, cg.crossing_bandwidth()))
        sweep += 1
        if not acted:
            break
    if trace is not None:
        trace.sweeps = sweep
    return cg
