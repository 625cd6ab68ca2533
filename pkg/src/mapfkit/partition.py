"""Spatial decomposition: rectangular tiles, connected areas, links, corners."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .model import Coord, DELTA_TO_CODE, DIRECTIONS, Problem


class PartitionError(ValueError):
    pass


@dataclass
class Area:
    """One edge-connected region within a subproblem.

    in_nodes are the area's own nodes; out_nodes sit right outside, one step
    away across a link.  adjacency triples (n1, n2, d) always point at an
    in-node n2; n1 may be an in-node or an out-node.
    """

    id: int
    solver: int
    in_nodes: dict[int, Coord]
    out_nodes: dict[int, Coord] = field(default_factory=dict)
    adjacency: set[tuple[int, int, int]] = field(default_factory=set)
    links: list[tuple[int, Coord, int, Coord]] = field(default_factory=list)  # (n1, c1, n2, c2), n1 here
    corners: dict[int, frozenset[int]] = field(default_factory=dict)          # node -> foreign areas

    def successors(self) -> dict[int, list[int]]:
        succ: dict[int, list[int]] = {n: [] for n in self.in_nodes}
        for n in self.out_nodes:
            succ[n] = []
        for n1, n2, _ in self.adjacency:
            succ[n1].append(n2)
        for n in succ:
            succ[n].sort()
        return succ

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "solver": self.solver,
            "in_nodes": {str(n): list(c) for n, c in self.in_nodes.items()},
            "out_nodes": {str(n): list(c) for n, c in self.out_nodes.items()},
            "adjacency": sorted(list(t) for t in self.adjacency),
            "links": [[n1, list(c1), n2, list(c2)] for n1, c1, n2, c2 in self.links],
            "corners": {str(n): sorted(a) for n, a in self.corners.items()},
        }

    @staticmethod
    def from_dict(d: dict) -> "Area":
        return Area(
            id=d["id"],
            solver=d["solver"],
            in_nodes={int(n): tuple(c) for n, c in d["in_nodes"].items()},
            out_nodes={int(n): tuple(c) for n, c in d["out_nodes"].items()},
            adjacency={tuple(t) for t in d["adjacency"]},
            links=[(n1, tuple(c1), n2, tuple(c2)) for n1, c1, n2, c2 in d["links"]],
            corners={int(n): frozenset(a) for n, a in d["corners"].items()},
        )


@dataclass
class Subproblem:
    id: int
    bounds: tuple[int, int, int, int]      # (x_min, x_max, y_min, y_max), half-open
    nodes: dict[int, Coord]
    robots: dict[int, int]                 # agent -> start node
    borders: set[int]
    areas: list[Area] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "bounds": list(self.bounds),
            "nodes": {str(n): list(c) for n, c in self.nodes.items()},
            "robots": {str(a): n for a, n in self.robots.items()},
            "borders": sorted(self.borders),
            "areas": [a.to_dict() for a in self.areas],
        }

    @staticmethod
    def from_dict(d: dict) -> "Subproblem":
        return Subproblem(
            id=d["id"],
            bounds=tuple(d["bounds"]),
            nodes={int(n): tuple(c) for n, c in d["nodes"].items()},
            robots={int(a): n for a, n in d["robots"].items()},
            borders=set(d["borders"]),
            areas=[Area.from_dict(a) for a in d["areas"]],
        )


@dataclass
class LinkGraph:
    """Area-level connectivity: which pairs of areas share a border."""

    pairs: dict[tuple[int, int], list[tuple[int, int]]]  # (a1<a2) -> [(node in a1, node in a2)]

    def neighbors(self, area: int) -> list[int]:
        out = set()
        for a1, a2 in self.pairs:
            if a1 == area:
                out.add(a2)
            elif a2 == area:
                out.add(a1)
        return sorted(out)

    def areas(self) -> list[int]:
        out = set()
        for a1, a2 in self.pairs:
            out.add(a1)
            out.add(a2)
        return sorted(out)

    def border_pairs(self, a1: int, a2: int) -> list[tuple[int, int]]:
        """Border pairs oriented as (node in a1, node in a2)."""
        if a1 < a2:
            return list(self.pairs.get((a1, a2), []))
        return [(n2, n1) for n1, n2 in self.pairs.get((a2, a1), [])]

    def to_dict(self) -> dict:
        return {f"{a1},{a2}": [list(t) for t in v] for (a1, a2), v in sorted(self.pairs.items())}

    @staticmethod
    def from_dict(d: dict) -> "LinkGraph":
        pairs = {}
        for key, v in d.items():
            a1, a2 = (int(x) for x in key.split(","))
            pairs[(a1, a2)] = [tuple(t) for t in v]
        return LinkGraph(pairs)


def tile_count(p: Problem, dx: int, dy: int) -> int:
    xs = [x for x, _ in p.coords.values()]
    ys = [y for _, y in p.coords.values()]
    return math.ceil((max(xs) - min(xs) + 1) / dx) * math.ceil((max(ys) - min(ys) + 1) / dy)


def divide(p: Problem, dx: int, dy: int) -> tuple[list[Subproblem], LinkGraph]:
    """Cut the map into dx-by-dy tiles, drop empty ones, split each into
    connected areas, and compute the inter-area link graph and corners."""
    if dx < 2 or dy < 2:
        raise PartitionError("tile dimensions must be at least 2")
    if not p.coords:
        raise PartitionError("problem has no nodes")
    xs = [x for x, _ in p.coords.values()]
    ys = [y for _, y in p.coords.values()]
    x0, y0 = min(xs), min(ys)
    x1, y1 = max(xs), max(ys)

    node_tile: dict[int, int] = {}
    subs: list[Subproblem] = []
    sid = 0
    ty = y0
    while ty <= y1:
        tx = x0
        while tx <= x1:
            bounds = (tx, tx + dx, ty, ty + dy)
            nodes = {n: c for n, c in p.coords.items()
                     if bounds[0] <= c[0] < bounds[1] and bounds[2] <= c[1] < bounds[3]}
            if nodes:
                sid += 1
                borders = {n for n, (x, y) in nodes.items()
                           if x in (bounds[0], bounds[1] - 1) or y in (bounds[2], bounds[3] - 1)}
                robots = {a: s for a, s in p.starts.items() if s in nodes}
                subs.append(Subproblem(sid, bounds, nodes, robots, borders))
                for n in nodes:
                    node_tile[n] = sid
            tx += dx
        ty += dy

    # Area discovery: connected components of the within-tile edge relation,
    # ordered by smallest contained node id; area ids globally sequential.
    node_area: dict[int, int] = {}
    aid = 0
    for sub in subs:
        comps: list[set[int]] = []
        seen: set[int] = set()
        for n in sorted(sub.nodes):
            if n in seen:
                continue
            comp = {n}
            stack = [n]
            while stack:
                cur = stack.pop()
                for m in p.neighbors(cur):
                    if m in sub.nodes and m not in comp:
                        comp.add(m)
                        stack.append(m)
            seen |= comp
            comps.append(comp)
        for comp in comps:
            aid += 1
            area = Area(aid, sub.id, {n: p.coords[n] for n in sorted(comp)})
            for n1 in comp:
                for n2 in p.neighbors(n1):
                    if n2 in comp:
                        c1, c2 = p.coords[n1], p.coords[n2]
                        d = DELTA_TO_CODE[(c2[0] - c1[0], c2[1] - c1[1])]
                        area.adjacency.add((n1, n2, d))
            sub.areas.append(area)
            for n in comp:
                node_area[n] = aid

    areas_by_id = {a.id: a for sub in subs for a in sub.areas}

    # Links: adjacent nodes in different subproblems.
    pairs: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for sub in subs:
        for n1 in sub.borders:
            for n2 in p.neighbors(n1):
                if node_tile[n2] == sub.id:
                    continue
                a1, a2 = node_area[n1], node_area[n2]
                key = (a1, a2) if a1 < a2 else (a2, a1)
                pair = (n1, n2) if a1 < a2 else (n2, n1)
                pairs.setdefault(key, [])
                if pair not in pairs[key]:
                    pairs[key].append(pair)
    for key in pairs:
        pairs[key].sort()
    links = LinkGraph(pairs)

    # Per-area link and out-node atoms.
    for (a1, a2), plist in pairs.items():
        ar1, ar2 = areas_by_id[a1], areas_by_id[a2]
        for n1, n2 in plist:
            c1, c2 = p.coords[n1], p.coords[n2]
            ar1.links.append((n1, c1, n2, c2))
            ar2.links.append((n2, c2, n1, c1))
            ar1.out_nodes[n2] = c2
            ar2.out_nodes[n1] = c1
            # x-atom from the out-node into the area
            ar1.adjacency.add((n2, n1, DELTA_TO_CODE[(c1[0] - c2[0], c1[1] - c2[1])]))
            ar2.adjacency.add((n1, n2, DELTA_TO_CODE[(c2[0] - c1[0], c2[1] - c1[1])]))
    for a in areas_by_id.values():
        a.links.sort()

    find_corners(subs, links)
    return subs, links


def find_corners(subs: list[Subproblem], links: LinkGraph) -> None:
    """Mark border nodes linked to two or more foreign areas as corners."""
    touching: dict[tuple[int, int], set[int]] = {}  # (area, node) -> foreign areas
    for (a1, a2), plist in links.pairs.items():
        for n1, n2 in plist:
            touching.setdefault((a1, n1), set()).add(a2)
            touching.setdefault((a2, n2), set()).add(a1)
    for sub in subs:
        for area in sub.areas:
            area.corners = {}
            for (a, n), foreign in touching.items():
                if a == area.id and len(foreign) >= 2:
                    area.corners[n] = frozenset(foreign)


@dataclass(frozen=True)
class AgentPlacement:
    agent: int
    area: int
    node: int
    goal_node: int | None
    goal_area: int | None


def assign_agents(subs: list[Subproblem], p: Problem) -> dict[int, AgentPlacement]:
    """Resolve each agent's resident area and the area holding its goal."""
    node_area: dict[int, int] = {}
    for sub in subs:
        for area in sub.areas:
            for n in area.in_nodes:
                node_area[n] = area.id
    out: dict[int, AgentPlacement] = {}
    for a in sorted(p.agents):
        start = p.starts[a]
        if start not in node_area:
            raise PartitionError(f"agent {a} start node {start} not in any subproblem")
        goal = p.goals.get(a)
        out[a] = AgentPlacement(a, node_area[start], start, goal,
                                node_area[goal] if goal is not None else None)
    return out


def dump_partition(subs: list[Subproblem], links: LinkGraph) -> str:
    return json.dumps({
        "subproblems": [s.to_dict() for s in subs],
        "links": links.to_dict(),
    }, sort_keys=True)


def load_partition(text: str) -> tuple[list[Subproblem], LinkGraph]:
    data = json.loads(text)
    return ([Subproblem.from_dict(d) for d in data["subproblems"]],
            LinkGraph.from_dict(data["links"]))
