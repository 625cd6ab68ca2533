"""Shared fixture builders for the test suite."""

from __future__ import annotations

from mapfkit.model import DELTA_TO_CODE, Coord
from mapfkit.partition import Area


def make_area(aid: int, cells: list[Coord], out_cells: list[Coord] | None = None,
              solver: int = 1, first_id: int = 1) -> Area:
    """Hand-built area: `cells` become in-nodes with ids in listing order;
    `out_cells` become out-nodes adjacent to some in-node."""
    in_nodes = {first_id + i: c for i, c in enumerate(cells)}
    node_at = {c: n for n, c in in_nodes.items()}
    nid = first_id + len(cells)
    out_nodes: dict[int, Coord] = {}
    for c in out_cells or []:
        out_nodes[nid] = c
        node_at[c] = nid
        nid += 1
    adjacency = set()
    for n, (x, y) in in_nodes.items():
        for (dx, dy), code in ((d, c) for d, c in DELTA_TO_CODE.items()):
            m = node_at.get((x + dx, y + dy))
            if m is None:
                continue
            if m in in_nodes:
                adjacency.add((n, m, code))
            # out-node -> in-node only
            adjacency.add((m, n, DELTA_TO_CODE[(-dx, -dy)]))
    # drop in->out entries added by the symmetric sweep
    adjacency = {(n1, n2, d) for n1, n2, d in adjacency if n2 in in_nodes}
    return Area(aid, solver, in_nodes, out_nodes, adjacency)


def node_of(area: Area, coord: Coord) -> int:
    for n, c in area.in_nodes.items():
        if c == coord:
            return n
    for n, c in area.out_nodes.items():
        if c == coord:
            return n
    raise KeyError(coord)
