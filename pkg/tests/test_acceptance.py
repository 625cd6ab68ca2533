"""End-to-end acceptance suite.

Ten criteria, one test each, every test printing a single pass line (run
with -s to see them).  Slow by design; deselect with -m "not acceptance".
"""

import json
import random
import time

import pytest

from mapfkit.abstractplan import abstract_plan
from mapfkit.cli import generate_instance
from mapfkit.model import parse_grid, solution_to_json, validate
from mapfkit.motion import (AreaInstance, check_plan, horizon, plan_movements,
                            relax_and_retry)
from mapfkit.negotiate import MigrationCandidate, assign_borders
from mapfkit.partition import LinkGraph, divide
from mapfkit.runtime import RunConfig, solve
from mapfkit.transport import Trace

from helpers import make_area, node_of
from oracles import brute_force_assignment, joint_bfs, link_bfs
from test_motion import random_instance
from test_partition import check_partition_invariants, random_obstacle_map

pytestmark = pytest.mark.acceptance


def ok(n, label, extra=""):
    print(f"criterion {n} ({label}): PASS {extra}".rstrip())


class TestCriterion1RandomSolveRate:
    def test_solve_rate(self):
        t0 = time.monotonic()
        stats = {0.0: [0, 0], 0.1: [0, 0], 0.2: [0, 0]}
        for i in range(100):
            w = h = 12 if i % 2 else 24
            density = (0.0, 0.1, 0.2)[i % 3]
            agents = 5 + (i * 7) % 36
            # dense maps can leave an agent without a reachable spare goal;
            # reseed until generation succeeds
            text = None
            seed = i
            while text is None:
                try:
                    text = generate_instance(w, h, agents, density, seed=seed,
                                             solvable=True)
                except ValueError:
                    seed += 1000
            p = parse_grid(text)
            res = solve(p, RunConfig(timeout=60.0))
            good = res.status == "solved" and validate(p, res.solution).ok
            stats[density][0] += good
            stats[density][1] += 1
        elapsed = time.monotonic() - t0
        easy_rate = (stats[0.0][0] + stats[0.1][0]) / \
            (stats[0.0][1] + stats[0.1][1])
        assert easy_rate >= 0.95
        assert elapsed < 600
        rates = {d: f"{s[0]}/{s[1]}" for d, s in stats.items()}
        ok(1, "random solve rate", f"{rates} in {elapsed:.0f}s")


class TestCriterion2Benchmarks:
    # reference span/moves for 24x24 with growing robot counts, plus 48x48
    REFERENCE = {(24, 24, 23): (41, 443), (24, 24, 46): (44, 960),
                 (24, 24, 69): (51, 1432), (24, 24, 92): (57, 2119),
                 (24, 24, 120): (61, 2751), (48, 48, 92): (104, 2890)}
    TOLERANCE = 2.5

    def test_benchmark_matrix(self):
        lines = []
        for (w, h, n), (ref_span, ref_moves) in self.REFERENCE.items():
            text = generate_instance(w, h, n, 0.0, seed=11, solvable=True)
            p = parse_grid(text)
            t0 = time.monotonic()
            res = solve(p, RunConfig(timeout=180.0))
            elapsed = time.monotonic() - t0
            assert res.status == "solved", f"{w}x{h}/{n}: {res.reason}"
            assert elapsed < 180
            assert validate(p, res.solution).ok
            s = res.solution
            assert s.makespan <= self.TOLERANCE * ref_span, (w, h, n)
            assert s.moves <= self.TOLERANCE * ref_moves, (w, h, n)
            lines.append(f"{w}x{h}/{n}:span={s.makespan},{elapsed:.0f}s")
        ok(2, "benchmark matrix", " ".join(lines))


class TestCriterion3NegotiationOracle:
    def test_assignment_equivalence(self):
        t0 = time.monotonic()
        rng = random.Random(17)
        for _ in range(200):
            n_pairs = rng.randrange(1, 5)
            pairs, coords, nid = [], {}, 10
            for _ in range(n_pairs):
                h, o = nid, nid + 1
                nid += 2
                coords[h] = (rng.randrange(5), rng.randrange(5))
                coords[o] = (rng.randrange(5), rng.randrange(5))
                pairs.append((h, o))
            cands = []
            for i in range(rng.randrange(1, 5)):
                c = MigrationCandidate(i + 1, 0,
                                       (rng.randrange(5), rng.randrange(5)),
                                       1, rng.random() < 0.5)
                c.mandatory = rng.random() < 0.5
                cands.append(c)
            limit = rng.randrange(0, min(len(cands), n_pairs) + 1)
            if sum(c.mandatory for c in cands) > limit:
                for c in cands:
                    c.mandatory = False
            got = assign_borders(cands, pairs, coords, limit)
            want = brute_force_assignment(
                [(c.agent, c.coord, c.host_side, c.mandatory) for c in cands],
                pairs, coords, limit)
            if want is None:
                assert got is None
            else:
                assert got is not None and len(got) == limit
                assert sum(b.distance for b in got) == want
        elapsed = time.monotonic() - t0
        assert elapsed < 30
        ok(3, "negotiation vs brute force", f"200 cases in {elapsed:.1f}s")


class TestCriterion4MotionOracle:
    def test_planner_matches_joint_bfs(self):
        t0 = time.monotonic()
        rng = random.Random(23)
        for _ in range(200):
            inst = random_instance(rng)
            h_m = horizon(len(inst.area.in_nodes), 2.0)
            expected = joint_bfs(inst, h_m)
            plan = plan_movements(inst, h_m)
            if expected is None:
                assert plan is None
            else:
                assert plan is not None and plan.length == expected
                assert check_plan(inst, plan) == []
        elapsed = time.monotonic() - t0
        assert elapsed < 60
        ok(4, "movement planner vs joint BFS", f"200 cases in {elapsed:.1f}s")


class TestCriterion5AbstractOracle:
    def test_area_paths_match_bfs(self):
        rng = random.Random(29)
        for _ in range(100):
            n = rng.randrange(2, 26)
            ids = list(range(1, n + 1))
            pairs = set()
            for _ in range(rng.randrange(1, 2 * n)):
                a, b = rng.sample(ids, 2)
                pairs.add((min(a, b), max(a, b)))
            links = LinkGraph({k: [(0, 0)] for k in pairs})
            s, g = rng.choice(ids), rng.choice(ids)
            expected = link_bfs(links.pairs, s, g)
            got = abstract_plan(links, s, g)
            if expected is None:
                assert got is None
            else:
                assert got is not None and len(got) - 1 == expected
        ok(5, "abstract plans vs link BFS", "100 graphs")


class TestCriterion6PartitionInvariants:
    def test_random_maps(self):
        rng = random.Random(31)
        for _ in range(50):
            p = random_obstacle_map(rng)
            subs, links = divide(p, rng.choice([2, 3, 4, 8]),
                                 rng.choice([2, 3, 4, 8]))
            check_partition_invariants(p, subs, links)
        ok(6, "partition invariants", "50 maps")


class TestCriterion7ProtocolTrace:
    def trace_of(self, text, **cfg):
        trace = Trace()
        p = parse_grid(text)
        res = solve(p, RunConfig(timeout=120.0, **cfg), trace)
        assert res.status == "solved"
        assert validate(p, res.solution).ok
        return res, trace.frames

    def test_protocol_rules(self):
        text = generate_instance(24, 24, 30, 0.0, seed=5, solvable=True)
        res, frames = self.trace_of(text)
        workers = {f["from"] for f in frames if f["kind"] == "track"}
        assert len(workers) > 1

        # service requests only flow from lower to higher worker ids;
        # aggregation flows to the minimum id and is exempt
        for f in frames:
            if f["kind"] == "migrate" and "msg_id" in f and "reply_to" not in f:
                assert f["from"] < f["to"], f
            if f["kind"] == "aggregate":
                assert f["to"] == min(workers)

        # per pair and round: all negotiation before any rejection before
        # any confirmation
        order = {"negotiate": 0, "reject": 1, "confirm": 2}
        last: dict[tuple, int] = {}
        for f in frames:
            if f["kind"] != "migrate":
                continue
            key = (tuple(f["body"]["pair"]), f["round"])
            phase = order[f["phase"]]
            assert phase >= last.get(key, 0), f
            last[key] = phase

        # barrier completeness: every worker posts one track frame per round
        by_round: dict[int, list] = {}
        for f in frames:
            if f["kind"] == "track":
                by_round.setdefault(f["round"], []).append(f["from"])
        for rnd, senders in by_round.items():
            assert sorted(senders) == sorted(workers), rnd

        # surviving cross-worker assignments target distinct borders per
        # destination area and round
        for rnd in by_round:
            rejected = set()
            for f in frames:
                if f["kind"] == "migrate" and f["phase"] == "reject" \
                        and f["round"] == rnd:
                    rejected.update(f["body"].get("rejected", []))
            seen: dict[tuple[int, int], set] = {}
            for f in frames:
                if f["kind"] != "migrate" or f["phase"] != "negotiate" \
                        or f["round"] != rnd or "assignments" not in f["body"]:
                    continue
                lo, hi = f["body"]["pair"]
                for b in f["body"]["assignments"]:
                    if b["agent"] in rejected:
                        continue
                    dest = lo if b["host_side"] else hi
                    spot = seen.setdefault((dest, rnd), set())
                    assert b["to"] not in spot, (dest, rnd, b)
                    spot.add(b["to"])
        ok(7, "protocol trace rules",
           f"{len(frames)} frames, {res.rounds} rounds")


class TestCriterion8CornerRejection:
    def test_contended_corner(self):
        # two migrants from different areas want the same corner crossing
        # of a third area; exactly one is rejected and crosses later
        text = ("agent 1 1 1 3 0\n"
                "agent 2 2 2 3 1\n\n"
                "....\n....\n....\n....\n")
        p = parse_grid(text)
        trace = Trace()
        res = solve(p, RunConfig(dx=2, dy=2, timeout=60.0), trace)
        assert res.status == "solved"
        assert validate(p, res.solution).ok
        rejected = [a for f in trace.frames
                    if f["kind"] == "migrate" and f.get("phase") == "reject"
                    for a in f["body"].get("rejected", [])]
        assert len(rejected) == 1
        loser = rejected[0]
        # the loser still reaches its goal in a later round
        goal = {1: (3, 0), 2: (3, 1)}[loser]
        final = p.coords[res.solution.paths[loser][-1]]
        assert final == goal
        ok(8, "corner rejection", f"agent {loser} rejected once, then crossed")


class TestCriterion9Relaxation:
    def test_farthest_first_strip_and_recovery(self):
        # corridor: a parked goal blocks two would-be migrants; the one
        # farther from the border is stripped first, then the nearer one
        area = make_area(1, [(x, 0) for x in range(5)])
        park = node_of(area, (1, 0))
        exit_border = node_of(area, (0, 0))
        far, near = node_of(area, (4, 0)), node_of(area, (2, 0))
        inst = AreaInstance(area, 0,
                            residents={1: park, 2: far, 3: near},
                            outgoing={2: exit_border, 3: exit_border},
                            plan_goals={1: park, 2: exit_border,
                                        3: exit_border})
        plan, stripped = relax_and_retry(inst, 20)
        assert stripped == [2, 3]
        assert plan is not None and check_plan(inst, plan) == []

        # a congested end-to-end run still terminates with a valid solution
        text = generate_instance(16, 16, 60, 0.0, seed=13, solvable=True)
        p = parse_grid(text)
        res = solve(p, RunConfig(timeout=120.0))
        assert res.status == "solved"
        assert validate(p, res.solution).ok
        ok(9, "relaxation", f"strip order {stripped}, "
           f"60-agent run in {res.elapsed:.1f}s")


class TestCriterion10DeterminismAndTcp:
    def test_inproc_repeats_are_identical(self):
        text = generate_instance(24, 24, 23, 0.0, seed=11, solvable=True)
        outs = []
        for _ in range(2):
            p = parse_grid(text)
            res = solve(p, RunConfig(timeout=120.0))
            assert res.status == "solved"
            outs.append(solution_to_json(p, res.solution).encode())
        assert outs[0] == outs[1]

    def test_tcp_two_workers(self):
        from mapfkit.workerproc import solve_tcp
        text = generate_instance(24, 24, 23, 0.0, seed=11, solvable=True)
        p = parse_grid(text)
        res = solve_tcp(p, RunConfig(dx=12, dy=24, transport="tcp",
                                     timeout=120.0))
        assert res.status == "solved"
        assert validate(p, res.solution).ok
        ok(10, "determinism and tcp",
           f"2 worker processes, span={res.solution.makespan}")
