"""Routing of communication on the channel graph.

Cat multicasts ride a minimum spanning tree over the involved nodes (with
beneficial relays admitted); teleport moves take shortest -ln(fidelity)
paths. Cross-cluster fan-out enters each destination cluster over exactly
one inter-cluster edge and relays onward inside the cluster, except in
parallel mode where a busy preferred channel is swapped for any available
inter-cluster channel into the same cluster.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

from .hwmodel import HardwareModel


class RouteError(ValueError):
    pass


@dataclass(frozen=True)
class RouteEdge:
    src: int
    dst: int
    kind: str  # 'intra' | 'inter'
    weight: float


@dataclass
class RoutePlan:
    """Directed channel uses realizing one share or move."""

    source: int
    destinations: tuple[int, ...]
    edges: tuple[RouteEdge, ...]
    relays: tuple[int, ...]

    @property
    def epr_count(self) -> int:
        return len(self.edges)

    @property
    def inter_count(self) -> int:
        return sum(1 for e in self.edges if e.kind == "inter")

    def fidelity(self, model: HardwareModel) -> float:
        return math.exp(-sum(e.weight for e in self.edges))


def _mst_over(nodes: list[int], graph: dict[int, dict[int, float]]) -> tuple[float, list[tuple[int, int]]]:
    """Kruskal over the induced subgraph; ties break on the lower id pair."""
    edges = sorted(
        (w, a, b)
        for a in nodes
        for b, w in graph.get(a, {}).items()
        if b in nodes and a < b
    )
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    total, chosen, joined = 0.0, [], 0
    for w, a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            chosen.append((a, b))
            total += w
            joined += 1
            if joined == len(nodes) - 1:
                break
    if joined != len(nodes) - 1:
        raise RouteError(f"involved nodes {nodes} are not connected")
    return total, chosen


def mst_route(source: int, dests: list[int], graph: dict[int, dict[int, float]],
              relay_candidates: list[int] | None = None) -> RoutePlan:
    """Spanning tree over {source} + destinations, admitting relays only
    when they lower the total tree weight."""
    base = sorted(set([source] + list(dests)))
    candidates = [n for n in (relay_candidates or graph.keys()) if n not in base]
    best_weight, best_edges, best_relays = None, None, ()
    for r in range(min(len(candidates), 2) + 1):
        # pendant relays only add weight, so trees that would keep one are
        # always beaten by the smaller node set enumerated at r-1
        for extra in itertools.combinations(candidates, r):
            nodes = base + list(extra)
            try:
                w, edges = _mst_over(nodes, graph)
            except RouteError:
                continue
            if best_weight is None or w < best_weight - 1e-15:
                best_weight, best_edges, best_relays = w, edges, extra
    if best_edges is None:
        raise RouteError(f"no spanning tree covers {base}")
    directed = _orient(source, best_edges, graph)
    return RoutePlan(source, tuple(dests), tuple(directed), tuple(best_relays))


def _orient(source: int, edges: list[tuple[int, int]], graph) -> list[RouteEdge]:
    adj: dict[int, list[int]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    out, seen, order = [], {source}, [source]
    while order:
        cur = order.pop(0)
        for nxt in sorted(adj.get(cur, [])):
            if nxt in seen:
                continue
            seen.add(nxt)
            order.append(nxt)
            out.append((cur, nxt))
    return [RouteEdge(a, b, "intra", graph[a][b]) for a, b in out]


def shortest_path(a: int, b: int, graph: dict[int, dict[int, float]]) -> list[tuple[int, int]]:
    """Dijkstra on -ln(fidelity) weights; deterministic neighbor order."""
    dist = {a: 0.0}
    prev: dict[int, int] = {}
    heap = [(0.0, a)]
    done = set()
    while heap:
        d, cur = heapq.heappop(heap)
        if cur in done:
            continue
        done.add(cur)
        if cur == b:
            break
        for nxt in sorted(graph.get(cur, {})):
            nd = d + graph[cur][nxt]
            if nd < dist.get(nxt, math.inf) - 1e-15:
                dist[nxt] = nd
                prev[nxt] = cur
                heapq.heappush(heap, (nd, nxt))
    if b not in dist:
        raise RouteError(f"no path {a} -> {b}")
    path, cur = [], b
    while cur != a:
        path.append((prev[cur], cur))
        cur = prev[cur]
    return list(reversed(path))


def inter_cluster_route(source: int, dests: list[int], model: HardwareModel,
                        graph: dict[int, dict[int, float]],
                        channel_score=None) -> RoutePlan:
    """One inter-cluster edge per destination cluster, intra fan-out beyond.

    Candidate inter channels are scored by total path weight (feed to the
    channel, the channel itself, fan-out from the relay); ``channel_score``
    adds the scheduler's stall penalty so a busy preferred channel can lose
    to an idle alternative into the same cluster.
    """
    src_cluster = model.cluster_of(source)
    by_cluster: dict[int, list[int]] = {}
    for d in dests:
        by_cluster.setdefault(model.cluster_of(d), []).append(d)

    edges: list[RouteEdge] = []
    relays: list[int] = []
    local = by_cluster.pop(src_cluster, [])
    if local:
        plan = mst_route(source, local, _cluster_subgraph(graph, model, src_cluster))
        edges.extend(plan.edges)
        relays.extend(plan.relays)

    for cluster in sorted(by_cluster):
        targets = by_cluster[cluster]
        sub = _cluster_subgraph(graph, model, cluster)
        options = []
        for ch in model.channels:
            ka, kb = model.cluster_of(ch.a), model.cluster_of(ch.b)
            if {ka, kb} != {src_cluster, cluster}:
                continue
            a, b = (ch.a, ch.b) if ka == src_cluster else (ch.b, ch.a)
            feed = 0.0 if a == source else shortest_path_weight(source, a, graph)
            w = -math.log(ch.fidelity)
            rest = [t for t in targets if t != b]
            try:
                fanout = _mst_over(sorted(set([b] + rest)), sub)[0] if rest else 0.0
            except RouteError:
                continue
            stall = channel_score(a, b) if channel_score is not None else 0.0
            options.append((feed + w + fanout + stall, feed + w + fanout, a, b))
        if not options:
            raise RouteError(f"no inter-cluster channel toward cluster {cluster}")
        options.sort()
        a, b = options[0][2], options[0][3]
        if a != source:
            for pa, pb in shortest_path(source, a, _cluster_subgraph(graph, model, src_cluster)):
                edges.append(RouteEdge(pa, pb, "intra", graph[pa][pb]))
                relays.append(pb)
        edges.append(RouteEdge(a, b, "inter", graph[a][b]))
        relay = b
        if relay not in targets:
            relays.append(relay)
        rest = [t for t in targets if t != relay]
        if rest:
            sub = _cluster_subgraph(graph, model, cluster)
            plan = mst_route(relay, rest, sub)
            edges.extend(plan.edges)
            relays.extend(plan.relays)
    return RoutePlan(source, tuple(dests), tuple(edges), tuple(sorted(set(relays))))


def shortest_path_weight(a: int, b: int, graph) -> float:
    return sum(graph[x][y] for x, y in shortest_path(a, b, graph))


def _cluster_subgraph(graph, model: HardwareModel, cluster: int):
    keep = {n for n in graph if model.cluster_of(n) == cluster}
    return {a: {b: w for b, w in nbrs.items() if b in keep}
            for a, nbrs in graph.items() if a in keep}


def route_share(source: int, dest: int, model: HardwareModel, graph,
                channel_score=None, mode: str = "parallel") -> RoutePlan:
    """Route one cat share or teleport move from source to a single node."""
    if model.cluster_of(source) == model.cluster_of(dest):
        sub = _cluster_subgraph(graph, model, model.cluster_of(source))
        if mode == "shortest":
            path = shortest_path(source, dest, sub)
            edges = tuple(RouteEdge(a, b, "intra", graph[a][b]) for a, b in path)
            relays = tuple(b for a, b in path[:-1])
            return RoutePlan(source, (dest,), edges, relays)
        return mst_route(source, [dest], sub)
    score = channel_score if mode == "parallel" else None
    return inter_cluster_route(source, [dest], model, graph, channel_score=score)
