"""Initial qubit placement: interaction graph + iterated best-pair exchange.

The exchange heuristic starts from a balanced contiguous assignment and
repeatedly applies the single swap (or move to a free slot) with the largest
cut-weight reduction until no improving exchange exists. Deterministic:
ties break toward the lowest-index qubit pair.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hwmodel import HardwareModel
from .ir import Circuit, GateKind


class CapacityError(ValueError):
    pass


@dataclass
class Mapping:
    """Logical qubit -> (node, slot) plus per-node reserved buffer sizes."""

    assignment: dict[int, tuple[int, int]]
    buffer_slots: dict[int, int]
    model: HardwareModel

    def node_of(self, qubit: int) -> int:
        return self.assignment[qubit][0]

    def qubits_on(self, node: int) -> list[int]:
        return sorted(q for q, (n, _) in self.assignment.items() if n == node)

    def program_count(self, node: int) -> int:
        return sum(1 for (n, _) in self.assignment.values() if n == node)

    def used_nodes(self) -> list[int]:
        return sorted({n for (n, _) in self.assignment.values()})

    def free_data_qubits(self, node: int) -> int:
        return self.model.data_qubits[node] - self.program_count(node) - self.buffer_slots.get(node, 0)

    def idle_data_qubits(self) -> int:
        """Idle data qubits on non-idle nodes (the buffer budget)."""
        total = 0
        for node in self.used_nodes():
            total += self.model.data_qubits[node] - self.program_count(node)
        return total

    def validate(self) -> None:
        seen: set[tuple[int, int]] = set()
        for q, (node, slot) in self.assignment.items():
            if (node, slot) in seen:
                raise CapacityError(f"slot ({node},{slot}) assigned twice")
            seen.add((node, slot))
        for node in self.model.nodes():
            used = self.program_count(node) + self.buffer_slots.get(node, 0)
            if used > self.model.data_qubits[node]:
                raise CapacityError(f"node {node} over capacity ({used} > {self.model.data_qubits[node]})")

    def copy(self) -> "Mapping":
        return Mapping(dict(self.assignment), dict(self.buffer_slots), self.model)


def interaction_graph(circ: Circuit) -> np.ndarray:
    """Symmetric weight matrix: multi-qubit gate count per qubit pair.

    An MCX contributes one unit to every control-control and control-target
    pair it touches.
    """
    n = circ.n_qubits
    w = np.zeros((n, n), dtype=np.int64)
    for g in circ.gates:
        if len(g.qubits) < 2 or g.kind is GateKind.MEASURE_Z:
            continue
        qs = g.qubits
        for i in range(len(qs)):
            for j in range(i + 1, len(qs)):
                w[qs[i], qs[j]] += 1
                w[qs[j], qs[i]] += 1
    return w


def cut_weight(w: np.ndarray, node_of: np.ndarray) -> int:
    cross = node_of[:, None] != node_of[None, :]
    return int(np.sum(w * cross) // 2)


def fixed_mapping(assign: dict[int, int], model: HardwareModel) -> Mapping:
    """Build a Mapping from an explicit qubit -> node map (slots packed)."""
    slots: dict[int, int] = {}
    assignment = {}
    for q in sorted(assign):
        node = assign[q]
        slot = slots.get(node, 0)
        assignment[q] = (node, slot)
        slots[node] = slot + 1
    m = Mapping(assignment, {}, model)
    m.validate()
    return m


def oee_partition(w: np.ndarray, model: HardwareModel, reserve_per_node: int = 1) -> Mapping:
    """Best-improvement exchange partition of the interaction graph.

    ``reserve_per_node`` data qubits stay unassigned on every node that
    receives program qubits, so the buffer allocator always has room.
    """
    n = w.shape[0]
    nodes = model.nodes()
    caps = np.array([max(model.data_qubits[v] - reserve_per_node, 0) for v in nodes])
    if n > caps.sum():
        raise CapacityError(f"{n} program qubits exceed capacity {caps.sum()}")

    # balanced contiguous start: fill nodes in id order
    node_of = np.empty(n, dtype=np.int64)
    load = np.zeros(len(nodes), dtype=np.int64)
    idx = 0
    for q in range(n):
        while load[idx] >= caps[idx]:
            idx += 1
        node_of[q] = idx
        load[idx] += 1

    wf = w.astype(np.float64)
    # W[q, c] = total interaction weight between q and qubits on node c
    W = np.zeros((n, len(nodes)), dtype=np.float64)
    for c in range(len(nodes)):
        W[:, c] = wf[:, node_of == c].sum(axis=1)

    while True:
        Wa_own = W[np.arange(n), node_of]
        W_at = W[np.arange(n)[:, None], node_of[None, :]]  # W[a, node_of[b]]
        # cut reduction for swapping a and b: each gains its weight toward the
        # other side and loses its home-side weight; the (a,b) edge itself
        # stays cut, so its appearance in both W terms is removed again
        gain = (W_at - Wa_own[:, None]) + (W_at.T - Wa_own[None, :]) - 2.0 * wf
        same = node_of[:, None] == node_of[None, :]
        gain[same] = -np.inf
        np.fill_diagonal(gain, -np.inf)

        best_swap = float(np.max(gain)) if gain.size else -np.inf
        move_gain = W - Wa_own[:, None]  # move qubit a to node c
        room = (load < caps)[None, :].repeat(n, 0)
        move_gain[~room] = -np.inf
        move_gain[np.arange(n), node_of] = -np.inf
        best_move = float(np.max(move_gain)) if move_gain.size else -np.inf

        if max(best_swap, best_move) <= 1e-12:
            break
        if best_swap >= best_move:
            a, b = np.unravel_index(int(np.argmax(gain)), gain.shape)
            if a > b:
                a, b = b, a
            ca, cb = node_of[a], node_of[b]
            node_of[a], node_of[b] = cb, ca
            for q, old, new in ((a, ca, cb), (b, cb, ca)):
                W[:, old] -= wf[:, q]
                W[:, new] += wf[:, q]
        else:
            a, c = np.unravel_index(int(np.argmax(move_gain)), move_gain.shape)
            old = node_of[a]
            node_of[a] = c
            load[old] -= 1
            load[c] += 1
            W[:, old] -= wf[:, a]
            W[:, c] += wf[:, a]

    assignment = {}
    slot_counter: dict[int, int] = {}
    for q in range(n):
        node = nodes[int(node_of[q])]
        s = slot_counter.get(node, 0)
        assignment[q] = (node, s)
        slot_counter[node] = s + 1
    mapping = Mapping(assignment, {}, model)
    mapping.validate()
    return mapping


def neighbor_mapping(m: Mapping, rng: np.random.Generator) -> Mapping:
    """One uniformly chosen legal perturbation: cross-node swap or a move to
    a free slot. Returns the input mapping when no legal move exists."""
    out = m.copy()
    qubits = sorted(out.assignment)
    nodes = out.model.nodes()
    moves: list[tuple] = []
    by_node: dict[int, list[int]] = {}
    for q in qubits:
        by_node.setdefault(out.node_of(q), []).append(q)
    node_list = sorted(by_node)
    for i, na in enumerate(node_list):
        for nb in node_list[i + 1:]:
            moves.append(("swap", na, nb))
    for node in nodes:
        free = out.model.data_qubits[node] - out.program_count(node) - out.buffer_slots.get(node, 0)
        if free > 0:
            for src in node_list:
                if src != node:
                    moves.append(("move", src, node))
    if not moves:
        return out
    kind, x, y = moves[int(rng.integers(len(moves)))]
    if kind == "swap":
        qa = by_node[x][int(rng.integers(len(by_node[x])))]
        qb = by_node[y][int(rng.integers(len(by_node[y])))]
        sa, sb = out.assignment[qa], out.assignment[qb]
        out.assignment[qa], out.assignment[qb] = sb, sa
    else:
        qa = by_node[x][int(rng.integers(len(by_node[x])))]
        used = {slot for (n2, slot) in out.assignment.values() if n2 == y}
        slot = 0
        while slot in used:
            slot += 1
        out.assignment[qa] = (y, slot)
    out.validate()
    return out
