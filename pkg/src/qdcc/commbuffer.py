"""Communication buffer sizing and bookkeeping.

A node's buffer is a set of reserved data-qubit slots holding EPR halves,
cat-share copies, or lazily parked teleported qubits. Initial sizes double
the larger of two demands: how many EPR pairs the longest incoming block
could consume while one more is being prepared, and how many inter-node
blocks can run against the node in parallel. Half the buffer serves live
requests, half buffers ahead.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hwmodel import HardwareModel
from .ir import Circuit, CommBlock, Gate, GateKind
from .mcx import lowered_gate_total
from .partition import Mapping

T_BUF = 2.0  # depth-2 swap protocol moving an EPR half into the buffer


def gate_sizing_duration(gate: Gate, timing) -> float:
    """Serial duration contribution for buffer sizing (lowered for MCX)."""
    if gate.kind is GateKind.MCX and len(gate.qubits) > 3:
        n_gates, n_cx = lowered_gate_total(gate, spare_count=1)
        return n_cx * timing.t_2q + (n_gates - n_cx) * timing.t_1q
    cls = gate.duration_class()
    if cls == "measure":
        return timing.t_ms
    return timing.t_1q if cls == "one-q" else timing.t_2q


def block_local_duration(blk: CommBlock, timing) -> float:
    return sum(gate_sizing_duration(g, timing) for g in blk.gates)


def provisional_target(blk: CommBlock, m: Mapping) -> int:
    """Node where the block would execute locally before routing decides.

    MCX-bearing blocks execute where the X-target lives; otherwise the node
    hosting most of the block's qubits, ties toward the lower node id.
    """
    for g in blk.gates:
        if g.kind in (GateKind.MCX, GateKind.CX):
            return m.node_of(g.target)
    counts: dict[int, int] = {}
    for q in blk.qubits():
        counts[m.node_of(q)] = counts.get(m.node_of(q), 0) + 1
    return max(sorted(counts), key=lambda nd: counts[nd])


def max_parallel_blocks(blocks: list[CommBlock], node: int, m: Mapping) -> int:
    """Maximum antichain size of inter-node blocks involving ``node``.

    Blocks are dependency-ordered by program position; two blocks are
    independent when their qubit supports are disjoint. A level scan over
    the dependency DAG gives the exact maximum width.
    """
    mine = [b for b in blocks if node in b.involved]
    if not mine:
        return 0
    supports = [b.qubits() for b in mine]
    level = [0] * len(mine)
    for i in range(len(mine)):
        for j in range(i):
            if supports[i] & supports[j]:
                level[i] = max(level[i], level[j] + 1)
    width: dict[int, int] = {}
    for lv in level:
        width[lv] = width.get(lv, 0) + 1
    return max(width.values())


def buffer_size_init(node: int, circ_after_burst: Circuit, m: Mapping,
                     model: HardwareModel) -> int:
    """Initial buffer size: 2 * max(throughput demand, parallelism demand)."""
    if m.program_count(node) == 0:
        return 0
    blocks = circ_after_burst.blocks
    throughput = 0
    for blk in blocks:
        if node not in blk.involved or len(blk.involved) < 2:
            continue
        if provisional_target(blk, m) != node:
            continue
        t_b = block_local_duration(blk, model.timing)
        peers = sorted(blk.involved - {node})
        t_ep = max(model.epr_latency(node, p) for p in peers)
        throughput = max(throughput, int(t_b // (t_ep + T_BUF)))
    r_pb = max_parallel_blocks([b for b in blocks if len(b.involved) >= 2], node, m)
    return 2 * max(throughput, r_pb)


def shrink_proportional(sizes: dict[int, int], n_idleq: int) -> dict[int, int]:
    """Scale sizes so their sum fits the idle-qubit budget.

    Floor-scale, hand out the remainder largest-fraction-first, then make
    sure every originally non-zero node keeps at least one slot when the
    budget allows it.
    """
    if n_idleq < 0:
        raise ValueError("n_idleq must be >= 0")
    total = sum(sizes.values())
    if total <= n_idleq:
        return dict(sizes)
    nodes = sorted(sizes)
    scaled = {}
    remainders = []
    for node in nodes:
        exact = sizes[node] * n_idleq / total
        scaled[node] = int(exact)
        remainders.append((-(exact - int(exact)), node))
    slack = n_idleq - sum(scaled.values())
    for _, node in sorted(remainders):
        if slack <= 0:
            break
        scaled[node] += 1
        slack -= 1
    nonzero = [n for n in nodes if sizes[n] > 0]
    if n_idleq >= len(nonzero):
        for node in nonzero:
            if scaled[node] == 0:
                donor = max(nodes, key=lambda v: (scaled[v], -v))
                if scaled[donor] > 1:
                    scaled[donor] -= 1
                    scaled[node] = 1
    return scaled


def neighbor_buffer(sizes: dict[int, int], m: Mapping, rng: np.random.Generator) -> dict[int, int]:
    """Perturb one node's size by +-1, respecting the idle budget and
    per-node capacity."""
    n_idleq = m.idle_data_qubits()
    total = sum(sizes.values())
    options: list[tuple[int, int]] = []
    for node in sorted(sizes):
        cap = m.model.data_qubits[node] - m.program_count(node)
        if sizes[node] + 1 <= cap and total + 1 <= n_idleq:
            options.append((node, +1))
        if sizes[node] >= 1:
            options.append((node, -1))
    if not options:
        return dict(sizes)
    node, delta = options[int(rng.integers(len(options)))]
    out = dict(sizes)
    out[node] += delta
    return out


class BufferError(ValueError):
    pass


@dataclass
class BufferLedger:
    """Tracks buffer occupancy per node plus the global EPR consumption log."""

    sizes: dict[int, int]
    occupied: dict[int, int] = field(default_factory=dict)
    epr_log: list[tuple[int, int, str]] = field(default_factory=list)  # (a, b, kind)
    conversions: list[tuple[int, str]] = field(default_factory=list)

    def free_slots(self, node: int) -> int:
        return self.sizes.get(node, 0) - self.occupied.get(node, 0)

    def reserve(self, node: int, count: int = 1) -> None:
        if self.free_slots(node) < count:
            raise BufferError(f"node {node} has {self.free_slots(node)} free buffer slots, needs {count}")
        self.occupied[node] = self.occupied.get(node, 0) + count

    def release(self, node: int, count: int = 1) -> None:
        cur = self.occupied.get(node, 0)
        if cur < count:
            raise BufferError(f"node {node} releasing {count} slots but only {cur} occupied")
        self.occupied[node] = cur - count

    def charge_epr(self, a: int, b: int, kind: str) -> None:
        if kind not in ("intra", "inter"):
            raise ValueError(kind)
        self.epr_log.append((a, b, kind))

    def convert_virtual_to_program(self, node: int, note: str = "") -> None:
        """A buffer slot becomes a program qubit (lazy parking, split ancilla).

        The slot stays accounted as occupied; the conversion is logged so
        later moves are charged at move time, not conversion time.
        """
        if self.occupied.get(node, 0) < 1:
            raise BufferError(f"node {node} has no occupied buffer slot to convert")
        self.conversions.append((node, note))

    def total_epr(self) -> int:
        return len(self.epr_log)

    def cross_epr(self) -> int:
        return sum(1 for (_, _, kind) in self.epr_log if kind == "inter")

    def copy(self) -> "BufferLedger":
        return BufferLedger(dict(self.sizes), dict(self.occupied), list(self.epr_log),
                            list(self.conversions))
