"""Burst aggregation of remote two-qubit gates.

Groups runs of remote gates that share a node pair and a common qubit into
two-node blocks, allowing members to slide left past commuting gates. This
is both the comparison baseline's only communication optimization and the
preprocessing step the fusion pass builds on.
"""
from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

from .hwmodel import HardwareModel
from .ir import Circuit, CommBlock, Gate, GateKind, Item
from .partition import Mapping
from .transform import BlockPlan, QubitMove, _diag_only


def _gate_classes(gate: Gate) -> dict[int, str]:
    """Per-qubit action class: 'd' diagonal, 'x' bit-flip, 'o' other."""
    out = {}
    for q in gate.qubits:
        k = gate.kind
        if k in (GateKind.Z, GateKind.RZ, GateKind.CZ, GateKind.CP, GateKind.COND_Z):
            out[q] = "d"
        elif k is GateKind.X or k is GateKind.COND_X:
            out[q] = "x"
        elif k in (GateKind.CX, GateKind.MCX):
            out[q] = "x" if q == gate.target else "d"
        else:
            out[q] = "o"
    return out


@dataclass
class _OpenBlock:
    head_pos: int
    members: list[Gate]
    member_pos: list[int]
    common: set[int]
    pair: tuple[int, int]


class _EventIndex:
    """Per-qubit sorted positions of 'd'/'x'/'o' actions seen so far."""

    def __init__(self):
        self.by_class: dict[str, dict[int, list[int]]] = {"d": {}, "x": {}, "o": {}}

    def record(self, gate: Gate, pos: int) -> None:
        for q, cls in _gate_classes(gate).items():
            self.by_class[cls].setdefault(q, []).append(pos)

    def conflicts(self, qubit: int, cls: str, lo: int, hi: int) -> bool:
        """Any event on ``qubit`` in (lo, hi) with a different class?"""
        for other in ("d", "x", "o"):
            if other == cls:
                continue
            lst = self.by_class[other].get(qubit)
            if not lst:
                continue
            if bisect_left(lst, hi) - bisect_right(lst, lo) > 0:
                return True
        return False


def burst_aggregate(circ: Circuit, m: Mapping) -> Circuit:
    """Wrap remote gates into two-node blocks (remote MCX: singleton block).

    A remote two-qubit gate joins the most recent open block with its node
    pair when it still shares a common qubit with every member and commutes
    past everything recorded since that block's last member.
    """
    events = _EventIndex()
    open_by_pair: dict[tuple[int, int], list[_OpenBlock]] = {}
    out: list[Item] = []
    block_of_outpos: dict[int, _OpenBlock] = {}

    for pos, gate in enumerate(circ.gates):
        nodes = sorted({m.node_of(q) for q in gate.qubits})
        remote = len(nodes) > 1
        if not remote:
            out.append(gate)
            events.record(gate, pos)
            continue
        if gate.kind is GateKind.MCX or len(nodes) > 2:
            ob = _OpenBlock(pos, [gate], [pos], set(gate.qubits), (-1, -1))
            out.append(ob)
            events.record(gate, pos)
            continue
        pair = (nodes[0], nodes[1])
        classes = _gate_classes(gate)
        joined = False
        for ob in reversed(open_by_pair.get(pair, [])):
            new_common = ob.common & set(gate.qubits)
            if not new_common:
                continue
            last = ob.member_pos[-1]
            ok = all(not events.conflicts(q, classes[q], last, pos) for q in gate.qubits)
            if ok:
                ob.members.append(gate)
                ob.member_pos.append(pos)
                ob.common = new_common
                joined = True
                break
        if not joined:
            ob = _OpenBlock(pos, [gate], [pos], set(gate.qubits), pair)
            open_by_pair.setdefault(pair, []).append(ob)
            out.append(ob)
        events.record(gate, pos)

    result = Circuit(circ.n_qubits, n_bits=circ.n_bits)
    bid = 0
    for item in out:
        if isinstance(item, _OpenBlock):
            involved = frozenset(m.node_of(q) for g in item.members for q in g.qubits)
            result.items.append(CommBlock(bid, tuple(item.members), involved))
            bid += 1
        else:
            result.items.append(item)
    return result


def assign_burst_protocols(circ: Circuit, m: Mapping, model: HardwareModel,
                           lazy_return: bool = False) -> Circuit:
    """Attach a protocol and EPR plan to every two-node burst block.

    Cat when some common qubit acts only diagonally across the block
    (1 EPR); otherwise teleport the common qubit to the peer node, charging
    the return unless the qubit is never used again (or ``lazy_return``).
    """
    items: list[Item] = []
    tail_cache = list(circ.items)
    for idx, item in enumerate(circ.items):
        if not isinstance(item, CommBlock) or len(item.involved) != 2:
            items.append(item)
            continue
        common = set.intersection(*[set(g.qubits) for g in item.gates])
        cat_candidates = sorted(q for q in common if _diag_only(item.gates, q))
        if cat_candidates:
            q = cat_candidates[0]
            src = m.node_of(q)
            dst = next(n for n in sorted(item.involved) if n != src)
            cross = int(model.cluster_of(src) != model.cluster_of(dst))
            moves = [QubitMove(q, "cat", src, dst)]
            plan = BlockPlan(dst, tuple(moves), 1, cross)
            items.append(item.replace(protocol="cat", target_node=dst, plan=plan))
            continue
        q = sorted(common)[0]
        src = m.node_of(q)
        dst = next(n for n in sorted(item.involved) if n != src)
        used_later = _used_later(tail_cache[idx + 1:], q)
        ret = used_later and not lazy_return
        cross_unit = int(model.cluster_of(src) != model.cluster_of(dst))
        moves = [QubitMove(q, "tp", src, dst, return_move=ret)]
        plan = BlockPlan(dst, tuple(moves), 1 + int(ret), cross_unit * (1 + int(ret)))
        items.append(item.replace(protocol="tp", target_node=dst, plan=plan))
    out = Circuit(circ.n_qubits, items, n_bits=circ.n_bits)
    return out


def _used_later(tail: list[Item], qubit: int) -> bool:
    for it in tail:
        qs = it.qubits() if isinstance(it, CommBlock) else set(it.qubits)
        if qubit in qs:
            return True
    return False
