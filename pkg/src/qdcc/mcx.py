"""Multi-controlled X lowering to the fixed gate alphabet.

Two building blocks:

* ``ladder_mcx``: a 4(k-2)-Toffoli network using k-2 borrowed (dirty) work
  qubits. Work-qubit Toffolis are relative-phase (Margolus-style) with the
  second half adjointed so phases cancel; the two target-touching apex
  Toffolis are exact.
* ``split_borrowed_mcx``: the one-borrowed-qubit recursion that sandwiches
  two half-size ladders (p1 p2 p1' p2'), 8k-24 Toffolis total, for nodes
  whose only spare qubits are the two buffer slots.

Both are exact up to global phase with arbitrary (dirty) work-qubit states;
the test suite checks this against dense matrices.
"""
from __future__ import annotations

import math

from .ir import Gate, GateKind, mcx

_T = math.pi / 4


def _rz(q: int, angle: float) -> Gate:
    return Gate(GateKind.RZ, (q,), angle=angle)


def _h(q: int) -> Gate:
    return Gate(GateKind.H, (q,))


def _cx(a: int, b: int) -> Gate:
    return Gate(GateKind.CX, (a, b))


def ccx(a: int, b: int, t: int) -> list[Gate]:
    """Exact Toffoli, 6 CX + 9 single-qubit gates."""
    return [
        _h(t),
        _cx(b, t), _rz(t, -_T),
        _cx(a, t), _rz(t, _T),
        _cx(b, t), _rz(t, -_T),
        _cx(a, t), _rz(b, _T), _rz(t, _T),
        _h(t),
        _cx(a, b), _rz(a, _T), _rz(b, -_T),
        _cx(a, b),
    ]


def rccx(a: int, b: int, t: int, adjoint: bool = False) -> list[Gate]:
    """Margolus relative-phase Toffoli: 3 CX + 6 single-qubit gates."""
    s = -1.0 if adjoint else 1.0
    seq = [
        _h(t), _rz(t, s * _T),
        _cx(b, t), _rz(t, -s * _T),
        _cx(a, t), _rz(t, s * _T),
        _cx(b, t), _rz(t, -s * _T),
        _h(t),
    ]
    return seq if not adjoint else list(reversed(seq))


def toffoli_count_ladder(k: int) -> int:
    if k <= 2:
        return 1
    return 4 * (k - 2)


def toffoli_count_split(k: int) -> int:
    if k <= 2:
        return toffoli_count_ladder(k)
    m = (k + 1) // 2
    return 2 * toffoli_count_ladder(m) + 2 * toffoli_count_ladder(k - m + 1)


def ladder_mcx(controls: list[int], target: int, works: list[int],
               exact_apex: bool = True) -> list[Gate]:
    """k-controlled X using k-2 dirty work qubits.

    Network: two identical-shape halves [apex, down-sweep, bottom, up-sweep];
    the second half uses adjoint relative-phase Toffolis. Work qubits are
    restored to their input states.
    """
    k = len(controls)
    if k == 0:
        raise ValueError("need at least one control")
    if k == 1:
        return [_cx(controls[0], target)]
    if k == 2:
        return ccx(controls[0], controls[1], target)
    if len(works) < k - 2:
        raise ValueError(f"{k}-control ladder needs {k - 2} work qubits, got {len(works)}")
    w = works[: k - 2]

    def apex(adj: bool) -> list[Gate]:
        if exact_apex:
            return ccx(controls[k - 1], w[k - 3], target)
        return rccx(controls[k - 1], w[k - 3], target, adjoint=adj)

    def sweeps(adj: bool) -> list[Gate]:
        seq: list[Gate] = []
        for i in range(k - 2, 1, -1):
            seq += rccx(controls[i], w[i - 2], w[i - 1], adjoint=adj)
        seq += rccx(controls[0], controls[1], w[0], adjoint=adj)
        for i in range(2, k - 1):
            seq += rccx(controls[i], w[i - 2], w[i - 1], adjoint=adj)
        return seq

    return apex(False) + sweeps(False) + apex(True) + sweeps(True)


def split_borrowed_mcx(controls: list[int], target: int, borrowed: int) -> list[Gate]:
    """k-controlled X using one borrowed qubit, 8k-24 Toffolis for k >= 3.

    The borrowed qubit may hold arbitrary state; halves of the control set
    serve as each other's dirty work qubits.
    """
    k = len(controls)
    if k <= 2:
        return ladder_mcx(controls, target, [])
    m = (k + 1) // 2
    first, second = list(controls[:m]), list(controls[m:])
    # piece 1: AND of the first half onto the borrowed qubit, works from the
    # second half plus the target; piece 2 folds the rest onto the target.
    works1 = (second + [target])[: max(m - 2, 0)]
    piece2_controls = second + [borrowed]
    works2 = first[: max(len(piece2_controls) - 2, 0)]
    p1 = ladder_mcx(first, borrowed, works1)
    p2 = ladder_mcx(piece2_controls, target, works2)
    return p1 + p2 + p1 + p2


def lower_mcx(gate: Gate, spares: list[int]) -> list[Gate]:
    """Lower an MCX gate given spare local qubits (first one may be dirty).

    Uses the direct ladder when enough spares exist, otherwise the borrowed
    split (which needs a single spare).
    """
    if gate.kind is not GateKind.MCX:
        raise ValueError("not an MCX gate")
    controls, target = list(gate.qubits[:-1]), gate.qubits[-1]
    k = len(controls)
    if k <= 2:
        return ladder_mcx(controls, target, [])
    if len(spares) >= k - 2:
        return ladder_mcx(controls, target, spares[: k - 2])
    if len(spares) >= 1:
        return split_borrowed_mcx(controls, target, spares[0])
    raise ValueError(f"lowering a {k}-control MCX needs at least one spare qubit")


def lowered_gate_total(gate: Gate, spare_count: int) -> tuple[int, int]:
    """(gate count, CX count) of the lowering without materializing it."""
    if gate.kind is not GateKind.MCX:
        return 1, 1 if gate.kind is GateKind.CX else 0
    k = len(gate.qubits) - 1
    if k == 1:
        return 1, 1
    if k == 2:
        return 15, 6
    toffolis = toffoli_count_ladder(k) if spare_count >= k - 2 else toffoli_count_split(k)
    exact = 4 if spare_count < k - 2 else 2  # apex Toffolis per ladder
    rp = toffolis - exact
    return exact * 15 + rp * 9, exact * 6 + rp * 3


def serial_duration(gates: list[Gate], t_1q: float, t_2q: float, t_ms: float) -> float:
    total = 0.0
    for g in gates:
        cls = g.duration_class()
        total += t_ms if cls == "measure" else (t_1q if cls == "one-q" else t_2q)
    return total
