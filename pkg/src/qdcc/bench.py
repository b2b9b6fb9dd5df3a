"""Benchmark circuit generators.

All generators are pure functions of (n, seed). Counts for the cat-state
chain and QFT follow closed forms (n gates / n-1 CX, and n + 2n(n-1) gates /
n(n-1) CX); the adder and multi-controlled families use the documented
decompositions below and their counts are reported as-is.
"""
from __future__ import annotations

import math

import numpy as np

from .ir import Circuit, Gate, GateKind, mcx


def gen_csp(n: int) -> Circuit:
    """Cat-state preparation: H on qubit 0 followed by a CX chain."""
    if n < 1:
        raise ValueError("csp needs n >= 1")
    circ = Circuit(n)
    circ.add(Gate(GateKind.H, (0,)))
    for i in range(n - 1):
        circ.add(Gate(GateKind.CX, (i, i + 1)))
    return circ


def gen_qft(n: int) -> Circuit:
    """QFT without final swaps; each controlled phase lowered to 2 CX + 2 RZ.

    The 4-gate lowering realizes a controlled-RZ, so the circuit equals the
    textbook QFT only up to per-pair control phases (the counts are what the
    lowering is pinned to; see tests for the exact reference).
    """
    if n < 1:
        raise ValueError("qft needs n >= 1")
    circ = Circuit(n)
    for j in range(n):
        circ.add(Gate(GateKind.H, (j,)))
        for k in range(j + 1, n):
            theta = math.pi / (2 ** (k - j))
            circ.add(Gate(GateKind.CX, (k, j)))
            circ.add(Gate(GateKind.RZ, (j,), angle=-theta / 2))
            circ.add(Gate(GateKind.CX, (k, j)))
            circ.add(Gate(GateKind.RZ, (j,), angle=theta / 2))
    return circ


def gen_mctr(n: int) -> Circuit:
    """Multi-controlled X over all n qubits: n-1 controls, target last.

    Emitted as a single MCX; the compiler lowers it with the ladder/split
    constructions, drawing work qubits from communication buffers.
    """
    if n < 2:
        raise ValueError("mctr needs n >= 2")
    circ = Circuit(n)
    circ.add(mcx(range(n - 1), n - 1))
    return circ


def gen_rca(n: int) -> Circuit:
    """Ripple-carry adder (Cuccaro MAJ/UMA chains) on n = 2k + 2 qubits.

    Layout: [cin, a0, b0, a1, b1, ..., a_{k-1}, b_{k-1}, cout]; computes
    b <- a + b with carry into cout. Toffolis stay as 2-control MCX gates.
    """
    if n < 4 or n % 2 != 0:
        raise ValueError("rca needs even n >= 4")
    k = (n - 2) // 2
    cin, cout = 0, n - 1
    a = [1 + 2 * i for i in range(k)]
    b = [2 + 2 * i for i in range(k)]
    circ = Circuit(n)
    carries = [cin] + a[:-1]

    def maj(c, y, x):
        circ.add(Gate(GateKind.CX, (x, y)))
        circ.add(Gate(GateKind.CX, (x, c)))
        circ.add(mcx((c, y), x))

    def uma(c, y, x):
        circ.add(mcx((c, y), x))
        circ.add(Gate(GateKind.CX, (x, c)))
        circ.add(Gate(GateKind.CX, (c, y)))

    for i in range(k):
        maj(carries[i], b[i], a[i])
    circ.add(Gate(GateKind.CX, (a[-1], cout)))
    for i in reversed(range(k)):
        uma(carries[i], b[i], a[i])
    return circ


def gen_bv(n: int, seed: int = 0) -> Circuit:
    """Bernstein-Vazirani: H layer, oracle CXs for a seeded secret string
    with floor(0.7 * (n-1)) nonzero bits, H layer. Ancilla is qubit n-1."""
    if n < 2:
        raise ValueError("bv needs n >= 2")
    rng = np.random.default_rng(seed)
    n_inputs = n - 1
    weight = int(0.7 * n_inputs)
    hot = sorted(rng.choice(n_inputs, size=weight, replace=False).tolist())
    circ = Circuit(n)
    anc = n - 1
    for q in range(n_inputs):
        circ.add(Gate(GateKind.H, (q,)))
    for q in hot:
        circ.add(Gate(GateKind.CX, (q, anc)))
    for q in range(n_inputs):
        circ.add(Gate(GateKind.H, (q,)))
    return circ


def gen_qaoa(n: int, seed: int = 0) -> Circuit:
    """One maxcut layer on a seeded random graph with average degree
    30 + floor(n/12) (capped below n); per edge CX, RZ, CX."""
    if n < 2:
        raise ValueError("qaoa needs n >= 2")
    rng = np.random.default_rng(seed)
    avg_deg = min(30 + n // 12, n - 1)
    p = avg_deg / (n - 1)
    gamma = 0.7
    circ = Circuit(n)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                circ.add(Gate(GateKind.CX, (i, j)))
                circ.add(Gate(GateKind.RZ, (j,), angle=2 * gamma))
                circ.add(Gate(GateKind.CX, (i, j)))
    return circ


GENERATORS = {
    "csp": lambda n, seed=0: gen_csp(n),
    "qft": lambda n, seed=0: gen_qft(n),
    "mctr": lambda n, seed=0: gen_mctr(n),
    "rca": lambda n, seed=0: gen_rca(n),
    "bv": gen_bv,
    "qaoa": gen_qaoa,
}


def generate(family: str, n: int, seed: int = 0) -> Circuit:
    if family not in GENERATORS:
        raise ValueError(f"unknown benchmark family {family!r} (choose from {sorted(GENERATORS)})")
    return GENERATORS[family](n, seed=seed)


def worked_example_circuit() -> Circuit:
    """Three-node example with five alternating two-node interactions.

    With burst aggregation alone each interaction stays its own block (five
    EPR pairs); fusing them into one collective block needs only a share of
    qubit 0 plus a move of qubit 1.
    """
    circ = Circuit(3)
    for _ in range(2):
        circ.add(Gate(GateKind.CX, (0, 2)))
        circ.add(Gate(GateKind.CX, (2, 1)))
    circ.add(Gate(GateKind.CX, (0, 2)))
    return circ
