"""Small-scale statevector oracle.

Simulates circuits of up to 12 live wires, enumerating or sampling
measurement branches, with classically conditioned corrections applied per
branch. Measured wires are projected out of the register so protocol
expansions (which burn through many short-lived EPR wires) stay within the
width cap.

The inner gate-application loops live in a compiled extension when it built
successfully; otherwise a numpy fallback is used. ``KERNEL_BACKEND`` reports
which one is active.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ir import Circuit, Gate, GateKind

try:  # compiled kernels are optional
    from . import _sv_cy as _kern

    KERNEL_BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on build environment
    from . import _sv_py as _kern

    KERNEL_BACKEND = "numpy"

from . import _sv_py as _kern_py

MAX_WIRES = 12
MAX_ENUM_BRANCHES = 1024
_SAMPLE_COUNT = 128

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def gate_unitary(gate: Gate, n: int, wire_of: dict[int, int] | None = None) -> np.ndarray:
    """Dense unitary of ``gate`` embedded on ``n`` wires (conditions ignored)."""
    wires = [wire_of[q] if wire_of else q for q in gate.qubits]
    u = np.eye(2**n, dtype=complex)
    for basis in range(2**n):
        vec = np.zeros(2**n, dtype=complex)
        vec[basis] = 1.0
        u[:, basis] = _apply_gate_dense(vec, n, gate.kind, wires, gate.angle)
    return u


def _apply_gate_dense(state, n, kind, wires, angle):
    sv = StateVector(n)
    sv.amps = state.copy()
    sv._apply(kind, wires, angle)
    return sv.amps


def circuit_unitary(circ: Circuit, n: int | None = None) -> np.ndarray:
    """Unitary of a measurement-free circuit (columns built by simulation)."""
    n = n if n is not None else circ.n_qubits
    dim = 2**n
    if n > MAX_WIRES:
        raise ValueError(f"{n} wires exceeds the {MAX_WIRES}-wire simulation cap")
    u = np.empty((dim, dim), dtype=complex)
    for basis in range(dim):
        sv = StateVector(n)
        sv.amps[:] = 0
        sv.amps[basis] = 1.0
        for g in circ.gates:
            if g.kind is GateKind.MEASURE_Z:
                raise ValueError("circuit_unitary needs a measurement-free circuit")
            sv._apply(g.kind, list(g.qubits), g.angle)
        u[:, basis] = sv.amps
    return u


@dataclass
class StateVector:
    """Dense state over an ordered list of live wires."""

    n: int
    amps: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.amps is None:
            self.amps = np.zeros(2**self.n, dtype=complex)
            self.amps[0] = 1.0

    def copy(self) -> "StateVector":
        sv = StateVector(self.n, self.amps.copy())
        return sv

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def _apply(self, kind: GateKind, wires: list[int], angle: float | None):
        n, a = self.n, self.amps
        if kind is GateKind.H:
            self.amps = _kern.apply_1q(a, n, wires[0], _H)
        elif kind is GateKind.X or kind is GateKind.COND_X:
            self.amps = _kern.apply_1q(a, n, wires[0], _X)
        elif kind is GateKind.Z or kind is GateKind.COND_Z:
            self.amps = _kern.apply_1q(a, n, wires[0], _Z)
        elif kind is GateKind.RZ:
            d = np.array([np.exp(-1j * angle / 2), np.exp(1j * angle / 2)])
            self.amps = _kern.apply_diag(a, n, tuple(wires), d)
        elif kind is GateKind.CZ:
            d = np.array([1, 1, 1, -1], dtype=complex)
            self.amps = _kern.apply_diag(a, n, tuple(wires), d)
        elif kind is GateKind.CP:
            d = np.array([1, 1, 1, np.exp(1j * angle)], dtype=complex)
            self.amps = _kern.apply_diag(a, n, tuple(wires), d)
        elif kind is GateKind.CX:
            u = np.eye(4, dtype=complex)
            u[2:, 2:] = _X
            self.amps = _kern.apply_2q(a, n, wires[0], wires[1], u)
        elif kind is GateKind.MCX:
            self._apply_mcx(wires)
        else:
            raise ValueError(f"cannot simulate {kind}")

    def _apply_mcx(self, wires: list[int]):
        # permutation on the full register; fine at oracle scale
        n = self.n
        controls, target = wires[:-1], wires[-1]
        t = self.amps.reshape((2,) * n).copy()
        idx = tuple(slice(1, 2) if w in controls else slice(None) for w in range(n))
        t[idx] = np.flip(t[idx], axis=target).copy()  # control axes stay singleton
        self.amps = t.reshape(-1)


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    return abs(np.vdot(a, b)) >= 1.0 - tol


def unitaries_equal_up_to_phase(u: np.ndarray, v: np.ndarray, tol: float = 1e-9) -> bool:
    if u.shape != v.shape:
        raise ValueError("dimension mismatch")
    tr = np.trace(u.conj().T @ v)
    return abs(abs(tr) - u.shape[0]) <= tol * u.shape[0]


@dataclass
class Branch:
    """One measurement branch: final state, its probability weight, outcomes."""

    state: np.ndarray
    weight: float
    bits: dict[int, int]
    wires: list[int]  # logical wire labels, in register order


class Simulator:
    """Branch-enumerating simulator over dynamically allocated wires.

    Wires are labelled by integers. ``alloc`` introduces a fresh |0> wire;
    measuring projects the wire out, so the register width tracks only live
    wires. Gates reference wire labels, not register positions.
    """

    def __init__(self, initial_wires: list[int], initial_state: np.ndarray | None = None):
        self.wires = list(initial_wires)
        n = len(self.wires)
        if n > MAX_WIRES:
            raise ValueError("too many wires")
        if initial_state is None:
            state = np.zeros(2**n, dtype=complex)
            state[0] = 1.0
        else:
            state = np.asarray(initial_state, dtype=complex).reshape(-1)
            if state.shape[0] != 2**n:
                raise ValueError("initial state dimension mismatch")
        self._branches = [Branch(state, 1.0, {}, list(self.wires))]

    def run(self, gates: list[tuple[Gate, list[int]]], policy: str = "all", seed: int = 0,
            prune_tol: float = 1e-12) -> list[Branch]:
        """Apply ``(gate, wire-labels)`` pairs, branching at measurements."""
        rng = np.random.default_rng(seed)
        for gate, labels in gates:
            self.step(gate, labels, policy=policy, rng=rng, prune_tol=prune_tol)
        return self._branches

    def step(self, gate: Gate, labels: list[int], policy: str = "all",
             rng: np.random.Generator | None = None, prune_tol: float = 1e-12) -> None:
        rng = rng if rng is not None else np.random.default_rng(0)
        new_branches: list[Branch] = []
        for br in self._branches:
            new_branches.extend(self._step(br, gate, labels, policy, rng, prune_tol))
        self._branches = new_branches
        if policy == "all" and len(self._branches) > MAX_ENUM_BRANCHES:
            raise BranchOverflow(len(self._branches))

    def branches(self) -> list[Branch]:
        return self._branches

    def drop_zero(self, label: int, tol: float = 1e-9) -> None:
        """Remove a wire whose state must be |0> in every branch."""
        for br in self._branches:
            wire = br.wires.index(label)
            n = len(br.wires)
            p0, p1 = _kern.branch_probabilities(br.state, n, wire)
            if p1 > tol:
                raise ValueError(f"wire {label} is not |0> (p1={p1:.3g})")
            br.state = _kern.project_and_remove(br.state, n, wire, 0, math.sqrt(p0))
            br.wires.remove(label)

    def _step(self, br: Branch, gate: Gate, labels: list[int], policy, rng, prune_tol):
        if gate.kind is GateKind.MEASURE_Z:
            wire = br.wires.index(labels[0])
            n = len(br.wires)
            p0, p1 = _kern.branch_probabilities(br.state, n, wire)
            outs = []
            if policy == "sample":
                outcome = 0 if rng.random() < p0 / max(p0 + p1, 1e-300) else 1
                probs = {outcome: (p0 if outcome == 0 else p1)}
            else:
                probs = {0: p0, 1: p1}
            for outcome, p in probs.items():
                if p <= prune_tol:
                    continue
                state = _kern.project_and_remove(br.state, n, wire, outcome, math.sqrt(p))
                bits = dict(br.bits)
                bits[gate.bit] = outcome
                wires = [w for w in br.wires if w != labels[0]]
                weight = br.weight * (p if policy == "all" else 1.0)
                outs.append(Branch(state, weight, bits, wires))
            return outs
        if gate.kind in (GateKind.COND_X, GateKind.COND_Z):
            if br.bits.get(gate.bit, 0) == 0:
                return [br]
        sv = StateVector(len(br.wires), br.state)
        sv._apply(gate.kind, [br.wires.index(lab) for lab in labels], gate.angle)
        return [Branch(sv.amps, br.weight, br.bits, br.wires)]

    def alloc(self, label: int) -> None:
        if label in self.wires:
            raise ValueError(f"wire {label} already live")
        self.wires.append(label)
        for br in self._branches:
            if len(br.wires) + 1 > MAX_WIRES:
                raise ValueError("wire cap exceeded")
            br.state = np.kron(br.state, np.array([1.0, 0.0], dtype=complex))
            br.wires.append(label)


class BranchOverflow(RuntimeError):
    def __init__(self, count: int):
        super().__init__(f"branch count {count} exceeds enumeration cap {MAX_ENUM_BRANCHES}")


def simulate(circ: Circuit, input_state: np.ndarray | None = None, policy: str = "all",
             seed: int = 0) -> list[Branch]:
    """Simulate a plain circuit on its own qubits (wire i = qubit i)."""
    if circ.n_qubits > MAX_WIRES:
        raise ValueError("dimension overflow")
    sim = Simulator(list(range(circ.n_qubits)), input_state)
    try:
        return sim.run([(g, list(g.qubits)) for g in circ.gates], policy=policy, seed=seed)
    except BranchOverflow:
        branches = []
        for s in range(_SAMPLE_COUNT):
            sub = Simulator(list(range(circ.n_qubits)), input_state)
            branches.extend(sub.run([(g, list(g.qubits)) for g in circ.gates],
                                    policy="sample", seed=seed + s))
        return branches


def branch_state_on(branch: Branch, labels: list[int]) -> np.ndarray:
    """Marginal ordering helper: reorder branch wires so ``labels`` lead.

    Requires the branch to hold exactly the given live wires (others must be
    measured out or in |0>, already projected away by the caller).
    """
    order = [branch.wires.index(lab) for lab in labels]
    rest = [i for i in range(len(branch.wires)) if i not in order]
    perm = order + rest
    t = branch.state.reshape((2,) * len(branch.wires))
    return np.transpose(t, perm).reshape(-1)
