"""Branch-equivalence checking of compiled circuits against their sources.

Drives the statevector oracle over the scheduler's recorded gate trace:
fresh wires appear as EPR halves are buffered, measured wires are projected
out, and classically conditioned corrections follow each branch's outcomes.
The compiled program matches the source when every branch's state on the
program wires equals the directly simulated state up to global phase.
"""
from __future__ import annotations

import numpy as np

from .hwmodel import HardwareModel
from .ir import Circuit, Gate, GateKind
from .partition import Mapping
from .pipeline import CompileOptions, CompileResult, compile_circuit
from .verify import Branch, Simulator, branch_state_on, equal_up_to_phase


def run_trace(trace: list, initial_wires: list[int], input_state: np.ndarray | None,
              policy: str = "all", seed: int = 0) -> list[Branch]:
    sim = Simulator(list(initial_wires), input_state)
    rng = np.random.default_rng(seed)
    for entry in trace:
        tag = entry[0]
        if tag == "ALLOC":
            sim.alloc(entry[1])
            continue
        if tag == "DROP":
            sim.drop_zero(entry[1])
            continue
        gate, labels = entry
        sim.step(gate, list(labels), policy=policy, rng=rng)
    return sim.branches()


def compiled_equivalent(circ: Circuit, model: HardwareModel, options: CompileOptions,
                        input_state: np.ndarray | None = None, tol: float = 1e-9,
                        seed: int = 0) -> tuple[bool, float, CompileResult]:
    """Compile with trace recording and compare every measurement branch
    against the source circuit on the same input state."""
    options.record_trace = True
    result = compile_circuit(circ, model, options)
    n = circ.n_qubits

    init_labels = sorted(l for l in range(result.schedule.n_trace_wires)
                         if l in _initial_labels(result))
    aux = [l for l in init_labels if l >= n]
    if input_state is None:
        state = None
    else:
        state = np.asarray(input_state, dtype=complex).reshape(-1)
        for _ in aux:
            state = np.kron(state, np.array([1.0, 0.0]))

    branches = run_trace(result.schedule.trace, init_labels, state, seed=seed)

    ref = Simulator(list(range(n)), input_state)
    for g in circ.gates:
        ref.step(g, list(g.qubits))
    ref_state = ref.branches()[0].state

    final_wires = [result.schedule.trace_wires[q] for q in range(n)]
    if any(w is None for w in final_wires):
        raise RuntimeError("a program qubit lost its wire during compilation")

    worst = 1.0
    for br in branches:
        got = branch_state_on(br, final_wires)
        rest = len(br.wires) - n
        full_ref = ref_state
        for _ in range(rest):
            full_ref = np.kron(full_ref, np.array([1.0, 0.0]))
        ov = abs(np.vdot(full_ref, got))
        worst = min(worst, ov)
    return worst >= 1.0 - tol, worst, result


def _initial_labels(result: CompileResult) -> set[int]:
    # labels assigned before any ALLOC entries are the mapping's qubits
    allocated = {e[1] for e in result.schedule.trace if e[0] == "ALLOC"}
    return set(range(result.schedule.n_trace_wires)) - allocated


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)
