"""Circuit intermediate representation.

Gates, communication blocks and circuits are immutable after construction;
compiler passes build new circuits instead of mutating. The gate alphabet is
fixed to what the protocol expansions and benchmark generators need: H, X, Z,
RZ, CX, CZ, CP, MCX, Z-measurement and classically conditioned X/Z
corrections.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Union


class GateKind(Enum):
    H = "H"
    X = "X"
    Z = "Z"
    RZ = "RZ"
    CX = "CX"
    CZ = "CZ"
    CP = "CP"
    MCX = "MCX"
    MEASURE_Z = "MEASURE_Z"
    COND_X = "COND_X"
    COND_Z = "COND_Z"


ONE_QUBIT_KINDS = {GateKind.H, GateKind.X, GateKind.Z, GateKind.RZ, GateKind.COND_X, GateKind.COND_Z}
TWO_QUBIT_KINDS = {GateKind.CX, GateKind.CZ, GateKind.CP}
ANGLED_KINDS = {GateKind.RZ, GateKind.CP}


@dataclass(frozen=True)
class Gate:
    """One gate application on logical qubit ids.

    ``angle`` is set for RZ/CP, ``bit`` for measurements (result bit) and for
    conditioned corrections (the classical bit that gates them).
    """

    kind: GateKind
    qubits: tuple[int, ...]
    angle: float | None = None
    bit: int | None = None

    def __post_init__(self):
        arity = self.arity()
        if len(self.qubits) != arity:
            raise ValueError(f"{self.kind.value} expects {arity} qubits, got {len(self.qubits)}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated qubit in {self.kind.value} {self.qubits}")
        if self.kind in ANGLED_KINDS and self.angle is None:
            raise ValueError(f"{self.kind.value} requires an angle")
        if self.kind in (GateKind.MEASURE_Z, GateKind.COND_X, GateKind.COND_Z) and self.bit is None:
            raise ValueError(f"{self.kind.value} requires a classical bit")

    def arity(self) -> int:
        if self.kind in ONE_QUBIT_KINDS or self.kind is GateKind.MEASURE_Z:
            return 1
        if self.kind in TWO_QUBIT_KINDS:
            return 2
        return len(self.qubits)  # MCX: controls + target

    @property
    def controls(self) -> tuple[int, ...]:
        """Qubits acted on diagonally as controls."""
        if self.kind is GateKind.CX:
            return (self.qubits[0],)
        if self.kind is GateKind.MCX:
            return self.qubits[:-1]
        if self.kind in (GateKind.CZ, GateKind.CP):
            return self.qubits  # fully diagonal, both sides behave as controls
        return ()

    @property
    def target(self) -> int:
        if self.kind in (GateKind.CX, GateKind.MCX):
            return self.qubits[-1]
        raise ValueError(f"{self.kind.value} has no X-target")

    def duration_class(self) -> str:
        if self.kind is GateKind.MEASURE_Z:
            return "measure"
        if self.kind in ONE_QUBIT_KINDS:
            return "one-q"
        return "two-q"

    def with_qubits(self, mapping: dict[int, int]) -> "Gate":
        return Gate(self.kind, tuple(mapping.get(q, q) for q in self.qubits), self.angle, self.bit)


def mcx(controls: Iterable[int], target: int) -> Gate:
    ctrls = tuple(controls)
    if len(ctrls) < 1:
        raise ValueError("MCX needs at least one control")
    return Gate(GateKind.MCX, ctrls + (target,))


# Per-qubit action classes used by the conservative commutation check:
#   'd'  diagonal in the Z basis on that qubit
#   'x'  pure X-type action (conditional bit flip)
#   None anything else (H, measurement)
def _action(gate: Gate, qubit: int) -> str | None:
    k = gate.kind
    if k in (GateKind.Z, GateKind.RZ, GateKind.CZ, GateKind.CP, GateKind.COND_Z):
        return "d"
    if k is GateKind.X or k is GateKind.COND_X:
        return "x"
    if k is GateKind.CX or k is GateKind.MCX:
        return "x" if qubit == gate.target else "d"
    return None  # H, MEASURE_Z


def commutes(a: Gate, b: Gate) -> bool:
    """Conservative pairwise commutation check.

    Disjoint supports always commute. On each shared qubit the two actions
    must be both diagonal or both X-type; measurements and H never commute
    with anything sharing a qubit. Classical data dependencies (a measurement
    producing a bit that conditions a correction) also block exchange.
    """
    shared = set(a.qubits) & set(b.qubits)
    if not shared:
        if _classically_linked(a, b):
            return False
        return True
    if a.kind is GateKind.MEASURE_Z or b.kind is GateKind.MEASURE_Z:
        return False
    for q in shared:
        act_a, act_b = _action(a, q), _action(b, q)
        if act_a is None or act_b is None or act_a != act_b:
            return False
    return not _classically_linked(a, b)


def _classically_linked(a: Gate, b: Gate) -> bool:
    for first, second in ((a, b), (b, a)):
        if first.kind is GateKind.MEASURE_Z and second.kind in (GateKind.COND_X, GateKind.COND_Z):
            if first.bit == second.bit:
                return True
    return False


@dataclass(frozen=True)
class CommBlock:
    """A contiguous run of gates implemented through inter-node communication.

    ``involved`` is derived from the member gates under the current mapping.
    ``plan`` (attached by the transform/routing passes) carries the per-qubit
    communication choices and the EPR ledger; see transform.BlockPlan.
    """

    block_id: int
    gates: tuple[Gate, ...]
    involved: frozenset[int]
    protocol: str = "unassigned"  # cat | tp | mixed | unassigned
    target_node: int | None = None
    plan: object | None = None

    @property
    def kind(self) -> str:
        return "collective" if (len(self.involved) > 2 or self.protocol == "mixed") else "two-node"

    def qubits(self) -> set[int]:
        out: set[int] = set()
        for g in self.gates:
            out.update(g.qubits)
        return out

    def replace(self, **kw) -> "CommBlock":
        data = {
            "block_id": self.block_id,
            "gates": self.gates,
            "involved": self.involved,
            "protocol": self.protocol,
            "target_node": self.target_node,
            "plan": self.plan,
        }
        data.update(kw)
        return CommBlock(**data)


Item = Union[Gate, CommBlock]


def block_commutes(blk: CommBlock, g: Gate) -> bool:
    """True iff g commutes with every gate in the block (pairwise check)."""
    return all(commutes(member, g) for member in blk.gates)


@dataclass
class Circuit:
    """Ordered gate list with optional non-overlapping block annotations.

    ``items`` interleaves plain in-node gates and CommBlocks in program
    order; ``gates`` flattens the blocks back out.
    """

    n_qubits: int
    items: list[Item] = field(default_factory=list)
    n_bits: int = 0

    @property
    def gates(self) -> list[Gate]:
        out: list[Gate] = []
        for item in self.items:
            if isinstance(item, CommBlock):
                out.extend(item.gates)
            else:
                out.append(item)
        return out

    @property
    def blocks(self) -> list[CommBlock]:
        return [it for it in self.items if isinstance(it, CommBlock)]

    def add(self, gate: Gate) -> None:
        for q in gate.qubits:
            if not 0 <= q < self.n_qubits:
                raise ValueError(f"qubit {q} out of range (n_qubits={self.n_qubits})")
        if gate.bit is not None:
            self.n_bits = max(self.n_bits, gate.bit + 1)
        self.items.append(gate)

    def validate(self) -> None:
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.n_qubits:
                    raise ValueError(f"qubit {q} out of range")

    def __len__(self) -> int:
        return len(self.gates)

    def iter_gates(self) -> Iterator[Gate]:
        return iter(self.gates)

    def counts(self) -> dict[str, int]:
        by_kind: dict[str, int] = {}
        for g in self.gates:
            by_kind[g.kind.value] = by_kind.get(g.kind.value, 0) + 1
        return by_kind

    def cx_count(self) -> int:
        return sum(1 for g in self.gates if g.kind is GateKind.CX)


# --- text format ---------------------------------------------------------
#
# One gate per line, `KIND q0 q1 ... [angle]`, with header `qubits N` (and
# `bits M` when classical bits are used). Multi-controlled X is written
# `MCX k qc1 ... qck qt`. Measurements and conditioned corrections carry
# their classical bit as the last integer field.

def dumps(circ: Circuit) -> str:
    lines = [f"qubits {circ.n_qubits}"]
    if circ.n_bits:
        lines.append(f"bits {circ.n_bits}")
    for g in circ.gates:
        if g.kind is GateKind.MCX:
            lines.append(f"MCX {len(g.qubits) - 1} " + " ".join(str(q) for q in g.qubits))
        elif g.kind in ANGLED_KINDS:
            lines.append(f"{g.kind.value} " + " ".join(str(q) for q in g.qubits) + f" {g.angle!r}")
        elif g.kind is GateKind.MEASURE_Z or g.kind in (GateKind.COND_X, GateKind.COND_Z):
            lines.append(f"{g.kind.value} {g.qubits[0]} {g.bit}")
        else:
            lines.append(f"{g.kind.value} " + " ".join(str(q) for q in g.qubits))
    return "\n".join(lines) + "\n"


class ParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def loads(text: str) -> Circuit:
    circ: Circuit | None = None
    declared_bits = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        head = tok[0].upper()
        if head == "QUBITS":
            if len(tok) != 2 or not tok[1].isdigit():
                raise ParseError(lineno, "malformed qubits header")
            circ = Circuit(int(tok[1]))
            circ.n_bits = declared_bits
            continue
        if head == "BITS":
            if len(tok) != 2 or not tok[1].isdigit():
                raise ParseError(lineno, "malformed bits header")
            declared_bits = int(tok[1])
            if circ is not None:
                circ.n_bits = max(circ.n_bits, declared_bits)
            continue
        if circ is None:
            raise ParseError(lineno, "gate before `qubits N` header")
        try:
            circ.add(_parse_gate(head, tok[1:], lineno))
        except ParseError:
            raise
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from exc
    if circ is None:
        raise ParseError(0, "missing `qubits N` header")
    return circ


def _parse_gate(head: str, args: list[str], lineno: int) -> Gate:
    try:
        kind = GateKind(head)
    except ValueError:
        raise ParseError(lineno, f"unknown gate kind {head!r}") from None
    if kind is GateKind.MCX:
        if len(args) < 3:
            raise ParseError(lineno, "MCX needs a control count and qubits")
        k = int(args[0])
        qubits = [int(a) for a in args[1:]]
        if len(qubits) != k + 1:
            raise ParseError(lineno, f"MCX declared {k} controls but lists {len(qubits)} qubits")
        return mcx(qubits[:-1], qubits[-1])
    if kind in ANGLED_KINDS:
        n = 1 if kind is GateKind.RZ else 2
        if len(args) != n + 1:
            raise ParseError(lineno, f"{head} expects {n} qubits and an angle")
        return Gate(kind, tuple(int(a) for a in args[:n]), angle=float(args[n]))
    if kind is GateKind.MEASURE_Z or kind in (GateKind.COND_X, GateKind.COND_Z):
        if len(args) != 2:
            raise ParseError(lineno, f"{head} expects a qubit and a classical bit")
        return Gate(kind, (int(args[0]),), bit=int(args[1]))
    n = 1 if kind in ONE_QUBIT_KINDS else 2
    if len(args) != n:
        raise ParseError(lineno, f"{head} expects {n} qubit(s)")
    return Gate(kind, tuple(int(a) for a in args))
