"""Timed execution plan: EPR generation pipelining, protocol expansion,
resource-exclusive list scheduling, and metric extraction.

The Concretizer walks the transformed item list once, turning every block
into generation, buffering, protocol, and local-execution operations. Ops
are solved as they are emitted (ASAP under resource exclusivity plus
explicit classical-latency edges), so channel choices can consult live
comm-qubit availability. The same walk optionally records a gate-level
trace on simulator wires, used by the semantic-preservation oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .commbuffer import BufferError, BufferLedger
from .hwmodel import HardwareModel, channel_path_graph
from .ir import Circuit, CommBlock, Gate, GateKind, Item, mcx
from .mcx import ladder_mcx, split_borrowed_mcx
from .partition import Mapping
from .route import RouteError, RoutePlan, route_share
from .transform import BlockPlan, QubitMove, _diag_only


class ScheduleError(RuntimeError):
    pass


@dataclass
class Op:
    kind: str  # gate-1q | gate-2q | measure | epr-gen-intra | epr-gen-inter |
    #            buffer-swap | classical-intra | classical-inter
    duration: float
    resources: tuple
    deps: tuple[tuple[int, float], ...] = ()
    label: str = ""
    start: float = 0.0

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass
class Metrics:
    n_1q: int = 0
    n_2q: int = 0
    n_ms: int = 0
    n_iep: int = 0
    n_oep: int = 0
    latency: float = 0.0
    node_count: int = 0
    avg_buffer_qubits: float = 0.0
    fidelity: float = 1.0
    log_fidelity: float = 0.0

    @property
    def epr_total(self) -> int:
        return self.n_iep + self.n_oep

    def as_dict(self) -> dict:
        return {
            "n_1q": self.n_1q, "n_2q": self.n_2q, "n_ms": self.n_ms,
            "n_iep": self.n_iep, "n_oep": self.n_oep,
            "epr": self.epr_total, "cross_epr": self.n_oep,
            "latency": round(self.latency, 4), "nodes": self.node_count,
            "avg_buffer_qubits": round(self.avg_buffer_qubits, 4),
            "fidelity": self.fidelity, "log_fidelity": self.log_fidelity,
        }


@dataclass
class ScheduleResult:
    ops: list[Op]
    makespan: float
    ledger: BufferLedger
    trace: list | None  # [(Gate, wire labels)] when recording
    trace_wires: dict   # qubit -> final wire label
    n_trace_wires: int


def dump_schedule(result: ScheduleResult) -> str:
    lines = []
    for op in result.ops:
        res = ",".join("/".join(str(p) for p in r) for r in op.resources)
        lines.append(f"{op.start:.4f} {op.end:.4f} {op.kind} {res}")
    return "\n".join(lines) + "\n"


class Wire:
    """A live simulator wire: the physical resource it occupies plus a
    unique label. Labels are never reused, so long-lived occupants (parked
    qubits, cat copies) stay distinct from later tenants of the same
    physical qubit."""

    __slots__ = ("res", "label")

    def __init__(self, res: tuple, label: int):
        self.res = res
        self.label = label

    def __repr__(self):
        return f"Wire({self.res}, #{self.label})"


class Concretizer:
    """Single-pass materializer and solver; see module docstring."""

    def __init__(self, mapping: Mapping, model: HardwareModel, sizes: dict[int, int],
                 use_buffer: bool = True, routing: str = "parallel",
                 record_trace: bool = False, jit: bool = True):
        self.mapping = mapping
        self.model = model
        self.graph = channel_path_graph(model)
        self.ledger = BufferLedger(sizes=dict(sizes))
        self.use_buffer = use_buffer
        self.routing = routing
        self.jit = jit
        self.ops: list[Op] = []
        self.free: dict[tuple, float] = {}  # resource -> available time
        self.residence: dict[int, int] = {q: mapping.node_of(q) for q in mapping.assignment}
        self.slot_state: dict[int, list[int]] = {n: [] for n in model.nodes()}
        self.slot_release_op: dict[tuple, int] = {}
        self.extra_free: dict[int, int] = {}
        self.extra_seq = 0
        for n in model.nodes():
            self.extra_free[n] = max(
                model.data_qubits[n] - mapping.program_count(n) - sizes.get(n, 0), 0)
        self.gen_window: dict[int, list[int]] = {n: [] for n in model.nodes()}
        self.bits = 0
        self.record = record_trace
        self.trace: list = []
        self.next_label = 0
        self.wire: dict[int, Wire] = {}
        for q in sorted(mapping.assignment):
            self.wire[q] = Wire(("q", q), self.next_label)
            self.next_label += 1
        for q, (node, slot) in sorted(mapping.assignment.items()):
            if slot >= 100_000:  # splitter-allocated buffer ancilla pins a slot
                nxt = next(i for i in range(len(self.slot_state[node]) + 1)
                           if i not in self.slot_state[node])
                self.slot_state[node].append(nxt)

    # -- op emission and solving ------------------------------------------

    def emit(self, kind: str, duration: float, resources: tuple,
             deps: tuple = (), label: str = "") -> int:
        start = 0.0
        for d, lag in deps:
            start = max(start, self.ops[d].end + lag)
        for r in resources:
            start = max(start, self.free.get(r, 0.0))
        op = Op(kind, duration, resources, tuple(deps), label, start)
        self.ops.append(op)
        for r in resources:
            self.free[r] = op.end
        return len(self.ops) - 1

    def makespan(self) -> float:
        return max((op.end for op in self.ops), default=0.0)

    # -- wires, slots, trace ----------------------------------------------

    def _new_wire(self, res: tuple) -> Wire:
        w = Wire(res, self.next_label)
        self.next_label += 1
        if self.record:
            self.trace.append(("ALLOC", w.label))
        return w

    def _trace_gate(self, gate: Gate, wires: tuple) -> None:
        if self.record:
            self.trace.append((gate, tuple(w.label for w in wires)))

    def _drop_wire(self, wire: Wire) -> None:
        """Retire a wire known to hold |0>."""
        if self.record:
            self.trace.append(("DROP", wire.label))

    def alloc_slot(self, node: int, deps: list, region: str = "buffer") -> tuple:
        """Claim a slot index on ``node``. Region 'buffer' draws from the
        reserved communication buffer; 'program' prefers idle data qubits
        (teleport arrivals carry program state)."""
        if region == "program" and self.extra_free.get(node, 0) > 0:
            self.extra_free[node] -= 1
            self.extra_seq += 1
            return ("d", node, self.extra_seq)
        busy = self.slot_state[node]
        cap = self.ledger.sizes.get(node, 0)
        for idx in range(cap):
            if idx not in busy:
                busy.append(idx)
                res = ("s", node, idx)
                rel = self.slot_release_op.get(res)
                if rel is not None:
                    deps.append((rel, 0.0))
                return res
        raise BufferError(f"node {node}: no free buffer slot (size {cap})")

    def release_res(self, res: tuple, at_op: int) -> None:
        if res[0] == "s":
            _, node, idx = res
            self.slot_state[node].remove(idx)
            self.slot_release_op[res] = at_op
        elif res[0] == "d":
            self.extra_free[res[1]] += 1

    def comm_res(self, node: int) -> tuple:
        return ("c", node)

    # -- EPR generation and buffering --------------------------------------

    def gen_pair(self, a: int, b: int, regions: tuple = (None, None)) -> tuple[Wire, Wire, int]:
        """Generate one EPR pair on channel (a,b) and place both halves.

        Per-side region: None buffers when a slot is free (comm-resident
        otherwise), 'program' demands a data-qubit cell (teleport arrival).
        """
        kind = self.model.channel_kind(a, b)
        dur = self.model.timing.t_iep if kind == "intra" else self.model.timing.t_oep
        deps: list = []
        for node in (a, b):
            win = max(1, -(-self.ledger.sizes.get(node, 1) // 2))
            hist = self.gen_window[node]
            if len(hist) >= win:
                deps.append((hist[-win], 0.0))
        gen = self.emit(f"epr-gen-{kind}", dur, (self.comm_res(a), self.comm_res(b)),
                        tuple(deps), label=f"epr {a}-{b}")
        self.ledger.charge_epr(a, b, kind)
        comm_wires = {a: self._new_wire(self.comm_res(a)), b: self._new_wire(self.comm_res(b))}
        if self.record:
            self.trace.append((Gate(GateKind.H, (0,)), (comm_wires[a].label,)))
            self.trace.append((Gate(GateKind.CX, (0, 1)),
                               (comm_wires[a].label, comm_wires[b].label)))
        halves: list[Wire] = []
        last = gen
        for node, region in ((a, regions[0]), (b, regions[1])):
            wants_slot = self.use_buffer or region == "program"
            slot = None
            if wants_slot:
                try:
                    sdeps: list = [(gen, 0.0)]
                    slot = self.alloc_slot(node, sdeps, region=region or "buffer")
                except BufferError:
                    if region == "program":
                        raise
                    slot = None
            if slot is not None:
                sw = self._new_wire(slot)
                cw = comm_wires[node]
                swap = self.emit("buffer-swap", 2 * self.model.timing.t_2q,
                                 (self.comm_res(node), slot), tuple(sdeps),
                                 label=f"buffer {node}")
                if self.record:
                    self.trace.append((Gate(GateKind.CX, (0, 1)), (cw.label, sw.label)))
                    self.trace.append((Gate(GateKind.CX, (0, 1)), (sw.label, cw.label)))
                self._drop_wire(cw)
                halves.append(sw)
                last = swap
            else:
                halves.append(comm_wires[node])
            self.gen_window[node].append(last)
        return halves[0], halves[1], last

    def release_half(self, wire: Wire, at_op: int) -> None:
        self.release_res(wire.res, at_op) if wire.res[0] in ("s", "d") else None

    # -- protocol pieces ----------------------------------------------------

    def _measure(self, wire: Wire, deps=()) -> tuple[int, int]:
        bit = self.bits
        self.bits += 1
        op = self.emit("measure", self.model.timing.t_ms, (wire.res,), tuple(deps))
        if self.record:
            self.trace.append((Gate(GateKind.MEASURE_Z, (0,), bit=bit), (wire.label,)))
        return op, bit

    def _classical(self, src: int, dst: int, dep: int) -> int:
        if src == dst:
            return dep
        kind = self.model.channel_kind(src, dst)
        dur = self.model.timing.t_icb if kind == "intra" else self.model.timing.t_ocb
        return self.emit(f"classical-{kind}", dur, (), ((dep, 0.0),))

    def _cond(self, kind: GateKind, wire: Wire, bit: int, dep: int) -> int:
        op = self.emit("gate-1q", self.model.timing.t_1q, (wire.res,), ((dep, 0.0),))
        if self.record:
            self.trace.append((Gate(kind, (0,), bit=bit), (wire.label,)))
        return op

    def _gate_op(self, gate: Gate, wires: tuple, deps=()) -> int:
        cls = gate.duration_class()
        if cls == "measure":
            op, _ = self._measure(wires[0], deps)
            return op
        dur = self.model.timing.t_1q if cls == "one-q" else self.model.timing.t_2q
        kind = "gate-1q" if cls == "one-q" else "gate-2q"
        op = self.emit(kind, dur, tuple(w.res for w in wires), tuple(deps))
        self._trace_gate(gate, wires)
        return op

    def cat_entangle(self, q_wire: Wire, src: int, dst: int,
                     availability_cb=None) -> dict[int, Wire]:
        """Extend a cat share of the qubit on ``q_wire`` from src to dst
        along the routed tree. Returns {node: copy wire}."""
        plan = route_share(src, dst, self.model, self.graph,
                           channel_score=availability_cb, mode=self.routing)
        copies: dict[int, Wire] = {}
        frontier = {src: q_wire}
        for e in plan.edges:
            ha, hb, _ = self.gen_pair(e.src, e.dst)
            anchor = frontier[e.src]
            ent = self._gate_op(Gate(GateKind.CX, (0, 1)), (anchor, ha))
            msop, bit = self._measure(ha, ((ent, 0.0),))
            self.release_half(ha, msop)
            cls = self._classical(e.src, e.dst, msop)
            self._cond(GateKind.COND_X, hb, bit, cls)
            frontier[e.dst] = hb
            copies[e.dst] = hb
        return copies

    def cat_disentangle(self, q_wire: Wire, home: int, copies: dict[int, Wire]) -> None:
        for node in sorted(copies):
            wire = copies[node]
            h = self._gate_op(Gate(GateKind.H, (0,)), (wire,))
            msop, bit = self._measure(wire, ((h, 0.0),))
            cls = self._classical(node, home, msop)
            self._cond(GateKind.COND_Z, q_wire, bit, cls)
            self.release_half(wire, msop)

    def teleport(self, qubit: int, dst: int, availability_cb=None,
                 protect: frozenset = frozenset()) -> None:
        """Move ``qubit`` into a data cell or buffer slot on dst, hop by hop."""
        src = self.residence[qubit]
        if src == dst:
            return
        plan = route_share(src, dst, self.model, self.graph,
                           channel_score=availability_cb, mode=self.routing)
        for e in plan.edges:
            self._ensure_cell(e.dst, protect | {qubit})
            self._teleport_hop(qubit, e.src, e.dst)

    def _ensure_cell(self, node: int, protect: frozenset, depth: int = 0) -> None:
        """Evict a parked qubit when a teleport arrival has nowhere to land."""
        if depth > len(self.residence):
            raise BufferError(f"node {node}: eviction cycle while finding a free cell")
        cap = self.ledger.sizes.get(node, 0)
        if self.extra_free.get(node, 0) > 0 or len(self.slot_state[node]) < cap:
            return
        victims = [q for q in sorted(self.residence)
                   if self.residence[q] == node and self.mapping.node_of(q) != node
                   and q not in protect and self.wire[q].res[0] in ("s", "d")]
        if not victims:
            raise BufferError(f"node {node}: buffer full and nothing evictable")
        victim = victims[0]
        home = self.mapping.node_of(victim)
        sub = route_share(node, home, self.model, self.graph, mode=self.routing)
        for e in sub.edges:
            self._ensure_cell(e.dst, protect | {victim}, depth + 1)
            self._teleport_hop(victim, e.src, e.dst)

    def _teleport_hop(self, qubit: int, a: int, b: int) -> None:
        ha, hb, _ = self.gen_pair(a, b, regions=(None, "program"))
        qw = self.wire[qubit]
        cxop = self._gate_op(Gate(GateKind.CX, (0, 1)), (qw, ha))
        hop = self._gate_op(Gate(GateKind.H, (0,)), (qw,), ((cxop, 0.0),))
        ms1, bit1 = self._measure(qw, ((hop, 0.0),))
        ms2, bit2 = self._measure(ha, ((cxop, 0.0),))
        self.release_half(ha, ms2)
        self.release_res(qw.res, ms1) if qw.res[0] in ("s", "d") else None
        if qw.res[0] == "q":
            self.extra_free[a] += 1  # vacated data cell becomes usable
        cls2 = self._classical(a, b, ms2)
        cls1 = self._classical(a, b, ms1)
        self._cond(GateKind.COND_X, hb, bit2, cls2)
        self._cond(GateKind.COND_Z, hb, bit1, cls1)
        self.wire[qubit] = hb
        self.residence[qubit] = b

    # -- local execution ----------------------------------------------------

    def _local_spares(self, node: int, exclude: set) -> list:
        """Dirty work wires on ``node``: resident program qubits outside the
        gate, then (lazily materialized) the communication qubit."""
        spares = []
        for q in sorted(self.residence):
            if self.residence[q] == node and q not in exclude:
                spares.append(self.wire[q])
        spares.append(self.comm_res(node))  # placeholder, materialized on use
        return spares

    def run_local_gate(self, gate: Gate, wire_of: dict[int, Wire], node: int) -> None:
        if gate.kind is GateKind.MCX and len(gate.qubits) > 2:
            k = len(gate.qubits) - 1
            spares = self._local_spares(node, set(gate.qubits))
            need = k - 2
            use_ladder = len(spares) - 1 >= need  # comm placeholder counts once
            lowered = (ladder_mcx(list(range(k)), k, list(range(k + 1, k + 1 + need)))
                       if use_ladder else split_borrowed_mcx(list(range(k)), k, k + 1))
            chosen = spares[:need] if use_ladder else spares[:1]
            transient: list[Wire] = []
            table: dict[int, Wire] = {i: wire_of[q] for i, q in enumerate(gate.qubits)}
            for j, sp in enumerate(chosen):
                if isinstance(sp, tuple):  # comm placeholder
                    sp = self._new_wire(sp)
                    transient.append(sp)
                table[k + 1 + j] = sp
            for g in lowered:
                self._gate_op(g, tuple(table[q] for q in g.qubits))
            for w in transient:
                self._drop_wire(w)  # restored to |0> by construction
            return
        if gate.kind is GateKind.MCX:
            wires = [wire_of[q] for q in gate.qubits]
            if len(gate.qubits) == 2:
                self._gate_op(Gate(GateKind.CX, (0, 1)), tuple(wires))
                return
            table = {i: wires[i] for i in range(3)}
            for g in ladder_mcx([0, 1], 2, []):
                self._gate_op(g, tuple(table[q] for q in g.qubits))
            return
        self._gate_op(gate, tuple(wire_of[q] for q in gate.qubits))

    # -- block processing ---------------------------------------------------

    def channel_choice_cb(self):
        """Stall penalty for parallel routing, in energy units.

        A channel's stall is how long its comm qubits stay busy beyond the
        best same-cluster-pair alternative, capped at one inter-cluster
        generation: with a single comm qubit per node, deeper backlogs are
        generation-bound no matter which channel is picked. Divided by the
        decoherence coefficient, this is commensurable with path weights.
        """

        def ready(x: int, y: int) -> float:
            return max(self.free.get(self.comm_res(x), 0.0),
                       self.free.get(self.comm_res(y), 0.0))

        def cb(a: int, b: int) -> float:
            ca, cb_ = self.model.cluster_of(a), self.model.cluster_of(b)
            best = None
            for ch in self.model.channels:
                if {self.model.cluster_of(ch.a), self.model.cluster_of(ch.b)} != {ca, cb_}:
                    continue
                r = ready(ch.a, ch.b)
                best = r if best is None else min(best, r)
            if best is None:
                return 0.0
            stall = min(max(ready(a, b) - best, 0.0), self.model.timing.t_oep)
            return stall / self.model.timing.T_decoherence

        return cb

    def process_block(self, blk: CommBlock) -> None:
        plan: BlockPlan = blk.plan
        if plan is None:
            raise ScheduleError(f"block {blk.block_id} reached the scheduler unplanned")
        # re-evaluate against live residences: earlier parking may have moved
        # qubits onto (or off) the target already
        target = plan.target
        cat_qubits: list[int] = []
        tp_qubits: list[tuple[int, bool]] = []
        for mv in plan.moves:
            here = self.residence[mv.qubit]
            if here == target:
                continue
            if mv.mode == "cat" and _diag_only(blk.gates, mv.qubit):
                cat_qubits.append(mv.qubit)
            else:
                tp_qubits.append((mv.qubit, mv.return_move))

        avail = self.channel_choice_cb() if self.routing == "parallel" else None
        shares: dict[int, tuple[dict[int, Wire], int]] = {}
        for q in cat_qubits:
            copies = self.cat_entangle(self.wire[q], self.residence[q], target,
                                       availability_cb=avail)
            shares[q] = (copies, self.residence[q])
        protect = frozenset(blk.qubits())
        return_homes: dict[int, int] = {}
        for q, ret in tp_qubits:
            home = self.residence[q]
            self.teleport(q, target, availability_cb=avail, protect=protect)
            if ret:
                return_homes[q] = home

        wire_of = {}
        for q in blk.qubits():
            wire_of[q] = shares[q][0][target] if q in shares else self.wire[q]

        for gate in blk.gates:
            self.run_local_gate(gate, wire_of, target)

        for q in cat_qubits:
            copies, home = shares[q]
            self.cat_disentangle(self.wire[q], home, copies)
        for q, home in return_homes.items():
            self.teleport(q, home, availability_cb=avail, protect=protect)

    def process_plain(self, gate: Gate) -> None:
        nodes = {self.residence[q] for q in gate.qubits}
        if len(nodes) == 1:
            node = next(iter(nodes))
            if gate.kind is GateKind.MCX:
                self.run_local_gate(gate, {q: self.wire[q] for q in gate.qubits}, node)
            else:
                self._gate_op(gate, tuple(self.wire[q] for q in gate.qubits))
            return
        # residence drift turned an in-node gate remote: pull strays to the
        # majority node (the move is charged here, not at conversion time)
        anchor = sorted(nodes, key=lambda n: (-sum(1 for q in gate.qubits
                                                   if self.residence[q] == n), n))[0]
        for q in gate.qubits:
            if self.residence[q] != anchor:
                self.teleport(q, anchor, protect=frozenset(gate.qubits))
        self.process_plain(gate)

    def run(self, items: list[Item]) -> ScheduleResult:
        for it in items:
            if isinstance(it, CommBlock):
                self.process_block(it)
            else:
                self.process_plain(it)
        if self.jit:
            self._shift_gens_late()
        return ScheduleResult(
            ops=self.ops, makespan=self.makespan(), ledger=self.ledger,
            trace=self.trace if self.record else None,
            trace_wires={q: self.wire[q].label for q in self.wire} if self.record else {},
            n_trace_wires=self.next_label,
        )

    def _shift_gens_late(self) -> None:
        """Slide generation ops as late as their successors allow (just in
        time); makespan and all other start times are unchanged."""
        succ_bound = [math.inf] * len(self.ops)
        res_next: dict[tuple, float] = {}
        for i in range(len(self.ops) - 1, -1, -1):
            op = self.ops[i]
            bound = succ_bound[i]
            for r in op.resources:
                bound = min(bound, res_next.get(r, math.inf))
            if op.kind.startswith("epr-gen") and bound < math.inf:
                op.start = max(op.start, bound - op.duration)
            for d, lag in op.deps:
                succ_bound[d] = min(succ_bound[d], op.start - lag)
            for r in op.resources:
                res_next[r] = op.start


def compute_metrics(result: ScheduleResult, mapping: Mapping, model: HardwareModel,
                    cost_params=None, as_printed: bool = False) -> Metrics:
    from .cost import CostParams, estimated_fidelity

    m = Metrics()
    for op in result.ops:
        if op.kind == "gate-1q":
            m.n_1q += 1
        elif op.kind == "gate-2q":
            m.n_2q += 1
        elif op.kind == "buffer-swap":
            m.n_2q += 2
        elif op.kind == "measure":
            m.n_ms += 1
        elif op.kind == "epr-gen-intra":
            m.n_iep += 1
        elif op.kind == "epr-gen-inter":
            m.n_oep += 1
    if m.epr_total != result.ledger.total_epr():
        raise ScheduleError("ledger and event counts disagree")
    m.latency = result.makespan
    m.node_count = len(mapping.used_nodes())
    sizes = result.ledger.sizes
    used = mapping.used_nodes()
    m.avg_buffer_qubits = (sum(sizes.get(n, 0) for n in used) / len(used)) if used else 0.0
    params = cost_params or CostParams.from_model(model)
    c, logc = estimated_fidelity(m, params, as_printed=as_printed)
    m.fidelity = c
    m.log_fidelity = logc
    return m


@dataclass
class ComparisonRecord:
    epr_dec: float | None
    cross_epr_dec: float | None
    lat_dec: float | None
    fd_inc: float | None

    def as_dict(self) -> dict:
        return {
            "epr_dec": self.epr_dec,
            "cross_epr_dec": self.cross_epr_dec,
            "lat_dec": self.lat_dec,
            "fd_inc": self.fd_inc,
        }


def compare_metrics(ours: Metrics, base: Metrics) -> ComparisonRecord:
    def dec(a: float, b: float) -> float | None:
        return None if b == 0 else 1.0 - a / b

    fd = None
    if base.fidelity > 0:
        fd = math.exp(ours.log_fidelity - base.log_fidelity) - 1.0
    return ComparisonRecord(
        epr_dec=dec(ours.epr_total, base.epr_total),
        cross_epr_dec=dec(ours.n_oep, base.n_oep),
        lat_dec=dec(ours.latency, base.latency),
        fd_inc=fd,
    )
