"""Buffer-based communication transformation passes.

Works on an item list (plain gates interleaved with communication blocks)
produced by burst aggregation. Three passes iterate to a fixpoint on the
total EPR estimate: greedy fusion of adjacent blocks into collectives,
splitting of multi-controlled blocks too wide to gather, and lazy-return
elision for teleported qubits.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .commbuffer import BufferError, BufferLedger
from .hwmodel import HardwareModel
from .ir import Circuit, CommBlock, Gate, GateKind, Item, block_commutes, commutes, mcx
from .partition import Mapping


class InfeasibleBlock(ValueError):
    """No candidate target node can host the block's shares and moves."""


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class QubitMove:
    qubit: int
    mode: str  # 'cat' | 'tp' | 'local'
    src: int
    dst: int
    return_move: bool = False


@dataclass(frozen=True)
class BlockPlan:
    """Per-qubit communication choices for one block plus its EPR estimate."""

    target: int
    moves: tuple[QubitMove, ...]
    total_epr: int
    cross_epr: int


def _diag_only(blk_gates, qubit: int) -> bool:
    for g in blk_gates:
        if qubit not in g.qubits:
            continue
        k = g.kind
        if k in (GateKind.Z, GateKind.RZ, GateKind.CZ, GateKind.CP, GateKind.COND_Z):
            continue
        if k in (GateKind.CX, GateKind.MCX) and qubit != g.target:
            continue
        return False
    return True


def _has_wide_mcx(blk: CommBlock) -> bool:
    return any(g.kind is GateKind.MCX and len(g.qubits) > 3 for g in blk.gates)


@dataclass
class TransformContext:
    """Shared state for the transform passes over one candidate."""

    mapping: Mapping
    model: HardwareModel
    ledger: BufferLedger
    next_qubit: int
    lazy_enabled: bool = True
    next_block: int = 10_000
    next_use: dict[int, list[int]] = field(default_factory=dict)
    parked: dict[int, int] = field(default_factory=dict)  # qubit -> residence node

    def node_of(self, qubit: int) -> int:
        return self.mapping.node_of(qubit)

    def alloc_aux(self, node: int) -> int:
        """New ancilla qubit id living in a buffer slot of ``node``."""
        self.ledger.reserve(node)
        q = self.next_qubit
        self.next_qubit += 1
        slot = 100_000 + q  # distinct from data slots; uniqueness is what matters
        self.mapping.assignment[q] = (node, slot)
        return q

    def fresh_block_id(self) -> int:
        self.next_block += 1
        return self.next_block


def estimate_collective_cost(blk: CommBlock, ctx: TransformContext,
                             forced_home: dict[int, bool] | None = None) -> BlockPlan:
    """Cheapest gather plan over candidate target nodes.

    Control-only / diagonal qubits travel by cat share (1 EPR); anything
    operated on non-diagonally teleports (1 EPR one way, +1 when its next
    use pins it to its home node so lazy residence is infeasible). Ties
    break on fewer cross-cluster pairs, then the lower node id.
    """
    homes = {q: ctx.node_of(q) for q in blk.qubits()}
    involved = sorted(set(homes.values()))
    if len(involved) <= 1:
        return BlockPlan(involved[0] if involved else 0, (), 0, 0)
    best: tuple | None = None
    for target in involved:
        moves: list[QubitMove] = []
        total = cross = incoming = 0
        for q in sorted(blk.qubits()):
            home = homes[q]
            if home == target:
                moves.append(QubitMove(q, "local", home, target))
                continue
            is_cross = ctx.model.cluster_of(home) != ctx.model.cluster_of(target)
            if _diag_only(blk.gates, q):
                moves.append(QubitMove(q, "cat", home, target))
                total += 1
                cross += int(is_cross)
                incoming += 1
            else:
                ret = bool(forced_home and forced_home.get(q, False))
                moves.append(QubitMove(q, "tp", home, target, return_move=ret))
                total += 1 + int(ret)
                cross += int(is_cross) * (1 + int(ret))
                incoming += 1
        n_tp = sum(1 for mv in moves if mv.mode == "tp")
        n_cat = sum(1 for mv in moves if mv.mode == "cat")
        free_data = max(ctx.model.data_qubits[target]
                        - ctx.mapping.program_count(target)
                        - ctx.ledger.sizes.get(target, 0), 0)
        cells = ctx.ledger.free_slots(target) + free_data
        reserve = 1 if any(g.kind is GateKind.MCX and len(g.qubits) > 3 for g in blk.gates) else 0
        if n_tp > cells:  # teleport arrivals carry program state; comm is no home
            continue
        if n_tp + n_cat + reserve > cells + ctx.model.comm_qubits.get(target, 0):
            continue
        key = (total, cross, target)
        if best is None or key < best[0]:
            best = (key, BlockPlan(target, tuple(moves), total, cross))
    if best is None:
        raise InfeasibleBlock(f"block {blk.block_id} has no feasible gather target")
    return best[1]


def total_epr_estimate(items: list[Item], ctx: TransformContext) -> int:
    total = 0
    for it in items:
        if isinstance(it, CommBlock):
            plan = it.plan
            if plan is None:
                plan = estimate_collective_cost(it, ctx, _forced_home_map(items, it, ctx))
            total += plan.total_epr
    return total


def _forced_home_map(items: list[Item], blk: CommBlock, ctx: TransformContext) -> dict[int, bool]:
    """Forced-home map for the tail following ``blk`` inside ``items``."""
    try:
        pos = next(i for i, it in enumerate(items) if it is blk)
        tail = items[pos + 1:]
    except StopIteration:
        tail = []
    return _forced_home_tail(tail, blk.qubits(), ctx)


def _forced_home_tail(tail: list[Item], qubits: set[int], ctx: TransformContext) -> dict[int, bool]:
    """For each qubit: does its next use pin it to its home node?

    An in-node gate whose other qubits live at the qubit's home forces a
    return; a following block (or no use at all) tolerates lazy residence.
    """
    out: dict[int, bool] = {}
    pending = set(qubits)
    always = not ctx.lazy_enabled  # without lazy residence, any later use returns
    for it in tail:
        if not pending:
            break
        if isinstance(it, CommBlock):
            for q in it.qubits() & pending:
                out[q] = always
                pending.discard(q)
        else:
            for q in list(pending):
                if q in it.qubits:
                    others = [o for o in it.qubits if o != q]
                    out[q] = always or any(ctx.node_of(o) == ctx.node_of(q) for o in others)
                    pending.discard(q)
    for q in pending:
        out[q] = always
    return out


# --- fusion ---------------------------------------------------------------

def fuse_pass(items: list[Item], ctx: TransformContext) -> tuple[list[Item], bool]:
    """One left-to-right greedy fusion sweep. Returns (items, changed)."""
    items = list(items)
    changed = False
    i = _next_block_index(items, 0)
    while i is not None:
        j = _next_block_index(items, i + 1)
        if j is None:
            break
        cur: CommBlock = items[i]
        nxt: CommBlock = items[j]
        if not (cur.qubits() & nxt.qubits()):
            if _can_exchange(items, i, j):
                blk = items.pop(j)
                items.insert(i, blk)
                changed = True
                i = i + 1  # cur shifted right by one; rescan from it
                continue
            i = j
            continue
        fused_items, ok = _try_fuse(items, i, j, ctx)
        if ok:
            items = fused_items
            changed = True
            continue  # fused block is the new starting point, same index
        i = j
    return items, changed


def _next_block_index(items: list[Item], start: int) -> int | None:
    for k in range(start, len(items)):
        if isinstance(items[k], CommBlock):
            return k
    return None


def _can_exchange(items: list[Item], i: int, j: int) -> bool:
    mover: CommBlock = items[j]
    for k in range(i, j):
        it = items[k]
        gates = it.gates if isinstance(it, CommBlock) else (it,)
        for g in gates:
            if not all(commutes(g, mg) for mg in mover.gates):
                return False
    return True


def _try_fuse(items: list[Item], i: int, j: int, ctx: TransformContext) -> tuple[list[Item], bool]:
    cur: CommBlock = items[i]
    nxt: CommBlock = items[j]
    between = items[i + 1: j]
    # Absorbed gates join the fused block; kept items end up after it, so a
    # kept item must commute with the fusing block's gates and with every
    # absorbed gate originally behind it. Absorbing can cascade.
    absorbed_flag = [False] * len(between)
    for idx, it in enumerate(between):
        if isinstance(it, CommBlock):
            if not all(all(commutes(g, mg) for mg in nxt.gates) for g in it.gates):
                return items, False
        else:
            absorbed_flag[idx] = not all(commutes(it, mg) for mg in nxt.gates)
    changed_flags = True
    while changed_flags:
        changed_flags = False
        for idx, it in enumerate(between):
            if absorbed_flag[idx]:
                continue
            later = [g for k in range(idx + 1, len(between)) if absorbed_flag[k]
                     for g in ((between[k],) if isinstance(between[k], Gate) else between[k].gates)]
            gates_here = (it,) if isinstance(it, Gate) else it.gates
            if all(commutes(g1, g2) for g1 in gates_here for g2 in later):
                continue
            if isinstance(it, CommBlock):
                return items, False
            absorbed_flag[idx] = True
            changed_flags = True
    absorbed = [it for idx, it in enumerate(between) if absorbed_flag[idx]]
    kept = [it for idx, it in enumerate(between) if not absorbed_flag[idx]]
    fused_gates = cur.gates + tuple(absorbed) + nxt.gates
    fused = CommBlock(
        block_id=cur.block_id,
        gates=fused_gates,
        involved=frozenset(ctx.node_of(q) for g in fused_gates for q in g.qubits),
    )
    if len(fused.involved) < 2:
        return items, False
    try:
        fused_plan = estimate_collective_cost(fused, ctx, _forced_home_tail(items[j + 1:], fused.qubits(), ctx))
        cur_plan = cur.plan or estimate_collective_cost(cur, ctx)
        nxt_plan = nxt.plan or estimate_collective_cost(nxt, ctx)
    except InfeasibleBlock:
        return items, False
    if fused_plan.total_epr > cur_plan.total_epr + nxt_plan.total_epr:
        return items, False
    fused = fused.replace(plan=fused_plan, target_node=fused_plan.target,
                          protocol=_protocol_of(fused_plan))
    out = items[:i] + [fused] + kept + items[j + 1:]
    return out, True


def _protocol_of(plan: BlockPlan) -> str:
    modes = {mv.mode for mv in plan.moves if mv.mode != "local"}
    if modes == {"cat"}:
        return "cat"
    if modes == {"tp"}:
        return "tp"
    return "mixed" if modes else "cat"


# --- splitting ------------------------------------------------------------

def split_multi_controlled(blk: CommBlock, ctx: TransformContext,
                           two_node_only: bool = False) -> list[Item]:
    """Split a multi-controlled block via the one-ancilla fold identity.

    Nodes holding two or more controls fold them into a buffer ancilla
    (compute before, uncompute after); remaining lone controls pair up
    through two-node Toffoli blocks until the residual gather fits the
    target node's buffer. ``two_node_only`` keeps recursing until every
    emitted block touches at most two nodes (the baseline regime).
    """
    if len(blk.gates) != 1 or blk.gates[0].kind is not GateKind.MCX:
        raise SplitError("splitting expects a single multi-controlled gate block")
    gate = blk.gates[0]
    controls = list(gate.qubits[:-1])
    target_q = gate.target
    target_node = ctx.node_of(target_q)

    pre: list[Item] = []
    post: list[Item] = []
    effective: list[int] = []

    by_node: dict[int, list[int]] = {}
    for c in controls:
        by_node.setdefault(ctx.node_of(c), []).append(c)

    for node in sorted(by_node):
        cs = by_node[node]
        if len(cs) >= 2:
            anc = ctx.alloc_aux(node)
            fold = mcx(cs, anc)
            pre.append(fold)
            post.insert(0, fold)
            effective.append(anc)
        else:
            effective.extend(cs)

    while True:
        remote = [e for e in effective if ctx.node_of(e) != target_node]
        need = len(remote)
        capacity = (ctx.ledger.free_slots(target_node)
                    + ctx.model.comm_qubits.get(target_node, 0))
        executable = need <= capacity and (not two_node_only or need <= 1)
        if executable:
            break
        if len(effective) < 2:
            raise SplitError(f"block {blk.block_id}: cannot narrow further, "
                             f"target node {target_node} lacks buffer slots")
        # pair two controls through a fresh ancilla; the host must have a
        # free slot and prefers the control-heaviest node, ties low
        by_host: dict[int, list[int]] = {}
        for e in effective:
            by_host.setdefault(ctx.node_of(e), []).append(e)
        hosts = [n for n in by_host if ctx.ledger.free_slots(n) >= 1]
        if not hosts:
            raise SplitError(f"block {blk.block_id}: no buffer slot for a split ancilla")
        host = max(sorted(hosts), key=lambda n: len(by_host[n]))
        e_host = min(by_host[host])
        others = [e for e in effective if ctx.node_of(e) != host]
        if not others:
            raise SplitError(f"block {blk.block_id}: cannot narrow further")
        remote_others = [e for e in others if ctx.node_of(e) != target_node]
        e_other = min(remote_others) if remote_others else min(others)
        anc = ctx.alloc_aux(host)
        tof = mcx((e_other, e_host), anc)
        blk_c = _remote_block(tof, ctx)
        blk_u = _remote_block(tof, ctx)
        pre.append(blk_c)
        post.insert(0, blk_u)
        effective = [e for e in effective if e not in (e_other, e_host)] + [anc]

    residual_gate = mcx(effective, target_q)
    residual = _remote_block(residual_gate, ctx)
    return pre + [residual] + post


def _remote_block(gate: Gate, ctx: TransformContext) -> Item:
    involved = frozenset(ctx.node_of(q) for q in gate.qubits)
    if len(involved) < 2:
        return gate
    blk = CommBlock(ctx.fresh_block_id(), (gate,), involved)
    plan = estimate_collective_cost(blk, ctx)
    return blk.replace(plan=plan, target_node=plan.target, protocol=_protocol_of(plan))


def split_pass(items: list[Item], ctx: TransformContext,
               two_node_only: bool = False) -> tuple[list[Item], bool]:
    out: list[Item] = []
    changed = False
    for it in items:
        if isinstance(it, CommBlock):
            needs_split = False
            if _has_wide_mcx(it) and len(it.gates) == 1:
                if two_node_only and len(it.involved) > 2:
                    needs_split = True
                else:
                    try:
                        plan = it.plan or estimate_collective_cost(it, ctx)
                        it = it.replace(plan=plan, target_node=plan.target,
                                        protocol=_protocol_of(plan))
                    except InfeasibleBlock:
                        needs_split = True
            if needs_split:
                out.extend(split_multi_controlled(it, ctx, two_node_only=two_node_only))
                changed = True
                continue
        out.append(it)
    return out, changed


# --- lazy teleportation ---------------------------------------------------

def lazy_teleport_pass(items: list[Item], ctx: TransformContext) -> tuple[list[Item], bool]:
    """Elide return teleportations when the qubit's next use tolerates its
    new residence; otherwise keep the return move. Updates the mapping for
    downstream passes (residence recorded in ``ctx.parked``)."""
    changed = False
    new_items: list[Item] = []
    for idx, it in enumerate(items):
        if not isinstance(it, CommBlock) or it.plan is None:
            new_items.append(it)
            continue
        plan: BlockPlan = it.plan
        new_moves = []
        block_changed = False
        for mv in plan.moves:
            if mv.mode != "tp" or not mv.return_move:
                new_moves.append(mv)
                continue
            nxt_node = _next_use_node(items, idx, mv.qubit, ctx)
            if nxt_node is None or nxt_node == mv.dst:
                if ctx.ledger.free_slots(mv.dst) >= 0:
                    new_moves.append(replace(mv, return_move=False))
                    block_changed = True
                    ctx.parked[mv.qubit] = mv.dst
                    continue
            new_moves.append(mv)
        if block_changed:
            changed = True
            total = sum((1 + int(m.return_move)) for m in new_moves if m.mode != "local")
            cross = 0
            for m in new_moves:
                if m.mode == "local":
                    continue
                is_cross = ctx.model.cluster_of(m.src) != ctx.model.cluster_of(m.dst)
                cross += int(is_cross) * (1 + int(m.return_move))
            it = it.replace(plan=BlockPlan(plan.target, tuple(new_moves), total, cross))
        new_items.append(it)
    return new_items, changed


def _next_use_node(items: list[Item], idx: int, qubit: int, ctx: TransformContext) -> int | None:
    for it in items[idx + 1:]:
        if isinstance(it, CommBlock):
            if qubit in it.qubits():
                return it.plan.target if it.plan else None
        elif qubit in it.qubits:
            others = [q for q in it.qubits if q != qubit]
            if others:
                return ctx.node_of(others[0])
            return ctx.node_of(qubit)
    return None


# --- fixpoint driver ------------------------------------------------------

def refresh_plans(items: list[Item], ctx: TransformContext) -> list[Item]:
    out = []
    for it in items:
        if isinstance(it, CommBlock) and it.plan is None:
            plan = estimate_collective_cost(it, ctx, _forced_home_map(items, it, ctx))
            it = it.replace(plan=plan, target_node=plan.target, protocol=_protocol_of(plan))
        out.append(it)
    return out


def transform_fixpoint(items: list[Item], ctx: TransformContext,
                       enable_fusion: bool = True, enable_split: bool = True,
                       enable_lazy: bool = True, max_rounds: int = 20) -> list[Item]:
    items, _ = split_pass(items, ctx) if enable_split else (items, False)
    items = refresh_plans(items, ctx)
    best = total_epr_estimate(items, ctx)
    for _ in range(max_rounds):
        changed = False
        if enable_fusion:
            items, c = fuse_pass(items, ctx)
            changed |= c
        if enable_split:
            items, c = split_pass(items, ctx)
            changed |= c
        if enable_lazy:
            items, c = lazy_teleport_pass(items, ctx)
            changed |= c
        items = refresh_plans(items, ctx)
        now = total_epr_estimate(items, ctx)
        if now > best:
            raise AssertionError("transform increased the EPR estimate")
        if not changed or now == best:
            best = now
            break
        best = now
    return items
