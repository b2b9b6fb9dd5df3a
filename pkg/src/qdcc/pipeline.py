"""End-to-end compilation: partition, buffer allocation, burst aggregation,
transformation, routing+scheduling, metrics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import baseline as baseline_mod
from .commbuffer import BufferLedger, buffer_size_init, shrink_proportional
from .cost import CostParams, energy as energy_fn
from .hwmodel import HardwareModel
from .ir import Circuit, CommBlock, Item
from .partition import Mapping, fixed_mapping, interaction_graph, oee_partition
from .schedule import Concretizer, Metrics, ScheduleResult, compute_metrics
from .transform import TransformContext, transform_fixpoint


@dataclass
class CompileOptions:
    pipeline: str = "collcomm"  # collcomm | baseline
    routing: str = "parallel"  # parallel | mst | shortest
    fusion: bool = True
    split: bool = True
    lazy: bool = True
    seed: int = 0
    anneal_iters: int = 0
    anneal_alpha: float = 0.95
    cost_as_printed: bool = False
    assign: dict[int, int] | None = None  # explicit qubit -> node pins
    record_trace: bool = False

    def for_baseline(self) -> "CompileOptions":
        return CompileOptions(
            pipeline="baseline", routing="shortest", fusion=False, split=True,
            lazy=False, seed=self.seed, anneal_iters=0,
            cost_as_printed=self.cost_as_printed, assign=self.assign,
            record_trace=self.record_trace,
        )


@dataclass
class CompileResult:
    metrics: Metrics
    schedule: ScheduleResult
    mapping: Mapping
    sizes: dict[int, int]
    items: list[Item]
    energy: float


def initial_mapping(circ: Circuit, model: HardwareModel, options: CompileOptions) -> Mapping:
    if options.assign is not None:
        return fixed_mapping(options.assign, model)
    graph = interaction_graph(circ)
    return oee_partition(graph, model, reserve_per_node=1)


def allocate_buffers(circ_bursted: Circuit, mapping: Mapping, model: HardwareModel,
                     baseline: bool = False) -> dict[int, int]:
    """Initial buffer sizes, shrunk into the idle-qubit budget.

    The baseline regime reserves a single data qubit per non-idle node (its
    split ancilla), never a real buffer.
    """
    used = mapping.used_nodes()
    if baseline:
        # no EPR buffering, but split ancillas may take any idle data qubit
        return {n: model.data_qubits[n] - mapping.program_count(n) for n in model.nodes()}
    sizes = {n: buffer_size_init(n, circ_bursted, mapping, model) for n in model.nodes()}
    for n in used:
        if sizes[n] == 0:
            sizes[n] = 1  # preserved data qubit
    sizes = shrink_proportional(sizes, mapping.idle_data_qubits())
    for n in model.nodes():
        cap = model.data_qubits[n] - mapping.program_count(n)
        sizes[n] = min(sizes.get(n, 0), cap)
    return sizes


def compile_circuit(circ: Circuit, model: HardwareModel,
                    options: CompileOptions | None = None,
                    mapping: Mapping | None = None,
                    sizes: dict[int, int] | None = None) -> CompileResult:
    options = options or CompileOptions()
    is_baseline = options.pipeline == "baseline"
    mapping = (mapping or initial_mapping(circ, model, options)).copy()

    bursted = baseline_mod.burst_aggregate(circ, mapping)
    if sizes is None:
        sizes = allocate_buffers(bursted, mapping, model, baseline=is_baseline)
    mapping.buffer_slots = dict(sizes)
    mapping.validate()

    ledger = BufferLedger(sizes=dict(sizes))
    ctx = TransformContext(mapping=mapping, model=model, ledger=ledger,
                           next_qubit=circ.n_qubits,
                           lazy_enabled=options.lazy and not is_baseline)
    if is_baseline:
        bursted = baseline_mod.assign_burst_protocols(bursted, mapping, model,
                                                      lazy_return=False)
        from .transform import split_pass
        items, _ = split_pass(list(bursted.items), ctx, two_node_only=True)
        items = _plan_leftovers(items, ctx)
    else:
        items = transform_fixpoint(
            list(bursted.items), ctx,
            enable_fusion=options.fusion, enable_split=options.split,
            enable_lazy=options.lazy,
        )

    conc = Concretizer(mapping, model, sizes, use_buffer=not is_baseline,
                       routing=options.routing, record_trace=options.record_trace)
    sched = conc.run(items)
    metrics = compute_metrics(sched, mapping, model,
                              as_printed=options.cost_as_printed)
    params = CostParams.from_model(model)
    return CompileResult(metrics=metrics, schedule=sched, mapping=mapping,
                         sizes=sizes, items=items, energy=energy_fn(metrics, params))


def _plan_leftovers(items: list[Item], ctx: TransformContext) -> list[Item]:
    from .transform import estimate_collective_cost, _protocol_of

    out = []
    for it in items:
        if isinstance(it, CommBlock) and it.plan is None:
            plan = estimate_collective_cost(it, ctx)
            it = it.replace(plan=plan, target_node=plan.target,
                            protocol=_protocol_of(plan))
        out.append(it)
    return out


def evaluate_candidate(circ: Circuit, model: HardwareModel, mapping: Mapping,
                       sizes: dict[int, int], options: CompileOptions) -> tuple[Metrics, float]:
    """Pure evaluation of one (mapping, buffer sizes) candidate."""
    try:
        result = compile_circuit(circ, model, options, mapping=mapping, sizes=sizes)
    except Exception:
        return Metrics(), float("inf")
    return result.metrics, result.energy
