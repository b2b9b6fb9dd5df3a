"""Simulated annealing over buffer sizes, then the qubit mapping.

Energy is -ln C of the fully compiled candidate. Phase one perturbs the
per-node buffer sizes with the mapping fixed; phase two perturbs the
mapping with sizes fixed. Metropolis acceptance, geometric cooling, and a
best-so-far result that can only improve on the initial candidate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .commbuffer import neighbor_buffer
from .hwmodel import HardwareModel
from .ir import Circuit
from .partition import Mapping, neighbor_mapping
from .pipeline import CompileOptions, allocate_buffers, compile_circuit, evaluate_candidate, initial_mapping
from .schedule import Metrics

from . import baseline as baseline_mod


@dataclass
class AnnealLogEntry:
    phase: int
    iteration: int
    temperature: float
    energy: float
    accepted: bool


@dataclass
class AnnealResult:
    mapping: Mapping
    sizes: dict[int, int]
    metrics: Metrics
    energy: float
    log: list[AnnealLogEntry] = field(default_factory=list)


def metropolis_accept(delta: float, temperature: float, rng: np.random.Generator) -> bool:
    if delta <= 0:
        return True
    if temperature <= 0:
        return False
    return bool(rng.random() < math.exp(-delta / temperature))


def anneal(circ: Circuit, model: HardwareModel, options: CompileOptions | None = None,
           iters_per_phase: int | None = None, alpha: float | None = None) -> AnnealResult:
    options = options or CompileOptions()
    iters = options.anneal_iters if iters_per_phase is None else iters_per_phase
    alpha = options.anneal_alpha if alpha is None else alpha
    rng = np.random.default_rng(options.seed)

    mapping = initial_mapping(circ, model, options)
    bursted = baseline_mod.burst_aggregate(circ, mapping)
    sizes = allocate_buffers(bursted, mapping, model,
                             baseline=options.pipeline == "baseline")
    cur_metrics, cur_energy = evaluate_candidate(circ, model, mapping, sizes, options)
    best = AnnealResult(mapping.copy(), dict(sizes), cur_metrics, cur_energy)
    log: list[AnnealLogEntry] = []

    if iters <= 0 or not math.isfinite(cur_energy):
        best.log = log
        return best

    for phase, perturb in ((1, "sizes"), (2, "mapping")):
        temp = max(cur_energy, 1e-6)
        for it in range(iters):
            if perturb == "sizes":
                cand_sizes = neighbor_buffer(sizes, _with_buffers(mapping, sizes), rng)
                cand_mapping = mapping
            else:
                cand_mapping = neighbor_mapping(_with_buffers(mapping, sizes), rng)
                cand_mapping.buffer_slots = {}
                cand_sizes = sizes
            metrics, e = evaluate_candidate(circ, model, cand_mapping, cand_sizes, options)
            accepted = math.isfinite(e) and metropolis_accept(e - cur_energy, temp, rng)
            if accepted:
                mapping, sizes, cur_energy = cand_mapping, cand_sizes, e
                if e < best.energy:
                    best = AnnealResult(cand_mapping.copy(), dict(cand_sizes), metrics, e)
            log.append(AnnealLogEntry(phase, it, temp, cur_energy, accepted))
            temp *= alpha
    best.log = log
    return best


def _with_buffers(mapping: Mapping, sizes: dict[int, int]) -> Mapping:
    m = mapping.copy()
    m.buffer_slots = dict(sizes)
    return m


def anneal_log_csv(log: list[AnnealLogEntry]) -> str:
    lines = ["phase,iteration,temperature,energy,accepted"]
    for e in log:
        lines.append(f"{e.phase},{e.iteration},{e.temperature:.6g},{e.energy:.9g},{int(e.accepted)}")
    return "\n".join(lines) + "\n"
