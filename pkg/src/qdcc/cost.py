"""Estimated program fidelity and the annealing energy.

C = f_1q^N1q * f_2q^N2q * f_ms^Nms * f_iep^Niep * f_oep^Noep * e^(-t/T),
computed in log space. The printed variant of the decay term, (1 - e^(-t/T)),
rewards longer programs with higher fidelity; since longer latency means
more decoherence, the decaying form is the default and the printed form
stays available behind a flag for audits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class CostParams:
    f_1q: float = 0.9999
    f_2q: float = 0.9980
    f_ms: float = 0.9960
    f_iep: float = 0.98
    f_oep: float = 0.90
    T: float = 100000.0

    def __post_init__(self):
        for name in ("f_1q", "f_2q", "f_ms", "f_iep", "f_oep"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.T <= 0:
            raise ValueError("T must be positive")

    @classmethod
    def from_model(cls, model) -> "CostParams":
        t = model.timing
        return cls(f_1q=t.f_1q, f_2q=t.f_2q, f_ms=t.f_ms, f_iep=t.f_iep,
                   f_oep=t.f_oep, T=t.T_decoherence)


def estimated_fidelity(m, p: CostParams, as_printed: bool = False) -> tuple[float, float]:
    """Returns (C, ln C); counts are read from a Metrics-shaped object."""
    if min(m.n_1q, m.n_2q, m.n_ms, m.n_iep, m.n_oep) < 0 or m.latency < 0:
        raise ValueError("counts and latency must be non-negative")
    logc = (
        m.n_1q * math.log(p.f_1q)
        + m.n_2q * math.log(p.f_2q)
        + m.n_ms * math.log(p.f_ms)
        + m.n_iep * math.log(p.f_iep)
        + m.n_oep * math.log(p.f_oep)
    )
    if as_printed:
        decay = 1.0 - math.exp(-m.latency / p.T)
        if decay <= 0.0:
            return 0.0, -math.inf
        logc += math.log(decay)
    else:
        logc += -m.latency / p.T
    return math.exp(logc), logc


def energy(m, p: CostParams) -> float:
    """Annealing energy -ln C, assembled directly in log space."""
    return -(
        m.n_1q * math.log(p.f_1q)
        + m.n_2q * math.log(p.f_2q)
        + m.n_ms * math.log(p.f_ms)
        + m.n_iep * math.log(p.f_iep)
        + m.n_oep * math.log(p.f_oep)
        - m.latency / p.T
    )
