"""Pure-numpy statevector kernels.

Fallback implementation for the Cython module; both expose the same four
operations on flat complex128 arrays of length 2**n. Wire 0 is the most
significant bit of the basis index.
"""
from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def apply_1q(state: np.ndarray, n: int, wire: int, u: np.ndarray) -> np.ndarray:
    axis = wire
    t = state.reshape((2,) * n)
    t = np.moveaxis(t, axis, 0)
    out = np.tensordot(u, t, axes=([1], [0]))
    return np.moveaxis(out, 0, axis).reshape(-1).copy()


def apply_2q(state: np.ndarray, n: int, w1: int, w2: int, u: np.ndarray) -> np.ndarray:
    t = state.reshape((2,) * n)
    t = np.moveaxis(t, (w1, w2), (0, 1))
    shape = t.shape
    out = (u.reshape(2, 2, 2, 2).reshape(4, 4) @ t.reshape(4, -1)).reshape(shape)
    return np.moveaxis(out, (0, 1), (w1, w2)).reshape(-1).copy()


def apply_diag(state: np.ndarray, n: int, wires: tuple[int, ...], diag: np.ndarray) -> np.ndarray:
    t = state.reshape((2,) * n)
    k = len(wires)
    t = np.moveaxis(t, wires, tuple(range(k)))
    shape = t.shape
    out = t.reshape(2**k, -1) * diag[:, None]
    out = out.reshape(shape)
    return np.moveaxis(out, tuple(range(k)), wires).reshape(-1).copy()


def branch_probabilities(state: np.ndarray, n: int, wire: int) -> tuple[float, float]:
    t = state.reshape((2,) * n)
    t = np.moveaxis(t, wire, 0)
    p0 = float(np.sum(np.abs(t[0]) ** 2))
    p1 = float(np.sum(np.abs(t[1]) ** 2))
    return p0, p1


def project_and_remove(state: np.ndarray, n: int, wire: int, outcome: int, norm: float) -> np.ndarray:
    """Collapse ``wire`` to ``outcome`` and drop it from the register."""
    t = state.reshape((2,) * n)
    t = np.moveaxis(t, wire, 0)
    return (t[outcome] / norm).reshape(-1).copy()
