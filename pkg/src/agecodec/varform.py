"""Variational p-norm formula and the g-weight maxmin objectives.

For a nonnegative ``values`` vector and pmf P,

    ||values||_p = max_Q  sum_x P(x) (Q(x)/P(x))**(1/p') values(x),

attained at Q proportional to P * values**p.  With p = 2 this linearizes
the second moment of the codeword length, which turns the age and delay
costs into weighted average lengths with weights

    g(x) = (1 -/+ z**2/2) P(x) + z sqrt(Q(x) P(x)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .pmf import Pmf

__all__ = [
    "FEASIBILITY_SLACK",
    "Mode",
    "GWeights",
    "InfeasibleWeights",
    "g_weights",
    "pnorm",
    "pnorm_variational_value",
    "q_star",
    "xlog_ratio_sum",
    "age_objective",
    "delay_objective",
    "objective",
]

Mode = Literal["age", "delay"]
FEASIBILITY_SLACK = 1e-12


class InfeasibleWeights(ValueError):
    """(z, Q) lies outside the set where every g-weight is nonnegative."""


def _probs(p) -> np.ndarray:
    return p.probs if isinstance(p, Pmf) else np.asarray(p, dtype=float)


@dataclass(frozen=True, eq=False)
class GWeights:
    z: float
    q: np.ndarray
    values: np.ndarray
    mode: Mode

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.values >= -FEASIBILITY_SLACK))

    @property
    def total(self) -> float:
        return float(self.values.sum())

    def tilted(self) -> np.ndarray:
        """The pmf proportional to the (clipped) weights."""
        g = np.clip(self.values, 0.0, None)
        return g / g.sum()


def g_weights(p, z: float, q, mode: Mode = "age") -> GWeights:
    pr, qr = _probs(p), _probs(q)
    if pr.shape != qr.shape:
        raise ValueError("P and Q must have the same alphabet")
    if z < 0:
        raise ValueError("z must be >= 0")
    a = 1.0 - 0.5 * z * z if mode == "age" else 1.0 + 0.5 * z * z
    vals = a * pr + z * np.sqrt(np.clip(qr, 0.0, None) * pr)
    return GWeights(float(z), qr, vals, mode)


def pnorm(p, values, order: float) -> float:
    pr = _probs(p)
    v = np.abs(np.asarray(values, dtype=float))
    return float(np.sum(pr * v**order) ** (1.0 / order))


def pnorm_variational_value(p, values, q, order: float) -> float:
    """E_P[(dQ/dP)**(1/p') |values|] with p' the Hoelder conjugate of ``order``."""
    if not order > 1:
        raise ValueError("order must be > 1")
    pr, qr = _probs(p), _probs(q)
    if np.any((pr == 0) & (qr > 0)):
        raise ValueError("Q must be absolutely continuous w.r.t. P")
    v = np.abs(np.asarray(values, dtype=float))
    inv_conj = (order - 1.0) / order
    mask = pr > 0
    ratio = qr[mask] / pr[mask]
    return float(np.sum(pr[mask] * ratio**inv_conj * v[mask]))


def q_star(p, values, order: float) -> np.ndarray:
    """The tilt of P by |values|**order, which attains the p-norm."""
    pr = _probs(p)
    v = np.abs(np.asarray(values, dtype=float))
    w = pr * v**order
    if not np.any(w > 0):
        raise ValueError("values must not be identically zero")
    return w / w.sum()


def xlog_ratio_sum(g: np.ndarray) -> float:
    """sum_x g(x) log2(G / g(x)) with G = sum g, using 0 log(G/0) = 0."""
    total = g.sum()
    pos = g > 0
    return float(np.sum(g[pos] * (np.log2(total) - np.log2(g[pos]))))


def age_objective(p, z: float, q) -> float:
    gw = g_weights(p, z, q, "age")
    if not gw.feasible:
        raise InfeasibleWeights(f"negative g-weight {gw.values.min():.3g} at z={z:.6g}")
    return xlog_ratio_sum(np.clip(gw.values, 0.0, None))


def delay_objective(p, z: float, q, l_th: float) -> float:
    gw = g_weights(p, z, q, "delay")
    return xlog_ratio_sum(gw.values) - 0.5 * z * z * l_th


def objective(p, z: float, q, mode: Mode, l_th: float | None = None) -> float:
    if mode == "age":
        return age_objective(p, z, q)
    if l_th is None:
        raise ValueError("delay objective needs l_th")
    return delay_objective(p, z, q, l_th)
