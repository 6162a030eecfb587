"""Closed-form age and delay costs plus the analytic age bounds.

Time is measured in channel bit-slots: the channel carries one bit per
unit of time.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .codec import _as_lengths, kraft_sum, moments, shannon_lengths
from .pmf import Pmf, entropy

__all__ = [
    "AgeError",
    "RandomizedScheme",
    "AgeReport",
    "age_cost",
    "average_age",
    "average_age_randomized",
    "randomized_moments",
    "average_age_erasure",
    "average_age_erasure_exact",
    "age_bounds",
    "age_report",
    "shannon_age_certificate",
    "average_delay",
]


class AgeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RandomizedScheme:
    """Transmit symbol x with probability ``theta[x]``; otherwise send the
    idle codeword of length ``skip_length``.

    ``skip_length=None`` means "use the shortest codeword length".
    """

    theta: np.ndarray
    skip_length: float | None = None

    def __post_init__(self) -> None:
        t = np.array(self.theta, dtype=float)
        if t.ndim != 1 or np.any(~np.isfinite(t)) or np.any((t < 0) | (t > 1)):
            raise AgeError("theta entries must lie in [0, 1]")
        t.setflags(write=False)
        object.__setattr__(self, "theta", t)
        if self.skip_length is not None and not (
            math.isfinite(self.skip_length) and self.skip_length >= 0
        ):
            raise AgeError("skip_length must be finite and >= 0")

    @classmethod
    def always(cls, n: int) -> "RandomizedScheme":
        return cls(np.ones(n))

    def transmit_prob(self, p: Pmf) -> float:
        return float(p.probs @ self.theta)

    def resolved_skip_length(self, ell) -> float:
        if self.skip_length is not None:
            return float(self.skip_length)
        return float(_as_lengths(ell).min())

    def effective_lengths(self, ell) -> np.ndarray:
        """Lengths of the codewords actually used: sent symbols, then the idle word."""
        a = _as_lengths(ell)
        return np.append(a[self.theta > 0], self.resolved_skip_length(ell))

    def effective_kraft(self, ell) -> float:
        # the idle word shares the code tree with the symbols that are sent
        return kraft_sum(self.effective_lengths(ell))


@dataclass(frozen=True)
class AgeReport:
    mean_length: float
    second_moment: float
    average_age: float
    lower_bound: float
    upper_bound: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def age_cost(m1: float, m2: float) -> float:
    """E[L] + E[L^2] / (2 E[L]): the average age plus one half."""
    if not m1 > 0:
        raise AgeError("average age is undefined for E[L] = 0")
    return m1 + m2 / (2.0 * m1)


def average_age(p: Pmf, ell) -> float:
    m1, m2 = moments(p, ell)
    return age_cost(m1, m2) - 0.5


def randomized_moments(p: Pmf, ell, scheme: RandomizedScheme) -> tuple[float, float, float]:
    """(E[theta(X)], E[L(theta)], E[L(theta)^2])."""
    a = _as_lengths(ell)
    if a.size != len(p) or scheme.theta.size != len(p):
        raise AgeError("lengths, theta and pmf must share one alphabet")
    w = p.probs * scheme.theta
    e_theta = float(w.sum())
    if not e_theta > 0:
        raise AgeError("E[theta(X)] = 0: nothing is ever transmitted")
    skip = scheme.resolved_skip_length(a)
    idle = max(1.0 - e_theta, 0.0)
    m1 = float(w @ a) + idle * skip
    m2 = float(w @ (a * a)) + idle * skip * skip
    return e_theta, m1, m2


def average_age_randomized(p: Pmf, ell, scheme: RandomizedScheme) -> float:
    if scheme.theta.size == len(p) and np.all(scheme.theta == 1.0):
        return average_age(p, ell)
    e_theta, m1, m2 = randomized_moments(p, ell, scheme)
    if not m1 > 0:
        raise AgeError("E[L(theta)] = 0")
    return m1 / e_theta + m2 / (2.0 * m1) - 0.5


def average_age_erasure(base_age: float, eps: float) -> float:
    """Age over an erasure channel with repetition, in the stated closed form."""
    if not 0 <= eps < 1:
        raise AgeError("erasure probability must lie in [0, 1)")
    return base_age / (1.0 - eps) + eps / (2.0 * (1.0 - eps))


def average_age_erasure_exact(base_age: float, eps: float) -> float:
    """Exact age when every bit is repeated until it gets through.

    Each bit then occupies a Geometric(1 - eps) number of slots, so
    E[D] = E[L]/(1-eps) and E[D^2] = (E[L^2] + eps E[L])/(1-eps)^2, which
    puts eps/(1-eps) rather than eps/(2(1-eps)) on top of the scaled age.
    """
    if not 0 <= eps < 1:
        raise AgeError("erasure probability must lie in [0, 1)")
    return (base_age + eps) / (1.0 - eps)


def age_bounds(p: Pmf) -> tuple[float, float]:
    return 1.5 * entropy(p) - 0.5, 1.5 * math.log2(len(p)) + 1.0


def age_report(p: Pmf, ell) -> AgeReport:
    m1, m2 = moments(p, ell)
    lo, hi = age_bounds(p)
    return AgeReport(m1, m2, age_cost(m1, m2) - 0.5, lo, hi)


def shannon_age_certificate(p: Pmf) -> float:
    """Slack in log|X| + 1 >= (1 - 1/(2 ln 2)) E[l_S^2]/E[l_S] for integer Shannon lengths."""
    m1, m2 = moments(p, shannon_lengths(p, integer=True))
    return math.log2(len(p)) + 1.0 - (1.0 - 1.0 / (2.0 * math.log(2.0))) * m2 / m1


def average_delay(p: Pmf, ell, lam: float) -> float:
    """Mean sojourn time of an M/G/1 queue with service time L; inf if unstable."""
    if not lam > 0:
        raise AgeError("arrival rate must be > 0")
    m1, m2 = moments(p, ell)
    l_th = 1.0 / lam
    if m1 >= l_th:
        return math.inf
    return m2 / (2.0 * (l_th - m1)) + m1

