"""Finite probability mass functions, generators and information measures.

All logarithms are base 2, so entropies and divergences are in bits.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Pmf",
    "Partition",
    "PmfError",
    "new_pmf",
    "zipf",
    "uniform",
    "entropy",
    "kl_divergence",
    "group_equal_probs",
]

NORMALIZATION_TOL = 1e-12
DEFAULT_GROUP_TOL = 1e-12


class PmfError(ValueError):
    """Raised for weights that cannot form a valid pmf."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Pmf:
    """A strictly positive pmf over symbol ids ``0..N-1``.

    ``support`` maps each symbol id back to its index in the weights the
    pmf was built from; ``dropped`` lists the zero-weight input indices.
    """

    probs: np.ndarray
    support: np.ndarray = field(default=None)  # type: ignore[assignment]
    dropped: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1:
            raise PmfError("probabilities must be a 1-d sequence")
        if probs.size < 2:
            raise PmfError(f"need at least 2 symbols, got {probs.size}")
        if not np.all(np.isfinite(probs)) or np.any(probs <= 0):
            raise PmfError("every probability must be finite and > 0")
        total = probs.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL * probs.size:
            raise PmfError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probs", _frozen(probs / total))
        support = self.support
        if support is None:
            support = np.arange(probs.size)
        support = np.asarray(support, dtype=np.int64)
        if support.shape != probs.shape:
            raise PmfError("support mapping must match the number of symbols")
        support.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "dropped", tuple(int(i) for i in self.dropped))

    def __len__(self) -> int:
        return int(self.probs.size)

    def __iter__(self):
        return iter(self.probs.tolist())

    def __getitem__(self, i):
        return self.probs[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pmf):
            return NotImplemented
        return bool(np.array_equal(self.probs, other.probs)) and bool(
            np.array_equal(self.support, other.support)
        )

    def __hash__(self) -> int:
        return hash(self.probs.tobytes())

    @property
    def min_prob(self) -> float:
        return float(self.probs.min())

    # -- serialization -------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(self.probs.tolist())

    @classmethod
    def from_json(cls, text: str) -> "Pmf":
        data = json.loads(text)
        if not isinstance(data, list):
            raise PmfError("pmf JSON must be an array of probabilities")
        return new_pmf(data)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["p"])
        for p in self.probs:
            writer.writerow([repr(float(p))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Pmf":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["p"]:
            raise PmfError("pmf CSV must have the single header column 'p'")
        return new_pmf([float(r[0]) for r in rows[1:] if r])


@dataclass(frozen=True)
class Partition:
    """Disjoint groups of symbol ids sharing (numerically) equal probability."""

    groups: tuple[np.ndarray, ...]
    group_probs: np.ndarray  # total mass of each group
    symbol_probs: np.ndarray  # common per-symbol probability of each group

    def __len__(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups], dtype=np.int64)

    def labels(self, n: int) -> np.ndarray:
        """Group index of every symbol id ``0..n-1``."""
        out = np.empty(n, dtype=np.int64)
        for i, g in enumerate(self.groups):
            out[g] = i
        return out


def new_pmf(weights: Iterable[float]) -> Pmf:
    """Normalize nonnegative weights, dropping zero-weight symbols."""
    w = np.asarray(list(weights), dtype=float)
    if w.ndim != 1:
        raise PmfError("weights must be a flat sequence")
    if not np.all(np.isfinite(w)):
        raise PmfError("weights must be finite")
    if np.any(w < 0):
        raise PmfError("weights must be nonnegative")
    if not np.any(w > 0):
        raise PmfError("all weights are zero")
    keep = np.flatnonzero(w > 0)
    if keep.size < 2:
        raise PmfError("need at least 2 strictly positive weights")
    dropped = tuple(int(i) for i in np.flatnonzero(w == 0))
    kept = w[keep]
    return Pmf(kept / kept.sum(), support=keep, dropped=dropped)


def uniform(n: int) -> Pmf:
    return new_pmf(np.ones(int(n)))


def zipf(s: float, n: int) -> Pmf:
    """Zipf(s, n): P(i) proportional to i**-s over i = 1..n (symbol id i-1)."""
    if not (math.isfinite(s) and s >= 0):
        raise PmfError(f"Zipf exponent must be finite and >= 0, got {s!r}")
    if int(n) != n or n < 2:
        raise PmfError(f"Zipf alphabet size must be an integer >= 2, got {n!r}")
    i = np.arange(1, int(n) + 1, dtype=float)
    # log-domain keeps large s from underflowing before normalization
    logw = -s * np.log(i)
    w = np.exp(logw - logw.max())
    return new_pmf(w)


def entropy(p: Pmf) -> float:
    q = p.probs
    return float(-np.sum(q * np.log2(q)))


def kl_divergence(p: Pmf, q: Pmf) -> float:
    """D(p || q) in bits."""
    if len(p) != len(q):
        raise PmfError(f"alphabet size mismatch: {len(p)} vs {len(q)}")
    a, b = p.probs, q.probs
    if np.any(b <= 0):
        raise PmfError("q must be positive wherever p is")
    return float(max(np.sum(a * (np.log2(a) - np.log2(b))), 0.0))


def group_equal_probs(p: Pmf | Sequence[float], tol: float = DEFAULT_GROUP_TOL) -> Partition:
    """Partition symbols into runs of equal probability.

    Probabilities are sorted in decreasing order and a new group starts
    whenever the gap to the previous value exceeds ``tol``.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    probs = p.probs if isinstance(p, Pmf) else np.asarray(p, dtype=float)
    order = np.argsort(-probs, kind="stable")
    sorted_p = probs[order]
    breaks = np.flatnonzero(np.abs(np.diff(sorted_p)) > tol) + 1
    groups = tuple(np.sort(g) for g in np.split(order, breaks))
    group_probs = np.array([probs[g].sum() for g in groups])
    symbol_probs = np.array([m / g.size for m, g in zip(group_probs, groups)])
    return Partition(groups, group_probs, symbol_probs)
