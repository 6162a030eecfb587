"""Codeword-length assignments, Kraft accounting and canonical prefix codes."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .pmf import Pmf

__all__ = [
    "KRAFT_TOL",
    "CodecError",
    "LengthAssignment",
    "CodeBook",
    "kraft_sum",
    "shannon_lengths",
    "round_up",
    "canonical_code",
    "moments",
]

KRAFT_TOL = 1e-9
_INT_TOL = 1e-9


class CodecError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LengthAssignment:
    """Nonnegative codeword lengths in bits, one per symbol id."""

    lengths: np.ndarray
    integral: bool = False

    def __post_init__(self) -> None:
        a = np.array(self.lengths, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise CodecError("lengths must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(a)) or np.any(a < 0):
            raise CodecError("lengths must be finite and >= 0")
        if self.integral:
            r = np.round(a)
            if np.any(np.abs(a - r) > _INT_TOL):
                raise CodecError("integral assignment has non-integer lengths")
            a = r
        a.setflags(write=False)
        object.__setattr__(self, "lengths", a)

    def __len__(self) -> int:
        return int(self.lengths.size)

    def __iter__(self):
        return iter(self.lengths.tolist())

    def __getitem__(self, i):
        return self.lengths[i]

    @classmethod
    def integer(cls, lengths: Sequence[int]) -> "LengthAssignment":
        return cls(np.asarray(lengths, dtype=float), integral=True)

    @property
    def kraft(self) -> float:
        return kraft_sum(self)

    @property
    def kraft_feasible(self) -> bool:
        return self.kraft <= 1.0 + KRAFT_TOL

    def as_ints(self) -> list[int]:
        if not self.integral:
            raise CodecError("assignment is not integral")
        return [int(v) for v in self.lengths]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["symbol", "length"])
        for i, v in enumerate(self.lengths):
            w.writerow([i, int(v) if self.integral else repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "LengthAssignment":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["symbol", "length"]:
            raise CodecError("length CSV must have columns 'symbol,length'")
        rows = sorted((int(r["symbol"]), float(r["length"])) for r in reader)
        if [s for s, _ in rows] != list(range(len(rows))):
            raise CodecError("length CSV must list symbols 0..N-1 exactly once")
        vals = np.array([v for _, v in rows])
        integral = bool(np.all(vals == np.round(vals)))
        return cls(vals, integral=integral)


@dataclass(frozen=True)
class CodeBook:
    """Binary prefix-free codewords indexed by symbol id."""

    codewords: tuple[str, ...]

    def __post_init__(self) -> None:
        words = tuple(self.codewords)
        for w in words:
            if not w or set(w) - {"0", "1"}:
                raise CodecError(f"invalid codeword {w!r}")
        ordered = sorted(words)
        for a, b in zip(ordered, ordered[1:]):
            if b.startswith(a):
                raise CodecError(f"codeword {a!r} is a prefix of {b!r}")
        object.__setattr__(self, "codewords", words)

    def __len__(self) -> int:
        return len(self.codewords)

    def __getitem__(self, i: int) -> str:
        return self.codewords[i]

    @property
    def lengths(self) -> LengthAssignment:
        return LengthAssignment.integer([len(w) for w in self.codewords])

    def encode(self, symbols: Sequence[int]) -> str:
        return "".join(self.codewords[s] for s in symbols)

    def decode(self, bits: str) -> list[int]:
        table = {w: i for i, w in enumerate(self.codewords)}
        out, cur = [], ""
        for b in bits:
            cur += b
            if cur in table:
                out.append(table[cur])
                cur = ""
        if cur:
            raise CodecError("trailing bits do not form a codeword")
        return out

    def to_json(self) -> str:
        return json.dumps({str(i): w for i, w in enumerate(self.codewords)}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "CodeBook":
        data: Mapping[str, str] = json.loads(text)
        keys = sorted(int(k) for k in data)
        if keys != list(range(len(keys))):
            raise CodecError("codebook JSON must map symbol ids 0..N-1")
        return cls(tuple(data[str(k)] for k in keys))


def _as_lengths(ell) -> np.ndarray:
    if isinstance(ell, LengthAssignment):
        return ell.lengths
    if isinstance(ell, CodeBook):
        return ell.lengths.lengths
    return np.asarray(ell, dtype=float)


def kraft_sum(ell) -> float:
    return float(np.sum(np.exp2(-_as_lengths(ell))))


def shannon_lengths(p: Pmf, integer: bool = False) -> LengthAssignment:
    """Lengths -log2 P(x), ceiled when ``integer`` is set."""
    real = -np.log2(p.probs)
    if not integer:
        return LengthAssignment(real)
    # guard against -log2 of an exact power of two landing just above an integer
    snapped = np.where(np.abs(real - np.round(real)) < 1e-12, np.round(real), real)
    return LengthAssignment(np.ceil(snapped), integral=True)


def round_up(ell: LengthAssignment) -> LengthAssignment:
    a = ell.lengths
    if ell.integral:
        return ell
    snapped = np.where(np.abs(a - np.round(a)) < 1e-12, np.round(a), a)
    return LengthAssignment(np.ceil(snapped), integral=True)


def canonical_code(ell: LengthAssignment | Sequence[int]) -> CodeBook:
    """Canonical prefix code: symbols sorted by (length, id) get increasing codewords."""
    if not isinstance(ell, LengthAssignment):
        ell = LengthAssignment.integer(list(ell))
    if not ell.integral:
        raise CodecError("canonical_code needs integer lengths; round_up first")
    lengths = ell.as_ints()
    if len(lengths) >= 2 and min(lengths) < 1:
        raise CodecError("zero-length codeword in an alphabet of size >= 2")
    # exact rational Kraft check on integers
    top = max(lengths)
    if sum(1 << (top - k) for k in lengths) > (1 << top):
        raise CodecError(f"lengths violate Kraft's inequality (sum={kraft_sum(ell):.6g})")
    order = sorted(range(len(lengths)), key=lambda i: (lengths[i], i))
    words = [""] * len(lengths)
    code, prev = 0, lengths[order[0]]
    for rank, i in enumerate(order):
        k = lengths[i]
        if rank:
            code = (code + 1) << (k - prev)
        words[i] = format(code, f"0{k}b") if k else ""
        prev = k
    return CodeBook(tuple(words))


def moments(p: Pmf, ell) -> tuple[float, float]:
    """(E[L], E[L^2]) for L = ell(X), X ~ p."""
    a = _as_lengths(ell)
    if a.size != len(p):
        raise CodecError(f"size mismatch: pmf has {len(p)} symbols, lengths {a.size}")
    q = p.probs
    m1 = float(q @ a)
    m2 = float(q @ (a * a))
    return m1, max(m2, m1 * m1)
