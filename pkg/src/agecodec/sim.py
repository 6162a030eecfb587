"""Slotted simulators for the memoryless update scheme and the M/G/1 queue.

The update simulator follows one transmitter that, whenever the channel
frees up, draws the current source symbol and either sends its codeword
(with probability theta(x)) or sends the idle word.  Symbols produced
while the channel is busy are never seen.  Each bit takes one slot; with
erasures every bit is repeated until it gets through, so a codeword of
length l occupies l + NegBinomial(l, 1 - eps) slots.

Because every attempt starts with a fresh independent symbol, attempt
durations are iid and the whole run is built from cumulative sums
instead of an event loop.  Per-cycle quantities between receptions:

    Y_k = S_k - S_{k-1}          time between receptions
    Z_k = S_k - U(S_k)           age right after reception k
    R_k = Y_k (Y_k - 1)/2 + (Y_k - 1) Z_{k-1} + Z_k

R_k sums the age over the slots (S_{k-1}, S_k].  Cycle 1 has no
predecessor and is dropped.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .age import RandomizedScheme
from .codec import _as_lengths
from .pmf import Pmf

__all__ = [
    "SimError",
    "SimConfig",
    "RenewalStats",
    "SimReport",
    "make_streams",
    "simulate_update",
    "simulate_mg1",
    "renewal_closed_forms",
    "renewal_identities",
]

log = logging.getLogger(__name__)

N_BATCHES = 32
MIN_CYCLES = 10
_ROLES = ("symbols", "coins", "erasures", "arrivals")


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 10**6
    seed: int = 0
    epsilon: float = 0.0
    scheme: RandomizedScheme | None = None
    keep_trace: bool = False

    def __post_init__(self) -> None:
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise SimError("horizon must be an integer >= 1")
        if not 0.0 <= self.epsilon < 1.0:
            raise SimError("erasure probability must lie in [0, 1)")


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    """One independent Philox stream per random role."""
    children = np.random.SeedSequence(int(seed)).spawn(len(_ROLES))
    return {r: np.random.Generator(np.random.Philox(s)) for r, s in zip(_ROLES, children)}


def _batch_se(x: np.ndarray, weights: np.ndarray | None = None) -> float:
    """Batch-means standard error of a mean (or of a ratio sum(x)/sum(weights))."""
    nb = min(N_BATCHES, x.size)
    if nb < 2:
        return math.inf
    xs = np.array_split(x, nb)
    if weights is None:
        est = np.array([b.mean() for b in xs])
    else:
        ws = np.array_split(weights, nb)
        est = np.array([b.sum() / w.sum() for b, w in zip(xs, ws)])
    return float(est.std(ddof=1) / math.sqrt(nb))


def _lag_corr(x: np.ndarray, lag: int) -> float:
    if x.size <= lag + 2:
        return 0.0
    a, b = x[:-lag], x[lag:]
    sa, sb = a.std(), b.std()
    if sa == 0 or sb == 0:
        return 0.0
    return float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))


@dataclass
class RenewalStats:
    mean_Y: float
    mean_Y_sq: float
    mean_Z: float
    mean_R: float
    se_Y: float
    se_Y_sq: float
    se_Z: float
    se_R: float
    corr_Y_lag1: float
    corr_R_lag2: float


@dataclass
class SimReport:
    kind: str  # "age" or "mg1"
    estimate: float
    std_error: float
    cycles: int
    seed: int
    horizon: float
    epsilon: float = 0.0
    renewal: RenewalStats | None = None
    stable: bool = True
    warning: str | None = None
    trace: dict | None = field(default=None, repr=False)

    @property
    def average_age(self) -> float:
        if self.kind != "age":
            raise AttributeError("not an age simulation")
        return self.estimate

    @property
    def mean_sojourn(self) -> float:
        if self.kind != "mg1":
            raise AttributeError("not a queue simulation")
        return self.estimate

    def within(self, target: float, k: float = 3.0, rel: float = 0.0) -> bool:
        return abs(self.estimate - target) <= max(k * self.std_error, rel * abs(target))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("trace")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def trace_csv(self) -> str:
        if self.trace is None:
            raise SimError("run with keep_trace=True to record a trace")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cycle", "Y", "Z", "R"])
        for i, row in enumerate(zip(self.trace["Y"], self.trace["Z"], self.trace["R"])):
            w.writerow([i + 2, *(int(v) for v in row)])
        return buf.getvalue()

    def merge(self, other: "SimReport") -> "SimReport":
        """Pool two independent runs of the same configuration.

        Weights are the total observed time, so merging is associative.
        """
        if self.kind != other.kind:
            raise SimError("cannot merge age and queue reports")
        wa, wb = self._weight(), other._weight()
        t = wa + wb
        est = (wa * self.estimate + wb * other.estimate) / t
        se = math.hypot(wa * self.std_error, wb * other.std_error) / t
        ren = None
        if self.renewal is not None and other.renewal is not None:
            ca, cb = self.cycles, other.cycles
            ra, rb = asdict(self.renewal), asdict(other.renewal)
            vals = {}
            for k in ra:
                if k.startswith("se_"):
                    vals[k] = math.hypot(ca * ra[k], cb * rb[k]) / (ca + cb)
                else:
                    vals[k] = (ca * ra[k] + cb * rb[k]) / (ca + cb)
            ren = RenewalStats(**vals)
        warn = "; ".join(w for w in (self.warning, other.warning) if w) or None
        return SimReport(
            self.kind, est, se, self.cycles + other.cycles, self.seed,
            self.horizon + other.horizon, self.epsilon, ren,
            self.stable and other.stable, warn,
        )

    def _weight(self) -> float:
        if self.renewal is not None:
            return self.cycles * self.renewal.mean_Y
        return float(self.cycles)


def _durations(lengths: np.ndarray, eps: float, rng: np.random.Generator) -> np.ndarray:
    d = lengths.astype(np.int64)
    if eps > 0:
        d = d + rng.negative_binomial(d, 1.0 - eps)
    return d


def simulate_update(p: Pmf, code, cfg: SimConfig | None = None) -> SimReport:
    """Run the memoryless update scheme for ``cfg.horizon`` slots.

    ``code`` is a CodeBook or integer lengths; only the lengths matter.
    """
    cfg = cfg or SimConfig()
    ell = _as_lengths(code)
    if ell.size != len(p):
        raise SimError(f"code has {ell.size} lengths for {len(p)} symbols")
    if np.any(ell != np.round(ell)):
        raise SimError("simulation needs integer codeword lengths")
    ell = ell.astype(np.int64)
    scheme = cfg.scheme
    if scheme is not None:
        if scheme.theta.size != len(p):
            raise SimError("theta does not match the alphabet")
        skip = int(round(scheme.resolved_skip_length(ell)))
        theta = scheme.theta
    else:
        skip, theta = 0, None
    sent_len = ell if theta is None else ell[theta > 0]
    if sent_len.size == 0 or np.any(sent_len < 1) or (theta is not None and skip < 1):
        raise SimError("every codeword in use needs length >= 1")
    if cfg.horizon < 100 * int(ell.max()):
        log.warning("horizon %d is short for max length %d", cfg.horizon, ell.max())

    rngs = make_streams(cfg.seed)
    probs = p.probs
    sent_w = probs if theta is None else probs * theta
    mean_d = (float(sent_w @ ell) + (1.0 - float(sent_w.sum())) * skip) / (1.0 - cfg.epsilon)

    T = int(cfg.horizon)
    chunk = int(T / mean_d * 1.05) + 1024
    durs, sent = [], []
    elapsed = 0
    while elapsed < T:
        x = rngs["symbols"].choice(len(p), size=chunk, p=probs)
        if theta is None:
            s = np.ones(chunk, dtype=bool)
        else:
            s = rngs["coins"].random(chunk) < theta[x]
        lens = np.where(s, ell[x], skip)
        d = _durations(lens, cfg.epsilon, rngs["erasures"])
        durs.append(d)
        sent.append(s)
        elapsed += int(d.sum())
        chunk = max(1024, chunk // 4)
    d = np.concatenate(durs)
    s = np.concatenate(sent)
    ends = np.cumsum(d)
    keep = ends <= T
    S = ends[keep & s]
    Zall = d[keep & s]
    if S.size < MIN_CYCLES + 1:
        raise SimError(
            f"only {max(S.size - 1, 0)} complete cycles in {T} slots; need {MIN_CYCLES}"
        )
    Y = np.diff(S)
    Zp, Z = Zall[:-1], Zall[1:]
    R = Y * (Y - 1) // 2 + (Y - 1) * Zp + Z
    Yf, Rf = Y.astype(float), R.astype(float)
    age = float(Rf.sum() / Yf.sum())
    ren = RenewalStats(
        mean_Y=float(Yf.mean()),
        mean_Y_sq=float(np.mean(Yf * Yf)),
        mean_Z=float(Z.mean()),
        mean_R=float(Rf.mean()),
        se_Y=_batch_se(Yf),
        se_Y_sq=_batch_se(Yf * Yf),
        se_Z=_batch_se(Z.astype(float)),
        se_R=_batch_se(Rf),
        corr_Y_lag1=_lag_corr(Yf, 1),
        corr_R_lag2=_lag_corr(Rf, 2),
    )
    trace = {"Y": Y, "Z": Z, "R": R} if cfg.keep_trace else None
    return SimReport(
        "age", age, _batch_se(Rf, Yf), int(Y.size), int(cfg.seed), float(T),
        float(cfg.epsilon), ren, trace=trace,
    )


def simulate_mg1(p: Pmf, code, lam: float, n_arrivals: int = 10**6, seed: int = 0) -> SimReport:
    """FCFS single server, Poisson(lam) arrivals, service = codeword length.

    Returns the mean sojourn time.  An unstable load is reported in the
    ``warning`` field rather than raised.
    """
    if not lam > 0:
        raise SimError("arrival rate must be > 0")
    n = int(n_arrivals)
    if n < 2:
        raise SimError("need at least 2 arrivals")
    if n < 10**4:
        log.warning("%d arrivals is too few for a reliable estimate", n)
    ell = _as_lengths(code)
    if ell.size != len(p):
        raise SimError(f"code has {ell.size} lengths for {len(p)} symbols")
    rngs = make_streams(seed)
    x = rngs["symbols"].choice(len(p), size=n, p=p.probs)
    service = ell[x]
    gaps = rngs["arrivals"].exponential(1.0 / lam, size=n)
    # Lindley: W_{i+1} = max(0, W_i + S_i - A_{i+1}) unrolled as a running minimum
    c = np.concatenate(([0.0], np.cumsum(service[:-1] - gaps[1:])))
    wait = c - np.minimum.accumulate(c)
    sojourn = wait + service
    rho = lam * float(p.probs @ ell)
    stable = rho < 1.0
    warning = None if stable else f"unstable load rho = {rho:.4g} >= 1; estimate is not stationary"
    if warning:
        log.warning(warning)
    return SimReport(
        "mg1", float(sojourn.mean()), _batch_se(sojourn), n, int(seed),
        float(gaps.sum()), stable=stable, warning=warning,
    )


def renewal_closed_forms(p: Pmf, code, scheme: RandomizedScheme | None = None, eps: float = 0.0) -> dict:
    """Exact E[Y], E[Y^2], E[Z], E[R] and the age for iid attempts."""
    ell = _as_lengths(code).astype(float)
    probs = p.probs
    theta = np.ones(len(p)) if scheme is None else scheme.theta
    skip = 0.0 if scheme is None else float(scheme.resolved_skip_length(ell))

    def dmom(l):
        m = l / (1.0 - eps)
        return m, l * eps / (1.0 - eps) ** 2 + m * m

    w = probs * theta
    a = float(w.sum())
    d1, d2 = dmom(ell)
    v1, v2 = float(w @ d1) / a, float(w @ d2) / a  # a sent attempt
    u1, u2 = dmom(skip)  # an idle attempt
    # Y = (G - 1) idle attempts followed by one sent attempt, G ~ Geometric(a)
    k1 = (1.0 - a) / a
    k2 = (1.0 - a) / a**2 + k1 * k1
    idle1 = k1 * u1
    idle2 = k1 * (u2 - u1 * u1) + k2 * u1 * u1
    ey = idle1 + v1
    ey2 = idle2 + 2.0 * idle1 * v1 + v2
    er = (ey2 - ey) / 2.0 + (ey - 1.0) * v1 + v1
    return {"mean_Y": ey, "mean_Y_sq": ey2, "mean_Z": v1, "mean_R": er, "age": er / ey}


def renewal_identities(report: SimReport, p: Pmf, code, scheme: RandomizedScheme | None = None) -> dict:
    """Differences between empirical cycle means and their closed forms, in SE units."""
    if report.renewal is None:
        raise SimError("report carries no renewal statistics")
    exact = renewal_closed_forms(p, code, scheme, report.epsilon)
    r = report.renewal
    pairs = {
        "mean_Y": (r.mean_Y, r.se_Y),
        "mean_Y_sq": (r.mean_Y_sq, r.se_Y_sq),
        "mean_Z": (r.mean_Z, r.se_Z),
        "mean_R": (r.mean_R, r.se_R),
        "age": (report.estimate, report.std_error),
    }
    out = {}
    for k, (val, se) in pairs.items():
        diff = val - exact[k]
        out[k] = 0.0 if diff == 0 else diff / se if se > 0 else math.copysign(math.inf, diff)
    return out
