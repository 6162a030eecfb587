"""Optimal tilted distributions for the age and delay costs.

Both costs are minimized over real lengths with sum 2**-l <= 1 by solving
the dual problem

    max_{z >= 0} max_Q  sum_x g(x) log2(G / g(x))  [- z**2 L_th / 2 for delay]

where g = (1 -/+ z**2/2) P + z sqrt(Q P) and G = sum g.  The optimal
lengths are -log2 P* with P* = g / G at the maximizer.

The dual value as a function of z is concave (a pointwise minimum of
functions concave in z), and for fixed z it is concave in Q, so the solver
runs a bracketing grid plus golden-section search over z around an inner
maximization over Q.  Q is kept constant on groups of equal-probability
symbols, which shrinks the inner problem to one coordinate per group.
A primal Frank-Wolfe path (closed-form z and Q responses, Shannon lengths
for the tilted pmf, exact line search) runs alongside from several
starting points, and the best primal cost wins.

``direct_oracle`` minimizes the primal cost directly over the simplex and
shares no code with the dual path; it exists to cross-check it.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from scipy.optimize import minimize

from .age import age_cost
from .codec import CodeBook, LengthAssignment, canonical_code, moments, round_up
from .pmf import Pmf, entropy, group_equal_probs, kl_divergence
from .varform import Mode, g_weights, objective

__all__ = [
    "DELAY_MARGIN",
    "SolverOptions",
    "OptResult",
    "SaddleDiagnostics",
    "DelayInfeasibleError",
    "z_bound",
    "delay_z_bound",
    "delay_condition_holds",
    "primal_cost",
    "solve_age",
    "solve_delay",
    "direct_oracle",
    "saddle_check",
]

log = logging.getLogger(__name__)

DELAY_MARGIN = math.log2(1.0 + 1.0 / math.sqrt(2.0))
_Z_AGE_MAX = 1.0 + math.sqrt(3.0)  # beyond this no Q keeps every g-weight >= 0
_LN2 = math.log(2.0)


class DelayInfeasibleError(ValueError):
    """The arrival rate is too high for the delay maxmin characterization."""


@dataclass(frozen=True)
class SolverOptions:
    z_grid_points: int = 64
    inner_max_iters: int = 10_000
    inner_tol: float = 1e-10
    multistarts: int = 8
    seed: int = 0
    z_tol: float = 1e-8
    alternation_iters: int = 200
    group_tol: float = 1e-12
    inner_method: Literal["newton", "eg"] = "newton"

    def __post_init__(self) -> None:
        for name in ("z_grid_points", "inner_max_iters", "multistarts", "alternation_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.inner_tol <= 1e-3:
            raise ValueError("inner_tol must lie in (0, 1e-3]")
        if not self.z_tol > 0:
            raise ValueError("z_tol must be positive")
        if self.inner_method not in ("newton", "eg"):
            raise ValueError("inner_method must be 'newton' or 'eg'")


@dataclass(frozen=True, eq=False)
class OptResult:
    mode: Mode
    z_star: float
    q_star: np.ndarray
    p_star: Pmf
    lengths: LengthAssignment
    cost: float
    dual_value: float
    duality_gap: float
    iterations: int
    converged: bool
    path: str = "dual"
    lam: float | None = None
    guarantee: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        """Average age (cost - 1/2) in age mode, average delay in delay mode."""
        return self.cost - 0.5 if self.mode == "age" else self.cost

    @property
    def integer_lengths(self) -> LengthAssignment:
        a = round_up(self.lengths)
        # a zero-length word cannot coexist with other codewords
        if np.any(a.lengths < 1):
            log.info("bumping zero-length codewords to 1 bit")
            a = LengthAssignment(np.maximum(a.lengths, 1.0), integral=True)
        return a

    def codebook(self) -> CodeBook:
        return canonical_code(self.integer_lengths)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "z_star": self.z_star,
            "q_star": self.q_star.tolist(),
            "p_star": self.p_star.probs.tolist(),
            "lengths": self.lengths.lengths.tolist(),
            "cost": self.cost,
            "average_age_or_delay": self.value,
            "converged": self.converged,
            "duality_gap": self.duality_gap,
            "diagnostics": {
                "path": self.path,
                "iterations": self.iterations,
                "dual_value": self.dual_value,
                "lambda": self.lam,
                "structural_guarantee": self.guarantee,
                **self.diagnostics,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


# ---------------------------------------------------------------------------
# primal costs


def _cost_from_moments(m1: float, m2: float, mode: Mode, l_th: float | None) -> float:
    if mode == "age":
        return age_cost(m1, m2) if m1 > 0 else math.inf
    if m1 >= l_th:
        return math.inf
    return m1 + m2 / (2.0 * (l_th - m1))


def primal_cost(p: Pmf, ell, mode: Mode = "age", lam: float | None = None) -> float:
    """E[L] + E[L^2]/(2E[L]) (age) or E[L] + E[L^2]/(2(1/lam - E[L])) (delay)."""
    m1, m2 = moments(p, ell)
    return _cost_from_moments(m1, m2, mode, None if lam is None else 1.0 / lam)


# ---------------------------------------------------------------------------
# bounds on z


def z_bound(p: Pmf) -> float:
    """(log|X| / H(P)) * sqrt(1 / min P): the optimal z never exceeds this."""
    return math.log2(len(p)) / entropy(p) * math.sqrt(1.0 / p.min_prob)


def delay_condition_holds(p: Pmf, lam: float) -> bool:
    return entropy(p) + DELAY_MARGIN < 1.0 / lam


def delay_z_bound(p: Pmf, lam: float) -> float:
    l_prime = entropy(p) + DELAY_MARGIN
    l_th = 1.0 / lam
    if l_prime >= l_th:
        return math.inf
    return math.sqrt(1.0 / p.min_prob) * l_prime / (l_th - l_prime)


# ---------------------------------------------------------------------------
# dual problem on equal-probability groups


@dataclass
class _Point:
    w: np.ndarray  # Q mass per group
    value: float
    ell: np.ndarray
    grad: np.ndarray
    g: np.ndarray  # per-symbol weight in each group
    total: float
    upper: float  # value of the best-response lengths; >= inner optimum


class _Dual:
    """The dual objective restricted to Q constant on probability groups."""

    def __init__(self, p: Pmf, mode: Mode, l_th: float | None, group_tol: float) -> None:
        part = group_equal_probs(p, group_tol)
        self.pmf = p
        self.partition = part
        self.mode = mode
        self.l_th = l_th
        self.m = part.group_probs
        self.n = part.sizes.astype(float)
        self.ps = part.symbol_probs
        self.labels = part.labels(len(p))

    def a(self, z: float) -> float:
        return 1.0 - 0.5 * z * z if self.mode == "age" else 1.0 + 0.5 * z * z

    def penalty(self, z: float) -> float:
        return 0.5 * z * z * self.l_th if self.mode == "delay" else 0.0

    def evaluate(self, z: float, w: np.ndarray) -> _Point | None:
        if np.any(w <= 0):
            return None
        r = np.sqrt(w / self.m)
        g = self.ps * (self.a(z) + z * r)
        if np.any(g <= 0):
            return None
        total = float(self.n @ g)
        ell = np.log2(total) - np.log2(g)
        value = float(self.n @ (g * ell)) - self.penalty(z)
        grad = z * ell / (2.0 * r)
        e1 = float(self.m @ ell)
        e2 = float(self.m @ (ell * ell))
        upper = self.a(z) * e1 + z * math.sqrt(e2) - self.penalty(z)
        return _Point(w, value, ell, grad, g, total, upper)

    def start(self) -> np.ndarray:
        return self.m.copy()

    # -- inner maximization over Q for fixed z ------------------------

    def maximize_q(self, z: float, w0: np.ndarray, opts: SolverOptions) -> tuple[_Point, int]:
        pt = self.evaluate(z, w0)
        if pt is None:
            pt = self.evaluate(z, self.start())
        if pt is None:
            raise ValueError(f"no feasible Q at z={z}")
        if z == 0.0 or self.m.size == 1:
            return pt, 0
        step = self._newton_step if opts.inner_method == "newton" else self._eg_step
        eta = 1.0
        it = 0
        for it in range(1, opts.inner_max_iters + 1):
            if self._converged(pt, opts.inner_tol):
                break
            nxt, eta = step(z, pt, eta)
            if nxt is None:
                nxt, eta = self._eg_step(z, pt, eta)
            if nxt is None:
                break
            stalled = nxt.value - pt.value <= 1e-15 * max(1.0, abs(pt.value))
            pt = nxt
            if stalled:
                break
        return pt, it

    @staticmethod
    def _converged(pt: _Point, tol: float) -> bool:
        # KKT residual: the Q-gradient is constant across groups at the optimum
        nu = float(pt.w @ pt.grad)
        kkt = float(np.max(np.abs(pt.grad - nu))) / max(abs(nu), 1e-300)
        gap = pt.upper - pt.value
        return kkt <= tol or gap <= 1e-15 * max(1.0, abs(pt.value))

    def _line_search(self, z: float, pt: _Point, d: np.ndarray, t: float) -> _Point | None:
        slope = float(pt.grad @ d)
        if not slope > 0:
            return None
        neg = d < 0
        if np.any(neg):
            t = min(t, 0.99 * float(np.min(-pt.w[neg] / d[neg])))
        for _ in range(60):
            cand = self.evaluate(z, pt.w + t * d)
            if cand is not None and cand.value >= pt.value + 1e-4 * t * slope:
                return cand
            t *= 0.5
        cand = self.evaluate(z, pt.w + t * d)
        if cand is not None and cand.value > pt.value:
            return cand
        return None

    def _newton_step(self, z: float, pt: _Point, eta: float):
        w, g, ell = pt.w, pt.g, pt.ell
        r = np.sqrt(w / self.m)
        dg = z / (2.0 * self.n * r)  # d g_i / d w_i
        d2g = -dg / (2.0 * w)
        u = self.n * dg
        hess = np.outer(u, u) / (pt.total * _LN2)
        hess[np.diag_indices_from(hess)] += -self.n * dg * dg / (g * _LN2) + self.n * ell * d2g
        k = w.size
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = hess
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.append(-pt.grad, 0.0)
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            return None, eta
        d = sol[:k]
        if not np.all(np.isfinite(d)):
            return None, eta
        return self._line_search(z, pt, d, 1.0), eta

    def _eg_step(self, z: float, pt: _Point, eta: float):
        grad = pt.grad
        scale = float(np.max(np.abs(grad - pt.w @ grad))) or 1.0
        for _ in range(60):
            logw = np.log(pt.w) + eta * (grad - grad.max()) / scale
            w = np.exp(logw - logw.max())
            w /= w.sum()
            cand = self.evaluate(z, w)
            if cand is not None and cand.value > pt.value:
                return cand, min(eta * 1.5, 1e6)
            eta *= 0.5
        return None, eta

    # -- outer search over z -------------------------------------------

    def maximize(self, z_max: float, opts: SolverOptions) -> tuple[float, _Point, int, list]:
        zs = np.linspace(0.0, z_max, opts.z_grid_points + 1)
        w = self.start()
        cache: dict[float, _Point] = {}
        total_iters = 0

        def phi(z: float, w_init: np.ndarray) -> _Point:
            nonlocal total_iters
            if z in cache:
                return cache[z]
            pt, it = self.maximize_q(z, w_init, opts)
            total_iters += it
            cache[z] = pt
            return pt

        grid = []
        for z in zs:
            pt = phi(float(z), w)
            grid.append((float(z), pt.value))
            w = pt.w
        k = int(np.argmax([v for _, v in grid]))
        lo = float(zs[max(k - 1, 0)])
        hi = float(zs[min(k + 1, zs.size - 1)])

        # golden-section search on the concave function z -> max_Q value
        inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
        w_best = cache[float(zs[k])].w
        x1 = hi - inv_phi * (hi - lo)
        x2 = lo + inv_phi * (hi - lo)
        f1 = phi(x1, w_best)
        f2 = phi(x2, f1.w)
        while hi - lo > opts.z_tol:
            if f1.value >= f2.value:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - inv_phi * (hi - lo)
                f1 = phi(x1, f2.w)
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + inv_phi * (hi - lo)
                f2 = phi(x2, f1.w)
        best_z, best = max(cache.items(), key=lambda kv: (kv[1].value, -kv[0]))
        return best_z, best, total_iters, grid

    def expand_q(self, w: np.ndarray) -> np.ndarray:
        """Per-symbol Q from group masses."""
        return (w / self.n)[self.labels]


# ---------------------------------------------------------------------------
# primal Frank-Wolfe path


def _line_min(e0, e1, s0, s1, s2, mode: Mode, l_th: float | None) -> float:
    """Minimize the cost along E(t)=e0+e1 t, S(t)=s0+s1 t+s2 t^2 over t in [0, 1]."""

    def cost(t: float) -> float:
        return _cost_from_moments(e0 + e1 * t, s0 + s1 * t + s2 * t * t, mode, l_th)

    # stationary points solve a quadratic in t for both costs
    if mode == "age":
        # 2 e1 E^2 + (s1 + 2 s2 t) E - S e1 = 0
        c2 = 2 * e1 * e1 * e1 + 2 * s2 * e1 - s2 * e1
        c1 = 4 * e1 * e1 * e0 + s1 * e1 + 2 * s2 * e0 - s1 * e1
        c0 = 2 * e1 * e0 * e0 + s1 * e0 - s0 * e1
    else:
        # with R = l_th - E:  2 e1 R^2 + (s1 + 2 s2 t) R + S e1 = 0
        r0, r1 = l_th - e0, -e1
        c2 = 2 * e1 * r1 * r1 + 2 * s2 * r1 + s2 * e1
        c1 = 4 * e1 * r0 * r1 + s1 * r1 + 2 * s2 * r0 + s1 * e1
        c0 = 2 * e1 * r0 * r0 + s1 * r0 + s0 * e1
    candidates = [0.0, 1.0]
    if abs(c2) > 1e-300:
        disc = c1 * c1 - 4 * c2 * c0
        if disc >= 0:
            sq = math.sqrt(disc)
            candidates += [(-c1 + sq) / (2 * c2), (-c1 - sq) / (2 * c2)]
    elif abs(c1) > 1e-300:
        candidates.append(-c0 / c1)
    ts = [t for t in candidates if 0.0 <= t <= 1.0 and math.isfinite(t)]
    return min(ts, key=cost)


def _alternation(
    dual: _Dual, ell0: np.ndarray, opts: SolverOptions
) -> tuple[np.ndarray, list[float], str]:
    """Frank-Wolfe on group lengths; returns lengths, cost history and stop reason."""
    m, n, ps = dual.m, dual.n, dual.ps
    mode, l_th = dual.mode, dual.l_th
    ell = ell0.copy()
    e1, e2 = float(m @ ell), float(m @ (ell * ell))
    history = [_cost_from_moments(e1, e2, mode, l_th)]
    reason = "max_iters"
    for _ in range(opts.alternation_iters):
        if mode == "age":
            z = math.sqrt(e2) / e1
        else:
            z = math.sqrt(e2) / (l_th - e1)
        # Q proportional to P * ell^2, expressed per symbol of each group
        q_sym = ps * ell * ell / e2
        g = ps * dual.a(z) + z * np.sqrt(q_sym * ps)
        if np.any(g <= 0):
            reason = "negative_weight"
            break
        target = np.log2(float(n @ g)) - np.log2(g)
        d = target - ell
        t = _line_min(
            e1,
            float(m @ d),
            e2,
            float(2 * (m @ (ell * d))),
            float(m @ (d * d)),
            mode,
            l_th,
        )
        new_ell = ell + t * d
        ne1, ne2 = float(m @ new_ell), float(m @ (new_ell * new_ell))
        new_cost = _cost_from_moments(ne1, ne2, mode, l_th)
        if not new_cost < history[-1] - 1e-15 * abs(history[-1]):
            reason = "stalled"
            break
        ell, e1, e2 = new_ell, ne1, ne2
        history.append(new_cost)
    return ell, history, reason


# ---------------------------------------------------------------------------
# public solvers


def _finish(
    p: Pmf,
    dual: _Dual,
    mode: Mode,
    z: float,
    q_sym: np.ndarray,
    iterations: int,
    path: str,
    lam: float | None,
    ell_override: np.ndarray | None = None,
    diagnostics: dict | None = None,
) -> OptResult:
    l_th = dual.l_th
    gw = g_weights(p, z, q_sym, mode)
    tilt = np.clip(gw.values, 0.0, None)
    tilt = tilt / tilt.sum()
    if ell_override is None:
        ell = -np.log2(tilt)
        p_star = Pmf(tilt)
    else:
        ell = ell_override
        pk = np.exp2(-ell)
        p_star = Pmf(pk / pk.sum())
    cost = primal_cost(p, ell, mode, lam)
    try:
        dual_value = objective(p, z, q_sym, mode, l_th)
    except ValueError:
        dual_value = -math.inf
    gap = abs(cost - dual_value)
    return OptResult(
        mode=mode,
        z_star=float(z),
        q_star=np.asarray(q_sym, dtype=float),
        p_star=p_star,
        lengths=LengthAssignment(ell),
        cost=float(cost),
        dual_value=float(dual_value),
        duality_gap=float(gap),
        iterations=iterations,
        converged=bool(gap <= 1e-6 * max(1.0, abs(cost))),
        path=path,
        lam=lam,
        diagnostics=dict(diagnostics or {}),
    )


def _solve(p: Pmf, mode: Mode, lam: float | None, z_max: float, opts: SolverOptions) -> OptResult:
    l_th = None if lam is None else 1.0 / lam
    dual = _Dual(p, mode, l_th, opts.group_tol)
    z, pt, iters, grid = dual.maximize(z_max, opts)
    best = _finish(
        p, dual, mode, z, dual.expand_q(pt.w), iters, "dual", lam,
        diagnostics={"groups": int(dual.m.size), "z_max": z_max},
    )
    # Frank-Wolfe from Shannon lengths of P and from seeded random tilts
    rng = np.random.default_rng(opts.seed)
    starts = [-np.log2(dual.ps)]
    for _ in range(opts.multistarts - 1):
        tilt = rng.dirichlet(np.ones(dual.m.size)) * 0.5 + dual.m * 0.5
        starts.append(-np.log2(tilt / dual.n))
    for k, ell0 in enumerate(starts):
        ell, history, reason = _alternation(dual, ell0, opts)
        cost = history[-1]
        if cost < best.cost - 1e-12 * max(1.0, abs(cost)):
            e1, e2 = float(dual.m @ ell), float(dual.m @ (ell * ell))
            za = math.sqrt(e2) / (e1 if mode == "age" else l_th - e1)
            q_sym = (dual.ps * ell * ell / e2)[dual.labels]
            log.debug("alternation start %d beat dual path: %.12g < %.12g", k, cost, best.cost)
            best = _finish(
                p, dual, mode, za, q_sym, len(history) - 1, f"alternation[{k}]", lam,
                ell_override=ell[dual.labels],
                diagnostics={"groups": int(dual.m.size), "z_max": z_max, "stop": reason},
            )
    return best


def solve_age(p: Pmf, opts: SolverOptions | None = None) -> OptResult:
    """Minimum-average-age real lengths: Shannon lengths of the optimal tilt P*."""
    opts = opts or SolverOptions()
    z_max = min(z_bound(p), _Z_AGE_MAX * (1.0 - 1e-12))
    return _solve(p, "age", None, z_max, opts)


def solve_delay(
    p: Pmf, lam: float, opts: SolverOptions | None = None, fallback: bool = False
) -> OptResult:
    """Minimum-average-delay real lengths for Poisson arrivals at rate ``lam``.

    Requires H(P) + log2(1 + 1/sqrt(2)) < 1/lam.  With ``fallback`` set and
    only H(P) < 1/lam holding, the primal is minimized directly and the
    result is flagged as carrying no structural guarantee.
    """
    opts = opts or SolverOptions()
    if not lam > 0:
        raise ValueError("arrival rate must be > 0")
    h = entropy(p)
    l_th = 1.0 / lam
    if h + DELAY_MARGIN >= l_th:
        msg = (
            f"delay design needs H(P) + log2(1 + 1/sqrt(2)) < 1/lambda, "
            f"but {h:.6g} + {DELAY_MARGIN:.6g} >= {l_th:.6g}; "
            "use direct_oracle for this arrival rate"
        )
        if not fallback or h >= l_th:
            raise DelayInfeasibleError(msg)
        log.warning("%s (falling back to direct minimization)", msg)
        ell, cost = direct_oracle(p, "delay", lam, opts)
        dual = _Dual(p, "delay", l_th, opts.group_tol)
        e1, e2 = moments(p, ell)
        z = math.sqrt(e2) / (l_th - e1)
        q_sym = p.probs * ell.lengths**2 / e2
        res = _finish(p, dual, "delay", z, q_sym, 0, "oracle", lam, ell_override=ell.lengths)
        return replace(res, guarantee=False)
    return _solve(p, "delay", lam, delay_z_bound(p, lam), opts)


# ---------------------------------------------------------------------------
# independent primal oracle


def _softmax_lengths(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t = theta - theta.max()
    lse = math.log(np.exp(t).sum())
    logq = t - lse
    return np.exp(logq), -logq / _LN2


def direct_oracle(
    p: Pmf, mode: Mode = "age", lam: float | None = None, opts: SolverOptions | None = None
) -> tuple[LengthAssignment, float]:
    """Minimize the primal cost over lengths -log2 q, q in the simplex.

    Quasi-Newton descent on softmax logits from several starts (Shannon
    lengths of P, uniform lengths, seeded random points).
    """
    opts = opts or SolverOptions()
    probs = p.probs
    l_th = None
    if mode == "delay":
        if lam is None or not lam > 0:
            raise ValueError("delay mode needs a positive arrival rate")
        l_th = 1.0 / lam
        if entropy(p) >= l_th:
            raise DelayInfeasibleError(
                f"no stable code: H(P) = {entropy(p):.6g} >= 1/lambda = {l_th:.6g}"
            )

    big = 1e12

    def fun(theta: np.ndarray):
        q, ell = _softmax_lengths(theta)
        e1 = float(probs @ ell)
        e2 = float(probs @ (ell * ell))
        if mode == "age":
            cost = e1 + e2 / (2 * e1)
            dl = probs * (1.0 - e2 / (2 * e1 * e1) + ell / e1)
        else:
            slack = l_th - e1
            if slack <= 1e-12 * l_th:
                return big * (1.0 - slack), np.zeros_like(theta)
            cost = e1 + e2 / (2 * slack)
            dl = probs * (1.0 + ell / slack + e2 / (2 * slack * slack))
        # d ell_x / d theta_y = (q_y - [x == y]) / ln 2
        grad = (q * dl.sum() - dl) / _LN2
        return cost, grad

    rng = np.random.default_rng(opts.seed + 7919)
    starts = [np.log(probs), np.zeros(len(p))]
    for _ in range(max(opts.multistarts - 2, 0)):
        mix = 0.5 * rng.dirichlet(np.ones(len(p))) + 0.5 * probs
        starts.append(np.log(mix))

    best_ell, best_cost = None, math.inf
    for theta0 in starts:
        res = minimize(
            fun, theta0, jac=True, method="L-BFGS-B",
            options={"maxiter": 3000, "maxcor": 30, "ftol": 1e-15, "gtol": 1e-12},
        )
        _, ell = _softmax_lengths(res.x)
        cost = primal_cost(p, ell, mode, lam)
        if cost < best_cost:
            best_ell, best_cost = ell, cost
    if best_ell is None or not math.isfinite(best_cost):
        raise DelayInfeasibleError("no stable length assignment found")
    return LengthAssignment(best_ell), float(best_cost)


# ---------------------------------------------------------------------------
# saddle-point diagnostics


@dataclass(frozen=True)
class SaddleDiagnostics:
    kraft: float
    shannon_gap: float
    z_residual: float
    q_residual: float
    min_weight: float
    tol: float = 1e-6

    @property
    def lengths_optimal(self) -> bool:
        return self.kraft <= 1.0 + 1e-9 and self.shannon_gap <= self.tol

    @property
    def stationary(self) -> bool:
        return self.z_residual <= self.tol and self.q_residual <= self.tol

    @property
    def weights_nonnegative(self) -> bool:
        return self.min_weight >= -1e-12

    @property
    def passed(self) -> bool:
        return self.lengths_optimal and self.stationary and self.weights_nonnegative

    def failures(self) -> list[str]:
        out = []
        if not self.lengths_optimal:
            out.append(f"lengths not optimal for tilt (kraft={self.kraft:.3g}, gap={self.shannon_gap:.3g})")
        if not self.stationary:
            out.append(f"(z, Q) not stationary (dz={self.z_residual:.3g}, dQ={self.q_residual:.3g})")
        if not self.weights_nonnegative:
            out.append(f"negative g-weight {self.min_weight:.3g}")
        return out


def saddle_check(
    p: Pmf,
    result: OptResult,
    mode: Mode | None = None,
    lengths: LengthAssignment | np.ndarray | None = None,
    tol: float = 1e-6,
) -> SaddleDiagnostics:
    """Check that (lengths, (z*, Q*)) is a saddle point of the linearized cost.

    (i) the lengths minimize sum g l over Kraft-feasible l, (ii) (z*, Q*)
    is first-order stationary for fixed lengths, (iii) g >= 0.
    ``lengths`` overrides ``result.lengths`` (negative controls).
    """
    mode = mode or result.mode
    ell = result.lengths.lengths if lengths is None else np.asarray(
        getattr(lengths, "lengths", lengths), dtype=float
    )
    z, q = result.z_star, result.q_star
    probs = p.probs
    l_th = None if result.lam is None else 1.0 / result.lam
    gw = g_weights(p, z, q, mode)
    g = gw.values
    kraft = float(np.sum(np.exp2(-ell)))
    gpos = np.clip(g, 0.0, None)
    best_linear = float(np.sum(gpos[gpos > 0] * np.log2(gpos.sum() / gpos[gpos > 0])))
    linear = float(g @ ell)
    scale = max(1.0, abs(best_linear))
    shannon_gap = abs(linear - best_linear) / scale

    # d/dz of sum g l  (- z^2 L_th / 2)
    root = np.sqrt(q * probs)
    if mode == "age":
        dz = float((-z * probs + root) @ ell)
    else:
        dz = float((z * probs + root) @ ell) - z * l_th
    z_res = abs(dz) / scale if z > 0 else max(-dz, 0.0) / scale
    # for fixed lengths the best Q attains the 2-norm of the lengths, so the
    # shortfall of sum sqrt(QP) l against ||l||_2 measures non-stationarity in Q
    norm2 = math.sqrt(float(probs @ (ell * ell)))
    q_res = z * max(norm2 - float(root @ ell), 0.0) / scale
    return SaddleDiagnostics(kraft, shannon_gap, z_res, q_res, float(g.min()), tol)


def summarize(p: Pmf, result: OptResult) -> dict:
    """Headline numbers for a design: entropy, real and rounded costs, divergence."""
    ints = result.integer_lengths
    out = {
        "H": entropy(p),
        "cost_real": result.cost,
        "value_real": result.value,
        "cost_int": primal_cost(p, ints, result.mode, result.lam),
        "mean_length": moments(p, result.lengths)[0],
        "kl_p_pstar": kl_divergence(p, result.p_star),
    }
    out["value_int"] = out["cost_int"] - 0.5 if result.mode == "age" else out["cost_int"]
    return out
