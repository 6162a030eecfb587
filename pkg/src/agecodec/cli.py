"""Command-line front end: design, sweep, simulate, verify."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .age import (
    RandomizedScheme,
    age_bounds,
    average_age_erasure,
    average_age_erasure_exact,
    average_age_randomized,
    average_delay,
)
from .codec import CodecError, LengthAssignment, shannon_lengths
from .pmf import Pmf, PmfError, entropy, new_pmf, uniform, zipf
from .sim import SimConfig, SimError, renewal_identities, simulate_mg1, simulate_update
from .solver import (
    DelayInfeasibleError,
    OptResult,
    SolverOptions,
    direct_oracle,
    primal_cost,
    saddle_check,
    solve_age,
    solve_delay,
    summarize,
)

log = logging.getLogger("agecodec")

DEFAULTS = {
    "mode": "age",
    "lambda": None,
    "epsilon": 0.0,
    "theta": None,
    "skip_length": None,
    "seed": 0,
    "jobs": 1,
    "out": None,
    "format": "csv",
    "horizon": 10**6,
    "arrivals": 10**6,
    "param": "s",
    "grid": "0:5:0.5",
    "code": "proposed",
    "multistarts": 8,
}
_INT_KEYS = {"seed", "jobs", "horizon", "arrivals", "multistarts"}
_FLOAT_KEYS = {"lambda", "epsilon", "skip_length"}


class UsageError(Exception):
    pass


# -- parsing helpers ------------------------------------------------------


def _kv(text: str) -> dict[str, str]:
    out = {}
    for part in filter(None, text.split(",")):
        if "=" not in part:
            raise UsageError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _read_numbers(path: str) -> list[float]:
    text = Path(path).read_text()
    stripped = text.strip()
    if stripped.startswith("["):
        return [float(v) for v in json.loads(stripped)]
    rows = [r for r in csv.reader(io.StringIO(text)) if r and r[0].strip()]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]  # header
    # one value per row, or the last column of a two-column listing
    return [float(r[-1]) for r in rows]


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def parse_dist(spec: str, **override) -> Pmf:
    """``zipf:s=1,n=256``, ``uniform:n=8``, ``spike:p=0.5,n=256``,
    ``file:PATH`` or ``inline:0.5,0.25,0.25``."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "inline":
            return new_pmf(float(v) for v in rest.split(","))
        if kind == "file":
            return new_pmf(_read_numbers(rest))
        args = {**_kv(rest), **{k: str(v) for k, v in override.items()}}
        if kind == "zipf":
            return zipf(float(args.get("s", 1.0)), int(args.get("n", 256)))
        if kind == "uniform":
            return uniform(int(args["n"]))
        if kind == "spike":
            # P(1) = p, the rest uniform
            n, p1 = int(args.get("n", 256)), float(args.get("p", 0.5))
            return new_pmf([p1] + [(1.0 - p1) / (n - 1)] * (n - 1))
    except (KeyError, ValueError, OSError) as exc:
        raise UsageError(f"bad distribution {spec!r}: {exc}") from exc
    raise UsageError(f"unknown distribution kind {kind!r}")


def parse_grid(text: str) -> list[float]:
    if ":" in text:
        a, b, step = (float(v) for v in text.split(":"))
        if step <= 0 or b < a:
            raise UsageError(f"bad grid {text!r}")
        n = int(round((b - a) / step)) + 1
        return [round(a + i * step, 12) for i in range(n)]
    vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise UsageError("grid is empty")
    return vals


def read_config(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over config over defaults."""
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    merged = dict(DEFAULTS)
    for k, v in cfg.items():
        if k not in merged and k != "dist":
            raise UsageError(f"unknown config key {k!r}")
        merged[k] = v
    for k, v in vars(args).items():
        if v is not None and k not in ("func", "config"):
            merged[k] = v
    for k in _INT_KEYS:
        merged[k] = int(merged[k])
    for k in _FLOAT_KEYS:
        if merged.get(k) is not None:
            merged[k] = float(merged[k])
    if "dist" not in merged:
        raise UsageError("a distribution is required (--dist)")
    if merged["mode"] not in ("age", "delay"):
        raise UsageError("mode must be age or delay")
    if merged["mode"] == "delay" and merged["lambda"] is None and merged.get("param") != "lambda":
        raise UsageError("delay mode needs --lambda")
    return merged


def load_theta(spec: str | None, n: int, skip: float | None) -> RandomizedScheme | None:
    if spec is None:
        return None
    kind, _, path = spec.partition(":")
    if kind != "file":
        raise UsageError("theta must be given as file:PATH")
    theta = np.array(_read_numbers(path))
    if theta.size != n:
        raise UsageError(f"theta has {theta.size} entries for {n} symbols")
    return RandomizedScheme(theta, skip)


# -- design ---------------------------------------------------------------


def _design(p: Pmf, opt: dict) -> OptResult:
    sopts = SolverOptions(seed=opt["seed"], multistarts=opt["multistarts"])
    if opt["mode"] == "age":
        return solve_age(p, sopts)
    return solve_delay(p, opt["lambda"], sopts)


def _value(p: Pmf, ell, mode: str, lam: float | None) -> float:
    c = primal_cost(p, ell, mode, lam)
    return c - 0.5 if mode == "age" else c


def design_summary(p: Pmf, res: OptResult) -> dict:
    s = summarize(p, res)
    mode, lam = res.mode, res.lam
    sh_real, sh_int = shannon_lengths(p), shannon_lengths(p, integer=True)
    row = {
        "mode": mode,
        "lambda": lam,
        "H": s["H"],
        "cost_real": s["cost_real"],
        "value_real": s["value_real"],
        "cost_int": s["cost_int"],
        "value_int": s["value_int"],
        "shannon_value_real": _value(p, sh_real, mode, lam),
        "shannon_value_int": _value(p, sh_int, mode, lam),
        "mean_length": s["mean_length"],
        "kl_p_pstar": s["kl_p_pstar"],
    }
    if mode == "age":
        row["lower_bound"], row["upper_bound"] = age_bounds(p)
    else:
        row["lower_bound"], row["upper_bound"] = s["value_real"], None
    row["path"], row["converged"] = res.path, res.converged
    return row


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return str(v)


def _csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_design(opt: dict) -> int:
    p = parse_dist(opt["dist"])
    res = _design(p, opt)
    row = design_summary(p, res)
    out = Path(opt["out"] or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "result.json").write_text(res.to_json() + "\n")
    (out / "codebook.json").write_text(res.codebook().to_json() + "\n")
    (out / "summary.csv").write_text(_csv([row], list(row)))
    if opt["format"] == "json":
        print(json.dumps(row, indent=1))
    else:
        sys.stdout.write(_csv([row], list(row)))
    return 0


# -- sweep ----------------------------------------------------------------


def _sweep_point(job: tuple) -> dict:
    value, opt = job
    prefix = opt["mode"]
    row: dict = {opt["param"]: value, "seed": opt["seed"]}
    try:
        if opt["param"] == "lambda":
            p = parse_dist(opt["dist"])
            opt = {**opt, "lambda": value}
        else:
            p = parse_dist(opt["dist"], **{opt["param"]: value})
        res = _design(p, opt)
        lam = opt["lambda"] if opt["mode"] == "delay" else None
        s = summarize(p, res)
        sh_real, sh_int = shannon_lengths(p), shannon_lengths(p, integer=True)
        row.update({
            "H": entropy(p),
            f"{prefix}_proposed_real": s["value_real"],
            f"{prefix}_proposed_int": s["value_int"],
            f"{prefix}_shannon_real": _value(p, sh_real, opt["mode"], lam),
            f"{prefix}_shannon_int": _value(p, sh_int, opt["mode"], lam),
            "EL_proposed": s["mean_length"],
            "EL_shannon": entropy(p),
            "KL": s["kl_p_pstar"],
            "status": "ok" if res.converged else "not-converged",
        })
    except (DelayInfeasibleError, PmfError, UsageError, ValueError) as exc:
        log.warning("sweep point %s=%s failed: %s", opt["param"], value, exc)
        row["status"] = "error: " + str(exc).replace("\n", " ")
    return row


def sweep_columns(param: str, mode: str) -> list[str]:
    return [
        param, "H",
        f"{mode}_proposed_real", f"{mode}_proposed_int",
        f"{mode}_shannon_real", f"{mode}_shannon_int",
        "EL_proposed", "EL_shannon", "KL", "seed", "status",
    ]


def run_sweep(opt: dict) -> list[dict]:
    grid = parse_grid(str(opt["grid"]))
    jobs = [(v, opt) for v in grid]
    if opt["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=opt["jobs"]) as ex:
            return list(ex.map(_sweep_point, jobs))  # map keeps grid order
    return [_sweep_point(j) for j in jobs]


def cmd_sweep(opt: dict) -> int:
    rows = run_sweep(opt)
    if opt["format"] == "json":
        _emit(json.dumps(rows, indent=1) + "\n", opt["out"])
    else:
        _emit(_csv(rows, sweep_columns(opt["param"], opt["mode"])), opt["out"])
    return 0


# -- simulate -------------------------------------------------------------


def _code_for(p: Pmf, opt: dict, scheme: RandomizedScheme | None) -> tuple[LengthAssignment, OptResult | None]:
    choice = opt["code"]
    if choice.startswith("file:"):
        return LengthAssignment.from_csv(Path(choice[5:]).read_text()), None
    if scheme is not None:
        return _effective_design(p, opt, scheme)
    if choice == "shannon":
        return shannon_lengths(p, integer=True), None
    if choice != "proposed":
        raise UsageError(f"unknown code {choice!r}")
    res = _design(p, opt)
    return res.integer_lengths, res


def _effective_design(p: Pmf, opt: dict, scheme: RandomizedScheme):
    """Design for the pmf of what is actually sent: P(x) theta(x) plus the idle word.

    Symbols that are never sent get the idle word's length as a placeholder.
    """
    sent = p.probs * scheme.theta
    weights = np.append(sent, max(1.0 - sent.sum(), 0.0))
    eff = new_pmf(weights)
    res = solve_age(eff, SolverOptions(seed=opt["seed"], multistarts=opt["multistarts"]))
    ints = res.integer_lengths.lengths
    full = np.zeros(len(weights))
    full[eff.support] = ints
    skip = full[-1] if weights[-1] > 0 else float(ints.min())
    lengths = np.where(scheme.theta > 0, full[:-1], skip)
    return LengthAssignment(lengths, integral=True), None


def _simulate(p: Pmf, opt: dict) -> dict:
    scheme = load_theta(opt["theta"], len(p), opt["skip_length"])
    ell, res = _code_for(p, opt, scheme)
    if scheme is not None and scheme.skip_length is None:
        tx = ell.lengths[scheme.theta > 0]
        skip = ell.lengths[scheme.theta == 0]
        scheme = RandomizedScheme(scheme.theta, float(skip[0] if skip.size else tx.min()))
    out: dict = {"seed": opt["seed"], "mode": opt["mode"], "lengths": ell.as_ints()}
    if opt["mode"] == "age":
        cfg = SimConfig(opt["horizon"], opt["seed"], opt["epsilon"], scheme)
        rep = simulate_update(p, ell, cfg)
        sch = scheme or RandomizedScheme.always(len(p))
        base = average_age_randomized(p, ell, sch)
        out["formula"] = average_age_erasure_exact(base, opt["epsilon"])
        if opt["epsilon"] > 0:
            out["formula_closed_form"] = average_age_erasure(base, opt["epsilon"])
        out["renewal_residuals"] = renewal_identities(rep, p, ell, scheme)
    else:
        rep = simulate_mg1(p, ell, opt["lambda"], opt["arrivals"], opt["seed"])
        out["formula"] = average_delay(p, ell, opt["lambda"])
    out["report"] = rep.to_dict()
    out["simulated"] = rep.estimate
    out["std_error"] = rep.std_error
    out["_rep"], out["_res"], out["_ell"], out["_scheme"] = rep, res, ell, scheme
    return out


def _public(d: dict) -> dict:
    return {k: v for k, v in d.items() if not k.startswith("_")}


def cmd_simulate(opt: dict) -> int:
    p = parse_dist(opt["dist"])
    out = _public(_simulate(p, opt))
    _emit(json.dumps(out, indent=1, sort_keys=True, default=_fmt) + "\n", opt["out"])
    return 0


# -- verify ---------------------------------------------------------------


def run_checks(opt: dict) -> list[dict]:
    p = parse_dist(opt["dist"])
    sim = _simulate(p, opt)
    checks = []

    def add(name, ok, **residuals):
        checks.append({"check": name, "pass": bool(ok), **residuals})

    res: OptResult | None = sim["_res"]
    if res is not None:
        diag = saddle_check(p, res)
        add("saddle", diag.passed, kraft=diag.kraft, shannon_gap=diag.shannon_gap,
            z_residual=diag.z_residual, q_residual=diag.q_residual)
        lam = opt["lambda"] if opt["mode"] == "delay" else None
        _, oc = direct_oracle(p, opt["mode"], lam, SolverOptions(seed=opt["seed"]))
        add("oracle", res.cost <= oc + 1e-6, solver=res.cost, oracle=oc, gap=res.cost - oc)
    rep = sim["_rep"]
    target = sim["formula"]
    rel = 0.01 if opt["mode"] == "age" else 0.02
    err = abs(rep.estimate - target)
    add("simulation", rep.within(target, 3.0, rel), simulated=rep.estimate, formula=target,
        abs_error=err, std_error=rep.std_error)
    if opt["mode"] == "age":
        r = sim["renewal_residuals"]
        add("renewal", all(abs(v) <= 4.0 for v in r.values()), **r)
    return checks


def cmd_verify(opt: dict) -> int:
    checks = run_checks(opt)
    ok = all(c["pass"] for c in checks)
    if opt["format"] == "json":
        text = json.dumps({"seed": opt["seed"], "pass": ok, "checks": checks}, indent=1, default=_fmt) + "\n"
    else:
        lines = []
        for c in checks:
            extra = " ".join(f"{k}={_fmt(v)}" for k, v in c.items() if k not in ("check", "pass"))
            lines.append(f"{'PASS' if c['pass'] else 'FAIL'} {c['check']} {extra}")
        text = "\n".join(lines) + "\n"
    _emit(text, opt["out"])
    return 0 if ok else 1


# -- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="agecodec", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--dist", help="zipf:s=1,n=256 | uniform:n=8 | spike:p=0.5,n=256 | file:PATH | inline:w1,w2,...")
        sp.add_argument("--mode", choices=["age", "delay"])
        sp.add_argument("--lambda", dest="lambda", type=float, help="arrival rate (delay mode)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--multistarts", type=int)
        sp.add_argument("--out", help="output path (a directory for design)")
        sp.add_argument("--format", choices=["csv", "json"])
        sp.add_argument("--config", help="flat key = value file; flags override it")

    def simflags(sp):
        sp.add_argument("--epsilon", type=float, help="per-bit erasure probability")
        sp.add_argument("--theta", help="file:PATH with one transmit probability per symbol")
        sp.add_argument("--skip-length", dest="skip_length", type=float)
        sp.add_argument("--horizon", type=int, help="slots to simulate (age mode)")
        sp.add_argument("--arrivals", type=int, help="arrivals to simulate (delay mode)")
        sp.add_argument("--code", help="proposed | shannon | file:PATH (symbol,length CSV)")

    sp = sub.add_parser("design", help="optimal lengths, codebook and summary")
    common(sp)
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("sweep", help="design over a parameter grid, one CSV row per point")
    common(sp)
    sp.add_argument("--param", help="distribution parameter to sweep, or 'lambda'")
    sp.add_argument("--grid", help="start:stop:step or a comma list")
    sp.add_argument("--jobs", type=int)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("simulate", help="simulate a code and compare with the formula")
    common(sp)
    simflags(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="design, simulate and run every check")
    common(sp)
    simflags(sp)
    sp.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("AGECODEC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    ap = build_parser()
    args = ap.parse_args(argv)
    func = args.func
    try:
        opt = resolve(args)
        return func(opt)
    except (UsageError, PmfError, CodecError, SimError, OSError) as exc:
        print(f"agecodec: {exc}", file=sys.stderr)
        return 2
    except DelayInfeasibleError as exc:
        print(f"agecodec: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
