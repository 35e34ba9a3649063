"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 a check or
certificate failed.  The artifact goes to stdout (or ``--out``); progress and
diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .exact_constants import ExactValue, constants_bundle, dimension_ten_relation

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_CHECK = 0, 1, 2, 3


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    subcommand: str
    dim: int = 11
    spec: Optional[str] = None
    u0x0: float = 1.0
    seed: int = 0
    mc_samples: Optional[int] = None
    output: str = "text"
    out: Optional[str] = None
    tolerances: dict = field(default_factory=dict)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (Fraction, ExactValue)):
        return str(obj)
    return obj


def _text(obj, prefix="") -> list:
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            key = f"{prefix}{k}"
            if isinstance(v, dict):
                lines += _text(v, key + ".")
            else:
                lines.append(f"{key}: {v}")
    else:
        lines.append(f"{prefix}{obj}")
    return lines


def _emit(cfg: RunConfig, payload, text: Optional[str] = None) -> None:
    if cfg.output == "json":
        body = json.dumps(_jsonable(payload), indent=2, allow_nan=False) + "\n"
    elif text is not None:
        body = text
    else:
        body = "\n".join(_text(_jsonable(payload))) + "\n"
    _write(cfg, body)


def _write(cfg: RunConfig, body: str) -> None:
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(body)
    else:
        sys.stdout.write(body)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _weyl(cfg: RunConfig):
    from .weyl_algebra import default_weyl, load_weyl_spec
    if cfg.spec is None:
        return default_weyl(cfg.dim)
    W = load_weyl_spec(cfg.spec)
    if W.n != cfg.dim:
        raise ConfigError(f"spec has dimension {W.n}, --dim is {cfg.dim}")
    return W


def _budget(cfg: RunConfig, default: int) -> int:
    return default if cfg.mc_samples is None else cfg.mc_samples


def _parse_range(text: str):
    try:
        a, b, steps = text.split(":")
        a, b, steps = float(a), float(b), int(steps)
    except ValueError:
        raise ConfigError(f"range {text!r} is not of the form a:b:steps")
    if steps < 1:
        raise ConfigError("range needs at least one step")
    return np.linspace(a, b, steps)


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "y"):
        return True
    if low in ("0", "false", "no", "n"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _parse_tol(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"tolerance override {item!r} is not key=value")
        try:
            out[key] = float(value)
        except ValueError:
            raise ConfigError(f"tolerance value {value!r} is not a number")
    return out


# subcommands

def run_constants(cfg: RunConfig, args) -> int:
    b = constants_bundle(cfg.dim)
    payload = b.as_dict(with_exact=args.exact)
    if args.exact and cfg.dim == 10:
        lhs, rhs = dimension_ten_relation()
        payload["dimension_ten_relation"] = {
            "statement": "2 * 10^-4 * 8^-6 * a_10 = (5/567) * omega_9",
            "lhs": str(lhs), "rhs": str(rhs), "holds": lhs == rhs}
    _emit(cfg, payload)
    return EXIT_OK


def run_weyl(cfg: RunConfig, args) -> int:
    from .weyl_algebra import coercivity_check, random_weyl, validate_weyl
    if args.action == "sample":
        W = random_weyl(cfg.dim, np.random.default_rng(cfg.seed))
        idx = np.argwhere(np.abs(W.components) > 0)
        entries = [[int(i), int(j), int(k), int(l), float(W.components[i, j, k, l])]
                   for i, j, k, l in idx]
        _emit(cfg, {"kind": "full", "n": cfg.dim, "entries": entries})
        return EXIT_OK
    W = _weyl(cfg)
    if args.action == "validate":
        report = validate_weyl(W)
        _emit(cfg, report.as_dict())
        return EXIT_OK if report.accepted else EXIT_CHECK
    res = coercivity_check(W, samples=_budget(cfg, 100_000), seed=cfg.seed)
    _emit(cfg, {"minimum": res.minimum, "argmin": res.argmin, "sweep_minimum": res.sweep_minimum,
                "maximum": res.maximum, "sampling_gap": res.sampling_gap,
                "coercive": res.minimum > 0})
    return EXIT_OK


BUBBLE_TOLERANCES = {"bubble_pde": 1e-10, "kernel_pde": 1e-10, "kernel_vs_bubble": 1e-6,
                     "corrector_residual": 1e-9}


def bubble_report(W, seed: int = 0, points: int = 1000) -> dict:
    """Max residuals of the bubble, kernel and corrector identities at random points."""
    from .bubble_corrector import (BubbleParams, bubble_pde_residual, corrector_residual,
                                   kernel_eval, kernel_from_bubble, kernel_pde_residual)
    n = W.n
    rng = np.random.default_rng(seed)
    z = rng.uniform(-1, 1, n)
    z *= 0.5 * rng.uniform() / np.linalg.norm(z)
    p = BubbleParams(n, float(rng.uniform(0.5, 2.0)), z)
    X = p.z + rng.standard_normal((points, n)) * rng.uniform(0.1, 3.0, (points, 1))
    res = {"bubble_pde": float(np.max(np.abs(bubble_pde_residual(p, X))))}
    kp = kv = 0.0
    Xs = X[:100]
    for j in range(n + 1):
        kp = max(kp, float(np.max(np.abs(kernel_pde_residual(j, n, Xs - p.z)))))
        k = kernel_eval(j, p, Xs)
        kv = max(kv, float(np.max(np.abs(kernel_from_bubble(j, p, Xs) - k))) / float(np.max(np.abs(k))))
    res["kernel_pde"] = kp
    res["kernel_vs_bubble"] = kv
    cr = 0.0
    for x in Xs:
        a, b = rng.integers(0, n, size=2)
        cr = max(cr, float(np.max(np.abs(corrector_residual(W, int(a), int(b), x - p.z)))))
    res["corrector_residual"] = cr
    return {"n": n, "t": p.t, "z_norm": float(np.linalg.norm(p.z)), "max_residuals": res,
            "tolerances": BUBBLE_TOLERANCES,
            "passed": all(res[k] <= BUBBLE_TOLERANCES[k] for k in res)}


def run_bubble(cfg: RunConfig, args) -> int:
    report = bubble_report(_weyl(cfg), cfg.seed)
    _emit(cfg, report)
    return EXIT_OK if report["passed"] else EXIT_CHECK


def _load_dirs(path: str, n: int) -> np.ndarray:
    text = Path(path).read_text()
    try:
        dirs = np.asarray(json.loads(text), dtype=float)
    except json.JSONDecodeError:
        dirs = np.loadtxt(io.StringIO(text), ndmin=2)
    dirs = np.atleast_2d(dirs)
    if dirs.shape[1] != n:
        raise ConfigError(f"directions must have {n} components")
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ConfigError("zero direction in --z-dirs")
    return dirs / norms


def run_landscape(cfg: RunConfig, args) -> int:
    from .reduced_energy import ModelData, f_assembled_many
    model = ModelData(cfg.dim, _weyl(cfg), cfg.u0x0)
    ts = _parse_range(args.t_range)
    ss = _parse_range(args.z_range)
    if np.any(ts <= 0):
        raise ConfigError("t values must be positive")
    if np.any(np.abs(ss) >= 1):
        raise ConfigError("z must stay in the unit ball")
    dirs = _load_dirs(args.z_dirs, cfg.dim) if args.z_dirs else np.eye(cfg.dim)[:1]
    rows, pts = [], []
    for t in ts:
        for d, e in enumerate(dirs):
            for s in ss:
                rows.append((t, s, d))
                pts.append(np.concatenate([[t], s * e]))
    vals, _ = f_assembled_many(model, np.array(pts), _budget(cfg, 20_000), cfg.seed)
    if cfg.output == "json":
        _emit(cfg, {"n": cfg.dim, "u0x0": cfg.u0x0, "rows": [
            {"t": t, "s": s, "direction_index": d, "F": v.value, "F_err": v.error}
            for (t, s, d), v in zip(rows, vals)]})
        return EXIT_OK
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "s", "direction-index", "F", "F_err"])
    for (t, s, d), v in zip(rows, vals):
        w.writerow([repr(float(t)), repr(float(s)), d, repr(v.value), repr(v.error)])
    _write(cfg, buf.getvalue())
    return EXIT_OK


def run_saddle(cfg: RunConfig, args) -> int:
    from .reduced_energy import ModelData
    from .saddle_solver import auto_certify, certify_saddle, locate_critical_point
    model = ModelData(cfg.dim, _weyl(cfg), cfg.u0x0)
    spot = _budget(cfg, 0)
    if args.eta is not None and args.eps is not None:
        cert = certify_saddle(model, args.eta, args.eps, seed=cfg.seed, spot_budget=spot)
    else:
        cert = auto_certify(model, eta=args.eta, eps_box=args.eps or 0.5, seed=cfg.seed,
                            spot_budget=spot)
    payload = cert.as_dict()
    if cert.passed:
        payload["critical_point"] = locate_critical_point(model, cert, seed=cfg.seed).as_dict()
    else:
        _log(f"certificate failed: {', '.join(cert.failed_conditions)}")
    _emit(cfg, payload)
    return EXIT_OK if cert.passed else EXIT_CHECK


def run_curvature(cfg: RunConfig, args) -> int:
    from .curvature_lab import expansion_checks
    try:
        eps = tuple(float(e) for e in args.eps.split(","))
    except ValueError:
        raise ConfigError(f"--eps must be comma-separated numbers, got {args.eps!r}")
    if len(eps) < 2 or any(e <= 0 for e in eps):
        raise ConfigError("--eps needs at least two positive values")
    W = _weyl(cfg)
    rng = np.random.default_rng(cfg.seed)
    points = []
    for i in range(args.points):
        d = np.eye(cfg.dim)[0] if i == 0 else rng.standard_normal(cfg.dim)
        x = 0.3 * d / np.linalg.norm(d)
        tables = expansion_checks(W, eps, point=x)
        points.append({"point": x, "tables": [t.as_dict() for t in tables],
                       "passed": all(t.passed for t in tables)})
    ok = all(p["passed"] for p in points)
    _emit(cfg, {"n": cfg.dim, "eps": list(eps), "points": points, "passed": ok})
    return EXIT_OK if ok else EXIT_CHECK


def run_classify(cfg: RunConfig, args) -> int:
    from .pohozaev_regimes import GeometrySpec, classify
    state = "equal_somewhere" if args.u0_vs_threshold == "equal" else args.u0_vs_threshold
    spec = GeometrySpec(cfg.dim, args.lcf, args.weyl_nonzero, state, args.perturbation)
    v = classify(spec)
    _emit(cfg, {"n": cfg.dim, "lcf": args.lcf, "weyl_nonzero": args.weyl_nonzero,
                "u0_vs_threshold": state, "perturbation": args.perturbation, **v.as_dict()},
          text=v.verdict + "\n")
    return EXIT_OK


def run_verify_all(cfg: RunConfig, args) -> int:
    from .verification import BatteryConfig, resolve_tolerances, run_battery
    try:
        tol = resolve_tolerances(cfg.tolerances)
    except KeyError as exc:
        raise ConfigError(exc.args[0])
    bc = BatteryConfig(dim=cfg.dim, seed=cfg.seed, tolerances=tol)
    if cfg.mc_samples is not None:
        bc.mc_samples = cfg.mc_samples
    results = run_battery(bc, log=_log)
    failed = [r.name for r in results if not r.passed]
    payload = {"dim": cfg.dim, "seed": cfg.seed, "passed": not failed, "failed": failed,
               "checks": [r.as_dict() for r in results]}
    text = "".join(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.verifies}\n" for r in results)
    _emit(cfg, payload, text=text)
    if failed:
        _log(f"failed checks: {', '.join(failed)}")
    return EXIT_CHECK if failed else EXIT_OK


COMMANDS = {"constants": run_constants, "weyl": run_weyl, "bubble": run_bubble,
            "landscape": run_landscape, "saddle": run_saddle, "curvature-check": run_curvature,
            "classify": run_classify, "verify-all": run_verify_all}


def build_parser() -> argparse.ArgumentParser:
    # shared flags accepted before or after the subcommand
    common = _Parser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--seed", type=int, default=S, help="RNG seed (default 0)")
    common.add_argument("--mc-samples", type=int, default=S, help="oracle sample budget")
    common.add_argument("--json", action="store_true", default=S, help="emit JSON")
    common.add_argument("--out", default=S, help="write the artifact to this file")
    common.add_argument("--tol", action="append", default=S, metavar="KEY=VALUE",
                        help="tolerance override for verify-all (repeatable)")

    p = _Parser(prog="yamabe-blowup", parents=[common],
                description="Reduced-energy toolkit for sign-changing Yamabe blow-up.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def cmd(name, help_, spec=True):
        q = sub.add_parser(name, parents=[common], help=help_)
        q.add_argument("--dim", type=int, default=11)
        if spec:
            q.add_argument("--spec", help="Weyl-form JSON spec (default: circulant diagonal form)")
        return q

    q = cmd("constants", "exact and float constants of a dimension", spec=False)
    q.add_argument("--exact", action="store_true")

    q = cmd("weyl", "validate, sample or test coercivity of a Weyl form")
    q.add_argument("action", choices=["validate", "sample", "coercivity"])

    q = cmd("bubble", "bubble, kernel and corrector identity battery")
    q.add_argument("action", choices=["check"])

    q = cmd("landscape", "tabulate the reduced energy on a (t, z) grid")
    q.add_argument("--u0", type=float, default=1.0)
    q.add_argument("--t-range", default="0.5:2:4")
    q.add_argument("--z-dirs", help="file with one direction per row (JSON list or whitespace)")
    q.add_argument("--z-range", default="0:0.2:3")

    q = cmd("saddle", "certify the saddle geometry around (t0, 0)")
    q.add_argument("--u0", type=float, default=1.0)
    q.add_argument("--eta", type=float)
    q.add_argument("--eps", type=float)

    q = cmd("curvature-check", "remainder orders of the perturbed metric expansions")
    q.add_argument("--eps", default="1e-2,5e-3,2.5e-3")
    q.add_argument("--points", type=int, default=1)

    q = cmd("classify", "compactness or blow-up verdict for a geometry", spec=False)
    q.add_argument("--lcf", type=_parse_bool, default=False)
    q.add_argument("--weyl-nonzero", type=_parse_bool, default=False)
    q.add_argument("--u0-vs-threshold", choices=["above", "below", "equal", "unknown"],
                   default="unknown")
    q.add_argument("--perturbation", choices=["none", "nonneg", "nonpos", "mixed"],
                   default="none")

    cmd("verify-all", "run the full verification battery", spec=False)
    return p


def make_config(args) -> RunConfig:
    return RunConfig(
        subcommand=args.command,
        dim=args.dim,
        spec=getattr(args, "spec", None),
        u0x0=getattr(args, "u0", 1.0),
        seed=getattr(args, "seed", 0),
        mc_samples=getattr(args, "mc_samples", None),
        output="json" if getattr(args, "json", False) else "text",
        out=getattr(args, "out", None),
        tolerances=_parse_tol(getattr(args, "tol", None)),
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
        if cfg.tolerances and cfg.subcommand != "verify-all":
            raise ConfigError("--tol only applies to verify-all")
        if cfg.out:
            out_dir = Path(cfg.out).resolve().parent
            if not out_dir.is_dir():
                raise OSError(f"output directory {out_dir} does not exist")
        return COMMANDS[cfg.subcommand](cfg, args)
    except ConfigError as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        _log(f"I/O error: {exc}")
        return EXIT_IO
    except (ValueError, KeyError, TypeError) as exc:
        # bad spec contents or values outside a module's domain
        _log(f"config error: {exc}")
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError) as exc:
        _log(f"check failed: {exc}")
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
