"""Command-line front end.

Subcommands: ``bounds``, ``symcheck``, ``classify``, ``simulate``, ``example``
(write a ready-made channel spec) and ``rerun`` (replay a run manifest).
Every result carries a manifest with the full resolved options so that the
run can be reproduced exactly.

Exit codes: 0 success, 2 invalid spec or usage, 3 solver non-convergence,
4 resource cap exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
import time
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .bounds import (
    BoundReport,
    OptimizerOptions,
    cutset_bound,
    degraded_closed_form,
    direct_transmission_bound,
    full_df_bound,
    orthogonal_components_capacity,
    partial_df_bound,
)
from .channel import RelayChannel, example1_channel, marginals, validate
from .errors import AVRCError, ResourceCapError, SpecError, StructureError, ValidationError
from .probability import StateUncertainty
from .simulation import JammerStrategy, build_code, estimate_error, randomize
from .symmetrizability import (
    check_symmetrizable_x1y1,
    check_symmetrizable_x_given_x1,
    classify_capacity,
)

EXIT_OK = 0
EXIT_SPEC = 2
EXIT_SOLVER = 3
EXIT_RESOURCE = 4

SPEC_SUM_TOL = 1e-9
ORDER_TOL = 1e-3

BOUND_KINDS = {
    "cutset": "cutset",
    "pdf": "partial_df",
    "fdf": "full_df",
    "direct": "direct",
    "orth": "orthogonal",
    "closed": "degraded_closed_form",
}
DEFAULT_BOUNDS = "cutset,pdf,fdf,direct"
SIM_FIELDS = ("n", "B", "R_p", "R_pp", "jammer", "trials", "errors", "p_hat", "ci_lo", "ci_hi", "seed")


# --------------------------------------------------------------------------
# Spec files


def _decimal(value: Any, where: str) -> Decimal:
    """Probabilities are decimal strings (integers are accepted as exact values)."""
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise SpecError(f"{where}: probabilities must be decimal strings, got {value!r}")
    try:
        d = Decimal(str(value).strip())
    except InvalidOperation as exc:
        raise SpecError(f"{where}: {value!r} is not a decimal number") from exc
    if not d.is_finite() or d < 0:
        raise SpecError(f"{where}: probabilities must be finite and non-negative, got {value!r}")
    return d


def _decimal_vector(values: Any, where: str) -> list[Decimal]:
    if not isinstance(values, list) or not values:
        raise SpecError(f"{where}: expected a non-empty list")
    return [_decimal(v, f"{where}[{i}]") for i, v in enumerate(values)]


def _sizes(spec: dict) -> tuple[int, int, int, int, int]:
    sizes = spec.get("sizes")
    if not isinstance(sizes, dict):
        raise SpecError("spec needs a 'sizes' object with keys x, x1, s, y, y1")
    try:
        out = tuple(int(sizes[k]) for k in ("x", "x1", "s", "y", "y1"))
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"bad alphabet sizes {sizes!r}") from exc
    if min(out) < 1:
        raise SpecError("alphabet sizes must be positive")
    return out  # type: ignore[return-value]


def _parse_q(desc: Any, ns: int, base: Path | None = None) -> StateUncertainty:
    """``Q`` from a spec entry (dict) or a ``--q`` flag value (string)."""
    if isinstance(desc, str):
        if desc == "simplex":
            return StateUncertainty.simplex(ns)
        if desc.startswith("list:"):
            path = Path(desc[5:])
            if base is not None and not path.is_absolute() and not path.exists():
                path = base / path
            try:
                points = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise SpecError(f"cannot read state list {path}: {exc}") from exc
            return _parse_q({"kind": "list", "points": points}, ns)
        if desc.startswith("box:"):
            lo, hi = [], []
            for i, item in enumerate(desc[4:].split(",")):
                parts = item.split(":")
                if len(parts) != 2:
                    raise SpecError(f"box entry {item!r} must be LO:HI")
                lo.append(float(_decimal(parts[0], f"box[{i}]")))
                hi.append(float(_decimal(parts[1], f"box[{i}]")))
            if len(lo) != ns:
                raise SpecError(f"box needs {ns} intervals, got {len(lo)}")
            return StateUncertainty.box(lo, hi)
        raise SpecError(f"unknown Q description {desc!r}; use simplex, list:PATH or box:LO:HI,...")
    if not isinstance(desc, dict) or "kind" not in desc:
        raise SpecError("Q must be an object with a 'kind'")
    kind = desc["kind"]
    if kind == "simplex":
        return StateUncertainty.simplex(ns)
    if kind == "list":
        pts = desc.get("points")
        if not isinstance(pts, list) or not pts:
            raise SpecError("Q list needs non-empty 'points'")
        rows = []
        for i, p in enumerate(pts):
            row = _decimal_vector(p, f"Q.points[{i}]")
            if len(row) != ns:
                raise SpecError(f"Q.points[{i}] must have {ns} entries")
            if abs(sum(row) - 1) > Decimal(str(SPEC_SUM_TOL)):
                raise SpecError(f"Q.points[{i}] sums to {sum(row)}, not 1")
            rows.append([float(v) for v in row])
        return StateUncertainty.finite(rows)
    if kind == "box":
        lo = [float(v) for v in _decimal_vector(desc.get("lower"), "Q.lower")]
        hi = [float(v) for v in _decimal_vector(desc.get("upper"), "Q.upper")]
        if len(lo) != ns or len(hi) != ns:
            raise SpecError(f"Q box bounds need {ns} entries")
        return StateUncertainty.box(lo, hi)
    raise SpecError(f"unknown Q kind {kind!r}")


def parse_spec(spec: dict, base: Path | None = None) -> tuple[RelayChannel, StateUncertainty, tuple[int, int] | None]:
    """Channel, ``Q`` (simplex when absent) and optional orthogonal split from a spec dict."""
    if not isinstance(spec, dict):
        raise SpecError("a channel spec must be a JSON object")
    nx, nx1, ns, ny, ny1 = _sizes(spec)
    shape = (nx, nx1, ns, ny, ny1)
    exact: dict[tuple[int, ...], Decimal] = {}
    if "kernel" in spec and "sparse" in spec:
        raise SpecError("give either 'kernel' or 'sparse', not both")
    if "kernel" in spec:
        arr = spec["kernel"]
        for idx in np.ndindex(shape):
            node = arr
            try:
                for i in idx:
                    node = node[i]
            except (IndexError, TypeError, KeyError) as exc:
                raise SpecError(f"kernel is missing entry [x,x1,s,y,y1]={list(idx)}") from exc
            d = _decimal(node, f"kernel{list(idx)}")
            if d:
                exact[idx] = d
        try:
            probe_shape = np.asarray(arr, dtype=object).shape
        except ValueError:
            probe_shape = ()
        if probe_shape != shape:
            raise SpecError(f"kernel must have shape {list(shape)} ([x][x1][s][y][y1]), got {list(probe_shape)}")
    elif "sparse" in spec:
        entries = spec["sparse"]
        if not isinstance(entries, list):
            raise SpecError("'sparse' must be a list of [y, y1, x, x1, s, prob] entries")
        for k, entry in enumerate(entries):
            if not isinstance(entry, list) or len(entry) != 6:
                raise SpecError(f"sparse[{k}] must be [y, y1, x, x1, s, prob]")
            y, y1, x, x1, s = entry[:5]
            idx = (x, x1, s, y, y1)
            if not all(isinstance(v, int) and not isinstance(v, bool) for v in idx):
                raise SpecError(f"sparse[{k}]: indices must be integers")
            if not all(0 <= v < m for v, m in zip(idx, shape)):
                raise SpecError(f"sparse[{k}]: index out of range for sizes {list(shape)}")
            if idx in exact:
                raise SpecError(f"sparse[{k}]: duplicate entry for {list(idx)}")
            exact[idx] = _decimal(entry[5], f"sparse[{k}]")
    else:
        raise SpecError("spec needs a 'kernel' (nested arrays) or 'sparse' (triplet list)")
    sums: dict[tuple[int, ...], Decimal] = {}
    for idx, d in exact.items():
        sums[idx[:3]] = sums.get(idx[:3], Decimal(0)) + d
    for cond in np.ndindex(shape[:3]):
        total = sums.get(cond, Decimal(0))
        if abs(total - 1) > Decimal(str(SPEC_SUM_TOL)):
            raise SpecError(f"W(.|x={cond[0]}, x1={cond[1]}, s={cond[2]}) sums to {total}, not 1")
    W = np.zeros(shape)
    for idx, d in exact.items():
        W[idx] = float(d)
    channel = RelayChannel(W)
    validate(channel, tol=SPEC_SUM_TOL)
    Q = _parse_q(spec["Q"], ns, base) if "Q" in spec else StateUncertainty.simplex(ns)
    split = None
    if spec.get("orthogonal_split") is not None:
        raw = spec["orthogonal_split"]
        if not isinstance(raw, list) or len(raw) != 2 or not all(isinstance(v, int) for v in raw):
            raise SpecError("orthogonal_split must be [|X'|, |X''|]")
        if raw[0] * raw[1] != nx:
            raise SpecError(f"orthogonal_split {raw} does not factor |X| = {nx}")
        split = (raw[0], raw[1])
    return channel, Q, split


def load_spec(path: str) -> tuple[RelayChannel, StateUncertainty, tuple[int, int] | None]:
    p = Path(path)
    try:
        spec = json.loads(p.read_text())
    except OSError as exc:
        raise SpecError(f"cannot read spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec {path} is not valid JSON: {exc}") from exc
    return parse_spec(spec, p.parent)


def _fmt(v: float) -> str:
    return format(Decimal(repr(float(v))).normalize(), "f") if v else "0"


def channel_to_spec(channel: RelayChannel, Q: StateUncertainty | None = None, split=None, sparse: bool = False) -> dict:
    """Serialise a channel as a spec dict with decimal-string probabilities."""
    W = channel.kernel
    out: dict[str, Any] = {"sizes": channel.sizes}
    if sparse:
        out["sparse"] = [
            [int(y), int(y1), int(x), int(x1), int(s), _fmt(W[x, x1, s, y, y1])]
            for x, x1, s, y, y1 in zip(*np.nonzero(W))
        ]
    else:
        out["kernel"] = np.vectorize(_fmt, otypes=[object])(W).tolist()
    if Q is not None:
        if Q.kind == "simplex":
            out["Q"] = {"kind": "simplex"}
        elif Q.kind == "list":
            out["Q"] = {"kind": "list", "points": [[_fmt(v) for v in row] for row in Q.points]}
        else:
            out["Q"] = {"kind": "box", "lower": [_fmt(v) for v in Q.lower], "upper": [_fmt(v) for v in Q.upper]}
    if split is not None:
        out["orthogonal_split"] = list(split)
    return out


def _example_channel(name: str, theta: float) -> tuple[RelayChannel, Any]:
    if name == "example1":
        return example1_channel(theta), None
    if name == "bitpipe":
        # Noiseless bit pipes X -> Y and X -> Y1, no state dependence.
        return RelayChannel.from_function(2, 1, 1, 2, 2, lambda y, y1, x, x1, s: float(y == x and y1 == x)), None
    if name == "xor":
        # Y = Y1 = X xor S with a binary state.
        return RelayChannel.from_function(2, 1, 2, 2, 2, lambda y, y1, x, x1, s: float(y == x ^ s and y1 == x ^ s)), None
    if name == "orthogonal":
        # X = (X', X''): X' -> Y noiselessly, X'' -> Y1 through a BSC(theta) flipped by the state.
        def law(y, y1, x, x1, s):
            xp, xpp = divmod(x, 2)
            flip = theta if s == 0 else 1 - theta
            return float(y == xp) * (1 - flip if y1 == xpp else flip)

        return RelayChannel.from_function(4, 2, 2, 2, 2, law), [2, 2]
    raise SpecError(f"unknown example {name!r}")


# --------------------------------------------------------------------------
# Output helpers


def dumps(obj: Any) -> str:
    """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _to_csv(rows: list[dict], fields: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _jsonable(row.get(k)) for k in fields})
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _manifest(args: argparse.Namespace, argv: Sequence[str], started: float) -> dict:
    opts = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    return {
        "command": args.command,
        "argv": list(argv),
        "options": opts,
        "seeds": {"seed": getattr(args, "seed", None), "opt_seed": getattr(args, "opt_seed", None)},
        "version": __version__,
        "wall_clock_s": round(time.perf_counter() - started, 3),
    }


def _resolve_q(args: argparse.Namespace, Q: StateUncertainty, ns: int) -> StateUncertainty:
    return _parse_q(args.q, ns) if args.q else Q


# --------------------------------------------------------------------------
# Commands


def _optimizer_options(args: argparse.Namespace) -> OptimizerOptions:
    return OptimizerOptions(
        grid_resolution=args.grid,
        multistart_count=args.multistart,
        tolerance=args.tolerance,
        u_cardinality=args.u_card,
        seed=args.opt_seed,
    )


def _ordering(values: dict[str, float]) -> dict:
    checks = {}
    pdf = values.get("partial_df")
    if pdf is not None:
        for low in ("direct", "full_df"):
            if low in values:
                checks[f"{low}<=partial_df"] = values[low] <= pdf + ORDER_TOL
        if "cutset" in values:
            checks["partial_df<=cutset"] = pdf <= values["cutset"] + ORDER_TOL
    elif "cutset" in values:
        for low in ("direct", "full_df"):
            if low in values:
                checks[f"{low}<=cutset"] = values[low] <= values["cutset"] + ORDER_TOL
    return {"tolerance": ORDER_TOL, "checks": checks, "holds": all(checks.values())}


def cmd_bounds(args: argparse.Namespace) -> tuple[dict, list[dict], int]:
    channel, Q, split = load_spec(args.spec)
    Q = _resolve_q(args, Q, channel.ns)
    opts = _optimizer_options(args)
    kinds = [k.strip() for k in args.bounds.split(",") if k.strip()]
    for k in kinds:
        if k not in BOUND_KINDS:
            raise SpecError(f"unknown bound kind {k!r}; choose from {sorted(BOUND_KINDS)}")
    reports: dict[str, BoundReport] = {}
    for k in kinds:
        if k == "cutset":
            r = cutset_bound(channel, Q, opts)
        elif k == "pdf":
            r = partial_df_bound(channel, Q, opts)
        elif k == "fdf":
            r = full_df_bound(channel, Q, opts)
        elif k == "direct":
            r = direct_transmission_bound(channel, Q, opts)
        elif k == "orth":
            if split is None:
                raise SpecError("the orthogonal bound needs 'orthogonal_split' in the spec")
            r = orthogonal_components_capacity(channel, split, opts, Q)
        else:
            r = degraded_closed_form(channel, opts, Q)
        reports[r.bound_kind] = r
    values = {k: float(r.value) for k, r in reports.items()}
    result = {
        "reports": {k: r.as_dict() for k, r in reports.items()},
        "ordering": _ordering(values),
    }
    rows = [
        {
            "bound_kind": k,
            "value": r.value,
            "converged": r.converged,
            "residual": r.residual,
            "worst_q": " ".join(f"{v:.6g}" for v in np.ravel(r.worst_q)),
        }
        for k, r in reports.items()
    ]
    code = EXIT_OK if all(r.converged for r in reports.values()) else EXIT_SOLVER
    return result, rows, code


def cmd_symcheck(args: argparse.Namespace) -> tuple[dict, list[dict], int]:
    channel, _, _ = load_spec(args.spec)
    which = [w.strip() for w in args.which.split(",") if w.strip()]
    verdicts: dict[str, dict] = {}
    for w in which:
        if w == "x_given_x1":
            verdicts[w] = check_symmetrizable_x_given_x1(channel, args.tol).as_dict()
        elif w == "x1y1":
            try:
                verdicts[w] = check_symmetrizable_x1y1(channel, args.tol).as_dict()
            except StructureError as exc:
                verdicts[w] = {"kind": "x1y1", "applicable": False, "reason": str(exc)}
        elif w == "marginals":
            w_y1, w_y = marginals(channel)
            verdicts["y_marginal"] = check_symmetrizable_x_given_x1(w_y, args.tol).as_dict()
            verdicts["y1_marginal"] = check_symmetrizable_x_given_x1(w_y1, args.tol).as_dict()
        else:
            raise SpecError(f"unknown symmetrizability test {w!r}")
    rows = [
        {"test": k, "symmetrizable": v.get("symmetrizable"), "max_violation": v.get("max_violation")}
        for k, v in verdicts.items()
    ]
    return {"verdicts": verdicts}, rows, EXIT_OK


def cmd_classify(args: argparse.Namespace) -> tuple[dict, list[dict], int]:
    channel, _, _ = load_spec(args.spec)
    c = classify_capacity(channel, args.tol)
    return {"classification": c.as_dict()}, [{"verdict": c.verdict, "reasons": "; ".join(c.reasons)}], EXIT_OK


def _input_law(args: argparse.Namespace, channel: RelayChannel, split) -> np.ndarray:
    if args.input_law:
        try:
            raw = json.loads(Path(args.input_law).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read input law {args.input_law}: {exc}") from exc
        P = np.asarray(np.vectorize(lambda v: float(_decimal(v, "input law")), otypes=[float])(np.asarray(raw, dtype=object)))
        return P
    p = np.full((channel.nx, channel.nx1), 1.0 / (channel.nx * channel.nx1))
    if args.u == "empty":
        return p[None]
    if args.u == "x":
        P = np.zeros((channel.nx, channel.nx, channel.nx1))
        P[np.arange(channel.nx), np.arange(channel.nx)] = p
        return P
    if split is None:
        raise SpecError("U = X'' needs 'orthogonal_split' in the spec")
    n2 = split[1]
    P = np.zeros((n2, channel.nx, channel.nx1))
    for x in range(channel.nx):
        P[x % n2, x] = p[x]
    return P


def _jammers(args: argparse.Namespace, channel: RelayChannel) -> list[JammerStrategy]:
    spec = args.jammer
    if spec == "iid:uniform":
        return [JammerStrategy.iid(np.full(channel.ns, 1.0 / channel.ns))]
    if spec.startswith("iid:"):
        q = [float(_decimal(v, "jammer pmf")) for v in spec[4:].split(",")]
        return [JammerStrategy.iid(q)]
    if spec.startswith("sweep:"):
        step = float(_decimal(spec[6:], "sweep step"))
        if channel.ns != 2 or not 0 < step <= 1:
            raise SpecError("sweep:STEP needs a binary state and 0 < STEP <= 1")
        grid = np.round(np.arange(0.0, 1.0 + step / 2, step), 12)
        return [JammerStrategy.iid([1 - a, a]) for a in grid if a <= 1.0]
    if spec.startswith("fixed:"):
        try:
            seq = json.loads(Path(spec[6:]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read state sequence: {exc}") from exc
        return [JammerStrategy.fixed(seq)]
    if spec == "attack_x":
        v = check_symmetrizable_x_given_x1(channel, args.tol)
        if not v.symmetrizable:
            raise StructureError("attack_x needs a channel that is symmetrizable-X|X1")
        return [JammerStrategy.attack_x(np.asarray(v.witness))]
    if spec == "attack_x1y1":
        v = check_symmetrizable_x1y1(channel, args.tol)
        if not v.symmetrizable:
            raise StructureError("attack_x1y1 needs a channel that is symmetrizable-X1xY1")
        return [JammerStrategy.attack_x1y1(np.asarray(v.witness))]
    raise SpecError(f"unknown jammer {spec!r}; use iid:Q0,Q1,..., sweep:STEP, fixed:PATH, attack_x or attack_x1y1")


def _float_list(text: str, what: str) -> list[float]:
    return [float(_decimal(v, what)) for v in text.split(",") if v.strip()]


def cmd_simulate(args: argparse.Namespace) -> tuple[dict, list[dict], int]:
    channel, Q, split = load_spec(args.spec)
    Q = _resolve_q(args, Q, channel.ns)
    P = _input_law(args, channel, split)
    jammers = _jammers(args, channel)
    ns_ = [int(v) for v in _float_list(args.n, "n")]
    rows = []
    for n, rp, rpp in itertools.product(ns_, _float_list(args.rp, "rp"), _float_list(args.rpp, "rpp")):
        code = build_code(channel, P, n, args.blocks, rp, rpp, delta=args.delta, Q=Q, seed=args.seed)
        used = randomize(code, args.seed) if args.randomize else code
        for jam in jammers:
            est = estimate_error(channel, used, jam, args.trials, seed=args.seed, threads=args.threads)
            rows.append(
                {
                    "n": n,
                    "B": args.blocks,
                    "R_p": code.rate_p,
                    "R_pp": code.rate_pp,
                    "jammer": jam.describe(),
                    "trials": est.trials,
                    "errors": est.errors,
                    "p_hat": est.p_hat,
                    "ci_lo": est.wilson_interval[0],
                    "ci_hi": est.wilson_interval[1],
                    "seed": args.seed,
                    "relay_errors": est.relay_errors,
                    "block_errors_p": list(est.block_errors_p),
                    "block_errors_pp": list(est.block_errors_pp),
                }
            )
    return {"rows": rows}, rows, EXIT_OK


def cmd_example(args: argparse.Namespace) -> tuple[dict, list[dict], int]:
    channel, split = _example_channel(args.name, args.theta)
    spec = channel_to_spec(channel, StateUncertainty.simplex(channel.ns), split, sparse=args.sparse)
    return spec, [], EXIT_OK


# --------------------------------------------------------------------------
# Parser and dispatch


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from exc
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _nonneg_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from exc
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avrc", description="Arbitrarily varying relay channel toolkit")
    parser.add_argument("--version", action="version", version=f"avrc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, spec: bool = True) -> None:
        if spec:
            p.add_argument("--spec", required=True, help="channel spec JSON file")
        p.add_argument("--out", help="write the result here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=_positive_int, default=1)

    p = sub.add_parser("bounds", help="compute rate bounds")
    common(p)
    p.add_argument("--q", help="override Q: simplex | list:PATH | box:LO:HI,...")
    p.add_argument("--bounds", default=DEFAULT_BOUNDS, help=f"comma list from {sorted(BOUND_KINDS)}")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--multistart", type=_positive_int, default=8)
    p.add_argument("--grid", type=int, default=0, help="lattice resolution on Q (0 = automatic)")
    p.add_argument("--u-card", type=_positive_int, default=None, dest="u_card")
    p.add_argument("--opt-seed", type=int, default=0, dest="opt_seed")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("symcheck", help="symmetrizability tests with witnesses")
    common(p)
    p.add_argument("--which", default="x_given_x1,x1y1,marginals")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_symcheck)

    p = sub.add_parser("classify", help="deterministic-code capacity classification")
    common(p)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", help="Monte Carlo error probability of the block Markov code")
    common(p)
    p.add_argument("--q", help="override Q used by the decoders")
    p.add_argument("--n", default="100", help="block length(s), comma separated")
    p.add_argument("--blocks", type=_positive_int, default=2)
    p.add_argument("--rp", default="0", help="relay-decoded rate(s) R', comma separated")
    p.add_argument("--rpp", default="0", help="direct rate(s) R'', comma separated")
    p.add_argument("--delta", type=_nonneg_float, default=0.05)
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.add_argument("--jammer", default="iid:uniform", help="iid:Q,... | sweep:STEP | fixed:PATH | attack_x | attack_x1y1")
    p.add_argument("--u", choices=("x", "empty", "x_pp"), default="x", help="auxiliary for uniform inputs")
    p.add_argument("--input-law", dest="input_law", help="JSON p(u, x, x1) overriding --u")
    p.add_argument("--randomize", action="store_true", help="use per-trial random permutations")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("example", help="write a ready-made channel spec")
    common(p, spec=False)
    p.add_argument("name", choices=("example1", "bitpipe", "xor", "orthogonal"))
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--sparse", action="store_true")
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("rerun", help="replay the command recorded in a result manifest")
    p.add_argument("manifest", help="JSON result file (or bare manifest) written by a previous run")
    p.add_argument("--out", help="write the result here instead of stdout")
    p.set_defaults(func=None, command="rerun")
    return parser


def _replay_argv(path: str) -> list[str]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read manifest {path}: {exc}") from exc
    manifest = data.get("manifest", data) if isinstance(data, dict) else None
    if not isinstance(manifest, dict) or not isinstance(manifest.get("argv"), list):
        raise SpecError(f"{path} holds no run manifest")
    return [str(a) for a in manifest["argv"]]


def run(argv: Sequence[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(list(argv))
    try:
        if args.command == "rerun":
            replay = _strip_out(_replay_argv(args.manifest))
            if args.out:
                replay += ["--out", args.out]
            return run(replay)
        started = time.perf_counter()
        result, rows, code = args.func(args)
        if args.command == "example":
            text = dumps(result)
        elif args.format == "csv":
            fields = SIM_FIELDS if args.command == "simulate" else (list(rows[0]) if rows else [])
            text = _to_csv(rows, fields)
        else:
            result = dict(result)
            result["manifest"] = _manifest(args, argv, started)
            text = dumps(result)
        _emit(text, args.out)
        return code
    except ResourceCapError as exc:
        print(f"avrc: resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValidationError, StructureError) as exc:
        print(f"avrc: invalid input: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except AVRCError as exc:
        print(f"avrc: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def _strip_out(argv: list[str]) -> list[str]:
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        out.append(a)
    return out


def main(argv: Sequence[str] | None = None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
