"""Command-line front end: ``bltk <command> --input FILE --output FILE``.

Exit codes: 0 pass / finite, 2 negative verdict, 3 unknown or budget
exhausted, 1 error.  Reports are deterministic JSON (sorted keys, full
config echo, no timestamps); experiments also write a CSV sidecar.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import finiteness, gaussian
from .datum import BLDatum, InvalidDatumError, SubspaceDatum, dual, validate
from .linalg import EXACT, FLOAT, Matrix, Subspace

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE, EXIT_UNKNOWN = 0, 1, 2, 3
COMMANDS = ("validate", "finiteness", "constant", "transversality", "duality", "knapp", "convolve", "kakeya")


class SchemaError(ValueError):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bltk", description="Brascamp–Lieb data toolkit")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--input", "-i", required=True, help="JSON input file")
    ap.add_argument("--output", "-o", help="report path (default: stdout)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tol", type=float, default=1e-8)
    ap.add_argument("--budget-depth", type=int, default=8)
    ap.add_argument("--budget-trials", type=int, default=1000)
    ap.add_argument("--mode", choices=(EXACT, FLOAT), default=None, help="scalar mode for matrix literals")
    ap.add_argument("--delta-list", default=None, help="comma-separated scales, e.g. 2^-4,2^-5 or 0.1,0.05")
    ap.add_argument("--grid", default=None, help="sample count(s) or grid resolution, comma-separated")
    return ap


def parse_deltas(text: str | None) -> list[float] | None:
    if text is None:
        return None
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok.startswith("2^"):
            out.append(2.0 ** float(tok[2:]))
        else:
            out.append(float(Fraction(tok)))
    return out


def parse_grid(text: str | None) -> list[int] | None:
    return None if text is None else [int(t) for t in text.split(",")]


def _load(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _field(obj: dict, name: str):
    if not isinstance(obj, dict) or name not in obj:
        raise SchemaError(f"missing field '{name}'")
    return obj[name]


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Fraction):
        return str(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _clean(x):
    """Replace non-finite floats by null so the output is strict JSON."""
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def dumps(report: dict) -> str:
    return json.dumps(_clean(json.loads(json.dumps(report, default=_json_default))), sort_keys=True, indent=2) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# command handlers return (exit code, result dict, csv text or None)

def _datum(data, args) -> BLDatum:
    if args.mode:
        data = dict(data, mode=args.mode)
    return BLDatum.from_json(data)


def _budget(args) -> finiteness.SearchBudget:
    return finiteness.SearchBudget(lattice_depth=args.budget_depth, random_trials=args.budget_trials, seed=args.seed)


def cmd_validate(data, args):
    d = validate(_datum(data, args))
    from .datum import scaling_defect

    return EXIT_OK, {"valid": True, "scaling_defect": str(scaling_defect(d)), "datum": d.to_json()}, None


def cmd_finiteness(data, args):
    v = finiteness.decide_finiteness(_datum(data, args), _budget(args))
    code = {finiteness.FINITE: EXIT_OK, finiteness.INFINITE: EXIT_NEGATIVE}.get(v.status, EXIT_UNKNOWN)
    return code, v.to_json(), None


def cmd_constant(data, args):
    d = validate(_datum(data, args))
    est = gaussian.compute_constant(d, tol=args.tol, seed=args.seed)
    code = {gaussian.CONVERGED: EXIT_OK, gaussian.DIVERGING: EXIT_NEGATIVE}.get(est.status, EXIT_UNKNOWN)
    return code, est.to_json(), None


def cmd_duality(data, args):
    sd = SubspaceDatum.from_json(data, args.mode)
    out = {"dual": dual(sd).to_json()}
    try:
        out["ratio"] = gaussian.duality_ratio(sd, tol=min(args.tol, 1e-10))
    except gaussian.DualityUndefinedError as exc:
        out["error"] = str(exc)
        return EXIT_NEGATIVE, out, None
    return EXIT_OK, out, None


def _collection(obj):
    from .manifold import ManifoldCollection

    return ManifoldCollection.from_json(obj)


def cmd_transversality(data, args):
    from .manifold import transversality_scan

    mc = _collection(data)
    grid = parse_grid(args.grid) or [5]
    rep = transversality_scan(mc, grid[0] if len(grid) == 1 else grid, _budget(args))
    return (EXIT_OK if rep.holds else EXIT_NEGATIVE), rep.to_json(), None


def _subspace(obj, n: int, mode) -> Subspace:
    M = Matrix.from_json(obj, mode)
    if M.rows != n:
        raise SchemaError(f"field 'V': expected {n} rows, got {M.rows}")
    return Subspace(M)


def cmd_knapp(data, args):
    from .experiments.extension import KnappConfig, knapp_experiment

    mc = _collection(_field(data, "collection"))
    V = _subspace(_field(data, "V"), mc.n, args.mode)
    kw = {"c": float(data.get("c", 0.02)), "seed": args.seed}
    deltas = parse_deltas(args.delta_list) or data.get("delta_list")
    if deltas:
        kw["delta_list"] = tuple(float(x) for x in deltas)
    grid = parse_grid(args.grid)
    if grid:
        kw["quadrature"] = grid[0]
    rep = knapp_experiment(mc, KnappConfig(V, **kw))
    return (EXIT_OK if rep.passed else EXIT_NEGATIVE), rep.to_json(), rep.to_csv()


def cmd_convolve(data, args):
    from .experiments.convolution import MCConfig, NonTransversalError, convolution_density, verify_C

    mc = _collection(_field(data, "collection"))
    s = data.get("sampler", {})
    grid = parse_grid(args.grid)
    sampler = MCConfig(
        points=int(grid[0]) if grid else int(s.get("points", 2**11)),
        replicates=int(s.get("replicates", 8)),
        eps0=float(s.get("eps0", 0.02)),
        levels=int(s.get("levels", 4)),
        seed=args.seed,
    )
    try:
        if "points" in data:
            ests = [convolution_density(mc, a, None, sampler).to_json() for a in data["points"]]
            return EXIT_OK, {"estimates": ests, "points": data["points"]}, None
        rep = verify_C(mc, int(data.get("trials", 8)), args.seed, sampler)
    except NonTransversalError as exc:
        return EXIT_NEGATIVE, {"error": str(exc)}, None
    return (EXIT_OK if rep.passed else EXIT_NEGATIVE), rep.to_json(), rep.to_csv()


def cmd_kakeya(data, args):
    from .experiments import kakeya

    p = _field(data, "exponents")
    grid = parse_grid(args.grid)
    resolution = grid[0] if grid else int(data.get("resolution", 4))
    name = _field(data, "configuration")
    if name not in kakeya.PLANAR_CONFIGURATIONS:
        raise SchemaError(f"field 'configuration': unknown value {name!r}")
    builder = kakeya.PLANAR_CONFIGURATIONS[name]
    count = int(data.get("count", 0)) or None
    make = (lambda dl, rng: builder(dl, rng, count)) if count else builder
    deltas = parse_deltas(args.delta_list) or data.get("delta_list") or [2.0**-k for k in range(3, 8)]
    rep = kakeya.kakeya_sweep(make, p, deltas, resolution, args.seed, label=f"kakeya:{name}")
    return (EXIT_OK if rep.passed else EXIT_NEGATIVE), rep.to_json(), rep.to_csv()


HANDLERS = {
    "validate": cmd_validate,
    "finiteness": cmd_finiteness,
    "constant": cmd_constant,
    "transversality": cmd_transversality,
    "duality": cmd_duality,
    "knapp": cmd_knapp,
    "convolve": cmd_convolve,
    "kakeya": cmd_kakeya,
}

EXIT_STATUS = {EXIT_OK: "pass", EXIT_NEGATIVE: "negative", EXIT_UNKNOWN: "unknown", EXIT_ERROR: "error"}


def run(args: argparse.Namespace) -> int:
    config = {
        "command": args.command,
        "input": os.path.basename(args.input),
        "seed": args.seed,
        "tol": args.tol,
        "budget_depth": args.budget_depth,
        "budget_trials": args.budget_trials,
        "mode": args.mode,
        "delta_list": args.delta_list,
        "grid": args.grid,
    }
    csv_text = None
    try:
        data = _load(args.input)
        config["input_data"] = data
        code, result, csv_text = HANDLERS[args.command](data, args)
    except (SchemaError, InvalidDatumError, ValueError, KeyError, TypeError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else f"missing field {exc}"
        print(f"bltk {args.command}: {msg}", file=sys.stderr)
        code, result = EXIT_ERROR, {"error": msg}
    report = {"config": config, "result": result, "status": EXIT_STATUS[code], "exit_code": code}
    text = dumps(report)
    if args.output:
        out = Path(args.output)
        write_atomic(out, text)
        if csv_text is not None:
            write_atomic(out.with_suffix(".csv"), csv_text)
    else:
        sys.stdout.write(text)
    return code


def main(argv=None) -> int:
    return run(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
