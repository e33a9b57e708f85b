"""Command-line front end: sweeps, cached CSV/JSON emission and the invariant suite."""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import __version__
from .errors import PTBoxError

TOLERANCES = {
    "bisect_tol": 1e-10,
    "accept_tol": 1e-8,
    "grid_step": 0.005,
    "boundary_tol": 1e-3,
    "lattice_eps": 1e-8,
}


# --- formatting ---------------------------------------------------------------------------------


def fmt(v) -> str:
    """Fixed 12-significant-digit rendering used in every data file."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if v == 0:
            return "0"
        return format(v, ".12g")
    return str(v)


def render_csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(columns)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def render_json(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    rows = list(rows)
    data = {c: [_jsonable(r[i]) for r in rows] for i, c in enumerate(columns)}
    return json.dumps(data, indent=2, sort_keys=False) + "\n"


def _jsonable(v):
    if isinstance(v, float):
        return float(fmt(v)) if math.isfinite(v) else fmt(v)
    return v


def parse_grid(text: str) -> list[float]:
    """Comma-separated values, each either a number or an inclusive ``start:stop:step`` grid."""
    out: list[float] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = part.split(":")
            if len(bits) != 3:
                raise argparse.ArgumentTypeError(f"grid must be a:b:s, got {part!r}")
            a, b, s = (float(x) for x in bits)
            if not s > 0 or b < a:
                raise argparse.ArgumentTypeError(f"grid needs step > 0 and stop >= start, got {part!r}")
            n = int(math.floor((b - a) / s + 1e-9))
            out.extend(round(a + i * s, 12) for i in range(n + 1))
        else:
            out.append(float(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def parse_int_list(text: str) -> list[int]:
    vals = parse_grid(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


# --- cache and manifest -------------------------------------------------------------------------


def cache_dir() -> Path:
    return Path(os.environ.get("PTBOX_CACHE_DIR") or Path.home() / ".cache" / "ptbox")


def cache_key(command: str, params: dict) -> str:
    blob = json.dumps({"command": command, "params": params, "version": __version__}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cache_load(key: str) -> dict | None:
    path = cache_dir() / f"{key}.json"
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError):
        return None


def cache_store(key: str, payload: dict) -> None:
    try:
        _atomic_write(cache_dir() / f"{key}.json", json.dumps(payload, sort_keys=True))
    except OSError:
        pass


def _canon(params: dict) -> dict:
    """Parameter map with every numeric value as a decimal string."""
    out = {}
    for k, v in sorted(params.items()):
        if isinstance(v, (list, tuple)):
            out[k] = [fmt(x) for x in v]
        elif isinstance(v, (bool, int, float)):
            out[k] = fmt(v)
        elif v is None:
            out[k] = ""
        else:
            out[k] = str(v)
    return out


def emit(args, command: str, params: dict, compute: Callable[[], dict]) -> dict:
    """Run ``compute`` (or replay it from cache), write its files and the manifest.

    ``compute`` returns {"tables": {stem: (columns, rows)}, "extra": {name: json}, "meta": {...}}.
    """
    canon = _canon(params)
    key = cache_key(command, {**canon, "format": args.format})
    payload = None if args.no_cache else cache_load(key)
    if payload is None:
        result = compute()
        files = {}
        for stem, (cols, rows) in result.get("tables", {}).items():
            if args.format == "json":
                files[f"{stem}.json"] = render_json(cols, rows)
            else:
                files[f"{stem}.csv"] = render_csv(cols, rows)
        for name, obj in result.get("extra", {}).items():
            files[name] = json.dumps(obj, indent=2, sort_keys=True) + "\n"
        payload = {"files": files, "meta": result.get("meta", {})}
        if not args.no_cache:
            cache_store(key, payload)
    out = Path(args.out)
    written = []
    for name, text in payload["files"].items():
        _atomic_write(out / name, text)
        written.append(str(out / name))
    manifest = {
        "command": command,
        "parameters": canon,
        "tolerances": {k: fmt(v) for k, v in TOLERANCES.items()},
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "outputs": written,
        "tool_version": __version__,
        **payload["meta"],
    }
    _atomic_write(out / f"{command}.manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return payload


def _pmap(fn, items, workers: int):
    items = list(items)
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# --- subcommands --------------------------------------------------------------------------------


def cmd_spectrum(args) -> int:
    from .continuum import ContinuumPotential, find_real_spectrum

    params = {"z": args.z, "xi": args.xi, "p": args.p, "alpha_max": args.alpha_max,
              "grid_step": args.grid_step, "accept_tol": args.accept_tol}

    def compute():
        pot = ContinuumPotential(args.z, args.xi, args.p)
        spec = find_real_spectrum(pot, args.alpha_max, args.grid_step, args.accept_tol, warn=False)
        rows = [(i + 1, w.alpha, w.beta, float(e), float(r))
                for i, (w, e, r) in enumerate(zip(spec.levels, spec.energies, spec.residuals))]
        return {"tables": {"spectrum": (["n", "alpha", "beta", "energy", "residual"], rows)}}

    emit(args, "spectrum", params, compute)
    return 0


def _xi_job(job):
    from .phase import xi_threshold

    p, tol = job
    r = xi_threshold(p, tol)
    return (p, r.strength_c, r.breaking_index, r.pattern)


def cmd_xi_threshold(args) -> int:
    params = {"p_list": args.p_list, "tol": args.tol}

    def compute():
        rows = _pmap(_xi_job, [(p, args.tol) for p in args.p_list], args.parallel)
        return {"tables": {"xi_threshold": (["p", "xi_c", "n_break", "pattern"], rows)}}

    emit(args, "xi-threshold", params, compute)
    return 0


def cmd_phase_boundary(args) -> int:
    from .phase import trace_boundary

    params = {"p": args.p, "xi_grid": args.xi_grid, "tol": args.tol, "anchor_search": args.anchor_search}

    def compute():
        b = trace_boundary(args.p, args.xi_grid, args.tol, anchor_search=args.anchor_search, workers=args.parallel)
        rows = [(b.p, s.xi, s.Zc_minus, s.Zc_plus, s.n_minus, s.n_plus) for s in b.samples]
        meta = {"truncated": b.truncated, "truncated_at": fmt(b.truncated_at)}
        cols = ["p", "xi", "Zc_minus", "Zc_plus", "n_minus", "n_plus"]
        return {"tables": {"phase_boundary": (cols, rows)}, "meta": meta}

    payload = emit(args, "phase-boundary", params, compute)
    if payload["meta"].get("truncated"):
        print(f"warning: boundary truncated at xi = {payload['meta']['truncated_at']} (start point broken)",
              file=sys.stderr)
    return 0


def _div_job(job):
    from .phase import xi_threshold

    p, tol = job
    return xi_threshold(p, tol, label=False).strength_c


def cmd_divergence(args) -> int:
    from .numerics import fit_power_law

    sides = ["origin", "boundary"] if args.side == "both" else [args.side]
    params = {"side": args.side, "deltas": args.deltas, "tol": args.tol}

    def compute():
        jobs = [(s, d) for s in sides for d in args.deltas]
        xs = _pmap(_div_job, [(d if s == "origin" else 1 - d, args.tol) for s, d in jobs], args.parallel)
        rows = [(s, d, x) for (s, d), x in zip(jobs, xs)]
        fits = {}
        for s in sides:
            f = fit_power_law([(d, x) for (ss, d, x) in rows if ss == s])
            fits[s] = {"exponent": _jsonable(f.exponent), "log_prefactor": _jsonable(f.log_prefactor),
                       "prefactor": _jsonable(f.prefactor), "r_squared": _jsonable(f.r_squared)}
        return {"tables": {"divergence": (["side", "delta", "xi_c"], rows)}, "extra": {"divergence_fit.json": fits}}

    emit(args, "divergence", params, compute)
    return 0


def _fit_dict(f):
    if f is None:
        return None
    return {"exponent": _jsonable(f.exponent), "log_prefactor": _jsonable(f.log_prefactor),
            "r_squared": _jsonable(f.r_squared), "n_points": f.n_points}


def cmd_lattice_scaling(args) -> int:
    from .lattice import Kind, threshold_scaling

    params = {"kind": args.kind, "j0_rule": args.j0_rule, "n_list": args.n_list, "tol": args.tol}

    def compute():
        kind = Kind.parse(args.kind, args.j0_rule)
        res = threshold_scaling(kind, args.n_list, args.tol, workers=args.parallel)
        rows = [(res.kind, n, g, w) for n, g, w in zip(res.N, res.strength_c, res.bracket)]
        summary = {"kind": res.kind, "full_fit": _fit_dict(res.full_fit), "trimmed_fit": _fit_dict(res.trimmed_fit),
                   "exponent": _jsonable(res.exponent)}
        cols = ["kind", "N", "strength_c_over_t0", "bracket"]
        return {"tables": {"lattice_scaling": (cols, rows)}, "extra": {"lattice_scaling_fit.json": summary}}

    emit(args, "lattice-scaling", params, compute)
    return 0


def cmd_correspondence(args) -> int:
    from .continuum import ContinuumPotential
    from .correspondence import correspondence_report

    params = {"z": args.z, "xi": args.xi, "p": args.p, "n_list": args.n_list, "levels": args.levels}

    def compute():
        rep = correspondence_report(ContinuumPotential(args.z, args.xi, args.p), args.n_list, args.levels)
        return {"extra": {"correspondence_report.json": rep}}

    emit(args, "correspondence", params, compute)
    return 0


def cmd_verify(args) -> int:
    from . import verify

    report = verify.run_suite(eps=args.eps, inject_sign_flip=args.inject_sign_flip)
    out = Path(args.out)
    _atomic_write(out / "verify_report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['detail']}")
    if report["first_failure"] is not None:
        print(f"verify failed: {report['first_failure']}", file=sys.stderr)
        return 1
    return 0


# --- parser -------------------------------------------------------------------------------------


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--no-cache", action="store_true", help="bypass the result cache")
    common.add_argument("--parallel", type=int, default=1, metavar="K", help="worker processes for sweeps")

    ap = argparse.ArgumentParser(prog="ptbox", description=__doc__)
    ap.add_argument("--version", action="version", version=f"ptbox {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("spectrum", parents=[common], help="real levels of the continuum box")
    s.add_argument("--z", type=float, default=0.0)
    s.add_argument("--xi", type=float, default=0.0)
    s.add_argument("--p", type=float, default=0.5)
    s.add_argument("--alpha-max", type=_positive, default=3.0)
    s.add_argument("--grid-step", type=_positive, default=TOLERANCES["grid_step"])
    s.add_argument("--accept-tol", type=_positive, default=TOLERANCES["accept_tol"])
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("xi-threshold", parents=[common], help="impurity threshold xi_c(p) at Z = 0")
    s.add_argument("--p-list", type=parse_grid, required=True)
    s.add_argument("--tol", type=_positive, default=TOLERANCES["boundary_tol"])
    s.set_defaults(func=cmd_xi_threshold)

    s = sub.add_parser("phase-boundary", parents=[common], help="Z_c-(xi), Z_c+(xi) at fixed p")
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--xi-grid", type=parse_grid, required=True)
    s.add_argument("--tol", type=_positive, default=TOLERANCES["boundary_tol"])
    s.add_argument("--anchor-search", action="store_true",
                   help="when Z = 0 is broken, bisect outward from the nearest unbroken Z instead of truncating")
    s.set_defaults(func=cmd_phase_boundary)

    s = sub.add_parser("divergence", parents=[common], help="xi_c(delta) near p = 0 and p = 1")
    s.add_argument("--side", choices=["origin", "boundary", "both"], default="both")
    s.add_argument("--deltas", type=parse_grid, default=[0.02, 0.04, 0.08])
    s.add_argument("--tol", type=_positive, default=TOLERANCES["boundary_tol"])
    s.set_defaults(func=cmd_divergence)

    s = sub.add_parser("lattice-scaling", parents=[common], help="lattice thresholds against N")
    s.add_argument("--kind", choices=["step", "pair"], required=True)
    s.add_argument("--j0-rule", default=None, help="fixed:J or fraction:F (pair only)")
    s.add_argument("--n-list", type=parse_int_list, required=True)
    s.add_argument("--tol", type=_positive, default=1e-6, help="relative bracket width")
    s.set_defaults(func=cmd_lattice_scaling)

    s = sub.add_parser("correspondence", parents=[common], help="continuum levels against the lattice oracle")
    s.add_argument("--z", type=float, default=2.0)
    s.add_argument("--xi", type=float, default=1.0)
    s.add_argument("--p", type=float, default=0.5)
    s.add_argument("--n-list", type=parse_int_list, default=[2000, 4000])
    s.add_argument("--levels", type=int, default=6)
    s.set_defaults(func=cmd_correspondence)

    s = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    s.add_argument("--eps", type=float, default=TOLERANCES["lattice_eps"])
    s.add_argument("--inject-sign-flip", action="store_true", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_verify)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.parallel < 1:
        ap.error("--parallel must be >= 1")
    try:
        return args.func(args)
    except PTBoxError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
