"""Command-line front end.

Subcommands: reach, extract, falsify, partition, optimize, check.
Exit codes: 0 success, 1 invalid input, 2 computation error, 3 check failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import setrep as S
from .depreach import (
    AlphaBox,
    HalfspaceSpec,
    as_zonotope,
    box_image,
    extract,
    falsify,
    optimize_initial_box,
    parameterize_point,
    partition_safe,
    project_spec,
    zonotope_gauges,
)
from .dynamics import DivergenceError, NonlinearSystem, simulate_batch
from .polyalg import ParseError
from .reach import ReachError, ReachSettings, reach
from .results import (
    ResultFormatError,
    load_initial_set,
    load_input_set,
    read_json,
    result_from_json,
    result_to_json,
    write_json,
)

log = logging.getLogger("spzreach")

EXIT_OK, EXIT_INVALID, EXIT_COMPUTE, EXIT_CHECK = 0, 1, 2, 3
POLY_HEADER = "# polygons are zonotope enclosures (over-approximations) of the 2-D projection"


class InputError(Exception):
    """Invalid command-line input; reported with exit code 1."""


# ---------------------------------------------------------------------------
# helpers


def _floats(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise InputError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _load_system(path) -> NonlinearSystem:
    data = _read(path)
    try:
        return NonlinearSystem.from_dict(data)
    except ParseError as exc:
        idx = _failing_rhs(data)
        where = f" (f[{idx}] = {data['f'][idx]!r})" if idx is not None else ""
        raise InputError(f"{path}: syntax error{where}: {exc}") from None
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: invalid system description: {exc}") from None


def _failing_rhs(data):
    names = list(data.get("vars", [])) + list(data.get("inputs", []))
    from .polyalg import parse

    for i, text in enumerate(data.get("f", [])):
        try:
            parse(text, names)
        except (ParseError, ValueError):
            return i
    return None


def _read(path):
    try:
        return read_json(path)
    except FileNotFoundError:
        raise InputError(f"{path}: file not found") from None
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _load_result(path):
    data = _read(path)
    try:
        return result_from_json(data)
    except (ResultFormatError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, out: Path, inputs: dict, settings=None):
    write_json(
        out / "manifest.json",
        {
            "command": args.command,
            "version": __version__,
            "inputs": {k: str(v) for k, v in inputs.items()},
            "settings": settings,
            "output_directory": str(out),
            "seed": args.seed,
        },
    )


def _update_timing(out: Path, entries: dict):
    path = out / "timing.json"
    data = read_json(path) if path.exists() else {}
    data.update(entries)
    write_json(path, data)


def _dims(n: int) -> tuple[int, int]:
    return (0, 1) if n >= 2 else (0, 0)


def _polygon(z, n: int) -> np.ndarray:
    if n >= 2:
        return z.polygon((0, 1))
    hull = z.interval_hull()
    return np.array([[hull.l[0], 0.0], [hull.u[0], 0.0]])


def _write_polys(path: Path, rows):
    with open(path, "w", newline="") as fh:
        fh.write(POLY_HEADER + "\n")
        w = csv.writer(fh)
        w.writerow(["t", "k", "x", "y"])
        for t, P in rows:
            for k, (x, y) in enumerate(P):
                w.writerow([repr(float(t)), k, repr(float(x)), repr(float(y))])


def _rng(args):
    return np.random.default_rng(args.seed)


# ---------------------------------------------------------------------------
# commands


def cmd_reach(args) -> int:
    sysm = _load_system(args.system)
    idgen = S.IdGenerator()
    try:
        X0 = load_initial_set(_read(args.x0), idgen)
        settings = ReachSettings.from_dict(_read(args.settings))
        U = load_input_set(_read(args.inputs) if args.inputs else None, sysm.m)
    except InputError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"invalid input: {exc}") from None
    if X0.n != sysm.n:
        raise InputError(f"{args.x0}: initial set has dimension {X0.n}, system has {sysm.n} states")
    if U.dim != sysm.m:
        raise InputError(f"input set has dimension {U.dim}, system has {sysm.m} inputs")
    out = _out(args)
    log.info("running reach: %d steps", int(np.ceil(settings.tf / settings.r - 1e-9)))
    res = reach(sysm, X0, U, settings, idgen)
    write_json(out / "result.json", result_to_json(res))
    n = sysm.n
    pts = [(t, _polygon(S.enclose_zonotope(pz), n)) for t, pz in res.time_points]
    ivs = [(t[0], _polygon(S.enclose_zonotope(pz), n)) for t, pz in res.time_intervals]
    _write_polys(out / "reach2d.csv", pts)
    _write_polys(out / "reach2d_intervals.csv", ivs)
    samples = None
    if args.samples:
        # simulated final states from random initial states
        _, _, x0s = res.x0.sample(args.samples, _rng(args), extreme=0.2)
        dt = settings.r / max(1, int(np.ceil(settings.r / 1e-3)))
        samples = simulate_batch(sysm, x0s, U.c if sysm.m else None, settings.tf, dt)
        np.savetxt(out / "reach2d_samples.csv", samples, delimiter=",", fmt="%.17g",
                   header=",".join(sysm.vars), comments="")
    if not args.no_plots:
        from .plotting import plot_reach

        plot_reach(out / "reach2d.png", [P for _, P in ivs], pts[-1][1], pts[0][1],
                   samples[:, :2] if samples is not None and n >= 2 else None, _labels(sysm))
    _manifest(args, out, {"system": args.system, "x0": args.x0, "settings": args.settings,
                          "inputs": args.inputs or ""}, settings.to_dict())
    _update_timing(out, {"reach_seconds": res.elapsed})
    print(f"reach: {res.steps} steps in {res.elapsed:.3f} s; final set h={res.final.h} q={res.final.q} p={res.final.p}")
    print(f"wrote {out / 'result.json'}")
    return EXIT_OK


def _labels(sysm):
    return tuple(sysm.vars[:2]) if sysm.n >= 2 else (sysm.vars[0], "")


def _stored_reach_time(result_path: Path):
    timing = result_path.parent / "timing.json"
    if timing.exists():
        return read_json(timing).get("reach_seconds")
    return None


def cmd_extract(args) -> int:
    res = _load_result(args.result)
    p0 = len(res.x0_ids)
    if (args.alpha is None) == (args.point is None):
        raise InputError("give exactly one of --alpha and --point")
    if args.point is not None:
        x = _floats(args.point, "--point")
        try:
            alpha = parameterize_point(res.x0, x)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    else:
        alpha = _floats(args.alpha, "--alpha")
    if alpha.size != p0:
        raise InputError(f"expected {p0} factor values, got {alpha.size}")
    if np.any(np.abs(alpha) > 1 + 1e-12):
        raise InputError("factor values must lie in [-1, 1]")
    out = _out(args)
    ex = extract(res, alpha)
    n = res.x0.n
    write_json(
        out / "extracted.json",
        {
            "alpha": alpha.tolist(),
            "x0_ids": [int(i) for i in res.x0_ids],
            "time_points": [{"t": t, "set": S.to_json(s)} for t, s in ex.time_points],
            "time_intervals": [{"t0": t[0], "t1": t[1], "set": S.to_json(s)} for t, s in ex.time_intervals],
        },
    )
    pts = [(t, _polygon(as_zonotope(s), n)) for t, s in ex.time_points]
    _write_polys(out / "extract2d.csv", pts)
    if not args.no_plots:
        from .plotting import plot_extract

        plot_extract(out / "extract.png", _polygon(S.enclose_zonotope(res.final), n), [P for _, P in pts],
                     pts[-1][1], _labels(res.system) if res.system else ("x1", "x2"))
    _manifest(args, out, {"result": args.result})
    stored = _stored_reach_time(Path(args.result))
    _update_timing(out, {"extract_seconds": ex.elapsed, "stored_reach_seconds": stored})
    print("alpha = " + ", ".join(f"{a:.6g}" for a in alpha))
    stored_txt = f"{stored:.4f} s" if stored is not None else "unknown"
    print(f"extraction time: {ex.elapsed:.4f} s | stored reach time: {stored_txt}")
    return EXIT_OK


def _spec(args, n: int) -> HalfspaceSpec:
    try:
        spec = HalfspaceSpec.parse(args.spec)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if spec.a.size != n:
        raise InputError(f"specification has {spec.a.size} coefficients, system has {n} states")
    return spec


def _need_system(res):
    if res.system is None:
        raise InputError("result file does not contain the system")
    return res.system


def cmd_falsify(args) -> int:
    res = _load_result(args.result)
    sysm = _need_system(res)
    spec = _spec(args, sysm.n)
    if args.dt <= 0:
        raise InputError("--dt must be positive")
    out = _out(args)
    fr = falsify(res, spec, seeds=args.seed, sys=sysm, dt=args.dt)
    g, margin = project_spec(res.final, spec)
    write_json(
        out / "verdict.json",
        {
            "spec": str(spec),
            "verified": bool(fr.verified),
            "alpha_star": fr.alpha_star.tolist(),
            "x0_star": fr.x0_star.tolist(),
            "g_value": fr.g_value,
            "margin": margin,
            "objective": fr.objective,
            "final_state": fr.witness.final.tolist(),
            "violation": fr.violation,
            "g": g.to_json(),
        },
    )
    with open(out / "witness.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + list(sysm.vars))
        for t, x in zip(fr.witness.times, fr.witness.states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x])
    if not args.no_plots and sysm.n >= 2:
        from .plotting import plot_falsify

        plot_falsify(out / "falsify.png", _polygon(S.enclose_zonotope(res.final), sysm.n), fr.witness.states,
                     spec.a, spec.b, _labels(sysm))
    _manifest(args, out, {"result": args.result, "spec": args.spec})
    _update_timing(out, {"falsify_optimizer_seconds": fr.optimizer_time,
                         "stored_reach_seconds": _stored_reach_time(Path(args.result))})
    verdict = "violation verified" if fr.verified else "no verified violation"
    print(f"{verdict}: max g = {fr.g_value:.6g} vs margin {margin:.6g}; a^T x(tf) - b = {fr.violation:.6g}")
    print("x0* = " + ", ".join(f"{v:.6g}" for v in fr.x0_star))
    return EXIT_OK


def _box_json(res, box: AlphaBox) -> dict:
    d = box.to_dict()
    d["image"] = S.to_json(box_image(res.x0, res.x0_ids, box))
    return d


def cmd_partition(args) -> int:
    res = _load_result(args.result)
    spec = _spec(args, res.x0.n)
    if args.depth < 0:
        raise InputError("--depth must be non-negative")
    out = _out(args)
    safe, unknown = partition_safe(res, spec, args.depth)
    write_json(out / "partition.json", {
        "spec": str(spec),
        "depth": args.depth,
        "safe": [_box_json(res, b) for b in safe],
        "unknown": [_box_json(res, b) for b in unknown],
        "safe_measure": sum(b.volume for b in safe),
        "unknown_measure": sum(b.volume for b in unknown),
    })
    with open(out / "partition.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        p0 = len(res.x0_ids)
        w.writerow(["label"] + [f"lo{k + 1}" for k in range(p0)] + [f"hi{k + 1}" for k in range(p0)])
        for label, boxes in (("safe", safe), ("unknown", unknown)):
            for b in boxes:
                w.writerow([label] + [repr(float(v)) for v in b.lo] + [repr(float(v)) for v in b.hi])
    if not args.no_plots and len(res.x0_ids) >= 2:
        from .plotting import plot_boxes

        plot_boxes(out / "partition.png", [(b.lo, b.hi) for b in safe], [(b.lo, b.hi) for b in unknown])
    _manifest(args, out, {"result": args.result, "spec": args.spec})
    print(f"{len(safe)} safe boxes (measure {sum(b.volume for b in safe):.6g}), "
          f"{len(unknown)} unknown boxes (measure {sum(b.volume for b in unknown):.6g})")
    return EXIT_OK


def cmd_optimize(args) -> int:
    res = _load_result(args.result)
    spec = _spec(args, res.x0.n)
    out = _out(args)
    box = optimize_initial_box(res, spec, seed=args.seed)
    write_json(out / "optimize.json", {"spec": str(spec), "box": _box_json(res, box), "volume": box.volume})
    if not args.no_plots and len(res.x0_ids) >= 2:
        from .plotting import plot_boxes

        plot_boxes(out / "optimize.png", [], [], highlight=(box.lo, box.hi))
    _manifest(args, out, {"result": args.result, "spec": args.spec})
    print("certified box: lo = " + ", ".join(f"{v:.6g}" for v in box.lo)
          + " | hi = " + ", ".join(f"{v:.6g}" for v in box.hi) + f" | volume {box.volume:.6g}")
    return EXIT_OK


def cmd_check(args) -> int:
    sysm = _load_system(args.system)
    res = _load_result(args.result)
    if res.system is not None and res.system.to_dict() != sysm.to_dict():
        raise InputError("system does not match the one stored in the result")
    if res.U.ngens:
        raise InputError("check supports results without uncertain inputs only")
    if args.samples < 0:
        raise InputError("--samples must be non-negative")
    out = _out(args)
    N = args.samples
    if N == 0:
        log.warning("no samples requested: the check passes vacuously")
        print("warning: --samples 0, nothing checked")
        write_json(out / "check.json", {"samples": 0, "passed": True, "results": []})
        _manifest(args, out, {"system": args.system, "result": args.result})
        return EXIT_OK
    rng = _rng(args)
    p0 = len(res.x0_ids)
    alphas = rng.uniform(-1.0, 1.0, size=(N, p0))
    x0s = np.array([S.eval(res.x0, a).c for a in alphas]).reshape(N, -1)
    r = res.settings.r
    sub = max(1, int(np.ceil(r / args.dt - 1e-9)))
    grid = np.array([t for t, _ in res.time_points])
    # simulate step by step so that substep states line up with each time interval
    states = [x0s]
    inner = []
    X = x0s
    for s in range(len(grid) - 1):
        h = grid[s + 1] - grid[s]
        _, _, rec = simulate_batch(sysm, X, None, h, h / sub, record_every=1)
        inner.append(rec)
        X = rec[-1]
        states.append(X)
    full_pts = [as_zonotope(S.enclose_zonotope(pz)) for _, pz in res.time_points]
    full_ivs = [as_zonotope(S.enclose_zonotope(pz)) for _, pz in res.time_intervals]
    worst_full = np.zeros(N)
    for s, z in enumerate(full_pts):
        worst_full = np.maximum(worst_full, zonotope_gauges(z, states[s]))
    for s, z in enumerate(full_ivs):
        worst_full = np.maximum(worst_full, zonotope_gauges(z, inner[s].reshape(-1, sysm.n)).reshape(-1, N).max(axis=0))
    results = []
    failed = []
    for k in range(N):
        ex = extract(res, alphas[k])
        worst = 0.0
        for s, (_, zs) in enumerate(ex.time_points):
            worst = max(worst, float(zonotope_gauges(as_zonotope(zs), states[s][k : k + 1])[0]))
        for s, (_, zs) in enumerate(ex.time_intervals):
            worst = max(worst, float(zonotope_gauges(as_zonotope(zs), inner[s][:, k, :]).max()))
        ok = worst <= 1 + 1e-9 and worst_full[k] <= 1 + 1e-9
        results.append({
            "index": k,
            "alpha": alphas[k].tolist(),
            "extracted_gauge": worst,
            "full_gauge": float(worst_full[k]),
            "margin": 1.0 - max(worst, float(worst_full[k])),
            "passed": bool(ok),
        })
        if not ok:
            failed.append(k)
    passed = not failed
    write_json(out / "check.json", {"samples": N, "seed": args.seed, "dt": args.dt, "passed": passed,
                                    "failed": failed, "results": results})
    _manifest(args, out, {"system": args.system, "result": args.result})
    if passed:
        print(f"check passed: {N}/{N} samples contained (min margin {min(r['margin'] for r in results):.3g})")
        return EXIT_OK
    print(f"check FAILED for {len(failed)}/{N} samples:", file=sys.stderr)
    for k in failed:
        print("  alpha = " + ", ".join(f"{v:.6g}" for v in alphas[k]), file=sys.stderr)
    return EXIT_CHECK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--seed", type=int, default=0, help="random seed")
    common.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    common.add_argument("--no-plots", action="store_true", help="skip PNG figures")

    ap = argparse.ArgumentParser(prog="spzreach", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reach", parents=[common], help="compute reachable sets")
    p.add_argument("system")
    p.add_argument("x0")
    p.add_argument("settings")
    p.add_argument("--inputs", help="input set JSON (interval or zonotope)")
    p.add_argument("--samples", type=int, default=0, help="also simulate this many random initial states")
    p.set_defaults(func=cmd_reach)

    p = sub.add_parser("extract", parents=[common], help="reachable sets of one initial state")
    p.add_argument("result")
    p.add_argument("--alpha", help="factor values, comma separated")
    p.add_argument("--point", help="initial state, comma separated")
    p.set_defaults(func=cmd_extract)

    for name, func, helptext in (
        ("falsify", cmd_falsify, "search a trajectory violating a^T x <= b at the final time"),
        ("partition", cmd_partition, "split the initial set into safe and unknown parts"),
        ("optimize", cmd_optimize, "largest certified-safe box of initial factors"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("result")
        p.add_argument("--spec", required=True, help="specification, e.g. 'a=1,2;b=6.4'")
        if name == "falsify":
            p.add_argument("--dt", type=float, default=1e-4, help="simulation step")
        if name == "partition":
            p.add_argument("--depth", type=int, default=6)
        p.set_defaults(func=func)

    p = sub.add_parser("check", parents=[common], help="verify sampled trajectories against a result")
    p.add_argument("system")
    p.add_argument("result")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--dt", type=float, default=1e-4, help="maximum simulation step")
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ReachError, DivergenceError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
