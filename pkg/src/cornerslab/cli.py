"""Command line front end.

Every subcommand reads JSON inputs, runs the matching library routine and
emits a single JSON report on stdout (or to --out).  Reports are rendered
with sorted keys and no timing fields, so identical configurations produce
byte-identical output; wall-clock time goes to stderr.  Exit codes: 0 when
every asserted check holds, 1 when an assertion fails, 2 for unusable
arguments or malformed inputs, 3 when a computation refuses to run past a
pinned budget or cap.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from fractions import Fraction

import numpy as np

from .bohr import (
    bohr_from_json,
    bohr_to_json,
    find_regular_dilate,
    is_bohr_alg_spread,
    is_regular,
    make_sequence,
)
from .constants import CONSTANTS, TABLE_DIGEST
from .corners import (
    behrend_apfree,
    cornerfree_from_apfree,
    count_corners,
    count_corners_grid,
    phi_exact,
)
from .gridnorm import GridNormParams, grid_norm
from .group import BudgetExceeded, full_space, parse_group
from .increment import obtain_spreadness
from .nof import (
    Coloring,
    CylinderIntersection,
    coloring_from_cornerfree,
    compile_cfl_protocol,
    restrict_cylinder,
)
from .reports import InequalityReport
from .setfun import GridFunction, GroupFunction, SubsetInd, load_set, save_set
from .sift import SpreadMajorant, relative_sift, sift
from .spread import (
    is_alg_spread_f2,
    is_asym_spread,
    is_comb_spread,
    is_l1_spread,
    spread_extract_f2,
)
from .suites import run_suite, suite_names

__all__ = ["main"]


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _sanitize(obj):
    """Coerce report payloads to plain JSON types, Fractions as strings."""
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    return str(obj)


def _resolve_threads(args) -> int:
    if args.threads is not None:
        t = args.threads
    else:
        t = int(os.environ.get("CORNERS_LAB_THREADS", "1"))
    if t < 1:
        raise ValueError("thread count must be at least 1")
    return t


def _check_constants_pin(path: str) -> None:
    """--constants pins the run to a table file; a digest mismatch is fatal.

    The module-level constants are already bound at import time, so a
    different table cannot be swapped in silently.  The flag exists to let
    recorded baselines assert which table they were produced under.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    json.loads(raw)
    digest = hashlib.sha256(raw).hexdigest()
    if digest != TABLE_DIGEST:
        raise ValueError(
            f"constant table at {path} has digest {digest[:12]}.., the loaded "
            f"table is {TABLE_DIGEST[:12]}..")


def _report(args, subcommand: str, inputs: list, outputs: dict,
            checks: list) -> dict:
    body = []
    for c in checks:
        body.append(c.to_json() if isinstance(c, InequalityReport) else c)
    return {
        "subcommand": subcommand,
        "config": {
            "seed": getattr(args, "seed", None),
            "tol": args.tol,
            "threads": _resolve_threads(args),
            "constants_path": args.constants,
        },
        "constants": {"version": int(CONSTANTS["table_version"]),
                      "digest": TABLE_DIGEST},
        "inputs": {p: _sha256(p) for p in inputs if p},
        "outputs": _sanitize(outputs),
        "checks": _sanitize(body),
    }


def _checks_hold(report: dict) -> bool:
    return all(c.get("holds", True) for c in report["checks"])


def _tol(args) -> float:
    return args.tol if args.tol is not None else 1e-9


def _load_subset(path: str) -> SubsetInd:
    obj = load_set(path)
    if not isinstance(obj, SubsetInd):
        raise ValueError(f"{path} does not hold a subset")
    return obj


def _load_grid(path: str) -> GridFunction:
    obj = load_set(path)
    if not isinstance(obj, GridFunction):
        raise ValueError(f"{path} does not hold a grid function")
    return obj


def _load_bohr(path: str):
    with open(path) as fh:
        return bohr_from_json(json.load(fh))


# ---------------------------------------------------------------------------
# corners


def _cmd_corners_count(args) -> dict:
    g = parse_group(args.group)
    a = _load_subset(args.set)
    if a.size != g.order * g.order:
        raise ValueError(f"the set must index |G|^2 = {g.order ** 2} cells")
    rep = count_corners(g, a)
    phi = phi_exact(g, a, a, a)
    identity_gap = abs(phi * g.order ** 3 - (rep.total + a.cardinality))
    checks = [InequalityReport(
        "corner-count-phi-identity", float(identity_gap), 0.0, tol=0.0,
        details={"phi": str(phi), "count": rep.total, "a_size": a.cardinality})]
    outputs = {
        "count": rep.total,
        "includes_trivial": rep.includes_trivial,
        "density": a.cardinality / a.size,
        "witness": rep.witness,
        "phi": str(phi),
    }
    return _report(args, "corners count", [args.set], outputs, checks)


def _cmd_corners_behrend(args) -> dict:
    a, info = behrend_apfree(args.n)
    if args.out:
        save_set(args.out, a, domain=args.n)
    checks = [InequalityReport(
        "behrend-nonempty", 1.0, float(a.cardinality), tol=0.0,
        details={"n": args.n})]
    outputs = {"n": args.n, "size": a.cardinality,
               "density": a.cardinality / max(1, args.n),
               "construction": info, "out": args.out}
    return _report(args, "corners behrend", [], outputs, checks)


def _cmd_corners_lift(args) -> dict:
    b = _load_subset(args.apfree)
    n = b.size
    a = cornerfree_from_apfree(n, b)
    checks = []
    if args.check:
        cnt = count_corners_grid(n, a)
        checks.append(InequalityReport(
            "lift-corner-free", float(cnt.total), 0.0, tol=0.0,
            details={"n": n, "witness": cnt.witness}))
    if args.out:
        save_set(args.out, a, domain=n * n, rows=n, cols=n)
    outputs = {"n": n, "size": a.cardinality,
               "density": a.cardinality / (n * n), "out": args.out}
    return _report(args, "corners lift", [args.apfree], outputs, checks)


# ---------------------------------------------------------------------------
# gridnorm, sift


def _cmd_gridnorm(args) -> dict:
    f = _load_grid(args.grid)
    if args.mc is not None:
        params = GridNormParams(args.k, args.l, mode="montecarlo",
                                samples=int(args.mc[0]), seed=int(args.mc[1]))
    else:
        params = GridNormParams(args.k, args.l)
    res = grid_norm(f, params)
    outputs = {"value": res.value, "power": res.power, "k": res.k, "l": res.l,
               "mode": res.mode, "stderr": res.stderr, "samples": res.samples,
               "mc_seed": res.seed, "norm_like": res.norm_like}
    return _report(args, "gridnorm", [args.grid], outputs, [])


def _cmd_sift_run(args) -> dict:
    f = _load_grid(args.grid)
    norm = grid_norm(f, GridNormParams(args.k, args.l)).value
    alpha = args.alpha if args.alpha is not None else norm
    w = sift(f, args.k, args.l, args.eps, alpha)
    checks = [
        InequalityReport(
            "sift-achieved", (1 - args.eps) * alpha, w.achieved,
            tol=_tol(args), details={"alpha": alpha, "eps": args.eps,
                                     "regime": w.regime}),
        InequalityReport(
            "sift-mass-floor", w.details["mass_floor"],
            w.masses[0] * w.masses[1], tol=_tol(args),
            details={"masses": list(w.masses)}),
    ]
    outputs = {"g1": list(w.g1), "g2": list(w.g2), "achieved": w.achieved,
               "masses": list(w.masses), "regime": w.regime, "norm": norm,
               "alpha": alpha, "level": w.details.get("level")}
    return _report(args, "sift run", [args.grid], outputs, checks)


def _cmd_sift_relative(args) -> dict:
    f = _load_grid(args.grid)
    t = _load_subset(args.majorant)
    maj = SpreadMajorant(t, args.tau, args.gamma)
    norm = grid_norm(f, GridNormParams(2, args.k)).value
    alpha = args.alpha if args.alpha is not None else min(1.0, norm / args.tau)
    w = relative_sift(f, maj, args.k, args.eps, alpha)
    floors = w.details["mass_floors"]
    checks = [
        InequalityReport(
            "relative-sift-achieved", (1 - args.eps) * alpha * args.tau,
            w.achieved, tol=_tol(args),
            details={"alpha": alpha, "tau": args.tau, "eps": args.eps,
                     "regime": w.regime,
                     "out_of_regime": w.details["out_of_regime"]}),
        InequalityReport("relative-sift-mass-1", floors[0], w.masses[0],
                         tol=_tol(args)),
        InequalityReport("relative-sift-mass-2", floors[1], w.masses[1],
                         tol=_tol(args)),
    ]
    outputs = {"g1": list(w.g1), "g2": list(w.g2), "achieved": w.achieved,
               "masses": list(w.masses), "regime": w.regime, "norm": norm,
               "alpha": alpha, "gamma_max": w.details["gamma_max"]}
    return _report(args, "sift relative", [args.grid, args.majorant],
                   outputs, checks)


# ---------------------------------------------------------------------------
# spread


def _cert_report(args, name: str, inputs: list, cert, extra=None) -> dict:
    outputs = cert.to_json()
    if extra:
        outputs.update(extra)
    return _report(args, name, inputs, outputs, [])


def _cmd_spread_comb(args) -> dict:
    t = _load_subset(args.set)
    if t.size != args.rows * args.cols:
        raise ValueError(f"the set must index a {args.rows}x{args.cols} grid")
    cert = is_comb_spread(t, (args.rows, args.cols), args.tau, args.gamma,
                          mode=args.mode)
    return _cert_report(args, "spread comb", [args.set], cert)


def _cmd_spread_alg(args) -> dict:
    x = _load_subset(args.set)
    if x.size != 1 << args.n:
        raise ValueError(f"the set must index 2^{args.n} points")
    cert = is_alg_spread_f2(x, full_space(args.n), args.r, args.eps)
    return _cert_report(args, "spread alg", [args.set], cert)


def _cmd_spread_asym(args) -> dict:
    f = _load_grid(args.grid)
    cert = is_asym_spread(f, args.s, args.t, args.eps, mode=args.mode)
    return _cert_report(args, "spread asym", [args.grid], cert)


def _group_fn(path: str, group) -> GroupFunction:
    obj = load_set(path)
    if isinstance(obj, SubsetInd):
        vals = obj.bits.astype(float)
    else:
        vals = obj.values.reshape(-1)
    return GroupFunction(group, vals)


def _cmd_spread_l1(args) -> dict:
    b1 = _load_bohr(args.b1)
    b2 = _load_bohr(args.b2)
    f = _group_fn(args.fn, b1.group)
    cert = is_l1_spread(f, b1, b2, args.eps)
    return _cert_report(args, "spread l1", [args.fn, args.b1, args.b2], cert)


def _cmd_spread_extract(args) -> dict:
    x = _load_subset(args.set)
    if x.size != 1 << args.n:
        raise ValueError(f"the set must index 2^{args.n} points")
    w2, x2, trace = spread_extract_f2(x, full_space(args.n), args.r, args.eps)
    outputs = {"final_dim": w2.dim, "final_size": x2.cardinality,
               "steps": len(trace), "trace": trace}
    return _report(args, "spread extract", [args.set], outputs, [])


# ---------------------------------------------------------------------------
# bohr


def _cmd_bohr_members(args) -> dict:
    b = _load_bohr(args.bohr)
    members = b.member_mask()
    sub = SubsetInd(b.group.order, members)
    if args.out:
        save_set(args.out, sub, domain=b.group.descriptor())
    outputs = {"size": sub.cardinality, "dim": b.dim,
               "density": sub.cardinality / b.group.order,
               "descriptor": bohr_to_json(b), "out": args.out}
    return _report(args, "bohr members", [args.bohr], outputs, [])


def _cmd_bohr_regular(args) -> dict:
    b = _load_bohr(args.bohr)
    rep = is_regular(b)
    outputs = {"regular": rep.holds, "descriptor": bohr_to_json(b)}
    return _report(args, "bohr regular", [args.bohr], outputs, [rep])


def _cmd_bohr_dilate(args) -> dict:
    b = _load_bohr(args.bohr)
    b2 = find_regular_dilate(b)
    rep = is_regular(b2)
    desc = bohr_to_json(b2)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(desc, fh)
            fh.write("\n")
    outputs = {"descriptor": desc, "size": b2.size(),
               "dilation": str(b2.radius / b.radius), "out": args.out}
    return _report(args, "bohr dilate", [args.bohr], outputs, [rep])


def _cmd_bohr_sequence(args) -> dict:
    b = _load_bohr(args.bohr)
    eta = Fraction(args.eta)
    if not (0 < eta < 1):
        raise ValueError("eta must lie in (0,1)")
    seq = make_sequence(b, eta, args.length, args.exactness)
    outputs = {
        "length": len(seq),
        "descriptors": [bohr_to_json(s) for s in seq.sets],
        "sizes": [s.size() for s in seq.sets],
        "ratios": [str(r) for r in seq.ratios],
        "eta": str(eta),
        "exactness": seq.exactness,
        "degenerate_tail": seq.degenerate_tail,
    }
    return _report(args, "bohr sequence", [args.bohr], outputs, [])


def _cmd_bohr_spread(args) -> dict:
    b = _load_bohr(args.bohr)
    x = _load_subset(args.set)
    cert = is_bohr_alg_spread(x, b, args.r, Fraction(args.eta_s), args.eps)
    return _cert_report(args, "bohr spread", [args.set, args.bohr], cert,
                        extra={"descriptor": bohr_to_json(b)})


# ---------------------------------------------------------------------------
# increment, nof


def _cmd_increment_run(args) -> dict:
    a = _load_subset(args.set)
    if a.size != 1 << (2 * args.n):
        raise ValueError(f"the set must index a 2^{args.n} x 2^{args.n} grid")
    st = obtain_spreadness(a, args.r, args.s, args.t, args.eps)
    steps = _sanitize(st.history)
    conclusions = {}
    for entry in reversed(st.history):
        if isinstance(entry, dict) and "conclusions" in entry:
            conclusions = _sanitize(entry["conclusions"])
            break
    if args.trace:
        with open(args.trace, "w") as fh:
            json.dump({"steps": steps, "conclusions": conclusions},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
    outputs = {
        "alpha": str(st.alpha),
        "dim": st.container.w.dim,
        "a_size": st.a.cardinality,
        "iterations": sum(1 for e in st.history
                          if e.get("kind") == "comb-increment"),
        "steps": len(st.history),
        "conclusions": conclusions,
        "trace": args.trace,
    }
    return _report(args, "increment run", [args.set], outputs, [])


def _cmd_nof_compile(args) -> dict:
    if args.seed is None:
        raise ValueError("nof compile draws random translates; --seed is "
                         "required")
    a = _load_subset(args.cornerfree)
    col = coloring_from_cornerfree(a, args.seed)
    proto = compile_cfl_protocol(col)
    n = col.shape[0]
    if args.n != n:
        raise ValueError(f"--n {args.n} does not match the {n}x{n} set")
    checks = [InequalityReport(
        "cfl-bits-bound", float(proto.bits_bound()),
        3.0 * (math.ceil(math.log2(max(2, col.num_colors))) + 1), tol=0.0,
        details={"num_colors": col.num_colors})]
    verified = proto.details.get("verified")
    if args.verify and verified is None:
        verified = proto.verify_exhaustive()
    if verified is not None:
        checks.append(InequalityReport(
            "cfl-exhaustive-mismatches", float(verified["mismatches"]), 0.0,
            tol=0.0, details={"triples": verified["triples"]}))
    lines = 0
    if args.transcripts:
        triples = [tuple(t) for t in (args.triple or [])]
        if not triples:
            triples = [(x, y, args.n - x - y) for x in range(args.n)
                       for y in range(args.n) if 0 <= args.n - x - y < args.n]
        with open(args.transcripts, "w") as fh:
            for (x, y, z) in triples:
                tr = proto.run(x, y, z)
                fh.write(json.dumps(_sanitize(tr.to_json()), sort_keys=True))
                fh.write("\n")
                lines += 1
    outputs = {
        "n": n,
        "num_colors": col.num_colors,
        "color_bits": proto.color_bits,
        "bits_bound": proto.bits_bound(),
        "coloring": col.details,
        "verified": verified,
        "transcripts": args.transcripts,
        "transcript_lines": lines,
    }
    return _report(args, "nof compile", [args.cornerfree], outputs, checks)


def _cmd_nof_restrict(args) -> dict:
    with open(args.cyl) as fh:
        cyl = CylinderIntersection.from_json(json.load(fh))
    with open(args.coloring) as fh:
        col = Coloring.from_json(json.load(fh))
    aprime, color, rep = restrict_cylinder(cyl, col)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(aprime.to_json(), fh)
            fh.write("\n")
    outputs = {"color": color, "a_prime_size": aprime.cardinality,
               "details": rep.details, "out": args.out}
    return _report(args, "nof restrict", [args.cyl, args.coloring],
                   outputs, [rep])


# ---------------------------------------------------------------------------
# verify


def _cmd_verify(args) -> dict:
    threads = _resolve_threads(args)
    summary = run_suite(args.suite, args.seeds, threads=threads,
                        collect_rows=bool(args.csv))
    rows = summary.pop("rows", None)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("seed,name,lhs,rhs,margin,outcome\n")
            for (seed, name, lhs, rhs, margin, out) in rows:
                fh.write(f"{seed},{name},{lhs!r},{rhs!r},{margin!r},{out}\n")
    checks = summary["checks"] + summary["failures"]
    outputs = {k: v for k, v in summary.items() if k != "checks"}
    outputs["csv"] = args.csv
    rep = _report(args, "verify", [], outputs, checks)
    if summary["fail"] > 0:
        rep["checks"].append({"name": "suite-failures", "lhs": summary["fail"],
                              "rhs": 0, "relation": "<=", "holds": False})
    return rep


# ---------------------------------------------------------------------------
# parser wiring


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--report", help="write the JSON report here instead of stdout")
    common.add_argument("--tol", type=float, default=None,
                        help="tolerance for checks the CLI assembles itself")
    common.add_argument("--constants",
                        help="constant table path; its digest must match the loaded table")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: CORNERS_LAB_THREADS or 1)")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for randomized subcommands")

    p = argparse.ArgumentParser(
        prog="cornerslab",
        description="corner counting, grid norms, sifting, spreadness, Bohr "
                    "sets, density increments and NOF protocols at desk scale")
    sub = p.add_subparsers(dest="cmd", required=True)

    corners = sub.add_parser("corners", help="corner counts and constructions")
    csub = corners.add_subparsers(dest="sub", required=True)
    q = csub.add_parser("count", parents=[common])
    q.add_argument("--group", required=True)
    q.add_argument("--set", required=True)
    q.set_defaults(func=_cmd_corners_count)
    q = csub.add_parser("behrend", parents=[common])
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--out", help="write the constructed set here")
    q.set_defaults(func=_cmd_corners_behrend)
    q = csub.add_parser("lift", parents=[common])
    q.add_argument("--apfree", required=True)
    q.add_argument("--check", action="store_true",
                   help="re-count corners of the lifted set")
    q.add_argument("--out", help="write the lifted set here")
    q.set_defaults(func=_cmd_corners_lift)

    q = sub.add_parser("gridnorm", parents=[common])
    q.add_argument("--grid", required=True)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--l", type=int, required=True)
    q.add_argument("--mc", nargs=2, metavar=("SAMPLES", "SEED"), default=None,
                   help="Monte Carlo mode with explicit sample count and seed")
    q.set_defaults(func=_cmd_gridnorm)

    sift_p = sub.add_parser("sift", help="witness extraction")
    ssub = sift_p.add_subparsers(dest="sub", required=True)
    q = ssub.add_parser("run", parents=[common])
    q.add_argument("--grid", required=True)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--l", type=int, required=True)
    q.add_argument("--eps", type=float, required=True)
    q.add_argument("--alpha", type=float, default=None,
                   help="threshold; defaults to the computed norm")
    q.set_defaults(func=_cmd_sift_run)
    q = ssub.add_parser("relative", parents=[common])
    q.add_argument("--grid", required=True)
    q.add_argument("--majorant", required=True)
    q.add_argument("--tau", type=float, required=True)
    q.add_argument("--gamma", type=float, required=True)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--eps", type=float, required=True)
    q.add_argument("--alpha", type=float, default=None)
    q.set_defaults(func=_cmd_sift_relative)

    spread = sub.add_parser("spread", help="spreadness tests")
    psub = spread.add_subparsers(dest="sub", required=True)
    q = psub.add_parser("comb", parents=[common])
    q.add_argument("--set", required=True)
    q.add_argument("--rows", type=int, required=True)
    q.add_argument("--cols", type=int, required=True)
    q.add_argument("--tau", type=float, required=True)
    q.add_argument("--gamma", type=float, required=True)
    q.add_argument("--mode", choices=["exact", "alternating"], default="exact")
    q.set_defaults(func=_cmd_spread_comb)
    q = psub.add_parser("alg", parents=[common])
    q.add_argument("--set", required=True)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--r", type=int, required=True)
    q.add_argument("--eps", type=float, required=True)
    q.set_defaults(func=_cmd_spread_alg)
    q = psub.add_parser("asym", parents=[common])
    q.add_argument("--grid", required=True)
    q.add_argument("--s", type=int, required=True)
    q.add_argument("--t", type=int, required=True)
    q.add_argument("--eps", type=float, required=True)
    q.add_argument("--mode", choices=["exact", "sampled"], default="exact")
    q.set_defaults(func=_cmd_spread_asym)
    q = psub.add_parser("l1", parents=[common])
    q.add_argument("--fn", required=True)
    q.add_argument("--b1", required=True)
    q.add_argument("--b2", required=True)
    q.add_argument("--eps", type=float, required=True)
    q.set_defaults(func=_cmd_spread_l1)
    q = psub.add_parser("extract", parents=[common])
    q.add_argument("--set", required=True)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--r", type=int, required=True)
    q.add_argument("--eps", type=float, required=True)
    q.set_defaults(func=_cmd_spread_extract)

    bohr = sub.add_parser("bohr", help="Bohr set operations")
    bsub = bohr.add_subparsers(dest="sub", required=True)
    q = bsub.add_parser("members", parents=[common])
    q.add_argument("--bohr", required=True)
    q.add_argument("--out", help="write the member set here")
    q.set_defaults(func=_cmd_bohr_members)
    q = bsub.add_parser("regular", parents=[common])
    q.add_argument("--bohr", required=True)
    q.set_defaults(func=_cmd_bohr_regular)
    q = bsub.add_parser("dilate", parents=[common])
    q.add_argument("--bohr", required=True)
    q.add_argument("--out", help="write the dilated descriptor here")
    q.set_defaults(func=_cmd_bohr_dilate)
    q = bsub.add_parser("sequence", parents=[common])
    q.add_argument("--bohr", required=True)
    q.add_argument("--eta", required=True, help="ratio target, e.g. 1/2")
    q.add_argument("--length", type=int, required=True)
    q.add_argument("--exactness", choices=["small", "exact"], default="small")
    q.set_defaults(func=_cmd_bohr_sequence)
    q = bsub.add_parser("spread", parents=[common])
    q.add_argument("--set", required=True)
    q.add_argument("--bohr", required=True)
    q.add_argument("--r", type=int, required=True)
    q.add_argument("--eta-s", dest="eta_s", required=True)
    q.add_argument("--eps", type=float, required=True)
    q.set_defaults(func=_cmd_bohr_spread)

    inc = sub.add_parser("increment", help="density increment engine")
    isub = inc.add_subparsers(dest="sub", required=True)
    q = isub.add_parser("run", parents=[common])
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--set", required=True)
    q.add_argument("--r", type=int, required=True)
    q.add_argument("--s", type=int, required=True)
    q.add_argument("--t", type=int, required=True)
    q.add_argument("--eps", type=float, required=True)
    q.add_argument("--trace", help="write the step-by-step trace here")
    q.set_defaults(func=_cmd_increment_run)

    nof = sub.add_parser("nof", help="number-on-forehead protocols")
    nsub = nof.add_subparsers(dest="sub", required=True)
    q = nsub.add_parser("compile", parents=[common])
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--cornerfree", required=True)
    q.add_argument("--verify", action="store_true",
                   help="force the exhaustive protocol check")
    q.add_argument("--transcripts",
                   help="write protocol transcripts here as JSON lines")
    q.add_argument("--triple", type=int, nargs=3, action="append",
                   metavar=("X", "Y", "Z"),
                   help="specific input triple to transcribe (repeatable)")
    q.set_defaults(func=_cmd_nof_compile)
    q = nsub.add_parser("restrict", parents=[common])
    q.add_argument("--cyl", required=True)
    q.add_argument("--coloring", required=True)
    q.add_argument("--out", help="write the restricted cylinder here")
    q.set_defaults(func=_cmd_nof_restrict)

    q = sub.add_parser("verify", parents=[common],
                       help="run a seeded verification suite")
    q.add_argument("suite", choices=suite_names())
    q.add_argument("--seeds", type=int, required=True)
    q.add_argument("--csv", help="write one delimited row per check here")
    q.set_defaults(func=_cmd_verify)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    t0 = time.monotonic()
    try:
        if args.constants:
            _check_constants_pin(args.constants)
        if getattr(args, "n", None) is not None and args.n < 1:
            raise ValueError("n must be positive")
        report = args.func(args)
    except BudgetExceeded as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 3
    except RuntimeError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 3
    except AssertionError as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, TypeError, OSError,
            json.JSONDecodeError) as exc:
        msg = str(exc)
        if "budget" in msg or "capped" in msg:
            print(f"refused: {msg}", file=sys.stderr)
            return 3
        print(f"error: {msg}", file=sys.stderr)
        return 2

    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"elapsed {time.monotonic() - t0:.3f}s", file=sys.stderr)
    return 0 if _checks_hold(report) else 1


if __name__ == "__main__":
    sys.exit(main())
