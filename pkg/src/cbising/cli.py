"""Experiment driver: verification suites, Monte Carlo runs, report files.

Exit codes: 0 when every selected check passes (or the MC run completes),
1 on any verification failure, 2 on configuration or guard errors.

Configuration comes from a single JSON file (--config) with flags taking
precedence; the effective configuration is echoed into every output
manifest.  The only environment variable honoured is CBISING_OUT, an
output-directory override.  All file writes are atomic.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys

import numpy as np

from .battery import CRITERIA, run_battery
from .contour import verify_lemma_hb
from .exact import (
    GuardError,
    exact_ensemble,
    two_point_probability,
    verify_chessboard,
    verify_lemma_per,
    verify_prop2,
    verify_rp,
    verify_symmetry_identity,
    verify_two_point_bound,
)
from .geometry import GeometryError, ModelGeometry, build_geometry
from .mc import ChainSpec, coexistence_scan, run_chain
from .model import ModelParams, classify_ground_states, theory_constants
from .report import (
    VerificationReport,
    atomic_write_text,
    fmt_float,
    write_reports_csv,
    write_reports_json,
)

VERIFY_CHECKS = ("rp", "chessboard", "prop2", "lemma-per", "lemma-hb",
                 "corollary1", "ground-states", "strip", "two-point")


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--kind", choices=["cellboard", "strip"], default=None)
    p.add_argument("--L1", type=int, default=None)
    p.add_argument("--L2", type=int, default=None)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--J", type=float, default=None)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--beta", action="append", default=None,
                   help="inverse temperature; repeatable or comma-separated")


def _add_common_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", default=None, help="JSON config file; flags override")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory for reports")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--slow", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--c", type=float, default=None, help="contour-counting constant")
    p.add_argument("--trials", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cbising",
                                 description="Cell-board Ising certification toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("verify", help="run one verification suite")
    pv.add_argument("check", choices=VERIFY_CHECKS)
    _add_model_flags(pv)
    _add_common_flags(pv)

    pr = sub.add_parser("run-all", help="run the full certification battery")
    pr.add_argument("--select", default=None,
                    help="comma-separated criterion numbers (default: all)")
    _add_common_flags(pr)

    pm = sub.add_parser("mc", help="Monte Carlo runs and scans")
    msub = pm.add_subparsers(dest="mc_command", required=True)

    mr = msub.add_parser("run", help="run one Metropolis chain")
    _add_model_flags(mr)
    _add_common_flags(mr)
    mr.add_argument("--init", choices=["plus", "minus", "cellboard", "random"],
                    default=None)
    mr.add_argument("--sweeps", type=int, default=None)
    mr.add_argument("--burn-in", type=int, default=None)
    mr.add_argument("--thin", type=int, default=None)
    mr.add_argument("--pin", action="append", default=None,
                    help="t1,t2,+1 or t1,t2,-1; repeatable")
    mr.add_argument("--boundary", choices=["plus", "minus"], default=None)
    mr.add_argument("--track", action="append", default=None, help="t1,t2; repeatable")
    mr.add_argument("--gnuplot", action=argparse.BooleanOptionalAction, default=None,
                    help="also write a whitespace-delimited trace file")

    ms = msub.add_parser("scan", help="coexistence scan over (beta, h) grid")
    _add_model_flags(ms)
    _add_common_flags(ms)
    ms.add_argument("--hs", default=None, help="comma-separated field magnitudes")
    ms.add_argument("--sweeps", type=int, default=None)
    ms.add_argument("--burn-in", type=int, default=None)
    ms.add_argument("--thin", type=int, default=None)
    ms.add_argument("--inits", default=None, help="comma-separated initial states")

    pg = sub.add_parser("geometry", help="geometry utilities")
    gsub = pg.add_subparsers(dest="geo_command", required=True)
    gd = gsub.add_parser("dump", help="print the geometry description as JSON")
    _add_model_flags(gd)
    _add_common_flags(gd)
    return ap


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "kind": "cellboard", "L1": 1, "L2": 1, "L": 1, "N": 2,
    "J": 1.0, "h": 1.0, "beta": [1.0], "seed": 0, "out": None,
    "threads": None, "slow": False, "c": 9.0, "trials": 50,
    "init": "random", "sweeps": 10_000, "burn_in": 1_000, "thin": 1,
    "pin": [], "boundary": None, "track": [], "gnuplot": False,
    "hs": None, "inits": "plus,minus,random", "select": None,
}


def _effective_config(args: argparse.Namespace) -> dict:
    """File values fill unset flags; hard defaults fill the rest."""
    cfg = {}
    path = getattr(args, "config", None)
    if path:
        with open(path) as f:
            cfg = json.load(f)
        if not isinstance(cfg, dict):
            raise ValueError("config file must hold a JSON object")
    eff = {}
    for key, default in _DEFAULTS.items():
        flag = getattr(args, key, None)
        if flag is not None:
            eff[key] = flag
        elif key in cfg:
            eff[key] = cfg[key]
        else:
            eff[key] = default
    if isinstance(eff["beta"], (int, float)):
        eff["beta"] = [float(eff["beta"])]
    else:
        betas = []
        for item in eff["beta"]:
            if isinstance(item, str):
                betas.extend(float(x) for x in item.split(","))
            else:
                betas.append(float(item))
        eff["beta"] = betas
    if eff["out"] is None:
        eff["out"] = os.environ.get("CBISING_OUT")
    return eff


def _geometry_from(eff: dict) -> ModelGeometry:
    return build_geometry(eff["kind"], eff["N"], L1=eff["L1"], L2=eff["L2"],
                          L=eff["L"])


def _params_from(eff: dict, beta: float) -> ModelParams:
    return ModelParams(J=eff["J"], h=eff["h"], beta=beta)


def _maybe_set_threads(eff: dict):
    if eff.get("threads"):
        import numba

        numba.set_num_threads(max(1, int(eff["threads"])))


def _emit(reports: list[VerificationReport], eff: dict, stem: str) -> None:
    for rep in reports:
        print(rep.oneline())
    if eff.get("out"):
        os.makedirs(eff["out"], exist_ok=True)
        echo = {k: v for k, v in eff.items() if v is not None}
        write_reports_json(os.path.join(eff["out"], f"{stem}.json"), reports, echo)
        write_reports_csv(os.path.join(eff["out"], f"{stem}.csv"), reports)
        print(f"wrote {eff['out']}/{stem}.json and .csv", file=sys.stderr)


# ---------------------------------------------------------------------------
# verify dispatch
# ---------------------------------------------------------------------------

def _cmd_verify(args) -> int:
    eff = _effective_config(args)
    _maybe_set_threads(eff)
    check = args.check
    reports: list[VerificationReport] = []

    if check == "strip":
        eff["kind"] = "strip"
        if args.N is None and eff["N"] == _DEFAULTS["N"]:
            eff["N"] = 4
    geom = _geometry_from(eff)

    if check == "rp":
        for beta in eff["beta"]:
            ens = exact_ensemble(geom, _params_from(eff, beta))
            for plane in geom.planes():
                rep = verify_rp(ens, plane)
                rep.name = f"beta={beta}:{rep.name}"
                reports.append(rep)
    elif check == "chessboard":
        rng = np.random.default_rng(eff["seed"])
        from .battery import _random_assignments

        for beta in eff["beta"]:
            ens = exact_ensemble(geom, _params_from(eff, beta))
            for k in range(eff["trials"]):
                rep = verify_chessboard(ens, _random_assignments(geom, rng))
                rep.name = f"beta={beta},trial={k}:{rep.name}"
                reports.append(rep)
    elif check == "prop2":
        for beta in eff["beta"]:
            rep = verify_prop2(exact_ensemble(geom, _params_from(eff, beta)),
                               c=eff["c"])
            rep.name = f"beta={beta}:{rep.name}"
            reports.append(rep)
    elif check == "lemma-per":
        rng = np.random.default_rng(eff["seed"])
        params = _params_from(eff, eff["beta"][0])
        nb = geom.n_block_sites
        patterns = (range(1 << nb) if nb <= 10
                    else (int(rng.integers(0, 1 << nb)) for _ in range(eff["trials"])))
        worst = None
        for pat in patterns:
            rep = verify_lemma_per(geom, params, pat)
            if worst is None or abs(rep.lhs - rep.rhs) > abs(worst.lhs - worst.rhs):
                worst = rep
            if not rep.verdict:
                reports.append(rep)
        reports.append(worst)
    elif check == "lemma-hb":
        params = _params_from(eff, eff["beta"][0])
        reports.append(verify_lemma_hb(geom.sub_torus_2x2(), params))
    elif check == "corollary1":
        from .variants import verify_corollary1

        reports.append(verify_corollary1(geom, eff["J"], eff["h"]))
    elif check == "ground-states":
        params = _params_from(eff, 0.0)
        tc = theory_constants(geom.sub_torus_2x2(), params, c=eff["c"])
        got = classify_ground_states(geom.sub_torus_2x2(), params)
        if eff["h"] < tc.threshold:
            expect = "two_symmetric"
        elif eff["h"] > tc.threshold:
            expect = "field_aligned"
        else:
            expect = "degenerate"
        reports.append(VerificationReport(
            name="ground_states", inputs={"geometry": geom.to_json_dict(),
                                          "params": params.to_json_dict()},
            lhs=got.min_energy, rhs=tc.threshold, tolerance=0.0,
            verdict=got.label == expect, seconds=0.0,
            details={"expected": expect, "got": got.to_json_dict(),
                     "theory": tc.to_json_dict()}))
    elif check == "strip":
        from .variants import verify_strip_model

        for beta in eff["beta"]:
            rep = verify_strip_model(geom, _params_from(eff, beta),
                                     seed=eff["seed"], c=eff["c"])
            rep.name = f"beta={beta}:{rep.name}"
            reports.append(rep)
    elif check == "two-point":
        s, t = (0, 0), (geom.W // 2, geom.H // 2)
        vals = []
        for beta in sorted(eff["beta"]):
            ens = exact_ensemble(geom, _params_from(eff, beta))
            vals.append(two_point_probability(ens, s, t))
        mono = all(vals[i + 1] <= vals[i] * (1 + 1e-12) for i in range(len(vals) - 1))
        reports.append(VerificationReport(
            name="two_point_monotone", inputs={"geometry": geom.to_json_dict()},
            lhs=max(vals), rhs=vals[0] if vals else 0.0, tolerance=1e-12,
            verdict=mono, seconds=0.0,
            details={"betas": sorted(eff["beta"]), "values": vals}))
        ens = exact_ensemble(geom, _params_from(eff, max(eff["beta"])))
        reports.append(verify_two_point_bound(ens, s, t, c=eff["c"]))

    _emit(reports, eff, f"verify_{check.replace('-', '_')}")
    return 0 if all(r.passed for r in reports) else 1


def _cmd_run_all(args) -> int:
    eff = _effective_config(args)
    _maybe_set_threads(eff)
    select = None
    if eff.get("select"):
        select = [int(x) for x in str(eff["select"]).split(",")]
        bad = [i for i in select if i not in CRITERIA]
        if bad:
            raise ValueError(f"unknown criteria {bad}; valid: {sorted(CRITERIA)}")
    reports = run_battery(select=select, seed=eff["seed"], slow=bool(eff["slow"]),
                          progress=print)
    if eff.get("out"):
        os.makedirs(eff["out"], exist_ok=True)
        echo = {k: v for k, v in eff.items() if v is not None}
        write_reports_json(os.path.join(eff["out"], "battery.json"), reports, echo)
        write_reports_csv(os.path.join(eff["out"], "battery.csv"), reports)
        print(f"wrote {eff['out']}/battery.json and .csv", file=sys.stderr)
    return 0 if all(r.passed for r in reports) else 1


# ---------------------------------------------------------------------------
# mc dispatch
# ---------------------------------------------------------------------------

def _parse_pins(items) -> tuple:
    pins = []
    for item in items or ():
        t1, t2, s = (x.strip() for x in str(item).split(","))
        pins.append((int(t1), int(t2), int(s)))
    return tuple(pins)


def _parse_sites(items) -> tuple:
    sites = []
    for item in items or ():
        t1, t2 = (x.strip() for x in str(item).split(","))
        sites.append((int(t1), int(t2)))
    return tuple(sites)


def _manifest(eff: dict, extra: dict) -> str:
    doc = {k: v for k, v in eff.items() if v is not None}
    doc.update(extra)
    blob = json.dumps(doc, sort_keys=True)
    doc["config_sha256"] = hashlib.sha256(blob.encode()).hexdigest()
    return json.dumps(doc, indent=2) + "\n"


def _cmd_mc_run(args) -> int:
    eff = _effective_config(args)
    _maybe_set_threads(eff)
    geom = _geometry_from(eff)
    params = _params_from(eff, eff["beta"][0])
    spec = ChainSpec(geom, params, sweeps=eff["sweeps"], init=eff["init"],
                     burn_in=eff["burn_in"], thin=eff["thin"], seed=eff["seed"],
                     pinned=_parse_pins(eff["pin"]), boundary=eff["boundary"],
                     track_sites=_parse_sites(eff["track"]))
    trace = run_chain(spec)
    from .mc import mean_with_error

    m, mse, mtau = mean_with_error(trace.m)
    e, ese, _ = mean_with_error(trace.energy)
    print(f"samples={trace.n_samples}  <m>={m:.6f}+-{mse:.6f} (tau={mtau:.1f})  "
          f"<H>={e:.4f}+-{ese:.4f}  ({trace.seconds:.2f}s)")
    if eff.get("out"):
        os.makedirs(eff["out"], exist_ok=True)
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["sweep", "m", "H", "bad_fraction"])
        for k in range(trace.n_samples):
            sweep = spec.burn_in + spec.thin - 1 + k * spec.thin
            w.writerow([sweep, fmt_float(trace.m[k]), fmt_float(trace.energy[k]),
                        fmt_float(trace.bad_fraction[k])])
        atomic_write_text(os.path.join(eff["out"], "trace.csv"), buf.getvalue())
        if eff.get("gnuplot"):
            lines = ["# sweep m H bad_fraction"]
            for k in range(trace.n_samples):
                sweep = spec.burn_in + spec.thin - 1 + k * spec.thin
                lines.append(f"{sweep} {fmt_float(trace.m[k])} "
                             f"{fmt_float(trace.energy[k])} "
                             f"{fmt_float(trace.bad_fraction[k])}")
            atomic_write_text(os.path.join(eff["out"], "trace.dat"),
                              "\n".join(lines) + "\n")
        atomic_write_text(os.path.join(eff["out"], "manifest.json"),
                          _manifest(eff, {"chain": spec.to_json_dict()}))
        print(f"wrote {eff['out']}/trace.csv and manifest.json", file=sys.stderr)
    return 0


def _cmd_mc_scan(args) -> int:
    eff = _effective_config(args)
    _maybe_set_threads(eff)
    geom = _geometry_from(eff)
    hs = ([float(x) for x in str(eff["hs"]).split(",")] if eff["hs"]
          else [eff["h"]])
    points = [(beta, h) for beta in eff["beta"] for h in hs]
    inits = tuple(str(eff["inits"]).split(","))
    result = coexistence_scan(geom, points, sweeps=eff["sweeps"],
                              burn_in=eff["burn_in"], thin=eff["thin"],
                              seed=eff["seed"], inits=inits)
    for s in result["summaries"]:
        print(f"beta={s['beta']:g} h={s['h']:g}  dip_ratio={s['dip_ratio']:.3f}  "
              f"init_gap={s['init_gap']:.4f} (max se {s['max_se']:.4f})")
    if eff.get("out"):
        os.makedirs(eff["out"], exist_ok=True)
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["beta", "h", "init", "mean_m", "se_m", "tau_m",
                    "mean_H", "se_H", "n_samples"])
        for row in result["rows"]:
            w.writerow([row["beta"], row["h"], row["init"],
                        fmt_float(row["mean_m"]), fmt_float(row["se_m"]),
                        fmt_float(row["tau_m"]), fmt_float(row["mean_H"]),
                        fmt_float(row["se_H"]), row["n_samples"]])
        atomic_write_text(os.path.join(eff["out"], "scan.csv"), buf.getvalue())
        atomic_write_text(os.path.join(eff["out"], "manifest.json"),
                          _manifest(eff, {"scan": result["spec"],
                                          "summaries": result["summaries"]}))
        print(f"wrote {eff['out']}/scan.csv and manifest.json", file=sys.stderr)
    return 0


def _cmd_geometry_dump(args) -> int:
    eff = _effective_config(args)
    geom = _geometry_from(eff)
    doc = geom.to_json_dict()
    doc["block_sites"] = geom.n_block_sites
    doc["n_blocks"] = geom.n_blocks
    doc["double_kinds"] = list(geom.double_kinds())
    doc["planes"] = [{"axis": p.axis, "offset": p.offset, "through": p.through}
                     for p in geom.planes()]
    print(json.dumps(doc, indent=2))
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "run-all":
            return _cmd_run_all(args)
        if args.command == "mc":
            if args.mc_command == "run":
                return _cmd_mc_run(args)
            return _cmd_mc_scan(args)
        if args.command == "geometry":
            return _cmd_geometry_dump(args)
        raise ValueError(f"unknown command {args.command!r}")
    except (GeometryError, GuardError, ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
