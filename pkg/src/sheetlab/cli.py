"""Command line front end: simulate, verify, dimension, report."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import fracdim, scale
from .config import ARTIFACT_VERSION, ExperimentConfig, replicate_seed
from .homogeneous import ValidationFailed, validate_psi
from .linalg import InvalidInput
from .polar import verify_growth_bounds
from .synthesis import (FormatError, GridSpec, read_field, set_threads, synthesize,
                        write_field)

CHECKS = ("scaling", "tau", "sigma", "psi")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "pass" if v else "fail"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def write_csv(path: Path, header: list, rows: list) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.write_bytes(buf.getvalue().encode())
    return path


def _threads(n):
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    set_threads(n)
    return threadpool_limits(limits=int(n))


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seed", None) is not None:
        cfg.seed = int(args.seed)
    if getattr(args, "replicates", None) is not None:
        cfg.replicates = int(args.replicates)
    if getattr(args, "tolerance", None) is not None:
        cfg.tolerance = float(args.tolerance)
    return cfg


def _grid(cfg: ExperimentConfig) -> GridSpec:
    g = cfg.grid
    return GridSpec(tuple(g["counts"]), g.get("lo", 0.0), g.get("hi", 1.0))


def _provenance(cfg: ExperimentConfig) -> list:
    return [cfg.hash, cfg.seed, ARTIFACT_VERSION]


PROV = ["config_hash", "master_seed", "version"]


# ---------------------------------------------------------------- commands

def cmd_simulate(cfg: ExperimentConfig, out: Path) -> list[Path]:
    spec = cfg.sheet_spec()
    grid = _grid(cfg)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for r in range(cfg.replicates):
        seed = replicate_seed(cfg.seed, r)
        real = synthesize(spec, grid, seed=seed, **cfg.synthesis.as_kwargs(spec.alpha))
        p = out / f"field_{cfg.hash}_r{r:03d}.oss"
        write_field(p, real, extra={"config_hash": cfg.hash, "master_seed": cfg.seed,
                                    "replicate": r, "artifact_version": ARTIFACT_VERSION})
        paths.append(p)
    return paths


def cmd_verify(cfg: ExperimentConfig, out: Path, which=CHECKS) -> tuple[bool, list[Path]]:
    spec = scale.SheetSpec.from_dict(cfg.sheet, enforce_existence=False)
    if not scale.existence_check(spec).ok:
        cfg.sheet_spec()   # raises with the explanation
    out.mkdir(parents=True, exist_ok=True)
    ok_all, paths = True, []
    v = cfg.verify
    if "psi" in which:
        rows, ok = [], True
        for j in range(spec.m):
            rep = validate_psi(spec.psi[j], spec.fctx[j], trials=v.samples // 10,
                               seed=cfg.seed + j, raise_on_fail=False)
            rows.append(_provenance(cfg) + [j, spec.psi[j].kind, rep.trials,
                                            rep.worst_rel_error, rep.min_value, rep.ok,
                                            "" if rep.ok else json.dumps(rep.witness)])
            ok &= rep.ok
        paths.append(write_csv(out / f"verify_psi_{cfg.hash}.csv",
                               PROV + ["block", "kind", "trials", "worst_rel_error",
                                       "min_value", "verdict", "witness"], rows))
        ok_all &= ok
    if "tau" in which:
        rows, ok = [], True
        for j in range(spec.m):
            rep = verify_growth_bounds(spec.xctx[j], samples=v.samples, seed=cfg.seed + j)
            rows.append(_provenance(cfg) + [j, rep.eps, rep.K1, rep.K2, rep.K3, rep.K4,
                                            rep.n_inner, rep.n_outer, rep.ok])
            ok &= rep.ok
        paths.append(write_csv(out / f"verify_tau_{cfg.hash}.csv",
                               PROV + ["block", "eps", "K1", "K2", "K3", "K4",
                                       "n_inner", "n_outer", "verdict"], rows))
        ok_all &= ok
    if "scaling" in which:
        rep = scale.verify_scaling_laws(spec, trials=v.trials, seed=cfg.seed)
        rows = [_provenance(cfg) + [r.check, r.block, r.c, r.point, r.lhs, r.rhs, r.rel_err,
                                    r.tol, r.passed] for r in rep.rows]
        paths.append(write_csv(out / f"verify_scaling_{cfg.hash}.csv",
                               PROV + ["check", "block", "c", "point", "lhs", "rhs",
                                       "rel_err", "tol", "verdict"], rows))
        ok_all &= rep.ok
    if "sigma" in which:
        rep = scale.sigma_lower_bound_scan(spec, n_pairs=v.pairs, seed=cfg.seed)
        rows = [_provenance(cfg) + [rep.block, rep.n_pairs, rep.min_ratio, rep.median_ratio,
                                    rep.argmin[0], rep.argmin[1], rep.ok]]
        paths.append(write_csv(out / f"verify_sigma_{cfg.hash}.csv",
                               PROV + ["block", "pairs", "min_ratio", "median_ratio",
                                       "argmin_x", "argmin_y", "verdict"], rows))
        ok_all &= rep.ok
    return ok_all, paths


def cmd_dimension(cfg: ExperimentConfig, out: Path):
    spec = cfg.sheet_spec()
    grid = _grid(cfg)
    if cfg.replicates < 1:
        raise InvalidInput("need at least one replicate")
    out.mkdir(parents=True, exist_ok=True)
    est = cfg.estimator
    l_range = None if est.l_range is None else tuple(est.l_range)
    t0 = time.perf_counter()
    per, counts = [], []
    for r in range(cfg.replicates):
        seed = replicate_seed(cfg.seed, r)
        real = synthesize(spec, grid, seed=seed, **cfg.synthesis.as_kwargs(spec.alpha))
        dim = fracdim.box_dimension(real, l_range, est.vertical_unit)
        hol = fracdim.holder_exponent(real, l_range)
        per.append((r, seed, dim, hol))
        for lvl, cnt in dim.counts.items():
            counts.append(_provenance(cfg) + [r, lvl, cnt, float(np.log2(cnt))])
    dims = np.array([p[2].value for p in per])
    hols = np.array([p[3].value for p in per])
    target = spec.dimension_target          # recomputed from the spectral data
    htarget = spec.critical_exponent
    tol = cfg.default_tolerance(spec)
    se = float(dims.std(ddof=1) / np.sqrt(dims.size)) if dims.size > 1 else float(per[0][2].stderr)
    hse = float(hols.std(ddof=1) / np.sqrt(hols.size)) if hols.size > 1 else float(per[0][3].stderr)
    passed = abs(dims.mean() - target) <= tol
    h_passed = abs(hols.mean() - htarget) <= 0.1
    write_csv(out / f"dimension_{cfg.hash}.csv",
              PROV + ["replicate", "seed", "dimension", "stderr", "r2", "clamped",
                      "l_min", "l_max", "vertical_unit", "holder", "holder_stderr"],
              [_provenance(cfg) + [r, s, d.value, d.stderr, d.r2, str(d.clamped),
                                   d.scale_range[0], d.scale_range[1], d.vertical_unit,
                                   h.value, h.stderr] for r, s, d, h in per])
    write_csv(out / f"counts_{cfg.hash}.csv",
              PROV + ["replicate", "level", "count", "log2_count"], counts)
    summary = _provenance(cfg) + [cfg.name, spec.d, cfg.replicates, target, float(dims.mean()),
                                  se, tol, passed, htarget, float(hols.mean()), hse, h_passed]
    write_csv(out / f"summary_{cfg.hash}.csv", SUMMARY_HEADER, [summary])
    # wall clock lives outside the CSVs so that reruns stay byte-identical
    (out / f"timing_{cfg.hash}.json").write_text(
        json.dumps({"config_hash": cfg.hash, "wall_clock_s": time.perf_counter() - t0}))
    return {"target": target, "mean": float(dims.mean()), "stderr": se, "tolerance": tol,
            "passed": bool(passed), "holder_target": htarget, "holder_mean": float(hols.mean()),
            "holder_passed": bool(h_passed)}


SUMMARY_HEADER = PROV + ["name", "d", "replicates", "target", "estimate", "stderr",
                         "tolerance", "verdict", "holder_target", "holder_estimate",
                         "holder_stderr", "holder_verdict"]


class ReportError(RuntimeError):
    pass


def cmd_report(run_dir: Path) -> tuple[str, list]:
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ReportError(f"{run_dir}: not a directory")
    for p in sorted(run_dir.glob("*.oss")):
        try:
            _, head, meta = read_field(p)
        except FormatError as exc:
            raise ReportError(str(exc)) from exc
        if meta is not None and str(meta.get("artifact_version", ARTIFACT_VERSION)) != ARTIFACT_VERSION:
            raise ReportError(f"{p}: artifact version {meta.get('artifact_version')} "
                              f"differs from {ARTIFACT_VERSION}")
    rows = []
    for p in sorted(run_dir.glob("summary_*.csv")):
        with p.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != SUMMARY_HEADER:
                raise ReportError(f"{p}: unexpected columns {header}")
            rows.extend(reader)
    versions = {r[2] for r in rows}
    if len(versions) > 1:
        raise ReportError(f"refusing to merge mixed artifact versions {sorted(versions)}")
    rows.sort(key=lambda r: (r[0], r[1]))
    if rows:
        write_csv(run_dir / "report.csv", SUMMARY_HEADER, rows)
    lines = [f"{'config':16s}  {'target':>7s}  {'estimate':>18s}  verdict"]
    for r in rows:
        est = f"{float(r[7]):.3f} +- {float(r[8]):.3f}"
        lines.append(f"{r[0]:16s}  {float(r[6]):7.3f}  {est:>18s}  {r[10]}")
    lines.append("box dimension estimates; the Hausdorff dimension of the graph equals it a.s.")
    return "\n".join(lines), rows


# ---------------------------------------------------------------- argparse

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sheetlab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, type=Path)
        if out:
            p.add_argument("--out", required=True, type=Path)
        p.add_argument("--seed", type=int)
        p.add_argument("--replicates", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--tolerance", type=float)

    common(sub.add_parser("simulate", help="write OSS1 field dumps"))
    pv = sub.add_parser("verify", help="scaling / tau / sigma / psi checks")
    common(pv)
    pv.add_argument("--which", nargs="+", choices=CHECKS + ("all",), default=["all"])
    common(sub.add_parser("dimension", help="box dimension and Hoelder experiment"))
    pr = sub.add_parser("report", help="merge run summaries")
    pr.add_argument("run_dir", type=Path)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            text, _ = cmd_report(args.run_dir)
            print(text)
            return 0
        cfg = _apply_overrides(ExperimentConfig.load(args.config), args)
        with _threads(args.threads):
            if args.command == "simulate":
                for p in cmd_simulate(cfg, args.out):
                    print(p)
                return 0
            if args.command == "verify":
                which = CHECKS if "all" in args.which else tuple(args.which)
                ok, paths = cmd_verify(cfg, args.out, which)
                for p in paths:
                    print(p)
                print("PASS" if ok else "FAIL")
                return 0 if ok else 1
            res = cmd_dimension(cfg, args.out)
            print(json.dumps(res, indent=1))
            return 0 if res["passed"] else 1
    except (InvalidInput, ValidationFailed, ReportError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
