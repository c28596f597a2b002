"""Command-line front end: ``loopcmc build <config>``."""

import argparse
import dataclasses
import json
import logging
import os
import sys
import warnings
from collections import Counter

import numpy as np

from . import cauchy, export, geometry
from .birkhoff import Stratum
from .frame import dalembert_construct, singular_construct
from .loopalg import DetDrift, TailOverflow
from .potentials import ParseError, ValidationError, parse_spec, print_spec
from .tolerances import TOL

log = logging.getLogger("loopcmc")

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


def _setup_logging():
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("loopcmc level=%(levelname)s %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.INFO)
    log.propagate = False


def _grid(text):
    try:
        n, m = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like NxM, got '{text}'") from None
    if n < 2 or m < 2:
        raise argparse.ArgumentTypeError("grid needs at least 2 points per axis")
    return n, m


def build_parser():
    p = argparse.ArgumentParser(prog="loopcmc", description="Timelike CMC surfaces from potentials.")
    sub = p.add_subparsers(dest="command", required=True)
    b = sub.add_parser("build", help="construct a surface from a config file")
    b.add_argument("config")
    b.add_argument("--grid", type=_grid, help="sample counts NxM")
    b.add_argument("--lambda", dest="lam", type=float, help="spectral parameter (nonzero real)")
    b.add_argument("--format", choices=("obj", "ply", "csv"), default="obj")
    b.add_argument("--out", default=".")
    b.add_argument("--report", choices=("json",))
    return p


def apply_overrides(spec, grid=None, lam=None):
    if lam is not None:
        if lam == 0:
            raise ValidationError("lambda must be nonzero")
        spec = dataclasses.replace(spec, lam=lam)
    if grid is not None:
        spec = dataclasses.replace(spec, domain=dataclasses.replace(spec.domain, grid=grid))
    return spec


def construct(spec):
    """Run the pipeline matching the spec kind; returns the FrameField."""
    if spec.kind == "pair":
        return dalembert_construct(spec)
    if spec.kind in ("cauchy", "cauchy.characteristic"):
        field = singular_construct(cauchy.to_potential(spec))
        field.spec = spec
        return field
    return singular_construct(spec)


def _finite_max(x):
    x = np.asarray(x, float)
    return float(np.nanmax(x)) if np.any(np.isfinite(x)) else None


def invariant_summary(field, singular):
    big = field.big_cell
    # finite-difference checks are meaningless next to the singular set
    near = singular.copy()
    near[1:] |= singular[:-1]
    near[:-1] |= singular[1:]
    near[:, 1:] |= singular[:, :-1]
    near[:, :-1] |= singular[:, 1:]
    big = big & ~near
    if field.extra.get("fallback") is not None:
        big = big & ~field.extra["fallback"]
    out = {"birkhoff_residual_max": _finite_max(field.residual)}
    if big.any():
        sub = dataclasses.replace(field, fx=np.where(big[..., None], field.fx, np.nan),
                                  fy=np.where(big[..., None], field.fy, np.nan),
                                  normal=np.where(big[..., None], field.normal, np.nan))
        viol = geometry.conformal_violations(sub)
        out["null_coordinate_violation_max"] = viol["null"]
        out["normal_orthogonality_violation_max"] = viol["orthogonal"]
        if field.kind == "pair":
            with np.errstate(invalid="ignore", divide="ignore"):
                hm = geometry.mean_curvature_fd(sub)
            out["cmc_error_max"] = _finite_max(np.abs(hm - field.H))
    rank = geometry.image_rank_ratio(field)
    out["image_rank_ratio_max"] = _finite_max(rank)
    return out


def build_report(field, spec, polylines, singular):
    counts = Counter(Stratum(int(s)).name for s in field.stratum.ravel())
    curves = []
    agree = []
    for nodes, axis, reports in polylines:
        entries = []
        for (i, j), rep in zip(nodes, reports):
            entry = {"index": [int(i), int(j)], "report": rep.to_dict()}
            if spec.kind == "cauchy" and field.a[i] == 0:
                sym = cauchy.predict_type(spec, field.b[j])
                entry["symbolic"] = sym.to_dict()
                agree.append(sym.type == rep.type)
            entries.append(entry)
        curves.append({"axis": int(axis), "points": entries})
    report = {
        "config": print_spec(spec),
        "kind": spec.kind,
        "grid": {"shape": list(field.shape), "cells": dict(sorted(counts.items()))},
        "singular_curves": curves,
        "invariants": invariant_summary(field, singular),
        "tail_mass": field.tail_mass,
        "tolerances": dict(TOL),
        "outputs": [],
    }
    if agree:
        report["classifier_agreement"] = {"compared": len(agree), "agree": int(sum(agree))}
    return report


def run(config_path, grid=None, lam=None, fmt="obj", out=".", report_format=None):
    """Execute one build; returns ``(exit_code, report or None)``."""
    try:
        with open(config_path) as fh:
            text = fh.read()
    except OSError as exc:
        log.error(f"event=io_error path={config_path!r} msg={exc}")
        return EXIT_IO, None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            spec = apply_overrides(parse_spec(text), grid, lam)
            field = construct(spec)
        except (ParseError, ValidationError) as exc:
            log.error(f"event={type(exc).__name__} msg={exc}")
            return EXIT_INVALID, None
        except (TailOverflow, DetDrift) as exc:
            log.error(f"event={type(exc).__name__} msg={exc}")
            return EXIT_NUMERIC, None
    for w in caught:
        log.warning(f"event={w.category.__name__} msg={w.message}")
    polylines = geometry.classify_field(field)
    mask = np.zeros(field.shape, bool)
    for nodes, _, _ in polylines:
        mask[nodes[:, 0], nodes[:, 1]] = True
    report = build_report(field, spec, polylines, mask)
    stem = os.path.splitext(os.path.basename(config_path))[0]
    try:
        os.makedirs(out, exist_ok=True)
        path = export.export_mesh(field, fmt, os.path.join(out, f"{stem}.{fmt}"),
                                  [n for n, _, _ in polylines], mask)
        report["outputs"].append(path)
        if report_format == "json":
            rpath = os.path.join(out, f"{stem}.report.json")
            report["outputs"].append(rpath)
            with open(rpath, "w") as fh:
                json.dump(geometry.jsonable(report), fh, indent=1, allow_nan=False)
    except OSError as exc:
        log.error(f"event=io_error msg={exc}")
        return EXIT_IO, report
    cells = " ".join(f"{k}={v}" for k, v in report["grid"]["cells"].items())
    log.info(f"event=done kind={spec.kind} {cells} singular_points={int(mask.sum())} "
             f"outputs={','.join(report['outputs'])}")
    return EXIT_OK, report


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    code, _ = run(args.config, args.grid, args.lam, args.format, args.out, args.report)
    return code


if __name__ == "__main__":
    sys.exit(main())
