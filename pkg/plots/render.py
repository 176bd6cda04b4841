#!/usr/bin/env python3
"""Render figures from the CSV tables the fkpplab CLI writes.

The plotting side is deliberately decoupled from the numerics: the only
contract between the two components is the set of CSV schemas below, so
every figure can be regenerated from archived tables long after the runs
that produced them.  Rendering never touches the inputs and the output
bytes are deterministic (Agg backend, pinned SVG hash salt, build epoch
honoured for PDF timestamps), so re-rendering an archived table must
reproduce the committed image exactly.

Usage:
    plots/render.py --kind KIND --in table.csv [--in more.csv] --out fig.png

Kinds and the tables they consume:
    phase-diagram   theory.csv (dense branches) + speed_scan.csv (points)
    fronts          fronts.csv from a simulate run
    bridge-tails    bridge_tails.csv from a bridge-check run
    snapshot        one or more snapshot_t*.csv field dumps
    laplace-rate    bridge_laplace.csv from a bridge-check run
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "fkpplab-plots"
os.environ.setdefault("SOURCE_DATE_EPOCH", "0")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be fixed first)


class SchemaError(ValueError):
    """Input table header does not match what the figure kind consumes."""


# Exact headers of the producer's tables.  Order matters: the producer
# writes these columns in this order and a reordered file is treated as
# a different (unknown) table.
TABLE_SCHEMAS: dict[str, list[str]] = {
    "theory": ["gamma_t", "beta_t", "beta_star", "branch1", "branch2",
               "u_c_regime", "u_c_as_stated"],
    "speed_scan": ["beta_t", "u_meas_coupled", "u_meas_flat",
                   "branch1", "branch2", "u_c_regime"],
    "fronts": ["t", "x_front_v", "x_front_w", "clamp_events"],
    "snapshot": ["x", "v", "w"],
    "bridge_tails": ["s", "p_exact", "p_asym", "p_mc", "mc_stderr"],
    "bridge_laplace": ["lambda", "log_laplace_mc", "rate_theory"],
}

# Figure kind -> (table kinds consumed, whether extra tables of the last
# kind may repeat).  Only snapshot overlays accept repeats.
KIND_INPUTS: dict[str, tuple[tuple[str, ...], bool]] = {
    "phase-diagram": (("theory", "speed_scan"), False),
    "fronts": (("fronts",), False),
    "bridge-tails": (("bridge_tails",), False),
    "snapshot": (("snapshot",), True),
    "laplace-rate": (("bridge_laplace",), False),
}

_SAVE_METADATA = {
    ".png": None,
    ".svg": {"Date": None},
    ".pdf": None,
}


@dataclass(frozen=True)
class PlotSpec:
    """One figure request: input tables, figure kind, output path, style."""

    csv_paths: tuple[Path, ...]
    kind: str
    out_path: Path
    style: Mapping[str, str] = field(default_factory=dict)


def load_table(path: Path) -> tuple[list[str], dict[str, np.ndarray]]:
    """Read a CSV produced by the fkpplab CLI into named float columns."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row")
        rows = [[float(cell) for cell in row] for row in reader if row]
    data = np.asarray(rows, dtype=float) if rows else np.empty((0, len(header)))
    if rows and data.shape[1] != len(header):
        raise SchemaError(f"{path}: rows have {data.shape[1]} fields, "
                          f"header has {len(header)}")
    return header, {name: data[:, j] for j, name in enumerate(header)}


def check_schema(path: Path, header: list[str], table_kind: str) -> None:
    """Raise SchemaError with a column diff when the header is wrong."""
    expected = TABLE_SCHEMAS[table_kind]
    if header == expected:
        return
    missing = [c for c in expected if c not in header]
    unexpected = [c for c in header if c not in expected]
    parts = [f"{path}: header does not match the '{table_kind}' table",
             f"expected columns {expected}"]
    if missing:
        parts.append(f"missing {missing}")
    if unexpected:
        parts.append(f"unexpected {unexpected}")
    if not missing and not unexpected:
        parts.append(f"column order differs, found {header}")
    raise SchemaError("; ".join(parts))


def classify_table(header: list[str]) -> str | None:
    """Name the table kind whose schema matches the header, if any."""
    for name, cols in TABLE_SCHEMAS.items():
        if header == cols:
            return name
    return None


def _style_float(style: Mapping[str, str], key: str, default: float) -> float:
    if key not in style:
        return default
    try:
        return float(style[key])
    except ValueError:
        raise SchemaError(f"style option {key}={style[key]!r} is not a number")


def front_crossing(x: np.ndarray, f: np.ndarray, level: float) -> float:
    """Rightmost grid position where the field still reaches the level."""
    above = np.nonzero(f >= level)[0]
    return float(x[above[-1]]) if above.size else math.nan


# ---------------------------------------------------------------------------
# figure kinds
# ---------------------------------------------------------------------------

def _draw_phase_diagram(ax, tables, style) -> None:
    theory = tables["theory"]
    scan = tables["speed_scan"]
    gammas = np.unique(theory["gamma_t"])
    if gammas.size != 1:
        raise SchemaError("phase-diagram needs a single-gamma theory table; "
                          f"found gamma_t values {list(gammas)}")
    gamma_t = float(gammas[0])
    beta_star = float(theory["beta_star"][0])
    order = np.argsort(theory["beta_t"])
    b = theory["beta_t"][order]
    ax.plot(b, theory["branch1"][order], "-", color="C0",
            label="branch1 (coupled tip)")
    ax.plot(b, theory["branch2"][order], "--", color="C1",
            label="branch2 (flat background)")
    ax.axvline(beta_star, color="0.4", linestyle=":",
               label=f"beta_star = {beta_star:.3f}")

    # The scan table carries no per-point error column, so the bars show
    # the nominal 3 percent tolerance of the front-speed fit.
    rel = _style_float(style, "speed_tol", 0.03)
    for col, fmt, label in (("u_meas_coupled", "o", "measured, coupled"),
                            ("u_meas_flat", "s", "measured, flat")):
        u = scan[col]
        ok = np.isfinite(u)
        if ok.any():
            ax.errorbar(scan["beta_t"][ok], u[ok], yerr=rel * u[ok],
                        fmt=fmt, markersize=5, capsize=3, linestyle="none",
                        label=label)
    ax.set_xlabel("beta_t")
    ax.set_ylabel("front speed")
    ax.set_title(style.get("title",
                           f"invasion speed vs beta_t at gamma_t = {gamma_t:g}"))
    ax.legend()


def _draw_fronts(ax, tables, style) -> None:
    tab = tables["fronts"]
    t = tab["t"]
    for col, fmt, label in (("x_front_v", "-", "v front"),
                            ("x_front_w", "-", "w front")):
        x = tab[col]
        ok = np.isfinite(x)
        if not ok.any():
            continue
        ax.plot(t[ok], x[ok], fmt, label=label)
        fit = _log_delay_fit(t[ok], x[ok])
        if fit is not None:
            u, c, b = fit
            ts = t[ok][t[ok] > 0]
            ax.plot(ts, u * ts + c * np.log(ts) + b, ":", color="0.3",
                    label=f"{label} fit: u = {u:.4f}, c_log = {c:.2f}")
    ax.set_xlabel("t")
    ax.set_ylabel("front position")
    ax.set_title(style.get("title", "front trajectories"))
    ax.legend()


def _log_delay_fit(t: np.ndarray, x: np.ndarray):
    """Least-squares x ~ u t + c ln t + b over the second half of the run."""
    keep = (t >= 0.5 * t[-1]) & (t > 0)
    if keep.sum() < 8:
        return None
    tt = t[keep]
    design = np.column_stack([tt, np.log(tt), np.ones_like(tt)])
    coef, *_ = np.linalg.lstsq(design, x[keep], rcond=None)
    return tuple(float(c) for c in coef)


def _draw_bridge_tails(ax, tables, style) -> None:
    tab = tables["bridge_tails"]
    s = tab["s"]
    ax.semilogy(s, tab["p_exact"], "-", color="C0", label="exact quadrature")
    ax.semilogy(s, tab["p_asym"], "-.", color="C1", label="large-t asymptotic")
    p = tab["p_mc"]
    err = tab["mc_stderr"]
    ok = p > 0
    if ok.any():
        # keep the lower bar above zero so the log axis stays finite
        lo = np.minimum(err[ok], 0.999 * p[ok])
        ax.errorbar(s[ok], p[ok], yerr=[lo, err[ok]], fmt="o", color="C2",
                    markersize=4, capsize=3, linestyle="none",
                    label="Monte Carlo")
    ax.set_xlabel("occupation fraction s")
    ax.set_ylabel("P(occupation above line > s t)")
    ax.set_title(style.get("title", "occupation tail above a moving line"))
    ax.legend()


def _draw_snapshot(ax, tables, style, labels) -> None:
    level = _style_float(style, "level", 0.5)
    for i, (tab, label) in enumerate(zip(tables, labels)):
        color = f"C{i % 10}"
        ax.plot(tab["x"], tab["v"], "-", color=color, label=f"v {label}")
        ax.plot(tab["x"], tab["w"], "--", color=color, label=f"w {label}")
        xv = front_crossing(tab["x"], tab["v"], level)
        xw = front_crossing(tab["x"], tab["w"], level * tab["w"].max())
        for xf in (xv, xw):
            if math.isfinite(xf):
                ax.axvline(xf, color=color, linestyle=":", linewidth=0.8)
    ax.set_xlabel("x")
    ax.set_ylabel("field value")
    ax.set_title(style.get("title", "field snapshot"))
    ax.legend()


def _draw_laplace_rate(ax, tables, style) -> None:
    tab = tables["bridge_laplace"]
    lam = tab["lambda"]
    rate = tab["rate_theory"]
    t_run = style.get("t")
    if t_run is not None:
        # normalise the Monte Carlo transform by the run length so both
        # series live on the growth-rate axis
        t_val = _style_float(style, "t", math.nan)
        ax.plot(lam, tab["log_laplace_mc"] / t_val, "o", color="C0",
                label=f"log E exp(lambda U) / t,  t = {t_val:g}")
        ok = np.isfinite(rate)
        ax.plot(lam[ok], rate[ok], "-", color="C1", label="theory rate")
        ax.set_ylabel("growth rate")
        ax.legend()
    else:
        ax.plot(lam, tab["log_laplace_mc"], "o-", color="C0",
                label="log E exp(lambda U), Monte Carlo")
        ax.set_ylabel("log Laplace transform", color="C0")
        twin = ax.twinx()
        ok = np.isfinite(rate)
        twin.plot(lam[ok], rate[ok], "--", color="C1", label="theory rate")
        twin.set_ylabel("growth rate (theory)", color="C1")
    ax.set_xlabel("lambda")
    ax.set_title(style.get("title", "occupation Laplace transform"))


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def _collect_inputs(spec: PlotSpec) -> dict:
    """Load and schema-check the inputs a figure kind consumes.

    Tables are matched to their role by header, not by argument order,
    so `--in theory.csv --in speed_scan.csv` and the reverse both work.
    """
    wanted, repeats = KIND_INPUTS[spec.kind]
    loaded = []
    for path in spec.csv_paths:
        header, cols = load_table(Path(path))
        loaded.append((Path(path), header, cols))

    if repeats:
        kind = wanted[0]
        for path, header, _ in loaded:
            check_schema(path, header, kind)
        return {"tables": [cols for _, _, cols in loaded],
                "labels": [p.stem for p, _, _ in loaded]}

    if len(loaded) != len(wanted):
        raise SchemaError(
            f"{spec.kind} needs {len(wanted)} input table(s) "
            f"({', '.join(wanted)}); got {len(loaded)}")
    by_kind: dict[str, dict] = {}
    for path, header, cols in loaded:
        kind = classify_table(header)
        if kind not in wanted:
            check_schema(path, header, wanted[0])  # raises with the diff
        if kind in by_kind:
            raise SchemaError(f"{path}: duplicate '{kind}' table for "
                              f"{spec.kind}")
        by_kind[kind] = cols
    for kind in wanted:
        if kind not in by_kind:
            raise SchemaError(f"{spec.kind} is missing a '{kind}' table "
                              f"(columns {TABLE_SCHEMAS[kind]})")
    return {"tables": by_kind}


def render(spec: PlotSpec) -> Path:
    """Draw the requested figure and return the written image path."""
    if spec.kind not in KIND_INPUTS:
        raise SchemaError(f"unknown figure kind '{spec.kind}'; "
                          f"pick from {sorted(KIND_INPUTS)}")
    inputs = _collect_inputs(spec)

    dpi = _style_float(spec.style, "dpi", 150.0)
    width = _style_float(spec.style, "width", 6.4)
    height = _style_float(spec.style, "height", 4.4)
    fig, ax = plt.subplots(figsize=(width, height), dpi=dpi)
    try:
        if spec.kind == "phase-diagram":
            _draw_phase_diagram(ax, inputs["tables"], spec.style)
        elif spec.kind == "fronts":
            _draw_fronts(ax, inputs["tables"], spec.style)
        elif spec.kind == "bridge-tails":
            _draw_bridge_tails(ax, inputs["tables"], spec.style)
        elif spec.kind == "snapshot":
            _draw_snapshot(ax, inputs["tables"], spec.style,
                           inputs["labels"])
        else:
            _draw_laplace_rate(ax, inputs["tables"], spec.style)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        out = Path(spec.out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, metadata=_SAVE_METADATA.get(out.suffix.lower()))
    finally:
        plt.close(fig)
    return out


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def _parse_style(pairs: list[str]) -> dict[str, str]:
    style = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise SchemaError(f"style option '{pair}' is not KEY=VALUE")
        style[key] = value
    return style


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render.py",
        description="Render a figure from fkpplab CSV tables.")
    parser.add_argument("--kind", required=True, choices=sorted(KIND_INPUTS))
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="CSV", help="input table (repeatable)")
    parser.add_argument("--out", required=True, metavar="IMG",
                        help="output image path (.png, .svg or .pdf)")
    parser.add_argument("--style", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="style option, e.g. title=..., dpi=200, t=5")
    args = parser.parse_args(argv)

    try:
        spec = PlotSpec(csv_paths=tuple(Path(p) for p in args.inputs),
                        kind=args.kind, out_path=Path(args.out),
                        style=_parse_style(args.style))
        out = render(spec)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
