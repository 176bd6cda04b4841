"""Experiment runner: config parsing, experiment registry, CSV emission.

Configs are flat key=value files (blank lines and # comments allowed).  Keys
are validated against the experiment's whitelist with line numbers in every
complaint; model parameters are given either physically (alpha, beta, gamma,
K) or rescaled (gamma_t, beta_t), never both.  Every run
echoes its resolved config (config.resolved, itself a valid config) and a
manifest with the config hash and library versions into the output directory,
so any output can be reproduced from its own paperwork.

Numbers are written in full-precision scientific notation with plain commas
and newline line endings, so identical runs are bitwise-identical files.

Exit codes: 0 ok, 2 config error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, ConstraintError, FkppError
from .model import Grid, PhysicalParams, ScaledParams, rescale
from . import bridge_lab
from . import feynman_kac
from . import pde_solver
from . import speed_theory
from . import travelling_wave

OUTPUT_DIR_ENV = "FKPPLAB_OUTPUT_DIR"

_REQUIRED = object()


# ---------------------------------------------------------------------------
# config schema
# ---------------------------------------------------------------------------

def _float_list(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    return [float(p) for p in text.split(",")]


_COMMON = {
    "experiment": (str, _REQUIRED),
    "seed": (int, 1),
    "output_dir": (str, ""),
}

_PARAM_KEYS = {
    "gamma_t": (float, None),
    "beta_t": (float, None),
    "alpha": (float, None),
    "beta": (float, None),
    "gamma": (float, None),
    "K": (float, None),
}

_GRID_KEYS = {
    "window_len": (float, 400.0),
    "dx": (float, 0.05),
    "cfl": (float, 0.25),
}

_SCHEMAS: dict[str, dict] = {
    "simulate": {
        **_COMMON, **_PARAM_KEYS, **_GRID_KEYS,
        "t_end": (float, 50.0),
        "sample_dt": (float, 0.5),
        "v_init": (str, "wave"),
        "a_offset": (float, 0.0),
        "margin": (float, 60.0),
        "snapshot_times": (_float_list, []),
    },
    "speed-scan": {
        **_COMMON,
        "gamma_t": (float, _REQUIRED),
        "beta_min": (float, _REQUIRED),
        "beta_max": (float, _REQUIRED),
        "beta_steps": (int, _REQUIRED),
        **_GRID_KEYS,
        "t_end": (float, 200.0),
        "sample_dt": (float, 0.5),
    },
    "wave-profile": {
        **_COMMON,
        "tol": (float, 1e-6),
        "half_width": (float, 50.0),
        "dx": (float, 0.05),
    },
    "bridge-check": {
        **_COMMON,
        "t": (float, 5.0),
        "alpha_line": (float, 0.6),
        "K_line": (float, 0.0),
        "s_min": (float, 0.1),
        "s_max": (float, 0.9),
        "s_steps": (int, 9),
        "n_paths": (int, 100_000),
        "n_steps": (int, 2_000),
        "lambdas": (_float_list, []),
    },
    "fk-check": {
        **_COMMON, **_PARAM_KEYS, **_GRID_KEYS,
        "t": (float, 10.0),
        "x_points": (_float_list, []),
        "n_paths": (int, 100_000),
        "n_steps": (int, 2_000),
        "a_offset": (float, 0.0),
        "sample_dt": (float, 0.5),
    },
    "theory": {
        **_COMMON,
        "gammas": (_float_list, _REQUIRED),
        "beta_min": (float, _REQUIRED),
        "beta_max": (float, _REQUIRED),
        "steps": (int, _REQUIRED),
    },
}
_SCHEMAS["flat-baseline"] = _SCHEMAS["simulate"]


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    values: dict
    output_dir: Path
    seed: int

    def __getitem__(self, key):
        return self.values[key]


def parse_config_file(path: str | Path) -> dict[str, tuple[str, int]]:
    """key -> (raw value, line number); duplicate keys rejected."""
    raw: dict[str, tuple[str, int]] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in raw:
            raise ConfigError(
                f"{path}:{lineno}: duplicate key {key!r} (first at line {raw[key][1]})")
        raw[key] = (value.strip(), lineno)
    return raw


def resolve_config(raw: dict[str, tuple[str, int]],
                   source: str = "<config>") -> ExperimentConfig:
    """Type, default, and whitelist the raw keys for their experiment."""
    if "experiment" not in raw:
        raise ConfigError(f"{source}: missing required key 'experiment'")
    experiment = raw["experiment"][0]
    if experiment not in _SCHEMAS:
        raise ConfigError(
            f"{source}:{raw['experiment'][1]}: unknown experiment {experiment!r}; "
            f"pick from {sorted(_SCHEMAS)}")
    schema = _SCHEMAS[experiment]

    for key, (_, lineno) in raw.items():
        if key not in schema:
            raise ConfigError(
                f"{source}:{lineno}: key {key!r} not valid for {experiment}")

    values: dict = {}
    for key, (typ, default) in schema.items():
        if key in raw:
            text, lineno = raw[key]
            try:
                values[key] = typ(text)
            except ValueError as e:
                raise ConfigError(
                    f"{source}:{lineno}: cannot parse {key}={text!r}: {e}") from e
        elif default is _REQUIRED:
            raise ConfigError(
                f"{source}: missing required key {key!r} for {experiment}")
        else:
            values[key] = default

    if "gamma_t" in schema and "alpha" in schema:
        _check_param_group(values, raw, source)

    out_dir = values["output_dir"] or os.environ.get(OUTPUT_DIR_ENV, "") or "."
    return ExperimentConfig(
        experiment=experiment,
        values=values,
        output_dir=Path(out_dir),
        seed=values["seed"],
    )


def _check_param_group(values, raw, source):
    scaled = [k for k in ("gamma_t", "beta_t") if values.get(k) is not None]
    physical = [k for k in ("alpha", "beta", "gamma", "K")
                if values.get(k) is not None]
    if physical and scaled:
        raise ConfigError(
            f"{source}: give either scaled (gamma_t, beta_t) or physical "
            f"(alpha, beta, gamma, K) parameters, not both")
    if len(scaled) == 1:
        raise ConfigError(f"{source}: scaled parameters need both gamma_t and beta_t")
    if physical and len(physical) < 4:
        missing = set(("alpha", "beta", "gamma", "K")) - set(physical)
        raise ConfigError(f"{source}: physical parameters missing {sorted(missing)}")
    if not scaled and not physical:
        raise ConfigError(f"{source}: no model parameters given")


def _scaled_params(values) -> ScaledParams:
    if values.get("gamma_t") is not None:
        return ScaledParams(gamma_t=values["gamma_t"], beta_t=values["beta_t"])
    p = PhysicalParams(alpha=values["alpha"], beta=values["beta"],
                       gamma=values["gamma"], carrying_capacity=values["K"])
    return rescale(p)


# ---------------------------------------------------------------------------
# CSV and manifest emission
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        raise ConfigError("booleans have no CSV representation here")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17e" % float(v)


def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _echo_value(v) -> str:
    if isinstance(v, list):
        return ",".join("%.17g" % x for x in v)
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def _echo_config(cfg: ExperimentConfig) -> str:
    schema = _SCHEMAS[cfg.experiment]
    lines = []
    for key in schema:
        v = cfg.values[key]
        if v is None:
            continue
        lines.append(f"{key}={_echo_value(v)}")
    return "\n".join(lines) + "\n"


def _write_manifest(cfg: ExperimentConfig, outputs: list[Path]) -> list[Path]:
    import numba
    import scipy

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    echo = _echo_config(cfg)
    echo_path = cfg.output_dir / "config.resolved"
    echo_path.write_text(echo)
    digest = hashlib.sha256(echo.encode()).hexdigest()
    manifest = cfg.output_dir / "manifest"
    manifest.write_text(
        f"experiment={cfg.experiment}\n"
        f"config_sha256={digest}\n"
        f"seed={cfg.seed}\n"
        f"package_version={__version__}\n"
        f"numpy={np.__version__}\n"
        f"scipy={scipy.__version__}\n"
        f"numba={numba.__version__}\n"
        f"outputs={','.join(p.name for p in outputs)}\n"
    )
    return [echo_path, manifest]


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _exp_simulate(cfg: ExperimentConfig) -> list[Path]:
    s = _scaled_params(cfg.values)
    grid = Grid.centered(cfg["window_len"], cfg["dx"], cfl=cfg["cfl"])
    keep = bool(cfg["snapshot_times"])
    if cfg.experiment == "flat-baseline":
        track = pde_solver.run_flat_background(
            s, grid, cfg["t_end"], cfg["sample_dt"], margin=cfg["margin"],
            keep_fields=keep)
    else:
        track = pde_solver.run(
            s, grid, cfg["t_end"], cfg["sample_dt"], a=cfg["a_offset"],
            v_init=cfg["v_init"], margin=cfg["margin"], keep_fields=keep)
    rows = zip(track.times, track.x_front_v, track.x_front_w,
               track.clamp_events)
    files = [write_csv(cfg.output_dir / "fronts.csv",
                       ["t", "x_front_v", "x_front_w", "clamp_events"], rows)]
    for t_snap in cfg["snapshot_times"]:
        h = track.history
        j = int(np.argmin(np.abs(h.times - t_snap)))
        xs = h.x_window + h.offsets[j]
        files.append(write_csv(
            cfg.output_dir / f"snapshot_t{t_snap:g}.csv",
            ["x", "v", "w"], zip(xs, h.v[j], h.w[j])))
    return files


def _exp_speed_scan(cfg: ExperimentConfig) -> list[Path]:
    gamma_t = cfg["gamma_t"]
    betas = np.linspace(cfg["beta_min"], cfg["beta_max"], cfg["beta_steps"])
    rows = []
    for beta_t in betas:
        s = ScaledParams(gamma_t=gamma_t, beta_t=float(beta_t))
        pred = speed_theory.predict(s)
        u_coupled = u_flat = math.nan
        try:
            grid = Grid.centered(cfg["window_len"], cfg["dx"], cfl=cfg["cfl"])
            coup = pde_solver.run(s, grid, cfg["t_end"], cfg["sample_dt"])
            u_coupled = speed_theory.fit_speed(coup, "w").u_hat
            flat = pde_solver.run_flat_background(
                s, grid, cfg["t_end"], cfg["sample_dt"])
            u_flat = speed_theory.fit_speed(flat, "w").u_hat
        except FkppError as e:
            print(f"error: scan row beta_t={beta_t:g} failed: {e}",
                  file=sys.stderr)
        rows.append((beta_t, u_coupled, u_flat,
                     pred.branch1, pred.branch2, pred.u_c_regime))
    return [write_csv(
        cfg.output_dir / "speed_scan.csv",
        ["beta_t", "u_meas_coupled", "u_meas_flat",
         "branch1", "branch2", "u_c_regime"], rows)]


def _exp_wave_profile(cfg: ExperimentConfig) -> list[Path]:
    wave = travelling_wave.compute_profile(
        tol=cfg["tol"], half_width=cfg["half_width"], dx=cfg["dx"])
    tail_C, tail_c, res_r, res_l = travelling_wave.check_tails(wave)
    return [
        write_csv(cfg.output_dir / "wave.csv", ["x", "omega"],
                  zip(wave.xs, wave.omega)),
        write_csv(cfg.output_dir / "wave_tails.csv",
                  ["tail_C", "tail_c", "right_residual", "left_residual"],
                  [(tail_C, tail_c, res_r, res_l)]),
    ]


def _exp_bridge_check(cfg: ExperimentConfig) -> list[Path]:
    t, alpha, K = cfg["t"], cfg["alpha_line"], cfg["K_line"]
    files = []
    s_grid = np.linspace(cfg["s_min"], cfg["s_max"], cfg["s_steps"])
    rows = []
    for s_frac in s_grid:
        p_exact = bridge_lab.occupation_tail_quadrature(t, float(s_frac), alpha, K)
        p_asym = bridge_lab.occupation_tail_asymptotic(t, float(s_frac), alpha, K)
        est = bridge_lab.mc_functional(
            "tail", {"t": t, "alpha": alpha, "K": K, "s_frac": float(s_frac)},
            cfg["n_paths"], cfg["n_steps"], cfg.seed)
        rows.append((s_frac, p_exact, p_asym, est.mean, est.std_error))
    files.append(write_csv(cfg.output_dir / "bridge_tails.csv",
                           ["s", "p_exact", "p_asym", "p_mc", "mc_stderr"],
                           rows))
    if cfg["lambdas"]:
        lam_rows = []
        for lam in cfg["lambdas"]:
            est = bridge_lab.mc_functional(
                "laplace", {"t": t, "alpha": alpha, "K": K, "lam": lam},
                cfg["n_paths"], cfg["n_steps"], cfg.seed)
            rate = 0.5 * (alpha - math.sqrt(2.0 * lam)) ** 2 \
                if 2.0 * lam > alpha ** 2 else math.nan
            lam_rows.append((lam, math.log(est.mean), rate))
        files.append(write_csv(cfg.output_dir / "bridge_laplace.csv",
                               ["lambda", "log_laplace_mc", "rate_theory"],
                               lam_rows))
    return files


def _exp_fk_check(cfg: ExperimentConfig) -> list[Path]:
    s = _scaled_params(cfg.values)
    grid = Grid.centered(cfg["window_len"], cfg["dx"], cfl=cfg["cfl"])
    t = cfg["t"]
    wave = pde_solver.default_wave()
    track = pde_solver.run(s, grid, t, cfg["sample_dt"], a=cfg["a_offset"],
                           wave=wave, keep_fields=True)
    wlook = feynman_kac.WLookup(track.history, s.w_ceiling)
    x_points = cfg["x_points"]
    if not x_points:
        xf = track.x_front_w[-1]
        x_points = list(xf + np.linspace(-3.0, 3.0, 10))
    h = track.history
    x_final = h.x_window + h.offsets[-1]
    rows = []
    for x in x_points:
        pde_w = float(np.interp(x, x_final, h.w[-1]))
        est = feynman_kac.fk_estimate(
            t, x, s, wave, wlook, a=cfg["a_offset"],
            n_paths=cfg["n_paths"], n_steps=cfg["n_steps"], seed=cfg.seed)
        lo = feynman_kac.fk_lower_estimate(
            t, x, s, wave, a=cfg["a_offset"],
            n_paths=cfg["n_paths"], n_steps=cfg["n_steps"], seed=cfg.seed + 1)
        hi = feynman_kac.fk_upper_estimate(
            t, x, s, wave, a=cfg["a_offset"],
            n_paths=cfg["n_paths"], n_steps=cfg["n_steps"], seed=cfg.seed + 2)
        c_lo, c_hi = feynman_kac.crude_bounds(t, x, s)
        rows.append((t, x, pde_w, est.mean, est.std_error,
                     lo.mean, hi.mean, c_lo, c_hi))
    return [write_csv(
        cfg.output_dir / "fk_check.csv",
        ["t", "x", "pde_w", "fk_mean", "fk_stderr",
         "fk_lower", "fk_upper", "crude_lower", "crude_upper"], rows)]


def _exp_theory(cfg: ExperimentConfig) -> list[Path]:
    rows = []
    for gamma_t in cfg["gammas"]:
        betas = np.linspace(cfg["beta_min"], cfg["beta_max"], cfg["steps"])
        for beta_t in betas:
            s = ScaledParams(gamma_t=gamma_t, beta_t=float(beta_t))
            pred = speed_theory.predict(s)
            rows.append((gamma_t, beta_t, pred.beta_star, pred.branch1,
                         pred.branch2, pred.u_c_regime, pred.u_c_as_stated))
    return [write_csv(
        cfg.output_dir / "theory.csv",
        ["gamma_t", "beta_t", "beta_star", "branch1", "branch2",
         "u_c_regime", "u_c_as_stated"], rows)]


_RUNNERS = {
    "simulate": _exp_simulate,
    "flat-baseline": _exp_simulate,
    "speed-scan": _exp_speed_scan,
    "wave-profile": _exp_wave_profile,
    "bridge-check": _exp_bridge_check,
    "fk-check": _exp_fk_check,
    "theory": _exp_theory,
}


def run_experiment(cfg: ExperimentConfig) -> list[Path]:
    """Execute the experiment; returns all files written (incl. manifest)."""
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    outputs = _RUNNERS[cfg.experiment](cfg)
    outputs += _write_manifest(cfg, outputs)
    return outputs


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

_CONFIG_SUBCOMMANDS = ("simulate", "speed-scan", "bridge-check", "fk-check",
                       "wave-profile")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fkpplab",
        description="numerical laboratory for the coupled invasion front model",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _CONFIG_SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment from a config file")
        p.add_argument("--config", required=True, help="key=value config file")
    p = sub.add_parser("theory", help="print closed-form speed predictions as CSV")
    p.add_argument("--gamma", required=True,
                   help="comma-separated gamma_t values")
    p.add_argument("--beta-min", type=float, required=True)
    p.add_argument("--beta-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--output-dir", default="", help="also write theory.csv here")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "theory":
            values = {
                "experiment": "theory",
                "seed": 1,
                "output_dir": args.output_dir,
                "gammas": _float_list(args.gamma),
                "beta_min": args.beta_min,
                "beta_max": args.beta_max,
                "steps": args.steps,
            }
            out_dir = args.output_dir or os.environ.get(OUTPUT_DIR_ENV, "") or "."
            cfg = ExperimentConfig("theory", values, Path(out_dir), 1)
        else:
            raw = parse_config_file(args.config)
            cfg = resolve_config(raw, source=str(args.config))
            if cfg.experiment != args.command and not (
                    args.command == "simulate"
                    and cfg.experiment == "flat-baseline"):
                raise ConfigError(
                    f"{args.config}: config names experiment "
                    f"{cfg.experiment!r} but subcommand is {args.command!r}")
    except (ConfigError, ConstraintError, ValueError) as e:
        print(f"error: config: {e}", file=sys.stderr)
        return 2

    try:
        outputs = run_experiment(cfg)
    except (ConfigError, ConstraintError) as e:
        print(f"error: config: {e}", file=sys.stderr)
        return 2
    except FkppError as e:
        print(f"error: numerical: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    if cfg.experiment == "theory":
        csv_path = next(p for p in outputs if p.name == "theory.csv")
        sys.stdout.write(csv_path.read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
