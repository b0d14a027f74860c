"""Command-line driver: ``zakai-fd <command> [options]``.

Configuration is a flat TOML file of ``key = value`` pairs, optionally
seeded from a named preset and overridden with ``--set key=value``.
Precedence: preset, then file, then ``--set``, then the dedicated flags.

Exit codes: 0 success, 1 audit failure (``levy-check``), 2 configuration
error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import harness, stability
from .errors import NumericalError, ZakaiError
from .model import (
    Grid2D,
    ModelParams,
    TimeGrid,
    dirac_initial,
    field_summary,
    gaussian_initial,
    write_field_csv,
)
from .schemes import HestonSpdeParams, SchemeKind, evolve
from .stochastic import (
    draw_fine_path,
    draw_path,
    levy_area_batch,
    path_rng,
    write_path_csv,
)

EXIT_OK, EXIT_AUDIT, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4

MODEL_KEYS = {"mu_x", "mu_y", "rho_x", "rho_y", "rho_xy"}
HESTON_KEYS = {"kappa1", "theta1", "xi1", "r1", "rho_11", "rho_21", "rho_3"}
BOX_KEYS = {"x_min", "x_max", "y_min", "y_max"}
COMMON_KEYS = {"seed", "threads", "out"}

_model = harness.MODEL_PRESET
_sv = harness.HESTON_PRESET
_box = dict(zip(("x_min", "x_max", "y_min", "y_max"), _model["domain"]))
_sv_box = dict(zip(("x_min", "x_max", "y_min", "y_max"), _sv["domain"]))

PRESETS = {
    "model": {
        **{k: getattr(_model["params"], k) for k in MODEL_KEYS},
        "T": _model["T"], "x0": _model["x0"], "y0": _model["y0"], **_box,
        "scheme": "adi-milstein",
    },
    "stochastic-volatility": {
        **{k: getattr(_sv["params"], k) for k in HESTON_KEYS},
        "T": _sv["T"], "x0": _sv["x0"], "y0": _sv["y0"], **_sv_box,
        "h_x": _sv["h_x"], "h_y": _sv["h_y"], "k": _sv["k"],
        "scheme": "adi-milstein-heston",
    },
}
PRESET_ALIASES = {"paper-sec5": "model", "paper-sec6": "stochastic-volatility"}

ALLOWED = {
    "solve": MODEL_KEYS | HESTON_KEYS | BOX_KEYS | {
        "scheme", "h_x", "h_y", "T", "k", "N", "x0", "y0", "initial", "tol",
        "max_iter", "solver", "path_index", "dump_path"},
    "stability": MODEL_KEYS | {"scheme", "k", "h", "lattice", "sweep_rho", "sweep_rho_xy",
                               "T", "h_min", "C0", "beta_exp"},
    "converge": MODEL_KEYS | HESTON_KEYS | BOX_KEYS | {
        "scheme", "study", "levels", "n_levels", "k", "h", "h_x", "h_y", "T", "x0", "y0",
        "L", "initial", "solver"},
    "diverge": MODEL_KEYS | BOX_KEYS | {"scheme", "k", "levels", "h_y", "initial", "T",
                                        "x0", "y0", "path_index"},
    "cost": HESTON_KEYS | {"schemes", "n_levels", "first_level", "repeats"},
    "levy-check": {"k", "m_sub", "samples", "rho"},
}


class ConfigError(ZakaiError):
    pass


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def load_config(command, preset=None, path=None, overrides=()):
    """Merge preset, file and ``key=value`` overrides; reject unknown keys."""
    allowed = ALLOWED[command] | COMMON_KEYS
    cfg = {}
    if preset is not None:
        name = PRESET_ALIASES.get(preset, preset)
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        cfg.update({k: v for k, v in PRESETS[name].items() if k in allowed})
    user = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                user.update(tomllib.load(fh))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, text = item.split("=", 1)
        user[key.strip()] = _parse_value(text.strip())
    for key, value in user.items():
        if isinstance(value, dict):
            raise ConfigError(f"key {key!r}: nested tables are not supported")
        if key not in allowed:
            raise ConfigError(f"unknown configuration key {key!r} for '{command}'")
    cfg.update(user)
    return cfg


def _get(cfg, key, default=None, kind=float):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing configuration key {key!r}")
        return default
    try:
        return kind(cfg[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"key {key!r}: cannot interpret {cfg[key]!r}") from exc


def _seed(cfg):
    if "seed" not in cfg:
        raise ConfigError("no seed given (use --seed or a 'seed' key)")
    seed = _get(cfg, "seed", kind=int)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return seed


def _model_params(cfg):
    return ModelParams(*(_get(cfg, k, 0.0) for k in ("mu_x", "mu_y", "rho_x", "rho_y", "rho_xy")))


def _heston_params(cfg):
    return HestonSpdeParams(**{k: _get(cfg, k) for k in
                               ("kappa1", "theta1", "xi1", "r1", "rho_11", "rho_21", "rho_3")})


def _box(cfg, default):
    return tuple(_get(cfg, k, d) for k, d in zip(("x_min", "x_max", "y_min", "y_max"), default))


def _scheme(cfg, default):
    return SchemeKind.parse(cfg.get("scheme", default))


def _outdir(cfg, command):
    out = cfg.get("out") or os.path.join("runs", command)
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=str)


def _manifest(out, command, cfg, seed, extra=None):
    harness.write_manifest(os.path.join(out, "manifest.json"),
                           {"command": command, **cfg}, seed, extra)


def cmd_solve(cfg):
    kind = _scheme(cfg, "adi-milstein")
    seed = _seed(cfg)
    if kind is SchemeKind.AdiMilsteinGeneral:
        raise ConfigError("the general-coefficient scheme is library-only")
    if kind.is_heston:
        params = _heston_params(cfg)
        box = _box(cfg, _sv["domain"])
    else:
        params = _model_params(cfg)
        box = _box(cfg, _model["domain"])
    grid = Grid2D(*box, _get(cfg, "h_x"), _get(cfg, "h_y", _get(cfg, "h_x")))
    T = _get(cfg, "T", 1.0)
    tg = TimeGrid(T, _get(cfg, "N", kind=int)) if "N" in cfg else TimeGrid.from_step(T, _get(cfg, "k"))
    x0, y0 = _get(cfg, "x0"), _get(cfg, "y0")
    initial = cfg.get("initial", "dirac")
    if initial == "dirac":
        u0 = dirac_initial(grid, x0, y0)
    elif initial == "gaussian" and not kind.is_heston:
        u0 = gaussian_initial(grid, params, x0, y0)
    else:
        raise ConfigError(f"key 'initial': unsupported value {initial!r}")
    index = _get(cfg, "path_index", 0, int)
    rho = params.rho_3 if kind.is_heston else params.rho_xy
    if kind is SchemeKind.AdiMilsteinHeston:
        path = draw_fine_path(tg.N, tg.k, rho, seed, index=index)
    else:
        path = draw_path(tg.N, rho, seed, tg.k, index=index)
    max_iter = _get(cfg, "max_iter", 0, int) or None
    v = evolve(u0, kind, params, tg, path, tol=_get(cfg, "tol", 1e-10),
               solver=cfg.get("solver", "krylov"), max_iter=max_iter)
    out = _outdir(cfg, "solve")
    write_field_csv(v, os.path.join(out, "field.csv"))
    summary = field_summary(v)
    summary["terminal_drivers"] = list(path.terminal(tg.N))
    _write_json(os.path.join(out, "summary.json"), summary)
    if cfg.get("dump_path"):
        write_path_csv(path, os.path.join(out, "path.csv"))
    _manifest(out, "solve", cfg, seed)
    print(f"solve: mass={summary['mass']:.6g} max={summary['max']:.6g} -> {out}")
    return EXIT_OK


def cmd_stability(cfg):
    p = _model_params(cfg)
    kind = _scheme(cfg, "implicit-milstein")
    k = _get(cfg, "k", 2.0 ** -6)
    h = _get(cfg, "h", 2.0 ** -3)
    ok, sides = stability.check_assumption(p)
    bx, by = stability.explicit_cfl_bounds(p)
    report = {"assumption_pass": ok, "assumption_sides": list(sides),
              "explicit_cfl_bounds": [bx, by]}
    if ok:
        m = stability.margins(p)
        report["margins"] = {"beta": m.beta, "theta0": m.theta0, "theta": m.theta}
        report["advisory_timestep"] = stability.advisory_timestep(
            p, _get(cfg, "T", 1.0), _get(cfg, "h_min", h), _get(cfg, "C0", 1.0),
            _get(cfg, "beta_exp", 1.0))
    rhos = cfg.get("sweep_rho", [round(0.1 * i, 1) for i in range(10)])
    rxys = cfg.get("sweep_rho_xy", [round(-1 + 0.25 * i, 2) for i in range(9)])
    cells = [(r, r, rxy) for r in rhos for rxy in rxys]
    rows = stability.stability_region_sweep(cells, k, h, kind, _get(cfg, "lattice", 101, int))
    out = _outdir(cfg, "stability")
    stability.write_region_csv(rows, os.path.join(out, "region.csv"))
    _write_json(os.path.join(out, "stability.json"), report)
    _manifest(out, "stability", cfg, cfg.get("seed"))
    print(f"stability: assumption {'holds' if ok else 'fails'}; {len(rows)} cells -> {out}")
    return EXIT_OK


def _write_result(out, name, result):
    result.write_csv(os.path.join(out, f"{name}.csv"))
    _write_json(os.path.join(out, f"{name}.json"), result.to_dict())


def cmd_converge(cfg):
    seed = _seed(cfg)
    study = cfg.get("study", "h")
    threads = _get(cfg, "threads", 1, int)
    L = _get(cfg, "L", 20, int)
    n_levels = _get(cfg, "n_levels", 4, int)
    if study in ("h", "k"):
        p = _model_params(cfg)
        kind = _scheme(cfg, "adi-milstein")
        box = _box(cfg, _model["domain"])
        common = dict(T=_get(cfg, "T", 1.0), x0=_get(cfg, "x0", 2.0), y0=_get(cfg, "y0", 2.0),
                      domain=box, initial=cfg.get("initial", "dirac"),
                      solver=cfg.get("solver", "spectral"), threads=threads)
        if study == "h":
            levels = cfg.get("levels", [2.0 ** -i for i in range(1, n_levels + 1)])
            res = harness.convergence_in_h(kind, p, _get(cfg, "k", 2.0 ** -8), levels, L, seed, **common)
        else:
            levels = cfg.get("levels", [2.0 ** (-2 - 2 * i) for i in range(n_levels)])
            res = harness.convergence_in_k(kind, p, _get(cfg, "h", 2.0 ** -5), levels, L, seed, **common)
    elif study in ("proxy-h", "proxy-k"):
        hp = _heston_params(cfg)
        kind = _scheme(cfg, "adi-milstein-heston")
        hx, hy = _get(cfg, "h_x", _sv["h_x"]), _get(cfg, "h_y", _sv["h_y"])
        if study == "proxy-h":
            levels = [(hx / 2 ** i, hy / 2 ** i) for i in range(n_levels)]
            res = harness.proxy_convergence_h(kind, _get(cfg, "k", 2.0 ** -4), levels, L, seed,
                                              hp, threads=threads)
        else:
            k0 = _get(cfg, "k", _sv["k"])
            levels = [k0 / 4 ** i for i in range(n_levels)]
            res = harness.proxy_convergence_k(kind, (hx, hy), levels, L, seed, hp, threads=threads)
    else:
        raise ConfigError(f"key 'study': unknown value {study!r}")
    out = _outdir(cfg, "converge")
    _write_result(out, "levels", res)
    _manifest(out, "converge", cfg, seed)
    print(f"converge[{study}]: slope {res.fitted_slope:.3f} +- {res.slope_stderr:.3f} -> {out}")
    return EXIT_OK


def cmd_diverge(cfg):
    seed = _seed(cfg)
    p = _model_params(cfg)
    kind = _scheme(cfg, "adi-milstein")
    levels = cfg.get("levels", [2.0 ** -i for i in range(3, 8)])
    hy = cfg.get("h_y")
    res = harness.divergence_study(
        p, _get(cfg, "k", 0.25), levels, cfg.get("initial", "dirac"), seed,
        h_y=None if hy is None else float(hy), T=_get(cfg, "T", 1.0),
        x0=_get(cfg, "x0", 2.0), y0=_get(cfg, "y0", 2.0), domain=_box(cfg, _model["domain"]),
        kind=kind, path_index=_get(cfg, "path_index", 0, int))
    out = _outdir(cfg, "diverge")
    _write_result(out, "levels", res)
    _manifest(out, "diverge", cfg, seed)
    print(f"diverge: slope {res.fitted_slope:.3f} -> {out}")
    return EXIT_OK


def cmd_cost(cfg):
    seed = _seed(cfg)
    hp = _heston_params(cfg) if all(k in cfg for k in HESTON_KEYS) else None
    kinds = cfg.get("schemes", ["adi-euler-heston", "adi-milstein-heston",
                                "adi-milstein-heston-modified"])
    rows = harness.cost_study(kinds, _get(cfg, "n_levels", 3, int), seed,
                              first_level=_get(cfg, "first_level", 0, int), hp=hp,
                              repeats=_get(cfg, "repeats", 1, int))
    out = _outdir(cfg, "cost")
    with open(os.path.join(out, "cost.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "level", "h_x", "h_y", "k", "seconds", "ratio"])
        prev = {}
        for r in rows:
            ratio = r["seconds"] / prev[r["kind"]] if r["kind"] in prev else ""
            prev[r["kind"]] = r["seconds"]
            w.writerow([r["kind"], r["level"], r["h_x"], r["h_y"], r["k"], f"{r['seconds']:.6f}", ratio])
    _manifest(out, "cost", cfg, seed)
    print(f"cost: {len(rows)} timings -> {out}")
    return EXIT_OK


def levy_audit(k, m_sub, samples, rho, seed):
    """Identity residual, mean and variance of the iterated-integral sampler."""
    rng = path_rng(seed, 0)
    g = rng.standard_normal((samples, 2))
    z_x = g[:, 0]
    z_y = rho * z_x + math.sqrt(1 - rho * rho) * g[:, 1]
    a_xy, a_yx, sub = levy_area_batch(z_x, z_y, k, m_sub, rho, path_rng(seed, 1))
    dW = sub[..., 0].sum(axis=-1)
    dB = sub[..., 1].sum(axis=-1)
    cross = (sub[..., 0] * sub[..., 1]).sum(axis=-1)
    resid = np.abs(a_xy + a_yx + cross - dW * dB)
    scale = np.abs(dW * dB) + np.abs(cross) + np.abs(a_xy) + np.abs(a_yx)
    rel = float((resid / np.maximum(scale, np.finfo(float).tiny)).max())
    mean = float(a_xy.mean())
    se = float(a_xy.std(ddof=1) / math.sqrt(samples))
    var = float(a_xy.var(ddof=1))
    oracle = k * k * (m_sub - 1) / (2 * m_sub) if rho == 0 else None
    report = {
        "k": k, "m_sub": m_sub, "samples": samples, "rho": rho,
        "identity_max_rel": rel, "identity_pass": rel <= 1e-12,
        "mean": mean, "mean_se": se, "mean_pass": abs(mean) <= 4 * se,
        "variance": var, "variance_oracle": oracle,
    }
    if oracle is not None:
        report["variance_rel_dev"] = abs(var / oracle - 1)
        report["variance_pass"] = report["variance_rel_dev"] <= 0.05
    report["pass"] = all(v for key, v in report.items() if key.endswith("_pass"))
    return report, a_xy, a_yx


def cmd_levy_check(cfg):
    seed = _seed(cfg)
    k = _get(cfg, "k", 2.0 ** -4)
    report, a_xy, a_yx = levy_audit(k, _get(cfg, "m_sub", 64, int), _get(cfg, "samples", 10000, int),
                                    _get(cfg, "rho", 0.0), seed)
    out = _outdir(cfg, "levy-check")
    _write_json(os.path.join(out, "levy.json"), report)
    with open(os.path.join(out, "samples.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "a_xy", "a_yx"])
        for n, (a, b) in enumerate(zip(a_xy, a_yx)):
            w.writerow([n, repr(float(a)), repr(float(b))])
    _manifest(out, "levy-check", cfg, seed)
    print(f"levy-check: {'pass' if report['pass'] else 'FAIL'} -> {out}")
    return EXIT_OK if report["pass"] else EXIT_AUDIT


COMMANDS = {
    "solve": cmd_solve,
    "stability": cmd_stability,
    "converge": cmd_converge,
    "diverge": cmd_diverge,
    "cost": cmd_cost,
    "levy-check": cmd_levy_check,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="zakai-fd", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", metavar="PATH", help="flat TOML configuration file")
        sp.add_argument("--preset", metavar="NAME",
                        help="start from a named parameter set: " + ", ".join(PRESETS))
        sp.add_argument("--seed", type=int, metavar="U64", help="master seed (overrides config)")
        sp.add_argument("--threads", type=int, metavar="N", help="path-level threads, 0 = auto")
        sp.add_argument("--out", metavar="DIR", help="output directory")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.preset, args.config, args.set)
        for key in ("seed", "threads", "out"):
            val = getattr(args, key)
            if val is not None:
                cfg[key] = val
        return COMMANDS[args.command](cfg)
    except OSError as exc:
        print(f"zakai-fd: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"zakai-fd: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ZakaiError, ValueError, TypeError) as exc:
        print(f"zakai-fd: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
