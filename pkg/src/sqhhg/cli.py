"""Command-line interface: ``sqhhg <command> [--config FILE | --preset NAME]``.

Commands write CSV tables plus a ``manifest.json`` holding the resolved
configuration, seed, backend and SHA-256 checksums of every file written.

Exit codes: 0 success, 2 invalid configuration or input, 3 numerical
failure, 4 a validation check failed.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import RunConfig, list_presets, load_config, load_preset, parse_text
from .errors import ConfigError, InvalidInputError, NoSolutionError, SqhhgError
from .harmonic_map import husimi_of_harmonic, pushforward_mc
from .phase_space import (GaussianStateSpec, PhasePoint, check_normalization, default_axes, husimi_grid)
from .sfa_response import (AtomModel, InterpolatedResponse, LinearResponse, ResponseTable, SFAResponse,
                           SyntheticResponse, detect_cutoff, field_from_alpha, harmonic_spectrum,
                           lewenstein_dipole, spectrum_to_csv)
from .squeezing import curves_to_csv, variance_curve
from .trajectories import FieldParams, cutoff_harmonic, max_return_energy, solve_trajectories, trajectories_to_csv

__all__ = ["main", "build_pump", "build_model", "run"]

log = logging.getLogger("sqhhg")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# builders


def _gamma(cfg: RunConfig) -> complex:
    p, f = cfg["pump"], cfg["field"]
    g = complex(p["gamma_x"], p["gamma_y"])
    if g == 0 and f["e_au"] is not None and p["type"] not in ("vacuum", "squeezed_vacuum"):
        g = complex(f["e_au"] / (2.0 * f["epsilon1_au"]), 0.0)
    return g


def build_pump(cfg: RunConfig) -> GaussianStateSpec:
    p = cfg["pump"]
    kind = p["type"]
    g = _gamma(cfg)
    r = p["r"] if kind in ("squeezed_coherent", "squeezed_vacuum") else 0.0
    nbar = p["nbar"] if kind == "thermal" else 0.0
    if kind == "vacuum":
        g = 0j
    if kind in ("squeezed_coherent", "squeezed_vacuum") and r == 0:
        raise ConfigError(f"[pump] type {kind} needs r > 0", None, cfg.source)
    return GaussianStateSpec(PhasePoint.from_complex(g), r, p["squeeze_angle"] % math.pi, nbar)


def _drive_e0(cfg: RunConfig) -> float:
    f = cfg["field"]
    if f["e_au"] is not None:
        return float(f["e_au"])
    g = _gamma(cfg)
    if g == 0:
        raise ConfigError("need [field] e_au or a non-zero pump amplitude", None, cfg.source)
    return 2.0 * f["epsilon1_au"] * abs(g)


def _atom(cfg: RunConfig) -> AtomModel:
    a = cfg["atom"]
    return AtomModel(a["ip_au"], a["dme_kind"])


def _search_domain(cfg: RunConfig, pump: GaussianStateSpec):
    s = cfg["grid"]["search_extent"]
    if s is None:
        xs, ys = default_axes(pump, 3, cfg["grid"]["n_sigma"])
        return (float(xs[0]), float(xs[-1]), float(ys[0]), float(ys[-1]))
    g = pump.gamma.complex
    return (g.real - s, g.real + s, g.imag - s, g.imag + s)


def build_model(cfg: RunConfig, pump: GaussianStateSpec | None = None, threads: int = 1):
    m, f = cfg["model"], cfg["field"]
    common = dict(n_atoms=f["n_atoms"], epsilon1=f["epsilon1_au"], omega=f["omega_au"])
    if m["kind"] == "synthetic":
        return SyntheticResponse(m["c"], m["eta"], m["kappa"], m["alpha0"], **common)
    if m["kind"] == "linear":
        return LinearResponse(complex(m["c"], m["c_im"]), **common)
    model = SFAResponse(_atom(cfg), f["epsilon1_au"], f["omega_au"], f["n_atoms"], f["n_cycles"],
                        f["points_per_cycle"], cfg["harmonic"]["branch"], num_threads=threads)
    if m["interpolate"]:
        if pump is None:
            raise ConfigError("[model] interpolate needs a pump", None, cfg.source)
        x0, x1, y0, y1 = _search_domain(cfg, pump)
        n = m["interp_points"]
        model = InterpolatedResponse.from_model(model, np.linspace(x0, x1, n), np.linspace(y0, y1, n),
                                                cfg["harmonic"]["q"])
    return model


def _chi_axes(cfg: RunConfig, model, pump, q):
    g = cfg["grid"]
    if g["extent"] is None:
        c = complex(model.evaluate(pump.gamma.complex, q))
        ext = 6.0
    else:
        c = complex(g["center_x"], g["center_y"])
        ext = g["extent"]
        if g["center_x"] == 0 and g["center_y"] == 0 and cfg["pump"]["type"] not in ("vacuum", "squeezed_vacuum"):
            c = complex(model.evaluate(pump.gamma.complex, q))
    n = g["points"]
    return np.linspace(c.real - ext, c.real + ext, n), np.linspace(c.imag - ext, c.imag + ext, n)


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(cfg, out, seed, threads):
    f = cfg["field"]
    e0 = _drive_e0(cfg)
    alpha = e0 / (2.0 * f["epsilon1_au"])
    drive = field_from_alpha(alpha, f["epsilon1_au"], f["omega_au"], n_cycles=f["n_cycles"])
    series = lewenstein_dipole(drive, _atom(cfg), points_per_cycle=f["points_per_cycle"],
                               branch=cfg["harmonic"]["branch"], num_threads=threads)
    ip = cfg["atom"]["ip_au"]
    qc = cutoff_harmonic(FieldParams(e0, f["omega_au"]), ip)
    q_max = int(math.ceil(cfg["spectrum"]["q_max_factor"] * qc))
    orders, d = harmonic_spectrum(series, q_max)
    path = out / "spectrum.csv"
    spectrum_to_csv(path, orders, d)
    summary = {"e0_au": e0, "up_au": FieldParams(e0, f["omega_au"]).up, "classical_cutoff": qc}
    try:
        summary["detected_cutoff"] = detect_cutoff(orders, np.abs(d) ** 2)
    except InvalidInputError as exc:
        summary["detected_cutoff"] = None
        summary["cutoff_note"] = str(exc)
    return [path], summary


def cmd_trajectories(cfg, out, seed, threads):
    f = cfg["field"]
    e0 = _drive_e0(cfg)
    field = FieldParams(e0, f["omega_au"])
    ip = cfg["atom"]["ip_au"]
    rows, skipped = [], {}
    for q in cfg.q_list:
        try:
            for t in solve_trajectories(q, field, ip):
                rows.append((q, t, field.up))
        except SqhhgError as exc:
            skipped[str(q)] = f"{type(exc).__name__}: {exc}"
    path = out / "trajectories.csv"
    trajectories_to_csv(path, rows)
    ke, p0, p1 = max_return_energy()
    return [path], {"classical_cutoff": cutoff_harmonic(field, ip), "ke_max_over_up": ke, "skipped": skipped,
                    "cutoff_birth_rad": p0, "cutoff_return_rad": p1}


def cmd_husimi(cfg, out, seed, threads):
    pump = build_pump(cfg)
    q = cfg["harmonic"]["q"]
    model = build_model(cfg, pump, threads)
    g = cfg["grid"]
    files = []
    pump_grid = husimi_grid(pump, points=g["points"], n_sigma=g["n_sigma"])
    pump_grid.to_csv(out / "pump.csv")
    files.append(out / "pump.csv")
    xs, ys = _chi_axes(cfg, model, pump, q)
    grid = husimi_of_harmonic(pump, model, q, (xs, ys), g["jacobian_power"], g["branch_reduce"],
                              _search_domain(cfg, pump), g["seed_points"])
    grid.to_csv(out / "harmonic.csv")
    (out / "harmonic.json").write_text(grid.metadata_json())
    files += [out / "harmonic.csv", out / "harmonic.json"]
    summary = {"pump_normalization_error": check_normalization(pump_grid),
               "masked_cells": int(np.count_nonzero(grid.mask)) if grid.mask is not None else 0,
               "max_branches": grid.metadata.get("max_branches")}
    n = cfg["mc"]["samples"]
    if n:
        k = cfg["mc"]["grid_points"]
        mx = np.linspace(xs[0], xs[-1], k)
        my = np.linspace(ys[0], ys[-1], k)
        mc = pushforward_mc(pump, model, q, n, seed, (mx, my), num_threads=threads)
        mc.to_csv(out / "harmonic_mc.csv")
        (out / "harmonic_mc.json").write_text(mc.metadata_json())
        files += [out / "harmonic_mc.csv", out / "harmonic_mc.json"]
        summary["mc_rejection_fraction"] = mc.metadata.get("rejection_fraction")
    return files, summary


def cmd_variance(cfg, out, seed, threads):
    f, v = cfg["field"], cfg["variance"]
    model = build_model(cfg, None, threads)
    gmag = v["e_gamma_au"] / (2.0 * f["epsilon1_au"])
    r = np.linspace(0.0, v["r_max"], v["r_points"])
    curves, diag = [], []
    for orient in v["orientations"]:
        curves += variance_curve(cfg.q_list, orient, gmag, r, model, v["theta"], v["prefactor"],
                                 diagnostics=diag)
    done = {c.q for c in curves}
    failed = [(q, m) for q, m in diag if q not in done]
    notes = [(q, m) for q, m in diag if q in done]
    if not curves:
        raise NoSolutionError("no harmonic produced a variance curve: " + "; ".join(f"q={q}: {m}" for q, m in diag))
    path = out / "variance.csv"
    curves_to_csv(path, curves)
    summary = {"gamma_magnitude": gmag, "failed": {str(q): m for q, m in failed},
               "notes": [f"q={q}: {m}" for q, m in notes], "curves": [
        {"q": c.q, "orientation": c.orientation, "a_field": c.a_field, "b_field": c.b_field,
         "r_max": c.r_max, "min_variance": float(np.min(c.variance)),
         "unphysical": c.info["unphysical"]} for c in curves]}
    return [path], summary


def cmd_response(cfg, out, seed, threads):
    f, s = cfg["field"], cfg["scaling"]
    model = build_model(cfg, None, threads)
    q = cfg["harmonic"]["q"]
    ups = np.linspace(s["up_min_over_omega"], s["up_max_over_omega"], s["points"]) * f["omega_au"]
    alphas = 2.0 * f["omega_au"] * np.sqrt(ups) / (2.0 * f["epsilon1_au"]) + 0j
    chi = np.array([model.evaluate(a, q) for a in alphas])
    table = ResponseTable(alphas, chi, q, model.describe())
    path = out / "response.csv"
    table.to_csv(path)
    return [path], {"up_au": ups.tolist(), "abs_chi2": (np.abs(chi) ** 2).tolist()}


def cmd_validate(cfg, out, seed, threads):
    from .validation import run_checks
    results = run_checks(cfg, seed=seed, threads=threads)
    lines = ["# check, passed, detail"]
    for r in results:
        lines.append(f"{r.name}, {'pass' if r.passed else 'FAIL'}, {r.detail}")
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    path = out / "validation.csv"
    path.write_text("\n".join(lines) + "\n")
    summary = {"results": [r._asdict() for r in results], "all_passed": all(r.passed for r in results)}
    return [path], summary


COMMANDS = {
    "spectrum": (cmd_spectrum, "single-atom harmonic spectrum and cutoff"),
    "trajectories": (cmd_trajectories, "classical return trajectories per harmonic"),
    "husimi": (cmd_husimi, "pump and harmonic Husimi grids"),
    "variance": (cmd_variance, "harmonic quadrature variance against pump squeezing"),
    "response": (cmd_response, "harmonic displacement against pump amplitude"),
    "validate": (cmd_validate, "run the configured validation checks"),
}


# ---------------------------------------------------------------------------
# driver


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _resolve(args) -> RunConfig:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        return load_config(args.config)
    if args.preset:
        return load_preset(args.preset)
    return parse_text("", "<defaults>")


def run(command: str, cfg: RunConfig, out: Path, seed: int | None = None, threads: int = 1) -> tuple[int, dict]:
    """Run one command and write its manifest. Returns ``(exit_code, manifest)``."""
    seed = cfg["mc"]["seed"] if seed is None else seed
    out.mkdir(parents=True, exist_ok=True)
    fn = COMMANDS[command][0]
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        files, summary = fn(cfg, out, seed, threads)
    elapsed = time.perf_counter() - t0
    msgs = sorted({str(w.message) for w in caught})
    for m in msgs:
        log.warning(m)
    manifest = {
        "command": command,
        "version": __version__,
        "backend": kernels.BACKEND,
        "preset": cfg.preset,
        "source": cfg.source,
        "seed": seed,
        "threads": threads,
        "config": cfg.to_dict(),
        "summary": summary,
        "warnings": msgs,
        "elapsed_s": elapsed,
        "files": {p.name: _sha256(p) for p in files},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default))
    code = EXIT_OK
    if command == "validate" and not summary["all_passed"]:
        code = EXIT_VALIDATION
    return code, manifest


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return str(obj)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sqhhg", description="Quantum-optical harmonic generation by squeezed drives.")
    ap.add_argument("--version", action="version", version=f"sqhhg {__version__}")
    ap.add_argument("--list-presets", action="store_true", help="print the bundled presets and exit")
    sub = ap.add_subparsers(dest="command")
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="TOML configuration file")
        p.add_argument("--preset", help="bundled preset name")
        p.add_argument("--out", type=Path, help="output directory (overrides [output] directory)")
        p.add_argument("--seed", type=int, help="Monte Carlo seed (overrides [mc] seed)")
        p.add_argument("--threads", type=int, default=1, help="threads for the compiled kernels")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = _parser()
    args = ap.parse_args(argv)
    if args.list_presets:
        for name in list_presets():
            print(name)
        return EXIT_OK
    if not args.command:
        ap.print_help()
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = _resolve(args)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out = args.out if args.out is not None else Path(cfg["output"]["directory"])
        code, manifest = run(args.command, cfg, out, args.seed, args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidInputError as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SqhhgError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"wrote {len(manifest['files'])} file(s) to {out}")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
