"""``vortexgas`` command line: seed-pinned scenario runs with file outputs.

    vortexgas <kind> --config FILE [--preset NAME] [--seed N] [--out DIR] [--threads N]

Parameters come from the preset (if any), then the config file, so the file
overrides preset values. Every run writes ``manifest.txt`` next to its
numeric outputs. Errors print ``error[CODE]: message`` on stderr.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import fields as F
from . import formats as io
from . import lattice as L
from . import point_vortex as pv
from . import scales as sa
from . import spectra as sp
from . import vortex_gas as vg
from .errors import ValidationError, VortexGasError

OUTPUT_ROOT_ENV = "VORTEXGAS_OUTPUT_ROOT"

EXIT_OK, EXIT_USAGE, EXIT_MODULE = 0, 2, 3


# -- parameter parsing ----------------------------------------------------------

def _floats(text):
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _points(text):
    pts = []
    for chunk in str(text).split(";"):
        if chunk.strip():
            xy = _floats(chunk)
            if len(xy) != 2:
                raise ValueError(f"expected 'x, y', got {chunk.strip()!r}")
            pts.append(xy)
    return pts


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if str(text).strip().lower() in ("", "none") else float(text)


def _opt_int(text):
    return None if str(text).strip().lower() in ("", "none") else int(text)


REQUIRED = object()

# kind -> {name: (parser, default)}
SCHEMAS = {
    "simulate-2d": {
        "positions": (_points, REQUIRED),
        "gammas": (_floats, REQUIRED),
        "domain": (str, pv.FULL_PLANE),
        "core": (float, 0.0),
        "dt": (float, REQUIRED),
        "t_end": (float, REQUIRED),
        "record_every": (int, 1),
    },
    "lattice": {
        "betas": (_floats, REQUIRED),
        "n_segments": (int, 50),
        "sweeps": (int, REQUIRED),
        "burn_in": (int, REQUIRED),
        "record_every": (int, 1),
        "chains": (int, 1),
        "cutoff": (_opt_float, None),
        "pinned_distance": (_opt_int, None),
        "check_every": (int, 0),
    },
    "entropy": {
        "energies": (_floats, None),
        "inertias": (_floats, None),
        "levels_file": (str, None),
        "mean_energy": (_floats, REQUIRED),
        "mean_inertia": (_opt_float, None),
        "fd_step": (float, 1e-4),
    },
    "analyze-scales": {
        "field_file": (str, None),
        "exponents": (_floats, [-1.6]),
        "zeta_core": (float, 0.1),
        "core_radius": (float, 1.0),
        "supersample": (int, 8),
        "nx": (int, 512),
        "dx": (float, 75.0),
        "epsilons": (_floats, list(sa.DEFAULT_EPSILONS)),
        "fit_min": (float, sa.DEFAULT_FIT_RANGE[0]),
        "fit_max": (float, sa.DEFAULT_FIT_RANGE[1]),
        "window_radius": (float, sa.DEFAULT_WINDOW_RADIUS),
        "frame_interval": (float, 300.0),
    },
    "spectrum": {
        "n": (int, 256),
        "exponent": (float, -3.0),
        "dx": (float, 1.0),
        "fit_kmin_index": (int, 4),
        "fit_kmax_index": (int, 64),
        "u_file": (str, None),
        "v_file": (str, None),
    },
    "fractal-dim": {
        "fixture": (str, REQUIRED),
        "n_points": (int, 10_000),
        "level": (int, 7),
        "points_file": (str, None),
        "levels_min": (int, 2),
        "levels_max": (int, 8),
    },
    "pulse-train": {
        "zeta0": (float, REQUIRED),
        "gammas": (_floats, REQUIRED),
        "period": (float, REQUIRED),
        "t_end": (float, REQUIRED),
        "sample_dt": (float, 10.0),
    },
}

KINDS = tuple(SCHEMAS)

# keys that must be strictly positive / non-negative when present
POSITIVE = {"dt", "t_end", "record_every", "n_segments", "sweeps", "chains", "fd_step", "zeta_core",
            "core_radius", "supersample", "nx", "dx", "window_radius", "frame_interval", "n", "n_points",
            "level", "period", "sample_dt", "fit_min", "fit_max", "epsilons"}
NON_NEGATIVE = {"core", "burn_in", "check_every", "levels_min"}

PRESETS = {
    "simulate-2d": {
        "co-rotating-pair": {"positions": "-1, 0; 1, 0", "gammas": repr(2 * math.pi) + ", " + repr(2 * math.pi),
                             "dt": "0.001", "t_end": repr(4 * math.pi), "record_every": "10"},
        "translating-pair": {"positions": "0, 0; 1, 0", "gammas": repr(2 * math.pi) + ", " + repr(-2 * math.pi),
                             "dt": "0.001", "t_end": "5", "record_every": "10"},
        "half-plane-pair": {"positions": "0, 1; 0.6, 1.3", "gammas": "1, 1", "domain": "half",
                            "dt": "0.005", "t_end": "60", "record_every": "10"},
        "sheet-rollup": {"positions": "; ".join(f"{i}, 0" for i in range(40)), "gammas": ", ".join(["1"] * 40),
                         "core": "0.1", "dt": "0.01", "t_end": "200", "record_every": "10"},
    },
    "lattice": {
        "beta-sweep": {"betas": "-0.5, 0, 0.5", "n_segments": "50", "sweeps": "100000",
                       "burn_in": "20000", "chains": "3", "record_every": "10"},
        "beta-sweep-quick": {"betas": "-0.5, 0, 0.5", "n_segments": "50", "sweeps": "2000",
                             "burn_in": "500", "chains": "1", "record_every": "1"},
    },
    "entropy": {
        "two-level": {"energies": "0, 1", "mean_energy": repr(2.0 / 3.0)},
        "two-level-sweep": {"energies": "0, 1",
                            "mean_energy": ", ".join(repr(float(x)) for x in np.linspace(0.05, 0.95, 19))},
    },
    "analyze-scales": {
        "power-law-slope": {"exponents": "-1.6"},
        "morph-sequence": {"exponents": ", ".join(repr(float(b)) for b in np.linspace(-1.0, -1.8, 9))},
    },
    "spectrum": {"k-3": {"n": "256", "exponent": "-3"}},
    "fractal-dim": {
        "segment": {"fixture": "segment", "n_points": "10000"},
        "square": {"fixture": "square", "n_points": "100000"},
        "koch": {"fixture": "koch", "level": "7"},
    },
    "pulse-train": {
        "cm1-like": {"zeta0": "0.1", "gammas": "0.1, 0.1, 0.1, 0.1, 0.1, 0.1", "period": "300",
                     "t_end": "1800", "sample_dt": "10"},
    },
}


@dataclass
class Scenario:
    kind: str
    params: dict
    seed: int = 0
    out_dir: Path = Path(".")
    preset: str | None = None
    threads: int = 1
    raw: dict = field(default_factory=dict)


def build_scenario(kind, raw: dict, seed=0, out_dir=".", preset=None, threads=1) -> Scenario:
    if kind not in SCHEMAS:
        raise ValidationError(f"unknown kind {kind!r}; valid kinds: {', '.join(KINDS)}")
    merged = {}
    if preset is not None:
        presets = PRESETS.get(kind, {})
        if preset not in presets:
            raise ValidationError(f"unknown preset {preset!r} for {kind}; valid presets: {', '.join(presets) or 'none'}")
        merged.update(presets[preset])
    merged.update(raw)
    schema = SCHEMAS[kind]
    unknown = sorted(set(merged) - set(schema))
    if unknown:
        raise ValidationError(f"unknown key {unknown[0]!r} for {kind}")
    params = {}
    for name, (parse, default) in schema.items():
        if name in merged:
            try:
                params[name] = parse(merged[name])
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"bad value for key {name!r}: {exc}") from exc
        elif default is REQUIRED:
            raise ValidationError(f"missing required key {name!r} for {kind}")
        else:
            params[name] = default
        _check_sign(name, params[name])
    return Scenario(kind, params, int(seed), Path(out_dir), preset, int(threads), merged)


def _check_sign(name, value):
    if value is None or name not in POSITIVE | NON_NEGATIVE:
        return
    values = value if isinstance(value, list) else [value]
    if name in POSITIVE and not all(v > 0 for v in values):
        raise ValidationError(f"key {name!r} must be positive")
    if name in NON_NEGATIVE and not all(v >= 0 for v in values):
        raise ValidationError(f"key {name!r} must be non-negative")


# -- runners ---------------------------------------------------------------------

def _run_simulate(sc: Scenario):
    p = sc.params
    if len(p["positions"]) != len(p["gammas"]):
        raise ValidationError("key 'gammas' must have one entry per position")
    system = pv.VortexSystem.from_arrays(p["positions"], p["gammas"], p["domain"], p["core"])
    traj = pv.integrate(system, p["dt"], p["t_end"], p["record_every"])
    out = sc.out_dir
    io.write_trajectory(out / "trajectory.csv", traj)
    io.write_diagnostics(out / "diagnostics.csv", traj)
    io.export_tracks_svg(traj, out / "tracks.svg")
    drift = pv.drift_report(traj)
    io.write_keyvalue(out / "report.txt", {f"drift_{k}": v for k, v in drift.items()}
                      | {"steps": int(round(p["t_end"] / p["dt"])), "frames": len(traj.times)})
    return ["trajectory.csv", "diagnostics.csv", "tracks.svg", "report.txt"], drift


def _chain_job(args):
    cfg, stream = args
    return L.run_chain(cfg, L.make_rng(cfg.seed, stream))


def _run_lattice(sc: Scenario):
    p = sc.params
    jobs = []
    for bi, beta in enumerate(p["betas"]):
        cfg = L.McConfig(beta=beta, n_segments=p["n_segments"], sweeps=p["sweeps"], burn_in=p["burn_in"],
                         seed=sc.seed, record_every=p["record_every"], cutoff=p["cutoff"],
                         pinned_distance=p["pinned_distance"], check_every=p["check_every"])
        jobs += [(cfg, bi * 1000 + c) for c in range(p["chains"])]
    if sc.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=sc.threads) as pool:
            results = list(pool.map(_chain_job, jobs))
    else:
        results = [_chain_job(j) for j in jobs]

    out = sc.out_dir
    rows = []
    for (cfg, stream), st in zip(jobs, results):
        for r, (e, ree, s) in enumerate(zip(st.energy_trace, st.ree_trace, st.straightness_trace)):
            rows.append((cfg.beta, stream % 1000, r, e, ree, s))
    io.write_csv(out / "traces.csv", ["beta", "chain", "record", "energy", "ree", "straightness"], rows)
    walk_rows = [(cfg.beta, stream % 1000, step, *site)
                 for (cfg, stream), st in zip(jobs, results)
                 for step, site in enumerate(st.final_walk.sites)]
    io.write_csv(out / "walks.csv", ["beta", "chain", "step", "x", "y", "z"], walk_rows)
    summary = {}
    for beta in p["betas"]:
        group = [st for (cfg, _), st in zip(jobs, results) if cfg.beta == beta]
        tag = fmt_beta(beta)
        summary[f"{tag}.mean_ree"] = float(np.mean([s.mean_ree for s in group]))
        summary[f"{tag}.se_ree"] = pooled_stderr([s.ree_trace for s in group])
        summary[f"{tag}.mean_straightness"] = float(np.mean([s.mean_straightness for s in group]))
        summary[f"{tag}.se_straightness"] = pooled_stderr([s.straightness_trace for s in group])
        summary[f"{tag}.mean_energy"] = float(np.mean([s.mean_energy for s in group]))
        summary[f"{tag}.acceptance_rate"] = float(np.mean([s.acceptance_rate for s in group]))
        dims = [s.axis_dimension.estimate for s in group if s.axis_dimension is not None]
        if dims:
            summary[f"{tag}.axis_dimension"] = float(np.mean(dims))
        summary[f"{tag}.max_energy_error"] = max(s.max_energy_error for s in group)
    io.write_keyvalue(out / "summary.txt", summary)
    return ["traces.csv", "walks.csv", "summary.txt"], summary


def fmt_beta(beta):
    return f"beta={beta:g}"


def pooled_stderr(traces, n_batches=20):
    """Standard error of the mean over equally long chains, from batch means."""
    se = [L.batch_stderr(t, n_batches) for t in traces]
    return float(np.sqrt(np.sum(np.square(se))) / len(se))


def _load_levels(p):
    if p["levels_file"]:
        header, rows = io.read_csv(p["levels_file"])
        E = [float(r[header.index("E")]) for r in rows]
        I = [float(r[header.index("I")]) for r in rows] if "I" in header else None
        return vg.EnsembleSpec(E, I)
    if p["energies"] is None:
        raise ValidationError("missing required key 'energies' (or 'levels_file') for entropy")
    return vg.EnsembleSpec(p["energies"], p["inertias"])


def _run_entropy(sc: Scenario):
    p = sc.params
    levels = _load_levels(p)
    out = sc.out_dir
    sols = [vg.solve_multipliers(levels, e, p["mean_inertia"]) for e in p["mean_energy"]]
    first = sols[0]
    report = {"mean_energy": p["mean_energy"][0], "beta": first.beta, "gamma": first.gamma,
              "Z": first.Z, "S": first.S, "T": first.T}
    io.write_keyvalue(out / "solution.txt", report)
    io.write_csv(out / "probabilities.csv", ["j", "E", "I", "p"],
                 zip(range(levels.k), levels.energies, levels.inertias, first.p))
    outputs = ["solution.txt", "probabilities.csv"]
    if len(sols) > 1:
        io.write_csv(out / "sweep.csv", ["mean_energy", "beta", "gamma", "S", "T"],
                     ((e, s.beta, s.gamma, s.S, s.T) for e, s in zip(p["mean_energy"], sols)))
        outputs.append("sweep.csv")
    return outputs, report


def _synthetic_vorticity(p, b):
    grid = F.make_grid(p["nx"], p["nx"], p["dx"])
    return F.make_power_law_vorticity(p["zeta_core"], p["core_radius"], b, grid, supersample=p["supersample"])


def _run_scales(sc: Scenario):
    p = sc.params
    fit = (p["fit_min"], p["fit_max"])
    out = sc.out_dir
    if p["field_file"]:
        frames = [io.read_field(p["field_file"])]
    else:
        frames = [_synthetic_vorticity(p, b) for b in p["exponents"]]
    outputs = []
    series = []
    for k, f in enumerate(frames):
        window = sa.default_window(f, p["window_radius"])
        s = sa.max_filtered_vorticity(f, p["epsilons"], window)
        series.append(s)
    lines = [sa.vorticity_line(s, fit) for s in series]
    io.write_csv(out / "scale_series.csv", ["frame", "epsilon", "zeta_max"],
                 ((k, e, z) for k, s in enumerate(series) for e, z in zip(s.epsilons, s.zeta_max)))
    outputs.append("scale_series.csv")
    first = lines[0]
    report = {"slope": first.slope, "intercept": first.intercept, "r2": first.r_squared,
              "fit_min": fit[0], "fit_max": fit[1], "classification": sa.classify_slope(first)}
    io.write_keyvalue(out / "line.txt", report)
    outputs.append("line.txt")
    if len(frames) > 1:
        times = [k * p["frame_interval"] for k in range(len(frames))]
        io.write_csv(out / "slope_series.csv", ["t", "slope", "classification"],
                     ((t, l.slope, sa.classify_slope(l)) for t, l in zip(times, lines)))
        outputs.append("slope_series.csv")
        first_hit = next((k for k, l in enumerate(lines) if sa.classify_slope(l) == sa.STRONG_TORNADIC), None)
        report["first_tornadic_frame"] = first_hit
        io.write_keyvalue(out / "line.txt", report)
    if not p["field_file"]:
        io.write_field(out / "field_000", frames[0])
        outputs += ["field_000.meta", "field_000.bin"]
    return outputs, report


def _run_spectrum(sc: Scenario):
    p = sc.params
    if p["u_file"] and p["v_file"]:
        u, v = io.read_field(p["u_file"]), io.read_field(p["v_file"])
        field = F.VectorField2D(u.grid, v.grid)
    else:
        field = sp.synthesize_power_law_field(p["n"], p["exponent"], L.make_rng(sc.seed), p["dx"])
    spec = sp.radial_energy_spectrum(field)
    dk = spec.k[0]
    fit_range = (p["fit_kmin_index"] * dk * (1 - 1e-9), p["fit_kmax_index"] * dk * (1 + 1e-9))
    fit = sp.fit_power_law(spec.k, spec.energy, fit_range)
    residuals = sp.compare_dissipation_laws(spec.k, spec.energy, fit_range)
    out = sc.out_dir
    io.write_csv(out / "spectrum.csv", ["k", "E"], zip(spec.k, spec.energy))
    report = {"exponent": fit.exponent, "prefactor": fit.prefactor, "r2": fit.r_squared,
              "parseval_ratio": spec.total / sp.physical_energy(field)}
    report |= {f"residual_{k}": v for k, v in residuals.items()}
    io.write_keyvalue(out / "report.txt", report)
    return ["spectrum.csv", "report.txt"], report


def fractal_fixture(name, rng, n_points=10_000, level=7):
    if name == "segment":
        t = rng.random(n_points)
        return np.column_stack([t, 0.5 * t])
    if name == "square":
        return rng.random((n_points, 2))
    if name == "koch":
        koch = sp.koch_curve(level)
        return sp.densify(koch, 1.0 / 3 ** level)
    if name == "twindragon":
        return sp.twindragon_boundary()
    raise ValidationError(f"unknown fractal fixture {name!r}")


def _run_fractal(sc: Scenario):
    p = sc.params
    if p["fixture"] == "file":
        if not p["points_file"]:
            raise ValidationError("missing required key 'points_file' for fixture 'file'")
        xs, ys = io.read_columns(p["points_file"], "x", "y")
        pts = np.column_stack([xs, ys])
    else:
        pts = fractal_fixture(p["fixture"], L.make_rng(sc.seed), p["n_points"], p["level"])
    scales = sp.default_box_scales(pts, range(p["levels_min"], p["levels_max"] + 1))
    res = sp.box_counting_dimension(pts, scales)
    out = sc.out_dir
    io.write_csv(out / "counts.csv", ["scale", "count"], zip(res.scales, res.counts))
    report = {"dimension": res.dimension, "ci_low": res.ci[0], "ci_high": res.ci[1], "r2": res.r_squared,
              "n_points": len(pts)}
    io.write_keyvalue(out / "report.txt", report)
    return ["counts.csv", "report.txt"], report


def _run_pulse(sc: Scenario):
    p = sc.params
    n = int(math.floor(p["t_end"] / p["sample_dt"] + 1e-9))
    times = p["sample_dt"] * np.arange(n + 1)
    zeta = pv.pulse_train_series(p["zeta0"], p["gammas"], p["period"], times)
    out = sc.out_dir
    io.write_csv(out / "series.csv", ["t", "zeta"], zip(times, zeta))
    final = pv.pulse_train_response(p["zeta0"], p["gammas"], p["period"], p["t_end"])
    report = {"zeta0": p["zeta0"], "zeta_final": final, "pulses": len(p["gammas"]), "t_end": p["t_end"]}
    io.write_keyvalue(out / "report.txt", report)
    return ["series.csv", "report.txt"], report


RUNNERS = {
    "simulate-2d": _run_simulate,
    "lattice": _run_lattice,
    "entropy": _run_entropy,
    "analyze-scales": _run_scales,
    "spectrum": _run_spectrum,
    "fractal-dim": _run_fractal,
    "pulse-train": _run_pulse,
}


@dataclass
class RunReport:
    kind: str
    out_dir: Path
    outputs: list
    summary: dict
    wall_time: float


def run_scenario(sc: Scenario) -> RunReport:
    """Execute one scenario and write its outputs plus ``manifest.txt``."""
    sc.out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    outputs, summary = RUNNERS[sc.kind](sc)
    wall = time.perf_counter() - start
    manifest = {"kind": sc.kind, "preset": sc.preset or "none", "seed": sc.seed,
                "toolkit_version": __version__, "threads": sc.threads, "wall_time_s": wall}
    manifest |= {f"param.{k}": v for k, v in sorted(sc.raw.items())}
    manifest["outputs"] = ", ".join(outputs)
    io.write_keyvalue(sc.out_dir / "manifest.txt", manifest)
    return RunReport(sc.kind, sc.out_dir, outputs, summary, wall)


def default_output_dir(kind):
    root = os.environ.get(OUTPUT_ROOT_ENV)
    return Path(root or "vortexgas-out") / kind


def make_parser():
    parser = argparse.ArgumentParser(prog="vortexgas", description=__doc__.splitlines()[0])
    parser.add_argument("kind", help="one of: " + ", ".join(KINDS))
    parser.add_argument("--config", type=Path, help="key:value parameter file")
    parser.add_argument("--preset", help="named parameter set for the kind")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, help=f"output directory (default ${OUTPUT_ROOT_ENV}/<kind>)")
    parser.add_argument("--threads", type=int, default=1, help="maximum worker processes")
    return parser


def _fail(code, message, status):
    print(f"error[{code}]: {message}", file=sys.stderr)
    return status


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    if args.kind not in SCHEMAS:
        return _fail(ValidationError.code, f"unknown kind {args.kind!r}; valid kinds: {', '.join(KINDS)}",
                     EXIT_USAGE)
    if args.config is None and args.preset is None:
        return _fail(ValidationError.code, "give --config FILE and/or --preset NAME", EXIT_USAGE)
    if args.threads < 1:
        return _fail(ValidationError.code, "--threads must be >= 1", EXIT_USAGE)
    try:
        raw = io.read_keyvalue(args.config) if args.config else {}
    except OSError as exc:
        return _fail("E_IO", f"cannot read config: {exc}", EXIT_USAGE)
    except ValidationError as exc:
        return _fail(exc.code, str(exc), EXIT_USAGE)
    out = args.out or default_output_dir(args.kind)
    try:
        sc = build_scenario(args.kind, raw, args.seed, out, args.preset, args.threads)
    except ValidationError as exc:
        return _fail(exc.code, str(exc), EXIT_USAGE)
    try:
        report = run_scenario(sc)
    except ValidationError as exc:
        return _fail(exc.code, f"{args.kind}: {exc}", EXIT_USAGE)
    except VortexGasError as exc:
        return _fail(exc.code, f"{args.kind}: {exc}", EXIT_MODULE)
    except (ValueError, OSError) as exc:
        return _fail("E_RUNTIME", f"{args.kind}: {exc}", EXIT_MODULE)
    print(f"{report.kind}: wrote {len(report.outputs)} files to {report.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
