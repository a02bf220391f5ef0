"""Command-line interface.

Exit codes: 0 success or acceptance pass, 1 acceptance failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .. import analysis
from ..emucore import ENGINES, run
from ..errors import BandExceeded, ConfigError, EmulatorError, MissingRef, SchemaError
from ..fdelay import design
from ..scatter import MonostaticTable, ScatterProfile, isotropic_point, monostatic_table, omp_fit_monostatic
from ..sphharm import ShBasisSpec, fit_antenna_table
from . import experiments
from .scenario_file import antenna_to_dict, profile_to_dict, scale_time, scenario_from_dict
from .waveforms import read_cf32, write_cf32

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_doc(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise MissingRef(p)
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc


def cmd_run(args) -> int:
    if args.scenario is None:
        raise ConfigError("run needs --scenario")
    doc = _load_doc(args.scenario)
    if args.fs_scale != 1.0:
        doc = scale_time(doc, args.fs_scale)
    scn = scenario_from_dict(doc, Path(args.scenario).parent)
    result = run(scn, args.engine, workers=args.workers)
    out = _out_dir(args)
    for node_id, block in result.receivers.items():
        write_cf32(out / f"{node_id}.cf32", block.data, {
            "node": node_id, "fs_hz": scn.fs, "fc_hz": scn.fc, "start_index": block.start_index,
            "latency_samples": result.latency_samples[node_id], "engine": args.engine})
    (out / "opcount.json").write_text(json.dumps({
        "engine": result.engine, "per_sample_ops": result.opcount.per_sample_ops,
        "N": result.opcount.N, "R": result.opcount.R, "convention": result.opcount.convention}, indent=2))
    print(f"wrote {len(result.receivers)} receiver streams to {out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    runner = experiments.RUNNERS[args.name]
    kwargs = {"out": args.out}
    if args.name in ("interferometry", "beamsweep", "complexscatter", "swerling"):
        kwargs["engine"] = args.engine
    if args.name in ("beamsweep", "complexscatter", "swerling"):
        kwargs["seed"] = args.seed
    if args.name == "interferometry":
        kwargs["fs_scale"] = args.fs_scale
        if args.scenario:
            kwargs["doc"] = _load_doc(args.scenario)
    result = runner(**kwargs)
    print(json.dumps(result.summary(), indent=2, default=str))
    print(f"{args.name}: {'PASS' if result.passed else 'FAIL'}")
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_design_filter(args) -> int:
    if args.mu is not None:
        f = design(args.method, args.taps, args.mu)
        print(",".join(f"{t:.12g}" for t in f.taps))
        return EXIT_OK
    result = experiments.filtertable(out=args.out, settings=args.settings)
    for row in experiments.filter_rows(args.settings):
        print(",".join(str(v) for v in row[:5]))
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_fit_antenna(args) -> int:
    if args.table:
        data = np.load(args.table)
        pos = data["positions_wl"] if "positions_wl" in data.files else None
        D = args.D if args.D else (pos.shape[0] if pos is not None else 1)
        fit = fit_antenna_table(data["table"], (data["steer_az"], data["steer_pol"]),
                                (data["field_az"], data["field_pol"]), D, ShBasisSpec(args.order),
                                known_phase_geometry=pos, seed=args.seed)
    else:
        fit = experiments.fit_upa(args.order, seed=args.seed)
    out = _out_dir(args)
    (out / "antenna.json").write_text(json.dumps(antenna_to_dict(fit.model)))
    summary = {"order": args.order, "D": fit.model.D, "n_parameters": fit.model.n_parameters,
               "train_nmse": fit.train_nmse, "test_nmse": fit.test_nmse}
    (out / "antenna_fit.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _demo_monostatic(seed: int):
    """Three on-grid isotropic points observed over 64 frequencies and 200 directions."""
    rng = np.random.default_rng(seed)
    c = np.linspace(-1.5, 1.5, 7)
    grid = np.stack(np.meshgrid(c, c, c, indexing="ij"), -1).reshape(-1, 3)
    pick = rng.choice(grid.shape[0], 3, replace=False)
    truth = ScatterProfile(ShBasisSpec(0), [isotropic_point(grid[i], rng.normal() + 1j * rng.normal())
                                            for i in pick])
    az, pol = experiments.fibonacci_directions(200)
    return monostatic_table(truth, np.linspace(9.5e9, 10.5e9, 64), az, pol), grid


def cmd_fit_scatter(args) -> int:
    if args.table:
        data = np.load(args.table)
        table = MonostaticTable(data["frequencies"], data["azimuth_deg"], data["polar_deg"], data["values"])
        grid = data["grid"]
    else:
        table, grid = _demo_monostatic(args.seed)
    fit = omp_fit_monostatic(table, grid, args.K, ShBasisSpec(args.order))
    out = _out_dir(args)
    (out / "profile.json").write_text(json.dumps(profile_to_dict(fit.profile)))
    summary = {"K": args.K, "order": args.order, "nmse": fit.nmse, "selected": [int(i) for i in fit.selected]}
    (out / "profile_fit.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_analyze(args) -> int:
    if not args.input:
        raise ConfigError("analyze needs --input")
    x = read_cf32(args.input)
    out = _out_dir(args)
    stem = Path(args.input).stem
    if args.mode == "periodogram":
        if args.fs is None:
            raise ConfigError("periodogram needs --fs")
        f, p = analysis.periodogram(x, args.fs)
        path = experiments.write_csv(out / f"{stem}_periodogram.csv", ["freq_hz", "power"], zip(f, p))
    else:
        if not args.template:
            raise ConfigError("matched filtering needs --template")
        mf = analysis.matched_filter(x, read_cf32(args.template))
        path = experiments.write_csv(out / f"{stem}_mf.csv", ["lag", "magnitude"], zip(mf.lags, mf.magnitude))
        print(f"peak lag {mf.peak_lag}, magnitude {mf.peak_mag:.6g}")
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", metavar="PATH")
    common.add_argument("--engine", choices=ENGINES, default="direct")
    common.add_argument("--out", metavar="DIR", default="out")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--fs-scale", type=float, default=1.0, metavar="F")

    p = argparse.ArgumentParser(prog="dpemu", description="Direct-path RF channel emulator.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", parents=[common], help="emulate a scenario file")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("experiment", parents=[common], help="run a named experiment")
    s.add_argument("name", choices=experiments.NAMES)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("design-filter", parents=[common], help="fractional-delay filter metrics or taps")
    s.add_argument("--method", choices=("spline", "legendre"), default="spline")
    s.add_argument("--taps", type=int, choices=(4, 8), default=4)
    s.add_argument("--mu", type=float, help="print the taps for one fractional delay instead")
    s.add_argument("--settings", type=int, default=64)
    s.set_defaults(func=cmd_design_filter)

    s = sub.add_parser("fit-antenna", parents=[common], help="fit a separable antenna model")
    s.add_argument("--table", metavar="NPZ", help="table, steer_az, steer_pol, field_az, field_pol[, positions_wl]")
    s.add_argument("--order", type=int, default=3)
    s.add_argument("--D", type=int, help="rank when element positions are not given")
    s.set_defaults(func=cmd_fit_antenna)

    s = sub.add_parser("fit-scatter", parents=[common], help="fit a point profile to a monostatic table")
    s.add_argument("--table", metavar="NPZ", help="frequencies, azimuth_deg, polar_deg, values, grid")
    s.add_argument("--K", type=int, default=3)
    s.add_argument("--order", type=int, default=0)
    s.set_defaults(func=cmd_fit_scatter)

    s = sub.add_parser("analyze", parents=[common], help="matched filter or periodogram of a cf32 file")
    s.add_argument("--input", metavar="CF32")
    s.add_argument("--template", metavar="CF32")
    s.add_argument("--mode", choices=("mf", "periodogram"), default="mf")
    s.add_argument("--fs", type=float)
    s.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BandExceeded) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EmulatorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
