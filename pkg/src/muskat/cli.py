"""Command-line entry points: run, verify, sweep, convert, radius.

Configuration is JSON with strict unknown-key rejection; every run
directory receives the ledger CSV, a final checkpoint and a summary
JSON.  Identical configuration and seed produce bit-identical outputs.
Exit codes: 0 success, 2 configuration error, 3 pinch-off/blow-up with
partial outputs, 4 inequality violation.
"""

from __future__ import annotations

import argparse
import itertools
import math
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .analysis import (
    EnergyLedger,
    analyticity_radius_fit,
    constants_lab,
    smallness_check,
    verify_energy,
)
from .errors import BlowupError, InequalityViolation, PinchOffError
from .evolution import linear_symbol, load_checkpoint, run, write_checkpoint
from .nondim import PhysicalParams, check_dimensional_theorem, to_dimensionless
from .params import DimensionlessParams
from .spectral import PeriodicSpectrum, wiener_norm

WORKERS_ENV = "MUSKAT_WORKERS"

_PARAM_KEYS = {
    "eps", "delta", "nu", "alpha", "mu", "n_modes", "m_nodes", "dt", "t_final", "wide_mu_range",
}
_INITIAL_KEYS = {"modes", "checkpoint", "rescale_norm"}
_OUTPUT_KEYS = {"directory", "interval", "checkpoint_interval"}
_FLAG_KEYS = {"linear_only", "override_smallness"}
_TOP_KEYS = {"params", "initial", "output", "flags"}


class ConfigError(ValueError):
    pass


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def parse_config(data: dict) -> dict:
    """Validate a run configuration; returns a normalized dict."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    _reject_unknown(data, _TOP_KEYS, "configuration")
    if "params" not in data or "initial" not in data:
        raise ConfigError("configuration needs 'params' and 'initial' sections")
    _reject_unknown(data["params"], _PARAM_KEYS, "params")
    try:
        params = DimensionlessParams(**data["params"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid params: {exc}") from exc
    init = data["initial"]
    _reject_unknown(init, _INITIAL_KEYS, "initial")
    sources = [k for k in ("modes", "checkpoint") if k in init]
    if len(sources) != 1:
        raise ConfigError("exactly one of 'modes' or 'checkpoint' must be given")
    out = dict(data.get("output", {}))
    _reject_unknown(out, _OUTPUT_KEYS, "output")
    interval = float(out.get("interval", 0.1))
    if interval <= 0:
        raise ConfigError("output interval must be positive")
    flags = dict(data.get("flags", {}))
    _reject_unknown(flags, _FLAG_KEYS, "flags")
    return {
        "params": params,
        "initial": init,
        "directory": out.get("directory", "muskat_out"),
        "interval": interval,
        "checkpoint_interval": out.get("checkpoint_interval"),
        "linear_only": bool(flags.get("linear_only", False)),
        "override_smallness": bool(flags.get("override_smallness", False)),
    }


def _initial_spectrum(init: dict, params: DimensionlessParams) -> PeriodicSpectrum:
    if "checkpoint" in init:
        state, _ = load_checkpoint(init["checkpoint"])
        h0 = state.h
    else:
        modes = {int(n): complex(re, im) for n, re, im in init["modes"]}
        h0 = PeriodicSpectrum.from_modes(params.n_modes, modes)
    if "rescale_norm" in init:
        current = wiener_norm(h0, 1.0, 0.0)
        if current == 0:
            raise ConfigError("cannot rescale the zero spectrum")
        h0 = (float(init["rescale_norm"]) / current) * h0
    return h0


def _summary(ledger: EnergyLedger, params: DimensionlessParams, h0_norm: float) -> dict:
    report = verify_energy(ledger, h0_norm, params)
    last = ledger.rows[-1]
    verdict = "stable-decay" if params.stable_regime else "RT-unstable regime"
    if params.stable_regime and report["decay_rate_measured"] < 0:
        verdict = "growth-in-stable-regime"
    return {
        "final_t": last["t"],
        "final_norms": {k: last[k] for k in ("h_s0", "h_s1", "h1_mu", "h_s4")},
        "decay_rate": report["decay_rate_measured"],
        "rate_guaranteed": report["rate_guaranteed"],
        "energy_monotone": report["energy_monotone_ok"],
        "envelope_ok": report["envelope_ok"],
        "pinch_ok": report["pinch_ok"],
        "linear_rate_mode1": linear_symbol(1, params),
        "initial_norm": h0_norm,
        "rows": len(ledger.rows),
        "verdict": verdict,
    }


def cmd_run(config: dict, directory: str | None = None) -> int:
    try:
        cfg = parse_config(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    params = cfg["params"]
    outdir = Path(directory or cfg["directory"])
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        h0 = _initial_spectrum(cfg["initial"], params)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    h0_norm = wiener_norm(h0, 1.0, 0.0)
    small = smallness_check(h0, params)
    ckpt = outdir / "checkpoint.bin"
    code = 0
    try:
        ledger, state = run(
            h0,
            params,
            linear_only=cfg["linear_only"],
            override_smallness=cfg["override_smallness"],
            output_interval=cfg["interval"],
            checkpoint_path=str(ckpt),
            checkpoint_interval=cfg["checkpoint_interval"],
        )
    except (PinchOffError, BlowupError) as exc:
        ledger = exc.ledger
        state = None
        code = 3
        print(f"aborted: {exc}", file=sys.stderr)
    ledger.write_csv(outdir / "ledger.csv")
    summary = _summary(ledger, params, h0_norm)
    summary["smallness"] = {c.name: {"threshold": c.threshold, "actual": c.actual, "passed": c.passed}
                            for c in small.conditions}
    summary["completed"] = code == 0
    with open(outdir / "summary.json", "w") as f:
        json.dump(summary, f, sort_keys=True, indent=1)
    if state is not None:
        write_checkpoint(str(ckpt), state, params)
    return code


def _kernel_report_csv() -> str:
    from .potentials import kernel_integral_bounds

    lines = ["kappa,j,l,branch,bound,measured,ratio"]
    for kappa in (0.1, 1.0, 10.0, 100.0):
        for row in kernel_integral_bounds(kappa):
            for branch in ("lower", "upper"):
                lines.append(
                    f"{kappa!r},{row['j']},{row['l']},{branch},"
                    f"{row['bound_' + branch]!r},{row['measured_' + branch]!r},"
                    f"{row['ratio_' + branch]!r}"
                )
    return "\n".join(lines) + "\n"


def cmd_verify(trials: int, seed: int, directory: str = "muskat_verify") -> int:
    outdir = Path(directory)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        report = constants_lab(seed, trials)
    except InequalityViolation as exc:
        bundle = outdir / "counterexample.json"
        with open(bundle, "w") as f:
            json.dump(exc.counterexample, f, sort_keys=True, indent=1)
        if hasattr(exc, "report"):
            (outdir / "constants.csv").write_text(exc.report.to_csv())
        print(f"inequality violation: {exc}; counterexample at {bundle}", file=sys.stderr)
        return 4
    (outdir / "constants.csv").write_text(report.to_csv())
    (outdir / "kernels.csv").write_text(_kernel_report_csv())
    print(f"verified {len(report.rows)} inequalities x {trials} trials: all ratios <= 1")
    return 0


def _sweep_point(args: tuple) -> dict:
    index, point, base, outdir = args
    config = json.loads(json.dumps(base))
    config["params"].update({k: point[k] for k in ("eps", "delta", "nu") if k in point})
    config["params"].pop("alpha", None)
    # the admissible analyticity rate depends on the point: clamp it so a
    # sweep across the stability threshold completes at every point
    nu = config["params"]["nu"]
    delta = config["params"]["delta"]
    mu = config["params"].get("mu", 0.0)
    if mu > 0.0:
        denom = 4.0 if config["params"].get("wide_mu_range") else 16.0
        limit = max(0.0, math.sqrt(delta) / denom * (nu * math.sqrt(delta) - 1.0))
        config["params"]["mu"] = min(mu, 0.999 * limit)
    if "amplitude" in point:
        config["initial"]["rescale_norm"] = point["amplitude"]
    pdir = Path(outdir) / f"point_{index:04d}"
    code = cmd_run(config, directory=str(pdir))
    row = {"index": index, **point, "exit": code}
    summary_path = pdir / "summary.json"
    if summary_path.exists():
        summary = json.loads(summary_path.read_text())
        row.update(
            decay_rate=summary["decay_rate"],
            verdict=summary["verdict"],
            envelope_ok=summary["envelope_ok"],
        )
    return row


def cmd_sweep(config: dict, directory: str = "muskat_sweep") -> int:
    sweep = config.pop("sweep", None)
    if not sweep:
        print("sweep configuration needs a 'sweep' section", file=sys.stderr)
        return 2
    axes = {k: list(v) for k, v in sweep.items()}
    if not axes or any(len(v) == 0 for v in axes.values()):
        print("sweep grid must be nonempty", file=sys.stderr)
        return 2
    names = sorted(axes)
    points = [dict(zip(names, combo)) for combo in itertools.product(*(axes[n] for n in names))]
    outdir = Path(directory)
    outdir.mkdir(parents=True, exist_ok=True)
    workers = int(os.environ.get(WORKERS_ENV, "0")) or None
    tasks = [(i, pt, config, str(outdir)) for i, pt in enumerate(points)]
    if workers == 1 or len(tasks) == 1:
        rows = [_sweep_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    rows.sort(key=lambda r: r["index"])
    cols = ["index", *names, "exit", "decay_rate", "verdict", "envelope_ok"]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(str(r.get(c, "")) for c in cols))
    (outdir / "sweep.csv").write_text("\n".join(lines) + "\n")
    return 0


def cmd_convert(physical: dict, h0_norm: float | None) -> int:
    try:
        p = PhysicalParams(**physical)
    except (TypeError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    params, scales = to_dimensionless(p)
    out = {
        "eps": params.eps,
        "delta": params.delta,
        "nu": params.nu,
        "alpha": params.alpha,
        "stable_regime": params.stable_regime,
        "time_scale": scales.time,
        "potential_scale": scales.potential,
    }
    if h0_norm is not None:
        out["dimensional_checks"] = {
            c.name: {"threshold": c.threshold, "actual": c.actual, "passed": c.passed}
            for c in check_dimensional_theorem(p, h0_norm)
        }
    print(json.dumps(out, sort_keys=True, indent=1))
    return 0


def cmd_radius(checkpoint: str) -> int:
    state, _ = load_checkpoint(checkpoint)
    fit = analyticity_radius_fit(state.h)
    print(
        json.dumps(
            {
                "t": state.t,
                "radius": fit.radius,
                "band_limited": fit.band_limited,
                "points": fit.n_points,
            },
            sort_keys=True,
        )
    )
    return 0


def _load_json(path: str) -> dict:
    with open(path) as f:
        return json.load(f)


def _apply_overrides(config: dict, args) -> None:
    """Command-line flags mirror the configuration fields."""
    params = config.setdefault("params", {})
    for key in ("eps", "delta", "nu", "mu", "dt", "t_final", "n_modes", "m_nodes"):
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    if args.wide_mu_range:
        params["wide_mu_range"] = True
    if args.interval is not None:
        config.setdefault("output", {})["interval"] = args.interval
    if args.rescale_norm is not None:
        config.setdefault("initial", {})["rescale_norm"] = args.rescale_norm
    if args.linear_only or args.override_smallness:
        flags = config.setdefault("flags", {})
        if args.linear_only:
            flags["linear_only"] = True
        if args.override_smallness:
            flags["override_smallness"] = True


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="muskat",
        description="Pseudo-spectral simulator and inequality lab for the "
        "confined one-phase Muskat flow with surface tension.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate one trajectory")
    p_run.add_argument("config", help="JSON run configuration")
    p_run.add_argument("--outdir", default=None)
    for name in ("eps", "delta", "nu", "mu", "dt", "t-final"):
        p_run.add_argument(f"--{name}", type=float, default=None)
    for name in ("n-modes", "m-nodes"):
        p_run.add_argument(f"--{name}", type=int, default=None)
    p_run.add_argument("--interval", type=float, default=None)
    p_run.add_argument("--rescale-norm", type=float, default=None)
    p_run.add_argument("--linear-only", action="store_true")
    p_run.add_argument("--override-smallness", action="store_true")
    p_run.add_argument("--wide-mu-range", action="store_true")

    p_verify = sub.add_parser("verify", help="run the inequality battery")
    p_verify.add_argument("--trials", type=int, default=1000)
    p_verify.add_argument("--seed", type=int, default=20260809)
    p_verify.add_argument("--outdir", default="muskat_verify")

    p_sweep = sub.add_parser("sweep", help="parameter sweep of short runs")
    p_sweep.add_argument("config", help="JSON run configuration with a 'sweep' section")
    p_sweep.add_argument("--outdir", default="muskat_sweep")

    p_conv = sub.add_parser("convert", help="physical to dimensionless parameters")
    p_conv.add_argument("physical", help="JSON file with the physical parameters")
    p_conv.add_argument("--h0-norm", type=float, default=None)

    p_rad = sub.add_parser("radius", help="analyticity-radius fit of a checkpoint")
    p_rad.add_argument("checkpoint")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = _load_json(args.config)
            _apply_overrides(config, args)
            return cmd_run(config, directory=args.outdir)
        if args.command == "verify":
            if args.trials < 1:
                print("need at least one trial", file=sys.stderr)
                return 2
            return cmd_verify(args.trials, args.seed, args.outdir)
        if args.command == "sweep":
            return cmd_sweep(_load_json(args.config), directory=args.outdir)
        if args.command == "convert":
            return cmd_convert(_load_json(args.physical), args.h0_norm)
        if args.command == "radius":
            return cmd_radius(args.checkpoint)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
