"""Command-line front end.

Subcommands:
    tune      analytic (chi2, windowed) or Monte-Carlo (cusum) thresholds
    simulate  run a scenario file, write a per-step trace CSV (+ summary)
    sweep     windowed-threshold budget table beta(ell)/ell over windows
    reactor   built-in benchmark study: 8 attack traces + report.json
    arl       attack-free average run length of a scenario's detector

Scenario files are JSON documents validated against the shipped schema
(`resdet/schemas/scenario.schema.json`); the bundled benchmark scenario at
`resdet/data/reactor.json` is a complete example.  The RS_SEED environment
variable supplies the default seed wherever none is given explicitly.

Exit codes: 0 success; 2 flag, schema, or domain errors; 3 model
pathologies (unstable loop or estimator, non-detectable model).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import detectors as det_mod
from . import reactor as reactor_mod
from . import sim as sim_mod
from .attacks import plan_attack
from .model import PlantModel, build_closed_loop

__all__ = ["main", "load_scenario", "scenario_schema"]

EXIT_USAGE = 2
EXIT_MODEL = 3

_TRACE_HEADER = "k,norm_x,z,stat,alarm,attack_active"


class CliError(Exception):
    """Carries the process exit code alongside the message."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _default_seed() -> int:
    raw = os.environ.get("RS_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CliError(EXIT_USAGE, f"RS_SEED must be an integer, got {raw!r}") from None


def _fmt(value: float) -> str:
    """Shortest round-trip decimal capped at 12 significant digits."""
    return format(float(value), ".12g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def scenario_schema() -> dict:
    with resources.files("resdet").joinpath("schemas/scenario.schema.json").open(
        "r", encoding="utf-8"
    ) as fh:
        return json.load(fh)


def _load_document(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_USAGE, f"malformed JSON in {path}: {exc}") from exc
    try:
        jsonschema.validate(doc, scenario_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(part) for part in exc.absolute_path) or "(root)"
        raise CliError(EXIT_USAGE, f"scenario schema error at {where}: {exc.message}") from exc
    return doc


def _build_model(doc: dict):
    plant_doc = doc["plant"]
    try:
        plant = PlantModel(
            np.asarray(plant_doc["F"], dtype=float),
            np.asarray(plant_doc["G"], dtype=float),
            np.asarray(plant_doc["C"], dtype=float),
            np.asarray(plant_doc["R1"], dtype=float),
            np.asarray(plant_doc["R2"], dtype=float),
        )
    except ValueError as exc:
        raise CliError(EXIT_USAGE, f"invalid plant: {exc}") from exc

    k_fb = np.asarray(doc["controller"]["K"], dtype=float)
    if k_fb.shape != (plant.m, plant.n):
        raise CliError(
            EXIT_USAGE,
            f"controller K must be {plant.m}x{plant.n}, got {k_fb.shape[0]}x{k_fb.shape[1]}",
        )
    l_gain = None
    if "estimator" in doc and "L" in doc["estimator"]:
        l_gain = np.asarray(doc["estimator"]["L"], dtype=float)
        if l_gain.shape != (plant.n, plant.p):
            raise CliError(
                EXIT_USAGE,
                f"estimator L must be {plant.n}x{plant.p}, got {l_gain.shape[0]}x{l_gain.shape[1]}",
            )
    try:
        return build_closed_loop(plant, k_fb, l_gain=l_gain)
    except ValueError as exc:
        code = EXIT_MODEL if "unstable" in str(exc) else EXIT_USAGE
        raise CliError(code, str(exc)) from exc
    except RuntimeError as exc:
        raise CliError(EXIT_MODEL, str(exc)) from exc


def _check_far(far: float) -> float:
    far = float(far)
    if not (0.0 < far < 1.0):
        raise CliError(EXIT_USAGE, f"false-alarm rate must lie in (0, 1), got {far}")
    return far


def _build_detector(doc: dict, model, seed: int):
    det_doc = doc["detector"]
    kind = det_doc["kind"]
    p = model.plant.p
    try:
        if kind == "chi2":
            if "alpha" in det_doc:
                return det_mod.ChiSqDetector(float(det_doc["alpha"]))
            if "far" in det_doc:
                return det_mod.ChiSqDetector(det_mod.tune_chi2(p, _check_far(det_doc["far"])))
            raise CliError(EXIT_USAGE, "chi2 detector requires alpha or far")
        if kind == "windowed":
            if "window" not in det_doc:
                raise CliError(EXIT_USAGE, "windowed detector requires a window")
            ell = int(det_doc["window"])
            if "beta" in det_doc:
                return det_mod.WindowedChiSqDetector(float(det_doc["beta"]), ell)
            if "far" in det_doc:
                beta = det_mod.tune_windowed(p, ell, _check_far(det_doc["far"]))
                return det_mod.WindowedChiSqDetector(beta, ell)
            raise CliError(EXIT_USAGE, "windowed detector requires beta or far")
        if kind == "cusum":
            b = float(det_doc.get("b", p))
            if "tau" in det_doc:
                return det_mod.CusumDetector(float(det_doc["tau"]), b)
            if "far" in det_doc:
                tau = det_mod.tune_cusum_tau(
                    model,
                    b=b,
                    a_star=_check_far(det_doc["far"]),
                    mc=int(det_doc.get("mc", 1_000_000)),
                    seed=seed,
                )
                return det_mod.CusumDetector(tau, b)
            raise CliError(EXIT_USAGE, "cusum detector requires tau or far")
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc
    raise CliError(EXIT_USAGE, f"unknown detector kind {kind!r}")


def _describe_detector(detector) -> dict:
    if isinstance(detector, det_mod.ChiSqDetector):
        return {"kind": "chi2", "params": {"alpha": detector.alpha}}
    if isinstance(detector, det_mod.WindowedChiSqDetector):
        return {"kind": "windowed", "params": {"beta": detector.beta, "window": detector.ell}}
    return {"kind": "cusum", "params": {"tau": detector.tau, "b": detector.b}}


def load_scenario(path: str, seed_override: Optional[int] = None) -> sim_mod.Scenario:
    """Parse, schema-validate, and cross-check a scenario file.

    Raises CliError with the appropriate exit code on any defect.
    """
    doc = _load_document(path)
    model = _build_model(doc)

    sim_doc = doc.get("sim", {})
    steps = int(sim_doc.get("steps", 1000))
    burn_in = int(sim_doc.get("burn_in", 50))
    if seed_override is not None:
        seed = int(seed_override)
    elif "seed" in sim_doc:
        seed = int(sim_doc["seed"])
    else:
        seed = _default_seed()
    mc_runs = int(sim_doc.get("mc_runs", 200))
    tail_fraction = float(sim_doc.get("tail_fraction", 0.5))

    detector = _build_detector(doc, model, seed)

    plan = None
    attack_doc = doc.get("attack")
    if attack_doc is not None and attack_doc.get("kind", "none") != "none":
        direction = attack_doc.get("direction", "worst")
        if isinstance(direction, list):
            direction = np.asarray(direction, dtype=float)
        try:
            plan = plan_attack(
                model,
                detector,
                k_star=int(attack_doc.get("k_star", burn_in + 1)),
                direction=direction,
                kind=attack_doc["kind"],
                saturation_mode=attack_doc.get("mode", "static"),
                magnitude=attack_doc.get("magnitude"),
            )
        except (ValueError, TypeError) as exc:
            raise CliError(EXIT_USAGE, f"invalid attack: {exc}") from exc

    try:
        return sim_mod.Scenario(
            model=model,
            detector=detector,
            plan=plan,
            steps=steps,
            burn_in=burn_in,
            seed=seed,
            mc_runs=mc_runs,
            tail_fraction=tail_fraction,
        )
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc


def _write_trace_csv(path, trace: sim_mod.SimulationTrace) -> None:
    norm_x = trace.norm_x
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_TRACE_HEADER + "\n")
        for i in range(trace.k.size):
            fh.write(
                f"{int(trace.k[i])},{_fmt(norm_x[i])},{_fmt(trace.z[i])},"
                f"{_fmt(trace.stat[i])},{int(trace.alarm[i])},{int(trace.attack_active[i])}\n"
            )


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2)
        fh.write("\n")


def _cmd_tune(args) -> int:
    far = _check_far(args.far)
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        if args.detector == "chi2":
            if args.sensors is None:
                raise CliError(EXIT_USAGE, "chi2 tuning requires --sensors")
            threshold = det_mod.tune_chi2(args.sensors, far)
            params = {"p": args.sensors}
        elif args.detector == "windowed":
            if args.sensors is None or args.window is None:
                raise CliError(EXIT_USAGE, "windowed tuning requires --sensors and --window")
            threshold = det_mod.tune_windowed(args.sensors, args.window, far)
            params = {"p": args.sensors, "window": args.window}
        else:
            if args.scenario is None:
                raise CliError(EXIT_USAGE, "cusum tuning requires --scenario (a model to calibrate on)")
            doc = _load_document(args.scenario)
            model = _build_model(doc)
            if args.sensors is not None and args.sensors != model.plant.p:
                raise CliError(
                    EXIT_USAGE,
                    f"--sensors {args.sensors} contradicts the scenario model (p={model.plant.p})",
                )
            b = float(model.plant.p)
            threshold = det_mod.tune_cusum_tau(model, b=b, a_star=far, mc=args.mc, seed=seed)
            params = {"p": model.plant.p, "b": b, "mc": args.mc, "seed": seed}
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc
    print(json.dumps(_jsonable({
        "detector": args.detector,
        "params": params,
        "threshold": threshold,
        "far": far,
    })))
    return 0


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    trace = sim_mod.run(scenario)
    _write_trace_csv(args.out, trace)
    if args.summary is None:
        return 0

    predicted = None
    relative_error = None
    if scenario.attacked:
        ensemble = sim_mod.run_ensemble(scenario)
        try:
            measured, predicted, relative_error = sim_mod.measure_steady_deviation(ensemble)
        except ValueError:
            # pulsed schedule: no constant-forcing prediction, measure only
            measured = sim_mod.steady_deviation_estimate(ensemble)
    else:
        tail = max(1, scenario.steps // 2)
        measured = float(np.linalg.norm(trace.x[scenario.steps - tail:].mean(axis=0)))
    _write_json(args.summary, {
        "alarms": int(trace.alarm.sum()),
        "measured_deviation": measured,
        "predicted_gamma": predicted,
        "relative_error": relative_error,
    })
    return 0


def _cmd_sweep(args) -> int:
    try:
        rates = [float(tok) for tok in args.far.split(",") if tok.strip()]
    except ValueError as exc:
        raise CliError(EXIT_USAGE, f"--far must be a comma-separated list of rates: {exc}") from exc
    if not rates:
        raise CliError(EXIT_USAGE, "--far must name at least one rate")
    for far in rates:
        _check_far(far)
    if args.sensors < 1:
        raise CliError(EXIT_USAGE, "--sensors must be >= 1")
    try:
        rows = sim_mod.sweep_window_contours(args.sensors, rates, args.ell_max)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("far,ell,beta,beta_over_ell\n")
        for far, ell, beta, budget in rows:
            fh.write(f"{_fmt(far)},{int(ell)},{_fmt(beta)},{_fmt(budget)}\n")
    return 0


def _cmd_reactor(args) -> int:
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"cannot create --out-dir: {exc}") from exc
    seed = args.seed if args.seed is not None else _default_seed()
    result = reactor_mod.run_benchmark(seed=seed)
    for key, trace in result["traces"].items():
        _write_trace_csv(out_dir / f"trace_{key}.csv", trace)
    _write_json(out_dir / "report.json", result["report"])
    return 0


def _cmd_arl(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    doc = _load_document(args.scenario)
    model = _build_model(doc)
    detector = _build_detector(doc, model, seed)
    if args.runs < 1:
        raise CliError(EXIT_USAGE, "--runs must be >= 1")
    result = det_mod.estimate_arl(model, detector, runs=args.runs, seed=seed, cap=args.cap)
    out = {"detector": _describe_detector(detector)}
    out.update({
        "arl": result.arl,
        "alarm_rate": result.alarm_rate,
        "half_width": result.half_width,
        "runs": result.runs,
        "censored": result.censored,
        "cap": result.cap,
    })
    print(json.dumps(_jsonable(out)))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resdet",
        description="Residual-based attack detection: tuning, stealthy-attack simulation, deviation bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    tune = sub.add_parser("tune", help="compute a detector threshold for a target false-alarm rate")
    tune.add_argument("--detector", required=True, choices=["chi2", "windowed", "cusum"])
    tune.add_argument("--sensors", type=int, help="residual dimension p")
    tune.add_argument("--window", type=int, help="windowed detector window length")
    tune.add_argument("--far", type=float, required=True, help="target per-step false-alarm rate")
    tune.add_argument("--scenario", help="scenario JSON supplying the model (cusum only)")
    tune.add_argument("--mc", type=int, default=1_000_000, help="Monte-Carlo samples (cusum only)")
    tune.add_argument("--seed", type=int, default=None)
    tune.set_defaults(func=_cmd_tune)

    simulate = sub.add_parser("simulate", help="run a scenario and write the per-step trace CSV")
    simulate.add_argument("--scenario", required=True)
    simulate.add_argument("--out", required=True, help="trace CSV path")
    simulate.add_argument("--summary", default=None, help="also write a summary JSON here")
    simulate.set_defaults(func=_cmd_simulate)

    sweep = sub.add_parser("sweep", help="tabulate beta(ell) and beta(ell)/ell over window lengths")
    sweep.add_argument("--sensors", type=int, required=True)
    sweep.add_argument("--far", required=True, help="comma-separated list of rates")
    sweep.add_argument("--ell-max", type=int, required=True)
    sweep.add_argument("--out", required=True)
    sweep.set_defaults(func=_cmd_sweep)

    reactor = sub.add_parser("reactor", help="run the built-in benchmark study")
    reactor.add_argument("--out-dir", required=True)
    reactor.add_argument("--seed", type=int, default=None)
    reactor.set_defaults(func=_cmd_reactor)

    arl = sub.add_parser("arl", help="attack-free average run length of a scenario's detector")
    arl.add_argument("--scenario", required=True)
    arl.add_argument("--runs", type=int, default=400)
    arl.add_argument("--seed", type=int, default=None)
    arl.add_argument("--cap", type=int, default=1_000_000)
    arl.set_defaults(func=_cmd_arl)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"resdet: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"resdet: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
