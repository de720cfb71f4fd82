"""Command-line front end: ``simulate``, ``verify`` and ``transform``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import transforms as tf
from .dynamics import RhsContext, SystemId, coord_dim, is_regularized, state_dim
from .integrate import IntegratorConfig, Method, Status, integrate, regularize_initial_state
from .transforms import PhaseState, Regularization, SystemParams
from .verify import DEFAULT_SEED, report_json, run_suite, select, standard_suite

EXIT_OK, EXIT_CONFIG, EXIT_RUN = 0, 1, 2

SCHEMA_VERSION = 1
TOP_KEYS = {"schema_version", "system", "params", "initial_conditions", "integrator", "outputs"}
PARAM_KEYS = {"m", "k", "lambda", "n_power", "c", "gamma", "omega"}
IC_KEYS = {"position", "velocity", "time", "frame", "script_e", "kepler_energy"}
INTEGRATOR_KEYS = {"method", "rel_tol", "abs_tol", "h_init", "h_min", "h_max", "t_end", "max_steps", "collision_r", "stop_on"}
CONSERVED_NAMES = ("script_e", "ang_mom", "h_oscillator", "bilinear", "kepler_energy")


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending field."""


@dataclass
class ScenarioConfig:
    system: SystemId
    params: SystemParams
    y0: np.ndarray
    ctx: RhsContext
    integrator: IntegratorConfig
    outputs: tuple[str, ...] | None


def _check_keys(obj, allowed: set[str], where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{where}: unknown key {key!r}")
    return obj


def _vector(value, field: str, dim: int) -> np.ndarray:
    if not isinstance(value, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
        raise ConfigError(f"{field}: expected a list of numbers")
    if len(value) != dim:
        raise ConfigError(f"{field}: expected {dim} components, got {len(value)}")
    return np.array(value, dtype=float)


def _number(ic: dict, key: str, where: str) -> float | None:
    if key not in ic:
        return None
    v = ic[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number")
    return float(v)


_PHYSICAL_FAMILY = {
    SystemId.REGULARIZED_LC: ("LC", 2),
    SystemId.REGULARIZED_GEN_LC: ("GenLC", 2),
    SystemId.REGULARIZED_KS: ("KS", 3),
}


def parse_config(data) -> ScenarioConfig:
    """Validate a decoded config object and build the run inputs."""
    _check_keys(data, TOP_KEYS, "config")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {data.get('schema_version')!r}")
    try:
        system = SystemId(data.get("system"))
    except ValueError:
        raise ConfigError(f"system: unknown system {data.get('system')!r}") from None

    params_in = _check_keys(data.get("params", {}), PARAM_KEYS, "params")
    try:
        params = SystemParams.from_mapping(params_in)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"params: {exc}") from None

    if "initial_conditions" not in data:
        raise ConfigError("initial_conditions: missing")
    ic = _check_keys(data["initial_conditions"], IC_KEYS, "initial_conditions")
    frame = ic.get("frame", "native")
    if frame not in ("native", "physical"):
        raise ConfigError(f"initial_conditions.frame: expected 'native' or 'physical', got {frame!r}")
    t0 = _number(ic, "time", "initial_conditions") or 0.0
    eps = _number(ic, "script_e", "initial_conditions")
    e_kep = _number(ic, "kepler_energy", "initial_conditions")
    for key in ("position", "velocity"):
        if key not in ic:
            raise ConfigError(f"initial_conditions.{key}: missing")

    if frame == "physical":
        if system not in _PHYSICAL_FAMILY:
            raise ConfigError(f"initial_conditions.frame: 'physical' applies only to regularized Kepler systems, not {system.value}")
        family, dim = _PHYSICAL_FAMILY[system]
        q = _vector(ic["position"], "initial_conditions.position", dim)
        v = _vector(ic["velocity"], "initial_conditions.velocity", dim)
        try:
            y0, eps_phys = regularize_initial_state(family, q, v, params, t0)
        except ValueError as exc:
            raise ConfigError(f"initial_conditions: {exc}") from None
        if eps is not None and not math.isclose(eps, eps_phys, rel_tol=1e-12):
            raise ConfigError("initial_conditions.script_e: conflicts with the energy of the physical state")
        eps = eps_phys
    else:
        d = coord_dim(system)
        q = _vector(ic["position"], "initial_conditions.position", d)
        v = _vector(ic["velocity"], "initial_conditions.velocity", d)
        extra = (t0,) if state_dim(system) == 2 * d + 1 else ()
        y0 = np.concatenate((q, v, extra))
    ctx = RhsContext(params, energy_script_e=eps, kepler_energy=e_kep)
    try:
        ctx.require(system)
    except ValueError as exc:
        raise ConfigError(f"initial_conditions: {exc}") from None

    integ = dict(_check_keys(data.get("integrator", {}), INTEGRATOR_KEYS, "integrator"))
    if "method" in integ:
        try:
            integ["method"] = Method(integ["method"])
        except ValueError:
            raise ConfigError(f"integrator.method: unknown method {integ['method']!r}") from None
    try:
        cfg = IntegratorConfig(**integ)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"integrator: {exc}") from None

    outputs = data.get("outputs")
    if outputs is not None:
        if not isinstance(outputs, list) or not all(isinstance(o, str) for o in outputs):
            raise ConfigError("outputs: expected a list of names")
        for o in outputs:
            if o not in CONSERVED_NAMES:
                raise ConfigError(f"outputs: unknown quantity {o!r}")
        outputs = tuple(outputs)
    return ScenarioConfig(system, params, y0, ctx, cfg, outputs)


def load_config(path: str | os.PathLike) -> ScenarioConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(data)


def _state_columns(system: SystemId) -> list[str]:
    d = coord_dim(system)
    if is_regularized(system):
        cols = [f"u{i}" for i in range(d)] + [f"u_prime{i}" for i in range(d)]
        return cols + (["t"] if state_dim(system) > 2 * d else [])
    return [f"q{i}" for i in range(d)] + [f"v{i}" for i in range(d)]


def _conserved_columns(name: str, value) -> list[str]:
    if name == "ang_mom" and isinstance(value, (tuple, list, np.ndarray)):
        return [f"ang_mom_{a}" for a in "xyz"]
    return [name]


def _flatten(value, width: int) -> list[float]:
    if value is None:
        return [math.nan] * width
    return [float(x) for x in np.atleast_1d(value)]


def _fmt(x: float) -> str:
    return "%.17g" % x


def run_simulation(cfg: ScenarioConfig, out_dir: str | os.PathLike) -> Status:
    """Integrate the scenario and write ``trajectory.csv`` and ``summary.json`` to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj = integrate(cfg.system, cfg.y0, cfg.ctx, cfg.integrator)
    first = traj.conserved[0].as_dict()
    if cfg.outputs is None:
        names = [n for n in CONSERVED_NAMES if first.get(n) is not None]
    else:
        names = list(cfg.outputs)
        missing = [n for n in names if all(getattr(c, n) is None for c in traj.conserved)]
        if missing:
            raise ConfigError(f"outputs: {missing[0]!r} is not defined for {cfg.system.value}")
    widths = {n: len(_conserved_columns(n, first.get(n))) for n in names}
    indep = "tau" if is_regularized(cfg.system) else "t"
    columns = [indep] + _state_columns(cfg.system)
    for n in names:
        columns += _conserved_columns(n, first.get(n))

    with open(out / "trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for s, y, c in traj.samples:
            row = [s, *y]
            cd = c.as_dict()
            for n in names:
                row += _flatten(cd.get(n), widths[n])
            w.writerow([_fmt(x) for x in row])

    drifts = {}
    for n in names:
        vals = np.array([_flatten(c.as_dict().get(n), widths[n]) for c in traj.conserved])
        ref = vals[0]
        absd = float(np.nanmax(np.linalg.norm(vals - ref, axis=1))) if len(vals) else 0.0
        scale = float(np.linalg.norm(ref))
        drifts[n] = {"initial": _json_num(ref[0]) if widths[n] == 1 else [_json_num(x) for x in ref],
                     "max_abs_drift": _json_num(absd),
                     "max_rel_drift": _json_num(absd / scale) if scale > 0 else None}
    summary = {
        "system": cfg.system.value,
        "status": traj.status.value,
        "samples": len(traj),
        "steps_rejected": traj.steps_rejected,
        "columns": columns,
        "params": cfg.params.to_mapping(),
        "drifts": drifts,
        "final_state": {"s": _json_num(traj.s[-1]), "t": _json_num(traj.t[-1]),
                        "state": [_json_num(x) for x in traj.y[-1]]},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return traj.status


def _json_num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


# --- transform -------------------------------------------------------------------------------


def _arr(args, key):
    if key not in args:
        raise ConfigError(f"args.{key}: missing")
    return np.asarray(args[key], dtype=float)


def _params_arg(args) -> SystemParams:
    return SystemParams.from_mapping(_check_keys(args.get("params", {}), PARAM_KEYS, "args.params"))


def _phase(args):
    return PhaseState(_arr(args, "q"), _arr(args, "v"), float(args.get("t", 0.0)))


def _phase_out(st: PhaseState) -> dict:
    return {"q": st.q.tolist(), "v": st.v.tolist(), "t": st.t}


TRANSFORMS = {
    "ks_forward": lambda a: tf.ks_forward(_arr(a, "u")).tolist(),
    "ks_inverse": lambda a: tf.ks_inverse(_arr(a, "x")).tolist(),
    "ks_velocity_map": lambda a: tf.ks_velocity_map(_arr(a, "u"), _arr(a, "xdot")).tolist(),
    "ks_velocity_inverse": lambda a: tf.ks_velocity_inverse(_arr(a, "u"), _arr(a, "u_prime")).tolist(),
    "lc_forward": lambda a: tf.lc_forward(_arr(a, "u"), float(a.get("gamma", 1.0))).tolist(),
    "lc_inverse": lambda a: tf.lc_inverse(_arr(a, "z"), float(a.get("gamma", 1.0))).tolist(),
    "lc_velocity_map": lambda a: tf.lc_velocity_map(_arr(a, "u"), _arr(a, "zdot"), _params_arg(a)).tolist(),
    "lc_velocity_inverse": lambda a: tf.lc_velocity_inverse(_arr(a, "u"), _arr(a, "u_prime"), _params_arg(a)).tolist(),
    "gen_lc_forward": lambda a: tf.gen_lc_forward(_arr(a, "u"), int(a.get("n", 1))).tolist(),
    "gen_lc_inverse": lambda a: tf.gen_lc_inverse(_arr(a, "z"), int(a.get("n", 1))).tolist(),
    "bilinear": lambda a: tf.bilinear_constraint(_arr(a, "u"), _arr(a, "u_prime")),
    "bohlin_forward": lambda a: tf.bohlin_forward(_arr(a, "omega")).tolist(),
    "bohlin_velocity_map": lambda a: tf.bohlin_velocity_map(_arr(a, "omega"), _arr(a, "omega_prime")).tolist(),
    "damp_to_autonomous": lambda a: _phase_out(tf.damp_to_autonomous(_phase(a), _params_arg(a))),
    "autonomous_to_damp": lambda a: _phase_out(tf.autonomous_to_damp(_phase(a), _params_arg(a))),
    "time_rate": lambda a: tf.time_rate(Regularization(a.get("system")), float(a.get("r")), _params_arg(a)),
}


def _clean(x):
    if isinstance(x, float):
        return 0.0 if x == 0 else x
    if isinstance(x, list):
        return [_clean(v) for v in x]
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    return x


# --- commands --------------------------------------------------------------------------------


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def cmd_simulate(args) -> int:
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        _err(f"{args.config}: {exc.strerror}")
        return EXIT_CONFIG
    except ConfigError as exc:
        _err(f"{args.config}: {exc}")
        return EXIT_CONFIG
    try:
        status = run_simulation(cfg, args.output)
    except ConfigError as exc:
        _err(f"{args.config}: {exc}")
        return EXIT_CONFIG
    if not args.quiet:
        print(f"{cfg.system.value}: {status.value}")
    return EXIT_OK if status is Status.COMPLETED else EXIT_RUN


def cmd_verify(args) -> int:
    specs = select(standard_suite(), args.filter)
    if not specs:
        _err("no checks matched")
        return EXIT_CONFIG
    entries = run_suite(specs, seed=args.seed, threads=args.threads)
    text = report_json(entries) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    elif not args.quiet:
        sys.stdout.write(text)
    if not args.quiet:
        for e in entries:
            print(f"{'PASS' if e.passed else 'FAIL'}  {e.name}  measured={e.measured!r} tol={e.tolerance:g}", file=sys.stderr)
    return EXIT_OK if all(e.passed for e in entries) else EXIT_CONFIG


def cmd_transform(args) -> int:
    try:
        data = json.loads(Path(args.spec).read_text())
    except OSError as exc:
        _err(f"{args.spec}: {exc.strerror}")
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        _err(f"{args.spec}: line {exc.lineno}, column {exc.colno}: {exc.msg}")
        return EXIT_CONFIG
    if not isinstance(data, dict):
        _err("expected an object with 'transform' and 'args'")
        return EXIT_CONFIG
    name = data.get("transform")
    fn = TRANSFORMS.get(name)
    if fn is None:
        _err(f"unknown transform {name!r}; known: {', '.join(sorted(TRANSFORMS))}")
        return EXIT_CONFIG
    try:
        result = fn(data.get("args", {}))
    except (ConfigError, ValueError, TypeError) as exc:
        _err(f"{name}: {exc}")
        return EXIT_CONFIG
    print(json.dumps({"result": _clean(result)}))
    return EXIT_OK


def _seed(value: str) -> int:
    return int(value, 0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dampreg", description=__doc__)
    parser.add_argument("--seed", type=_seed, default=None, help="seed for randomized checks (default 0xC0FFEE; TOOL_SEED overrides)")
    parser.add_argument("--threads", type=int, default=1, help="maximum number of checks run in parallel")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a scenario config")
    p.add_argument("config")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the verification suite")
    p.add_argument("--filter", default=None, help="run only checks whose name contains NAME")
    p.add_argument("-o", "--output", default=None, help="report path (default: stdout)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("transform", help="apply a coordinate map to a JSON input")
    p.add_argument("spec")
    p.set_defaults(func=cmd_transform)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    env = os.environ.get("TOOL_SEED")
    if env:
        try:
            args.seed = _seed(env)
        except ValueError:
            _err(f"TOOL_SEED: not an integer: {env!r}")
            return EXIT_CONFIG
    if args.seed is None:
        args.seed = DEFAULT_SEED
    if args.threads < 1:
        _err("--threads must be at least 1")
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
