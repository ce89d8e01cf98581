"""Command-line runner for spin-measurement experiments.

Usage::

    relspin MODE [options]
    relspin --config FILE [MODE] [options]

MODE is one of expectation, direction, compare, simulate, tomography.

The config file is flat ``key = value`` text. Keys are the long option names
without the leading dashes (``field-direction`` or ``field_direction``);
``mode`` may be given as a key too. Blank lines and lines starting with ``#``
are ignored. Command-line flags override file values.

Vectors are comma-separated (``0,0,1``); spinor amplitudes accept complex
literals (``1,0.5+0.5j``). Results are printed as JSON with 15 significant
digits. Exit status is 0 on success, 1 for a configuration error and 2 for
a numerical or domain error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import lorentz, observable, spinor, tomography, wkbsim
from .errors import DomainError, IntegrationError

MODES = ("expectation", "direction", "compare", "simulate", "tomography")
OUTPUT_DIR_ENV = "RELSPIN_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "relspin_out"


class ConfigError(Exception):
    """Configuration problem; the message names the offending field."""


def _floats(n: int | None = None):
    def parse(text: str):
        vals = [float(x) for x in text.replace(" ", "").split(",") if x != ""]
        if n is not None and len(vals) != n:
            raise ValueError(f"expected {n} comma-separated numbers")
        return tuple(vals)

    return parse


def _complexes(text: str):
    vals = tuple(complex(x) for x in text.replace(" ", "").split(",") if x != "")
    if len(vals) != 2:
        raise ValueError("expected 2 comma-separated amplitudes")
    return vals


def _flag(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _choice(*options):
    def parse(text: str):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


def _sign(text: str) -> int:
    val = int(text)
    if val not in (1, -1):
        raise ValueError("expected +1 or -1")
    return val


@dataclass(frozen=True)
class Option:
    name: str
    parse: object
    default: object
    help: str


OPTIONS = [
    # particle
    Option("mass", float, 1.0, "particle mass"),
    Option("psi", _complexes, (1, 0), "spin amplitudes, two complex numbers"),
    Option("psi-basis", _choice("rest", "sg"), "rest", "psi is a rest-frame spinor, or coefficients on (psi+, psi-)"),
    Option("particle-beta", float, None, "particle speed"),
    Option("particle-rapidity", float, None, "particle rapidity (alternative to beta)"),
    Option("particle-axis", _floats(3), (1.0, 0.0, 0.0), "particle direction of motion"),
    # apparatus
    Option("device-beta", float, None, "apparatus speed"),
    Option("device-rapidity", float, None, "apparatus rapidity (alternative to beta)"),
    Option("device-axis", _floats(3), (1.0, 0.0, 0.0), "apparatus direction of motion"),
    Option("field-direction", _floats(3), (0.0, 0.0, 1.0), "field direction in the apparatus frame"),
    Option("field-magnitude", float, 1.0, "field strength in the apparatus frame"),
    # simulate
    Option("gradient", float, 1.0, "field gradient along gradient-direction"),
    Option("gradient-direction", _floats(3), (0.0, 0.0, 1.0), "gradient direction in the apparatus frame"),
    Option("beam-axis", _floats(3), None, "beam axis in the apparatus frame (default: particle axis)"),
    Option("slab", _floats(2), (0.0, 1.0), "field region s0,s1 along the beam axis"),
    Option("edge-width", float, 0.1, "width of the field ramps"),
    Option("half-width", float, math.inf, "transverse half-width of the field region"),
    Option("charge", float, 0.0, "charge coupling to the Lorentz force"),
    Option("coupling", float, 0.01, "magnetic coupling of the gradient force"),
    Option("sign-convention", _sign, 1, "sign of the gradient term, +1 or -1"),
    Option("detector", float, 3.0, "detector plane along the beam axis"),
    Option("dtau", float, wkbsim.DEFAULT_DTAU, "proper-time step"),
    Option("max-steps", int, wkbsim.DEFAULT_MAX_STEPS, "step limit per branch"),
    Option("packet-width", float, 1e-3, "separation needed to call the spots resolved"),
    Option("sample-every", int, 10, "trajectory sampling stride in steps"),
    Option("parallel", _flag, False, "integrate branches concurrently"),
    Option("output-dir", str, None, f"output directory (default: ${OUTPUT_DIR_ENV} or {DEFAULT_OUTPUT_DIR})"),
    # tomography
    Option("records", str, None, "JSON-lines measurement records"),
    Option("write-records", str, None, "synthesize records for bloch at three orthogonal settings and write them here"),
    Option("bloch", _floats(3), None, "Bloch vector for synthesis or the momentum scan"),
    Option("shots", int, 0, "shots per synthesized record (0 = exact means)"),
    Option("seed", int, 0, "random seed for synthesized shots"),
    Option("naive", _flag, False, "also reconstruct ignoring the particle momentum"),
    Option("rapidities", _floats(), (0.0, 0.5, 1.0, 1.5, 2.0), "rapidity grid for unknown-momentum records"),
]
OPTION_BY_KEY = {opt.name: opt for opt in OPTIONS}


def _key(name: str) -> str:
    return name.strip().replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relspin",
        description="Relativistic Stern-Gerlach spin measurements.",
        epilog=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("mode", nargs="?", choices=MODES, help="what to run")
    parser.add_argument("--config", help="flat key=value config file")
    for opt in OPTIONS:
        default = "inf" if opt.default == math.inf else opt.default
        if isinstance(default, tuple):
            default = ",".join(str(x) for x in default)
        parser.add_argument(f"--{opt.name}", default=None, metavar="VALUE", help=f"{opt.help} [{default}]")
    return parser


def read_config_file(path) -> dict[str, str]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from exc
    raw = {}
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        key = _key(key)
        if key != "mode" and key not in OPTION_BY_KEY:
            raise ConfigError(f"{key}: unknown config key")
        raw[key] = value.strip()
    return raw


def resolve_config(args: argparse.Namespace) -> tuple[str, dict[str, str], dict]:
    """Merge file and flags; return (mode, raw strings, parsed values)."""
    raw = read_config_file(args.config) if args.config else {}
    for opt in OPTIONS:
        val = getattr(args, opt.name.replace("-", "_"))
        if val is not None:
            raw[opt.name] = val
    mode = args.mode or raw.pop("mode", None)
    raw.pop("mode", None)
    if mode is None:
        raise ConfigError("mode: no mode given")
    if mode not in MODES:
        raise ConfigError(f"mode: unknown mode {mode!r}")
    values = {}
    for opt in OPTIONS:
        if opt.name in raw:
            try:
                values[opt.name] = opt.parse(raw[opt.name])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{opt.name}: {exc}") from exc
        else:
            values[opt.name] = opt.default
    return mode, raw, values


def config_echo(mode: str, raw: dict[str, str]) -> str:
    lines = [f"mode = {mode}"] + [f"{key} = {raw[key]}" for key in sorted(raw)]
    return "\n".join(lines) + "\n"


# -- building physical inputs -------------------------------------------------


def _unit3(values, name: str) -> np.ndarray:
    vec = np.asarray(values[name], dtype=float)
    size = float(np.linalg.norm(vec))
    if size == 0.0:
        raise ConfigError(f"{name}: must be nonzero")
    return vec / size


def _velocity3(values, prefix: str) -> np.ndarray:
    beta, rapidity = values[f"{prefix}-beta"], values[f"{prefix}-rapidity"]
    if beta is not None and rapidity is not None:
        raise ConfigError(f"{prefix}-rapidity: give either {prefix}-beta or {prefix}-rapidity")
    if rapidity is not None:
        beta = math.tanh(rapidity)
    beta = 0.0 if beta is None else beta
    if not 0.0 <= beta < 1.0:
        raise ConfigError(f"{prefix}-beta: must lie in [0, 1)")
    return beta * _unit3(values, f"{prefix}-axis")


def _momentum(values) -> np.ndarray:
    m = values["mass"]
    if not m > 0:
        raise ConfigError("mass: must be positive")
    beta = _velocity3(values, "particle")
    gamma = 1.0 / math.sqrt(1.0 - beta @ beta)
    return m * gamma * np.concatenate([[1.0], beta])


def _sg_config(values) -> observable.SGConfig:
    return observable.SGConfig.from_device_frame(
        _unit3(values, "field-direction"), values["field-magnitude"], _velocity3(values, "device")
    )


def _state(values, cfg, p) -> spinor.Spinor:
    m = values["mass"]
    amp = np.array(values["psi"], dtype=complex)
    if not np.any(amp):
        raise ConfigError("psi: must be nonzero")
    if values["psi-basis"] == "rest":
        return spinor.normalized(spinor.from_rest_frame(amp, p, m))
    plus, minus = spinor.eigenstates(observable.sg_operator(cfg, p, m))
    return spinor.normalized(spinor.Spinor(amp[0] * plus.amplitude + amp[1] * minus.amplitude, p))


def _output_dir(values) -> Path:
    out = values["output-dir"] or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# -- modes ---------------------------------------------------------------------


def run_expectation(values) -> dict:
    p, m = _momentum(values), values["mass"]
    cfg = _sg_config(values)
    psi = _state(values, cfg, p)
    return {"expectation": spinor.expectation(psi, observable.sg_operator(cfg, p, m))}


def run_direction(values) -> dict:
    p, m = _momentum(values), values["mass"]
    cfg = _sg_config(values)
    return {
        "n": observable.sg_direction(cfg, p, m).tolist(),
        "B_RF": observable.rest_frame_B_closed_form(cfg, p / m).tolist(),
        "rest_frame_direction": tomography.effective_direction(
            cfg.device_velocity, cfg.field_direction, p, m
        ).tolist(),
    }


def run_compare(values) -> dict:
    p, m = _momentum(values), values["mass"]
    cfg = _sg_config(values)
    psi = _state(values, cfg, p)
    return observable.compare_operators(cfg, p, m, psi).as_dict()


def run_simulate(values) -> dict:
    p, m = _momentum(values), values["mass"]
    beam = values["beam-axis"]
    profile = wkbsim.FieldProfile.from_device_frame(
        field_magnitude=values["field-magnitude"],
        field_direction=_unit3(values, "field-direction"),
        gradient=values["gradient"],
        gradient_direction=_unit3(values, "gradient-direction"),
        beam_axis=_unit3(values, "particle-axis") if beam is None else _unit3(values, "beam-axis"),
        slab=values["slab"],
        device_beta=_velocity3(values, "device"),
        edge_width=values["edge-width"],
        half_width=values["half-width"],
        charge=values["charge"],
        coupling=values["coupling"],
        sign_convention=values["sign-convention"],
    )
    psi = _state(values, profile.config, p)
    report = wkbsim.run_measurement(
        psi,
        profile,
        values["detector"],
        dtau=values["dtau"],
        max_steps=values["max-steps"],
        packet_width=values["packet-width"],
        sample_every=values["sample-every"],
        parallel=values["parallel"],
    )
    out = _output_dir(values)
    files = {}
    for name, branch in (("plus", report.plus), ("minus", report.minus)):
        path = out / f"trajectory_{name}.csv"
        wkbsim.write_trajectory_csv(path, branch.samples)
        files[name] = str(path)
    result = report.as_dict()
    result["files"] = files
    return result


def _three_settings(values):
    """Three orthogonal device-frame field directions at the configured velocities."""
    p = _momentum(values)
    beta = _velocity3(values, "device")
    for axis in np.eye(3):
        cfg = observable.SGConfig.from_device_frame(axis, 1.0, beta)
        yield cfg.device_velocity, cfg.field_direction, p


def run_tomography(values) -> dict:
    m = values["mass"]
    result = {}
    if values["write-records"]:
        if values["bloch"] is None:
            raise ConfigError("bloch: required with write-records")
        state = tomography.BlochState(values["bloch"])
        records = tomography.simulate_records(
            state, _three_settings(values), m, shots=values["shots"], seed=values["seed"]
        )
        tomography.dump_records(records, values["write-records"])
        result["records_written"] = values["write-records"]
        path = values["records"] or values["write-records"]
    else:
        path = values["records"]
        if path is None:
            raise ConfigError("records: required for tomography")
    try:
        records = tomography.load_records(path)
    except OSError as exc:
        raise ConfigError(f"records: cannot read {path}: {exc.strerror}") from exc
    if any(rec.momentum is None for rec in records):
        if values["bloch"] is None:
            raise DomainError("records have unknown momentum; give bloch to scan the momentum ambiguity")
        rows = tomography.momentum_sensitivity_experiment(
            tomography.BlochState(values["bloch"]),
            records[0].device_velocity,
            [rec.apparatus_direction for rec in records],
            values["rapidities"],
            _unit3(values, "particle-axis"),
            m,
        )
        result["momentum_sensitivity"] = [row.as_dict() for row in rows]
        return result
    result["reconstruction"] = tomography.reconstruct(records, m).as_dict()
    if values["naive"]:
        result["naive_reconstruction"] = tomography.reconstruct(records, m, assume_rest_frame=True).as_dict()
    return result


RUNNERS = {
    "expectation": run_expectation,
    "direction": run_direction,
    "compare": run_compare,
    "simulate": run_simulate,
    "tomography": run_tomography,
}


def _round15(obj):
    if isinstance(obj, float):
        return float(f"{obj:.15g}") if math.isfinite(obj) else str(obj)
    if isinstance(obj, dict):
        return {k: _round15(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round15(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round15(obj.item())
    return obj


def format_output(obj) -> str:
    return json.dumps(_round15(obj), indent=2)


def run(mode: str, raw: dict[str, str], values: dict) -> dict:
    result = {"mode": mode, **RUNNERS[mode](values)}
    result["config"] = config_echo(mode, raw)
    if mode == "simulate":
        out = _output_dir(values)
        (out / "config.txt").write_text(result["config"])
        (out / "outcome.json").write_text(format_output(result) + "\n")
    return result


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        mode, raw, values = resolve_config(args)
        result = run(mode, raw, values)
    except ConfigError as exc:
        print(f"relspin: config error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, IntegrationError, np.linalg.LinAlgError) as exc:
        print(f"relspin: error: {exc}", file=sys.stderr)
        return 2
    print(format_output(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
