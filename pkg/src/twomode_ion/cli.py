"""Command-line front end.

Every subcommand reads one JSON config with frequencies in Hz and writes
deterministic CSV/JSON files (floats at 12 significant digits) to ``--out``.

Exit codes: 0 success, 1 config error, 2 physics-check flag, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import cmath
import csv
import json
import math
import sys
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .evolution import (
    CutoffLeak,
    PropagationSettings,
    RotationExperiment,
    UnitarityLost,
    adiabatic_validation,
    fig5_sweep,
    run_rotation,
)
from .fock import FockBasis, TailTooHeavy, coherent_state, fock_state
from .hamiltonian import raman_coefficient, required_g13_phase
from .laser_config import (
    ADIABATIC_MARGIN,
    DerivedCouplings,
    RamanPairConfig,
    TargetInteraction,
    TrapConfig,
    adiabaticity_check,
    derive_couplings,
    equal_dipole_coupling,
    hz,
    sideband_detuning,
    symmetric_pair,
)
from .limits import TIME_MARGIN, rotation_time, timescale_table
from .resonance import (
    as_ratio,
    enumerate_resonances,
    lamb_dicke_ratio_check,
    min_trap_ratio,
    resonance_table,
)

EXIT_OK, EXIT_CONFIG, EXIT_FLAG, EXIT_NUMERICAL = 0, 1, 2, 3
ROTATION_PHASE = -math.pi / 2  # phase of g(0,0) for i g (a†b - a b†) with g < 0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything a subcommand needs, in rad/s and seconds."""

    mode: str
    trap: TrapConfig
    trap_ratio: Fraction
    target: TargetInteraction
    g13: complex
    eta12: float
    eta23: float
    pair: RamanPairConfig | None = None
    alpha: complex = 1.0
    theta: float = math.pi / 2
    cutoff: int = 8
    order_cap: int = 8
    n_samples: int = 600
    gt_max: float = 1.2 * math.pi / 2
    settings: PropagationSettings = field(default_factory=PropagationSettings)
    sweep_gammas: tuple[float, ...] = (2.75, 5.5, 11.0, 22.0)
    gamma_eta2: float = 0.88
    validation: dict = field(default_factory=dict)
    adiabatic_margin: float = ADIABATIC_MARGIN
    time_margin: float = TIME_MARGIN
    lamb_dicke_tolerance: float = 1.0

    @property
    def g00(self) -> float:
        return abs(raman_coefficient(self.target.k_a, 0, 0, self.target.k_b,
                                     abs(self.g13), self.eta12, self.eta23))

    @property
    def gamma(self) -> float:
        return self.trap.nu_b / abs(self.g13)

    def rotation_experiment(self) -> RotationExperiment:
        return RotationExperiment(
            gamma=self.gamma,
            trap_ratio=float(self.trap_ratio),
            alpha=self.alpha,
            cutoff=self.cutoff,
            g13_abs=abs(self.g13),
            n_samples=self.n_samples,
            gt_max=self.gt_max,
            order_cap=self.order_cap,
            eta12=self.eta12,
            eta23=self.eta23,
            settings=self.settings,
        )


def _number(block: dict, key: str, default=None, *, where: str = "") -> float:
    if key not in block:
        if default is None:
            raise ConfigError(f"missing '{key}'{' in ' + where if where else ''}")
        return default
    value = block[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {value!r}")
    return float(value)


def _exact(value) -> Fraction:
    return Fraction(repr(value)) if isinstance(value, float) else Fraction(value)


def _block(cfg: dict, key: str) -> dict:
    value = cfg.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"'{key}' must be an object")
    return value


def parse_config(cfg: dict, cutoff: int | None = None) -> ExperimentSpec:
    """Validate a config document and convert it to angular units."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    has_raw, has_direct = "raman" in cfg, "direct" in cfg
    if has_raw == has_direct:
        raise ConfigError("give exactly one of 'raman' (laser parameters) or 'direct'")

    tblock = _block(cfg, "target")
    try:
        target = TargetInteraction(int(tblock.get("k_a", 1)), int(tblock.get("k_b", 1)),
                                   _number(tblock, "coupling_phase", ROTATION_PHASE))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    pair = None
    if has_direct:
        if "trap" in cfg:
            raise ConfigError("'direct' mode derives the trap; drop the 'trap' block")
        d = _block(cfg, "direct")
        g13_abs = hz(_number(d, "g13_hz", 1 / (2 * math.pi)))
        gamma = _number(d, "gamma", where="direct")
        if not gamma > 0:
            raise ConfigError("direct.gamma must be positive")
        eta12 = _number(d, "eta12", _number(d, "eta", math.nan))
        eta23 = _number(d, "eta23", _number(d, "eta", math.nan))
        if math.isnan(eta12) or math.isnan(eta23):
            eta12 = eta23 = math.sqrt(_number(cfg.get("sweep", {}), "gamma_eta2", 0.88) / gamma)
        try:
            ratio = as_ratio(d.get("trap_ratio", 5))
            trap = TrapConfig(float(ratio) * gamma * g13_abs, gamma * g13_abs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        g13 = g13_abs * cmath.exp(1j * required_g13_phase(target, eta12, eta23))
    else:
        if "trap" not in cfg:
            raise ConfigError("missing 'trap' block")
        tb = _block(cfg, "trap")
        nu_a_hz, nu_b_hz = _number(tb, "nu_a_hz", where="trap"), _number(tb, "nu_b_hz", where="trap")
        try:
            mass = tb.get("mass_kg")
            trap = TrapConfig(hz(nu_a_hz), hz(nu_b_hz), None if mass is None else float(mass))
            ratio = as_ratio(_exact(nu_a_hz) / _exact(nu_b_hz))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(str(exc)) from exc
        r = _block(cfg, "raman")
        delta12 = hz(_number(r, "delta12_hz", where="raman"))
        if "delta23_hz" in r:
            delta23 = hz(_number(r, "delta23_hz"))
        else:
            # level 3 placed on the target sideband
            delta23 = delta12 + sideband_detuning(target, trap)
        eta_kw = {}
        for key in ("eta12", "eta23"):
            if key in r:
                eta_kw[key] = _number(r, key)
        k12, k23 = _number(r, "k12_per_m", 0.0), _number(r, "k23_per_m", 0.0)
        if len(eta_kw) < 2 and trap.mass is None:
            raise ConfigError("give eta12/eta23 or wavenumbers with trap.mass_kg")
        if "g13_hz" in r:
            if "g12_hz" in r or "g23_hz" in r:
                raise ConfigError("give either g13_hz or g12_hz/g23_hz")
            try:
                g0 = equal_dipole_coupling(hz(_number(r, "g13_hz")), delta12, delta23)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            g12, g23 = complex(g0), complex(g0)
            phase_known = False
        else:
            g12 = hz(_number(r, "g12_hz", where="raman")) * cmath.exp(1j * _number(r, "g12_phase", 0.0))
            g23 = hz(_number(r, "g23_hz", where="raman")) * cmath.exp(1j * _number(r, "g23_phase", 0.0))
            phase_known = True
        try:
            pair = RamanPairConfig(g12, g23, delta12, delta23, k12, k23,
                                   hz(_number(r, "gamma_decay_hz", 0.0)))
            derived = derive_couplings(pair, trap, **eta_kw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        eta12, eta23 = derived.eta12, derived.eta23
        g13 = derived.g13
        if not phase_known:
            # equal-magnitude couplings: put the phase on g23 so arg(g13) is as required
            phi = required_g13_phase(target, eta12, eta23) - cmath.phase(g13)
            pair = replace(pair, g23=g23 * cmath.exp(-1j * phi))
            g13 = derive_couplings(pair, trap, **eta_kw).g13

    prop = _block(cfg, "propagation")
    try:
        settings = PropagationSettings(
            step_dt=prop.get("step_dt"),
            method=prop.get("method", "rk4"),
            unitarity_tol=_number(prop, "unitarity_tol", 1e-6),
            cutoff_leak_tol=_number(prop, "cutoff_leak_tol", 1e-2),
            max_phase_step=_number(prop, "max_phase_step", 0.05),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    alpha = cfg.get("alpha", 1.0)
    if isinstance(alpha, list) and len(alpha) == 2:
        alpha = complex(*alpha)
    elif isinstance(alpha, (int, float)) and not isinstance(alpha, bool):
        alpha = float(alpha)
    else:
        raise ConfigError("'alpha' must be a number or [re, im]")

    cut = int(cfg.get("cutoff", 8)) if cutoff is None else cutoff
    if cut < 1:
        raise ConfigError("cutoff must be at least 1")
    sweep = _block(cfg, "sweep")
    margins = _block(cfg, "margins")
    gammas = sweep.get("gammas", [2.75, 5.5, 11.0, 22.0])
    if not isinstance(gammas, list) or not gammas or not all(
            isinstance(g, (int, float)) and g > 0 for g in gammas):
        raise ConfigError("'sweep.gammas' must be a non-empty list of positive numbers")
    n_samples = int(prop.get("n_samples", 600))
    if n_samples < 2:
        raise ConfigError("n_samples must be at least 2")
    return ExperimentSpec(
        mode="direct" if has_direct else "raw",
        trap=trap,
        trap_ratio=ratio,
        target=target,
        g13=complex(g13),
        eta12=float(eta12),
        eta23=float(eta23),
        pair=pair,
        alpha=alpha,
        theta=_number(cfg, "theta", math.pi / 2),
        cutoff=cut,
        order_cap=int(cfg.get("order_cap", 8)),
        n_samples=n_samples,
        gt_max=_number(prop, "gt_max", 1.2 * math.pi / 2),
        settings=settings,
        sweep_gammas=tuple(float(g) for g in gammas),
        gamma_eta2=_number(sweep, "gamma_eta2", 0.88),
        validation=_block(cfg, "validation"),
        adiabatic_margin=_number(margins, "adiabatic", ADIABATIC_MARGIN),
        time_margin=_number(margins, "time", TIME_MARGIN),
        lamb_dicke_tolerance=_number(margins, "lamb_dicke", 1.0),
    )


def load_config(path: str, cutoff: int | None = None) -> ExperimentSpec:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(cfg, cutoff)


# --- output helpers -------------------------------------------------------

def fmt(x: float) -> str:
    return format(float(x), ".12g")


def _clean(obj):
    """Round floats to 12 significant digits and make the object JSON-safe."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return str(float(obj))
        return float(fmt(obj))
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(path: Path, obj) -> None:
    path.write_text(dump_json(obj))


def write_trajectory_csv(path: Path, traj) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["gt", "delta", "norm_defect", "leak_population"])
        for row in traj.rows():
            writer.writerow([fmt(x) for x in row])


def _both_units(seconds: float, g00: float) -> dict:
    return {"seconds": seconds, "gt": seconds * g00}


# --- subcommands ------------------------------------------------------------

def _resonance_report(spec: ExperimentSpec):
    records = enumerate_resonances(spec.target.k_a, spec.target.k_b, spec.trap_ratio,
                                   spec.eta12, spec.eta23, abs(spec.g13))
    eta = max(abs(spec.eta12), abs(spec.eta23))
    return records, lamb_dicke_ratio_check(records, eta, spec.lamb_dicke_tolerance)


def cmd_compile(spec: ExperimentSpec, out: Path) -> int:
    derived = DerivedCouplings(spec.g13, 0.0, 0.0, spec.eta12, spec.eta23,
                               sideband_detuning(spec.target, spec.trap))
    partner = symmetric_pair(derived)
    l_min = min_trap_ratio(spec.target.k_a, spec.target.k_b)
    _, ld_report = _resonance_report(spec)
    validity = timescale_table(spec.trap, spec.target, spec.g13, spec.eta12, spec.eta23,
                               alpha=spec.alpha, theta=spec.theta, pair=spec.pair,
                               margin=spec.time_margin)
    required = required_g13_phase(spec.target, spec.eta12, spec.eta23)
    flags = list(validity.flags)
    if spec.trap_ratio < l_min:
        flags.append("trap_ratio_below_minimum")
    if not ld_report.ok:
        flags.append("lamb_dicke")
    report = {
        "mode": spec.mode,
        "target": {"k_a": spec.target.k_a, "k_b": spec.target.k_b},
        "delta13": {"rad_s": derived.delta13, "hz": derived.delta13 / (2 * math.pi)},
        "delta13_prime": {"rad_s": partner.delta13, "hz": partner.delta13 / (2 * math.pi)},
        "eta": {"eta12": derived.eta12, "eta23": derived.eta23,
                "eta12_prime": partner.eta12, "eta23_prime": partner.eta23},
        "g13": {"abs_hz": abs(spec.g13) / (2 * math.pi), "arg": cmath.phase(spec.g13) % (2 * math.pi),
                "required_arg": required, "arg_prime": cmath.phase(partner.g13) % (2 * math.pi)},
        "trap_ratio": str(spec.trap_ratio),
        "min_trap_ratio": l_min,
        "lamb_dicke_flagged_N": [r.N for r in ld_report.flagged],
        "timescales": {
            "t_rot": _both_units(validity.t_rot, validity.g00),
            "t_spont": _both_units(validity.t_spont, validity.g00),
            "t_offres_a": _both_units(validity.t_offres_a, validity.g00),
            "t_offres_b": _both_units(validity.t_offres_b, validity.g00),
            "gamma_ratio": validity.gamma_ratio,
            "characteristic_state": list(validity.characteristic_state),
        },
    }
    if spec.pair is not None:
        adiabatic = adiabaticity_check(spec.pair, spec.adiabatic_margin)
        report["adiabaticity"] = {"ok": adiabatic.ok, "ratio": adiabatic.ratio,
                                  "margin": adiabatic.margin, "margins": adiabatic.margins}
        if not adiabatic.ok:
            flags.append("adiabaticity")
        if abs(cmath.exp(1j * (cmath.phase(spec.g13) - required)) - 1) > 1e-9:
            flags.append("g13_phase")
    report["flags"] = flags
    write_json(out / "compile.json", report)
    sys.stdout.write(dump_json(report))
    return EXIT_FLAG if flags else EXIT_OK


def _require_rotation(spec: ExperimentSpec):
    if (spec.target.k_a, spec.target.k_b) != (1, 1):
        raise ConfigError("rotate/sweep implement the (1, 1) mode rotation only")


def cmd_rotate(spec: ExperimentSpec, out: Path) -> int:
    _require_rotation(spec)
    experiment = spec.rotation_experiment()
    result = run_rotation(experiment, which=("full", "resonant", "ideal"))
    summary = {"gamma": experiment.gamma, "eta12": spec.eta12, "eta23": spec.eta23,
               "alpha": spec.alpha, "cutoff": spec.cutoff, "g00_rad_s": experiment.g00,
               "t_rot": _both_units(rotation_time(experiment.g00, math.pi / 2), experiment.g00)}
    for name in ("full", "resonant", "ideal"):
        write_trajectory_csv(out / f"{name}.csv", result[name])
        entry = result.summary(name)
        entry["peak_time_s"] = entry["peak_gt"] / experiment.g00
        summary[name] = entry
    summary["peak_delta"] = summary["full"]["peak_delta"]
    summary["peak_gt"] = summary["full"]["peak_gt"]
    summary["norm_defect"] = summary["full"]["norm_defect"]
    write_json(out / "summary.json", summary)
    sys.stdout.write(dump_json(summary))
    return EXIT_OK


def cmd_sweep(spec: ExperimentSpec, out: Path, threads: int = 1) -> int:
    _require_rotation(spec)
    results = fig5_sweep(
        spec.sweep_gammas, threads=threads, which=("full", "resonant"),
        gamma_eta2=spec.gamma_eta2, trap_ratio=float(spec.trap_ratio), alpha=spec.alpha,
        cutoff=spec.cutoff, g13_abs=abs(spec.g13), n_samples=spec.n_samples,
        gt_max=spec.gt_max, order_cap=spec.order_cap, settings=spec.settings,
    )
    manifest = {"parameters": ["gamma", "cutoff"], "runs": []}
    for res in results:
        gamma = res.experiment.gamma
        files = {}
        for name in ("full", "resonant"):
            fname = f"gamma_{fmt(gamma)}_cutoff_{spec.cutoff}_{name}.csv"
            write_trajectory_csv(out / fname, res[name])
            files[name] = fname
        manifest["runs"].append({"gamma": gamma, "cutoff": spec.cutoff, "eta": res.experiment.eta,
                                 "files": files, "summary": res.summary("full")})
    write_json(out / "manifest.json", manifest)
    sys.stdout.write(dump_json(manifest))
    return EXIT_OK


def cmd_resonances(spec: ExperimentSpec, out: Path) -> int:
    records, report = _resonance_report(spec)
    table = resonance_table(records, report)
    (out / "resonances.csv").write_text(table)
    sys.stdout.write(table)
    return EXIT_OK if report.ok else EXIT_FLAG


def cmd_limits(spec: ExperimentSpec, out: Path) -> int:
    report = timescale_table(spec.trap, spec.target, spec.g13, spec.eta12, spec.eta23,
                             alpha=spec.alpha, theta=spec.theta, pair=spec.pair,
                             margin=spec.time_margin)
    write_json(out / "limits.json", report.as_dict())
    sys.stdout.write(dump_json(report.as_dict()))
    return EXIT_OK if report.ok else EXIT_FLAG


def cmd_validate_adiabatic(spec: ExperimentSpec, out: Path) -> int:
    if spec.pair is None:
        raise ConfigError("validate-adiabatic needs raw laser parameters ('raman' block)")
    v = spec.validation
    cut = int(v.get("cutoff", 4))
    basis = FockBasis(cut, cut)
    scale = _number(v, "elimination_scale", 1.0)
    threshold = _number(v, "min_fidelity", 0.99)
    n_samples = int(v.get("n_samples", 400))
    initial = v.get("initial", {"fock": [1, 0]})
    if "fock" in initial:
        motional = fock_state(*initial["fock"], basis).amplitudes
    elif "alpha" in initial:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TailTooHeavy)
            motional = coherent_state(initial["alpha"], initial["alpha"], basis).amplitudes
    else:
        raise ConfigError("validation.initial needs 'fock' or 'alpha'")
    kw = {"eta12": spec.eta12, "eta23": spec.eta23}
    result = adiabatic_validation(spec.pair, spec.trap, basis, motional, spec.target,
                                  elimination_scale=scale, n_samples=n_samples, **kw)
    with open(out / "validation.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t_s", "gt", "fidelity", "excited_population"])
        for row in zip(result["times"], result["gt"], result["fidelity"], result["excited"]):
            writer.writerow([fmt(x) for x in row])
    summary = {k: result[k] for k in ("min_fidelity", "max_excited", "excited_bound", "t_rot_s",
                                      "adiabatic_ratio", "elimination_scale")}
    summary["fidelity_ok"] = result["min_fidelity"] >= threshold
    summary["excited_ok"] = result["max_excited"] <= result["excited_bound"]
    write_json(out / "validation.json", summary)
    sys.stdout.write(dump_json(summary))
    return EXIT_OK if summary["fidelity_ok"] and summary["excited_ok"] else EXIT_FLAG


COMMANDS = {
    "compile": cmd_compile,
    "rotate": cmd_rotate,
    "sweep": cmd_sweep,
    "resonances": cmd_resonances,
    "limits": cmd_limits,
    "validate-adiabatic": cmd_validate_adiabatic,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twomode-ion",
        description="Two-mode motional interactions from symmetric Raman pairs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config, frequencies in Hz")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--cutoff", type=int, default=None, help="Fock cutoff per mode")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_config(args.config, args.cutoff)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "sweep":
            return cmd_sweep(spec, out, max(1, args.threads))
        return COMMANDS[args.command](spec, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UnitarityLost, CutoffLeak) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
