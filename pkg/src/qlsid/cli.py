"""Command-line front end.

Machine-readable results (JSON or CSV) go to ``-o`` or standard output;
human-readable summaries and warnings go to standard error.

Exit codes: 0 success, 2 input error, 3 global-minimality violation,
4 genericity violation, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as qio
from .analysis import (
    find_symplectic_between,
    is_globally_minimal,
    is_hurwitz,
    is_minimal,
    probe_frequencies,
    spectrum_matrix,
    stationary_covariance,
    transfer_distance,
    transfer_matrix,
)
from .cascade import build_cascade, cascade_minimality_check, gilbert_realization
from .errors import (
    GlobalMinimalityError,
    InputError,
    NumericalError,
    OrderError,
    PurityError,
    QlsError,
    SingularityError,
)
from .estimation import exact_dataset, identify_from_data, synthesize_dataset
from .generators import random_system
from .identification import Tolerances, identify
from .model import (
    build_state_space,
    is_passive,
    params_from_state_space,
    realizability_residual,
    reduce_to_vacuum_input,
    restore_input_frame,
    vacuum_covariance,
)

log = logging.getLogger("qlsid")

PROFILE_ENV = "QLSID_TOL_PROFILE"
EXIT_OK, EXIT_INPUT, EXIT_GMIN, EXIT_GENERIC, EXIT_NUMERIC = 0, 2, 3, 4, 5


@dataclass(frozen=True)
class ToleranceSet:
    """Every threshold the CLI exposes; ``--tol-<name>`` overrides one field."""

    gmin: float = 1e-8
    pbh: float = 1e-8
    pair: float = 1e-7
    rank: float = 1e-8
    genericity: float = 1e-6
    gram: float = 1e-10
    structure: float = 1e-8
    realizability: float = 1e-8
    transfer: float = 1e-7
    relation: float = 1e-8

    def pipeline(self) -> Tolerances:
        return Tolerances(
            pair=self.pair,
            rank=self.rank,
            genericity=self.genericity,
            gram=self.gram,
            structure=self.structure,
            realizability=self.realizability,
            transfer=self.transfer,
            relation=self.relation,
            t2=self.transfer,
        )


PROFILES = {
    "default": ToleranceSet(),
    "strict": ToleranceSet(
        pair=1e-9, rank=1e-10, structure=1e-10, realizability=1e-10, transfer=1e-9, relation=1e-10
    ),
    "loose": ToleranceSet(
        pair=1e-5, rank=1e-6, structure=1e-6, realizability=1e-6, transfer=1e-5, relation=1e-6
    ),
}
TOLERANCE_NAMES = tuple(f.name for f in dataclasses.fields(ToleranceSet))


@dataclass(frozen=True)
class CommandConfig:
    """Validated options of one invocation."""

    command: str
    inputs: tuple = ()
    output: str | None = None
    omega_min: float | None = None
    omega_max: float | None = None
    points: int = 101
    spacing: str = "log"
    tolerances: ToleranceSet = field(default_factory=ToleranceSet)
    seed: int = 0
    modes: int = 1
    channels: int = 1
    globally_minimal: bool = False
    generic: bool = False
    order: int | None = None
    shots: int | None = None
    digits: int = 10
    gilbert: bool = False

    def __post_init__(self):
        if self.points < 1:
            raise InputError("--points must be positive")
        if self.spacing not in ("log", "linear"):
            raise InputError(f"unknown spacing {self.spacing!r}")
        lo, hi = self.omega_min, self.omega_max
        if lo is not None and hi is not None and not lo < hi:
            raise InputError("--omega-min must be below --omega-max")
        if self.spacing == "log" and lo is not None and lo <= 0:
            raise InputError("logarithmic spacing needs a positive --omega-min")
        if self.modes < 1 or self.channels < 1:
            raise InputError("--modes and --channels must be positive")
        if self.order is not None and self.order < 0:
            raise InputError("--order must be nonnegative")
        if self.shots is not None and self.shots < 1:
            raise InputError("--shots must be positive")
        if not 1 <= self.digits <= 17:
            raise InputError("--digits must be between 1 and 17")

    @classmethod
    def from_mapping(cls, values: dict) -> "CommandConfig":
        """Build from a plain mapping, rejecting unknown fields."""
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise InputError(f"unknown configuration fields {sorted(unknown)}")
        return cls(**values)

    def grid(self, scale: float) -> np.ndarray:
        """Frequency grid; missing bounds default to ``[1e-2, 1e2] * scale``."""
        lo = self.omega_min if self.omega_min is not None else 1e-2 * scale
        hi = self.omega_max if self.omega_max is not None else 1e2 * scale
        if not lo < hi:
            raise InputError(f"empty frequency range [{lo:g}, {hi:g}]")
        if self.spacing == "log":
            if lo <= 0:
                raise InputError("logarithmic spacing needs a positive lower bound")
            return np.logspace(np.log10(lo), np.log10(hi), self.points)
        return np.linspace(lo, hi, self.points)


def resolve_profile(name: str | None = None) -> ToleranceSet:
    name = name if name is not None else os.environ.get(PROFILE_ENV, "default")
    try:
        return PROFILES[name]
    except KeyError:
        raise InputError(f"unknown tolerance profile {name!r} (choose from {sorted(PROFILES)})") from None


def _emit(cfg: CommandConfig, text: str) -> None:
    if cfg.output:
        try:
            Path(cfg.output).write_text(text)
        except OSError as exc:
            raise InputError(f"cannot write {cfg.output}: {exc.strerror}") from exc
    else:
        sys.stdout.write(text)


def _load_system(path):
    params, inp = qio.system_from_json(qio.read_json(path))
    return params, inp, build_state_space(params)


def _scale(ss) -> float:
    return max(float(np.linalg.norm(ss.a, 2)), 1e-12)


def cmd_analyze(cfg: CommandConfig) -> int:
    params, inp, ss = _load_system(cfg.inputs[0])
    tol = cfg.tolerances
    warnings: list[str] = []
    reduced = ss
    if inp is not None:
        try:
            reduced = reduce_to_vacuum_input(ss, inp)
        except PurityError as exc:
            warnings.append(f"input is not pure ({exc}); vacuum-based criteria skipped")
            reduced = None
    hurwitz = is_hurwitz(ss)
    report = {
        "modes": params.modes,
        "channels": params.channels,
        "input_reduced": inp is not None and reduced is not None,
        "realizability_residual": realizability_residual(ss),
        "passive": is_passive(params),
        "passive_under_input": None if reduced is None else is_passive(params_from_state_space(reduced)),
        "hurwitz": hurwitz,
        "minimal": is_minimal(ss, tol.pbh),
        "eigenvalues_a": qio.encode_matrix(np.linalg.eigvals(ss.a)),
        "globally_minimal": None,
        "cascade_minimal": None,
        "min_eig_p": None,
        "max_eig_p": None,
        "warnings": warnings,
    }
    if not hurwitz:
        warnings.append("A is not Hurwitz; stationary quantities are undefined")
    elif reduced is not None:
        gm = is_globally_minimal(reduced, tol.gmin, tol.pbh)
        cov = stationary_covariance(reduced)
        report["globally_minimal"] = {
            "verdict": gm.globally_minimal,
            "by_covariance": gm.by_covariance,
            "by_controllability": gm.by_controllability,
            "by_observability": gm.by_observability,
        }
        report["cascade_minimal"] = cascade_minimality_check(reduced, tol.pbh, tol.gmin).cascade_minimal
        report["min_eig_p"] = cov.min_eigenvalue
        report["max_eig_p"] = cov.max_eigenvalue
    for w in warnings:
        log.warning(w)
    log.info(
        "hurwitz=%s minimal=%s globally_minimal=%s",
        hurwitz,
        report["minimal"],
        None if report["globally_minimal"] is None else report["globally_minimal"]["verdict"],
    )
    _emit(cfg, qio.dumps(report))
    return EXIT_OK


def _sweep(cfg: CommandConfig, kind: str) -> int:
    params, inp, ss = _load_system(cfg.inputs[0])
    omegas = cfg.grid(_scale(ss))
    v = inp.v if inp is not None else vacuum_covariance(params.channels)
    rows_w, rows = [], []
    for w in omegas:
        try:
            mat = spectrum_matrix(ss, v, -1j * w) if kind == "psi" else transfer_matrix(ss, -1j * w)
        except SingularityError:
            log.warning("omega = %g lies on the spectrum of A; row skipped", w)
            continue
        rows_w.append(w)
        rows.append(mat)
    mats = np.array(rows) if rows else np.zeros((0, 2 * params.channels, 2 * params.channels))
    _emit(cfg, qio.sweep_csv(rows_w, mats, kind, cfg.digits))
    log.info("%d rows written", len(rows_w))
    return EXIT_OK


def cmd_spectrum(cfg: CommandConfig) -> int:
    return _sweep(cfg, "psi")


def cmd_transfer(cfg: CommandConfig) -> int:
    return _sweep(cfg, "xi")


def _check_order(order: int | None, actual: int) -> None:
    if order is not None and order != actual:
        raise OrderError(f"realization has order {actual}, expected {order}", actual)


def cmd_identify(cfg: CommandConfig) -> int:
    doc = qio.read_json(cfg.inputs[0])
    kind = qio.document_kind(doc)
    tol = cfg.tolerances
    extra: dict = {}
    inp = None
    if kind == "system":
        params, inp = qio.system_from_json(doc)
        original = build_state_space(params)
        reduced = original if inp is None else reduce_to_vacuum_input(original, inp)
        if not is_globally_minimal(reduced, tol.gmin, tol.pbh).globally_minimal:
            raise GlobalMinimalityError("the spectrum admits a realization with fewer modes")
        casc = build_cascade(reduced)
        _check_order(cfg.order, casc.order)
        result = identify(casc, tol.pipeline())
        system = result.system if inp is None else restore_input_frame(result.system, inp)
        dist = transfer_distance(original, system, probe_frequencies(original))
        extra["transfer_distance"] = dist
        if dist > tol.transfer:
            raise NumericalError(f"identified transfer function misses the original by {dist:.2e}")
    elif kind == "dataset":
        data = qio.dataset_from_json(doc)
        inp = data.input
        custom = tol != resolve_profile()
        pipeline_tol = tol.pipeline() if (data.shots is None or custom) else None
        ident = identify_from_data(data, cfg.order, pipeline_tol)
        result, system = ident.result, ident.system
        extra["fit_residual"] = ident.fit.sample_residual
    else:
        real = qio.realization_from_json(doc) if kind == "realization" else qio.gilbert_from_json(doc)
        _check_order(cfg.order, real.order)
        result = identify(real, tol.pipeline())
        system = result.system
    params = params_from_state_space(system, tol=max(tol.realizability, 1e-9))
    out = qio.identification_to_json(result, params, inp, extra)
    for name, value in out["diagnostics"]["residuals"].items():
        log.info("%s = %.3e", name, value)
    _emit(cfg, qio.dumps(out))
    return EXIT_OK


def cmd_equiv(cfg: CommandConfig) -> int:
    pa, ia, ssa = _load_system(cfg.inputs[0])
    pb, ib, ssb = _load_system(cfg.inputs[1])
    if ia is not None or ib is not None:
        log.warning("input fields are ignored; systems are compared as given")
    tol = cfg.tolerances
    eq = find_symplectic_between(ssa, ssb, transfer_tol=tol.transfer, relation_tol=tol.relation)
    if eq is None:
        report = {"equivalent": False, "t": None}
        if ssa.a.shape == ssb.a.shape and ssa.c.shape == ssb.c.shape:
            report["transfer_distance"] = transfer_distance(ssa, ssb, probe_frequencies(ssa))
    else:
        report = {
            "equivalent": True,
            "t": qio.encode_matrix(eq.t),
            "transfer_distance": eq.transfer_distance,
            "relation_residual": eq.relation_residual,
            "symplectic_deviation": eq.symplectic_deviation,
        }
    log.info("equivalent=%s", report["equivalent"])
    _emit(cfg, qio.dumps(report))
    return EXIT_OK


def cmd_random(cfg: CommandConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    params = random_system(
        cfg.modes, cfg.channels, rng, globally_minimal=cfg.globally_minimal, generic=cfg.generic
    )
    _emit(cfg, qio.dumps(qio.system_to_json(params, kind="system")))
    return EXIT_OK


def cmd_synthesize(cfg: CommandConfig) -> int:
    params, inp, ss = _load_system(cfg.inputs[0])
    omegas = cfg.grid(_scale(ss))
    if cfg.shots is None:
        data = exact_dataset(ss, inp, omegas)
    else:
        data = synthesize_dataset(ss, inp, omegas, cfg.shots, cfg.seed)
    _emit(cfg, qio.dumps(qio.dataset_to_json(data)))
    return EXIT_OK


def cmd_realize(cfg: CommandConfig) -> int:
    params, inp, ss = _load_system(cfg.inputs[0])
    reduced = ss if inp is None else reduce_to_vacuum_input(ss, inp)
    casc = build_cascade(reduced)
    if cfg.gilbert:
        doc = qio.gilbert_to_json(gilbert_realization(casc, **cfg.tolerances.pipeline().gilbert_kwargs()))
    else:
        doc = qio.realization_to_json(casc)
    _emit(cfg, qio.dumps(doc))
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "spectrum": cmd_spectrum,
    "transfer": cmd_transfer,
    "identify": cmd_identify,
    "equiv": cmd_equiv,
    "random": cmd_random,
    "synthesize": cmd_synthesize,
    "realize": cmd_realize,
}


def _freq_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--omega-min", type=float)
    p.add_argument("--omega-max", type=float)
    p.add_argument("--points", type=int, default=101)
    sp = p.add_mutually_exclusive_group()
    sp.add_argument("--log", dest="spacing", action="store_const", const="log")
    sp.add_argument("--linear", dest="spacing", action="store_const", const="linear")
    p.set_defaults(spacing="log")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlsid", description="Quantum linear system analysis and identification.")
    parser.add_argument("-v", "--verbose", action="store_true", help="print summaries to standard error")
    parser.add_argument("--profile", help=f"tolerance profile (default from ${PROFILE_ENV} or 'default')")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output")
    for name in TOLERANCE_NAMES:
        common.add_argument(f"--tol-{name}", type=float, dest=f"tol_{name}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="realizability, stability and minimality report")
    p.add_argument("inputs", nargs=1, metavar="system.json")

    for name, what in (("spectrum", "power spectrum"), ("transfer", "transfer function")):
        p = sub.add_parser(name, parents=[common], help=f"CSV sweep of the {what}")
        p.add_argument("inputs", nargs=1, metavar="system.json")
        _freq_options(p)
        p.add_argument("--digits", type=int, default=10, help="decimal places in the CSV")

    p = sub.add_parser("identify", parents=[common], help="reconstruct a system from a spectrum")
    p.add_argument("inputs", nargs=1, metavar="input.json")
    p.add_argument("--order", type=int, help="expected order of Psi(s) J (4 times the mode count)")

    p = sub.add_parser("equiv", parents=[common], help="test symplectic equivalence of two systems")
    p.add_argument("inputs", nargs=2, metavar="system.json")

    p = sub.add_parser("random", parents=[common], help="random realizable Hurwitz system")
    p.add_argument("--modes", "-n", type=int, default=1)
    p.add_argument("--channels", "-m", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--globally-minimal", action="store_true")
    p.add_argument("--generic", action="store_true", help="require distinct non-real poles")

    p = sub.add_parser("synthesize", parents=[common], help="spectrum dataset, exact or with Wishart noise")
    p.add_argument("inputs", nargs=1, metavar="system.json")
    _freq_options(p)
    p.add_argument("--shots", type=int, help="degrees of freedom per sample (omit for exact samples)")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("realize", parents=[common], help="cascade realization of Psi(s) J")
    p.add_argument("inputs", nargs=1, metavar="system.json")
    p.add_argument("--gilbert", action="store_true", help="export the Gilbert realization instead")
    return parser


def config_from_args(ns: argparse.Namespace) -> CommandConfig:
    values = vars(ns).copy()
    values.pop("verbose", None)
    base = resolve_profile(values.pop("profile", None))
    overrides = {name: values.pop(f"tol_{name}") for name in TOLERANCE_NAMES if values.get(f"tol_{name}") is not None}
    for name in TOLERANCE_NAMES:
        values.pop(f"tol_{name}", None)
    for name, value in overrides.items():
        if not value > 0:
            raise InputError(f"--tol-{name} must be positive")
    values["tolerances"] = dataclasses.replace(base, **overrides)
    values["inputs"] = tuple(values.get("inputs") or ())
    return CommandConfig.from_mapping(values)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if ns.verbose else logging.WARNING, format="qlsid: %(message)s", stream=sys.stderr
    )
    try:
        cfg = config_from_args(ns)
        return COMMANDS[cfg.command](cfg)
    except QlsError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
