"""Command-line batch runner.

Configuration is an INI file with MHz-denominated keys::

    [device]
    omega1_MHz = 4500
    g12_MHz = 5

    [drive]
    phi_ac = 0.1
    g_e_MHz = 2          ; or phi_dc = 0.23, never both

    [gate]
    gamma_over_pi = 1
    scheme = UNGQC
    chi_over_pi = 0.43

Every subcommand writes CSV files plus ``manifest.json`` into ``--out``.
"""

from __future__ import annotations

import argparse
import configparser
import contextlib
import csv
import hashlib
import json
import logging
import math
import sys
import time
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, bench, device as dev, zzcalc
from .dynamics import IntegrationError, StepSizeError
from .geopath import RegimeViolationError, Scheme, SingularTrajectoryError, synthesize

log = logging.getLogger("geogate")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SIG_DIGITS = 12


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

DEVICE_KEYS = {
    "omega1_MHz": "omega1",
    "omega2_MHz": "omega2",
    "omega_c0_MHz": "omega_c0",
    "alpha1_MHz": "alpha1",
    "alpha2_MHz": "alpha2",
    "alpha_c_MHz": "alpha_c",
    "g1_MHz": "g1",
    "g2_MHz": "g2",
    "g12_MHz": "g12",
}


@dataclass
class ScanConfig:
    gammas_over_pi: tuple = (1.0, 0.5, 0.25)
    chi_min_over_pi: float = 0.2
    chi_max_over_pi: float = 0.9
    chi_points: int = 25
    g_e_min_MHz: float = 0.3
    g_e_max_MHz: float = 5.1
    g_e_points: int = 25
    xi_max_over_g_e: float = 0.1
    xi_points: int = 41
    delta_max: float = 0.1
    delta_points: int = 41
    kappa_max_over_g_e: float = 1 / 250
    kappa_points: int = 11
    kappa_kHz: float = 2.0
    time_samples: int = 200
    sweep_g_e_min_MHz: float = 3.0
    sweep_g_e_max_MHz: float = 5.5
    sweep_g_e_points: int = 0
    detuning_min_MHz: float = 1000.0
    detuning_max_MHz: float = 3000.0
    detuning_points: int = 41


@dataclass
class RunConfig:
    device: dev.DeviceParams = field(default_factory=dev.reference_device)
    phi_ac: float = 0.1
    phi_dc: float | None = None
    g_e_MHz: float | None = 2.0
    gamma_over_pi: float = 1.0
    scheme: Scheme = Scheme.UNGQC
    chi_over_pi: float = 0.43
    eta: float = 0.5
    xi1: float = 0.0
    quadrature: int = 16
    scan: ScanConfig = field(default_factory=ScanConfig)
    text: str = ""

    @property
    def gamma(self) -> float:
        return self.gamma_over_pi * np.pi

    @property
    def chi(self) -> float:
        return self.chi_over_pi * np.pi

    def resolve_phi_dc(self) -> float:
        if self.phi_dc is not None:
            return self.phi_dc
        return dev.flux_for_effective_coupling(self.device, dev.mhz(self.g_e_MHz), self.phi_ac)

    def resolve_g_e(self) -> float:
        if self.g_e_MHz is not None:
            return dev.mhz(self.g_e_MHz)
        return abs(dev.effective_coupling(self.device, dev.FluxDrive(self.phi_dc, self.phi_ac)))

    def digest(self) -> str:
        return hashlib.sha256(canonical_text(self).encode()).hexdigest()


def canonical_text(cfg: RunConfig) -> str:
    """Stable rendering of every resolved setting, used for hashing."""
    d = {"device": cfg.device.to_mhz()}
    d["run"] = {f.name: getattr(cfg, f.name) for f in fields(cfg)
                if f.name not in ("device", "scan", "text")}
    d["run"]["scheme"] = cfg.scheme.value
    d["scan"] = {f.name: getattr(cfg.scan, f.name) for f in fields(cfg.scan)}
    return json.dumps(d, sort_keys=True, default=list)


def _finite(section: str, key: str, raw: str) -> float:
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: {raw!r} is not a number") from None
    if not math.isfinite(val):
        raise ConfigError(f"[{section}] {key}: must be finite")
    return val


def _int(section: str, key: str, raw: str, minimum: int = 1) -> int:
    val = _finite(section, key, raw)
    if val != int(val) or val < minimum:
        raise ConfigError(f"[{section}] {key}: expected an integer >= {minimum}")
    return int(val)


def _check_known(parser, section: str, allowed) -> None:
    if not parser.has_section(section):
        return
    for key in parser[section]:
        if key not in allowed:
            raise ConfigError(f"[{section}] {key}: unknown key")


def load_config(path: str | None) -> RunConfig:
    """Parse and validate ``path``; ``None`` gives the default parameter set."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config syntax: {exc}") from None
    known = {"device", "drive", "gate", "numerics", "scan"}
    extra = set(parser.sections()) - known
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(extra))}")

    cfg = RunConfig(text=text)

    _check_known(parser, "device", DEVICE_KEYS)
    if parser.has_section("device"):
        mhz_values = {DEVICE_KEYS[k]: _finite("device", k, v) for k, v in parser["device"].items()}
        try:
            cfg.device = dev.DeviceParams.from_mhz(**mhz_values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[device] {exc}") from None

    _check_known(parser, "drive", {"phi_ac", "phi_dc", "g_e_MHz"})
    if parser.has_section("drive"):
        s = parser["drive"]
        if "phi_ac" in s:
            cfg.phi_ac = _finite("drive", "phi_ac", s["phi_ac"])
        has_dc, has_g = "phi_dc" in s, "g_e_MHz" in s
        if has_dc and has_g:
            raise ConfigError("[drive] give exactly one of phi_dc / g_e_MHz")
        if has_dc:
            cfg.phi_dc = _finite("drive", "phi_dc", s["phi_dc"])
            cfg.g_e_MHz = None
        if has_g:
            cfg.g_e_MHz = _finite("drive", "g_e_MHz", s["g_e_MHz"])
            if cfg.g_e_MHz <= 0:
                raise ConfigError("[drive] g_e_MHz: must be positive")
    try:
        dev.FluxDrive(cfg.phi_dc if cfg.phi_dc is not None else 0.0, cfg.phi_ac)
    except dev.DeviceError as exc:
        raise ConfigError(f"[drive] {exc}") from None

    _check_known(parser, "gate", {"gamma_over_pi", "scheme", "chi_over_pi", "eta", "xi1"})
    if parser.has_section("gate"):
        s = parser["gate"]
        for key in ("gamma_over_pi", "chi_over_pi", "eta", "xi1"):
            if key in s:
                setattr(cfg, key, _finite("gate", key, s[key]))
        if "scheme" in s:
            try:
                cfg.scheme = Scheme(s["scheme"].strip().upper())
            except ValueError:
                names = ", ".join(x.value for x in Scheme)
                raise ConfigError(f"[gate] scheme: expected one of {names}") from None
    if not 0 < cfg.chi_over_pi <= 1:
        raise ConfigError("[gate] chi_over_pi: must lie in (0, 1]")
    if cfg.eta <= 0:
        raise ConfigError("[gate] eta: must be positive")

    _check_known(parser, "numerics", {"quadrature"})
    if parser.has_section("numerics") and "quadrature" in parser["numerics"]:
        cfg.quadrature = _int("numerics", "quadrature", parser["numerics"]["quadrature"],
                              bench.MIN_QUADRATURE)

    scan_fields = {f.name: f for f in fields(ScanConfig)}
    _check_known(parser, "scan", scan_fields)
    if parser.has_section("scan"):
        for key, raw in parser["scan"].items():
            if key == "gammas_over_pi":
                vals = tuple(_finite("scan", key, x) for x in raw.replace(",", " ").split())
                if not vals:
                    raise ConfigError("[scan] gammas_over_pi: empty list")
                cfg.scan.gammas_over_pi = vals
            elif key.endswith("_points"):
                minimum = 0 if key == "sweep_g_e_points" else 1
                setattr(cfg.scan, key, _int("scan", key, raw, minimum))
            else:
                setattr(cfg.scan, key, _finite("scan", key, raw))
    sc = cfg.scan
    for lo, hi in (("chi_min_over_pi", "chi_max_over_pi"), ("g_e_min_MHz", "g_e_max_MHz"),
                   ("detuning_min_MHz", "detuning_max_MHz"),
                   ("sweep_g_e_min_MHz", "sweep_g_e_max_MHz")):
        if getattr(sc, lo) > getattr(sc, hi):
            raise ConfigError(f"[scan] {lo} exceeds {hi}")
    if sc.chi_min_over_pi <= 0 or sc.chi_max_over_pi > 1:
        raise ConfigError("[scan] chi range must lie in (0, 1]")
    return cfg


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.{SIG_DIGITS}g}"


def emit_csv(result: bench.ScanResult, path) -> Path:
    """Write ``result`` row-major over its axes with 12 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result.header)
        for row in result.rows():
            w.writerow([_fmt(v) for v in row])
    return path


SYNTH_HEADER = ("segment", "duration_us", "g_e_rad_per_us", "phi_a_rad", "phi_b_rad_per_us",
                "delta_e_rad_per_us", "omega_phi_rad_per_us", "drive_phase_rad")


def emit_schedule(cfg: RunConfig, path) -> Path:
    """One line per pulse segment, effective parameters plus flux-drive settings."""
    g_e = cfg.resolve_g_e()
    sch = synthesize(cfg.scheme, cfg.gamma, chi=cfg.chi, eta=cfg.eta, g_e=g_e, xi1=cfg.xi1)
    setup = bench.ModulatedSetup.for_coupling(cfg.device, g_e, cfg.phi_ac)
    drives = setup.drives(sch)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SYNTH_HEADER)
        for i, (seg, drv) in enumerate(zip(sch.segments, drives)):
            w.writerow([str(i)] + [_fmt(v) for v in (seg.duration, seg.g_e, seg.phi_a, seg.phi_b,
                                                     seg.delta_e, drv.omega_phi, drv.drive_phase)])
    return path


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _lin(lo, hi, n):
    return np.linspace(lo, hi, n)


def run_fig1(cfg, out, threads):
    sc = cfg.scan
    res = bench.fig1_scan(cfg.device, cfg.phi_ac,
                          dev.mhz(_lin(sc.detuning_min_MHz, sc.detuning_max_MHz, sc.detuning_points)))
    return [emit_csv(res, out / "fig1.csv")]


def run_landscape(cfg, out, threads):
    sc = cfg.scan
    chis = np.pi * _lin(sc.chi_min_over_pi, sc.chi_max_over_pi, sc.chi_points)
    g_es = dev.mhz(_lin(sc.g_e_min_MHz, sc.g_e_max_MHz, sc.g_e_points))
    paths = []
    for gop in sc.gammas_over_pi:
        res = bench.landscape_scan(gop * np.pi, chis, g_es, cfg.device, cfg.eta, cfg.phi_ac, threads)
        paths.append(emit_csv(res, out / f"landscape_gamma_{gop:g}pi.csv"))
    return paths


def run_robustness(cfg, out, threads):
    sc = cfg.scan
    g_e = cfg.resolve_g_e()
    xis = g_e * _lin(-sc.xi_max_over_g_e, sc.xi_max_over_g_e, sc.xi_points)
    ds = _lin(-sc.delta_max, sc.delta_max, sc.delta_points)
    paths = []
    for s in Scheme:
        zz = bench.zz_robustness_scan(cfg.gamma, s, cfg.chi, cfg.eta, g_e, xis, threads)
        paths.append(emit_csv(zz, out / f"robust_zz_{s.value}.csv"))
        dr = bench.drift_robustness_scan(cfg.gamma, s, cfg.chi, cfg.eta, g_e, ds, ds, threads)
        paths.append(emit_csv(dr, out / f"robust_drift_{s.value}.csv"))
    return paths


def run_decoherence(cfg, out, threads):
    sc = cfg.scan
    g_e = cfg.resolve_g_e()
    kappas = g_e * _lin(0.0, sc.kappa_max_over_g_e, sc.kappa_points)
    n = cfg.quadrature
    paths = [emit_csv(bench.decoherence_scan(cfg.gamma, tuple(Scheme), g_e, kappas, cfg.chi,
                                             cfg.eta, n, threads),
                      out / "decoherence_vs_kappa.csv")]
    kappa = dev.mhz(sc.kappa_kHz * 1e-3)
    for s in Scheme:
        tr = bench.time_resolved(cfg.gamma, s, kappa, g_e, cfg.chi, cfg.eta, n, sc.time_samples,
                                 cfg.device, "modulated", cfg.phi_ac)
        paths.append(emit_csv(tr, out / f"decoherence_time_{s.value}.csv"))
    if sc.sweep_g_e_points:
        g_es = dev.mhz(_lin(sc.sweep_g_e_min_MHz, sc.sweep_g_e_max_MHz, sc.sweep_g_e_points))
        sw = bench.coupling_sweep(cfg.gamma, cfg.scheme, g_es, kappa, cfg.device, cfg.chi,
                                  cfg.eta, n, cfg.phi_ac, threads)
        paths.append(emit_csv(sw, out / "decoherence_vs_g_e.csv"))
    return paths


def run_synth(cfg, out, threads):
    return [emit_schedule(cfg, out / f"schedule_{cfg.scheme.value}.csv")]


def run_zz(cfg, out, threads):
    phi = cfg.resolve_phi_dc()
    wc = dev.coupler_frequency(cfg.device, phi)
    cols = {}
    try:
        closed = zzcalc.zz_closed_form(cfg.device, wc)
        pert = zzcalc.zz_perturbative(cfg.device, wc)
        for i, (a, b) in enumerate(zip(closed.orders, pert.orders)):
            cols[f"xi{i}_closed_rad_per_us"] = a
            cols[f"xi{i}_perturbative_rad_per_us"] = b
        cols["total_closed_rad_per_us"] = closed.total
        cols["total_perturbative_rad_per_us"] = pert.total
        cols["total_exact_rad_per_us"] = zzcalc.zz_exact(cfg.device, wc)
        cols["flag"] = 0.0
    except (zzcalc.DegenerateLevelError, zzcalc.HybridizationError) as exc:
        log.warning("zz point flagged: %s", exc)
        cols = {"flag": 1.0}
    res = bench.ScanResult(axes=[("omega_c_rad_per_us", np.array([wc]))],
                           values={k: np.array([v]) for k, v in cols.items()},
                           device=cfg.device.to_mhz())
    return [emit_csv(res, out / "zz.csv")]


COMMANDS = {
    "fig1": run_fig1,
    "landscape": run_landscape,
    "robustness": run_robustness,
    "decoherence": run_decoherence,
    "synth": run_synth,
    "zz": run_zz,
}


@contextlib.contextmanager
def no_rng():
    """Make any use of numpy's random module fail loudly."""

    def forbidden(*_a, **_k):
        raise RuntimeError("random number generation is not allowed in a seedless run")

    names = ("default_rng", "seed", "random", "rand", "randn", "normal", "uniform", "RandomState")
    saved = {n: getattr(np.random, n) for n in names}
    try:
        for n in names:
            setattr(np.random, n, forbidden)
        yield
    finally:
        for n, f in saved.items():
            setattr(np.random, n, f)


def write_manifest(out: Path, command: str, cfg: RunConfig, paths, wall: float) -> Path:
    manifest = {
        "command": command,
        "config_sha256": cfg.digest(),
        "tool_version": __version__,
        "wall_clock_s": round(wall, 3),
        "outputs": [p.name for p in paths],
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geogate", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="INI config file (defaults to the built-in device)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker processes for scan cells")
    p.add_argument("--seedless", action="store_true",
                   help="fail if anything requests random numbers")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create {out}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    guard = no_rng() if args.seedless else contextlib.nullcontext()
    t0 = time.perf_counter()
    try:
        with guard, warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore")
            paths = COMMANDS[args.command](cfg, out, args.threads)
    except (dev.DeviceError, SingularTrajectoryError, RegimeViolationError,
            StepSizeError, IntegrationError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_manifest(out, args.command, cfg, paths, time.perf_counter() - t0)
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
