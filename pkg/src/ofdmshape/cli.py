"""Scenario-driven command line front end.

A scenario fixes the system numbers, the notched band, the shaping methods
and their parameters; `run` solves every selected method under both pulse
families, writes PSD curves, pulse-family PSD differences, realness
certificates and complexity reports, and checks the scenario assertions.
Two scenarios are built in: `fig1` (the N=4096 validation setup) and `toy`
(a desk-scale version of the same layout).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .complexity import COMPLEXITY_CSV_HEADER, measured_count, symbolic_count
from .core import (
    CarrierSets,
    PowerAllocation,
    PulseBank,
    PulseKind,
    SystemConfig,
)
from .exceptions import ConfigError, InfeasibleConstraintError
from .shapers import (
    NotchSet,
    ShaperSolution,
    baseline_solution,
    framework_objective,
    solve_aic,
    solve_aic_ast,
    solve_ast,
    solve_nullspace_precoder,
    solve_orthogonal_precoder,
    solve_weighted_precoder,
    transform_solution,
)
from .spectrum import (
    FrequencyGrid,
    PsdCurve,
    SpectralMask,
    analytic_psd,
    band_mask,
    peak_relative_diff,
    welch_psd,
)
from .synth import random_symbols, synthesize

KNOWN_METHODS = ("aic", "ast", "aic_ast", "aic_ast_peak",
                 "nullspace", "weighted", "orthogonal", "orthogonal_band")
PSD_EQUALITY_TOL = 1e-9
MATCHED_RATE_PSD_TOL = 1e-6


@dataclass(frozen=True)
class Scenario:
    name: str
    n: int
    n_gi: int
    beta: int
    notch_carriers: tuple          # half-open (lo, hi) index ranges
    notch_freqs: tuple = ()
    cc_in: int = 2
    cc_out: int = 1
    coding_rate: Fraction = Fraction(1, 1)
    methods: tuple = ("aic_ast", "nullspace", "weighted", "orthogonal")
    grid_density: int = 10
    seed: int = 1
    output: str = "out"
    welch: bool = False
    welch_symbols: int = 10000
    weight_profile: str = "edge_boost"
    peak_bound_factor: float = 1.01
    psd_equality_tol: float = PSD_EQUALITY_TOL


def builtin_fig1() -> Scenario:
    """N = 4096 validation scenario: guard interval 1024, transitions 511,
    notched bands 0..1024, 3022..3026 and 3072..4095, sixteen notch
    frequencies at the band edges, coding rate 2026/2042."""
    phi1 = (0.250, 0.2501, 0.2502, 0.2515, 0.2518)
    mid = (0.2378, 0.2379, 0.2380, 0.2385, 0.2386, 0.2387)
    freqs = tuple(sorted([-p for p in phi1] + list(mid) + list(phi1)))
    return Scenario(
        name="fig1", n=4096, n_gi=1024, beta=511,
        notch_carriers=((0, 1025), (3022, 3027), (3072, 4096)),
        notch_freqs=freqs,
        coding_rate=Fraction(2026, 2042),
    )


def builtin_toy() -> Scenario:
    """Desk-scale layout mirroring fig1: N = 64, guard 16, transitions 7."""
    return Scenario(
        name="toy", n=64, n_gi=16, beta=7,
        notch_carriers=((0, 17), (44, 46), (48, 64)),
        notch_freqs=(-0.25, -0.2453125, 0.2546875, 0.2609375),
        coding_rate=Fraction(25, 29),
        welch_symbols=2000,
    )


BUILTINS = {"fig1": builtin_fig1, "toy": builtin_toy}


# ---------------------------------------------------------------------------
# scenario file parsing


def _parse_ranges(text: str) -> tuple:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, hi = part.split(":")
        out.append((int(lo), int(hi)))
    return tuple(out)


def _parse_list(text: str) -> tuple:
    return tuple(p.strip() for p in text.split(",") if p.strip())


_SCENARIO_KEYS = {
    "n": int, "n_gi": int, "beta": int, "grid_density": int, "seed": int,
    "welch_symbols": int, "cc_in": int, "cc_out": int,
    "peak_bound_factor": float, "psd_equality_tol": float,
    "coding_rate": Fraction,
    "welch": lambda s: s.lower() in ("1", "true", "yes"),
    "output": str, "weight_profile": str,
    "notch_carriers": _parse_ranges,
    "notch_freqs": lambda s: tuple(float(x) for x in _parse_list(s)),
    "methods": _parse_list,
}


def parse_scenario_file(path) -> Scenario:
    raw = {}
    text = Path(path).read_text()
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _SCENARIO_KEYS:
            raise ConfigError(f"{path}:{ln}: unknown key {key!r}")
        raw[key] = _SCENARIO_KEYS[key](val)
    for req in ("n", "n_gi", "beta", "notch_carriers"):
        if req not in raw:
            raise ConfigError(f"{path}: missing required key {req!r}")
    return Scenario(name=Path(path).stem, **raw)


def load_scenario(source) -> Scenario:
    if isinstance(source, Scenario):
        return source
    if source in BUILTINS:
        return BUILTINS[source]()
    return parse_scenario_file(source)


# ---------------------------------------------------------------------------
# derived scenario pieces


def passband_ranges(scn: Scenario) -> tuple:
    """Complement of the notched carrier ranges, as half-open ranges."""
    edges = np.zeros(scn.n + 1, dtype=bool)
    notched = np.zeros(scn.n, dtype=bool)
    for lo, hi in scn.notch_carriers:
        notched[lo:hi] = True
    out = []
    k = 0
    while k < scn.n:
        if not notched[k]:
            start = k
            while k < scn.n and not notched[k]:
                k += 1
            out.append((start, k))
        else:
            k += 1
    del edges
    return tuple(out)


def aic_carrier_sets(scn: Scenario, cfg: SystemConfig) -> CarrierSets:
    """Data plus cancellation carriers: cc_in in-band and cc_out out-of-band
    carriers adjacent to each outer passband edge."""
    bands = passband_ranges(scn)
    if not bands:
        raise ConfigError("scenario has no passband")
    low, high = bands[0][0], bands[-1][1] - 1
    cc = list(range(low - scn.cc_out, low)) + list(range(low, low + scn.cc_in))
    cc += list(range(high - scn.cc_in + 1, high + 1)) + list(range(high + 1, high + 1 + scn.cc_out))
    if min(cc) < 0 or max(cc) >= scn.n:
        raise ConfigError("cancellation carriers fall outside [0, n)")
    passband = [k for lo, hi in bands for k in range(lo, hi)]
    data = [k for k in passband if k not in set(cc)]
    return CarrierSets.make(cfg.n, data, cc)


def precoder_carrier_sets(scn: Scenario, cfg: SystemConfig) -> CarrierSets:
    passband = [k for lo, hi in passband_ranges(scn) for k in range(lo, hi)]
    return CarrierSets.make(cfg.n, passband)


def edge_boost_weights(sets: CarrierSets) -> np.ndarray:
    """Heavier distortion penalty near passband edges: w = 1 + 9/(1 + d)
    with d the carrier distance to the nearest edge of its contiguous run."""
    active = np.asarray(sets.active)
    runs = []
    start = active[0]
    for prev, cur in zip(active[:-1], active[1:]):
        if cur != prev + 1:
            runs.append((start, prev))
            start = cur
    runs.append((start, active[-1]))
    w = np.empty(len(active))
    for i, k in enumerate(active):
        d = min(min(abs(k - lo), abs(k - hi)) for lo, hi in runs
                if lo <= k <= hi)
        w[i] = 1.0 + 9.0 / (1.0 + d)
    return w


# ---------------------------------------------------------------------------
# validation


def validate_scenario(scn: Scenario) -> list:
    """All invariant diagnostics, without running anything."""
    notes = []
    try:
        cfg = SystemConfig.make(scn.n, scn.n_gi, scn.beta)
    except ConfigError as exc:
        return [f"error: {exc}"]
    if cfg.note:
        notes.append(f"note: {cfg.note}")
    if cfg.beta > cfg.n_gi:
        notes.append("warning: transitions exceed the guard interval; "
                     "loopback reception will be corrupted")
    for lo, hi in scn.notch_carriers:
        if not (0 <= lo < hi <= scn.n):
            notes.append(f"error: notch range [{lo}, {hi}) out of [0, {scn.n}]")
            return notes
    try:
        sets_aic = aic_carrier_sets(scn, cfg)
        overlap = set(sets_aic.data) & set(sets_aic.cancel)
        if overlap:
            notes.append(f"error: carrier {min(overlap)} in both data and cancellation sets")
    except ConfigError as exc:
        notes.append(f"error: {exc}")
    try:
        sets_pre = precoder_carrier_sets(scn, cfg)
        dims = scn.coding_rate * sets_pre.n_active
        if dims.denominator != 1:
            notes.append(
                f"error: coding rate {scn.coding_rate} times {sets_pre.n_active} "
                "active carriers is not an integer"
            )
        if scn.notch_freqs and len(scn.notch_freqs) >= sets_pre.n_active:
            notes.append("error: as many notch frequencies as active carriers")
    except ConfigError as exc:
        notes.append(f"error: {exc}")
    for f in scn.notch_freqs:
        if not (-0.5 <= f < 0.5):
            notes.append(f"error: notch frequency {f} outside [-1/2, 1/2)")
    for m in scn.methods:
        if m not in KNOWN_METHODS:
            notes.append(f"error: unknown method {m!r}")
    return notes


def validate_config(source) -> list:
    return validate_scenario(load_scenario(source))


# ---------------------------------------------------------------------------
# scenario execution


@dataclass
class _MethodRun:
    name: str
    solutions: dict = field(default_factory=dict)   # PulseKind -> ShaperSolution
    psd: dict = field(default_factory=dict)         # PulseKind -> PsdCurve
    psd_diff: float = 0.0
    complexity_method: str = ""
    harmonics: Optional[int] = None


def _solve_method(name: str, scn: Scenario, bank: PulseBank, kind: PulseKind,
                  sets_aic: CarrierSets, sets_pre: CarrierSets,
                  mask0: SpectralMask, notch: NotchSet,
                  passband_mask: SpectralMask, power: PowerAllocation) -> ShaperSolution:
    if name == "aic":
        return solve_aic(bank, sets_aic, mask0, kind)
    if name == "ast":
        return solve_ast(bank, sets_aic, mask0, kind)
    if name == "aic_ast":
        return solve_aic_ast(bank, sets_aic, mask0, kind)
    if name == "aic_ast_peak":
        base = baseline_solution(bank, sets_aic, kind)
        bound = scn.peak_bound_factor * framework_objective(base, passband_mask, power)
        mask1 = SpectralMask(passband_mask.grid, passband_mask.weight,
                             bound, "passband_peak")
        return solve_aic_ast(bank, sets_aic, mask0, kind,
                             constraints=(mask1,), power=power)
    if name == "nullspace":
        return solve_nullspace_precoder(bank, sets_pre, notch, kind)
    if name == "weighted":
        if scn.weight_profile == "uniform":
            w = np.ones(sets_pre.n_active)
        elif scn.weight_profile == "edge_boost":
            w = edge_boost_weights(sets_pre)
        else:
            raise ConfigError(f"unknown weight profile {scn.weight_profile!r}")
        return solve_weighted_precoder(bank, sets_pre, notch, w, kind)
    if name == "orthogonal":
        return solve_orthogonal_precoder(bank, sets_pre, scn.coding_rate, kind,
                                         notch=notch)
    if name == "orthogonal_band":
        return solve_orthogonal_precoder(bank, sets_pre, scn.coding_rate, kind,
                                         mask=mask0)
    raise ConfigError(f"unknown method {name!r}")


_COMPLEXITY_METHOD = {
    "aic": "aic", "ast": "ast", "aic_ast": "aic_ast", "aic_ast_peak": "aic_ast",
    "nullspace": "precoding", "weighted": "precoding",
    "orthogonal": "precoding", "orthogonal_band": "precoding",
}


def _write(path: Path, text: str):
    path.write_text(text, newline="\n")


def _psd_files(outdir: Path, tag: str, curve: PsdCurve):
    _write(outdir / f"{tag}.csv", curve.to_csv_text())
    lines = ["freq_normalized,psd_linear"]
    for f, v in zip(curve.grid.points, curve.values):
        lines.append(f"{f:.12g},{v:.12g}")
    _write(outdir / f"{tag}_linear.csv", "\n".join(lines) + "\n")


def run_scenario(source, *, grid_density: Optional[int] = None,
                 output: Optional[str] = None, seed: Optional[int] = None,
                 methods: Optional[tuple] = None, welch: Optional[bool] = None,
                 stream=print) -> int:
    """Solve the scenario's methods under both pulse families and write all
    artifact files.  Returns 0, or 1 on configuration errors, or 2 when a
    masked-power constraint is infeasible."""
    try:
        scn = load_scenario(source)
    except (ConfigError, OSError) as exc:
        stream(f"config error: {exc}")
        return 1
    overrides = {}
    if grid_density is not None:
        overrides["grid_density"] = grid_density
    if output is not None:
        overrides["output"] = output
    if seed is not None:
        overrides["seed"] = seed
    if methods is not None:
        overrides["methods"] = tuple(methods)
    if welch is not None:
        overrides["welch"] = welch
    if overrides:
        scn = replace(scn, **overrides)

    diags = validate_scenario(scn)
    for d in diags:
        stream(d)
    if any(d.startswith("error") for d in diags):
        return 1

    cfg = SystemConfig.make(scn.n, scn.n_gi, scn.beta)
    grid = FrequencyGrid.uniform(cfg.n, scn.grid_density)
    mask0 = band_mask(cfg.n, scn.notch_carriers, grid, name="notched_band")
    passband_mask = band_mask(cfg.n, passband_ranges(scn), grid, name="passband")
    notch = NotchSet.make(scn.notch_freqs) if scn.notch_freqs else NotchSet.make([])
    power = PowerAllocation.uniform()
    bank = PulseBank(cfg)
    sets_aic = aic_carrier_sets(scn, cfg)
    sets_pre = precoder_carrier_sets(scn, cfg)
    rng = np.random.default_rng(scn.seed)

    outdir = Path(scn.output)
    outdir.mkdir(parents=True, exist_ok=True)

    runs = [_MethodRun("baseline")]
    runs += [_MethodRun(m) for m in scn.methods]
    try:
        for run in runs:
            for kind in PulseKind:
                if run.name == "baseline":
                    sol = baseline_solution(bank, sets_aic, kind)
                else:
                    sol = _solve_method(run.name, scn, bank, kind, sets_aic,
                                        sets_pre, mask0, notch, passband_mask, power)
                run.solutions[kind] = sol
                run.psd[kind] = analytic_psd(sol, power, grid)
                _psd_files(outdir, f"{run.name}_{kind.value}", run.psd[kind])
            run.psd_diff = peak_relative_diff(run.psd[PulseKind.CONVENTIONAL],
                                              run.psd[PulseKind.HERMITIAN])
            run.complexity_method = _COMPLEXITY_METHOD.get(run.name, "baseline")
            stream(f"{run.name}: max PSD difference between pulse families "
                   f"= {run.psd_diff:.3e} (peak-relative)")
    except InfeasibleConstraintError as exc:
        stream(f"infeasible: {exc}")
        return 2
    except ConfigError as exc:
        stream(f"config error: {exc}")
        return 1

    # pulse-family PSD difference per grid point
    diff_lines = ["freq_normalized," + ",".join(r.name for r in runs)]
    diffs = []
    for run in runs:
        a, b = run.psd[PulseKind.CONVENTIONAL], run.psd[PulseKind.HERMITIAN]
        scale = max(a.peak, b.peak) or 1.0
        diffs.append(np.abs(a.values - b.values) / scale)
    for i, f in enumerate(grid.points):
        diff_lines.append(f"{f:.12g}," + ",".join(f"{d[i]:.6g}" for d in diffs))
    _write(outdir / "psd_diff.csv", "\n".join(diff_lines) + "\n")

    # realness certificates
    cert_lines = ["method,pulse_kind,certificate,is_real"]
    for run in runs:
        for kind in PulseKind:
            c = run.solutions[kind].realness
            cert_lines.append(f"{run.name},{kind.value},{c.value:.6g},{int(c.is_real)}")
    _write(outdir / "realness.csv", "\n".join(cert_lines) + "\n")

    # complexity: closed-form and instrumented counts per symbol
    comp_lines = [COMPLEXITY_CSV_HEADER]
    mismatches = []
    for run in runs:
        cm = run.complexity_method
        sets_used = run.solutions[PulseKind.HERMITIAN].sets
        dims = run.solutions[PulseKind.HERMITIAN].data_dim
        rep = symbolic_count(cm, cfg, sets_used, data_dims=dims)
        meas = {}
        for kind in PulseKind:
            d = rng.standard_normal(dims) + 1j * rng.standard_normal(dims)
            meas[kind] = measured_count(cm, run.solutions[kind], d)
        rep = replace(rep, measured_conventional=meas[PulseKind.CONVENTIONAL],
                      measured_hermitian=meas[PulseKind.HERMITIAN])
        if rep.measured_conventional != rep.symbolic_conventional or \
                rep.measured_hermitian != rep.symbolic_hermitian:
            mismatches.append(run.name)
        comp_lines.extend(rep.csv_rows())
    _write(outdir / "complexity.csv", "\n".join(comp_lines) + "\n")

    if scn.welch:
        base = runs[0].solutions[PulseKind.HERMITIAN]
        sym = random_symbols(base.data_dim, scn.welch_symbols, "qpsk", scn.seed)
        wave = synthesize(base, sym)
        est = welch_psd(wave.samples, segment=4 * cfg.pulse_len, grid=grid)
        _psd_files(outdir, "baseline_hermitian_welch", est)

    # summary and scenario assertions
    lines = [f"scenario: {scn.name}",
             f"system: n={cfg.n} n_gi={cfg.n_gi} beta={cfg.beta} "
             f"pulse_len={cfg.pulse_len} eta={cfg.eta}",
             f"grid: {scn.grid_density} points per carrier "
             f"({len(grid)} total)",
             f"carriers: data={sets_aic.n_data} cancellation={sets_aic.n_cancel} "
             f"precoder_active={sets_pre.n_active} "
             f"orthogonal_dims={Fraction(scn.coding_rate) * sets_pre.n_active}",
             f"seed: {scn.seed}", ""]
    ok = True
    for run in runs:
        passed = run.psd_diff <= scn.psd_equality_tol
        ok &= passed
        lines.append(f"psd_equality {run.name}: {run.psd_diff:.3e} "
                     f"<= {scn.psd_equality_tol:g} {'PASS' if passed else 'FAIL'}")
    by_name = {r.name: r for r in runs}
    if "nullspace" in by_name and "orthogonal" in by_name:
        d = peak_relative_diff(by_name["nullspace"].psd[PulseKind.HERMITIAN],
                               by_name["orthogonal"].psd[PulseKind.HERMITIAN])
        passed = d <= MATCHED_RATE_PSD_TOL
        ok &= passed
        lines.append(f"matched_rate_psd nullspace~orthogonal: {d:.3e} "
                     f"<= {MATCHED_RATE_PSD_TOL:g} {'PASS' if passed else 'FAIL'}")
    for run in runs:
        for kind in PulseKind:
            c = run.solutions[kind].realness
            lines.append(f"realness {run.name} {kind.value}: {c.value:.3e}")
    if mismatches:
        ok = False
        lines.append("complexity mismatch (measured != symbolic): " + ",".join(mismatches))
    else:
        lines.append("complexity: measured == symbolic for all methods")
    lines.append(f"result: {'PASS' if ok else 'FAIL'}")
    _write(outdir / "summary.txt", "\n".join(lines) + "\n")
    stream(f"wrote artifacts to {outdir}")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ofdmshape",
        description="OFDM spectral shaping under conventional and symmetric pulses",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario file or builtin (fig1, toy)")
    p_run.add_argument("scenario")
    p_run.add_argument("--grid-density", type=int, default=None)
    p_run.add_argument("--output", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--methods", default=None,
                       help="comma list; 'all' for every registered method")
    p_run.add_argument("--welch", action="store_true", default=None,
                       help="add an averaged-periodogram cross-check of the baseline")
    p_val = sub.add_parser("validate", help="report diagnostics without running")
    p_val.add_argument("scenario")
    args = parser.parse_args(argv)

    if args.command == "validate":
        try:
            diags = validate_config(args.scenario)
        except (ConfigError, OSError) as exc:
            print(f"config error: {exc}")
            return 1
        for d in diags:
            print(d)
        if not diags:
            print("ok: no diagnostics")
        return 1 if any(d.startswith("error") for d in diags) else 0

    methods = None
    if args.methods is not None:
        methods = KNOWN_METHODS if args.methods.strip() == "all" \
            else tuple(m.strip() for m in args.methods.split(",") if m.strip())
    return run_scenario(
        args.scenario, grid_density=args.grid_density, output=args.output,
        seed=args.seed, methods=methods, welch=args.welch,
    )


if __name__ == "__main__":
    sys.exit(main())
