"""Frequency grids, spectral masks, analytic and estimated power spectra.

The analytic PSD of a (possibly shaped) multicarrier signal with independent
white symbols is S(f) = (1/N_s) * sum_k sigma_k^2 |H_k(f)|^2 where H_k is the
transform of the composite pulse of data carrier k.  Everything here works on
normalized frequency in [-1/2, 1/2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal as sp_signal

from .core import PowerAllocation, PulseBank, PulseKind, TWO_PI
from .exceptions import ConfigError, GridMismatchError


@dataclass(frozen=True)
class FrequencyGrid:
    """Sorted normalized frequencies; uniform grids know their density."""

    points: np.ndarray
    per_carrier: int = 0  # points per subcarrier spacing (0 for custom grids)
    n: int = 0            # IDFT size the density refers to

    def __post_init__(self):
        self.points.flags.writeable = False
        p = self.points
        if len(p) == 0:
            raise ConfigError("empty frequency grid")
        if np.any(np.diff(p) <= 0):
            raise ConfigError("grid points must be strictly increasing")
        if p[0] < -0.5 or p[-1] >= 0.5:
            raise ConfigError("grid points must lie in [-1/2, 1/2)")

    @classmethod
    def uniform(cls, n: int, per_carrier: int = 10) -> "FrequencyGrid":
        m = n * per_carrier
        pts = (np.arange(m) - m // 2) / m
        return cls(pts, per_carrier, n)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def is_uniform(self) -> bool:
        return self.per_carrier > 0

    @property
    def spacing(self) -> float:
        if not self.is_uniform:
            raise ConfigError("custom grid has no single spacing")
        return 1.0 / len(self.points)

    def same_as(self, other: "FrequencyGrid") -> bool:
        return len(self) == len(other) and np.array_equal(self.points, other.points)


@dataclass(frozen=True)
class SpectralMask:
    """Weight function on a grid, optionally with a power bound."""

    grid: FrequencyGrid
    weight: np.ndarray
    bound: Optional[float] = None
    name: str = "mask"

    def __post_init__(self):
        self.weight.flags.writeable = False
        if len(self.weight) != len(self.grid):
            raise GridMismatchError("mask weight length does not match grid")
        if np.any(self.weight < 0) or np.any(self.weight > 1):
            raise ConfigError("mask weights must lie in [0, 1]")


def band_mask(n: int, carrier_ranges, grid: FrequencyGrid, bound=None, name="mask") -> SpectralMask:
    """Binary mask covering the listed half-open carrier-index ranges.

    A grid point f belongs to carrier k when floor(N*f mod N) == k, i.e. each
    carrier owns the frequency interval [k/N, (k+1)/N) wrapped into the grid.
    """
    for lo, hi in carrier_ranges:
        if not (0 <= lo < hi <= n):
            raise ConfigError(f"carrier range [{lo}, {hi}) out of [0, {n}]")
    kappa = np.floor((grid.points * n) % n).astype(int)
    # guard against values rounding to n at the wrap point
    kappa = np.clip(kappa, 0, n - 1)
    member = np.zeros(len(grid), dtype=bool)
    for lo, hi in carrier_ranges:
        member |= (kappa >= lo) & (kappa < hi)
    return SpectralMask(grid, member.astype(float), bound, name)


@dataclass(frozen=True)
class PsdCurve:
    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        self.values.flags.writeable = False
        if len(self.values) != len(self.grid):
            raise GridMismatchError("PSD length does not match grid")
        if np.any(self.values < 0):
            raise ConfigError("PSD values must be nonnegative")

    @property
    def peak(self) -> float:
        return float(np.max(self.values))

    def db(self, floor: float = 1e-300) -> np.ndarray:
        """Peak-normalized decibel values."""
        ref = max(self.peak, floor)
        return 10.0 * np.log10(np.maximum(self.values, floor * ref) / ref)

    def to_csv_text(self) -> str:
        """Documented serialization: freq_normalized,psd_db rows, LF endings."""
        db = self.db()
        lines = ["freq_normalized,psd_db"]
        for f, v in zip(self.grid.points, db):
            lines.append(f"{f:.12g},{v:.12g}")
        return "\n".join(lines) + "\n"


def peak_relative_diff(a: PsdCurve, b: PsdCurve) -> float:
    """Max pointwise |a - b| normalized by the larger curve peak.

    Pointwise ratios are meaningless at exact spectral nulls, so "relative"
    is taken against the curve scale.
    """
    if not a.grid.same_as(b.grid):
        raise GridMismatchError("PSD curves evaluated on different grids")
    scale = max(a.peak, b.peak)
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(a.values - b.values)) / scale)


def masked_power(psd: PsdCurve, mask: SpectralMask) -> float:
    """Riemann approximation of the mask-weighted PSD integral."""
    if not psd.grid.same_as(mask.grid):
        raise GridMismatchError("PSD and mask grids differ")
    return float(np.sum(mask.weight * psd.values) * psd.grid.spacing)


# ---------------------------------------------------------------------------
# fast per-carrier spectra on uniform grids


class GridTable:
    """Carrier pulse spectra on a uniform grid as shifts of one transform.

    P_k on the grid equals the window transform shifted by k grid-bins-per-
    carrier positions (times a unit phase for the conventional pulse), so a
    single padded FFT of the window serves every carrier.
    """

    def __init__(self, bank: PulseBank, kind: PulseKind, grid: FrequencyGrid):
        cfg = bank.cfg
        if not grid.is_uniform or grid.n != cfg.n:
            raise ConfigError("GridTable requires a uniform grid over the IDFT size")
        self.cfg = cfg
        self.kind = kind
        self.grid = grid
        self.q = grid.per_carrier
        m = len(grid)
        w = bank.window.samples
        if kind is PulseKind.HERMITIAN:
            eta = cfg.eta
            c = np.zeros(m)
            c[: eta + 1] = w[eta:]
            c[m - eta:] = w[:eta]
            self.table = np.fft.fftshift(np.fft.fft(c).real)
            self._phase = None
        else:
            self.table = np.fft.fftshift(np.fft.fft(w, m))
            self._phase = np.exp(-1j * TWO_PI * cfg.n_gi / cfg.n)

    def row(self, k: int) -> np.ndarray:
        r = np.roll(self.table, k * self.q)
        if self._phase is not None:
            r = r * self._phase ** k
        return r

    def rows(self, carriers) -> np.ndarray:
        return np.stack([self.row(k) for k in carriers])

    def abs2_sum(self, carriers, weights) -> np.ndarray:
        """sum_i weights[i] * |P_{carriers[i]}|^2 without materializing rows."""
        base = np.abs(self.table) ** 2
        out = np.zeros(len(self.grid))
        for k, wt in zip(carriers, weights):
            out += wt * np.roll(base, k * self.q)
        return out


def transition_dtft_rows(t_block: np.ndarray, support: np.ndarray, time_offset: int,
                         grid: FrequencyGrid) -> np.ndarray:
    """Transforms of transition sequences on a uniform grid (batched FFT).

    t_block has one row per carrier holding samples at the stored `support`
    indices; `time_offset` is the stored-index-to-time shift of the pulse.
    """
    m = len(grid)
    padded = np.zeros((t_block.shape[0], m), dtype=complex)
    padded[:, (support + time_offset) % m] = t_block
    return np.fft.fftshift(np.fft.fft(padded, axis=1), axes=1)


def _psd_per_carrier(solution, power: PowerAllocation, grid: FrequencyGrid,
                     chunk: int = 128) -> np.ndarray:
    """Accumulate sum sigma_k^2 |H_k|^2 for per-carrier composite pulses."""
    sets = solution.sets
    table = GridTable(solution.bank, solution.pulse_kind, grid)
    data = list(sets.data)
    sig = power.vector(data)
    cc_rows = table.rows(sets.cancel) if solution.aic is not None else None
    t0 = solution.bank.pulse(solution.pulse_kind, data[0]).time_offset
    support = solution.transition_support() if solution.transitions is not None else None
    acc = np.zeros(len(grid))
    for lo in range(0, len(data), chunk):
        hi = min(lo + chunk, len(data))
        rows = table.rows(data[lo:hi]).astype(complex)
        if cc_rows is not None and sets.n_cancel:
            rows += solution.aic[:, lo:hi].T @ cc_rows
        if support is not None:
            rows += transition_dtft_rows(solution.transitions[lo:hi], support, t0, grid)
        acc += sig[lo:hi] @ (np.abs(rows) ** 2)
    return acc


def _psd_precoder(solution, power: PowerAllocation, grid: FrequencyGrid,
                  chunk: int = 512) -> np.ndarray:
    table = GridTable(solution.bank, solution.pulse_kind, grid)
    active = list(solution.sets.active)
    aux = solution.aux
    if aux is not None and aux[0] == "complement":
        # orthonormal columns: |h G|^2 = |h|^2 - |h V0|^2 with V0 the dropped part
        v0 = aux[1]
        sigma = power.get(-1)
        acc = table.abs2_sum(active, np.ones(len(active)))
        for lo in range(0, len(grid), 4096):
            hi = min(lo + 4096, len(grid))
            h = np.stack([table.row(k)[lo:hi] for k in active], axis=1)
            acc[lo:hi] -= np.sum(np.abs(h @ v0) ** 2, axis=1)
        return sigma * np.maximum(acc, 0.0)
    sig = power.vector(active) if solution.data_dim == len(active) else \
        np.full(solution.data_dim, power.get(-1))
    acc = np.zeros(len(grid))
    for lo in range(0, len(grid), chunk):
        hi = min(lo + chunk, len(grid))
        h = np.stack([table.row(k)[lo:hi] for k in active], axis=1)
        if aux is not None and aux[0] == "lowrank_identity":
            ah, r = aux[1], aux[2]
            rows = h - (h @ ah) @ r
        else:
            rows = h @ solution.G
        acc[lo:hi] = (np.abs(rows) ** 2) @ sig
    return acc


def analytic_psd(solution, power: PowerAllocation, grid: FrequencyGrid) -> PsdCurve:
    """Analytic PSD of the solution's shaped signal on `grid`."""
    sets = solution.sets
    if sets.n_data == 0:
        raise ConfigError("no data carriers")
    if solution.kind == "precoder":
        acc = _psd_precoder(solution, power, grid)
    else:
        acc = _psd_per_carrier(solution, power, grid)
    return PsdCurve(grid, np.maximum(acc, 0.0) / solution.bank.cfg.n_s)


def analytic_psd_dense(solution, power: PowerAllocation, grid: FrequencyGrid) -> PsdCurve:
    """Literal evaluation from composed time-domain pulses (oracle path)."""
    from .core import spectrum_at  # local import to keep module load light

    h = solution.composed_pulses()
    t0 = solution.bank.pulse(solution.pulse_kind, 0).time_offset
    n = np.arange(h.shape[0]) + t0
    basis = np.exp(-1j * TWO_PI * np.outer(grid.points, n))
    spectra = basis @ h
    if solution.data_dim == solution.sets.n_data:
        sig = power.vector(solution.sets.data)
    else:
        sig = np.full(solution.data_dim, power.get(-1))
    acc = (np.abs(spectra) ** 2) @ sig
    return PsdCurve(grid, acc / solution.bank.cfg.n_s)


def welch_psd(samples: np.ndarray, segment: int, overlap: float = 0.5,
              window: str = "hann", grid: Optional[FrequencyGrid] = None) -> PsdCurve:
    """Averaged-periodogram estimate resampled onto `grid`."""
    x = np.asarray(samples)
    if len(x) < 2 * segment:
        raise ConfigError(f"signal length {len(x)} < 2 * segment {segment}")
    if grid is None:
        raise ConfigError("welch_psd needs a target grid")
    freqs, pxx = sp_signal.welch(
        x, fs=1.0, window=window, nperseg=segment,
        noverlap=int(round(overlap * segment)), detrend=False,
        return_onesided=False, scaling="density",
    )
    order = np.argsort(freqs)
    fs_sorted = freqs[order]
    p_sorted = pxx[order]
    vals = np.interp(grid.points, fs_sorted, p_sorted, period=1.0)
    return PsdCurve(grid, np.maximum(vals, 0.0))
