"""System parameters, carrier sets, transmit windows and base pulses.

Two pulse families are supported: the conventional OFDM pulse, whose phase
origin sits at the first sample after the guard interval, and a symmetric
variant whose phase origin is the central sample of the pulse.  The symmetric
pulse is conjugate-even in time, so its Fourier transform is real valued.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Union

import numpy as np

from .exceptions import ConfigError

TWO_PI = 2.0 * np.pi
TWO_PI_EXT = np.longdouble("6.283185307179586476925286766559005768")


class WindowShape(enum.Enum):
    RECTANGULAR = "rectangular"
    RAISED_COSINE = "raised_cosine"


class PulseKind(enum.Enum):
    CONVENTIONAL = "conventional"
    HERMITIAN = "hermitian"


@dataclass(frozen=True)
class SystemConfig:
    """Scalar system parameters.

    n       : IDFT size
    n_gi    : guard-interval length in samples
    beta    : window transition length in samples
    note    : set when the constructor adjusted a field (e.g. beta extended
              by one sample to make the pulse length odd)
    """

    n: int
    n_gi: int
    beta: int
    note: str = ""

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.n_gi < 0 or self.beta < 0:
            raise ConfigError("n_gi and beta must be nonnegative")
        if self.beta >= self.pulse_len / 2:
            raise ConfigError(
                f"beta={self.beta} leaves no flat top (pulse length {self.pulse_len})"
            )

    @property
    def n_s(self) -> int:
        """Symbol period (IDFT size plus guard interval)."""
        return self.n + self.n_gi

    @property
    def pulse_len(self) -> int:
        return self.n_s + self.beta

    @property
    def eta(self) -> int:
        """Center offset of the symmetric pulse; integer only for odd lengths."""
        if self.pulse_len % 2 == 0:
            raise ConfigError(
                f"pulse length {self.pulse_len} is even; center sample undefined"
            )
        return (self.pulse_len - 1) // 2

    @property
    def odd_length(self) -> bool:
        return self.pulse_len % 2 == 1

    @classmethod
    def make(cls, n: int, n_gi: int, beta: int, extend_to_odd: bool = True) -> "SystemConfig":
        """Build a config, extending beta by one sample when the pulse length
        would be even (required by the symmetric-pulse path)."""
        length = n + n_gi + beta
        if extend_to_odd and length % 2 == 0:
            return cls(n, n_gi, beta + 1, note=f"beta extended {beta} -> {beta + 1} for odd pulse length")
        return cls(n, n_gi, beta)


def _as_sorted_indices(values: Iterable[int], n: int, label: str) -> tuple:
    idx = tuple(sorted(int(v) for v in values))
    if len(set(idx)) != len(idx):
        raise ConfigError(f"duplicate {label} carrier index")
    if idx and (idx[0] < 0 or idx[-1] >= n):
        raise ConfigError(f"{label} carrier index out of [0, {n})")
    return idx


@dataclass(frozen=True)
class CarrierSets:
    """Data carriers, redundant (cancellation) carriers and their union."""

    data: tuple
    cancel: tuple

    @classmethod
    def make(cls, n: int, data: Iterable[int], cancel: Iterable[int] = ()) -> "CarrierSets":
        d = _as_sorted_indices(data, n, "data")
        c = _as_sorted_indices(cancel, n, "cancellation")
        overlap = set(d) & set(c)
        if overlap:
            raise ConfigError(f"carrier {min(overlap)} is both data and cancellation")
        return cls(d, c)

    @property
    def active(self) -> tuple:
        return tuple(sorted(self.data + self.cancel))

    @property
    def n_data(self) -> int:
        return len(self.data)

    @property
    def n_cancel(self) -> int:
        return len(self.cancel)

    @property
    def n_active(self) -> int:
        return len(self.data) + len(self.cancel)


@dataclass(frozen=True)
class PowerAllocation:
    """Per-carrier symbol variance; defaults to unit power everywhere."""

    sigma2: dict = field(default_factory=dict)

    @classmethod
    def uniform(cls, value: float = 1.0) -> "PowerAllocation":
        if value <= 0:
            raise ConfigError("power must be positive")
        return cls({-1: float(value)})

    def get(self, k: int) -> float:
        if k in self.sigma2:
            return self.sigma2[k]
        return self.sigma2.get(-1, 1.0)

    def vector(self, carriers: Iterable[int]) -> np.ndarray:
        out = np.array([self.get(k) for k in carriers], dtype=float)
        if np.any(out <= 0):
            raise ConfigError("power must be positive for every carrier")
        return out


@dataclass(frozen=True)
class Window:
    """Real transmit window, flat in the middle with beta-sample transitions."""

    samples: np.ndarray
    beta: int
    shape: WindowShape

    def __post_init__(self):
        self.samples.flags.writeable = False


def make_window(cfg: SystemConfig, shape: WindowShape) -> Window:
    """Build the transmit window for `cfg`.

    The raised-cosine transition uses w(n) = (1 - cos(pi*(n+1)/(beta+1)))/2
    on the leading edge, mirrored at the tail, so no sample is exactly zero
    and w(n) == w(L-1-n) holds exactly.
    """
    llen = cfg.pulse_len
    if shape is WindowShape.RECTANGULAR:
        if cfg.beta != 0:
            raise ConfigError("rectangular window requires beta = 0")
        return Window(np.ones(llen), 0, shape)
    if shape is not WindowShape.RAISED_COSINE:
        raise ConfigError(f"unknown window shape {shape!r}")
    beta = cfg.beta
    w = np.ones(llen)
    if beta:
        ramp = 0.5 * (1.0 - np.cos(np.pi * (np.arange(beta) + 1) / (beta + 1)))
        w[:beta] = ramp
        w[llen - beta:] = ramp[::-1]
    return Window(w, beta, shape)


@dataclass(frozen=True)
class Pulse:
    """Complex base pulse of one carrier.

    `time_offset` records the time index of samples[0]: 0 for the
    conventional pulse, -eta for the symmetric one (sample eta is time 0).
    """

    k: int
    kind: PulseKind
    samples: np.ndarray
    time_offset: int

    def __post_init__(self):
        self.samples.flags.writeable = False


def conventional_pulse(cfg: SystemConfig, window: Window, k: int) -> Pulse:
    """p_k(n) = w(n) * exp(j*2*pi*k*(n - n_gi)/n), n in [0, L)."""
    if not 0 <= k < cfg.n:
        raise IndexError(f"carrier {k} out of [0, {cfg.n})")
    n = np.arange(cfg.pulse_len)
    phase = TWO_PI * k * (n - cfg.n_gi) / cfg.n
    return Pulse(k, PulseKind.CONVENTIONAL, window.samples * np.exp(1j * phase), 0)


def hermitian_pulse(cfg: SystemConfig, window: Window, k: int) -> Pulse:
    """Centered pulse w(n + eta) * exp(j*2*pi*k*n/n) over n in [-eta, eta].

    Stored over m = n + eta; conjugate-even: samples[m] == conj(samples[L-1-m]).
    """
    if not cfg.odd_length:
        raise ConfigError(
            f"pulse length {cfg.pulse_len} is even; extend beta by one sample"
        )
    if not 0 <= k < cfg.n:
        raise IndexError(f"carrier {k} out of [0, {cfg.n})")
    m = np.arange(cfg.pulse_len)
    phase = TWO_PI * k * (m - cfg.eta) / cfg.n
    return Pulse(k, PulseKind.HERMITIAN, window.samples * np.exp(1j * phase), -cfg.eta)


def wrap_frequency(f):
    """Wrap normalized frequency into [-1/2, 1/2)."""
    return (np.asarray(f, dtype=float) + 0.5) % 1.0 - 0.5


def spectrum_at(pulse: Pulse, f) -> Union[complex, np.ndarray]:
    """Discrete-time Fourier transform of the pulse at normalized frequency f.

    The stored time offset is folded in, so symmetric pulses evaluate through
    a cosine/sine sum and come out exactly real.  Accepts scalars or arrays.
    """
    scalar = np.isscalar(f)
    fw = np.atleast_1d(wrap_frequency(f))
    v = pulse.samples
    if pulse.kind is PulseKind.HERMITIAN:
        eta = -pulse.time_offset
        pos = v[eta + 1:]
        m = np.arange(1, eta + 1)
        ang = TWO_PI * np.outer(fw, m)
        out = v[eta].real + 2.0 * (np.cos(ang) @ pos.real + np.sin(ang) @ pos.imag)
        out = out.astype(complex)
    else:
        n = np.arange(len(v)) + pulse.time_offset
        out = np.exp(-1j * TWO_PI * np.outer(fw, n)) @ v
    return complex(out[0]) if scalar else out


class PulseBank:
    """Lazy per-(kind, carrier) pulse cache plus batch spectrum evaluation."""

    def __init__(self, cfg: SystemConfig, shape: WindowShape = WindowShape.RAISED_COSINE):
        self.cfg = cfg
        self.window = make_window(cfg, shape)
        self._cache: dict = {}

    def pulse(self, kind: PulseKind, k: int) -> Pulse:
        key = (kind, k)
        if key not in self._cache:
            if kind is PulseKind.HERMITIAN:
                self._cache[key] = hermitian_pulse(self.cfg, self.window, k)
            else:
                self._cache[key] = conventional_pulse(self.cfg, self.window, k)
        return self._cache[key]

    def spectra_at(self, kind: PulseKind, carriers, freqs,
                   precision: str = "double") -> np.ndarray:
        """Matrix A[m, i] = spectrum of carrier[i]'s pulse at freqs[m].

        Every carrier spectrum is a frequency shift of the window transform,
        so the evaluation factors into two small matrix products.  For the
        symmetric kind the computation stays in real arithmetic and the
        result dtype is float.  precision="extended" evaluates in x86 long
        double with exact mod-1 phase reduction; callers use it when the
        downstream solve amplifies rounding (tightly clustered frequencies).
        """
        if precision not in ("double", "extended"):
            raise ConfigError(f"unknown precision {precision!r}")
        ext = precision == "extended"
        rdt = np.longdouble if ext else np.float64
        two_pi = TWO_PI_EXT if ext else TWO_PI
        cfg = self.cfg
        fw = wrap_frequency(np.atleast_1d(freqs)).astype(rdt)
        ks = np.asarray(list(carriers), dtype=rdt)
        w = self.window.samples.astype(rdt)

        def angles(a, b):
            r = np.outer(a, b)
            return two_pi * (r - np.floor(r))

        if kind is PulseKind.HERMITIAN:
            eta = cfg.eta
            nn = np.arange(eta + 1, dtype=rdt)
            coef = np.empty(eta + 1, dtype=rdt)
            coef[0] = w[eta]
            coef[1:] = 2.0 * w[eta + 1:]
            af = angles(fw, nn)
            ak = angles(nn, ks / cfg.n)
            return (np.cos(af) * coef) @ np.cos(ak) + (np.sin(af) * coef) @ np.sin(ak)
        nn = np.arange(cfg.pulse_len, dtype=rdt)
        ef = np.exp(-1j * angles(fw, nn))
        ek = np.exp(1j * angles(nn, ks / cfg.n))
        out = (ef * w) @ ek
        col = ks * (rdt(cfg.n_gi) / cfg.n)
        out *= np.exp(-1j * two_pi * (col - np.floor(col)))[None, :]
        return out


@dataclass(frozen=True)
class PrecoderSpec:
    """Parameters of precoder construction.

    rate    : data dimensions over active dimensions (orthogonal precoders)
    weights : per-carrier positive distortion weights (weighted variant)
    ridge   : optional regularization added to least-squares solves
    """

    rate: Fraction = Fraction(1, 1)
    weights: Optional[np.ndarray] = None
    ridge: float = 0.0

    def __post_init__(self):
        if not (0 < self.rate <= 1):
            raise ConfigError(f"rate must be in (0, 1], got {self.rate}")
        if self.weights is not None and np.any(np.asarray(self.weights) <= 0):
            raise ConfigError("weights must be positive")
        if self.ridge < 0:
            raise ConfigError("ridge must be nonnegative")

    def data_dims(self, n_active: int) -> int:
        dims = self.rate * n_active
        if dims.denominator != 1:
            raise ConfigError(
                f"rate {self.rate} times {n_active} active carriers is not an integer"
            )
        return int(dims)
