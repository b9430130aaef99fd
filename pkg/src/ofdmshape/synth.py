"""Time-domain symbol synthesis, the circular-shift transmitter, loopback RX.

Consecutive symbols overlap by beta samples: the leading window taper of one
symbol overlays the trailing taper of the previous one.  The symmetric pulse
is realized on a standard IDFT+cyclic-prefix chain by circularly right
shifting the IDFT output by (N - N_GI + beta - 1)/2 samples before prefix
insertion; a receiver can undo the induced per-carrier rotation explicitly or
absorb it into the one-tap FEQ.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import CarrierSets, PulseKind, SystemConfig, TWO_PI
from .exceptions import ConfigError

CONSTELLATIONS = ("qpsk", "16qam", "unit-random")


@dataclass(frozen=True)
class SymbolStream:
    """Modulating symbols, one row per data stream, one column per symbol."""

    data: np.ndarray
    constellation: str = "qpsk"
    seed: Optional[int] = None

    def __post_init__(self):
        self.data.flags.writeable = False
        if self.data.ndim != 2:
            raise ConfigError("symbol matrix must be 2-D (streams x symbols)")

    @property
    def n_streams(self) -> int:
        return self.data.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.data.shape[1]


def random_symbols(n_streams: int, n_symbols: int, constellation: str = "qpsk",
                   seed: int = 0) -> SymbolStream:
    """Unit-power random symbols from a seeded generator (seed is recorded)."""
    rng = np.random.default_rng(seed)
    shape = (n_streams, n_symbols)
    if constellation == "qpsk":
        pts = (np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2.0))
        data = pts[rng.integers(0, 4, size=shape)]
    elif constellation == "16qam":
        levels = np.array([-3.0, -1.0, 1.0, 3.0]) / np.sqrt(10.0)
        data = levels[rng.integers(0, 4, size=shape)] + 1j * levels[rng.integers(0, 4, size=shape)]
    elif constellation == "unit-random":
        data = np.exp(1j * TWO_PI * rng.random(shape))
    else:
        raise ConfigError(f"unknown constellation {constellation!r}")
    return SymbolStream(data, constellation, seed)


@dataclass(frozen=True)
class Waveform:
    """Complex baseband stream; one sample per 1/N subcarrier normalization."""

    samples: np.ndarray
    cfg: SystemConfig
    pulse_kind: PulseKind
    n_symbols: int

    def __post_init__(self):
        self.samples.flags.writeable = False
        expect = self.n_symbols * self.cfg.n_s + self.cfg.beta
        if len(self.samples) != expect:
            raise ConfigError(f"waveform length {len(self.samples)} != {expect}")

    def to_csv_text(self) -> str:
        lines = ["re,im"]
        for z in self.samples:
            lines.append(f"{z.real:.17g},{z.imag:.17g}")
        return "\n".join(lines) + "\n"

    def to_raw_bytes(self) -> bytes:
        inter = np.empty(2 * len(self.samples))
        inter[0::2] = self.samples.real
        inter[1::2] = self.samples.imag
        return inter.astype("<f8").tobytes()


def _overlap_add(cfg: SystemConfig, symbols: np.ndarray, pulse_kind: PulseKind) -> Waveform:
    """Place length-L symbol blocks every N_s samples and sum the overlaps."""
    ln, n_s = cfg.pulse_len, cfg.n_s
    u_count = symbols.shape[1]
    out = np.zeros(u_count * n_s + cfg.beta, dtype=complex)
    for u in range(u_count):
        out[u * n_s: u * n_s + ln] += symbols[:, u]
    return Waveform(out, cfg, pulse_kind, u_count)


def synthesize(solution, stream: SymbolStream) -> Waveform:
    """Direct synthesis: every symbol is the composite-pulse matrix times the
    data vector, then beta-sample overlap-add."""
    if stream.n_streams != solution.data_dim:
        raise ConfigError(
            f"stream has {stream.n_streams} rows, solution expects {solution.data_dim}"
        )
    h = solution.composed_pulses()
    blocks = h @ stream.data
    return _overlap_add(solution.bank.cfg, blocks, solution.pulse_kind)


def circular_shift_amount(cfg: SystemConfig) -> int:
    """Right shift applied to the IDFT output to center the pulse phase origin."""
    num = cfg.n - cfg.n_gi + cfg.beta - 1
    if num % 2:
        raise ConfigError("shift undefined: pulse length must be odd")
    return num // 2


def synthesize_fast_hermitian(bank, sets: CarrierSets, g: Optional[np.ndarray],
                              stream: SymbolStream) -> Waveform:
    """IDFT transmitter for the symmetric pulse: precode, inverse DFT,
    circular right shift, cyclic prefix/suffix extension, window."""
    cfg = bank.cfg
    if not cfg.odd_length:
        raise ConfigError("fast path needs an odd pulse length")
    shift = circular_shift_amount(cfg)
    active = np.asarray(sets.active)
    w = bank.window.samples
    if g is not None:
        coeffs = g @ stream.data
    else:
        if stream.n_streams != sets.n_active:
            raise ConfigError("without a precoder the stream must cover the active set")
        coeffs = stream.data
    spec = np.zeros((cfg.n, stream.n_symbols), dtype=complex)
    spec[active, :] = coeffs
    core = cfg.n * np.fft.ifft(spec, axis=0)
    core = np.roll(core, shift, axis=0)
    blocks = np.concatenate([core[cfg.n - cfg.n_gi:, :], core, core[: cfg.beta, :]], axis=0)
    blocks *= w[:, None]
    return _overlap_add(cfg, blocks, PulseKind.HERMITIAN)


@dataclass(frozen=True)
class LoopbackResult:
    symbols: SymbolStream
    taps: Optional[np.ndarray]  # per-active-carrier channel estimate (feq mode)


def loopback_receive(cfg: SystemConfig, sets: CarrierSets, waveform: Waveform,
                     shift_compensation: str = "explicit",
                     pilot: Optional[np.ndarray] = None,
                     decoder: Optional[np.ndarray] = None) -> LoopbackResult:
    """Ideal-channel receiver: strip the guard interval, DFT, compensate the
    symmetric-pulse rotation either with an explicit circular shift or with
    FEQ taps estimated from the first (pilot) symbol.

    `pilot` holds the active-carrier reference values of symbol 0 (feq mode).
    `decoder` maps equalized active-carrier bins to output streams; by
    default the data-carrier bins are returned as-is.
    """
    if shift_compensation not in ("explicit", "feq"):
        raise ConfigError(f"unknown compensation mode {shift_compensation!r}")
    if cfg.beta > cfg.n_gi:
        raise ConfigError("transitions longer than the guard interval corrupt the core")
    n, n_s = cfg.n, cfg.n_s
    u_count = waveform.n_symbols
    active = np.asarray(sets.active)
    cores = np.stack(
        [waveform.samples[u * n_s + cfg.n_gi: u * n_s + cfg.n_gi + n] for u in range(u_count)],
        axis=1,
    )
    taps = None
    if shift_compensation == "explicit":
        if waveform.pulse_kind is PulseKind.HERMITIAN:
            cores = np.roll(cores, -circular_shift_amount(cfg), axis=0)
        bins = np.fft.fft(cores, axis=0)[active, :] / n
    else:
        bins = np.fft.fft(cores, axis=0)[active, :] / n
        if pilot is None:
            raise ConfigError("feq mode needs the active-carrier pilot of symbol 0")
        pilot = np.asarray(pilot, dtype=complex)
        if pilot.shape != (len(active),):
            raise ConfigError(f"pilot must have shape ({len(active)},)")
        # silent pilot bins carry no information; leave them unequalized
        taps = np.ones(len(active), dtype=complex)
        lit = np.abs(pilot) > 0
        taps[lit] = bins[lit, 0] / pilot[lit]
        bins = bins / taps[:, None]
    if decoder is not None:
        out = decoder @ bins
    else:
        pos = {k: i for i, k in enumerate(sets.active)}
        out = bins[[pos[k] for k in sets.data], :]
    return LoopbackResult(SymbolStream(out, "recovered", None), taps)
