"""Real-product accounting of the per-symbol shaping overhead.

Counting convention: a product of two complex values costs 4 real products,
2 when one operand is real, 1 when both are.  Multiplying one complex value
by a conjugate pair in two operations shares the partial products and costs
4 in total.  Only the shaping overhead is counted; the IDFT is common to all
methods and excluded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import CarrierSets, PulseKind, SystemConfig
from .exceptions import ConfigError

METHODS = ("baseline", "aic", "precoding", "ast", "ast_harmonic", "aic_ast")


class ProductCounter:
    """Arithmetic wrapper that executes products and tallies their real cost."""

    def __init__(self):
        self.count = 0

    @staticmethod
    def _is_real(x) -> bool:
        return not np.iscomplexobj(x)

    def mul(self, x, y):
        x, y = np.asarray(x), np.asarray(y)
        out = x * y
        per = 1 if (self._is_real(x) and self._is_real(y)) else \
            2 if (self._is_real(x) or self._is_real(y)) else 4
        self.count += per * out.size
        return out

    def mul_conj_pair(self, x, pair):
        """x * pair and x * conj(pair) together; shared partial products."""
        x, pair = np.asarray(x), np.asarray(pair)
        a = x * pair
        b = x * np.conj(pair)
        if self._is_real(x) and self._is_real(pair):
            per = 1
        elif self._is_real(x) or self._is_real(pair):
            per = 2
        else:
            per = 4
        self.count += per * a.size
        return a, b

    def charge(self, n: int):
        """Model charge for a block operation (e.g. a shared FFT)."""
        self.count += int(n)


def harmonic_fft_products(beta: int) -> int:
    """Shared-FFT term of the harmonic transition design: 2*beta*log2(m)
    with m the smallest power of two >= beta."""
    if beta <= 1:
        return 0
    m = 1 << (beta - 1).bit_length()
    return 2 * beta * int(np.log2(m))


@dataclass(frozen=True)
class ComplexityReport:
    """Closed-form and instrumented real-product counts per OFDM symbol."""

    method: str
    symbolic_conventional: int
    symbolic_hermitian: int
    measured_conventional: Optional[int] = None
    measured_hermitian: Optional[int] = None

    @property
    def reduction(self) -> float:
        if self.symbolic_conventional == 0:
            return 0.0
        return 1.0 - self.symbolic_hermitian / self.symbolic_conventional

    def csv_rows(self) -> list:
        pct = f"{100.0 * self.reduction:.6g}"
        rows = []
        for kind, sym, meas in (
            ("conventional", self.symbolic_conventional, self.measured_conventional),
            ("hermitian", self.symbolic_hermitian, self.measured_hermitian),
        ):
            m = "" if meas is None else str(meas)
            rows.append(f"{self.method},{kind},{sym},{m},{pct}")
        return rows


COMPLEXITY_CSV_HEADER = "method,pulse_kind,symbolic,measured,reduction_pct"


def symbolic_count(method: str, cfg: SystemConfig, sets: CarrierSets,
                   harmonics: Optional[int] = None,
                   data_dims: Optional[int] = None) -> ComplexityReport:
    """Closed-form extra real products per symbol for both pulse families."""
    nd = sets.n_data if data_dims is None else int(data_dims)
    nc = sets.n_cancel
    beta = cfg.beta
    if method == "baseline":
        conv = herm = 0
    elif method == "aic":
        conv, herm = 4 * nd * nc, 2 * nd * nc
    elif method == "precoding":
        nk = sets.n_active
        conv, herm = 4 * nk * nd, 2 * nk * nd
    elif method == "ast":
        conv, herm = 8 * beta * nd, 4 * beta * nd
    elif method == "ast_harmonic":
        if harmonics is None or harmonics < 1:
            raise ConfigError("harmonic transition count requires harmonics >= 1")
        t = harmonic_fft_products(beta)
        conv, herm = 8 * nd * harmonics + t, 4 * nd * harmonics + t
    elif method == "aic_ast":
        conv = 4 * nd * nc + 8 * beta * nd
        herm = 2 * nd * nc + 4 * beta * nd
    else:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    return ComplexityReport(method, conv, herm)


def _real_coefficients(solution) -> bool:
    return (solution.pulse_kind is PulseKind.HERMITIAN
            and solution.realness.is_real)


def _aic_products(counter: ProductCounter, table: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Cancellation-carrier bin values sum_k g[i,k] d_k."""
    return counter.mul(table, d[None, :]).sum(axis=1)


def _precode_products(counter: ProductCounter, g: np.ndarray, d: np.ndarray) -> np.ndarray:
    return counter.mul(g, d[None, :]).sum(axis=1)


def _ast_products(counter: ProductCounter, transitions: np.ndarray, d: np.ndarray,
                  symmetric: bool) -> np.ndarray:
    """Per-carrier transition contributions t_k * d_k on the 2*beta support."""
    if not symmetric:
        return counter.mul(transitions, d[:, None])
    beta = transitions.shape[1] // 2
    pos = transitions[:, beta:]
    hi, lo_rev = counter.mul_conj_pair(d[:, None], pos)
    return np.concatenate([lo_rev[:, ::-1], hi], axis=1)


def _harmonic_products(counter: ProductCounter, beta: int, harmonics: int,
                       n_data: int, real_coeffs: bool) -> np.ndarray:
    # Counting depends only on operand realness and shapes; representative
    # unit coefficients stand in for a harmonic transition design.
    dtype = float if real_coeffs else complex
    coeffs = np.ones((2 * harmonics, n_data), dtype=dtype)
    d = np.full(n_data, 1.0 + 1.0j)
    weighted = counter.mul(coeffs, d[None, :])
    counter.charge(harmonic_fft_products(beta))
    m = max(1 << (beta - 1).bit_length(), 1) if beta > 1 else 1
    return np.fft.ifft(weighted, n=m, axis=0)


def measured_count(method: str, solution, data_symbol: np.ndarray,
                   harmonics: Optional[int] = None) -> int:
    """Run the method's per-symbol hot path through counting arithmetic."""
    counter = ProductCounter()
    d = np.asarray(data_symbol, dtype=complex)
    real = _real_coefficients(solution)
    if method == "baseline":
        pass
    elif method == "aic":
        _aic_products(counter, solution.aic, d)
    elif method == "precoding":
        _precode_products(counter, solution.G, d)
    elif method == "ast":
        _ast_products(counter, solution.transitions, d, real)
    elif method == "aic_ast":
        _aic_products(counter, solution.aic, d)
        _ast_products(counter, solution.transitions, d, real)
    elif method == "ast_harmonic":
        if harmonics is None or harmonics < 1:
            raise ConfigError("harmonic transition count requires harmonics >= 1")
        _harmonic_products(counter, solution.bank.cfg.beta, harmonics, len(d), real)
    else:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    return counter.count
