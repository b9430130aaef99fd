"""Spectral-shaping solvers and their shared least-squares machinery.

All solvers minimize mask-weighted leakage energy of the composite per-carrier
pulses.  Under the symmetric pulse every quantity entering the normal
equations is real, so the solves run in real arithmetic with half the real
unknowns; under the conventional pulse the same solves are complex.  A
realness certificate is measured on every solution and, below threshold, the
stored coefficients are truncated to their real part so that transmitters can
use real-product fast paths.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import linalg as sp_linalg

from .core import (
    CarrierSets,
    PowerAllocation,
    PulseBank,
    PulseKind,
    TWO_PI,
)
from .exceptions import (
    ConfigError,
    IllConditionedError,
    InfeasibleConstraintError,
)
from .spectrum import (
    GridTable,
    SpectralMask,
    analytic_psd,
    masked_power,
)

REALNESS_THRESHOLD = 1e-9


@dataclass(frozen=True)
class NotchSet:
    """Frequencies where the precoded spectrum must vanish exactly."""

    freqs: np.ndarray

    def __post_init__(self):
        self.freqs.flags.writeable = False
        f = self.freqs
        if len(f) and (f.min() < -0.5 or f.max() >= 0.5):
            raise ConfigError("notch frequencies must lie in [-1/2, 1/2)")

    @classmethod
    def make(cls, freqs) -> "NotchSet":
        return cls(np.sort(np.asarray(freqs, dtype=float)))

    def __len__(self) -> int:
        return len(self.freqs)


@dataclass(frozen=True)
class RealnessCertificate:
    """Measured deviation of a solution from the real-coefficient class."""

    value: float
    is_real: bool


def _matrix_imag_ratio(x: np.ndarray) -> float:
    if x.size == 0 or not np.iscomplexobj(x):
        return 0.0
    scale = np.max(np.abs(x))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(x.imag)) / scale)


def _transition_defect(t: np.ndarray) -> float:
    """Deviation from conjugate-even symmetry about the pulse center.

    The stored support order is its own mirror image reversed, so the check
    is t == conj(t[::-1]) row-wise.
    """
    if t.size == 0:
        return 0.0
    scale = np.max(np.abs(t))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(t - np.conj(t[:, ::-1]))) / scale)


@dataclass(frozen=True)
class ShaperSolution:
    """Output of one shaping solver.

    kind       : baseline | aic | ast | aic_ast | precoder
    method     : reporting tag (e.g. nullspace, weighted, orthogonal)
    G          : active-by-stream precoder matrix (precoder kind)
    aic        : cancellation coefficients, one column per data carrier
    transitions: per-data-carrier edge corrections on the 2*beta support
    realness   : measured certificate; real-typed arrays when below threshold
    real_dof_per_carrier : real dimension of the per-carrier unknown vector
    aux        : private low-rank structure for fast PSD evaluation
    """

    kind: str
    method: str
    pulse_kind: PulseKind
    bank: PulseBank
    sets: CarrierSets
    realness: RealnessCertificate
    G: Optional[np.ndarray] = None
    aic: Optional[np.ndarray] = None
    transitions: Optional[np.ndarray] = None
    real_dof_per_carrier: int = 0
    aux: Optional[tuple] = None
    mu: float = 0.0  # active-constraint multiplier, 0 when unconstrained

    @property
    def data_dim(self) -> int:
        if self.G is not None:
            return self.G.shape[1]
        return self.sets.n_data

    def transition_support(self) -> np.ndarray:
        cfg = self.bank.cfg
        beta, ln = cfg.beta, cfg.pulse_len
        return np.concatenate([np.arange(beta), np.arange(ln - beta, ln)])

    def composed_pulses(self) -> np.ndarray:
        """Time-domain composite pulse matrix, one column per data stream."""
        cfg, sets = self.bank.cfg, self.sets
        if self.kind == "precoder":
            p_active = np.stack(
                [self.bank.pulse(self.pulse_kind, k).samples for k in sets.active], axis=1
            )
            return p_active @ self.G
        h = np.stack(
            [self.bank.pulse(self.pulse_kind, k).samples for k in sets.data], axis=1
        ).astype(complex)
        if self.aic is not None and sets.n_cancel:
            p_cc = np.stack(
                [self.bank.pulse(self.pulse_kind, c).samples for c in sets.cancel], axis=1
            )
            h += p_cc @ self.aic
        if self.transitions is not None and cfg.beta:
            h[self.transition_support(), :] += self.transitions.T
        return h


def baseline_solution(bank: PulseBank, sets: CarrierSets,
                      pulse_kind: PulseKind) -> ShaperSolution:
    return ShaperSolution(
        kind="baseline", method="baseline", pulse_kind=pulse_kind,
        bank=bank, sets=sets, realness=RealnessCertificate(0.0, True),
    )


def _certify(g_like, transitions) -> RealnessCertificate:
    value = 0.0
    if g_like is not None:
        value = max(value, _matrix_imag_ratio(np.asarray(g_like)))
    if transitions is not None:
        value = max(value, _transition_defect(np.asarray(transitions)))
    return RealnessCertificate(value, value <= REALNESS_THRESHOLD)


def _truncate_real(cert: RealnessCertificate, g_like):
    if g_like is None or not cert.is_real or not np.iscomplexobj(g_like):
        return g_like
    return np.ascontiguousarray(g_like.real)


def _symmetrize_transitions(cert: RealnessCertificate, t):
    if t is None or not cert.is_real or t.size == 0:
        return t
    return 0.5 * (t + np.conj(t[:, ::-1]))


# ---------------------------------------------------------------------------
# quadratic leakage forms on a masked grid


class _LeakageForm:
    """Gram matrix / cross terms of the unknown basis on one masked grid.

    Columns are the cancellation-carrier spectra followed by the transition
    basis.  For the symmetric pulse the transition basis is the cos/sin pair
    family (conjugate-even sequences), which keeps everything real and halves
    the real unknown count; for the conventional pulse it is one complex
    exponential per support sample.
    """

    def __init__(self, bank: PulseBank, sets: CarrierSets, mask: SpectralMask,
                 pulse_kind: PulseKind, use_cc: bool, use_ast: bool):
        cfg = bank.cfg
        self.cfg = cfg
        self.sets = sets
        self.pulse_kind = pulse_kind
        self.use_cc = use_cc and sets.n_cancel > 0
        self.use_ast = use_ast and cfg.beta > 0
        table = GridTable(bank, pulse_kind, mask.grid)
        self._table = table
        sup = np.nonzero(mask.weight > 0)[0]
        self._sup = sup
        q = mask.weight[sup] * mask.grid.spacing
        self._sqrt_q = np.sqrt(q)
        self._q_total = float(np.sum(q))
        freqs = mask.grid.points[sup]

        blocks = []
        if self.use_cc:
            cc = np.stack([table.row(c)[sup] for c in sets.cancel], axis=1)
            blocks.append(cc)
        if self.use_ast:
            beta = cfg.beta
            if pulse_kind is PulseKind.HERMITIAN:
                npos = np.arange(cfg.eta - beta + 1, cfg.eta + 1)
                ang = TWO_PI * np.outer(freqs, npos)
                blocks.append(np.concatenate([2.0 * np.cos(ang), 2.0 * np.sin(ang)], axis=1))
            else:
                s = np.concatenate([np.arange(beta), np.arange(cfg.pulse_len - beta, cfg.pulse_len)])
                blocks.append(np.exp(-1j * TWO_PI * np.outer(freqs, s.astype(float))))
        if blocks:
            cols = np.concatenate(blocks, axis=1) if len(blocks) > 1 else blocks[0]
        else:
            cols = np.zeros((len(sup), 0))
        self.n_cc = sets.n_cancel if self.use_cc else 0
        self.n_ast_cols = cols.shape[1] - self.n_cc
        self._bw = cols * self._sqrt_q[:, None]
        self.gram = self._bw.conj().T @ self._bw
        self.dim = cols.shape[1]

    def cross_terms(self, chunk: int = 256) -> np.ndarray:
        """V[:, k] = basis^H (q * P_k) for every data carrier."""
        data = list(self.sets.data)
        v = np.zeros((self.dim, len(data)), dtype=self._bw.dtype)
        for lo in range(0, len(data), chunk):
            hi = min(lo + chunk, len(data))
            p = np.stack([self._table.row(k)[self._sup] for k in data[lo:hi]], axis=1)
            v[:, lo:hi] = self._bw.conj().T @ (p * self._sqrt_q[:, None])
        return v

    def target_energy(self) -> np.ndarray:
        """c_k = integral of the base-pulse leakage per data carrier."""
        out = np.empty(self.sets.n_data)
        for i, k in enumerate(self.sets.data):
            p = self._table.row(k)[self._sup]
            out[i] = float(np.sum((np.abs(p) ** 2) * self._sqrt_q ** 2))
        return out

    def ridge_diag(self, eps: float) -> np.ndarray:
        """Ridge penalizing time-domain coefficient energy identically in
        both parametrizations (the cos/sin pair carries twice the energy)."""
        d = np.full(self.dim, eps)
        if self.pulse_kind is PulseKind.HERMITIAN and self.n_ast_cols:
            d[self.n_cc:] = 2.0 * eps
        return d

    def canonical_trace(self) -> float:
        """Trace of the complex-parametrization Gram (pulse-kind invariant)."""
        tr = 0.0
        if self.n_cc:
            tr += float(np.real(np.trace(self.gram[: self.n_cc, : self.n_cc])))
        if self.use_ast:
            tr += 2.0 * self.cfg.beta * self._q_total
        return tr

    def canonical_dim(self) -> int:
        return self.n_cc + (2 * self.cfg.beta if self.use_ast else 0)


def _default_eps(form: _LeakageForm, ridge: Optional[float]) -> float:
    if ridge is not None:
        if ridge < 0:
            raise ConfigError("ridge must be nonnegative")
        return float(ridge)
    tr, dim = form.canonical_trace(), max(form.canonical_dim(), 1)
    return 1e-12 * (tr / dim if tr > 0 else 1.0)


def _cholesky_solve(a: np.ndarray, rhs: np.ndarray, eps_diag: np.ndarray,
                    had_ridge: bool) -> np.ndarray:
    m = a + np.diag(eps_diag)
    try:
        cf = sp_linalg.cho_factor(m, check_finite=False)
    except np.linalg.LinAlgError as exc:
        if not had_ridge:
            raise IllConditionedError(
                "normal equations are singular; pass ridge > 0"
            ) from exc
        raise
    return sp_linalg.cho_solve(cf, rhs, check_finite=False)


def _unpack_solution(form: _LeakageForm, x: np.ndarray):
    """Split stacked coefficients into (aic table, stored transitions)."""
    cfg = form.cfg
    g = x[: form.n_cc, :] if form.use_cc else None
    t = None
    if form.use_ast:
        beta = cfg.beta
        block = x[form.n_cc:, :]
        if form.pulse_kind is PulseKind.HERMITIAN:
            pos = (block[:beta, :] + 1j * block[beta:, :]).T  # (n_data, beta)
            t = np.concatenate([np.conj(pos[:, ::-1]), pos], axis=1)
        else:
            t = block.T.copy()
    return g, t


def _quadratic_values(form: _LeakageForm, x: np.ndarray, v: np.ndarray,
                      c: np.ndarray) -> np.ndarray:
    """Per-carrier masked leakage c_k + 2 Re(v_k^H x_k) + x_k^H Gram x_k."""
    gx = form.gram @ x
    quad = np.real(np.sum(np.conj(x) * gx, axis=0))
    cross = 2.0 * np.real(np.sum(np.conj(v) * x, axis=0))
    return c + cross + quad


def _joint_solve(bank, sets, mask0, pulse_kind, use_cc, use_ast, ridge,
                 constraints, power) -> tuple:
    """Shared driver for the cancellation-carrier / transition solvers."""
    form0 = _LeakageForm(bank, sets, mask0, pulse_kind, use_cc, use_ast)
    if form0.dim == 0:
        return None, None, 0, 0.0
    eps = _default_eps(form0, ridge)
    eps_diag = form0.ridge_diag(eps)
    v0 = form0.cross_terms()
    x = _cholesky_solve(form0.gram, -v0, eps_diag, eps > 0)
    mu = 0.0

    if constraints:
        sigma = power.vector(sets.data)
        cons = []
        for mask_j in constraints:
            if mask_j.bound is None:
                raise ConfigError(f"constraint mask '{mask_j.name}' has no bound")
            form_j = _LeakageForm(bank, sets, mask_j, pulse_kind, use_cc, use_ast)
            cons.append((mask_j, form_j, form_j.cross_terms(), form_j.target_energy()))

        def violated(xx):
            worst, worst_c = 0.0, None
            for mask_j, form_j, vj, cj in cons:
                val = float(np.dot(sigma, _quadratic_values(form_j, xx, vj, cj)))
                if val > mask_j.bound and val - mask_j.bound > worst:
                    worst, worst_c = val - mask_j.bound, (mask_j, form_j, vj, cj)
            return worst_c

        active = violated(x)
        if active is not None:
            mask_j, form_j, vj, cj = active
            delta = float(mask_j.bound)

            def solve_at(mu_try):
                a = form0.gram + mu_try * form_j.gram
                rhs = -(v0 + mu_try * vj)
                xx = _cholesky_solve(a, rhs, eps_diag, True)
                val = float(np.dot(sigma, _quadratic_values(form_j, xx, vj, cj)))
                return xx, val

            mu_hi = 1.0
            x_hi, val_hi = solve_at(mu_hi)
            doublings = 0
            while val_hi > delta:
                mu_hi *= 4.0
                doublings += 1
                if doublings > 64:
                    raise InfeasibleConstraintError(mask_j.name, delta, val_hi)
                x_hi, val_hi = solve_at(mu_hi)
            mu_lo = 0.0
            for _ in range(200):
                if delta > 0 and 0 <= delta - val_hi <= 1e-10 * delta:
                    break
                if (mu_hi - mu_lo) <= 1e-15 * mu_hi:
                    break
                mid = 0.5 * (mu_lo + mu_hi)
                x_mid, val_mid = solve_at(mid)
                if val_mid <= delta:
                    mu_hi, x_hi, val_hi = mid, x_mid, val_mid
                else:
                    mu_lo = mid
            x, mu = x_hi, mu_hi
            remaining = violated(x)
            if remaining is not None:
                raise InfeasibleConstraintError(
                    remaining[0].name, float(remaining[0].bound),
                    float(np.dot(sigma, _quadratic_values(remaining[1], x, remaining[2], remaining[3]))),
                )

    g, t = _unpack_solution(form0, x)
    dof = 0
    if form0.use_cc:
        dof += sets.n_cancel if pulse_kind is PulseKind.HERMITIAN else 2 * sets.n_cancel
    if form0.use_ast:
        dof += 2 * bank.cfg.beta if pulse_kind is PulseKind.HERMITIAN else 4 * bank.cfg.beta
    return g, t, dof, mu


def solve_aic(bank: PulseBank, sets: CarrierSets, mask0: SpectralMask,
              pulse_kind: PulseKind, ridge: Optional[float] = None) -> ShaperSolution:
    """Least-squares cancellation-carrier weights per data carrier."""
    if sets.n_cancel == 0:
        cert = RealnessCertificate(0.0, True)
        return ShaperSolution("aic", "aic", pulse_kind, bank, sets, cert,
                              aic=np.zeros((0, sets.n_data)))
    if not np.any(mask0.weight > 0):
        raise ConfigError("mask has empty support")
    g, _, dof, _ = _joint_solve(bank, sets, mask0, pulse_kind,
                                use_cc=True, use_ast=False, ridge=ridge,
                                constraints=(), power=PowerAllocation.uniform())
    cert = _certify(g, None)
    g = _truncate_real(cert, g)
    return ShaperSolution("aic", "aic", pulse_kind, bank, sets, cert,
                          aic=g, real_dof_per_carrier=dof)


def solve_ast(bank: PulseBank, sets: CarrierSets, mask0: SpectralMask,
              pulse_kind: PulseKind, ridge: Optional[float] = None) -> ShaperSolution:
    """Least-squares symbol-transition corrections on the 2*beta support."""
    if bank.cfg.beta == 0:
        warnings.warn("beta = 0: transition solver returns a no-op solution")
        cert = RealnessCertificate(0.0, True)
        return ShaperSolution("ast", "ast", pulse_kind, bank, sets, cert,
                              transitions=np.zeros((sets.n_data, 0)))
    _, t, dof, _ = _joint_solve(bank, sets, mask0, pulse_kind,
                                use_cc=False, use_ast=True, ridge=ridge,
                                constraints=(), power=PowerAllocation.uniform())
    cert = _certify(None, t)
    t = _symmetrize_transitions(cert, t)
    return ShaperSolution("ast", "ast", pulse_kind, bank, sets, cert,
                          transitions=t, real_dof_per_carrier=dof)


def solve_aic_ast(bank: PulseBank, sets: CarrierSets, mask0: SpectralMask,
                  pulse_kind: PulseKind, ridge: Optional[float] = None,
                  constraints: Sequence[SpectralMask] = (),
                  power: Optional[PowerAllocation] = None,
                  use_transitions: bool = True) -> ShaperSolution:
    """Joint cancellation-carrier and transition solve, optionally honoring
    one active masked-power bound through a scalar dual search."""
    power = power or PowerAllocation.uniform()
    use_ast = use_transitions and bank.cfg.beta > 0
    if sets.n_cancel == 0 and not use_ast:
        raise ConfigError("nothing to optimize: no cancellation carriers, no transitions")
    g, t, dof, mu = _joint_solve(bank, sets, mask0, pulse_kind,
                                 use_cc=True, use_ast=use_ast, ridge=ridge,
                                 constraints=tuple(constraints), power=power)
    cert = _certify(g, t)
    g = _truncate_real(cert, g)
    t = _symmetrize_transitions(cert, t)
    return ShaperSolution("aic_ast", "aic_ast", pulse_kind, bank, sets, cert,
                          aic=g, transitions=t, real_dof_per_carrier=dof, mu=mu)


# ---------------------------------------------------------------------------
# precoders


def _require_plain_data(sets: CarrierSets):
    if sets.n_cancel:
        raise ConfigError("precoders act on the active set; configure without "
                          "cancellation carriers")


def _orthonormal_rows(a: np.ndarray, drop_tol: float = 1e-12) -> tuple:
    """Row-space basis by modified Gram-Schmidt with reorthogonalization,
    carried out in the input dtype.  Dependent rows are dropped."""
    rows = []
    dropped = 0
    for r in a:
        v = r.copy()
        for _ in range(2):
            for q in rows:
                v -= q * (np.conj(q) @ v)
        nrm = np.sqrt(np.real(np.conj(v) @ v))
        ref = np.sqrt(np.real(np.conj(r) @ r))
        if nrm <= drop_tol * max(ref, 1.0):
            dropped += 1
            continue
        rows.append(v / nrm)
    basis = np.array(rows) if rows else np.zeros((0, a.shape[1]), dtype=a.dtype)
    return basis, dropped


def _notch_row_basis(bank: PulseBank, sets: CarrierSets, notch: NotchSet,
                     pulse_kind: PulseKind,
                     col_scale: Optional[np.ndarray] = None) -> np.ndarray:
    """Orthonormal basis (rows) of the notch-spectrum row space, optionally of
    the column-scaled matrix A diag(col_scale).

    Clustered notch frequencies make this subspace ill conditioned, and the
    conventional-vs-symmetric PSD match inherits any error in it, so both the
    matrix evaluation and the orthonormalization run in extended precision
    before the basis is cast back to working precision.
    """
    key = ("notch_basis", pulse_kind, notch.freqs.tobytes(), sets.active,
           None if col_scale is None else col_scale.tobytes())
    cached = bank._cache.get(key)
    if cached is not None:
        return cached
    a = bank.spectra_at(pulse_kind, sets.active, notch.freqs, precision="extended")
    if col_scale is not None:
        a = a * col_scale.astype(np.longdouble)[None, :]
    basis_ext, dropped = _orthonormal_rows(a)
    if dropped:
        warnings.warn(f"rank-deficient notch matrix: {dropped} dependent "
                      "frequencies folded into the null-space projector")
    basis = np.ascontiguousarray(
        basis_ext.astype(complex if pulse_kind is PulseKind.CONVENTIONAL else float))
    bank._cache[key] = basis
    return basis


def _projector_solution(bank, sets, pulse_kind, notch, w_inv_sqrt, method) -> ShaperSolution:
    """G = I - D Q^H Q D^{-1} with Q the basis of the (scaled) notch rows and
    D = diag(w_inv_sqrt); this is the weighted least-squares null projector."""
    k = sets.n_active
    if len(notch) == 0:
        cert = RealnessCertificate(0.0, True)
        return ShaperSolution("precoder", method, pulse_kind, bank, sets, cert,
                              G=np.eye(k))
    if len(notch) >= k:
        raise ConfigError(
            f"{len(notch)} notch frequencies with only {k} active carriers: "
            "null space may be empty"
        )
    q = _notch_row_basis(bank, sets, notch, pulse_kind, col_scale=w_inv_sqrt)
    ah = q.conj().T * w_inv_sqrt[:, None]     # D Q^H
    r = q / w_inv_sqrt[None, :]               # Q D^{-1}
    g = np.eye(k, dtype=q.dtype) - ah @ r
    cert = _certify(g, None)
    g = _truncate_real(cert, g)
    dof = k if pulse_kind is PulseKind.HERMITIAN else 2 * k
    return ShaperSolution("precoder", method, pulse_kind, bank, sets, cert, G=g,
                          real_dof_per_carrier=dof,
                          aux=("lowrank_identity", ah, r))


def solve_nullspace_precoder(bank: PulseBank, sets: CarrierSets, notch: NotchSet,
                             pulse_kind: PulseKind) -> ShaperSolution:
    """Orthogonal projector onto the null space of the notch-spectrum matrix
    (the least-squares precoder I - A^H (A A^H)^{-1} A)."""
    _require_plain_data(sets)
    return _projector_solution(bank, sets, pulse_kind, notch,
                               np.ones(sets.n_active), "nullspace")


def solve_weighted_precoder(bank: PulseBank, sets: CarrierSets, notch: NotchSet,
                            weights: np.ndarray,
                            pulse_kind: PulseKind) -> ShaperSolution:
    """Weighted least-distortion precoder with exact notch nulls:
    I - W^{-1} A^H (A W^{-1} A^H)^{-1} A."""
    _require_plain_data(sets)
    w = np.asarray(weights, dtype=float)
    if w.shape != (sets.n_active,):
        raise ConfigError(f"need {sets.n_active} weights, got shape {w.shape}")
    if np.any(w <= 0):
        raise ConfigError("weights must be positive")
    return _projector_solution(bank, sets, pulse_kind, notch,
                               1.0 / np.sqrt(w), "weighted")


def solve_orthogonal_precoder(bank: PulseBank, sets: CarrierSets, rate,
                              pulse_kind: PulseKind,
                              notch: Optional[NotchSet] = None,
                              mask: Optional[SpectralMask] = None) -> ShaperSolution:
    """Orthonormal-column precoder from the trailing right singular vectors
    of the leakage matrix (rows from a notch set or a mask-sampled grid)."""
    _require_plain_data(sets)
    from fractions import Fraction

    rate = Fraction(rate) if not isinstance(rate, Fraction) else rate
    if not (0 < rate <= 1):
        raise ConfigError(f"rate must be in (0, 1], got {rate}")
    k = sets.n_active
    dims_frac = rate * k
    if dims_frac.denominator != 1:
        raise ConfigError(f"rate {rate} times {k} active carriers is not integral")
    dims = int(dims_frac)

    if (notch is None) == (mask is None):
        raise ConfigError("pass exactly one of notch or mask")
    if notch is not None and len(notch) == 0:
        cert = RealnessCertificate(0.0, True)
        return ShaperSolution("precoder", "orthogonal", pulse_kind, bank, sets,
                              cert, G=np.eye(k)[:, :dims],
                              aux=("complement", np.eye(k)[:, dims:], np.zeros(k)))
    if notch is not None and dims == k - len(notch):
        # matched rate: the kept columns span exactly the notch null space,
        # so reuse the extended-precision row basis and complete it
        q = _notch_row_basis(bank, sets, notch, pulse_kind,
                             col_scale=np.ones(k))
        _, _, vh = np.linalg.svd(q, full_matrices=True)
        v_full = vh.conj().T            # first r columns span the row space
        g = v_full[:, len(notch):]
        v0 = v_full[:, : len(notch)]
        a_dbl = bank.spectra_at(pulse_kind, sets.active, notch.freqs)
        s = np.linalg.svd(a_dbl, compute_uv=False)
        svals = np.concatenate([s, np.zeros(k - len(s))])
    else:
        if notch is not None:
            c = bank.spectra_at(pulse_kind, sets.active, notch.freqs)
        else:
            table = GridTable(bank, pulse_kind, mask.grid)
            sup = np.nonzero(mask.weight > 0)[0]
            if len(sup) == 0:
                raise ConfigError("mask has empty support")
            sq = np.sqrt(mask.weight[sup] * mask.grid.spacing)
            c = np.stack([table.row(i)[sup] for i in sets.active], axis=1) * sq[:, None]
        rows = c.shape[0]
        if rows > 2 * k:
            # Gram path: right singular vectors from the Hermitian eigenproblem
            gram = c.conj().T @ c
            evals, vecs = np.linalg.eigh(gram)  # ascending
            svals = np.sqrt(np.maximum(evals[::-1], 0.0))  # descending
            v_full = vecs[:, ::-1]
        else:
            _, s, vh = np.linalg.svd(c, full_matrices=True)
            svals = np.concatenate([s, np.zeros(k - len(s))])
            v_full = vh.conj().T
        g = v_full[:, k - dims:]
        v0 = v_full[:, : k - dims]
    cert = _certify(g, None)
    g = _truncate_real(cert, g)
    if not np.iscomplexobj(g):
        v0 = v0.real.copy()
    dof = k if pulse_kind is PulseKind.HERMITIAN else 2 * k
    return ShaperSolution("precoder", "orthogonal", pulse_kind, bank, sets, cert,
                          G=g, real_dof_per_carrier=dof,
                          aux=("complement", v0, svals))


# ---------------------------------------------------------------------------
# objective and the solution transform


def framework_objective(solution: ShaperSolution, mask0: SpectralMask,
                        power: PowerAllocation) -> float:
    """Mask-weighted leakage cost sum_k sigma_k^2 integral M0 |H_k|^2 df."""
    psd = analytic_psd(solution, power, mask0.grid)
    return masked_power(psd, mask0) * solution.bank.cfg.n_s


def _rotation(cfg, carriers) -> np.ndarray:
    ks = np.asarray(list(carriers), dtype=float)
    return np.exp(1j * TWO_PI * ks * (cfg.eta - cfg.n_gi) / cfg.n)


def transform_solution(sol: ShaperSolution) -> ShaperSolution:
    """Map a symmetric-pulse solution to the conventional-pulse solution with
    identical PSD: coefficients acquire the per-carrier phase-origin rotation
    exp(j*2*pi*(k - i)*(eta - n_gi)/n); moduli are preserved."""
    if sol.pulse_kind is not PulseKind.HERMITIAN:
        raise ConfigError("transform_solution expects a symmetric-pulse solution")
    cfg, sets = sol.bank.cfg, sol.sets
    g = aic = t = None
    aux = None
    if sol.aic is not None:
        rot_c = _rotation(cfg, sets.cancel)
        rot_d = _rotation(cfg, sets.data)
        aic = sol.aic * (np.conj(rot_c)[:, None] * rot_d[None, :])
    if sol.transitions is not None and sol.transitions.size:
        rot_d = _rotation(cfg, sets.data)
        t = sol.transitions * rot_d[:, None]
    if sol.G is not None:
        rot_a = _rotation(cfg, sets.active)
        if sol.method == "orthogonal":
            g = sol.G * np.conj(rot_a)[:, None]
        else:
            g = sol.G * (np.conj(rot_a)[:, None] * rot_a[None, :])
        if sol.aux is not None and sol.aux[0] == "lowrank_identity":
            ah_w, r = sol.aux[1], sol.aux[2]
            aux = ("lowrank_identity", ah_w * np.conj(rot_a)[:, None],
                   r * rot_a[None, :])
        elif sol.aux is not None and sol.aux[0] == "complement":
            aux = ("complement", sol.aux[1] * np.conj(rot_a)[:, None], sol.aux[2])
    cert = _certify(g if g is not None else aic, t)
    return replace(sol, pulse_kind=PulseKind.CONVENTIONAL, G=g, aic=aic,
                   transitions=t, realness=cert, aux=aux,
                   real_dof_per_carrier=2 * sol.real_dof_per_carrier
                   if sol.real_dof_per_carrier else 0)


# ---------------------------------------------------------------------------
# text serialization


def solution_to_text(sol: ShaperSolution) -> str:
    cfg = sol.bank.cfg
    lines = [
        "ofdmshape-solution v1",
        f"kind: {sol.kind}",
        f"method: {sol.method}",
        f"pulse_kind: {sol.pulse_kind.value}",
        f"n: {cfg.n}",
        f"n_gi: {cfg.n_gi}",
        f"beta: {cfg.beta}",
        f"data_dim: {sol.data_dim}",
        f"realness: {sol.realness.value:.17g}",
        "rows: block,i,k,re,im",
    ]

    def emit(tag, arr, row_ids, col_ids):
        a = np.asarray(arr)
        for jj, kk in enumerate(col_ids):
            for ii, rid in enumerate(row_ids):
                z = complex(a[ii, jj])
                lines.append(f"{tag},{rid},{kk},{z.real:.17g},{z.imag:.17g}")

    if sol.aic is not None and sol.aic.size:
        emit("aic", sol.aic, sol.sets.cancel, sol.sets.data)
    if sol.transitions is not None and sol.transitions.size:
        emit("t", sol.transitions.T, sol.transition_support(), sol.sets.data)
    if sol.G is not None:
        emit("g", sol.G, sol.sets.active, range(sol.data_dim))
    return "\n".join(lines) + "\n"


def solution_from_text(text: str, bank: PulseBank, sets: CarrierSets) -> ShaperSolution:
    lines = text.strip().split("\n")
    if lines[0] != "ofdmshape-solution v1":
        raise ConfigError("unrecognized solution header")
    head = {}
    idx = 1
    while not lines[idx].startswith("rows:"):
        key, val = lines[idx].split(":", 1)
        head[key.strip()] = val.strip()
        idx += 1
    cfg = bank.cfg
    if (int(head["n"]), int(head["n_gi"]), int(head["beta"])) != (cfg.n, cfg.n_gi, cfg.beta):
        raise ConfigError("solution was produced under a different system config")
    pulse_kind = PulseKind(head["pulse_kind"])
    kind, method = head["kind"], head["method"]
    data_dim = int(head["data_dim"])

    data_pos = {k: i for i, k in enumerate(sets.data)}
    cc_pos = {k: i for i, k in enumerate(sets.cancel)}
    act_pos = {k: i for i, k in enumerate(sets.active)}
    sup_pos = {int(s): i for i, s in enumerate(
        np.concatenate([np.arange(cfg.beta), np.arange(cfg.pulse_len - cfg.beta, cfg.pulse_len)]))}

    aic = np.zeros((sets.n_cancel, sets.n_data), dtype=complex) if kind in ("aic", "aic_ast") else None
    t = np.zeros((sets.n_data, 2 * cfg.beta), dtype=complex) if kind in ("ast", "aic_ast") else None
    g = np.zeros((sets.n_active, data_dim), dtype=complex) if kind == "precoder" else None
    for line in lines[idx + 1:]:
        tag, i_s, k_s, re_s, im_s = line.split(",")
        val = float(re_s) + 1j * float(im_s)
        if tag == "aic":
            aic[cc_pos[int(i_s)], data_pos[int(k_s)]] = val
        elif tag == "t":
            t[data_pos[int(k_s)], sup_pos[int(i_s)]] = val
        elif tag == "g":
            g[act_pos[int(i_s)], int(k_s)] = val
        else:
            raise ConfigError(f"unknown row tag {tag!r}")
    cert = RealnessCertificate(float(head["realness"]),
                               float(head["realness"]) <= REALNESS_THRESHOLD)
    aic = _truncate_real(cert, aic)
    g = _truncate_real(cert, g)
    return ShaperSolution(kind, method, pulse_kind, bank, sets, cert,
                          G=g, aic=aic, transitions=t)
