"""Per-channel spectral densities and the bias coefficient ``r(nu)``.

``r(nu) = ((1/M) sum_m s_m'(nu) / s_m(nu))**2`` is the squared average
logarithmic derivative of the channel spectra.  It is estimated from data
with a truncated (rectangular) lag window, or computed exactly for
ARMA(1,1) channels.
"""
from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_panel, check_real, floor_power
from .errors import DegenerateChannelError, ParameterError, ShapeError


@dataclass(frozen=True)
class LagWindowSpec:
    """Lag-window truncation ``l_max`` and positivity floor ``floor_eps``."""

    l_max: int
    floor_eps: float = 1e-6

    def __post_init__(self):
        check_int(self.l_max, "l_max", low=1)
        check_real(self.floor_eps, "floor_eps", low=0.0)

    @classmethod
    def default(cls, n, floor_eps=1e-6):
        """``L = floor(N**(1/4))``."""
        return cls(max(1, floor_power(n, 0.25)), floor_eps)

    @classmethod
    def smoothness(cls, n, gamma0, floor_eps=1e-6):
        """``L = floor(N**(1 / (2 gamma0 + 1)))`` for spectra of smoothness ``gamma0``."""
        gamma0 = check_real(gamma0, "gamma0", low=0.0, low_open=True)
        return cls(max(1, floor_power(n, 1.0 / (2.0 * gamma0 + 1.0))), floor_eps)


def autocov(panel, m, l):
    """``(1/N) sum_n y_{m, n+l} conj(y_{m, n})``; negative lags by conjugation."""
    panel = check_panel(panel)
    n = panel.shape[1]
    l = int(l)
    if abs(l) >= n:
        raise ParameterError(f"lag {l} must be < n = {n}")
    y = panel[m]
    if l < 0:
        return np.conj(autocov(panel, m, -l))
    return complex(np.vdot(y[: n - l], y[l:]) / n)


def autocov_matrix(panel, l_max):
    """Autocovariances for lags ``0..l_max`` of every channel, shape ``(M, l_max + 1)``."""
    panel = check_panel(panel)
    n = panel.shape[1]
    if l_max >= n:
        raise ParameterError(f"lag {l_max} must be < n = {n}")
    out = np.empty((panel.shape[0], l_max + 1), dtype=complex)
    for l in range(l_max + 1):
        out[:, l] = np.einsum("mn,mn->m", panel[:, l:], panel[:, : n - l].conj()) / n
    return out


def lag_window_from_autocov(r, nu, floor_eps=1e-6):
    """Lag-window ``s_hat`` and derivative from autocovariances.

    Parameters
    ----------
    r : ndarray, shape (M, L + 1)
        Autocovariances at lags ``0..L``.
    nu : array_like, shape (K,)
    floor_eps : float

    Returns
    -------
    s, ds : ndarray, shape (M, K)
    clamped : ndarray of bool, shape (M, K)
        Where ``s`` was raised to ``floor_eps * r_0``.
    """
    r = np.asarray(r)
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    lags = np.arange(1, r.shape[1])
    e = np.exp(-2j * np.pi * np.outer(lags, nu))  # (L, K)
    pos = r[:, 1:] @ e
    r0 = r[:, :1].real
    # the -l terms are conjugates of the +l terms
    s = r0 + 2.0 * pos.real
    ds = 2.0 * ((r[:, 1:] * (-2j * np.pi * lags)) @ e).real
    floor = floor_eps * r0
    clamped = s < floor
    s = np.where(clamped, np.broadcast_to(floor, s.shape), s)
    return s, ds, clamped


def lag_window_sd(panel, m, nu, spec):
    """``(s_hat, s_hat')`` of channel ``m`` at frequency ``nu``."""
    panel = check_panel(panel)
    r = autocov_matrix(panel[m : m + 1], spec.l_max)
    s, ds, _ = lag_window_from_autocov(r, [nu], spec.floor_eps)
    return float(s[0, 0]), float(ds[0, 0])


def rhat_from_sd(s, ds):
    return np.mean(ds / s, axis=0) ** 2


def rhat(panel, nu, spec, return_clamped=False):
    """Estimated ``r(nu)`` from lag-window spectra of all channels.

    ``nu`` may be a scalar or an array.  With ``return_clamped`` the number
    of clamped ``(channel, frequency)`` pairs is returned as well.
    """
    panel = check_panel(panel)
    r = autocov_matrix(panel, spec.l_max)
    if not np.all(r[:, 0].real > 0):
        bad = np.flatnonzero(~(r[:, 0].real > 0))
        raise DegenerateChannelError(f"zero power in channel(s) {bad[:5].tolist()}")
    s, ds, clamped = lag_window_from_autocov(r, nu, spec.floor_eps)
    out = rhat_from_sd(s, ds)
    out = float(out[0]) if np.ndim(nu) == 0 else out
    return (out, int(clamped.sum())) if return_clamped else out


# -- oracles ---------------------------------------------------------------


def arma_log_derivative(phi, psi, nu):
    """``d/dnu log s(nu)`` for ARMA(1,1) with real coefficients."""
    w = 2.0 * np.pi * np.asarray(nu, dtype=float)
    sw, cw = np.sin(w), np.cos(w)
    ma = -2.0 * psi * sw / (1.0 + 2.0 * psi * cw + psi * psi)
    ar = -2.0 * phi * sw / (1.0 - 2.0 * phi * cw + phi * phi)
    return 2.0 * np.pi * (ma + ar)


def oracle_r(phi, psi, nu):
    """Exact ``r(nu)`` for independent ARMA(1,1) channels.

    ``phi`` and ``psi`` are scalars or per-channel vectors; ``nu`` scalar or
    array.
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    if phi.shape != psi.shape:
        phi, psi = np.broadcast_arrays(phi, psi)
    if np.any(np.abs(phi) >= 1):
        raise ParameterError("oracle_r requires |phi_m| < 1")
    nus = np.atleast_1d(np.asarray(nu, dtype=float))
    g = arma_log_derivative(phi[:, None], psi[:, None], nus[None, :])
    out = np.mean(g, axis=0) ** 2
    return float(out[0]) if np.ndim(nu) == 0 else out


def mixed_oracle_r(weights, phi, psi, nu, noise_var=0.0):
    """Exact ``r(nu)`` for ``y = A x (+ noise)`` with ARMA(1,1) sources ``x``.

    Parameters
    ----------
    weights : ndarray, shape (M, K)
        ``|A_mk|**2``.
    phi, psi : array_like, shape (K,) or scalar
        Source coefficients.
    noise_var : float
        Variance of white additive noise on every output channel.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 2:
        raise ShapeError("weights must be a 2-D array")
    k = weights.shape[1]
    phi = np.broadcast_to(np.asarray(phi, dtype=float), (k,))
    psi = np.broadcast_to(np.asarray(psi, dtype=float), (k,))
    nus = np.atleast_1d(np.asarray(nu, dtype=float))
    e = np.exp(-2j * np.pi * nus)[None, :]
    s = np.abs(1.0 + psi[:, None] * e) ** 2 / np.abs(1.0 - phi[:, None] * e) ** 2
    ds = s * arma_log_derivative(phi[:, None], psi[:, None], nus[None, :])
    num = weights @ ds
    den = weights @ s + noise_var
    out = np.mean(num / den, axis=0) ** 2
    return float(out[0]) if np.ndim(nu) == 0 else out
