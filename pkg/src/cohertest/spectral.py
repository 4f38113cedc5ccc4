"""Smoothed periodogram and sample spectral coherence.

Frequencies are handled as integer Fourier indices ``k`` (``nu = k / N``)
so window extraction is exact bin arithmetic with wraparound.
"""
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_int, check_panel, check_real, floor_power, floor_ratio
from .errors import ConfigurationError, DegenerateChannelError, ParameterError, ShapeError


@dataclass(frozen=True)
class GridSpec:
    """Frequency grid ``k (B' + 1) / N``, ``k = 0, ..., K' - 1``.

    ``B' = floor(N**delta) B``; ``delta = 0`` gives the grid with spacing
    ``B + 1``, on which the smoothing windows do not overlap.
    """

    n: int
    b: int
    delta: float = 0.0

    def __post_init__(self):
        check_int(self.n, "n", low=1)
        check_int(self.b, "b", low=0)
        check_real(self.delta, "delta", low=0.0)
        if self.b % 2:
            raise ParameterError(f"b must be even, got {self.b}")
        if self.b + 1 > self.n:
            raise ConfigurationError(f"b + 1 = {self.b + 1} exceeds n = {self.n}")

    @property
    def k_count(self):
        return self.n // (self.b + 1)

    @property
    def b_prime(self):
        return floor_power(self.n, self.delta) * self.b

    @property
    def k_prime(self):
        return self.n // (self.b_prime + 1)

    @property
    def indices(self):
        """Integer Fourier indices of the grid frequencies."""
        return np.arange(self.k_prime, dtype=np.int64) * (self.b_prime + 1)

    @property
    def frequencies(self):
        return self.indices / self.n


@dataclass
class CoherenceEstimate:
    """Smoothed periodogram ``s_hat`` and coherence ``c_hat`` at ``index / n``."""

    index: int
    n: int
    s_hat: np.ndarray
    d_hat: np.ndarray
    c_hat: np.ndarray

    @property
    def nu(self):
        return self.index / self.n

    def to_csv(self, path, full_precision=True):
        """Write ``c_hat`` as rows ``i,j,re,im``."""
        fmt = "%.17g" if full_precision else "%.4g"
        m = self.c_hat.shape[0]
        with open(path, "w", newline="") as fh:
            fh.write("i,j,re,im\n")
            for i in range(m):
                for j in range(m):
                    z = self.c_hat[i, j]
                    fh.write(f"{i},{j},{fmt % z.real},{fmt % z.imag}\n")


def dft_panel(panel):
    """Normalized DFT ``xi(k/N) = N**-1/2 sum_n y_n e^{-2 pi i n k / N}`` of each channel."""
    panel = check_panel(panel)
    return np.fft.fft(panel, axis=1) / np.sqrt(panel.shape[1])


def choose_params(n, alpha=2.0 / 3.0, c=0.5):
    """``M = floor(N**alpha)`` and ``B = floor(M / c)`` rounded down to even.

    >>> choose_params(1000, 2 / 3, 0.5)
    (100, 200)
    """
    n = check_int(n, "n", low=1)
    alpha = check_real(alpha, "alpha", low=0.0, high=1.0, low_open=True, high_open=True)
    c = check_real(c, "c", low=0.0, high=1.0, low_open=True, high_open=True)
    m = floor_power(n, alpha)
    b = floor_ratio(m, c)
    b -= b % 2
    if m < 2:
        raise ConfigurationError(f"n = {n} gives only m = {m} channels")
    if b + 1 > n:
        raise ConfigurationError(f"b + 1 = {b + 1} exceeds n = {n}")
    return m, b


def build_grid(n, b, delta=0.0):
    return GridSpec(n=n, b=b, delta=delta)


def window_indices(center, b, n):
    half = b // 2
    return (int(center) + np.arange(-half, half + 1)) % n


def smoothed_periodogram(freq, center, b):
    """``(1 / (B + 1)) sum_{|b'| <= B/2} xi(nu + b'/N) xi(nu + b'/N)*``.

    Parameters
    ----------
    freq : ndarray, shape (M, N)
        Output of :func:`dft_panel`.
    center : int
        Fourier index of ``nu``.
    b : int
        Even smoothing span.
    """
    b = check_int(b, "b", low=0)
    if b % 2:
        raise ParameterError(f"b must be even, got {b}")
    freq = np.asarray(freq)
    w = freq[:, window_indices(center, b, freq.shape[1])]
    s = (w @ w.conj().T) / (b + 1)
    # exact Hermitian symmetry regardless of the BLAS summation order
    return 0.5 * (s + s.conj().T)


def coherence(s_hat, index=0, n=1):
    """Normalize ``s_hat`` to unit diagonal.

    Raises
    ------
    DegenerateChannelError
        If some diagonal entry is not strictly positive.
    """
    s_hat = np.asarray(s_hat)
    if s_hat.ndim != 2 or s_hat.shape[0] != s_hat.shape[1]:
        raise ShapeError(f"s_hat must be square, got {s_hat.shape}")
    d = s_hat.diagonal().real.copy()
    if not np.all(d > 0):
        bad = np.flatnonzero(~(d > 0))
        raise DegenerateChannelError(f"zero spectral power in channel(s) {bad[:5].tolist()}")
    inv = 1.0 / np.sqrt(d)
    c = s_hat * np.outer(inv, inv)
    np.fill_diagonal(c, 1.0)
    return CoherenceEstimate(index=int(index), n=int(n), s_hat=s_hat, d_hat=d, c_hat=c)


def coherence_at(freq, index, b):
    """Coherence estimate at one Fourier index."""
    return coherence(smoothed_periodogram(freq, index, b), index, np.shape(freq)[1])


def coherence_matrices(freq, indices, b):
    """Stack of coherence matrices, shape ``(len(indices), M, M)``."""
    freq = np.asarray(freq)
    m = freq.shape[0]
    out = np.empty((len(indices), m, m), dtype=complex)
    for i, k in enumerate(indices):
        out[i] = coherence_at(freq, k, b).c_hat
    return out


class SpectralCoherence(TransformerMixin, BaseEstimator):
    """Sample spectral coherence matrices on the frequency grid.

    Parameters
    ----------
    b : int or None
        Even smoothing span.  ``None`` picks ``floor(M / c)`` rounded down
        to even at fit time.
    c : float
        Target aspect ratio used when ``b`` is ``None``.
    delta : float
        Grid-thinning exponent.

    Attributes
    ----------
    b_ : int
    grid_ : GridSpec
    n_channels_ : int

    Examples
    --------
    >>> import numpy as np
    >>> X = np.exp(2j * np.pi * np.random.default_rng(0).random((4, 64)))
    >>> SpectralCoherence(b=16).fit_transform(X).shape
    (3, 4, 4)
    """

    def __init__(self, b=None, c=0.5, delta=0.0):
        self.b = b
        self.c = c
        self.delta = delta

    def fit(self, X, y=None):
        X = check_panel(X, min_channels=1, min_samples=2)
        m, n = X.shape
        if self.b is None:
            b = floor_ratio(m, check_real(self.c, "c", low=0.0, low_open=True))
            b -= b % 2
        else:
            b = check_int(self.b, "b", low=0)
        self.grid_ = build_grid(n, b, self.delta)
        self.b_ = b
        self.n_channels_ = m
        return self

    def transform(self, X):
        check_is_fitted(self, "grid_")
        X = check_panel(X)
        if X.shape != (self.n_channels_, self.grid_.n):
            raise ShapeError(f"expected shape {(self.n_channels_, self.grid_.n)}, got {X.shape}")
        return coherence_matrices(dft_panel(X), self.grid_.indices, self.b_)
