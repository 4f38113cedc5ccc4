"""Synthetic multichannel complex time series.

Panels are complex arrays of shape ``(M, N)`` (channels by time).  Four
data-generating processes are available:

* ``dgp1``: independent ARMA(1,1) channels (the null hypothesis);
* ``dgp2``: ``y = A x`` with ``A A* = Sigma``, ``Sigma_kh = s**|k-h| / (1 - s**2)``;
* ``dgp3``: ``y = (I + s / sqrt(M) G) x`` with ``G`` a fixed real Gaussian matrix;
* ``dgp4``: ``y_m = lambda_m^T f + eps_m``, a factor model at a target SNR.

Innovations are circular complex Gaussian, or scale mixtures of Gaussians
(Student-t and K-distributed) where the mixing variable is shared across
channels at each time index.
"""
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import seeding
from ._validation import check_choice, check_int, check_panel, check_real
from .errors import ParameterError, ShapeError, StationarityError

INNOVATION_KINDS = ("gaussian", "student", "kdist")
DGP_KINDS = ("dgp1", "dgp2", "dgp3", "dgp4")
COEF_MODES = ("constant", "uniform")
PANEL_MAGIC = b"CPNL"


@dataclass(frozen=True)
class InnovationSpec:
    """Innovation law.

    Parameters
    ----------
    kind : {"gaussian", "student", "kdist"}
    k : float, optional
        Degrees of freedom (``student``) or shape (``kdist``).
    shared_tau : bool, default True
        Share the mixing variable ``tau_n`` across channels.  ``False``
        draws one ``tau`` per entry.
    """

    kind: str = "gaussian"
    k: float | None = None
    shared_tau: bool = True

    def __post_init__(self):
        check_choice(self.kind, "innovation kind", INNOVATION_KINDS)
        if self.kind != "gaussian":
            if self.k is None:
                raise ParameterError(f"{self.kind} innovations need k")
            check_real(self.k, "k", low=0.0, low_open=True)

    @property
    def second_moment(self):
        """``E|eps|**2`` (``inf`` for Student with ``k <= 2``)."""
        if self.kind == "student":
            return np.inf if self.k <= 2 else self.k / (self.k - 2.0)
        return 1.0

    @property
    def infinite_variance(self):
        return not np.isfinite(self.second_moment)


@dataclass(frozen=True)
class DgpSpec:
    """Data-generating process.

    The base process (the ``x`` of dgp2/dgp3 and the factors of dgp4) is
    ARMA(1,1) with coefficients ``phi``, ``psi``.

    Parameters
    ----------
    kind : {"dgp1", "dgp2", "dgp3", "dgp4"}
    phi, psi : float or sequence of float
        ARMA(1,1) coefficients, scalar or one per channel.
    coef_mode : {"constant", "uniform"}
        ``uniform`` draws ``phi_m, psi_m ~ U(-0.5, 0.5)`` once per
        configuration, ignoring ``phi`` and ``psi``.
    sigma : float
        Mixing strength for dgp2 (``< 1``) and dgp3 (``>= 0``).
    mixing_seed : int
        Seed of the dgp3 mixing matrix.
    factors : int
        Number of factors for dgp4.
    snr_db : float
        Factor-to-noise ratio of dgp4 in decibels.
    innovation : InnovationSpec
    """

    kind: str = "dgp1"
    phi: float | tuple = 0.1
    psi: float | tuple = 0.5
    coef_mode: str = "constant"
    sigma: float = 0.0
    mixing_seed: int = 0
    factors: int = 1
    snr_db: float = 0.0
    innovation: InnovationSpec = field(default_factory=InnovationSpec)

    def __post_init__(self):
        check_choice(self.kind, "dgp kind", DGP_KINDS)
        check_choice(self.coef_mode, "coef_mode", COEF_MODES)
        for name in ("phi", "psi"):
            v = getattr(self, name)
            if not np.isscalar(v):
                object.__setattr__(self, name, tuple(float(a) for a in v))
        if np.any(np.abs(np.atleast_1d(self.phi)) >= 1):
            raise StationarityError("dgp requires |phi_m| < 1")
        if self.kind == "dgp2":
            check_real(self.sigma, "sigma", low=0.0, high=1.0, high_open=True)
        if self.kind == "dgp3":
            check_real(self.sigma, "sigma", low=0.0)
            check_int(self.mixing_seed, "mixing_seed", low=0)
        if self.kind == "dgp4":
            check_int(self.factors, "factors", low=1)
            check_real(self.snr_db, "snr_db")
        if not isinstance(self.innovation, InnovationSpec):
            raise ParameterError("innovation must be an InnovationSpec")


# -- innovations -----------------------------------------------------------


def _complex_normal(rng, shape):
    # two independent N(0, 1/2) parts
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


def gen_innovations(m, n, spec=None, seed=0):
    """Draw an ``(m, n)`` panel of innovations.

    Parameters
    ----------
    m, n : int
    spec : InnovationSpec, optional
        Defaults to Gaussian.
    seed : int or numpy.random.Generator

    Returns
    -------
    ndarray of complex128, shape (m, n)
    """
    m = check_int(m, "m", low=1)
    n = check_int(n, "n", low=1)
    spec = spec or InnovationSpec()
    rng = seed if isinstance(seed, np.random.Generator) else seeding.rng_from(seed)
    w = _complex_normal(rng, (m, n))
    if spec.kind == "gaussian":
        return w
    tau_shape = (1, n) if spec.shared_tau else (m, n)
    k = float(spec.k)
    if spec.kind == "student":
        # 1/tau ~ Gamma(shape k/2, rate k/2)
        tau = 1.0 / rng.gamma(k / 2.0, 2.0 / k, size=tau_shape)
    else:
        tau = rng.gamma(k, 1.0 / k, size=tau_shape)
    return np.sqrt(tau) * w


# -- ARMA ------------------------------------------------------------------


def arma_burn_in(phi):
    """Warm-up length ``500 + ceil(10 / (1 - max|phi|))``."""
    a = float(np.max(np.abs(np.atleast_1d(phi))))
    if a >= 1:
        raise StationarityError("|phi| must be < 1")
    return 500 + int(np.ceil(10.0 / (1.0 - a)))


def _broadcast_coefs(v, m, name):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.size == 1:
        return np.full(m, v[0])
    if v.shape != (m,):
        raise ShapeError(f"{name} has {v.size} entries for {m} channels")
    return v


def gen_arma_panel(m, n, phi, psi, innovations):
    """Filter innovations through ARMA(1,1) channel by channel.

    ``y_t - phi_m y_{t-1} = eps_t + psi_m eps_{t-1}``, started at zero.  The
    innovation panel has ``n + burn`` columns and the first ``burn``
    outputs are discarded.
    """
    m = check_int(m, "m", low=1)
    n = check_int(n, "n", low=1)
    phi = _broadcast_coefs(phi, m, "phi")
    psi = _broadcast_coefs(psi, m, "psi")
    if np.any(np.abs(phi) >= 1):
        raise StationarityError("gen_arma_panel requires |phi_m| < 1")
    eps = np.asarray(innovations)
    if eps.ndim != 2 or eps.shape[0] != m or eps.shape[1] < n:
        raise ShapeError(f"innovations shape {eps.shape} incompatible with ({m}, >= {n})")
    out = np.empty(eps.shape, dtype=complex)
    pairs = np.stack([phi, psi], axis=1)
    uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
    for g, (ph, ps) in enumerate(uniq):
        rows = np.flatnonzero(inverse.ravel() == g)
        if ph == 0.0 and ps == 0.0:
            out[rows] = eps[rows]
        else:
            out[rows] = lfilter([1.0, ps], [1.0, -ph], eps[rows], axis=1)
    return out[:, eps.shape[1] - n :]


def arma_spectral_density(phi, psi, nu):
    """``|1 + psi e^{-2 pi i nu}|**2 / |1 - phi e^{-2 pi i nu}|**2`` (unit innovations)."""
    e = np.exp(-2j * np.pi * np.asarray(nu, dtype=float))
    return np.abs(1.0 + psi * e) ** 2 / np.abs(1.0 - phi * e) ** 2


def arma_variance(phi, psi):
    """Stationary variance of ARMA(1,1) with unit innovation variance."""
    return (1.0 + 2.0 * phi * psi + psi * psi) / (1.0 - phi * phi)


# -- mixing ----------------------------------------------------------------


def ar1_covariance(m, sigma):
    m = check_int(m, "m", low=1)
    sigma = check_real(sigma, "sigma", low=0.0, high=1.0, high_open=True)
    lags = np.abs(np.subtract.outer(np.arange(m), np.arange(m)))
    return sigma**lags / (1.0 - sigma**2)


def ar1_mixing_root(m, sigma):
    """Lower-triangular ``A`` with ``A A* = Sigma``, ``Sigma_kh = sigma**|k-h| / (1 - sigma**2)``.

    The Cholesky factor of this Toeplitz matrix is known in closed form:
    the first column is ``sigma**k / sqrt(1 - sigma**2)`` and every other
    column ``j`` holds ``sigma**(k - j)`` for ``k >= j``.
    """
    m = check_int(m, "m", low=1)
    sigma = check_real(sigma, "sigma", low=0.0, high=1.0, high_open=True)
    k = np.arange(m)
    lags = np.subtract.outer(k, k)
    a = np.where(lags >= 0, sigma ** np.maximum(lags, 0), 0.0)
    a[:, 0] /= np.sqrt(1.0 - sigma**2)
    return a


def dgp3_matrix(m, sigma, mixing_seed):
    """``I + sigma / sqrt(m) G`` with ``G`` real standard Gaussian."""
    rng = seeding.rng_from(mixing_seed, seeding.STREAM_MIXING)
    g = rng.standard_normal((m, m))
    return np.eye(m) + sigma / np.sqrt(m) * g


def factor_loadings(m, r, snr_db, factor_var=1.0, noise_var=1.0, seed=0):
    """Real loadings ``(m, r)`` scaled so the factor-to-noise power is ``10**(snr_db/10)``.

    The scaling satisfies ``sum_m ||lambda_m||**2 factor_var / (m noise_var)
    = 10**(snr_db / 10)``.
    """
    m = check_int(m, "m", low=1)
    r = check_int(r, "r", low=1)
    if not (np.isfinite(factor_var) and np.isfinite(noise_var)) or factor_var <= 0:
        raise ParameterError("dgp4 needs finite positive factor and noise variances")
    rng = seeding.rng_from(seed, seeding.STREAM_LOADINGS)
    lam = rng.standard_normal((m, r))
    target = 10.0 ** (snr_db / 10.0) * m * noise_var / factor_var
    return lam * np.sqrt(target / np.sum(lam * lam))


def dgp_coefficients(spec, m, seed):
    """Per-channel ``(phi, psi)`` for the base ARMA process."""
    if spec.coef_mode == "uniform":
        rng = seeding.rng_from(seed, seeding.STREAM_COEFFICIENTS)
        return rng.uniform(-0.5, 0.5, size=m), rng.uniform(-0.5, 0.5, size=m)
    return _broadcast_coefs(spec.phi, m, "phi"), _broadcast_coefs(spec.psi, m, "psi")


def mixing_matrix(spec, m, seed=0):
    """Matrix ``A`` with ``y = A x`` for dgp1-dgp3, loadings for dgp4."""
    if spec.kind == "dgp1":
        return np.eye(m)
    if spec.kind == "dgp2":
        return ar1_mixing_root(m, spec.sigma)
    if spec.kind == "dgp3":
        return dgp3_matrix(m, spec.sigma, spec.mixing_seed)
    phi, psi = dgp_coefficients(spec, spec.factors, seed)
    fvar = float(np.mean(arma_variance(phi, psi))) * spec.innovation.second_moment
    return factor_loadings(m, spec.factors, spec.snr_db, fvar,
                           spec.innovation.second_moment, seed)


def apply_dgp(spec, base, seed=0, factors=None):
    """Turn a base panel into a panel of the requested DGP.

    Parameters
    ----------
    spec : DgpSpec
    base : array, shape (M, N)
        ``x`` for dgp1-dgp3; the noise ``eps`` for dgp4.
    seed : int
        Configuration seed (fixes dgp4 loadings).
    factors : array, shape (r, N), optional
        Factor series, required for dgp4.
    """
    base = check_panel(base)
    m, n = base.shape
    if spec.kind == "dgp1":
        return base
    if spec.kind in ("dgp2", "dgp3"):
        if spec.kind == "dgp3" and spec.sigma == 0.0:
            return base.copy()
        return mixing_matrix(spec, m, seed) @ base
    if factors is None:
        raise ShapeError("dgp4 needs the factor series")
    factors = check_panel(factors, name="factors")
    if factors.shape != (spec.factors, n):
        raise ShapeError(f"factors shape {factors.shape}, expected {(spec.factors, n)}")
    return mixing_matrix(spec, m, seed) @ factors + base


def simulate_panel(spec, m, n, seed, rep=0):
    """One replication of ``spec``: an ``(m, n)`` complex panel.

    Quantities fixed per configuration (random coefficients, mixing
    matrices, loadings) derive from ``seed``; innovations derive from
    ``seed`` and ``rep``, an integer or a tuple of integers.
    """
    m = check_int(m, "m", low=1)
    n = check_int(n, "n", low=1)
    path = tuple(rep) if isinstance(rep, (tuple, list)) else (rep,)
    rng = seeding.rng_from(seed, *path, seeding.STREAM_INNOVATIONS)
    if spec.kind == "dgp4":
        r = spec.factors
        phi, psi = dgp_coefficients(spec, r, seed)
        burn = arma_burn_in(phi)
        eps_f = gen_innovations(r, n + burn, spec.innovation, rng)
        f = gen_arma_panel(r, n, phi, psi, eps_f)
        noise = gen_innovations(m, n, spec.innovation,
                                seeding.rng_from(seed, *path, seeding.STREAM_NOISE))
        return apply_dgp(spec, noise, seed, factors=f)
    phi, psi = dgp_coefficients(spec, m, seed)
    burn = arma_burn_in(phi)
    eps = gen_innovations(m, n + burn, spec.innovation, rng)
    x = gen_arma_panel(m, n, phi, psi, eps)
    return apply_dgp(spec, x, seed)


# -- serialization ---------------------------------------------------------


def write_panel_csv(path, panel, full_precision=True):
    panel = check_panel(panel)
    fmt = "%.17g" if full_precision else "%.4g"
    m, n = panel.shape
    mm, nn = np.divmod(np.arange(m * n), n)
    with open(path, "w", newline="") as fh:
        fh.write("m,n,re,im\n")
        for i, j, z in zip(mm, nn, panel.ravel()):
            fh.write(f"{i},{j},{fmt % z.real},{fmt % z.imag}\n")


def read_panel_csv(path):
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "m,n,re,im":
            raise ShapeError(f"{path}: expected header 'm,n,re,im', got {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        raise ShapeError(f"{path}: empty panel")
    idx = data[:, :2].astype(np.int64)
    if np.any(idx < 0) or np.any(idx != data[:, :2]):
        raise ShapeError(f"{path}: indices must be non-negative integers")
    m, n = idx.max(axis=0) + 1
    if len(idx) != m * n:
        raise ShapeError(f"{path}: {len(idx)} rows for a {m}x{n} panel")
    out = np.full((m, n), np.nan + 0j)
    out[idx[:, 0], idx[:, 1]] = data[:, 2] + 1j * data[:, 3]
    return check_panel(out)


def write_panel_bin(path, panel):
    panel = check_panel(panel)
    m, n = panel.shape
    with open(path, "wb") as fh:
        fh.write(PANEL_MAGIC + struct.pack("<II", m, n))
        fh.write(panel.astype("<c16").tobytes())


def read_panel_bin(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != PANEL_MAGIC or len(raw) < 12:
        raise ShapeError(f"{path}: not a CPNL panel file")
    m, n = struct.unpack("<II", raw[4:12])
    body = raw[12:]
    if len(body) != 16 * m * n:
        raise ShapeError(f"{path}: payload size {len(body)} != 16*{m}*{n}")
    return check_panel(np.frombuffer(body, dtype="<c16").reshape(m, n).astype(complex))


def read_panel(path):
    """Read a panel, detecting the binary format by its magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    return read_panel_bin(path) if head == PANEL_MAGIC else read_panel_csv(path)


def write_panel(path, panel, fmt=None, full_precision=True):
    fmt = fmt or ("bin" if str(path).endswith((".bin", ".cpnl")) else "csv")
    check_choice(fmt, "format", ("csv", "bin"))
    if fmt == "bin":
        write_panel_bin(path, panel)
    else:
        write_panel_csv(path, panel, full_precision)
