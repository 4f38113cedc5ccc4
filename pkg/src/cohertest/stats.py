"""Recentered linear spectral statistics and the independence tests.

For each grid frequency the linear spectral statistic
``f_hat = (1/M) Tr f(C_hat(nu))`` is recentered by its Marchenko-Pastur
limit and the finite-sample bias,

    theta = f_hat - int f dmu_c - <D, f> (r(nu) v_N - 1 / (c n_eff)),

and standardized as ``xi0 = B theta / sigma``.  The per-frequency values
are then aggregated into

* ``xi1 = sum xi0 / sqrt(K')``                  (normal calibration),
* ``xi2 = sum (xi0**2 - 1) / sqrt(2 K')``        (normal) or ``sum xi0**2`` (chi2),
* ``xi3 = (max xi0**2 - (2 log K' - log log K' - log pi)) / 2``  (Gumbel).

Large values are evidence against independence.
"""
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import rmt, specdens, spectral
from ._validation import check_choice, check_int, check_panel, check_real, floor_ratio
from .errors import (
    ConfigurationError,
    DegenerateVarianceError,
    NumericalError,
    ShapeError,
)

CORRECTION_MODES = ("estimated", "oracle", "none")
CALIBRATIONS = ("normal", "chi2", "gumbel")
SIDEDNESS = ("one-sided", "two-sided")
# (statistic, calibration) pairs reported by default
STATISTICS = (("xi1", "normal"), ("xi2", "normal"), ("xi2", "chi2"), ("xi3", "gumbel"))


# -- per-frequency pieces ----------------------------------------------------


def _eigvalsh_checked(c_hat, tol=1e-8):
    lam, vec = np.linalg.eigh(c_hat)
    scale = max(np.abs(lam).max(), 1.0)
    resid = np.linalg.norm(c_hat @ vec - vec * lam, axis=0)
    if np.any(resid > tol * scale):
        raise NumericalError(f"eigen-residual {resid.max():.3g} above tolerance")
    return lam


def lss(c_hat, f):
    """``(1/M) sum_k f(lambda_k(c_hat))``.

    Polynomials of degree <= 2 use the trace shortcut; other test
    functions use a Hermitian eigendecomposition.
    """
    f = rmt._as_test_function(f)
    c_hat = np.asarray(c_hat)
    if c_hat.ndim != 2 or c_hat.shape[0] != c_hat.shape[1]:
        raise ShapeError(f"c_hat must be square, got shape {c_hat.shape}")
    if np.max(np.abs(c_hat - c_hat.conj().T), initial=0.0) > 1e-8:
        raise ShapeError("c_hat is not Hermitian")
    short = f.lss_shortcut(c_hat)
    if short is not None:
        return short
    lam = _eigvalsh_checked(c_hat)
    return float(np.mean(f.eval(lam)))


def theta(f_hat, mp, r_value, f):
    """Recentered statistic ``theta`` at one frequency."""
    f = rmt._as_test_function(f)
    bias = f.d_pairing(mp.c) * (r_value * mp.v_n - 1.0 / (mp.c * mp.n_eff))
    return f_hat - f.mp_integral(mp.c) - bias


def xi0(theta_value, b, sigma):
    """``B theta / sigma``."""
    if not sigma > 0:
        raise DegenerateVarianceError(f"sigma must be positive, got {sigma}")
    return b * np.asarray(theta_value) / sigma


def _as_trace(values):
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ConfigurationError("empty frequency grid")
    return v


def xi1(xi0_values):
    v = _as_trace(xi0_values)
    return float(np.sum(v) / np.sqrt(v.size))


def xi2(xi0_values):
    """Return ``(normal_form, chi2_form, k_prime)``."""
    v = _as_trace(xi0_values)
    k = v.size
    return float(np.sum(v * v - 1.0) / np.sqrt(2.0 * k)), float(np.sum(v * v)), k


def gumbel_centering(k_prime):
    return 2.0 * np.log(k_prime) - np.log(np.log(k_prime)) - np.log(np.pi)


def xi3(xi0_values):
    v = _as_trace(xi0_values)
    if v.size < 2:
        raise ConfigurationError("xi3 needs at least two grid frequencies")
    return float(0.5 * (np.max(v * v) - gumbel_centering(v.size)))


# -- calibration -------------------------------------------------------------


@dataclass
class TestOutcome:
    """Result of one test.

    Attributes
    ----------
    statistic : str
        ``xi1``, ``xi2`` or ``xi3``.
    calibration : str
    value : float
    p_value : float
    reject : bool
        ``p_value <= level``.
    level : float
    k_prime : int
    heuristic : bool
        True for the Gumbel calibration of ``xi3``, whose limit law is
        conjectural.
    xi0 : list of float
        Per-frequency standardized statistics.
    """

    __test__ = False

    statistic: str
    calibration: str
    value: float
    p_value: float
    reject: bool
    level: float
    k_prime: int
    heuristic: bool = False
    xi0: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def p_value(statistic, calibration, k_prime=1, sidedness="one-sided"):
    """Upper-tail p-value of ``statistic`` under ``calibration``."""
    check_choice(calibration, "calibration", CALIBRATIONS)
    check_choice(sidedness, "sidedness", SIDEDNESS)
    x = float(statistic)
    if np.isnan(x):
        return float("nan")
    if calibration == "normal":
        if sidedness == "two-sided":
            return float(2.0 * special.ndtr(-abs(x)))
        return float(special.ndtr(-x))
    if calibration == "chi2":
        k_prime = check_int(k_prime, "k_prime", low=1)
        return 1.0 if x <= 0 else float(special.gammaincc(k_prime / 2.0, x / 2.0))
    # Gumbel CDF exp(-exp(-x))
    return float(-np.expm1(-np.exp(-x)))


def calibrate(statistic, calibration, k_prime, level=0.1, sidedness="one-sided",
              name="xi", xi0_values=()):
    """Attach a p-value and a decision to a statistic."""
    level = check_real(level, "level", low=0.0, high=1.0, low_open=True, high_open=True)
    p = p_value(statistic, calibration, k_prime, sidedness)
    return TestOutcome(
        statistic=name,
        calibration=calibration,
        value=float(statistic),
        p_value=p,
        reject=bool(p <= level),
        level=level,
        k_prime=int(k_prime),
        heuristic=calibration == "gumbel",
        xi0=[float(v) for v in np.ravel(xi0_values)],
    )


def all_outcomes(xi0_values, level=0.1, sidedness="one-sided", statistics=STATISTICS):
    """Outcomes keyed ``"<statistic>/<calibration>"``."""
    v = _as_trace(xi0_values)
    normal2, chi2, k = xi2(v)
    values = {"xi1": xi1(v), ("xi2", "normal"): normal2, ("xi2", "chi2"): chi2}
    if k >= 2:
        values["xi3"] = xi3(v)
    out = {}
    for stat, cal in statistics:
        value = values.get((stat, cal), values.get(stat))
        if value is None:
            continue
        out[f"{stat}/{cal}"] = calibrate(value, cal, k, level, sidedness, stat, v)
    return out


# -- pipeline ----------------------------------------------------------------


@dataclass(frozen=True)
class LssConfig:
    """Everything needed to turn a panel into ``xi0`` values.

    Parameters
    ----------
    f : TestFunction
    grid : GridSpec
    mp : MpContext
    correction_mode : {"estimated", "oracle", "none"}
    lag_window : LagWindowSpec, optional
        Used by the estimated correction; defaults to ``L = floor(N**(1/4))``.
    calibration : str
        Calibration of the headline statistic.
    level : float
    sidedness : {"one-sided", "two-sided"}
    weight : {"omega", "squared"}
        Weights of the variance series, see :func:`cohertest.rmt.sigma2`.
    """

    f: rmt.TestFunction
    grid: spectral.GridSpec
    mp: rmt.MpContext
    correction_mode: str = "estimated"
    lag_window: specdens.LagWindowSpec | None = None
    calibration: str = "chi2"
    level: float = 0.1
    sidedness: str = "one-sided"
    weight: str = "omega"

    def __post_init__(self):
        check_choice(self.correction_mode, "correction_mode", CORRECTION_MODES)
        check_choice(self.calibration, "calibration", CALIBRATIONS)
        check_choice(self.sidedness, "sidedness", SIDEDNESS)
        check_choice(self.weight, "weight", rmt.SIGMA2_WEIGHTS)
        check_real(self.level, "level", low=0.0, high=1.0, low_open=True, high_open=True)
        if self.grid.b != self.mp.b or self.grid.n != self.mp.n:
            raise ConfigurationError("grid and MP context disagree on (b, n)")
        if self.lag_window is None:
            object.__setattr__(self, "lag_window", specdens.LagWindowSpec.default(self.grid.n))

    @classmethod
    def build(cls, m, n, b, f="quadratic", delta=0.0, ratio="b_plus_1", **kwargs):
        grid = spectral.build_grid(n, b, delta)
        mp = rmt.MpContext.from_dims(m, b, n, ratio)
        return cls(f=rmt.TestFunction.from_name(f), grid=grid, mp=mp, **kwargs)

    @property
    def sigma(self):
        return float(np.sqrt(rmt.sigma2(self.f, self.mp.c, self.weight)))


@dataclass
class PanelStatistics:
    """Per-frequency intermediate results for one panel."""

    indices: np.ndarray
    f_hat: np.ndarray
    r_values: np.ndarray
    theta: np.ndarray
    xi0: np.ndarray
    sigma: float
    n_clamped: int = 0
    lambda_max: np.ndarray | None = None


def panel_statistics(panel, config, r_oracle=None, keep_lambda_max=False, indices=None):
    """Compute ``f_hat``, ``theta`` and ``xi0`` at every grid frequency.

    Parameters
    ----------
    panel : array, shape (M, N)
    config : LssConfig
    r_oracle : array_like or callable, optional
        True ``r`` at the grid frequencies (or a function of ``nu``);
        required when ``config.correction_mode == "oracle"``.
    keep_lambda_max : bool
        Also record the largest coherence eigenvalue per frequency.
    indices : array_like of int, optional
        Fourier indices to evaluate instead of the grid.
    """
    panel = check_panel(panel, min_channels=2)
    m, n = panel.shape
    grid, mp, f = config.grid, config.mp, config.f
    if n != grid.n:
        raise ShapeError(f"panel has {n} samples, grid expects {grid.n}")
    if abs(m / mp.n_eff - mp.c) > 1e-12:
        raise ConfigurationError(f"panel has {m} channels, MP context expects c = {mp.c}")
    idx = grid.indices if indices is None else np.atleast_1d(np.asarray(indices, dtype=np.int64))
    nus = idx / n
    n_clamped = 0
    if config.correction_mode == "none":
        r = np.zeros(idx.size)
    elif config.correction_mode == "oracle":
        if r_oracle is None:
            raise ConfigurationError("oracle correction needs the true spectral densities")
        r = np.asarray(r_oracle(nus) if callable(r_oracle) else r_oracle, dtype=float)
        r = np.broadcast_to(r, idx.shape).astype(float)
    else:
        r, n_clamped = specdens.rhat(panel, nus, config.lag_window, return_clamped=True)
    freq = spectral.dft_panel(panel)
    f_hat = np.empty(idx.size)
    lam_max = np.empty(idx.size) if keep_lambda_max else None
    for i, k in enumerate(idx):
        c_hat = spectral.coherence_at(freq, k, grid.b).c_hat
        f_hat[i] = lss(c_hat, f)
        if keep_lambda_max:
            lam_max[i] = np.linalg.eigvalsh(c_hat)[-1]
    sigma = config.sigma
    th = np.array([theta(fh, mp, rv, f) for fh, rv in zip(f_hat, r)])
    return PanelStatistics(
        indices=idx, f_hat=f_hat, r_values=np.asarray(r, dtype=float), theta=th,
        xi0=xi0(th, grid.b, sigma), sigma=sigma, n_clamped=int(n_clamped),
        lambda_max=lam_max,
    )


# -- estimator ---------------------------------------------------------------


class CoherenceIndependenceTest(BaseEstimator):
    """Test mutual independence of the channels of a complex time series.

    Parameters
    ----------
    f : str or TestFunction, default "quadratic"
        Test function: ``"quadratic"`` for ``(lambda - 1)**2``, ``"log"``,
        ``"cubic"`` or ``"poly:a0,a1,..."``.
    b : int or None
        Even smoothing span.  ``None`` uses ``floor(M / c)`` rounded down to
        even.
    c : float
        Target aspect ratio when ``b`` is None.
    delta : float
        Grid-thinning exponent.
    correction : {"estimated", "oracle", "none"}
        Source of ``r(nu)`` in the bias term.
    lag_window : int or None
        Truncation ``L``; default ``floor(N**(1/4))``.
    level : float
        Test level.
    calibration : {"chi2", "normal", "gumbel"}
        Headline decision: ``xi2`` against chi2, ``xi1`` against the
        normal, or ``xi3`` against Gumbel.
    sidedness : {"one-sided", "two-sided"}
    ratio : {"b_plus_1", "b"}
        Convention for the aspect ratio, ``M / (B + 1)`` or ``M / B``.

    Attributes
    ----------
    b_ : int
    grid_ : GridSpec
    mp_ : MpContext
    sigma_ : float
    frequencies_ : ndarray
    f_hat_, r_, theta_, xi0_ : ndarray
        Per-frequency values.
    outcomes_ : dict of TestOutcome
    p_value_ : float
    reject_ : bool
        Decision of the headline statistic.

    Examples
    --------
    >>> import numpy as np
    >>> from cohertest.simulate import gen_innovations
    >>> X = gen_innovations(20, 400, seed=3)
    >>> test = CoherenceIndependenceTest(b=40, correction="none").fit(X)
    >>> test.xi0_.shape
    (9,)
    """

    _headline = {"chi2": "xi2/chi2", "normal": "xi1/normal", "gumbel": "xi3/gumbel"}

    def __init__(self, f="quadratic", b=None, c=0.5, delta=0.0, correction="estimated",
                 lag_window=None, level=0.1, calibration="chi2", sidedness="one-sided",
                 ratio="b_plus_1"):
        self.f = f
        self.b = b
        self.c = c
        self.delta = delta
        self.correction = correction
        self.lag_window = lag_window
        self.level = level
        self.calibration = calibration
        self.sidedness = sidedness
        self.ratio = ratio

    def _config(self, m, n):
        if self.b is None:
            b = floor_ratio(m, check_real(self.c, "c", low=0.0, high=1.0, low_open=True))
            b -= b % 2
        else:
            b = check_int(self.b, "b", low=2)
        lw = None
        if self.lag_window is not None:
            lw = specdens.LagWindowSpec(check_int(self.lag_window, "lag_window", low=1))
        return LssConfig.build(
            m, n, b, f=self.f, delta=self.delta, ratio=self.ratio,
            correction_mode=self.correction, lag_window=lw, calibration=self.calibration,
            level=self.level, sidedness=self.sidedness,
        )

    def fit(self, X, y=None, r_oracle=None):
        """Run the test on panel ``X`` of shape ``(M, N)``.

        ``r_oracle`` supplies the true ``r(nu)`` (array over the grid or a
        callable) for ``correction="oracle"``.
        """
        X = check_panel(X, min_channels=2, min_samples=3)
        config = self._config(*X.shape)
        st = panel_statistics(X, config, r_oracle=r_oracle)
        self.b_ = config.grid.b
        self.grid_ = config.grid
        self.mp_ = config.mp
        self.sigma_ = st.sigma
        self.frequencies_ = st.indices / X.shape[1]
        self.f_hat_ = st.f_hat
        self.r_ = st.r_values
        self.theta_ = st.theta
        self.xi0_ = st.xi0
        self.n_clamped_ = st.n_clamped
        self.outcomes_ = all_outcomes(st.xi0, config.level, config.sidedness)
        head = self.outcomes_.get(self._headline[config.calibration])
        if head is None:
            raise ConfigurationError(f"{config.calibration} calibration needs K' >= 2")
        self.p_value_ = head.p_value
        self.reject_ = head.reject
        return self

    def summary(self):
        """JSON-friendly dictionary of the fitted test."""
        check_is_fitted(self, "outcomes_")
        return {
            "m": int(round(self.mp_.c * self.mp_.n_eff)),
            "n": self.grid_.n,
            "b": self.b_,
            "c": self.mp_.c,
            "k_prime": self.grid_.k_prime,
            "sigma2": self.sigma_**2,
            "correction": self.correction,
            "n_clamped": self.n_clamped_,
            "headline": self._headline[self.calibration],
            "p_value": self.p_value_,
            "reject": self.reject_,
            "outcomes": {k: v.to_dict() for k, v in self.outcomes_.items()},
        }
