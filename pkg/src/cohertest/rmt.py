"""Deterministic random-matrix quantities for the coherence test.

Marchenko-Pastur law, its Stieltjes transforms, the zero-mass
distributions D (bias) and D_l (variance series), the window moment
``v_n`` and the asymptotic variance ``sigma2``.

Pairings with D and D_l are computed exactly by the change of variables
``z = psi(w) = (w + 1)(w + c) / w``: the Stieltjes kernels pull back to
monomials in ``w`` so every pairing reduces to a Laurent coefficient of
``f(psi(w))``.  :func:`contour_pairing` evaluates the same pairings by
brute-force quadrature on a rectangle in the ``z`` plane and serves as
an independent check.
"""
from dataclasses import dataclass
from math import comb

import numpy as np

from ._validation import check_choice, check_int, check_real
from .errors import (
    CapabilityError,
    DegenerateVarianceError,
    DomainError,
    ParameterError,
)

MAX_MOMENT = 12
RATIO_CONVENTIONS = ("b_plus_1", "b")


def _check_c(c):
    return check_real(c, "c", low=0.0, high=1.0, low_open=True, high_open=True)


def support(c):
    """Return ``(lambda_minus, lambda_plus)`` for aspect ratio ``c``."""
    c = _check_c(c)
    r = np.sqrt(c)
    return (1.0 - r) ** 2, (1.0 + r) ** 2


@dataclass(frozen=True)
class MpContext:
    """Aspect ratio and window geometry for one test configuration.

    Parameters
    ----------
    c : float
        Aspect ratio ``c_N`` used for all Marchenko-Pastur quantities.
    b : int
        Smoothing span (even).
    n : int
        Sample size.
    n_eff : int, optional
        Number of periodogram terms behind ``c``; enters the ``1/(c n_eff)``
        recentering term.  Defaults to ``b + 1``.
    """

    c: float
    b: int
    n: int
    n_eff: int | None = None

    def __post_init__(self):
        _check_c(self.c)
        check_int(self.b, "b", low=0)
        check_int(self.n, "n", low=1)
        if self.n_eff is None:
            object.__setattr__(self, "n_eff", self.b + 1)
        check_int(self.n_eff, "n_eff", low=1)

    @classmethod
    def from_dims(cls, m, b, n, ratio="b_plus_1"):
        """Build the context for an ``m``-channel panel smoothed over ``b + 1`` bins.

        ``ratio="b_plus_1"`` (default) sets ``c = m / (b + 1)``, the aspect
        ratio of the ``m x (b + 1)`` periodogram matrix.  ``ratio="b"`` uses
        ``c = m / b``.
        """
        check_choice(ratio, "ratio", RATIO_CONVENTIONS)
        m = check_int(m, "m", low=1)
        b = check_int(b, "b", low=1)
        n_eff = b + 1 if ratio == "b_plus_1" else b
        c = m / n_eff
        if not 0.0 < c < 1.0:
            raise ParameterError(f"aspect ratio m/{n_eff} = {c} must lie in (0, 1)")
        return cls(c=c, b=b, n=n, n_eff=n_eff)

    @property
    def lambda_minus(self):
        return support(self.c)[0]

    @property
    def lambda_plus(self):
        return support(self.c)[1]

    @property
    def v_n(self):
        return v_n(self.b, self.n)


# -- Marchenko-Pastur law --------------------------------------------------


def mp_density(c, lam):
    """Marchenko-Pastur density with ratio ``c`` (zero outside the support)."""
    lm, lp = support(c)
    lam = np.asarray(lam, dtype=float)
    inside = (lam > lm) & (lam < lp)
    out = np.zeros_like(lam)
    li = lam[inside]
    out[inside] = np.sqrt((lp - li) * (li - lm)) / (2.0 * np.pi * c * li)
    return out if out.ndim else float(out)


def mp_moment(c, k):
    """``int lambda**k dmu_c`` through Narayana numbers, ``k <= 12``."""
    _check_c(c)
    k = check_int(k, "k", low=0, high=MAX_MOMENT)
    if k == 0:
        return 1.0
    return float(sum(c**r / (r + 1) * comb(k, r) * comb(k - 1, r) for r in range(k)))


# -- Stieltjes transforms --------------------------------------------------


def _as_complex(z):
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise DomainError("z must be finite")
    return z


def _check_off_support(c, z):
    lm, lp = support(c)
    on = (z.imag == 0) & (z.real >= lm) & (z.real <= lp)
    if np.any(on):
        raise DomainError(f"z on the support [{lm}, {lp}]")


def _unwrap(x):
    return complex(x) if np.ndim(x) == 0 else x


def stieltjes_t(c, z):
    """Stieltjes transform ``t(z)`` of the Marchenko-Pastur law.

    Root of ``c z t**2 + (z + c - 1) t + 1 = 0`` continuous with ``-1/z`` at
    infinity.  Written in rationalized form so that ``z = 0`` is regular
    (``t(0) = 1 / (1 - c)``).
    """
    c = _check_c(c)
    z = _as_complex(z)
    _check_off_support(c, z)
    lm, lp = support(c)
    # sqrt(z - lm) * sqrt(z - lp) with principal roots has its cut on [lm, lp]
    sq = np.sqrt(z - lm) * np.sqrt(z - lp)
    return _unwrap(2.0 / ((1.0 - c - z) - sq))


def stieltjes_ttilde(c, z):
    """Stieltjes transform of ``c mu_c + (1 - c) delta_0``."""
    z = _as_complex(z)
    t = np.asarray(stieltjes_t(c, z))
    if np.any(z == 0):
        raise DomainError("ttilde has a pole at z = 0")
    return _unwrap(-1.0 / (z * (1.0 + c * t)))


def ztt(c, z):
    """``z t(z) ttilde(z) = -t / (1 + c t)``, regular at ``z = 0``."""
    t = np.asarray(stieltjes_t(c, z))
    return _unwrap(-t / (1.0 + c * t))


def p_of_z(c, z):
    """Stieltjes transform of the bias distribution D."""
    zeta = np.asarray(ztt(c, z))
    return _unwrap(-c * zeta**3 / (1.0 - c * zeta**2))


def s_of_z(c, z):
    """``s(z)``, the Stieltjes transform of D_0 in the variance series."""
    zeta = np.asarray(ztt(c, z))
    return _unwrap(np.sqrt(c) * zeta**2 / (1.0 - c * zeta**2))


def dl_transform(c, z, l):
    """Stieltjes transform of D_l: ``s(z) (sqrt(c) z t ttilde)**l``."""
    l = check_int(l, "l", low=0)
    zeta = np.asarray(ztt(c, z))
    s = np.sqrt(c) * zeta**2 / (1.0 - c * zeta**2)
    return _unwrap(s * (np.sqrt(c) * zeta) ** l)


def omega(c, z1, z2):
    """Two-point kernel ``s(z1) s(z2) ((1 - c zeta1 zeta2)**-2 - 1)``."""
    zeta1 = np.asarray(ztt(c, z1))
    zeta2 = np.asarray(ztt(c, z2))
    s1 = np.sqrt(c) * zeta1**2 / (1.0 - c * zeta1**2)
    s2 = np.sqrt(c) * zeta2**2 / (1.0 - c * zeta2**2)
    x = c * zeta1 * zeta2
    return _unwrap(s1 * s2 * (1.0 / (1.0 - x) ** 2 - 1.0))


# -- test functions --------------------------------------------------------


class TestFunction:
    """Test function ``f`` applied to coherence eigenvalues.

    Two kinds are supported: polynomials (coefficients in increasing
    degree) and ``scale * log``.  Use the constructors
    :meth:`quadratic`, :meth:`polynomial` and :meth:`log`.
    """

    __test__ = False  # not a pytest class

    def __init__(self, kind, coeffs=None, scale=1.0, name=None):
        if kind not in ("poly", "log"):
            raise CapabilityError(f"unsupported test-function kind {kind!r}")
        self.kind = kind
        if kind == "poly":
            coeffs = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
            self.coeffs = coeffs if coeffs.size else np.zeros(1)
            self.scale = 1.0
        else:
            self.coeffs = None
            self.scale = float(scale)
        self.name = name or self._default_name()

    def _default_name(self):
        if self.kind == "log":
            return "log" if self.scale == 1.0 else f"{self.scale:g}*log"
        return "poly(" + ",".join(f"{a:g}" for a in self.coeffs) + ")"

    @classmethod
    def quadratic(cls):
        """``(lambda - 1)**2``, the Frobenius-norm statistic."""
        return cls("poly", [1.0, -2.0, 1.0], name="quadratic")

    @classmethod
    def polynomial(cls, coeffs, name=None):
        return cls("poly", coeffs, name=name)

    @classmethod
    def log(cls):
        return cls("log", name="log")

    @classmethod
    def from_name(cls, name):
        """Parse ``quadratic``, ``log``, ``cubic`` or ``poly:a0,a1,...``."""
        if isinstance(name, TestFunction):
            return name
        if name == "quadratic":
            return cls.quadratic()
        if name == "log":
            return cls.log()
        if name == "cubic":
            return cls("poly", [0.0, 0.0, 0.0, 1.0], name="cubic")
        if isinstance(name, str) and name.startswith("poly:"):
            try:
                coeffs = [float(a) for a in name[5:].split(",")]
            except ValueError as exc:
                raise ParameterError(f"bad polynomial spec {name!r}") from exc
            return cls.polynomial(coeffs, name=name)
        raise ParameterError(f"unknown test function {name!r}")

    def __mul__(self, a):
        a = float(a)
        if self.kind == "poly":
            return TestFunction("poly", a * self.coeffs)
        return TestFunction("log", scale=a * self.scale)

    __rmul__ = __mul__

    def __repr__(self):
        return f"TestFunction({self.name!r})"

    @property
    def degree(self):
        return len(self.coeffs) - 1 if self.kind == "poly" else None

    def eval(self, lam):
        lam = np.asarray(lam)
        if self.kind == "poly":
            return np.polynomial.polynomial.polyval(lam, self.coeffs)
        return self.scale * np.log(lam)

    def lss_shortcut(self, c_hat):
        """``(1/M) Tr f(C)`` without eigenvalues, for degree <= 2.

        Uses ``Tr C = M`` and ``Tr C**2 = ||C||_F**2``.  Returns ``None``
        when no shortcut applies.
        """
        if self.kind != "poly" or self.degree > 2:
            return None
        a = np.zeros(3)
        a[: len(self.coeffs)] = self.coeffs
        m = c_hat.shape[0]
        fro2 = np.vdot(c_hat, c_hat).real
        return float(a[0] + a[1] + a[2] * fro2 / m)

    # Laurent coefficients of f(psi(w)), psi(w) = w + (1 + c) + c / w
    def laurent(self, c, j):
        """Coefficient of ``w**j`` in ``f(psi(w))`` on ``c < |w| < 1``."""
        j = int(j)
        if self.kind == "log":
            if j < 1:
                raise CapabilityError("only positive log coefficients are needed")
            # log psi = log(1 + w) + log(1 + c/w)
            return self.scale * (-1.0) ** (j + 1) / j
        table = _poly_laurent(tuple(self.coeffs), float(c))
        d = self.degree
        return float(table[j + d]) if -d <= j <= d else 0.0

    def mp_integral(self, c):
        """``int f dmu_c``."""
        c = _check_c(c)
        if self.kind == "log":
            return self.scale * ((c - 1.0) / c * np.log1p(-c) - 1.0)
        if self.degree > MAX_MOMENT:
            raise CapabilityError(f"polynomial degree above {MAX_MOMENT}")
        return float(sum(a * mp_moment(c, k) for k, a in enumerate(self.coeffs)))

    def d_pairing(self, c):
        """``<D, f>`` as ``c`` times the ``w**2`` coefficient."""
        c = _check_c(c)
        return c * self.laurent(c, 2)

    def dl_pairing(self, c, l):
        """``<D_l, f>`` for ``l >= 1`` (negatively oriented contour)."""
        c = _check_c(c)
        l = check_int(l, "l", low=1)
        # "+ 0.0" turns a signed zero into 0.0
        return -(c ** ((l + 1) / 2.0)) * self.laurent(c, l + 1) + 0.0

    def max_l(self, c):
        """Largest ``l`` used in the variance series.

        Exact for polynomials (``<D_l, f> = 0`` for ``l >= degree``).  For
        ``log`` the terms decay like ``c**l``; the cut keeps the neglected
        tail below ``1e-17`` relative.
        """
        if self.kind == "poly":
            return max(self.degree - 1, 0)
        c = _check_c(c)
        return int(min(20000, np.ceil(np.log(1e-17 * (1.0 - c)) / np.log(c)) + 2))


_LAURENT_CACHE = {}


def _poly_laurent(coeffs, c):
    key = (coeffs, c)
    hit = _LAURENT_CACHE.get(key)
    if hit is not None:
        return hit
    d = len(coeffs) - 1
    psi = np.array([c, 1.0 + c, 1.0])  # powers -1, 0, 1
    out = np.zeros(2 * d + 1)
    power = np.array([1.0])
    for k, a in enumerate(coeffs):
        if k > 0:
            power = np.convolve(power, psi)
        out[d - k : d + k + 1] += a * power
    if len(_LAURENT_CACHE) > 256:
        _LAURENT_CACHE.clear()
    _LAURENT_CACHE[key] = out
    return out


def _as_test_function(f):
    if isinstance(f, TestFunction):
        return f
    if isinstance(f, str):
        return TestFunction.from_name(f)
    raise CapabilityError(f"unsupported test function {f!r}")


def mp_integral(f, c):
    return _as_test_function(f).mp_integral(c)


def d_pairing(f, c):
    return _as_test_function(f).d_pairing(c)


def dl_pairing(f, c, l):
    return _as_test_function(f).dl_pairing(c, l)


SIGMA2_WEIGHTS = ("omega", "squared")


def sigma2(f, c, weight="omega"):
    """Asymptotic variance of ``B * theta``.

    ``sum_{l >= 1} w_l <D_l, f>**2 / c**2`` with ``w_l = l + 1`` (the
    coefficients of ``(1 - x)**-2 - 1``, i.e. the series of the kernel
    :func:`omega`).  ``weight="squared"`` uses ``(l + 1)**2`` instead.
    """
    f = _as_test_function(f)
    c = _check_c(c)
    check_choice(weight, "weight", SIGMA2_WEIGHTS)
    ls = np.arange(1, f.max_l(c) + 1)
    if ls.size == 0:
        raise DegenerateVarianceError(f"{f.name}: all pairings <D_l, f> vanish")
    d = np.array([f.dl_pairing(c, int(l)) for l in ls])
    if not np.any(d != 0.0):
        raise DegenerateVarianceError(f"{f.name}: all pairings <D_l, f> vanish")
    w = ls + 1.0 if weight == "omega" else (ls + 1.0) ** 2
    # smallest terms first for a stable sum
    return float(np.sum((w * d**2)[::-1]) / c**2)


def v_n(b, n):
    """Second moment of the smoothing window, ``B (B + 2) / (12 N**2)``."""
    b = check_int(b, "b", low=0)
    n = check_int(n, "n", low=1)
    if b % 2:
        raise ParameterError(f"b must be even, got {b}")
    return b * (b + 2) / (12.0 * n * n)


# -- quadrature oracles ------------------------------------------------------


def _rectangle(x0, x1, y0, y1, nodes, rule):
    """Nodes and weights ``dz`` on a positively oriented rectangle."""
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    zs, ws = [], []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        if rule == "trapezoid":
            u = np.linspace(0.0, 1.0, nodes + 1)
            wu = np.full(nodes + 1, 1.0 / nodes)
            wu[[0, -1]] *= 0.5
        else:
            u, wu = np.polynomial.legendre.leggauss(nodes)
            u, wu = 0.5 * (u + 1.0), 0.5 * wu
        zs.append(a + (b - a) * u)
        ws.append((b - a) * wu)
    return np.concatenate(zs), np.concatenate(ws)


def contour_pairing(f, c, l=None, nodes=16000, rule="trapezoid", margin=0.5, left=None):
    """Pairing ``<D, f>`` (``l=None``) or ``<D_l, f>`` by contour quadrature.

    Evaluates ``-(1 / 2 pi i) * oint f(z) S(z) dz`` on the positively oriented
    rectangle ``[lambda_- - margin, lambda_+ + margin] x [-margin, margin]``,
    where ``S`` is the Stieltjes transform of the distribution.  ``left``
    overrides the left edge (needed for ``log``, which requires it > 0).
    """
    f = _as_test_function(f)
    c = _check_c(c)
    check_choice(rule, "rule", ("trapezoid", "gauss"))
    lm, lp = support(c)
    x0 = lm - margin if left is None else left
    z, w = _rectangle(x0, lp + margin, -margin, margin, nodes, rule)
    kern = p_of_z(c, z) if l is None else dl_transform(c, z, l)
    total = np.sum(f.eval(z) * kern * w)
    return float((-total / (2j * np.pi)).real)


def sigma2_double_contour(f, c, nodes=200, margin=0.5, left=None):
    """``sigma2`` from the closed-form kernel :func:`omega`.

    Computes ``(1 / c**2) (1 / 2 pi i)**2 oint oint f(z1) f(z2) omega dz1 dz2``
    with Gauss-Legendre quadrature on each edge.  Independent of the
    truncated series used by :func:`sigma2`.
    """
    f = _as_test_function(f)
    c = _check_c(c)
    lm, lp = support(c)
    x0 = lm - margin if left is None else left
    z, w = _rectangle(x0, lp + margin, -margin, margin, nodes, "gauss")
    g = f.eval(z) * w
    ker = np.asarray(omega(c, z[:, None], z[None, :]))
    total = g @ ker @ g
    return float((total / (2j * np.pi) ** 2).real / c**2)
