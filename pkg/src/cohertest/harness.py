"""Monte Carlo size and power experiments, and power-analysis formulas.

A replication is a pure function of ``(config, n, rep_index)``: its
innovations come from the stream ``derive_seed(master, n, rep_index, tag)``
(see :mod:`cohertest.seeding`) and configuration-level draws from the
master seed alone, so results do not depend on the
number of workers.  Rejection rates are reduced sequentially in
replication order.
"""
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import simulate, specdens, spectral, stats
from ._validation import check_choice, check_int, check_real
from .errors import CohertestError, ConfigurationError, ParameterError
from .rmt import RATIO_CONVENTIONS, SIGMA2_WEIGHTS

FAILURE_FLAG_RATE = 0.01


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo experiment.

    Parameters
    ----------
    n_list : tuple of int
        Sample sizes; one table block per entry.
    alpha, c : float
        ``M = floor(N**alpha)``, ``B = floor(M / c)`` (even).
    reps : int
    level : float
    dgp : DgpSpec
    f : str
        Test function name.
    correction_mode : {"estimated", "oracle", "none"}
    delta : float
    lag_exponent : float
        ``L = floor(N**lag_exponent)`` for the estimated correction.
    ratio, weight, sidedness
        Passed to :class:`cohertest.stats.LssConfig`.
    master_seed : int
    threads : int
        Worker processes; 1 runs in-process.
    """

    n_list: tuple = (1000,)
    alpha: float = 2.0 / 3.0
    c: float = 0.5
    reps: int = 100
    level: float = 0.1
    dgp: simulate.DgpSpec = field(default_factory=simulate.DgpSpec)
    f: str = "quadratic"
    correction_mode: str = "estimated"
    delta: float = 0.0
    lag_exponent: float = 0.25
    ratio: str = "b_plus_1"
    weight: str = "omega"
    sidedness: str = "one-sided"
    master_seed: int = 0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(int(v) for v in np.atleast_1d(self.n_list)))
        if not self.n_list:
            raise ConfigurationError("n_list is empty")
        for n in self.n_list:
            check_int(n, "n", low=4)
        check_int(self.reps, "reps", low=1)
        check_int(self.threads, "threads", low=1)
        check_int(self.master_seed, "master_seed", low=0)
        check_real(self.level, "level", low=0.0, high=1.0, low_open=True, high_open=True)
        check_real(self.lag_exponent, "lag_exponent", low=0.0, high=1.0, low_open=True)
        check_choice(self.correction_mode, "correction_mode", stats.CORRECTION_MODES)
        check_choice(self.ratio, "ratio", RATIO_CONVENTIONS)
        check_choice(self.weight, "weight", SIGMA2_WEIGHTS)
        check_choice(self.sidedness, "sidedness", stats.SIDEDNESS)
        if not isinstance(self.dgp, simulate.DgpSpec):
            raise ParameterError("dgp must be a DgpSpec")
        for n in self.n_list:
            self.lss_config(n)

    def dims(self, n):
        return spectral.choose_params(n, self.alpha, self.c)

    def lss_config(self, n):
        m, b = self.dims(n)
        lw = specdens.LagWindowSpec(max(1, int(np.floor(n ** self.lag_exponent + 1e-9))))
        return stats.LssConfig.build(
            m, n, b, f=self.f, delta=self.delta, ratio=self.ratio,
            correction_mode=self.correction_mode, lag_window=lw, level=self.level,
            sidedness=self.sidedness, weight=self.weight,
        )

    def to_dict(self):
        d = asdict(self)
        d["n_list"] = list(self.n_list)
        for k in ("phi", "psi"):
            if isinstance(d["dgp"][k], tuple):
                d["dgp"][k] = list(d["dgp"][k])
        return d


def oracle_r_for(dgp, m, n, seed, nus):
    """True ``r(nu)`` at ``nus`` for ``dgp`` with ``m`` channels."""
    if dgp.kind == "dgp4":
        phi, psi = simulate.dgp_coefficients(dgp, dgp.factors, seed)
        lam = simulate.mixing_matrix(dgp, m, seed)
        return specdens.mixed_oracle_r(np.abs(lam) ** 2, phi, psi, nus,
                                       noise_var=dgp.innovation.second_moment)
    phi, psi = simulate.dgp_coefficients(dgp, m, seed)
    if dgp.kind == "dgp1":
        return specdens.oracle_r(phi, psi, nus)
    a = simulate.mixing_matrix(dgp, m, seed)
    return specdens.mixed_oracle_r(np.abs(a) ** 2, phi, psi, nus)


def run_rep(config, rep_index, n=None, keep_lambda_max=False):
    """Statistics of one replication.

    Returns
    -------
    dict
        ``ok``, ``rep``, ``xi0`` (per-frequency trace) and, for every key
        ``"<statistic>/<calibration>"``, the value plus ``":p"`` and
        ``":reject"`` entries.  Failed replications carry ``error`` instead.
    """
    n = config.n_list[0] if n is None else int(n)
    lcfg = config.lss_config(n)
    m = config.dims(n)[0]
    try:
        panel = simulate.simulate_panel(config.dgp, m, n, config.master_seed, (n, rep_index))
        r_or = None
        if lcfg.correction_mode == "oracle":
            r_or = oracle_r_for(config.dgp, m, n, config.master_seed, lcfg.grid.frequencies)
        st = stats.panel_statistics(panel, lcfg, r_oracle=r_or, keep_lambda_max=keep_lambda_max)
        outs = stats.all_outcomes(st.xi0, config.level, config.sidedness)
    except CohertestError as exc:
        return {"ok": False, "rep": rep_index, "error": f"{type(exc).__name__}: {exc}"}
    res = {"ok": True, "rep": rep_index, "xi0": st.xi0, "n_clamped": st.n_clamped}
    for key, o in outs.items():
        res[key] = o.value
        res[key + ":p"] = o.p_value
        res[key + ":reject"] = o.reject
    if keep_lambda_max:
        res["lambda_max"] = st.lambda_max
    return res


def _run_block(args):
    config, n, reps, keep = args
    return [run_rep(config, r, n, keep) for r in reps]


def run_reps(config, n, reps=None, threads=None, keep_lambda_max=False):
    """All replications for one ``n``, in replication order."""
    reps = range(config.reps) if reps is None else reps
    reps = list(reps)
    threads = config.threads if threads is None else int(threads)
    if threads <= 1 or len(reps) < 2:
        return _run_block((config, n, reps, keep_lambda_max))
    chunks = [reps[i::threads] for i in range(threads)]
    results = [None] * len(reps)
    pos = {r: i for i, r in enumerate(reps)}
    with ProcessPoolExecutor(max_workers=threads) as ex:
        for block in ex.map(_run_block, [(config, n, ch, keep_lambda_max) for ch in chunks]):
            for res in block:
                results[pos[res["rep"]]] = res
    return results


@dataclass
class McRow:
    n: int
    m: int
    b: int
    dgp: str
    statistic: str
    calibration: str
    rate: float
    reps: int
    failures: int
    mean: float
    std: float
    flagged: bool
    wall_seconds: float


@dataclass
class McReport:
    """Rejection-rate table with provenance."""

    rows: list
    config: dict
    master_seed: int
    failures: dict = field(default_factory=dict)

    def row(self, statistic, calibration, n=None):
        for r in self.rows:
            if r.statistic == statistic and r.calibration == calibration and (n is None or r.n == n):
                return r
        raise KeyError((statistic, calibration, n))

    CSV_COLUMNS = ("n", "dgp", "statistic", "calibration", "rate", "reps", "failures",
                   "wall_seconds")

    def csv_text(self, full_precision=False, timing=False):
        fmt = "%.17g" if full_precision else "%.4g"
        lines = [",".join(self.CSV_COLUMNS)]
        for r in self.rows:
            wall = fmt % r.wall_seconds if timing else ""
            lines.append(f"{r.n},{r.dgp},{r.statistic},{r.calibration},{fmt % r.rate},"
                         f"{r.reps},{r.failures},{wall}")
        return "\n".join(lines) + "\n"

    def to_csv(self, path, full_precision=False, timing=False):
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text(full_precision, timing))

    def to_dict(self):
        return {"config": self.config, "master_seed": self.master_seed,
                "rows": [asdict(r) for r in self.rows], "failures": self.failures}


def summarize(results, n, config, wall=0.0):
    """Reduce replication results (in order) to table rows."""
    ok = [r for r in results if r["ok"]]
    failures = len(results) - len(ok)
    m, b = config.dims(n)
    rows = []
    for stat, cal in stats.STATISTICS:
        key = f"{stat}/{cal}"
        vals = np.array([r[key] for r in ok if key in r], dtype=float)
        rej = np.array([r[key + ":reject"] for r in ok if key in r], dtype=float)
        if vals.size == 0:
            continue
        rows.append(McRow(
            n=n, m=m, b=b, dgp=config.dgp.kind, statistic=stat, calibration=cal,
            rate=float(np.sum(rej) / rej.size), reps=int(vals.size), failures=failures,
            mean=float(np.mean(vals)), std=float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0,
            flagged=failures > FAILURE_FLAG_RATE * len(results), wall_seconds=wall,
        ))
    return rows


def mc_table(config, threads=None):
    """Run every ``n`` in ``config.n_list`` and tabulate rejection rates."""
    rows, fails = [], {}
    for n in config.n_list:
        t0 = time.perf_counter()
        results = run_reps(config, n, threads=threads)
        wall = time.perf_counter() - t0
        bad = [r for r in results if not r["ok"]]
        if len(bad) == len(results):
            raise CohertestError(f"all {len(results)} replications failed at n={n}: {bad[0]['error']}")
        fails[n] = [r["error"] for r in bad[:10]]
        rows.extend(summarize(results, n, config, wall))
    return McReport(rows=rows, config=config.to_dict(), master_seed=config.master_seed,
                    failures=fails)


# -- power analysis ----------------------------------------------------------


def _mixed_gram(a_matrix, d_diag):
    a = np.asarray(a_matrix, dtype=complex)
    d = np.asarray(d_diag, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError("a_matrix must be square")
    if d.shape != (a.shape[0],):
        d = np.broadcast_to(d, (a.shape[0],)).astype(float)
    if np.any(d <= 0):
        raise ParameterError("d_diag must be positive")
    if np.any(np.all(a == 0, axis=0)):
        raise ParameterError("a_matrix has a zero column")
    g = a.conj().T @ (d[:, None] * a)  # g_ij = a_i* D a_j
    return 0.5 * (g + g.conj().T)


def _h_matrix(a_matrix, d_diag):
    g = _mixed_gram(a_matrix, d_diag)
    inv = 1.0 / np.sqrt(g.diagonal().real)
    h = g * np.outer(inv, inv)
    np.fill_diagonal(h, 1.0)
    return h


def tr_h2_minus_1(a_matrix, d_diag):
    """``(1/M) sum_{i != j} |a_i* D a_j|**2 / ((a_i* D a_i)(a_j* D a_j))``.

    ``a_i`` are the columns of ``a_matrix``; for the alternative
    ``y = A x`` pass ``A*`` so that the columns are the rows of ``A``.
    """
    h = _h_matrix(a_matrix, d_diag)
    m = h.shape[0]
    off = np.abs(h) ** 2
    np.fill_diagonal(off, 0.0)
    return float(off.sum() / m)


def mu1_moments(a_matrix, d_diag, c):
    """First two moments of the limiting spectral law under the alternative."""
    c = check_real(c, "c", low=0.0, high=1.0, low_open=True, high_open=True)
    h = _h_matrix(a_matrix, d_diag)
    m = h.shape[0]
    first = float(np.trace(h).real / m)
    second = float(np.vdot(h, h).real / m + c * first**2)
    return first, second
