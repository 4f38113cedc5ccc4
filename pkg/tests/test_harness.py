import numpy as np
import pytest

from cohertest import harness, simulate
from cohertest.errors import CohertestError, ConfigurationError, ParameterError
from cohertest.simulate import DgpSpec


def _config(**kw):
    base = dict(n_list=(500,), reps=8, master_seed=3)
    base.update(kw)
    return harness.McConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        _config(n_list=())
    with pytest.raises(ConfigurationError):
        _config(correction_mode="exact")
    with pytest.raises(ParameterError):
        _config(dgp="dgp1")
    assert _config().dims(1000) == (100, 200)


def test_config_to_dict_is_json_ready():
    import json
    d = _config(dgp=DgpSpec("dgp1", phi=(0.1, 0.2), psi=0.0)).to_dict()
    assert json.loads(json.dumps(d))["dgp"]["phi"] == [0.1, 0.2]


def test_run_rep_deterministic():
    cfg = _config()
    a = harness.run_rep(cfg, 5)
    b = harness.run_rep(cfg, 5)
    assert a["ok"]
    np.testing.assert_array_equal(a["xi0"], b["xi0"])
    assert a == {**b, "xi0": a["xi0"]}
    assert not np.array_equal(a["xi0"], harness.run_rep(cfg, 6)["xi0"])


def test_run_rep_records_failure(monkeypatch):
    def zero_panel(spec, m, n, seed, rep=0):
        out = simulate.gen_innovations(m, n, seed=1)
        out[0] = 0.0
        return out

    monkeypatch.setattr(simulate, "simulate_panel", zero_panel)
    res = harness.run_rep(_config(), 0)
    assert not res["ok"] and "DegenerateChannelError" in res["error"]
    with pytest.raises(CohertestError):
        harness.mc_table(_config(reps=2))


def test_failures_flag_rows(monkeypatch):
    real = simulate.simulate_panel

    def sometimes_zero(spec, m, n, seed, rep=0):
        out = real(spec, m, n, seed, rep)
        if rep[1] == 0:
            out[0] = 0.0
        return out

    monkeypatch.setattr(simulate, "simulate_panel", sometimes_zero)
    report = harness.mc_table(_config(reps=10))
    row = report.row("xi1", "normal")
    assert row.failures == 1 and row.reps == 9 and row.flagged
    assert report.failures[500]


def test_null_xi1_finite_and_bounded():
    cfg = _config(n_list=(1000,), reps=300, master_seed=4)
    x1 = np.array([r["xi1/normal"] for r in harness.run_reps(cfg, 1000)])
    assert np.all(np.isfinite(x1))
    assert np.mean(np.abs(x1) < 10) >= 0.999


def test_single_rep_rates():
    report = harness.mc_table(_config(reps=1))
    assert len(report.rows) == 4
    assert all(r.rate in (0.0, 1.0) for r in report.rows)


def test_report_csv(tmp_path):
    report = harness.mc_table(_config(reps=3))
    path = tmp_path / "t.csv"
    report.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "n,dgp,statistic,calibration,rate,reps,failures,wall_seconds"
    assert len(lines) == 5 and lines[1].endswith(",")
    report.to_csv(path, timing=True)
    assert not path.read_text().splitlines()[1].endswith(",")


def test_parallel_matches_serial():
    cfg = _config(reps=6)
    serial = harness.mc_table(cfg, threads=1)
    parallel = harness.mc_table(cfg, threads=2)
    assert serial.csv_text(full_precision=True) == parallel.csv_text(full_precision=True)
    for a, b in zip(serial.rows, parallel.rows):
        assert (a.mean, a.std) == (b.mean, b.std)


def test_size_moves_toward_level():
    cfg = _config(n_list=(1000, 4000), reps=300, master_seed=31)
    report = harness.mc_table(cfg)
    for stat, cal in harness.stats.STATISTICS:
        small = report.row(stat, cal, 1000).rate
        large = report.row(stat, cal, 4000).rate
        assert abs(large - cfg.level) <= abs(small - cfg.level) + 0.03


def test_power_grows_with_mixing():
    weak = harness.mc_table(_config(n_list=(2000,), reps=100, dgp=DgpSpec("dgp2", sigma=0.05)))
    strong = harness.mc_table(_config(n_list=(2000,), reps=100, dgp=DgpSpec("dgp2", sigma=0.5)))
    for a, b in zip(weak.rows, strong.rows):
        assert b.rate >= a.rate


def test_dgp3_power():
    cfg = _config(n_list=(1000,), reps=500, dgp=DgpSpec("dgp3", sigma=1.0), master_seed=5)
    assert harness.mc_table(cfg).row("xi1", "normal").rate >= 0.95


def test_oracle_mode_runs_for_every_dgp():
    for kind in ("dgp1", "dgp2", "dgp3", "dgp4"):
        cfg = _config(reps=2, correction_mode="oracle", dgp=DgpSpec(kind, sigma=0.2))
        assert all(r["ok"] for r in harness.run_reps(cfg, 500))


# -- power-analysis formulas ---------------------------------------------------------


def test_tr_h2_examples():
    assert harness.tr_h2_minus_1(np.eye(6), np.ones(6)) == 0.0
    a = simulate.ar1_mixing_root(40, 0.0).conj().T
    assert harness.tr_h2_minus_1(a, np.ones(40)) == 0.0
    a = simulate.ar1_mixing_root(500, 0.5).conj().T
    assert abs(harness.tr_h2_minus_1(a, np.ones(500)) - 2 / 3) <= 0.02
    with pytest.raises(ParameterError):
        harness.tr_h2_minus_1(np.array([[1.0, 0.0], [0.0, 0.0]]), np.ones(2))


def test_mu1_moments():
    first, second = harness.mu1_moments(np.eye(5), np.ones(5), 0.3)
    assert (first, second) == (1.0, pytest.approx(1.3))
    rng = np.random.default_rng(1)
    a = rng.normal(size=(30, 30)) + 1j * rng.normal(size=(30, 30))
    d = rng.uniform(0.5, 2.0, 30)
    first, second = harness.mu1_moments(a, d, 0.4)
    assert first == pytest.approx(1.0, abs=1e-14)
    # for the quadratic f the alternative mean shift equals (1/M) Tr H**2 - 1
    assert (second - 0.4) - 1.0 == pytest.approx(harness.tr_h2_minus_1(a, d), abs=1e-10)


def test_tr_h2_matches_brute_force():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    d = rng.uniform(0.5, 2.0, 8)
    total = 0.0
    for i in range(8):
        for j in range(8):
            if i != j:
                num = abs(a[:, i].conj() @ (d * a[:, j])) ** 2
                den = (a[:, i].conj() @ (d * a[:, i])).real * (a[:, j].conj() @ (d * a[:, j])).real
                total += num / den
    assert harness.tr_h2_minus_1(a, d) == pytest.approx(total / 8, rel=1e-12)


def test_oracle_r_for_dgp1_is_independent_channel_formula():
    nus = np.array([0.1, 0.3])
    r = harness.oracle_r_for(DgpSpec(), 10, 1000, 0, nus)
    np.testing.assert_allclose(r, harness.specdens.oracle_r(0.1, 0.5, nus))
