"""Acceptance gate: eleven end-to-end properties of the shipped tests.

Each criterion prints one PASS/FAIL line (run with ``pytest -s`` to see
them as they complete) and pins its tolerances as named constants.
Statistical criteria run at fixed master seeds, so outcomes are exact
reruns, not fresh draws; the runtime budget of a criterion is asserted
alongside its substance.

Monte-Carlo forests use 100 trees: large enough that every power and
calibration margin below holds with room, small enough to keep the
whole gate inside its budgets on one core.
"""

import itertools
import json
import math
import time

import numpy as np
from scipy import integrate, stats

from covmet.cli import main as cli_main
from covmet.data import Dataset, write_csv
from covmet.gcm import gcm_statistic, gcm_test
from covmet.multiplicity import TestConfig, bonferroni_adjust, holm_adjust
from covmet.numkit import RngStream, chi2_sf, normal_sf
from covmet.regression import RegressorSpec
from covmet.simharness import (
    DgpSpec,
    run_calibration,
    run_power,
    run_timing,
    two_modality_fixture,
)

MASTER_SEED = 20260817
FOREST = RegressorSpec("random_forest", params={"n_trees": 100})
OLS = RegressorSpec("linear")

CLOSED_FORM_TOL = 1e-10                   # criterion 1
CAL_RATE_LOW, CAL_RATE_HIGH = 0.03, 0.075          # criterion 2
KS_CRIT_1PCT = 1.62762            # asymptotic 1% point of sqrt(n) sup|F_n - F|
PCM_NULL_RATE_MAX = 0.07          # criterion 3
FIG2_PCM_POWER_MIN = 0.8          # criterion 4
FIG2_GCM_POWER_MAX = 0.2
PL_POWER_MIN = 0.9                # criterion 5
QUAD_GCM_RATE_MAX = 0.08          # criterion 6
QUAD_PCM_POWER_MIN = 0.5
SF_TOL = 1e-8                     # criterion 7
DUP_TOL = 1e-8                    # criterion 9


def verdict(num, name, ok, detail):
    print(f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'} {name}: {detail}",
          flush=True)
    assert ok, f"criterion {num} ({name}): {detail}"


def test_criterion_01_statistic_matches_direct_transcription():
    # d = 1: statistic == (sum eps*xi / sqrt(n))^2
    #                     / (mean((eps*xi)^2) - mean(eps*xi)^2)
    began = time.perf_counter()
    gen = np.random.default_rng(MASTER_SEED)
    worst = 0.0
    for _ in range(1000):
        n = int(gen.integers(5, 201))
        eps = gen.standard_normal(n)
        xi = gen.standard_normal(n)
        prod = eps * xi
        direct = (prod.sum() / np.sqrt(n)) ** 2 / (
            np.mean(prod * prod) - np.mean(prod) ** 2
        )
        got = gcm_statistic(eps, xi).statistic
        ok_pair = math.isclose(got, direct, rel_tol=CLOSED_FORM_TOL, abs_tol=CLOSED_FORM_TOL)
        gap = abs(got - direct) / max(1.0, abs(direct))
        worst = max(worst, gap)
        if not ok_pair:
            break
    elapsed = time.perf_counter() - began
    verdict(1, "closed-form equivalence", ok_pair and elapsed < 5.0,
            f"1000 pairs, max rel gap {worst:.2e} (tol {CLOSED_FORM_TOL}), {elapsed:.1f}s")


def test_criterion_02_gcm_calibration_and_null_distribution():
    began = time.perf_counter()
    spec = DgpSpec(name="linear-null", n=300, d_x=1, d_z=2)
    cfg = TestConfig(kind="gcm", base_engine=OLS)
    res = run_calibration(spec, cfg, replicates=400, alpha=0.05,
                          rng=RngStream(seed=MASTER_SEED, stream=2))
    t = np.sort(res.statistics)
    cdf = stats.chi2.cdf(t, 1)
    n = t.shape[0]
    ks = max(np.max(np.arange(1, n + 1) / n - cdf),
             np.max(cdf - np.arange(0, n) / n))
    crit = KS_CRIT_1PCT / np.sqrt(n)
    elapsed = time.perf_counter() - began
    ok = (CAL_RATE_LOW <= res.rejection_rate <= CAL_RATE_HIGH
          and ks < crit and elapsed < 120.0)
    verdict(2, "gcm calibration", ok,
            f"rate {res.rejection_rate:.4f} in [{CAL_RATE_LOW}, {CAL_RATE_HIGH}], "
            f"KS {ks:.4f} < {crit:.4f}, {elapsed:.1f}s")


def test_criterion_03_pcm_is_conservative_on_nonlinear_null():
    began = time.perf_counter()
    spec = DgpSpec(name="nonlinear-null", n=500, d_x=1, d_z=2)
    cfg = TestConfig(kind="pcm", base_engine=FOREST, k=5)
    res = run_calibration(spec, cfg, replicates=200, alpha=0.05,
                          rng=RngStream(seed=MASTER_SEED, stream=3))
    elapsed = time.perf_counter() - began
    ok = res.rejection_rate <= PCM_NULL_RATE_MAX and elapsed < 900.0
    verdict(3, "pcm conservativeness", ok,
            f"rate {res.rejection_rate:.4f} <= {PCM_NULL_RATE_MAX}, {elapsed:.1f}s")


def test_criterion_04_even_signal_separates_the_tests():
    # response depends on x only through an even factor, so the
    # residual-product covariance vanishes while the regression-based
    # projection still finds the direction
    began = time.perf_counter()
    spec = DgpSpec(name="fig2", n=1000)
    pcm = run_power(spec, TestConfig(kind="pcm", base_engine=FOREST, k=10),
                    replicates=50, alpha=0.05,
                    rng=RngStream(seed=MASTER_SEED, stream=4))
    gcm = run_power(spec, TestConfig(kind="gcm", base_engine=FOREST),
                    replicates=50, alpha=0.05,
                    rng=RngStream(seed=MASTER_SEED, stream=5))
    elapsed = time.perf_counter() - began
    ok = (pcm.rejection_rate >= FIG2_PCM_POWER_MIN
          and gcm.rejection_rate <= FIG2_GCM_POWER_MAX and elapsed < 1800.0)
    verdict(4, "even-signal contrast", ok,
            f"pcm power {pcm.rejection_rate:.2f} >= {FIG2_PCM_POWER_MIN}, "
            f"gcm power {gcm.rejection_rate:.2f} <= {FIG2_GCM_POWER_MAX}, "
            f"{elapsed:.1f}s")


def test_criterion_05_gcm_power_in_partially_linear_model():
    began = time.perf_counter()
    spec = DgpSpec(name="partially-linear", n=500, d_z=2, params={"theta": 0.5})
    res = run_power(spec, TestConfig(kind="gcm", base_engine=FOREST),
                    replicates=200, alpha=0.05,
                    rng=RngStream(seed=MASTER_SEED, stream=6))
    elapsed = time.perf_counter() - began
    ok = res.rejection_rate >= PL_POWER_MIN and elapsed < 600.0
    verdict(5, "gcm partially-linear power", ok,
            f"power {res.rejection_rate:.2f} >= {PL_POWER_MIN}, {elapsed:.1f}s")


def test_criterion_06_quadratic_blind_spot():
    # y = x^2 + e with x, z independent: E[(y - 1) x] = E[x^3] = 0, so
    # the covariance test has no power beyond its level, while the
    # projection test rejects
    began = time.perf_counter()
    spec = DgpSpec(name="quadratic-null-for-gcm", n=500, d_z=1)
    gcm = run_calibration(spec, TestConfig(kind="gcm", base_engine=FOREST),
                          replicates=200, alpha=0.05,
                          rng=RngStream(seed=MASTER_SEED, stream=7))
    pcm = run_power(spec, TestConfig(kind="pcm", base_engine=FOREST, k=5),
                    replicates=200, alpha=0.05,
                    rng=RngStream(seed=MASTER_SEED, stream=8))
    elapsed = time.perf_counter() - began
    ok = (gcm.rejection_rate <= QUAD_GCM_RATE_MAX
          and pcm.rejection_rate >= QUAD_PCM_POWER_MIN and elapsed < 900.0)
    verdict(6, "quadratic blind spot", ok,
            f"gcm rate {gcm.rejection_rate:.3f} <= {QUAD_GCM_RATE_MAX}, "
            f"pcm power {pcm.rejection_rate:.2f} >= {QUAD_PCM_POWER_MIN}, "
            f"{elapsed:.1f}s")


def test_criterion_07_survival_functions_match_quadrature():
    began = time.perf_counter()

    def chi2_pdf(t, df):
        return t ** (df / 2.0 - 1.0) * math.exp(-t / 2.0) / (
            2.0 ** (df / 2.0) * math.gamma(df / 2.0)
        )

    worst = 0.0
    for df in (1, 2, 3, 5, 10):
        for x in np.logspace(np.log10(0.05), np.log10(40.0), 40):
            oracle, _ = integrate.quad(chi2_pdf, x, np.inf, args=(df,),
                                       epsabs=1e-12, limit=200)
            worst = max(worst, abs(chi2_sf(float(x), df) - oracle))

    def normal_pdf(t):
        return math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)

    for x in np.linspace(-8.0, 8.0, 200):
        oracle, _ = integrate.quad(normal_pdf, x, np.inf, epsabs=1e-13, limit=200)
        worst = max(worst, abs(normal_sf(float(x)) - oracle))
    elapsed = time.perf_counter() - began
    ok = worst <= SF_TOL and elapsed < 5.0
    verdict(7, "survival functions vs quadrature", ok,
            f"200+200 grid points, max abs gap {worst:.2e} (tol {SF_TOL}), "
            f"{elapsed:.1f}s")


def stepdown_decisions(p, alpha):
    # sequential walk: reject while (m - rank) * p_(rank) <= alpha, stop
    # at the first failure
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    reject = [False] * m
    for rank, idx in enumerate(order):
        if (m - rank) * p[idx] <= alpha:
            reject[idx] = True
        else:
            break
    return reject


def test_criterion_08_holm_matches_stepdown_exhaustively():
    began = time.perf_counter()
    gen = np.random.default_rng(MASTER_SEED)
    checked = 0
    ok = True
    for _ in range(1000):
        m = int(gen.integers(1, 6))
        p = gen.uniform(size=m)
        base = holm_adjust(p)
        bonf = bonferroni_adjust(p)
        order = np.argsort(p)
        # monotonicity in the raw values; domination by the one-step bound
        ok = ok and bool(np.all(np.diff(base[order]) >= -0.0))
        ok = ok and bool(np.all(base <= bonf))
        alphas = (0.01, 0.05, float(gen.uniform()))
        for perm in itertools.permutations(range(m)):
            perm = list(perm)
            q = holm_adjust(p[perm])
            ok = ok and np.array_equal(q, base[perm])
            for alpha in alphas:
                want = stepdown_decisions(p[perm].tolist(), alpha)
                ok = ok and (q <= alpha).tolist() == want
                checked += 1
            if not ok:
                break
        if not ok:
            break
    elapsed = time.perf_counter() - began
    verdict(8, "holm step-down agreement", ok and elapsed < 5.0,
            f"1000 vectors, every permutation, {checked} decision sets, "
            f"{elapsed:.1f}s")


def test_criterion_09_duplicated_candidate_changes_nothing():
    gen = np.random.default_rng(MASTER_SEED)
    n = 400
    z = gen.standard_normal((n, 2))
    x = z @ np.array([1.0, -0.5]) + gen.standard_normal(n)
    y = z @ np.array([0.5, 0.25]) + 0.4 * x + gen.standard_normal(n)
    x = x.reshape(-1, 1)
    single = gcm_test(y, x, z, OLS, OLS, rng=RngStream(seed=MASTER_SEED, stream=9))
    doubled = gcm_test(y, np.hstack([x, x]), z, OLS, OLS,
                       rng=RngStream(seed=MASTER_SEED, stream=9))
    gap = abs(single.p - doubled.p)
    ok = doubled.df == single.df and gap <= DUP_TOL
    verdict(9, "duplicated candidate", ok,
            f"df {single.df} == {doubled.df}, |p gap| {gap:.2e} (tol {DUP_TOL})")


def test_criterion_10_regression_counts_and_scaling():
    began = time.perf_counter()
    gcm_rows = run_timing([(500, d) for d in (1, 4, 8, 32)],
                          TestConfig(kind="gcm", base_engine=FOREST),
                          repeats=5, rng=RngStream(seed=MASTER_SEED, stream=10))
    counts = [row["regressions_per_test"] for row in gcm_rows]
    medians = [row["median_seconds"] for row in gcm_rows]
    pcm_rows = run_timing([(200, 1)],
                          TestConfig(kind="pcm", base_engine=RegressorSpec("constant"),
                                     k=3),
                          repeats=5, rng=RngStream(seed=MASTER_SEED, stream=11))
    elapsed = time.perf_counter() - began
    ok = (counts == [2, 5, 9, 33]
          and all(a < b for a, b in zip(medians, medians[1:]))
          and pcm_rows[0]["regressions_per_test"] == 15
          and elapsed < 600.0)
    verdict(10, "regression-count accounting", ok,
            f"gcm counts {counts} (d+1), medians "
            f"{['%.3f' % m for m in medians]} strictly increasing, "
            f"pcm count {pcm_rows[0]['regressions_per_test']} (5K), {elapsed:.1f}s")


def test_criterion_11_cli_reports_are_byte_identical(tmp_path, capsys):
    y_x_z = np.random.default_rng(MASTER_SEED).standard_normal((200, 4))
    dataset = Dataset(names=("y", "x1", "z1", "z2"), values=y_x_z)
    data_path = tmp_path / "data.csv"
    write_csv(dataset, str(data_path))

    mod_data, groups, response = two_modality_fixture(
        n=150, rng=RngStream(seed=MASTER_SEED, stream=12))
    mod_path = tmp_path / "modality.csv"
    write_csv(mod_data, str(mod_path))
    groups_path = tmp_path / "groups.json"
    groups_path.write_text(json.dumps(groups))

    sim_path = tmp_path / "experiment.json"
    sim_path.write_text(json.dumps({
        "mode": "calibration",
        "dgp": {"name": "linear-null", "n": 60, "d_z": 2},
        "test": {"kind": "gcm", "engines": {"base": {"kind": "linear"}}},
        "replicates": 3,
        "alpha": 0.05,
    }))

    linear = '{"kind":"linear"}'
    commands = {
        "gcm": ["gcm", "--data", str(data_path), "--response", "y",
                "--x", "x1", "--z", "z1,z2", "--engine", linear],
        "pcm": ["pcm", "--data", str(data_path), "--response", "y",
                "--x", "x1", "--z", "z1,z2", "--engine", linear, "--k", "2"],
        "sweep": ["sweep", "--data", str(data_path), "--response", "y",
                  "--engine", linear],
        "modality": ["modality", "--data", str(mod_path), "--response", response,
                     "--groups", str(groups_path), "--test", "gcm",
                     "--engine", linear],
        "simulate": ["simulate", "--config", str(sim_path)],
        "bench": ["bench", "--test", "gcm", "--engine", '{"kind":"constant"}',
                  "--n", "60", "--d", "1,2"],
    }

    mismatched = []
    for name, argv in commands.items():
        outs = [tmp_path / f"{name}.{i}.json" for i in (1, 2)]
        for out, threads in zip(outs, ("1", "3")):
            code = cli_main(argv + ["--seed", "21", "--threads", threads,
                                    "--out", str(out)])
            assert code == 0, (name, code)
        if outs[0].read_bytes() != outs[1].read_bytes():
            mismatched.append(name)
    capsys.readouterr()
    ok = not mismatched
    verdict(11, "cli determinism", ok,
            f"6 subcommands x 2 runs at --threads 1 vs 3, "
            f"mismatches: {mismatched or 'none'}")
