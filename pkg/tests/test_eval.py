"""Rolling windows, metrics, matrix runs with resume, and report aggregation."""

import numpy as np
import pytest

from conftest import random_walk_series
from sentarl import evaluation
from sentarl.a2c import A2cConfig
from sentarl.env import EnvConfig
from sentarl.evaluation import (RESULTS_HEADER, MatrixResult, TrialKey,
                                TrialResult, WindowSpec, annualized_return,
                                enumerate_keys, make_windows, parse_result_row,
                                read_results_csv, report, result_row,
                                run_buy_and_hold, run_matrix, sharpe,
                                total_return, write_results_csv)

# ---------------------------------------------------------------- windows


def test_make_windows_reference_shape():
    rolling = make_windows(5267)
    assert len(rolling) == 5
    assert rolling.windows[0] == ((20, 3397), (3397, 3771))
    assert rolling.windows[-1] == ((1516, 4893), (4893, 5267))
    # train:test is roughly 0.9:0.1 of each split
    assert 3377 / (3377 + 374) == pytest.approx(0.9, abs=0.001)


def test_make_windows_properties():
    rolling = make_windows(500, train_len=100, test_len=20, stride=30, count=4)
    seen_tests = []
    for (train_start, train_end), (test_start, test_end) in rolling.windows:
        assert train_end - train_start == 100
        assert test_end - test_start == 20
        assert train_end == test_start  # test follows train immediately
        for lo, hi in seen_tests:      # disjoint test ranges
            assert test_start >= hi or test_end <= lo
        seen_tests.append((test_start, test_end))
    assert rolling.windows[-1][1][1] == 500  # anchored to the series end


def test_make_windows_single():
    rolling = make_windows(100, train_len=60, test_len=20, stride=20, count=1)
    assert rolling.windows == (((20, 80), (80, 100)),)


def test_make_windows_errors():
    with pytest.raises(ValueError, match="cannot fit"):
        make_windows(100, train_len=90, test_len=20, stride=20, count=1)
    with pytest.raises(ValueError, match="stride"):
        WindowSpec(train_len=10, test_len=20, stride=10, count=1)
    with pytest.raises(ValueError, match="positive"):
        WindowSpec(train_len=0, test_len=1, stride=1, count=1)


# ---------------------------------------------------------------- metrics


def test_total_return():
    assert total_return([1.0, 0.43, 1.0], 100.0) == pytest.approx(0.0243)
    assert total_return([], 50.0) == 0.0
    with pytest.raises(ValueError):
        total_return([1.0], 0.0)


def test_annualized_return():
    assert annualized_return(0.0, 77) == 0.0
    assert annualized_return(0.5, 365) == pytest.approx(0.5, rel=1e-15)
    # compounding a 77-day return over a year amplifies it
    assert annualized_return(0.0243, 77) > 0.0243
    assert annualized_return(-0.5, 365) == pytest.approx(-0.5, rel=1e-15)
    assert annualized_return(0.1, 77) > annualized_return(0.05, 77)


def test_annualized_return_errors():
    with pytest.raises(ValueError, match="trading_days"):
        annualized_return(0.1, 0)
    with pytest.raises(ValueError, match="tr"):
        annualized_return(-1.0, 77)


def test_sharpe():
    assert sharpe([1.0, 2.0, 3.0]) == 2.0
    assert sharpe([5.0, 5.0, 5.0]) is None
    # constant input whose float mean is inexact must still be undefined
    assert sharpe([0.2, 0.2, 0.2]) is None
    with pytest.raises(ValueError):
        sharpe([1.0])
    base = sharpe([0.1, 0.3, 0.2, 0.5])
    scaled = sharpe([0.4, 1.2, 0.8, 2.0])
    assert scaled == pytest.approx(base, rel=1e-12)


# ---------------------------------------------------------------- rows


def test_result_row_round_trip():
    for ar in (0.125, None):
        result = TrialResult("BTC", 3, 2, 0.0025, "sentarl", -0.07, ar, 14)
        again = parse_result_row(result_row(result))
        assert vars(again) == vars(result)


def test_results_csv_round_trip(tmp_path):
    rows = [result_row(TrialResult("B", 0, 1, 0.0, "sentarl", 0.2, 0.5, 3)),
            result_row(TrialResult("A", 1, 0, 0.0, "sentarl", 0.1, None, 2)),
            result_row(TrialResult("A", 0, 0, 0.0, "sentarl", 0.3, 0.9, 1))]
    path = tmp_path / "results.csv"
    write_results_csv(rows, path)
    parsed = read_results_csv(path)
    assert [r.asset for r in parsed] == ["A", "A", "B"]  # sorted on write
    assert parsed[1].ar is None
    (tmp_path / "bad.csv").write_text("x,y\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        read_results_csv(tmp_path / "bad.csv")


def test_enumerate_keys_order_and_dedupe():
    keys = enumerate_keys(["B", "A"], 2, [1, 0, 1], [0.0025, 0.0], ["sentarl"])
    assert len(keys) == 2 * 2 * 2 * 2
    assert keys == sorted(keys)
    assert keys[0] == TrialKey("A", 0, 0, 0.0, "sentarl")


# ---------------------------------------------------------------- trials


def test_run_buy_and_hold_ignores_costs():
    series = random_walk_series(40, seed=21)
    costly = run_buy_and_hold(series, EnvConfig(w=3, l=2, tc_rate=0.5))
    free = run_buy_and_hold(series, EnvConfig(w=3, l=2, tc_rate=0.0))
    assert costly == free
    assert costly[2] == 1  # single entry trade


SMALL_WINDOWS = WindowSpec(train_len=30, test_len=10, stride=10, count=2)
SMALL_ENV = EnvConfig(w=3, l=2)
SMALL_AGENT = A2cConfig(episodes=2, hidden_sizes=(4,))


def small_matrix(out_dir=None, **kwargs):
    series = {"AAA": random_walk_series(60, seed=31, asset="AAA")}
    defaults = dict(window_spec=SMALL_WINDOWS, seeds=[0, 1], tc_rates=[0.0],
                    strategies=list(evaluation.STRATEGIES), env_config=SMALL_ENV,
                    a2c_config=SMALL_AGENT, out_dir=out_dir)
    defaults.update(kwargs)
    return run_matrix(series, **defaults)


def test_run_matrix_cardinality_and_order():
    out = small_matrix()
    assert isinstance(out, MatrixResult)
    assert not out.failures and out.pending == 0
    assert len(out.results) == 2 * 2 * 1 * 3  # windows x seeds x tc x strategies
    keys = [r.key for r in out.results]
    assert keys == sorted(keys)
    assert len(set(keys)) == len(keys)


def test_run_matrix_replicates_benchmark():
    out = small_matrix()
    bh = [r for r in out.results if r.strategy == "buy-and-hold"]
    for window in (0, 1):
        rows = [r for r in bh if r.window == window]
        assert len(rows) == 2  # one per seed
        assert len({(r.tr, r.ar, r.trade_count) for r in rows}) == 1


def test_run_matrix_validation():
    with pytest.raises(ValueError, match="non-empty"):
        small_matrix(seeds=[])
    with pytest.raises(ValueError, match="unknown strategies"):
        small_matrix(strategies=["sentarl", "oracle"])


def test_run_matrix_limit_then_resume(tmp_path):
    first = small_matrix(out_dir=tmp_path / "run")
    straight = (tmp_path / "run" / "results.csv").read_bytes()

    resumed_dir = tmp_path / "resumed"
    partial = small_matrix(out_dir=resumed_dir, limit=5)
    assert partial.pending == 12 - 5
    assert not (resumed_dir / "results.csv").exists()
    journal = (resumed_dir / "results.journal.csv").read_text().splitlines()
    assert len(journal) == 1 + 5

    rest = small_matrix(out_dir=resumed_dir)
    assert rest.pending == 0
    assert (resumed_dir / "results.csv").read_bytes() == straight
    assert len(first.results) == len(rest.results)


def test_run_matrix_records_failures(tmp_path, monkeypatch):
    real = evaluation.run_agent_trial

    def flaky(key, *args, **kwargs):
        if key.seed == 1 and key.strategy == "sentarl":
            raise RuntimeError("injected fault")
        return real(key, *args, **kwargs)

    monkeypatch.setattr(evaluation, "run_agent_trial", flaky)
    out = small_matrix(out_dir=tmp_path)
    assert len(out.failures) == 2  # one per window
    assert all("injected fault" in f.error for f in out.failures)
    assert len(out.results) == 12 - 2
    assert not (tmp_path / "results.csv").exists()

    monkeypatch.setattr(evaluation, "run_agent_trial", real)
    healed = small_matrix(out_dir=tmp_path)
    assert not healed.failures
    assert len(healed.results) == 12
    assert (tmp_path / "results.csv").exists()


def test_run_matrix_parallel_matches_sequential(tmp_path):
    seq = small_matrix(out_dir=tmp_path / "seq")
    par = small_matrix(out_dir=tmp_path / "par", workers=2)
    assert (tmp_path / "seq" / "results.csv").read_bytes() == \
        (tmp_path / "par" / "results.csv").read_bytes()
    assert len(seq.results) == len(par.results)


def test_run_matrix_artifacts(tmp_path):
    small_matrix(out_dir=tmp_path, seeds=[0], artifacts=True)
    stems = {p.name for p in (tmp_path / "artifacts").iterdir()}
    assert "AAA_w0_s0_tc0.0_sentarl.policy.json" in stems
    assert "AAA_w0_s0_tc0.0_sentarl.equity.csv" in stems
    assert "AAA_w1_s0_tc0.0_no-sentiment.train.csv" in stems
    # benchmark trials produce no artifacts
    assert not any("buy-and-hold" in s for s in stems)


# ---------------------------------------------------------------- reports


def plain_result(asset, window, seed, tc, strategy, tr, ar=None, trades=0):
    return TrialResult(asset, window, seed, tc, strategy, tr, ar, trades)


def test_report_single_benchmark_row():
    results = [plain_result("A", 0, 0, 0.0, "buy-and-hold", 0.05, ar=0.3, trades=1)]
    bundle = report(results)
    assert len(bundle.overall) == 1
    row = bundle.overall[0]
    assert row.strategy == "buy-and-hold"
    assert row.tc is None
    assert row.mean_tr == pytest.approx(0.05)
    assert row.sharpe is None  # one sample, undefined
    assert bundle.by_asset[0].best is None


def test_report_identical_strategies_zero_gap():
    results = []
    for seed, tr in ((0, 0.1), (1, 0.2)):
        results.append(plain_result("A", 0, seed, 0.0, "sentarl", tr))
        results.append(plain_result("A", 0, seed, 0.0, "no-sentiment", tr))
    series = {"A": random_walk_series(40, seed=41, asset="A")}
    bundle = report(results, series_by_asset=series)
    assert len(bundle.scatter) == 1
    assert bundle.scatter[0].tr_diff == 0.0
    assert 0.0 <= bundle.scatter[0].coverage <= 1.0
    for row in bundle.overall:
        assert row.mean_tr == pytest.approx(0.15)


def test_report_groups_by_tc():
    results = []
    for tc, base in ((0.0, 0.1), (0.0025, 0.0)):
        for seed in (0, 1):
            results.append(plain_result("A", 0, seed, tc, "sentarl", base + seed * 0.1))
    bundle = report(results)
    assert [(r.strategy, r.tc) for r in bundle.overall] == \
        [("sentarl", 0.0), ("sentarl", 0.0025)]
    assert bundle.overall[0].mean_tr == pytest.approx(0.15)
    assert bundle.overall[1].mean_tr == pytest.approx(0.05)
    assert len(bundle.by_asset) == 2  # one row per (asset, tc)


def test_report_best_marks_highest_sharpe():
    results = []
    for seed, (good, bad) in ((0, (0.10, 0.10)), (1, (0.30, 0.11))):
        results.append(plain_result("A", 0, seed, 0.0, "sentarl", good))
        results.append(plain_result("A", 0, seed, 0.0, "no-sentiment", bad))
    bundle = report(results)
    row = bundle.by_asset[0]
    assert row.sharpe_by_strategy["no-sentiment"] > row.sharpe_by_strategy["sentarl"]
    assert row.best == "no-sentiment"


def test_report_empty_rejected():
    with pytest.raises(ValueError, match="no results"):
        report([])


def test_report_files(tmp_path):
    results = [plain_result("A", 0, 0, 0.0, "buy-and-hold", 0.05, ar=0.3, trades=1),
               plain_result("A", 0, 0, 0.0, "sentarl", 0.1, ar=0.6, trades=4),
               plain_result("A", 0, 1, 0.0, "sentarl", 0.2, ar=0.9, trades=6)]
    series = {"A": random_walk_series(40, seed=43, asset="A")}
    report(results, series_by_asset=series, out_dir=tmp_path)
    overall = (tmp_path / "overall.csv").read_text().splitlines()
    assert overall[0] == "strategy,tc,mean_tr,mean_ar,sharpe"
    bench = [line for line in overall if line.startswith("buy-and-hold")][0]
    assert bench.split(",")[1] == "-"   # benchmark pays no tc
    assert bench.split(",")[4] == ""    # single sample, sharpe undefined
    by_asset = (tmp_path / "sharpe_by_asset.csv").read_text().splitlines()
    assert by_asset[0] == "asset,tc,sr_buy-and-hold,sr_sentarl,best"
    scatter = (tmp_path / "scatter.csv").read_text().splitlines()
    assert scatter[0] == "asset,coverage,corr_shift0,tr_diff"
    assert scatter[1].endswith(",")     # no ablation rows, tr_diff undefined
