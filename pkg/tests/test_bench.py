import math

import numpy as np
import pytest

from recsim.bench import (
    ALGORITHMS,
    CSV_FIELDS,
    DIVERGENCE_FIELDS,
    SweepConfig,
    parse_grid,
    quartiles,
    read_csv,
    run_awgn_sweep,
    run_divergence_report,
    run_fixedkl_sweep,
    rows_to_csv,
    source_symbol,
    stat_row,
    worker_count,
)
from recsim.poisson import trial_seed


def test_parse_grid():
    assert parse_grid("1..4:4") == [1.0, 2.0, 3.0, 4.0]
    assert parse_grid("0..6:13")[1] == pytest.approx(0.5)
    assert parse_grid("5") == [5.0]
    assert parse_grid("3,1,2") == [1.0, 2.0, 3.0]
    assert parse_grid("2..2:1") == [2.0]


def test_worker_count(monkeypatch):
    monkeypatch.delenv("RECSIM_THREADS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("RECSIM_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2


def test_quartiles_are_ordered_and_match_numpy():
    rng = np.random.default_rng(0)
    for size in (1, 2, 7, 100):
        x = rng.geometric(0.3, size)
        q25, q50, q75 = quartiles(x)
        assert q25 <= q50 <= q75
        assert q50 == pytest.approx(np.percentile(x, 50, method="median_unbiased"))
    assert quartiles([1, 2, 3, 4, 5])[1] == 3.0


def test_stat_row_fields():
    row = stat_row("mi=1", "astar", [1, 2, 3, 4], [5, 6, 7, 8])
    assert set(row) == set(CSV_FIELDS)
    assert row["trials"] == 4
    assert row["steps_mean"] == pytest.approx(2.5)
    assert row["bits_se"] == pytest.approx(np.std([5, 6, 7, 8], ddof=1) / 2)


def test_source_symbol_is_gaussian():
    from scipy import stats

    xs = [source_symbol(trial_seed(1, i), 4.0) for i in range(3000)]
    assert stats.kstest(xs, stats.norm(0, 2).cdf).pvalue > 1e-3


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(grid=[]).validate()
    with pytest.raises(ValueError):
        SweepConfig(grid=[2, 1]).validate()
    with pytest.raises(ValueError):
        SweepConfig(grid=[1], algorithms=("nope",)).validate()
    with pytest.raises(ValueError):
        SweepConfig(grid=[1], trials=0).validate()


def test_awgn_sweep_shape_and_skip_marker():
    cfg = SweepConfig(experiment="awgn", trials=20, seed=1, grid=[1.0, 9.0],
                      algorithms=ALGORITHMS, mi_cap=8.0)
    rows = run_awgn_sweep(cfg)
    assert len(rows) == 2 * len(ALGORITHMS)
    assert [r["algorithm"] for r in rows[:len(ALGORITHMS)]] == list(ALGORITHMS)
    for r in rows:
        if r["setting"] == "mi=9" and r["algorithm"] not in ("bnb-astar", "bnb-gprs"):
            assert r["skipped_reason"] == "skipped: runtime"
            assert r["trials"] == 0
        else:
            assert r["skipped_reason"] == ""
            assert r["trials"] == 20
            assert r["steps_q25"] <= r["steps_median"] <= r["steps_q75"]
            assert r["bits_q25"] <= r["bits_median"] <= r["bits_q75"]
            assert r["steps_mean"] >= 1


def test_awgn_sweep_rejects_out_of_range():
    with pytest.raises(ValueError, match="outside"):
        run_awgn_sweep(SweepConfig(grid=[0.05]))
    with pytest.raises(ValueError, match="outside"):
        run_awgn_sweep(SweepConfig(grid=[13.0]))


def test_fixedkl_infeasible_grid_lists_the_minimum():
    with pytest.raises(ValueError, match=r"delta >= 2\.70"):
        run_fixedkl_sweep(SweepConfig(experiment="fixedkl", grid=[2.0, 5.0], kappa=2.0))
    with pytest.raises(ValueError, match="outside"):
        run_fixedkl_sweep(SweepConfig(experiment="fixedkl", grid=[30.0]))


def test_fixedkl_sweep_runs():
    cfg = SweepConfig(experiment="fixedkl", trials=30, seed=2, grid=[5.0, 15.0],
                      algorithms=("bnb-astar", "bnb-gprs"))
    rows = run_fixedkl_sweep(cfg)
    assert [(r["setting"], r["algorithm"]) for r in rows] == [
        ("delta=5", "bnb-astar"), ("delta=5", "bnb-gprs"),
        ("delta=15", "bnb-astar"), ("delta=15", "bnb-gprs")]


def test_results_do_not_depend_on_worker_count(tmp_path):
    base = dict(experiment="awgn", trials=12, seed=9, grid=[0.5, 2.0],
                algorithms=("astar", "gprs", "bnb-gprs"), deterministic=True)
    one = SweepConfig(**base, workers=1, out=str(tmp_path / "a.csv"))
    two = SweepConfig(**base, workers=2, out=str(tmp_path / "b.csv"))
    run_awgn_sweep(one)
    run_awgn_sweep(two)
    a, b = (tmp_path / "a.csv").read_text(), (tmp_path / "b.csv").read_text()
    assert a == b
    assert not a.startswith("#")
    assert a.splitlines()[0] == ",".join(CSV_FIELDS)


def test_csv_header_line_and_reader(tmp_path):
    cfg = SweepConfig(experiment="awgn", trials=5, seed=3, grid=[1.0], algorithms=("astar",),
                      out=str(tmp_path / "c.csv"))
    rows = run_awgn_sweep(cfg)
    text = (tmp_path / "c.csv").read_text()
    assert text.startswith("# recsim ")
    back = read_csv(tmp_path / "c.csv")
    assert len(back) == 1
    assert float(back[0]["steps_mean"]) == rows[0]["steps_mean"]


def test_rows_to_csv_roundtrips_floats():
    row = {k: "" for k in CSV_FIELDS}
    row.update(setting="s", algorithm="a", trials=1, steps_mean=1 / 3)
    text = rows_to_csv([row], CSV_FIELDS)
    assert repr(1 / 3) in text


def test_divergence_report():
    rows = run_divergence_report(SweepConfig(experiment="div", grid=[0.0, 1.0, 3.0]), dims=[1, 4])
    assert [r["panel"] for r in rows] == ["A", "A", "A", "B", "B"]
    assert set(rows[0]) <= set(DIVERGENCE_FIELDS)
    for r in rows:
        assert r["error"] == ""
        assert r["sandwich_ok"] is True
    a = [r for r in rows if r["panel"] == "A"]
    assert a[0]["kl_bits"] == pytest.approx(0.0, abs=1e-12)
    for r in a[1:]:
        assert r["csd_bits"] == pytest.approx(r["csd_closed_bits"], abs=1e-8)
    assert math.isfinite(rows[-1]["gap_bits"])


def test_channel_index_code_length_at_one_bit():
    # E[bits] is bounded by I + lb(I + 1) + 2 plus the coder's one-bit overhead
    rows = run_awgn_sweep(SweepConfig(trials=1000, seed=5, grid=[1.0], algorithms=("astar",)))
    row = rows[0]
    assert row["bits_mean"] <= 1.0 + math.log2(2.0) + 2.0 + 3 * row["bits_se"] + 1.0
    assert row["steps_mean"] >= 1


def test_single_trial_rows_have_collapsed_quartiles():
    row = run_awgn_sweep(SweepConfig(trials=1, seed=6, grid=[2.0], algorithms=("gprs",)))[0]
    assert row["steps_q25"] == row["steps_median"] == row["steps_q75"] == row["steps_mean"]


def test_laplace_gap_tends_to_the_euler_constant():
    rows = run_divergence_report(SweepConfig(experiment="div", grid=[0.0, 6.0]), dims=[])
    assert rows[0]["gap_bits"] == 0.0
    assert rows[1]["gap_bits"] == pytest.approx(0.5772156649015329 / math.log(2), abs=0.02)


def test_fixedkl_samples_are_exact():
    from scipy import stats

    from recsim.bnb import bnb_gprs
    from recsim.distributions import make_fixed_kl_pair
    from recsim.divergences import solve_stretch

    pair = make_fixed_kl_pair(2.0, 10.0)
    stretch = solve_stretch(pair)
    xs = [bnb_gprs(pair, stretch, trial_seed(8, i)).sample for i in range(2000)]
    target = stats.norm(pair.target.mean, pair.target.std).cdf
    assert stats.kstest(xs, target).pvalue > 1e-3
