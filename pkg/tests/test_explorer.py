import csv
import json
import math

import numpy as np
import pytest

from icgw.boxes import isotropic_box, pr_box
from icgw.explorer import (
    CSV_COLUMNS,
    BudgetExceeded,
    SweepConfig,
    SweepResult,
    enumerate_classical_suite,
    evaluate_cell,
    read_report,
    regime_label,
    report_dict,
    run_sweep,
    summarize,
    validate_report,
    write_report,
)
from icgw.game import BoxStrategy, ClassicalStrategy
from icgw.gray_wyner import DualOptions, MembershipOptions
from icgw.info import DomainError, dsbs, uniform_bits

FAST = {"restarts": 4, "iterations": 150}


def cell(p, box, eta, sid="src"):
    opts = MembershipOptions(dual=DualOptions(restarts=4, iterations=150))
    return evaluate_cell(0, sid, {}, p, "t", eta, BoxStrategy.uniform(box, 1), opts)


def test_regime_labels():
    assert regime_label(None) == "classical"
    assert regime_label(0.5) == "classical"
    assert regime_label(0.5 + 1e-6) == "quantum"
    assert regime_label(math.sqrt(2) / 2) == "quantum"
    assert regime_label(0.71) == "superquantum"
    assert regime_label(1.0) == "superquantum"


def test_noise_box_record():
    r = cell(uniform_bits(2), isotropic_box(0.0), 0.0)
    assert r.evaluation["I"] == pytest.approx([0, 0], abs=1e-12)
    assert r.rate_point == pytest.approx([1, 1, 1], abs=1e-12)
    assert r.verdict == "Inside" and r.regime == "classical"
    assert not r.correlated and not r.flagged


def test_pr_record_on_uniform_bits():
    r = cell(uniform_bits(2), pr_box(), 1.0)
    assert not r.eq1_holds and not r.eq2_holds
    assert r.rate_point == pytest.approx([1, 0, 0], abs=1e-9)
    # (1, 0, 0) misses H(a_1, a_2) = 2 by one bit
    assert r.verdict == "Outside"
    assert r.verdict_detail["facets"]["slacks"]["{1,2}"] == pytest.approx(-1.0, abs=1e-9)
    assert r.regime == "superquantum" and not r.flagged


def test_dsbs_record_populated():
    r = cell(dsbs(0.1), isotropic_box(0.6), 0.6)
    assert r.correlated and r.regime == "quantum"
    assert r.verdict in ("Inside", "Undetermined")
    assert set(r.evaluation) >= {"H_x", "I", "C", "eq1_lhs", "eq2_rhs"}


def small_config(**kw):
    d = {
        "sources": [{"family": "dsbs", "grid": [0.0, 0.2]}, {"family": "product-bernoulli", "grid": [0.5]}],
        "strategies": [{"family": "isotropic", "grid": [0.0, 0.5, 0.7]}, {"family": "pr"}],
        "membership": FAST,
        "master_seed": 3,
    }
    d.update(kw)
    return SweepConfig.from_dict(d)


def test_sweep_cells_and_summary():
    res = run_sweep(small_config())
    assert len(res.records) == 3 * 4
    assert [r.cell for r in res.records] == list(range(12))
    s = res.summary
    assert s["n_records"] == 12
    assert sum(sum(c.values()) for c in s["counts"].values()) == 12
    for reg, c in s["counts"].items():
        for v, n in c.items():
            assert n == sum(r.regime == reg and r.verdict == v for r in res.records)
    for r in res.records:
        if r.regime == "classical":
            assert r.verdict != "Outside" and r.eq2_holds


def test_sweep_reproducible(tmp_path):
    a, b = run_sweep(small_config()), run_sweep(small_config())
    write_report(a, tmp_path / "a", config=small_config().to_dict())
    write_report(b, tmp_path / "b", config=small_config().to_dict())
    for name in ("report.json", "report.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parallel_matches_serial(tmp_path):
    a = run_sweep(small_config())
    b = run_sweep(small_config(jobs=2))
    assert report_dict(a) == report_dict(b)


def test_report_round_trip(tmp_path):
    res = run_sweep(small_config())
    paths = write_report(res, tmp_path)
    assert [p.name for p in paths] == ["report.json", "report.csv"]
    back = read_report(tmp_path / "report.json")
    assert [r.to_dict() for r in back.records] == [r.to_dict() for r in res.records]
    validate_report(json.loads((tmp_path / "report.json").read_text()))
    rows = list(csv.reader(open(tmp_path / "report.csv")))
    assert rows[0][:2] == ["schema_version", "1"]
    assert rows[1] == CSV_COLUMNS
    assert len(rows) - 2 == len(res.records)


def test_empty_report(tmp_path):
    res = SweepResult([], summarize([]))
    write_report(res, tmp_path)
    d = json.loads((tmp_path / "report.json").read_text())
    validate_report(d)
    assert d["summary"]["n_records"] == 0 and d["summary"]["flagged_cells"] == []
    assert all(n == 0 for c in d["summary"]["counts"].values() for n in c.values())


def test_validate_report_rejects_bad_records():
    d = report_dict(SweepResult([], summarize([])))
    d["summary"]["n_records"] = 1
    with pytest.raises(DomainError):
        validate_report(d)
    with pytest.raises(DomainError):
        validate_report({"records": []})


def test_write_report_error_has_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        write_report(SweepResult([], summarize([])), blocker / "sub")


@pytest.mark.parametrize(
    "bad",
    [
        {"sources": [], "strategies": [{"family": "pr"}]},
        {"sources": [{"family": "dsbs", "grid": [0.7]}], "strategies": [{"family": "pr"}]},
        {"sources": [{"family": "dsbs", "grid": []}], "strategies": [{"family": "pr"}]},
        {"sources": [{"family": "dsbs", "grid": [0.1]}], "strategies": [{"family": "isotropic", "grid": [1.2]}]},
        {"sources": [{"family": "dsbs", "grid": [0.1]}], "strategies": [{"family": "magic"}]},
        {"sources": [{"family": "nope"}], "strategies": [{"family": "pr"}]},
        {"sources": [{"family": "dsbs", "grid": [0.1]}], "strategies": [{"family": "pr"}], "k": 2},
        {"sources": [{"family": "dsbs", "grid": [0.1]}], "strategies": [{"family": "pr"}], "colour": 1},
        {"sources": [{"family": "dsbs", "grid": [0.1]}], "strategies": [{"family": "pr"}], "membership": {"bogus": 1}},
    ],
)
def test_config_validation(bad):
    with pytest.raises(DomainError):
        SweepConfig.from_dict(bad)


def test_random_and_explicit_sources():
    cfg = SweepConfig.from_dict({
        "sources": [
            {"family": "random", "count": 2, "seed": 5},
            {"family": "explicit", "pmfs": [{"arities": [2, 2], "probs": [0.4, 0.1, 0.1, 0.4], "id": "mine"}]},
        ],
        "strategies": [{"family": "isotropic", "grid": [0.3]}],
        "membership": FAST,
    })
    res = run_sweep(cfg)
    assert [r.source_id for r in res.records] == ["random:5:0", "random:5:1", "mine"]


def test_k2_sweep():
    cfg = SweepConfig.from_dict({
        "sources": [{"family": "product-bernoulli", "grid": [0.5]}],
        "strategies": [{"family": "pr"}],
        "k": 2,
        "membership": FAST,
    })
    (r,) = run_sweep(cfg).records
    assert sum(r.evaluation["I"]) == pytest.approx(4.0, abs=1e-9)


# -- classical suite ---------------------------------------------------------

SUITE_OPTS = MembershipOptions(dual=DualOptions(restarts=4, iterations=100))


@pytest.mark.parametrize("p", [uniform_bits(2), dsbs(0.0)], ids=["uniform", "copy"])
def test_classical_suite_clean(p):
    res = enumerate_classical_suite(p, n_mixtures=8, opts=SUITE_OPTS)
    assert res.n_deterministic == 2**4 * 2**4
    assert res.violations == []
    assert res.verdict_counts["Outside"] == 0
    assert res.min_eq2_slack >= -1e-9


def test_constant_message_slack():
    # x constant, Bob guesses constants: H(x) = 0 and each H(a_i | beta) = 1
    from icgw.game import evaluate_ic, run_classical_strategy

    p = uniform_bits(2)
    st = ClassicalStrategy.from_maps(2, 2, lambda bits, r: 0, lambda x, b, r: 0)
    ev = evaluate_ic(run_classical_strategy(p, st), p)
    assert ev.eq2_lhs - ev.eq2_rhs == pytest.approx(0.0, abs=1e-12)


def test_classical_suite_budget():
    with pytest.raises(BudgetExceeded):
        enumerate_classical_suite(uniform_bits(2), message_bits=2, budget=1000)
    with pytest.raises(DomainError):
        enumerate_classical_suite(uniform_bits(2), seed_arity_cap=0, n_mixtures=0)
