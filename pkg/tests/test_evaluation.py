import math

import pytest

from coverplan.evaluation import (PRESETS, PUBLISHED_RESULTS, comparison_table, gap_report, optimality_gap,
                                  read_cost_csv, reference_costs, summary_text)
from coverplan.instance import generate_instance


def test_gap_rows_by_hand():
    report = gap_report({0: 5.5, 1: 4.0, 2: 3.3}, {0: 5.0, 1: 4.0, 2: 3.0})
    assert [r["gap"] for r in report.rows] == pytest.approx([0.1, 0.0, 0.1])
    s = report.summary()
    assert s["mean_gap"] == pytest.approx(0.2 / 3)
    assert s["median_gap"] == pytest.approx(0.1)
    assert s["mean_cost"] == pytest.approx(12.8 / 3)


def test_negative_gap_when_better():
    assert optimality_gap(9.0, 10.0) == pytest.approx(-0.1)


def test_missing_reference_excluded(caplog):
    report = gap_report({0: 1.0, 1: 2.0}, {0: 1.0})
    assert report.missing == [1] and len(report.rows) == 1
    assert "no reference" in caplog.text
    assert "excluded" in summary_text(report)


def test_import_reference_csv(tmp_path):
    path = tmp_path / "lkh.csv"
    path.write_text("instance_id,cost,time_s\n0,5.9028,1.159\n1,6.1,\n")
    costs, times = read_cost_csv(path)
    assert costs == {0: 5.9028, 1: 6.1} and times == {0: 1.159}
    report = gap_report({0: 5.0628, 1: 6.1}, costs)
    assert report.rows[0]["gap"] == pytest.approx((5.0628 - 5.9028) / 5.9028)


def test_bad_csv_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,value\n0,1\n")
    with pytest.raises(ValueError, match="instance_id"):
        read_cost_csv(path)


def test_reference_solvers():
    insts = [generate_instance(s, 3, 1) for s in range(3)]
    nn = reference_costs(insts, "nn")
    oracle = reference_costs(insts, "oracle")
    assert all(oracle[i] <= nn[i] + 1e-12 for i in range(3))
    gaps = gap_report(nn, oracle).gaps
    assert all(math.isfinite(g) and g >= -1e-12 for g in gaps)
    with pytest.raises(ValueError):
        reference_costs(insts, "lkh")


def test_report_csv(tmp_path):
    report = gap_report({0: 2.0}, {0: 1.0}, {0: 0.5})
    report.write_csv(tmp_path / "g.csv")
    assert (tmp_path / "g.csv").read_text().splitlines() == ["instance_id,cost,reference,gap,time_s",
                                                             "0,2.0,1.0,1.0,0.5"]


def test_published_constants_and_presets():
    assert PUBLISHED_RESULTS[(24, 4)]["LKH3"] == (5.9028, 1.159)
    assert PUBLISHED_RESULTS[(40, 5)]["learned"][0] == 6.5128
    assert PRESETS["in1"] == (40, 5) and PRESETS["out2"] == (120, 12) and PRESETS["out2-180"] == (180, 12)
    table = comparison_table(PUBLISHED_RESULTS[(72, 8)])
    assert "11.5958" in table and "9.1108" in table
